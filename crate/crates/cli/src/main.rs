//! `cm-reduce`: centre-manifold reduction from the command line.
//!
//! Subcommands: `reduce` (compute the manifold and the reduced model),
//! `verify` (theorem probe plus full-vs-reduced trajectory comparison),
//! `check-order` (order certification of a polynomial file).
//!
//! Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 parse/validation
//! error, 3 solver error, 4 trajectory blow-up.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cm_core::cmsolve::{
    default_max_iter, iterate_fixed_point, reduce_model, solve_graded, ManifoldApprox, Method,
    ModelOrder, ReducedModel,
};
use cm_core::order::{OrderMode, OrderSpec};
use cm_core::poly::{rational_from_str, Layout, Monomial, Polynomial, Rational, TermRecord};
use cm_core::sysmodel::{parse_system, validate_spectrum, CentreSystem, SpectrumReport, DEFAULT_SPECTRUM_TOL};
use cm_core::verify::{
    check_residual_order, check_theorem4_consistency, run_one, NumericConfig, OrderCertificate,
    StableStart, TrajectoryReport,
};

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_BLOWUP: u8 = 4;

#[derive(Parser)]
#[command(name = "cm-reduce", version, about = "Centre-manifold reduction with flexible error orders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the manifold approximation and the reduced model
    Reduce(ReduceArgs),
    /// Probe the approximation order and compare trajectories numerically
    Verify(VerifyArgs),
    /// Certify the asymptotic order of a polynomial term-list file
    CheckOrder(CheckOrderArgs),
}

#[derive(Args)]
struct OrderArgs {
    /// Truncation order q in the centre variables (q > 1)
    #[arg(long = "order-x")]
    order_x: u32,
    /// Truncation order p in the parameters (p >= 1)
    #[arg(long = "order-eps")]
    order_eps: u32,
    /// Per-centre-variable weights, e.g. `1,1/2`
    #[arg(long = "x-weights", value_delimiter = ',')]
    x_weights: Option<Vec<String>>,
    /// Per-parameter weights, e.g. `2` for a sqrt rescaling
    #[arg(long = "eps-weights", value_delimiter = ',')]
    eps_weights: Option<Vec<String>>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Graded,
    FixedPoint,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModelOrderArg {
    #[value(name = "q+1")]
    QPlusOne,
    #[value(name = "q")]
    Q,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutputArg {
    Text,
    Json,
}

#[derive(Args)]
struct ReduceArgs {
    /// System description file
    #[arg(long)]
    system: PathBuf,
    #[command(flatten)]
    order: OrderArgs,
    #[arg(long, value_enum, default_value = "graded")]
    method: MethodArg,
    /// Fixed-point iteration budget (default (q-1)+(p-1))
    #[arg(long)]
    max_iter: Option<u32>,
    /// Truncation convention for the reduced model
    #[arg(long = "model-order", value_enum, default_value = "q+1")]
    model_order: ModelOrderArg,
    #[arg(long, value_enum, default_value = "text")]
    output: OutputArg,
    /// Spectrum hypothesis tolerance
    #[arg(long = "spectrum-tol", default_value_t = DEFAULT_SPECTRUM_TOL)]
    spectrum_tol: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    system: PathBuf,
    #[command(flatten)]
    order: OrderArgs,
    /// Parameter values, comma separated; for several parameters use `:`
    /// inside one value, e.g. `0.05:0.1,0.1:0.1`
    #[arg(long, required = true, value_delimiter = ',')]
    eps: Vec<String>,
    /// Initial centre state, comma separated
    #[arg(long, required = true, value_delimiter = ',')]
    x0: Vec<f64>,
    /// Initial stable state (comma separated) or `on-manifold`
    #[arg(long, default_value = "on-manifold")]
    y0: String,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long = "t-end", default_value_t = 20.0)]
    t_end: f64,
    /// Transient cut; defaults to half the horizon
    #[arg(long = "t-transient")]
    t_transient: Option<f64>,
    /// Theorem-probe spec enlargement `dq,dp`
    #[arg(long, default_value = "2,2")]
    boost: String,
    /// Maximum allowed manifold deviation past the transient
    #[arg(long = "deviation-tol", default_value_t = 1e-4)]
    deviation_tol: f64,
    #[arg(long = "model-order", value_enum, default_value = "q+1")]
    model_order: ModelOrderArg,
    /// Write trajectory samples as CSV (one file per eps value)
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    output: OutputArg,
    #[arg(long = "spectrum-tol", default_value_t = DEFAULT_SPECTRUM_TOL)]
    spectrum_tol: f64,
}

#[derive(Args)]
struct CheckOrderArgs {
    /// Polynomial file: JSON array of `{"coeff", "x", "y", "eps"}` terms
    poly: PathBuf,
    #[command(flatten)]
    order: OrderArgs,
    /// Check against the coupled class with this exponent instead of the
    /// flexible (order-x, order-eps) class
    #[arg(long)]
    coupled: Option<u32>,
    #[arg(long, value_enum, default_value = "text")]
    output: OutputArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Reduce(args) => cmd_reduce(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::CheckOrder(args) => cmd_check_order(&args),
    };
    ExitCode::from(code)
}

fn fail(code: u8, msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    code
}

fn color_enabled() -> bool {
    std::env::var("CM_REDUCE_COLOR").map(|v| v == "1").unwrap_or(false)
}

fn verdict_str(pass: bool) -> String {
    let word = if pass { "PASS" } else { "FAIL" };
    if color_enabled() {
        let code = if pass { "32" } else { "31" };
        format!("\x1b[{code}m{word}\x1b[0m")
    } else {
        word.to_string()
    }
}

fn build_spec(order: &OrderArgs, shape: Layout) -> Result<OrderSpec, String> {
    let parse_weights = |ws: &Option<Vec<String>>, len: usize, what: &str| -> Result<Vec<Rational>, String> {
        match ws {
            None => Ok(vec![num_traits_one(); len]),
            Some(ws) => {
                if ws.len() != len {
                    return Err(format!("{what} needs {len} entries, got {}", ws.len()));
                }
                ws.iter()
                    .map(|w| rational_from_str(w).ok_or_else(|| format!("bad weight `{w}`")))
                    .collect()
            }
        }
    };
    let xw = parse_weights(&order.x_weights, shape.centre, "--x-weights")?;
    let ew = parse_weights(&order.eps_weights, shape.params, "--eps-weights")?;
    OrderSpec::weighted(order.order_x, order.order_eps, xw, ew).map_err(|e| e.to_string())
}

fn num_traits_one() -> Rational {
    Rational::from_integer(1.into())
}

fn load_system(path: &PathBuf) -> Result<CentreSystem, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_system(&text).map_err(|e| e.to_string())
}

fn poly_human(poly: &Polynomial, sys: &CentreSystem) -> String {
    poly.format_with(&sys.layout.centre, &sys.layout.stable, &sys.layout.params)
}

fn mono_human(mono: &Monomial, sys: &CentreSystem) -> String {
    let poly = Polynomial::from_terms(mono.layout(), vec![(mono.clone(), num_traits_one())]);
    poly_human(&poly, sys)
}

fn certificate_json(cert: &OrderCertificate) -> serde_json::Value {
    let mode = match &cert.mode {
        OrderMode::Flexible(spec) => json!({"kind": "flexible", "spec": spec.to_json()}),
        OrderMode::Coupled { p, q } => json!({"kind": "coupled", "p": p, "q": q}),
    };
    json!({
        "mode": mode,
        "pass": cert.pass,
        "offenders": cert.offenders.iter().map(|m| json!({"x": m.xexp, "y": m.yexp, "eps": m.eexp})).collect::<Vec<_>>(),
        "residual_terms": cert.residual_terms,
    })
}

fn manifold_json(approx: &ManifoldApprox) -> serde_json::Value {
    let method = match approx.method {
        Method::Graded => json!({"name": "graded"}),
        Method::FixedPoint { iterations } => json!({"name": "fixed-point", "iterations": iterations}),
    };
    json!({
        "phi": approx.phi.iter().map(|p| p.to_term_list()).collect::<Vec<_>>(),
        "spec": approx.spec.to_json(),
        "method": method,
    })
}

fn spectrum_json(report: &SpectrumReport) -> serde_json::Value {
    serde_json::to_value(report).expect("spectrum report serializes")
}

fn solve(sys: &CentreSystem, spec: &OrderSpec, method: MethodArg, max_iter: Option<u32>) -> Result<ManifoldApprox, String> {
    match method {
        MethodArg::Graded => solve_graded(sys, spec).map_err(|e| e.to_string()),
        MethodArg::FixedPoint => {
            let budget = max_iter.unwrap_or_else(|| default_max_iter(spec).max(1));
            iterate_fixed_point(sys, spec, budget).map_err(|e| e.to_string())
        }
    }
}

fn cmd_reduce(args: &ReduceArgs) -> u8 {
    let started = std::time::Instant::now();
    let sys = match load_system(&args.system) {
        Ok(sys) => sys,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let spec = match build_spec(&args.order, sys.shape()) {
        Ok(spec) => spec,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let spectrum = match validate_spectrum(&sys, args.spectrum_tol) {
        Ok(report) => report,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    if !spectrum.pass {
        return fail(
            EXIT_INPUT,
            format!(
                "spectral hypotheses violated: max |Re lambda(A)| = {:.3e}, max Re lambda(B) = {:.3e}",
                spectrum.max_abs_re_a, spectrum.max_re_b
            ),
        );
    }
    let approx = match solve(&sys, &spec, args.method, args.max_iter) {
        Ok(approx) => approx,
        Err(e) => return fail(EXIT_SOLVER, e),
    };
    let convention = match args.model_order {
        ModelOrderArg::QPlusOne => ModelOrder::QPlusOne,
        ModelOrderArg::Q => ModelOrder::Q,
    };
    let model = match reduce_model(&sys, &approx, convention) {
        Ok(model) => model,
        Err(e) => return fail(EXIT_SOLVER, e),
    };
    let cert = match check_residual_order(&sys, &approx.phi, &OrderMode::Flexible(spec.clone())) {
        Ok(cert) => cert,
        Err(e) => return fail(EXIT_SOLVER, e),
    };
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    match args.output {
        OutputArg::Json => {
            let report = json!({
                "schema": 1,
                "command": "reduce",
                "spectrum": spectrum_json(&spectrum),
                "manifold": manifold_json(&approx),
                "reduced_model": {
                    "rhs": model.rhs.iter().map(|p| p.to_term_list()).collect::<Vec<_>>(),
                    "spec": model.spec.to_json(),
                },
                "residual_certificate": certificate_json(&cert),
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
        }
        OutputArg::Text => {
            print_reduce_text(&sys, &spectrum, &approx, &model, &cert, elapsed_ms);
        }
    }
    if cert.pass {
        0
    } else {
        EXIT_FAIL
    }
}

fn print_reduce_text(
    sys: &CentreSystem,
    spectrum: &SpectrumReport,
    approx: &ManifoldApprox,
    model: &ReducedModel,
    cert: &OrderCertificate,
    elapsed_ms: f64,
) {
    println!(
        "spectrum: {}  (max |Re lambda(A)| = {:.3e}, max Re lambda(B) = {:.3e})",
        verdict_str(spectrum.pass),
        spectrum.max_abs_re_a,
        spectrum.max_re_b
    );
    let method = match approx.method {
        Method::Graded => "graded".to_string(),
        Method::FixedPoint { iterations } => format!("fixed-point ({iterations} iterations)"),
    };
    println!("method: {method}");
    println!(
        "order: O(x^{}, eps^{})",
        approx.spec.q(),
        approx.spec.p()
    );
    for (name, phi) in sys.layout.stable.iter().zip(&approx.phi) {
        println!("{name} = {}", poly_human(phi, sys));
    }
    println!("reduced model:");
    for (name, rhs) in sys.layout.centre.iter().zip(&model.rhs) {
        println!("{name}' = {}", poly_human(rhs, sys));
    }
    println!(
        "residual order: {}  ({} residual terms)",
        verdict_str(cert.pass),
        cert.residual_terms
    );
    for mono in &cert.offenders {
        println!("  offender: {}", mono_human(mono, sys));
    }
    println!("elapsed: {elapsed_ms:.1} ms");
}

fn parse_eps_values(raw: &[String], params: usize) -> Result<Vec<Vec<f64>>, String> {
    raw.iter()
        .map(|entry| {
            let parts: Result<Vec<f64>, _> = entry.split(':').map(|v| v.trim().parse::<f64>()).collect();
            let parts = parts.map_err(|e| format!("bad eps value `{entry}`: {e}"))?;
            if parts.len() != params {
                return Err(format!("eps value `{entry}` has {} components, system has {params} parameters", parts.len()));
            }
            Ok(parts)
        })
        .collect()
}

fn cmd_verify(args: &VerifyArgs) -> u8 {
    let sys = match load_system(&args.system) {
        Ok(sys) => sys,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let spec = match build_spec(&args.order, sys.shape()) {
        Ok(spec) => spec,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let spectrum = match validate_spectrum(&sys, args.spectrum_tol) {
        Ok(report) => report,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    if !spectrum.pass {
        return fail(EXIT_INPUT, "spectral hypotheses violated");
    }
    let eps_values = match parse_eps_values(&args.eps, sys.shape().params) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let boost = match args.boost.split_once(',') {
        Some((a, b)) => match (a.trim().parse::<u32>(), b.trim().parse::<u32>()) {
            (Ok(dq), Ok(dp)) => (dq, dp),
            _ => return fail(EXIT_INPUT, format!("bad --boost `{}`", args.boost)),
        },
        None => return fail(EXIT_INPUT, format!("bad --boost `{}`", args.boost)),
    };
    let y0 = if args.y0 == "on-manifold" {
        StableStart::OnManifold
    } else {
        let parts: Result<Vec<f64>, _> = args.y0.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match parts {
            Ok(v) => StableStart::Explicit(v),
            Err(e) => return fail(EXIT_INPUT, format!("bad --y0 `{}`: {e}", args.y0)),
        }
    };
    if args.x0.len() != sys.shape().centre {
        return fail(EXIT_INPUT, "--x0 dimension does not match the system");
    }

    let approx = match solve(&sys, &spec, MethodArg::Graded, None) {
        Ok(approx) => approx,
        Err(e) => return fail(EXIT_SOLVER, e),
    };
    let convention = match args.model_order {
        ModelOrderArg::QPlusOne => ModelOrder::QPlusOne,
        ModelOrderArg::Q => ModelOrder::Q,
    };
    let model = match reduce_model(&sys, &approx, convention) {
        Ok(model) => model,
        Err(e) => return fail(EXIT_SOLVER, e),
    };
    let probe = match check_theorem4_consistency(&sys, &spec, boost) {
        Ok(cert) => cert,
        Err(e) => return fail(EXIT_SOLVER, e.to_string()),
    };

    let cfg = NumericConfig {
        x0: args.x0.clone(),
        y0,
        dt: args.dt,
        t_end: args.t_end,
        t_transient: args.t_transient.unwrap_or(args.t_end / 2.0),
    };
    let mut sorted = eps_values;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut reports: Vec<TrajectoryReport> = Vec::new();
    for (index, eps) in sorted.iter().enumerate() {
        let (report, samples) = match run_one(&sys, &approx, &model, eps, &cfg) {
            Ok(pair) => pair,
            Err(e) => return fail(EXIT_INPUT, e.to_string()),
        };
        if let Some(base) = &args.csv {
            let path = if sorted.len() == 1 {
                base.clone()
            } else {
                base.with_extension(format!("{index}.csv"))
            };
            if let Err(e) = write_csv(&path, &sys, &samples.times, &samples.x, &samples.y, &samples.phi) {
                return fail(EXIT_INPUT, e);
            }
        }
        reports.push(report);
    }

    let blew_up = reports.iter().any(|r| r.blew_up);
    let within_tol = reports.iter().all(|r| r.max_manifold_deviation <= args.deviation_tol);
    let pass = probe.pass && within_tol && !blew_up;

    match args.output {
        OutputArg::Json => {
            let report = json!({
                "schema": 1,
                "command": "verify",
                "spectrum": spectrum_json(&spectrum),
                "order_spec": spec.to_json(),
                "boost": [boost.0, boost.1],
                "theorem_probe": certificate_json(&probe),
                "deviation_tol": args.deviation_tol,
                "trajectories": reports,
                "pass": pass,
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
        }
        OutputArg::Text => {
            println!("spectrum: {}", verdict_str(spectrum.pass));
            println!(
                "theorem probe at boost ({}, {}): {}",
                boost.0,
                boost.1,
                verdict_str(probe.pass)
            );
            for report in &reports {
                let eps_str = report
                    .eps
                    .iter()
                    .map(|v| format!("{v}"))
                    .collect::<Vec<_>>()
                    .join(":");
                let rate = report
                    .attraction_rate
                    .map(|r| format!("{r:.4}"))
                    .unwrap_or_else(|| "n/a".to_string());
                println!(
                    "eps = {eps_str}: max |y - phi| (t >= {}) = {:.3e} [{}], max |x_full - x_red| = {:.3e}, attraction rate = {rate}{}",
                    report.t_transient,
                    report.max_manifold_deviation,
                    verdict_str(report.max_manifold_deviation <= args.deviation_tol),
                    report.max_reduced_deviation,
                    if report.blew_up { " [BLOW-UP]" } else { "" },
                );
            }
            println!("verify: {}", verdict_str(pass));
        }
    }

    if blew_up {
        EXIT_BLOWUP
    } else if pass {
        0
    } else {
        EXIT_FAIL
    }
}

fn write_csv(
    path: &PathBuf,
    sys: &CentreSystem,
    times: &[f64],
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    phi: &[Vec<f64>],
) -> Result<(), String> {
    let mut out = String::from("t");
    for name in &sys.layout.centre {
        out.push_str(&format!(",{name}"));
    }
    for name in &sys.layout.stable {
        out.push_str(&format!(",{name}"));
    }
    for name in &sys.layout.stable {
        out.push_str(&format!(",phi_{name}"));
    }
    out.push('\n');
    for k in 0..times.len() {
        out.push_str(&format!("{}", times[k]));
        for v in x[k].iter().chain(&y[k]).chain(&phi[k]) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_check_order(args: &CheckOrderArgs) -> u8 {
    let text = match std::fs::read_to_string(&args.poly) {
        Ok(text) => text,
        Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", args.poly.display())),
    };
    let records: Vec<TermRecord> = match serde_json::from_str(&text) {
        Ok(records) => records,
        Err(e) => return fail(EXIT_INPUT, format!("malformed polynomial file: {e}")),
    };
    let layout = records
        .first()
        .map(|r| Layout::new(r.x.len(), r.y.len(), r.eps.len()))
        .unwrap_or(Layout::new(1, 0, 1));
    let poly = match Polynomial::from_term_list(layout, &records) {
        Ok(poly) => poly,
        Err(e) => return fail(EXIT_INPUT, format!("malformed polynomial file: {e}")),
    };
    let mode = match args.coupled {
        Some(r) => OrderMode::Coupled { p: r, q: r },
        None => {
            let spec = match build_spec(&args.order, layout) {
                Ok(spec) => spec,
                Err(e) => return fail(EXIT_INPUT, e),
            };
            OrderMode::Flexible(spec)
        }
    };
    let verdict = match cm_core::order::verify_order(&poly, &mode) {
        Ok(verdict) => verdict,
        Err(e) => return fail(EXIT_INPUT, e.to_string()),
    };
    let cert = OrderCertificate {
        mode: mode.clone(),
        pass: verdict.pass,
        offenders: verdict.offenders,
        residual_terms: poly.num_terms(),
    };
    match args.output {
        OutputArg::Json => {
            let report = json!({
                "schema": 1,
                "command": "check-order",
                "certificate": certificate_json(&cert),
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
        }
        OutputArg::Text => {
            println!("polynomial: {poly}");
            println!("order check: {}", verdict_str(cert.pass));
            for mono in &cert.offenders {
                let offender =
                    Polynomial::from_terms(layout, vec![(mono.clone(), num_traits_one())]);
                println!("  offender: {offender}");
            }
        }
    }
    if cert.pass {
        0
    } else {
        EXIT_FAIL
    }
}
