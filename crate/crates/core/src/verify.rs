//! Verification on two fronts: exact symbolic residual-order certification,
//! and numeric trajectory comparison of the full system against the reduced
//! model on the manifold.
//!
//! The approximation-theorem probe is empirical, not a proof: it certifies
//! that enlarging the truncation order changes the manifold only inside the
//! original error set, and complements that with deviation maxima measured
//! on integrated trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cmsolve::{apply_h, solve_graded, ManifoldApprox, ReducedModel, SolveError};
use crate::order::{verify_order, OrderError, OrderMode, OrderSpec};
use crate::poly::{Monomial, PolyError, Polynomial};
use crate::sysmodel::CentreSystem;
use num_traits::ToPrimitive;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("numeric parameters invalid: {0}")]
    InvalidNumericConfig(String),
}

/// Checkable form of the residual-order hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderCertificate {
    pub mode: OrderMode,
    pub pass: bool,
    /// Graded-lex sorted, deduplicated across components.
    pub offenders: Vec<Monomial>,
    pub residual_terms: usize,
}

fn certificate_from(mode: &OrderMode, polys: &[Polynomial]) -> Result<OrderCertificate, OrderError> {
    let mut offenders = Vec::new();
    let mut residual_terms = 0;
    for poly in polys {
        residual_terms += poly.num_terms();
        let verdict = verify_order(poly, mode)?;
        offenders.extend(verdict.offenders);
    }
    offenders.sort();
    offenders.dedup();
    Ok(OrderCertificate { mode: mode.clone(), pass: offenders.is_empty(), offenders, residual_terms })
}

/// Compute the exact residual H(phi) and certify its order.
pub fn check_residual_order(
    sys: &CentreSystem,
    phi: &[Polynomial],
    mode: &OrderMode,
) -> Result<OrderCertificate, VerifyError> {
    let residual = apply_h(phi, sys)?;
    Ok(certificate_from(mode, &residual)?)
}

/// Certify that `reference - phi` lies entirely in the error set of `spec`.
pub fn certify_difference(
    phi: &[Polynomial],
    reference: &[Polynomial],
    spec: &OrderSpec,
) -> Result<OrderCertificate, VerifyError> {
    let mut diffs = Vec::with_capacity(phi.len());
    for (a, b) in phi.iter().zip(reference) {
        diffs.push(b.sub(a)?);
    }
    Ok(certificate_from(&OrderMode::Flexible(spec.clone()), &diffs)?)
}

/// Empirical probe of the approximation theorem: solve at `spec` and at
/// `spec + boost`; the higher-order manifold must differ from the
/// lower-order one only by error-set terms of `spec`.
pub fn check_theorem4_consistency(
    sys: &CentreSystem,
    spec: &OrderSpec,
    boost: (u32, u32),
) -> Result<OrderCertificate, VerifyError> {
    let phi = solve_graded(sys, spec)?;
    let reference = solve_graded(sys, &spec.boosted(boost.0, boost.1))?;
    certify_difference(&phi.phi, &reference.phi, spec)
}

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

/// Fixed-step RK4 samples at t = 0, dt, 2dt, ...
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    /// Set when a non-finite state was encountered; the trajectory is
    /// truncated at the last finite sample.
    pub blew_up: bool,
}

impl Trajectory {
    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }
}

/// Classical fourth-order Runge-Kutta with a fixed step.
pub fn integrate<F>(rhs: F, x0: &[f64], dt: f64, t_end: f64) -> Trajectory
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert!(dt > 0.0 && t_end > 0.0, "dt and t_end must be positive");
    let steps = (t_end / dt).round() as usize;
    let dim = x0.len();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0.to_vec());
    let mut state = x0.to_vec();
    let mut blew_up = false;
    for _ in 0..steps {
        let k1 = rhs(&state);
        let mid1: Vec<f64> = (0..dim).map(|i| state[i] + 0.5 * dt * k1[i]).collect();
        let k2 = rhs(&mid1);
        let mid2: Vec<f64> = (0..dim).map(|i| state[i] + 0.5 * dt * k2[i]).collect();
        let k3 = rhs(&mid2);
        let end: Vec<f64> = (0..dim).map(|i| state[i] + dt * k3[i]).collect();
        let k4 = rhs(&end);
        for i in 0..dim {
            state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if state.iter().any(|v| !v.is_finite()) {
            blew_up = true;
            break;
        }
        states.push(state.clone());
    }
    Trajectory { dt, states, blew_up }
}

/// Polynomial compiled for repeated evaluation at one fixed parameter value:
/// the eps factors are folded into the float coefficient.
struct CompiledPoly {
    terms: Vec<(f64, Vec<u32>, Vec<u32>)>,
}

impl CompiledPoly {
    fn new(poly: &Polynomial, eps: &[f64]) -> Self {
        let terms = poly
            .terms()
            .map(|(mono, coeff)| {
                let mut c = coeff.to_f64().unwrap_or(f64::NAN);
                for (i, &e) in mono.eexp.iter().enumerate() {
                    c *= eps[i].powi(e as i32);
                }
                (c, mono.xexp.clone(), mono.yexp.clone())
            })
            .collect();
        CompiledPoly { terms }
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, xexp, yexp) in &self.terms {
            let mut v = *c;
            for (i, &e) in xexp.iter().enumerate() {
                if e > 0 {
                    v *= x[i].powi(e as i32);
                }
            }
            for (i, &e) in yexp.iter().enumerate() {
                if e > 0 {
                    v *= y[i].powi(e as i32);
                }
            }
            acc += v;
        }
        acc
    }
}

/// Initial condition for the stable block.
#[derive(Debug, Clone, PartialEq)]
pub enum StableStart {
    Explicit(Vec<f64>),
    /// Start exactly on the approximate manifold: y0 = phi(x0, eps).
    OnManifold,
}

/// Numeric run parameters shared across eps values.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericConfig {
    pub x0: Vec<f64>,
    pub y0: StableStart,
    pub dt: f64,
    pub t_end: f64,
    pub t_transient: f64,
}

impl NumericConfig {
    fn validate(&self) -> Result<(), VerifyError> {
        if self.dt <= 0.0 || self.t_end <= 0.0 {
            return Err(VerifyError::InvalidNumericConfig("dt and t_end must be positive".to_string()));
        }
        if !(0.0..self.t_end).contains(&self.t_transient) {
            return Err(VerifyError::InvalidNumericConfig(
                "t_transient must satisfy 0 <= t_transient < t_end".to_string(),
            ));
        }
        Ok(())
    }
}

/// Numeric comparison of the full and reduced dynamics for one eps value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub eps: Vec<f64>,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub t_transient: f64,
    /// max |y(t) - phi(x(t), eps)| over t >= t_transient.
    pub max_manifold_deviation: f64,
    /// max |x_full(t) - x_reduced(t)| over the whole horizon.
    pub max_reduced_deviation: f64,
    /// Least-squares slope of log deviation on the transient window, per
    /// unit time; absent when the deviation never clears the fit floor.
    pub attraction_rate: Option<f64>,
    pub blew_up: bool,
}

/// Full trajectory samples for CSV dumps: columns t, x..., y..., phi(x)...
pub struct TrajectorySamples {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub phi: Vec<Vec<f64>>,
}

/// Integrate the full (x, y) system and the reduced x system at each eps
/// value and measure deviation maxima plus the stable attraction rate.
/// Reports are ordered by eps.
pub fn compare_trajectories(
    sys: &CentreSystem,
    manifold: &ManifoldApprox,
    reduced: &ReducedModel,
    eps_values: &[Vec<f64>],
    cfg: &NumericConfig,
) -> Result<Vec<TrajectoryReport>, VerifyError> {
    cfg.validate()?;
    let mut sorted: Vec<&Vec<f64>> = eps_values.iter().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut reports = Vec::with_capacity(sorted.len());
    for eps in sorted {
        let (report, _) = run_one(sys, manifold, reduced, eps, cfg)?;
        reports.push(report);
    }
    Ok(reports)
}

/// Single-eps run that also returns the sampled full trajectory.
pub fn run_one(
    sys: &CentreSystem,
    manifold: &ManifoldApprox,
    reduced: &ReducedModel,
    eps: &[f64],
    cfg: &NumericConfig,
) -> Result<(TrajectoryReport, TrajectorySamples), VerifyError> {
    cfg.validate()?;
    let shape = sys.shape();
    if eps.len() != shape.params || cfg.x0.len() != shape.centre {
        return Err(VerifyError::InvalidNumericConfig(
            "eps / x0 dimensions do not match the system layout".to_string(),
        ));
    }

    let phi_eval: Vec<CompiledPoly> = manifold.phi.iter().map(|p| CompiledPoly::new(p, eps)).collect();
    let phi_at = |x: &[f64]| -> Vec<f64> { phi_eval.iter().map(|p| p.eval(x, &[])).collect() };

    let y0 = match &cfg.y0 {
        StableStart::Explicit(v) => {
            if v.len() != shape.stable {
                return Err(VerifyError::InvalidNumericConfig("y0 dimension mismatch".to_string()));
            }
            v.clone()
        }
        StableStart::OnManifold => phi_at(&cfg.x0),
    };

    let a: Vec<Vec<f64>> = sys.a.iter().map(|row| row.iter().map(|c| c.to_f64().unwrap()).collect()).collect();
    let b: Vec<Vec<f64>> = sys.b.iter().map(|row| row.iter().map(|c| c.to_f64().unwrap()).collect()).collect();
    let f_eval: Vec<CompiledPoly> = sys.f.iter().map(|p| CompiledPoly::new(p, eps)).collect();
    let g_eval: Vec<CompiledPoly> = sys.g.iter().map(|p| CompiledPoly::new(p, eps)).collect();
    let m = shape.centre;
    let n = shape.stable;

    let full_field = |state: &[f64]| -> Vec<f64> {
        let (x, y) = state.split_at(m);
        let mut out = Vec::with_capacity(m + n);
        for i in 0..m {
            let lin: f64 = (0..m).map(|j| a[i][j] * x[j]).sum();
            out.push(lin + f_eval[i].eval(x, y));
        }
        for i in 0..n {
            let lin: f64 = (0..n).map(|j| b[i][j] * y[j]).sum();
            out.push(lin + g_eval[i].eval(x, y));
        }
        out
    };
    let reduced_eval: Vec<CompiledPoly> = reduced.rhs.iter().map(|p| CompiledPoly::new(p, eps)).collect();
    let reduced_field = |x: &[f64]| -> Vec<f64> { reduced_eval.iter().map(|p| p.eval(x, &[])).collect() };

    let mut state0 = cfg.x0.clone();
    state0.extend_from_slice(&y0);
    let full = integrate(full_field, &state0, cfg.dt, cfg.t_end);
    let reduced_traj = integrate(reduced_field, &cfg.x0, cfg.dt, cfg.t_end);

    // deviation from the manifold at every full-system sample
    let mut deviations = Vec::with_capacity(full.states.len());
    let mut samples = TrajectorySamples { times: Vec::new(), x: Vec::new(), y: Vec::new(), phi: Vec::new() };
    for (k, state) in full.states.iter().enumerate() {
        let (x, y) = state.split_at(m);
        let phi_val = phi_at(x);
        let dev = y
            .iter()
            .zip(&phi_val)
            .map(|(yi, pi)| (yi - pi).abs())
            .fold(0.0, f64::max);
        deviations.push(dev);
        samples.times.push(full.time(k));
        samples.x.push(x.to_vec());
        samples.y.push(y.to_vec());
        samples.phi.push(phi_val);
    }

    let max_manifold_deviation = deviations
        .iter()
        .enumerate()
        .filter(|(k, _)| full.time(*k) >= cfg.t_transient)
        .map(|(_, d)| *d)
        .fold(0.0, f64::max);
    let max_reduced_deviation = full
        .states
        .iter()
        .zip(&reduced_traj.states)
        .map(|(fs, rs)| {
            fs[..m]
                .iter()
                .zip(rs.iter())
                .map(|(af, ar)| (af - ar).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);

    // attraction rate: fit log deviation on [0, t_transient] while the
    // deviation is still at least 10x above the truncation floor
    let floor = max_manifold_deviation;
    let mut points = Vec::new();
    for (k, &dev) in deviations.iter().enumerate() {
        let t = full.time(k);
        if t > cfg.t_transient {
            break;
        }
        if dev > 10.0 * floor && dev > 0.0 {
            points.push((t, dev.ln()));
        }
    }
    let attraction_rate = fit_slope(&points);

    let report = TrajectoryReport {
        eps: eps.to_vec(),
        x0: cfg.x0.clone(),
        y0,
        dt: cfg.dt,
        t_end: cfg.t_end,
        t_transient: cfg.t_transient,
        max_manifold_deviation,
        max_reduced_deviation,
        attraction_rate,
        blew_up: full.blew_up || reduced_traj.blew_up,
    };
    Ok((report, samples))
}

fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < f64::EPSILON {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmsolve::{solve_graded, reduce_model, ModelOrder};
    use crate::poly::{Layout, Rational};
    use crate::sysmodel::parse_system;
    use num_traits::FromPrimitive;

    const PROTOTYPE: &str = "[centre]\nx' = eps*x - x*y\n[stable]\ny' = -y + x^2\n[params]\neps\n";

    fn mono(xe: u32, ee: u32) -> Monomial {
        Monomial { xexp: vec![xe], yexp: vec![0], eexp: vec![ee] }
    }

    fn poly(terms: &[(i64, u32, u32)]) -> Polynomial {
        Polynomial::from_terms(
            Layout::new(1, 1, 1),
            terms.iter().map(|&(c, xe, ee)| (mono(xe, ee), Rational::from_i64(c).unwrap())),
        )
    }

    #[test]
    fn residual_order_of_first_iterate() {
        let sys = parse_system(PROTOTYPE).unwrap();
        let h1 = vec![poly(&[(1, 2, 0)])];
        // residual terms 2 eps x^2, -2 x^4 have total degrees 3 and 4
        let cert = check_residual_order(&sys, &h1, &OrderMode::coupled(3)).unwrap();
        assert!(cert.pass);
        assert_eq!(cert.residual_terms, 2);
        // delta = sqrt(eps) weighting: p = 2, q = 4
        let cert = check_residual_order(&sys, &h1, &OrderMode::Coupled { p: 2, q: 4 }).unwrap();
        assert!(cert.pass);
        // flexible (4, 2) fails with offender 2 eps x^2
        let spec = OrderSpec::unit(4, 2, 1, 1).unwrap();
        let cert = check_residual_order(&sys, &h1, &OrderMode::Flexible(spec)).unwrap();
        assert!(!cert.pass);
        assert_eq!(cert.offenders, vec![mono(2, 1)]);
    }

    #[test]
    fn theorem_probe_passes_on_prototype() {
        let sys = parse_system(PROTOTYPE).unwrap();
        let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
        assert!(check_theorem4_consistency(&sys, &spec, (2, 2)).unwrap().pass);
        assert!(check_theorem4_consistency(&sys, &spec, (0, 0)).unwrap().pass);
    }

    #[test]
    fn corrupted_manifold_is_caught() {
        let sys = parse_system(PROTOTYPE).unwrap();
        let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
        let phi = solve_graded(&sys, &spec).unwrap();
        let corrupted = vec![phi.phi[0].add(&poly(&[(1, 3, 0)])).unwrap()];
        let reference = solve_graded(&sys, &spec.boosted(2, 2)).unwrap();
        let cert = certify_difference(&corrupted, &reference.phi, &spec).unwrap();
        assert!(!cert.pass);
        assert!(cert.offenders.contains(&mono(3, 0)));
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let traj = integrate(|s| vec![-s[0]], &[1.0], 1e-3, 1.0);
        let last = traj.states.last().unwrap()[0];
        assert!((last - (-1.0f64).exp()).abs() < 1e-8);
        assert!(!traj.blew_up);
    }

    #[test]
    fn rk4_zero_field_is_constant() {
        let traj = integrate(|_| vec![0.0, 0.0], &[3.0, -2.0], 0.1, 2.0);
        assert!(traj.states.iter().all(|s| s == &vec![3.0, -2.0]));
    }

    #[test]
    fn rk4_fourth_order_convergence() {
        let exact = (-1.0f64).exp();
        let err = |dt: f64| {
            let traj = integrate(|s| vec![-s[0]], &[1.0], dt, 1.0);
            (traj.states.last().unwrap()[0] - exact).abs()
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio}");
    }

    #[test]
    fn rk4_blow_up_flagged() {
        let traj = integrate(|s| vec![s[0] * s[0]], &[10.0], 0.1, 10.0);
        assert!(traj.blew_up);
        assert!(traj.states.iter().all(|s| s[0].is_finite()));
    }

    #[test]
    fn prototype_trajectory_report() {
        let sys = parse_system(PROTOTYPE).unwrap();
        let spec = OrderSpec::unit(8, 5, 1, 1).unwrap();
        let manifold = solve_graded(&sys, &spec).unwrap();
        let reduced = reduce_model(&sys, &manifold, ModelOrder::QPlusOne).unwrap();
        let cfg = NumericConfig {
            x0: vec![0.05],
            y0: StableStart::Explicit(vec![0.3]),
            dt: 1e-3,
            t_end: 20.0,
            t_transient: 10.0,
        };
        let reports = compare_trajectories(&sys, &manifold, &reduced, &[vec![0.05]], &cfg).unwrap();
        let report = &reports[0];
        assert!(!report.blew_up);
        assert!(report.max_manifold_deviation <= 1e-4, "{}", report.max_manifold_deviation);
        let rate = report.attraction_rate.expect("transient visible");
        assert!((rate + 1.0).abs() < 0.05, "rate {rate}");
    }

    #[test]
    fn on_manifold_start_has_no_transient() {
        let sys = parse_system(PROTOTYPE).unwrap();
        let spec = OrderSpec::unit(8, 5, 1, 1).unwrap();
        let manifold = solve_graded(&sys, &spec).unwrap();
        let reduced = reduce_model(&sys, &manifold, ModelOrder::QPlusOne).unwrap();
        let cfg = NumericConfig {
            x0: vec![0.05],
            y0: StableStart::OnManifold,
            dt: 1e-3,
            t_end: 20.0,
            t_transient: 10.0,
        };
        let (report, samples) = run_one(&sys, &manifold, &reduced, &[0.05], &cfg).unwrap();
        let max_dev = samples
            .y
            .iter()
            .zip(&samples.phi)
            .map(|(y, p)| (y[0] - p[0]).abs())
            .fold(0.0, f64::max);
        assert!(max_dev <= 1e-5, "{max_dev}");
        assert!(report.max_manifold_deviation <= 1e-5);
    }

    #[test]
    fn attraction_rate_matches_stable_eigenvalue_at_zero_eps() {
        let sys = parse_system(PROTOTYPE).unwrap();
        let spec = OrderSpec::unit(8, 5, 1, 1).unwrap();
        let manifold = solve_graded(&sys, &spec).unwrap();
        let reduced = reduce_model(&sys, &manifold, ModelOrder::QPlusOne).unwrap();
        let cfg = NumericConfig {
            x0: vec![0.05],
            y0: StableStart::Explicit(vec![0.3]),
            dt: 1e-3,
            t_end: 20.0,
            t_transient: 10.0,
        };
        let (report, _) = run_one(&sys, &manifold, &reduced, &[0.0], &cfg).unwrap();
        let rate = report.attraction_rate.unwrap();
        assert!((rate + 1.0).abs() < 0.05, "rate {rate}");
    }
}
