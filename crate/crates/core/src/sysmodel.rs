//! Parsing, representation and validation of systems in the standard split
//! form: centre block `x' = A x + f(x, y, eps)`, stable block
//! `y' = B y + g(x, y, eps)`.
//!
//! Input grammar (UTF-8, `#` comments to end of line, whitespace free):
//!
//! ```text
//! system   := section+
//! section  := "[centre]" eqn+ | "[stable]" eqn+ | "[params]" name*
//! eqn      := name "'" "=" expr
//! expr     := ["-"] term (("+"|"-") term)*
//! term     := factor ("*" factor)*
//! factor   := rational | name ("^" natural)?
//! rational := integer ("/" natural)
//! ```
//!
//! Parameters are adjoined implicitly: the trivial equations `eps' = 0` are
//! never written and never materialized. Linear terms in `x` inside centre
//! equations populate `A`, linear `y` terms inside stable equations populate
//! `B`; everything else must have total degree >= 2 and lands in `f`, `g`.
//! Linear cross-coupling (`y` in a centre equation, `x` in a stable one) is
//! rejected rather than diagonalized away.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{Layout, Monomial, Polynomial, Rational, Var};

pub const SPLIT_FORM_MSG: &str = "system not in standard split form — diagonalize the linear part first";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SystemError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("undeclared variable `{name}` at {line}:{col}")]
    UndeclaredVariable { name: String, line: usize, col: usize },
    #[error("duplicate variable name `{0}`")]
    DuplicateName(String),
    #[error("section `[{0}]` given more than once")]
    DuplicateSection(String),
    #[error("missing required section `[{0}]`")]
    MissingSection(String),
    #[error("constant term on the right side of equation for `{0}`")]
    ConstantTerm(String),
    #[error("linear cross-coupling term in equation for `{0}`: {SPLIT_FORM_MSG}")]
    LinearCrossCoupling(String),
    #[error("linear parameter term in equation for `{0}`: right sides must vanish to second order")]
    LinearParameterTerm(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpectrumError {
    #[error("matrix dimension {0} exceeds the configured cap {1}")]
    DimensionCap(usize, usize),
    #[error("eigenvalue iteration did not converge for the {0} block")]
    NonConvergence(&'static str),
}

/// Named variable blocks. Names are distinct and nonempty; m >= 1, n >= 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableLayout {
    pub centre: Vec<String>,
    pub stable: Vec<String>,
    pub params: Vec<String>,
}

impl VariableLayout {
    pub fn shape(&self) -> Layout {
        Layout::new(self.centre.len(), self.stable.len(), self.params.len())
    }

    fn resolve(&self, name: &str) -> Option<Var> {
        if let Some(i) = self.centre.iter().position(|n| n == name) {
            return Some(Var::Centre(i));
        }
        if let Some(i) = self.stable.iter().position(|n| n == name) {
            return Some(Var::Stable(i));
        }
        if let Some(i) = self.params.iter().position(|n| n == name) {
            return Some(Var::Param(i));
        }
        None
    }
}

/// A validated system in standard split form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentreSystem {
    pub layout: VariableLayout,
    /// m x m linear part of the centre block.
    pub a: Vec<Vec<Rational>>,
    /// n x n linear part of the stable block.
    pub b: Vec<Vec<Rational>>,
    /// Nonlinear centre right sides, every term of total degree >= 2.
    pub f: Vec<Polynomial>,
    /// Nonlinear stable right sides, every term of total degree >= 2.
    pub g: Vec<Polynomial>,
}

impl CentreSystem {
    pub fn shape(&self) -> Layout {
        self.layout.shape()
    }

    /// Row i of `A x` as a polynomial.
    pub fn ax_row(&self, i: usize) -> Polynomial {
        let layout = self.shape();
        let terms = self.a[i].iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(k, c)| {
            let mut mono = Monomial::unit(layout);
            mono.xexp[k] = 1;
            (mono, c.clone())
        });
        Polynomial::from_terms(layout, terms)
    }

    /// Full right side of centre equation i: `(A x)_i + f_i`.
    pub fn centre_rhs(&self, i: usize) -> Polynomial {
        self.ax_row(i).add(&self.f[i]).expect("same layout")
    }

    /// Full right side of stable equation j: `(B y)_j + g_j`.
    pub fn stable_rhs(&self, j: usize) -> Polynomial {
        let layout = self.shape();
        let terms = self.b[j].iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(k, c)| {
            let mut mono = Monomial::unit(layout);
            mono.yexp[k] = 1;
            (mono, c.clone())
        });
        Polynomial::from_terms(layout, terms).add(&self.g[j]).expect("same layout")
    }

    /// Serialize back to the input text format. Reparsing the output yields a
    /// structurally equal system.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[centre]\n");
        for (i, name) in self.layout.centre.iter().enumerate() {
            out.push_str(&format!(
                "{}' = {}\n",
                name,
                self.centre_rhs(i).format_with(&self.layout.centre, &self.layout.stable, &self.layout.params)
            ));
        }
        out.push_str("[stable]\n");
        for (j, name) in self.layout.stable.iter().enumerate() {
            out.push_str(&format!(
                "{}' = {}\n",
                name,
                self.stable_rhs(j).format_with(&self.layout.centre, &self.layout.stable, &self.layout.params)
            ));
        }
        if !self.layout.params.is_empty() {
            out.push_str("[params]\n");
            for name in &self.layout.params {
                out.push_str(name);
                out.push('\n');
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Section(String),
    Name(String),
    Int(BigInt),
    Prime,
    Assign,
    Plus,
    Minus,
    Star,
    Caret,
    Slash,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, SystemError> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    let syntax = |line, col, msg: &str| SystemError::Syntax { line, col, msg: msg.to_string() };
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match c {
            '#' => {
                while let Some(&c) = chars.peek() {
                    chars.next();
                    bump(c, &mut line, &mut col);
                    if c == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut col);
            }
            '[' => {
                chars.next();
                bump('[', &mut line, &mut col);
                let mut name = String::new();
                loop {
                    match chars.peek() {
                        Some(&']') => {
                            chars.next();
                            bump(']', &mut line, &mut col);
                            break;
                        }
                        Some(&c) if c.is_alphanumeric() || c == '_' => {
                            name.push(c);
                            chars.next();
                            bump(c, &mut line, &mut col);
                        }
                        _ => return Err(syntax(line, col, "unterminated section header")),
                    }
                }
                toks.push(Spanned { tok: Tok::Section(name), line: tline, col: tcol });
            }
            c if c.is_ascii_digit() => {
                let mut digits = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        digits.push(c);
                        chars.next();
                        bump(c, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                toks.push(Spanned { tok: Tok::Int(digits.parse().unwrap()), line: tline, col: tcol });
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_alphanumeric() || c == '_' {
                        name.push(c);
                        chars.next();
                        bump(c, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                toks.push(Spanned { tok: Tok::Name(name), line: tline, col: tcol });
            }
            _ => {
                let tok = match c {
                    '\'' => Tok::Prime,
                    '=' => Tok::Assign,
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '^' => Tok::Caret,
                    '/' => Tok::Slash,
                    other => return Err(syntax(line, col, &format!("unexpected character `{other}`"))),
                };
                chars.next();
                bump(c, &mut line, &mut col);
                toks.push(Spanned { tok, line: tline, col: tcol });
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser (recursive descent over the token stream)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum RawFactor {
    Number(Rational),
    Variable { name: String, exp: u32, line: usize, col: usize },
}

type RawTerm = Vec<RawFactor>;

/// One `name' = expr` equation before name resolution.
#[derive(Debug, Clone)]
struct RawEqn {
    lhs: String,
    /// Signed product terms.
    terms: Vec<(bool, RawTerm)>,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: &str) -> SystemError {
        let (line, col) = self
            .peek()
            .map(|s| (s.line, s.col))
            .unwrap_or_else(|| self.toks.last().map(|s| (s.line, s.col + 1)).unwrap_or((1, 1)));
        SystemError::Syntax { line, col, msg: msg.to_string() }
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), SystemError> {
        match self.peek() {
            Some(s) if &s.tok == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err_here(&format!("expected {what}"))),
        }
    }

    fn natural(&mut self) -> Result<BigInt, SystemError> {
        match self.next() {
            Some(Spanned { tok: Tok::Int(n), .. }) => Ok(n),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err_here("expected a natural number"))
            }
        }
    }

    fn factor(&mut self) -> Result<RawFactor, SystemError> {
        match self.peek().cloned() {
            Some(Spanned { tok: Tok::Int(n), .. }) => {
                self.pos += 1;
                if matches!(self.peek().map(|s| &s.tok), Some(Tok::Slash)) {
                    self.pos += 1;
                    let d = self.natural()?;
                    if d.is_zero() {
                        return Err(self.err_here("zero denominator"));
                    }
                    Ok(RawFactor::Number(Rational::new(n, d)))
                } else {
                    Ok(RawFactor::Number(Rational::from_integer(n)))
                }
            }
            Some(Spanned { tok: Tok::Name(name), line, col }) => {
                self.pos += 1;
                let mut exp = 1u32;
                if matches!(self.peek().map(|s| &s.tok), Some(Tok::Caret)) {
                    self.pos += 1;
                    let n = self.natural()?;
                    exp = u32::try_from(&n).map_err(|_| SystemError::Syntax {
                        line,
                        col,
                        msg: "exponent too large".to_string(),
                    })?;
                }
                Ok(RawFactor::Variable { name, exp, line, col })
            }
            _ => Err(self.err_here("expected a factor")),
        }
    }

    fn term(&mut self) -> Result<RawTerm, SystemError> {
        let mut factors = vec![self.factor()?];
        while matches!(self.peek().map(|s| &s.tok), Some(Tok::Star)) {
            self.pos += 1;
            factors.push(self.factor()?);
        }
        Ok(factors)
    }

    fn expr(&mut self) -> Result<Vec<(bool, RawTerm)>, SystemError> {
        let mut terms = Vec::new();
        let mut negate = false;
        if matches!(self.peek().map(|s| &s.tok), Some(Tok::Minus)) {
            self.pos += 1;
            negate = true;
        }
        terms.push((negate, self.term()?));
        loop {
            match self.peek().map(|s| &s.tok) {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    terms.push((false, self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    terms.push((true, self.term()?));
                }
                _ => break,
            }
        }
        Ok(terms)
    }

    fn eqn(&mut self) -> Result<RawEqn, SystemError> {
        let lhs = match self.next() {
            Some(Spanned { tok: Tok::Name(n), .. }) => n,
            _ => {
                self.pos = self.pos.saturating_sub(1);
                return Err(self.err_here("expected a variable name"));
            }
        };
        self.expect(&Tok::Prime, "`'`")?;
        self.expect(&Tok::Assign, "`=`")?;
        let terms = self.expr()?;
        Ok(RawEqn { lhs, terms })
    }
}

fn at_eqn_start(p: &Parser) -> bool {
    matches!(p.peek().map(|s| &s.tok), Some(Tok::Name(_)))
        && matches!(p.toks.get(p.pos + 1).map(|s| &s.tok), Some(Tok::Prime))
}

/// Parse a system description into validated standard split form.
pub fn parse_system(text: &str) -> Result<CentreSystem, SystemError> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, pos: 0 };

    let mut centre_eqns: Option<Vec<RawEqn>> = None;
    let mut stable_eqns: Option<Vec<RawEqn>> = None;
    let mut params: Option<Vec<String>> = None;

    while let Some(spanned) = parser.peek().cloned() {
        match spanned.tok {
            Tok::Section(name) => {
                parser.pos += 1;
                match name.as_str() {
                    "centre" | "stable" => {
                        let slot = if name == "centre" { &mut centre_eqns } else { &mut stable_eqns };
                        if slot.is_some() {
                            return Err(SystemError::DuplicateSection(name));
                        }
                        let mut eqns = Vec::new();
                        while at_eqn_start(&parser) {
                            eqns.push(parser.eqn()?);
                        }
                        if eqns.is_empty() {
                            return Err(parser.err_here(&format!("section [{name}] needs at least one equation")));
                        }
                        *slot = Some(eqns);
                    }
                    "params" => {
                        if params.is_some() {
                            return Err(SystemError::DuplicateSection(name));
                        }
                        let mut names = Vec::new();
                        // a name followed by `'` starts the next section's equation only
                        // when sections interleave; params entries are bare names
                        while matches!(parser.peek().map(|s| &s.tok), Some(Tok::Name(_))) && !at_eqn_start(&parser) {
                            if let Some(Spanned { tok: Tok::Name(n), .. }) = parser.next() {
                                names.push(n);
                            }
                        }
                        params = Some(names);
                    }
                    other => {
                        return Err(SystemError::Syntax {
                            line: spanned.line,
                            col: spanned.col,
                            msg: format!("unknown section `[{other}]`"),
                        })
                    }
                }
            }
            _ => return Err(parser.err_here("expected a section header")),
        }
    }

    let centre_eqns = centre_eqns.ok_or_else(|| SystemError::MissingSection("centre".to_string()))?;
    let stable_eqns = stable_eqns.ok_or_else(|| SystemError::MissingSection("stable".to_string()))?;
    let params = params.unwrap_or_default();

    let layout = VariableLayout {
        centre: centre_eqns.iter().map(|e| e.lhs.clone()).collect(),
        stable: stable_eqns.iter().map(|e| e.lhs.clone()).collect(),
        params,
    };
    {
        let mut seen = std::collections::HashSet::new();
        for name in layout.centre.iter().chain(&layout.stable).chain(&layout.params) {
            if !seen.insert(name.clone()) {
                return Err(SystemError::DuplicateName(name.clone()));
            }
        }
    }
    let shape = layout.shape();

    // lower one equation into (linear row, nonlinear polynomial)
    let lower = |eqn: &RawEqn, centre_eq: bool| -> Result<(Vec<Rational>, Polynomial), SystemError> {
        let own_dim = if centre_eq { shape.centre } else { shape.stable };
        let mut linear = vec![Rational::zero(); own_dim];
        let mut nonlinear = Polynomial::zero(shape);
        for (negate, factors) in &eqn.terms {
            let mut coeff = if *negate { -Rational::one() } else { Rational::one() };
            let mut mono = Monomial::unit(shape);
            for factor in factors {
                match factor {
                    RawFactor::Number(r) => coeff *= r,
                    RawFactor::Variable { name, exp, line, col } => match layout.resolve(name) {
                        Some(Var::Centre(i)) => mono.xexp[i] += exp,
                        Some(Var::Stable(i)) => mono.yexp[i] += exp,
                        Some(Var::Param(i)) => mono.eexp[i] += exp,
                        None => {
                            return Err(SystemError::UndeclaredVariable {
                                name: name.clone(),
                                line: *line,
                                col: *col,
                            })
                        }
                    },
                }
            }
            if coeff.is_zero() {
                continue;
            }
            match mono.total_degree() {
                0 => return Err(SystemError::ConstantTerm(eqn.lhs.clone())),
                1 => {
                    let xdeg = mono.xdegree();
                    let ydeg: u32 = mono.yexp.iter().sum();
                    if centre_eq && xdeg == 1 {
                        let i = mono.xexp.iter().position(|&e| e == 1).unwrap();
                        linear[i] += coeff;
                    } else if !centre_eq && ydeg == 1 {
                        let i = mono.yexp.iter().position(|&e| e == 1).unwrap();
                        linear[i] += coeff;
                    } else if (centre_eq && ydeg == 1) || (!centre_eq && xdeg == 1) {
                        return Err(SystemError::LinearCrossCoupling(eqn.lhs.clone()));
                    } else {
                        return Err(SystemError::LinearParameterTerm(eqn.lhs.clone()));
                    }
                }
                _ => {
                    nonlinear = nonlinear
                        .add(&Polynomial::from_terms(shape, vec![(mono, coeff)]))
                        .expect("same layout");
                }
            }
        }
        Ok((linear, nonlinear))
    };

    let mut a = Vec::new();
    let mut f = Vec::new();
    for eqn in &centre_eqns {
        let (row, poly) = lower(eqn, true)?;
        a.push(row);
        f.push(poly);
    }
    let mut b = Vec::new();
    let mut g = Vec::new();
    for eqn in &stable_eqns {
        let (row, poly) = lower(eqn, false)?;
        b.push(row);
        g.push(poly);
    }

    Ok(CentreSystem { layout, a, b, f, g })
}

// ---------------------------------------------------------------------------
// Spectrum validation
// ---------------------------------------------------------------------------

pub const DEFAULT_SPECTRUM_TOL: f64 = 1e-9;
pub const DEFAULT_DIMENSION_CAP: usize = 16;

/// Eigenvalue estimates for A and B with the hypothesis verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Eigenvalues as (re, im) pairs, sorted for determinism.
    pub a_eigenvalues: Vec<(f64, f64)>,
    pub b_eigenvalues: Vec<(f64, f64)>,
    pub max_abs_re_a: f64,
    pub max_re_b: f64,
    pub tol: f64,
    pub pass: bool,
}

fn eigenvalues(mat: &[Vec<Rational>], label: &'static str) -> Result<Vec<(f64, f64)>, SpectrumError> {
    use num_traits::ToPrimitive;
    let n = mat.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| mat[i][j].to_f64().unwrap_or(f64::NAN));
    if m.iter().any(|v| !v.is_finite()) {
        return Err(SpectrumError::NonConvergence(label));
    }
    let schur = nalgebra::linalg::Schur::try_new(m, 1e-14, 20_000)
        .ok_or(SpectrumError::NonConvergence(label))?;
    let eigs = schur
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect::<Vec<_>>();
    let mut eigs = eigs;
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eigs)
}

/// Estimate the spectra of A and B and check the centre-manifold hypotheses:
/// max |Re lambda(A)| <= tol and max Re lambda(B) <= -tol.
pub fn validate_spectrum(sys: &CentreSystem, tol: f64) -> Result<SpectrumReport, SpectrumError> {
    let dims = sys.shape();
    let cap = DEFAULT_DIMENSION_CAP;
    for d in [dims.centre, dims.stable] {
        if d > cap {
            return Err(SpectrumError::DimensionCap(d, cap));
        }
    }
    let a_eigenvalues = eigenvalues(&sys.a, "centre")?;
    let b_eigenvalues = eigenvalues(&sys.b, "stable")?;
    let max_abs_re_a = a_eigenvalues.iter().map(|e| e.0.abs()).fold(0.0, f64::max);
    let max_re_b = b_eigenvalues.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let pass = max_abs_re_a <= tol && max_re_b <= -tol;
    Ok(SpectrumReport { a_eigenvalues, b_eigenvalues, max_abs_re_a, max_re_b, tol, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    pub(crate) const PROTOTYPE: &str = "\
[centre]
x' = eps*x - x*y
[stable]
y' = -y + x^2
[params]
eps
";

    fn rat(n: i64) -> Rational {
        Rational::from_i64(n).unwrap()
    }

    #[test]
    fn prototype_parses_to_standard_form() {
        let sys = parse_system(PROTOTYPE).unwrap();
        assert_eq!(sys.layout.centre, vec!["x"]);
        assert_eq!(sys.layout.stable, vec!["y"]);
        assert_eq!(sys.layout.params, vec!["eps"]);
        assert_eq!(sys.a, vec![vec![rat(0)]]);
        assert_eq!(sys.b, vec![vec![rat(-1)]]);
        let shape = sys.shape();
        let expected_f = Polynomial::from_terms(
            shape,
            vec![
                (Monomial { xexp: vec![1], yexp: vec![0], eexp: vec![1] }, rat(1)),
                (Monomial { xexp: vec![1], yexp: vec![1], eexp: vec![0] }, rat(-1)),
            ],
        );
        assert_eq!(sys.f, vec![expected_f]);
        let expected_g =
            Polynomial::from_terms(shape, vec![(Monomial { xexp: vec![2], yexp: vec![0], eexp: vec![0] }, rat(1))]);
        assert_eq!(sys.g, vec![expected_g]);
    }

    #[test]
    fn comments_and_whitespace_ignored() {
        let noisy = "# prototype\n[params]\n  eps  # small\n[centre]\n   x'   =  eps * x   - x*y\n[stable]\ny' = - y + x ^ 2\n";
        assert_eq!(parse_system(noisy).unwrap(), parse_system(PROTOTYPE).unwrap());
    }

    #[test]
    fn linear_cross_coupling_rejected() {
        let text = "[centre]\nx' = eps*x + y\n[stable]\ny' = -y + x^2\n[params]\neps\n";
        assert_eq!(parse_system(text), Err(SystemError::LinearCrossCoupling("x".to_string())));
        let text = "[centre]\nx' = eps*x\n[stable]\ny' = -y + x\n[params]\neps\n";
        assert_eq!(parse_system(text), Err(SystemError::LinearCrossCoupling("y".to_string())));
    }

    #[test]
    fn constant_and_linear_param_terms_rejected() {
        let text = "[centre]\nx' = 1 + eps*x\n[stable]\ny' = -y\n[params]\neps\n";
        assert_eq!(parse_system(text), Err(SystemError::ConstantTerm("x".to_string())));
        let text = "[centre]\nx' = eps\n[stable]\ny' = -y\n[params]\neps\n";
        assert_eq!(parse_system(text), Err(SystemError::LinearParameterTerm("x".to_string())));
    }

    #[test]
    fn undeclared_variable_reported_with_position() {
        let text = "[centre]\nx' = z*x\n[stable]\ny' = -y\n";
        match parse_system(text) {
            Err(SystemError::UndeclaredVariable { name, line, .. }) => {
                assert_eq!(name, "z");
                assert_eq!(line, 2);
            }
            other => panic!("expected undeclared-variable error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        let text = "[centre]\nx' = eps* \n[stable]\ny' = -y\n[params]\neps\n";
        assert!(matches!(parse_system(text), Err(SystemError::Syntax { .. })));
        assert!(matches!(parse_system("x' = 1"), Err(SystemError::Syntax { .. })));
        assert!(matches!(
            parse_system("[centre]\nx' = x^2\n"),
            Err(SystemError::MissingSection(_))
        ));
    }

    #[test]
    fn round_trip_is_lossless() {
        let sys = parse_system(PROTOTYPE).unwrap();
        let again = parse_system(&sys.to_text()).unwrap();
        assert_eq!(sys, again);
    }

    #[test]
    fn spectrum_verdicts() {
        let sys = parse_system(PROTOTYPE).unwrap();
        let report = validate_spectrum(&sys, DEFAULT_SPECTRUM_TOL).unwrap();
        assert!(report.pass);
        assert!(report.max_abs_re_a.abs() <= 1e-12);
        assert!((report.max_re_b + 1.0).abs() <= 1e-12);

        let unstable = parse_system("[centre]\nx' = x^2\n[stable]\ny' = y\n").unwrap();
        assert!(!validate_spectrum(&unstable, DEFAULT_SPECTRUM_TOL).unwrap().pass);

        // rotation block: eigenvalues +-i
        let rotating = parse_system(
            "[centre]\nu' = v + u*w\nv' = -u\n[stable]\nw' = -w + u^2\n",
        )
        .unwrap();
        let report = validate_spectrum(&rotating, DEFAULT_SPECTRUM_TOL).unwrap();
        assert!(report.pass);
        assert!((report.a_eigenvalues[0].1 + 1.0).abs() < 1e-9);
    }
}
