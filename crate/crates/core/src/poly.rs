//! Sparse multivariate polynomials over exact rationals, in three variable
//! blocks: centre variables `x`, stable variables `y`, parameters `eps`.
//!
//! Terms are kept in a `BTreeMap` under graded-lexicographic monomial order
//! (total degree first, then the x-, y-, eps-blocks lexicographically), so
//! display and serialization are deterministic. Zero coefficients are removed
//! eagerly; equality of polynomials is structural equality of term maps.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::order::OrderSpec;

/// Exact rational coefficient.
pub type Rational = BigRational;

/// Parse a rational written as `num` or `num/den`.
pub fn rational_from_str(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Rational::new(n, d))
        }
        None => {
            let n: BigInt = s.parse().ok()?;
            Some(Rational::from_integer(n))
        }
    }
}

/// Render a rational as `num` or `num/den`.
pub fn rational_to_string(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Shape of the three variable blocks: m centre, n stable, l parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    pub centre: usize,
    pub stable: usize,
    pub params: usize,
}

impl Layout {
    pub fn new(centre: usize, stable: usize, params: usize) -> Self {
        Layout { centre, stable, params }
    }
}

/// A variable reference into one of the three blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Centre(usize),
    Stable(usize),
    Param(usize),
}

/// Exponent vector split into the three blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub xexp: Vec<u32>,
    pub yexp: Vec<u32>,
    pub eexp: Vec<u32>,
}

impl Monomial {
    pub fn unit(layout: Layout) -> Self {
        Monomial {
            xexp: vec![0; layout.centre],
            yexp: vec![0; layout.stable],
            eexp: vec![0; layout.params],
        }
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.xexp.len(), self.yexp.len(), self.eexp.len())
    }

    pub fn total_degree(&self) -> u32 {
        self.xexp.iter().chain(&self.yexp).chain(&self.eexp).sum()
    }

    pub fn xdegree(&self) -> u32 {
        self.xexp.iter().sum()
    }

    pub fn edegree(&self) -> u32 {
        self.eexp.iter().sum()
    }

    pub fn is_y_free(&self) -> bool {
        self.yexp.iter().all(|&e| e == 0)
    }

    /// Componentwise exponent sum (monomial product).
    pub fn product(&self, other: &Monomial) -> Monomial {
        Monomial {
            xexp: self.xexp.iter().zip(&other.xexp).map(|(a, b)| a + b).collect(),
            yexp: self.yexp.iter().zip(&other.yexp).map(|(a, b)| a + b).collect(),
            eexp: self.eexp.iter().zip(&other.eexp).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.xexp.cmp(&other.xexp))
            .then_with(|| self.yexp.cmp(&other.yexp))
            .then_with(|| self.eexp.cmp(&other.eexp))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("layout mismatch: ({0:?}) vs ({1:?})")]
    LayoutMismatch(Layout, Layout),
    #[error("variable is not a centre variable or parameter of this layout")]
    UnknownVariable,
    #[error("substitution entry mentions a stable variable")]
    StableInSubstitution,
    #[error("substitution needs {expected} entries, got {got}")]
    SubstitutionArity { expected: usize, got: usize },
    #[error("evaluation point does not assign every variable")]
    MissingAssignment,
    #[error("series reciprocal requires a nonzero constant term")]
    ZeroConstantTerm,
}

/// Sparse polynomial: a finite monomial-to-coefficient map over one layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    layout: Layout,
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero(layout: Layout) -> Self {
        Polynomial { layout, terms: BTreeMap::new() }
    }

    pub fn constant(layout: Layout, c: Rational) -> Self {
        let mut p = Polynomial::zero(layout);
        if !c.is_zero() {
            p.terms.insert(Monomial::unit(layout), c);
        }
        p
    }

    pub fn one(layout: Layout) -> Self {
        Polynomial::constant(layout, Rational::one())
    }

    /// Single variable to the first power with coefficient 1.
    pub fn variable(layout: Layout, var: Var) -> Self {
        let mut mono = Monomial::unit(layout);
        match var {
            Var::Centre(i) => mono.xexp[i] = 1,
            Var::Stable(i) => mono.yexp[i] = 1,
            Var::Param(i) => mono.eexp[i] = 1,
        }
        Polynomial::from_terms(layout, vec![(mono, Rational::one())])
    }

    /// Build from a term list; coefficients on equal monomials are summed and
    /// zero results dropped. Panics if a monomial disagrees with the layout.
    pub fn from_terms(layout: Layout, terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut map: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (mono, coeff) in terms {
            assert_eq!(mono.layout(), layout, "monomial layout mismatch");
            if coeff.is_zero() {
                continue;
            }
            let entry = map.entry(mono).or_insert_with(Rational::zero);
            *entry += coeff;
        }
        map.retain(|_, c| !c.is_zero());
        Polynomial { layout, terms: map }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, mono: &Monomial) -> Rational {
        self.terms.get(mono).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&Monomial::unit(self.layout))
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.total_degree()).max().unwrap_or(0)
    }

    pub fn is_y_free(&self) -> bool {
        self.terms.keys().all(|m| m.is_y_free())
    }

    /// Keep only terms satisfying the predicate.
    pub fn filter_terms(&self, mut keep: impl FnMut(&Monomial) -> bool) -> Polynomial {
        Polynomial {
            layout: self.layout,
            terms: self.terms.iter().filter(|(m, _)| keep(m)).map(|(m, c)| (m.clone(), c.clone())).collect(),
        }
    }

    fn check_layout(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.layout != other.layout {
            return Err(PolyError::LayoutMismatch(self.layout, other.layout));
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_layout(other)?;
        let mut terms = self.terms.clone();
        for (mono, coeff) in &other.terms {
            let entry = terms.entry(mono.clone()).or_insert_with(Rational::zero);
            *entry += coeff;
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(Polynomial { layout: self.layout, terms })
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Polynomial {
        Polynomial {
            layout: self.layout,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.layout);
        }
        Polynomial {
            layout: self.layout,
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_layout(other)?;
        let mut terms: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mono = ma.product(mb);
                let entry = terms.entry(mono).or_insert_with(Rational::zero);
                *entry += ca * cb;
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(Polynomial { layout: self.layout, terms })
    }

    /// Formal partial derivative by a centre variable or parameter.
    pub fn differentiate(&self, var: Var) -> Result<Polynomial, PolyError> {
        let valid = match var {
            Var::Centre(i) => i < self.layout.centre,
            Var::Param(i) => i < self.layout.params,
            Var::Stable(_) => false,
        };
        if !valid {
            return Err(PolyError::UnknownVariable);
        }
        let mut terms: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (mono, coeff) in &self.terms {
            let exp = match var {
                Var::Centre(i) => mono.xexp[i],
                Var::Param(i) => mono.eexp[i],
                Var::Stable(_) => unreachable!(),
            };
            if exp == 0 {
                continue;
            }
            let mut m = mono.clone();
            match var {
                Var::Centre(i) => m.xexp[i] -= 1,
                Var::Param(i) => m.eexp[i] -= 1,
                Var::Stable(_) => unreachable!(),
            }
            let c = coeff * Rational::from_integer(BigInt::from(exp));
            let entry = terms.entry(m).or_insert_with(Rational::zero);
            *entry += c;
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(Polynomial { layout: self.layout, terms })
    }

    /// Replace every stable variable `y_j` by `phi[j]` and expand.
    /// Each entry of `phi` must itself be free of stable variables.
    pub fn substitute_stable(&self, phi: &[Polynomial]) -> Result<Polynomial, PolyError> {
        if phi.len() != self.layout.stable {
            return Err(PolyError::SubstitutionArity { expected: self.layout.stable, got: phi.len() });
        }
        for entry in phi {
            self.check_layout(entry)?;
            if !entry.is_y_free() {
                return Err(PolyError::StableInSubstitution);
            }
        }
        // powers[j][k] = phi[j]^k, filled lazily per needed exponent
        let mut powers: Vec<Vec<Polynomial>> = phi.iter().map(|p| vec![Polynomial::one(self.layout), p.clone()]).collect();
        let mut result = Polynomial::zero(self.layout);
        for (mono, coeff) in &self.terms {
            let mut base = mono.clone();
            for e in base.yexp.iter_mut() {
                *e = 0;
            }
            let mut term = Polynomial::from_terms(self.layout, vec![(base, coeff.clone())]);
            for (j, &e) in mono.yexp.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[j].len() <= e as usize {
                    let next = powers[j].last().unwrap().mul(&phi[j])?;
                    powers[j].push(next);
                }
                term = term.mul(&powers[j][e as usize])?;
            }
            result = result.add(&term)?;
        }
        Ok(result)
    }

    /// Floating evaluation. Slices must cover the full layout.
    pub fn evaluate(&self, x: &[f64], y: &[f64], eps: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.layout.centre || y.len() != self.layout.stable || eps.len() != self.layout.params {
            return Err(PolyError::MissingAssignment);
        }
        let mut acc = 0.0;
        for (mono, coeff) in &self.terms {
            let mut v = coeff.to_f64().unwrap_or(f64::NAN);
            for (i, &e) in mono.xexp.iter().enumerate() {
                v *= x[i].powi(e as i32);
            }
            for (i, &e) in mono.yexp.iter().enumerate() {
                v *= y[i].powi(e as i32);
            }
            for (i, &e) in mono.eexp.iter().enumerate() {
                v *= eps[i].powi(e as i32);
            }
            acc += v;
        }
        Ok(acc)
    }

    /// Multiplicative inverse as a truncated power series: the result `r`
    /// satisfies `truncate(self * r, spec) = 1`. Requires a nonzero constant
    /// term. Computed by iterated truncated multiplication of the geometric
    /// series in `1 - self/c0`.
    pub fn series_reciprocal(&self, spec: &OrderSpec) -> Result<Polynomial, PolyError> {
        let c0 = self.constant_term();
        if c0.is_zero() {
            return Err(PolyError::ZeroConstantTerm);
        }
        let inv_c0 = Rational::one() / c0;
        // u has zero constant term, so u^k has total degree >= k
        let u = Polynomial::one(self.layout).sub(&self.scale(&inv_c0))?;
        let u = spec.truncate_any(&u);
        let mut acc = Polynomial::one(self.layout);
        let mut power = Polynomial::one(self.layout);
        loop {
            power = spec.truncate_any(&power.mul(&u)?);
            if power.is_zero() {
                break;
            }
            acc = acc.add(&power)?;
        }
        Ok(acc.scale(&inv_c0))
    }

    /// Human rendering with explicit variable names, graded-lex term order.
    pub fn format_with(&self, xnames: &[String], ynames: &[String], enames: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (mono, coeff)) in self.terms.iter().enumerate() {
            let negative = coeff.is_negative();
            let abs = coeff.abs();
            if i == 0 {
                if negative {
                    out.push('-');
                }
            } else if negative {
                out.push_str(" - ");
            } else {
                out.push_str(" + ");
            }
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || mono.total_degree() == 0 {
                factors.push(rational_to_string(&abs));
            }
            let blocks = [(&mono.eexp, enames), (&mono.xexp, xnames), (&mono.yexp, ynames)];
            for (exps, names) in blocks {
                for (j, &e) in exps.iter().enumerate() {
                    if e == 0 {
                        continue;
                    }
                    if e == 1 {
                        factors.push(names[j].clone());
                    } else {
                        factors.push(format!("{}^{}", names[j], e));
                    }
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }

    fn default_names(count: usize, base: &str) -> Vec<String> {
        if count == 1 {
            vec![base.to_string()]
        } else {
            (1..=count).map(|i| format!("{base}{i}")).collect()
        }
    }

    pub fn to_term_list(&self) -> Vec<TermRecord> {
        self.terms
            .iter()
            .map(|(m, c)| TermRecord {
                coeff: rational_to_string(c),
                x: m.xexp.clone(),
                y: m.yexp.clone(),
                eps: m.eexp.clone(),
            })
            .collect()
    }

    pub fn from_term_list(layout: Layout, records: &[TermRecord]) -> Result<Polynomial, String> {
        let mut terms = Vec::new();
        for rec in records {
            let mono = Monomial { xexp: rec.x.clone(), yexp: rec.y.clone(), eexp: rec.eps.clone() };
            if mono.layout() != layout {
                return Err(format!("term layout {:?} does not match {:?}", mono.layout(), layout));
            }
            let coeff = rational_from_str(&rec.coeff).ok_or_else(|| format!("bad coefficient {:?}", rec.coeff))?;
            terms.push((mono, coeff));
        }
        Ok(Polynomial::from_terms(layout, terms))
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = Polynomial::default_names(self.layout.centre, "x");
        let y = Polynomial::default_names(self.layout.stable, "y");
        let e = Polynomial::default_names(self.layout.params, "eps");
        write!(f, "{}", self.format_with(&x, &y, &e))
    }
}

/// One serialized term: coefficient as `num/den`, exponent blocks as arrays.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermRecord {
    pub coeff: String,
    pub x: Vec<u32>,
    pub y: Vec<u32>,
    pub eps: Vec<u32>,
}
