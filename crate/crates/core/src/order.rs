//! The asymptotic order calculus on the centre variables and parameters.
//!
//! An `OrderSpec` (q, p) with optional per-variable weights defines the
//! flexible error set O(x^q, eps^p): monomials whose weighted x-degree
//! reaches q or whose weighted eps-degree reaches p. Its complement, the
//! kept set (weighted x-degree < q AND weighted eps-degree < p), is finite,
//! which is what makes graded solving terminate. The classical coupled
//! error class O(|(eps,x)|^r) is available as a separate predicate.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{rational_from_str, rational_to_string, Monomial, Polynomial, Rational};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OrderError {
    #[error("order calculus is defined on (x, eps) only; monomial has a stable-variable exponent")]
    StableExponent,
    #[error("order spec requires q > 1, got q = {0}")]
    InvalidQ(u32),
    #[error("order spec requires p >= 1, got p = {0}")]
    InvalidP(u32),
    #[error("weights must be strictly positive")]
    NonPositiveWeight,
    #[error("weight vector length {got} does not match variable count {expected}")]
    WeightArity { expected: usize, got: usize },
}

/// Truncation order (q, p) with per-variable weights (default all 1).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderSpec {
    q: u32,
    p: u32,
    xweights: Vec<Rational>,
    eweights: Vec<Rational>,
}

impl OrderSpec {
    /// Unit-weight spec for m centre variables and l parameters.
    pub fn unit(q: u32, p: u32, m: usize, l: usize) -> Result<Self, OrderError> {
        Self::weighted(q, p, vec![Rational::one(); m], vec![Rational::one(); l])
    }

    pub fn weighted(q: u32, p: u32, xweights: Vec<Rational>, eweights: Vec<Rational>) -> Result<Self, OrderError> {
        if q <= 1 {
            return Err(OrderError::InvalidQ(q));
        }
        if p < 1 {
            return Err(OrderError::InvalidP(p));
        }
        if xweights.iter().chain(&eweights).any(|w| !w.is_positive()) {
            return Err(OrderError::NonPositiveWeight);
        }
        Ok(OrderSpec { q, p, xweights, eweights })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn xweights(&self) -> &[Rational] {
        &self.xweights
    }

    pub fn eweights(&self) -> &[Rational] {
        &self.eweights
    }

    /// Same weights, orders enlarged by (dq, dp).
    pub fn boosted(&self, dq: u32, dp: u32) -> OrderSpec {
        OrderSpec {
            q: self.q + dq,
            p: self.p + dp,
            xweights: self.xweights.clone(),
            eweights: self.eweights.clone(),
        }
    }

    fn check_arity(&self, mono: &Monomial) -> Result<(), OrderError> {
        if mono.xexp.len() != self.xweights.len() {
            return Err(OrderError::WeightArity { expected: mono.xexp.len(), got: self.xweights.len() });
        }
        if mono.eexp.len() != self.eweights.len() {
            return Err(OrderError::WeightArity { expected: mono.eexp.len(), got: self.eweights.len() });
        }
        Ok(())
    }

    pub fn weighted_xdegree(&self, mono: &Monomial) -> Rational {
        mono.xexp
            .iter()
            .zip(&self.xweights)
            .map(|(&e, w)| w * Rational::from_integer(BigInt::from(e)))
            .fold(Rational::zero(), |a, b| a + b)
    }

    pub fn weighted_edegree(&self, mono: &Monomial) -> Rational {
        mono.eexp
            .iter()
            .zip(&self.eweights)
            .map(|(&e, w)| w * Rational::from_integer(BigInt::from(e)))
            .fold(Rational::zero(), |a, b| a + b)
    }

    /// True iff the monomial belongs to the flexible error set:
    /// weighted eps-degree >= p OR weighted x-degree >= q.
    pub fn in_error_set(&self, mono: &Monomial) -> Result<bool, OrderError> {
        if !mono.is_y_free() {
            return Err(OrderError::StableExponent);
        }
        self.check_arity(mono)?;
        Ok(self.in_error_set_unchecked(mono))
    }

    fn in_error_set_unchecked(&self, mono: &Monomial) -> bool {
        self.weighted_edegree(mono) >= Rational::from_integer(BigInt::from(self.p))
            || self.weighted_xdegree(mono) >= Rational::from_integer(BigInt::from(self.q))
    }

    pub fn in_kept_set(&self, mono: &Monomial) -> Result<bool, OrderError> {
        Ok(!self.in_error_set(mono)?)
    }

    /// Remove every error-set term; kept terms are unchanged.
    pub fn truncate(&self, poly: &Polynomial) -> Result<Polynomial, OrderError> {
        if !poly.is_y_free() {
            return Err(OrderError::StableExponent);
        }
        Ok(self.truncate_any(poly))
    }

    /// Truncation that ignores the stable block (used internally where
    /// intermediate products may still carry y factors).
    pub(crate) fn truncate_any(&self, poly: &Polynomial) -> Polynomial {
        poly.filter_terms(|m| !self.in_error_set_unchecked(m))
    }

    pub fn to_json(&self) -> OrderSpecRecord {
        OrderSpecRecord {
            q: self.q,
            p: self.p,
            xweights: self.xweights.iter().map(rational_to_string).collect(),
            eweights: self.eweights.iter().map(rational_to_string).collect(),
        }
    }

    pub fn from_json(rec: &OrderSpecRecord) -> Result<Self, OrderError> {
        let parse = |ws: &[String]| -> Result<Vec<Rational>, OrderError> {
            ws.iter()
                .map(|w| rational_from_str(w).ok_or(OrderError::NonPositiveWeight))
                .collect()
        };
        OrderSpec::weighted(rec.q, rec.p, parse(&rec.xweights)?, parse(&rec.eweights)?)
    }
}

/// Serialized form: `{"q": 6, "p": 3, "xweights": [...], "eweights": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderSpecRecord {
    pub q: u32,
    pub p: u32,
    pub xweights: Vec<String>,
    pub eweights: Vec<String>,
}

/// True iff eps-degree/p + x-degree/q >= 1 (exact rational comparison).
/// With p = q = r this is total degree >= r.
pub fn in_coupled_error_set(mono: &Monomial, p: u32, q: u32) -> Result<bool, OrderError> {
    if !mono.is_y_free() {
        return Err(OrderError::StableExponent);
    }
    let ratio = BigRational::new(BigInt::from(mono.edegree()), BigInt::from(p))
        + BigRational::new(BigInt::from(mono.xdegree()), BigInt::from(q));
    Ok(ratio >= BigRational::one())
}

/// Which error class a residual is checked against.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderMode {
    Flexible(OrderSpec),
    Coupled { p: u32, q: u32 },
}

impl OrderMode {
    pub fn coupled(r: u32) -> OrderMode {
        OrderMode::Coupled { p: r, q: r }
    }

    pub fn contains(&self, mono: &Monomial) -> Result<bool, OrderError> {
        match self {
            OrderMode::Flexible(spec) => spec.in_error_set(mono),
            OrderMode::Coupled { p, q } => in_coupled_error_set(mono, *p, *q),
        }
    }
}

/// Outcome of a residual-order check.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderVerdict {
    pub pass: bool,
    pub offenders: Vec<Monomial>,
}

/// Pass iff every monomial of `poly` lies in the designated error set;
/// on failure every violator is listed (graded-lex order).
pub fn verify_order(poly: &Polynomial, mode: &OrderMode) -> Result<OrderVerdict, OrderError> {
    let mut offenders = Vec::new();
    for (mono, _) in poly.terms() {
        if !mode.contains(mono)? {
            offenders.push(mono.clone());
        }
    }
    Ok(OrderVerdict { pass: offenders.is_empty(), offenders })
}
