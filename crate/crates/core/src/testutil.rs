//! Deterministic random system generation for property and acceptance
//! tests: desk-scale systems that satisfy the standard-form hypotheses by
//! construction (A built from zero and rotation blocks, B triangular with
//! negative diagonal, f and g vanishing to second order).

use num_bigint::BigInt;
use num_traits::Zero;

use crate::poly::{Layout, Monomial, Polynomial, Rational};
use crate::sysmodel::{CentreSystem, VariableLayout};

/// Small xorshift generator so test inputs are reproducible without any
/// external RNG dependency.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in 0..bound.
    pub fn below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }

    /// Integer in [-mag, mag].
    pub fn coeff(&mut self, mag: i64) -> i64 {
        (self.below((2 * mag + 1) as u64) as i64) - mag
    }
}

fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Random polynomial over the full (x, y, eps) layout with every term of
/// total degree in [2, max_degree] and integer coefficients bounded by mag.
pub fn random_nonlinearity(rng: &mut TestRng, layout: Layout, max_degree: u32, mag: i64) -> Polynomial {
    let nterms = rng.below(4);
    let nvars = layout.centre + layout.stable + layout.params;
    let mut terms = Vec::new();
    for _ in 0..nterms {
        let degree = 2 + rng.below((max_degree - 1) as u64) as u32;
        let mut mono = Monomial::unit(layout);
        for _ in 0..degree {
            let slot = rng.below(nvars as u64) as usize;
            if slot < layout.centre {
                mono.xexp[slot] += 1;
            } else if slot < layout.centre + layout.stable {
                mono.yexp[slot - layout.centre] += 1;
            } else {
                mono.eexp[slot - layout.centre - layout.stable] += 1;
            }
        }
        let c = rng.coeff(mag);
        if c != 0 {
            terms.push((mono, int(c)));
        }
    }
    Polynomial::from_terms(layout, terms)
}

/// Random system with m centre and n stable variables (1..=2 each) and
/// l parameters (0..=2), valid by construction:
/// eigenvalues of A purely imaginary, eigenvalues of B negative reals.
pub fn random_valid_system(rng: &mut TestRng) -> CentreSystem {
    let m = 1 + rng.below(2) as usize;
    let n = 1 + rng.below(2) as usize;
    let l = rng.below(3) as usize;
    let layout = VariableLayout {
        centre: (0..m).map(|i| format!("x{}", i + 1)).collect(),
        stable: (0..n).map(|i| format!("y{}", i + 1)).collect(),
        params: (0..l).map(|i| format!("e{}", i + 1)).collect(),
    };
    let shape = layout.shape();

    // A: zero, or a rotation block when m = 2
    let mut a = vec![vec![Rational::zero(); m]; m];
    if m == 2 && rng.below(2) == 0 {
        let omega = 1 + rng.coeff(2).abs();
        a[0][1] = int(omega);
        a[1][0] = int(-omega);
    }

    // B: lower triangular with negative diagonal, so the spectrum is the
    // diagonal and strictly negative
    let mut b = vec![vec![Rational::zero(); n]; n];
    for (i, row) in b.iter_mut().enumerate() {
        for (j, entry) in row.iter_mut().enumerate().take(i + 1) {
            if i == j {
                *entry = int(-(1 + rng.coeff(2).abs()));
            } else {
                *entry = int(rng.coeff(2));
            }
        }
    }

    let f = (0..m).map(|_| random_nonlinearity(rng, shape, 3, 3)).collect();
    let g = (0..n).map(|_| random_nonlinearity(rng, shape, 3, 3)).collect();
    CentreSystem { layout, a, b, f, g }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::{parse_system, validate_spectrum, DEFAULT_SPECTRUM_TOL};

    #[test]
    fn generated_systems_are_valid() {
        let mut rng = TestRng::new(7);
        for _ in 0..50 {
            let sys = random_valid_system(&mut rng);
            assert!(validate_spectrum(&sys, DEFAULT_SPECTRUM_TOL).unwrap().pass);
            for p in sys.f.iter().chain(&sys.g) {
                assert!(p.terms().all(|(m, _)| m.total_degree() >= 2));
            }
            // round trip through the text format
            let again = parse_system(&sys.to_text()).unwrap();
            assert_eq!(again, sys);
        }
    }
}
