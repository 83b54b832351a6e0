//! Centre-manifold approximation: the residual operator H, the
//! degree-graded homological solver, the fixed-point iterator, and reduced
//! model assembly.
//!
//! The residual of a candidate manifold `phi(x, eps)` is
//!
//! ```text
//! H(phi) = phi_x [A x + f(x, phi, eps)] - B phi - g(x, phi, eps)
//! ```
//!
//! `solve_graded` makes the kept-set residual exactly zero, one total degree
//! at a time. At degree d the unknown coefficients enter only through the
//! linear homological operator `L(delta) = delta_x (A x) - B delta`, which
//! preserves total degree; all other occurrences of the degree-d unknowns
//! contribute at degree > d because f and g vanish to second order, so the
//! lower-degree coefficients are already final when degree d is solved.
//! Error-set monomials are discarded as they arise, which is sound because
//! the error set absorbs products.

use num_traits::Zero;
use thiserror::Error;

use crate::order::{OrderError, OrderSpec};
use crate::poly::{Layout, Monomial, PolyError, Polynomial, Rational, Var};
use crate::sysmodel::CentreSystem;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error("manifold has {got} components, system has {expected} stable variables")]
    ComponentArity { expected: usize, got: usize },
    #[error("manifold component mentions a stable variable")]
    StableInManifold,
    #[error("resonance detected: spectral hypotheses violated")]
    Resonance,
    #[error("stable matrix B is singular")]
    SingularStableMatrix,
    #[error("fixed-point iteration did not converge within {iterations} iterations; use the graded solver for systems with coupling in A")]
    NonConvergence { iterations: u32, last: Vec<Polynomial> },
}

/// How the approximation was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Graded,
    FixedPoint { iterations: u32 },
}

/// Polynomial manifold approximation `y = phi(x, eps)` with its order spec.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldApprox {
    pub phi: Vec<Polynomial>,
    pub spec: OrderSpec,
    pub method: Method,
}

/// Truncation convention for the reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelOrder {
    /// Truncate f on the manifold at (q + 1, p): f is at least quadratic, so
    /// one extra x-degree is available for free.
    #[default]
    QPlusOne,
    /// Truncate at the manifold's own (q, p).
    Q,
}

/// The low-dimensional model `x' = A x + f(x, phi(x, eps), eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub rhs: Vec<Polynomial>,
    /// Spec the nonlinear part was truncated at.
    pub spec: OrderSpec,
}

fn check_phi(phi: &[Polynomial], sys: &CentreSystem) -> Result<(), SolveError> {
    let shape = sys.shape();
    if phi.len() != shape.stable {
        return Err(SolveError::ComponentArity { expected: shape.stable, got: phi.len() });
    }
    for component in phi {
        if component.layout() != shape {
            return Err(PolyError::LayoutMismatch(component.layout(), shape).into());
        }
        if !component.is_y_free() {
            return Err(SolveError::StableInManifold);
        }
    }
    Ok(())
}

/// Exact symbolic residual H(phi), un-truncated.
pub fn apply_h(phi: &[Polynomial], sys: &CentreSystem) -> Result<Vec<Polynomial>, SolveError> {
    check_phi(phi, sys)?;
    let shape = sys.shape();
    // centre drive: (A x)_k + f_k(x, phi, eps)
    let mut drive = Vec::with_capacity(shape.centre);
    for k in 0..shape.centre {
        drive.push(sys.ax_row(k).add(&sys.f[k].substitute_stable(phi)?)?);
    }
    let mut residual = Vec::with_capacity(shape.stable);
    for i in 0..shape.stable {
        let mut acc = Polynomial::zero(shape);
        for (k, drive_k) in drive.iter().enumerate() {
            acc = acc.add(&phi[i].differentiate(Var::Centre(k))?.mul(drive_k)?)?;
        }
        for (j, phi_j) in phi.iter().enumerate() {
            acc = acc.sub(&phi_j.scale(&sys.b[i][j]))?;
        }
        acc = acc.sub(&sys.g[i].substitute_stable(phi)?)?;
        residual.push(acc);
    }
    Ok(residual)
}

/// All y-free kept monomials of the spec over the given layout.
pub fn kept_monomials(spec: &OrderSpec, layout: Layout) -> Result<Vec<Monomial>, OrderError> {
    if spec.xweights().len() != layout.centre || spec.eweights().len() != layout.params {
        return Err(OrderError::WeightArity {
            expected: layout.centre.max(layout.params),
            got: spec.xweights().len().min(spec.eweights().len()),
        });
    }
    // per-variable exponent bound: w * e < bound
    fn max_exp(weight: &Rational, bound: u32) -> u32 {
        let bound = Rational::from_integer(bound.into());
        let mut e = 0u32;
        while weight * Rational::from_integer((e + 1).into()) < bound {
            e += 1;
        }
        e
    }
    let xmax: Vec<u32> = spec.xweights().iter().map(|w| max_exp(w, spec.q())).collect();
    let emax: Vec<u32> = spec.eweights().iter().map(|w| max_exp(w, spec.p())).collect();
    let mut out = Vec::new();
    let mut mono = Monomial::unit(layout);
    fn walk(
        spec: &OrderSpec,
        xmax: &[u32],
        emax: &[u32],
        mono: &mut Monomial,
        block: usize,
        idx: usize,
        out: &mut Vec<Monomial>,
    ) {
        if block == 0 {
            if idx == mono.xexp.len() {
                walk(spec, xmax, emax, mono, 1, 0, out);
                return;
            }
            for e in 0..=xmax[idx] {
                mono.xexp[idx] = e;
                walk(spec, xmax, emax, mono, 0, idx + 1, out);
            }
            mono.xexp[idx] = 0;
        } else {
            if idx == mono.eexp.len() {
                if !spec.in_error_set(mono).expect("y-free by construction") {
                    out.push(mono.clone());
                }
                return;
            }
            for e in 0..=emax[idx] {
                mono.eexp[idx] = e;
                walk(spec, xmax, emax, mono, 1, idx + 1, out);
            }
            mono.eexp[idx] = 0;
        }
    }
    walk(spec, &xmax, &emax, &mut mono, 0, 0, &mut out);
    out.sort();
    Ok(out)
}

/// Exact Gaussian elimination with the pivot chosen to keep entries small.
/// Returns `None` when the matrix is singular.
fn solve_rational(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        // pivot: nonzero entry of smallest bit size
        let pivot = (col..n)
            .filter(|&r| !a[r][col].is_zero())
            .min_by_key(|&r| a[r][col].numer().bits() + a[r][col].denom().bits())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            if a[row][col].is_zero() {
                continue;
            }
            let factor = &a[row][col] / &a[col][col];
            for k in col..n {
                let delta = &factor * &a[col][k];
                a[row][k] -= delta;
            }
            let delta = &factor * &b[col];
            b[row] -= delta;
        }
    }
    let mut x = vec![Rational::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc -= &a[row][k] * &x[k];
        }
        x[row] = acc / &a[row][row];
    }
    Some(x)
}

fn invert_rational(b: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = b.len();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![Rational::zero(); n];
        e[j] = Rational::from_integer(1.into());
        cols.push(solve_rational(b.to_vec(), e)?);
    }
    // cols[j] is column j of the inverse
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

/// Solve H(phi) = 0 order by order over the kept set. The output satisfies
/// `truncate(apply_h(phi), spec) = 0` exactly.
pub fn solve_graded(sys: &CentreSystem, spec: &OrderSpec) -> Result<ManifoldApprox, SolveError> {
    let shape = sys.shape();
    let n = shape.stable;
    let kept = kept_monomials(spec, shape)?;
    let max_degree = kept.iter().map(|m| m.total_degree()).max().unwrap_or(0);
    let mut phi = vec![Polynomial::zero(shape); n];

    for degree in 2..=max_degree {
        let basis: Vec<&Monomial> = kept.iter().filter(|m| m.total_degree() == degree).collect();
        let k = basis.len();
        if k == 0 {
            continue;
        }
        let residual = apply_h(&phi, sys)?;
        let mut rhs = vec![Rational::zero(); n * k];
        let mut any = false;
        for i in 0..n {
            let truncated = spec.truncate(&residual[i])?;
            for (t, mono) in basis.iter().enumerate() {
                let c = truncated.coeff(mono);
                if !c.is_zero() {
                    any = true;
                }
                rhs[i * k + t] = -c;
            }
        }
        if !any {
            continue;
        }
        // columns of the homological operator restricted to this degree
        let mut matrix = vec![vec![Rational::zero(); n * k]; n * k];
        for (s, mono) in basis.iter().enumerate() {
            // transport part: d/dx (mono) . (A x), same for every component
            let mono_poly = Polynomial::from_terms(shape, vec![((*mono).clone(), Rational::from_integer(1.into()))]);
            let mut transport = Polynomial::zero(shape);
            for kk in 0..shape.centre {
                transport = transport.add(&mono_poly.differentiate(Var::Centre(kk))?.mul(&sys.ax_row(kk))?)?;
            }
            let transport = spec.truncate(&transport)?;
            for j in 0..n {
                let col = j * k + s;
                // the transport acts within component j only
                for (t, target) in basis.iter().enumerate() {
                    let c = transport.coeff(target);
                    if !c.is_zero() {
                        matrix[j * k + t][col] = c;
                    }
                }
                // -B delta couples components
                for i in 0..n {
                    if !sys.b[i][j].is_zero() {
                        let entry = &mut matrix[i * k + s][col];
                        *entry -= sys.b[i][j].clone();
                    }
                }
            }
        }
        let solution = solve_rational(matrix, rhs).ok_or(SolveError::Resonance)?;
        for j in 0..n {
            let terms = basis
                .iter()
                .enumerate()
                .map(|(t, mono)| ((*mono).clone(), solution[j * k + t].clone()));
            phi[j] = phi[j].add(&Polynomial::from_terms(shape, terms))?;
        }
    }

    Ok(ManifoldApprox { phi, spec: spec.clone(), method: Method::Graded })
}

/// Default iteration budget for the fixed-point solver.
pub fn default_max_iter(spec: &OrderSpec) -> u32 {
    (spec.q() - 1) + (spec.p() - 1)
}

/// One step of the fixed-point map:
/// `phi <- truncate(B^-1 [phi_x (A x + f(x, phi, eps)) - g(x, phi, eps)], spec)`.
pub fn fixed_point_step(
    sys: &CentreSystem,
    spec: &OrderSpec,
    phi: &[Polynomial],
) -> Result<Vec<Polynomial>, SolveError> {
    check_phi(phi, sys)?;
    let shape = sys.shape();
    let b_inv = invert_rational(&sys.b).ok_or(SolveError::SingularStableMatrix)?;
    let mut drive = Vec::with_capacity(shape.centre);
    for k in 0..shape.centre {
        drive.push(sys.ax_row(k).add(&sys.f[k].substitute_stable(phi)?)?);
    }
    let mut brackets = Vec::with_capacity(shape.stable);
    for j in 0..shape.stable {
        let mut acc = Polynomial::zero(shape);
        for (k, drive_k) in drive.iter().enumerate() {
            acc = acc.add(&phi[j].differentiate(Var::Centre(k))?.mul(drive_k)?)?;
        }
        acc = acc.sub(&sys.g[j].substitute_stable(phi)?)?;
        brackets.push(acc);
    }
    let mut next = Vec::with_capacity(shape.stable);
    for i in 0..shape.stable {
        let mut acc = Polynomial::zero(shape);
        for (j, bracket) in brackets.iter().enumerate() {
            acc = acc.add(&bracket.scale(&b_inv[i][j]))?;
        }
        next.push(spec.truncate(&acc)?);
    }
    Ok(next)
}

/// Iterate the fixed-point map from phi = 0 until an iterate reproduces its
/// predecessor after truncation. Convergence within `max_iter` is guaranteed
/// only when A = 0 (pure degree triangularity); otherwise the graded solver
/// is the authoritative route.
pub fn iterate_fixed_point(
    sys: &CentreSystem,
    spec: &OrderSpec,
    max_iter: u32,
) -> Result<ManifoldApprox, SolveError> {
    let shape = sys.shape();
    let mut current = vec![Polynomial::zero(shape); shape.stable];
    for iteration in 1..=max_iter {
        let next = fixed_point_step(sys, spec, &current)?;
        if next == current {
            return Ok(ManifoldApprox {
                phi: next,
                spec: spec.clone(),
                method: Method::FixedPoint { iterations: iteration },
            });
        }
        current = next;
    }
    Err(SolveError::NonConvergence { iterations: max_iter, last: current })
}

/// Restrict the system to the manifold: `x' = A x + truncate(f(x, phi, eps))`
/// at the configured model order.
pub fn reduce_model(
    sys: &CentreSystem,
    approx: &ManifoldApprox,
    convention: ModelOrder,
) -> Result<ReducedModel, SolveError> {
    check_phi(&approx.phi, sys)?;
    let spec = match convention {
        ModelOrder::QPlusOne => approx.spec.boosted(1, 0),
        ModelOrder::Q => approx.spec.clone(),
    };
    let mut rhs = Vec::with_capacity(sys.shape().centre);
    for i in 0..sys.shape().centre {
        let nonlinear = spec.truncate(&sys.f[i].substitute_stable(&approx.phi)?)?;
        rhs.push(sys.ax_row(i).add(&nonlinear)?);
    }
    Ok(ReducedModel { rhs, spec })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sysmodel::parse_system;
    use num_traits::FromPrimitive;

    const PROTOTYPE: &str = "[centre]\nx' = eps*x - x*y\n[stable]\ny' = -y + x^2\n[params]\neps\n";

    fn prototype() -> CentreSystem {
        parse_system(PROTOTYPE).unwrap()
    }

    fn rat(n: i64) -> Rational {
        Rational::from_i64(n).unwrap()
    }

    fn mono(xe: u32, ee: u32) -> Monomial {
        Monomial { xexp: vec![xe], yexp: vec![0], eexp: vec![ee] }
    }

    fn poly(sys: &CentreSystem, terms: &[(i64, u32, u32)]) -> Polynomial {
        Polynomial::from_terms(sys.shape(), terms.iter().map(|&(c, xe, ee)| (mono(xe, ee), rat(c))))
    }

    #[test]
    fn residual_of_x_squared() {
        let sys = prototype();
        let phi = vec![poly(&sys, &[(1, 2, 0)])];
        let residual = apply_h(&phi, &sys).unwrap();
        assert_eq!(residual, vec![poly(&sys, &[(2, 2, 1), (-2, 4, 0)])]);
    }

    #[test]
    fn residual_of_zero_is_minus_g() {
        let sys = prototype();
        let phi = vec![Polynomial::zero(sys.shape())];
        let residual = apply_h(&phi, &sys).unwrap();
        assert_eq!(residual, vec![poly(&sys, &[(-1, 2, 0)])]);
    }

    #[test]
    fn residual_of_h2_cancels_through_degree_three() {
        let sys = prototype();
        let phi = vec![poly(&sys, &[(1, 2, 0), (-2, 2, 1), (2, 4, 0)])];
        let residual = apply_h(&phi, &sys).unwrap();
        let lowest = residual[0].terms().next().unwrap();
        assert_eq!(lowest.0, &mono(2, 2));
        assert_eq!(lowest.1, &rat(-4));
    }

    #[test]
    fn graded_solver_reproduces_golden_manifold() {
        let sys = prototype();
        let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
        let approx = solve_graded(&sys, &spec).unwrap();
        let expected = poly(
            &sys,
            &[(1, 2, 0), (-2, 2, 1), (4, 2, 2), (2, 4, 0), (-16, 4, 1), (88, 4, 2)],
        );
        assert_eq!(approx.phi, vec![expected]);
        assert_eq!(approx.method, Method::Graded);
    }

    #[test]
    fn graded_solver_kept_restriction() {
        let sys = prototype();
        let spec = OrderSpec::unit(4, 2, 1, 1).unwrap();
        let approx = solve_graded(&sys, &spec).unwrap();
        assert_eq!(approx.phi, vec![poly(&sys, &[(1, 2, 0), (-2, 2, 1)])]);
    }

    #[test]
    fn linear_system_has_flat_manifold() {
        let sys = parse_system("[centre]\nx' = x*x^2 - x^3\n[stable]\ny' = -y\n").unwrap();
        assert!(sys.f[0].is_zero() && sys.g[0].is_zero());
        let spec = OrderSpec::unit(5, 1, 1, 0).unwrap();
        let approx = solve_graded(&sys, &spec).unwrap();
        assert!(approx.phi[0].is_zero());
    }

    #[test]
    fn graded_residual_vanishes_on_kept_set() {
        let sys = prototype();
        let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
        let approx = solve_graded(&sys, &spec).unwrap();
        let residual = apply_h(&approx.phi, &sys).unwrap();
        assert!(spec.truncate(&residual[0]).unwrap().is_zero());
    }

    #[test]
    fn fixed_point_reproduces_iterates() {
        let sys = prototype();
        let spec = OrderSpec::unit(10, 10, 1, 1).unwrap();
        let h0 = vec![Polynomial::zero(sys.shape())];
        let h1 = fixed_point_step(&sys, &spec, &h0).unwrap();
        assert_eq!(h1, vec![poly(&sys, &[(1, 2, 0)])]);
        let h2 = fixed_point_step(&sys, &spec, &h1).unwrap();
        assert_eq!(h2, vec![poly(&sys, &[(1, 2, 0), (-2, 2, 1), (2, 4, 0)])]);
    }

    #[test]
    fn fixed_point_agrees_with_graded_when_a_is_zero() {
        let sys = prototype();
        let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
        let graded = solve_graded(&sys, &spec).unwrap();
        let fixed = iterate_fixed_point(&sys, &spec, 32).unwrap();
        assert_eq!(fixed.phi, graded.phi);
        assert!(matches!(fixed.method, Method::FixedPoint { .. }));
    }

    #[test]
    fn fixed_point_non_convergence_carries_last_iterate() {
        let sys = prototype();
        let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
        match iterate_fixed_point(&sys, &spec, 1) {
            Err(SolveError::NonConvergence { iterations: 1, last }) => {
                assert_eq!(last, vec![poly(&sys, &[(1, 2, 0)])]);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn reduced_model_prototype() {
        let sys = prototype();
        let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
        let approx = solve_graded(&sys, &spec).unwrap();
        let model = reduce_model(&sys, &approx, ModelOrder::QPlusOne).unwrap();
        let expected = poly(
            &sys,
            &[
                (1, 1, 1),
                (-1, 3, 0),
                (2, 3, 1),
                (-4, 3, 2),
                (-2, 5, 0),
                (16, 5, 1),
                (-88, 5, 2),
            ],
        );
        assert_eq!(model.rhs, vec![expected]);
    }

    #[test]
    fn reduced_model_trivial_cases() {
        let sys = prototype();
        let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
        let zero = ManifoldApprox {
            phi: vec![Polynomial::zero(sys.shape())],
            spec: spec.clone(),
            method: Method::Graded,
        };
        let model = reduce_model(&sys, &zero, ModelOrder::QPlusOne).unwrap();
        assert_eq!(model.rhs, vec![poly(&sys, &[(1, 1, 1)])]);
    }

    #[test]
    fn kept_monomials_prototype_six_three() {
        let spec = OrderSpec::unit(6, 3, 1, 1).unwrap();
        let kept = kept_monomials(&spec, Layout::new(1, 1, 1)).unwrap();
        assert_eq!(kept.len(), 18); // x^a eps^b with a < 6, b < 3
        assert!(kept.iter().all(|m| m.xdegree() < 6 && m.edegree() < 3));
    }
}
