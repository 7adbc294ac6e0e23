//! Continuous-time algebraic Riccati equation `PA + AᵀP - PGP + ψI = 0`.
//!
//! The stabilizing solution comes from the matrix sign function of the Hamiltonian,
//! then Newton steps on the residual polish it to rounding level.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::plant::SystemMatrices;

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiProblem {
    pub a: Mat,
    pub g: Mat,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p: Mat,
    pub residual_norm: f64,
}

impl RiccatiProblem {
    pub fn new(a: Mat, g: Mat, psi: f64) -> Result<Self> {
        let n = linalg::ensure_square(&a, "A")?;
        if g.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "G is {}x{}, A is {n}x{n}",
                g.nrows(),
                g.ncols()
            )));
        }
        Ok(Self { a, g, psi })
    }

    /// `G = (Σ_j α_ij) B Bᵀ` for a follower with `in_degree` neighbours.
    pub fn for_agent(m: &SystemMatrices, in_degree: usize, psi: f64) -> Result<Self> {
        Self::new(m.a.clone(), m.input_outer() * in_degree as f64, psi)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Frobenius norm of `PA + AᵀP - PGP + ψI`.
pub fn are_residual(p: &Mat, prob: &RiccatiProblem) -> Result<f64> {
    let n = prob.dim();
    if p.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "P is {}x{}, problem is {n}x{n}",
            p.nrows(),
            p.ncols()
        )));
    }
    Ok(residual_matrix(p, prob).norm())
}

fn residual_matrix(p: &Mat, prob: &RiccatiProblem) -> Mat {
    let n = prob.dim();
    p * &prob.a + prob.a.transpose() * p - p * &prob.g * p + Mat::identity(n, n) * prob.psi
}

/// Magnitude of the intermediate products in the residual; rounding error is proportional
/// to it even when the products cancel.
pub fn residual_scale(p: &Mat, prob: &RiccatiProblem) -> f64 {
    let np = p.norm();
    (2.0 * np * prob.a.norm() + np * np * prob.g.norm() + prob.psi * (prob.dim() as f64).sqrt())
        .max(1.0)
}

/// Absolute residual target. Single-input problems with several unstable modes can have
/// `‖P‖` in the millions, so the target relaxes to a few hundred ulps of the largest intermediate term.
pub const RESIDUAL_TOL: f64 = 1e-9;

pub fn residual_tolerance(p: &Mat, prob: &RiccatiProblem) -> f64 {
    RESIDUAL_TOL.max(512.0 * f64::EPSILON * residual_scale(p, prob))
}

/// Popov–Belevitch–Hautus test on every eigenvalue with nonnegative real part.
pub fn is_stabilizable(a: &Mat, g: &Mat) -> bool {
    stabilizability_margin(a, g) > 1e-10
}

/// Smallest singular value of `[A - λI, G]` over the eigenvalues with `Re λ >= 0`, relative
/// to the problem scale. Infinite when `A` is already Hurwitz.
pub fn stabilizability_margin(a: &Mat, g: &Mat) -> f64 {
    let n = a.nrows();
    let scale = a.norm().max(g.norm()).max(1.0);
    let mut margin = f64::INFINITY;
    for lambda in linalg::eigenvalues(a) {
        if lambda.re < -1e-12 * scale {
            continue;
        }
        let mut m = DMatrix::<Complex<f64>>::zeros(n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex::new(a[(i, j)], 0.0);
                m[(i, n + j)] = Complex::new(g[(i, j)], 0.0);
            }
            m[(i, i)] -= lambda;
        }
        margin = margin.min(m.singular_values().min() / scale);
    }
    margin
}

pub fn solve_are(prob: &RiccatiProblem) -> Result<RiccatiSolution> {
    let n = prob.dim();
    if !(prob.psi > 0.0 && prob.psi.is_finite()) {
        return Err(Error::InvalidArgument(format!("psi must be positive, got {}", prob.psi)));
    }
    let gscale = prob.g.amax().max(1.0);
    if linalg::symmetry_defect(&prob.g) > 1e-12 * gscale {
        return Err(Error::InvalidArgument("G is not symmetric".into()));
    }
    if linalg::min_symmetric_eigenvalue(&prob.g) < -1e-12 * gscale {
        return Err(Error::InvalidArgument("G is not positive semidefinite".into()));
    }
    if !is_stabilizable(&prob.a, &prob.g) {
        return Err(Error::NoStabilizingSolution("(A, G) is not stabilizable".into()));
    }

    let mut p = sign_function_solution(prob)?;
    newton_refine(prob, &mut p)?;

    if !linalg::all_finite(p.as_slice()) {
        return Err(Error::NoStabilizingSolution("non-finite solution".into()));
    }
    if linalg::min_symmetric_eigenvalue(&p) <= 0.0 {
        return Err(Error::NoStabilizingSolution("solution is not positive definite".into()));
    }
    if !linalg::is_hurwitz(&(&prob.a - &prob.g * &p)) {
        return Err(Error::NoStabilizingSolution("A - GP is not Hurwitz".into()));
    }
    let residual_norm = are_residual(&p, prob)?;
    let tol = residual_tolerance(&p, prob);
    if residual_norm > tol {
        return Err(Error::NoStabilizingSolution(format!(
            "residual {residual_norm:e} above tolerance {tol:e} for n = {n}"
        )));
    }
    Ok(RiccatiSolution { p, residual_norm })
}

fn sign_function_solution(prob: &RiccatiProblem) -> Result<Mat> {
    let n = prob.dim();
    let mut h = Mat::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&prob.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&prob.g));
    h.view_mut((n, 0), (n, n)).copy_from(&(Mat::identity(n, n) * -prob.psi));
    h.view_mut((n, n), (n, n)).copy_from(&(-prob.a.transpose()));

    let mut z = h;
    for _ in 0..200 {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::NoStabilizingSolution("Hamiltonian has eigenvalues on the imaginary axis".into()))?;
        let c = if det.is_finite() && det != 0.0 {
            det.abs().powf(1.0 / (2 * n) as f64)
        } else {
            1.0
        };
        let next = (&z / c + inv * c) * 0.5;
        let change = (&next - &z).norm() / next.norm().max(1.0);
        z = next;
        if change < 1e-13 {
            break;
        }
    }
    if !linalg::all_finite(z.as_slice()) {
        return Err(Error::NoStabilizingSolution("sign iteration diverged".into()));
    }

    // [W12; W22 + I] P = -[W11 + I; W21]
    let mut lhs = Mat::zeros(2 * n, n);
    let mut rhs = Mat::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&z.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(z.view((n, n), (n, n)) + Mat::identity(n, n)));
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(z.view((0, 0), (n, n)) + Mat::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-z.view((n, 0), (n, n))));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::NoStabilizingSolution(format!("least-squares step failed: {e}")))?;
    Ok(linalg::symmetrize(&p))
}

/// Newton steps on the residual: `(A-GP)ᵀΔ + Δ(A-GP) = -R(P)`, kept while they help.
fn newton_refine(prob: &RiccatiProblem, p: &mut Mat) -> Result<()> {
    let mut best = are_residual(p, prob)?;
    for _ in 0..50 {
        let closed = &prob.a - &prob.g * &*p;
        let r = residual_matrix(p, prob);
        let delta = match linalg::solve_lyapunov(&closed, &r) {
            Ok(d) => d,
            Err(_) => break,
        };
        let candidate = linalg::symmetrize(&(&*p + delta));
        let res = are_residual(&candidate, prob)?;
        if !(res < best) {
            break;
        }
        *p = candidate;
        best = res;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{build_matrices, AgentParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(a: f64, g: f64, psi: f64) -> RiccatiProblem {
        RiccatiProblem::new(Mat::from_element(1, 1, a), Mat::from_element(1, 1, g), psi).unwrap()
    }

    #[test]
    fn scalar_closed_form() {
        let s = solve_are(&scalar(0.0, 1.0, 1.0)).unwrap();
        assert!((s.p[(0, 0)] - 1.0).abs() < 1e-12);
        // 2ap - gp² + ψ = 0 → p = (a + sqrt(a² + gψ)) / g
        let s = solve_are(&scalar(1.5, 2.0, 3.0)).unwrap();
        let want = (1.5 + (1.5f64 * 1.5 + 6.0).sqrt()) / 2.0;
        assert!((s.p[(0, 0)] - want).abs() < 1e-12);
    }

    #[test]
    fn double_integrator_closed_form() {
        let prob = RiccatiProblem::new(
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            1.0,
        )
        .unwrap();
        let s = solve_are(&prob).unwrap();
        let r3 = 3f64.sqrt();
        let want = Mat::from_row_slice(2, 2, &[r3, 1.0, 1.0, r3]);
        assert!((&s.p - want).amax() < 1e-9);
    }

    #[test]
    fn residual_examples() {
        let prob = scalar(0.0, 1.0, 1.0);
        assert!(are_residual(&Mat::from_element(1, 1, 1.0), &prob).unwrap() <= 1e-15);
        let r = are_residual(&Mat::from_element(1, 1, 1.1), &prob).unwrap();
        assert!((r - 0.21).abs() < 1e-12);
        let prob3 = RiccatiProblem::new(Mat::zeros(3, 3), Mat::identity(3, 3), 1.0).unwrap();
        let r = are_residual(&Mat::zeros(3, 3), &prob3).unwrap();
        assert!((r - 3f64.sqrt()).abs() < 1e-15);
        assert!(are_residual(&Mat::zeros(2, 2), &prob3).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(solve_are(&scalar(0.0, -1.0, 1.0)), Err(Error::InvalidArgument(_))));
        // unstable mode with no input
        assert!(matches!(
            solve_are(&scalar(1.0, 0.0, 1.0)),
            Err(Error::NoStabilizingSolution(_))
        ));
        assert!(solve_are(&scalar(0.0, 1.0, 0.0)).is_err());
    }

    #[test]
    fn vehicle_problem_certified() {
        let m = build_matrices(&AgentParams::table_vehicle(1).unwrap(), 3).unwrap();
        let prob = RiccatiProblem::for_agent(&m, 1, 1000.0).unwrap();
        let s = solve_are(&prob).unwrap();
        let res = are_residual(&s.p, &prob).unwrap();
        assert!(res <= residual_tolerance(&s.p, &prob));
        let (unit, _) = m.with_unit_input();
        let prob = RiccatiProblem::for_agent(&unit, 2, 1000.0).unwrap();
        let s = solve_are(&prob).unwrap();
        assert!(are_residual(&s.p, &prob).unwrap() <= residual_tolerance(&s.p, &prob));
    }

    fn random_problem(rng: &mut ChaCha8Rng, full_input: bool) -> RiccatiProblem {
        let n = rng.random_range(1..=6);
        let cols = if full_input { n } else { rng.random_range(1..=n) };
        let a = Mat::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        let b = Mat::from_fn(n, cols, |_, _| rng.random_range(-2.0..2.0));
        RiccatiProblem::new(a, &b * b.transpose(), rng.random_range(0.1..5.0)).unwrap()
    }

    #[test]
    fn random_problems_meet_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut solved = 0;
        while solved < 100 {
            let prob = random_problem(&mut rng, true);
            if !is_stabilizable(&prob.a, &prob.g) {
                continue;
            }
            let s = solve_are(&prob).unwrap();
            assert!(s.residual_norm <= 1e-9, "residual {}", s.residual_norm);
            assert!(linalg::symmetry_defect(&s.p) <= 1e-10);
            assert!(linalg::min_symmetric_eigenvalue(&s.p) > 0.0);
            assert!(linalg::is_hurwitz(&(&prob.a - &prob.g * &s.p)));
            solved += 1;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn closed_loop_is_hurwitz(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let prob = random_problem(&mut rng, false);
            // near-uncontrollable draws have ‖P‖ beyond what double precision can certify
            prop_assume!(stabilizability_margin(&prob.a, &prob.g) > 1e-3);
            let s = solve_are(&prob).unwrap();
            prop_assert!(linalg::is_hurwitz(&(&prob.a - &prob.g * &s.p)));
            prop_assert!(s.residual_norm <= residual_tolerance(&s.p, &prob));
        }
    }
}
