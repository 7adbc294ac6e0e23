//! Virtual-disturbance observer.
//!
//! The observer copies the plant drift and the actuation it expects the plant to receive,
//! and corrects with `-û_d = K_o tanh(P (X - X̂))`. The nonlinearity inside the observer is
//! the network estimate, since the true one is unknown.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{self, NeuralConfig};
use crate::linalg::{Mat, Vector};
use crate::plant::SystemMatrices;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverGains {
    /// Diagonal of K_o.
    pub k_o: Vec<f64>,
    /// ξ > 1.
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub x_hat: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCheck {
    pub satisfied: bool,
    /// `min K_o - ξ(σ* + 2η*)`.
    pub margin: f64,
}

/// `-K_o tanh(P E_o)`.
pub fn virtual_disturbance(k_o: &[f64], p: &Mat, e_o: &Vector) -> Vector {
    let z = p * e_o;
    Vector::from_fn(e_o.len(), |l, _| -k_o[l] * z[l].tanh())
}

/// The actuation the observer mirrors: `B Bᵀ c + B Bᵀ û_d + ū`, where `c` is the consensus
/// vector of the control law (before projection on the input).
pub fn actuation_drive(m: &SystemMatrices, consensus: &Vector, u_hat_d: &Vector, u_bar: &Vector) -> Vector {
    let bbt = m.input_outer();
    &bbt * consensus + &bbt * u_hat_d + u_bar
}

/// `A X̂ + drive - û_d + B_f f̂(X̂)`.
pub fn observer_derivative(
    m: &SystemMatrices,
    x_hat: &Vector,
    drive: &Vector,
    u_hat_d: &Vector,
    f_hat: f64,
) -> Result<Vector> {
    let n = m.dim();
    if x_hat.len() != n || drive.len() != n || u_hat_d.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "observer operands must have {n} entries"
        )));
    }
    Ok(&m.a * x_hat + drive - u_hat_d + &m.b_f * f_hat)
}

/// Everything the implicit observer step needs besides the state.
#[derive(Clone, Copy)]
pub struct ImplicitStep<'a> {
    pub m: &'a SystemMatrices,
    pub p: &'a Mat,
    pub k_o: &'a [f64],
    pub nn: &'a NeuralConfig,
    pub eta_hat: &'a Mat,
    pub drive: &'a Vector,
    /// Plant state at the end of the step.
    pub x_next: &'a Vector,
    /// Held virtual disturbance; `None` means the correction is evaluated live.
    pub held_u_hat_d: Option<&'a Vector>,
    /// Starting point for Newton; the previous state is used when absent or worse.
    pub guess: Option<&'a Vector>,
}

/// Backward-Euler step solved by Newton. The correction gain `K_o P` puts eigenvalues in the
/// millions, which an explicit step at millisecond resolution cannot follow.
pub fn implicit_step(step: &ImplicitStep<'_>, x_hat: &Vector, dt: f64) -> Result<Vector> {
    let n = step.m.dim();
    let eval = |z: &Vector| -> Result<(Vector, Mat)> {
        let (phi, slopes) = estimator::activations_with_slopes(step.nn, z);
        let f_hat = estimator::estimate(step.eta_hat, &phi)?;
        let grad = estimator::gradient_from_slopes(step.eta_hat, &slopes);
        let mut jac = step.m.a.clone() + &step.m.b_f * grad.transpose();
        let u_hat_d = match step.held_u_hat_d {
            Some(held) => held.clone(),
            None => {
                let pe = step.p * (step.x_next - z);
                for l in 0..n {
                    let th = pe[l].tanh();
                    let w = step.k_o[l] * (1.0 - th * th);
                    for c in 0..n {
                        jac[(l, c)] -= w * step.p[(l, c)];
                    }
                }
                Vector::from_fn(n, |l, _| -step.k_o[l] * pe[l].tanh())
            }
        };
        let f = observer_derivative(step.m, z, step.drive, &u_hat_d, f_hat)?;
        Ok((f, jac))
    };

    let residual = |z: &Vector| -> Result<(Vector, Mat)> {
        let (f, jac) = eval(z)?;
        Ok((z - x_hat - f * dt, jac))
    };
    // Damped Newton from the previous state; tanh saturation makes full steps overshoot.
    let eye = Mat::identity(n, n);
    let mut z = x_hat.clone();
    let (mut g, mut jac) = residual(&z)?;
    if let Some(guess) = step.guess {
        let (gg, jg) = residual(guess)?;
        if gg.norm() < g.norm() {
            z = guess.clone();
            g = gg;
            jac = jg;
        }
    }
    for _ in 0..100 {
        if g.amax() <= 1e-12 * (1.0 + z.amax()) {
            return Ok(z);
        }
        let lhs = &eye - &jac * dt;
        let delta = lhs
            .lu()
            .solve(&g)
            .ok_or_else(|| Error::Invariant("singular Newton matrix in observer step".into()))?;
        let mut lambda = 1.0;
        loop {
            let cand = &z - &delta * lambda;
            let (gc, jc) = residual(&cand)?;
            if gc.norm() < g.norm() || lambda < 1e-10 {
                z = cand;
                g = gc;
                jac = jc;
                break;
            }
            lambda *= 0.5;
        }
    }
    if g.amax() <= 1e-9 * (1.0 + z.amax()) {
        Ok(z)
    } else {
        Err(Error::Invariant(format!("observer Newton iteration stalled, |G| = {:e}", g.amax())))
    }
}

/// [`implicit_step`] with a fallback: when Newton stalls the step is split in two, with the
/// plant state interpolated linearly from `x_prev` to `step.x_next`.
pub fn implicit_step_robust(step: &ImplicitStep<'_>, x_prev: &Vector, x_hat: &Vector, dt: f64) -> Result<Vector> {
    split_step(step, x_prev, x_hat, dt, 0)
}

fn split_step(step: &ImplicitStep<'_>, x_prev: &Vector, x_hat: &Vector, dt: f64, depth: u32) -> Result<Vector> {
    match implicit_step(step, x_hat, dt) {
        Err(Error::Invariant(msg)) if depth < 12 => {
            log::debug!("observer step split at depth {depth}: {msg}");
            let mid = (x_prev + step.x_next) * 0.5;
            let first = ImplicitStep {
                x_next: &mid,
                guess: None,
                ..*step
            };
            let half = split_step(&first, x_prev, x_hat, 0.5 * dt, depth + 1)?;
            let second = ImplicitStep { guess: None, ..*step };
            split_step(&second, &mid, &half, 0.5 * dt, depth + 1)
        }
        other => other,
    }
}

pub fn check_gain_condition(gains: &ObserverGains, sigma_d_star: f64, eta_star: f64) -> Result<GainCheck> {
    if !(gains.xi > 1.0) {
        return Err(Error::InvalidConfig(format!("xi must exceed 1, got {}", gains.xi)));
    }
    if gains.k_o.iter().any(|k| !(*k > 0.0)) {
        return Err(Error::InvalidConfig("K_o diagonal must be positive".into()));
    }
    let min = gains.k_o.iter().fold(f64::INFINITY, |m, k| m.min(k.abs()));
    let margin = min - gains.xi * (sigma_d_star + 2.0 * eta_star);
    Ok(GainCheck {
        satisfied: margin > 0.0,
        margin,
    })
}

/// `2(σ* + 2η*)(1 + ξ) atanh(1/ξ)`.
pub fn d_oi(sigma_d_star: f64, eta_star: f64, xi: f64) -> f64 {
    2.0 * (sigma_d_star + 2.0 * eta_star) * (1.0 + xi) * (1.0 / xi).atanh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn chain() -> SystemMatrices {
        SystemMatrices::chain(3, -10.0, 1.0).unwrap()
    }

    #[test]
    fn mirrors_drift() {
        let m = chain();
        let x = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let z = Vector::zeros(3);
        let d = observer_derivative(&m, &x, &z, &z, 0.0).unwrap();
        assert_eq!(d, &m.a * &x);
        assert_eq!(observer_derivative(&m, &z, &z, &z, 0.0).unwrap(), z);
        assert!(observer_derivative(&m, &Vector::zeros(2), &z, &z, 0.0).is_err());
    }

    #[test]
    fn virtual_disturbance_terms() {
        let m = chain();
        let ud = Vector::from_vec(vec![0.3, -1.2, 2.5]);
        let drive = actuation_drive(&m, &Vector::zeros(3), &ud, &Vector::zeros(3));
        let d = observer_derivative(&m, &Vector::zeros(3), &drive, &ud, 0.0).unwrap();
        // term-wise: B Bᵀ û_d keeps only the last entry, then subtract û_d
        let expected = Vector::from_vec(vec![-0.3, 1.2, 2.5 - 2.5]);
        assert_eq!(d, expected);
    }

    #[test]
    fn disturbance_examples() {
        assert_eq!(virtual_disturbance(&[1.0], &Mat::identity(1, 1), &Vector::zeros(1))[0], 0.0);
        let sat = virtual_disturbance(&[1000.0, 5.0], &Mat::identity(2, 2), &Vector::from_vec(vec![1e4, -1e4]));
        assert_eq!(sat[0], -1000.0);
        assert_eq!(sat[1], 5.0);
        // tanh series x - x³/3 + 2x⁵/15
        let x: f64 = 0.001;
        let series = x - x.powi(3) / 3.0 + 2.0 * x.powi(5) / 15.0;
        let v = virtual_disturbance(&[1000.0], &Mat::identity(1, 1), &Vector::from_element(1, x));
        assert_relative_eq!(v[0], -1000.0 * series, epsilon = 1e-15);
    }

    #[test]
    fn gain_condition_examples() {
        let g = ObserverGains { k_o: vec![1000.0; 3], xi: 2.0 };
        let c = check_gain_condition(&g, 10.0, 5.0).unwrap();
        assert!(c.satisfied);
        assert_eq!(c.margin, 960.0);
        let g = ObserverGains { k_o: vec![30.0; 3], xi: 2.0 };
        assert!(!check_gain_condition(&g, 10.0, 5.0).unwrap().satisfied);
        let g = ObserverGains { k_o: vec![1000.0; 3], xi: 1.0 };
        assert!(matches!(check_gain_condition(&g, 10.0, 5.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn d_oi_formula() {
        // atanh(1/2) = ln(3)/2
        let want = 2.0 * (10.0 + 10.0) * 3.0 * 0.5 * 3f64.ln();
        assert_relative_eq!(d_oi(10.0, 5.0, 2.0), want, epsilon = 1e-12);
    }

    #[test]
    fn implicit_step_converges_to_plant() {
        let m = chain();
        let nn = NeuralConfig::evenly_spaced(3, -1.0, 1.0, vec![1.0; 3]).unwrap();
        let eta = Mat::zeros(3, 3);
        let p = Mat::identity(3, 3) * 3000.0;
        let x = Vector::from_vec(vec![1.0, 0.5, 0.0]);
        // stationary plant: Ax = [0.5, 0, 0]; feed that exact drift through the drive
        let drive = -(&m.a * &x);
        let step = ImplicitStep {
            m: &m,
            p: &p,
            k_o: &[1000.0; 3],
            nn: &nn,
            eta_hat: &eta,
            drive: &drive,
            x_next: &x,
            held_u_hat_d: None,
            guess: None,
        };
        let mut xh = &x + Vector::from_vec(vec![0.01, -0.02, 0.03]);
        for _ in 0..200 {
            xh = implicit_step(&step, &xh, 1e-3).unwrap();
        }
        assert!((&xh - &x).amax() < 1e-6);
    }

    proptest! {
        #[test]
        fn virtual_disturbance_bounded(e in proptest::collection::vec(-1e3f64..1e3, 3), k in 0.1f64..2000.0) {
            let p = Mat::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 3.0, 0.1, 0.0, 0.1, 1.0]);
            let u = virtual_disturbance(&[k, k, k], &p, &Vector::from_vec(e));
            prop_assert!(u.amax() <= k);
        }
    }
}
