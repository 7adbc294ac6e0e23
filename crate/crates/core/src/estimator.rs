//! Single-hidden-layer tanh estimator of the unknown nonlinearity and its adaptive law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralConfig {
    /// Neurons per state channel.
    pub neurons: usize,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
    /// Diagonal of K_η, one entry per state channel.
    pub k_eta: Vec<f64>,
    /// Use `tanh(x_l)` for every neuron instead of shifted neurons.
    #[serde(default)]
    pub literal_activation: bool,
    /// Advisory upper bound on ‖K_η‖; exceeding it only warns.
    #[serde(default)]
    pub k_eta_star: Option<f64>,
}

impl NeuralConfig {
    /// `neurons` unit-scale neurons with centers evenly spaced over `[lo, hi]`.
    pub fn evenly_spaced(neurons: usize, lo: f64, hi: f64, k_eta: Vec<f64>) -> Result<Self> {
        if neurons == 0 {
            return Err(Error::InvalidConfig("neuron count must be at least 1".into()));
        }
        let centers = if neurons == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..neurons)
                .map(|k| lo + (hi - lo) * k as f64 / (neurons - 1) as f64)
                .collect()
        };
        let cfg = Self {
            neurons,
            centers,
            scales: vec![1.0; neurons],
            k_eta,
            literal_activation: false,
            k_eta_star: None,
        };
        cfg.check(cfg.k_eta.len())?;
        Ok(cfg)
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.neurons == 0 {
            return Err(Error::InvalidConfig("neuron count must be at least 1".into()));
        }
        if self.centers.len() != self.neurons || self.scales.len() != self.neurons {
            return Err(Error::InvalidConfig(format!(
                "expected {} centers and scales, got {} and {}",
                self.neurons,
                self.centers.len(),
                self.scales.len()
            )));
        }
        if self.scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidConfig("neuron scales must be positive".into()));
        }
        if self.k_eta.len() != n {
            return Err(Error::InvalidConfig(format!(
                "K_eta needs {n} diagonal entries, got {}",
                self.k_eta.len()
            )));
        }
        if self.k_eta.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::InvalidConfig("K_eta diagonal must be positive".into()));
        }
        if let Some(star) = self.k_eta_star {
            let norm = self.k_eta.iter().fold(0.0f64, |m, k| m.max(*k));
            if norm > star {
                log::warn!("‖K_eta‖ = {norm} exceeds the advisory bound {star}");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralState {
    /// n×m weights.
    pub eta_hat: Mat,
    pub frozen: bool,
}

impl NeuralState {
    pub fn zeros(n: usize, neurons: usize) -> Self {
        Self {
            eta_hat: Mat::zeros(n, neurons),
            frozen: false,
        }
    }

    pub fn norm(&self) -> f64 {
        self.eta_hat.norm()
    }
}

/// n×m matrix with entry (l, k) = tanh(s_k (x_l - c_k)).
pub fn activations(cfg: &NeuralConfig, x: &Vector) -> Mat {
    Mat::from_fn(x.len(), cfg.neurons, |l, k| {
        if cfg.literal_activation {
            x[l].tanh()
        } else {
            (cfg.scales[k] * (x[l] - cfg.centers[k])).tanh()
        }
    })
}

/// ∂φ/∂x_l for row l, same layout as [`activations`].
pub fn activation_slopes(cfg: &NeuralConfig, x: &Vector) -> Mat {
    Mat::from_fn(x.len(), cfg.neurons, |l, k| {
        let (s, c) = if cfg.literal_activation {
            (1.0, 0.0)
        } else {
            (cfg.scales[k], cfg.centers[k])
        };
        let th = (s * (x[l] - c)).tanh();
        s * (1.0 - th * th)
    })
}

/// [`activations`] and [`activation_slopes`] sharing one tanh evaluation per entry.
pub fn activations_with_slopes(cfg: &NeuralConfig, x: &Vector) -> (Mat, Mat) {
    let mut phi = Mat::zeros(x.len(), cfg.neurons);
    let mut slopes = Mat::zeros(x.len(), cfg.neurons);
    for k in 0..cfg.neurons {
        let (s, c) = if cfg.literal_activation {
            (1.0, 0.0)
        } else {
            (cfg.scales[k], cfg.centers[k])
        };
        for l in 0..x.len() {
            let th = (s * (x[l] - c)).tanh();
            phi[(l, k)] = th;
            slopes[(l, k)] = s * (1.0 - th * th);
        }
    }
    (phi, slopes)
}

pub fn estimate(eta_hat: &Mat, phi: &Mat) -> Result<f64> {
    if eta_hat.shape() != phi.shape() {
        return Err(Error::DimensionMismatch(format!(
            "weights {:?} vs activations {:?}",
            eta_hat.shape(),
            phi.shape()
        )));
    }
    Ok(eta_hat.component_mul(phi).sum())
}

/// Gradient of the estimate with respect to the state.
pub fn estimate_gradient(cfg: &NeuralConfig, eta_hat: &Mat, x: &Vector) -> Vector {
    gradient_from_slopes(eta_hat, &activation_slopes(cfg, x))
}

pub fn gradient_from_slopes(eta_hat: &Mat, slopes: &Mat) -> Vector {
    Vector::from_fn(slopes.nrows(), |l, _| {
        eta_hat.row(l).iter().zip(slopes.row(l).iter()).map(|(a, b)| a * b).sum()
    })
}

/// `K_η⁻¹ φ (Eᵀ P B_f)`.
pub fn adaptation_rate(cfg: &NeuralConfig, phi: &Mat, e: &Vector, p: &Mat, b_f: &Vector) -> Result<Mat> {
    let n = e.len();
    if phi.nrows() != n || p.shape() != (n, n) || b_f.len() != n || cfg.k_eta.len() != n {
        return Err(Error::DimensionMismatch("adaptation operands disagree in size".into()));
    }
    if cfg.k_eta.iter().any(|k| *k == 0.0) {
        return Err(Error::InvalidConfig("K_eta has a zero diagonal entry".into()));
    }
    let s = (e.transpose() * p * b_f)[0];
    let mut rate = phi * s;
    for (l, k) in cfg.k_eta.iter().enumerate() {
        rate.row_mut(l).scale_mut(1.0 / k);
    }
    Ok(rate)
}

/// One explicit Euler step of the adaptive law; frozen states come back unchanged.
#[allow(clippy::too_many_arguments)]
pub fn adapt_step(
    st: &NeuralState,
    cfg: &NeuralConfig,
    phi: &Mat,
    e: &Vector,
    p: &Mat,
    b_f: &Vector,
    dt: f64,
    frozen: bool,
) -> Result<NeuralState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("dt must be positive".into()));
    }
    if frozen {
        return Ok(NeuralState {
            eta_hat: st.eta_hat.clone(),
            frozen: true,
        });
    }
    let rate = adaptation_rate(cfg, phi, e, p, b_f)?;
    Ok(NeuralState {
        eta_hat: &st.eta_hat + rate * dt,
        frozen: false,
    })
}
