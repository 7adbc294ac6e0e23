//! Consensus control law, packet-timeout attack detection and the hold/zero switching rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::linalg::{Mat, Vector};
use crate::plant::SystemMatrices;
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// Diagonal of K_C, every entry > 1.
    pub k_c: Vec<f64>,
    /// Diagonal of K_u.
    pub k_u: Vec<f64>,
    /// Sharpness of the sign-weighted neighbour error, > 1.
    pub rho: f64,
    /// Diagonal of the regularizer ε.
    pub eps_reg: Vec<f64>,
    /// Per-index offset D_0.
    pub d0: Vec<f64>,
}

impl ControllerGains {
    pub fn violations(&self, n: usize) -> Vec<Violation> {
        let mut out = Vec::new();
        for (name, v) in [("k_c", &self.k_c), ("k_u", &self.k_u), ("eps_reg", &self.eps_reg), ("d0", &self.d0)] {
            if v.len() != n {
                out.push(Violation::new(
                    "DIMENSION",
                    format!("{name} needs {n} entries, got {}", v.len()),
                ));
            }
        }
        if let Some((j, k)) = self.k_c.iter().enumerate().find(|(_, k)| !(**k > 1.0)) {
            out.push(Violation::new(
                "KC_DIAGONAL",
                format!("K_C diagonal entries must be > 1; entry {j} is {k}"),
            ));
        }
        if !(self.rho > 1.0) {
            out.push(Violation::new("RHO", format!("rho must be > 1, got {}", self.rho)));
        }
        if self.eps_reg.iter().any(|e| !(*e > 0.0)) {
            out.push(Violation::new("EPS_REG", "regularizer diagonal must be positive"));
        }
        if self.k_u.iter().any(|k| !(*k >= 0.0)) {
            out.push(Violation::new("KU_SIGN", "K_u diagonal must be nonnegative"));
        }
        out
    }

    /// ‖K_u‖ for a diagonal K_u.
    pub fn k_u_norm(&self) -> f64 {
        self.k_u.iter().fold(0.0f64, |m, k| m.max(k.abs()))
    }

    /// Margin of `‖K_u‖ >= ‖B_w‖ω* + u_d*`.
    pub fn k_u_margin(&self, b_w_norm: f64, omega_star: f64, u_d_star: f64) -> f64 {
        self.k_u_norm() - (b_w_norm * omega_star + u_d_star)
    }
}

/// `x_li - x_l0 - i d_l`.
pub fn error_vector(x_i: &Vector, x_0: &Vector, i: usize, d0: &[f64]) -> Result<Vector> {
    if x_i.len() != x_0.len() || d0.len() != x_i.len() {
        return Err(Error::DimensionMismatch("error vector operands disagree in size".into()));
    }
    Ok(Vector::from_fn(x_i.len(), |l, _| x_i[l] - x_0[l] - i as f64 * d0[l]))
}

/// Componentwise `e tanh(ρ e)`.
pub fn sign_weighted(e: &Vector, rho: f64) -> Result<Vector> {
    if !(rho > 1.0) {
        return Err(Error::InvalidConfig(format!("rho must be > 1, got {rho}")));
    }
    Ok(e.map(|v| v * (rho * v).tanh()))
}

pub struct ExogenousInputs<'a> {
    pub f_hat: f64,
    pub f0: f64,
    pub k_u: &'a [f64],
    pub p: &'a Mat,
    pub e_i: &'a Vector,
    pub a_i: &'a Mat,
    pub a_0: &'a Mat,
    pub x_0: &'a Vector,
    pub index: usize,
    pub d0: &'a [f64],
    pub b_f: &'a Vector,
    pub b_f0: &'a Vector,
}

/// `-B_f f̂ + B_f0 f_0 - K_u tanh(P E) - (A_i - A_0) X_0 - i A_i D_0`.
pub fn exogenous_control(inp: &ExogenousInputs<'_>) -> Vector {
    let n = inp.e_i.len();
    let pe = inp.p * inp.e_i;
    let ku = Vector::from_fn(n, |l, _| inp.k_u[l] * pe[l].tanh());
    let d0 = Vector::from_column_slice(inp.d0);
    inp.b_f * -inp.f_hat + inp.b_f0 * inp.f0 - ku - (inp.a_i - inp.a_0) * inp.x_0
        - inp.a_i * d0 * inp.index as f64
}

/// Neighbour errors `E_j` for every `j` with `α_ij = 1`; the leader's error is zero.
/// `errors[j]` is `None` when follower `j`'s packet is missing.
pub fn gather_neighbors(t: &Topology, i: usize, errors: &[Option<Vector>], n: usize) -> Result<Vec<Vector>> {
    t.neighbors(i)?
        .into_iter()
        .map(|j| {
            if j == 0 {
                Ok(Vector::zeros(n))
            } else {
                errors
                    .get(j)
                    .cloned()
                    .flatten()
                    .ok_or_else(|| Error::Protocol(format!("agent {i}: no data from neighbour {j}")))
            }
        })
        .collect()
}

/// Sum over neighbours of `-½ P (E_i - D E_j) - ½ P K_C D Ē_j` with `D = diag(tanh(P E_i))`.
pub fn consensus_vector(p: &Mat, e_i: &Vector, neighbors: &[Vector], k_c: &[f64], rho: f64) -> Result<Vector> {
    let n = e_i.len();
    let d = (p * e_i).map(f64::tanh);
    let mut inner = Vector::zeros(n);
    for e_j in neighbors {
        if e_j.len() != n {
            return Err(Error::DimensionMismatch("neighbour error size".into()));
        }
        let bar = sign_weighted(e_j, rho)?;
        for l in 0..n {
            inner[l] += e_i[l] - d[l] * e_j[l] + k_c[l] * d[l] * bar[l];
        }
    }
    Ok(p * inner * -0.5)
}

/// `(B Bᵀ + ε)⁻¹ ū`.
pub fn regularized_input(m: &SystemMatrices, eps_reg: &[f64], u_bar: &Vector) -> Result<Vector> {
    let mut mat = m.input_outer();
    for (l, e) in eps_reg.iter().enumerate() {
        mat[(l, l)] += e;
    }
    mat.cholesky()
        .map(|c| c.solve(u_bar))
        .ok_or_else(|| Error::InvalidConfig("regularizer must be positive definite".into()))
}

/// Pieces of one evaluation of the control law, kept for the observer and for snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTerms {
    /// Scalar command on the design input channel.
    pub u: f64,
    pub consensus: Vector,
    pub u_hat_d: Vector,
    pub u_bar: Vector,
}

/// `Bᵀ c + Bᵀ û_d + Bᵀ (B Bᵀ + ε)⁻¹ ū`.
pub fn control_nominal(
    m: &SystemMatrices,
    gains: &ControllerGains,
    consensus: Vector,
    u_bar: Vector,
    u_hat_d: Vector,
) -> Result<ControlTerms> {
    let reg = regularized_input(m, &gains.eps_reg, &u_bar)?;
    let u = m.b.dot(&consensus) + m.b.dot(&u_hat_d) + m.b.dot(&reg);
    Ok(ControlTerms {
        u,
        consensus,
        u_hat_d,
        u_bar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputMechanism {
    #[default]
    Hold,
    Zero,
}

impl std::str::FromStr for InputMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hold" => Ok(Self::Hold),
            "zero" => Ok(Self::Zero),
            other => Err(Error::InvalidArgument(format!("mechanism must be hold or zero, got {other}"))),
        }
    }
}

/// `t - last_packet > window · period`.
pub fn detect_dos(last_packet_time: f64, t: f64, period: f64, window: f64) -> Result<bool> {
    if !(period > 0.0) {
        return Err(Error::InvalidArgument("packet period must be positive".into()));
    }
    Ok(t - last_packet_time > window * period)
}

/// Packet watchdog on the integer substep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DosDetector {
    /// Timeout in substeps (window × period / dt).
    timeout: f64,
    last_packet: u64,
    flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    None,
    Onset,
    Release,
}

impl DosDetector {
    pub fn new(substeps_per_packet: u64, window: f64) -> Self {
        Self {
            timeout: window * substeps_per_packet as f64,
            last_packet: 0,
            flag: false,
        }
    }

    pub fn flag(&self) -> bool {
        self.flag
    }

    pub fn last_packet(&self) -> u64 {
        self.last_packet
    }

    /// Called at every substep.
    pub fn poll(&mut self, substep: u64) -> Transition {
        if !self.flag && (substep - self.last_packet) as f64 > self.timeout {
            self.flag = true;
            Transition::Onset
        } else {
            Transition::None
        }
    }

    pub fn packet(&mut self, substep: u64) -> Transition {
        self.last_packet = substep;
        if self.flag {
            self.flag = false;
            Transition::Release
        } else {
            Transition::None
        }
    }
}

/// Snapshot from the last delivered packet, captured when an attack is detected.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldControl {
    /// Time of the packet the snapshot comes from.
    pub t_k: f64,
    pub detected_at: f64,
    pub terms: ControlTerms,
    pub e_i: Vector,
    pub e_o: Vector,
    pub neighbor_errors: Vec<Vector>,
    pub eta_hat: Mat,
}

/// Hold slot: exactly one snapshot per detected attack.
#[derive(Debug, Clone, Default)]
pub struct HoldSlot {
    held: Option<HeldControl>,
}

impl HoldSlot {
    pub fn capture(&mut self, snapshot: HeldControl) -> Result<()> {
        if self.held.is_some() {
            return Err(Error::Invariant("hold captured twice without release".into()));
        }
        self.held = Some(snapshot);
        Ok(())
    }

    pub fn release(&mut self) -> Option<HeldControl> {
        self.held.take()
    }

    pub fn get(&self) -> Option<&HeldControl> {
        self.held.as_ref()
    }
}

/// Controller output under the switching rule: live law when no attack is detected,
/// otherwise the held command (hold) or nothing (zero).
pub fn control_switched(attack: bool, held: Option<&HeldControl>, live: &ControlTerms, mechanism: InputMechanism) -> f64 {
    match (attack, held, mechanism) {
        (false, _, _) => live.u,
        (true, _, InputMechanism::Zero) => 0.0,
        (true, Some(h), InputMechanism::Hold) => h.terms.u,
        (true, None, InputMechanism::Hold) => live.u,
    }
}
