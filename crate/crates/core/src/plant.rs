//! Follower and leader dynamics.
//!
//! Followers are chains of integrators whose last channel carries the input, the
//! unknown nonlinearity and a bounded disturbance. For vehicles the state is
//! `[position, velocity, acceleration]` with a first-order drivetrain lag.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// Air density, kg/m³.
pub const RHO_AIR: f64 = 1.225;
/// Gravitational acceleration, m/s².
pub const GRAVITY: f64 = 9.81;

/// Longitudinal vehicle constants (one column of the platoon parameter table).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Drivetrain time constant, s.
    pub tau: f64,
    /// Mass, kg.
    pub mass: f64,
    /// Aerodynamic drag coefficient.
    pub drag_coeff: f64,
    /// Frontal area, m².
    pub frontal_area: f64,
    /// Rolling resistance coefficient.
    pub rolling_coeff: f64,
    /// Road grade, rad.
    pub grade_angle: f64,
    /// Minimum safe gap, m. Only used by spacing checks.
    pub min_gap: f64,
    /// Headway constant, s. Only used by spacing checks.
    pub headway: f64,
    /// Standstill gap, m.
    pub standstill_gap: f64,
}

impl VehicleParams {
    /// Column `column` of the platoon table: 0 is the leader, 1..=5 the followers.
    pub fn table(column: usize) -> Result<Self> {
        const TAU: [f64; 6] = [0.1, 0.1, 0.3, 0.5, 0.7, 0.9];
        const MASS: [f64; 6] = [1500.0, 1500.0, 2000.0, 2500.0, 3000.0, 3500.0];
        const MIN_GAP: [f64; 6] = [5.0, 5.0, 7.0, 9.0, 11.0, 13.0];
        const HEADWAY: [f64; 6] = [1.2, 1.2, 1.5, 1.8, 2.1, 2.4];
        const AREA: [f64; 6] = [2.2, 2.2, 4.2, 6.2, 8.2, 10.2];
        const DRAG: [f64; 6] = [0.35, 0.35, 0.4, 0.45, 0.5, 0.55];
        const ROLL: [f64; 6] = [0.02, 0.02, 0.04, 0.06, 0.08, 0.1];
        if column > 5 {
            return Err(Error::InvalidArgument(format!(
                "parameter table has columns 0..=5, got {column}"
            )));
        }
        Ok(Self {
            tau: TAU[column],
            mass: MASS[column],
            drag_coeff: DRAG[column],
            frontal_area: AREA[column],
            rolling_coeff: ROLL[column],
            grade_angle: 30f64.to_radians(),
            min_gap: MIN_GAP[column],
            headway: HEADWAY[column],
            standstill_gap: 7.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentModel {
    /// Integrator chain with last-row coefficient `a` and input gain `b`; no nonlinearity.
    Generic { a: f64, b: f64 },
    Vehicle(VehicleParams),
}

/// Known bounds a designer supplies for one follower.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    /// Disturbance bound ω*.
    pub omega_star: f64,
    /// Weight-norm bound η*.
    pub eta_star: f64,
    /// Weight-error bound ε*.
    pub eps_star: f64,
    /// Virtual-disturbance bound σ_d*.
    pub sigma_d_star: f64,
    /// Observer residual bound u_d*.
    pub u_d_star: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            omega_star: 0.5,
            eta_star: 50.0,
            eps_star: 10.0,
            sigma_d_star: 300.0,
            u_d_star: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub index: usize,
    pub model: AgentModel,
    #[serde(default)]
    pub bounds: Bounds,
}

impl AgentParams {
    pub fn vehicle(index: usize, vehicle: VehicleParams) -> Self {
        Self {
            index,
            model: AgentModel::Vehicle(vehicle),
            bounds: Bounds::default(),
        }
    }

    pub fn table_vehicle(index: usize) -> Result<Self> {
        Ok(Self::vehicle(index, VehicleParams::table(index)?))
    }

    pub fn vehicle_params(&self) -> Option<&VehicleParams> {
        match &self.model {
            AgentModel::Vehicle(v) => Some(v),
            AgentModel::Generic { .. } => None,
        }
    }

    pub fn check(&self) -> Result<()> {
        let b = &self.bounds;
        let positive = [
            ("omega_star", b.omega_star),
            ("eta_star", b.eta_star),
            ("eps_star", b.eps_star),
            ("sigma_d_star", b.sigma_d_star),
            ("u_d_star", b.u_d_star),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "agent {}: {name} must be positive, got {v}",
                    self.index
                )));
            }
        }
        match &self.model {
            AgentModel::Vehicle(v) if !(v.tau > 0.0 && v.mass > 0.0) => {
                Err(Error::InvalidConfig(format!(
                    "agent {}: tau and mass must be positive",
                    self.index
                )))
            }
            AgentModel::Generic { b, .. } if *b == 0.0 => Err(Error::InvalidConfig(format!(
                "agent {}: input gain b must be nonzero",
                self.index
            ))),
            _ => Ok(()),
        }
    }
}

/// `A`, `B`, `B_f`, `B_w`, `C` of the concise state-space form.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: Mat,
    pub b: Vector,
    pub b_f: Vector,
    pub b_w: Vector,
    pub c: Mat,
}

impl SystemMatrices {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Integrator chain with `last_coeff` in the bottom-right corner and `input_gain` on the last channel.
    pub fn chain(n: usize, last_coeff: f64, input_gain: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("state dimension must be >= 2, got {n}")));
        }
        let mut a = Mat::zeros(n, n);
        for l in 0..n - 1 {
            a[(l, l + 1)] = 1.0;
        }
        a[(n - 1, n - 1)] = last_coeff;
        let mut b = Vector::zeros(n);
        b[n - 1] = input_gain;
        let mut unit = Vector::zeros(n);
        unit[n - 1] = 1.0;
        Ok(Self {
            a,
            b,
            b_f: unit.clone(),
            b_w: unit,
            c: Mat::identity(n, n),
        })
    }

    /// Copy with the input column rescaled to a unit vector, plus the factor that maps a
    /// command on the unit channel back to the physical input (`u_phys = scale * u_cmd`).
    pub fn with_unit_input(&self) -> (Self, f64) {
        let n = self.dim();
        let gain = self.b[n - 1];
        let mut m = self.clone();
        m.b = Vector::zeros(n);
        m.b[n - 1] = 1.0;
        (m, 1.0 / gain)
    }

    /// B Bᵀ.
    pub fn input_outer(&self) -> Mat {
        &self.b * self.b.transpose()
    }
}

pub fn build_matrices(p: &AgentParams, n: usize) -> Result<SystemMatrices> {
    match &p.model {
        AgentModel::Generic { a, b } => SystemMatrices::chain(n, *a, *b),
        AgentModel::Vehicle(v) => {
            if n != 3 {
                return Err(Error::InvalidArgument(format!(
                    "vehicle model has 3 states, got n = {n}"
                )));
            }
            SystemMatrices::chain(3, -1.0 / v.tau, 1.0 / (v.mass * v.tau))
        }
    }
}

/// Resistance acting on the last channel: drag, rolling and grade, divided by mass.
/// Drag uses `v|v|` so it always opposes motion. Generic agents carry no nonlinearity.
pub fn true_nonlinearity(p: &AgentParams, x: &Vector) -> f64 {
    match &p.model {
        AgentModel::Generic { .. } => 0.0,
        AgentModel::Vehicle(veh) => {
            let v = x[1];
            let drag = 0.5 * RHO_AIR * veh.drag_coeff * veh.frontal_area * v * v.abs();
            let rolling = veh.mass * GRAVITY * veh.rolling_coeff * veh.grade_angle.cos();
            let grade = veh.mass * GRAVITY * veh.grade_angle.sin();
            -(drag + rolling + grade) / veh.mass
        }
    }
}

/// `A X + B u + B_f f + B_w w` with the nonlinearity value `f` supplied by the caller.
pub fn follower_derivative(m: &SystemMatrices, x: &Vector, u: f64, f: f64, w: f64) -> Result<Vector> {
    if x.len() != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} entries, model has {}",
            x.len(),
            m.dim()
        )));
    }
    Ok(&m.a * x + &m.b * u + &m.b_f * f + &m.b_w * w)
}

/// Piecewise-linear leader speed, held constant after the last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct SpeedProfile {
    points: Vec<[f64; 2]>,
    /// Distance travelled at each breakpoint.
    cum_position: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

impl SpeedProfile {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("speed profile needs at least one point".into()));
        }
        if points[0][0] != 0.0 {
            return Err(Error::InvalidConfig("speed profile must start at t = 0".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("speed profile has non-finite entries".into()));
        }
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::InvalidConfig(
                "speed profile times must be strictly increasing".into(),
            ));
        }
        let mut cum_position = vec![0.0];
        for w in points.windows(2) {
            let dt = w[1][0] - w[0][0];
            let last = *cum_position.last().unwrap_or(&0.0);
            cum_position.push(last + 0.5 * (w[0][1] + w[1][1]) * dt);
        }
        Ok(Self {
            points,
            cum_position,
        })
    }

    /// 0 → 20 m/s over 10 s, cruise until 15 s, slow to 10 m/s by 20 s, cruise.
    pub fn default_platoon() -> Self {
        Self::new(vec![[0.0, 0.0], [10.0, 20.0], [15.0, 20.0], [20.0, 10.0]])
            .expect("default profile is well formed")
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Right-continuous acceleration; position measured from the start.
    pub fn sample(&self, t: f64) -> ProfileSample {
        let t = t.max(0.0);
        let seg = self.points.partition_point(|p| p[0] <= t) - 1;
        let [t0, v0] = self.points[seg];
        let p0 = self.cum_position[seg];
        match self.points.get(seg + 1) {
            Some(&[t1, v1]) => {
                let slope = (v1 - v0) / (t1 - t0);
                let s = t - t0;
                ProfileSample {
                    position: p0 + v0 * s + 0.5 * slope * s * s,
                    velocity: v0 + slope * s,
                    acceleration: slope,
                }
            }
            None => ProfileSample {
                position: p0 + v0 * (t - t0),
                velocity: v0,
                acceleration: 0.0,
            },
        }
    }

    /// Largest minus smallest segment acceleration (zero included for the final cruise).
    pub fn acceleration_span(&self) -> f64 {
        let slopes = self
            .points
            .windows(2)
            .map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]))
            .chain(std::iter::once(0.0));
        let (lo, hi) = slopes.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| {
            (lo.min(a), hi.max(a))
        });
        hi - lo
    }
}

impl TryFrom<Vec<[f64; 2]>> for SpeedProfile {
    type Error = Error;

    fn try_from(points: Vec<[f64; 2]>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<SpeedProfile> for Vec<[f64; 2]> {
    fn from(p: SpeedProfile) -> Self {
        p.points
    }
}

/// `(velocity, acceleration)` of the profile at `t`.
pub fn leader_profile(profile: &SpeedProfile, t: f64) -> (f64, f64) {
    let s = profile.sample(t);
    (s.velocity, s.acceleration)
}

/// Command-generator leader. Its state is evaluated in closed form from the speed
/// profile, and `f_0` is the input that makes the chain reproduce that profile.
#[derive(Debug, Clone)]
pub struct LeaderModel {
    pub matrices: SystemMatrices,
    pub profile: SpeedProfile,
    pub start_position: f64,
    /// Bound on |f_0(X_0(t_k)) - f_0(X_0(t))|.
    pub eps0: f64,
}

impl LeaderModel {
    pub fn new(n: usize, last_coeff: f64, profile: SpeedProfile, start_position: f64) -> Result<Self> {
        let matrices = SystemMatrices::chain(n, last_coeff, 0.0)?;
        let eps0 = if n >= 3 {
            profile.acceleration_span() * last_coeff.abs()
        } else {
            profile.acceleration_span() + last_coeff.abs() * max_speed(&profile)
        };
        Ok(Self {
            matrices,
            profile,
            start_position,
            eps0,
        })
    }

    pub fn vehicle(tau: f64, profile: SpeedProfile, start_position: f64) -> Result<Self> {
        if tau <= 0.0 {
            return Err(Error::InvalidConfig("leader tau must be positive".into()));
        }
        Self::new(3, -1.0 / tau, profile, start_position)
    }

    pub fn dim(&self) -> usize {
        self.matrices.dim()
    }

    pub fn state(&self, t: f64) -> Vector {
        let s = self.profile.sample(t);
        let n = self.dim();
        let mut x = Vector::zeros(n);
        let kin = [self.start_position + s.position, s.velocity, s.acceleration];
        for (l, v) in kin.iter().take(n).enumerate() {
            x[l] = *v;
        }
        x
    }

    /// Exosystem input. For `n >= 3` this depends on the state only (`-a_0 x_3` with a
    /// constant-acceleration profile segment); for `n = 2` it carries the profile slope.
    pub fn f0(&self, t: f64, x0: &Vector) -> f64 {
        let n = self.dim();
        let target = if n == 2 {
            self.profile.sample(t).acceleration
        } else {
            0.0
        };
        let drift = (self.matrices.a.row(n - 1) * x0)[0];
        target - drift
    }

    pub fn derivative(&self, t: f64, x0: &Vector) -> Vector {
        leader_derivative(&self.matrices, x0, self.f0(t, x0))
    }
}

fn max_speed(p: &SpeedProfile) -> f64 {
    p.points().iter().map(|q| q[1].abs()).fold(0.0, f64::max)
}

/// `A_0 X_0 + B_f0 f_0`.
pub fn leader_derivative(m: &SystemMatrices, x0: &Vector, f0: f64) -> Vector {
    &m.a * x0 + &m.b_f * f0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceKind {
    /// `fraction · ω* · sin(frequency · t + index)`.
    Sinusoid { fraction: f64, frequency: f64 },
    /// Sum of seeded random sinusoids below `bandwidth` rad/s, scaled to `fraction · ω*`.
    FilteredNoise {
        fraction: f64,
        bandwidth: f64,
        components: usize,
    },
    Zero,
}

impl Default for DisturbanceKind {
    fn default() -> Self {
        Self::Sinusoid {
            fraction: 0.8,
            frequency: 0.5,
        }
    }
}

/// Disturbance source for one follower; every sample is clamped to `[-ω*, ω*]`.
#[derive(Debug, Clone)]
pub struct Disturbance {
    bound: f64,
    phase: f64,
    kind: DisturbanceKind,
    components: Vec<(f64, f64, f64)>,
}

impl Disturbance {
    pub fn new(kind: DisturbanceKind, bound: f64, agent_index: usize, seed: u64) -> Self {
        let mut components = Vec::new();
        if let DisturbanceKind::FilteredNoise {
            fraction,
            bandwidth,
            components: count,
        } = &kind
        {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (agent_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let count = (*count).max(1);
            let amp = fraction * bound / count as f64;
            for _ in 0..count {
                let freq = rng.random_range(0.0..*bandwidth);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                components.push((amp, freq, phase));
            }
        }
        Self {
            bound,
            phase: agent_index as f64,
            kind,
            components,
        }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn sample(&self, t: f64) -> f64 {
        let raw = match &self.kind {
            DisturbanceKind::Sinusoid {
                fraction,
                frequency,
            } => fraction * self.bound * (frequency * t + self.phase).sin(),
            DisturbanceKind::FilteredNoise { .. } => self
                .components
                .iter()
                .map(|(a, w, p)| a * (w * t + p).sin())
                .sum(),
            DisturbanceKind::Zero => 0.0,
        };
        raw.clamp(-self.bound, self.bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn flat_vehicle() -> AgentParams {
        AgentParams::vehicle(
            1,
            VehicleParams {
                drag_coeff: 0.0,
                rolling_coeff: 0.0,
                grade_angle: 0.0,
                ..VehicleParams::table(1).unwrap()
            },
        )
    }

    #[test]
    fn vehicle_matrices() {
        let m = build_matrices(&AgentParams::table_vehicle(1).unwrap(), 3).unwrap();
        assert_eq!(m.a.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, -10.0]);
        assert_relative_eq!(m.b[2], 1.0 / 150.0, epsilon = 1e-15);
        assert_eq!(m.b[0], 0.0);
        assert_eq!(m.b[1], 0.0);
        assert_eq!(m.c, Mat::identity(3, 3));
    }

    #[test]
    fn double_integrator() {
        let p = AgentParams {
            index: 1,
            model: AgentModel::Generic { a: 0.0, b: 1.0 },
            bounds: Bounds::default(),
        };
        let m = build_matrices(&p, 2).unwrap();
        assert_eq!(m.a, Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert_eq!(m.b, Vector::from_vec(vec![0.0, 1.0]));
        assert!(build_matrices(&p, 1).is_err());
        assert!(build_matrices(&AgentParams::table_vehicle(2).unwrap(), 4).is_err());
    }

    #[test]
    fn sparsity_pattern() {
        for n in 2..7 {
            let m = SystemMatrices::chain(n, -0.3, 2.0).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let expected = if j == i + 1 {
                        1.0
                    } else if i == n - 1 && j == n - 1 {
                        -0.3
                    } else {
                        0.0
                    };
                    assert_eq!(m.a[(i, j)], expected);
                }
                let last = if i == n - 1 { 1.0 } else { 0.0 };
                assert_eq!(m.b_f[i], last);
                assert_eq!(m.b_w[i], last);
            }
        }
    }

    #[test]
    fn nonlinearity_vanishes_on_flat_road_at_rest() {
        let p = flat_vehicle();
        assert_eq!(true_nonlinearity(&p, &Vector::from_vec(vec![0.0, 0.0, 0.0])), 0.0);
    }

    #[test]
    fn nonlinearity_vehicle_one_at_20() {
        // Hand arithmetic: drag = 0.5*1.225*0.35*2.2*400 = 188.65 N,
        // rolling = 1500*9.81*0.02*cos30° = 254.8744... N, grade = 1500*9.81*0.5 = 7357.5 N.
        let drag = 188.65;
        let rolling = 294.3 * 0.866_025_403_784_438_6;
        let grade = 7357.5;
        let expected = -(drag + rolling + grade) / 1500.0;
        let p = AgentParams::table_vehicle(1).unwrap();
        let got = true_nonlinearity(&p, &Vector::from_vec(vec![0.0, 20.0, 0.0]));
        assert_relative_eq!(got, expected, epsilon = 1e-12);
        assert_relative_eq!(got, -5.200_680_851, epsilon = 1e-8);
    }

    #[test]
    fn drag_is_quadratic() {
        let p = AgentParams::table_vehicle(3).unwrap();
        let base = true_nonlinearity(&p, &Vector::from_vec(vec![0.0, 0.0, 0.0]));
        let d1 = true_nonlinearity(&p, &Vector::from_vec(vec![0.0, 7.0, 0.0])) - base;
        let d2 = true_nonlinearity(&p, &Vector::from_vec(vec![0.0, 14.0, 0.0])) - base;
        assert_relative_eq!(d2, 4.0 * d1, epsilon = 1e-12);
    }

    #[test]
    fn follower_derivative_examples() {
        let chain = SystemMatrices::chain(3, 0.0, 1.0).unwrap();
        let d = follower_derivative(&chain, &Vector::from_vec(vec![1.0, 2.0, 3.0]), 0.0, 0.0, 0.0).unwrap();
        assert_eq!(d, Vector::from_vec(vec![2.0, 3.0, 0.0]));

        let veh = build_matrices(&flat_vehicle(), 3).unwrap();
        let x = Vector::from_vec(vec![0.0, 10.0, 0.0]);
        let d = follower_derivative(&veh, &x, 150.0, 0.0, 0.0).unwrap();
        // 150 / (1500 * 0.1) = 1
        assert_relative_eq!(d[0], 10.0);
        assert_relative_eq!(d[1], 0.0);
        assert_relative_eq!(d[2], 1.0, epsilon = 1e-14);

        let omega = 0.37;
        let with_w = follower_derivative(&veh, &x, 0.0, 0.0, omega).unwrap();
        let without = follower_derivative(&veh, &x, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(with_w[2] - without[2], omega);

        assert!(follower_derivative(&veh, &Vector::zeros(2), 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn leader_derivative_examples() {
        let chain = SystemMatrices::chain(3, 0.0, 0.0).unwrap();
        let d = leader_derivative(&chain, &Vector::from_vec(vec![0.0, 5.0, 0.0]), 0.0);
        assert_eq!(d, Vector::from_vec(vec![5.0, 0.0, 0.0]));
        assert_eq!(leader_derivative(&chain, &Vector::zeros(3), 0.0), Vector::zeros(3));
    }

    #[test]
    fn leader_follows_profile() {
        let leader = LeaderModel::vehicle(0.1, SpeedProfile::default_platoon(), 0.0).unwrap();
        for &t in &[0.5, 3.0, 12.0, 17.5, 22.0] {
            let x0 = leader.state(t);
            let d = leader.derivative(t, &x0);
            let (v, a) = leader_profile(&leader.profile, t);
            // Profile lookup is the oracle.
            assert_relative_eq!(d[0], v, epsilon = 1e-12);
            assert_relative_eq!(d[1], a, epsilon = 1e-12);
            assert_relative_eq!(d[2], 0.0, epsilon = 1e-12);
        }
        // acceleration span 2 - (-2) = 4, times 1/tau
        assert_relative_eq!(leader.eps0, 40.0, epsilon = 1e-12);
    }

    #[test]
    fn profile_examples() {
        let p = SpeedProfile::default_platoon();
        assert_eq!(leader_profile(&p, 0.0).0, 0.0);
        assert_eq!(leader_profile(&p, 12.0), (20.0, 0.0));
        assert_eq!(leader_profile(&p, 30.0), (10.0, 0.0));
        // position: 100 m on the ramp, 100 m cruising, 75 m on the slowdown
        assert_relative_eq!(p.sample(10.0).position, 100.0);
        assert_relative_eq!(p.sample(20.0).position, 275.0);
        assert!(SpeedProfile::new(vec![[1.0, 0.0]]).is_err());
        assert!(SpeedProfile::new(vec![[0.0, 0.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn disturbance_default_formula() {
        let d = Disturbance::new(DisturbanceKind::default(), 0.5, 2, 0);
        assert_relative_eq!(d.sample(1.0), 0.8 * 0.5 * (0.5f64 + 2.0).sin());
    }

    proptest! {
        #[test]
        fn profile_is_continuous(
            steps in proptest::collection::vec((0.1f64..5.0, -30.0f64..30.0), 1..8),
            probe in 0usize..8,
        ) {
            let mut pts = vec![[0.0, 0.0]];
            let mut t = 0.0;
            for (dt, v) in &steps {
                t += dt;
                pts.push([t, *v]);
            }
            let p = SpeedProfile::new(pts.clone()).unwrap();
            let tb = pts[probe.min(pts.len() - 1)][0];
            let eps = 1e-9;
            let left = p.sample((tb - eps).max(0.0));
            let right = p.sample(tb + eps);
            prop_assert!((left.velocity - right.velocity).abs() < 1e-6);
            prop_assert!((left.position - right.position).abs() < 1e-6);
        }

        #[test]
        fn disturbance_never_exceeds_bound(
            seed in any::<u64>(), t in 0.0f64..1000.0, bound in 0.01f64..10.0, idx in 1usize..10,
        ) {
            for kind in [
                DisturbanceKind::default(),
                DisturbanceKind::Sinusoid { fraction: 3.0, frequency: 2.0 },
                DisturbanceKind::FilteredNoise { fraction: 2.5, bandwidth: 3.0, components: 4 },
                DisturbanceKind::Zero,
            ] {
                let d = Disturbance::new(kind, bound, idx, seed);
                prop_assert!(d.sample(t).abs() <= bound);
            }
        }

        #[test]
        fn nonlinearity_finite(v in -1e6f64..1e6) {
            let p = AgentParams::table_vehicle(5).unwrap();
            prop_assert!(true_nonlinearity(&p, &Vector::from_vec(vec![0.0, v, 0.0])).is_finite());
        }
    }
}
