//! Denial-of-service schedules on the controller links, their frequency/energy contract,
//! and the tolerable-interval quantities used to bound the error drift during an attack.
//!
//! Schedules live on the packet grid: an interval `[start, end)` blocks every packet whose
//! tick falls inside it. All constraint arithmetic is done in integer ticks.
//!
//! Frequency: `n(τ, t) <= n0 + (t - τ)/τ_D`, where `n` counts attack onsets in `[τ, t)`.
//! Energy: `|Ξ(τ, t)| <= κ + (t - τ)/T`. With `κ = 0` and `T >= 2` no non-empty schedule
//! satisfies the energy bound, so an offset `κ` (a multiple of the packet period) is allowed.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosParams {
    /// Attack onsets allowed in a window of zero length.
    pub n0: u32,
    /// Dwell between onsets, s; a multiple of the packet period.
    pub tau_d: f64,
    /// Energy denominator T >= 1.
    pub t_energy: u32,
    /// Energy offset κ, s; a multiple of the packet period.
    #[serde(default)]
    pub kappa: f64,
    pub packet_period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetIntervals {
    pub agent: usize,
    /// `[start, end)` pairs in seconds.
    pub intervals: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DosSchedule {
    #[serde(flatten)]
    pub params: DosParams,
    #[serde(default)]
    pub seed: u64,
    pub targets: Vec<TargetIntervals>,
}

/// Integer view of the constraint parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickParams {
    pub n0: u64,
    pub tau_d: u64,
    pub t_energy: u64,
    pub kappa: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Frequency,
    Energy,
    Structure,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bound::Frequency => "frequency",
            Bound::Energy => "energy",
            Bound::Structure => "structure",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleViolation {
    pub agent: usize,
    pub tau: f64,
    pub t: f64,
    pub bound: Bound,
    pub detail: String,
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} bound violated for agent {} on [{}, {}): {}",
            self.bound, self.agent, self.tau, self.t, self.detail
        )
    }
}

fn to_ticks(value: f64, period: f64, what: &str) -> Result<u64> {
    let q = value / period;
    let r = q.round();
    if !(value >= 0.0) || !q.is_finite() || (q - r).abs() > 1e-6 * r.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "{what} = {value} s is not a nonnegative multiple of the packet period {period} s"
        )));
    }
    Ok(r as u64)
}

impl DosParams {
    pub fn check(&self) -> Result<TickParams> {
        if !(self.packet_period > 0.0 && self.packet_period.is_finite()) {
            return Err(Error::InvalidConfig("packet period must be positive".into()));
        }
        if self.t_energy < 1 {
            return Err(Error::InvalidConfig("T must be at least 1".into()));
        }
        let tau_d = to_ticks(self.tau_d, self.packet_period, "tau_d")?;
        if tau_d == 0 {
            return Err(Error::InvalidConfig("tau_d must be positive".into()));
        }
        Ok(TickParams {
            n0: u64::from(self.n0),
            tau_d,
            t_energy: u64::from(self.t_energy),
            kappa: to_ticks(self.kappa, self.packet_period, "kappa")?,
        })
    }
}

impl DosSchedule {
    pub fn empty(params: DosParams) -> Self {
        Self {
            params,
            seed: 0,
            targets: Vec::new(),
        }
    }

    /// Tick intervals of `agent`, empty when the agent is not targeted.
    pub fn tick_intervals(&self, agent: usize) -> Result<Vec<(u64, u64)>> {
        let h = self.params.packet_period;
        let mut out = Vec::new();
        for t in self.targets.iter().filter(|t| t.agent == agent) {
            for [s, e] in &t.intervals {
                out.push((to_ticks(*s, h, "interval start")?, to_ticks(*e, h, "interval end")?));
            }
        }
        Ok(out)
    }

    pub fn agents(&self) -> Vec<usize> {
        let mut a: Vec<usize> = self.targets.iter().map(|t| t.agent).collect();
        a.sort_unstable();
        a.dedup();
        a
    }

    /// Whether the packet at `tick` is blocked for `agent`.
    pub fn blocks(&self, agent: usize, tick: u64) -> Result<bool> {
        Ok(self
            .tick_intervals(agent)?
            .iter()
            .any(|&(s, e)| s <= tick && tick < e))
    }

    pub fn is_empty(&self) -> bool {
        self.targets.iter().all(|t| t.intervals.is_empty())
    }
}

/// Checks the structure, every critical window, and `probes` random grid windows per agent.
pub fn validate_schedule(s: &DosSchedule, probes: usize) -> Result<std::result::Result<(), ScheduleViolation>> {
    let tp = s.params.check()?;
    let h = s.params.packet_period;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed);
    for agent in s.agents() {
        let iv = s.tick_intervals(agent)?;
        if let Some(v) = check_ticks(&iv, &tp) {
            return Ok(Err(v.into_violation(agent, h)));
        }
        if let Some(v) = probe_ticks(&iv, &tp, probes, &mut rng) {
            return Ok(Err(v.into_violation(agent, h)));
        }
    }
    Ok(Ok(()))
}

#[derive(Debug)]
struct TickViolation {
    tau: u64,
    t: u64,
    bound: Bound,
    detail: String,
}

impl TickViolation {
    fn into_violation(self, agent: usize, h: f64) -> ScheduleViolation {
        ScheduleViolation {
            agent,
            tau: self.tau as f64 * h,
            t: self.t as f64 * h,
            bound: self.bound,
            detail: self.detail,
        }
    }
}

/// Exhaustive check over onset pairs (frequency) and onset/end pairs (energy).
fn check_ticks(iv: &[(u64, u64)], tp: &TickParams) -> Option<TickViolation> {
    for (k, &(s, e)) in iv.iter().enumerate() {
        if s >= e {
            return Some(TickViolation { tau: s, t: e, bound: Bound::Structure, detail: "empty or reversed interval".into() });
        }
        if k > 0 && iv[k - 1].1 > s {
            return Some(TickViolation { tau: iv[k - 1].0, t: e, bound: Bound::Structure, detail: "intervals overlap or are unsorted".into() });
        }
    }
    let t = u128::from(tp.t_energy);
    for a in 0..iv.len() {
        let mut measure: u128 = 0;
        for b in a..iv.len() {
            let count = (b - a + 1) as u128;
            let span = u128::from(iv[b].0 - iv[a].0);
            if count > u128::from(tp.n0) && (count - u128::from(tp.n0)) * u128::from(tp.tau_d) > span {
                return Some(TickViolation {
                    tau: iv[a].0,
                    t: iv[b].0 + 1,
                    bound: Bound::Frequency,
                    detail: format!("{count} onsets with n0 = {} and dwell {} ticks over {span} ticks", tp.n0, tp.tau_d),
                });
            }
            measure += u128::from(iv[b].1 - iv[b].0);
            let len = u128::from(iv[b].1 - iv[a].0);
            if t * measure > t * u128::from(tp.kappa) + len {
                return Some(TickViolation {
                    tau: iv[a].0,
                    t: iv[b].1,
                    bound: Bound::Energy,
                    detail: format!("{measure} attacked ticks over {len} ticks with T = {}", tp.t_energy),
                });
            }
        }
    }
    None
}

/// Direct count/measure on random windows, independent of the pairwise reasoning.
fn probe_ticks(iv: &[(u64, u64)], tp: &TickParams, probes: usize, rng: &mut ChaCha8Rng) -> Option<TickViolation> {
    let horizon = iv.last().map_or(1, |x| x.1) + tp.tau_d.min(1_000_000);
    for _ in 0..probes {
        let tau = rng.random_range(0..=horizon);
        let t = rng.random_range(tau..=horizon);
        if let Some(v) = window_check(iv, tp, tau, t) {
            return Some(v);
        }
    }
    None
}

/// Both bounds on the single window `[tau, t)`.
fn window_check(iv: &[(u64, u64)], tp: &TickParams, tau: u64, t: u64) -> Option<TickViolation> {
    let n = iv.iter().filter(|&&(s, _)| tau <= s && s < t).count() as u128;
    let measure: u128 = iv
        .iter()
        .map(|&(s, e)| u128::from(e.min(t).saturating_sub(s.max(tau))))
        .sum();
    let len = u128::from(t - tau);
    if n > u128::from(tp.n0) && (n - u128::from(tp.n0)) * u128::from(tp.tau_d) > len {
        return Some(TickViolation { tau, t, bound: Bound::Frequency, detail: format!("{n} onsets in {len} ticks") });
    }
    let tt = u128::from(tp.t_energy);
    if tt * measure > tt * u128::from(tp.kappa) + len {
        return Some(TickViolation { tau, t, bound: Bound::Energy, detail: format!("{measure} attacked ticks in {len} ticks") });
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    #[serde(flatten)]
    pub params: DosParams,
    pub horizon: f64,
    pub seed: u64,
    /// Mean fraction of each attack period spent attacking.
    pub duty: f64,
    /// Mean length of one on/off cycle, s.
    pub mean_period: f64,
    /// Earliest onset, s.
    #[serde(default)]
    pub start_after: f64,
    /// Longest single burst, s (unbounded when absent).
    #[serde(default)]
    pub max_burst: Option<f64>,
    pub targets: Vec<usize>,
}

/// Random rectangular wave per target, built burst by burst so that every prefix satisfies
/// both bounds; the result is then re-validated.
pub fn generate_schedule(cfg: &GeneratorConfig) -> Result<DosSchedule> {
    let tp = cfg.params.check()?;
    let h = cfg.params.packet_period;
    if !(cfg.horizon > 0.0) {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    if !(cfg.duty >= 0.0 && cfg.duty <= 1.0) {
        return Err(Error::InvalidArgument(format!("duty must lie in [0, 1], got {}", cfg.duty)));
    }
    if cfg.duty > 1.0 / f64::from(cfg.params.t_energy) {
        return Err(Error::InfeasibleSchedule(format!(
            "mean duty {} exceeds the long-run energy limit 1/T = {}",
            cfg.duty,
            1.0 / f64::from(cfg.params.t_energy)
        )));
    }
    if !(cfg.mean_period > 0.0) {
        return Err(Error::InvalidArgument("mean_period must be positive".into()));
    }
    let horizon = (cfg.horizon / h).floor() as u64;
    let period = ((cfg.mean_period / h).round() as u64).max(2);
    let start_after = (cfg.start_after.max(0.0) / h).round() as u64;
    let max_burst = cfg.max_burst.map_or(u64::MAX, |b| ((b / h).floor() as u64).max(1));

    let mut targets = Vec::new();
    for &agent in &cfg.targets {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ agent as u64);
        let iv = generate_ticks(&tp, horizon, period, cfg.duty, start_after, max_burst, &mut rng);
        targets.push(TargetIntervals {
            agent,
            intervals: iv.iter().map(|&(s, e)| [s as f64 * h, e as f64 * h]).collect(),
        });
    }
    let schedule = DosSchedule {
        params: cfg.params.clone(),
        seed: cfg.seed,
        targets,
    };
    match validate_schedule(&schedule, 256)? {
        Ok(()) => Ok(schedule),
        Err(v) => Err(Error::Invariant(format!("generated schedule failed validation: {v}"))),
    }
}

fn generate_ticks(
    tp: &TickParams,
    horizon: u64,
    period: u64,
    duty: f64,
    start_after: u64,
    max_burst: u64,
    rng: &mut ChaCha8Rng,
) -> Vec<(u64, u64)> {
    let mut iv: Vec<(u64, u64)> = Vec::new();
    if tp.n0 == 0 || duty == 0.0 {
        return iv;
    }
    let t = tp.t_energy;
    let first_gap = (rng.random_range(0.0..1.0) * period as f64) as u64;
    let mut s = start_after + first_gap;
    while s < horizon {
        let p = ((period as f64) * rng.random_range(0.5..1.5)).round().max(2.0) as u64;
        let d = (duty * rng.random_range(0.0..2.0)).clamp(0.0, 1.0);
        let want = ((p as f64 * d).round() as u64).clamp(1, max_burst);
        let gap = p.saturating_sub(want).max(1);

        // earliest onset allowed by the frequency bound
        let b = iv.len();
        for (a, &(sa, _)) in iv.iter().enumerate() {
            let count = (b - a + 1) as u64;
            if count > tp.n0 {
                s = s.max(sa + (count - tp.n0) * tp.tau_d);
            }
        }
        if s >= horizon {
            break;
        }
        // longest burst allowed by the energy bound: L (T - 1) <= Tκ + s - s_a - T·measure_a
        let mut l_max = horizon - s;
        let mut suffix: u64 = 0;
        let mut blocked_until = None;
        for a in (0..=b).rev() {
            let sa = if a == b { s } else { iv[a].0 };
            if a < b {
                suffix += iv[a].1 - iv[a].0;
            }
            if t > 1 {
                let budget = (t * tp.kappa + (s - sa)) as i128 - (t * suffix) as i128;
                if budget < (t - 1) as i128 {
                    // even one tick is too much; wait until s - s_a grows enough
                    let need = (t * suffix + (t - 1)) as i128 - (t * tp.kappa) as i128 + sa as i128;
                    blocked_until = Some(blocked_until.unwrap_or(0).max(need as u64));
                } else {
                    l_max = l_max.min((budget / (t - 1) as i128) as u64);
                }
            }
        }
        if let Some(next) = blocked_until {
            if tp.kappa == 0 && t > 1 {
                break;
            }
            s = next.max(s + 1);
            continue;
        }
        let len = want.min(l_max);
        if len == 0 {
            s += gap;
            continue;
        }
        iv.push((s, s + len));
        s += len + gap;
    }
    iv
}

/// `(1/‖A‖) ln(1 + γ‖A‖)`, with the limit `γ` at `‖A‖ = 0`.
pub fn max_tolerable_interval(a_norm: f64, gamma: f64) -> Result<f64> {
    if !(a_norm >= 0.0) || !(gamma >= 0.0) {
        return Err(Error::InvalidArgument("norm and gamma must be nonnegative".into()));
    }
    if a_norm == 0.0 {
        return Ok(gamma);
    }
    Ok((gamma * a_norm).ln_1p() / a_norm)
}

/// Operands of the drift bound δ_1k, all taken at the snapshot.
pub struct Delta1kInputs<'a> {
    pub b_w: &'a Vector,
    pub omega_star: f64,
    pub a: &'a Mat,
    pub e_k: &'a Vector,
    pub p: &'a Mat,
    /// B Bᵀ (design input).
    pub bbt: &'a Mat,
    pub k_c: &'a [f64],
    /// E_j(k) for every neighbour (zeros for the leader).
    pub neighbor_errors: &'a [Vector],
    pub k_u_norm: f64,
    pub u_hat_d_k: &'a Vector,
    pub sigma_d_star: f64,
    pub b_f: &'a Vector,
    pub eps_star: f64,
    /// Frobenius norm of the weights at the snapshot.
    pub eta_hat_k_norm: f64,
    pub b_f0: &'a Vector,
    pub eps0: f64,
}

/// Sum of norms bounding the error derivative while the input is held.
pub fn delta_1k(d: &Delta1kInputs<'_>) -> f64 {
    let bbt_p = linalg::spectral_norm(&(d.bbt * d.p));
    let pe = d.p * d.e_k;
    let tanh_pe = pe.map(f64::tanh);
    let diag_norm = tanh_pe.amax();
    let i_minus_kc = d.k_c.iter().fold(0.0f64, |m, k| m.max((1.0 - k).abs()));
    let alpha = d.neighbor_errors.len() as f64;
    let neigh: f64 = d.neighbor_errors.iter().map(|e| e.norm()).sum();
    d.b_w.norm() * d.omega_star
        + (d.a * d.e_k).norm()
        + 0.5 * alpha * bbt_p * d.e_k.norm()
        + 0.5 * bbt_p * diag_norm * i_minus_kc * neigh
        + d.k_u_norm * tanh_pe.norm()
        + linalg::spectral_norm(d.bbt) * d.u_hat_d_k.norm()
        + d.sigma_d_star
        + d.b_f.norm() * d.eps_star
        + 2.0 * d.b_f.norm() * d.eta_hat_k_norm
        + d.b_f0.norm() * d.eps0
}

/// `ζ / (δ ‖P G P‖)`; infinite (with a warning) when the denominator vanishes.
pub fn gamma_1i(zeta: f64, delta: f64, p: &Mat, g: &Mat) -> f64 {
    let norm = linalg::spectral_norm(&(p * g * p));
    let den = delta * norm;
    if den == 0.0 {
        log::warn!("gamma_1i: zero denominator, returning infinity");
        return f64::INFINITY;
    }
    zeta / den
}

/// Young's-inequality scalars a_1..a_5 and the resulting margin of
/// `ζ + ‖P K_u‖ + a_1 + a_2 + a_3 + a_5 < γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainConditionReport {
    pub a: [f64; 5],
    pub margin: f64,
    pub satisfied: bool,
}

pub fn gain_condition(gamma: f64, zeta: f64, p_ku_norm: f64, a: Option<[f64; 5]>) -> GainConditionReport {
    let available = gamma - zeta - p_ku_norm;
    let a = a.unwrap_or(if available > 0.0 { [available / 5.0; 5] } else { [0.0; 5] });
    let margin = gamma - (zeta + p_ku_norm + a[0] + a[1] + a[2] + a[4]);
    GainConditionReport {
        a,
        margin,
        satisfied: margin > 0.0,
    }
}

/// `[1 + 2 e^{χ0 (1-1/T) n0 τ_D} / (1 - e^{-χ0 (1-1/T) τ_D})] ρ*` in log10 form, so that
/// values far beyond f64 range stay reportable.
pub fn residual_bound_log10(chi0: f64, t_energy: f64, n0: f64, tau_d: f64, rho_star: f64) -> f64 {
    let c = chi0 * (1.0 - 1.0 / t_energy);
    if c <= 0.0 {
        return f64::INFINITY;
    }
    let ln_num = std::f64::consts::LN_2 + c * n0 * tau_d;
    let ln_den = (-(-c * tau_d).exp_m1()).ln();
    let ln_ratio = ln_num - ln_den;
    // ln(1 + e^x) computed stably
    let ln_bracket = if ln_ratio > 30.0 { ln_ratio + (-ln_ratio).exp().ln_1p() } else { ln_ratio.exp().ln_1p() };
    (ln_bracket + rho_star.ln()) / std::f64::consts::LN_10
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(n0: u32, tau_d: f64, t: u32, kappa: f64) -> DosParams {
        DosParams { n0, tau_d, t_energy: t, kappa, packet_period: 0.01 }
    }

    fn schedule(p: DosParams, iv: Vec<[f64; 2]>) -> DosSchedule {
        DosSchedule { params: p, seed: 1, targets: vec![TargetIntervals { agent: 1, intervals: iv }] }
    }

    fn gen(tau_d: f64, t: u32, horizon: f64, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            params: params(1, tau_d, t, 0.5),
            horizon,
            seed,
            duty: 0.9 / t as f64,
            mean_period: 1.0,
            start_after: 0.0,
            max_burst: None,
            targets: vec![1],
        }
    }

    #[test]
    fn empty_schedule_ok() {
        let s = DosSchedule::empty(params(0, 1.0, 2, 0.0));
        assert!(validate_schedule(&s, 100).unwrap().is_ok());
    }

    #[test]
    fn long_interval_violates_energy() {
        let s = schedule(params(5, 1.0, 2, 0.0), vec![[0.0, 10.0]]);
        let v = validate_schedule(&s, 10).unwrap().unwrap_err();
        assert_eq!(v.bound, Bound::Energy);
        assert_eq!((v.tau, v.t), (0.0, 10.0));
    }

    #[test]
    fn three_quick_attacks_violate_frequency() {
        let s = schedule(params(0, 1.0, 1, 0.0), vec![[0.0, 0.1], [0.5, 0.6], [1.0, 1.1]]);
        let v = validate_schedule(&s, 10).unwrap().unwrap_err();
        assert_eq!(v.bound, Bound::Frequency);
    }

    #[test]
    fn window_oracle_frequency() {
        // three onsets inside a window of length 2 with τ_D = 1, n0 = 0: 3 > 2
        let tp = TickParams { n0: 0, tau_d: 100, t_energy: 1, kappa: 0 };
        let iv = [(0, 10), (50, 60), (150, 160)];
        let v = window_check(&iv, &tp, 0, 200).unwrap();
        assert_eq!(v.bound, Bound::Frequency);
    }

    #[test]
    fn structural_errors() {
        let s = schedule(params(5, 0.1, 1, 0.0), vec![[1.0, 2.0], [1.5, 3.0]]);
        assert_eq!(validate_schedule(&s, 1).unwrap().unwrap_err().bound, Bound::Structure);
        let s = schedule(params(5, 0.1, 1, 0.0), vec![[1.0, 1.0]]);
        assert_eq!(validate_schedule(&s, 1).unwrap().unwrap_err().bound, Bound::Structure);
        let s = schedule(params(5, 0.1, 1, 0.0), vec![[1.0, 1.005]]);
        assert!(validate_schedule(&s, 1).is_err());
    }

    #[test]
    fn generator_examples() {
        let s = generate_schedule(&gen(2.0, 4, 20.0, 1)).unwrap();
        assert!(!s.is_empty());
        assert!(validate_schedule(&s, 1000).unwrap().is_ok());

        // T = 1 leaves only the frequency bound
        let mut c = gen(0.5, 1, 20.0, 3);
        c.duty = 0.8;
        c.params.kappa = 0.0;
        let s = generate_schedule(&c).unwrap();
        assert!(validate_schedule(&s, 1000).unwrap().is_ok());

        let mut c = gen(1e6, 2, 20.0, 3);
        c.params.n0 = 0;
        assert!(generate_schedule(&c).unwrap().is_empty());

        let mut c = gen(2.0, 4, 20.0, 3);
        c.duty = 0.3;
        assert!(matches!(generate_schedule(&c), Err(Error::InfeasibleSchedule(_))));
    }

    #[test]
    fn tolerable_interval_examples() {
        assert_relative_eq!(max_tolerable_interval(1.0, 1.0).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert!(max_tolerable_interval(1.0, 1e-12).unwrap() < 1e-11);
        assert_relative_eq!(max_tolerable_interval(10.0, 0.5).unwrap(), 0.1 * 6f64.ln(), epsilon = 1e-15);
        assert_eq!(max_tolerable_interval(0.0, 0.3).unwrap(), 0.3);
    }

    #[test]
    fn gamma_examples() {
        let one = Mat::identity(1, 1);
        assert_eq!(gamma_1i(1.0, 1.0, &one, &one), 1.0);
        assert_eq!(gamma_1i(1.0, 2.0, &one, &one), 0.5);
        assert!(gamma_1i(1.0, 0.0, &one, &one).is_infinite());
    }

    #[test]
    fn delta_disturbance_only() {
        let z3 = Vector::zeros(3);
        let mut bw = Vector::zeros(3);
        bw[2] = 1.0;
        let zm = Mat::zeros(3, 3);
        let eta = Mat::zeros(3, 2);
        let d = Delta1kInputs {
            b_w: &bw,
            omega_star: 0.4,
            a: &zm,
            e_k: &z3,
            p: &Mat::identity(3, 3),
            bbt: &zm,
            k_c: &[2.0; 3],
            neighbor_errors: &[z3.clone()],
            k_u_norm: 1000.0,
            u_hat_d_k: &z3,
            sigma_d_star: 0.0,
            b_f: &bw,
            eps_star: 0.0,
            eta_hat_k_norm: eta.norm(),
            b_f0: &bw,
            eps0: 0.0,
        };
        assert_eq!(delta_1k(&d), 0.4);
        let zero = Delta1kInputs { omega_star: 0.0, ..d };
        assert_eq!(delta_1k(&zero), 0.0);
    }

    #[test]
    fn residual_bound_small_case() {
        // χ0 = 1, T = 2, n0 = 1, τ_D = 1, ρ* = 1: 1 + 2e^{0.5}/(1 - e^{-0.5})
        let want = 1.0 + 2.0 * 0.5f64.exp() / (1.0 - (-0.5f64).exp());
        assert_relative_eq!(residual_bound_log10(1.0, 2.0, 1.0, 1.0, 1.0), want.log10(), epsilon = 1e-12);
        assert!(residual_bound_log10(1000.0, 4.0, 1.0, 2.0, 1.0).is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn generate_then_validate(
            seed in any::<u64>(),
            tau_d_ticks in 1u64..400,
            t in 1u32..8,
            horizon in 1.0f64..60.0,
            kappa_ticks in 0u64..100,
            n0 in 0u32..4,
        ) {
            let c = GeneratorConfig {
                params: DosParams { n0, tau_d: tau_d_ticks as f64 * 0.01, t_energy: t, kappa: kappa_ticks as f64 * 0.01, packet_period: 0.01 },
                horizon,
                seed,
                duty: 1.0 / t as f64,
                mean_period: 0.7,
                start_after: 0.0,
                max_burst: None,
                targets: vec![1, 2],
            };
            let s = generate_schedule(&c).unwrap();
            prop_assert!(validate_schedule(&s, 200).unwrap().is_ok());
        }
    }
}
