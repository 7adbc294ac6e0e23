//! Post-hoc checks on traces: Lyapunov envelopes, the held-input deviation bound, spacing,
//! and the paired/swept studies. Everything here reads the trace columns only, so a report
//! rebuilt from a written CSV matches the one produced after the run.

use serde::{Deserialize, Serialize};

use crate::config::{prepare, DosSpec, Prepared, ScenarioConfig};
use crate::controller::InputMechanism;
use crate::dos::{self, Delta1kInputs, DosSchedule, GainConditionReport, TargetIntervals};
use crate::engine::run_prepared;
use crate::error::Result;
use crate::linalg::{self, Mat, Vector};
use crate::observer;
use crate::parallel;
use crate::trace::SimTrace;

/// Multiplicative slack on the observer envelope.
pub const ENVELOPE_SLACK: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub claim: String,
    /// Follower the claim was checked on; `None` when it aggregates all followers.
    pub agent: Option<usize>,
    pub applicable: bool,
    pub satisfied: bool,
    /// Smallest `bound - measured`; negative exactly when the claim fails.
    pub worst_margin: f64,
    pub worst_time: Option<f64>,
    pub detail: String,
}

impl BoundReport {
    fn not_applicable(claim: &str, agent: Option<usize>, detail: impl Into<String>) -> Self {
        Self {
            claim: claim.into(),
            agent,
            applicable: false,
            satisfied: true,
            worst_margin: f64::INFINITY,
            worst_time: None,
            detail: detail.into(),
        }
    }
}

fn quad(p: &Mat, e: &[f64]) -> f64 {
    let v = Vector::from_column_slice(e);
    (v.transpose() * p * &v)[0]
}

/// `V = Eᵀ P E` and `V_o = E_oᵀ P E_o` recomputed from the error columns of one follower.
pub fn lyapunov_series(trace: &SimTrace, agent: usize, p: &Mat) -> (Vec<f64>, Vec<f64>) {
    trace
        .series(agent)
        .map(|r| (quad(p, &r.e), quad(p, &r.e_o)))
        .unzip()
}

/// `V_o(t) <= 1.05 (V_o(0) e^{-ψ t} + d_o / ψ)` on every sample.
pub fn check_observer_envelope(times: &[f64], v_o: &[f64], psi: f64, d_oi: f64, attacked: bool) -> BoundReport {
    if attacked {
        return BoundReport::not_applicable("observer_envelope", None, "attack intervals present");
    }
    let mut worst = f64::INFINITY;
    let mut worst_time = None;
    if let (Some(&t0), Some(&v0)) = (times.first(), v_o.first()) {
        for (&t, &v) in times.iter().zip(v_o) {
            let env = ENVELOPE_SLACK * (v0 * (-psi * (t - t0)).exp() + d_oi / psi);
            let margin = env - v;
            if margin < worst {
                worst = margin;
                worst_time = Some(t);
            }
        }
    }
    // an exactly zero series has nothing to bound
    if v_o.iter().all(|v| *v == 0.0) {
        worst = f64::INFINITY;
        worst_time = None;
    }
    BoundReport {
        claim: "observer_envelope".into(),
        agent: None,
        applicable: true,
        satisfied: worst >= 0.0,
        worst_margin: worst,
        worst_time,
        detail: format!("d_o/psi = {}", d_oi / psi),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Means of `f` over the four quarters of the series (by sample count).
pub fn quarter_means(values: &[f64]) -> [f64; 4] {
    let n = values.len();
    let mut out = [0.0; 4];
    for (q, o) in out.iter_mut().enumerate() {
        let a = q * n / 4;
        let b = ((q + 1) * n / 4).max(a + 1).min(n);
        if a < b {
            *o = values[a..b].iter().sum::<f64>() / (b - a) as f64;
        }
    }
    out
}

/// Asymptotic convergence in finite form: final ‖E‖ below the threshold and the final-quarter
/// mean below the first-quarter mean.
pub fn check_convergence(trace: &SimTrace, agent: usize, threshold: f64) -> BoundReport {
    let norms: Vec<f64> = trace.series(agent).map(|r| norm(&r.e)).collect();
    let Some(&last) = norms.last() else {
        return BoundReport::not_applicable("convergence", Some(agent), "empty trace");
    };
    let q = quarter_means(&norms);
    let margin = (threshold - last).min(q[0] - q[3]);
    BoundReport {
        claim: "convergence".into(),
        agent: Some(agent),
        applicable: true,
        satisfied: margin > 0.0,
        worst_margin: margin,
        worst_time: trace.last(agent).map(|r| r.t),
        detail: format!("final |E| = {last}, quarter means = {q:?}"),
    }
}

/// Boundedness in finite form: the largest ‖E‖ of the final quarter does not exceed the
/// largest ‖E‖ seen before it.
pub fn check_boundedness(trace: &SimTrace, agent: usize) -> BoundReport {
    let norms: Vec<f64> = trace.series(agent).map(|r| norm(&r.e)).collect();
    let n = norms.len();
    if n < 4 {
        return BoundReport::not_applicable("boundedness", Some(agent), "trace too short");
    }
    let cut = 3 * n / 4;
    let early = norms[..cut].iter().copied().fold(0.0, f64::max);
    let (late_idx, late) = norms[cut..]
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    let all_finite = trace.series(agent).all(|r| r.x.iter().chain(&r.x_hat).all(|v| v.is_finite()));
    let margin = if all_finite { early - late } else { f64::NEG_INFINITY };
    BoundReport {
        claim: "boundedness".into(),
        agent: Some(agent),
        applicable: true,
        satisfied: margin >= 0.0,
        worst_margin: margin,
        worst_time: Some(trace.row(cut + late_idx, agent).t),
        detail: format!("sup |E| before final quarter = {early}, in final quarter = {late}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldDeviationInterval {
    pub agent: usize,
    /// Time of the last delivered packet before the attack.
    pub t_k: f64,
    /// Time of the packet that ends it.
    pub t_r: f64,
    pub delta_t: f64,
    pub max_tolerable: f64,
    pub applicable: bool,
    pub delta_1k: f64,
    pub gamma_1i: f64,
    pub bound: f64,
    /// `(e^{‖A‖Δ} - 1) δ / ‖A‖`, the growth bound before it is relaxed to `γ δ`.
    pub growth_bound: f64,
    pub sup_pi: f64,
    pub sup_time: f64,
    pub margin: f64,
}

/// Runs of blocked ticks per follower as `(first blocked tick, first delivered tick after)`.
pub fn blocked_runs(trace: &SimTrace, agent: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let k_max = trace.n_ticks();
    for k in 0..k_max {
        let pkt = trace.row(k, agent).pkt;
        match (pkt, start) {
            (false, None) => start = Some(k),
            (true, Some(s)) => {
                out.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, k_max - 1));
    }
    out
}

/// Deviation bound while the input is held, checked per blocked run.
pub fn check_held_deviation(pr: &Prepared, trace: &SimTrace) -> (Vec<BoundReport>, Vec<HeldDeviationInterval>) {
    let cfg = &pr.cfg;
    let mut reports = Vec::new();
    let mut intervals = Vec::new();
    for a in &pr.agents {
        let i = a.params.index;
        let runs = blocked_runs(trace, i);
        if runs.is_empty() {
            continue;
        }
        let a_norm = linalg::spectral_norm(&a.design.a);
        let bbt = a.design.input_outer();
        let neighbors = pr.topology.neighbors(i).unwrap_or_default();
        let mut worst = f64::INFINITY;
        let mut worst_time = None;
        let mut checked = 0usize;
        for (s, r) in runs {
            if s == 0 {
                continue;
            }
            let k = s - 1;
            let snap = trace.row(k, i);
            let e_k = Vector::from_column_slice(&snap.e);
            let ud_k = Vector::from_column_slice(&snap.u_hat_d);
            let nerr: Vec<Vector> = neighbors
                .iter()
                .map(|&j| Vector::from_column_slice(&trace.row(k, j).e))
                .collect();
            let delta = dos::delta_1k(&Delta1kInputs {
                b_w: &a.design.b_w,
                omega_star: a.params.bounds.omega_star,
                a: &a.design.a,
                e_k: &e_k,
                p: &a.p,
                bbt: &bbt,
                k_c: &cfg.controller.k_c,
                neighbor_errors: &nerr,
                k_u_norm: cfg.controller.k_u_norm(),
                u_hat_d_k: &ud_k,
                sigma_d_star: a.params.bounds.sigma_d_star,
                b_f: &a.design.b_f,
                eps_star: a.params.bounds.eps_star,
                eta_hat_k_norm: snap.eta_norm,
                b_f0: &pr.leader.matrices.b_f,
                eps0: pr.leader.eps0,
            });
            let gamma = dos::gamma_1i(cfg.hold_bound.zeta, delta, &a.p, &a.g);
            let max_tol = dos::max_tolerable_interval(a_norm, gamma).unwrap_or(0.0);
            let t_k = snap.t;
            let t_r = trace.row(r, i).t;
            let delta_t = t_r - t_k;
            let (mut sup_pi, mut sup_time) = (0.0, t_k);
            for kk in k..=r {
                let row = trace.row(kk, i);
                let d: Vec<f64> = row.e.iter().zip(&snap.e).map(|(x, y)| x - y).collect();
                let v = norm(&d);
                if v > sup_pi {
                    sup_pi = v;
                    sup_time = row.t;
                }
            }
            let bound = gamma * delta;
            let growth = if a_norm > 0.0 {
                (a_norm * delta_t).exp_m1() / a_norm * delta
            } else {
                delta_t * delta
            };
            let applicable = delta_t <= max_tol;
            let margin = bound - sup_pi;
            if applicable {
                checked += 1;
                if margin < worst {
                    worst = margin;
                    worst_time = Some(sup_time);
                }
            }
            intervals.push(HeldDeviationInterval {
                agent: i,
                t_k,
                t_r,
                delta_t,
                max_tolerable: max_tol,
                applicable,
                delta_1k: delta,
                gamma_1i: gamma,
                bound,
                growth_bound: growth,
                sup_pi,
                sup_time,
                margin,
            });
        }
        let total = intervals.iter().filter(|iv| iv.agent == i).count();
        reports.push(BoundReport {
            claim: "held_deviation".into(),
            agent: Some(i),
            applicable: checked > 0,
            satisfied: worst >= 0.0,
            worst_margin: worst,
            worst_time,
            detail: format!("{checked} of {total} attack intervals within the tolerable length"),
        });
    }
    (reports, intervals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub collision: bool,
    /// First time a follower reached or passed its predecessor, with the pair `(i-1, i)`.
    pub first: Option<(f64, usize, usize)>,
    pub min_spacing: f64,
    /// Per follower: smallest `p_{i-1} - p_i` and that value minus the minimum gap d_m.
    pub per_pair: Vec<PairSpacing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSpacing {
    pub follower: usize,
    pub min_spacing: f64,
    pub t_min: f64,
    pub min_gap: Option<f64>,
    pub margin_to_min_gap: Option<f64>,
}

/// Consecutive-pair spacing on the position channel. `min_gaps[i-1]` is follower i's d_m.
pub fn collision_check(trace: &SimTrace, min_gaps: &[Option<f64>]) -> CollisionReport {
    let mut per_pair = Vec::new();
    let mut first: Option<(f64, usize, usize)> = None;
    let mut overall = f64::INFINITY;
    for i in 1..trace.agents {
        let mut min = f64::INFINITY;
        let mut t_min = 0.0;
        for k in 0..trace.n_ticks() {
            let gap = trace.row(k, i - 1).x[0] - trace.row(k, i).x[0];
            if gap < min {
                min = gap;
                t_min = trace.row(k, i).t;
            }
            if !(gap > 0.0) {
                let t = trace.row(k, i).t;
                if first.is_none_or(|f| t < f.0) {
                    first = Some((t, i - 1, i));
                }
            }
        }
        overall = overall.min(min);
        let d_m = min_gaps.get(i - 1).copied().flatten();
        per_pair.push(PairSpacing {
            follower: i,
            min_spacing: min,
            t_min,
            min_gap: d_m,
            margin_to_min_gap: d_m.map(|d| min - d),
        });
    }
    CollisionReport {
        collision: first.is_some(),
        first,
        min_spacing: overall,
        per_pair,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub agent: usize,
    pub max_abs_error: Vec<f64>,
    pub final_error: Vec<f64>,
    pub max_error_norm: f64,
    /// Mean |e_l| per channel over each quarter of the run.
    pub quarter_mean_abs_error: Vec<[f64; 4]>,
    /// Last time |e_1| exceeded the convergence threshold (0 if never).
    pub settling_time: f64,
    pub sup_v: f64,
    pub final_v: f64,
    pub sup_vo: f64,
    pub attacked_ticks: usize,
    pub detected_ticks: usize,
}

pub fn agent_metrics(trace: &SimTrace, agent: usize, threshold: f64) -> AgentMetrics {
    let n = trace.state_dim;
    let rows: Vec<_> = trace.series(agent).collect();
    let mut max_abs = vec![0.0f64; n];
    let mut max_norm = 0.0f64;
    let mut settling = 0.0;
    let (mut sup_v, mut sup_vo) = (0.0f64, 0.0f64);
    for r in &rows {
        for l in 0..n {
            max_abs[l] = max_abs[l].max(r.e[l].abs());
        }
        max_norm = max_norm.max(norm(&r.e));
        if r.e[0].abs() > threshold {
            settling = r.t;
        }
        sup_v = sup_v.max(r.v);
        sup_vo = sup_vo.max(r.v_o);
    }
    let quarter = (0..n)
        .map(|l| quarter_means(&rows.iter().map(|r| r.e[l].abs()).collect::<Vec<_>>()))
        .collect();
    let last = rows.last();
    AgentMetrics {
        agent,
        max_abs_error: max_abs,
        final_error: last.map(|r| r.e.clone()).unwrap_or_default(),
        max_error_norm: max_norm,
        quarter_mean_abs_error: quarter,
        settling_time: settling,
        sup_v,
        final_v: last.map_or(0.0, |r| r.v),
        sup_vo,
        attacked_ticks: rows.iter().filter(|r| !r.pkt).count(),
        detected_ticks: rows.iter().filter(|r| r.eps).count(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualBoundReport {
    pub chi0: f64,
    pub rho_star: f64,
    pub t_energy: u32,
    pub n0: u32,
    pub tau_d: f64,
    /// log10 of the residual bound; the bound itself overflows f64 for typical gains.
    pub bound_log10: f64,
    pub sup_v: f64,
    pub sup_v_log10: f64,
    pub within_bound: bool,
}

pub fn residual_bound_report(pr: &Prepared, sup_v: f64) -> Option<ResidualBoundReport> {
    let sched = pr.schedule.as_ref()?;
    let k_eta = pr.neural.k_eta.iter().fold(0.0f64, |m, k| m.max(k.abs()));
    let eps_star = pr.agents.iter().map(|a| a.params.bounds.eps_star).fold(0.0, f64::max);
    let rho_star = k_eta * eps_star * eps_star;
    let p = &sched.params;
    let bound = dos::residual_bound_log10(k_eta, f64::from(p.t_energy), f64::from(p.n0), p.tau_d, rho_star);
    let sup_log = sup_v.log10();
    Some(ResidualBoundReport {
        chi0: k_eta,
        rho_star,
        t_energy: p.t_energy,
        n0: p.n0,
        tau_d: p.tau_d,
        bound_log10: bound,
        sup_v,
        sup_v_log10: sup_log,
        within_bound: sup_log <= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainConditionEntry {
    pub agent: usize,
    /// Smallest γ over the agent's attack intervals.
    pub gamma: f64,
    pub p_ku_norm: f64,
    pub report: GainConditionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizedDos {
    /// The packet log, read as a schedule, satisfies the configured frequency and energy bounds.
    pub within_bounds: bool,
    pub detail: String,
    pub blocked_fraction: Vec<(usize, f64)>,
}

/// Reads the blocked runs of the trace back as a schedule and validates it.
pub fn realized_dos(pr: &Prepared, trace: &SimTrace) -> Option<RealizedDos> {
    let sched = pr.schedule.as_ref()?;
    let mut targets = Vec::new();
    let mut fractions = Vec::new();
    for a in &pr.agents {
        let i = a.params.index;
        let runs = blocked_runs(trace, i);
        let blocked: usize = trace.series(i).filter(|r| !r.pkt).count();
        fractions.push((i, blocked as f64 / trace.n_ticks().max(1) as f64));
        if !runs.is_empty() {
            targets.push(TargetIntervals {
                agent: i,
                intervals: runs
                    .iter()
                    .map(|&(s, e)| [trace.row(s, i).t, trace.row(e, i).t])
                    .collect(),
            });
        }
    }
    let log = DosSchedule {
        params: sched.params.clone(),
        seed: sched.seed,
        targets,
    };
    let (ok, detail) = match dos::validate_schedule(&log, 200) {
        Ok(Ok(())) => (true, "ok".to_string()),
        Ok(Err(v)) => (false, v.to_string()),
        Err(e) => (false, e.to_string()),
    };
    Some(RealizedDos {
        within_bounds: ok,
        detail,
        blocked_fraction: fractions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub mechanism: InputMechanism,
    pub horizon: f64,
    pub ticks: usize,
    pub followers: Vec<AgentMetrics>,
    pub collision: CollisionReport,
    pub claims: Vec<BoundReport>,
    pub held_deviation_intervals: Vec<HeldDeviationInterval>,
    pub gain_condition: Vec<GainConditionEntry>,
    pub residual_bound: Option<ResidualBoundReport>,
    pub realized_dos: Option<RealizedDos>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn claims_for(&self, claim: &str) -> impl Iterator<Item = &BoundReport> + '_ {
        let claim = claim.to_string();
        self.claims.iter().filter(move |c| c.claim == claim)
    }
}

pub fn build_report(pr: &Prepared, trace: &SimTrace) -> RunReport {
    let cfg = &pr.cfg;
    let attacked = pr.schedule.as_ref().is_some_and(|s| !s.is_empty());
    let times = trace.times();
    let mut claims = Vec::new();
    let mut followers = Vec::new();
    for a in &pr.agents {
        let i = a.params.index;
        let (v, v_o) = lyapunov_series(trace, i, &a.p);
        let b = &a.params.bounds;
        let d_oi = observer::d_oi(b.sigma_d_star, b.eta_star, cfg.observer.xi);
        let mut r = check_observer_envelope(&times, &v_o, cfg.psi, d_oi, attacked);
        r.agent = Some(i);
        claims.push(r);
        claims.push(check_convergence(trace, i, cfg.convergence_threshold));
        claims.push(check_boundedness(trace, i));
        let mut m = agent_metrics(trace, i, cfg.convergence_threshold);
        m.sup_v = v.iter().copied().fold(0.0, f64::max);
        m.sup_vo = v_o.iter().copied().fold(0.0, f64::max);
        followers.push(m);
    }
    let (l1, intervals) = check_held_deviation(pr, trace);
    claims.extend(l1);

    let mut gain_condition = Vec::new();
    for a in &pr.agents {
        let i = a.params.index;
        let gamma = intervals
            .iter()
            .filter(|iv| iv.agent == i)
            .map(|iv| iv.gamma_1i)
            .fold(f64::INFINITY, f64::min);
        if gamma.is_finite() {
            let ku = linalg::diag(&Vector::from_column_slice(&cfg.controller.k_u));
            let p_ku = linalg::spectral_norm(&(&a.p * ku));
            gain_condition.push(GainConditionEntry {
                agent: i,
                gamma,
                p_ku_norm: p_ku,
                report: dos::gain_condition(gamma, cfg.hold_bound.zeta, p_ku, cfg.hold_bound.a),
            });
        }
    }

    let sup_v = followers.iter().map(|m| m.sup_v).fold(0.0, f64::max);
    let residual_bound = residual_bound_report(pr, sup_v);
    if let Some(t4) = &residual_bound {
        claims.push(BoundReport {
            claim: "residual_bound".into(),
            agent: None,
            applicable: true,
            satisfied: t4.within_bound,
            worst_margin: t4.bound_log10 - t4.sup_v_log10,
            worst_time: None,
            detail: "margin in decades between the residual bound and sup V".into(),
        });
    }

    let gaps: Vec<Option<f64>> = pr.agents.iter().map(|a| a.params.vehicle_params().map(|v| v.min_gap)).collect();
    RunReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        mechanism: cfg.input_mechanism,
        horizon: cfg.horizon,
        ticks: trace.n_ticks(),
        followers,
        collision: collision_check(trace, &gaps),
        claims,
        held_deviation_intervals: intervals,
        gain_condition,
        residual_bound,
        realized_dos: realized_dos(pr, trace),
    }
}

/// Runs the config and reports on it.
pub fn run_and_report(cfg: &ScenarioConfig) -> Result<(SimTrace, RunReport)> {
    let pr = prepare(cfg)?;
    let trace = run_prepared(&pr)?;
    let report = build_report(&pr, &trace);
    Ok((trace, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSummary {
    pub mechanism: InputMechanism,
    /// Largest |e_1| over all followers from the first blocked packet on (whole run if none).
    pub max_abs_position_error: f64,
    pub measured_from: f64,
    pub max_error_norm: f64,
    pub collision: bool,
    pub min_spacing: f64,
    pub max_settling_time: f64,
    pub followers: Vec<AgentMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HimZimReport {
    pub name: String,
    pub seed: u64,
    pub hold: MechanismSummary,
    pub zero: MechanismSummary,
    /// Max position error under hold is no larger than under zero.
    pub hold_not_worse: bool,
}

/// Time of the first blocked packet on any follower.
pub fn first_attack_time(trace: &SimTrace) -> Option<f64> {
    (0..trace.n_ticks()).find_map(|k| {
        let blocked = (1..trace.agents).any(|i| !trace.row(k, i).pkt);
        blocked.then(|| trace.row(k, 0).t)
    })
}

fn summarize(mechanism: InputMechanism, trace: &SimTrace, rep: &RunReport) -> MechanismSummary {
    let from = first_attack_time(trace).unwrap_or(f64::NEG_INFINITY);
    let max_e1 = trace
        .rows
        .iter()
        .filter(|r| r.agent > 0 && r.t >= from)
        .fold(0.0f64, |m, r| m.max(r.e[0].abs()));
    MechanismSummary {
        mechanism,
        max_abs_position_error: max_e1,
        measured_from: from.max(0.0),
        max_error_norm: rep.followers.iter().map(|m| m.max_error_norm).fold(0.0, f64::max),
        collision: rep.collision.collision,
        min_spacing: rep.collision.min_spacing,
        max_settling_time: rep.followers.iter().map(|m| m.settling_time).fold(0.0, f64::max),
        followers: rep.followers.clone(),
    }
}

/// The same scenario under hold and zero input, run as independent jobs.
pub fn compare_him_zim(cfg: &ScenarioConfig) -> Result<HimZimReport> {
    let jobs: Vec<ScenarioConfig> = [InputMechanism::Hold, InputMechanism::Zero]
        .iter()
        .map(|m| {
            let mut c = cfg.clone();
            c.input_mechanism = *m;
            c
        })
        .collect();
    let mut out = parallel::map(&jobs, |c| {
        run_and_report(c).map(|(trace, r)| summarize(c.input_mechanism, &trace, &r))
    });
    let zero = out.pop().expect("two jobs")?;
    let hold = out.pop().expect("two jobs")?;
    let hold_not_worse = hold.max_abs_position_error <= zero.max_abs_position_error;
    log::info!(
        "hold vs zero max position error: {} vs {} ({})",
        hold.max_abs_position_error,
        zero.max_abs_position_error,
        if hold_not_worse { "hold not worse" } else { "hold worse" }
    );
    Ok(HimZimReport {
        name: cfg.name.clone(),
        seed: cfg.seed,
        hold,
        zero,
        hold_not_worse,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub neurons: usize,
    pub agent: usize,
    pub t: f64,
    /// |e_l| at the end of the horizon.
    pub abs_error: Vec<f64>,
}

/// One attack-free run per neuron count; errors sampled at the end of the horizon.
pub fn neuron_sweep(cfg: &ScenarioConfig, counts: &[usize]) -> Result<Vec<SweepRow>> {
    if counts.is_empty() {
        return Err(crate::Error::InvalidArgument("neuron counts must not be empty".into()));
    }
    let jobs: Vec<ScenarioConfig> = counts
        .iter()
        .map(|&m| {
            let mut c = cfg.clone();
            c.neural.neurons = m;
            c.dos = None;
            c
        })
        .collect();
    let results = parallel::map(&jobs, |c| -> Result<Vec<SweepRow>> {
        let pr = prepare(c)?;
        let trace = run_prepared(&pr)?;
        Ok((1..trace.agents)
            .filter_map(|i| trace.last(i))
            .map(|r| SweepRow {
                neurons: c.neural.neurons,
                agent: r.agent,
                t: r.t,
                abs_error: r.e.iter().map(|v| v.abs()).collect(),
            })
            .collect())
    });
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut wr = csv::Writer::from_writer(Vec::new());
    let n = rows.first().map_or(0, |r| r.abs_error.len());
    let mut header = vec!["neurons".to_string(), "agent".to_string(), "t".to_string()];
    header.extend((1..=n).map(|l| format!("abs_e{l}")));
    wr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.neurons.to_string(), r.agent.to_string(), r.t.to_string()];
        rec.extend(r.abs_error.iter().map(|v| v.to_string()));
        wr.write_record(&rec)?;
    }
    let bytes = wr.into_inner().map_err(|e| crate::Error::Invariant(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| crate::Error::Invariant(e.to_string()))
}

/// Whether the config carries an attack at all.
pub fn has_attack(cfg: &ScenarioConfig) -> bool {
    match &cfg.dos {
        None => false,
        Some(DosSpec::Schedule(s)) => !s.is_empty(),
        Some(DosSpec::Generate(g)) => !g.targets.is_empty() && g.params.n0 > 0 && g.duty > 0.0,
    }
}
