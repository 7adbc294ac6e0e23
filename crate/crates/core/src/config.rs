//! Scenario configuration (JSON) and its validation into a ready-to-run scenario.

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerGains, InputMechanism};
use crate::dos::{self, DosSchedule, GeneratorConfig};
use crate::error::{Error, Result, Violation};
use crate::estimator::NeuralConfig;
use crate::linalg::{Mat, Vector};
use crate::observer::{self, ObserverGains};
use crate::plant::{self, AgentParams, DisturbanceKind, LeaderModel, SpeedProfile, SystemMatrices};
use crate::riccati::{self, RiccatiProblem};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderSpec {
    /// Drivetrain time constant; sets the last-row coefficient to `-1/tau`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Last-row coefficient for a generic leader; ignored when `tau` is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    pub profile: SpeedProfile,
    #[serde(default)]
    pub start_position: f64,
    /// Overrides the bound on the change of the leader input over one attack.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralSpec {
    pub neurons: usize,
    /// Neuron centers are spread evenly over this range.
    pub center_range: [f64; 2],
    #[serde(default = "one")]
    pub scale: f64,
    pub k_eta: Vec<f64>,
    #[serde(default)]
    pub literal_activation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_eta_star: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl NeuralSpec {
    pub fn build(&self) -> Result<NeuralConfig> {
        let mut cfg = NeuralConfig::evenly_spaced(
            self.neurons,
            self.center_range[0],
            self.center_range[1],
            self.k_eta.clone(),
        )?;
        cfg.scales = vec![self.scale; self.neurons];
        cfg.literal_activation = self.literal_activation;
        cfg.k_eta_star = self.k_eta_star;
        cfg.check(self.k_eta.len())?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DosSpec {
    Schedule(DosSchedule),
    /// Generated at load time; `horizon` defaults to the scenario horizon when zero.
    Generate(GeneratorConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldBoundSpec {
    /// Design scalar ζ.
    pub zeta: f64,
    /// Young's-inequality scalars a_1..a_5; split from the available margin when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<[f64; 5]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub state_dim: usize,
    /// Followers, indices 1..=N in order.
    pub agents: Vec<AgentParams>,
    pub leader: LeaderSpec,
    /// Adjacency with the leader as node 0; leader-predecessor-follower when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    pub controller: ControllerGains,
    pub neural: NeuralSpec,
    pub observer: ObserverGains,
    /// ψ in the Riccati equation.
    pub psi: f64,
    /// Design the controller on a unit input column; the physical input is the command
    /// times `1/b`.
    #[serde(default = "yes")]
    pub input_normalization: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dos: Option<DosSpec>,
    pub dt: f64,
    pub packet_period: f64,
    pub horizon: f64,
    #[serde(default = "default_window")]
    pub detection_window: f64,
    #[serde(default)]
    pub input_mechanism: InputMechanism,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub disturbance: DisturbanceKind,
    /// Added to every follower's desired initial state.
    pub initial_offset: Vec<f64>,
    /// Added to every follower's initial state to form the observer's initial estimate.
    pub observer_offset: Vec<f64>,
    pub hold_bound: HoldBoundSpec,
    /// Final-error threshold used by the asymptotic-convergence check.
    #[serde(default = "default_threshold")]
    pub convergence_threshold: f64,
}

fn yes() -> bool {
    true
}

fn default_window() -> f64 {
    1.5
}

fn default_threshold() -> f64 {
    0.5
}

impl ScenarioConfig {
    /// Five-vehicle platoon, leader-predecessor-follower links, no attack.
    pub fn platoon_default() -> Self {
        let agents = (1..=5)
            .map(|i| AgentParams::table_vehicle(i).expect("table has five followers"))
            .collect();
        Self {
            name: "nominal".into(),
            state_dim: 3,
            agents,
            leader: LeaderSpec {
                tau: Some(0.1),
                a0: None,
                profile: SpeedProfile::default_platoon(),
                start_position: 0.0,
                eps0: None,
            },
            topology: None,
            controller: ControllerGains {
                k_c: vec![2.0; 3],
                k_u: vec![1000.0; 3],
                rho: 2.0,
                eps_reg: vec![0.5; 3],
                d0: vec![-7.0, 0.0, 0.0],
            },
            neural: NeuralSpec {
                neurons: 25,
                center_range: [-10.0, 30.0],
                scale: 1.0,
                k_eta: vec![1000.0; 3],
                literal_activation: false,
                k_eta_star: None,
            },
            observer: ObserverGains {
                k_o: vec![1000.0; 3],
                xi: 2.0,
            },
            psi: 1000.0,
            input_normalization: true,
            dos: None,
            dt: 0.0005,
            packet_period: 0.0005,
            horizon: 25.0,
            detection_window: 1.5,
            input_mechanism: InputMechanism::Hold,
            seed: 1,
            disturbance: DisturbanceKind::default(),
            initial_offset: vec![0.5, 0.0, 0.0],
            observer_offset: vec![0.0, 0.0, 0.0],
            hold_bound: HoldBoundSpec { zeta: 1.0e5, a: None },
            convergence_threshold: 0.5,
        }
    }

    /// The default platoon with follower 1's controller link under a generated attack wave.
    pub fn platoon_attack_default() -> Self {
        let mut cfg = Self::platoon_default();
        cfg.name = "dos_veh1".into();
        cfg.dos = Some(DosSpec::Generate(default_generator(cfg.packet_period, cfg.horizon, cfg.seed)));
        cfg
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Sets the run seed and, for a generated attack, the generator seed with it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Some(DosSpec::Generate(g)) = &mut self.dos {
            g.seed = seed;
        }
    }

    pub fn n_followers(&self) -> usize {
        self.agents.len()
    }
}

pub fn default_generator(packet_period: f64, horizon: f64, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        params: dos::DosParams {
            n0: 2,
            tau_d: 0.1,
            t_energy: 4,
            kappa: 0.02,
            packet_period,
        },
        horizon,
        seed,
        duty: 0.05,
        mean_period: 0.2,
        start_after: 2.0,
        max_burst: Some(0.012),
        targets: vec![1],
    }
}

/// Everything `run_scenario` needs, derived once from a valid config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub cfg: ScenarioConfig,
    pub topology: Topology,
    pub leader: LeaderModel,
    pub agents: Vec<PreparedAgent>,
    pub neural: NeuralConfig,
    pub schedule: Option<DosSchedule>,
    pub substeps: u64,
    pub ticks: u64,
}

#[derive(Debug, Clone)]
pub struct PreparedAgent {
    pub params: AgentParams,
    /// Physical plant.
    pub plant: SystemMatrices,
    /// Matrices the controller is designed on.
    pub design: SystemMatrices,
    /// Physical input per unit command.
    pub input_scale: f64,
    pub p: Mat,
    /// (Σ_j α_ij) B Bᵀ on the design input.
    pub g: Mat,
    pub riccati_residual: f64,
}

fn ratio_is_integer(num: f64, den: f64) -> Option<u64> {
    let q = num / den;
    let r = q.round();
    ((q - r).abs() <= 1e-9 * r.max(1.0) && r >= 1.0).then_some(r as u64)
}

/// Validates and derives; every problem found is reported at once.
pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    let mut v: Vec<Violation> = Vec::new();
    let n = cfg.state_dim;
    if n < 2 {
        return Err(Error::Config(vec![Violation::new("STATE_DIM", "state_dim must be >= 2")]));
    }
    let nf = cfg.n_followers();
    if nf == 0 {
        v.push(Violation::new("AGENTS", "at least one follower is required"));
    }
    for (k, a) in cfg.agents.iter().enumerate() {
        if a.index != k + 1 {
            v.push(Violation::new(
                "AGENT_INDEX",
                format!("agent at position {k} has index {}, expected {}", a.index, k + 1),
            ));
        }
        if let Err(e) = a.check() {
            v.push(Violation::new("AGENT_PARAMS", e.to_string()));
        }
    }

    let topology = match &cfg.topology {
        Some(t) => t.clone(),
        None => Topology::build_lpf(nf.max(1))?,
    };
    if topology.n_followers() != nf {
        v.push(Violation::new(
            "TOPOLOGY",
            format!("topology has {} followers, config has {nf}", topology.n_followers()),
        ));
    } else if let Err(errs) = topology.validate() {
        for e in errs {
            v.push(Violation::new("TOPOLOGY", e.to_string()));
        }
    }

    v.extend(cfg.controller.violations(n));
    if let Err(e) = observer::check_gain_condition(&cfg.observer, 1.0, 0.0) {
        v.push(Violation::new("XI", e.to_string()));
    } else if cfg.observer.k_o.len() != n {
        v.push(Violation::new("DIMENSION", format!("k_o needs {n} entries")));
    }
    for (name, vec) in [("initial_offset", &cfg.initial_offset), ("observer_offset", &cfg.observer_offset)] {
        if vec.len() != n {
            v.push(Violation::new("DIMENSION", format!("{name} needs {n} entries")));
        }
    }
    if !(cfg.psi > 0.0) {
        v.push(Violation::new("PSI", format!("psi must be positive, got {}", cfg.psi)));
    }
    if !(cfg.horizon > 0.0) {
        v.push(Violation::new("HORIZON", "horizon must be positive"));
    }
    if !(cfg.dt > 0.0 && cfg.packet_period > 0.0) {
        v.push(Violation::new("STEP", "dt and packet_period must be positive"));
    }
    if !(cfg.detection_window >= 1.0) {
        v.push(Violation::new("DETECTION_WINDOW", "detection window must be at least one period"));
    }
    let substeps = ratio_is_integer(cfg.packet_period, cfg.dt);
    if substeps.is_none() {
        v.push(Violation::new("STEP", "dt must divide packet_period"));
    }
    let ticks = ratio_is_integer(cfg.horizon, cfg.packet_period);
    if ticks.is_none() {
        v.push(Violation::new("STEP", "packet_period must divide horizon"));
    }
    if !(cfg.hold_bound.zeta > 0.0) {
        v.push(Violation::new("HOLD_BOUND", "zeta must be positive"));
    }

    let neural = match cfg.neural.build() {
        Ok(nc) if nc.k_eta.len() == n => Some(nc),
        Ok(_) => {
            v.push(Violation::new("NEURAL", format!("k_eta needs {n} entries")));
            None
        }
        Err(e) => {
            v.push(Violation::new("NEURAL", e.to_string()));
            None
        }
    };

    let leader = {
        let res = match (cfg.leader.tau, cfg.leader.a0) {
            (Some(tau), _) => LeaderModel::vehicle(tau, cfg.leader.profile.clone(), cfg.leader.start_position),
            (None, Some(a0)) => LeaderModel::new(n, a0, cfg.leader.profile.clone(), cfg.leader.start_position),
            (None, None) => Err(Error::InvalidConfig("leader needs tau or a0".into())),
        };
        match res {
            Ok(mut l) if l.dim() == n => {
                if let Some(e) = cfg.leader.eps0 {
                    l.eps0 = e;
                }
                Some(l)
            }
            Ok(_) => {
                v.push(Violation::new("LEADER", format!("leader state dimension differs from {n}")));
                None
            }
            Err(e) => {
                v.push(Violation::new("LEADER", e.to_string()));
                None
            }
        }
    };

    let mut agents = Vec::new();
    let topo_ok = topology.n_followers() == nf && topology.validate().is_ok();
    let gains_ok = cfg.controller.violations(n).is_empty();
    for a in &cfg.agents {
        let plant = match plant::build_matrices(a, n) {
            Ok(m) => m,
            Err(e) => {
                v.push(Violation::new("AGENT_MODEL", format!("agent {}: {e}", a.index)));
                continue;
            }
        };
        if gains_ok {
            let margin = cfg.controller.k_u_margin(plant.b_w.norm(), a.bounds.omega_star, a.bounds.u_d_star);
            if margin < 0.0 {
                v.push(Violation::new(
                    "KU_CONDITION",
                    format!(
                        "agent {}: ‖K_u‖ must be >= ‖B_w‖ω* + u_d* (short by {})",
                        a.index, -margin
                    ),
                ));
            }
        }
        if cfg.observer.xi > 1.0 && cfg.observer.k_o.len() == n {
            if let Ok(c) = observer::check_gain_condition(&cfg.observer, a.bounds.sigma_d_star, a.bounds.eta_star) {
                if !c.satisfied {
                    v.push(Violation::new(
                        "OBSERVER_GAIN",
                        format!(
                            "agent {}: min K_o must exceed ξ(σ_d* + 2η*) (short by {})",
                            a.index, -c.margin
                        ),
                    ));
                }
            }
        }
        if !topo_ok || a.index == 0 || a.index > nf {
            continue;
        }
        let (design, input_scale) = if cfg.input_normalization {
            plant.with_unit_input()
        } else {
            (plant.clone(), 1.0)
        };
        let degree = topology.in_degree(a.index)?;
        let prob = match RiccatiProblem::for_agent(&design, degree, cfg.psi.max(f64::MIN_POSITIVE)) {
            Ok(p) => p,
            Err(e) => {
                v.push(Violation::new("RICCATI", format!("agent {}: {e}", a.index)));
                continue;
            }
        };
        match riccati::solve_are(&prob) {
            Ok(sol) => agents.push(PreparedAgent {
                params: a.clone(),
                plant,
                design,
                input_scale,
                p: sol.p,
                g: prob.g,
                riccati_residual: sol.residual_norm,
            }),
            Err(e) => v.push(Violation::new("RICCATI", format!("agent {}: {e}", a.index))),
        }
    }

    let schedule = match &cfg.dos {
        None => None,
        Some(spec) => {
            let built = match spec {
                DosSpec::Schedule(s) => Ok(s.clone()),
                DosSpec::Generate(g) => {
                    let mut g = g.clone();
                    if g.horizon == 0.0 {
                        g.horizon = cfg.horizon;
                    }
                    dos::generate_schedule(&g)
                }
            };
            match built {
                Ok(s) => {
                    if (s.params.packet_period - cfg.packet_period).abs() > 1e-12 {
                        v.push(Violation::new("DOS", "schedule packet period differs from the scenario's"));
                    }
                    for a in s.agents() {
                        if a == 0 || a > nf {
                            v.push(Violation::new("DOS", format!("schedule targets unknown agent {a}")));
                        }
                    }
                    match dos::validate_schedule(&s, 1000) {
                        Ok(Ok(())) => {}
                        Ok(Err(viol)) => v.push(Violation::new("DOS", viol.to_string())),
                        Err(e) => v.push(Violation::new("DOS", e.to_string())),
                    }
                    Some(s)
                }
                Err(e) => {
                    v.push(Violation::new("DOS", e.to_string()));
                    None
                }
            }
        }
    };

    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    Ok(Prepared {
        cfg: cfg.clone(),
        topology,
        leader: leader.ok_or_else(|| Error::Invariant("leader missing".into()))?,
        agents,
        neural: neural.ok_or_else(|| Error::Invariant("neural config missing".into()))?,
        schedule,
        substeps: substeps.unwrap_or(1),
        ticks: ticks.unwrap_or(1),
    })
}

impl Prepared {
    pub fn agent(&self, i: usize) -> &PreparedAgent {
        &self.agents[i - 1]
    }

    pub fn d0(&self) -> Vector {
        Vector::from_column_slice(&self.cfg.controller.d0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_platoon_prepares() {
        let p = prepare(&ScenarioConfig::platoon_default()).unwrap();
        assert_eq!(p.agents.len(), 5);
        assert_eq!(p.substeps, 1);
        assert_eq!(p.ticks, 50000);
        for a in &p.agents {
            assert!(a.riccati_residual.is_finite());
        }
    }

    #[test]
    fn json_round_trip() {
        let c = ScenarioConfig::platoon_attack_default();
        let back = ScenarioConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn itemized_violations() {
        let mut c = ScenarioConfig::platoon_default();
        c.controller.k_c = vec![0.9; 3];
        c.controller.rho = 0.5;
        c.dt = 0.003;
        let Err(Error::Config(v)) = prepare(&c) else {
            panic!("expected config violations")
        };
        let codes: Vec<&str> = v.iter().map(|x| x.code.as_str()).collect();
        assert!(codes.contains(&"KC_DIAGONAL"));
        assert!(codes.contains(&"RHO"));
        assert!(codes.contains(&"STEP"));
    }

    #[test]
    fn observer_gain_condition_enforced() {
        let mut c = ScenarioConfig::platoon_default();
        c.observer.k_o = vec![30.0; 3];
        let Err(Error::Config(v)) = prepare(&c) else {
            panic!("expected config violations")
        };
        assert!(v.iter().any(|x| x.code == "OBSERVER_GAIN"));
    }
}
