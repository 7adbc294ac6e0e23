//! Fixed-step simulation of the platoon: plant and weights by RK4, observer by implicit
//! Euler, control sampled once per packet tick and held in between.

use crate::config::{prepare, Prepared, PreparedAgent, ScenarioConfig};
use crate::controller::{
    self, ControlTerms, DosDetector, ExogenousInputs, HeldControl, HoldSlot, InputMechanism, Transition,
};
use crate::error::{Error, Result};
use crate::estimator;
use crate::linalg::{Mat, Vector};
use crate::observer::{self, ImplicitStep};
use crate::plant::{self, Disturbance};
use crate::trace::{SimTrace, TraceRow};

/// Classical fourth-order Runge-Kutta step of `y' = f(t, y)`.
pub fn rk4_step<F>(f: F, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let axpy = |a: &[f64], k: &[f64], h: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + h * k).collect() };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * dt, &axpy(y, &k1, 0.5 * dt))?;
    let k3 = f(t + 0.5 * dt, &axpy(y, &k2, 0.5 * dt))?;
    let k4 = f(t + dt, &axpy(y, &k3, dt))?;
    Ok((0..y.len())
        .map(|l| y[l] + dt / 6.0 * (k1[l] + 2.0 * k2[l] + 2.0 * k3[l] + k4[l]))
        .collect())
}

/// What the last delivered packet carried.
#[derive(Debug, Clone)]
struct Delivered {
    t: f64,
    terms: ControlTerms,
    e_i: Vector,
    e_o: Vector,
    neighbors: Vec<Vector>,
}

struct AgentRun {
    index: usize,
    x: Vector,
    x_hat: Vector,
    eta: Mat,
    frozen: bool,
    detector: DosDetector,
    hold: HoldSlot,
    /// Command on the design channel currently applied.
    applied: f64,
    /// Actuation the observer mirrors, consistent with `applied`.
    drive: Vector,
    last: Option<Delivered>,
    dist: Disturbance,
}

fn blowup(t: f64, agent: usize, what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup {
            t,
            agent,
            what: what.to_string(),
        })
    }
}

fn quad(p: &Mat, e: &Vector) -> f64 {
    (e.transpose() * p * e)[0]
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

/// Validates the config and runs it.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimTrace> {
    let prepared = prepare(cfg)?;
    run_prepared(&prepared)
}

pub fn run_prepared(pr: &Prepared) -> Result<SimTrace> {
    let cfg = &pr.cfg;
    let n = cfg.state_dim;
    let nf = cfg.n_followers();
    let h = cfg.packet_period;
    let m = pr.substeps;
    let d0 = &cfg.controller.d0;
    let neurons = pr.neural.neurons;

    let x0_init = pr.leader.state(0.0);
    let mut runs: Vec<AgentRun> = pr
        .agents
        .iter()
        .map(|a| {
            let i = a.params.index;
            let x = Vector::from_fn(n, |l, _| x0_init[l] + i as f64 * d0[l] + cfg.initial_offset[l]);
            let x_hat = &x + Vector::from_column_slice(&cfg.observer_offset);
            AgentRun {
                index: i,
                x,
                x_hat,
                eta: Mat::zeros(n, neurons),
                frozen: false,
                detector: DosDetector::new(m, cfg.detection_window),
                hold: HoldSlot::default(),
                applied: 0.0,
                drive: Vector::zeros(n),
                last: None,
                dist: Disturbance::new(cfg.disturbance.clone(), a.params.bounds.omega_star, i, cfg.seed),
            }
        })
        .collect();

    let mut trace = SimTrace::new(n, nf + 1);
    trace.rows.reserve((pr.ticks as usize + 1) * (nf + 1));

    for k in 0..=pr.ticks {
        let t = k as f64 * h;
        let s0 = k * m;
        let x0 = pr.leader.state(t);
        let f0 = pr.leader.f0(t, &x0);

        let mut errors: Vec<Option<Vector>> = vec![None; nf + 1];
        for r in &runs {
            errors[r.index] = Some(controller::error_vector(&r.x, &x0, r.index, d0)?);
        }

        let mut rows = Vec::with_capacity(nf);
        for (r, a) in runs.iter_mut().zip(&pr.agents) {
            let i = r.index;
            let e_i = errors[i].clone().expect("every follower has an error");
            let e_o = &r.x - &r.x_hat;
            let live_ud = observer::virtual_disturbance(&cfg.observer.k_o, &a.p, &e_o);
            let neighbors = controller::gather_neighbors(&pr.topology, i, &errors, n)?;
            let consensus =
                controller::consensus_vector(&a.p, &e_i, &neighbors, &cfg.controller.k_c, cfg.controller.rho)?;
            let phi = estimator::activations(&pr.neural, &r.x);
            let f_hat = estimator::estimate(&r.eta, &phi)?;
            let u_bar = controller::exogenous_control(&ExogenousInputs {
                f_hat,
                f0,
                k_u: &cfg.controller.k_u,
                p: &a.p,
                e_i: &e_i,
                a_i: &a.design.a,
                a_0: &pr.leader.matrices.a,
                x_0: &x0,
                index: i,
                d0,
                b_f: &a.design.b_f,
                b_f0: &pr.leader.matrices.b_f,
            });
            let terms = controller::control_nominal(&a.design, &cfg.controller, consensus, u_bar, live_ud.clone())?;
            blowup(t, i, "control", &[terms.u])?;

            let delivered = k == 0
                || match &pr.schedule {
                    Some(s) => !s.blocks(i, k)?,
                    None => true,
                };
            if delivered {
                if r.detector.packet(s0) == Transition::Release {
                    r.hold.release();
                    r.frozen = false;
                }
                r.applied = terms.u;
                r.drive = observer::actuation_drive(&a.design, &terms.consensus, &terms.u_hat_d, &terms.u_bar);
                r.last = Some(Delivered {
                    t,
                    terms,
                    e_i: e_i.clone(),
                    e_o: e_o.clone(),
                    neighbors,
                });
            } else if cfg.input_mechanism == InputMechanism::Zero {
                r.applied = 0.0;
                r.drive = Vector::zeros(n);
            }

            let eps = r.detector.flag();
            let ud = match (eps, r.hold.get()) {
                (true, Some(hc)) => hc.terms.u_hat_d.clone(),
                _ => live_ud,
            };
            rows.push(TraceRow {
                t,
                agent: i,
                x: to_vec(&r.x),
                x_hat: to_vec(&r.x_hat),
                e: to_vec(&e_i),
                e_o: to_vec(&e_o),
                u_hat_d: to_vec(&ud),
                u: a.input_scale * r.applied,
                eps,
                held: r.hold.get().is_some(),
                pkt: delivered,
                eta_norm: r.eta.norm(),
                v: quad(&a.p, &e_i),
                v_o: quad(&a.p, &e_o),
            });
        }

        trace.rows.push(TraceRow {
            t,
            agent: 0,
            x: to_vec(&x0),
            x_hat: to_vec(&x0),
            e: vec![0.0; n],
            e_o: vec![0.0; n],
            u_hat_d: vec![0.0; n],
            u: 0.0,
            eps: false,
            held: false,
            pkt: true,
            eta_norm: 0.0,
            v: 0.0,
            v_o: 0.0,
        });
        trace.rows.extend(rows);

        if k == pr.ticks {
            break;
        }
        for r in runs.iter_mut() {
            advance_period(pr, pr.agent(r.index), r, k)?;
        }
    }
    Ok(trace)
}

/// Integrates one follower from tick `k` to tick `k + 1`.
fn advance_period(pr: &Prepared, a: &PreparedAgent, r: &mut AgentRun, k: u64) -> Result<()> {
    let cfg = &pr.cfg;
    let n = cfg.state_dim;
    let dt = cfg.dt;
    let m = pr.substeps;
    let i = r.index;
    let d0 = &cfg.controller.d0;
    let neurons = pr.neural.neurons;
    let u_phys = a.input_scale * r.applied;

    for j in 0..m {
        let s = k * m + j;
        let ts = s as f64 * dt;
        if r.detector.poll(s) == Transition::Onset {
            if let Some(last) = &r.last {
                r.hold.capture(HeldControl {
                    t_k: last.t,
                    detected_at: ts,
                    terms: last.terms.clone(),
                    e_i: last.e_i.clone(),
                    e_o: last.e_o.clone(),
                    neighbor_errors: last.neighbors.clone(),
                    eta_hat: r.eta.clone(),
                })?;
            }
            r.frozen = true;
        }

        let frozen = r.frozen;
        let deriv = |tt: f64, y: &[f64]| -> Result<Vec<f64>> {
            let x = Vector::from_column_slice(&y[..n]);
            let f = plant::true_nonlinearity(&a.params, &x);
            let w = r.dist.sample(tt);
            let dx = plant::follower_derivative(&a.plant, &x, u_phys, f, w)?;
            let mut out = Vec::with_capacity(y.len());
            out.extend(dx.iter());
            if frozen {
                out.extend(std::iter::repeat_n(0.0, n * neurons));
            } else {
                let x0 = pr.leader.state(tt);
                let e = controller::error_vector(&x, &x0, i, d0)?;
                let phi = estimator::activations(&pr.neural, &x);
                let rate = estimator::adaptation_rate(&pr.neural, &phi, &e, &a.p, &a.design.b_f)?;
                out.extend(rate.iter());
            }
            Ok(out)
        };
        let x_prev = r.x.clone();
        let mut y = to_vec(&r.x);
        y.extend(r.eta.iter());
        let y1 = rk4_step(deriv, ts, &y, dt)?;
        let t1 = (s + 1) as f64 * dt;
        blowup(t1, i, "plant state", &y1[..n])?;
        blowup(t1, i, "neural weights", &y1[n..])?;
        r.x = Vector::from_column_slice(&y1[..n]);
        r.eta = Mat::from_column_slice(n, neurons, &y1[n..]);

        let held_ud = if r.detector.flag() {
            r.hold.get().map(|hc| hc.terms.u_hat_d.clone())
        } else {
            None
        };
        // the estimation error changes slowly, so shifting by the plant increment is close
        let guess = &r.x_hat + (&r.x - &x_prev);
        let step = ImplicitStep {
            m: &a.design,
            p: &a.p,
            k_o: &cfg.observer.k_o,
            nn: &pr.neural,
            eta_hat: &r.eta,
            drive: &r.drive,
            x_next: &r.x,
            held_u_hat_d: held_ud.as_ref(),
            guess: Some(&guess),
        };
        r.x_hat = observer::implicit_step_robust(&step, &x_prev, &r.x_hat, dt).map_err(|e| match e {
            Error::Invariant(msg) => Error::NumericalBlowup {
                t: t1,
                agent: i,
                what: format!("observer: {msg}"),
            },
            other => other,
        })?;
        blowup(t1, i, "observer state", r.x_hat.as_slice())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{AgentModel, AgentParams, Bounds, DisturbanceKind, SpeedProfile};

    #[test]
    fn rk4_matches_exponential() {
        let f = |_t: f64, y: &[f64]| Ok(vec![-y[0]]);
        // one step reproduces the degree-4 Taylor polynomial, so the error is h⁵/120 to leading order
        let h: f64 = 0.1;
        let y = rk4_step(f, 0.0, &[1.0], h).unwrap();
        let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert!((y[0] - taylor).abs() < 1e-15);
        assert!((y[0] - (-h).exp()).abs() < 1e-7);
        let z = rk4_step(|_t: f64, _y: &[f64]| Ok(vec![0.0, 0.0]), 0.0, &[3.0, -2.0], 0.5).unwrap();
        assert_eq!(z, vec![3.0, -2.0]);
        assert!(rk4_step(f, 0.0, &[1.0], 0.0).is_err());
    }

    fn single_generic() -> ScenarioConfig {
        let mut c = ScenarioConfig::platoon_default();
        c.agents = vec![AgentParams {
            index: 1,
            model: AgentModel::Generic { a: -1.0, b: 1.0 },
            bounds: Bounds::default(),
        }];
        c.leader.tau = None;
        c.leader.a0 = Some(-1.0);
        c.leader.profile = SpeedProfile::new(vec![[0.0, 0.0], [10.0, 0.0]]).unwrap();
        c.controller.d0 = vec![0.0; 3];
        c.initial_offset = vec![0.0; 3];
        c.disturbance = DisturbanceKind::Zero;
        c.horizon = 0.5;
        c
    }

    #[test]
    fn equilibrium_stays_put() {
        let tr = run_scenario(&single_generic()).unwrap();
        tr.check().unwrap();
        for r in tr.series(1) {
            assert!(r.e.iter().all(|v| v.abs() < 1e-12), "{:?}", r.e);
        }
    }

    #[test]
    fn invalid_config_rejected_before_stepping() {
        let mut c = single_generic();
        c.controller.rho = 1.0;
        assert!(matches!(run_scenario(&c), Err(Error::Config(_))));
    }
}
