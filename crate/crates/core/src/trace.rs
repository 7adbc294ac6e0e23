//! Simulation trace: one row per packet tick per agent (leader is agent 0), with CSV IO.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub agent: usize,
    pub x: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub e: Vec<f64>,
    pub e_o: Vec<f64>,
    /// Virtual-disturbance estimate in force; the held value while `eps` is set.
    pub u_hat_d: Vec<f64>,
    /// Physical input applied over the following packet period.
    pub u: f64,
    /// Attack-detection flag.
    pub eps: bool,
    pub held: bool,
    /// Packet delivered at this tick.
    pub pkt: bool,
    pub eta_norm: f64,
    pub v: f64,
    pub v_o: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub state_dim: usize,
    /// Leader plus followers.
    pub agents: usize,
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn new(state_dim: usize, agents: usize) -> Self {
        Self {
            state_dim,
            agents,
            rows: Vec::new(),
        }
    }

    pub fn n_ticks(&self) -> usize {
        self.rows.len() / self.agents.max(1)
    }

    pub fn row(&self, tick: usize, agent: usize) -> &TraceRow {
        &self.rows[tick * self.agents + agent]
    }

    pub fn series(&self, agent: usize) -> impl Iterator<Item = &TraceRow> + '_ {
        self.rows.iter().skip(agent).step_by(self.agents.max(1))
    }

    pub fn times(&self) -> Vec<f64> {
        self.series(0).map(|r| r.t).collect()
    }

    pub fn last(&self, agent: usize) -> Option<&TraceRow> {
        let k = self.n_ticks();
        (k > 0).then(|| self.row(k - 1, agent))
    }

    /// Same length per agent, strictly increasing time, agent order within a tick.
    pub fn check(&self) -> Result<()> {
        if self.agents == 0 || self.rows.len() % self.agents != 0 {
            return Err(Error::Invariant("trace rows do not form whole ticks".into()));
        }
        let mut prev = f64::NEG_INFINITY;
        for k in 0..self.n_ticks() {
            let t = self.row(k, 0).t;
            if !(t > prev) {
                return Err(Error::Invariant(format!("time not increasing at tick {k}")));
            }
            prev = t;
            for a in 0..self.agents {
                let r = self.row(k, a);
                if r.agent != a || r.t != t {
                    return Err(Error::Invariant(format!("row order broken at tick {k}")));
                }
                let n = self.state_dim;
                if r.x.len() != n || r.x_hat.len() != n || r.e.len() != n || r.e_o.len() != n || r.u_hat_d.len() != n {
                    return Err(Error::Invariant(format!("row width wrong at tick {k}")));
                }
            }
        }
        Ok(())
    }

    pub fn header(n: usize) -> Vec<String> {
        let mut h = vec!["t".to_string(), "agent".to_string()];
        for prefix in ["x", "xhat", "e", "eo", "ud"] {
            for l in 1..=n {
                h.push(format!("{prefix}{l}"));
            }
        }
        for c in ["u", "eps", "held", "pkt", "eta_norm", "V", "Vo"] {
            h.push(c.to_string());
        }
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(Self::header(self.state_dim))?;
        let flag = |b: bool| if b { "1" } else { "0" };
        for r in &self.rows {
            let mut rec: Vec<String> = Vec::with_capacity(2 + 5 * self.state_dim + 7);
            rec.push(r.t.to_string());
            rec.push(r.agent.to_string());
            for vs in [&r.x, &r.x_hat, &r.e, &r.e_o, &r.u_hat_d] {
                rec.extend(vs.iter().map(|v| v.to_string()));
            }
            rec.push(r.u.to_string());
            rec.push(flag(r.eps).into());
            rec.push(flag(r.held).into());
            rec.push(flag(r.pkt).into());
            rec.push(r.eta_norm.to_string());
            rec.push(r.v.to_string());
            rec.push(r.v_o.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Invariant(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header.len() < 9 || (header.len() - 9) % 5 != 0 {
            return Err(Error::InvalidArgument(format!("unexpected trace header with {} columns", header.len())));
        }
        let n = (header.len() - 9) / 5;
        if header != Self::header(n) {
            return Err(Error::InvalidArgument("trace header does not match the expected columns".into()));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")))
        };
        let flag = |s: &str| -> Result<bool> {
            match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(Error::InvalidArgument(format!("bad flag {s:?}"))),
            }
        };
        let mut rows = Vec::new();
        let mut max_agent = 0;
        for rec in rd.records() {
            let rec = rec?;
            let f = |i: usize| rec.get(i).unwrap_or("");
            let agent: usize = f(1)
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("bad agent index: {e}")))?;
            max_agent = max_agent.max(agent);
            let block = |b: usize| -> Result<Vec<f64>> { (0..n).map(|l| num(f(2 + b * n + l))).collect() };
            let base = 2 + 5 * n;
            rows.push(TraceRow {
                t: num(f(0))?,
                agent,
                x: block(0)?,
                x_hat: block(1)?,
                e: block(2)?,
                e_o: block(3)?,
                u_hat_d: block(4)?,
                u: num(f(base))?,
                eps: flag(f(base + 1))?,
                held: flag(f(base + 2))?,
                pkt: flag(f(base + 3))?,
                eta_norm: num(f(base + 4))?,
                v: num(f(base + 5))?,
                v_o: num(f(base + 6))?,
            });
        }
        let trace = Self {
            state_dim: n,
            agents: max_agent + 1,
            rows,
        };
        trace.check()?;
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, agent: usize) -> TraceRow {
        TraceRow {
            t,
            agent,
            x: vec![0.1, 1.0 / 3.0],
            x_hat: vec![f64::MIN_POSITIVE, -0.0],
            e: vec![1e300, 2.5],
            e_o: vec![0.0, 0.0],
            u_hat_d: vec![-7.25, 0.0],
            u: std::f64::consts::PI,
            eps: agent == 1,
            held: false,
            pkt: true,
            eta_norm: 0.3,
            v: 1e-17,
            v_o: 2.0,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut tr = SimTrace::new(2, 2);
        for k in 0..3 {
            tr.rows.push(row(k as f64 * 0.01, 0));
            tr.rows.push(row(k as f64 * 0.01, 1));
        }
        let s = tr.to_csv_string().unwrap();
        let back = SimTrace::read_csv(s.as_bytes()).unwrap();
        assert_eq!(back, tr);
        assert_eq!(back.to_csv_string().unwrap(), s);
        assert!(s.starts_with("t,agent,x1,x2,xhat1,xhat2,e1,e2,eo1,eo2,ud1,ud2,u,eps,held,pkt,eta_norm,V,Vo\n"));
    }

    #[test]
    fn rejects_bad_order() {
        let mut tr = SimTrace::new(2, 2);
        tr.rows.push(row(0.0, 0));
        tr.rows.push(row(0.0, 1));
        tr.rows.push(row(0.0, 0));
        tr.rows.push(row(0.0, 1));
        assert!(tr.check().is_err());
    }
}
