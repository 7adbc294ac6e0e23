//! Directed communication graph. Node 0 is the leader; nodes 1..=N are followers.
//!
//! `adjacency[i][j] == 1` means node `i` receives information from node `j`.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<u8>>", into = "Vec<Vec<u8>>")]
pub struct Topology {
    n_followers: usize,
    adjacency: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyViolation {
    LeaderRowNonzero { column: usize },
    SelfLoop { node: usize },
    Unreachable { node: usize },
}

impl fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LeaderRowNonzero { column } => {
                write!(f, "leader row nonzero at column {column}")
            }
            Self::SelfLoop { node } => write!(f, "self-loop at node {node}"),
            Self::Unreachable { node } => write!(f, "node {node} unreachable from root"),
        }
    }
}

impl Topology {
    /// Builds from a square 0/1 matrix. Graph invariants are checked by [`Topology::validate`],
    /// not here, so that malformed graphs can still be inspected.
    pub fn from_adjacency(rows: Vec<Vec<u8>>) -> Result<Self> {
        let dim = rows.len();
        if dim < 2 {
            return Err(Error::InvalidArgument(
                "adjacency needs at least the leader and one follower".into(),
            ));
        }
        let mut adjacency = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "adjacency row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            for (j, &a) in row.iter().enumerate() {
                if a > 1 {
                    return Err(Error::InvalidArgument(format!(
                        "adjacency entry ({i},{j}) = {a}; only 0/1 weights are supported"
                    )));
                }
                adjacency.push(a);
            }
        }
        Ok(Self {
            n_followers: dim - 1,
            adjacency,
        })
    }

    /// Leader–predecessor–follower graph: follower `i` hears the leader and follower `i-1`.
    pub fn build_lpf(n_followers: usize) -> Result<Self> {
        if n_followers == 0 {
            return Err(Error::InvalidArgument("LPF topology needs at least one follower".into()));
        }
        let dim = n_followers + 1;
        let mut adjacency = vec![0u8; dim * dim];
        for i in 1..dim {
            adjacency[i * dim] = 1;
            if i >= 2 {
                adjacency[i * dim + i - 1] = 1;
            }
        }
        Ok(Self {
            n_followers,
            adjacency,
        })
    }

    pub fn n_followers(&self) -> usize {
        self.n_followers
    }

    pub fn dim(&self) -> usize {
        self.n_followers + 1
    }

    pub fn alpha(&self, i: usize, j: usize) -> u8 {
        self.adjacency[i * self.dim() + j]
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.adjacency.chunks(self.dim()).map(<[u8]>::to_vec).collect()
    }

    /// Every violated invariant; empty means the graph is usable.
    pub fn validate(&self) -> std::result::Result<(), Vec<TopologyViolation>> {
        let dim = self.dim();
        let mut out = Vec::new();
        for j in 0..dim {
            if self.alpha(0, j) != 0 {
                out.push(TopologyViolation::LeaderRowNonzero { column: j });
            }
        }
        for i in 0..dim {
            if self.alpha(i, i) != 0 {
                out.push(TopologyViolation::SelfLoop { node: i });
            }
        }
        let reached = self.reachable_from_leader();
        for (node, ok) in reached.iter().enumerate() {
            if !ok {
                out.push(TopologyViolation::Unreachable { node });
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    /// Breadth-first search along information flow j → i (α_ij = 1).
    pub fn reachable_from_leader(&self) -> Vec<bool> {
        let dim = self.dim();
        let mut seen = vec![false; dim];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(j) = queue.pop_front() {
            for i in 0..dim {
                if !seen[i] && self.alpha(i, j) == 1 {
                    seen[i] = true;
                    queue.push_back(i);
                }
            }
        }
        seen
    }

    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        self.check_follower(i)?;
        Ok((0..self.dim()).filter(|&j| self.alpha(i, j) == 1).collect())
    }

    /// Σ_j α_ij.
    pub fn in_degree(&self, i: usize) -> Result<usize> {
        Ok(self.neighbors(i)?.len())
    }

    fn check_follower(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n_followers {
            return Err(Error::IndexOutOfRange {
                index: i,
                max: self.n_followers,
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<Vec<u8>>> for Topology {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u8>>) -> Result<Self> {
        Self::from_adjacency(rows)
    }
}

impl From<Topology> for Vec<Vec<u8>> {
    fn from(t: Topology) -> Self {
        t.rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lpf_single_follower() {
        let t = Topology::build_lpf(1).unwrap();
        assert_eq!(t.rows()[1], vec![1, 0]);
    }

    #[test]
    fn lpf_three_followers() {
        let t = Topology::build_lpf(3).unwrap();
        assert_eq!(
            t.rows(),
            vec![
                vec![0, 0, 0, 0],
                vec![1, 0, 0, 0],
                vec![1, 1, 0, 0],
                vec![1, 0, 1, 0],
            ]
        );
    }

    #[test]
    fn lpf_zero_followers_rejected() {
        assert!(matches!(Topology::build_lpf(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn leader_row_violation() {
        let t = Topology::from_adjacency(vec![vec![0, 1], vec![1, 0]]).unwrap();
        let v = t.validate().unwrap_err();
        assert!(v.contains(&TopologyViolation::LeaderRowNonzero { column: 1 }));
        assert!(v[0].to_string().contains("leader row nonzero"));
    }

    #[test]
    fn disconnected_followers_unreachable() {
        // followers 1 and 2 only hear each other
        let t = Topology::from_adjacency(vec![vec![0, 0, 0], vec![0, 0, 1], vec![0, 1, 0]]).unwrap();
        let v = t.validate().unwrap_err();
        assert_eq!(
            v,
            vec![
                TopologyViolation::Unreachable { node: 1 },
                TopologyViolation::Unreachable { node: 2 },
            ]
        );
        assert!(v[0].to_string().contains("unreachable from root"));
    }

    #[test]
    fn self_loop_reported() {
        let t = Topology::from_adjacency(vec![vec![0, 0], vec![1, 1]]).unwrap();
        assert_eq!(t.validate().unwrap_err(), vec![TopologyViolation::SelfLoop { node: 1 }]);
    }

    #[test]
    fn neighbor_sets() {
        let t = Topology::build_lpf(3).unwrap();
        assert_eq!(t.neighbors(1).unwrap(), vec![0]);
        assert_eq!(t.neighbors(3).unwrap(), vec![0, 2]);
        assert!(matches!(t.neighbors(4), Err(Error::IndexOutOfRange { index: 4, max: 3 })));
        assert!(t.neighbors(0).is_err());
    }

    #[test]
    fn rejects_weights_and_ragged_rows() {
        assert!(Topology::from_adjacency(vec![vec![0, 0], vec![2, 0]]).is_err());
        assert!(Topology::from_adjacency(vec![vec![0, 0], vec![1]]).is_err());
    }

    #[test]
    fn json_array_of_arrays() {
        let t = Topology::build_lpf(2).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, "[[0,0,0],[1,0,0],[1,1,0]]");
        let back: Topology = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    /// Depth-first reachability, written independently of the BFS used by `validate`.
    fn dfs_reach(rows: &[Vec<u8>]) -> Vec<bool> {
        fn visit(rows: &[Vec<u8>], j: usize, seen: &mut Vec<bool>) {
            seen[j] = true;
            for i in 0..rows.len() {
                if rows[i][j] == 1 && !seen[i] {
                    visit(rows, i, seen);
                }
            }
        }
        let mut seen = vec![false; rows.len()];
        visit(rows, 0, &mut seen);
        seen
    }

    proptest! {
        #[test]
        fn lpf_always_valid(n in 1usize..40) {
            prop_assert!(Topology::build_lpf(n).unwrap().validate().is_ok());
        }

        #[test]
        fn validity_matches_dfs(bits in proptest::collection::vec(0u8..2, 25)) {
            let dim = 5;
            let mut rows: Vec<Vec<u8>> = bits.chunks(dim).map(<[u8]>::to_vec).collect();
            for j in 0..dim { rows[0][j] = 0; }
            for i in 0..dim { rows[i][i] = 0; }
            let t = Topology::from_adjacency(rows.clone()).unwrap();
            let all_reached = dfs_reach(&rows).iter().all(|&r| r);
            prop_assert_eq!(t.validate().is_ok(), all_reached);
        }
    }
}
