//! Instance types and their text formats.
//!
//! Two instance kinds exist side by side: `HcpInstance` is a directed graph for
//! Hamiltonian-cycle questions, `TspInstance` a dense cost matrix for tours.
//! TSP instances use a default-fill convention: every arc not listed in the
//! text format costs `large`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing n= header before first arc line")]
    MissingHeader,
    #[error("line {line}: duplicate arc {i} -> {j}")]
    Duplicate { line: usize, i: NodeId, j: NodeId },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> InstanceError {
    InstanceError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Dense asymmetric TSP instance over nodes 1..=n.
///
/// `origin` is where tours are anchored when counting and staging. `source`
/// and `sink` are optional designated entry/exit nodes; reductions produced by
/// this crate set them, hand-written instances usually leave them out.
#[derive(Clone, PartialEq, Eq)]
pub struct TspInstance {
    pub n: usize,
    pub large: i64,
    pub origin: NodeId,
    pub source: Option<NodeId>,
    pub sink: Option<NodeId>,
    cost: Vec<i64>,
}

impl TspInstance {
    pub fn new(n: usize, large: i64) -> Self {
        assert!(n >= 2, "instance needs at least 2 nodes");
        assert!(large > 0, "large cost must be positive");
        TspInstance {
            n,
            large,
            origin: 1,
            source: None,
            sink: None,
            cost: vec![large; (n + 1) * (n + 1)],
        }
    }

    #[inline]
    pub fn cost(&self, i: NodeId, j: NodeId) -> i64 {
        debug_assert!(i >= 1 && i <= self.n && j >= 1 && j <= self.n);
        self.cost[i * (self.n + 1) + j]
    }

    pub fn set_cost(&mut self, i: NodeId, j: NodeId, c: i64) {
        assert!(i >= 1 && i <= self.n && j >= 1 && j <= self.n && i != j);
        self.cost[i * (self.n + 1) + j] = c;
    }

    pub fn set_cost_sym(&mut self, i: NodeId, j: NodeId, c: i64) {
        self.set_cost(i, j, c);
        self.set_cost(j, i, c);
    }

    /// An arc is small when it is cheaper than the default fill.
    #[inline]
    pub fn is_small(&self, i: NodeId, j: NodeId) -> bool {
        i != j && self.cost(i, j) < self.large
    }

    pub fn small_out(&self, i: NodeId) -> Vec<NodeId> {
        (1..=self.n).filter(|&j| self.is_small(i, j)).collect()
    }

    pub fn small_in(&self, j: NodeId) -> Vec<NodeId> {
        (1..=self.n).filter(|&i| self.is_small(i, j)).collect()
    }

    /// Count of matrix entries that differ from the default fill.
    pub fn listed_entries(&self) -> usize {
        let mut k = 0;
        for i in 1..=self.n {
            for j in 1..=self.n {
                if i != j && self.cost(i, j) != self.large {
                    k += 1;
                }
            }
        }
        k
    }

    pub fn tour_value(&self, order: &[NodeId]) -> i64 {
        assert_eq!(order.len(), self.n);
        let mut v = 0;
        for k in 0..self.n {
            v += self.cost(order[k], order[(k + 1) % self.n]);
        }
        v
    }

    pub fn tour_large_arcs(&self, order: &[NodeId]) -> usize {
        (0..self.n)
            .filter(|&k| !self.is_small(order[k], order[(k + 1) % self.n]))
            .count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "large={}", self.large);
        if self.origin != 1 {
            let _ = writeln!(s, "origin={}", self.origin);
        }
        if let Some(v) = self.source {
            let _ = writeln!(s, "source={v}");
        }
        if let Some(v) = self.sink {
            let _ = writeln!(s, "sink={v}");
        }
        for i in 1..=self.n {
            for j in 1..=self.n {
                if i != j && self.cost(i, j) != self.large {
                    let _ = writeln!(s, "{} {} {}", i, j, self.cost(i, j));
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, InstanceError> {
        let mut n: Option<usize> = None;
        let mut large: i64 = 200;
        let mut origin: NodeId = 1;
        let mut source = None;
        let mut sink = None;
        let mut arcs: Vec<(usize, NodeId, NodeId, i64)> = Vec::new();
        let mut seen: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            if let Some((key, val)) = stripped.split_once('=') {
                let key = key.trim();
                let val = val.trim();
                let parse = |what: &str| -> Result<usize, InstanceError> {
                    val.parse::<usize>()
                        .map_err(|_| parse_err(line, format!("bad {what} value {val:?}")))
                };
                match key {
                    "n" => {
                        if !arcs.is_empty() {
                            return Err(parse_err(line, "n= header after arc lines"));
                        }
                        let v = parse("n")?;
                        if v < 2 {
                            return Err(parse_err(line, "n must be at least 2"));
                        }
                        n = Some(v);
                    }
                    "large" => {
                        let v = val
                            .parse::<i64>()
                            .map_err(|_| parse_err(line, format!("bad large value {val:?}")))?;
                        if v <= 0 {
                            return Err(parse_err(line, "large must be positive"));
                        }
                        large = v;
                    }
                    "origin" => origin = parse("origin")?,
                    "source" => source = Some(parse("source")?),
                    "sink" => sink = Some(parse("sink")?),
                    _ => return Err(parse_err(line, format!("unknown header {key:?}"))),
                }
                continue;
            }
            let mut parts = stripped.split_whitespace();
            let (i, j, c) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(i), Some(j), Some(c), None) => (i, j, c),
                _ => return Err(parse_err(line, format!("expected `i j cost`, got {stripped:?}"))),
            };
            let i: NodeId = i
                .parse()
                .map_err(|_| parse_err(line, format!("bad node id {i:?}")))?;
            let j: NodeId = j
                .parse()
                .map_err(|_| parse_err(line, format!("bad node id {j:?}")))?;
            let c: i64 = c
                .parse()
                .map_err(|_| parse_err(line, format!("bad cost {c:?}")))?;
            if n.is_none() {
                return Err(InstanceError::MissingHeader);
            }
            arcs.push((line, i, j, c));
        }

        let n = n.ok_or(InstanceError::MissingHeader)?;
        let check_node = |line: usize, v: NodeId, what: &str| -> Result<(), InstanceError> {
            if v < 1 || v > n {
                Err(parse_err(line, format!("{what} {v} out of range 1..={n}")))
            } else {
                Ok(())
            }
        };
        check_node(0, origin, "origin").map_err(|_| parse_err(1, "origin out of range"))?;
        if let Some(v) = source {
            if v < 1 || v > n {
                return Err(parse_err(1, "source out of range"));
            }
        }
        if let Some(v) = sink {
            if v < 1 || v > n {
                return Err(parse_err(1, "sink out of range"));
            }
        }

        let mut t = TspInstance::new(n, large);
        t.origin = origin;
        t.source = source;
        t.sink = sink;
        for (line, i, j, c) in arcs {
            check_node(line, i, "node")?;
            check_node(line, j, "node")?;
            if i == j {
                return Err(parse_err(line, format!("self-loop {i} -> {j}")));
            }
            if !seen.insert((i, j)) {
                return Err(InstanceError::Duplicate { line, i, j });
            }
            t.set_cost(i, j, c);
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<(), InstanceError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, InstanceError> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

impl std::fmt::Debug for TspInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "TspInstance(n={}, large={}, listed={})",
            self.n,
            self.large,
            self.listed_entries()
        )
    }
}

/// Directed graph for Hamiltonian-cycle questions.
///
/// Adjacency lists keep insertion order; reductions that attach split-node
/// members to neighbors rely on that order being meaningful.
#[derive(Clone, Debug)]
pub struct HcpInstance {
    pub n: usize,
    adj: Vec<Vec<NodeId>>,
}

impl HcpInstance {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        HcpInstance {
            n,
            adj: vec![Vec::new(); n + 1],
        }
    }

    pub fn add_arc(&mut self, i: NodeId, j: NodeId) {
        assert!(i >= 1 && i <= self.n && j >= 1 && j <= self.n, "node out of range");
        assert_ne!(i, j, "self-loop");
        assert!(!self.adj[i].contains(&j), "duplicate arc {i} -> {j}");
        self.adj[i].push(j);
    }

    pub fn add_edge(&mut self, i: NodeId, j: NodeId) {
        self.add_arc(i, j);
        self.add_arc(j, i);
    }

    pub fn out(&self, i: NodeId) -> &[NodeId] {
        &self.adj[i]
    }

    pub fn has_arc(&self, i: NodeId, j: NodeId) -> bool {
        self.adj[i].contains(&j)
    }

    pub fn arc_count(&self) -> usize {
        self.adj.iter().map(|v| v.len()).sum()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        (1..=self.n).flat_map(move |i| self.adj[i].iter().map(move |&j| (i, j)))
    }
}
