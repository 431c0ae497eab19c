//! Fractional stage-flow certificates and their construction.
//!
//! A certificate assigns a nonnegative rational to stage arcs (the x vector)
//! at a chosen flow constant F. Two construction plans are provided for
//! instances with a designated source and sink whose interior is a group of
//! nodes with weighted degree one:
//!
//!   balanced:   origin -> source at stage 1, source fans out at stage 2,
//!               the group circulates through stages 3..=n-2, everyone hops
//!               to the sink at stage n-1, sink returns at stage n. Satisfies
//!               every BASE row exactly.
//!   overlapped: same shape but the circulation runs one stage longer,
//!               through n-1, colliding with the sink hop. Stage n-1 carries
//!               a double load and the seams on both sides of it break, 96
//!               rows in all on the canonical instance. Kept because it is
//!               the natural first attempt and the verifier must call it out.
//!
//! The conditional-flow container (the y vector, keyed anchor -> probe) lives
//! here too; building y values is the lift module's job.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{NodeId, TspInstance};
use crate::model::{arc, StageArc};
use crate::rat::{int, parse_rat, rat, zero, Rat};

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("instance must designate origin, source and sink, pairwise distinct")]
    MissingDesignation,
    #[error("instance shape unsupported: {0}")]
    BadStructure(String),
    #[error("no stage weight for cost {cost} on arc ({i},{j})")]
    UnsupportedCost { i: NodeId, j: NodeId, cost: i64 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StagePlan {
    Balanced,
    Overlapped,
}

impl std::fmt::Display for StagePlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StagePlan::Balanced => "balanced",
            StagePlan::Overlapped => "overlapped",
        })
    }
}

impl std::str::FromStr for StagePlan {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "balanced" => Ok(StagePlan::Balanced),
            "overlapped" => Ok(StagePlan::Overlapped),
            _ => Err(format!("unknown stage plan {s:?} (expected balanced or overlapped)")),
        }
    }
}

/// Sparse x vector. Entries are stored as given, including structurally
/// invalid ones; validity is the verifier's concern, which lets damaged
/// certificates round-trip through files unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageFlow {
    pub f: Rat,
    entries: BTreeMap<StageArc, Rat>,
}

impl StageFlow {
    pub fn new(f: Rat) -> Self {
        StageFlow {
            f,
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, a: StageArc) -> Rat {
        self.entries.get(&a).copied().unwrap_or_else(zero)
    }

    pub fn set(&mut self, a: StageArc, v: Rat) {
        if v == zero() {
            self.entries.remove(&a);
        } else {
            self.entries.insert(a, v);
        }
    }

    pub fn add(&mut self, a: StageArc, v: Rat) {
        let w = self.get(a) + v;
        self.set(a, w);
    }

    pub fn iter(&self) -> impl Iterator<Item = (StageArc, Rat)> + '_ {
        self.entries.iter().map(|(a, v)| (*a, *v))
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Total cost carried by the vector. Out-of-range entries contribute
    /// nothing here; the verifier reports them separately.
    pub fn objective(&self, t: &TspInstance) -> Rat {
        let mut total = zero();
        for (a, v) in self.iter() {
            let (i, j) = (a.i(), a.j());
            if i >= 1 && i <= t.n && j >= 1 && j <= t.n && i != j {
                total += v * int(t.cost(i, j));
            }
        }
        total
    }

    /// Objective normalized by the flow constant: the cost of one unit.
    pub fn per_unit(&self, t: &TspInstance) -> Rat {
        self.objective(t) / self.f
    }

    pub fn stage_total(&self, s: usize) -> Rat {
        let mut total = zero();
        for (a, v) in self.iter() {
            if a.s() == s {
                total += v;
            }
        }
        total
    }

    /// Largest arc cost in the support, None for an empty vector.
    pub fn max_support_cost(&self, t: &TspInstance) -> Option<i64> {
        self.iter()
            .filter(|(a, _)| a.i() >= 1 && a.i() <= t.n && a.j() >= 1 && a.j() <= t.n && a.i() != a.j())
            .map(|(a, _)| t.cost(a.i(), a.j()))
            .max()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("F={}/{}\n", self.f.numer(), self.f.denom()));
        for (a, v) in self.iter() {
            out.push_str(&format!(
                "x {} {} {} {}/{}\n",
                a.i,
                a.s,
                a.j,
                v.numer(),
                v.denom()
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CertificateError> {
        let mut f: Option<Rat> = None;
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix("F=") {
                let v = parse_rat(rest).map_err(|msg| CertificateError::Parse { line, msg })?;
                f = Some(v);
                continue;
            }
            let mut it = body.split_whitespace();
            match it.next() {
                Some("x") => {}
                _ => {
                    return Err(CertificateError::Parse {
                        line,
                        msg: format!("expected x line, got {body:?}"),
                    })
                }
            }
            let mut idx3 = [0u16; 3];
            for slot in &mut idx3 {
                let tok = it.next().ok_or(CertificateError::Parse {
                    line,
                    msg: "short x line".into(),
                })?;
                *slot = tok.parse::<u16>().map_err(|e| CertificateError::Parse {
                    line,
                    msg: format!("bad index {tok:?}: {e}"),
                })?;
            }
            let vtok = it.next().ok_or(CertificateError::Parse {
                line,
                msg: "missing value".into(),
            })?;
            if it.next().is_some() {
                return Err(CertificateError::Parse {
                    line,
                    msg: "trailing tokens".into(),
                });
            }
            let v = parse_rat(vtok).map_err(|msg| CertificateError::Parse { line, msg })?;
            let a = StageArc {
                i: idx3[0],
                s: idx3[1],
                j: idx3[2],
            };
            if v != zero() {
                entries.insert(a, v);
            }
        }
        let f = f.ok_or(CertificateError::Parse {
            line: 0,
            msg: "missing F= header".into(),
        })?;
        Ok(StageFlow { f, entries })
    }

    pub fn save(&self, path: &Path) -> Result<(), CertificateError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CertificateError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Sparse y vector, keyed anchor then probe.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConditionalFlow {
    rows: BTreeMap<StageArc, BTreeMap<StageArc, Rat>>,
}

impl ConditionalFlow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, a: StageArc, b: StageArc) -> Rat {
        self.rows
            .get(&a)
            .and_then(|r| r.get(&b))
            .copied()
            .unwrap_or_else(zero)
    }

    pub fn set(&mut self, a: StageArc, b: StageArc, v: Rat) {
        if v == zero() {
            if let Some(r) = self.rows.get_mut(&a) {
                r.remove(&b);
                if r.is_empty() {
                    self.rows.remove(&a);
                }
            }
        } else {
            self.rows.entry(a).or_default().insert(b, v);
        }
    }

    pub fn add(&mut self, a: StageArc, b: StageArc, v: Rat) {
        let w = self.get(a, b) + v;
        self.set(a, b, w);
    }

    pub fn row(&self, a: StageArc) -> Option<&BTreeMap<StageArc, Rat>> {
        self.rows.get(&a)
    }

    pub fn anchors(&self) -> impl Iterator<Item = StageArc> + '_ {
        self.rows.keys().copied()
    }

    pub fn rows(&self) -> &BTreeMap<StageArc, BTreeMap<StageArc, Rat>> {
        &self.rows
    }

    pub fn entry_count(&self) -> usize {
        self.rows.values().map(|r| r.len()).sum()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (a, row) in &self.rows {
            for (b, v) in row {
                out.push_str(&format!(
                    "y {} {} {} {} {} {} {}/{}\n",
                    a.i,
                    a.s,
                    a.j,
                    b.i,
                    b.s,
                    b.j,
                    v.numer(),
                    v.denom()
                ));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CertificateError> {
        let mut out = ConditionalFlow::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut it = body.split_whitespace();
            match it.next() {
                Some("y") => {}
                _ => {
                    return Err(CertificateError::Parse {
                        line,
                        msg: format!("expected y line, got {body:?}"),
                    })
                }
            }
            let mut idx6 = [0u16; 6];
            for slot in &mut idx6 {
                let tok = it.next().ok_or(CertificateError::Parse {
                    line,
                    msg: "short y line".into(),
                })?;
                *slot = tok.parse::<u16>().map_err(|e| CertificateError::Parse {
                    line,
                    msg: format!("bad index {tok:?}: {e}"),
                })?;
            }
            let vtok = it.next().ok_or(CertificateError::Parse {
                line,
                msg: "missing value".into(),
            })?;
            if it.next().is_some() {
                return Err(CertificateError::Parse {
                    line,
                    msg: "trailing tokens".into(),
                });
            }
            let v = parse_rat(vtok).map_err(|msg| CertificateError::Parse { line, msg })?;
            let a = StageArc {
                i: idx6[0],
                s: idx6[1],
                j: idx6[2],
            };
            let b = StageArc {
                i: idx6[3],
                s: idx6[4],
                j: idx6[5],
            };
            if v != zero() {
                out.rows.entry(a).or_default().insert(b, v);
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<(), CertificateError> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CertificateError> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Interior nodes: everything except origin, source and sink. Requires the
/// designations to exist and be distinct.
pub fn group_nodes(t: &TspInstance) -> Result<Vec<NodeId>, CertificateError> {
    let (src, sink) = match (t.source, t.sink) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(CertificateError::MissingDesignation),
    };
    let o = t.origin;
    if src == sink || src == o || sink == o {
        return Err(CertificateError::MissingDesignation);
    }
    Ok((1..=t.n).filter(|&v| v != o && v != src && v != sink).collect())
}

/// Stage weight of an interior arc by cost: cost 1 carries 1/2, cost 2
/// carries 1/4. Chosen so a node with one cheap mate and one cheap partner,
/// or two cost-2 mates and one cheap partner, totals exactly one.
pub fn internal_weight(cost: i64) -> Option<Rat> {
    match cost {
        1 => Some(rat(1, 2)),
        2 => Some(rat(1, 4)),
        _ => None,
    }
}

struct PlanShape {
    group: Vec<NodeId>,
    /// interior small arcs with their stage weights
    weighted: Vec<(NodeId, NodeId, Rat)>,
}

fn plan_shape(t: &TspInstance) -> Result<PlanShape, CertificateError> {
    let group = group_nodes(t)?;
    if group.len() < 2 {
        return Err(CertificateError::BadStructure(
            "need at least two interior nodes".into(),
        ));
    }
    let o = t.origin;
    let src = t.source.unwrap();
    let sink = t.sink.unwrap();
    for (i, j, what) in [(o, src, "origin->source"), (sink, o, "sink->origin")] {
        if !t.is_small(i, j) {
            return Err(CertificateError::BadStructure(format!(
                "{what} arc must be cheap"
            )));
        }
    }
    for &g in &group {
        if !t.is_small(src, g) {
            return Err(CertificateError::BadStructure(format!(
                "source must reach interior node {g}"
            )));
        }
        if !t.is_small(g, sink) {
            return Err(CertificateError::BadStructure(format!(
                "interior node {g} must reach the sink"
            )));
        }
    }
    let in_group: Vec<bool> = {
        let mut v = vec![false; t.n + 1];
        for &g in &group {
            v[g] = true;
        }
        v
    };
    let mut weighted = Vec::new();
    let mut out_w = vec![zero(); t.n + 1];
    let mut in_w = vec![zero(); t.n + 1];
    for &u in &group {
        for &v in &group {
            if u == v || !t.is_small(u, v) {
                continue;
            }
            let c = t.cost(u, v);
            let w = internal_weight(c).ok_or(CertificateError::UnsupportedCost { i: u, j: v, cost: c })?;
            weighted.push((u, v, w));
            out_w[u] += w;
            in_w[v] += w;
        }
    }
    let _ = in_group;
    for &g in &group {
        if out_w[g] != int(1) || in_w[g] != int(1) {
            return Err(CertificateError::BadStructure(format!(
                "interior node {g} has weighted degree {}/{} out, {}/{} in (want 1)",
                out_w[g].numer(),
                out_w[g].denom(),
                in_w[g].numer(),
                in_w[g].denom()
            )));
        }
    }
    Ok(PlanShape { group, weighted })
}

/// Build the x vector for the chosen plan. The instance must designate
/// origin, source and sink, connect them cheaply, and give every interior
/// node weighted degree one; on the canonical counterexample both plans
/// produce 0/1-free strictly fractional interiors.
pub fn build_certificate(
    t: &TspInstance,
    f: Rat,
    plan: StagePlan,
) -> Result<StageFlow, CertificateError> {
    let shape = plan_shape(t)?;
    let n = t.n;
    let m = shape.group.len() as i64;
    let o = t.origin;
    let src = t.source.unwrap();
    let sink = t.sink.unwrap();
    let share = f / int(m);

    let last_internal = match plan {
        StagePlan::Balanced => n - 2,
        StagePlan::Overlapped => n - 1,
    };
    if last_internal < 3 {
        return Err(CertificateError::BadStructure(
            "instance too small for the stage plan".into(),
        ));
    }

    let mut x = StageFlow::new(f);
    x.set(arc(o, 1, src), f);
    for &g in &shape.group {
        x.set(arc(src, 2, g), share);
    }
    for s in 3..=last_internal {
        for &(u, v, w) in &shape.weighted {
            x.add(arc(u, s, v), share * w);
        }
    }
    for &g in &shape.group {
        x.add(arc(g, n - 1, sink), share);
    }
    x.set(arc(sink, n, o), f);
    Ok(x)
}

#[derive(Debug, Clone)]
pub struct EscapeReport {
    pub subsets_checked: u64,
    pub min_cross: Rat,
    pub witness: Vec<NodeId>,
}

/// Minimum outgoing aggregated flow over node subsets: every size up to
/// four exhaustively, plus seeded random larger subsets. A certificate that
/// leaves every such subset with positive flow cannot be starved by any of
/// the small cuts an integral tour must also cross.
pub fn escape_check(t: &TspInstance, x: &StageFlow, samples: usize, seed: u64) -> EscapeReport {
    assert!(t.n <= 63, "bitmask subsets need n <= 63");
    let n = t.n;
    let mut agg: BTreeMap<(NodeId, NodeId), Rat> = BTreeMap::new();
    for (a, v) in x.iter() {
        let (i, j) = (a.i(), a.j());
        if i >= 1 && i <= n && j >= 1 && j <= n && i != j {
            *agg.entry((i, j)).or_insert_with(zero) += v;
        }
    }
    let mut out_adj: Vec<Vec<(NodeId, Rat)>> = vec![Vec::new(); n + 1];
    for (&(i, j), &v) in &agg {
        out_adj[i].push((j, v));
    }

    let cross = |mask: u64| -> Rat {
        let mut total = zero();
        for i in 1..=n {
            if mask >> i & 1 == 1 {
                for &(j, v) in &out_adj[i] {
                    if mask >> j & 1 == 0 {
                        total += v;
                    }
                }
            }
        }
        total
    };

    let full: u64 = ((1u64 << n) - 1) << 1;
    let mut best: Option<(Rat, u64)> = None;
    let mut checked = 0u64;
    let consider = |mask: u64, best: &mut Option<(Rat, u64)>, checked: &mut u64| {
        if mask == 0 || mask == full {
            return;
        }
        let c = cross(mask);
        *checked += 1;
        if best.as_ref().map_or(true, |(b, _)| c < *b) {
            *best = Some((c, mask));
        }
    };

    // exhaustive small subsets
    for a in 1..=n {
        consider(1 << a, &mut best, &mut checked);
        for b in a + 1..=n {
            consider(1 << a | 1 << b, &mut best, &mut checked);
            for c in b + 1..=n {
                let m3 = 1u64 << a | 1 << b | 1 << c;
                consider(m3, &mut best, &mut checked);
                for d in c + 1..=n {
                    consider(m3 | 1 << d, &mut best, &mut checked);
                }
            }
        }
    }

    // sampled larger subsets, when any exist beyond the exhaustive sizes
    if n > 5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let size = rng.gen_range(5..n);
            let mut mask = 0u64;
            while mask.count_ones() < size as u32 {
                mask |= 1 << rng.gen_range(1..=n);
            }
            consider(mask, &mut best, &mut checked);
        }
    }

    let (min_cross, mask) = best.expect("at least one subset");
    let witness = (1..=n).filter(|&v| mask >> v & 1 == 1).collect();
    EscapeReport {
        subsets_checked: checked,
        min_cross,
        witness,
    }
}
