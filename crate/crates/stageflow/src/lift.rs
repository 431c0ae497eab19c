//! Lifting an x vector to a conditional-flow y vector.
//!
//! Every family C6..C12 ties the y entries of an anchor to that anchor's own
//! weight, so the lift works one anchor at a time. For the two boundary
//! anchors (the origin departure and the terminal return) the whole flow is
//! conditioned on an arc it passes anyway, and y is just x restricted away
//! from the anchor stage. Every other support anchor gets a conditional
//! itinerary: one occupant per stage, origin first, then the source, then
//! every interior node exactly once, then the sink, pinned so the anchor
//! arc is the transition at the anchor stage and is never emitted as a
//! probe. A single chain at full anchor weight puts every stage total and
//! every per-node total on the anchor weight on the nose, and the chain
//! itself settles the seams.
//!
//! Itinerary steps are free to chain interior nodes the instance connects
//! expensively or not at all: only x is priced, and the conditional
//! families constrain totals, conservation and excluded index patterns,
//! none of which mention costs. The construction leans on that freedom to
//! keep the stored certificate consistent when y(a, b) and y(b, a) are read
//! as the same variable:
//!
//!   - the boundary rows replicate x, and every itinerary carries the two
//!     boundary arcs at its own anchor weight, so those mirrored entries
//!     agree by value;
//!   - a source-hop anchor (src, 2, g) ends its interior line at the
//!     ascending successor of g, and a sink-hop anchor (g, n-1, sink)
//!     starts its line at the predecessor, so each such row names the
//!     other's anchor exactly once and both entries read the shared weight;
//!   - all remaining steps avoid the cheap interior arcs entirely, so no
//!     third row ever stores the mirror of another row's entry.
//!
//! Integral single-tour vectors lift proportionally instead: conditioning
//! on one arc of a tour reproduces the tour, and the product rule is
//! symmetric on its face.

use thiserror::Error;

use crate::certificate::{
    build_certificate, group_nodes, CertificateError, ConditionalFlow, StageFlow, StagePlan,
};
use crate::graph::{NodeId, TspInstance};
use crate::model::{arc, StageArc};

#[derive(Debug, Error)]
pub enum LiftError {
    #[error("certificate breaks the stage seams, conditional families are only defined over a flow-conserving base")]
    BaseInfeasible,
    #[error("no lift rule for this certificate shape")]
    Unsupported,
    #[error(transparent)]
    Structure(#[from] CertificateError),
}

/// Interior line of an itinerary: position k holds the occupant of stage
/// k + 3. Pinned positions are fixed; the rest is filled with the unused
/// interior nodes, ascending, preferring fillings whose steps stay off the
/// cheap arcs (steps between two pinned positions are the anchor's own and
/// are exempt). Deterministic; falls back to a plain ascending fill when
/// the avoidance search exhausts its budget, which keeps the families exact
/// and only concedes mirror-consistency on instances too small to dodge.
fn build_line(t: &TspInstance, group: &[NodeId], pins: &[(usize, NodeId)]) -> Vec<NodeId> {
    let m = group.len();
    let mut line: Vec<Option<NodeId>> = vec![None; m];
    for &(k, v) in pins {
        debug_assert!(line[k].is_none());
        line[k] = Some(v);
    }
    let free: Vec<NodeId> = group
        .iter()
        .copied()
        .filter(|v| !pins.iter().any(|&(_, p)| p == *v))
        .collect();
    let holes: Vec<usize> = (0..m).filter(|&k| line[k].is_none()).collect();

    struct Fill<'a> {
        t: &'a TspInstance,
        line: Vec<Option<NodeId>>,
        free: &'a [NodeId],
        holes: &'a [usize],
        used: Vec<bool>,
        budget: u32,
    }
    impl Fill<'_> {
        fn fits(&self, k: usize, cand: NodeId) -> bool {
            if k > 0 {
                if let Some(p) = self.line[k - 1] {
                    if self.t.is_small(p, cand) {
                        return false;
                    }
                }
            }
            if k + 1 < self.line.len() {
                if let Some(q) = self.line[k + 1] {
                    if self.t.is_small(cand, q) {
                        return false;
                    }
                }
            }
            true
        }
        fn go(&mut self, d: usize) -> bool {
            if d == self.holes.len() {
                return true;
            }
            if self.budget == 0 {
                return false;
            }
            self.budget -= 1;
            let k = self.holes[d];
            for c in 0..self.free.len() {
                if self.used[c] || !self.fits(k, self.free[c]) {
                    continue;
                }
                self.used[c] = true;
                self.line[k] = Some(self.free[c]);
                if self.go(d + 1) {
                    return true;
                }
                self.used[c] = false;
                self.line[k] = None;
            }
            false
        }
    }

    let mut fill = Fill {
        t,
        line: line.clone(),
        free: &free,
        holes: &holes,
        used: vec![false; free.len()],
        budget: 200_000,
    };
    if fill.go(0) {
        return fill.line.into_iter().map(Option::unwrap).collect();
    }
    for (&k, &v) in holes.iter().zip(free.iter()) {
        line[k] = Some(v);
    }
    line.into_iter().map(Option::unwrap).collect()
}

/// Ascending neighbor of an interior node, wrapping: the seam partner
/// shared by the source-hop and sink-hop itineraries.
fn rotated(group: &[NodeId], g: NodeId, step: isize) -> NodeId {
    let m = group.len() as isize;
    let k = group
        .iter()
        .position(|&v| v == g)
        .expect("interior node") as isize;
    group[((k + step).rem_euclid(m)) as usize]
}

/// The tour order carried by an integral one-tour vector, if that is what
/// the vector is.
pub fn single_tour_order(t: &TspInstance, x: &StageFlow) -> Option<Vec<NodeId>> {
    if x.support_len() != t.n {
        return None;
    }
    let mut by_stage: Vec<Option<StageArc>> = vec![None; t.n + 1];
    for (a, v) in x.iter() {
        if v != x.f {
            return None;
        }
        let s = a.s();
        if s < 1 || s > t.n || by_stage[s].is_some() {
            return None;
        }
        by_stage[s] = Some(a);
    }
    let first = by_stage[1]?;
    if first.i() != t.origin {
        return None;
    }
    let mut order = vec![first.i()];
    let mut cur = first;
    for s in 2..=t.n {
        let nxt = by_stage[s]?;
        if nxt.i() != cur.j() {
            return None;
        }
        order.push(nxt.i());
        cur = nxt;
    }
    if cur.j() != t.origin {
        return None;
    }
    let mut seen = vec![false; t.n + 1];
    for &v in &order {
        if v < 1 || v > t.n || seen[v] {
            return None;
        }
        seen[v] = true;
    }
    Some(order)
}

/// y(a, b) = x(a) x(b) / F. Exact for a vector whose whole mass rides one
/// tour: conditioning on any arc of the tour reproduces the tour.
pub fn proportional_lift(x: &StageFlow) -> ConditionalFlow {
    let mut y = ConditionalFlow::new();
    for (a, va) in x.iter() {
        for (b, vb) in x.iter() {
            if b.s() != a.s() {
                y.set(a, b, va * vb / x.f);
            }
        }
    }
    y
}

/// Itinerary lift of the balanced certificate.
pub fn itinerary_lift(t: &TspInstance, x: &StageFlow) -> Result<ConditionalFlow, LiftError> {
    let group = group_nodes(t)?;
    let m = group.len();
    let n = t.n;
    let o = t.origin;
    let src = t.source.expect("interior derivation requires a source");
    let sink = t.sink.expect("interior derivation requires a sink");
    let a1 = arc(o, 1, src);
    let an = arc(sink, n, o);

    let mut y = ConditionalFlow::new();
    for (b, v) in x.iter() {
        if b.s() != 1 {
            y.set(a1, b, v);
        }
        if b.s() != n {
            y.set(an, b, v);
        }
    }

    for (a, w) in x.iter() {
        let s0 = a.s();
        if s0 == 1 || s0 == n {
            continue;
        }
        let line = if s0 == 2 {
            let g = a.j();
            build_line(t, &group, &[(0, g), (m - 1, rotated(&group, g, 1))])
        } else if s0 == n - 1 {
            let g = a.i();
            build_line(t, &group, &[(m - 1, g), (0, rotated(&group, g, -1))])
        } else {
            build_line(t, &group, &[(s0 - 3, a.i()), (s0 - 2, a.j())])
        };
        y.set(a, a1, w);
        y.set(a, an, w);
        if s0 != 2 {
            y.set(a, arc(src, 2, line[0]), w);
        }
        for k in 1..m {
            let r = k + 2;
            if r != s0 {
                y.set(a, arc(line[k - 1], r, line[k]), w);
            }
        }
        if s0 != n - 1 {
            y.set(a, arc(line[m - 1], n - 1, sink), w);
        }
    }
    Ok(y)
}

/// Lift dispatch: integral single tours lift proportionally, the balanced
/// plan lifts through itineraries, the overlapped plan is rejected because
/// its base already leaks, and anything else is out of scope.
pub fn lift_certificate(t: &TspInstance, x: &StageFlow) -> Result<ConditionalFlow, LiftError> {
    if single_tour_order(t, x).is_some() {
        return Ok(proportional_lift(x));
    }
    if let Ok(balanced) = build_certificate(t, x.f, StagePlan::Balanced) {
        if *x == balanced {
            return itinerary_lift(t, x);
        }
    }
    if let Ok(overlapped) = build_certificate(t, x.f, StagePlan::Overlapped) {
        if *x == overlapped {
            return Err(LiftError::BaseInfeasible);
        }
    }
    Err(LiftError::Unsupported)
}
