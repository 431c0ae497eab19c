//! Exact integral solvers and counters. Everything here is deterministic:
//! ties break toward smaller node ids, and budgets only decide whether an
//! answer is produced, never which one.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::graph::{HcpInstance, NodeId, TspInstance};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HcpAnswer {
    Cycle(Vec<NodeId>),
    None,
    Timeout,
}

/// Exhaustive Hamiltonian-cycle search with pruning: every unvisited node
/// must keep an unvisited successor and predecessor, all unvisited nodes must
/// stay reachable from the current one, and some unvisited node must still
/// reach the start.
pub fn hamiltonian_cycle(h: &HcpInstance, budget: Duration) -> HcpAnswer {
    let n = h.n;
    assert!(n <= 60, "mask search limited to 60 nodes");
    let full: u64 = (1u64 << n) - 1;
    let bit = |v: NodeId| 1u64 << (v - 1);

    let mut out = vec![0u64; n + 1];
    let mut inc = vec![0u64; n + 1];
    let mut sorted_adj: Vec<Vec<NodeId>> = vec![Vec::new(); n + 1];
    for (i, j) in h.arcs() {
        out[i] |= bit(j);
        inc[j] |= bit(i);
        sorted_adj[i].push(j);
    }
    for a in &mut sorted_adj {
        a.sort_unstable();
    }

    let deadline = Instant::now() + budget;
    let mut ticks = 0u32;

    struct Search<'a> {
        out: &'a [u64],
        inc: &'a [u64],
        adj: &'a [Vec<NodeId>],
        full: u64,
        deadline: Instant,
        ticks: &'a mut u32,
        path: Vec<NodeId>,
        timed_out: bool,
    }

    impl Search<'_> {
        fn feasible(&self, cur: NodeId, visited: u64) -> bool {
            let rem = self.full & !visited;
            if rem == 0 {
                return true;
            }
            let start_bit = 1u64;
            let cur_bit = 1u64 << (cur - 1);
            // local degree conditions
            let mut m = rem;
            let mut can_close = false;
            while m != 0 {
                let v = m.trailing_zeros() as usize + 1;
                m &= m - 1;
                let vb = 1u64 << (v - 1);
                if self.out[v] & ((rem & !vb) | start_bit) == 0 {
                    return false;
                }
                if self.inc[v] & ((rem & !vb) | cur_bit) == 0 {
                    return false;
                }
                if self.out[v] & start_bit != 0 {
                    can_close = true;
                }
            }
            if !can_close {
                return false;
            }
            // all remaining nodes reachable from cur through remaining ones
            let mut reach = cur_bit;
            loop {
                let mut grown = reach;
                let mut f = reach;
                while f != 0 {
                    let v = f.trailing_zeros() as usize + 1;
                    f &= f - 1;
                    grown |= self.out[v] & rem;
                }
                if grown == reach {
                    break;
                }
                reach = grown;
            }
            rem & !reach == 0
        }

        fn dfs(&mut self, cur: NodeId, visited: u64) -> bool {
            *self.ticks += 1;
            if *self.ticks & 0xfff == 0 && Instant::now() >= self.deadline {
                self.timed_out = true;
                return false;
            }
            if visited == self.full {
                return self.out[cur] & 1 != 0;
            }
            if !self.feasible(cur, visited) {
                return false;
            }
            for &j in &self.adj[cur] {
                let jb = 1u64 << (j - 1);
                if visited & jb == 0 {
                    self.path.push(j);
                    if self.dfs(j, visited | jb) {
                        return true;
                    }
                    self.path.pop();
                    if self.timed_out {
                        return false;
                    }
                }
            }
            false
        }
    }

    let mut s = Search {
        out: &out,
        inc: &inc,
        adj: &sorted_adj,
        full,
        deadline,
        ticks: &mut ticks,
        path: vec![1],
        timed_out: false,
    };
    if s.dfs(1, 1) {
        HcpAnswer::Cycle(s.path)
    } else if s.timed_out {
        HcpAnswer::Timeout
    } else {
        HcpAnswer::None
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TourResult {
    pub value: i64,
    pub order: Vec<NodeId>,
    pub large_arcs: usize,
}

/// Exact dynamic program over subsets (value only). Limited to n <= 25.
pub fn held_karp(t: &TspInstance) -> TourResult {
    hk_core(t, false).0
}

/// Exact dynamic program that also counts distinct optimal tours as node
/// orders from the origin. Limited to n <= 24; the count is None on u64
/// overflow.
pub fn held_karp_counted(t: &TspInstance) -> (TourResult, Option<u64>) {
    assert!(t.n <= 24, "counting DP limited to 24 nodes");
    let (r, c) = hk_core(t, true);
    (r, c)
}

fn hk_core(t: &TspInstance, count: bool) -> (TourResult, Option<u64>) {
    let n = t.n;
    assert!((3..=25).contains(&n), "dynamic program limited to 25 nodes");
    let m = n - 1;
    let others: Vec<NodeId> = (1..=n).filter(|&v| v != t.origin).collect();

    let mut max_cost = 0i64;
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                max_cost = max_cost.max(t.cost(i, j));
            }
        }
    }
    assert!(
        max_cost * (n as i64) < u16::MAX as i64,
        "tour values must fit in u16"
    );

    let inf = u16::MAX;
    let mut co = vec![0u32; m * m];
    for a in 0..m {
        for b in 0..m {
            if a != b {
                co[a * m + b] = t.cost(others[a], others[b]) as u32;
            }
        }
    }
    let c = |a: usize, b: usize| co[a * m + b];
    let from_origin: Vec<u32> = others.iter().map(|&v| t.cost(t.origin, v) as u32).collect();
    let to_origin: Vec<u32> = others.iter().map(|&v| t.cost(v, t.origin) as u32).collect();

    let size = (1usize << m) * m;
    let mut dp = vec![inf; size];
    let mut cnt = if count { vec![0u64; size] } else { Vec::new() };
    let mut overflow = false;

    for e in 0..m {
        dp[(1 << e) * m + e] = from_origin[e] as u16;
        if count {
            cnt[(1 << e) * m + e] = 1;
        }
    }

    for mask in 1usize..(1 << m) {
        if mask.count_ones() < 2 {
            continue;
        }
        let base = mask * m;
        let mut bits = mask;
        while bits != 0 {
            let e = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let prev_mask = mask ^ (1 << e);
            let prev_base = prev_mask * m;
            let mut best = inf as u32;
            let mut acc = 0u64;
            let mut pm = prev_mask;
            while pm != 0 {
                let p = pm.trailing_zeros() as usize;
                pm &= pm - 1;
                let v = dp[prev_base + p];
                if v == inf {
                    continue;
                }
                let cand = v as u32 + c(p, e);
                if cand < best {
                    best = cand;
                    if count {
                        acc = cnt[prev_base + p];
                    }
                } else if count && cand == best {
                    match acc.checked_add(cnt[prev_base + p]) {
                        Some(s) => acc = s,
                        None => overflow = true,
                    }
                }
            }
            if best < inf as u32 {
                dp[base + e] = best as u16;
                if count {
                    cnt[base + e] = acc;
                }
            }
        }
    }

    let full = (1usize << m) - 1;
    let mut best_total = u32::MAX;
    for e in 0..m {
        let v = dp[full * m + e];
        if v != inf {
            let total = v as u32 + to_origin[e];
            if total < best_total {
                best_total = total;
            }
        }
    }
    assert!(best_total < u32::MAX, "no tour exists");

    let mut total_count = None;
    if count {
        let mut acc = 0u64;
        for e in 0..m {
            let v = dp[full * m + e];
            if v != inf && v as u32 + to_origin[e] == best_total {
                match acc.checked_add(cnt[full * m + e]) {
                    Some(s) => acc = s,
                    None => overflow = true,
                }
            }
        }
        total_count = if overflow { None } else { Some(acc) };
    }

    // reconstruct one optimal order, smallest end then smallest predecessor
    let mut end = usize::MAX;
    for e in 0..m {
        let v = dp[full * m + e];
        if v != inf && v as u32 + to_origin[e] == best_total {
            end = e;
            break;
        }
    }
    let mut rev = vec![end];
    let mut mask = full;
    let mut e = end;
    while mask.count_ones() > 1 {
        let prev_mask = mask ^ (1 << e);
        let target = dp[mask * m + e] as u32;
        let mut pm = prev_mask;
        let mut found = usize::MAX;
        while pm != 0 {
            let p = pm.trailing_zeros() as usize;
            pm &= pm - 1;
            if dp[prev_mask * m + p] != inf && dp[prev_mask * m + p] as u32 + c(p, e) == target {
                found = p;
                break;
            }
        }
        assert!(found != usize::MAX);
        rev.push(found);
        mask = prev_mask;
        e = found;
    }
    let mut order = vec![t.origin];
    order.extend(rev.iter().rev().map(|&i| others[i]));

    let result = TourResult {
        value: best_total as i64,
        large_arcs: t.tour_large_arcs(&order),
        order,
    };
    (result, total_count)
}

#[derive(Debug, Clone)]
pub enum TspOutcome {
    Solved(TourResult),
    Timeout {
        incumbent: Option<TourResult>,
        lower_bound: i64,
    },
}

/// Dispatch: dynamic program when it fits, branch and bound within the
/// budget otherwise.
pub fn exact_tsp(t: &TspInstance, budget: Duration) -> TspOutcome {
    if t.n <= 25 {
        TspOutcome::Solved(held_karp(t))
    } else {
        branch_and_bound(t, budget)
    }
}

fn greedy_tour(t: &TspInstance) -> TourResult {
    let mut order = vec![t.origin];
    let mut visited = vec![false; t.n + 1];
    visited[t.origin] = true;
    for _ in 1..t.n {
        let cur = *order.last().unwrap();
        let next = (1..=t.n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (t.cost(cur, v), v))
            .unwrap();
        visited[next] = true;
        order.push(next);
    }
    TourResult {
        value: t.tour_value(&order),
        large_arcs: t.tour_large_arcs(&order),
        order,
    }
}

/// Depth-first branch and bound. The bound adds, for the current node and
/// every unvisited one, its cheapest departure toward a legal continuation.
/// On budget exhaustion the reported lower bound is the root bound, which is
/// coarse but sound.
pub fn branch_and_bound(t: &TspInstance, budget: Duration) -> TspOutcome {
    let n = t.n;
    let deadline = Instant::now() + budget;
    let mut incumbent = greedy_tour(t);

    let cheapest_out = |visited: &[bool], cur: NodeId| -> i64 {
        let mut sum = 0;
        for v in 1..=n {
            if v != cur && visited[v] {
                continue;
            }
            let mut best = i64::MAX;
            for u in 1..=n {
                if u == v {
                    continue;
                }
                let legal = if u == t.origin { true } else { !visited[u] };
                if legal && t.cost(v, u) < best {
                    best = t.cost(v, u);
                }
            }
            if best < i64::MAX {
                sum += best;
            }
        }
        sum
    };

    let mut visited = vec![false; n + 1];
    visited[t.origin] = true;
    let root_bound = cheapest_out(&visited, t.origin);

    struct Bb<'a> {
        t: &'a TspInstance,
        deadline: Instant,
        ticks: u32,
        timed_out: bool,
        best: i64,
        best_order: Vec<NodeId>,
    }

    impl Bb<'_> {
        fn go(&mut self, path: &mut Vec<NodeId>, visited: &mut Vec<bool>, so_far: i64) {
            self.ticks += 1;
            if self.ticks & 0xfff == 0 && Instant::now() >= self.deadline {
                self.timed_out = true;
            }
            if self.timed_out {
                return;
            }
            let n = self.t.n;
            let cur = *path.last().unwrap();
            if path.len() == n {
                let total = so_far + self.t.cost(cur, self.t.origin);
                if total < self.best {
                    self.best = total;
                    self.best_order = path.clone();
                }
                return;
            }
            let mut children: Vec<NodeId> = (1..=n).filter(|&v| !visited[v]).collect();
            children.sort_by_key(|&v| (self.t.cost(cur, v), v));
            for v in children {
                let next_cost = so_far + self.t.cost(cur, v);
                if next_cost >= self.best {
                    continue;
                }
                visited[v] = true;
                path.push(v);
                let mut bound = next_cost;
                for w in 1..=n {
                    if w != v && visited[w] {
                        continue;
                    }
                    let mut cheap = i64::MAX;
                    for u in 1..=n {
                        if u == w {
                            continue;
                        }
                        let legal = if u == self.t.origin { true } else { !visited[u] };
                        if legal && self.t.cost(w, u) < cheap {
                            cheap = self.t.cost(w, u);
                        }
                    }
                    if cheap < i64::MAX {
                        bound += cheap;
                    }
                }
                if bound < self.best {
                    self.go(path, visited, next_cost);
                }
                path.pop();
                visited[v] = false;
                if self.timed_out {
                    return;
                }
            }
        }
    }

    let mut bb = Bb {
        t,
        deadline,
        ticks: 0,
        timed_out: false,
        best: incumbent.value,
        best_order: incumbent.order.clone(),
    };
    let mut path = vec![t.origin];
    bb.go(&mut path, &mut visited, 0);

    incumbent = TourResult {
        value: bb.best,
        large_arcs: t.tour_large_arcs(&bb.best_order),
        order: bb.best_order,
    };
    if bb.timed_out {
        TspOutcome::Timeout {
            incumbent: Some(incumbent),
            lower_bound: root_bound,
        }
    } else {
        TspOutcome::Solved(incumbent)
    }
}

/// All fixed-origin tour orders; test-sized instances only.
pub fn all_tours(t: &TspInstance) -> Vec<Vec<NodeId>> {
    assert!(t.n <= 8, "exhaustive enumeration limited to 8 nodes");
    let rest: Vec<NodeId> = (1..=t.n).filter(|&v| v != t.origin).collect();
    let mut tours = Vec::new();
    let mut perm = rest.clone();
    fn rec(perm: &mut Vec<NodeId>, k: usize, origin: NodeId, out: &mut Vec<Vec<NodeId>>) {
        if k == perm.len() {
            let mut tour = vec![origin];
            tour.extend_from_slice(perm);
            out.push(tour);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            rec(perm, k + 1, origin, out);
            perm.swap(k, i);
        }
    }
    rec(&mut perm, 0, t.origin, &mut tours);
    tours
}

pub fn brute_force_opt(t: &TspInstance) -> (i64, Vec<Vec<NodeId>>) {
    let mut best = i64::MAX;
    let mut winners = Vec::new();
    for tour in all_tours(t) {
        let v = t.tour_value(&tour);
        if v < best {
            best = v;
            winners.clear();
            winners.push(tour);
        } else if v == best {
            winners.push(tour);
        }
    }
    (best, winners)
}

#[derive(Debug, Clone)]
pub struct TourCount {
    pub optimal_value: i64,
    /// Distinct optimal node orders from the origin.
    pub directed_fixed_origin: Option<u64>,
    /// True when no optimal tour's reversal is also optimal, certified by
    /// OPT(C + C^T) > 2 * OPT.
    pub reversal_exclusive: bool,
    /// Tour sets {T, reverse(T)}; known exactly only when reversal_exclusive.
    pub undirected: Option<u64>,
    /// Every rotation of every optimal order counted separately.
    pub rotation_sequences: Option<u64>,
}

/// Count optimal tours under the three conventions. Needs one counting DP on
/// the instance and one plain DP on the reversal-symmetrized costs.
pub fn count_optimal_tours(t: &TspInstance) -> TourCount {
    let (res, directed) = held_karp_counted(t);
    let mut sym = TspInstance::new(t.n, t.large.saturating_mul(2));
    sym.origin = t.origin;
    for i in 1..=t.n {
        for j in 1..=t.n {
            if i != j {
                sym.set_cost(i, j, t.cost(i, j) + t.cost(j, i));
            }
        }
    }
    let sym_best = held_karp(&sym).value;
    let reversal_exclusive = sym_best > 2 * res.value;
    TourCount {
        optimal_value: res.value,
        directed_fixed_origin: directed,
        reversal_exclusive,
        undirected: if reversal_exclusive { directed } else { None },
        rotation_sequences: directed.and_then(|d| d.checked_mul(t.n as u64)),
    }
}

#[derive(Debug, Clone)]
pub struct LargeBound {
    pub min_large_arcs: usize,
    pub side_a: Vec<NodeId>,
    pub side_b: Vec<NodeId>,
    pub boundary_entries: usize,
}

/// Structural lower bound on LARGE arcs in any tour, for instances with a
/// designated source and sink whose Group subgraph (small arcs among
/// non-boundary nodes) is connected and bipartite.
///
/// Any tour covers the Group nodes by vertex-disjoint small paths. On a
/// bipartite graph a path's side counts differ by at most one, so at least
/// |A| - |B| paths are needed. Each path is entered once; at most one entry
/// per boundary node with a small arc into the Group can be small, and the
/// rest must be LARGE.
pub fn seed_min_large_bound(t: &TspInstance) -> Option<LargeBound> {
    let source = t.source?;
    let sink = t.sink?;
    let boundary = [t.origin, source, sink];
    let group: Vec<NodeId> = (1..=t.n).filter(|v| !boundary.contains(v)).collect();
    if group.is_empty() {
        return None;
    }

    let mut color: BTreeMap<NodeId, u8> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::new();
    color.insert(group[0], 0);
    queue.push_back(group[0]);
    while let Some(v) = queue.pop_front() {
        let cv = color[&v];
        for &u in &group {
            if u != v && (t.is_small(v, u) || t.is_small(u, v)) {
                match color.get(&u) {
                    Some(&cu) => {
                        if cu == cv {
                            return None; // odd cycle
                        }
                    }
                    None => {
                        color.insert(u, 1 - cv);
                        queue.push_back(u);
                    }
                }
            }
        }
    }
    if color.len() != group.len() {
        return None; // disconnected
    }

    let side_a: Vec<NodeId> = group.iter().copied().filter(|v| color[v] == 0).collect();
    let side_b: Vec<NodeId> = group.iter().copied().filter(|v| color[v] == 1).collect();
    let (side_a, side_b) = if side_a.len() >= side_b.len() {
        (side_a, side_b)
    } else {
        (side_b, side_a)
    };
    let excess = side_a.len() - side_b.len();

    let boundary_entries = boundary
        .iter()
        .filter(|&&b| group.iter().any(|&g| t.is_small(b, g)))
        .count();

    Some(LargeBound {
        min_large_arcs: excess.saturating_sub(boundary_entries),
        side_a,
        side_b,
        boundary_entries,
    })
}

/// A proven integral lower bound with its derivation trail.
#[derive(Debug, Clone)]
pub struct BoundProvenance {
    pub value: i64,
    pub sources: Vec<String>,
}
