//! The canonical 51-node instance, its 23-node seed, and the tables tying
//! them together.
//!
//! Node layout of the 51-node instance: 1 is the origin/start, 2 the source
//! (every tour's second node), 51 the sink (every tour's last node before
//! returning), and 3..=50 are the 48 Group nodes. The Group nodes fall into
//! 20 gadgets: 12 pairs (two mutually linked nodes) and 8 triples (a cost-2
//! clique). Each Group node has exactly one cost-1 link into another gadget,
//! its external partner.
//!
//! The 23-node seed has the same shape with gadgets contracted to single
//! nodes: 1, source 2, Group seed nodes 3..=22, sink 23. Splitting every seed
//! Group node (pairs for degree-2 seeds, triples for degree-3 seeds) with the
//! attachment orders carried by `canonical_hcp_seed` reproduces the 51-node
//! instance exactly; see `reduce::enlarge_all_with`.

use crate::graph::{HcpInstance, NodeId, TspInstance};

pub const LARGE_DEFAULT: i64 = 200;
pub const FLOW_CONSTANT_DEFAULT: i64 = 192;

/// Internal Group arcs of the 51-node instance: (tail, head, cost).
/// 120 arcs; cost 1 for gadget-pair links and external links, cost 2 inside
/// triple cliques.
pub const GROUP_ARCS: &[(u8, u8, u8)] = &[
    (3, 4, 1),
    (3, 5, 1),
    (4, 3, 1),
    (4, 10, 1),
    (5, 3, 1),
    (5, 6, 2),
    (5, 7, 2),
    (6, 5, 2),
    (6, 7, 2),
    (6, 8, 1),
    (7, 5, 2),
    (7, 6, 2),
    (7, 13, 1),
    (8, 6, 1),
    (8, 9, 1),
    (9, 8, 1),
    (9, 15, 1),
    (10, 4, 1),
    (10, 11, 2),
    (10, 12, 2),
    (11, 10, 2),
    (11, 12, 2),
    (11, 18, 1),
    (12, 10, 2),
    (12, 11, 2),
    (12, 25, 1),
    (13, 7, 1),
    (13, 14, 1),
    (14, 13, 1),
    (14, 20, 1),
    (15, 9, 1),
    (15, 16, 2),
    (15, 17, 2),
    (16, 15, 2),
    (16, 17, 2),
    (16, 23, 1),
    (17, 15, 2),
    (17, 16, 2),
    (17, 27, 1),
    (18, 11, 1),
    (18, 19, 1),
    (19, 18, 1),
    (19, 21, 1),
    (20, 14, 1),
    (20, 21, 2),
    (20, 22, 2),
    (21, 19, 1),
    (21, 20, 2),
    (21, 22, 2),
    (22, 20, 2),
    (22, 21, 2),
    (22, 24, 1),
    (23, 16, 1),
    (23, 24, 1),
    (24, 22, 1),
    (24, 23, 1),
    (25, 12, 1),
    (25, 26, 1),
    (26, 25, 1),
    (26, 38, 1),
    (27, 17, 1),
    (27, 28, 1),
    (28, 27, 1),
    (28, 43, 1),
    (29, 30, 1),
    (29, 31, 1),
    (30, 29, 1),
    (30, 36, 1),
    (31, 29, 1),
    (31, 32, 2),
    (31, 33, 2),
    (32, 31, 2),
    (32, 33, 2),
    (32, 34, 1),
    (33, 31, 2),
    (33, 32, 2),
    (33, 39, 1),
    (34, 32, 1),
    (34, 35, 1),
    (35, 34, 1),
    (35, 41, 1),
    (36, 30, 1),
    (36, 37, 2),
    (36, 38, 2),
    (37, 36, 2),
    (37, 38, 2),
    (37, 44, 1),
    (38, 26, 1),
    (38, 36, 2),
    (38, 37, 2),
    (39, 33, 1),
    (39, 40, 1),
    (40, 39, 1),
    (40, 46, 1),
    (41, 35, 1),
    (41, 42, 2),
    (41, 43, 2),
    (42, 41, 2),
    (42, 43, 2),
    (42, 49, 1),
    (43, 28, 1),
    (43, 41, 2),
    (43, 42, 2),
    (44, 37, 1),
    (44, 45, 1),
    (45, 44, 1),
    (45, 47, 1),
    (46, 40, 1),
    (46, 47, 2),
    (46, 48, 2),
    (47, 45, 1),
    (47, 46, 2),
    (47, 48, 2),
    (48, 46, 2),
    (48, 47, 2),
    (48, 50, 1),
    (49, 42, 1),
    (49, 50, 1),
    (50, 48, 1),
    (50, 49, 1),
];

/// Gadget membership: (seed node, members in 51-node numbering).
/// Members are consecutive and listed ascending; the k-th member attaches to
/// the k-th Group neighbor in the seed's adjacency order.
pub const GADGETS: &[(u8, &[u8])] = &[
    (3, &[3, 4]),
    (4, &[5, 6, 7]),
    (5, &[8, 9]),
    (6, &[10, 11, 12]),
    (7, &[13, 14]),
    (8, &[15, 16, 17]),
    (9, &[18, 19]),
    (10, &[20, 21, 22]),
    (11, &[23, 24]),
    (12, &[25, 26]),
    (13, &[27, 28]),
    (14, &[29, 30]),
    (15, &[31, 32, 33]),
    (16, &[34, 35]),
    (17, &[36, 37, 38]),
    (18, &[39, 40]),
    (19, &[41, 42, 43]),
    (20, &[44, 45]),
    (21, &[46, 47, 48]),
    (22, &[49, 50]),
];

/// Group adjacency of the 23-node seed, in attachment order.
/// Most lists are ascending; seeds 17 and 19 are rotated, and that rotation
/// is load-bearing for reproducing the 51-node numbering.
pub const SEED_ATTACHMENT: &[(u8, &[u8])] = &[
    (3, &[4, 6]),
    (4, &[3, 5, 7]),
    (5, &[4, 8]),
    (6, &[3, 9, 12]),
    (7, &[4, 10]),
    (8, &[5, 11, 13]),
    (9, &[6, 10]),
    (10, &[7, 9, 11]),
    (11, &[8, 10]),
    (12, &[6, 17]),
    (13, &[8, 19]),
    (14, &[15, 17]),
    (15, &[14, 16, 18]),
    (16, &[15, 19]),
    (17, &[14, 20, 12]),
    (18, &[15, 21]),
    (19, &[16, 22, 13]),
    (20, &[17, 21]),
    (21, &[18, 20, 22]),
    (22, &[19, 21]),
];

/// The 51-node instance under which the staged-flow relaxation admits a
/// fractional certificate far below the integral optimum.
pub fn canonical_counterexample() -> TspInstance {
    let mut t = TspInstance::new(51, LARGE_DEFAULT);
    t.origin = 1;
    t.source = Some(2);
    t.sink = Some(51);
    t.set_cost(1, 2, 1);
    for g in 3..=50 {
        t.set_cost(2, g, 1);
        t.set_cost(g, 51, 3);
    }
    t.set_cost(51, 1, 1);
    for &(i, j, c) in GROUP_ARCS {
        t.set_cost(i as NodeId, j as NodeId, c as i64);
    }
    t
}

/// The 23-node seed as a Hamiltonian-cycle question. It has no Hamiltonian
/// cycle; the Group subgraph needs at least four vertex-disjoint paths to
/// cover it (see `oracle::seed_min_large_bound`).
pub fn canonical_hcp_seed() -> HcpInstance {
    let mut h = HcpInstance::new(23);
    h.add_arc(1, 2);
    for g in 3..=22 {
        h.add_arc(2, g);
    }
    for &(g, neighbors) in SEED_ATTACHMENT {
        for &u in neighbors {
            h.add_arc(g as NodeId, u as NodeId);
        }
        h.add_arc(g as NodeId, 23);
    }
    h.add_arc(23, 1);
    h
}

/// The seed as a TSP instance with the boundary costs the 51-node instance
/// uses (source hop 1, Group edges 1, sink hops 3, return 1).
pub fn canonical_seed_tsp() -> TspInstance {
    let mut t = TspInstance::new(23, LARGE_DEFAULT);
    t.origin = 1;
    t.source = Some(2);
    t.sink = Some(23);
    t.set_cost(1, 2, 1);
    for g in 3..=22 {
        t.set_cost(2, g, 1);
        t.set_cost(g, 23, 3);
    }
    t.set_cost(23, 1, 1);
    for &(g, neighbors) in SEED_ATTACHMENT {
        for &u in neighbors {
            t.set_cost(g as NodeId, u as NodeId, 1);
        }
    }
    t
}

/// Attachment orders keyed by seed Group node, as plain data.
pub fn canonical_attachment() -> Vec<(NodeId, Vec<NodeId>)> {
    SEED_ATTACHMENT
        .iter()
        .map(|&(g, ns)| (g as NodeId, ns.iter().map(|&u| u as NodeId).collect()))
        .collect()
}
