//! Static edge-cloud graph: ES-ES links, AP attachments, CC gateways and the
//! hop-distance matrices derived from them.
//!
//! Distances are hop counts. ES-ES distances come from BFS over the (sparse,
//! connected) ES graph; AP-ES and ES-CC distances exist only for direct links
//! and are `None` otherwise, so arithmetic on a missing link is a compile-time
//! impossibility rather than a magic sentinel. Per-hop times are tiered:
//! `gamma_c > gamma_e > gamma_a`, making cloud hops an order of magnitude
//! costlier than access hops.
//!
//! Everything here is immutable after construction and safe to share
//! read-only across concurrently running simulations.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::{stream_rng, Stream};
use crate::{ApId, EsId};

/// Per-hop times for the three tiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gammas {
    /// AP -> ES hop time.
    pub a: u32,
    /// ES -> ES hop time.
    pub e: u32,
    /// CC -> ES hop time.
    pub c: u32,
}

impl Gammas {
    fn validate(&self) -> Result<(), Error> {
        if !(self.c > self.e && self.e > self.a) {
            return Err(Error::InvalidConfig(format!(
                "per-hop times must satisfy gamma_c > gamma_e > gamma_a, got c={} e={} a={}",
                self.c, self.e, self.a
            )));
        }
        Ok(())
    }
}

/// Parameters for random topology generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub num_es: usize,
    pub num_ap: usize,
    /// Target average number of ES-ES links per ES.
    pub es_degree: f64,
    /// Inclusive range for how many ESs each AP attaches to.
    pub aps_per_es_range: (usize, usize),
    /// Number of ESs with a direct CC link.
    pub cc_gateway_count: usize,
    pub gamma_a: u32,
    pub gamma_e: u32,
    pub gamma_c: u32,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        TopologyConfig {
            num_es: 30,
            num_ap: 100,
            es_degree: 6.0,
            aps_per_es_range: (1, 3),
            cc_gateway_count: 5,
            gamma_a: 2,
            gamma_e: 12,
            gamma_c: 27,
            seed: 1,
        }
    }
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.num_es < 1 || self.num_ap < 1 {
            return Err(Error::InvalidConfig(
                "topology: num_es and num_ap must be >= 1".into(),
            ));
        }
        if self.cc_gateway_count < 1 || self.cc_gateway_count > self.num_es {
            return Err(Error::InvalidConfig(format!(
                "topology: cc_gateway_count must be in [1, {}]",
                self.num_es
            )));
        }
        if self.num_es > 2 && self.es_degree < 2.0 {
            return Err(Error::InvalidConfig(
                "topology: es_degree < 2 cannot keep more than 2 ESs connected".into(),
            ));
        }
        let (lo, hi) = self.aps_per_es_range;
        if lo < 1 || lo > hi {
            return Err(Error::InvalidConfig(
                "topology: aps_per_es_range must be a nonempty range starting at >= 1".into(),
            ));
        }
        Gammas {
            a: self.gamma_a,
            e: self.gamma_e,
            c: self.gamma_c,
        }
        .validate()
    }
}

/// The static graph plus derived hop-distance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// Sorted neighbor sets, one per ES.
    es_adj: Vec<BTreeSet<EsId>>,
    /// Per AP: directly linked ESs with their hop distance.
    ap_links: Vec<BTreeMap<EsId, u32>>,
    /// ESs with a direct CC link, with their hop distance.
    cc_gateways: BTreeMap<EsId, u32>,
    /// All-pairs ES hop counts from BFS.
    es_hops: Vec<Vec<u32>>,
    gamma: Gammas,
    seed: u64,
}

/// Inverse-distance selection probabilities, one row per AP.
///
/// Within a row, entries for unconnected ESs are exactly zero; connected
/// entries are proportional to 1/distance and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrix {
    p_ae: Vec<Vec<f64>>,
}

impl SelectionMatrix {
    pub fn row(&self, ap: ApId) -> &[f64] {
        &self.p_ae[ap]
    }

    pub fn num_aps(&self) -> usize {
        self.p_ae.len()
    }
}

/// Serialized form: edge list, per-AP link lists, gateway distances and the
/// sparse direct AP-ES distances.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyJson {
    es_adj: Vec<(EsId, EsId)>,
    ap_links: Vec<Vec<EsId>>,
    cc_gateways: Vec<(EsId, u32)>,
    d_ae_direct: Vec<(ApId, EsId, u32)>,
    gamma: Gammas,
    seed: u64,
}

/// Generates a random connected topology; deterministic for a fixed config.
///
/// The ES graph is a random spanning tree plus random extra edges up to the
/// configured average degree. Each AP attaches to a few ESs at direct
/// distances drawn from {1, 2, 3}; gateways get CC distances from the same
/// range.
pub fn generate_topology(cfg: &TopologyConfig) -> Result<Topology, Error> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Topology);
    let e = cfg.num_es;

    let mut edges: BTreeSet<(EsId, EsId)> = BTreeSet::new();
    let mut order: Vec<EsId> = (0..e).collect();
    order.shuffle(&mut rng);
    for i in 1..e {
        let parent = order[rng.gen_range(0..i)];
        let (u, v) = (order[i].min(parent), order[i].max(parent));
        edges.insert((u, v));
    }
    let target_edges = ((cfg.es_degree * e as f64 / 2.0).round() as usize)
        .min(e * (e - 1) / 2)
        .max(e.saturating_sub(1));
    let mut guard = 0usize;
    while edges.len() < target_edges && guard < 100_000 {
        guard += 1;
        let u = rng.gen_range(0..e);
        let v = rng.gen_range(0..e);
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }

    let mut ap_links: Vec<Vec<(EsId, u32)>> = Vec::with_capacity(cfg.num_ap);
    let (lo, hi) = cfg.aps_per_es_range;
    for _ in 0..cfg.num_ap {
        let count = rng.gen_range(lo..=hi).min(e);
        let mut ids: Vec<EsId> = (0..e).collect();
        ids.shuffle(&mut rng);
        let links = ids[..count]
            .iter()
            .map(|&es| (es, rng.gen_range(1..=3u32)))
            .collect();
        ap_links.push(links);
    }

    let mut ids: Vec<EsId> = (0..e).collect();
    ids.shuffle(&mut rng);
    let cc_gateways: Vec<(EsId, u32)> = ids[..cfg.cc_gateway_count]
        .iter()
        .map(|&es| (es, rng.gen_range(1..=3u32)))
        .collect();

    Topology::from_parts(
        edges.into_iter().collect(),
        ap_links,
        cc_gateways,
        Gammas {
            a: cfg.gamma_a,
            e: cfg.gamma_e,
            c: cfg.gamma_c,
        },
        cfg.seed,
    )
}

impl Topology {
    /// Builds a topology from explicit parts, validating every invariant:
    /// ids in range, ES graph connected, every AP attached, gateways
    /// nonempty, per-hop times strictly tiered.
    pub fn from_parts(
        es_edges: Vec<(EsId, EsId)>,
        ap_links: Vec<Vec<(EsId, u32)>>,
        cc_gateways: Vec<(EsId, u32)>,
        gamma: Gammas,
        seed: u64,
    ) -> Result<Topology, Error> {
        gamma.validate()?;
        let num_es = es_edges
            .iter()
            .flat_map(|&(u, v)| [u, v])
            .chain(ap_links.iter().flatten().map(|&(es, _)| es))
            .chain(cc_gateways.iter().map(|&(es, _)| es))
            .max()
            .map(|m| m + 1)
            .unwrap_or(1);
        let mut adj: Vec<BTreeSet<EsId>> = vec![BTreeSet::new(); num_es];
        for &(u, v) in &es_edges {
            if u == v {
                return Err(Error::InvalidConfig(format!("self-loop on ES {u}")));
            }
            adj[u].insert(v);
            adj[v].insert(u);
        }
        if ap_links.is_empty() {
            return Err(Error::InvalidConfig("topology: no APs".into()));
        }
        let mut links: Vec<BTreeMap<EsId, u32>> = Vec::with_capacity(ap_links.len());
        for (ap, list) in ap_links.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::InvalidConfig(format!("AP {ap} has no ES link")));
            }
            let mut map = BTreeMap::new();
            for &(es, d) in list {
                if d == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "AP {ap} -> ES {es} distance must be >= 1"
                    )));
                }
                map.insert(es, d);
            }
            links.push(map);
        }
        if cc_gateways.is_empty() {
            return Err(Error::InvalidConfig("topology: no CC gateway".into()));
        }
        let mut gateways = BTreeMap::new();
        for &(es, d) in &cc_gateways {
            if d == 0 {
                return Err(Error::InvalidConfig(format!(
                    "gateway ES {es} CC distance must be >= 1"
                )));
            }
            gateways.insert(es, d);
        }

        let es_hops: Vec<Vec<u32>> = (0..num_es).map(|src| bfs_hops(&adj, src)).collect();
        if es_hops[0].iter().any(|&d| d == u32::MAX) {
            return Err(Error::InvalidConfig("ES graph is not connected".into()));
        }
        Ok(Topology {
            es_adj: adj,
            ap_links: links,
            cc_gateways: gateways,
            es_hops,
            gamma,
            seed,
        })
    }

    pub fn num_es(&self) -> usize {
        self.es_adj.len()
    }

    pub fn num_aps(&self) -> usize {
        self.ap_links.len()
    }

    pub fn gamma(&self) -> Gammas {
        self.gamma
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sorted ES-ES neighbors of `es`.
    pub fn neighbors(&self, es: EsId) -> impl Iterator<Item = EsId> + '_ {
        self.es_adj[es].iter().copied()
    }

    /// Direct AP->ES hop distance, `None` when not linked.
    pub fn d_ae(&self, ap: ApId, es: EsId) -> Option<u32> {
        self.ap_links.get(ap)?.get(&es).copied()
    }

    /// ESs directly linked to `ap`, ascending id, with distances.
    pub fn ap_linked_es(&self, ap: ApId) -> impl Iterator<Item = (EsId, u32)> + '_ {
        self.ap_links[ap].iter().map(|(&es, &d)| (es, d))
    }

    /// ES->CC hop distance, `None` for non-gateways.
    pub fn d_ec(&self, es: EsId) -> Option<u32> {
        self.cc_gateways.get(&es).copied()
    }

    pub fn gateways(&self) -> impl Iterator<Item = (EsId, u32)> + '_ {
        self.cc_gateways.iter().map(|(&es, &d)| (es, d))
    }

    fn check_es(&self, es: EsId) -> Result<(), Error> {
        if es >= self.num_es() {
            return Err(Error::IdOutOfRange {
                kind: "ES",
                id: es,
                max: self.num_es(),
            });
        }
        Ok(())
    }

    /// Hop count between two ESs (BFS shortest path over the ES graph).
    pub fn hop_distance_es(&self, e1: EsId, e2: EsId) -> Result<u32, Error> {
        self.check_es(e1)?;
        self.check_es(e2)?;
        Ok(self.es_hops[e1][e2])
    }

    /// All ESs (including `e1` itself at hop 0) ordered by ascending hop
    /// count, ties broken by ascending id.
    pub fn es_ring_order(&self, e1: EsId) -> Result<Vec<(EsId, u32)>, Error> {
        self.check_es(e1)?;
        let mut out: Vec<(EsId, u32)> = self.es_hops[e1]
            .iter()
            .enumerate()
            .map(|(es, &d)| (es, d))
            .collect();
        out.sort_by_key(|&(es, d)| (d, es));
        Ok(out)
    }

    /// Gateway minimizing hop distance from `e1`; ties broken by smaller CC
    /// distance, then smaller id.
    pub fn nearest_cc_gateway(&self, e1: EsId) -> Result<(EsId, u32), Error> {
        self.check_es(e1)?;
        self.cc_gateways
            .iter()
            .map(|(&es, &dec)| (self.es_hops[e1][es], dec, es))
            .min()
            .map(|(hops, _, es)| (es, hops))
            .ok_or_else(|| Error::InvalidConfig("topology: no CC gateway".into()))
    }

    /// Inverse-distance selection probabilities for every AP row.
    pub fn ap_selection_matrix(&self) -> SelectionMatrix {
        let e = self.num_es();
        let p_ae = self
            .ap_links
            .iter()
            .map(|links| {
                let norm: f64 = links.values().map(|&d| 1.0 / d as f64).sum();
                let mut row = vec![0.0; e];
                for (&es, &d) in links {
                    row[es] = (1.0 / d as f64) / norm;
                }
                row
            })
            .collect();
        SelectionMatrix { p_ae }
    }

    pub fn to_json(&self) -> String {
        let mut d_ae_direct = Vec::new();
        for (ap, links) in self.ap_links.iter().enumerate() {
            for (&es, &d) in links {
                d_ae_direct.push((ap, es, d));
            }
        }
        let doc = TopologyJson {
            es_adj: self
                .es_adj
                .iter()
                .enumerate()
                .flat_map(|(u, ns)| {
                    ns.iter()
                        .filter(move |&&v| v > u)
                        .map(move |&v| (u, v))
                })
                .collect(),
            ap_links: self
                .ap_links
                .iter()
                .map(|links| links.keys().copied().collect())
                .collect(),
            cc_gateways: self.cc_gateways.iter().map(|(&es, &d)| (es, d)).collect(),
            d_ae_direct,
            gamma: self.gamma,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&doc).expect("topology serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Topology, Error> {
        let doc: TopologyJson = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("topology json: {e}")))?;
        let mut ap_links: Vec<Vec<(EsId, u32)>> = vec![Vec::new(); doc.ap_links.len()];
        for (ap, es, d) in doc.d_ae_direct {
            if ap >= ap_links.len() {
                return Err(Error::InvalidConfig(format!(
                    "topology json: d_ae_direct references AP {ap} beyond ap_links"
                )));
            }
            ap_links[ap].push((es, d));
        }
        for (ap, (listed, built)) in doc.ap_links.iter().zip(&ap_links).enumerate() {
            let mut have: Vec<EsId> = built.iter().map(|&(es, _)| es).collect();
            have.sort_unstable();
            if *listed != have {
                return Err(Error::InvalidConfig(format!(
                    "topology json: ap_links and d_ae_direct disagree for AP {ap}"
                )));
            }
        }
        Topology::from_parts(doc.es_adj, ap_links, doc.cc_gateways, doc.gamma, doc.seed)
    }
}

fn bfs_hops(adj: &[BTreeSet<EsId>], src: EsId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    let mut queue = VecDeque::new();
    dist[src] = 0;
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: textbook BFS written against the edge list, not
    /// the adjacency sets the implementation walks.
    fn bfs_oracle(num_es: usize, edges: &[(EsId, EsId)], src: EsId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; num_es];
        dist[src] = 0;
        let mut frontier = vec![src];
        let mut hop = 0u32;
        while !frontier.is_empty() {
            hop += 1;
            let mut next = Vec::new();
            for &u in &frontier {
                for &(a, b) in edges {
                    let v = if a == u {
                        b
                    } else if b == u {
                        a
                    } else {
                        continue;
                    };
                    if dist[v] == u32::MAX {
                        dist[v] = hop;
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        dist
    }

    fn fixture_edges() -> Vec<(EsId, EsId)> {
        // Eight sparsely linked ESs (ids 0..8 standing for ES_1..ES_8):
        // from ES_6 the rings are ES_7 at 1 hop, ES_4/ES_8 at 2, ES_2 at 3,
        // ES_1/ES_3/ES_5 at 4.
        vec![(5, 6), (6, 3), (6, 7), (3, 1), (1, 0), (1, 2), (1, 4)]
    }

    fn fixture() -> Topology {
        Topology::from_parts(
            fixture_edges(),
            vec![vec![(5, 1)]], // AP_1 -> ES_6 at 1 hop
            vec![(3, 1), (0, 2)], // ES_4 and ES_1 reach the CC
            Gammas { a: 2, e: 10, c: 25 },
            0,
        )
        .unwrap()
    }

    #[test]
    fn smallest_legal_topology() {
        let t = Topology::from_parts(
            vec![],
            vec![vec![(0, 1)]],
            vec![(0, 2)],
            Gammas { a: 2, e: 10, c: 25 },
            0,
        )
        .unwrap();
        assert_eq!(t.num_es(), 1);
        assert_eq!(t.hop_distance_es(0, 0).unwrap(), 0);
        assert_eq!(t.d_ec(0), Some(2));
        assert_eq!(t.es_ring_order(0).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn gamma_ordering_enforced() {
        let bad = Gammas { a: 2, e: 10, c: 10 };
        assert!(Topology::from_parts(vec![], vec![vec![(0, 1)]], vec![(0, 1)], bad, 0).is_err());
    }

    #[test]
    fn generate_table_scale() {
        let cfg = TopologyConfig::default();
        let t = generate_topology(&cfg).unwrap();
        assert_eq!(t.num_es(), 30);
        assert_eq!(t.num_aps(), 100);
        // connected
        for e2 in 0..30 {
            assert_ne!(t.hop_distance_es(0, e2).unwrap(), u32::MAX);
        }
        // every AP attached
        for ap in 0..100 {
            assert!(t.ap_linked_es(ap).count() >= 1);
        }
        // gateways exactly the finite d_ec entries
        let gws: Vec<EsId> = t.gateways().map(|(es, _)| es).collect();
        assert_eq!(gws.len(), 5);
        for es in 0..30 {
            assert_eq!(t.d_ec(es).is_some(), gws.contains(&es));
        }
    }

    #[test]
    fn generate_is_deterministic() {
        let cfg = TopologyConfig::default();
        let a = generate_topology(&cfg).unwrap();
        let b = generate_topology(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let mut cfg2 = cfg.clone();
        cfg2.seed = 2;
        assert_ne!(generate_topology(&cfg2).unwrap(), a);
    }

    #[test]
    fn generate_rejects_disconnectable_degree() {
        let cfg = TopologyConfig {
            num_es: 10,
            es_degree: 1.5,
            ..TopologyConfig::default()
        };
        assert!(generate_topology(&cfg).is_err());
    }

    #[test]
    fn hops_match_bfs_oracle() {
        for seed in 0..5u64 {
            let cfg = TopologyConfig {
                seed,
                ..TopologyConfig::default()
            };
            let t = generate_topology(&cfg).unwrap();
            let edges: Vec<(EsId, EsId)> = (0..t.num_es())
                .flat_map(|u| t.neighbors(u).filter(move |&v| v > u).map(move |v| (u, v)))
                .collect();
            for src in 0..t.num_es() {
                let oracle = bfs_oracle(t.num_es(), &edges, src);
                for dst in 0..t.num_es() {
                    assert_eq!(t.hop_distance_es(src, dst).unwrap(), oracle[dst]);
                }
            }
        }
    }

    #[test]
    fn hop_distance_basics() {
        let t = fixture();
        assert_eq!(t.hop_distance_es(5, 5).unwrap(), 0);
        assert_eq!(t.hop_distance_es(5, 6).unwrap(), 1);
        assert_eq!(t.hop_distance_es(6, 5).unwrap(), 1);
        assert!(t.hop_distance_es(9, 0).is_err());
    }

    #[test]
    fn ring_order_matches_fixture_narrative() {
        let t = fixture();
        let ring = t.es_ring_order(5).unwrap();
        assert_eq!(
            ring,
            vec![(5, 0), (6, 1), (3, 2), (7, 2), (1, 3), (0, 4), (2, 4), (4, 4)]
        );
    }

    #[test]
    fn ring_order_is_total_and_monotone() {
        let t = generate_topology(&TopologyConfig::default()).unwrap();
        for e1 in 0..t.num_es() {
            let ring = t.es_ring_order(e1).unwrap();
            assert_eq!(ring.len(), t.num_es());
            let mut ids: Vec<EsId> = ring.iter().map(|&(es, _)| es).collect();
            ids.sort_unstable();
            assert_eq!(ids, (0..t.num_es()).collect::<Vec<_>>());
            assert!(ring.windows(2).all(|w| w[0].1 <= w[1].1));
            assert_eq!(ring[0], (e1, 0));
        }
    }

    #[test]
    fn nearest_gateway_fixture() {
        let t = fixture();
        // From ES_6: ES_4 is the 2-hop gateway; ES_1 sits 4 hops away.
        assert_eq!(t.nearest_cc_gateway(5).unwrap(), (3, 2));
        // A gateway asking for itself wins at 0 hops.
        assert_eq!(t.nearest_cc_gateway(3).unwrap(), (3, 0));
    }

    #[test]
    fn nearest_gateway_matches_exhaustive_scan() {
        for seed in 0..5u64 {
            let cfg = TopologyConfig {
                seed,
                ..TopologyConfig::default()
            };
            let t = generate_topology(&cfg).unwrap();
            for e1 in 0..t.num_es() {
                let expect = t
                    .gateways()
                    .map(|(es, dec)| (t.hop_distance_es(e1, es).unwrap(), dec, es))
                    .min()
                    .map(|(h, _, es)| (es, h))
                    .unwrap();
                assert_eq!(t.nearest_cc_gateway(e1).unwrap(), expect);
            }
        }
    }

    #[test]
    fn selection_probabilities_example() {
        let t = Topology::from_parts(
            vec![(0, 1), (1, 2)],
            vec![vec![(0, 1), (1, 2), (2, 3)]],
            vec![(0, 1)],
            Gammas { a: 2, e: 10, c: 25 },
            0,
        )
        .unwrap();
        let sel = t.ap_selection_matrix();
        let row = sel.row(0);
        assert!((row[0] - 6.0 / 11.0).abs() < 1e-12);
        assert!((row[1] - 3.0 / 11.0).abs() < 1e-12);
        assert!((row[2] - 2.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn selection_degenerate_rows() {
        let t = Topology::from_parts(
            vec![(0, 1)],
            vec![vec![(0, 2)], vec![(0, 3), (1, 3)]],
            vec![(0, 1)],
            Gammas { a: 2, e: 10, c: 25 },
            0,
        )
        .unwrap();
        let sel = t.ap_selection_matrix();
        assert_eq!(sel.row(0), &[1.0, 0.0]);
        assert_eq!(sel.row(1), &[0.5, 0.5]);
    }

    #[test]
    fn selection_rows_are_stochastic_and_monotone() {
        let t = generate_topology(&TopologyConfig::default()).unwrap();
        let sel = t.ap_selection_matrix();
        for ap in 0..t.num_aps() {
            let row = sel.row(ap);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "AP {ap} row sums to {sum}");
            for es in 0..t.num_es() {
                match t.d_ae(ap, es) {
                    Some(_) => assert!(row[es] > 0.0),
                    None => assert_eq!(row[es], 0.0),
                }
            }
            // closer => no smaller probability
            let linked: Vec<(u32, f64)> =
                t.ap_linked_es(ap).map(|(es, d)| (d, row[es])).collect();
            for &(d1, p1) in &linked {
                for &(d2, p2) in &linked {
                    if d1 < d2 {
                        assert!(p1 >= p2);
                    }
                }
            }
        }
    }

    #[test]
    fn json_roundtrip() {
        let t = generate_topology(&TopologyConfig::default()).unwrap();
        let json = t.to_json();
        let back = Topology::from_json(&json).unwrap();
        assert_eq!(t, back);
        assert_eq!(json, back.to_json());
    }
}
