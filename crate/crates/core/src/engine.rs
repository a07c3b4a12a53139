//! The request-serving core.
//!
//! Per request: the ingress AP picks a connected ES by inverse-distance
//! probability; that ES searches the edge network in ascending hop order for
//! the k distinct coded blocks of the content (one block, for whole-item
//! policies); anything missing comes from the cloud through the nearest
//! gateway ES. All fetches run in parallel, so total latency is the maximum
//! of the edge component and the cloud path. Revenue accrues only when that
//! total meets the deadline.
//!
//! Placement runs on two triggers: blocks fetched from the cloud, and -- on a
//! deadline miss served entirely from the edge -- the blocks whose individual
//! fetch time violated the deadline. Placed blocks go to the serving ES's
//! private region with probability alpha, otherwise to the public region of a
//! uniformly random 1-hop neighbor.
//!
//! One `Simulation` owns all mutable state and is single-threaded; distinct
//! simulations share nothing mutable and may run concurrently.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::codec::BlockKey;
use crate::error::Error;
use crate::rng::{stream_rng, substream_rng, CumulativeSampler, Stream};
use crate::storage::{warmup, ApLoadEstimator, Directory, EdgeStore, PartRef, StorageConfig};
use crate::topology::{SelectionMatrix, Topology};
use crate::workload::{PriorityMap, Request};
use crate::{ApId, ContentId, EsId, Revenue, TimeUnits};

/// The four caching policies under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Dynamic space partitioning with erasure coding: partitioned stores,
    /// per-AP shares tracking arrival rates, coded blocks.
    #[serde(rename = "DSPE")]
    Dspe,
    /// Erasure-coded, fully public stores.
    E,
    /// Partitioned stores with static equal per-AP shares, whole items.
    #[serde(rename = "DSP")]
    Dsp,
    /// Fully public cooperative caching, whole items.
    #[serde(rename = "DCC")]
    Dcc,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [PolicyKind::Dspe, PolicyKind::E, PolicyKind::Dsp, PolicyKind::Dcc];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Dspe => "DSPE",
            PolicyKind::E => "E",
            PolicyKind::Dsp => "DSP",
            PolicyKind::Dcc => "DCC",
        }
    }

    pub fn parse(s: &str) -> Result<PolicyKind, Error> {
        match s.to_ascii_uppercase().as_str() {
            "DSPE" => Ok(PolicyKind::Dspe),
            "E" => Ok(PolicyKind::E),
            "DSP" => Ok(PolicyKind::Dsp),
            "DCC" => Ok(PolicyKind::Dcc),
            _ => Err(Error::UnknownPolicy(s.into())),
        }
    }

    pub fn uses_ec(self) -> bool {
        matches!(self, PolicyKind::Dspe | PolicyKind::E)
    }

    /// Whether the policy keeps a private region at all.
    pub fn partitions(self) -> bool {
        matches!(self, PolicyKind::Dspe | PolicyKind::Dsp)
    }
}

/// A policy with its parameters resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Private share; forced to 0 for the fully public policies.
    pub alpha: f64,
    /// Re-apportion private shares at window boundaries (DSPE only).
    pub dynamic_shares: bool,
}

impl PolicySpec {
    /// Standard parameterization of `kind` given the configured alpha.
    pub fn new(kind: PolicyKind, alpha: f64) -> PolicySpec {
        match kind {
            PolicyKind::Dspe => PolicySpec {
                kind,
                alpha,
                dynamic_shares: true,
            },
            PolicyKind::Dsp => PolicySpec {
                kind,
                alpha,
                dynamic_shares: false,
            },
            PolicyKind::E | PolicyKind::Dcc => PolicySpec {
                kind,
                alpha: 0.0,
                dynamic_shares: false,
            },
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig("policy: alpha must be in [0, 1]".into()));
        }
        if !self.kind.partitions() && self.alpha != 0.0 {
            return Err(Error::InvalidConfig(format!(
                "policy {}: alpha must be 0",
                self.kind.label()
            )));
        }
        if self.dynamic_shares && self.kind != PolicyKind::Dspe {
            return Err(Error::InvalidConfig(format!(
                "policy {}: dynamic shares are a DSPE mechanism",
                self.kind.label()
            )));
        }
        Ok(())
    }
}

/// Erasure-code split: k data blocks, m parity blocks. In logical mode only
/// the counts matter; payload math lives in the codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcSplit {
    pub k: usize,
    pub m: usize,
}

impl Default for EcSplit {
    fn default() -> Self {
        EcSplit { k: 10, m: 4 }
    }
}

impl EcSplit {
    pub fn validate(&self) -> Result<(), Error> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("ec: k must be >= 1".into()));
        }
        if self.k + self.m > 256 {
            return Err(Error::InvalidConfig(format!(
                "ec: k + m = {} exceeds the GF(2^8) bound of 256",
                self.k + self.m
            )));
        }
        Ok(())
    }

    pub fn overhead(&self) -> f64 {
        (self.k + self.m) as f64 / self.k as f64
    }
}

/// Content catalog profile the engine needs for warmup placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub num_contents: ContentId,
    pub zipf_s: f64,
}

/// Engine knobs left open by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimOptions {
    /// On an edge-served deadline miss, copy the deadline-violating blocks
    /// toward the serving ES so later requests can meet the deadline.
    pub replace_on_deadline_miss: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            replace_on_deadline_miss: true,
        }
    }
}

/// One block located at the edge: where it sits and how many ES-ES hops away.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoundBlock {
    pub key: BlockKey,
    pub holder: EsId,
    pub hops: u32,
}

/// Latency components of one request; `total` is the max of the present
/// parts since all fetches run in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LatencyBreakdown {
    /// Edge-only component; absent when nothing was found at the edge.
    pub t_ae: Option<TimeUnits>,
    /// Cloud-path component; absent when no CC fetch happened.
    pub t_aec: Option<TimeUnits>,
    /// Contributing ES farthest from the serving ES.
    pub farthest_es: Option<EsId>,
    /// Gateway ES used for the CC fetch.
    pub gateway: Option<EsId>,
}

impl LatencyBreakdown {
    pub fn total(&self) -> TimeUnits {
        self.t_ae.unwrap_or(0).max(self.t_aec.unwrap_or(0))
    }
}

/// Where one block ended up during placement.
pub type PlacementRecord = (BlockKey, EsId, PartRef);

/// Per-request result.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub seq: u64,
    pub served: bool,
    pub revenue_earned: Revenue,
    pub latency: LatencyBreakdown,
    pub blocks_from_edge: usize,
    pub blocks_from_cc: usize,
    pub placements: Vec<PlacementRecord>,
}

/// Aggregated result of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub policy: String,
    pub config_fingerprint: String,
    pub seed: u64,
    pub alpha: f64,
    pub k: usize,
    pub m: usize,
    pub ec_overhead: f64,
    pub total_revenue: Revenue,
    pub served_count: u64,
    pub request_count: u64,
    /// Requests fully located at the edge.
    pub edge_hit_count: u64,
    /// Requests that needed at least one CC fetch.
    pub cc_fetch_count: u64,
    pub deadline_miss_count: u64,
    pub per_priority_revenue: PriorityMap<Revenue>,
    /// Sum of per-request total latencies; deterministic.
    pub sim_time_units: u64,
    /// Measured wall-clock time of the run; informational only.
    pub wall_seconds: f64,
    pub final_occupancy_slots: u64,
    pub final_capacity_slots: u64,
}

impl SimReport {
    /// Equality over the deterministic result fields, ignoring the policy
    /// label, fingerprint and wall-clock time.
    pub fn same_results(&self, other: &SimReport) -> bool {
        (
            self.seed,
            self.total_revenue,
            self.served_count,
            self.request_count,
            self.edge_hit_count,
            self.cc_fetch_count,
            self.deadline_miss_count,
            self.per_priority_revenue,
            self.sim_time_units,
            self.final_occupancy_slots,
        ) == (
            other.seed,
            other.total_revenue,
            other.served_count,
            other.request_count,
            other.edge_hit_count,
            other.cc_fetch_count,
            other.deadline_miss_count,
            other.per_priority_revenue,
            other.sim_time_units,
            other.final_occupancy_slots,
        )
    }
}

/// Everything needed to run one simulation besides the trace and seed.
#[derive(Debug, Clone, Copy)]
pub struct SimSetup<'a> {
    pub topo: &'a Topology,
    pub policy: PolicySpec,
    pub ec: EcSplit,
    pub storage: StorageConfig,
    pub catalog: Catalog,
    pub opts: SimOptions,
}

/// Mutable state of one in-flight simulation.
pub struct Simulation<'a> {
    topo: &'a Topology,
    policy: PolicySpec,
    ec: EcSplit,
    opts: SimOptions,
    min_ap_slots: u32,
    /// Block indices per content: k+m coded blocks, or 1 whole item.
    n_indices: u8,
    /// Distinct indices needed to serve a request.
    need_k: usize,
    sel: SelectionMatrix,
    /// Ring order per ES: all ESs ascending by (hop, id).
    rings: Vec<Vec<(EsId, u32)>>,
    /// Nearest CC gateway per ES.
    gateways: Vec<(EsId, u32)>,
    /// Sorted 1-hop neighbors per ES.
    neighbors: Vec<Vec<EsId>>,
    stores: Vec<EdgeStore>,
    dir: Directory,
    est: ApLoadEstimator,
    selection_rng: ChaCha12Rng,
    seed: u64,
}

impl<'a> Simulation<'a> {
    /// Builds stores, metadata and RNG streams, then pre-fills the stores.
    pub fn new(setup: SimSetup<'a>, seed: u64) -> Result<Simulation<'a>, Error> {
        setup.policy.validate()?;
        setup.ec.validate()?;
        setup.storage.validate()?;
        let topo = setup.topo;
        let policy = setup.policy;
        let (n_indices, need_k, block_slots) = if policy.kind.uses_ec() {
            ((setup.ec.k + setup.ec.m) as u8, setup.ec.k, 1u32)
        } else {
            (1u8, 1usize, setup.ec.k as u32)
        };

        let mut storage = setup.storage;
        storage.alpha = policy.alpha;
        // Per-ES AP attachments, from the AP side of the topology.
        let mut attached: Vec<Vec<ApId>> = vec![Vec::new(); topo.num_es()];
        for ap in 0..topo.num_aps() {
            for (es, _) in topo.ap_linked_es(ap) {
                attached[es].push(ap);
            }
        }
        if storage.alpha > 0.0 {
            let private = ((storage.alpha * storage.s_e as f64) + 1e-9).floor() as u64;
            for (es, aps) in attached.iter().enumerate() {
                if storage.min_ap_slots as u64 * aps.len() as u64 > private {
                    return Err(Error::InvalidConfig(format!(
                        "storage: ES {es} has {} APs but only {private} private slots \
                         for a floor of {}",
                        aps.len(),
                        storage.min_ap_slots
                    )));
                }
            }
        }
        let stores: Vec<EdgeStore> = attached
            .iter()
            .enumerate()
            .map(|(es, aps)| EdgeStore::new(es, &storage, aps, block_slots))
            .collect();

        let rings = (0..topo.num_es())
            .map(|e| topo.es_ring_order(e))
            .collect::<Result<Vec<_>, _>>()?;
        let gateways = (0..topo.num_es())
            .map(|e| topo.nearest_cc_gateway(e))
            .collect::<Result<Vec<_>, _>>()?;
        let neighbors = (0..topo.num_es())
            .map(|e| topo.neighbors(e).collect())
            .collect();

        let mut sim = Simulation {
            topo,
            policy,
            ec: setup.ec,
            opts: setup.opts,
            min_ap_slots: storage.min_ap_slots,
            n_indices,
            need_k,
            sel: topo.ap_selection_matrix(),
            rings,
            gateways,
            neighbors,
            stores,
            dir: Directory::new(),
            est: ApLoadEstimator::new(topo.num_aps(), storage.ewma_rho, storage.rebalance_window),
            selection_rng: stream_rng(seed, Stream::Selection),
            seed,
        };
        let popularity =
            CumulativeSampler::zipf(setup.catalog.num_contents as usize, setup.catalog.zipf_s);
        warmup(
            &mut sim.stores,
            &mut sim.dir,
            setup.catalog.num_contents,
            n_indices,
            &popularity,
            storage.warmup_blocks,
            seed,
        );
        Ok(sim)
    }

    pub fn directory(&self) -> &Directory {
        &self.dir
    }

    pub fn stores(&self) -> &[EdgeStore] {
        &self.stores
    }

    /// Test/setup hook: drop a block into an ES's public region.
    pub fn seed_public_block(&mut self, es: EsId, key: BlockKey) -> Result<(), Error> {
        self.stores[es].insert_public(key, &mut self.dir)?;
        Ok(())
    }

    /// Inverse-transform draw over the AP's selection row: the unit interval
    /// is split into subranges proportional to the row, ascending ES id;
    /// r = 0 lands in the first subrange.
    pub fn select_edge_server(&mut self, ap: ApId) -> EsId {
        let row = self.sel.row(ap);
        let r: f64 = self.selection_rng.gen();
        let mut cum = 0.0;
        let mut last = None;
        for (es, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            cum += p;
            last = Some(es);
            if r < cum {
                return es;
            }
        }
        last.expect("every AP has a connected ES")
    }

    /// Walks the ES rings outward from `e1` collecting holders for distinct
    /// block indices of `content` (first holder encountered wins) until
    /// enough are found or the network is exhausted. Returns the found
    /// blocks in encounter order plus the count still missing.
    pub fn find_blocks(&self, e1: EsId, content: ContentId) -> (Vec<FoundBlock>, usize) {
        let n = self.n_indices as usize;
        let holders: Vec<&[EsId]> = (0..n)
            .map(|idx| self.dir.holders(&BlockKey::new(content, idx as u8)))
            .collect();
        let mut have = vec![false; n];
        let mut found = Vec::with_capacity(self.need_k);
        'ring: for &(es, hops) in &self.rings[e1] {
            for (idx, held) in holders.iter().enumerate() {
                if have[idx] || held.binary_search(&es).is_err() {
                    continue;
                }
                have[idx] = true;
                found.push(FoundBlock {
                    key: BlockKey::new(content, idx as u8),
                    holder: es,
                    hops,
                });
                if found.len() == self.need_k {
                    break 'ring;
                }
            }
        }
        let missing = self.need_k - found.len();
        (found, missing)
    }

    /// Places an arriving block group per the alpha-probabilistic rule: one
    /// draw decides the whole group, which goes either to `e1`'s private
    /// region for `ap` or to the public region of one uniformly random 1-hop
    /// neighbor (falling back to `e1` itself when it has none). Returns what
    /// was actually stored.
    pub fn place_blocks(
        &mut self,
        keys: &[BlockKey],
        e1: EsId,
        ap: ApId,
        seq: u64,
    ) -> Vec<PlacementRecord> {
        if keys.is_empty() {
            return Vec::new();
        }
        let mut rng = substream_rng(self.seed, Stream::Placement, seq);
        let mut placed = Vec::new();
        let u: f64 = rng.gen();
        if u < self.policy.alpha {
            for &key in keys {
                let out = self.stores[e1]
                    .insert_private(ap, key, &mut self.dir)
                    .expect("alpha > 0 and ap selected e1");
                if out.stored {
                    placed.push((key, e1, PartRef::Private(ap)));
                }
            }
        } else {
            let target = if self.neighbors[e1].is_empty() {
                e1
            } else {
                self.neighbors[e1][rng.gen_range(0..self.neighbors[e1].len())]
            };
            for &key in keys {
                // A zero-capacity public region just drops the copy.
                if let Ok(out) = self.stores[target].insert_public(key, &mut self.dir) {
                    if out.stored {
                        placed.push((key, target, PartRef::Public));
                    }
                }
            }
        }
        placed
    }

    /// Serves one request end to end; every request yields an outcome.
    pub fn serve_request(&mut self, req: &Request) -> Outcome {
        let window_closed = self.est.record_arrival(req.ap);
        let e1 = self.select_edge_server(req.ap);
        let (found, missing) = self.find_blocks(e1, req.content);
        // The located blocks are fetched in every branch; refresh recency.
        for f in &found {
            self.stores[f.holder].lookup(&f.key);
        }
        let gamma = self.topo.gamma();
        let ae_leg = self.topo.d_ae(req.ap, e1).expect("e1 selected from ap links") as TimeUnits
            * gamma.a as TimeUnits;
        let (t_ae, farthest) = if found.is_empty() {
            (None, None)
        } else {
            let far = found.iter().max_by_key(|f| f.hops).expect("nonempty");
            (
                Some(ae_leg + far.hops as TimeUnits * gamma.e as TimeUnits),
                Some(far.holder),
            )
        };

        let mut latency = LatencyBreakdown {
            t_ae,
            t_aec: None,
            farthest_es: farthest,
            gateway: None,
        };
        let mut placements = Vec::new();
        if missing > 0 {
            let (e2, e2_hops) = self.gateways[e1];
            let d_ec = self.topo.d_ec(e2).expect("gateway");
            latency.t_aec = Some(
                d_ec as TimeUnits * gamma.c as TimeUnits
                    + ae_leg
                    + e2_hops as TimeUnits * gamma.e as TimeUnits,
            );
            latency.gateway = Some(e2);
            // The lowest unfound indices come from the CC and are always
            // placed at the edge.
            let mut cc_keys = Vec::with_capacity(missing);
            for idx in 0..self.n_indices {
                let key = BlockKey::new(req.content, idx);
                if !found.iter().any(|f| f.key == key) {
                    cc_keys.push(key);
                    if cc_keys.len() == missing {
                        break;
                    }
                }
            }
            placements = self.place_blocks(&cc_keys, e1, req.ap, req.seq);
        }
        let served = latency.total() <= req.deadline;
        if missing == 0 && !served && self.opts.replace_on_deadline_miss {
            // Edge-satisfiable but late: copy the violating blocks toward e1.
            let violating: Vec<BlockKey> = found
                .iter()
                .filter(|f| ae_leg + f.hops as TimeUnits * gamma.e as TimeUnits > req.deadline)
                .map(|f| f.key)
                .collect();
            placements = self.place_blocks(&violating, e1, req.ap, req.seq);
        }
        if window_closed && self.policy.dynamic_shares {
            let min_slots = self.min_ap_slots;
            for store in &mut self.stores {
                store.rebalance_private_shares(&self.est, min_slots, &mut self.dir);
            }
        }
        Outcome {
            seq: req.seq,
            served,
            revenue_earned: if served { req.revenue } else { 0 },
            latency,
            blocks_from_edge: found.len(),
            blocks_from_cc: missing,
            placements,
        }
    }
}

/// Checks that a trace's AP and content ids fit the topology and catalog.
pub fn validate_trace(topo: &Topology, catalog: Catalog, trace: &[Request]) -> Result<(), Error> {
    for req in trace {
        if req.ap >= topo.num_aps() {
            return Err(Error::IdMismatch(format!(
                "request {} names AP {} but the topology has {}",
                req.seq,
                req.ap,
                topo.num_aps()
            )));
        }
        if req.content >= catalog.num_contents {
            return Err(Error::IdMismatch(format!(
                "request {} names content {} but the catalog has {}",
                req.seq, req.content, catalog.num_contents
            )));
        }
    }
    Ok(())
}

/// Runs `trace` through a fresh simulation, returning the aggregate report.
pub fn run_simulation(setup: SimSetup, trace: &[Request], seed: u64) -> Result<SimReport, Error> {
    validate_trace(setup.topo, setup.catalog, trace)?;
    let mut sim = Simulation::new(setup, seed)?;
    Ok(sim.run_trace_observed(trace, |_| {}))
}

/// As [`run_simulation`], also returning every per-request outcome.
pub fn run_simulation_logged(
    setup: SimSetup,
    trace: &[Request],
    seed: u64,
) -> Result<(SimReport, Vec<Outcome>), Error> {
    validate_trace(setup.topo, setup.catalog, trace)?;
    let mut sim = Simulation::new(setup, seed)?;
    let mut log = Vec::with_capacity(trace.len());
    let report = sim.run_trace_observed(trace, |o| log.push(o.clone()));
    Ok((report, log))
}

impl<'a> Simulation<'a> {
    /// Serves the whole trace in sequence order and aggregates the report.
    pub fn run_trace(&mut self, trace: &[Request]) -> SimReport {
        self.run_trace_observed(trace, |_| {})
    }

    pub fn run_trace_observed(
        &mut self,
        trace: &[Request],
        mut observe: impl FnMut(&Outcome),
    ) -> SimReport {
        let start = std::time::Instant::now();
        let mut report = SimReport {
            policy: self.policy.kind.label().to_string(),
            config_fingerprint: String::new(),
            seed: self.seed,
            alpha: self.policy.alpha,
            k: self.ec.k,
            m: self.ec.m,
            ec_overhead: self.ec.overhead(),
            total_revenue: 0,
            served_count: 0,
            request_count: trace.len() as u64,
            edge_hit_count: 0,
            cc_fetch_count: 0,
            deadline_miss_count: 0,
            per_priority_revenue: PriorityMap {
                high: 0,
                medium: 0,
                low: 0,
            },
            sim_time_units: 0,
            wall_seconds: 0.0,
            final_occupancy_slots: 0,
            final_capacity_slots: 0,
        };
        for req in trace {
            let outcome = self.serve_request(req);
            debug_assert_eq!(outcome.served, outcome.latency.total() <= req.deadline);
            report.total_revenue += outcome.revenue_earned;
            report.served_count += u64::from(outcome.served);
            report.deadline_miss_count += u64::from(!outcome.served);
            if outcome.blocks_from_cc > 0 {
                report.cc_fetch_count += 1;
            } else {
                report.edge_hit_count += 1;
            }
            *report.per_priority_revenue.get_mut(req.priority) += outcome.revenue_earned;
            report.sim_time_units += outcome.latency.total();
            observe(&outcome);
        }
        report.final_occupancy_slots = self.stores.iter().map(|s| s.occupancy() as u64).sum();
        report.final_capacity_slots = self.stores.iter().map(|s| s.capacity() as u64).sum();
        debug_assert!(self.dir.audit(&self.stores));
        report.wall_seconds = start.elapsed().as_secs_f64();
        report
    }
}

/// Edge-only latency: the AP leg to `e1` plus the ES-ES leg to the farthest
/// contributing holder.
pub fn edge_latency(
    topo: &Topology,
    ap: ApId,
    e1: EsId,
    found: &[FoundBlock],
) -> Result<(TimeUnits, EsId), Error> {
    let gamma = topo.gamma();
    let d_ae = topo.d_ae(ap, e1).ok_or(Error::ApNotAttached { ap, es: e1 })?;
    let far = found
        .iter()
        .max_by_key(|f| f.hops)
        .ok_or_else(|| Error::InvalidConfig("edge_latency needs at least one found block".into()))?;
    Ok((
        d_ae as TimeUnits * gamma.a as TimeUnits + far.hops as TimeUnits * gamma.e as TimeUnits,
        far.holder,
    ))
}

/// Cloud-path latency through the gateway nearest to `e1`.
pub fn cc_latency(topo: &Topology, ap: ApId, e1: EsId) -> Result<(TimeUnits, EsId), Error> {
    let gamma = topo.gamma();
    let d_ae = topo.d_ae(ap, e1).ok_or(Error::ApNotAttached { ap, es: e1 })?;
    let (e2, hops) = topo.nearest_cc_gateway(e1)?;
    let d_ec = topo.d_ec(e2).expect("gateway has a CC link");
    Ok((
        d_ec as TimeUnits * gamma.c as TimeUnits
            + d_ae as TimeUnits * gamma.a as TimeUnits
            + hops as TimeUnits * gamma.e as TimeUnits,
        e2,
    ))
}

/// Aggregate revenue helper used by report checks: recompute totals from a
/// per-request outcome log.
pub fn recompute_revenue(outcomes: &[Outcome]) -> (Revenue, u64) {
    let revenue = outcomes.iter().map(|o| o.revenue_earned).sum();
    let served = outcomes.iter().filter(|o| o.served).count() as u64;
    (revenue, served)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_topology, Gammas, TopologyConfig};
    use crate::workload::Priority;
    use crate::workload::{generate_trace, TraceConfig};

    /// Worked-example topology: eight sparsely linked ESs (ids 0..8 stand
    /// for ES_1..ES_8), one AP on ES_6, CC reachable via ES_4 and ES_1.
    fn fixture_topology() -> Topology {
        Topology::from_parts(
            vec![(5, 6), (6, 3), (6, 7), (3, 1), (1, 0), (1, 2), (1, 4)],
            vec![vec![(5, 1)]],
            vec![(3, 1), (0, 2)],
            Gammas { a: 2, e: 10, c: 25 },
            0,
        )
        .unwrap()
    }

    fn fixture_setup<'a>(topo: &'a Topology, policy: PolicySpec) -> SimSetup<'a> {
        SimSetup {
            topo,
            policy,
            ec: EcSplit { k: 3, m: 1 },
            storage: StorageConfig {
                s_e: 20,
                alpha: 0.0,
                warmup_blocks: 0,
                ..StorageConfig::default()
            },
            catalog: Catalog {
                num_contents: 10,
                zipf_s: 0.8,
            },
            opts: SimOptions::default(),
        }
    }

    fn desk_setup<'a>(topo: &'a Topology, policy: PolicySpec) -> SimSetup<'a> {
        SimSetup {
            topo,
            policy,
            ec: EcSplit::default(),
            storage: StorageConfig::default(),
            catalog: Catalog {
                num_contents: 1000,
                zipf_s: 0.8,
            },
            opts: SimOptions::default(),
        }
    }

    #[test]
    fn selection_single_es_and_boundary() {
        let topo = fixture_topology();
        let setup = fixture_setup(&topo, PolicySpec::new(PolicyKind::E, 0.0));
        let mut sim = Simulation::new(setup, 1).unwrap();
        for _ in 0..50 {
            assert_eq!(sim.select_edge_server(0), 5);
        }
    }

    #[test]
    fn selection_frequencies_match_the_row() {
        let topo = Topology::from_parts(
            vec![(0, 1), (1, 2)],
            vec![vec![(0, 1), (1, 2), (2, 3)]],
            vec![(0, 1)],
            Gammas { a: 2, e: 10, c: 25 },
            0,
        )
        .unwrap();
        let setup = SimSetup {
            topo: &topo,
            policy: PolicySpec::new(PolicyKind::E, 0.0),
            ec: EcSplit { k: 2, m: 1 },
            storage: StorageConfig {
                s_e: 10,
                alpha: 0.0,
                warmup_blocks: 0,
                ..StorageConfig::default()
            },
            catalog: Catalog {
                num_contents: 5,
                zipf_s: 0.8,
            },
            opts: SimOptions::default(),
        };
        let mut sim = Simulation::new(setup, 7).unwrap();
        let mut counts = [0u32; 3];
        for _ in 0..100_000 {
            counts[sim.select_edge_server(0)] += 1;
        }
        let expect = [6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0];
        for (c, e) in counts.iter().zip(expect) {
            let freq = *c as f64 / 100_000.0;
            assert!((freq - e).abs() < 0.01, "freq {freq} expect {e}");
        }
    }

    #[test]
    fn find_blocks_walks_rings_like_the_worked_example() {
        let topo = fixture_topology();
        let setup = fixture_setup(&topo, PolicySpec::new(PolicyKind::E, 0.0));
        let mut sim = Simulation::new(setup, 1).unwrap();
        // d1 on ES_7 (id 6), d2 on ES_2 (id 1); d3 and p1 only in the cloud.
        sim.seed_public_block(6, BlockKey::new(0, 0)).unwrap();
        sim.seed_public_block(1, BlockKey::new(0, 1)).unwrap();
        let (found, missing) = sim.find_blocks(5, 0);
        assert_eq!(missing, 1);
        assert_eq!(
            found,
            vec![
                FoundBlock {
                    key: BlockKey::new(0, 0),
                    holder: 6,
                    hops: 1
                },
                FoundBlock {
                    key: BlockKey::new(0, 1),
                    holder: 1,
                    hops: 3
                },
            ]
        );
    }

    #[test]
    fn find_blocks_prefers_the_closer_replica() {
        let topo = fixture_topology();
        let setup = fixture_setup(&topo, PolicySpec::new(PolicyKind::E, 0.0));
        let mut sim = Simulation::new(setup, 1).unwrap();
        // the same block at 1 hop (ES_7) and 3 hops (ES_2): hop-1 wins
        sim.seed_public_block(1, BlockKey::new(0, 0)).unwrap();
        sim.seed_public_block(6, BlockKey::new(0, 0)).unwrap();
        let (found, _) = sim.find_blocks(5, 0);
        assert_eq!(found[0].holder, 6);
        assert_eq!(found[0].hops, 1);
    }

    #[test]
    fn find_blocks_matches_min_hop_oracle() {
        // Oracle: each index is taken from the holder minimizing (hop, id),
        // and indices are encountered in (hop, holder id, index) order; the
        // request keeps the first need_k.
        let topo = generate_topology(&TopologyConfig::default()).unwrap();
        let policy = PolicySpec::new(PolicyKind::Dspe, 0.7);
        let setup = desk_setup(&topo, policy);
        let sim = Simulation::new(setup, 3).unwrap();
        for e1 in 0..topo.num_es() {
            for content in 0..40u32 {
                let (found, missing) = sim.find_blocks(e1, content);
                let mut oracle: Vec<(u32, EsId, u8)> = (0..14u8)
                    .filter_map(|idx| {
                        sim.directory()
                            .holders(&BlockKey::new(content, idx))
                            .iter()
                            .map(|&es| (topo.hop_distance_es(e1, es).unwrap(), es))
                            .min()
                            .map(|(hop, es)| (hop, es, idx))
                    })
                    .collect();
                oracle.sort_unstable();
                oracle.truncate(10);
                assert_eq!(missing, 10 - oracle.len());
                let got: Vec<(u32, EsId, u8)> =
                    found.iter().map(|f| (f.hops, f.holder, f.key.index)).collect();
                assert_eq!(got, oracle, "e1={e1} content={content}");
            }
        }
    }

    #[test]
    fn latency_hand_evaluations() {
        let topo = fixture_topology();
        // all blocks on e1 itself: only the AP leg counts
        let found = vec![FoundBlock {
            key: BlockKey::new(0, 0),
            holder: 5,
            hops: 0,
        }];
        assert_eq!(edge_latency(&topo, 0, 5, &found).unwrap(), (2, 5));
        // farthest contributor at 3 hops with gamma_e = 10: 1*2 + 3*10 = 32
        let found = vec![
            FoundBlock {
                key: BlockKey::new(0, 0),
                holder: 6,
                hops: 1,
            },
            FoundBlock {
                key: BlockKey::new(0, 1),
                holder: 1,
                hops: 3,
            },
        ];
        assert_eq!(edge_latency(&topo, 0, 5, &found).unwrap(), (32, 1));
        // cloud path via ES_4: 1*25 + 1*2 + 2*10 = 47
        assert_eq!(cc_latency(&topo, 0, 5).unwrap(), (47, 3));
    }

    #[test]
    fn cc_latency_second_hand_evaluation() {
        // d_ec = 2, gamma_c = 25, d_ae = 1, gamma_a = 2, two ES hops at 10:
        // 50 + 2 + 20 = 72
        let topo = Topology::from_parts(
            vec![(0, 1), (1, 2)],
            vec![vec![(0, 1)]],
            vec![(2, 2)],
            Gammas { a: 2, e: 10, c: 25 },
            0,
        )
        .unwrap();
        assert_eq!(cc_latency(&topo, 0, 0).unwrap(), (72, 2));
        // e1 itself a gateway with d_ec = 1: gamma_c + d_ae * gamma_a
        let topo2 = Topology::from_parts(
            vec![(0, 1)],
            vec![vec![(0, 3)]],
            vec![(0, 1)],
            Gammas { a: 2, e: 10, c: 25 },
            0,
        )
        .unwrap();
        assert_eq!(cc_latency(&topo2, 0, 0).unwrap(), (25 + 6, 0));
    }

    #[test]
    fn worked_example_end_to_end() {
        let topo = fixture_topology();
        let setup = fixture_setup(&topo, PolicySpec::new(PolicyKind::E, 0.0));
        let mut sim = Simulation::new(setup, 1).unwrap();
        sim.seed_public_block(6, BlockKey::new(0, 0)).unwrap();
        sim.seed_public_block(1, BlockKey::new(0, 1)).unwrap();
        let req = Request {
            seq: 0,
            content: 0,
            ap: 0,
            deadline: 47,
            revenue: 12,
            priority: Priority::High,
        };
        let outcome = sim.serve_request(&req);
        // d1 at 1 hop, d2 at 3 hops, d3 from the CC via ES_4 at 2 hops;
        // total latency equals the CC path.
        assert_eq!(outcome.blocks_from_edge, 2);
        assert_eq!(outcome.blocks_from_cc, 1);
        assert_eq!(outcome.latency.t_ae, Some(32));
        assert_eq!(outcome.latency.t_aec, Some(47));
        assert_eq!(outcome.latency.gateway, Some(3));
        assert_eq!(outcome.latency.total(), 47);
        assert!(outcome.served);
        assert_eq!(outcome.revenue_earned, 12);
        // The CC-fetched block is the lowest missing index: d3 (index 2).
        assert_eq!(outcome.placements.len(), 1);
        assert_eq!(outcome.placements[0].0, BlockKey::new(0, 2));

        // One unit tighter and the same request misses.
        let mut sim = Simulation::new(setup, 1).unwrap();
        sim.seed_public_block(6, BlockKey::new(0, 0)).unwrap();
        sim.seed_public_block(1, BlockKey::new(0, 1)).unwrap();
        let outcome = sim.serve_request(&Request {
            deadline: 46,
            ..req
        });
        assert!(!outcome.served);
        assert_eq!(outcome.revenue_earned, 0);
    }

    #[test]
    fn placement_degenerate_alphas() {
        let topo = fixture_topology();
        // alpha = 1: everything lands in e1's private part for the AP.
        let mut setup = fixture_setup(&topo, PolicySpec::new(PolicyKind::Dspe, 1.0));
        setup.storage.alpha = 1.0;
        let mut sim = Simulation::new(setup, 1).unwrap();
        let keys = [BlockKey::new(1, 0), BlockKey::new(1, 1)];
        let placed = sim.place_blocks(&keys, 5, 0, 0);
        assert_eq!(placed.len(), 2);
        assert!(placed
            .iter()
            .all(|&(_, es, part)| es == 5 && part == PartRef::Private(0)));

        // alpha = 0: everything lands in some 1-hop neighbor's public part.
        let setup = fixture_setup(&topo, PolicySpec::new(PolicyKind::E, 0.0));
        let mut sim = Simulation::new(setup, 1).unwrap();
        let placed = sim.place_blocks(&keys, 5, 0, 0);
        assert_eq!(placed.len(), 2);
        for &(_, es, part) in &placed {
            assert!(topo.neighbors(5).any(|n| n == es), "es {es} not a neighbor");
            assert_eq!(part, PartRef::Public);
        }
    }

    #[test]
    fn trivial_serves() {
        let topo = fixture_topology();
        let setup = fixture_setup(&topo, PolicySpec::new(PolicyKind::E, 0.0));
        let mut sim = Simulation::new(setup, 1).unwrap();
        // nothing at the edge, huge deadline: served from the CC
        let outcome = sim.serve_request(&Request {
            seq: 0,
            content: 1,
            ap: 0,
            deadline: 1_000_000,
            revenue: 8,
            priority: Priority::Low,
        });
        assert!(outcome.served);
        assert_eq!(outcome.blocks_from_edge, 0);
        assert_eq!(outcome.blocks_from_cc, 3);
        assert!(outcome.latency.t_ae.is_none());
        // deadline below the AP leg: unsatisfiable
        let outcome = sim.serve_request(&Request {
            seq: 1,
            content: 1,
            ap: 0,
            deadline: 1,
            revenue: 8,
            priority: Priority::Low,
        });
        assert!(!outcome.served);
        assert_eq!(outcome.revenue_earned, 0);
    }

    #[test]
    fn deadline_miss_replaces_violating_blocks() {
        let topo = fixture_topology();
        let mut setup = fixture_setup(&topo, PolicySpec::new(PolicyKind::E, 0.0));
        setup.ec = EcSplit { k: 2, m: 0 };
        let mut sim = Simulation::new(setup, 1).unwrap();
        // both blocks at the edge, one of them 3 hops out
        sim.seed_public_block(6, BlockKey::new(0, 0)).unwrap();
        sim.seed_public_block(1, BlockKey::new(0, 1)).unwrap();
        let outcome = sim.serve_request(&Request {
            seq: 0,
            content: 0,
            ap: 0,
            deadline: 20, // t_ae = 32 misses; block at 1 hop (12) is fine
            revenue: 12,
            priority: Priority::High,
        });
        assert!(!outcome.served);
        assert_eq!(outcome.blocks_from_cc, 0);
        // only the 3-hop block violated the deadline and was re-placed
        assert_eq!(outcome.placements.len(), 1);
        assert_eq!(outcome.placements[0].0, BlockKey::new(0, 1));

        // with the knob off, nothing is re-placed
        let mut setup_off = setup;
        setup_off.opts.replace_on_deadline_miss = false;
        let mut sim = Simulation::new(setup_off, 1).unwrap();
        sim.seed_public_block(6, BlockKey::new(0, 0)).unwrap();
        sim.seed_public_block(1, BlockKey::new(0, 1)).unwrap();
        let outcome = sim.serve_request(&Request {
            seq: 0,
            content: 0,
            ap: 0,
            deadline: 20,
            revenue: 12,
            priority: Priority::High,
        });
        assert!(outcome.placements.is_empty());
    }

    #[test]
    fn run_simulation_trivial_traces() {
        let topo = generate_topology(&TopologyConfig::default()).unwrap();
        let setup = desk_setup(&topo, PolicySpec::new(PolicyKind::Dspe, 0.7));
        let report = run_simulation(setup, &[], 1).unwrap();
        assert_eq!(report.total_revenue, 0);
        assert_eq!(report.request_count, 0);
        assert_eq!(report.served_count, 0);

        let trace: Vec<Request> = (0..200)
            .map(|seq| Request {
                seq,
                content: (seq % 50) as ContentId,
                ap: (seq % 100) as ApId,
                deadline: 1,
                revenue: 10,
                priority: Priority::Medium,
            })
            .collect();
        let report = run_simulation(setup, &trace, 1).unwrap();
        assert_eq!(report.total_revenue, 0);
        assert_eq!(report.served_count, 0);
        assert_eq!(report.deadline_miss_count, 200);
    }

    #[test]
    fn run_simulation_is_deterministic() {
        let topo = generate_topology(&TopologyConfig::default()).unwrap();
        let trace_cfg = TraceConfig {
            num_requests: 5_000,
            ..TraceConfig::default()
        };
        let trace = generate_trace(&trace_cfg, &topo).unwrap();
        let setup = desk_setup(&topo, PolicySpec::new(PolicyKind::Dspe, 0.7));
        let a = run_simulation(setup, &trace, 9).unwrap();
        let b = run_simulation(setup, &trace, 9).unwrap();
        assert!(a.same_results(&b));
        let c = run_simulation(setup, &trace, 10).unwrap();
        assert!(!a.same_results(&c));
    }

    #[test]
    fn revenue_identity_and_deadline_gate() {
        let topo = generate_topology(&TopologyConfig::default()).unwrap();
        let trace_cfg = TraceConfig {
            num_requests: 10_000,
            ..TraceConfig::default()
        };
        let trace = generate_trace(&trace_cfg, &topo).unwrap();
        for kind in PolicyKind::ALL {
            let setup = desk_setup(&topo, PolicySpec::new(kind, 0.7));
            let (report, outcomes) = run_simulation_logged(setup, &trace, 5).unwrap();
            let (revenue, served) = recompute_revenue(&outcomes);
            assert_eq!(report.total_revenue, revenue);
            assert_eq!(report.served_count, served);
            for (o, r) in outcomes.iter().zip(&trace) {
                assert_eq!(o.served, o.latency.total() <= r.deadline);
                assert_eq!(o.revenue_earned, if o.served { r.revenue } else { 0 });
                // block-index distinctness within one outcome's edge set
                assert!(o.blocks_from_edge + o.blocks_from_cc <= 14);
            }
            let cap: u64 = trace.iter().map(|r| r.revenue).sum();
            assert!(report.total_revenue <= cap);
            assert_eq!(report.served_count + report.deadline_miss_count, 10_000);
        }
    }

    #[test]
    fn policy_degenerations() {
        let topo = generate_topology(&TopologyConfig::default()).unwrap();
        let trace_cfg = TraceConfig {
            num_requests: 8_000,
            ..TraceConfig::default()
        };
        let trace = generate_trace(&trace_cfg, &topo).unwrap();
        // DSPE with alpha = 0 and static shares is E
        let dspe0 = PolicySpec {
            kind: PolicyKind::Dspe,
            alpha: 0.0,
            dynamic_shares: false,
        };
        let a = run_simulation(desk_setup(&topo, dspe0), &trace, 3).unwrap();
        let b = run_simulation(desk_setup(&topo, PolicySpec::new(PolicyKind::E, 0.7)), &trace, 3)
            .unwrap();
        assert!(a.same_results(&b));
        // DSP is DSPE with whole items and static shares
        let dspe_whole = PolicySpec {
            kind: PolicyKind::Dsp,
            alpha: 0.7,
            dynamic_shares: false,
        };
        let c = run_simulation(desk_setup(&topo, dspe_whole), &trace, 3).unwrap();
        let d = run_simulation(
            desk_setup(&topo, PolicySpec::new(PolicyKind::Dsp, 0.7)),
            &trace,
            3,
        )
        .unwrap();
        assert!(c.same_results(&d));
    }

    #[test]
    fn deadline_relaxation_never_hurts() {
        let topo = generate_topology(&TopologyConfig::default()).unwrap();
        for seed in 1..=3u64 {
            let trace_cfg = TraceConfig {
                num_requests: 5_000,
                seed,
                ..TraceConfig::default()
            };
            let trace = generate_trace(&trace_cfg, &topo).unwrap();
            let relaxed: Vec<Request> = trace
                .iter()
                .map(|r| Request {
                    deadline: r.deadline * 10,
                    ..*r
                })
                .collect();
            let setup = desk_setup(&topo, PolicySpec::new(PolicyKind::Dspe, 0.7));
            let tight = run_simulation(setup, &trace, seed).unwrap();
            let loose = run_simulation(setup, &relaxed, seed).unwrap();
            assert!(
                loose.total_revenue >= tight.total_revenue,
                "seed {seed}: {} < {}",
                loose.total_revenue,
                tight.total_revenue
            );
        }
    }

    #[test]
    fn id_mismatch_is_rejected() {
        let topo = fixture_topology();
        let setup = fixture_setup(&topo, PolicySpec::new(PolicyKind::E, 0.0));
        let bad_ap = vec![Request {
            seq: 0,
            content: 0,
            ap: 99,
            deadline: 10,
            revenue: 1,
            priority: Priority::Low,
        }];
        assert!(matches!(
            run_simulation(setup, &bad_ap, 1),
            Err(Error::IdMismatch(_))
        ));
        let bad_content = vec![Request {
            seq: 0,
            content: 999,
            ap: 0,
            deadline: 10,
            revenue: 1,
            priority: Priority::Low,
        }];
        assert!(matches!(
            run_simulation(setup, &bad_content, 1),
            Err(Error::IdMismatch(_))
        ));
    }

    #[test]
    fn policy_spec_validation() {
        assert!(PolicySpec::new(PolicyKind::E, 0.7).validate().is_ok());
        assert!(PolicySpec {
            kind: PolicyKind::E,
            alpha: 0.3,
            dynamic_shares: false
        }
        .validate()
        .is_err());
        assert!(PolicySpec {
            kind: PolicyKind::Dsp,
            alpha: 0.5,
            dynamic_shares: true
        }
        .validate()
        .is_err());
        assert!(matches!(PolicyKind::parse("dspe"), Ok(PolicyKind::Dspe)));
        assert!(PolicyKind::parse("best").is_err());
    }
}
