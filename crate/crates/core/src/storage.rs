//! Per-ES partitioned block storage.
//!
//! Each edge server's slot budget splits into a private region (an
//! alpha-fraction, subdivided among the ESs attached APs) and a public region
//! writable on behalf of neighboring ESs. Every part runs LRU eviction
//! independently. Capacity is counted in block slots: erasure-coded blocks
//! weigh one slot, whole items (non-coded policies) weigh `k` slots so byte
//! budgets stay comparable across policies.
//!
//! The [`Directory`] mirrors the union of all store contents; the engine
//! treats it as the instantly consistent metadata table that block search
//! consults. The cloud itself holds every block and needs no bookkeeping.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::BlockKey;
use crate::error::Error;
use crate::rng::{stream_rng, Stream};
use crate::{ApId, ContentId, EsId};

/// Storage-side configuration shared by every ES in a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageConfig {
    /// Per-ES capacity in block slots.
    pub s_e: u32,
    /// Private fraction of the slot budget; the public share is 1 - alpha.
    pub alpha: f64,
    /// Slots to pre-fill per ES before a run.
    pub warmup_blocks: u32,
    /// Requests between private-share recomputations.
    pub rebalance_window: u32,
    /// EWMA smoothing factor for per-AP arrival-rate estimates.
    pub ewma_rho: f64,
    /// Minimum slots any attached AP keeps after rebalancing.
    pub min_ap_slots: u32,
}

impl Default for StorageConfig {
    fn default() -> Self {
        StorageConfig {
            s_e: 400,
            alpha: 0.7,
            warmup_blocks: 50,
            rebalance_window: 20_000,
            ewma_rho: 0.2,
            min_ap_slots: 1,
        }
    }
}

impl StorageConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig("storage: alpha must be in [0, 1]".into()));
        }
        if self.warmup_blocks > self.s_e {
            return Err(Error::InvalidConfig(
                "storage: warmup_blocks cannot exceed s_e".into(),
            ));
        }
        if self.rebalance_window == 0 {
            return Err(Error::InvalidConfig(
                "storage: rebalance_window must be >= 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.ewma_rho) {
            return Err(Error::InvalidConfig("storage: ewma_rho must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Slot budget of the fraction `frac` of `total`, as a mathematical floor.
/// The epsilon guards against 0.7 * 50 evaluating just below 35.0.
fn frac_slots(frac: f64, total: u32) -> u32 {
    ((frac * total as f64) + 1e-9).floor() as u32
}

/// Outcome of an insert: whether the key now resides in the part, and which
/// keys the insert displaced.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InsertOutcome {
    pub stored: bool,
    pub evicted: Vec<BlockKey>,
}

/// One LRU-ordered region: insertion order front-to-back is LRU-to-MRU.
#[derive(Debug, Clone, PartialEq, Eq)]
struct LruPart {
    quota: u32,
    used: u32,
    /// Key -> slot weight; map order is recency order.
    entries: IndexMap<BlockKey, u32>,
}

impl LruPart {
    fn new(quota: u32) -> Self {
        LruPart {
            quota,
            used: 0,
            entries: IndexMap::new(),
        }
    }

    fn contains(&self, key: &BlockKey) -> bool {
        self.entries.contains_key(key)
    }

    fn touch(&mut self, key: &BlockKey) {
        if let Some(w) = self.entries.shift_remove(key) {
            self.entries.insert(*key, w);
        }
    }

    /// Inserts `key`; evicts from the LRU end until it fits. A key wider than
    /// the whole quota is not stored.
    fn insert(&mut self, key: BlockKey, weight: u32) -> InsertOutcome {
        debug_assert!(!self.contains(&key), "dedup is the store's job");
        if weight > self.quota {
            return InsertOutcome::default();
        }
        let mut evicted = Vec::new();
        while self.used + weight > self.quota {
            let (victim, w) = self.entries.shift_remove_index(0).expect("used > 0");
            self.used -= w;
            evicted.push(victim);
        }
        self.entries.insert(key, weight);
        self.used += weight;
        debug_assert!(self.used <= self.quota);
        InsertOutcome {
            stored: true,
            evicted,
        }
    }

    /// Shrinks (or grows) the quota, evicting LRU keys until within it.
    fn set_quota(&mut self, quota: u32) -> Vec<BlockKey> {
        self.quota = quota;
        let mut evicted = Vec::new();
        while self.used > self.quota {
            let (victim, w) = self.entries.shift_remove_index(0).expect("used > 0");
            self.used -= w;
            evicted.push(victim);
        }
        evicted
    }
}

/// Where a key lives within one ES.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartRef {
    Public,
    Private(ApId),
}

/// One edge server's partitioned store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeStore {
    es_id: EsId,
    s_e: u32,
    block_slots: u32,
    public: LruPart,
    private: BTreeMap<ApId, LruPart>,
    private_total: u32,
}

impl EdgeStore {
    /// A store for `es_id` with the private region split equally among
    /// `attached_aps` (largest-remainder, honoring the per-AP floor).
    pub fn new(es_id: EsId, cfg: &StorageConfig, attached_aps: &[ApId], block_slots: u32) -> Self {
        let private_total = frac_slots(cfg.alpha, cfg.s_e);
        let public_cap = frac_slots(1.0 - cfg.alpha, cfg.s_e);
        let quotas = apportion(
            private_total,
            &vec![1.0; attached_aps.len()],
            cfg.min_ap_slots,
        );
        let private = attached_aps
            .iter()
            .zip(quotas)
            .map(|(&ap, q)| (ap, LruPart::new(q)))
            .collect();
        EdgeStore {
            es_id,
            s_e: cfg.s_e,
            block_slots,
            public: LruPart::new(public_cap),
            private,
            private_total,
        }
    }

    pub fn es_id(&self) -> EsId {
        self.es_id
    }

    /// Slots currently occupied across all parts.
    pub fn occupancy(&self) -> u32 {
        self.public.used + self.private.values().map(|p| p.used).sum::<u32>()
    }

    pub fn capacity(&self) -> u32 {
        self.s_e
    }

    pub fn public_quota(&self) -> u32 {
        self.public.quota
    }

    pub fn private_total(&self) -> u32 {
        self.private_total
    }

    pub fn quota(&self, ap: ApId) -> Option<u32> {
        self.private.get(&ap).map(|p| p.quota)
    }

    pub fn attached_aps(&self) -> impl Iterator<Item = ApId> + '_ {
        self.private.keys().copied()
    }

    fn locate(&self, key: &BlockKey) -> Option<PartRef> {
        if self.public.contains(key) {
            return Some(PartRef::Public);
        }
        self.private
            .iter()
            .find(|(_, part)| part.contains(key))
            .map(|(&ap, _)| PartRef::Private(ap))
    }

    pub fn contains(&self, key: &BlockKey) -> bool {
        self.locate(key).is_some()
    }

    /// True iff the key is present; refreshes its LRU recency on success.
    pub fn lookup(&mut self, key: &BlockKey) -> bool {
        match self.locate(key) {
            Some(PartRef::Public) => {
                self.public.touch(key);
                true
            }
            Some(PartRef::Private(ap)) => {
                self.private.get_mut(&ap).expect("located").touch(key);
                true
            }
            None => false,
        }
    }

    /// Inserts into the private part of `ap`. Duplicates anywhere on this ES
    /// only refresh recency. Errors when `ap` is not attached here or the
    /// store has no private region at all (alpha = 0).
    pub fn insert_private(
        &mut self,
        ap: ApId,
        key: BlockKey,
        dir: &mut Directory,
    ) -> Result<InsertOutcome, Error> {
        if self.private_total == 0 {
            return Err(Error::NoPrivateSpace { es: self.es_id });
        }
        if !self.private.contains_key(&ap) {
            return Err(Error::ApNotAttached {
                ap,
                es: self.es_id,
            });
        }
        if self.lookup(&key) {
            return Ok(InsertOutcome::default());
        }
        let outcome = self
            .private
            .get_mut(&ap)
            .expect("checked")
            .insert(key, self.block_slots);
        self.apply_to_directory(&key, &outcome, dir);
        Ok(outcome)
    }

    /// Inserts into the public part; same dedup rule. Errors when the public
    /// region has zero capacity (alpha = 1).
    pub fn insert_public(
        &mut self,
        key: BlockKey,
        dir: &mut Directory,
    ) -> Result<InsertOutcome, Error> {
        if self.public.quota == 0 {
            return Err(Error::NoPublicSpace { es: self.es_id });
        }
        if self.lookup(&key) {
            return Ok(InsertOutcome::default());
        }
        let outcome = self.public.insert(key, self.block_slots);
        self.apply_to_directory(&key, &outcome, dir);
        Ok(outcome)
    }

    fn apply_to_directory(&self, key: &BlockKey, outcome: &InsertOutcome, dir: &mut Directory) {
        for victim in &outcome.evicted {
            dir.remove(victim, self.es_id);
        }
        if outcome.stored {
            dir.insert(*key, self.es_id);
        }
        debug_assert!(self.occupancy() <= self.s_e);
    }

    /// Re-apportions private quotas proportional to the estimated arrival
    /// rates of this store's APs; now-over-quota parts evict LRU keys.
    pub fn rebalance_private_shares(
        &mut self,
        est: &ApLoadEstimator,
        min_ap_slots: u32,
        dir: &mut Directory,
    ) {
        if self.private.is_empty() {
            return;
        }
        let weights: Vec<f64> = self.private.keys().map(|&ap| est.lambda(ap)).collect();
        let quotas = apportion(self.private_total, &weights, min_ap_slots);
        debug_assert_eq!(quotas.iter().sum::<u32>(), self.private_total);
        let aps: Vec<ApId> = self.private.keys().copied().collect();
        for (ap, quota) in aps.into_iter().zip(quotas) {
            let part = self.private.get_mut(&ap).expect("attached");
            for victim in part.set_quota(quota) {
                dir.remove(&victim, self.es_id);
            }
        }
        debug_assert!(self.occupancy() <= self.s_e);
    }

    /// Every key on this ES with the part holding it, recency order within
    /// each part (LRU first).
    pub fn entries(&self) -> impl Iterator<Item = (PartRef, BlockKey)> + '_ {
        self.public
            .entries
            .keys()
            .map(|&k| (PartRef::Public, k))
            .chain(self.private.iter().flat_map(|(&ap, part)| {
                part.entries.keys().map(move |&k| (PartRef::Private(ap), k))
            }))
    }
}

/// Largest-remainder apportionment of `total` slots proportional to
/// `weights`, then a floor pass that tops every entry up to `floor` by taking
/// from the largest quotas. All-zero weights apportion equally.
fn apportion(total: u32, weights: &[f64], floor: u32) -> Vec<u32> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let sum: f64 = weights.iter().sum();
    let weights: Vec<f64> = if sum <= 0.0 {
        vec![1.0; n]
    } else {
        weights.to_vec()
    };
    let sum: f64 = weights.iter().sum();
    let shares: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut quotas: Vec<u32> = shares.iter().map(|s| s.floor() as u32).collect();
    let assigned: u32 = quotas.iter().sum();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take((total - assigned) as usize) {
        quotas[i] += 1;
    }
    // Floor pass; infeasible floors degrade to an equal split.
    let floor = floor.min(total / n as u32);
    loop {
        let Some(low) = (0..n).find(|&i| quotas[i] < floor) else {
            break;
        };
        let rich = (0..n)
            .filter(|&i| quotas[i] > floor)
            .max_by_key(|&i| (quotas[i], std::cmp::Reverse(i)))
            .expect("sum permits the floor");
        quotas[rich] -= 1;
        quotas[low] += 1;
    }
    debug_assert_eq!(quotas.iter().sum::<u32>(), total);
    quotas
}

/// Windowed EWMA estimate of per-AP arrival rates.
///
/// The first full window initializes the estimates directly; later windows
/// fold in as `lambda <- rho * count + (1 - rho) * lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApLoadEstimator {
    lambda: Vec<f64>,
    counts: Vec<u64>,
    rho: f64,
    window: u32,
    seen: u32,
    initialized: bool,
}

impl ApLoadEstimator {
    pub fn new(num_aps: usize, rho: f64, window: u32) -> Self {
        ApLoadEstimator {
            lambda: vec![0.0; num_aps],
            counts: vec![0; num_aps],
            rho,
            window,
            seen: 0,
            initialized: false,
        }
    }

    pub fn lambda(&self, ap: ApId) -> f64 {
        self.lambda[ap]
    }

    /// Records one arrival; returns true when this arrival closed a window
    /// (estimates were just refreshed and a rebalance is due).
    pub fn record_arrival(&mut self, ap: ApId) -> bool {
        self.counts[ap] += 1;
        self.seen += 1;
        if self.seen < self.window {
            return false;
        }
        for (l, c) in self.lambda.iter_mut().zip(&mut self.counts) {
            let count = *c as f64;
            *l = if self.initialized {
                self.rho * count + (1.0 - self.rho) * *l
            } else {
                count
            };
            *c = 0;
        }
        self.initialized = true;
        self.seen = 0;
        true
    }
}

/// Global block directory: which ESs currently hold which block key.
/// Mirrors the union of all store contents; the CC implicitly holds
/// everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Directory {
    placement: HashMap<BlockKey, Vec<EsId>>,
}

impl Directory {
    pub fn new() -> Self {
        Directory::default()
    }

    /// The cloud tier always holds every block of every content.
    pub fn cc_holds_all(&self) -> bool {
        true
    }

    pub fn insert(&mut self, key: BlockKey, es: EsId) {
        let holders = self.placement.entry(key).or_default();
        if let Err(pos) = holders.binary_search(&es) {
            holders.insert(pos, es);
        }
    }

    pub fn remove(&mut self, key: &BlockKey, es: EsId) {
        if let Some(holders) = self.placement.get_mut(key) {
            if let Ok(pos) = holders.binary_search(&es) {
                holders.remove(pos);
            }
            if holders.is_empty() {
                self.placement.remove(key);
            }
        }
    }

    /// Sorted ES ids currently holding `key`.
    pub fn holders(&self, key: &BlockKey) -> &[EsId] {
        self.placement.get(key).map_or(&[], |v| v.as_slice())
    }

    pub fn holds(&self, key: &BlockKey, es: EsId) -> bool {
        self.holders(key).binary_search(&es).is_ok()
    }

    pub fn num_keys(&self) -> usize {
        self.placement.len()
    }

    /// True iff the directory exactly mirrors the union of store contents.
    pub fn audit(&self, stores: &[EdgeStore]) -> bool {
        let mut rebuilt: HashMap<BlockKey, Vec<EsId>> = HashMap::new();
        for store in stores {
            for (_, key) in store.entries() {
                rebuilt.entry(key).or_default().push(store.es_id());
            }
        }
        for holders in rebuilt.values_mut() {
            holders.sort_unstable();
        }
        rebuilt == self.placement
    }
}

/// One store region's contents, for the debugging dump.
#[derive(Debug, Clone, Serialize)]
pub struct StoreDumpEntry {
    pub es: EsId,
    pub part: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap: Option<ApId>,
    /// Keys in recency order, least recently used first.
    pub blocks: Vec<BlockKey>,
}

/// Snapshot of every nonempty store region.
pub fn dump_stores(stores: &[EdgeStore]) -> Vec<StoreDumpEntry> {
    let mut out = Vec::new();
    for store in stores {
        if !store.public.entries.is_empty() {
            out.push(StoreDumpEntry {
                es: store.es_id(),
                part: "public".into(),
                ap: None,
                blocks: store.public.entries.keys().copied().collect(),
            });
        }
        for (&ap, part) in &store.private {
            if part.entries.is_empty() {
                continue;
            }
            out.push(StoreDumpEntry {
                es: store.es_id(),
                part: "private".into(),
                ap: Some(ap),
                blocks: part.entries.keys().copied().collect(),
            });
        }
    }
    out
}

/// Pre-fills every store with `warmup_blocks` slots of popularity-sampled
/// block keys: public region first, overflow round-robin across the private
/// parts. Deterministic per seed; never evicts.
pub fn warmup(
    stores: &mut [EdgeStore],
    dir: &mut Directory,
    num_contents: ContentId,
    indices_per_content: u8,
    popularity: &crate::rng::CumulativeSampler,
    warmup_blocks: u32,
    master_seed: u64,
) {
    let mut rng = stream_rng(master_seed, Stream::Warmup);
    for store in stores.iter_mut() {
        let weight = store.block_slots;
        if weight == 0 || weight > warmup_blocks {
            continue;
        }
        let target_keys = warmup_blocks / weight;
        let aps: Vec<ApId> = store.attached_aps().collect();
        let mut next_private = 0usize;
        let mut placed = 0u32;
        let mut exhausted = false;
        while placed < target_keys && !exhausted {
            // Popularity-sampled content, advancing past contents whose
            // indices are all already present on this ES.
            let mut content = popularity.sample(&mut rng) as ContentId;
            let mut key = None;
            for _ in 0..num_contents {
                let free: Vec<u8> = (0..indices_per_content)
                    .filter(|&i| !store.contains(&BlockKey::new(content, i)))
                    .collect();
                if !free.is_empty() {
                    let idx = free[rng.gen_range(0..free.len())];
                    key = Some(BlockKey::new(content, idx));
                    break;
                }
                content = (content + 1) % num_contents;
            }
            let Some(key) = key else {
                break; // every catalog key already present
            };
            // Public first, then round-robin over private parts with room.
            let mut placed_here = false;
            if store.public.used + weight <= store.public.quota {
                store.public.insert(key, weight);
                dir.insert(key, store.es_id);
                placed_here = true;
            } else {
                for _ in 0..aps.len() {
                    let ap = aps[next_private % aps.len()];
                    next_private += 1;
                    let part = store.private.get_mut(&ap).expect("attached");
                    if part.used + weight <= part.quota {
                        part.insert(key, weight);
                        dir.insert(key, store.es_id);
                        placed_here = true;
                        break;
                    }
                }
            }
            if placed_here {
                placed += 1;
            } else {
                exhausted = true; // no part has room for another block
            }
        }
    }
}
