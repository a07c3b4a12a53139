//! Experiment families: policy comparison and the sweep axes (private share,
//! erasure split, priority mix, cross-batch common data), replicated across
//! seeds and emitted as CSV plus per-run JSON.
//!
//! Seed discipline: replicate i uses master seed `base + i` for every swept
//! value, so comparisons across policies and sweep points are paired. Per-hop
//! times are drawn once per topology from configured ranges and frozen.
//!
//! `summary.csv` carries one fixed-schema row per run and is byte-identical
//! across reruns of the same config; its runtime column reports the
//! deterministic simulated-time total. Wall-clock timing lives only in the
//! per-run detail JSON.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::{
    run_simulation, Catalog, EcSplit, PolicyKind, PolicySpec, SimOptions, SimReport, SimSetup,
};
use crate::error::Error;
use crate::rng::{stream_rng, Stream};
use crate::storage::StorageConfig;
use crate::topology::{generate_topology, TopologyConfig};
use crate::workload::{generate_trace, TraceConfig};

pub const SUMMARY_CSV_HEADER: &str =
    "policy,seed,alpha,k,m,revenue,served,n,edge_hits,cc_fetches,misses,runtime_s";

/// Inclusive ranges the per-hop times are drawn from, once per topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaRanges {
    pub a: (u32, u32),
    pub e: (u32, u32),
    pub c: (u32, u32),
}

impl Default for GammaRanges {
    fn default() -> Self {
        GammaRanges {
            a: (2, 3),
            e: (10, 15),
            c: (25, 30),
        }
    }
}

impl GammaRanges {
    fn validate(&self) -> Result<(), Error> {
        for (lo, hi) in [self.a, self.e, self.c] {
            if lo == 0 || lo > hi {
                return Err(Error::InvalidConfig(
                    "gamma_ranges: each range must be nonempty and start at >= 1".into(),
                ));
            }
        }
        if !(self.c.0 > self.e.1 && self.e.0 > self.a.1) {
            return Err(Error::InvalidConfig(
                "gamma_ranges: ranges must guarantee gamma_c > gamma_e > gamma_a".into(),
            ));
        }
        Ok(())
    }

    fn sample(&self, seed: u64) -> (u32, u32, u32) {
        let mut rng = stream_rng(seed, Stream::Gamma);
        (
            rng.gen_range(self.a.0..=self.a.1),
            rng.gen_range(self.e.0..=self.e.1),
            rng.gen_range(self.c.0..=self.c.1),
        )
    }
}

/// Which axis an experiment sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "axis", content = "values", rename_all = "lowercase", deny_unknown_fields)]
pub enum Sweep {
    #[default]
    None,
    Alpha(Vec<f64>),
    Ec(Vec<EcSplit>),
    Priority(Vec<(u32, u32, u32)>),
    Common(Vec<f64>),
}

impl Sweep {
    pub fn axis_name(&self) -> &'static str {
        match self {
            Sweep::None => "none",
            Sweep::Alpha(_) => "alpha",
            Sweep::Ec(_) => "ec",
            Sweep::Priority(_) => "priority",
            Sweep::Common(_) => "common",
        }
    }
}

/// Full experiment description; the JSON config format mirrors these field
/// names exactly, and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology_cfg: TopologyConfig,
    pub storage_cfg: StorageConfig,
    pub trace_cfg: TraceConfig,
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub ec: EcSplit,
    #[serde(default)]
    pub sweep: Sweep,
    pub replicates: u32,
    pub output_dir: PathBuf,
    /// Base master seed; replicate i runs with seed base + i.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// When set, per-hop times are sampled from these ranges once per
    /// topology (replicate), overriding the fixed topology_cfg gammas.
    #[serde(default)]
    pub gamma_ranges: Option<GammaRanges>,
    #[serde(default = "default_true")]
    pub replace_on_deadline_miss: bool,
}

fn default_seed() -> u64 {
    1
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    /// The desk-scale profile: table-scale topology and catalog with a
    /// 100k-request trace, five replicates, per-hop times drawn from the
    /// standard ranges.
    pub fn desk_default() -> Self {
        ExperimentConfig {
            topology_cfg: TopologyConfig::default(),
            storage_cfg: StorageConfig::default(),
            trace_cfg: TraceConfig::default(),
            policies: PolicyKind::ALL.to_vec(),
            ec: EcSplit::default(),
            sweep: Sweep::None,
            replicates: 5,
            output_dir: PathBuf::from("out"),
            seed: 1,
            gamma_ranges: Some(GammaRanges::default()),
            replace_on_deadline_miss: true,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.topology_cfg.validate()?;
        self.storage_cfg.validate()?;
        self.trace_cfg.validate()?;
        self.ec.validate()?;
        if self.policies.is_empty() {
            return Err(Error::InvalidConfig("experiment: no policies listed".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("experiment: replicates must be >= 1".into()));
        }
        if let Some(ranges) = &self.gamma_ranges {
            ranges.validate()?;
        }
        let empty = match &self.sweep {
            Sweep::None => false,
            Sweep::Alpha(v) => v.is_empty(),
            Sweep::Ec(v) => v.is_empty(),
            Sweep::Priority(v) => v.is_empty(),
            Sweep::Common(v) => v.is_empty(),
        };
        if empty {
            return Err(Error::InvalidConfig(
                "experiment: sweep selected with an empty value list".into(),
            ));
        }
        if let Sweep::Ec(pairs) = &self.sweep {
            for pair in pairs {
                pair.validate()?;
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// One simulation instance within an experiment: a policy at one sweep point
/// under one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunPoint {
    pub policy: PolicySpec,
    pub ec: EcSplit,
    pub priority_ratio: (u32, u32, u32),
    pub common_fraction: f64,
    pub seed: u64,
    pub gammas: (u32, u32, u32),
}

impl RunPoint {
    /// Stable, filesystem-safe identity for report files.
    pub fn run_id(&self) -> String {
        let (x, y, z) = self.priority_ratio;
        format!(
            "{}_a{:.2}_ec{}-{}_p{}-{}-{}_c{:.2}_s{}",
            self.policy.kind.label(),
            self.policy.alpha,
            self.ec.k,
            self.ec.m,
            x,
            y,
            z,
            self.common_fraction,
            self.seed
        )
    }
}

/// A completed run: the point plus its report.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub point: RunPoint,
    pub report: SimReport,
}

fn execute_point(cfg: &ExperimentConfig, point: &RunPoint) -> Result<RunRecord, Error> {
    let mut topo_cfg = cfg.topology_cfg.clone();
    topo_cfg.seed = point.seed;
    (topo_cfg.gamma_a, topo_cfg.gamma_e, topo_cfg.gamma_c) = point.gammas;
    let topo = generate_topology(&topo_cfg)?;

    let mut trace_cfg = cfg.trace_cfg.clone();
    trace_cfg.seed = point.seed;
    trace_cfg.priority_ratio = point.priority_ratio;
    trace_cfg.common_fraction = point.common_fraction;
    let trace = generate_trace(&trace_cfg, &topo)?;

    let setup = SimSetup {
        topo: &topo,
        policy: point.policy,
        ec: point.ec,
        storage: cfg.storage_cfg,
        catalog: Catalog {
            num_contents: trace_cfg.num_contents,
            zipf_s: trace_cfg.zipf_s,
        },
        opts: SimOptions {
            replace_on_deadline_miss: cfg.replace_on_deadline_miss,
        },
    };
    let mut report = run_simulation(setup, &trace, point.seed)?;
    report.config_fingerprint = fingerprint(&topo_cfg, &cfg.storage_cfg, &trace_cfg, point);
    Ok(RunRecord {
        point: point.clone(),
        report,
    })
}

fn fingerprint(
    topo: &TopologyConfig,
    storage: &StorageConfig,
    trace: &TraceConfig,
    point: &RunPoint,
) -> String {
    let doc = serde_json::json!({
        "topology": topo,
        "storage": storage,
        "trace": trace,
        "point": point,
    });
    let digest = Sha256::digest(doc.to_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn run_points(cfg: &ExperimentConfig, points: Vec<RunPoint>) -> Result<Vec<RunRecord>, Error> {
    let mut records = points
        .par_iter()
        .map(|point| execute_point(cfg, point))
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| a.point.run_id().cmp(&b.point.run_id()));
    Ok(records)
}

fn base_points(cfg: &ExperimentConfig) -> impl Iterator<Item = (PolicyKind, u64, (u32, u32, u32))> + '_ {
    let seeds: Vec<u64> = (0..cfg.replicates).map(|i| cfg.seed + i as u64).collect();
    cfg.policies.iter().flat_map(move |&kind| {
        seeds.clone().into_iter().map(move |seed| {
            let gammas = match &cfg.gamma_ranges {
                Some(r) => r.sample(seed),
                None => (
                    cfg.topology_cfg.gamma_a,
                    cfg.topology_cfg.gamma_e,
                    cfg.topology_cfg.gamma_c,
                ),
            };
            (kind, seed, gammas)
        })
    })
}

/// Runs every configured policy across all replicate seeds.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, Error> {
    cfg.validate()?;
    let points = base_points(cfg)
        .map(|(kind, seed, gammas)| RunPoint {
            policy: PolicySpec::new(kind, cfg.storage_cfg.alpha),
            ec: cfg.ec,
            priority_ratio: cfg.trace_cfg.priority_ratio,
            common_fraction: cfg.trace_cfg.common_fraction,
            seed,
            gammas,
        })
        .collect();
    run_points(cfg, points)
}

/// Sweeps the private share of the partitioning policy.
pub fn run_alpha_sweep(cfg: &ExperimentConfig, alphas: &[f64]) -> Result<Vec<RunRecord>, Error> {
    cfg.validate()?;
    let mut sweep_cfg = cfg.clone();
    sweep_cfg.policies = vec![PolicyKind::Dspe];
    let points = alphas
        .iter()
        .flat_map(|&alpha| {
            base_points(&sweep_cfg)
                .map(|(kind, seed, gammas)| RunPoint {
                    policy: PolicySpec::new(kind, alpha),
                    ec: cfg.ec,
                    priority_ratio: cfg.trace_cfg.priority_ratio,
                    common_fraction: cfg.trace_cfg.common_fraction,
                    seed,
                    gammas,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    run_points(cfg, points)
}

/// Sweeps the erasure split of the coding policy; whole-item budgets follow
/// each split's k.
pub fn run_ec_sweep(cfg: &ExperimentConfig, pairs: &[EcSplit]) -> Result<Vec<RunRecord>, Error> {
    cfg.validate()?;
    for pair in pairs {
        pair.validate()?;
    }
    let mut sweep_cfg = cfg.clone();
    sweep_cfg.policies = vec![PolicyKind::Dspe];
    let points = pairs
        .iter()
        .flat_map(|&ec| {
            base_points(&sweep_cfg)
                .map(|(kind, seed, gammas)| RunPoint {
                    policy: PolicySpec::new(kind, cfg.storage_cfg.alpha),
                    ec,
                    priority_ratio: cfg.trace_cfg.priority_ratio,
                    common_fraction: cfg.trace_cfg.common_fraction,
                    seed,
                    gammas,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    run_points(cfg, points)
}

/// Sweeps the priority mix across every configured policy.
pub fn run_priority_sweep(
    cfg: &ExperimentConfig,
    ratios: &[(u32, u32, u32)],
) -> Result<Vec<RunRecord>, Error> {
    cfg.validate()?;
    for &(x, y, z) in ratios {
        if x + y + z != 100 {
            return Err(Error::InvalidConfig(format!(
                "sweep: priority ratio {x}:{y}:{z} must sum to 100"
            )));
        }
    }
    let points = ratios
        .iter()
        .flat_map(|&ratio| {
            base_points(cfg)
                .map(|(kind, seed, gammas)| RunPoint {
                    policy: PolicySpec::new(kind, cfg.storage_cfg.alpha),
                    ec: cfg.ec,
                    priority_ratio: ratio,
                    common_fraction: cfg.trace_cfg.common_fraction,
                    seed,
                    gammas,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    run_points(cfg, points)
}

/// Sweeps the cross-batch common-data fraction across every configured
/// policy.
pub fn run_common_sweep(cfg: &ExperimentConfig, fractions: &[f64]) -> Result<Vec<RunRecord>, Error> {
    cfg.validate()?;
    for &f in fractions {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidConfig(format!(
                "sweep: common fraction {f} must be in [0, 1]"
            )));
        }
    }
    let points = fractions
        .iter()
        .flat_map(|&common| {
            base_points(cfg)
                .map(|(kind, seed, gammas)| RunPoint {
                    policy: PolicySpec::new(kind, cfg.storage_cfg.alpha),
                    ec: cfg.ec,
                    priority_ratio: cfg.trace_cfg.priority_ratio,
                    common_fraction: common,
                    seed,
                    gammas,
                })
                .collect::<Vec<_>>()
        })
        .collect();
    run_points(cfg, points)
}

/// Runs whatever the config's sweep axis selects.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, Error> {
    match &cfg.sweep {
        Sweep::None => run_compare(cfg),
        Sweep::Alpha(v) => run_alpha_sweep(cfg, &v.clone()),
        Sweep::Ec(v) => run_ec_sweep(cfg, &v.clone()),
        Sweep::Priority(v) => run_priority_sweep(cfg, &v.clone()),
        Sweep::Common(v) => run_common_sweep(cfg, &v.clone()),
    }
}

/// Mean and standard deviation of revenue across the seeds of one group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub policy: String,
    pub alpha: f64,
    pub k: usize,
    pub m: usize,
    pub priority_ratio: (u32, u32, u32),
    pub common_fraction: f64,
    pub replicates: u32,
    pub mean_revenue: f64,
    pub std_revenue: f64,
}

/// Groups records by everything except the seed and summarizes revenue.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for rec in records {
        let p = &rec.point;
        let (x, y, z) = p.priority_ratio;
        let key = format!(
            "{}_a{:.4}_ec{}-{}_p{}-{}-{}_c{:.4}",
            p.policy.kind.label(),
            p.policy.alpha,
            p.ec.k,
            p.ec.m,
            x,
            y,
            z,
            p.common_fraction
        );
        groups.entry(key).or_default().push(rec);
    }
    groups
        .into_values()
        .map(|group| {
            let p = &group[0].point;
            let revenues: Vec<f64> = group.iter().map(|r| r.report.total_revenue as f64).collect();
            let n = revenues.len() as f64;
            let mean = revenues.iter().sum::<f64>() / n;
            let var = if revenues.len() > 1 {
                revenues.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            AggregateRow {
                policy: p.policy.kind.label().to_string(),
                alpha: p.policy.alpha,
                k: p.ec.k,
                m: p.ec.m,
                priority_ratio: p.priority_ratio,
                common_fraction: p.common_fraction,
                replicates: group.len() as u32,
                mean_revenue: mean,
                std_revenue: var.sqrt(),
            }
        })
        .collect()
}

/// Mean revenue per policy, highest first. Convenience over [`aggregate`]
/// for single-point comparisons.
pub fn mean_revenue_by_policy(records: &[RunRecord]) -> Vec<(String, f64)> {
    let mut rows: Vec<(String, f64)> = aggregate(records)
        .into_iter()
        .map(|row| (row.policy, row.mean_revenue))
        .collect();
    rows.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    rows
}

/// Writes `summary.csv`, `aggregate.csv` and `detail/<run-id>.json` under
/// `dir`. Row order and summary bytes are deterministic for identical
/// records.
pub fn emit_reports(records: &[RunRecord], dir: &Path) -> Result<(), Error> {
    let detail_dir = dir.join("detail");
    fs::create_dir_all(&detail_dir).map_err(|e| Error::io(&detail_dir, e))?;

    let summary_path = dir.join("summary.csv");
    let mut summary = String::new();
    summary.push_str(SUMMARY_CSV_HEADER);
    summary.push('\n');
    for rec in records {
        let r = &rec.report;
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.policy,
            r.seed,
            r.alpha,
            r.k,
            r.m,
            r.total_revenue,
            r.served_count,
            r.request_count,
            r.edge_hit_count,
            r.cc_fetch_count,
            r.deadline_miss_count,
            r.sim_time_units
        ));
    }
    fs::write(&summary_path, summary).map_err(|e| Error::io(&summary_path, e))?;

    let agg_path = dir.join("aggregate.csv");
    let mut agg = String::from(
        "policy,alpha,k,m,priority_ratio,common_fraction,replicates,mean_revenue,std_revenue\n",
    );
    for row in aggregate(records) {
        let (x, y, z) = row.priority_ratio;
        agg.push_str(&format!(
            "{},{},{},{},{x}:{y}:{z},{},{},{:.3},{:.3}\n",
            row.policy,
            row.alpha,
            row.k,
            row.m,
            row.common_fraction,
            row.replicates,
            row.mean_revenue,
            row.std_revenue
        ));
    }
    fs::write(&agg_path, agg).map_err(|e| Error::io(&agg_path, e))?;

    for rec in records {
        let path = detail_dir.join(format!("{}.json", rec.point.run_id()));
        let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let doc = serde_json::to_string_pretty(rec).expect("report serialization cannot fail");
        file.write_all(doc.as_bytes())
            .map_err(|e| Error::io(&path, e))?;
        file.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk_default();
        cfg.topology_cfg.num_es = 10;
        cfg.topology_cfg.num_ap = 20;
        cfg.topology_cfg.cc_gateway_count = 2;
        cfg.trace_cfg.num_requests = 2_000;
        cfg.trace_cfg.num_contents = 100;
        cfg.trace_cfg.batch_size = 500;
        cfg.storage_cfg.s_e = 40;
        cfg.storage_cfg.warmup_blocks = 20;
        cfg.replicates = 2;
        cfg
    }

    #[test]
    fn compare_produces_one_report_per_policy_and_seed() {
        let cfg = tiny_cfg();
        let records = run_compare(&cfg).unwrap();
        assert_eq!(records.len(), 4 * 2);
        let ids: Vec<String> = records.iter().map(|r| r.point.run_id()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        // paired seeds: every policy ran the same seed set
        for kind in PolicyKind::ALL {
            let seeds: Vec<u64> = records
                .iter()
                .filter(|r| r.point.policy.kind == kind)
                .map(|r| r.point.seed)
                .collect();
            assert_eq!(seeds, vec![1, 2]);
        }
        // effective alpha in reports: zero for the fully public policies
        for rec in &records {
            match rec.point.policy.kind {
                PolicyKind::E | PolicyKind::Dcc => assert_eq!(rec.report.alpha, 0.0),
                _ => assert_eq!(rec.report.alpha, 0.7),
            }
        }
    }

    #[test]
    fn alpha_zero_dspe_with_static_shares_equals_e() {
        let mut cfg = tiny_cfg();
        cfg.replicates = 1;
        let e = run_compare(&ExperimentConfig {
            policies: vec![PolicyKind::E],
            ..cfg.clone()
        })
        .unwrap();
        let dspe0_point = RunPoint {
            policy: PolicySpec {
                kind: PolicyKind::Dspe,
                alpha: 0.0,
                dynamic_shares: false,
            },
            ..e[0].point.clone()
        };
        let dspe0 = execute_point(&cfg, &dspe0_point).unwrap();
        assert!(dspe0.report.same_results(&e[0].report));
    }

    #[test]
    fn sweeps_carry_their_axis() {
        let mut cfg = tiny_cfg();
        cfg.replicates = 1;
        cfg.policies = vec![PolicyKind::Dspe, PolicyKind::E];
        let records = run_alpha_sweep(&cfg, &[0.0, 0.7]).unwrap();
        assert_eq!(records.len(), 2);
        let alphas: Vec<f64> = records.iter().map(|r| r.point.policy.alpha).collect();
        assert_eq!(alphas, vec![0.0, 0.7]);

        let records = run_ec_sweep(&cfg, &[EcSplit { k: 10, m: 4 }, EcSplit { k: 10, m: 2 }])
            .unwrap();
        assert_eq!(records.len(), 2);
        for rec in &records {
            assert_eq!(
                rec.report.ec_overhead,
                (rec.point.ec.k + rec.point.ec.m) as f64 / rec.point.ec.k as f64
            );
        }
        assert!(run_ec_sweep(&cfg, &[EcSplit { k: 250, m: 50 }]).is_err());

        let records = run_common_sweep(&cfg, &[0.0, 0.5]).unwrap();
        assert_eq!(records.len(), 2 * 2);
        let records = run_priority_sweep(&cfg, &[(10, 20, 70)]).unwrap();
        assert_eq!(records.len(), 2);
        assert!(run_priority_sweep(&cfg, &[(50, 50, 50)]).is_err());
    }

    #[test]
    fn emit_reports_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg();
        cfg.replicates = 1;
        cfg.policies = vec![PolicyKind::Dspe];
        let records = run_compare(&cfg).unwrap();
        emit_reports(&records, dir.path()).unwrap();
        let summary_a = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary_a.starts_with(SUMMARY_CSV_HEADER));
        assert_eq!(summary_a.lines().count(), 2);

        // summary revenue equals the detail revenue for every run
        for rec in &records {
            let detail_path = dir.path().join("detail").join(format!("{}.json", rec.point.run_id()));
            let doc: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(detail_path).unwrap()).unwrap();
            assert_eq!(
                doc["report"]["total_revenue"].as_u64().unwrap(),
                rec.report.total_revenue
            );
        }

        let records_again = run_compare(&cfg).unwrap();
        emit_reports(&records_again, dir.path()).unwrap();
        let summary_b = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary_a, summary_b);
    }

    #[test]
    fn emit_reports_empty_set() {
        let dir = tempfile::tempdir().unwrap();
        emit_reports(&[], dir.path()).unwrap();
        let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary, format!("{SUMMARY_CSV_HEADER}\n"));
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        let mut doc = serde_json::to_value(ExperimentConfig::desk_default()).unwrap();
        doc["no_such_knob"] = serde_json::json!(1);
        let text = doc.to_string();
        assert!(ExperimentConfig::from_json(&text).is_err());
        // and the original round-trips
        let text = serde_json::to_string(&ExperimentConfig::desk_default()).unwrap();
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(cfg, ExperimentConfig::desk_default());
    }

    #[test]
    fn aggregate_groups_by_point() {
        let cfg = tiny_cfg();
        let records = run_compare(&cfg).unwrap();
        let rows = aggregate(&records);
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert_eq!(row.replicates, 2);
            assert!(row.mean_revenue > 0.0);
        }
        let means = mean_revenue_by_policy(&records);
        assert_eq!(means.len(), 4);
        assert!(means.windows(2).all(|w| w[0].1 >= w[1].1));
    }
}
