//! Request traces: synthetic generation and CSV ingestion.
//!
//! Synthetic traces draw content ids from a Zipf law, assign APs uniformly,
//! and split requests into priority classes with per-class revenues and
//! deadline ranges. Requests are organized in batches; a configurable
//! fraction of each batch's content draws is resampled from the previous
//! batch's realized content set, controlling temporal locality across
//! batches.
//!
//! The CSV schema is the interchange format for externally prepared traces:
//! header `seq,ap,content,deadline,revenue,priority`, integer fields except
//! `priority` in {H, M, L}, UTF-8 with LF line endings.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng::{stream_rng, CumulativeSampler, Stream};
use crate::topology::Topology;
use crate::{ApId, ContentId, Revenue, TimeUnits};

pub const TRACE_CSV_HEADER: &str = "seq,ap,content,deadline,revenue,priority";

/// Priority class of a request; drives revenue and deadline tightness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    High,
    Medium,
    Low,
}

impl Priority {
    pub const ALL: [Priority; 3] = [Priority::High, Priority::Medium, Priority::Low];

    pub fn letter(self) -> char {
        match self {
            Priority::High => 'H',
            Priority::Medium => 'M',
            Priority::Low => 'L',
        }
    }

    pub fn from_letter(s: &str) -> Option<Priority> {
        match s {
            "H" => Some(Priority::High),
            "M" => Some(Priority::Medium),
            "L" => Some(Priority::Low),
            _ => None,
        }
    }
}

/// One value per priority class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorityMap<T> {
    pub high: T,
    pub medium: T,
    pub low: T,
}

impl<T: Copy> PriorityMap<T> {
    pub fn get(&self, p: Priority) -> T {
        match p {
            Priority::High => self.high,
            Priority::Medium => self.medium,
            Priority::Low => self.low,
        }
    }

    pub fn get_mut(&mut self, p: Priority) -> &mut T {
        match p {
            Priority::High => &mut self.high,
            Priority::Medium => &mut self.medium,
            Priority::Low => &mut self.low,
        }
    }
}

/// One user request: content wanted, ingress AP, deadline and the revenue
/// earned if served in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub seq: u64,
    pub content: ContentId,
    pub ap: ApId,
    pub deadline: TimeUnits,
    pub revenue: Revenue,
    pub priority: Priority,
}

/// Synthetic trace parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub num_requests: usize,
    pub num_contents: ContentId,
    /// Zipf popularity exponent over the content catalog.
    pub zipf_s: f64,
    /// high : medium : low percentages, summing to 100.
    pub priority_ratio: (u32, u32, u32),
    pub revenue_map: PriorityMap<Revenue>,
    /// Inclusive deadline ranges in time units, per priority.
    pub deadline_ranges: PriorityMap<(TimeUnits, TimeUnits)>,
    pub batch_size: usize,
    /// Fraction of each batch's content draws taken from the previous
    /// batch's realized content set.
    pub common_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            num_requests: 100_000,
            num_contents: 1000,
            zipf_s: 0.8,
            priority_ratio: (70, 20, 10),
            revenue_map: PriorityMap {
                high: 12,
                medium: 10,
                low: 8,
            },
            deadline_ranges: PriorityMap {
                high: (40, 70),
                medium: (60, 110),
                low: (80, 160),
            },
            batch_size: 10_000,
            common_fraction: 0.8,
            seed: 1,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let (x, y, z) = self.priority_ratio;
        if x + y + z != 100 {
            return Err(Error::InvalidConfig(format!(
                "trace: priority_ratio must sum to 100, got {}:{}:{}",
                x, y, z
            )));
        }
        if self.num_contents == 0 {
            return Err(Error::InvalidConfig("trace: num_contents must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("trace: batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.common_fraction) {
            return Err(Error::InvalidConfig(
                "trace: common_fraction must be in [0, 1]".into(),
            ));
        }
        for p in Priority::ALL {
            let (lo, hi) = self.deadline_ranges.get(p);
            if lo == 0 || lo > hi {
                return Err(Error::InvalidConfig(format!(
                    "trace: deadline range for {:?} must be nonempty and start at >= 1",
                    p
                )));
            }
            if self.revenue_map.get(p) == 0 {
                return Err(Error::InvalidConfig(format!(
                    "trace: revenue for {:?} must be > 0",
                    p
                )));
            }
        }
        Ok(())
    }
}

/// Generates a synthetic trace; deterministic per seed. The topology only
/// provides the AP id range.
///
/// Each batch draws content ranks from the Zipf law through a fresh random
/// rank-to-content permutation, so consecutive batches share content only
/// through the common-fraction resampling (plus chance collisions). That
/// makes the common-data knob the actual controller of cross-batch reuse.
pub fn generate_trace(cfg: &TraceConfig, topo: &Topology) -> Result<Vec<Request>, Error> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Trace);
    let zipf = CumulativeSampler::zipf(cfg.num_contents as usize, cfg.zipf_s);
    let (x, y, _) = cfg.priority_ratio;
    let num_aps = topo.num_aps();

    let mut rank_to_content: Vec<ContentId> = (0..cfg.num_contents).collect();
    rank_to_content.shuffle(&mut rng);
    let mut out = Vec::with_capacity(cfg.num_requests);
    let mut prev_batch: Vec<ContentId> = Vec::new();
    let mut cur_batch: BTreeSet<ContentId> = BTreeSet::new();
    for seq in 0..cfg.num_requests {
        if seq > 0 && seq % cfg.batch_size == 0 {
            prev_batch = std::mem::take(&mut cur_batch).into_iter().collect();
            rank_to_content.shuffle(&mut rng);
        }
        let content = if !prev_batch.is_empty() && rng.gen::<f64>() < cfg.common_fraction {
            prev_batch[rng.gen_range(0..prev_batch.len())]
        } else {
            rank_to_content[zipf.sample(&mut rng)]
        };
        cur_batch.insert(content);
        let r = rng.gen_range(0..100u32);
        let priority = if r < x {
            Priority::High
        } else if r < x + y {
            Priority::Medium
        } else {
            Priority::Low
        };
        let ap = rng.gen_range(0..num_aps);
        let (lo, hi) = cfg.deadline_ranges.get(priority);
        let deadline = rng.gen_range(lo..=hi);
        out.push(Request {
            seq: seq as u64,
            content,
            ap,
            deadline,
            revenue: cfg.revenue_map.get(priority),
            priority,
        });
    }
    Ok(out)
}

/// Writes a trace in the interchange CSV schema.
pub fn save_trace_csv(path: &Path, requests: &[Request]) -> Result<(), Error> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_trace_csv(&mut w, requests).map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(w: &mut impl Write, requests: &[Request]) -> std::io::Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for r in requests {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.seq,
            r.ap,
            r.content,
            r.deadline,
            r.revenue,
            r.priority.letter()
        )?;
    }
    Ok(())
}

/// Loads a trace from the interchange CSV schema. Rows are validated field by
/// field; errors carry 1-based line numbers. `seq` is assigned from row
/// order.
pub fn load_trace_csv(path: &Path) -> Result<Vec<Request>, Error> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace_csv(BufReader::new(file))
}

pub fn read_trace_csv(reader: impl std::io::Read) -> Result<Vec<Request>, Error> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::TraceParse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let expected: Vec<&str> = TRACE_CSV_HEADER.split(',').collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::TraceParse {
            line: 1,
            msg: format!("expected header {TRACE_CSV_HEADER:?}, got {:?}", got.join(",")),
        });
    }
    let mut out = Vec::new();
    for (row_idx, record) in csv.records().enumerate() {
        let line = row_idx + 2; // 1-based, after the header
        let record = record.map_err(|e| Error::TraceParse {
            line,
            msg: e.to_string(),
        })?;
        if record.len() != expected.len() {
            return Err(Error::TraceParse {
                line,
                msg: format!("expected {} columns, got {}", expected.len(), record.len()),
            });
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let int = |i: usize, name: &str| -> Result<u64, Error> {
            field(i).parse::<u64>().map_err(|_| Error::TraceParse {
                line,
                msg: format!("column {name}: {:?} is not a non-negative integer", field(i)),
            })
        };
        // seq is parsed for validation but reassigned from row order.
        int(0, "seq")?;
        let ap = int(1, "ap")? as ApId;
        let content = int(2, "content")? as ContentId;
        let deadline = int(3, "deadline")?;
        if deadline == 0 {
            return Err(Error::TraceParse {
                line,
                msg: "column deadline: must be > 0".into(),
            });
        }
        let revenue = int(4, "revenue")?;
        if revenue == 0 {
            return Err(Error::TraceParse {
                line,
                msg: "column revenue: must be > 0".into(),
            });
        }
        let priority = Priority::from_letter(field(5)).ok_or_else(|| Error::TraceParse {
            line,
            msg: format!("column priority: {:?} is not one of H, M, L", field(5)),
        })?;
        out.push(Request {
            seq: out.len() as u64,
            content,
            ap,
            deadline,
            revenue,
            priority,
        });
    }
    Ok(out)
}
