//! Core library for a seeded, deterministic simulator of an erasure-coded,
//! collaboratively cached edge-cloud storage system.
//!
//! The system model: users submit deadline-constrained content requests
//! through access points (APs). Each AP forwards a request to one of its
//! directly connected edge servers (ESs), chosen with probability inversely
//! proportional to distance. The selected ES searches the edge network in
//! increasing hop distance for the coded blocks of the content, falling back
//! to a centralized cloud (CC) for anything missing. A request earns its
//! revenue only if total retrieval latency stays within its deadline.
//!
//! Modules map onto the subsystems of that model:
//! - [`topology`]: the static ES/AP/CC graph and its distance matrices
//! - [`codec`]: systematic Reed-Solomon erasure coding over GF(2^8)
//! - [`storage`]: partitioned per-ES block stores with LRU eviction
//! - [`workload`]: synthetic trace generation and CSV trace ingestion
//! - [`engine`]: the request-serving loop and the four caching policies
//! - [`experiments`]: sweep runners and CSV/JSON report emission

pub mod codec;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod rng;
pub mod storage;
pub mod topology;
pub mod workload;

pub use codec::{BlockKey, CodedBlock, EcParams};
pub use engine::{EcSplit, LatencyBreakdown, Outcome, PolicyKind, PolicySpec, SimReport, Simulation};
pub use error::Error;
pub use storage::{ApLoadEstimator, Directory, EdgeStore, StorageConfig};
pub use topology::{SelectionMatrix, Topology, TopologyConfig};
pub use workload::{Priority, Request, TraceConfig};

/// Identifier of an edge server, an index into the topology's ES set.
pub type EsId = usize;
/// Identifier of an access point.
pub type ApId = usize;
/// Identifier of a content item in the catalog.
pub type ContentId = u32;
/// Abstract time units; one hop costs a fixed number of units per tier.
pub type TimeUnits = u64;
/// Profit units earned by serving a request within its deadline.
pub type Revenue = u64;
