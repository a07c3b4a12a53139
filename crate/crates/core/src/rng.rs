//! Named, independent RNG streams derived from one master seed.
//!
//! Every random choice in the simulator draws from a stream dedicated to its
//! purpose, so changing one policy knob (say, the placement probability) never
//! perturbs unrelated random choices. This keeps paired comparisons across
//! policies and sweep points well defined.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Purpose tag mixed into the master seed to derive a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Topology,
    Trace,
    Warmup,
    Selection,
    Placement,
    /// Per-topology draw of the tiered per-hop times.
    Gamma,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Topology => 0x746f_706f,
            Stream::Trace => 0x7472_6163,
            Stream::Warmup => 0x7761_726d,
            Stream::Selection => 0x7365_6c65,
            Stream::Placement => 0x706c_6163,
            Stream::Gamma => 0x67616d_6d61,
        }
    }
}

/// SplitMix64 finalizer; used to decorrelate derived seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for a named stream of `master`.
pub fn stream_seed(master: u64, stream: Stream) -> u64 {
    splitmix64(master ^ splitmix64(stream.tag()))
}

/// RNG for a named stream of `master`.
pub fn stream_rng(master: u64, stream: Stream) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(stream_seed(master, stream))
}

/// RNG for one subunit (e.g. one request) of a named stream.
///
/// Placement randomness is keyed per request sequence number so that a request
/// draws the same placement decisions regardless of how many draws earlier
/// requests consumed in a different scenario.
pub fn substream_rng(master: u64, stream: Stream, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(splitmix64(stream_seed(master, stream) ^ splitmix64(index)))
}

/// Weighted categorical sampler backed by a cumulative table.
///
/// Exact and cheap for catalogs in the thousands; a draw is one uniform f64
/// plus a binary search.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeSampler {
    cumulative: Vec<f64>,
}

impl CumulativeSampler {
    pub fn new(weights: &[f64]) -> Self {
        assert!(!weights.is_empty(), "sampler needs at least one weight");
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|&w| {
                assert!(w >= 0.0 && w.is_finite());
                acc += w;
                acc
            })
            .collect();
        assert!(acc > 0.0, "weights must not all be zero");
        CumulativeSampler { cumulative }
    }

    /// Zipf weights over ranks 1..=n: weight(rank) = rank^-s. Item 0 is the
    /// most popular.
    pub fn zipf(n: usize, s: f64) -> Self {
        let weights: Vec<f64> = (1..=n).map(|rank| (rank as f64).powf(-s)).collect();
        CumulativeSampler::new(&weights)
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> usize {
        let total = *self.cumulative.last().expect("nonempty");
        let r = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= r).min(self.cumulative.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }
}
