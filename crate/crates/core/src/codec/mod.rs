//! Systematic Reed-Solomon erasure codec over GF(2^8).
//!
//! A content is split into `k` equal data blocks; `m` parity blocks are
//! derived so that any `k` distinct blocks of the `k + m` reconstruct the
//! original bytes exactly (MDS). Encoding multiplies the data vector by a
//! systematic generator matrix (top k x k block is the identity), built from a
//! Vandermonde matrix row-reduced so any k rows stay invertible.
//!
//! The simulator itself runs in "logical mode": it tracks blocks purely by
//! [`BlockKey`] identity and slot size, never by payload. The payload-carrying
//! codec here backs the `codec roundtrip` CLI and its own test suite.

pub mod gf256;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::ContentId;

/// Identity of one coded block: which content, which of the k+m indices.
/// This is the unit the stores, directory and engine operate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockKey {
    pub content: ContentId,
    pub index: u8,
}

impl BlockKey {
    pub fn new(content: ContentId, index: u8) -> Self {
        BlockKey { content, index }
    }
}

/// Erasure-coding parameters: k data blocks, m parity blocks, and the
/// (k+m) x k systematic generator matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EcParams {
    k: usize,
    m: usize,
    generator: Vec<Vec<u8>>,
}

/// One coded block with payload, as produced by [`encode`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedBlock {
    pub content_id: ContentId,
    pub index: u8,
    pub is_parity: bool,
    /// Original (unpadded) content length; carried so reconstruction can
    /// strip padding.
    pub content_len: usize,
    pub payload: Vec<u8>,
}

impl CodedBlock {
    pub fn key(&self) -> BlockKey {
        BlockKey::new(self.content_id, self.index)
    }
}

/// Builds systematic MDS parameters for an EC(k, m) split.
///
/// Deterministic for fixed (k, m). Rejects k = 0 and k + m > 256 (GF(2^8)
/// has only 256 distinct evaluation points).
pub fn make_params(k: usize, m: usize) -> Result<EcParams, Error> {
    if k == 0 {
        return Err(Error::InvalidConfig("ec: k must be >= 1".into()));
    }
    if k + m > 256 {
        return Err(Error::InvalidConfig(format!(
            "ec: k + m = {} exceeds the GF(2^8) bound of 256",
            k + m
        )));
    }
    // Vandermonde rows over distinct evaluation points 0..k+m, then
    // right-multiply by the inverse of the top k x k block. Any k rows of the
    // result remain invertible, and the top block becomes the identity.
    let n = k + m;
    let vander: Vec<Vec<u8>> = (0..n)
        .map(|i| (0..k).map(|j| gf256::pow(i as u8, j as u32)).collect())
        .collect();
    let top_inv = invert(&vander[..k].to_vec()).expect("Vandermonde top block is invertible");
    let generator = matmul(&vander, &top_inv);
    debug_assert!((0..k).all(|i| (0..k).all(|j| generator[i][j] == u8::from(i == j))));
    Ok(EcParams { k, m, generator })
}

impl EcParams {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Total number of coded blocks, k + m.
    pub fn total_blocks(&self) -> usize {
        self.k + self.m
    }

    pub fn generator_row(&self, i: usize) -> &[u8] {
        &self.generator[i]
    }
}

/// Storage overhead of an EC(k, m) split: (k + m) / k.
pub fn storage_overhead(k: usize, m: usize) -> Result<f64, Error> {
    if k == 0 {
        return Err(Error::InvalidConfig("ec: k must be >= 1".into()));
    }
    Ok((k + m) as f64 / k as f64)
}

/// Encodes a payload into k + m equal-size blocks.
///
/// The payload is zero-padded to a multiple of k; the true length travels in
/// each block so [`reconstruct`] can strip the padding.
pub fn encode(params: &EcParams, content_id: ContentId, payload: &[u8]) -> Result<Vec<CodedBlock>, Error> {
    if payload.is_empty() {
        return Err(Error::EmptyPayload);
    }
    let k = params.k;
    let shard_len = payload.len().div_ceil(k);
    let mut shards: Vec<Vec<u8>> = Vec::with_capacity(k);
    for j in 0..k {
        let start = j * shard_len;
        let mut shard = vec![0u8; shard_len];
        if start < payload.len() {
            let end = (start + shard_len).min(payload.len());
            shard[..end - start].copy_from_slice(&payload[start..end]);
        }
        shards.push(shard);
    }
    let mut blocks = Vec::with_capacity(params.total_blocks());
    for (i, row) in params.generator.iter().enumerate() {
        let data = if i < k {
            shards[i].clone()
        } else {
            let mut acc = vec![0u8; shard_len];
            for (j, shard) in shards.iter().enumerate() {
                let coef = row[j];
                if coef == 0 {
                    continue;
                }
                for (a, &s) in acc.iter_mut().zip(shard.iter()) {
                    *a = gf256::add(*a, gf256::mul(coef, s));
                }
            }
            acc
        };
        blocks.push(CodedBlock {
            content_id,
            index: i as u8,
            is_parity: i >= k,
            content_len: payload.len(),
            payload: data,
        });
    }
    Ok(blocks)
}

/// Reconstructs the original payload from any k blocks with distinct indices.
///
/// Fails with [`Error::InsufficientBlocks`] when fewer than k distinct
/// indices are supplied; never returns a wrong payload.
pub fn reconstruct(params: &EcParams, blocks: &[CodedBlock]) -> Result<Vec<u8>, Error> {
    let k = params.k;
    let mut chosen: Vec<&CodedBlock> = Vec::with_capacity(k);
    for b in blocks {
        if chosen.iter().any(|c| c.index == b.index) {
            continue;
        }
        chosen.push(b);
    }
    if chosen.len() < k {
        return Err(Error::InsufficientBlocks {
            need: k,
            got: chosen.len(),
        });
    }
    chosen.truncate(k);
    chosen.sort_by_key(|b| b.index);
    let content_id = chosen[0].content_id;
    let content_len = chosen[0].content_len;
    let shard_len = chosen[0].payload.len();
    for b in &chosen {
        if b.content_id != content_id || b.content_len != content_len {
            return Err(Error::MixedContent);
        }
        if b.payload.len() != shard_len {
            return Err(Error::PayloadLengthMismatch);
        }
    }
    // Systematic fast path: all k data blocks present.
    let mut out = Vec::with_capacity(k * shard_len);
    if chosen.iter().enumerate().all(|(j, b)| b.index as usize == j) {
        for b in &chosen {
            out.extend_from_slice(&b.payload);
        }
        out.truncate(content_len);
        return Ok(out);
    }
    let rows: Vec<Vec<u8>> = chosen
        .iter()
        .map(|b| params.generator[b.index as usize].clone())
        .collect();
    let decode = invert(&rows).expect("any k distinct generator rows are invertible");
    for j in 0..k {
        let coefs = &decode[j];
        let mut shard = vec![0u8; shard_len];
        for (r, b) in chosen.iter().enumerate() {
            let coef = coefs[r];
            if coef == 0 {
                continue;
            }
            for (s, &p) in shard.iter_mut().zip(b.payload.iter()) {
                *s = gf256::add(*s, gf256::mul(coef, p));
            }
        }
        out.extend_from_slice(&shard);
    }
    out.truncate(content_len);
    Ok(out)
}

/// Gauss-Jordan inversion over GF(2^8); None if the matrix is singular.
fn invert(matrix: &Vec<Vec<u8>>) -> Option<Vec<Vec<u8>>> {
    let n = matrix.len();
    let mut aug: Vec<Vec<u8>> = matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            debug_assert_eq!(row.len(), n);
            let mut r = row.clone();
            r.extend((0..n).map(|j| u8::from(i == j)));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| aug[r][col] != 0)?;
        aug.swap(col, pivot);
        let inv_p = gf256::inv(aug[col][col]);
        for x in aug[col].iter_mut() {
            *x = gf256::mul(*x, inv_p);
        }
        for r in 0..n {
            if r == col || aug[r][col] == 0 {
                continue;
            }
            let factor = aug[r][col];
            for c in 0..2 * n {
                let sub = gf256::mul(factor, aug[col][c]);
                aug[r][c] = gf256::add(aug[r][c], sub);
            }
        }
    }
    Some(aug.into_iter().map(|row| row[n..].to_vec()).collect())
}

fn matmul(a: &[Vec<u8>], b: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|c| {
                    row.iter()
                        .enumerate()
                        .fold(0u8, |acc, (j, &x)| gf256::add(acc, gf256::mul(x, b[j][c])))
                })
                .collect()
        })
        .collect()
}
