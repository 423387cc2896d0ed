//! Lifted block channel matrices.
//!
//! A time-varying kernel `h[k, l]` with memory `L` acting on a stream cut into
//! blocks of `P > L` samples becomes
//! `v_out[i] = H_{i,0} v[i] + H_{i,1} v[i−1]` with
//! `{H_{i,0}}_{k,n} = h[iP+k, k−n]` (lower band of order `L`) and
//! `{H_{i,1}}_{k,n} = h[iP+k, P+k−n]` (upper-right `L×L` corner).

use crate::error::{Error, Result};
use crate::kernels::DtKernel;
use crate::linalg::{max_abs, zero_pad, CMatrix, CVector, QrSolver, C64, ZERO};

/// Time-indexed taps `h[k, l]`, zero outside `0 ≤ l ≤ memory()`.
pub trait TvTaps {
    fn memory(&self) -> usize;
    fn tap(&self, k: i64, l: usize) -> C64;
}

impl TvTaps for DtKernel {
    fn memory(&self) -> usize {
        DtKernel::memory(self)
    }

    fn tap(&self, _k: i64, l: usize) -> C64 {
        DtKernel::tap(self, l)
    }
}

/// Adapter turning a closure into [`TvTaps`].
pub struct FnTaps<F: Fn(i64, usize) -> C64> {
    pub memory: usize,
    pub f: F,
}

impl<F: Fn(i64, usize) -> C64> TvTaps for FnTaps<F> {
    fn memory(&self) -> usize {
        self.memory
    }

    fn tap(&self, k: i64, l: usize) -> C64 {
        if l > self.memory {
            ZERO
        } else {
            (self.f)(k, l)
        }
    }
}

/// Block size `4L` rounded up to a power of two.
pub fn default_block_size(memory: usize) -> usize {
    (4 * memory).max(4).next_power_of_two()
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPair {
    pub h0: CMatrix,
    pub h1: CMatrix,
    pub p: usize,
    pub l: usize,
    pub block_index: i64,
}

fn check_sizes(p: usize, l: usize) -> Result<()> {
    if p <= l {
        Err(Error::BlockTooSmall { p, l })
    } else {
        Ok(())
    }
}

/// Whether `(k, n)` lies inside the band of order `l`.
pub fn in_band(k: usize, n: usize, l: usize) -> bool {
    k >= n && k - n <= l
}

/// Whether `(k, n)` lies inside the corner of order `l` for block size `p`.
pub fn in_corner(k: usize, n: usize, p: usize, l: usize) -> bool {
    p + k - n <= l
}

impl LiftedPair {
    pub fn zeros(p: usize, l: usize) -> Self {
        Self {
            h0: CMatrix::zeros(p, p),
            h1: CMatrix::zeros(p, p),
            p,
            l,
            block_index: 0,
        }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            h0: CMatrix::identity(p, p),
            ..Self::zeros(p, 0)
        }
    }

    /// Exact zero-pattern check of the band and corner.
    pub fn check_structure(&self) -> Result<()> {
        check_band(&self.h0, self.l, "H0")?;
        check_corner(&self.h1, self.l, "H1")
    }

    /// Sets out-of-structure entries to exact zero, returning the largest
    /// magnitude removed.
    pub fn enforce_structure(&mut self) -> f64 {
        enforce_band(&mut self.h0, self.l).max(enforce_corner(&mut self.h1, self.l))
    }

    pub fn tall(&self) -> TallChannel {
        TallChannel {
            matrix: self.h0.columns(0, self.p - self.l).into_owned(),
            p: self.p,
            l: self.l,
        }
    }
}

pub fn check_band(m: &CMatrix, l: usize, name: &str) -> Result<()> {
    let p = m.nrows();
    for n in 0..p {
        for k in 0..p {
            if !in_band(k, n, l) && m[(k, n)] != ZERO {
                return Err(Error::Structure(format!(
                    "{name} entry ({k}, {n}) lies outside the band of order {l}"
                )));
            }
        }
    }
    Ok(())
}

pub fn check_corner(m: &CMatrix, l: usize, name: &str) -> Result<()> {
    let p = m.nrows();
    for n in 0..p {
        for k in 0..p {
            if !in_corner(k, n, p, l) && m[(k, n)] != ZERO {
                return Err(Error::Structure(format!(
                    "{name} entry ({k}, {n}) lies outside the corner of order {l}"
                )));
            }
        }
    }
    Ok(())
}

pub fn enforce_band(m: &mut CMatrix, l: usize) -> f64 {
    let p = m.nrows();
    let mut removed = 0.0_f64;
    for n in 0..p {
        for k in 0..p {
            if !in_band(k, n, l) {
                removed = removed.max(m[(k, n)].norm());
                m[(k, n)] = ZERO;
            }
        }
    }
    removed
}

pub fn enforce_corner(m: &mut CMatrix, l: usize) -> f64 {
    let p = m.nrows();
    let mut removed = 0.0_f64;
    for n in 0..p {
        for k in 0..p {
            if !in_corner(k, n, p, l) {
                removed = removed.max(m[(k, n)].norm());
                m[(k, n)] = ZERO;
            }
        }
    }
    removed
}

/// Relative size of the largest out-of-structure entry of a pair.
pub fn structure_defect(h0: &CMatrix, h1: &CMatrix, l: usize) -> f64 {
    let scale = max_abs(h0).max(max_abs(h1));
    if scale == 0.0 {
        return 0.0;
    }
    let mut a = h0.clone();
    let mut b = h1.clone();
    enforce_band(&mut a, l).max(enforce_corner(&mut b, l)) / scale
}

pub fn lift_lti(kernel: &DtKernel, p: usize) -> Result<LiftedPair> {
    lift_ltv(kernel, p, 0)
}

pub fn lift_ltv(taps: &dyn TvTaps, p: usize, i: i64) -> Result<LiftedPair> {
    let l = taps.memory();
    check_sizes(p, l)?;
    let mut pair = LiftedPair::zeros(p, l);
    pair.block_index = i;
    let base = i * p as i64;
    for k in 0..p {
        let t = base + k as i64;
        for lag in 0..=l.min(k) {
            pair.h0[(k, k - lag)] = taps.tap(t, lag);
        }
        for lag in (k + 1)..=l {
            pair.h1[(k, p + k - lag)] = taps.tap(t, lag);
        }
    }
    Ok(pair)
}

/// `H_{i,0}` with its last `L` columns removed.
#[derive(Clone, Debug, PartialEq)]
pub struct TallChannel {
    pub matrix: CMatrix,
    pub p: usize,
    pub l: usize,
}

/// Result of a trailing-zeros least-squares solve.
#[derive(Clone, Debug)]
pub struct TzSolution {
    pub payload: CVector,
    pub residual_norm: f64,
    pub condition_estimate: f64,
}

/// `H_{i,0}v[i] + H_{i,1}v[i−1]` per block, starting from rest.
pub fn apply_blocks(pairs: &[LiftedPair], blocks: &[CVector]) -> Result<Vec<CVector>> {
    if pairs.len() != blocks.len() {
        return Err(Error::InvalidParameter(format!(
            "{} lifted pairs for {} blocks",
            pairs.len(),
            blocks.len()
        )));
    }
    let mut out = Vec::with_capacity(blocks.len());
    for (i, (pair, v)) in pairs.iter().zip(blocks).enumerate() {
        if v.len() != pair.p {
            return Err(Error::InvalidParameter(format!(
                "block {i} has {} samples, expected {}",
                v.len(),
                pair.p
            )));
        }
        let mut y = &pair.h0 * v;
        if i > 0 {
            y += &pair.h1 * &blocks[i - 1];
        }
        out.push(y);
    }
    Ok(out)
}

/// Block recursion with one pair reused for every block (LTI channels).
pub fn apply_blocks_lti(pair: &LiftedPair, blocks: &[CVector]) -> Result<Vec<CVector>> {
    let pairs = vec![pair.clone(); blocks.len()];
    apply_blocks(&pairs, blocks)
}

/// Output of a block carrying `P − L` payload samples and `L` trailing zeros.
pub fn apply_tz(pair: &LiftedPair, payload: &CVector) -> Result<CVector> {
    check_payload(pair.p, pair.l, payload.len())?;
    Ok(pair.h0.columns(0, pair.p - pair.l) * payload)
}

fn check_payload(p: usize, l: usize, len: usize) -> Result<()> {
    if len != p - l {
        return Err(Error::InvalidParameter(format!(
            "payload has {len} samples, expected P − L = {}",
            p - l
        )));
    }
    Ok(())
}

impl TallChannel {
    pub fn apply(&self, payload: &CVector) -> Result<CVector> {
        check_payload(self.p, self.l, payload.len())?;
        Ok(&self.matrix * payload)
    }

    pub fn solver(&self) -> Result<QrSolver> {
        QrSolver::new(&self.matrix).map_err(|e| match e {
            Error::RankDeficient {
                rank, cols, condition, ..
            } => Error::RankDeficient {
                rank,
                cols,
                condition,
                hint: "; the tall channel matrix does not have full column rank",
            },
            other => other,
        })
    }

    /// Least-squares payload recovery from an observed `P`-sample block.
    pub fn solve(&self, observed: &CVector) -> Result<TzSolution> {
        if observed.len() != self.p {
            return Err(Error::InvalidParameter(format!(
                "observed block has {} samples, expected {}",
                observed.len(),
                self.p
            )));
        }
        let solver = self.solver()?;
        let payload = solver.solve(observed);
        let residual_norm = (observed - &self.matrix * &payload).norm();
        Ok(TzSolution {
            payload,
            residual_norm,
            condition_estimate: solver.condition_estimate(),
        })
    }
}

pub fn solve_tz(tall: &TallChannel, observed: &CVector) -> Result<TzSolution> {
    tall.solve(observed)
}

/// Cuts a stream into `p`-sample blocks; the last block is zero-padded and
/// the flag reports whether padding happened.
pub fn to_blocks(stream: &[C64], p: usize) -> (Vec<CVector>, bool) {
    let mut blocks: Vec<CVector> = stream
        .chunks(p)
        .map(|c| zero_pad(&CVector::from_column_slice(c), p - c.len()))
        .collect();
    let partial = stream.len() % p != 0;
    if blocks.is_empty() {
        blocks.push(CVector::zeros(p));
    }
    (blocks, partial)
}

pub fn from_blocks(blocks: &[CVector]) -> Vec<C64> {
    blocks.iter().flat_map(|b| b.iter().copied()).collect()
}

/// Payload followed by `l` zeros.
pub fn pad_payload(payload: &CVector, l: usize) -> CVector {
    zero_pad(payload, l)
}
