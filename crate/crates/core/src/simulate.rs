//! Terminated-link simulation in lifted form.
//!
//! With trailing zeros, each block is solved independently: the input current
//! is the least-squares solution of `Ξ i_in = (D + z_L C) v_s` built from tall
//! matrices, and the load voltage follows as `D v_s − (z_s D + B) i_in`.
//! Without trailing zeros, the four Kirchhoff block equations are solved as
//! one `4P×4P` system per block, carrying the previous block's state.

use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::chainrule::{cascade_chain_ibi, LiftedTwoPort};
use crate::error::{Error, Result};
use crate::kernels::DtKernel;
use crate::lifting::lift_lti;
use crate::linalg::{max_abs, solve_square, CMatrix, CVector, QrSolver, C64, ZERO};
use crate::twoport::{chain_fd, transfer_function, SampledSpectrum, Termination, TwoPortABCD};

/// Largest tolerated `|x||A|/|b|` in the block-by-block IBI solve.
pub const IBI_MAX_GROWTH: f64 = 1e10;

/// One element of a link, possibly varying with the block index.
pub trait BlockElement: Send + Sync {
    fn lifted_at(&self, i: i64) -> Result<LiftedTwoPort>;
    fn block_size(&self) -> usize;
    fn memory(&self) -> usize;
    /// Number of blocks after which the element repeats; 1 for time-invariant ones.
    fn period_blocks(&self) -> usize;
}

impl BlockElement for LiftedTwoPort {
    fn lifted_at(&self, i: i64) -> Result<LiftedTwoPort> {
        let mut x = self.clone();
        x.block_index = i;
        Ok(x)
    }

    fn block_size(&self) -> usize {
        self.p
    }

    fn memory(&self) -> usize {
        self.l
    }

    fn period_blocks(&self) -> usize {
        1
    }
}

/// A source or load impedance in the time domain.
#[derive(Clone, Debug, PartialEq)]
pub enum TerminationModel {
    Scalar(C64),
    Kernel(DtKernel),
}

impl TerminationModel {
    pub fn resistor(r: f64) -> Self {
        TerminationModel::Scalar(C64::new(r, 0.0))
    }

    pub fn memory(&self) -> usize {
        match self {
            TerminationModel::Scalar(_) => 0,
            TerminationModel::Kernel(k) => k.memory(),
        }
    }

    /// Lifted `(Z_0, Z_1)` pair.
    fn lifted(&self, p: usize) -> Result<(CMatrix, CMatrix)> {
        match self {
            TerminationModel::Scalar(z) => Ok((CMatrix::identity(p, p) * *z, CMatrix::zeros(p, p))),
            TerminationModel::Kernel(k) => {
                let pair = lift_lti(k, p)?;
                Ok((pair.h0, pair.h1))
            }
        }
    }
}

/// Gaussian observation noise added after the channel.
#[derive(Clone, Debug, PartialEq)]
pub enum NoiseKind {
    White { variance: f64 },
    /// Stationary first-order autoregressive noise with correlation `rho`.
    Ar1 { variance: f64, rho: f64 },
    /// Explicit `P×P` covariance.
    Covariance(DMatrix<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn white(variance: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::White { variance },
            seed,
        }
    }

    /// Per-block covariance `R_n`.
    pub fn covariance(&self, p: usize) -> Result<DMatrix<f64>> {
        match &self.kind {
            NoiseKind::White { variance } => Ok(DMatrix::identity(p, p) * *variance),
            NoiseKind::Ar1 { variance, rho } => Ok(DMatrix::from_fn(p, p, |r, c| {
                variance * rho.powi((r as i32 - c as i32).abs())
            })),
            NoiseKind::Covariance(m) => {
                if m.shape() != (p, p) {
                    return Err(Error::InvalidParameter(format!(
                        "noise covariance is {}×{}, expected {p}×{p}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                Ok(m.clone())
            }
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match &self.kind {
            NoiseKind::White { variance } | NoiseKind::Ar1 { variance, .. } if !(*variance >= 0.0 && variance.is_finite()) => {
                Err(Error::InvalidParameter("noise variance must be nonnegative".into()))
            }
            NoiseKind::Ar1 { rho, .. } if !(rho.abs() < 1.0) => {
                Err(Error::InvalidParameter("AR(1) correlation must lie in (−1, 1)".into()))
            }
            NoiseKind::Covariance(m) => {
                let m = self.covariance(p).map(|_| m)?;
                let asym = (m - m.transpose()).abs().max();
                if asym > 1e-12 * m.abs().max().max(f64::MIN_POSITIVE) {
                    return Err(Error::InvalidParameter("noise covariance must be symmetric".into()));
                }
                let eig = SymmetricEigen::new(m.clone());
                if eig.eigenvalues.min() < -1e-10 * eig.eigenvalues.abs().max() {
                    return Err(Error::InvalidParameter("noise covariance must be positive semidefinite".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Square-root factor `S` with `S Sᵀ = R_n`.
    fn factor(&self, p: usize) -> Result<DMatrix<f64>> {
        let r = self.covariance(p)?;
        let eig = SymmetricEigen::new(r);
        let sqrt_l = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_l))
    }

    /// Noise for block `i`, drawn from its own deterministic stream.
    pub fn block(&self, p: usize, i: i64, factor: Option<&DMatrix<f64>>) -> CVector {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        let mut w: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        match &self.kind {
            NoiseKind::White { variance } => w.iter_mut().for_each(|x| *x *= variance.sqrt()),
            NoiseKind::Ar1 { variance, rho } => {
                let s = variance.sqrt();
                let innov = (1.0 - rho * rho).sqrt();
                let mut prev = w[0] * s;
                w[0] = prev;
                for x in w.iter_mut().skip(1) {
                    prev = rho * prev + innov * s * *x;
                    *x = prev;
                }
            }
            NoiseKind::Covariance(_) => {
                let f = factor.expect("covariance noise needs its factor");
                w = (f * nalgebra::DVector::from_vec(w)).iter().copied().collect();
            }
        }
        CVector::from_iterator(p, w.into_iter().map(|x| C64::new(x, 0.0)))
    }
}

/// A terminated cascade in lifted form.
pub struct LinkModel {
    pub elements: Vec<Box<dyn BlockElement>>,
    pub source: TerminationModel,
    pub load: TerminationModel,
    pub p: usize,
}

impl LinkModel {
    pub fn new(elements: Vec<Box<dyn BlockElement>>, source: TerminationModel, load: TerminationModel) -> Result<Self> {
        let p = elements
            .first()
            .ok_or_else(|| Error::InvalidParameter("a link needs at least one element".into()))?
            .block_size();
        if elements.iter().any(|e| e.block_size() != p) {
            return Err(Error::InvalidParameter("link elements differ in block size".into()));
        }
        let link = Self {
            elements,
            source,
            load,
            p,
        };
        if link.memory() >= p {
            return Err(Error::BlockTooSmall { p, l: link.memory() });
        }
        Ok(link)
    }

    /// Memory of the cascade, which sets the number of trailing zeros.
    pub fn cascade_memory(&self) -> usize {
        self.elements.iter().map(|e| e.memory()).sum()
    }

    /// Memory of the cascade plus the longer termination kernel.
    pub fn memory(&self) -> usize {
        self.cascade_memory() + self.source.memory().max(self.load.memory())
    }

    pub fn payload_len(&self) -> usize {
        self.p - self.memory()
    }

    /// Total alignment shift of the cascade, in samples.
    pub fn delay(&self) -> Result<usize> {
        Ok(self.cascade_at(1)?.delay)
    }

    /// Number of blocks after which the whole link repeats.
    pub fn period_blocks(&self) -> usize {
        self.elements
            .iter()
            .map(|e| e.period_blocks())
            .fold(1, |acc, n| acc / gcd(acc, n) * n)
    }

    pub fn cascade_at(&self, i: i64) -> Result<LiftedTwoPort> {
        let at_i = self
            .elements
            .iter()
            .map(|e| e.lifted_at(i))
            .collect::<Result<Vec<_>>>()?;
        let at_prev = self
            .elements
            .iter()
            .map(|e| e.lifted_at(i - 1))
            .collect::<Result<Vec<_>>>()?;
        cascade_chain_ibi(&at_i, &at_prev)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Per-block operators of the trailing-zeros solve.
struct TzOperator {
    xi: QrSolver,
    rhs: CMatrix,
    out_direct: CMatrix,
    out_current: CMatrix,
}

impl TzOperator {
    fn new(x: &LiftedTwoPort, link: &LinkModel) -> Result<Self> {
        let p = link.p;
        let t = link.payload_len();
        let (zs, _) = link.source.lifted(p)?;
        let (zl, _) = link.load.lifted(p)?;
        let cols = |m: &CMatrix| m.columns(0, t).into_owned();
        let (a, b, c, d) = (cols(&x.a0), cols(&x.b0), cols(&x.c0), cols(&x.d0));
        let zs_d = &zs * &d;
        let xi = &zs_d + &b + &zs * (&zl * &c) + &zl * &a;
        let solver = QrSolver::new(&xi).map_err(|e| match e {
            Error::RankDeficient { rank, cols, condition, .. } => Error::RankDeficient {
                rank,
                cols,
                condition,
                hint: "; the termination-weighted matrix Xi is rank deficient",
            },
            other => other,
        })?;
        Ok(Self {
            xi: solver,
            rhs: &d + &zl * &c,
            out_direct: d,
            out_current: zs_d + b,
        })
    }

    fn apply(&self, v: &CVector) -> (CVector, CVector) {
        let i_in = self.xi.solve(&(&self.rhs * v));
        let v_out = &self.out_direct * v - &self.out_current * &i_in;
        (v_out, i_in)
    }
}

#[derive(Clone, Debug)]
pub struct SimulationOutput {
    pub blocks: Vec<CVector>,
    pub input_current: Vec<CVector>,
    /// Largest pivot-ratio condition estimate of any `Ξ` used.
    pub condition_estimate: f64,
}

fn add_noise(blocks: &mut [CVector], noise: Option<&NoiseSpec>, p: usize, first_index: i64) -> Result<()> {
    let Some(noise) = noise else { return Ok(()) };
    noise.validate(p)?;
    let factor = match noise.kind {
        NoiseKind::Covariance(_) => Some(noise.factor(p)?),
        _ => None,
    };
    for (j, b) in blocks.iter_mut().enumerate() {
        *b += noise.block(p, first_index + j as i64, factor.as_ref());
    }
    Ok(())
}

/// Trailing-zeros simulation; payload `j` is block index `j + 1`.
pub fn simulate_tz(link: &LinkModel, payloads: &[CVector], noise: Option<&NoiseSpec>) -> Result<SimulationOutput> {
    let t = link.payload_len();
    let period = link.period_blocks();
    let mut cache: HashMap<usize, TzOperator> = HashMap::new();
    let mut out = SimulationOutput {
        blocks: Vec::with_capacity(payloads.len()),
        input_current: Vec::with_capacity(payloads.len()),
        condition_estimate: 1.0,
    };
    for (j, v) in payloads.iter().enumerate() {
        if v.len() != t {
            return Err(Error::InvalidParameter(format!(
                "payload {j} has {} samples, expected P − L = {t}",
                v.len()
            )));
        }
        let i = j as i64 + 1;
        let key = (i as usize) % period;
        if !cache.contains_key(&key) {
            let op = TzOperator::new(&link.cascade_at(i)?, link)?;
            cache.insert(key, op);
        }
        let op = &cache[&key];
        out.condition_estimate = out.condition_estimate.max(op.xi.condition_estimate());
        let (v_out, i_in) = op.apply(v);
        out.blocks.push(v_out);
        out.input_current.push(i_in);
    }
    add_noise(&mut out.blocks, noise, link.p, 1)?;
    Ok(out)
}

/// Solves the `4P×4P` Kirchhoff system block by block from rest.
pub fn simulate_ibi(link: &LinkModel, blocks: &[CVector], noise: Option<&NoiseSpec>) -> Result<SimulationOutput> {
    let p = link.p;
    let (zs0, zs1) = link.source.lifted(p)?;
    let (zl0, zl1) = link.load.lifted(p)?;
    let id = CMatrix::identity(p, p);
    let mut v_in_prev = CVector::zeros(p);
    let mut i_in_prev = CVector::zeros(p);
    let mut i_out_prev = CVector::zeros(p);
    let mut out = SimulationOutput {
        blocks: Vec::with_capacity(blocks.len()),
        input_current: Vec::with_capacity(blocks.len()),
        condition_estimate: 1.0,
    };
    let period = link.period_blocks();
    let mut systems: HashMap<usize, (CMatrix, LiftedTwoPort)> = HashMap::new();
    for (j, vs) in blocks.iter().enumerate() {
        if vs.len() != p {
            return Err(Error::InvalidParameter(format!(
                "block {j} has {} samples, expected {p}",
                vs.len()
            )));
        }
        let i = j as i64 + 1;
        let key = (i as usize) % period;
        if !systems.contains_key(&key) {
            let x = link.cascade_at(i)?;
            // Unknown order: v_out, i_out, v_in, i_in.
            let mut m = CMatrix::zeros(4 * p, 4 * p);
            m.view_mut((0, 0), (p, p)).copy_from(&id);
            m.view_mut((0, 2 * p), (p, p)).copy_from(&(-&x.d0));
            m.view_mut((0, 3 * p), (p, p)).copy_from(&x.b0);
            m.view_mut((p, p), (p, p)).copy_from(&id);
            m.view_mut((p, 2 * p), (p, p)).copy_from(&x.c0);
            m.view_mut((p, 3 * p), (p, p)).copy_from(&(-&x.a0));
            m.view_mut((2 * p, 2 * p), (p, p)).copy_from(&id);
            m.view_mut((2 * p, 3 * p), (p, p)).copy_from(&zs0);
            m.view_mut((3 * p, 0), (p, p)).copy_from(&id);
            m.view_mut((3 * p, p), (p, p)).copy_from(&(-&zl0));
            systems.insert(key, (m, x));
        }
        let (m, x) = &systems[&key];
        let mut rhs = CVector::zeros(4 * p);
        rhs.rows_mut(0, p)
            .copy_from(&(&x.d1 * &v_in_prev - &x.b1 * &i_in_prev));
        rhs.rows_mut(p, p)
            .copy_from(&(-&x.c1 * &v_in_prev + &x.a1 * &i_in_prev));
        rhs.rows_mut(2 * p, p).copy_from(&(vs - &zs1 * &i_in_prev));
        rhs.rows_mut(3 * p, p).copy_from(&(&zl1 * &i_out_prev));
        let sol = if rhs.iter().all(|&v| v == ZERO) {
            CVector::zeros(4 * p)
        } else {
            solve_square(m, &rhs, IBI_MAX_GROWTH)?
        };
        let v_out = sol.rows(0, p).into_owned();
        i_out_prev = sol.rows(p, p).into_owned();
        v_in_prev = sol.rows(2 * p, p).into_owned();
        i_in_prev = sol.rows(3 * p, p).into_owned();
        out.blocks.push(v_out);
        out.input_current.push(i_in_prev.clone());
    }
    add_noise(&mut out.blocks, noise, p, 1)?;
    Ok(out)
}

/// Frequency-domain transfer function of the same cascade.
pub fn fd_reference(elements: &[TwoPortABCD], term: &Termination) -> Result<SampledSpectrum> {
    transfer_function(&chain_fd(elements)?, term)
}

/// Block response to a unit sample placed `lead` samples into the payload,
/// delayed by `link.delay() + lead`.
pub fn impulse_response_at(link: &LinkModel, lead: usize) -> Result<CVector> {
    let t = link.payload_len();
    if lead >= t {
        return Err(Error::InvalidParameter(format!(
            "impulse lead {lead} must be below the payload length {t}"
        )));
    }
    let mut payload = CVector::zeros(t);
    payload[lead] = C64::new(1.0, 0.0);
    Ok(simulate_tz(link, &[payload], None)?.blocks.remove(0))
}

/// Lead used by [`impulse_response`]: a quarter of the payload.
pub fn default_impulse_lead(link: &LinkModel) -> usize {
    link.payload_len() / 4
}

/// Impulse response with the default lead; returns the block and the lead used.
pub fn impulse_response(link: &LinkModel) -> Result<(CVector, usize)> {
    let lead = default_impulse_lead(link);
    Ok((impulse_response_at(link, lead)?, lead))
}

/// Largest entry of a block stream.
pub fn stream_peak(blocks: &[CVector]) -> f64 {
    blocks
        .iter()
        .map(|b| max_abs(&CMatrix::from_column_slice(b.len(), 1, b.as_slice())))
        .fold(0.0, f64::max)
}
