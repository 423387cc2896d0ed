//! Linear periodically time-varying (LPTV) channels in harmonic form.
//!
//! A kernel with period `T0 = 1/f0` is written as
//! `h[k, l] = Σ_{m=−M}^{M} h_m[l] · e^{j2π m f0 k Ts}`. Each harmonic `h_m` is an
//! ordinary causal FIR kernel; the phases are read from an exact table of the
//! `n = T0/Ts`-th roots of unity, so `Ts` is first nudged to make `n` an integer.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{
    synthesize, synthesize_two_sided, truncate_common, Alignment, DtKernel, RawImpulse, SynthesisConfig,
};
use crate::lifting::{lift_lti, lift_ltv, LiftedPair, TvTaps};
use crate::linalg::{CMatrix, CVector, QrSolver, C64, ONE, ZERO};
use crate::chainrule::LiftedTwoPort;
use crate::simulate::BlockElement;
use crate::twoport::{FrequencyGrid, ImpedanceSpec, SampledSpectrum};

/// Largest relative change of `Ts` accepted to make `T0/Ts` an integer.
pub const MAX_TS_ADJUSTMENT: f64 = 1e-3;

/// Relative truncation error targeted by [`default_harmonic_order`].
pub const DEFAULT_ORDER_TOLERANCE: f64 = 1e-4;

/// Sample clock locked to the period of the variation.
#[derive(Clone, Debug)]
pub struct PeriodicTiming {
    ts: f64,
    f0: f64,
    n: usize,
    table: Arc<Vec<C64>>,
}

impl PartialEq for PeriodicTiming {
    fn eq(&self, other: &Self) -> bool {
        self.ts == other.ts && self.f0 == other.f0 && self.n == other.n
    }
}

fn unit_root(j: usize, n: usize) -> C64 {
    // Quadrant points are set exactly; the rest mirror the first half.
    if j == 0 {
        return ONE;
    }
    if 2 * j == n {
        return C64::new(-1.0, 0.0);
    }
    if 4 * j == n {
        return C64::new(0.0, 1.0);
    }
    if 4 * j == 3 * n {
        return C64::new(0.0, -1.0);
    }
    if 2 * j > n {
        return unit_root(n - j, n).conj();
    }
    let (s, c) = (2.0 * std::f64::consts::PI * j as f64 / n as f64).sin_cos();
    C64::new(c, s)
}

impl PeriodicTiming {
    /// Locks `ts_nominal` to `f0`; fails when more than a 0.1% change is needed.
    pub fn new(ts_nominal: f64, f0: f64) -> Result<Self> {
        if !(ts_nominal.is_finite() && ts_nominal > 0.0) {
            return Err(Error::InvalidParameter("sample interval must be positive".into()));
        }
        if !(f0.is_finite() && f0 > 0.0) {
            return Err(Error::InvalidParameter("fundamental frequency must be positive".into()));
        }
        let ratio = 1.0 / (f0 * ts_nominal);
        let n = ratio.round().max(1.0);
        if n > 1e8 {
            return Err(Error::InvalidParameter(format!(
                "period holds {n:.3e} samples; the phase table would be too large"
            )));
        }
        let ts = 1.0 / (f0 * n);
        let change = (ts - ts_nominal).abs() / ts_nominal;
        if change > MAX_TS_ADJUSTMENT {
            return Err(Error::InvalidParameter(format!(
                "T0/Ts = {ratio:.4} cannot be made integral within 0.1% (needs {:.3}%)",
                100.0 * change
            )));
        }
        let n = n as usize;
        let table = (0..n).map(|j| unit_root(j, n)).collect();
        Ok(Self {
            ts,
            f0,
            n,
            table: Arc::new(table),
        })
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f0
    }

    /// Samples per period, `T0/Ts`.
    pub fn samples_per_period(&self) -> usize {
        self.n
    }

    /// Table index of `e^{j2π m f0 k Ts}`.
    pub fn phase_index(&self, m: i64, k: i64) -> usize {
        ((m as i128 * k as i128).rem_euclid(self.n as i128)) as usize
    }

    /// `e^{j2π m f0 k Ts}`.
    pub fn phase(&self, m: i64, k: i64) -> C64 {
        self.table[self.phase_index(m, k)]
    }

    pub fn phase_at_index(&self, j: usize) -> C64 {
        self.table[j % self.n]
    }

    /// Number of blocks after which lifted matrices repeat: `n / gcd(P, n)`.
    pub fn block_period(&self, p: usize) -> usize {
        self.n / gcd(p, self.n)
    }
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Harmonic kernels `h_m`, `m = −M..=M`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpTvKernel {
    timing: PeriodicTiming,
    harmonics: Vec<DtKernel>,
    /// Alignment shift shared by all harmonics.
    pub delay: usize,
}

impl LpTvKernel {
    /// `harmonics[j]` is `h_{j−M}`; the length must be odd.
    pub fn new(timing: PeriodicTiming, harmonics: Vec<DtKernel>) -> Result<Self> {
        if harmonics.len() % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "expected 2M+1 harmonic kernels, got {}",
                harmonics.len()
            )));
        }
        for h in &harmonics {
            if (h.ts - timing.ts).abs() > 1e-12 * timing.ts {
                return Err(Error::InvalidParameter(format!(
                    "harmonic kernel sampled at {} s but the timing uses {} s",
                    h.ts, timing.ts
                )));
            }
        }
        let delay = harmonics.iter().map(|h| h.delay).max().unwrap_or(0);
        Ok(Self {
            timing,
            harmonics,
            delay,
        })
    }

    /// Time-invariant kernel viewed as an LPTV one of order 0.
    pub fn time_invariant(timing: PeriodicTiming, kernel: DtKernel) -> Result<Self> {
        Self::new(timing, vec![kernel])
    }

    pub fn timing(&self) -> &PeriodicTiming {
        &self.timing
    }

    pub fn order(&self) -> usize {
        self.harmonics.len() / 2
    }

    pub fn harmonic(&self, m: i64) -> Option<&DtKernel> {
        let j = m + self.order() as i64;
        if j < 0 {
            return None;
        }
        self.harmonics.get(j as usize)
    }

    pub fn harmonics(&self) -> impl Iterator<Item = (i64, &DtKernel)> {
        let mm = self.order() as i64;
        self.harmonics.iter().enumerate().map(move |(j, h)| (j as i64 - mm, h))
    }

    pub fn memory(&self) -> usize {
        self.harmonics.iter().map(|h| h.memory()).max().unwrap_or(0)
    }

    pub fn energy(&self) -> f64 {
        self.harmonics.iter().map(|h| h.energy()).sum()
    }

    /// Largest `|h_{−m}[l] − conj(h_m[l])|` relative to the largest tap.
    pub fn conjugate_pairing_error(&self) -> f64 {
        let peak = self
            .harmonics
            .iter()
            .flat_map(|h| h.taps.iter())
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let mm = self.order() as i64;
        let mut worst: f64 = 0.0;
        for m in 1..=mm {
            let (pos, neg) = (self.harmonic(m).unwrap(), self.harmonic(-m).unwrap());
            for l in 0..=pos.memory().max(neg.memory()) {
                worst = worst.max((neg.tap(l) - pos.tap(l).conj()).norm());
            }
        }
        if let Some(h0) = self.harmonic(0) {
            for v in &h0.taps {
                worst = worst.max(v.im.abs());
            }
        }
        worst / peak
    }

    /// The same kernel keeping only harmonics with `|m| ≤ order`.
    pub fn truncated(&self, order: usize) -> Self {
        let mm = self.order();
        let keep = order.min(mm);
        Self {
            timing: self.timing.clone(),
            harmonics: self.harmonics[mm - keep..=mm + keep].to_vec(),
            delay: self.delay,
        }
    }

    /// `h[k, l]` from the harmonic sum, in fixed `m` order.
    pub fn tap_at(&self, k: i64, l: usize) -> C64 {
        let mut acc = ZERO;
        for (m, h) in self.harmonics() {
            let t = h.tap(l);
            if t != ZERO {
                acc += t * self.timing.phase(m, k);
            }
        }
        acc
    }
}

impl TvTaps for LpTvKernel {
    fn memory(&self) -> usize {
        LpTvKernel::memory(self)
    }

    fn tap(&self, k: i64, l: usize) -> C64 {
        self.tap_at(k, l)
    }
}

/// Energy of the harmonics dropped when truncating to `order`:
/// `Σ_{|m|>order} Σ_l |h_m[l]|²`.
pub fn truncation_error(full: &LpTvKernel, order: usize) -> f64 {
    full.harmonics()
        .filter(|(m, _)| m.unsigned_abs() as usize > order)
        .map(|(_, h)| h.energy())
        .sum()
}

/// Smallest order whose truncation error is at most `1e-4` of the total
/// energy, capped at the estimator bound `⌊(P/taps − 1)/2⌋`.
pub fn default_harmonic_order(full: &LpTvKernel, p: usize, taps: usize) -> usize {
    let total = full.energy();
    let cap = if taps == 0 {
        full.order()
    } else {
        ((p / taps).saturating_sub(1)) / 2
    };
    let mut order = 0;
    while order < full.order() && truncation_error(full, order) > DEFAULT_ORDER_TOLERANCE * total {
        order += 1;
    }
    order.min(cap)
}

/// Where a time-varying impedance sits in the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    Shunt,
    Series,
}

/// Shape of the impedance over one period, in units of `t/T0`.
#[derive(Clone, Debug, PartialEq)]
pub enum TvProfile {
    /// `first` on `[0, duty)`, `second` on `[duty, 1)`.
    TwoState {
        first: ImpedanceSpec,
        second: ImpedanceSpec,
        duty: f64,
    },
    /// `R(t) = r_dc + r_ac · cos(2π f0 t + phase)`.
    Cosine { r_dc: f64, r_ac: f64, phase: f64 },
    /// Equal-length segments covering the period.
    Piecewise(Vec<ImpedanceSpec>),
}

/// A periodically switching or modulated one-port.
#[derive(Clone, Debug, PartialEq)]
pub struct TvImpedance {
    pub profile: TvProfile,
    pub placement: Placement,
    pub f0: f64,
}

/// Samples per period for the harmonic DFT of smooth profiles.
pub fn period_samples(order: usize) -> usize {
    64.max(8 * (2 * order + 1))
}

fn segment_coefficient(m: i64, a: f64, b: f64) -> C64 {
    if m == 0 {
        return C64::new(b - a, 0.0);
    }
    let w = -2.0 * std::f64::consts::PI * m as f64;
    let ea = C64::from_polar(1.0, w * a);
    let eb = C64::from_polar(1.0, w * b);
    (eb - ea) / C64::new(0.0, w)
}

impl TvImpedance {
    pub fn new(profile: TvProfile, placement: Placement, f0: f64) -> Result<Self> {
        let z = Self {
            profile,
            placement,
            f0,
        };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return Err(Error::InvalidParameter("fundamental frequency must be positive".into()));
        }
        match &self.profile {
            TvProfile::TwoState { first, second, duty } => {
                if !(*duty > 0.0 && *duty < 1.0) {
                    return Err(Error::InvalidParameter(format!("duty {duty} must lie in (0, 1)")));
                }
                first.validate()?;
                second.validate()
            }
            TvProfile::Cosine { r_dc, r_ac, phase } => {
                if !(r_dc.is_finite() && r_ac.is_finite() && phase.is_finite()) {
                    return Err(Error::InvalidParameter("cosine profile must be finite".into()));
                }
                if r_ac.abs() > *r_dc {
                    return Err(Error::InvalidParameter(format!(
                        "R(t) = {r_dc} + {r_ac} cos(.) goes negative, which is not passive"
                    )));
                }
                Ok(())
            }
            TvProfile::Piecewise(segs) => {
                if segs.is_empty() {
                    return Err(Error::InvalidParameter("piecewise profile has no segments".into()));
                }
                segs.iter().try_for_each(|s| s.validate())
            }
        }
    }

    fn segments(&self) -> Vec<(f64, f64, &ImpedanceSpec)> {
        match &self.profile {
            TvProfile::TwoState { first, second, duty } => vec![(0.0, *duty, first), (*duty, 1.0, second)],
            TvProfile::Piecewise(segs) => {
                let q = segs.len() as f64;
                segs.iter()
                    .enumerate()
                    .map(|(j, s)| (j as f64 / q, (j + 1) as f64 / q, s))
                    .collect()
            }
            TvProfile::Cosine { .. } => Vec::new(),
        }
    }

    /// `Z(t, f)` at bin `k`; `None` means infinite.
    pub fn impedance_at(&self, t: f64, grid: &FrequencyGrid, k: usize) -> Result<Option<C64>> {
        let frac = (t * self.f0).rem_euclid(1.0);
        match &self.profile {
            TvProfile::Cosine { r_dc, r_ac, phase } => {
                let r = r_dc + r_ac * (2.0 * std::f64::consts::PI * frac + phase).cos();
                Ok(Some(C64::new(r, 0.0)))
            }
            _ => {
                let segs = self.segments();
                let seg = segs
                    .iter()
                    .find(|(a, b, _)| frac >= *a && frac < *b)
                    .unwrap_or_else(|| segs.last().unwrap());
                seg.2.impedance(grid, k)
            }
        }
    }

    /// Fourier coefficients over the period, `m = −M..=M`, of `Z(t, f)` for a
    /// series element or `1/Z(t, f)` for a shunt one.
    pub fn harmonic_spectra(&self, grid: &FrequencyGrid, order: usize) -> Result<Vec<SampledSpectrum>> {
        self.validate()?;
        let mm = order as i64;
        let nh = 2 * order + 1;
        let nbins = grid.n_points();
        let mut out = vec![vec![ZERO; nbins]; nh];
        match &self.profile {
            TvProfile::Cosine { r_dc, r_ac, phase } => {
                let q = period_samples(order);
                let samples: Vec<C64> = (0..q)
                    .map(|j| {
                        let r = r_dc + r_ac * (2.0 * std::f64::consts::PI * j as f64 / q as f64 + phase).cos();
                        match self.placement {
                            Placement::Series => Ok(C64::new(r, 0.0)),
                            Placement::Shunt if r == 0.0 => Err(Error::SingularBin {
                                what: "admittance of the time-varying shunt",
                                bin: 0,
                                freq_hz: 0.0,
                            }),
                            Placement::Shunt => Ok(C64::new(1.0 / r, 0.0)),
                        }
                    })
                    .collect::<Result<_>>()?;
                for m in -mm..=mm {
                    let mut acc = ZERO;
                    for (j, s) in samples.iter().enumerate() {
                        let idx = ((-m * j as i64).rem_euclid(q as i64)) as usize;
                        acc += s * unit_root(idx, q);
                    }
                    let c = acc / q as f64;
                    out[(m + mm) as usize].iter_mut().for_each(|v| *v = c);
                }
            }
            _ => {
                let segs = self.segments();
                let coeffs: Vec<Vec<C64>> = segs
                    .iter()
                    .map(|(a, b, _)| (-mm..=mm).map(|m| segment_coefficient(m, *a, *b)).collect())
                    .collect();
                for k in 0..nbins {
                    for (s, (_, _, spec)) in segs.iter().enumerate() {
                        let value = match self.placement {
                            Placement::Series => spec.impedance(grid, k)?.ok_or(Error::SingularBin {
                                what: "impedance of the time-varying series element",
                                bin: k,
                                freq_hz: grid.freq(k),
                            })?,
                            Placement::Shunt => spec.admittance(grid, k)?.ok_or(Error::SingularBin {
                                what: "admittance of the time-varying shunt",
                                bin: k,
                                freq_hz: grid.freq(k),
                            })?,
                        };
                        for (j, c) in coeffs[s].iter().enumerate() {
                            out[j][k] += value * c;
                        }
                    }
                }
            }
        }
        out.into_iter().map(|v| SampledSpectrum::new(*grid, v)).collect()
    }
}

fn check_timing(z: &TvImpedance, timing: &PeriodicTiming, cfg: &SynthesisConfig) -> Result<()> {
    if (z.f0 - timing.f0).abs() > 1e-12 * timing.f0 {
        return Err(Error::InvalidParameter(format!(
            "impedance varies at {} Hz but the timing is locked to {} Hz",
            z.f0, timing.f0
        )));
    }
    if (cfg.ts - timing.ts).abs() > 1e-12 * timing.ts {
        return Err(Error::InvalidParameter(format!(
            "synthesis Ts {} s differs from the period-locked Ts {} s",
            cfg.ts, timing.ts
        )));
    }
    Ok(())
}

fn harmonic_raws(z: &TvImpedance, grid: &FrequencyGrid, cfg: &SynthesisConfig, order: usize) -> Result<Vec<RawImpulse>> {
    let spectra = z.harmonic_spectra(grid, order)?;
    let nh = spectra.len();
    (0..nh)
        .map(|j| synthesize_two_sided(&spectra[j], &spectra[nh - 1 - j], cfg))
        .collect()
}

/// Harmonic kernels of a time-varying impedance: `b_m` for series placement,
/// `c_m` (from `1/Z`) for shunt placement.
pub fn harmonic_responses(
    z: &TvImpedance,
    timing: &PeriodicTiming,
    grid: &FrequencyGrid,
    cfg: &SynthesisConfig,
    order: usize,
) -> Result<LpTvKernel> {
    check_timing(z, timing, cfg)?;
    let raws = harmonic_raws(z, grid, cfg, order)?;
    let (kernels, _) = truncate_common(&raws, cfg)?;
    LpTvKernel::new(timing.clone(), kernels)
}

/// Diagonal phase operators `Ω_m = diag(e^{j2π m f0 k Ts})`, `k = 0..P`.
#[derive(Clone, Debug)]
pub struct ZadehBlockOperators {
    timing: PeriodicTiming,
    p: usize,
}

impl ZadehBlockOperators {
    pub fn new(timing: PeriodicTiming, p: usize) -> Self {
        Self { timing, p }
    }

    pub fn block_size(&self) -> usize {
        self.p
    }

    /// Table indices of the diagonal of `Ω_m`.
    pub fn indices(&self, m: i64) -> Vec<usize> {
        (0..self.p as i64).map(|k| self.timing.phase_index(m, k)).collect()
    }

    /// Indices of the product `Ω_a Ω_b`, formed by adding phases modulo `n`.
    pub fn compose_indices(&self, a: &[usize], b: &[usize]) -> Vec<usize> {
        let n = self.timing.n;
        a.iter().zip(b).map(|(x, y)| (x + y) % n).collect()
    }

    pub fn omega(&self, m: i64) -> CMatrix {
        let d: Vec<C64> = self.indices(m).into_iter().map(|j| self.timing.phase_at_index(j)).collect();
        CMatrix::from_diagonal(&CVector::from_vec(d))
    }

    /// `e^{j2π m f0 i P Ts}`.
    pub fn block_phase(&self, m: i64, i: i64) -> C64 {
        self.timing.phase(m, i * self.p as i64)
    }
}

/// Output of the harmonic filter bank:
/// `y[k] = Σ_m e^{j2π m f0 k Ts} (h_m ∗ x)[k]`, with `x[0]` at time 0.
/// The input is consumed in blocks of `p` samples carrying the last `L`
/// samples of history across block boundaries.
pub fn zadeh_apply(kernel: &LpTvKernel, input: &[C64], p: usize) -> Result<Vec<C64>> {
    let l = kernel.memory();
    if p <= l {
        return Err(Error::BlockTooSmall { p, l });
    }
    let timing = &kernel.timing;
    let mut out = Vec::with_capacity(input.len());
    let mut history = vec![ZERO; l];
    for (bi, block) in input.chunks(p).enumerate() {
        let mut ext = history.clone();
        ext.extend_from_slice(block);
        let mut y = vec![ZERO; block.len()];
        for (m, h) in kernel.harmonics() {
            if h.is_zero() {
                continue;
            }
            for (k, slot) in y.iter_mut().enumerate() {
                let mut acc = ZERO;
                for (lag, &t) in h.taps.iter().enumerate() {
                    acc += t * ext[l + k - lag];
                }
                *slot += acc * timing.phase(m, (bi * p + k) as i64);
            }
        }
        out.extend(y);
        let keep = ext.len() - l;
        history = ext[keep..].to_vec();
    }
    Ok(out)
}

/// `H_{i,0}`, `H_{i,1}` of the LPTV kernel at block index `i`.
pub fn lifted_lptv(kernel: &LpTvKernel, p: usize, i: i64) -> Result<LiftedPair> {
    lift_ltv(kernel, p, i)
}

/// Harmonic kernels of `z` and the filtered through path, sharing one shift.
pub fn synthesize_tv_parts(
    z: &TvImpedance,
    timing: &PeriodicTiming,
    grid: &FrequencyGrid,
    cfg: &SynthesisConfig,
    order: usize,
) -> Result<(LpTvKernel, DtKernel)> {
    check_timing(z, timing, cfg)?;
    let mut raws = harmonic_raws(z, grid, cfg, order)?;
    raws.push(synthesize(&SampledSpectrum::constant(*grid, ONE), cfg)?);
    let (mut kernels, shift) = truncate_common(&raws, cfg)?;
    let through = kernels.pop().unwrap();
    let mut kernel = LpTvKernel::new(timing.clone(), kernels)?;
    kernel.delay = shift;
    Ok((kernel, through))
}

/// A time-varying shunt or series impedance as a two-port with its
/// filtered through path.
#[derive(Clone, Debug)]
pub struct LptvElement {
    pub kernel: LpTvKernel,
    /// Filtered unit kernel used for `A` and `D`.
    pub through: DtKernel,
    pub placement: Placement,
    p: usize,
    period: usize,
    memory: usize,
}

impl LptvElement {
    pub fn new(kernel: LpTvKernel, through: DtKernel, placement: Placement, p: usize) -> Result<Self> {
        let memory = kernel.memory().max(through.memory());
        if p <= memory {
            return Err(Error::BlockTooSmall { p, l: memory });
        }
        let period = kernel.timing.block_period(p);
        Ok(Self {
            kernel,
            through,
            placement,
            p,
            period,
            memory,
        })
    }

    /// Synthesizes the harmonic kernels and the through path with one shift.
    pub fn synthesize(
        z: &TvImpedance,
        timing: &PeriodicTiming,
        grid: &FrequencyGrid,
        cfg: &SynthesisConfig,
        order: usize,
        p: usize,
    ) -> Result<Self> {
        let (kernel, through) = synthesize_tv_parts(z, timing, grid, cfg, order)?;
        Self::new(kernel, through, z.placement, p)
    }

    /// Unfiltered element: the harmonic kernels are taken as given and the
    /// through path is a unit sample.
    pub fn direct(kernel: LpTvKernel, placement: Placement, p: usize) -> Result<Self> {
        let ts = kernel.timing.ts;
        Self::new(kernel, DtKernel::delta(ts), placement, p)
    }
}

impl BlockElement for LptvElement {
    fn lifted_at(&self, i: i64) -> Result<LiftedTwoPort> {
        let through = lift_lti(&self.through, self.p)?;
        let varying = lifted_lptv(&self.kernel, self.p, i)?;
        let zero = LiftedPair::zeros(self.p, 0);
        let (b, c) = match self.placement {
            Placement::Series => (varying, zero),
            Placement::Shunt => (zero, varying),
        };
        let mut x = LiftedTwoPort::from_pairs(through.clone(), b, c, through, self.kernel.delay)?;
        x.block_index = i;
        Ok(x)
    }

    fn block_size(&self) -> usize {
        self.p
    }

    fn memory(&self) -> usize {
        self.memory
    }

    fn period_blocks(&self) -> usize {
        self.period
    }
}

/// Sizes and phase reference for [`estimate_harmonics`].
#[derive(Clone, Debug)]
pub struct EstimatorConfig {
    pub timing: PeriodicTiming,
    /// Harmonic order `M`.
    pub order: usize,
    /// Taps per harmonic (memory + 1).
    pub taps: usize,
    /// Block index of the first observation.
    pub first_block: i64,
}

#[derive(Clone, Debug)]
pub struct HarmonicEstimate {
    pub kernel: LpTvKernel,
    /// Mean squared residual per observed sample.
    pub residual_mse: f64,
    pub condition_estimate: f64,
    /// `trace((Ψ^H R_n^{-1} Ψ)^{-1})` when a noise covariance was supplied.
    pub noise_floor_mse: Option<f64>,
}

/// `P×taps` Toeplitz matrix with first column `v` and first row `(v[0], 0, …)`.
pub fn toeplitz_regressor(v: &CVector, taps: usize) -> CMatrix {
    let p = v.len();
    CMatrix::from_fn(p, taps, |k, l| if k >= l { v[k - l] } else { ZERO })
}

/// Per-block regressor `Ψ_i = [e^{j2π m f0 iPTs} Ω_m Φ(v[i])]_{m=−M..M}`.
pub fn block_regressor(v: &CVector, cfg: &EstimatorConfig, i: i64) -> CMatrix {
    let p = v.len();
    let taps = cfg.taps;
    let mm = cfg.order as i64;
    let phi = toeplitz_regressor(v, taps);
    let mut psi = CMatrix::zeros(p, (2 * cfg.order + 1) * taps);
    let base = i * p as i64;
    for m in -mm..=mm {
        let col0 = (m + mm) as usize * taps;
        for k in 0..p {
            let w = cfg.timing.phase(m, base + k as i64);
            for l in 0..taps.min(k + 1) {
                psi[(k, col0 + l)] = w * phi[(k, l)];
            }
        }
    }
    psi
}

/// Least-squares estimate of the harmonic taps from blocks sent with trailing
/// zeros. `inputs[j]` holds at most `P − taps + 1` payload samples and
/// `outputs[j]` the `P` received samples of block `first_block + j`. With a
/// noise covariance `R_n` (`P×P`, Hermitian positive definite) the problem is
/// whitened first.
pub fn estimate_harmonics(
    inputs: &[CVector],
    outputs: &[CVector],
    cfg: &EstimatorConfig,
    noise_cov: Option<&CMatrix>,
) -> Result<HarmonicEstimate> {
    if inputs.is_empty() || inputs.len() != outputs.len() {
        return Err(Error::InvalidParameter(format!(
            "need matching, nonempty input and output block lists (got {} and {})",
            inputs.len(),
            outputs.len()
        )));
    }
    if cfg.taps == 0 {
        return Err(Error::InvalidParameter("at least one tap per harmonic is required".into()));
    }
    let p = outputs[0].len();
    let required = (2 * cfg.order + 1) * cfg.taps;
    if p < required {
        return Err(Error::Underdetermined { p, required });
    }
    let payload_max = p + 1 - cfg.taps;
    for (j, (v, y)) in inputs.iter().zip(outputs).enumerate() {
        if y.len() != p {
            return Err(Error::InvalidParameter(format!("output block {j} has {} samples, expected {p}", y.len())));
        }
        if v.len() > payload_max {
            return Err(Error::InvalidParameter(format!(
                "input block {j} has {} samples; at most {payload_max} fit before the trailing zeros",
                v.len()
            )));
        }
    }
    let whitener = match noise_cov {
        None => None,
        Some(r) => {
            if r.shape() != (p, p) {
                return Err(Error::InvalidParameter(format!(
                    "noise covariance is {}x{}, expected {p}x{p}",
                    r.nrows(),
                    r.ncols()
                )));
            }
            Some(
                r.clone()
                    .cholesky()
                    .ok_or_else(|| Error::InvalidParameter("noise covariance is not positive definite".into()))?
                    .l(),
            )
        }
    };

    let unknowns = required;
    let rows = p * inputs.len();
    let mut psi_all = CMatrix::zeros(rows, unknowns);
    let mut y_all = CVector::zeros(rows);
    let mut psi_raw = CMatrix::zeros(rows, unknowns);
    let mut y_raw = CVector::zeros(rows);
    for (j, (v, y)) in inputs.iter().zip(outputs).enumerate() {
        let mut padded = CVector::zeros(p);
        padded.rows_mut(0, v.len()).copy_from(v);
        let psi = block_regressor(&padded, cfg, cfg.first_block + j as i64);
        psi_raw.view_mut((j * p, 0), (p, unknowns)).copy_from(&psi);
        y_raw.rows_mut(j * p, p).copy_from(y);
        let (psi_w, y_w) = match &whitener {
            None => (psi, y.clone()),
            Some(l) => (
                l.solve_lower_triangular(&psi).unwrap(),
                l.solve_lower_triangular(y).unwrap(),
            ),
        };
        psi_all.view_mut((j * p, 0), (p, unknowns)).copy_from(&psi_w);
        y_all.rows_mut(j * p, p).copy_from(&y_w);
    }
    let solver = QrSolver::new(&psi_all).map_err(|e| match e {
        Error::RankDeficient { rank, cols, condition, .. } => Error::RankDeficient {
            rank,
            cols,
            condition,
            hint: "; supply more blocks or inputs that excite every harmonic",
        },
        other => other,
    })?;
    let h = solver.solve(&y_all);
    let residual = &y_raw - &psi_raw * &h;
    let residual_mse = residual.norm_squared() / rows as f64;
    let noise_floor_mse = whitener.as_ref().map(|_| {
        let r = solver.r();
        let n = r.ncols();
        let inv = r
            .solve_upper_triangular(&CMatrix::identity(n, n))
            .expect("factor checked for full rank");
        inv.norm_squared()
    });
    let ts = cfg.timing.ts;
    let harmonics = (0..2 * cfg.order + 1)
        .map(|j| DtKernel::from_taps(h.rows(j * cfg.taps, cfg.taps).iter().cloned().collect(), ts))
        .collect();
    Ok(HarmonicEstimate {
        kernel: LpTvKernel::new(cfg.timing.clone(), harmonics)?,
        residual_mse,
        condition_estimate: solver.condition_estimate(),
        noise_floor_mse,
    })
}

/// Spectrum of `H_{i,0}[k, n]` across block index `i = 0..count`, as
/// `(frequency in Hz, energy)` pairs on the DFT grid of the block rate.
pub fn block_doppler_spectrum(kernel: &LpTvKernel, p: usize, k: usize, n: usize, count: usize) -> Result<Vec<(f64, f64)>> {
    let series: Vec<C64> = (0..count as i64)
        .map(|i| lifted_lptv(kernel, p, i).map(|x| x.h0[(k, n)]))
        .collect::<Result<_>>()?;
    let block_rate = 1.0 / (p as f64 * kernel.timing.ts);
    let mut out = Vec::with_capacity(count);
    for q in 0..count {
        let mut acc = ZERO;
        for (i, v) in series.iter().enumerate() {
            acc += v * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (q * i) as f64 / count as f64);
        }
        out.push((q as f64 * block_rate / count as f64, acc.norm_sqr()));
    }
    Ok(out)
}

/// Real-valued noise covariance helper for [`estimate_harmonics`].
pub fn complex_covariance(r: &DMatrix<f64>) -> CMatrix {
    r.map(|v| C64::new(v, 0.0))
}

/// Filtered unit kernel with the given fixed shift, as used for the through
/// path of shunt and series elements.
pub fn through_kernel(grid: &FrequencyGrid, cfg: &SynthesisConfig, shift: usize) -> Result<DtKernel> {
    let cfg = cfg.with_alignment(Alignment::Fixed(shift));
    let raw = synthesize(&SampledSpectrum::constant(*grid, ONE), &cfg)?;
    raw.truncate(shift, cfg.energy_threshold)
}
