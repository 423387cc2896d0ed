//! Discrete-time FIR kernels synthesized from frequency-domain spectra.
//!
//! A spectrum `S(f)` is weighted by the transmit and receive filter responses,
//! extended to negative frequencies by conjugate symmetry (or shifted by a
//! carrier), inverse transformed with a `1/N` normalization (the kernel's DTFT
//! then reproduces the weighted spectrum), circularly shifted to a
//! causal support and truncated at the smallest memory reaching an energy
//! threshold.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{energy, C64, ONE, ZERO};
use crate::twoport::{transfer_function, FrequencyGrid, SampledSpectrum, Termination, TwoPortABCD};

/// Largest inverse-DFT length the adaptive synthesis will try.
pub const MAX_FFT_LEN: usize = 1 << 22;
/// Edge-of-span magnitude, relative to the peak, above which the span is doubled.
pub const TAIL_TOLERANCE: f64 = 1e-6;

const MAX_EFFECTIVE_THRESHOLD: f64 = 1.0 - 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterKind {
    RaisedCosine,
    Brickwall,
    None,
}

/// A real, even, zero-phase filter response.
///
/// `bandwidth` is the half-amplitude frequency of the raised cosine (support
/// edge `bandwidth·(1 + rolloff)`) and the cutoff of the brickwall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec {
    pub kind: FilterKind,
    pub rolloff: f64,
    pub bandwidth: f64,
}

impl FilterSpec {
    pub fn none() -> Self {
        Self {
            kind: FilterKind::None,
            rolloff: 0.0,
            bandwidth: f64::INFINITY,
        }
    }

    pub fn raised_cosine(bandwidth: f64, rolloff: f64) -> Self {
        Self {
            kind: FilterKind::RaisedCosine,
            rolloff,
            bandwidth,
        }
    }

    pub fn brickwall(bandwidth: f64) -> Self {
        Self {
            kind: FilterKind::Brickwall,
            rolloff: 0.0,
            bandwidth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            FilterKind::None => Ok(()),
            _ if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) => Err(Error::InvalidParameter(
                format!("filter bandwidth must be positive, got {}", self.bandwidth),
            )),
            _ if !(0.0..=1.0).contains(&self.rolloff) => Err(Error::InvalidParameter(format!(
                "rolloff must lie in [0, 1], got {}",
                self.rolloff
            ))),
            _ => Ok(()),
        }
    }

    pub fn response(&self, f: f64) -> f64 {
        let f = f.abs();
        match self.kind {
            FilterKind::None => 1.0,
            FilterKind::Brickwall => {
                if f <= self.bandwidth {
                    1.0
                } else {
                    0.0
                }
            }
            FilterKind::RaisedCosine => {
                let lo = self.bandwidth * (1.0 - self.rolloff);
                let hi = self.bandwidth * (1.0 + self.rolloff);
                if f <= lo {
                    1.0
                } else if f >= hi {
                    0.0
                } else {
                    0.5 * (1.0 + (PI * (f - lo) / (2.0 * self.rolloff * self.bandwidth)).cos())
                }
            }
        }
    }

    /// Highest frequency with nonzero response.
    pub fn support_edge(&self) -> f64 {
        match self.kind {
            FilterKind::None => f64::INFINITY,
            FilterKind::Brickwall => self.bandwidth,
            FilterKind::RaisedCosine => self.bandwidth * (1.0 + self.rolloff),
        }
    }

    /// Highest frequency with unit response.
    pub fn passband_edge(&self) -> f64 {
        match self.kind {
            FilterKind::None => f64::INFINITY,
            FilterKind::Brickwall => self.bandwidth,
            FilterKind::RaisedCosine => self.bandwidth * (1.0 - self.rolloff),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alignment {
    /// Smallest circular shift whose discarded precursor holds at most a
    /// tenth of the energy the truncation is allowed to lose.
    Auto,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthesisConfig {
    pub ts: f64,
    pub transmit: FilterSpec,
    pub receive: FilterSpec,
    pub energy_threshold: f64,
    pub alignment: Alignment,
    pub carrier_hz: f64,
}

impl SynthesisConfig {
    /// Identical transmit and receive filters, automatic alignment, baseband.
    pub fn new(ts: f64, filter: FilterSpec, energy_threshold: f64) -> Self {
        Self {
            ts,
            transmit: filter,
            receive: filter,
            energy_threshold,
            alignment: Alignment::Auto,
            carrier_hz: 0.0,
        }
    }

    pub fn with_alignment(mut self, alignment: Alignment) -> Self {
        self.alignment = alignment;
        self
    }

    pub fn with_threshold(mut self, energy_threshold: f64) -> Self {
        self.energy_threshold = energy_threshold;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ts.is_finite() && self.ts > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample interval must be positive, got {}",
                self.ts
            )));
        }
        if !(self.energy_threshold > 0.0 && self.energy_threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "energy threshold must lie in (0, 1], got {}",
                self.energy_threshold
            )));
        }
        if !self.carrier_hz.is_finite() {
            return Err(Error::InvalidParameter("carrier must be finite".into()));
        }
        self.transmit.validate()?;
        self.receive.validate()
    }

    pub fn filter_response(&self, f: f64) -> f64 {
        self.transmit.response(f) * self.receive.response(f)
    }

    pub fn unfiltered(&self) -> bool {
        self.transmit.kind == FilterKind::None && self.receive.kind == FilterKind::None
    }

    pub fn support_edge(&self) -> f64 {
        self.transmit.support_edge().min(self.receive.support_edge())
    }

    pub fn passband_edge(&self) -> f64 {
        self.transmit.passband_edge().min(self.receive.passband_edge())
    }

    /// The single-sided grid matching an inverse DFT of length `n_fft`.
    pub fn grid(&self, n_fft: usize) -> Result<FrequencyGrid> {
        if self.carrier_hz == 0.0 {
            return FrequencyGrid::for_sampling(self.ts, n_fft);
        }
        let df = 1.0 / (n_fft as f64 * self.ts);
        let top = self.carrier_hz.abs() + (n_fft / 2 + 1) as f64 * df;
        FrequencyGrid::new((top / df).ceil() as usize + 1, df)
    }
}

/// A finite-memory causal kernel `h[0..=L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DtKernel {
    pub taps: Vec<C64>,
    pub ts: f64,
    /// Fraction of the pre-truncation energy kept in `taps`.
    pub energy_captured: f64,
    /// Circular shift applied before truncation; `taps[delay]` is time zero of
    /// the unshifted response.
    pub delay: usize,
    /// Fraction of the energy discarded before index 0.
    pub precursor_energy: f64,
}

impl DtKernel {
    pub fn from_taps(taps: Vec<C64>, ts: f64) -> Self {
        assert!(!taps.is_empty(), "a kernel has at least one tap");
        Self {
            taps,
            ts,
            energy_captured: 1.0,
            delay: 0,
            precursor_energy: 0.0,
        }
    }

    pub fn from_real(taps: &[f64], ts: f64) -> Self {
        Self::from_taps(taps.iter().map(|&t| C64::new(t, 0.0)).collect(), ts)
    }

    pub fn scaled_delta(k: C64, ts: f64) -> Self {
        Self::from_taps(vec![k], ts)
    }

    pub fn delta(ts: f64) -> Self {
        Self::scaled_delta(ONE, ts)
    }

    pub fn zero(ts: f64) -> Self {
        Self::scaled_delta(ZERO, ts)
    }

    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn energy(&self) -> f64 {
        energy(&self.taps)
    }

    pub fn tap(&self, l: usize) -> C64 {
        self.taps.get(l).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.taps.iter().all(|&t| t == ZERO)
    }

    /// DTFT at `f` Hz.
    pub fn frequency_response(&self, f: f64) -> C64 {
        let w = -2.0 * PI * f * self.ts;
        self.taps
            .iter()
            .enumerate()
            .map(|(l, &t)| t * C64::from_polar(1.0, w * l as f64))
            .sum()
    }

    /// Removes trailing exact zeros beyond index 0.
    pub fn trimmed(mut self) -> Self {
        while self.taps.len() > 1 && *self.taps.last().unwrap() == ZERO {
            self.taps.pop();
        }
        self
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut k = self.clone();
        k.taps.iter_mut().for_each(|t| *t *= s);
        k
    }

    /// Linear convolution with another kernel on the same sample interval.
    pub fn convolve(&self, other: &DtKernel) -> DtKernel {
        let mut taps = vec![ZERO; self.taps.len() + other.taps.len() - 1];
        for (i, &a) in self.taps.iter().enumerate() {
            for (j, &b) in other.taps.iter().enumerate() {
                taps[i + j] += a * b;
            }
        }
        DtKernel::from_taps(taps, self.ts)
    }
}

/// Un-truncated inverse-DFT output of a filtered spectrum.
#[derive(Clone, Debug)]
pub struct RawImpulse {
    /// Circular samples; index `n` is time `n·Ts` for `n < N/2` and `(n−N)·Ts` above.
    pub samples: Vec<C64>,
    pub ts: f64,
    /// `Σ|x|²` over all samples.
    pub energy: f64,
    /// `Σ|X|²/N` over the two-sided filtered spectrum.
    pub spectrum_energy: f64,
    /// Largest magnitude near the wraparound point, relative to the peak.
    pub tail_ratio: f64,
}

impl RawImpulse {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples reordered to run from time `−⌊N/2⌋` to `⌈N/2⌉ − 1`.
    fn time_ordered(&self) -> (Vec<C64>, usize) {
        let n = self.samples.len();
        let half = n / 2;
        let z = (0..n).map(|j| self.samples[(j + n - half) % n]).collect();
        (z, half)
    }

    fn precursor(&self, z: &[C64], origin: usize, shift: usize) -> f64 {
        energy(&z[..origin - shift.min(origin)])
    }

    /// Shift chosen by [`Alignment::Auto`] for `threshold`.
    pub fn auto_shift(&self, threshold: f64) -> usize {
        if self.energy == 0.0 {
            return 0;
        }
        let thr = threshold.min(MAX_EFFECTIVE_THRESHOLD);
        let budget = 0.1 * (1.0 - thr) * self.energy;
        let (z, origin) = self.time_ordered();
        let mut pre = energy(&z[..origin]);
        let mut s = 0;
        while pre > budget && s < origin {
            s += 1;
            pre -= z[origin - s].norm_sqr();
            if pre < 0.0 {
                pre = 0.0;
            }
        }
        s
    }

    /// Causal kernel obtained with circular shift `shift`, truncated at the
    /// smallest memory capturing `threshold` of the energy.
    pub fn truncate(&self, shift: usize, threshold: f64) -> Result<DtKernel> {
        if self.energy == 0.0 {
            let mut k = DtKernel::zero(self.ts);
            k.delay = shift;
            return Ok(k);
        }
        let thr = threshold.min(MAX_EFFECTIVE_THRESHOLD);
        let (z, origin) = self.time_ordered();
        let shift = shift.min(origin);
        let start = origin - shift;
        let precursor = self.precursor(&z, origin, shift) / self.energy;
        let target = thr * self.energy;
        let mut acc = 0.0;
        for (l, v) in z[start..].iter().enumerate() {
            acc += v.norm_sqr();
            if acc >= target {
                return Ok(DtKernel {
                    taps: z[start..=start + l].to_vec(),
                    ts: self.ts,
                    energy_captured: acc / self.energy,
                    delay: shift,
                    precursor_energy: precursor,
                });
            }
        }
        Err(Error::Truncation {
            threshold,
            precursor,
        })
    }
}

fn fft_len(grid: &FrequencyGrid, ts: f64) -> Result<usize> {
    let exact = 1.0 / (grid.delta_f() * ts);
    let n = exact.round();
    if n < 2.0 || (exact - n).abs() > 1e-6 * n {
        return Err(Error::InvalidParameter(format!(
            "grid spacing {} Hz and Ts {} s do not define an integer DFT length",
            grid.delta_f(),
            ts
        )));
    }
    Ok(n as usize)
}

/// Filtered, conjugate-extended (or carrier-shifted) inverse DFT of a spectrum.
pub fn synthesize(spectrum: &SampledSpectrum, cfg: &SynthesisConfig) -> Result<RawImpulse> {
    synthesize_sides(spectrum, None, cfg)
}

/// Inverse DFT of a spectrum that is not conjugate symmetric.
///
/// Positive frequencies read `positive`; the value at `−f` is `conj(mirror(f))`.
/// A harmonic kernel `h_m` of a real periodically varying channel uses
/// `positive = H_m` and `mirror = H_{−m}`. The result is complex.
pub fn synthesize_two_sided(
    positive: &SampledSpectrum,
    mirror: &SampledSpectrum,
    cfg: &SynthesisConfig,
) -> Result<RawImpulse> {
    positive.grid().check(mirror.grid())?;
    synthesize_sides(positive, Some(mirror), cfg)
}

fn synthesize_sides(
    spectrum: &SampledSpectrum,
    mirror: Option<&SampledSpectrum>,
    cfg: &SynthesisConfig,
) -> Result<RawImpulse> {
    cfg.validate()?;
    let grid = *spectrum.grid();
    let real_output = cfg.carrier_hz == 0.0 && mirror.is_none();
    let negative = mirror.map_or(spectrum.values(), |m| m.values());
    let n = fft_len(&grid, cfg.ts)?;
    let df = grid.delta_f();
    let values = spectrum.values();
    let baseband = cfg.carrier_hz == 0.0;
    let nyquist_bin = n / 2;

    if baseband && (grid.n_points() - 1) > nyquist_bin {
        return Err(Error::InvalidParameter(format!(
            "grid reaches {} Hz, beyond the Nyquist frequency {} Hz of Ts",
            grid.f_max(),
            nyquist_bin as f64 * df
        )));
    }
    let carrier_bins = if baseband {
        0
    } else {
        let c = cfg.carrier_hz / df;
        if (c - c.round()).abs() > 1e-6 {
            return Err(Error::InvalidParameter(format!(
                "carrier {} Hz is not a multiple of the grid spacing {} Hz",
                cfg.carrier_hz, df
            )));
        }
        c.round() as i64
    };

    let mut buf = vec![ZERO; n];
    for (k, slot) in buf.iter_mut().enumerate() {
        let m = if baseband {
            if k <= nyquist_bin {
                k as i64
            } else {
                k as i64 - n as i64
            }
        } else if k < n.div_ceil(2) {
            k as i64
        } else {
            k as i64 - n as i64
        };
        let weight = cfg.filter_response(m as f64 * df);
        if weight == 0.0 {
            continue;
        }
        let j = m + carrier_bins;
        let idx = j.unsigned_abs() as usize;
        if idx >= values.len() {
            return Err(Error::InvalidParameter(format!(
                "filters pass {} Hz but the grid stops at {} Hz",
                m as f64 * df + cfg.carrier_hz,
                grid.f_max()
            )));
        }
        let s = if j >= 0 { values[idx] } else { negative[idx].conj() };
        if !s.is_finite() {
            return Err(Error::Overflow {
                what: "spectrum",
                bin: idx,
                freq_hz: idx as f64 * df,
            });
        }
        *slot = s * weight;
    }
    if real_output && n % 2 == 0 {
        buf[nyquist_bin] = C64::new(buf[nyquist_bin].re, 0.0);
    }

    let spectrum_energy = energy(&buf) / n as f64;
    if !cfg.unfiltered() && spectrum_energy > 0.0 {
        let top = top_band_energy(&buf, n) / n as f64;
        let fraction = top / spectrum_energy;
        if fraction > 0.01 {
            return Err(Error::Aliasing { fraction });
        }
    }

    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
        if real_output {
            v.im = 0.0;
        }
    }
    let total = energy(&buf);
    let peak = buf.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let w = (n / 64).max(1);
    let mid = n / 2;
    let lo = mid.saturating_sub(w);
    let hi = (mid + w).min(n - 1);
    let edge = buf[lo..=hi].iter().map(|v| v.norm()).fold(0.0, f64::max);
    Ok(RawImpulse {
        samples: buf,
        ts: cfg.ts,
        energy: total,
        spectrum_energy,
        tail_ratio: if peak > 0.0 { edge / peak } else { 0.0 },
    })
}

/// Energy of the two-sided bins in the top 5% of the frequency range.
fn top_band_energy(buf: &[C64], n: usize) -> f64 {
    let half = n / 2;
    let cut = half - (half / 20).max(1);
    buf.iter()
        .enumerate()
        .filter(|(k, _)| {
            let m = if *k <= half { *k } else { n - *k };
            m > cut
        })
        .map(|(_, v)| v.norm_sqr())
        .sum()
}

fn shift_for(raw: &RawImpulse, cfg: &SynthesisConfig) -> usize {
    match cfg.alignment {
        Alignment::Auto => raw.auto_shift(cfg.energy_threshold),
        Alignment::Fixed(s) => s,
    }
}

pub fn fd_to_kernel(spectrum: &SampledSpectrum, cfg: &SynthesisConfig) -> Result<DtKernel> {
    let raw = synthesize(spectrum, cfg)?;
    raw.truncate(shift_for(&raw, cfg), cfg.energy_threshold)
}

/// Truncates several raw impulses with one common shift: the fixed shift, or
/// the largest automatic shift among them.
pub fn truncate_common(raws: &[RawImpulse], cfg: &SynthesisConfig) -> Result<(Vec<DtKernel>, usize)> {
    let shift = match cfg.alignment {
        Alignment::Fixed(s) => s,
        Alignment::Auto => raws
            .iter()
            .map(|r| r.auto_shift(cfg.energy_threshold))
            .max()
            .unwrap_or(0),
    };
    let kernels = raws
        .iter()
        .map(|r| r.truncate(shift, cfg.energy_threshold))
        .collect::<Result<Vec<_>>>()?;
    Ok((kernels, shift))
}

/// FFT length whose time span covers four times `expected_duration`.
pub fn initial_fft_len(ts: f64, expected_duration: f64) -> usize {
    let samples = (4.0 * expected_duration / ts).ceil().max(64.0) as usize;
    samples.next_power_of_two().min(MAX_FFT_LEN)
}

/// Re-evaluates `build` on successively doubled grids until every impulse has
/// decayed below [`TAIL_TOLERANCE`] at the edge of its span, or the length cap
/// is reached.
pub fn synthesize_adaptive<F>(build: F, cfg: &SynthesisConfig, n_fft: usize) -> Result<(Vec<RawImpulse>, FrequencyGrid)>
where
    F: Fn(&FrequencyGrid) -> Result<Vec<SampledSpectrum>>,
{
    let mut n = n_fft.max(64).next_power_of_two();
    loop {
        let grid = cfg.grid(n)?;
        let raws = build(&grid)?
            .iter()
            .map(|s| synthesize(s, cfg))
            .collect::<Result<Vec<_>>>()?;
        let settled = raws.iter().all(|r| r.tail_ratio <= TAIL_TOLERANCE);
        if settled || n >= MAX_FFT_LEN {
            return Ok((raws, grid));
        }
        n *= 2;
    }
}

/// The four ABCD kernels of a two-port, sharing one alignment shift.
#[derive(Clone, Debug)]
pub struct AbcdKernels {
    pub a: DtKernel,
    pub b: DtKernel,
    pub c: DtKernel,
    pub d: DtKernel,
    pub shift: usize,
}

impl AbcdKernels {
    pub fn memory(&self) -> usize {
        [&self.a, &self.b, &self.c, &self.d]
            .iter()
            .map(|k| k.memory())
            .max()
            .unwrap()
    }

    pub fn from_raws(raws: &[RawImpulse], cfg: &SynthesisConfig) -> Result<Self> {
        let (mut ks, shift) = truncate_common(raws, cfg)?;
        let d = ks.pop().unwrap();
        let c = ks.pop().unwrap();
        let b = ks.pop().unwrap();
        let a = ks.pop().unwrap();
        Ok(Self { a, b, c, d, shift })
    }
}

fn abcd_spectra(tp: &TwoPortABCD) -> Vec<SampledSpectrum> {
    use crate::twoport::AbcdEntry::*;
    [A, B, C, D].iter().map(|&e| tp.spectrum(e)).collect()
}

pub fn abcd_kernels(tp: &TwoPortABCD, cfg: &SynthesisConfig) -> Result<AbcdKernels> {
    let raws = abcd_spectra(tp)
        .iter()
        .map(|s| synthesize(s, cfg))
        .collect::<Result<Vec<_>>>()?;
    AbcdKernels::from_raws(&raws, cfg)
}

/// Kernels of `1/A`, `−B/A`, `1/D` and `−C/D`.
#[derive(Clone, Debug)]
pub struct AltKernels {
    pub alpha: DtKernel,
    pub beta: DtKernel,
    pub gamma: DtKernel,
    pub zeta: DtKernel,
    pub shift: usize,
}

pub fn alt_spectra(tp: &TwoPortABCD) -> Result<Vec<SampledSpectrum>> {
    let n = tp.len();
    let mut out = vec![Vec::with_capacity(n); 4];
    for k in 0..n {
        let [a, b, c, d] = tp.at(k);
        for (what, v) in [("A", a), ("D", d)] {
            if v.norm() < 1e-12 {
                return Err(Error::SingularBin {
                    what: if what == "A" { "A(f)" } else { "D(f)" },
                    bin: k,
                    freq_hz: tp.grid.freq(k),
                });
            }
        }
        out[0].push(ONE / a);
        out[1].push(-b / a);
        out[2].push(ONE / d);
        out[3].push(-c / d);
    }
    out.into_iter()
        .map(|v| SampledSpectrum::new(tp.grid, v))
        .collect()
}

pub fn alt_kernels(tp: &TwoPortABCD, cfg: &SynthesisConfig) -> Result<AltKernels> {
    let raws = alt_spectra(tp)?
        .iter()
        .map(|s| synthesize(s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let (mut ks, shift) = truncate_common(&raws, cfg)?;
    let zeta = ks.pop().unwrap();
    let gamma = ks.pop().unwrap();
    let beta = ks.pop().unwrap();
    let alpha = ks.pop().unwrap();
    Ok(AltKernels {
        alpha,
        beta,
        gamma,
        zeta,
        shift,
    })
}

/// End-to-end kernel of a terminated two-port.
pub fn channel_kernel(tp: &TwoPortABCD, term: &Termination, cfg: &SynthesisConfig) -> Result<DtKernel> {
    fd_to_kernel(&transfer_function(tp, term)?, cfg)
}

/// RMS delay spread of a kernel in seconds.
pub fn rms_delay_spread(kernel: &DtKernel) -> f64 {
    let e = kernel.energy();
    if e == 0.0 {
        return 0.0;
    }
    let mean = kernel
        .taps
        .iter()
        .enumerate()
        .map(|(l, t)| l as f64 * t.norm_sqr())
        .sum::<f64>()
        / e;
    let var = kernel
        .taps
        .iter()
        .enumerate()
        .map(|(l, t)| (l as f64 - mean).powi(2) * t.norm_sqr())
        .sum::<f64>()
        / e;
    var.sqrt() * kernel.ts
}

/// Index of the largest tap and the index where its lobe ends: the first
/// point after the peak, below half the peak, where `|h|` stops decreasing.
pub fn main_lobe(kernel: &DtKernel) -> Option<(usize, usize)> {
    let mags: Vec<f64> = kernel.taps.iter().map(|t| t.norm()).collect();
    let (peak_at, &peak) = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak == 0.0 {
        return None;
    }
    let end = (peak_at + 1..mags.len())
        .find(|&n| mags[n] < 0.5 * peak && (n + 1 == mags.len() || mags[n + 1] >= mags[n]))
        .unwrap_or(mags.len());
    Some((peak_at, end))
}

/// Delay in seconds from the main pulse of a kernel to its strongest later
/// echo, if some sample after the main lobe reaches `min_ratio` of the peak.
pub fn echo_spacing(kernel: &DtKernel, min_ratio: f64) -> Option<f64> {
    let (peak_at, end) = main_lobe(kernel)?;
    let peak = kernel.taps[peak_at].norm();
    let (echo_at, echo) = kernel.taps[end..]
        .iter()
        .map(|t| t.norm())
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    (echo >= min_ratio * peak).then(|| (end + echo_at - peak_at) as f64 * kernel.ts)
}
