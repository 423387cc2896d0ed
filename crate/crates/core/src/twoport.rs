//! Frequency-domain two-port networks in ABCD (transmission matrix) form.
//!
//! Every spectrum lives on a single-sided [`FrequencyGrid`] running from DC
//! upward; negative frequencies only appear inside [`crate::kernels`].

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{C64, ONE, ZERO};

/// Uniform single-sided frequency sampling starting at DC.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyGrid {
    n_points: usize,
    delta_f: f64,
}

impl FrequencyGrid {
    pub fn new(n_points: usize, delta_f: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "frequency grid needs at least 2 points, got {n_points}"
            )));
        }
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "frequency spacing must be positive, got {delta_f}"
            )));
        }
        Ok(Self { n_points, delta_f })
    }

    /// The grid whose inverse DFT of length `n_fft` yields samples spaced `ts`
    /// apart: `delta_f = 1/(n_fft ts)` and bins up to the Nyquist frequency.
    pub fn for_sampling(ts: f64, n_fft: usize) -> Result<Self> {
        if !(ts.is_finite() && ts > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sample interval must be positive, got {ts}"
            )));
        }
        if n_fft < 2 || n_fft % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "DFT length must be even and at least 2, got {n_fft}"
            )));
        }
        Self::new(n_fft / 2 + 1, 1.0 / (n_fft as f64 * ts))
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn freq(&self, k: usize) -> f64 {
        k as f64 * self.delta_f
    }

    pub fn f_max(&self) -> f64 {
        self.freq(self.n_points - 1)
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|k| self.freq(k))
    }

    pub fn matches(&self, other: &FrequencyGrid) -> bool {
        self.n_points == other.n_points
            && (self.delta_f - other.delta_f).abs() <= 1e-12 * self.delta_f
    }

    pub fn check(&self, other: &FrequencyGrid) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                expected: self.n_points,
                found: other.n_points,
            })
        }
    }
}

/// Complex values sampled on a [`FrequencyGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampledSpectrum {
    grid: FrequencyGrid,
    values: Vec<C64>,
}

impl SampledSpectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch {
                expected: grid.n_points(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(f64) -> C64) -> Self {
        let values = grid.frequencies().map(f).collect();
        Self { grid, values }
    }

    pub fn constant(grid: FrequencyGrid, value: C64) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_points()],
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Bin-wise combination of two spectra on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.grid.check(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// Per-unit-length primary parameters of a uniform two-wire line.
#[derive(Clone, Debug, PartialEq)]
pub struct CableParams {
    pub label: String,
    /// Ω/ft at DC.
    pub r0: f64,
    /// H/ft.
    pub l0: f64,
    /// S/ft.
    pub g0: f64,
    /// F/ft.
    pub c0: f64,
    /// Skin-effect corner, Hz.
    pub skin_freq: f64,
}

impl CableParams {
    /// 24-gauge twisted pair values typical of DSL loop models.
    pub fn awg24() -> Self {
        Self {
            label: "AWG24".into(),
            r0: 0.0517,
            l0: 0.0001831e-3,
            g0: 0.0,
            c0: 0.0157e-9,
            skin_freq: 250e3,
        }
    }

    pub fn lossless(label: &str, l0: f64, c0: f64) -> Self {
        Self {
            label: label.into(),
            r0: 0.0,
            l0,
            g0: 0.0,
            c0,
            skin_freq: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(self.r0) && finite_nonneg(self.g0)) {
            return Err(Error::InvalidParameter(format!(
                "cable {}: r0 and g0 must be finite and nonnegative",
                self.label
            )));
        }
        if !(self.l0.is_finite() && self.l0 > 0.0 && self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cable {}: l0 and c0 must be positive",
                self.label
            )));
        }
        if !(self.skin_freq.is_finite() && self.skin_freq > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cable {}: skin_freq must be positive",
                self.label
            )));
        }
        Ok(())
    }

    /// Phase velocity of the lossless limit, ft/s.
    pub fn velocity(&self) -> f64 {
        1.0 / (self.l0 * self.c0).sqrt()
    }

    /// High-frequency asymptote of the characteristic impedance.
    pub fn z0_asymptote(&self) -> f64 {
        (self.l0 / self.c0).sqrt()
    }

    pub fn resistance(&self, f: f64) -> f64 {
        let x = f / self.skin_freq;
        self.r0 * (1.0 + x * x).powf(0.25)
    }

    pub fn series_impedance(&self, f: f64) -> C64 {
        C64::new(self.resistance(f), 2.0 * PI * f * self.l0)
    }

    pub fn shunt_admittance(&self, f: f64) -> C64 {
        C64::new(self.g0, 2.0 * PI * f * self.c0)
    }
}

/// A lumped one-port impedance.
///
/// `Open` and `Short` are symbolic: an open shunt or a shorted series
/// element is an exact identity two-port. In `SeriesRlc`, a zero `l` or `c`
/// omits that component.
#[derive(Clone, Debug, PartialEq)]
pub enum ImpedanceSpec {
    Resistor { r: f64 },
    Capacitor { c: f64 },
    Inductor { l: f64 },
    Open,
    Short,
    SeriesRlc { r: f64, l: f64, c: f64 },
    ParallelRc { r: f64, c: f64 },
    Table(SampledSpectrum),
}

impl ImpedanceSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{what} must be positive")));
        match *self {
            ImpedanceSpec::Resistor { r } if !(r.is_finite() && r >= 0.0) => bad("resistance"),
            ImpedanceSpec::Capacitor { c } if !(c.is_finite() && c > 0.0) => bad("capacitance"),
            ImpedanceSpec::Inductor { l } if !(l.is_finite() && l > 0.0) => bad("inductance"),
            ImpedanceSpec::SeriesRlc { r, l, c }
                if !(r.is_finite() && r >= 0.0 && l >= 0.0 && c >= 0.0 && l.is_finite() && c.is_finite()) =>
            {
                bad("series RLC components")
            }
            ImpedanceSpec::ParallelRc { r, c }
                if !(r.is_finite() && r > 0.0 && c.is_finite() && c >= 0.0) =>
            {
                bad("parallel RC components")
            }
            ImpedanceSpec::Table(ref s) => {
                if s.values().iter().any(|z| z.re < 0.0 || !z.re.is_finite() || !z.im.is_finite()) {
                    Err(Error::InvalidParameter(
                        "impedance table must be finite with nonnegative real part".into(),
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Impedance at bin `k` of `grid`; `None` stands for an infinite value.
    pub fn impedance(&self, grid: &FrequencyGrid, k: usize) -> Result<Option<C64>> {
        let w = 2.0 * PI * grid.freq(k);
        let z = match self {
            ImpedanceSpec::Resistor { r } => Some(C64::new(*r, 0.0)),
            ImpedanceSpec::Capacitor { c } => {
                if w == 0.0 {
                    None
                } else {
                    Some(C64::new(0.0, -1.0 / (w * c)))
                }
            }
            ImpedanceSpec::Inductor { l } => Some(C64::new(0.0, w * l)),
            ImpedanceSpec::Open => None,
            ImpedanceSpec::Short => Some(ZERO),
            ImpedanceSpec::SeriesRlc { r, l, c } => {
                if *c > 0.0 && w == 0.0 {
                    None
                } else {
                    let xc = if *c > 0.0 { -1.0 / (w * c) } else { 0.0 };
                    Some(C64::new(*r, w * l + xc))
                }
            }
            ImpedanceSpec::ParallelRc { r, c } => Some(ONE / C64::new(1.0 / r, w * c)),
            ImpedanceSpec::Table(s) => {
                grid.check(s.grid())?;
                Some(s.values()[k])
            }
        };
        Ok(z)
    }

    /// Admittance at bin `k`; `None` stands for an infinite value (a short).
    pub fn admittance(&self, grid: &FrequencyGrid, k: usize) -> Result<Option<C64>> {
        let w = 2.0 * PI * grid.freq(k);
        let y = match self {
            ImpedanceSpec::Capacitor { c } => Some(C64::new(0.0, w * c)),
            ImpedanceSpec::ParallelRc { r, c } => Some(C64::new(1.0 / r, w * c)),
            ImpedanceSpec::Open => Some(ZERO),
            _ => match self.impedance(grid, k)? {
                None => Some(ZERO),
                Some(z) if z == ZERO => None,
                Some(z) => Some(ONE / z),
            },
        };
        Ok(y)
    }

    pub fn impedance_spectrum(&self, grid: &FrequencyGrid) -> Result<Vec<Option<C64>>> {
        (0..grid.n_points()).map(|k| self.impedance(grid, k)).collect()
    }
}

/// Four ABCD spectra on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoPortABCD {
    pub grid: FrequencyGrid,
    pub a: Vec<C64>,
    pub b: Vec<C64>,
    pub c: Vec<C64>,
    pub d: Vec<C64>,
}

impl TwoPortABCD {
    pub fn new(grid: FrequencyGrid, a: Vec<C64>, b: Vec<C64>, c: Vec<C64>, d: Vec<C64>) -> Result<Self> {
        for v in [&a, &b, &c, &d] {
            if v.len() != grid.n_points() {
                return Err(Error::GridMismatch {
                    expected: grid.n_points(),
                    found: v.len(),
                });
            }
        }
        Ok(Self { grid, a, b, c, d })
    }

    pub fn identity(grid: FrequencyGrid) -> Self {
        let n = grid.n_points();
        Self {
            grid,
            a: vec![ONE; n],
            b: vec![ZERO; n],
            c: vec![ZERO; n],
            d: vec![ONE; n],
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn at(&self, k: usize) -> [C64; 4] {
        [self.a[k], self.b[k], self.c[k], self.d[k]]
    }

    pub fn determinant(&self, k: usize) -> C64 {
        self.a[k] * self.d[k] - self.b[k] * self.c[k]
    }

    /// Largest reciprocity defect `|AD − BC − 1| / (1 + |AD|)` over the grid.
    pub fn reciprocity_error(&self) -> f64 {
        (0..self.len())
            .map(|k| (self.determinant(k) - ONE).norm() / (1.0 + (self.a[k] * self.d[k]).norm()))
            .fold(0.0, f64::max)
    }

    /// `self` followed by `next` (source side first).
    pub fn then(&self, next: &TwoPortABCD) -> Result<TwoPortABCD> {
        self.grid.check(&next.grid)?;
        let n = self.len();
        let mut out = TwoPortABCD {
            grid: self.grid,
            a: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            c: Vec::with_capacity(n),
            d: Vec::with_capacity(n),
        };
        for k in 0..n {
            let [a1, b1, c1, d1] = self.at(k);
            let [a2, b2, c2, d2] = next.at(k);
            out.a.push(a1 * a2 + b1 * c2);
            out.b.push(a1 * b2 + b1 * d2);
            out.c.push(c1 * a2 + d1 * c2);
            out.d.push(c1 * b2 + d1 * d2);
        }
        Ok(out)
    }

    pub fn spectrum(&self, which: AbcdEntry) -> SampledSpectrum {
        let v = match which {
            AbcdEntry::A => &self.a,
            AbcdEntry::B => &self.b,
            AbcdEntry::C => &self.c,
            AbcdEntry::D => &self.d,
        };
        SampledSpectrum {
            grid: self.grid,
            values: v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AbcdEntry {
    A,
    B,
    C,
    D,
}

/// Propagation constant (per foot) and characteristic impedance per bin.
///
/// At a DC bin with `g0 = 0` the propagation constant is set to zero and the
/// impedance is continued from bin 1.
pub fn gamma_z0(params: &CableParams, grid: &FrequencyGrid) -> Result<(Vec<C64>, Vec<C64>)> {
    params.validate()?;
    let n = grid.n_points();
    let mut gamma = Vec::with_capacity(n);
    let mut z0 = Vec::with_capacity(n);
    for k in 0..n {
        let f = grid.freq(k);
        let zs = params.series_impedance(f);
        let y = params.shunt_admittance(f);
        if y == ZERO {
            if f != 0.0 {
                return Err(Error::SingularBin {
                    what: "shunt admittance",
                    bin: k,
                    freq_hz: f,
                });
            }
            gamma.push(ZERO);
            let f1 = grid.freq(1);
            z0.push((params.series_impedance(f1) / params.shunt_admittance(f1)).sqrt());
            continue;
        }
        gamma.push((zs * y).sqrt());
        z0.push((zs / y).sqrt());
    }
    Ok((gamma, z0))
}

/// `sinh(z)/z`, continuous through zero.
fn sinhc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        ONE + z * z / 6.0
    } else {
        z.sinh() / z
    }
}

const MAX_ELECTRICAL_LENGTH: f64 = 700.0;

/// Uniform line section of `length` feet.
///
/// `B` and `C` are evaluated as `Zs·l·sinh(γl)/(γl)` and `Y·l·sinh(γl)/(γl)`,
/// which equal `Z0 sinh γl` and `sinh γl / Z0` but stay finite at DC.
pub fn cable(params: &CableParams, length: f64, grid: &FrequencyGrid) -> Result<TwoPortABCD> {
    params.validate()?;
    if !(length.is_finite() && length >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "cable length must be nonnegative, got {length}"
        )));
    }
    let n = grid.n_points();
    let mut tp = TwoPortABCD {
        grid: *grid,
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        d: Vec::with_capacity(n),
    };
    for k in 0..n {
        let f = grid.freq(k);
        let zs = params.series_impedance(f);
        let y = params.shunt_admittance(f);
        let gl = (zs * y).sqrt() * length;
        if gl.re.abs() > MAX_ELECTRICAL_LENGTH {
            return Err(Error::Overflow {
                what: "cosh(gamma l)",
                bin: k,
                freq_hz: f,
            });
        }
        let ch = gl.cosh();
        let sc = sinhc(gl);
        let (b, c) = (zs * length * sc, y * length * sc);
        if !(ch.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(Error::Overflow {
                what: "cable ABCD",
                bin: k,
                freq_hz: f,
            });
        }
        tp.a.push(ch);
        tp.b.push(b);
        tp.c.push(c);
        tp.d.push(ch);
    }
    Ok(tp)
}

pub fn shunt(z: &ImpedanceSpec, grid: &FrequencyGrid) -> Result<TwoPortABCD> {
    z.validate()?;
    let mut tp = TwoPortABCD::identity(*grid);
    for k in 0..grid.n_points() {
        tp.c[k] = z.admittance(grid, k)?.ok_or(Error::SingularBin {
            what: "shunt short (infinite admittance)",
            bin: k,
            freq_hz: grid.freq(k),
        })?;
    }
    Ok(tp)
}

pub fn series(z: &ImpedanceSpec, grid: &FrequencyGrid) -> Result<TwoPortABCD> {
    z.validate()?;
    let mut tp = TwoPortABCD::identity(*grid);
    for k in 0..grid.n_points() {
        tp.b[k] = z.impedance(grid, k)?.ok_or(Error::SingularBin {
            what: "series open (infinite impedance)",
            bin: k,
            freq_hz: grid.freq(k),
        })?;
    }
    Ok(tp)
}

/// A cable stub of `length` feet terminated on `z_term`, seen as a shunt.
pub fn bridged_tap(
    params: &CableParams,
    length: f64,
    z_term: &ImpedanceSpec,
    grid: &FrequencyGrid,
) -> Result<TwoPortABCD> {
    z_term.validate()?;
    let tap = cable(params, length, grid)?;
    let mut tp = TwoPortABCD::identity(*grid);
    for k in 0..grid.n_points() {
        let [a, b, c, d] = tap.at(k);
        // Y_in = (C Zt + D)/(A Zt + B), written so open and short ends stay exact.
        let (num, den) = match z_term.impedance(grid, k)? {
            None => (c, a),
            Some(zt) => (c * zt + d, a * zt + b),
        };
        if den == ZERO || !(num / den).is_finite() {
            return Err(Error::SingularBin {
                what: "bridged tap input impedance is zero",
                bin: k,
                freq_hz: grid.freq(k),
            });
        }
        tp.c[k] = num / den;
    }
    Ok(tp)
}

/// Network-order product of element transmission matrices.
pub fn chain_fd(elements: &[TwoPortABCD]) -> Result<TwoPortABCD> {
    let (first, rest) = elements
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("chain needs at least one element".into()))?;
    rest.iter().try_fold(first.clone(), |acc, e| acc.then(e))
}

/// Source and load impedances of a link.
#[derive(Clone, Debug, PartialEq)]
pub struct Termination {
    pub source: ImpedanceSpec,
    pub load: ImpedanceSpec,
}

impl Termination {
    pub fn resistive(z_source: f64, z_load: f64) -> Self {
        Self {
            source: ImpedanceSpec::Resistor { r: z_source },
            load: ImpedanceSpec::Resistor { r: z_load },
        }
    }

    pub fn validate(&self, grid: &FrequencyGrid) -> Result<()> {
        self.source.validate()?;
        self.load.validate()?;
        for k in 0..grid.n_points() {
            for (side, z) in [("source", &self.source), ("load", &self.load)] {
                if let Some(z) = z.impedance(grid, k)? {
                    if z.re < 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "{side} impedance is not passive at bin {k}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Load voltage over source voltage, `zL / (A zL + B + C zL zs + D zs)`.
///
/// An open load is handled as the `zL → ∞` limit `1/(A + C zs)`; the source
/// impedance must be finite.
pub fn transfer_function(tp: &TwoPortABCD, term: &Termination) -> Result<SampledSpectrum> {
    term.validate(&tp.grid)?;
    let grid = tp.grid;
    let mut h = Vec::with_capacity(grid.n_points());
    for k in 0..grid.n_points() {
        let [a, b, c, d] = tp.at(k);
        let zs = term.source.impedance(&grid, k)?.ok_or_else(|| {
            Error::InvalidParameter("source impedance must be finite".into())
        })?;
        let value = match term.load.admittance(&grid, k)? {
            None => ZERO,
            Some(yl) => {
                let den = a + b * yl + c * zs + d * zs * yl;
                if den.norm() == 0.0 || !den.is_finite() {
                    return Err(Error::SingularBin {
                        what: "transfer function denominator",
                        bin: k,
                        freq_hz: grid.freq(k),
                    });
                }
                ONE / den
            }
        };
        h.push(value);
    }
    SampledSpectrum::new(grid, h)
}

/// Per-bin inverse transmission matrix.
pub fn backward(tp: &TwoPortABCD) -> Result<TwoPortABCD> {
    let mut out = tp.clone();
    for k in 0..tp.len() {
        let [a, b, c, d] = tp.at(k);
        let det = tp.determinant(k);
        let scale = (a.norm() * d.norm()).max(b.norm() * c.norm()).max(f64::MIN_POSITIVE);
        if det.norm() <= 1e-14 * scale {
            return Err(Error::SingularBin {
                what: "transmission matrix",
                bin: k,
                freq_hz: tp.grid.freq(k),
            });
        }
        out.a[k] = d / det;
        out.b[k] = -b / det;
        out.c[k] = -c / det;
        out.d[k] = a / det;
    }
    Ok(out)
}
