//! Builds frequency-domain and lifted models from a [`TopologyDoc`].
//!
//! Consecutive time-invariant elements are chained in the frequency domain
//! and synthesized as one lifted two-port; each time-varying element becomes
//! its own periodically varying block element.

use crate::chainrule::LiftedTwoPort;
use crate::error::{Error, Result};
use crate::kernels::{initial_fft_len, synthesize_adaptive, AbcdKernels, SynthesisConfig};
use crate::lifting::default_block_size;
use crate::linalg::{C64, ZERO};
use crate::lptv::{default_harmonic_order, harmonic_responses, synthesize_tv_parts, LptvElement, PeriodicTiming, Placement};
use crate::simulate::{BlockElement, LinkModel, TerminationModel};
use crate::topology::{ElementSpec, TopologyDoc};
use crate::twoport::{
    bridged_tap, cable, chain_fd, series, shunt, transfer_function, AbcdEntry, FrequencyGrid, ImpedanceSpec,
    SampledSpectrum, Termination, TwoPortABCD,
};

/// Harmonic order synthesized when choosing a default order.
pub const PROBE_ORDER: usize = 8;

/// A run of elements simulated as one block element.
#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    Lti(Vec<ElementSpec>),
    Tv(ElementSpec),
}

#[derive(Clone, Debug)]
pub struct Network {
    pub doc: TopologyDoc,
    pub cfg: SynthesisConfig,
    pub timing: Option<PeriodicTiming>,
}

/// A lifted link together with what was needed to build it.
pub struct BuiltLink {
    pub link: LinkModel,
    pub grid: FrequencyGrid,
    /// Kernels of each time-invariant segment, in order.
    pub lti_kernels: Vec<AbcdKernels>,
    pub harmonic_order: usize,
}

impl Network {
    pub fn new(doc: TopologyDoc) -> Result<Self> {
        let mut cfg = doc.signal.synthesis_config();
        let timing = match doc.f0_hz() {
            Some(f0) => {
                let t = PeriodicTiming::new(cfg.ts, f0)?;
                cfg.ts = t.ts();
                Some(t)
            }
            None => None,
        };
        cfg.validate()?;
        Ok(Self { doc, cfg, timing })
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        self.cfg.energy_threshold = threshold;
        self.cfg.validate()?;
        Ok(self)
    }

    /// One-way propagation time through all cable, in seconds, counting
    /// bridged taps twice.
    pub fn electrical_length(&self) -> f64 {
        self.doc
            .elements
            .iter()
            .map(|e| match e {
                ElementSpec::Cable { cable, length_ft } => length_ft / cable.velocity(),
                ElementSpec::BridgedTap { cable, length_ft, .. } => 2.0 * length_ft / cable.velocity(),
                _ => 0.0,
            })
            .sum()
    }

    /// Starting FFT length for adaptive synthesis.
    pub fn initial_fft_len(&self) -> usize {
        let span = 20.0 * self.electrical_length() + 64.0 * self.cfg.ts;
        initial_fft_len(self.cfg.ts, span)
    }

    pub fn grid(&self, n_fft: usize) -> Result<FrequencyGrid> {
        self.cfg.grid(n_fft)
    }

    pub fn termination(&self) -> Termination {
        Termination {
            source: self.doc.termination.source.clone(),
            load: self.doc.termination.load.clone(),
        }
    }

    /// Frequency-domain two-port of one element. Time-varying elements are
    /// replaced by their period average (`m = 0`), so the result is
    /// approximate for them.
    pub fn element_fd(&self, e: &ElementSpec, grid: &FrequencyGrid) -> Result<TwoPortABCD> {
        match e {
            ElementSpec::Cable { cable: params, length_ft } => cable(params, *length_ft, grid),
            ElementSpec::Shunt(z) => shunt(z, grid),
            ElementSpec::Series(z) => series(z, grid),
            ElementSpec::BridgedTap {
                cable: params,
                length_ft,
                termination,
            } => bridged_tap(params, *length_ft, termination, grid),
            ElementSpec::TvShunt { .. } | ElementSpec::TvSeries { .. } => {
                let z = e.tv_impedance().expect("time-varying element")?;
                let avg = z.harmonic_spectra(grid, 0)?.remove(0);
                let mut tp = TwoPortABCD::identity(*grid);
                match z.placement {
                    Placement::Shunt => tp.c = avg.into_values(),
                    Placement::Series => tp.b = avg.into_values(),
                }
                Ok(tp)
            }
        }
    }

    /// Chained frequency-domain model; the flag is set when time-varying
    /// elements were averaged.
    pub fn fd_chain(&self, grid: &FrequencyGrid) -> Result<(TwoPortABCD, bool)> {
        let parts = self
            .doc
            .elements
            .iter()
            .map(|e| self.element_fd(e, grid))
            .collect::<Result<Vec<_>>>()?;
        Ok((chain_fd(&parts)?, self.doc.is_time_varying()))
    }

    pub fn transfer_function(&self, grid: &FrequencyGrid) -> Result<(SampledSpectrum, bool)> {
        let (tp, approx) = self.fd_chain(grid)?;
        Ok((transfer_function(&tp, &self.termination())?, approx))
    }

    pub fn segments(&self) -> Vec<Segment> {
        let mut out = Vec::new();
        let mut run = Vec::new();
        for e in &self.doc.elements {
            if e.is_time_varying() {
                if !run.is_empty() {
                    out.push(Segment::Lti(std::mem::take(&mut run)));
                }
                out.push(Segment::Tv(e.clone()));
            } else {
                run.push(e.clone());
            }
        }
        if !run.is_empty() {
            out.push(Segment::Lti(run));
        }
        out
    }

    fn lti_segment_kernels(&self, elements: &[ElementSpec]) -> Result<(AbcdKernels, FrequencyGrid)> {
        let build = |g: &FrequencyGrid| {
            let parts = elements
                .iter()
                .map(|e| self.element_fd(e, g))
                .collect::<Result<Vec<_>>>()?;
            let tp = chain_fd(&parts)?;
            Ok([AbcdEntry::A, AbcdEntry::B, AbcdEntry::C, AbcdEntry::D]
                .iter()
                .map(|&w| tp.spectrum(w))
                .collect())
        };
        let (raws, grid) = synthesize_adaptive(build, &self.cfg, self.initial_fft_len())?;
        Ok((AbcdKernels::from_raws(&raws, &self.cfg)?, grid))
    }

    /// ABCD kernels of the whole chain, with time-varying elements averaged.
    pub fn chain_kernels(&self) -> Result<(AbcdKernels, FrequencyGrid)> {
        self.lti_segment_kernels(&self.doc.elements)
    }

    /// Harmonic order: the document's, or the smallest one meeting the
    /// default truncation target for block size `p`.
    pub fn harmonic_order(&self, grid: &FrequencyGrid, p: usize) -> Result<usize> {
        if let Some(m) = self.doc.lptv.as_ref().and_then(|l| l.harmonic_order) {
            return Ok(m);
        }
        let Some(timing) = &self.timing else { return Ok(0) };
        let mut order = 0;
        for e in &self.doc.elements {
            if let Some(z) = e.tv_impedance() {
                let full = harmonic_responses(&z?, timing, grid, &self.cfg, PROBE_ORDER)?;
                order = order.max(default_harmonic_order(&full, p, full.memory() + 1));
            }
        }
        Ok(order)
    }

    /// Lifted terminations; only resistive ends are supported in block form.
    pub fn lifted_terminations(&self) -> Result<(TerminationModel, TerminationModel)> {
        let lift = |z: &ImpedanceSpec, which: &str| match z {
            ImpedanceSpec::Resistor { r } => Ok(TerminationModel::Scalar(C64::new(*r, 0.0))),
            ImpedanceSpec::Short => Ok(TerminationModel::Scalar(ZERO)),
            other => Err(Error::InvalidParameter(format!(
                "block simulation needs a resistive {which} termination, got {other:?}"
            ))),
        };
        Ok((
            lift(&self.doc.termination.source, "source")?,
            lift(&self.doc.termination.load, "load")?,
        ))
    }

    /// Lifted link with block size `p`, the document's `block_p`, or
    /// `4×memory` rounded up to a power of two, in that order of preference.
    pub fn build_link(&self, p: Option<usize>) -> Result<BuiltLink> {
        let (source, load) = self.lifted_terminations()?;
        let segments = self.segments();
        let mut lti = Vec::new();
        let mut grid = None;
        for s in &segments {
            if let Segment::Lti(els) = s {
                let (k, g) = self.lti_segment_kernels(els)?;
                lti.push(k);
                grid = Some(g);
            }
        }
        let grid = match grid {
            Some(g) => g,
            None => self.grid(self.initial_fft_len())?,
        };
        let probe_p = p.or(self.doc.signal.block_p);
        let order = match probe_p {
            Some(pp) => self.harmonic_order(&grid, pp)?,
            None => self.harmonic_order(&grid, 1 << 16)?,
        };

        let mut tv = Vec::new();
        for s in &segments {
            if let Segment::Tv(e) = s {
                let z = e.tv_impedance().expect("time-varying element")?;
                let timing = self.timing.as_ref().expect("timing exists with time-varying elements");
                tv.push((synthesize_tv_parts(&z, timing, &grid, &self.cfg, order)?, z.placement));
            }
        }
        let memory: usize = lti.iter().map(|k| k.memory()).sum::<usize>()
            + tv.iter().map(|((k, t), _)| k.memory().max(t.memory())).sum::<usize>();
        let p = probe_p.unwrap_or_else(|| default_block_size(memory));
        if p <= memory {
            return Err(Error::BlockTooSmall { p, l: memory });
        }

        let mut elements: Vec<Box<dyn BlockElement>> = Vec::new();
        let (mut li, mut ti) = (lti.iter(), tv.into_iter());
        for s in &segments {
            match s {
                Segment::Lti(_) => {
                    let k = li.next().unwrap();
                    elements.push(Box::new(LiftedTwoPort::from_kernels(k, p)?));
                }
                Segment::Tv(_) => {
                    let ((kernel, through), placement) = ti.next().unwrap();
                    elements.push(Box::new(LptvElement::new(kernel, through, placement, p)?));
                }
            }
        }
        Ok(BuiltLink {
            link: LinkModel::new(elements, source, load)?,
            grid,
            lti_kernels: lti,
            harmonic_order: order,
        })
    }
}

/// Value of `H(f)` of a chained model at an arbitrary frequency, evaluated on
/// a two-bin grid.
pub fn transfer_at(net: &Network, f: f64) -> Result<C64> {
    let fa = f.abs();
    let grid = FrequencyGrid::new(2, if fa > 0.0 { fa } else { 1.0 })?;
    let (h, _) = net.transfer_function(&grid)?;
    let v = if fa > 0.0 { h.values()[1] } else { h.values()[0] };
    Ok(if f < 0.0 { v.conj() } else { v })
}

/// `20·log10|h|`, with `−inf` for zero.
pub fn magnitude_db(h: C64) -> f64 {
    if h == ZERO {
        f64::NEG_INFINITY
    } else {
        20.0 * h.norm().log10()
    }
}
