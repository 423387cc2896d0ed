//! Random topology documents and byte-level mutations of them.

use rand::seq::IndexedRandom;
use rand::Rng;
use tlblock::kernels::FilterKind;
use tlblock::topology::{CableLibrary, ElementSpec, LptvSettings, SignalSettings, TerminationSpec, TopologyDoc, TvModel};
use tlblock::twoport::ImpedanceSpec;

/// A value with a short decimal form, so documents stay readable.
fn value(r: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let x: f64 = r.random_range(lo..hi);
    let digits = r.random_range(1..6);
    format!("{x:.digits$e}").parse().unwrap()
}

fn impedance(r: &mut impl Rng, allow_open: bool, allow_short: bool) -> ImpedanceSpec {
    loop {
        let z = match r.random_range(0..7) {
            0 => ImpedanceSpec::Resistor { r: value(r, 0.0, 1e4) },
            1 => ImpedanceSpec::Capacitor { c: value(r, 1e-12, 1e-6) },
            2 => ImpedanceSpec::Inductor { l: value(r, 1e-9, 1e-3) },
            3 => ImpedanceSpec::Open,
            4 => ImpedanceSpec::Short,
            5 => ImpedanceSpec::SeriesRlc {
                r: value(r, 0.0, 100.0),
                l: value(r, 0.0, 1e-4),
                c: value(r, 0.0, 1e-7),
            },
            _ => ImpedanceSpec::ParallelRc {
                r: value(r, 1.0, 1e4),
                c: value(r, 0.0, 1e-7),
            },
        };
        if (z == ImpedanceSpec::Open && !allow_open) || (z == ImpedanceSpec::Short && !allow_short) {
            continue;
        }
        return z;
    }
}

fn tv_model(r: &mut impl Rng) -> TvModel {
    match r.random_range(0..3) {
        0 => TvModel::TwoState {
            r1_ohm: value(r, 1.0, 1e3),
            r2_ohm: value(r, 1.0, 1e3),
            duty: value(r, 0.05, 0.95),
        },
        1 => {
            let r_dc_ohm = value(r, 10.0, 1e3);
            TvModel::Cosine {
                r_dc_ohm,
                r_ac_ohm: value(r, -0.9, 0.9) * r_dc_ohm,
                phase_rad: value(r, -3.0, 3.0),
            }
        }
        _ => TvModel::Piecewise((0..r.random_range(1..6)).map(|_| value(r, 1.0, 1e3)).collect()),
    }
}

pub fn random_doc(r: &mut impl Rng) -> TopologyDoc {
    let lib = CableLibrary::builtin();
    let labels: Vec<&str> = lib.labels().collect();
    let cable = |r: &mut dyn rand::RngCore| lib.get(labels.choose(r).unwrap()).unwrap().clone();
    let filter = *[FilterKind::RaisedCosine, FilterKind::Brickwall, FilterKind::None].choose(r).unwrap();
    let (bandwidth_hz, rolloff) = match filter {
        FilterKind::None => (0.0, 0.0),
        FilterKind::Brickwall => (value(r, 1e5, 1e7), 0.0),
        FilterKind::RaisedCosine => (value(r, 1e5, 1e7), value(r, 0.0, 1.0)),
    };
    let signal = SignalSettings {
        filter,
        bandwidth_hz,
        rolloff,
        ts_s: value(r, 1e-9, 1e-6),
        block_p: r.random_bool(0.3).then(|| r.random_range(2..4096)),
        carrier_hz: if r.random_bool(0.2) { value(r, 1e5, 1e7) } else { 0.0 },
        energy_threshold: if r.random_bool(0.5) { 0.9999 } else { value(r, 0.5, 1.0) },
    };
    let termination = TerminationSpec {
        source: impedance(r, false, true),
        load: impedance(r, true, true),
    };
    let f0 = value(r, 10.0, 1e5);
    let elements = (0..r.random_range(1..6))
        .map(|_| match r.random_range(0..6) {
            0 => ElementSpec::Cable {
                cable: cable(r),
                length_ft: value(r, 1.0, 5000.0),
            },
            1 => ElementSpec::Shunt(impedance(r, true, false)),
            2 => ElementSpec::Series(impedance(r, false, true)),
            3 => ElementSpec::BridgedTap {
                cable: cable(r),
                length_ft: value(r, 1.0, 2000.0),
                termination: impedance(r, true, true),
            },
            4 => ElementSpec::TvShunt {
                model: tv_model(r),
                f0_hz: f0,
            },
            _ => ElementSpec::TvSeries {
                model: tv_model(r),
                f0_hz: f0,
            },
        })
        .collect();
    let lptv = r.random_bool(0.3).then(|| LptvSettings {
        harmonic_order: r.random_bool(0.5).then(|| r.random_range(0..10)),
    });
    TopologyDoc {
        signal,
        termination,
        elements,
        lptv,
    }
}

const TOKENS: &[&[u8]] = &[
    b"[", b"]", b"=", b"\n", b"#", b" ", b"[element]", b"[signal]", b"kind = ", b"nan", b"inf", b"-1", b"1e999",
    b"0x10", b"\xff", b"\xe2\x82", b",", b"[[", b"\r\n", b"\t", b"\0",
];

/// Random bytes, or a seed document with a handful of byte edits.
pub fn mutate(r: &mut impl Rng, seeds: &[Vec<u8>]) -> Vec<u8> {
    if r.random_bool(0.1) {
        let n = r.random_range(0..512);
        return (0..n).map(|_| r.random()).collect();
    }
    let mut doc = seeds.choose(r).unwrap().clone();
    for _ in 0..r.random_range(1..8) {
        let at = if doc.is_empty() { 0 } else { r.random_range(0..doc.len()) };
        match r.random_range(0..6) {
            0 if !doc.is_empty() => {
                doc.remove(at);
            }
            1 => doc.insert(at, r.random()),
            2 => {
                let t = TOKENS.choose(r).unwrap();
                doc.splice(at..at, t.iter().copied());
            }
            3 if !doc.is_empty() => doc[at] = r.random(),
            4 => doc.truncate(at),
            _ => {
                let end = (at + r.random_range(0..64)).min(doc.len());
                let chunk = doc[at..end].to_vec();
                doc.splice(at..at, chunk);
            }
        }
    }
    doc
}
