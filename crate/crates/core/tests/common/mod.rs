#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlblock::kernels::DtKernel;
use tlblock::linalg::{CMatrix, CVector, C64, ZERO};
use tlblock::lptv::{LpTvKernel, PeriodicTiming};
use tlblock::twoport::CableParams;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_c(r: &mut impl Rng) -> C64 {
    C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

pub fn rand_vec(r: &mut impl Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| rand_c(r))
}

pub fn rand_kernel(r: &mut impl Rng, taps: usize, ts: f64) -> DtKernel {
    DtKernel::from_taps((0..taps).map(|_| rand_c(r)).collect(), ts)
}

/// Periodic kernel with random harmonics of order `order` and `taps` taps each.
pub fn rand_lptv(r: &mut impl Rng, timing: &PeriodicTiming, order: usize, taps: usize) -> LpTvKernel {
    let hs = (0..2 * order + 1).map(|_| rand_kernel(r, taps, timing.ts())).collect();
    LpTvKernel::new(timing.clone(), hs).unwrap()
}

/// Line with no loss whose one-way delay is `samples·ts` and whose
/// characteristic impedance is `z0`.
pub fn delay_line(samples: usize, ts: f64, z0: f64) -> (CableParams, f64) {
    let l0 = z0 * 1e-9;
    let c0 = 1e-9 / z0;
    let per_ft = (l0 * c0).sqrt();
    (CableParams::lossless("DELAY", l0, c0), samples as f64 * ts / per_ft)
}

pub fn rel_l2(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

pub fn rel_max(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max) / scale
}

/// Direct evaluation of `y[t] = Σ_l h(t, l) x[t − l]` with `x` at rest before 0.
pub fn tv_convolve(h: impl Fn(i64, usize) -> C64, memory: usize, x: &[C64]) -> Vec<C64> {
    (0..x.len())
        .map(|t| {
            (0..=memory.min(t))
                .map(|l| h(t as i64, l) * x[t - l])
                .fold(ZERO, |a, b| a + b)
        })
        .collect()
}

/// Taps of the composition "apply `inner`, then `outer`".
pub fn compose_taps(
    outer: &dyn Fn(i64, usize) -> C64,
    outer_mem: usize,
    inner: &dyn Fn(i64, usize) -> C64,
    inner_mem: usize,
    t: i64,
    l: usize,
) -> C64 {
    let mut acc = ZERO;
    for j in 0..=l.min(outer_mem) {
        if l - j <= inner_mem {
            acc += outer(t, j) * inner(t - j as i64, l - j);
        }
    }
    acc
}

/// Sample of the Zadeh form `Σ_m e^{j2π m k/n} h_m[l]` computed from the
/// exponential directly rather than a phase table.
pub fn zadeh_tap(kernel: &LpTvKernel, k: i64, l: usize) -> C64 {
    let n = kernel.timing().samples_per_period() as f64;
    kernel
        .harmonics()
        .map(|(m, h)| h.tap(l) * C64::from_polar(1.0, 2.0 * PI * (m * k) as f64 / n))
        .fold(ZERO, |a, b| a + b)
}

/// Simpson's rule on `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

pub const MINIMAL_DOC: &str = "[signal]
bandwidth_hz = 2e6
rolloff = 0.5
ts_s = 1.25e-7

[termination]
source_z_kind = resistor
source_r_ohm = 100
load_z_kind = resistor
load_r_ohm = 100

[element]
kind = cable
cable = AWG24
length_ft = 1000
";

pub mod checks;
pub mod topology_gen;
