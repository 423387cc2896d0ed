//! Command implementations behind the `tlblock` binary.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tlblock::chainrule::{cascade_tz, cascade_tz_recursive, tz_relative_difference, TzBlocks};
use tlblock::export::{kernel_csv, matrix_csv, tf_csv, BlockStream};
use tlblock::kernels::{alt_kernels, channel_kernel, echo_spacing, DtKernel};
use tlblock::lifting::pad_payload;
use tlblock::linalg::{CVector, C64};
use tlblock::lptv::{estimate_harmonics, EstimatorConfig, PeriodicTiming};
use tlblock::network::{BuiltLink, Network};
use tlblock::simulate::{impulse_response, simulate_ibi, simulate_tz, NoiseSpec};
use tlblock::topology::{parse, CableLibrary};
use tlblock::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "tlblock", version, about = "Transmission-line channels in block form")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Transfer function H(f) of the terminated chain.
    Tf(Common),
    /// ABCD, alternative and channel kernels with an energy-capture summary.
    Kernels(Common),
    /// Lifted matrices of the cascade at one block index.
    Lift {
        #[command(flatten)]
        common: Common,
        /// Block index of the lifted matrices.
        #[arg(long, default_value_t = 1)]
        block: i64,
    },
    /// Trailing-zeros simulation with random payloads.
    Simulate(Common),
    /// Harmonic kernels estimated from captured input and output streams.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Input block stream (defaults to OUT/input.csv).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output block stream (defaults to OUT/output.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Cross-model consistency checks.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    pub topology: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Energy threshold for kernel truncation, in (0, 1].
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub blocks: usize,
    /// Block size.
    #[arg(long)]
    pub p: Option<usize>,
    /// Harmonic order.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub noise_snr_db: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_VALIDATION,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::Format(_)
            | Error::InvalidParameter(_)
            | Error::BlockTooSmall { .. }
            | Error::Underdetermined { .. } => CliError::Usage(e.to_string()),
            other => CliError::Failure(other.to_string()),
        }
    }
}

/// What a command produced: files written and a text summary for stdout.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub passed: bool,
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    match &cli.command {
        Command::Tf(c) => cmd_tf(c),
        Command::Kernels(c) => cmd_kernels(c),
        Command::Lift { common, block } => cmd_lift(common, *block),
        Command::Simulate(c) => cmd_simulate(c),
        Command::Estimate { common, input, output } => cmd_estimate(common, input.as_deref(), output.as_deref()),
        Command::Validate { common, inject_fault } => cmd_validate(common, *inject_fault),
    }
}

/// Parses the topology and applies the threshold override.
pub fn load_network(c: &Common) -> CliResult<Network> {
    let text = fs::read_to_string(&c.topology)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", c.topology.display())))?;
    let doc = parse(&text, &CableLibrary::builtin())?;
    let net = Network::new(doc)?;
    Ok(match c.threshold {
        Some(t) => net.with_threshold(t)?,
        None => net,
    })
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(dir: &'a Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, text: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self, summary: String, passed: bool) -> Outcome {
        Outcome {
            files: self.files,
            summary,
            passed,
        }
    }
}

pub fn cmd_tf(c: &Common) -> CliResult<Outcome> {
    let net = load_network(c)?;
    let grid = net.grid(net.initial_fft_len())?;
    let (h, approximate) = net.transfer_function(&grid)?;
    let mut w = Writer::new(&c.out)?;
    w.write("tf.csv", &tf_csv(&h))?;
    let mut summary = format!("tf: {} points, df = {} Hz\n", grid.n_points(), grid.delta_f());
    if approximate {
        summary.push_str("time-varying elements replaced by their period average\n");
    }
    Ok(w.finish(summary, true))
}

fn kernel_line(name: &str, k: &DtKernel) -> String {
    let echo = echo_spacing(k, 0.01).map_or("none".to_string(), |s| format!("{s:.6e}"));
    format!(
        "{name}: L={} energy_captured={:.8} precursor_energy={:.3e} delay={} echo_spacing_s={echo}\n",
        k.memory(),
        k.energy_captured,
        k.precursor_energy,
        k.delay
    )
}

pub fn cmd_kernels(c: &Common) -> CliResult<Outcome> {
    let net = load_network(c)?;
    let (ks, grid) = net.chain_kernels()?;
    let (tp, approximate) = net.fd_chain(&grid)?;
    let mut w = Writer::new(&c.out)?;
    let mut summary = format!("kernels: Ts = {} s, N = {}, shift = {}\n", net.cfg.ts, 2 * (grid.n_points() - 1), ks.shift);
    if approximate {
        summary.push_str("time-varying elements replaced by their period average\n");
    }
    for (name, k) in [("a", &ks.a), ("b", &ks.b), ("c", &ks.c), ("d", &ks.d)] {
        w.write(&format!("kernel_{name}.csv"), &kernel_csv(name, k))?;
        summary.push_str(&kernel_line(name, k));
    }
    match alt_kernels(&tp, &net.cfg) {
        Ok(alt) => {
            for (name, k) in [("alpha", &alt.alpha), ("beta", &alt.beta), ("gamma", &alt.gamma), ("zeta", &alt.zeta)] {
                w.write(&format!("kernel_{name}.csv"), &kernel_csv(name, k))?;
                summary.push_str(&kernel_line(name, k));
            }
        }
        Err(e) => {
            let _ = writeln!(summary, "alternative kernels unavailable: {e}");
        }
    }
    let h = channel_kernel(&tp, &net.termination(), &net.cfg)?;
    w.write("kernel_h.csv", &kernel_csv("h", &h))?;
    summary.push_str(&kernel_line("h", &h));
    w.write("kernels_summary.txt", &summary)?;
    Ok(w.finish(summary, true))
}

pub fn cmd_lift(c: &Common, block: i64) -> CliResult<Outcome> {
    let net = load_network(c)?;
    let built = net.build_link(c.p)?;
    let x = built.link.cascade_at(block)?;
    let mut w = Writer::new(&c.out)?;
    for (name, m) in [
        ("A0", &x.a0),
        ("A1", &x.a1),
        ("B0", &x.b0),
        ("B1", &x.b1),
        ("C0", &x.c0),
        ("C1", &x.c1),
        ("D0", &x.d0),
        ("D1", &x.d1),
    ] {
        w.write(&format!("lift_{name}.csv"), &matrix_csv(m, x.p, x.l, block))?;
    }
    let summary = format!(
        "lift: P={} L={} block={block} delay={} harmonic_order={}\n",
        x.p, x.l, x.delay, built.harmonic_order
    );
    Ok(w.finish(summary, true))
}

/// Real Gaussian payloads, reproducible from `seed`.
pub fn payloads(seed: u64, count: usize, len: usize) -> Vec<CVector> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| CVector::from_fn(len, |_, _| C64::new(StandardNormal.sample(&mut r), 0.0)))
        .collect()
}

fn mean_power(blocks: &[CVector]) -> f64 {
    let n: usize = blocks.iter().map(|b| b.len()).sum();
    blocks.iter().map(|b| b.norm_squared()).sum::<f64>() / n.max(1) as f64
}

pub fn cmd_simulate(c: &Common) -> CliResult<Outcome> {
    if c.blocks == 0 {
        return Err(CliError::Usage("--blocks must be at least 1".into()));
    }
    let net = load_network(c)?;
    let built = net.build_link(c.p)?;
    let link = &built.link;
    let (p, l) = (link.p, link.memory());
    let inputs = payloads(c.seed, c.blocks, link.payload_len());
    let clean = simulate_tz(link, &inputs, None)?;
    let (out, noise_var) = match c.noise_snr_db {
        None => (clean, 0.0),
        Some(snr) => {
            if !snr.is_finite() {
                return Err(CliError::Usage("--noise-snr-db must be finite".into()));
            }
            let var = mean_power(&clean.blocks) / 10f64.powf(snr / 10.0);
            (simulate_tz(link, &inputs, Some(&NoiseSpec::white(var, c.seed)))?, var)
        }
    };
    let stream = |blocks: Vec<CVector>| BlockStream {
        p,
        l,
        ts: net.cfg.ts,
        first_block: 1,
        blocks,
    };
    let mut w = Writer::new(&c.out)?;
    w.write("input.csv", &stream(inputs.iter().map(|v| pad_payload(v, l)).collect()).to_csv())?;
    w.write("output.csv", &stream(out.blocks.clone()).to_csv())?;
    let summary = format!(
        "simulate: seed={} P={p} L={l} blocks={} delay={} noise_variance={noise_var:e} condition_estimate={:e}\n",
        c.seed,
        c.blocks,
        link.delay()?,
        out.condition_estimate
    );
    w.write("simulate_report.txt", &summary)?;
    Ok(w.finish(summary, true))
}

fn read_stream(path: &Path) -> CliResult<BlockStream> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    BlockStream::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn cmd_estimate(c: &Common, input: Option<&Path>, output: Option<&Path>) -> CliResult<Outcome> {
    let net = load_network(c)?;
    let input = input.map_or_else(|| c.out.join("input.csv"), Path::to_path_buf);
    let output = output.map_or_else(|| c.out.join("output.csv"), Path::to_path_buf);
    let xs = read_stream(&input)?;
    let ys = read_stream(&output)?;
    if xs.p != ys.p || xs.l != ys.l || xs.first_block != ys.first_block || xs.blocks.len() != ys.blocks.len() {
        return Err(CliError::Usage("input and output streams differ in P, L, first block or block count".into()));
    }
    let (p, l) = (ys.p, ys.l);
    if l >= p {
        return Err(CliError::Usage(format!("stream declares L={l} with P={p}")));
    }
    let timing = match &net.timing {
        Some(t) => t.clone(),
        None => PeriodicTiming::new(net.cfg.ts, 1.0 / net.cfg.ts)?,
    };
    let order = c
        .m
        .or_else(|| net.doc.lptv.as_ref().and_then(|s| s.harmonic_order))
        .unwrap_or(0);
    let cfg = EstimatorConfig {
        timing,
        order,
        taps: l + 1,
        first_block: ys.first_block,
    };
    let payload: Vec<CVector> = xs.blocks.iter().map(|b| b.rows(0, p - l).into_owned()).collect();
    let est = estimate_harmonics(&payload, &ys.blocks, &cfg, None)?;
    let mut w = Writer::new(&c.out)?;
    for (m, h) in est.kernel.harmonics() {
        let name = format!("h_{m}");
        w.write(&format!("harmonic_{m}.csv"), &kernel_csv(&name, h))?;
    }
    let report = format!(
        "{{\"seed\": {}, \"M\": {order}, \"L\": {l}, \"P\": {p}, \"blocks\": {}, \"residual_mse\": {:e}, \"condition_estimate\": {:e}}}\n",
        c.seed,
        ys.blocks.len(),
        est.residual_mse,
        est.condition_estimate
    );
    w.write("estimate_report.txt", &report)?;
    Ok(w.finish(report, true))
}

/// Result of one validation check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub measured: Option<f64>,
    pub bound: f64,
    pub note: String,
}

impl Check {
    pub fn status(&self) -> &'static str {
        match self.measured {
            None => "SKIP",
            Some(v) if v <= self.bound => "PASS",
            Some(_) => "FAIL",
        }
    }

    fn line(&self) -> String {
        let measured = self.measured.map_or("-".to_string(), |v| format!("{v:.3e}"));
        format!(
            "{:<16} {}  measured={measured} bound={:.0e} {}\n",
            self.name,
            self.status(),
            self.bound,
            self.note
        )
    }
}

/// Impulse response of the lifted link against `H(f)` times the filter and
/// the alignment delay, over the passband.
fn fd_vs_lifted(net: &Network, built: &BuiltLink) -> CliResult<f64> {
    let (resp, lead) = impulse_response(&built.link)?;
    let tau = (built.link.delay()? + lead) as f64;
    let (h, _) = net.transfer_function(&built.grid)?;
    let edge = net.cfg.passband_edge();
    let (mut num, mut den) = (0.0, 0.0);
    for (k, hv) in h.values().iter().enumerate() {
        let f = built.grid.freq(k);
        if f > edge {
            break;
        }
        let w = -2.0 * PI * f * net.cfg.ts;
        let got: C64 = resp.iter().enumerate().map(|(n, v)| v * C64::from_polar(1.0, w * n as f64)).sum();
        let want = hv * net.cfg.filter_response(f) * C64::from_polar(1.0, w * tau);
        num += (got - want).norm_sqr();
        den += want.norm_sqr();
    }
    Ok((num / den).sqrt())
}

pub fn validation_checks(net: &Network, p: Option<usize>, seed: u64, inject_fault: bool) -> CliResult<Vec<Check>> {
    let built = net.build_link(p)?;
    let link = &built.link;
    let mut checks = Vec::new();

    checks.push(if net.doc.is_time_varying() {
        Check {
            name: "fd_vs_lifted",
            measured: None,
            bound: 1e-3,
            note: "time-varying link has no single H(f)".into(),
        }
    } else {
        Check {
            name: "fd_vs_lifted",
            measured: Some(fd_vs_lifted(net, &built)?),
            bound: 1e-3,
            note: format!("P={} L={} threshold={}", link.p, link.memory(), net.cfg.energy_threshold),
        }
    });

    let tz: Vec<TzBlocks> = link
        .elements
        .iter()
        .map(|e| e.lifted_at(1).map(|x| x.tz()))
        .collect::<tlblock::Result<_>>()?;
    checks.push(Check {
        name: "chain_rule_paths",
        measured: Some(tz_relative_difference(&cascade_tz(&tz)?, &cascade_tz_recursive(&tz)?)),
        bound: 1e-12,
        note: format!("{} elements", tz.len()),
    });

    let mut cascade = link.cascade_at(1)?;
    if inject_fault {
        let p = cascade.p;
        cascade.a0[(0, p - 1)] = C64::new(1e-3, 0.0);
    }
    let structure = cascade.check_structure();
    checks.push(Check {
        name: "structure",
        measured: Some(if structure.is_ok() { 0.0 } else { 1.0 }),
        bound: 0.0,
        note: structure.err().map(|e| e.to_string()).unwrap_or_default(),
    });

    let (tp, _) = net.fd_chain(&built.grid)?;
    let det = (0..tp.len())
        .map(|k| {
            let [a, b, c, d] = tp.at(k);
            let scale = (a * d).norm().max((b * c).norm()).max(1.0);
            (tp.determinant(k) - 1.0).norm() / scale
        })
        .fold(0.0, f64::max);
    checks.push(Check {
        name: "determinant",
        measured: Some(det),
        bound: 1e-9,
        note: String::new(),
    });

    let inputs = payloads(seed, 4, link.payload_len());
    let tz_out = simulate_tz(link, &inputs, None)?;
    let full: Vec<CVector> = inputs.iter().map(|v| pad_payload(v, link.memory())).collect();
    checks.push(match simulate_ibi(link, &full, None) {
        Ok(ibi) => {
            let worst = tz_out
                .blocks
                .iter()
                .zip(&ibi.blocks)
                .map(|(a, b)| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            Check {
                name: "tz_vs_ibi",
                measured: Some(worst),
                bound: 1e-9,
                note: String::new(),
            }
        }
        Err(e @ Error::IllConditioned { .. }) => Check {
            name: "tz_vs_ibi",
            measured: None,
            bound: 1e-9,
            note: format!("full solve not attempted: {e}"),
        },
        Err(e) => return Err(e.into()),
    });
    Ok(checks)
}

pub fn cmd_validate(c: &Common, inject_fault: bool) -> CliResult<Outcome> {
    let net = load_network(c)?;
    let checks = validation_checks(&net, c.p, c.seed, inject_fault)?;
    let mut report = format!("validate: seed={}\n", c.seed);
    for ch in &checks {
        report.push_str(&ch.line());
    }
    let passed = checks.iter().all(|ch| ch.status() != "FAIL");
    report.push_str(if passed { "result: PASS\n" } else { "result: FAIL\n" });
    let mut w = Writer::new(&c.out)?;
    w.write("validate_report.txt", &report)?;
    Ok(w.finish(report, passed))
}
