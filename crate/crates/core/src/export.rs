//! Plot-ready CSV output, and readers for the block-stream files that the
//! estimator consumes.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::kernels::DtKernel;
use crate::linalg::{CMatrix, CVector, C64};
use crate::network::magnitude_db;
use crate::twoport::SampledSpectrum;

/// `freq_hz,h_re,h_im,h_mag_db`, one row per grid bin.
pub fn tf_csv(h: &SampledSpectrum) -> String {
    let mut out = String::from("freq_hz,h_re,h_im,h_mag_db\n");
    for (k, v) in h.values().iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{}", h.grid().freq(k), v.re, v.im, magnitude_db(*v));
    }
    out
}

/// Kernel taps with a `#` metadata line. `time_s` is measured from the
/// kernel's own origin, so the first `delay` taps have negative times.
pub fn kernel_csv(name: &str, k: &DtKernel) -> String {
    let mut out = format!(
        "# kernel={name} ts_s={} delay={} memory={} energy_captured={} precursor_energy={}\n",
        k.ts,
        k.delay,
        k.memory(),
        k.energy_captured,
        k.precursor_energy
    );
    out.push_str("index,time_s,tap_re,tap_im\n");
    for (n, t) in k.taps.iter().enumerate() {
        let time = (n as f64 - k.delay as f64) * k.ts;
        let _ = writeln!(out, "{n},{time},{},{}", t.re, t.im);
    }
    out
}

/// Dense matrix as `row,col,re,im` after a `# P= L= i=` line.
pub fn matrix_csv(m: &CMatrix, p: usize, l: usize, i: i64) -> String {
    let mut out = format!("# P={p} L={l} i={i}\nrow,col,re,im\n");
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            let _ = writeln!(out, "{r},{c},{},{}", v.re, v.im);
        }
    }
    out
}

/// A sequence of equal-length blocks with its sampling context.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockStream {
    pub p: usize,
    pub l: usize,
    pub ts: f64,
    /// Block index of `blocks[0]`.
    pub first_block: i64,
    pub blocks: Vec<CVector>,
}

impl BlockStream {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# P={} L={} Ts={} blocks={} first_block={}\nblock,index,time_s,re,im\n",
            self.p,
            self.l,
            self.ts,
            self.blocks.len(),
            self.first_block
        );
        for (j, b) in self.blocks.iter().enumerate() {
            let i = self.first_block + j as i64;
            for (k, v) in b.iter().enumerate() {
                let t = (i as f64 * self.p as f64 + k as f64) * self.ts;
                let _ = writeln!(out, "{i},{k},{t},{},{}", v.re, v.im);
            }
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, meta) = lines
            .next()
            .ok_or_else(|| Error::Format("empty block-stream file".into()))?;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| Error::Format("line 1: expected a '# P= L= Ts= blocks= first_block=' line".into()))?;
        let mut fields = std::collections::HashMap::new();
        for part in meta.split_whitespace() {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line 1: malformed field {part:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("line 1: missing {k}")))
        };
        let bad = |k: &str| Error::Format(format!("line 1: invalid {k}"));
        let p: usize = get("P")?.parse().map_err(|_| bad("P"))?;
        let l: usize = get("L")?.parse().map_err(|_| bad("L"))?;
        let ts: f64 = get("Ts")?.parse().map_err(|_| bad("Ts"))?;
        let count: usize = get("blocks")?.parse().map_err(|_| bad("blocks"))?;
        let first_block: i64 = get("first_block")?.parse().map_err(|_| bad("first_block"))?;
        if p == 0 || !(ts > 0.0) {
            return Err(Error::Format("line 1: P and Ts must be positive".into()));
        }
        if count.saturating_mul(p) > (1 << 26) {
            return Err(Error::Format("line 1: stream too large".into()));
        }
        match lines.next() {
            Some((_, h)) if h.trim() == "block,index,time_s,re,im" => {}
            _ => return Err(Error::Format("line 2: expected header block,index,time_s,re,im".into())),
        }
        let mut blocks = vec![CVector::zeros(p); count];
        let mut seen = 0usize;
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let row_err = || Error::Format(format!("line {}: malformed row", n + 1));
            if cols.len() != 5 {
                return Err(row_err());
            }
            let i: i64 = cols[0].trim().parse().map_err(|_| row_err())?;
            let k: usize = cols[1].trim().parse().map_err(|_| row_err())?;
            let re: f64 = cols[3].trim().parse().map_err(|_| row_err())?;
            let im: f64 = cols[4].trim().parse().map_err(|_| row_err())?;
            let j = i - first_block;
            if j < 0 || j as usize >= count || k >= p {
                return Err(Error::Format(format!("line {}: block {i} sample {k} out of range", n + 1)));
            }
            blocks[j as usize][k] = C64::new(re, im);
            seen += 1;
        }
        if seen != count * p {
            return Err(Error::Format(format!("expected {} samples, found {seen}", count * p)));
        }
        Ok(Self {
            p,
            l,
            ts,
            first_block,
            blocks,
        })
    }
}

/// Reads back a file written by [`kernel_csv`].
pub fn parse_kernel_csv(text: &str) -> Result<DtKernel> {
    let mut lines = text.lines().enumerate();
    let (_, meta) = lines.next().ok_or_else(|| Error::Format("empty kernel file".into()))?;
    let meta = meta
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("line 1: expected a metadata line".into()))?;
    let mut ts = None;
    let mut delay = 0usize;
    for part in meta.split_whitespace() {
        match part.split_once('=') {
            Some(("ts_s", v)) => ts = v.parse::<f64>().ok(),
            Some(("delay", v)) => delay = v.parse().map_err(|_| Error::Format("line 1: invalid delay".into()))?,
            _ => {}
        }
    }
    let ts = ts.filter(|t| *t > 0.0).ok_or_else(|| Error::Format("line 1: missing ts_s".into()))?;
    match lines.next() {
        Some((_, h)) if h.trim() == "index,time_s,tap_re,tap_im" => {}
        _ => return Err(Error::Format("line 2: expected header index,time_s,tap_re,tap_im".into())),
    }
    let mut taps = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let row_err = || Error::Format(format!("line {}: malformed row", n + 1));
        if cols.len() != 4 {
            return Err(row_err());
        }
        let idx: usize = cols[0].trim().parse().map_err(|_| row_err())?;
        if idx != taps.len() {
            return Err(Error::Format(format!("line {}: taps out of order", n + 1)));
        }
        let re: f64 = cols[2].trim().parse().map_err(|_| row_err())?;
        let im: f64 = cols[3].trim().parse().map_err(|_| row_err())?;
        taps.push(C64::new(re, im));
    }
    let mut k = DtKernel::from_taps(taps, ts);
    k.delay = delay;
    Ok(k)
}
