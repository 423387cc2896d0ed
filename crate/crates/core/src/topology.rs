//! Text format for link descriptions and cable libraries.
//!
//! Documents are line oriented: `[section]` headers followed by
//! `key = value` lines, with `#` starting a comment. A topology holds one
//! `[signal]` section, exactly one `[termination]`, an optional `[lptv]`, and
//! one `[element]` block per network element in source-to-load order.
//!
//! ```text
//! [signal]
//! filter = raised_cosine
//! bandwidth_hz = 2000000
//! rolloff = 0.5
//! ts_s = 0.000000125
//!
//! [termination]
//! source_z_kind = resistor
//! source_r_ohm = 100
//! load_z_kind = resistor
//! load_r_ohm = 100
//!
//! [element]
//! kind = cable
//! cable = AWG24
//! length_ft = 1000
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, ParseError, Result};
use crate::kernels::{FilterKind, FilterSpec, SynthesisConfig};
use crate::lptv::{Placement, TvImpedance, TvProfile};
use crate::twoport::{CableParams, ImpedanceSpec};

/// Inputs larger than this are rejected before parsing.
pub const MAX_DOCUMENT_BYTES: usize = 1 << 20;

const BUILTIN_CABLES: &str = include_str!("../data/cables.conf");

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
    key_col: usize,
    value_col: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct Section {
    name: String,
    line: usize,
    col: usize,
    entries: Vec<Entry>,
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

fn column_of(line: &str, byte: usize) -> usize {
    line[..byte].chars().count() + 1
}

fn lex(text: &str) -> std::result::Result<(Vec<Section>, usize), ParseError> {
    let mut sections: Vec<Section> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(close) = rest.find(']') else {
                return Err(ParseError::new(line_no, column_of(raw, lead + trimmed.len()) , "unterminated section header")
                    .expecting(&["]"]));
            };
            let name = rest[..close].trim();
            let after = rest[close + 1..].trim();
            if !after.is_empty() {
                let pos = raw.len() - raw.trim_start().len() + 1 + close + 1;
                return Err(ParseError::new(line_no, column_of(raw, pos.min(raw.len())), "unexpected text after section header")
                    .expecting(&["end of line"]));
            }
            if !is_ident(name) {
                return Err(ParseError::new(line_no, column_of(raw, lead + 1), format!("invalid section name {name:?}"))
                    .expecting(&["section name"]));
            }
            sections.push(Section {
                name: name.to_string(),
                line: line_no,
                col: column_of(raw, lead),
                entries: Vec::new(),
            });
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(ParseError::new(line_no, column_of(raw, lead), "expected a key = value pair")
                .expecting(&["=", "[section]"]));
        };
        let key = content[..eq].trim();
        if !is_ident(key) {
            return Err(ParseError::new(line_no, column_of(raw, lead), format!("invalid key {key:?}"))
                .expecting(&["key"]));
        }
        let value_raw = &content[eq + 1..];
        let value = value_raw.trim();
        let value_lead = value_raw.len() - value_raw.trim_start().len();
        let value_col = column_of(raw, (eq + 1 + value_lead).min(raw.len()));
        let Some(section) = sections.last_mut() else {
            return Err(ParseError::new(line_no, column_of(raw, lead), "key outside of any section")
                .expecting(&["[section]"]));
        };
        section.entries.push(Entry {
            key: key.to_string(),
            value: value.to_string(),
            line: line_no,
            key_col: column_of(raw, lead),
            value_col,
        });
    }
    Ok((sections, last_line))
}

/// Checked access to the keys of one section.
struct Fields<'a> {
    section: &'a Section,
    map: BTreeMap<&'a str, &'a Entry>,
}

impl<'a> Fields<'a> {
    fn new(section: &'a Section, allowed: &[&str]) -> std::result::Result<Self, ParseError> {
        let mut map = BTreeMap::new();
        for e in &section.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(ParseError::new(e.line, e.key_col, format!(
                    "unknown key {:?} in [{}]",
                    e.key, section.name
                ))
                .expecting(allowed));
            }
            if map.insert(e.key.as_str(), e).is_some() {
                return Err(ParseError::new(e.line, e.key_col, format!("duplicate key {:?}", e.key)));
            }
        }
        Ok(Self { section, map })
    }

    fn missing(&self, key: &str) -> ParseError {
        ParseError::new(self.section.line, self.section.col, format!(
            "[{}] is missing required key {key:?}",
            self.section.name
        ))
        .expecting(&[key])
    }

    fn text(&self, key: &str) -> Option<&'a Entry> {
        self.map.get(key).copied()
    }

    fn required_text(&self, key: &str) -> std::result::Result<&'a Entry, ParseError> {
        self.text(key).ok_or_else(|| self.missing(key))
    }

    fn number(&self, key: &str) -> std::result::Result<Option<(f64, &'a Entry)>, ParseError> {
        let Some(e) = self.text(key) else { return Ok(None) };
        match e.value.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some((v, e))),
            _ => Err(ParseError::new(e.line, e.value_col, format!("{key} must be a finite number, got {:?}", e.value))
                .expecting(&["number"])),
        }
    }

    fn required_number(&self, key: &str) -> std::result::Result<(f64, &'a Entry), ParseError> {
        self.number(key)?.ok_or_else(|| self.missing(key))
    }

    fn positive(&self, key: &str) -> std::result::Result<f64, ParseError> {
        let (v, e) = self.required_number(key)?;
        if v <= 0.0 {
            return Err(ParseError::new(e.line, e.value_col, format!("{key} must be positive, got {v}")));
        }
        Ok(v)
    }

    fn nonnegative(&self, key: &str) -> std::result::Result<f64, ParseError> {
        let (v, e) = self.required_number(key)?;
        if v < 0.0 {
            return Err(ParseError::new(e.line, e.value_col, format!("{key} must be nonnegative, got {v}")));
        }
        Ok(v)
    }

    fn optional_nonnegative(&self, key: &str) -> std::result::Result<Option<f64>, ParseError> {
        match self.number(key)? {
            None => Ok(None),
            Some((v, e)) if v < 0.0 => Err(ParseError::new(e.line, e.value_col, format!("{key} must be nonnegative, got {v}"))),
            Some((v, _)) => Ok(Some(v)),
        }
    }

    fn integer(&self, key: &str) -> std::result::Result<Option<usize>, ParseError> {
        let Some(e) = self.text(key) else { return Ok(None) };
        e.value.parse::<usize>().map(Some).map_err(|_| {
            ParseError::new(e.line, e.value_col, format!("{key} must be a nonnegative integer, got {:?}", e.value))
                .expecting(&["integer"])
        })
    }

    fn choice(&self, key: &str, options: &[&str]) -> std::result::Result<Option<(String, &'a Entry)>, ParseError> {
        let Some(e) = self.text(key) else { return Ok(None) };
        if options.contains(&e.value.as_str()) {
            Ok(Some((e.value.clone(), e)))
        } else {
            Err(ParseError::new(e.line, e.value_col, format!("unknown {key} {:?}", e.value)).expecting(options))
        }
    }
}

/// Named cable constants, as read from a library file.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CableLibrary {
    cables: BTreeMap<String, CableParams>,
}

const CABLE_KEYS: [&str; 5] = ["r0_ohm_per_ft", "l0_h_per_ft", "c0_f_per_ft", "g0_s_per_ft", "skin_freq_hz"];

impl CableLibrary {
    /// The library shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CABLES).expect("bundled cable library is well formed")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (sections, _) = lex(text)?;
        let mut cables = BTreeMap::new();
        for s in &sections {
            let f = Fields::new(s, &CABLE_KEYS)?;
            let params = CableParams {
                label: s.name.clone(),
                r0: f.nonnegative("r0_ohm_per_ft")?,
                l0: f.positive("l0_h_per_ft")?,
                c0: f.positive("c0_f_per_ft")?,
                g0: f.nonnegative("g0_s_per_ft")?,
                skin_freq: f.positive("skin_freq_hz")?,
            };
            if cables.insert(s.name.clone(), params).is_some() {
                return Err(ParseError::new(s.line, s.col, format!("cable {:?} defined twice", s.name)).into());
            }
        }
        Ok(Self { cables })
    }

    pub fn insert(&mut self, params: CableParams) {
        self.cables.insert(params.label.clone(), params);
    }

    pub fn get(&self, label: &str) -> Option<&CableParams> {
        self.cables.get(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.cables.keys().map(|s| s.as_str())
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.cables.values().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{}]", c.label);
            let _ = writeln!(out, "r0_ohm_per_ft = {}", c.r0);
            let _ = writeln!(out, "l0_h_per_ft = {}", c.l0);
            let _ = writeln!(out, "c0_f_per_ft = {}", c.c0);
            let _ = writeln!(out, "g0_s_per_ft = {}", c.g0);
            let _ = writeln!(out, "skin_freq_hz = {}", c.skin_freq);
        }
        out
    }
}

/// Sampling and filtering settings.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSettings {
    pub filter: FilterKind,
    pub bandwidth_hz: f64,
    pub rolloff: f64,
    pub ts_s: f64,
    pub block_p: Option<usize>,
    pub carrier_hz: f64,
    pub energy_threshold: f64,
}

impl SignalSettings {
    pub fn filter_spec(&self) -> FilterSpec {
        match self.filter {
            FilterKind::None => FilterSpec::none(),
            FilterKind::Brickwall => FilterSpec::brickwall(self.bandwidth_hz),
            FilterKind::RaisedCosine => FilterSpec::raised_cosine(self.bandwidth_hz, self.rolloff),
        }
    }

    /// Identical transmit and receive filters.
    pub fn synthesis_config(&self) -> SynthesisConfig {
        let mut cfg = SynthesisConfig::new(self.ts_s, self.filter_spec(), self.energy_threshold);
        cfg.carrier_hz = self.carrier_hz;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TerminationSpec {
    pub source: ImpedanceSpec,
    pub load: ImpedanceSpec,
}

/// Time-varying impedance models expressible in a document.
#[derive(Clone, Debug, PartialEq)]
pub enum TvModel {
    TwoState { r1_ohm: f64, r2_ohm: f64, duty: f64 },
    Cosine { r_dc_ohm: f64, r_ac_ohm: f64, phase_rad: f64 },
    /// Resistances over equal fractions of the period.
    Piecewise(Vec<f64>),
}

impl TvModel {
    pub fn profile(&self) -> TvProfile {
        match self {
            TvModel::TwoState { r1_ohm, r2_ohm, duty } => TvProfile::TwoState {
                first: ImpedanceSpec::Resistor { r: *r1_ohm },
                second: ImpedanceSpec::Resistor { r: *r2_ohm },
                duty: *duty,
            },
            TvModel::Cosine {
                r_dc_ohm,
                r_ac_ohm,
                phase_rad,
            } => TvProfile::Cosine {
                r_dc: *r_dc_ohm,
                r_ac: *r_ac_ohm,
                phase: *phase_rad,
            },
            TvModel::Piecewise(rs) => TvProfile::Piecewise(rs.iter().map(|&r| ImpedanceSpec::Resistor { r }).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ElementSpec {
    Cable {
        cable: CableParams,
        length_ft: f64,
    },
    Shunt(ImpedanceSpec),
    Series(ImpedanceSpec),
    BridgedTap {
        cable: CableParams,
        length_ft: f64,
        termination: ImpedanceSpec,
    },
    TvShunt {
        model: TvModel,
        f0_hz: f64,
    },
    TvSeries {
        model: TvModel,
        f0_hz: f64,
    },
}

impl ElementSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ElementSpec::Cable { .. } => "cable",
            ElementSpec::Shunt(_) => "shunt",
            ElementSpec::Series(_) => "series",
            ElementSpec::BridgedTap { .. } => "bridged_tap",
            ElementSpec::TvShunt { .. } => "tv_shunt",
            ElementSpec::TvSeries { .. } => "tv_series",
        }
    }

    pub fn is_time_varying(&self) -> bool {
        matches!(self, ElementSpec::TvShunt { .. } | ElementSpec::TvSeries { .. })
    }

    /// The time-varying impedance of a `tv_*` element.
    pub fn tv_impedance(&self) -> Option<Result<TvImpedance>> {
        match self {
            ElementSpec::TvShunt { model, f0_hz } => Some(TvImpedance::new(model.profile(), Placement::Shunt, *f0_hz)),
            ElementSpec::TvSeries { model, f0_hz } => Some(TvImpedance::new(model.profile(), Placement::Series, *f0_hz)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LptvSettings {
    pub harmonic_order: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopologyDoc {
    pub signal: SignalSettings,
    pub termination: TerminationSpec,
    pub elements: Vec<ElementSpec>,
    pub lptv: Option<LptvSettings>,
}

const SIGNAL_KEYS: [&str; 7] = [
    "filter",
    "bandwidth_hz",
    "rolloff",
    "ts_s",
    "block_p",
    "carrier_hz",
    "energy_threshold",
];
const TERMINATION_KEYS: [&str; 8] = [
    "source_z_kind",
    "source_r_ohm",
    "source_c_f",
    "source_l_h",
    "load_z_kind",
    "load_r_ohm",
    "load_c_f",
    "load_l_h",
];
const ELEMENT_KEYS: [&str; 16] = [
    "kind",
    "cable",
    "length_ft",
    "z_kind",
    "r_ohm",
    "c_f",
    "l_h",
    "model",
    "r1_ohm",
    "r2_ohm",
    "duty",
    "r_dc_ohm",
    "r_ac_ohm",
    "phase_rad",
    "r_table_ohm",
    "f0_hz",
];
const ELEMENT_KINDS: [&str; 6] = ["cable", "shunt", "series", "bridged_tap", "tv_shunt", "tv_series"];
const Z_KINDS: [&str; 7] = [
    "resistor",
    "capacitor",
    "inductor",
    "open",
    "short",
    "series_rlc",
    "parallel_rc",
];
const FILTERS: [&str; 3] = ["raised_cosine", "brickwall", "none"];
const TV_MODELS: [&str; 3] = ["two_state", "cosine", "piecewise"];

fn impedance(f: &Fields, prefix: &str) -> std::result::Result<ImpedanceSpec, ParseError> {
    let key = |k: &str| format!("{prefix}{k}");
    let (kind, _) = f
        .choice(&key("z_kind"), &Z_KINDS)?
        .ok_or_else(|| f.missing(&key("z_kind")))?;
    let r = || f.nonnegative(&key("r_ohm"));
    let spec = match kind.as_str() {
        "resistor" => ImpedanceSpec::Resistor { r: r()? },
        "capacitor" => ImpedanceSpec::Capacitor {
            c: f.positive(&key("c_f"))?,
        },
        "inductor" => ImpedanceSpec::Inductor {
            l: f.positive(&key("l_h"))?,
        },
        "open" => ImpedanceSpec::Open,
        "short" => ImpedanceSpec::Short,
        "series_rlc" => ImpedanceSpec::SeriesRlc {
            r: r()?,
            l: f.optional_nonnegative(&key("l_h"))?.unwrap_or(0.0),
            c: f.optional_nonnegative(&key("c_f"))?.unwrap_or(0.0),
        },
        _ => ImpedanceSpec::ParallelRc {
            r: f.positive(&key("r_ohm"))?,
            c: f.nonnegative(&key("c_f"))?,
        },
    };
    let used: &[&str] = match kind.as_str() {
        "resistor" => &["r_ohm"],
        "capacitor" => &["c_f"],
        "inductor" => &["l_h"],
        "open" | "short" => &[],
        "series_rlc" => &["r_ohm", "l_h", "c_f"],
        _ => &["r_ohm", "c_f"],
    };
    for k in ["r_ohm", "c_f", "l_h"] {
        if !used.contains(&k) {
            if let Some(e) = f.text(&key(k)) {
                return Err(ParseError::new(e.line, e.key_col, format!(
                    "{} does not apply to z_kind {kind}",
                    key(k)
                )));
            }
        }
    }
    Ok(spec)
}

fn reject_unused(f: &Fields, used: &[&str], kind: &str) -> std::result::Result<(), ParseError> {
    for e in &f.section.entries {
        if e.key != "kind" && !used.contains(&e.key.as_str()) {
            return Err(ParseError::new(e.line, e.key_col, format!("key {:?} does not apply to {kind} elements", e.key))
                .expecting(used));
        }
    }
    Ok(())
}

fn cable_ref(f: &Fields, library: &CableLibrary) -> std::result::Result<CableParams, ParseError> {
    let e = f.required_text("cable")?;
    library.get(&e.value).cloned().ok_or_else(|| {
        let labels: Vec<&str> = library.labels().collect();
        ParseError::new(e.line, e.value_col, format!("unknown cable label {:?}", e.value)).expecting(&labels)
    })
}

fn tv_model(f: &Fields) -> std::result::Result<(TvModel, Vec<&'static str>), ParseError> {
    let (model, _) = f.choice("model", &TV_MODELS)?.ok_or_else(|| f.missing("model"))?;
    let model = match model.as_str() {
        "two_state" => {
            let (duty, e) = f.required_number("duty")?;
            if !(duty > 0.0 && duty < 1.0) {
                return Err(ParseError::new(e.line, e.value_col, format!("duty must lie in (0, 1), got {duty}")));
            }
            (
                TvModel::TwoState {
                    r1_ohm: f.nonnegative("r1_ohm")?,
                    r2_ohm: f.nonnegative("r2_ohm")?,
                    duty,
                },
                vec!["model", "r1_ohm", "r2_ohm", "duty", "f0_hz"],
            )
        }
        "cosine" => {
            let r_dc = f.nonnegative("r_dc_ohm")?;
            let (r_ac, e) = f.required_number("r_ac_ohm")?;
            if r_ac.abs() > r_dc {
                return Err(ParseError::new(e.line, e.value_col, format!(
                    "|r_ac_ohm| = {} exceeds r_dc_ohm = {r_dc}; the resistance would go negative",
                    r_ac.abs()
                )));
            }
            let phase = f.number("phase_rad")?.map_or(0.0, |(v, _)| v);
            (
                TvModel::Cosine {
                    r_dc_ohm: r_dc,
                    r_ac_ohm: r_ac,
                    phase_rad: phase,
                },
                vec!["model", "r_dc_ohm", "r_ac_ohm", "phase_rad", "f0_hz"],
            )
        }
        _ => {
            let e = f.required_text("r_table_ohm")?;
            let mut rs = Vec::new();
            for part in e.value.split(',') {
                match part.trim().parse::<f64>() {
                    Ok(v) if v.is_finite() && v >= 0.0 => rs.push(v),
                    _ => {
                        return Err(ParseError::new(e.line, e.value_col, format!(
                            "r_table_ohm entries must be nonnegative numbers, got {:?}",
                            part.trim()
                        ))
                        .expecting(&["comma-separated numbers"]))
                    }
                }
            }
            (TvModel::Piecewise(rs), vec!["model", "r_table_ohm", "f0_hz"])
        }
    };
    Ok(model)
}

fn element(s: &Section, library: &CableLibrary) -> std::result::Result<ElementSpec, ParseError> {
    let f = Fields::new(s, &ELEMENT_KEYS)?;
    let (kind, _) = f.choice("kind", &ELEMENT_KINDS)?.ok_or_else(|| f.missing("kind"))?;
    let spec = match kind.as_str() {
        "cable" => {
            reject_unused(&f, &["cable", "length_ft"], &kind)?;
            ElementSpec::Cable {
                cable: cable_ref(&f, library)?,
                length_ft: f.positive("length_ft")?,
            }
        }
        "shunt" | "series" => {
            reject_unused(&f, &["z_kind", "r_ohm", "c_f", "l_h"], &kind)?;
            let z = impedance(&f, "")?;
            let at = f.required_text("z_kind")?;
            if kind == "shunt" {
                if z == ImpedanceSpec::Short {
                    return Err(ParseError::new(at.line, at.value_col, "a shorted shunt has infinite admittance"));
                }
                ElementSpec::Shunt(z)
            } else {
                if z == ImpedanceSpec::Open {
                    return Err(ParseError::new(at.line, at.value_col, "an open series element has infinite impedance"));
                }
                ElementSpec::Series(z)
            }
        }
        "bridged_tap" => {
            reject_unused(&f, &["cable", "length_ft", "z_kind", "r_ohm", "c_f", "l_h"], &kind)?;
            ElementSpec::BridgedTap {
                cable: cable_ref(&f, library)?,
                length_ft: f.positive("length_ft")?,
                termination: impedance(&f, "")?,
            }
        }
        _ => {
            let (model, used) = tv_model(&f)?;
            reject_unused(&f, &used, &kind)?;
            let f0_hz = f.positive("f0_hz")?;
            if kind == "tv_shunt" {
                let zero = match &model {
                    TvModel::TwoState { r1_ohm, r2_ohm, .. } => *r1_ohm == 0.0 || *r2_ohm == 0.0,
                    TvModel::Cosine { r_dc_ohm, r_ac_ohm, .. } => r_dc_ohm - r_ac_ohm.abs() <= 0.0,
                    TvModel::Piecewise(rs) => rs.contains(&0.0),
                };
                if zero {
                    return Err(ParseError::new(s.line, s.col, "a time-varying shunt may not reach zero ohms"));
                }
                ElementSpec::TvShunt { model, f0_hz }
            } else {
                ElementSpec::TvSeries { model, f0_hz }
            }
        }
    };
    Ok(spec)
}

fn signal(s: &Section) -> std::result::Result<SignalSettings, ParseError> {
    let f = Fields::new(s, &SIGNAL_KEYS)?;
    let filter = match f.choice("filter", &FILTERS)?.map(|(v, _)| v).as_deref() {
        None | Some("raised_cosine") => FilterKind::RaisedCosine,
        Some("brickwall") => FilterKind::Brickwall,
        _ => FilterKind::None,
    };
    let (bandwidth_hz, rolloff) = match filter {
        FilterKind::None => (
            f.optional_nonnegative("bandwidth_hz")?.unwrap_or(0.0),
            f.optional_nonnegative("rolloff")?.unwrap_or(0.0),
        ),
        FilterKind::Brickwall => (f.positive("bandwidth_hz")?, f.optional_nonnegative("rolloff")?.unwrap_or(0.0)),
        FilterKind::RaisedCosine => (f.positive("bandwidth_hz")?, f.nonnegative("rolloff")?),
    };
    if let Some((r, e)) = f.number("rolloff")? {
        if r > 1.0 {
            return Err(ParseError::new(e.line, e.value_col, format!("rolloff must lie in [0, 1], got {r}")));
        }
    }
    let energy_threshold = match f.number("energy_threshold")? {
        None => 0.9999,
        Some((v, e)) => {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ParseError::new(e.line, e.value_col, format!("energy_threshold must lie in (0, 1], got {v}")));
            }
            v
        }
    };
    let block_p = f.integer("block_p")?;
    if let (Some(p), Some(e)) = (block_p, f.text("block_p")) {
        if p < 2 {
            return Err(ParseError::new(e.line, e.value_col, "block_p must be at least 2"));
        }
    }
    Ok(SignalSettings {
        filter,
        bandwidth_hz,
        rolloff,
        ts_s: f.positive("ts_s")?,
        block_p,
        carrier_hz: f.optional_nonnegative("carrier_hz")?.unwrap_or(0.0),
        energy_threshold,
    })
}

fn termination(s: &Section) -> std::result::Result<TerminationSpec, ParseError> {
    let f = Fields::new(s, &TERMINATION_KEYS)?;
    Ok(TerminationSpec {
        source: impedance(&f, "source_")?,
        load: impedance(&f, "load_")?,
    })
}

fn lptv(s: &Section) -> std::result::Result<LptvSettings, ParseError> {
    let f = Fields::new(s, &["harmonic_order"])?;
    Ok(LptvSettings {
        harmonic_order: f.integer("harmonic_order")?,
    })
}

/// Parses raw bytes; non-UTF-8 input and oversized documents become
/// positioned errors.
pub fn parse_bytes(bytes: &[u8], library: &CableLibrary) -> Result<TopologyDoc> {
    if bytes.len() > MAX_DOCUMENT_BYTES {
        return Err(ParseError::new(1, 1, format!(
            "document is {} bytes; the limit is {MAX_DOCUMENT_BYTES}",
            bytes.len()
        ))
        .into());
    }
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text, library),
        Err(e) => {
            let good = &bytes[..e.valid_up_to()];
            let line = good.iter().filter(|&&b| b == b'\n').count() + 1;
            let start = good.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let col = std::str::from_utf8(&good[start..]).map_or(1, |s| s.chars().count() + 1);
            Err(ParseError::new(line, col, "invalid UTF-8").into())
        }
    }
}

pub fn parse(text: &str, library: &CableLibrary) -> Result<TopologyDoc> {
    if text.len() > MAX_DOCUMENT_BYTES {
        return parse_bytes(text.as_bytes(), library);
    }
    let (sections, last_line) = lex(text)?;
    let mut sig = None;
    let mut term = None;
    let mut lp = None;
    let mut elements = Vec::new();
    for s in &sections {
        match s.name.as_str() {
            "signal" => {
                if sig.is_some() {
                    return Err(ParseError::new(s.line, s.col, "duplicate [signal] section").into());
                }
                sig = Some(signal(s)?);
            }
            "termination" => {
                if term.is_some() {
                    return Err(ParseError::new(s.line, s.col, "duplicate [termination] section").into());
                }
                term = Some(termination(s)?);
            }
            "lptv" => {
                if lp.is_some() {
                    return Err(ParseError::new(s.line, s.col, "duplicate [lptv] section").into());
                }
                lp = Some(lptv(s)?);
            }
            "element" => elements.push(element(s, library)?),
            other => {
                return Err(ParseError::new(s.line, s.col, format!("unknown section [{other}]"))
                    .expecting(&["signal", "termination", "lptv", "element"])
                    .into())
            }
        }
    }
    let end = last_line + 1;
    let signal = sig.ok_or_else(|| ParseError::new(end, 1, "missing [signal] section").expecting(&["[signal]"]))?;
    let termination = term.ok_or_else(|| ParseError::new(end, 1, "missing [termination] section").expecting(&["[termination]"]))?;
    if elements.is_empty() {
        return Err(ParseError::new(end, 1, "at least one [element] is required").expecting(&["[element]"]).into());
    }
    let doc = TopologyDoc {
        signal,
        termination,
        elements,
        lptv: lp,
    };
    doc.check_consistency()?;
    Ok(doc)
}

fn write_impedance(out: &mut String, prefix: &str, z: &ImpedanceSpec) -> Result<()> {
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{prefix}{k} = {v}");
    };
    match z {
        ImpedanceSpec::Resistor { r } => {
            kv("z_kind", "resistor".into());
            kv("r_ohm", r.to_string());
        }
        ImpedanceSpec::Capacitor { c } => {
            kv("z_kind", "capacitor".into());
            kv("c_f", c.to_string());
        }
        ImpedanceSpec::Inductor { l } => {
            kv("z_kind", "inductor".into());
            kv("l_h", l.to_string());
        }
        ImpedanceSpec::Open => kv("z_kind", "open".into()),
        ImpedanceSpec::Short => kv("z_kind", "short".into()),
        ImpedanceSpec::SeriesRlc { r, l, c } => {
            kv("z_kind", "series_rlc".into());
            kv("r_ohm", r.to_string());
            kv("l_h", l.to_string());
            kv("c_f", c.to_string());
        }
        ImpedanceSpec::ParallelRc { r, c } => {
            kv("z_kind", "parallel_rc".into());
            kv("r_ohm", r.to_string());
            kv("c_f", c.to_string());
        }
        ImpedanceSpec::Table(_) => {
            return Err(Error::Format("tabulated impedances cannot be written to a topology document".into()))
        }
    }
    Ok(())
}

impl TopologyDoc {
    /// Cross-section rules: all time-varying elements share one `f0_hz`.
    pub fn check_consistency(&self) -> Result<()> {
        let f0s: Vec<f64> = self
            .elements
            .iter()
            .filter_map(|e| match e {
                ElementSpec::TvShunt { f0_hz, .. } | ElementSpec::TvSeries { f0_hz, .. } => Some(*f0_hz),
                _ => None,
            })
            .collect();
        if f0s.iter().any(|f| *f != f0s[0]) {
            return Err(Error::InvalidParameter(
                "all time-varying elements must share the same f0_hz".into(),
            ));
        }
        Ok(())
    }

    pub fn is_time_varying(&self) -> bool {
        self.elements.iter().any(|e| e.is_time_varying())
    }

    /// Fundamental of the time-varying elements, if any.
    pub fn f0_hz(&self) -> Option<f64> {
        self.elements.iter().find_map(|e| match e {
            ElementSpec::TvShunt { f0_hz, .. } | ElementSpec::TvSeries { f0_hz, .. } => Some(*f0_hz),
            _ => None,
        })
    }

    /// Canonical text: fixed section and key order, shortest round-trip numbers.
    pub fn serialize(&self) -> Result<String> {
        let mut out = String::new();
        let s = &self.signal;
        out.push_str("[signal]\n");
        let filter = match s.filter {
            FilterKind::RaisedCosine => "raised_cosine",
            FilterKind::Brickwall => "brickwall",
            FilterKind::None => "none",
        };
        let _ = writeln!(out, "filter = {filter}");
        let _ = writeln!(out, "bandwidth_hz = {}", s.bandwidth_hz);
        let _ = writeln!(out, "rolloff = {}", s.rolloff);
        let _ = writeln!(out, "ts_s = {}", s.ts_s);
        if let Some(p) = s.block_p {
            let _ = writeln!(out, "block_p = {p}");
        }
        let _ = writeln!(out, "carrier_hz = {}", s.carrier_hz);
        let _ = writeln!(out, "energy_threshold = {}", s.energy_threshold);

        out.push_str("\n[termination]\n");
        write_impedance(&mut out, "source_", &self.termination.source)?;
        write_impedance(&mut out, "load_", &self.termination.load)?;

        if let Some(l) = &self.lptv {
            out.push_str("\n[lptv]\n");
            if let Some(m) = l.harmonic_order {
                let _ = writeln!(out, "harmonic_order = {m}");
            }
        }

        for e in &self.elements {
            out.push_str("\n[element]\n");
            let _ = writeln!(out, "kind = {}", e.kind());
            match e {
                ElementSpec::Cable { cable, length_ft } => {
                    let _ = writeln!(out, "cable = {}", cable.label);
                    let _ = writeln!(out, "length_ft = {length_ft}");
                }
                ElementSpec::Shunt(z) | ElementSpec::Series(z) => write_impedance(&mut out, "", z)?,
                ElementSpec::BridgedTap {
                    cable,
                    length_ft,
                    termination,
                } => {
                    let _ = writeln!(out, "cable = {}", cable.label);
                    let _ = writeln!(out, "length_ft = {length_ft}");
                    write_impedance(&mut out, "", termination)?;
                }
                ElementSpec::TvShunt { model, f0_hz } | ElementSpec::TvSeries { model, f0_hz } => {
                    match model {
                        TvModel::TwoState { r1_ohm, r2_ohm, duty } => {
                            let _ = writeln!(out, "model = two_state");
                            let _ = writeln!(out, "r1_ohm = {r1_ohm}");
                            let _ = writeln!(out, "r2_ohm = {r2_ohm}");
                            let _ = writeln!(out, "duty = {duty}");
                        }
                        TvModel::Cosine {
                            r_dc_ohm,
                            r_ac_ohm,
                            phase_rad,
                        } => {
                            let _ = writeln!(out, "model = cosine");
                            let _ = writeln!(out, "r_dc_ohm = {r_dc_ohm}");
                            let _ = writeln!(out, "r_ac_ohm = {r_ac_ohm}");
                            let _ = writeln!(out, "phase_rad = {phase_rad}");
                        }
                        TvModel::Piecewise(rs) => {
                            let _ = writeln!(out, "model = piecewise");
                            let list: Vec<String> = rs.iter().map(|r| r.to_string()).collect();
                            let _ = writeln!(out, "r_table_ohm = {}", list.join(", "));
                        }
                    }
                    let _ = writeln!(out, "f0_hz = {f0_hz}");
                }
            }
        }
        Ok(out)
    }
}
