//! Tool configuration: a strict, flat `key = value` format with sections.
//!
//! ```text
//! output_dir = out
//!
//! [device]
//! mu_cox = 200u
//! w = 20um
//! vth0 = 0.5V
//! flicker_corner = 1MHz
//! ...
//!
//! [offsets]
//! hz = 100, 300, 6k, 10k, 100k, 1M
//! ```
//!
//! Numbers take an optional SI prefix (`f p n u µ m k M G T`) followed by
//! an optional unit; the unit, when present, must match the field (`Hz`,
//! `V`, `F`, `H`, `Ohm`, `K`, `s`, `m`). A bare prefix letter is always a
//! prefix, so `1m` is 1e-3. `#` and `;` start comments. Unknown sections,
//! unknown keys, duplicates and missing mandatory keys are errors carrying
//! the line number.
//!
//! The supply voltage of the simulator is the steady-state `vdc0`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design::{feedback_synthesize, FeedbackRealization};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::metrics::TankParams;
use crate::regions::SteadyStateConfig;
use crate::sim::{scaled_offsets, FlickerSynthConfig, NoiseEnable, SimConfig};

/// Default coupling capacitance of the body feedback (F).
pub const DEFAULT_CC: f64 = 1e-12;
/// Default simulated length, in periods.
pub const DEFAULT_PERIODS: f64 = 4000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Hz,
    Volt,
    Farad,
    Henry,
    Ohm,
    Kelvin,
    Second,
    Metre,
    Plain,
}

impl Unit {
    fn symbols(&self) -> &'static [&'static str] {
        match self {
            Unit::Hz => &["Hz", "hz"],
            Unit::Volt => &["V"],
            Unit::Farad => &["F"],
            Unit::Henry => &["H"],
            Unit::Ohm => &["Ohm", "ohm", "Ω"],
            Unit::Kelvin => &["K"],
            Unit::Second => &["s"],
            Unit::Metre => &["m"],
            Unit::Plain => &[],
        }
    }
}

const ALL_UNITS: [&str; 12] = ["Hz", "hz", "Ohm", "ohm", "Ω", "V", "F", "H", "K", "s", "m", "A"];

fn prefix(c: &str) -> Option<f64> {
    Some(match c {
        "f" => 1e-15,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" | "µ" | "μ" => 1e-6,
        "m" => 1e-3,
        "k" => 1e3,
        "M" => 1e6,
        "G" => 1e9,
        "T" => 1e12,
        _ => return None,
    })
}

/// Splits `s` into the numeric part and the suffix.
fn split_number(s: &str) -> (&str, &str) {
    let bytes = s.as_bytes();
    let mut end = 0;
    while end < bytes.len() {
        let c = bytes[end] as char;
        let exp_sign = (c == '+' || c == '-') && end > 0 && matches!(bytes[end - 1], b'e' | b'E');
        let exp = (c == 'e' || c == 'E')
            && end > 0
            && bytes.get(end + 1).is_some_and(|n| n.is_ascii_digit() || *n == b'-' || *n == b'+');
        if c.is_ascii_digit() || c == '.' || exp || exp_sign || (end == 0 && (c == '-' || c == '+')) {
            end += 1;
        } else {
            break;
        }
    }
    (&s[..end], s[end..].trim())
}

fn parse_quantity(raw: &str, unit: Unit) -> std::result::Result<f64, String> {
    let (num, suffix) = split_number(raw.trim());
    let mut value: f64 = num.parse().map_err(|_| format!("malformed number '{raw}'"))?;
    if !suffix.is_empty() {
        let scale = if let Some(p) = prefix(suffix) {
            p
        } else {
            let sym = ALL_UNITS
                .iter()
                .find(|u| suffix.ends_with(*u))
                .ok_or_else(|| format!("unrecognised unit '{suffix}' in '{raw}'"))?;
            if !unit.symbols().contains(sym) {
                return Err(format!("unit '{sym}' does not fit this field in '{raw}'"));
            }
            let head = &suffix[..suffix.len() - sym.len()];
            if head.is_empty() {
                1.0
            } else {
                prefix(head).ok_or_else(|| format!("unrecognised prefix '{head}' in '{raw}'"))?
            }
        };
        value *= scale;
    }
    if !value.is_finite() {
        return Err(format!("non-finite value '{raw}'"));
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Parsed but uninterpreted sections; keys can be overridden before
/// building a [`ToolConfig`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    /// Section name → (header line, key → entry); `""` is the top level.
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
    base_dir: Option<PathBuf>,
}

const SECTIONS: [&str; 6] = ["", "device", "steady_state", "tank", "sim", "offsets"];

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)> = BTreeMap::new();
        sections.insert(String::new(), (0, BTreeMap::new()));
        let mut current = String::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse { line, message: format!("malformed section header '{content}'") })?
                    .trim();
                if !SECTIONS.contains(&name) || name.is_empty() {
                    return Err(Error::Parse { line, message: format!("unknown section [{name}]") });
                }
                if sections.contains_key(name) {
                    return Err(Error::Parse { line, message: format!("duplicate section [{name}]") });
                }
                sections.insert(name.to_string(), (line, BTreeMap::new()));
                current = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, message: format!("expected 'key = value', got '{content}'") })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Parse { line, message: format!("empty key or value in '{content}'") });
            }
            let (_, map) = sections.get_mut(&current).expect("current section exists");
            if map.contains_key(key) {
                return Err(Error::Parse { line, message: format!("duplicate key '{key}'") });
            }
            map.insert(key.to_string(), Entry { value: value.to_string(), line, used: false });
        }
        Ok(Self { sections, base_dir: None })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut raw = Self::parse(&text)?;
        raw.base_dir = path.parent().map(Path::to_path_buf);
        Ok(raw)
    }

    pub fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }

    /// Overrides (or adds) `section.key`; `key` alone addresses the top level.
    pub fn set(&mut self, path: &str, value: &str) -> Result<()> {
        let (section, key) = path.split_once('.').unwrap_or(("", path));
        if !SECTIONS.contains(&section) {
            return Err(Error::Argument(format!("unknown section '{section}' in '{path}'")));
        }
        let (_, map) = self.sections.entry(section.to_string()).or_insert((0, BTreeMap::new()));
        map.insert(key.to_string(), Entry { value: value.to_string(), line: 0, used: false });
        Ok(())
    }

    pub fn build(&self) -> Result<ToolConfig> {
        let mut raw = self.clone();
        let cfg = raw.interpret()?;
        for (name, (_, map)) in &raw.sections {
            if let Some((key, e)) = map.iter().find(|(_, e)| !e.used) {
                let full = if name.is_empty() { key.clone() } else { format!("{name}.{key}") };
                return Err(Error::Parse { line: e.line, message: format!("unknown key '{full}'") });
            }
        }
        Ok(cfg)
    }

    fn section_line(&self, section: &str) -> usize {
        self.sections.get(section).map_or(0, |s| s.0)
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let (_, map) = self.sections.get_mut(section)?;
        let e = map.get_mut(key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn opt(&mut self, section: &str, key: &str, unit: Unit) -> Result<Option<f64>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((v, line)) => parse_quantity(&v, unit)
                .map(Some)
                .map_err(|m| Error::Parse { line, message: format!("{key}: {m}") }),
        }
    }

    fn req(&mut self, section: &str, key: &str, unit: Unit) -> Result<f64> {
        if !self.sections.contains_key(section) {
            return Err(Error::Parse { line: 0, message: format!("missing section [{section}] (needed for '{key}')") });
        }
        self.opt(section, key, unit)?.ok_or_else(|| Error::Parse {
            line: self.section_line(section),
            message: format!("missing mandatory key '{key}' in [{section}]"),
        })
    }

    fn opt_bool(&mut self, section: &str, key: &str) -> Result<Option<bool>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "on" => Ok(Some(true)),
                "false" | "no" | "off" => Ok(Some(false)),
                _ => Err(Error::Parse { line, message: format!("{key}: expected a boolean, got '{v}'") }),
            },
        }
    }

    fn opt_uint(&mut self, section: &str, key: &str) -> Result<Option<u64>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse { line, message: format!("{key}: expected an unsigned integer, got '{v}'") }),
        }
    }

    fn opt_list<T>(
        &mut self,
        section: &str,
        key: &str,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<Option<Vec<T>>> {
        match self.take(section, key) {
            None => Ok(None),
            Some((v, line)) => v
                .split(',')
                .map(|item| parse(item.trim()).map_err(|m| Error::Parse { line, message: format!("{key}: {m}") }))
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn interpret(&mut self) -> Result<ToolConfig> {
        let d = "device";
        let device = DeviceParams {
            mu_cox: self.req(d, "mu_cox", Unit::Plain)?,
            cox: self.req(d, "cox", Unit::Plain)?,
            w: self.req(d, "w", Unit::Metre)?,
            l: self.req(d, "l", Unit::Metre)?,
            vth0: self.req(d, "vth0", Unit::Volt)?,
            gamma_body: self.req(d, "gamma_body", Unit::Plain)?,
            phi_s: self.req(d, "phi_s", Unit::Volt)?,
            kf: self.req(d, "kf", Unit::Plain)?,
            gamma_ch: self.req(d, "gamma_ch", Unit::Plain)?,
            temperature: self.req(d, "temperature", Unit::Kelvin)?,
        };
        let flicker_corner_hz = self.req(d, "flicker_corner", Unit::Hz)?;

        let t = "tank";
        let tank = TankParams {
            l: self.req(t, "l", Unit::Henry)?,
            c: self.req(t, "c", Unit::Farad)?,
            rp: self.req(t, "rp", Unit::Ohm)?,
        };

        let s = "steady_state";
        let a = self.req(s, "a", Unit::Volt)?;
        let vdc0 = self.req(s, "vdc0", Unit::Volt)?;
        let a1 = self.req(s, "a1", Unit::Volt)?;
        let vdc1 = self.req(s, "vdc1", Unit::Volt)?;
        let frequency = self.opt(s, "frequency", Unit::Hz)?;
        let omega = match frequency {
            Some(f) => std::f64::consts::TAU * f,
            None => tank.omega0(),
        };
        let steady_state = SteadyStateConfig { a, vdc0, a1, vdc1, omega };

        let f0 = tank.omega0() / std::f64::consts::TAU;
        let offsets_hz = match self.opt_list("offsets", "hz", |x| parse_quantity(x, Unit::Hz))? {
            Some(v) => v,
            None => scaled_offsets(f0),
        };

        let (sim, seeds) = if self.sections.contains_key("sim") {
            self.interpret_sim(&device, &tank, vdc0, f0)?
        } else {
            (None, Vec::new())
        };

        let output_dir = match self.take("", "output_dir") {
            Some((v, _)) => PathBuf::from(v),
            None => PathBuf::from("out"),
        };
        let output_dir = match (&self.base_dir, output_dir.is_relative()) {
            (Some(base), true) => base.join(output_dir),
            _ => output_dir,
        };

        let cfg = ToolConfig { device, flicker_corner_hz, steady_state, tank, sim, seeds, offsets_hz, output_dir };
        cfg.validate()?;
        Ok(cfg)
    }

    fn interpret_sim(
        &mut self,
        device: &DeviceParams,
        tank: &TankParams,
        vdd: f64,
        f0: f64,
    ) -> Result<(Option<SimConfig>, Vec<u64>)> {
        let s = "sim";
        let k = self.opt(s, "k", Unit::Plain)?;
        let vb = self.opt(s, "vb", Unit::Volt)?;
        let cc = self.opt(s, "cc", Unit::Farad)?.unwrap_or(DEFAULT_CC);
        let feedback = match (k, vb) {
            (Some(k), Some(vb)) => Some(FeedbackRealization { k, vb, cc }),
            (Some(k), None) => Some(feedback_synthesize(k, device.vth0, vdd, cc)?),
            (None, Some(_)) => {
                return Err(Error::Parse { line: self.section_line(s), message: "vb given without k".into() })
            }
            (None, None) => None,
        };
        let dt = self.opt(s, "dt", Unit::Second)?.unwrap_or(1.0 / (200.0 * f0));
        let duration = match (self.opt(s, "duration", Unit::Second)?, self.opt(s, "periods", Unit::Plain)?) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse {
                    line: self.section_line(s),
                    message: "give either duration or periods, not both".into(),
                })
            }
            (Some(d), None) => d,
            (None, Some(p)) => p / f0,
            (None, None) => DEFAULT_PERIODS / f0,
        };
        let seed = self.opt_uint(s, "seed")?.unwrap_or(1);
        let seeds = self
            .opt_list(s, "seeds", |x| x.parse::<u64>().map_err(|_| format!("bad seed '{x}'")))?
            .unwrap_or_else(|| vec![seed]);
        let noise_enable = NoiseEnable {
            thermal: self.opt_bool(s, "thermal")?.unwrap_or(true),
            flicker: self.opt_bool(s, "flicker")?.unwrap_or(true),
        };
        let flicker_synth = FlickerSynthConfig {
            num_octave_stages: self.opt_uint(s, "flicker_stages")?.unwrap_or(12) as usize,
            corner_hz: self.opt(s, "flicker_synth_corner", Unit::Hz)?.unwrap_or(f0 / 100.0),
        };
        let cfg = SimConfig {
            tank: *tank,
            device: *device,
            vdd,
            feedback,
            dt,
            duration,
            seed,
            noise_enable,
            flicker_synth,
            initial_kick: self.opt(s, "initial_kick", Unit::Volt)?.unwrap_or(0.1),
            trace_stride: self.opt_uint(s, "trace_stride")?.unwrap_or(10) as usize,
            trace_points: self.opt_uint(s, "trace_points")?.unwrap_or(4000) as usize,
        };
        Ok((Some(cfg), seeds))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolConfig {
    pub device: DeviceParams,
    /// Device flicker corner used by the analytic phase-noise formulas (Hz).
    pub flicker_corner_hz: f64,
    pub steady_state: SteadyStateConfig,
    pub tank: TankParams,
    /// Present when the file has a `[sim]` section.
    pub sim: Option<SimConfig>,
    /// Seeds for `compare`; defaults to the single `[sim] seed`.
    pub seeds: Vec<u64>,
    pub offsets_hz: Vec<f64>,
    pub output_dir: PathBuf,
}

impl ToolConfig {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.tank.validate()?;
        self.steady_state.validate()?;
        if !(self.flicker_corner_hz > 0.0) {
            return Err(Error::Domain(format!("flicker_corner must be positive, got {}", self.flicker_corner_hz)));
        }
        if self.offsets_hz.is_empty()
            || self.offsets_hz.iter().any(|f| !(*f > 0.0))
            || self.offsets_hz.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::Domain("offsets must be positive and strictly increasing".into()));
        }
        if let Some(sim) = &self.sim {
            sim.validate()?;
        }
        Ok(())
    }

    pub fn sim(&self) -> Result<&SimConfig> {
        self.sim.as_ref().ok_or_else(|| Error::Argument("this command needs a [sim] section".into()))
    }
}

pub fn parse_config_str(text: &str) -> Result<ToolConfig> {
    RawConfig::parse(text)?.build()
}

/// Reads and validates a configuration file. Relative `output_dir` values
/// resolve against the file's directory.
pub fn parse_config(path: &Path) -> Result<ToolConfig> {
    RawConfig::from_path(path)?.build()
}
