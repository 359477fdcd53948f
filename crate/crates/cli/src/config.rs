//! Experiment configuration: flat `key = value` text with `[section]`
//! headers and `#` comments. Unknown sections and unknown keys are hard
//! errors; a canonical example lives in `configs/` at the repository
//! root. Values that are lengths or coordinates accept `pi`, `pi/2`,
//! `0.5*pi` and plain decimals.

use anyhow::{anyhow, bail, Context, Result};
use btwave::domain::{BoxDomain, ModeIndex};
use btwave::dynamics::{
    rescale_to_energy, state_from_bump, state_from_modes, state_from_random, Damping, ModelConfig,
    State,
};
use btwave::multiplier::MultiplierSpec;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectorSpec {
    /// `sharp:auto` keeps every retained mode (level `lambda_max + 1/2`).
    Sharp(Option<f64>),
    /// `smooth:auto` sets the level to `lambda_max`, the identity regime.
    Smooth(Option<f64>),
}

impl ProjectorSpec {
    pub fn resolve(&self, domain: &BoxDomain) -> Result<MultiplierSpec> {
        let spec = match self {
            ProjectorSpec::Sharp(level) => {
                MultiplierSpec::sharp(level.unwrap_or(domain.lambda_max() + 0.5))
            }
            ProjectorSpec::Smooth(level) => {
                MultiplierSpec::smooth(level.unwrap_or(domain.lambda_max()))
            }
        };
        spec.map_err(|e| anyhow!("bad projector level: {e}"))
    }

    pub fn at_level(&self, level: f64) -> Result<MultiplierSpec> {
        let spec = match self {
            ProjectorSpec::Sharp(_) => MultiplierSpec::sharp(level),
            ProjectorSpec::Smooth(_) => MultiplierSpec::smooth(level),
        };
        spec.map_err(|e| anyhow!("bad projector level: {e}"))
    }
}

#[derive(Debug, Clone)]
pub enum InitialData {
    /// `index : u coefficient : v coefficient` triples.
    Modes(Vec<(Vec<usize>, f64, f64)>),
    Bump {
        center: Vec<f64>,
        width: Vec<f64>,
        amplitude: f64,
    },
    Random {
        band: f64,
        energy: f64,
    },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub lengths: Vec<f64>,
    pub modes: usize,

    pub quintic: bool,
    pub damping: Damping,
    pub projector: ProjectorSpec,
    /// None = follow the regime (on with the quintic, off without).
    pub potential_in_energy: Option<bool>,
    pub padding: usize,

    pub dt: f64,
    pub t_final: f64,
    pub sample_stride: usize,

    pub initial: InitialData,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,

    // Optional per-subcommand sections.
    pub sweep_levels: Vec<f64>,
    pub multiplier_levels: Vec<f64>,
    pub multiplier_samples: usize,
    pub multiplier_s_orders: Vec<f64>,
    pub multiplier_p: f64,
    pub decay_e0_list: Vec<f64>,
    pub decay_fit_window: (f64, f64),
    pub decay_include_bt: bool,
    pub bt_lambda: f64,
    pub bt_d: f64,
    pub oracle_tolerance: f64,

    /// Raw text, hashed into every output.
    pub raw_text: String,
}

impl ExperimentConfig {
    pub fn domain(&self) -> Result<Arc<BoxDomain>> {
        BoxDomain::new(&self.lengths, self.modes).map_err(|e| anyhow!("bad domain: {e}"))
    }

    pub fn model(&self, domain: &BoxDomain) -> Result<ModelConfig> {
        let mut model = ModelConfig::new(self.quintic, self.damping, self.projector.resolve(domain)?);
        if let Some(flag) = self.potential_in_energy {
            model.potential_in_energy = flag;
        }
        model.padding = self.padding;
        Ok(model)
    }

    /// Builds the configured initial state on `domain` under `model`.
    pub fn initial_state(
        &self,
        domain: &Arc<BoxDomain>,
        model: &ModelConfig,
    ) -> Result<State> {
        let state = match &self.initial {
            InitialData::Modes(list) => {
                let modes: Vec<(ModeIndex, f64, f64)> = list
                    .iter()
                    .map(|(k, cu, cv)| {
                        if k.len() != self.dimension {
                            bail!(
                                "mode index {:?} has {} components, domain is {}-dimensional",
                                k,
                                k.len(),
                                self.dimension
                            );
                        }
                        Ok((ModeIndex::new(k), *cu, *cv))
                    })
                    .collect::<Result<_>>()?;
                state_from_modes(domain, &modes)?
            }
            InitialData::Bump {
                center,
                width,
                amplitude,
            } => {
                if center.len() != self.dimension || width.len() != self.dimension {
                    bail!("bump center/width must have one entry per axis");
                }
                state_from_bump(domain, center, width, *amplitude, self.padding)?
            }
            InitialData::Random { band, energy } => {
                let seed = self
                    .seed
                    .ok_or_else(|| anyhow!("random initial data requires a seed (--seed or [initial] seed)"))?;
                state_from_random(domain, *band, seed, *energy, model)?
            }
        };
        Ok(state)
    }

    /// Same data rescaled to a prescribed energy.
    pub fn initial_state_with_energy(
        &self,
        domain: &Arc<BoxDomain>,
        model: &ModelConfig,
        e0: f64,
    ) -> Result<State> {
        let state = self.initial_state(domain, model)?;
        Ok(rescale_to_energy(&state, e0, model)?)
    }
}

/// Accepts `pi`, `pi/2`, `2*pi`, `0.5*pi`, or a decimal.
fn parse_scalar(s: &str) -> Result<f64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    if t == "pi" {
        return Ok(PI);
    }
    if let Some(rest) = t.strip_prefix("pi/") {
        let d: f64 = rest.trim().parse().context("divisor after pi/")?;
        return Ok(PI / d);
    }
    if let Some(rest) = t.strip_suffix("*pi") {
        let f: f64 = rest.trim().parse().context("factor before *pi")?;
        return Ok(f * PI);
    }
    bail!("cannot parse number {t:?}")
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').map(parse_scalar).collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        other => bail!("expected a boolean, got {other:?}"),
    }
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn split_sections(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| anyhow!("line {}: malformed section header", lineno + 1))?;
            current = name.trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value", lineno + 1))?;
        if current.is_empty() {
            bail!("line {}: key outside any [section]", lineno + 1);
        }
        let prev = sections
            .get_mut(&current)
            .expect("section entry created above")
            .insert(key.trim().to_string(), value.trim().to_string());
        if prev.is_some() {
            bail!("line {}: duplicate key {:?}", lineno + 1, key.trim());
        }
    }
    Ok(sections)
}

/// Takes a key out of a section, tracking consumption so leftovers can be
/// reported as unknown-key errors.
struct SectionReader {
    name: String,
    entries: BTreeMap<String, String>,
}

impl SectionReader {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.take(key)
            .ok_or_else(|| anyhow!("[{}] is missing required key {key:?}", self.name))
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.entries.keys().next() {
            bail!("[{}] has unknown key {key:?}", self.name);
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut sections = split_sections(text)?;
    let known = [
        "domain",
        "model",
        "scheme",
        "run",
        "initial",
        "output",
        "sweep",
        "multiplier",
        "decay_study",
        "oracle",
    ];
    if let Some(name) = sections.keys().find(|k| !known.contains(&k.as_str())) {
        bail!("unknown section [{name}]");
    }
    let mut reader = |name: &str| -> Option<SectionReader> {
        sections.remove(name).map(|entries| SectionReader {
            name: name.to_string(),
            entries,
        })
    };

    // [domain]
    let mut sec = reader("domain").ok_or_else(|| anyhow!("missing [domain] section"))?;
    let dimension: usize = sec.require("dimension")?.parse().context("dimension")?;
    let lengths = match sec.take("lengths") {
        Some(v) => {
            let l = parse_list(&v)?;
            if l.len() == 1 && dimension > 1 {
                vec![l[0]; dimension]
            } else {
                l
            }
        }
        None => vec![PI; dimension],
    };
    if lengths.len() != dimension {
        bail!("[domain] lengths must have {dimension} entries");
    }
    let modes: usize = sec.require("modes")?.parse().context("modes")?;
    sec.finish()?;

    // [model]
    let mut sec = reader("model").ok_or_else(|| anyhow!("missing [model] section"))?;
    let quintic = parse_bool(&sec.require("quintic")?)?;
    let damping = match sec.require("damping")?.as_str() {
        "energy" => Damping::EnergyCoefficient,
        "none" => Damping::None,
        other => match other.strip_prefix("constant:") {
            Some(c) => {
                let c: f64 = parse_scalar(c)?;
                if c < 0.0 {
                    bail!("constant damping coefficient must be nonnegative");
                }
                Damping::Constant(c)
            }
            None => bail!("damping must be energy | none | constant:<c>, got {other:?}"),
        },
    };
    let projector = match sec.take("projector").as_deref() {
        None => ProjectorSpec::Sharp(None),
        Some(v) => {
            let (kind, level) = v
                .split_once(':')
                .ok_or_else(|| anyhow!("projector must be sharp:<m|auto> or smooth:<m|auto>"))?;
            let level = match level.trim() {
                "auto" => None,
                other => Some(parse_scalar(other)?),
            };
            match kind.trim() {
                "sharp" => ProjectorSpec::Sharp(level),
                "smooth" => ProjectorSpec::Smooth(level),
                other => bail!("unknown projector kind {other:?}"),
            }
        }
    };
    let potential_in_energy = match sec.take("potential_in_energy").as_deref() {
        None | Some("auto") => None,
        Some(other) => Some(parse_bool(other)?),
    };
    let padding = match sec.take("padding") {
        Some(v) => v.parse().context("padding")?,
        None => 3,
    };
    if padding < 1 {
        bail!("padding must be at least 1");
    }
    if quintic && padding < 3 {
        bail!("quintic runs need padding >= 3 for alias-free projection");
    }
    sec.finish()?;

    // [scheme]
    let mut sec = reader("scheme").ok_or_else(|| anyhow!("missing [scheme] section"))?;
    let dt = parse_scalar(&sec.require("dt")?)?;
    if !(dt > 0.0) {
        bail!("dt must be positive");
    }
    sec.finish()?;

    // [run]
    let mut sec = reader("run").ok_or_else(|| anyhow!("missing [run] section"))?;
    let t_final = parse_scalar(&sec.require("t_final")?)?;
    if !(t_final > 0.0) {
        bail!("t_final must be positive");
    }
    let sample_stride: usize = match sec.take("sample_stride") {
        Some(v) => v.parse().context("sample_stride")?,
        None => 1,
    };
    if sample_stride == 0 {
        bail!("sample_stride must be positive");
    }
    sec.finish()?;

    // [initial]
    let mut sec = reader("initial").ok_or_else(|| anyhow!("missing [initial] section"))?;
    let seed = match sec.take("seed") {
        Some(v) => Some(v.parse::<u64>().context("seed")?),
        None => None,
    };
    let initial = match sec.require("kind")?.as_str() {
        "modes" => {
            let spec = sec.require("modes")?;
            let mut list = Vec::new();
            for item in spec.split(',') {
                let parts: Vec<&str> = item.split(':').collect();
                if parts.len() != 3 {
                    bail!("mode entry {item:?} must be k:u_coeff:v_coeff");
                }
                let k: Vec<usize> = parts[0]
                    .split('x')
                    .map(|c| c.trim().parse::<usize>().context("mode component"))
                    .collect::<Result<_>>()?;
                list.push((k, parse_scalar(parts[1])?, parse_scalar(parts[2])?));
            }
            InitialData::Modes(list)
        }
        "bump" => InitialData::Bump {
            center: parse_list(&sec.require("center")?)?,
            width: parse_list(&sec.require("width")?)?,
            amplitude: parse_scalar(&sec.require("amplitude")?)?,
        },
        "random" => InitialData::Random {
            band: parse_scalar(&sec.require("band")?)?,
            energy: parse_scalar(&sec.require("energy")?)?,
        },
        other => bail!("initial kind must be modes | bump | random, got {other:?}"),
    };
    sec.finish()?;

    // [output]
    let out_dir = match reader("output") {
        Some(mut sec) => {
            let dir = PathBuf::from(sec.require("dir")?);
            sec.finish()?;
            dir
        }
        None => PathBuf::from("out"),
    };

    // Optional sections with defaults.
    let sweep_levels = match reader("sweep") {
        Some(mut sec) => {
            let levels = parse_list(&sec.require("levels")?)?;
            sec.finish()?;
            levels
        }
        None => Vec::new(),
    };

    let (multiplier_levels, multiplier_samples, multiplier_s_orders, multiplier_p) =
        match reader("multiplier") {
            Some(mut sec) => {
                let levels = match sec.take("levels") {
                    Some(v) => parse_list(&v)?,
                    None => vec![4.0, 8.0, 16.0, 32.0],
                };
                let samples = match sec.take("samples") {
                    Some(v) => v.parse().context("samples")?,
                    None => 6,
                };
                let s_orders = match sec.take("s_orders") {
                    Some(v) => parse_list(&v)?,
                    None => vec![1.0, 2.0],
                };
                let p = match sec.take("p") {
                    Some(v) => parse_scalar(&v)?,
                    None => 10.0,
                };
                sec.finish()?;
                (levels, samples, s_orders, p)
            }
            None => (vec![4.0, 8.0, 16.0, 32.0], 6, vec![1.0, 2.0], 10.0),
        };

    let (decay_e0_list, decay_fit_window, decay_include_bt, bt_lambda, bt_d) =
        match reader("decay_study") {
            Some(mut sec) => {
                let e0 = match sec.take("e0_list") {
                    Some(v) => parse_list(&v)?,
                    None => vec![0.5, 1.0, 2.0],
                };
                let window = match sec.take("fit_window") {
                    Some(v) => {
                        let (a, b) = v
                            .split_once(':')
                            .ok_or_else(|| anyhow!("fit_window must be a:b"))?;
                        (parse_scalar(a)?, parse_scalar(b)?)
                    }
                    None => (10.0, t_final),
                };
                let include_bt = match sec.take("bt") {
                    Some(v) => parse_bool(&v)?,
                    None => true,
                };
                let bt_lambda = match sec.take("bt_lambda") {
                    Some(v) => parse_scalar(&v)?,
                    None => 1.0,
                };
                let bt_d = match sec.take("bt_d") {
                    Some(v) => parse_scalar(&v)?,
                    None => 1.0,
                };
                sec.finish()?;
                (e0, window, include_bt, bt_lambda, bt_d)
            }
            None => (vec![0.5, 1.0, 2.0], (10.0, t_final), true, 1.0, 1.0),
        };

    let oracle_tolerance = match reader("oracle") {
        Some(mut sec) => {
            let tol = match sec.take("tolerance") {
                Some(v) => parse_scalar(&v)?,
                None => 1e-6,
            };
            sec.finish()?;
            tol
        }
        None => 1e-6,
    };

    Ok(ExperimentConfig {
        dimension,
        lengths,
        modes,
        quintic,
        damping,
        projector,
        potential_in_energy,
        padding,
        dt,
        t_final,
        sample_stride,
        initial,
        out_dir,
        seed,
        sweep_levels,
        multiplier_levels,
        multiplier_samples,
        multiplier_s_orders,
        multiplier_p,
        decay_e0_list,
        decay_fit_window,
        decay_include_bt,
        bt_lambda,
        bt_d,
        oracle_tolerance,
        raw_text: text.to_string(),
    })
}
