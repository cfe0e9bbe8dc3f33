//! Flat `key = value` configuration with bracketed sections.
//!
//! ```text
//! [fluid]
//! gamma = 2.0
//! [domain]
//! r_inner = 1
//! r_outer = 16
//! n_cells = 400
//! ```
//!
//! `#` starts a comment. Every key must be known to its section, and every
//! invariant of the physical parameters is checked here, so a run never
//! starts from a configuration the library would reject later.

use std::collections::BTreeMap;
use std::fmt;

use nsp_core::domain::RadialGrid;
use nsp_core::evolve::{InitKind, Physics, TimeStep};
use nsp_core::ineqlab::LabConfig;
use nsp_core::steady::{ProfileKind, SteadyOptions};
use nsp_core::FluidParams;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    /// 1-based line in the file, or `None` for a `--set` override or a
    /// missing key.
    pub line: Option<usize>,
    /// `section.key` the error refers to, when there is one.
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: ")?,
            None => {}
        }
        if let Some(k) = &self.key {
            write!(f, "`{k}`: ")?;
        }
        f.write_str(&self.message)
    }
}

const SECTIONS: [&str; 7] = [
    "fluid", "domain", "steady", "evolve", "ineqlab", "output", "sweep",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Line(usize),
    Override,
}

impl Origin {
    fn line(self) -> Option<usize> {
        match self {
            Origin::Line(l) => Some(l),
            Origin::Override => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Raw entries keyed by `(section, key)`.
#[derive(Debug, Clone, Default)]
struct RawConfig {
    entries: BTreeMap<(String, String), Entry>,
    sections: BTreeMap<String, usize>,
}

fn err(origin: Option<Origin>, key: Option<String>, message: impl Into<String>) -> ParseError {
    ParseError {
        line: origin.and_then(Origin::line),
        key,
        message: message.into(),
    }
}

fn strip_quotes(v: &str) -> &str {
    let v = v.trim();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, ParseError> {
        let mut raw = RawConfig::default();
        let mut section: Option<String> = None;
        for (idx, full) in text.lines().enumerate() {
            let line = idx + 1;
            let here = Some(Origin::Line(line));
            let body = full.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(err(
                        here,
                        None,
                        format!("malformed section header `{body}`"),
                    ));
                };
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(err(here, None, format!("unknown section [{name}]")));
                }
                if raw.sections.insert(name.to_string(), line).is_some() {
                    return Err(err(here, None, format!("section [{name}] appears twice")));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(err(
                    here,
                    None,
                    format!("expected `key = value`, got `{body}`"),
                ));
            };
            let Some(sec) = &section else {
                return Err(err(
                    here,
                    Some(k.trim().into()),
                    "key outside of any section",
                ));
            };
            let key = (sec.clone(), k.trim().to_string());
            let entry = Entry {
                value: strip_quotes(v).to_string(),
                origin: Origin::Line(line),
            };
            if raw.entries.insert(key.clone(), entry).is_some() {
                return Err(err(
                    here,
                    Some(format!("{}.{}", key.0, key.1)),
                    "duplicate key",
                ));
            }
        }
        Ok(raw)
    }

    /// Applies one `section.key=value` override.
    fn set(&mut self, assignment: &str) -> Result<(), ParseError> {
        let ov = Some(Origin::Override);
        let Some((path, value)) = assignment.split_once('=') else {
            return Err(err(
                ov,
                None,
                format!("override `{assignment}` is not `section.key=value`"),
            ));
        };
        let Some((sec, key)) = path.trim().split_once('.') else {
            return Err(err(
                ov,
                Some(path.into()),
                "override key must be `section.key`",
            ));
        };
        if !SECTIONS.contains(&sec) {
            return Err(err(
                ov,
                Some(path.into()),
                format!("unknown section [{sec}]"),
            ));
        }
        self.sections.entry(sec.to_string()).or_insert(0);
        self.entries.insert(
            (sec.to_string(), key.trim().to_string()),
            Entry {
                value: strip_quotes(value).to_string(),
                origin: Origin::Override,
            },
        );
        Ok(())
    }

    fn section(&mut self, name: &'static str) -> Section<'_> {
        Section { raw: self, name }
    }

    /// Canonical `section.key=value` lines, sorted; the digest input.
    fn canonical(&self) -> String {
        let mut out = String::new();
        for ((s, k), e) in &self.entries {
            out.push_str(&format!("{s}.{k}={}\n", e.value));
        }
        out
    }
}

/// Typed access to one section; taken keys are removed so that whatever
/// remains at the end is unknown.
struct Section<'a> {
    raw: &'a mut RawConfig,
    name: &'static str,
}

impl Section<'_> {
    fn present(&self) -> bool {
        self.raw.sections.contains_key(self.name)
    }

    fn take_raw(&mut self, key: &str) -> Option<Entry> {
        self.raw
            .entries
            .remove(&(self.name.to_string(), key.to_string()))
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn take<T: std::str::FromStr>(
        &mut self,
        key: &str,
        what: &str,
    ) -> Result<Option<(T, Origin)>, ParseError>
    where
        T::Err: fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(|v| Some((v, e.origin)))
                .map_err(|x| {
                    err(
                        Some(e.origin),
                        Some(self.path(key)),
                        format!("expected {what}, got `{}` ({x})", e.value),
                    )
                }),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, ParseError> {
        Ok(self.f64_at(key, default)?.0)
    }

    /// Value and origin; the origin is `None` when the default was used.
    fn f64_at(&mut self, key: &str, default: f64) -> Result<(f64, Option<Origin>), ParseError> {
        match self.take::<f64>(key, "a number")? {
            Some((x, o)) if !x.is_finite() => {
                Err(err(Some(o), Some(self.path(key)), "must be finite"))
            }
            Some((x, o)) => Ok((x, Some(o))),
            None => Ok((default, None)),
        }
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>, ParseError> {
        let v = self.take::<f64>(key, "a number")?;
        match v {
            Some((x, o)) if !x.is_finite() => {
                Err(err(Some(o), Some(self.path(key)), "must be finite"))
            }
            other => Ok(other.map(|p| p.0)),
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, ParseError> {
        Ok(self
            .take::<usize>(key, "a non-negative integer")?
            .map_or(default, |p| p.0))
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64, ParseError> {
        Ok(self
            .take::<u64>(key, "a non-negative integer")?
            .map_or(default, |p| p.0))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool, ParseError> {
        Ok(self
            .take::<bool>(key, "`true` or `false`")?
            .map_or(default, |p| p.0))
    }

    fn string_or(&mut self, key: &str, default: &str) -> (String, Option<Origin>) {
        match self.take_raw(key) {
            Some(e) => (e.value, Some(e.origin)),
            None => (default.to_string(), None),
        }
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>, ParseError>
    where
        T::Err: fmt::Display,
    {
        let Some(e) = self.take_raw(key) else {
            return Ok(None);
        };
        let items = e
            .value
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>().map_err(|x| {
                    err(
                        Some(e.origin),
                        Some(self.path(key)),
                        format!("bad list entry `{s}` ({x})"),
                    )
                })
            })
            .collect::<Result<Vec<T>, _>>()?;
        if items.is_empty() {
            return Err(err(Some(e.origin), Some(self.path(key)), "empty list"));
        }
        Ok(Some(items))
    }

    fn require_f64(&mut self, key: &str) -> Result<(f64, Origin), ParseError> {
        match self.take::<f64>(key, "a number")? {
            Some(v) => Ok(v),
            None => Err(err(None, Some(self.path(key)), "required key is missing")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub r_inner: f64,
    pub r_outer: f64,
    pub n_cells: usize,
    /// Geometric growth of the cell sizes; 0 gives a uniform grid.
    pub stretch: f64,
}

impl DomainConfig {
    pub fn grid(&self) -> nsp_core::Result<RadialGrid> {
        RadialGrid::new(self.r_inner, self.r_outer, self.n_cells, self.stretch)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyConfig {
    pub profile: ProfileKind,
    pub amplitude: f64,
    pub options: SteadyOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveConfig {
    pub delta: f64,
    pub t_end: f64,
    pub dt: TimeStep,
    pub init: InitKind,
    pub output_stride: usize,
    pub margin: f64,
    pub sponge_width: Option<f64>,
    pub sponge_rate: Option<f64>,
    pub physics: Physics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    /// Write `state_<step>.txt` every this many steps; 0 disables.
    pub checkpoint_stride: usize,
}

/// Value lists of a Cartesian sweep; an absent list means the base value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepConfig {
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub n_cells: Vec<usize>,
    pub r_max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub fluid: FluidParams,
    pub domain: DomainConfig,
    pub steady: SteadyConfig,
    pub evolve: EvolveConfig,
    pub ineqlab: LabConfig,
    pub output: OutputConfig,
    pub sweep: SweepConfig,
    /// Hex SHA-256 of the canonical key list, overrides included.
    pub digest: String,
}

/// Parses `text` with the given `section.key=value` overrides applied.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<Config, ParseError> {
    let mut raw = RawConfig::parse(text)?;
    for o in overrides {
        raw.set(o)?;
    }
    let digest = {
        let mut h = Sha256::new();
        h.update(raw.canonical().as_bytes());
        h.finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    };

    let fluid = {
        let mut s = raw.section("fluid");
        let d = FluidParams::default();
        let (gamma, og) = s.f64_at("gamma", d.gamma)?;
        let (mu, om) = s.f64_at("mu", d.mu)?;
        let (lambda, ol) = s.f64_at("lambda", d.lambda)?;
        let (c_star, oc) = s.f64_at("c_star", d.c_star)?;
        let alpha = s.f64_or("alpha", d.alpha)?;
        let check = |ok: bool, o: Option<Origin>, k: &str, m: String| {
            if ok {
                Ok(())
            } else {
                Err(err(o, Some(format!("fluid.{k}")), m))
            }
        };
        check(
            gamma >= 1.0,
            og,
            "gamma",
            format!("gamma = {gamma} must be >= 1"),
        )?;
        check(mu > 0.0, om, "mu", format!("mu = {mu} must be > 0"))?;
        check(
            lambda + 2.0 / 3.0 * mu >= 0.0,
            ol.or(om),
            "lambda",
            format!(
                "lambda + 2 mu / 3 = {} must be >= 0",
                lambda + 2.0 / 3.0 * mu
            ),
        )?;
        check(
            c_star > 0.0,
            oc,
            "c_star",
            format!("c_star = {c_star} must be > 0"),
        )?;
        FluidParams {
            gamma,
            mu,
            lambda,
            alpha,
            c_star,
        }
    };

    let domain = {
        let mut s = raw.section("domain");
        if !s.present() {
            return Err(err(
                None,
                Some("domain".into()),
                "missing section [domain]; required keys: r_inner, r_outer, n_cells",
            ));
        }
        let (r_inner, oi) = s.require_f64("r_inner")?;
        let (r_outer, oo) = s.require_f64("r_outer")?;
        let (n_cells, on) = match s.take::<usize>("n_cells", "a positive integer")? {
            Some(v) => v,
            None => {
                return Err(err(
                    None,
                    Some("domain.n_cells".into()),
                    "required key is missing",
                ))
            }
        };
        if !(r_inner > 0.0) {
            return Err(err(Some(oi), Some("domain.r_inner".into()), "must be > 0"));
        }
        if !(r_outer > r_inner) {
            return Err(err(
                Some(oo),
                Some("domain.r_outer".into()),
                "must exceed r_inner",
            ));
        }
        if n_cells < 4 {
            return Err(err(Some(on), Some("domain.n_cells".into()), "must be >= 4"));
        }
        let d = DomainConfig {
            r_inner,
            r_outer,
            n_cells,
            stretch: s.f64_or("stretch", 0.0)?,
        };
        d.grid()
            .map_err(|e| err(None, Some("domain".into()), e.to_string()))?;
        d
    };

    let steady = {
        let mut s = raw.section("steady");
        let (name, origin) = s.string_or("profile", "admissible_bump");
        let amp_entry = s.take::<f64>("amplitude", "a number")?;
        let amplitude = amp_entry.map_or(0.5, |p| p.0);
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(err(
                amp_entry.map(|p| p.1),
                Some("steady.amplitude".into()),
                format!("amplitude = {amplitude} must lie in [0, 1]"),
            ));
        }
        let profile = match name.as_str() {
            "constant" => ProfileKind::Constant,
            "admissible_bump" => ProfileKind::AdmissibleBump,
            "general_gamma_envelope" => ProfileKind::GeneralGammaEnvelope {
                gamma: fluid.gamma,
                c0: s.f64_or("c0", 0.5)?,
                epsilon: s.f64_or("epsilon", 0.5)?,
            },
            other => return Err(err(
                origin,
                Some("steady.profile".into()),
                format!(
                    "unknown profile `{other}` (constant, admissible_bump, general_gamma_envelope)"
                ),
            )),
        };
        match profile {
            ProfileKind::GeneralGammaEnvelope { c0, epsilon, .. } => {
                if fluid.gamma <= 1.0 {
                    return Err(err(
                        None,
                        Some("fluid.gamma".into()),
                        "the envelope profile needs gamma > 1",
                    ));
                }
                if !(c0 > 0.0) || !(epsilon > 0.0 && epsilon < 1.0) {
                    return Err(err(
                        None,
                        Some("steady".into()),
                        "envelope needs c0 > 0 and 0 < epsilon < 1",
                    ));
                }
            }
            _ if fluid.gamma > 2.0 => {
                return Err(err(
                    None,
                    Some("fluid.gamma".into()),
                    "gamma > 2 needs profile = general_gamma_envelope",
                ))
            }
            _ => {}
        }
        let d = SteadyOptions::default();
        let options = SteadyOptions {
            tol: s.f64_or("tol", d.tol)?,
            max_iter: s.usize_or("max_iter", d.max_iter)?,
        };
        if !(options.tol > 0.0) || options.max_iter == 0 {
            return Err(err(
                None,
                Some("steady".into()),
                "tol must be > 0 and max_iter >= 1",
            ));
        }
        SteadyConfig {
            profile,
            amplitude,
            options,
        }
    };

    let evolve = {
        let mut s = raw.section("evolve");
        let delta = s.f64_or("delta", 1e-3)?;
        let t_end = s.f64_or("t_end", 10.0)?;
        let (dt_text, dt_origin) = s.string_or("dt", "auto");
        let dt = if dt_text == "auto" {
            TimeStep::Auto
        } else {
            match dt_text.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => TimeStep::Fixed(v),
                _ => {
                    return Err(err(
                        dt_origin,
                        Some("evolve.dt".into()),
                        format!("expected `auto` or a positive number, got `{dt_text}`"),
                    ))
                }
            }
        };
        let (init_text, init_origin) = s.string_or("init", "mixed");
        let init = match init_text.as_str() {
            "density" => InitKind::Density,
            "velocity" => InitKind::Velocity,
            "mixed" => InitKind::Mixed,
            other => {
                return Err(err(
                    init_origin,
                    Some("evolve.init".into()),
                    format!("unknown init `{other}` (density, velocity, mixed)"),
                ))
            }
        };
        let p = Physics::default();
        let cfg = EvolveConfig {
            delta,
            t_end,
            dt,
            init,
            output_stride: s.usize_or("output_stride", 10)?,
            margin: s.f64_or("margin", 2.0)?,
            sponge_width: s.f64_opt("sponge_width")?,
            sponge_rate: s.f64_opt("sponge_rate")?,
            physics: Physics {
                pressure: s.bool_or("pressure", p.pressure)?,
                coupling: s.bool_or("coupling", p.coupling)?,
                viscosity: s.bool_or("viscosity", p.viscosity)?,
                nonlinear: s.bool_or("nonlinear", p.nonlinear)?,
                sponge: s.bool_or("sponge", p.sponge)?,
            },
        };
        let bad = |k: &str, m: &str| Err(err(None, Some(format!("evolve.{k}")), m.to_string()));
        if !(cfg.delta >= 0.0) {
            return bad("delta", "must be >= 0");
        }
        if !(cfg.t_end >= 0.0) {
            return bad("t_end", "must be >= 0");
        }
        if cfg.output_stride == 0 {
            return bad("output_stride", "must be >= 1");
        }
        if !(cfg.margin > 0.0) {
            return bad("margin", "must be > 0");
        }
        if let Some(w) = cfg.sponge_width {
            if !(w > 0.0 && w <= domain.r_outer - domain.r_inner) {
                return bad("sponge_width", "must lie in (0, r_outer - r_inner]");
            }
        }
        if cfg.sponge_rate.is_some_and(|r| r < 0.0) {
            return bad("sponge_rate", "must be >= 0");
        }
        cfg
    };

    let ineqlab = {
        let mut s = raw.section("ineqlab");
        let d = LabConfig::default();
        let c = LabConfig {
            r_inner: s.f64_or("r_inner", d.r_inner)?,
            r_outer: s.f64_or("r_outer", d.r_outer)?,
            nr: s.usize_or("nr", d.nr)?,
            ntheta: s.usize_or("ntheta", d.ntheta)?,
            nphi: s.usize_or("nphi", d.nphi)?,
            vector_fields: s.usize_or("vector_fields", d.vector_fields)?,
            scalar_fields: s.usize_or("scalar_fields", d.scalar_fields)?,
            modes: s.usize_or("modes", d.modes)?,
            seed: s.u64_or("seed", d.seed)?,
            refine: s.bool_or("refine", d.refine)?,
            radial_outer: s.f64_or("radial_outer", d.radial_outer)?,
            radial_cells: s.usize_or("radial_cells", d.radial_cells)?,
            radial_sources: s.usize_or("radial_sources", d.radial_sources)?,
            mu: s.f64_or("mu", d.mu)?,
            lambda: s.f64_or("lambda", d.lambda)?,
        };
        c.validate()
            .map_err(|e| err(None, Some("ineqlab".into()), e.to_string()))?;
        c
    };

    let output = {
        let mut s = raw.section("output");
        let (stride, origin) =
            match s.take::<usize>("checkpoint_stride", "a non-negative integer")? {
                Some((v, o)) => (v, Some(o)),
                None => (0, None),
            };
        // states are only seen at sampled steps
        if stride % evolve.output_stride != 0 {
            return Err(err(
                origin,
                Some("output.checkpoint_stride".into()),
                format!(
                    "must be a multiple of evolve.output_stride = {}",
                    evolve.output_stride
                ),
            ));
        }
        OutputConfig {
            dir: s.string_or("dir", "out").0,
            checkpoint_stride: stride,
        }
    };

    let sweep = {
        let mut s = raw.section("sweep");
        let gamma = s.list::<f64>("gamma")?.unwrap_or_else(|| vec![fluid.gamma]);
        let delta = s
            .list::<f64>("delta")?
            .unwrap_or_else(|| vec![evolve.delta]);
        let n_cells = s
            .list::<usize>("n_cells")?
            .unwrap_or_else(|| vec![domain.n_cells]);
        let r_max = s
            .list::<f64>("r_max")?
            .unwrap_or_else(|| vec![domain.r_outer]);
        SweepConfig {
            gamma,
            delta,
            n_cells,
            r_max,
        }
    };

    if let Some(((sec, key), e)) = raw.entries.iter().next() {
        return Err(err(
            Some(e.origin),
            Some(format!("{sec}.{key}")),
            "unknown key",
        ));
    }

    Ok(Config {
        fluid,
        domain,
        steady,
        evolve,
        ineqlab,
        output,
        sweep,
        digest,
    })
}

pub fn parse_config(text: &str) -> Result<Config, ParseError> {
    parse_config_with(text, &[])
}
