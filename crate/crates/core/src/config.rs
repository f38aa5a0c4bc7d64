//! Scenario files.
//!
//! A scenario is sectioned `key = value` text. Units are those of the usual
//! plant tables: metres, hours, m³/h, kg/m³, kinetic rates per day and
//! half-saturations in g/m³. The `[stages]` section holds one comma-separated
//! line per stage:
//!
//! ```text
//! t_start_h, t_end_h, model, Qf_m3ph, Qu_m3ph, Qe_m3ph, Xf_kgpm3
//! ```
//!
//! with `model` either `pde` or `mix`. Lines starting with `#` are comments.

use std::fmt::Write as _;

use crate::biokinetics::{Asm1Params, Particulates, Solubles, PARTICULATE_NAMES, SOLUBLE_NAMES};
use crate::constitutive::ConstitutiveParams;
use crate::discretization::{NumericalFlux, Scheme, DEFAULT_CFL_SAFETY};
use crate::error::ConfigError;
use crate::scenario::{FeedSpec, InitialCondition, ModelKind, Problem, Stage, TankGeometry, SECONDS_PER_HOUR};
use crate::semi_implicit::NewtonConfig;
use crate::simulator::RunConfig;

/// A stage in file units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSpec {
    pub t_start_h: f64,
    pub t_end_h: f64,
    pub model: ModelKind,
    pub q_feed_m3ph: f64,
    pub q_under_m3ph: f64,
    pub q_extract_m3ph: f64,
    pub x_feed: f64,
}

impl StageSpec {
    pub fn to_stage(&self) -> Stage {
        Stage {
            t_start: self.t_start_h * SECONDS_PER_HOUR,
            t_end: self.t_end_h * SECONDS_PER_HOUR,
            model: self.model,
            q_feed: self.q_feed_m3ph / SECONDS_PER_HOUR,
            q_under: self.q_under_m3ph / SECONDS_PER_HOUR,
            q_extract: self.q_extract_m3ph / SECONDS_PER_HOUR,
            x_feed: self.x_feed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub cells: usize,
    pub scheme: Scheme,
    pub flux: NumericalFlux,
    pub tolerance: f64,
    pub max_iter: usize,
    pub cfl_safety: f64,
    pub snapshot_s: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        let newton = NewtonConfig::default();
        Self {
            cells: 100,
            scheme: Scheme::SemiImplicit,
            flux: NumericalFlux::EngquistOsher,
            tolerance: newton.epsilon,
            max_iter: newton.max_iter,
            cfl_safety: DEFAULT_CFL_SAFETY,
            snapshot_s: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub geometry: TankGeometry,
    pub constitutive: ConstitutiveParams,
    pub kinetics: Asm1Params,
    /// Solids mass per unit COD.
    pub c_conv: f64,
    pub initial: InitialCondition,
    /// Relative COD weights of the feed solids.
    pub feed_weights: Particulates,
    pub feed_soluble: Solubles,
    pub numerics: Numerics,
    pub stages: Vec<StageSpec>,
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Explicit => "explicit",
        Scheme::SemiImplicit => "semi-implicit",
    }
}

pub fn parse_scheme(s: &str) -> Option<Scheme> {
    match s {
        "explicit" => Some(Scheme::Explicit),
        "semi-implicit" => Some(Scheme::SemiImplicit),
        _ => None,
    }
}

pub fn flux_name(f: NumericalFlux) -> &'static str {
    match f {
        NumericalFlux::EngquistOsher => "eo",
        NumericalFlux::Godunov => "godunov",
    }
}

pub fn parse_flux(s: &str) -> Option<NumericalFlux> {
    match s {
        "eo" => Some(NumericalFlux::EngquistOsher),
        "godunov" => Some(NumericalFlux::Godunov),
        _ => None,
    }
}

fn parse_number(line: usize, field: &str, text: &str) -> Result<f64, ConfigError> {
    let v: f64 = text.trim().parse().map_err(|_| ConfigError::syntax(line, format!("{field}: '{}' is not a number", text.trim())))?;
    if !v.is_finite() {
        return Err(ConfigError::syntax(line, format!("{field}: value must be finite")));
    }
    Ok(v)
}

/// Parse one stage line (without line-number context).
pub fn parse_stage_line(text: &str) -> Result<StageSpec, ConfigError> {
    parse_stage_at(0, text)
}

fn parse_stage_at(line: usize, text: &str) -> Result<StageSpec, ConfigError> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() != 7 {
        return Err(ConfigError::syntax(line, format!("stage needs 7 fields, found {}", fields.len())));
    }
    let num = |i: usize, name: &str| parse_number(line, name, fields[i]);
    let model = match fields[2] {
        "pde" => ModelKind::Pde,
        "mix" => ModelKind::Mixing,
        other => return Err(ConfigError::syntax(line, format!("model must be 'pde' or 'mix', got '{other}'"))),
    };
    let spec = StageSpec {
        t_start_h: num(0, "t_start_h")?,
        t_end_h: num(1, "t_end_h")?,
        model,
        q_feed_m3ph: num(3, "Qf_m3ph")?,
        q_under_m3ph: num(4, "Qu_m3ph")?,
        q_extract_m3ph: num(5, "Qe_m3ph")?,
        x_feed: num(6, "Xf_kgpm3")?,
    };
    if [spec.q_feed_m3ph, spec.q_under_m3ph, spec.q_extract_m3ph, spec.x_feed].iter().any(|v| *v < 0.0) {
        return Err(ConfigError::syntax(line, "flows and feed solids must be nonnegative"));
    }
    if spec.q_feed_m3ph > 0.0 && spec.q_extract_m3ph > 0.0 {
        return Err(ConfigError::syntax(line, "a stage cannot feed and extract at the same time"));
    }
    Ok(spec)
}

/// Mutable slot for one key.
enum Slot<'a> {
    Num(&'a mut f64),
    Count(&'a mut usize),
    Text(&'a mut String),
    Scheme(&'a mut Scheme),
    Flux(&'a mut NumericalFlux),
}

impl ScenarioConfig {
    fn blank() -> Self {
        Self {
            name: String::new(),
            geometry: TankGeometry { depth: f64::NAN, area: f64::NAN, min_depth: f64::NAN, z_bar0: f64::NAN },
            constitutive: ConstitutiveParams::default(),
            kinetics: Asm1Params::default(),
            c_conv: f64::NAN,
            initial: InitialCondition { top: 0.0, particulate: [0.0; 6], soluble: [0.0; 6] },
            feed_weights: [f64::NAN; 6],
            feed_soluble: [0.0; 6],
            numerics: Numerics::default(),
            stages: Vec::new(),
        }
    }

    fn slot(&mut self, section: &str, key: &str) -> Option<Slot<'_>> {
        use Slot::*;
        let particulate = |k: &str| PARTICULATE_NAMES.iter().position(|n| *n == k);
        let soluble = |k: &str| SOLUBLE_NAMES.iter().position(|n| *n == k);
        let c = &mut self.constitutive;
        let k = &mut self.kinetics;
        Some(match (section, key) {
            ("scenario", "name") => Text(&mut self.name),
            ("geometry", "depth_m") => Num(&mut self.geometry.depth),
            ("geometry", "area_m2") => Num(&mut self.geometry.area),
            ("geometry", "min_depth_m") => Num(&mut self.geometry.min_depth),
            ("geometry", "surface0_m") => Num(&mut self.geometry.z_bar0),
            ("constitutive", "v0_mps") => Num(&mut c.v0),
            ("constitutive", "x_half_kgpm3") => Num(&mut c.x_half),
            ("constitutive", "exponent") => Num(&mut c.exponent),
            ("constitutive", "x_crit_kgpm3") => Num(&mut c.x_crit),
            ("constitutive", "stress_slope_pa") => Num(&mut c.stress_slope),
            ("constitutive", "rho_solid") => Num(&mut c.rho_solid),
            ("constitutive", "rho_liquid") => Num(&mut c.rho_liquid),
            ("constitutive", "gravity") => Num(&mut c.gravity),
            ("constitutive", "x_tangent_kgpm3") => Num(&mut c.x_tangent),
            ("kinetics", "c_conv") => Num(&mut self.c_conv),
            ("kinetics", "Y_A") => Num(&mut k.y_a),
            ("kinetics", "Y_H") => Num(&mut k.y_h),
            ("kinetics", "f_P") => Num(&mut k.f_p),
            ("kinetics", "i_XB") => Num(&mut k.i_xb),
            ("kinetics", "i_XP") => Num(&mut k.i_xp),
            ("kinetics", "mu_H") => Num(&mut k.mu_h),
            ("kinetics", "K_S") => Num(&mut k.k_s),
            ("kinetics", "K_OH") => Num(&mut k.k_oh),
            ("kinetics", "K_NO") => Num(&mut k.k_no),
            ("kinetics", "b_H") => Num(&mut k.b_h),
            ("kinetics", "eta_g") => Num(&mut k.eta_g),
            ("kinetics", "eta_h") => Num(&mut k.eta_h),
            ("kinetics", "k_h") => Num(&mut k.k_h),
            ("kinetics", "K_X") => Num(&mut k.k_x),
            ("kinetics", "mu_A") => Num(&mut k.mu_a),
            ("kinetics", "K_NH_bar") => Num(&mut k.k_nh_bar),
            ("kinetics", "K_NH") => Num(&mut k.k_nh),
            ("kinetics", "b_A") => Num(&mut k.b_a),
            ("kinetics", "K_OA") => Num(&mut k.k_oa),
            ("kinetics", "k_a") => Num(&mut k.k_a),
            ("initial", "top_m") => Num(&mut self.initial.top),
            ("initial", key) => match (particulate(key), soluble(key)) {
                (Some(i), _) => Num(&mut self.initial.particulate[i]),
                (_, Some(i)) => Num(&mut self.initial.soluble[i]),
                _ => return None,
            },
            ("feed", key) => match (particulate(key), soluble(key)) {
                (Some(i), _) => Num(&mut self.feed_weights[i]),
                (_, Some(i)) => Num(&mut self.feed_soluble[i]),
                _ => return None,
            },
            ("numerics", "cells") => Count(&mut self.numerics.cells),
            ("numerics", "scheme") => Scheme(&mut self.numerics.scheme),
            ("numerics", "flux") => Flux(&mut self.numerics.flux),
            ("numerics", "tolerance") => Num(&mut self.numerics.tolerance),
            ("numerics", "max_iter") => Count(&mut self.numerics.max_iter),
            ("numerics", "cfl_safety") => Num(&mut self.numerics.cfl_safety),
            ("numerics", "snapshot_s") => Num(&mut self.numerics.snapshot_s),
            _ => return None,
        })
    }

    /// Parse scenario text and check it against every model invariant.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.to_problem()?;
        cfg.run_config().validate()?;
        Ok(cfg)
    }

    /// Parse without building the model.
    pub fn parse_unchecked(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::blank();
        let mut section = String::new();
        let mut seen: Vec<(String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::syntax(line, "unterminated section header"))?
                    .trim();
                const SECTIONS: [&str; 8] =
                    ["scenario", "geometry", "constitutive", "kinetics", "initial", "feed", "numerics", "stages"];
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::syntax(line, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            if section == "stages" {
                cfg.stages.push(parse_stage_at(line, content)?);
                continue;
            }
            let (key, value) =
                content.split_once('=').ok_or_else(|| ConfigError::syntax(line, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            if section.is_empty() {
                return Err(ConfigError::syntax(line, "key outside of any section"));
            }
            let id = (section.clone(), key.to_string());
            if seen.contains(&id) {
                return Err(ConfigError::syntax(line, format!("duplicate key '{key}'")));
            }
            seen.push(id);
            let slot = cfg
                .slot(&section, key)
                .ok_or_else(|| ConfigError::syntax(line, format!("unknown key '{key}' in [{section}]")))?;
            match slot {
                Slot::Num(v) => *v = parse_number(line, key, value)?,
                Slot::Count(v) => {
                    *v = value.parse().map_err(|_| ConfigError::syntax(line, format!("{key}: expected a whole number")))?
                }
                Slot::Text(v) => *v = value.to_string(),
                Slot::Scheme(v) => {
                    *v = parse_scheme(value).ok_or_else(|| ConfigError::syntax(line, format!("unknown scheme '{value}'")))?
                }
                Slot::Flux(v) => {
                    *v = parse_flux(value).ok_or_else(|| ConfigError::syntax(line, format!("unknown flux '{value}'")))?
                }
            }
        }
        let g = &cfg.geometry;
        for (name, v) in [("depth_m", g.depth), ("area_m2", g.area), ("min_depth_m", g.min_depth), ("surface0_m", g.z_bar0)] {
            if v.is_nan() {
                return Err(ConfigError::invalid("geometry", format!("missing key '{name}'")));
            }
        }
        if cfg.c_conv.is_nan() {
            return Err(ConfigError::invalid("kinetics", "missing key 'c_conv'"));
        }
        if let Some(k) = cfg.feed_weights.iter().position(|w| w.is_nan()) {
            return Err(ConfigError::invalid("feed", format!("missing weight '{}'", PARTICULATE_NAMES[k])));
        }
        if cfg.stages.is_empty() {
            return Err(ConfigError::invalid("stages", "no stages given"));
        }
        Ok(cfg)
    }

    pub fn schedule(&self) -> Vec<Stage> {
        self.stages.iter().map(StageSpec::to_stage).collect()
    }

    pub fn to_problem(&self) -> Result<Problem, ConfigError> {
        if !(self.c_conv > 0.0) {
            return Err(ConfigError::invalid("kinetics", "c_conv must be positive"));
        }
        let feed = FeedSpec::from_weights(&self.feed_weights, self.feed_soluble)?;
        Problem::new(
            self.geometry.clone(),
            self.constitutive.clone(),
            self.kinetics.clone(),
            self.c_conv,
            feed,
            self.initial.clone(),
            self.schedule(),
        )
    }

    pub fn run_config(&self) -> RunConfig {
        let n = &self.numerics;
        RunConfig {
            cells: n.cells,
            scheme: n.scheme,
            flux: n.flux,
            newton: NewtonConfig { epsilon: n.tolerance, max_iter: n.max_iter },
            cfl_safety: n.cfl_safety,
            snapshot_interval: Some(n.snapshot_s),
            outlet_interval: n.snapshot_s,
            ..RunConfig::default()
        }
    }

    /// Text that parses back to `self`.
    pub fn serialize(&self) -> String {
        let mut o = String::new();
        let c = &self.constitutive;
        let k = &self.kinetics;
        let g = &self.geometry;
        let n = &self.numerics;
        let _ = writeln!(o, "[scenario]\nname = {}\n", self.name);
        let _ = writeln!(
            o,
            "[geometry]\ndepth_m = {}\narea_m2 = {}\nmin_depth_m = {}\nsurface0_m = {}\n",
            g.depth, g.area, g.min_depth, g.z_bar0
        );
        let _ = writeln!(
            o,
            "[constitutive]\nv0_mps = {}\nx_half_kgpm3 = {}\nexponent = {}\nx_crit_kgpm3 = {}\nstress_slope_pa = {}\n\
             rho_solid = {}\nrho_liquid = {}\ngravity = {}\nx_tangent_kgpm3 = {}\n",
            c.v0, c.x_half, c.exponent, c.x_crit, c.stress_slope, c.rho_solid, c.rho_liquid, c.gravity, c.x_tangent
        );
        let _ = writeln!(o, "[kinetics]\nc_conv = {}", self.c_conv);
        let pairs = [
            ("Y_A", k.y_a), ("Y_H", k.y_h), ("f_P", k.f_p), ("i_XB", k.i_xb), ("i_XP", k.i_xp),
            ("mu_H", k.mu_h), ("K_S", k.k_s), ("K_OH", k.k_oh), ("K_NO", k.k_no), ("b_H", k.b_h),
            ("eta_g", k.eta_g), ("eta_h", k.eta_h), ("k_h", k.k_h), ("K_X", k.k_x), ("mu_A", k.mu_a),
            ("K_NH_bar", k.k_nh_bar), ("K_NH", k.k_nh), ("b_A", k.b_a), ("K_OA", k.k_oa), ("k_a", k.k_a),
        ];
        for (name, v) in pairs {
            let _ = writeln!(o, "{name} = {v}");
        }
        let _ = writeln!(o, "\n[initial]\ntop_m = {}", self.initial.top);
        for (name, v) in PARTICULATE_NAMES.iter().zip(&self.initial.particulate) {
            let _ = writeln!(o, "{name} = {v}");
        }
        for (name, v) in SOLUBLE_NAMES.iter().zip(&self.initial.soluble) {
            let _ = writeln!(o, "{name} = {v}");
        }
        let _ = writeln!(o, "\n[feed]");
        for (name, v) in PARTICULATE_NAMES.iter().zip(&self.feed_weights) {
            let _ = writeln!(o, "{name} = {v}");
        }
        for (name, v) in SOLUBLE_NAMES.iter().zip(&self.feed_soluble) {
            let _ = writeln!(o, "{name} = {v}");
        }
        let _ = writeln!(
            o,
            "\n[numerics]\ncells = {}\nscheme = {}\nflux = {}\ntolerance = {}\nmax_iter = {}\ncfl_safety = {}\nsnapshot_s = {}\n",
            n.cells,
            scheme_name(n.scheme),
            flux_name(n.flux),
            n.tolerance,
            n.max_iter,
            n.cfl_safety,
            n.snapshot_s
        );
        let _ = writeln!(o, "[stages]\n# t_start_h, t_end_h, model, Qf_m3ph, Qu_m3ph, Qe_m3ph, Xf_kgpm3");
        for s in &self.stages {
            let model = match s.model {
                ModelKind::Pde => "pde",
                ModelKind::Mixing => "mix",
            };
            let _ = writeln!(
                o,
                "{}, {}, {model}, {}, {}, {}, {}",
                s.t_start_h, s.t_end_h, s.q_feed_m3ph, s.q_under_m3ph, s.q_extract_m3ph, s.x_feed
            );
        }
        o
    }
}

/// Bundled scenarios.
pub mod bundled {
    pub const EXAMPLE1: &str = include_str!("../../../scenarios/ex1.cfg");
    pub const EXAMPLE2: &str = include_str!("../../../scenarios/ex2.cfg");
    pub const EXAMPLE3: &str = include_str!("../../../scenarios/ex3.cfg");
}
