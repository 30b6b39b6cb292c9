//! TOML run configuration and its resolution into library objects.

use std::path::Path;
use std::str::FromStr;

use dce_core::cavity::{parse_rational, CavityGeometry, Dimensionality, ModeIndex, RationalGeometry};
use dce_core::ode::SolverOptions;
use dce_core::resonance::{DriveFrequency, SearchBounds};
use dce_core::thermal::ThermalContext;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Largest denominator tried when recognising rational aspect ratios.
const MAX_INFERRED_DENOMINATOR: i64 = 1000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub drive: DriveConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

fn one() -> f64 {
    1.0
}

fn three() -> u8 {
    3
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default = "one")]
    pub lx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lz: Option<f64>,
    #[serde(default = "three")]
    pub dims: u8,
    /// Exact `(lx/ly)²` as `"p/q"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ry2: Option<String>,
    /// Exact `(lx/lz)²` as `"p/q"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rz2: Option<String>,
    /// Recognise small rational length ratios as exact.
    #[serde(default = "yes")]
    pub infer_exact: bool,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig { lx: 1.0, ly: None, lz: None, dims: 3, ry2: None, rz2: None, infer_exact: true }
    }
}

/// `Ω` as a number or as `"2*omega(kx,ky,kz)"` / `"omega(s)+omega(p)"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Value(f64),
    Symbolic(String),
}

fn default_epsilon() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<OmegaSpec>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Absolute detuning `h` of the drive.
    #[serde(default)]
    pub detuning: f64,
    /// Slow detuning `α = h/ε`; overrides `detuning` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_f: Option<f64>,
}

impl Default for DriveConfig {
    fn default() -> Self {
        DriveConfig { omega: None, epsilon: default_epsilon(), detuning: 0.0, alpha: None, alpha_f: None }
    }
}

fn default_chain_index() -> u32 {
    40
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_limit: Option<usize>,
    /// Modes whose clusters are analysed; default: every parametric mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<String>>,
    /// Treat each seed as an isolated mode, ignoring its partners.
    #[serde(default)]
    pub uncoupled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_x_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_chain_depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_cluster_size: Option<usize>,
    #[serde(default)]
    pub chains: bool,
    #[serde(default = "default_chain_index")]
    pub chain_max_index: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max_sweep: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    /// Length of the final stop window in drive periods; 0 leaves the wall moving.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_cm: Option<f64>,
    /// Dimensionless `β` per unit frequency, as an alternative to `(T, L)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default = "yes")]
    pub threshold_numeric: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty analysis table")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Format,
}

fn default_max_points() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// One of `alpha`, `detuning`, `epsilon`, `tau`, `ly_over_lx`, `temperature_k`.
    pub parameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default = "default_max_points")]
    pub max_points: usize,
}

impl SweepConfig {
    pub fn points(&self) -> CliResult<Vec<f64>> {
        match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => Ok(v.clone()),
            (None, Some(a), Some(b), Some(n)) => {
                if n > self.max_points {
                    return Err(CliError::Resource(format!(
                        "sweep of {n} points exceeds the bound of {}",
                        self.max_points
                    )));
                }
                Ok(match n {
                    0 => Vec::new(),
                    1 => vec![a],
                    _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
                })
            }
            _ => Err(CliError::Config("sweep needs either `values` or all of `start`, `stop`, `count`".into())),
        }
        .and_then(|v| {
            if v.len() > self.max_points {
                Err(CliError::Resource(format!("sweep of {} points exceeds the bound of {}", v.len(), self.max_points)))
            } else {
                Ok(v)
            }
        })
    }
}

/// Command-line values that replace configuration fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub omega: Option<String>,
    pub tau: Option<f64>,
    pub temperature_k: Option<f64>,
    pub length_cm: Option<f64>,
    pub k_max: Option<u32>,
    pub out: Option<String>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(e) = o.epsilon {
            self.drive.epsilon = e;
        }
        if let Some(w) = &o.omega {
            self.drive.omega = Some(match w.trim().parse::<f64>() {
                Ok(v) => OmegaSpec::Value(v),
                Err(_) => OmegaSpec::Symbolic(w.clone()),
            });
        }
        if let Some(t) = o.tau {
            self.analysis.tau = Some(vec![t]);
            self.analysis.tau_max = None;
            self.analysis.tau_steps = None;
            self.analysis.t_final = None;
        }
        if let Some(t) = o.temperature_k {
            self.analysis.temperature_k = Some(t);
            self.analysis.beta = None;
        }
        if let Some(l) = o.length_cm {
            self.analysis.length_cm = Some(l);
        }
        if let Some(k) = o.k_max {
            self.analysis.k_max = Some(k);
            self.analysis.k_max_sweep = None;
        }
        if let Some(p) = &o.out {
            self.output.path = Some(p.clone());
        }
        if let Some(f) = o.format {
            self.output.format = f;
        }
    }

    /// Non-fatal remarks about the configuration.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.drive.epsilon > 0.01 && self.drive.epsilon <= 0.1 {
            w.push(format!("epsilon = {} is large for a first-order expansion", self.drive.epsilon));
        }
        w
    }

    pub fn geometry(&self) -> CliResult<CavityGeometry> {
        resolve_geometry(&self.geometry)
    }

    pub fn epsilon(&self) -> CliResult<f64> {
        let e = self.drive.epsilon;
        if !(0.0..=0.1).contains(&e) {
            return Err(CliError::Config(format!("epsilon must lie in [0, 0.1], got {e}")));
        }
        Ok(e)
    }

    /// Slow detuning `α`.
    pub fn alpha(&self) -> CliResult<f64> {
        if let Some(a) = self.drive.alpha {
            if !a.is_finite() {
                return Err(CliError::Config("alpha must be finite".into()));
            }
            return Ok(a);
        }
        let h = self.drive.detuning;
        if h == 0.0 {
            return Ok(0.0);
        }
        let e = self.epsilon()?;
        if e == 0.0 {
            return Err(CliError::Config("a detuning needs a nonzero epsilon (or give alpha)".into()));
        }
        Ok(h / e)
    }

    pub fn drive(&self, geometry: &CavityGeometry) -> CliResult<DriveFrequency> {
        match &self.drive.omega {
            None => Err(CliError::Config("drive.omega is required for this command".into())),
            Some(OmegaSpec::Value(v)) => DriveFrequency::numeric(*v).map_err(CliError::config),
            Some(OmegaSpec::Symbolic(s)) => parse_drive(s, geometry),
        }
    }

    /// Modes named by a sum drive `omega(s)+omega(p)`.
    pub fn drive_seeds(&self) -> Option<Vec<ModeIndex>> {
        let Some(OmegaSpec::Symbolic(spec)) = &self.drive.omega else { return None };
        let s: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
        let idx = s.find(")+omega(")?;
        let (a, b) = s.split_at(idx + 1);
        Some(vec![mode_in(a, "omega")?, mode_in(&b[1..], "omega")?])
    }

    pub fn bounds(&self) -> SearchBounds {
        let d = SearchBounds::default();
        SearchBounds {
            max_x_index: self.analysis.max_x_index.unwrap_or(d.max_x_index),
            max_chain_depth: self.analysis.max_chain_depth.unwrap_or(d.max_chain_depth),
            max_cluster_size: self.analysis.max_cluster_size.unwrap_or(d.max_cluster_size),
        }
    }

    pub fn seeds(&self) -> CliResult<Option<Vec<ModeIndex>>> {
        self.analysis
            .seeds
            .as_ref()
            .map(|v| v.iter().map(|s| ModeIndex::from_str(s).map_err(CliError::config)).collect())
            .transpose()
    }

    pub fn tau_grid(&self) -> CliResult<Vec<f64>> {
        let a = &self.analysis;
        let grid = match (&a.tau, a.tau_max) {
            (Some(t), None) => t.clone(),
            (None, Some(m)) => {
                let n = a.tau_steps.unwrap_or(12).max(1);
                (0..=n).map(|i| m * i as f64 / n as f64).collect()
            }
            (None, None) => (0..=12).map(|i| 0.25 * i as f64).collect(),
            (Some(_), Some(_)) => return Err(CliError::Config("give either analysis.tau or analysis.tau_max".into())),
        };
        if grid.is_empty() || grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(CliError::Config("slow times must be finite and nonnegative".into()));
        }
        if grid.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Config("slow times must be ascending".into()));
        }
        Ok(grid)
    }

    /// Stop time of a direct integration: `t_final`, or the last slow time over `ε`.
    pub fn t_final(&self) -> CliResult<f64> {
        if let Some(t) = self.analysis.t_final {
            if t.is_finite() && t > 0.0 {
                return Ok(t);
            }
            return Err(CliError::Config("t_final must be positive".into()));
        }
        let e = self.epsilon()?;
        if e == 0.0 {
            return Err(CliError::Config("with epsilon = 0 give analysis.t_final".into()));
        }
        let tau = *self.tau_grid()?.last().unwrap();
        if tau == 0.0 {
            return Err(CliError::Config("the final slow time must be positive".into()));
        }
        Ok(tau / e)
    }

    pub fn solver(&self) -> CliResult<SolverOptions> {
        let d = SolverOptions::default();
        let o = SolverOptions {
            rtol: self.analysis.rtol.unwrap_or(d.rtol),
            atol: self.analysis.atol.unwrap_or(d.atol),
            max_step: self.analysis.max_step,
            max_steps: self.analysis.max_steps.unwrap_or(d.max_steps),
            ..d
        };
        o.validate().map_err(CliError::config)?;
        Ok(o)
    }

    pub fn thermal(&self) -> CliResult<ThermalContext> {
        let a = &self.analysis;
        let ctx = match (a.temperature_k, a.beta) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either temperature_k or beta".into())),
            (Some(t), None) => ThermalContext::physical(t, a.length_cm.unwrap_or(1.0)),
            (None, Some(b)) => ThermalContext::dimensionless(b),
            (None, None) => Ok(ThermalContext::Zero),
        };
        ctx.map_err(CliError::config)
    }
}

fn dims_of(d: u8) -> CliResult<Dimensionality> {
    match d {
        1 => Ok(Dimensionality::One),
        2 => Ok(Dimensionality::Two),
        3 => Ok(Dimensionality::Three),
        _ => Err(CliError::Config(format!("dims must be 1, 2 or 3, got {d}"))),
    }
}

/// `p/q` with small `q` within `1e-12` relative of `x`, if any.
fn small_rational(x: f64) -> Option<String> {
    if !(x.is_finite() && x > 0.0) {
        return None;
    }
    for q in 1..=MAX_INFERRED_DENOMINATOR {
        let p = (x * q as f64).round();
        if p >= 1.0 && ((p / q as f64) - x).abs() <= 1e-12 * x {
            return Some(format!("{}/{q}", p as i64));
        }
    }
    None
}

pub fn resolve_geometry(g: &GeometryConfig) -> CliResult<CavityGeometry> {
    let dims = dims_of(g.dims)?;
    let need = |axis: usize| dims.count() > axis;
    if !(g.lx.is_finite() && g.lx > 0.0) {
        return Err(CliError::Config(format!("lx must be positive, got {}", g.lx)));
    }
    let explicit = g.ry2.is_some() || g.rz2.is_some();
    if explicit {
        let parse = |s: &Option<String>, axis: usize, name: &str| -> CliResult<_> {
            match s {
                Some(s) => parse_rational(s).map_err(CliError::config),
                None if need(axis) => Err(CliError::Config(format!("{name} is required with exact ratios"))),
                None => Ok(parse_rational("1").unwrap()),
            }
        };
        let ry2 = parse(&g.ry2, 1, "ry2")?;
        let rz2 = parse(&g.rz2, 2, "rz2")?;
        let base = CavityGeometry::from_ratios(dims, ry2.clone(), rz2.clone()).map_err(CliError::config)?;
        let scaled = base.scaled(g.lx).map_err(CliError::config)?;
        if g.ly.is_some() || g.lz.is_some() {
            let ly = g.ly.unwrap_or(scaled.ly());
            let lz = g.lz.unwrap_or(scaled.lz());
            let ratios = RationalGeometry::new(ry2, rz2).map_err(CliError::config)?;
            return CavityGeometry::new(g.lx, ly, lz, dims)
                .and_then(|c| c.with_exact_ratios(ratios))
                .map_err(CliError::config);
        }
        return Ok(scaled);
    }

    let ly = g.ly.unwrap_or(g.lx);
    let lz = g.lz.unwrap_or(g.lx);
    let geometry = CavityGeometry::new(g.lx, ly, lz, dims).map_err(CliError::config)?;
    if !g.infer_exact {
        return Ok(geometry);
    }
    let ry = if need(1) { small_rational((g.lx / ly).powi(2)) } else { Some("1".into()) };
    let rz = if need(2) { small_rational((g.lx / lz).powi(2)) } else { Some("1".into()) };
    match (ry, rz) {
        (Some(a), Some(b)) => {
            let ratios = RationalGeometry::new(parse_rational(&a).unwrap(), parse_rational(&b).unwrap())
                .map_err(CliError::config)?;
            geometry.with_exact_ratios(ratios).map_err(CliError::config)
        }
        _ => Ok(geometry),
    }
}

fn mode_in(text: &str, prefix: &str) -> Option<ModeIndex> {
    let rest = text.strip_prefix(prefix)?;
    ModeIndex::from_str(rest).ok()
}

/// Parses `2*omega(...)` and `omega(...)+omega(...)`.
pub fn parse_drive(spec: &str, geometry: &CavityGeometry) -> CliResult<DriveFrequency> {
    let s: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(v) = s.parse::<f64>() {
        return DriveFrequency::numeric(v).map_err(CliError::config);
    }
    if let Some(m) = mode_in(&s, "2*omega") {
        return DriveFrequency::twice_mode(geometry, m).map_err(CliError::config);
    }
    if let Some(idx) = s.find(")+omega(") {
        let (a, b) = s.split_at(idx + 1);
        if let (Some(p), Some(q)) = (mode_in(a, "omega"), mode_in(&b[1..], "omega")) {
            return DriveFrequency::mode_sum(geometry, p, q).map_err(CliError::config);
        }
    }
    Err(CliError::Config(format!(
        "cannot read drive frequency {spec:?}; use a number, \"2*omega(kx,ky,kz)\" or \"omega(s)+omega(p)\""
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_defaults_are_exact() {
        let c = RunConfig::default();
        let g = c.geometry().unwrap();
        assert!(g.exact().is_some());
        let d = parse_drive("2*omega(1,1,1)", &g).unwrap();
        assert!(d.is_exact());
    }

    #[test]
    fn inferred_and_explicit_ratios_agree() {
        let a = resolve_geometry(&GeometryConfig { ly: Some(1.0 / 3.0), dims: 2, ..Default::default() }).unwrap();
        let b = resolve_geometry(&GeometryConfig { ry2: Some("9".into()), dims: 2, ..Default::default() }).unwrap();
        assert_eq!(a.exact(), b.exact());
        assert!((a.ly() - b.ly()).abs() < 1e-15);
        let c = resolve_geometry(&GeometryConfig { ly: Some(std::f64::consts::PI), dims: 2, ..Default::default() })
            .unwrap();
        assert!(c.exact().is_none());
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        let r = RunConfig::from_toml("[geometry]\nlx = -1.0\n").unwrap().geometry();
        assert!(matches!(r, Err(CliError::Config(_))));
        assert!(RunConfig::from_toml("[geometry]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("[geometry]\ndims = 4\n").unwrap().geometry().is_err());
        let g = CavityGeometry::cube();
        assert!(parse_drive("3*omega(1,1,1)", &g).is_err());
        assert!(parse_drive("2*omega(1,1)", &g).is_err());
    }

    #[test]
    fn overrides_replace_fields() {
        let mut c = RunConfig::from_toml("[drive]\nomega = 3.5\nepsilon = 0.001\n").unwrap();
        c.apply(&Overrides { omega: Some("2*omega(1,1,1)".into()), epsilon: Some(0.002), tau: Some(2.0), ..Default::default() });
        assert_eq!(c.drive.omega, Some(OmegaSpec::Symbolic("2*omega(1,1,1)".into())));
        assert_eq!(c.epsilon().unwrap(), 0.002);
        assert_eq!(c.tau_grid().unwrap(), vec![2.0]);
        assert!((c.t_final().unwrap() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_points() {
        let s = SweepConfig { parameter: "alpha".into(), start: Some(0.0), stop: Some(1.0), count: Some(5), values: None, max_points: 10 };
        assert_eq!(s.points().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let big = SweepConfig { count: Some(11), ..s };
        assert!(matches!(big.points(), Err(CliError::Resource(_))));
    }
}
