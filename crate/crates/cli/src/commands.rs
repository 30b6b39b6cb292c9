//! One function per subcommand. Each turns a resolved configuration into an [`Output`].

use std::f64::consts::PI;

use dce_core::cavity::{enumerate_modes, mode_frequency, CavityGeometry, ModeIndex, DEFAULT_MODE_LIMIT};
use dce_core::evolve::{assemble_family, default_truncation, integrate_family, photon_spectrum, PhotonSpectrum, WallTrajectory};
use dce_core::msa::{
    build_msa_matrix, cluster_of, detuning_threshold, sum_resonance_photons, DetuningThreshold, MsaReport, MsaSystem,
    ThresholdOptions,
};
use dce_core::resonance::{
    build_coupling_cluster, find_equidistant_chains, parametric_modes, resonant_clusters, ClusterReport, ConditionKind,
    CouplingCluster, DriveFrequency,
};
use dce_core::thermal::{thermal_report, ThermalReport};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Output, Table};

/// Geometry and drive shared by the analysis commands.
struct Setup {
    geometry: CavityGeometry,
    drive: DriveFrequency,
}

fn setup(cfg: &RunConfig) -> CliResult<Setup> {
    let geometry = cfg.geometry()?;
    let drive = cfg.drive(&geometry)?;
    cfg.epsilon()?;
    Ok(Setup { geometry, drive })
}

/// Clusters selected by the configuration: one per seed, or one per
/// parametrically resonant mode.
fn clusters(cfg: &RunConfig, s: &Setup) -> CliResult<(Vec<CouplingCluster>, Vec<String>)> {
    let bounds = cfg.bounds();
    let seeds = match cfg.seeds()? {
        Some(v) => v,
        None if cfg.drive_seeds().is_some() => cfg.drive_seeds().unwrap(),
        None if cfg.analysis.uncoupled => parametric_modes(&s.geometry, &s.drive).map_err(CliError::config)?,
        None => {
            let found = resonant_clusters(&s.geometry, &s.drive, bounds)?;
            return finish_clusters(found, &s.drive);
        }
    };
    let mut out: Vec<CouplingCluster> = Vec::new();
    for m in seeds {
        if out.iter().any(|c| c.position(m).is_some()) {
            continue;
        }
        let c = if cfg.analysis.uncoupled {
            cluster_of(&s.geometry, &s.drive, &[m]).map_err(CliError::config)?
        } else {
            build_coupling_cluster(&s.geometry, &s.drive, &[m], bounds)?
        };
        out.push(c);
    }
    finish_clusters(out, &s.drive)
}

fn finish_clusters(found: Vec<CouplingCluster>, drive: &DriveFrequency) -> CliResult<(Vec<CouplingCluster>, Vec<String>)> {
    if found.is_empty() {
        return Err(CliError::Config(format!("no mode is parametrically resonant with {}", drive.label())));
    }
    let mut warnings = Vec::new();
    for (i, c) in found.iter().enumerate() {
        if c.bound_hit {
            warnings.push(format!("cluster {i}: search bounds cut off further partners"));
        }
        if !c.exact {
            warnings.push(format!("cluster {i}: resonances decided in floating point"));
        }
    }
    Ok((found, warnings))
}

fn mode_cell(m: ModeIndex) -> Cell {
    Cell::Text(m.to_string())
}

pub fn spectrum(cfg: &RunConfig) -> CliResult<Output> {
    let geometry = cfg.geometry()?;
    let cutoff = cfg
        .analysis
        .cutoff
        .ok_or_else(|| CliError::Config("analysis.cutoff is required for spectrum".into()))?;
    let limit = cfg.analysis.mode_limit.unwrap_or(DEFAULT_MODE_LIMIT);
    let modes = enumerate_modes(&geometry, cutoff, limit).map_err(CliError::config)?;
    let dims = geometry.dims();
    let axes = ["nx", "ny", "nz"];
    let mut cols = vec!["mode"];
    cols.extend_from_slice(&axes[..dims.count()]);
    cols.push("omega");
    let mut t = Table::new(&cols);
    #[derive(Serialize)]
    struct Row {
        mode: ModeIndex,
        omega: f64,
    }
    let mut rows = Vec::new();
    for &(m, w) in &modes {
        let mut r = vec![mode_cell(m)];
        r.extend(m.components(dims).into_iter().map(Cell::from));
        r.push(w.into());
        t.push(r);
        rows.push(Row { mode: m, omega: w });
    }
    Ok(Output::new("spectrum", t, json!({ "cutoff": cutoff, "modes": rows })))
}

pub fn couple(cfg: &RunConfig) -> CliResult<Output> {
    let s = setup(cfg)?;
    let (found, mut warnings) = match clusters(cfg, &s) {
        Ok(v) => v,
        Err(CliError::Config(_)) if cfg.analysis.chains => (Vec::new(), Vec::new()),
        Err(e) => return Err(e),
    };
    let mut t = Table::new(&["cluster", "record", "mode", "partner", "condition", "omega", "harmonic", "g"]);
    let reports: Vec<ClusterReport> = found.iter().map(|c| c.report()).collect();
    for (i, c) in found.iter().enumerate() {
        for m in &c.members {
            let cond = if m.parametric { "parametric" } else { "" };
            t.push(vec![
                i.into(),
                "member".into(),
                mode_cell(m.mode),
                Cell::Empty,
                cond.into(),
                m.frequency.into(),
                m.harmonic.into(),
                Cell::Empty,
            ]);
        }
        for p in &c.couplings {
            let (a, b) = (&c.members[p.first], &c.members[p.second]);
            t.push(vec![
                i.into(),
                "coupling".into(),
                mode_cell(a.mode),
                mode_cell(b.mode),
                p.kind.as_str().into(),
                Cell::Empty,
                Cell::Empty,
                p.g.into(),
            ]);
        }
    }
    let mut chains = Vec::new();
    if cfg.analysis.chains {
        chains = find_equidistant_chains(&s.geometry, &s.drive, cfg.analysis.chain_max_index)?;
        for (ci, chain) in chains.iter().enumerate() {
            for (pos, &m) in chain.iter().enumerate() {
                let w = mode_frequency(&s.geometry, m).map_err(CliError::from)?;
                t.push(vec![
                    ci.into(),
                    "chain".into(),
                    mode_cell(m),
                    chain.get(pos + 1).map(|&n| n.to_string()).into(),
                    ConditionKind::Difference.as_str().into(),
                    w.into(),
                    (2.0 * w / s.drive.value()).into(),
                    chain.get(pos + 1).map(|&n| dce_core::cavity::coupling_coefficient(m, n)).into(),
                ]);
            }
        }
        if found.is_empty() && chains.is_empty() {
            warnings.push("no parametric clusters and no chains".into());
        }
    }
    let mut out = Output::new("couple", t, json!({ "omega": s.drive.value(), "clusters": reports, "chains": chains }));
    out.warnings = warnings;
    Ok(out)
}

/// `⟨N⟩` from the closed forms of a singleton or a sum-resonant pair, when one applies.
fn closed_form(sys: &MsaSystem, s: &Setup, tau: f64) -> Option<Vec<f64>> {
    let c = &sys.cluster;
    match c.members.as_slice() {
        [m] if m.parametric => {
            let p = sys.matrix[(1, 0)].norm();
            let l2 = p * p - sys.alpha * sys.alpha / 4.0;
            let n = if l2 > 0.0 {
                let l = l2.sqrt();
                (p / l * (l * tau).sinh()).powi(2)
            } else if l2 < 0.0 {
                let l = (-l2).sqrt();
                (p / l * (l * tau).sin()).powi(2)
            } else {
                (p * tau).powi(2)
            };
            Some(vec![n])
        }
        [a, b] if sys.alpha == 0.0
            && !a.parametric
            && !b.parametric
            && c.couplings.len() == 1
            && c.couplings[0].kind == ConditionKind::Sum =>
        {
            let n = sum_resonance_photons(&s.geometry, &s.drive, a.mode, b.mode, tau).ok()?;
            Some(vec![n, n])
        }
        _ => None,
    }
}

pub fn msa(cfg: &RunConfig) -> CliResult<Output> {
    let s = setup(cfg)?;
    let alpha = cfg.alpha()?;
    let taus = cfg.tau_grid()?;
    let (found, warnings) = clusters(cfg, &s)?;
    let mut t = Table::new(&["cluster", "tau", "mode", "photons", "closed_form", "unitarity_defect", "growth_rate"]);
    let mut reports: Vec<MsaReport> = Vec::new();
    for (i, c) in found.iter().enumerate() {
        let sys = build_msa_matrix(c, alpha)?;
        let growth = sys.growth_rate();
        for sol in sys.evolve_many(&taus)? {
            let n = sol.photon_numbers();
            let cf = closed_form(&sys, &s, sol.tau);
            let defect = sol.unitarity_defect();
            for (k, m) in sol.modes.iter().enumerate() {
                t.push(vec![
                    i.into(),
                    sol.tau.into(),
                    mode_cell(*m),
                    n[k].into(),
                    cf.as_ref().map(|v| v[k]).into(),
                    defect.into(),
                    growth.into(),
                ]);
            }
        }
        reports.push(sys.report(&taus)?);
    }
    let mut out = Output::new("msa", t, json!({ "alpha": alpha, "clusters": reports }));
    out.warnings = warnings;
    Ok(out)
}

#[derive(Serialize)]
struct IntegrationResult {
    k_max: u32,
    spectrum: PhotonSpectrum,
    msa_photons: Vec<Option<f64>>,
}

pub fn integrate(cfg: &RunConfig) -> CliResult<Output> {
    let s = setup(cfg)?;
    let eps = cfg.epsilon()?;
    let alpha = cfg.alpha()?;
    let t_final = cfg.t_final()?;
    let solver = cfg.solver()?;
    let (found, mut warnings) = clusters(cfg, &s)?;
    let cluster = &found[0];
    if found.len() > 1 {
        warnings.push(format!("integrating the family of the first of {} clusters", found.len()));
    }
    let primary = cluster.members.iter().find(|m| m.parametric).unwrap_or(&cluster.members[0]).mode;
    let largest_x = cluster.members.iter().map(|m| m.mode.nx).max().unwrap_or(1);
    let truncations = match (&cfg.analysis.k_max_sweep, cfg.analysis.k_max) {
        (Some(v), _) if !v.is_empty() => v.clone(),
        (_, Some(k)) => vec![k],
        _ => vec![default_truncation(largest_x)],
    };

    let omega = s.drive.value() + eps * alpha;
    let mut traj =
        WallTrajectory::new(s.geometry.lx(), eps, omega, t_final).map_err(CliError::config)?;
    if let Some(af) = cfg.drive.alpha_f {
        traj = traj.with_alpha_f(af).map_err(CliError::config)?;
    }
    if let Some(p) = cfg.analysis.stop_periods {
        let w = if p > 0.0 { Some(p * 2.0 * PI / omega) } else { None };
        traj = traj.with_window(w).map_err(CliError::config)?;
    }
    let tau = traj.effective_slow_time();
    let msa = build_msa_matrix(cluster, alpha)?.evolve(tau)?;

    let mut t = Table::new(&["k_max", "mode", "omega", "photons", "photons_msa", "relative_deviation", "unitarity_defect"]);
    let mut results = Vec::new();
    for &k_max in &truncations {
        if k_max < largest_x {
            return Err(CliError::Config(format!("k_max = {k_max} is below the largest cluster index {largest_x}")));
        }
        let family = assemble_family(&s.geometry, primary.transverse(), k_max).map_err(CliError::config)?;
        let runs = integrate_family(&family, &traj, &solver, &[])?;
        let spec = photon_spectrum(&runs, &family, &traj)?;
        let peak = spec.photons.iter().cloned().fold(0.0, f64::max);
        if spec.edge_occupancy.iter().any(|&e| e > 1e-2 * peak) {
            warnings.push(format!("k_max = {k_max}: the highest modes are noticeably occupied"));
        }
        let mut msa_photons = Vec::new();
        for (i, &m) in spec.modes.iter().enumerate() {
            let n_msa = msa.position(m).map(|p| msa.photons_at(p));
            let dev = n_msa.filter(|&n| n > 0.0).map(|n| (spec.photons[i] - n).abs() / n);
            t.push(vec![
                k_max.into(),
                mode_cell(m),
                spec.frequencies[i].into(),
                spec.photons[i].into(),
                n_msa.into(),
                dev.into(),
                spec.unitarity_defect.into(),
            ]);
            msa_photons.push(n_msa);
        }
        results.push(IntegrationResult { k_max, spectrum: spec, msa_photons });
    }
    let mut out = Output::new(
        "integrate",
        t,
        json!({
            "omega": omega,
            "alpha": alpha,
            "t_final": t_final,
            "tau_effective": tau,
            "cluster": cluster.report(),
            "runs": results,
        }),
    );
    out.warnings = warnings;
    Ok(out)
}

pub fn threshold(cfg: &RunConfig) -> CliResult<Output> {
    let s = setup(cfg)?;
    let eps = cfg.epsilon()?;
    let (found, warnings) = clusters(cfg, &s)?;
    let opts = ThresholdOptions { allow_numeric: cfg.analysis.threshold_numeric, ..ThresholdOptions::default() };
    let mut t = Table::new(&[
        "cluster",
        "modes",
        "method",
        "alpha_max",
        "alpha_max_over_gamma",
        "h_max",
        "h_max_over_omega",
        "closed_form",
        "numeric",
        "saturated",
    ]);
    #[derive(Serialize)]
    struct Entry {
        threshold: DetuningThreshold,
        h_max: f64,
        h_max_over_omega_per_epsilon: f64,
        summary: String,
    }
    let mut entries = Vec::new();
    for (i, c) in found.iter().enumerate() {
        let th = detuning_threshold(c, &opts)?;
        let modes: Vec<String> = th.modes.iter().map(|m| m.to_string()).collect();
        let method = serde_json::to_value(th.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        t.push(vec![
            i.into(),
            modes.join(" ").into(),
            method.into(),
            th.alpha_max.into(),
            th.in_units_of_gamma().into(),
            th.h_max(eps).into(),
            (th.h_max(eps) / th.omega).into(),
            th.closed_form.into(),
            th.numeric.into(),
            th.saturated.into(),
        ]);
        let summary = format!(
            "h_max = {:.4} eps gamma; h_max/Omega = {:.4} eps",
            th.in_units_of_gamma(),
            th.h_over_omega_per_epsilon()
        );
        entries.push(Entry { h_max: th.h_max(eps), h_max_over_omega_per_epsilon: th.h_over_omega_per_epsilon(), summary, threshold: th });
    }
    let mut out = Output::new("threshold", t, json!({ "epsilon": eps, "clusters": entries }));
    out.warnings = warnings;
    Ok(out)
}

pub fn thermal(cfg: &RunConfig) -> CliResult<Output> {
    let s = setup(cfg)?;
    let ctx = cfg.thermal()?;
    let tau = *cfg.tau_grid()?.last().unwrap();
    let (found, warnings) = clusters(cfg, &s)?;
    let mut t = Table::new(&[
        "cluster",
        "tau",
        "mode",
        "omega",
        "energy_ev",
        "occupation",
        "photons_vacuum",
        "photons_thermal",
        "enhancement",
        "exact_ratio",
    ]);
    let mut reports: Vec<ThermalReport> = Vec::new();
    for (i, c) in found.iter().enumerate() {
        let r = thermal_report(c, &ctx, tau)?;
        for m in &r.modes {
            t.push(vec![
                i.into(),
                tau.into(),
                mode_cell(m.mode),
                m.omega.into(),
                m.energy_ev.into(),
                m.occupation.into(),
                m.vacuum.into(),
                m.thermal.into(),
                r.enhancement.factor.into(),
                r.enhancement.exact_ratio.into(),
            ]);
        }
        reports.push(r);
    }
    let mut out = Output::new("thermal", t, json!({ "tau": tau, "clusters": reports }));
    out.warnings = warnings;
    Ok(out)
}

/// Observables of one sweep point: `(cluster, observable, mode, value)`.
type PointRows = Vec<(Cell, &'static str, Cell, Cell)>;

fn sweep_point(cfg: &RunConfig) -> CliResult<PointRows> {
    let s = setup(cfg)?;
    let alpha = cfg.alpha()?;
    let tau = *cfg.tau_grid()?.last().unwrap();
    let ctx = cfg.thermal()?;
    let found = match clusters(cfg, &s) {
        Ok((f, _)) => f,
        Err(CliError::Config(_)) => return Ok(vec![(Cell::Empty, "clusters", Cell::Empty, 0usize.into())]),
        Err(e) => return Err(e),
    };
    let mut rows: PointRows = vec![(Cell::Empty, "clusters", Cell::Empty, found.len().into())];
    for (i, c) in found.iter().enumerate() {
        let modes: Vec<String> = c.modes().iter().map(|m| m.to_string()).collect();
        rows.push((i.into(), "members", Cell::Empty, modes.join(" ").into()));
        let sys = build_msa_matrix(c, alpha)?;
        rows.push((i.into(), "growth_rate", Cell::Empty, sys.growth_rate().into()));
        rows.push((i.into(), "growth_over_gamma", Cell::Empty, (sys.growth_rate() / sys.gamma_ref).into()));
        let sol = sys.evolve(tau)?;
        for (k, m) in sol.modes.iter().enumerate() {
            rows.push((i.into(), "photons", mode_cell(*m), sol.photons_at(k).into()));
        }
        if !ctx.is_zero() {
            let r = thermal_report(c, &ctx, tau)?;
            rows.push((i.into(), "enhancement", Cell::Empty, r.enhancement.factor.into()));
        }
    }
    Ok(rows)
}

fn point_config(base: &RunConfig, parameter: &str, v: f64) -> CliResult<RunConfig> {
    let mut c = base.clone();
    c.sweep = None;
    match parameter {
        "alpha" => c.drive.alpha = Some(v),
        "detuning" => {
            c.drive.alpha = None;
            c.drive.detuning = v;
        }
        "epsilon" => c.drive.epsilon = v,
        "tau" => {
            c.analysis.tau = Some(vec![v]);
            c.analysis.tau_max = None;
        }
        "ly_over_lx" => {
            c.geometry.ly = Some(v * c.geometry.lx);
            c.geometry.ry2 = None;
            c.geometry.rz2 = None;
        }
        "temperature_k" => {
            c.analysis.temperature_k = Some(v);
            c.analysis.beta = None;
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown sweep parameter {other:?}; expected alpha, detuning, epsilon, tau, ly_over_lx or temperature_k"
            )))
        }
    }
    Ok(c)
}

pub fn sweep(cfg: &RunConfig) -> CliResult<Output> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("a [sweep] table is required".into()))?;
    let points = sw.points()?;
    // every point is validated before any evaluation starts
    let configs: Vec<RunConfig> =
        points.iter().map(|&v| point_config(cfg, &sw.parameter, v)).collect::<CliResult<_>>()?;
    for c in &configs {
        c.geometry()?;
        c.epsilon()?;
        c.alpha()?;
        c.tau_grid()?;
        c.thermal()?;
    }
    let evaluated: Vec<CliResult<PointRows>> = configs.par_iter().map(sweep_point).collect();

    let mut t = Table::new(&["point", "parameter", "value", "cluster", "observable", "mode", "result"]);
    let mut json_points = Vec::new();
    for (p, (v, rows)) in points.iter().zip(evaluated).enumerate() {
        let rows = rows?;
        let mut obs = Vec::new();
        for (cluster, name, mode, value) in rows {
            obs.push(json!({
                "cluster": cell_json(&cluster),
                "observable": name,
                "mode": cell_json(&mode),
                "result": cell_json(&value),
            }));
            t.push(vec![p.into(), sw.parameter.as_str().into(), (*v).into(), cluster, name.into(), mode, value]);
        }
        json_points.push(json!({ "value": v, "observables": obs }));
    }
    Ok(Output::new("sweep", t, json!({ "parameter": sw.parameter, "points": json_points })))
}

fn cell_json(c: &Cell) -> serde_json::Value {
    match c {
        Cell::Float(v) => json!(v),
        Cell::Int(v) => json!(v),
        Cell::Text(s) => json!(s),
        Cell::Empty => serde_json::Value::Null,
    }
}
