//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any check fails that is not listed as a known discrepancy.

use std::f64::consts::PI;
use std::time::Instant;

use dce_cli::commands;
use dce_cli::config::{OmegaSpec, RunConfig};
use dce_core::cavity::{coupling_coefficient, mode_frequency, CavityGeometry, Dimensionality, ModeIndex};
use dce_core::msa::{build_msa_matrix, cluster_of, detuning_threshold, ThresholdMethod, ThresholdOptions};
use dce_core::resonance::{build_coupling_cluster, find_equidistant_chains, DriveFrequency, SearchBounds};
use dce_core::thermal::{bose_occupation, enhancement_factor, thermal_photon_number, ThermalContext};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Check {
    id: &'static str,
    pass: bool,
    known: bool,
    detail: String,
    seconds: f64,
}

fn run(id: &'static str, known: bool, f: impl FnOnce() -> (bool, String)) -> Check {
    let start = Instant::now();
    let (pass, detail) = f();
    Check { id, pass, known, detail, seconds: start.elapsed().as_secs_f64() }
}

fn gamma() -> f64 {
    PI / (2.0 * 3f64.sqrt())
}

fn cube_drive() -> DriveFrequency {
    DriveFrequency::twice_mode(&CavityGeometry::cube(), ModeIndex::new(1, 1, 1)).unwrap()
}

fn cube_pair() -> dce_core::msa::MsaSystem {
    let g = CavityGeometry::cube();
    let c = cluster_of(&g, &cube_drive(), &[ModeIndex::new(1, 1, 1), ModeIndex::new(5, 1, 1)]).unwrap();
    build_msa_matrix(&c, 0.0).unwrap()
}

fn cube_singleton() -> dce_core::msa::MsaSystem {
    let g = CavityGeometry::cube();
    build_msa_matrix(&cluster_of(&g, &cube_drive(), &[ModeIndex::new(1, 1, 1)]).unwrap(), 0.0).unwrap()
}

fn couple_modes(spec: &str) -> Vec<String> {
    let mut cfg = RunConfig::default();
    cfg.drive.omega = Some(OmegaSpec::Symbolic(spec.into()));
    let out = commands::couple(&cfg).expect("couple");
    let clusters = out.result["clusters"].as_array().cloned().unwrap_or_default();
    let seed = spec.trim_start_matches("2*omega").to_string();
    // degenerate parametric modes form their own clusters; keep the one holding the seed
    clusters
        .iter()
        .map(|c| {
            c["members"]
                .as_array()
                .unwrap()
                .iter()
                .map(|m| {
                    let x = &m["mode"];
                    format!("({},{},{})", x["nx"], x["ny"], x["nz"])
                })
                .collect::<Vec<_>>()
        })
        .find(|members| members.contains(&seed))
        .unwrap_or_default()
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn criterion1() -> (bool, String) {
    let a = couple_modes("2*omega(1,1,1)");
    let b = couple_modes("2*omega(11,16,13)");
    let pass = a == ["(1,1,1)", "(5,1,1)"] && b == ["(11,16,13)", "(67,16,13)", "(115,16,13)"];
    (pass, format!("{a:?}; {b:?}"))
}

fn criterion2() -> (bool, String) {
    let g = gamma();
    let nu = g * 291f64.sqrt() / 6.0;
    let ev = cube_pair().eigenvalues();
    let expected = [
        Complex64::new(g / 2.0, nu),
        Complex64::new(g / 2.0, -nu),
        Complex64::new(-g / 2.0, nu),
        Complex64::new(-g / 2.0, -nu),
    ];
    let err = expected
        .iter()
        .map(|z| ev.iter().map(|w| (w - z).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let c = [(g / 2.0) / nu, (5.0 * g / 3.0) / nu, 3.0 * (5.0 * g / 3.0) / nu];
    let printed = [0.18, 0.59, 1.76];
    let consts_ok = c.iter().zip(printed).all(|(x, p)| round2(*x) == p);
    let paper_ok = round2(g / 2.0) == 0.45 && (round2(nu) - 2.57).abs() <= 0.011;
    let pass = err < 1e-10 && consts_ok && paper_ok;
    (
        pass,
        format!("gamma/2 = {:.6}, nu = {nu:.6}, eigen error {err:.2e}, constants {:.4} {:.4} {:.4}", g / 2.0, c[0], c[1], c[2]),
    )
}

/// Least-squares slope of `log ⟨N_total⟩` over `[a, b]`.
fn log_slope(sys: &dce_core::msa::MsaSystem, a: f64, b: f64) -> f64 {
    let taus: Vec<f64> = (0..=200).map(|i| a + (b - a) * i as f64 / 200.0).collect();
    let ys: Vec<f64> =
        sys.evolve_many(&taus).unwrap().iter().map(|s| s.photon_numbers().iter().sum::<f64>().ln()).collect();
    let n = taus.len() as f64;
    let (mt, my) = (taus.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = taus.iter().zip(&ys).map(|(t, y)| (t - mt) * (y - my)).sum();
    let den: f64 = taus.iter().map(|t| (t - mt).powi(2)).sum();
    num / den
}

fn criterion3a() -> (bool, String) {
    let g = gamma();
    let pair = log_slope(&cube_pair(), 2.0, 4.0);
    ((pair - g).abs() <= 0.05 * g, format!("pair slope on [2, 4] {pair:.4} vs {g:.4}"))
}

fn criterion3b() -> (bool, String) {
    let g = gamma();
    let sys = cube_pair();
    let late = log_slope(&sys, 10.0, 20.0);
    let rate = 2.0 * sys.growth_rate();
    let ok = (late - g).abs() <= 0.05 * g && (rate - g).abs() <= 1e-10;
    (ok, format!("pair slope on [10, 20] {late:.4}, twice the leading real part {rate:.10}"))
}

fn criterion3c() -> (bool, String) {
    let g = gamma();
    let single_sys = cube_singleton();
    let single = log_slope(&single_sys, 2.0, 4.0);
    let ratio = single_sys.growth_rate() / cube_pair().growth_rate();
    let ok = (single - 2.0 * g).abs() <= 0.05 * 2.0 * g && (ratio - 2.0).abs() <= 1e-10;
    (ok, format!("singleton slope on [2, 4] {single:.4} vs 2*gamma*kx {:.4}; rate ratio {ratio:.10}", 2.0 * g))
}

fn criterion4() -> (bool, String) {
    let sys = cube_singleton();
    let g = gamma();
    let mut worst: f64 = 0.0;
    for i in 0..=30 {
        let tau = 0.1 * i as f64;
        let n = sys.evolve(tau).unwrap().photons_at(0);
        let want = (g * tau).sinh().powi(2);
        worst = worst.max((n - want).abs() / want.max(1.0));
    }
    (worst <= 1e-10, format!("max deviation {worst:.2e}"))
}

fn criterion5() -> (bool, String) {
    let mut cfg = RunConfig::default();
    cfg.drive.omega = Some(OmegaSpec::Symbolic("2*omega(1,1,1)".into()));
    cfg.drive.epsilon = 1e-3;
    cfg.analysis.tau = Some(vec![1.0]);
    cfg.analysis.k_max = Some(20);
    let out = match commands::integrate(&cfg) {
        Ok(o) => o,
        Err(e) => return (false, format!("integration failed: {e}")),
    };
    let run = &out.result["runs"][0];
    let spec = &run["spectrum"];
    let photons: Vec<f64> = spec["photons"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let msa: Vec<Option<f64>> = run["msa_photons"].as_array().unwrap().iter().map(Value::as_f64).collect();
    let defect = spec["unitarity_defect"].as_f64().unwrap();
    let mut detail = Vec::new();
    let mut pass = defect < 1e-4;
    for x in [1usize, 5] {
        let (d, m) = (photons[x - 1], msa[x - 1].unwrap_or(f64::NAN));
        let rel = (d - m).abs() / m;
        pass &= rel < 0.1;
        detail.push(format!("x={x}: direct {d:.6} msa {m:.6} rel {rel:.2e}"));
    }
    detail.push(format!("unitarity defect {defect:.2e}"));
    (pass, detail.join(", "))
}

fn criterion6() -> (bool, String) {
    let g = CavityGeometry::new(1.0, 0.8, 1.3, Dimensionality::Three).unwrap();
    let (s, p) = (ModeIndex::new(1, 1, 1), ModeIndex::new(2, 1, 1));
    let d = DriveFrequency::mode_sum(&g, s, p).unwrap();
    let sys = build_msa_matrix(&cluster_of(&g, &d, &[s, p]).unwrap(), 0.0).unwrap();
    let (ws, wp) = (mode_frequency(&g, s).unwrap(), mode_frequency(&g, p).unwrap());
    let rate = PI * PI * 2.0 / (2.0 * (ws * wp).sqrt());
    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        let tau = 0.15 * i as f64;
        let sol = sys.evolve(tau).unwrap();
        let want = (rate * tau).sinh().powi(2);
        for k in 0..2 {
            worst = worst.max((sol.photons_at(k) - want).abs() / want.max(1.0));
        }
    }
    // s = p: the pair formula collapses to the singleton rate
    let k = ModeIndex::new(1, 1, 1);
    let wk = mode_frequency(&CavityGeometry::cube(), k).unwrap();
    let limit = PI * PI / (2.0 * wk);
    let sys1 = cube_singleton();
    let mut worst1: f64 = 0.0;
    for i in 0..=30 {
        let tau = 0.1 * i as f64;
        let want = (limit * tau).sinh().powi(2);
        worst1 = worst1.max((sys1.evolve(tau).unwrap().photons_at(0) - want).abs() / want.max(1.0));
    }
    let limit_ok = (limit - gamma()).abs() < 1e-14;
    (worst <= 1e-10 && worst1 <= 1e-10 && limit_ok, format!("pair deviation {worst:.2e}, s = p deviation {worst1:.2e}"))
}

fn criterion7() -> (bool, String) {
    let g = CavityGeometry::square();
    let d = DriveFrequency::twice_mode(&g, ModeIndex::planar(1, 3)).unwrap();
    let want = [ModeIndex::planar(13, 39), ModeIndex::planar(27, 39), ModeIndex::planar(37, 39)];
    let found = find_equidistant_chains(&g, &d, 40).unwrap().into_iter().any(|c| c == want);
    let sys = build_msa_matrix(&cluster_of(&g, &d, &want).unwrap(), 0.0).unwrap();
    let growth = sys.growth_rate();
    let taus: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
    let sols = sys.evolve_many(&taus).unwrap();
    let max_n = sols.iter().flat_map(|s| s.photon_numbers()).fold(0.0, f64::max);
    // exchange between members: weight of the first member in the evolution started from it
    let w0 = 2.0 * sys.cluster.members[0].frequency;
    let occ: Vec<f64> = sols.iter().map(|s| w0 * s.b[0][0].norm_sqr()).collect();
    let swing = occ.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = found && growth < 1e-12 && max_n < 1.0;
    (pass, format!("found {found}, max Re = {growth:.2e}, max <N> = {max_n:.2e}, min self weight {swing:.3}"))
}

fn criterion8a() -> (bool, String) {
    let sys = cube_singleton();
    let opts = ThresholdOptions::default();
    let th = detuning_threshold(&sys.cluster, &opts).unwrap();
    let want = 2.0 * gamma();
    let num = th.numeric.unwrap_or(f64::NAN);
    let rel = (num - want).abs() / want;
    let eps = 1e-3;
    let h_ok = (th.h_max(eps) - 2.0 * eps * gamma()).abs() <= 1e-6 * 2.0 * eps * gamma();
    (rel <= 1e-6 && h_ok, format!("numeric {num:.10} vs 2*gamma*kx {want:.10}, rel {rel:.1e}"))
}

/// Growth rate of the cube pair from the characteristic polynomial, written out independently.
fn pair_threshold_oracle() -> f64 {
    let (w1, w5) = (PI * 3f64.sqrt(), PI * 27f64.sqrt());
    let omega = 2.0 * w1;
    let p = PI * PI / (2.0 * w1);
    let gk = coupling_coefficient(ModeIndex::new(1, 1, 1), ModeIndex::new(5, 1, 1));
    // difference-coupling weights between the partners
    let a = (w5 - omega / 2.0) * (omega / (2.0 * w1)) * gk;
    let b = (w1 + omega / 2.0) * (omega / (2.0 * w5)) * -gk;
    let ab = a * b;
    let b1 = p * p - 4.0 * ab;
    let c0 = p * p * (p * p + 4.0 * ab);
    let x = (-b1 + (b1 * b1 - c0).sqrt()) / 2.0;
    x.sqrt()
}

fn criterion8b() -> (bool, String) {
    let sys = cube_pair();
    let th = detuning_threshold(&sys.cluster, &ThresholdOptions::default()).unwrap();
    let (cf, num) = (th.closed_form.unwrap_or(f64::NAN), th.numeric.unwrap_or(f64::NAN));
    let rel = (num - cf).abs() / cf;
    let oracle = pair_threshold_oracle();
    let rel_oracle = (cf - oracle).abs() / oracle;
    let pass = th.method == ThresholdMethod::ClosedForm && rel <= 1e-6 && rel_oracle <= 1e-10;
    (
        pass,
        format!(
            "closed form {cf:.10} ({:.4} gamma), bisection {num:.10}, rel {rel:.1e}, oracle rel {rel_oracle:.1e}",
            cf / gamma()
        ),
    )
}

fn criterion8c() -> (bool, String) {
    let sys = cube_pair();
    let th = detuning_threshold(&sys.cluster, &ThresholdOptions::default()).unwrap();
    let per_gamma = th.in_units_of_gamma();
    let per_omega = th.h_over_omega_per_epsilon();
    let pass = round2(per_gamma) == 0.68 && round2(per_omega) == 0.06;
    (pass, format!("computed {per_gamma:.4} eps gamma and {per_omega:.4} eps Omega vs printed 0.68 and 0.06"))
}

fn criterion9() -> (bool, String) {
    let ctx = ThermalContext::physical(290.0, 1.0).unwrap();
    let pair = cube_pair();
    let e = enhancement_factor(&pair.cluster, &ctx, 1.0).unwrap();
    // independent occupation numbers
    let occ = |w: f64| {
        let energy = 1.973269804e-5 * w / 1.0;
        1.0 / ((energy / (8.617333262e-5 * 290.0)).exp() - 1.0)
    };
    let (nk, nj) = (occ(PI * 3f64.sqrt()), occ(PI * 27f64.sqrt()));
    let factor = 1.0 + nk + nj;
    let in_window = (300.0..=320.0).contains(&e.factor) && (e.factor - factor).abs() < 1e-9 * factor;

    let single = cube_singleton();
    let w = single.cluster.members[0].frequency;
    let n = bose_occupation(w, &ctx).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        let tau = 0.15 * i as f64;
        let sol = single.evolve(tau).unwrap();
        let vac = sol.photons_at(0);
        let th = thermal_photon_number(&sol, ModeIndex::new(1, 1, 1), &ctx).unwrap();
        let want = vac * (1.0 + 2.0 * n) + n;
        worst = worst.max((th - want).abs() / want);
    }
    (in_window && worst <= 1e-12, format!("enhancement {:.3} (oracle {factor:.3}), diagonal deviation {worst:.1e}", e.factor))
}

fn has(ev: &[Complex64], z: Complex64, tol: f64) -> bool {
    ev.iter().any(|w| (w - z).norm() <= tol)
}

fn criterion10() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(20_241_014);
    let mut failures = Vec::new();

    let mut g_bad = 0;
    for _ in 0..10_000 {
        let k = ModeIndex::new(rng.random_range(1..60), rng.random_range(1..5), rng.random_range(1..5));
        let j = ModeIndex::new(rng.random_range(1..60), rng.random_range(1..5), rng.random_range(1..5));
        let gkj = coupling_coefficient(k, j);
        let ok = gkj == -coupling_coefficient(j, k)
            && if k.transverse() != j.transverse() || k.nx == j.nx {
                gkj == 0.0
            } else {
                let (a, b) = (k.nx as f64, j.nx as f64);
                let sign = if (k.nx + j.nx) % 2 == 0 { 1.0 } else { -1.0 };
                (gkj - sign * 2.0 * a * b / (b * b - a * a)).abs() <= 1e-15 * gkj.abs()
            };
        g_bad += usize::from(!ok);
    }
    if g_bad > 0 {
        failures.push(format!("{g_bad} coupling pairs"));
    }

    let mut quad_bad = 0;
    let mut unit_bad = 0;
    let mut scale_bad = 0;
    for i in 0..1_000 {
        let p: i64 = rng.random_range(1..8);
        let q: i64 = rng.random_range(1..8);
        let ry2 = dce_core::cavity::parse_rational(&format!("{p}/{q}")).unwrap();
        let rz2 = dce_core::cavity::parse_rational(&format!("{q}/{}", p + q)).unwrap();
        let geo = CavityGeometry::from_ratios(Dimensionality::Three, ry2, rz2).unwrap();
        let k = ModeIndex::new(rng.random_range(1..8), rng.random_range(1..5), rng.random_range(1..5));
        let bounds = SearchBounds { max_x_index: 200, ..SearchBounds::default() };
        let (cluster, drive) = if i % 2 == 0 {
            let d = DriveFrequency::twice_mode(&geo, k).unwrap();
            match build_coupling_cluster(&geo, &d, &[k], bounds) {
                Ok(c) => (c, d),
                Err(_) => continue,
            }
        } else {
            let j = k.with_nx(k.nx + rng.random_range(1..10));
            let d = DriveFrequency::mode_sum(&geo, k, j).unwrap();
            (cluster_of(&geo, &d, &[k, j]).unwrap(), d)
        };
        let alpha = if i % 2 == 0 { rng.random_range(-2.0..2.0) } else { 0.0 };
        let sys = build_msa_matrix(&cluster, alpha).unwrap();
        let ev = sys.eigenvalues();
        let scale = ev.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let tol = 1e-9 * scale;
        if !ev.iter().all(|&z| has(&ev, -z, tol) && has(&ev, z.conj(), tol)) {
            quad_bad += 1;
        }
        if cluster.len() <= 2 {
            for tau in [0.0, 0.5, 1.0, 2.0] {
                let sol = sys.evolve(tau).unwrap();
                let r = 1.0 + sol.photon_numbers().iter().sum::<f64>();
                if sol.unitarity_defect() > 1e-10 * r {
                    unit_bad += 1;
                }
            }
        }
        if i % 2 == 0 {
            let s: f64 = rng.random_range(0.1..10.0);
            let gs = geo.scaled(s).unwrap();
            let ds = drive.rescaled(s);
            let scaled = build_coupling_cluster(&gs, &ds, &[k], bounds);
            match scaled {
                Ok(c) if c.modes() == cluster.modes() => {}
                _ => scale_bad += 1,
            }
        }
    }
    for (n, what) in [(quad_bad, "spectra"), (unit_bad, "unitarity samples"), (scale_bad, "rescaled clusters")] {
        if n > 0 {
            failures.push(format!("{n} {what}"));
        }
    }
    let pass = failures.is_empty();
    (pass, if pass { "1e4 coupling pairs, 1e3 clusters".into() } else { failures.join(", ") })
}

fn main() {
    let checks = vec![
        run("1", false, criterion1),
        run("2", false, criterion2),
        run("3a", true, criterion3a),
        run("3b", false, criterion3b),
        run("3c", false, criterion3c),
        run("4", false, criterion4),
        run("5", false, criterion5),
        run("6", false, criterion6),
        run("7", false, criterion7),
        run("8a", false, criterion8a),
        run("8b", false, criterion8b),
        run("8c", true, criterion8c),
        run("9", false, criterion9),
        run("10", false, criterion10),
    ];
    let mut unexpected = 0;
    for c in &checks {
        let status = match (c.pass, c.known) {
            (true, _) => "PASS".to_string(),
            (false, true) => "FAIL (known discrepancy)".to_string(),
            (false, false) => {
                unexpected += 1;
                "FAIL".to_string()
            }
        };
        println!("criterion {:<3} {status}  [{:.2} s] {}", c.id, c.seconds, c.detail);
    }
    let passed = checks.iter().filter(|c| c.pass).count();
    println!("{passed}/{} checks passed", checks.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
