//! Direct integration of the exact coupled mode equations for one
//! transverse family, used as an independent check of the MSA results.
//!
//! `Q̈_k + ω_k²(t) Q_k = 2λ Σ_j g_kj Q̇_j + λ̇ Σ_j g_kj Q_j + λ² Σ_{j,l} g_lk g_lj Q_j`
//! with `λ = L̇/L`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{coupling_x, frequency_at, CavityGeometry, ModeIndex};
use crate::error::{domain, Result};
use crate::ode::{self, SolverOptions, SolverStats};

/// `L(t) = L0 (1 + ε w(t) (sin(Ω(t − t_d)) + f(t − t_d)))`, `f(s) = −Ωs e^{−α_f s}`,
/// at rest before the delay `t_d`. The optional window `w` is a raised
/// cosine over the final `window` time units that brings the wall back to
/// `L0` with zero velocity at `t_final`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallTrajectory {
    pub l0: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub alpha_f: f64,
    pub t_final: f64,
    pub window: Option<f64>,
    pub delay: f64,
}

/// Wall position and its first two derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallState {
    pub l: f64,
    pub l_dot: f64,
    pub l_ddot: f64,
}

impl WallState {
    /// `λ = L̇/L` and `λ̇`.
    pub fn lambda(&self) -> (f64, f64) {
        let lam = self.l_dot / self.l;
        (lam, self.l_ddot / self.l - lam * lam)
    }
}

impl WallTrajectory {
    /// Defaults: `α_f = Ω`, a one-period stop window, no delay.
    pub fn new(l0: f64, epsilon: f64, omega: f64, t_final: f64) -> Result<Self> {
        WallTrajectory { l0, epsilon, omega, alpha_f: omega, t_final, window: Some(2.0 * PI / omega), delay: 0.0 }
            .validated()
    }

    pub fn with_alpha_f(mut self, alpha_f: f64) -> Result<Self> {
        self.alpha_f = alpha_f;
        self.validated()
    }

    pub fn with_window(mut self, window: Option<f64>) -> Result<Self> {
        self.window = window;
        self.validated()
    }

    pub fn with_delay(mut self, delay: f64) -> Result<Self> {
        self.delay = delay;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.l0) || !pos(self.omega) || !pos(self.alpha_f) {
            return domain("wall length, drive frequency and startup rate must be positive");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return domain("amplitude must be finite and nonnegative");
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) || !(self.delay >= 0.0 && self.delay.is_finite()) {
            return domain("stop time and delay must be finite and nonnegative");
        }
        if let Some(w) = self.window {
            if !pos(w) {
                return domain("stop window must be positive");
            }
            if self.t_final - w < self.delay {
                return domain("stop window starts before the drive");
            }
        }
        Ok(self)
    }

    fn window_at(&self, t: f64) -> (f64, f64, f64) {
        match self.window {
            None => (1.0, 0.0, 0.0),
            Some(w) => {
                let start = self.t_final - w;
                if t <= start {
                    (1.0, 0.0, 0.0)
                } else if t >= self.t_final {
                    (0.0, 0.0, 0.0)
                } else {
                    let k = PI / w;
                    let (s, c) = (k * (t - start)).sin_cos();
                    (0.5 * (1.0 + c), -0.5 * k * s, -0.5 * k * k * c)
                }
            }
        }
    }

    /// Drive shape `sin Ωs + f(s)` and derivatives, `s = t − t_d`.
    fn shape(&self, s: f64) -> (f64, f64, f64) {
        let (om, a) = (self.omega, self.alpha_f);
        let (sn, cs) = (om * s).sin_cos();
        let e = (-a * s).exp();
        let d = sn - om * s * e;
        let d1 = om * cs + (-om + om * a * s) * e;
        let d2 = -om * om * sn + (2.0 * om * a - om * a * a * s) * e;
        (d, d1, d2)
    }

    pub fn wall_position(&self, t: f64) -> WallState {
        if self.epsilon == 0.0 || t <= self.delay || (self.window.is_some() && t >= self.t_final) {
            return WallState { l: self.l0, l_dot: 0.0, l_ddot: 0.0 };
        }
        let (d, d1, d2) = self.shape(t - self.delay);
        let (w, w1, w2) = self.window_at(t);
        let k = self.l0 * self.epsilon;
        WallState {
            l: self.l0 + k * w * d,
            l_dot: k * (w1 * d + w * d1),
            l_ddot: k * (w2 * d + 2.0 * w1 * d1 + w * d2),
        }
    }

    /// Whether the wall is exactly at `L0` and at rest for all times after `t`.
    pub fn at_rest(&self, t: f64) -> bool {
        self.epsilon == 0.0 || (self.window.is_some() && t >= self.t_final)
    }

    /// Driven time scaled by `ε`, counting the window at half weight.
    pub fn effective_slow_time(&self) -> f64 {
        let w = self.window.unwrap_or(0.0);
        self.epsilon * (self.t_final - self.delay - 0.5 * w).max(0.0)
    }
}

/// Modes `(1..=K, k_y, k_z)` and their couplings.
#[derive(Clone, Debug)]
pub struct ModeFamilySystem {
    pub geometry: CavityGeometry,
    pub transverse: (u32, u32),
    pub k_max: u32,
    /// Row-major `g_kj`.
    pub g: Vec<f64>,
    /// Row-major `Σ_l g_lk g_lj`.
    pub g_sq: Vec<f64>,
    transverse_term: f64,
}

/// Builds the family with x-indices `1..=k_max`.
pub fn assemble_family(geometry: &CavityGeometry, transverse: (u32, u32), k_max: u32) -> Result<ModeFamilySystem> {
    if k_max == 0 {
        return domain("truncation must keep at least one mode");
    }
    geometry.validate_mode(ModeIndex::new(1, transverse.0, transverse.1))?;
    let k = k_max as usize;
    let mut g = vec![0.0; k * k];
    for r in 0..k {
        for c in 0..k {
            g[r * k + c] = coupling_x(r as u32 + 1, c as u32 + 1);
        }
    }
    let mut g_sq = vec![0.0; k * k];
    for r in 0..k {
        for c in 0..k {
            g_sq[r * k + c] = (0..k).map(|l| g[l * k + r] * g[l * k + c]).sum();
        }
    }
    let transverse_term = PI * PI * geometry.transverse_norm_sq(transverse.0, transverse.1) / geometry.lx().powi(2);
    Ok(ModeFamilySystem { geometry: geometry.clone(), transverse, k_max, g, g_sq, transverse_term })
}

/// Default truncation for a family whose largest resonant x-index is `kx`.
pub fn default_truncation(largest_resonant_x: u32) -> u32 {
    4 * largest_resonant_x.max(1)
}

impl ModeFamilySystem {
    pub fn len(&self) -> usize {
        self.k_max as usize
    }

    pub fn is_empty(&self) -> bool {
        self.k_max == 0
    }

    pub fn mode(&self, i: usize) -> ModeIndex {
        ModeIndex::new(i as u32 + 1, self.transverse.0, self.transverse.1)
    }

    pub fn modes(&self) -> Vec<ModeIndex> {
        (0..self.len()).map(|i| self.mode(i)).collect()
    }

    pub fn g_at(&self, k: usize, j: usize) -> f64 {
        self.g[k * self.len() + j]
    }

    /// Static frequencies with the wall at `L0 = lx`.
    pub fn static_frequencies(&self) -> Vec<f64> {
        (0..self.len()).map(|i| frequency_at(&self.geometry, self.geometry.lx(), self.mode(i))).collect()
    }

    fn frequency_sq_into(&self, wall: f64, out: &mut [f64]) {
        let q = PI / wall;
        for (i, o) in out.iter_mut().enumerate() {
            let kx = (i + 1) as f64;
            *o = q * q * kx * kx + self.transverse_term;
        }
    }
}

/// `Q_k^{(n)}` and `Q̇_k^{(n)}` for every family member at time `t`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StateVector {
    pub t: f64,
    pub q: Vec<Complex64>,
    pub q_dot: Vec<Complex64>,
}

/// Samples of one integration started in family member `n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrationRun {
    pub initial: ModeIndex,
    pub trace: Vec<StateVector>,
    pub stats: SolverStats,
}

impl IntegrationRun {
    pub fn final_state(&self) -> &StateVector {
        self.trace.last().expect("runs always hold at least one sample")
    }
}

/// Real layout: column `c` holds `(Q, Q̇)` of length `2K`; column 0 is the
/// real part of the solution and column 1 the imaginary part.
fn rhs(
    family: &ModeFamilySystem,
    traj: &WallTrajectory,
    w2: &mut [f64],
    coupling: &mut [f64],
    t: f64,
    y: &[f64],
    dy: &mut [f64],
) {
    let k = family.len();
    let wall = traj.wall_position(t);
    let (lam, lam_dot) = wall.lambda();
    family.frequency_sq_into(wall.l, w2);
    let moving = lam != 0.0 || lam_dot != 0.0;
    if moving {
        let l2 = lam * lam;
        for (c, (g, h)) in coupling.iter_mut().zip(family.g.iter().zip(&family.g_sq)) {
            *c = lam_dot * g + l2 * h;
        }
    }
    for (col, dcol) in y.chunks_exact(2 * k).zip(dy.chunks_exact_mut(2 * k)) {
        let (q, qd) = col.split_at(k);
        let (dq, dqd) = dcol.split_at_mut(k);
        dq.copy_from_slice(qd);
        for r in 0..k {
            let mut acc = -w2[r] * q[r];
            if moving {
                let grow = &family.g[r * k..(r + 1) * k];
                let crow = &coupling[r * k..(r + 1) * k];
                let mut s1 = 0.0;
                let mut s2 = 0.0;
                for j in 0..k {
                    s1 += grow[j] * qd[j];
                    s2 += crow[j] * q[j];
                }
                acc += 2.0 * lam * s1 + s2;
            }
            dqd[r] = acc;
        }
    }
}

fn unpack(k: usize, t: f64, y: &[f64]) -> StateVector {
    let re = &y[..2 * k];
    let im = &y[2 * k..4 * k];
    StateVector {
        t,
        q: (0..k).map(|i| Complex64::new(re[i], im[i])).collect(),
        q_dot: (0..k).map(|i| Complex64::new(re[k + i], im[k + i])).collect(),
    }
}

/// Integrates the family from the vacuum of member `n` (x-index, 1-based),
/// sampling at `samples` (ascending; empty means `[t_final]`).
pub fn integrate(
    family: &ModeFamilySystem,
    trajectory: &WallTrajectory,
    n: u32,
    solver: &SolverOptions,
    samples: &[f64],
) -> Result<IntegrationRun> {
    if n == 0 || n > family.k_max {
        return domain(format!("initial mode index {n} is outside 1..={}", family.k_max));
    }
    let k = family.len();
    let idx = n as usize - 1;
    let omega_n = family.static_frequencies()[idx];
    let mut y0 = vec![0.0; 4 * k];
    y0[idx] = 1.0 / (2.0 * omega_n).sqrt();
    y0[2 * k + k + idx] = -(omega_n / 2.0).sqrt();

    let default_samples = [trajectory.t_final];
    let times = if samples.is_empty() { &default_samples[..] } else { samples };
    let mut w2 = vec![0.0; k];
    let mut coupling = vec![0.0; k * k];
    let mut trace = Vec::with_capacity(times.len());
    let (_, stats) = ode::integrate(
        |t, y, dy| rhs(family, trajectory, &mut w2, &mut coupling, t, y, dy),
        0.0,
        &y0,
        times,
        solver,
        |t, y| trace.push(unpack(k, t, y)),
    )?;
    Ok(IntegrationRun { initial: family.mode(idx), trace, stats })
}

/// Runs every initial member of the family concurrently.
pub fn integrate_family(
    family: &ModeFamilySystem,
    trajectory: &WallTrajectory,
    solver: &SolverOptions,
    samples: &[f64],
) -> Result<Vec<IntegrationRun>> {
    (1..=family.k_max)
        .into_par_iter()
        .map(|n| integrate(family, trajectory, n, solver, samples))
        .collect()
}

/// `A_k`, `B_k` of one initial condition, projected on static modes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeAmplitudes {
    pub t: f64,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    /// The wall was still moving, so the projection uses frequencies the
    /// field does not yet have.
    pub approximate: bool,
}

/// Inverts `Q = A e^{iωt} + B e^{−iωt}` and its derivative with the static
/// frequencies.
pub fn extract_bogoliubov(state: &StateVector, family: &ModeFamilySystem, trajectory: &WallTrajectory) -> ModeAmplitudes {
    let w = family.static_frequencies();
    let t = state.t;
    let i = Complex64::new(0.0, 1.0);
    let mut a = Vec::with_capacity(w.len());
    let mut b = Vec::with_capacity(w.len());
    for ((q, qd), &wk) in state.q.iter().zip(&state.q_dot).zip(&w) {
        let ph = Complex64::from_polar(1.0, wk * t);
        a.push(ph.conj() * (q - i * qd / wk) / 2.0);
        b.push(ph * (q + i * qd / wk) / 2.0);
    }
    ModeAmplitudes { t, a, b, approximate: !trajectory.at_rest(t) }
}

/// Photon counts of a family at one time with truncation diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhotonSpectrum {
    pub t: f64,
    pub modes: Vec<ModeIndex>,
    pub frequencies: Vec<f64>,
    pub photons: Vec<f64>,
    /// `Σ_n 2ω_k(|B|² − |A|²)` per mode.
    pub unitarity: Vec<f64>,
    pub unitarity_defect: f64,
    /// Counts of the two highest retained modes, highest last.
    pub edge_occupancy: Vec<f64>,
    pub approximate: bool,
    pub stats: SolverStats,
}

impl PhotonSpectrum {
    pub fn photons_of(&self, mode: ModeIndex) -> Option<f64> {
        self.modes.iter().position(|&m| m == mode).map(|i| self.photons[i])
    }
}

/// Photon spectrum at sample `sample` of a complete set of runs.
pub fn photon_spectrum_at(
    runs: &[IntegrationRun],
    family: &ModeFamilySystem,
    trajectory: &WallTrajectory,
    sample: usize,
) -> Result<PhotonSpectrum> {
    let k = family.len();
    let mut by_n: Vec<Option<&IntegrationRun>> = vec![None; k];
    for r in runs {
        if r.initial.transverse() != family.transverse || r.initial.nx == 0 || r.initial.nx > family.k_max {
            return domain(format!("run for {} does not belong to the family", r.initial));
        }
        let slot = &mut by_n[r.initial.nx as usize - 1];
        if slot.is_some() {
            return domain(format!("duplicate run for {}", r.initial));
        }
        *slot = Some(r);
    }
    if let Some(missing) = by_n.iter().position(|r| r.is_none()) {
        return domain(format!("missing run for initial mode {}", family.mode(missing)));
    }
    let states: Vec<&StateVector> = by_n
        .iter()
        .map(|r| r.and_then(|r| r.trace.get(sample)))
        .collect::<Option<_>>()
        .ok_or_else(|| crate::Error::Domain(format!("sample {sample} missing from some run")))?;
    let t = states[0].t;
    if states.iter().any(|s| s.t != t) {
        return domain("runs were sampled at different times");
    }

    let w = family.static_frequencies();
    let mut photons = vec![0.0; k];
    let mut unitarity = vec![0.0; k];
    let mut approximate = false;
    let mut stats = SolverStats::default();
    for (r, s) in by_n.iter().zip(&states) {
        let amp = extract_bogoliubov(s, family, trajectory);
        approximate |= amp.approximate;
        stats.merge(&r.unwrap().stats);
        for i in 0..k {
            photons[i] += 2.0 * w[i] * amp.a[i].norm_sqr();
            unitarity[i] += 2.0 * w[i] * (amp.b[i].norm_sqr() - amp.a[i].norm_sqr());
        }
    }
    let unitarity_defect = unitarity.iter().map(|u| (u - 1.0).abs()).fold(0.0, f64::max);
    let edge_occupancy = photons[k.saturating_sub(2)..].to_vec();
    Ok(PhotonSpectrum {
        t,
        modes: family.modes(),
        frequencies: w,
        photons,
        unitarity,
        unitarity_defect,
        edge_occupancy,
        approximate,
        stats,
    })
}

/// Spectrum at the last sample.
pub fn photon_spectrum(
    runs: &[IntegrationRun],
    family: &ModeFamilySystem,
    trajectory: &WallTrajectory,
) -> Result<PhotonSpectrum> {
    let last = runs.iter().map(|r| r.trace.len()).min().unwrap_or(0);
    if last == 0 {
        return domain("no samples to evaluate");
    }
    photon_spectrum_at(runs, family, trajectory, last - 1)
}

/// One CSV line of a trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub initial_x: u32,
    pub mode_x: u32,
    pub re_q: f64,
    pub im_q: f64,
    pub re_q_dot: f64,
    pub im_q_dot: f64,
}

pub fn trace_rows(run: &IntegrationRun) -> Vec<TraceRow> {
    run.trace
        .iter()
        .flat_map(|s| {
            s.q.iter().zip(&s.q_dot).enumerate().map(move |(i, (q, qd))| TraceRow {
                t: s.t,
                initial_x: run.initial.nx,
                mode_x: i as u32 + 1,
                re_q: q.re,
                im_q: q.im,
                re_q_dot: qd.re,
                im_q_dot: qd.im,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::msa::build_msa_matrix;
    use crate::resonance::{build_coupling_cluster, DriveFrequency, SearchBounds};
    use proptest::prelude::*;

    fn cube_drive() -> (CavityGeometry, f64) {
        let g = CavityGeometry::cube();
        let w = frequency_at(&g, 1.0, ModeIndex::new(1, 1, 1));
        (g, 2.0 * w)
    }

    #[test]
    fn trajectory_continuity() {
        let t = WallTrajectory::new(1.0, 0.01, 3.0, 50.0).unwrap();
        let s = t.wall_position(0.0);
        assert_eq!(s.l, 1.0);
        assert!(s.l_dot.abs() < 1e-15);
        let z = WallTrajectory::new(1.0, 0.0, 3.0, 50.0).unwrap();
        for x in [0.0, 1.3, 40.0] {
            assert_eq!(z.wall_position(x).l, 1.0);
        }
        // well after startup the transient is gone
        let x: f64 = 20.0;
        let want = 1.0 + 0.01 * (3.0 * x).sin();
        assert!((t.wall_position(x).l - want).abs() <= 0.01 * 3.0 * x * (-3.0 * x).exp() + 1e-15);
        let end = t.wall_position(50.0);
        assert_eq!((end.l, end.l_dot), (1.0, 0.0));
        assert!(t.at_rest(50.0) && !t.at_rest(49.0));
        assert!(WallTrajectory::new(1.0, 0.01, -1.0, 5.0).is_err());
        assert!(WallTrajectory::new(1.0, 0.01, 3.0, 1.0).is_err());
    }

    #[test]
    fn trajectory_derivatives_match_finite_differences() {
        let t = WallTrajectory::new(1.3, 0.05, 2.2, 20.0).unwrap().with_delay(0.4).unwrap();
        let h = 1e-5;
        for x in [0.9, 2.0, 18.0, 19.5] {
            let (m, c, p) = (t.wall_position(x - h), t.wall_position(x), t.wall_position(x + h));
            assert!(((p.l - m.l) / (2.0 * h) - c.l_dot).abs() < 1e-7);
            assert!(((p.l_dot - m.l_dot) / (2.0 * h) - c.l_ddot).abs() < 1e-6);
        }
    }

    #[test]
    fn family_couplings() {
        let g = CavityGeometry::cube();
        let f = assemble_family(&g, (1, 1), 2).unwrap();
        assert!((f.g_at(0, 1) + 4.0 / 3.0).abs() < 1e-15);
        assert!((f.g_at(1, 0) - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.g_at(0, 0), 0.0);
        let one = assemble_family(&g, (1, 1), 1).unwrap();
        assert_eq!(one.g, vec![0.0]);
        assert!(assemble_family(&g, (0, 1), 3).is_err());
        assert!(assemble_family(&g, (1, 1), 0).is_err());
    }

    #[test]
    fn static_cavity_keeps_vacuum() {
        let (g, omega) = cube_drive();
        let f = assemble_family(&g, (1, 1), 4).unwrap();
        let traj = WallTrajectory::new(1.0, 0.0, omega, 20.0).unwrap();
        let run = integrate(&f, &traj, 2, &SolverOptions::default(), &[5.0, 20.0]).unwrap();
        let w = f.static_frequencies()[1];
        for s in &run.trace {
            let want = Complex64::from_polar(1.0 / (2.0 * w).sqrt(), -w * s.t);
            assert!((s.q[1] - want).norm() < 1e-8);
            let amp = extract_bogoliubov(s, &f, &traj);
            assert!(amp.a.iter().all(|a| a.norm() < 1e-8));
            assert!((amp.b[1].re - 1.0 / (2.0 * w).sqrt()).abs() < 1e-8);
        }
        let runs = integrate_family(&f, &traj, &SolverOptions::default(), &[]).unwrap();
        let spec = photon_spectrum(&runs, &f, &traj).unwrap();
        assert!(spec.photons.iter().all(|&n| n < 1e-14));
        assert!(!spec.approximate);
    }

    #[test]
    fn spectrum_requires_every_run() {
        let (g, omega) = cube_drive();
        let f = assemble_family(&g, (1, 1), 3).unwrap();
        let traj = WallTrajectory::new(1.0, 0.0, omega, 2.0).unwrap();
        let mut runs = integrate_family(&f, &traj, &SolverOptions::default(), &[]).unwrap();
        runs.pop();
        assert!(photon_spectrum(&runs, &f, &traj).is_err());
        assert!(integrate(&f, &traj, 4, &SolverOptions::default(), &[]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn extraction_round_trip(
            re in prop::collection::vec(-1.0f64..1.0, 8),
            t in 0.0f64..50.0,
        ) {
            let g = CavityGeometry::cube();
            let f = assemble_family(&g, (1, 2), 2).unwrap();
            let w = f.static_frequencies();
            let a = [Complex64::new(re[0], re[1]), Complex64::new(re[2], re[3])];
            let b = [Complex64::new(re[4], re[5]), Complex64::new(re[6], re[7])];
            let i = Complex64::new(0.0, 1.0);
            let q: Vec<_> = (0..2).map(|k| a[k] * (i * w[k] * t).exp() + b[k] * (-i * w[k] * t).exp()).collect();
            let qd: Vec<_> = (0..2)
                .map(|k| i * w[k] * (a[k] * (i * w[k] * t).exp() - b[k] * (-i * w[k] * t).exp()))
                .collect();
            let traj = WallTrajectory::new(1.0, 0.0, 1.0, 60.0).unwrap();
            let amp = extract_bogoliubov(&StateVector { t, q, q_dot: qd }, &f, &traj);
            for k in 0..2 {
                prop_assert!((amp.a[k] - a[k]).norm() < 1e-12);
                prop_assert!((amp.b[k] - b[k]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn resonant_drive_matches_msa() {
        let (g, omega) = cube_drive();
        let eps = 1e-2;
        let traj = WallTrajectory::new(1.0, eps, omega, 100.0).unwrap();
        let f = assemble_family(&g, (1, 1), 10).unwrap();
        let runs = integrate_family(&f, &traj, &SolverOptions::default(), &[]).unwrap();
        let spec = photon_spectrum(&runs, &f, &traj).unwrap();
        assert!(spec.unitarity_defect < 1e-5, "{}", spec.unitarity_defect);

        let d = DriveFrequency::twice_mode(&g, ModeIndex::new(1, 1, 1)).unwrap();
        let c = build_coupling_cluster(&g, &d, &[ModeIndex::new(1, 1, 1)], SearchBounds::default()).unwrap();
        let sol = build_msa_matrix(&c, 0.0).unwrap().evolve(traj.effective_slow_time()).unwrap();
        let n1 = spec.photons_of(ModeIndex::new(1, 1, 1)).unwrap();
        let n5 = spec.photons_of(ModeIndex::new(5, 1, 1)).unwrap();
        let m1 = sol.photons_at(0);
        let m5 = sol.photons_at(1);
        assert!((n1 - m1).abs() < 0.1 * m1, "direct {n1} vs msa {m1}");
        assert!((n5 - m5).abs() < 0.15 * m5, "direct {n5} vs msa {m5}");
        for x in [2, 3, 4] {
            assert!(spec.photons_of(ModeIndex::new(x, 1, 1)).unwrap() < 0.05 * n1);
        }
    }
}
