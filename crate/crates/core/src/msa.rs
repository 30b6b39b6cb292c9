//! First-order multiple-scale reduction for a coupling cluster.
//!
//! The slow amplitudes are ordered `v = (B_1, A_1, …, B_N, A_N)` and obey
//! `dv/dτ = M v` with `τ = εt`. Detuning `h = εα` is handled in the frame
//! rotating each member at `μ_k α/2`, `μ_k = 2ω_k/Ω`.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cavity::{coupling_coefficient, frequency_at, CavityGeometry, ModeIndex};
use crate::error::{domain, Error, Result};
use crate::linalg::{eigenvalues, CMatrix, Propagator};
use crate::resonance::{
    ClusterReport, ConditionKind, CouplingCluster, DriveFrequency, ResonanceTester, SearchBounds,
};

const LABEL_TOLERANCE: f64 = 1e-6;

/// Growth rates below this multiple of `γ` count as zero when locating
/// thresholds numerically.
pub const GROWTH_EPSILON: f64 = 1e-7;

#[inline]
fn b_row(k: usize) -> usize {
    2 * k
}

#[inline]
fn a_row(k: usize) -> usize {
    2 * k + 1
}

/// Reduced linear system of one cluster at fixed detuning.
#[derive(Clone, Debug)]
pub struct MsaSystem {
    pub cluster: CouplingCluster,
    pub omega: f64,
    pub alpha: f64,
    pub matrix: CMatrix,
    /// `(k_x/Ω)(π/L_x)²` of the primary member.
    pub gamma_ref: f64,
    pub mu: Vec<f64>,
}

fn check_labels(cluster: &CouplingCluster) -> Result<()> {
    let close = |x: f64, y: f64| (x - y).abs() <= LABEL_TOLERANCE * y.abs().max(1.0);
    for m in &cluster.members {
        if !m.harmonic.is_finite() || m.harmonic <= 0.0 {
            return domain(format!("mode {} has harmonic label {}", m.mode, m.harmonic));
        }
        if m.parametric && !close(m.harmonic, 1.0) {
            return domain(format!("parametric mode {} labelled μ = {}", m.mode, m.harmonic));
        }
    }
    for c in &cluster.couplings {
        let (p, q) = (&cluster.members[c.first], &cluster.members[c.second]);
        let ok = match c.kind {
            ConditionKind::Parametric => close(p.harmonic, 1.0) && close(q.harmonic, 1.0),
            ConditionKind::Sum => close(p.harmonic + q.harmonic, 2.0),
            ConditionKind::Difference => close((p.harmonic - q.harmonic).abs(), 2.0),
        };
        if !ok {
            return domain(format!(
                "{} coupling between {} (μ = {}) and {} (μ = {}) is inconsistent",
                c.kind.as_str(),
                p.mode,
                p.harmonic,
                q.mode,
                q.harmonic
            ));
        }
    }
    Ok(())
}

/// Index of the member whose `γ` sets the reference rate.
fn primary_member(cluster: &CouplingCluster) -> usize {
    cluster.members.iter().position(|m| m.parametric).unwrap_or(0)
}

/// `(k_x/Ω)(π/L_x)²`
pub fn gamma_constant(geometry: &CavityGeometry, omega: f64, mode: ModeIndex) -> f64 {
    let q = PI / geometry.lx();
    mode.nx as f64 * q * q / omega
}

/// Assembles `M` for the cluster at slow detuning `α`.
pub fn build_msa_matrix(cluster: &CouplingCluster, alpha: f64) -> Result<MsaSystem> {
    if cluster.is_empty() {
        return domain("empty cluster");
    }
    if !alpha.is_finite() {
        return domain("detuning must be finite");
    }
    check_labels(cluster)?;
    let omega = cluster.drive.value();
    let lx = cluster.geometry.lx();
    let n = cluster.len();
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    let w = |x: f64| Complex64::new(x, 0.0);

    for (k, member) in cluster.members.iter().enumerate() {
        if member.parametric {
            let kx = member.mode.nx as f64;
            let p = -PI * PI * kx * kx / (2.0 * member.frequency * lx * lx);
            m[(a_row(k), b_row(k))] += w(p);
            m[(b_row(k), a_row(k))] += w(p);
        }
    }

    for c in &cluster.couplings {
        for (k, j) in [(c.first, c.second), (c.second, c.first)] {
            let (mk, mj) = (&cluster.members[k], &cluster.members[j]);
            let g = coupling_coefficient(mk.mode, mj.mode);
            let scale = omega / (2.0 * mk.frequency) * g;
            match c.kind {
                ConditionKind::Sum => {
                    let weight = (-mj.frequency + omega / 2.0) * scale;
                    m[(a_row(k), b_row(j))] += w(weight);
                    m[(b_row(k), a_row(j))] += w(weight);
                }
                ConditionKind::Difference => {
                    let weight = if mk.harmonic > mj.harmonic {
                        (mj.frequency + omega / 2.0) * scale
                    } else {
                        (mj.frequency - omega / 2.0) * scale
                    };
                    m[(a_row(k), a_row(j))] += w(weight);
                    m[(b_row(k), b_row(j))] += w(weight);
                }
                // self-couplings are carried by the member flag
                ConditionKind::Parametric => {}
            }
        }
    }

    let mu: Vec<f64> = cluster.members.iter().map(|m| m.harmonic).collect();
    if alpha != 0.0 {
        for (k, &mu_k) in mu.iter().enumerate() {
            m[(a_row(k), a_row(k))] += Complex64::new(0.0, -mu_k * alpha / 2.0);
            m[(b_row(k), b_row(k))] += Complex64::new(0.0, mu_k * alpha / 2.0);
        }
    }

    let primary = cluster.members[primary_member(cluster)].mode;
    Ok(MsaSystem {
        cluster: cluster.clone(),
        omega,
        alpha,
        matrix: m,
        gamma_ref: gamma_constant(&cluster.geometry, omega, primary),
        mu,
    })
}

/// Coefficients `A_k^{(n)}(τ)`, `B_k^{(n)}(τ)` for every initial member `n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BogoliubovSolution {
    pub tau: f64,
    pub modes: Vec<ModeIndex>,
    pub frequencies: Vec<f64>,
    /// `a[n][k]`
    pub a: Vec<Vec<Complex64>>,
    pub b: Vec<Vec<Complex64>>,
}

impl BogoliubovSolution {
    pub fn position(&self, mode: ModeIndex) -> Option<usize> {
        self.modes.iter().position(|&m| m == mode)
    }

    /// `Σ_n 2ω_k |A_k^{(n)}|²` for member index `k`.
    pub fn photons_at(&self, k: usize) -> f64 {
        2.0 * self.frequencies[k] * self.a.iter().map(|row| row[k].norm_sqr()).sum::<f64>()
    }

    pub fn photon_numbers(&self) -> Vec<f64> {
        (0..self.modes.len()).map(|k| self.photons_at(k)).collect()
    }

    /// `Σ_n 2ω_k (|B_k^{(n)}|² − |A_k^{(n)}|²)`, which is 1 for a unitary evolution.
    pub fn unitarity(&self, k: usize) -> f64 {
        2.0 * self.frequencies[k]
            * self
                .a
                .iter()
                .zip(&self.b)
                .map(|(ra, rb)| rb[k].norm_sqr() - ra[k].norm_sqr())
                .sum::<f64>()
    }

    /// Largest `|unitarity − 1|` over members.
    pub fn unitarity_defect(&self) -> f64 {
        (0..self.modes.len()).map(|k| (self.unitarity(k) - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `⟨N_k⟩` summed over all initial members.
pub fn photon_number(solution: &BogoliubovSolution, mode: ModeIndex) -> Result<f64> {
    match solution.position(mode) {
        Some(k) => Ok(solution.photons_at(k)),
        None => domain(format!("mode {mode} is not in the solution")),
    }
}

/// `exp(Mτ)` evaluated through the similarity `diag(√ω)`, under which
/// the coupling blocks become antisymmetric.
#[derive(Clone, Debug)]
pub struct MsaPropagator {
    inner: Propagator,
    balance: Vec<f64>,
}

impl MsaPropagator {
    pub fn is_diagonalized(&self) -> bool {
        self.inner.is_diagonalized()
    }

    pub fn at(&self, tau: f64) -> CMatrix {
        let mut e = self.inner.at(tau);
        let n = e.nrows();
        for r in 0..n {
            for c in 0..n {
                e[(r, c)] *= self.balance[c] / self.balance[r];
            }
        }
        e
    }
}

impl MsaSystem {
    pub fn len(&self) -> usize {
        self.cluster.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cluster.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        eigenvalues(&self.matrix)
    }

    pub fn propagator(&self) -> MsaPropagator {
        let balance: Vec<f64> = self
            .cluster
            .members
            .iter()
            .flat_map(|m| {
                let s = m.frequency.sqrt();
                [s, s]
            })
            .collect();
        let n = self.matrix.nrows();
        let mut balanced = self.matrix.clone();
        for r in 0..n {
            for c in 0..n {
                balanced[(r, c)] *= balance[r] / balance[c];
            }
        }
        MsaPropagator { inner: Propagator::new(&balanced), balance }
    }

    /// Bogoliubov coefficients at slow time `τ`, in the laboratory frame.
    pub fn evolve(&self, tau: f64) -> Result<BogoliubovSolution> {
        self.evolve_with(&self.propagator(), tau)
    }

    /// Solutions at several times sharing one factorization.
    pub fn evolve_many(&self, taus: &[f64]) -> Result<Vec<BogoliubovSolution>> {
        let p = self.propagator();
        taus.iter().map(|&t| self.evolve_with(&p, t)).collect()
    }

    fn evolve_with(&self, propagator: &MsaPropagator, tau: f64) -> Result<BogoliubovSolution> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return domain(format!("slow time must be finite and nonnegative, got {tau}"));
        }
        let n = self.len();
        let e = if tau == 0.0 { CMatrix::identity(2 * n, 2 * n) } else { propagator.at(tau) };
        let frequencies: Vec<f64> = self.cluster.members.iter().map(|m| m.frequency).collect();
        let phase: Vec<Complex64> = self
            .mu
            .iter()
            .map(|&mu| Complex64::from_polar(1.0, mu * self.alpha * tau / 2.0))
            .collect();
        let mut a = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        let mut b = a.clone();
        for init in 0..n {
            let norm = 1.0 / (2.0 * frequencies[init]).sqrt();
            let col = b_row(init);
            for k in 0..n {
                a[init][k] = e[(a_row(k), col)] * norm * phase[k];
                b[init][k] = e[(b_row(k), col)] * norm * phase[k].conj();
            }
        }
        Ok(BogoliubovSolution { tau, modes: self.cluster.modes(), frequencies, a, b })
    }

    /// Largest real part of the spectrum of `M`.
    pub fn growth_rate(&self) -> f64 {
        self.eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same cluster at another detuning.
    pub fn with_alpha(&self, alpha: f64) -> Result<MsaSystem> {
        build_msa_matrix(&self.cluster, alpha)
    }

    pub fn report(&self, taus: &[f64]) -> Result<MsaReport> {
        let solutions = self.evolve_many(taus)?;
        let mut rows = Vec::new();
        for s in &solutions {
            let totals = s.photon_numbers();
            for (n, init) in s.modes.iter().enumerate() {
                for (k, mode) in s.modes.iter().enumerate() {
                    rows.push(MsaRow {
                        tau: s.tau,
                        initial: *init,
                        mode: *mode,
                        re_a: s.a[n][k].re,
                        im_a: s.a[n][k].im,
                        re_b: s.b[n][k].re,
                        im_b: s.b[n][k].im,
                        photons: totals[k],
                    });
                }
            }
        }
        let mut eig = self.eigenvalues();
        eig.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
        Ok(MsaReport {
            cluster: self.cluster.report(),
            alpha: self.alpha,
            gamma_ref: self.gamma_ref,
            growth_rate: self.growth_rate(),
            eigenvalues: eig.iter().map(|z| [z.re, z.im]).collect(),
            max_unitarity_defect: solutions.iter().map(|s| s.unitarity_defect()).fold(0.0, f64::max),
            rows,
        })
    }
}

/// One table line: coefficients of `mode` for the evolution started in
/// `initial`; `photons` is the total `⟨N⟩` of `mode` at `tau`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MsaRow {
    pub tau: f64,
    pub initial: ModeIndex,
    pub mode: ModeIndex,
    pub re_a: f64,
    pub im_a: f64,
    pub re_b: f64,
    pub im_b: f64,
    pub photons: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MsaReport {
    pub cluster: ClusterReport,
    pub alpha: f64,
    pub gamma_ref: f64,
    pub growth_rate: f64,
    /// `[re, im]`, sorted by decreasing real part.
    pub eigenvalues: Vec<[f64; 2]>,
    pub max_unitarity_defect: f64,
    pub rows: Vec<MsaRow>,
}

/// Free-function form of [`MsaSystem::evolve`].
pub fn evolve_msa(system: &MsaSystem, tau: f64) -> Result<BogoliubovSolution> {
    system.evolve(tau)
}

pub fn growth_rate(system: &MsaSystem) -> f64 {
    system.growth_rate()
}

/// `sinh²((π/L_x)² s_x p_x τ / (2√(ω_s ω_p)))`, shared by both modes of a
/// sum-resonant pair.
pub fn sum_resonance_photons(
    geometry: &CavityGeometry,
    drive: &DriveFrequency,
    s: ModeIndex,
    p: ModeIndex,
    tau: f64,
) -> Result<f64> {
    geometry.validate_mode(s)?;
    geometry.validate_mode(p)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return domain(format!("slow time must be finite and nonnegative, got {tau}"));
    }
    let tester = ResonanceTester::new(geometry, drive);
    let ok = if s == p {
        tester.is_parametric(s)
    } else {
        tester.relation(s, p) == Some(ConditionKind::Sum) && coupling_coefficient(s, p) != 0.0
    };
    if !ok {
        return domain(format!("{s} and {p} are not sum-resonant with Ω = {}", drive.value()));
    }
    let q = PI / geometry.lx();
    let ws = frequency_at(geometry, geometry.lx(), s);
    let wp = frequency_at(geometry, geometry.lx(), p);
    let rate = q * q * s.nx as f64 * p.nx as f64 / (2.0 * (ws * wp).sqrt());
    Ok((rate * tau).sinh().powi(2))
}

/// Photon counts of a difference-only cluster at each `τ`.
pub fn chain_evolution(cluster: &CouplingCluster, taus: &[f64]) -> Result<Vec<Vec<f64>>> {
    if cluster.has_parametric_member() {
        return domain("chain contains a parametric member");
    }
    if let Some(c) = cluster.couplings.iter().find(|c| c.kind != ConditionKind::Difference) {
        return domain(format!(
            "chain contains a {} coupling between {} and {}",
            c.kind.as_str(),
            cluster.members[c.first].mode,
            cluster.members[c.second].mode
        ));
    }
    let system = build_msa_matrix(cluster, 0.0)?;
    Ok(system.evolve_many(taus)?.iter().map(|s| s.photon_numbers()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdMethod {
    ClosedForm,
    Numeric,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThresholdOptions {
    /// Permit eigenvalue scanning when no closed form applies.
    pub allow_numeric: bool,
    /// Also run the numeric search when a closed form exists.
    pub cross_check: bool,
    pub tolerance: f64,
    pub scan_points: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions { allow_numeric: true, cross_check: true, tolerance: 1e-10, scan_points: 2000 }
    }
}

/// Largest slow detuning `α` with exponential growth; `h_max = ε α_max`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetuningThreshold {
    pub omega: f64,
    pub gamma_ref: f64,
    pub alpha_max: f64,
    pub method: ThresholdMethod,
    pub closed_form: Option<f64>,
    pub numeric: Option<f64>,
    /// The numeric bracket ended while still growing.
    pub saturated: bool,
    pub modes: Vec<ModeIndex>,
}

impl DetuningThreshold {
    pub fn h_max(&self, epsilon: f64) -> f64 {
        epsilon * self.alpha_max
    }

    /// `|h|/Ω` bound per unit `ε`.
    pub fn h_over_omega_per_epsilon(&self) -> f64 {
        self.alpha_max / self.omega
    }

    pub fn in_units_of_gamma(&self) -> f64 {
        self.alpha_max / self.gamma_ref
    }
}

/// Closed forms: a single parametric mode, where `λ² = p² − α²/4`, and a
/// parametric mode with one partner at `3Ω/2`, where `λ²` solves
/// `Λ² + UΛ + W = 0` and growth stops when the discriminant
/// `4α⁴ + 4α²(p² − 4ab) + p²(p² + 4ab)` first reaches zero.
fn closed_form_threshold(system: &MsaSystem) -> Option<f64> {
    let c = &system.cluster;
    let m = &system.matrix;
    match c.len() {
        1 if c.members[0].parametric => Some(2.0 * m[(a_row(0), b_row(0))].re.abs()),
        2 => {
            let k = c.members.iter().position(|x| x.parametric)?;
            let j = 1 - k;
            if c.members[j].parametric || (c.members[j].harmonic - 3.0).abs() > LABEL_TOLERANCE * 3.0 {
                return None;
            }
            let p2 = m[(a_row(k), b_row(k))].re.powi(2);
            let ab = m[(a_row(k), a_row(j))].re * m[(a_row(j), a_row(k))].re;
            let b1 = p2 - 4.0 * ab;
            let c0 = p2 * (p2 + 4.0 * ab);
            // growth at α = 0 needs a negative constant term
            if c0 >= 0.0 {
                return None;
            }
            let x = (-b1 + (b1 * b1 - c0).sqrt()) / 2.0;
            Some(x.sqrt())
        }
        _ => None,
    }
}

fn numeric_threshold(system: &MsaSystem, opts: &ThresholdOptions) -> Result<(f64, bool)> {
    let max_kx = system.cluster.members.iter().map(|m| m.mode.nx).max().unwrap_or(1) as f64;
    let scale = system.gamma_ref.abs().max(f64::MIN_POSITIVE);
    let hi = 10.0 * scale * max_kx;
    let eps = GROWTH_EPSILON * scale;
    let grows = |alpha: f64| -> Result<bool> { Ok(system.with_alpha(alpha)?.growth_rate() > eps) };
    if !grows(0.0)? {
        return Ok((0.0, false));
    }
    let steps = opts.scan_points.max(2);
    let mut lo = 0.0;
    let mut up = None;
    for i in 1..=steps {
        let alpha = hi * i as f64 / steps as f64;
        if grows(alpha)? {
            lo = alpha;
        } else {
            up = Some(alpha);
            break;
        }
    }
    let Some(mut up) = up else {
        return Ok((hi, true));
    };
    while up - lo > opts.tolerance * scale.max(1.0) {
        let mid = 0.5 * (lo + up);
        if grows(mid)? {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Ok((0.5 * (lo + up), false))
}

/// First detuning at which the cluster stops growing.
pub fn detuning_threshold(cluster: &CouplingCluster, opts: &ThresholdOptions) -> Result<DetuningThreshold> {
    let system = build_msa_matrix(cluster, 0.0)?;
    let closed_form = closed_form_threshold(&system);
    if closed_form.is_none() && !opts.allow_numeric {
        return Err(Error::Unsupported(format!(
            "no closed-form threshold for a {}-mode cluster and numeric search is disabled",
            cluster.len()
        )));
    }
    let (numeric, saturated) = if closed_form.is_none() || opts.cross_check {
        let (v, s) = numeric_threshold(&system, opts)?;
        (Some(v), s)
    } else {
        (None, false)
    };
    let (alpha_max, method) = match closed_form {
        Some(v) => (v, ThresholdMethod::ClosedForm),
        None => (numeric.unwrap_or(0.0), ThresholdMethod::Numeric),
    };
    Ok(DetuningThreshold {
        omega: system.omega,
        gamma_ref: system.gamma_ref,
        alpha_max,
        method,
        closed_form,
        numeric,
        saturated,
        modes: cluster.modes(),
    })
}

/// Cluster of exactly these modes with default bounds.
pub fn cluster_of(geometry: &CavityGeometry, drive: &DriveFrequency, modes: &[ModeIndex]) -> Result<CouplingCluster> {
    CouplingCluster::from_members(geometry, drive, modes, SearchBounds::default())
}

/// `Λ` of a singleton: `±√(γ²k_x² − α²/4)`, real part only.
pub fn singleton_growth(gamma_kx: f64, alpha: f64) -> f64 {
    (gamma_kx * gamma_kx - alpha * alpha / 4.0).max(0.0).sqrt()
}

/// Column vector of the canonical initial condition for member `n`.
pub fn initial_vector(system: &MsaSystem, n: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(2 * system.len());
    v[b_row(n)] = Complex64::new(1.0 / (2.0 * system.cluster.members[n].frequency).sqrt(), 0.0);
    v
}
