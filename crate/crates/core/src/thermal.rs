//! Photon numbers when the field starts in thermal equilibrium.

use serde::{Deserialize, Serialize};

use crate::cavity::ModeIndex;
use crate::error::{domain, Result};
use crate::msa::{build_msa_matrix, BogoliubovSolution};
use crate::resonance::CouplingCluster;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// `ħc` in eV·cm.
    pub hbar_c: f64,
    /// `k_B` in eV/K.
    pub k_b: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { hbar_c: 1.973_269_804e-5, k_b: 8.617_333_262e-5 }
    }
}

/// Initial temperature of the field.
///
/// Frequencies are in the library's natural units, so a mode of frequency
/// `ω` has energy `ħc ω / L` when one length unit is `L` centimetres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThermalContext {
    Zero,
    Physical { temperature_k: f64, length_cm: f64, constants: PhysicalConstants },
    /// `βE = beta · ω`.
    Dimensionless { beta: f64 },
}

impl ThermalContext {
    pub fn physical(temperature_k: f64, length_cm: f64) -> Result<Self> {
        ThermalContext::Physical { temperature_k, length_cm, constants: PhysicalConstants::default() }.validated()
    }

    pub fn dimensionless(beta: f64) -> Result<Self> {
        ThermalContext::Dimensionless { beta }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            ThermalContext::Zero => Ok(self),
            ThermalContext::Physical { temperature_k, length_cm, constants } => {
                if !(temperature_k >= 0.0 && temperature_k.is_finite()) {
                    return domain(format!("temperature must be finite and nonnegative, got {temperature_k}"));
                }
                if !(length_cm > 0.0 && length_cm.is_finite()) {
                    return domain(format!("length scale must be positive, got {length_cm}"));
                }
                if !(constants.hbar_c > 0.0 && constants.k_b > 0.0) {
                    return domain("physical constants must be positive");
                }
                Ok(self)
            }
            ThermalContext::Dimensionless { beta } => {
                if beta > 0.0 && !beta.is_nan() {
                    Ok(self)
                } else {
                    domain(format!("inverse temperature must be positive, got {beta}"))
                }
            }
        }
    }

    /// `β` per unit natural frequency; infinite at zero temperature.
    pub fn beta(&self) -> f64 {
        match *self {
            ThermalContext::Zero => f64::INFINITY,
            ThermalContext::Physical { temperature_k, length_cm, constants } => {
                if temperature_k == 0.0 {
                    f64::INFINITY
                } else {
                    constants.hbar_c / (length_cm * constants.k_b * temperature_k)
                }
            }
            ThermalContext::Dimensionless { beta } => beta,
        }
    }

    /// Energy in eV of frequency `ω`, when a length scale is known.
    pub fn energy_ev(&self, omega: f64) -> Option<f64> {
        match *self {
            ThermalContext::Physical { length_cm, constants, .. } => Some(constants.hbar_c * omega / length_cm),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.beta().is_infinite()
    }
}

/// `1/(e^{βE} − 1)`.
pub fn bose_occupation(omega: f64, context: &ThermalContext) -> Result<f64> {
    if !(omega > 0.0 && omega.is_finite()) {
        return domain(format!("mode energy must be positive, got {omega}"));
    }
    let x = context.beta() * omega;
    Ok(if x.is_infinite() { 0.0 } else { 1.0 / x.exp_m1() })
}

fn occupations(solution: &BogoliubovSolution, context: &ThermalContext) -> Result<Vec<f64>> {
    solution.frequencies.iter().map(|&w| bose_occupation(w, context)).collect()
}

fn thermal_at(solution: &BogoliubovSolution, k: usize, occ: &[f64]) -> f64 {
    let w = 2.0 * solution.frequencies[k];
    let extra: f64 = solution
        .a
        .iter()
        .zip(&solution.b)
        .zip(occ)
        .map(|((ra, rb), n)| (ra[k].norm_sqr() + rb[k].norm_sqr()) * w * n)
        .sum();
    solution.photons_at(k) + extra
}

/// `⟨N_k⟩_{T=0} + Σ_n 2ω_k (|B_k^{(n)}|² + |A_k^{(n)}|²) n_n` over the
/// cluster; members outside the cluster do not feed cluster modes.
pub fn thermal_photon_number(solution: &BogoliubovSolution, mode: ModeIndex, context: &ThermalContext) -> Result<f64> {
    let Some(k) = solution.position(mode) else {
        return domain(format!("mode {mode} is not in the solution"));
    };
    Ok(thermal_at(solution, k, &occupations(solution, context)?))
}

/// Thermal over vacuum photon totals.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Enhancement {
    pub tau: f64,
    /// `1 + Σ n_i` for clusters of at most two modes, otherwise `exact_ratio`.
    pub factor: f64,
    pub occupation_sum_factor: f64,
    /// Total thermal count over total vacuum count.
    pub exact_ratio: f64,
    /// As `exact_ratio` with the initial population `Σ n_i` removed.
    pub created_ratio: f64,
    /// `τ < 1`, where the two approximations differ noticeably.
    pub early_time: bool,
}

pub fn enhancement_from_solution(solution: &BogoliubovSolution, context: &ThermalContext) -> Result<Enhancement> {
    let occ = occupations(solution, context)?;
    let n = solution.modes.len();
    let vacuum: f64 = solution.photon_numbers().iter().sum();
    let thermal: f64 = (0..n).map(|k| thermal_at(solution, k, &occ)).sum();
    let occ_sum: f64 = occ.iter().sum();
    let ratio = |num: f64| if vacuum > 0.0 { num / vacuum } else if num == 0.0 { 1.0 } else { f64::INFINITY };
    let exact_ratio = ratio(thermal);
    let occupation_sum_factor = 1.0 + occ_sum;
    Ok(Enhancement {
        tau: solution.tau,
        factor: if n <= 2 { occupation_sum_factor } else { exact_ratio },
        occupation_sum_factor,
        exact_ratio,
        created_ratio: ratio(thermal - occ_sum),
        early_time: solution.tau < 1.0,
    })
}

/// On-resonance enhancement of the cluster at slow time `τ`.
pub fn enhancement_factor(cluster: &CouplingCluster, context: &ThermalContext, tau: f64) -> Result<Enhancement> {
    let sol = build_msa_matrix(cluster, 0.0)?.evolve(tau)?;
    enhancement_from_solution(&sol, context)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThermalModeRow {
    pub mode: ModeIndex,
    pub omega: f64,
    pub energy_ev: Option<f64>,
    pub occupation: f64,
    pub vacuum: f64,
    pub thermal: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThermalReport {
    pub context: ThermalContext,
    pub temperature_k: Option<f64>,
    pub length_cm: Option<f64>,
    pub tau: f64,
    pub modes: Vec<ThermalModeRow>,
    pub enhancement: Enhancement,
}

pub fn thermal_report(cluster: &CouplingCluster, context: &ThermalContext, tau: f64) -> Result<ThermalReport> {
    let sol = build_msa_matrix(cluster, 0.0)?.evolve(tau)?;
    let occ = occupations(&sol, context)?;
    let modes = (0..sol.modes.len())
        .map(|k| ThermalModeRow {
            mode: sol.modes[k],
            omega: sol.frequencies[k],
            energy_ev: context.energy_ev(sol.frequencies[k]),
            occupation: occ[k],
            vacuum: sol.photons_at(k),
            thermal: thermal_at(&sol, k, &occ),
        })
        .collect();
    let (temperature_k, length_cm) = match *context {
        ThermalContext::Physical { temperature_k, length_cm, .. } => (Some(temperature_k), Some(length_cm)),
        _ => (None, None),
    };
    Ok(ThermalReport {
        context: *context,
        temperature_k,
        length_cm,
        tau,
        modes,
        enhancement: enhancement_from_solution(&sol, context)?,
    })
}
