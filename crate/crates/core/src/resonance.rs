//! Resonance bookkeeping: which modes a drive frequency couples.
//!
//! Squared frequencies are handled in units of `(π/lx)²`, where a mode's value
//! is `nx² + (lx/ly)² ny² + (lx/lz)² nz²`. With exact aspect ratios and a drive
//! given as twice a mode frequency, every condition reduces to an identity
//! `√a + √b = √c` between rationals, which two squarings decide exactly.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::PI;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::cavity::{
    coupling_coefficient, frequency_at, mode_frequency, rational_to_f64, CavityGeometry,
    ModeIndex,
};
use crate::error::{domain, Error, Result};

/// Relative tolerance of frequency comparisons when exact arithmetic is not
/// available.
pub const FLOAT_RTOL: f64 = 1e-9;

/// A squared frequency in units of `(π/lx)²`.
#[derive(Clone, Debug, PartialEq)]
pub enum SquaredFrequency {
    Exact(BigRational),
    Float(f64),
}

impl SquaredFrequency {
    pub fn to_f64(&self) -> f64 {
        match self {
            SquaredFrequency::Exact(r) => rational_to_f64(r),
            SquaredFrequency::Float(v) => *v,
        }
    }

    fn scaled(&self, factor: i64) -> SquaredFrequency {
        match self {
            SquaredFrequency::Exact(r) => {
                SquaredFrequency::Exact(r * BigRational::from_integer(factor.into()))
            }
            SquaredFrequency::Float(v) => SquaredFrequency::Float(v * factor as f64),
        }
    }
}

/// Equality of two squared frequencies: exact when both are rational,
/// otherwise within [`FLOAT_RTOL`].
pub fn frequencies_equal(a: &SquaredFrequency, b: &SquaredFrequency) -> bool {
    match (a, b) {
        (SquaredFrequency::Exact(x), SquaredFrequency::Exact(y)) => x == y,
        _ => {
            let (x, y) = (a.to_f64(), b.to_f64());
            (x - y).abs() <= FLOAT_RTOL * x.abs().max(y.abs())
        }
    }
}

/// Decides `√a + √b = √c` for nonnegative squared frequencies.
pub fn sqrt_sum_equals(a: &SquaredFrequency, b: &SquaredFrequency, c: &SquaredFrequency) -> bool {
    use SquaredFrequency::Exact;
    match (a, b, c) {
        (Exact(a), Exact(b), Exact(c)) => {
            // √a + √b = √c  ⇔  c − a − b ≥ 0  and  (c − a − b)² = 4ab
            let d = c - a - b;
            if d.is_negative() {
                return false;
            }
            let four = BigRational::from_integer(BigInt::from(4));
            &d * &d == four * a * b
        }
        _ => {
            let (a, b, c) = (a.to_f64().sqrt(), b.to_f64().sqrt(), c.to_f64().sqrt());
            (a + b - c).abs() <= FLOAT_RTOL * c.max(a + b)
        }
    }
}

/// Wall oscillation frequency `Ω`, optionally with its exact squared value
/// `(Ω·lx/π)²`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveFrequency {
    omega: f64,
    exact_norm_sq: Option<BigRational>,
    label: Option<String>,
}

impl DriveFrequency {
    pub fn numeric(omega: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return domain(format!("drive frequency must be positive (got {omega})"));
        }
        Ok(DriveFrequency { omega, exact_norm_sq: None, label: None })
    }

    /// `Ω = 2ω_m`, exact whenever the geometry carries exact ratios.
    pub fn twice_mode(geometry: &CavityGeometry, mode: ModeIndex) -> Result<Self> {
        let omega = 2.0 * mode_frequency(geometry, mode)?;
        let exact_norm_sq = geometry
            .exact_norm_sq(mode)
            .map(|s| s * BigRational::from_integer(BigInt::from(4)));
        Ok(DriveFrequency { omega, exact_norm_sq, label: Some(format!("2*omega{mode}")) })
    }

    /// `Ω = ω_s + ω_p`. Exact only in the degenerate case `s = p`.
    pub fn mode_sum(geometry: &CavityGeometry, s: ModeIndex, p: ModeIndex) -> Result<Self> {
        if s == p {
            return Self::twice_mode(geometry, s);
        }
        let omega = mode_frequency(geometry, s)? + mode_frequency(geometry, p)?;
        Ok(DriveFrequency { omega, exact_norm_sq: None, label: Some(format!("omega{s}+omega{p}")) })
    }

    pub fn value(&self) -> f64 {
        self.omega
    }

    pub fn is_exact(&self) -> bool {
        self.exact_norm_sq.is_some()
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| format!("{}", self.omega))
    }

    /// This drive after uniformly rescaling the geometry by `s` (Ω → Ω/s).
    pub fn rescaled(&self, s: f64) -> Self {
        DriveFrequency {
            omega: self.omega / s,
            exact_norm_sq: self.exact_norm_sq.clone(),
            label: self.label.clone(),
        }
    }
}

/// Resonance condition satisfied by a pair of modes (or a single mode).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    /// `Ω = 2ω_k`.
    Parametric,
    /// `Ω = ω_k + ω_j`.
    Sum,
    /// `Ω = |ω_k − ω_j|`.
    Difference,
}

impl ConditionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConditionKind::Parametric => "parametric",
            ConditionKind::Sum => "sum",
            ConditionKind::Difference => "difference",
        }
    }
}

/// Explicit limits of the closure search; echoed in every cluster.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchBounds {
    pub max_x_index: u32,
    pub max_chain_depth: usize,
    pub max_cluster_size: usize,
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds { max_x_index: 1000, max_chain_depth: 64, max_cluster_size: 64 }
    }
}

/// Evaluates resonance conditions for one geometry and drive.
#[derive(Clone, Debug)]
pub struct ResonanceTester<'a> {
    geometry: &'a CavityGeometry,
    exact: bool,
    drive_sq: SquaredFrequency,
}

impl<'a> ResonanceTester<'a> {
    pub fn new(geometry: &'a CavityGeometry, drive: &'a DriveFrequency) -> Self {
        let exact = geometry.exact().is_some() && drive.exact_norm_sq.is_some();
        let drive_sq = match (&drive.exact_norm_sq, exact) {
            (Some(q), true) => SquaredFrequency::Exact(q.clone()),
            _ => SquaredFrequency::Float((drive.omega * geometry.lx() / PI).powi(2)),
        };
        ResonanceTester { geometry, exact, drive_sq }
    }

    /// Whether conditions are decided in exact arithmetic.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    pub fn squared(&self, m: ModeIndex) -> SquaredFrequency {
        if self.exact {
            SquaredFrequency::Exact(self.geometry.exact_norm_sq(m).expect("exact geometry"))
        } else {
            SquaredFrequency::Float(self.geometry.norm_sq(m))
        }
    }

    fn transverse_sq(&self, m: ModeIndex) -> SquaredFrequency {
        if self.exact {
            SquaredFrequency::Exact(
                self.geometry.exact_transverse_norm_sq(m.ny, m.nz).expect("exact geometry"),
            )
        } else {
            SquaredFrequency::Float(self.geometry.transverse_norm_sq(m.ny, m.nz))
        }
    }

    /// `Ω = 2ω_m`.
    pub fn is_parametric(&self, m: ModeIndex) -> bool {
        frequencies_equal(&self.squared(m).scaled(4), &self.drive_sq)
    }

    /// The condition relating `k` and `j` under this drive, ignoring `g`.
    pub fn relation(&self, k: ModeIndex, j: ModeIndex) -> Option<ConditionKind> {
        if k == j {
            return self.is_parametric(k).then_some(ConditionKind::Parametric);
        }
        let (sk, sj) = (self.squared(k), self.squared(j));
        if sqrt_sum_equals(&sk, &sj, &self.drive_sq) {
            return Some(ConditionKind::Sum);
        }
        if sqrt_sum_equals(&sk, &self.drive_sq, &sj) || sqrt_sum_equals(&sj, &self.drive_sq, &sk)
        {
            return Some(ConditionKind::Difference);
        }
        None
    }

    /// Modes sharing `k`'s transverse indices that `k` couples to under this
    /// drive. Each condition fixes the partner's frequency, hence at most one
    /// candidate x-index per condition. Partners beyond `max_x_index` are
    /// counted in the second return value instead of listed.
    pub fn partners(&self, k: ModeIndex, max_x_index: u32) -> (Vec<(ModeIndex, ConditionKind)>, usize) {
        let sk = self.squared(k).to_f64().sqrt();
        let q = self.drive_sq.to_f64().sqrt();
        let t = self.transverse_sq(k).to_f64();
        let mut out = Vec::new();
        let mut beyond = 0;
        for target in [sk + q, sk - q, q - sk] {
            if target <= 0.0 {
                continue;
            }
            let jx_sq = target * target - t;
            if jx_sq < 0.25 {
                continue;
            }
            let centre = jx_sq.sqrt().round() as i64;
            for jx in (centre - 1).max(1)..=centre + 1 {
                let jx = jx as u32;
                if jx == k.nx {
                    continue;
                }
                let j = k.with_nx(jx);
                if let Some(kind) = self.relation(k, j) {
                    if out.iter().any(|(m, _)| *m == j) {
                        continue;
                    }
                    if jx > max_x_index {
                        beyond += 1;
                    } else {
                        out.push((j, kind));
                    }
                }
            }
        }
        (out, beyond)
    }
}

/// `j` with `j_y = k_y`, `j_z = k_z`, `j_x ≤ max_x_index` and `ω_j = 3ω_k`.
pub fn find_parametric_partners(
    geometry: &CavityGeometry,
    k: ModeIndex,
    max_x_index: u32,
) -> Result<Vec<ModeIndex>> {
    geometry.validate_mode(k)?;
    if max_x_index < k.nx {
        return domain("max_x_index must be at least k.nx");
    }
    let drive = DriveFrequency::twice_mode(geometry, k)?;
    let tester = ResonanceTester::new(geometry, &drive);
    let nine = tester.squared(k).scaled(9);
    let t = tester.transverse_sq(k);
    let jx_sq = nine.to_f64() - t.to_f64();
    let centre = jx_sq.max(0.0).sqrt().round() as i64;
    let mut out = Vec::new();
    for jx in (centre - 1).max(1)..=centre + 1 {
        let jx = jx as u32;
        if jx > max_x_index || jx == k.nx {
            continue;
        }
        let j = k.with_nx(jx);
        if frequencies_equal(&tester.squared(j), &nine) {
            out.push(j);
        }
    }
    Ok(out)
}

/// Member of a coupling cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterMode {
    pub mode: ModeIndex,
    pub frequency: f64,
    /// `2ω/Ω`: an odd integer for members of parametric clusters and chains.
    pub harmonic: f64,
    /// Whether `Ω = 2ω` for this member.
    pub parametric: bool,
}

/// Pair of cluster members joined by a resonance condition with `g ≠ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    /// Indices into [`CouplingCluster::members`], `first < second`.
    pub first: usize,
    pub second: usize,
    pub kind: ConditionKind,
    /// `g_{first,second}`.
    pub g: f64,
}

/// Modes mutually connected by resonance conditions at one drive frequency.
#[derive(Clone, Debug)]
pub struct CouplingCluster {
    pub geometry: CavityGeometry,
    pub drive: DriveFrequency,
    /// Sorted by frequency, ties lexicographic.
    pub members: Vec<ClusterMode>,
    pub couplings: Vec<Coupling>,
    pub bounds: SearchBounds,
    /// True when a partner was left out because of the search bounds.
    pub bound_hit: bool,
    pub exact: bool,
}

impl CouplingCluster {
    /// Cluster with exactly the given members; conditions among them are
    /// detected but no closure is performed.
    pub fn from_members(
        geometry: &CavityGeometry,
        drive: &DriveFrequency,
        modes: &[ModeIndex],
        bounds: SearchBounds,
    ) -> Result<Self> {
        if modes.is_empty() {
            return domain("a cluster needs at least one mode");
        }
        let set: BTreeSet<ModeIndex> = modes.iter().copied().collect();
        for &m in &set {
            geometry.validate_mode(m)?;
        }
        Ok(assemble(geometry, drive, set, bounds, false))
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn modes(&self) -> Vec<ModeIndex> {
        self.members.iter().map(|m| m.mode).collect()
    }

    pub fn position(&self, mode: ModeIndex) -> Option<usize> {
        self.members.iter().position(|m| m.mode == mode)
    }

    pub fn has_parametric_member(&self) -> bool {
        self.members.iter().any(|m| m.parametric)
    }

    /// `g` restricted to the cluster, in member order.
    pub fn g_matrix(&self) -> Vec<Vec<f64>> {
        self.members
            .iter()
            .map(|a| self.members.iter().map(|b| coupling_coefficient(a.mode, b.mode)).collect())
            .collect()
    }

    /// Serializable summary.
    pub fn report(&self) -> ClusterReport {
        ClusterReport {
            omega: self.drive.value(),
            drive: self.drive.label(),
            exact: self.exact,
            members: self.members.clone(),
            g: self.g_matrix(),
            couplings: self
                .couplings
                .iter()
                .map(|c| PairReport {
                    modes: [self.members[c.first].mode, self.members[c.second].mode],
                    condition: c.kind,
                    g: c.g,
                })
                .collect(),
            bounds: self.bounds,
            bound_hit: self.bound_hit,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairReport {
    pub modes: [ModeIndex; 2],
    pub condition: ConditionKind,
    pub g: f64,
}

/// Record form of a [`CouplingCluster`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClusterReport {
    pub omega: f64,
    pub drive: String,
    pub exact: bool,
    pub members: Vec<ClusterMode>,
    pub g: Vec<Vec<f64>>,
    pub couplings: Vec<PairReport>,
    pub bounds: SearchBounds,
    pub bound_hit: bool,
}

fn assemble(
    geometry: &CavityGeometry,
    drive: &DriveFrequency,
    set: BTreeSet<ModeIndex>,
    bounds: SearchBounds,
    bound_hit: bool,
) -> CouplingCluster {
    let tester = ResonanceTester::new(geometry, drive);
    let omega = drive.value();
    let mut members: Vec<ClusterMode> = set
        .into_iter()
        .map(|mode| {
            let frequency = frequency_at(geometry, geometry.lx(), mode);
            ClusterMode {
                mode,
                frequency,
                harmonic: 2.0 * frequency / omega,
                parametric: tester.is_parametric(mode),
            }
        })
        .collect();
    members.sort_by(|a, b| a.frequency.total_cmp(&b.frequency).then(a.mode.cmp(&b.mode)));

    let mut couplings = Vec::new();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let g = coupling_coefficient(members[i].mode, members[j].mode);
            if g == 0.0 {
                continue;
            }
            if let Some(kind) = tester.relation(members[i].mode, members[j].mode) {
                couplings.push(Coupling { first: i, second: j, kind, g });
            }
        }
    }
    CouplingCluster {
        geometry: geometry.clone(),
        drive: drive.clone(),
        members,
        couplings,
        bounds,
        bound_hit,
        exact: tester.is_exact(),
    }
}

/// Transitive closure of `seeds` under the resonance conditions, restricted to
/// pairs with nonzero coupling.
pub fn build_coupling_cluster(
    geometry: &CavityGeometry,
    drive: &DriveFrequency,
    seeds: &[ModeIndex],
    bounds: SearchBounds,
) -> Result<CouplingCluster> {
    if seeds.is_empty() {
        return domain("at least one seed mode is required");
    }
    for &s in seeds {
        geometry.validate_mode(s)?;
    }
    let tester = ResonanceTester::new(geometry, drive);
    let mut seen: BTreeSet<ModeIndex> = seeds.iter().copied().collect();
    let mut queue: VecDeque<(ModeIndex, usize)> = seen.iter().map(|&m| (m, 0)).collect();
    let mut bound_hit = false;

    while let Some((m, depth)) = queue.pop_front() {
        let (partners, beyond) = tester.partners(m, bounds.max_x_index);
        if beyond > 0 {
            bound_hit = true;
        }
        for (p, _) in partners {
            if seen.contains(&p) {
                continue;
            }
            if depth >= bounds.max_chain_depth {
                bound_hit = true;
                continue;
            }
            seen.insert(p);
            if seen.len() > bounds.max_cluster_size {
                let partial = assemble(geometry, drive, seen, bounds, true);
                return Err(Error::ClusterTooLarge {
                    limit: bounds.max_cluster_size,
                    partial: Box::new(partial),
                });
            }
            queue.push_back((p, depth + 1));
        }
    }
    Ok(assemble(geometry, drive, seen, bounds, bound_hit))
}

/// Every mode with `Ω = 2ω`, in spectral order.
pub fn parametric_modes(geometry: &CavityGeometry, drive: &DriveFrequency) -> Result<Vec<ModeIndex>> {
    let tester = ResonanceTester::new(geometry, drive);
    let half = drive.value() / 2.0 * (1.0 + 10.0 * FLOAT_RTOL);
    let candidates =
        crate::cavity::enumerate_modes(geometry, half, crate::cavity::DEFAULT_MODE_LIMIT)?;
    Ok(candidates.into_iter().map(|e| e.0).filter(|&m| tester.is_parametric(m)).collect())
}

/// One cluster per parametrically resonant mode; modes already absorbed by an
/// earlier cluster are skipped. Degenerate uncoupled resonances come out as
/// separate singletons.
pub fn resonant_clusters(
    geometry: &CavityGeometry,
    drive: &DriveFrequency,
    bounds: SearchBounds,
) -> Result<Vec<CouplingCluster>> {
    let mut out: Vec<CouplingCluster> = Vec::new();
    for m in parametric_modes(geometry, drive)? {
        if out.iter().any(|c| c.position(m).is_some()) {
            continue;
        }
        out.push(build_coupling_cluster(geometry, drive, &[m], bounds)?);
    }
    Ok(out)
}

/// Maximal sequences of modes with consecutive frequencies separated by `Ω`
/// and nonzero couplings, none parametrically resonant and none touching a
/// parametric cluster. Every retained index is at most `max_index`.
pub fn find_equidistant_chains(
    geometry: &CavityGeometry,
    drive: &DriveFrequency,
    max_index: u32,
) -> Result<Vec<Vec<ModeIndex>>> {
    let tester = ResonanceTester::new(geometry, drive);
    let dims = geometry.dims().count();
    let range = |axis: usize| if axis < dims { 1..=max_index } else { 0..=0 };
    let q = tester.drive_sq.to_f64().sqrt();

    // successor: the unique mode (if any) one drive quantum above
    let mut up: BTreeMap<ModeIndex, ModeIndex> = BTreeMap::new();
    for ny in range(1) {
        for nz in range(2) {
            for nx in 1..=max_index {
                let k = ModeIndex::new(nx, ny, nz);
                let sk = tester.squared(k).to_f64().sqrt();
                let jx_sq = (sk + q).powi(2) - tester.transverse_sq(k).to_f64();
                let centre = jx_sq.sqrt().round() as i64;
                for jx in (centre - 1).max(1)..=centre + 1 {
                    let jx = jx as u32;
                    if jx > max_index || jx == nx {
                        continue;
                    }
                    let j = k.with_nx(jx);
                    if sqrt_sum_equals(&tester.squared(k), &tester.drive_sq, &tester.squared(j)) {
                        up.insert(k, j);
                    }
                }
            }
        }
    }
    let has_down: BTreeSet<ModeIndex> = up.values().copied().collect();

    let bounds = SearchBounds {
        max_x_index: max_index,
        max_chain_depth: max_index as usize + 1,
        max_cluster_size: max_index as usize + 1,
    };
    let mut chains: Vec<Vec<ModeIndex>> = Vec::new();
    for (&start, _) in up.iter().filter(|(k, _)| !has_down.contains(k)) {
        let mut path = vec![start];
        let mut cur = start;
        while let Some(&next) = up.get(&cur) {
            path.push(next);
            cur = next;
        }
        if path.iter().any(|&m| tester.is_parametric(m)) {
            continue;
        }
        let closure = build_coupling_cluster(geometry, drive, &path, bounds)?;
        if closure.has_parametric_member() {
            continue;
        }
        let modes = closure.modes();
        if modes.len() >= 2 && !chains.contains(&modes) {
            chains.push(modes);
        }
    }
    chains.sort_by(|a, b| {
        let fa = frequency_at(geometry, geometry.lx(), a[0]);
        let fb = frequency_at(geometry, geometry.lx(), b[0]);
        fa.total_cmp(&fb).then(a.cmp(b))
    });
    Ok(chains)
}
