//! Rectangular cavity geometry, its static spectrum and the intermode
//! coupling coefficients of the moving-wall problem.
//!
//! Lengths are measured in units of the resting moving-wall length, time in
//! units of that length over `c`, so a cube has `lx = ly = lz = 1` and its
//! fundamental frequency is `π√3`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Inclusion slack for frequency cutoffs, relative.
const CUTOFF_SLACK: f64 = 1e-12;

/// Default bound on the number of modes [`enumerate_modes`] may return.
pub const DEFAULT_MODE_LIMIT: usize = 1_000_000;

/// Number of retained cavity dimensions. Reduced cavities drop the trailing
/// axes (`z`, then `y`) from every frequency sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Dimensionality {
    One,
    Two,
    Three,
}

impl Dimensionality {
    pub fn count(self) -> usize {
        match self {
            Dimensionality::One => 1,
            Dimensionality::Two => 2,
            Dimensionality::Three => 3,
        }
    }
}

impl TryFrom<u8> for Dimensionality {
    type Error = String;

    fn try_from(value: u8) -> std::result::Result<Self, Self::Error> {
        match value {
            1 => Ok(Dimensionality::One),
            2 => Ok(Dimensionality::Two),
            3 => Ok(Dimensionality::Three),
            other => Err(format!("dimensionality must be 1, 2 or 3 (got {other})")),
        }
    }
}

impl From<Dimensionality> for u8 {
    fn from(d: Dimensionality) -> u8 {
        d.count() as u8
    }
}

/// Label of a cavity mode. Components of axes that a reduced cavity does not
/// retain are stored as `0`.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct ModeIndex {
    pub nx: u32,
    pub ny: u32,
    pub nz: u32,
}

impl ModeIndex {
    pub const fn new(nx: u32, ny: u32, nz: u32) -> Self {
        ModeIndex { nx, ny, nz }
    }

    /// Mode of a two-dimensional cavity.
    pub const fn planar(nx: u32, ny: u32) -> Self {
        ModeIndex { nx, ny, nz: 0 }
    }

    /// Mode of a one-dimensional cavity.
    pub const fn axial(nx: u32) -> Self {
        ModeIndex { nx, ny: 0, nz: 0 }
    }

    /// Indices along the static walls; `g` only couples modes that share them.
    pub fn transverse(&self) -> (u32, u32) {
        (self.ny, self.nz)
    }

    pub fn with_nx(&self, nx: u32) -> Self {
        ModeIndex { nx, ..*self }
    }

    /// Components retained by `dims`, in axis order.
    pub fn components(&self, dims: Dimensionality) -> Vec<u32> {
        [self.nx, self.ny, self.nz][..dims.count()].to_vec()
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.ny, self.nz) {
            (0, 0) => write!(f, "({})", self.nx),
            (_, 0) => write!(f, "({},{})", self.nx, self.ny),
            _ => write!(f, "({},{},{})", self.nx, self.ny, self.nz),
        }
    }
}

impl FromStr for ModeIndex {
    type Err = Error;

    /// Parses `(1,1,1)`, `1,1,1`, `(1,3)` or `(2)`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let parts: std::result::Result<Vec<u32>, _> =
            inner.split(',').map(|p| p.trim().parse::<u32>()).collect();
        match parts.as_deref() {
            Ok([x]) => Ok(ModeIndex::axial(*x)),
            Ok([x, y]) => Ok(ModeIndex::planar(*x, *y)),
            Ok([x, y, z]) => Ok(ModeIndex::new(*x, *y, *z)),
            _ => domain(format!("cannot parse mode index {s:?}")),
        }
    }
}

/// Exact squared aspect ratios `(lx/ly)²` and `(lx/lz)²`.
///
/// When present, every squared frequency is an exact rational multiple of
/// `(π/lx)²`, which lets resonance conditions be decided without rounding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalGeometry {
    pub ry2: BigRational,
    pub rz2: BigRational,
}

impl RationalGeometry {
    pub fn new(ry2: BigRational, rz2: BigRational) -> Result<Self> {
        if ry2.is_negative() || rz2.is_negative() {
            return domain("squared aspect ratios must be nonnegative");
        }
        // BigRational keeps itself reduced; nothing else to normalize.
        Ok(RationalGeometry { ry2, rz2 })
    }

    pub fn cube() -> Self {
        RationalGeometry {
            ry2: BigRational::from_integer(1.into()),
            rz2: BigRational::from_integer(1.into()),
        }
    }
}

/// Parses `"p/q"` or `"p"` into a reduced rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let parsed = match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad_rational(s))?;
            let q: BigInt = q.trim().parse().map_err(|_| bad_rational(s))?;
            if q.is_zero() {
                return Err(bad_rational(s));
            }
            BigRational::new(p, q)
        }
        None => BigRational::from_integer(s.parse().map_err(|_| bad_rational(s))?),
    };
    Ok(parsed)
}

fn bad_rational(s: &str) -> Error {
    Error::Domain(format!("cannot parse rational {s:?}"))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Box dimensions. `lx` is the direction of the moving wall.
#[derive(Clone, Debug, PartialEq)]
pub struct CavityGeometry {
    lx: f64,
    ly: f64,
    lz: f64,
    dims: Dimensionality,
    exact: Option<RationalGeometry>,
}

impl CavityGeometry {
    /// Lengths of axes not retained by `dims` are ignored (stored as 1).
    pub fn new(lx: f64, ly: f64, lz: f64, dims: Dimensionality) -> Result<Self> {
        let (ly, lz) = match dims {
            Dimensionality::One => (1.0, 1.0),
            Dimensionality::Two => (ly, 1.0),
            Dimensionality::Three => (ly, lz),
        };
        for (name, v) in [("lx", lx), ("ly", ly), ("lz", lz)] {
            if !(v.is_finite() && v > 0.0) {
                return domain(format!("{name} must be a positive length (got {v})"));
            }
        }
        Ok(CavityGeometry { lx, ly, lz, dims, exact: None })
    }

    /// Unit cube with exact ratios.
    pub fn cube() -> Self {
        CavityGeometry {
            lx: 1.0,
            ly: 1.0,
            lz: 1.0,
            dims: Dimensionality::Three,
            exact: Some(RationalGeometry::cube()),
        }
    }

    /// Unit square (two-dimensional cavity) with exact ratios.
    pub fn square() -> Self {
        CavityGeometry {
            lx: 1.0,
            ly: 1.0,
            lz: 1.0,
            dims: Dimensionality::Two,
            exact: Some(RationalGeometry::cube()),
        }
    }

    /// Geometry with `lx = 1` and the given exact squared ratios.
    pub fn from_ratios(dims: Dimensionality, ry2: BigRational, rz2: BigRational) -> Result<Self> {
        let ratios = RationalGeometry::new(ry2, rz2)?;
        let side = |r: &BigRational| {
            let v = rational_to_f64(r);
            if v > 0.0 {
                Ok(1.0 / v.sqrt())
            } else {
                domain("a retained squared aspect ratio must be strictly positive")
            }
        };
        let ly = if dims.count() >= 2 { side(&ratios.ry2)? } else { 1.0 };
        let lz = if dims.count() >= 3 { side(&ratios.rz2)? } else { 1.0 };
        let mut g = CavityGeometry::new(1.0, ly, lz, dims)?;
        g.exact = Some(ratios);
        Ok(g)
    }

    /// Attaches exact ratios, checking them against the float lengths.
    pub fn with_exact_ratios(mut self, ratios: RationalGeometry) -> Result<Self> {
        let check = |name: &str, r: &BigRational, l: f64| {
            let want = (self.lx / l).powi(2);
            let got = rational_to_f64(r);
            if (got - want).abs() > 1e-12 * want.max(got) {
                domain(format!("{name} = {got} is inconsistent with lengths ({want})"))
            } else {
                Ok(())
            }
        };
        if self.dims.count() >= 2 {
            check("ry2", &ratios.ry2, self.ly)?;
        }
        if self.dims.count() >= 3 {
            check("rz2", &ratios.rz2, self.lz)?;
        }
        self.exact = Some(ratios);
        Ok(self)
    }

    /// All lengths multiplied by `s`; exact ratios are unchanged.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return domain("scale factor must be positive");
        }
        Ok(CavityGeometry {
            lx: self.lx * s,
            ly: self.ly * s,
            lz: self.lz * s,
            dims: self.dims,
            exact: self.exact.clone(),
        })
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn lz(&self) -> f64 {
        self.lz
    }
    pub fn dims(&self) -> Dimensionality {
        self.dims
    }
    pub fn exact(&self) -> Option<&RationalGeometry> {
        self.exact.as_ref()
    }

    /// Checks that `mode` has positive retained components and zero sentinels
    /// elsewhere.
    pub fn validate_mode(&self, mode: ModeIndex) -> Result<()> {
        let retained = self.dims.count();
        let comps = [mode.nx, mode.ny, mode.nz];
        for (axis, &c) in comps.iter().enumerate() {
            if axis < retained && c == 0 {
                return domain(format!("mode {mode} has a zero component on a retained axis"));
            }
            if axis >= retained && c != 0 {
                return domain(format!(
                    "mode {mode} has a component on an axis a {retained}D cavity does not have"
                ));
            }
        }
        Ok(())
    }

    /// `(nx/wall)² + (ny/ly)² + (nz/lz)²` over retained axes.
    fn wavenumber_sq(&self, wall: f64, m: ModeIndex) -> f64 {
        let x = m.nx as f64 / wall;
        let mut s = x * x;
        if self.dims.count() >= 2 {
            let y = m.ny as f64 / self.ly;
            s += y * y;
        }
        if self.dims.count() >= 3 {
            let z = m.nz as f64 / self.lz;
            s += z * z;
        }
        s
    }

    /// Transverse part of `(lx·ω/π)²`, i.e. `(lx/ly)² ny² + (lx/lz)² nz²`.
    pub fn transverse_norm_sq(&self, ny: u32, nz: u32) -> f64 {
        let mut s = 0.0;
        if self.dims.count() >= 2 {
            s += (self.lx * ny as f64 / self.ly).powi(2);
        }
        if self.dims.count() >= 3 {
            s += (self.lx * nz as f64 / self.lz).powi(2);
        }
        s
    }

    /// Exact transverse part of `(lx·ω/π)²`, when ratios are known.
    pub fn exact_transverse_norm_sq(&self, ny: u32, nz: u32) -> Option<BigRational> {
        let r = self.exact.as_ref()?;
        let mut s = BigRational::zero();
        if self.dims.count() >= 2 {
            s += &r.ry2 * BigRational::from_integer(BigInt::from(ny).pow(2));
        }
        if self.dims.count() >= 3 {
            s += &r.rz2 * BigRational::from_integer(BigInt::from(nz).pow(2));
        }
        Some(s)
    }

    /// `(lx·ω/π)²` as an exact rational.
    pub fn exact_norm_sq(&self, m: ModeIndex) -> Option<BigRational> {
        let t = self.exact_transverse_norm_sq(m.ny, m.nz)?;
        Some(t + BigRational::from_integer(BigInt::from(m.nx).pow(2)))
    }

    /// `(lx·ω/π)²` in floating point.
    pub fn norm_sq(&self, m: ModeIndex) -> f64 {
        (m.nx as f64).powi(2) + self.transverse_norm_sq(m.ny, m.nz)
    }
}

/// Static frequency `π√((nx/lx)² + (ny/ly)² + (nz/lz)²)` of `mode`.
pub fn mode_frequency(geometry: &CavityGeometry, mode: ModeIndex) -> Result<f64> {
    instantaneous_frequency(geometry, geometry.lx, mode)
}

/// Frequency of `mode` when the moving wall sits at `wall_position`.
pub fn instantaneous_frequency(
    geometry: &CavityGeometry,
    wall_position: f64,
    mode: ModeIndex,
) -> Result<f64> {
    if !(wall_position > 0.0 && wall_position.is_finite()) {
        return domain(format!("wall position must be positive (got {wall_position})"));
    }
    geometry.validate_mode(mode)?;
    Ok(PI * geometry.wavenumber_sq(wall_position, mode).sqrt())
}

/// Unchecked frequency for hot loops over modes already validated.
pub(crate) fn frequency_at(geometry: &CavityGeometry, wall: f64, mode: ModeIndex) -> f64 {
    PI * geometry.wavenumber_sq(wall, mode).sqrt()
}

/// Intermode coupling `g_kj` along the moving-wall axis.
///
/// Antisymmetric; zero on the diagonal and between modes with different
/// transverse indices.
pub fn coupling_coefficient(k: ModeIndex, j: ModeIndex) -> f64 {
    if k.transverse() != j.transverse() {
        return 0.0;
    }
    coupling_x(k.nx, j.nx)
}

/// `(-1)^(kx+jx) · 2 kx jx / (jx² − kx²)`, or 0 when `kx == jx`.
pub fn coupling_x(kx: u32, jx: u32) -> f64 {
    if kx == jx {
        return 0.0;
    }
    let (k, j) = (kx as f64, jx as f64);
    let sign = if (kx + jx) % 2 == 0 { 1.0 } else { -1.0 };
    sign * 2.0 * k * j / (j * j - k * k)
}

/// All modes with frequency at most `cutoff`, ascending by frequency with ties
/// broken lexicographically.
pub fn enumerate_modes(
    geometry: &CavityGeometry,
    cutoff: f64,
    limit: usize,
) -> Result<Vec<(ModeIndex, f64)>> {
    if cutoff.is_nan() || cutoff < 0.0 {
        return domain("frequency cutoff must be nonnegative");
    }
    let reach = cutoff / PI * (1.0 + CUTOFF_SLACK);
    let reach_sq = reach * reach;
    let dims = geometry.dims.count();
    let nx_max = (geometry.lx * reach).floor() as u64;
    let mut out = Vec::new();

    let push = |out: &mut Vec<(ModeIndex, f64)>, m: ModeIndex| -> Result<()> {
        let w = frequency_at(geometry, geometry.lx, m);
        if w <= cutoff * (1.0 + CUTOFF_SLACK) {
            if out.len() >= limit {
                return Err(Error::Resource { what: "mode enumeration".into(), limit });
            }
            out.push((m, w));
        }
        Ok(())
    };

    for nx in 1..=nx_max {
        let rx = (nx as f64 / geometry.lx).powi(2);
        if dims == 1 {
            push(&mut out, ModeIndex::axial(nx as u32))?;
            continue;
        }
        let ny_max = (geometry.ly * (reach_sq - rx).max(0.0).sqrt()).floor() as u64;
        for ny in 1..=ny_max {
            if dims == 2 {
                push(&mut out, ModeIndex::planar(nx as u32, ny as u32))?;
                continue;
            }
            let ry = (ny as f64 / geometry.ly).powi(2);
            let nz_max = (geometry.lz * (reach_sq - rx - ry).max(0.0).sqrt()).floor() as u64;
            for nz in 1..=nz_max {
                push(&mut out, ModeIndex::new(nx as u32, ny as u32, nz as u32))?;
            }
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(out)
}
