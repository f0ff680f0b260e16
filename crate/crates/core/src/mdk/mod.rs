//! Separating-set families that realise each metric as a measure definite
//! kernel, `d(x, y) = μ(A_x Δ A_y)`, and the partition-cell masses of
//! finitely many such sets.
//!
//! * ℝⁿ: `A_x` is the set of hyperplanes `{⟨s, ·⟩ = r}` with `0 < r < ⟨s, x⟩`.
//! * 𝕊²: `A_x` is the set of great circles `h_y` separating `x` from `o`.
//! * Disc: `A_z` is the set of geodesics separating `z` from `0`.
//! * Box: `A_t = [0, t] ⊂ ℝ₊ⁿ` with Lebesgue measure.
//!
//! Normalising constants of μ are calibrated numerically so that
//! `μ(A_x) = d(x, o)`.

mod slice;

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::geometry::{self, check_same_kind, dot3, GroupElement, SpaceKind, SpacePoint};

use slice::Indicator;

/// Largest number of sets in a joint cell table.
pub const MAX_SETS: usize = 8;

/// A separator: an element of the measure space `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Separator {
    /// Hyperplane `{y : ⟨direction, y⟩ = offset}`, unit direction, offset > 0.
    Hyperplane { direction: Vec<f64>, offset: f64 },
    /// Great circle `{w : ⟨normal, w⟩ = 0}` on 𝕊².
    GreatCircle { normal: [f64; 3] },
    /// Disc geodesic with ideal endpoints `e^{i(ψ ± φ)}`, `φ ∈ (0, π/2]`.
    Geodesic { phi: f64, psi: f64 },
}

impl Separator {
    pub fn kind(&self) -> SpaceKind {
        match self {
            Separator::Hyperplane { direction, .. } => SpaceKind::Euclidean { dim: direction.len() },
            Separator::GreatCircle { .. } => SpaceKind::Sphere2,
            Separator::Geodesic { .. } => SpaceKind::HyperbolicDisc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Separator::Hyperplane { direction, offset } => {
                let n = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (n - 1.0).abs() > 1e-12 || !(*offset > 0.0) {
                    return invalid("hyperplane needs a unit direction and positive offset");
                }
            }
            Separator::GreatCircle { normal } => {
                if (dot3(normal, normal).sqrt() - 1.0).abs() > 1e-12 {
                    return invalid("great-circle normal must be a unit vector");
                }
            }
            Separator::Geodesic { phi, psi } => {
                if !(*phi > 0.0 && *phi <= 0.5 * PI) || !(0.0..TAU).contains(psi) {
                    return invalid("geodesic parameters need φ ∈ (0, π/2], ψ ∈ [0, 2π)");
                }
            }
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn euclidean_member(offset: f64, projection: f64) -> bool {
    0.0 < offset && offset < projection
}

#[inline]
pub(crate) fn sphere_member(y: &[f64; 3], x: &[f64; 3], o: &[f64; 3]) -> bool {
    dot3(y, x) * dot3(y, o) < 0.0
}

/// Circle test in `(u = cot φ, e^{iψ})` coordinates:
/// `|u z - e^{iψ} √(1 + u²)| < 1`, expanded to
/// `u (1 + |z|²) < 2 √(1 + u²) Re(z̄ e^{iψ})` so that `z = 0` is excluded
/// exactly rather than up to rounding of `|e^{iψ}|`.
#[inline]
pub(crate) fn disc_member(z: Complex64, u: f64, dir: Complex64) -> bool {
    u > 0.0 && u * (1.0 + z.norm_sqr()) < 2.0 * (1.0 + u * u).sqrt() * (z.conj() * dir).re
}

/// Membership of `x` in the separating set `A_x` at separator `h`.
///
/// Boundary cases (tangency, zero products) count as not separating.
pub fn separates(h: &Separator, x: &SpacePoint) -> Result<bool> {
    check_same_kind(h.kind(), x.kind())?;
    h.validate()?;
    x.validate()?;
    Ok(separates_unchecked(h, x))
}

fn separates_unchecked(h: &Separator, x: &SpacePoint) -> bool {
    match (h, x) {
        (Separator::Hyperplane { direction, offset }, SpacePoint::Euclidean(c)) => {
            let p: f64 = direction.iter().zip(c).map(|(s, x)| s * x).sum();
            euclidean_member(*offset, p)
        }
        (Separator::GreatCircle { normal }, SpacePoint::Sphere2(v)) => sphere_member(normal, v, &[1.0, 0.0, 0.0]),
        (Separator::Geodesic { phi, psi }, SpacePoint::Disc(z)) => {
            let c = phi.cos();
            if c <= 0.0 {
                return false;
            }
            let centre = Complex64::from_polar(1.0 / c, *psi);
            (z - centre).norm() < phi.tan()
        }
        _ => unreachable!("kinds checked by caller"),
    }
}

/// Which family of sets `A_x` a table is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SetFamily {
    /// Separating sets `A_x` indexed by points of a space.
    Separating { space: SpaceKind },
    /// Rectangles `[0, t] ⊂ ℝ₊ⁿ` under Lebesgue measure.
    Box { dim: usize },
}

impl SetFamily {
    pub fn separating(space: SpaceKind) -> Self {
        SetFamily::Separating { space }
    }

    pub fn point_kind(&self) -> SpaceKind {
        match self {
            SetFamily::Separating { space } => *space,
            SetFamily::Box { dim } => SpaceKind::Euclidean { dim: *dim },
        }
    }

    /// Whether tables for this family are computed in closed form.
    pub fn is_exact(&self) -> bool {
        matches!(
            self,
            SetFamily::Box { .. } | SetFamily::Separating { space: SpaceKind::Euclidean { dim: 1 } }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Quadrature,
    MonteCarlo,
}

/// Precision budget for quadrature tables.
///
/// Panels per smooth segment are doubled until two successive refinements
/// agree to `tol` (absolute, per cell) or `max_panels` is exceeded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub tol: f64,
    pub max_panels: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { tol: 1e-9, max_panels: 16 }
    }
}

impl Budget {
    /// A single-level budget (no refinement), for quick estimates.
    pub fn coarse() -> Self {
        Budget { tol: f64::INFINITY, max_panels: 1 }
    }
}

/// Masses `μ(∩_j A_j^{η_j})` for every non-zero sign pattern `η`.
///
/// `η` is stored as a bitmask with bit `j` set when the cell lies inside set
/// `j`; in JSON it is written as a bit-string whose leftmost character is
/// set 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMeasureTable {
    d: usize,
    masses: Vec<f64>,
    pub method: Method,
    /// Absolute error estimate per cell (standard error for Monte Carlo).
    pub err: f64,
    /// Set when the budget ran out before the requested tolerance was met.
    pub degraded: bool,
}

impl CellMeasureTable {
    /// Builds a table from masses indexed by bitmask (index 0 is ignored).
    pub fn new(d: usize, masses: Vec<f64>, method: Method, err: f64) -> Result<Self> {
        if d == 0 || d > MAX_SETS {
            return invalid(format!("table dimension must be in 1..={MAX_SETS}, got {d}"));
        }
        if masses.len() != 1 << d {
            return invalid(format!("expected {} masses, got {}", 1 << d, masses.len()));
        }
        if masses.iter().skip(1).any(|m| !(m.is_finite() && *m >= 0.0)) {
            return invalid("cell masses must be finite and non-negative");
        }
        let mut masses = masses;
        masses[0] = 0.0;
        Ok(CellMeasureTable { d, masses, method, err, degraded: false })
    }

    /// Exact table from explicit `(η, mass)` pairs; missing cells are empty.
    pub fn from_cells(d: usize, cells: &[(usize, f64)]) -> Result<Self> {
        let mut masses = vec![0.0; 1 << d];
        for &(eta, m) in cells {
            if eta == 0 || eta >= 1 << d {
                return invalid(format!("cell index {eta} out of range for d={d}"));
            }
            masses[eta] += m;
        }
        CellMeasureTable::new(d, masses, Method::Exact, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mass(&self, eta: usize) -> f64 {
        if eta == 0 {
            0.0
        } else {
            self.masses[eta]
        }
    }

    /// Masses indexed by bitmask, index 0 holding zero.
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `μ(A_j)` for set `j` (zero-based).
    pub fn marginal(&self, j: usize) -> f64 {
        (1..self.masses.len()).filter(|m| m >> j & 1 == 1).map(|m| self.masses[m]).sum()
    }

    /// `μ(∪_j A_j)`.
    pub fn union(&self) -> f64 {
        self.masses[1..].iter().sum()
    }

    /// Every cell multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> CellMeasureTable {
        let mut t = self.clone();
        t.masses.iter_mut().for_each(|m| *m *= c);
        t.err *= c;
        t
    }

    /// Sub-table for the listed sets (cells merged over the others).
    pub fn restrict(&self, sets: &[usize]) -> Result<CellMeasureTable> {
        if sets.iter().any(|&j| j >= self.d) {
            return invalid("restricting to a set index outside the table");
        }
        let mut masses = vec![0.0; 1 << sets.len()];
        for (eta, m) in self.masses.iter().enumerate().skip(1) {
            let sub = sets.iter().enumerate().fold(0, |acc, (k, &j)| acc | ((eta >> j & 1) << k));
            masses[sub] += m;
        }
        let mut t = CellMeasureTable::new(sets.len(), masses, self.method, self.err * (1 << self.d) as f64)?;
        t.degraded = self.degraded;
        Ok(t)
    }

    /// Table of the single set `A_a Δ A_b` built from sets `a` and `b`.
    pub fn symmetric_difference(&self, a: usize, b: usize) -> Result<CellMeasureTable> {
        if a >= self.d || b >= self.d {
            return invalid("set index outside the table");
        }
        let m: f64 = (1..self.masses.len())
            .filter(|eta| (eta >> a & 1) != (eta >> b & 1))
            .map(|eta| self.masses[eta])
            .sum();
        let mut t = CellMeasureTable::new(1, vec![0.0, m], self.method, 2.0 * self.err)?;
        t.degraded = self.degraded;
        Ok(t)
    }

    /// Bit-string key of `eta`, leftmost character = set 1.
    pub fn key(&self, eta: usize) -> String {
        (0..self.d).map(|j| if eta >> j & 1 == 1 { '1' } else { '0' }).collect()
    }

    fn parse_key(key: &str) -> Option<(usize, usize)> {
        let d = key.len();
        let mut eta = 0;
        for (j, c) in key.chars().enumerate() {
            match c {
                '1' => eta |= 1 << j,
                '0' => {}
                _ => return None,
            }
        }
        Some((d, eta))
    }
}

#[derive(Serialize, Deserialize)]
struct TableRecord {
    d: usize,
    cells: BTreeMap<String, f64>,
    method: Method,
    err: f64,
    #[serde(default)]
    degraded: bool,
}

impl Serialize for CellMeasureTable {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let cells = (1..self.masses.len()).map(|eta| (self.key(eta), self.masses[eta])).collect();
        TableRecord { d: self.d, cells, method: self.method, err: self.err, degraded: self.degraded }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CellMeasureTable {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rec = TableRecord::deserialize(de)?;
        let mut masses = vec![0.0; 1usize.checked_shl(rec.d as u32).unwrap_or(0)];
        for (k, v) in &rec.cells {
            match CellMeasureTable::parse_key(k) {
                Some((d, eta)) if d == rec.d && eta != 0 => masses[eta] = *v,
                _ => return Err(D::Error::custom(format!("bad cell key {k:?}"))),
            }
        }
        let mut t = CellMeasureTable::new(rec.d, masses, rec.method, rec.err).map_err(D::Error::custom)?;
        t.degraded = rec.degraded;
        Ok(t)
    }
}

fn kind_slot(kind: SpaceKind) -> usize {
    match kind {
        SpaceKind::Euclidean { dim } => dim - 1,
        SpaceKind::Sphere2 => 3,
        SpaceKind::HyperbolicDisc => 4,
    }
}

/// Reference point used to fix κ, and a second point used to cross-check.
fn calibration_points(kind: SpaceKind) -> (SpacePoint, SpacePoint) {
    match kind {
        SpaceKind::Euclidean { dim } => {
            let mut e1 = vec![0.0; dim];
            e1[0] = 1.0;
            let other: Vec<f64> = [0.3, -0.7, 1.1][..dim].to_vec();
            (SpacePoint::Euclidean(e1), SpacePoint::Euclidean(other))
        }
        SpaceKind::Sphere2 => (
            SpacePoint::Sphere2([1f64.cos(), 1f64.sin(), 0.0]),
            SpacePoint::sphere([0.2, 0.5, -0.84]).expect("non-zero"),
        ),
        SpaceKind::HyperbolicDisc => (
            SpacePoint::Disc(Complex64::new(0.5, 0.0)),
            SpacePoint::Disc(Complex64::new(0.8, 0.0)),
        ),
    }
}

const CALIBRATION_PANELS: usize = 8;

/// Normalising constant κ with `κ · raw(A_x) = d(x, o)`.
///
/// Computed once per space by quadrature at a reference point and verified
/// at a second point; a relative mismatch above 1e-3 is an error.
pub fn calibrate_normalization(kind: SpaceKind) -> Result<f64> {
    static CACHE: [OnceLock<f64>; 5] = [const { OnceLock::new() }; 5];
    let slot = &CACHE[kind_slot(kind)];
    if let Some(k) = slot.get() {
        return Ok(*k);
    }
    let k = compute_normalization(kind)?;
    Ok(*slot.get_or_init(|| k))
}

fn compute_normalization(kind: SpaceKind) -> Result<f64> {
    let o = kind.origin();
    let (reference, check) = calibration_points(kind);
    let raw = |x: &SpacePoint| {
        slice::raw_cells(kind, std::slice::from_ref(x), &[Indicator { point: 0, base: None }], CALIBRATION_PANELS)[1]
    };
    let kappa = geometry::distance_unchecked(&reference, &o) / raw(&reference);
    let target = geometry::distance_unchecked(&check, &o);
    let deviation = ((kappa * raw(&check) - target) / target).abs();
    if !(deviation <= 1e-3) {
        return Err(Error::Calibration { kind: kind.to_string(), deviation });
    }
    Ok(kappa)
}

fn check_points(points: &[SpacePoint], family: &SetFamily) -> Result<()> {
    if points.is_empty() || points.len() > MAX_SETS {
        return invalid(format!("need between 1 and {MAX_SETS} points, got {}", points.len()));
    }
    let kind = family.point_kind();
    for p in points {
        check_same_kind(kind, p.kind())?;
        p.validate()?;
        if let (SetFamily::Box { .. }, SpacePoint::Euclidean(c)) = (family, p) {
            if c.iter().any(|x| *x < 0.0) {
                return invalid("box corners must lie in the positive orthant");
            }
        }
    }
    Ok(())
}

/// Partition-cell masses `μ(∩_j A_{x_j}^{η_j})` for `η ≠ 0`.
pub fn cell_measures(points: &[SpacePoint], family: &SetFamily, budget: &Budget) -> Result<CellMeasureTable> {
    check_points(points, family)?;
    match family {
        SetFamily::Box { .. } => box_cells(points),
        SetFamily::Separating { space } => {
            let sets: Vec<Indicator> = (0..points.len()).map(|point| Indicator { point, base: None }).collect();
            separating_cells(*space, points, &sets, budget)
        }
    }
}

/// Cell masses of the increment family `{A_{g x_j} Δ A_{g o}}_j`.
pub fn increment_cell_measures(
    points: &[SpacePoint],
    g: &GroupElement,
    family: &SetFamily,
    budget: &Budget,
) -> Result<CellMeasureTable> {
    check_points(points, family)?;
    let SetFamily::Separating { space } = family else {
        return Err(Error::Unsupported("the box family carries no group action".into()));
    };
    check_same_kind(*space, g.kind())?;
    g.validate()?;
    let mut moved: Vec<SpacePoint> = points.iter().map(|p| geometry::apply_unchecked(g, p)).collect();
    let base = moved.len();
    moved.push(geometry::apply_unchecked(g, &space.origin()));
    let sets: Vec<Indicator> = (0..points.len()).map(|point| Indicator { point, base: Some(base) }).collect();
    separating_cells(*space, &moved, &sets, budget)
}

fn separating_cells(kind: SpaceKind, points: &[SpacePoint], sets: &[Indicator], budget: &Budget) -> Result<CellMeasureTable> {
    let kappa = calibrate_normalization(kind)?;
    let d = sets.len();
    if let SpaceKind::Euclidean { dim: 1 } = kind {
        let raw = slice::raw_cells(kind, points, sets, 1);
        return CellMeasureTable::new(d, raw.into_iter().map(|m| m * kappa).collect(), Method::Exact, 0.0);
    }
    let mut panels = 1;
    let mut prev = slice::raw_cells(kind, points, sets, panels);
    loop {
        let next_panels = panels * 2;
        let next = slice::raw_cells(kind, points, sets, next_panels);
        let diff = prev.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) * kappa;
        let scale = next.iter().map(|m| m.abs()).fold(0.0, f64::max) * kappa;
        let err = diff.max(scale * 1e-15);
        if err <= budget.tol || next_panels >= budget.max_panels {
            let masses = next.into_iter().map(|m| (m * kappa).max(0.0)).collect();
            let mut t = CellMeasureTable::new(d, masses, Method::Quadrature, err)?;
            t.degraded = err > budget.tol;
            return Ok(t);
        }
        prev = next;
        panels = next_panels;
    }
}

fn box_cells(points: &[SpacePoint]) -> Result<CellMeasureTable> {
    let corners: Vec<&Vec<f64>> = points
        .iter()
        .map(|p| match p {
            SpacePoint::Euclidean(c) => c,
            _ => unreachable!("kind checked"),
        })
        .collect();
    let dim = corners[0].len();
    let grids: Vec<Vec<f64>> = (0..dim)
        .map(|a| {
            let mut g: Vec<f64> = std::iter::once(0.0).chain(corners.iter().map(|c| c[a])).collect();
            g.sort_by(f64::total_cmp);
            g.dedup();
            g
        })
        .collect();
    let d = points.len();
    let mut masses = vec![0.0; 1 << d];
    let mut idx = vec![0usize; dim];
    let counts: Vec<usize> = grids.iter().map(|g| g.len() - 1).collect();
    if counts.iter().any(|&c| c == 0) {
        return CellMeasureTable::new(d, masses, Method::Exact, 0.0);
    }
    loop {
        let mut vol = 1.0;
        let mut eta = (1usize << d) - 1;
        for a in 0..dim {
            let (lo, hi) = (grids[a][idx[a]], grids[a][idx[a] + 1]);
            vol *= hi - lo;
            for (j, c) in corners.iter().enumerate() {
                if hi > c[a] {
                    eta &= !(1 << j);
                }
            }
        }
        if eta != 0 {
            masses[eta] += vol;
        }
        // odometer over grid cells
        let mut a = 0;
        loop {
            if a == dim {
                return CellMeasureTable::new(d, masses, Method::Exact, 0.0);
            }
            idx[a] += 1;
            if idx[a] < counts[a] {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// `μ(A_x Δ A_y)`.
pub fn symmdiff_measure(x: &SpacePoint, y: &SpacePoint, family: &SetFamily, budget: &Budget) -> Result<f64> {
    Ok(symmdiff_table(x, y, family, budget)?.mass(1))
}

/// Single-set table of `A_x Δ A_y`, carrying the method error.
pub fn symmdiff_table(x: &SpacePoint, y: &SpacePoint, family: &SetFamily, budget: &Budget) -> Result<CellMeasureTable> {
    cell_measures(&[x.clone(), y.clone()], family, budget)?.symmetric_difference(0, 1)
}

/// Monte Carlo cell masses: separators drawn from the normalised measure
/// restricted to a region containing every `A_x`, membership decided by
/// [`separates`]. `err` is the largest per-cell standard error.
pub fn cell_measures_monte_carlo<R: Rng + ?Sized>(
    points: &[SpacePoint],
    family: &SetFamily,
    samples: usize,
    rng: &mut R,
) -> Result<CellMeasureTable> {
    check_points(points, family)?;
    let SetFamily::Separating { space } = *family else {
        return Err(Error::Unsupported("Monte Carlo cells are for separating families".into()));
    };
    if samples < 2 {
        return invalid("need at least two Monte Carlo samples");
    }
    let kappa = calibrate_normalization(space)?;
    let d = points.len();
    let (total, mut draw): (f64, Box<dyn FnMut(&mut R) -> Separator>) = match space {
        SpaceKind::Euclidean { dim } => {
            let reach = points
                .iter()
                .map(|p| p.coords().iter().map(|x| x * x).sum::<f64>().sqrt())
                .fold(0.0, f64::max);
            let area = match dim {
                1 => 2.0,
                2 => TAU,
                _ => 4.0 * PI,
            };
            (
                area * reach,
                Box::new(move |rng: &mut R| {
                    let direction = loop {
                        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                        if n > 1e-9 {
                            break v.into_iter().map(|x| x / n).collect();
                        }
                    };
                    Separator::Hyperplane { direction, offset: reach * rng.random::<f64>() }
                }),
            )
        }
        SpaceKind::Sphere2 => (
            4.0 * PI,
            Box::new(|rng: &mut R| {
                let SpacePoint::Sphere2(normal) = geometry::random_point(SpaceKind::Sphere2, rng) else {
                    unreachable!()
                };
                Separator::GreatCircle { normal }
            }),
        ),
        SpaceKind::HyperbolicDisc => {
            let qmax = points
                .iter()
                .map(|p| match p {
                    SpacePoint::Disc(z) => 2.0 * z.norm() / (1.0 + z.norm_sqr()),
                    _ => 0.0,
                })
                .fold(0.0, f64::max);
            let umax = qmax / (1.0 - qmax * qmax).sqrt();
            (
                TAU * umax,
                Box::new(move |rng: &mut R| {
                    let u = umax * rng.random::<f64>();
                    Separator::Geodesic { phi: (1.0 / u).atan(), psi: rng.random_range(0.0..TAU) }
                }),
            )
        }
    };
    let mut counts = vec![0u64; 1 << d];
    for _ in 0..samples {
        let h = draw(rng);
        let eta = points
            .iter()
            .enumerate()
            .fold(0usize, |m, (j, p)| m | ((separates_unchecked(&h, p) as usize) << j));
        counts[eta] += 1;
    }
    let n = samples as f64;
    let scale = kappa * total;
    let mut err: f64 = 0.0;
    let masses = counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n;
            err = err.max(scale * (p * (1.0 - p) / n).sqrt());
            scale * p
        })
        .collect();
    CellMeasureTable::new(d, masses, Method::MonteCarlo, err)
}
