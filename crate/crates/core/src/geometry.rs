//! Metric spaces ℝⁿ (n ≤ 3), 𝕊² and the Poincaré disc, their geodesic
//! distances and the isometry groups acting on them.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Unit-norm tolerance for sphere points.
pub const SPHERE_TOL: f64 = 1e-12;
/// Tolerance on orthogonality and on `|a|² - |b|² = 1`.
pub const GROUP_TOL: f64 = 1e-10;
/// Generated disc points keep `|z| <= 1 - DISC_MARGIN`.
pub const DISC_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    Euclidean { dim: usize },
    Sphere2,
    HyperbolicDisc,
}

impl SpaceKind {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return invalid(format!("euclidean dimension must be 1, 2 or 3, got {dim}"));
        }
        Ok(SpaceKind::Euclidean { dim })
    }

    /// The reference point `o` at which fields are pinned to zero.
    pub fn origin(self) -> SpacePoint {
        match self {
            SpaceKind::Euclidean { dim } => SpacePoint::Euclidean(vec![0.0; dim]),
            SpaceKind::Sphere2 => SpacePoint::Sphere2([1.0, 0.0, 0.0]),
            SpaceKind::HyperbolicDisc => SpacePoint::Disc(Complex64::new(0.0, 0.0)),
        }
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceKind::Euclidean { dim } => write!(f, "R{dim}"),
            SpaceKind::Sphere2 => write!(f, "S2"),
            SpaceKind::HyperbolicDisc => write!(f, "H2"),
        }
    }
}

/// A point of one of the supported spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "coords", rename_all = "snake_case")]
pub enum SpacePoint {
    Euclidean(Vec<f64>),
    /// Unit vector in ℝ³.
    Sphere2([f64; 3]),
    /// Complex number with `|z| < 1`.
    #[serde(rename = "hyperbolic_disc")]
    Disc(Complex64),
}

impl SpacePoint {
    pub fn euclidean(coords: &[f64]) -> Result<Self> {
        let p = SpacePoint::Euclidean(coords.to_vec());
        p.validate()?;
        Ok(p)
    }

    /// Sphere point from any non-zero vector, rescaled to unit length.
    pub fn sphere(v: [f64; 3]) -> Result<Self> {
        let n = norm3(&v);
        if !(n.is_finite() && n > 0.0) {
            return invalid("sphere point needs a non-zero finite vector");
        }
        Ok(SpacePoint::Sphere2([v[0] / n, v[1] / n, v[2] / n]))
    }

    pub fn disc(re: f64, im: f64) -> Result<Self> {
        let p = SpacePoint::Disc(Complex64::new(re, im));
        p.validate()?;
        Ok(p)
    }

    pub fn kind(&self) -> SpaceKind {
        match self {
            SpacePoint::Euclidean(c) => SpaceKind::Euclidean { dim: c.len() },
            SpacePoint::Sphere2(_) => SpaceKind::Sphere2,
            SpacePoint::Disc(_) => SpaceKind::HyperbolicDisc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SpacePoint::Euclidean(c) => {
                if !(1..=3).contains(&c.len()) {
                    return invalid(format!("euclidean point must have 1..=3 coordinates, got {}", c.len()));
                }
                if c.iter().any(|x| !x.is_finite()) {
                    return invalid("euclidean point has non-finite coordinates");
                }
            }
            SpacePoint::Sphere2(v) => {
                if (norm3(v) - 1.0).abs() > SPHERE_TOL {
                    return invalid(format!("sphere point {v:?} is not unit length"));
                }
            }
            SpacePoint::Disc(z) => {
                if !(z.norm() < 1.0) {
                    return invalid(format!("disc point {z} is not strictly inside the unit disc"));
                }
            }
        }
        Ok(())
    }

    /// Coordinates as a flat vector (disc points as `[re, im]`).
    pub fn coords(&self) -> Vec<f64> {
        match self {
            SpacePoint::Euclidean(c) => c.clone(),
            SpacePoint::Sphere2(v) => v.to_vec(),
            SpacePoint::Disc(z) => vec![z.re, z.im],
        }
    }

    /// Builds a point of `kind` from flat coordinates; sphere input is
    /// normalised.
    pub fn from_coords(kind: SpaceKind, c: &[f64]) -> Result<Self> {
        match kind {
            SpaceKind::Euclidean { dim } => {
                if c.len() != dim {
                    return invalid(format!("expected {dim} coordinates, got {}", c.len()));
                }
                SpacePoint::euclidean(c)
            }
            SpaceKind::Sphere2 => match c {
                [x, y, z] => SpacePoint::sphere([*x, *y, *z]),
                _ => invalid(format!("sphere points need 3 coordinates, got {}", c.len())),
            },
            SpaceKind::HyperbolicDisc => match c {
                [re, im] => SpacePoint::disc(*re, *im),
                _ => invalid(format!("disc points need 2 coordinates, got {}", c.len())),
            },
        }
    }
}

pub(crate) fn check_same_kind(a: SpaceKind, b: SpaceKind) -> Result<()> {
    if a != b {
        return Err(Error::KindMismatch { left: a.to_string(), right: b.to_string() });
    }
    Ok(())
}

/// Geodesic distance.
///
/// The disc carries `d(z, z') = ½ log((|1 - z̄z'| + |z - z'|) / (|1 - z̄z'| - |z - z'|))`,
/// evaluated as `atanh(|z - z'| / |1 - z̄z'|)`.
pub fn distance(x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
    check_same_kind(x.kind(), y.kind())?;
    x.validate()?;
    y.validate()?;
    Ok(distance_unchecked(x, y))
}

pub(crate) fn distance_unchecked(x: &SpacePoint, y: &SpacePoint) -> f64 {
    match (x, y) {
        (SpacePoint::Euclidean(a), SpacePoint::Euclidean(b)) => {
            a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
        }
        (SpacePoint::Sphere2(a), SpacePoint::Sphere2(b)) => {
            let c = cross(a, b);
            norm3(&c).atan2(dot3(a, b))
        }
        (SpacePoint::Disc(z), SpacePoint::Disc(w)) => {
            let num = (z - w).norm();
            if num == 0.0 {
                return 0.0;
            }
            let den = (Complex64::new(1.0, 0.0) - z.conj() * w).norm();
            (num / den).min(1.0 - f64::EPSILON).atanh()
        }
        _ => unreachable!("kinds checked by caller"),
    }
}

/// An isometry of one of the spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupElement {
    /// `x ↦ Qx + b`, `Q` orthogonal (row-major).
    Euclidean { q: Vec<f64>, b: Vec<f64> },
    /// Rotation matrix in SO(3) (row-major).
    Rotation { r: [[f64; 3]; 3] },
    /// SU(1,1) element acting by `z ↦ (az + b) / (b̄z + ā)`.
    Mobius { a: Complex64, b: Complex64 },
}

impl GroupElement {
    pub fn identity(kind: SpaceKind) -> Self {
        match kind {
            SpaceKind::Euclidean { dim } => {
                let mut q = vec![0.0; dim * dim];
                for i in 0..dim {
                    q[i * dim + i] = 1.0;
                }
                GroupElement::Euclidean { q, b: vec![0.0; dim] }
            }
            SpaceKind::Sphere2 => GroupElement::Rotation {
                r: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            },
            SpaceKind::HyperbolicDisc => GroupElement::Mobius {
                a: Complex64::new(1.0, 0.0),
                b: Complex64::new(0.0, 0.0),
            },
        }
    }

    pub fn translation(b: &[f64]) -> Result<Self> {
        let kind = SpaceKind::euclidean(b.len())?;
        match GroupElement::identity(kind) {
            GroupElement::Euclidean { q, .. } => Ok(GroupElement::Euclidean { q, b: b.to_vec() }),
            _ => unreachable!(),
        }
    }

    /// Rotation of 𝕊² by `angle` about the unit `axis` (Rodrigues).
    pub fn rotation_about(axis: [f64; 3], angle: f64) -> Result<Self> {
        let n = norm3(&axis);
        if !(n > 0.0) {
            return invalid("rotation axis must be non-zero");
        }
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Ok(GroupElement::Rotation {
            r: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        })
    }

    pub fn mobius(a: Complex64, b: Complex64) -> Result<Self> {
        let g = GroupElement::Mobius { a, b };
        g.validate()?;
        Ok(g)
    }

    pub fn kind(&self) -> SpaceKind {
        match self {
            GroupElement::Euclidean { b, .. } => SpaceKind::Euclidean { dim: b.len() },
            GroupElement::Rotation { .. } => SpaceKind::Sphere2,
            GroupElement::Mobius { .. } => SpaceKind::HyperbolicDisc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GroupElement::Euclidean { q, b } => {
                let n = b.len();
                if !(1..=3).contains(&n) || q.len() != n * n {
                    return Err(Error::InvalidGroupElement(format!(
                        "euclidean element needs an n×n matrix and n-vector, n in 1..=3 (got {} and {n})",
                        q.len()
                    )));
                }
                let dev = orthogonality_defect(q, n);
                if dev > GROUP_TOL {
                    return Err(Error::InvalidGroupElement(format!("QᵀQ deviates from I by {dev:.3e}")));
                }
                let det = determinant(q, n);
                if (det.abs() - 1.0).abs() > GROUP_TOL {
                    return Err(Error::InvalidGroupElement(format!("det Q = {det}")));
                }
            }
            GroupElement::Rotation { r } => {
                let flat: Vec<f64> = r.iter().flatten().copied().collect();
                let dev = orthogonality_defect(&flat, 3);
                let det = determinant(&flat, 3);
                if dev > GROUP_TOL || (det - 1.0).abs() > GROUP_TOL {
                    return Err(Error::InvalidGroupElement(format!(
                        "not in SO(3): orthogonality defect {dev:.3e}, det {det}"
                    )));
                }
            }
            GroupElement::Mobius { a, b } => {
                let defect = a.norm_sqr() - b.norm_sqr() - 1.0;
                if !(defect.abs() <= GROUP_TOL) {
                    return Err(Error::InvalidGroupElement(format!("|a|²-|b|²-1 = {defect:.3e}")));
                }
            }
        }
        Ok(())
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        check_same_kind(self.kind(), other.kind())?;
        Ok(match (self, other) {
            (GroupElement::Euclidean { q: q1, b: b1 }, GroupElement::Euclidean { q: q2, b: b2 }) => {
                let n = b1.len();
                let mut q = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        q[i * n + j] = (0..n).map(|k| q1[i * n + k] * q2[k * n + j]).sum();
                    }
                }
                let b = (0..n)
                    .map(|i| (0..n).map(|k| q1[i * n + k] * b2[k]).sum::<f64>() + b1[i])
                    .collect();
                GroupElement::Euclidean { q, b }
            }
            (GroupElement::Rotation { r: r1 }, GroupElement::Rotation { r: r2 }) => {
                let mut r = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        r[i][j] = (0..3).map(|k| r1[i][k] * r2[k][j]).sum();
                    }
                }
                GroupElement::Rotation { r }
            }
            (GroupElement::Mobius { a: a1, b: b1 }, GroupElement::Mobius { a: a2, b: b2 }) => {
                GroupElement::Mobius { a: a1 * a2 + b1 * b2.conj(), b: a1 * b2 + b1 * a2.conj() }
            }
            _ => unreachable!("kinds checked above"),
        })
    }

    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::Euclidean { q, b } => {
                let n = b.len();
                let mut qt = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        qt[i * n + j] = q[j * n + i];
                    }
                }
                let bi = (0..n).map(|i| -(0..n).map(|k| qt[i * n + k] * b[k]).sum::<f64>()).collect();
                GroupElement::Euclidean { q: qt, b: bi }
            }
            GroupElement::Rotation { r } => {
                let mut t = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        t[i][j] = r[j][i];
                    }
                }
                GroupElement::Rotation { r: t }
            }
            GroupElement::Mobius { a, b } => GroupElement::Mobius { a: a.conj(), b: -b },
        }
    }
}

/// The action `(g, x) ↦ g x`.
pub fn apply_group(g: &GroupElement, x: &SpacePoint) -> Result<SpacePoint> {
    check_same_kind(g.kind(), x.kind())?;
    g.validate()?;
    x.validate()?;
    Ok(apply_unchecked(g, x))
}

pub(crate) fn apply_unchecked(g: &GroupElement, x: &SpacePoint) -> SpacePoint {
    match (g, x) {
        (GroupElement::Euclidean { q, b }, SpacePoint::Euclidean(c)) => {
            let n = c.len();
            SpacePoint::Euclidean(
                (0..n).map(|i| (0..n).map(|k| q[i * n + k] * c[k]).sum::<f64>() + b[i]).collect(),
            )
        }
        (GroupElement::Rotation { r }, SpacePoint::Sphere2(v)) => {
            let w = [dot3(&r[0], v), dot3(&r[1], v), dot3(&r[2], v)];
            // renormalise so repeated application keeps the unit-norm invariant
            let n = norm3(&w);
            SpacePoint::Sphere2([w[0] / n, w[1] / n, w[2] / n])
        }
        (GroupElement::Mobius { a, b }, SpacePoint::Disc(z)) => {
            SpacePoint::Disc((a * z + b) / (b.conj() * z + a.conj()))
        }
        _ => unreachable!("kinds checked by caller"),
    }
}

/// A valid isometry drawn from `rng`.
///
/// Orthogonal parts come from Gram–Schmidt on a Gaussian matrix (with a
/// determinant fix for SO(3)); SU(1,1) elements are rotation·boost products.
/// The law is not Haar.
pub fn random_group_element<R: Rng + ?Sized>(kind: SpaceKind, rng: &mut R) -> GroupElement {
    match kind {
        SpaceKind::Euclidean { dim } => {
            let q = random_orthogonal(dim, rng);
            let b = (0..dim).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            GroupElement::Euclidean { q, b }
        }
        SpaceKind::Sphere2 => {
            let mut q = random_orthogonal(3, rng);
            if determinant(&q, 3) < 0.0 {
                for row in 0..3 {
                    q[row * 3] = -q[row * 3];
                }
            }
            GroupElement::Rotation {
                r: [[q[0], q[1], q[2]], [q[3], q[4], q[5]], [q[6], q[7], q[8]]],
            }
        }
        SpaceKind::HyperbolicDisc => {
            let t: f64 = rng.random_range(0.0..1.5);
            let phi_a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let phi_b: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            GroupElement::Mobius {
                a: Complex64::from_polar(t.cosh(), phi_a),
                b: Complex64::from_polar(t.sinh(), phi_b),
            }
        }
    }
}

/// A random point: Gaussian in ℝⁿ (scale 1.5), uniform on 𝕊², uniform in
/// the disc of Euclidean radius 0.9.
pub fn random_point<R: Rng + ?Sized>(kind: SpaceKind, rng: &mut R) -> SpacePoint {
    match kind {
        SpaceKind::Euclidean { dim } => {
            SpacePoint::Euclidean((0..dim).map(|_| 1.5 * rng.sample::<f64, _>(StandardNormal)).collect())
        }
        SpaceKind::Sphere2 => loop {
            let v: [f64; 3] = std::array::from_fn(|_| rng.sample(StandardNormal));
            if norm3(&v) > 1e-6 {
                break SpacePoint::sphere(v).expect("non-zero vector");
            }
        },
        SpaceKind::HyperbolicDisc => loop {
            let r = 0.9 * rng.random::<f64>().sqrt();
            let z = Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU));
            if z.norm() <= 1.0 - DISC_MARGIN {
                break SpacePoint::Disc(z);
            }
        },
    }
}

fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut cols: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let mut ok = true;
        for j in 0..n {
            for k in 0..j {
                let p: f64 = (0..n).map(|i| cols[j][i] * cols[k][i]).sum();
                for i in 0..n {
                    cols[j][i] -= p * cols[k][i];
                }
            }
            let nn = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if nn < 1e-8 {
                ok = false;
                break;
            }
            cols[j].iter_mut().for_each(|x| *x /= nn);
        }
        if ok {
            let mut q = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    q[i * n + j] = cols[j][i];
                }
            }
            return q;
        }
    }
}

fn orthogonality_defect(q: &[f64], n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| q[k * n + i] * q[k * n + j]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
    }
    worst
}

fn determinant(q: &[f64], n: usize) -> f64 {
    match n {
        1 => q[0],
        2 => q[0] * q[3] - q[1] * q[2],
        3 => {
            q[0] * (q[4] * q[8] - q[5] * q[7]) - q[1] * (q[3] * q[8] - q[5] * q[6])
                + q[2] * (q[3] * q[7] - q[4] * q[6])
        }
        _ => f64::NAN,
    }
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}
