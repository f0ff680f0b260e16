//! Breakpoint-aware slicing of the separator spaces.
//!
//! Every separator space is integrated as nested one-dimensional integrals.
//! The innermost line is split at the exact points where some indicator
//! switches, so it is integrated in closed form; the outer variables are
//! split where the order of those switch points changes, which leaves a
//! smooth integrand on every segment for Gauss–Legendre panels.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::geometry::{cross, dot3, norm3, SpaceKind, SpacePoint};
use crate::quad::{for_each_node, NeumaierSum};

use super::{disc_member, euclidean_member, sphere_member};

/// Set `j` of a family: `A_point`, or `A_point Δ A_base` when a base is set.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Indicator {
    pub point: usize,
    pub base: Option<usize>,
}

pub(crate) struct Accumulator<'a> {
    sets: &'a [Indicator],
    pub masses: Vec<NeumaierSum>,
}

impl<'a> Accumulator<'a> {
    pub fn new(sets: &'a [Indicator]) -> Self {
        Accumulator { sets, masses: vec![NeumaierSum::default(); 1 << sets.len()] }
    }

    /// Maps a membership mask over points to a mask over sets.
    #[inline]
    pub fn set_mask(&self, point_mask: u32) -> usize {
        let mut m = 0usize;
        for (j, s) in self.sets.iter().enumerate() {
            let mut bit = (point_mask >> s.point) & 1;
            if let Some(b) = s.base {
                bit ^= (point_mask >> b) & 1;
            }
            m |= (bit as usize) << j;
        }
        m
    }

    #[inline]
    pub fn add(&mut self, point_mask: u32, w: f64) {
        let m = self.set_mask(point_mask);
        if m != 0 {
            self.masses[m].add(w);
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.masses.iter().map(|s| s.value()).collect()
    }
}

/// Integrates one line `(lo, hi)` split at `breaks`, adding
/// `outer_w * weight(a, b)` to the cell of each sub-interval's midpoint.
#[inline]
fn integrate_line(
    breaks: &mut Vec<f64>,
    lo: f64,
    hi: f64,
    outer_w: f64,
    weight: impl Fn(f64, f64) -> f64,
    member: impl Fn(f64) -> u32,
    acc: &mut Accumulator,
) {
    breaks.retain(|&t| t > lo && t < hi);
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b > a {
            let pm = member(0.5 * (a + b));
            if pm != 0 {
                acc.add(pm, outer_w * weight(a, b));
            }
        }
    }
}

/// Angles in `[0, 2π)` where `⟨(cos θ, sin θ), w⟩ = 0`, for each non-zero `w`.
fn circle_zeros(normals: &[[f64; 2]], out: &mut Vec<f64>) {
    for w in normals {
        if w[0] == 0.0 && w[1] == 0.0 {
            continue;
        }
        let base = w[1].atan2(w[0]);
        for t in [base + 0.5 * PI, base - 0.5 * PI] {
            out.push(t.rem_euclid(TAU));
        }
    }
}

fn with_differences<const N: usize>(vs: &[[f64; N]]) -> Vec<[f64; N]> {
    let mut all = vs.to_vec();
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            all.push(std::array::from_fn(|i| vs[a][i] - vs[b][i]));
        }
    }
    all
}

fn segments(mut breaks: Vec<f64>, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    breaks.retain(|&t| t > lo && t < hi);
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    breaks.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| b > a).collect()
}

/// Raw (unnormalised) cell masses of the sets described by `sets` over the
/// `points`, using `panels` Gauss–Legendre panels per smooth segment.
pub(crate) fn raw_cells(kind: SpaceKind, points: &[SpacePoint], sets: &[Indicator], panels: usize) -> Vec<f64> {
    let mut acc = Accumulator::new(sets);
    match kind {
        SpaceKind::Euclidean { dim: 1 } => euclid1(points, &mut acc),
        SpaceKind::Euclidean { dim: 2 } => euclid2(points, &mut acc, panels),
        SpaceKind::Euclidean { .. } => euclid3(points, &mut acc, panels),
        SpaceKind::Sphere2 => sphere(points, &mut acc, panels),
        SpaceKind::HyperbolicDisc => disc(points, &mut acc, panels),
    }
    acc.values()
}

fn euclid_coords<const N: usize>(points: &[SpacePoint]) -> Vec<[f64; N]> {
    points
        .iter()
        .map(|p| match p {
            SpacePoint::Euclidean(c) => std::array::from_fn(|i| c[i]),
            _ => unreachable!("kind checked by caller"),
        })
        .collect()
}

/// Inner line for hyperplanes with unit normal `s`: `r ∈ (0, max ⟨s, v⟩)`.
#[inline]
fn euclid_line(proj: &[f64], outer_w: f64, breaks: &mut Vec<f64>, acc: &mut Accumulator) {
    breaks.clear();
    let mut top = 0.0f64;
    for &t in proj {
        if t > 0.0 {
            breaks.push(t);
            top = top.max(t);
        }
    }
    if top <= 0.0 {
        return;
    }
    integrate_line(
        breaks,
        0.0,
        top,
        outer_w,
        |a, b| b - a,
        |r| {
            proj.iter()
                .enumerate()
                .fold(0u32, |m, (i, &t)| m | ((euclidean_member(r, t) as u32) << i))
        },
        acc,
    );
}

fn euclid1(points: &[SpacePoint], acc: &mut Accumulator) {
    let xs = euclid_coords::<1>(points);
    let mut breaks = Vec::new();
    let mut proj = vec![0.0; xs.len()];
    for s in [1.0, -1.0] {
        for (p, x) in proj.iter_mut().zip(&xs) {
            *p = s * x[0];
        }
        euclid_line(&proj, 1.0, &mut breaks, acc);
    }
}

fn euclid2(points: &[SpacePoint], acc: &mut Accumulator, panels: usize) {
    let xs = euclid_coords::<2>(points);
    let mut zeros = Vec::new();
    circle_zeros(&with_differences(&xs), &mut zeros);
    let mut breaks = Vec::new();
    let mut proj = vec![0.0; xs.len()];
    for (a, b) in segments(zeros, 0.0, TAU) {
        for_each_node(a, b, panels, |theta, w| {
            let (s1, s0) = theta.sin_cos();
            for (p, x) in proj.iter_mut().zip(&xs) {
                *p = s0 * x[0] + s1 * x[1];
            }
            euclid_line(&proj, w, &mut breaks, acc);
        });
    }
}

/// Gauss–Legendre nodes on `[a, b]` after the substitution
/// `w = a + (b - a)(3u² - 2u³)`, which flattens endpoint singularities.
fn for_each_clustered_node(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64, f64)) {
    for_each_node(0.0, 1.0, panels, |u, wu| {
        let g = u * u * (3.0 - 2.0 * u);
        let dg = 6.0 * u * (1.0 - u);
        f(a + (b - a) * g, wu * (b - a) * dg);
    });
}

fn euclid3(points: &[SpacePoint], acc: &mut Accumulator, panels: usize) {
    let xs = euclid_coords::<3>(points);
    let normals: Vec<[f64; 3]> = with_differences(&xs).into_iter().filter(|n| norm3(n) > 0.0).collect();

    // Heights where the middle-circle breakpoints appear, vanish or cross.
    let mut heights = Vec::new();
    for n in &normals {
        let h = n[0].hypot(n[1]) / norm3(n);
        heights.extend([h, -h]);
    }
    for a in 0..normals.len() {
        for b in a + 1..normals.len() {
            let c = cross(&normals[a], &normals[b]);
            let nc = norm3(&c);
            if nc > 0.0 {
                heights.extend([c[2] / nc, -c[2] / nc]);
            }
        }
    }

    let mut mid_breaks = Vec::new();
    let mut breaks = Vec::new();
    let mut proj = vec![0.0; xs.len()];
    for (wa, wb) in segments(heights, -1.0, 1.0) {
        for_each_clustered_node(wa, wb, panels, |w, ww| {
            let rho = (1.0 - w * w).max(0.0).sqrt();
            mid_breaks.clear();
            for n in &normals {
                let amp = rho * n[0].hypot(n[1]);
                let rhs = -w * n[2];
                if amp > rhs.abs() {
                    let base = n[1].atan2(n[0]);
                    let delta = (rhs / amp).acos();
                    mid_breaks.push((base + delta).rem_euclid(TAU));
                    mid_breaks.push((base - delta).rem_euclid(TAU));
                }
            }
            for (pa, pb) in segments(std::mem::take(&mut mid_breaks), 0.0, TAU) {
                for_each_node(pa, pb, panels, |phi, wp| {
                    let (s1, s0) = phi.sin_cos();
                    let s = [rho * s0, rho * s1, w];
                    for (p, x) in proj.iter_mut().zip(&xs) {
                        *p = dot3(&s, x);
                    }
                    euclid_line(&proj, ww * wp, &mut breaks, acc);
                });
            }
        });
    }
}

/// Separators `y` parameterised by meridians about `o = (1, 0, 0)`:
/// `y = (cos t, sin t cos φ, sin t sin φ)`, area element `sin t dt dφ`.
fn sphere(points: &[SpacePoint], acc: &mut Accumulator, panels: usize) {
    let mut vs: Vec<[f64; 3]> = points
        .iter()
        .map(|p| match p {
            SpacePoint::Sphere2(v) => *v,
            _ => unreachable!("kind checked by caller"),
        })
        .collect();
    let npts = vs.len();
    vs.push([1.0, 0.0, 0.0]);

    // Meridians through ±(v_a × v_b) are where the order of the switch
    // points along a meridian changes.
    let mut azimuths = Vec::new();
    for a in 0..vs.len() {
        for b in a + 1..vs.len() {
            let c = cross(&vs[a], &vs[b]);
            if c[1] != 0.0 || c[2] != 0.0 {
                azimuths.push(c[2].atan2(c[1]).rem_euclid(TAU));
                azimuths.push((-c[2]).atan2(-c[1]).rem_euclid(TAU));
            }
        }
    }

    let o = [1.0, 0.0, 0.0];
    let vs = &vs[..npts];
    let mut breaks = Vec::new();
    for (a, b) in segments(azimuths, 0.0, TAU) {
        for_each_node(a, b, panels, |phi, w| {
            let (sp, cp) = phi.sin_cos();
            breaks.clear();
            breaks.push(0.5 * PI);
            for v in vs {
                // zero of v₁ cos t + c sin t on (0, π)
                let c = v[1] * cp + v[2] * sp;
                if v[0] == 0.0 && c == 0.0 {
                    continue;
                }
                let mut t = (-v[0]).atan2(c);
                if t < 0.0 {
                    t += PI;
                }
                breaks.push(t);
            }
            integrate_line(
                &mut breaks,
                0.0,
                PI,
                w,
                |ta, tb| ta.cos() - tb.cos(),
                |t| {
                    let (st, ct) = t.sin_cos();
                    let y = [ct, st * cp, st * sp];
                    vs.iter()
                        .enumerate()
                        .fold(0u32, |m, (i, v)| m | ((sphere_member(&y, v, &o) as u32) << i))
                },
                acc,
            );
        });
    }
}

/// Geodesics of the disc in coordinates `(ψ, u = cot φ)`, where the measure
/// `(sin φ)^{-2} dφ dψ` becomes `du dψ`. For fixed `ψ` the separating
/// geodesics of `z` are exactly `u < q/√(1-q²)` with
/// `q = 2 Re(z̄ e^{iψ}) / (1 + |z|²)`.
fn disc(points: &[SpacePoint], acc: &mut Accumulator, panels: usize) {
    let zs: Vec<Complex64> = points
        .iter()
        .map(|p| match p {
            SpacePoint::Disc(z) => *z,
            _ => unreachable!("kind checked by caller"),
        })
        .collect();
    let hats: Vec<[f64; 2]> = zs
        .iter()
        .map(|z| {
            let k = 2.0 / (1.0 + z.norm_sqr());
            [k * z.re, k * z.im]
        })
        .collect();
    let mut zeros = Vec::new();
    circle_zeros(&with_differences(&hats), &mut zeros);

    let mut breaks = Vec::new();
    let mut thresholds = vec![0.0; zs.len()];
    for (a, b) in segments(zeros, 0.0, TAU) {
        for_each_node(a, b, panels, |psi, w| {
            let (s1, s0) = psi.sin_cos();
            breaks.clear();
            let mut top = 0.0f64;
            for (t, h) in thresholds.iter_mut().zip(&hats) {
                let q = s0 * h[0] + s1 * h[1];
                *t = if q > 0.0 { q / (1.0 - q * q).sqrt() } else { 0.0 };
                if *t > 0.0 {
                    breaks.push(*t);
                    top = top.max(*t);
                }
            }
            if top <= 0.0 {
                return;
            }
            let dir = Complex64::new(s0, s1);
            integrate_line(
                &mut breaks,
                0.0,
                top,
                w,
                |ua, ub| ub - ua,
                |u| {
                    zs.iter()
                        .enumerate()
                        .fold(0u32, |m, (i, z)| m | ((disc_member(*z, u, dir) as u32) << i))
                },
                acc,
            );
        });
    }
}
