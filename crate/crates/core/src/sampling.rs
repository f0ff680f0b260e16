//! Symmetric stable generators and exact finite-dimensional samplers.
//!
//! The Chentsov integrand makes every finite-dimensional law a finite stable
//! linear combination: `X_j = Σ_{δ : δ_j = 1} S_δ` with independent
//! `S_δ ~ S_α(σ_δ)`. Sampling therefore needs only the scale of each cell
//! pattern, with no series truncation.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::SpacePoint;
use crate::mdk::{cell_measures, Budget, CellMeasureTable, Method, SetFamily};
use crate::parity::{check_beta, mubeta_masses, FractionalParams};
use crate::rng::{self, CHUNK};

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return invalid(format!("α = {alpha} must lie in (0, 2]"));
    }
    Ok(())
}

/// Uniform on the open interval `(-π/2, π/2)`.
fn open_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return PI * (u - 0.5);
        }
    }
}

/// Unit-scale symmetric stable draw (CF `exp(-|θ|^α)`).
fn sas_unit<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha == 2.0 {
        let z: f64 = StandardNormal.sample(rng);
        return std::f64::consts::SQRT_2 * z;
    }
    let v = open_angle(rng);
    if alpha == 1.0 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One draw from `S_α(σ, 0, 0)` with CF `exp(-σ^α |θ|^α)`; at `α = 2` this is
/// Gaussian with variance `2σ²`.
pub fn sas_sample<R: Rng + ?Sized>(alpha: f64, sigma: f64, rng: &mut R) -> Result<f64> {
    check_alpha(alpha)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return invalid(format!("scale σ = {sigma} must be finite and non-negative"));
    }
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(sigma * sas_unit(alpha, rng))
}

/// Totally skewed positive stable draw with `E e^{-θξ} = e^{-θ^γ}` (Kanter's
/// representation).
pub fn positive_stable_sample<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return invalid(format!("γ = {gamma} must lie in (0, 1)"));
    }
    Ok(positive_stable_unchecked(gamma, rng))
}

fn positive_stable_unchecked<R: Rng + ?Sized>(gamma: f64, rng: &mut R) -> f64 {
    loop {
        let u = open_angle(rng) + 0.5 * PI;
        let w: f64 = Exp1.sample(rng);
        let x = (gamma * u).sin() / u.sin().powf(1.0 / gamma) * (((1.0 - gamma) * u).sin() / w).powf((1.0 - gamma) / gamma);
        // Underflow to 0 or overflow is possible only in the extreme tails.
        if x > 0.0 && x.is_finite() {
            return x;
        }
    }
}

/// Which field a scale table describes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum FieldKind {
    /// Lévy–Chentsov field: scales `μ(C_δ)^{1/α}` straight from the cells.
    LevyChentsov,
    /// Fractional field `η_{α,β}`: scales `(𝔪^δ)^{1/α}`.
    Fractional { beta: f64 },
}

impl FieldKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            FieldKind::LevyChentsov => Ok(()),
            FieldKind::Fractional { beta } => check_beta(*beta),
        }
    }
}

/// Stable scales `σ_δ` of every cell pattern, indexed by bitmask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableScaleTable {
    d: usize,
    alpha: f64,
    scales: Vec<f64>,
}

impl StableScaleTable {
    /// Scales from per-pattern spectral masses: `σ_δ = m_δ^{1/α}`.
    pub fn from_masses(d: usize, alpha: f64, masses: &[f64]) -> Result<Self> {
        check_alpha(alpha)?;
        if masses.len() != 1 << d {
            return invalid(format!("expected {} masses, got {}", 1 << d, masses.len()));
        }
        let mut scales: Vec<f64> = masses.iter().map(|m| m.max(0.0).powf(1.0 / alpha)).collect();
        scales[0] = 0.0;
        Ok(Self { d, alpha, scales })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self, delta: usize) -> f64 {
        self.scales.get(delta).copied().unwrap_or(0.0)
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// `exp(-Σ_δ |⟨θ, δ⟩|^α σ_δ^α)`.
    pub fn characteristic_function(&self, theta: &[f64]) -> f64 {
        let mut s = 0.0;
        for (delta, sigma) in self.scales.iter().enumerate().skip(1) {
            if *sigma > 0.0 {
                let t: f64 = (0..self.d).filter(|j| delta >> j & 1 == 1).map(|j| theta[j]).sum();
                s += t.abs().powf(self.alpha) * sigma.powf(self.alpha);
            }
        }
        (-s).exp()
    }

    /// One joint draw, also returning the independent components `S_δ`.
    pub fn draw_with_components<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut comps = vec![0.0; self.scales.len()];
        let mut values = vec![0.0; self.d];
        for (delta, &sigma) in self.scales.iter().enumerate().skip(1) {
            if sigma == 0.0 {
                continue;
            }
            let s = sigma * sas_unit(self.alpha, rng);
            comps[delta] = s;
            for (j, v) in values.iter_mut().enumerate() {
                if delta >> j & 1 == 1 {
                    *v += s;
                }
            }
        }
        (values, comps)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.draw_with_components(rng).0
    }
}

/// Scales of the fractional field: `σ_δ = (𝔪^δ)^{1/α}`.
pub fn fdd_scales(cells: &CellMeasureTable, params: &FractionalParams) -> Result<StableScaleTable> {
    params.validate()?;
    let masses = mubeta_masses(cells, params.beta)?;
    StableScaleTable::from_masses(cells.dim(), params.alpha, &masses)
}

/// Scales for either field kind.
pub fn field_scales(cells: &CellMeasureTable, alpha: f64, field: FieldKind) -> Result<StableScaleTable> {
    field.validate()?;
    match field {
        FieldKind::LevyChentsov => StableScaleTable::from_masses(cells.dim(), alpha, cells.masses()),
        FieldKind::Fractional { beta } => fdd_scales(cells, &FractionalParams::new(alpha, beta)?),
    }
}

/// One row of field values, one entry per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddSample {
    pub values: Vec<f64>,
}

/// Provenance written alongside a batch of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    #[serde(flatten)]
    pub field: FieldKind,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_prime: Option<f64>,
    pub points: Vec<SpacePoint>,
    pub seed: u64,
    pub cell_method: Method,
    pub cell_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddBatch {
    pub meta: SampleMeta,
    pub samples: Vec<FddSample>,
}

impl FddBatch {
    /// Values of point `j` across the batch.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.values[j]).collect()
    }

    /// CSV with `#`-prefixed metadata lines, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = &self.meta;
        match m.field {
            FieldKind::LevyChentsov => writeln!(w, "# field=levy_chentsov")?,
            FieldKind::Fractional { beta } => writeln!(w, "# field=fractional beta={beta}")?,
        }
        writeln!(w, "# alpha={}", m.alpha)?;
        if let Some(ap) = m.alpha_prime {
            writeln!(w, "# alpha_prime={ap}")?;
        }
        writeln!(w, "# seed={}", m.seed)?;
        writeln!(w, "# cell_method={} cell_err={:.3e}", serde_json::to_string(&m.cell_method)?.trim_matches('"'), m.cell_err)?;
        writeln!(w, "# points={}", serde_json::to_string(&m.points)?)?;
        let header: Vec<String> = (1..=m.points.len()).map(|j| format!("x{j}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let row: Vec<String> = s.values.iter().map(|v| format!("{v:.8e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// `n` draws from a scale table. Chunk `i` of [`CHUNK`] samples uses stream
/// `i` of `seed`, so the output does not depend on the thread count.
pub fn sample_scales(scales: &StableScaleTable, n: usize, seed: u64) -> Vec<FddSample> {
    sample_chunked(n, seed, |rng| FddSample { values: scales.draw(rng) })
}

pub(crate) fn sample_chunked<T: Send>(n: usize, seed: u64, draw: impl Fn(&mut rng::StreamRng) -> T + Sync) -> Vec<T> {
    let chunks = n.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = rng::stream(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| draw(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Exact f.d.d. samples of the fractional or Lévy–Chentsov field at `points`.
pub fn sample_fdd(
    points: &[SpacePoint],
    family: &SetFamily,
    alpha: f64,
    field: FieldKind,
    n: usize,
    seed: u64,
    budget: &Budget,
) -> Result<FddBatch> {
    check_alpha(alpha)?;
    field.validate()?;
    let cells = cell_measures(points, family, budget)?;
    let scales = field_scales(&cells, alpha, field)?;
    Ok(FddBatch {
        meta: SampleMeta {
            field,
            alpha,
            alpha_prime: None,
            points: points.to_vec(),
            seed,
            cell_method: cells.method,
            cell_err: cells.err,
        },
        samples: sample_scales(&scales, n, seed),
    })
}

fn check_substable(alpha: f64, alpha_prime: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < alpha_prime && alpha_prime <= 2.0) {
        return invalid(format!("need 0 < α < α′ ≤ 2, got α = {alpha}, α′ = {alpha_prime}"));
    }
    Ok(())
}

/// Sub-stable samples `ξ^{1/α′} X` from cells, where `X` is the Lévy–Chentsov
/// `S_{α′}` vector and `ξ` is positive `α/α′`-stable.
pub fn sample_substable_cells(cells: &CellMeasureTable, alpha: f64, alpha_prime: f64, n: usize, seed: u64) -> Result<Vec<FddSample>> {
    check_substable(alpha, alpha_prime)?;
    let base = StableScaleTable::from_masses(cells.dim(), alpha_prime, cells.masses())?;
    let gamma = alpha / alpha_prime;
    Ok(sample_chunked(n, seed, |rng| {
        let xi = positive_stable_unchecked(gamma, rng).powf(1.0 / alpha_prime);
        let mut values = base.draw(rng);
        values.iter_mut().for_each(|v| *v *= xi);
        FddSample { values }
    }))
}

pub fn sample_substable(
    points: &[SpacePoint],
    family: &SetFamily,
    alpha: f64,
    alpha_prime: f64,
    n: usize,
    seed: u64,
    budget: &Budget,
) -> Result<FddBatch> {
    check_substable(alpha, alpha_prime)?;
    let cells = cell_measures(points, family, budget)?;
    Ok(FddBatch {
        meta: SampleMeta {
            field: FieldKind::LevyChentsov,
            alpha,
            alpha_prime: Some(alpha_prime),
            points: points.to_vec(),
            seed,
            cell_method: cells.method,
            cell_err: cells.err,
        },
        samples: sample_substable_cells(&cells, alpha, alpha_prime, n, seed)?,
    })
}

/// `exp(-(Σ_η |⟨θ, η⟩|^{α′} μ(C_η))^{α/α′})`.
pub fn substable_cf(cells: &CellMeasureTable, theta: &[f64], alpha: f64, alpha_prime: f64) -> Result<f64> {
    check_substable(alpha, alpha_prime)?;
    if theta.len() != cells.dim() {
        return invalid("θ must have one entry per set");
    }
    let mut s = 0.0;
    for (eta, m) in cells.masses().iter().enumerate().skip(1) {
        let t: f64 = (0..cells.dim()).filter(|j| eta >> j & 1 == 1).map(|j| theta[j]).sum();
        s += t.abs().powf(alpha_prime) * m;
    }
    Ok((-s.powf(alpha / alpha_prime)).exp())
}
