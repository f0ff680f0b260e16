//! Statistical verification primitives: empirical characteristic functions,
//! covariance estimates, Gaussian decomposition formulas, invariance reports
//! and the report format shared by the CLI and the acceptance tests.

use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{GroupElement, SpacePoint};
use crate::mdk::{cell_measures, increment_cell_measures, Budget, CellMeasureTable, Method, SetFamily};
use crate::parity::{check_beta, mubeta_masses};
use crate::sampling::{sample_chunked, FddSample};

impl AsRef<[f64]> for FddSample {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Empirical characteristic function at one `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfEstimate {
    pub theta: Vec<f64>,
    pub estimate: Complex64,
    /// `sqrt((Var cos + Var sin)/n)`.
    pub se: f64,
    pub n: usize,
}

/// `(1/n) Σ exp(i⟨θ, row⟩)` over at least 10³ rows.
pub fn empirical_cf<S: AsRef<[f64]>>(samples: &[S], theta: &[f64]) -> Result<CfEstimate> {
    let n = samples.len();
    if n < 1000 {
        return invalid(format!("empirical CF needs at least 10^3 samples, got {n}"));
    }
    let mut c = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for row in samples {
        let row = row.as_ref();
        if row.len() != theta.len() {
            return invalid(format!("θ has {} entries but samples have {}", theta.len(), row.len()));
        }
        let t: f64 = row.iter().zip(theta).map(|(x, t)| x * t).sum();
        c.push(t.cos());
        s.push(t.sin());
    }
    let (mc, vc) = mean_var(&c);
    let (ms, vs) = mean_var(&s);
    Ok(CfEstimate { theta: theta.to_vec(), estimate: Complex64::new(mc, ms), se: ((vc + vs) / n as f64).sqrt(), n })
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

/// `E[XY]` for centred `X, Y` with its standard error.
pub fn empirical_covariance(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("covariance needs two equally long samples of size ≥ 2");
    }
    let prod: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x * y).collect();
    let (m, v) = mean_var(&prod);
    Ok((m, (v / prod.len() as f64).sqrt()))
}

/// Where a check's target comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    DerivedOracle,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub target: f64,
    pub estimate: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    pub passed: bool,
    pub provenance: Provenance,
}

impl Check {
    /// Passes when `|estimate - target| ≤ tolerance`.
    pub fn within(name: impl Into<String>, target: f64, estimate: f64, tolerance: f64, provenance: Provenance) -> Self {
        let passed = (estimate - target).abs() <= tolerance;
        Self { name: name.into(), target, estimate, tolerance, se: None, passed, provenance }
    }

    /// Monte Carlo check at `4 SE + allowance`.
    pub fn monte_carlo(name: impl Into<String>, target: f64, estimate: f64, se: f64, allowance: f64) -> Self {
        let tolerance = 4.0 * se + allowance;
        let mut c = Self::within(name, target, estimate, tolerance, Provenance::MonteCarlo);
        c.se = Some(se);
        c
    }

    /// Passes when `estimate ≤ bound`.
    pub fn at_most(name: impl Into<String>, estimate: f64, bound: f64, provenance: Provenance) -> Self {
        Self { name: name.into(), target: bound, estimate, tolerance: 0.0, se: None, passed: estimate <= bound, provenance }
    }
}

/// Structured record of one verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub id: String,
    pub inputs: serde_json::Value,
    pub checks: Vec<Check>,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    /// Set when any input was computed with a degraded budget.
    pub partial: bool,
    #[serde(skip)]
    started: Option<Instant>,
}

impl ExperimentReport {
    pub fn new(id: impl Into<String>, inputs: serde_json::Value, seed: Option<u64>) -> Self {
        Self { id: id.into(), inputs, checks: Vec::new(), seed, wall_time_s: 0.0, partial: false, started: Some(Instant::now()) }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Records the elapsed time since construction.
    pub fn finish(mut self) -> Self {
        if let Some(t) = self.started {
            self.wall_time_s = t.elapsed().as_secs_f64();
        }
        self
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// Flat `(check, target, estimate, se, tolerance, pass, provenance)` table.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "check,target,estimate,se,tolerance,pass,provenance")?;
        for c in &self.checks {
            let se = c.se.map(|s| format!("{s:.8e}")).unwrap_or_default();
            let prov = serde_json::to_string(&c.provenance)?;
            writeln!(
                w,
                "{},{:.8e},{:.8e},{},{:.8e},{},{}",
                c.name.replace(',', ";"),
                c.target,
                c.estimate,
                se,
                c.tolerance,
                c.passed,
                prov.trim_matches('"')
            )?;
        }
        Ok(())
    }
}

/// Tolerance for invariance comparisons of non-exact tables.
pub const QUADRATURE_ALLOWANCE: f64 = 2e-3;
/// Tolerance when both tables are exact.
pub const EXACT_ALLOWANCE: f64 = 1e-10;

/// Compares every `𝔪^δ` of the increments `(g(x_j), g(o))` with those of the
/// original points.
pub fn invariance_report(
    points: &[SpacePoint],
    g: &GroupElement,
    family: &SetFamily,
    beta: f64,
    budget: &Budget,
) -> Result<ExperimentReport> {
    check_beta(beta)?;
    if points.is_empty() || points.len() > 4 {
        return invalid("invariance reports take between 1 and 4 points");
    }
    g.validate()?;
    let mut report = ExperimentReport::new(
        "invariance",
        serde_json::json!({ "points": points, "group_element": g, "beta": beta, "family": family, "budget": budget }),
        None,
    );
    let base = cell_measures(points, family, budget)?;
    let moved = increment_cell_measures(points, g, family, budget)?;
    report.partial = base.degraded || moved.degraded;
    let m0 = mubeta_masses(&base, beta)?;
    let m1 = mubeta_masses(&moved, beta)?;
    let exact = base.method == Method::Exact && moved.method == Method::Exact;
    let tol = if exact { EXACT_ALLOWANCE } else { QUADRATURE_ALLOWANCE };
    let provenance = if exact { Provenance::Analytic } else { Provenance::DerivedOracle };
    let mut worst = 0.0f64;
    for delta in 1..m0.len() {
        let dev = (m0[delta] - m1[delta]).abs();
        worst = worst.max(dev);
        report.push(Check::within(format!("m[{}]", base.key(delta)), m0[delta], m1[delta], tol, provenance));
    }
    report.push(Check::at_most("max deviation", worst, tol, provenance));
    Ok(report.finish())
}

/// Covariances of `Y_{2,β}` and of its components `W_1`, `W_2` for two sets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianCov {
    pub beta: f64,
    pub mu_a: f64,
    pub mu_b: f64,
    pub mu_ab: f64,
    /// `μ^β(A) + μ^β(B) - μ^β(AΔB)`.
    pub cov_y: f64,
    /// `(μ(A) + μ(B))^β - μ^β(AΔB)`.
    pub cov_w1: f64,
    /// `μ^β(A) + μ^β(B) - (μ(A) + μ(B))^β`.
    pub cov_w2: f64,
    /// `|Cov W_1 + Cov W_2 - Cov Y|`.
    pub sum_deviation: f64,
}

impl GaussianCov {
    pub fn from_measures(mu_a: f64, mu_b: f64, mu_ab: f64, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        if [mu_a, mu_b, mu_ab].iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return invalid("set measures must be finite and non-negative");
        }
        let (pa, pb, pab, ps) = (mu_a.powf(beta), mu_b.powf(beta), mu_ab.powf(beta), (mu_a + mu_b).powf(beta));
        let cov_y = pa + pb - pab;
        let cov_w1 = ps - pab;
        let cov_w2 = pa + pb - ps;
        Ok(Self { beta, mu_a, mu_b, mu_ab, cov_y, cov_w1, cov_w2, sum_deviation: (cov_w1 + cov_w2 - cov_y).abs() })
    }

    pub fn from_cells(cells: &CellMeasureTable, beta: f64) -> Result<Self> {
        if cells.dim() != 2 {
            return invalid("Gaussian covariance needs a two-set table");
        }
        let ab = cells.symmetric_difference(0, 1)?.mass(1);
        Self::from_measures(cells.marginal(0), cells.marginal(1), ab, beta)
    }

    /// 2×2 covariance matrices `(Y, W_1, W_2)` of the pair `(A, B)`.
    pub fn matrices(&self) -> [[[f64; 2]; 2]; 3] {
        let b = self.beta;
        let (va, vb) = (self.mu_a.powf(b), self.mu_b.powf(b));
        let (wa, wb) = ((2.0 * self.mu_a).powf(b), (2.0 * self.mu_b).powf(b));
        [
            [[2.0 * va, self.cov_y], [self.cov_y, 2.0 * vb]],
            [[wa, self.cov_w1], [self.cov_w1, wb]],
            [[2.0 * va - wa, self.cov_w2], [self.cov_w2, 2.0 * vb - wb]],
        ]
    }
}

/// Analytic covariances for the sets `A_a`, `A_b` of two points.
pub fn gaussian_cov_analytic(a: &SpacePoint, b: &SpacePoint, family: &SetFamily, beta: f64, budget: &Budget) -> Result<GaussianCov> {
    let cells = cell_measures(&[a.clone(), b.clone()], family, budget)?;
    GaussianCov::from_cells(&cells, beta)
}

fn cholesky2(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let l11 = m[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { m[1][0] / l11 } else { 0.0 };
    let l22 = (m[1][1] - l21 * l21).max(0.0).sqrt();
    [[l11, 0.0], [l21, l22]]
}

/// Independent Gaussian draws of `(W_1(A), W_1(B), W_2(A), W_2(B))`.
pub fn sample_decomposition(cov: &GaussianCov, n: usize, seed: u64) -> Vec<[f64; 4]> {
    let [_, w1, w2] = cov.matrices();
    let (l1, l2) = (cholesky2(&w1), cholesky2(&w2));
    sample_chunked(n, seed, |rng| {
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        [l1[0][0] * z[0], l1[1][0] * z[0] + l1[1][1] * z[1], l2[0][0] * z[2], l2[1][0] * z[2] + l2[1][1] * z[3]]
    })
}
