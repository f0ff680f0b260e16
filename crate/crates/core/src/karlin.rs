//! The Poissonised Karlin infinite urn scheme and its stable scaling limit.
//!
//! Urn `k` receives an independent Poisson process on the base space with
//! intensity `ρ p_k μ`, and `U_ρ(A) = Σ_k ε_k 1{N_k(A) odd}`. Only the joint
//! parities over the sets matter, so each urn draws its parity vector from the
//! exact cell-level law instead of simulating point locations.

use std::sync::Mutex;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mdk::CellMeasureTable;
use crate::parity::{c_beta, check_beta, mubeta_mass, mubeta_masses, FractionalParams, MassMode, ParityLaw, ParityVector};
use crate::quad::{self, NeumaierSum};
use crate::sampling::sample_chunked;

/// Tail mass of the truncated urns allowed by default.
pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

/// Above this per-urn occupation probability urns are visited one by one;
/// below it, geometric skipping with thinning is cheaper.
const DIRECT_VISIT: f64 = 0.25;

/// Distribution of the urn signs `ε_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum SignLaw {
    /// `ε = ±1`, for the Gaussian limit `α = 2`.
    Rademacher,
    /// Symmetrised Pareto with `P(|ε| > x) = C x^{-α}` for `x ≥ C^{1/α}`.
    Pareto { tail_constant: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KarlinConfig {
    pub beta: f64,
    pub alpha: f64,
    /// Frequency constant in `p_k = c_f k^{-1/β}`.
    pub c_f: f64,
    pub rho: f64,
    /// Largest admissible truncation level.
    pub k_max: u64,
    pub sign: SignLaw,
    /// Bound on the expected number of points in truncated urns.
    pub tail_tol: f64,
}

impl KarlinConfig {
    pub fn new(beta: f64, alpha: f64, rho: f64, sign: SignLaw) -> Result<Self> {
        let c = Self { beta, alpha, c_f: 1.0, rho, k_max: 1 << 50, sign, tail_tol: DEFAULT_TAIL_TOL };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return invalid(format!("α = {} must lie in (0, 2]", self.alpha));
        }
        if !(self.c_f > 0.0 && self.c_f.is_finite()) {
            return invalid("frequency constant must be positive");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return invalid(format!("intensity ρ = {} must be positive", self.rho));
        }
        if !(self.tail_tol > 0.0) {
            return invalid("tail tolerance must be positive");
        }
        match self.sign {
            SignLaw::Rademacher if self.alpha != 2.0 => invalid("Rademacher signs give a Gaussian limit and need α = 2"),
            SignLaw::Pareto { .. } if self.alpha >= 2.0 => invalid("Pareto signs need a tail index α < 2"),
            SignLaw::Pareto { tail_constant } if !(tail_constant > 0.0 && tail_constant.is_finite()) => {
                invalid("Pareto tail constant must be positive")
            }
            _ => Ok(()),
        }
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        Self { rho, ..*self }
    }

    /// `p_k = c_f k^{-1/β}`.
    pub fn frequency(&self, k: u64) -> f64 {
        self.c_f * (k as f64).powf(-1.0 / self.beta)
    }

    /// `ν(t) = #{k : p_k ≥ 1/t} = ⌊(c_f t)^β⌋`.
    pub fn nu(&self, t: f64) -> f64 {
        (self.c_f * t).powf(self.beta).floor()
    }

    /// The constant slowly varying factor `L = c_f^β`.
    pub fn slowly_varying(&self) -> f64 {
        self.c_f.powf(self.beta)
    }

    /// `σ_ε^α` from `1 - φ(θ) ~ σ_ε^α |θ|^α`.
    pub fn sigma_eps_alpha(&self) -> f64 {
        match self.sign {
            SignLaw::Rademacher => 0.5,
            SignLaw::Pareto { tail_constant } => tail_constant * sine_power_integral(self.alpha),
        }
    }

    fn draw_sign<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        match self.sign {
            SignLaw::Rademacher => s,
            SignLaw::Pareto { tail_constant } => {
                let law = Pareto::new(tail_constant.powf(1.0 / self.alpha), self.alpha).expect("validated Pareto parameters");
                s * law.sample(rng)
            }
        }
    }
}

/// `∫_0^∞ x^{-α} sin x dx` for `α ∈ (0, 2)`, cached per `α`.
pub fn sine_power_integral(alpha: f64) -> f64 {
    static CACHE: Mutex<Vec<(u64, f64)>> = Mutex::new(Vec::new());
    let key = alpha.to_bits();
    if let Some(&(_, v)) = CACHE.lock().expect("cache lock").iter().find(|(k, _)| *k == key) {
        return v;
    }
    let v = sine_power_integral_uncached(alpha);
    CACHE.lock().expect("cache lock").push((key, v));
    v
}

fn sine_power_integral_uncached(alpha: f64) -> f64 {
    use std::f64::consts::PI;
    // x = t^k with k = 1/(2-α) removes the x^{1-α} behaviour at zero.
    let k = 1.0 / (2.0 - alpha);
    let head = quad::adaptive(
        |t: f64| {
            if t <= 0.0 {
                return k;
            }
            let x = t.powf(k);
            k * t.powf(k - 1.0) * x.powf(-alpha) * x.sin()
        },
        0.0,
        PI.powf(1.0 / k),
        1e-15,
        1e-14,
    )
    .value;
    // Alternating tail over half-periods, accelerated by repeated averaging
    // of the partial sums.
    const TERMS: usize = 48;
    let mut partial = Vec::with_capacity(TERMS);
    let mut acc = NeumaierSum::default();
    for j in 1..=TERMS {
        let lo = j as f64 * PI;
        acc.add(quad::adaptive(|x: f64| x.powf(-alpha) * x.sin(), lo, lo + PI, 1e-16, 1e-14).value);
        partial.push(acc.value());
    }
    while partial.len() > 1 {
        partial = partial.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    }
    head + partial[0]
}

/// `b_ρ = ((β/c_β) ρ^β L)^{1/α} σ_ε`.
pub fn b_rho(config: &KarlinConfig) -> Result<f64> {
    config.validate()?;
    let c = config;
    let scale = c.beta / c_beta(c.beta) * c.rho.powf(c.beta) * c.slowly_varying();
    Ok(scale.powf(1.0 / c.alpha) * c.sigma_eps_alpha().powf(1.0 / c.alpha))
}

/// Smallest `K` with `Σ_{k>K} ρ p_k μ_∪ ≤ tol`, from the integral bound
/// `Σ_{k>K} k^{-s} ≤ K^{1-s}/(s-1)`.
pub fn required_k_max(config: &KarlinConfig, mu_union: f64) -> Result<u64> {
    config.validate()?;
    if mu_union <= 0.0 {
        return Ok(0);
    }
    let s = 1.0 / config.beta;
    let k = (config.rho * config.c_f * mu_union / (config.tail_tol * (s - 1.0))).powf(1.0 / (s - 1.0)).ceil();
    if !(k < config.k_max as f64) {
        let required = if k.is_finite() && k < u64::MAX as f64 { k as u64 } else { u64::MAX };
        return Err(Error::Truncation { required, cap: config.k_max });
    }
    Ok((k as u64).max(1))
}

/// One realization of the urn scheme over `d` sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnRealization {
    /// `U_ρ(A_j)`.
    pub u: Vec<f64>,
    /// `M_ρ^δ`, the number of urns with parity vector `δ`, indexed by bitmask.
    pub m_counts: Vec<u64>,
    /// Urns with a nonzero parity vector, as `(k, δ bitmask)`.
    pub odd_urns: Vec<(u64, u32)>,
    pub k_max: u64,
}

impl UrnRealization {
    /// Odd/even indicator of urn `k` for set `j`.
    pub fn is_odd(&self, k: u64, j: usize) -> bool {
        match self.odd_urns.binary_search_by_key(&k, |u| u.0) {
            Ok(i) => self.odd_urns[i].1 >> j & 1 == 1,
            Err(_) => false,
        }
    }

    /// Number of urns odd on set `j`.
    pub fn odd_count(&self, j: usize) -> u64 {
        self.m_counts.iter().enumerate().filter(|(delta, _)| delta >> j & 1 == 1).map(|(_, c)| c).sum()
    }
}

fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut c = 0.0;
    for (i, p) in probs.iter().enumerate() {
        c += p;
        if u < c {
            return i;
        }
    }
    // Rounding left a sliver of mass: take the last pattern with positive weight.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Simulates `U_ρ` on the sets of `cells`.
pub fn simulate_u<R: Rng + ?Sized>(config: &KarlinConfig, cells: &CellMeasureTable, rng: &mut R) -> Result<UrnRealization> {
    let k_max = required_k_max(config, cells.union())?;
    Ok(simulate_prepared(config, &ParityLaw::new(cells), cells.dim(), cells.union(), k_max, rng))
}

fn simulate_prepared<R: Rng + ?Sized>(
    config: &KarlinConfig,
    law: &ParityLaw,
    d: usize,
    mu_union: f64,
    k_max: u64,
    rng: &mut R,
) -> UrnRealization {
    let mut real = UrnRealization { u: vec![0.0; d], m_counts: vec![0; 1 << d], odd_urns: Vec::new(), k_max };
    let mut record = |k: u64, r: f64, p_nonempty: f64, rng: &mut R| {
        let delta = draw_index(&law.conditional_on_nonempty(r, p_nonempty), rng);
        if delta != 0 {
            let eps = config.draw_sign(rng);
            for (j, u) in real.u.iter_mut().enumerate() {
                if delta >> j & 1 == 1 {
                    *u += eps;
                }
            }
            real.m_counts[delta] += 1;
            real.odd_urns.push((k, delta as u32));
        }
    };
    let mut k: u64 = 1;
    while k <= k_max && mu_union > 0.0 {
        let r = config.rho * config.frequency(k);
        let p_bar = -(-r * mu_union).exp_m1();
        if p_bar >= DIRECT_VISIT {
            if rng.random::<f64>() < p_bar {
                record(k, r, p_bar, rng);
            }
            k += 1;
            continue;
        }
        if p_bar <= 0.0 {
            break;
        }
        // p_j ≤ p_k for j ≥ k, so p_bar dominates every later urn: skip a
        // geometric number of them and thin the candidate.
        let u: f64 = rng.random();
        let skip = ((1.0 - u).ln() / (-p_bar).ln_1p()).floor();
        if !(skip < (k_max - k) as f64 + 1.0) {
            break;
        }
        k += skip as u64;
        let r = config.rho * config.frequency(k);
        let p = -(-r * mu_union).exp_m1();
        if rng.random::<f64>() * p_bar < p {
            record(k, r, p, rng);
        }
        k += 1;
    }
    real
}

/// Independent realizations; realization block `i` uses stream `i` of `seed`.
pub fn simulate_many(config: &KarlinConfig, cells: &CellMeasureTable, n: usize, seed: u64) -> Result<Vec<UrnRealization>> {
    let k_max = required_k_max(config, cells.union())?;
    let law = ParityLaw::new(cells);
    let (d, mu) = (cells.dim(), cells.union());
    Ok(sample_chunked(n, seed, |rng| simulate_prepared(config, &law, d, mu, k_max, rng)))
}

/// Expected number of urns odd on a set of measure `mu` among the first
/// `k_max`: `Σ_{k ≤ K} (1 - e^{-2ρ p_k μ})/2`.
pub fn expected_odd_urns(config: &KarlinConfig, mu: f64, k_max: u64) -> f64 {
    let f = |k: f64| -0.5 * (-2.0 * config.rho * config.c_f * k.powf(-1.0 / config.beta) * mu).exp_m1();
    const DIRECT: u64 = 100_000;
    let mut acc = NeumaierSum::default();
    for k in 1..=k_max.min(DIRECT) {
        acc.add(f(k as f64));
    }
    if k_max > DIRECT {
        // Euler–Maclaurin on the smooth tail, integrated in log k.
        let (a, b) = (DIRECT as f64, k_max as f64);
        let integral = quad::adaptive(|t: f64| f(t.exp()) * t.exp(), a.ln(), b.ln(), 1e-14, 1e-13).value;
        let h = 1e-3;
        let df = |x: f64| (f(x * (1.0 + h)) - f(x * (1.0 - h))) / (2.0 * h * x);
        acc.add(integral + 0.5 * (f(b) - f(a)) + (df(b) - df(a)) / 12.0);
    }
    acc.value()
}

/// Limits of the `M` statistic for pattern `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLimit {
    /// `lim M_ρ^δ / b_ρ^α = 𝔪^δ / σ_ε^α`.
    pub limit: f64,
    /// `lim E M_ρ^δ / (ρ^β L) = (β/c_β) 𝔪^δ`.
    pub mean_rate: f64,
    pub mass: f64,
}

pub fn m_statistic_limit(cells: &CellMeasureTable, config: &KarlinConfig, delta: &ParityVector) -> Result<MLimit> {
    config.validate()?;
    let p = FractionalParams::new(config.alpha, config.beta)?;
    let mass = mubeta_mass(cells, &p, delta, MassMode::ClosedForm)?;
    Ok(MLimit { limit: mass / config.sigma_eps_alpha(), mean_rate: config.beta / p.c_beta() * mass, mass })
}

/// `exp(-Σ_δ |⟨θ, δ⟩|^α 𝔪^δ)`, the limit CF of `U_ρ / b_ρ`. It does not
/// depend on the sign law beyond `σ_ε`, which `b_ρ` already absorbs.
pub fn limit_cf(theta: &[f64], cells: &CellMeasureTable, config: &KarlinConfig) -> Result<Complex64> {
    config.validate()?;
    if theta.len() != cells.dim() {
        return invalid("θ must have one entry per set");
    }
    let masses = mubeta_masses(cells, config.beta)?;
    let s: f64 = ParityVector::all(cells.dim())
        .map(|delta| delta.dot(theta).abs().powf(config.alpha) * masses[delta.bits()])
        .sum();
    Ok(Complex64::new((-s).exp(), 0.0))
}

/// One row of a convergence sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub rho: f64,
    pub b_rho: f64,
    pub k_max: u64,
    pub limit: f64,
    /// Mean of `M_ρ^δ / b_ρ^α` over realizations.
    pub mean_ratio: f64,
    pub se_ratio: f64,
    /// Mean of `|M_ρ^δ / b_ρ^α - limit| / limit` over realizations.
    pub rel_error: f64,
    pub se_rel_error: f64,
}

/// `M_ρ^δ / b_ρ^α` diagnostics for each `ρ`, each with its own seed stream
/// block so that adding a `ρ` does not perturb the others.
pub fn convergence_sweep(
    base: &KarlinConfig,
    cells: &CellMeasureTable,
    delta: &ParityVector,
    rhos: &[f64],
    realizations: usize,
    seed: u64,
) -> Result<(Vec<ConvergenceRow>, Vec<Vec<UrnRealization>>)> {
    let lim = m_statistic_limit(cells, base, delta)?;
    let mut rows = Vec::with_capacity(rhos.len());
    let mut all = Vec::with_capacity(rhos.len());
    for (i, &rho) in rhos.iter().enumerate() {
        let config = base.with_rho(rho);
        let b = b_rho(&config)?;
        let reals = simulate_many(&config, cells, realizations, seed.wrapping_add((i as u64) << 32))?;
        let ratios: Vec<f64> = reals.iter().map(|r| r.m_counts[delta.bits()] as f64 / b.powf(config.alpha)).collect();
        let errs: Vec<f64> = ratios.iter().map(|x| (x - lim.limit).abs() / lim.limit).collect();
        let (mean_ratio, se_ratio) = mean_se(&ratios);
        let (rel_error, se_rel_error) = mean_se(&errs);
        rows.push(ConvergenceRow {
            rho,
            b_rho: b,
            k_max: reals.first().map_or(0, |r| r.k_max),
            limit: lim.limit,
            mean_ratio,
            se_ratio,
            rel_error,
            se_rel_error,
        });
        all.push(reals);
    }
    Ok((rows, all))
}

pub(crate) fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().copied().collect::<NeumaierSum>().value() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use std::f64::consts::PI;

    fn one_set(mu: f64) -> CellMeasureTable {
        CellMeasureTable::from_cells(1, &[(1, mu)]).unwrap()
    }

    #[test]
    fn b_rho_example() {
        let c = KarlinConfig::new(0.5, 2.0, 1e4, SignLaw::Rademacher).unwrap();
        assert!((c_beta(0.5) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let b = b_rho(&c).unwrap();
        assert!((b * b - 0.5 * (2.0 * PI).sqrt() * 100.0 * 0.5).abs() < 1e-10);
        assert!((b - 7.9162).abs() < 1e-4);
        assert!(b_rho(&c.with_rho(1e-24)).unwrap() < 1e-5);
        let mut last = 0.0;
        for rho in [1.0, 10.0, 100.0] {
            let b = b_rho(&c.with_rho(rho)).unwrap();
            assert!(b > last);
            last = b;
        }
        // α = 1: linear in ρ^β L
        let p = KarlinConfig::new(0.5, 1.0, 100.0, SignLaw::Pareto { tail_constant: 1.0 }).unwrap();
        let ratio = b_rho(&p.with_rho(400.0)).unwrap() / b_rho(&p).unwrap();
        assert!((ratio - 2.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(KarlinConfig::new(0.5, 1.5, 1.0, SignLaw::Rademacher).is_err());
        assert!(KarlinConfig::new(0.5, 2.0, 1.0, SignLaw::Pareto { tail_constant: 1.0 }).is_err());
        assert!(KarlinConfig::new(1.0, 2.0, 1.0, SignLaw::Rademacher).is_err());
        assert!(KarlinConfig::new(0.5, 2.0, 0.0, SignLaw::Rademacher).is_err());
        let c = KarlinConfig { c_f: 2.0, ..KarlinConfig::new(0.5, 2.0, 1.0, SignLaw::Rademacher).unwrap() };
        assert_eq!(c.nu(2.0), 2.0);
        assert!(c.frequency(1) > c.frequency(2));
        // ν(t) counts the k with p_k ≥ 1/t
        for t in [3.0, 17.5, 1000.0] {
            let count = (1..10_000u64).filter(|&k| c.frequency(k) >= 1.0 / t).count() as f64;
            assert_eq!(count, c.nu(t));
        }
    }

    #[test]
    fn sine_integral_matches_gamma_reflection() {
        for alpha in [0.2, 0.5, 0.8, 1.2, 1.5, 1.9] {
            let exact = statrs::function::gamma::gamma(1.0 - alpha) * (PI * alpha / 2.0).cos();
            let v = sine_power_integral(alpha);
            assert!((v - exact).abs() < 1e-9 * exact.abs().max(1.0), "α={alpha}: {v} vs {exact}");
        }
        assert!((sine_power_integral(1.0) - PI / 2.0).abs() < 1e-10);
        assert!((sine_power_integral(1.5) - (2.0 * PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn pareto_signs_have_the_stated_tail() {
        let c = KarlinConfig::new(0.5, 1.5, 1.0, SignLaw::Pareto { tail_constant: 2.0 }).unwrap();
        let mut r = rng::stream(51, 0);
        let n = 200_000;
        let x = 4.0;
        let hits = (0..n).filter(|_| c.draw_sign(&mut r).abs() > x).count() as f64 / n as f64;
        let exact = 2.0 * x.powf(-1.5);
        assert!((hits - exact).abs() < 4.0 * (exact * (1.0 - exact) / n as f64).sqrt());
    }

    #[test]
    fn truncation_bound() {
        let c = KarlinConfig::new(0.5, 2.0, 1e4, SignLaw::Rademacher).unwrap();
        let k = required_k_max(&c, 1.0).unwrap();
        // Σ_{k>K} ρ/k² ≤ ρ/K
        assert!(c.rho / k as f64 <= c.tail_tol * (1.0 + 1e-12));
        let tight = KarlinConfig { k_max: 1000, ..c };
        match required_k_max(&tight, 1.0) {
            Err(Error::Truncation { required, cap }) => {
                assert_eq!(cap, 1000);
                assert!(required > 1000);
            }
            other => panic!("{other:?}"),
        }
        assert!(simulate_u(&tight, &one_set(1.0), &mut rng::stream(1, 0)).is_err());
    }

    #[test]
    fn empty_sets_give_zero() {
        let c = KarlinConfig::new(0.5, 2.0, 1e3, SignLaw::Rademacher).unwrap();
        let t = CellMeasureTable::from_cells(2, &[]).unwrap();
        let r = simulate_u(&c, &t, &mut rng::stream(2, 0)).unwrap();
        assert_eq!(r.u, vec![0.0, 0.0]);
        assert!(r.m_counts.iter().all(|&m| m == 0));
    }

    #[test]
    fn odd_urn_count_matches_expectation() {
        let c = KarlinConfig::new(0.5, 2.0, 1e3, SignLaw::Rademacher).unwrap();
        let t = one_set(1.0);
        let reals = simulate_many(&c, &t, 1000, 3).unwrap();
        let counts: Vec<f64> = reals.iter().map(|r| r.odd_count(0) as f64).collect();
        let (mean, se) = mean_se(&counts);
        let expected = expected_odd_urns(&c, 1.0, reals[0].k_max);
        assert!((mean - expected).abs() < 4.0 * se, "{mean} ± {se} vs {expected}");
    }

    #[test]
    fn expected_odd_urns_tail_formula_agrees_with_direct_sum() {
        let c = KarlinConfig::new(0.5, 2.0, 50.0, SignLaw::Rademacher).unwrap();
        let k = 3_000_000;
        let direct: NeumaierSum =
            (1..=k).map(|k| -0.5 * (-2.0 * c.rho * (k as f64).powi(-2)).exp_m1()).collect();
        assert!((expected_odd_urns(&c, 1.0, k) - direct.value()).abs() < 1e-10);
    }

    #[test]
    fn joint_parities_match_the_exact_law() {
        // Sets with overlapping cells: per-urn parity frequencies summed over
        // urns must match Σ_k P_k(δ).
        let t = CellMeasureTable::from_cells(2, &[(0b01, 0.5), (0b10, 0.3), (0b11, 0.7)]).unwrap();
        let c = KarlinConfig::new(0.5, 2.0, 200.0, SignLaw::Rademacher).unwrap();
        let reals = simulate_many(&c, &t, 2000, 4).unwrap();
        let k_max = reals[0].k_max;
        for delta in 1..4usize {
            let counts: Vec<f64> = reals.iter().map(|r| r.m_counts[delta] as f64).collect();
            let (mean, se) = mean_se(&counts);
            let pv = ParityVector::new(2, delta).unwrap();
            let mut expected = NeumaierSum::default();
            for k in 1..=k_max.min(1_000_000) {
                expected.add(crate::parity::poisson_parity_prob(&t, c.rho * c.frequency(k), &pv).unwrap());
            }
            assert!((mean - expected.value()).abs() < 4.0 * se + 1e-3, "δ={delta}: {mean} ± {se} vs {}", expected.value());
        }
    }

    #[test]
    fn realizations_are_reproducible() {
        let c = KarlinConfig::new(0.5, 1.5, 1e3, SignLaw::Pareto { tail_constant: 1.0 }).unwrap();
        let t = CellMeasureTable::from_cells(2, &[(0b01, 0.5), (0b11, 0.7)]).unwrap();
        let a = simulate_u(&c, &t, &mut rng::stream(9, 1)).unwrap();
        let b = simulate_u(&c, &t, &mut rng::stream(9, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a.odd_urns.windows(2).all(|w| w[0].0 < w[1].0));
        for &(k, delta) in &a.odd_urns {
            assert_eq!(a.is_odd(k, 0), delta & 1 == 1);
        }
    }

    #[test]
    fn m_limit_examples() {
        let c = KarlinConfig::new(0.5, 2.0, 1.0, SignLaw::Rademacher).unwrap();
        let t = one_set(1.0);
        let l = m_statistic_limit(&t, &c, &ParityVector::new(1, 1).unwrap()).unwrap();
        assert!((l.limit - 2.0).abs() < 1e-14);
        assert!((l.mean_rate - 1.253_314_137_315_500_3).abs() < 1e-12);
        // independent oracle: ∫ (1 - e^{-2r})/2 · β r^{-β-1} dr
        let q = quad::power_weighted_half_line(|r| -0.5 * (-2.0 * r).exp_m1(), 0.5, 1e-13, 1e-12);
        assert!((0.5 * q.value - l.mean_rate).abs() < 1e-9);

        let same = CellMeasureTable::from_cells(2, &[(0b11, 1.0)]).unwrap();
        let l = m_statistic_limit(&same, &c, &ParityVector::new(2, 0b01).unwrap()).unwrap();
        assert_eq!(l.limit, 0.0);
    }

    #[test]
    fn limit_cf_examples() {
        let c = KarlinConfig::new(0.5, 2.0, 1.0, SignLaw::Rademacher).unwrap();
        let t = one_set(1.0);
        let v = limit_cf(&[1.0], &t, &c).unwrap();
        assert!((v.re - (-1f64).exp()).abs() < 1e-15 && v.im == 0.0);
        assert_eq!(limit_cf(&[0.0], &t, &c).unwrap().re, 1.0);
        // the sign law only enters through σ_ε
        let p = KarlinConfig::new(0.5, 1.5, 1.0, SignLaw::Pareto { tail_constant: 1.0 }).unwrap();
        let q = KarlinConfig { sign: SignLaw::Pareto { tail_constant: 3.0 }, ..p };
        assert_eq!(limit_cf(&[0.7], &t, &p).unwrap(), limit_cf(&[0.7], &t, &q).unwrap());
    }
}
