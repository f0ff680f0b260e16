//! Parity probabilities of a Poisson process over a cell partition, and the
//! μ_β masses they induce.
//!
//! For sets `A_1..A_d` and a Poisson process with intensity `r·μ`, the cell
//! counts are independent, so the parity vector `(N(A_j) mod 2)_j` has a law
//! that is an explicit exponential sum over sign patterns `S ⊆ {1..d}`:
//!
//! ```text
//! P(δ) = 2^{-d} Σ_S (-1)^{|S∧δ|} exp(-r a_S),   a_S = 2 Σ_{η : |S∧η| odd} μ(C_η)
//! ```
//!
//! Integrating against `c_β r^{-β-1} dr` gives the masses `𝔪^δ` in closed
//! form via `∫(1 - e^{-ar}) r^{-β-1} dr = a^β Γ(1-β)/β`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::SpacePoint;
use crate::mdk::{symmdiff_table, Budget, CellMeasureTable, SetFamily};
use crate::quad::{self, NeumaierSum};

/// A nonzero parity pattern `δ ∈ {0,1}^d`, stored as a bitmask with bit `j`
/// standing for set `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParityVector {
    d: usize,
    bits: usize,
}

impl ParityVector {
    pub fn new(d: usize, bits: usize) -> Result<Self> {
        if d == 0 || d > usize::BITS as usize - 1 {
            return invalid(format!("parity dimension {d} out of range"));
        }
        if bits == 0 {
            return invalid("the all-even pattern is not a parity vector");
        }
        if bits >> d != 0 {
            return invalid(format!("pattern {bits:#b} has bits beyond dimension {d}"));
        }
        Ok(Self { d, bits })
    }

    /// Builds from a 0/1 slice, leftmost entry = set 1.
    pub fn from_slice(delta: &[u8]) -> Result<Self> {
        let mut bits = 0;
        for (j, &b) in delta.iter().enumerate() {
            match b {
                0 => {}
                1 => bits |= 1 << j,
                _ => return invalid(format!("parity entries must be 0 or 1, got {b}")),
            }
        }
        Self::new(delta.len(), bits)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn get(&self, j: usize) -> bool {
        self.bits >> j & 1 == 1
    }

    /// `⟨θ, δ⟩`.
    pub fn dot(&self, theta: &[f64]) -> f64 {
        theta.iter().enumerate().filter(|(j, _)| self.get(*j)).map(|(_, t)| t).sum()
    }

    /// Every element of `Λ_d` in increasing bitmask order.
    pub fn all(d: usize) -> impl Iterator<Item = ParityVector> {
        (1..1usize << d).map(move |bits| ParityVector { d, bits })
    }
}

/// Parameters of the fractional (Karlin) fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalParams {
    pub alpha: f64,
    pub beta: f64,
}

impl FractionalParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return invalid(format!("α = {} must lie in (0, 2]", self.alpha));
        }
        check_beta(self.beta)
    }

    /// `c_β = β 2^{1-β} / Γ(1-β)`.
    pub fn c_beta(&self) -> f64 {
        c_beta(self.beta)
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return invalid(format!("β = {beta} must lie in (0, 1)"));
    }
    Ok(())
}

pub fn c_beta(beta: f64) -> f64 {
    beta * (1.0 - beta).exp2() / statrs::function::gamma::gamma(1.0 - beta)
}

/// How `mubeta_mass` evaluates the defining integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassMode {
    #[default]
    ClosedForm,
    Quadrature,
}

/// `a_S` for every sign pattern `S`, indexed by bitmask.
fn sign_rates(cells: &CellMeasureTable) -> Vec<f64> {
    let n = 1usize << cells.dim();
    let masses = cells.masses();
    (0..n)
        .map(|s| {
            let acc: NeumaierSum = (1..n)
                .filter(|eta| (s & eta).count_ones() % 2 == 1)
                .map(|eta| masses[eta])
                .collect();
            2.0 * acc.value()
        })
        .collect()
}

fn sign(s: usize, delta: usize) -> f64 {
    if (s & delta).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Whether `δ` lies in the GF(2) span of the cells with positive mass. If not,
/// no configuration of points realizes it and its probability is exactly 0.
fn feasible(cells: &CellMeasureTable, delta: usize) -> bool {
    let mut basis: Vec<usize> = Vec::new();
    for (eta, &m) in cells.masses().iter().enumerate().skip(1) {
        if m > 0.0 {
            let v = reduce(&basis, eta);
            if v != 0 {
                basis.push(v);
                basis.sort_unstable_by(|a, b| b.cmp(a));
            }
        }
    }
    reduce(&basis, delta) == 0
}

fn reduce(basis: &[usize], mut v: usize) -> usize {
    // basis is kept sorted by decreasing value, so leading bits are distinct
    for &b in basis {
        let lead = usize::BITS - 1 - b.leading_zeros();
        if v >> lead & 1 == 1 {
            v ^= b;
        }
    }
    v
}

fn check_delta(cells: &CellMeasureTable, delta: &ParityVector) -> Result<()> {
    if delta.dim() != cells.dim() {
        return Err(Error::InvalidArgument(format!(
            "parity vector has dimension {} but the table has {}",
            delta.dim(),
            cells.dim()
        )));
    }
    Ok(())
}

fn check_rate(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("intensity r = {r} must be positive and finite"));
    }
    Ok(())
}

fn parity_from_rates(rates: &[f64], r: f64, delta: usize) -> f64 {
    let n = rates.len();
    let acc: NeumaierSum = if delta == 0 {
        rates.iter().map(|a| (-r * a).exp()).collect()
    } else {
        // Σ_S sign = 0 for δ ≠ 0, so expm1 keeps small-r accuracy.
        rates.iter().enumerate().map(|(s, a)| sign(s, delta) * (-r * a).exp_m1()).collect()
    };
    (acc.value() / n as f64).clamp(0.0, 1.0)
}

/// `P(N(A_j) ≡ δ_j mod 2 for all j)` under intensity `r·μ`.
pub fn poisson_parity_prob(cells: &CellMeasureTable, r: f64, delta: &ParityVector) -> Result<f64> {
    check_rate(r)?;
    check_delta(cells, delta)?;
    if !feasible(cells, delta.bits()) {
        return Ok(0.0);
    }
    Ok(parity_from_rates(&sign_rates(cells), r, delta.bits()))
}

/// Full parity law indexed by bitmask, including the all-even pattern at 0.
pub fn parity_distribution(cells: &CellMeasureTable, r: f64) -> Result<Vec<f64>> {
    check_rate(r)?;
    Ok(ParityLaw::new(cells).probabilities(r))
}

/// Precomputed data for evaluating the parity law at many intensities.
#[derive(Debug, Clone)]
pub(crate) struct ParityLaw {
    rates: Vec<f64>,
    feasible: Vec<bool>,
}

impl ParityLaw {
    pub(crate) fn new(cells: &CellMeasureTable) -> Self {
        let n = 1usize << cells.dim();
        Self { rates: sign_rates(cells), feasible: (0..n).map(|delta| delta == 0 || feasible(cells, delta)).collect() }
    }

    fn probabilities(&self, r: f64) -> Vec<f64> {
        (0..self.rates.len())
            .map(|delta| if self.feasible[delta] { parity_from_rates(&self.rates, r, delta) } else { 0.0 })
            .collect()
    }

    /// Law of the parity vector at intensity `r`, conditioned on the union
    /// receiving at least one point. Entry 0 is obtained by complement so the
    /// small-`r` regime does not cancel.
    pub(crate) fn conditional_on_nonempty(&self, r: f64, p_nonempty: f64) -> Vec<f64> {
        let mut p = self.probabilities(r);
        let mut odd = 0.0;
        for v in p.iter_mut().skip(1) {
            *v = (*v / p_nonempty).min(1.0);
            odd += *v;
        }
        p[0] = (1.0 - odd).max(0.0);
        p
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub n: usize,
}

/// Independent oracle for [`poisson_parity_prob`]: draws Poisson cell counts
/// and forms parities directly.
pub fn poisson_parity_brute<R: Rng + ?Sized>(
    cells: &CellMeasureTable,
    r: f64,
    delta: &ParityVector,
    samples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    check_rate(r)?;
    check_delta(cells, delta)?;
    if samples < 10_000 {
        return invalid(format!("brute-force parity needs at least 10^4 samples, got {samples}"));
    }
    let cells_law: Vec<(usize, Poisson<f64>)> = cells
        .masses()
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &m)| m > 0.0)
        .map(|(eta, &m)| Poisson::new(r * m).map(|p| (eta, p)).map_err(|e| Error::InvalidArgument(e.to_string())))
        .collect::<Result<_>>()?;
    let mut hits = 0usize;
    for _ in 0..samples {
        let mut parity = 0usize;
        for (eta, law) in &cells_law {
            if (law.sample(rng) as u64) % 2 == 1 {
                parity ^= eta;
            }
        }
        if parity == delta.bits() {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    Ok(Estimate { value: p, se: (p * (1.0 - p) / samples as f64).sqrt(), n: samples })
}

/// `𝔪^δ = ∫_0^∞ P(N^r ≡ δ) c_β r^{-β-1} dr`.
pub fn mubeta_mass(cells: &CellMeasureTable, params: &FractionalParams, delta: &ParityVector, mode: MassMode) -> Result<f64> {
    check_beta(params.beta)?;
    check_delta(cells, delta)?;
    if !feasible(cells, delta.bits()) {
        return Ok(0.0);
    }
    let rates = sign_rates(cells);
    Ok(mass_from_rates(&rates, params.beta, delta.bits(), mode))
}

fn mass_from_rates(rates: &[f64], beta: f64, delta: usize, mode: MassMode) -> f64 {
    let n = rates.len() as f64;
    match mode {
        MassMode::ClosedForm => {
            let acc: NeumaierSum =
                rates.iter().enumerate().skip(1).map(|(s, a)| sign(s, delta) * a.powf(beta)).collect();
            (-(1.0 - beta).exp2() / n * acc.value()).max(0.0)
        }
        MassMode::Quadrature => {
            let c = c_beta(beta);
            let q = quad::power_weighted_half_line(|r| parity_from_rates(rates, r, delta), beta, 1e-13, 1e-12);
            (c * q.value).max(0.0)
        }
    }
}

/// All masses `𝔪^δ`, indexed by bitmask (entry 0 is unused and set to 0).
pub fn mubeta_masses(cells: &CellMeasureTable, beta: f64) -> Result<Vec<f64>> {
    check_beta(beta)?;
    let law = ParityLaw::new(cells);
    Ok((0..law.rates.len())
        .map(|delta| {
            if delta == 0 || !law.feasible[delta] {
                0.0
            } else {
                mass_from_rates(&law.rates, beta, delta, MassMode::ClosedForm)
            }
        })
        .collect())
}

/// `μ_β(A_x* Δ A_y*)`, the fractional kernel `𝖽(x, y)^β`.
pub fn fractional_distance(x: &SpacePoint, y: &SpacePoint, family: &SetFamily, beta: f64, budget: &Budget) -> Result<f64> {
    check_beta(beta)?;
    let table = symmdiff_table(x, y, family, budget)?;
    Ok(table.mass(1).max(0.0).powf(beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpaceKind;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    const ODD_AT_ONE: f64 = 0.432_332_358_381_693_6;

    fn table(d: usize, cells: &[(usize, f64)]) -> CellMeasureTable {
        CellMeasureTable::from_cells(d, cells).unwrap()
    }

    fn pv(d: usize, bits: usize) -> ParityVector {
        ParityVector::new(d, bits).unwrap()
    }

    #[test]
    fn parity_vector_rejects_zero_and_overflow() {
        assert!(ParityVector::new(2, 0).is_err());
        assert!(ParityVector::new(2, 4).is_err());
        assert_eq!(ParityVector::from_slice(&[1, 0, 1]).unwrap().bits(), 0b101);
        assert_eq!(ParityVector::all(3).count(), 7);
    }

    #[test]
    fn c_beta_at_one_half() {
        // β 2^{1-β}/Γ(1-β) at β = 1/2 is √2/(2√π)
        let c = FractionalParams::new(1.0, 0.5).unwrap().c_beta();
        assert!((c - 2f64.sqrt() / (2.0 * PI.sqrt())).abs() < 1e-15);
        assert!(FractionalParams::new(2.5, 0.5).is_err());
        assert!(FractionalParams::new(1.0, 1.0).is_err());
    }

    #[test]
    fn parity_examples() {
        let t = table(1, &[(1, 1.0)]);
        let p = poisson_parity_prob(&t, 1.0, &pv(1, 1)).unwrap();
        assert!((p - ODD_AT_ONE).abs() < 1e-15);

        let t = table(2, &[(0b01, 1.0), (0b10, 1.0)]);
        let p = poisson_parity_prob(&t, 1.0, &pv(2, 0b11)).unwrap();
        assert!((p - ODD_AT_ONE * ODD_AT_ONE).abs() < 1e-15);

        let t = table(2, &[(0b11, 1.0)]);
        assert_eq!(poisson_parity_prob(&t, 1.0, &pv(2, 0b01)).unwrap(), 0.0);
        assert!(poisson_parity_prob(&t, 0.0, &pv(2, 0b01)).is_err());
        assert!(poisson_parity_prob(&t, 1.0, &pv(1, 1)).is_err());
    }

    #[test]
    fn brute_force_agrees() {
        let t = table(1, &[(1, 1.0)]);
        let mut rng = rng::stream(11, 0);
        let e = poisson_parity_brute(&t, 1.0, &pv(1, 1), 100_000, &mut rng).unwrap();
        assert!((e.value - ODD_AT_ONE).abs() < 4.0 * e.se, "{e:?}");

        let t = table(2, &[(0b11, 1.0)]);
        let e = poisson_parity_brute(&t, 1.0, &pv(2, 0b01), 10_000, &mut rng).unwrap();
        assert_eq!(e.value, 0.0);

        let t = table(3, &[(0b001, 0.3), (0b011, 0.7), (0b110, 0.2), (0b111, 0.5)]);
        for delta in ParityVector::all(3) {
            let exact = poisson_parity_prob(&t, 1.7, &delta).unwrap();
            let e = poisson_parity_brute(&t, 1.7, &delta, 40_000, &mut rng).unwrap();
            assert!((e.value - exact).abs() < 4.5 * e.se.max(1e-4), "{delta:?}: {e:?} vs {exact}");
        }
        assert!(poisson_parity_brute(&t, 1.0, &pv(3, 1), 100, &mut rng).is_err());
    }

    #[test]
    fn brute_force_is_deterministic() {
        let t = table(2, &[(0b01, 0.4), (0b11, 0.9)]);
        let a = poisson_parity_brute(&t, 1.0, &pv(2, 0b10), 10_000, &mut rng::stream(5, 2)).unwrap();
        let b = poisson_parity_brute(&t, 1.0, &pv(2, 0b10), 10_000, &mut rng::stream(5, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mass_examples() {
        let half = FractionalParams::new(1.0, 0.5).unwrap();
        for mode in [MassMode::ClosedForm, MassMode::Quadrature] {
            let t = table(1, &[(1, 4.0)]);
            let m = mubeta_mass(&t, &half, &pv(1, 1), mode).unwrap();
            assert!((m - 2.0).abs() < 1e-9, "{mode:?}: {m}");

            let t = table(2, &[(0b01, 1.0), (0b10, 1.0)]);
            let m = mubeta_mass(&t, &half, &pv(2, 0b11), mode).unwrap();
            let expected = 0.5 * (2.0 - 2f64.sqrt());
            assert!((m - expected).abs() < 1e-9, "{mode:?}: {m}");
        }
    }

    #[test]
    fn pairwise_mass_matches_symmetric_difference_identity() {
        // 2𝔪^{(1,1)} = μ^β(A) + μ^β(B) - μ^β(AΔB)
        let t = table(2, &[(0b01, 0.7), (0b10, 1.9), (0b11, 0.4)]);
        let beta = 0.3;
        let p = FractionalParams::new(1.0, beta).unwrap();
        let m = mubeta_mass(&t, &p, &pv(2, 0b11), MassMode::ClosedForm).unwrap();
        let (a, b, ab) = (1.1f64, 2.3f64, 2.6f64);
        assert!((2.0 * m - (a.powf(beta) + b.powf(beta) - ab.powf(beta))).abs() < 1e-14);
    }

    #[test]
    fn distance_examples() {
        let b = Budget::default();
        let fam = SetFamily::separating(SpaceKind::Euclidean { dim: 1 });
        let e = |x: f64| SpacePoint::euclidean(&[x]).unwrap();
        let v = fractional_distance(&e(1.0), &e(3.0), &fam, 0.5, &b).unwrap();
        assert!((v - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(fractional_distance(&e(1.0), &e(1.0), &fam, 0.5, &b).unwrap(), 0.0);

        let fam = SetFamily::separating(SpaceKind::Sphere2);
        let v = fractional_distance(&SpacePoint::Sphere2([0.0, 0.0, 1.0]), &SpacePoint::Sphere2([0.0, 1.0, 0.0]), &fam, 0.5, &b)
            .unwrap();
        assert!((v - 1.253_314_1).abs() < 1e-3);
    }

    #[test]
    fn fractional_distance_is_conditionally_negative_definite() {
        let b = Budget::coarse();
        let mut r = rng::stream(12, 0);
        for kind in [SpaceKind::Euclidean { dim: 2 }, SpaceKind::Sphere2, SpaceKind::HyperbolicDisc] {
            let fam = SetFamily::separating(kind);
            let pts: Vec<_> = (0..6).map(|_| crate::geometry::random_point(kind, &mut r)).collect();
            let mut k = vec![vec![0.0; 6]; 6];
            for i in 0..6 {
                for j in 0..i {
                    let v = fractional_distance(&pts[i], &pts[j], &fam, 0.6, &b).unwrap();
                    k[i][j] = v;
                    k[j][i] = v;
                }
            }
            for _ in 0..200 {
                let mut c: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
                let mean = c.iter().sum::<f64>() / 6.0;
                c.iter_mut().for_each(|x| *x -= mean);
                let q: f64 = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| c[i] * c[j] * k[i][j]).sum();
                assert!(q <= 1e-9, "{kind}: {q}");
            }
        }
    }

    fn arb_table() -> impl Strategy<Value = CellMeasureTable> {
        (1usize..=4).prop_flat_map(|d| {
            proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..3.0], (1 << d) - 1).prop_map(move |v| {
                let mut m = vec![0.0];
                m.extend(v);
                CellMeasureTable::new(d, m, crate::mdk::Method::Exact, 0.0).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn law_sums_to_one(t in arb_table(), r in 1e-3f64..50.0) {
            let p = parity_distribution(&t, r).unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12, "{}", total);
            prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn small_intensity_is_nearly_even(t in arb_table()) {
            for delta in ParityVector::all(t.dim()) {
                prop_assert!(poisson_parity_prob(&t, 1e-8, &delta).unwrap() < 1e-6);
            }
        }

        #[test]
        fn closed_form_matches_quadrature(t in arb_table(), beta in 0.1f64..0.9) {
            let p = FractionalParams::new(1.0, beta).unwrap();
            for delta in ParityVector::all(t.dim()) {
                let c = mubeta_mass(&t, &p, &delta, MassMode::ClosedForm).unwrap();
                let q = mubeta_mass(&t, &p, &delta, MassMode::Quadrature).unwrap();
                prop_assert!((c - q).abs() <= 1e-8 * c.max(1e-6), "{:?}: {} vs {}", delta, c, q);
            }
        }

        #[test]
        fn masses_add_up_to_the_odd_union(t in arb_table(), beta in 0.05f64..0.95) {
            // Σ_δ 𝔪^δ = μ_β(∪A_j*) = c_β ∫ (1 - P(all even)) r^{-β-1} dr
            let total: f64 = mubeta_masses(&t, beta).unwrap().iter().sum();
            // 1 - P(all even) = -2^{-d} Σ_S expm1(-r a_S), free of cancellation
            let rates = sign_rates(&t);
            let q = quad::power_weighted_half_line(
                |r| -rates.iter().map(|a| (-r * a).exp_m1()).sum::<f64>() / rates.len() as f64,
                beta, 1e-13, 1e-12,
            );
            let oracle = c_beta(beta) * q.value;
            prop_assert!((total - oracle).abs() <= 1e-8 * oracle.max(1e-6), "{} vs {}", total, oracle);
            // union bound and monotonicity of μ_β
            let marg: Vec<f64> = (0..t.dim()).map(|j| t.marginal(j).powf(beta)).collect();
            let max = marg.iter().cloned().fold(0.0, f64::max);
            prop_assert!(total >= max * (1.0 - 1e-12) && total <= marg.iter().sum::<f64>() * (1.0 + 1e-12) + 1e-300);
            if t.dim() == 1 {
                prop_assert!((total - t.mass(1).powf(beta)).abs() <= 1e-14 * total.max(1.0));
            }
        }
    }
}
