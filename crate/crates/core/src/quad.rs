//! One-dimensional quadrature: fixed Gauss–Legendre panels for piecewise
//! smooth integrands with known breakpoints, and adaptive Gauss–Kronrod for
//! everything else.

use std::sync::OnceLock;

/// Order of the fixed Gauss–Legendre rule used on every panel.
pub const GL_ORDER: usize = 20;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(GL_ORDER))
}

fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Visits the Gauss–Legendre nodes of `[a, b]` split into `panels` equal
/// panels, passing `(x, weight)`.
pub fn for_each_node(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64, f64)) {
    if b <= a {
        return;
    }
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let half = 0.5 * h;
        let mid = lo + half;
        for &(x, w) in gauss_legendre() {
            f(mid + half * x, half * w);
        }
    }
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]`.
pub fn gl_integrate(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut acc = NeumaierSum::default();
    for_each_node(a, b, panels, |x, w| acc.add(w * f(x)));
    acc.value()
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = NeumaierSum::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

// Gauss–Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn qk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Globally adaptive Gauss–Kronrod integration of `f` over a finite `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the total
/// estimate falls below `max(abs_tol, rel_tol * |value|)`.
pub fn adaptive(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    const MAX_INTERVALS: usize = 4000;
    let (v, e) = qk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let value: NeumaierSum = intervals.iter().map(|iv| iv.2).collect();
        let value = value.value();
        let error: f64 = intervals.iter().map(|iv| iv.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return QuadResult { value, error, converged: true };
        }
        if intervals.len() >= MAX_INTERVALS {
            return QuadResult { value, error, converged: false };
        }
        let (worst, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty interval list");
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval cannot be split further in binary64.
            let value: NeumaierSum = intervals.iter().map(|iv| iv.2).collect();
            return QuadResult { value: value.value(), error, converged: false };
        }
        let (v1, e1) = qk15(&mut f, lo, mid);
        let (v2, e2) = qk15(&mut f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// `∫_0^∞ f(r) r^{-β-1} dr` for `f` with `f(r) = O(r)` at zero and bounded at
/// infinity, split at `r = 1` with power substitutions that make both halves
/// regular: `r = u^{1/(1-β)}` below one and `r = u^{-1/β}` above.
pub fn power_weighted_half_line(
    f: impl Fn(f64) -> f64,
    beta: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> QuadResult {
    let gamma = 1.0 / (1.0 - beta);
    let lower = adaptive(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let r = u.powf(gamma);
            // dr r^{-β-1} = γ u^{γ-1} u^{-γ(β+1)} du = γ u^{-γβ-1} du
            gamma * f(r) * u.powf(-gamma * beta - 1.0)
        },
        0.0,
        1.0,
        0.5 * abs_tol,
        rel_tol,
    );
    let upper = adaptive(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            f(u.powf(-1.0 / beta)) / beta
        },
        0.0,
        1.0,
        0.5 * abs_tol,
        rel_tol,
    );
    QuadResult {
        value: lower.value + upper.value,
        error: lower.error + upper.error,
        converged: lower.converged && upper.converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let w: f64 = gauss_legendre().iter().map(|n| n.1).sum();
        assert!((w - 2.0).abs() < 1e-14);
        // degree 39 is the exactness limit for 20 nodes
        let v = gl_integrate(0.0, 1.0, 1, |x| x.powi(39));
        assert!((v - 1.0 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = adaptive(|x| 1.0 / x.sqrt(), 0.0, 1.0, 1e-10, 1e-12);
        assert!((r.value - 2.0).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn gamma_identity_by_power_weighted_quadrature() {
        for &a in &[0.5, 1.0, 4.0] {
            for &beta in &[0.25, 0.5, 0.75] {
                let r = power_weighted_half_line(|r| -(-a * r).exp_m1(), beta, 1e-13, 1e-12);
                let exact =
                    a.powf(beta) * statrs::function::gamma::gamma(1.0 - beta) / beta;
                assert!(((r.value - exact) / exact).abs() < 1e-8, "a={a} β={beta}: {r:?} vs {exact}");
            }
        }
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let s: NeumaierSum = [1e16, 1.0, -1e16].into_iter().collect();
        assert_eq!(s.value(), 1.0);
    }
}
