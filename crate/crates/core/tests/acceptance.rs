//! Acceptance gate: runs every criterion at its stated tolerance and runtime
//! budget and prints one PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use stablefield::geometry::{distance, random_group_element, random_point};
use stablefield::karlin::{b_rho, convergence_sweep, limit_cf, simulate_many};
use stablefield::mdk::{cell_measures, symmdiff_measure, symmdiff_table};
use stablefield::parity::{
    fractional_distance, mubeta_mass, mubeta_masses, poisson_parity_brute, poisson_parity_prob,
};
use stablefield::rng;
use stablefield::sampling::{sample_fdd, sample_substable, substable_cf};
use stablefield::verify::{empirical_cf, empirical_covariance, invariance_report, GaussianCov};
use stablefield::{
    Budget, CellMeasureTable, FieldKind, FractionalParams, KarlinConfig, MassMode, Method, ParityVector, SetFamily,
    SignLaw, SpaceKind, SpacePoint,
};

const R1: SpaceKind = SpaceKind::Euclidean { dim: 1 };
const R2: SpaceKind = SpaceKind::Euclidean { dim: 2 };
const R3: SpaceKind = SpaceKind::Euclidean { dim: 3 };
const CURVED: [SpaceKind; 3] = [R2, SpaceKind::Sphere2, SpaceKind::HyperbolicDisc];

/// Outcome of one criterion: failures collected as messages.
#[derive(Default)]
struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }
}

fn random_box_point<R: Rng>(dim: usize, rng: &mut R) -> SpacePoint {
    let c: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..2.0)).collect();
    SpacePoint::euclidean(&c).unwrap()
}

fn c1_mdk_identity(out: &mut Outcome) {
    let mut r = rng::stream(1001, 0);
    let budget = Budget::default();
    for _ in 0..50 {
        let (x, y) = (random_point(R1, &mut r), random_point(R1, &mut r));
        let v = symmdiff_measure(&x, &y, &SetFamily::separating(R1), &budget).unwrap();
        let d = distance(&x, &y).unwrap();
        out.check((v - d).abs() <= 1e-12 * d.max(1.0), || format!("R1: {v} vs {d}"));
    }
    for dim in [1, 2, 3] {
        let fam = SetFamily::Box { dim };
        for _ in 0..50 {
            let (x, y) = (random_box_point(dim, &mut r), random_box_point(dim, &mut r));
            let v = symmdiff_measure(&x, &y, &fam, &budget).unwrap();
            // |A_x| + |A_y| - 2|A_x ∩ A_y| for boxes anchored at the origin
            let (cx, cy) = (x.coords(), y.coords());
            let vol = |c: &[f64]| c.iter().product::<f64>();
            let meet: Vec<f64> = cx.iter().zip(&cy).map(|(a, b)| a.min(*b)).collect();
            let d = vol(&cx) + vol(&cy) - 2.0 * vol(&meet);
            out.check((v - d).abs() <= 1e-12 * d.max(1.0), || format!("Box{dim}: {v} vs {d}"));
        }
    }
    let mut worst = 0.0f64;
    for kind in CURVED {
        let fam = SetFamily::separating(kind);
        for _ in 0..50 {
            let (x, y) = (random_point(kind, &mut r), random_point(kind, &mut r));
            let v = symmdiff_measure(&x, &y, &fam, &budget).unwrap();
            let d = distance(&x, &y).unwrap();
            let rel = (v - d).abs() / d;
            worst = worst.max(rel);
            out.check(rel < 1e-3, || format!("{kind}: {v} vs {d}"));
        }
    }
    out.note(format!("worst curved relative error {worst:.2e}"));
}

fn c2_fractional_distance(out: &mut Outcome) {
    let mut r = rng::stream(1002, 0);
    let budget = Budget::default();
    let mut worst = 0.0f64;
    for kind in [R1, R2, SpaceKind::Sphere2, SpaceKind::HyperbolicDisc] {
        let fam = SetFamily::separating(kind);
        let tol = if kind == R1 { 1e-8 } else { 2e-3 };
        for _ in 0..20 {
            let (x, y) = (random_point(kind, &mut r), random_point(kind, &mut r));
            let d = distance(&x, &y).unwrap();
            for beta in [0.25, 0.5, 0.75] {
                let v = fractional_distance(&x, &y, &fam, beta, &budget).unwrap();
                let rel = (v - d.powf(beta)).abs() / d.powf(beta);
                if kind != R1 {
                    worst = worst.max(rel);
                }
                out.check(rel < tol, || format!("{kind} β={beta}: {v} vs {}", d.powf(beta)));
            }
        }
    }
    out.note(format!("worst curved relative error {worst:.2e}"));
}

fn random_cells<R: Rng>(d: usize, lo: f64, r: &mut R) -> CellMeasureTable {
    let mut m = vec![0.0];
    for _ in 1..1 << d {
        // a quarter of the cells empty so that infeasible patterns occur
        m.push(if lo == 0.0 && r.random::<f64>() < 0.25 { 0.0 } else { r.random_range(lo.max(1e-3)..2.0) });
    }
    CellMeasureTable::new(d, m, Method::Exact, 0.0).unwrap()
}

fn c3_parity_oracle(out: &mut Outcome) {
    let mut r = rng::stream(1003, 0);
    for i in 0..20 {
        let d = 1 + i % 3;
        let cells = random_cells(d, 0.0, &mut r);
        let rate = r.random_range(0.1..5.0);
        let delta = ParityVector::new(d, r.random_range(1..1usize << d)).unwrap();
        let exact = poisson_parity_prob(&cells, rate, &delta).unwrap();
        let est = poisson_parity_brute(&cells, rate, &delta, 100_000, &mut rng::stream(1003, 1 + i as u64)).unwrap();
        out.check((est.value - exact).abs() <= 4.0 * est.se, || {
            format!("instance {i}: {} ± {} vs {exact}", est.value, est.se)
        });
    }
}

fn c4_dual_mode(out: &mut Outcome) {
    let mut r = rng::stream(1004, 0);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let d = 1 + i % 4;
        let cells = random_cells(d, 0.05, &mut r);
        let p = FractionalParams::new(1.0, r.random_range(0.05..0.95)).unwrap();
        let delta = ParityVector::new(d, r.random_range(1..1usize << d)).unwrap();
        let c = mubeta_mass(&cells, &p, &delta, MassMode::ClosedForm).unwrap();
        let q = mubeta_mass(&cells, &p, &delta, MassMode::Quadrature).unwrap();
        let rel = (c - q).abs() / c;
        worst = worst.max(rel);
        out.check(rel < 1e-8, || format!("instance {i} β={}: {c} vs {q}", p.beta));
    }
    out.note(format!("worst relative gap {worst:.2e}"));
}

fn c5_increment_law(out: &mut Outcome) {
    let mut r = rng::stream(1005, 0);
    let beta = 0.5;
    for (s, kind) in [R1, R2, SpaceKind::Sphere2, SpaceKind::HyperbolicDisc].into_iter().enumerate() {
        let fam = SetFamily::separating(kind);
        let pts = [random_point(kind, &mut r), random_point(kind, &mut r)];
        let d = distance(&pts[0], &pts[1]).unwrap();
        for (a, alpha) in [0.8, 1.0, 1.5, 2.0].into_iter().enumerate() {
            let seed = 5000 + 10 * s as u64 + a as u64;
            let batch =
                sample_fdd(&pts, &fam, alpha, FieldKind::Fractional { beta }, 100_000, seed, &Budget::default()).unwrap();
            let norm = d.powf(beta / alpha);
            let inc: Vec<[f64; 1]> = batch.samples.iter().map(|x| [(x.values[0] - x.values[1]) / norm]).collect();
            for theta in [0.5, 1.0, 2.0] {
                let e = empirical_cf(&inc, &[theta]).unwrap();
                let target = (-f64::powf(theta, alpha)).exp();
                out.check((e.estimate.re - target).abs() <= 4.0 * e.se, || {
                    format!("{kind} α={alpha} θ={theta}: {} ± {} vs {target}", e.estimate.re, e.se)
                });
            }
        }
    }
}

fn c6_stationary_increments(out: &mut Outcome) {
    let mut r = rng::stream(1006, 0);
    let budget = Budget::default();
    for kind in [R1, R2, R3, SpaceKind::Sphere2, SpaceKind::HyperbolicDisc] {
        let fam = SetFamily::separating(kind);
        let tol = if kind == R1 { 1e-10 } else { 2e-3 };
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let pts: Vec<_> = (0..3).map(|_| random_point(kind, &mut r)).collect();
            let g = random_group_element(kind, &mut r);
            let rep = invariance_report(&pts, &g, &fam, 0.5, &budget).unwrap();
            let dev = rep.checks.last().unwrap().estimate;
            worst = worst.max(dev);
            out.check(dev < tol && rep.passed(), || format!("{kind}: deviation {dev:.3e}"));
        }
        out.note(format!("{kind} {worst:.1e}"));
    }
}

fn c7_gaussian_structure(out: &mut Outcome) {
    let mut r = rng::stream(1007, 0);
    let beta = 0.6;
    let cases: Vec<(SetFamily, [SpacePoint; 2])> = vec![
        (SetFamily::separating(R2), [random_point(R2, &mut r), random_point(R2, &mut r)]),
        (SetFamily::separating(SpaceKind::Sphere2), [random_point(SpaceKind::Sphere2, &mut r), random_point(SpaceKind::Sphere2, &mut r)]),
        (SetFamily::Box { dim: 2 }, [random_box_point(2, &mut r), random_box_point(2, &mut r)]),
    ];
    for (i, (fam, pts)) in cases.iter().enumerate() {
        let cells = cell_measures(pts, fam, &Budget::default()).unwrap();
        let cov = GaussianCov::from_cells(&cells, beta).unwrap();
        let scale = cov.cov_y.abs().max(1.0);
        out.check(cov.sum_deviation <= 1e-14 * scale, || format!("case {i}: W1+W2 deviation {:.3e}", cov.sum_deviation));
        let m = mubeta_masses(&cells, beta).unwrap();
        out.check((2.0 * m[0b11] - cov.cov_y).abs() <= 1e-8, || format!("case {i}: 2m = {} vs Cov Y {}", 2.0 * m[0b11], cov.cov_y));
        let batch = sample_fdd(pts, fam, 2.0, FieldKind::Fractional { beta }, 100_000, 7000 + i as u64, &Budget::default()).unwrap();
        let (c, se) = empirical_covariance(&batch.column(0), &batch.column(1)).unwrap();
        out.check((c - cov.cov_y).abs() <= 4.0 * se, || format!("case {i}: empirical {c} ± {se} vs {}", cov.cov_y));
    }
}

fn c8_substable(out: &mut Outcome) {
    let pts = [SpacePoint::euclidean(&[1.0, 0.5]).unwrap(), SpacePoint::euclidean(&[-0.3, 1.2]).unwrap()];
    let fam = SetFamily::separating(R2);
    let cells = cell_measures(&pts, &fam, &Budget::default()).unwrap();
    let batch = sample_substable(&pts, &fam, 1.0, 2.0, 100_000, 8000, &Budget::default()).unwrap();
    for theta in [[1.0, 0.0], [0.5, -0.5], [0.3, 0.9], [-1.2, 0.4]] {
        let e = empirical_cf(&batch.samples, &theta).unwrap();
        let target = substable_cf(&cells, &theta, 1.0, 2.0).unwrap();
        out.check((e.estimate.re - target).abs() <= 4.0 * e.se, || {
            format!("θ={theta:?}: {} ± {} vs {target}", e.estimate.re, e.se)
        });
    }
}

fn c9_karlin(out: &mut Outcome) {
    let cells = CellMeasureTable::from_cells(1, &[(1, 1.0)]).unwrap();
    let delta = ParityVector::new(1, 1).unwrap();
    let laws = [(2.0, SignLaw::Rademacher), (1.5, SignLaw::Pareto { tail_constant: 1.0 })];
    for (i, (alpha, sign)) in laws.into_iter().enumerate() {
        let base = KarlinConfig::new(0.5, alpha, 1.0, sign).unwrap();
        let (rows, _) = convergence_sweep(&base, &cells, &delta, &[1e2, 1e3, 1e4], 200, 9000 + i as u64).unwrap();
        let errs: Vec<f64> = rows.iter().map(|r| r.rel_error).collect();
        out.check(errs.windows(2).all(|w| w[1] < w[0]), || format!("α={alpha}: errors not decreasing {errs:?}"));
        out.check(errs[2] < 0.1, || format!("α={alpha}: error at ρ=1e4 is {}", errs[2]));
        out.note(format!("α={alpha} errors {:.3}/{:.3}/{:.3}", errs[0], errs[1], errs[2]));

        let config = base.with_rho(1e4);
        let b = b_rho(&config).unwrap();
        let reals = simulate_many(&config, &cells, 10_000, 9100 + i as u64).unwrap();
        let scaled: Vec<[f64; 1]> = reals.iter().map(|r| [r.u[0] / b]).collect();
        for theta in [0.5, 1.0, 2.0] {
            let e = empirical_cf(&scaled, &[theta]).unwrap();
            let target = limit_cf(&[theta], &cells, &config).unwrap();
            out.check((e.estimate - target).norm() <= 4.0 * e.se + 0.02, || {
                format!("α={alpha} θ={theta}: {} ± {} vs {}", e.estimate, e.se, target.re)
            });
        }
    }
}

fn c10_negative_type(out: &mut Outcome) {
    let mut r = rng::stream(1010, 0);
    let budget = Budget::default();
    let mut worst = f64::NEG_INFINITY;
    for kind in [R1, R2, R3, SpaceKind::Sphere2, SpaceKind::HyperbolicDisc] {
        let fam = SetFamily::separating(kind);
        for _ in 0..100 {
            let n = r.random_range(3..=5);
            let beta = r.random_range(0.1..0.9);
            let pts: Vec<_> = (0..n).map(|_| random_point(kind, &mut r)).collect();
            let mut lambda: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
            let mean = lambda.iter().sum::<f64>() / n as f64;
            lambda.iter_mut().for_each(|l| *l -= mean);
            let (mut q, mut allowance) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..i {
                    let t = symmdiff_table(&pts[i], &pts[j], &fam, &budget).unwrap();
                    let m = t.mass(1);
                    let v = m.powf(beta);
                    // propagate the cell error estimate through m ↦ m^β
                    let dv = (m + t.err).powf(beta) - (m - t.err).max(0.0).powf(beta);
                    q += 2.0 * lambda[i] * lambda[j] * v;
                    allowance += 2.0 * (lambda[i] * lambda[j]).abs() * dv;
                }
            }
            worst = worst.max(q);
            out.check(q <= allowance, || format!("{kind}: form {q:.3e} > allowance {allowance:.3e}"));
        }
    }
    out.note(format!("largest quadratic form {worst:.3e}"));
}

type Criterion = (u32, &'static str, Duration, fn(&mut Outcome));

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "MDK identity", Duration::from_secs(60), c1_mdk_identity),
        (2, "fractional distance", Duration::from_secs(60), c2_fractional_distance),
        (3, "parity vs Poisson oracle", Duration::from_secs(30), c3_parity_oracle),
        (4, "dual-mode masses", Duration::from_secs(10), c4_dual_mode),
        (5, "increment law", Duration::from_secs(60), c5_increment_law),
        (6, "stationary increments", Duration::from_secs(180), c6_stationary_increments),
        (7, "Gaussian structure", Duration::from_secs(60), c7_gaussian_structure),
        (8, "sub-stable CF", Duration::from_secs(30), c8_substable),
        (9, "Karlin limit", Duration::from_secs(300), c9_karlin),
        (10, "conditionally negative type", Duration::from_secs(60), c10_negative_type),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (id, name, limit, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let mut out = Outcome::default();
        if let Err(e) = catch_unwind(AssertUnwindSafe(|| run(&mut out))) {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            out.failures.push(format!("panicked: {}", msg.unwrap_or_default()));
        }
        let elapsed = start.elapsed();
        if elapsed > limit {
            out.failures.push(format!("runtime {:.1}s exceeds {}s", elapsed.as_secs_f64(), limit.as_secs()));
        }
        let ok = out.failures.is_empty();
        failed += usize::from(!ok);
        let notes = if out.notes.is_empty() { String::new() } else { format!(" [{}]", out.notes.join("; ")) };
        println!(
            "[{}] criterion {id}: {name} ({:.1}s){notes}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        for f in out.failures.iter().take(10) {
            println!("       {f}");
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
