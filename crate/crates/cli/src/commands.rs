use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use stablefield::geometry::{distance, random_group_element, random_point};
use stablefield::karlin::{convergence_sweep, ConvergenceRow};
use stablefield::mdk::{cell_measures, symmdiff_measure};
use stablefield::parity::{
    fractional_distance, mubeta_mass, mubeta_masses, parity_distribution, poisson_parity_brute, poisson_parity_prob,
};
use stablefield::rng;
use stablefield::sampling::{field_scales, sample_scales, sample_substable, substable_cf, FddBatch, SampleMeta};
use stablefield::verify::{
    empirical_cf, empirical_covariance, invariance_report, sample_decomposition, Check, GaussianCov, Provenance,
};
use stablefield::{
    CellMeasureTable, ExperimentReport, FieldKind, FractionalParams, KarlinConfig, MassMode, ParityVector, SetFamily,
    SignLaw, SpacePoint,
};

use crate::config::{config_err, CliError, CliResult, Settings};

/// Stream ids below this are reserved for sample batches.
const AUX_STREAM: u64 = 1 << 40;

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn random_points(family: &SetFamily, n: usize, seed: u64) -> Vec<SpacePoint> {
    use rand::Rng;
    let mut r = rng::stream(seed, AUX_STREAM);
    (0..n)
        .map(|_| match family {
            SetFamily::Box { dim } => {
                let c: Vec<f64> = (0..*dim).map(|_| r.random_range(0.0..2.0)).collect();
                SpacePoint::euclidean(&c).expect("finite coordinates")
            }
            SetFamily::Separating { space } => random_point(*space, &mut r),
        })
        .collect()
}

fn points_or_random(s: &Settings, default_n: usize) -> CliResult<Vec<SpacePoint>> {
    Ok(match s.load_points()? {
        Some(p) => p,
        None => random_points(&s.family(), s.npoints.unwrap_or(default_n), s.seed),
    })
}

/// Pairs to compare: all pairs of a points file, or consecutive random pairs.
fn pairs(s: &Settings) -> CliResult<Vec<(SpacePoint, SpacePoint)>> {
    Ok(match s.load_points()? {
        Some(p) => {
            let mut out = Vec::new();
            for i in 0..p.len() {
                for j in i + 1..p.len() {
                    out.push((p[i].clone(), p[j].clone()));
                }
            }
            out
        }
        None => {
            let p = random_points(&s.family(), 2 * s.npoints.unwrap_or(50), s.seed);
            p.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect()
        }
    })
}

/// Reference value of `μ(A_x Δ A_y)` for a family.
fn reference_distance(family: &SetFamily, x: &SpacePoint, y: &SpacePoint) -> CliResult<f64> {
    Ok(match family {
        SetFamily::Box { .. } => {
            let (cx, cy) = (x.coords(), y.coords());
            let vol = |c: &[f64]| c.iter().product::<f64>();
            let meet: Vec<f64> = cx.iter().zip(&cy).map(|(a, b)| a.min(*b)).collect();
            vol(&cx) + vol(&cy) - 2.0 * vol(&meet)
        }
        SetFamily::Separating { .. } => distance(x, y)?,
    })
}

fn new_report(id: &str, s: &Settings) -> ExperimentReport {
    let inputs = serde_json::json!({ "command": id, "settings": s });
    ExperimentReport::new(id, inputs, Some(s.seed))
}

fn require(v: Option<f64>, flag: &str) -> CliResult<f64> {
    match v {
        Some(v) => Ok(v),
        None => config_err(format!("--{flag} is required for this command")),
    }
}

pub fn verify_mdk(s: &Settings) -> CliResult<ExperimentReport> {
    let family = s.family();
    let mut rep = new_report("verify-mdk", s);
    for (i, (x, y)) in pairs(s)?.iter().enumerate() {
        let v = symmdiff_measure(x, y, &family, &s.budget)?;
        let d = reference_distance(&family, x, y)?;
        let (tol, prov) =
            if family.is_exact() { (1e-12 * d.max(1.0), Provenance::Analytic) } else { (1e-3 * d, Provenance::DerivedOracle) };
        rep.push(Check::within(format!("pair {i}"), d, v, tol, prov));
    }
    Ok(rep.finish())
}

pub fn frac_distance(s: &Settings) -> CliResult<ExperimentReport> {
    let family = s.family();
    if let SetFamily::Box { .. } = family {
        return config_err("frac-distance needs a metric space, not the box family");
    }
    let beta = s.beta.unwrap_or(0.5);
    let mut rep = new_report("frac-distance", s);
    for (i, (x, y)) in pairs(s)?.iter().enumerate() {
        let v = fractional_distance(x, y, &family, beta, &s.budget)?;
        let d = distance(x, y)?.powf(beta);
        let (tol, prov) = if family.is_exact() { (1e-8 * d, Provenance::Analytic) } else { (2e-3 * d, Provenance::DerivedOracle) };
        rep.push(Check::within(format!("pair {i}"), d, v, tol.max(1e-300), prov));
    }
    Ok(rep.finish())
}

pub fn parity_check(s: &Settings) -> CliResult<ExperimentReport> {
    let pts = points_or_random(s, 3)?;
    let cells = cell_measures(&pts, &s.family(), &s.budget)?;
    let rate = s.rate.unwrap_or(1.0);
    let n = s.samples.unwrap_or(100_000);
    let mut rep = new_report("parity-check", s);
    rep.partial = cells.degraded;
    let total: f64 = parity_distribution(&cells, rate)?.iter().sum();
    rep.push(Check::within("law sums to one", 1.0, total, 1e-12, Provenance::Analytic));
    for delta in ParityVector::all(cells.dim()) {
        let exact = poisson_parity_prob(&cells, rate, &delta)?;
        let est = poisson_parity_brute(&cells, rate, &delta, n, &mut rng::stream(s.seed, delta.bits() as u64))?;
        rep.push(Check::monte_carlo(format!("P[{}]", cells.key(delta.bits())), exact, est.value, est.se, 0.0));
        if let Some(beta) = s.beta {
            let p = FractionalParams::new(1.0, beta)?;
            let c = mubeta_mass(&cells, &p, &delta, MassMode::ClosedForm)?;
            let q = mubeta_mass(&cells, &p, &delta, MassMode::Quadrature)?;
            rep.push(Check::within(format!("m[{}] dual mode", cells.key(delta.bits())), c, q, 1e-8 * c, Provenance::DerivedOracle));
        }
    }
    Ok(rep.finish())
}

/// θ vectors probed by the sampling reports.
fn theta_grid(d: usize) -> Vec<Vec<f64>> {
    let mut grid: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|k| if k == j { 1.0 } else { 0.0 }).collect()).collect();
    grid.push(vec![0.5; d]);
    grid.push((0..d).map(|k| if k % 2 == 0 { 1.0 } else { -0.7 }).collect());
    grid
}

fn write_batch(s: &Settings, batch: &FddBatch, name: &str) -> CliResult<()> {
    let path = s.out.join(name);
    let mut w = create(&path)?;
    batch.write_csv(&mut w)?;
    w.flush().map_err(io_err(&path))
}

fn cf_checks(rep: &mut ExperimentReport, batch: &FddBatch, target: impl Fn(&[f64]) -> CliResult<f64>) -> CliResult<()> {
    if batch.samples.len() < 1000 {
        return Ok(());
    }
    for theta in theta_grid(batch.meta.points.len()) {
        let e = empirical_cf(&batch.samples, &theta)?;
        rep.push(Check::monte_carlo(format!("cf {theta:?}"), target(&theta)?, e.estimate.re, e.se, 0.0));
    }
    Ok(())
}

pub fn sample_fdd(s: &Settings) -> CliResult<ExperimentReport> {
    let alpha = require(s.alpha, "alpha")?;
    let field = match s.beta {
        Some(beta) => FieldKind::Fractional { beta },
        None => FieldKind::LevyChentsov,
    };
    let pts = points_or_random(s, 3)?;
    let cells = cell_measures(&pts, &s.family(), &s.budget)?;
    let scales = field_scales(&cells, alpha, field)?;
    let batch = FddBatch {
        meta: SampleMeta {
            field,
            alpha,
            alpha_prime: None,
            points: pts,
            seed: s.seed,
            cell_method: cells.method,
            cell_err: cells.err,
        },
        samples: sample_scales(&scales, s.samples.unwrap_or(10_000), s.seed),
    };
    write_batch(s, &batch, "fdd_samples.csv")?;
    let mut rep = new_report("sample-fdd", s);
    rep.partial = cells.degraded;
    cf_checks(&mut rep, &batch, |theta| Ok(scales.characteristic_function(theta)))?;
    Ok(rep.finish())
}

pub fn sample_substable_cmd(s: &Settings) -> CliResult<ExperimentReport> {
    let alpha = require(s.alpha, "alpha")?;
    let alpha_prime = require(s.alpha_prime, "alpha-prime")?;
    let pts = points_or_random(s, 2)?;
    let cells = cell_measures(&pts, &s.family(), &s.budget)?;
    let batch = sample_substable(&pts, &s.family(), alpha, alpha_prime, s.samples.unwrap_or(10_000), s.seed, &s.budget)?;
    write_batch(s, &batch, "substable_samples.csv")?;
    let mut rep = new_report("sample-substable", s);
    rep.partial = cells.degraded;
    cf_checks(&mut rep, &batch, |theta| Ok(substable_cf(&cells, theta, alpha, alpha_prime)?))?;
    Ok(rep.finish())
}

pub fn invariance(s: &Settings) -> CliResult<ExperimentReport> {
    let SetFamily::Separating { space } = s.family() else {
        return config_err("invariance needs a homogeneous space, not the box family");
    };
    let pts = points_or_random(s, 3)?;
    let beta = s.beta.unwrap_or(0.5);
    let mut r = rng::stream(s.seed, AUX_STREAM + 1);
    let mut rep = new_report("invariance", s);
    for t in 0..s.trials.unwrap_or(5) {
        let g = random_group_element(space, &mut r);
        let sub = invariance_report(&pts, &g, &s.family(), beta, &s.budget)?;
        rep.partial |= sub.partial;
        for mut c in sub.checks {
            c.name = format!("g{t} {}", c.name);
            rep.push(c);
        }
    }
    Ok(rep.finish())
}

pub fn gaussian_cov(s: &Settings) -> CliResult<ExperimentReport> {
    let pts = points_or_random(s, 2)?;
    if pts.len() != 2 {
        return config_err(format!("gaussian-cov needs exactly two points, got {}", pts.len()));
    }
    let beta = s.beta.unwrap_or(0.5);
    let n = s.samples.unwrap_or(100_000);
    let cells: CellMeasureTable = cell_measures(&pts, &s.family(), &s.budget)?;
    let cov = GaussianCov::from_cells(&cells, beta)?;
    let mut rep = new_report("gaussian-cov", s);
    rep.partial = cells.degraded;
    let scale = cov.cov_y.abs().max(1.0);
    rep.push(Check::within("Cov W1 + Cov W2 = Cov Y", 0.0, cov.sum_deviation, 1e-14 * scale, Provenance::Analytic));
    let m = mubeta_masses(&cells, beta)?;
    rep.push(Check::within("2 m(1,1) = Cov Y", cov.cov_y, 2.0 * m[0b11], 1e-8, Provenance::DerivedOracle));

    let scales = field_scales(&cells, 2.0, FieldKind::Fractional { beta })?;
    let xs = sample_scales(&scales, n, s.seed);
    let a: Vec<f64> = xs.iter().map(|x| x.values[0]).collect();
    let b: Vec<f64> = xs.iter().map(|x| x.values[1]).collect();
    let (c, se) = empirical_covariance(&a, &b)?;
    rep.push(Check::monte_carlo("empirical Cov Y", cov.cov_y, c, se, 0.0));
    let inc: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let (v, se) = empirical_covariance(&inc, &inc)?;
    rep.push(Check::monte_carlo("increment variance 2 mu^beta(A delta B)", 2.0 * cov.mu_ab.powf(beta), v, se, 0.0));

    let w = sample_decomposition(&cov, n, s.seed.wrapping_add(1));
    let col = |k: usize| w.iter().map(|d| d[k]).collect::<Vec<_>>();
    let (c1, se1) = empirical_covariance(&col(0), &col(1))?;
    rep.push(Check::monte_carlo("empirical Cov W1", cov.cov_w1, c1, se1, 0.0));
    let (c2, se2) = empirical_covariance(&col(2), &col(3))?;
    rep.push(Check::monte_carlo("empirical Cov W2", cov.cov_w2, c2, se2, 0.0));
    let (x, sex) = empirical_covariance(&col(0), &col(3))?;
    rep.push(Check::monte_carlo("W1(A) W2(B) uncorrelated", 0.0, x, sex, 0.0));
    Ok(rep.finish())
}

pub fn karlin_converge(s: &Settings) -> CliResult<ExperimentReport> {
    let alpha = s.alpha.unwrap_or(2.0);
    let beta = s.beta.unwrap_or(0.5);
    let sign = if alpha == 2.0 { SignLaw::Rademacher } else { SignLaw::Pareto { tail_constant: s.tail_constant.unwrap_or(1.0) } };
    let base = KarlinConfig::new(beta, alpha, 1.0, sign)?;
    let cells = match s.load_points()? {
        Some(p) => cell_measures(&p, &s.family(), &s.budget)?,
        None => CellMeasureTable::from_cells(1, &[(1, 1.0)])?,
    };
    let d = cells.dim();
    let delta = ParityVector::new(d, (1 << d) - 1)?;
    let rhos = s.rhos.clone().unwrap_or_else(|| vec![1e2, 1e3, 1e4]);
    if rhos.is_empty() || rhos.iter().any(|r| !(*r > 0.0)) {
        return config_err("--rhos must list positive intensities");
    }
    let (rows, reals) = convergence_sweep(&base, &cells, &delta, &rhos, s.realizations.unwrap_or(200), s.seed)?;
    if rows[0].limit == 0.0 {
        return config_err("the all-odd parity pattern has zero mass for these sets");
    }
    write_sweep(s, &rows, &reals, &cells)?;

    let mut rep = new_report("karlin-converge", s);
    rep.partial = cells.degraded;
    for w in rows.windows(2) {
        rep.push(Check::at_most(format!("error decreases rho={:e}", w[1].rho), w[1].rel_error, w[0].rel_error, Provenance::MonteCarlo));
    }
    let last = rows.last().expect("at least one rho");
    rep.push(Check::at_most(format!("error below 10% at rho={:e}", last.rho), last.rel_error, 0.1, Provenance::MonteCarlo));
    rep.inputs["sweep"] = serde_json::to_value(&rows).map_err(stablefield::Error::from)?;
    Ok(rep.finish())
}

fn write_sweep(
    s: &Settings,
    rows: &[ConvergenceRow],
    reals: &[Vec<stablefield::UrnRealization>],
    cells: &CellMeasureTable,
) -> CliResult<()> {
    let d = cells.dim();
    let path = s.out.join("karlin_summary.csv");
    let mut w = create(&path)?;
    let e = io_err(&path);
    (|| {
        writeln!(w, "rho,b_rho,k_max,limit,mean_ratio,se_ratio,rel_error,se_rel_error")?;
        for r in rows {
            writeln!(
                w,
                "{:.8e},{:.8e},{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
                r.rho, r.b_rho, r.k_max, r.limit, r.mean_ratio, r.se_ratio, r.rel_error, r.se_rel_error
            )?;
        }
        w.flush()
    })()
    .map_err(e)?;

    let path = s.out.join("karlin_realizations.csv");
    let mut w = create(&path)?;
    let e = io_err(&path);
    (|| {
        let mut header = vec!["rho".to_string(), "realization".to_string()];
        header.extend((1..=d).map(|j| format!("u{j}")));
        header.extend((1..1usize << d).map(|delta| format!("m_{}", cells.key(delta))));
        writeln!(w, "{}", header.join(","))?;
        for (row, rs) in rows.iter().zip(reals) {
            for (i, r) in rs.iter().enumerate() {
                let mut fields = vec![format!("{:.8e}", row.rho), i.to_string()];
                fields.extend(r.u.iter().map(|u| format!("{u:.8e}")));
                fields.extend(r.m_counts.iter().skip(1).map(|m| m.to_string()));
                writeln!(w, "{}", fields.join(","))?;
            }
        }
        w.flush()
    })()
    .map_err(e)
}
