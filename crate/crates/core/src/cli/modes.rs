//! One function per mode. Invalid configuration aborts with an error naming the
//! field; numerical failures at a single L become error rows and the run goes on.

use rayon::prelude::*;
use serde_json::json;

use super::config::{LogBaseChoice, Mode, RunConfig, SweepSettings};
use super::output::{Check, Outcome, Row, Table, STATUS_OK};
use crate::entropy_functions::{self as ef, LogBase};
use crate::error::{Error, Result};
use crate::free_kernel::{self as fk, EnergyParams};
use crate::lattice_model::{chain_oracle, run_perturbed, ChainOracleRecord, PerturbedRunParams};
use crate::restricted_projection::{run_free, DomainSpec, FreeRunRecord};
use crate::riesz_projector as rp;
use crate::scaling_fit as sf;
use crate::schatten::{corpus_rng, run_matrix_corpus};
use num_complex::Complex64 as C64;

pub fn execute(mode: Mode, cfg: &RunConfig) -> Result<Outcome> {
    match mode {
        Mode::SweepFree => sweep_free(cfg),
        Mode::SweepPerturbed => sweep_perturbed(cfg),
        Mode::Fit => fit(cfg),
        Mode::VerifyInequalities => verify_inequalities(cfg),
        Mode::RieszCheck => riesz_check(cfg),
        Mode::GreenDecay => green_decay(cfg),
    }
}

fn error_status(e: &Error) -> String {
    format!("error: {e}")
}

fn base_name(base: LogBase) -> &'static str {
    base.name()
}

fn energy(s: &SweepSettings) -> Result<EnergyParams> {
    EnergyParams::new(s.fermi_energy).map_err(|e| Error::config("fermi_energy", e.to_string()))
}

fn sigma0_of(s: &SweepSettings, e: EnergyParams) -> Result<f64> {
    sf::sigma0(&DomainSpec::new(s.dimension, s.shape, 1.0)?, e)
}

/// Oracle spacing, validated; the chain oracle only exists in d = 1.
fn oracle_spacing(cfg: &RunConfig, s: &SweepSettings, needed_by: Option<&str>) -> Result<Option<f64>> {
    match (cfg.oracle.spacing, needed_by) {
        (None, Some(why)) => Err(Error::config("oracle.spacing", format!("required by {why}"))),
        (None, None) => Ok(None),
        (Some(a), _) => {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config("oracle.spacing", format!("must be positive, got {a}")));
            }
            if s.dimension != 1 {
                return Err(Error::config("oracle.spacing", "the chain oracle is one-dimensional"));
            }
            Ok(Some(a))
        }
    }
}

fn oracle_series(scales: &[f64], e: EnergyParams, spacing: f64) -> Vec<Result<ChainOracleRecord>> {
    scales.par_iter().map(|&l| chain_oracle(l, e, spacing)).collect()
}

/// Fits the oracle sweep in both bases and keeps the one matching Σ₀.
fn resolve_base(
    oracle: &[Result<ChainOracleRecord>],
    sigma0: f64,
    tolerance: f64,
) -> Result<sf::LogBaseResolution> {
    let pts: Vec<(f64, f64)> = oracle.iter().filter_map(|r| r.as_ref().ok()).map(|r| (r.scale, r.entropy_bits)).collect();
    sf::resolve_log_base(&sf::ScalingSeries::from_points(1, &pts)?, sigma0, tolerance)
}

struct Fits {
    joint: Option<sf::FitResult>,
    dyadic: Option<sf::FitResult>,
    errors: Vec<String>,
}

fn fits(dimension: usize, pts: &[(f64, f64)]) -> Fits {
    let series = sf::ScalingSeries::from_points(dimension, pts);
    let (joint, dyadic) = match &series {
        Ok(s) => (sf::fit_enhanced(s), sf::dyadic_sigma(s)),
        Err(e) => (Err(Error::Domain(e.to_string())), Err(Error::Domain(e.to_string()))),
    };
    let mut errors = Vec::new();
    if let Err(e) = &joint {
        errors.push(format!("fit_enhanced: {e}"));
    }
    if let Err(e) = &dyadic {
        errors.push(format!("dyadic_sigma: {e}"));
    }
    Fits { joint: joint.ok(), dyadic: dyadic.ok(), errors }
}

fn fits_json(f: &Fits) -> serde_json::Value {
    json!({ "joint": f.joint, "dyadic": f.dyadic, "errors": f.errors })
}

/// Joint-fit residual, dyadic agreement and Σ̂ against Σ₀.
fn fit_checks(f: &Fits, cfg: &RunConfig, sigma0: Option<f64>) -> Vec<Check> {
    let residual_tol = cfg.fit.residual_tolerance.unwrap_or(0.02);
    let dyadic_tol = cfg.fit.dyadic_tolerance.unwrap_or(0.10);
    let sigma_tol = cfg.fit.sigma_tolerance.unwrap_or(0.15);
    let joint = f.joint.as_ref();
    let mut out = vec![
        Check::at_most("fit_residual", joint.map_or(f64::NAN, |j| j.residual_rms), residual_tol),
        Check::at_most(
            "dyadic_agreement",
            match (joint, &f.dyadic) {
                (Some(j), Some(d)) => sf::relative_difference(d.sigma_hat, j.sigma_hat),
                _ => f64::NAN,
            },
            dyadic_tol,
        ),
    ];
    if let Some(s0) = sigma0 {
        out.push(Check::at_most("sigma_vs_sigma0", joint.map_or(f64::NAN, |j| sf::relative_difference(j.sigma_hat, s0)), sigma_tol));
    }
    out
}

fn series_points(rows: &[(f64, Option<f64>)]) -> Vec<(f64, f64)> {
    rows.iter().filter_map(|&(l, s)| s.map(|v| (l, v))).collect()
}

type FreePoint = (FreeRunRecord, Option<ChainOracleRecord>);

fn free_points(s: &SweepSettings, e: EnergyParams, cfg: &RunConfig, oracle: Option<f64>) -> Result<Vec<(f64, Result<FreePoint>)>> {
    let mode = Mode::SweepFree;
    let resolution = cfg.require_positive(cfg.free.resolution, "free.resolution", mode)?;
    let tol = cfg.require_positive(cfg.free.spectrum_tolerance, "free.spectrum_tolerance", mode)?;
    Ok(s.scales
        .par_iter()
        .map(|&l| {
            let point = DomainSpec::new(s.dimension, s.shape, l).and_then(|d| {
                let rec = run_free(&d, e, resolution, tol)?;
                let orc = oracle.map(|a| chain_oracle(l, e, a)).transpose()?;
                Ok((rec, orc))
            });
            (l, point)
        })
        .collect())
}

const FREE_COLUMNS: &[&str] = &[
    "dimension",
    "shape",
    "fermi_energy",
    "scale",
    "resolution",
    "n_nodes",
    "entropy_bits",
    "entropy_nats",
    "purity_defect",
    "clipped_count",
    "max_excursion",
    "oracle_spacing",
    "oracle_sites",
    "oracle_entropy_bits",
    "oracle_entropy_nats",
    "oracle_relative_difference",
    "status",
];

fn free_table(s: &SweepSettings, cfg: &RunConfig, points: &[(f64, Result<FreePoint>)]) -> Table {
    let mut t = Table::new(FREE_COLUMNS);
    for (l, p) in points {
        let base = Row::new()
            .int("dimension", s.dimension)
            .text("shape", s.shape.name())
            .num("fermi_energy", s.fermi_energy)
            .num("scale", *l)
            .num("resolution", cfg.free.resolution.unwrap_or(f64::NAN));
        let row = match p {
            Ok((r, o)) => {
                let mut row = base
                    .int("n_nodes", r.n_nodes)
                    .num("entropy_bits", r.entropy_bits)
                    .num("entropy_nats", r.entropy_nats)
                    .num("purity_defect", r.purity_defect)
                    .int("clipped_count", r.clipped_count)
                    .num("max_excursion", r.max_excursion);
                if let Some(o) = o {
                    row = row
                        .num("oracle_spacing", o.spacing)
                        .int("oracle_sites", o.n_sites)
                        .num("oracle_entropy_bits", o.entropy_bits)
                        .num("oracle_entropy_nats", o.entropy_nats)
                        .num("oracle_relative_difference", sf::relative_difference(r.entropy_nats, o.entropy_nats));
                }
                row.text("status", STATUS_OK)
            }
            Err(e) => base.text("status", error_status(e)),
        };
        t.push(row);
    }
    t
}

fn sweep_free(cfg: &RunConfig) -> Result<Outcome> {
    let mode = Mode::SweepFree;
    let s = cfg.sweep_settings(mode)?;
    let e = energy(&s)?;
    let consistency = cfg.oracle.consistency_tolerance;
    let oracle = oracle_spacing(cfg, &s, consistency.map(|_| "oracle.consistency_tolerance"))?;
    let points = free_points(&s, e, cfg, oracle)?;
    let table = free_table(&s, cfg, &points);
    let ok: Vec<&FreePoint> = points.iter().filter_map(|(_, p)| p.as_ref().ok()).collect();

    let mut checks = vec![Check::holds(
        "entropy_increasing",
        ok.windows(2).all(|w| w[1].0.entropy_nats > w[0].0.entropy_nats),
    )];
    if let Some(tol) = consistency {
        let worst = ok
            .iter()
            .filter_map(|(r, o)| o.as_ref().map(|o| sf::relative_difference(r.entropy_nats, o.entropy_nats)))
            .fold(if ok.is_empty() { f64::NAN } else { 0.0 }, f64::max);
        checks.push(Check::at_most("cross_method_consistency", worst, tol));
    }
    let mut details = json!({ "sigma0": sigma0_of(&s, e)? });
    if ok.len() >= sf::MIN_FIT_POINTS {
        for base in [LogBase::Bits, LogBase::Nats] {
            let pts: Vec<(f64, f64)> = ok.iter().map(|(r, _)| (r.scale, r.entropy_bits * base.from_bits_factor())).collect();
            details[format!("fit_{}", base_name(base))] = fits_json(&fits(s.dimension, &pts));
        }
    }
    Ok(Outcome {
        table,
        checks,
        details,
        series_columns: vec!["scale", "entropy_nats", "purity_defect", "oracle_entropy_nats"],
    })
}

fn fit(cfg: &RunConfig) -> Result<Outcome> {
    let mode = Mode::Fit;
    let s = cfg.sweep_settings(mode)?;
    let e = energy(&s)?;
    let sigma0 = sigma0_of(&s, e)?;
    let choice = cfg.fit.log_base.unwrap_or(LogBaseChoice::Auto);
    // The oracle only serves the log-base resolution.
    let oracle = oracle_spacing(cfg, &s, (choice == LogBaseChoice::Auto).then_some("fit.log_base = \"auto\""))?
        .filter(|_| choice == LogBaseChoice::Auto);

    // (L, S in bits) of the series under test plus the table to emit.
    let (table, pts_bits, oracle_records) = match &cfg.fit.input {
        Some(path) => {
            let pts = read_entropy_column(path)?;
            let scales: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let orc = oracle.map(|a| oracle_series(&scales, e, a));
            let mut t = Table::new(&["scale", "entropy_bits", "oracle_entropy_bits", "oracle_entropy_nats", "status"]);
            for (i, &(l, sb)) in pts.iter().enumerate() {
                let mut row = Row::new().num("scale", l).num("entropy_bits", sb);
                match orc.as_ref().map(|o| &o[i]) {
                    Some(Ok(o)) => row = row.num("oracle_entropy_bits", o.entropy_bits).num("oracle_entropy_nats", o.entropy_nats),
                    Some(Err(err)) => {
                        t.push(row.text("status", error_status(err)));
                        continue;
                    }
                    None => {}
                }
                t.push(row.text("status", STATUS_OK));
            }
            (t, pts.into_iter().map(|(l, v)| (l, Some(v))).collect::<Vec<_>>(), orc)
        }
        None => {
            let points = free_points(&s, e, cfg, oracle)?;
            let t = free_table(&s, cfg, &points);
            let pts = points.iter().map(|(l, p)| (*l, p.as_ref().ok().map(|(r, _)| r.entropy_bits))).collect();
            let orc = oracle.map(|_| {
                points
                    .iter()
                    .map(|(_, p)| match p {
                        Ok((_, Some(o))) => Ok(*o),
                        Ok((_, None)) => Err(Error::Precondition("oracle missing".into())),
                        Err(err) => Err(Error::Precondition(err.to_string())),
                    })
                    .collect::<Vec<_>>()
            });
            (t, pts, orc)
        }
    };

    let mut checks = Vec::new();
    let mut details = json!({ "sigma0": sigma0 });
    let base = match choice {
        LogBaseChoice::Bits => LogBase::Bits,
        LogBaseChoice::Nats => LogBase::Nats,
        LogBaseChoice::Auto => {
            let records = oracle_records.as_deref().unwrap_or(&[]);
            match resolve_base(records, sigma0, cfg.fit.sigma_tolerance.unwrap_or(0.15)) {
                Ok(res) => {
                    let err = match res.selected {
                        Some(LogBase::Bits) => res.relative_error_bits,
                        Some(LogBase::Nats) => res.relative_error_nats,
                        None => f64::NAN,
                    };
                    checks.push(Check::at_most("oracle_sigma_vs_sigma0", err, res.tolerance));
                    let chosen = res.selected.unwrap_or(LogBase::Nats);
                    details["log_base_resolution"] = json!(res);
                    chosen
                }
                Err(err) => {
                    checks.push(Check::holds("oracle_sigma_vs_sigma0", false));
                    details["log_base_resolution"] = json!({ "error": err.to_string() });
                    LogBase::Nats
                }
            }
        }
    };
    details["log_base"] = json!(base_name(base));
    let pts: Vec<(f64, f64)> =
        series_points(&pts_bits).into_iter().map(|(l, v)| (l, v * base.from_bits_factor())).collect();
    let f = fits(s.dimension, &pts);
    checks.extend(fit_checks(&f, cfg, Some(sigma0)));
    let (sl, su) = sf::sigma_bounds(sigma0)?;
    if let Some(j) = &f.joint {
        let v = sf::bound_verdict(j, sl, su);
        checks.push(Check::holds("bound_verdict", v.passed));
        details["verdict"] = json!(v);
    }
    details["fits"] = fits_json(&f);
    Ok(Outcome { table, checks, details, series_columns: vec!["scale", "entropy_bits", "oracle_entropy_bits"] })
}

/// (L, S in bits) from the ok rows of a results.csv.
fn read_entropy_column(path: &std::path::Path) -> Result<Vec<(f64, f64)>> {
    let table = super::compare::read_results(path)?;
    let li = table.column("scale").ok_or_else(|| Error::config("fit.input", "no scale column"))?;
    let si = table.column("entropy_bits").ok_or_else(|| Error::config("fit.input", "no entropy_bits column"))?;
    let mut out = Vec::new();
    for row in &table.rows {
        if let (Some(l), Some(s)) = (row[li], row[si]) {
            out.push((l, s));
        }
    }
    Ok(out)
}

fn sweep_perturbed(cfg: &RunConfig) -> Result<Outcome> {
    let mode = Mode::SweepPerturbed;
    let s = cfg.sweep_settings(mode)?;
    let e = energy(&s)?;
    let potential = cfg.potential_spec(mode)?;
    let spacing = cfg.require_positive(cfg.lattice.spacing, "lattice.spacing", mode)?;
    let buffer_ratio = cfg.require_positive(cfg.lattice.buffer_ratio, "lattice.buffer_ratio", mode)?;
    let align = cfg.lattice.align.unwrap_or(true);
    let schatten_s = cfg.lattice.schatten_s.clone().unwrap_or_default();
    if let Some(&bad) = schatten_s.iter().find(|&&v| !(v > 0.5 && v < 1.0)) {
        return Err(Error::config("lattice.schatten_s", format!("exponent {bad} outside ]1/2, 1[")));
    }
    let sigma0 = sigma0_of(&s, e)?;
    let choice = cfg.fit.log_base.unwrap_or(LogBaseChoice::Nats);
    let oracle = oracle_spacing(cfg, &s, (choice == LogBaseChoice::Auto).then_some("fit.log_base = \"auto\""))?;

    let results: Vec<Result<crate::lattice_model::PerturbedRunRecord>> = s
        .scales
        .par_iter()
        .map(|&l| {
            let params = PerturbedRunParams {
                dimension: s.dimension,
                shape: s.shape,
                scale: l,
                spacing,
                buffer_ratio,
                potential: potential.clone(),
                schatten_s: schatten_s.clone(),
                align,
            };
            run_perturbed(&params, e)
        })
        .collect();

    let mut table = Table::new(&[
        "dimension",
        "shape",
        "fermi_energy",
        "scale",
        "spacing",
        "buffer_ratio",
        "potential",
        "half_width",
        "n_sites",
        "region_sites",
        "occupied",
        "occupied_free",
        "entropy_bits",
        "entropy_nats",
        "entropy_free_bits",
        "entropy_free_nats",
        "purity_defect",
        "purity_defect_free",
        "cross_term_hs",
    ]);
    let schatten_cols: Vec<String> = schatten_s.iter().map(|v| format!("schatten_s{v}")).collect();
    for c in &schatten_cols {
        table.add_column(c.clone());
    }
    for c in ["lower_bound_rhs", "lower_bound_holds", "mismatch", "clearance", "status"] {
        table.add_column(c.to_string());
    }
    for (&l, r) in s.scales.iter().zip(&results) {
        let mut row = Row::new()
            .int("dimension", s.dimension)
            .text("shape", s.shape.name())
            .num("fermi_energy", s.fermi_energy)
            .num("scale", l)
            .num("spacing", spacing)
            .num("buffer_ratio", buffer_ratio)
            .text("potential", potential.descriptor());
        row = match r {
            Ok(rec) => {
                let mut row = row
                    .num("half_width", rec.half_width)
                    .int("n_sites", rec.n_sites)
                    .int("region_sites", rec.region_sites)
                    .int("occupied", rec.occupied)
                    .int("occupied_free", rec.occupied_free)
                    .num("entropy_bits", rec.entropy_bits)
                    .num("entropy_nats", rec.entropy_nats)
                    .num("entropy_free_bits", rec.entropy_free_bits)
                    .num("entropy_free_nats", rec.entropy_free_nats)
                    .num("purity_defect", rec.purity_defect)
                    .num("purity_defect_free", rec.purity_defect_free)
                    .num("cross_term_hs", rec.cross_term_hs);
                for (c, (_, v)) in schatten_cols.iter().zip(&rec.schatten) {
                    row = row.num(c, *v);
                }
                row.num("lower_bound_rhs", rec.lower_bound.bound)
                    .flag("lower_bound_holds", rec.lower_bound.holds)
                    .num("mismatch", rec.mismatch)
                    .num("clearance", rec.clearance)
                    .text("status", STATUS_OK)
            }
            Err(err) => row.text("status", error_status(err)),
        };
        table.push(row);
    }

    let ok: Vec<&crate::lattice_model::PerturbedRunRecord> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let scales: Vec<f64> = ok.iter().map(|r| r.scale).collect();
    let mut details = json!({ "sigma0": sigma0 });
    let mut checks = Vec::new();

    let base = match choice {
        LogBaseChoice::Bits => LogBase::Bits,
        LogBaseChoice::Nats => LogBase::Nats,
        LogBaseChoice::Auto => {
            let records = oracle_series(&s.scales, e, oracle.expect("validated above"));
            let res = resolve_base(&records, sigma0, cfg.fit.sigma_tolerance.unwrap_or(0.15))?;
            details["log_base_resolution"] = json!(res);
            checks.push(Check::holds("log_base_resolved", res.selected.is_some()));
            res.selected.unwrap_or(LogBase::Nats)
        }
    };
    details["log_base"] = json!(base_name(base));
    let pts: Vec<(f64, f64)> = ok.iter().map(|r| (r.scale, r.entropy_bits * base.from_bits_factor())).collect();
    let f = fits(s.dimension, &pts);
    let (sl, su) = sf::sigma_bounds(sigma0)?;
    match &f.joint {
        Some(j) => {
            let v = sf::bound_verdict(j, sl, su);
            checks.push(Check::holds("bound_verdict", v.passed));
            details["verdict"] = json!(v);
        }
        None => checks.push(Check::holds("bound_verdict", false)),
    }
    details["fits"] = fits_json(&f);
    checks.push(Check::holds("lower_bound_pointwise", !ok.is_empty() && ok.iter().all(|r| r.lower_bound.holds)));

    let trend = |values: Vec<f64>, log_log: bool| -> Option<sf::TrendFit> {
        if log_log { sf::loglog_slope(&scales, &values) } else { sf::slope_vs_log(&scales, &values) }.ok()
    };
    let hs = trend(ok.iter().map(|r| r.cross_term_hs).collect(), false);
    let purity = trend(ok.iter().map(|r| r.purity_defect).collect(), false);
    let max_hs_slope = cfg.checks.cross_term_slope_max.unwrap_or(0.02);
    let min_purity_slope = cfg.checks.purity_slope_min.unwrap_or(0.05);
    checks.push(Check::at_most("cross_term_bounded", hs.map_or(f64::NAN, |t| t.slope.abs()), max_hs_slope));
    checks.push(Check::at_least("purity_growth", purity.map_or(f64::NAN, |t| t.slope), min_purity_slope));
    let mut schatten_trends = Vec::new();
    let margin = cfg.checks.schatten_slope_margin.unwrap_or(0.1);
    for (k, &sv) in schatten_s.iter().enumerate() {
        let t = trend(ok.iter().map(|r| r.schatten[k].1).collect(), true);
        let limit = 2.0 * s.dimension as f64 * (1.0 - sv) + margin;
        checks.push(Check::at_most(format!("schatten_growth_s{sv}"), t.map_or(f64::NAN, |t| t.slope), limit));
        schatten_trends.push(json!({ "s": sv, "trend": t }));
    }
    details["trends"] = json!({ "cross_term_hs": hs, "purity_defect": purity, "schatten": schatten_trends });
    Ok(Outcome {
        table,
        checks,
        details,
        series_columns: vec!["scale", "entropy_nats", "entropy_free_nats", "purity_defect", "cross_term_hs"],
    })
}

fn verify_inequalities(cfg: &RunConfig) -> Result<Outcome> {
    let mode = Mode::VerifyInequalities;
    let q = &cfg.inequalities;
    let need = |v: Option<usize>, field: &str| -> Result<usize> {
        match v {
            Some(n) if n >= 2 => Ok(n),
            Some(n) => Err(Error::config(field, format!("must be at least 2, got {n}"))),
            None => Err(Error::config(field, format!("required in mode {}", mode.name()))),
        }
    };
    let points = need(q.scalar_points, "inequalities.scalar_points")?;
    let axis = need(q.log_sum_axis, "inequalities.log_sum_axis")?;
    let pairs = need(q.matrix_pairs, "inequalities.matrix_pairs")?;
    let size = need(q.matrix_size, "inequalities.matrix_size")?;
    let power_s = q.power_s.clone().unwrap_or_default();
    let matrix_s = q.matrix_s.clone().unwrap_or_default();
    let seed = cfg.seed.unwrap_or(1);

    let grid = ef::uniform_grid(points);
    let top = (-0.5f64).exp();
    let f_grid: Vec<f64> = grid.iter().map(|x| x * top).collect();
    let mut suites: Vec<(String, ef::InequalityReport)> = vec![
        ("entropy_sandwich".into(), ef::check_sandwich(&grid)?),
        ("f_monotone".into(), ef::check_f_monotone(&f_grid)?),
        ("log_sum".into(), ef::check_log_sum(&ef::log_sum_pairs(axis))?),
    ];
    for &sv in &power_s {
        let rep = ef::check_power_bounds(&grid, sv).map_err(|e| Error::config("inequalities.power_s", e.to_string()))?;
        suites.push((format!("power_bounds_s{sv}"), rep));
    }
    let corpus = run_matrix_corpus(seed, pairs, size, &matrix_s).map_err(|e| Error::config("inequalities.matrix_s", e.to_string()))?;
    suites.push(("singular_additivity".into(), corpus.additivity.clone()));
    suites.push(("interpolation".into(), corpus.interpolation.clone()));
    suites.push(("log_triangle".into(), corpus.log_triangle.clone()));
    suites.push(("power_sum_subadditivity".into(), corpus.subadditivity.clone()));

    let mut table = Table::new(&["suite", "seed", "samples", "min_slack", "tolerance", "worst_input", "passed", "status"]);
    let mut checks = Vec::new();
    for (name, rep) in &suites {
        let worst: Vec<String> = rep.worst_input.iter().map(|v| format!("{v:?}")).collect();
        table.push(
            Row::new()
                .text("suite", name.clone())
                .int("seed", seed as usize)
                .int("samples", rep.samples)
                .num("min_slack", rep.max_violation)
                .num("tolerance", rep.tolerance)
                .text("worst_input", worst.join(";"))
                .flag("passed", rep.passed())
                .text("status", STATUS_OK),
        );
        checks.push(Check::at_least(name.clone(), rep.max_violation, -rep.tolerance));
    }
    Ok(Outcome {
        table,
        checks,
        details: json!({ "seed": seed, "matrix_pairs": pairs, "matrix_size": size }),
        series_columns: vec![],
    })
}

fn riesz_check(cfg: &RunConfig) -> Result<Outcome> {
    let mode = Mode::RieszCheck;
    let r = &cfg.riesz;
    let solver = r.solver.unwrap_or(rp::ResolventSolver::Tridiagonal);
    let cases = r.gapped_cases.unwrap_or(10);
    let size = r.gapped_size.unwrap_or(8);
    if size < 2 {
        return Err(Error::config("riesz.gapped_size", "must be at least 2"));
    }
    let chain_sites = r.chain_sites.unwrap_or(400);
    let tol = cfg.require_positive(r.quadrature_tolerance, "riesz.quadrature_tolerance", mode)?;
    let max_solves = r.max_solves.unwrap_or(10_000);
    let heights = r.half_heights.clone().unwrap_or_else(|| vec![1.0]);
    if heights.is_empty() || heights.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::config("riesz.half_heights", "must be a nonempty list of positive heights"));
    }
    let seed = cfg.seed.unwrap_or(1);
    let quad = rp::ContourQuadrature::Adaptive { tolerance: tol, max_solves };
    let h0 = heights[heights.len() - 1];

    let mut table = Table::new(&["case", "kind", "size", "energy", "half_height", "solver", "solves", "relative_error", "status"]);
    let mut run_case = |name: String, kind: &str, k: &ndarray::Array2<C64>, w: &ndarray::Array2<C64>, energy: f64, h: f64| {
        let res = rp::ContourSpec::for_matrix(k, energy, h, quad).and_then(|c| {
            let out = rp::riesz_sandwich(k, w, w, &c, solver)?;
            let oracle = rp::spectral_sandwich(k, w, w, energy)?;
            Ok((out.solves, rp::relative_error(&out.matrix, &oracle), out.matrix))
        });
        let row = Row::new()
            .text("case", name)
            .text("kind", kind)
            .int("size", k.nrows())
            .num("energy", energy)
            .num("half_height", h)
            .text("solver", format!("{solver:?}").to_lowercase());
        let (row, result) = match res {
            Ok((solves, err, m)) => {
                (row.int("solves", solves).num("relative_error", err).text("status", STATUS_OK), Some((solves, err, m)))
            }
            Err(e) => (row.text("status", error_status(&e)), None),
        };
        table.push(row);
        result
    };

    let mut gapped_worst: f64 = if cases == 0 { f64::NAN } else { 0.0 };
    let mut first_case = None;
    for i in 0..cases {
        let mut rng = corpus_rng(seed, i as u64);
        let (k, e) = rp::random_gapped_hermitian(&mut rng, size)?;
        let eye = rp::WeightOperator::identity(size).matrix();
        match run_case(format!("gapped_{i}"), "gapped", &k, &eye, e, h0) {
            Some((_, err, _)) => gapped_worst = gapped_worst.max(err),
            None => gapped_worst = f64::NAN,
        }
        if i == 0 {
            first_case = Some((k, e));
        }
    }

    let chain = rp::chain_laplacian(chain_sites);
    let weights = rp::WeightOperator::japanese_bracket(&rp::chain_coordinates(chain_sites));
    let wm = weights.matrix();
    let mid = run_case("mid_band".into(), "chain", &chain, &wm, 2.0, h0);

    let mut height_spread = f64::NAN;
    if let Some((k, e)) = &first_case {
        let eye = rp::WeightOperator::identity(size).matrix();
        let mats: Vec<Option<ndarray::Array2<C64>>> = heights
            .iter()
            .map(|&h| run_case(format!("height_{h}"), "height", k, &eye, *e, h).map(|r| r.2))
            .collect();
        if let Some(Some(reference)) = mats.first() {
            height_spread = mats
                .iter()
                .map(|m| m.as_ref().map_or(f64::NAN, |m| rp::relative_error(m, reference)))
                .fold(0.0, |a: f64, b| if b.is_nan() { f64::NAN } else { a.max(b) });
        }
    }

    let mut checks = vec![Check::at_most("gapped_error", gapped_worst, r.gapped_tolerance.unwrap_or(1e-8))];
    checks.push(Check::at_most("mid_band_error", mid.as_ref().map_or(f64::NAN, |m| m.1), r.chain_tolerance.unwrap_or(1e-4)));
    checks.push(Check::at_most("mid_band_solves", mid.as_ref().map_or(f64::NAN, |m| m.0 as f64), max_solves as f64));
    checks.push(Check::at_most("height_independence", height_spread, r.height_tolerance.unwrap_or(1e-8)));

    let etas: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
    let lap = rp::lap_constant(&chain, &weights, 2.0, &etas, 0.0).ok();
    let convergence = first_case
        .as_ref()
        .and_then(|(k, e)| {
            let eye = rp::WeightOperator::identity(size).matrix();
            rp::convergence_study(k, &eye, &eye, *e, h0, &[4, 8, 16, 32, 64]).ok()
        });
    Ok(Outcome {
        table,
        checks,
        details: json!({ "seed": seed, "lap_constant_mid_band": lap, "convergence_gapped_0": convergence }),
        series_columns: vec![],
    })
}

fn green_decay(cfg: &RunConfig) -> Result<Outcome> {
    let mode = Mode::GreenDecay;
    let g = &cfg.green;
    let energies = g.energies.clone().unwrap_or_default();
    let dims = g.dimensions.clone().unwrap_or_default();
    let r_min = cfg.require_positive(g.r_min, "green.r_min", mode)?;
    let r_max = cfg.require_positive(g.r_max, "green.r_max", mode)?;
    let count = g.separations.unwrap_or(24);
    let rate_tol = cfg.require_positive(g.rate_tolerance, "green.rate_tolerance", mode)?;
    let id_tol = cfg.require_positive(g.identity_tolerance, "green.identity_tolerance", mode)?;
    for &d in &dims {
        if !(1..=3).contains(&d) {
            return Err(Error::config("green.dimensions", format!("unsupported dimension {d}")));
        }
    }
    let seps = fk::geometric_separations(r_min, r_max, count);

    let mut table = Table::new(&[
        "kind",
        "dimension",
        "re_z",
        "im_z",
        "fitted_rate",
        "predicted_rate",
        "relative_error",
        "r_min",
        "r_max",
        "status",
    ]);
    let mut checks = Vec::new();
    for &d in &dims {
        for &[re, im] in &energies {
            let row = Row::new().text("kind", "decay").int("dimension", d).num("re_z", re).num("im_z", im);
            let name = format!("decay_d{d}_z{re}{im:+}i");
            match fk::verify_green_decay(C64::new(re, im), d, &seps) {
                Ok(rep) => {
                    table.push(
                        row.num("fitted_rate", rep.fitted_rate)
                            .num("predicted_rate", rep.predicted_rate)
                            .num("relative_error", rep.relative_rate_error)
                            .num("r_min", rep.sample_range.0)
                            .num("r_max", rep.sample_range.1)
                            .text("status", STATUS_OK),
                    );
                    checks.push(Check::at_most(name, rep.relative_rate_error, rate_tol));
                }
                Err(e) => {
                    table.push(row.text("status", error_status(&e)));
                    checks.push(Check::holds(name, false));
                }
            }
        }
    }
    let mut worst: f64 = 0.0;
    for &ev in g.identity_energies.as_deref().unwrap_or(&[]) {
        for &eta in g.identity_etas.as_deref().unwrap_or(&[]) {
            let row = Row::new().text("kind", "identity").num("re_z", ev).num("im_z", eta);
            match fk::imag_sqrt_identity(ev, eta) {
                Ok((direct, formula)) => {
                    let err = sf::relative_difference(formula, direct);
                    worst = worst.max(err);
                    table.push(
                        row.num("fitted_rate", direct)
                            .num("predicted_rate", formula)
                            .num("relative_error", err)
                            .text("status", STATUS_OK),
                    );
                }
                Err(e) => {
                    worst = f64::NAN;
                    table.push(row.text("status", error_status(&e)));
                }
            }
        }
    }
    checks.push(Check::at_most("imag_sqrt_identity", worst, id_tol));
    Ok(Outcome { table, checks, details: json!({ "separations": seps }), series_columns: vec![] })
}
