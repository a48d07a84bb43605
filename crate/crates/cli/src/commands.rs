//! The four subcommands: certificate search, simulation, reference-example
//! reproduction, and the property suites.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;

use iqcert::algorithms::{default_start, estimate_rate, simulate, SimOptions, Trajectory};
use iqcert::certify::{build_filter, certify_rate, CertificateRecord, MultiplierSpec};
use iqcert::lemmas;
use iqcert::lure::{fixed_point_residual, AlgorithmState, OutputForm};
use iqcert::problems::{solve_reference, Objective, QuadraticObjective};
use iqcert::sets::ConvexSet;

use crate::config::{
    build_form, build_multiplier, build_objective, build_set, resolve_sector, ExperimentConfig,
};
use crate::csvio;
use crate::{map_lib_err, CliError};

pub struct CommonOpts {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub max_iters: Option<usize>,
}

fn out_dir(cfg: &ExperimentConfig, opts: &CommonOpts) -> Result<PathBuf, CliError> {
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// Default multiplier when the config omits one: the static sector for
/// gradient descent, the weighted off-by-one for momentum methods.
fn default_multiplier(algorithm: &str) -> MultiplierSpec<f64> {
    if algorithm == "gradient-descent" {
        MultiplierSpec::StaticSector
    } else {
        MultiplierSpec::WeightedOffByOne { rho_weight: 1.0 }
    }
}

/// Cold start replicating `y0` into every state block.
fn state_from_y0(form: &OutputForm<f64>, y0: &DVector<f64>) -> AlgorithmState<f64> {
    let d = y0.len();
    let n = form.n();
    let mut tail = DVector::zeros((n - 1) * d);
    for i in 0..n - 1 {
        tail.rows_mut(i * d, d).copy_from(y0);
    }
    AlgorithmState::new(y0.clone(), tail, n).expect("replicated start state is consistent")
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

pub fn cmd_certify(opts: &CommonOpts) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.run.seed = seed;
    }
    if let Some(tol) = opts.tol {
        if !(tol > 0.0) {
            return Err(CliError::Config(format!("--tol must be positive, got {tol}")));
        }
        cfg.run.bisect_tol = tol;
    }
    let dir = out_dir(&cfg, opts)?;

    let obj = cfg
        .objective
        .as_ref()
        .map(|o| build_objective(o, cfg.run.seed))
        .transpose()?;
    let (m, l) = resolve_sector(&cfg.algorithm, obj.as_ref())?;
    let form = build_form(&cfg.algorithm, m, l)?;
    let spec = cfg
        .multiplier
        .as_ref()
        .map(build_multiplier)
        .transpose()?
        .unwrap_or_else(|| default_multiplier(&cfg.algorithm.name));

    let t0 = Instant::now();
    let (rho, cert) =
        certify_rate(&form, m, l, &spec, cfg.run.bisect_tol).map_err(map_lib_err)?;
    let elapsed = t0.elapsed().as_secs_f64();

    let record = CertificateRecord {
        algorithm: cfg.algorithm.name.clone(),
        m,
        l,
        multiplier: spec.effective_at(rho),
        certificate: cert.clone(),
    };
    let cert_path = dir.join("certificate.txt");
    write_text(&cert_path, &record.to_text())?;

    let mut report = String::new();
    report.push_str("certification report\n");
    report.push_str(&format!("algorithm = {}\n", cfg.algorithm.name));
    report.push_str(&format!("m = {m}\n"));
    report.push_str(&format!("L = {l}\n"));
    report.push_str(&format!("multiplier = {}\n", spec.effective_at(rho).label()));
    report.push_str(&format!("rho_star = {rho}\n"));
    report.push_str(&format!("margin = {:e}\n", cert.margin));
    report.push_str(&format!("p_min_eig = {:e}\n", cert.p_min_eig));
    report.push_str(&format!("bisect_tol = {}\n", cfg.run.bisect_tol));
    report.push_str(&format!("wall_clock_seconds = {elapsed:.3}\n"));
    report.push_str(&format!("certificate = {}\n", cert_path.display()));
    write_text(&dir.join("certify-report.txt"), &report)?;
    print!("{report}");
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub fn cmd_simulate(opts: &CommonOpts) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.run.seed = seed;
    }
    if let Some(tol) = opts.tol {
        if !(tol > 0.0) {
            return Err(CliError::Config(format!("--tol must be positive, got {tol}")));
        }
        cfg.run.stop_tol = tol;
    }
    if let Some(cap) = opts.max_iters {
        cfg.run.max_iters = cap;
    }
    let dir = out_dir(&cfg, opts)?;

    let obj_cfg = cfg
        .objective
        .as_ref()
        .ok_or_else(|| CliError::Config("simulate requires an [objective] table".into()))?;
    let obj = build_objective(obj_cfg, cfg.run.seed)?;
    let d = obj.dim();
    let set = match cfg.set.as_ref() {
        Some(s) => build_set(s, d)?,
        None => ConvexSet::whole_space(d),
    };
    set.expect_dim(d).map_err(map_lib_err)?;
    let (m, l) = resolve_sector(&cfg.algorithm, Some(&obj))?;
    let form = build_form(&cfg.algorithm, m, l)?;

    let whole = matches!(set, ConvexSet::WholeSpace { .. });
    let y_ref = if whole {
        obj.unconstrained_minimizer().map_err(map_lib_err)?
    } else {
        solve_reference(&obj, &set, 1e-13).map_err(map_lib_err)?
    };

    let cert_info = match cfg.multiplier.as_ref().map(build_multiplier).transpose()? {
        Some(spec) => {
            let (rho, cert) =
                certify_rate(&form, m, l, &spec, cfg.run.bisect_tol).map_err(map_lib_err)?;
            let filt =
                build_filter(&spec.effective_at(rho), m, l).map_err(map_lib_err)?;
            Some((rho, cert, filt, spec.effective_at(rho).label()))
        }
        None => None,
    };

    let x0 = match cfg.run.y0.as_ref() {
        Some(y0) => {
            if y0.len() != d {
                return Err(CliError::Config(format!(
                    "[run] y0 has length {}, objective has dimension {d}",
                    y0.len()
                )));
            }
            state_from_y0(&form, &DVector::from_vec(y0.clone()))
        }
        None => default_start(&form, &set, d).map_err(map_lib_err)?,
    };

    let mut sim_opts = SimOptions::new(y_ref.clone());
    sim_opts.max_iters = cfg.run.max_iters;
    sim_opts.stop_tol = cfg.run.stop_tol;
    sim_opts.algorithm = cfg.algorithm.name.clone();
    sim_opts.problem = format!("{} (d = {d})", obj_cfg.kind);
    sim_opts.set = cfg.set.as_ref().map(|s| s.kind.clone()).unwrap_or_else(|| "whole-space".into());
    sim_opts.seed = Some(cfg.run.seed);
    if let Some((_, cert, filt, _)) = &cert_info {
        sim_opts.certificate = Some(cert.clone());
        sim_opts.filter = Some(filt.clone());
    }

    let t0 = Instant::now();
    let traj: Trajectory<f64> =
        simulate(&form, &obj, &set, &x0, &sim_opts).map_err(map_lib_err)?;
    let elapsed = t0.elapsed().as_secs_f64();

    let csv_path = dir.join("trajectory.csv");
    csvio::write_trajectory(&csv_path, &traj, cfg.run.max_iters == 0)?;

    let fit = estimate_rate(&traj).ok();
    let max_ratio = traj.t_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let final_y = &traj.final_state.y;
    let fp_res = fixed_point_residual(&form, &set, &obj, final_y).ok();

    let mut rec = String::new();
    rec.push_str("run record\n");
    rec.push_str(&format!("config = {}\n", opts.config.display()));
    rec.push_str(&format!("algorithm = {}\n", cfg.algorithm.name));
    rec.push_str(&format!("m = {m}\n"));
    rec.push_str(&format!("L = {l}\n"));
    rec.push_str(&format!("objective = {} (d = {d})\n", obj_cfg.kind));
    rec.push_str(&format!("set = {}\n", sim_opts.set));
    match &cert_info {
        Some((rho, _, _, label)) => {
            rec.push_str(&format!("multiplier = {label}\n"));
            rec.push_str(&format!("certified_rate = {rho}\n"));
        }
        None => {
            rec.push_str("multiplier = none\n");
            rec.push_str("certified_rate = none\n");
        }
    }
    rec.push_str(&format!("seed = {}\n", cfg.run.seed));
    rec.push_str(&format!("max_iters = {}\n", cfg.run.max_iters));
    rec.push_str(&format!("stop_tol = {}\n", cfg.run.stop_tol));
    rec.push_str(&format!("iterations = {}\n", traj.meta.iterations));
    match &fit {
        Some(f) => {
            rec.push_str(&format!("fitted_rate = {}\n", f.rho_hat));
            rec.push_str(&format!("fit_window = {} {}\n", f.window.0, f.window.1));
            rec.push_str(&format!("fit_r_squared = {}\n", f.r_squared));
        }
        None => {
            rec.push_str("fitted_rate = none\n");
            rec.push_str("fit_window = none\n");
            rec.push_str("fit_r_squared = none\n");
        }
    }
    if max_ratio.is_finite() {
        rec.push_str(&format!("contraction_max_ratio = {max_ratio}\n"));
    } else {
        rec.push_str("contraction_max_ratio = none\n");
    }
    rec.push_str(&format!("final_err_y = {}\n", traj.y_errors.last().unwrap()));
    let final_strs: Vec<String> = final_y.iter().map(|v| format!("{v}")).collect();
    rec.push_str(&format!("final_y = {}\n", final_strs.join(" ")));
    match fp_res {
        Some(r) => rec.push_str(&format!("fixed_point_residual = {r}\n")),
        None => rec.push_str("fixed_point_residual = none\n"),
    }
    rec.push_str(&format!("wall_clock_seconds = {elapsed:.3}\n"));
    rec.push_str(&format!("csv = {}\n", csv_path.display()));
    write_text(&dir.join("run-record.txt"), &rec)?;
    print!("{rec}");
    Ok(())
}

// ---------------------------------------------------------------------------
// reproduce-paper
// ---------------------------------------------------------------------------

struct Row {
    label: &'static str,
    expected: String,
    measured: String,
    verdict: &'static str,
}

fn push_row(rows: &mut Vec<Row>, label: &'static str, expected: String, measured: String, pass: bool) {
    rows.push(Row { label, expected, measured, verdict: if pass { "PASS" } else { "FAIL" } });
}

fn push_skip(rows: &mut Vec<Row>, label: &'static str, expected: String) {
    rows.push(Row { label, expected, measured: "-".into(), verdict: "SKIP" });
}

pub fn cmd_reproduce_paper(
    tol: Option<f64>,
    out: Option<&Path>,
    corrupt_f: bool,
) -> Result<(), CliError> {
    let value_tol = tol.unwrap_or(1e-4);
    let constrained_tol = tol.unwrap_or(1e-3);
    if !(value_tol > 0.0) {
        return Err(CliError::Config(format!("--tol must be positive, got {value_tol}")));
    }

    let obj: QuadraticObjective<f64> = if corrupt_f {
        // Negative-control self-test: a deliberately wrong (2,2) entry must
        // fail the sector-constants row and skip the rest.
        QuadraticObjective::new(
            nalgebra::DMatrix::from_row_slice(2, 2, &[100.0, -1.0, -1.0, 2.0]),
            DVector::from_vec(vec![1.0, 10.0]),
        )
        .map_err(map_lib_err)?
    } else {
        QuadraticObjective::reference_example()
    };

    let mut rows: Vec<Row> = Vec::new();
    let (m, l) = obj.sector_constants();
    let sector_ok = (m - 0.9899).abs() <= value_tol && (l - 100.0101).abs() <= value_tol;
    push_row(
        &mut rows,
        "sector constants",
        "(0.9899, 100.0101)".into(),
        format!("({m:.6}, {l:.6})"),
        sector_ok,
    );

    if !sector_ok {
        for label in [
            "triple-momentum design rate",
            "unconstrained optimum",
            "optimal value",
            "constrained optimum",
            "certified rate",
            "fitted rate (unconstrained)",
            "fitted rate (projected)",
            "transformed contraction",
        ] {
            push_skip(&mut rows, label, "-".into());
        }
        return finish_reproduce(rows, value_tol, out);
    }

    let rho_design = 1.0 - (m / l).sqrt();
    push_row(
        &mut rows,
        "triple-momentum design rate",
        "0.9005".into(),
        format!("{rho_design:.6}"),
        (rho_design - 0.9005).abs() <= value_tol,
    );

    let yu = obj.unconstrained_minimizer().map_err(map_lib_err)?;
    push_row(
        &mut rows,
        "unconstrained optimum",
        "(-0.1111, -10.1111)".into(),
        format!("({:.6}, {:.6})", yu[0], yu[1]),
        (yu[0] + 0.1111).abs() <= value_tol && (yu[1] + 10.1111).abs() <= value_tol,
    );

    let f_opt = obj.optimal_value().map_err(map_lib_err)?;
    push_row(
        &mut rows,
        "optimal value",
        "-50.6111".into(),
        format!("{f_opt:.6}"),
        (f_opt + 50.6111).abs() <= value_tol,
    );

    let ball = ConvexSet::ball(DVector::zeros(2), 1.0).map_err(map_lib_err)?;
    let y_con = solve_reference(&obj, &ball, 1e-13).map_err(map_lib_err)?;
    push_row(
        &mut rows,
        "constrained optimum",
        "(-0.0170, -0.9997)".into(),
        format!("({:.6}, {:.6})", y_con[0], y_con[1]),
        (y_con[0] + 0.0170).abs() <= constrained_tol
            && (y_con[1] + 0.9997).abs() <= constrained_tol,
    );

    let form = iqcert::algorithms::triple_momentum(m, l).map_err(map_lib_err)?;
    let spec = MultiplierSpec::WeightedOffByOne { rho_weight: 1.0 };
    match certify_rate(&form, m, l, &spec, 1e-4) {
        Ok((rho, cert)) => {
            push_row(
                &mut rows,
                "certified rate",
                "within (0, 1)".into(),
                format!("{rho:.6}"),
                rho > 0.0 && rho < 1.0,
            );
            let filt = build_filter(&spec.effective_at(rho), m, l).map_err(map_lib_err)?;
            let space = ConvexSet::whole_space(2);
            let run = |set: &ConvexSet<f64>, y_ref: DVector<f64>| {
                let x0 = default_start(&form, set, 2)?;
                let mut o = SimOptions::new(y_ref);
                o.stop_tol = 1e-10;
                o.certificate = Some(cert.clone());
                o.filter = Some(filt.clone());
                simulate(&form, &obj, set, &x0, &o)
            };
            let fit_bound = rho + 0.02;
            for (label, set, y_ref) in [
                ("fitted rate (unconstrained)", &space, yu.clone()),
                ("fitted rate (projected)", &ball, y_con.clone()),
            ] {
                let label: &'static str = label;
                match run(set, y_ref) {
                    Ok(traj) => {
                        match estimate_rate(&traj) {
                            Ok(fit) => push_row(
                                &mut rows,
                                label,
                                format!("<= {fit_bound:.6}, R2 >= 0.99"),
                                format!("{:.6} (R2 = {:.4})", fit.rho_hat, fit.r_squared),
                                fit.rho_hat <= fit_bound && fit.r_squared >= 0.99,
                            ),
                            Err(e) => push_row(
                                &mut rows,
                                label,
                                format!("<= {fit_bound:.6}, R2 >= 0.99"),
                                format!("fit failed: {e}"),
                                false,
                            ),
                        }
                        if label == "fitted rate (projected)" {
                            let worst = traj
                                .t_ratios
                                .iter()
                                .cloned()
                                .fold(f64::NEG_INFINITY, f64::max);
                            let bound = rho * (1.0 + 1e-6);
                            push_row(
                                &mut rows,
                                "transformed contraction",
                                format!("<= {bound:.6}"),
                                format!("{worst:.6}"),
                                worst.is_finite() && worst <= bound,
                            );
                        }
                    }
                    Err(e) => {
                        push_row(
                            &mut rows,
                            label,
                            format!("<= {fit_bound:.6}, R2 >= 0.99"),
                            format!("run failed: {e}"),
                            false,
                        );
                        if label == "fitted rate (projected)" {
                            push_skip(&mut rows, "transformed contraction", "-".into());
                        }
                    }
                }
            }
        }
        Err(e) => {
            push_row(
                &mut rows,
                "certified rate",
                "within (0, 1)".into(),
                format!("certification failed: {e}"),
                false,
            );
            push_skip(&mut rows, "fitted rate (unconstrained)", "-".into());
            push_skip(&mut rows, "fitted rate (projected)", "-".into());
            push_skip(&mut rows, "transformed contraction", "-".into());
        }
    }

    finish_reproduce(rows, value_tol, out)
}

fn finish_reproduce(rows: Vec<Row>, tol: f64, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str(&format!("reproduction report (value tolerance {tol:e})\n"));
    text.push_str(&format!(
        "{:<30} {:<28} {:<34} {}\n",
        "row", "expected", "measured", "verdict"
    ));
    for r in &rows {
        text.push_str(&format!(
            "{:<30} {:<28} {:<34} {}\n",
            r.label, r.expected, r.measured, r.verdict
        ));
    }
    let fails = rows.iter().filter(|r| r.verdict == "FAIL").count();
    let skips = rows.iter().filter(|r| r.verdict == "SKIP").count();
    let passes = rows.len() - fails - skips;
    text.push_str(&format!("summary: {passes} PASS, {fails} FAIL, {skips} SKIP\n"));

    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        write_text(&dir.join("reproduce-report.txt"), &text)?;
    }
    print!("{text}");
    if fails > 0 {
        Err(CliError::PropertyViolation(format!(
            "{fails} reproduction row(s) failed"
        )))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// property-suite
// ---------------------------------------------------------------------------

pub fn cmd_property_suite(seed: u64, counts: usize) -> Result<(), CliError> {
    if counts == 0 {
        return Err(CliError::Config("counts must be at least 1".into()));
    }
    let reports = lemmas::run_all::<f64>(seed, counts).map_err(map_lib_err)?;
    let mut violating = 0usize;
    let mut first_witness: Option<String> = None;
    println!("property suites (seed {seed}, {counts} cases per set type)");
    for r in &reports {
        let passed = r.cases - r.violations;
        println!(
            "{:<48} {:>6}/{:<6} pass   worst slack {:+.3e}   {}",
            r.name,
            passed,
            r.cases,
            r.worst_slack,
            if r.pass() { "PASS" } else { "FAIL" }
        );
        if !r.pass() {
            violating += 1;
            if first_witness.is_none() {
                first_witness = r.witness.clone().map(|w| format!("{}: {w}", r.name));
            }
            if let Some(w) = &r.witness {
                println!("    witness: {w}");
            }
        }
    }
    if violating > 0 {
        Err(CliError::PropertyViolation(format!(
            "{violating} suite(s) reported violations; witness: {}",
            first_witness.unwrap_or_else(|| "<none>".into())
        )))
    } else {
        Ok(())
    }
}
