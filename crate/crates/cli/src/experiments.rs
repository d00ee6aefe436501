//! Config-driven experiments. Each writes CSV (and for training, JSON)
//! files into the output directory and fails with a tolerance error after
//! writing when a check does not hold.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use firing_vq::analytic::{order_by_cost, stability_order, torus_cost, trapezoid_optimum, TorusSolutionType};
use firing_vq::model::{Codebook, FiringModel, InputDensity, InputPoint, LayerKernel, NeighborhoodKernel};
use firing_vq::objective::{
    evaluate, format_float, ExpectationEngine, Reconstruction, ReportOptions, DEFAULT_MAX_PANEL_WIDTH,
};
use firing_vq::stationarity::{optimize_trapezoid_s, solve_codebook_fixed_point, FixedPointConfig};
use firing_vq::topomap::{compose_kernel, encoder_disagreement, is_index_monotone, train, TopoMapState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{
    BoundCheck, ExperimentConfig, GradientCheck, Params, TopomapTrain, TorusCompare, TrapezoidSweep,
};
use crate::error::{CliError, CliResult};
use crate::instances::random_instance;

/// Files written by a run and a one-line summary per check.
#[derive(Debug, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub failures: Vec<String>,
}

impl RunOutcome {
    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.files.push(path);
        Ok(())
    }

    fn check(&mut self, ok: bool, message: String) {
        if !ok {
            self.failures.push(message.clone());
        }
        self.summary.push(format!("[{}] {message}", if ok { "PASS" } else { "FAIL" }));
    }

    /// Turns recorded failures into a tolerance error.
    pub fn into_result(self) -> CliResult<RunOutcome> {
        if self.failures.is_empty() {
            Ok(self)
        } else {
            Err(CliError::Tolerance(self.failures.join("; ")))
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> CliResult<RunOutcome> {
    let mut out = RunOutcome::default();
    match &cfg.params {
        Params::TrapezoidSweep(p) => trapezoid_sweep(p, &cfg.output_dir, &mut out)?,
        Params::TorusCompare(p) => torus_compare(p, cfg.seed, &cfg.output_dir, &mut out)?,
        Params::TopomapTrain(p) => topomap_train(p, cfg.seed, &cfg.output_dir, &mut out)?,
        Params::BoundCheck(p) => bound_check(p, cfg.seed, &cfg.output_dir, &mut out)?,
        Params::GradientCheck(p) => gradient_check(p, cfg.seed, &cfg.output_dir, &mut out)?,
    }
    Ok(out)
}

fn quadrature(nodes_per_panel: usize) -> ExpectationEngine {
    ExpectationEngine::Quadrature {
        nodes_per_panel,
        max_panel_width: DEFAULT_MAX_PANEL_WIDTH,
    }
}

pub const TRAPEZOID_CSV_HEADER: &str = "n,s_star,value,s_analytic,value_analytic,s_abs_err,abs_err";

fn trapezoid_sweep(p: &TrapezoidSweep, dir: &Path, out: &mut RunOutcome) -> CliResult<()> {
    let density = InputDensity::uniform_ring(p.p0, p.length as f64)?;
    let engine = quadrature(p.nodes_per_panel);
    let mut csv = format!("{TRAPEZOID_CSV_HEADER}\n");
    let mut checks = Vec::new();
    for &n in &p.n {
        let (s, value) = optimize_trapezoid_s(&density, FiringModel::independent(n)?, &engine, p.search_tol)?;
        let (s_ref, value_ref) = trapezoid_optimum(n, p.p0)?;
        let s_err = (s - s_ref).abs();
        let v_err = (value - value_ref).abs();
        let _ = writeln!(
            csv,
            "{n},{},{},{},{},{},{}",
            format_float(s),
            format_float(value),
            format_float(s_ref),
            format_float(value_ref),
            format_float(s_err),
            format_float(v_err)
        );
        checks.push((
            s_err <= p.s_tol && v_err <= p.value_tol,
            format!("trapezoid n={n}: s*={s:.6} (err {s_err:.2e}), value={value:.9} (err {v_err:.2e})"),
        ));
    }
    out.write(dir, "trapezoid_sweep.csv", &csv)?;
    for (ok, msg) in checks {
        out.check(ok, msg);
    }
    Ok(())
}

/// Fixed-point codebook for a torus solution type and its `D1 + D2`.
pub fn torus_numeric_cost(
    kind: TorusSolutionType,
    m: usize,
    n: usize,
    engine: &ExpectationEngine,
) -> firing_vq::Result<(f64, Codebook)> {
    let posterior = kind.posterior(m)?;
    let firing = FiringModel::independent(n)?;
    let density = InputDensity::Torus2;
    let sol = solve_codebook_fixed_point(&density, &posterior, firing, engine, &FixedPointConfig::default())?;
    let report = evaluate(&density, &sol.codebook, &posterior, firing, engine, ReportOptions::default())?;
    Ok((report.bound, sol.codebook))
}

pub const TORUS_CSV_HEADER: &str = "kind,M,n,oracle,quadrature,rel_err,monte_carlo,mc_rel_err,mc_std_error";
pub const ORDER_CSV_HEADER: &str = "M,n,analytic_order,numeric_order";

pub fn order_label(order: &[TorusSolutionType]) -> String {
    order.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";")
}

fn torus_compare(p: &TorusCompare, seed: u64, dir: &Path, out: &mut RunOutcome) -> CliResult<()> {
    let engine = quadrature(p.nodes_per_panel);
    let mut csv = format!("{TORUS_CSV_HEADER}\n");
    let mut orders = format!("{ORDER_CSV_HEADER}\n");
    let mut checks = Vec::new();
    for &n in &p.n {
        let mut numeric = Vec::new();
        for kind in TorusSolutionType::ALL {
            let oracle = torus_cost(kind, p.m, n)?;
            let (quad, codebook) = torus_numeric_cost(kind, p.m, n, &engine)?;
            let rel = (quad - oracle).abs() / oracle.abs();
            numeric.push((kind, quad));
            let mut mc_cols = ",,".to_string();
            let mut mc_ok = true;
            if p.mc_samples > 0 {
                let mc_engine = ExpectationEngine::MonteCarlo {
                    samples: p.mc_samples,
                    seed,
                };
                let firing = FiringModel::independent(n)?;
                let r = evaluate(
                    &InputDensity::Torus2,
                    &codebook,
                    &kind.posterior(p.m)?,
                    firing,
                    &mc_engine,
                    ReportOptions::default(),
                )?;
                let mc_rel = (r.bound - oracle).abs() / oracle.abs();
                mc_ok = mc_rel <= p.monte_carlo_tol;
                mc_cols = format!(
                    "{},{},{}",
                    format_float(r.bound),
                    format_float(mc_rel),
                    format_float(r.std_error.unwrap_or(f64::NAN))
                );
            }
            let _ = writeln!(
                csv,
                "{kind},{},{n},{},{},{},{mc_cols}",
                p.m,
                format_float(oracle),
                format_float(quad),
                format_float(rel)
            );
            checks.push((
                rel <= p.quadrature_tol && mc_ok,
                format!("torus {kind} M={} n={n}: oracle {oracle:.9}, quadrature rel err {rel:.2e}", p.m),
            ));
        }
        let analytic = stability_order(p.m, n)?.order;
        let numeric = order_by_cost(&numeric).order;
        let _ = writeln!(orders, "{},{n},{},{}", p.m, order_label(&analytic), order_label(&numeric));
        checks.push((
            analytic == numeric,
            format!("torus order M={} n={n}: {}", p.m, order_label(&numeric)),
        ));
    }
    out.write(dir, "torus_compare.csv", &csv)?;
    out.write(dir, "torus_order.csv", &orders)?;
    for (ok, msg) in checks {
        out.check(ok, msg);
    }
    Ok(())
}

/// Evenly spaced points on the unit interval.
pub fn unit_interval(points: usize) -> InputDensity {
    InputDensity::empirical(
        (0..points)
            .map(|i| InputPoint::new(vec![(i as f64 + 0.5) / points as f64]))
            .collect(),
    )
    .expect("at least one point")
}

pub fn line_kernel(m: usize, half_width: usize) -> firing_vq::Result<NeighborhoodKernel> {
    if half_width == 0 {
        return Ok(NeighborhoodKernel::identity(m));
    }
    Ok(compose_kernel(&LayerKernel::centered_windows(m, half_width)?))
}

pub const TOPOMAP_SUMMARY_HEADER: &str = "seed,monotone,final_distortion,final_max_change,encoder_disagreement";

fn topomap_train(p: &TopomapTrain, seed: u64, dir: &Path, out: &mut RunOutcome) -> CliResult<()> {
    let density = unit_interval(p.points);
    let kernel = line_kernel(p.m, p.half_width)?;
    let probes: Vec<InputPoint> = match &density {
        InputDensity::Empirical { samples } => samples.iter().cloned().map(InputPoint::new).collect(),
        _ => unreachable!("unit interval is empirical"),
    };
    let mut summary = format!("{TOPOMAP_SUMMARY_HEADER}\n");
    let mut ordered = 0usize;
    for r in 0..p.runs {
        let run_seed = seed.wrapping_add(r as u64);
        let state = TopoMapState::around_mean(&density, kernel.clone(), p.step, p.decay, p.spread, run_seed)?;
        let report = train(state, &density, p.epochs, p.samples_per_epoch, run_seed, p.snapshots)?;
        let monotone = is_index_monotone(&report.state.codebook);
        ordered += usize::from(monotone);
        let last = report.trace.last().expect("at least one epoch");
        let disagreement = encoder_disagreement(&report.state, &probes)?;
        let _ = writeln!(
            summary,
            "{run_seed},{monotone},{},{},{}",
            format_float(last.distortion),
            format_float(last.max_change),
            format_float(disagreement)
        );
        out.write(dir, &format!("topomap_distortion_seed{run_seed}.csv"), &report.distortion_csv())?;
        out.write(dir, &format!("topomap_state_seed{run_seed}.json"), &to_json(&report.state)?)?;
        if p.snapshots {
            out.write(dir, &format!("topomap_snapshots_seed{run_seed}.json"), &to_json(&report.snapshots)?)?;
        }
    }
    out.write(dir, "topomap_summary.csv", &summary)?;
    let fraction = ordered as f64 / p.runs as f64;
    out.check(
        fraction >= p.min_ordered_fraction,
        format!("topomap ordering: {ordered}/{} runs index-monotone", p.runs),
    );
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Serialize(e.to_string()))
}

pub const BOUND_CSV_HEADER: &str = "instance,M,n,dim,points,d1,d2,bound,dvq_mean,dvq_optimal,ok";

fn bound_check(p: &BoundCheck, seed: u64, dir: &Path, out: &mut RunOutcome) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = format!("{BOUND_CSV_HEADER}\n");
    let mut passed = 0usize;
    for i in 0..p.instances {
        let mut inst = random_instance(&mut rng, p.limits());
        if p.corrupt_codebook {
            inst = inst.corrupted();
        }
        let report = evaluate(
            &inst.density,
            &inst.codebook,
            &inst.posterior,
            inst.firing,
            &ExpectationEngine::Enumerate,
            ReportOptions::default(),
        )?;
        let mean = inst.dvq(Reconstruction::MeanOfEvents)?;
        let optimal = inst.dvq(Reconstruction::OptimalConditionalMean)?;
        let ok = (mean - report.bound).abs() <= p.tol && optimal <= report.bound + p.tol;
        passed += usize::from(ok);
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{},{},{},{},{},{ok}",
            inst.codebook.m(),
            inst.firing.n(),
            inst.density.dim(),
            match &inst.density {
                InputDensity::Empirical { samples } => samples.len(),
                _ => 0,
            },
            format_float(report.d1),
            format_float(report.d2),
            format_float(report.bound),
            format_float(mean),
            format_float(optimal)
        );
    }
    out.write(dir, "bound_check.csv", &csv)?;
    out.check(
        passed == p.instances,
        format!("bound check: {passed}/{} instances within {:e}", p.instances, p.tol),
    );
    Ok(())
}

pub const GRADIENT_CSV_HEADER: &str = "instance,M,n,dim,codebook_rel_err,logit_rel_err,ok";

fn gradient_check(p: &GradientCheck, seed: u64, dir: &Path, out: &mut RunOutcome) -> CliResult<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = format!("{GRADIENT_CSV_HEADER}\n");
    let mut worst = 0.0f64;
    let mut passed = 0usize;
    for i in 0..p.instances {
        let inst = random_instance(&mut rng, p.limits());
        let (cb_err, logit_err) = inst.gradient_errors(p.step)?;
        let ok = cb_err <= p.tol && logit_err <= p.tol;
        passed += usize::from(ok);
        worst = worst.max(cb_err).max(logit_err);
        let _ = writeln!(
            csv,
            "{i},{},{},{},{},{},{ok}",
            inst.codebook.m(),
            inst.firing.n(),
            inst.density.dim(),
            format_float(cb_err),
            format_float(logit_err)
        );
    }
    out.write(dir, "gradient_check.csv", &csv)?;
    out.check(
        passed == p.instances,
        format!("gradient check: {passed}/{} instances, worst relative error {worst:.2e}", p.instances),
    );
    Ok(())
}
