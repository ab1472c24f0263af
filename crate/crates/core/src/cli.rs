//! `kgwall` command line.
//!
//! Exit codes: 0 success, 1 operational error (I/O, solver), 2 invalid
//! configuration or arguments, 3 the run finished but its verdict failed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::{parse_config, ConfigError, MassCase, SimulationConfig};
use crate::energy::{l2_norm, reflection_coefficient, EnergyMeter, EnergyRecord};
use crate::error::KgError;
use crate::grid::Grid1D;
use crate::harness::{
    consistency_experiment, existence_experiment, figure1_config, run_wall_effect, theory_config,
    uniqueness_experiment, ConvergenceReport, EpsilonNetPlan, NormKind, WallEffect, FIGURE1_TIMES,
};
use crate::io::{
    net_plot_script, resolve_output_dir, snapshot_file_name, snapshot_plot_script,
    write_energy_csv, write_json, write_snapshot_csv, write_table_csv, write_text, OutputError,
    RunDir,
};
use crate::mass::{moderateness_exponent, BoundedProfile, Perturbation};
use crate::propagation::{evolve_observed, initial_bump, FieldState, SchemeId};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OPERATIONAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_VERDICT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "kgwall",
    version,
    about = "Klein-Gordon equation with singular mass"
)]
struct Cli {
    /// Output directory (overrides KGWALL_OUTPUT_DIR and the config value).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    L2,
    Triple,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L2 => NormKind::L2,
            NormArg::Triple => NormKind::Triple,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Exponential,
    Power,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration: snapshots, energy trace, summary.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Existence experiment and moderateness of the mass net along an eps ladder.
    Sweep {
        /// 1 zero mass, 2 delta, 3 delta squared.
        #[arg(long)]
        case: u8,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_enum, default_value = "triple")]
        norm: NormArg,
        /// Base configuration; defaults to the bump problem with the spectral scheme.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sensitivity of u_eps to a negligible (or power-law) change of m_eps.
    Uniqueness {
        #[arg(long)]
        case: u8,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        #[arg(long, value_enum, default_value = "exponential")]
        mode: ModeArg,
        /// Exponent of the power-mode perturbation.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, value_enum, default_value = "l2")]
        norm: NormArg,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Convergence to the classical solution for a bounded mass.
    Consistency {
        /// JSON file holding a bounded mass profile; defaults to a smooth hump at x = 40.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        eps: Vec<f64>,
        #[arg(long, value_enum, default_value = "l2")]
        norm: NormArg,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Three-case wall-effect reproduction at the published steps.
    Figure1 {
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        /// Skip the spectral-scheme cross-check.
        #[arg(long)]
        no_cross_check: bool,
    },
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Operational(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Operational(_) => EXIT_OPERATIONAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Operational(m) => m,
        }
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        Failure::Operational(e.to_string())
    }
}

impl From<KgError> for Failure {
    fn from(e: KgError) -> Self {
        Failure::Operational(e.to_string())
    }
}

fn invalid(context: &str) -> impl FnOnce(KgError) -> Failure + '_ {
    move |e| Failure::Validation(format!("{context}: {e}"))
}

fn config_failure(source: &str, e: ConfigError) -> Failure {
    Failure::Validation(format!("{source}: {e}"))
}

type Outcome = Result<bool, Failure>;

/// Parses `argv` (including the program name) and runs the command.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
        }
    };
    let out = cli.out.as_deref();
    let result = match cli.command {
        Command::Run { config } => cmd_run(&config, out),
        Command::Sweep {
            case,
            eps,
            norm,
            config,
        } => cmd_sweep(case, eps, norm.into(), config.as_deref(), out),
        Command::Uniqueness {
            case,
            eps,
            mode,
            p,
            norm,
            config,
        } => {
            let perturbation = match mode {
                ModeArg::Exponential => Perturbation::Exponential,
                ModeArg::Power => Perturbation::RelativePower { p },
            };
            cmd_uniqueness(case, eps, perturbation, norm.into(), config.as_deref(), out)
        }
        Command::Consistency {
            profile,
            eps,
            norm,
            config,
        } => cmd_consistency(profile.as_deref(), eps, norm.into(), config.as_deref(), out),
        Command::Figure1 {
            eps,
            no_cross_check,
        } => cmd_figure1(eps, !no_cross_check, out),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("verdict: FAIL");
            EXIT_VERDICT
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

fn load_config(path: &Path) -> Result<SimulationConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Operational(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| config_failure(&path.display().to_string(), e))
}

fn case_from_number(case: u8) -> Result<MassCase, Failure> {
    MassCase::from_number(case)
        .ok_or_else(|| Failure::Validation(format!("--case: expected 1, 2 or 3, got {case}")))
}

fn base_config(
    path: Option<&Path>,
    case: MassCase,
    eps: &[f64],
) -> Result<SimulationConfig, Failure> {
    let mut cfg = match path {
        Some(p) => load_config(p)?,
        None => theory_config(case, eps[0]),
    };
    cfg.mass_case = case;
    if case != MassCase::Bounded {
        cfg.bounded_profile = None;
    }
    cfg.epsilon = eps[0];
    cfg.epsilons = Some(eps.to_vec());
    cfg.snapshot_times = vec![cfg.t_final];
    cfg.validate()
        .map_err(|e| config_failure("--eps/--case", e))?;
    Ok(cfg)
}

fn report_rows(report: &ConvergenceReport) -> Vec<Vec<Option<f64>>> {
    report
        .eps
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            vec![
                Some(e),
                Some(report.norms[i]),
                report.differences.get(i).copied(),
            ]
        })
        .collect()
}

fn write_report(
    dir: &RunDir,
    title: &str,
    report: &ConvergenceReport,
    hash: &str,
) -> Result<(), Failure> {
    write_table_csv(
        &dir.join("net.csv"),
        &["eps", "norm", "difference"],
        &report_rows(report),
        hash,
    )?;
    write_text(
        &dir.join("plot.gp"),
        &net_plot_script(title, "net.csv", hash),
    )?;
    Ok(())
}

fn print_report(report: &ConvergenceReport) {
    for (i, e) in report.eps.iter().enumerate() {
        match report.differences.get(i) {
            Some(d) => println!(
                "eps = {e:<8} norm = {:.6e}  difference = {d:.6e}",
                report.norms[i]
            ),
            None => println!("eps = {e:<8} norm = {:.6e}", report.norms[i]),
        }
    }
    if let Some(f) = report.fit {
        println!(
            "fitted exponent = {:.4} (residual {:.2e})",
            f.exponent, f.residual
        );
    }
    println!("verdict: {}", if report.verdict { "PASS" } else { "FAIL" });
}

/// `sqrt(||u||^2 + ||v||^2)`.
fn state_norm(s: &FieldState, grid: &Grid1D) -> f64 {
    let u = l2_norm(&s.u, grid).unwrap_or(f64::NAN);
    let v = l2_norm(&s.v, grid).unwrap_or(f64::NAN);
    u.hypot(v)
}

fn cmd_run(path: &Path, out: Option<&Path>) -> Outcome {
    let cfg = load_config(path)?;
    let hash = cfg.config_hash();
    let grid = cfg.grid().map_err(invalid("length/n"))?;
    let mass = cfg
        .regularized_mass(cfg.epsilon, &grid)
        .map_err(invalid("epsilon"))?;
    let s0 = initial_bump(&grid).map_err(invalid("length"))?;
    let dir = RunDir::acquire(resolve_output_dir(out, cfg.output_dir.as_deref()))?;

    let mut meter = EnergyMeter::new(&grid, cfg.alpha).map_err(invalid("alpha"))?;
    let mut records: Vec<EnergyRecord> = Vec::new();
    let mut norms = Vec::new();
    let mut meter_error = None;
    let ev = evolve_observed(
        &s0,
        &mass,
        cfg.scheme,
        cfg.dt,
        cfg.t_final,
        cfg.alpha,
        &grid,
        &cfg.snapshot_times,
        |s| match meter.measure(s, &mass) {
            Ok(r) => {
                records.push(r);
                norms.push(state_norm(s, &grid));
            }
            Err(e) => meter_error = Some(e),
        },
    )
    .map_err(|e| match e {
        KgError::UnsupportedScheme { .. } => Failure::Validation(format!("scheme/dt: {e}")),
        other => Failure::Operational(other.to_string()),
    })?;
    if let Some(e) = meter_error {
        return Err(e.into());
    }

    let mut files = Vec::new();
    let mut reflections = Vec::new();
    for (state, &t_req) in ev.snapshots.iter().zip(&cfg.snapshot_times) {
        let name = snapshot_file_name(t_req);
        write_snapshot_csv(&dir.join(&name), state, &grid, &hash)?;
        files.push((t_req, name));
        let r =
            reflection_coefficient(state, cfg.barrier(), &grid).map_err(invalid("barrier_x"))?;
        reflections.push(json!({"t": state.t, "reflection": r.reflection, "left_mass": r.left_mass, "right_mass": r.right_mass}));
    }
    write_energy_csv(&dir.join("energy.csv"), &records, &hash)?;
    write_text(
        &dir.join("plot.gp"),
        &snapshot_plot_script("u(x, t)", &files, &hash),
    )?;
    write_text(&dir.join("config.json"), &(cfg.to_json() + "\n"))?;

    let e0 = records[0].total;
    let drift = records
        .iter()
        .map(|r| {
            if e0 > 0.0 {
                (r.total - e0).abs() / e0
            } else {
                (r.total - e0).abs()
            }
        })
        .fold(0.0_f64, f64::max);
    let growth = norms.iter().fold(0.0_f64, |a, &b| a.max(b)) / norms[0].max(f64::MIN_POSITIVE);
    let (criterion, verdict) = match cfg.scheme {
        SchemeId::SpectralStrang => (
            "energy_drift <= tolerances.energy_rel",
            drift <= cfg.tolerances.energy_rel,
        ),
        SchemeId::ImplicitFd => (
            "norm_growth <= tolerances.stability_factor",
            growth <= cfg.tolerances.stability_factor,
        ),
    };
    let summary = json!({
        "config_hash": hash,
        "scheme": cfg.scheme,
        "mass_case": cfg.mass_case,
        "epsilon": cfg.epsilon,
        "dt_requested": ev.plan.dt_requested,
        "dt": ev.plan.dt,
        "steps": ev.plan.steps,
        "snapshot_offsets": ev.plan.offsets,
        "energy_initial": e0,
        "energy_drift": drift,
        "norm_growth": growth,
        "reflections": reflections,
        "criterion": criterion,
        "verdict": verdict,
    });
    write_json(&dir.join("summary.json"), &summary)?;
    println!(
        "{}: {} steps of {}, energy drift {:.3e}, norm growth {:.3}",
        dir.path().display(),
        ev.plan.steps,
        cfg.scheme,
        drift,
        growth
    );
    Ok(verdict)
}

fn cmd_sweep(
    case: u8,
    eps: Vec<f64>,
    norm: NormKind,
    config: Option<&Path>,
    out: Option<&Path>,
) -> Outcome {
    let case = case_from_number(case)?;
    let cfg = base_config(config, case, &eps)?;
    let hash = cfg.config_hash();
    let grid = cfg.grid().map_err(invalid("length/n"))?;
    let moderate =
        moderateness_exponent(&cfg.mass_spec(), &eps, &grid).map_err(invalid("--eps"))?;
    let plan = EpsilonNetPlan::new(eps, cfg.clone(), norm).map_err(invalid("--eps"))?;
    let dir = RunDir::acquire(resolve_output_dir(out, cfg.output_dir.as_deref()))?;
    let report = existence_experiment(&plan)?;

    let nominal = cfg.mass_spec().nominal_order();
    let moderate_ok = (moderate.exponent - nominal).abs() <= cfg.tolerances.exponent_margin;
    let verdict = moderate_ok && report.verdict;
    write_report(&dir, "existence", &report, &hash)?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "config_hash": hash,
            "moderateness": moderate,
            "moderateness_nominal": nominal,
            "moderateness_verdict": moderate_ok,
            "existence": report,
            "verdict": verdict,
        }),
    )?;
    println!(
        "moderateness exponent = {:.4} (nominal {nominal})",
        moderate.exponent
    );
    print_report(&report);
    Ok(verdict)
}

fn cmd_uniqueness(
    case: u8,
    eps: Vec<f64>,
    perturbation: Perturbation,
    norm: NormKind,
    config: Option<&Path>,
    out: Option<&Path>,
) -> Outcome {
    let case = case_from_number(case)?;
    if let Perturbation::RelativePower { p } = perturbation {
        if !(p.is_finite() && p > 0.0) {
            return Err(Failure::Validation(format!(
                "--p: must be positive, got {p}"
            )));
        }
    }
    let cfg = base_config(config, case, &eps)?;
    let hash = cfg.config_hash();
    let plan = EpsilonNetPlan::new(eps, cfg.clone(), norm).map_err(invalid("--eps"))?;
    let dir = RunDir::acquire(resolve_output_dir(out, cfg.output_dir.as_deref()))?;
    let report = uniqueness_experiment(&plan, perturbation)?;
    write_report(&dir, "uniqueness", &report, &hash)?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "config_hash": hash,
            "uniqueness": report,
            "relative_differences": report.relative_differences(),
            "verdict": report.verdict,
        }),
    )?;
    print_report(&report);
    Ok(report.verdict)
}

fn default_profile() -> BoundedProfile {
    BoundedProfile::Hump {
        center: 40.0,
        half_width: 1.0,
        height: 1.0,
    }
}

fn cmd_consistency(
    profile: Option<&Path>,
    eps: Vec<f64>,
    norm: NormKind,
    config: Option<&Path>,
    out: Option<&Path>,
) -> Outcome {
    let profile = match profile {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Operational(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<BoundedProfile>(&text)
                .map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))?
        }
        None => default_profile(),
    };
    let mut cfg = match config {
        Some(p) => load_config(p)?,
        None => theory_config(MassCase::Bounded, eps[0]),
    };
    cfg.bounded_profile = Some(profile.clone());
    let cfg = base_config_bounded(cfg, &eps)?;
    let hash = cfg.config_hash();
    let plan = EpsilonNetPlan::new(eps, cfg.clone(), norm).map_err(invalid("--eps/--profile"))?;
    let dir = RunDir::acquire(resolve_output_dir(out, cfg.output_dir.as_deref()))?;
    let report = consistency_experiment(&profile, &plan)?;
    write_report(&dir, "consistency", &report, &hash)?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "config_hash": hash,
            "profile": profile,
            "consistency": report,
            "verdict": report.verdict,
        }),
    )?;
    print_report(&report);
    Ok(report.verdict)
}

fn base_config_bounded(
    mut cfg: SimulationConfig,
    eps: &[f64],
) -> Result<SimulationConfig, Failure> {
    cfg.mass_case = MassCase::Bounded;
    cfg.epsilon = eps[0];
    cfg.epsilons = Some(eps.to_vec());
    cfg.snapshot_times = vec![cfg.t_final];
    cfg.validate()
        .map_err(|e| config_failure("--eps/--profile", e))?;
    Ok(cfg)
}

fn wall_summary(w: &WallEffect) -> serde_json::Value {
    let reflections: Vec<_> = w
        .snapshots
        .iter()
        .map(|s| json!({"t": s.t, "reflection": s.scatter.reflection, "left_mass": s.scatter.left_mass, "right_mass": s.scatter.right_mass}))
        .collect();
    json!({
        "config_hash": w.config.config_hash(),
        "scheme": w.config.scheme,
        "dt": w.config.dt,
        "reflections": reflections,
        "reflection_final": w.reflection_at(w.config.t_final),
        "centroid_drift_8_8": w.centroid_drift(8.8),
        "centroid_drift_10_2": w.centroid_drift(10.2),
        "reverses": w.reverses_between(8.8, 10.2),
    })
}

fn wall_verdict(runs: &[WallEffect]) -> bool {
    let r = |i: usize| runs[i].reflection_at(12.0).unwrap_or(f64::NAN);
    r(2) > r(1) && runs[2].reverses_between(8.8, 10.2)
}

fn cmd_figure1(eps: f64, cross_check: bool, out: Option<&Path>) -> Outcome {
    let cases = [MassCase::Zero, MassCase::Delta, MassCase::DeltaSquared];
    let configs: Vec<SimulationConfig> = cases
        .iter()
        .map(|&c| figure1_config(c, eps, SchemeId::ImplicitFd))
        .collect();
    for cfg in &configs {
        cfg.validate().map_err(|e| config_failure("--eps", e))?;
    }
    let dir = RunDir::acquire(resolve_output_dir(out, None))?;
    let mut runs = Vec::new();
    for cfg in configs {
        let number = cfg.mass_case.number().expect("wall-effect case");
        let w = run_wall_effect(cfg)?;
        let grid = w.config.grid()?;
        let hash = w.config.config_hash();
        let sub = dir.subdir(&format!("case{number}"))?;
        let mut files = Vec::new();
        for (snap, &t) in w.snapshots.iter().zip(&FIGURE1_TIMES) {
            let name = snapshot_file_name(t);
            write_snapshot_csv(&sub.join(&name), &snap.state, &grid, &hash)?;
            files.push((t, name));
        }
        write_text(
            &sub.join("plot.gp"),
            &snapshot_plot_script(&format!("case {number}, eps = {eps}"), &files, &hash),
        )?;
        write_text(&sub.join("config.json"), &(w.config.to_json() + "\n"))?;
        println!(
            "case {number}: R(12) = {:.4}, left bump reverses between 8.8 and 10.2: {}",
            w.reflection_at(12.0).unwrap_or(f64::NAN),
            w.reverses_between(8.8, 10.2)
        );
        runs.push(w);
    }
    let verdict = wall_verdict(&runs);

    let mut cross = serde_json::Value::Null;
    if cross_check {
        let strang = cases
            .iter()
            .map(|&c| run_wall_effect(figure1_config(c, eps, SchemeId::SpectralStrang)))
            .collect::<crate::error::Result<Vec<_>>>()?;
        let s_verdict = wall_verdict(&strang);
        println!(
            "spectral cross-check: R(12) = {:.4} / {:.4} / {:.4}, ordering and reversal: {}",
            strang[0].reflection_at(12.0).unwrap_or(f64::NAN),
            strang[1].reflection_at(12.0).unwrap_or(f64::NAN),
            strang[2].reflection_at(12.0).unwrap_or(f64::NAN),
            s_verdict
        );
        cross = json!({
            "case1": wall_summary(&strang[0]),
            "case2": wall_summary(&strang[1]),
            "case3": wall_summary(&strang[2]),
            "verdict": s_verdict,
        });
    }
    write_json(
        &dir.join("summary.json"),
        &json!({
            "epsilon": eps,
            "snapshot_times": FIGURE1_TIMES,
            "case1": wall_summary(&runs[0]),
            "case2": wall_summary(&runs[1]),
            "case3": wall_summary(&runs[2]),
            "criterion": "R_case3(12) > R_case2(12) and the case-3 left bump reverses between t = 8.8 and 10.2",
            "verdict": verdict,
            "spectral_cross_check": cross,
        }),
    )?;
    Ok(verdict)
}
