use std::path::PathBuf;

use prbox_core::chsh::no_signaling_report;
use prbox_core::{
    chsh_tables, frft_distance, maximize_s, mc_bell_s, plan_lens_system, pr_fidelity, quantum_reference_curve,
    sweep_beta, tune_r, Party, SettingPair,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{emit, format_number, Cell, Report, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sweep,
    Chsh,
    Mc,
    PlanFrft,
    Optimize,
}

/// Largest tolerated violation of `P_AND = (4 + S) / 8` in emitted reports.
const AND_IDENTITY_TOL: f64 = 1e-9;

fn state_meta(report: Report, config: &RunConfig) -> CliResult<Report> {
    let state = config.state()?;
    Ok(report
        .with("delta", state.delta())
        .with("gamma", state.gamma())
        .with("scale_s_mm", state.scale_s())
        .with("swap_widths", config.state.swap_widths))
}

fn settings_meta(report: Report, config: &RunConfig) -> Report {
    let s = &config.settings;
    report
        .with("alpha_rad", s.alpha)
        .with("alpha_prime_rad", s.alpha_prime)
        .with("beta_rad", s.beta)
        .with("beta_prime_rad", s.beta_prime)
}

/// One `E(alpha, beta)` curve per `(alpha, r)` pair, plus the reference
/// sinusoid when requested. Returns `(file stem, report)` pairs.
pub fn sweep(config: &RunConfig) -> CliResult<Vec<(String, Report)>> {
    let state = config.state()?;
    let grid = config.beta_grid();
    let precision = config.output.precision;
    let mut out = Vec::new();
    for (label, alpha) in [("alpha", config.settings.alpha), ("alpha_prime", config.settings.alpha_prime)] {
        for r in config.r_values(&state)? {
            let curve = sweep_beta(&state, alpha, r, &grid)?;
            let mut table = Table::new(&["beta_rad", "E", "alpha_rad", "r"]);
            for point in curve {
                table.push(vec![point.beta.into(), point.value.into(), alpha.into(), r.into()]);
            }
            let report = state_meta(Report::new("sweep", table), config)?.with("alpha_rad", alpha).with("r", r);
            out.push((format!("E_{label}_r{}", format_number(r, precision)), report));
        }
    }
    if config.sweep.reference {
        let curve = quantum_reference_curve(&grid, config.sweep.reference_phase)?;
        let mut table = Table::new(&["beta_rad", "E"]);
        for point in curve {
            table.push(vec![point.beta.into(), point.value.into()]);
        }
        out.push((
            "reference".to_string(),
            Report::new("reference", table).with("phase_rad", config.sweep.reference_phase),
        ));
    }
    Ok(out)
}

pub fn chsh(config: &RunConfig) -> CliResult<Report> {
    let state = config.state()?;
    let mut header = vec!["r", "r_mm", "H_ave_pct", "E_ab", "E_apb", "E_abp", "E_apbp", "S", "P_AND", "fidelity"];
    let marginal_names: Vec<String> = [Party::Alice, Party::Bob]
        .iter()
        .flat_map(|party| {
            let name = if *party == Party::Alice { "alice" } else { "bob" };
            SettingPair::ALL.iter().map(move |pair| format!("{name}_plus_{}", pair.key()))
        })
        .collect();
    header.extend(marginal_names.iter().map(String::as_str));
    let mut table = Table::new(&header);

    for r in config.r_values(&state)? {
        let settings = config.measurement_settings(r)?;
        let tables = chsh_tables(&state, &settings)?;
        let s = tables.bell_s();
        let p_and = tables.and_gate_success();
        let fidelity = pr_fidelity(s);
        if (p_and - fidelity).abs() > AND_IDENTITY_TOL {
            return Err(CliError::Numerical(format!("P_AND = {p_and} disagrees with (4 + S)/8 = {fidelity} at r = {r}")));
        }
        let mut row: Vec<Cell> = vec![r.into(), (r * state.scale_s()).into(), (100.0 * tables.mean_kept_fraction()).into()];
        row.extend(tables.correlations().iter().map(|&e| Cell::Num(e)));
        row.extend([s.into(), p_and.into(), fidelity.into()]);
        let report = no_signaling_report(&state, &settings)?;
        for party in [Party::Alice, Party::Bob] {
            row.extend(SettingPair::ALL.iter().map(|&pair| Cell::Num(report.get(party, pair))));
        }
        table.push(row);
    }
    Ok(settings_meta(state_meta(Report::new("chsh", table), config)?, config))
}

pub fn mc(config: &RunConfig) -> CliResult<Report> {
    let state = config.state()?;
    let mut table = Table::new(&[
        "r",
        "setting",
        "alpha_rad",
        "beta_rad",
        "seed",
        "n_total",
        "kept",
        "p_pp",
        "p_pm",
        "p_mp",
        "p_mm",
        "se_pp",
        "se_pm",
        "se_mp",
        "se_mm",
        "kept_fraction",
        "kept_fraction_se",
        "E",
        "E_se",
        "alice_plus",
        "alice_plus_se",
        "bob_plus",
        "bob_plus_se",
        "S",
        "S_se",
    ]);
    for r in config.r_values(&state)? {
        let settings = config.measurement_settings(r)?;
        let bell = mc_bell_s(&state, &settings, config.mc.n, config.mc.seed)?;
        for ((pair, est), (_, alpha, beta)) in bell.estimates.iter().zip(settings.pairs()) {
            let t = &est.table;
            table.push(vec![
                r.into(),
                pair.key().into(),
                alpha.into(),
                beta.into(),
                est.seed.into(),
                est.n_total.into(),
                est.kept.into(),
                t.p_pp.into(),
                t.p_pm.into(),
                t.p_mp.into(),
                t.p_mm.into(),
                est.se_pp.into(),
                est.se_pm.into(),
                est.se_mp.into(),
                est.se_mm.into(),
                t.kept_fraction.into(),
                est.kept_fraction_se.into(),
                est.e.into(),
                est.e_se.into(),
                t.alice_plus().into(),
                est.alice_plus_se().into(),
                t.bob_plus().into(),
                est.bob_plus_se().into(),
                bell.s.into(),
                bell.se.into(),
            ]);
        }
    }
    let report = state_meta(Report::new("mc", table), config)?.with("n", config.mc.n).with("seed", config.mc.seed);
    Ok(settings_meta(report, config))
}

pub fn plan_frft(config: &RunConfig) -> CliResult<Report> {
    let plan = &config.plan;
    let mut table = Table::new(&["angle_rad", "f_cm", "z_cm"]);
    if !plan.stages.is_empty() {
        for &(theta, f) in &plan.stages {
            table.push(vec![theta.into(), f.into(), frft_distance(theta, f)?.into()]);
        }
        return Ok(Report::new("frft_table", table));
    }
    let target = plan.target.ok_or_else(|| CliError::Config("`target`: missing (or give `stages`)".into()))?;
    let result = plan_lens_system(target, &plan.inventory, plan.max_stages, plan.angle_tol)?;
    for stage in &result.stages {
        table.push(vec![stage.order.into(), stage.focal_cm.into(), stage.z_cm.into()]);
    }
    Ok(Report::new("frft_plan", table)
        .with("target_rad", result.target_order)
        .with("composed_rad", result.composed_order())
        .with("deviation_rad", result.deviation())
        .with("total_z_cm", result.total_z_cm()))
}

pub fn optimize(config: &RunConfig, invocation: &str) -> CliResult<Report> {
    let state = config.state()?;
    let opt = &config.optimize;
    let mut table = Table::new(&[
        "r",
        "alpha_rad",
        "alpha_prime_rad",
        "beta_rad",
        "beta_prime_rad",
        "S",
        "fidelity",
        "iterations",
        "converged",
        "r_star",
        "command",
    ]);
    for r in config.r_values(&state)? {
        let res = maximize_s(&state, r, opt.grid_step, opt.refine_tol)?;
        let r_star = match opt.target_fidelity {
            Some(target) => Some(tune_r(&state, &res.settings, target, opt.r_max)?),
            None => None,
        };
        let s = &res.settings;
        table.push(vec![
            r.into(),
            s.alpha.into(),
            s.alpha_prime.into(),
            s.beta.into(),
            s.beta_prime.into(),
            res.objective.into(),
            pr_fidelity(res.objective).into(),
            res.iterations.into(),
            res.converged.into(),
            r_star.into(),
            invocation.into(),
        ]);
    }
    let report = state_meta(Report::new("optimize", table), config)?
        .with("grid_step_rad", opt.grid_step)
        .with("refine_tol", opt.refine_tol)
        .with("target_fidelity", opt.target_fidelity)
        .with("command", invocation);
    Ok(report)
}

/// Runs `command` and writes its output. Sweeps write one file per curve into
/// the output directory; other commands write a single file, or stdout.
pub fn run(command: Command, config: &RunConfig, invocation: &str) -> CliResult<()> {
    let format = config.output.format;
    let precision = config.output.precision;
    let path = config.output.path.as_deref();
    let single = match command {
        Command::Sweep => {
            let dir: PathBuf = path
                .ok_or_else(|| CliError::Config("`path`: sweep needs an output directory (--out or path)".into()))?
                .to_path_buf();
            let curves = sweep(config)?;
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            for (stem, report) in curves {
                let file = dir.join(format!("{stem}.{}", format.extension()));
                emit(&report.render(format, precision)?, Some(&file))?;
            }
            return Ok(());
        }
        Command::Chsh => chsh(config)?,
        Command::Mc => mc(config)?,
        Command::PlanFrft => plan_frft(config)?,
        Command::Optimize => optimize(config, invocation)?,
    };
    emit(&single.render(format, precision)?, path)
}
