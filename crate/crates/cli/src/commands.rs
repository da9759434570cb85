use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};
use spinwire_core::chain::{build_ideal, ideal_reference, AlphaMode, Protocol};
use spinwire_core::ensemble::{
    success_probability_gap, sweep_1d, sweep_grid, DisorderAxis, EnsembleStats, Executor, Moments,
    SweepConfig, SweepResult,
};
use spinwire_core::fitting::{
    fit_protocol, AmplitudeRule, FitOptions, FitResult, FitSample, FitTarget, ScalingModel,
};

use crate::config::{ExperimentConfig, SweepMode, TargetChoice};
use crate::error::{CliError, CliResult};
use crate::table::{fmt_f64, sweep_header, sweep_row, write_table, TableData};

#[derive(Debug, Clone, Serialize)]
pub struct IdealRow {
    pub protocol: Protocol,
    pub n: usize,
    pub alpha: Option<f64>,
    pub p_id: f64,
    pub phi_id: f64,
    pub tau: f64,
}

pub fn cmd_ideal(cfg: &ExperimentConfig) -> CliResult<Vec<IdealRow>> {
    cfg.validate_common()?;
    let alpha = cfg.alpha_mode()?;
    let mut rows = Vec::new();
    for &n in &cfg.n {
        for &protocol in &cfg.protocols {
            let ideal = build_ideal(protocol, n, cfg.epsilon, alpha)?;
            let r = ideal_reference(&ideal)?;
            rows.push(IdealRow {
                protocol,
                n,
                alpha: ideal.protocol.alpha(),
                p_id: r.p,
                phi_id: r.phi,
                tau: r.tau,
            });
        }
    }
    Ok(rows)
}

pub fn render_ideal(rows: &[IdealRow]) -> String {
    let mut out = format!(
        "{:<17} {:>4} {:>10} {:>12} {:>10} {:>10}\n",
        "protocol", "N", "alpha", "p_id", "phi_id", "tau"
    );
    for r in rows {
        let alpha = r.alpha.map_or("-".to_string(), |a| format!("{a:.6}"));
        out.push_str(&format!(
            "{:<17} {:>4} {:>10} {:>12.9} {:>10.6} {:>10.4}\n",
            r.protocol.name(),
            r.n,
            alpha,
            r.p_id,
            r.phi_id,
            r.tau
        ));
    }
    let tau = |p: Protocol, n: usize| {
        rows.iter()
            .find(|r| r.protocol == p && r.n == n)
            .map(|r| r.tau)
    };
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.dedup();
    for n in ns {
        if let (Some(ts), Some(to)) = (
            tau(Protocol::SpinAnalogue, n),
            tau(Protocol::OptimalCoupling, n),
        ) {
            out.push_str(&format!("N={n}: tau_s / tau_o = {:.4}\n", ts / to));
        }
    }
    out
}

fn sweep_config(cfg: &ExperimentConfig, protocol: Protocol, alpha: AlphaMode) -> SweepConfig {
    SweepConfig {
        protocol,
        alpha,
        epsilon: cfg.epsilon,
        realizations: cfg.realizations,
        master_seed: cfg.seed,
        plan: cfg.plan(),
    }
}

/// One sweep together with the label used in its file name.
#[derive(Debug, Clone)]
pub struct LabeledSweep {
    pub protocol: Protocol,
    pub label: &'static str,
    pub result: SweepResult,
}

pub fn run_sweeps(cfg: &ExperimentConfig, executor: &dyn Executor) -> CliResult<Vec<LabeledSweep>> {
    cfg.validate_sweep()?;
    let alpha = cfg.alpha_mode()?;
    let mut out = Vec::new();
    for &protocol in &cfg.protocols {
        let sc = sweep_config(cfg, protocol, alpha);
        match cfg.sweep.mode {
            SweepMode::Separate => {
                let along_j = sweep_1d(
                    &sc,
                    &cfg.n,
                    DisorderAxis::OffDiagonal,
                    &cfg.sweep.sigma_j,
                    executor,
                )?;
                out.push(LabeledSweep {
                    protocol,
                    label: "sigma-j",
                    result: along_j,
                });
                let along_eps = sweep_1d(
                    &sc,
                    &cfg.n,
                    DisorderAxis::Diagonal,
                    &cfg.sweep.sigma_eps,
                    executor,
                )?;
                out.push(LabeledSweep {
                    protocol,
                    label: "sigma-eps",
                    result: along_eps,
                });
            }
            SweepMode::Grid => {
                let grid = sweep_grid(
                    &sc,
                    &cfg.n,
                    &cfg.sweep.sigma_j,
                    &cfg.sweep.sigma_eps,
                    executor,
                )?;
                out.push(LabeledSweep {
                    protocol,
                    label: "grid",
                    result: grid,
                });
            }
        }
    }
    Ok(out)
}

fn moments_json(m: &Moments, n: usize) -> Value {
    json!({ "mean": m.mean, "variance": m.variance, "variance_of_mean": m.variance_of_mean(n) })
}

fn stats_json(s: &EnsembleStats) -> Value {
    let n = s.n_realizations;
    json!({
        "p": moments_json(&s.p, n),
        "f_avg": moments_json(&s.f_avg, n),
        "f_min": moments_json(&s.f_min, n),
        "concurrence": moments_json(&s.concurrence, n),
        "b_worst": moments_json(&s.b_worst, n),
        "f_psi": s.f_psi.iter().map(|(b, m)| json!({ "beta_sq": b, "moments": moments_json(m, n) })).collect::<Vec<_>>(),
        "pr_favg_gt_cl": s.pr_favg_above_cl,
        "pr_fmin_gt_cl": s.pr_fmin_above_cl,
    })
}

pub fn sweep_file_name(protocol: Protocol, label: &str) -> String {
    format!("sweep_{}_{label}.csv", protocol.name())
}

/// Runs every configured sweep and writes one table per protocol and sweep
/// direction plus `sweep_summary.json`. Returns the paths written.
pub fn cmd_sweep(cfg: &ExperimentConfig, executor: &dyn Executor) -> CliResult<Vec<PathBuf>> {
    let sweeps = run_sweeps(cfg, executor)?;
    let header = sweep_header(&cfg.beta_grid);
    let mut written = Vec::new();
    let mut summary = Vec::new();
    for s in &sweeps {
        let path = cfg.out.join(sweep_file_name(s.protocol, s.label));
        let rows: Vec<Vec<String>> = s
            .result
            .cells
            .iter()
            .map(|c| sweep_row(s.protocol, c, cfg.seed))
            .collect();
        write_table(&path, "sweep", cfg, &header, &rows)?;
        summary.push(json!({
            "protocol": s.protocol,
            "sweep": s.label,
            "file": path,
            "cells": s.result.cells.iter().map(|c| json!({
                "n": c.n,
                "alpha": c.alpha,
                "p_id": c.p_id,
                "sigma_j": c.sigma_j,
                "sigma_eps": c.sigma_eps,
                "realizations": c.stats.n_realizations,
                "seed": cfg.seed,
                "stats": stats_json(&c.stats),
            })).collect::<Vec<_>>(),
        }));
        written.push(path);
    }
    let summary_path = cfg.out.join("sweep_summary.json");
    write_json(&summary_path, &json!({ "config": cfg, "sweeps": summary }))?;
    written.push(summary_path);
    Ok(written)
}

fn write_json(path: &std::path::Path, value: &Value) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// Reference decay constants `(c, d)` quoted for each protocol and target.
pub fn reference_constants(protocol: Protocol, target: FitTarget) -> (f64, f64) {
    match (protocol, target) {
        (Protocol::SpinAnalogue, FitTarget::AverageFidelity) => (1.07, 0.7),
        (Protocol::OptimalCoupling, FitTarget::AverageFidelity) => (1.2, 0.46),
        (Protocol::SpinAnalogue, FitTarget::MinimumFidelity) => (1.07, 0.8),
        (Protocol::OptimalCoupling, FitTarget::MinimumFidelity) => (1.2, 0.40),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitEntry {
    pub protocol: Protocol,
    pub target: FitTarget,
    pub options: FitOptions,
    pub points: usize,
    pub result: FitResult,
    /// `(N, <B>)` used in the closed-form amplitudes.
    pub b_used: Vec<(usize, f64)>,
    pub reference_c: f64,
    pub reference_d: f64,
}

pub fn targets(choice: TargetChoice) -> Vec<FitTarget> {
    match choice {
        TargetChoice::Average => vec![FitTarget::AverageFidelity],
        TargetChoice::Minimum => vec![FitTarget::MinimumFidelity],
        TargetChoice::Both => vec![FitTarget::AverageFidelity, FitTarget::MinimumFidelity],
    }
}

/// Fits every protocol present in `samples`.
pub fn fit_samples(
    samples: &BTreeMap<&'static str, (Protocol, Vec<FitSample>)>,
    cfg: &ExperimentConfig,
) -> CliResult<Vec<FitEntry>> {
    let mut entries = Vec::new();
    for (protocol, data) in samples.values() {
        for target in targets(cfg.fit.target) {
            let options = FitOptions {
                target,
                amplitude: cfg.fit.amplitude,
                b_reference: cfg.fit.b_reference,
            };
            let (result, prepared) = fit_protocol(*protocol, data, &options)?;
            let (reference_c, reference_d) = reference_constants(*protocol, target);
            entries.push(FitEntry {
                protocol: *protocol,
                target,
                options,
                points: data.len(),
                result,
                b_used: prepared.b_used,
                reference_c,
                reference_d,
            });
        }
    }
    Ok(entries)
}

/// Reads sweep tables into fit samples grouped by protocol. The clean-chain
/// probability of each `N` is recomputed from the table's own config echo
/// when present, otherwise from `cfg`.
pub fn load_samples(
    paths: &[PathBuf],
    cfg: &ExperimentConfig,
) -> CliResult<BTreeMap<&'static str, (Protocol, Vec<FitSample>)>> {
    if paths.is_empty() {
        return Err(CliError::config("fit.input", "no input tables given"));
    }
    let mut grouped: BTreeMap<&'static str, (Protocol, Vec<FitSample>)> = BTreeMap::new();
    let mut p_cache: BTreeMap<(&'static str, usize, u64, String), f64> = BTreeMap::new();
    for path in paths {
        let table = TableData::read(path)?;
        let source = table.config.clone().unwrap_or_else(|| cfg.clone());
        let alpha = source.alpha_mode()?;
        let col = |name: &str| table.column(name);
        let (c_protocol, c_n, c_sj, c_se) = (
            col("protocol")?,
            col("N")?,
            col("sigma_J")?,
            col("sigma_eps")?,
        );
        let (c_favg, c_fmin, c_b) = (col("mean_favg")?, col("mean_fmin")?, col("mean_B")?);
        for row in 0..table.rows.len() {
            let protocol: Protocol = table
                .parse_cell::<String>(row, c_protocol)?
                .parse()
                .map_err(|e: spinwire_core::Error| CliError::Table {
                    path: path.clone(),
                    reason: format!("row {}: {e}", row + 1),
                })?;
            let n: usize = table.parse_cell(row, c_n)?;
            let key = (
                protocol.name(),
                n,
                source.epsilon.to_bits(),
                source.alpha.clone(),
            );
            let p_id = match p_cache.get(&key) {
                Some(p) => *p,
                None => {
                    let p = ideal_reference(&build_ideal(protocol, n, source.epsilon, alpha)?)?.p;
                    p_cache.insert(key, p);
                    p
                }
            };
            let sample = FitSample {
                n,
                sigma_j: table.parse_cell(row, c_sj)?,
                sigma_eps: table.parse_cell(row, c_se)?,
                mean_favg: table.parse_cell(row, c_favg)?,
                mean_fmin: table.parse_cell(row, c_fmin)?,
                mean_b: table.parse_cell(row, c_b)?,
                p_id,
            };
            grouped
                .entry(protocol.name())
                .or_insert_with(|| (protocol, Vec::new()))
                .1
                .push(sample);
        }
    }
    if grouped.is_empty() {
        return Err(CliError::config(
            "fit.input",
            "input tables contain no rows",
        ));
    }
    Ok(grouped)
}

pub fn cmd_fit(cfg: &ExperimentConfig) -> CliResult<Vec<FitEntry>> {
    let samples = load_samples(&cfg.fit.input, cfg)?;
    let entries = fit_samples(&samples, cfg)?;
    write_json(
        &cfg.out.join("fit_report.json"),
        &json!({ "config": cfg, "fits": entries }),
    )?;
    Ok(entries)
}

fn std_err(r: &FitResult, i: usize) -> String {
    let v = r.covariance_diag[i];
    if v == 0.0 {
        "held".into()
    } else {
        format!("{:.3}", v.sqrt())
    }
}

pub fn render_fits(entries: &[FitEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let m: &ScalingModel = &e.result.model;
        let target = match e.target {
            FitTarget::AverageFidelity => "<F_avg>",
            FitTarget::MinimumFidelity => "<F_min>",
        };
        out.push_str(&format!(
            "{} {target}: {} points\n",
            e.protocol.name(),
            e.points
        ));
        match e.options.amplitude {
            AmplitudeRule::ClosedForm => out.push_str("  A, C held at their closed forms\n"),
            AmplitudeRule::Free => out.push_str(&format!(
                "  A = {:.4} +/- {}  C = {:.4} +/- {}\n",
                m.a,
                std_err(&e.result, 0),
                m.c_offset,
                std_err(&e.result, 1)
            )),
        }
        out.push_str(&format!(
            "  c = {:.4} +/- {}   reference {:.2}\n",
            m.c,
            std_err(&e.result, 2),
            e.reference_c
        ));
        out.push_str(&format!(
            "  d = {:.4} +/- {}   reference {:.2}\n",
            m.d,
            std_err(&e.result, 3),
            e.reference_d
        ));
        for (n, b) in &e.b_used {
            out.push_str(&format!("  <B>(N={n}) = {b:.4}\n"));
        }
        out.push_str(&format!(
            "  rms residual {:.3e} (initial {:.3e}), {} iterations, converged: {}\n",
            e.result.rms_residual,
            e.result.initial_rms_residual,
            e.result.iterations,
            e.result.converged
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct GapTable {
    pub protocol: Protocol,
    pub result: SweepResult,
    pub path: PathBuf,
}

pub fn run_prob_gap(
    cfg: &ExperimentConfig,
    executor: &dyn Executor,
) -> CliResult<Vec<(Protocol, SweepResult)>> {
    cfg.validate_prob_gap()?;
    let alpha = cfg.alpha_mode()?;
    let mut out = Vec::new();
    for &protocol in &cfg.protocols {
        let sc = sweep_config(cfg, protocol, alpha);
        let result = sweep_grid(
            &sc,
            &cfg.prob_gap.n,
            &cfg.prob_gap.sigma_j,
            &cfg.prob_gap.sigma_eps,
            executor,
        )?;
        out.push((protocol, result));
    }
    Ok(out)
}

pub const GAP_HEADER: [&str; 9] = [
    "protocol",
    "N",
    "sigma_J",
    "sigma_eps",
    "R",
    "seed",
    "pr_favg_gt_cl",
    "pr_fmin_gt_cl",
    "gap",
];

pub fn cmd_prob_gap(cfg: &ExperimentConfig, executor: &dyn Executor) -> CliResult<Vec<GapTable>> {
    let header: Vec<String> = GAP_HEADER.iter().map(|s| s.to_string()).collect();
    let mut tables = Vec::new();
    for (protocol, result) in run_prob_gap(cfg, executor)? {
        let rows: Vec<Vec<String>> = result
            .cells
            .iter()
            .map(|c| {
                vec![
                    protocol.name().to_string(),
                    c.n.to_string(),
                    fmt_f64(c.sigma_j),
                    fmt_f64(c.sigma_eps),
                    c.stats.n_realizations.to_string(),
                    cfg.seed.to_string(),
                    fmt_f64(c.stats.pr_favg_above_cl),
                    fmt_f64(c.stats.pr_fmin_above_cl),
                    fmt_f64(success_probability_gap(&c.stats)),
                ]
            })
            .collect();
        let path = cfg.out.join(format!("prob_gap_{}.csv", protocol.name()));
        write_table(&path, "prob-gap", cfg, &header, &rows)?;
        tables.push(GapTable {
            protocol,
            result,
            path,
        });
    }
    Ok(tables)
}
