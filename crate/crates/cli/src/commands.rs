use std::path::PathBuf;

use motorlab::analysis::{
    concentration_masses, convergence_study, motor_effect_report_for, phase_concentration,
    ConvergenceRow, ConvergenceTable, DEFAULT_EPSILON, REGION_SAMPLES,
};
use motorlab::discretize::{adjoint_consistency, assemble_operator, build_grid, Grid};
use motorlab::hj_limit::{
    applicable_limit, check_sign_constraints, hj_residual, LimitOutcome, LimitProfile,
    VanishingBounds,
};
use motorlab::model::{check_assumptions, decompose_regions, AssumptionReport, Regime, Theorem};
use motorlab::phase::{
    check_flux_bounds, gradient_bounds, max_abs_residual, pairwise_gap, phase_residual,
    sandwich_violation,
};
use motorlab::steady::{continuation_sweep, default_cells, sigma_ladder, SweepEntry, SweepOutcome};
use serde_json::{json, Value};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::args::Common;
use crate::config::{load_config, LoadedConfig};
use crate::error::{CliError, CliResult};
use crate::output::{
    constraints_csv, convergence_csv, file_name, profile_csv, sigma_tag, solution_csv, Writer,
};
use crate::svg::{render, Chart, Series};

/// Continuation starts here when a smaller `σ` is requested.
pub const CONTINUATION_START: f64 = 0.05;
/// Cells used by `limit` when `--grid` is not given.
pub const LIMIT_CELLS: usize = 2048;

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

struct Context {
    cfg: LoadedConfig,
    writer: Writer,
    no_timestamp: bool,
}

impl Context {
    fn open(common: &Common) -> CliResult<Self> {
        let cfg = load_config(&common.config, common.regime_override.map(Regime::from))?;
        Ok(Self {
            cfg,
            writer: Writer::new(&common.out, common.format.into()),
            no_timestamp: common.no_timestamp,
        })
    }

    fn meta(&self, extra: String) -> Vec<String> {
        let mut m = vec![
            format!(
                "config {} ({}), regime {}, {} species",
                self.cfg.name,
                self.cfg.hash,
                self.cfg.model.regime(),
                self.cfg.model.species_count()
            ),
            extra,
        ];
        if !self.no_timestamp {
            let now = OffsetDateTime::now_utc()
                .format(&Rfc3339)
                .unwrap_or_else(|_| "unknown".into());
            m.push(format!("generated {now}"));
        }
        m
    }

    fn add(&mut self, command: &str, suffix: &str, ext: &str, content: String) {
        let name = file_name(command, &self.cfg.name, &self.cfg.hash, suffix, ext);
        self.writer.add(name, content);
    }

    fn regions_and_report(&self) -> (motorlab::model::RegionDecomposition, AssumptionReport) {
        let regions = decompose_regions(&self.cfg.model.potentials, REGION_SAMPLES);
        let report = check_assumptions(&self.cfg.model, &regions);
        (regions, report)
    }
}

fn grid_for(common: &Common, default: usize) -> CliResult<Grid> {
    Ok(build_grid(common.grid.unwrap_or(default))?)
}

/// Solves at `sigma`, by continuation from [`CONTINUATION_START`] when smaller.
fn solve_at(ctx: &Context, grid: Grid, sigma: f64) -> CliResult<SweepEntry> {
    let ladder = if sigma < CONTINUATION_START {
        sigma_ladder(CONTINUATION_START, sigma)
    } else {
        vec![sigma]
    };
    let SweepOutcome {
        mut entries,
        failure,
    } = continuation_sweep(&ctx.cfg.model, grid, &ladder)?;
    if let Some((at, e)) = failure {
        let mut err = CliError::from(e);
        err.message = format!("continuation stopped at sigma = {at:e}: {}", err.message);
        return Err(err);
    }
    Ok(entries.pop().expect("nonempty ladder"))
}

fn no_theorem(report: &AssumptionReport) -> CliError {
    CliError::input("no limit theorem applies to this configuration")
        .with_details(json!({ "assumptions": to_value(report) }))
}

fn x_nodes(grid: Grid) -> Vec<f64> {
    grid.nodes()
}

pub fn cmd_solve(common: &Common, sigma: f64, epsilon: f64) -> CliResult<Vec<PathBuf>> {
    let mut ctx = Context::open(common)?;
    let grid = grid_for(common, default_cells(sigma))?;
    let entry = solve_at(&ctx, grid, sigma)?;
    let model = &ctx.cfg.model;
    let phase = &entry.phase;
    let residual = max_abs_residual(&phase_residual(phase, model)?);
    let concentration = match &entry.density {
        Some(d) => concentration_masses(d, epsilon)?,
        None => phase_concentration(phase, epsilon)?,
    };
    let (adjoint, total_flux) = match &entry.density {
        Some(d) => {
            let op = assemble_operator(model, grid, sigma)?;
            let n = d.node_major();
            let fluxes = op.interface_fluxes(&n);
            let scale = op.flux_scale(&n);
            let worst = scale
                .iter()
                .enumerate()
                .map(|(m, s)| {
                    let total: f64 = fluxes.iter().map(|f| f[m]).sum();
                    if *s > 0.0 {
                        total.abs() / s
                    } else {
                        total.abs()
                    }
                })
                .fold(0.0, f64::max);
            (Some(adjoint_consistency(&op)), Some(worst))
        }
        None => (None, None),
    };
    let diagnostics = json!({
        "command": "solve",
        "config": ctx.cfg.name,
        "config_hash": ctx.cfg.hash,
        "sigma": sigma,
        "cells": grid.cells(),
        "regime": model.regime(),
        "normalization": model.normalization,
        "path": entry.path,
        "span_over_sigma": phase.span_over_sigma(),
        "max_phase_residual": residual,
        "adjoint_consistency": adjoint,
        "max_relative_total_flux": total_flux,
        "sandwich_violation": sandwich_violation(phase),
        "gradient_bounds": to_value(&gradient_bounds(phase, model)),
        "flux_bounds": to_value(&check_flux_bounds(phase, &model.potentials)),
        "phase_gap": to_value(&pairwise_gap(phase)),
        "concentration": to_value(&concentration),
    });
    let suffix = format!("s{}", sigma_tag(sigma));
    ctx.add(
        "solve",
        &suffix,
        "csv",
        solution_csv(phase, entry.density.as_ref(), None),
    );
    ctx.add("solve", &suffix, "json", pretty(&diagnostics));
    let x = x_nodes(grid);
    let chart = match &entry.density {
        Some(d) => Chart::lines(
            "steady densities",
            "x",
            "n_i(x)",
            d.values
                .iter()
                .enumerate()
                .map(|(i, v)| Series::new(format!("n_{}", i + 1), x.clone(), v.clone()))
                .collect(),
        ),
        None => Chart::lines(
            "phase functions (densities underflow)",
            "x",
            "R_i(x)",
            phase
                .r_values
                .iter()
                .enumerate()
                .map(|(i, v)| Series::new(format!("R_{}", i + 1), x.clone(), v.clone()))
                .collect(),
        ),
    };
    let meta = ctx.meta(format!(
        "sigma = {sigma:e}, N = {}, path {:?}",
        grid.cells(),
        entry.path
    ));
    ctx.add("solve", &suffix, "svg", render(&[chart], 1, &meta));
    ctx.writer.flush()
}

/// Per-species sign-constraint excess along a vanishing-rate sweep.
fn vanishing_table(
    ctx: &Context,
    bounds: &VanishingBounds,
    grid: Grid,
    sigmas: &[f64],
) -> CliResult<ConvergenceTable> {
    let model = &ctx.cfg.model;
    let outcome = continuation_sweep(model, grid, sigmas)?;
    let mut rows = Vec::with_capacity(outcome.entries.len());
    for e in &outcome.entries {
        let checks = check_sign_constraints(bounds, &e.phase, &model.potentials, 10.0 * grid.h())?;
        let errors: Vec<f64> = checks
            .iter()
            .map(|c| c.violations.iter().map(|v| v.excess).fold(0.0, f64::max))
            .collect();
        let far = match &e.density {
            Some(d) => concentration_masses(d, DEFAULT_EPSILON)?,
            None => phase_concentration(&e.phase, DEFAULT_EPSILON)?,
        };
        rows.push(ConvergenceRow {
            sigma: e.sigma,
            path: e.path,
            max_error: errors.iter().copied().fold(0.0, f64::max),
            errors,
            gap_integral: pairwise_gap(&e.phase).max_integral(),
            far_mass: far.total_far_mass,
        });
    }
    Ok(ConvergenceTable {
        theorem: Theorem::VanishingRates,
        cells: grid.cells(),
        epsilon: DEFAULT_EPSILON,
        rows,
        rate: None,
        rate_note: Some("errors are sign-constraint excesses within 10h; no rate is fitted".into()),
        failure: outcome.failure.map(|(s, e)| (s, e.to_string())),
    })
}

pub fn cmd_sweep(common: &Common, sigmas: &[f64]) -> CliResult<Vec<PathBuf>> {
    let mut ctx = Context::open(common)?;
    let smallest = sigmas.iter().copied().fold(f64::INFINITY, f64::min);
    let grid = grid_for(common, default_cells(smallest))?;
    let (regions, report) = ctx.regions_and_report();
    if report.primary_theorem().is_none() {
        return Err(no_theorem(&report));
    }
    let (table, measure) = match applicable_limit(&ctx.cfg.model, &regions, grid, &report)? {
        LimitOutcome::Vanishing(b) => (vanishing_table(&ctx, &b, grid, sigmas)?, "sign_excess"),
        out => {
            let profile = out.profile().expect("profile outcome");
            (
                convergence_study(&ctx.cfg.model, grid, sigmas, profile)?,
                "max_norm_error",
            )
        }
    };
    let species = ctx.cfg.model.species_count();
    let suffix = format!(
        "s{}-{}",
        sigma_tag(sigmas[0]),
        sigma_tag(sigmas[sigmas.len() - 1])
    );
    let summary = json!({
        "command": "sweep",
        "config": ctx.cfg.name,
        "config_hash": ctx.cfg.hash,
        "sigmas": sigmas,
        "error_measure": measure,
        "table": to_value(&table),
    });
    ctx.add("sweep", &suffix, "csv", convergence_csv(&table, species));
    ctx.add("sweep", &suffix, "json", pretty(&summary));
    let s: Vec<f64> = table.rows.iter().map(|r| r.sigma).collect();
    let mut series: Vec<Series> = (0..species)
        .map(|i| {
            Series::new(
                format!("species {}", i + 1),
                s.clone(),
                table.rows.iter().map(|r| r.errors[i]).collect(),
            )
        })
        .collect();
    series.push(
        Series::new(
            "far mass",
            s.clone(),
            table.rows.iter().map(|r| r.far_mass).collect(),
        )
        .dashed(),
    );
    let rate = table
        .rate
        .map(|r| format!(", fitted rate {r:.3}"))
        .unwrap_or_default();
    let meta = ctx.meta(format!(
        "N = {}, sigma from {:e} to {:e}, {:?}{rate}",
        grid.cells(),
        sigmas[0],
        sigmas[sigmas.len() - 1],
        table.theorem
    ));
    ctx.add(
        "sweep",
        &suffix,
        "svg",
        render(
            &[Chart::log_log(
                "error against sigma",
                "sigma",
                measure,
                series,
            )],
            1,
            &meta,
        ),
    );
    let written = ctx.writer.flush()?;
    match table.failure {
        Some((sigma, msg)) => Err(CliError::solver(format!(
            "sweep truncated at sigma = {sigma:e}: {msg}"
        ))
        .with_details(json!({ "partial_results": written }))),
        None => Ok(written),
    }
}

fn profile_chart(profile: &LimitProfile) -> Vec<Chart> {
    let x = x_nodes(profile.grid);
    vec![
        Chart::lines(
            "limit profile",
            "x",
            "R(x)",
            vec![Series::new("R", x.clone(), profile.r_values.clone())],
        ),
        Chart::lines(
            "limit slope",
            "x",
            "R'(x)",
            vec![Series::new("R'", x, profile.slope_values.clone())],
        ),
    ]
}

pub fn cmd_limit(common: &Common) -> CliResult<Vec<PathBuf>> {
    let mut ctx = Context::open(common)?;
    let grid = grid_for(common, LIMIT_CELLS)?;
    let (regions, report) = ctx.regions_and_report();
    if report.primary_theorem().is_none() {
        return Err(no_theorem(&report));
    }
    let outcome = applicable_limit(&ctx.cfg.model, &regions, grid, &report)?;
    let species = ctx.cfg.model.species_count();
    let suffix = format!("N{}", grid.cells());
    let mut summary = json!({
        "command": "limit",
        "config": ctx.cfg.name,
        "config_hash": ctx.cfg.hash,
        "cells": grid.cells(),
        "assumptions": to_value(&report),
    });
    let charts = match &outcome {
        LimitOutcome::Profile(p) => {
            summary["theorem"] = to_value(&p.theorem);
            summary["hj_residual"] = {
                let r = hj_residual(p, &ctx.cfg.model.potentials);
                json!({
                    "interior_max": r.interior_max,
                    "junction_max": r.junction_max,
                    "junction_nodes": r.junction_nodes,
                })
            };
            ctx.add("limit", &suffix, "csv", profile_csv(p, species));
            profile_chart(p)
        }
        LimitOutcome::Strong {
            profile,
            certificate,
        } => {
            summary["theorem"] = to_value(&profile.theorem);
            summary["certificate"] = json!({
                "holds": certificate.holds(),
                "violations": certificate.violations(),
                "max_hamiltonian": certificate.max_hamiltonian(),
                "diagnostic_failures": certificate.diagnostic_failures(),
                "k": certificate.k,
                "nodes": to_value(&certificate.nodes),
            });
            ctx.add("limit", &suffix, "csv", profile_csv(profile, species));
            let mut charts = profile_chart(profile);
            if let Chart::Lines { series, .. } = &mut charts[1] {
                let x = x_nodes(grid);
                let bound = certificate.nodes.iter().map(|n| n.lower_bound).collect();
                series.push(Series::new("lower bound", x, bound).dashed());
            }
            charts
        }
        LimitOutcome::Vanishing(b) => {
            summary["theorem"] = to_value(&Theorem::VanishingRates);
            summary["negative_sets"] = to_value(&b.negative_sets);
            ctx.add("limit", &suffix, "csv", constraints_csv(b));
            let x = x_nodes(grid);
            b.constraints
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let lower = c.iter().map(|s| s.lower).collect();
                    let upper = c.iter().map(|s| s.upper.unwrap_or(f64::NAN)).collect();
                    Chart::lines(
                        &format!("admissible slopes of R_{}", i + 1),
                        "x",
                        "R_i'(x)",
                        vec![
                            Series::new("lower", x.clone(), lower),
                            Series::new("upper", x.clone(), upper).dashed(),
                        ],
                    )
                })
                .collect()
        }
    };
    ctx.add("limit", &suffix, "json", pretty(&summary));
    let meta = ctx.meta(format!("N = {}, sigma -> 0", grid.cells()));
    ctx.add("limit", &suffix, "svg", render(&charts, 2, &meta));
    ctx.writer.flush()
}

pub fn cmd_report(common: &Common, sigma: f64, epsilon: f64) -> CliResult<Vec<PathBuf>> {
    let mut ctx = Context::open(common)?;
    let grid = grid_for(common, default_cells(sigma))?;
    let entry = solve_at(&ctx, grid, sigma)?;
    let (report, profile) = motor_effect_report_for(&ctx.cfg.model, &entry, epsilon)?;
    let suffix = format!("s{}", sigma_tag(sigma));
    ctx.add("report", &suffix, "json", report.to_json() + "\n");
    ctx.add(
        "report",
        &suffix,
        "csv",
        solution_csv(&entry.phase, entry.density.as_ref(), profile.as_ref()),
    );
    let x = x_nodes(grid);
    let density = entry
        .density
        .clone()
        .unwrap_or_else(|| entry.phase.to_density());
    let densities = density
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| Series::new(format!("n_{}", i + 1), x.clone(), v.clone()))
        .collect();
    let mut phases: Vec<Series> = entry
        .phase
        .r_values
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Series::new(
                format!("R_{} - R_{}(0)", i + 1, i + 1),
                x.clone(),
                r.iter().map(|v| v - r[0]).collect(),
            )
        })
        .collect();
    if let Some(p) = &profile {
        phases.push(Series::new("limit R", x.clone(), p.r_values.clone()).dashed());
    }
    let total = Series::new(
        "S",
        x.clone(),
        entry
            .phase
            .s_values
            .iter()
            .map(|v| v - entry.phase.s_values[0])
            .collect(),
    );
    let c = &report.concentration;
    let mut bars: Vec<(String, f64)> = c
        .masses_near_zero
        .iter()
        .enumerate()
        .map(|(i, m)| (format!("[0,eps] n_{}", i + 1), *m))
        .collect();
    bars.push(("far".into(), c.total_far_mass));
    let charts = [
        Chart::semilog_y("densities", "x", "n_i(x)", densities),
        Chart::lines("phases and limit", "x", "shifted phase", phases),
        Chart::lines("total phase", "x", "S(x) - S(0)", vec![total]),
        Chart::Bars {
            title: format!(
                "mass split at eps = {epsilon} (motor effect: {})",
                report.motor_effect
            ),
            y_label: "mass (unit total)".into(),
            bars,
        },
    ];
    let meta = ctx.meta(format!(
        "sigma = {sigma:e}, N = {}, path {:?}, far mass {:.3e}",
        grid.cells(),
        entry.path,
        c.total_far_mass
    ));
    ctx.add("report", &suffix, "svg", render(&charts, 2, &meta));
    ctx.writer.flush()
}
