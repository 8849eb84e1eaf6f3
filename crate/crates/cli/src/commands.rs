use std::fs::File;
use std::io::{self, BufWriter, Write};

use anyhow::{bail, Context, Result};
use rabi_texp::exact::DEFAULT_TOL;
use rabi_texp::{
    continue_branch, estimate_energy, exact_levels, BranchLabel, BranchOutcome, Error, Method, OptimizeConfig, Parity,
    RabiParams, StationaryPoint, TrialKind,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Cli, Command, Format, Target};

/// Rounds to the 12 significant digits every output carries.
fn sig(v: f64) -> f64 {
    if v.is_finite() {
        format!("{v:.11e}").parse().unwrap_or(v)
    } else {
        v
    }
}

/// Relative error of the rounded values, so each row is self-consistent.
/// Undefined for a vanishing level.
fn rel_error(energy: f64, exact: f64) -> Option<f64> {
    (exact.abs() >= 1e-12).then(|| sig((sig(energy) - sig(exact)).abs() / sig(exact).abs()))
}

/// The oracle level a trial family targets.
fn oracle(params: &RabiParams, kind: TrialKind) -> Result<f64> {
    let spectrum = exact_levels(params, 4, DEFAULT_TOL)
        .and_then(|s| s.require_converged())
        .with_context(|| format!("oracle at g = {}", params.g))?;
    let level = match kind {
        TrialKind::NonSym => Some(spectrum.ground()),
        TrialKind::PosParity => spectrum.lowest_with_parity(Parity::Positive),
        TrialKind::NegParity => spectrum.lowest_with_parity(Parity::Negative),
    };
    level.with_context(|| format!("oracle at g = {}: no level of the requested parity", params.g))
}

fn params(cli: &Cli, g: f64) -> Result<RabiParams> {
    Ok(RabiParams::new(cli.omega0, cli.omega, g)?)
}

fn g_grid(cli: &Cli) -> Result<Vec<f64>> {
    let (start, stop, count) = (cli.g_start, cli.g_stop, cli.g_count);
    if count < 2 || !(start >= 0.0 && stop > start && stop.is_finite()) {
        bail!("the g grid needs --g-count >= 2 and 0 <= --g-start < --g-stop");
    }
    Ok((0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect())
}

fn writer(cli: &Cli) -> Result<Box<dyn Write>> {
    Ok(match &cli.output {
        Some(path) => {
            Box::new(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<T: Serialize>(cli: &Cli, rows: &[T], default: Format) -> Result<()> {
    let mut out = writer(cli)?;
    match cli.format.unwrap_or(default) {
        Format::Csv => {
            let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
            for row in rows {
                csv.serialize(row)?;
            }
            csv.flush()?;
        }
        Format::Json => {
            if let [single] = rows {
                serde_json::to_writer_pretty(&mut out, single)?;
            } else {
                serde_json::to_writer_pretty(&mut out, rows)?;
            }
            writeln!(out)?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match cli.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?.install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Estimate => estimate(cli),
        Command::Sweep => sweep(cli),
        Command::Exact { count } => exact(cli, *count),
        Command::Reproduce { target } => match target {
            Target::Table1 => table1(cli),
            Target::Table2 => table2(cli),
            Target::Fig3 => fig3(cli),
            Target::Fig4 => fig4(cli),
            Target::Fig5 => fig5(cli),
        },
    }
}

#[derive(Serialize)]
struct EstimateRecord {
    omega0: f64,
    omega: f64,
    g: f64,
    kind: &'static str,
    method: &'static str,
    order: usize,
    energy: f64,
    x_opt: f64,
    y_opt: f64,
    grad_norm: f64,
    exact: f64,
    rel_error: Option<f64>,
}

fn estimate(cli: &Cli) -> Result<()> {
    let Some(g) = cli.g else {
        bail!("estimate needs --g");
    };
    let p = params(cli, g)?;
    let (e, point) = estimate_energy(&p, cli.kind, cli.method, cli.order, &OptimizeConfig::default())
        .with_context(|| format!("optimizing {} {}{} at g = {g}", cli.kind.name(), cli.method.name(), cli.order))?;
    let exact = oracle(&p, cli.kind)?;
    let record = EstimateRecord {
        omega0: p.omega0,
        omega: p.omega,
        g,
        kind: cli.kind.name(),
        method: e.method.name(),
        order: e.order,
        energy: sig(e.value),
        x_opt: sig(point.x),
        y_opt: sig(point.y),
        grad_norm: sig(point.grad_norm),
        exact: sig(exact),
        rel_error: rel_error(e.value, exact),
    };
    emit(cli, &[record], Format::Json)
}

#[derive(Serialize)]
struct SweepRow {
    g: f64,
    x_opt: Option<f64>,
    y_opt: Option<f64>,
    energy: Option<f64>,
    branch_label: &'static str,
    method: &'static str,
    order: usize,
    exact: Option<f64>,
    rel_error: Option<f64>,
}

fn label_name(label: BranchLabel) -> &'static str {
    match label {
        BranchLabel::Physical => "Physical",
        BranchLabel::BlindArm => "BlindArm",
    }
}

fn sweep_rows(
    cli: &Cli,
    out: &BranchOutcome,
    kind: TrialKind,
    method: Method,
    order: usize,
) -> Result<Vec<SweepRow>> {
    let mut entries: Vec<(f64, &'static str, Option<StationaryPoint>)> = Vec::new();
    for (&g, point) in out.physical.g_grid.iter().zip(&out.physical.points) {
        entries.push((g, label_name(BranchLabel::Physical), *point));
    }
    for &(g_lo, _) in &out.gaps {
        entries.push((g_lo, "Gap", None));
    }
    for arm in &out.blind_arms {
        entries.extend(arm.found().map(|p| (p.g, label_name(arm.label), Some(*p))));
    }
    let rank = |label: &str| ["Physical", "Gap", "BlindArm"].iter().position(|l| *l == label);
    entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(rank(a.1).cmp(&rank(b.1))));

    let exact: Vec<f64> = entries
        .par_iter()
        .map(|(g, _, _)| oracle(&params(cli, *g)?, kind))
        .collect::<Result<_>>()?;
    Ok(entries
        .into_iter()
        .zip(exact)
        .map(|((g, label, point), exact)| SweepRow {
            g: sig(g),
            x_opt: point.map(|p| sig(p.x)),
            y_opt: point.map(|p| sig(p.y)),
            energy: point.map(|p| sig(p.energy)),
            branch_label: label,
            method: method.name(),
            order,
            exact: Some(sig(exact)),
            rel_error: point.and_then(|p| rel_error(p.energy, exact)),
        })
        .collect())
}

fn branch(cli: &Cli, omega: f64, kind: TrialKind, method: Method, order: usize, grid: &[f64]) -> Result<BranchOutcome> {
    let base = RabiParams::new(cli.omega0, omega, 0.0)?;
    let cfg = OptimizeConfig { blind_arms: cli.blind_arms, ..OptimizeConfig::default() };
    continue_branch(&base, kind, method, order, grid, &cfg)
        .with_context(|| format!("following the {} {}{} branch", kind.name(), method.name(), order))
}

fn missing_points(out: &BranchOutcome) -> Result<()> {
    if let Some(g) = out.physical.g_grid.iter().zip(&out.physical.points).find(|(_, p)| p.is_none()).map(|(g, _)| g) {
        return Err(Error::NoPhysicalSolution(format!("no physical point at g = {g}")).into());
    }
    Ok(())
}

fn sweep(cli: &Cli) -> Result<()> {
    let grid = g_grid(cli)?;
    let out = branch(cli, cli.omega, cli.kind, cli.method, cli.order, &grid)?;
    let rows = sweep_rows(cli, &out, cli.kind, cli.method, cli.order)?;
    emit(cli, &rows, Format::Csv)?;
    missing_points(&out)
}

#[derive(Serialize)]
struct LevelRow {
    level: usize,
    energy: f64,
    parity: i8,
    n_max: usize,
}

fn exact(cli: &Cli, count: usize) -> Result<()> {
    let Some(g) = cli.g else {
        bail!("exact needs --g");
    };
    let spectrum = exact_levels(&params(cli, g)?, count, DEFAULT_TOL)
        .and_then(|s| s.require_converged())
        .context("oracle")?;
    let rows: Vec<LevelRow> = spectrum
        .levels
        .iter()
        .zip(&spectrum.parities)
        .enumerate()
        .map(|(level, (&energy, &parity))| LevelRow {
            level,
            energy: sig(energy),
            parity: parity.sign() as i8,
            n_max: spectrum.n_max_used,
        })
        .collect();
    emit(cli, &rows, Format::Csv)
}

#[derive(Serialize)]
struct Table1Row {
    quantity: &'static str,
    omega_1: f64,
    omega_2: f64,
}

fn single(p: &RabiParams, kind: TrialKind, method: Method, order: usize) -> Result<f64> {
    let (e, _) = estimate_energy(p, kind, method, order, &OptimizeConfig::default())
        .with_context(|| format!("{} {}{} at g = {}", kind.name(), method.name(), order, p.g))?;
    Ok(e.value)
}

fn table1(cli: &Cli) -> Result<()> {
    let columns = [RabiParams::new(1.0, 1.0, 5.0)?, RabiParams::new(1.0, 2.0, 5.0)?];
    let estimates = [
        ("E0(1)", TrialKind::NonSym, Method::Variational, 1),
        ("E0(6)", TrialKind::NonSym, Method::Csm, 6),
        ("E1(1,n)", TrialKind::NegParity, Method::Variational, 1),
        ("E1(6,n)", TrialKind::NegParity, Method::Csm, 6),
    ];
    let mut rows = Vec::new();
    for (quantity, kind, method, order) in estimates {
        let v: Vec<f64> = columns.iter().map(|p| single(p, kind, method, order)).collect::<Result<_>>()?;
        rows.push(Table1Row { quantity, omega_1: sig(v[0]), omega_2: sig(v[1]) });
    }
    for (quantity, kind, at) in [("E0 exact", TrialKind::NonSym, 2), ("E1 exact", TrialKind::NegParity, 5)] {
        let v: Vec<f64> = columns.iter().map(|p| oracle(p, kind)).collect::<Result<_>>()?;
        rows.insert(at, Table1Row { quantity, omega_1: sig(v[0]), omega_2: sig(v[1]) });
    }
    emit(cli, &rows, Format::Csv)
}

#[derive(Serialize)]
struct EstimateRow {
    quantity: &'static str,
    energy: f64,
    rel_error: Option<f64>,
}

fn table2(cli: &Cli) -> Result<()> {
    let p = RabiParams::new(1.0, 1.0, 0.2)?;
    let exact = oracle(&p, TrialKind::NegParity)?;
    let mut rows = Vec::new();
    for (quantity, method, order) in
        [("E1(1,n) var", Method::Variational, 1), ("E1(5,n) CMX", Method::Cmx, 5), ("E1(6,n) CSM", Method::Csm, 6)]
    {
        let e = single(&p, TrialKind::NegParity, method, order)?;
        rows.push(EstimateRow { quantity, energy: sig(e), rel_error: rel_error(e, exact) });
    }
    rows.push(EstimateRow { quantity: "E1 exact", energy: sig(exact), rel_error: Some(0.0) });
    emit(cli, &rows, Format::Csv)
}

#[derive(Serialize)]
struct OrderRow {
    method: &'static str,
    order: usize,
    energy: f64,
    exact: f64,
    rel_error: Option<f64>,
}

fn fig3(cli: &Cli) -> Result<()> {
    let grid: Vec<f64> = (0..=20).map(|i| 0.05 * i as f64).collect();
    let exact = oracle(&RabiParams::new(1.0, 1.0, 1.0)?, TrialKind::PosParity)?;
    let orders = [
        (Method::Csm, 1),
        (Method::Csm, 3),
        (Method::Csm, 4),
        (Method::Csm, 5),
        (Method::Csm, 6),
        (Method::Cmx, 1),
        (Method::Cmx, 3),
        (Method::Cmx, 5),
    ];
    let mut rows = Vec::new();
    for (method, order) in orders {
        let base = RabiParams::new(1.0, 1.0, 0.0)?;
        let out = continue_branch(&base, TrialKind::PosParity, method, order, &grid, &OptimizeConfig::default())
            .with_context(|| format!("{}{} branch", method.name(), order))?;
        let point = out.physical.points[grid.len() - 1]
            .ok_or_else(|| Error::NoPhysicalSolution(format!("{}{} at g = 1", method.name(), order)))?;
        rows.push(OrderRow {
            method: method.name(),
            order,
            energy: sig(point.energy),
            exact: sig(exact),
            rel_error: rel_error(point.energy, exact),
        });
    }
    emit(cli, &rows, Format::Csv)
}

#[derive(Serialize)]
struct CurveRow {
    omega: f64,
    g: f64,
    x_opt: Option<f64>,
    y_opt: Option<f64>,
    energy: Option<f64>,
    branch_label: &'static str,
    exact: Option<f64>,
    rel_error: Option<f64>,
}

fn fig4(cli: &Cli) -> Result<()> {
    let grid = g_grid(cli)?;
    let mut rows = Vec::new();
    for &omega in &cli.omega_list {
        let at = Cli { omega, ..cli.clone() };
        let out = branch(&at, omega, TrialKind::PosParity, Method::Csm, 6, &grid)?;
        rows.extend(sweep_rows(&at, &out, TrialKind::PosParity, Method::Csm, 6)?.into_iter().map(|r| CurveRow {
            omega: sig(omega),
            g: r.g,
            x_opt: r.x_opt,
            y_opt: r.y_opt,
            energy: r.energy,
            branch_label: r.branch_label,
            exact: r.exact,
            rel_error: r.rel_error,
        }));
    }
    emit(cli, &rows, Format::Csv)
}

#[derive(Serialize)]
struct LevelErrorRow {
    g: f64,
    level: &'static str,
    energy: Option<f64>,
    exact: f64,
    rel_error: Option<f64>,
}

fn fig5(cli: &Cli) -> Result<()> {
    let grid = g_grid(cli)?;
    let mut rows = Vec::new();
    for (level, kind) in [("E0", TrialKind::PosParity), ("E1", TrialKind::NegParity)] {
        let out = branch(cli, cli.omega, kind, Method::Csm, 6, &grid)?;
        let exact: Vec<f64> = grid.par_iter().map(|&g| oracle(&params(cli, g)?, kind)).collect::<Result<_>>()?;
        for ((&g, point), exact) in grid.iter().zip(&out.physical.points).zip(exact) {
            rows.push(LevelErrorRow {
                g: sig(g),
                level,
                energy: point.map(|p| sig(p.energy)),
                exact: sig(exact),
                rel_error: point.and_then(|p| rel_error(p.energy, exact)),
            });
        }
    }
    emit(cli, &rows, Format::Csv)
}
