//! CSV files written and read by the commands.

use std::path::Path;

use anyhow::{bail, Context, Result};

use sbr_core::biokinetics::{PARTICULATE_NAMES, SOLUBLE_NAMES};
use sbr_core::config::scheme_name;
use sbr_core::discretization::Grid;
use sbr_core::scenario::Problem;
use sbr_core::simulator::{snapshot_to_z, Diagnostics, SimulationOutput, Snapshot};
use sbr_core::state::GridState;
use sbr_core::validation::{ErrorReport, StationarityRow};

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn component_header(prefix: &[&str], suffix: &str) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    h.extend(PARTICULATE_NAMES.iter().chain(SOLUBLE_NAMES.iter()).map(|n| format!("{n}{suffix}")));
    h
}

pub fn write_profiles(path: &Path, out: &SimulationOutput, problem: &Problem) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(component_header(&["t_s", "z_m", "X_kgpm3"], ""))?;
    for snap in &out.snapshots {
        for pt in snapshot_to_z(snap, &out.grid, problem.geometry.depth, problem.c_conv()) {
            let mut row = vec![num(snap.t()), num(pt.z), num(pt.x)];
            row.extend(pt.c.iter().chain(pt.s.iter()).map(|v| num(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_outlets(path: &Path, out: &SimulationOutput) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["t_s".to_string(), "Xe".to_string(), "Xu".to_string()];
    header.extend(component_header(&[], "_e"));
    header.extend(component_header(&[], "_u"));
    w.write_record(&header)?;
    for o in &out.outlets {
        let mut row = vec![num(o.t), num(o.x_e), num(o.x_u)];
        row.extend(o.c_e.iter().chain(&o.s_e).chain(&o.c_u).chain(&o.s_u).map(|v| num(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Tank-cell profiles in `ξ`, enough to rebuild the snapshots exactly.
pub fn write_reference(path: &Path, out: &SimulationOutput, problem: &Problem) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(component_header(&["t_s", "surface_m", "xi", "X_kgpm3"], ""))?;
    let c = problem.c_conv();
    for snap in &out.snapshots {
        for i in out.grid.tank_range() {
            let mut row = vec![num(snap.t()), num(snap.z_bar), num(out.grid.xi_cell(i)), num(snap.state.x[i])];
            row.extend(snap.state.particulates(i, c).iter().chain(&snap.state.s[i]).map(|v| num(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_reference(path: &Path, c_conv: f64) -> Result<SimulationOutput> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut groups: Vec<(f64, f64, Vec<[f64; 13]>)> = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}: row {} is not numeric", path.display(), k + 2))?;
        if vals.len() != 16 {
            bail!("{}: row {} has {} fields, expected 16", path.display(), k + 2, vals.len());
        }
        let cell: [f64; 13] = std::array::from_fn(|i| vals[i + 3]);
        match groups.last_mut() {
            Some(g) if g.0 == vals[0] => g.2.push(cell),
            _ => groups.push((vals[0], vals[1], vec![cell])),
        }
    }
    let Some(first) = groups.first() else { bail!("{}: no profiles", path.display()) };
    let n = first.2.len().saturating_sub(1);
    if n < 1 || groups.iter().any(|g| g.2.len() != n + 1) {
        bail!("{}: profiles must share one grid", path.display());
    }
    let grid = Grid::new(n);
    let snapshots = groups
        .into_iter()
        .map(|(t, z_bar, cells)| {
            let mut st = GridState::zeros(&grid, [1.0 / 6.0; 6]);
            st.t = t;
            for (j, v) in cells.iter().enumerate() {
                let i = j + 1;
                st.x[i] = v[0];
                if v[0] > 0.0 {
                    st.p[i] = std::array::from_fn(|k| c_conv * v[1 + k] / v[0]);
                }
                st.s[i] = std::array::from_fn(|k| v[7 + k]);
            }
            Snapshot { z_bar, state: st }
        })
        .collect();
    Ok(SimulationOutput { grid, outlets: Vec::new(), snapshots, diagnostics: Diagnostics::default() })
}

pub fn write_report(path: &Path, report: &ErrorReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["cells", "scheme", "tolerance", "t_s", "e_rel", "cpu_s", "newton_mean", "eoc"])?;
    let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
    for r in &report.rows {
        w.write_record([
            r.cells.to_string(),
            scheme_name(r.scheme).to_string(),
            opt(r.tolerance),
            num(r.t),
            num(r.e_rel),
            num(r.cpu_seconds),
            num(r.mean_newton_iterations),
            opt(r.eoc),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn print_report(report: &ErrorReport) {
    println!("{:>6} {:>14} {:>9} {:>9} {:>10} {:>9} {:>8} {:>6}", "N", "scheme", "eps", "t [h]", "e_rel", "cpu [s]", "newton", "EOC");
    for r in &report.rows {
        println!(
            "{:>6} {:>14} {:>9} {:>9.3} {:>10.4} {:>9.3} {:>8.3} {:>6}",
            r.cells,
            scheme_name(r.scheme),
            r.tolerance.map(|e| format!("{e:.0e}")).unwrap_or_default(),
            r.t / 3600.0,
            r.e_rel,
            r.cpu_seconds,
            r.mean_newton_iterations,
            r.eoc.map(|e| format!("{e:.3}")).unwrap_or_default()
        );
    }
}

pub fn write_benchmark(path: &Path, rows: &[(usize, f64, f64)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["cells", "explicit_s", "semi_implicit_s", "ratio"])?;
    for &(n, e, s) in rows {
        w.write_record([n.to_string(), num(e), num(s), num(s / e)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stationarity(path: &Path, rows: &[StationarityRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["cells", "deviation_kgpm2", "sediment_cells"])?;
    for r in rows {
        w.write_record([r.cells.to_string(), num(r.deviation), r.sediment_cells.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
