use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{Context, Result};
use becsim_core::meanfield::{self, BlochState, Stability};
use becsim_core::quantum::{
    self, husimi_q, measurement_distributions, HusimiGrid, MasterOptions, McwfOptions, MeasurementDistributions,
    QuantumState, PHI_BINS,
};
use becsim_core::response::response_surface;
use becsim_core::steadystate::{self as ss, ScanRow};
use becsim_core::ObservableSeries;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{apply_axes, Mode, Resolved};

/// Husimi mesh written by the many-body modes.
pub const HUSIMI_MESH: (usize, usize) = (48, 96);

/// One data file: `name` is the suffix after the run label.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub headline: Value,
}

fn artifact(name: &str, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Artifact> {
    let mut body = Vec::new();
    write(&mut body).with_context(|| format!("writing {name}"))?;
    Ok(Artifact { name: name.to_string(), body })
}

/// JSON number, or null for NaN/infinite values.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn execute(r: &Resolved) -> Result<RunOutput> {
    match r.mode {
        Mode::Meanfield => run_meanfield(r),
        Mode::Steady => run_steady(r),
        Mode::NonlinearSteady => run_nonlinear(r),
        Mode::Response => run_response(r),
        Mode::Mcwf => run_mcwf(r),
        Mode::Master => run_master(r),
        Mode::Fixedpoints => run_fixedpoints(r),
        Mode::Scan => run_scan(r),
        Mode::Preset => unreachable!("presets expand before execution"),
    }
}

/// All cells of the axis grid, first axis outermost.
fn cells(r: &Resolved) -> Vec<Vec<(&str, f64)>> {
    let mut out: Vec<Vec<(&str, f64)>> = vec![Vec::new()];
    for axis in &r.axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |&v| {
                    let mut c = prefix.clone();
                    c.push((axis.name.as_str(), v));
                    c
                })
            })
            .collect();
    }
    out
}

fn axis_header(r: &Resolved) -> String {
    r.axes.iter().map(|a| format!("{},", a.name)).collect()
}

fn axis_values(cell: &[(&str, f64)]) -> String {
    cell.iter().map(|(_, v)| format!("{v},")).collect()
}

fn cell_json(cell: &[(&str, f64)]) -> Value {
    Value::Object(cell.iter().map(|(n, v)| (n.to_string(), json!(v))).collect())
}

fn series_headline(s: &ObservableSeries) -> Value {
    let last = s.len() - 1;
    let min_purity = s.purity.iter().copied().filter(|p| p.is_finite()).fold(f64::INFINITY, f64::min);
    json!({
        "t_end": s.t[last],
        "alpha": num(s.alpha[last]),
        "purity": num(s.purity[last]),
        "n": num(s.n[last]),
        "min_purity": num(min_purity),
    })
}

fn run_meanfield(r: &Resolved) -> Result<RunOutput> {
    let init = BlochState::coherent(r.initial.n0 as f64, r.initial.theta, r.initial.phi);
    let s = meanfield::integrate(&init, &r.params, &r.drive, (0.0, r.t_end()), &r.grid)
        .context("meanfield: integrating the Bloch equations")?;
    Ok(RunOutput { artifacts: vec![artifact("timeseries", |w| s.write_csv(w))?], headline: series_headline(&s) })
}

fn run_steady(r: &Resolved) -> Result<RunOutput> {
    let cells = cells(r);
    let rows: Vec<Option<(f64, f64, f64, f64)>> = cells
        .par_iter()
        .map(|cell| {
            let p = apply_axes(&r.params, cell, r.initial.n0);
            p.validate().ok()?;
            let m = ss::steady_mode(&p).ok()?;
            let (small, large) = ss::alpha_limits(&p).unwrap_or((f64::NAN, f64::NAN));
            Some((m.kappa.re, m.alpha, small, large))
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, row) in rows.iter().enumerate() {
        if let Some((_, a, _, _)) = row {
            if best.map_or(true, |b| *a > b.1) {
                best = Some((i, *a));
            }
        }
    }
    let masked = rows.iter().filter(|r| r.is_none()).count();
    let file = artifact("steady", |w| {
        writeln!(w, "{}kappa,alpha,alpha_small_J,alpha_large_J,ok", axis_header(r))?;
        for (cell, row) in cells.iter().zip(&rows) {
            let (k, a, s, l) = row.unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
            writeln!(w, "{}{k},{a},{s},{l},{}", axis_values(cell), row.is_some() as u8)?;
        }
        Ok(())
    })?;
    Ok(RunOutput {
        artifacts: vec![file],
        headline: json!({
            "cells": cells.len(),
            "masked": masked,
            "max_alpha": best.map(|b| b.1),
            "argmax": best.map(|b| cell_json(&cells[b.0])),
        }),
    })
}

fn run_nonlinear(r: &Resolved) -> Result<RunOutput> {
    let cells = cells(r);
    let extra: Vec<&str> =
        r.axes.iter().map(|a| a.name.as_str()).filter(|n| !matches!(*n, "J" | "T1_inv" | "Un")).collect();
    let rows: Vec<Vec<ScanRow>> = cells
        .par_iter()
        .map(|cell| {
            let p = apply_axes(&r.params, cell, r.initial.n0);
            let un = cell.iter().find(|(n, _)| *n == "Un").map_or(r.params.u * r.initial.n0 as f64, |c| c.1);
            ss::scan_point(&p, p.j, p.rates().t1_inv, un)
        })
        .collect();
    let all: Vec<&ScanRow> = rows.iter().flatten().collect();
    let masked = all.iter().filter(|row| row.branch_id < 0).count();
    let best = all.iter().filter(|row| row.branch_id >= 0).max_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let max_solutions = all.iter().map(|row| row.n_solutions).max().unwrap_or(0);
    let file = artifact("nonlinear_steady", |w| {
        let head: String = extra.iter().map(|n| format!("{n},")).collect();
        writeln!(w, "{head}J,T1_inv,Un,kappa,alpha,n_solutions,branch_id")?;
        for (cell, group) in cells.iter().zip(&rows) {
            let prefix: String =
                cell.iter().filter(|(n, _)| extra.contains(n)).map(|(_, v)| format!("{v},")).collect();
            for row in group {
                writeln!(
                    w,
                    "{prefix}{},{},{},{},{},{},{}",
                    row.j, row.t1_inv, row.un, row.kappa, row.alpha, row.n_solutions, row.branch_id
                )?;
            }
        }
        Ok(())
    })?;
    Ok(RunOutput {
        artifacts: vec![file],
        headline: json!({
            "cells": cells.len(),
            "rows": all.len(),
            "masked": masked,
            "max_solutions": max_solutions,
            "max_alpha": best.map(|b| b.alpha),
            "argmax": best.map(|b| json!({"J": b.j, "T1_inv": b.t1_inv, "Un": b.un})),
        }),
    })
}

fn run_response(r: &Resolved) -> Result<RunOutput> {
    let axis = |name: &str, default: f64| {
        r.axes.iter().find(|a| a.name == name).map_or_else(|| vec![default], |a| a.values.clone())
    };
    let j0 = axis("J0", r.params.j);
    let t1 = axis("T1_inv", r.params.rates().t1_inv);
    let surface = response_surface(&r.params, &j0, &t1, r.surface);
    let mut best: Option<(f64, f64, f64)> = None;
    let mut masked = 0;
    for (i, row) in surface.values.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            match v {
                Some(v) if best.map_or(true, |b| *v > b.2) => best = Some((j0[i], t1[k], *v)),
                Some(_) => {}
                None => masked += 1,
            }
        }
    }
    let file = artifact("response", |w| surface.write_csv(r.params.epsilon, w))?;
    Ok(RunOutput {
        artifacts: vec![file],
        headline: json!({
            "cells": j0.len() * t1.len(),
            "masked": masked,
            "max_response": best.map(|b| b.2),
            "argmax": best.map(|b| json!({"J0": b.0, "T1_inv": b.1})),
        }),
    })
}

/// Equal-weight average of the measurement statistics of several states.
fn mean_distributions(states: &[QuantumState]) -> MeasurementDistributions {
    let mut sz: BTreeMap<i64, f64> = BTreeMap::new();
    let mut phi = vec![0.0; PHI_BINS];
    let mut centers = Vec::new();
    let w = 1.0 / states.len() as f64;
    for s in states {
        let d = measurement_distributions(s);
        for (m, p) in d.sz {
            *sz.entry((2.0 * m).round() as i64).or_insert(0.0) += w * p;
        }
        for (acc, p) in phi.iter_mut().zip(&d.phi) {
            *acc += w * p;
        }
        centers = d.phi_centers;
    }
    MeasurementDistributions { sz: sz.into_iter().map(|(k, p)| (0.5 * k as f64, p)).collect(), phi_centers: centers, phi }
}

fn mean_husimi(states: &[QuantumState]) -> HusimiGrid {
    let (nt, np) = HUSIMI_MESH;
    let grids: Vec<HusimiGrid> = states.par_iter().map(|s| husimi_q(s, nt, np)).collect();
    let mut out = grids[0].clone();
    let w = 1.0 / grids.len() as f64;
    for (i, q) in out.q.iter_mut().enumerate() {
        *q = grids.iter().map(|g| g.q[i]).sum::<f64>() * w;
    }
    out
}

fn run_mcwf(r: &Resolved) -> Result<RunOutput> {
    let psi0 = QuantumState::coherent(r.initial.n0, r.initial.theta, r.initial.phi);
    let options = McwfOptions { keep_final_states: true, ..McwfOptions::default() };
    let seed = r.seed.expect("validated");
    let ens = quantum::mcwf_ensemble(&psi0, &r.params, &r.drive, (0.0, r.t_end()), &r.grid, r.trajectories, seed, &options)
        .context("mcwf: propagating the trajectory ensemble")?;
    for f in &ens.failures {
        eprintln!("warning: trajectory {} failed at t = {}: {}", f.index, f.t, f.reason);
    }
    let dist = mean_distributions(&ens.final_states);
    let husimi = mean_husimi(&ens.final_states);
    let last = ens.series.len() - 1;
    let se = ens.series.errors.as_ref().expect("ensemble errors");
    let m = ens.completed() as f64;
    let mut jumps = [0.0; 4];
    for c in &ens.jump_counts {
        for k in 0..4 {
            jumps[k] += c[k] as f64 / m;
        }
    }
    let headline = json!({
        "t_end": ens.series.t[last],
        "alpha": num(ens.series.alpha[last]),
        "alpha_se": num(se.alpha[last]),
        "purity": num(ens.series.purity[last]),
        "purity_se": num(se.purity[last]),
        "n": num(ens.series.n[last]),
        "n_se": num(se.n[last]),
        "trajectories": ens.completed(),
        "failures": ens.failures.len(),
        "mean_jumps": {"dephase1": jumps[0], "dephase2": jumps[1], "loss1": jumps[2], "loss2": jumps[3]},
        "husimi_argmax": husimi.argmax(),
    });
    Ok(RunOutput {
        artifacts: vec![
            artifact("ensemble", |w| ens.series.write_ensemble_csv(w))?,
            artifact("histograms", |w| dist.write_csv(w))?,
            artifact("husimi", |w| husimi.write_csv(w))?,
        ],
        headline,
    })
}

fn run_master(r: &Resolved) -> Result<RunOutput> {
    let rho0 = QuantumState::coherent(r.initial.n0, r.initial.theta, r.initial.phi);
    let run = quantum::propagate_master(&rho0, &r.params, &r.drive, (0.0, r.t_end()), &r.grid, &MasterOptions::default())
        .context("master: propagating the density matrix")?;
    let trace_drift = run.states.iter().map(|s| (s.trace() - 1.0).abs()).fold(0.0, f64::max);
    let min_eig = run.states.iter().map(|s| s.min_eigenvalue()).fold(f64::INFINITY, f64::min);
    let last = QuantumState::Mixed(run.states.last().expect("non-empty grid").clone());
    let dist = measurement_distributions(&last);
    let (nt, np) = HUSIMI_MESH;
    let husimi = husimi_q(&last, nt, np);
    let mut headline = series_headline(&run.series);
    headline["trace_drift"] = num(trace_drift);
    headline["min_eigenvalue"] = num(min_eig);
    headline["husimi_argmax"] = json!(husimi.argmax());
    Ok(RunOutput {
        artifacts: vec![
            artifact("timeseries", |w| run.series.write_csv(w))?,
            artifact("histograms", |w| dist.write_csv(w))?,
            artifact("husimi", |w| husimi.write_csv(w))?,
        ],
        headline,
    })
}

fn stability_name(s: Stability) -> &'static str {
    match s {
        Stability::Attractive => "attractive",
        Stability::Repulsive => "repulsive",
        Stability::Elliptic => "elliptic",
        Stability::Saddle => "saddle",
    }
}

fn run_fixedpoints(r: &Resolved) -> Result<RunOutput> {
    let n = r.initial.n0 as f64;
    let fps = meanfield::find_fixed_points(&r.params, n).context("fixedpoints: locating stationary directions")?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for f in &fps {
        *counts.entry(stability_name(f.stability)).or_insert(0) += 1;
    }
    let p = &r.params;
    let closed = p.gamma_p == 0.0 && p.gamma_a1 == 0.0 && p.gamma_a2 == 0.0;
    // self-trapping sets in at Un = 2J without dissipation
    let threshold = (closed && p.j != 0.0)
        .then(|| meanfield::bifurcation_threshold(p, n, 0.0, 10.0 * p.j.abs(), 1e-8).ok())
        .flatten();
    let file = artifact("fixedpoints", |w| {
        writeln!(w, "ux,uy,uz,stability,lambda1_re,lambda1_im,lambda2_re,lambda2_im")?;
        for f in &fps {
            let [a, b] = f.jacobian_eigenvalues;
            let d = f.direction;
            writeln!(w, "{},{},{},{},{},{},{},{}", d[0], d[1], d[2], stability_name(f.stability), a.re, a.im, b.re, b.im)?;
        }
        Ok(())
    })?;
    Ok(RunOutput {
        artifacts: vec![file],
        headline: json!({
            "Un": p.u * n,
            "fixed_points": fps.len(),
            "by_stability": counts,
            "bifurcation_Un": threshold,
        }),
    })
}

fn run_scan(r: &Resolved) -> Result<RunOutput> {
    let cells = cells(r);
    let t_end = *r.sample_times.last().expect("validated");
    let n0 = r.initial.n0;
    let init = BlochState::coherent(n0 as f64, r.initial.theta, r.initial.phi);
    let results: Vec<Option<ObservableSeries>> = cells
        .par_iter()
        .map(|cell| {
            let p = apply_axes(&r.params, cell, n0);
            p.validate().ok()?;
            meanfield::integrate(&init, &p, &r.drive, (0.0, t_end), &r.sample_times).ok()
        })
        .collect();
    let masked = results.iter().filter(|s| s.is_none()).count();
    let last = r.sample_times.len() - 1;
    let mut best_purity: Option<(usize, f64)> = None;
    let mut best_alpha: Option<(usize, f64)> = None;
    for (i, s) in results.iter().enumerate() {
        if let Some(s) = s {
            if s.purity[last].is_finite() && best_purity.map_or(true, |b| s.purity[last] > b.1) {
                best_purity = Some((i, s.purity[last]));
            }
            if s.alpha[last].is_finite() && best_alpha.map_or(true, |b| s.alpha[last] > b.1) {
                best_alpha = Some((i, s.alpha[last]));
            }
        }
    }
    let file = artifact("scan", |w| {
        writeln!(w, "{}t,s_x,s_y,s_z,n,alpha,purity,ok", axis_header(r))?;
        for (cell, s) in cells.iter().zip(&results) {
            let prefix = axis_values(cell);
            for (k, &t) in r.sample_times.iter().enumerate() {
                match s {
                    Some(s) => writeln!(
                        w,
                        "{prefix}{t},{},{},{},{},{},{},1",
                        s.s_x[k], s.s_y[k], s.s_z[k], s.n[k], s.alpha[k], s.purity[k]
                    )?,
                    None => writeln!(w, "{prefix}{t},NaN,NaN,NaN,NaN,NaN,NaN,0")?,
                }
            }
        }
        Ok(())
    })?;
    let best = |b: Option<(usize, f64)>| b.map(|(i, v)| json!({"value": v, "at": cell_json(&cells[i])}));
    Ok(RunOutput {
        artifacts: vec![file],
        headline: json!({
            "cells": cells.len(),
            "masked": masked,
            "t": t_end,
            "max_purity": best(best_purity),
            "max_alpha": best(best_alpha),
        }),
    })
}
