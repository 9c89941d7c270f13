//! Figure-reproduction presets. Each preset expands into one or more runs
//! whose labels name the figure panel they reproduce.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::fmt;

use becsim_core::meanfield::DriveSpec;
use becsim_core::response::SurfaceDrive;

use crate::config::{InitialState, Mode, ParamSpec, RunConfig, ScanAxis, TimeGrid};

pub const PRESETS: &[&str] =
    &["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11", "fig12"];

/// Seed used by trajectory presets unless overridden on the command line.
pub const PRESET_SEED: u64 = 1;

/// Loss asymmetry assumed where a caption gives only a loss rate.
pub const DEFAULT_F_A: f64 = 0.5;

/// Initial state of the "pure BEC with s_z = n/2" captions. The captions
/// use the opposite sign of `s_z`; in our convention the majority sits in
/// the well with the weaker loss when `f_a > 0`.
const STRONG_THETA: f64 = 2.0 * std::f64::consts::PI / 3.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownPreset(pub String);

impl fmt::Display for UnknownPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown preset {:?}; valid presets: {}", self.0, PRESETS.join(", "))
    }
}

impl std::error::Error for UnknownPreset {}

fn run(label: &str, mode: Mode, params: ParamSpec) -> RunConfig {
    let mut c = RunConfig::new(mode, params);
    c.label = Some(label.to_string());
    c
}

fn with_time(mut c: RunConfig, t_end: f64, points: usize) -> RunConfig {
    c.time = Some(TimeGrid { t_end, points });
    c
}

fn with_initial(mut c: RunConfig, theta: f64, n0: usize) -> RunConfig {
    c.initial = InitialState { theta, phi: 0.0, n0 };
    c
}

fn with_axes(mut c: RunConfig, axes: Vec<ScanAxis>) -> RunConfig {
    c.scan = axes;
    c
}

fn trajectories(mut c: RunConfig, count: usize) -> RunConfig {
    c.seed = Some(PRESET_SEED);
    c.trajectories = count;
    c
}

fn fig2() -> Vec<RunConfig> {
    let p = ParamSpec::loss(2.0, 0.0, 0.0, 5.0, 2.0, DEFAULT_F_A);
    vec![
        with_axes(
            run("fig2a", Mode::Steady, p),
            vec![ScanAxis::range("J", 0.1, 10.0, 61, true), ScanAxis::range("T1_inv", 0.1, 10.0, 61, true)],
        ),
        with_axes(run("fig2b", Mode::Steady, p), vec![ScanAxis::range("T1_inv", 0.05, 20.0, 201, true)]),
        with_axes(run("fig2c", Mode::Steady, p), vec![ScanAxis::range("J", 0.05, 20.0, 201, true)]),
    ]
}

fn fig3() -> Vec<RunConfig> {
    let p = ParamSpec::loss(4.0, 0.0, 10.0, 5.0, 1.0, DEFAULT_F_A);
    let ab = with_initial(with_time(run("fig3ab", Mode::Meanfield, p), 3.0, 301), FRAC_PI_3, 100);
    let mut c = with_initial(
        with_axes(run("fig3c", Mode::Scan, p), vec![ScanAxis::range("J", 0.1, 20.0, 101, true)]),
        FRAC_PI_3,
        100,
    );
    c.sample_times = vec![0.5, 1.0, 1.5];
    vec![ab, c]
}

fn fig4() -> Vec<RunConfig> {
    let p = ParamSpec::loss(1.0, 0.0, 0.0, 5.0, 2.0, DEFAULT_F_A);
    let j = ScanAxis::range("J", 0.05, 20.0, 121, true);
    vec![
        with_axes(run("fig4a", Mode::Steady, p), vec![ScanAxis::list("epsilon", &[0.0, 5.0, 10.0]), j.clone()]),
        with_axes(run("fig4b", Mode::NonlinearSteady, p), vec![ScanAxis::list("Un", &[0.0, 5.0, 10.0]), j]),
    ]
}

fn fig5() -> Vec<RunConfig> {
    // the caption leaves the three tunneling rates of panel (a) open
    let mut runs: Vec<RunConfig> = [1.0, 3.0, 10.0]
        .into_iter()
        .map(|j| {
            let p = ParamSpec::loss(j, 0.1, 10.0, 5.0, 2.0, DEFAULT_F_A);
            trajectories(with_initial(with_time(run(&format!("fig5a_J{j}"), Mode::Mcwf, p), 1.5, 31), STRONG_THETA, 100), 100)
        })
        .collect();
    let p = ParamSpec::loss(1.0, 0.1, 10.0, 5.0, 2.0, DEFAULT_F_A);
    let mut b = with_initial(
        with_axes(run("fig5b", Mode::Scan, p), vec![ScanAxis::range("J", 0.1, 50.0, 121, true)]),
        STRONG_THETA,
        100,
    );
    b.sample_times = vec![1.5];
    runs.push(b);
    runs
}

fn fig6() -> Vec<RunConfig> {
    [("fig6a", 0.5), ("fig6b", 1.5), ("fig6c", 5.0)]
        .into_iter()
        .map(|(label, j0)| {
            let mut c = with_time(run(label, Mode::Meanfield, ParamSpec::loss(j0, 0.0, 0.0, 5.0, 2.0, DEFAULT_F_A)), 20.0, 2001);
            c.drive = DriveSpec::tunneling(j0, 0.1 * j0, 0.0, j0);
            c
        })
        .collect()
}

fn response_runs(prefix: &str, p: ParamSpec, drive: SurfaceDrive, j0_slice: f64, t1_slice: f64) -> Vec<RunConfig> {
    let j0 = ScanAxis::range("J0", 0.25, 5.0, 61, true);
    let t1 = ScanAxis::range("T1_inv", 0.25, 10.0, 61, true);
    let dense_j0 = ScanAxis::range("J0", 0.25, 5.0, 201, true);
    let dense_t1 = ScanAxis::range("T1_inv", 0.25, 10.0, 201, true);
    let mut runs = vec![
        with_axes(run(&format!("{prefix}a"), Mode::Response, p), vec![j0, t1]),
        with_axes(run(&format!("{prefix}b"), Mode::Response, p), vec![ScanAxis::list("J0", &[j0_slice]), dense_t1]),
        with_axes(run(&format!("{prefix}c"), Mode::Response, p), vec![dense_j0, ScanAxis::list("T1_inv", &[t1_slice])]),
    ];
    for r in &mut runs {
        r.response = Some(drive);
    }
    runs
}

fn fig7() -> Vec<RunConfig> {
    let p = ParamSpec::loss(2.5, 0.0, 0.0, 5.0, 2.0, DEFAULT_F_A);
    response_runs("fig7", p, SurfaceDrive::Tunneling { ratio: 0.1 }, 2.5, 2.0)
}

fn fig8() -> Vec<RunConfig> {
    let p = ParamSpec::loss(2.0, 0.0, 0.0, 5.0, 4.0, DEFAULT_F_A);
    let mut ab = with_time(run("fig8ab", Mode::Meanfield, p), 20.0, 2001);
    ab.drive = DriveSpec::bias(2.0, 0.0, 1.0, 2.0);
    let mut runs = vec![ab];
    let mut c = response_runs("fig8", p, SurfaceDrive::Bias { eps1: 1.0 }, 2.0, 4.0);
    runs.push(c.remove(0));
    runs[1].label = Some("fig8c".into());
    runs
}

fn strong(label: &str, p: ParamSpec, mcwf: bool) -> RunConfig {
    if mcwf {
        trajectories(with_initial(with_time(run(label, Mode::Mcwf, p), 4.0, 81), STRONG_THETA, 100), 100)
    } else {
        with_initial(with_time(run(label, Mode::Meanfield, p), 4.0, 401), STRONG_THETA, 100)
    }
}

fn fig9() -> Vec<RunConfig> {
    let p = ParamSpec::loss(10.0, 10.0, 0.0, 5.0, 2.0, DEFAULT_F_A);
    let linear = ParamSpec { u: 0.0, ..p };
    let closed = ParamSpec::loss(10.0, 10.0, 0.0, 0.0, 0.0, DEFAULT_F_A);
    // without any dissipation every trajectory is the same unitary evolution
    let mut c = strong("fig9c_mcwf", closed, true);
    c.trajectories = 1;
    vec![strong("fig9a_meanfield", p, false), strong("fig9a_mcwf", p, true), strong("fig9b_meanfield", linear, false), c]
}

fn fig10() -> Vec<RunConfig> {
    let n0 = 100;
    let un = 40.0;
    let u = un / n0 as f64;
    [
        ("fig10a", ParamSpec::loss(10.0, 0.0, 0.0, 0.0, 0.0, DEFAULT_F_A)),
        ("fig10b", ParamSpec::loss(10.0, u, 0.0, 0.0, 0.0, DEFAULT_F_A)),
        ("fig10c", ParamSpec::loss(10.0, u, 0.0, 0.0, 10.0, DEFAULT_F_A)),
    ]
    .into_iter()
    .map(|(label, p)| with_initial(run(label, Mode::Fixedpoints, p), FRAC_PI_2, n0))
    .collect()
}

fn fig11() -> Vec<RunConfig> {
    let mut runs = Vec::new();
    for (panel, t1) in [("a", 0.5), ("b", 1.5), ("c", 2.5)] {
        let p = ParamSpec::loss(10.0, 10.0, 0.0, 5.0, t1, DEFAULT_F_A);
        runs.push(strong(&format!("fig11{panel}_meanfield"), p, false));
        runs.push(strong(&format!("fig11{panel}_mcwf"), p, true));
    }
    runs
}

fn fig12() -> Vec<RunConfig> {
    let p = ParamSpec::loss(10.0, 10.0, 0.0, 5.0, 2.0, DEFAULT_F_A);
    let mut c = with_initial(
        with_axes(
            run("fig12", Mode::Scan, p),
            vec![ScanAxis::list("Un", &[500.0, 1000.0, 1500.0]), ScanAxis::range("T1_inv", 0.0, 5.0, 101, false)],
        ),
        STRONG_THETA,
        100,
    );
    c.sample_times = vec![2.0];
    vec![c]
}

/// Runs of a named figure preset.
pub fn preset(name: &str) -> Result<Vec<RunConfig>, UnknownPreset> {
    let runs = match name {
        "fig2" => fig2(),
        "fig3" => fig3(),
        "fig4" => fig4(),
        "fig5" => fig5(),
        "fig6" => fig6(),
        "fig7" => fig7(),
        "fig8" => fig8(),
        "fig9" => fig9(),
        "fig10" => fig10(),
        "fig11" => fig11(),
        "fig12" => fig12(),
        _ => return Err(UnknownPreset(name.to_string())),
    };
    Ok(runs
        .into_iter()
        .map(|mut r| {
            r.preset = Some(name.to_string());
            r
        })
        .collect())
}
