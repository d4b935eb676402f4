use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::scenario::{random_state, InitialFamily, Scenario};
use crate::embedding::{
    gn_diagnostic, riemann_embed, xi_zeta, ConvergenceReport, ConvergenceRow, CubeLabeling,
};
use crate::error::{Error, Result};
use crate::graph::{
    grids_to_state, solve_coupled_picard, solve_direct, ContinuumTrajectory, PicardConfig,
};
use crate::meanfield::{
    continuum_measure, empirical_measure, w1_1d, w1_discrete, MAX_TRANSPORT_ATOMS,
};
use crate::model::{rhs_masses, rhs_masses_bruteforce, rhs_positions, DiscreteState};
use crate::sim::{
    separation_ratio, simulate, IntegratorConfig, InvariantLog, SimulationOutput, Trajectory,
};

/// Outcome of one harness run: invariant violations (non-empty means the
/// run failed its checks), the files written and a JSON summary.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub violations: Vec<String>,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// Writes `name` inside `dir` through a temporary file renamed into place.
pub fn write_atomic<F>(dir: &Path, name: &str, fill: F) -> Result<PathBuf>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
    Ok(path)
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<PathBuf> {
    write_atomic(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Io(e.into()))?;
        writeln!(w)?;
        Ok(())
    })
}

fn scenario_dir(out: Option<&Path>, s: &Scenario) -> Option<PathBuf> {
    out.map(|o| o.join(&s.name))
}

/// Levels actually simulated: fixed families have a single particle count.
fn particle_levels(s: &Scenario) -> Vec<usize> {
    match s.initial {
        InitialFamily::Pair { .. } => vec![2],
        InitialFamily::Singleton { .. } => vec![1],
        _ => s.levels.clone(),
    }
}

fn require_continuum(s: &Scenario) -> Result<()> {
    if s.initial.is_continuum() {
        Ok(())
    } else {
        Err(Error::precondition(format!(
            "scenario '{}' uses the '{}' family, which has no continuum form",
            s.name,
            s.initial.name()
        )))
    }
}

#[derive(Serialize)]
struct LevelInvariants {
    n: usize,
    particles: usize,
    max_mass_dev: f64,
    min_env_ratio: f64,
    min_env_ratio_literal: f64,
    max_pos_ratio: f64,
    min_sep_ratio: f64,
    empirical_separation_constant: f64,
    opinion_bound: f64,
    envelope_rate: f64,
    envelope_rate_literal: f64,
    halted_at: Option<f64>,
}

fn level_invariants(n: usize, sim: &SimulationOutput) -> LevelInvariants {
    let log: &InvariantLog = &sim.log;
    let fold =
        |f: &dyn Fn(&crate::sim::InvariantRecord) -> f64, init: f64, pick: fn(f64, f64) -> f64| {
            log.records.iter().map(f).fold(init, pick)
        };
    LevelInvariants {
        n,
        particles: sim.trajectory.initial().len(),
        max_mass_dev: log.max_mass_dev(),
        min_env_ratio: fold(&|r| r.min_env_ratio, f64::INFINITY, f64::min),
        min_env_ratio_literal: fold(&|r| r.min_env_ratio_literal, f64::INFINITY, f64::min),
        max_pos_ratio: fold(&|r| r.max_pos_ratio, 0.0, f64::max),
        min_sep_ratio: log.min_sep_ratio(),
        empirical_separation_constant: log.empirical_separation_constant,
        opinion_bound: log.opinion_bound,
        envelope_rate: log.envelope_rate,
        envelope_rate_literal: log.envelope_rate_literal,
        halted_at: sim.halt.as_ref().map(|h| h.time),
    }
}

fn simulate_level(
    s: &Scenario,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<(SimulationOutput, Vec<String>)> {
    let state = s.initial_state(n)?;
    let params = s.params_for(&state);
    let sim = simulate(&state, cfg, &s.kernel(), &s.sign(), &params)?;
    let mut violations: Vec<String> = sim
        .log
        .violations(&s.tolerances)
        .into_iter()
        .map(|v| format!("N={n}: {v}"))
        .collect();
    if let Some(h) = &sim.halt {
        violations.push(format!(
            "N={n}: particles {:?} reached distance {:e} at t={}; run halted",
            h.pair, h.min_distance, h.time
        ));
    }
    Ok((sim, violations))
}

/// Particle simulations for every level, with trajectory and invariant CSVs.
pub fn run_simulate(s: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    let dir = scenario_dir(out, s);
    let levels = particle_levels(s);
    let results: Vec<Result<(usize, SimulationOutput, Vec<String>)>> = levels
        .par_iter()
        .map(|&n| {
            let (sim, v) = simulate_level(s, n, &s.integrator)?;
            Ok((n, sim, v))
        })
        .collect();
    let mut report = RunReport {
        scenario: s.name.clone(),
        violations: Vec::new(),
        files: Vec::new(),
        summary: json!(null),
    };
    let mut levels_json = Vec::new();
    for r in results {
        let (n, sim, v) = r?;
        if let Some(dir) = &dir {
            report
                .files
                .push(write_atomic(dir, &format!("trajectory_N{n}.csv"), |w| {
                    sim.trajectory.write_csv(w)
                })?);
            report
                .files
                .push(write_atomic(dir, &format!("invariants_N{n}.csv"), |w| {
                    sim.log.write_csv(w)
                })?);
        }
        levels_json.push(level_invariants(n, &sim));
        report.violations.extend(v);
    }
    report.summary = json!({
        "scenario": s, "command": "simulate", "seed": s.seed,
        "levels": levels_json, "violations": report.violations,
    });
    if let Some(dir) = &dir {
        report
            .files
            .push(write_json(dir, "simulate_summary.json", &report.summary)?);
    }
    Ok(report)
}

fn continuum_as_trajectory(traj: &ContinuumTrajectory) -> Result<Trajectory> {
    Trajectory::new(
        traj.frames()
            .iter()
            .map(|f| grids_to_state(f.t, &f.x, &f.m))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// Direct continuum solves at every level, with optional Picard
/// cross-validation.
pub fn run_graphlimit(s: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    require_continuum(s)?;
    let dir = scenario_dir(out, s);
    let (kernel, sign) = (s.kernel(), s.sign());
    let mut report = RunReport {
        scenario: s.name.clone(),
        violations: Vec::new(),
        files: Vec::new(),
        summary: json!(null),
    };
    let mut levels_json = Vec::new();
    for &k in &s.levels {
        let (x0, m0) = s.initial_grids(k)?;
        let traj = solve_direct(&x0, &m0, &s.integrator, s.horizon, &kernel, &sign)?;
        let mass_dev = traj
            .frames()
            .iter()
            .map(|f| (f.m.integral()[0] - 1.0).abs())
            .fold(0.0, f64::max);
        if mass_dev > s.tolerances.mass {
            report
                .violations
                .push(format!("K={k}: mass integral deviates by {mass_dev:e}"));
        }
        let as_particles = continuum_as_trajectory(&traj)?;
        let lip = kernel.lipschitz();
        let mut min_sep = f64::INFINITY;
        for i in 0..as_particles.frames().len() {
            min_sep = min_sep.min(separation_ratio(&as_particles, i, lip)?);
        }
        if min_sep < 1.0 - s.tolerances.separation {
            report
                .violations
                .push(format!("K={k}: separation ratio {min_sep}"));
        }
        let mut level = json!({ "k": k, "max_mass_dev": mass_dev, "min_sep_ratio": min_sep });
        if s.picard && k <= 32 {
            let (steps, dt) = s.integrator.time_grid(s.horizon);
            let pcfg = PicardConfig::new(s.horizon, dt);
            let picard = solve_coupled_picard(&x0, &m0, &pcfg, &kernel, &sign)?;
            let fine = IntegratorConfig {
                record_every: 1,
                ..s.integrator
            };
            let reference = solve_direct(&x0, &m0, &fine, s.horizon, &kernel, &sign)?;
            debug_assert_eq!(reference.frames().len(), steps + 1);
            let mut diff = 0.0_f64;
            for (p, d) in picard.trajectory.frames().iter().zip(reference.frames()) {
                for (a, b) in
                    p.x.values()
                        .iter()
                        .zip(d.x.values())
                        .chain(p.m.values().iter().zip(d.m.values()))
                {
                    diff = diff.max((a - b).abs());
                }
            }
            let contraction = picard
                .x_windows
                .iter()
                .chain(&picard.m_windows)
                .filter_map(|w| w.max_contraction())
                .fold(0.0, f64::max);
            if diff > s.cross_tolerance {
                report.violations.push(format!(
                    "K={k}: Picard and direct solutions differ by {diff:e}"
                ));
            }
            if contraction >= 1.0 {
                report.violations.push(format!(
                    "K={k}: Picard sweep ratio {contraction} is not a contraction"
                ));
            }
            level["picard"] = json!({
                "sup_difference": diff,
                "outer_diffs": picard.outer_diffs,
                "max_sweep_ratio": contraction,
                "x_windows": picard.x_windows.len(),
                "m_windows": picard.m_windows.len(),
            });
        }
        if let Some(dir) = &dir {
            report
                .files
                .push(write_atomic(dir, &format!("continuum_K{k}.csv"), |w| {
                    traj.write_csv(w)
                })?);
        }
        levels_json.push(level);
    }
    report.summary = json!({
        "scenario": s, "command": "graphlimit", "seed": s.seed,
        "levels": levels_json, "violations": report.violations,
    });
    if let Some(dir) = &dir {
        report
            .files
            .push(write_json(dir, "graphlimit_summary.json", &report.summary)?);
    }
    Ok(report)
}

struct LevelStudy {
    n: usize,
    rows: Vec<ConvergenceRow>,
    /// Largest `|w1_1d - w1_discrete|` over sampled times (one-dimensional only).
    flow_discrepancy: Option<f64>,
    invariants: LevelInvariants,
    violations: Vec<String>,
}

fn study_level(
    s: &Scenario,
    n: usize,
    reference: &ContinuumTrajectory,
    flow_check: bool,
) -> Result<LevelStudy> {
    let cfg = s.sampling_integrator();
    let (sim, violations) = simulate_level(s, n, &cfg)?;
    let labeling = CubeLabeling::new(s.dim, n)?;
    let (kernel, sign) = (s.kernel(), s.sign());
    let frames = sim.trajectory.frames();
    if frames.len() != reference.frames().len() {
        return Err(Error::Solver(format!(
            "N={n}: {} particle frames against {} reference frames",
            frames.len(),
            reference.frames().len()
        )));
    }
    let mut rows = Vec::with_capacity(frames.len());
    let mut flow_discrepancy = None::<f64>;
    for (state, r) in frames.iter().zip(reference.frames()) {
        debug_assert!((state.time() - r.t).abs() < 1e-12);
        let (xe, me) = riemann_embed(state, &labeling)?;
        let (xi, zeta) = xi_zeta(&xe, &me, &r.x, &r.m)?;
        let gn = gn_diagnostic(&r.x, &r.m, n, &kernel, &sign)?;
        let w1 = if s.w1 {
            let (mu_n, mu) = (empirical_measure(state)?, continuum_measure(&r.x, &r.m)?);
            if s.dim == 1 {
                let exact = w1_1d(&mu_n, &mu)?;
                if flow_check && mu_n.len() + mu.len() <= MAX_TRANSPORT_ATOMS {
                    let d = (exact - w1_discrete(&mu_n, &mu)?).abs();
                    flow_discrepancy = Some(flow_discrepancy.unwrap_or(0.0).max(d));
                }
                Some(exact)
            } else {
                Some(w1_discrete(&mu_n, &mu)?)
            }
        } else {
            None
        };
        rows.push(ConvergenceRow {
            n,
            t: state.time(),
            xi,
            zeta,
            gn,
            w1,
        });
    }
    Ok(LevelStudy {
        n,
        rows,
        flow_discrepancy,
        invariants: level_invariants(n, &sim),
        violations,
    })
}

struct Study {
    report: ConvergenceReport,
    levels: Vec<LevelStudy>,
}

fn run_study(s: &Scenario, flow_check: bool) -> Result<Study> {
    require_continuum(s)?;
    let (x0, m0) = s.initial_grids(s.reference_resolution)?;
    let reference = solve_direct(
        &x0,
        &m0,
        &s.sampling_integrator(),
        s.horizon,
        &s.kernel(),
        &s.sign(),
    )?;
    let levels: Vec<LevelStudy> = s
        .levels
        .par_iter()
        .map(|&n| study_level(s, n, &reference, flow_check))
        .collect::<Result<Vec<_>>>()?;
    let mut report = ConvergenceReport::new(s.dim);
    for l in &levels {
        report.extend(l.rows.iter().copied())?;
    }
    Ok(Study { report, levels })
}

/// Graph-limit convergence study against the reference continuum solution.
pub fn run_converge(s: &Scenario, out: Option<&Path>) -> Result<(RunReport, ConvergenceReport)> {
    let study = run_study(s, false)?;
    let summary = study.report.summary();
    let mut violations: Vec<String> = study
        .levels
        .iter()
        .flat_map(|l| l.violations.clone())
        .collect();
    if !summary.error_strictly_decreasing() {
        let sups: Vec<f64> = summary.levels.iter().map(|l| l.sup_xi_plus_zeta).collect();
        violations.push(format!(
            "sup_t(xi + zeta) is not strictly decreasing across levels: {sups:?}"
        ));
    }
    let invariants: Vec<&LevelInvariants> = study.levels.iter().map(|l| &l.invariants).collect();
    let json = json!({
        "scenario": s, "command": "converge", "seed": s.seed,
        "reference_resolution": s.reference_resolution,
        "summary": summary,
        "error_strictly_decreasing": summary.error_strictly_decreasing(),
        "gn_strictly_decreasing": summary.gn_strictly_decreasing(),
        "invariants": invariants,
        "violations": violations,
    });
    let mut report = RunReport {
        scenario: s.name.clone(),
        violations,
        files: Vec::new(),
        summary: json,
    };
    if let Some(dir) = scenario_dir(out, s) {
        report.files.push(write_atomic(&dir, "converge.csv", |w| {
            study.report.write_csv(w)
        })?);
        report
            .files
            .push(write_json(&dir, "converge_summary.json", &report.summary)?);
    }
    Ok((report, study.report))
}

/// Wasserstein-1 distances between the empirical and continuum measures.
pub fn run_meanfield(s: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    let s = Scenario {
        w1: true,
        ..s.clone()
    };
    let study = run_study(&s, true)?;
    let mut violations: Vec<String> = study
        .levels
        .iter()
        .flat_map(|l| l.violations.clone())
        .collect();
    let times: Vec<f64> = study.levels[0].rows.iter().map(|r| r.t).collect();
    let mut per_time = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let w: Vec<f64> = study
            .levels
            .iter()
            .map(|l| l.rows[k].w1.expect("w1 enabled"))
            .collect();
        let decreasing = w.windows(2).all(|p| p[1] < p[0]);
        if !decreasing {
            violations.push(format!("t={t}: W1 not decreasing across levels: {w:?}"));
        }
        per_time.push(json!({ "t": t, "w1": w, "decreasing": decreasing }));
    }
    let discrepancy = study
        .levels
        .iter()
        .filter_map(|l| l.flow_discrepancy)
        .reduce(f64::max);
    if let Some(d) = discrepancy {
        if d > 1e-9 {
            violations.push(format!("exact and flow W1 differ by {d:e}"));
        }
    }
    let json = json!({
        "scenario": s, "command": "meanfield", "seed": s.seed,
        "reference_resolution": s.reference_resolution,
        "levels": study.levels.iter().map(|l| l.n).collect::<Vec<_>>(),
        "per_time": per_time,
        "max_flow_discrepancy": discrepancy,
        "violations": violations,
    });
    let mut report = RunReport {
        scenario: s.name.clone(),
        violations,
        files: Vec::new(),
        summary: json,
    };
    if let Some(dir) = scenario_dir(out, &s) {
        let rows = study.report.rows().to_vec();
        report.files.push(write_atomic(&dir, "meanfield.csv", |w| {
            writeln!(w, "N,t,w1")?;
            for r in &rows {
                writeln!(w, "{},{:e},{:e}", r.n, r.t, r.w1.unwrap_or(f64::NAN))?;
            }
            Ok(())
        })?);
        report
            .files
            .push(write_json(&dir, "meanfield_summary.json", &report.summary)?);
    }
    Ok(report)
}

/// Timing of one bench size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub particles: usize,
    pub factorized_seconds: f64,
    pub bruteforce_seconds: f64,
    pub max_abs_diff: f64,
}

/// Mean time per call over one sample that loops until at least 20 ms have
/// elapsed.
fn time_sample<F: FnMut()>(mut f: F) -> f64 {
    let start = Instant::now();
    let mut calls = 0u32;
    while calls == 0 || start.elapsed().as_secs_f64() < 0.02 {
        f();
        calls += 1;
    }
    start.elapsed().as_secs_f64() / calls as f64
}

/// Times the factorized and brute-force mass rates on random states. Each
/// timing is the minimum over `repeats` samples; repeats cycle through all
/// sizes so a transient slowdown does not bias a single size.
pub fn bench_rows(
    sizes: &[usize],
    repeats: usize,
    mass_spread: f64,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let sign = crate::model::SignMap::projection(1);
    let kernel = crate::model::InfluenceKernel::Saturating;
    let mut cases = Vec::with_capacity(sizes.len());
    let mut rows = Vec::with_capacity(sizes.len());
    for &p in sizes {
        let state: DiscreteState = random_state(p, mass_spread, seed)?;
        let v = rhs_positions(&state, &kernel);
        let fast = rhs_masses(&state, &v, &sign)?;
        let brute = rhs_masses_bruteforce(&state, &kernel, &sign)?;
        let max_abs_diff = fast
            .iter()
            .zip(&brute)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        cases.push((state, v));
        rows.push(BenchRow {
            particles: p,
            factorized_seconds: f64::INFINITY,
            bruteforce_seconds: f64::INFINITY,
            max_abs_diff,
        });
    }
    for _ in 0..repeats.max(1) {
        for ((state, v), row) in cases.iter().zip(&mut rows) {
            let fast = time_sample(|| {
                std::hint::black_box(rhs_masses(state, v, &sign).expect("validated"));
            });
            let brute = time_sample(|| {
                std::hint::black_box(
                    rhs_masses_bruteforce(state, &kernel, &sign).expect("validated"),
                );
            });
            row.factorized_seconds = row.factorized_seconds.min(fast);
            row.bruteforce_seconds = row.bruteforce_seconds.min(brute);
        }
    }
    Ok(rows)
}

/// Scaling benchmark; doubling ratios are checked where sizes double.
pub fn run_bench(s: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    let spread = match s.initial {
        InitialFamily::Random { mass_spread } => mass_spread,
        _ => 0.5,
    };
    let mut sizes = vec![1];
    sizes.extend(s.bench_sizes.iter().copied().filter(|&p| p > 1));
    let rows = bench_rows(&sizes, s.bench_repeats, spread, s.seed)?;
    let mut violations = Vec::new();
    let mut ratios = Vec::new();
    for w in rows
        .windows(2)
        .filter(|w| w[0].particles > 1 && w[1].particles == 2 * w[0].particles)
    {
        let f = w[1].factorized_seconds / w[0].factorized_seconds;
        let b = w[1].bruteforce_seconds / w[0].bruteforce_seconds;
        if !(3.0..=6.0).contains(&f) {
            violations.push(format!(
                "P={}->{}: factorized ratio {f:.2} outside [3, 6]",
                w[0].particles, w[1].particles
            ));
        }
        if !(6.0..=12.0).contains(&b) {
            violations.push(format!(
                "P={}->{}: brute-force ratio {b:.2} outside [6, 12]",
                w[0].particles, w[1].particles
            ));
        }
        ratios.push(json!({ "from": w[0].particles, "to": w[1].particles, "factorized": f, "bruteforce": b }));
    }
    for r in &rows {
        if r.max_abs_diff > 1e-12 {
            violations.push(format!(
                "P={}: factorized and brute-force rates differ by {:e}",
                r.particles, r.max_abs_diff
            ));
        }
    }
    let json = json!({
        "scenario": s.name, "command": "bench", "seed": s.seed,
        "rows": rows, "ratios": ratios, "violations": violations,
    });
    let mut report = RunReport {
        scenario: s.name.clone(),
        violations,
        files: Vec::new(),
        summary: json,
    };
    if let Some(dir) = scenario_dir(out, s) {
        report.files.push(write_atomic(&dir, "bench.csv", |w| {
            writeln!(w, "P,factorized_s,bruteforce_s,max_abs_diff")?;
            for r in &rows {
                writeln!(
                    w,
                    "{},{:e},{:e},{:e}",
                    r.particles, r.factorized_seconds, r.bruteforce_seconds, r.max_abs_diff
                )?;
            }
            Ok(())
        })?);
        report
            .files
            .push(write_json(&dir, "bench_summary.json", &report.summary)?);
    }
    Ok(report)
}
