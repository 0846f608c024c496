//! Run orchestration: drives the exact propagation or a trajectory ensemble
//! to the end of a run, collects series and snapshots, and writes them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::HopEvent;
use crate::config::{Method, RunConfig};
use crate::ensemble::{initial_conditions, Ensemble, EnsembleSample};
use crate::error::{Error, Result};
use crate::grid::{
    channel_probabilities, exact_observables, exact_tdpes_gi, init_gaussian_packet, probability_near,
    AdiabaticBasis, SplitOperator, EDGE_TOLERANCE, EDGE_WIDTH,
};
use crate::observables::{ChannelResult, Histogram};
use crate::output::{num, time_label, version, ErrorRecord, InvariantSummary, Manifest, Table};
use crate::sampling::InitialConditions;

/// Probability (or trajectory fraction) left inside the coupling region
/// below which a run counts as cleared.
pub const CLEAR_TOLERANCE: f64 = 1e-3;

/// Fraction that must have been inside the coupling region at some series
/// row before the clear rule can stop a run. Narrow packets start entirely
/// outside it.
pub const ENTRY_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSample {
    pub time: f64,
    pub populations: [f64; 2],
    pub coherence: f64,
    pub energy: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSnapshot {
    pub time: f64,
    pub positions: Vec<f64>,
    pub density: Vec<f64>,
    pub bo_density: [Vec<f64>; 2],
    pub tdpes_gi: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactRecord {
    pub series: Vec<ExactSample>,
    pub snapshots: Vec<ExactSnapshot>,
    pub channels: ChannelResult,
    pub max_norm_drift: f64,
    pub energy_drift: f64,
    pub steps: usize,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySnapshot {
    pub time: f64,
    pub histogram: Histogram,
    pub positions: Vec<f64>,
    pub momenta: Vec<f64>,
    pub weights: Vec<[f64; 2]>,
    /// `sum_l |C_l|^2 eps_l` per trajectory.
    pub electronic_energy: Vec<f64>,
    pub active: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryRecord {
    pub initial: Option<InitialConditions>,
    pub series: Vec<EnsembleSample>,
    pub snapshots: Vec<TrajectorySnapshot>,
    pub channels: ChannelResult,
    pub hops: Vec<(usize, HopEvent)>,
    pub max_norm_drift: f64,
    pub max_gauge_residual: f64,
    pub steps: usize,
    pub final_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunData {
    Exact(ExactRecord),
    Trajectories(TrajectoryRecord),
}

impl RunData {
    pub fn channels(&self) -> ChannelResult {
        match self {
            RunData::Exact(r) => r.channels,
            RunData::Trajectories(r) => r.channels,
        }
    }

    /// Time series of `(t, pop1, pop2, coherence)`.
    pub fn population_series(&self) -> Vec<(f64, [f64; 2], f64)> {
        match self {
            RunData::Exact(r) => r.series.iter().map(|s| (s.time, s.populations, s.coherence)).collect(),
            RunData::Trajectories(r) => r.series.iter().map(|s| (s.time, s.populations, s.coherence)).collect(),
        }
    }

    pub fn final_populations(&self) -> [f64; 2] {
        self.population_series().last().map_or([1.0, 0.0], |s| s.1)
    }
}

/// Snapshot steps still to be taken and the step count at which the run
/// may stop.
struct Schedule {
    snapshot_steps: Vec<(usize, f64)>,
    fixed_end: Option<usize>,
    max_steps: usize,
    stride: usize,
    /// Largest inside fraction seen on a series row so far.
    peak_inside: f64,
}

impl Schedule {
    fn new(cfg: &RunConfig) -> Self {
        let mut snapshot_steps: Vec<(usize, f64)> = cfg
            .output
            .snapshot_times
            .iter()
            .map(|&t| (cfg.steps_for(t), t))
            .collect();
        snapshot_steps.sort_by(|a, b| a.0.cmp(&b.0));
        let last_snapshot = snapshot_steps.last().map_or(0, |s| s.0);
        let fixed_end = cfg.stop.t_final.map(|t| cfg.steps_for(t).max(last_snapshot));
        Schedule {
            snapshot_steps,
            fixed_end,
            max_steps: cfg.steps_for(cfg.stop.t_max).max(last_snapshot),
            stride: cfg.series_stride(),
            peak_inside: 0.0,
        }
    }

    fn snapshots_at(&self, step: usize) -> impl Iterator<Item = f64> + '_ {
        self.snapshot_steps.iter().filter(move |s| s.0 == step).map(|s| s.1)
    }

    fn snapshots_done(&self, step: usize) -> bool {
        self.snapshot_steps.last().is_none_or(|s| s.0 <= step)
    }

    /// Whether to stop after `step`. `inside` gives the probability or
    /// trajectory fraction in the coupling region and is evaluated on series
    /// rows only.
    fn finished(&mut self, step: usize, inside: impl FnOnce() -> f64) -> bool {
        if let Some(end) = self.fixed_end {
            return step >= end;
        }
        if step >= self.max_steps {
            return true;
        }
        if step % self.stride != 0 {
            return false;
        }
        let now = inside();
        self.peak_inside = self.peak_inside.max(now);
        self.peak_inside >= ENTRY_FRACTION && now < CLEAR_TOLERANCE && self.snapshots_done(step)
    }
}

fn exact_snapshot(
    time: f64,
    wf: &crate::grid::GridWavefunction,
    basis: &AdiabaticBasis,
    mass: f64,
    prop: &mut SplitOperator,
) -> ExactSnapshot {
    let obs = exact_observables(wf, basis);
    let tdpes_gi = exact_tdpes_gi(wf, basis, mass, prop.spectral());
    ExactSnapshot {
        time,
        positions: wf.grid.positions(),
        density: obs.density,
        bo_density: obs.bo_density,
        tdpes_gi,
    }
}

/// Split-operator propagation of the initial packet. `record` holds whatever
/// was collected when an error is returned.
pub fn simulate_exact(cfg: &RunConfig, record: &mut ExactRecord) -> Result<()> {
    let model = cfg.diabatic_model()?;
    let grid = cfg.grid;
    let basis = AdiabaticBasis::for_model(&grid, &model);
    let mut wf = init_gaussian_packet(grid, &basis, cfg.center, cfg.k0, cfg.sigma(), cfg.initial_state)?;
    let mut prop = SplitOperator::new(grid, &basis, model.mass, cfg.dt)?;
    let mut schedule = Schedule::new(cfg);
    let e0 = prop.energy(&wf, &basis);
    let norm0 = wf.norm();

    let sample = |wf: &crate::grid::GridWavefunction, prop: &mut SplitOperator, record: &mut ExactRecord| {
        let obs = exact_observables(wf, &basis);
        let energy = prop.energy(wf, &basis);
        let norm = wf.norm();
        record.max_norm_drift = record.max_norm_drift.max((norm - norm0).abs());
        record.energy_drift = record.energy_drift.max(((energy - e0) / e0).abs());
        record.series.push(ExactSample {
            time: wf.time,
            populations: obs.pop,
            coherence: obs.coherence,
            energy,
            norm,
        });
    };

    let mut step = 0usize;
    sample(&wf, &mut prop, record);
    for t in schedule.snapshots_at(0) {
        record.snapshots.push(exact_snapshot(t, &wf, &basis, model.mass, &mut prop));
    }
    loop {
        if schedule.finished(step, || probability_near(&wf, 0.0, cfg.stop.clear_distance)) {
            break;
        }
        prop.step(&mut wf);
        step += 1;
        wf.time = step as f64 * cfg.dt;
        record.steps = step;
        record.final_time = wf.time;
        let edge = wf.edge_probability(EDGE_WIDTH);
        if !(edge < EDGE_TOLERANCE) {
            sample(&wf, &mut prop, record);
            return Err(Error::Numerical {
                step,
                trajectory: None,
                message: format!(
                    "probability {edge:e} within {EDGE_WIDTH} bohr of the grid edge at t = {}; enlarge the grid",
                    wf.time
                ),
            });
        }
        for t in schedule.snapshots_at(step) {
            record.snapshots.push(exact_snapshot(t, &wf, &basis, model.mass, &mut prop));
        }
        if step % schedule.stride == 0 {
            sample(&wf, &mut prop, record);
        }
    }
    if record.series.last().is_none_or(|s| s.time != wf.time) {
        sample(&wf, &mut prop, record);
    }
    record.channels = channel_probabilities(&wf, &basis, cfg.output.r_split);
    Ok(())
}

fn trajectory_snapshot(time: f64, ens: &Ensemble, bin_width: f64) -> TrajectorySnapshot {
    TrajectorySnapshot {
        time,
        histogram: ens.histogram(bin_width),
        positions: ens.positions(),
        momenta: ens.trajectories.iter().map(|t| t.p).collect(),
        weights: ens.weights(),
        electronic_energy: ens.trajectories.iter().map(|t| t.electronic_energy()).collect(),
        active: ens.active_surfaces(),
    }
}

/// Propagates a trajectory ensemble; parallel work runs on the current rayon
/// pool.
pub fn simulate_trajectories(cfg: &RunConfig, record: &mut TrajectoryRecord) -> Result<()> {
    let ic = initial_conditions(cfg)?;
    let mut ens = Ensemble::from_config_with(cfg, &ic)?;
    record.initial = Some(ic);
    let mut schedule = Schedule::new(cfg);
    let bin = cfg.output.bin_width;
    record.series.push(ens.sample());
    for t in schedule.snapshots_at(0) {
        record.snapshots.push(trajectory_snapshot(t, &ens, bin));
    }
    let result = loop {
        if schedule.finished(ens.step, || ens.fraction_within(cfg.stop.clear_distance)) {
            break Ok(());
        }
        if let Err(e) = ens.step() {
            break Err(e);
        }
        record.steps = ens.step;
        record.final_time = ens.time;
        for t in schedule.snapshots_at(ens.step) {
            record.snapshots.push(trajectory_snapshot(t, &ens, bin));
        }
        if ens.step % schedule.stride == 0 {
            record.series.push(ens.sample());
        }
    };
    record.max_norm_drift = ens.max_norm_drift;
    record.max_gauge_residual = ens.max_gauge_residual;
    record.hops = ens.hop_log();
    result?;
    if record.series.last().is_none_or(|s| s.time != ens.time) {
        record.series.push(ens.sample());
    }
    record.channels = ens.channels(cfg.output.r_split);
    Ok(())
}

/// Runs `cfg` in memory. The returned data is partial when the error is set.
pub fn simulate(cfg: &RunConfig) -> (RunData, Option<Error>) {
    match cfg.method {
        Method::Exact => {
            let mut rec = ExactRecord::default();
            let err = simulate_exact(cfg, &mut rec).err();
            (RunData::Exact(rec), err)
        }
        _ => {
            let mut rec = TrajectoryRecord::default();
            let err = simulate_trajectories(cfg, &mut rec).err();
            (RunData::Trajectories(rec), err)
        }
    }
}

fn base_table(cfg: &RunConfig, header: &[&str]) -> Table {
    let mut t = Table::new(header)
        .meta("seed", cfg.seed)
        .meta("config_hash", cfg.hash())
        .meta("method", cfg.method)
        .meta("model", cfg.model)
        .meta("k0", cfg.k0)
        .meta("sigma", cfg.sigma())
        .meta("dt", cfg.dt);
    if cfg.method != Method::Exact {
        t = t.meta("n_traj", cfg.n_traj);
    }
    t
}

fn channel_table(cfg: &RunConfig, ch: &ChannelResult) -> Table {
    let mut t = base_table(cfg, &["T1", "T2", "R1", "R2", "unsettled"]);
    t.push(vec![num(ch.t1), num(ch.t2), num(ch.r1), num(ch.r2), ch.unsettled.to_string()]);
    t
}

/// Writes every output file of a run into `dir`; returns the file names.
pub fn write_outputs(cfg: &RunConfig, data: &RunData, complete: bool, dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut put = |name: String, table: Table| -> Result<()> {
        table.write(&dir.join(&name))?;
        files.push(name);
        Ok(())
    };
    match data {
        RunData::Exact(rec) => {
            let mut series = base_table(cfg, &["t", "pop1", "pop2", "coherence", "energy", "norm"]);
            for s in &rec.series {
                series.push(vec![
                    num(s.time),
                    num(s.populations[0]),
                    num(s.populations[1]),
                    num(s.coherence),
                    num(s.energy),
                    num(s.norm),
                ]);
            }
            put("series.csv".into(), series)?;
            for snap in &rec.snapshots {
                let mut t = base_table(cfg, &["R", "density", "boDensity1", "boDensity2", "tdpesGI", "mask"])
                    .meta("time", snap.time);
                for j in 0..snap.positions.len() {
                    let (eps, mask) = match snap.tdpes_gi[j] {
                        Some(e) => (num(e), "1"),
                        None => ("nan".to_string(), "0"),
                    };
                    t.push(vec![
                        num(snap.positions[j]),
                        num(snap.density[j]),
                        num(snap.bo_density[0][j]),
                        num(snap.bo_density[1][j]),
                        eps,
                        mask.to_string(),
                    ]);
                }
                put(format!("snapshot_t{}.csv", time_label(snap.time)), t)?;
            }
            if complete {
                put("channels.csv".into(), channel_table(cfg, &rec.channels))?;
            }
        }
        RunData::Trajectories(rec) => {
            let mut series = base_table(
                cfg,
                &["t", "pop1", "pop2", "coherence", "gaugeResidualMax", "normDriftMax"],
            );
            for s in &rec.series {
                series.push(vec![
                    num(s.time),
                    num(s.populations[0]),
                    num(s.populations[1]),
                    num(s.coherence),
                    num(s.gauge_residual),
                    num(s.norm_drift),
                ]);
            }
            put("series.csv".into(), series)?;
            for snap in &rec.snapshots {
                let label = time_label(snap.time);
                let h = &snap.histogram;
                let mut t = base_table(cfg, &["R", "chi2", "F1", "F2"])
                    .meta("time", snap.time)
                    .meta("bin_width", h.bin_width);
                let total = h.total();
                for b in 0..h.centers.len() {
                    t.push(vec![num(h.centers[b]), num(total[b]), num(h.states[0][b]), num(h.states[1][b])]);
                }
                put(format!("snapshot_t{label}.csv"), t)?;
                let mut t = base_table(cfg, &["index", "R", "P", "rho11", "rho22", "epsilon", "active"])
                    .meta("time", snap.time);
                for i in 0..snap.positions.len() {
                    let active = snap.active.as_ref().map_or(String::new(), |a| (a[i] + 1).to_string());
                    t.push(vec![
                        i.to_string(),
                        num(snap.positions[i]),
                        num(snap.momenta[i]),
                        num(snap.weights[i][0]),
                        num(snap.weights[i][1]),
                        num(snap.electronic_energy[i]),
                        active,
                    ]);
                }
                put(format!("trajectories_t{label}.csv"), t)?;
            }
            if cfg.method == Method::Tsh {
                let mut t = base_table(cfg, &["trajIndex", "step", "from", "to", "accepted"]);
                for (i, e) in &rec.hops {
                    t.push(vec![
                        i.to_string(),
                        e.step.to_string(),
                        (e.from + 1).to_string(),
                        (e.to + 1).to_string(),
                        e.accepted.to_string(),
                    ]);
                }
                put("hops.csv".into(), t)?;
            }
            if complete {
                put("channels.csv".into(), channel_table(cfg, &rec.channels))?;
            }
        }
    }
    if let (true, RunData::Trajectories(TrajectoryRecord { initial: Some(ic), .. })) = (cfg.output.write_initial, data) {
        let path = dir.join("initial_conditions.csv");
        ic.write_csv(&path)?;
        files.push("initial_conditions.csv".into());
    }
    Ok(files)
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::config(format!("cannot start {threads} worker threads: {e}")))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn manifest(cfg: &RunConfig, command: &str, started: Instant) -> Manifest {
    Manifest {
        version: version(),
        status: "ok".into(),
        command: command.into(),
        config: serde_json::to_value(cfg).unwrap_or(serde_json::Value::Null),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        steps: 0,
        final_time: 0.0,
        invariants: InvariantSummary::default(),
        files: Vec::new(),
        error: None,
    }
}

/// Result of a run written to disk.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub data: RunData,
}

/// Runs `cfg` with `threads` workers and writes outputs and the manifest to
/// `cfg.output.dir`. The manifest is written even when the run aborts.
pub fn run(cfg: &RunConfig, threads: usize) -> Result<RunOutcome> {
    let started = Instant::now();
    let dir = cfg.output.dir.clone();
    prepare_dir(&dir)?;
    let mut man = manifest(cfg, "run", started);
    let pool = match build_pool(threads) {
        Ok(p) => p,
        Err(e) => {
            man.status = "error".into();
            man.error = Some(ErrorRecord::from(&e));
            man.write(&dir)?;
            return Err(e);
        }
    };
    let (data, err) = pool.install(|| simulate(cfg));
    let written = write_outputs(cfg, &data, err.is_none(), &dir);
    let err = err.or_else(|| written.as_ref().err().map(clone_error));
    man.files = written.unwrap_or_default();
    match &data {
        RunData::Exact(r) => {
            man.steps = r.steps;
            man.final_time = r.final_time;
            man.invariants = InvariantSummary {
                max_norm_drift: r.max_norm_drift,
                max_gauge_residual: None,
                energy_drift: Some(r.energy_drift),
            };
        }
        RunData::Trajectories(r) => {
            man.steps = r.steps;
            man.final_time = r.final_time;
            man.invariants = InvariantSummary {
                max_norm_drift: r.max_norm_drift,
                max_gauge_residual: Some(r.max_gauge_residual),
                energy_drift: None,
            };
        }
    }
    man.wall_time_seconds = started.elapsed().as_secs_f64();
    if let Some(e) = &err {
        man.status = "error".into();
        man.error = Some(ErrorRecord::from(e));
    }
    man.write(&dir)?;
    match err {
        Some(e) => Err(e),
        None => Ok(RunOutcome { dir, data }),
    }
}

fn clone_error(e: &Error) -> Error {
    Error::data("", e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub k0: f64,
    pub method: Method,
    pub channels: Option<ChannelResult>,
    pub error: Option<String>,
}

/// Runs every `(method, k0)` point of the scan concurrently. Failed points
/// are reported in their row; the scan itself continues.
pub fn scan_points(cfg: &RunConfig) -> Result<Vec<ScanRow>> {
    let scan = cfg
        .scan
        .as_ref()
        .ok_or_else(|| Error::config("configuration has no [scan] section"))?;
    let points: Vec<(Method, f64)> = scan
        .methods
        .iter()
        .flat_map(|&m| scan.k0.iter().map(move |&k| (m, k)))
        .collect();
    Ok(points
        .par_iter()
        .map(|&(method, k0)| {
            let point = cfg.at_momentum(method, k0);
            let (data, err) = match point.validate() {
                Ok(()) => simulate(&point),
                Err(e) => (RunData::Trajectories(TrajectoryRecord::default()), Some(e)),
            };
            ScanRow {
                k0,
                method,
                channels: if err.is_none() { Some(data.channels()) } else { None },
                error: err.map(|e| e.to_string()),
            }
        })
        .collect())
}

pub fn scan_table(cfg: &RunConfig, rows: &[ScanRow]) -> Table {
    let mut t = Table::new(&["k0", "T1", "T2", "R1", "R2", "method", "model"])
        .meta("seed", cfg.seed)
        .meta("config_hash", cfg.hash())
        .meta("sigma_rule", format!("{:?}", cfg.width))
        .meta("sampling", cfg.sampling.name());
    for row in rows {
        if let Some(err) = &row.error {
            t.metadata.push(("failed".into(), format!("{} k0={}: {err}", row.method, row.k0)));
        }
    }
    for row in rows {
        let v = row.channels.map_or([f64::NAN; 4], |c| c.as_array());
        t.push(vec![
            format!("{}", row.k0),
            num(v[0]),
            num(v[1]),
            num(v[2]),
            num(v[3]),
            row.method.to_string(),
            cfg.model.to_string(),
        ]);
    }
    t
}

/// Runs the scan and writes `scan.csv` plus the manifest.
pub fn scan(cfg: &RunConfig, threads: usize) -> Result<Vec<ScanRow>> {
    let started = Instant::now();
    let dir = cfg.output.dir.clone();
    prepare_dir(&dir)?;
    let mut man = manifest(cfg, "scan", started);
    let result = build_pool(threads).and_then(|pool| pool.install(|| scan_points(cfg)));
    let result = result.and_then(|rows| {
        scan_table(cfg, &rows).write(&dir.join("scan.csv"))?;
        Ok(rows)
    });
    man.wall_time_seconds = started.elapsed().as_secs_f64();
    match &result {
        Ok(rows) => {
            man.files = vec!["scan.csv".into()];
            if rows.iter().any(|r| r.error.is_some()) {
                man.status = "partial".into();
            }
        }
        Err(e) => {
            man.status = "error".into();
            man.error = Some(ErrorRecord::from(e));
        }
    }
    man.write(&dir)?;
    result
}
