//! Side-by-side comparison of finished run directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::output::{num, Manifest, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSeries {
    pub dir: PathBuf,
    pub method: String,
    pub model: String,
    pub times: Vec<f64>,
    pub pop1: Vec<f64>,
    pub coherence: Vec<f64>,
    /// `[T1, T2, R1, R2]` when the run finished.
    pub channels: Option<[f64; 4]>,
}

impl RunSeries {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = Manifest::read(dir)?;
        let field = |key: &str| {
            manifest["config"][key]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| Error::data(dir.join("manifest.json"), format!("missing config field '{key}'")))
        };
        let method = field("method")?;
        let model = field("model")?;
        let path = dir.join("series.csv");
        let series = Table::read(&path)?;
        let channels_path = dir.join("channels.csv");
        let channels = if channels_path.exists() {
            let t = Table::read(&channels_path)?;
            let mut v = [0.0; 4];
            for (slot, name) in v.iter_mut().zip(["T1", "T2", "R1", "R2"]) {
                *slot = *t
                    .numeric_column(name, &channels_path)?
                    .first()
                    .ok_or_else(|| Error::data(&channels_path, "no data row"))?;
            }
            Some(v)
        } else {
            None
        };
        Ok(RunSeries {
            dir: dir.to_path_buf(),
            method,
            model,
            times: series.numeric_column("t", &path)?,
            pop1: series.numeric_column("pop1", &path)?,
            coherence: series.numeric_column("coherence", &path)?,
            channels,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Difference {
    pub dir: PathBuf,
    pub method: String,
    pub samples: usize,
    pub population_max: f64,
    pub population_rms: f64,
    pub coherence_max: f64,
    pub coherence_rms: f64,
    /// Largest channel-probability difference; `None` if either run has no
    /// channel result.
    pub channel_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reference: PathBuf,
    pub reference_method: String,
    pub rows: Vec<Difference>,
}

fn time_key(t: f64) -> i64 {
    (t * 1e6).round() as i64
}

fn stats(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len().max(1) as f64;
    let mut max = 0.0f64;
    let mut sq = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        max = max.max(d);
        sq += d * d;
    }
    (max, (sq / n).sqrt())
}

/// Compares every run against the reference: the first exact run if there
/// is one, otherwise the first directory.
pub fn compare_runs(runs: &[RunSeries]) -> Result<Comparison> {
    if runs.len() < 2 {
        return Err(Error::Incompatible("at least two runs are needed".into()));
    }
    let reference = runs.iter().find(|r| r.method == "exact").unwrap_or(&runs[0]);
    for r in runs {
        if r.model != reference.model {
            return Err(Error::Incompatible(format!(
                "{} uses model {} but {} uses {}",
                r.dir.display(),
                r.model,
                reference.dir.display(),
                reference.model
            )));
        }
    }
    let index: BTreeMap<i64, usize> = reference
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| (time_key(t), i))
        .collect();
    let mut rows = Vec::new();
    for r in runs.iter().filter(|r| !std::ptr::eq(*r, reference)) {
        let mut a = (Vec::new(), Vec::new());
        let mut b = (Vec::new(), Vec::new());
        for (j, &t) in r.times.iter().enumerate() {
            if let Some(&i) = index.get(&time_key(t)) {
                a.0.push(reference.pop1[i]);
                a.1.push(reference.coherence[i]);
                b.0.push(r.pop1[j]);
                b.1.push(r.coherence[j]);
            }
        }
        if a.0.len() < 2 {
            return Err(Error::Incompatible(format!(
                "{} shares fewer than two sample times with {}",
                r.dir.display(),
                reference.dir.display()
            )));
        }
        let (population_max, population_rms) = stats(&a.0, &b.0);
        let (coherence_max, coherence_rms) = stats(&a.1, &b.1);
        let channel_max = match (reference.channels, r.channels) {
            (Some(x), Some(y)) => Some(x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)),
            _ => None,
        };
        rows.push(Difference {
            dir: r.dir.clone(),
            method: r.method.clone(),
            samples: a.0.len(),
            population_max,
            population_rms,
            coherence_max,
            coherence_rms,
            channel_max,
        });
    }
    Ok(Comparison {
        reference: reference.dir.clone(),
        reference_method: reference.method.clone(),
        rows,
    })
}

pub fn compare_dirs(dirs: &[PathBuf]) -> Result<Comparison> {
    let runs = dirs.iter().map(|d| RunSeries::load(d)).collect::<Result<Vec<_>>>()?;
    compare_runs(&runs)
}

impl Comparison {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "run",
            "method",
            "samples",
            "popMax",
            "popRms",
            "coherenceMax",
            "coherenceRms",
            "channelMax",
        ])
        .meta("reference", self.reference.display())
        .meta("reference_method", &self.reference_method);
        for r in &self.rows {
            t.push(vec![
                r.dir.display().to_string(),
                r.method.clone(),
                r.samples.to_string(),
                num(r.population_max),
                num(r.population_rms),
                num(r.coherence_max),
                num(r.coherence_rms),
                r.channel_max.map_or("nan".to_string(), num),
            ]);
        }
        t
    }
}
