//! Run description: an INI-style file with sections `[model]`, `[method]`,
//! `[initial]`, `[output]` and `[scan]`.
//!
//! ```text
//! [model]
//! kind = single_avoided
//!
//! [method]
//! name = ctmqc
//! t_final = 3000
//!
//! [initial]
//! k0 = 25
//! seed = 7
//! ```
//!
//! Missing keys take the benchmark defaults: time step 0.1 for the exact
//! propagation and 0.5 for trajectories, 200 trajectories (5000 for surface
//! hopping), packet width `20 / k0`, model-specific starting point and grid.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ctmqc::Region;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::models::{DiabaticModel, ModelKind, ModelParams, DEFAULT_MASS};
use crate::observables::{DEFAULT_BIN_WIDTH, DEFAULT_SPLIT};

/// Default time between rows of the time series (a.u.).
pub const SERIES_INTERVAL: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Ctmqc,
    Ehrenfest,
    Tsh,
    Mqc,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Exact, Method::Ctmqc, Method::Ehrenfest, Method::Tsh, Method::Mqc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Ctmqc => "ctmqc",
            Method::Ehrenfest => "ehrenfest",
            Method::Tsh => "tsh",
            Method::Mqc => "mqc",
        }
    }

    pub fn default_dt(self) -> f64 {
        match self {
            Method::Exact => 0.1,
            _ => 0.5,
        }
    }

    pub fn default_trajectories(self) -> usize {
        match self {
            Method::Tsh => 5000,
            _ => 200,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "ctmqc" => Ok(Method::Ctmqc),
            "ehrenfest" => Ok(Method::Ehrenfest),
            "tsh" | "fssh" => Ok(Method::Tsh),
            "mqc" => Ok(Method::Mqc),
            other => Err(Error::config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Wigner,
    FixedMomentum,
}

impl Sampling {
    pub fn name(self) -> &'static str {
        match self {
            Sampling::Wigner => "wigner",
            Sampling::FixedMomentum => "fixed_momentum",
        }
    }
}

impl FromStr for Sampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "wigner" => Ok(Sampling::Wigner),
            "fixed_momentum" => Ok(Sampling::FixedMomentum),
            other => Err(Error::config(format!("unknown sampling '{other}'"))),
        }
    }
}

/// Packet width, either absolute or `factor / k0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Width {
    Absolute(f64),
    OverMomentum(f64),
}

impl Width {
    pub fn resolve(self, k0: f64) -> f64 {
        match self {
            Width::Absolute(s) => s,
            Width::OverMomentum(f) => f / k0,
        }
    }
}

/// When a run ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StopRule {
    /// Fixed final time; when absent the run stops once the packet has left
    /// `|R| < clear_distance`, or at `t_max`.
    pub t_final: Option<f64>,
    pub clear_distance: f64,
    pub t_max: f64,
}

impl StopRule {
    pub fn default_for(kind: ModelKind) -> Self {
        let clear_distance = match kind {
            ModelKind::SingleAvoided => 5.0,
            ModelKind::DualAvoided => 10.0,
            ModelKind::ExtendedCoupling | ModelKind::DoubleArch => 15.0,
        };
        StopRule {
            t_final: None,
            clear_distance,
            t_max: 20000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Steps between rows of the time series; by default one row every
    /// ten atomic time units.
    pub stride: Option<usize>,
    pub snapshot_times: Vec<f64>,
    pub bin_width: f64,
    pub r_split: f64,
    pub write_initial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanConfig {
    pub k0: Vec<f64>,
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub params: ModelParams,
    pub mass: f64,
    pub method: Method,
    pub dt: f64,
    pub stop: StopRule,
    pub grid: Grid,
    /// Switches the NACV off everywhere (diagnostic runs).
    pub couplings: bool,
    /// Trajectories that carry a quantum momentum (CT-MQC only).
    pub qm_region: Region,
    /// Accumulated forces are zeroed once a trajectory's smaller population
    /// drops below this value. Zero disables the reset (CT-MQC only).
    pub force_reset: f64,
    pub k0: f64,
    pub width: Width,
    pub center: f64,
    pub initial_state: usize,
    pub n_traj: usize,
    pub seed: u64,
    pub sampling: Sampling,
    pub output: OutputConfig,
    pub scan: Option<ScanConfig>,
}

impl RunConfig {
    /// Benchmark defaults for `model` and `method`.
    pub fn new(model: ModelKind, method: Method, k0: f64) -> Self {
        RunConfig {
            model,
            params: model.default_params(),
            mass: DEFAULT_MASS,
            method,
            dt: method.default_dt(),
            stop: StopRule::default_for(model),
            grid: Grid::default_for(model),
            couplings: true,
            qm_region: Region::default(),
            force_reset: 0.0,
            k0,
            width: Width::OverMomentum(20.0),
            center: model.default_center(),
            initial_state: 0,
            n_traj: method.default_trajectories(),
            seed: 1,
            sampling: Sampling::Wigner,
            output: OutputConfig {
                dir: PathBuf::from("out"),
                stride: None,
                snapshot_times: Vec::new(),
                bin_width: DEFAULT_BIN_WIDTH,
                r_split: DEFAULT_SPLIT,
                write_initial: false,
            },
            scan: None,
        }
    }

    pub fn series_stride(&self) -> usize {
        self.output
            .stride
            .unwrap_or_else(|| ((SERIES_INTERVAL / self.dt).round() as usize).max(1))
    }

    /// Number of steps to reach `t`.
    pub fn steps_for(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }

    pub fn sigma(&self) -> f64 {
        self.width.resolve(self.k0)
    }

    pub fn diabatic_model(&self) -> Result<DiabaticModel> {
        DiabaticModel::with_params(self.model, self.params, self.mass)
    }

    /// Copy of this configuration for one point of a momentum scan.
    pub fn at_momentum(&self, method: Method, k0: f64) -> RunConfig {
        let mut cfg = self.clone();
        cfg.scan = None;
        if cfg.method != method {
            if cfg.dt == cfg.method.default_dt() {
                cfg.dt = method.default_dt();
            }
            if cfg.n_traj == cfg.method.default_trajectories() {
                cfg.n_traj = method.default_trajectories();
            }
            cfg.method = method;
        }
        cfg.k0 = k0;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return fail(format!("mass must be positive, got {}", self.mass));
        }
        if self.n_traj == 0 {
            return fail("n_traj must be at least 1".into());
        }
        if self.initial_state > 1 {
            return fail(format!("initial state must be 0 or 1, got {}", self.initial_state));
        }
        if !self.k0.is_finite() || self.k0 <= 0.0 {
            return fail(format!("k0 must be positive, got {}", self.k0));
        }
        let sigma = self.sigma();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return fail(format!("packet width must be positive, got {sigma}"));
        }
        if let Some(t) = self.stop.t_final {
            if !(t > 0.0 && t.is_finite()) {
                return fail(format!("t_final must be positive, got {t}"));
            }
        }
        if !(self.stop.t_max > 0.0) || !(self.stop.clear_distance > 0.0) {
            return fail("t_max and clear_distance must be positive".into());
        }
        if self.output.stride == Some(0) {
            return fail("stride must be at least 1".into());
        }
        if !(self.output.bin_width > 0.0) {
            return fail(format!("bin_width must be positive, got {}", self.output.bin_width));
        }
        if self.output.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            return fail("snapshot times must be non-negative".into());
        }
        Grid::new(self.grid.r_min, self.grid.r_max, self.grid.n)?;
        if let Some(scan) = &self.scan {
            if scan.k0.is_empty() || scan.k0.iter().any(|k| !(*k > 0.0)) {
                return fail("scan k0 list must contain positive values".into());
            }
            if scan.methods.is_empty() {
                return fail("scan method list is empty".into());
            }
        }
        Ok(())
    }

    /// Canonical text form; parses back to an equal configuration.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let p = &self.params;
        let _ = writeln!(s, "[model]");
        let _ = writeln!(s, "kind = {}", self.model);
        let _ = writeln!(s, "a = {:?}\nb = {:?}\nc = {:?}\nd = {:?}\ne0 = {:?}", p.a, p.b, p.c, p.d, p.e0);
        let _ = writeln!(s, "mass = {:?}", self.mass);
        let _ = writeln!(s, "\n[method]");
        let _ = writeln!(s, "name = {}", self.method);
        let _ = writeln!(s, "dt = {:?}", self.dt);
        if let Some(t) = self.stop.t_final {
            let _ = writeln!(s, "t_final = {t:?}");
        }
        let _ = writeln!(s, "clear_distance = {:?}", self.stop.clear_distance);
        let _ = writeln!(s, "t_max = {:?}", self.stop.t_max);
        let _ = writeln!(s, "grid_min = {:?}", self.grid.r_min);
        let _ = writeln!(s, "grid_max = {:?}", self.grid.r_max);
        let _ = writeln!(s, "grid_points = {}", self.grid.n);
        let _ = writeln!(s, "couplings = {}", self.couplings);
        let _ = writeln!(s, "qm_region = {}", self.qm_region.name());
        let _ = writeln!(s, "force_reset = {:?}", self.force_reset);
        let _ = writeln!(s, "\n[initial]");
        let _ = writeln!(s, "k0 = {:?}", self.k0);
        match self.width {
            Width::Absolute(v) => {
                let _ = writeln!(s, "sigma = {v:?}");
            }
            Width::OverMomentum(f) => {
                let _ = writeln!(s, "sigma_factor = {f:?}");
            }
        }
        let _ = writeln!(s, "center = {:?}", self.center);
        let _ = writeln!(s, "state = {}", self.initial_state);
        let _ = writeln!(s, "n_traj = {}", self.n_traj);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "sampling = {}", self.sampling.name());
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", self.output.dir.display());
        if let Some(stride) = self.output.stride {
            let _ = writeln!(s, "stride = {stride}");
        }
        let times: Vec<String> = self.output.snapshot_times.iter().map(|t| format!("{t:?}")).collect();
        let _ = writeln!(s, "snapshots = {}", times.join(", "));
        let _ = writeln!(s, "bin_width = {:?}", self.output.bin_width);
        let _ = writeln!(s, "r_split = {:?}", self.output.r_split);
        let _ = writeln!(s, "write_initial = {}", self.output.write_initial);
        if let Some(scan) = &self.scan {
            let _ = writeln!(s, "\n[scan]");
            let k: Vec<String> = scan.k0.iter().map(|k| format!("{k:?}")).collect();
            let _ = writeln!(s, "k0 = {}", k.join(", "));
            let m: Vec<&str> = scan.methods.iter().map(|m| m.name()).collect();
            let _ = writeln!(s, "methods = {}", m.join(", "));
        }
        s
    }

    /// SHA-256 of the canonical form with the output directory blanked, so
    /// the hash identifies the physics and not where it was written.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output.dir = PathBuf::new();
        let digest = Sha256::digest(canonical.serialize().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

struct Entry {
    line: usize,
    value: String,
}

type Sections = BTreeMap<String, BTreeMap<String, Entry>>;

const KEYS: &[(&str, &[&str])] = &[
    ("model", &["kind", "a", "b", "c", "d", "e0", "mass"]),
    (
        "method",
        &[
            "name",
            "dt",
            "t_final",
            "clear_distance",
            "t_max",
            "grid_min",
            "grid_max",
            "grid_points",
            "couplings",
            "qm_region",
            "force_reset",
        ],
    ),
    (
        "initial",
        &["k0", "sigma", "sigma_factor", "center", "state", "n_traj", "seed", "sampling"],
    ),
    ("output", &["dir", "stride", "snapshots", "bin_width", "r_split", "write_initial"]),
    ("scan", &["k0", "methods"]),
];

fn tokenize(text: &str) -> Result<Sections> {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::config_at(line, "unterminated section header"))?
                .trim()
                .to_ascii_lowercase();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(Error::config_at(line, format!("unknown section [{name}]")));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::config_at(line, format!("expected 'key = value', got '{content}'")))?;
        let key = key.trim().to_ascii_lowercase();
        let section = current
            .clone()
            .ok_or_else(|| Error::config_at(line, "key outside of any section"))?;
        let allowed = KEYS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key.as_str()) {
            return Err(Error::config_at(line, format!("unknown key '{key}' in [{section}]")));
        }
        let map = sections.get_mut(&section).expect("section registered");
        if map.contains_key(&key) {
            return Err(Error::config_at(line, format!("duplicate key '{key}'")));
        }
        map.insert(
            key,
            Entry {
                line,
                value: value.trim().to_string(),
            },
        );
    }
    Ok(sections)
}

struct Reader<'a> {
    sections: &'a Sections,
}

impl Reader<'_> {
    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|m| m.get(key))
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::config_at(e.line, format!("{key}: expected {what}, got '{}'", e.value))),
        }
    }

    fn real(&self, section: &str, key: &str) -> Result<Option<f64>> {
        self.parse(section, key, "a number")
    }

    fn integer<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        self.parse(section, key, "a non-negative integer")
    }

    fn boolean(&self, section: &str, key: &str) -> Result<Option<bool>> {
        self.parse(section, key, "true or false")
    }

    fn with<T>(&self, section: &str, key: &str, f: impl Fn(&str) -> Result<T>) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => f(&e.value).map(Some).map_err(|err| match err {
                Error::Config { line: None, message } => Error::config_at(e.line, message),
                other => other,
            }),
        }
    }

    fn line(&self, section: &str, key: &str) -> Option<usize> {
        self.entry(section, key).map(|e| e.line)
    }
}

fn list<T>(value: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

fn number(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::config(format!("expected a number, got '{s}'")))
}

/// Parses and validates a run description.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let sections = tokenize(text)?;
    let rd = Reader { sections: &sections };
    let kind = rd
        .with("model", "kind", |v| v.parse::<ModelKind>())?
        .ok_or_else(|| Error::config("[model] kind is required"))?;
    let method = rd.with("method", "name", |v| v.parse::<Method>())?.unwrap_or(Method::Ctmqc);
    let k0 = rd
        .real("initial", "k0")?
        .or_else(|| rd.entry("scan", "k0").and_then(|e| list(&e.value, number).ok()?.first().copied()))
        .ok_or_else(|| Error::config("[initial] k0 is required"))?;
    let mut cfg = RunConfig::new(kind, method, k0);

    let p = &mut cfg.params;
    for (key, slot) in [("a", &mut p.a), ("b", &mut p.b), ("c", &mut p.c), ("d", &mut p.d), ("e0", &mut p.e0)] {
        if let Some(v) = rd.real("model", key)? {
            *slot = v;
        }
    }
    if let Some(v) = rd.real("model", "mass")? {
        cfg.mass = v;
    }

    if let Some(v) = rd.real("method", "dt")? {
        if !(v > 0.0) {
            return Err(Error::config_at(rd.line("method", "dt").unwrap(), format!("dt must be positive, got {v}")));
        }
        cfg.dt = v;
    }
    cfg.stop.t_final = rd.real("method", "t_final")?;
    if let Some(v) = rd.real("method", "clear_distance")? {
        cfg.stop.clear_distance = v;
    }
    if let Some(v) = rd.real("method", "t_max")? {
        cfg.stop.t_max = v;
    }
    if let Some(v) = rd.real("method", "grid_min")? {
        cfg.grid.r_min = v;
    }
    if let Some(v) = rd.real("method", "grid_max")? {
        cfg.grid.r_max = v;
    }
    if let Some(v) = rd.integer("method", "grid_points")? {
        cfg.grid.n = v;
    }
    if let Some(v) = rd.boolean("method", "couplings")? {
        cfg.couplings = v;
    }
    if let Some(v) = rd.with("method", "qm_region", |v| v.parse::<Region>())? {
        cfg.qm_region = v;
    }
    if let Some(v) = rd.real("method", "force_reset")? {
        if !(0.0..0.5).contains(&v) {
            return Err(Error::config_at(
                rd.line("method", "force_reset").unwrap(),
                format!("force_reset must lie in [0, 0.5), got {v}"),
            ));
        }
        cfg.force_reset = v;
    }

    match (rd.real("initial", "sigma")?, rd.real("initial", "sigma_factor")?) {
        (Some(_), Some(_)) => {
            return Err(Error::config_at(
                rd.line("initial", "sigma_factor").unwrap(),
                "give either sigma or sigma_factor, not both",
            ))
        }
        (Some(s), None) => cfg.width = Width::Absolute(s),
        (None, Some(f)) => cfg.width = Width::OverMomentum(f),
        (None, None) => {}
    }
    if let Some(v) = rd.real("initial", "center")? {
        cfg.center = v;
    }
    if let Some(v) = rd.integer("initial", "state")? {
        cfg.initial_state = v;
    }
    if let Some(v) = rd.integer("initial", "n_traj")? {
        cfg.n_traj = v;
    }
    if let Some(v) = rd.integer("initial", "seed")? {
        cfg.seed = v;
    }
    if let Some(v) = rd.with("initial", "sampling", |v| v.parse::<Sampling>())? {
        cfg.sampling = v;
    }

    if let Some(e) = rd.entry("output", "dir") {
        cfg.output.dir = PathBuf::from(&e.value);
    }
    cfg.output.stride = rd.integer("output", "stride")?;
    if let Some(v) = rd.with("output", "snapshots", |v| list(v, number))? {
        cfg.output.snapshot_times = v;
    }
    if let Some(v) = rd.real("output", "bin_width")? {
        cfg.output.bin_width = v;
    }
    if let Some(v) = rd.real("output", "r_split")? {
        cfg.output.r_split = v;
    }
    if let Some(v) = rd.boolean("output", "write_initial")? {
        cfg.output.write_initial = v;
    }

    if sections.contains_key("scan") {
        let k0 = rd
            .with("scan", "k0", |v| list(v, number))?
            .ok_or_else(|| Error::config("[scan] requires a k0 list"))?;
        let methods = rd
            .with("scan", "methods", |v| list(v, |m| m.parse::<Method>()))?
            .unwrap_or_else(|| vec![Method::Exact, method]);
        cfg.scan = Some(ScanConfig { k0, methods });
    }

    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_for_single_avoided() {
        let cfg = parse_config("[model]\nkind = single_avoided\n[initial]\nk0 = 25\n").unwrap();
        let p = cfg.params;
        assert_eq!((p.a, p.b, p.c, p.d), (0.01, 1.6, 0.005, 1.0));
        assert_eq!(cfg.mass, 2000.0);
        assert_eq!(cfg.center, -8.0);
        assert_eq!(cfg.dt, 0.5);
        assert_eq!(cfg.n_traj, 200);
        assert!((cfg.sigma() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn method_dependent_defaults() {
        let exact = parse_config("[model]\nkind = c\n[method]\nname = exact\n[initial]\nk0 = 10\n").unwrap();
        assert_eq!(exact.dt, 0.1);
        assert_eq!(exact.center, -15.0);
        let tsh = parse_config("[model]\nkind = d\n[method]\nname = tsh\n[initial]\nk0 = 10\n").unwrap();
        assert_eq!(tsh.n_traj, 5000);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_config("[model]\nkind = a\n[method]\ndt = -1\n[initial]\nk0 = 5\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(4), .. }), "{err}");
        let err = parse_config("[model]\nkind = a\nfoo = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(3), .. }), "{err}");
        let err = parse_config("[model]\nkind = a\n[initial]\nk0 = fast\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(4), .. }), "{err}");
        let err = parse_config("[model]\nkind = zzz\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(2), .. }), "{err}");
        let err = parse_config("[initial]\nk0 = 5\n").unwrap_err();
        assert_eq!(err.kind(), "config");
    }

    #[test]
    fn method_options() {
        let cfg = parse_config("[model]\nkind = c\n[method]\nqm_region = between_centers\nforce_reset = 0.01\n[initial]\nk0 = 10\n")
            .unwrap();
        assert_eq!(cfg.qm_region, Region::BetweenCenters);
        assert_eq!(cfg.force_reset, 0.01);
        let err = parse_config("[model]\nkind = c\n[method]\nforce_reset = 0.7\n[initial]\nk0 = 10\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: Some(4), .. }), "{err}");
    }

    #[test]
    fn scan_section() {
        let cfg = parse_config("[model]\nkind = d\n[initial]\nsigma_factor = 100\n[scan]\nk0 = 20, 30,40\nmethods = exact, ctmqc\n")
            .unwrap();
        let scan = cfg.scan.as_ref().unwrap();
        assert_eq!(scan.k0, vec![20.0, 30.0, 40.0]);
        assert_eq!(scan.methods, vec![Method::Exact, Method::Ctmqc]);
        assert_eq!(cfg.width, Width::OverMomentum(100.0));
        let point = cfg.at_momentum(Method::Exact, 30.0);
        assert_eq!(point.dt, 0.1);
        assert!((point.sigma() - 100.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn hash_ignores_output_dir() {
        let mut a = RunConfig::new(ModelKind::SingleAvoided, Method::Ctmqc, 25.0);
        let h = a.hash();
        a.output.dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), h);
        a.seed = 2;
        assert_ne!(a.hash(), h);
    }

    fn config_strategy() -> impl Strategy<Value = RunConfig> {
        (
            0usize..4,
            0usize..5,
            1.0f64..60.0,
            proptest::option::of(0.1f64..10.0),
            0.01f64..1.0,
            1usize..6000,
            any::<u64>(),
            proptest::option::of(100.0f64..9000.0),
            proptest::collection::vec(0.0f64..5000.0, 0..4),
            proptest::option::of(proptest::collection::vec(1.0f64..60.0, 1..5)),
            any::<bool>(),
        )
            .prop_map(|(m, me, k0, sigma, dt, n, seed, tf, snaps, scan, flag)| {
                let mut cfg = RunConfig::new(ModelKind::ALL[m], Method::ALL[me], k0);
                if let Some(s) = sigma {
                    cfg.width = Width::Absolute(s);
                }
                cfg.dt = dt;
                cfg.n_traj = n;
                cfg.seed = seed;
                cfg.stop.t_final = tf;
                cfg.output.snapshot_times = snaps;
                cfg.couplings = flag;
                cfg.qm_region = if flag { Region::Ensemble } else { Region::BetweenCenters };
                cfg.force_reset = if flag { 0.0 } else { dt * 0.1 };
                cfg.output.stride = if flag { None } else { Some(n % 50 + 1) };
                cfg.sampling = if flag { Sampling::Wigner } else { Sampling::FixedMomentum };
                cfg.params.a *= 1.0 + dt;
                cfg.scan = scan.map(|k0| ScanConfig {
                    k0,
                    methods: vec![Method::Exact, Method::Ctmqc],
                });
                cfg
            })
    }

    proptest! {
        #[test]
        fn serialize_round_trip(cfg in config_strategy()) {
            let text = cfg.serialize();
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
