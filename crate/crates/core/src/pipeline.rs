//! The collect → train → predict → evaluate workflow, plus reduced density
//! matrix scans and report generation. Every command reads and writes files
//! in one run directory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fermion::{gaussian_entropy_profile, gaussian_rdm2, ground_covariance, initial_parity, jw_compile, FermionObjective};
use crate::fit::{fit_central_charge, fit_decay, CentralChargeFit, DecayFit, DecayFitConfig, DecaySeries, EntropySamples};
use crate::model::{
    ansatz_spec, build_hamiltonian, canonicalize_params, energy_error_percent, exact_ground_energy, AnsatzSpec,
    Boundary, Layer, ModelKind, ModelSpec, ParamSet, ParamSource, DEFAULT_LANCZOS_CAP,
};
use crate::net::{predict_paramset, train, Checkpoint, HistorySummary, TrainConfig, TrainingSet};
use crate::optimizer::{optimize_params, ramp_init, BackendTag, BfgsConfig, Objective, OptimResult};
use crate::statevector::{
    self, entanglement_entropy, ground_overlap, lanczos_ground, reduced_density, LanczosConfig, StatevectorObjective,
    DEFAULT_STATEVECTOR_CAP,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DATASET_FILE: &str = "dataset.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const SUMMARY_FILE: &str = "summary.md";

/// XY collection sizes when only the state-vector backend is used.
pub const XY_FALLBACK_SIZES: [usize; 4] = [16, 20, 24, 28];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Auto,
    Statevector,
    Fermion,
}

impl BackendChoice {
    pub fn parse(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "auto" => Ok(BackendChoice::Auto),
            "statevector" | "sv" => Ok(BackendChoice::Statevector),
            "fermion" | "gaussian" => Ok(BackendChoice::Fermion),
            other => Err(Error::Config(format!("unknown backend {other:?} (expected auto, statevector or fermion)"))),
        }
    }
}

/// Command options. `None` fields take the per-model defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub g: Option<f64>,
    pub sizes: Option<Vec<usize>>,
    pub validation_sizes: Option<Vec<usize>>,
    pub target: Option<usize>,
    pub seed: u64,
    pub backend: BackendChoice,
    pub out: PathBuf,
    pub refine: bool,
    pub include_edge_cuts: bool,
    /// 1-based density-matrix entry for `rdm-scan`.
    pub entry: (usize, usize),
    pub statevector_cap: usize,
    pub lanczos_cap: usize,
    pub error_threshold_percent: Option<f64>,
    pub overlap_threshold: Option<f64>,
    pub train: TrainConfig,
    pub bfgs: Option<BfgsConfig>,
    /// Restarts for warm-started sizes; a size that misses its threshold is
    /// re-run with the full `bfgs.restarts`.
    pub warm_restarts: usize,
    pub decay_fit: DecayFitConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Tfim,
            g: None,
            sizes: None,
            validation_sizes: None,
            target: None,
            seed: 0,
            backend: BackendChoice::Auto,
            out: PathBuf::from("run"),
            refine: false,
            include_edge_cuts: false,
            entry: (1, 1),
            statevector_cap: DEFAULT_STATEVECTOR_CAP,
            lanczos_cap: DEFAULT_LANCZOS_CAP,
            error_threshold_percent: None,
            overlap_threshold: None,
            train: TrainConfig::default(),
            bfgs: None,
            warm_restarts: 1,
            decay_fit: DecayFitConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }

    pub fn g(&self) -> f64 {
        self.g.unwrap_or(match self.model {
            ModelKind::Tfim => 0.5,
            ModelKind::Xy => 0.0,
            ModelKind::Xxz => 0.1,
        })
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.sizes.clone().unwrap_or_else(|| match self.model {
            ModelKind::Tfim => (8..=20).step_by(2).collect(),
            ModelKind::Xy if self.backend == BackendChoice::Statevector => XY_FALLBACK_SIZES.to_vec(),
            ModelKind::Xy => (16..=40).step_by(4).collect(),
            ModelKind::Xxz => (10..=24).step_by(2).collect(),
        })
    }

    pub fn validation_sizes(&self) -> Vec<usize> {
        self.validation_sizes.clone().unwrap_or_else(|| match self.model {
            ModelKind::Tfim => (22..=28).step_by(2).collect(),
            ModelKind::Xy if self.backend == BackendChoice::Statevector => vec![],
            ModelKind::Xy => vec![44, 48],
            ModelKind::Xxz => vec![],
        })
    }

    pub fn target(&self) -> usize {
        self.target.unwrap_or(match self.model {
            ModelKind::Tfim => 40,
            ModelKind::Xy => 64,
            ModelKind::Xxz => 40,
        })
    }

    /// Sizes for `rdm-scan`: `--sizes` when given, else `8, 12, …`.
    pub fn scan_sizes(&self) -> Vec<usize> {
        self.sizes.clone().unwrap_or_else(|| match self.model {
            ModelKind::Tfim | ModelKind::Xy => (8..=40).step_by(4).collect(),
            ModelKind::Xxz => (6..=16).step_by(2).collect(),
        })
    }

    /// XXZ gradients cost a full state-vector sweep, so its default stops at
    /// a looser gradient norm.
    pub fn bfgs(&self) -> BfgsConfig {
        self.bfgs.clone().unwrap_or_else(|| match self.model {
            ModelKind::Xxz => BfgsConfig { grad_tol: 1e-6, ..BfgsConfig::default() },
            _ => BfgsConfig::default(),
        })
    }

    pub fn error_threshold_percent(&self) -> Option<f64> {
        self.error_threshold_percent.or(match self.model {
            ModelKind::Tfim | ModelKind::Xy => Some(1e-8),
            ModelKind::Xxz => None,
        })
    }

    pub fn overlap_threshold(&self) -> Option<f64> {
        self.overlap_threshold.or(match self.model {
            ModelKind::Xxz => Some(0.998),
            _ => None,
        })
    }

    pub fn boundary(&self) -> Boundary {
        self.model.boundary()
    }

    pub fn model_at(&self, n: usize) -> Result<ModelSpec> {
        ModelSpec::new(self.model, self.g(), n, self.boundary())
    }

    /// Backend used for optimization and evaluation at size `n`.
    pub fn backend_for(&self, n: usize) -> Result<BackendTag> {
        let sv = |what: &str| {
            if n <= self.statevector_cap {
                Ok(BackendTag::Statevector)
            } else {
                Err(Error::Capability(format!(
                    "{what}: N={n} exceeds the state-vector cap of {} sites",
                    self.statevector_cap
                )))
            }
        };
        match (self.backend, self.model) {
            (BackendChoice::Statevector, _) => sv("statevector backend"),
            (BackendChoice::Fermion, ModelKind::Xxz) => Err(Error::Capability(
                "xxz has a YY coupling that is not free-fermionic; use --backend statevector or auto".into(),
            )),
            (_, ModelKind::Xxz) => sv("xxz"),
            _ => Ok(BackendTag::Fermion),
        }
    }

    /// Checks sizes, their disjointness and per-size backend capability.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.bfgs().validate()?;
        self.model_at(self.target())?;
        let (sizes, val) = (self.sizes(), self.validation_sizes());
        for &n in sizes.iter().chain(&val) {
            self.model_at(n)?;
            self.backend_for(n).map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut all: Vec<usize> = sizes.iter().chain(&val).copied().collect();
        all.push(self.target());
        let count = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != count {
            return Err(Error::Config(
                "collection, validation and target sizes must be pairwise disjoint".into(),
            ));
        }
        let (i, j) = self.entry;
        if !(1..=4).contains(&i) || !(1..=4).contains(&j) {
            return Err(Error::Config(format!("density-matrix entry ({i}, {j}) outside 1..=4")));
        }
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Whether every requested metric was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Partial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub notes: Vec<String>,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { status: Status::Complete, notes: vec![], written: vec![] }
    }

    fn skip(&mut self, note: String) {
        log::warn!("{note}");
        self.status = Status::Partial;
        self.notes.push(note);
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Complete => 0,
            Status::Partial => 1,
        }
    }
}

/// `2` for bad input or configuration, `1` for failures while running.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Mismatch { .. } | Error::Io { .. } | Error::Json(_) | Error::Capability(_) => 2,
        Error::Contract(_) | Error::Numerical(_) => 1,
    }
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T, out: &mut Outcome) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    out.written.push(path.to_path_buf());
    Ok(())
}

fn write_text(path: &Path, text: &str, out: &mut Outcome) -> Result<()> {
    write_atomic(path, text.as_bytes())?;
    out.written.push(path.to_path_buf());
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

fn map_sizes<T: Send>(sizes: &[usize], f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        sizes.par_iter().map(|&n| f(n)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        sizes.iter().map(|&n| f(n)).collect()
    }
}

fn family_name(l: Layer) -> &'static str {
    match l {
        Layer::Alpha => "alpha",
        Layer::Beta => "beta",
    }
}

/// Objective for `spec` on `backend`.
pub fn make_objective(spec: &AnsatzSpec, backend: BackendTag) -> Result<Box<dyn Objective>> {
    match backend {
        BackendTag::Statevector => Ok(Box::new(StatevectorObjective::new(spec)?)),
        BackendTag::Fermion => Ok(Box::new(FermionObjective::new(spec)?)),
        other => Err(Error::Capability(format!("no ansatz objective for backend {other:?}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub model: ModelKind,
    pub g: f64,
    pub boundary: Boundary,
    pub ansatz_fingerprint: String,
    pub tool_version: String,
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub validation_sizes: Vec<usize>,
    pub error_threshold_percent: Option<f64>,
    pub overlap_threshold: Option<f64>,
    pub bfgs: BfgsConfig,
}

/// One optimized angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub n: usize,
    pub family: Layer,
    pub i: usize,
    pub angle: f64,
    pub energy: f64,
    pub error_percent: Option<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub backend: BackendTag,
}

/// Outcome of optimizing one size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub n: usize,
    pub split: Split,
    pub backend: Option<BackendTag>,
    pub energy: Option<f64>,
    pub exact_energy: Option<f64>,
    pub error_percent: Option<f64>,
    pub overlap: Option<f64>,
    pub passed: bool,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDataset {
    pub header: DatasetHeader,
    pub records: Vec<ParamRecord>,
    pub validation_records: Vec<ParamRecord>,
    pub sizes: Vec<SizeReport>,
    /// SHA-256 of the file with this field empty.
    pub content_hash: String,
}

impl ParamDataset {
    pub fn compute_hash(&self) -> String {
        let mut blank = self.clone();
        blank.content_hash.clear();
        let text = serde_json::to_string(&blank).expect("dataset serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn seal(&mut self) {
        self.content_hash = self.compute_hash();
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ds: ParamDataset = read_json(path)?;
        if ds.content_hash != ds.compute_hash() {
            return Err(Error::Config(format!("{}: content hash does not match its records", path.display())));
        }
        ds.check_unique()?;
        Ok(ds)
    }

    fn check_unique(&self) -> Result<()> {
        let mut keys: Vec<(usize, Layer, usize)> =
            self.records.iter().chain(&self.validation_records).map(|r| (r.n, r.family, r.i)).collect();
        let count = keys.len();
        keys.sort_unstable_by_key(|k| (k.0, family_name(k.1), k.2));
        keys.dedup();
        if keys.len() != count {
            return Err(Error::Config("dataset has duplicate (N, family, i) records".into()));
        }
        Ok(())
    }

    fn model_at(&self, n: usize) -> Result<ModelSpec> {
        ModelSpec::new(self.header.model, self.header.g, n, self.header.boundary)
    }

    /// Parameter sets of one split, by increasing `N`.
    pub fn param_sets(&self, split: Split) -> Result<Vec<ParamSet>> {
        let records = match split {
            Split::Train => &self.records,
            Split::Validation => &self.validation_records,
        };
        let mut by_n: BTreeMap<usize, Vec<&ParamRecord>> = BTreeMap::new();
        for r in records {
            by_n.entry(r.n).or_default().push(r);
        }
        by_n.into_iter()
            .map(|(n, rs)| {
                let model = self.model_at(n)?;
                let depth = ansatz_spec(&model)?.depth;
                let mut alphas = vec![f64::NAN; depth];
                let mut betas = vec![f64::NAN; depth];
                for r in &rs {
                    if r.i == 0 || r.i > depth {
                        return Err(Error::Config(format!("record N={n} i={} outside 1..={depth}", r.i)));
                    }
                    match r.family {
                        Layer::Alpha => alphas[r.i - 1] = r.angle,
                        Layer::Beta => betas[r.i - 1] = r.angle,
                    }
                }
                if alphas.iter().chain(&betas).any(|v| v.is_nan()) {
                    return Err(Error::Config(format!("dataset is missing angles for N={n}")));
                }
                let mut ps = ParamSet::new(model, alphas, betas, ParamSource::Optimized);
                ps.energy = Some(rs[0].energy);
                Ok(ps)
            })
            .collect()
    }
}

fn records_of(r: &OptimResult) -> Vec<ParamRecord> {
    let ps = &r.best_params;
    [(Layer::Alpha, &ps.alphas), (Layer::Beta, &ps.betas)]
        .into_iter()
        .flat_map(|(family, v)| {
            v.iter().enumerate().map(move |(k, &angle)| ParamRecord {
                n: ps.model.n,
                family,
                i: k + 1,
                angle,
                energy: r.best_energy,
                error_percent: r.energy_error_percent,
                iterations: r.iterations,
                evaluations: r.evaluations,
                converged: r.converged,
                restart_index: r.restart_index,
                backend: r.backend,
            })
        })
        .collect()
}

/// Exact energy and, for XXZ, the ground space for overlaps.
fn reference(cfg: &RunConfig, model: &ModelSpec) -> (Option<f64>, Option<statevector::GroundSpace>, Option<String>) {
    if model.kind == ModelKind::Xxz {
        if model.n > cfg.lanczos_cap {
            return (None, None, Some(format!("N={} exceeds the Lanczos cap of {}", model.n, cfg.lanczos_cap)));
        }
        let gs = build_hamiltonian(model).and_then(|h| lanczos_ground(&h, &LanczosConfig::default()));
        match gs {
            Ok(gs) => (Some(gs.energy), Some(gs), None),
            Err(e) => (None, None, Some(e.to_string())),
        }
    } else {
        match exact_ground_energy(model, cfg.lanczos_cap) {
            Ok(e) => (Some(e), None, None),
            Err(e) => (None, None, Some(e.to_string())),
        }
    }
}

fn ground_overlap_of(spec: &AnsatzSpec, r: &OptimResult, ground: Option<&statevector::GroundSpace>) -> Result<Option<f64>> {
    match ground {
        Some(gs) => Ok(Some(ground_overlap(&statevector::run_ansatz(spec, &r.best_params)?, gs)?)),
        None => Ok(None),
    }
}

fn meets_thresholds(cfg: &RunConfig, r: &OptimResult, overlap: Option<f64>) -> bool {
    let energy_ok = match (r.energy_error_percent, cfg.error_threshold_percent()) {
        (Some(err), Some(thr)) => err <= thr,
        (None, Some(_)) => false,
        _ => true,
    };
    let overlap_ok = match (overlap, cfg.overlap_threshold()) {
        (Some(o), Some(thr)) => o >= thr,
        (None, Some(_)) => false,
        _ => true,
    };
    energy_ok && overlap_ok
}

fn collect_size(cfg: &RunConfig, n: usize, split: Split, prev: Option<&ParamSet>) -> Result<(OptimResult, SizeReport)> {
    let model = cfg.model_at(n)?;
    let spec = ansatz_spec(&model)?;
    let backend = cfg.backend_for(n)?;
    let obj = make_objective(&spec, backend)?;
    let (exact, ground, note) = reference(cfg, &model);
    let x0 = match prev {
        Some(p) => ramp_init(p, spec.depth),
        None => spec.ramp_guess(0.3),
    };
    let mut bfgs = cfg.bfgs();
    bfgs.seed = bfgs.seed.wrapping_add(cfg.seed);
    if let (Some(e0), Some(thr)) = (exact, cfg.error_threshold_percent()) {
        // stop restarting once an order of magnitude inside the threshold
        bfgs.stop_below = Some(e0 + 0.1 * thr / 100.0 * e0.abs());
    }
    let full_restarts = bfgs.restarts;
    if prev.is_some() {
        bfgs.restarts = cfg.warm_restarts.min(full_restarts);
    }
    let mut r = optimize_params(&spec, obj.as_ref(), &x0, &bfgs, exact)?;
    let mut overlap = ground_overlap_of(&spec, &r, ground.as_ref())?;
    if bfgs.restarts < full_restarts && !meets_thresholds(cfg, &r, overlap) {
        log::info!("N={n}: warm start missed the threshold, retrying with {full_restarts} restarts");
        bfgs.restarts = full_restarts;
        let retry = optimize_params(&spec, obj.as_ref(), &x0, &bfgs, exact)?;
        if retry.best_energy < r.best_energy {
            overlap = ground_overlap_of(&spec, &retry, ground.as_ref())?;
            r = retry;
        }
    }
    let passed = meets_thresholds(cfg, &r, overlap);
    let message = if passed {
        None
    } else {
        Some(note.unwrap_or_else(|| "threshold not reached".to_string()))
    };
    let report = SizeReport {
        n,
        split,
        backend: Some(backend),
        energy: Some(r.best_energy),
        exact_energy: exact,
        error_percent: r.energy_error_percent,
        overlap,
        passed,
        message,
    };
    Ok((r, report))
}

/// Optimizes every collection and validation size, each warm-started from
/// the previous one, and writes `dataset.json`.
pub fn cmd_collect(cfg: &RunConfig) -> Result<Outcome> {
    cfg.validate()?;
    let mut out = Outcome::new();
    let template = ansatz_spec(&cfg.model_at(cfg.target())?)?;
    let mut ds = ParamDataset {
        header: DatasetHeader {
            model: cfg.model,
            g: cfg.g(),
            boundary: cfg.boundary(),
            ansatz_fingerprint: template.family_fingerprint(),
            tool_version: TOOL_VERSION.to_string(),
            seed: cfg.seed,
            sizes: cfg.sizes(),
            validation_sizes: cfg.validation_sizes(),
            error_threshold_percent: cfg.error_threshold_percent(),
            overlap_threshold: cfg.overlap_threshold(),
            bfgs: cfg.bfgs(),
        },
        records: vec![],
        validation_records: vec![],
        sizes: vec![],
        content_hash: String::new(),
    };
    let mut prev: Option<ParamSet> = None;
    let jobs = cfg.sizes().into_iter().map(|n| (n, Split::Train)).chain(cfg.validation_sizes().into_iter().map(|n| (n, Split::Validation)));
    for (n, split) in jobs {
        match collect_size(cfg, n, split, prev.as_ref()) {
            Ok((r, report)) => {
                log::info!(
                    "N={n}: energy {:.12} error {:?}% overlap {:?}",
                    r.best_energy,
                    r.energy_error_percent,
                    report.overlap
                );
                if !report.passed {
                    out.skip(format!("N={n}: {}", report.message.clone().unwrap_or_default()));
                }
                let recs = records_of(&r);
                match split {
                    Split::Train => ds.records.extend(recs),
                    Split::Validation => ds.validation_records.extend(recs),
                }
                ds.sizes.push(report);
                prev = Some(r.best_params);
            }
            Err(e) => {
                out.skip(format!("N={n}: optimization failed: {e}"));
                ds.sizes.push(SizeReport {
                    n,
                    split,
                    backend: None,
                    energy: None,
                    exact_energy: None,
                    error_percent: None,
                    overlap: None,
                    passed: false,
                    message: Some(e.to_string()),
                });
            }
        }
    }
    ds.seal();
    write_json(&cfg.path(DATASET_FILE), &ds, &mut out)?;
    Ok(out)
}

fn checkpoint_file(family: Layer) -> String {
    format!("checkpoint_{}.json", family_name(family))
}

/// Energy of `ps` on the configured backend with its error against the
/// exact value.
fn simulate(cfg: &RunConfig, ps: &ParamSet) -> Result<(f64, Option<f64>, Option<f64>)> {
    let spec = ansatz_spec(&ps.model)?;
    let obj = make_objective(&spec, cfg.backend_for(ps.model.n)?)?;
    let e = obj.evaluate(&ps.to_vector())?;
    let exact = reference(cfg, &ps.model).0;
    Ok((e, exact, exact.map(|e0| energy_error_percent(e, e0))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationEnergy {
    pub n: usize,
    pub energy: Option<f64>,
    pub exact_energy: Option<f64>,
    pub error_percent: Option<f64>,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: Layer,
    pub history: HistorySummary,
    pub final_validation_mae: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub dataset_hash: String,
    pub families: Vec<FamilyReport>,
    pub validation: Vec<ValidationEnergy>,
}

fn check_dataset(cfg: &RunConfig, ds: &ParamDataset) -> Result<()> {
    let h = &ds.header;
    let expected = ansatz_spec(&cfg.model_at(cfg.target())?)?.family_fingerprint();
    if h.model != cfg.model || h.g != cfg.g() || h.ansatz_fingerprint != expected {
        return Err(Error::Config(format!(
            "dataset is for {} g={} (ansatz {}), configuration asks for {} g={} (ansatz {expected})",
            h.model,
            h.g,
            h.ansatz_fingerprint,
            cfg.model,
            cfg.g()
        )));
    }
    Ok(())
}

/// Trains the α and β networks on `dataset.json` and dry-runs them on the
/// validation sizes.
pub fn cmd_train(cfg: &RunConfig) -> Result<Outcome> {
    cfg.train.validate()?;
    let mut out = Outcome::new();
    let ds = ParamDataset::load(&cfg.path(DATASET_FILE))?;
    check_dataset(cfg, &ds)?;
    let train_sets = ds.param_sets(Split::Train)?;
    let val_sets = ds.param_sets(Split::Validation)?;
    if train_sets.is_empty() {
        return Err(Error::Config("dataset has no training records".into()));
    }
    let tcfg = TrainConfig { seed: cfg.train.seed.wrapping_add(cfg.seed), ..cfg.train.clone() };
    let mut nets = vec![];
    let mut families = vec![];
    for family in [Layer::Alpha, Layer::Beta] {
        let ts = TrainingSet::from_params(&train_sets, &val_sets, family)?;
        let (mlp, hist) = train(&ts, &tcfg)?;
        let summary = HistorySummary::from(&hist);
        families.push(FamilyReport {
            family,
            history: summary.clone(),
            final_validation_mae: hist.validation_mae.last().copied(),
        });
        let ck = Checkpoint {
            family,
            model: cfg.model_at(cfg.target())?,
            ansatz_fingerprint: ds.header.ansatz_fingerprint.clone(),
            dataset_fingerprint: ds.content_hash.clone(),
            layer_sizes: mlp.sizes(),
            mlp: mlp.clone(),
            config: tcfg.clone(),
            history_summary: summary,
        };
        write_text(&cfg.path(&checkpoint_file(family)), &(ck.to_json()? + "\n"), &mut out)?;
        nets.push(mlp);
    }
    let val_sizes: Vec<usize> = val_sets.iter().map(|p| p.model.n).collect();
    let validation = map_sizes(&val_sizes, |n| {
        let eval = cfg
            .model_at(n)
            .and_then(|m| ansatz_spec(&m))
            .and_then(|spec| simulate(cfg, &predict_paramset(&nets[0], &nets[1], &spec)));
        match eval {
            Ok((e, exact, err)) => {
                ValidationEnergy { n, energy: Some(e), exact_energy: exact, error_percent: err, message: None }
            }
            Err(e) => ValidationEnergy { n, energy: None, exact_energy: None, error_percent: None, message: Some(e.to_string()) },
        }
    });
    for v in &validation {
        if let Some(m) = &v.message {
            out.skip(format!("validation N={}: {m}", v.n));
        }
    }
    let report = TrainReport { dataset_hash: ds.content_hash, families, validation };
    write_json(&cfg.path(TRAIN_REPORT_FILE), &report, &mut out)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionFile {
    pub params: ParamSet,
    pub dataset_fingerprint: String,
    pub refined: Option<OptimResult>,
}

pub fn prediction_file(n: usize) -> String {
    format!("predicted_N{n}.json")
}

pub fn metrics_file(n: usize) -> String {
    format!("metrics_N{n}.json")
}

fn load_checkpoints(cfg: &RunConfig) -> Result<(Checkpoint, Checkpoint)> {
    let a = Checkpoint::from_json(&read_text(&cfg.path(&checkpoint_file(Layer::Alpha)))?)?;
    let b = Checkpoint::from_json(&read_text(&cfg.path(&checkpoint_file(Layer::Beta)))?)?;
    if a.family != Layer::Alpha || b.family != Layer::Beta {
        return Err(Error::Config("checkpoint files hold the wrong families".into()));
    }
    if a.dataset_fingerprint != b.dataset_fingerprint || a.ansatz_fingerprint != b.ansatz_fingerprint {
        return Err(Error::Config("alpha and beta checkpoints come from different datasets".into()));
    }
    if a.model.kind != cfg.model || a.model.g != cfg.g() {
        return Err(Error::Config(format!(
            "checkpoints are for {} g={}, configuration asks for {} g={}",
            a.model.kind,
            a.model.g,
            cfg.model,
            cfg.g()
        )));
    }
    Ok((a, b))
}

/// Writes the network prediction for the target size (and, with
/// `refine`, a BFGS polish of it).
pub fn cmd_predict(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::new();
    let target = cfg.target();
    let model = cfg.model_at(target)?;
    let spec = ansatz_spec(&model)?;
    let (a, b) = load_checkpoints(cfg)?;
    if a.ansatz_fingerprint != spec.family_fingerprint() {
        return Err(Error::Config("checkpoints were trained for a different ansatz".into()));
    }
    let params = predict_paramset(&a.mlp, &b.mlp, &spec);
    let mut refined = None;
    if cfg.refine {
        match cfg.backend_for(target).and_then(|bk| make_objective(&spec, bk)) {
            Ok(obj) => {
                let exact = reference(cfg, &model).0;
                refined = Some(optimize_params(&spec, obj.as_ref(), &params.to_vector(), &cfg.bfgs(), exact)?);
            }
            Err(e) => out.skip(format!("refinement skipped: {e}")),
        }
    }
    let file = PredictionFile { params, dataset_fingerprint: a.dataset_fingerprint, refined };
    write_json(&cfg.path(&prediction_file(target)), &file, &mut out)?;
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub source: ParamSource,
    pub refined: bool,
    pub energy: Option<f64>,
    pub exact_energy: Option<f64>,
    pub error_percent: Option<f64>,
    pub overlap: Option<f64>,
    /// `S(n)` for `n = 1..N−1`.
    pub entropy: Option<Vec<f64>>,
    pub central_charge: Option<CentralChargeFit>,
    pub skipped: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub model: ModelSpec,
    pub include_edge_cuts: bool,
    pub states: Vec<StateMetrics>,
}

/// Energy, error, entropies with their scaling fit, and (XXZ) overlap of one
/// parameter set. Capability gaps are listed in `skipped`.
pub fn state_metrics(cfg: &RunConfig, ps: &ParamSet, refined: bool) -> Result<StateMetrics> {
    let model = ps.model;
    let spec = ansatz_spec(&model)?;
    spec.check_lengths(ps.alphas.len(), ps.betas.len())?;
    let mut m = StateMetrics {
        source: ps.source,
        refined,
        energy: None,
        exact_energy: None,
        error_percent: None,
        overlap: None,
        entropy: None,
        central_charge: None,
        skipped: vec![],
    };
    let backend = match cfg.backend_for(model.n) {
        Ok(b) => b,
        Err(e) => {
            m.skipped.push(format!("energy: {e}"));
            return Ok(m);
        }
    };
    let (exact, ground, note) = reference(cfg, &model);
    if let Some(note) = note {
        m.skipped.push(format!("exact energy: {note}"));
    }
    m.exact_energy = exact;
    let x = ps.to_vector();
    match backend {
        BackendTag::Fermion => {
            let obj = FermionObjective::new(&spec)?;
            m.energy = Some(obj.evaluate(&x)?);
            m.entropy = Some(gaussian_entropy_profile(&obj.state(&x)?)?);
        }
        _ => {
            let psi = StatevectorObjective::new(&spec)?.state(&x)?;
            m.energy = Some(statevector::expectation(&psi, &build_hamiltonian(&model)?)?);
            if let Some(gs) = &ground {
                m.overlap = Some(ground_overlap(&psi, gs)?);
            }
            if model.kind != ModelKind::Xxz {
                m.entropy = Some((1..model.n).map(|n| entanglement_entropy(&psi, n)).collect::<Result<_>>()?);
            }
        }
    }
    m.error_percent = match (m.energy, exact) {
        (Some(e), Some(e0)) => Some(energy_error_percent(e, e0)),
        _ => None,
    };
    if let Some(s) = &m.entropy {
        match EntropySamples::from_profile(model.n, s).and_then(|d| fit_central_charge(&d, cfg.include_edge_cuts)) {
            Ok(f) => m.central_charge = Some(f),
            Err(e) => m.skipped.push(format!("central charge: {e}")),
        }
    } else if model.kind == ModelKind::Xxz {
        m.skipped.push("entropy: open-chain XXZ entropies are not fitted".into());
    }
    Ok(m)
}

/// Metrics for the predicted (and refined) parameters at the target size.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::new();
    let target = cfg.target();
    let file: PredictionFile = read_json(&cfg.path(&prediction_file(target)))?;
    if file.params.model != cfg.model_at(target)? {
        return Err(Error::Config("prediction file is for a different model".into()));
    }
    let mut states = vec![state_metrics(cfg, &file.params, false)?];
    if let Some(r) = &file.refined {
        states.push(state_metrics(cfg, &r.best_params, true)?);
    }
    for s in &states {
        for note in &s.skipped {
            if !note.starts_with("entropy:") {
                out.skip(note.clone());
            }
        }
    }
    let metrics = MetricsFile { model: file.params.model, include_edge_cuts: cfg.include_edge_cuts, states };
    write_json(&cfg.path(&metrics_file(target)), &metrics, &mut out)?;
    Ok(out)
}

/// Two-site reduced state of sites 1, 2 in the exact ground state.
pub fn ground_rdm2(cfg: &RunConfig, model: &ModelSpec) -> Result<statevector::DensityMatrix> {
    let spec = ansatz_spec(model)?;
    match model.kind {
        ModelKind::Tfim | ModelKind::Xy => {
            let circuit = jw_compile(&spec, initial_parity(&spec)?)?;
            gaussian_rdm2(&ground_covariance(&circuit.hamiltonian)?, (0, 1))
        }
        ModelKind::Xxz => {
            if model.n > cfg.lanczos_cap {
                return Err(Error::Capability(format!("N={} exceeds the Lanczos cap of {}", model.n, cfg.lanczos_cap)));
            }
            let gs = lanczos_ground(&build_hamiltonian(model)?, &LanczosConfig::default())?;
            reduced_density(gs.ground(), &[0, 1])
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdmScan {
    pub model: ModelKind,
    pub g: f64,
    pub entry: (usize, usize),
    pub values: Vec<(usize, f64, f64)>,
    pub fit: DecayFit,
}

pub fn rdm_stem(cfg: &RunConfig) -> String {
    format!("rdm_{}_g{}_e{}{}", cfg.model, cfg.g(), cfg.entry.0, cfg.entry.1)
}

/// `[ρ̂₂(N)]_{ij}` over the scan sizes and its decay fit (real part).
pub fn rdm_scan(cfg: &RunConfig) -> Result<RdmScan> {
    let sizes = cfg.scan_sizes();
    if sizes.len() < 4 {
        return Err(Error::Config(format!("rdm-scan needs at least 4 sizes, got {}", sizes.len())));
    }
    let (i, j) = cfg.entry;
    if !(1..=4).contains(&i) || !(1..=4).contains(&j) {
        return Err(Error::Config(format!("density-matrix entry ({i}, {j}) outside 1..=4")));
    }
    let mut sorted = sizes.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let models: Vec<ModelSpec> = sorted.iter().map(|&n| cfg.model_at(n)).collect::<Result<_>>()?;
    let values: Vec<Result<C64>> = map_sizes(&sorted, |n| {
        let model = models.iter().find(|m| m.n == n).expect("model built for every size");
        ground_rdm2(cfg, model).map(|rho| rho.get(i - 1, j - 1))
    });
    let values: Vec<(usize, f64, f64)> = sorted
        .iter()
        .zip(values)
        .map(|(&n, v)| v.map(|c| (n, c.re, c.im)))
        .collect::<Result<_>>()?;
    let series = DecaySeries { entry: (i, j), points: values.iter().map(|&(n, re, _)| (n as f64, re)).collect() };
    let fit = fit_decay(&series, &cfg.decay_fit)?;
    Ok(RdmScan { model: cfg.model, g: cfg.g(), entry: (i, j), values, fit })
}

pub fn cmd_rdmscan(cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::new();
    let scan = rdm_scan(cfg)?;
    let mut csv = String::from("N,re,im\n");
    for (n, re, im) in &scan.values {
        csv.push_str(&format!("{n},{re},{im}\n"));
    }
    let stem = rdm_stem(cfg);
    write_text(&cfg.path(&format!("{stem}.csv")), &csv, &mut out)?;
    if !scan.fit.converged {
        out.skip("decay fit did not converge".into());
    }
    write_json(&cfg.path(&format!("{stem}_fit.json")), &scan, &mut out)?;
    Ok(out)
}

fn sorted_names(dir: &Path, prefix: &str, suffix: &str) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .map(|e| e.file_name().to_string_lossy().into_owned())
                .filter(|n| n.starts_with(prefix) && n.ends_with(suffix))
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

/// Six significant figures for the human-readable summary.
fn num(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:.5e}")
    } else {
        format!("{x:.6}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "-".into())
}

/// Merges the run directory into `fig2a.csv`, `fig2c.csv`, `fig3.csv`,
/// `fig4.csv` and `summary.md`.
pub fn cmd_report(dir: &Path) -> Result<Outcome> {
    let mut out = Outcome::new();
    let mut summary = String::from("# Run summary\n\n");
    let mut found = false;
    let mut missing = vec![];

    let ds_path = dir.join(DATASET_FILE);
    if ds_path.exists() {
        found = true;
        let ds = ParamDataset::load(&ds_path)?;
        let mut csv = String::from("N,family,i,angle\n");
        for r in ds.records.iter().chain(&ds.validation_records) {
            csv.push_str(&format!("{},{},{},{}\n", r.n, family_name(r.family), r.i, r.angle));
        }
        write_text(&dir.join("fig2a.csv"), &csv, &mut out)?;
        summary.push_str(&format!(
            "## Dataset\n\nmodel {} g={} ({} angles, {} validation angles)\n\n| N | split | error % | overlap | passed |\n|---|---|---|---|---|\n",
            ds.header.model,
            ds.header.g,
            ds.records.len(),
            ds.validation_records.len()
        ));
        for s in &ds.sizes {
            let split = match s.split {
                Split::Train => "train",
                Split::Validation => "validation",
            };
            summary.push_str(&format!("| {} | {split} | {} | {} | {} |\n", s.n, opt(s.error_percent), opt(s.overlap), s.passed));
        }
        summary.push('\n');
    } else {
        missing.push(DATASET_FILE.to_string());
    }

    let tr_path = dir.join(TRAIN_REPORT_FILE);
    if tr_path.exists() {
        found = true;
        let tr: TrainReport = read_json(&tr_path)?;
        summary.push_str("## Training\n\n");
        for f in &tr.families {
            summary.push_str(&format!(
                "- {}: best epoch {}, best score {}, validation MAE {}\n",
                family_name(f.family),
                f.history.best_epoch,
                num(f.history.best_score),
                opt(f.final_validation_mae)
            ));
        }
        for v in &tr.validation {
            summary.push_str(&format!("- predicted N={}: error {} %\n", v.n, opt(v.error_percent)));
        }
        summary.push('\n');
    } else {
        missing.push(TRAIN_REPORT_FILE.to_string());
    }

    let predictions = sorted_names(dir, "predicted_N", ".json");
    if predictions.is_empty() {
        missing.push("predicted_N*.json".into());
    } else {
        found = true;
        let mut csv = String::from("N,family,i,angle\n");
        for name in &predictions {
            let p: PredictionFile = read_json(&dir.join(name))?;
            for (family, v) in [(Layer::Alpha, &p.params.alphas), (Layer::Beta, &p.params.betas)] {
                for (k, a) in v.iter().enumerate() {
                    csv.push_str(&format!("{},{},{},{a}\n", p.params.model.n, family_name(family), k + 1));
                }
            }
        }
        write_text(&dir.join("fig2c.csv"), &csv, &mut out)?;
    }

    let metrics = sorted_names(dir, "metrics_N", ".json");
    if metrics.is_empty() {
        missing.push("metrics_N*.json".into());
    } else {
        found = true;
        let mut csv = String::from("N,refined,n,S\n");
        summary.push_str("## Prepared states\n\n| N | refined | error % | overlap | c | A |\n|---|---|---|---|---|---|\n");
        for name in &metrics {
            let m: MetricsFile = read_json(&dir.join(name))?;
            for s in &m.states {
                if let Some(ent) = &s.entropy {
                    for (k, v) in ent.iter().enumerate() {
                        csv.push_str(&format!("{},{},{},{v}\n", m.model.n, s.refined, k + 1));
                    }
                }
                summary.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} |\n",
                    m.model.n,
                    s.refined,
                    opt(s.error_percent),
                    opt(s.overlap),
                    opt(s.central_charge.map(|c| c.c)),
                    opt(s.central_charge.map(|c| c.a))
                ));
            }
        }
        summary.push('\n');
        write_text(&dir.join("fig3.csv"), &csv, &mut out)?;
    }

    let scans = sorted_names(dir, "rdm_", "_fit.json");
    if !scans.is_empty() {
        found = true;
        let mut csv = String::from("model,g,entry,N,re,im\n");
        summary.push_str("## Reduced density matrix fits\n\n| model | g | entry | c0 | c1 | c2 | Δ |\n|---|---|---|---|---|---|---|\n");
        for name in &scans {
            let s: RdmScan = read_json(&dir.join(name))?;
            let e = format!("{}{}", s.entry.0, s.entry.1);
            for (n, re, im) in &s.values {
                csv.push_str(&format!("{},{},{e},{n},{re},{im}\n", s.model, s.g));
            }
            let p = s.fit.params;
            summary.push_str(&format!("| {} | {} | {e} | {} | {} | {} | {} |\n", s.model, s.g, num(p.c0), num(p.c1), num(p.c2), num(p.delta)));
        }
        summary.push('\n');
        write_text(&dir.join("fig4.csv"), &csv, &mut out)?;
    }

    if !found {
        write_text(&dir.join(SUMMARY_FILE), "# Run summary\n\nno runs found\n", &mut out)?;
        out.skip(format!("no runs found in {}", dir.display()));
        return Ok(out);
    }
    if !missing.is_empty() {
        summary.push_str(&format!("## Missing inputs\n\n{}\n", missing.iter().map(|m| format!("- {m}\n")).collect::<String>()));
        out.skip(format!("missing inputs: {}", missing.join(", ")));
    }
    write_text(&dir.join(SUMMARY_FILE), &summary, &mut out)?;
    Ok(out)
}

/// Re-simulates every size of a dataset; returns the largest absolute
/// deviation from the stored energies.
pub fn reverify_dataset(cfg: &RunConfig, ds: &ParamDataset) -> Result<f64> {
    let mut worst = 0.0f64;
    for split in [Split::Train, Split::Validation] {
        for ps in ds.param_sets(split)? {
            let spec = ansatz_spec(&ps.model)?;
            let canon = canonicalize_params(&ps, &spec)?;
            let (e, _, _) = simulate(cfg, &canon)?;
            worst = worst.max((e - ps.energy.unwrap_or(f64::NAN)).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(model: ModelKind, dir: &Path) -> RunConfig {
        RunConfig {
            model,
            out: dir.to_path_buf(),
            train: TrainConfig { epochs: 300, ..TrainConfig::default() },
            ..RunConfig::default()
        }
    }

    #[test]
    fn defaults_and_validation() {
        let c = RunConfig::default();
        assert_eq!(c.sizes(), vec![8, 10, 12, 14, 16, 18, 20]);
        assert_eq!(c.sizes().iter().sum::<usize>(), 98);
        assert_eq!(c.validation_sizes(), vec![22, 24, 26, 28]);
        assert_eq!(c.target(), 40);
        c.validate().unwrap();
        let xy = RunConfig { model: ModelKind::Xy, ..RunConfig::default() };
        assert_eq!(xy.sizes(), vec![16, 20, 24, 28, 32, 36, 40]);
        assert_eq!(xy.target(), 64);
        let sv = RunConfig { model: ModelKind::Xy, backend: BackendChoice::Statevector, ..RunConfig::default() };
        assert_eq!(sv.sizes(), XY_FALLBACK_SIZES.to_vec());
        let overlap = RunConfig { validation_sizes: Some(vec![20]), ..RunConfig::default() };
        assert!(matches!(overlap.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn capability_table() {
        for model in [ModelKind::Tfim, ModelKind::Xy, ModelKind::Xxz] {
            for backend in [BackendChoice::Auto, BackendChoice::Statevector, BackendChoice::Fermion] {
                for n in [3, 6, 8, 12, 26, 28, 40, 64, 66] {
                    let c = RunConfig { model, backend, sizes: Some(vec![n]), validation_sizes: Some(vec![]), target: Some(60), ..RunConfig::default() };
                    let size_ok = model.check_size(n).is_ok();
                    let backend_ok = match (backend, model) {
                        (BackendChoice::Fermion, ModelKind::Xxz) => false,
                        (BackendChoice::Statevector, _) | (_, ModelKind::Xxz) => n <= DEFAULT_STATEVECTOR_CAP,
                        _ => true,
                    };
                    let r = c.validate();
                    assert_eq!(r.is_ok(), size_ok && backend_ok, "{model} {backend:?} {n}: {r:?}");
                    if let Err(e) = r {
                        assert_eq!(error_exit_code(&e), 2);
                    }
                }
            }
        }
    }

    #[test]
    fn config_file_with_flag_overrides() {
        let c = RunConfig::from_json(r#"{"model": "xxz", "sizes": [10, 12], "seed": 4}"#).unwrap();
        assert_eq!(c.model, ModelKind::Xxz);
        assert_eq!(c.g(), 0.1);
        assert_eq!(c.sizes(), vec![10, 12]);
        assert!(RunConfig::from_json(r#"{"modle": "xy"}"#).is_err());
    }

    #[test]
    fn empty_collection_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig { sizes: Some(vec![]), validation_sizes: Some(vec![]), ..quick(ModelKind::Tfim, dir.path()) };
        let out = cmd_collect(&c).unwrap();
        assert_eq!(out.exit_code(), 0);
        let ds = ParamDataset::load(&dir.path().join(DATASET_FILE)).unwrap();
        assert!(ds.records.is_empty());
        assert!(matches!(cmd_train(&c), Err(Error::Config(_))));
    }

    #[test]
    fn small_tfim_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig {
            sizes: Some(vec![4, 6, 8]),
            validation_sizes: Some(vec![10]),
            target: Some(12),
            ..quick(ModelKind::Tfim, dir.path())
        };
        assert_eq!(cmd_collect(&c).unwrap().exit_code(), 0);
        let path = dir.path().join(DATASET_FILE);
        let ds = ParamDataset::load(&path).unwrap();
        assert_eq!(ds.records.len(), 4 + 6 + 8);
        assert_eq!(ds.validation_records.len(), 10);
        assert!(ds.sizes.iter().all(|s| s.passed && s.error_percent.unwrap() <= 1e-8));
        assert!(reverify_dataset(&c, &ds).unwrap() < 1e-9);
        let first = fs::read(&path).unwrap();
        cmd_collect(&c).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);

        // tampering is detected
        let mut text = String::from_utf8(first).unwrap();
        text = text.replacen("\"angle\": ", "\"angle\": 1", 1);
        fs::write(&path, text).unwrap();
        assert!(ParamDataset::load(&path).is_err());
        cmd_collect(&c).unwrap();

        cmd_train(&c).unwrap();
        let ck = fs::read(dir.path().join("checkpoint_alpha.json")).unwrap();
        cmd_train(&c).unwrap();
        assert_eq!(fs::read(dir.path().join("checkpoint_alpha.json")).unwrap(), ck);
        let tr: TrainReport = read_json(&dir.path().join(TRAIN_REPORT_FILE)).unwrap();
        assert_eq!(tr.validation.len(), 1);
        assert!(tr.validation[0].error_percent.is_some());

        assert_eq!(cmd_predict(&c).unwrap().exit_code(), 0);
        let p: PredictionFile = read_json(&dir.path().join(prediction_file(12))).unwrap();
        assert_eq!(p.params.alphas.len(), 6);
        assert_eq!(p.params.source, ParamSource::Predicted);
        assert_eq!(cmd_evaluate(&c).unwrap().exit_code(), 0);
        let m: MetricsFile = read_json(&dir.path().join(metrics_file(12))).unwrap();
        assert_eq!(m.states[0].entropy.as_ref().unwrap().len(), 11);
        assert!(m.states[0].central_charge.is_some());

        let out = cmd_report(dir.path()).unwrap();
        assert_eq!(out.exit_code(), 0, "{:?}", out.notes);
        let fig = fs::read_to_string(dir.path().join("fig2a.csv")).unwrap();
        assert!(fig.starts_with("N,family,i,angle\n"));
        assert_eq!(fig.lines().count(), 1 + 18 + 10);
        let summary = fs::read(dir.path().join(SUMMARY_FILE)).unwrap();
        cmd_report(dir.path()).unwrap();
        assert_eq!(fs::read(dir.path().join(SUMMARY_FILE)).unwrap(), summary);
    }

    #[test]
    fn mismatched_dataset_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let c = RunConfig { sizes: Some(vec![4]), validation_sizes: Some(vec![]), target: Some(8), ..quick(ModelKind::Tfim, dir.path()) };
        cmd_collect(&c).unwrap();
        let other = RunConfig { g: Some(0.3), ..c };
        assert!(matches!(cmd_train(&other), Err(Error::Config(_))));
    }

    #[test]
    fn empty_report_directory() {
        let dir = tempfile::tempdir().unwrap();
        let out = cmd_report(dir.path()).unwrap();
        assert_eq!(out.exit_code(), 1);
        assert!(fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap().contains("no runs found"));
    }

    #[test]
    fn rdm_scan_flat_at_full_field() {
        // g = 1 is a product state: every entry is independent of N
        let c = RunConfig { g: Some(1.0), sizes: Some(vec![4, 6, 8, 10, 12]), ..RunConfig::default() };
        let scan = rdm_scan(&c).unwrap();
        assert!(scan.values.iter().all(|v| (v.1 - 0.25).abs() < 1e-12));
        let reach = scan.fit.params.c1 * 4f64.powf(-scan.fit.params.c2) * (-4.0 * scan.fit.params.delta).exp();
        assert!(reach.abs() < 1e-8);
        let short = RunConfig { sizes: Some(vec![4, 6, 8]), ..c.clone() };
        assert!(matches!(rdm_scan(&short), Err(Error::Config(_))));
        let off = RunConfig { entry: (1, 2), g: Some(0.5), ..c };
        let scan = rdm_scan(&off).unwrap();
        assert!(scan.values.iter().all(|v| v.2.abs() < 1e-12));
    }
}
