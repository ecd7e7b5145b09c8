//! Dataset assembly from screened simulations, and its on-disk layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::filter::RejectReason;
use super::halton::halton_point;
use super::noise::{perturb_scaled, NoiseMode, NoiseScale};
use super::ranges::{scale_params, ModelKind, ParamRanges};
use super::{screen, simulate_sample, Trajectory};
use crate::error::{Error, Result};
use crate::io::{read_f64, sha256_hex, write_f64};
use crate::physics::PhysicalConstants;
use crate::rng::{substream, NOISE, SAMPLING, SHUFFLE};
use crate::series::SERIES_LEN;

pub const FORMAT_VERSION: u32 = 1;
pub const NOISY_COPIES: usize = 2;
pub const TRAIN_FRACTION: f64 = 0.75;
/// Give up when fewer than this fraction of trials survive screening.
pub const MIN_ACCEPTANCE: f64 = 1e-3;
pub const ACCEPTANCE_WINDOW: u64 = 10_000;

/// Dense row-major matrix of f64.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RowMatrix {
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            data: Vec::new(),
        }
    }

    pub fn from_data(cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 || data.len() % cols != 0 {
            return Err(Error::Format(format!(
                "{} values do not fill rows of width {cols}",
                data.len()
            )));
        }
        Ok(Self { cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(cols: usize, rows: &[R]) -> Result<Self> {
        let mut m = Self::new(cols);
        for r in rows {
            m.push(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::dims(self.cols, row.len(), "matrix row"));
        }
        self.data.extend_from_slice(row);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.data.len() / self.cols
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, indices: &[usize]) -> RowMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        RowMatrix {
            cols: self.cols,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    Clean,
    Noisy,
}

/// Provenance of one dataset row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowFlag {
    /// Position of the accepted source sample, in Halton order.
    pub source: usize,
    pub halton_index: u64,
    pub kind: RowKind,
    /// 0 for the clean row, 1.. for perturbed copies.
    pub copy: usize,
    /// Row holding the clean input of the same source.
    pub clean_row: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildReport {
    pub trials: u64,
    pub accepted: usize,
    pub rejected: BTreeMap<RejectReason, u64>,
    /// Simulations that returned an error instead of a trajectory.
    pub failures: u64,
    pub first_index: u64,
    pub last_index: u64,
}

impl BuildReport {
    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub path: String,
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub model: ModelKind,
    pub n: usize,
    pub nr: Option<usize>,
    pub seed: u64,
    pub target_count: usize,
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub noise_scale: NoiseScale,
    pub grouped_split: bool,
    pub ranges: ParamRanges,
    pub param_columns: Vec<String>,
    pub constants: PhysicalConstants,
    pub rows: usize,
    pub sources: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub screening: BuildReport,
    pub files: BTreeMap<String, FileEntry>,
}

pub const MATRIX_FILES: [&str; 4] = ["inputs", "outputs_h", "outputs_c", "params"];
pub const FLAGS_FILE: &str = "flags.json";
pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    /// Parses and checks internal consistency; file contents are checked by
    /// [`Dataset::load`].
    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset format version {}",
                self.format_version
            )));
        }
        if self.n < 2 {
            return Err(Error::Format(format!("series length {} too short", self.n)));
        }
        if self.param_columns.len() != 6 {
            return Err(Error::Format("expected 6 parameter columns".into()));
        }
        if self.rows != self.sources * (1 + NOISY_COPIES) {
            return Err(Error::Format(format!(
                "{} rows inconsistent with {} sources",
                self.rows, self.sources
            )));
        }
        let mut seen = vec![false; self.rows];
        for &i in self.train.iter().chain(&self.test) {
            if i >= self.rows || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Format(format!(
                    "split index {i} out of range or repeated"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("split does not cover every row".into()));
        }
        for name in MATRIX_FILES.iter().chain(std::iter::once(&"flags")) {
            let entry = self
                .files
                .get(*name)
                .ok_or_else(|| Error::Format(format!("manifest lacks file entry {name:?}")))?;
            if entry.rows != self.rows {
                return Err(Error::Format(format!(
                    "file {name:?} has {} rows",
                    entry.rows
                )));
            }
            if entry.path.contains(['/', '\\']) || entry.path.starts_with('.') {
                return Err(Error::Format(format!(
                    "file path {:?} not allowed",
                    entry.path
                )));
            }
        }
        let expect_cols = [
            ("inputs", self.n),
            ("outputs_h", self.n),
            ("outputs_c", self.n),
            ("params", 6),
        ];
        for (name, cols) in expect_cols {
            if self.files[name].cols != cols {
                return Err(Error::Format(format!(
                    "file {name:?} should have {cols} columns"
                )));
            }
        }
        Ok(())
    }
}

/// Aligned inputs, outputs, parameters and provenance. Noisy rows carry the
/// clean outputs of their source.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub inputs: RowMatrix,
    pub outputs_h: RowMatrix,
    pub outputs_c: RowMatrix,
    pub params: RowMatrix,
    pub flags: Vec<RowFlag>,
}

#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub model: ModelKind,
    /// Number of accepted source samples; the dataset holds three rows each.
    pub target_count: usize,
    pub nr: usize,
    pub seed: u64,
    pub noise_mode: NoiseMode,
    pub noise_scale: NoiseScale,
    pub grouped_split: bool,
    pub constants: PhysicalConstants,
    /// Worker threads for the simulations; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// First Halton index; drawn from the sampling stream when `None`.
    pub halton_start: Option<u64>,
    pub max_trials: Option<u64>,
}

impl BuildConfig {
    pub fn new(model: ModelKind, target_count: usize, seed: u64) -> Self {
        Self {
            model,
            target_count,
            nr: crate::pde::DEFAULT_NR,
            seed,
            noise_mode: NoiseMode::Additive,
            noise_scale: NoiseScale::Realized,
            grouped_split: false,
            constants: PhysicalConstants::default(),
            jobs: None,
            halton_start: None,
            max_trials: None,
        }
    }

    pub fn resolved_halton_start(&self) -> u64 {
        self.halton_start
            .unwrap_or_else(|| 1 + substream(self.seed, SAMPLING, 0).random_range(0..1u64 << 20))
    }
}

fn noise_stream(seed: u64, halton_index: u64, copy: usize) -> rand_chacha::ChaCha8Rng {
    substream(seed, NOISE, halton_index * 4 + copy as u64)
}

/// Runs simulations in Halton order until `target_count` samples pass
/// screening. The result does not depend on the number of worker threads.
pub fn build_dataset(cfg: &BuildConfig) -> Result<Dataset> {
    if cfg.target_count == 0 {
        return Err(Error::Config("target count must be at least 1".into()));
    }
    cfg.constants.validate()?;
    let pool = match cfg.jobs {
        Some(j) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        ),
        None => None,
    };
    let threads = pool
        .as_ref()
        .map_or_else(rayon::current_num_threads, |p| p.current_num_threads());
    let batch = match cfg.model {
        ModelKind::Ode => 256,
        ModelKind::Pde => 2 * threads,
    };

    let start = cfg.resolved_halton_start();
    let mut report = BuildReport {
        first_index: start,
        last_index: start,
        ..BuildReport::default()
    };
    let mut survivors: Vec<(u64, [f64; 6], Trajectory)> = Vec::with_capacity(cfg.target_count);
    let mut next = start;

    'outer: while survivors.len() < cfg.target_count {
        let indices: Vec<u64> = (next..next + batch as u64).collect();
        next += batch as u64;
        let run = || {
            indices
                .par_iter()
                .map(|&i| {
                    let params = scale_params(&halton_point(i), cfg.model);
                    (i, params, simulate_sample(&params, &cfg.constants, cfg.nr))
                })
                .collect::<Vec<_>>()
        };
        let results = match &pool {
            Some(p) => p.install(run),
            None => run(),
        };
        for (i, params, outcome) in results {
            report.trials += 1;
            report.last_index = i;
            match outcome {
                Err(e) => {
                    log::debug!("halton index {i}: simulation failed: {e}");
                    report.failures += 1;
                }
                Ok(traj) => match screen(&traj) {
                    Ok(()) => {
                        survivors.push((i, params.to_row(), traj));
                        if survivors.len() == cfg.target_count {
                            break 'outer;
                        }
                    }
                    Err(reason) => *report.rejected.entry(reason).or_default() += 1,
                },
            }
            if report.trials >= ACCEPTANCE_WINDOW
                && (survivors.len() as f64) < MIN_ACCEPTANCE * report.trials as f64
            {
                return Err(Error::SamplingAborted(format!(
                    "{} of {} trials accepted ({} failures, rejections {:?})",
                    survivors.len(),
                    report.trials,
                    report.failures,
                    report.rejected
                )));
            }
            if cfg.max_trials.is_some_and(|m| report.trials >= m) {
                return Err(Error::SamplingAborted(format!(
                    "trial limit {} reached with {} of {} samples accepted",
                    report.trials,
                    survivors.len(),
                    cfg.target_count
                )));
            }
        }
        log::info!(
            "{} / {} accepted after {} trials",
            survivors.len(),
            cfg.target_count,
            report.trials
        );
    }
    report.accepted = survivors.len();
    assemble(cfg, report, survivors)
}

fn assemble(
    cfg: &BuildConfig,
    report: BuildReport,
    survivors: Vec<(u64, [f64; 6], Trajectory)>,
) -> Result<Dataset> {
    let n = SERIES_LEN;
    let mut inputs = RowMatrix::new(n);
    let mut outputs_h = RowMatrix::new(n);
    let mut outputs_c = RowMatrix::new(n);
    let mut params = RowMatrix::new(6);
    let mut flags = Vec::with_capacity(survivors.len() * (1 + NOISY_COPIES));

    for (source, (index, row, traj)) in survivors.iter().enumerate() {
        let clean_row = inputs.rows();
        for copy in 0..=NOISY_COPIES {
            if copy == 0 {
                inputs.push(&traj.intensity)?;
            } else {
                let mut rng = noise_stream(cfg.seed, *index, copy);
                inputs.push(&perturb_scaled(
                    &traj.intensity,
                    &mut rng,
                    cfg.noise_mode,
                    cfg.noise_scale,
                ))?;
            }
            outputs_h.push(&traj.h)?;
            outputs_c.push(&traj.c)?;
            params.push(row)?;
            flags.push(RowFlag {
                source,
                halton_index: *index,
                kind: if copy == 0 {
                    RowKind::Clean
                } else {
                    RowKind::Noisy
                },
                copy,
                clean_row,
            });
        }
    }

    let (train, test) = split_rows(&flags, cfg.seed, cfg.grouped_split);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        model: cfg.model,
        n,
        nr: (cfg.model == ModelKind::Pde).then_some(cfg.nr),
        seed: cfg.seed,
        target_count: cfg.target_count,
        noise_mode: cfg.noise_mode,
        noise_scale: cfg.noise_scale,
        grouped_split: cfg.grouped_split,
        ranges: ParamRanges::for_model(cfg.model),
        param_columns: cfg
            .model
            .param_columns()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        constants: cfg.constants.clone(),
        rows: flags.len(),
        sources: survivors.len(),
        train,
        test,
        screening: report,
        files: BTreeMap::new(),
    };
    let mut ds = Dataset {
        manifest,
        inputs,
        outputs_h,
        outputs_c,
        params,
        flags,
    };
    ds.refresh_file_entries()?;
    Ok(ds)
}

/// Seeded shuffle, first `ceil(0.75 rows)` to training. In grouped mode whole
/// sources are assigned instead of rows.
pub fn split_rows(flags: &[RowFlag], seed: u64, grouped: bool) -> (Vec<usize>, Vec<usize>) {
    let mut rng = substream(seed, SHUFFLE, 0);
    let (mut train, mut test);
    if grouped {
        let sources = flags.iter().map(|f| f.source + 1).max().unwrap_or(0);
        let mut order: Vec<usize> = (0..sources).collect();
        order.shuffle(&mut rng);
        let cut = (TRAIN_FRACTION * sources as f64).ceil() as usize;
        let mut in_train = vec![false; sources];
        order[..cut].iter().for_each(|&s| in_train[s] = true);
        (train, test) = (0..flags.len()).partition(|&r| in_train[flags[r].source]);
    } else {
        let mut order: Vec<usize> = (0..flags.len()).collect();
        order.shuffle(&mut rng);
        let cut = (TRAIN_FRACTION * flags.len() as f64).ceil() as usize;
        test = order.split_off(cut);
        train = order;
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn matrix_bytes(m: &RowMatrix) -> Vec<u8> {
    crate::io::f64_to_le_bytes(m.data())
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.flags.len()
    }

    pub fn model(&self) -> ModelKind {
        self.manifest.model
    }

    pub fn split_indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.manifest.train,
            Split::Test => &self.manifest.test,
        }
    }

    pub fn matrix(&self, name: &str) -> Option<&RowMatrix> {
        match name {
            "inputs" => Some(&self.inputs),
            "outputs_h" => Some(&self.outputs_h),
            "outputs_c" => Some(&self.outputs_c),
            "params" => Some(&self.params),
            _ => None,
        }
    }

    fn flags_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.flags)?)
    }

    fn refresh_file_entries(&mut self) -> Result<()> {
        let mut files = BTreeMap::new();
        for name in MATRIX_FILES {
            let m = self.matrix(name).expect("known matrix");
            files.insert(
                name.to_string(),
                FileEntry {
                    path: format!("{name}.f64"),
                    rows: m.rows(),
                    cols: m.cols(),
                    sha256: sha256_hex(&matrix_bytes(m)),
                },
            );
        }
        files.insert(
            "flags".to_string(),
            FileEntry {
                path: FLAGS_FILE.to_string(),
                rows: self.flags.len(),
                cols: 0,
                sha256: sha256_hex(self.flags_json()?.as_bytes()),
            },
        );
        self.manifest.files = files;
        Ok(())
    }

    pub fn manifest_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.manifest)?)
    }

    /// SHA-256 of the serialized manifest, which in turn pins every data file.
    pub fn manifest_hash(&self) -> Result<String> {
        Ok(sha256_hex(self.manifest_json()?.as_bytes()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for name in MATRIX_FILES {
            let m = self.matrix(name).expect("known matrix");
            write_f64(&dir.join(&self.manifest.files[name].path), m.data())?;
        }
        let flags = dir.join(FLAGS_FILE);
        fs::write(&flags, self.flags_json()?).map_err(|e| Error::io(&flags, e))?;
        let manifest = dir.join(MANIFEST_FILE);
        fs::write(&manifest, self.manifest_json()?).map_err(|e| Error::io(&manifest, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest = Manifest::from_json(&text)?;
        let read_matrix = |name: &str| -> Result<RowMatrix> {
            let entry = &manifest.files[name];
            let path = dir.join(&entry.path);
            let data = read_f64(&path)?;
            if data.len() != entry.rows * entry.cols {
                return Err(Error::Format(format!(
                    "{} holds {} values, expected {}x{}",
                    path.display(),
                    data.len(),
                    entry.rows,
                    entry.cols
                )));
            }
            let m = RowMatrix::from_data(entry.cols, data)?;
            if sha256_hex(&matrix_bytes(&m)) != entry.sha256 {
                return Err(Error::Format(format!(
                    "checksum mismatch in {}",
                    path.display()
                )));
            }
            Ok(m)
        };
        let inputs = read_matrix("inputs")?;
        let outputs_h = read_matrix("outputs_h")?;
        let outputs_c = read_matrix("outputs_c")?;
        let params = read_matrix("params")?;
        let flags_path = dir.join(&manifest.files["flags"].path);
        let flags_text = fs::read_to_string(&flags_path).map_err(|e| Error::io(&flags_path, e))?;
        if sha256_hex(flags_text.as_bytes()) != manifest.files["flags"].sha256 {
            return Err(Error::Format(format!(
                "checksum mismatch in {}",
                flags_path.display()
            )));
        }
        let flags: Vec<RowFlag> = serde_json::from_str(&flags_text)?;
        if flags.len() != manifest.rows {
            return Err(Error::Format("flag count differs from row count".into()));
        }
        Ok(Self {
            manifest,
            inputs,
            outputs_h,
            outputs_c,
            params,
            flags,
        })
    }

    /// Writes each matrix as CSV plus a per-row provenance table.
    pub fn export_csv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |file: &str, text: String| -> Result<()> {
            let path = dir.join(file);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))
        };
        for name in MATRIX_FILES {
            let m = self.matrix(name).expect("known matrix");
            let mut text = String::new();
            if name == "params" {
                text.push_str(&self.manifest.param_columns.join(","));
            } else {
                let header: Vec<String> = (0..m.cols()).map(|k| format!("t{k}")).collect();
                text.push_str(&header.join(","));
            }
            text.push('\n');
            for row in m.iter_rows() {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                text.push_str(&cells.join(","));
                text.push('\n');
            }
            write(&format!("{name}.csv"), text)?;
        }
        let mut split = vec!["test"; self.rows()];
        self.manifest.train.iter().for_each(|&r| split[r] = "train");
        let mut text = String::from("row,source,halton_index,kind,copy,clean_row,split\n");
        for (r, f) in self.flags.iter().enumerate() {
            let kind = match f.kind {
                RowKind::Clean => "clean",
                RowKind::Noisy => "noisy",
            };
            let _ = writeln!(
                text,
                "{r},{},{},{kind},{},{},{}",
                f.source, f.halton_index, f.copy, f.clean_row, split[r]
            );
        }
        write("rows.csv", text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> Dataset {
        let mut cfg = BuildConfig::new(ModelKind::Ode, 20, seed);
        cfg.halton_start = Some(1);
        build_dataset(&cfg).unwrap()
    }

    #[test]
    fn three_rows_per_source_and_aligned() {
        let ds = small(3);
        assert_eq!(ds.manifest.sources, 20);
        assert_eq!(ds.rows(), 60);
        for m in [&ds.inputs, &ds.outputs_h, &ds.outputs_c, &ds.params] {
            assert_eq!(m.rows(), 60);
        }
        for (r, f) in ds.flags.iter().enumerate() {
            assert_eq!(f.clean_row, 3 * f.source);
            assert_eq!(f.copy, r % 3);
            assert_eq!(ds.outputs_h.row(r), ds.outputs_h.row(f.clean_row));
            assert_eq!(ds.outputs_c.row(r), ds.outputs_c.row(f.clean_row));
            assert_eq!(ds.params.row(r), ds.params.row(f.clean_row));
            if f.kind == RowKind::Clean {
                assert_eq!(
                    super::super::accept(ds.outputs_h.row(r), ds.inputs.row(r)),
                    Ok(())
                );
            } else {
                assert_ne!(ds.inputs.row(r), ds.inputs.row(f.clean_row));
            }
        }
    }

    #[test]
    fn split_sizes() {
        let ds = small(3);
        assert_eq!(ds.manifest.train.len(), 45);
        assert_eq!(ds.manifest.test.len(), 15);
        let flags: Vec<RowFlag> = (0..7 * 3)
            .map(|r| RowFlag {
                source: r / 3,
                halton_index: r as u64,
                kind: RowKind::Clean,
                copy: r % 3,
                clean_row: r / 3 * 3,
            })
            .collect();
        let (train, test) = split_rows(&flags, 1, false);
        assert_eq!((train.len(), test.len()), (16, 5));
        let (train, test) = split_rows(&flags, 1, true);
        assert_eq!((train.len(), test.len()), (18, 3));
        let train_sources: Vec<usize> = train.iter().map(|&r| flags[r].source).collect();
        assert!(test
            .iter()
            .all(|r| !train_sources.contains(&flags[*r].source)));
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let a = small(11);
        let mut cfg = BuildConfig::new(ModelKind::Ode, 20, 11);
        cfg.halton_start = Some(1);
        cfg.jobs = Some(3);
        let b = build_dataset(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.manifest_hash().unwrap(), b.manifest_hash().unwrap());
        let c = small(12);
        assert_ne!(a.manifest_hash().unwrap(), c.manifest_hash().unwrap());
    }

    #[test]
    fn save_load_round_trip() {
        let ds = small(5);
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(ds, back);
        ds.export_csv(&dir.path().join("csv")).unwrap();
        let rows = fs::read_to_string(dir.path().join("csv/rows.csv")).unwrap();
        assert_eq!(rows.lines().count(), 61);
        let params = fs::read_to_string(dir.path().join("csv/params.csv")).unwrap();
        assert!(params.starts_with("h0_um,"));
    }

    #[test]
    fn corrupted_file_detected() {
        let ds = small(5);
        let dir = tempfile::tempdir().unwrap();
        ds.save(dir.path()).unwrap();
        let path = dir.path().join("outputs_h.f64");
        let mut bytes = fs::read(&path).unwrap();
        bytes[10] ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(Dataset::load(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn manifest_rejects_bad_split() {
        let ds = small(5);
        let mut m = ds.manifest.clone();
        m.test.push(m.train[0]);
        assert!(m.validate().is_err());
        let mut m = ds.manifest.clone();
        m.files.get_mut("inputs").unwrap().path = "../x".into();
        assert!(m.validate().is_err());
    }

    #[test]
    fn trial_limit_aborts() {
        let mut cfg = BuildConfig::new(ModelKind::Ode, 100_000, 1);
        cfg.max_trials = Some(50);
        assert!(matches!(
            build_dataset(&cfg),
            Err(Error::SamplingAborted(_))
        ));
    }
}
