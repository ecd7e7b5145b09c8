//! Operator learners mapping intensity series to thickness or osmolarity
//! series: a Fourier-feature network on the raw series and two networks
//! acting on PCA coefficients.

pub mod checkpoint;
pub mod features;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, DenseNet, LossSpec};
use crate::pca::Pca;
use crate::rng::{substream, INIT, SHUFFLE};
use crate::sampling::{Dataset, ModelKind, RowMatrix, Split};

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use features::{fourier_features, FREQUENCY_SCALES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Ffn,
    Pca,
    Pcax,
}

impl LearnerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Ffn => "ffn",
            LearnerKind::Pca => "pca",
            LearnerKind::Pcax => "pcax",
        }
    }

    pub fn uses_ext(&self) -> bool {
        *self == LearnerKind::Pcax
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ffn" => Ok(LearnerKind::Ffn),
            "pca" | "dense-pca" => Ok(LearnerKind::Pca),
            "pcax" | "dense-pcax" => Ok(LearnerKind::Pcax),
            other => Err(Error::Config(format!("unknown learner kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    H,
    C,
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" => Ok(Target::H),
            "c" => Ok(Target::C),
            other => Err(Error::Config(format!("unknown target {other:?}"))),
        }
    }
}

impl Target {
    pub fn outputs<'a>(&self, ds: &'a Dataset) -> &'a RowMatrix {
        match self {
            Target::H => &ds.outputs_h,
            Target::C => &ds.outputs_c,
        }
    }
}

pub const FFN_HIDDEN: [usize; 3] = [300, 200, 200];
pub const PCA_HIDDEN: [usize; 3] = [300, 300, 300];
pub const INPUT_COMPONENTS: usize = 4;
pub const EXT_DIM: usize = 3;

/// Output PCA size by data model and target.
pub fn default_output_components(model: ModelKind, target: Target) -> usize {
    match (model, target) {
        (ModelKind::Ode, _) => 4,
        (ModelKind::Pde, Target::C) => 13,
        (ModelKind::Pde, Target::H) => 8,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Smoothness weight of the FFN loss.
    pub alpha: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub k_in: usize,
    /// Output PCA size; the per-model default when absent.
    pub k_out: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            lr: 1e-3,
            alpha: 1.6,
            batch_size: 256,
            seed: 0,
            k_in: INPUT_COMPONENTS,
            k_out: None,
        }
    }
}

/// Per-column affine standardization of the external parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &RowMatrix) -> Self {
        let (m, d) = (rows.rows().max(1) as f64, rows.cols());
        let mut mean = vec![0.0; d];
        for r in rows.iter_rows() {
            mean.iter_mut().zip(r).for_each(|(a, v)| *a += v / m);
        }
        let mut std = vec![0.0; d];
        for r in rows.iter_rows() {
            std.iter_mut()
                .zip(r)
                .zip(&mean)
                .for_each(|((s, v), mu)| *s += (v - mu).powi(2) / m);
        }
        // constant columns pass through centered
        let std = std
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelInfo {
    pub kind: LearnerKind,
    pub target: Target,
    /// Series length.
    pub n: usize,
    pub dataset_model: ModelKind,
    pub train: TrainConfig,
    pub data_manifest_hash: String,
}

/// A trained (or freshly initialized) learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub info: ModelInfo,
    pub net: DenseNet,
    pub input_pca: Option<Pca>,
    pub output_pca: Option<Pca>,
    pub ext: Option<Standardizer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

impl Learner {
    pub fn kind(&self) -> LearnerKind {
        self.info.kind
    }

    pub fn target(&self) -> Target {
        self.info.target
    }

    /// Network input for one series, before batching.
    fn encode(&self, intensity: &[f64], ext: Option<&[f64]>) -> Result<Vec<f64>> {
        if intensity.len() != self.info.n {
            return Err(Error::dims(
                self.info.n,
                intensity.len(),
                "intensity series",
            ));
        }
        match (self.info.kind.uses_ext(), ext) {
            (true, None) => {
                return Err(Error::InvalidParameter(
                    "this model needs external parameters (h0, f0, ts)".into(),
                ))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidParameter(
                    "this model takes no external parameters".into(),
                ))
            }
            (true, Some(e)) if e.len() != EXT_DIM => {
                return Err(Error::dims(EXT_DIM, e.len(), "external parameters"))
            }
            _ => {}
        }
        match self.info.kind {
            LearnerKind::Ffn => Ok(fourier_features(intensity)),
            LearnerKind::Pca | LearnerKind::Pcax => {
                let pca = self
                    .input_pca
                    .as_ref()
                    .ok_or_else(|| Error::Config("missing input PCA".into()))?;
                let mut x = pca.compress(intensity)?;
                if let (Some(e), Some(s)) = (ext, &self.ext) {
                    x.extend(s.apply(e));
                }
                Ok(x)
            }
        }
    }

    fn decode(&self, z: &DMatrix<f64>) -> Result<RowMatrix> {
        let rows = RowMatrix::from_data(z.nrows(), z.as_slice().to_vec())?;
        match &self.output_pca {
            Some(pca) => pca.reconstruct_rows(&rows),
            None => Ok(rows),
        }
    }

    /// Predicted output series for one intensity series.
    pub fn predict(&self, intensity: &[f64], ext: Option<&[f64]>) -> Result<Vec<f64>> {
        let x = self.encode(intensity, ext)?;
        let z = self
            .net
            .forward_batch(&DMatrix::from_column_slice(x.len(), 1, &x))?;
        Ok(self.decode(&z)?.row(0).to_vec())
    }

    /// Predictions for every row of `inputs`; `ext` rows supply the external
    /// parameters (first three columns) when the model needs them.
    pub fn predict_rows(&self, inputs: &RowMatrix, ext: Option<&RowMatrix>) -> Result<RowMatrix> {
        let m = inputs.rows();
        let mut cols = Vec::with_capacity(m);
        for i in 0..m {
            let e = ext.map(|p| &p.row(i)[..EXT_DIM]);
            cols.push(self.encode(
                inputs.row(i),
                if self.info.kind.uses_ext() { e } else { None },
            )?);
        }
        let d = self.net.input_dim();
        let mut x = DMatrix::zeros(d, m);
        for (j, c) in cols.iter().enumerate() {
            x.column_mut(j).copy_from_slice(c);
        }
        self.decode(&self.net.forward_batch(&x)?)
    }

    /// Logs a warning when the checkpoint was trained on other data.
    pub fn check_provenance(&self, manifest_hash: &str) -> bool {
        let same = self.info.data_manifest_hash == manifest_hash;
        if !same {
            log::warn!(
                "checkpoint was trained on dataset {} but evaluated on {}",
                self.info.data_manifest_hash,
                manifest_hash
            );
        }
        same
    }
}

fn gather(all: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(all.nrows(), idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.column_mut(j).copy_from(&all.column(i));
    }
    out
}

fn columns(m: &RowMatrix, rows: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.cols(), rows.len());
    for (j, &r) in rows.iter().enumerate() {
        out.column_mut(j).copy_from_slice(m.row(r));
    }
    out
}

/// Everything the epoch loop needs, with samples as columns.
struct Prepared {
    learner: Learner,
    loss: LossSpec,
    /// Network inputs (Dense-PCA) or raw intensity series (FFN).
    x_train: DMatrix<f64>,
    y_train: DMatrix<f64>,
    x_test: DMatrix<f64>,
    y_test: DMatrix<f64>,
    /// Part of the reconstructed-space error that lies outside the output
    /// basis, per training and test sample.
    residual_train: Vec<f64>,
    residual_test: Vec<f64>,
}

fn prepare(kind: LearnerKind, target: Target, ds: &Dataset, cfg: &TrainConfig) -> Result<Prepared> {
    let train_rows = ds.split_indices(Split::Train);
    let test_rows = ds.split_indices(Split::Test);
    if train_rows.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) || cfg.alpha < 0.0 {
        return Err(Error::Config(format!(
            "invalid training configuration {cfg:?}"
        )));
    }
    let n = ds.manifest.n;
    let outputs = target.outputs(ds);
    let info = ModelInfo {
        kind,
        target,
        n,
        dataset_model: ds.model(),
        train: cfg.clone(),
        data_manifest_hash: ds.manifest_hash()?,
    };
    let mut init = substream(cfg.seed, INIT, 0);
    let y_all_train = outputs.select(train_rows);
    let y_all_test = outputs.select(test_rows);

    match kind {
        LearnerKind::Ffn => {
            let mut dims = vec![features::FREQUENCY_SCALES.len() * 2 * n];
            dims.extend(FFN_HIDDEN);
            dims.push(n);
            let net = DenseNet::he_uniform(&dims, &mut init)?;
            Ok(Prepared {
                learner: Learner {
                    info,
                    net,
                    input_pca: None,
                    output_pca: None,
                    ext: None,
                },
                loss: LossSpec::smoothed(n, cfg.alpha),
                x_train: columns(&ds.inputs, train_rows),
                y_train: columns(&y_all_train, &(0..train_rows.len()).collect::<Vec<_>>()),
                x_test: columns(&ds.inputs, test_rows),
                y_test: columns(&y_all_test, &(0..test_rows.len()).collect::<Vec<_>>()),
                residual_train: vec![0.0; train_rows.len()],
                residual_test: vec![0.0; test_rows.len()],
            })
        }
        LearnerKind::Pca | LearnerKind::Pcax => {
            let k_out = cfg
                .k_out
                .unwrap_or_else(|| default_output_components(ds.model(), target));
            let x_raw = ds.inputs.select(train_rows);
            let input_pca = Pca::fit(&x_raw, cfg.k_in)?;
            let output_pca = Pca::fit(&y_all_train, k_out)?;
            let ext = (kind == LearnerKind::Pcax).then(|| {
                let p = ds.params.select(train_rows);
                let cols: Vec<Vec<f64>> = p.iter_rows().map(|r| r[..EXT_DIM].to_vec()).collect();
                Standardizer::fit(&RowMatrix::from_rows(EXT_DIM, &cols).expect("fixed width"))
            });
            let encode = |rows: &[usize]| -> Result<DMatrix<f64>> {
                let z = input_pca.compress_rows(&ds.inputs.select(rows))?;
                let width = z.cols() + if ext.is_some() { EXT_DIM } else { 0 };
                let mut out = DMatrix::zeros(width, rows.len());
                for (j, &r) in rows.iter().enumerate() {
                    let mut col = z.row(j).to_vec();
                    if let Some(s) = &ext {
                        col.extend(s.apply(&ds.params.row(r)[..EXT_DIM]));
                    }
                    out.column_mut(j).copy_from_slice(&col);
                }
                Ok(out)
            };
            let targets = |y: &RowMatrix| -> Result<(DMatrix<f64>, Vec<f64>)> {
                let z = output_pca.compress_rows(y)?;
                let back = output_pca.reconstruct_rows(&z)?;
                let residual = back
                    .iter_rows()
                    .zip(y.iter_rows())
                    .map(|(a, b)| {
                        a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>() / n as f64
                    })
                    .collect();
                Ok((columns(&z, &(0..z.rows()).collect::<Vec<_>>()), residual))
            };
            let x_train = encode(train_rows)?;
            let x_test = encode(test_rows)?;
            let (y_train, residual_train) = targets(&y_all_train)?;
            let (y_test, residual_test) = targets(&y_all_test)?;
            let mut dims = vec![x_train.nrows()];
            dims.extend(PCA_HIDDEN);
            dims.push(k_out);
            let net = DenseNet::he_uniform(&dims, &mut init)?;
            Ok(Prepared {
                learner: Learner {
                    info,
                    net,
                    input_pca: Some(input_pca),
                    output_pca: Some(output_pca),
                    ext,
                },
                // reconstruction is an isometry on the basis span
                loss: LossSpec::mse(n),
                x_train,
                y_train,
                x_test,
                y_test,
                residual_train,
                residual_test,
            })
        }
    }
}

impl Prepared {
    fn batch_inputs(&self, x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
        let raw = gather(x, idx);
        if self.learner.info.kind != LearnerKind::Ffn {
            return raw;
        }
        let n = raw.nrows();
        let mut out = DMatrix::zeros(self.learner.net.input_dim(), idx.len());
        for j in 0..idx.len() {
            features::fourier_features_into(
                raw.column(j).as_slice(),
                out.column_mut(j).as_mut_slice(),
            );
        }
        debug_assert_eq!(out.nrows(), 6 * n);
        out
    }

    fn mean_loss(
        &self,
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
        residual: &[f64],
    ) -> Result<Option<f64>> {
        let m = x.ncols();
        if m == 0 {
            return Ok(None);
        }
        let mut total = 0.0;
        let chunk = 1024;
        let idx: Vec<usize> = (0..m).collect();
        for part in idx.chunks(chunk) {
            let pred = self
                .learner
                .net
                .forward_batch(&self.batch_inputs(x, part))?;
            for (j, &i) in part.iter().enumerate() {
                total += self
                    .loss
                    .value(pred.column(j).as_slice(), y.column(i).as_slice())?
                    + residual[i];
            }
        }
        Ok(Some(total / m as f64))
    }
}

/// Trains a learner on the dataset's training split, calling `on_epoch`
/// after every epoch. The loss reported for Dense-PCA models is the mean
/// squared error of the reconstructed series.
pub fn train(
    kind: LearnerKind,
    target: Target,
    ds: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Learner, Vec<EpochRecord>)> {
    let mut prep = prepare(kind, target, ds, cfg)?;
    let mut adam = AdamState::new(
        &prep.learner.net,
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let m = prep.x_train.ncols();
    let mut order: Vec<usize> = (0..m).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let mut rng = substream(cfg.seed, SHUFFLE, epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = prep.batch_inputs(&prep.x_train, batch);
            let y = gather(&prep.y_train, batch);
            let (loss, grads) = prep.learner.net.backward_batch(&x, &y, &prep.loss)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged {
                    epoch,
                    reason: format!("batch loss {loss} after {} optimizer steps", adam.step),
                });
            }
            let residual: f64 = batch.iter().map(|&i| prep.residual_train[i]).sum();
            total += loss * batch.len() as f64 + residual;
            adam.step(&mut prep.learner.net, &grads)?;
        }
        if !prep.learner.net.is_finite() {
            return Err(Error::TrainingDiverged {
                epoch,
                reason: "non-finite network parameters".into(),
            });
        }
        let record = EpochRecord {
            epoch,
            train_loss: total / m as f64,
            test_loss: prep.mean_loss(&prep.x_test, &prep.y_test, &prep.residual_test)?,
        };
        on_epoch(&record);
        history.push(record);
    }
    Ok((prep.learner, history))
}

/// Loss history as CSV with columns epoch, train_loss, test_loss.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,train_loss,test_loss\n");
    for r in history {
        let test = r.test_loss.map(|v| v.to_string()).unwrap_or_default();
        s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, test));
    }
    s
}

/// Untrained learner with the given architecture, for tests and tooling.
pub fn initialize(
    kind: LearnerKind,
    target: Target,
    ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<Learner> {
    Ok(prepare(kind, target, ds, cfg)?.learner)
}
