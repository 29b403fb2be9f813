//! The multi-stage learning pipeline: split, normalize, VAE augmentation,
//! polynomial features, architecture search, initial training and the
//! refinement stage, plus artifact persistence and inference.
//!
//! Every stage draws its randomness from a sub-seed of the master seed, so
//! running the stages one at a time (prepare, search, train) reproduces a
//! full run exactly.

mod artifact;
mod config;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use artifact::{load_artifact, save_artifact, write_atomic, PipelineArtifact, ARTIFACT_FORMAT_VERSION};
pub use config::{PipelineConfig, SplitConfig, MIN_ROWS, MIN_SEARCH_EPOCHS};

use crate::baselines::{fit_predict, BaselineKind, BaselineParams};
use crate::dataio::{
    apply_normalizer, compute_metrics, fit_normalizer, poly_augment_dataset, split, Dataset, MetricsReport, NormStats,
};
use crate::error::{Error, Result, Stage, StageExt};
use crate::gp::{minimize, BoConfig, Evaluation, SpaceEncoding, TraceRecord, SPACE_DIMS};
use crate::mlp::{rmse, train, ArchitectureSpec, Dense, MlpModel, TrainConfig, TrainHistory};
use crate::numerics::{derive_seed, Matrix, Rng};
use crate::vae::{augment_dataset, vae_train};

/// Sub-seed streams of the master seed.
mod stream {
    pub const SPLIT: u64 = 1;
    pub const VAE_TRAIN: u64 = 2;
    pub const VAE_SAMPLE: u64 = 3;
    pub const BO: u64 = 4;
    pub const CANDIDATE_INIT: u64 = 5;
    pub const CANDIDATE_TRAIN: u64 = 6;
    pub const STAGE1_INIT: u64 = 7;
    pub const STAGE1_TRAIN: u64 = 8;
    pub const STAGE2_TRAIN: u64 = 9;
}

pub const METRICS_FORMAT_VERSION: u32 = 1;

/// A trained stage-1 model. It can be read and evaluated but not modified.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenModel(MlpModel);

impl FrozenModel {
    pub fn new(model: MlpModel) -> Self {
        Self(model)
    }

    pub fn model(&self) -> &MlpModel {
        &self.0
    }

    pub fn into_inner(self) -> MlpModel {
        self.0
    }
}

/// Splits after normalization and feature expansion; `train` may contain
/// synthetic rows, `val` and `test` never do.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub norm_stats: NormStats,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    /// Raw-unit test rows, for reporting.
    pub test_raw: Dataset,
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub entries: Vec<(String, f64)>,
}

impl StageTimings {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f();
        self.entries.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineMetrics {
    pub format_version: u32,
    /// Stage-2 predictions on the real test rows, target units.
    pub test: MetricsReport,
    /// Stage-1 predictions on the same rows.
    pub stage1_test: MetricsReport,
    /// Validation RMSE (normalized units) of the two stages.
    pub stage1_val_rmse: f64,
    pub stage2_val_rmse: f64,
    pub spec: ArchitectureSpec,
    pub n_train_real: usize,
    pub n_train_synthetic: usize,
    pub n_val: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone)]
pub struct TrainedStages {
    pub artifact: PipelineArtifact,
    pub metrics: PipelineMetrics,
    pub stage1_history: TrainHistory,
    pub stage2_history: TrainHistory,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub artifact: PipelineArtifact,
    pub metrics: PipelineMetrics,
    pub trace: Vec<TraceRecord>,
    pub stage1_history: TrainHistory,
    pub stage2_history: TrainHistory,
    pub timings: StageTimings,
}

/// Split, normalize (train statistics), VAE-augment the training split and
/// expand all splits into polynomial features.
pub fn prepare(data: &Dataset, cfg: &PipelineConfig) -> Result<PreparedData> {
    prepare_timed(data, cfg, &mut StageTimings::default())
}

fn prepare_timed(data: &Dataset, cfg: &PipelineConfig, timings: &mut StageTimings) -> Result<PreparedData> {
    cfg.validate()?;
    if data.len() < MIN_ROWS {
        return Err(Error::EmptyDataset(format!(
            "pipeline needs at least {MIN_ROWS} rows, got {}",
            data.len()
        )));
    }
    let data = data.real_only();
    let (train_raw, val_raw, test_raw) = timings.time(Stage::Split, || split_data(&data, cfg))?;

    let (norm_stats, train, val, test) = timings.time(Stage::Normalize, || {
        let stats = fit_normalizer(&train_raw)?;
        Ok((
            stats.clone(),
            apply_normalizer(&train_raw, &stats, false)?,
            apply_normalizer(&val_raw, &stats, false)?,
            apply_normalizer(&test_raw, &stats, false)?,
        ))
    })
    .stage(Stage::Normalize)?;

    let train = timings.time(Stage::Vae, || {
        if cfg.multiplier == 0 {
            return Ok(train);
        }
        let vae_cfg = crate::vae::VaeTrainConfig {
            seed: derive_seed(cfg.seed, stream::VAE_TRAIN),
            ..cfg.vae
        };
        let (vae, _) = vae_train(&train, &vae_cfg)?;
        augment_dataset(&train, &vae, cfg.multiplier, &mut Rng::derived(cfg.seed, stream::VAE_SAMPLE))
    })
    .stage(Stage::Vae)?;

    let (train, val, test) = timings.time(Stage::FeatureAugment, || {
        Ok((
            poly_augment_dataset(&train, cfg.poly_order)?,
            poly_augment_dataset(&val, cfg.poly_order)?,
            poly_augment_dataset(&test, cfg.poly_order)?,
        ))
    })
    .stage(Stage::FeatureAugment)?;

    Ok(PreparedData {
        norm_stats,
        feature_names: data.feature_names().to_vec(),
        target_name: data.target_name().to_string(),
        train,
        val,
        test,
        test_raw,
    })
}

/// The seeded train/validation/test split of the real rows used by every
/// pipeline entry point.
pub fn split_data(data: &Dataset, cfg: &PipelineConfig) -> Result<(Dataset, Dataset, Dataset)> {
    split(&data.real_only(), cfg.split.train, cfg.split.val, &mut Rng::derived(cfg.seed, stream::SPLIT))
        .stage(Stage::Split)
}

/// VAE augmentation of a whole dataset in its own units: normalize with
/// the dataset's statistics, train the generator, append
/// `multiplier × n` synthetic rows and map everything back.
pub fn augment_raw(data: &Dataset, cfg: &PipelineConfig) -> Result<Dataset> {
    cfg.validate()?;
    if cfg.multiplier == 0 {
        return Err(Error::Config("multiplier must be >= 1 for augmentation".into()));
    }
    (|| {
        let data = data.real_only();
        let stats = fit_normalizer(&data)?;
        let z = apply_normalizer(&data, &stats, false)?;
        let vae_cfg = crate::vae::VaeTrainConfig {
            seed: derive_seed(cfg.seed, stream::VAE_TRAIN),
            ..cfg.vae
        };
        let (vae, _) = vae_train(&z, &vae_cfg)?;
        let aug = augment_dataset(&z, &vae, cfg.multiplier, &mut Rng::derived(cfg.seed, stream::VAE_SAMPLE))?;
        apply_normalizer(&aug, &stats, true)
    })()
    .stage(Stage::Vae)
}

/// Fits a classical baseline on the pipeline's training split (features and
/// target standardized with training statistics) and scores it on the test
/// split in target units.
pub fn baseline_on_split(
    data: &Dataset,
    cfg: &PipelineConfig,
    kind: BaselineKind,
    params: &BaselineParams,
) -> Result<MetricsReport> {
    cfg.validate()?;
    let (train_raw, _, test_raw) = split_data(data, cfg)?;
    let stats = fit_normalizer(&train_raw).stage(Stage::Normalize)?;
    let train_n = apply_normalizer(&train_raw, &stats, false).stage(Stage::Normalize)?;
    let test_n = apply_normalizer(&test_raw, &stats, false).stage(Stage::Normalize)?;
    let z = fit_predict(kind, params, train_n.features(), train_n.targets(), test_n.features())?;
    let yhat: Vec<f64> = z.iter().map(|&v| stats.denormalize_target(v)).collect();
    compute_metrics(test_raw.targets(), &yhat).stage(Stage::Evaluation)
}

/// Bayesian optimization over architectures. Each candidate is trained
/// for the reduced search budget and scored by validation RMSE.
pub fn search_stage(
    train_set: &Dataset,
    val: &Dataset,
    cfg: &PipelineConfig,
) -> Result<(ArchitectureSpec, Vec<TraceRecord>)> {
    search_inner(train_set, val, cfg).stage(Stage::Search)
}

fn search_inner(
    train_set: &Dataset,
    val: &Dataset,
    cfg: &PipelineConfig,
) -> Result<(ArchitectureSpec, Vec<TraceRecord>)> {
    if val.is_empty() {
        return Err(Error::EmptyDataset("validation set is empty".into()));
    }
    let bo_cfg = BoConfig {
        seed: derive_seed(cfg.seed, stream::BO),
        ..cfg.bo
    };
    let init_seed = derive_seed(cfg.seed, stream::CANDIDATE_INIT);
    let train_seed = derive_seed(cfg.seed, stream::CANDIDATE_TRAIN);
    let epochs = cfg.effective_search_epochs();
    let mut iter = 0u64;

    let bo = minimize(SPACE_DIMS, bo_cfg, |point| {
        iter += 1;
        let spec = SpaceEncoding::decode(point)?;
        let model = MlpModel::build(spec, train_set.n_features(), &mut Rng::derived(init_seed, iter))?;
        let tcfg = TrainConfig {
            epochs,
            seed: derive_seed(train_seed, iter),
            ..cfg.train
        };
        let value = match train(model, train_set, val, &tcfg) {
            Ok(out) => out.history.best_val_rmse,
            Err(Error::Diverged { .. }) => f64::NAN,
            Err(e) => return Err(e),
        };
        Ok(Evaluation {
            point: SpaceEncoding::encode(&spec).to_vec(),
            value,
            spec: Some(spec),
        })
    })?;

    let trace = bo.into_trace();
    let best = trace
        .iter()
        .filter_map(|r| Some((r.objective?, r.spec?)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, s)| s)
        .ok_or(Error::AllCandidatesDiverged)?;
    Ok((best, trace))
}

/// Full-budget training of a fresh model with the chosen architecture.
pub fn initial_training_stage(
    spec: &ArchitectureSpec,
    train_set: &Dataset,
    val: &Dataset,
    cfg: &PipelineConfig,
) -> Result<(FrozenModel, TrainHistory)> {
    (|| {
        let model = MlpModel::build(*spec, train_set.n_features(), &mut Rng::derived(cfg.seed, stream::STAGE1_INIT))?;
        let tcfg = TrainConfig {
            seed: derive_seed(cfg.seed, stream::STAGE1_TRAIN),
            ..cfg.train
        };
        let out = train(model, train_set, val, &tcfg)?;
        Ok((FrozenModel::new(out.model), out.history))
    })()
    .stage(Stage::InitialTraining)
}

/// Stage-2 initialization: stage-1 parameters verbatim plus a zero weight row
/// for the appended stage-1 prediction, so the untrained stage-2 model
/// reproduces stage 1 exactly.
pub fn warm_start(stage1: &FrozenModel) -> Result<MlpModel> {
    let m = stage1.model();
    let mut layers: Vec<Dense> = m.layers().to_vec();
    let first = &layers[0];
    let mut w = Matrix::zeros(first.n_in() + 1, first.n_out());
    for i in 0..first.n_in() {
        w.row_mut(i).copy_from_slice(first.w.row(i));
    }
    layers[0] = Dense { w, b: first.b.clone() };
    MlpModel::from_parts(*m.spec(), m.input_width() + 1, layers)
}

/// Appends the stage-1 prediction as an extra input column.
pub fn with_stage1_column(stage1: &FrozenModel, d: &Dataset) -> Result<Dataset> {
    let preds = stage1.model().forward_batch(d.features())?;
    let width = d.n_features() + 1;
    let mut data = Vec::with_capacity(d.len() * width);
    for (row, p) in d.features().iter_rows().zip(&preds) {
        data.extend_from_slice(row);
        data.push(*p);
    }
    let mut names = d.feature_names().to_vec();
    names.push("stage1_prediction".to_string());
    d.with_features(names, Matrix::from_vec(d.len(), width, data)?)
}

/// Trains the refinement model on `[x, f₁(x)]`; stage 1 is left untouched.
pub fn refinement_stage(
    stage1: &FrozenModel,
    train_set: &Dataset,
    val: &Dataset,
    cfg: &PipelineConfig,
) -> Result<(MlpModel, TrainHistory)> {
    (|| {
        let train2 = with_stage1_column(stage1, train_set)?;
        let val2 = with_stage1_column(stage1, val)?;
        let tcfg = TrainConfig {
            seed: derive_seed(cfg.seed, stream::STAGE2_TRAIN),
            ..cfg.train
        };
        let out = train(warm_start(stage1)?, &train2, &val2, &tcfg)?;
        Ok((out.model, out.history))
    })()
    .stage(Stage::Refinement)
}

/// Initial training, refinement and test evaluation for a given
/// architecture.
pub fn train_stages(prepared: &PreparedData, spec: &ArchitectureSpec, cfg: &PipelineConfig) -> Result<TrainedStages> {
    train_stages_timed(prepared, spec, cfg, &mut StageTimings::default())
}

fn train_stages_timed(
    prepared: &PreparedData,
    spec: &ArchitectureSpec,
    cfg: &PipelineConfig,
    timings: &mut StageTimings,
) -> Result<TrainedStages> {
    let p = prepared;
    let (stage1, h1) =
        timings.time(Stage::InitialTraining, || initial_training_stage(spec, &p.train, &p.val, cfg))?;
    let (stage2, h2) = timings.time(Stage::Refinement, || refinement_stage(&stage1, &p.train, &p.val, cfg))?;

    timings.time(Stage::Evaluation, || {
        let artifact = PipelineArtifact {
            format_version: ARTIFACT_FORMAT_VERSION,
            norm_stats: p.norm_stats.clone(),
            poly_order: cfg.poly_order,
            spec: *spec,
            stage1: stage1.model().clone(),
            stage2,
            feature_names: p.feature_names.clone(),
            target_name: p.target_name.clone(),
            bo_trace: None,
        };
        let val2 = with_stage1_column(&stage1, &p.val)?;
        let test_real = p.test_raw.real_only();
        let y = test_real.targets();
        let yhat2 = artifact.predict_batch(test_real.features())?;
        let yhat1 = test_real
            .features()
            .iter_rows()
            .map(|r| artifact.predict_stage1(r))
            .collect::<Result<Vec<_>>>()?;
        let metrics = PipelineMetrics {
            format_version: METRICS_FORMAT_VERSION,
            test: compute_metrics(y, &yhat2)?,
            stage1_test: compute_metrics(y, &yhat1)?,
            stage1_val_rmse: rmse(stage1.model(), &p.val)?,
            stage2_val_rmse: rmse(&artifact.stage2, &val2)?,
            spec: *spec,
            n_train_real: p.train.len() - p.train.n_synthetic(),
            n_train_synthetic: p.train.n_synthetic(),
            n_val: p.val.len(),
            n_test: test_real.len(),
        };
        Ok(TrainedStages {
            artifact,
            metrics,
            stage1_history: h1,
            stage2_history: h2,
        })
    })
    .stage(Stage::Evaluation)
}

/// Runs every stage end to end.
pub fn run_pipeline(data: &Dataset, cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let mut timings = StageTimings::default();
    let prepared = prepare_timed(data, cfg, &mut timings)?;
    let (spec, trace) = match cfg.architecture {
        Some(spec) => (spec, Vec::new()),
        None => timings.time(Stage::Search, || search_stage(&prepared.train, &prepared.val, cfg))?,
    };
    let trained = train_stages_timed(&prepared, &spec, cfg, &mut timings)?;
    Ok(PipelineOutcome {
        artifact: trained.artifact,
        metrics: trained.metrics,
        trace,
        stage1_history: trained.stage1_history,
        stage2_history: trained.stage2_history,
        timings,
    })
}
