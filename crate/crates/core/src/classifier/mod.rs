//! Post-training representative extraction, inference and the one-vs-all
//! multi-class wrapper.

mod model_io;

pub use model_io::{
    decode_model, encode_model, load_model, save_model, write_atomic, ModelBody, ModelFile,
    ModelMetadata, MODEL_FORMAT_VERSION, MODEL_MAGIC,
};

use crate::data::{self, Dataset, Split};
use crate::episodic::{train_problem, two_way_softmax, BinaryProblem, TrainConfig};
use crate::error::{Error, Result};
use crate::linalg::{dot_unchecked, Matrix, Rng, Vector};
use crate::metrics::{ClassMetrics, MetricsReport, Role};
use crate::setconv::{setconv_forward, Anchor, SetConvParams};

/// Stream id used to derive the post-training sampler seed from a run seed.
const POST_TRAIN_STREAM: u64 = 0x5053_5430;

/// Seed of the sampler that draws `S_post` for a model trained with `seed`.
pub fn post_train_seed(seed: u64) -> u64 {
    Rng::derive_seed(seed, POST_TRAIN_STREAM)
}

/// A trained SetConv layer together with the role labels it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: SetConvParams,
    pub anchor: Anchor,
    pub majority_label: usize,
    pub minority_label: usize,
    pub seed: u64,
}

impl TrainedModel {
    pub fn input_dim(&self) -> usize {
        self.params.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.params.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.anchor.dim() != self.input_dim() {
            return Err(Error::ShapeInconsistency(format!(
                "anchor has dimension {}, layer expects {}",
                self.anchor.dim(),
                self.input_dim()
            )));
        }
        if self.majority_label == self.minority_label {
            return Err(Error::ShapeInconsistency(
                "majority and minority labels coincide".into(),
            ));
        }
        Ok(())
    }

    /// Embeds a single sample as a one-element set.
    pub fn embed(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("embed", self.input_dim(), x.len()));
        }
        let single = Matrix::from_vec(1, x.len(), x.to_vec())?;
        setconv_forward(&single, &self.params, &self.anchor)
    }
}

/// One representative per class role, each of dimension `d_o`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassRepresentatives {
    pub majority: Vector,
    pub minority: Vector,
}

/// A trained model with the representatives extracted from it.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryClassifier {
    pub model: TrainedModel,
    pub reps: ClassRepresentatives,
}

impl BinaryClassifier {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let d_out = self.model.output_dim();
        for rep in [&self.reps.majority, &self.reps.minority] {
            if rep.dim() != d_out {
                return Err(Error::ShapeInconsistency(format!(
                    "representative has dimension {}, layer outputs {d_out}",
                    rep.dim()
                )));
            }
        }
        Ok(())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<(f64, f64)> {
        predict_proba_binary(x, &self.model, &self.reps)
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        predict_binary(x, &self.model, &self.reps)
    }

    /// Probability of the class with label id `label`.
    pub fn proba_of(&self, x: &[f64], label: usize) -> Result<f64> {
        let (p_maj, p_min) = self.predict_proba(x)?;
        if label == self.model.minority_label {
            Ok(p_min)
        } else if label == self.model.majority_label {
            Ok(p_maj)
        } else {
            Err(Error::InvalidConfig(format!("label {label} unknown to this model")))
        }
    }
}

/// Per-role sample counts for the post-training subset.
///
/// With `s_post >= n_maj + n_min` everything is used; otherwise each role
/// gets `round(s_post · n_role / n)` rows, at least one and at most all.
pub fn post_train_quotas(s_post: usize, n_maj: usize, n_min: usize) -> (usize, usize) {
    let n = n_maj + n_min;
    if s_post >= n {
        return (n_maj, n_min);
    }
    let quota = |n_role: usize| {
        ((s_post as f64 * n_role as f64 / n as f64).round() as usize).clamp(1, n_role)
    };
    (quota(n_maj), quota(n_min))
}

/// Extracts class representatives by feeding a class-proportional sample
/// of the training rows through the frozen layer. The model is not touched.
pub fn post_train(
    model: &TrainedModel,
    train_data: &BinaryProblem,
    s_post: usize,
    rng: &mut Rng,
) -> Result<ClassRepresentatives> {
    if s_post == 0 {
        return Err(Error::InvalidConfig("post-training subset size must be positive".into()));
    }
    if train_data.majority_label != model.majority_label
        || train_data.minority_label != model.minority_label
    {
        return Err(Error::InvalidConfig(
            "post-training data roles do not match the model".into(),
        ));
    }
    let (n_maj, n_min) = (train_data.majority.rows(), train_data.minority.rows());
    if n_maj == 0 || n_min == 0 {
        return Err(Error::EmptyInput("post_train"));
    }
    let (q_maj, q_min) = post_train_quotas(s_post, n_maj, n_min);
    let mut represent = |rows: &Matrix, quota: usize| {
        let picked = if quota == rows.rows() {
            rows.clone()
        } else {
            rows.select_rows(&rng.sample_indices(rows.rows(), quota))
        };
        setconv_forward(&picked, &model.params, &model.anchor)
    };
    let majority = represent(&train_data.majority, q_maj)?;
    let minority = represent(&train_data.minority, q_min)?;
    Ok(ClassRepresentatives { majority, minority })
}

/// `(P(majority | x), P(minority | x))`: softmax over the dot products of
/// the embedded sample with each representative.
pub fn predict_proba_binary(
    x: &[f64],
    model: &TrainedModel,
    reps: &ClassRepresentatives,
) -> Result<(f64, f64)> {
    let e = model.embed(x)?;
    if reps.majority.dim() != e.dim() || reps.minority.dim() != e.dim() {
        return Err(Error::dim("predict_proba_binary", e.dim(), reps.majority.dim()));
    }
    Ok(two_way_softmax(
        dot_unchecked(&e, &reps.majority),
        dot_unchecked(&e, &reps.minority),
    ))
}

/// Most probable label; an exact tie goes to the minority class.
pub fn predict_binary(x: &[f64], model: &TrainedModel, reps: &ClassRepresentatives) -> Result<usize> {
    let (p_maj, p_min) = predict_proba_binary(x, model, reps)?;
    Ok(if p_min >= p_maj {
        model.minority_label
    } else {
        model.majority_label
    })
}

/// Trains on a two-class dataset and post-trains on the same rows.
pub fn train_binary(dataset: &Dataset, config: &TrainConfig, s_post: usize) -> Result<(BinaryClassifier, Vec<crate::episodic::LossRecord>)> {
    let problem = BinaryProblem::from_dataset(dataset)?;
    fit_problem(&problem, config, s_post)
}

fn fit_problem(
    problem: &BinaryProblem,
    config: &TrainConfig,
    s_post: usize,
) -> Result<(BinaryClassifier, Vec<crate::episodic::LossRecord>)> {
    let out = train_problem(problem, config)?;
    let model = TrainedModel {
        params: out.params,
        anchor: out.anchor,
        majority_label: out.majority_label,
        minority_label: out.minority_label,
        seed: config.seed,
    };
    let mut rng = Rng::seed_from(post_train_seed(config.seed));
    let reps = post_train(&model, problem, s_post, &mut rng)?;
    Ok((BinaryClassifier { model, reps }, out.log))
}

/// One binary head per class. Inside head `c`, label 1 is class `c` and
/// label 0 is every other class.
#[derive(Debug, Clone, PartialEq)]
pub struct OneVsAllModel {
    pub heads: Vec<BinaryClassifier>,
}

/// Label id of the positive side inside a one-vs-all head.
pub const POSITIVE_LABEL: usize = 1;

impl OneVsAllModel {
    pub fn n_classes(&self) -> usize {
        self.heads.len()
    }

    pub fn input_dim(&self) -> usize {
        self.heads.first().map_or(0, |h| h.model.input_dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads.len() < 2 {
            return Err(Error::ShapeInconsistency(format!(
                "one-vs-all model needs at least 2 heads, found {}",
                self.heads.len()
            )));
        }
        let d = self.input_dim();
        for (c, head) in self.heads.iter().enumerate() {
            head.validate()?;
            if head.model.input_dim() != d {
                return Err(Error::ShapeInconsistency(format!(
                    "head {c} expects dimension {}, head 0 expects {d}",
                    head.model.input_dim()
                )));
            }
            let labels = [head.model.majority_label, head.model.minority_label];
            if !labels.contains(&POSITIVE_LABEL) || !labels.contains(&0) {
                return Err(Error::ShapeInconsistency(format!(
                    "head {c} carries labels {labels:?}, expected {{0, 1}}"
                )));
            }
        }
        Ok(())
    }

    /// `P(y = c | x)` for every head. Heads are independent, so the scores
    /// need not sum to one.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.heads
            .iter()
            .map(|h| h.proba_of(x, POSITIVE_LABEL))
            .collect()
    }
}

/// Seed of head `class` for a run seeded with `seed`.
pub fn head_seed(seed: u64, class: usize) -> u64 {
    Rng::derive_seed(seed, class as u64)
}

/// Trains one independent binary head per class. The anchor of each head
/// comes from the smaller of `{y = c}` and `{y ≠ c}`. Heads train on
/// separate threads; the result does not depend on scheduling.
pub fn train_one_vs_all(
    dataset: &Dataset,
    config: &TrainConfig,
    s_post: usize,
) -> Result<(OneVsAllModel, Vec<Vec<crate::episodic::LossRecord>>)> {
    let n_classes = dataset.n_classes();
    if n_classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "one-vs-all needs at least 2 classes, found {n_classes}"
        )));
    }
    for (c, &count) in dataset.class_counts().iter().enumerate() {
        if count < 2 {
            return Err(Error::InsufficientData {
                class: c,
                count,
                required: 2,
            });
        }
    }
    let problems = (0..n_classes)
        .map(|c| BinaryProblem::one_vs_rest(dataset, c))
        .collect::<Result<Vec<_>>>()?;

    let results: Vec<Result<_>> = std::thread::scope(|scope| {
        let handles: Vec<_> = problems
            .iter()
            .enumerate()
            .map(|(c, problem)| {
                let head_config = TrainConfig {
                    seed: head_seed(config.seed, c),
                    ..config.clone()
                };
                scope.spawn(move || fit_problem(problem, &head_config, s_post))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    });

    let mut heads = Vec::with_capacity(n_classes);
    let mut logs = Vec::with_capacity(n_classes);
    for r in results {
        let (head, log) = r?;
        heads.push(head);
        logs.push(log);
    }
    Ok((OneVsAllModel { heads }, logs))
}

/// Argmax over the per-head scores, ties to the lowest class index.
pub fn predict_multiclass(x: &[f64], model: &OneVsAllModel) -> Result<(usize, Vec<f64>)> {
    let scores = model.scores(x)?;
    Ok((argmax_first(&scores), scores))
}

/// Binary SetConv or one binary head per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Binary,
    Multiclass,
}

/// Share of each class that goes to training in [`fit_with_split`].
pub const TRAIN_RATIO: f64 = 0.7;

/// Stream id used to derive the split seed from a run seed.
const SPLIT_STREAM: u64 = 0x5350_4c54;

/// Seed of the stratified train/test split for a run seeded with `seed`.
pub fn split_seed(seed: u64) -> u64 {
    Rng::derive_seed(seed, SPLIT_STREAM)
}

/// Everything produced by a training run.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: ModelFile,
    /// One loss log per trained layer (a single one in binary mode).
    pub logs: Vec<Vec<crate::episodic::LossRecord>>,
    pub split: Split,
}

/// Splits `dataset` with [`TRAIN_RATIO`], trains on the training side and
/// post-trains on it. The held-out indices are recorded in the metadata.
pub fn fit_with_split(
    dataset: &Dataset,
    config: &TrainConfig,
    mode: Mode,
    s_post: usize,
) -> Result<FitOutput> {
    config.validate()?;
    let split = data::split(dataset, TRAIN_RATIO, &mut Rng::seed_from(split_seed(config.seed)))?;
    let (body, logs) = match mode {
        Mode::Binary => {
            if dataset.n_classes() != 2 {
                return Err(Error::InvalidConfig(format!(
                    "binary mode needs exactly 2 classes, found {}",
                    dataset.n_classes()
                )));
            }
            let (clf, log) = train_binary(&split.train, config, s_post)?;
            (ModelBody::Binary(clf), vec![log])
        }
        Mode::Multiclass => {
            let (ova, logs) = train_one_vs_all(&split.train, config, s_post)?;
            (ModelBody::OneVsAll(ova), logs)
        }
    };
    let model = ModelFile {
        metadata: ModelMetadata {
            seed: config.seed,
            n_classes: dataset.n_classes(),
            s_post,
            data_rows: dataset.n_samples(),
            test_indices: split.test_indices.clone(),
        },
        body,
    };
    Ok(FitOutput { model, logs, split })
}

/// Redraws the representatives of a binary classifier from `s_post` rows of
/// `train`, as if it had been post-trained with that subset size.
pub fn repost_train(clf: &BinaryClassifier, train: &Dataset, s_post: usize) -> Result<BinaryClassifier> {
    let problem = BinaryProblem::from_dataset(train)?;
    let mut rng = Rng::seed_from(post_train_seed(clf.model.seed));
    let reps = post_train(&clf.model, &problem, s_post, &mut rng)?;
    Ok(BinaryClassifier {
        model: clf.model.clone(),
        reps,
    })
}

impl ModelBody {
    pub fn input_dim(&self) -> usize {
        match self {
            ModelBody::Binary(b) => b.model.input_dim(),
            ModelBody::OneVsAll(m) => m.input_dim(),
        }
    }

    /// Number of score columns produced by [`ModelBody::predict`].
    pub fn n_scores(&self) -> usize {
        match self {
            ModelBody::Binary(b) => b.model.majority_label.max(b.model.minority_label) + 1,
            ModelBody::OneVsAll(m) => m.n_classes(),
        }
    }

    /// Classes the model can predict, with the role each played in training.
    /// A one-vs-all class is a minority when it was the smaller side of its
    /// own head.
    pub fn class_roles(&self) -> Vec<(usize, Role)> {
        match self {
            ModelBody::Binary(b) => {
                let mut roles = vec![
                    (b.model.majority_label, Role::Majority),
                    (b.model.minority_label, Role::Minority),
                ];
                roles.sort_by_key(|&(c, _)| c);
                roles
            }
            ModelBody::OneVsAll(m) => m
                .heads
                .iter()
                .enumerate()
                .map(|(c, h)| {
                    let role = if h.model.minority_label == POSITIVE_LABEL {
                        Role::Minority
                    } else {
                        Role::Majority
                    };
                    (c, role)
                })
                .collect(),
        }
    }

    /// Predicted label and one score per label id (`n_scores` entries).
    /// Binary scores are the two class probabilities; labels the model does
    /// not know score 0.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        match self {
            ModelBody::Binary(b) => {
                let (p_maj, p_min) = b.predict_proba(x)?;
                let mut scores = vec![0.0; self.n_scores()];
                scores[b.model.majority_label] = p_maj;
                scores[b.model.minority_label] = p_min;
                let label = if p_min >= p_maj {
                    b.model.minority_label
                } else {
                    b.model.majority_label
                };
                Ok((label, scores))
            }
            ModelBody::OneVsAll(m) => predict_multiclass(x, m),
        }
    }

    /// Predicts every row of `features`.
    pub fn predict_batch(&self, features: &Matrix) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
        if features.cols() != self.input_dim() {
            return Err(Error::dim("predict_batch", self.input_dim(), features.cols()));
        }
        let rows = features
            .row_iter()
            .map(|row| self.predict(row))
            .collect::<Result<Vec<_>>>()?;
        Ok(rows.into_iter().unzip())
    }

    /// Per-class metrics on a labelled dataset.
    pub fn evaluate(&self, dataset: &Dataset) -> Result<MetricsReport> {
        let (preds, scores) = self.predict_batch(dataset.features())?;
        let labels = dataset.labels();
        let rows = self
            .class_roles()
            .into_iter()
            .map(|(c, role)| {
                let class_scores: Vec<f64> = scores.iter().map(|s| s[c]).collect();
                ClassMetrics::compute(c, role, labels, &preds, &class_scores)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsReport { rows })
    }
}

pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
