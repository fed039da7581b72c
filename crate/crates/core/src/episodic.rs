//! Episodic training.
//!
//! Each iteration draws an episode whose support set keeps the training
//! imbalance ratio and whose query set holds one sample per class. The four
//! sets go through the SetConv layer, each query is classified against the
//! two support representatives with a softmax over dot products, and the
//! mean cross-entropy of the two queries drives an Adam update.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{dot_unchecked, Matrix, Rng, Vector};
use crate::setconv::{
    compute_anchor_capped, init_params, setconv_backward_into, setconv_forward, Anchor,
    SetConvGrads, SetConvParams,
};

/// Hyperparameters for episodic training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Episode support size `N1 + N2`.
    pub support_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Width `H` of the kernel network's hidden layer.
    pub hidden_width: usize,
    /// Output dimension `d_o` of the SetConv layer.
    pub d_out: usize,
    pub seed: u64,
    /// Average at most this many minority rows into the anchor.
    pub anchor_cap: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            support_size: 64,
            iterations: 2000,
            learning_rate: 0.01,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            hidden_width: 128,
            d_out: 128,
            seed: 0,
            anchor_cap: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        if self.support_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "support size must be at least 2, got {}",
                self.support_size
            )));
        }
        open_unit("learning rate", self.learning_rate)?;
        open_unit("adam beta1", self.adam_beta1)?;
        open_unit("adam beta2", self.adam_beta2)?;
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return Err(Error::InvalidConfig("adam epsilon must be positive".into()));
        }
        if self.hidden_width == 0 || self.d_out == 0 {
            return Err(Error::InvalidConfig(
                "hidden width and output dimension must be positive".into(),
            ));
        }
        if self.anchor_cap == Some(0) {
            return Err(Error::InvalidConfig("anchor cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Majority/minority support counts for an episode.
///
/// `N2 = clamp(round(S · n_min / (n_min + n_maj)), 1, S − 1)` and
/// `N1 = S − N2`.
pub fn split_support(support_size: usize, n_maj: usize, n_min: usize) -> Result<(usize, usize)> {
    if support_size < 2 {
        return Err(Error::InvalidConfig(format!(
            "support size must be at least 2, got {support_size}"
        )));
    }
    if n_maj == 0 || n_min == 0 {
        return Err(Error::InvalidConfig(
            "both classes need at least one sample".into(),
        ));
    }
    let share = support_size as f64 * n_min as f64 / (n_min + n_maj) as f64;
    let n2 = (share.round() as usize).clamp(1, support_size - 1);
    Ok((support_size - n2, n2))
}

/// A two-class problem seen through its majority/minority roles.
#[derive(Debug, Clone)]
pub struct BinaryProblem {
    pub majority: Matrix,
    pub minority: Matrix,
    /// Label id carried by the majority role.
    pub majority_label: usize,
    /// Label id carried by the minority role.
    pub minority_label: usize,
}

impl BinaryProblem {
    /// The smaller class is the minority; on a tie class 1 takes that role.
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        if dataset.n_classes() != 2 {
            return Err(Error::InvalidConfig(format!(
                "binary training needs exactly 2 classes, found {}",
                dataset.n_classes()
            )));
        }
        let counts = dataset.class_counts();
        let (maj, min) = if counts[0] >= counts[1] { (0, 1) } else { (1, 0) };
        Self::new(dataset.class_rows(maj), dataset.class_rows(min), maj, min)
    }

    /// Class `positive` against all other classes pooled. Label 1 marks the
    /// positive side and label 0 the pooled rest; the smaller side becomes
    /// the minority (the positive side on a tie).
    pub fn one_vs_rest(dataset: &Dataset, positive: usize) -> Result<Self> {
        if positive >= dataset.n_classes() {
            return Err(Error::InvalidConfig(format!(
                "class {positive} out of range for {} classes",
                dataset.n_classes()
            )));
        }
        let (pos, neg): (Vec<usize>, Vec<usize>) =
            (0..dataset.n_samples()).partition(|&i| dataset.labels()[i] == positive);
        let pos_rows = dataset.features().select_rows(&pos);
        let neg_rows = dataset.features().select_rows(&neg);
        if pos.len() <= neg.len() {
            Self::new(neg_rows, pos_rows, 0, 1)
        } else {
            Self::new(pos_rows, neg_rows, 1, 0)
        }
    }

    pub fn new(
        majority: Matrix,
        minority: Matrix,
        majority_label: usize,
        minority_label: usize,
    ) -> Result<Self> {
        if majority.cols() != minority.cols() {
            return Err(Error::dim(
                "BinaryProblem",
                majority.cols(),
                minority.cols(),
            ));
        }
        for (label, rows) in [
            (majority_label, majority.rows()),
            (minority_label, minority.rows()),
        ] {
            if rows < 2 {
                return Err(Error::InsufficientData {
                    class: label,
                    count: rows,
                    required: 2,
                });
            }
        }
        Ok(Self {
            majority,
            minority,
            majority_label,
            minority_label,
        })
    }

    pub fn dim(&self) -> usize {
        self.majority.cols()
    }
}

/// Row indices (into the majority / minority matrices) picked for an episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeIndices {
    pub support_maj: Vec<usize>,
    pub support_min: Vec<usize>,
    pub query_maj: usize,
    pub query_min: usize,
}

/// One training batch.
#[derive(Debug, Clone)]
pub struct Episode {
    pub support_maj: Matrix,
    pub support_min: Matrix,
    pub query_maj: Vector,
    pub query_min: Vector,
    pub indices: EpisodeIndices,
}

/// Picks a query row and `support` support rows from `n` rows, never using
/// the query in the support. Support rows are distinct while `n − 1` rows
/// suffice; beyond that the remainder is drawn with replacement from the
/// non-query rows.
fn draw_role(n: usize, support: usize, rng: &mut Rng) -> (Vec<usize>, usize) {
    if n > support {
        let mut idx = rng.sample_indices(n, support + 1);
        let query = idx.pop().expect("support + 1 > 0");
        (idx, query)
    } else {
        let mut idx = rng.sample_indices(n, n);
        let query = idx.pop().expect("n >= 2");
        let pool = idx.len();
        for _ in pool..support {
            let pick = idx[rng.below(pool)];
            idx.push(pick);
        }
        (idx, query)
    }
}

/// Draws an episode: majority rows first, then minority rows.
pub fn sample_episode(
    problem: &BinaryProblem,
    config: &TrainConfig,
    rng: &mut Rng,
) -> Result<Episode> {
    let (n1, n2) = split_support(
        config.support_size,
        problem.majority.rows(),
        problem.minority.rows(),
    )?;
    let (support_maj, query_maj) = draw_role(problem.majority.rows(), n1, rng);
    let (support_min, query_min) = draw_role(problem.minority.rows(), n2, rng);
    Ok(Episode {
        support_maj: problem.majority.select_rows(&support_maj),
        support_min: problem.minority.select_rows(&support_min),
        query_maj: Vector::from(problem.majority.row(query_maj)),
        query_min: Vector::from(problem.minority.row(query_min)),
        indices: EpisodeIndices {
            support_maj,
            support_min,
            query_maj,
            query_min,
        },
    })
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Probability of the first of two classes given their logits.
pub(crate) fn two_way_softmax(first: f64, second: f64) -> (f64, f64) {
    // p_first = 1 / (1 + e^(second − first)), evaluated on the stable side.
    let diff = second - first;
    if diff >= 0.0 {
        let e = (-diff).exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    } else {
        let e = diff.exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    }
}

/// Mean cross-entropy of the two queries classified against the support
/// representatives.
pub fn episode_loss(v_maj_s: &[f64], v_min_s: &[f64], v_maj_q: &[f64], v_min_q: &[f64]) -> f64 {
    let term = |q: &[f64], own: &[f64], other: &[f64]| {
        softplus(dot_unchecked(q, other) - dot_unchecked(q, own))
    };
    0.5 * (term(v_maj_q, v_maj_s, v_min_s) + term(v_min_q, v_min_s, v_maj_s))
}

/// Episode loss with its gradient with respect to each of the four embeddings.
#[derive(Debug, Clone)]
pub struct EpisodeLossGrad {
    pub loss: f64,
    pub d_maj_s: Vec<f64>,
    pub d_min_s: Vec<f64>,
    pub d_maj_q: Vec<f64>,
    pub d_min_q: Vec<f64>,
}

pub fn episode_loss_grad(
    v_maj_s: &[f64],
    v_min_s: &[f64],
    v_maj_q: &[f64],
    v_min_q: &[f64],
) -> Result<EpisodeLossGrad> {
    let k = v_maj_s.len();
    for v in [v_min_s, v_maj_q, v_min_q] {
        if v.len() != k {
            return Err(Error::dim("episode_loss", k, v.len()));
        }
    }
    let mut out = EpisodeLossGrad {
        loss: episode_loss(v_maj_s, v_min_s, v_maj_q, v_min_q),
        d_maj_s: vec![0.0; k],
        d_min_s: vec![0.0; k],
        d_maj_q: vec![0.0; k],
        d_min_q: vec![0.0; k],
    };
    // Query of the majority class: true logit a = q·v_maj, other b = q·v_min.
    // d(loss)/da = (p_maj − 1)/2, d(loss)/db = p_min/2.
    let (p_maj, p_min) = two_way_softmax(
        dot_unchecked(v_maj_q, v_maj_s),
        dot_unchecked(v_maj_q, v_min_s),
    );
    let (ga, gb) = (0.5 * (p_maj - 1.0), 0.5 * p_min);
    for i in 0..k {
        out.d_maj_q[i] += ga * v_maj_s[i] + gb * v_min_s[i];
        out.d_maj_s[i] += ga * v_maj_q[i];
        out.d_min_s[i] += gb * v_maj_q[i];
    }
    let (p_maj, p_min) = two_way_softmax(
        dot_unchecked(v_min_q, v_maj_s),
        dot_unchecked(v_min_q, v_min_s),
    );
    let (ga, gb) = (0.5 * p_maj, 0.5 * (p_min - 1.0));
    for i in 0..k {
        out.d_min_q[i] += ga * v_maj_s[i] + gb * v_min_s[i];
        out.d_maj_s[i] += ga * v_min_q[i];
        out.d_min_s[i] += gb * v_min_q[i];
    }
    Ok(out)
}

/// Adam moment buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: SetConvGrads,
    pub v: SetConvGrads,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &SetConvParams) -> Self {
        Self {
            m: SetConvGrads::zeros_like(params),
            v: SetConvGrads::zeros_like(params),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut SetConvParams,
    grads: &SetConvGrads,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    let n = params.num_scalars();
    if grads.num_scalars() != n
        || state.m.num_scalars() != n
        || state.v.num_scalars() != n
        || grads.w.shape() != params.w.shape()
    {
        return Err(Error::dim("adam_step", n, grads.num_scalars()));
    }
    state.step += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let t = state.step as i32;
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let lr = config.learning_rate;
    let eps = config.adam_epsilon;

    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut().into_iter().zip(state.v.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub loss: f64,
}

/// Everything episodic training produces.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: SetConvParams,
    pub anchor: Anchor,
    pub log: Vec<LossRecord>,
    pub majority_label: usize,
    pub minority_label: usize,
}

/// Trains on a two-class dataset.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutput> {
    train_problem(&BinaryProblem::from_dataset(dataset)?, config)
}

/// Trains on an explicit majority/minority problem. The anchor is computed
/// once from the minority rows and stays fixed. Fully determined by
/// `config.seed`.
pub fn train_problem(problem: &BinaryProblem, config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    let mut rng = Rng::seed_from(config.seed);
    let mut params = init_params(problem.dim(), config.d_out, config.hidden_width, &mut rng)?;
    let anchor = compute_anchor_capped(&problem.minority, config.anchor_cap, &mut rng)?;
    let mut adam = AdamState::new(&params);
    let mut log = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let ep = sample_episode(problem, config, &mut rng)?;
        let q_maj = Matrix::from_vec(1, ep.query_maj.dim(), ep.query_maj.to_vec())?;
        let q_min = Matrix::from_vec(1, ep.query_min.dim(), ep.query_min.to_vec())?;
        let sets = [&ep.support_maj, &ep.support_min, &q_maj, &q_min];

        let mut embeddings = Vec::with_capacity(4);
        for set in sets {
            embeddings.push(setconv_forward(set, &params, &anchor)?);
        }
        let lg = episode_loss_grad(
            &embeddings[0],
            &embeddings[1],
            &embeddings[2],
            &embeddings[3],
        )?;
        if !lg.loss.is_finite() {
            return Err(Error::NonFinite("episode loss"));
        }

        let mut grads = SetConvGrads::zeros_like(&params);
        for (set, upstream) in sets.into_iter().zip([&lg.d_maj_s, &lg.d_min_s, &lg.d_maj_q, &lg.d_min_q]) {
            setconv_backward_into(&mut grads, set, &params, &anchor, upstream)?;
        }
        adam_step(&mut params, &grads, &mut adam, config)?;
        log.push(LossRecord {
            iteration,
            loss: lg.loss,
        });
    }

    Ok(TrainOutput {
        params,
        anchor,
        log,
        majority_label: problem.majority_label,
        minority_label: problem.minority_label,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthSpec};
    use std::collections::HashSet;

    fn small_config() -> TrainConfig {
        TrainConfig {
            support_size: 16,
            iterations: 20,
            hidden_width: 8,
            d_out: 4,
            ..TrainConfig::default()
        }
    }

    fn imbalanced(seed: u64) -> Dataset {
        generate_synthetic(&SynthSpec::separated(&[900, 100], 4, 4.0, 1.0, seed).unwrap()).unwrap()
    }

    #[test]
    fn split_support_rounding_rule() {
        assert_eq!(split_support(64, 900, 100).unwrap(), (58, 6));
        assert_eq!(split_support(64, 500, 500).unwrap(), (32, 32));
        assert_eq!(split_support(64, 1000, 2).unwrap(), (63, 1));
        assert_eq!(split_support(2, 5, 5).unwrap(), (1, 1));
        assert!(split_support(1, 5, 5).is_err());
    }

    #[test]
    fn episode_composition() {
        let ds = imbalanced(1);
        let problem = BinaryProblem::from_dataset(&ds).unwrap();
        assert_eq!((problem.majority_label, problem.minority_label), (0, 1));
        let config = TrainConfig::default();
        let ep = sample_episode(&problem, &config, &mut Rng::seed_from(3)).unwrap();
        assert_eq!(ep.support_maj.rows(), 58);
        assert_eq!(ep.support_min.rows(), 6);
        let maj: HashSet<usize> = ep.indices.support_maj.iter().copied().collect();
        let min: HashSet<usize> = ep.indices.support_min.iter().copied().collect();
        assert_eq!(maj.len(), 58);
        assert_eq!(min.len(), 6);
        assert!(!maj.contains(&ep.indices.query_maj));
        assert!(!min.contains(&ep.indices.query_min));
        assert_eq!(ep.query_maj.as_slice(), problem.majority.row(ep.indices.query_maj));
        assert_eq!(ep.query_min.as_slice(), problem.minority.row(ep.indices.query_min));
    }

    #[test]
    fn episodes_are_deterministic() {
        let problem = BinaryProblem::from_dataset(&imbalanced(2)).unwrap();
        let config = TrainConfig::default();
        let a = sample_episode(&problem, &config, &mut Rng::seed_from(9)).unwrap();
        let b = sample_episode(&problem, &config, &mut Rng::seed_from(9)).unwrap();
        assert_eq!(a.indices, b.indices);
    }

    #[test]
    fn small_class_fills_support_with_replacement() {
        let maj = Matrix::from_vec(40, 1, (0..40).map(f64::from).collect()).unwrap();
        let min = Matrix::from_vec(3, 1, vec![100.0, 101.0, 102.0]).unwrap();
        let problem = BinaryProblem::new(maj, min, 0, 1).unwrap();
        let config = TrainConfig {
            support_size: 16,
            ..TrainConfig::default()
        };
        assert_eq!(split_support(16, 40, 3).unwrap(), (15, 1));
        let mut rng = Rng::seed_from(0);
        for _ in 0..50 {
            let ep = sample_episode(&problem, &config, &mut rng).unwrap();
            assert_eq!(ep.support_maj.rows() + ep.support_min.rows(), 16);
        }
        let (support, query) = draw_role(3, 5, &mut rng);
        assert_eq!(support.len(), 5);
        assert!(support.iter().all(|&i| i != query && i < 3));
    }

    #[test]
    fn one_vs_rest_picks_smaller_side_as_minority() {
        let spec = SynthSpec::separated(&[90, 6, 4], 3, 4.0, 1.0, 0).unwrap();
        let ds = generate_synthetic(&spec).unwrap();
        let head0 = BinaryProblem::one_vs_rest(&ds, 0).unwrap();
        assert_eq!(head0.minority.rows(), 10);
        assert_eq!((head0.majority_label, head0.minority_label), (1, 0));
        let head2 = BinaryProblem::one_vs_rest(&ds, 2).unwrap();
        assert_eq!(head2.minority.rows(), 4);
        assert_eq!((head2.majority_label, head2.minority_label), (0, 1));
    }

    #[test]
    fn loss_closed_forms() {
        let v = [1.0, 2.0];
        assert!((episode_loss(&v, &v, &v, &v) - 2f64.ln()).abs() < 1e-15);

        // correct-class logit exceeds the other by ln 9 for both queries
        let s_maj = [9f64.ln(), 0.0];
        let s_min = [0.0, 9f64.ln()];
        let loss = episode_loss(&s_maj, &s_min, &[1.0, 0.0], &[0.0, 1.0]);
        assert!((loss - (-(0.9f64).ln())).abs() < 1e-12);
        assert!((loss - 0.105_360_515_657_826_3).abs() < 1e-12);
    }

    #[test]
    fn loss_is_stable_for_huge_logits() {
        let loss = episode_loss(&[1e6], &[-1e6], &[1.0], &[1.0]);
        assert!(loss.is_finite());
        assert!((loss - 1e6).abs() < 1e-3);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from(77);
        let mut vs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5).map(|_| rng.normal()).collect())
            .collect();
        let g = episode_loss_grad(&vs[0], &vs[1], &vs[2], &vs[3]).unwrap();
        let grads = [&g.d_maj_s, &g.d_min_s, &g.d_maj_q, &g.d_min_q];
        let h = 1e-6;
        for which in 0..4 {
            for i in 0..5 {
                let orig = vs[which][i];
                vs[which][i] = orig + h;
                let plus = episode_loss(&vs[0], &vs[1], &vs[2], &vs[3]);
                vs[which][i] = orig - h;
                let minus = episode_loss(&vs[0], &vs[1], &vs[2], &vs[3]);
                vs[which][i] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                assert!((numeric - grads[which][i]).abs() < 1e-7);
            }
        }
    }

    fn tiny_params(values: [f64; 5]) -> SetConvParams {
        let mut p = SetConvParams::zeros(1, 1, 1);
        for (t, v) in p.tensors_mut().into_iter().zip(values) {
            t[0] = v;
        }
        p
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut p = tiny_params([0.3, -0.2, 0.1, 0.5, -1.0]);
        let before = p.clone();
        let mut state = AdamState::new(&p);
        let zero = SetConvGrads::zeros_like(&p);
        adam_step(&mut p, &zero, &mut state, &TrainConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = tiny_params([0.0; 5]);
        let mut state = AdamState::new(&p);
        let mut g = SetConvGrads::zeros_like(&p);
        let values = [3.0, -0.25, 1e-3, 50.0, -7.0];
        for (t, v) in g.tensors_mut().into_iter().zip(values) {
            t[0] = v;
        }
        let config = TrainConfig::default();
        adam_step(&mut p, &g, &mut state, &config).unwrap();
        for (t, v) in p.tensors().iter().zip(values) {
            let expected = -config.learning_rate * v / (v.abs() + config.adam_epsilon);
            assert!((t[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn adam_matches_hand_trace_on_quadratic() {
        // f(p) = ½ Σ c_i p_i², gradient c_i p_i; reference trace kept in
        // plain scalars, independent of the tensor plumbing.
        let config = TrainConfig::default();
        let c = [1.0, 2.0, 0.5, 3.0, 0.1];
        let start = [1.0, -1.0, 2.0, 0.5, -3.0];
        let mut p = tiny_params(start);
        let mut state = AdamState::new(&p);

        let mut ref_p = start;
        let mut ref_m = [0.0; 5];
        let mut ref_v = [0.0; 5];
        for step in 1..=5 {
            let mut g = SetConvGrads::zeros_like(&p);
            for (i, t) in g.tensors_mut().into_iter().enumerate() {
                t[0] = c[i] * p.tensors()[i][0];
            }
            adam_step(&mut p, &g, &mut state, &config).unwrap();

            for i in 0..5 {
                let grad = c[i] * ref_p[i];
                ref_m[i] = 0.9 * ref_m[i] + 0.1 * grad;
                ref_v[i] = 0.999 * ref_v[i] + 0.001 * grad * grad;
                let m_hat = ref_m[i] / (1.0 - 0.9f64.powi(step));
                let v_hat = ref_v[i] / (1.0 - 0.999f64.powi(step));
                ref_p[i] -= 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
            }
            for (t, r) in p.tensors().iter().zip(&ref_p) {
                assert!((t[0] - r).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_iterations_return_initial_params() {
        let ds = imbalanced(5);
        let config = TrainConfig {
            iterations: 0,
            ..small_config()
        };
        let out = train(&ds, &config).unwrap();
        let mut rng = Rng::seed_from(config.seed);
        let init = init_params(4, 4, 8, &mut rng).unwrap();
        assert_eq!(out.params, init);
        assert!(out.log.is_empty());
    }

    #[test]
    fn training_is_deterministic() {
        let ds = imbalanced(6);
        let a = train(&ds, &small_config()).unwrap();
        let b = train(&ds, &small_config()).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.len(), 20);
        assert!(a.log.iter().all(|r| r.loss >= 0.0 && r.loss.is_finite()));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { support_size: 1, ..TrainConfig::default() },
            TrainConfig { learning_rate: 1.0, ..TrainConfig::default() },
            TrainConfig { adam_beta2: 0.0, ..TrainConfig::default() },
            TrainConfig { d_out: 0, ..TrainConfig::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn binary_training_rejects_multiclass_data() {
        let ds = generate_synthetic(&SynthSpec::separated(&[5, 5, 5], 3, 4.0, 1.0, 0).unwrap())
            .unwrap();
        assert!(train(&ds, &small_config()).is_err());
    }
}
