//! The set convolution layer.
//!
//! For an input set `X` (N×d) and a fixed anchor `y` (d), the layer computes
//!
//! ```text
//! h[k] = (1/N) · Σ_i Σ_j X[i,j] · g1(y − X_i)[k] · g2[j,k]
//! ```
//!
//! where `g1` is a one-hidden-layer rectifier MLP applied to each offset
//! `y − X_i` and `g2 = softmax_columns(W)` is a feature-level attention matrix.
//! The per-sample kernel `g(y − X_i)[j,k] = g1(y − X_i)[k] · g2[j,k]` is never
//! stored in the factored path: stacking the kernels gives the Khatri-Rao
//! product `g1(y − X) ⊛ g2`, which is contracted lazily against the flattened
//! input. [`setconv_forward_naive`] keeps the explicit per-sample kernels and
//! serves as a reference.
//!
//! Every output coordinate is a mean over rows, so the layer is invariant to
//! row order and to repeating the whole set.

use crate::error::{Error, Result};
use crate::linalg::{
    concat_rows, khatri_rao_left_contract, softmax_columns, Matrix, Rng, Vector,
};

/// Reference point for kernel-weight estimation: the feature-wise mean of
/// the minority class.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    y: Vector,
}

impl Anchor {
    pub fn new(y: Vector) -> Result<Self> {
        if y.dim() == 0 {
            return Err(Error::EmptyInput("Anchor::new"));
        }
        if !y.is_finite() {
            return Err(Error::NonFinite("Anchor::new"));
        }
        Ok(Self { y })
    }

    pub fn dim(&self) -> usize {
        self.y.dim()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }
}

/// Average-pools the minority samples into an anchor.
pub fn compute_anchor(minority_samples: &Matrix) -> Result<Anchor> {
    if minority_samples.rows() == 0 {
        return Err(Error::EmptyMinority);
    }
    Anchor::new(minority_samples.column_means()?)
}

/// Like [`compute_anchor`], but averages at most `cap` rows drawn without
/// replacement when the minority class is larger than `cap`.
pub fn compute_anchor_capped(
    minority_samples: &Matrix,
    cap: Option<usize>,
    rng: &mut Rng,
) -> Result<Anchor> {
    match cap {
        Some(0) => Err(Error::InvalidConfig("anchor cap must be at least 1".into())),
        Some(cap) if cap < minority_samples.rows() => {
            let rows = rng.sample_indices(minority_samples.rows(), cap);
            compute_anchor(&minority_samples.select_rows(&rows))
        }
        _ => compute_anchor(minority_samples),
    }
}

/// Parameters of the data-sensitive kernel network `g1`:
/// `d → H` (rectifier) `→ d_o` (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// d×H
    pub w1: Matrix,
    /// H
    pub b1: Vector,
    /// H×d_o
    pub w2: Matrix,
    /// d_o
    pub b2: Vector,
}

impl MlpParams {
    pub fn zeros(d: usize, d_out: usize, hidden: usize) -> Self {
        Self {
            w1: Matrix::zeros(d, hidden),
            b1: Vector::zeros(hidden),
            w2: Matrix::zeros(hidden, d_out),
            b2: Vector::zeros(d_out),
        }
    }
}

/// Learnable state of a SetConv layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SetConvParams {
    /// Pre-softmax attention weights, d×d_o.
    pub w: Matrix,
    pub mlp: MlpParams,
}

/// Gradient buffers, one per tensor of [`SetConvParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct SetConvGrads {
    pub w: Matrix,
    pub mlp: MlpParams,
}

macro_rules! tensor_views {
    ($ty:ty) => {
        impl $ty {
            /// The five tensors in a fixed order: `w, w1, b1, w2, b2`.
            pub fn tensors(&self) -> [&[f64]; 5] {
                [
                    self.w.as_slice(),
                    self.mlp.w1.as_slice(),
                    &self.mlp.b1,
                    self.mlp.w2.as_slice(),
                    &self.mlp.b2,
                ]
            }

            pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
                [
                    self.w.as_mut_slice(),
                    self.mlp.w1.as_mut_slice(),
                    &mut self.mlp.b1,
                    self.mlp.w2.as_mut_slice(),
                    &mut self.mlp.b2,
                ]
            }

            pub fn input_dim(&self) -> usize {
                self.w.rows()
            }

            pub fn output_dim(&self) -> usize {
                self.w.cols()
            }

            pub fn hidden_width(&self) -> usize {
                self.mlp.w1.cols()
            }

            pub fn num_scalars(&self) -> usize {
                self.tensors().iter().map(|t| t.len()).sum()
            }
        }
    };
}

tensor_views!(SetConvParams);
tensor_views!(SetConvGrads);

impl SetConvParams {
    pub fn zeros(d: usize, d_out: usize, hidden: usize) -> Self {
        Self {
            w: Matrix::zeros(d, d_out),
            mlp: MlpParams::zeros(d, d_out, hidden),
        }
    }

    /// Checks that the tensor shapes chain `d → H → d_o` and are finite.
    pub fn validate(&self) -> Result<()> {
        let (d, d_out) = self.w.shape();
        let hidden = self.mlp.w1.cols();
        let checks = [
            ("w1 rows", d, self.mlp.w1.rows()),
            ("b1 length", hidden, self.mlp.b1.dim()),
            ("w2 rows", hidden, self.mlp.w2.rows()),
            ("w2 cols", d_out, self.mlp.w2.cols()),
            ("b2 length", d_out, self.mlp.b2.dim()),
        ];
        for (what, expected, found) in checks {
            if expected != found {
                return Err(Error::ShapeInconsistency(format!(
                    "{what}: expected {expected}, found {found}"
                )));
            }
        }
        if d == 0 || d_out == 0 || hidden == 0 {
            return Err(Error::ShapeInconsistency("zero-sized dimension".into()));
        }
        if self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("SetConvParams"));
        }
        Ok(())
    }
}

impl SetConvGrads {
    pub fn zeros_like(params: &SetConvParams) -> Self {
        Self {
            w: Matrix::zeros(params.input_dim(), params.output_dim()),
            mlp: MlpParams::zeros(
                params.input_dim(),
                params.output_dim(),
                params.hidden_width(),
            ),
        }
    }

    pub fn add_assign(&mut self, other: &SetConvGrads) -> Result<()> {
        if self.num_scalars() != other.num_scalars() || self.w.shape() != other.w.shape() {
            return Err(Error::dim(
                "SetConvGrads::add_assign",
                self.num_scalars(),
                other.num_scalars(),
            ));
        }
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }
}

/// Draws initial parameters. Weight matrices are uniform on
/// `[-1/√fan_in, 1/√fan_in)`; biases start at zero.
pub fn init_params(d: usize, d_out: usize, hidden: usize, rng: &mut Rng) -> Result<SetConvParams> {
    if d == 0 || d_out == 0 || hidden == 0 {
        return Err(Error::InvalidConfig(format!(
            "dimensions must be positive (d={d}, d_o={d_out}, H={hidden})"
        )));
    }
    let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.uniform_in(-bound, bound))
            .collect();
        Matrix::from_vec(rows, cols, data).expect("finite by construction")
    };
    let w = uniform(d, d_out, d);
    let w1 = uniform(d, hidden, d);
    let w2 = uniform(hidden, d_out, hidden);
    Ok(SetConvParams {
        w,
        mlp: MlpParams {
            w1,
            b1: Vector::zeros(hidden),
            w2,
            b2: Vector::zeros(d_out),
        },
    })
}

fn check_inputs(x: &Matrix, params: &SetConvParams, anchor: &Anchor) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::EmptyInput("setconv"));
    }
    let d = params.input_dim();
    if x.cols() != d {
        return Err(Error::dim("setconv input columns", d, x.cols()));
    }
    if anchor.dim() != d {
        return Err(Error::dim("setconv anchor", d, anchor.dim()));
    }
    Ok(())
}

/// Intermediate values of the kernel network, kept for the backward pass.
struct KernelActivations {
    /// y − X_i per row, N×d
    offsets: Matrix,
    /// pre-activation, N×H
    hidden_pre: Matrix,
    /// rectified, N×H
    hidden: Matrix,
    /// g1(y − X), N×d_o
    g1: Matrix,
}

fn kernel_network(x: &Matrix, params: &SetConvParams, anchor: &Anchor) -> Result<KernelActivations> {
    let mut offsets = x.clone();
    for r in 0..offsets.rows() {
        for (v, &a) in offsets.row_mut(r).iter_mut().zip(anchor.as_slice()) {
            *v = a - *v;
        }
    }
    let mut hidden_pre = offsets.matmul(&params.mlp.w1)?;
    add_row_bias(&mut hidden_pre, &params.mlp.b1);
    let mut hidden = hidden_pre.clone();
    hidden.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    let mut g1 = hidden.matmul(&params.mlp.w2)?;
    add_row_bias(&mut g1, &params.mlp.b2);
    Ok(KernelActivations {
        offsets,
        hidden_pre,
        hidden,
        g1,
    })
}

fn add_row_bias(m: &mut Matrix, bias: &[f64]) {
    for r in 0..m.rows() {
        for (v, b) in m.row_mut(r).iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn finite_or_err(v: Vector, op: &'static str) -> Result<Vector> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(op))
    }
}

/// Factored forward pass: `h = (1/N) · Concat(X) · (g1(y − X) ⊛ softmax_columns(W))`.
pub fn setconv_forward(x: &Matrix, params: &SetConvParams, anchor: &Anchor) -> Result<Vector> {
    check_inputs(x, params, anchor)?;
    let acts = kernel_network(x, params, anchor)?;
    let g2 = softmax_columns(&params.w);
    let flat = concat_rows(x)?;
    let mut h = khatri_rao_left_contract(&flat, &acts.g1, &g2)?;
    let inv_n = 1.0 / x.rows() as f64;
    h.iter_mut().for_each(|v| *v *= inv_n);
    finite_or_err(h, "setconv_forward")
}

/// Reference forward pass that builds every per-sample d×d_o kernel
/// `g(y − X_i)` and takes its tensor dot product with `X_i`.
pub fn setconv_forward_naive(
    x: &Matrix,
    params: &SetConvParams,
    anchor: &Anchor,
) -> Result<Vector> {
    check_inputs(x, params, anchor)?;
    let acts = kernel_network(x, params, anchor)?;
    let g2 = softmax_columns(&params.w);
    let (d, d_out) = g2.shape();
    let mut h = vec![0.0; d_out];
    let mut kernel = Matrix::zeros(d, d_out);
    for i in 0..x.rows() {
        let g1_row = acts.g1.row(i);
        for j in 0..d {
            for (k, &g) in g1_row.iter().enumerate() {
                kernel.set(j, k, g * g2.get(j, k));
            }
        }
        let xi = x.row(i);
        for (k, hk) in h.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, &xij) in xi.iter().enumerate() {
                acc += xij * kernel.get(j, k);
            }
            *hk += acc;
        }
    }
    let inv_n = 1.0 / x.rows() as f64;
    h.iter_mut().for_each(|v| *v *= inv_n);
    finite_or_err(Vector::from(h), "setconv_forward_naive")
}

/// Gradient of `upstream · setconv_forward(x, params, anchor)` with respect
/// to every parameter. The anchor and the inputs are treated as constants.
pub fn setconv_backward(
    x: &Matrix,
    params: &SetConvParams,
    anchor: &Anchor,
    upstream: &[f64],
) -> Result<SetConvGrads> {
    let mut grads = SetConvGrads::zeros_like(params);
    setconv_backward_into(&mut grads, x, params, anchor, upstream)?;
    Ok(grads)
}

/// Accumulating form of [`setconv_backward`]: adds into `grads`.
pub fn setconv_backward_into(
    grads: &mut SetConvGrads,
    x: &Matrix,
    params: &SetConvParams,
    anchor: &Anchor,
    upstream: &[f64],
) -> Result<()> {
    check_inputs(x, params, anchor)?;
    let d_out = params.output_dim();
    if upstream.len() != d_out {
        return Err(Error::dim("setconv_backward upstream", d_out, upstream.len()));
    }
    if grads.w.shape() != params.w.shape() || grads.num_scalars() != params.num_scalars() {
        return Err(Error::dim(
            "setconv_backward grads",
            params.num_scalars(),
            grads.num_scalars(),
        ));
    }
    let n = x.rows();
    let inv_n = 1.0 / n as f64;

    let acts = kernel_network(x, params, anchor)?;
    let g2 = softmax_columns(&params.w);
    // proj[i,k] = X_i · g2[:,k]
    let proj = x.matmul(&g2)?;

    let mut d_g1 = Matrix::zeros(n, d_out);
    let mut d_proj = Matrix::zeros(n, d_out);
    for i in 0..n {
        let (g1_row, p_row) = (acts.g1.row(i), proj.row(i));
        for k in 0..d_out {
            let s = upstream[k] * inv_n;
            d_g1.set(i, k, s * p_row[k]);
            d_proj.set(i, k, s * g1_row[k]);
        }
    }

    // attention branch: dG2 = Xᵀ dP, then the column-softmax Jacobian.
    let d_g2 = x.t_matmul(&d_proj)?;
    let d = g2.rows();
    for k in 0..d_out {
        let mut weighted = 0.0;
        for j in 0..d {
            weighted += g2.get(j, k) * d_g2.get(j, k);
        }
        for j in 0..d {
            let g = g2.get(j, k) * (d_g2.get(j, k) - weighted);
            let cur = grads.w.get(j, k);
            grads.w.set(j, k, cur + g);
        }
    }

    // kernel network branch
    grads
        .mlp
        .w2
        .add_assign(&acts.hidden.t_matmul(&d_g1)?)?;
    for r in d_g1.row_iter() {
        for (b, v) in grads.mlp.b2.iter_mut().zip(r) {
            *b += v;
        }
    }
    let mut d_hidden = d_g1.matmul_t(&params.mlp.w2)?;
    for (dh, &pre) in d_hidden
        .as_mut_slice()
        .iter_mut()
        .zip(acts.hidden_pre.as_slice())
    {
        if pre <= 0.0 {
            *dh = 0.0;
        }
    }
    grads
        .mlp
        .w1
        .add_assign(&acts.offsets.t_matmul(&d_hidden)?)?;
    for r in d_hidden.row_iter() {
        for (b, v) in grads.mlp.b1.iter_mut().zip(r) {
            *b += v;
        }
    }
    Ok(())
}
