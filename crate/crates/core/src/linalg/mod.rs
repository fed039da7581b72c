//! Dense matrix and vector primitives, the structured products used by the
//! set convolution, and the seeded random source.

mod matrix;
mod rng;

pub(crate) use matrix::dot_unchecked;
pub use matrix::{
    apply_permutation, concat_rows, dot, khatri_rao, khatri_rao_left_contract, max_abs_diff,
    softmax_columns, Matrix, Permutation, Vector,
};
pub use rng::Rng;
