//! Shared fixtures for the benchmarks.

use setconv::setconv::init_params;
use setconv::{Anchor, Matrix, Rng, SetConvParams, Vector};

/// A random support set, anchor and freshly initialised layer.
pub struct Fixture {
    pub x: Matrix,
    pub anchor: Anchor,
    pub params: SetConvParams,
    pub upstream: Vec<f64>,
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect())
        .expect("shape matches buffer")
}

impl Fixture {
    pub fn new(n: usize, d: usize, d_out: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = Rng::seed_from(seed);
        let params = init_params(d, d_out, hidden, &mut rng).expect("valid dimensions");
        let x = random_matrix(n, d, &mut rng);
        let anchor = Anchor::new(Vector::from((0..d).map(|_| rng.normal()).collect::<Vec<_>>()))
            .expect("finite anchor");
        let upstream = (0..d_out).map(|_| rng.normal()).collect();
        Self { x, anchor, params, upstream }
    }
}
