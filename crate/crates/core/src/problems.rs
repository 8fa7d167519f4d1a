//! Classic smooth test functions.

use crate::linalg::{dot, Matrix};
use crate::objective::Objective;

/// The 2-D Rosenbrock function `100 (w₂ − w₁²)² + (1 − w₁)²`, minimized at `(1, 1)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Rosenbrock;

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        2
    }

    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let (x, y) = (w[0], w[1]);
        let a = y - x * x;
        let b = 1.0 - x;
        let f = 100.0 * a * a + b * b;
        let g = vec![-400.0 * x * a - 2.0 * b, 200.0 * a];
        (f, g)
    }
}

/// `f(w) = cᵀw + ½ wᵀHw` with symmetric `H`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub h: Matrix,
    pub c: Vec<f64>,
}

impl Quadratic {
    pub fn new(h: Matrix, c: Vec<f64>) -> Self {
        assert_eq!(h.rows(), c.len());
        Self { h: h.symmetrize(), c }
    }

    /// `½ wᵀ diag(d) w`.
    pub fn diagonal(d: Vec<f64>) -> Self {
        let n = d.len();
        Self::new(Matrix::diag(&d), vec![0.0; n])
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value_and_gradient(&self, w: &[f64]) -> (f64, Vec<f64>) {
        let hw = self.h.mul_vec(w);
        let f = dot(&self.c, w) + 0.5 * dot(w, &hw);
        let g = hw.iter().zip(&self.c).map(|(a, b)| a + b).collect();
        (f, g)
    }
}
