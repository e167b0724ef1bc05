//! Small dense vector helpers and a pivoted direct solver.
//!
//! Problem dimensions here are at most a few hundred, so plain row-major
//! `Vec`s are enough.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

pub fn norm1<S: Scalar>(a: &[S]) -> S {
    a.iter().map(|x| x.abs()).sum()
}

pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<S>().sqrt()
}

/// `y += a * x`
pub fn axpy<S: Scalar>(a: S, x: &[S], y: &mut [S]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + a * xi;
    }
}

/// Projects `theta` onto the closed Euclidean ball `B(center, radius)`.
pub fn project_to_ball(theta: &mut [f64], center: &[f64], radius: f64) {
    let dist = distance(theta, center);
    if dist > radius {
        let shrink = radius / dist;
        for (t, &c) in theta.iter_mut().zip(center) {
            *t = c + (*t - c) * shrink;
        }
    }
}

/// Solves `A x = b` for a square row-major `A` of size `dim × dim` by Gaussian
/// elimination with partial pivoting. `a` and `b` are consumed as workspace.
pub fn solve<S: Scalar>(mut a: Vec<S>, mut b: Vec<S>, dim: usize) -> Result<Vec<S>> {
    if a.len() != dim * dim {
        return Err(Error::DimensionMismatch { expected: dim * dim, actual: a.len() });
    }
    if b.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: b.len() });
    }
    let scale = a.iter().fold(S::zero(), |m, x| m.max(x.abs()));
    let tiny = scale * S::epsilon() * S::lit(dim as f64);

    for col in 0..dim {
        let pivot_row =
            (col..dim).max_by(|&i, &j| a[i * dim + col].abs().partial_cmp(&a[j * dim + col].abs()).unwrap()).unwrap();
        let pivot = a[pivot_row * dim + col];
        if !(pivot.abs() > tiny) {
            return Err(Error::Singular(format!("zero pivot in column {col}")));
        }
        if pivot_row != col {
            for k in 0..dim {
                a.swap(col * dim + k, pivot_row * dim + k);
            }
            b.swap(col, pivot_row);
        }
        for row in col + 1..dim {
            let factor = a[row * dim + col] / pivot;
            if factor == S::zero() {
                continue;
            }
            for k in col..dim {
                let v = a[col * dim + k];
                a[row * dim + k] = a[row * dim + k] - factor * v;
            }
            b[row] = b[row] - factor * b[col];
        }
    }

    let mut x = vec![S::zero(); dim];
    for row in (0..dim).rev() {
        let tail: S = (row + 1..dim).map(|k| a[row * dim + k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row * dim + row];
    }
    Ok(x)
}

/// `y = M x` for row-major square `M`.
pub fn mat_vec(m: &[f64], x: &[f64]) -> Vec<f64> {
    let dim = x.len();
    (0..dim).map(|i| dot(&m[i * dim..(i + 1) * dim], x)).collect()
}
