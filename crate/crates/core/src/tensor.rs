//! Plain real and split-complex vectors, plus a row-major shape tag.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math;

/// Row-major 2-D shape. Vectors are `1 x n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    pub const fn vector(len: usize) -> Self {
        Shape { rows: 1, cols: len }
    }

    pub const fn scalar() -> Self {
        Shape { rows: 1, cols: 1 }
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn transposed(&self) -> Self {
        Shape {
            rows: self.cols,
            cols: self.rows,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RealVec {
    pub data: Vec<f64>,
}

impl RealVec {
    pub fn zeros(len: usize) -> Self {
        RealVec { data: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl From<Vec<f64>> for RealVec {
    fn from(data: Vec<f64>) -> Self {
        RealVec { data }
    }
}

impl From<&[f64]> for RealVec {
    fn from(data: &[f64]) -> Self {
        RealVec { data: data.to_vec() }
    }
}

/// Complex vector stored as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexVec {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVec {
    pub fn zeros(len: usize) -> Self {
        ComplexVec {
            re: vec![0.0; len],
            im: vec![0.0; len],
        }
    }

    pub fn new(re: Vec<f64>, im: Vec<f64>) -> Self {
        assert_eq!(re.len(), im.len(), "re/im length mismatch");
        ComplexVec { re, im }
    }

    pub fn from_real(re: &[f64]) -> Self {
        ComplexVec {
            re: re.to_vec(),
            im: vec![0.0; re.len()],
        }
    }

    /// `e^{i phi_t}` for every angle.
    pub fn from_phases(phases: &[f64]) -> Self {
        let (im, re) = phases.iter().map(|&p| math::sin_cos(p)).unzip();
        ComplexVec { re, im }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn get(&self, i: usize) -> (f64, f64) {
        (self.re[i], self.im[i])
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(
            self.re
                .iter()
                .zip(&self.im)
                .map(|(a, b)| a * a + b * b)
                .sum(),
        )
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| math::hypot(a, b))
            .collect()
    }

    pub fn args(&self) -> Vec<f64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&a, &b)| math::atan2(b, a))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().chain(&self.im).all(|v| v.is_finite())
    }

    /// Largest coordinatewise distance `|a_t - b_t|`.
    pub fn max_abs_diff(&self, other: &ComplexVec) -> f64 {
        assert_eq!(self.len(), other.len());
        (0..self.len()).fold(0.0, |m, i| {
            m.max(math::hypot(
                self.re[i] - other.re[i],
                self.im[i] - other.im[i],
            ))
        })
    }
}
