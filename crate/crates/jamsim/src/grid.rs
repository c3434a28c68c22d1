use num_complex::Complex;
use num_traits::Zero;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::scalar::Real;

/// Dense Q×M complex grid, stored column by column (one slow-time index per column).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Grid<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for m in 0..cols {
            for q in 0..rows {
                data.push(f(q, m));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_columns(rows: usize, cols: Vec<Vec<Complex<T>>>) -> Self {
        let n = cols.len();
        let mut data = Vec::with_capacity(rows * n);
        for c in cols {
            assert_eq!(c.len(), rows, "column length");
            data.extend(c);
        }
        Self { rows, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, q: usize, m: usize) -> Complex<T> {
        self.data[m * self.rows + q]
    }

    pub fn set(&mut self, q: usize, m: usize, v: Complex<T>) {
        self.data[m * self.rows + q] = v;
    }

    pub fn col(&self, m: usize) -> &[Complex<T>] {
        &self.data[m * self.rows..(m + 1) * self.rows]
    }

    pub fn col_mut(&mut self, m: usize) -> &mut [Complex<T>] {
        &mut self.data[m * self.rows..(m + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(Complex<T>) -> Complex<T>) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert_eq!(self.shape(), other.shape(), "grid shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn hadamard(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, k: Complex<T>) -> Self {
        self.map(|z| z * k)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr().f64()).sum()
    }

    /// `‖a − b‖ / ‖b‖`.
    pub fn rel_error(&self, reference: &Self) -> f64 {
        assert_eq!(self.shape(), reference.shape(), "grid shape mismatch");
        let num: f64 = self.data.iter().zip(&reference.data).map(|(a, b)| (a - b).norm_sqr().f64()).sum();
        (num / reference.energy()).sqrt()
    }

    pub fn cast<U: Real>(&self) -> Grid<U> {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| Complex::new(U::of(z.re.f64()), U::of(z.im.f64()))).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Unitary transforms of one length, planned once.
pub struct UnitaryFft<T: Real> {
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    scratch: Vec<Complex<T>>,
    norm: T,
}

impl<T: Real> UnitaryFft<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            fwd,
            inv,
            scratch: vec![Complex::zero(); scratch_len],
            norm: T::one() / T::of(len as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `X[k] = (1/√N) Σ x[n] e^{-j2πkn/N}`.
    pub fn forward(&mut self, buf: &mut [Complex<T>]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
        let k = self.norm;
        buf.iter_mut().for_each(|z| *z = *z * k);
    }

    pub fn inverse(&mut self, buf: &mut [Complex<T>]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let k = self.norm;
        buf.iter_mut().for_each(|z| *z = *z * k);
    }

    /// Forward transform without the 1/√N factor.
    pub fn forward_raw(&mut self, buf: &mut [Complex<T>]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse_raw(&mut self, buf: &mut [Complex<T>]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
    }
}
