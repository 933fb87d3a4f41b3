//! 3D complex FFT built on rustfft, with the sign twist that realizes the
//! box-centered transform pairing documented in [`crate::grid`].
//!
//! The twist: with x_j = (j - n/2) h one has
//! `exp(-i xi_m x_j) = exp(-2 pi i m j / n) (-1)^m`, so the box-centered
//! forward transform is the plain DFT followed by multiplication with
//! `(-1)^{m1+m2+m3}` (equal to `(-1)^{k1+k2+k3}` on FFT bins for even n).

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct FftEngine {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftEngine {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        FftEngine {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// In-place 1D transforms along every axis of the n^3 cube.
    fn transform_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        debug_assert_eq!(data.len(), n * n * n);

        // axis 2 (contiguous lines)
        data.par_chunks_mut(n).for_each_init(
            || vec![Complex64::default(); plan.get_inplace_scratch_len()],
            |scratch, line| {
                plan.process_with_scratch(line, scratch);
            },
        );

        // axis 1: lines start at (i, 0, k), stride n
        let planes: Vec<usize> = (0..n).collect();
        let ptr = SendPtr(data.as_mut_ptr());
        planes.par_iter().for_each_init(
            || {
                (
                    vec![Complex64::default(); n],
                    vec![Complex64::default(); plan.get_inplace_scratch_len()],
                )
            },
            |(buf, scratch), &i| {
                let base = ptr;
                for k in 0..n {
                    let start = (i * n) * n + k;
                    unsafe {
                        for j in 0..n {
                            buf[j] = *base.0.add(start + j * n);
                        }
                    }
                    plan.process_with_scratch(buf, scratch);
                    unsafe {
                        for j in 0..n {
                            *base.0.add(start + j * n) = buf[j];
                        }
                    }
                }
            },
        );

        // axis 0: lines start at (0, j, k), stride n^2
        let nn = n * n;
        planes.par_iter().for_each_init(
            || {
                (
                    vec![Complex64::default(); n],
                    vec![Complex64::default(); plan.get_inplace_scratch_len()],
                )
            },
            |(buf, scratch), &j| {
                let base = ptr;
                for k in 0..n {
                    let start = j * n + k;
                    unsafe {
                        for i in 0..n {
                            buf[i] = *base.0.add(start + i * nn);
                        }
                    }
                    plan.process_with_scratch(buf, scratch);
                    unsafe {
                        for i in 0..n {
                            *base.0.add(start + i * nn) = buf[i];
                        }
                    }
                }
            },
        );
    }

    fn twist(&self, data: &mut [Complex64]) {
        let n = self.n;
        data.par_chunks_mut(n).enumerate().for_each(|(row, line)| {
            let i = row / n;
            let j = row % n;
            let row_parity = (i + j) & 1;
            for (k, v) in line.iter_mut().enumerate() {
                if (row_parity + k) & 1 == 1 {
                    *v = -*v;
                }
            }
        });
    }

    /// Physical -> Fourier, box-centered pairing, unscaled.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform_axes(data, &self.forward.clone());
        self.twist(data);
    }

    /// Fourier -> physical, box-centered pairing, scaled by 1/n^3.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.twist(data);
        self.transform_axes(data, &self.inverse.clone());
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }
}

#[derive(Clone, Copy)]
struct SendPtr(*mut Complex64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}
