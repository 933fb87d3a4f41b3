//! Periodic-box geometry and the transform normalization used everywhere.
//!
//! The box is `[-L/2, L/2)^3` sampled on `n^3` points, `h = L/n`, with
//! box-centered physical coordinates `x(i) = (i - n/2) h` and dual lattice
//! `xi(m) = 2 pi m / L` for integer `m` in `[-n/2, n/2)` per axis.
//!
//! Transform pairing (the one place it is documented):
//!
//! ```text
//! forward:  F[m] = sum_j f[x_j] exp(-i xi_m . x_j)          (unscaled)
//! inverse:  f[x_j] = (1/n^3) sum_m F[m] exp(+i xi_m . x_j)
//! ```
//!
//! Norm conventions built on that pairing:
//! * physical l2:  `||f||_2 = sqrt(h^3 sum_x |f(x)|^2)` (discrete L^2(box));
//! * fourier l2:   `sqrt(h^3/n^3 sum_m |F[m]|^2)`, equal to the physical l2
//!   by Parseval;
//! * fourier sup:  `h^3 max_m |F[m]|`, which approximates the continuum
//!   `sup |f_hat|` (Riemann-sum calibration), so amplitude diagnostics are
//!   comparable across grid resolutions.

use std::sync::Arc;

use crate::dirac;
use crate::error::MdError;
use crate::fft::FftEngine;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub l: f64,
    pub mass: f64,
}

/// Periodic box geometry with cached FFT plans and wavenumber tables.
pub struct FourierGrid {
    n: usize,
    l: f64,
    mass: f64,
    h: f64,
    /// xi value for each FFT bin index along one axis.
    xi_axis: Vec<f64>,
    /// signed integer mode for each FFT bin index along one axis.
    mode_axis: Vec<i64>,
    fft: FftEngine,
}

impl std::fmt::Debug for FourierGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FourierGrid(n={}, L={}, m={})", self.n, self.l, self.mass)
    }
}

impl FourierGrid {
    pub fn new(n: usize, l: f64, mass: f64) -> Result<Arc<Self>> {
        if n < 4 || n % 2 != 0 {
            return Err(MdError::Validation {
                field: "n".into(),
                msg: format!("n_per_axis must be an even integer >= 4 (got {n})"),
            });
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(MdError::Validation {
                field: "L".into(),
                msg: format!("box length must be positive (got {l})"),
            });
        }
        dirac::validate_mass(mass)?;
        let h = l / n as f64;
        let mut xi_axis = vec![0.0; n];
        let mut mode_axis = vec![0i64; n];
        for k in 0..n {
            let m = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
            mode_axis[k] = m;
            xi_axis[k] = 2.0 * std::f64::consts::PI * m as f64 / l;
        }
        Ok(Arc::new(FourierGrid {
            n,
            l,
            mass,
            h,
            xi_axis,
            mode_axis,
            fft: FftEngine::new(n),
        }))
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Arc<Self>> {
        Self::new(spec.n, spec.l, spec.mass)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { n: self.n, l: self.l, mass: self.mass }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn box_length(&self) -> f64 {
        self.l
    }

    #[inline]
    pub fn mass(&self) -> f64 {
        self.mass
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Cell volume h^3.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    /// Per-axis maximum |xi| (Nyquist magnitude), pi n / L.
    #[inline]
    pub fn xi_max_axis(&self) -> f64 {
        std::f64::consts::PI * self.n as f64 / self.l
    }

    /// Largest |xi| over the whole lattice, sqrt(3) pi n / L.
    #[inline]
    pub fn xi_max_lattice(&self) -> f64 {
        3f64.sqrt() * self.xi_max_axis()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }

    /// Box-centered physical coordinate along one axis for grid index i.
    #[inline]
    pub fn coord_axis(&self, i: usize) -> f64 {
        (i as i64 - (self.n / 2) as i64) as f64 * self.h
    }

    #[inline]
    pub fn xi_axis(&self, bin: usize) -> f64 {
        self.xi_axis[bin]
    }

    #[inline]
    pub fn mode_axis_of(&self, bin: usize) -> i64 {
        self.mode_axis[bin]
    }

    /// xi vector at a flat Fourier index.
    #[inline]
    pub fn xi_at(&self, flat: usize) -> [f64; 3] {
        let n = self.n;
        let k = flat % n;
        let j = (flat / n) % n;
        let i = flat / (n * n);
        [self.xi_axis[i], self.xi_axis[j], self.xi_axis[k]]
    }

    /// Signed integer mode triple at a flat Fourier index.
    #[inline]
    pub fn mode_at(&self, flat: usize) -> [i64; 3] {
        let n = self.n;
        let k = flat % n;
        let j = (flat / n) % n;
        let i = flat / (n * n);
        [self.mode_axis[i], self.mode_axis[j], self.mode_axis[k]]
    }

    /// Box-centered coordinates at a flat physical index.
    #[inline]
    pub fn coord_at(&self, flat: usize) -> [f64; 3] {
        let n = self.n;
        let k = flat % n;
        let j = (flat / n) % n;
        let i = flat / (n * n);
        [self.coord_axis(i), self.coord_axis(j), self.coord_axis(k)]
    }

    /// <xi>_m = sqrt(mass^2 + |xi|^2) at a flat Fourier index.
    #[inline]
    pub fn bracket_at(&self, flat: usize) -> f64 {
        let xi = self.xi_at(flat);
        dirac::bracket(xi, self.mass)
    }

    /// Flat Fourier index of the zero mode.
    #[inline]
    pub fn zero_mode_index(&self) -> usize {
        0
    }

    /// FFT bin holding the mirror mode -m (componentwise n - k mod n).
    #[inline]
    pub fn mirror_index(&self, flat: usize) -> usize {
        let n = self.n;
        let k = flat % n;
        let j = (flat / n) % n;
        let i = flat / (n * n);
        let mi = (n - i) % n;
        let mj = (n - j) % n;
        let mk = (n - k) % n;
        self.index(mi, mj, mk)
    }

    pub(crate) fn fft(&self) -> &FftEngine {
        &self.fft
    }

    /// Dyadic shell range [k_min, k_max] representable on this lattice:
    /// k_max is the smallest k with rho(xi / 2^k) = 1 on every lattice point
    /// (so the shell partition telescopes to exactly 1), and k_min is the
    /// largest k whose shell has no support on any nonzero lattice point,
    /// plus one.
    pub fn dyadic_range(&self) -> (i32, i32) {
        let xi_min = 2.0 * std::f64::consts::PI / self.l;
        let xi_max = self.xi_max_lattice();
        // rho_k supported in 2^{k-1} <= |xi| <= 2^{k+1}; nonzero on the lattice
        // needs 2^{k+1} > xi_min, i.e. k >= ceil(log2(xi_min)) - 1.
        let k_min = (xi_min.log2().ceil() as i32) - 1;
        // partition exact at every point needs 2^{k_max} >= xi_max.
        let k_max = xi_max.log2().ceil() as i32;
        (k_min, k_max)
    }

    /// Largest spatial dyadic index needed so the spatial cutoffs sum to 1
    /// over the whole box (corner distance sqrt(3) L / 2).
    pub fn spatial_j_max(&self) -> i32 {
        (3f64.sqrt() * self.l / 2.0).log2().ceil() as i32
    }
}

impl PartialEq for FourierGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.l == other.l && self.mass == other.mass
    }
}

pub(crate) fn check_same_grid(a: &Arc<FourierGrid>, b: &Arc<FourierGrid>) -> Result<()> {
    if !Arc::ptr_eq(a, b) && **a != **b {
        return Err(MdError::GridMismatch(format!("{:?} vs {:?}", a, b)));
    }
    Ok(())
}
