//! Scalar and spinor fields on the periodic box, with the Fourier-multiplier
//! and dealiasing machinery.
//!
//! Singular-symbol convention: a symbol that is non-finite at xi = 0
//! annihilates the zero mode (`|D|^{-1/2}` and friends are undefined there on
//! the torus; the gauge zero mode is carried by a separate ODE register).
//! Dealiasing zeroes every coefficient with any `|m_j| > n/3` and is applied
//! after pointwise products, not after linear flows.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dirac::{project_value, Sign};
use crate::error::MdError;
use crate::grid::{check_same_grid, FourierGrid};
use crate::Result;

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Physical,
    Fourier,
}

/// Deterministic sum over a slice: fixed-size chunks are reduced in parallel
/// but combined in index order, so results do not depend on thread timing.
pub fn det_sum<T: Sync, F: Fn(&T) -> f64 + Sync>(data: &[T], f: F) -> f64 {
    const CHUNK: usize = 8192;
    let partials: Vec<f64> = data
        .par_chunks(CHUNK)
        .map(|c| c.iter().map(&f).sum::<f64>())
        .collect();
    partials.iter().sum()
}

/// One complex-valued component on the grid.
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<FourierGrid>,
    side: Side,
    data: Vec<C64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<FourierGrid>, side: Side) -> Self {
        ScalarField {
            grid: grid.clone(),
            side,
            data: vec![C64::default(); grid.len()],
        }
    }

    pub fn from_data(grid: &Arc<FourierGrid>, side: Side, data: Vec<C64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(MdError::GridMismatch(format!(
                "field length {} vs grid {}",
                data.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid: grid.clone(), side, data })
    }

    /// Build from a physical-space function of the box-centered coordinates.
    pub fn from_physical_fn(grid: &Arc<FourierGrid>, f: impl Fn([f64; 3]) -> C64 + Sync) -> Self {
        let mut data = vec![C64::default(); grid.len()];
        data.par_iter_mut().enumerate().for_each(|(idx, v)| {
            *v = f(grid.coord_at(idx));
        });
        ScalarField { grid: grid.clone(), side: Side::Physical, data }
    }

    #[inline]
    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    #[inline]
    pub fn side(&self) -> Side {
        self.side
    }

    #[inline]
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    pub fn require_side(&self, side: Side) -> Result<()> {
        if self.side != side {
            return Err(MdError::contract(format!(
                "field is {:?}-side, operation requires {:?}",
                self.side, side
            )));
        }
        Ok(())
    }

    pub fn to_fourier(&self) -> ScalarField {
        match self.side {
            Side::Fourier => self.clone(),
            Side::Physical => {
                let mut out = self.clone();
                out.grid.fft().forward(&mut out.data);
                out.side = Side::Fourier;
                out
            }
        }
    }

    pub fn to_physical(&self) -> ScalarField {
        match self.side {
            Side::Physical => self.clone(),
            Side::Fourier => {
                let mut out = self.clone();
                out.grid.fft().inverse(&mut out.data);
                out.side = Side::Physical;
                out
            }
        }
    }

    /// Multiply each Fourier coefficient by `m(xi)`. Non-finite `m(0)`
    /// annihilates the zero mode.
    pub fn apply_multiplier(&self, m: impl Fn([f64; 3]) -> C64 + Sync) -> Result<ScalarField> {
        self.require_side(Side::Fourier)?;
        let grid = self.grid.clone();
        let mut out = self.clone();
        out.data.par_iter_mut().enumerate().for_each(|(idx, v)| {
            let mv = m(grid.xi_at(idx));
            *v *= mv;
        });
        let zero = grid.zero_mode_index();
        let m0 = m([0.0; 3]);
        if !m0.re.is_finite() || !m0.im.is_finite() {
            out.data[zero] = C64::default();
        }
        Ok(out)
    }

    /// Real-symbol convenience wrapper around [`Self::apply_multiplier`].
    pub fn apply_real_multiplier(&self, m: impl Fn([f64; 3]) -> f64 + Sync) -> Result<ScalarField> {
        self.apply_multiplier(|xi| C64::new(m(xi), 0.0))
    }

    /// 2/3-rule dealiasing: zero every coefficient with any |m_j| > n/3.
    pub fn dealias(&self) -> Result<ScalarField> {
        self.require_side(Side::Fourier)?;
        let mut out = self.clone();
        dealias_slice(&self.grid, &mut out.data);
        Ok(out)
    }

    /// Exact trigonometric evaluation of the low-passed field at an arbitrary
    /// point. Returns the value and whether the point had to be wrapped into
    /// the box.
    ///
    /// Cost is O(retained modes); `budget` caps that count.
    pub fn eval_lowpass_at_point(
        &self,
        kcut: i32,
        point: [f64; 3],
        budget: usize,
    ) -> Result<(C64, bool)> {
        self.require_side(Side::Fourier)?;
        let plan = LowpassPlan::build(&self.grid, kcut, budget)?;
        let (vals, wrapped) = plan.eval_many(&[self.data.as_slice()], point);
        Ok((vals[0], wrapped))
    }

    /// Physical-side L2 norm sqrt(h^3 sum |f|^2); computed on either side via
    /// Parseval.
    pub fn l2_norm(&self) -> f64 {
        let sum = det_sum(&self.data, |v| v.norm_sqr());
        let scale = match self.side {
            Side::Physical => self.grid.cell_volume(),
            Side::Fourier => self.grid.cell_volume() / self.grid.len() as f64,
        };
        (sum * scale).sqrt()
    }

    /// Max pointwise modulus (no calibration factor).
    pub fn max_abs(&self) -> f64 {
        self.data
            .par_iter()
            .map(|v| v.norm())
            .reduce(|| 0.0, f64::max)
    }

    /// Continuum-calibrated Fourier sup norm h^3 max |F[m]| (fourier side).
    pub fn fourier_sup(&self) -> Result<f64> {
        self.require_side(Side::Fourier)?;
        Ok(self.max_abs() * self.grid.cell_volume())
    }

    /// Largest |F(-m) - conj(F(m))| relative to the field scale; zero for
    /// real-valued physical data.
    pub fn hermitian_asymmetry(&self) -> Result<f64> {
        self.require_side(Side::Fourier)?;
        let scale = self.max_abs().max(1e-300);
        let grid = &self.grid;
        let worst = (0..self.data.len())
            .into_par_iter()
            .map(|idx| {
                let m = grid.mirror_index(idx);
                (self.data[m] - self.data[idx].conj()).norm()
            })
            .reduce(|| 0.0, f64::max);
        Ok(worst / scale)
    }

    pub fn scaled(&self, c: C64) -> ScalarField {
        let mut out = self.clone();
        out.data.par_iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, rhs: &ScalarField) -> Result<ScalarField> {
        check_same_grid(&self.grid, &rhs.grid)?;
        if self.side != rhs.side {
            return Err(MdError::contract("adding fields on different sides"));
        }
        let mut out = self.clone();
        out.data
            .par_iter_mut()
            .zip(rhs.data.par_iter())
            .for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, rhs: &ScalarField) -> Result<ScalarField> {
        self.add(&rhs.scaled(C64::new(-1.0, 0.0)))
    }

    /// Pointwise product (physical side), dealiased on the Fourier side.
    pub fn pointwise_mul_dealiased(&self, rhs: &ScalarField) -> Result<ScalarField> {
        self.require_side(Side::Physical)?;
        rhs.require_side(Side::Physical)?;
        check_same_grid(&self.grid, &rhs.grid)?;
        let mut out = self.clone();
        out.data
            .par_iter_mut()
            .zip(rhs.data.par_iter())
            .for_each(|(a, b)| *a *= b);
        let f = out.to_fourier().dealias()?;
        Ok(f.to_physical())
    }

    /// Multiply by the box-centered coordinate x_l (physical side).
    /// Faithful for interior-supported fields; callers report the
    /// boundary-support fraction where that matters.
    pub fn mul_coordinate(&self, axis: usize) -> Result<ScalarField> {
        self.require_side(Side::Physical)?;
        let grid = self.grid.clone();
        let mut out = self.clone();
        out.data.par_iter_mut().enumerate().for_each(|(idx, v)| {
            *v *= grid.coord_at(idx)[axis];
        });
        Ok(out)
    }

    /// Fraction of L2 mass within `margin` of the box boundary (any axis).
    pub fn boundary_mass_fraction(&self, margin: f64) -> Result<f64> {
        self.require_side(Side::Physical)?;
        let grid = &self.grid;
        let half = grid.box_length() / 2.0;
        let total = det_sum(&self.data, |v| v.norm_sqr());
        if total == 0.0 {
            return Ok(0.0);
        }
        let idxs: Vec<usize> = (0..self.data.len()).collect();
        let boundary = det_sum(&idxs, |&idx| {
            let x = grid.coord_at(idx);
            let near = x.iter().any(|&c| half - c.abs() < margin);
            if near {
                self.data[idx].norm_sqr()
            } else {
                0.0
            }
        });
        Ok(boundary / total)
    }
}

pub(crate) fn dealias_slice(grid: &Arc<FourierGrid>, data: &mut [C64]) {
    let cut = grid.n() as i64 / 3;
    data.par_iter_mut().enumerate().for_each(|(idx, v)| {
        let m = grid.mode_at(idx);
        if m.iter().any(|mm| mm.abs() > cut) {
            *v = C64::default();
        }
    });
}

/// Retained-mode plan for exact low-pass evaluation at off-grid points.
///
/// Holds the flat indices and cutoff weights of every mode with
/// `rho_{<=kcut}(xi) > 0`, so one plan can evaluate several fields at many
/// points. Mirror pairs are not merged; fields need not be Hermitian.
pub struct LowpassPlan {
    pub kcut: i32,
    grid: Arc<FourierGrid>,
    modes: Vec<(usize, f64)>,
}

impl LowpassPlan {
    pub fn build(grid: &Arc<FourierGrid>, kcut: i32, budget: usize) -> Result<Self> {
        let bump = crate::lp::DyadicBump::default();
        let mut modes = Vec::new();
        let radius = 2f64.powi(kcut + 1); // support of rho_{<=kcut}
        for idx in 0..grid.len() {
            let xi = grid.xi_at(idx);
            let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
            if r < radius {
                let w = bump.rho_le(kcut, r);
                if w > 0.0 {
                    modes.push((idx, w));
                }
            }
        }
        if modes.len() > budget {
            return Err(MdError::Budget { retained: modes.len(), budget });
        }
        Ok(LowpassPlan { kcut, grid: grid.clone(), modes })
    }

    pub fn retained(&self) -> usize {
        self.modes.len()
    }

    /// Evaluate several coefficient arrays at one point in a single sweep.
    /// Returns the values and whether the point lies outside the box.
    pub fn eval_many(&self, fields: &[&[C64]], point: [f64; 3]) -> (Vec<C64>, bool) {
        let half = self.grid.box_length() / 2.0;
        let wrapped = point.iter().any(|&c| c < -half || c >= half);
        let scale = 1.0 / self.grid.len() as f64;
        let mut acc = vec![C64::default(); fields.len()];
        for &(idx, w) in &self.modes {
            let xi = self.grid.xi_at(idx);
            let phase = xi[0] * point[0] + xi[1] * point[1] + xi[2] * point[2];
            let e = C64::cis(phase) * w;
            for (a, f) in acc.iter_mut().zip(fields) {
                *a += f[idx] * e;
            }
        }
        for a in &mut acc {
            *a *= scale;
        }
        (acc, wrapped)
    }
}

/// Four-component spinor field.
#[derive(Clone)]
pub struct SpinorField {
    grid: Arc<FourierGrid>,
    side: Side,
    comps: [Vec<C64>; 4],
}

impl SpinorField {
    pub fn zeros(grid: &Arc<FourierGrid>, side: Side) -> Self {
        SpinorField {
            grid: grid.clone(),
            side,
            comps: std::array::from_fn(|_| vec![C64::default(); grid.len()]),
        }
    }

    pub fn from_components(
        grid: &Arc<FourierGrid>,
        side: Side,
        comps: [Vec<C64>; 4],
    ) -> Result<Self> {
        for c in &comps {
            if c.len() != grid.len() {
                return Err(MdError::GridMismatch("spinor component length".into()));
            }
        }
        Ok(SpinorField { grid: grid.clone(), side, comps })
    }

    pub fn from_physical_fn(
        grid: &Arc<FourierGrid>,
        f: impl Fn([f64; 3]) -> [C64; 4] + Sync,
    ) -> Self {
        let mut out = Self::zeros(grid, Side::Physical);
        let g = grid.clone();
        out.par_set_from(move |idx| f(g.coord_at(idx)));
        out
    }

    /// Write every point of all four components in parallel from an
    /// index-valued function.
    pub fn par_set_from(&mut self, f: impl Fn(usize) -> [C64; 4] + Sync) {
        let (c0, rest) = self.comps.split_at_mut(1);
        let (c1, rest2) = rest.split_at_mut(1);
        let (c2, c3) = rest2.split_at_mut(1);
        c0[0]
            .par_iter_mut()
            .zip(c1[0].par_iter_mut())
            .zip(c2[0].par_iter_mut())
            .zip(c3[0].par_iter_mut())
            .enumerate()
            .for_each(|(idx, (((a, b), c), d))| {
                let v = f(idx);
                *a = v[0];
                *b = v[1];
                *c = v[2];
                *d = v[3];
            });
    }

    #[inline]
    pub fn grid(&self) -> &Arc<FourierGrid> {
        &self.grid
    }

    #[inline]
    pub fn side(&self) -> Side {
        self.side
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[C64] {
        &self.comps[c]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut Vec<C64> {
        &mut self.comps[c]
    }

    #[inline]
    pub fn value_at(&self, idx: usize) -> [C64; 4] {
        [
            self.comps[0][idx],
            self.comps[1][idx],
            self.comps[2][idx],
            self.comps[3][idx],
        ]
    }

    #[inline]
    pub fn set_value_at(&mut self, idx: usize, v: [C64; 4]) {
        for c in 0..4 {
            self.comps[c][idx] = v[c];
        }
    }

    pub fn require_side(&self, side: Side) -> Result<()> {
        if self.side != side {
            return Err(MdError::contract(format!(
                "spinor is {:?}-side, operation requires {:?}",
                self.side, side
            )));
        }
        Ok(())
    }

    pub fn to_fourier(&self) -> SpinorField {
        match self.side {
            Side::Fourier => self.clone(),
            Side::Physical => {
                let mut out = self.clone();
                for c in &mut out.comps {
                    out.grid.fft().forward(c);
                }
                out.side = Side::Fourier;
                out
            }
        }
    }

    pub fn to_physical(&self) -> SpinorField {
        match self.side {
            Side::Physical => self.clone(),
            Side::Fourier => {
                let mut out = self.clone();
                for c in &mut out.comps {
                    out.grid.fft().inverse(c);
                }
                out.side = Side::Physical;
                out
            }
        }
    }

    pub fn apply_multiplier(&self, m: impl Fn([f64; 3]) -> C64 + Sync) -> Result<SpinorField> {
        self.require_side(Side::Fourier)?;
        let grid = self.grid.clone();
        let mut out = self.clone();
        let zero = grid.zero_mode_index();
        let m0 = m([0.0; 3]);
        let kill_zero = !m0.re.is_finite() || !m0.im.is_finite();
        for c in &mut out.comps {
            c.par_iter_mut().enumerate().for_each(|(idx, v)| {
                *v *= m(grid.xi_at(idx));
            });
            if kill_zero {
                c[zero] = C64::default();
            }
        }
        Ok(out)
    }

    pub fn dealias(&self) -> Result<SpinorField> {
        self.require_side(Side::Fourier)?;
        let mut out = self.clone();
        for c in &mut out.comps {
            dealias_slice(&self.grid, c);
        }
        Ok(out)
    }

    /// Project onto the theta branch: per-mode multiplication by Pi_theta(xi).
    /// Output is on the same side as the input.
    pub fn project(&self, theta: Sign) -> SpinorField {
        let four = self.to_fourier();
        let grid = four.grid.clone();
        let mass = grid.mass();
        let mut out = four.clone();
        out.par_set_from(|idx| project_value(grid.xi_at(idx), theta, mass, &four.value_at(idx)));
        match self.side {
            Side::Fourier => out,
            Side::Physical => out.to_physical(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        let mut s = 0.0;
        for c in &self.comps {
            let sum = det_sum(c, |v| v.norm_sqr());
            s += sum;
        }
        let scale = match self.side {
            Side::Physical => self.grid.cell_volume(),
            Side::Fourier => self.grid.cell_volume() / self.grid.len() as f64,
        };
        (s * scale).sqrt()
    }

    /// Max over points of the 4-component modulus.
    pub fn max_abs(&self) -> f64 {
        let n = self.grid.len();
        (0..n)
            .into_par_iter()
            .map(|idx| {
                let mut s = 0.0;
                for c in 0..4 {
                    s += self.comps[c][idx].norm_sqr();
                }
                s.sqrt()
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn scaled(&self, c: C64) -> SpinorField {
        let mut out = self.clone();
        for comp in &mut out.comps {
            comp.par_iter_mut().for_each(|v| *v *= c);
        }
        out
    }

    pub fn add(&self, rhs: &SpinorField) -> Result<SpinorField> {
        check_same_grid(&self.grid, &rhs.grid)?;
        if self.side != rhs.side {
            return Err(MdError::contract("adding spinors on different sides"));
        }
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().zip(rhs.comps.iter()) {
            a.par_iter_mut().zip(b.par_iter()).for_each(|(x, y)| *x += y);
        }
        Ok(out)
    }

    pub fn sub(&self, rhs: &SpinorField) -> Result<SpinorField> {
        self.add(&rhs.scaled(C64::new(-1.0, 0.0)))
    }

    pub fn component_field(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            side: self.side,
            data: self.comps[c].clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| {
            c.par_iter()
                .all(|v| v.re.is_finite() && v.im.is_finite())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::bracket;
    use rand::{Rng, SeedableRng};

    fn random_scalar(grid: &Arc<FourierGrid>, seed: u64) -> ScalarField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data = (0..grid.len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ScalarField::from_data(grid, Side::Physical, data).unwrap()
    }

    #[test]
    fn roundtrip_and_parseval() {
        let grid = FourierGrid::new(16, 20.0, 1.0).unwrap();
        let f = random_scalar(&grid, 5);
        let fh = f.to_fourier();
        let back = fh.to_physical();
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (a, b) in back.data().iter().zip(f.data()) {
            err += (a - b).norm_sqr();
            scale += b.norm_sqr();
        }
        assert!((err / scale).sqrt() < 1e-12, "roundtrip error");
        let rel = (fh.l2_norm() - f.l2_norm()).abs() / f.l2_norm();
        assert!(rel < 1e-12, "Parseval violated: {rel}");
    }

    #[test]
    fn real_data_is_hermitian_symmetric() {
        let grid = FourierGrid::new(16, 20.0, 1.0).unwrap();
        let f = ScalarField::from_physical_fn(&grid, |x| {
            C64::new((-0.1 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp(), 0.0)
        });
        let asym = f.to_fourier().hermitian_asymmetry().unwrap();
        assert!(asym < 1e-12, "asymmetry {asym}");
    }

    #[test]
    fn multiplier_zero_mode_rules() {
        let grid = FourierGrid::new(8, 10.0, 1.0).unwrap();
        let mut f = ScalarField::zeros(&grid, Side::Fourier);
        f.data_mut()[0] = C64::new(2.0, 0.0);

        // <xi> at 0 is 1 for unit mass: coefficient times 1
        let g = f
            .apply_real_multiplier(|xi| bracket(xi, 1.0))
            .unwrap();
        assert_eq!(g.data()[0], C64::new(2.0, 0.0));

        // |xi|^{-1/2} is singular at 0: zero-mode annihilated
        let g = f
            .apply_real_multiplier(|xi| {
                let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                r.powf(-0.5)
            })
            .unwrap();
        assert_eq!(g.data()[0], C64::default());

        // xi_1/<xi> at (1,0,0) -> 1/sqrt(2)
        let m = |xi: [f64; 3]| xi[0] / bracket(xi, 1.0);
        assert!((m([1.0, 0.0, 0.0]) - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn multiplier_composition_is_product() {
        let grid = FourierGrid::new(8, 10.0, 1.0).unwrap();
        let f = random_scalar(&grid, 9).to_fourier();
        let m1 = |xi: [f64; 3]| C64::new(bracket(xi, 1.0), 0.0);
        let m2 = |xi: [f64; 3]| C64::cis(0.3 * xi[1]);
        let a = f.apply_multiplier(m1).unwrap().apply_multiplier(m2).unwrap();
        let b = f.apply_multiplier(|xi| m1(xi) * m2(xi)).unwrap();
        let scale = b.max_abs();
        for (x, y) in a.data().iter().zip(b.data()) {
            // identical up to one rounding of the complex product
            assert!((x - y).norm() <= 1e-15 * scale, "composition defect {x} vs {y}");
        }
    }

    #[test]
    fn dealias_cases() {
        let grid = FourierGrid::new(8, 10.0, 1.0).unwrap();
        // zero mode passes
        let mut f = ScalarField::zeros(&grid, Side::Fourier);
        f.data_mut()[0] = C64::new(1.0, 0.0);
        let g = f.dealias().unwrap();
        assert_eq!(g.data()[0], C64::new(1.0, 0.0));

        // Nyquist-only field dealiases to zero
        let mut f = ScalarField::zeros(&grid, Side::Fourier);
        let nyq = grid.index(4, 0, 0); // bin 4 on n=8 is m=-4
        f.data_mut()[nyq] = C64::new(1.0, 0.0);
        let g = f.dealias().unwrap();
        assert!(g.data().iter().all(|v| v.norm() == 0.0));

        // band-limited field unchanged
        let mut f = ScalarField::zeros(&grid, Side::Fourier);
        for idx in 0..grid.len() {
            if grid.mode_at(idx).iter().all(|m| m.abs() <= 2) {
                f.data_mut()[idx] = C64::new(idx as f64, 1.0);
            }
        }
        let g = f.dealias().unwrap();
        for (a, b) in g.data().iter().zip(f.data()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn eval_lowpass_constant_and_cutoff() {
        let grid = FourierGrid::new(16, 12.0, 1.0).unwrap();
        // constant field: only the zero mode survives any cutoff
        let c = C64::new(0.7, -0.2);
        let f = ScalarField::from_physical_fn(&grid, |_| c).to_fourier();
        for kcut in [0, 2, -1] {
            let (v, wrapped) = f
                .eval_lowpass_at_point(kcut, [0.83, -2.4, 1.1], 1 << 22)
                .unwrap();
            assert!(!wrapped);
            assert!((v - c).norm() < 1e-12);
        }

        // single high mode beyond the cutoff support evaluates to 0
        let mut f = ScalarField::zeros(&grid, Side::Fourier);
        let idx = grid.index(0, 0, 6); // m = (0,0,6), |xi| = 2 pi 6 / 12 = pi
        f.data_mut()[idx] = C64::new(1.0, 0.0);
        // rho_{<=k} support is |xi| < 2^{k+1}; with k = 0 support ends at 2 < pi
        let (v, _) = f.eval_lowpass_at_point(0, [0.3, 0.4, 0.5], 1 << 22).unwrap();
        assert!(v.norm() < 1e-14);
    }

    #[test]
    fn eval_lowpass_matches_grid_values() {
        // random low-pass field evaluated at lattice points equals the
        // physical-side values of the filtered field
        let grid = FourierGrid::new(16, 12.0, 1.0).unwrap();
        let f = random_scalar(&grid, 33).to_fourier();
        let kcut = 0;
        let bump = crate::lp::DyadicBump::default();
        let filtered = f
            .apply_real_multiplier(|xi| {
                let r = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
                bump.rho_le(kcut, r)
            })
            .unwrap()
            .to_physical();
        for &flat in &[0usize, 77, 1234, grid.len() - 1] {
            let x = grid.coord_at(flat);
            let (v, wrapped) = f.eval_lowpass_at_point(kcut, x, 1 << 22).unwrap();
            assert!(!wrapped);
            assert!(
                (v - filtered.data()[flat]).norm() < 1e-10,
                "mismatch at {flat}: {v} vs {}",
                filtered.data()[flat]
            );
        }
    }

    #[test]
    fn eval_lowpass_budget_error() {
        let grid = FourierGrid::new(16, 12.0, 1.0).unwrap();
        let f = ScalarField::zeros(&grid, Side::Fourier);
        let err = f.eval_lowpass_at_point(5, [0.0; 3], 10).unwrap_err();
        match err {
            MdError::Budget { retained, budget } => {
                assert!(retained > budget);
            }
            other => panic!("expected budget error, got {other}"),
        }
    }

    #[test]
    fn eval_lowpass_flags_wrapped_points() {
        let grid = FourierGrid::new(8, 10.0, 1.0).unwrap();
        let f = ScalarField::from_physical_fn(&grid, |_| C64::new(1.0, 0.0)).to_fourier();
        let (_, wrapped) = f.eval_lowpass_at_point(0, [6.0, 0.0, 0.0], 1 << 22).unwrap();
        assert!(wrapped);
    }

    #[test]
    fn spinor_projection_identities() {
        let grid = FourierGrid::new(8, 10.0, 1.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut psi = SpinorField::zeros(&grid, Side::Fourier);
        for c in 0..4 {
            for v in psi.component_mut(c).iter_mut() {
                *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let pp = psi.project(Sign::Plus);
        let pm = psi.project(Sign::Minus);
        // completeness: psi = Pi+ psi + Pi- psi exactly
        let sum = pp.add(&pm).unwrap();
        for c in 0..4 {
            for (a, b) in sum.component(c).iter().zip(psi.component(c)) {
                assert!((a - b).norm() < 1e-13);
            }
        }
        // Pythagoras for orthogonal projections
        let total = psi.l2_norm().powi(2);
        let split = pp.l2_norm().powi(2) + pm.l2_norm().powi(2);
        assert!((total - split).abs() / total < 1e-12);
        // idempotence
        let ppp = pp.project(Sign::Plus);
        for c in 0..4 {
            for (a, b) in ppp.component(c).iter().zip(pp.component(c)) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spinor_zero_mode_projection() {
        // single zero mode with components (1,0,0,0): eigenvector of beta,
        // retained by Pi+ and annihilated by Pi-.
        let grid = FourierGrid::new(8, 10.0, 1.0).unwrap();
        let mut psi = SpinorField::zeros(&grid, Side::Fourier);
        psi.component_mut(0)[0] = C64::new(1.0, 0.0);
        let pp = psi.project(Sign::Plus);
        let pm = psi.project(Sign::Minus);
        assert!((pp.component(0)[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(pm.l2_norm() < 1e-15);
    }
}
