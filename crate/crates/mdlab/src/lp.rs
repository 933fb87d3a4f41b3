//! Littlewood-Paley machinery: the dyadic bump, shell multipliers and
//! projections `P_k` / `P_{<=k}` / `P_{>k}` / widened `P~_k`, the phase-space
//! index sets, and the spatial localizers `Q_{jk}`.
//!
//! The bump profile is fixed so norms are reproducible bit-for-bit across
//! implementations:
//!
//! ```text
//! rho(r) = sigma(2 - r),   sigma(u) = exp(-1/u) / (exp(-1/u) + exp(-1/(1-u)))
//! ```
//!
//! with sigma clamped to 0 for u <= 0 and 1 for u >= 1. This gives rho = 1 on
//! r <= 1 and support in r < 2. Derived quantities:
//! `rho_k(r) = rho(r/2^k) - rho(r/2^{k-1})`, `rho_{<=k}(r) = rho(r/2^k)`
//! (which keeps the zero mode in every low-pass), and the widened shell
//! `rho~_k = rho_{<=k+2} - rho_{<=k-3}`.


use crate::error::MdError;
use crate::field::{ScalarField, Side, SpinorField};
use crate::grid::FourierGrid;
use crate::Result;

/// Smooth dyadic bump with the fixed mollified-step profile.
#[derive(Debug, Clone, Copy, Default)]
pub struct DyadicBump;

impl DyadicBump {
    /// sigma(u): smooth monotone step from 0 at u <= 0 to 1 at u >= 1.
    #[inline]
    pub fn sigma(u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else if u >= 1.0 {
            1.0
        } else {
            let a = (-1.0 / u).exp();
            let b = (-1.0 / (1.0 - u)).exp();
            a / (a + b)
        }
    }

    /// rho(r): 1 on r <= 1, smooth, supported in r < 2.
    #[inline]
    pub fn rho(&self, r: f64) -> f64 {
        Self::sigma(2.0 - r)
    }

    /// Shell rho_k(r), supported in 2^{k-1} <= r <= 2^{k+1}.
    #[inline]
    pub fn rho_k(&self, k: i32, r: f64) -> f64 {
        self.rho(r / pow2(k)) - self.rho(r / pow2(k - 1))
    }

    /// Low-pass rho_{<=k}(r) = rho(r / 2^k); equals 1 at r = 0.
    #[inline]
    pub fn rho_le(&self, k: i32, r: f64) -> f64 {
        self.rho(r / pow2(k))
    }

    /// High-pass rho_{>k} = 1 - rho_{<=k}.
    #[inline]
    pub fn rho_gt(&self, k: i32, r: f64) -> f64 {
        1.0 - self.rho_le(k, r)
    }

    /// Widened shell rho~_k = rho_{[k-2, k+2]}.
    #[inline]
    pub fn rho_wide(&self, k: i32, r: f64) -> f64 {
        self.rho_le(k + 2, r) - self.rho_le(k - 3, r)
    }
}

#[inline]
fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

#[inline]
fn radius(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Result of a shell projection; `in_range` is false when the requested k is
/// outside the grid's representable dyadic range (the field is then zero).
pub struct ShellProjection<F> {
    pub field: F,
    pub in_range: bool,
}

/// The index set U_k and the spatial cutoffs for phase-space localization.
///
/// `U_k = { j : j >= -min(k, 0) }`, truncated above at the box's largest
/// spatial dyadic index. The lowest j uses the cumulative cutoff
/// `rho_{<= j_min}(|x|)`, higher j use the shell `rho_j(|x|)`; |x| is the
/// distance to the box center.
#[derive(Debug, Clone, Copy)]
pub struct PhaseSpaceIndexSet {
    pub k: i32,
    pub j_min: i32,
    pub j_max: i32,
}

impl PhaseSpaceIndexSet {
    pub fn new(grid: &FourierGrid, k: i32) -> Self {
        PhaseSpaceIndexSet {
            k,
            j_min: (-k).max(0),
            j_max: grid.spatial_j_max().max((-k).max(0)),
        }
    }

    pub fn contains(&self, j: i32) -> bool {
        j >= self.j_min && j <= self.j_max
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    /// Spatial cutoff rho-bar_j^{(k)} at distance r from the box center.
    pub fn spatial_cutoff(&self, j: i32, r: f64) -> f64 {
        let bump = DyadicBump;
        if j == self.j_min {
            bump.rho_le(self.j_min, r)
        } else {
            bump.rho_k(j, r)
        }
    }
}

/// Shell projection P_k; output on the same side as the input.
pub fn project_shell(f: &ScalarField, k: i32) -> Result<ShellProjection<ScalarField>> {
    let (k_min, k_max) = f.grid().dyadic_range();
    let in_range = k >= k_min && k <= k_max;
    if !in_range {
        return Ok(ShellProjection {
            field: ScalarField::zeros(f.grid(), f.side()),
            in_range,
        });
    }
    let bump = DyadicBump;
    let four = f.to_fourier();
    let out = four.apply_real_multiplier(|xi| bump.rho_k(k, radius(xi)))?;
    let field = match f.side() {
        Side::Fourier => out,
        Side::Physical => out.to_physical(),
    };
    Ok(ShellProjection { field, in_range })
}

/// Low-pass projection P_{<=k}.
pub fn project_le(f: &ScalarField, k: i32) -> Result<ScalarField> {
    let bump = DyadicBump;
    let four = f.to_fourier();
    let out = four.apply_real_multiplier(|xi| bump.rho_le(k, radius(xi)))?;
    Ok(match f.side() {
        Side::Fourier => out,
        Side::Physical => out.to_physical(),
    })
}

/// High-pass projection P_{>k}.
pub fn project_gt(f: &ScalarField, k: i32) -> Result<ScalarField> {
    let bump = DyadicBump;
    let four = f.to_fourier();
    let out = four.apply_real_multiplier(|xi| bump.rho_gt(k, radius(xi)))?;
    Ok(match f.side() {
        Side::Fourier => out,
        Side::Physical => out.to_physical(),
    })
}

/// Widened shell projection P~_k.
pub fn project_wide(f: &ScalarField, k: i32) -> Result<ScalarField> {
    let bump = DyadicBump;
    let four = f.to_fourier();
    let out = four.apply_real_multiplier(|xi| bump.rho_wide(k, radius(xi)))?;
    Ok(match f.side() {
        Side::Fourier => out,
        Side::Physical => out.to_physical(),
    })
}

/// Spinor shell projection (componentwise P_k).
pub fn project_shell_spinor(f: &SpinorField, k: i32) -> Result<ShellProjection<SpinorField>> {
    let (k_min, k_max) = f.grid().dyadic_range();
    let in_range = k >= k_min && k <= k_max;
    if !in_range {
        return Ok(ShellProjection {
            field: SpinorField::zeros(f.grid(), f.side()),
            in_range,
        });
    }
    let bump = DyadicBump;
    let four = f.to_fourier();
    let out = four.apply_multiplier(|xi| num_complex::Complex64::new(bump.rho_k(k, radius(xi)), 0.0))?;
    let field = match f.side() {
        Side::Fourier => out,
        Side::Physical => out.to_physical(),
    };
    Ok(ShellProjection { field, in_range })
}

/// Phase-space localizer Q_{jk} f = rho-bar_j^{(k)}(x) (P_k f)(x).
/// Output is physical-side. Errors if j is not in U_k.
pub fn localize_qjk(f: &ScalarField, j: i32, k: i32) -> Result<ScalarField> {
    let set = PhaseSpaceIndexSet::new(f.grid(), k);
    if !set.contains(j) {
        return Err(MdError::domain(format!(
            "j = {j} not in U_k for k = {k} (range {}..={})",
            set.j_min, set.j_max
        )));
    }
    let shell = project_shell(f, k)?.field.to_physical();
    apply_spatial_cutoff(&shell, &set, j)
}

fn apply_spatial_cutoff(
    shell: &ScalarField,
    set: &PhaseSpaceIndexSet,
    j: i32,
) -> Result<ScalarField> {
    let grid = shell.grid().clone();
    let mut out = shell.clone();
    use rayon::prelude::*;
    out.data_mut().par_iter_mut().enumerate().for_each(|(idx, v)| {
        let r = radius(grid.coord_at(idx));
        *v *= set.spatial_cutoff(j, r);
    });
    Ok(out)
}

/// L2 norms of every Q_{jk} f over j in U_k, computed with a single shell
/// projection. Returns (j, norm) pairs in increasing j.
pub fn qjk_norms(f: &ScalarField, k: i32) -> Result<Vec<(i32, f64)>> {
    let set = PhaseSpaceIndexSet::new(f.grid(), k);
    let shell = project_shell(f, k)?.field.to_physical();
    let grid = shell.grid().clone();
    let h3 = grid.cell_volume();
    let mut out = Vec::new();
    for j in set.iter() {
        let idxs: Vec<usize> = (0..grid.len()).collect();
        let sum = crate::field::det_sum(&idxs, |&idx| {
            let r = radius(grid.coord_at(idx));
            let w = set.spatial_cutoff(j, r);
            if w == 0.0 {
                0.0
            } else {
                (shell.data()[idx] * w).norm_sqr()
            }
        });
        out.push((j, (sum * h3).sqrt()));
    }
    Ok(out)
}
