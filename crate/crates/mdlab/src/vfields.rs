//! Rotation and Lorentz-boost vector fields applied to simulation fields,
//! and the numerical verification of their commutators with the projections
//! and of the weight-generation identities.
//!
//! x-multiplication on the torus is faithful only for interior-supported
//! fields; every operation reports the boundary-support fraction, and the
//! residual tests require margin >= L/8.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dirac::{
    boost_commutator_symbol, bracket, rotation_commutator_symbol, Sign,
};
use crate::error::MdError;
use crate::evolve::nonlinearity_dirac_hat;
use crate::field::{ScalarField, Side, SpinorField};
use crate::grid::FourierGrid;
use crate::state::{abs_xi, current, HalfWaveView, MDState};
use crate::Result;
use std::sync::Arc;

/// Generator tags; rotations are labeled by their axis pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VectorFieldTag {
    /// d_mu, mu = 0..3 (0 is the on-shell time derivative).
    D(usize),
    /// Omega_{jk}, (j, k) in {(1,2), (2,3), (3,1)} stored 0-indexed.
    Omega(usize, usize),
    /// Gamma_j, j stored 0-indexed.
    Gamma(usize),
}

/// An ordered composition of generators (applied right-to-left, matching
/// operator notation). Order matters; the fields do not commute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Composition(pub Vec<VectorFieldTag>);

impl Composition {
    pub fn order(&self) -> usize {
        self.0.len()
    }
}

/// Field with its boundary-support diagnostic.
pub struct FieldWithSupport<F> {
    pub field: F,
    pub boundary_fraction: f64,
}

fn d_axis_scalar(f: &ScalarField, axis: usize) -> Result<ScalarField> {
    let four = f.to_fourier();
    let out = four.apply_multiplier(move |xi| C64::i() * xi[axis])?;
    Ok(match f.side() {
        Side::Fourier => out,
        Side::Physical => out.to_physical(),
    })
}

fn d_axis_spinor(f: &SpinorField, axis: usize) -> Result<SpinorField> {
    let four = f.to_fourier();
    let out = four.apply_multiplier(move |xi| C64::i() * xi[axis])?;
    Ok(match f.side() {
        Side::Fourier => out,
        Side::Physical => out.to_physical(),
    })
}

fn x_mul_spinor(f: &SpinorField, axis: usize) -> Result<SpinorField> {
    let phys = f.to_physical();
    let grid = phys.grid().clone();
    let mut out = phys.clone();
    for c in 0..4 {
        out.component_mut(c)
            .par_iter_mut()
            .enumerate()
            .for_each(|(idx, v)| {
                *v *= grid.coord_at(idx)[axis];
            });
    }
    Ok(match f.side() {
        Side::Fourier => out.to_fourier(),
        Side::Physical => out,
    })
}

fn boundary_fraction_spinor(f: &SpinorField) -> Result<f64> {
    let phys = f.to_physical();
    let margin = f.grid().box_length() / 8.0;
    let mut worst = 0.0f64;
    for c in 0..4 {
        worst = worst.max(phys.component_field(c).boundary_mass_fraction(margin)?);
    }
    Ok(worst)
}

/// Rotation Omega_{jk} = x_j d_k - x_k d_j on a scalar field; derivatives are
/// spectral, coordinates are box-centered.
pub fn apply_rotation(
    f: &ScalarField,
    j: usize,
    k: usize,
) -> Result<FieldWithSupport<ScalarField>> {
    if j > 2 || k > 2 || j == k {
        return Err(MdError::domain("rotation axes must be a distinct pair in 0..3"));
    }
    let phys = f.to_physical();
    let boundary = phys.boundary_mass_fraction(f.grid().box_length() / 8.0)?;
    let dk = d_axis_scalar(&phys, k)?;
    let dj = d_axis_scalar(&phys, j)?;
    let term1 = dk.mul_coordinate(j)?;
    let term2 = dj.mul_coordinate(k)?;
    let out = term1.sub(&term2)?;
    let field = match f.side() {
        Side::Physical => out,
        Side::Fourier => out.to_fourier(),
    };
    Ok(FieldWithSupport { field, boundary_fraction: boundary })
}

/// Rotation on a spinor field (componentwise).
pub fn apply_rotation_spinor(
    f: &SpinorField,
    j: usize,
    k: usize,
) -> Result<FieldWithSupport<SpinorField>> {
    if j > 2 || k > 2 || j == k {
        return Err(MdError::domain("rotation axes must be a distinct pair in 0..3"));
    }
    let phys = f.to_physical();
    let boundary = boundary_fraction_spinor(&phys)?;
    let dk = d_axis_spinor(&phys, k)?;
    let dj = d_axis_spinor(&phys, j)?;
    let t1 = x_mul_spinor(&dk, j)?;
    let t2 = x_mul_spinor(&dj, k)?;
    let out = t1.sub(&t2)?;
    let field = match f.side() {
        Side::Physical => out,
        Side::Fourier => out.to_fourier(),
    };
    Ok(FieldWithSupport { field, boundary_fraction: boundary })
}

/// On-shell time derivative of psi:
/// d_t psi = -i (alpha.D + m beta) psi + i A_mu alpha^mu psi.
pub fn psi_time_derivative(state: &MDState) -> Result<SpinorField> {
    let grid = state.grid().clone();
    let mass = grid.mass();
    let psi_hat = state.psi.to_fourier();
    // free part: -i H psi with symbol H = alpha.xi + m beta
    let mut free = SpinorField::zeros(&grid, Side::Fourier);
    {
        let g = grid.clone();
        free.par_set_from(|idx| {
            let xi = g.xi_at(idx);
            let u = psi_hat.value_at(idx);
            // (alpha.xi + m beta) u via the block structure
            let sxi = |a: C64, b: C64| -> [C64; 2] {
                [
                    C64::new(xi[2], 0.0) * a + C64::new(xi[0], -xi[1]) * b,
                    C64::new(xi[0], xi[1]) * a - C64::new(xi[2], 0.0) * b,
                ]
            };
            let up = sxi(u[2], u[3]);
            let lo = sxi(u[0], u[1]);
            let h = [
                up[0] + mass * u[0],
                up[1] + mass * u[1],
                lo[0] - mass * u[2],
                lo[1] - mass * u[3],
            ];
            std::array::from_fn(|c| -C64::i() * h[c])
        });
    }
    let nonlinear = nonlinearity_dirac_hat(state, true)?;
    let dpsi = free.add(&nonlinear.apply_multiplier(|_| C64::i())?)?;
    Ok(dpsi)
}

/// Lorentz boost Gamma_j = t d_j + x_j d_t applied to psi (with the on-shell
/// time derivative) and to each A_mu (with the stored d_t A_mu).
pub fn apply_boost(
    state: &MDState,
    j: usize,
) -> Result<(FieldWithSupport<SpinorField>, [FieldWithSupport<ScalarField>; 4])> {
    if j > 2 {
        return Err(MdError::domain("boost axis must be in 0..3"));
    }
    let t = state.t;
    let dpsi_dt = psi_time_derivative(state)?.to_physical();
    let psi_phys = state.psi.to_physical();
    let boundary_psi = boundary_fraction_spinor(&psi_phys)?;
    let mut gamma_psi = d_axis_spinor(&psi_phys, j)?.scaled(C64::new(t, 0.0));
    gamma_psi = gamma_psi.add(&x_mul_spinor(&dpsi_dt, j)?)?;
    let psi_out = FieldWithSupport {
        field: gamma_psi.to_fourier(),
        boundary_fraction: boundary_psi,
    };

    let a_out: [FieldWithSupport<ScalarField>; 4] = std::array::from_fn(|mu| {
        let a_phys = state.a[mu].to_physical();
        let boundary = a_phys
            .boundary_mass_fraction(state.grid().box_length() / 8.0)
            .unwrap_or(1.0);
        let term1 = d_axis_scalar(&a_phys, j)
            .expect("spectral derivative")
            .scaled(C64::new(t, 0.0));
        let term2 = state.adot[mu]
            .to_physical()
            .mul_coordinate(j)
            .expect("coordinate multiply");
        let field = term1.add(&term2).expect("same grid").to_fourier();
        FieldWithSupport { field, boundary_fraction: boundary }
    });
    Ok((psi_out, a_out))
}

/// Apply a composition of rotation / spatial-derivative generators to a
/// spinor. `Gamma` and `d_t` tags are only allowed in the rightmost
/// (innermost, applied-first) slot, where the on-shell state supplies the
/// time derivative.
pub fn apply_composition_spinor(
    state: &MDState,
    comp: &Composition,
) -> Result<SpinorField> {
    let mut tags = comp.0.clone();
    let mut field = state.psi.clone();
    if let Some(last) = tags.pop() {
        field = match last {
            VectorFieldTag::D(0) => psi_time_derivative(state)?,
            VectorFieldTag::D(mu) => d_axis_spinor(&state.psi, mu - 1)?,
            VectorFieldTag::Omega(j, k) => apply_rotation_spinor(&state.psi, j, k)?.field,
            VectorFieldTag::Gamma(j) => apply_boost(state, j)?.0.field,
        };
    }
    for tag in tags.into_iter().rev() {
        field = match tag {
            VectorFieldTag::D(0) => {
                return Err(MdError::domain(
                    "d_t is only supported as the innermost generator of a composition",
                ))
            }
            VectorFieldTag::D(mu) => d_axis_spinor(&field, mu - 1)?,
            VectorFieldTag::Omega(j, k) => apply_rotation_spinor(&field, j, k)?.field,
            VectorFieldTag::Gamma(_) => {
                return Err(MdError::domain(
                    "Gamma is only supported as the innermost generator of a composition",
                ))
            }
        };
    }
    Ok(field)
}

#[derive(Debug, Clone, Serialize)]
pub struct CommutatorReport {
    /// ||[Omega_{jk}, Pi_theta] psi - symbol psi|| / ||psi||, worst pair/sign.
    pub rotation_residual: f64,
    /// Boost analogue with on-shell d_t.
    pub boost_residual: f64,
    /// Weight identity for the Dirac part, relative to ||Gamma_j psi_theta||
    /// (the size of the quantity the identity reproduces).
    pub weight_dirac_residual: f64,
    /// Weight identity for the wave part, relative to ||Gamma_j W||.
    pub weight_wave_residual: f64,
    /// ||[Omega, <D>] psi|| / ||psi||.
    pub rotation_bracket_residual: f64,
    pub boundary_fraction: f64,
}

impl CommutatorReport {
    pub fn max(&self) -> f64 {
        self.rotation_residual
            .max(self.boost_residual)
            .max(self.weight_dirac_residual)
            .max(self.weight_wave_residual)
    }
}

const ROTATION_PAIRS: [(usize, usize); 3] = [(1, 2), (2, 0), (0, 1)];

/// Two-path verification of the commutator and weight identities on a state.
/// The spinor should be band-limited and interior-supported for the
/// x-multiplications to be faithful.
pub fn check_commutators(state: &MDState) -> Result<CommutatorReport> {
    let grid = state.grid().clone();
    let mass = grid.mass();
    let psi = &state.psi;
    let psi_norm = psi.l2_norm().max(1e-300);
    let boundary = boundary_fraction_spinor(&psi.to_physical())?;

    // rotations: Omega(Pi psi) - Pi(Omega psi) vs multiplier symbol
    let mut rot_res = 0.0f64;
    for th in Sign::BOTH {
        let proj = psi.project(th);
        for &(j, k) in &ROTATION_PAIRS {
            let path_a = apply_rotation_spinor(&proj, j, k)?
                .field
                .sub(&apply_rotation_spinor(psi, j, k)?.field.project(th))?;
            let g = grid.clone();
            let psi_hat = psi.to_fourier();
            let mut path_b = SpinorField::zeros(&grid, Side::Fourier);
            path_b.par_set_from(|idx| {
                let m = rotation_commutator_symbol(g.xi_at(idx), th, j, k, mass);
                m.apply(&psi_hat.value_at(idx))
            });
            let res = path_a.sub(&path_b)?.l2_norm() / psi_norm;
            rot_res = rot_res.max(res);
        }
    }

    // boosts: Gamma_j(Pi psi) - Pi(Gamma_j psi) vs boost symbol applied to
    // the on-shell d_t psi
    let dpsi_dt = psi_time_derivative(state)?;
    let mut boost_res = 0.0f64;
    let t = state.t;
    for th in Sign::BOTH {
        let proj = psi.project(th);
        let dproj_dt = dpsi_dt.project(th);
        for j in 0..3 {
            // Gamma_j on a field g with time derivative gdot:
            // t d_j g + x_j gdot
            let gamma_of = |g: &SpinorField, gdot: &SpinorField| -> Result<SpinorField> {
                let a = d_axis_spinor(&g.to_physical(), j)?.scaled(C64::new(t, 0.0));
                let b = x_mul_spinor(&gdot.to_physical(), j)?;
                Ok(a.add(&b)?.to_fourier())
            };
            let path_a = gamma_of(&proj, &dproj_dt)?
                .sub(&gamma_of(psi, &dpsi_dt)?.project(th))?;
            let g = grid.clone();
            let dpsi_hat = dpsi_dt.to_fourier();
            let mut path_b = SpinorField::zeros(&grid, Side::Fourier);
            path_b.par_set_from(|idx| {
                let m = boost_commutator_symbol(g.xi_at(idx), th, j, mass);
                m.apply(&dpsi_hat.value_at(idx))
            });
            let res = path_a.sub(&path_b)?.l2_norm() / psi_norm;
            boost_res = boost_res.max(res);
        }
    }

    // weight identity, Dirac part:
    // Gamma_j psi_theta = -theta i e^{-theta i t <D>} x_j (<D> phi_theta)
    //                    + i x_j Pi_theta(A_mu alpha^mu psi)
    let view = HalfWaveView::of(state)?;
    let nl_hat = nonlinearity_dirac_hat(state, true)?;
    let mut weight_dirac = 0.0f64;
    for (i, th) in Sign::BOTH.iter().enumerate() {
        let thf = th.as_f64();
        let psi_th = &view.psi_theta[i];
        // d_t psi_theta = -i theta <D> psi_theta + i Pi_theta N
        let dpsi_th = psi_th
            .apply_multiplier(|xi| -C64::i() * thf * bracket(xi, mass))?
            .add(&nl_hat.project(*th).apply_multiplier(|_| C64::i())?)?;
        for j in 0..3 {
            let lhs = {
                let a = d_axis_spinor(&psi_th.to_physical(), j)?.scaled(C64::new(t, 0.0));
                let b = x_mul_spinor(&dpsi_th.to_physical(), j)?;
                a.add(&b)?.to_fourier()
            };
            let rhs = {
                let weighted = view.phi[i].apply_multiplier(|xi| {
                    C64::new(bracket(xi, mass), 0.0)
                })?;
                let xw = x_mul_spinor(&weighted.to_physical(), j)?.to_fourier();
                let pulled = xw.apply_multiplier(|xi| {
                    C64::cis(-thf * t * bracket(xi, mass)) * (-C64::i() * thf)
                })?;
                let nonlin = x_mul_spinor(&nl_hat.project(*th).to_physical(), j)?
                    .to_fourier()
                    .apply_multiplier(|_| C64::i())?;
                pulled.add(&nonlin)?
            };
            let res = lhs.sub(&rhs)?.l2_norm() / lhs.l2_norm().max(1e-300);
            weight_dirac = weight_dirac.max(res);
        }
    }

    // weight identity, wave part:
    // Gamma_j W_{mu,theta'} = theta' i e^{theta' i t |D|} x_j (|D| V)
    //                        - theta' (i/2) x_j |D|^{-1/2} J_mu
    let j_fields = current(&state.psi.to_physical())?;
    let mut weight_wave = 0.0f64;
    for mu in 0..4 {
        let j_half = j_fields[mu].to_fourier().dealias()?.apply_real_multiplier(|xi| {
            let r = abs_xi(xi);
            if r == 0.0 {
                f64::INFINITY
            } else {
                r.powf(-0.5)
            }
        })?;
        for (si, th) in Sign::BOTH.iter().enumerate() {
            let thf = th.as_f64();
            let w = &view.w[mu][si];
            let w_norm = w.l2_norm();
            if w_norm < 1e-14 {
                continue;
            }
            // d_t W = i theta' |D| W - i theta' (1/2) |D|^{-1/2} J
            let dw = w
                .apply_multiplier(|xi| C64::i() * thf * abs_xi(xi))?
                .add(&j_half.apply_multiplier(|_| -C64::i() * thf * 0.5)?)?;
            for j in 0..3 {
                let lhs = {
                    let a = d_axis_scalar(&w.to_physical(), j)?.scaled(C64::new(t, 0.0));
                    let b = dw.to_physical().mul_coordinate(j)?;
                    a.add(&b)?.to_fourier()
                };
                let rhs = {
                    let dv = view.v[mu][si]
                        .apply_real_multiplier(abs_xi)?;
                    let xw = dv.to_physical().mul_coordinate(j)?.to_fourier();
                    let pulled = xw.apply_multiplier(|xi| {
                        C64::cis(thf * t * abs_xi(xi)) * (C64::i() * thf)
                    })?;
                    let nl = j_half
                        .to_physical()
                        .mul_coordinate(j)?
                        .to_fourier()
                        .apply_multiplier(|_| -C64::i() * thf * 0.5)?;
                    pulled.add(&nl)?
                };
                let res = lhs.sub(&rhs)?.l2_norm() / lhs.l2_norm().max(1e-300);
                weight_wave = weight_wave.max(res);
            }
        }
    }

    // [Omega, <D>] on band-limited fields
    let rot_bracket = rotation_bracket_residual(psi)?;

    Ok(CommutatorReport {
        rotation_residual: rot_res,
        boost_residual: boost_res,
        weight_dirac_residual: weight_dirac,
        weight_wave_residual: weight_wave,
        rotation_bracket_residual: rot_bracket,
        boundary_fraction: boundary,
    })
}

/// Worst relative residual of [Omega_{jk}, <D>] psi over the three rotation
/// pairs; rotations commute with radial multipliers.
///
/// The difference is restricted to the field's own frequency support before
/// taking the norm: the exact commutator output is band-limited (coordinate
/// multiplication is a xi-derivative in frequency), so content outside the
/// band is x-multiplication artifact, and in the second path it would be
/// amplified by <xi> up to the lattice corners.
pub fn rotation_bracket_residual(psi: &SpinorField) -> Result<f64> {
    let grid = psi.grid().clone();
    let mass = grid.mass();
    let psi_norm = psi.l2_norm().max(1e-300);
    let psi_hat = psi.to_fourier();
    let support: Vec<bool> = (0..grid.len())
        .map(|idx| (0..4).any(|c| psi_hat.component(c)[idx] != C64::default()))
        .collect();
    let bracket_psi = psi.apply_multiplier(|xi| C64::new(bracket(xi, mass), 0.0))?;
    let mut worst = 0.0f64;
    for &(j, k) in &ROTATION_PAIRS {
        let a = apply_rotation_spinor(&bracket_psi, j, k)?.field;
        let b = apply_rotation_spinor(psi, j, k)?
            .field
            .apply_multiplier(|xi| C64::new(bracket(xi, mass), 0.0))?;
        let mut d = a.sub(&b)?.to_fourier();
        for c in 0..4 {
            d.component_mut(c)
                .par_iter_mut()
                .enumerate()
                .for_each(|(idx, v)| {
                    if !support[idx] {
                        *v = C64::default();
                    }
                });
        }
        worst = worst.max(d.l2_norm() / psi_norm);
    }
    Ok(worst)
}

/// Modified Bessel function I_0 by its power series; adequate for the
/// window arguments used here.
fn bessel_i0(x: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let q = x * x / 4.0;
    for k in 1..80 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Band-limited, interior-supported spinor test field: a separable per-axis
/// Kaiser window over the |m_j| <= n/4 cube, with mild in-band modulations
/// that differ per component.
///
/// The Kaiser shape concentrates the field inside the margin
/// (main lobe ~ beta / band) while keeping the seam values minimal for the
/// available band-times-margin product, which is what the x-multiplication
/// fidelity of the two-path residual tests lives off.
pub fn bandlimited_test_spinor(grid: &Arc<FourierGrid>, seed: u64) -> SpinorField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    // per-component modulation directions and offsets, O(1) across the band
    let offsets: [[f64; 2]; 4] = std::array::from_fn(|_| {
        [rng.gen_range(0.3..1.0), rng.gen_range(-0.5..0.5)]
    });
    let band = grid.xi_max_axis() / 2.0;
    // main lobe beta/band just inside the 3L/8 interior radius
    let beta = 0.977 * band * 3.0 * grid.box_length() / 8.0;
    let i0b = bessel_i0(beta);
    let window = move |xi: f64| -> f64 {
        let r2 = xi * xi / (band * band);
        if r2 >= 1.0 {
            0.0
        } else {
            bessel_i0(beta * (1.0 - r2).sqrt()) / i0b
        }
    };
    let cut = grid.n() as i64 / 4;
    let g = grid.clone();
    let mut out = SpinorField::zeros(grid, Side::Fourier);
    out.par_set_from(|idx| {
        let m = g.mode_at(idx);
        if m.iter().any(|mm| mm.abs() > cut) {
            return [C64::default(); 4];
        }
        let xi = g.xi_at(idx);
        let p = window(xi[0]) * window(xi[1]) * window(xi[2]);
        std::array::from_fn(|c| {
            let axis = c % 3;
            let modulation = 0.3 * xi[axis] / band;
            p * C64::new(offsets[c][0] + modulation, offsets[c][1])
        })
    });
    out
}

/// Coupled state for the weight-identity checks: window spinor plus smooth
/// real gauge data vanishing as |xi|^8 at the origin. The polynomial
/// vanishing keeps W = |D|^{1/2} A regular across the |xi|^{1/2} origin
/// kink, whose slow spatial tails would otherwise defeat x-multiplication
/// on the torus; the identities hold for any consistent (psi, A, Adot), so
/// constrained data is not required. The state's small time keeps the
/// t-linear torus artifact of the wave propagator's cone kink subdominant.
pub fn weight_identity_state(g: &Arc<FourierGrid>, eps: f64) -> Result<MDState> {
    use rand::{Rng, SeedableRng};
    let mut st = MDState::vacuum(g);
    st.psi = bandlimited_test_spinor(g, 5).scaled(C64::new(eps, 0.0));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let width = 3.0 * g.box_length() / 40.0;
    for mu in 0..4 {
        for (field, amp) in [(&mut st.a[mu], eps * eps), (&mut st.adot[mu], 0.5 * eps * eps)] {
            let c0: f64 = rng.gen_range(0.5..1.0);
            let c1: f64 = rng.gen_range(-0.4..0.4);
            let phys = ScalarField::from_physical_fn(g, |x| {
                let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
                let env = (-r2 / (2.0 * width * width)).exp();
                C64::new(amp * (c0 * (0.3 * x[0]).cos() + c1 * (0.2 * x[1]).sin()) * env, 0.0)
            });
            *field = phys.to_fourier().apply_real_multiplier(|xi| {
                let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                r2 * r2 * r2 * r2
            })?;
        }
    }
    st.t = 0.01;
    Ok(st)
}
