//! Time integration of the coupled half-Klein-Gordon / half-wave system in
//! profile variables, where the stiff linear flow is an exact per-mode phase
//! and the integrator only sees the pulled-back nonlinearity:
//!
//! ```text
//! d/dt phi_theta      = i e^{theta i t <D>} Pi_theta (A_mu alpha^mu psi)
//! d/dt V_{mu,theta'}  = -theta' (i/2) e^{-theta' i t |D|} |D|^{-1/2} J_mu
//! d^2/dt^2 A-hat_mu(0) = J-hat_mu(0)            (zero-mode ODE registers)
//! ```
//!
//! The default scheme is classical RK4 on this system (integrating-factor
//! RK4); Strang-2 splitting is kept as a cross-check. Products are computed
//! unsplit (full A times full psi) and projected afterwards, which is
//! algebraically identical to the per-sign-pair sums.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::dirac::{bracket, Sign};
use crate::error::MdError;
use crate::field::{ScalarField, Side, SpinorField};
use crate::grid::FourierGrid;
use crate::state::{abs_xi, current, HalfWaveView, MDState};
use crate::Result;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    IfRk4,
    Strang2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Coupling {
    Full,
    /// Test hook: both nonlinearities switched off; profiles are constant and
    /// the zero-mode registers evolve by their free linear law.
    Off,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    pub coupling: Coupling,
    /// Horizon guard t_max; steps past it are flagged, not rejected.
    pub horizon: Option<f64>,
}

impl IntegratorConfig {
    /// Default step 0.1 * 2 pi / <xi>_max; accuracy-motivated (the
    /// exponential integrator has no stability limit here).
    pub fn auto_dt(grid: &FourierGrid) -> f64 {
        let br_max = (grid.mass() * grid.mass()
            + grid.xi_max_lattice() * grid.xi_max_lattice())
        .sqrt();
        0.1 * 2.0 * std::f64::consts::PI / br_max
    }

    pub fn defaults(grid: &FourierGrid) -> Self {
        IntegratorConfig {
            dt: Self::auto_dt(grid),
            scheme: Scheme::IfRk4,
            dealias: true,
            coupling: Coupling::Full,
            horizon: None,
        }
    }
}

/// Integrator state: profiles plus zero-mode registers.
#[derive(Clone)]
pub struct ProfileState {
    pub t: f64,
    pub phi: [SpinorField; 2],
    pub v: [[ScalarField; 2]; 4],
    /// (A-hat_mu(0), d/dt A-hat_mu(0)), real.
    pub reg: [[f64; 2]; 4],
}

impl ProfileState {
    pub fn grid(&self) -> &Arc<FourierGrid> {
        self.phi[0].grid()
    }

    pub fn from_md(state: &MDState) -> Result<Self> {
        let view = HalfWaveView::of(state)?;
        let reg = std::array::from_fn(|mu| {
            let (a0, adot0) = state.zero_mode_register(mu);
            [a0.re, adot0.re]
        });
        Ok(ProfileState { t: state.t, phi: view.phi, v: view.v, reg })
    }

    /// Reconstruct the equation-level state (psi, A, Adot) at self.t.
    pub fn to_md(&self) -> Result<MDState> {
        let grid = self.grid().clone();
        let mass = grid.mass();
        let t = self.t;
        let mut psi = SpinorField::zeros(&grid, Side::Fourier);
        for (i, th) in Sign::BOTH.iter().enumerate() {
            let branch = self.phi[i]
                .apply_multiplier(|xi| C64::cis(-th.as_f64() * t * bracket(xi, mass)))?;
            psi = psi.add(&branch)?;
        }
        let mut a: [ScalarField; 4] =
            std::array::from_fn(|_| ScalarField::zeros(&grid, Side::Fourier));
        let mut adot: [ScalarField; 4] =
            std::array::from_fn(|_| ScalarField::zeros(&grid, Side::Fourier));
        for mu in 0..4 {
            let wp = self.v[mu][0].apply_multiplier(|xi| C64::cis(t * abs_xi(xi)))?;
            let wm = self.v[mu][1].apply_multiplier(|xi| C64::cis(-t * abs_xi(xi)))?;
            let mut a_data = vec![C64::default(); grid.len()];
            let mut adot_data = vec![C64::default(); grid.len()];
            a_data
                .par_iter_mut()
                .zip(adot_data.par_iter_mut())
                .enumerate()
                .for_each(|(idx, (av, dv))| {
                    let r = abs_xi(grid.xi_at(idx));
                    if r == 0.0 {
                        return;
                    }
                    let sq = r.sqrt();
                    let p = wp.data()[idx];
                    let m = wm.data()[idx];
                    *av = (p + m) / sq;
                    *dv = C64::i() * sq * (p - m);
                });
            let z = grid.zero_mode_index();
            a_data[z] = C64::new(self.reg[mu][0], 0.0);
            adot_data[z] = C64::new(self.reg[mu][1], 0.0);
            a[mu] = ScalarField::from_data(&grid, Side::Fourier, a_data)?;
            adot[mu] = ScalarField::from_data(&grid, Side::Fourier, adot_data)?;
        }
        Ok(MDState { t, psi, a, adot })
    }

    /// Charge ||psi||_2, computable directly from the profiles.
    pub fn charge(&self) -> f64 {
        (self.phi[0].l2_norm().powi(2) + self.phi[1].l2_norm().powi(2)).sqrt()
    }

    /// Reconstruct only the four gauge coefficient arrays A-hat_mu at self.t
    /// (zero mode from the registers); cheaper than a full to_md.
    pub fn gauge_hat(&self) -> Result<[ScalarField; 4]> {
        let grid = self.grid().clone();
        let t = self.t;
        let mut out: [ScalarField; 4] =
            std::array::from_fn(|_| ScalarField::zeros(&grid, Side::Fourier));
        for mu in 0..4 {
            let vp = self.v[mu][0].data();
            let vm = self.v[mu][1].data();
            let mut data = vec![C64::default(); grid.len()];
            data.par_iter_mut().enumerate().for_each(|(idx, av)| {
                let r = abs_xi(grid.xi_at(idx));
                if r == 0.0 {
                    return;
                }
                let wp = vp[idx] * C64::cis(t * r);
                let wm = vm[idx] * C64::cis(-t * r);
                *av = (wp + wm) / r.sqrt();
            });
            data[grid.zero_mode_index()] = C64::new(self.reg[mu][0], 0.0);
            out[mu] = ScalarField::from_data(&grid, Side::Fourier, data)?;
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().all(|p| p.is_finite())
            && self.v.iter().flatten().all(|f| {
                f.data()
                    .par_iter()
                    .all(|v| v.re.is_finite() && v.im.is_finite())
            })
            && self.reg.iter().flatten().all(|r| r.is_finite())
    }

    /// L2 distance to another profile state (diagnostic metric over all
    /// profile fields).
    pub fn distance(&self, other: &ProfileState) -> Result<f64> {
        let mut sq = 0.0;
        for i in 0..2 {
            sq += self.phi[i].sub(&other.phi[i])?.l2_norm().powi(2);
        }
        for mu in 0..4 {
            for s in 0..2 {
                sq += self.v[mu][s].sub(&other.v[mu][s])?.l2_norm().powi(2);
            }
        }
        for mu in 0..4 {
            sq += (self.reg[mu][0] - other.reg[mu][0]).powi(2)
                + (self.reg[mu][1] - other.reg[mu][1]).powi(2);
        }
        Ok(sq.sqrt())
    }

    fn axpy(&mut self, c: f64, d: &Deriv) {
        for i in 0..2 {
            for comp in 0..4 {
                self.phi[i]
                    .component_mut(comp)
                    .par_iter_mut()
                    .zip(d.dphi[i].component(comp).par_iter())
                    .for_each(|(a, b)| *a += c * b);
            }
        }
        for mu in 0..4 {
            for s in 0..2 {
                self.v[mu][s]
                    .data_mut()
                    .par_iter_mut()
                    .zip(d.dv[mu][s].data().par_iter())
                    .for_each(|(a, b)| *a += c * b);
            }
            self.reg[mu][0] += c * d.dreg[mu][0];
            self.reg[mu][1] += c * d.dreg[mu][1];
        }
    }

    fn at_shifted(&self, dt_frac: f64, d: &Deriv) -> ProfileState {
        let mut out = self.clone();
        out.axpy(dt_frac, d);
        out.t = self.t + dt_frac;
        out
    }
}

struct Deriv {
    dphi: [SpinorField; 2],
    dv: [[ScalarField; 2]; 4],
    dreg: [[f64; 2]; 4],
}

/// The Dirac nonlinearity N = A_mu alpha^mu psi as a physical-side spinor,
/// dealiased. Equals the sum over sign pairs of the split nonlinearities.
pub fn nonlinearity_dirac(state: &MDState) -> Result<SpinorField> {
    Ok(nonlinearity_dirac_hat(state, true)?.to_physical())
}

/// Fourier-side Dirac nonlinearity (A_mu alpha^mu psi)-hat.
pub fn nonlinearity_dirac_hat(state: &MDState, dealias: bool) -> Result<SpinorField> {
    let grid = state.grid().clone();
    let psi = state.psi.to_physical();
    let a: [ScalarField; 4] = std::array::from_fn(|mu| state.a[mu].to_physical());
    let mut out = SpinorField::zeros(&grid, Side::Physical);
    {
        let a0 = a[0].data();
        let a1 = a[1].data();
        let a2 = a[2].data();
        let a3 = a[3].data();
        out.par_set_from(|idx| {
            let u = psi.value_at(idx);
            // alpha^1 psi = (u3, u2, u1, u0)
            // alpha^2 psi = (-i u3, i u2, -i u1, i u0)
            // alpha^3 psi = (u2, -u3, u0, -u1)
            [
                a0[idx] * u[0] + a1[idx] * u[3] - C64::i() * a2[idx] * u[3] + a3[idx] * u[2],
                a0[idx] * u[1] + a1[idx] * u[2] + C64::i() * a2[idx] * u[2] - a3[idx] * u[3],
                a0[idx] * u[2] + a1[idx] * u[1] - C64::i() * a2[idx] * u[1] + a3[idx] * u[0],
                a0[idx] * u[3] + a1[idx] * u[0] + C64::i() * a2[idx] * u[0] - a3[idx] * u[1],
            ]
        });
    }
    let mut hat = out.to_fourier();
    if dealias {
        hat = hat.dealias()?;
    }
    Ok(hat)
}

/// The wave nonlinearity: |D|^{-1/2} J_mu on nonzero modes (Fourier side,
/// dealiased) plus the zero-mode sources J-hat_mu(0) routed to the registers.
pub fn nonlinearity_wave(state: &MDState) -> Result<([ScalarField; 4], [f64; 4])> {
    nonlinearity_wave_hat(state, true)
}

pub fn nonlinearity_wave_hat(
    state: &MDState,
    dealias: bool,
) -> Result<([ScalarField; 4], [f64; 4])> {
    let grid = state.grid().clone();
    let psi = state.psi.to_physical();
    let j = current(&psi)?;
    let mut out: [ScalarField; 4] = std::array::from_fn(|_| ScalarField::zeros(&grid, Side::Fourier));
    let mut zero_sources = [0.0; 4];
    for mu in 0..4 {
        let mut hat = j[mu].to_fourier();
        if dealias {
            hat = hat.dealias()?;
        }
        zero_sources[mu] = hat.data()[grid.zero_mode_index()].re;
        let filtered = hat.apply_real_multiplier(|xi| {
            let r = abs_xi(xi);
            if r == 0.0 {
                f64::INFINITY // annihilate the zero mode by the singular rule
            } else {
                r.powf(-0.5)
            }
        })?;
        out[mu] = filtered;
    }
    Ok((out, zero_sources))
}

fn rhs(y: &ProfileState, cfg: &IntegratorConfig) -> Result<Deriv> {
    let grid = y.grid().clone();
    let mass = grid.mass();
    let t = y.t;
    if cfg.coupling == Coupling::Off {
        return Ok(Deriv {
            dphi: std::array::from_fn(|_| SpinorField::zeros(&grid, Side::Fourier)),
            dv: std::array::from_fn(|_| {
                std::array::from_fn(|_| ScalarField::zeros(&grid, Side::Fourier))
            }),
            dreg: std::array::from_fn(|mu| [y.reg[mu][1], 0.0]),
        });
    }
    let md = y.to_md()?;
    let n_hat = nonlinearity_dirac_hat(&md, cfg.dealias)?;
    let (w_src, zero_src) = nonlinearity_wave_hat(&md, cfg.dealias)?;

    // dphi_theta = i e^{theta i t <xi>} Pi_theta N-hat
    let dphi = std::array::from_fn(|i| {
        let th = Sign::BOTH[i];
        n_hat
            .project(th)
            .apply_multiplier(|xi| C64::i() * C64::cis(th.as_f64() * t * bracket(xi, mass)))
            .expect("fourier side")
    });

    // dV_{mu,theta'} = -theta' (i/2) e^{-theta' i t |xi|} (|D|^{-1/2} J)-hat
    let dv = std::array::from_fn(|mu| {
        std::array::from_fn(|si| {
            let th = Sign::BOTH[si].as_f64();
            w_src[mu]
                .apply_multiplier(|xi| {
                    C64::i() * (-th * 0.5) * C64::cis(-th * t * abs_xi(xi))
                })
                .expect("fourier side")
        })
    });

    let dreg = std::array::from_fn(|mu| [y.reg[mu][1], zero_src[mu]]);
    Ok(Deriv { dphi, dv, dreg })
}

pub struct StepOutcome {
    pub state: ProfileState,
    pub past_horizon: bool,
}

/// One step of the configured scheme. NaN/Inf in the result aborts with a
/// diagnostic error carrying the time.
pub fn step(y: &ProfileState, cfg: &IntegratorConfig) -> Result<StepOutcome> {
    let out = match cfg.scheme {
        Scheme::IfRk4 => step_rk4(y, cfg)?,
        Scheme::Strang2 => step_strang(y, cfg)?,
    };
    if !out.is_finite() {
        return Err(MdError::NonFinite {
            t: out.t,
            what: "profile state after step".into(),
        });
    }
    let past_horizon = cfg.horizon.map_or(false, |h| out.t > h + 1e-12);
    Ok(StepOutcome { state: out, past_horizon })
}

fn step_rk4(y: &ProfileState, cfg: &IntegratorConfig) -> Result<ProfileState> {
    let dt = cfg.dt;
    let k1 = rhs(y, cfg)?;
    let y2 = y.at_shifted(dt / 2.0, &k1);
    let k2 = rhs(&y2, cfg)?;
    let y3 = y.at_shifted(dt / 2.0, &k2);
    let k3 = rhs(&y3, cfg)?;
    let y4 = y.at_shifted(dt, &k3);
    let k4 = rhs(&y4, cfg)?;
    let mut out = y.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    out.t = y.t + dt;
    Ok(out)
}

/// Strang cross-check scheme: exact half linear flow, midpoint step on the
/// nonlinear subsystem in (psi_theta, W) variables, exact half linear flow.
fn step_strang(y: &ProfileState, cfg: &IntegratorConfig) -> Result<ProfileState> {
    let grid = y.grid().clone();
    let mass = grid.mass();
    let dt = cfg.dt;
    let t0 = y.t;

    // profiles -> (psi_theta, W) at t0
    let mut psi_th: [SpinorField; 2] = std::array::from_fn(|i| {
        let th = Sign::BOTH[i].as_f64();
        y.phi[i]
            .apply_multiplier(|xi| C64::cis(-th * t0 * bracket(xi, mass)))
            .expect("fourier")
    });
    let mut w: [[ScalarField; 2]; 4] = std::array::from_fn(|mu| {
        std::array::from_fn(|si| {
            let th = Sign::BOTH[si].as_f64();
            y.v[mu][si]
                .apply_multiplier(|xi| C64::cis(th * t0 * abs_xi(xi)))
                .expect("fourier")
        })
    });
    let mut reg = y.reg;

    let half_linear = |psi_th: &mut [SpinorField; 2],
                       w: &mut [[ScalarField; 2]; 4],
                       reg: &mut [[f64; 2]; 4],
                       tau: f64|
     -> Result<()> {
        for (i, th) in Sign::BOTH.iter().enumerate() {
            let thf = th.as_f64();
            psi_th[i] =
                psi_th[i].apply_multiplier(|xi| C64::cis(-thf * tau * bracket(xi, mass)))?;
        }
        for w_mu in w.iter_mut() {
            for (si, th) in Sign::BOTH.iter().enumerate() {
                let thf = th.as_f64();
                w_mu[si] = w_mu[si].apply_multiplier(|xi| C64::cis(thf * tau * abs_xi(xi)))?;
            }
        }
        for r in reg.iter_mut() {
            r[0] += tau * r[1];
        }
        Ok(())
    };

    half_linear(&mut psi_th, &mut w, &mut reg, dt / 2.0)?;

    if cfg.coupling == Coupling::Full {
        // nonlinear midpoint step (the subsystem is autonomous)
        let eval = |psi_th: &[SpinorField; 2],
                    w: &[[ScalarField; 2]; 4],
                    t_mid: f64|
         -> Result<(([SpinorField; 2], [[ScalarField; 2]; 4]), [f64; 4])> {
            let psi = psi_th[0].add(&psi_th[1])?;
            let mut a: [ScalarField; 4] = std::array::from_fn(|_| ScalarField::zeros(&grid, Side::Fourier));
            for mu in 0..4 {
                let sum = w[mu][0].add(&w[mu][1])?;
                let mut data = sum.into_data();
                data.par_iter_mut().enumerate().for_each(|(idx, v)| {
                    let r = abs_xi(grid.xi_at(idx));
                    if r > 0.0 {
                        *v /= r.sqrt();
                    } else {
                        *v = C64::default();
                    }
                });
                data[grid.zero_mode_index()] = C64::new(reg[mu][0], 0.0);
                a[mu] = ScalarField::from_data(&grid, Side::Fourier, data)?;
            }
            let md = MDState {
                t: t_mid,
                psi,
                a,
                adot: std::array::from_fn(|_| ScalarField::zeros(&grid, Side::Fourier)),
            };
            let n_hat = nonlinearity_dirac_hat(&md, cfg.dealias)?;
            let dpsi = std::array::from_fn(|i| {
                n_hat
                    .project(Sign::BOTH[i])
                    .apply_multiplier(|_| C64::i())
                    .expect("fourier")
            });
            let (w_src, zero_src) = nonlinearity_wave_hat(&md, cfg.dealias)?;
            let dw = std::array::from_fn(|mu: usize| {
                std::array::from_fn(|si: usize| {
                    let th = Sign::BOTH[si].as_f64();
                    w_src[mu]
                        .apply_multiplier(|_| C64::i() * (-th * 0.5))
                        .expect("fourier")
                })
            });
            Ok(((dpsi, dw), zero_src))
        };

        let t_mid = t0 + dt / 2.0;
        let ((dpsi1, dw1), z1) = eval(&psi_th, &w, t_mid)?;
        let mut psi_mid = psi_th.clone();
        let mut w_mid = w.clone();
        for i in 0..2 {
            psi_mid[i] = psi_mid[i].add(&dpsi1[i].scaled(C64::new(dt / 2.0, 0.0)))?;
        }
        for mu in 0..4 {
            for si in 0..2 {
                w_mid[mu][si] = w_mid[mu][si].add(&dw1[mu][si].scaled(C64::new(dt / 2.0, 0.0)))?;
            }
        }
        let ((dpsi2, dw2), z2) = eval(&psi_mid, &w_mid, t_mid)?;
        let _ = z1;
        for i in 0..2 {
            psi_th[i] = psi_th[i].add(&dpsi2[i].scaled(C64::new(dt, 0.0)))?;
        }
        for mu in 0..4 {
            for si in 0..2 {
                w[mu][si] = w[mu][si].add(&dw2[mu][si].scaled(C64::new(dt, 0.0)))?;
            }
            reg[mu][1] += dt * z2[mu];
        }
    }

    half_linear(&mut psi_th, &mut w, &mut reg, dt / 2.0)?;

    // back to profiles at t0 + dt
    let t1 = t0 + dt;
    let phi = std::array::from_fn(|i| {
        let th = Sign::BOTH[i].as_f64();
        psi_th[i]
            .apply_multiplier(|xi| C64::cis(th * t1 * bracket(xi, mass)))
            .expect("fourier")
    });
    let v = std::array::from_fn(|mu: usize| {
        std::array::from_fn(|si: usize| {
            let th = Sign::BOTH[si].as_f64();
            w[mu][si]
                .apply_multiplier(|xi| C64::cis(-th * t1 * abs_xi(xi)))
                .expect("fourier")
        })
    });
    Ok(ProfileState { t: t1, phi, v, reg })
}

/// Step-end callback; every observer sees every step (including t0 before
/// the first step) and applies its own stride internally.
pub trait Observer {
    fn observe(&mut self, state: &ProfileState, is_final: bool) -> Result<()>;
}

pub struct RunSummary {
    pub state: ProfileState,
    pub steps: usize,
    pub past_horizon_steps: usize,
    pub wall_seconds: f64,
}

/// Step from the state's time to `t_end`, invoking observers at every step
/// end. The last step is shortened to land on `t_end` exactly.
pub fn run(
    mut y: ProfileState,
    cfg: &IntegratorConfig,
    t_end: f64,
    observers: &mut [&mut dyn Observer],
) -> Result<RunSummary> {
    let start = std::time::Instant::now();
    let mut steps = 0usize;
    let mut past = 0usize;
    for obs in observers.iter_mut() {
        obs.observe(&y, y.t >= t_end - 1e-12)?;
    }
    while y.t < t_end - 1e-12 {
        let remaining = t_end - y.t;
        let mut cfg_step = cfg.clone();
        if remaining < cfg.dt * (1.0 + 1e-9) {
            cfg_step.dt = remaining;
        }
        let out = step(&y, &cfg_step)?;
        y = out.state;
        if out.past_horizon {
            past += 1;
        }
        steps += 1;
        let is_final = y.t >= t_end - 1e-12;
        for obs in observers.iter_mut() {
            obs.observe(&y, is_final)?;
        }
    }
    Ok(RunSummary {
        state: y,
        steps,
        past_horizon_steps: past,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_initial_data, DataRecipe};

    fn small_grid() -> Arc<FourierGrid> {
        FourierGrid::new(16, 20.0, 1.0).unwrap()
    }

    fn coupled_state(grid: &Arc<FourierGrid>, eps: f64) -> ProfileState {
        let recipe = DataRecipe { epsilon: eps, width: 1.5, ..Default::default() };
        let md = make_initial_data(grid, &recipe).unwrap();
        ProfileState::from_md(&md).unwrap()
    }

    #[test]
    fn vacuum_steps_to_vacuum() {
        let grid = small_grid();
        let y = ProfileState::from_md(&MDState::vacuum(&grid)).unwrap();
        let cfg = IntegratorConfig::defaults(&grid);
        let out = step(&y, &cfg).unwrap().state;
        assert_eq!(out.charge(), 0.0);
        for mu in 0..4 {
            for s in 0..2 {
                assert_eq!(out.v[mu][s].l2_norm(), 0.0);
            }
        }
    }

    #[test]
    fn profile_roundtrip_md() {
        let grid = small_grid();
        let mut y = coupled_state(&grid, 0.05);
        y.t = 1.3;
        let md = y.to_md().unwrap();
        let back = ProfileState::from_md(&md).unwrap();
        let d = y.distance(&back).unwrap();
        let scale = y.charge().max(1e-30);
        assert!(d / scale < 1e-11, "profile<->md roundtrip drift {d}");
    }

    #[test]
    fn coupling_off_freezes_profiles_exactly() {
        let grid = small_grid();
        let y = coupled_state(&grid, 0.05);
        let mut cfg = IntegratorConfig::defaults(&grid);
        cfg.coupling = Coupling::Off;
        let mut z = y.clone();
        for _ in 0..5 {
            z = step(&z, &cfg).unwrap().state;
        }
        for i in 0..2 {
            let d = z.phi[i].sub(&y.phi[i]).unwrap().l2_norm();
            assert_eq!(d, 0.0, "free flow must leave profiles bitwise unchanged");
        }
        // and the reconstructed psi matches the analytic propagator
        let md0 = y.to_md().unwrap();
        let mdt = z.to_md().unwrap();
        let mass = grid.mass();
        let t = z.t;
        let mut expected = SpinorField::zeros(&grid, Side::Fourier);
        for th in Sign::BOTH.iter() {
            let thf = th.as_f64();
            let branch = md0
                .psi
                .project(*th)
                .apply_multiplier(|xi| C64::cis(-thf * t * bracket(xi, mass)))
                .unwrap();
            expected = expected.add(&branch).unwrap();
        }
        let rel = mdt.psi.sub(&expected).unwrap().l2_norm() / expected.l2_norm();
        assert!(rel < 1e-12, "free propagator mismatch {rel}");
    }

    #[test]
    fn two_mode_convolution_oracle() {
        // single-mode A0 (Hermitian pair) and single-mode psi: the product
        // lands at the sum/difference frequencies with hand-computable
        // amplitudes.
        let grid = small_grid();
        let n3 = grid.len() as f64;
        let mut md = MDState::vacuum(&grid);
        let c = C64::new(0.3, 0.1);
        let ia = grid.index(1, 0, 0);
        let ia_m = grid.mirror_index(ia);
        md.a[0].data_mut()[ia] = c;
        md.a[0].data_mut()[ia_m] = c.conj();
        let d = C64::new(0.0, 0.7);
        let ip = grid.index(0, 2, 0);
        md.psi.component_mut(0)[ip] = d;

        let got = nonlinearity_dirac_hat(&md, true).unwrap();
        // alpha^0 part only (A_j = 0): N-hat(xi0 + eta0) = c d / n^3
        let sum_idx = grid.index(1, 2, 0);
        let diff_idx = grid.index(15, 2, 0);
        let expect_sum = c * d / n3;
        let expect_diff = c.conj() * d / n3;
        assert!((got.component(0)[sum_idx] - expect_sum).norm() < 1e-15);
        assert!((got.component(0)[diff_idx] - expect_diff).norm() < 1e-15);
        // no leakage elsewhere on component 0 beyond those two modes
        for (idx, v) in got.component(0).iter().enumerate() {
            if idx != sum_idx && idx != diff_idx {
                assert!(v.norm() < 1e-15, "leakage at {idx}");
            }
        }
        // components 1..3 remain empty for an alpha^0 coupling
        for comp in 1..4 {
            assert!(got.component(comp).iter().all(|v| v.norm() < 1e-15));
        }
    }

    #[test]
    fn wave_nonlinearity_hermitian_and_zero_mean() {
        let grid = small_grid();
        let md = coupled_state(&grid, 0.1).to_md().unwrap();
        let (src, zero) = nonlinearity_wave_hat(&md, true).unwrap();
        for mu in 0..4 {
            // J real: the |D|^{-1/2} J fields stay Hermitian-symmetric
            assert!(src[mu].hermitian_asymmetry().unwrap() < 1e-12);
            assert_eq!(src[mu].data()[grid.zero_mode_index()], C64::default());
        }
        // zero-mode source equals the unscaled spatial sum of J_mu
        let j = current(&md.psi.to_physical()).unwrap();
        for mu in 0..4 {
            let mean: C64 = j[mu].data().iter().sum();
            assert!((zero[mu] - mean.re).abs() < 1e-9 * mean.re.abs().max(1.0));
        }
    }

    #[test]
    fn charge_is_conserved_over_short_run() {
        let grid = small_grid();
        let y = coupled_state(&grid, 0.05);
        let cfg = IntegratorConfig::defaults(&grid);
        let q0 = y.charge();
        let mut z = y;
        for _ in 0..20 {
            z = step(&z, &cfg).unwrap().state;
        }
        let drift = (z.charge() - q0).abs() / q0;
        assert!(drift < 1e-8, "charge drift {drift}");
    }

    #[test]
    fn gauge_residual_stays_small() {
        let grid = small_grid();
        let y = coupled_state(&grid, 0.05);
        let cfg = IntegratorConfig::defaults(&grid);
        let mut z = y;
        for _ in 0..20 {
            z = step(&z, &cfg).unwrap().state;
        }
        let md = z.to_md().unwrap();
        // the 16^3 lattice barely resolves the data; the acceptance suite
        // checks the 1e-5 bound on the production grid
        assert!(md.lorenz_residual() < 1e-4, "residual {}", md.lorenz_residual());
    }

    #[test]
    fn time_reversal() {
        // RK4 is not symmetric; the reversal defect is ~2x the local
        // truncation error, so use a small step.
        let grid = small_grid();
        let y = coupled_state(&grid, 0.05);
        let mut cfg = IntegratorConfig::defaults(&grid);
        cfg.dt /= 4.0;
        let fwd = step(&y, &cfg).unwrap().state;
        let mut back_cfg = cfg.clone();
        back_cfg.dt = -cfg.dt;
        let back = step(&fwd, &back_cfg).unwrap().state;
        let d = back.distance(&y).unwrap() / y.charge();
        assert!(d < 1e-10, "time-reversal defect {d}");
    }

    #[test]
    fn rk4_self_convergence_ratio() {
        let grid = small_grid();
        let y = coupled_state(&grid, 0.1);
        let base = IntegratorConfig::defaults(&grid);
        let t_end = y.t + 8.0 * base.dt;
        let run_with = |dt: f64| -> ProfileState {
            let mut cfg = base.clone();
            cfg.dt = dt;
            run(y.clone(), &cfg, t_end, &mut []).unwrap().state
        };
        let a = run_with(base.dt);
        let b = run_with(base.dt / 2.0);
        let c = run_with(base.dt / 4.0);
        let e1 = a.distance(&b).unwrap();
        let e2 = b.distance(&c).unwrap();
        let ratio = e1 / e2;
        assert!(
            (8.0..=32.0).contains(&ratio),
            "4th-order self-convergence ratio {ratio} (e1={e1:.3e}, e2={e2:.3e})"
        );
    }

    #[test]
    fn strang_agrees_with_rk4_at_small_dt() {
        let grid = small_grid();
        let y = coupled_state(&grid, 0.1);
        let mut rk = IntegratorConfig::defaults(&grid);
        rk.dt *= 0.25;
        let mut st = rk.clone();
        st.scheme = Scheme::Strang2;
        let t_end = y.t + 8.0 * rk.dt;
        let a = run(y.clone(), &rk, t_end, &mut []).unwrap().state;
        let b = run(y.clone(), &st, t_end, &mut []).unwrap().state;
        let d = a.distance(&b).unwrap() / y.charge();
        assert!(d < 1e-5, "scheme cross-check disagreement {d}");
    }

    #[test]
    fn strang_self_convergence_is_second_order() {
        let grid = small_grid();
        let y = coupled_state(&grid, 0.1);
        let mut base = IntegratorConfig::defaults(&grid);
        base.scheme = Scheme::Strang2;
        let t_end = y.t + 8.0 * base.dt;
        let run_with = |dt: f64| -> ProfileState {
            let mut cfg = base.clone();
            cfg.dt = dt;
            run(y.clone(), &cfg, t_end, &mut []).unwrap().state
        };
        let e1 = run_with(base.dt).distance(&run_with(base.dt / 2.0)).unwrap();
        let e2 = run_with(base.dt / 2.0).distance(&run_with(base.dt / 4.0)).unwrap();
        let ratio = e1 / e2;
        assert!((2.5..=7.0).contains(&ratio), "2nd-order ratio {ratio}");
    }

    #[test]
    fn run_invokes_observers_and_lands_on_t_end() {
        struct Counter {
            calls: usize,
            finals: usize,
        }
        impl Observer for Counter {
            fn observe(&mut self, _s: &ProfileState, is_final: bool) -> Result<()> {
                self.calls += 1;
                if is_final {
                    self.finals += 1;
                }
                Ok(())
            }
        }
        let grid = small_grid();
        let y = coupled_state(&grid, 0.02);
        let cfg = IntegratorConfig::defaults(&grid);
        let t_end = 3.7 * cfg.dt; // forces a shortened final step
        let mut counter = Counter { calls: 0, finals: 0 };
        let summary = run(y, &cfg, t_end, &mut [&mut counter]).unwrap();
        assert_eq!(summary.steps, 4);
        assert_eq!(counter.calls, 5); // t0 + 4 step ends
        assert_eq!(counter.finals, 1);
        assert!((summary.state.t - t_end).abs() < 1e-12);
    }

    #[test]
    fn horizon_steps_are_flagged() {
        let grid = small_grid();
        let y = coupled_state(&grid, 0.02);
        let mut cfg = IntegratorConfig::defaults(&grid);
        cfg.horizon = Some(cfg.dt * 1.5);
        let summary = run(y, &cfg, cfg.dt * 4.0, &mut []).unwrap();
        assert!(summary.past_horizon_steps >= 2);
    }
}
