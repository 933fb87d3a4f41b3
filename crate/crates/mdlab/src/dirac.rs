//! Dirac matrices in the Pauli-Dirac representation, the projection symbols
//! `Pi_theta(xi)`, and the algebraic identities built on them.
//!
//! Conventions (recorded here so cross-implementation comparisons are
//! bit-stable): with the Pauli matrices `s1, s2, s3`,
//!
//! ```text
//! alpha^j = [ 0   s_j ]      beta = [ I2   0  ]     alpha^0 = I4,
//!           [ s_j  0  ]             [ 0  -I2  ]
//! ```
//!
//! indices are lowered with `eta = diag(-1, 1, 1, 1)`, so `alpha_0 = -I4` and
//! `alpha_j = alpha^j`. The projector for mass `m > 0` is
//! `Pi_theta(xi) = (I + theta (alpha.xi + m beta) / <xi>_m) / 2` with
//! `<xi>_m = sqrt(m^2 + |xi|^2)`.

use num_complex::Complex64;

use crate::error::MdError;
use crate::Result;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Sign index for the two half-Klein-Gordon branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    #[inline]
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    #[inline]
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

impl std::fmt::Display for Sign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sign::Plus => write!(f, "+"),
            Sign::Minus => write!(f, "-"),
        }
    }
}

/// Dense 4x4 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Mat4 {
    pub fn zero() -> Self {
        Mat4([[ZERO; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.0[i][i] = ONE;
        }
        m
    }

    pub fn mul(&self, rhs: &Mat4) -> Mat4 {
        let mut out = Mat4::zero();
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                if a == ZERO {
                    continue;
                }
                for j in 0..4 {
                    out.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat4) -> Mat4 {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Mat4) -> Mat4 {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] -= rhs.0[i][j];
            }
        }
        out
    }

    pub fn scale(&self, c: C64) -> Mat4 {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] *= c;
            }
        }
        out
    }

    pub fn adjoint(&self) -> Mat4 {
        let mut out = Mat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] = self.0[j][i].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2] + self.0[3][3]
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += self.0[i][j].norm_sqr();
            }
        }
        s.sqrt()
    }

    pub fn apply(&self, v: &[C64; 4]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for i in 0..4 {
            let mut acc = ZERO;
            for j in 0..4 {
                acc += self.0[i][j] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Matrix exponential by plain Taylor series with scaling and squaring.
    /// Accurate to machine precision for the moderate norms used here.
    pub fn exp(&self) -> Mat4 {
        let norm = self.frobenius_norm();
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let scaled = self.scale(C64::new(1.0 / 2f64.powi(squarings as i32), 0.0));
        let mut term = Mat4::identity();
        let mut sum = Mat4::identity();
        for k in 1..30 {
            term = term.mul(&scaled).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.add(&term);
            if term.frobenius_norm() < 1e-18 {
                break;
            }
        }
        let mut out = sum;
        for _ in 0..squarings {
            out = out.mul(&out);
        }
        out
    }
}

/// The four `alpha^j` (j = 1, 2, 3) and `beta` in the Pauli-Dirac
/// representation, plus `alpha^0 = I4`.
pub struct DiracMatrices {
    pub alpha: [Mat4; 3],
    pub beta: Mat4,
}

/// alpha^j for j in 1..=3 (0-indexed argument).
pub fn alpha(j: usize) -> Mat4 {
    debug_assert!(j < 3);
    let mut m = Mat4::zero();
    // sigma_j in the off-diagonal 2x2 blocks
    let s: [[C64; 2]; 2] = match j {
        0 => [[ZERO, ONE], [ONE, ZERO]],
        1 => [[ZERO, -I], [I, ZERO]],
        _ => [[ONE, ZERO], [ZERO, -ONE]],
    };
    for a in 0..2 {
        for b in 0..2 {
            m.0[a][2 + b] = s[a][b];
            m.0[2 + a][b] = s[a][b];
        }
    }
    m
}

pub fn beta() -> Mat4 {
    let mut m = Mat4::zero();
    m.0[0][0] = ONE;
    m.0[1][1] = ONE;
    m.0[2][2] = -ONE;
    m.0[3][3] = -ONE;
    m
}

/// alpha^mu with the upper index; mu = 0 gives the identity.
pub fn alpha_upper(mu: usize) -> Mat4 {
    if mu == 0 {
        Mat4::identity()
    } else {
        alpha(mu - 1)
    }
}

/// alpha_mu = eta_{mu nu} alpha^nu; alpha_0 = -I4, alpha_j = alpha^j.
pub fn alpha_lower(mu: usize) -> Mat4 {
    if mu == 0 {
        Mat4::identity().scale(-ONE)
    } else {
        alpha(mu - 1)
    }
}

pub fn matrices() -> DiracMatrices {
    DiracMatrices {
        alpha: [alpha(0), alpha(1), alpha(2)],
        beta: beta(),
    }
}

#[inline]
pub fn bracket(xi: [f64; 3], mass: f64) -> f64 {
    (mass * mass + xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt()
}

/// The projector matrix `Pi_theta(xi) = (I + theta (alpha.xi + m beta)/<xi>_m)/2`.
pub fn projector_at(xi: [f64; 3], theta: Sign, mass: f64) -> Mat4 {
    let br = bracket(xi, mass);
    let th = theta.as_f64();
    let mut m = alpha(0).scale(C64::new(th * xi[0] / (2.0 * br), 0.0));
    m = m.add(&alpha(1).scale(C64::new(th * xi[1] / (2.0 * br), 0.0)));
    m = m.add(&alpha(2).scale(C64::new(th * xi[2] / (2.0 * br), 0.0)));
    m = m.add(&beta().scale(C64::new(th * mass / (2.0 * br), 0.0)));
    m = m.add(&Mat4::identity().scale(C64::new(0.5, 0.0)));
    m
}

/// Apply `Pi_theta(xi)` to a spinor value without forming the matrix.
///
/// Uses the 2x2 block structure: for v = (u, w) with u, w in C^2,
/// (alpha.xi) v = (sigma.xi w, sigma.xi u) and beta v = (u, -w).
#[inline]
pub fn project_value(xi: [f64; 3], theta: Sign, mass: f64, v: &[C64; 4]) -> [C64; 4] {
    let br = bracket(xi, mass);
    let c = theta.as_f64() / (2.0 * br);
    let (x1, x2, x3) = (xi[0], xi[1], xi[2]);
    // sigma.xi = [[x3, x1 - i x2], [x1 + i x2, -x3]]
    let sxi = |a: C64, b: C64| -> [C64; 2] {
        [
            C64::new(x3, 0.0) * a + C64::new(x1, -x2) * b,
            C64::new(x1, x2) * a - C64::new(x3, 0.0) * b,
        ]
    };
    let upper = sxi(v[2], v[3]); // sigma.xi w
    let lower = sxi(v[0], v[1]); // sigma.xi u
    [
        0.5 * v[0] + c * (upper[0] + mass * v[0]),
        0.5 * v[1] + c * (upper[1] + mass * v[1]),
        0.5 * v[2] + c * (lower[0] - mass * v[2]),
        0.5 * v[3] + c * (lower[1] - mass * v[3]),
    ]
}

/// Frobenius norm of `alpha^j Pi_theta(xi) - Pi_{-theta}(xi) alpha^j - theta xi_j/<xi> I`.
///
/// Zero (to rounding) for every `xi`; this is the relation that trades a
/// Dirac matrix across a projector at the cost of a Riesz-transform scalar.
pub fn riesz_commutation_check(xi: [f64; 3], j: usize, theta: Sign, mass: f64) -> f64 {
    let br = bracket(xi, mass);
    let lhs = alpha(j).mul(&projector_at(xi, theta, mass));
    let rhs = projector_at(xi, theta.flip(), mass).mul(&alpha(j));
    let scalar = Mat4::identity().scale(C64::new(theta.as_f64() * xi[j] / br, 0.0));
    lhs.sub(&rhs).sub(&scalar).frobenius_norm()
}

/// Commutator symbols with the projectors for the rotation and boost fields.
pub struct CommutatorSymbols {
    /// Symbol of `[Omega_{jk}, Pi_theta]` for the requested axis pair:
    /// `theta (xi_j alpha^k - xi_k alpha^j) / (2 <xi>)`.
    pub rotation: Mat4,
    /// Symbol `M_j(xi)` such that `[Gamma_j, Pi_theta] = M_j(D) d/dt`:
    /// `theta (i/2) (alpha^j / <xi> - (alpha.xi + m beta) xi_j / <xi>^3)`.
    pub boost: Mat4,
}

/// Rotation-commutator symbol for the pair (j, k), j, k in 0..3 (0-indexed).
pub fn rotation_commutator_symbol(
    xi: [f64; 3],
    theta: Sign,
    j: usize,
    k: usize,
    mass: f64,
) -> Mat4 {
    let br = bracket(xi, mass);
    let th = theta.as_f64();
    let a = alpha(k).scale(C64::new(th * xi[j] / (2.0 * br), 0.0));
    let b = alpha(j).scale(C64::new(th * xi[k] / (2.0 * br), 0.0));
    a.sub(&b)
}

/// Boost-commutator symbol `M_j(xi)` (the d/dt factor is supplied by the caller).
pub fn boost_commutator_symbol(xi: [f64; 3], theta: Sign, j: usize, mass: f64) -> Mat4 {
    let br = bracket(xi, mass);
    let th = theta.as_f64();
    let mut adotxi = Mat4::zero();
    for l in 0..3 {
        adotxi = adotxi.add(&alpha(l).scale(C64::new(xi[l], 0.0)));
    }
    adotxi = adotxi.add(&beta().scale(C64::new(mass, 0.0)));
    let first = alpha(j).scale(C64::new(1.0, 0.0) / C64::new(br, 0.0));
    let second = adotxi.scale(C64::new(xi[j] / (br * br * br), 0.0));
    first.sub(&second).scale(I * C64::new(th * 0.5, 0.0))
}

pub fn commutator_symbols(xi: [f64; 3], theta: Sign, j: usize, k: usize, mass: f64) -> CommutatorSymbols {
    CommutatorSymbols {
        rotation: rotation_commutator_symbol(xi, theta, j, k, mass),
        boost: boost_commutator_symbol(xi, theta, j, mass),
    }
}

/// Configuration holder for the Dirac mass. Rejects the massless case: the
/// half-Klein-Gordon reformulation and the projector identities assume m > 0.
pub fn validate_mass(mass: f64) -> Result<f64> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(MdError::Validation {
            field: "mass".into(),
            msg: format!("mass must be a positive real (got {mass}); the massless case is rejected"),
        });
    }
    Ok(mass)
}

/// Residual suite over random `xi`, used by the identity-check mode.
#[derive(Debug, serde::Serialize)]
pub struct AlgebraResiduals {
    pub clifford: f64,
    pub hermiticity: f64,
    pub projector_complete: f64,
    pub projector_orthogonal: f64,
    pub projector_idempotent: f64,
    pub projector_trace: f64,
    pub riesz_relation: f64,
    pub scalar_reduction: f64,
    pub samples: usize,
}

impl AlgebraResiduals {
    pub fn max(&self) -> f64 {
        [
            self.clifford,
            self.hermiticity,
            self.projector_complete,
            self.projector_orthogonal,
            self.projector_idempotent,
            self.projector_trace,
            self.riesz_relation,
            self.scalar_reduction,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Run the full algebraic identity suite over `samples` random points.
///
/// Points are drawn log-uniformly in radius over [2^-8, 2^8] so both the
/// infrared and ultraviolet ends of the symbol are exercised.
pub fn identity_suite(mass: f64, samples: usize, seed: u64) -> AlgebraResiduals {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let mats = matrices();
    let id = Mat4::identity();

    // Clifford relations and hermiticity are xi-independent; check once, exactly.
    let mut clifford = 0.0f64;
    for j in 0..3 {
        for k in 0..3 {
            let anti = mats.alpha[j].mul(&mats.alpha[k]).add(&mats.alpha[k].mul(&mats.alpha[j]));
            let expect = if j == k { id.scale(C64::new(2.0, 0.0)) } else { Mat4::zero() };
            clifford = clifford.max(anti.sub(&expect).frobenius_norm());
        }
        let ab = mats.alpha[j].mul(&mats.beta).add(&mats.beta.mul(&mats.alpha[j]));
        clifford = clifford.max(ab.frobenius_norm());
    }
    clifford = clifford.max(mats.beta.mul(&mats.beta).sub(&id).frobenius_norm());

    let mut hermiticity = 0.0f64;
    for j in 0..3 {
        hermiticity = hermiticity.max(mats.alpha[j].sub(&mats.alpha[j].adjoint()).frobenius_norm());
    }
    hermiticity = hermiticity.max(mats.beta.sub(&mats.beta.adjoint()).frobenius_norm());

    let mut complete = 0.0f64;
    let mut orthogonal = 0.0f64;
    let mut idempotent = 0.0f64;
    let mut trace = 0.0f64;
    let mut riesz = 0.0f64;
    let mut scalar = 0.0f64;

    for _ in 0..samples {
        let r = 2f64.powf(rng.gen_range(-8.0..8.0));
        let dir = random_unit(&mut rng);
        let xi = [r * dir[0], r * dir[1], r * dir[2]];
        let pp = projector_at(xi, Sign::Plus, mass);
        let pm = projector_at(xi, Sign::Minus, mass);
        complete = complete.max(pp.add(&pm).sub(&id).frobenius_norm());
        orthogonal = orthogonal.max(pp.mul(&pm).frobenius_norm());
        for (p, h) in [(&pp, Sign::Plus), (&pm, Sign::Minus)] {
            idempotent = idempotent.max(p.mul(p).sub(p).frobenius_norm());
            trace = trace.max((p.trace() - C64::new(2.0, 0.0)).norm());
            hermiticity = hermiticity.max(p.sub(&p.adjoint()).frobenius_norm());
            for j in 0..3 {
                riesz = riesz.max(riesz_commutation_check(xi, j, h, mass));
            }
            // Scalar-reduction: Pi (c0 + c_j alpha^j) Pi = (c0 + theta c.xi/<xi>) Pi.
            let c0 = rng.gen_range(-1.0..1.0);
            let cj = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let mut mid = id.scale(C64::new(c0, 0.0));
            for j in 0..3 {
                mid = mid.add(&alpha(j).scale(C64::new(cj[j], 0.0)));
            }
            let lhs = p.mul(&mid).mul(p);
            let br = bracket(xi, mass);
            let c = c0 + h.as_f64() * (cj[0] * xi[0] + cj[1] * xi[1] + cj[2] * xi[2]) / br;
            let rhs = p.scale(C64::new(c, 0.0));
            scalar = scalar.max(lhs.sub(&rhs).frobenius_norm());
        }
    }

    AlgebraResiduals {
        clifford,
        hermiticity,
        projector_complete: complete,
        projector_orthogonal: orthogonal,
        projector_idempotent: idempotent,
        projector_trace: trace,
        riesz_relation: riesz,
        scalar_reduction: scalar,
        samples,
    }
}

pub(crate) fn random_unit<R: rand::Rng>(rng: &mut R) -> [f64; 3] {
    loop {
        let v = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n2: f64 = v.iter().map(|x| x * x).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn clifford_relations_exact() {
        let r = identity_suite(1.0, 10, 7);
        assert_eq!(r.clifford, 0.0, "Clifford relations must hold exactly");
        assert_eq!(r.hermiticity, 0.0);
    }

    #[test]
    fn projector_at_zero_frequency() {
        // Pi_+(0) = diag(1,1,0,0), Pi_-(0) = diag(0,0,1,1) for any mass.
        for mass in [1.0, 0.5, 2.0] {
            let pp = projector_at([0.0; 3], Sign::Plus, mass);
            let pm = projector_at([0.0; 3], Sign::Minus, mass);
            for i in 0..4 {
                for j in 0..4 {
                    let want_p = if i == j && i < 2 { 1.0 } else { 0.0 };
                    let want_m = if i == j && i >= 2 { 1.0 } else { 0.0 };
                    assert!((pp.0[i][j] - C64::new(want_p, 0.0)).norm() < 1e-15);
                    assert!((pm.0[i][j] - C64::new(want_m, 0.0)).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn projector_identities_random_sweep() {
        let r = identity_suite(1.0, 10_000, 42);
        assert!(r.max() <= 1e-12, "residuals {:?}", r);
    }

    #[test]
    fn projector_identities_offdefault_mass() {
        let r = identity_suite(1.7, 2_000, 3);
        assert!(r.max() <= 1e-12, "residuals {:?}", r);
    }

    #[test]
    fn riesz_relation_specific_points() {
        // xi = 0: alpha^j Pi_theta(0) = Pi_{-theta}(0) alpha^j, scalar term vanishes.
        for j in 0..3 {
            for th in Sign::BOTH {
                assert!(riesz_commutation_check([0.0; 3], j, th, 1.0) < 1e-15);
            }
        }
        assert!(riesz_commutation_check([1.0, 0.0, 0.0], 0, Sign::Plus, 1.0) <= 1e-13);
    }

    #[test]
    fn project_value_matches_matrix() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let xi = [
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ];
            let v = [
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            ];
            for th in Sign::BOTH {
                let fast = project_value(xi, th, 1.0, &v);
                let slow = projector_at(xi, th, 1.0).apply(&v);
                for c in 0..4 {
                    assert!((fast[c] - slow[c]).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn rotation_symbol_vanishes_at_origin() {
        let m = rotation_commutator_symbol([0.0; 3], Sign::Plus, 0, 1, 1.0);
        assert!(m.frobenius_norm() < 1e-15);
    }

    #[test]
    fn boost_symbol_at_origin_is_half_i_alpha() {
        for th in Sign::BOTH {
            for j in 0..3 {
                let m = boost_commutator_symbol([0.0; 3], th, j, 1.0);
                let want = alpha(j).scale(I * C64::new(th.as_f64() * 0.5, 0.0));
                assert!(m.sub(&want).frobenius_norm() < 1e-15);
            }
        }
    }

    #[test]
    fn matrix_exponential_against_diagonal() {
        // exp of a diagonal matrix is elementwise.
        let mut d = Mat4::zero();
        for i in 0..4 {
            d.0[i][i] = C64::new(0.3 * i as f64, -0.2);
        }
        let e = d.exp();
        for i in 0..4 {
            assert!((e.0[i][i] - d.0[i][i].exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn massless_rejected() {
        assert!(validate_mass(0.0).is_err());
        assert!(validate_mass(-1.0).is_err());
        assert!(validate_mass(f64::NAN).is_err());
        assert!(validate_mass(1.0).is_ok());
    }
}
