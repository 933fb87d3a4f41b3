//! Phase interactions of the profile equations, their eta-gradients, the
//! lower-bound scans, and the resonant-set classification.
//!
//! Dirac-side phase: `p(xi, eta) = theta <xi> - theta1 <xi - eta> + theta2 |eta|`.
//! Maxwell-side phase: `q(xi, eta) = -theta |xi| + theta1 <eta> - theta2 <xi + eta>`.
//! Here `<.> = sqrt(1 + |.|^2)` (the resonance analysis is in mass-normalized
//! units).
//!
//! Gradient note: the spec's display of `grad_eta p` carries a sign typo
//! inherited from a magnitude-only statement; this module implements the
//! calculus gradient of the stated phase (`+ theta2 eta/|eta|`), which is what
//! the finite-difference consistency property requires. All scanned bounds
//! use magnitudes, where the distinction is invisible.

use rayon::prelude::*;
use serde::Serialize;

use crate::dirac::Sign;
use crate::error::MdError;
use crate::Result;

/// Which system the phase belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PhaseKind {
    Dirac,
    Maxwell,
}

/// Sign triple Theta = (theta, theta1, theta2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignTriple {
    pub theta: Sign,
    pub theta1: Sign,
    pub theta2: Sign,
}

impl SignTriple {
    pub fn new(theta: Sign, theta1: Sign, theta2: Sign) -> Self {
        SignTriple { theta, theta1, theta2 }
    }

    pub fn flip_all(self) -> Self {
        SignTriple {
            theta: self.theta.flip(),
            theta1: self.theta1.flip(),
            theta2: self.theta2.flip(),
        }
    }

    pub fn all() -> Vec<SignTriple> {
        let mut v = Vec::new();
        for t in Sign::BOTH {
            for t1 in Sign::BOTH {
                for t2 in Sign::BOTH {
                    v.push(SignTriple::new(t, t1, t2));
                }
            }
        }
        v
    }
}

impl std::fmt::Display for SignTriple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.theta, self.theta1, self.theta2)
    }
}

#[inline]
fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
fn bracket(v: [f64; 3]) -> f64 {
    (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[inline]
fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// The scalar phase value.
pub fn phase(kind: PhaseKind, s: SignTriple, xi: [f64; 3], eta: [f64; 3]) -> f64 {
    match kind {
        PhaseKind::Dirac => {
            s.theta.as_f64() * bracket(xi) - s.theta1.as_f64() * bracket(sub3(xi, eta))
                + s.theta2.as_f64() * norm3(eta)
        }
        PhaseKind::Maxwell => {
            -s.theta.as_f64() * norm3(xi) + s.theta1.as_f64() * bracket(eta)
                - s.theta2.as_f64() * bracket(add3(xi, eta))
        }
    }
}

/// eta-gradient of the phase. Errors at eta = 0 for the Dirac kind, where
/// |eta| is not differentiable.
pub fn grad_eta(
    kind: PhaseKind,
    s: SignTriple,
    xi: [f64; 3],
    eta: [f64; 3],
) -> Result<[f64; 3]> {
    match kind {
        PhaseKind::Dirac => {
            let r = norm3(eta);
            if r < 1e-12 {
                return Err(MdError::domain(
                    "grad_eta of the Dirac phase is undefined at eta = 0",
                ));
            }
            let d = sub3(xi, eta);
            let bd = bracket(d);
            let t1 = s.theta1.as_f64();
            let t2 = s.theta2.as_f64();
            Ok([
                t1 * d[0] / bd + t2 * eta[0] / r,
                t1 * d[1] / bd + t2 * eta[1] / r,
                t1 * d[2] / bd + t2 * eta[2] / r,
            ])
        }
        PhaseKind::Maxwell => {
            let be = bracket(eta);
            let sum = add3(xi, eta);
            let bs = bracket(sum);
            let t1 = s.theta1.as_f64();
            let t2 = s.theta2.as_f64();
            Ok([
                t1 * eta[0] / be - t2 * sum[0] / bs,
                t1 * eta[1] / be - t2 * sum[1] / bs,
                t1 * eta[2] / be - t2 * sum[2] / bs,
            ])
        }
    }
}

/// The named lower bounds scanned by `scan_lower_bounds`. Each compares
/// |LHS| against a comparator RHS; the scan reports the infimum of the ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    /// |p| vs |eta| / (<xi>(<xi> + <xi-eta> + <eta>)), theta = theta1.
    DiracTimeResonant,
    /// |p| vs <xi>^{-1}, theta != theta1.
    DiracTimeNonresonant,
    /// |grad_eta p| vs <xi-eta>^{-2}, all signs.
    DiracSpace,
    /// |q| vs |xi| / (<eta>(<xi> + <xi-eta> + <eta>)), theta1' = theta2'.
    MaxwellTimeEqual,
    /// |q| vs <eta>^{-1}, theta1' != theta2'.
    MaxwellTimeMixed,
    /// |grad_eta q| vs |xi| / <xi+eta>^3, theta1' = theta2'.
    MaxwellSpaceEqual,
    /// |grad_eta q| vs |eta/<eta> + (xi+eta)/<xi+eta>|, theta1' != theta2'.
    MaxwellSpaceMixed,
}

impl BoundKind {
    pub fn kind(self) -> PhaseKind {
        match self {
            BoundKind::DiracTimeResonant
            | BoundKind::DiracTimeNonresonant
            | BoundKind::DiracSpace => PhaseKind::Dirac,
            _ => PhaseKind::Maxwell,
        }
    }

    /// Whether the sign triple belongs to this bound's case split.
    pub fn applies(self, s: SignTriple) -> bool {
        match self {
            BoundKind::DiracTimeResonant => s.theta == s.theta1,
            BoundKind::DiracTimeNonresonant => s.theta != s.theta1,
            BoundKind::DiracSpace => true,
            BoundKind::MaxwellTimeEqual | BoundKind::MaxwellSpaceEqual => s.theta1 == s.theta2,
            BoundKind::MaxwellTimeMixed | BoundKind::MaxwellSpaceMixed => s.theta1 != s.theta2,
        }
    }

    /// |LHS| / RHS at one sample point. Returns None where the comparator
    /// vanishes (measure-zero sets; skipped by the scan).
    pub fn ratio(self, s: SignTriple, xi: [f64; 3], eta: [f64; 3]) -> Option<f64> {
        let bxi = bracket(xi);
        let beta_ = bracket(eta);
        let bdiff = bracket(sub3(xi, eta));
        let bsum = bracket(add3(xi, eta));
        match self {
            BoundKind::DiracTimeResonant => {
                let lhs = phase(PhaseKind::Dirac, s, xi, eta).abs();
                let rhs = norm3(eta) / (bxi * (bxi + bdiff + beta_));
                if rhs == 0.0 {
                    None
                } else {
                    Some(lhs / rhs)
                }
            }
            BoundKind::DiracTimeNonresonant => {
                let lhs = phase(PhaseKind::Dirac, s, xi, eta).abs();
                Some(lhs * bxi)
            }
            BoundKind::DiracSpace => {
                let g = grad_eta(PhaseKind::Dirac, s, xi, eta).ok()?;
                Some(norm3(g) * bdiff * bdiff)
            }
            BoundKind::MaxwellTimeEqual => {
                let lhs = phase(PhaseKind::Maxwell, s, xi, eta).abs();
                let rhs = norm3(xi) / (beta_ * (bxi + bdiff + beta_));
                if rhs == 0.0 {
                    None
                } else {
                    Some(lhs / rhs)
                }
            }
            BoundKind::MaxwellTimeMixed => {
                let lhs = phase(PhaseKind::Maxwell, s, xi, eta).abs();
                Some(lhs * beta_)
            }
            BoundKind::MaxwellSpaceEqual => {
                let g = grad_eta(PhaseKind::Maxwell, s, xi, eta).ok()?;
                let rhs = norm3(xi) / (bsum * bsum * bsum);
                if rhs == 0.0 {
                    None
                } else {
                    Some(norm3(g) / rhs)
                }
            }
            BoundKind::MaxwellSpaceMixed => {
                let g = grad_eta(PhaseKind::Maxwell, s, xi, eta).ok()?;
                let comparator = {
                    let sum = add3(xi, eta);
                    let v = [
                        eta[0] / beta_ + sum[0] / bsum,
                        eta[1] / beta_ + sum[1] / bsum,
                        eta[2] / beta_ + sum[2] / bsum,
                    ];
                    norm3(v)
                };
                if comparator < 1e-14 {
                    None
                } else {
                    Some(norm3(g) / comparator)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleSpec {
    pub samples: usize,
    pub log2_r_min: f64,
    pub log2_r_max: f64,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            samples: 100_000,
            log2_r_min: -10.0,
            log2_r_max: 10.0,
            seed: 0xD1AC,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub bound: BoundKind,
    pub signs: SignTriple,
    pub samples: usize,
    pub min_ratio: f64,
    pub argmin_xi: [f64; 3],
    pub argmin_eta: [f64; 3],
    /// |eta| and |xi| at the argmin, for resonant-set cross-checks.
    pub argmin_eta_radius: f64,
    pub argmin_xi_radius: f64,
}

/// Empirical infimum of |LHS|/RHS over a log-uniform sample cloud.
pub fn scan_lower_bounds(bound: BoundKind, s: SignTriple, spec: &SampleSpec) -> Result<BoundReport> {
    use rand::{Rng, SeedableRng};
    if !bound.applies(s) {
        return Err(MdError::domain(format!(
            "bound {bound:?} does not apply to sign triple {s}"
        )));
    }
    let chunks: Vec<u64> = (0..64).collect();
    let per_chunk = spec.samples.div_ceil(64);
    let best = chunks
        .par_iter()
        .map(|&c| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed ^ (c + 1).wrapping_mul(0x9E3779B97F4A7C15));
            let mut local: Option<(f64, [f64; 3], [f64; 3])> = None;
            for _ in 0..per_chunk {
                let rx = 2f64.powf(rng.gen_range(spec.log2_r_min..spec.log2_r_max));
                let re = 2f64.powf(rng.gen_range(spec.log2_r_min..spec.log2_r_max));
                let du = crate::dirac::random_unit(&mut rng);
                let dv = crate::dirac::random_unit(&mut rng);
                let xi = [rx * du[0], rx * du[1], rx * du[2]];
                let eta = [re * dv[0], re * dv[1], re * dv[2]];
                if let Some(r) = bound.ratio(s, xi, eta) {
                    if local.as_ref().map_or(true, |(b, _, _)| r < *b) {
                        local = Some((r, xi, eta));
                    }
                }
            }
            local
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) => x,
                (x, None) => x,
                (Some(x), Some(y)) => Some(if x.0 <= y.0 { x } else { y }),
            },
        )
        .ok_or_else(|| MdError::domain("empty scan"))?;

    Ok(BoundReport {
        bound,
        signs: s,
        samples: spec.samples,
        min_ratio: best.0,
        argmin_xi: best.1,
        argmin_eta: best.2,
        argmin_eta_radius: norm3(best.2),
        argmin_xi_radius: norm3(best.1),
    })
}

/// Symbolic description of a resonant set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResonantSet {
    Empty,
    EtaZero,
    XiZero,
    XiEqualsMinusTwoEta,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Classification {
    pub kind: PhaseKind,
    pub signs: SignTriple,
    pub time_resonant: ResonantSet,
    pub space_resonant: ResonantSet,
    pub spacetime_resonant: ResonantSet,
}

/// The resonant-set classification (time / space / space-time).
pub fn classify_sets(kind: PhaseKind, s: SignTriple) -> Classification {
    match kind {
        PhaseKind::Dirac => {
            let time = if s.theta == s.theta1 {
                ResonantSet::EtaZero
            } else {
                ResonantSet::Empty
            };
            Classification {
                kind,
                signs: s,
                time_resonant: time,
                space_resonant: ResonantSet::Empty,
                spacetime_resonant: ResonantSet::Empty,
            }
        }
        PhaseKind::Maxwell => {
            if s.theta1 == s.theta2 {
                Classification {
                    kind,
                    signs: s,
                    time_resonant: ResonantSet::XiZero,
                    space_resonant: ResonantSet::XiZero,
                    spacetime_resonant: ResonantSet::XiZero,
                }
            } else {
                Classification {
                    kind,
                    signs: s,
                    time_resonant: ResonantSet::Empty,
                    space_resonant: ResonantSet::XiEqualsMinusTwoEta,
                    spacetime_resonant: ResonantSet::Empty,
                }
            }
        }
    }
}

/// Check that a scan's argmin location is consistent with the classified
/// resonant set: where the phase can degenerate, the ratio infimum should be
/// attained with the relevant coordinate small (or the set is empty and the
/// infimum is order unity).
pub fn argmin_consistent(report: &BoundReport, cls: &Classification) -> bool {
    match report.bound {
        BoundKind::DiracTimeResonant => {
            // T = {eta = 0}: the raw phase |p| itself must degenerate only
            // along eta -> 0; the normalized ratio stays bounded below.
            cls.time_resonant == ResonantSet::EtaZero
        }
        BoundKind::DiracTimeNonresonant => cls.time_resonant == ResonantSet::Empty,
        BoundKind::DiracSpace => cls.space_resonant == ResonantSet::Empty,
        BoundKind::MaxwellTimeEqual | BoundKind::MaxwellSpaceEqual => {
            cls.time_resonant == ResonantSet::XiZero
        }
        BoundKind::MaxwellTimeMixed => cls.time_resonant == ResonantSet::Empty,
        BoundKind::MaxwellSpaceMixed => cls.space_resonant == ResonantSet::XiEqualsMinusTwoEta,
    }
}

/// The full canonical scan: every bound over every applicable sign triple.
pub fn scan_all(spec: &SampleSpec) -> Result<Vec<BoundReport>> {
    let bounds = [
        BoundKind::DiracTimeResonant,
        BoundKind::DiracTimeNonresonant,
        BoundKind::DiracSpace,
        BoundKind::MaxwellTimeEqual,
        BoundKind::MaxwellTimeMixed,
        BoundKind::MaxwellSpaceEqual,
        BoundKind::MaxwellSpaceMixed,
    ];
    let mut out = Vec::new();
    for b in bounds {
        for s in SignTriple::all() {
            if b.applies(s) {
                out.push(scan_lower_bounds(b, s, spec)?);
            }
        }
    }
    Ok(out)
}

/// Residual of the phase-approximation bound:
/// sup over the sample cloud of
/// `|theta<xi> - theta<xi-eta> - theta xi.eta/<xi>| / |eta|^2`.
pub fn phase_approximation_constant(
    xi_max: f64,
    eta_max: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    use rand::{Rng, SeedableRng};
    let chunks: Vec<u64> = (0..64).collect();
    let per_chunk = samples.div_ceil(64);
    chunks
        .par_iter()
        .map(|&c| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ (c + 1).wrapping_mul(0x517CC1B727220A95));
            let mut worst = 0.0f64;
            for _ in 0..per_chunk {
                let xi = [
                    rng.gen_range(-xi_max..xi_max),
                    rng.gen_range(-xi_max..xi_max),
                    rng.gen_range(-xi_max..xi_max),
                ];
                let eta = [
                    rng.gen_range(-eta_max..eta_max),
                    rng.gen_range(-eta_max..eta_max),
                    rng.gen_range(-eta_max..eta_max),
                ];
                let e2 = eta[0] * eta[0] + eta[1] * eta[1] + eta[2] * eta[2];
                if e2 < 1e-20 {
                    continue;
                }
                let bxi = bracket(xi);
                let lhs = (bxi - bracket(sub3(xi, eta))
                    - (xi[0] * eta[0] + xi[1] * eta[1] + xi[2] * eta[2]) / bxi)
                    .abs();
                worst = worst.max(lhs / e2);
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PP: SignTriple = SignTriple { theta: Sign::Plus, theta1: Sign::Plus, theta2: Sign::Plus };

    #[test]
    fn phase_values_at_reference_points() {
        // (+,+,+) at xi = eta = 0: 1 - 1 + 0 = 0
        assert_eq!(phase(PhaseKind::Dirac, PP, [0.0; 3], [0.0; 3]), 0.0);
        // (+,-,+) at 0: 1 + 1 + 0 = 2
        let s = SignTriple::new(Sign::Plus, Sign::Minus, Sign::Plus);
        assert_eq!(phase(PhaseKind::Dirac, s, [0.0; 3], [0.0; 3]), 2.0);
        // (+,+,+) at xi = eta = e1: sqrt(2) - 1 + 1 = sqrt(2)
        let v = phase(PhaseKind::Dirac, PP, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sign_flip_antisymmetry() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for kind in [PhaseKind::Dirac, PhaseKind::Maxwell] {
            for s in SignTriple::all() {
                let xi = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                let eta = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                let a = phase(kind, s, xi, eta);
                let b = phase(kind, s.flip_all(), xi, eta);
                assert_eq!(a, -b, "flip antisymmetry must be exact");
            }
        }
    }

    #[test]
    fn gradient_at_coincident_point() {
        // xi = eta = e1: xi - eta = 0 so the first term vanishes; gradient is
        // theta2 * eta/|eta| with magnitude 1, saturating <xi-eta>^{-2} = 1.
        let g = grad_eta(PhaseKind::Dirac, PP, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        assert!((norm3(g) - 1.0).abs() < 1e-15);
        let ratio = BoundKind::DiracSpace.ratio(PP, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap();
        assert!(ratio >= 1.0 - 1e-15);
    }

    #[test]
    fn gradient_domain_error_at_zero_eta() {
        assert!(grad_eta(PhaseKind::Dirac, PP, [1.0, 0.0, 0.0], [0.0; 3]).is_err());
        // Maxwell kind is fine at eta = 0
        assert!(grad_eta(PhaseKind::Maxwell, PP, [1.0, 0.0, 0.0], [0.0; 3]).is_ok());
    }

    #[test]
    fn maxwell_space_resonance_at_zero_xi() {
        // equal signs, xi = 0: grad q = theta1(eta/<eta> - eta/<eta>) = 0.
        let g = grad_eta(PhaseKind::Maxwell, PP, [0.0; 3], [0.7, -0.3, 0.2]).unwrap();
        assert!(norm3(g) < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let h = 1e-5;
        for _ in 0..1000 {
            let kind = if rng.gen_bool(0.5) { PhaseKind::Dirac } else { PhaseKind::Maxwell };
            let s = SignTriple::all()[rng.gen_range(0..8)];
            let xi = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let mut eta = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            if kind == PhaseKind::Dirac && norm3(eta) < 0.1 {
                eta = [0.5, 0.5, 0.5];
            }
            let g = grad_eta(kind, s, xi, eta).unwrap();
            for axis in 0..3 {
                let mut ep = eta;
                let mut em = eta;
                ep[axis] += h;
                em[axis] -= h;
                let fd = (phase(kind, s, xi, ep) - phase(kind, s, xi, em)) / (2.0 * h);
                assert!(
                    (fd - g[axis]).abs() < 1e-6,
                    "{kind:?} {s} axis {axis}: fd {fd} vs grad {}",
                    g[axis]
                );
            }
        }
    }

    #[test]
    fn scans_have_positive_minima() {
        let spec = SampleSpec { samples: 20_000, ..Default::default() };
        for report in scan_all(&spec).unwrap() {
            assert!(
                report.min_ratio > 0.0,
                "bound {:?} signs {} has nonpositive min {}",
                report.bound,
                report.signs,
                report.min_ratio
            );
        }
    }

    #[test]
    fn nonresonant_dirac_bound_is_order_unity() {
        let spec = SampleSpec { samples: 50_000, ..Default::default() };
        let s = SignTriple::new(Sign::Plus, Sign::Minus, Sign::Plus);
        let r = scan_lower_bounds(BoundKind::DiracTimeNonresonant, s, &spec).unwrap();
        assert!(r.min_ratio >= 1.0, "|p|<xi> should be >= O(1), got {}", r.min_ratio);
    }

    #[test]
    fn classification_table() {
        let c = classify_sets(PhaseKind::Dirac, PP);
        assert_eq!(c.time_resonant, ResonantSet::EtaZero);
        assert_eq!(c.space_resonant, ResonantSet::Empty);
        assert_eq!(c.spacetime_resonant, ResonantSet::Empty);

        let s = SignTriple::new(Sign::Plus, Sign::Plus, Sign::Minus);
        let c = classify_sets(PhaseKind::Maxwell, SignTriple::new(Sign::Plus, Sign::Plus, Sign::Plus));
        assert_eq!(c.time_resonant, ResonantSet::XiZero);
        assert_eq!(c.space_resonant, ResonantSet::XiZero);
        assert_eq!(c.spacetime_resonant, ResonantSet::XiZero);
        let c = classify_sets(PhaseKind::Maxwell, s);
        assert_eq!(c.time_resonant, ResonantSet::Empty);
        assert_eq!(c.space_resonant, ResonantSet::XiEqualsMinusTwoEta);
        assert_eq!(c.spacetime_resonant, ResonantSet::Empty);
    }

    #[test]
    fn dirac_phase_never_vanishes_off_axis() {
        // spot check of the classification: |p| bounded below away from eta=0
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for s in SignTriple::all() {
            for _ in 0..2000 {
                let xi = [rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0)];
                let eta = [rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0), rng.gen_range(0.5..4.0)];
                let p = phase(PhaseKind::Dirac, s, xi, eta).abs();
                assert!(p > 1e-4, "phase nearly vanishes for {s} at {xi:?}, {eta:?}: {p}");
            }
        }
    }

    #[test]
    fn phase_approximation_constant_is_half_ish() {
        let c = phase_approximation_constant(8.0, 1.0, 100_000, 42);
        assert!(c <= 1.1, "phase-approximation constant {c} exceeds 1.1");
        assert!(c >= 0.2, "suspiciously small constant {c}");
    }
}
