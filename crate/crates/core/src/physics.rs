//! Scalar model functions: Flory–Huggins potential and its convex/concave
//! split, the regularized convex part, nutrient energy, mobilities.
//!
//! Naming follows the energy split `F = F₁ − F₂`, `h = h₁ − h₂`:
//! `convex_*` is `F₁` (or its regularization `F₁,δ`), `concave_*` is `F₂`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diffusivity `g(c)` of the nutrient. Must be nonnegative with `g(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diffusivity {
    /// `g(c) = c²`
    #[default]
    Quadratic,
}

impl Diffusivity {
    pub fn eval(self, c: f64) -> f64 {
        match self {
            Diffusivity::Quadratic => c * c,
        }
    }
}

impl FromStr for Diffusivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(Diffusivity::Quadratic),
            other => Err(Error::UnknownDiffusivity(other.to_string())),
        }
    }
}

impl fmt::Display for Diffusivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusivity::Quadratic => f.write_str("quadratic"),
        }
    }
}

/// Physical and numerical constants of one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Interface width ε.
    pub eps: f64,
    /// Flory–Huggins interaction parameter θ₀.
    pub theta0: f64,
    /// Stabilization weight σ.
    pub sigma: f64,
    /// Regularization δ of the logarithm; 0 runs the singular potential.
    pub delta: f64,
    /// Time step τ.
    pub tau: f64,
    pub diffusivity: Diffusivity,
    pub side_length: f64,
    pub cells_per_side: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            eps: 0.15,
            theta0: 7.0,
            sigma: 0.1,
            delta: 1e-3,
            tau: 1e-3,
            diffusivity: Diffusivity::Quadratic,
            side_length: 2.0 * std::f64::consts::PI,
            cells_per_side: 60,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                })
            }
        };
        positive("eps", self.eps)?;
        positive("theta0", self.theta0)?;
        positive("sigma", self.sigma)?;
        positive("tau", self.tau)?;
        positive("side_length", self.side_length)?;
        check_delta(self.delta)?;
        if self.cells_per_side < 2 {
            return Err(Error::InvalidParameter {
                name: "mesh",
                reason: format!("need at least 2 cells per side, got {}", self.cells_per_side),
            });
        }
        Ok(())
    }

    /// `true` when the singular logarithm is used (δ = 0).
    pub fn is_singular(&self) -> bool {
        self.delta == 0.0
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..0.5).contains(&delta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("must lie in [0, 1/2), got {delta}"),
        })
    }
}

fn check_open_unit(function: &'static str, phi: f64) -> Result<()> {
    if phi > 0.0 && phi < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            function,
            value: phi,
            domain: "(0, 1)",
        })
    }
}

/// `F(φ) = φ ln φ + (1−φ) ln(1−φ) − (θ₀/2) φ(φ−1)`.
pub fn flory_huggins(phi: f64, theta0: f64) -> Result<f64> {
    Ok(convex_part(phi, 0.0)? - concave_part(phi, theta0))
}

/// `f = F′ = ln(φ/(1−φ)) + (θ₀/2)(1−2φ)`.
pub fn flory_huggins_prime(phi: f64, theta0: f64) -> Result<f64> {
    check_open_unit("f", phi)?;
    Ok((phi / (1.0 - phi)).ln() + 0.5 * theta0 * (1.0 - 2.0 * phi))
}

/// `F₁,δ`: entropy `φ ln φ + (1−φ) ln(1−φ)` with each logarithmic
/// singularity replaced by its quadratic Taylor extension below `δ` and
/// above `1−δ`. With `δ = 0` the unregularized entropy on `(0, 1)`.
pub fn convex_part(phi: f64, delta: f64) -> Result<f64> {
    Ok(match branch(phi, delta)? {
        Branch::Lower => branches::lower(phi, delta)[0],
        Branch::Middle => branches::middle(phi)[0],
        Branch::Upper => branches::upper(phi, delta)[0],
    })
}

/// `f₁,δ = F₁,δ′`, continuously differentiable on ℝ for `δ > 0`.
pub fn convex_part_prime(phi: f64, delta: f64) -> Result<f64> {
    Ok(match branch(phi, delta)? {
        Branch::Lower => branches::lower(phi, delta)[1],
        Branch::Middle => branches::middle(phi)[1],
        Branch::Upper => branches::upper(phi, delta)[1],
    })
}

/// `f₁,δ′`.
pub fn convex_part_second(phi: f64, delta: f64) -> Result<f64> {
    Ok(match branch(phi, delta)? {
        Branch::Lower => branches::lower(phi, delta)[2],
        Branch::Middle => branches::middle(phi)[2],
        Branch::Upper => branches::upper(phi, delta)[2],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Lower,
    Middle,
    Upper,
}

fn branch(phi: f64, delta: f64) -> Result<Branch> {
    check_delta(delta)?;
    if delta == 0.0 {
        check_open_unit("F1", phi)?;
        return Ok(Branch::Middle);
    }
    Ok(if phi <= delta {
        Branch::Lower
    } else if phi < 1.0 - delta {
        Branch::Middle
    } else {
        Branch::Upper
    })
}

/// `[F₁,δ, f₁,δ, f₁,δ′]` on each branch.
mod branches {
    pub(super) fn lower(phi: f64, delta: f64) -> [f64; 3] {
        let ln_d = delta.ln();
        let s = phi - delta;
        [
            (1.0 - phi) * (1.0 - phi).ln() + s * s / (2.0 * delta) + (ln_d + 1.0) * s + delta * ln_d,
            s / delta + ln_d - (1.0 - phi).ln(),
            1.0 / delta + 1.0 / (1.0 - phi),
        ]
    }

    pub(super) fn middle(phi: f64) -> [f64; 3] {
        [
            phi * phi.ln() + (1.0 - phi) * (1.0 - phi).ln(),
            phi.ln() - (1.0 - phi).ln(),
            1.0 / phi + 1.0 / (1.0 - phi),
        ]
    }

    pub(super) fn upper(phi: f64, delta: f64) -> [f64; 3] {
        let ln_d = delta.ln();
        let s = phi - 1.0 + delta;
        [
            phi * phi.ln() + s * s / (2.0 * delta) - (ln_d + 1.0) * s + delta * ln_d,
            s / delta + phi.ln() - ln_d,
            1.0 / delta + 1.0 / phi,
        ]
    }
}

/// `F₂(φ) = (θ₀/2) φ(φ−1)`.
pub fn concave_part(phi: f64, theta0: f64) -> f64 {
    0.5 * theta0 * phi * (phi - 1.0)
}

/// `f₂(φ) = (θ₀/2)(2φ−1)`.
pub fn concave_part_prime(phi: f64, theta0: f64) -> f64 {
    0.5 * theta0 * (2.0 * phi - 1.0)
}

/// `h(φ, c) = c²/2 + c(1−φ)`.
pub fn nutrient_energy(phi: f64, c: f64) -> f64 {
    0.5 * c * c + c * (1.0 - phi)
}

/// `∂h/∂c = c + 1 − φ`.
pub fn nutrient_energy_dc(phi: f64, c: f64) -> f64 {
    c + 1.0 - phi
}

/// `∂h/∂φ = −c`.
pub fn nutrient_energy_dphi(_phi: f64, c: f64) -> f64 {
    -c
}

/// Convex part `h₁(c) = c²/2`.
pub fn nutrient_convex(c: f64) -> f64 {
    0.5 * c * c
}

/// Subtracted part `h₂(φ, c) = c(φ−1)`.
pub fn nutrient_split(phi: f64, c: f64) -> f64 {
    c * (phi - 1.0)
}

/// Degenerate mobility `m(φ) = φ²(1−φ)²`.
pub fn mobility(phi: f64) -> f64 {
    let q = phi * (1.0 - phi);
    q * q
}

/// `M(φ, c) = [[m, −c m], [−c m, g(c) + c² m]]`.
pub fn mobility_matrix(phi: f64, c: f64, kind: Diffusivity) -> [[f64; 2]; 2] {
    let m = mobility(phi);
    [[m, -c * m], [-c * m, kind.eval(c) + c * c * m]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const THETA0: f64 = 7.0;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / (1u64 << 53) as f64
    }

    #[test]
    fn flory_huggins_values() {
        // ln(0.5) + 7/8
        let expected = 0.5f64.ln() + 0.875;
        assert!((flory_huggins(0.5, THETA0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.181853).abs() < 1e-6);
        assert!(flory_huggins_prime(0.5, 3.0).unwrap().abs() < 1e-15);
        assert!(flory_huggins_prime(0.5, THETA0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn flory_huggins_domain() {
        for phi in [0.0, 1.0, -0.1, 1.2, f64::NAN] {
            assert!(matches!(flory_huggins(phi, THETA0), Err(Error::Domain { .. })));
            assert!(matches!(flory_huggins_prime(phi, THETA0), Err(Error::Domain { .. })));
        }
    }

    #[test]
    fn flory_huggins_symmetry() {
        let mut seed = 2;
        for _ in 0..200 {
            let phi = 1e-6 + (1.0 - 2e-6) * lcg(&mut seed);
            let a = flory_huggins(phi, THETA0).unwrap();
            let b = flory_huggins(1.0 - phi, THETA0).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn regularized_branch_values() {
        assert_eq!(convex_part_prime(0.5, 1e-3).unwrap(), 0.0);
        let expected = -0.5 + 0.01f64.ln() - 0.995f64.ln();
        let got = convex_part_prime(0.005, 0.01).unwrap();
        assert!((got - expected).abs() < 1e-14);
        assert!((got + 5.100157).abs() < 1e-6);
    }

    #[test]
    fn regularized_branches_meet() {
        for delta in [1e-3, 0.01, 0.1, 0.25, 0.49] {
            let lo = branches::lower(delta, delta);
            let mid = branches::middle(delta);
            let hi_knot = 1.0 - delta;
            let mid_hi = branches::middle(hi_knot);
            let hi = branches::upper(hi_knot, delta);
            for k in 0..2 {
                assert!((lo[k] - mid[k]).abs() <= 1e-12, "lower knot, delta {delta}, k {k}");
                assert!((hi[k] - mid_hi[k]).abs() <= 1e-12, "upper knot, delta {delta}, k {k}");
            }
            let at = delta.ln() - (1.0 - delta).ln();
            assert!((lo[1] - at).abs() <= 1e-12);
            assert_eq!(branch(delta, delta).unwrap(), Branch::Lower);
            assert_eq!(branch(hi_knot, delta).unwrap(), Branch::Upper);
        }
    }

    #[test]
    fn regularized_is_defined_everywhere() {
        for phi in [-3.0, -0.5, 0.0, 1.0, 1.7, 4.0] {
            assert!(convex_part(phi, 1e-3).unwrap().is_finite());
            assert!(convex_part_prime(phi, 1e-3).unwrap().is_finite());
            assert!(convex_part_second(phi, 1e-3).unwrap().is_finite());
        }
    }

    #[test]
    fn delta_validation() {
        for bad in [-1e-3, 0.5, 0.7] {
            assert!(matches!(
                convex_part_prime(0.3, bad),
                Err(Error::InvalidParameter { .. })
            ));
        }
        assert!(matches!(convex_part_prime(1.2, 0.0), Err(Error::Domain { .. })));
        assert!(convex_part_prime(0.3, 0.0).is_ok());
    }

    #[test]
    fn concave_part_values() {
        assert_eq!(concave_part_prime(0.5, THETA0), 0.0);
        assert_eq!(concave_part(0.0, THETA0), 0.0);
        assert_eq!(concave_part(1.0, THETA0), 0.0);
        assert_eq!(concave_part_prime(1.0, THETA0), 3.5);
    }

    #[test]
    fn nutrient_energy_values() {
        assert_eq!(nutrient_energy(1.0, 0.6), 0.5 * 0.6 * 0.6);
        assert!((nutrient_energy_dc(0.3, 0.4) - 1.1).abs() < 1e-15);
        assert_eq!(nutrient_energy_dphi(0.3, 0.4), -0.4);
        let mut seed = 12;
        for _ in 0..100 {
            let phi = 4.0 * lcg(&mut seed) - 2.0;
            let c = 4.0 * lcg(&mut seed) - 2.0;
            let split = nutrient_convex(c) - nutrient_split(phi, c);
            assert!((nutrient_energy(phi, c) - split).abs() <= 1e-14);
        }
    }

    #[test]
    fn mobility_values() {
        assert_eq!(mobility(0.0), 0.0);
        assert_eq!(mobility(1.0), 0.0);
        assert_eq!(mobility(0.5), 0.0625);
        let mut seed = 3;
        for _ in 0..100 {
            let phi = 3.0 * lcg(&mut seed) - 1.0;
            assert!((mobility(phi) - mobility(1.0 - phi)).abs() <= 1e-14);
            assert!(mobility(phi) >= 0.0);
        }
    }

    #[test]
    fn diffusivity_values() {
        let g = Diffusivity::Quadratic;
        assert_eq!(g.eval(0.0), 0.0);
        assert_eq!(g.eval(-0.5), 0.25);
        assert_eq!(g.eval(3.0), 9.0);
        assert_eq!("quadratic".parse::<Diffusivity>().unwrap(), g);
        assert!(matches!(
            "cubic".parse::<Diffusivity>(),
            Err(Error::UnknownDiffusivity(_))
        ));
    }

    #[test]
    fn mobility_matrix_examples() {
        let g = Diffusivity::Quadratic;
        let at_zero = mobility_matrix(0.0, 0.5, g);
        assert_eq!(at_zero, [[0.0, 0.0], [0.0, 0.25]]);
        let m = mobility_matrix(0.5, 1.0, g);
        assert_eq!(m, [[1.0 / 16.0, -1.0 / 16.0], [-1.0 / 16.0, 17.0 / 16.0]]);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((det - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        let bad = ModelParams {
            eps: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelParams {
            delta: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelParams {
            cells_per_side: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(ModelParams {
            delta: 0.0,
            ..Default::default()
        }
        .is_singular());
    }

    /// Central differences against each analytic derivative, per branch.
    #[test]
    fn antiderivatives_match_by_finite_differences() {
        let e = 1e-5;
        let central = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + e) - f(x - e)) / (2.0 * e);
        for delta in [1e-3, 0.05, 0.2] {
            let grid: Vec<f64> = (0..=400).map(|k| -1.0 + 3.0 * k as f64 / 400.0).collect();
            for &phi in &grid {
                // keep the stencil on one branch
                if (phi - delta).abs() < 2.0 * e || (phi - 1.0 + delta).abs() < 2.0 * e {
                    continue;
                }
                let fd = central(&|x| convex_part(x, delta).unwrap(), phi);
                let exact = convex_part_prime(phi, delta).unwrap();
                // truncation: third derivative on the branch scales like
                // 1/min(φ,1−φ,δ)²; rounding: ε_mach |F| / e
                let scale = 1.0 / phi.abs().max(delta).min((1.0 - phi).abs().max(delta)).powi(2);
                let rounding = 4.0 * f64::EPSILON * convex_part(phi, delta).unwrap().abs().max(1.0) / e;
                assert!(
                    (fd - exact).abs() <= 10.0 * scale * e * e + rounding,
                    "phi {phi} delta {delta}"
                );

                let fd2 = central(&|x| convex_part_prime(x, delta).unwrap(), phi);
                let exact2 = convex_part_second(phi, delta).unwrap();
                let scale2 = scale / phi.abs().max(delta).min((1.0 - phi).abs().max(delta));
                let rounding2 = 4.0 * f64::EPSILON * exact.abs().max(1.0) / e;
                assert!(
                    (fd2 - exact2).abs() <= 10.0 * scale2 * e * e + rounding2,
                    "phi {phi} delta {delta}"
                );
            }
        }
        for k in 1..100 {
            let phi = k as f64 / 100.0;
            let fd = central(&|x| concave_part(x, THETA0), phi);
            assert!((fd - concave_part_prime(phi, THETA0)).abs() <= 1e-9);
            if phi > 2.0 * e && phi < 1.0 - 2.0 * e {
                let fd = central(&|x| flory_huggins(x, THETA0).unwrap(), phi);
                let scale = 1.0 / phi.min(1.0 - phi).powi(2);
                assert!((fd - flory_huggins_prime(phi, THETA0).unwrap()).abs() <= 10.0 * scale * e * e + 1e-9);
            }
        }
    }

    #[test]
    fn regularized_prime_is_increasing_with_slope_at_least_four() {
        for delta in [1e-3, 0.01, 0.1, 0.25] {
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=50_000 {
                let phi = -2.0 + 5.0 * k as f64 / 50_000.0;
                let v = convex_part_prime(phi, delta).unwrap();
                assert!(v > prev);
                prev = v;
                assert!(convex_part_second(phi, delta).unwrap() >= 4.0 - 1e-12);
            }
        }
    }

    #[test]
    fn unregularized_split_identities() {
        let mut seed = 44;
        for _ in 0..200 {
            let phi = 1e-4 + (1.0 - 2e-4) * lcg(&mut seed);
            let whole = flory_huggins(phi, THETA0).unwrap();
            let split = convex_part(phi, 0.0).unwrap() - concave_part(phi, THETA0);
            assert!((whole - split).abs() <= 1e-12 * whole.abs().max(1e-3));
            let whole = flory_huggins_prime(phi, THETA0).unwrap();
            let split = convex_part_prime(phi, 0.0).unwrap() - concave_part_prime(phi, THETA0);
            assert!((whole - split).abs() <= 1e-12 * whole.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn mobility_matrix_is_psd_with_det_m_times_g(
            phi in -1.0f64..2.0,
            c in -3.0f64..3.0,
            x in -1.0f64..1.0,
            y in -1.0f64..1.0,
        ) {
            let g = Diffusivity::Quadratic;
            let m = mobility_matrix(phi, c, g);
            prop_assert_eq!(m[0][1], m[1][0]);
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let expected = mobility(phi) * g.eval(c);
            prop_assert!((det - expected).abs() <= 1e-12 * expected.max(m[1][1] * m[0][0]).max(1e-300));
            let trace = m[0][0] + m[1][1];
            let disc = ((m[0][0] - m[1][1]).powi(2) + 4.0 * m[0][1] * m[0][1]).sqrt();
            let lambda_min = 0.5 * (trace - disc);
            prop_assert!(lambda_min >= -1e-14 * trace.max(1.0));
            let q = m[0][0] * x * x + 2.0 * m[0][1] * x * y + m[1][1] * y * y;
            prop_assert!(q >= -1e-12 * trace.max(1.0));
        }
    }
}
