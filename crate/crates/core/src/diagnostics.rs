//! Energy, dissipation, masses and extrema of a computed state, plus the
//! temporal convergence-rate table.

use crate::error::{Error, Result};
use crate::mesh::FemSpace;
use crate::physics::{concave_part, convex_part, nutrient_energy, ModelParams};
use crate::stepper::{FrozenCoefficients, SimState};

/// Slack allowed in `Eⁿ⁺¹ − Eⁿ + Dⁿ⁺¹ ≤ slack(Eⁿ)`.
pub fn energy_slack(previous_energy: f64) -> f64 {
    1e-8 * (1.0 + previous_energy.abs())
}

/// Relative tolerance on mass drift over a run.
pub const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    /// `(ε/2)φᵀKφ`
    pub gradient_part: f64,
    /// `Σβ_j (F₁,δ − F₂)(φ_j) / ε`
    pub potential_part: f64,
    /// `Σβ_j h(φ_j, c_j)`
    pub nutrient_part: f64,
    /// `(στ²/2) Σβ_j μ_j²`
    pub stabilization_part: f64,
    pub total: f64,
    pub dissipation_m: f64,
    pub dissipation_g: f64,
}

impl EnergyReport {
    pub fn with_dissipation(mut self, (dm, dg): (f64, f64)) -> Self {
        self.dissipation_m = dm;
        self.dissipation_g = dg;
        self
    }
}

/// Discrete energy of `state`. Dissipation fields are left at zero; see
/// [`dissipation`].
pub fn discrete_energy(space: &FemSpace, state: &SimState, p: &ModelParams) -> Result<EnergyReport> {
    let beta = space.weights();
    beta.same_mesh(&state.phi)?;
    beta.same_mesh(&state.c)?;
    beta.same_mesh(&state.mu)?;
    let phi = state.phi.values();

    let gradient_part = 0.5 * p.eps * space.stiffness().bilinear(phi, phi)?;
    let mut potential = 0.0;
    let mut nutrient = 0.0;
    let mut mu_sq = 0.0;
    for j in 0..phi.len() {
        let b = beta[j];
        potential += b * (convex_part(phi[j], p.delta)? - concave_part(phi[j], p.theta0));
        nutrient += b * nutrient_energy(phi[j], state.c[j]);
        mu_sq += b * state.mu[j] * state.mu[j];
    }
    let potential_part = potential / p.eps;
    let stabilization_part = 0.5 * p.sigma * p.tau * p.tau * mu_sq;
    Ok(EnergyReport {
        gradient_part,
        potential_part,
        nutrient_part: nutrient,
        stabilization_part,
        total: gradient_part + potential_part + nutrient + stabilization_part,
        dissipation_m: 0.0,
        dissipation_g: 0.0,
    })
}

/// `(D_m, D_g)` of the step `previous → current`, with the triangle weights
/// the stepper froze at `previous`:
///
/// ```text
/// D_m = τ Σ_T m_T |∇μⁿ⁺¹ − c̄ⁿ_T ∇(cⁿ⁺¹ − φⁿ)|² |T|
/// D_g = τ Σ_T g_T |∇(cⁿ⁺¹ − φⁿ)|² |T|
/// ```
pub fn dissipation(space: &FemSpace, previous: &SimState, current: &SimState, p: &ModelParams) -> Result<(f64, f64)> {
    let beta = space.weights();
    for f in [
        &previous.phi,
        &previous.c,
        &previous.mu,
        &current.phi,
        &current.c,
        &current.mu,
    ] {
        beta.same_mesh(f)?;
    }
    let coeffs = FrozenCoefficients::new(space, previous, p)?;
    let mesh = space.mesh();
    let chem: Vec<f64> = current
        .c
        .values()
        .iter()
        .zip(previous.phi.values())
        .map(|(c, f)| c - f)
        .collect();
    let (mut dm, mut dg) = (0.0, 0.0);
    for t in 0..mesh.triangle_count() {
        let area = mesh.area(t);
        let gh = mesh.gradient(&chem, t);
        let gmu = mesh.gradient(current.mu.values(), t);
        let cb = coeffs.c_bar[t];
        let flux = [gmu[0] - cb * gh[0], gmu[1] - cb * gh[1]];
        dm += coeffs.mobility[t] * (flux[0] * flux[0] + flux[1] * flux[1]) * area;
        dg += coeffs.diffusivity[t] * (gh[0] * gh[0] + gh[1] * gh[1]) * area;
    }
    Ok((p.tau * dm, p.tau * dg))
}

/// `((c, 1)_h, (φ + στ²μ, 1)_h)`.
pub fn masses(space: &FemSpace, state: &SimState, p: &ModelParams) -> Result<(f64, f64)> {
    let beta = space.weights();
    beta.same_mesh(&state.c)?;
    beta.same_mesh(&state.phi)?;
    beta.same_mesh(&state.mu)?;
    let s = p.sigma * p.tau * p.tau;
    let mut c_mass = 0.0;
    let mut combo = 0.0;
    for j in 0..beta.len() {
        c_mass += beta[j] * state.c[j];
        combo += beta[j] * (state.phi[j] + s * state.mu[j]);
    }
    Ok((c_mass, combo))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrema {
    pub phi_min: f64,
    pub phi_max: f64,
    pub c_min: f64,
    pub c_max: f64,
}

pub fn extrema(state: &SimState) -> Extrema {
    Extrema {
        phi_min: state.phi.min(),
        phi_max: state.phi.max(),
        c_min: state.c.min(),
        c_max: state.c.max(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub tau: f64,
    pub error_phi: f64,
    /// Rate against the previous row; absent on the first row or when an
    /// error is zero.
    pub rate_phi: Option<f64>,
    pub error_c: f64,
    pub rate_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

fn rate(e_prev: f64, e: f64, tau_prev: f64, tau: f64) -> Option<f64> {
    (e_prev > 0.0 && e > 0.0).then(|| (e_prev / e).ln() / (tau_prev / tau).ln())
}

/// Builds the rate table from `(τ, e_φ, e_c)` rows, ordered by decreasing τ.
pub fn convergence_rates(errors: &[(f64, f64, f64)]) -> Result<RateTable> {
    if errors.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "errors",
            reason: format!("need at least two rows, got {}", errors.len()),
        });
    }
    for w in errors.windows(2) {
        if !(w[1].0 < w[0].0 && w[1].0 > 0.0) {
            return Err(Error::InvalidParameter {
                name: "errors",
                reason: format!(
                    "time steps must be positive and decreasing, got {} then {}",
                    w[0].0, w[1].0
                ),
            });
        }
    }
    let rows = errors
        .iter()
        .enumerate()
        .map(|(k, &(tau, ep, ec))| {
            let prev = k.checked_sub(1).map(|i| errors[i]);
            RateRow {
                tau,
                error_phi: ep,
                rate_phi: prev.and_then(|(t0, e0, _)| rate(e0, ep, t0, tau)),
                error_c: ec,
                rate_c: prev.and_then(|(t0, _, e0)| rate(e0, ec, t0, tau)),
            }
        })
        .collect();
    Ok(RateTable { rows })
}
