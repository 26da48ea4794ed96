//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Three operations: step a small simulation and read its fields, sample
//! the regularized double-well potential, and evaluate the mobility matrix.

use wasm_bindgen::prelude::*;

use chx_core::diagnostics::{discrete_energy, masses};
use chx_core::experiments::{gen_initial, InitialSpec};
use chx_core::mesh::FemSpace;
use chx_core::physics::{concave_part, convex_part, mobility_matrix, Diffusivity, ModelParams};
use chx_core::stepper::{initial_state, MuInit, NewtonSettings, SimState, Stepper};

fn js_err(e: chx_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A running simulation on an `M × M` periodic mesh.
#[wasm_bindgen]
pub struct Simulation {
    stepper: Stepper,
    space: FemSpace,
    state: SimState,
    newton_iterations: usize,
}

#[wasm_bindgen]
impl Simulation {
    /// Seeded start `φ⁰ = phi_scale·u + phi_offset`, `c⁰ = 0.1·u + 0.4`.
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mesh: usize,
        eps: f64,
        theta0: f64,
        sigma: f64,
        delta: f64,
        tau: f64,
        phi_scale: f64,
        phi_offset: f64,
        seed: u32,
    ) -> Result<Simulation, JsError> {
        let p = ModelParams {
            eps,
            theta0,
            sigma,
            delta,
            tau,
            cells_per_side: mesh,
            ..ModelParams::default()
        };
        Self::build(p, phi_scale, phi_offset, seed as u64).map_err(js_err)
    }

    fn build(p: ModelParams, phi_scale: f64, phi_offset: f64, seed: u64) -> chx_core::Result<Simulation> {
        let stepper = Stepper::new(p, NewtonSettings::default())?;
        let space = stepper.space().clone();
        let spec = InitialSpec {
            phi_scale,
            phi_offset,
            ..InitialSpec::default()
        };
        let (phi, c) = gen_initial(space.mesh(), &spec, seed)?;
        let state = initial_state(&space, phi, c, &p, MuInit::Consistent)?;
        Ok(Simulation {
            stepper,
            space,
            state,
            newton_iterations: 0,
        })
    }

    /// Advances `n` steps; on failure the state stays at the last good step.
    pub fn step(&mut self, n: usize) -> Result<(), JsError> {
        for _ in 0..n {
            let (next, stats) = self.stepper.advance(&self.state).map_err(js_err)?;
            self.newton_iterations = stats.iterations;
            self.state = next;
        }
        Ok(())
    }

    pub fn mesh(&self) -> usize {
        self.space.mesh().cells_per_side()
    }

    pub fn steps(&self) -> usize {
        self.state.step
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Newton iterations of the last step.
    pub fn newton_iterations(&self) -> usize {
        self.newton_iterations
    }

    /// Nodal values, row-major with node `j·M + i`.
    pub fn phi(&self) -> Vec<f64> {
        self.state.phi.values().to_vec()
    }

    pub fn c(&self) -> Vec<f64> {
        self.state.c.values().to_vec()
    }

    pub fn energy(&self) -> Result<f64, JsError> {
        let p = self.stepper.params();
        Ok(discrete_energy(&self.space, &self.state, p).map_err(js_err)?.total)
    }

    /// Lumped integral of `c`; constant in time.
    pub fn nutrient_mass(&self) -> Result<f64, JsError> {
        let p = self.stepper.params();
        Ok(masses(&self.space, &self.state, p).map_err(js_err)?.0)
    }
}

/// `F₁,δ(φ) − F₂(φ)` at `n` equispaced points of `[lo, hi]`. Points where
/// the potential is undefined (outside `(0, 1)` when `δ = 0`) are NaN.
#[wasm_bindgen]
pub fn potential_curve(theta0: f64, delta: f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            let phi = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            convex_part(phi, delta).map_or(f64::NAN, |f| f - concave_part(phi, theta0))
        })
        .collect()
}

/// Entries `[m11, m12, m22, det, trace]` of the mobility matrix at `(φ, c)`
/// with `g(c) = c²`.
#[wasm_bindgen]
pub fn mobility_at(phi: f64, c: f64) -> Vec<f64> {
    let m = mobility_matrix(phi, c, Diffusivity::Quadratic);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    vec![m[0][0], m[0][1], m[1][1], det, m[0][0] + m[1][1]]
}
