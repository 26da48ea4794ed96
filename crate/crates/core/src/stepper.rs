//! One time step of the stabilized semi-convex-splitting scheme.
//!
//! Unknowns at the new level are stacked as `x = (φ, c, μ)`, each block one
//! value per node. With lumped weights `B = diag(β)`, stiffness `K` and the
//! stiffness matrices `K_m`, `K_mc`, `K_mc²`, `K_g` weighted by coefficients
//! frozen at the old level, the residual reads
//!
//! ```text
//! R₁ = B(φ−φⁿ)/τ + στ B(μ−μⁿ) + K_m μ − K_mc (c − φⁿ)
//! R₂ = B(c−cⁿ)/τ + K_g (c−φⁿ) − K_mc μ + K_mc² (c − φⁿ)
//! R₃ = Bμ − εKφ − B f₁,δ(φ)/ε + B f₂(φⁿ)/ε + Bc
//! ```
//!
//! Only the `∂R₃/∂φ` block depends on the iterate. The whole coupled system
//! is solved by damped Newton. Each linear solve is GMRES on the exact
//! Jacobian, preconditioned by sparse LU factors of a recent Jacobian that
//! are refreshed when they stop paying off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{triangle_averages, FemSpace, MeshTag, NodalField};
use crate::physics::{concave_part_prime, convex_part_prime, convex_part_second, mobility, ModelParams};
use crate::sparse::{norm2, norm_inf, CsrMatrix, ReusingSolver, SolverStats};

/// Relative linear tolerance of the first Newton iteration of a step.
const INITIAL_FORCING: f64 = 1e-4;

/// Fields `(φ, c, μ)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub phi: NodalField,
    pub c: NodalField,
    pub mu: NodalField,
    pub step: usize,
    pub time: f64,
}

impl SimState {
    pub fn new(phi: NodalField, c: NodalField, mu: NodalField) -> Result<Self> {
        phi.same_mesh(&c)?;
        phi.same_mesh(&mu)?;
        Ok(Self {
            phi,
            c,
            mu,
            step: 0,
            time: 0.0,
        })
    }

    pub fn tag(&self) -> MeshTag {
        self.phi.tag()
    }

    pub fn node_count(&self) -> usize {
        self.phi.len()
    }

    fn unknowns(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(3 * self.node_count());
        x.extend_from_slice(self.phi.values());
        x.extend_from_slice(self.c.values());
        x.extend_from_slice(self.mu.values());
        x
    }

    fn from_unknowns(tag: MeshTag, x: &[f64], step: usize, time: f64) -> Self {
        let n = x.len() / 3;
        Self {
            phi: NodalField::from_parts(tag, x[..n].to_vec()),
            c: NodalField::from_parts(tag, x[n..2 * n].to_vec()),
            mu: NodalField::from_parts(tag, x[2 * n..].to_vec()),
            step,
            time,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSettings {
    /// Stop when `‖R‖∞ ≤ abs_tol` ...
    pub abs_tol: f64,
    /// ... or when `‖R‖∞ ≤ rel_tol ‖R(x₀)‖∞`.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Iterates must keep `φ ∈ (ω, 1−ω)` when δ = 0.
    pub phi_guard: f64,
    pub max_halvings: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-11,
            rel_tol: 1e-10,
            max_iter: 25,
            phi_guard: 1e-12,
            max_halvings: 8,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("newton_abs_tol", self.abs_tol), ("newton_rel_tol", self.rel_tol)] {
            if v.is_nan() || v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "newton_max_iter",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.phi_guard >= 0.0 && self.phi_guard < 0.5) {
            return Err(Error::InvalidParameter {
                name: "phi_guard",
                reason: format!("must lie in [0, 1/2), got {}", self.phi_guard),
            });
        }
        Ok(())
    }
}

/// How `μ⁰` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MuInit {
    /// Solve the μ-equation at `φ¹ = φ⁰`, `c¹ = c⁰` (see [`init_mu0`]).
    #[default]
    Consistent,
    Zero,
}

/// `μ⁰_j = (ε/β_j)(Kφ⁰)_j + (f₁,δ(φ⁰_j) − f₂(φ⁰_j))/ε − c⁰_j`.
pub fn init_mu0(space: &FemSpace, phi0: &NodalField, c0: &NodalField, p: &ModelParams) -> Result<NodalField> {
    let beta = space.weights();
    beta.same_mesh(phi0)?;
    beta.same_mesh(c0)?;
    let k_phi = space.stiffness().matvec(phi0.values())?;
    let mut mu = Vec::with_capacity(phi0.len());
    for j in 0..phi0.len() {
        let phi = phi0[j];
        let f = convex_part_prime(phi, p.delta)? - concave_part_prime(phi, p.theta0);
        mu.push(p.eps / beta[j] * k_phi[j] + f / p.eps - c0[j]);
    }
    Ok(NodalField::from_parts(phi0.tag(), mu))
}

pub fn initial_state(
    space: &FemSpace,
    phi0: NodalField,
    c0: NodalField,
    p: &ModelParams,
    init: MuInit,
) -> Result<SimState> {
    let mu0 = match init {
        MuInit::Consistent => init_mu0(space, &phi0, &c0, p)?,
        MuInit::Zero => space.mesh().zeros(),
    };
    SimState::new(phi0, c0, mu0)
}

/// Per-triangle coefficients frozen at the old level: `m(φ̄ⁿ)`, `c̄ⁿ` and
/// `g(c̄ⁿ)`, where bars are triangle averages.
#[derive(Debug, Clone)]
pub struct FrozenCoefficients {
    pub mobility: Vec<f64>,
    pub c_bar: Vec<f64>,
    pub diffusivity: Vec<f64>,
}

impl FrozenCoefficients {
    pub fn new(space: &FemSpace, state: &SimState, p: &ModelParams) -> Result<Self> {
        let phi_bar = triangle_averages(space.mesh(), &state.phi)?;
        let c_bar = triangle_averages(space.mesh(), &state.c)?;
        Ok(Self {
            mobility: phi_bar.iter().map(|&v| mobility(v)).collect(),
            diffusivity: c_bar.iter().map(|&v| p.diffusivity.eval(v)).collect(),
            c_bar,
        })
    }

    /// `m(φ̄) c̄` per triangle.
    pub fn mobility_c(&self) -> Vec<f64> {
        self.mobility.iter().zip(&self.c_bar).map(|(m, c)| m * c).collect()
    }

    /// `m(φ̄) c̄²` per triangle.
    pub fn mobility_c2(&self) -> Vec<f64> {
        self.mobility.iter().zip(&self.c_bar).map(|(m, c)| m * c * c).collect()
    }
}

/// Which 3×3 blocks of the Jacobian are stored, by block row.
const BLOCKS: [&[usize]; 3] = [&[0, 1, 2], &[1, 2], &[0, 1, 2]];

/// CSR layout of the block Jacobian. Every stored block uses the stiffness
/// pattern, so the layout is fixed per mesh and the LU symbolic analysis is
/// computed once.
#[derive(Debug, Clone)]
struct BlockLayout {
    n: usize,
    k_row_ptr: Vec<usize>,
    k_diag: Vec<usize>,
    pattern: CsrMatrix,
}

impl BlockLayout {
    fn new(k: &CsrMatrix) -> Self {
        let n = k.n_rows();
        let k_row_ptr = k.row_ptr().to_vec();
        let k_diag = (0..n).map(|i| k.position(i, i).expect("diagonal stored")).collect();
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        for blocks in BLOCKS {
            for i in 0..n {
                for &s in blocks {
                    for p in k_row_ptr[i]..k_row_ptr[i + 1] {
                        col_idx.push(s * n + k.col_idx()[p]);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        let mut t = crate::sparse::Triplets::new(3 * n, 3 * n);
        for r in 0..3 * n {
            for &col in &col_idx[row_ptr[r]..row_ptr[r + 1]] {
                t.push(r, col, 0.0);
            }
        }
        let pattern = t.compress().expect("layout indices in range");
        debug_assert_eq!(pattern.col_idx(), &col_idx[..]);
        Self {
            n,
            k_row_ptr,
            k_diag,
            pattern,
        }
    }

    /// Start of block `(r, s)` of node row `i` inside the value array.
    fn start(&self, r: usize, s: usize, i: usize) -> usize {
        let k = BLOCKS[r].iter().position(|&b| b == s).expect("stored block");
        let len = self.k_row_ptr[i + 1] - self.k_row_ptr[i];
        self.pattern.row_ptr()[r * self.n + i] + k * len
    }

    /// Writes `f(p)` for every stiffness-pattern position `p` of block `(r, s)`.
    fn fill(&self, values: &mut [f64], r: usize, s: usize, f: impl Fn(usize, usize) -> f64) {
        for i in 0..self.n {
            let start = self.start(r, s, i);
            for (offset, p) in (self.k_row_ptr[i]..self.k_row_ptr[i + 1]).enumerate() {
                values[start + offset] = f(i, p);
            }
        }
    }

    /// Value index of the diagonal entry of block `(r, s)` in node row `i`.
    fn diag_slot(&self, r: usize, s: usize, i: usize) -> usize {
        self.start(r, s, i) + self.k_diag[i] - self.k_row_ptr[i]
    }
}

/// The nonlinear system of one step, with everything that depends only on
/// the old state precomputed.
pub struct StepSystem<'a> {
    space: &'a FemSpace,
    params: ModelParams,
    singular_guard: Option<f64>,
    old: &'a SimState,
    k_m: CsrMatrix,
    k_mc: CsrMatrix,
    k_c_diff: CsrMatrix,
    /// `K_mc φⁿ`
    k_mc_phi_old: Vec<f64>,
    /// `(K_g + K_mc²) φⁿ`
    k_c_diff_phi_old: Vec<f64>,
    /// `f₂(φⁿ)/ε`
    explicit_potential: Vec<f64>,
    layout: BlockLayout,
    jacobian_const: Vec<f64>,
    guard_slots: Vec<usize>,
}

impl<'a> StepSystem<'a> {
    pub fn new(space: &'a FemSpace, old: &'a SimState, p: &ModelParams, settings: &NewtonSettings) -> Result<Self> {
        Self::with_layout(space, old, p, settings, BlockLayout::new(space.stiffness()))
    }

    fn with_layout(
        space: &'a FemSpace,
        old: &'a SimState,
        p: &ModelParams,
        settings: &NewtonSettings,
        layout: BlockLayout,
    ) -> Result<Self> {
        let beta = space.weights();
        beta.same_mesh(&old.phi)?;
        beta.same_mesh(&old.c)?;
        beta.same_mesh(&old.mu)?;

        let coeffs = FrozenCoefficients::new(space, old, p)?;
        let k_m = space.weighted_stiffness(&coeffs.mobility)?;
        let k_mc = space.weighted_stiffness(&coeffs.mobility_c())?;
        let k_g = space.weighted_stiffness(&coeffs.diffusivity)?;
        let k_mc2 = space.weighted_stiffness(&coeffs.mobility_c2())?;
        let k_c_diff = k_g.with_values(k_g.values().iter().zip(k_mc2.values()).map(|(a, b)| a + b).collect())?;

        let phi_old = old.phi.values();
        let k_mc_phi_old = k_mc.matvec(phi_old)?;
        let k_c_diff_phi_old = k_c_diff.matvec(phi_old)?;
        let explicit_potential = phi_old
            .iter()
            .map(|&v| concave_part_prime(v, p.theta0) / p.eps)
            .collect();

        let n = layout.n;
        let (tau, eps, sigma) = (p.tau, p.eps, p.sigma);
        let k = space.stiffness();
        let diag = |i: usize, pos: usize, scale: f64| if pos == layout.k_diag[i] { scale * beta[i] } else { 0.0 };
        let mut values = vec![0.0; layout.pattern.nnz()];
        layout.fill(&mut values, 0, 0, |i, q| diag(i, q, 1.0 / tau));
        layout.fill(&mut values, 0, 1, |_, q| -k_mc.values()[q]);
        layout.fill(&mut values, 0, 2, |i, q| diag(i, q, sigma * tau) + k_m.values()[q]);
        layout.fill(&mut values, 1, 1, |i, q| diag(i, q, 1.0 / tau) + k_c_diff.values()[q]);
        layout.fill(&mut values, 1, 2, |_, q| -k_mc.values()[q]);
        layout.fill(&mut values, 2, 0, |_, q| -eps * k.values()[q]);
        layout.fill(&mut values, 2, 1, |i, q| diag(i, q, 1.0));
        layout.fill(&mut values, 2, 2, |i, q| diag(i, q, 1.0));
        let guard_slots = (0..n).map(|i| layout.diag_slot(2, 0, i)).collect();

        Ok(Self {
            space,
            params: *p,
            singular_guard: p.is_singular().then_some(settings.phi_guard),
            old,
            k_m,
            k_mc,
            k_c_diff,
            k_mc_phi_old,
            k_c_diff_phi_old,
            explicit_potential,
            layout,
            jacobian_const: values,
            guard_slots,
        })
    }

    pub fn dimension(&self) -> usize {
        3 * self.layout.n
    }

    fn check_guard(&self, phi: &[f64]) -> Result<()> {
        if let Some(omega) = self.singular_guard {
            if let Some(node) = phi.iter().position(|&v| !(v > omega && v < 1.0 - omega)) {
                return Err(Error::Guard {
                    node,
                    lower: omega,
                    upper: 1.0 - omega,
                });
            }
        }
        Ok(())
    }

    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.layout.n;
        if x.len() != 3 * n {
            return Err(Error::LengthMismatch {
                expected: 3 * n,
                actual: x.len(),
            });
        }
        let (phi, rest) = x.split_at(n);
        let (c, mu) = rest.split_at(n);
        self.check_guard(phi)?;

        let p = &self.params;
        let beta = self.space.weights().values();
        let old = self.old;
        let k_m_mu = self.k_m.matvec(mu)?;
        let k_mc_c = self.k_mc.matvec(c)?;
        let k_mc_mu = self.k_mc.matvec(mu)?;
        let k_c_diff_c = self.k_c_diff.matvec(c)?;
        let k_phi = self.space.stiffness().matvec(phi)?;

        let mut r = vec![0.0; 3 * n];
        for j in 0..n {
            r[j] =
                beta[j] * (phi[j] - old.phi[j]) / p.tau + p.sigma * p.tau * beta[j] * (mu[j] - old.mu[j]) + k_m_mu[j]
                    - (k_mc_c[j] - self.k_mc_phi_old[j]);
            r[n + j] = beta[j] * (c[j] - old.c[j]) / p.tau - k_mc_mu[j] + (k_c_diff_c[j] - self.k_c_diff_phi_old[j]);
            let f1 = convex_part_prime(phi[j], p.delta)?;
            r[2 * n + j] = beta[j] * mu[j] - p.eps * k_phi[j] - beta[j] * f1 / p.eps
                + beta[j] * self.explicit_potential[j]
                + beta[j] * c[j];
        }
        Ok(r)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<CsrMatrix> {
        let n = self.layout.n;
        if x.len() != 3 * n {
            return Err(Error::LengthMismatch {
                expected: 3 * n,
                actual: x.len(),
            });
        }
        self.check_guard(&x[..n])?;
        let beta = self.space.weights().values();
        let mut values = self.jacobian_const.clone();
        for j in 0..n {
            let second = convex_part_second(x[j], self.params.delta)?;
            values[self.guard_slots[j]] -= beta[j] * second / self.params.eps;
        }
        self.layout.pattern.with_values(values)
    }
}

/// Residual and Jacobian of the step from `state_n` at the iterate `guess`.
pub fn assemble_step_system(
    space: &FemSpace,
    state_n: &SimState,
    guess: &SimState,
    p: &ModelParams,
    settings: &NewtonSettings,
) -> Result<(Vec<f64>, CsrMatrix)> {
    state_n.phi.same_mesh(&guess.phi)?;
    let system = StepSystem::new(space, state_n, p, settings)?;
    let x = guess.unknowns();
    Ok((system.residual(&x)?, system.jacobian(&x)?))
}

/// Newton history of one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    /// Linear solves performed.
    pub iterations: usize,
    /// `‖R‖∞` before the first and after every iteration.
    pub residual_norms: Vec<f64>,
    /// `‖Δx‖∞` of every accepted (possibly damped) update.
    pub increment_norms: Vec<f64>,
    pub halvings: usize,
}

impl StepStats {
    pub fn final_residual(&self) -> f64 {
        self.residual_norms.last().copied().unwrap_or(0.0)
    }
}

/// Time stepper owning the discretization and the linear solver state.
pub struct Stepper {
    space: FemSpace,
    params: ModelParams,
    settings: NewtonSettings,
    layout: BlockLayout,
    solver: ReusingSolver,
}

impl Stepper {
    pub fn new(params: ModelParams, settings: NewtonSettings) -> Result<Self> {
        params.validate()?;
        let space = FemSpace::build(params.cells_per_side, params.side_length)?;
        Self::with_space(space, params, settings)
    }

    pub fn with_space(space: FemSpace, params: ModelParams, settings: NewtonSettings) -> Result<Self> {
        params.validate()?;
        settings.validate()?;
        if space.mesh().cells_per_side() != params.cells_per_side || space.mesh().side_length() != params.side_length {
            return Err(Error::MeshMismatch);
        }
        let layout = BlockLayout::new(space.stiffness());
        Ok(Self {
            space,
            params,
            settings,
            layout,
            solver: ReusingSolver::new(),
        })
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn settings(&self) -> &NewtonSettings {
        &self.settings
    }

    /// Linear-solver work so far.
    pub fn solver_stats(&self) -> SolverStats {
        self.solver.stats()
    }

    pub fn advance(&mut self, old: &SimState) -> Result<(SimState, StepStats)> {
        let system = StepSystem::with_layout(&self.space, old, &self.params, &self.settings, self.layout.clone())?;
        let s = self.settings;
        let mut x = old.unknowns();
        let mut r = system.residual(&x)?;
        let r0 = norm_inf(&r);
        let mut r_norm = r0;
        let mut stats = StepStats {
            residual_norms: vec![r0],
            ..Default::default()
        };

        while r_norm > s.abs_tol && r_norm > s.rel_tol * r0 {
            if stats.iterations == s.max_iter {
                return Err(Error::NewtonDiverged {
                    iterations: stats.iterations,
                    residual: r_norm,
                });
            }
            let jac = system.jacobian(&x)?;
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            // inexact Newton: the linear tolerance follows the observed
            // contraction, floored well below the stopping tolerance
            let forcing = match stats.residual_norms.len() {
                1 => INITIAL_FORCING,
                k => {
                    let ratio = stats.residual_norms[k - 1] / stats.residual_norms[k - 2];
                    INITIAL_FORCING.min(0.9 * ratio * ratio)
                }
            };
            let tol = (forcing * norm2(&rhs)).max(0.01 * s.abs_tol);
            let dx = self.solver.solve_within(&jac, &rhs, tol)?;
            if dx.iter().any(|v| !v.is_finite()) {
                return Err(Error::NewtonDiverged {
                    iterations: stats.iterations,
                    residual: r_norm,
                });
            }

            let mut lambda = 1.0;
            let mut accepted = None;
            let mut fallback = None;
            let mut guard_error = None;
            for halving in 0..=s.max_halvings {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
                match system.residual(&trial) {
                    Ok(rt) => {
                        let nt = norm_inf(&rt);
                        if nt < r_norm {
                            accepted = Some((trial, rt, nt, lambda, halving));
                            break;
                        }
                        fallback = Some((trial, rt, nt, lambda, halving));
                    }
                    Err(e @ Error::Guard { .. }) => guard_error = Some(e),
                    Err(e) => return Err(e),
                }
                lambda *= 0.5;
            }
            let Some((trial, rt, nt, lambda, halvings)) = accepted.or(fallback) else {
                return Err(guard_error.expect("every trial failed the guard"));
            };
            stats.iterations += 1;
            stats.halvings += halvings;
            stats.increment_norms.push(lambda * norm_inf(&dx));
            stats.residual_norms.push(nt);
            x = trial;
            r = rt;
            r_norm = nt;
            if !r_norm.is_finite() {
                return Err(Error::NewtonDiverged {
                    iterations: stats.iterations,
                    residual: r_norm,
                });
            }
        }

        let step = old.step + 1;
        let next = SimState::from_unknowns(old.tag(), &x, step, step as f64 * self.params.tau);
        Ok((next, stats))
    }

    /// Applies `n_steps` steps, calling `observer` after each one.
    pub fn run<F>(&mut self, initial: &SimState, n_steps: usize, mut observer: F) -> Result<SimState>
    where
        F: FnMut(&StepEvent<'_>) -> Result<()>,
    {
        let mut state = initial.clone();
        for _ in 0..n_steps {
            let (next, stats) = self.advance(&state).map_err(|e| Error::AtStep {
                step: state.step + 1,
                source: Box::new(e),
            })?;
            observer(&StepEvent {
                space: &self.space,
                params: &self.params,
                previous: &state,
                current: &next,
                stats: &stats,
            })?;
            state = next;
        }
        Ok(state)
    }
}

/// What the observer of [`Stepper::run`] sees after each step.
pub struct StepEvent<'a> {
    pub space: &'a FemSpace,
    pub params: &'a ModelParams,
    pub previous: &'a SimState,
    pub current: &'a SimState,
    pub stats: &'a StepStats,
}

/// One step from `state_n`, building the discretization on the fly.
pub fn advance(state_n: &SimState, p: &ModelParams, settings: &NewtonSettings) -> Result<SimState> {
    Stepper::new(*p, *settings)?.advance(state_n).map(|(s, _)| s)
}

pub fn run<F>(
    initial: &SimState,
    p: &ModelParams,
    settings: &NewtonSettings,
    n_steps: usize,
    observer: F,
) -> Result<SimState>
where
    F: FnMut(&StepEvent<'_>) -> Result<()>,
{
    Stepper::new(*p, *settings)?.run(initial, n_steps, observer)
}
