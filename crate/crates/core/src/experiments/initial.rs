//! Seeded random initial data.
//!
//! Values are `scale·u + offset` with `u` uniform in `[0, 1)`, drawn from
//! PCG64 (the 128-bit-state XSL-RR generator of `rand_pcg`) seeded through
//! `seed_from_u64`. Nodes are visited in index order, all `φ⁰` values first
//! and then all `c⁰` values, so a seed fixes the data on every platform.

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::mesh::{NodalField, PeriodicMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialSpec {
    pub phi_scale: f64,
    pub phi_offset: f64,
    pub c_scale: f64,
    pub c_offset: f64,
}

impl Default for InitialSpec {
    /// `φ⁰ = 0.08 u + 0.2`, `c⁰ = 0.1 u + 0.4`.
    fn default() -> Self {
        Self {
            phi_scale: 0.08,
            phi_offset: 0.2,
            c_scale: 0.1,
            c_offset: 0.4,
        }
    }
}

impl InitialSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("phi_scale", self.phi_scale), ("c_scale", self.c_scale)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be nonnegative, got {v}"),
                });
            }
        }
        for (name, v) in [("phi_offset", self.phi_offset), ("c_offset", self.c_offset)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Uniform in `[0, 1)` from the top 53 bits.
fn uniform(rng: &mut Pcg64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn gen_initial(mesh: &PeriodicMesh, spec: &InitialSpec, seed: u64) -> Result<(NodalField, NodalField)> {
    spec.validate()?;
    let mut rng = Pcg64::seed_from_u64(seed);
    let n = mesh.node_count();
    let phi = (0..n)
        .map(|_| spec.phi_scale * uniform(&mut rng) + spec.phi_offset)
        .collect();
    let c = (0..n)
        .map(|_| spec.c_scale * uniform(&mut rng) + spec.c_offset)
        .collect();
    Ok((mesh.field(phi)?, mesh.field(c)?))
}
