//! Uniform periodic triangulation of the square torus and P1 primitives.
//!
//! Node `(i, j)` sits at `(i h, j h)` with `h = L / M` and has index
//! `j M + i`. Cell `(i, j)` is cut along its rising diagonal into
//! `{(i,j), (i+1,j), (i+1,j+1)}` and `{(i,j), (i+1,j+1), (i,j+1)}`, indices
//! taken modulo `M`.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, Triplets};

/// Structural identity of a mesh: meshes built from the same `(M, L)` are
/// identical, so fields carry this tag instead of a pointer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshTag {
    cells_per_side: usize,
    side_bits: u64,
}

#[derive(Debug, Clone)]
pub struct PeriodicMesh {
    cells_per_side: usize,
    side_length: f64,
    coords: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Unwrapped vertex positions of each triangle (no periodic jump).
    local_coords: Vec<[[f64; 2]; 3]>,
}

impl PeriodicMesh {
    pub fn new(cells_per_side: usize, side_length: f64) -> Result<Self> {
        if cells_per_side < 2 {
            return Err(Error::InvalidMesh(format!(
                "need at least 2 cells per side, got {cells_per_side}"
            )));
        }
        if !(side_length > 0.0 && side_length.is_finite()) {
            return Err(Error::InvalidMesh(format!(
                "side length must be positive, got {side_length}"
            )));
        }
        let m = cells_per_side;
        let h = side_length / m as f64;
        let node = |i: usize, j: usize| (j % m) * m + (i % m);

        let mut coords = Vec::with_capacity(m * m);
        for j in 0..m {
            for i in 0..m {
                coords.push([i as f64 * h, j as f64 * h]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * m * m);
        let mut local_coords = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                let (x, y) = (i as f64 * h, j as f64 * h);
                let (x1, y1) = ((i + 1) as f64 * h, (j + 1) as f64 * h);
                triangles.push([node(i, j), node(i + 1, j), node(i + 1, j + 1)]);
                local_coords.push([[x, y], [x1, y], [x1, y1]]);
                triangles.push([node(i, j), node(i + 1, j + 1), node(i, j + 1)]);
                local_coords.push([[x, y], [x1, y1], [x, y1]]);
            }
        }

        Ok(Self {
            cells_per_side,
            side_length,
            coords,
            triangles,
            local_coords,
        })
    }

    pub fn tag(&self) -> MeshTag {
        MeshTag {
            cells_per_side: self.cells_per_side,
            side_bits: self.side_length.to_bits(),
        }
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn side_length(&self) -> f64 {
        self.side_length
    }

    pub fn spacing(&self) -> f64 {
        self.side_length / self.cells_per_side as f64
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn node_coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Unwrapped vertex coordinates of triangle `t`.
    pub fn triangle_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        self.local_coords[t]
    }

    /// Signed area (positive for counter-clockwise orientation).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.local_coords[t];
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self, t: usize) -> f64 {
        self.signed_area(t).abs()
    }

    /// Constant gradients of the three barycentric hat functions on `t`.
    pub fn hat_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let v = self.local_coords[t];
        let two_area = 2.0 * self.signed_area(t);
        let mut g = [[0.0; 2]; 3];
        for (k, gk) in g.iter_mut().enumerate() {
            let p = v[(k + 1) % 3];
            let q = v[(k + 2) % 3];
            *gk = [(p[1] - q[1]) / two_area, (q[0] - p[0]) / two_area];
        }
        g
    }

    /// `area · ∇λ_a · ∇λ_b` on triangle `t`.
    pub fn local_stiffness(&self, t: usize) -> [[f64; 3]; 3] {
        let g = self.hat_gradients(t);
        let area = self.area(t);
        let mut s = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                s[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
        s
    }

    /// Gradient of the P1 interpolant of `u` on triangle `t`.
    pub fn gradient(&self, u: &[f64], t: usize) -> [f64; 2] {
        let g = self.hat_gradients(t);
        let tri = self.triangles[t];
        let mut out = [0.0; 2];
        for k in 0..3 {
            out[0] += u[tri[k]] * g[k][0];
            out[1] += u[tri[k]] * g[k][1];
        }
        out
    }

    pub fn zeros(&self) -> NodalField {
        NodalField {
            tag: self.tag(),
            values: vec![0.0; self.node_count()],
        }
    }

    pub fn constant(&self, value: f64) -> NodalField {
        NodalField {
            tag: self.tag(),
            values: vec![value; self.node_count()],
        }
    }

    pub fn field(&self, values: Vec<f64>) -> Result<NodalField> {
        if values.len() != self.node_count() {
            return Err(Error::LengthMismatch {
                expected: self.node_count(),
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                function: "NodalField",
                value: *v,
                domain: "finite reals",
            });
        }
        Ok(NodalField {
            tag: self.tag(),
            values,
        })
    }

    /// Nodal interpolant of a function of position.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Result<NodalField> {
        self.field(self.coords.iter().map(|&[x, y]| f(x, y)).collect())
    }

    pub(crate) fn check(&self, u: &NodalField) -> Result<()> {
        if u.tag != self.tag() {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }
}

pub fn build_mesh(cells_per_side: usize, side_length: f64) -> Result<PeriodicMesh> {
    PeriodicMesh::new(cells_per_side, side_length)
}

/// One value per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    tag: MeshTag,
    values: Vec<f64>,
}

impl NodalField {
    pub fn tag(&self) -> MeshTag {
        self.tag
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn from_parts(tag: MeshTag, values: Vec<f64>) -> Self {
        Self { tag, values }
    }

    pub fn same_mesh(&self, other: &NodalField) -> Result<()> {
        if self.tag != other.tag {
            return Err(Error::MeshMismatch);
        }
        Ok(())
    }

    pub fn sub(&self, other: &NodalField) -> Result<NodalField> {
        self.same_mesh(other)?;
        Ok(Self::from_parts(
            self.tag,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<usize> for NodalField {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Lumped nodal weights `β_j = ∫ p_j dx`: a third of the area of every
/// incident triangle.
pub fn lumped_weights(mesh: &PeriodicMesh) -> NodalField {
    let mut beta = vec![0.0; mesh.node_count()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.area(t) / 3.0;
        for &j in tri {
            beta[j] += third;
        }
    }
    NodalField::from_parts(mesh.tag(), beta)
}

/// Mass-lumped inner product `Σ_j β_j u_j v_j`.
pub fn lumped_inner(beta: &NodalField, u: &NodalField, v: &NodalField) -> Result<f64> {
    beta.same_mesh(u)?;
    beta.same_mesh(v)?;
    Ok(beta
        .values
        .iter()
        .zip(&u.values)
        .zip(&v.values)
        .map(|((b, x), y)| b * x * y)
        .sum())
}

/// Lumped integral `Σ_j β_j u_j`.
pub fn lumped_integral(beta: &NodalField, u: &NodalField) -> Result<f64> {
    beta.same_mesh(u)?;
    Ok(beta.values.iter().zip(&u.values).map(|(b, x)| b * x).sum())
}

/// `K_ij = ∫ ∇p_i · ∇p_j dx`.
pub fn stiffness_matrix(mesh: &PeriodicMesh) -> CsrMatrix {
    let ones = vec![1.0; mesh.triangle_count()];
    weighted_stiffness(mesh, &ones).expect("weight count matches")
}

/// `K_w[i, j] = Σ_T w_T ∫_T ∇p_i · ∇p_j dx`, assembled triangle by triangle.
pub fn weighted_stiffness(mesh: &PeriodicMesh, weights: &[f64]) -> Result<CsrMatrix> {
    if weights.len() != mesh.triangle_count() {
        return Err(Error::LengthMismatch {
            expected: mesh.triangle_count(),
            actual: weights.len(),
        });
    }
    let n = mesh.node_count();
    let mut trip = Triplets::with_capacity(n, n, 9 * mesh.triangle_count());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let s = mesh.local_stiffness(t);
        let w = weights[t];
        for a in 0..3 {
            for b in 0..3 {
                trip.push(tri[a], tri[b], w * s[a][b]);
            }
        }
    }
    trip.compress()
}

/// Mean of the three vertex values of triangle `t`.
pub fn triangle_average(mesh: &PeriodicMesh, u: &NodalField, t: usize) -> Result<f64> {
    mesh.check(u)?;
    let tri = mesh.triangles().get(t).ok_or(Error::IndexOutOfRange {
        index: t,
        len: mesh.triangle_count(),
    })?;
    Ok((u.values[tri[0]] + u.values[tri[1]] + u.values[tri[2]]) / 3.0)
}

/// [`triangle_average`] for every triangle, in index order.
pub fn triangle_averages(mesh: &PeriodicMesh, u: &NodalField) -> Result<Vec<f64>> {
    mesh.check(u)?;
    Ok(mesh
        .triangles()
        .iter()
        .map(|tri| (u.values[tri[0]] + u.values[tri[1]] + u.values[tri[2]]) / 3.0)
        .collect())
}

/// Consistent-mass L² norm of the P1 interpolant.
pub fn l2_norm(mesh: &PeriodicMesh, u: &NodalField) -> Result<f64> {
    mesh.check(u)?;
    let mut acc = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = tri.map(|j| u.values[j]);
        let sum = a + b + c;
        acc += mesh.area(t) / 12.0 * (sum * sum + a * a + b * b + c * c);
    }
    Ok(acc.sqrt())
}

pub fn l2_error(mesh: &PeriodicMesh, u: &NodalField, v: &NodalField) -> Result<f64> {
    l2_norm(mesh, &u.sub(v)?)
}

/// Stiffness pattern with per-triangle scatter slots, for re-weighting the
/// stiffness matrix many times without re-sorting triplets.
///
/// Values are accumulated triangle by triangle in the same order as
/// [`weighted_stiffness`], so both produce bitwise-identical matrices.
#[derive(Debug, Clone)]
pub struct StiffnessAssembler {
    pattern: CsrMatrix,
    slots: Vec<[usize; 9]>,
    local: Vec<[f64; 9]>,
}

impl StiffnessAssembler {
    pub fn new(mesh: &PeriodicMesh) -> Self {
        let pattern = stiffness_matrix(mesh);
        let mut slots = Vec::with_capacity(mesh.triangle_count());
        let mut local = Vec::with_capacity(mesh.triangle_count());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let s = mesh.local_stiffness(t);
            let mut slot = [0; 9];
            let mut loc = [0.0; 9];
            for a in 0..3 {
                for b in 0..3 {
                    slot[3 * a + b] = pattern.position(tri[a], tri[b]).expect("entry in pattern");
                    loc[3 * a + b] = s[a][b];
                }
            }
            slots.push(slot);
            local.push(loc);
        }
        Self { pattern, slots, local }
    }

    /// The unweighted stiffness matrix.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.pattern
    }

    pub fn weighted(&self, weights: &[f64]) -> Result<CsrMatrix> {
        if weights.len() != self.slots.len() {
            return Err(Error::LengthMismatch {
                expected: self.slots.len(),
                actual: weights.len(),
            });
        }
        let mut values = vec![0.0; self.pattern.nnz()];
        for ((slot, loc), &w) in self.slots.iter().zip(&self.local).zip(weights) {
            for k in 0..9 {
                values[slot[k]] += w * loc[k];
            }
        }
        self.pattern.with_values(values)
    }
}

/// A mesh together with the operators every solver pass needs.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: PeriodicMesh,
    weights: NodalField,
    assembler: StiffnessAssembler,
}

impl FemSpace {
    pub fn new(mesh: PeriodicMesh) -> Self {
        let weights = lumped_weights(&mesh);
        let assembler = StiffnessAssembler::new(&mesh);
        Self {
            mesh,
            weights,
            assembler,
        }
    }

    pub fn build(cells_per_side: usize, side_length: f64) -> Result<Self> {
        Ok(Self::new(build_mesh(cells_per_side, side_length)?))
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    /// Lumped weights β.
    pub fn weights(&self) -> &NodalField {
        &self.weights
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        self.assembler.stiffness()
    }

    pub fn weighted_stiffness(&self, weights: &[f64]) -> Result<CsrMatrix> {
        self.assembler.weighted(weights)
    }

    pub fn lumped_inner(&self, u: &NodalField, v: &NodalField) -> Result<f64> {
        lumped_inner(&self.weights, u, v)
    }

    pub fn lumped_integral(&self, u: &NodalField) -> Result<f64> {
        lumped_integral(&self.weights, u)
    }
}
