//! P1 finite elements for `Δu + k²n²u = 0` on a tagged annular mesh.
//!
//! Weak form: `∫ ∇u·∇φ − k² ∫ n² u φ = ∮_outer f φ` with Dirichlet data `g` on
//! the inner boundary and, for the outer boundary, either the Neumann data
//! `f = ∂_ν u` or Dirichlet data `u = f`. The operator `S = K − k² M_{n²}` is
//! real symmetric, so one real sparse LU of its free block serves the state,
//! adjoint and variation problems; complex right-hand sides are solved as two
//! real columns.

use std::sync::Arc;

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Point, TriMesh};
use crate::quadrature::{edge_rule, map_point, triangle_rule};
use crate::refraction::RefractionModel;

const NONE: usize = usize::MAX;
const REFINEMENT_STEPS: usize = 3;
const REFINE_ABOVE: f64 = 1e-13;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OuterKind {
    #[default]
    Neumann,
    Dirichlet,
}

impl OuterKind {
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "neumann" => Some(OuterKind::Neumann),
            "dirichlet" => Some(OuterKind::Dirichlet),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OuterKind::Neumann => "neumann",
            OuterKind::Dirichlet => "dirichlet",
        }
    }
}

/// Nodal values of a continuous piecewise-linear complex function.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(n: usize) -> Self {
        ComplexField { values: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(mesh: &TriMesh, f: impl Fn(Point) -> Complex64) -> Self {
        ComplexField { values: mesh.vertices().iter().map(|&p| f(p)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The first `n` coefficients: the restriction onto a nested prefix mesh.
    pub fn restrict(&self, n: usize) -> Result<Self> {
        if n > self.values.len() {
            return Err(Error::DimensionMismatch { expected: self.values.len(), got: n });
        }
        Ok(ComplexField { values: self.values[..n].to_vec() })
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        ComplexField { values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn sub(&self, other: &ComplexField) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: other.len() });
        }
        Ok(ComplexField { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() })
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Vertex classification. `inner` and `outer` list the tagged boundary
/// vertices in increasing order; boundary data vectors follow that order.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub free: Vec<usize>,
    pub free_index: Vec<usize>,
    pub inner: Vec<usize>,
    pub outer: Vec<usize>,
    pub outer_index: Vec<usize>,
}

impl DofMap {
    fn new(mesh: &TriMesh, outer_kind: OuterKind) -> Self {
        let inner = mesh.boundary_vertices(BoundaryTag::InnerGamma);
        let outer = mesh.boundary_vertices(BoundaryTag::OuterGamma);
        let n = mesh.vertex_count();
        let mut constrained = vec![false; n];
        for &v in &inner {
            constrained[v] = true;
        }
        if outer_kind == OuterKind::Dirichlet {
            for &v in &outer {
                constrained[v] = true;
            }
        }
        let mut free = Vec::with_capacity(n);
        let mut free_index = vec![NONE; n];
        for v in 0..n {
            if !constrained[v] {
                free_index[v] = free.len();
                free.push(v);
            }
        }
        let mut outer_index = vec![NONE; n];
        for (i, &v) in outer.iter().enumerate() {
            outer_index[v] = i;
        }
        DofMap { free, free_index, inner, outer, outer_index }
    }

    pub fn free_of(&self, vertex: usize) -> Option<usize> {
        let i = self.free_index[vertex];
        (i != NONE).then_some(i)
    }

    pub fn outer_of(&self, vertex: usize) -> Option<usize> {
        let i = self.outer_index[vertex];
        (i != NONE).then_some(i)
    }
}

/// State problem data. `inner_data` and `outer_data` are nodal values on the
/// vertices listed by [`DofMap::inner`] and [`DofMap::outer`].
#[derive(Debug, Clone)]
pub struct HelmholtzProblem {
    pub mesh: Arc<TriMesh>,
    pub k: f64,
    pub refraction: RefractionModel,
    pub inner_data: Vec<Complex64>,
    pub outer_kind: OuterKind,
    pub outer_data: Vec<Complex64>,
}

impl HelmholtzProblem {
    /// Problem with zero boundary data.
    pub fn new(mesh: Arc<TriMesh>, k: f64, refraction: RefractionModel, outer_kind: OuterKind) -> Self {
        let ni = mesh.boundary_vertices(BoundaryTag::InnerGamma).len();
        let no = mesh.boundary_vertices(BoundaryTag::OuterGamma).len();
        HelmholtzProblem {
            mesh,
            k,
            refraction,
            inner_data: vec![Complex64::new(0.0, 0.0); ni],
            outer_kind,
            outer_data: vec![Complex64::new(0.0, 0.0); no],
        }
    }

    pub fn with_inner(mut self, g: impl Fn(Point) -> Complex64) -> Self {
        let verts = self.mesh.boundary_vertices(BoundaryTag::InnerGamma);
        self.inner_data = verts.iter().map(|&v| g(self.mesh.vertices()[v])).collect();
        self
    }

    /// Inner data `cos(jθ)`.
    pub fn with_inner_mode(self, j: usize) -> Self {
        self.with_inner(|p| Complex64::new((j as f64 * p[1].atan2(p[0])).cos(), 0.0))
    }

    pub fn with_outer(mut self, f: impl Fn(Point) -> Complex64) -> Self {
        let verts = self.mesh.boundary_vertices(BoundaryTag::OuterGamma);
        self.outer_data = verts.iter().map(|&v| f(self.mesh.vertices()[v])).collect();
        self
    }
}

/// Exact P1 stiffness and `n²`-weighted mass (7-point rule) of one triangle.
pub fn element_matrices(p: &[Point; 3], refraction: &RefractionModel) -> ([[f64; 3]; 3], [[f64; 3]; 3]) {
    let (grads, area) = p1_gradients(p);
    let mut stiff = [[0.0; 3]; 3];
    let mut mass = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            stiff[a][b] = area * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
        }
    }
    for q in triangle_rule() {
        let x = map_point(&q.bary, p);
        let n = refraction.eval_unchecked(x);
        let c = q.weight * area * n * n;
        for a in 0..3 {
            for b in 0..3 {
                mass[a][b] += c * q.bary[a] * q.bary[b];
            }
        }
    }
    (stiff, mass)
}

/// Gradients of the three barycentric basis functions and the (positive) area.
#[inline]
pub fn p1_gradients(p: &[Point; 3]) -> ([[f64; 2]; 3], f64) {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let inv = 1.0 / det;
    let grads = [
        [(p[1][1] - p[2][1]) * inv, (p[2][0] - p[1][0]) * inv],
        [(p[2][1] - p[0][1]) * inv, (p[0][0] - p[2][0]) * inv],
        [(p[0][1] - p[1][1]) * inv, (p[1][0] - p[0][0]) * inv],
    ];
    (grads, 0.5 * det.abs())
}

/// The factored operator of a fixed mesh, wavenumber, index and outer kind.
pub struct HelmholtzOperator {
    mesh: Arc<TriMesh>,
    k: f64,
    refraction: RefractionModel,
    outer_kind: OuterKind,
    dofs: DofMap,
    matrix: SparseColMat<usize, f64>,
    /// `(free row, constrained vertex, S entry)`.
    coupling: Vec<(usize, usize, f64)>,
    lu: Lu<usize, f64>,
    boundary_mass: SparseColMat<usize, f64>,
    boundary_mass_lu: Lu<usize, f64>,
}

impl std::fmt::Debug for HelmholtzOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HelmholtzOperator")
            .field("vertices", &self.mesh.vertex_count())
            .field("free", &self.dofs.free.len())
            .field("k", &self.k)
            .field("refraction", &self.refraction)
            .field("outer_kind", &self.outer_kind)
            .finish()
    }
}

fn factor(m: &SparseColMat<usize, f64>) -> Result<Lu<usize, f64>> {
    m.sp_lu().map_err(|e| Error::SingularSystem(format!("sparse LU failed: {e:?}")))
}

fn csc_apply(m: &SparseColMat<usize, f64>, x: &[Complex64]) -> Vec<Complex64> {
    let mut y = vec![Complex64::new(0.0, 0.0); m.nrows()];
    let sym = m.symbolic();
    let (cp, ri, val) = (sym.col_ptr(), sym.row_idx(), m.val());
    for (c, xc) in x.iter().enumerate() {
        for idx in cp[c]..cp[c + 1] {
            y[ri[idx]] += xc * val[idx];
        }
    }
    y
}

fn lu_solve(lu: &Lu<usize, f64>, rhs: &[Complex64]) -> Vec<Complex64> {
    let n = rhs.len();
    let mut m = Mat::<f64>::from_fn(n, 2, |i, j| if j == 0 { rhs[i].re } else { rhs[i].im });
    lu.solve_in_place_with_conj(Conj::No, m.as_mut());
    (0..n).map(|i| Complex64::new(m[(i, 0)], m[(i, 1)])).collect()
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl HelmholtzOperator {
    pub fn new(mesh: Arc<TriMesh>, k: f64, refraction: RefractionModel, outer_kind: OuterKind) -> Result<Self> {
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::DomainError(format!("wavenumber must be nonnegative, got {k}")));
        }
        refraction.validate()?;
        let (n_lo, _) = refraction.bounds();
        if n_lo <= 0.0 {
            return Err(Error::NonPositiveIndex { min_n: n_lo });
        }
        let dofs = DofMap::new(&mesh, outer_kind);
        if dofs.free.is_empty() {
            return Err(Error::EmptyFreeDofs);
        }
        let k2 = k * k;
        let verts = mesh.vertices();
        let elements: Vec<[[f64; 3]; 3]> = mesh
            .triangles()
            .par_iter()
            .map(|t| {
                let p = [verts[t[0]], verts[t[1]], verts[t[2]]];
                let (s, m) = element_matrices(&p, &refraction);
                let mut e = [[0.0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        e[a][b] = s[a][b] - k2 * m[a][b];
                    }
                }
                e
            })
            .collect();
        let mut triplets = Vec::with_capacity(9 * elements.len());
        let mut coupling = Vec::new();
        for (t, e) in mesh.triangles().iter().zip(&elements) {
            for a in 0..3 {
                let Some(r) = dofs.free_of(t[a]) else { continue };
                for b in 0..3 {
                    match dofs.free_of(t[b]) {
                        Some(c) => triplets.push(Triplet::new(r, c, e[a][b])),
                        None => coupling.push((r, t[b], e[a][b])),
                    }
                }
            }
        }
        let nf = dofs.free.len();
        let matrix = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &triplets)
            .map_err(|e| Error::SingularSystem(format!("matrix construction failed: {e:?}")))?;
        let lu = factor(&matrix)?;

        let no = dofs.outer.len();
        let mut btrip = Vec::with_capacity(4 * no);
        for e in mesh.edges_with_tag(BoundaryTag::OuterGamma) {
            let [a, b] = e.vertices;
            let len = {
                let (pa, pb) = (verts[a], verts[b]);
                (pa[0] - pb[0]).hypot(pa[1] - pb[1])
            };
            let (ia, ib) = (dofs.outer_index[a], dofs.outer_index[b]);
            for (t, w) in edge_rule() {
                let phi = [1.0 - t, t];
                let idx = [ia, ib];
                for x in 0..2 {
                    for y in 0..2 {
                        btrip.push(Triplet::new(idx[x], idx[y], w * len * phi[x] * phi[y]));
                    }
                }
            }
        }
        let boundary_mass = SparseColMat::<usize, f64>::try_new_from_triplets(no, no, &btrip)
            .map_err(|e| Error::SingularSystem(format!("boundary mass construction failed: {e:?}")))?;
        let boundary_mass_lu = factor(&boundary_mass)?;
        Ok(HelmholtzOperator {
            mesh,
            k,
            refraction,
            outer_kind,
            dofs,
            matrix,
            coupling,
            lu,
            boundary_mass,
            boundary_mass_lu,
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn refraction(&self) -> &RefractionModel {
        &self.refraction
    }

    pub fn outer_kind(&self) -> OuterKind {
        self.outer_kind
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn free_count(&self) -> usize {
        self.dofs.free.len()
    }

    pub fn outer_count(&self) -> usize {
        self.dofs.outer.len()
    }

    /// `S_FF x` on free dofs.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len(), self.free_count())?;
        Ok(csc_apply(&self.matrix, x))
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    /// Solves `S_FF x = b`, verifying `‖S x − b‖ ≤ 1e-10 ‖b‖`.
    pub fn solve_free(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(b.len(), self.free_count())?;
        let bn = norm2(b);
        if bn == 0.0 {
            return Ok(vec![Complex64::new(0.0, 0.0); b.len()]);
        }
        let mut x = lu_solve(&self.lu, b);
        let residual = |x: &[Complex64]| -> Vec<Complex64> {
            csc_apply(&self.matrix, x).iter().zip(b).map(|(a, b)| b - a).collect()
        };
        let mut r = residual(&x);
        let mut res = norm2(&r) / bn;
        // Iterative refinement recovers the digits lost to pivot growth; a
        // genuinely singular system does not improve.
        for _ in 0..REFINEMENT_STEPS {
            if !(res > REFINE_ABOVE) {
                break;
            }
            let dx = lu_solve(&self.lu, &r);
            let candidate: Vec<Complex64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let rc = residual(&candidate);
            let rn = norm2(&rc) / bn;
            if !(rn < res) {
                break;
            }
            (x, r, res) = (candidate, rc, rn);
        }
        if !res.is_finite() || res > RESIDUAL_TOL {
            return Err(Error::SingularSystem(format!(
                "relative residual {res:e} after direct solve, |x|/|b| = {:e} (k = {}, interior resonance?)",
                norm2(&x) / bn,
                self.k
            )));
        }
        Ok(x)
    }

    /// Right-hand side on free dofs for inner data `g` and outer data `f`.
    pub fn load(&self, g: &[Complex64], f: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(g.len(), self.dofs.inner.len())?;
        self.check_len(f.len(), self.outer_count())?;
        let mut value = vec![Complex64::new(0.0, 0.0); self.mesh.vertex_count()];
        for (&v, &x) in self.dofs.inner.iter().zip(g) {
            value[v] = x;
        }
        if self.outer_kind == OuterKind::Dirichlet {
            for (&v, &x) in self.dofs.outer.iter().zip(f) {
                value[v] = x;
            }
        }
        let mut rhs = vec![Complex64::new(0.0, 0.0); self.free_count()];
        for &(r, c, s) in &self.coupling {
            rhs[r] -= value[c] * s;
        }
        if self.outer_kind == OuterKind::Neumann {
            let mf = self.boundary_mass_apply(f)?;
            for (&v, m) in self.dofs.outer.iter().zip(mf) {
                rhs[self.dofs.free_index[v]] += m;
            }
        }
        Ok(rhs)
    }

    /// Full nodal field from free values and boundary data.
    pub fn expand(&self, free: &[Complex64], g: &[Complex64], f: &[Complex64]) -> ComplexField {
        let mut u = ComplexField::zeros(self.mesh.vertex_count());
        for (&v, &x) in self.dofs.free.iter().zip(free) {
            u.values[v] = x;
        }
        for (&v, &x) in self.dofs.inner.iter().zip(g) {
            u.values[v] = x;
        }
        if self.outer_kind == OuterKind::Dirichlet {
            for (&v, &x) in self.dofs.outer.iter().zip(f) {
                u.values[v] = x;
            }
        }
        u
    }

    /// P1: the state for inner data `g` and outer data `f`.
    pub fn solve_state(&self, g: &[Complex64], f: &[Complex64]) -> Result<ComplexField> {
        let rhs = self.load(g, f)?;
        let x = self.solve_free(&rhs)?;
        Ok(self.expand(&x, g, f))
    }

    /// P3: the response to outer data `w` with homogeneous inner data.
    pub fn solve_variation(&self, w: &[Complex64]) -> Result<ComplexField> {
        let zero = vec![Complex64::new(0.0, 0.0); self.dofs.inner.len()];
        self.solve_state(&zero, w)
    }

    /// P2: `S_FF p = source` with homogeneous data on every constrained vertex.
    /// `S` is symmetric, so this is also the transposed solve.
    pub fn solve_adjoint(&self, source: &[Complex64]) -> Result<ComplexField> {
        let x = self.solve_free(source)?;
        let zi = vec![Complex64::new(0.0, 0.0); self.dofs.inner.len()];
        let zo = vec![Complex64::new(0.0, 0.0); self.outer_count()];
        Ok(self.expand(&x, &zi, &zo))
    }

    /// Values of a nodal vector on the outer vertices.
    pub fn trace(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.dofs.outer.iter().map(|&v| u[v]).collect()
    }

    /// Entries of a nodal vector at the free dofs.
    pub fn restrict_free(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.dofs.free.iter().map(|&v| u[v]).collect()
    }

    /// `S_{Γ,F} x` for free-dof values `x`, indexed by outer vertex.
    pub fn outer_coupling_apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.outer_count()];
        for &(r, c, s) in &self.coupling {
            let o = self.dofs.outer_index[c];
            if o != NONE {
                out[o] += x[r] * s;
            }
        }
        out
    }

    /// `M_Γ x`, the P1 mass matrix of the outer boundary.
    pub fn boundary_mass_apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len(), self.outer_count())?;
        Ok(csc_apply(&self.boundary_mass, x))
    }

    pub fn boundary_mass_solve(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_len(x.len(), self.outer_count())?;
        Ok(lu_solve(&self.boundary_mass_lu, x))
    }

    /// `Re ⟨a, M_Γ b⟩`, the L²(outer boundary) inner product.
    pub fn boundary_inner(&self, a: &[Complex64], b: &[Complex64]) -> Result<f64> {
        let mb = self.boundary_mass_apply(b)?;
        Ok(a.iter().zip(&mb).map(|(x, y)| (x.conj() * y).re).sum())
    }
}

/// Operator plus right-hand side for one problem.
#[derive(Debug)]
pub struct AssembledSystem {
    pub operator: HelmholtzOperator,
    pub load: Vec<Complex64>,
    inner_data: Vec<Complex64>,
    outer_data: Vec<Complex64>,
}

/// Assembles and factors the system of `problem`.
pub fn assemble(problem: &HelmholtzProblem) -> Result<AssembledSystem> {
    let operator = HelmholtzOperator::new(problem.mesh.clone(), problem.k, problem.refraction, problem.outer_kind)?;
    let load = operator.load(&problem.inner_data, &problem.outer_data)?;
    Ok(AssembledSystem {
        operator,
        load,
        inner_data: problem.inner_data.clone(),
        outer_data: problem.outer_data.clone(),
    })
}

pub fn solve(system: &AssembledSystem) -> Result<ComplexField> {
    let x = system.operator.solve_free(&system.load)?;
    Ok(system.operator.expand(&x, &system.inner_data, &system.outer_data))
}

pub fn solve_state(problem: &HelmholtzProblem) -> Result<ComplexField> {
    solve(&assemble(problem)?)
}
