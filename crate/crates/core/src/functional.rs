//! The radiation functional
//! `J(u) = ∫ |∇u − i k n u x/|x||² w(x) dx`, `w = 1/(1 + |x|)` or `w = 1`,
//! its discrete gradient and the flux and seminorm diagnostics.
//!
//! `J` is a real quadratic form `u^H Q u` in the nodal coefficients, with `Q`
//! Hermitian positive semidefinite. The gradient `g = 2 Q u` satisfies
//! `dJ = Re(g^H δu)`. All sums are reduced in fixed-size chunks so results do
//! not depend on the thread count.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{p1_gradients, ComplexField};
use crate::mesh::{PointLocator, RegionMask, TriMesh};
use crate::quadrature::{map_point, triangle_rule};
use crate::refraction::RefractionModel;

const CHUNK: usize = 4096;
const FLUX_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FunctionalConfig {
    /// Apply the factor `1/(1 + |x|)`.
    pub weighted: bool,
}

impl FunctionalConfig {
    pub fn weighted() -> Self {
        FunctionalConfig { weighted: true }
    }

    pub fn unweighted() -> Self {
        FunctionalConfig { weighted: false }
    }

    #[inline]
    pub fn weight(&self, r: f64) -> f64 {
        if self.weighted {
            1.0 / (1.0 + r)
        } else {
            1.0
        }
    }
}

/// `J` and the residual `∇u − i k n u x̂` at each quadrature point of each
/// active element (elements with zero mask weight are skipped).
#[derive(Debug, Clone)]
pub struct FunctionalValue {
    pub j: f64,
    pub residuals: Vec<[[Complex64; 2]; 7]>,
}

#[derive(Debug, Clone, Copy)]
struct QuadPoint {
    /// rule weight · area · functional weight · mask weight
    c: f64,
    /// rule weight · area · mask weight / (1 + |x|)
    c_energy: f64,
    kn: f64,
    xhat: [f64; 2],
}

#[derive(Debug, Clone)]
struct Element {
    vertices: [usize; 3],
    grads: [[f64; 2]; 3],
    qp: [QuadPoint; 7],
}

/// Precomputed geometry of `J` on one mesh for a fixed `k`, index, weighting
/// and region.
#[derive(Debug, Clone)]
pub struct RadiationFunctional {
    mesh: Arc<TriMesh>,
    k: f64,
    refraction: RefractionModel,
    config: FunctionalConfig,
    elements: Vec<Element>,
}

/// Deterministic parallel sum.
pub(crate) fn chunked_sum(values: &[f64]) -> f64 {
    let partial: Vec<f64> = values.par_chunks(CHUNK).map(|c| c.iter().sum::<f64>()).collect();
    partial.iter().sum()
}

impl RadiationFunctional {
    pub fn new(
        mesh: Arc<TriMesh>,
        k: f64,
        refraction: RefractionModel,
        config: FunctionalConfig,
        mask: &RegionMask,
    ) -> Result<Self> {
        if mask.element_weights.len() != mesh.triangle_count() {
            return Err(Error::DimensionMismatch { expected: mesh.triangle_count(), got: mask.element_weights.len() });
        }
        refraction.validate()?;
        let rule = triangle_rule();
        let active: Vec<usize> = (0..mesh.triangle_count()).filter(|&t| mask.weight(t) > 0.0).collect();
        let elements: Vec<Option<Element>> = active
            .par_iter()
            .map(|&t| {
                let p = mesh.triangle_points(t);
                let (grads, area) = p1_gradients(&p);
                let mw = mask.weight(t);
                let mut qp = [QuadPoint { c: 0.0, c_energy: 0.0, kn: 0.0, xhat: [0.0; 2] }; 7];
                for (q, slot) in rule.iter().zip(qp.iter_mut()) {
                    let x = map_point(&q.bary, &p);
                    let r = x[0].hypot(x[1]);
                    if r == 0.0 {
                        return None;
                    }
                    *slot = QuadPoint {
                        c: q.weight * area * config.weight(r) * mw,
                        c_energy: q.weight * area * mw / (1.0 + r),
                        kn: k * refraction.eval_unchecked(x),
                        xhat: [x[0] / r, x[1] / r],
                    };
                }
                Some(Element { vertices: mesh.triangles()[t], grads, qp })
            })
            .collect();
        let elements = elements.into_iter().collect::<Option<Vec<_>>>().ok_or(Error::OriginInDomain)?;
        Ok(RadiationFunctional { mesh, k, refraction, config, elements })
    }

    /// Functional over the whole mesh.
    pub fn full(mesh: Arc<TriMesh>, k: f64, refraction: RefractionModel, config: FunctionalConfig) -> Result<Self> {
        let mask = RegionMask::full(&mesh);
        Self::new(mesh, k, refraction, config, &mask)
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

    pub fn config(&self) -> FunctionalConfig {
        self.config
    }

    fn check(&self, u: &[Complex64]) -> Result<()> {
        if u.len() != self.mesh.vertex_count() {
            return Err(Error::DimensionMismatch { expected: self.mesh.vertex_count(), got: u.len() });
        }
        Ok(())
    }

    #[inline]
    fn residuals(e: &Element, u: &[Complex64]) -> [[Complex64; 2]; 7] {
        let uv = [u[e.vertices[0]], u[e.vertices[1]], u[e.vertices[2]]];
        let grad = [0, 1].map(|d| uv[0] * e.grads[0][d] + uv[1] * e.grads[1][d] + uv[2] * e.grads[2][d]);
        let rule = triangle_rule();
        let mut out = [[Complex64::new(0.0, 0.0); 2]; 7];
        for (i, (q, qp)) in rule.iter().zip(&e.qp).enumerate() {
            let uq = uv[0] * q.bary[0] + uv[1] * q.bary[1] + uv[2] * q.bary[2];
            let iknu = Complex64::new(0.0, qp.kn) * uq;
            out[i] = [grad[0] - iknu * qp.xhat[0], grad[1] - iknu * qp.xhat[1]];
        }
        out
    }

    /// `J(u)`.
    pub fn value(&self, u: &[Complex64]) -> Result<f64> {
        self.check(u)?;
        let per: Vec<f64> = self
            .elements
            .par_iter()
            .map(|e| {
                let r = Self::residuals(e, u);
                e.qp.iter().zip(&r).map(|(qp, r)| qp.c * (r[0].norm_sqr() + r[1].norm_sqr())).sum()
            })
            .collect();
        Ok(chunked_sum(&per))
    }

    /// `J(u)` with the per-point residual cache.
    pub fn evaluate(&self, u: &[Complex64]) -> Result<FunctionalValue> {
        self.check(u)?;
        let residuals: Vec<[[Complex64; 2]; 7]> = self.elements.par_iter().map(|e| Self::residuals(e, u)).collect();
        let per: Vec<f64> = self
            .elements
            .iter()
            .zip(&residuals)
            .map(|(e, r)| e.qp.iter().zip(r).map(|(qp, r)| qp.c * (r[0].norm_sqr() + r[1].norm_sqr())).sum())
            .collect();
        Ok(FunctionalValue { j: chunked_sum(&per), residuals })
    }

    /// Nodal gradient `g = 2 Q u`, so that `dJ = Re(g^H δu)`.
    pub fn gradient(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check(u)?;
        let rule = triangle_rule();
        let local: Vec<[Complex64; 3]> = self
            .elements
            .par_iter()
            .map(|e| {
                let r = Self::residuals(e, u);
                let mut g = [Complex64::new(0.0, 0.0); 3];
                for ((q, qp), r) in rule.iter().zip(&e.qp).zip(&r) {
                    let rx = r[0] * qp.xhat[0] + r[1] * qp.xhat[1];
                    for a in 0..3 {
                        let rg = r[0] * e.grads[a][0] + r[1] * e.grads[a][1];
                        g[a] += (rg + Complex64::new(0.0, qp.kn * q.bary[a]) * rx) * (2.0 * qp.c);
                    }
                }
                g
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
        for (e, g) in self.elements.iter().zip(&local) {
            for a in 0..3 {
                out[e.vertices[a]] += g[a];
            }
        }
        Ok(out)
    }

    /// `∫ (|∇u|² + k² n² |u|²) / (1 + |x|)` over the same elements.
    pub fn weighted_energy(&self, u: &[Complex64]) -> Result<f64> {
        self.check(u)?;
        let rule = triangle_rule();
        let per: Vec<f64> = self
            .elements
            .par_iter()
            .map(|e| {
                let uv = [u[e.vertices[0]], u[e.vertices[1]], u[e.vertices[2]]];
                let grad = [0, 1].map(|d| uv[0] * e.grads[0][d] + uv[1] * e.grads[1][d] + uv[2] * e.grads[2][d]);
                let g2 = grad[0].norm_sqr() + grad[1].norm_sqr();
                rule.iter()
                    .zip(&e.qp)
                    .map(|(q, qp)| {
                        let uq = uv[0] * q.bary[0] + uv[1] * q.bary[1] + uv[2] * q.bary[2];
                        qp.c_energy * (g2 + qp.kn * qp.kn * uq.norm_sqr())
                    })
                    .sum()
            })
            .collect();
        Ok(chunked_sum(&per))
    }
}

/// `J(u)` over the region selected by `mask`.
pub fn eval_j(
    u: &ComplexField,
    mesh: Arc<TriMesh>,
    k: f64,
    refraction: RefractionModel,
    config: FunctionalConfig,
    mask: &RegionMask,
) -> Result<FunctionalValue> {
    RadiationFunctional::new(mesh, k, refraction, config, mask)?.evaluate(&u.values)
}

/// Nodal representation of `J′(u)` on every vertex; the adjoint solve uses
/// its free-dof entries.
pub fn gradient_source(
    u: &ComplexField,
    mesh: Arc<TriMesh>,
    k: f64,
    refraction: RefractionModel,
    config: FunctionalConfig,
) -> Result<Vec<Complex64>> {
    RadiationFunctional::full(mesh, k, refraction, config)?.gradient(&u.values)
}

/// `Im ∮_{|x| = rho} u_r ū dσ` by the 256-point trapezoid rule, with `u` and
/// its element gradient interpolated at each sample.
pub fn imaginary_flux(u: &ComplexField, mesh: &TriMesh, rho: f64) -> Result<f64> {
    if u.len() != mesh.vertex_count() {
        return Err(Error::DimensionMismatch { expected: mesh.vertex_count(), got: u.len() });
    }
    let locator = PointLocator::new(mesh);
    let mut sum = 0.0;
    for i in 0..FLUX_SAMPLES {
        let th = 2.0 * PI * i as f64 / FLUX_SAMPLES as f64;
        let (c, s) = (th.cos(), th.sin());
        let (t, bary) = locator.locate([rho * c, rho * s]).ok_or(Error::CircleOutsideDomain(rho))?;
        let tri = mesh.triangles()[t];
        let (grads, _) = p1_gradients(&mesh.triangle_points(t));
        let val: Complex64 = (0..3).map(|a| u.values[tri[a]] * bary[a]).sum();
        let ur: Complex64 = (0..3).map(|a| u.values[tri[a]] * (grads[a][0] * c + grads[a][1] * s)).sum();
        sum += (ur * val.conj()).im;
    }
    Ok(sum * 2.0 * PI * rho / FLUX_SAMPLES as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeminormBound {
    pub lhs: f64,
    pub rhs: f64,
    pub sup_deviation: f64,
    pub holds: bool,
}

/// Relative slack covering discretization error in the seminorm bound.
pub const SEMINORM_TOL: f64 = 0.05;

/// Checks `∫(|∇u|² + k²n²|u|²)/(1+|x|) ≤ (1 − sup|1 − n♯/n|)^{-1} [u]²_R`
/// for a field with homogeneous inner data, e.g. the difference of two
/// states sharing the same inner data.
pub fn seminorm_bound_check(
    u: &ComplexField,
    mesh: Arc<TriMesh>,
    k: f64,
    refraction: RefractionModel,
) -> Result<SeminormBound> {
    let r_max = mesh.vertices().iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let adm = refraction.check_admissibility(r_max, 128)?;
    if !adm.admissible {
        return Err(Error::InadmissibleRefraction(format!(
            "sup |1 - n_avg/n| = {:.4} >= 1 for {refraction}",
            adm.sup_deviation
        )));
    }
    let f = RadiationFunctional::full(mesh, k, refraction, FunctionalConfig::weighted())?;
    let lhs = f.weighted_energy(&u.values)?;
    let rhs = f.value(&u.values)? / (1.0 - adm.sup_deviation);
    Ok(SeminormBound { lhs, rhs, sup_deviation: adm.sup_deviation, holds: lhs <= rhs * (1.0 + SEMINORM_TOL) })
}
