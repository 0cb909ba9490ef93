//! Error norms, convergence studies and the guided-mode divergence scan.
//!
//! Norms are integrated with the same 7-point rule as assembly; exact
//! references are sampled at quadrature points, discrete ones are
//! interpolated in P1. Region masks weight whole elements.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cgm::{minimize, CgmConfig, CgmRun};
use crate::error::{Error, Result};
use crate::exact::ModeSolution;
use crate::fem::{p1_gradients, ComplexField, HelmholtzProblem, OuterKind};
use crate::functional::{chunked_sum, FunctionalConfig};
use crate::mesh::{
    build_mesh_with, nested_annuli, region_mask, DomainSpec, MeshOptions, PointLocator, Region, RegionMask, Shape,
    TriMesh,
};
use crate::quadrature::{map_point, triangle_rule};
use crate::refraction::RefractionModel;

/// Relative growth of the last interval below which a `J(R)` curve counts as bounded.
pub const BOUNDED_GROWTH: f64 = 0.05;

/// What the numerical field is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    /// Nodal field on the same mesh.
    Field(&'a ComplexField),
    /// Analytic outgoing mode, sampled at quadrature points.
    Exact(&'a ModeSolution),
}

/// Coefficients of the functional used for `dJ_rel`.
#[derive(Debug, Clone, Copy)]
pub struct NormContext<'a> {
    pub k: f64,
    pub refraction: &'a RefractionModel,
    pub config: FunctionalConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub l2: f64,
    pub l2_rel: f64,
    pub h1: f64,
    pub h1_rel: f64,
    pub dj_rel: f64,
    pub region: Region,
}

/// Per-element sums: `|e|^2, |grad e|^2, J(e), |ref|^2, |grad ref|^2, J(ref)`.
type Sums = [f64; 6];

fn rellich_sq(grad: [Complex64; 2], v: Complex64, kn: f64, xhat: [f64; 2]) -> f64 {
    let iknv = Complex64::new(0.0, kn) * v;
    (grad[0] - iknv * xhat[0]).norm_sqr() + (grad[1] - iknv * xhat[1]).norm_sqr()
}

fn element_sums(
    t: usize,
    u: &[Complex64],
    reference: Reference<'_>,
    mesh: &TriMesh,
    ctx: &NormContext<'_>,
) -> Result<Sums> {
    let tri = mesh.triangles()[t];
    let pts = mesh.triangle_points(t);
    let (grads, area) = p1_gradients(&pts);
    let p1 = |vals: [Complex64; 3]| -> [Complex64; 2] {
        [0, 1].map(|d| vals[0] * grads[0][d] + vals[1] * grads[1][d] + vals[2] * grads[2][d])
    };
    let uv = tri.map(|v| u[v]);
    let gu = p1(uv);
    let rv = match reference {
        Reference::Field(f) => Some(tri.map(|v| f.values[v])),
        Reference::Exact(_) => None,
    };
    let gr_field = rv.map(p1);
    let mut s = [0.0; 6];
    for q in triangle_rule().iter() {
        let x = map_point(&q.bary, &pts);
        let interp = |vals: [Complex64; 3]| vals[0] * q.bary[0] + vals[1] * q.bary[1] + vals[2] * q.bary[2];
        let uq = interp(uv);
        let (rq, gr) = match (reference, rv, gr_field) {
            (Reference::Exact(m), _, _) => m.value_and_gradient(x)?,
            (_, Some(rv), Some(gr)) => (interp(rv), gr),
            _ => unreachable!("field reference always carries nodal values"),
        };
        let r = x[0].hypot(x[1]);
        let xhat = [x[0] / r, x[1] / r];
        let kn = ctx.k * ctx.refraction.eval_unchecked(x);
        let c = q.weight * area;
        let cw = c * ctx.config.weight(r);
        let e = uq - rq;
        let ge = [gu[0] - gr[0], gu[1] - gr[1]];
        s[0] += c * e.norm_sqr();
        s[1] += c * (ge[0].norm_sqr() + ge[1].norm_sqr());
        s[2] += cw * rellich_sq(ge, e, kn, xhat);
        s[3] += c * rq.norm_sqr();
        s[4] += c * (gr[0].norm_sqr() + gr[1].norm_sqr());
        s[5] += cw * rellich_sq(gr, rq, kn, xhat);
    }
    Ok(s)
}

/// `L2`, `H1` and functional errors of `u_num` against `reference` on the mask.
/// The `H1` norm is the full norm (value plus gradient).
pub fn error_norms(
    u_num: &ComplexField,
    reference: Reference<'_>,
    mesh: &TriMesh,
    mask: &RegionMask,
    ctx: &NormContext<'_>,
) -> Result<ErrorReport> {
    let n = mesh.vertex_count();
    if u_num.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: u_num.len() });
    }
    if let Reference::Field(f) = reference {
        if f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: f.len() });
        }
    }
    if mask.element_weights.len() != mesh.triangle_count() {
        return Err(Error::DimensionMismatch { expected: mesh.triangle_count(), got: mask.element_weights.len() });
    }
    let per: Vec<Sums> = (0..mesh.triangle_count())
        .into_par_iter()
        .map(|t| {
            let w = mask.weight(t);
            if w == 0.0 {
                return Ok([0.0; 6]);
            }
            Ok(element_sums(t, &u_num.values, reference, mesh, ctx)?.map(|v| w * v))
        })
        .collect::<Result<_>>()?;
    let total: Vec<f64> = (0..6).map(|i| chunked_sum(&per.iter().map(|s| s[i]).collect::<Vec<_>>())).collect();
    let l2 = total[0].sqrt();
    let h1 = (total[0] + total[1]).sqrt();
    let ref_l2 = total[3].sqrt();
    let ref_h1 = (total[3] + total[4]).sqrt();
    if ref_l2 == 0.0 || total[5] == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(ErrorReport {
        l2,
        l2_rel: l2 / ref_l2,
        h1,
        h1_rel: h1 / ref_h1,
        dj_rel: total[2] / total[5],
        region: mask.region,
    })
}

/// Interpolates a P1 field from `src` onto the vertices of `dst`. Meshes built
/// by [`nested_annuli`] should use [`ComplexField::restrict`] instead, which is exact.
pub fn interpolate_field(src: &TriMesh, field: &ComplexField, dst: &TriMesh) -> Result<ComplexField> {
    let locator = PointLocator::new(src);
    let values = dst
        .vertices()
        .iter()
        .map(|&p| {
            let (t, b) = locator.locate(p).ok_or_else(|| {
                Error::RegionOutsideDomain(format!("point ({}, {}) outside reference mesh", p[0], p[1]))
            })?;
            let tri = src.triangles()[t];
            Ok((0..3).map(|i| field.values[tri[i]] * b[i]).sum())
        })
        .collect::<Result<_>>()?;
    Ok(ComplexField { values })
}

/// Mesh resolution used for every domain of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshPolicy {
    pub h: f64,
    pub hole_levels: u32,
}

impl MeshPolicy {
    pub fn options(&self) -> MeshOptions {
        MeshOptions::new(self.h).with_hole_levels(self.hole_levels)
    }
}

impl Default for MeshPolicy {
    fn default() -> Self {
        MeshPolicy { h: 0.1, hole_levels: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub shapes: Vec<Shape>,
    pub js: Vec<usize>,
    pub ks: Vec<f64>,
    pub radii: Vec<f64>,
    pub refraction: RefractionModel,
    pub mesh: MeshPolicy,
    pub functional: FunctionalConfig,
    pub cgm: CgmConfig,
    pub outer_kind: OuterKind,
    pub r_inner: f64,
    /// Self-reference radius for variable indices; defaults to the largest radius.
    pub reference_radius: Option<f64>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            shapes: vec![Shape::Annulus],
            js: vec![0],
            ks: vec![1.0],
            radii: vec![1.0, 2.0, 4.0, 8.0],
            refraction: RefractionModel::default(),
            mesh: MeshPolicy::default(),
            functional: FunctionalConfig::unweighted(),
            cgm: CgmConfig::default(),
            outer_kind: OuterKind::Neumann,
            r_inner: 0.5,
            reference_radius: None,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shapes.is_empty() || self.js.is_empty() || self.ks.is_empty() || self.radii.is_empty() {
            return Err(Error::DomainError("study grid has an empty axis".into()));
        }
        if let Some(&r) = self.radii.iter().find(|&&r| !(r > self.r_inner)) {
            return Err(Error::InvalidDomain(format!("R = {r} must exceed r_inner = {}", self.r_inner)));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| !(k > 0.0) || !k.is_finite()) {
            return Err(Error::DomainError(format!("wavenumber must be positive, got {k}")));
        }
        if !(self.mesh.h > 0.0) {
            return Err(Error::InvalidDomain(format!("mesh size must be positive, got {}", self.mesh.h)));
        }
        self.refraction.validate()?;
        self.cgm.validate()
    }

    fn sorted_radii(&self) -> Vec<f64> {
        let mut r = self.radii.clone();
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    }
}

#[derive(Debug, Clone)]
pub struct StudyRow {
    pub j: usize,
    pub k: f64,
    pub r: f64,
    pub shape: Shape,
    pub refraction: String,
    pub unit_annulus: ErrorReport,
    pub full: ErrorReport,
    pub iterations: usize,
    pub converged: bool,
    /// `J` never increased along the CG history.
    pub monotone: bool,
    pub j_star: f64,
    pub vertices: usize,
    pub wall_time: f64,
}

fn monotone(run: &CgmRun) -> bool {
    run.history.windows(2).all(|w| w[1].j <= w[0].j * (1.0 + 1e-12) + 1e-300)
}

/// Meshes for every radius of one shape, sharing vertices when the shape is an annulus.
fn study_meshes(shape: Shape, r_inner: f64, radii: &[f64], policy: &MeshPolicy) -> Result<Vec<Arc<TriMesh>>> {
    let opts = policy.options();
    let meshes = if shape == Shape::Annulus {
        nested_annuli(r_inner, radii, &opts)?
    } else {
        radii
            .iter()
            .map(|&r| build_mesh_with(&DomainSpec::new(shape, r_inner, r)?, &opts))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(meshes.into_iter().map(Arc::new).collect())
}

struct Solved {
    mesh: Arc<TriMesh>,
    run: CgmRun,
    wall_time: f64,
}

fn solve_one(mesh: Arc<TriMesh>, j: usize, k: f64, cfg: &StudyConfig) -> Result<Solved> {
    let start = Instant::now();
    let problem = HelmholtzProblem::new(mesh.clone(), k, cfg.refraction, cfg.outer_kind).with_inner_mode(j);
    let run = minimize(&problem, cfg.functional, &cfg.cgm)?;
    Ok(Solved { mesh, run, wall_time: start.elapsed().as_secs_f64() })
}

fn make_row(
    solved: &Solved,
    reference: Reference<'_>,
    j: usize,
    k: f64,
    r: f64,
    shape: Shape,
    cfg: &StudyConfig,
) -> Result<StudyRow> {
    let ctx = NormContext { k, refraction: &cfg.refraction, config: cfg.functional };
    let mesh = &solved.mesh;
    let unit = error_norms(&solved.run.u_star, reference, mesh, &region_mask(mesh, Region::AnnulusUnit)?, &ctx)?;
    let full = error_norms(&solved.run.u_star, reference, mesh, &RegionMask::full(mesh), &ctx)?;
    Ok(StudyRow {
        j,
        k,
        r,
        shape,
        refraction: cfg.refraction.to_string(),
        unit_annulus: unit,
        full,
        iterations: solved.run.iterations(),
        converged: solved.run.converged,
        monotone: monotone(&solved.run),
        j_star: solved.run.j_star,
        vertices: mesh.vertex_count(),
        wall_time: solved.wall_time,
    })
}

/// Runs the `(shape, j, k, R)` grid. Constant indices are compared with the
/// exact mode; variable ones with the run at the reference radius, restricted
/// to each smaller domain.
pub fn convergence_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>> {
    cfg.validate()?;
    let radii = cfg.sorted_radii();
    let mut rows = Vec::new();
    for &shape in &cfg.shapes {
        if cfg.refraction.is_constant() {
            let meshes = study_meshes(shape, cfg.r_inner, &radii, &cfg.mesh)?;
            for &j in &cfg.js {
                for &k in &cfg.ks {
                    let n0 = cfg.refraction.eval([1.0, 0.0])?;
                    let exact = ModeSolution::new(j, k * n0, cfg.r_inner)?;
                    for (mesh, &r) in meshes.iter().zip(&radii) {
                        let solved = solve_one(mesh.clone(), j, k, cfg)?;
                        rows.push(make_row(&solved, Reference::Exact(&exact), j, k, r, shape, cfg)?);
                    }
                }
            }
        } else {
            let r_ref = cfg.reference_radius.unwrap_or(radii[radii.len() - 1]);
            let mut all = radii.clone();
            if !all.contains(&r_ref) {
                all.push(r_ref);
                all.sort_by(f64::total_cmp);
            }
            let meshes = study_meshes(shape, cfg.r_inner, &all, &cfg.mesh)?;
            let ref_mesh = meshes[all.iter().position(|&r| r == r_ref).expect("reference radius present")].clone();
            for &j in &cfg.js {
                for &k in &cfg.ks {
                    let reference = solve_one(ref_mesh.clone(), j, k, cfg)?;
                    for (mesh, &r) in meshes.iter().zip(&all) {
                        if !radii.contains(&r) || r > r_ref {
                            continue;
                        }
                        let (solved, ref_field) = if r == r_ref {
                            let s = Solved {
                                mesh: ref_mesh.clone(),
                                run: reference.run.clone(),
                                wall_time: reference.wall_time,
                            };
                            (s, reference.run.u_star.clone())
                        } else {
                            let s = solve_one(mesh.clone(), j, k, cfg)?;
                            let f = if shape == Shape::Annulus {
                                reference.run.u_star.restrict(mesh.vertex_count())?
                            } else {
                                interpolate_field(&ref_mesh, &reference.run.u_star, mesh)?
                            };
                            (s, f)
                        };
                        rows.push(make_row(&solved, Reference::Field(&ref_field), j, k, r, shape, cfg)?);
                    }
                }
            }
        }
    }
    rows.sort_by(|a, b| {
        (a.shape.name(), a.j).cmp(&(b.shape.name(), b.j)).then(a.k.total_cmp(&b.k)).then(a.r.total_cmp(&b.r))
    });
    Ok(rows)
}

/// Header of [`study_csv`].
pub const STUDY_HEADER: &str = "shape,j,k,R,refraction,vertices,iterations,converged,monotone,J_star,\
L2,L2_rel,H1,H1_rel,dJ_rel,L2_full,L2_rel_full,H1_full,H1_rel_full,dJ_rel_full";

/// One line per row. Wall time is left out so the file is reproducible;
/// see [`timing_csv`].
pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut s = String::from(STUDY_HEADER);
    s.push('\n');
    for r in rows {
        let (u, f) = (&r.unit_annulus, &r.full);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.shape.name(),
            r.j,
            r.k,
            r.r,
            r.refraction,
            r.vertices,
            r.iterations,
            r.converged,
            r.monotone,
            r.j_star,
            u.l2,
            u.l2_rel,
            u.h1,
            u.h1_rel,
            u.dj_rel,
            f.l2,
            f.l2_rel,
            f.h1,
            f.h1_rel,
            f.dj_rel
        );
    }
    s
}

pub fn timing_csv(rows: &[StudyRow]) -> String {
    let mut s = String::from("shape,j,k,R,wall_time\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{:.3}", r.shape.name(), r.j, r.k, r.r, r.wall_time);
    }
    s
}

/// Two-column `R L2_rel` files on the unit annulus, one per `(shape, j, k)`,
/// keyed by file name.
pub fn gnuplot_curves(rows: &[StudyRow]) -> BTreeMap<String, String> {
    let mut out: BTreeMap<String, String> = BTreeMap::new();
    for r in rows {
        let name = format!("{}_j{}_k{}.dat", r.shape.name(), r.j, r.k);
        let body = out.entry(name).or_insert_with(|| "# R L2_rel H1_rel\n".to_string());
        let _ = writeln!(body, "{} {:.12e} {:.12e}", r.r, r.unit_annulus.l2_rel, r.unit_annulus.h1_rel);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveClass {
    Bounded,
    Growing,
}

impl CurveClass {
    pub fn name(self) -> &'static str {
        match self {
            CurveClass::Bounded => "bounded",
            CurveClass::Growing => "growing",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScanCurve {
    pub a: f64,
    /// `(R, weighted J(u_star))`, increasing in `R`.
    pub points: Vec<(f64, f64)>,
    /// Relative growth of `J` over the last interval.
    pub last_growth: f64,
    pub class: CurveClass,
}

/// Classifies a `J(R)` curve by the relative growth of its last interval.
pub fn classify(points: &[(f64, f64)]) -> (f64, CurveClass) {
    match points {
        [.., (_, prev), (_, last)] => {
            let growth = (last - prev) / prev.abs().max(f64::MIN_POSITIVE);
            (growth, if growth < BOUNDED_GROWTH { CurveClass::Bounded } else { CurveClass::Growing })
        }
        _ => (0.0, CurveClass::Bounded),
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub a_values: Vec<f64>,
    pub radii: Vec<f64>,
    pub k: f64,
    pub j: usize,
    pub mesh: MeshPolicy,
    pub cgm: CgmConfig,
    pub r_inner: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            a_values: vec![0.0, 0.1, 0.8],
            radii: vec![2.0, 4.0, 8.0, 12.0],
            k: 1.0,
            j: 0,
            mesh: MeshPolicy::default(),
            cgm: CgmConfig::default(),
            r_inner: 0.5,
        }
    }
}

/// Weighted `J(u_star)` against `R` for `n = 2 + a x/|x|` on annuli.
pub fn divergence_scan(cfg: &ScanConfig) -> Result<Vec<ScanCurve>> {
    if cfg.radii.len() < 2 {
        return Err(Error::DomainError("divergence scan needs at least two radii".into()));
    }
    let mut radii = cfg.radii.clone();
    radii.sort_by(f64::total_cmp);
    let opts = cfg.mesh.options();
    let meshes: Vec<Arc<TriMesh>> = radii
        .iter()
        .map(|&r| build_mesh_with(&DomainSpec::new(Shape::Annulus, cfg.r_inner, r)?, &opts).map(Arc::new))
        .collect::<Result<_>>()?;
    cfg.a_values
        .iter()
        .map(|&a| {
            let refraction = RefractionModel::AngularLinear(a);
            refraction.validate()?;
            let points = meshes
                .iter()
                .zip(&radii)
                .map(|(mesh, &r)| {
                    let problem = HelmholtzProblem::new(mesh.clone(), cfg.k, refraction, OuterKind::Neumann)
                        .with_inner_mode(cfg.j);
                    let run = minimize(&problem, FunctionalConfig::weighted(), &cfg.cgm)?;
                    Ok((r, run.j_star))
                })
                .collect::<Result<Vec<_>>>()?;
            let (last_growth, class) = classify(&points);
            Ok(ScanCurve { a, points, last_growth, class })
        })
        .collect()
}

pub fn scan_csv(curves: &[ScanCurve]) -> String {
    let mut s = String::from("a,R,J\n");
    for c in curves {
        for (r, j) in &c.points {
            let _ = writeln!(s, "{},{},{:.12e}", c.a, r, j);
        }
    }
    s
}

pub fn scan_classification_csv(curves: &[ScanCurve]) -> String {
    let mut s = String::from("a,last_growth,class\n");
    for c in curves {
        let _ = writeln!(s, "{},{:.6e},{}", c.a, c.last_growth, c.class.name());
    }
    s
}
