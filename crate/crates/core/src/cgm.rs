//! Conjugate-gradient minimization of `q(f) = J(u(f))` over the outer
//! boundary data `f`.
//!
//! The state map `f ↦ u(f)` is affine and `J` is a Hermitian quadratic form,
//! so `q` is a convex quadratic in `(Re f, Im f)`. Gradients are Riesz
//! representatives in the `L²(outer boundary)` inner product
//! `⟨a, b⟩ = Re(a^H M_Γ b)`:
//!
//! * Neumann control: `∇q = p|_Γ` with `S p = J′(u)` on free dofs.
//! * Dirichlet control: `∇q = M_Γ⁻¹ (J′(u)|_Γ − S_{ΓF} p)`.
//!
//! The Hessian action on a direction `w` repeats this with `J′(δu)`, where
//! `δu` solves the variation problem for `w`.

use num_complex::Complex64;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fem::{ComplexField, HelmholtzOperator, HelmholtzProblem, OuterKind};
use crate::functional::{FunctionalConfig, RadiationFunctional};

#[derive(Debug, Clone, PartialEq)]
pub struct CgmConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Initial outer data; zero when `None`.
    pub initial_f: Option<Vec<Complex64>>,
    /// Steepest-descent restart period, with state and gradient recomputed.
    pub restart: usize,
}

impl Default for CgmConfig {
    fn default() -> Self {
        CgmConfig { epsilon: 1e-8, max_iterations: 500, initial_f: None, restart: 50 }
    }
}

impl CgmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || self.max_iterations == 0 || self.restart == 0 {
            return Err(Error::DomainError(format!(
                "CG needs epsilon > 0, max_iterations >= 1 and restart >= 1 (got {}, {}, {})",
                self.epsilon, self.max_iterations, self.restart
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub m: usize,
    pub j: f64,
    /// `‖∇q‖` in the boundary inner product.
    pub grad_norm: f64,
    pub rho: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct CgmRun {
    pub f_star: Vec<Complex64>,
    pub u_star: ComplexField,
    pub j_star: f64,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub functional: FunctionalConfig,
}

impl CgmRun {
    pub fn iterations(&self) -> usize {
        self.history.last().map_or(0, |r| r.m)
    }

    /// Per-iteration history as `m,J,grad_norm,rho,gamma` CSV.
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("m,J,grad_norm,rho,gamma\n");
        for r in &self.history {
            let _ = writeln!(s, "{},{:.17e},{:.17e},{:.17e},{:.17e}", r.m, r.j, r.grad_norm, r.rho, r.gamma);
        }
        s
    }
}

/// The reduced problem `f ↦ J(u(f))` for fixed inner data.
#[derive(Debug)]
pub struct ReducedProblem {
    operator: HelmholtzOperator,
    functional: RadiationFunctional,
    inner_data: Vec<Complex64>,
}

impl ReducedProblem {
    pub fn new(
        operator: HelmholtzOperator,
        functional: RadiationFunctional,
        inner_data: Vec<Complex64>,
    ) -> Result<Self> {
        if inner_data.len() != operator.dofs().inner.len() {
            return Err(Error::DimensionMismatch { expected: operator.dofs().inner.len(), got: inner_data.len() });
        }
        if operator.mesh().vertex_count() != functional.mesh().vertex_count() {
            return Err(Error::DimensionMismatch {
                expected: operator.mesh().vertex_count(),
                got: functional.mesh().vertex_count(),
            });
        }
        Ok(ReducedProblem { operator, functional, inner_data })
    }

    /// Builds the operator and the full-domain functional of `problem`.
    pub fn from_problem(problem: &HelmholtzProblem, config: FunctionalConfig) -> Result<Self> {
        let operator = HelmholtzOperator::new(problem.mesh.clone(), problem.k, problem.refraction, problem.outer_kind)?;
        let functional = RadiationFunctional::full(problem.mesh.clone(), problem.k, problem.refraction, config)?;
        Self::new(operator, functional, problem.inner_data.clone())
    }

    pub fn operator(&self) -> &HelmholtzOperator {
        &self.operator
    }

    pub fn functional(&self) -> &RadiationFunctional {
        &self.functional
    }

    pub fn control_len(&self) -> usize {
        self.operator.outer_count()
    }

    pub fn state(&self, f: &[Complex64]) -> Result<ComplexField> {
        self.operator.solve_state(&self.inner_data, f)
    }

    pub fn objective(&self, f: &[Complex64]) -> Result<f64> {
        self.functional.value(&self.state(f)?.values)
    }

    /// Riesz gradient of `q` at the state `u`; linear in `u`.
    pub fn gradient_at(&self, u: &ComplexField) -> Result<Vec<Complex64>> {
        let src = self.functional.gradient(&u.values)?;
        let src_free = self.operator.restrict_free(&src);
        let p = self.operator.solve_adjoint(&src_free)?;
        match self.operator.outer_kind() {
            OuterKind::Neumann => Ok(self.operator.trace(&p.values)),
            OuterKind::Dirichlet => {
                let p_free = self.operator.restrict_free(&p.values);
                let coupling = self.operator.outer_coupling_apply(&p_free);
                let euclid: Vec<Complex64> =
                    self.operator.trace(&src).iter().zip(&coupling).map(|(a, b)| a - b).collect();
                self.operator.boundary_mass_solve(&euclid)
            }
        }
    }

    /// `(δu(w), H w)`.
    pub fn hessian_apply(&self, w: &[Complex64]) -> Result<(ComplexField, Vec<Complex64>)> {
        let du = self.operator.solve_variation(w)?;
        let hw = self.gradient_at(&du)?;
        Ok((du, hw))
    }

    pub fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Result<f64> {
        self.operator.boundary_inner(a, b)
    }
}

/// Runs CG from `config.initial_f` (or zero).
pub fn minimize_reduced(reduced: &ReducedProblem, config: &CgmConfig) -> Result<CgmRun> {
    config.validate()?;
    let n = reduced.control_len();
    let mut f = match &config.initial_f {
        Some(f0) if f0.len() != n => return Err(Error::DimensionMismatch { expected: n, got: f0.len() }),
        Some(f0) => f0.clone(),
        None => vec![Complex64::new(0.0, 0.0); n],
    };
    let mut u = reduced.state(&f)?;
    let mut g = reduced.gradient_at(&u)?;
    let mut gg = reduced.inner(&g, &g)?;
    let g0 = gg.sqrt();
    let mut j = reduced.functional.value(&u.values)?;
    let mut history = vec![IterationRecord { m: 0, j, grad_norm: g0, rho: 0.0, gamma: 0.0 }];
    let mut converged = g0 == 0.0;
    let mut w = g.clone();
    let mut m = 0;
    while !converged && m < config.max_iterations {
        m += 1;
        let (du, hw) = reduced.hessian_apply(&w)?;
        let den = reduced.inner(&hw, &w)?;
        if !(den > 0.0) {
            return Err(Error::Stagnation(den));
        }
        let rho = reduced.inner(&g, &w)? / den;
        for (fi, wi) in f.iter_mut().zip(&w) {
            *fi -= wi * rho;
        }
        let restart = m % config.restart == 0;
        if restart {
            u = reduced.state(&f)?;
            g = reduced.gradient_at(&u)?;
        } else {
            for (ui, di) in u.values.iter_mut().zip(&du.values) {
                *ui -= di * rho;
            }
            for (gi, hi) in g.iter_mut().zip(&hw) {
                *gi -= hi * rho;
            }
        }
        j = reduced.functional.value(&u.values)?;
        let gg_new = reduced.inner(&g, &g)?;
        let gamma = gg_new / gg;
        history.push(IterationRecord { m, j, grad_norm: gg_new.sqrt(), rho, gamma });
        converged = gg_new.sqrt() <= config.epsilon * g0;
        if restart {
            w.clone_from(&g);
        } else {
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi = gi + *wi * gamma;
            }
        }
        gg = gg_new;
    }
    if m > 0 {
        u = reduced.state(&f)?;
        j = reduced.functional.value(&u.values)?;
    }
    Ok(CgmRun { f_star: f, u_star: u, j_star: j, history, converged, functional: reduced.functional.config() })
}

/// Minimizes `J` over the outer data of `problem` (its `outer_data` is
/// ignored in favor of `config.initial_f`).
pub fn minimize(problem: &HelmholtzProblem, functional: FunctionalConfig, config: &CgmConfig) -> Result<CgmRun> {
    minimize_reduced(&ReducedProblem::from_problem(problem, functional)?, config)
}

/// `d_R = √J(u_star)` of a converged weighted run.
pub fn minimized_seminorm(run: &CgmRun) -> Result<f64> {
    if !run.converged {
        return Err(Error::NotConverged);
    }
    if !run.functional.weighted {
        return Err(Error::DomainError("d_R is defined by the weighted functional".into()));
    }
    Ok(run.j_star.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    use crate::mesh::{build_mesh, DomainSpec, Shape, TriMesh};
    use crate::refraction::RefractionModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(r: f64, h: f64) -> Arc<TriMesh> {
        Arc::new(build_mesh(&DomainSpec::new(Shape::Annulus, 0.5, r).unwrap(), h).unwrap())
    }

    fn problem(r: f64, h: f64, kind: OuterKind, model: RefractionModel) -> HelmholtzProblem {
        HelmholtzProblem::new(mesh(r, h), 1.0, model, kind).with_inner_mode(0)
    }

    #[test]
    fn zero_inner_data_converges_immediately() {
        let p = HelmholtzProblem::new(mesh(2.0, 0.3), 1.0, RefractionModel::Constant(1.0), OuterKind::Neumann);
        let run = minimize(&p, FunctionalConfig::weighted(), &CgmConfig::default()).unwrap();
        assert!(run.converged && run.iterations() == 0);
        assert!(run.f_star.iter().all(|z| z.norm() == 0.0));
        assert!(run.u_star.values.iter().all(|z| z.norm() == 0.0));
        assert_eq!(minimized_seminorm(&run).unwrap(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for kind in [OuterKind::Neumann, OuterKind::Dirichlet] {
            let p = problem(2.0, 0.25, kind, RefractionModel::AngularLinear(0.1));
            let red = ReducedProblem::from_problem(&p, FunctionalConfig::unweighted()).unwrap();
            let n = red.control_len();
            let rand_vec = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
                (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
            };
            let f0 = rand_vec(&mut rng);
            let g = red.gradient_at(&red.state(&f0).unwrap()).unwrap();
            for _ in 0..5 {
                let d = rand_vec(&mut rng);
                let t = 1e-4;
                let fp: Vec<_> = f0.iter().zip(&d).map(|(a, b)| a + b * t).collect();
                let fm: Vec<_> = f0.iter().zip(&d).map(|(a, b)| a - b * t).collect();
                let fd = (red.objective(&fp).unwrap() - red.objective(&fm).unwrap()) / (2.0 * t);
                let an = red.inner(&g, &d).unwrap();
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(fd.abs()), "{kind:?}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn descent_is_monotone_and_converges() {
        for kind in [OuterKind::Neumann, OuterKind::Dirichlet] {
            let p = problem(2.0, 0.2, kind, RefractionModel::Constant(1.0));
            let run = minimize(&p, FunctionalConfig::unweighted(), &CgmConfig::default()).unwrap();
            assert!(run.converged, "{kind:?}: {} iterations", run.iterations());
            let j0 = run.history[0].j;
            for w in run.history.windows(2) {
                assert!(w[1].j <= w[0].j + 1e-12 * j0, "{kind:?}: {:?}", w);
            }
            let csv = run.trace_csv();
            assert!(csv.starts_with("m,J,grad_norm,rho,gamma\n"));
            assert_eq!(csv.lines().count(), run.history.len() + 1);
        }
    }

    #[test]
    fn restarts_do_not_change_the_minimizer() {
        let p = problem(2.0, 0.25, OuterKind::Neumann, RefractionModel::Constant(1.0));
        let a = minimize(&p, FunctionalConfig::unweighted(), &CgmConfig::default()).unwrap();
        let cfg = CgmConfig { restart: 7, ..CgmConfig::default() };
        let b = minimize(&p, FunctionalConfig::unweighted(), &cfg).unwrap();
        assert!(a.converged && b.converged);
        assert!((a.j_star - b.j_star).abs() < 1e-8 * a.j_star);
        let diff = a.u_star.max_abs_diff(&b.u_star);
        assert!(diff < 1e-5, "{diff}");
    }

    #[test]
    fn unconverged_runs_have_no_seminorm() {
        let p = problem(2.0, 0.25, OuterKind::Neumann, RefractionModel::AngularLinear(0.3)).with_inner_mode(2);
        let cfg = CgmConfig { max_iterations: 1, ..CgmConfig::default() };
        let run = minimize(&p, FunctionalConfig::weighted(), &cfg).unwrap();
        assert!(!run.converged);
        assert_eq!(minimized_seminorm(&run), Err(Error::NotConverged));
        assert!(CgmConfig { epsilon: 0.0, ..CgmConfig::default() }.validate().is_err());
    }
}
