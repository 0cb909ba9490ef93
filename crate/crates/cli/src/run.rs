//! Command dispatch and artifact writing.
//!
//! Every file is written to `<name>.partial` and renamed once complete, so a
//! failed run never leaves a truncated file under its final name.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use helm_open::analysis::{
    convergence_study, divergence_scan, error_norms, gnuplot_curves, scan_classification_csv, scan_csv, study_csv,
    timing_csv, NormContext, Reference, ScanConfig, StudyConfig,
};
use helm_open::cgm::minimize;
use helm_open::exact::ModeSolution;
use helm_open::export::{exact_polar_csv, field_csv, field_vtk};
use helm_open::fem::HelmholtzProblem;
use helm_open::mesh::{
    build_mesh_with, mesh_quality, region_mask, write_mesh, DomainSpec, Region, RegionMask, TriMesh,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Command, Initial, RunConfig};
use crate::CliError;

fn core<T>(context: &str, r: helm_open::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Core { context: context.to_string(), source })
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    fs::write(&partial, contents).map_err(|source| CliError::Io { path: partial.clone(), source })?;
    fs::rename(&partial, path).map_err(io)
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn put(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, contents)?;
        self.written.push(path);
        Ok(())
    }
}

fn build_mesh(cfg: &RunConfig) -> Result<TriMesh, CliError> {
    let spec = core("domain", DomainSpec::new(cfg.shapes[0], cfg.r_inner, cfg.radii[0]))?;
    core("mesh generation", build_mesh_with(&spec, &cfg.mesh.options()))
}

fn random_data(len: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| Complex64::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0))).collect()
}

fn solve(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let mesh = Arc::new(build_mesh(cfg)?);
    let (j, k) = (cfg.js[0], cfg.ks[0]);
    let problem = HelmholtzProblem::new(mesh.clone(), k, cfg.refraction, cfg.outer_kind).with_inner_mode(j);
    let mut cgm = cfg.cgm.clone();
    if cfg.initial == Initial::Random {
        cgm.initial_f = Some(random_data(problem.outer_data.len(), cfg.seed));
    }
    let run = core("CG minimization", minimize(&problem, cfg.functional, &cgm))?;

    let mut summary = String::from("shape,j,k,R,refraction,outer,vertices,iterations,converged,J_star");
    let mut line = format!(
        "{},{j},{k},{},{},{},{},{},{},{:.12e}",
        cfg.shapes[0].name(),
        cfg.radii[0],
        cfg.refraction,
        cfg.outer_kind.name(),
        mesh.vertex_count(),
        run.iterations(),
        run.converged,
        run.j_star
    );
    if cfg.refraction.is_constant() {
        let n0 = core("refraction", cfg.refraction.eval([1.0, 0.0]))?;
        let exact = core("exact mode", ModeSolution::new(j, k * n0, cfg.r_inner))?;
        let ctx = NormContext { k, refraction: &cfg.refraction, config: cfg.functional };
        let mut masks = vec![("full", RegionMask::full(&mesh))];
        if let Ok(m) = region_mask(&mesh, Region::AnnulusUnit) {
            masks.push(("unit", m));
        }
        for (tag, mask) in &masks {
            let rep = core("error norms", error_norms(&run.u_star, Reference::Exact(&exact), &mesh, mask, &ctx))?;
            summary.push_str(&format!(",L2_rel_{tag},H1_rel_{tag},dJ_rel_{tag}"));
            line.push_str(&format!(",{:.12e},{:.12e},{:.12e}", rep.l2_rel, rep.h1_rel, rep.dj_rel));
        }
    }
    println!("{summary}\n{line}");
    out.put("solve.csv", &format!("{summary}\n{line}\n"))?;
    if cfg.field.csv {
        out.put("field.csv", &core("field export", field_csv(&mesh, &run.u_star))?)?;
    }
    if cfg.field.vtk {
        out.put("field.vtk", &core("field export", field_vtk(&mesh, &run.u_star, "helm-open u_star"))?)?;
    }
    if cfg.trace {
        out.put("trace.csv", &run.trace_csv())?;
    }
    if !run.converged {
        eprintln!("warning: CG stopped after {} iterations without reaching epsilon", run.iterations());
    }
    Ok(())
}

fn study(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let study = StudyConfig {
        shapes: cfg.shapes.clone(),
        js: cfg.js.clone(),
        ks: cfg.ks.clone(),
        radii: cfg.radii.clone(),
        refraction: cfg.refraction,
        mesh: cfg.mesh,
        functional: cfg.functional,
        cgm: cfg.cgm.clone(),
        outer_kind: cfg.outer_kind,
        r_inner: cfg.r_inner,
        reference_radius: cfg.reference_radius,
    };
    let rows = core("convergence study", convergence_study(&study))?;
    for r in &rows {
        println!(
            "{} j={} k={} R={}: L2_rel={:.4e} H1_rel={:.4e} dJ_rel={:.4e} iterations={}",
            r.shape.name(),
            r.j,
            r.k,
            r.r,
            r.unit_annulus.l2_rel,
            r.unit_annulus.h1_rel,
            r.unit_annulus.dj_rel,
            r.iterations
        );
    }
    out.put("study.csv", &study_csv(&rows))?;
    out.put("timing.csv", &timing_csv(&rows))?;
    for (name, body) in gnuplot_curves(&rows) {
        out.put(&format!("curves/{name}"), &body)?;
    }
    Ok(())
}

fn exact(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    if !cfg.refraction.is_constant() {
        return Err(CliError::Validation("exact needs a constant refraction index".into()));
    }
    let n0 = core("refraction", cfg.refraction.eval([1.0, 0.0]))?;
    let r_max = cfg.radii.iter().copied().fold(f64::NAN, f64::max);
    for &j in &cfg.js {
        for &k in &cfg.ks {
            let mode = core("exact mode", ModeSolution::new(j, k * n0, cfg.r_inner))?;
            let csv = core("exact sampling", exact_polar_csv(&mode, r_max, cfg.samples_r, cfg.samples_theta))?;
            out.put(&format!("exact_j{j}_k{k}.csv"), &csv)?;
        }
    }
    Ok(())
}

fn mesh(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let m = build_mesh(cfg)?;
    let q = mesh_quality(&m);
    let csv = format!(
        "vertices,triangles,min_angle,max_edge\n{},{},{:.6},{:.6}\n",
        m.vertex_count(),
        q.triangle_count,
        q.min_angle,
        q.max_edge
    );
    print!("{csv}");
    out.put("mesh.txt", &write_mesh(&m))?;
    out.put("mesh_quality.csv", &csv)
}

fn scan(cfg: &RunConfig, out: &mut Outputs) -> Result<(), CliError> {
    let scan = ScanConfig {
        a_values: cfg.a_values.clone(),
        radii: cfg.radii.clone(),
        k: cfg.ks[0],
        j: cfg.js[0],
        mesh: cfg.mesh,
        cgm: cfg.cgm.clone(),
        r_inner: cfg.r_inner,
    };
    let curves = core("divergence scan", divergence_scan(&scan))?;
    for c in &curves {
        println!("a={}: last growth {:.3e} -> {}", c.a, c.last_growth, c.class.name());
    }
    out.put("scan.csv", &scan_csv(&curves))?;
    out.put("scan_classification.csv", &scan_classification_csv(&curves))
}

/// Executes the command, returning the files written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Outputs { dir: cfg.out.clone(), written: Vec::new() };
    match cfg.command {
        Command::Solve => solve(cfg, &mut out)?,
        Command::Study => study(cfg, &mut out)?,
        Command::Exact => exact(cfg, &mut out)?,
        Command::Mesh => mesh(cfg, &mut out)?,
        Command::Scan => scan(cfg, &mut out)?,
    }
    Ok(out.written)
}
