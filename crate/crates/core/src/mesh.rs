//! Triangle meshes for the three exterior computational domains.
//!
//! All three domains are star-shaped with respect to the origin, so the
//! generator places rings of vertices along rays: ring `k` sits at log-radius
//! `ln r_hat + s_k * ln(r_outer(theta) / r_hat)`. On the annulus the rings are
//! circles and the grid is log-polar, which keeps every cell close to square
//! and concentrates resolution near the obstacle where the solution varies
//! fastest. Optional angular doubling near the hole refines further with
//! conforming transition layers.
//!
//! Vertices are numbered ring by ring from the obstacle outward, so an annulus
//! mesh truncated at an inner ring is a vertex/triangle prefix of the larger
//! mesh (see [`nested_annuli`]).

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::quadrature::{map_point, triangle_rule};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    /// Disk of radius `outer_size`.
    Annulus,
    /// Ellipse with semi-axes `2 * outer_size` (x) and `outer_size` (y).
    EllipseHole,
    /// Square of half side `outer_size`.
    SquareHole,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Annulus => "annulus",
            Shape::EllipseHole => "ellipse",
            Shape::SquareHole => "square",
        }
    }

    pub fn parse(s: &str) -> Option<Shape> {
        match s.trim().to_ascii_lowercase().as_str() {
            "annulus" | "ball" | "disk" => Some(Shape::Annulus),
            "ellipse" => Some(Shape::EllipseHole),
            "square" => Some(Shape::SquareHole),
            _ => None,
        }
    }
}

/// Geometry of the domain `outer curve \ B_{r_inner}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub shape: Shape,
    pub r_inner: f64,
    pub outer_size: f64,
}

impl DomainSpec {
    pub fn new(shape: Shape, r_inner: f64, outer_size: f64) -> Result<Self> {
        let spec = DomainSpec { shape, r_inner, outer_size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_inner > 0.0) || !self.r_inner.is_finite() {
            return Err(Error::InvalidDomain(format!("r_inner = {} must be positive", self.r_inner)));
        }
        if !(self.r_inner < self.outer_size) || !self.outer_size.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "r_inner = {} must be smaller than outer size {}",
                self.r_inner, self.outer_size
            )));
        }
        Ok(())
    }

    /// Distance from the origin to the outer curve along the ray at angle `theta`.
    pub fn outer_radius_at(&self, theta: f64) -> f64 {
        let r = self.outer_size;
        let (s, c) = theta.sin_cos();
        match self.shape {
            Shape::Annulus => r,
            Shape::EllipseHole => 1.0 / ((c * c) / (4.0 * r * r) + (s * s) / (r * r)).sqrt(),
            Shape::SquareHole => r / c.abs().max(s.abs()),
        }
    }

    /// Maximum of `|dP/dtheta|` for the outer curve parametrized by polar angle.
    fn outer_max_speed(&self) -> f64 {
        match self.shape {
            Shape::Annulus => self.outer_size,
            Shape::EllipseHole | Shape::SquareHole => 2.0 * self.outer_size,
        }
    }

    /// Radial projection onto the outer curve.
    pub fn project_outer(&self, p: Point) -> Point {
        let theta = p[1].atan2(p[0]);
        let rho = self.outer_radius_at(theta);
        [rho * theta.cos(), rho * theta.sin()]
    }

    pub fn project_inner(&self, p: Point) -> Point {
        let norm = p[0].hypot(p[1]);
        [p[0] * self.r_inner / norm, p[1] * self.r_inner / norm]
    }

    /// True when `p` lies in the closed domain.
    pub fn contains(&self, p: Point) -> bool {
        let tol = self.tolerance();
        let rho = p[0].hypot(p[1]);
        if rho < self.r_inner - tol {
            return false;
        }
        let theta = p[1].atan2(p[0]);
        rho <= self.outer_radius_at(theta) + tol
    }

    /// Slack used for boundary membership tests.
    pub fn tolerance(&self) -> f64 {
        1e-10 * self.outer_size
    }

    /// Smallest distance from the origin to the outer curve.
    pub fn outer_min_radius(&self) -> f64 {
        self.outer_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    InnerGamma,
    OuterGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
}

/// Conforming triangle mesh with tagged boundary edges.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    domain: Option<DomainSpec>,
    r_inner: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    /// Smallest interior angle over all triangles, in degrees.
    pub min_angle: f64,
    pub max_edge: f64,
    pub triangle_count: usize,
}

/// Generator knobs beyond the target size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    /// Target edge length on the outer boundary.
    pub target_h: f64,
    /// Number of angular doublings toward the obstacle. Level `L` refines the
    /// first octave `[r_hat, 2 r_hat]` by `2^L`, the next by `2^(L-1)`, ...
    pub hole_levels: u32,
}

impl MeshOptions {
    pub fn new(target_h: f64) -> Self {
        MeshOptions { target_h, hole_levels: 0 }
    }

    pub fn with_hole_levels(mut self, levels: u32) -> Self {
        self.hole_levels = levels;
        self
    }
}

impl TriMesh {
    /// Builds a mesh from raw connectivity; triangles are reoriented
    /// counterclockwise. No geometric domain is attached.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let n = vertices.len();
        let mut triangles = triangles;
        for t in &mut triangles {
            if t.iter().any(|&v| v >= n) {
                return Err(Error::InvalidDomain(format!("triangle {t:?} references a missing vertex")));
            }
            let a = signed_area(&vertices, *t);
            if a == 0.0 {
                return Err(Error::InvalidDomain(format!("degenerate triangle {t:?}")));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }
        if boundary_edges.iter().any(|e| e.vertices.iter().any(|&v| v >= n)) {
            return Err(Error::InvalidDomain("boundary edge references a missing vertex".into()));
        }
        let inner: Vec<f64> = boundary_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::InnerGamma)
            .flat_map(|e| e.vertices)
            .map(|v| norm(vertices[v]))
            .collect();
        if inner.is_empty() {
            return Err(Error::InvalidDomain("mesh has no inner boundary".into()));
        }
        let r_inner = inner.iter().sum::<f64>() / inner.len() as f64;
        Ok(TriMesh { vertices, triangles, boundary_edges, domain: None, r_inner })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn domain(&self) -> Option<&DomainSpec> {
        self.domain.as_ref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Radius of the obstacle circle.
    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, self.triangles[t])
    }

    /// Per-vertex flags for membership in a boundary.
    pub fn boundary_flags(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for e in self.boundary_edges.iter().filter(|e| e.tag == tag) {
            flags[e.vertices[0]] = true;
            flags[e.vertices[1]] = true;
        }
        flags
    }

    /// Sorted vertex indices on a boundary.
    pub fn boundary_vertices(&self, tag: BoundaryTag) -> Vec<usize> {
        self.boundary_flags(tag).iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Length of the polygonal boundary loop with the given tag.
    pub fn boundary_length(&self, tag: BoundaryTag) -> f64 {
        self.edges_with_tag(tag).map(|e| dist(self.vertices[e.vertices[0]], self.vertices[e.vertices[1]])).sum()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// Checks orientation, conformity and the two-loop boundary structure.
    pub fn check_topology(&self) -> Result<()> {
        use std::collections::HashMap;
        for t in 0..self.triangles.len() {
            if self.area(t) <= 0.0 {
                return Err(Error::InvalidDomain(format!("triangle {t} is not counterclockwise")));
            }
        }
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some((e, c)) = count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::InvalidDomain(format!("edge {e:?} shared by {c} triangles")));
        }
        let mut boundary: Vec<(usize, usize)> = count.iter().filter(|(_, &c)| c == 1).map(|(&e, _)| e).collect();
        let mut tagged: Vec<(usize, usize)> = self
            .boundary_edges
            .iter()
            .map(|e| (e.vertices[0].min(e.vertices[1]), e.vertices[0].max(e.vertices[1])))
            .collect();
        boundary.sort_unstable();
        tagged.sort_unstable();
        if boundary != tagged {
            return Err(Error::InvalidDomain("tagged edges differ from the topological boundary".into()));
        }
        for tag in [BoundaryTag::InnerGamma, BoundaryTag::OuterGamma] {
            let loops = count_loops(self.edges_with_tag(tag).map(|e| e.vertices));
            if loops != 1 {
                return Err(Error::InvalidDomain(format!("{tag:?} forms {loops} loops, expected 1")));
            }
        }
        Ok(())
    }

    /// Vertices of the outer boundary ordered along the loop.
    pub fn outer_loop(&self) -> Vec<usize> {
        ordered_loop(self.edges_with_tag(BoundaryTag::OuterGamma).map(|e| e.vertices))
    }

    /// Submesh made of the first `vertex_count` vertices and the triangles
    /// that use only those; the new outer boundary is the boundary of the
    /// prefix that is not on the obstacle.
    fn truncate(&self, vertex_count: usize, domain: DomainSpec) -> TriMesh {
        let triangles: Vec<[usize; 3]> =
            self.triangles.iter().copied().filter(|t| t.iter().all(|&v| v < vertex_count)).collect();
        let vertices = self.vertices[..vertex_count].to_vec();
        let inner_flags = self.boundary_flags(BoundaryTag::InnerGamma);
        let mut count = std::collections::HashMap::new();
        for t in &triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        let mut boundary_edges: Vec<BoundaryEdge> = count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .map(|((a, b), _)| BoundaryEdge {
                vertices: [a, b],
                tag: if inner_flags[a] && inner_flags[b] { BoundaryTag::InnerGamma } else { BoundaryTag::OuterGamma },
            })
            .collect();
        boundary_edges.sort_by_key(|e| (e.tag as u8, e.vertices));
        TriMesh { vertices, triangles, boundary_edges, domain: Some(domain), r_inner: self.r_inner }
    }
}

fn signed_area(v: &[Point], t: [usize; 3]) -> f64 {
    let [a, b, c] = [v[t[0]], v[t[1]], v[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

#[inline]
pub(crate) fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

#[inline]
fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn count_loops(edges: impl Iterator<Item = [usize; 2]>) -> usize {
    use std::collections::HashMap;
    let mut parent: HashMap<usize, usize> = HashMap::new();
    fn find(p: &mut HashMap<usize, usize>, x: usize) -> usize {
        let mut r = x;
        while p[&r] != r {
            r = p[&r];
        }
        let mut y = x;
        while p[&y] != r {
            let next = p[&y];
            p.insert(y, r);
            y = next;
        }
        r
    }
    for [a, b] in edges {
        parent.entry(a).or_insert(a);
        parent.entry(b).or_insert(b);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent.insert(ra, rb);
        }
    }
    let keys: Vec<usize> = parent.keys().copied().collect();
    let mut roots: Vec<usize> = keys.into_iter().map(|k| find(&mut parent, k)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}

fn ordered_loop(edges: impl Iterator<Item = [usize; 2]>) -> Vec<usize> {
    use std::collections::HashMap;
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for [a, b] in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let Some(&start) = adj.keys().min() else {
        return Vec::new();
    };
    let mut order = vec![start];
    let mut prev = usize::MAX;
    let mut cur = start;
    loop {
        let next = adj[&cur].iter().copied().find(|&n| n != prev && (order.len() < 2 || n != order[order.len() - 2]));
        match next {
            Some(n) if n != start => {
                order.push(n);
                prev = cur;
                cur = n;
            }
            _ => break,
        }
    }
    order
}

/// Per-ring log-radius fraction `s` and angular vertex count. A ring closing
/// an octave keeps the finer count; the coarsening happens in the next layer.
struct RingLayout {
    s: Vec<f64>,
    counts: Vec<usize>,
}

/// Reference log-length used to turn an `s` step into a physical log step.
fn reference_log_length(spec: &DomainSpec) -> f64 {
    let samples = 2048;
    let (mut lmin, mut lmax) = (f64::INFINITY, 0.0f64);
    for i in 0..samples {
        let theta = 2.0 * PI * i as f64 / samples as f64;
        let l = (spec.outer_radius_at(theta) / spec.r_inner).ln();
        lmin = lmin.min(l);
        lmax = lmax.max(l);
    }
    // Balance cell aspect over rays, but keep the outermost radial spacing
    // short enough for the 1.5 h edge bound.
    (lmin * lmax).sqrt().max(lmax / 1.118)
}

fn ring_layout(spec: &DomainSpec, opts: &MeshOptions) -> RingLayout {
    let n0 = {
        let raw = (2.0 * PI * spec.outer_max_speed() / opts.target_h).ceil() as usize;
        raw.div_ceil(8).max(2) * 8
    };
    let l_ref = reference_log_length(spec);
    let octave_s = std::f64::consts::LN_2 / l_ref;
    let n_octaves = ((1.0 / octave_s) - 1e-12).ceil().max(1.0) as u32;
    let mut s = vec![0.0];
    let mut counts = Vec::new();
    let mut octave = 0u32;
    loop {
        let s_lo = octave as f64 * octave_s;
        if s_lo >= 1.0 - 1e-12 {
            break;
        }
        let s_hi = ((octave + 1) as f64 * octave_s).min(1.0);
        // The outermost octave always carries the base count `n0`.
        let level = opts.hole_levels.saturating_sub(octave).min(n_octaves - 1 - octave);
        let n = n0 << level;
        let dtheta = 2.0 * PI / n as f64;
        let span = (s_hi - s_lo) * l_ref;
        let layers = (span / dtheta - 1e-9).ceil().max(1.0) as usize;
        if counts.is_empty() {
            counts.push(n);
        }
        for i in 1..=layers {
            let frac = i as f64 / layers as f64;
            let si = if i == layers { s_hi } else { s_lo + frac * (s_hi - s_lo) };
            s.push(si);
            counts.push(n);
        }
        octave += 1;
    }
    RingLayout { s, counts }
}

fn ring_point(spec: &DomainSpec, s: f64, theta: f64) -> Point {
    let l = (spec.outer_radius_at(theta) / spec.r_inner).ln();
    let r = if s >= 1.0 {
        spec.outer_radius_at(theta)
    } else if s == 0.0 {
        spec.r_inner
    } else {
        spec.r_inner * (s * l).exp()
    };
    [r * theta.cos(), r * theta.sin()]
}

fn build_from_layout(spec: &DomainSpec, layout: &RingLayout) -> TriMesh {
    let mut vertices = Vec::new();
    let mut ring_start = Vec::with_capacity(layout.s.len());
    for (k, &s) in layout.s.iter().enumerate() {
        ring_start.push(vertices.len());
        let n = layout.counts[k];
        for j in 0..n {
            let theta = 2.0 * PI * j as f64 / n as f64;
            vertices.push(ring_point(spec, s, theta));
        }
    }
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let orient = |v: &[Point], mut t: [usize; 3]| {
        if signed_area(v, t) < 0.0 {
            t.swap(1, 2);
        }
        t
    };
    for k in 0..layout.s.len() - 1 {
        let (ni, no) = (layout.counts[k], layout.counts[k + 1]);
        let (bi, bo) = (ring_start[k], ring_start[k + 1]);
        if ni == no {
            for j in 0..ni {
                let i0 = bi + j;
                let i1 = bi + (j + 1) % ni;
                let o0 = bo + j;
                let o1 = bo + (j + 1) % no;
                let a = [[i0, i1, o1], [i0, o1, o0]];
                let b = [[i0, i1, o0], [i1, o1, o0]];
                let qa = a.iter().map(|&t| min_angle(&vertices, t)).fold(f64::INFINITY, f64::min);
                let qb = b.iter().map(|&t| min_angle(&vertices, t)).fold(f64::INFINITY, f64::min);
                let pick = if qb > qa + 1e-9 { b } else { a };
                for t in pick {
                    triangles.push(orient(&vertices, t));
                }
            }
        } else {
            debug_assert_eq!(ni, 2 * no);
            for j in 0..no {
                let o0 = bo + j;
                let o1 = bo + (j + 1) % no;
                let f0 = bi + 2 * j;
                let f1 = bi + 2 * j + 1;
                let f2 = bi + (2 * j + 2) % ni;
                for t in [[f0, f1, o0], [f1, o1, o0], [f1, f2, o1]] {
                    triangles.push(orient(&vertices, t));
                }
            }
        }
    }
    let mut boundary_edges = Vec::new();
    let n_in = layout.counts[0];
    for j in 0..n_in {
        boundary_edges.push(BoundaryEdge { vertices: [j, (j + 1) % n_in], tag: BoundaryTag::InnerGamma });
    }
    let last = layout.s.len() - 1;
    let n_out = layout.counts[last];
    let b = ring_start[last];
    for j in 0..n_out {
        boundary_edges.push(BoundaryEdge { vertices: [b + j, b + (j + 1) % n_out], tag: BoundaryTag::OuterGamma });
    }
    TriMesh { vertices, triangles, boundary_edges, domain: Some(*spec), r_inner: spec.r_inner }
}

/// A few Jacobi-style Laplacian sweeps over interior vertices.
fn laplacian_smooth(mesh: &mut TriMesh, sweeps: usize) {
    let n = mesh.vertices.len();
    let mut fixed = mesh.boundary_flags(BoundaryTag::InnerGamma);
    for (f, o) in fixed.iter_mut().zip(mesh.boundary_flags(BoundaryTag::OuterGamma)) {
        *f |= o;
    }
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in &mesh.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
    }
    for l in &mut nbrs {
        l.sort_unstable();
        l.dedup();
    }
    for _ in 0..sweeps {
        let old = mesh.vertices.clone();
        for v in 0..n {
            if fixed[v] || nbrs[v].is_empty() {
                continue;
            }
            let m = nbrs[v].len() as f64;
            let (sx, sy) = nbrs[v].iter().fold((0.0, 0.0), |(x, y), &w| (x + old[w][0], y + old[w][1]));
            mesh.vertices[v] = [sx / m, sy / m];
        }
    }
}

fn min_angle(v: &[Point], t: [usize; 3]) -> f64 {
    let p = [v[t[0]], v[t[1]], v[t[2]]];
    let mut best = f64::INFINITY;
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let w = [c[0] - a[0], c[1] - a[1]];
        let cos = (u[0] * w[0] + u[1] * w[1]) / (norm(u) * norm(w));
        best = best.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
    }
    best
}

/// Minimum angle, maximum edge length and triangle count.
pub fn mesh_quality(mesh: &TriMesh) -> MeshQuality {
    let mut q = MeshQuality { min_angle: f64::INFINITY, max_edge: 0.0, triangle_count: mesh.triangles.len() };
    for &t in &mesh.triangles {
        q.min_angle = q.min_angle.min(min_angle(&mesh.vertices, t));
        for i in 0..3 {
            q.max_edge = q.max_edge.max(dist(mesh.vertices[t[i]], mesh.vertices[t[(i + 1) % 3]]));
        }
    }
    q
}

/// Generates a conforming mesh of the domain with outer edge length about `target_h`.
pub fn build_mesh(spec: &DomainSpec, target_h: f64) -> Result<TriMesh> {
    build_mesh_with(spec, &MeshOptions::new(target_h))
}

pub fn build_mesh_with(spec: &DomainSpec, opts: &MeshOptions) -> Result<TriMesh> {
    spec.validate()?;
    if !(opts.target_h > 0.0) || opts.target_h >= spec.outer_size - spec.r_inner {
        return Err(Error::InvalidDomain(format!(
            "target_h = {} must lie in (0, {})",
            opts.target_h,
            spec.outer_size - spec.r_inner
        )));
    }
    let layout = ring_layout(spec, opts);
    let mut mesh = build_from_layout(spec, &layout);
    if mesh_quality(&mesh).min_angle < 20.0 {
        laplacian_smooth(&mut mesh, 3);
    }
    let q = mesh_quality(&mesh);
    if q.min_angle < 20.0 {
        return Err(Error::MeshQualityFailure { min_angle: q.min_angle });
    }
    Ok(mesh)
}

/// Annulus meshes `B_R \ B_{r_inner}` for every radius in `radii`, all cut
/// from the mesh of the largest radius. Each mesh is a vertex prefix of every
/// larger one, so restriction between them is exact nodal subsetting.
///
/// Every ratio `R / r_inner` must be an integer power of two times the
/// smallest such ratio's ring spacing; in practice radii of the form
/// `r_inner * 2^p`.
pub fn nested_annuli(r_inner: f64, radii: &[f64], opts: &MeshOptions) -> Result<Vec<TriMesh>> {
    let r_max = radii.iter().copied().fold(f64::NAN, f64::max);
    let spec = DomainSpec::new(Shape::Annulus, r_inner, r_max)?;
    let big = build_mesh_with(&spec, opts)?;
    let layout = ring_layout(&spec, opts);
    let mut ring_start = Vec::with_capacity(layout.counts.len() + 1);
    let mut acc = 0;
    for &c in &layout.counts {
        ring_start.push(acc);
        acc += c;
    }
    ring_start.push(acc);
    radii
        .iter()
        .map(|&r| {
            let sub = DomainSpec::new(Shape::Annulus, r_inner, r)?;
            let s_target = (r / r_inner).ln() / (r_max / r_inner).ln();
            let k = layout.s.iter().position(|&s| (s - s_target).abs() < 1e-12).ok_or_else(|| {
                Error::NonNestedRadii(format!("R = {r} is not a ring radius of the R = {r_max} mesh"))
            })?;
            if k == 0 {
                return Err(Error::NonNestedRadii(format!("R = {r} coincides with the obstacle")));
            }
            if k == layout.s.len() - 1 {
                let mut m = big.clone();
                m.domain = Some(sub);
                return Ok(m);
            }
            Ok(big.truncate(ring_start[k + 1], sub))
        })
        .collect()
}

/// Splits every triangle into four through its edge midpoints. Boundary
/// midpoints are projected back onto the exact curves when the domain is known
/// (the inner circle is always known).
pub fn refine_uniform(mesh: &TriMesh) -> TriMesh {
    use std::collections::HashMap;
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut tag_of: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
    for e in &mesh.boundary_edges {
        let [a, b] = e.vertices;
        tag_of.insert((a.min(b), a.max(b)), e.tag);
    }
    let r_inner = mesh.r_inner;
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let (pa, pb) = (vertices[a], vertices[b]);
            let mut p = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            match tag_of.get(&key) {
                Some(BoundaryTag::InnerGamma) => {
                    let r = norm(p);
                    p = [p[0] * r_inner / r, p[1] * r_inner / r];
                }
                Some(BoundaryTag::OuterGamma) => {
                    if let Some(d) = mesh.domain {
                        p = d.project_outer(p);
                    }
                }
                None => {}
            }
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let [a, b] = e.vertices;
        let m = midpoint[&(a.min(b), a.max(b))];
        boundary_edges.push(BoundaryEdge { vertices: [a, m], tag: e.tag });
        boundary_edges.push(BoundaryEdge { vertices: [m, b], tag: e.tag });
    }
    TriMesh { vertices, triangles, boundary_edges, domain: mesh.domain, r_inner }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    FullDomain,
    /// `B_1 \ B_{1/2}`.
    AnnulusUnit,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::FullDomain => "full",
            Region::AnnulusUnit => "unit_annulus",
        }
    }

    fn contains(self, p: Point) -> bool {
        match self {
            Region::FullDomain => true,
            Region::AnnulusUnit => {
                let r = norm(p);
                (0.5..=1.0).contains(&r)
            }
        }
    }
}

/// Per-triangle fraction of quadrature weight inside a region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub region: Region,
    pub element_weights: Vec<f64>,
}

impl RegionMask {
    pub fn full(mesh: &TriMesh) -> Self {
        RegionMask { region: Region::FullDomain, element_weights: vec![1.0; mesh.triangle_count()] }
    }

    pub fn weight(&self, t: usize) -> f64 {
        self.element_weights[t]
    }

    /// Sum of weight times triangle area.
    pub fn measure(&self, mesh: &TriMesh) -> f64 {
        self.element_weights.iter().enumerate().map(|(t, w)| w * mesh.area(t)).sum()
    }
}

pub fn region_mask(mesh: &TriMesh, region: Region) -> Result<RegionMask> {
    match region {
        Region::FullDomain => Ok(RegionMask::full(mesh)),
        Region::AnnulusUnit => {
            let outer_min = match mesh.domain {
                Some(d) => d.outer_min_radius(),
                None => mesh
                    .boundary_vertices(BoundaryTag::OuterGamma)
                    .iter()
                    .map(|&v| norm(mesh.vertices[v]))
                    .fold(f64::INFINITY, f64::min),
            };
            if outer_min < 1.0 - 1e-10 {
                return Err(Error::RegionOutsideDomain(format!(
                    "unit annulus needs outer extent >= 1, mesh reaches {outer_min}"
                )));
            }
            if mesh.r_inner > 0.5 + 1e-10 {
                return Err(Error::RegionOutsideDomain(format!("obstacle radius {} exceeds 1/2", mesh.r_inner)));
            }
            let rule = triangle_rule();
            let element_weights = (0..mesh.triangle_count())
                .map(|t| {
                    let p = mesh.triangle_points(t);
                    rule.iter()
                        .filter(|q| region.contains(map_point(&q.bary, &p)))
                        .map(|q| q.weight)
                        .sum::<f64>()
                        .min(1.0)
                })
                .collect();
            Ok(RegionMask { region, element_weights })
        }
    }
}

/// Bucket grid for locating the triangle containing a point.
pub struct PointLocator<'a> {
    mesh: &'a TriMesh,
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &mesh.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let target = (mesh.triangle_count() as f64 / 2.0).sqrt().max(1.0);
        let cell = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / target).max(1e-12);
        let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for t in 0..mesh.triangle_count() {
            let p = mesh.triangle_points(t);
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for q in &p {
                for d in 0..2 {
                    a[d] = a[d].min(q[d]);
                    b[d] = b[d].max(q[d]);
                }
            }
            let ix0 = ((a[0] - lo[0]) / cell).floor() as usize;
            let ix1 = (((b[0] - lo[0]) / cell).floor() as usize).min(nx - 1);
            let iy0 = ((a[1] - lo[1]) / cell).floor() as usize;
            let iy1 = (((b[1] - lo[1]) / cell).floor() as usize).min(ny - 1);
            for ix in ix0..=ix1 {
                for iy in iy0..=iy1 {
                    buckets[iy * nx + ix].push(t);
                }
            }
        }
        PointLocator { mesh, origin: lo, cell, nx, ny, buckets }
    }

    /// Triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        let fx = (p[0] - self.origin[0]) / self.cell;
        let fy = (p[1] - self.origin[1]) / self.cell;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        if ix >= self.nx || iy >= self.ny {
            return None;
        }
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[iy * self.nx + ix] {
            let b = barycentric(&self.mesh.triangle_points(t), p);
            let worst = b.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -1e-12 {
                return Some((t, b));
            }
            if best.as_ref().is_none_or(|x| worst > x.2) {
                best = Some((t, b, worst));
            }
        }
        best.filter(|x| x.2 > -1e-9).map(|x| (x.0, x.1))
    }
}

pub fn barycentric(p: &[Point; 3], x: Point) -> [f64; 3] {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let l1 = ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (x[1] - p[0][1])) / det;
    let l2 = ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (x[0] - p[0][0]) * (p[1][1] - p[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Writes the `helm-mesh v1` text format.
pub fn write_mesh(mesh: &TriMesh) -> String {
    let mut out = String::new();
    out.push_str("helm-mesh v1\n");
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for p in &mesh.vertices {
        let _ = writeln!(out, "{:e} {:e}", p[0], p[1]);
    }
    let _ = writeln!(out, "triangles {}", mesh.triangles.len());
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "boundary {}", mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let tag = match e.tag {
            BoundaryTag::InnerGamma => "inner",
            BoundaryTag::OuterGamma => "outer",
        };
        let _ = writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], tag);
    }
    out
}

struct LineCursor<'a> {
    lines: std::vec::IntoIter<(usize, &'a str)>,
    last_line: usize,
}

impl<'a> LineCursor<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .ok_or_else(|| format_err(self.last_line, &format!("unexpected end of input, expected {what}")))
    }

    fn count(&mut self, name: &str) -> Result<usize> {
        let (ln, l) = self.next(name)?;
        let mut f = l.split_whitespace();
        if f.next() != Some(name) {
            return Err(format_err(ln, &format!("expected `{name} N`")));
        }
        f.next().and_then(|s| s.parse().ok()).ok_or_else(|| format_err(ln, "missing or bad count"))
    }
}

fn format_err(line: usize, msg: &str) -> Error {
    Error::MeshFormat { line, msg: msg.to_string() }
}

fn fields<T: std::str::FromStr>(l: &str) -> Option<Vec<T>> {
    l.split_whitespace().map(|s| s.parse().ok()).collect()
}

/// Parses the `helm-mesh v1` text format.
pub fn read_mesh(text: &str) -> Result<TriMesh> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty()).collect();
    let mut cur = LineCursor { lines: lines.into_iter(), last_line: text.lines().count().max(1) };

    let (ln, header) = cur.next("header")?;
    if header != "helm-mesh v1" {
        return Err(format_err(ln, "expected header `helm-mesh v1`"));
    }
    let nv = cur.count("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = cur.next("vertex")?;
        match fields::<f64>(l).as_deref() {
            Some(&[x, y]) => vertices.push([x, y]),
            _ => return Err(format_err(ln, "expected `x y`")),
        }
    }
    let nt = cur.count("triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = cur.next("triangle")?;
        match fields::<usize>(l).as_deref() {
            Some(&[a, b, c]) if a < nv && b < nv && c < nv => triangles.push([a, b, c]),
            _ => return Err(format_err(ln, "expected `i j k` with valid vertex indices")),
        }
    }
    let nb = cur.count("boundary")?;
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, l) = cur.next("boundary edge")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        let parsed = match f.as_slice() {
            [a, b, tag] => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()).map(|(a, b)| (a, b, *tag)),
            _ => None,
        };
        let Some((a, b, tag)) = parsed.filter(|&(a, b, _)| a < nv && b < nv) else {
            return Err(format_err(ln, "expected `i j TAG` with valid vertex indices"));
        };
        let tag = match tag {
            "inner" => BoundaryTag::InnerGamma,
            "outer" => BoundaryTag::OuterGamma,
            _ => return Err(format_err(ln, "tag must be `inner` or `outer`")),
        };
        boundary_edges.push(BoundaryEdge { vertices: [a, b], tag });
    }
    if let Some((ln, _)) = cur.lines.next() {
        return Err(format_err(ln, "trailing content after boundary section"));
    }
    TriMesh::from_parts(vertices, triangles, boundary_edges)
}
