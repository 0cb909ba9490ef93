//! Closed-form outgoing solutions of `Δu + k²u = 0` outside the disk of
//! radius `r_hat`, with Dirichlet data on its boundary.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::special::{bessel_jy_all, hankel1, hankel1_with_derivative};

/// The single-mode solution `u = H¹_j(kr) / H¹_j(k r_hat) · cos(jθ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSolution {
    pub j: usize,
    pub k: f64,
    pub r_hat: f64,
    h_hat: Complex64,
}

impl ModeSolution {
    pub fn new(j: usize, k: f64, r_hat: f64) -> Result<Self> {
        if !(k > 0.0) || !(r_hat > 0.0) {
            return Err(Error::DomainError(format!("mode needs k > 0 and r_hat > 0, got k = {k}, r_hat = {r_hat}")));
        }
        let h_hat = hankel1(j, k * r_hat)?;
        Ok(ModeSolution { j, k, r_hat, h_hat })
    }

    fn polar(&self, p: Point) -> Result<(f64, f64)> {
        let r = p[0].hypot(p[1]);
        // Mesh vertices on the obstacle carry rounding of a few ulps.
        if r < self.r_hat * (1.0 - 1e-12) {
            return Err(Error::InsideObstacle { radius: r, r_hat: self.r_hat });
        }
        Ok((r, p[1].atan2(p[0])))
    }

    /// Value at `p`.
    pub fn value(&self, p: Point) -> Result<Complex64> {
        let (r, th) = self.polar(p)?;
        let h = hankel1(self.j, self.k * r)?;
        Ok(h / self.h_hat * (self.j as f64 * th).cos())
    }

    /// Value and Cartesian gradient at `p`.
    pub fn value_and_gradient(&self, p: Point) -> Result<(Complex64, [Complex64; 2])> {
        let (r, th) = self.polar(p)?;
        let (h, dh) = hankel1_with_derivative(self.j, self.k * r)?;
        let jf = self.j as f64;
        let (c, s) = ((jf * th).cos(), (jf * th).sin());
        let u = h / self.h_hat * c;
        let u_r = dh * self.k / self.h_hat * c;
        let u_t_over_r = -h / self.h_hat * (jf * s / r);
        let (ct, st) = (th.cos(), th.sin());
        Ok((u, [u_r * ct - u_t_over_r * st, u_r * st + u_t_over_r * ct]))
    }

    /// Outward normal derivative on the circle `|x| = r` at angle `theta`.
    pub fn radial_derivative(&self, r: f64, theta: f64) -> Result<Complex64> {
        if r < self.r_hat * (1.0 - 1e-12) {
            return Err(Error::InsideObstacle { radius: r, r_hat: self.r_hat });
        }
        let (_, dh) = hankel1_with_derivative(self.j, self.k * r)?;
        Ok(dh * self.k / self.h_hat * (self.j as f64 * theta).cos())
    }
}

pub fn exact_mode(solution: &ModeSolution, point: Point) -> Result<Complex64> {
    solution.value(point)
}

pub fn exact_mode_gradient(solution: &ModeSolution, point: Point) -> Result<[Complex64; 2]> {
    Ok(solution.value_and_gradient(point)?.1)
}

/// Outgoing solution for general inner data `g(θ)`:
/// `u(r, θ) = Σ_{|ℓ| ≤ l_max} c_ℓ H¹_|ℓ|(kr) / H¹_|ℓ|(k r_hat) e^{iℓθ}` with
/// `c_ℓ = (1/2π) ∫ g(θ') e^{-iℓθ'} dθ'` by a periodic trapezoid rule.
#[derive(Debug, Clone)]
pub struct SeriesSolution {
    k: f64,
    r_hat: f64,
    /// `(ℓ, c_ℓ / H¹_|ℓ|(k r_hat))` for `ℓ = -l_max..=l_max`.
    terms: Vec<(i64, Complex64)>,
}

impl SeriesSolution {
    pub fn new(g: impl Fn(f64) -> Complex64, k: f64, r_hat: f64, l_max: usize) -> Result<Self> {
        let m = 4 * (l_max + 1).next_power_of_two().max(64);
        let samples: Vec<Complex64> = (0..m).map(|i| g(2.0 * PI * i as f64 / m as f64)).collect();
        let (jv, yv) = bessel_jy_all(l_max, k * r_hat)?;
        let mut terms = Vec::with_capacity(2 * l_max + 1);
        for l in -(l_max as i64)..=(l_max as i64) {
            let c = samples
                .iter()
                .enumerate()
                .map(|(i, &v)| v * Complex64::from_polar(1.0, -(l as f64) * 2.0 * PI * i as f64 / m as f64))
                .sum::<Complex64>()
                / m as f64;
            let a = l.unsigned_abs() as usize;
            terms.push((l, c / Complex64::new(jv[a], yv[a])));
        }
        Ok(SeriesSolution { k, r_hat, terms })
    }

    pub fn value(&self, p: Point) -> Result<Complex64> {
        let r = p[0].hypot(p[1]);
        if r < self.r_hat * (1.0 - 1e-12) {
            return Err(Error::InsideObstacle { radius: r, r_hat: self.r_hat });
        }
        let th = p[1].atan2(p[0]);
        let l_max = self.terms.last().map_or(0, |t| t.0 as usize);
        let (jv, yv) = bessel_jy_all(l_max, self.k * r)?;
        Ok(self
            .terms
            .iter()
            .map(|&(l, c)| {
                let a = l.unsigned_abs() as usize;
                c * Complex64::new(jv[a], yv[a]) * Complex64::from_polar(1.0, l as f64 * th)
            })
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(r: f64, th: f64) -> Point {
        [r * th.cos(), r * th.sin()]
    }

    #[test]
    fn boundary_values_are_cosines() {
        for j in [0usize, 1, 2, 3, 7] {
            let m = ModeSolution::new(j, 1.3, 0.5).unwrap();
            for i in 0..16 {
                let th = 2.0 * PI * i as f64 / 16.0 - PI + 0.01;
                let u = m.value(at(0.5, th)).unwrap();
                assert!((u - (j as f64 * th).cos()).norm() < 1e-13, "j={j} th={th}");
            }
        }
    }

    #[test]
    fn hankel_ratio_at_unit_point() {
        let m = ModeSolution::new(0, 1.0, 0.5).unwrap();
        let want = hankel1(0, 1.0).unwrap() / hankel1(0, 0.5).unwrap();
        assert!((m.value([1.0, 0.0]).unwrap() - want).norm() < 1e-15);
        let h01 = Complex64::new(0.7651976866, 0.0882569642);
        assert!((hankel1(0, 1.0).unwrap() - h01).norm() < 1e-9);
    }

    #[test]
    fn rejects_points_inside_obstacle() {
        let m = ModeSolution::new(2, 1.0, 0.5).unwrap();
        assert!(matches!(m.value([0.2, 0.1]), Err(Error::InsideObstacle { .. })));
        assert!(matches!(exact_mode_gradient(&m, [0.0, 0.3]), Err(Error::InsideObstacle { .. })));
    }

    #[test]
    fn far_field_amplitude_decays_like_inverse_sqrt() {
        for j in [0usize, 2, 3] {
            let m = ModeSolution::new(j, 1.0, 0.5).unwrap();
            let th = 0.3;
            let scale = (j as f64 * th).cos().abs();
            let a50 = m.value(at(50.0, th)).unwrap().norm() * 50f64.sqrt() / scale;
            let a100 = m.value(at(100.0, th)).unwrap().norm() * 100f64.sqrt() / scale;
            assert!((a50 / a100 - 1.0).abs() < 0.01, "j={j}: {a50} vs {a100}");
        }
    }

    #[test]
    fn zero_mode_gradient_is_radial() {
        let m = ModeSolution::new(0, 2.0, 0.5).unwrap();
        let g = exact_mode_gradient(&m, [1.7, 0.0]).unwrap();
        assert!(g[1].norm() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        for (j, k) in [(0usize, 1.0), (2, 0.5), (3, 2.0)] {
            let m = ModeSolution::new(j, k, 0.5).unwrap();
            for p in [[0.9f64, 0.4], [-1.3, 2.2], [3.0, -0.1]] {
                let r = p[0].hypot(p[1]);
                let h = 1e-6 * r;
                let g = exact_mode_gradient(&m, p).unwrap();
                let dx = (m.value([p[0] + h, p[1]]).unwrap() - m.value([p[0] - h, p[1]]).unwrap()) / (2.0 * h);
                let dy = (m.value([p[0], p[1] + h]).unwrap() - m.value([p[0], p[1] - h]).unwrap()) / (2.0 * h);
                let scale = g[0].norm().max(g[1].norm());
                assert!((g[0] - dx).norm() < 1e-7 * scale && (g[1] - dy).norm() < 1e-7 * scale, "j={j} p={p:?}");
            }
        }
    }

    #[test]
    fn satisfies_helmholtz_by_stencil() {
        for (j, k) in [(0usize, 1.0), (2, 2.0), (3, 0.5)] {
            let m = ModeSolution::new(j, k, 0.5).unwrap();
            for p in [[1.0, 0.5], [-2.0, 1.0]] {
                let h = 1e-3;
                let u = |dx: f64, dy: f64| m.value([p[0] + dx, p[1] + dy]).unwrap();
                let lap = (u(h, 0.0) + u(-h, 0.0) + u(0.0, h) + u(0.0, -h) - u(0.0, 0.0) * 4.0) / (h * h);
                let res = lap + u(0.0, 0.0) * (k * k);
                assert!(res.norm() < 1e-5, "j={j} p={p:?}: {}", res.norm());
            }
        }
    }

    #[test]
    fn series_collapses_to_single_mode() {
        for (j, k) in [(0usize, 1.0), (2, 0.5), (3, 2.0)] {
            let m = ModeSolution::new(j, k, 0.5).unwrap();
            let s = SeriesSolution::new(|t| Complex64::new((j as f64 * t).cos(), 0.0), k, 0.5, 40).unwrap();
            for p in [[0.5, 0.0], [1.0, 1.0], [-3.0, 0.7]] {
                assert!((s.value(p).unwrap() - m.value(p).unwrap()).norm() < 1e-10, "j={j} p={p:?}");
            }
        }
    }

    #[test]
    fn series_reproduces_general_boundary_data() {
        let g = |t: f64| Complex64::new((t.cos()).exp(), 0.3 * (2.0 * t).sin());
        let s = SeriesSolution::new(g, 1.0, 0.5, 40).unwrap();
        for i in 0..12 {
            let t = 2.0 * PI * i as f64 / 12.0 + 0.05;
            assert!((s.value(at(0.5, t)).unwrap() - g(t)).norm() < 1e-10);
        }
    }

    /// `∫∫ |∇u − ik u x̂|² w(r) r dr dθ` over `r̂ < r < R` by Gauss-Legendre
    /// panels in `r` and the trapezoid rule in θ.
    fn polar_functional(m: &ModeSolution, big_r: f64, weighted: bool) -> f64 {
        let gl = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let panels = (64.0 * big_r) as usize;
        let nth = 64;
        let dr = (big_r - m.r_hat) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = m.r_hat + (p as f64 + 0.5) * dr;
            for &(x, w) in &gl {
                let r = mid + 0.5 * dr * x;
                let mut ring = 0.0;
                for i in 0..nth {
                    let th = 2.0 * PI * i as f64 / nth as f64;
                    let (u, g) = m.value_and_gradient(at(r, th)).unwrap();
                    let iku = Complex64::new(0.0, m.k) * u;
                    let e = [g[0] - iku * th.cos(), g[1] - iku * th.sin()];
                    ring += e[0].norm_sqr() + e[1].norm_sqr();
                }
                let weight = if weighted { 1.0 / (1.0 + r) } else { 1.0 };
                total += 0.5 * dr * w * r * weight * ring * 2.0 * PI / nth as f64;
            }
        }
        total
    }

    #[test]
    fn radiation_functional_of_exact_mode_is_controlled() {
        let m = ModeSolution::new(0, 1.0, 0.5).unwrap();
        let unweighted: Vec<f64> = [2.0, 4.0, 8.0, 16.0].iter().map(|&r| polar_functional(&m, r, false)).collect();
        let weighted: Vec<f64> = [2.0, 4.0, 8.0, 16.0].iter().map(|&r| polar_functional(&m, r, true)).collect();
        for w in unweighted.windows(2) {
            // doubling R must grow J by well under a factor two
            assert!(w[1] >= w[0] && w[1] < 1.5 * w[0], "{unweighted:?}");
        }
        let inc: Vec<f64> = weighted.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(inc.iter().all(|&d| d >= 0.0));
        assert!(inc[2] < 0.5 * inc[1] && inc[1] < 0.5 * inc[0], "{weighted:?}");
    }
}
