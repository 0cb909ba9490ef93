//! Index-of-refraction models, their circular averages and the admissibility
//! test `sup |1 - n_avg(r) / n(x)| < 1`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefractionModel {
    Constant(f64),
    /// `2 + (exp(-(x-1)^2 - y^2) + exp(-(x+1)^2 - y^2)) * x / |x|`
    GaussianPair,
    /// `2 + a * x / |x|`
    AngularLinear(f64),
}

impl Default for RefractionModel {
    fn default() -> Self {
        RefractionModel::Constant(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Admissibility {
    pub sup_deviation: f64,
    pub admissible: bool,
}

impl RefractionModel {
    /// Parses `constant:N`, `gaussian_pair` or `angular:A`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let (kind, arg) = match t.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (t, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::InadmissibleRefraction(format!("`{t}`: expected a numeric parameter")))
        };
        let model = match kind {
            "constant" => RefractionModel::Constant(num(arg)?),
            "gaussian_pair" if arg.is_none() => RefractionModel::GaussianPair,
            "angular" => RefractionModel::AngularLinear(num(arg)?),
            _ => return Err(Error::InadmissibleRefraction(format!("unknown refraction model `{t}`"))),
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks pointwise positivity and parameter ranges.
    pub fn validate(&self) -> Result<()> {
        match *self {
            RefractionModel::Constant(n0) if !(n0 > 0.0) || !n0.is_finite() => {
                Err(Error::NonPositiveIndex { min_n: n0 })
            }
            RefractionModel::AngularLinear(a) if !(a >= 0.0) || !a.is_finite() => {
                Err(Error::InadmissibleRefraction(format!("angular amplitude {a} must be nonnegative")))
            }
            RefractionModel::AngularLinear(a) if a >= 2.0 => Err(Error::NonPositiveIndex { min_n: 2.0 - a }),
            _ => Ok(()),
        }
    }

    /// True when `n` is constant in space.
    pub fn is_constant(&self) -> bool {
        matches!(self, RefractionModel::Constant(_) | RefractionModel::AngularLinear(0.0))
    }

    pub fn eval(&self, p: Point) -> Result<f64> {
        match *self {
            RefractionModel::Constant(n0) => Ok(n0),
            RefractionModel::GaussianPair => {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    return Err(Error::OriginSingularity);
                }
                Ok(gaussian_pair(p, r))
            }
            RefractionModel::AngularLinear(a) => {
                let r = p[0].hypot(p[1]);
                if r == 0.0 {
                    return Err(Error::OriginSingularity);
                }
                Ok(2.0 + a * p[0] / r)
            }
        }
    }

    /// Evaluation for points known to be away from the origin.
    #[inline]
    pub(crate) fn eval_unchecked(&self, p: Point) -> f64 {
        match *self {
            RefractionModel::Constant(n0) => n0,
            RefractionModel::GaussianPair => gaussian_pair(p, p[0].hypot(p[1])),
            RefractionModel::AngularLinear(a) => 2.0 + a * p[0] / p[0].hypot(p[1]),
        }
    }

    /// `(n_*, n^*)` with `n_* <= n(x) <= n^*` everywhere.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            RefractionModel::Constant(n0) => (n0, n0),
            RefractionModel::AngularLinear(a) => (2.0 - a, 2.0 + a),
            RefractionModel::GaussianPair => *gaussian_pair_bounds(),
        }
    }

    pub fn lower_bound(&self) -> f64 {
        self.bounds().0
    }

    /// Mean of `n` over the circle `|x| = r` by the periodic trapezoid rule.
    pub fn radial_average(&self, r: f64, quad_points: usize) -> f64 {
        let m = quad_points.max(16);
        let sum: f64 = (0..m)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / m as f64;
                self.eval_unchecked([r * th.cos(), r * th.sin()])
            })
            .sum();
        sum / m as f64
    }

    /// Samples `|1 - n_avg(r) / n(r, theta)|` over `r in (0, r_max]`.
    pub fn check_admissibility(&self, r_max: f64, n_samples: usize) -> Result<Admissibility> {
        let nr = n_samples.max(1);
        let nth = n_samples.max(16).div_ceil(2) * 2;
        let mut sup = 0.0f64;
        let mut min_n = f64::INFINITY;
        for i in 1..=nr {
            let r = r_max * i as f64 / nr as f64;
            let avg = self.radial_average(r, 256);
            for j in 0..nth {
                let th = 2.0 * PI * j as f64 / nth as f64;
                let n = self.eval_unchecked([r * th.cos(), r * th.sin()]);
                min_n = min_n.min(n);
                sup = sup.max((1.0 - avg / n).abs());
            }
        }
        if min_n <= 0.0 {
            return Err(Error::NonPositiveIndex { min_n });
        }
        Ok(Admissibility { sup_deviation: sup, admissible: sup < 1.0 })
    }
}

impl fmt::Display for RefractionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefractionModel::Constant(n0) => write!(f, "constant:{n0}"),
            RefractionModel::GaussianPair => write!(f, "gaussian_pair"),
            RefractionModel::AngularLinear(a) => write!(f, "angular:{a}"),
        }
    }
}

#[inline]
fn gaussian_pair(p: Point, r: f64) -> f64 {
    let (x, y) = (p[0], p[1]);
    let bumps = (-(x - 1.0).powi(2) - y * y).exp() + (-(x + 1.0).powi(2) - y * y).exp();
    2.0 + bumps * x / r
}

/// Extremes over a 512 x 512 polar grid on `r in (0, 12]`, combined with the
/// limit value 2 at infinity.
fn gaussian_pair_bounds() -> &'static (f64, f64) {
    static BOUNDS: OnceLock<(f64, f64)> = OnceLock::new();
    BOUNDS.get_or_init(|| {
        let (mut lo, mut hi) = (2.0f64, 2.0f64);
        for i in 1..=512 {
            let r = 12.0 * i as f64 / 512.0;
            for j in 0..512 {
                let th = 2.0 * PI * j as f64 / 512.0;
                let n = gaussian_pair([r * th.cos(), r * th.sin()], r);
                lo = lo.min(n);
                hi = hi.max(n);
            }
        }
        (lo, hi)
    })
}
