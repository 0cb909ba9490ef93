//! Quadrature rules shared by assembly, functional evaluation and error norms.
//!
//! Using one rule everywhere keeps the discrete gradient of the radiation
//! functional exactly consistent with its value.

/// A point on the reference triangle in barycentric coordinates, with a
/// weight normalized so that the weights sum to one.
#[derive(Debug, Clone, Copy)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Seven-point degree-5 rule on a triangle (Radon / Dunavant).
pub fn triangle_rule() -> [TriPoint; 7] {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let b1 = (9.0 + 2.0 * s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let a2 = (6.0 + s15) / 21.0;
    let b2 = (9.0 - 2.0 * s15) / 21.0;
    let w2 = (155.0 + s15) / 1200.0;
    let third = 1.0 / 3.0;
    [
        TriPoint { bary: [third, third, third], weight: 9.0 / 40.0 },
        TriPoint { bary: [b1, a1, a1], weight: w1 },
        TriPoint { bary: [a1, b1, a1], weight: w1 },
        TriPoint { bary: [a1, a1, b1], weight: w1 },
        TriPoint { bary: [b2, a2, a2], weight: w2 },
        TriPoint { bary: [a2, b2, a2], weight: w2 },
        TriPoint { bary: [a2, a2, b2], weight: w2 },
    ]
}

/// Two-point Gauss rule on the unit interval: `(t, weight)` with weights summing to one.
pub fn edge_rule() -> [(f64, f64); 2] {
    let d = 0.5 / 3f64.sqrt();
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}

#[inline]
pub fn map_point(bary: &[f64; 3], p: &[[f64; 2]; 3]) -> [f64; 2] {
    [
        bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
        bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
    ]
}
