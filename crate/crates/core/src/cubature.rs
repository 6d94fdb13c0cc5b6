//! Three-dimensional cubature in spherical coordinates about anchor points.

use crate::config::{dist, Vec3};
use crate::error::Result;
use crate::quad::{graded_breaks, GaussLegendre};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

type C64 = Complex64;

#[derive(Clone, Copy, Debug)]
pub struct CubatureSpec {
    /// Polar Gauss-Legendre order; the azimuthal rule uses twice as many points.
    pub angular_order: usize,
    pub radial_order: usize,
    pub panel_width: f64,
    /// Innermost radius of the geometric refinement towards each anchor.
    pub inner_radius: f64,
}

impl Default for CubatureSpec {
    fn default() -> Self {
        CubatureSpec { angular_order: 24, radial_order: 12, panel_width: 0.25, inner_radius: 1e-8 }
    }
}

/// Unit directions and weights (summing to 4 pi) of the product rule.
pub fn sphere_rule(order: usize) -> Vec<(Vec3, f64)> {
    let gl = GaussLegendre::new(order);
    let naz = 2 * order;
    let mut out = Vec::with_capacity(order * naz);
    for (ct, w) in gl.nodes.iter().zip(&gl.weights) {
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        for k in 0..naz {
            let ph = (k as f64 + 0.5) * 2.0 * PI / naz as f64;
            out.push(([st * ph.cos(), st * ph.sin(), *ct], w * 2.0 * PI / naz as f64));
        }
    }
    out
}

/// Partition-of-unity weight of anchor `j` at `x`.
pub fn partition_weight(anchors: &[Vec3], j: usize, x: Vec3) -> f64 {
    if anchors.len() == 1 {
        return 1.0;
    }
    let inv = |a: Vec3| {
        let d = dist(x, a);
        1.0 / (d * d * d * d)
    };
    let wj = inv(anchors[j]);
    if !wj.is_finite() {
        return 1.0;
    }
    let total: f64 = anchors.iter().map(|&a| inv(a)).sum();
    if !total.is_finite() {
        return 0.0;
    }
    wj / total
}

/// `∫ f` over the union of balls of radius `extent` about each anchor, split by a
/// partition of unity and integrated in spherical coordinates about each anchor.
pub fn partitioned_integral(
    anchors: &[Vec3],
    extent: f64,
    spec: &CubatureSpec,
    f: impl Fn(Vec3) -> C64 + Sync,
) -> C64 {
    let rule = GaussLegendre::new(spec.radial_order);
    let dirs = sphere_rule(spec.angular_order);
    let first = 1.0f64.min(extent);
    let breaks = graded_breaks(spec.inner_radius.min(first * 0.5), first, 2.0, spec.panel_width, extent);
    let mut radial = Vec::new();
    for w in breaks.windows(2) {
        for (r, wt) in rule.on(w[0], w[1]) {
            radial.push((r, wt));
        }
    }
    let mut total = C64::new(0.0, 0.0);
    for (j, &a) in anchors.iter().enumerate() {
        let part: C64 = radial
            .par_iter()
            .map(|&(r, wr)| {
                let mut s = C64::new(0.0, 0.0);
                for &(d, wd) in &dirs {
                    let x = [a[0] + r * d[0], a[1] + r * d[1], a[2] + r * d[2]];
                    let w = partition_weight(anchors, j, x);
                    if w > 0.0 {
                        s += f(x) * (w * wd);
                    }
                }
                s * (wr * r * r)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        total += part;
    }
    total
}

/// Integral of a product of smooth fields whose supports are the given balls.
pub fn integrate_fields(balls: &[(Vec3, f64)], f: impl Fn(Vec3) -> C64 + Sync) -> Result<C64> {
    let anchors: Vec<Vec3> = balls.iter().map(|b| b.0).collect();
    let mut extent = 0.0f64;
    for &(c, r) in balls {
        for &a in &anchors {
            extent = extent.max(dist(a, c) + r);
        }
    }
    Ok(partitioned_integral(&anchors, extent, &CubatureSpec::default(), f))
}
