//! Free and interacting resolvents, domain elements and the Abel-limit oracle.
//!
//! `z` is always the square root of the spectral parameter, taken with `Im z ≥ 0`.
//! Real `z > 0` is the `+i0` boundary value at `z²`, real `z < 0` the `−i0` one.

use crate::config::{dist, Configuration, Vec3};
use crate::cubature::sphere_rule;
use crate::error::{Error, Result};
use crate::field::{inner_free, AnchoredProfile, CentredField, DecayClass, ScalarField};
use crate::gamma::gamma_build;
use crate::quad::{adaptive, GaussLegendre};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

type C64 = Complex64;

const MEAN_TOL: f64 = 1e-13;

/// Spherical mean of `u` about `x` at radius `s`, by closed form or product quadrature
/// refined until two successive orders agree.
pub fn mean_at(u: &ScalarField, x: Vec3, s: f64) -> C64 {
    if let Some(m) = u.spherical_mean_at(x, s) {
        return m;
    }
    if s == 0.0 {
        return u.eval(x);
    }
    let avg = |order: usize| -> C64 {
        sphere_rule(order)
            .iter()
            .map(|(w, wt)| u.eval([x[0] + s * w[0], x[1] + s * w[1], x[2] + s * w[2]]) * *wt)
            .sum::<C64>()
            / (4.0 * PI)
    };
    let mut order = 16;
    let mut prev = avg(order);
    while order < 128 {
        order *= 2;
        let next = avg(order);
        if (next - prev).norm() <= MEAN_TOL * u.peak().max(1e-300) {
            return next;
        }
        prev = next;
    }
    prev
}

/// Gauss-Legendre nodes and weights in `s` covering the part of `u` seen from `x`.
fn radial_rule(u: &ScalarField, x: Vec3, max_width: f64) -> (Vec<f64>, Vec<f64>) {
    let (c, r) = u.support_ball();
    let d = dist(x, c);
    let lo = (d - r).max(0.0);
    let hi = d + r;
    let width = max_width.min(r / 8.0).max(1e-3);
    let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
    let rule = GaussLegendre::new(20);
    let mut nodes = Vec::with_capacity(panels * 20);
    let mut weights = Vec::with_capacity(panels * 20);
    for p in 0..panels {
        let a = lo + (hi - lo) * p as f64 / panels as f64;
        let b = lo + (hi - lo) * (p + 1) as f64 / panels as f64;
        for (s, w) in rule.on(a, b) {
            nodes.push(s);
            weights.push(w);
        }
    }
    (nodes, weights)
}

fn check_upper(z: C64) -> Result<()> {
    if z.im < 0.0 || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "resolvent needs Im z ≥ 0 (z² with the +i0 prescription), got z = {z}"
        )));
    }
    Ok(())
}

/// `(R0(z²)u)(x) = ∫_0^∞ e^{izs} s M_u^x(s) ds` at each point.
pub fn free_resolvent_apply(u: &ScalarField, z: C64, points: &[Vec3]) -> Result<Vec<C64>> {
    check_upper(z)?;
    let width = 0.2f64.min(1.0 / z.norm().max(1e-12));
    Ok(points
        .par_iter()
        .map(|&x| {
            let (nodes, weights) = radial_rule(u, x, width);
            nodes
                .iter()
                .zip(&weights)
                .map(|(&s, &w)| (C64::i() * z * s).exp() * s * mean_at(u, x, s) * w)
                .sum()
        })
        .collect())
}

/// Values `(R0 u)(y_k)` and charges `q = Γ(z)^{-1} (R0 u)(y)`.
pub fn resolvent_charges(cfg: &Configuration, z: C64, u: &ScalarField) -> Result<(Vec<C64>, Vec<C64>)> {
    check_upper(z)?;
    let (inv, _) = gamma_build(cfg, z).inverse()?;
    let phi = free_resolvent_apply(u, z, &cfg.centres)?;
    let q = &inv * DVector::from_vec(phi.clone());
    Ok((phi, q.iter().copied().collect()))
}

/// `R0(z²)u` as a lazily evaluated field.
pub fn free_resolvent_field(u: &ScalarField, z: C64) -> Result<ScalarField> {
    check_upper(z)?;
    let (c, r) = u.support_ball();
    let decay = if z.im > 0.0 {
        DecayClass::Schwartz { radius: r + 40.0 / z.im }
    } else {
        DecayClass::PolynomialDecay { rate: 1.0, scale: r.max(1.0) }
    };
    let peak = u.peak() * r * r;
    let u = Arc::new(u.clone());
    Ok(ScalarField::function(
        move |x| free_resolvent_apply(&u, z, &[x]).map(|v| v[0]).unwrap_or(C64::new(f64::NAN, 0.0)),
        c,
        decay,
        peak,
    ))
}

/// `R(z²)u = R0(z²)u + Σ_jk Γ(z)^{-1}_jk G_z^{y_j} (R0(z²)u)(y_k)`.
pub fn resolvent_apply(cfg: &Configuration, z: C64, u: &ScalarField) -> Result<CentredField> {
    let (_, q) = resolvent_charges(cfg, z, u)?;
    let mut out = CentredField::from_free(&cfg.centres, free_resolvent_field(u, z)?);
    for (j, qj) in q.into_iter().enumerate() {
        out.push(j, AnchoredProfile::Green { z, coeff: qj })?;
    }
    Ok(out)
}

/// `ψ = φ + Σ_j q_j G_z^{y_j}` with `φ(y) = Γ(z) q`.
#[derive(Clone, Debug)]
pub struct DomainElement {
    pub z: C64,
    pub phi: ScalarField,
    pub charges: Vec<C64>,
}

impl DomainElement {
    pub fn field(&self, cfg: &Configuration) -> CentredField {
        let mut out = CentredField::from_free(&cfg.centres, self.phi.clone());
        for (j, q) in self.charges.iter().enumerate() {
            out.push(j, AnchoredProfile::Green { z: self.z, coeff: *q }).expect("valid centre index");
        }
        out
    }

    /// `max_j |φ(y_j) − (Γ(z) q)_j|`.
    pub fn linkage_residual(&self, cfg: &Configuration) -> f64 {
        let g = gamma_build(cfg, self.z).entries;
        let gq = &g * DVector::from_vec(self.charges.clone());
        cfg.centres
            .iter()
            .enumerate()
            .map(|(j, &y)| (self.phi.eval(y) - gq[j]).norm())
            .fold(0.0, f64::max)
    }
}

pub fn domain_element_build(cfg: &Configuration, z: C64, phi: &ScalarField) -> Result<DomainElement> {
    check_upper(z)?;
    let (inv, _) = gamma_build(cfg, z).inverse()?;
    let vals: Vec<C64> = cfg.centres.iter().map(|&y| phi.eval(y)).collect();
    if vals.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::InvalidArgument("phi is not finite at a centre".into()));
    }
    let q = &inv * DVector::from_vec(vals);
    Ok(DomainElement { z, phi: phi.clone(), charges: q.iter().copied().collect() })
}

/// Fit of the spherical average of `ψ` about `y_j` to `q/(4πr) + b` on a geometric window;
/// returns `|b − α_j q| / max(|q|, 1e-8)`.
pub fn bethe_peierls_residual(psi: &CentredField, cfg: &Configuration, j: usize, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    if j >= cfg.n() {
        return Err(Error::InvalidArgument(format!("centre index {j} out of range")));
    }
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("window must satisfy 0 < r_lo < r_hi, got ({lo}, {hi})")));
    }
    let y = cfg.centres[j];
    if let Some(k) = (0..cfg.n()).find(|&k| k != j && cfg.distance(j, k) <= hi) {
        return Err(Error::InvalidArgument(format!("window around centre {j} contains centre {k}")));
    }
    let rule = sphere_rule(8);
    let m = 12;
    let (xs, ys): (Vec<f64>, Vec<C64>) = (0..m)
        .map(|i| {
            let r = lo * (hi / lo).powf(i as f64 / (m - 1) as f64);
            let avg: C64 = rule
                .iter()
                .map(|(w, wt)| psi.eval([y[0] + r * w[0], y[1] + r * w[1], y[2] + r * w[2]]) * *wt)
                .sum::<C64>()
                / (4.0 * PI);
            (1.0 / r, avg)
        })
        .unzip();
    let xm = xs.iter().sum::<f64>() / m as f64;
    let ym = ys.iter().sum::<C64>() / m as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: C64 = xs.iter().zip(&ys).map(|(x, v)| (v - ym) * (x - xm)).sum();
    let slope = sxy / sxx;
    let b = ym - slope * xm;
    let q = slope * 4.0 * PI;
    Ok((b - q * cfg.alphas[j]).norm() / q.norm().max(1e-8))
}

#[derive(Clone, Debug)]
pub struct AbelOptions {
    /// Decreasing regularization parameters.
    pub eps_schedule: Vec<f64>,
    /// Accepted relative gap between the two highest-order extrapolants.
    pub rel_tol: f64,
    /// Truncation of the spectral integral on both sides.
    pub lambda_max: f64,
}

impl Default for AbelOptions {
    fn default() -> Self {
        AbelOptions {
            eps_schedule: vec![0.04, 0.02, 0.01, 0.005, 0.0025, 0.00125],
            rel_tol: 1e-4,
            lambda_max: 1e4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AbelEstimate {
    pub value: C64,
    /// `(ε, pairing at ε)`.
    pub sequence: Vec<(f64, C64)>,
    /// Gap between the two highest-order extrapolants.
    pub error: f64,
}

/// Weighted samples `w_n r_n M(r_n)` for `∫_0^∞ e^{iwr} r M(r) dr`.
struct HalfLineTransform {
    nodes: Vec<f64>,
    weights: Vec<C64>,
}

impl HalfLineTransform {
    fn new(u: &ScalarField, y: Vec3, conj: bool) -> Self {
        let (nodes, w) = radial_rule(u, y, 0.05);
        let weights = nodes
            .iter()
            .zip(&w)
            .map(|(&r, &wt)| {
                let m = mean_at(u, y, r);
                (if conj { m.conj() } else { m }) * r * wt
            })
            .collect();
        HalfLineTransform { nodes, weights }
    }

    fn eval(&self, w: C64) -> C64 {
        self.nodes.iter().zip(&self.weights).map(|(&r, c)| (C64::i() * w * r).exp() * c).sum()
    }
}

/// `(ε/π) ∫ ⟨R0(λ+iε)u, R(λ+iε)v⟩ dλ − ⟨u, v⟩` at one `ε`.
fn abel_correction(cfg: &Configuration, a: &[HalfLineTransform], b: &[HalfLineTransform], eps: f64, lmax: f64) -> Result<C64> {
    let n = cfg.n();
    let mut failure: Option<Error> = None;
    let integrand = |lambda: f64| -> C64 {
        let w = C64::new(lambda, eps).sqrt();
        let wm = -w.conj();
        let inv = match gamma_build(cfg, w).inverse() {
            Ok((inv, _)) => inv,
            Err(e) => {
                failure.get_or_insert(e);
                return C64::new(0.0, 0.0);
            }
        };
        let da: Vec<C64> = a.iter().map(|t| t.eval(w) - t.eval(wm)).collect();
        let bb: Vec<C64> = b.iter().map(|t| t.eval(w)).collect();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..n {
            for k in 0..n {
                acc += inv[(j, k)] * da[j] * bb[k];
            }
        }
        acc
    };
    let mut breaks = vec![-lmax, -1e3, -100.0, -10.0, -1.0, -0.1, -0.01, 0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1e3, lmax];
    for s in [eps, 10.0 * eps] {
        breaks.push(s);
        breaks.push(-s);
    }
    breaks.retain(|x| x.abs() <= lmax);
    breaks.sort_by(|x, y| x.total_cmp(y));
    breaks.dedup();
    let (val, _) = adaptive(integrand, &breaks, 1e-12, 1e-10, 200_000)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(val / (C64::new(0.0, 2.0 * PI)))
}

/// Basis of the small-`ε` expansion: `1, √ε, ε log ε, ε, ε^{3/2}, ε² log ε, ε², ...`.
fn expansion_basis(eps: f64, k: usize) -> f64 {
    let s = eps.sqrt();
    match k {
        0 => 1.0,
        1 => s,
        2 => eps * eps.ln(),
        3 => eps,
        4 => eps * s,
        5 => eps * eps * eps.ln(),
        6 => eps * eps,
        _ => s.powi(k as i32 - 2),
    }
}

/// Value at `ε = 0` of the interpolant in the first `n` basis functions.
fn extrapolate(eps: &[f64], vals: &[C64]) -> C64 {
    let n = eps.len();
    let a = DMatrix::from_fn(n, n, |i, k| C64::new(expansion_basis(eps[i], k), 0.0));
    let b = DVector::from_column_slice(vals);
    match a.lu().solve(&b) {
        Some(c) => c[0],
        None => C64::new(f64::NAN, f64::NAN),
    }
}

/// `⟨W⁺u, v⟩` as the Abel limit `lim_{ε↓0} (ε/π) ∫ ⟨R0(λ+iε)u, R(λ+iε)v⟩ dλ`, extrapolated
/// to `ε = 0` over the schedule.
pub fn abel_pairing_oracle(cfg: &Configuration, u: &ScalarField, v: &ScalarField, opts: &AbelOptions) -> Result<AbelEstimate> {
    let eps = &opts.eps_schedule;
    if eps.len() < 2 || eps.iter().any(|e| !(*e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("eps schedule must be decreasing, positive, of length ≥ 2".into()));
    }
    let a: Vec<HalfLineTransform> = cfg.centres.iter().map(|&y| HalfLineTransform::new(u, y, true)).collect();
    let b: Vec<HalfLineTransform> = cfg.centres.iter().map(|&y| HalfLineTransform::new(v, y, false)).collect();
    let free = inner_free(u, v)?;
    let sequence: Vec<(f64, C64)> = eps
        .par_iter()
        .map(|&e| abel_correction(cfg, &a, &b, e, opts.lambda_max).map(|c| (e, free + c)))
        .collect::<Result<_>>()?;
    let vals: Vec<C64> = sequence.iter().map(|(_, v)| *v).collect();
    let value = extrapolate(eps, &vals);
    let lower = extrapolate(&eps[1..], &vals[1..]);
    let error = (value - lower).norm();
    if !(error <= opts.rel_tol * value.norm()) {
        return Err(Error::Extrapolation { estimate: value, sequence: vals });
    }
    Ok(AbelEstimate { value, sequence, error })
}
