//! Spherical means, half-line Fourier transforms and the Hilbert transform.

use crate::config::{dist, RadialGrid, Vec3};
use crate::cubature::sphere_rule;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::profile::{LineProfile, Parity, RadialProfile};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

type C64 = Complex64;

pub const DEFAULT_ANGULAR_ORDER: usize = 24;
const MEAN_CHANGE_TOL: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 3;
/// Fraction of the grid covered by the cosine taper.
pub const TAPER_FRACTION: f64 = 0.1;

/// Spherical mean by a product Gauss-Legendre times uniform rule, doubled until stable.
pub fn spherical_mean(
    u: &ScalarField,
    centre: Vec3,
    grid: RadialGrid,
    angular_order: usize,
) -> Result<RadialProfile> {
    if angular_order < 6 {
        return Err(Error::InvalidArgument(format!(
            "angular order must be at least 6, got {angular_order}"
        )));
    }
    let rules: Vec<Vec<(Vec3, f64)>> =
        (0..=MAX_DOUBLINGS).map(|k| sphere_rule(angular_order << k)).collect();
    let (c, radius) = u.support_ball();
    let d = dist(centre, c);
    let tol = MEAN_CHANGE_TOL * u.peak().max(1e-300);
    let mean = |r: f64, rule: &[(Vec3, f64)]| -> C64 {
        let s: C64 = rule
            .iter()
            .map(|&(w, wt)| {
                u.eval([centre[0] + r * w[0], centre[1] + r * w[1], centre[2] + r * w[2]]) * wt
            })
            .sum();
        s / (4.0 * PI)
    };
    let values: Vec<C64> = grid
        .nodes()
        .par_iter()
        .map(|&r| {
            if r > d + radius || r < d - radius {
                return C64::new(0.0, 0.0);
            }
            let mut prev = mean(r, &rules[0]);
            for rule in &rules[1..] {
                let next = mean(r, rule);
                if (next - prev).norm() < tol {
                    return next;
                }
                prev = next;
            }
            prev
        })
        .collect();
    RadialProfile::new(grid, values, Parity::Even)
}

/// Cosine taper weight for node `i` of `n`.
pub fn taper(i: usize, n: usize) -> f64 {
    let start = ((1.0 - TAPER_FRACTION) * n as f64).floor() as usize;
    if i < start {
        1.0
    } else {
        let t = (i - start) as f64 / (n - start) as f64;
        0.5 * (1.0 + (PI * t).cos())
    }
}

fn tapered(values: &[C64]) -> Vec<C64> {
    let n = values.len();
    values.iter().enumerate().map(|(i, v)| v * taper(i, n)).collect()
}

/// Error if the profile carries more than `tol` of its absolute mass in the taper zone.
pub fn check_tail(values: &[C64], tol: f64) -> Result<()> {
    let n = values.len();
    let start = ((1.0 - TAPER_FRACTION) * n as f64).floor() as usize;
    let total: f64 = values.iter().map(|v| v.norm()).sum();
    let tail: f64 = values[start..].iter().map(|v| v.norm()).sum();
    if total > 0.0 && tail > tol * total {
        return Err(Error::Resolution(format!(
            "visible tail truncation: {:.3e} of the profile mass lies in the outer {}% of the grid",
            tail / total,
            (TAPER_FRACTION * 100.0) as usize
        )));
    }
    Ok(())
}

/// `G(λ) = ∫_R e^{iλr} g(r) dr` with `g` extended by its parity.
///
/// The staggered midpoint sum is the trigonometric interpolant of the FFT of the
/// tapered samples, so it is evaluated exactly at every requested λ.
pub fn halfline_fourier(g: &RadialProfile, lambdas: &[f64], tail_tol: f64) -> Result<Vec<C64>> {
    check_tail(&g.values, tail_tol)?;
    let v = tapered(&g.values);
    let h = g.grid.h();
    let nodes = g.grid.nodes();
    Ok(lambdas
        .par_iter()
        .map(|&lam| {
            let mut acc = C64::new(0.0, 0.0);
            for (r, gv) in nodes.iter().zip(&v) {
                let (s, c) = (lam * r).sin_cos();
                acc += match g.parity {
                    Parity::Even => gv * (2.0 * c),
                    Parity::Odd => gv * C64::new(0.0, 2.0 * s),
                };
            }
            acc * h
        })
        .collect())
}

/// Uniform-frequency version of [`halfline_fourier`] computed by one FFT.
/// Returns `(λ_k, G(λ_k))` ordered by increasing λ.
pub fn halfline_fourier_fft(g: &RadialProfile, pad: usize, tail_tol: f64) -> Result<(Vec<f64>, Vec<C64>)> {
    check_tail(&g.values, tail_tol)?;
    let mut line = g.to_line();
    let n = g.grid.n;
    for i in 0..n {
        let t = taper(i, n);
        line.values[n + i] *= t;
        line.values[n - 1 - i] *= t;
    }
    let fft = SymmetricFft::new(g.grid, pad);
    let spec = fft.forward(&line);
    let m = fft.m;
    let mut out: Vec<(f64, C64)> = (0..m)
        .map(|k| {
            // G(λ) = conj-frequency of the e^{-iξx} transform: λ = -ξ
            (-fft.xi(k), spec[k])
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out.into_iter().unzip())
}

/// Hilbert transform `(1/π) p.v.∫ g(τ)/(ρ-τ) dτ` of the parity extension of `g`.
pub fn hilbert_transform(g: &RadialProfile, tail_tol: f64) -> Result<RadialProfile> {
    check_tail(&g.values, tail_tol)?;
    let mut line = g.to_line();
    let n = g.grid.n;
    for i in 0..n {
        let t = taper(i, n);
        line.values[n + i] *= t;
        line.values[n - 1 - i] *= t;
    }
    let pad = hilbert_padding(g.grid);
    let out = hilbert_line(&line, pad);
    let values = (0..n).map(|i| out.pos(i)).collect();
    RadialProfile::new(g.grid, values, g.parity.flip())
}

/// Padding factor giving a periodic box of at least 32 `r_max`.
pub fn hilbert_padding(grid: RadialGrid) -> usize {
    let _ = grid;
    16
}

/// Hilbert transform of a function given on the symmetric line (no taper).
pub fn hilbert_line(line: &LineProfile, pad: usize) -> LineProfile {
    let fft = SymmetricFft::new(line.grid, pad);
    let m = fft.m;
    let mut buf = fft.embed(line);
    // sgn vanishes at 0 and at the self-conjugate Nyquist bin
    fft.apply_box(&mut buf, &|k, xi| {
        if k == 0 || 2 * k == m {
            C64::new(0.0, 0.0)
        } else if xi > 0.0 {
            C64::new(0.0, -1.0)
        } else {
            C64::new(0.0, 1.0)
        }
    });
    fft.extract(&buf)
}

/// FFT on the zero-padded symmetric staggered line.
///
/// The line of `2n` samples at `±(i + 1/2) h` sits in the middle of a periodic box
/// of `m = 2 n pad` points. Frequencies follow the FFT ordering; the Nyquist bin is
/// assigned the negative frequency `-π/h`.
pub struct SymmetricFft {
    pub grid: RadialGrid,
    pub m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl SymmetricFft {
    pub fn new(grid: RadialGrid, pad: usize) -> Self {
        let m = 2 * grid.n * pad.max(1);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        SymmetricFft { grid, m, fwd, inv }
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    pub fn box_length(&self) -> f64 {
        self.m as f64 * self.h()
    }

    pub fn xi(&self, k: usize) -> f64 {
        let kk = if k < self.m / 2 { k as f64 } else { k as f64 - self.m as f64 };
        2.0 * PI * kk / self.box_length()
    }

    /// Position of box index `q`.
    pub fn x(&self, q: usize) -> f64 {
        (q as f64 + 0.5 - self.m as f64 / 2.0) * self.h()
    }

    pub fn embed(&self, line: &LineProfile) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.m];
        let off = self.m / 2 - self.grid.n;
        buf[off..off + 2 * self.grid.n].copy_from_slice(&line.values);
        buf
    }

    pub fn extract(&self, buf: &[C64]) -> LineProfile {
        let off = self.m / 2 - self.grid.n;
        LineProfile { grid: self.grid, values: buf[off..off + 2 * self.grid.n].to_vec() }
    }

    /// Continuous transform `∫ e^{-iξx} g(x) dx` at the FFT frequencies.
    pub fn forward(&self, line: &LineProfile) -> Vec<C64> {
        let mut buf = self.embed(line);
        self.fwd.process(&mut buf);
        let x0 = self.x(0);
        let h = self.h();
        for (k, b) in buf.iter_mut().enumerate() {
            *b *= C64::from_polar(h, -self.xi(k) * x0);
        }
        buf
    }

    /// Unnormalized forward DFT of a box buffer.
    pub fn forward_box(&self, buf: &mut [C64]) {
        self.fwd.process(buf);
    }

    /// Normalized inverse DFT of a box buffer.
    pub fn inverse_box(&self, buf: &mut [C64]) {
        self.inv.process(buf);
        let scale = 1.0 / self.m as f64;
        for b in buf.iter_mut() {
            *b *= scale;
        }
    }

    /// In-place multiplier application on a full box buffer.
    pub fn apply_box(&self, buf: &mut [C64], mult: &dyn Fn(usize, f64) -> C64) {
        self.fwd.process(buf);
        let scale = 1.0 / self.m as f64;
        for (k, b) in buf.iter_mut().enumerate() {
            *b *= mult(k, self.xi(k)) * scale;
        }
        self.inv.process(buf);
    }

    pub fn apply(&self, line: &LineProfile, mult: impl Fn(f64) -> C64) -> LineProfile {
        let mut buf = self.embed(line);
        self.apply_box(&mut buf, &|_, xi| mult(xi));
        self.extract(&buf)
    }
}
