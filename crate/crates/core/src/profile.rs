//! Sampled radial profiles on staggered grids.

use crate::config::RadialGrid;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::io::Write;

type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }

    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }
}

/// Values on a staggered grid with a parity rule for `r < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialProfile {
    pub grid: RadialGrid,
    pub values: Vec<C64>,
    pub parity: Parity,
}

impl RadialProfile {
    pub fn new(grid: RadialGrid, values: Vec<C64>, parity: Parity) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::InvalidArgument(format!(
                "profile has {} values for a grid of {} nodes",
                values.len(),
                grid.n
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidArgument("profile contains non-finite values".into()));
        }
        Ok(RadialProfile { grid, values, parity })
    }

    pub fn from_fn(grid: RadialGrid, parity: Parity, f: impl Fn(f64) -> C64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        RadialProfile { grid, values, parity }
    }

    pub fn zeros(grid: RadialGrid, parity: Parity) -> Self {
        RadialProfile { grid, values: vec![C64::new(0.0, 0.0); grid.n], parity }
    }

    /// Extension to the symmetric line.
    pub fn to_line(&self) -> LineProfile {
        let n = self.grid.n;
        let s = self.parity.sign();
        let mut v = vec![C64::new(0.0, 0.0); 2 * n];
        for i in 0..n {
            v[n + i] = self.values[i];
            v[n - 1 - i] = self.values[i] * s;
        }
        LineProfile { grid: self.grid, values: v }
    }

    /// Interpolated value at any real `r` using the parity extension.
    pub fn eval(&self, r: f64) -> C64 {
        let n = self.grid.n;
        let s = self.parity.sign();
        lagrange_eval(self.grid.h(), n, r, |idx| {
            if idx >= n {
                self.values[idx - n]
            } else {
                self.values[n - 1 - idx] * s
            }
        })
    }

    pub fn scaled(&self, c: C64) -> Self {
        RadialProfile {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
            parity: self.parity,
        }
    }

    pub fn conj(&self) -> Self {
        RadialProfile {
            grid: self.grid,
            values: self.values.iter().map(|v| v.conj()).collect(),
            parity: self.parity,
        }
    }

    pub fn max_abs_diff(&self, other: &RadialProfile) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Two-column CSV `r,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,re,im")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", self.grid.node(i), v.re, v.im)?;
        }
        Ok(())
    }
}

/// Values on the symmetric staggered line `±r_i`.
///
/// Index `n + i` holds the value at `+r_i`, index `n - 1 - i` the value at `-r_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct LineProfile {
    pub grid: RadialGrid,
    pub values: Vec<C64>,
}

impl LineProfile {
    pub fn zeros(grid: RadialGrid) -> Self {
        LineProfile { grid, values: vec![C64::new(0.0, 0.0); 2 * grid.n] }
    }

    pub fn from_fn(grid: RadialGrid, f: impl Fn(f64) -> C64) -> Self {
        let n = grid.n;
        let mut values = vec![C64::new(0.0, 0.0); 2 * n];
        for i in 0..n {
            let r = grid.node(i);
            values[n + i] = f(r);
            values[n - 1 - i] = f(-r);
        }
        LineProfile { grid, values }
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn pos(&self, i: usize) -> C64 {
        self.values[self.grid.n + i]
    }

    pub fn neg(&self, i: usize) -> C64 {
        self.values[self.grid.n - 1 - i]
    }

    pub fn eval(&self, x: f64) -> C64 {
        let n = self.grid.n;
        lagrange_eval(self.grid.h(), n, x, |idx| self.values[idx])
    }

    pub fn even_part(&self) -> RadialProfile {
        let v = (0..self.n()).map(|i| 0.5 * (self.pos(i) + self.neg(i))).collect();
        RadialProfile { grid: self.grid, values: v, parity: Parity::Even }
    }

    pub fn odd_part(&self) -> RadialProfile {
        let v = (0..self.n()).map(|i| 0.5 * (self.pos(i) - self.neg(i))).collect();
        RadialProfile { grid: self.grid, values: v, parity: Parity::Odd }
    }

    /// Odd extension of the values on the positive half.
    pub fn odd_extension_of_positive(&self) -> LineProfile {
        let n = self.n();
        let mut out = self.clone();
        for i in 0..n {
            out.values[n - 1 - i] = -self.values[n + i];
        }
        out
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        LineProfile { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, o: &LineProfile, f: impl Fn(C64, C64) -> C64) -> Self {
        LineProfile {
            grid: self.grid,
            values: self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// `∫_0^∞ f` from the positive nodes: midpoint rule plus Euler-Maclaurin endpoint
    /// corrections with one-sided derivative estimates.
    pub fn half_line_integral(&self) -> C64 {
        let n = self.n();
        let h = self.grid.h();
        let mut s = C64::new(0.0, 0.0);
        for i in 0..n {
            s += self.pos(i);
        }
        let w = endpoint_weights(h);
        let mut corr = C64::new(0.0, 0.0);
        for (i, wi) in w.iter().enumerate().take(n) {
            corr += self.pos(i) * *wi;
        }
        s * h + corr
    }

    /// Antiderivative vanishing at 0, sampled at the cell edges `k h`, `-n <= k <= n`.
    pub fn antiderivative(&self) -> Antiderivative {
        let n = self.n();
        let h = self.grid.h();
        let w = cell_weights();
        let m = 2 * n;
        let cell = |c: usize| -> C64 {
            let mut acc = C64::new(0.0, 0.0);
            for (o, wo) in w.iter().enumerate() {
                let idx = (c as isize + o as isize - 2).clamp(0, m as isize - 1) as usize;
                acc += self.values[idx] * *wo;
            }
            acc * h
        };
        let mut edges = vec![C64::new(0.0, 0.0); m + 1];
        let first = first_cell_weights();
        for c in n..m {
            let k = c - n;
            let v = if k < 2 && n >= 5 {
                (0..5).map(|i| self.values[n + i] * first[k][i]).sum::<C64>() * h
            } else {
                cell(c)
            };
            edges[c + 1] = edges[c] + v;
        }
        for c in (0..n).rev() {
            edges[c] = edges[c + 1] - cell(c);
        }
        Antiderivative { h, n, edges }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,re,im")?;
        let n = self.n();
        for idx in 0..2 * n {
            let x = (idx as f64 - n as f64 + 0.5) * self.grid.h();
            let v = self.values[idx];
            writeln!(w, "{:.17e},{:.17e},{:.17e}", x, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Antiderivative on cell edges.
#[derive(Clone, Debug)]
pub struct Antiderivative {
    h: f64,
    n: usize,
    edges: Vec<C64>,
}

impl Antiderivative {
    /// `∫_0^s f` for `|s| <= r_max`; constant beyond.
    pub fn eval(&self, s: f64) -> C64 {
        let m = self.edges.len();
        let a = s / self.h + self.n as f64;
        if a <= 0.0 {
            return self.edges[0];
        }
        if a >= (m - 1) as f64 {
            return self.edges[m - 1];
        }
        let base = (a.floor() as isize - 2).clamp(0, m as isize - 6) as usize;
        let t = a - base as f64;
        let l = lagrange6(t);
        (0..6).map(|o| self.edges[base + o] * l[o]).sum()
    }
}

fn lagrange6(t: f64) -> [f64; 6] {
    let mut out = [1.0; 6];
    for (j, o) in out.iter_mut().enumerate() {
        for m in 0..6 {
            if m != j {
                *o *= (t - m as f64) / (j as f64 - m as f64);
            }
        }
    }
    out
}

/// Six-point Lagrange interpolation on the symmetric line of `2n` samples.
fn lagrange_eval(h: f64, n: usize, x: f64, get: impl Fn(usize) -> C64) -> C64 {
    let m = 2 * n;
    let a = x / h - 0.5 + n as f64;
    if a < -0.5 || a > m as f64 - 0.5 {
        return C64::new(0.0, 0.0);
    }
    let base = (a.floor() as isize - 2).clamp(0, m as isize - 6) as usize;
    let t = a - base as f64;
    let l = lagrange6(t);
    (0..6).map(|o| get(base + o) * l[o]).sum()
}

/// Weights of the five-point stencil integrating over the centre cell `[-1/2, 1/2]`.
fn cell_weights() -> [f64; 5] {
    // ∫_{-1/2}^{1/2} of the Lagrange basis on nodes -2..2
    [
        -17.0 / 5760.0,
        308.0 / 5760.0,
        5178.0 / 5760.0,
        308.0 / 5760.0,
        -17.0 / 5760.0,
    ]}

/// Number of positive nodes entering the endpoint corrections.
pub(crate) const ENDPOINT_NODES: usize = 6;

/// Weights `c_i` with `∫_0^∞ f ≈ h Σ f(ρ_i) + Σ_{i<6} c_i f(ρ_i)`.
///
/// The Euler-Maclaurin terms `−h²f′(0)/24 + 7h⁴f‴(0)/5760 − 31h⁶f⁽⁵⁾(0)/967680` use
/// derivatives of the quintic through the first six nodes.
pub(crate) fn endpoint_weights(h: f64) -> [f64; ENDPOINT_NODES] {
    let k = ENDPOINT_NODES;
    let v = DMatrix::from_fn(k, k, |i, m| (i as f64 + 0.5).powi(m as i32));
    let inv = v.try_inverse().expect("Vandermonde system is regular");
    // derivative at 0 of order m is m! b_m with b = V^{-1} f, in units of h^{-m}
    let terms = [(1usize, -1.0 / 24.0), (3, 7.0 / 5760.0 * 6.0), (5, -31.0 / 967680.0 * 120.0)];
    let mut w = [0.0; ENDPOINT_NODES];
    for (m, c) in terms {
        for (i, wi) in w.iter_mut().enumerate() {
            *wi += c * inv[(m, i)] * h;
        }
    }
    w
}

/// Rows `m` give `b_m = Σ_{i<6} w_mi f(ρ_i)`, the coefficients of the quintic
/// `Σ b_m (ρ/h)^m` through the first six positive nodes.
pub(crate) fn endpoint_taylor_weights() -> [[f64; ENDPOINT_NODES]; ENDPOINT_NODES] {
    let k = ENDPOINT_NODES;
    let v = DMatrix::from_fn(k, k, |i, m| (i as f64 + 0.5).powi(m as i32));
    let inv = v.try_inverse().expect("Vandermonde system is regular");
    std::array::from_fn(|m| std::array::from_fn(|i| inv[(m, i)]))
}

/// Integrals over the cells `[0, h]` and `[h, 2h]` of the quartic through the first five
/// positive nodes, in units of `h`.
fn first_cell_weights() -> [[f64; 5]; 2] {
    let v = DMatrix::from_fn(5, 5, |m, i| (i as f64 + 0.5).powi(m as i32));
    let inv = v.try_inverse().expect("Vandermonde system is regular");
    let mut out = [[0.0; 5]; 2];
    for (cell, row) in out.iter_mut().enumerate() {
        let (a, b) = (cell as f64, cell as f64 + 1.0);
        let moments = DVector::from_fn(5, |m, _| (b.powi(m as i32 + 1) - a.powi(m as i32 + 1)) / (m as f64 + 1.0));
        let w = &inv * moments;
        for i in 0..5 {
            row[i] = w[i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn cell_weights_sum_to_one_and_integrate_quartics() {
        let w = cell_weights();
        for p in 0..5 {
            let v: f64 = (0..5).map(|o| w[o] * ((o as f64 - 2.0).powi(p))).sum();
            let exact = if p % 2 == 1 { 0.0 } else { 2.0 * 0.5f64.powi(p + 1) / (p + 1) as f64 };
            assert!((v - exact).abs() < 1e-14, "degree {p}");
        }
    }

    #[test]
    fn half_line_integral_of_exponential() {
        let g = RadialGrid::new(60.0, 600).unwrap();
        let f = LineProfile::from_fn(g, |x| c((-x).exp()));
        let v = f.half_line_integral();
        assert!((v.re - 1.0).abs() < 1e-8, "{:e}", v.re - 1.0);
    }

    #[test]
    fn half_line_integral_of_gaussian_is_high_order() {
        let exact = std::f64::consts::PI.sqrt() / 2.0;
        let err = |n: usize| {
            let g = RadialGrid::new(10.0, n).unwrap();
            (LineProfile::from_fn(g, |x| c((-x * x).exp())).half_line_integral().re - exact).abs()
        };
        let (coarse, fine) = (err(100), err(400));
        assert!(coarse < 1e-6 && fine < 1e-10, "{coarse:e} {fine:e}");
    }

    #[test]
    fn interpolation_of_smooth_line_function() {
        let g = RadialGrid::new(10.0, 500).unwrap();
        let f = LineProfile::from_fn(g, |x| c((x * 0.7).sin() + x * x * 0.1));
        for &x in &[-3.21, 0.0, 0.013, 1.5, 7.77] {
            let e = f.eval(x) - c((x * 0.7).sin() + x * x * 0.1);
            assert!(e.norm() < 1e-10, "{x}: {e}");
        }
    }

    #[test]
    fn parity_extension_and_split() {
        let g = RadialGrid::new(5.0, 50).unwrap();
        let p = RadialProfile::from_fn(g, Parity::Odd, |r| c(r * (-r * r).exp()));
        let l = p.to_line();
        assert!((l.neg(3) + l.pos(3)).norm() == 0.0);
        assert!(l.even_part().values.iter().all(|v| v.norm() == 0.0));
        assert!((p.eval(-0.3) - c(-0.3 * (-0.09f64).exp())).norm() < 1e-6);
    }

    #[test]
    fn antiderivative_matches_closed_form() {
        let g = RadialGrid::new(10.0, 400).unwrap();
        let f = LineProfile::from_fn(g, |x| c((-x * x).exp() * (1.0 + x)));
        let a = f.antiderivative();
        for &s in &[0.0, 0.37, 1.0, 2.5, -1.2] {
            let exact = 0.5 * std::f64::consts::PI.sqrt() * erf(s) + 0.5 * (1.0 - (-s * s).exp());
            assert!((a.eval(s).re - exact).abs() < 1e-9, "s = {s}");
        }
    }

    fn erf(x: f64) -> f64 {
        // series, adequate for |x| < 3
        let mut term = x;
        let mut sum = x;
        for k in 1..80 {
            term *= -x * x / k as f64;
            sum += term / (2 * k + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }
}
