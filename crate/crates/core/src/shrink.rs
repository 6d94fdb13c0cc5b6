//! Shrinking potentials `ε^{-2} V(x/ε)` in the s-wave sector: the zero-energy
//! resonance function, the radial Lippmann–Schwinger inverse, the rank-one limit
//! and the scaled wave-operator pairing.
//!
//! For radial data the free resolvent `G₀(μ)` (kernel `e^{iμ|x−y|}/(4π|x−y|)`) acts on
//! `g(r)` as
//!
//! `(G₀(μ)g)(r) = r^{-1} ∫_0^∞ S_μ(r_<) e^{iμ r_>} s g(s) ds`, `S_μ(r) = sin(μr)/μ`.
//!
//! With `w = rψ` the equation `(1 + G₀(μ)V)ψ = f` becomes
//!
//! `w(r) = r f(r) − S_μ(r) B + ∫_0^r S_μ(r − s) V(s) w(s) ds`, `B = ∫_0^∞ e^{iμs} V w`,
//!
//! a Volterra equation once `B` is fixed. Both the `B = 0` solution and the response to
//! `B` are integrated outward, and `B` is then solved for.

use crate::config::RadialGrid;
use crate::error::{Error, Result};
use crate::profile::{Parity, RadialProfile};
use crate::quad::{adaptive, GaussLegendre};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

type C64 = Complex64;

/// Largest `|u'(edge)| / max|u|` accepted as a zero-energy resonance.
pub const RESONANCE_TOL: f64 = 1e-6;
/// Radial steps per unit length of the outward integrations.
pub const STEPS_PER_UNIT: usize = 2000;
/// Default weight exponent of the rank-one check.
pub const DEFAULT_BETA: f64 = 2.0;

/// A real radial potential.
#[derive(Clone, Debug)]
pub enum RadialPotential {
    /// `depth` on `r ≤ radius`, zero outside.
    SquareWell { depth: f64, radius: f64 },
    /// Sampled profile, zero beyond the grid; `decay` is the exponent `δ` in `|V| ≤ C⟨x⟩^{−δ}`.
    Sampled { profile: RadialProfile, decay: f64 },
}

impl RadialPotential {
    pub fn square_well(depth: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite() && depth.is_finite()) {
            return Err(Error::InvalidArgument(format!("square well needs radius > 0, got {radius}")));
        }
        Ok(RadialPotential::SquareWell { depth, radius })
    }

    /// The well of the given radius with a zero-energy resonance: depth `−(π/(2a))²`.
    pub fn tuned_square_well(radius: f64) -> Result<Self> {
        Self::square_well(-(PI / (2.0 * radius)).powi(2), radius)
    }

    pub fn sampled(profile: RadialProfile, decay: f64) -> Result<Self> {
        if profile.values.iter().any(|v| v.im != 0.0 || !v.re.is_finite()) {
            return Err(Error::InvalidArgument("potential must be real and finite".into()));
        }
        Ok(RadialPotential::Sampled { profile, decay })
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialPotential::SquareWell { depth, radius } => {
                if r <= *radius {
                    *depth
                } else {
                    0.0
                }
            }
            RadialPotential::Sampled { profile, .. } => {
                if r > profile.grid.r_max {
                    0.0
                } else {
                    profile.eval(r).re
                }
            }
        }
    }

    /// Radius beyond which the potential vanishes.
    pub fn support(&self) -> f64 {
        match self {
            RadialPotential::SquareWell { depth, radius } => {
                if *depth == 0.0 {
                    0.0
                } else {
                    *radius
                }
            }
            RadialPotential::Sampled { profile, .. } => {
                let peak = profile.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
                match profile.values.iter().rposition(|v| v.norm() > 1e-15 * peak) {
                    Some(i) if peak > 0.0 => profile.grid.node(i + 1).min(profile.grid.r_max),
                    _ => 0.0,
                }
            }
        }
    }

    pub fn decay(&self) -> f64 {
        match self {
            RadialPotential::SquareWell { .. } => f64::INFINITY,
            RadialPotential::Sampled { decay, .. } => *decay,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.support() == 0.0
    }

    /// `s V`.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            RadialPotential::SquareWell { depth, radius } => {
                RadialPotential::SquareWell { depth: depth * s, radius: *radius }
            }
            RadialPotential::Sampled { profile, decay } => {
                RadialPotential::Sampled { profile: profile.scaled(C64::new(s, 0.0)), decay: *decay }
            }
        }
    }

    /// Uniform outward nodes on `[0, support]`, an even number of steps.
    fn nodes(&self) -> Vec<f64> {
        let edge = self.support();
        let steps = (((edge * STEPS_PER_UNIT as f64).ceil() as usize).max(64) + 1) & !1;
        (0..=steps).map(|i| edge * i as f64 / steps as f64).collect()
    }
}

/// Composite Simpson weights for uniform nodes with an even number of steps.
fn simpson_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let h = (nodes[n - 1] - nodes[0]) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Cubic Hermite interpolation on uniform nodes.
fn hermite(nodes: &[f64], y: &[C64], dy: &[C64], r: f64) -> C64 {
    let n = nodes.len();
    let h = nodes[1] - nodes[0];
    let i = (((r - nodes[0]) / h).floor().max(0.0) as usize).min(n - 2);
    let t = (r - nodes[i]) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    y[i] * h00 + dy[i] * (h10 * h) + y[i + 1] * h01 + dy[i + 1] * (h11 * h)
}

/// Zero-energy resonance function `φ` with `∫V|φ|² = −1` and `a = ∫Vφ > 0`.
#[derive(Clone, Debug)]
pub struct ResonanceData {
    pub potential: RadialPotential,
    /// `φ = c u(r)/r`, `u` the zero-energy solution with `u(0) = 0`, `u'(0) = 1`.
    pub c: f64,
    pub a: f64,
    /// `u'(edge) / max|u|`.
    pub mismatch: f64,
    nodes: Vec<f64>,
    u: Vec<f64>,
    du: Vec<f64>,
}

impl ResonanceData {
    pub fn phi(&self, r: f64) -> f64 {
        let edge = *self.nodes.last().expect("nodes");
        if r >= edge {
            return self.c * self.u[self.u.len() - 1] / r;
        }
        if r == 0.0 {
            return self.c;
        }
        let n = self.nodes.len();
        let h = self.nodes[1] - self.nodes[0];
        let i = ((r / h).floor() as usize).min(n - 2);
        let t = (r - self.nodes[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let u = self.u[i] * (2.0 * t3 - 3.0 * t2 + 1.0)
            + self.du[i] * h * (t3 - 2.0 * t2 + t)
            + self.u[i + 1] * (-2.0 * t3 + 3.0 * t2)
            + self.du[i + 1] * h * (t3 - t2);
        self.c * u / r
    }

    pub fn profile(&self, grid: RadialGrid) -> RadialProfile {
        RadialProfile::from_fn(grid, Parity::Even, |r| C64::new(self.phi(r), 0.0))
    }

    /// `∫V|φ|² dx`, which the normalization sets to −1.
    pub fn normalization(&self) -> f64 {
        let w = simpson_weights(&self.nodes);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&w)
            .zip(&self.u)
            .map(|((&r, &w), &u)| w * self.potential.eval(r) * u * u)
            .sum();
        4.0 * PI * self.c * self.c * s
    }
}

/// Outward RK4 for `u'' = V u`, `u(0) = 0`, `u'(0) = 1`.
fn zero_energy_solution(v: &RadialPotential, nodes: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![0.0; nodes.len()];
    let mut du = vec![1.0; nodes.len()];
    for i in 0..nodes.len() - 1 {
        let (r, h) = (nodes[i], nodes[i + 1] - nodes[i]);
        let f = |r: f64, y: [f64; 2]| [y[1], v.eval(r) * y[0]];
        let y = [u[i], du[i]];
        let k1 = f(r, y);
        let k2 = f(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = f(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        u[i + 1] = y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        du[i + 1] = y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
    (u, du)
}

/// The resonance function of `v`, normalized by `∫V|φ|² = −1` and `∫Vφ > 0`.
pub fn resonance_function(v: &RadialPotential) -> Result<ResonanceData> {
    if v.is_zero() {
        return Err(Error::NoResonance { mismatch: f64::INFINITY });
    }
    let nodes = v.nodes();
    let (u, du) = zero_energy_solution(v, &nodes);
    let peak = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mismatch = du[du.len() - 1] / peak;
    if mismatch.abs() > RESONANCE_TOL {
        return Err(Error::NoResonance { mismatch });
    }
    let w = simpson_weights(&nodes);
    let (mut quad_norm, mut moment) = (0.0, 0.0);
    for i in 0..nodes.len() {
        let vr = v.eval(nodes[i]);
        quad_norm += w[i] * vr * u[i] * u[i];
        moment += w[i] * vr * u[i] * nodes[i];
    }
    if !(quad_norm < 0.0) {
        return Err(Error::Precondition("∫V u² must be negative for a resonance".into()));
    }
    let mut c = (1.0 / (4.0 * PI * -quad_norm)).sqrt();
    if moment < 0.0 {
        c = -c;
    }
    let a = 4.0 * PI * c * moment;
    Ok(ResonanceData { potential: v.clone(), c, a, mismatch, nodes, u, du })
}

/// `sin(μr)/μ`, with its series near `μr = 0`.
fn sin_over(mu: C64, r: f64) -> C64 {
    let x = mu * r;
    if x.norm() < 1e-4 {
        let x2 = x * x;
        return r * (1.0 - x2 / 6.0 + x2 * x2 / 120.0);
    }
    x.sin() / mu
}

/// Solution of the reduced Lippmann–Schwinger equation for one `μ`.
#[derive(Clone, Debug)]
pub struct LsSolution {
    pub mu: C64,
    /// `B = ∫ e^{iμs} V w ds`.
    pub b: C64,
    nodes: Vec<f64>,
    /// `X = ∫_0^r cos(μs) V w`, `Y = ∫_0^r S_μ(s) V w` and their derivatives.
    x: Vec<C64>,
    y: Vec<C64>,
    dx: Vec<C64>,
    dy: Vec<C64>,
}

impl LsSolution {
    /// `w(r) = rψ(r)` for the source with reduced form `rf`.
    pub fn reduced(&self, r: f64, rf: C64) -> C64 {
        let s = sin_over(self.mu, r);
        let c = (self.mu * r).cos();
        let (x, y) = if self.nodes.len() < 2 {
            (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
        } else if r >= *self.nodes.last().expect("nodes") {
            (self.x[self.x.len() - 1], self.y[self.y.len() - 1])
        } else {
            (hermite(&self.nodes, &self.x, &self.dx, r), hermite(&self.nodes, &self.y, &self.dy, r))
        };
        rf - s * self.b + s * x - c * y
    }

    /// `w` at the integration nodes, given `rf` there.
    fn reduced_at_nodes(&self, rf: &[C64]) -> Vec<C64> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                rf[i] - sin_over(self.mu, r) * self.b + sin_over(self.mu, r) * self.x[i] - (self.mu * r).cos() * self.y[i]
            })
            .collect()
    }
}

/// Solves `(1 + G₀(μ)V)ψ = f` for the source given by its reduced form `rf(r) = r f(r)`.
pub fn ls_solve(v: &RadialPotential, mu: C64, rf: &(dyn Fn(f64) -> C64 + Sync)) -> Result<LsSolution> {
    if mu.im < 0.0 {
        return Err(Error::InvalidArgument(format!("ls_solve needs Im μ ≥ 0, got {mu}")));
    }
    if v.is_zero() {
        return Ok(LsSolution {
            mu,
            b: C64::new(0.0, 0.0),
            nodes: vec![],
            x: vec![],
            y: vec![],
            dx: vec![],
            dy: vec![],
        });
    }
    let nodes = v.nodes();
    let n = nodes.len();
    // systems k = 0 (source rf) and k = 1 (source −S_μ, response to B)
    let g = |k: usize, r: f64| if k == 0 { rf(r) } else { -sin_over(mu, r) };
    let rhs = |k: usize, r: f64, st: [C64; 2]| -> [C64; 2] {
        let s = sin_over(mu, r);
        let c = (mu * r).cos();
        let w = g(k, r) + s * st[0] - c * st[1];
        let vw = w * v.eval(r);
        [c * vw, s * vw]
    };
    let mut states = [vec![[C64::new(0.0, 0.0); 2]; n], vec![[C64::new(0.0, 0.0); 2]; n]];
    for (k, st) in states.iter_mut().enumerate() {
        for i in 0..n - 1 {
            let (r, h) = (nodes[i], nodes[i + 1] - nodes[i]);
            let y = st[i];
            let add = |y: [C64; 2], d: [C64; 2], s: f64| [y[0] + d[0] * s, y[1] + d[1] * s];
            let k1 = rhs(k, r, y);
            let k2 = rhs(k, r + h / 2.0, add(y, k1, h / 2.0));
            let k3 = rhs(k, r + h / 2.0, add(y, k2, h / 2.0));
            let k4 = rhs(k, r + h, add(y, k3, h));
            st[i + 1] = [
                y[0] + (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) * (h / 6.0),
                y[1] + (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) * (h / 6.0),
            ];
        }
    }
    let end = |k: usize| {
        let s = states[k][n - 1];
        s[0] + C64::i() * mu * s[1]
    };
    let (b0, b1) = (end(0), end(1));
    let denom = 1.0 - b1;
    if denom.norm() < 1e-12 {
        return Err(Error::Singular { z: mu, det: denom.norm(), cond: f64::INFINITY });
    }
    let b = b0 / denom;
    let x: Vec<C64> = (0..n).map(|i| states[0][i][0] + b * states[1][i][0]).collect();
    let y: Vec<C64> = (0..n).map(|i| states[0][i][1] + b * states[1][i][1]).collect();
    let mut sol = LsSolution { mu, b, nodes, x, y, dx: vec![], dy: vec![] };
    let rfs: Vec<C64> = sol.nodes.iter().map(|&r| rf(r)).collect();
    let w = sol.reduced_at_nodes(&rfs);
    sol.dx = sol.nodes.iter().zip(&w).map(|(&r, &w)| (mu * r).cos() * v.eval(r) * w).collect();
    sol.dy = sol.nodes.iter().zip(&w).map(|(&r, &w)| sin_over(mu, r) * v.eval(r) * w).collect();
    Ok(sol)
}

/// `(1 + G₀(μ)V)^{-1} f` on the grid of `f`.
pub fn ls_resolvent_apply(v: &RadialPotential, mu: C64, f: &RadialProfile) -> Result<RadialProfile> {
    let rf = |r: f64| f.eval(r) * r;
    let sol = ls_solve(v, mu, &rf)?;
    Ok(RadialProfile::from_fn(f.grid, Parity::Even, |r| sol.reduced(r, rf(r)) / r))
}

/// `(G₀(μ)f)(r)` for radial `f` negligible beyond `extent`, by adaptive quadrature.
pub fn reduced_free_resolvent(mu: C64, f: &dyn Fn(f64) -> C64, extent: f64, r: f64) -> Result<C64> {
    let inner = adaptive(|s| sin_over(mu, s) * s * f(s), &[0.0, r.min(extent)], 1e-15, 1e-12, 4000)?.0;
    let outer = if r < extent {
        adaptive(|s| (C64::i() * mu * s).exp() * s * f(s), &[r, extent], 1e-15, 1e-12, 4000)?.0
    } else {
        C64::new(0.0, 0.0)
    };
    Ok(((C64::i() * mu * r).exp() * inner + sin_over(mu, r) * outer) / r)
}

#[derive(Clone, Copy, Debug)]
pub struct RankOneOptions {
    pub beta: f64,
    pub probes: usize,
    pub seed: u64,
    /// Probe bumps `exp(−(r − c)²/(2 width²))` with centres uniform in `[0, spread]`.
    pub width: f64,
    pub spread: f64,
}

impl Default for RankOneOptions {
    fn default() -> Self {
        RankOneOptions { beta: DEFAULT_BETA, probes: 8, seed: 7, width: 0.4, spread: 4.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RankOneRow {
    pub eps: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RankOneReport {
    pub lambda: f64,
    pub beta: f64,
    pub a: f64,
    pub rows: Vec<RankOneRow>,
    /// Residuals strictly decrease as `ε` decreases.
    pub monotone: bool,
}

impl RankOneReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "eps,residual")?;
        for r in &self.rows {
            writeln!(w, "{:.17e},{:.17e}", r.eps, r.residual)?;
        }
        Ok(())
    }

    pub fn require_monotone(&self) -> Result<()> {
        if self.monotone {
            Ok(())
        } else {
            Err(Error::NotDecreasing(self.rows.iter().map(|r| r.residual).collect()))
        }
    }
}

/// Radial quadrature on `[0, r_end]` refined on `[0, edge]`.
fn radial_rule(edge: f64, r_end: f64) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussLegendre::new(12);
    let mut breaks = vec![0.0];
    let inner = 64;
    for i in 1..=inner {
        breaks.push(edge * i as f64 / inner as f64);
    }
    let mut x = edge;
    while x < r_end {
        x = (x + (0.125 * x).clamp(0.05, 2.0)).min(r_end);
        breaks.push(x);
    }
    let mut nodes = vec![];
    let mut weights = vec![];
    for w in breaks.windows(2) {
        for (s, q) in rule.on(w[0], w[1]) {
            nodes.push(s);
            weights.push(q * 4.0 * PI * s * s);
        }
    }
    (nodes, weights)
}

/// Largest eigenvalue of `M` relative to the Gram matrix `G`, on the range of `G`.
fn restricted_norm(m: &DMatrix<C64>, g: &DMatrix<C64>) -> f64 {
    let eig = SymmetricEigen::new(g.clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..g.nrows()).filter(|&i| eig.eigenvalues[i] > 1e-10 * top).collect();
    let t = DMatrix::<C64>::from_fn(g.nrows(), keep.len(), |r, c| {
        eig.eigenvectors[(r, keep[c])] / eig.eigenvalues[keep[c]].sqrt()
    });
    let red = t.adjoint() * m * &t;
    let red = (&red + red.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(red).eigenvalues.iter().copied().fold(0.0, f64::max)
}

/// Weighted distance between `ε(1 + G₀(−ελ)V)^{-1}` and `(4πi/(λa²))|φ⟩⟨Vφ|` in
/// `B(L²_{−β})`, i.e. the norm of `⟨r⟩^{−β} A ⟨r⟩^{β}` on `L²`, estimated on the span of
/// seeded radial probes.
pub fn rank_one_limit_check(
    v: &RadialPotential,
    lambda: f64,
    eps_list: &[f64],
    opts: &RankOneOptions,
) -> Result<RankOneReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
    }
    if !(opts.beta > 1.5) || opts.beta >= v.decay() / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "β must lie in (3/2, δ/2) = (1.5, {}), got {}",
            v.decay() / 2.0,
            opts.beta
        )));
    }
    let res = resonance_function(v)?;
    let edge = v.support();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let centres: Vec<f64> = (0..opts.probes).map(|_| rng.random_range(0.0..opts.spread)).collect();
    let r_end = opts.spread + 12.0 * opts.width + 100.0;
    let (nodes, weights) = radial_rule(edge.max(opts.spread), r_end);
    let bracket = |r: f64| (1.0 + r * r).sqrt();
    let probe = |m: usize, r: f64| (-(r - centres[m]).powi(2) / (2.0 * opts.width * opts.width)).exp();
    // ⟨Vφ, ⟨r⟩^β h_m⟩
    let vphi: Vec<C64> = (0..opts.probes)
        .map(|m| {
            adaptive(
                |r| C64::new(4.0 * PI * r * r * v.eval(r) * res.phi(r) * bracket(r).powf(opts.beta) * probe(m, r), 0.0),
                &[0.0, edge],
                1e-15,
                1e-12,
                4000,
            )
            .map(|x| x.0)
        })
        .collect::<Result<_>>()?;
    let gram = DMatrix::<C64>::from_fn(opts.probes, opts.probes, |i, j| {
        nodes.iter().zip(&weights).map(|(&r, &w)| C64::new(w * probe(i, r) * probe(j, r), 0.0)).sum()
    });
    let k = C64::new(0.0, 4.0 * PI / (lambda * res.a * res.a));
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let mu = C64::new(-eps * lambda, 0.0);
            let outs: Vec<Vec<C64>> = (0..opts.probes)
                .map(|m| {
                    let rf = |r: f64| C64::new(r * bracket(r).powf(opts.beta) * probe(m, r), 0.0);
                    let sol = ls_solve(v, mu, &rf)?;
                    Ok(nodes
                        .iter()
                        .map(|&r| {
                            let psi = sol.reduced(r, rf(r)) / r;
                            (psi * eps - k * res.phi(r) * vphi[m]) / bracket(r).powf(opts.beta)
                        })
                        .collect())
                })
                .collect::<Result<_>>()?;
            let m = DMatrix::<C64>::from_fn(opts.probes, opts.probes, |i, j| {
                outs[i].iter().zip(&outs[j]).zip(&weights).map(|((a, b), &w)| a.conj() * b * w).sum()
            });
            Ok(RankOneRow { eps, residual: restricted_norm(&m, &gram).max(0.0).sqrt() })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<&RankOneRow> = rows.iter().collect();
    order.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let monotone = order.windows(2).all(|w| w[1].residual < w[0].residual);
    Ok(RankOneReport { lambda, beta: opts.beta, a: res.a, rows, monotone })
}

/// Radial function with compactly supported transform: `S_u(λ) = √(π/2) λ χ(λ)`, where
/// `χ(k) = amp · exp(−1/(1 − ((k − centre)/half_width)²))` on `|k − centre| < half_width`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandLimited {
    pub amp: f64,
    pub centre: f64,
    pub half_width: f64,
}

/// Panels of the composite 16-point rule across a band.
const BAND_PANELS: usize = 12;

fn gl16() -> &'static GaussLegendre {
    static RULE: std::sync::OnceLock<GaussLegendre> = std::sync::OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Composite 16-point Gauss–Legendre rule with `panels` equal panels on `[a, b]`.
fn composite(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    (0..panels).flat_map(|p| gl16().on(a + p as f64 * h, a + (p + 1) as f64 * h).collect::<Vec<_>>()).collect()
}

/// `∫_0^s sin(λt) sin(kt) dt` and `∫_0^s e^{iλt} sin(kt) dt`.
fn sine_kernels(lambda: f64, k: f64, s: f64) -> (f64, C64) {
    let sinc = |x: f64| if x.abs() * s < 1e-6 { s * (1.0 - (x * s).powi(2) / 6.0) } else { (x * s).sin() / x };
    let versin = |x: f64| {
        if x.abs() * s < 1e-6 {
            x * s * s / 2.0
        } else {
            2.0 * (x * s / 2.0).sin().powi(2) / x
        }
    };
    let ss = 0.5 * (sinc(k - lambda) - sinc(k + lambda));
    let cs = 0.5 * (versin(k + lambda) + versin(k - lambda));
    (ss, C64::new(cs, ss))
}

impl BandLimited {
    pub fn new(amp: f64, centre: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && centre >= half_width && amp.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "band needs 0 < half_width <= centre, got centre {centre}, half_width {half_width}"
            )));
        }
        Ok(BandLimited { amp, centre, half_width })
    }

    pub fn band(&self) -> (f64, f64) {
        (self.centre - self.half_width, self.centre + self.half_width)
    }

    pub fn chi(&self, k: f64) -> f64 {
        let x = (k - self.centre) / self.half_width;
        if x.abs() >= 1.0 {
            0.0
        } else {
            self.amp * (-1.0 / (1.0 - x * x)).exp()
        }
    }

    pub fn sine_transform(&self, lambda: f64) -> f64 {
        (PI / 2.0).sqrt() * lambda * self.chi(lambda)
    }

    fn k_rule(&self) -> Vec<(f64, f64)> {
        let (a, b) = self.band();
        composite(a, b, BAND_PANELS)
    }

    /// `r u(r)`.
    pub fn reduced(&self, r: f64) -> f64 {
        let (a, b) = self.band();
        let panels = BAND_PANELS.max(((b - a) * r / 2.0).ceil() as usize);
        (2.0 / PI).sqrt() * composite(a, b, panels).iter().map(|&(k, w)| w * self.chi(k) * k * (k * r).sin()).sum::<f64>()
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r < 1e-8 {
            return (2.0 / PI).sqrt() * self.k_rule().iter().map(|&(k, w)| w * self.chi(k) * k * k).sum::<f64>();
        }
        self.reduced(r) / r
    }

    /// `U_s u`, `(U_s u)(x) = s^{−3/2} u(x/s)`.
    pub fn dilated(&self, s: f64) -> Self {
        BandLimited { amp: self.amp * s.powf(1.5), centre: self.centre / s, half_width: self.half_width / s }
    }

    /// Radial field centred at the origin, sampled on `grid`.
    pub fn field(&self, grid: RadialGrid) -> Result<crate::field::ScalarField> {
        let profile = RadialProfile::from_fn(grid, Parity::Even, |r| C64::new(self.eval(r), 0.0));
        crate::field::ScalarField::radial([0.0; 3], profile)
    }

    /// `L²(ℝ³)` inner product `8 ∫ S_u S_v dλ`.
    pub fn inner(&self, other: &BandLimited) -> f64 {
        let (a, b) = self.band();
        8.0 * composite(a, b, BAND_PANELS)
            .into_iter()
            .map(|(l, w)| w * self.sine_transform(l) * other.sine_transform(l))
            .sum::<f64>()
    }

    /// `A(s) = ∫_0^s sin(λt) t u dt` and `B(s) = ∫_0^s e^{iλt} t u dt`.
    pub fn partial_moments(&self, lambda: f64, s: f64) -> (f64, C64) {
        self.partial_moments_on(&self.k_rule(), lambda, s)
    }

    fn partial_moments_on(&self, rule: &[(f64, f64)], lambda: f64, s: f64) -> (f64, C64) {
        let mut a = 0.0;
        let mut b = C64::new(0.0, 0.0);
        for &(k, w) in rule {
            let weight = w * self.chi(k) * k;
            let (ss, es) = sine_kernels(lambda, k, s);
            a += weight * ss;
            b += es * weight;
        }
        let norm = (2.0 / PI).sqrt();
        (a * norm, b * norm)
    }

    /// `T(λ) = ∫_0^∞ e^{iλt} t u dt` (outgoing limit).
    pub fn outgoing_moment(&self, lambda: f64) -> C64 {
        let (a, b) = self.band();
        // k²/(k² − λ²) = 1 + (λ/2)(1/(k − λ) − 1/(k + λ))
        let chi_l = self.chi(lambda);
        let mut breaks = vec![a];
        if lambda > a && lambda < b {
            breaks.push(lambda);
        }
        breaks.push(b);
        let mut pv = 0.0;
        for seg in breaks.windows(2) {
            for (k, w) in composite(seg[0], seg[1], BAND_PANELS) {
                let diff = (self.chi(k) - chi_l) / (k - lambda);
                pv += w * (self.chi(k) + 0.5 * lambda * (diff - self.chi(k) / (k + lambda)));
            }
        }
        if chi_l != 0.0 {
            pv += 0.5 * lambda * chi_l * ((b - lambda) / (lambda - a)).abs().ln();
        }
        (2.0 / PI).sqrt() * C64::new(pv, 0.5 * PI * lambda * chi_l)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct WepsOptions {
    /// Panels of the 16-point rule in `λ`; the result is checked against twice as many.
    pub lambda_panels: usize,
    pub rel_tol: f64,
    /// Gauss–Legendre panels of 16 nodes across the support of `V`.
    pub radial_panels: usize,
}

impl Default for WepsOptions {
    fn default() -> Self {
        WepsOptions { lambda_panels: 6, rel_tol: 1e-6, radial_panels: 48 }
    }
}

/// Integrand `conj(S_u(λ)) ⟨ψ_ε(λ), V Q_v(λ)⟩` of the scaled pairing; zero outside the
/// band of `u`.
pub fn weps_integrand(
    v: &RadialPotential,
    eps: f64,
    u: &BandLimited,
    w: &BandLimited,
    lambda: f64,
    opts: &WepsOptions,
) -> Result<C64> {
    let su = u.sine_transform(lambda);
    if su == 0.0 || v.is_zero() {
        return Ok(C64::new(0.0, 0.0));
    }
    let el = eps * lambda;
    let rf = |r: f64| C64::new((el * r).sin(), 0.0);
    let sol = ls_solve(v, C64::new(-el, 0.0), &rf)?;
    let edge = v.support();
    let t = w.outgoing_moment(lambda);
    let k_rule = w.k_rule();
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..opts.radial_panels {
        let (lo, hi) = (edge * p as f64 / opts.radial_panels as f64, edge * (p + 1) as f64 / opts.radial_panels as f64);
        for (r, q) in gl16().on(lo, hi) {
            let wr = sol.reduced(r, rf(r));
            let (a, b) = w.partial_moments_on(&k_rule, lambda, eps * r);
            let rq = ((C64::i() * el * r).exp() * a + (el * r).sin() * (t - b)) / (el * eps.sqrt());
            acc += wr.conj() * rq * (v.eval(r) * q);
        }
    }
    Ok(acc * (4.0 * PI * su))
}

/// `⟨W_ε u, w⟩` for the potential `ε^{−2} V(x/ε)` on band-limited radial data.
pub fn weps_pairing(v: &RadialPotential, eps: f64, u: &BandLimited, w: &BandLimited, opts: &WepsOptions) -> Result<C64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    let (a, b) = u.band();
    let integral = |panels: usize| -> Result<C64> {
        let nodes = composite(a, b, panels);
        let vals = nodes
            .par_iter()
            .map(|&(l, q)| weps_integrand(v, eps, u, w, l, opts).map(|x| x * q))
            .collect::<Result<Vec<_>>>()?;
        Ok(vals.into_iter().sum())
    };
    let coarse = integral(opts.lambda_panels)?;
    let fine = integral(2 * opts.lambda_panels)?;
    if (fine - coarse).norm() > opts.rel_tol * fine.norm().max(1e-300) + 1e-14 {
        return Err(Error::Quadrature(format!(
            "λ quadrature unresolved: {coarse} vs {fine} with {} panels",
            opts.lambda_panels
        )));
    }
    Ok(C64::new(u.inner(w), 0.0) - fine * (2.0 * eps.sqrt() / PI))
}
