//! Free and interacting Schrödinger propagation, dispersive fits and Strichartz norms.
//!
//! A radial piece `N(ρ)/ρ` about a point evolves freely through its numerator: `N`
//! solves the one-dimensional equation `i∂_t N = −N''` on the line, so the step is the
//! multiplier `e^{−itξ²}` on the odd numerator. The interacting flow on the absolutely
//! continuous subspace is `W⁺ e^{−itH₀} (W⁺)^*`.

use crate::config::{dist, RadialGrid};
use crate::cubature::CubatureSpec;
use crate::error::{Error, Result};
use crate::field::{Anchored, AnchoredProfile, CentredField, Gaussian, ScalarField};
use crate::lpprobe::{lp_norm, lp_norm_scalar};
use crate::profile::{LineProfile, Parity, RadialProfile};
use crate::quad::linear_fit;
use crate::radial::SymmetricFft;
use crate::waveop::{Sign, WaveOperator, WaveOptions};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;
use std::f64::consts::PI;

type C64 = Complex64;

#[derive(Clone, Copy, Debug)]
pub struct DynamicsOptions {
    /// Box length of the free step is `2 r_max pad`.
    pub pad: usize,
    /// Largest fraction of the L² mass allowed to leave the grid.
    pub mass_tol: f64,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        DynamicsOptions { pad: 4, mass_tol: 1e-2 }
    }
}

impl DynamicsOptions {
    /// Wave-operator settings wide enough to hold a unit-width packet up to `t = 100`.
    pub fn wave_options() -> WaveOptions {
        WaveOptions { grid: RadialGrid { r_max: 1536.0, n: 15360 }, ..WaveOptions::default() }
    }
}

/// Free step of a numerator line on the padded box, with the L² mass (in R³) that
/// left the line.
fn step_line(fft: &SymmetricFft, line: &LineProfile, t: f64) -> (LineProfile, f64) {
    let mut buf = fft.embed(line);
    let total: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
    fft.apply_box(&mut buf, &|_, xi| C64::from_polar(1.0, -t * xi * xi));
    let out = fft.extract(&buf);
    let kept: f64 = out.values.iter().map(|v| v.norm_sqr()).sum();
    // ∫|N/ρ|² dx = 2π ∫_ℝ |N|² dρ
    (out, 2.0 * PI * fft.h() * (total - kept).max(0.0))
}

fn line_mass(line: &LineProfile) -> f64 {
    2.0 * PI * line.grid.h() * line.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
}

fn escape_error(lost: f64, r_max: f64, t: f64) -> Error {
    Error::Resolution(format!("grid too small: {lost:.3e} of the mass leaves r_max = {r_max} by t = {t}"))
}

/// Free evolution of an odd numerator line; fails when more than `mass_tol` of its
/// mass leaves the line.
pub fn evolve_numerator(fft: &SymmetricFft, line: &LineProfile, t: f64, mass_tol: f64) -> Result<LineProfile> {
    if t == 0.0 {
        return Ok(line.clone());
    }
    let total = line_mass(line);
    let (out, lost) = step_line(fft, line, t);
    if total > 0.0 && lost > mass_tol * total {
        return Err(escape_error(lost / total, line.grid.r_max, t));
    }
    Ok(out)
}

/// Fraction of the L² mass of a Gaussian outside the ball of radius `r` about its centre.
fn gaussian_escape(g: &Gaussian, r: f64) -> f64 {
    // |g|² ∝ e^{-c ρ²}, c = 2 Re a
    let c = 2.0 * g.a.re;
    let total = PI.sqrt() / (4.0 * c.powf(1.5));
    let tail = r * (-c * r * r).exp() / (2.0 * c) + total * erfc(c.sqrt() * r);
    tail / total
}

fn radial_line(f: &(dyn Fn(f64) -> C64 + Sync), grid: RadialGrid) -> LineProfile {
    let mut line = LineProfile::zeros(grid);
    let n = grid.n;
    for i in 0..n {
        let r = grid.node(i);
        let v = f(r) * r;
        line.values[n + i] = v;
        line.values[n - 1 - i] = -v;
    }
    line
}

fn line_to_radial(line: &LineProfile) -> RadialProfile {
    let grid = line.grid;
    let values = (0..grid.n).map(|i| line.pos(i) / grid.node(i)).collect();
    RadialProfile { grid, values, parity: Parity::Even }
}

/// `e^{−itH₀} u` for Gaussians (closed form), radial fields and sums of those.
///
/// Non-Gaussian pieces are resampled on `grid` about their centre. `reach` is the
/// radius about the field's centre that has to hold the evolved mass.
pub fn free_propagate(
    u: &ScalarField,
    t: f64,
    grid: RadialGrid,
    reach: f64,
    opts: &DynamicsOptions,
) -> Result<ScalarField> {
    if t == 0.0 {
        return Ok(u.clone());
    }
    match u {
        ScalarField::Gaussian(g) => {
            let e = g.evolved(t);
            let lost = gaussian_escape(&e, reach);
            if lost > opts.mass_tol {
                return Err(Error::Resolution(format!(
                    "grid too small: {lost:.3e} of the Gaussian mass leaves radius {reach} by t = {t}"
                )));
            }
            Ok(ScalarField::Gaussian(e))
        }
        ScalarField::Sum(parts) => Ok(ScalarField::Sum(
            parts
                .iter()
                .map(|(c, p)| free_propagate(p, t, grid, reach, opts).map(|q| (*c, q)))
                .collect::<Result<_>>()?,
        )),
        ScalarField::Radial { centre, .. } | ScalarField::Function { origin: centre, .. } => {
            let centre = *centre;
            let f = u.radial_about(centre).ok_or_else(|| {
                Error::InvalidArgument("free evolution needs a Gaussian, a radial field or a sum of those".into())
            })?;
            let line = radial_line(&f, grid);
            let fft = SymmetricFft::new(grid, opts.pad);
            let out = evolve_numerator(&fft, &line, t, opts.mass_tol)?;
            Ok(ScalarField::Radial { centre, profile: line_to_radial(&out) })
        }
    }
}

/// Free evolution of the numerator line of a radial field by direct quadrature against
/// the one-dimensional kernel `(4πit)^{−1/2} e^{i(ρ−s)²/(4t)}`, at the radii `rhos`.
///
/// Returns `ρ u_t(ρ)`. Fails when the kernel phase is not resolved by the line spacing
/// wherever the data is not negligible.
pub fn kernel_numerator(line: &LineProfile, t: f64, rhos: &[f64]) -> Result<Vec<C64>> {
    if t == 0.0 {
        return Ok(rhos.iter().map(|&r| line.eval(r)).collect());
    }
    let grid = line.grid;
    let h = grid.h();
    let n = grid.n;
    let xs: Vec<f64> = (0..2 * n).map(|q| (q as f64 + 0.5 - n as f64) * h).collect();
    let peak = line.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let live = line.values.iter().rposition(|v| v.norm() > 1e-12 * peak).unwrap_or(0);
    let support = xs[live].abs();
    let far = rhos.iter().fold(0.0f64, |m, r| m.max(r.abs())) + support;
    // phase increment of e^{i(ρ-s)²/(4t)} per node
    if far * h / (2.0 * t.abs()) > PI / 4.0 {
        return Err(Error::Quadrature(format!(
            "free kernel oscillation unresolved at t = {t}: phase step {:.3} per node",
            far * h / (2.0 * t.abs())
        )));
    }
    let pre = (C64::new(0.0, 4.0 * PI * t)).powf(-0.5) * h;
    Ok(rhos
        .par_iter()
        .map(|&r| {
            let mut acc = C64::new(0.0, 0.0);
            for (x, v) in xs.iter().zip(&line.values) {
                let d = r - x;
                acc += v * C64::from_polar(1.0, d * d / (4.0 * t));
            }
            acc * pre
        })
        .collect())
}

/// Freely evolved field `e^{−itH₀} u` for a field with anchored pieces.
///
/// Fails when more than `mass_tol` of `‖u‖²` leaves the grid.
pub fn free_propagate_centred(
    u: &CentredField,
    t: f64,
    fft: &SymmetricFft,
    opts: &DynamicsOptions,
) -> Result<CentredField> {
    propagate_centred(u, u.norm_sq()?, t, fft, opts)
}

fn propagate_centred(
    u: &CentredField,
    mass: f64,
    t: f64,
    fft: &SymmetricFft,
    opts: &DynamicsOptions,
) -> Result<CentredField> {
    if t == 0.0 {
        return Ok(u.clone());
    }
    let grid = fft.grid;
    let mut lost = 0.0;
    let free = match &u.free {
        Some(ScalarField::Gaussian(g)) => {
            let d = u.centres.iter().map(|&y| dist(y, g.centre)).fold(0.0, f64::max);
            let e = g.evolved(t);
            let own = g.amp.norm_sqr() * (PI / (2.0 * g.a.re)).powf(1.5);
            lost += own * gaussian_escape(&e, grid.r_max - d);
            Some(ScalarField::Gaussian(e))
        }
        Some(f) => {
            let (c, _) = f.support_ball();
            let d = u.centres.iter().map(|&y| dist(y, c)).fold(0.0, f64::max);
            Some(free_propagate(f, t, grid, grid.r_max - d, opts)?)
        }
        None => None,
    };
    let steps = u
        .anchored
        .par_iter()
        .map(|a| {
            if a.profile.extent().is_none() {
                return Err(Error::InvalidArgument("anchored profile does not decay".into()));
            }
            let line = a.profile.numerator_line(grid).odd_extension_of_positive();
            let (out, gone) = step_line(fft, &line, t);
            Ok((Anchored { centre: a.centre, profile: AnchoredProfile::Numerator(out) }, gone))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut anchored = vec![];
    for (a, gone) in steps {
        lost += gone;
        anchored.push(a);
    }
    if lost > opts.mass_tol * mass {
        return Err(escape_error(lost / mass, grid.r_max, t));
    }
    Ok(CentredField { centres: u.centres.clone(), free, anchored })
}

/// `e^{−itH} P_ac u` at several times, sharing one application of `(W⁺)^*`.
pub struct Evolution<'a> {
    op: &'a WaveOperator,
    fft: SymmetricFft,
    opts: DynamicsOptions,
    incoming: CentredField,
    mass: f64,
}

impl<'a> Evolution<'a> {
    pub fn new(op: &'a WaveOperator, u: &ScalarField, opts: DynamicsOptions) -> Result<Self> {
        let incoming = op.adjoint_apply(u, Sign::Plus)?.compacted();
        let mass = crate::field::l2_norm_free(u)?.powi(2);
        Ok(Evolution { op, fft: SymmetricFft::new(op.grid(), opts.pad), opts, incoming, mass })
    }

    /// `(W⁺)^* u`.
    pub fn incoming(&self) -> &CentredField {
        &self.incoming
    }

    pub fn at(&self, t: f64) -> Result<CentredField> {
        let moved = propagate_centred(&self.incoming, self.mass, t, &self.fft, &self.opts)?;
        self.op.apply_centred(&moved, Sign::Plus)
    }
}

/// `e^{−itH} P_ac f` for a field that already carries anchored pieces.
pub fn interacting_propagate_centred(
    op: &WaveOperator,
    f: &CentredField,
    t: f64,
    opts: DynamicsOptions,
) -> Result<CentredField> {
    let incoming = op.adjoint_apply_centred(f, Sign::Plus)?;
    let fft = SymmetricFft::new(op.grid(), opts.pad);
    let moved = propagate_centred(&incoming, f.norm_sq()?, t, &fft, &opts)?;
    op.apply_centred(&moved, Sign::Plus)
}

/// `e^{−itH} P_ac u = W⁺ e^{−itH₀} (W⁺)^* u`.
pub fn interacting_propagate(
    op: &WaveOperator,
    u: &ScalarField,
    t: f64,
    opts: DynamicsOptions,
) -> Result<CentredField> {
    Evolution::new(op, u, opts)?.at(t)
}

fn check_p(p: f64) -> Result<()> {
    if !(2.0..3.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dispersive exponent needs p in [2, 3), got {p}")));
    }
    Ok(())
}

/// `−3(1/2 − 1/p)`.
pub fn dispersive_exponent(p: f64) -> f64 {
    -3.0 * (0.5 - 1.0 / p)
}

/// Time exponent `q` paired with `p` by `2/q = 3(1/2 − 1/p)`; infinite at `p = 2`.
pub fn admissible_q(p: f64) -> Result<f64> {
    check_p(p)?;
    if p == 2.0 {
        return Ok(f64::INFINITY);
    }
    Ok(4.0 * p / (3.0 * (p - 2.0)))
}

/// Rejects `(p, q)` unless it is admissible.
pub fn check_admissible(p: f64, q: f64) -> Result<()> {
    let want = admissible_q(p)?;
    let ok = if want.is_infinite() { q.is_infinite() } else { (q - want).abs() <= 1e-12 * want };
    if !ok {
        return Err(Error::InvalidArgument(format!("({p}, {q}) is not admissible; q must be {want}")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayPoint {
    pub t: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DispersiveFit {
    pub p: f64,
    pub curve: Vec<DecayPoint>,
    pub exponent: f64,
    pub predicted: f64,
    /// `exp(intercept) / ‖u‖_{p'}`.
    pub constant: f64,
    pub r2: f64,
}

impl DispersiveFit {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,norm")?;
        for c in &self.curve {
            writeln!(w, "{:.17e},{:.17e}", c.t, c.norm)?;
        }
        Ok(())
    }

    pub fn relative_error(&self) -> f64 {
        if self.predicted == 0.0 {
            self.exponent.abs()
        } else {
            ((self.exponent - self.predicted) / self.predicted).abs()
        }
    }
}

/// Least-squares slope of `log ‖e^{−itH} P_ac u‖_p` against `log t`.
pub fn dispersive_fit(
    op: &WaveOperator,
    u: &ScalarField,
    p: f64,
    times: &[f64],
    opts: DynamicsOptions,
    spec: &CubatureSpec,
) -> Result<DispersiveFit> {
    check_p(p)?;
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument("times must be positive".into()));
    }
    let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = times.iter().copied().fold(0.0, f64::max);
    if (hi / lo).log10() < 1.5 {
        return Err(Error::InvalidArgument(format!(
            "time grid spans {:.2} decades; at least 1.5 are needed",
            (hi / lo).log10()
        )));
    }
    let evo = Evolution::new(op, u, opts)?;
    let norms = times
        .iter()
        .map(|&t| lp_norm(&evo.at(t)?, p, spec))
        .collect::<Result<Vec<f64>>>()?;
    let x: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    let dual = if p == 2.0 { 2.0 } else { p / (p - 1.0) };
    let reference = lp_norm_scalar(u, dual, spec)?;
    Ok(DispersiveFit {
        p,
        curve: times.iter().zip(&norms).map(|(&t, &norm)| DecayPoint { t, norm }).collect(),
        exponent: slope,
        predicted: dispersive_exponent(p),
        constant: intercept.exp() / reference,
        r2,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StrichartzWindow {
    pub t_max: f64,
    pub value: f64,
    /// `value / ‖u‖₂`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrichartzReport {
    pub p: f64,
    pub q: f64,
    pub curve: Vec<DecayPoint>,
    /// Nested windows `[1/T, T]`, one per decade up to the largest.
    pub windows: Vec<StrichartzWindow>,
}

impl StrichartzReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t_max,value,ratio")?;
        for s in &self.windows {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", s.t_max, s.value, s.ratio)?;
        }
        Ok(())
    }

    /// Largest relative change of the ratio between consecutive windows.
    pub fn drift(&self) -> f64 {
        self.windows.windows(2).map(|w| ((w[1].ratio - w[0].ratio) / w[0].ratio).abs()).fold(0.0, f64::max)
    }
}

/// Nodes per decade of the Strichartz time quadrature.
pub const STRICHARTZ_NODES_PER_DECADE: usize = 16;

/// `‖e^{−itH} P_ac u‖_{L^q_t([1/T, T]; L^p_x)}` for windows `T = 10, 100, …, t_max`.
///
/// Geometric nodes; the time integral is the trapezoidal rule in `ln t` of `t n(t)^q`.
pub fn strichartz_window_norm(
    op: &WaveOperator,
    u: &ScalarField,
    p: f64,
    q: f64,
    t_max: f64,
    opts: DynamicsOptions,
    spec: &CubatureSpec,
) -> Result<StrichartzReport> {
    check_admissible(p, q)?;
    if !(t_max > 1.0) {
        return Err(Error::InvalidArgument(format!("window end must exceed 1, got {t_max}")));
    }
    let decades = t_max.log10().ceil().max(1.0) as usize;
    let k = decades * STRICHARTZ_NODES_PER_DECADE;
    let step = t_max.ln() / k as f64;
    let times: Vec<f64> = (0..=2 * k).map(|i| ((i as f64 - k as f64) * step).exp()).collect();
    let l2 = lp_norm_scalar(u, 2.0, spec)?;
    let evo = Evolution::new(op, u, opts)?;
    let norms = times
        .iter()
        .map(|&t| lp_norm(&evo.at(t)?, p, spec))
        .collect::<Result<Vec<f64>>>()?;
    let mut windows = vec![];
    for d in 1..=decades {
        let half = (k * d) / decades;
        let idx = k - half..=k + half;
        let value = if q.is_infinite() {
            idx.map(|i| norms[i]).fold(0.0, f64::max)
        } else {
            let f: Vec<f64> = idx.clone().map(|i| times[i] * norms[i].powf(q)).collect();
            let s: f64 = f.iter().sum::<f64>() - 0.5 * (f[0] + f[f.len() - 1]);
            (s * step).powf(1.0 / q)
        };
        windows.push(StrichartzWindow { t_max: times[k + half], value, ratio: value / l2 });
    }
    Ok(StrichartzReport {
        p,
        q,
        curve: times.iter().zip(&norms).map(|(&t, &norm)| DecayPoint { t, norm }).collect(),
        windows,
    })
}

/// Points `a, …, b` spaced geometrically with `per_decade` points per decade.
pub fn geometric_times(a: f64, b: f64, per_decade: usize) -> Vec<f64> {
    let n = ((b / a).log10() * per_decade as f64).round().max(1.0) as usize;
    (0..=n).map(|i| a * (b / a).powf(i as f64 / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Configuration;
    use crate::quad::{adaptive, GaussLegendre};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn spec() -> CubatureSpec {
        CubatureSpec::default()
    }

    /// `∫_0^∞ cos(ks) s e^{−s²} ds = 1/2 − (k/2) D(k/2)`, with Dawson's `D(x) = ∫_0^x e^{y²−x²} dy`.
    fn cos_moment(k: f64) -> f64 {
        let x = k / 2.0;
        let d = adaptive(|s| c((-s * (2.0 * x - s)).exp()), &[0.0, x.min(1.0), x], 0.0, 1e-14, 2000)
            .unwrap()
            .0
            .re;
        0.5 - x * d
    }

    /// `r u_t(r)` for the half-line Robin problem `g'(0) = κ g(0)` with `g_0 = r e^{−r²}`,
    /// projected on the continuum, from the generalized eigenfunctions
    /// `√(2/π)(k cos kr + κ sin kr)/√(k² + κ²)`.
    fn robin_oracle(kappa: f64, t: f64, rs: &[f64]) -> Vec<C64> {
        let kmax = 120.0;
        let panels = 6000;
        let rule = GaussLegendre::new(16);
        let mut nodes = vec![];
        for p in 0..panels {
            let a = kmax * p as f64 / panels as f64;
            let b = kmax * (p + 1) as f64 / panels as f64;
            for (k, w) in rule.on(a, b) {
                let s = PI.sqrt() / 4.0 * k * (-k * k / 4.0).exp();
                let coef = (k * cos_moment(k) + kappa * s) / (k * k + kappa * kappa).sqrt();
                nodes.push((k, w * coef * 2.0 / PI));
            }
        }
        rs.iter()
            .map(|&r| {
                nodes
                    .iter()
                    .map(|&(k, w)| {
                        let phi = (k * (k * r).cos() + kappa * (k * r).sin()) / (k * k + kappa * kappa).sqrt();
                        C64::from_polar(w * phi, -t * k * k)
                    })
                    .sum()
            })
            .collect()
    }

    fn grid512() -> WaveOptions {
        WaveOptions { grid: RadialGrid { r_max: 512.0, n: 10240 }, ..WaveOptions::default() }
    }

    fn unit_gaussian() -> ScalarField {
        ScalarField::gaussian(1.0, 1.0, [0.0; 3])
    }

    fn radial_sample(f: impl Fn(f64) -> f64, grid: RadialGrid) -> ScalarField {
        let profile = RadialProfile::from_fn(grid, Parity::Even, |r| c(f(r)));
        ScalarField::radial([0.0; 3], profile).unwrap()
    }

    #[test]
    fn free_gaussian_matches_closed_form() {
        let grid = RadialGrid { r_max: 64.0, n: 2560 };
        let u = radial_sample(|r| (-r * r).exp(), grid);
        for t in [0.5, 2.0] {
            let v = free_propagate(&u, t, grid, grid.r_max, &DynamicsOptions::default()).unwrap();
            let w = C64::new(1.0, 4.0 * t);
            for r in [0.1, 1.0, 3.0, 10.0] {
                let want = w.powf(-1.5) * (-r * r / w).exp();
                assert!((v.eval([0.0, r, 0.0]) - want).norm() < 1e-10, "t={t} r={r}");
            }
            let g = free_propagate(&unit_gaussian(), t, grid, grid.r_max, &DynamicsOptions::default()).unwrap();
            assert!((g.eval([1.0, 0.0, 0.0]) - w.powf(-1.5) * (-1.0 / w).exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn kernel_and_multiplier_agree_at_the_crossover() {
        let grid = RadialGrid { r_max: 256.0, n: 10240 };
        let line = radial_line(&|r: f64| c((1.0 + r * r) * (-r * r).exp()), grid);
        let fft = SymmetricFft::new(grid, 4);
        let rhos = [0.5, 2.0, 7.0, 20.0];
        for t in [9.9, 10.0, 10.1] {
            let fast = evolve_numerator(&fft, &line, t, 1e-12).unwrap();
            let slow = kernel_numerator(&line, t, &rhos).unwrap();
            for (r, k) in rhos.iter().zip(&slow) {
                assert!((fast.eval(*r) - k).norm() < 1e-8, "t={t} r={r}");
            }
        }
        assert!(matches!(kernel_numerator(&line, 0.01, &rhos), Err(Error::Quadrature(_))));
    }

    #[test]
    fn free_flow_is_unitary_and_dispersive() {
        let grid = RadialGrid { r_max: 128.0, n: 5120 };
        let f = |r: f64| (1.0 + r * r) * (-r * r / 2.0).exp();
        let u = radial_sample(f, grid);
        let fft = SymmetricFft::new(grid, 4);
        let line = radial_line(&|r: f64| c(f(r)), grid);
        let l1 = 4.0 * PI * adaptive(|r| c(r * r * f(r)), &[0.0, 20.0], 0.0, 1e-13, 2000).unwrap().0.re;
        let m0 = line_mass(&line);
        for t in [1.0, 2.0, 4.0] {
            let out = evolve_numerator(&fft, &line, t, 1e-12).unwrap();
            assert!((line_mass(&out) / m0 - 1.0).abs() < 1e-8);
            let v = free_propagate(&u, t, grid, grid.r_max, &DynamicsOptions::default()).unwrap();
            let sup = (0..2000).map(|i| v.eval([0.01 * i as f64, 0.0, 0.0]).norm()).fold(0.0, f64::max);
            assert!(sup <= (4.0 * PI * t).powf(-1.5) * l1, "t={t}");
        }
    }

    #[test]
    fn escaping_mass_is_reported() {
        let grid = RadialGrid { r_max: 16.0, n: 640 };
        let line = radial_line(&|r: f64| c((-r * r).exp()), grid);
        let fft = SymmetricFft::new(grid, 4);
        assert!(matches!(evolve_numerator(&fft, &line, 20.0, 1e-6), Err(Error::Resolution(_))));
        let g = unit_gaussian();
        assert!(matches!(
            free_propagate(&g, 20.0, grid, grid.r_max, &DynamicsOptions::default()),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn interacting_flow_matches_half_line_robin_problem() {
        let u = unit_gaussian();
        let rs = [0.3, 1.0, 2.0, 4.0, 8.0];
        for (alpha, tol) in [(1.0, 1e-4), (-1.0 / (4.0 * PI), 1e-4), (0.0, 2e-3)] {
            let op = WaveOperator::new(&Configuration::single(alpha), grid512()).unwrap();
            let evo = Evolution::new(&op, &u, DynamicsOptions::default()).unwrap();
            for t in [0.5, 2.0, 8.0] {
                let f = evo.at(t).unwrap();
                let want = robin_oracle(4.0 * PI * alpha, t, &rs);
                for (r, w) in rs.iter().zip(&want) {
                    let got = f.eval([0.0, 0.0, *r]) * r;
                    assert!((got - w).norm() < tol, "alpha={alpha} t={t} r={r}: {got} vs {w}");
                }
            }
        }
    }

    #[test]
    fn time_zero_is_the_identity_without_bound_states() {
        let u = unit_gaussian();
        for (alpha, tol) in [(1.0, 2e-4), (0.0, 5e-3)] {
            let op = WaveOperator::new(&Configuration::single(alpha), grid512()).unwrap();
            let f = interacting_propagate(&op, &u, 0.0, DynamicsOptions::default()).unwrap();
            for r in [0.2, 1.0, 2.5] {
                let e = (f.eval([r, 0.0, 0.0]) - (-r * r).exp()).norm();
                assert!(e < tol, "alpha={alpha} r={r}: {e:.3e}");
            }
        }
    }

    #[test]
    fn flow_conserves_mass_and_avoids_the_bound_state() {
        let u = ScalarField::gaussian(1.0, 1.0, [0.0, 0.0, 0.3]);
        let op = WaveOperator::new(&Configuration::single(1.0), WaveOptions::default()).unwrap();
        let evo = Evolution::new(&op, &u, DynamicsOptions::default()).unwrap();
        let m0 = crate::field::l2_norm_free(&u).unwrap().powi(2);
        for t in [0.0, 0.1, 1.0, 5.0] {
            let m = evo.at(t).unwrap().norm_sq().unwrap();
            assert!((m / m0 - 1.0).abs() < 1e-5, "t={t}: {m} vs {m0}");
        }

        let cfg = Configuration::single(-1.0 / (4.0 * PI));
        let op = WaveOperator::new(&cfg, grid512()).unwrap();
        let psi = crate::gamma::find_bound_states(&cfg, 10.0, 1e-13).unwrap()[0].field(&cfg);
        let scale = psi.norm_sq().unwrap().sqrt() * m0.sqrt();
        let evo = Evolution::new(&op, &u, DynamicsOptions::default()).unwrap();
        for t in [0.0, 1.0, 5.0] {
            let overlap = psi.inner(&evo.at(t).unwrap()).unwrap();
            assert!(overlap.norm() < 1e-4 * scale, "t={t}: {overlap}");
        }
    }

    #[test]
    fn time_reversal_and_group_property() {
        let cfg = Configuration::single(1.0);
        let op = WaveOperator::new(&cfg, grid512()).unwrap();
        let u = ScalarField::gaussian(1.0, 1.5, [0.0, 0.0, 0.0]);
        let opts = DynamicsOptions::default();
        let fwd = interacting_propagate(&op, &u, 1.5, opts).unwrap();
        let back = interacting_propagate(&op, &u.conj(), -1.5, opts).unwrap();
        let twice = interacting_propagate_centred(&op, &interacting_propagate(&op, &u, 0.5, opts).unwrap(), 1.0, opts)
            .unwrap();
        for r in [0.1, 1.0, 3.0] {
            let x = [r, 0.0, 0.0];
            assert!((back.eval(x) - fwd.eval(x).conj()).norm() < 1e-6, "r={r}");
            assert!((twice.eval(x) - fwd.eval(x)).norm() < 1e-5, "r={r}");
        }
    }

    #[test]
    fn admissible_pairs() {
        assert!((admissible_q(2.5).unwrap() - 20.0 / 3.0).abs() < 1e-12);
        assert!(admissible_q(2.0).unwrap().is_infinite());
        assert!(admissible_q(3.0).is_err());
        assert!(check_admissible(2.5, 6.0).is_err());
        assert!(check_admissible(2.5, 20.0 / 3.0).is_ok());
        assert!((dispersive_exponent(2.5) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn l2_norm_does_not_decay() {
        let op = WaveOperator::new(&Configuration::single(1.0), grid512()).unwrap();
        let u = unit_gaussian();
        let times = geometric_times(1.0, 40.0, 4);
        let fit = dispersive_fit(&op, &u, 2.0, &times, DynamicsOptions::default(), &spec()).unwrap();
        assert!(fit.exponent.abs() < 0.02, "{}", fit.exponent);
        assert!(dispersive_fit(&op, &u, 3.0, &times, DynamicsOptions::default(), &spec()).is_err());
        let short = geometric_times(1.0, 20.0, 4);
        assert!(dispersive_fit(&op, &u, 2.5, &short, DynamicsOptions::default(), &spec()).is_err());
    }

    #[test]
    fn strichartz_endpoint_is_the_l2_norm() {
        let op = WaveOperator::new(&Configuration::single(1.0), grid512()).unwrap();
        let u = unit_gaussian();
        let rep = strichartz_window_norm(&op, &u, 2.0, f64::INFINITY, 10.0, DynamicsOptions::default(), &spec())
            .unwrap();
        assert_eq!(rep.curve.len(), 2 * STRICHARTZ_NODES_PER_DECADE + 1);
        assert!((rep.windows[0].ratio - 1.0).abs() < 1e-3, "{:?}", rep.windows);
        assert!(strichartz_window_norm(&op, &u, 2.5, 6.0, 10.0, DynamicsOptions::default(), &spec()).is_err());
    }
}
