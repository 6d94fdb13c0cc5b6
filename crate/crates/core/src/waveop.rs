//! Stationary wave operators.
//!
//! All one-dimensional transforms run on a zero-padded periodic box holding the
//! symmetric staggered line. For a source density `g_k = r M^{y_k}(r)` (odd), the
//! numerator `N_jk(ρ) = ρ (Ω_jk u)(y_j + ρω)` is obtained from the multiplier
//!
//! `m_jk(ξ) = δ_jk c(ξ) + 1_{ξ<0} F̃_jk(−ξ) / (2πi)`,
//!
//! where `c(ξ) = −(1 − sgn ξ)` is the symbol of `−(1 − iℋ)` and
//! `F̃ = F + 4πi` is the decaying remainder.

use crate::config::{dist, Configuration, RadialGrid, Vec3};
use crate::error::{Error, Result};
use crate::field::{Anchored, AnchoredProfile, CentredField, ScalarField};
use crate::gamma::f_value;
use crate::profile::{endpoint_taylor_weights, LineProfile, Parity, RadialProfile};
use crate::radial::{hilbert_line, SymmetricFft};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::OnceLock;

type C64 = Complex64;

/// Translation `(T_{x0} f)(x) = f(x − x0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranslationOp {
    pub offset: Vec3,
}

impl TranslationOp {
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        f.translated(self.offset)
    }

    pub fn compose(&self, o: &TranslationOp) -> TranslationOp {
        TranslationOp {
            offset: [self.offset[0] + o.offset[0], self.offset[1] + o.offset[1], self.offset[2] + o.offset[2]],
        }
    }

    pub fn inverse(&self) -> TranslationOp {
        TranslationOp { offset: [-self.offset[0], -self.offset[1], -self.offset[2]] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug)]
pub struct WaveOptions {
    pub grid: RadialGrid,
    /// Box length is `2 r_max pad`.
    pub pad: usize,
    /// Largest admissible relative spectral amplitude near the Nyquist frequency.
    pub spectral_tol: f64,
    /// Largest admissible fraction of source mass in the outer tenth of the grid.
    pub tail_tol: f64,
}

impl WaveOptions {
    /// The same options with the padding raised to meet the Nyquist condition for `cfg`.
    pub fn padded_for(mut self, cfg: &Configuration) -> Self {
        let reach = self.grid.r_max + cfg.max_distance();
        let need = (reach / self.grid.r_max).ceil() as usize;
        self.pad = self.pad.max(need);
        self
    }
}

impl Default for WaveOptions {
    fn default() -> Self {
        WaveOptions {
            grid: RadialGrid { r_max: 512.0, n: 20480 },
            pad: 2,
            spectral_tol: 1e-8,
            tail_tol: 1e-10,
        }
    }
}

/// Precomputed multiplier tables for one configuration and grid.
pub struct WaveOperator {
    pub cfg: Configuration,
    pub opts: WaveOptions,
    fft: SymmetricFft,
    /// `1_{ξ<0} F̃_jk(−ξ)/(2πi)` per FFT bin, stored at index `j n + k`.
    remainder: Vec<Vec<C64>>,
    /// Largest condition number met while building the tables.
    pub max_condition: f64,
    edge: OnceLock<std::result::Result<EdgeTables, String>>,
}

/// Refined-minus-working responses to the edge models `ψ_m`, indexed by
/// `pair · EDGE_ORDERS + m`.
struct EdgeTables {
    /// `W*` applied to `1_{ρ>0} ψ_m`, at the positive nodes.
    adjoint: Vec<Vec<C64>>,
    /// Numerator of `W` for the odd extension of `ψ_m`, on the whole line.
    forward: Vec<Vec<C64>>,
}

/// Number of one-sided models `ψ_m(ρ) = (ρ/h)^m e^{−ρ⁴}`, `m < EDGE_ORDERS`.
const EDGE_ORDERS: usize = 4;
/// Refinement factor of the reference box; odd, so the coarse nodes are fine nodes.
const EDGE_REFINE: usize = 9;

/// Densities below this multiple of `peak · r_max` are angular-quadrature rounding noise.
const ROUNDING_FLOOR: f64 = 1e-14;

fn flush(line: LineProfile, floor: f64) -> LineProfile {
    if line.values.iter().all(|v| v.norm() <= floor) {
        LineProfile::zeros(line.grid)
    } else {
        line
    }
}

fn edge_model(m: usize, rho: f64, h: f64) -> f64 {
    (rho / h).powi(m as i32) * (-rho.powi(4)).exp()
}

/// Weight of the negative-frequency half-line at a box bin: 1 for `ξ < 0`, 0 for `ξ > 0`,
/// and 1/2 at `ξ = 0` and at the Nyquist bin, which both map to themselves under `ξ ↦ −ξ`.
fn negative_weight(fft: &SymmetricFft, bin: usize) -> f64 {
    if bin == 0 || 2 * bin == fft.m {
        0.5
    } else if fft.xi(bin) < 0.0 {
        1.0
    } else {
        0.0
    }
}

impl WaveOperator {
    pub fn new(cfg: &Configuration, opts: WaveOptions) -> Result<Self> {
        let fft = SymmetricFft::new(opts.grid, opts.pad);
        let reach = opts.grid.r_max + cfg.max_distance();
        // Nyquist condition Δλ ≤ π / (ρ_max + max d)
        let dl = 2.0 * PI / fft.box_length();
        if dl > PI / reach {
            return Err(Error::Resolution(format!(
                "λ spacing {dl:.3e} exceeds π/(ρ_max + max d) = {:.3e}; increase the padding",
                PI / reach
            )));
        }
        let n = cfg.n();
        let m = fft.m;
        let bins: Vec<usize> = (0..m).filter(|&k| fft.xi(k) < 0.0).collect();
        let vals: Result<Vec<(usize, nalgebra::DMatrix<C64>, f64)>> = bins
            .par_iter()
            .map(|&k| f_value(cfg, -fft.xi(k)).map(|(f, c)| (k, f, c)))
            .collect();
        let mut remainder = vec![vec![C64::new(0.0, 0.0); m]; n * n];
        let mut max_condition = 0.0f64;
        let scale = C64::new(0.0, 2.0 * PI).inv();
        for (k, f, c) in vals? {
            max_condition = max_condition.max(c);
            for j in 0..n {
                for l in 0..n {
                    let mut v = f[(j, l)];
                    if j == l {
                        v += C64::new(0.0, 4.0 * PI);
                    }
                    remainder[j * n + l][k] = v * scale * negative_weight(&fft, k);
                }
            }
        }
        Ok(WaveOperator { cfg: cfg.clone(), opts, fft, remainder, max_condition, edge: OnceLock::new() })
    }

    pub fn grid(&self) -> RadialGrid {
        self.opts.grid
    }

    /// Responses to the edge models on a box with multiplier `mult(pair, bin)`, sampled
    /// at the nodes `(i + 1/2) stride h`.
    fn edge_response(
        fft: &SymmetricFft,
        coarse_h: f64,
        stride: usize,
        pairs: usize,
        mult: &(dyn Fn(usize, usize) -> C64 + Sync),
    ) -> EdgeTables {
        let grid = fft.grid;
        let h = grid.h();
        let nodes = grid.n / stride;
        let spectra: Vec<(Vec<C64>, Vec<C64>)> = (0..EDGE_ORDERS)
            .into_par_iter()
            .map(|m| {
                let mut one_sided = LineProfile::zeros(grid);
                let mut odd = LineProfile::zeros(grid);
                for i in 0..grid.n {
                    let v = C64::new(edge_model(m, grid.node(i), coarse_h), 0.0);
                    one_sided.values[grid.n + i] = v * h;
                    odd.values[grid.n + i] = v;
                    odd.values[grid.n - 1 - i] = -v;
                }
                let mut a = fft.embed(&one_sided);
                fft.forward_box(&mut a);
                let mut f = fft.embed(&odd);
                fft.forward_box(&mut f);
                (a, f)
            })
            .collect();
        let node = |i: usize| (stride * (2 * i + 1) - 1) / 2;
        let (adjoint, forward) = (0..pairs * EDGE_ORDERS)
            .into_par_iter()
            .map(|pm| {
                let (p, m) = (pm / EDGE_ORDERS, pm % EDGE_ORDERS);
                let mut acc: Vec<C64> =
                    spectra[m].0.iter().enumerate().map(|(bin, s)| mult(p, bin).conj() * s).collect();
                fft.inverse_box(&mut acc);
                let y = fft.extract(&acc);
                let adj = (0..nodes).map(|i| (y.pos(node(i)) - y.neg(node(i))) / h).collect();
                let mut acc: Vec<C64> =
                    spectra[m].1.iter().enumerate().map(|(bin, s)| mult(p, bin) * s).collect();
                fft.inverse_box(&mut acc);
                let y = fft.extract(&acc);
                let fwd = (0..nodes).rev().map(|i| y.neg(node(i))).chain((0..nodes).map(|i| y.pos(node(i)))).collect();
                (adj, fwd)
            })
            .unzip();
        EdgeTables { adjoint, forward }
    }

    /// Difference between a refined and the working discretisation for the edge models.
    fn edge_tables(&self) -> Result<&EdgeTables> {
        let tables = self.edge.get_or_init(|| {
            let n = self.cfg.n();
            let grid = self.grid();
            let h = grid.h();
            let coarse = Self::edge_response(&self.fft, h, 1, n * n, &|p, bin| self.multiplier(p / n, p % n, bin));
            let fine_grid = RadialGrid { r_max: grid.r_max, n: grid.n * EDGE_REFINE };
            let fine = SymmetricFft::new(fine_grid, self.opts.pad);
            let bins: Vec<usize> = (0..fine.m).filter(|&k| fine.xi(k) < 0.0).collect();
            let vals: Vec<nalgebra::DMatrix<C64>> = bins
                .par_iter()
                .map(|&k| f_value(&self.cfg, -fine.xi(k)).map(|(f, _)| f))
                .collect::<Result<_>>()
                .map_err(|e| e.to_string())?;
            let mut slot = vec![usize::MAX; fine.m];
            for (s, &k) in bins.iter().enumerate() {
                slot[k] = s;
            }
            let scale = C64::new(0.0, 2.0 * PI).inv();
            let fine_mult = |p: usize, bin: usize| {
                let (j, l) = (p / n, p % n);
                let w = negative_weight(&fine, bin);
                let mut v = C64::new(0.0, 0.0);
                if slot[bin] != usize::MAX {
                    v = vals[slot[bin]][(j, l)];
                    if j == l {
                        v += C64::new(0.0, 4.0 * PI);
                    }
                }
                let mut out = v * scale * w;
                if j == l {
                    out -= 2.0 * w;
                }
                out
            };
            let refined = Self::edge_response(&fine, h, EDGE_REFINE, n * n, &fine_mult);
            let diff = |f: &[Vec<C64>], c: &[Vec<C64>]| -> Vec<Vec<C64>> {
                f.iter().zip(c).map(|(f, c)| f.iter().zip(c).map(|(f, c)| f - c).collect()).collect()
            };
            Ok(EdgeTables {
                adjoint: diff(&refined.adjoint, &coarse.adjoint),
                forward: diff(&refined.forward, &coarse.forward),
            })
        });
        tables.as_ref().map_err(|e| Error::Resolution(e.clone()))
    }

    fn multiplier(&self, j: usize, k: usize, bin: usize) -> C64 {
        let mut v = self.remainder[j * self.cfg.n() + k][bin];
        if j == k {
            // −(1 − iℋ) has symbol −2 on the negative half-line
            v -= 2.0 * negative_weight(&self.fft, bin);
        }
        v
    }

    /// Largest `‖F̃(λ)‖` on the resolved band edge, for diagnostics.
    pub fn remainder_at_band_edge(&self) -> f64 {
        let n = self.cfg.n();
        let bin = self.fft.m / 2;
        let s: f64 = (0..n * n).map(|i| self.remainder[i][bin].norm_sqr()).sum();
        s.sqrt() * 2.0 * PI
    }

    fn check_source(&self, line: &LineProfile, spectrum: &[C64]) -> Result<()> {
        let n = line.n();
        let start = (0.9 * n as f64) as usize;
        let total: f64 = (0..n).map(|i| line.pos(i).norm()).sum();
        let tail: f64 = (start..n).map(|i| line.pos(i).norm()).sum();
        if total > 0.0 && tail > self.opts.tail_tol * total {
            return Err(Error::Resolution(format!(
                "visible tail truncation: {:.3e} of the source mass lies in the outer tenth of the grid",
                tail / total
            )));
        }
        let peak = spectrum.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let kmax = PI / self.fft.h();
        let edge = (0..spectrum.len())
            .filter(|&k| self.fft.xi(k).abs() > 0.8 * kmax)
            .map(|k| spectrum[k].norm())
            .fold(0.0, f64::max);
        if peak > 0.0 && edge > self.opts.spectral_tol * peak {
            return Err(Error::Resolution(format!(
                "source spectrum not resolved: relative amplitude {:.3e} near λ_max = {kmax:.3e}",
                edge / peak
            )));
        }
        Ok(())
    }

    /// Odd source densities `r M^{y_k}` about every centre.
    fn sources_from_scalar(&self, u: &ScalarField) -> Result<Vec<LineProfile>> {
        let grid = self.grid();
        let floor = ROUNDING_FLOOR * u.peak() * grid.r_max;
        self.cfg.centres.par_iter().map(|&y| u.radial_density(y, grid).map(|l| flush(l, floor))).collect()
    }

    fn sources_from_centred(&self, u: &CentredField) -> Result<Vec<LineProfile>> {
        let grid = self.grid();
        (0..self.cfg.n())
            .into_par_iter()
            .map(|k| u.radial_density(k, grid).map(|l| l.odd_extension_of_positive()))
            .collect()
    }

    fn spectra(&self, sources: &[LineProfile], check: bool) -> Result<Vec<Vec<C64>>> {
        sources
            .par_iter()
            .map(|g| {
                let mut spec = self.fft.embed(g);
                self.fft.forward_box(&mut spec);
                if check {
                    self.check_source(g, &spec)?;
                }
                Ok(spec)
            })
            .collect()
    }

    /// Numerators `Σ_k N_jk` for each `j`, from the FFT spectra of the sources.
    fn numerators(&self, spectra: &[Vec<C64>]) -> Vec<LineProfile> {
        let n = self.cfg.n();
        let m = self.fft.m;
        (0..n)
            .into_par_iter()
            .map(|j| {
                let mut acc = vec![C64::new(0.0, 0.0); m];
                for (k, spec) in spectra.iter().enumerate() {
                    for (bin, a) in acc.iter_mut().enumerate() {
                        *a += self.multiplier(j, k, bin) * spec[bin];
                    }
                }
                self.fft.inverse_box(&mut acc);
                self.fft.extract(&acc)
            })
            .collect()
    }

    /// Replaces the working-grid response to the even-order edge terms of the sources,
    /// whose odd extensions are not smooth, by the refined one.
    fn correct_odd_extension(&self, sources: &[LineProfile], nums: &mut [LineProfile]) -> Result<()> {
        let n = self.cfg.n();
        let coeffs: Vec<[C64; EDGE_ORDERS]> = sources.iter().map(Self::edge_coefficients).collect();
        let scale = sources.iter().flat_map(|g| g.values.iter()).map(|v| v.norm()).fold(0.0, f64::max);
        let even = |b: &[C64; EDGE_ORDERS]| (0..EDGE_ORDERS).step_by(2).map(|m| b[m].norm()).fold(0.0, f64::max);
        if coeffs.iter().all(|b| even(b) <= 1e-14 * scale) {
            return Ok(());
        }
        let table = &self.edge_tables()?.forward;
        for (j, num) in nums.iter_mut().enumerate() {
            for (k, b) in coeffs.iter().enumerate() {
                for m in (0..EDGE_ORDERS).step_by(2) {
                    let d = &table[(j * n + k) * EDGE_ORDERS + m];
                    for (v, dv) in num.values.iter_mut().zip(d) {
                        *v += b[m] * dv;
                    }
                }
            }
        }
        Ok(())
    }

    /// `Ω_jk u` as a profile anchored at `y_j`.
    pub fn omega_apply(&self, j: usize, k: usize, u: &ScalarField) -> Result<AnchoredProfile> {
        let n = self.cfg.n();
        if j >= n || k >= n {
            return Err(Error::InvalidArgument(format!("centre indices ({j}, {k}) out of range")));
        }
        let g = u.radial_density(self.cfg.centres[k], self.grid())?;
        let spec = self.spectra(&[g], true)?.remove(0);
        let m = self.fft.m;
        let mut acc: Vec<C64> = (0..m).map(|bin| self.multiplier(j, k, bin) * spec[bin]).collect();
        self.fft.inverse_box(&mut acc);
        Ok(AnchoredProfile::Numerator(self.fft.extract(&acc)))
    }

    fn plus(&self, u: &ScalarField) -> Result<CentredField> {
        let sources = self.sources_from_scalar(u)?;
        let spectra = self.spectra(&sources, true)?;
        let mut out = CentredField::from_free(&self.cfg.centres, u.clone());
        for (j, num) in self.numerators(&spectra).into_iter().enumerate() {
            out.anchored.push(Anchored { centre: j, profile: AnchoredProfile::Numerator(num) });
        }
        Ok(out)
    }

    /// `W^± u`.
    pub fn apply(&self, u: &ScalarField, sign: Sign) -> Result<CentredField> {
        match sign {
            Sign::Plus => self.plus(u),
            Sign::Minus => Ok(self.plus(&u.conj())?.conj()),
        }
    }

    fn plus_centred(&self, u: &CentredField) -> Result<CentredField> {
        self.check_centres(u)?;
        let sources = self.sources_from_centred(u)?;
        let spectra = self.spectra(&sources, false)?;
        let mut nums = self.numerators(&spectra);
        self.correct_odd_extension(&sources, &mut nums)?;
        let mut out = u.clone();
        for (j, num) in nums.into_iter().enumerate() {
            out.anchored.push(Anchored { centre: j, profile: AnchoredProfile::Numerator(num) });
        }
        Ok(out.compacted())
    }

    /// `W^±` applied to a field that already carries anchored pieces.
    pub fn apply_centred(&self, u: &CentredField, sign: Sign) -> Result<CentredField> {
        match sign {
            Sign::Plus => self.plus_centred(u),
            Sign::Minus => Ok(self.plus_centred(&u.conj())?.conj()),
        }
    }

    fn check_centres(&self, u: &CentredField) -> Result<()> {
        if u.centres != self.cfg.centres {
            return Err(Error::InvalidArgument("field is anchored to a different configuration".into()));
        }
        Ok(())
    }

    /// Coefficients of the edge models fitted to the first positive nodes of `t`.
    fn edge_coefficients(t: &LineProfile) -> [C64; EDGE_ORDERS] {
        let w = endpoint_taylor_weights();
        std::array::from_fn(|m| w[m].iter().enumerate().map(|(i, wi)| t.pos(i) * *wi).sum())
    }

    /// Midpoint samples `h t(ρ_i)` of the density on the positive half of the box.
    fn pairing_vector(&self, t: &LineProfile) -> Vec<C64> {
        let n = t.n();
        let h = self.grid().h();
        let mut line = LineProfile::zeros(t.grid);
        for i in 0..n {
            line.values[n + i] = t.pos(i) * h;
        }
        self.fft.embed(&line)
    }

    fn adjoint_from_densities(&self, densities: Vec<LineProfile>) -> Result<Vec<LineProfile>> {
        let n = self.cfg.n();
        let m = self.fft.m;
        let h = self.grid().h();
        let coeffs: Vec<[C64; EDGE_ORDERS]> = densities.iter().map(Self::edge_coefficients).collect();
        let table = &self.edge_tables()?.adjoint;
        let spectra: Vec<Vec<C64>> = densities
            .par_iter()
            .map(|t| {
                let mut b = self.pairing_vector(t);
                self.fft.forward_box(&mut b);
                b
            })
            .collect();
        Ok((0..n)
            .into_par_iter()
            .map(|k| {
                let mut acc = vec![C64::new(0.0, 0.0); m];
                for (j, spec) in spectra.iter().enumerate() {
                    for (bin, a) in acc.iter_mut().enumerate() {
                        *a += self.multiplier(j, k, bin).conj() * spec[bin];
                    }
                }
                self.fft.inverse_box(&mut acc);
                let y = self.fft.extract(&acc);
                let grid = self.grid();
                let mut out = LineProfile::zeros(grid);
                let nn = grid.n;
                for i in 0..nn {
                    let mut a = (y.pos(i) - y.neg(i)) / h;
                    for (j, b) in coeffs.iter().enumerate() {
                        for (m, bm) in b.iter().enumerate() {
                            if let Some(d) = table[(j * n + k) * EDGE_ORDERS + m].get(i) {
                                a += bm * d;
                            }
                        }
                    }
                    out.values[nn + i] = a;
                    out.values[nn - 1 - i] = -a;
                }
                out
            })
            .collect())
    }

    fn plus_adjoint(&self, v: &ScalarField) -> Result<CentredField> {
        let grid = self.grid();
        let floor = ROUNDING_FLOOR * v.peak() * grid.r_max;
        let densities: Vec<LineProfile> = self
            .cfg
            .centres
            .par_iter()
            .map(|&y| v.radial_density(y, grid).map(|l| flush(l, floor)))
            .collect::<Result<_>>()?;
        self.spectra(&densities, true)?;
        let mut out = CentredField::from_free(&self.cfg.centres, v.clone());
        for (k, num) in self.adjoint_from_densities(densities)?.into_iter().enumerate() {
            out.anchored.push(Anchored { centre: k, profile: AnchoredProfile::Numerator(num) });
        }
        Ok(out)
    }

    /// `(W^±)^* v`.
    pub fn adjoint_apply(&self, v: &ScalarField, sign: Sign) -> Result<CentredField> {
        match sign {
            Sign::Plus => self.plus_adjoint(v),
            Sign::Minus => Ok(self.plus_adjoint(&v.conj())?.conj()),
        }
    }

    fn plus_adjoint_centred(&self, v: &CentredField) -> Result<CentredField> {
        self.check_centres(v)?;
        let grid = self.grid();
        let densities: Vec<LineProfile> =
            (0..self.cfg.n()).into_par_iter().map(|k| v.radial_density(k, grid)).collect::<Result<_>>()?;
        let mut out = v.clone();
        for (k, num) in self.adjoint_from_densities(densities)?.into_iter().enumerate() {
            out.anchored.push(Anchored { centre: k, profile: AnchoredProfile::Numerator(num) });
        }
        Ok(out.compacted())
    }

    pub fn adjoint_apply_centred(&self, v: &CentredField, sign: Sign) -> Result<CentredField> {
        match sign {
            Sign::Plus => self.plus_adjoint_centred(v),
            Sign::Minus => Ok(self.plus_adjoint_centred(&v.conj())?.conj()),
        }
    }

    /// `⟨W^± u, v⟩`.
    pub fn pairing(&self, u: &ScalarField, v: &ScalarField, sign: Sign) -> Result<C64> {
        let wu = self.apply(u, sign)?;
        wu.inner(&CentredField::from_free(&self.cfg.centres, v.clone()))
    }
}

/// `W^± u` for a one-off application.
pub fn wave_apply(cfg: &Configuration, u: &ScalarField, sign: Sign, opts: WaveOptions) -> Result<CentredField> {
    WaveOperator::new(cfg, opts)?.apply(u, sign)
}

/// `(W^±)^* v` for a one-off application.
pub fn wave_adjoint_apply(cfg: &Configuration, v: &ScalarField, sign: Sign, opts: WaveOptions) -> Result<CentredField> {
    WaveOperator::new(cfg, opts)?.adjoint_apply(v, sign)
}

/// `Ω_jk u` for a one-off application.
pub fn omega_apply(
    cfg: &Configuration,
    j: usize,
    k: usize,
    u: &ScalarField,
    opts: WaveOptions,
) -> Result<AnchoredProfile> {
    WaveOperator::new(cfg, opts)?.omega_apply(j, k, u)
}

/// `W⁺u = u − M_u(|x|) + i ℋ(r M_u)(|x|)/|x|` for a single centre with `α = 0` at the origin.
pub fn resonant_closed_form(cfg: &Configuration, u: &ScalarField, opts: WaveOptions) -> Result<CentredField> {
    if cfg.n() != 1 || cfg.alphas[0] != 0.0 || dist(cfg.centres[0], [0.0; 3]) != 0.0 {
        return Err(Error::Precondition(
            "closed form needs one centre at the origin with zero strength".into(),
        ));
    }
    let g = u.radial_density([0.0; 3], opts.grid)?;
    let hg = hilbert_line(&g, opts.pad);
    let num = g.zip_with(&hg, |a, b| -(a - C64::i() * b));
    let mut out = CentredField::from_free(&cfg.centres, u.clone());
    out.push(0, AnchoredProfile::Numerator(num))?;
    Ok(out)
}

/// Profile values `N(ρ_i)/ρ_i` on the positive nodes.
pub fn profile_values(p: &AnchoredProfile, grid: RadialGrid) -> RadialProfile {
    RadialProfile::from_fn(grid, Parity::Even, |r| p.value(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Gaussian;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn opts() -> WaveOptions {
        WaveOptions::default()
    }

    fn gauss(amp: f64, a: f64, centre: Vec3) -> ScalarField {
        ScalarField::Gaussian(Gaussian::new(c(amp), c(a), centre).unwrap())
    }

    #[test]
    fn resonant_case_matches_closed_form() {
        let cfg = Configuration::single(0.0);
        let u = gauss(1.0, 0.8, [0.3, -0.2, 0.1]);
        let op = WaveOperator::new(&cfg, opts()).unwrap();
        let w = op.apply(&u, Sign::Plus).unwrap();
        let cf = resonant_closed_form(&cfg, &u, opts()).unwrap();
        let (AnchoredProfile::Numerator(a), AnchoredProfile::Numerator(b)) =
            (&w.anchored[0].profile, &cf.anchored[0].profile)
        else {
            panic!("expected sampled profiles")
        };
        let grid = opts().grid;
        let diff = (0..grid.n)
            .map(|i| ((a.pos(i) - b.pos(i)) / grid.node(i)).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "sup-norm difference {diff:e}");
    }

    #[test]
    fn isometry_without_bound_states() {
        for &alpha in &[0.0, 1.0, -1.0 / (4.0 * PI) + 0.3] {
            let cfg = Configuration::single(alpha);
            let op = WaveOperator::new(&cfg, opts()).unwrap();
            let u = gauss(1.0, 0.6, [0.4, 0.0, -0.3]);
            let w = op.apply(&u, Sign::Plus).unwrap();
            let nu = crate::field::inner_free(&u, &u).unwrap().re;
            let nw = w.norm_sq().unwrap();
            assert!((nw - nu).abs() < 1e-6 * nu, "alpha {alpha}: {nw} vs {nu}");
        }
    }

    #[test]
    fn adjoint_pairing_matches() {
        let cfg = Configuration::new(vec![[0.0, 0.0, 0.0], [1.5, 0.0, 0.0]], vec![0.5, 1.0]).unwrap();
        let op = WaveOperator::new(&cfg, opts()).unwrap();
        let u = gauss(1.0, 0.7, [0.2, 0.3, 0.0]);
        let v = gauss(0.8, 1.1, [1.0, -0.4, 0.2]);
        for sign in [Sign::Plus, Sign::Minus] {
            let lhs = op.pairing(&u, &v, sign).unwrap();
            let wv = op.adjoint_apply(&v, sign).unwrap();
            let rhs = CentredField::from_free(&cfg.centres, u.clone()).inner(&wv).unwrap();
            assert!((lhs - rhs).norm() < 1e-6 * lhs.norm(), "{sign:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn adjoint_inverts_on_the_left() {
        for &alpha in &[1.0, 0.0] {
            let cfg = Configuration::single(alpha);
            let op = WaveOperator::new(&cfg, opts()).unwrap();
            let u = gauss(1.0, 0.7, [0.3, 0.1, -0.2]);
            let nu = crate::field::inner_free(&u, &u).unwrap().re;
            let w = op.apply(&u, Sign::Plus).unwrap();
            let back = op.adjoint_apply_centred(&w, Sign::Plus).unwrap();
            let err = back.anchored_only().compacted().norm_sq().unwrap();
            assert!(err.sqrt() <= 1e-4 * nu.sqrt(), "alpha {alpha}: {:e}", (err / nu).sqrt());
        }
    }

    #[test]
    fn minus_is_conjugated_plus() {
        let cfg = Configuration::single(0.7);
        let op = WaveOperator::new(&cfg, opts()).unwrap();
        let u = ScalarField::Gaussian(Gaussian::new(C64::new(1.0, 0.5), C64::new(0.9, 0.3), [0.1, 0.0, 0.2]).unwrap());
        let a = op.apply(&u, Sign::Minus).unwrap();
        let b = op.apply(&u.conj(), Sign::Plus).unwrap().conj();
        let (AnchoredProfile::Numerator(x), AnchoredProfile::Numerator(y)) = (&a.anchored[0].profile, &b.anchored[0].profile)
        else {
            panic!()
        };
        assert_eq!(x.values, y.values);
    }

    #[test]
    fn rejects_wide_source() {
        let cfg = Configuration::single(0.0);
        let op = WaveOperator::new(&cfg, opts()).unwrap();
        let u = gauss(1.0, 1e-5, [0.0; 3]);
        assert!(matches!(op.apply(&u, Sign::Plus), Err(Error::Resolution(_))));
    }

    #[test]
    fn translation_op_group_law() {
        let a = TranslationOp { offset: [1.0, 2.0, 3.0] };
        let b = a.compose(&a.inverse());
        assert_eq!(b.offset, [0.0; 3]);
    }
}
