//! Green kernels, the boundary matrix, the spectral multiplier and bound states.

use crate::config::Configuration;
use crate::error::{Error, Result};
use crate::field::{AnchoredProfile, CentredField};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::io::Write;

type C64 = Complex64;

/// Relative determinant threshold for pole detection.
pub const POLE_THRESHOLD: f64 = 1e-10;
/// Largest condition number accepted from a dense solve.
pub const MAX_CONDITION: f64 = 1e13;

/// `e^{izr} / (4πr)`.
pub fn green_kernel(z: C64, r: f64) -> Result<C64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("green_kernel needs r > 0, got {r}")));
    }
    Ok((C64::i() * z * r).exp() / (4.0 * PI * r))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaMatrix {
    pub z: C64,
    pub entries: DMatrix<C64>,
}

pub fn gamma_build(cfg: &Configuration, z: C64) -> GammaMatrix {
    let n = cfg.n();
    let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for j in 0..n {
        m[(j, j)] = C64::new(cfg.alphas[j], 0.0) - C64::i() * z / (4.0 * PI);
        for k in 0..j {
            let d = cfg.distance(j, k);
            let v = -(C64::i() * z * d).exp() / (4.0 * PI * d);
            m[(j, k)] = v;
            m[(k, j)] = v;
        }
    }
    GammaMatrix { z, entries: m }
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols()).map(|c| m.column(c).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

impl GammaMatrix {
    pub fn det(&self) -> C64 {
        self.entries.clone().lu().determinant()
    }

    /// Product of the Euclidean row norms; scale for the pole test.
    pub fn scale(&self) -> f64 {
        self.entries.row_iter().map(|r| r.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).product()
    }

    /// Inverse by LU with partial pivoting together with the 1-norm condition number.
    pub fn inverse(&self) -> Result<(DMatrix<C64>, f64)> {
        let lu = self.entries.clone().lu();
        let det = lu.determinant();
        let scale = self.scale();
        let singular = || Error::Singular { z: self.z, det: det.norm(), cond: f64::INFINITY };
        if det.norm() < POLE_THRESHOLD * scale {
            let cond = lu.try_inverse().map_or(f64::INFINITY, |inv| one_norm(&self.entries) * one_norm(&inv));
            return Err(Error::Singular { z: self.z, det: det.norm(), cond });
        }
        let inv = lu.try_inverse().ok_or_else(singular)?;
        let cond = one_norm(&self.entries) * one_norm(&inv);
        if !(cond < MAX_CONDITION) {
            return Err(Error::Singular { z: self.z, det: det.norm(), cond });
        }
        Ok((inv, cond))
    }
}

/// `F(λ) = λ Γ(−λ)^{-1}` for `λ > 0`.
pub fn f_value(cfg: &Configuration, lambda: f64) -> Result<(DMatrix<C64>, f64)> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("multiplier needs λ > 0, got {lambda}")));
    }
    let (inv, cond) = gamma_build(cfg, C64::new(-lambda, 0.0)).inverse()?;
    Ok((inv * C64::new(lambda, 0.0), cond))
}

/// `‖F + 4πi I‖` in the Frobenius norm.
pub fn tail_residual(f: &DMatrix<C64>) -> f64 {
    let n = f.nrows();
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            let mut v = f[(j, k)];
            if j == k {
                v += C64::new(0.0, 4.0 * PI);
            }
            s += v.norm_sqr();
        }
    }
    s.sqrt()
}

#[derive(Clone, Debug)]
pub struct SpectralMultiplier {
    pub lambda_grid: Vec<f64>,
    pub values: Vec<DMatrix<C64>>,
    pub condition: Vec<f64>,
}

pub fn f_multiplier(cfg: &Configuration, lambda_grid: &[f64]) -> Result<SpectralMultiplier> {
    if lambda_grid.windows(2).any(|w| !(w[1] > w[0])) || lambda_grid.first().is_some_and(|&l| !(l > 0.0)) {
        return Err(Error::InvalidArgument("λ grid must be positive and strictly increasing".into()));
    }
    let out: Result<Vec<(DMatrix<C64>, f64)>> =
        lambda_grid.par_iter().map(|&l| f_value(cfg, l)).collect();
    let (values, condition) = out?.into_iter().unzip();
    Ok(SpectralMultiplier { lambda_grid: lambda_grid.to_vec(), values, condition })
}

impl SpectralMultiplier {
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|m| m.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `lambda, re_F_jk, im_F_jk, ..., condition`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.values.first().map_or(0, |m| m.nrows());
        let mut header = vec!["lambda".to_string()];
        for j in 0..n {
            for k in 0..n {
                header.push(format!("re_F_{}{}", j + 1, k + 1));
                header.push(format!("im_F_{}{}", j + 1, k + 1));
            }
        }
        header.push("condition".into());
        writeln!(w, "{}", header.join(","))?;
        for ((l, m), c) in self.lambda_grid.iter().zip(&self.values).zip(&self.condition) {
            let mut row = vec![format!("{l:.17e}")];
            for j in 0..n {
                for k in 0..n {
                    row.push(format!("{:.17e}", m[(j, k)].re));
                    row.push(format!("{:.17e}", m[(j, k)].im));
                }
            }
            row.push(format!("{c:.6e}"));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Starting scale `10^4 max(1, ‖α‖, 1/min d)`, doubled until the tail residual is below `tol`.
pub fn auto_lambda_max(cfg: &Configuration, tol: f64) -> Result<f64> {
    let inv_d = cfg.min_distance().map_or(0.0, |d| 1.0 / d);
    let mut lam = 1e4 * 1f64.max(cfg.alpha_norm()).max(inv_d);
    for _ in 0..64 {
        let ok = (0..4).all(|s| {
            f_value(cfg, lam * (1.0 + 0.25 * s as f64)).map(|(f, _)| tail_residual(&f) < tol).unwrap_or(false)
        });
        if ok {
            return Ok(lam);
        }
        lam *= 2.0;
    }
    Err(Error::Resolution(format!("multiplier tail above {tol} up to λ = {lam:.3e}")))
}

/// Geometric nodes on `[λ_min, λ_max]` merged with a uniform grid of spacing `dl` up to `uniform_max`.
pub fn default_lambda_grid(lambda_min: f64, lambda_max: f64, per_decade: usize, dl: f64, uniform_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let decades = (lambda_max / lambda_min).log10();
    let m = (decades * per_decade as f64).ceil() as usize;
    for i in 0..=m {
        out.push(lambda_min * (lambda_max / lambda_min).powf(i as f64 / m as f64));
    }
    let mut l = dl;
    while l <= uniform_max.min(lambda_max) {
        out.push(l);
        l += dl;
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    out
}

/// Eigenpair data of a bound state `ψ0 = Σ c_j G_{iλ0}^{y_j}`.
#[derive(Clone, Debug)]
pub struct BoundState {
    pub lambda0: f64,
    pub energy: f64,
    /// Unit Euclidean null vector of `Γ(iλ0)`.
    pub coeffs: Vec<C64>,
    /// `‖ψ0‖²`.
    pub norm_sq: f64,
}

impl BoundState {
    /// `ψ0` as a field anchored at the centres.
    pub fn field(&self, cfg: &Configuration) -> CentredField {
        let mut f = CentredField::zero(&cfg.centres);
        for (j, c) in self.coeffs.iter().enumerate() {
            f.push(j, AnchoredProfile::Green { z: C64::new(0.0, self.lambda0), coeff: *c })
                .expect("valid centre index");
        }
        f
    }
}

fn real_gamma(cfg: &Configuration, lambda: f64) -> DMatrix<f64> {
    let g = gamma_build(cfg, C64::new(0.0, lambda));
    g.entries.map(|v| v.re)
}

fn eigenvalues(cfg: &Configuration, lambda: f64) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(real_gamma(cfg, lambda)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Roots of `det Γ(iλ)` in `(0, λ_max]` from the sign changes of the ordered eigenvalues
/// of the real symmetric matrix `Γ(iλ)`.
pub fn find_bound_states(cfg: &Configuration, lambda_max: f64, tol: f64) -> Result<Vec<BoundState>> {
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda_max must be positive, got {lambda_max}")));
    }
    let n = cfg.n();
    let lo_ev = eigenvalues(cfg, 0.0);
    let hi_ev = eigenvalues(cfg, lambda_max);
    let mut states = Vec::new();
    for m in 0..n {
        if !(lo_ev[m] < 0.0 && hi_ev[m] > 0.0) {
            continue;
        }
        let (mut a, mut b) = (0.0, lambda_max);
        while b - a > tol * b.max(1.0) {
            let c = 0.5 * (a + b);
            if c <= a || c >= b {
                break;
            }
            if eigenvalues(cfg, c)[m] < 0.0 {
                a = c;
            } else {
                b = c;
            }
        }
        let root = if eigenvalues(cfg, b)[m].abs() < eigenvalues(cfg, a)[m].abs() { b } else { a };
        let eig = SymmetricEigen::new(real_gamma(cfg, root));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
        let v = eig.eigenvectors.column(idx[m]);
        let coeffs: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut norm_sq = 0.0;
        for j in 0..n {
            for k in 0..n {
                norm_sq += coeffs[j].re * coeffs[k].re * (-root * cfg.distance(j, k)).exp();
            }
        }
        norm_sq /= 8.0 * PI * root;
        states.push(BoundState { lambda0: root, energy: -root * root, coeffs, norm_sq });
    }
    if states.len() > n {
        return Err(Error::RootFinding(format!("found {} roots for {} centres", states.len(), n)));
    }
    states.sort_by(|a, b| b.lambda0.total_cmp(&a.lambda0));
    Ok(states)
}

/// Dimension of the null space of `Γ(iλ)` at tolerance `tol`.
pub fn null_space_dimension(cfg: &Configuration, lambda: f64, tol: f64) -> usize {
    let ev = eigenvalues(cfg, lambda);
    let scale = ev.iter().map(|v| v.abs()).fold(1.0, f64::max);
    ev.iter().filter(|v| v.abs() < tol * scale).count()
}

pub fn write_bound_states_csv<W: Write>(states: &[BoundState], n: usize, mut w: W) -> std::io::Result<()> {
    let mut header = vec!["lambda0".to_string(), "energy".to_string(), "norm_sq".to_string()];
    for j in 0..n {
        header.push(format!("c_{}", j + 1));
    }
    writeln!(w, "{}", header.join(","))?;
    for s in states {
        let mut row = vec![
            format!("{:.17e}", s.lambda0),
            format!("{:.17e}", s.energy),
            format!("{:.17e}", s.norm_sq),
        ];
        row.extend(s.coeffs.iter().map(|c| format!("{:.17e}", c.re)));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg2(alpha: f64, d: f64) -> Configuration {
        Configuration::new(vec![[0.0; 3], [d, 0.0, 0.0]], vec![alpha, alpha]).unwrap()
    }

    #[test]
    fn green_kernel_values() {
        assert!((green_kernel(C64::new(0.0, 0.0), 1.0).unwrap().re - 0.079_577_471_545_947_67).abs() < 1e-15);
        assert!((green_kernel(C64::i(), 1.0).unwrap().re - (-1.0f64).exp() / (4.0 * PI)).abs() < 1e-16);
        let a = green_kernel(C64::new(2.3, 0.0), 0.7).unwrap();
        let b = green_kernel(C64::new(-2.3, 0.0), 0.7).unwrap();
        assert!((a - b.conj()).norm() < 1e-16);
        assert!(green_kernel(C64::i(), 0.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        let g = gamma_build(&Configuration::single(0.0), C64::i());
        assert!((g.entries[(0, 0)] - C64::new(1.0 / (4.0 * PI), 0.0)).norm() < 1e-16);
        let g = gamma_build(&cfg2(0.0, 1.0), C64::new(0.0, 0.0));
        assert_eq!(g.entries[(0, 0)], C64::new(0.0, 0.0));
        assert!((g.entries[(0, 1)].re + 1.0 / (4.0 * PI)).abs() < 1e-16);
        let g = gamma_build(&Configuration::single(0.3), C64::new(0.0, 2.0));
        assert_eq!(g.entries[(0, 0)].im, 0.0);
        assert!((g.entries[(0, 0)].re - (0.3 + 2.0 / (4.0 * PI))).abs() < 1e-15);
    }

    #[test]
    fn multiplier_single_centre() {
        let cfg = Configuration::single(0.0);
        for &l in &[1e-3, 0.5, 7.0, 1e4] {
            let (f, _) = f_value(&cfg, l).unwrap();
            assert!((f[(0, 0)] - C64::new(0.0, -4.0 * PI)).norm() < 1e-12);
        }
        let cfg = Configuration::single(1.0);
        let (f, _) = f_value(&cfg, 2.0).unwrap();
        let exact = 2.0 / (C64::new(1.0, 2.0 / (4.0 * PI)));
        assert!((f[(0, 0)] - exact).norm() < 1e-14);
    }

    #[test]
    fn single_centre_bound_state() {
        let cfg = Configuration::single(-1.0 / (4.0 * PI));
        let s = find_bound_states(&cfg, 100.0, 1e-14).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].lambda0 - 1.0).abs() < 1e-10);
        assert!((s[0].energy + 1.0).abs() < 1e-9);
        assert!((s[0].norm_sq - 1.0 / (8.0 * PI)).abs() < 1e-12);
        assert!(find_bound_states(&Configuration::single(0.7), 100.0, 1e-14).unwrap().is_empty());
    }

    fn scalar_bisection(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if f(a) * f(c) <= 0.0 {
                b = c;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn two_centre_roots_match_factorized_oracle() {
        let alpha = -0.2;
        let cfg = cfg2(alpha, 1.0);
        let s = find_bound_states(&cfg, 200.0, 1e-15).unwrap();
        let plus = |l: f64| alpha + l / (4.0 * PI) - (-l).exp() / (4.0 * PI);
        let minus = |l: f64| alpha + l / (4.0 * PI) + (-l).exp() / (4.0 * PI);
        let mut oracle = Vec::new();
        for f in [&plus as &dyn Fn(f64) -> f64, &minus] {
            if f(1e-12) < 0.0 && f(200.0) > 0.0 {
                oracle.push(scalar_bisection(f, 1e-12, 200.0));
            }
        }
        oracle.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(s.len(), oracle.len());
        for (st, o) in s.iter().zip(&oracle) {
            assert!((st.lambda0 - o).abs() < 1e-10, "{} vs {}", st.lambda0, o);
            let g = gamma_build(&cfg, C64::new(0.0, st.lambda0)).entries;
            let c = nalgebra::DVector::from_vec(st.coeffs.clone());
            assert!((g * &c).norm() < 1e-10);
        }
        assert_eq!(null_space_dimension(&cfg, s[0].lambda0, 1e-9), 1);
    }

    #[test]
    fn auto_lambda_max_meets_tail() {
        let cfg = cfg2(0.4, 0.8);
        let l = auto_lambda_max(&cfg, 1e-3).unwrap();
        let (f, _) = f_value(&cfg, l).unwrap();
        assert!(tail_residual(&f) < 1e-3);
    }

    #[test]
    fn default_grid_is_increasing() {
        let g = default_lambda_grid(1e-3, 1e3, 10, 0.5, 20.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
