//! Scalar fields on R^3 and fields with profiles anchored at the centres.

use crate::config::{dist, norm, scale, sub, RadialGrid, Vec3};
use crate::error::{Error, Result};
use crate::profile::{LineProfile, Parity, RadialProfile};
use crate::quad::GaussLegendre;
use crate::radial;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

type C64 = Complex64;

const NEGLIGIBLE: f64 = 1e-17;

/// How fast a field decays away from its origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayClass {
    /// Below `1e-17` times the peak beyond `radius`.
    Schwartz { radius: f64 },
    /// Zero beyond `radius`.
    CompactSupport { radius: f64 },
    /// Bounded by `(|x|/scale)^(-rate)` for `|x| > scale`.
    PolynomialDecay { rate: f64, scale: f64 },
}

impl DecayClass {
    /// Radius beyond which the field is below `tol` relative to its peak.
    pub fn truncation_radius(&self, tol: f64) -> f64 {
        match *self {
            DecayClass::Schwartz { radius } | DecayClass::CompactSupport { radius } => radius,
            DecayClass::PolynomialDecay { rate, scale } => scale * tol.powf(-1.0 / rate),
        }
    }
}

/// `amp * exp(-a |x - centre|^2)` with `Re a > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian {
    pub amp: C64,
    pub a: C64,
    pub centre: Vec3,
}

impl Gaussian {
    pub fn new(amp: C64, a: C64, centre: Vec3) -> Result<Self> {
        if !(a.re > 0.0) {
            return Err(Error::InvalidArgument(format!("Gaussian needs Re a > 0, got {a}")));
        }
        Ok(Gaussian { amp, a, centre })
    }

    pub fn unit(centre: Vec3) -> Self {
        Gaussian { amp: C64::new(1.0, 0.0), a: C64::new(1.0, 0.0), centre }
    }

    pub fn eval(&self, x: Vec3) -> C64 {
        let r2 = {
            let d = sub(x, self.centre);
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
        };
        self.amp * (-self.a * r2).exp()
    }

    /// Closed-form spherical mean about `y` at radius `r`.
    pub fn spherical_mean(&self, y: Vec3, r: f64) -> C64 {
        let s = dist(y, self.centre);
        let a = self.a;
        if s == 0.0 {
            return self.amp * (-a * r * r).exp();
        }
        if r == 0.0 {
            return self.amp * (-a * s * s).exp();
        }
        let k = 2.0 * a * r * s;
        if k.norm() < 1e-3 {
            let k2 = k * k;
            let sinhc = 1.0 + k2 / 6.0 + k2 * k2 / 120.0 + k2 * k2 * k2 / 5040.0;
            return self.amp * (-a * (r * r + s * s)).exp() * sinhc;
        }
        let d = r - s;
        let p = r + s;
        self.amp * ((-a * d * d).exp() - (-a * p * p).exp()) / (2.0 * k)
    }

    pub fn peak(&self) -> f64 {
        self.amp.norm()
    }

    pub fn radius(&self) -> f64 {
        (-(NEGLIGIBLE.ln()) / self.a.re).sqrt()
    }

    /// Free evolution `exp(-i t H0)` in closed form.
    pub fn evolved(&self, t: f64) -> Gaussian {
        let w = 1.0 + C64::new(0.0, 4.0 * t) * self.a;
        Gaussian { amp: self.amp * w.powf(-1.5), a: self.a / w, centre: self.centre }
    }

    pub fn inner(&self, o: &Gaussian) -> C64 {
        let ac = self.a.conj();
        let s = ac + o.a;
        let d2 = {
            let d = sub(self.centre, o.centre);
            d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
        };
        self.amp.conj() * o.amp * (C64::new(PI, 0.0) / s).powf(1.5) * (-(ac * o.a / s) * d2).exp()
    }
}

pub type FieldFn = Arc<dyn Fn(Vec3) -> C64 + Send + Sync>;

/// A complex-valued function on R^3 with a decay tag.
#[derive(Clone)]
pub enum ScalarField {
    Gaussian(Gaussian),
    /// `profile(|x - centre|)`, profile even.
    Radial { centre: Vec3, profile: RadialProfile },
    Function { f: FieldFn, origin: Vec3, decay: DecayClass, peak: f64 },
    Sum(Vec<(C64, ScalarField)>),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Gaussian(g) => write!(f, "Gaussian({g:?})"),
            ScalarField::Radial { centre, profile } => {
                write!(f, "Radial(centre={centre:?}, n={})", profile.grid.n)
            }
            ScalarField::Function { origin, decay, .. } => {
                write!(f, "Function(origin={origin:?}, decay={decay:?})")
            }
            ScalarField::Sum(parts) => write!(f, "Sum({parts:?})"),
        }
    }
}

impl ScalarField {
    pub fn gaussian(amp: f64, a: f64, centre: Vec3) -> Self {
        ScalarField::Gaussian(Gaussian { amp: C64::new(amp, 0.0), a: C64::new(a, 0.0), centre })
    }

    pub fn function(
        f: impl Fn(Vec3) -> C64 + Send + Sync + 'static,
        origin: Vec3,
        decay: DecayClass,
        peak: f64,
    ) -> Self {
        ScalarField::Function { f: Arc::new(f), origin, decay, peak }
    }

    pub fn radial(centre: Vec3, profile: RadialProfile) -> Result<Self> {
        if profile.parity != Parity::Even {
            return Err(Error::InvalidArgument("radial field profile must be even".into()));
        }
        Ok(ScalarField::Radial { centre, profile })
    }

    pub fn eval(&self, x: Vec3) -> C64 {
        match self {
            ScalarField::Gaussian(g) => g.eval(x),
            ScalarField::Radial { centre, profile } => {
                let r = dist(x, *centre);
                if r > profile.grid.r_max {
                    C64::new(0.0, 0.0)
                } else {
                    profile.eval(r)
                }
            }
            ScalarField::Function { f, .. } => f(x),
            ScalarField::Sum(parts) => parts.iter().map(|(c, p)| c * p.eval(x)).sum(),
        }
    }

    /// A ball outside of which the field is negligible.
    pub fn support_ball(&self) -> (Vec3, f64) {
        match self {
            ScalarField::Gaussian(g) => (g.centre, g.radius()),
            ScalarField::Radial { centre, profile } => (*centre, profile.grid.r_max),
            ScalarField::Function { origin, decay, .. } => (*origin, decay.truncation_radius(1e-12)),
            ScalarField::Sum(parts) => {
                let balls: Vec<(Vec3, f64)> = parts.iter().map(|(_, p)| p.support_ball()).collect();
                let c = balls[0].0;
                let r = balls.iter().map(|(o, r)| dist(*o, c) + r).fold(0.0, f64::max);
                (c, r)
            }
        }
    }

    pub fn peak(&self) -> f64 {
        match self {
            ScalarField::Gaussian(g) => g.peak(),
            ScalarField::Radial { profile, .. } => {
                profile.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }
            ScalarField::Function { peak, .. } => *peak,
            ScalarField::Sum(parts) => parts.iter().map(|(c, p)| c.norm() * p.peak()).sum(),
        }
    }

    pub fn conj(&self) -> ScalarField {
        match self {
            ScalarField::Gaussian(g) => ScalarField::Gaussian(Gaussian {
                amp: g.amp.conj(),
                a: g.a.conj(),
                centre: g.centre,
            }),
            ScalarField::Radial { centre, profile } => {
                ScalarField::Radial { centre: *centre, profile: profile.conj() }
            }
            ScalarField::Function { f, origin, decay, peak } => {
                let f = f.clone();
                ScalarField::Function {
                    f: Arc::new(move |x| f(x).conj()),
                    origin: *origin,
                    decay: *decay,
                    peak: *peak,
                }
            }
            ScalarField::Sum(parts) => {
                ScalarField::Sum(parts.iter().map(|(c, p)| (c.conj(), p.conj())).collect())
            }
        }
    }

    pub fn scaled(&self, c: C64) -> ScalarField {
        match self {
            ScalarField::Gaussian(g) => {
                ScalarField::Gaussian(Gaussian { amp: g.amp * c, ..*g })
            }
            _ => ScalarField::Sum(vec![(c, self.clone())]),
        }
    }

    pub fn translated(&self, v: Vec3) -> ScalarField {
        let shift = |p: Vec3| [p[0] + v[0], p[1] + v[1], p[2] + v[2]];
        match self {
            ScalarField::Gaussian(g) => {
                ScalarField::Gaussian(Gaussian { centre: shift(g.centre), ..*g })
            }
            ScalarField::Radial { centre, profile } => {
                ScalarField::Radial { centre: shift(*centre), profile: profile.clone() }
            }
            ScalarField::Function { f, origin, decay, peak } => {
                let f = f.clone();
                ScalarField::Function {
                    f: Arc::new(move |x| f(sub(x, v))),
                    origin: shift(*origin),
                    decay: *decay,
                    peak: *peak,
                }
            }
            ScalarField::Sum(parts) => {
                ScalarField::Sum(parts.iter().map(|(c, p)| (*c, p.translated(v))).collect())
            }
        }
    }

    /// `(U_eps u)(x) = eps^(-3/2) u(x / eps)`.
    pub fn dilated(&self, eps: f64) -> ScalarField {
        let amp = eps.powf(-1.5);
        match self {
            ScalarField::Gaussian(g) => ScalarField::Gaussian(Gaussian {
                amp: g.amp * amp,
                a: g.a / (eps * eps),
                centre: scale(g.centre, eps),
            }),
            ScalarField::Radial { centre, profile } => {
                let grid = RadialGrid { r_max: profile.grid.r_max * eps, n: profile.grid.n };
                ScalarField::Radial {
                    centre: scale(*centre, eps),
                    profile: RadialProfile {
                        grid,
                        values: profile.values.iter().map(|v| v * amp).collect(),
                        parity: Parity::Even,
                    },
                }
            }
            ScalarField::Function { f, origin, decay, peak } => {
                let f = f.clone();
                let decay = match *decay {
                    DecayClass::Schwartz { radius } => DecayClass::Schwartz { radius: radius * eps },
                    DecayClass::CompactSupport { radius } => {
                        DecayClass::CompactSupport { radius: radius * eps }
                    }
                    DecayClass::PolynomialDecay { rate, scale } => {
                        DecayClass::PolynomialDecay { rate, scale: scale * eps }
                    }
                };
                ScalarField::Function {
                    f: Arc::new(move |x| f(scale(x, 1.0 / eps)) * amp),
                    origin: scale(*origin, eps),
                    decay,
                    peak: peak * amp,
                }
            }
            ScalarField::Sum(parts) => {
                ScalarField::Sum(parts.iter().map(|(c, p)| (*c, p.dilated(eps))).collect())
            }
        }
    }

    /// The field as a radial profile about `y`, when it is radial about `y`.
    pub fn radial_about(&self, y: Vec3) -> Option<Box<dyn Fn(f64) -> C64 + Send + Sync + '_>> {
        match self {
            ScalarField::Gaussian(g) if dist(g.centre, y) == 0.0 => {
                let g = *g;
                Some(Box::new(move |r| g.amp * (-g.a * r * r).exp()))
            }
            ScalarField::Radial { centre, profile } if dist(*centre, y) == 0.0 => {
                Some(Box::new(move |r| {
                    if r > profile.grid.r_max {
                        C64::new(0.0, 0.0)
                    } else {
                        profile.eval(r)
                    }
                }))
            }
            ScalarField::Sum(parts) => {
                let fs: Option<Vec<_>> =
                    parts.iter().map(|(c, p)| p.radial_about(y).map(|f| (*c, f))).collect();
                let fs = fs?;
                Some(Box::new(move |r| fs.iter().map(|(c, f)| c * f(r)).sum()))
            }
            _ => None,
        }
    }

    /// Spherical mean about `y` at radius `r`, in closed form when available.
    pub fn spherical_mean_at(&self, y: Vec3, r: f64) -> Option<C64> {
        match self {
            ScalarField::Gaussian(g) => Some(g.spherical_mean(y, r)),
            ScalarField::Radial { centre, profile } => {
                let d = dist(*centre, y);
                if d == 0.0 {
                    return Some(if r > profile.grid.r_max { C64::new(0.0, 0.0) } else { profile.eval(r) });
                }
                Some(two_centre_mean(profile, d, r))
            }
            ScalarField::Sum(parts) => {
                let mut acc = C64::new(0.0, 0.0);
                for (c, p) in parts {
                    acc += c * p.spherical_mean_at(y, r)?;
                }
                Some(acc)
            }
            ScalarField::Function { .. } => None,
        }
    }

    /// `r * M(r)` about `y` on the symmetric line of `grid` (odd).
    pub fn radial_density(&self, y: Vec3, grid: RadialGrid) -> Result<LineProfile> {
        let m = self.spherical_mean(y, grid)?;
        let mut line = m.to_line();
        let n = grid.n;
        for i in 0..n {
            let r = grid.node(i);
            line.values[n + i] *= r;
            line.values[n - 1 - i] *= -r;
        }
        Ok(line)
    }

    /// Spherical mean about `y` sampled on `grid`.
    pub fn spherical_mean(&self, y: Vec3, grid: RadialGrid) -> Result<RadialProfile> {
        if self.spherical_mean_at(y, grid.node(0)).is_some() {
            return Ok(RadialProfile::from_fn(grid, Parity::Even, |r| {
                self.spherical_mean_at(y, r).expect("closed form")
            }));
        }
        radial::spherical_mean(self, y, grid, radial::DEFAULT_ANGULAR_ORDER)
    }
}

/// Mean of `f(|x - c|)` over the sphere of radius `r` about a point at distance `d` from `c`.
fn two_centre_mean(profile: &RadialProfile, d: f64, r: f64) -> C64 {
    if r == 0.0 {
        return profile.eval(d);
    }
    let lo = (r - d).abs();
    let hi = (r + d).min(profile.grid.r_max);
    if hi <= lo {
        return C64::new(0.0, 0.0);
    }
    let rule = GaussLegendre::new(24);
    let panels = (((hi - lo) / (4.0 * profile.grid.h())).ceil() as usize).clamp(1, 400);
    let mut acc = C64::new(0.0, 0.0);
    for p in 0..panels {
        let a = lo + (hi - lo) * p as f64 / panels as f64;
        let b = lo + (hi - lo) * (p + 1) as f64 / panels as f64;
        acc += rule.integrate(a, b, |s| profile.eval(s) * s);
    }
    acc / (2.0 * r * d)
}

/// Profile of a piece anchored at a centre.
#[derive(Clone, Debug)]
pub enum AnchoredProfile {
    /// Value `N(rho) / rho` with the numerator `N` sampled on the symmetric line.
    Numerator(LineProfile),
    /// `coeff * exp(i z rho) / (4 pi rho)`.
    Green { z: C64, coeff: C64 },
}

impl AnchoredProfile {
    pub fn numerator(&self, rho: f64) -> C64 {
        match self {
            AnchoredProfile::Numerator(l) => l.eval(rho),
            AnchoredProfile::Green { z, coeff } => coeff * (C64::i() * z * rho).exp() / (4.0 * PI),
        }
    }

    /// Pointwise value at distance `rho > 0`; at `rho = 0` see [`Self::value_at_origin`].
    pub fn value(&self, rho: f64) -> C64 {
        if rho == 0.0 {
            return self.value_at_origin();
        }
        self.numerator(rho) / rho
    }

    /// Quadratic extrapolation from the three innermost nodes.
    pub fn value_at_origin(&self) -> C64 {
        let h = match self {
            AnchoredProfile::Numerator(l) => l.grid.h(),
            AnchoredProfile::Green { .. } => 1e-3,
        };
        let p = |i: f64| {
            let r = (i + 0.5) * h;
            self.numerator(r) / r
        };
        // nodes h/2, 3h/2, 5h/2 extrapolated to 0
        (15.0 * p(0.0) - 10.0 * p(1.0) + 3.0 * p(2.0)) / 8.0
    }

    pub fn conj(&self) -> AnchoredProfile {
        match self {
            AnchoredProfile::Numerator(l) => AnchoredProfile::Numerator(l.map(|v| v.conj())),
            AnchoredProfile::Green { z, coeff } => {
                AnchoredProfile::Green { z: -z.conj(), coeff: coeff.conj() }
            }
        }
    }

    pub fn scaled(&self, c: C64) -> AnchoredProfile {
        match self {
            AnchoredProfile::Numerator(l) => AnchoredProfile::Numerator(l.map(|v| v * c)),
            AnchoredProfile::Green { z, coeff } => AnchoredProfile::Green { z: *z, coeff: coeff * c },
        }
    }

    /// Numerator sampled on `grid` with its natural smooth extension to `rho < 0`.
    pub fn numerator_line(&self, grid: RadialGrid) -> LineProfile {
        match self {
            AnchoredProfile::Numerator(l) if l.grid == grid => l.clone(),
            _ => LineProfile::from_fn(grid, |x| self.numerator(x)),
        }
    }

    /// `∫_0^s N`.
    fn antiderivative(&self) -> Box<dyn Fn(f64) -> C64 + '_> {
        match self {
            AnchoredProfile::Numerator(l) => {
                let a = l.antiderivative();
                Box::new(move |s| a.eval(s))
            }
            AnchoredProfile::Green { z, coeff } => {
                let (z, coeff) = (*z, *coeff);
                Box::new(move |s| {
                    if z.norm() * s < 1e-6 {
                        coeff * s / (4.0 * PI) * (1.0 + C64::i() * z * s / 2.0)
                    } else {
                        coeff * ((C64::i() * z * s).exp() - 1.0) / (4.0 * PI * C64::i() * z)
                    }
                })
            }
        }
    }

    /// Radius beyond which the profile is negligible; `None` when it does not decay.
    pub fn extent(&self) -> Option<f64> {
        match self {
            AnchoredProfile::Numerator(l) => Some(l.grid.r_max),
            AnchoredProfile::Green { z, .. } => {
                if z.im > 0.0 {
                    Some(-(1e-18f64).ln() / z.im)
                } else {
                    None
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Anchored {
    pub centre: usize,
    pub profile: AnchoredProfile,
}

/// A free part plus profiles anchored at the centres of a configuration.
#[derive(Clone, Debug)]
pub struct CentredField {
    pub centres: Vec<Vec3>,
    pub free: Option<ScalarField>,
    pub anchored: Vec<Anchored>,
}

impl CentredField {
    pub fn from_free(centres: &[Vec3], u: ScalarField) -> Self {
        CentredField { centres: centres.to_vec(), free: Some(u), anchored: Vec::new() }
    }

    pub fn zero(centres: &[Vec3]) -> Self {
        CentredField { centres: centres.to_vec(), free: None, anchored: Vec::new() }
    }

    pub fn push(&mut self, centre: usize, profile: AnchoredProfile) -> Result<()> {
        if centre >= self.centres.len() {
            return Err(Error::InvalidArgument(format!("centre index {centre} out of range")));
        }
        self.anchored.push(Anchored { centre, profile });
        Ok(())
    }

    pub fn eval(&self, x: Vec3) -> C64 {
        let mut v = self.free.as_ref().map_or(C64::new(0.0, 0.0), |f| f.eval(x));
        for a in &self.anchored {
            v += a.profile.value(dist(x, self.centres[a.centre]));
        }
        v
    }

    pub fn eval_many(&self, xs: &[Vec3]) -> Vec<C64> {
        use rayon::prelude::*;
        xs.par_iter().map(|&x| self.eval(x)).collect()
    }

    pub fn anchored_only(&self) -> CentredField {
        CentredField { centres: self.centres.clone(), free: None, anchored: self.anchored.clone() }
    }

    pub fn conj(&self) -> CentredField {
        CentredField {
            centres: self.centres.clone(),
            free: self.free.as_ref().map(|f| f.conj()),
            anchored: self
                .anchored
                .iter()
                .map(|a| Anchored { centre: a.centre, profile: a.profile.conj() })
                .collect(),
        }
    }

    pub fn scaled(&self, c: C64) -> CentredField {
        CentredField {
            centres: self.centres.clone(),
            free: self.free.as_ref().map(|f| f.scaled(c)),
            anchored: self
                .anchored
                .iter()
                .map(|a| Anchored { centre: a.centre, profile: a.profile.scaled(c) })
                .collect(),
        }
    }

    pub fn add(&self, o: &CentredField) -> Result<CentredField> {
        if self.centres != o.centres {
            return Err(Error::InvalidArgument("fields anchored to different centres".into()));
        }
        let free = match (&self.free, &o.free) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(ScalarField::Sum(vec![
                (C64::new(1.0, 0.0), a.clone()),
                (C64::new(1.0, 0.0), b.clone()),
            ])),
        };
        let mut anchored = self.anchored.clone();
        anchored.extend(o.anchored.iter().cloned());
        Ok(CentredField { centres: self.centres.clone(), free, anchored })
    }

    /// Merge sampled pieces sharing a centre and grid into one.
    pub fn compacted(&self) -> CentredField {
        let mut out: Vec<Anchored> = Vec::new();
        for a in &self.anchored {
            if let AnchoredProfile::Numerator(l) = &a.profile {
                if let Some(existing) = out.iter_mut().find(|b| {
                    b.centre == a.centre
                        && matches!(&b.profile, AnchoredProfile::Numerator(m) if m.grid == l.grid)
                }) {
                    if let AnchoredProfile::Numerator(m) = &mut existing.profile {
                        for (x, y) in m.values.iter_mut().zip(&l.values) {
                            *x += y;
                        }
                    }
                    continue;
                }
            }
            out.push(a.clone());
        }
        CentredField { centres: self.centres.clone(), free: self.free.clone(), anchored: out }
    }

    /// `r * M(r)` of the field about centre `k`, sampled on the line of `grid`.
    ///
    /// Pieces anchored at `k` keep the smooth extension of their numerator; every
    /// other contribution is odd.
    pub fn radial_density(&self, k: usize, grid: RadialGrid) -> Result<LineProfile> {
        let yk = self.centres[k];
        let mut line = match &self.free {
            Some(f) => f.radial_density(yk, grid)?,
            None => LineProfile::zeros(grid),
        };
        let n = grid.n;
        for a in &self.anchored {
            if a.centre == k {
                let nl = a.profile.numerator_line(grid);
                for (x, y) in line.values.iter_mut().zip(&nl.values) {
                    *x += y;
                }
            } else {
                let d = dist(yk, self.centres[a.centre]);
                let phi = a.profile.antiderivative();
                for i in 0..n {
                    let r = grid.node(i);
                    let t = (phi(r + d) - phi((r - d).abs())) / (2.0 * d);
                    line.values[n + i] += t;
                    line.values[n - 1 - i] -= t;
                }
            }
        }
        Ok(line)
    }

    /// `<self, other>` (antilinear in `self`).
    pub fn inner(&self, other: &CentredField) -> Result<C64> {
        if self.centres != other.centres {
            return Err(Error::InvalidArgument("fields anchored to different centres".into()));
        }
        let mut acc = C64::new(0.0, 0.0);
        if let (Some(a), Some(b)) = (&self.free, &other.free) {
            acc += inner_free(a, b)?;
        }
        for a in &self.anchored {
            if let Some(b) = &other.free {
                acc += inner_anchored_free(&a.profile, self.centres[a.centre], b)?;
            }
            for b in &other.anchored {
                acc += self.inner_anchored(a, b)?;
            }
        }
        for b in &other.anchored {
            if let Some(a) = &self.free {
                acc += inner_anchored_free(&b.profile, self.centres[b.centre], a)?.conj();
            }
        }
        Ok(acc)
    }

    pub fn norm_sq(&self) -> Result<f64> {
        Ok(self.inner(self)?.re)
    }

    fn inner_anchored(&self, a: &Anchored, b: &Anchored) -> Result<C64> {
        if a.centre == b.centre {
            return inner_anchored_same(&a.profile, &b.profile);
        }
        let d = dist(self.centres[a.centre], self.centres[b.centre]);
        let ra = a.profile.extent().ok_or_else(|| {
            Error::InvalidArgument("anchored Green profile with real wavenumber is not square integrable".into())
        })?;
        b.profile.extent().ok_or_else(|| {
            Error::InvalidArgument("anchored Green profile with real wavenumber is not square integrable".into())
        })?;
        let phi = b.profile.antiderivative();
        let rule = GaussLegendre::new(16);
        let mut breaks = vec![0.0];
        let width = 0.25;
        let mut x = 0.0;
        while x < ra {
            let next = if x < d && x + width > d { d } else { (x + width).min(ra) };
            breaks.push(next);
            x = next;
        }
        let mut acc = C64::new(0.0, 0.0);
        for w in breaks.windows(2) {
            acc += rule.integrate(w[0], w[1], |r1| {
                a.profile.numerator(r1).conj() * (phi(r1 + d) - phi((r1 - d).abs()))
            });
        }
        Ok(acc * 2.0 * PI / d)
    }
}

fn inner_anchored_same(a: &AnchoredProfile, b: &AnchoredProfile) -> Result<C64> {
    match (a, b) {
        (AnchoredProfile::Green { z: z1, coeff: c1 }, AnchoredProfile::Green { z: z2, coeff: c2 }) => {
            let s = z2 - z1.conj();
            if !(s.im > 0.0) {
                return Err(Error::InvalidArgument(
                    "anchored Green profile with real wavenumber is not square integrable".into(),
                ));
            }
            Ok(c1.conj() * c2 * C64::i() / (4.0 * PI * s))
        }
        _ => {
            let grid = match (a, b) {
                (AnchoredProfile::Numerator(l), _) => l.grid,
                (_, AnchoredProfile::Numerator(l)) => l.grid,
                _ => unreachable!(),
            };
            let la = a.numerator_line(grid);
            let lb = b.numerator_line(grid);
            Ok(la.zip_with(&lb, |x, y| x.conj() * y).half_line_integral() * 4.0 * PI)
        }
    }
}

/// Grid used to sample spherical means for pairings with Green profiles.
fn pairing_grid(y: Vec3, u: &ScalarField) -> RadialGrid {
    let (c, r) = u.support_ball();
    let r_max = dist(y, c) + r + 1.0;
    RadialGrid::with_spacing(r_max, 0.01).expect("positive extent")
}

/// `<p, u>` for a profile anchored at `y` and a free field.
pub fn inner_anchored_free(p: &AnchoredProfile, y: Vec3, u: &ScalarField) -> Result<C64> {
    let grid = match p {
        AnchoredProfile::Numerator(l) => l.grid,
        AnchoredProfile::Green { .. } => pairing_grid(y, u),
    };
    let t = u.radial_density(y, grid)?;
    let f = p.numerator_line(grid).zip_with(&t, |a, b| a.conj() * b);
    Ok(f.half_line_integral() * 4.0 * PI)
}

/// `<u, v>` for free fields.
pub fn inner_free(u: &ScalarField, v: &ScalarField) -> Result<C64> {
    match (u, v) {
        (ScalarField::Gaussian(a), ScalarField::Gaussian(b)) => return Ok(a.inner(b)),
        (ScalarField::Sum(parts), _) => {
            let mut acc = C64::new(0.0, 0.0);
            for (c, p) in parts {
                acc += c.conj() * inner_free(p, v)?;
            }
            return Ok(acc);
        }
        (_, ScalarField::Sum(parts)) => {
            let mut acc = C64::new(0.0, 0.0);
            for (c, p) in parts {
                acc += c * inner_free(u, p)?;
            }
            return Ok(acc);
        }
        _ => {}
    }
    let (cu, _) = u.support_ball();
    if let (Some(fu), Some(fv)) = (u.radial_about(cu), v.radial_about(cu)) {
        let (_, ru) = u.support_ball();
        let (_, rv) = v.support_ball();
        let r_end = ru.min(rv);
        let rule = GaussLegendre::new(20);
        let panels = ((r_end / 0.25).ceil() as usize).max(1);
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..panels {
            let a = r_end * p as f64 / panels as f64;
            let b = r_end * (p + 1) as f64 / panels as f64;
            acc += rule.integrate(a, b, |r| fu(r).conj() * fv(r) * r * r);
        }
        return Ok(acc * 4.0 * PI);
    }
    crate::cubature::integrate_fields(&[u.support_ball(), v.support_ball()], |x| {
        u.eval(x).conj() * v.eval(x)
    })
}

pub fn l2_norm_free(u: &ScalarField) -> Result<f64> {
    Ok(inner_free(u, u)?.re.max(0.0).sqrt())
}

/// Unit vector helper.
pub fn direction(v: Vec3) -> Vec3 {
    let n = norm(v);
    if n == 0.0 {
        [0.0, 0.0, 1.0]
    } else {
        scale(v, 1.0 / n)
    }
}
