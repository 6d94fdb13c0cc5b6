//! Configurations of point interactions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub type Vec3 = [f64; 3];

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub fn dist(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Centres `y_j` and strengths `alpha_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub centres: Vec<Vec3>,
    pub alphas: Vec<f64>,
}

impl Configuration {
    pub fn new(centres: Vec<Vec3>, alphas: Vec<f64>) -> Result<Self> {
        let cfg = Configuration { centres, alphas };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn single(alpha: f64) -> Self {
        Configuration { centres: vec![[0.0; 3]], alphas: vec![alpha] }
    }

    fn validate(&self) -> Result<()> {
        if self.centres.is_empty() {
            return Err(Error::InvalidConfig("at least one centre is required".into()));
        }
        if self.centres.len() != self.alphas.len() {
            return Err(Error::InvalidConfig(format!(
                "length mismatch: {} centres but {} alphas",
                self.centres.len(),
                self.alphas.len()
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite alpha {a}")));
        }
        if self.centres.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidConfig("non-finite centre coordinate".into()));
        }
        for j in 0..self.n() {
            for k in 0..j {
                if self.distance(j, k) == 0.0 {
                    return Err(Error::InvalidConfig(format!("duplicate centres ({k} and {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: Configuration = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("cannot parse configuration: {e}")))?;
        raw.validate()?;
        Ok(raw)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    pub fn n(&self) -> usize {
        self.centres.len()
    }

    pub fn distance(&self, j: usize, k: usize) -> f64 {
        dist(self.centres[j], self.centres[k])
    }

    pub fn min_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for j in 0..self.n() {
            for k in 0..j {
                let d = self.distance(j, k);
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }

    pub fn max_distance(&self) -> f64 {
        let mut best = 0.0f64;
        for j in 0..self.n() {
            for k in 0..j {
                best = best.max(self.distance(j, k));
            }
        }
        best
    }

    pub fn alpha_norm(&self) -> f64 {
        self.alphas.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// All centres moved by `offset`.
    pub fn translated(&self, offset: Vec3) -> Self {
        Configuration {
            centres: self.centres.iter().map(|&c| add(c, offset)).collect(),
            alphas: self.alphas.clone(),
        }
    }

    /// Configuration with centres `y/eps` and strengths `eps*alpha`.
    pub fn dilated(&self, eps: f64) -> Self {
        Configuration {
            centres: self.centres.iter().map(|&c| scale(c, 1.0 / eps)).collect(),
            alphas: self.alphas.iter().map(|a| a * eps).collect(),
        }
    }
}

/// Staggered radial grid `r_i = (i + 1/2) h`, `h = r_max / n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialGrid {
    pub r_max: f64,
    pub n: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidArgument(format!("r_max must be positive, got {r_max}")));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid needs n >= 2, got {n}")));
        }
        Ok(RadialGrid { r_max, n })
    }

    /// Grid with spacing close to `h` covering `[0, r_max]`.
    pub fn with_spacing(r_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("spacing must be positive, got {h}")));
        }
        Self::new(r_max, (r_max / h).round().max(2.0) as usize)
    }

    pub fn h(&self) -> f64 {
        self.r_max / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }
}

pub fn build_grid(r_max: f64, n: usize) -> Result<RadialGrid> {
    RadialGrid::new(r_max, n)
}

pub fn load_config(document: &str) -> Result<Configuration> {
    Configuration::from_json_str(document)
}
