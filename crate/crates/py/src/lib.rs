//! Python bindings. Configurations are passed as `(centres, alphas)` with centres a list of
//! `(x, y, z)` triples; Gaussian data as `(amp, a, (x, y, z))` for `amp · exp(−a|x − c|²)`.

use num_complex::Complex64;
use pointwave::config::{Configuration, Vec3};
use pointwave::cubature::CubatureSpec;
use pointwave::dynamics::{dispersive_fit, geometric_times, DynamicsOptions};
use pointwave::error::Error;
use pointwave::field::{l2_norm_free, ScalarField};
use pointwave::gamma::{auto_lambda_max, f_value, find_bound_states, tail_residual};
use pointwave::shrink::{rank_one_limit_check, resonance_function, RadialPotential, RankOneOptions};
use pointwave::waveop::{Sign, WaveOperator, WaveOptions};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

type Gauss = (f64, f64, (f64, f64, f64));

fn to_py(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn config(centres: Vec<(f64, f64, f64)>, alphas: Vec<f64>) -> PyResult<Configuration> {
    Configuration::new(centres.into_iter().map(|(x, y, z)| [x, y, z]).collect(), alphas).map_err(to_py)
}

fn gaussian((amp, a, (x, y, z)): Gauss) -> PyResult<ScalarField> {
    if !(a > 0.0) {
        return Err(PyValueError::new_err(format!("Gaussian width must be positive, got {a}")));
    }
    let c: Vec3 = [x, y, z];
    Ok(ScalarField::gaussian(amp, a, c))
}

fn sign(s: &str) -> PyResult<Sign> {
    match s {
        "plus" | "+" => Ok(Sign::Plus),
        "minus" | "-" => Ok(Sign::Minus),
        _ => Err(PyValueError::new_err(format!("sign must be 'plus' or 'minus', got {s:?}"))),
    }
}

/// Bound states as `(lambda0, energy, norm_sq)` with `E = −λ0²`.
#[pyfunction]
#[pyo3(signature = (centres, alphas, lambda_max = 100.0, tol = 1e-14))]
fn bound_states(centres: Vec<(f64, f64, f64)>, alphas: Vec<f64>, lambda_max: f64, tol: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let cfg = config(centres, alphas)?;
    let states = find_bound_states(&cfg, lambda_max, tol).map_err(to_py)?;
    Ok(states.iter().map(|s| (s.lambda0, s.energy, s.norm_sq)).collect())
}

/// `(λ_max, ‖F(λ_max) + 4πi I‖)` at the automatically chosen `λ_max`.
#[pyfunction]
#[pyo3(signature = (centres, alphas, tol = 1e-2))]
fn multiplier_tail(centres: Vec<(f64, f64, f64)>, alphas: Vec<f64>, tol: f64) -> PyResult<(f64, f64)> {
    let cfg = config(centres, alphas)?;
    let lam = auto_lambda_max(&cfg, tol).map_err(to_py)?;
    let (f, _) = f_value(&cfg, lam).map_err(to_py)?;
    Ok((lam, tail_residual(&f)))
}

/// `⟨W^± u, v⟩` for Gaussian data.
#[pyfunction]
#[pyo3(signature = (centres, alphas, u, v, sign = "plus"))]
fn wave_pairing(centres: Vec<(f64, f64, f64)>, alphas: Vec<f64>, u: Gauss, v: Gauss, sign: &str) -> PyResult<Complex64> {
    let cfg = config(centres, alphas)?;
    let op = WaveOperator::new(&cfg, WaveOptions::default()).map_err(to_py)?;
    op.pairing(&gaussian(u)?, &gaussian(v)?, self::sign(sign)?).map_err(to_py)
}

/// `‖W^± u‖₂ / ‖u‖₂`.
#[pyfunction]
#[pyo3(signature = (centres, alphas, u, sign = "plus"))]
fn norm_ratio(centres: Vec<(f64, f64, f64)>, alphas: Vec<f64>, u: Gauss, sign: &str) -> PyResult<f64> {
    let cfg = config(centres, alphas)?;
    let op = WaveOperator::new(&cfg, WaveOptions::default()).map_err(to_py)?;
    let u = gaussian(u)?;
    let w = op.apply(&u, self::sign(sign)?).map_err(to_py)?;
    Ok(w.norm_sq().map_err(to_py)?.sqrt() / l2_norm_free(&u).map_err(to_py)?)
}

/// Fitted decay exponent of `‖e^{−itH}P_ac u‖_p` over geometric times in `[t_min, t_max]`.
#[pyfunction]
#[pyo3(signature = (centres, alphas, u, p = 2.5, t_min = 1.0, t_max = 100.0, per_decade = 4))]
fn dispersive_exponent(
    centres: Vec<(f64, f64, f64)>,
    alphas: Vec<f64>,
    u: Gauss,
    p: f64,
    t_min: f64,
    t_max: f64,
    per_decade: usize,
) -> PyResult<f64> {
    let cfg = config(centres, alphas)?;
    let op = WaveOperator::new(&cfg, DynamicsOptions::wave_options()).map_err(to_py)?;
    let times = geometric_times(t_min, t_max, per_decade);
    let fit = dispersive_fit(&op, &gaussian(u)?, p, &times, DynamicsOptions::default(), &CubatureSpec::default())
        .map_err(to_py)?;
    Ok(fit.exponent)
}

/// `a = ∫Vφ` for a square well; the depth defaults to the resonant value.
#[pyfunction]
#[pyo3(signature = (radius = 1.0, depth = None))]
fn resonance_constant(radius: f64, depth: Option<f64>) -> PyResult<f64> {
    let v = match depth {
        Some(d) => RadialPotential::square_well(d, radius),
        None => RadialPotential::tuned_square_well(radius),
    }
    .map_err(to_py)?;
    Ok(resonance_function(&v).map_err(to_py)?.a)
}

/// Rank-one residuals `(ε, residual)` for the resonant square well.
#[pyfunction]
#[pyo3(signature = (eps_list, radius = 1.0, lam = 1.0, seed = 7))]
fn rank_one_residuals(eps_list: Vec<f64>, radius: f64, lam: f64, seed: u64) -> PyResult<Vec<(f64, f64)>> {
    let v = RadialPotential::tuned_square_well(radius).map_err(to_py)?;
    let opts = RankOneOptions { seed, ..RankOneOptions::default() };
    let rep = rank_one_limit_check(&v, lam, &eps_list, &opts).map_err(to_py)?;
    Ok(rep.rows.iter().map(|r| (r.eps, r.residual)).collect())
}

/// Adds the module's functions to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bound_states, m)?)?;
    m.add_function(wrap_pyfunction!(multiplier_tail, m)?)?;
    m.add_function(wrap_pyfunction!(wave_pairing, m)?)?;
    m.add_function(wrap_pyfunction!(norm_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(dispersive_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(resonance_constant, m)?)?;
    m.add_function(wrap_pyfunction!(rank_one_residuals, m)?)?;
    Ok(())
}

#[pymodule]
fn pointwave_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
