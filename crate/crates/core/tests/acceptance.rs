//! Acceptance suite: one PASS/FAIL line per criterion, with pinned tolerances and
//! runtime budgets. Exits non-zero if any criterion fails.

use num_complex::Complex64 as C64;
use pointwave::config::{Configuration, RadialGrid, Vec3};
use pointwave::cubature::CubatureSpec;
use pointwave::dynamics::{dispersive_fit, geometric_times, DynamicsOptions};
use pointwave::field::{l2_norm_free, AnchoredProfile, CentredField, ScalarField};
use pointwave::gamma::{auto_lambda_max, f_value, find_bound_states, tail_residual};
use pointwave::lpprobe::{boundedness_scan, geometric, mollified_f0, p1_blowup_scan, p3_blowup_scan};
use pointwave::profile::{Parity, RadialProfile};
use pointwave::radial::hilbert_transform;
use pointwave::resolvent::{abel_pairing_oracle, resolvent_apply, AbelOptions};
use pointwave::shrink::{rank_one_limit_check, weps_pairing, BandLimited, RadialPotential, RankOneOptions, WepsOptions};
use pointwave::shrink::resonance_function;
use pointwave::waveop::{resonant_closed_form, Sign, WaveOperator, WaveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn gaussians(seed: u64, n: usize) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let centre: Vec3 = [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
            ScalarField::gaussian(rng.random_range(0.5..1.5), rng.random_range(0.5..1.2), centre)
        })
        .collect()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn spectrum() -> Outcome {
    let tuned = find_bound_states(&Configuration::single(-1.0 / (4.0 * PI)), 100.0, 1e-14).map_err(err)?;
    let one = tuned.len() == 1 && (tuned[0].lambda0 - 1.0).abs() <= 1e-10 && (tuned[0].energy + 1.0).abs() <= 1e-10;
    let mut none = true;
    for alpha in [0.0, 0.3, 1.0, 10.0] {
        none &= find_bound_states(&Configuration::single(alpha), 100.0, 1e-14).map_err(err)?.is_empty();
    }
    let l0 = tuned.first().map_or(f64::NAN, |s| s.lambda0);
    Ok((one && none, format!("count {}, |λ0 − 1| = {:.2e} (tol 1e-10), none for α ≥ 0: {none}", tuned.len(), (l0 - 1.0).abs())))
}

fn multiplier_tail() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let n = rng.random_range(1..=4);
        let mut centres: Vec<Vec3> = vec![];
        while centres.len() < n {
            let c: Vec3 = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            if centres.iter().all(|d| pointwave::config::dist(*d, c) > 0.3) {
                centres.push(c);
            }
        }
        let alphas = (0..n).map(|_| rng.random_range(-0.5..1.0)).collect();
        let cfg = Configuration::new(centres, alphas).map_err(err)?;
        let lam = auto_lambda_max(&cfg, 1e-2).map_err(err)?;
        let (f, _) = f_value(&cfg, lam).map_err(err)?;
        worst = worst.max(tail_residual(&f));
    }
    Ok((worst < 1e-2, format!("max ‖F + 4πi I‖ = {worst:.2e} (tol 1e-2)")))
}

/// Halving schedule from 0.04 down to about 2e-5.
fn abel_options() -> AbelOptions {
    AbelOptions { eps_schedule: (0..12).map(|k| 0.04 / 2f64.powi(k)).collect(), ..AbelOptions::default() }
}

fn cross_validation() -> Outcome {
    let us = gaussians(3, 5);
    let vs = gaussians(4, 5);
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 1.0, -1.0 / (4.0 * PI) + 0.3] {
        let cfg = Configuration::single(alpha);
        let op = WaveOperator::new(&cfg, WaveOptions::default()).map_err(err)?;
        for (u, v) in us.iter().zip(&vs) {
            let got = op.pairing(u, v, Sign::Plus).map_err(err)?;
            let oracle = abel_pairing_oracle(&cfg, u, v, &abel_options()).map_err(err)?.value;
            worst = worst.max((got - oracle).norm() / oracle.norm());
        }
    }
    let cfg = Configuration::single(0.0);
    let op = WaveOperator::new(&cfg, WaveOptions::default()).map_err(err)?;
    let u = ScalarField::gaussian(1.0, 0.8, [0.3, -0.2, 0.1]);
    let w = op.apply(&u, Sign::Plus).map_err(err)?;
    let cf = resonant_closed_form(&cfg, &u, WaveOptions::default()).map_err(err)?;
    let (AnchoredProfile::Numerator(a), AnchoredProfile::Numerator(b)) = (&w.anchored[0].profile, &cf.anchored[0].profile)
    else {
        return Err("expected sampled profiles".into());
    };
    let grid = op.grid();
    let sup = (0..grid.n).map(|i| ((a.pos(i) - b.pos(i)) / grid.node(i)).norm()).fold(0.0, f64::max);
    Ok((
        worst < 1e-3 && sup < 1e-6,
        format!("max relative gap to Abel oracle {worst:.2e} (tol 1e-3), closed-form sup {sup:.2e} (tol 1e-6)"),
    ))
}

fn isometry_completeness() -> Outcome {
    let us = gaussians(5, 5);
    let mut worst: f64 = 0.0;
    for alpha in [0.0, 1.0, -1.0 / (4.0 * PI) + 0.3, -1.0 / (4.0 * PI)] {
        let op = WaveOperator::new(&Configuration::single(alpha), WaveOptions::default()).map_err(err)?;
        for u in &us {
            let nw = op.apply(u, Sign::Plus).map_err(err)?.norm_sq().map_err(err)?.sqrt();
            worst = worst.max((nw / l2_norm_free(u).map_err(err)? - 1.0).abs());
        }
    }
    let cfg = Configuration::single(-1.0 / (4.0 * PI));
    let op = WaveOperator::new(&cfg, WaveOptions::default()).map_err(err)?;
    let bs = &find_bound_states(&cfg, 100.0, 1e-14).map_err(err)?[0];
    let psi = bs.field(&cfg);
    let mut complete: f64 = 0.0;
    for u in &us {
        let uf = CentredField::from_free(&cfg.centres, u.clone());
        let ww = op.apply_centred(&op.adjoint_apply(u, Sign::Plus).map_err(err)?.compacted(), Sign::Plus).map_err(err)?;
        let overlap = psi.inner(&uf).map_err(err)? / bs.norm_sq;
        let diff = ww.add(&uf.scaled(C64::new(-1.0, 0.0))).map_err(err)?.add(&psi.scaled(overlap)).map_err(err)?;
        let rel = diff.compacted().norm_sq().map_err(err)?.max(0.0).sqrt() / l2_norm_free(u).map_err(err)?;
        complete = complete.max(rel);
    }
    let norm_ok = (bs.norm_sq - 1.0 / (8.0 * PI)).abs() < 1e-12;
    Ok((
        worst <= 1e-5 && complete <= 1e-3 && norm_ok,
        format!("max |‖Wu‖/‖u‖ − 1| = {worst:.2e} (tol 1e-5), ‖WW*u − P_ac u‖/‖u‖ = {complete:.2e} (tol 1e-3), ‖ψ0‖² = 1/(8π): {norm_ok}"),
    ))
}

fn lp_window() -> Outcome {
    let spec = CubatureSpec::default();
    let ps = [1.5, 2.0, 2.5];
    let family: Vec<ScalarField> =
        [0.5, 1.0, 2.0, 4.0].iter().map(|&a| ScalarField::gaussian(1.0, a, [0.2, -0.1, 0.3])).collect();
    let mut spread: f64 = 1.0;
    let mut finite = true;
    for alpha in [1.0, 0.0] {
        let op = WaveOperator::new(&Configuration::single(alpha), WaveOptions::default()).map_err(err)?;
        let scan = boundedness_scan(&op, &family, &ps, &spec).map_err(err)?;
        for s in &scan.summary {
            finite &= s.min_ratio.is_finite() && s.max_ratio.is_finite() && s.min_ratio > 0.0;
            spread = spread.max(s.max_ratio / s.min_ratio);
        }
    }
    let grid = RadialGrid { r_max: 512.0, n: 20480 };
    let f = mollified_f0(grid);
    let rep = p1_blowup_scan(&f, &geometric(32.0, 256.0, 8), &[1.0], &Configuration::single(0.0), &WaveOptions::default(), &spec)
        .map_err(err)?;
    let p1_target = 4.0 * rep.moment;
    let p1_gap = (rep.slope - p1_target).abs() / p1_target;
    let p3 = p3_blowup_scan(&Configuration::single(0.0), &ScalarField::gaussian(1.0, 1.0, [0.0; 3]), 1.0, &geometric(1e-4, 1e-3, 6), 0.1, &spec)
        .map_err(err)?;
    let p3_gap = (p3.slope - p3.predicted_slope).abs() / p3.predicted_slope;
    Ok((
        finite && spread <= 2.0 && p1_gap <= 0.05 && p3_gap <= 0.10,
        format!(
            "ratios finite: {finite}, family spread {spread:.3} (tol 2); p1 slope gap {p1_gap:.2e} vs 4∫r²f (tol 5%, ratio to (2/π)∫r²f = {:.3}); p3 slope gap {p3_gap:.2e} (tol 10%)",
            rep.slope / (2.0 / PI * rep.moment)
        ),
    ))
}

fn hilbert_identity() -> Outcome {
    let grid = RadialGrid { r_max: 512.0, n: 20480 };
    let f0 = RadialProfile::from_fn(grid, Parity::Even, |r| C64::new(1.0 / (1.0 + r * r), 0.0));
    let h = hilbert_transform(&f0, 1.0).map_err(err)?;
    let e = (0..grid.n)
        .filter(|&i| grid.node(i) <= grid.r_max / 2.0)
        .map(|i| {
            let r = grid.node(i);
            (h.values[i] - C64::new(r / (1.0 + r * r), 0.0)).norm()
        })
        .fold(0.0, f64::max);
    Ok((e < 1e-4, format!("max error {e:.2e} on [0, r_max/2] (tol 1e-4)")))
}

fn dispersive() -> Outcome {
    let u = ScalarField::gaussian(1.0, 1.0, [0.0; 3]);
    let times = geometric_times(1.0, 100.0, 4);
    let mut parts = vec![];
    let mut ok = true;
    for alpha in [1.0, 0.0] {
        let op = WaveOperator::new(&Configuration::single(alpha), DynamicsOptions::wave_options()).map_err(err)?;
        let fit = dispersive_fit(&op, &u, 2.5, &times, DynamicsOptions::default(), &CubatureSpec::default()).map_err(err)?;
        let rel = (fit.exponent + 0.3).abs() / 0.3;
        ok &= rel <= 0.2;
        parts.push(format!("α = {alpha}: {:.4} ({:.1}%)", fit.exponent, 100.0 * rel));
    }
    Ok((ok, format!("{} (target −0.3 ± 20%)", parts.join(", "))))
}

fn shrinking() -> Outcome {
    let v = RadialPotential::tuned_square_well(1.0).map_err(err)?;
    let a = resonance_function(&v).map_err(err)?.a;
    let a_gap = (a - 4.0 * (2.0 / PI).sqrt()).abs();
    let rank = rank_one_limit_check(&v, 1.0, &[0.2, 0.1, 0.05, 0.025], &RankOneOptions::default()).map_err(err)?;
    let u = BandLimited::new(1.0, 1.5, 1.0).map_err(err)?;
    let w = BandLimited::new(0.7, 1.2, 0.8).map_err(err)?;
    let weps = weps_pairing(&v, 0.005, &u, &w, &WepsOptions::default()).map_err(err)?;
    let wopts = WaveOptions { grid: RadialGrid { r_max: 1024.0, n: 40960 }, ..WaveOptions::default() };
    let op = WaveOperator::new(&Configuration::single(0.0), wopts).map_err(err)?;
    let target = op.pairing(&u.field(wopts.grid).map_err(err)?, &w.field(wopts.grid).map_err(err)?, Sign::Plus).map_err(err)?;
    let gap = (weps - target).norm() / target.norm();
    let residuals: Vec<String> = rank.rows.iter().map(|r| format!("{:.3}", r.residual)).collect();
    Ok((
        a_gap <= 1e-6 && rank.monotone && gap <= 0.02,
        format!(
            "|a − 4√(2/π)| = {a_gap:.2e} (tol 1e-6), residuals [{}] decreasing: {}, ε = 0.005 pairing gap {:.2}% (tol 2%)",
            residuals.join(", "),
            rank.monotone,
            100.0 * gap
        ),
    ))
}

fn symmetry() -> Outcome {
    let cfg = Configuration::new(vec![[0.0; 3], [1.2, -0.3, 0.4]], vec![0.7, 0.2]).map_err(err)?;
    let op = WaveOperator::new(&cfg, WaveOptions::default()).map_err(err)?;
    let u = ScalarField::Gaussian(
        pointwave::field::Gaussian::new(C64::new(1.0, 0.5), C64::new(0.9, 0.3), [0.1, 0.0, 0.2]).map_err(err)?,
    );
    let minus = op.apply(&u, Sign::Minus).map_err(err)?;
    let plus = op.apply(&u.conj(), Sign::Plus).map_err(err)?.conj();
    let bit_exact = minus.anchored.len() == plus.anchored.len()
        && minus.anchored.iter().zip(&plus.anchored).all(|(a, b)| match (&a.profile, &b.profile) {
            (AnchoredProfile::Numerator(x), AnchoredProfile::Numerator(y)) => x.values == y.values,
            _ => false,
        });

    let shift = [0.7, -1.1, 0.25];
    let moved = WaveOperator::new(&cfg.translated(shift), WaveOptions::default()).map_err(err)?;
    let wu = op.apply(&u, Sign::Plus).map_err(err)?;
    let wu_moved = moved.apply(&u.translated(shift), Sign::Plus).map_err(err)?;
    let pts: Vec<Vec3> = vec![[0.3, 0.2, -0.1], [1.0, -0.5, 0.5], [-0.8, 0.4, 1.3], [2.5, 0.0, 0.0]];
    let mut trans: f64 = 0.0;
    for x in &pts {
        let a = wu.eval(*x);
        let b = wu_moved.eval([x[0] + shift[0], x[1] + shift[1], x[2] + shift[2]]);
        trans = trans.max((a - b).norm() / a.norm().max(1e-3));
    }

    let real_u = ScalarField::gaussian(1.0, 0.8, [0.2, 0.1, 0.0]);
    let mut imag: f64 = 0.0;
    for mu in [0.4, 1.0, 2.5] {
        let r = resolvent_apply(&cfg, C64::new(0.0, mu), &real_u).map_err(err)?;
        for x in &pts {
            let v = r.eval(*x);
            imag = imag.max(v.im.abs() / v.norm().max(1e-300));
        }
    }
    Ok((
        bit_exact && trans < 1e-10 && imag < 1e-12,
        format!("W⁻ = CW⁺C bit-exact: {bit_exact}; translation gap {trans:.2e} (tol 1e-10); max |Im R(−μ²)u|/|R(−μ²)u| = {imag:.2e} (tol 1e-12)"),
    ))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "spectrum, one centre", budget: Duration::from_secs(1), run: spectrum },
        Criterion { id: 2, name: "multiplier tail", budget: Duration::from_secs(10), run: multiplier_tail },
        Criterion { id: 3, name: "wave-operator cross-validation", budget: Duration::from_secs(300), run: cross_validation },
        Criterion { id: 4, name: "isometry and completeness", budget: Duration::from_secs(300), run: isometry_completeness },
        Criterion { id: 5, name: "L^p window", budget: Duration::from_secs(600), run: lp_window },
        Criterion { id: 6, name: "Hilbert-transform identity", budget: Duration::from_secs(60), run: hilbert_identity },
        Criterion { id: 7, name: "dispersive exponent", budget: Duration::from_secs(900), run: dispersive },
        Criterion { id: 8, name: "shrinking limit", budget: Duration::from_secs(1200), run: shrinking },
        Criterion { id: 9, name: "symmetry suite", budget: Duration::from_secs(120), run: symmetry },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let (pass, detail) = match outcome {
            Ok((ok, d)) => (ok && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {}; {:.2} s (budget {} s)",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            format!("{}: {detail}", c.name),
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
