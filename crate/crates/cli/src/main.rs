use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64 as C64;
use pointwave::config::{Configuration, RadialGrid, Vec3};
use pointwave::cubature::CubatureSpec;
use pointwave::dynamics::{admissible_q, dispersive_fit, geometric_times, strichartz_window_norm, DynamicsOptions};
use pointwave::error::{Error, Result};
use pointwave::field::{l2_norm_free, AnchoredProfile, ScalarField};
use pointwave::gamma::{find_bound_states, write_bound_states_csv};
use pointwave::lpprobe::{boundedness_scan, geometric, mollified_f0, p1_blowup_scan, p3_blowup_scan};
use pointwave::report::{cell, emit_report, Format, Report, Table};
use pointwave::resolvent::resolvent_charges;
use pointwave::shrink::{rank_one_limit_check, resonance_function, RadialPotential, RankOneOptions};
use pointwave::waveop::{Sign, WaveOperator, WaveOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "pointwave", version, about = "Point-interaction wave operators: spectra, L^p probes, dispersion, shrinking potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration JSON: {"centres": [[x, y, z], ...], "alphas": [...]}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for <command>.csv and <command>.json.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomized probe bases.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Gaussian test datum amp · exp(−a|x − c|²): amplitude.
    #[arg(long, global = true, default_value_t = 1.0)]
    amp: f64,
    /// Gaussian width parameter a.
    #[arg(long, global = true, default_value_t = 1.0)]
    width: f64,
    /// Gaussian centre "x,y,z".
    #[arg(long, global = true, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 0.0, 0.0])]
    centre: Vec<f64>,
    /// Radial grid extent.
    #[arg(long, global = true)]
    r_max: Option<f64>,
    /// Radial grid nodes.
    #[arg(long, global = true)]
    nodes: Option<usize>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SignArg {
    Plus,
    Minus,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bound states of the point-interaction Hamiltonian.
    Spectrum {
        /// Upper end of the λ search (default: from the configuration scales).
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long, default_value_t = 1e-14)]
        root_tol: f64,
    },
    /// Charges of the resolvent correction at z = iμ on the Gaussian datum.
    Resolvent {
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
    },
    /// W^± applied to the Gaussian datum: anchored profiles and the norm ratio.
    Waveop {
        #[arg(long, value_enum, default_value_t = SignArg::Plus)]
        sign: SignArg,
        /// Keep every k-th grid node in the profile table.
        #[arg(long, default_value_t = 40)]
        stride: usize,
        #[arg(long, default_value_t = 1e-10)]
        tail_tol: f64,
    },
    /// ‖W⁺u‖_p/‖u‖_p over a dilation family of Gaussians.
    LpScan {
        #[arg(long, value_delimiter = ',', default_values_t = [1.5, 2.0, 2.5])]
        p: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 4.0])]
        widths: Vec<f64>,
    },
    /// L¹ growth of (W⁺ − 1) on rescaled data, and its limit density.
    P1Probe {
        #[arg(long, value_delimiter = ',', default_values_t = [32.0, 64.0, 128.0, 256.0])]
        r_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
        eps_list: Vec<f64>,
    },
    /// Logarithmic L³ divergence of the resolvent difference near a centre.
    P3Probe {
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1e-4, 1e-3])]
        delta_range: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        shells: usize,
        #[arg(long, default_value_t = 0.1)]
        delta0: f64,
    },
    /// Decay exponent of ‖e^{−itH}P_ac u‖_p.
    Disperse {
        #[arg(long, default_value_t = 2.5)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        t_min: f64,
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
        #[arg(long, default_value_t = 4)]
        per_decade: usize,
        #[arg(long, default_value_t = 1e-2)]
        mass_tol: f64,
    },
    /// Windowed L^q_t L^p_x norms for the admissible pair of p.
    Strichartz {
        #[arg(long, default_value_t = 2.5)]
        p: f64,
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
        #[arg(long, default_value_t = 1e-2)]
        mass_tol: f64,
    },
    /// Rank-one limit of the scaled Lippmann–Schwinger inverse for a square well.
    Shrink {
        /// Well depth (default: the resonant depth −(π/(2R))²).
        #[arg(long, allow_negative_numbers = true)]
        well_depth: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        well_radius: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05, 0.025])]
        eps_list: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value_t = 8)]
        probes: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum { .. } => "spectrum",
            Command::Resolvent { .. } => "resolvent",
            Command::Waveop { .. } => "waveop",
            Command::LpScan { .. } => "lp-scan",
            Command::P1Probe { .. } => "p1-probe",
            Command::P3Probe { .. } => "p3-probe",
            Command::Disperse { .. } => "disperse",
            Command::Strichartz { .. } => "strichartz",
            Command::Shrink { .. } => "shrink",
        }
    }
}

fn load_config(common: &Common) -> Result<Configuration> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("--config is required for this command".into()))?;
    Configuration::load(path).map_err(|e| match e {
        Error::Io(io) => Error::InvalidConfig(format!("{}: {io}", path.display())),
        other => other,
    })
}

fn datum(common: &Common) -> Result<ScalarField> {
    if !(common.width > 0.0) {
        return Err(Error::InvalidArgument(format!("--width must be positive, got {}", common.width)));
    }
    let c: Vec3 = [common.centre[0], common.centre[1], common.centre[2]];
    Ok(ScalarField::gaussian(common.amp, common.width, c))
}

fn grid(common: &Common, default: RadialGrid) -> Result<RadialGrid> {
    RadialGrid::new(common.r_max.unwrap_or(default.r_max), common.nodes.unwrap_or(default.n))
}

fn wave_options(common: &Common, default: WaveOptions) -> Result<WaveOptions> {
    Ok(WaveOptions { grid: grid(common, default.grid)?, ..default })
}

fn csv_table(write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Table> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Table::from_csv(&String::from_utf8_lossy(&buf))
}

fn with_wave_tolerances(r: Report, o: &WaveOptions) -> Report {
    r.tolerance("spectral_tol", o.spectral_tol)
        .tolerance("tail_tol", o.tail_tol)
        .tolerance("grid_r_max", o.grid.r_max)
        .tolerance("grid_n", o.grid.n as f64)
        .tolerance("pad", o.pad as f64)
}

fn run(cmd: &Command, common: &Common) -> Result<Report> {
    let spec = CubatureSpec::default();
    let name = cmd.name();
    match cmd {
        Command::Spectrum { lambda_max, root_tol } => {
            let cfg = load_config(common)?;
            let inv_d = cfg.min_distance().map_or(0.0, |d| 1.0 / d);
            let lmax = lambda_max.unwrap_or(100.0 + 8.0 * std::f64::consts::PI * cfg.alpha_norm() + 10.0 * inv_d);
            let states = find_bound_states(&cfg, lmax, *root_tol)?;
            let mut r = Report::new(name, Some(&cfg)).tolerance("root_tol", *root_tol).tolerance("lambda_max", lmax);
            r.set("count", states.len())?;
            r.set("lambda0", states.iter().map(|s| s.lambda0).collect::<Vec<_>>())?;
            r.table = csv_table(|b| write_bound_states_csv(&states, cfg.n(), b))?;
            Ok(r)
        }
        Command::Resolvent { mu } => {
            let cfg = load_config(common)?;
            let u = datum(common)?;
            let (p, q) = resolvent_charges(&cfg, C64::new(0.0, *mu), &u)?;
            let mut r = Report::new(name, Some(&cfg));
            r.set("mu", mu)?;
            r.table = Table::new(["centre", "pairing_re", "pairing_im", "charge_re", "charge_im"]);
            for (j, (a, b)) in p.iter().zip(&q).enumerate() {
                r.table.push(vec![j.to_string(), cell(a.re), cell(a.im), cell(b.re), cell(b.im)])?;
            }
            Ok(r)
        }
        Command::Waveop { sign, stride, tail_tol } => {
            let cfg = load_config(common)?;
            let opts = WaveOptions { tail_tol: *tail_tol, ..wave_options(common, WaveOptions::default())? };
            let op = WaveOperator::new(&cfg, opts)?;
            let u = datum(common)?;
            let s = match sign {
                SignArg::Plus => Sign::Plus,
                SignArg::Minus => Sign::Minus,
            };
            let w = op.apply(&u, s)?.compacted();
            let ratio = w.norm_sq()?.sqrt() / l2_norm_free(&u)?;
            let mut r = with_wave_tolerances(Report::new(name, Some(&cfg)), &opts);
            r.set("sign", format!("{sign:?}").to_lowercase())?;
            r.set("norm_ratio", ratio)?;
            r.table = Table::new(["centre", "rho", "profile_re", "profile_im"]);
            let g = op.grid();
            for a in &w.anchored {
                if let AnchoredProfile::Numerator(line) = &a.profile {
                    for i in (0..g.n).step_by((*stride).max(1)) {
                        let v = line.pos(i) / g.node(i);
                        r.table.push(vec![a.centre.to_string(), cell(g.node(i)), cell(v.re), cell(v.im)])?;
                    }
                }
            }
            Ok(r)
        }
        Command::LpScan { p, widths } => {
            let cfg = load_config(common)?;
            let opts = wave_options(common, WaveOptions::default())?;
            let op = WaveOperator::new(&cfg, opts)?;
            let c: Vec3 = [common.centre[0], common.centre[1], common.centre[2]];
            let family: Vec<ScalarField> = widths.iter().map(|&a| ScalarField::gaussian(common.amp, a, c)).collect();
            let scan = boundedness_scan(&op, &family, p, &spec)?;
            let mut r = with_wave_tolerances(Report::new(name, Some(&cfg)), &opts);
            r.set("summary", &scan.summary)?;
            r.set("all_finite", scan.rows.iter().all(|row| row.ratio.is_finite()))?;
            r.table = csv_table(|b| scan.write_csv(b))?;
            Ok(r)
        }
        Command::P1Probe { r_list, eps_list } => {
            let cfg = load_config(common)?;
            let opts = wave_options(common, WaveOptions::default())?;
            let f = mollified_f0(opts.grid);
            let rep = p1_blowup_scan(&f, r_list, eps_list, &cfg, &opts, &spec)?;
            let mut r = with_wave_tolerances(Report::new(name, Some(&cfg)), &opts)
                .tolerance("order_tol", pointwave::lpprobe::P1_ORDER_TOL);
            for (k, v) in [("moment", rep.moment), ("slope", rep.slope), ("intercept", rep.intercept), ("r2", rep.r2), ("tail_slope", rep.tail_slope), ("limit_gap", rep.limit_gap)] {
                r.set(k, v)?;
            }
            r.set("order_flag", rep.order_flag)?;
            r.table = csv_table(|b| rep.write_csv(b))?;
            Ok(r)
        }
        Command::P3Probe { c, delta_range, shells, delta0 } => {
            let cfg = load_config(common)?;
            if delta_range.len() != 2 {
                return Err(Error::InvalidArgument("--delta-range takes two values".into()));
            }
            let u = datum(common)?;
            let rep = p3_blowup_scan(&cfg, &u, *c, &geometric(delta_range[0], delta_range[1], *shells), *delta0, &spec)?;
            let mut r = Report::new(name, Some(&cfg));
            for (k, v) in [("slope", rep.slope), ("intercept", rep.intercept), ("r2", rep.r2), ("predicted_slope", rep.predicted_slope)] {
                r.set(k, v)?;
            }
            r.set("centre", rep.centre)?;
            r.table = csv_table(|b| rep.write_csv(b))?;
            Ok(r)
        }
        Command::Disperse { p, t_min, t_max, per_decade, mass_tol } => {
            let cfg = load_config(common)?;
            let opts = wave_options(common, DynamicsOptions::wave_options())?;
            let op = WaveOperator::new(&cfg, opts)?;
            let dyn_opts = DynamicsOptions { mass_tol: *mass_tol, ..DynamicsOptions::default() };
            let fit = dispersive_fit(&op, &datum(common)?, *p, &geometric_times(*t_min, *t_max, *per_decade), dyn_opts, &spec)?;
            let mut r = with_wave_tolerances(Report::new(name, Some(&cfg)), &opts).tolerance("mass_tol", *mass_tol);
            for (k, v) in [("p", fit.p), ("exponent", fit.exponent), ("predicted", fit.predicted), ("constant", fit.constant), ("r2", fit.r2)] {
                r.set(k, v)?;
            }
            r.table = csv_table(|b| fit.write_csv(b))?;
            Ok(r)
        }
        Command::Strichartz { p, t_max, mass_tol } => {
            let cfg = load_config(common)?;
            let opts = wave_options(common, DynamicsOptions::wave_options())?;
            let op = WaveOperator::new(&cfg, opts)?;
            let q = admissible_q(*p)?;
            let dyn_opts = DynamicsOptions { mass_tol: *mass_tol, ..DynamicsOptions::default() };
            let rep = strichartz_window_norm(&op, &datum(common)?, *p, q, *t_max, dyn_opts, &spec)?;
            let mut r = with_wave_tolerances(Report::new(name, Some(&cfg)), &opts).tolerance("mass_tol", *mass_tol);
            r.set("p", p)?;
            r.set("q", if q.is_finite() { serde_json::json!(q) } else { serde_json::json!("inf") })?;
            r.set("drift", rep.drift())?;
            r.table = csv_table(|b| rep.write_csv(b))?;
            Ok(r)
        }
        Command::Shrink { well_depth, well_radius, lambda, eps_list, beta, probes } => {
            let v = match well_depth {
                Some(d) => RadialPotential::square_well(*d, *well_radius)?,
                None => RadialPotential::tuned_square_well(*well_radius)?,
            };
            let res = resonance_function(&v)?;
            let opts = RankOneOptions { beta: *beta, probes: *probes, seed: common.seed, ..RankOneOptions::default() };
            let rep = rank_one_limit_check(&v, *lambda, eps_list, &opts)?;
            let mut r = Report::new(name, None).tolerance("resonance_tol", pointwave::shrink::RESONANCE_TOL);
            r.seed = Some(common.seed);
            r.set("a", res.a)?;
            r.set("mismatch", res.mismatch)?;
            r.set("monotone", rep.monotone)?;
            r.set("beta", beta)?;
            r.set("lambda", lambda)?;
            r.table = csv_table(|b| rep.write_csv(b))?;
            Ok(r)
        }
    }
}

fn write(report: &Report, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for fmt in [Format::Csv, Format::Json] {
        emit_report(report, fmt, &out.join(format!("{}.{}", report.command, fmt.extension())))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                clap::error::ErrorKind::InvalidSubcommand
                | clap::error::ErrorKind::MissingSubcommand
                | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 1,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli.command, &cli.common).and_then(|r| write(&r, &cli.common.out).map(|_| r)) {
        Ok(r) => {
            println!("{}: wrote {}.csv and {}.json to {}", r.command, r.command, r.command, cli.common.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
