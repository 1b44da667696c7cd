//! `esd`: amplitude-damped three-qubit entanglement from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use esd::damping::{apply_amplitude_damping, DampingParams};
use esd::experiments::{
    find_esd_onset, ghz_w_scan, load_roof_config, mixing_grid, records_to_csv, run_dynamics, scan_to_csv, time_grid,
    write_csv, write_scan_csv, write_svg_plot, Measure, PlotPoint, Scenario, Series, YScale, DEFAULT_DT,
    DEFAULT_T_MAX, LONG_TIME_T_MAX, ROOF_ZERO_TOL,
};
use esd::measures::{esd_onset_g_theta, fill_pure, gmc_g_theta, gmc_x, triangle_sides};
use esd::roof::RoofOptions;
use esd::states::{make_state, FamilyKind, StateFamily};
use esd::{Error, Result};

#[derive(Parser)]
#[command(name = "esd", version, about = "Genuine three-qubit entanglement under amplitude damping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Concurrence Fill of a pure initial state.
    FillPure {
        #[arg(long)]
        family: FamilyKind,
        /// Angle in radians, or `cos=C` to give cosθ.
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        theta: String,
    },
    /// Entanglement along a damping time grid.
    Dynamics {
        #[arg(long)]
        family: FamilyKind,
        /// One or more comma-separated values of cosθ, one series each.
        #[arg(long, default_value = "1")]
        cos_theta: String,
        #[arg(long, default_value = "fill-roof")]
        measure: Measure,
        #[arg(long, default_value_t = DEFAULT_T_MAX)]
        t_max: f64,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        /// Extend the grid to t/τ = 6 (roof values only, all heuristic).
        #[arg(long)]
        long_time: bool,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        log_scale: bool,
        #[command(flatten)]
        roof: RoofArgs,
    },
    /// Time at which genuine entanglement first vanishes.
    EsdOnset {
        #[arg(long)]
        family: FamilyKind,
        #[arg(long)]
        cos_theta: String,
        /// Closed-form onset law (g-theta only).
        #[arg(long)]
        analytic: bool,
        /// Defaults to gmc-x-auto for g-theta and fill-roof otherwise.
        #[arg(long)]
        measure: Option<Measure>,
        #[arg(long, default_value_t = ROOF_ZERO_TOL)]
        zero_tol: f64,
        #[arg(long, default_value_t = DEFAULT_T_MAX)]
        t_max: f64,
        #[arg(long, default_value_t = DEFAULT_DT)]
        dt: f64,
        #[command(flatten)]
        roof: RoofArgs,
    },
    /// Fill of the GHZ/W mixture against its closed form.
    GhzWScan {
        #[arg(long, default_value_t = 11)]
        points: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[command(flatten)]
        roof: RoofArgs,
    },
    /// GMC of a damped X-shaped state.
    Gmc {
        #[arg(long, default_value = "g-theta")]
        family: FamilyKind,
        #[arg(long)]
        cos_theta: String,
        #[arg(long)]
        t_over_tau: f64,
    },
}

/// Roof settings; flags win over the config file.
#[derive(Args)]
struct RoofArgs {
    /// File of `key = value` lines naming roof options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    inner_restarts: Option<usize>,
    #[arg(long)]
    inner_max_iters: Option<usize>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    step0: Option<f64>,
    /// Search the full witness space instead of the family's symmetric subspace.
    #[arg(long)]
    no_symmetry: bool,
}

impl RoofArgs {
    fn resolve(&self, base: RoofOptions) -> Result<RoofOptions> {
        let mut opts = match &self.config {
            Some(path) => load_roof_config(path, base)?,
            None => base,
        };
        if let Some(v) = self.seed {
            opts.seed = v;
        }
        if let Some(v) = self.inner_restarts {
            opts.inner_restarts = v;
        }
        if let Some(v) = self.inner_max_iters {
            opts.inner_max_iters = v;
        }
        if let Some(v) = self.outer_iters {
            opts.outer_iters = v;
        }
        if let Some(v) = self.step0 {
            opts.step0 = v;
        }
        if self.no_symmetry {
            opts.symmetry_generators = None;
        }
        opts.validate()?;
        Ok(opts)
    }
}

/// A real number, `sqrt(x)` or `1/sqrt(x)`.
fn parse_real(text: &str) -> Result<f64> {
    let s = text.trim().replace(' ', "");
    let bad = || Error::Argument(format!("cannot read a number from {text:?}"));
    let inner = |body: &str| -> Result<f64> {
        let x: f64 = body.parse().map_err(|_| bad())?;
        if x < 0.0 {
            return Err(bad());
        }
        Ok(x.sqrt())
    };
    if let Some(body) = s.strip_prefix("1/sqrt(").and_then(|b| b.strip_suffix(')')) {
        return Ok(1.0 / inner(body)?);
    }
    if let Some(body) = s.strip_prefix("sqrt(").and_then(|b| b.strip_suffix(')')) {
        return inner(body);
    }
    s.parse().map_err(|_| bad())
}

fn family_from_cos(kind: FamilyKind, cos: &str) -> Result<StateFamily> {
    StateFamily::from_cos(kind, parse_real(cos)?)
}

fn parse_theta(kind: FamilyKind, theta: &str) -> Result<StateFamily> {
    match theta.trim().strip_prefix("cos=") {
        Some(cos) => family_from_cos(kind, cos),
        None => StateFamily::new(kind, parse_real(theta)?),
    }
}

fn cos_list(text: &str) -> Vec<&str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

/// `out.csv` becomes `out_<tag>.csv` when several series share one path.
fn tagged(path: &Path, tag: &str, many: bool) -> PathBuf {
    if !many {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{tag}"),
    };
    path.with_file_name(name)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FillPure { family, theta } => {
            let psi = make_state(parse_theta(family, &theta)?);
            let sides = triangle_sides(&psi)?.as_array();
            println!("fill = {:.12}", fill_pure(&psi)?);
            println!("squared concurrences = {:.12}, {:.12}, {:.12}", sides[0], sides[1], sides[2]);
        }
        Command::Dynamics { family, cos_theta, measure, t_max, dt, long_time, csv, svg, log_scale, roof } => {
            let cos_values = cos_list(&cos_theta);
            if cos_values.is_empty() {
                return Err(Error::Argument("no cosθ values given".into()));
            }
            if long_time && measure != Measure::FillRoof {
                return Err(Error::Argument("--long-time evaluates fill-roof only".into()));
            }
            let grid = time_grid(if long_time { t_max.max(LONG_TIME_T_MAX) } else { t_max }, dt)?;
            let many = cos_values.len() > 1;
            let mut series = Vec::new();
            for cos in &cos_values {
                let mut scenario = Scenario::new(family_from_cos(family, cos)?, measure).with_grid(grid.clone());
                scenario.roof = roof.resolve(scenario.roof)?;
                let records = run_dynamics(&scenario)?;
                match &csv {
                    Some(path) => {
                        let path = tagged(path, &format!("cos{cos}"), many);
                        write_csv(&records, &path)?;
                        eprintln!("wrote {}", path.display());
                    }
                    None => {
                        if many {
                            println!("# cos_theta = {cos}");
                        }
                        print!("{}", records_to_csv(&records));
                    }
                }
                series.push(Series::from_records(format!("cosθ = {cos}"), &records));
            }
            if let Some(path) = svg {
                let scale = if log_scale { YScale::Log } else { YScale::Linear };
                write_svg_plot(&series, &path, scale, "t/τ")?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::EsdOnset { family, cos_theta, analytic, measure, zero_tol, t_max, dt, roof } => {
            let state = family_from_cos(family, &cos_theta)?;
            if analytic {
                if family != FamilyKind::GTheta {
                    return Err(Error::Argument("the closed-form onset law covers g-theta only".into()));
                }
                match esd_onset_g_theta(state.theta) {
                    Some(t) => println!("onset t/tau = {t:.10} (exact_analytic)"),
                    None => println!("no onset"),
                }
                return Ok(());
            }
            let measure = measure.unwrap_or(if family == FamilyKind::GTheta {
                Measure::GmcXAuto
            } else {
                Measure::FillRoof
            });
            let mut scenario = Scenario::new(state, measure).with_grid(time_grid(t_max, dt)?);
            scenario.roof = roof.resolve(scenario.roof)?;
            match find_esd_onset(&scenario, zero_tol)? {
                Some(onset) => println!("onset t/tau = {:.10} ({})", onset.t_over_tau, onset.bound_kind),
                None => println!("no onset"),
            }
        }
        Command::GhzWScan { points, csv, svg, roof } => {
            let opts = roof.resolve(RoofOptions::default())?;
            let scan = ghz_w_scan(&mixing_grid(points)?, &opts)?;
            match &csv {
                Some(path) => {
                    write_scan_csv(&scan, path)?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{}", scan_to_csv(&scan)),
            }
            if let Some(path) = svg {
                let points = |f: fn(&_) -> f64| scan.iter().map(|p| PlotPoint { x: p.s, y: f(p), outlier: false }).collect();
                let series = [
                    Series { label: "numeric".into(), points: points(|p| p.numeric) },
                    Series { label: "analytic".into(), points: points(|p| p.analytic) },
                ];
                write_svg_plot(&series, &path, YScale::Linear, "s")?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Gmc { family, cos_theta, t_over_tau } => {
            let state = family_from_cos(family, &cos_theta)?;
            let rho = apply_amplitude_damping(&make_state(state).projector(), DampingParams::from_ratio(t_over_tau)?)?;
            println!("gmc = {:.12}", gmc_x(&rho)?);
            if family == FamilyKind::GTheta {
                println!("closed form = {:.12}", gmc_g_theta(state.theta, t_over_tau));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                Error::Argument(_) => 2,
                Error::Numerical(_) => 3,
                Error::Io(_) => 1,
            })
        }
    }
}
