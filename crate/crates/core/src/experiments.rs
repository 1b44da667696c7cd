//! Time series, sudden-death onsets and the GHZ/W scan, with CSV and SVG
//! output.
//!
//! Every grid point gets its own seed derived from the scenario seed and the
//! point's index, so runs are reproducible however the points are scheduled.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::damping::{apply_amplitude_damping, DampingParams};
use crate::error::{Error, Result};
use crate::measures::{gmc_x, is_x_form, X_FORM_TOL};
use crate::roof::{
    derive_seed, fill_mixed, local_phase, local_phases, qubit_swap, BoundKind, RoofOptions,
};
use crate::states::{ghz_w_mixture, make_state, FamilyKind, StateFamily};
use crate::tensor::{DensityMatrix, C64};

pub const DEFAULT_T_MAX: f64 = 3.0;
pub const DEFAULT_DT: f64 = 0.05;
/// End of the extended grid, evaluated with the roof only.
pub const LONG_TIME_T_MAX: f64 = 6.0;
/// Default zero threshold for onsets read off roof values.
pub const ROOF_ZERO_TOL: f64 = 1e-4;
/// Records whose restart agreement falls below this are marked as outliers.
pub const OUTLIER_FRACTION: f64 = 0.2;
/// The GMC onset search covers `t/τ ∈ [0, GMC_ONSET_HORIZON]`.
pub const GMC_ONSET_HORIZON: f64 = 10.0;
/// Width of the final bracket of the GMC onset bisection.
pub const ONSET_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Measure {
    /// Convex-roof concurrence Fill through the witness dual.
    FillRoof,
    /// Closed-form GMC, refusing states that are not X-shaped.
    GmcXAuto,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::FillRoof => "fill-roof",
            Measure::GmcXAuto => "gmc-x-auto",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "fill-roof" => Ok(Measure::FillRoof),
            "gmc-x-auto" => Ok(Measure::GmcXAuto),
            _ => Err(Error::arg(format!("unknown measure {s:?}; expected fill-roof or gmc-x-auto"))),
        }
    }
}

/// Unitaries commuting with every damped state of `kind`.
///
/// Damping never changes the excitation difference carried by a matrix
/// element, and it acts identically on every qubit, so each family keeps the
/// permutation symmetry and excitation structure of its initial state.
pub fn family_symmetry_generators(kind: FamilyKind) -> Vec<DMatrix<C64>> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let s3 = [qubit_swap(0, 1), qubit_swap(1, 2)];
    match kind {
        // Only |000⟩⟨111| coherences: phases summing to zero are symmetries.
        FamilyKind::GTheta | FamilyKind::Ghz => {
            let mut gens = s3.to_vec();
            gens.push(local_phases([FRAC_PI_2, -FRAC_PI_2, 0.0]));
            gens
        }
        // Coherences only between excitation numbers of equal parity.
        FamilyKind::SigmaTheta => {
            let mut gens = s3.to_vec();
            gens.push(local_phase(PI));
            gens
        }
        // Block diagonal in the excitation number.
        FamilyKind::W => {
            let mut gens = s3.to_vec();
            gens.push(local_phase(FRAC_PI_2));
            gens
        }
        FamilyKind::WTheta | FamilyKind::WBarTheta => vec![qubit_swap(1, 2), local_phase(FRAC_PI_2)],
    }
}

/// `0, dt, 2dt, …` up to `t_max` inclusive.
pub fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::arg(format!("t_max must be non-negative, got {t_max}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::arg(format!("dt must be positive, got {dt}")));
    }
    let steps = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub family: StateFamily,
    /// Ascending, non-negative values of `t/τ`.
    pub time_grid: Vec<f64>,
    pub measure: Measure,
    pub roof: RoofOptions,
    pub csv_path: Option<PathBuf>,
    pub svg_path: Option<PathBuf>,
}

impl Scenario {
    /// Default grid, default roof options twirled over the family's symmetries.
    pub fn new(family: StateFamily, measure: Measure) -> Self {
        Scenario {
            family,
            time_grid: time_grid(DEFAULT_T_MAX, DEFAULT_DT).expect("default grid is valid"),
            measure,
            roof: RoofOptions {
                symmetry_generators: Some(family_symmetry_generators(family.kind)),
                ..RoofOptions::default()
            },
            csv_path: None,
            svg_path: None,
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.time_grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_grid.is_empty() {
            return Err(Error::arg("time grid is empty"));
        }
        if self.time_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::arg("time grid values must be finite and non-negative"));
        }
        if self.time_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("time grid must be strictly ascending"));
        }
        self.roof.validate()
    }

    fn state_at(&self, t_over_tau: f64) -> Result<DensityMatrix> {
        let rho0 = make_state(self.family).projector();
        apply_amplitude_damping(&rho0, DampingParams::from_ratio(t_over_tau)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicsRecord {
    pub t_over_tau: f64,
    pub value: f64,
    pub bound_kind: BoundKind,
    pub converged_fraction: f64,
}

impl DynamicsRecord {
    /// Too few agreeing restarts; kept in the output but drawn hollow.
    pub fn is_outlier(&self) -> bool {
        self.converged_fraction < OUTLIER_FRACTION
    }
}

fn gmc_checked(rho: &DensityMatrix, t_over_tau: f64) -> Result<f64> {
    if !is_x_form(rho, X_FORM_TOL) {
        return Err(Error::arg(format!(
            "state is not X-shaped at t/τ = {t_over_tau}; the GMC formula does not apply, use the {} measure",
            Measure::FillRoof
        )));
    }
    gmc_x(rho)
}

/// Evaluates the scenario's measure along its time grid, in grid order.
pub fn run_dynamics(scenario: &Scenario) -> Result<Vec<DynamicsRecord>> {
    scenario.validate()?;
    scenario
        .time_grid
        .par_iter()
        .enumerate()
        .map(|(index, &t)| {
            let rho = scenario.state_at(t)?;
            match scenario.measure {
                Measure::GmcXAuto => Ok(DynamicsRecord {
                    t_over_tau: t,
                    value: gmc_checked(&rho, t)?,
                    bound_kind: BoundKind::ExactAnalytic,
                    converged_fraction: 1.0,
                }),
                Measure::FillRoof => {
                    let opts = RoofOptions { seed: derive_seed(scenario.roof.seed, index as u64), ..scenario.roof.clone() };
                    let result = fill_mixed(&rho, &opts)?;
                    Ok(DynamicsRecord {
                        t_over_tau: t,
                        value: result.value,
                        bound_kind: result.bound_kind,
                        converged_fraction: result.diagnostics.converged_fraction,
                    })
                }
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Onset {
    pub t_over_tau: f64,
    /// `ExactAnalytic` for GMC bisection, `Heuristic` when read off roof values.
    pub bound_kind: BoundKind,
}

/// First grid time from which every value stays below `zero_tol`, or `None`
/// when the last value is still at or above it.
pub fn onset_from_records(records: &[DynamicsRecord], zero_tol: f64) -> Option<f64> {
    let last = records.last()?;
    if last.value >= zero_tol {
        return None;
    }
    let alive = records.iter().rposition(|r| r.value >= zero_tol);
    Some(records[alive.map_or(0, |i| i + 1)].t_over_tau)
}

/// Entanglement sudden-death time of the scenario.
///
/// With [`Measure::GmcXAuto`] the first exact zero of GMC on
/// `[0, GMC_ONSET_HORIZON]` is located by a scan in steps of 0.01 followed
/// by bisection to [`ONSET_TOL`]; `zero_tol` is not used, because GMC
/// vanishes exactly. With [`Measure::FillRoof`] the scenario grid is
/// evaluated and read through [`onset_from_records`]; a lower bound cannot
/// prove that entanglement is gone, so that onset is always
/// [`BoundKind::Heuristic`] and should be checked against GMC whenever the
/// state is X-shaped.
pub fn find_esd_onset(scenario: &Scenario, zero_tol: f64) -> Result<Option<Onset>> {
    scenario.validate()?;
    match scenario.measure {
        Measure::FillRoof => {
            if !(zero_tol > 0.0) {
                return Err(Error::arg("zero_tol must be positive"));
            }
            let records = run_dynamics(scenario)?;
            Ok(onset_from_records(&records, zero_tol)
                .map(|t_over_tau| Onset { t_over_tau, bound_kind: BoundKind::Heuristic }))
        }
        Measure::GmcXAuto => {
            let gmc = |t: f64| -> Result<f64> { gmc_checked(&scenario.state_at(t)?, t) };
            let exact = |t_over_tau| Some(Onset { t_over_tau, bound_kind: BoundKind::ExactAnalytic });
            if gmc(0.0)? <= 0.0 {
                return Ok(exact(0.0));
            }
            let steps = (GMC_ONSET_HORIZON / 0.01).round() as usize;
            let mut lo = 0.0;
            let mut hi = None;
            for k in 1..=steps {
                let t = k as f64 * 0.01;
                if gmc(t)? <= 0.0 {
                    hi = Some(t);
                    break;
                }
                lo = t;
            }
            let Some(mut hi) = hi else { return Ok(None) };
            while hi - lo > ONSET_TOL {
                let mid = 0.5 * (lo + hi);
                if gmc(mid)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(exact(0.5 * (lo + hi)))
        }
    }
}

/// `F(s) = (5s² − 4s + 8)/9` for `s|GHZ⟩⟨GHZ| + (1−s)|W⟩⟨W|`.
pub fn ghz_w_analytic(s: f64) -> f64 {
    (5.0 * s * s - 4.0 * s + 8.0) / 9.0
}

/// `points` evenly spaced values from 0 to 1.
pub fn mixing_grid(points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::arg("a mixing grid needs at least two points"));
    }
    Ok((0..points).map(|k| k as f64 / (points - 1) as f64).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanPoint {
    pub s: f64,
    pub numeric: f64,
    pub analytic: f64,
    pub bound_kind: BoundKind,
    pub converged_fraction: f64,
}

/// Roof values of the GHZ/W mixture next to the closed form.
pub fn ghz_w_scan(s_grid: &[f64], roof: &RoofOptions) -> Result<Vec<ScanPoint>> {
    if let Some(s) = s_grid.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::arg(format!("mixing weight {s} outside [0, 1]")));
    }
    roof.validate()?;
    s_grid
        .par_iter()
        .enumerate()
        .map(|(index, &s)| {
            let opts = RoofOptions { seed: derive_seed(roof.seed, index as u64), ..roof.clone() };
            let result = fill_mixed(&ghz_w_mixture(s)?, &opts)?;
            Ok(ScanPoint {
                s,
                numeric: result.value,
                analytic: ghz_w_analytic(s),
                bound_kind: result.bound_kind,
                converged_fraction: result.diagnostics.converged_fraction,
            })
        })
        .collect()
}

/// `x` with 12 significant digits, positional where that stays short.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exponent) {
        trim(&format!("{:.*}", (11 - exponent).max(0) as usize, x))
    } else {
        format!("{}e{exponent}", trim(mantissa))
    }
}

pub const CSV_HEADER: &str = "t_over_tau,value,bound_kind,converged_fraction";
pub const SCAN_CSV_HEADER: &str = "s,numeric,analytic,bound_kind,converged_fraction";

fn csv_text<I>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut emit = |fields: &[String]| writer.write_record(fields).expect("writing to memory");
    emit(&header.split(',').map(String::from).collect::<Vec<_>>());
    for row in rows {
        emit(&row);
    }
    String::from_utf8(writer.into_inner().expect("flushing to memory")).expect("ASCII output")
}

pub fn records_to_csv(records: &[DynamicsRecord]) -> String {
    csv_text(
        CSV_HEADER,
        records.iter().map(|r| {
            vec![
                format_sig12(r.t_over_tau),
                format_sig12(r.value),
                r.bound_kind.to_string(),
                format_sig12(r.converged_fraction),
            ]
        }),
    )
}

pub fn write_csv(records: &[DynamicsRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::arg("no records to write"));
    }
    std::fs::write(path, records_to_csv(records))?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<DynamicsRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::arg(format!("unreadable CSV header: {e}")))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::arg(format!("expected CSV header {CSV_HEADER:?}")));
    }
    reader
        .records()
        .enumerate()
        .map(|(i, row)| {
            let bad = || Error::arg(format!("malformed CSV row {}", i + 2));
            let row = row.map_err(|_| bad())?;
            let number = |k: usize| row[k].parse::<f64>().map_err(|_| bad());
            Ok(DynamicsRecord {
                t_over_tau: number(0)?,
                value: number(1)?,
                bound_kind: row[2].parse().map_err(|_| bad())?,
                converged_fraction: number(3)?,
            })
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<DynamicsRecord>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

pub fn scan_to_csv(points: &[ScanPoint]) -> String {
    csv_text(
        SCAN_CSV_HEADER,
        points.iter().map(|p| {
            vec![
                format_sig12(p.s),
                format_sig12(p.numeric),
                format_sig12(p.analytic),
                p.bound_kind.to_string(),
                format_sig12(p.converged_fraction),
            ]
        }),
    )
}

pub fn write_scan_csv(points: &[ScanPoint], path: &Path) -> Result<()> {
    if points.is_empty() {
        return Err(Error::arg("no scan points to write"));
    }
    std::fs::write(path, scan_to_csv(points))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum YScale {
    Linear,
    Log,
}

impl FromStr for YScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(YScale::Linear),
            "log" => Ok(YScale::Log),
            _ => Err(Error::arg(format!("unknown y scale {s:?}; expected linear or log"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub outlier: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<PlotPoint>,
}

impl Series {
    pub fn from_records(label: impl Into<String>, records: &[DynamicsRecord]) -> Self {
        Series {
            label: label.into(),
            points: records
                .iter()
                .map(|r| PlotPoint { x: r.t_over_tau, y: r.value, outlier: r.is_outlier() })
                .collect(),
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 75.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 55.0;

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round step giving about `target` intervals over `span`.
fn nice_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let magnitude = 10f64.powf(raw.log10().floor());
    let unit = [1.0, 2.0, 5.0, 10.0].into_iter().find(|u| u * magnitude >= raw).unwrap_or(10.0);
    unit * magnitude
}

/// Line plot of `series`; on a log axis non-positive values are left out and
/// the line breaks around them.
pub fn render_svg(series: &[Series], y_scale: YScale, x_label: &str) -> Result<String> {
    let kept: Vec<Vec<Option<PlotPoint>>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .map(|p| {
                    let visible = p.x.is_finite() && p.y.is_finite() && (y_scale == YScale::Linear || p.y > 0.0);
                    visible.then_some(*p)
                })
                .collect()
        })
        .collect();
    let all: Vec<PlotPoint> = kept.iter().flatten().flatten().copied().collect();
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::arg("nothing to plot"));
    }

    let (mut x_min, mut x_max) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.x), b.max(p.x)));
    if all.is_empty() {
        (x_min, x_max) = (0.0, 1.0);
    } else if x_max - x_min < 1e-12 {
        (x_min, x_max) = (x_min - 0.5, x_max + 0.5);
    }
    let transform = |y: f64| if y_scale == YScale::Log { y.log10() } else { y };
    let (mut y_min, mut y_max) =
        all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(transform(p.y)), b.max(transform(p.y))));
    match y_scale {
        YScale::Linear => {
            if all.is_empty() {
                (y_min, y_max) = (0.0, 1.0);
            }
            y_min = y_min.min(0.0);
            if y_max - y_min < 1e-12 {
                y_max = y_min + 1.0;
            }
            y_max += 0.05 * (y_max - y_min);
        }
        YScale::Log => {
            if all.is_empty() {
                (y_min, y_max) = (-3.0, 0.0);
            }
            y_min = y_min.floor();
            y_max = y_max.ceil();
            if y_max - y_min < 1.0 {
                y_max = y_min + 1.0;
            }
        }
    }

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let sy = |y: f64| TOP + (1.0 - (transform(y) - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );

    let x_step = nice_step(x_max - x_min, 6.0);
    let mut x = (x_min / x_step).ceil() * x_step;
    while x <= x_max + 1e-9 * x_step {
        let px = sx(x);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 19.0,
            format_sig12((x / x_step).round() * x_step)
        );
        x += x_step;
    }
    match y_scale {
        YScale::Linear => {
            let y_step = nice_step(y_max - y_min, 5.0);
            let mut y = (y_min / y_step).ceil() * y_step;
            while y <= y_max + 1e-9 * y_step {
                let py = sy(y);
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                    LEFT - 5.0,
                    LEFT - 8.0,
                    py + 4.0,
                    format_sig12((y / y_step).round() * y_step)
                );
                y += y_step;
            }
        }
        YScale::Log => {
            for decade in (y_min as i32)..=(y_max as i32) {
                let py = sy(10f64.powi(decade));
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{decade}</text>"#,
                    LEFT - 5.0,
                    LEFT - 8.0,
                    py + 4.0
                );
            }
        }
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape_xml(x_label)
    );

    for (i, (s, points)) in series.iter().zip(&kept).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for segment in points.split(|p| p.is_none()) {
            let coords: Vec<String> =
                segment.iter().flatten().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y))).collect();
            if coords.len() > 1 {
                let _ = writeln!(
                    svg,
                    r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                    coords.join(" ")
                );
            }
        }
        for p in points.iter().flatten() {
            let fill = if p.outlier { "none" } else { color };
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{fill}" stroke="{color}"/>"#,
                sx(p.x),
                sy(p.y)
            );
        }
        let ly = TOP + 15.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape_xml(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_svg_plot(series: &[Series], path: &Path, y_scale: YScale, x_label: &str) -> Result<()> {
    std::fs::write(path, render_svg(series, y_scale, x_label)?)?;
    Ok(())
}

/// Applies `key = value` lines (TOML syntax) to `base`; keys are the
/// [`RoofOptions`] field names except the generators.
pub fn parse_roof_config(text: &str, base: RoofOptions) -> Result<RoofOptions> {
    let table: toml::Table = text.parse().map_err(|e| Error::arg(format!("unreadable config: {e}")))?;
    let mut opts = base;
    for (key, value) in &table {
        let bad = |what: &str| Error::arg(format!("config key {key} needs {what}, got {value}"));
        let count = || {
            value.as_integer().and_then(|v| usize::try_from(v).ok()).ok_or_else(|| bad("a non-negative integer"))
        };
        let real = || {
            value.as_float().or_else(|| value.as_integer().map(|v| v as f64)).ok_or_else(|| bad("a number"))
        };
        match key.as_str() {
            "inner_restarts" => opts.inner_restarts = count()?,
            "inner_max_iters" => opts.inner_max_iters = count()?,
            "inner_tol" => opts.inner_tol = real()?,
            "outer_iters" => opts.outer_iters = count()?,
            "step0" => opts.step0 = real()?,
            "seed" => opts.seed = count()? as u64,
            _ => return Err(Error::arg(format!("unknown config key {key:?}"))),
        }
    }
    opts.validate()?;
    Ok(opts)
}

pub fn load_roof_config(path: &Path, base: RoofOptions) -> Result<RoofOptions> {
    parse_roof_config(&std::fs::read_to_string(path)?, base)
}
