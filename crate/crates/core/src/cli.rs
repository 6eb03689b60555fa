//! Command-line front end. Every subcommand resolves its flags into a
//! [`RunConfig`]; fields present in a `--config` file replace the flag values.
//! Reports go to stdout as JSON, curves to the `--csv` path.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{
    find_dynamical_resonance, flip_probability, gate_error_curve, speed_bound, write_curves_csv,
    GateErrorCurve, PulseSpec, SweepParameter, Tuning, TuningSource,
};
use crate::effective::{
    locate_resonances_numeric, shift_closed_forms, shift_first_order, ShiftEvaluation, ShiftMethod,
    ShiftReport,
};
use crate::error::{invalid, Error, Result};
use crate::models::{ModelKind, ModelSpec};
use crate::report::{to_json_string, UNITS};
use crate::search::{linspace, REFINE_RTOL};
use crate::spectra::{
    character_profile, find_structural_resonance, scan_levels, DEFAULT_SCAN_POINTS,
};

pub const THREADS_ENV: &str = "AC_LAB_THREADS";

/// Default half width of scan windows around the bare crossing.
pub const DEFAULT_HALF_WIDTH: f64 = 0.2;
pub const DEFAULT_EPSILON_T: f64 = 0.05;
pub const DEFAULT_SWEEP: [f64; 2] = [0.05, 0.3];
pub const DEFAULT_SWEEP_POINTS: usize = 11;

#[derive(Debug, Parser)]
#[command(
    name = "ac-lab",
    version,
    about = "Resonance shifts and tuning of trapped-ion gates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dressed levels around the bare crossing and the minimal splitting.
    ScanSpectrum(ScanArgs),
    /// Bare, structural and dynamical resonance by closed form and numerics.
    FindResonance(ResonanceArgs),
    /// State-flip probability at one xi or over a window.
    FlipProb(FlipArgs),
    /// Gate-error curves for the bare, structural and dynamical tunings.
    GateError(GateErrorArgs),
    /// Admissible pulse rate for an error threshold.
    SpeedBound(SpeedArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::ScanSpectrum(_) => "scan-spectrum",
            Command::FindResonance(_) => "find-resonance",
            Command::FlipProb(_) => "flip-prob",
            Command::GateError(_) => "gate-error",
            Command::SpeedBound(_) => "speed-bound",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    SsGate,
    CzGate,
    Generic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PulseArg {
    EffectivePi,
    LdPi,
    SidebandPi,
    Explicit,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SourceArg {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "ss-gate")]
    pub kind: KindArg,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    /// Rabi frequency (SS default k, CZ default 0.3); coupling g for the generic model.
    #[arg(long)]
    pub rabi: Option<f64>,
    /// Laser detuning (CZ default k); splitting xi for the generic model.
    #[arg(long)]
    pub detuning: Option<f64>,
    #[arg(long)]
    pub n_fock: Option<usize>,
    /// Vibrational number of the lower state of the pair (n, n + k).
    #[arg(long, default_value_t = 0)]
    pub n: usize,
    /// Sideband order k.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
}

impl ModelArgs {
    pub fn to_spec(&self) -> ModelSpec {
        let (n, k) = (self.n, self.k);
        let kf = k as f64;
        let mut spec = match self.kind {
            KindArg::SsGate => {
                let mut s = ModelSpec::ss_gate(self.eta, n);
                s.rabi = self.rabi.unwrap_or(kf);
                s.detuning = self.detuning.unwrap_or(0.0);
                s
            }
            KindArg::CzGate => {
                let mut s = ModelSpec::cz_gate(self.eta, self.rabi.unwrap_or(0.3), n);
                s.detuning = self.detuning.unwrap_or(kf);
                s
            }
            KindArg::Generic => {
                let mut s = ModelSpec::generic(
                    self.rabi.unwrap_or(0.1),
                    self.detuning.unwrap_or(kf),
                    [n, n + k],
                );
                s.eta = self.eta;
                s
            }
        };
        spec.transition = [n, n + k];
        if let Some(n_fock) = self.n_fock {
            spec.n_fock = n_fock;
        }
        spec
    }
}

#[derive(Debug, Clone, Args)]
pub struct IoArgs {
    /// JSON run configuration; its fields override the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the curve data here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WindowArgs {
    /// Scan window LO,HI in units of the trap frequency.
    #[arg(long, value_delimiter = ',')]
    pub window: Option<Vec<f64>>,
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PulseArgs {
    #[arg(long, value_enum)]
    pub pulse: Option<PulseArg>,
    /// Duration of an explicit pulse.
    #[arg(long)]
    pub time: Option<f64>,
}

impl PulseArgs {
    fn to_pulse(&self) -> Result<Option<PulseSpec>> {
        Ok(match (self.pulse, self.time) {
            (None, None) => None,
            (None | Some(PulseArg::Explicit), Some(time)) => Some(PulseSpec::Explicit { time }),
            (Some(PulseArg::Explicit), None) => {
                return Err(invalid("--pulse explicit needs --time"))
            }
            (Some(_), Some(_)) => return Err(invalid("--time applies only to explicit pulses")),
            (Some(PulseArg::EffectivePi), None) => Some(PulseSpec::EffectivePi),
            (Some(PulseArg::LdPi), None) => Some(PulseSpec::LdPi),
            (Some(PulseArg::SidebandPi), None) => Some(PulseSpec::SidebandPi),
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ResonanceArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub pulse: PulseArgs,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FlipArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Evaluate at a single xi instead of scanning.
    #[arg(long)]
    pub xi: Option<f64>,
    #[command(flatten)]
    pub window: WindowArgs,
    #[command(flatten)]
    pub pulse: PulseArgs,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Swept parameter (default eta; rabi for the CZ gate).
    #[arg(long, value_enum)]
    pub sweep: Option<SweepArg>,
    /// Sweep range LO,HI.
    #[arg(long, value_delimiter = ',')]
    pub range: Option<Vec<f64>>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub tuning_source: Option<SourceArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SweepArg {
    Eta,
    Rabi,
}

#[derive(Debug, Clone, Args)]
pub struct GateErrorArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Comma-separated subset of bare,structural,dynamical.
    #[arg(long, value_delimiter = ',')]
    pub tunings: Option<Vec<TuningArg>>,
    #[command(flatten)]
    pub pulse: PulseArgs,
    #[command(flatten)]
    pub io: IoArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TuningArg {
    Bare,
    Structural,
    Dynamical,
}

#[derive(Debug, Clone, Args)]
pub struct SpeedArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub epsilon_t: Option<f64>,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub pulse: PulseArgs,
    #[command(flatten)]
    pub io: IoArgs,
}

/// Fully serializable description of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepParameter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tunings: Option<Vec<Tuning>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning_source: Option<TuningSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` replace those of `self`.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        overlay_fields!(self, top; model, window, points, xi, pulse, sweep, range, tunings,
            tuning_source, epsilon_t, csv, report);
        self
    }

    fn model(&self) -> Result<ModelSpec> {
        let spec = self
            .model
            .clone()
            .ok_or_else(|| invalid("no model given"))?;
        spec.validate()?;
        Ok(spec)
    }

    fn window_for(&self, spec: &ModelSpec) -> (f64, f64) {
        let xi_0 = spec.bare_crossing().xi_0;
        self.window
            .map(|[lo, hi]| (lo, hi))
            .unwrap_or((xi_0 - DEFAULT_HALF_WIDTH, xi_0 + DEFAULT_HALF_WIDTH))
    }

    fn pulse_for(&self, spec: &ModelSpec) -> PulseSpec {
        self.pulse
            .unwrap_or(if spec.transition.iter().min() == Some(&0) {
                PulseSpec::LdPi
            } else {
                PulseSpec::SidebandPi
            })
    }

    fn tuning_source_for(&self, spec: &ModelSpec) -> TuningSource {
        self.tuning_source
            .unwrap_or(if spec.kind == ModelKind::SsGate {
                TuningSource::ClosedForm
            } else {
                TuningSource::Numeric {
                    half_width: DEFAULT_HALF_WIDTH,
                    points: DEFAULT_SCAN_POINTS,
                }
            })
    }

    fn sweep_grid(&self) -> Result<Vec<f64>> {
        let [lo, hi] = self.range.unwrap_or(DEFAULT_SWEEP);
        let points = self.points.unwrap_or(DEFAULT_SWEEP_POINTS);
        if !(lo < hi) || points < 2 {
            return Err(invalid(format!(
                "bad sweep range [{lo}, {hi}] with {points} points"
            )));
        }
        Ok(linspace(lo, hi, points))
    }
}

fn window_config(w: &WindowArgs) -> Result<(Option<[f64; 2]>, Option<usize>)> {
    let window = match &w.window {
        None => None,
        Some(v) if v.len() == 2 => Some([v[0], v[1]]),
        Some(v) => return Err(invalid(format!("--window needs LO,HI, got {v:?}"))),
    };
    Ok((window, w.points))
}

fn source_config(arg: Option<SourceArg>) -> Option<TuningSource> {
    arg.map(|s| match s {
        SourceArg::ClosedForm => TuningSource::ClosedForm,
        SourceArg::Numeric => TuningSource::Numeric {
            half_width: DEFAULT_HALF_WIDTH,
            points: DEFAULT_SCAN_POINTS,
        },
    })
}

fn sweep_config(s: &SweepArgs, cfg: &mut RunConfig) -> Result<()> {
    cfg.sweep = s.sweep.map(|a| match a {
        SweepArg::Eta => SweepParameter::Eta,
        SweepArg::Rabi => SweepParameter::Rabi,
    });
    cfg.range = match &s.range {
        None => None,
        Some(v) if v.len() == 2 => Some([v[0], v[1]]),
        Some(v) => return Err(invalid(format!("--range needs LO,HI, got {v:?}"))),
    };
    cfg.points = s.points;
    cfg.tuning_source = source_config(s.tuning_source);
    Ok(())
}

impl Command {
    /// Flags as a [`RunConfig`], before any `--config` overlay.
    pub fn flag_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let io = match self {
            Command::ScanSpectrum(a) => {
                cfg.model = Some(a.model.to_spec());
                (cfg.window, cfg.points) = window_config(&a.window)?;
                &a.io
            }
            Command::FindResonance(a) => {
                cfg.model = Some(a.model.to_spec());
                (cfg.window, cfg.points) = window_config(&a.window)?;
                cfg.pulse = a.pulse.to_pulse()?;
                &a.io
            }
            Command::FlipProb(a) => {
                cfg.model = Some(a.model.to_spec());
                (cfg.window, cfg.points) = window_config(&a.window)?;
                cfg.xi = a.xi;
                cfg.pulse = a.pulse.to_pulse()?;
                &a.io
            }
            Command::GateError(a) => {
                cfg.model = Some(a.model.to_spec());
                sweep_config(&a.sweep, &mut cfg)?;
                cfg.tunings = a.tunings.as_ref().map(|ts| {
                    ts.iter()
                        .map(|t| match t {
                            TuningArg::Bare => Tuning::Bare,
                            TuningArg::Structural => Tuning::Structural,
                            TuningArg::Dynamical => Tuning::Dynamical,
                        })
                        .collect()
                });
                cfg.pulse = a.pulse.to_pulse()?;
                &a.io
            }
            Command::SpeedBound(a) => {
                cfg.model = Some(a.model.to_spec());
                sweep_config(&a.sweep, &mut cfg)?;
                cfg.epsilon_t = a.epsilon_t;
                cfg.pulse = a.pulse.to_pulse()?;
                &a.io
            }
        };
        cfg.csv = io.csv.clone();
        cfg.report = io.report.clone();
        Ok(cfg)
    }

    fn config_path(&self) -> Option<&Path> {
        match self {
            Command::ScanSpectrum(a) => a.io.config.as_deref(),
            Command::FindResonance(a) => a.io.config.as_deref(),
            Command::FlipProb(a) => a.io.config.as_deref(),
            Command::GateError(a) => a.io.config.as_deref(),
            Command::SpeedBound(a) => a.io.config.as_deref(),
        }
    }

    pub fn resolve_config(&self) -> Result<RunConfig> {
        let flags = self.flag_config()?;
        Ok(match self.config_path() {
            Some(path) => flags.overlay(RunConfig::load(path)?),
            None => flags,
        })
    }
}

/// Runs the command and returns the JSON report printed on stdout.
pub fn run(cli: &Cli) -> Result<String> {
    let cfg = cli.command.resolve_config()?;
    let report = match cli.command {
        Command::ScanSpectrum(_) => cmd_scan_spectrum(&cfg)?,
        Command::FindResonance(_) => cmd_find_resonance(&cfg)?,
        Command::FlipProb(_) => cmd_flip_prob(&cfg)?,
        Command::GateError(_) => cmd_gate_error(&cfg)?,
        Command::SpeedBound(_) => cmd_speed_bound(&cfg)?,
    };
    let text = to_json_string(&report)?;
    if let Some(path) = &cfg.report {
        std::fs::write(path, &text)?;
    }
    Ok(text)
}

/// 2 for configuration and I/O problems, 3 for numerical failures.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_numeric() {
        3
    } else {
        2
    }
}

/// Caps the rayon pool at `AC_LAB_THREADS` when set.
pub fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            invalid(format!(
                "{THREADS_ENV} must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| invalid(format!("thread pool: {e}")))
}

fn write_csv_file<F>(path: &Option<PathBuf>, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    if let Some(path) = path {
        let mut out = BufWriter::new(File::create(path)?);
        write(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

pub fn cmd_scan_spectrum(cfg: &RunConfig) -> Result<Value> {
    let spec = cfg.model()?;
    let window = cfg.window_for(&spec);
    let points = cfg.points.unwrap_or(DEFAULT_SCAN_POINTS);
    let track = scan_levels(&spec, window, points)?;
    write_csv_file(&cfg.csv, |out| track.write_csv(out))?;
    let structural = find_structural_resonance(&track)?;
    let profile = character_profile(&track)?;
    let xi_0 = spec.bare_crossing().xi_0;
    let mut report = ShiftReport::new(
        ShiftMethod::NumericScan,
        xi_0,
        structural.xi_s,
        None,
        REFINE_RTOL,
    );
    report.min_gap = Some(structural.min_gap);
    if !structural.slopes_agree {
        report
            .notes
            .push("level-slope crossing disagrees with the gap minimum beyond tolerance".into());
    }
    Ok(json!({
        "command": "scan-spectrum",
        "units": UNITS,
        "model": spec,
        "xi_parameter": spec.xi_parameter().name(),
        "window": [window.0, window.1],
        "points": points,
        "structural": structural,
        "xi_char": profile.xi_char,
        "isolated": track.is_isolated(),
        "intruder_points": track.intruders.len(),
        "report": report,
    }))
}

pub fn cmd_find_resonance(cfg: &RunConfig) -> Result<Value> {
    let spec = cfg.model()?;
    let window = cfg.window_for(&spec);
    let points = cfg.points.unwrap_or(DEFAULT_SCAN_POINTS);
    let pulse = cfg.pulse_for(&spec);

    let closed_form = match (spec.kind, spec.sideband_order()) {
        (ModelKind::SsGate, k @ 1..=4) => Some(shift_closed_forms(
            spec.transition[0],
            k as usize,
            spec.eta,
        )?),
        _ => None,
    };
    let first_order = shift_first_order(&spec, ShiftEvaluation::Resolvent)?;
    let numeric = locate_resonances_numeric(&spec, window, points)?;
    let cross_check = match find_dynamical_resonance(&spec, window, points, pulse) {
        Ok(res) => json!({
            "pulse": pulse,
            "xi_d": res.xi_d,
            "p_max": res.p_max,
            "leakage_warning": res.scan.any_leakage(),
        }),
        Err(e) if e.is_numeric() => json!({ "pulse": pulse, "error": e.to_string() }),
        Err(e) => return Err(e),
    };
    Ok(json!({
        "command": "find-resonance",
        "units": UNITS,
        "model": spec,
        "xi_parameter": spec.xi_parameter().name(),
        "window": [window.0, window.1],
        "closed_form": closed_form,
        "first_order": first_order,
        "numeric": numeric.report,
        "structural": numeric.structural,
        "flip_maximum": cross_check,
    }))
}

pub fn cmd_flip_prob(cfg: &RunConfig) -> Result<Value> {
    let spec = cfg.model()?;
    let pulse = cfg.pulse_for(&spec);
    if let Some(xi) = cfg.xi {
        let res = flip_probability(&spec, xi, pulse)?;
        return Ok(json!({
            "command": "flip-prob",
            "units": UNITS,
            "model": spec,
            "pulse": pulse,
            "result": res,
        }));
    }
    let window = cfg.window_for(&spec);
    let points = cfg.points.unwrap_or(DEFAULT_SCAN_POINTS);
    let res = find_dynamical_resonance(&spec, window, points, pulse)?;
    write_csv_file(&cfg.csv, |out| res.scan.write_csv(out))?;
    Ok(json!({
        "command": "flip-prob",
        "units": UNITS,
        "model": spec,
        "xi_parameter": spec.xi_parameter().name(),
        "pulse": pulse,
        "window": [window.0, window.1],
        "points": points,
        "xi_d": res.xi_d,
        "p_max": res.p_max,
        "leakage_warning": res.scan.any_leakage(),
    }))
}

fn curves(
    cfg: &RunConfig,
    spec: &ModelSpec,
    tunings: &[Tuning],
) -> Result<(SweepParameter, Vec<GateErrorCurve>)> {
    let parameter = cfg.sweep.unwrap_or(if spec.kind == ModelKind::CzGate {
        SweepParameter::Rabi
    } else {
        SweepParameter::Eta
    });
    let grid = cfg.sweep_grid()?;
    let pulse = cfg.pulse_for(spec);
    let source = cfg.tuning_source_for(spec);
    let curves = tunings
        .iter()
        .map(|&t| gate_error_curve(spec, parameter, &grid, t, pulse, source))
        .collect::<Result<Vec<_>>>()?;
    Ok((parameter, curves))
}

pub fn cmd_gate_error(cfg: &RunConfig) -> Result<Value> {
    let spec = cfg.model()?;
    let tunings = cfg.tunings.clone().unwrap_or_else(|| Tuning::ALL.to_vec());
    if tunings.is_empty() {
        return Err(invalid("no tunings requested"));
    }
    let (parameter, curves) = curves(cfg, &spec, &tunings)?;
    write_csv_file(&cfg.csv, |out| write_curves_csv(&curves, out))?;
    let fits = curves
        .iter()
        .map(|c| Ok(json!({ "tuning": c.tuning, "fit": c.fit()?, "xi": c.xi })))
        .collect::<Result<Vec<_>>>()?;
    let find = |t: Tuning| curves.iter().find(|c| c.tuning == t);
    let slope_ratio = match (find(Tuning::Bare), find(Tuning::Dynamical)) {
        (Some(b), Some(d)) => Some(b.fit()?.slope / d.fit()?.slope),
        _ => None,
    };
    let max_gap = match (find(Tuning::Structural), find(Tuning::Dynamical)) {
        (Some(s), Some(d)) => Some(
            s.errors
                .iter()
                .zip(&d.errors)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    Ok(json!({
        "command": "gate-error",
        "units": UNITS,
        "model": spec,
        "sweep": parameter,
        "pulse": cfg.pulse_for(&spec),
        "tuning_source": cfg.tuning_source_for(&spec),
        "curves": fits,
        "slope_ratio_bare_dynamical": slope_ratio,
        "max_gap_structural_dynamical": max_gap,
    }))
}

pub fn cmd_speed_bound(cfg: &RunConfig) -> Result<Value> {
    let spec = cfg.model()?;
    let epsilon_t = cfg.epsilon_t.unwrap_or(DEFAULT_EPSILON_T);
    let mut eta_cfg = cfg.clone();
    eta_cfg.sweep = Some(SweepParameter::Eta);
    let (_, curves) = curves(&eta_cfg, &spec, &[Tuning::Bare, Tuning::Dynamical])?;
    write_csv_file(&cfg.csv, |out| write_curves_csv(&curves, out))?;
    let range = (curves[0].grid[0], curves[0].grid[curves[0].grid.len() - 1]);
    let n = *spec.transition.iter().min().unwrap_or(&0);
    let bound = speed_bound(
        epsilon_t,
        spec.eta,
        spec.rabi,
        n,
        curves[0].fit()?,
        curves[1].fit()?,
        range,
    )?;
    Ok(json!({
        "command": "speed-bound",
        "units": UNITS,
        "model": spec,
        "pulse": cfg.pulse_for(&spec),
        "bound": bound,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("ac-lab").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn model_flags() {
        let cli = parse(&[
            "scan-spectrum",
            "--kind",
            "cz-gate",
            "--eta",
            "0.1",
            "--n-fock",
            "12",
        ]);
        let cfg = cli.command.flag_config().unwrap();
        let spec = cfg.model.unwrap();
        assert_eq!(spec.kind, ModelKind::CzGate);
        assert_eq!((spec.rabi, spec.detuning, spec.n_fock), (0.3, 1.0, 12));
        let cli = parse(&["scan-spectrum", "--n", "1", "--k", "2"]);
        let spec = cli.command.flag_config().unwrap().model.unwrap();
        assert_eq!(spec.transition, [1, 3]);
        assert_eq!(spec.rabi, 2.0);
    }

    #[test]
    fn config_round_trip_and_overlay() {
        let cfg = RunConfig {
            model: Some(ModelSpec::cz_gate(0.1, 0.3, 0)),
            window: Some([0.8, 1.2]),
            pulse: Some(PulseSpec::Explicit { time: 3.0 }),
            tunings: Some(vec![Tuning::Bare]),
            tuning_source: Some(TuningSource::Numeric {
                half_width: 0.1,
                points: 51,
            }),
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);

        let flags = RunConfig {
            model: Some(ModelSpec::ss_gate(0.2, 0)),
            points: Some(31),
            ..Default::default()
        };
        let merged = flags.overlay(cfg.clone());
        assert_eq!(merged.model, cfg.model);
        assert_eq!(merged.points, Some(31));
    }

    #[test]
    fn unknown_config_field_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            "{\n  \"model\": {\"kind\": \"ss_gate\"},\n  \"windw\": [0, 1]\n}",
        )
        .unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn pulse_flags() {
        let p = PulseArgs {
            pulse: Some(PulseArg::Explicit),
            time: None,
        };
        assert!(p.to_pulse().is_err());
        let p = PulseArgs {
            pulse: None,
            time: Some(2.0),
        };
        assert_eq!(
            p.to_pulse().unwrap(),
            Some(PulseSpec::Explicit { time: 2.0 })
        );
    }

    #[test]
    fn default_pulse_follows_vibrational_number() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.pulse_for(&ModelSpec::ss_gate(0.1, 0)), PulseSpec::LdPi);
        assert_eq!(
            cfg.pulse_for(&ModelSpec::ss_gate(0.1, 2)),
            PulseSpec::SidebandPi
        );
    }

    #[test]
    fn uncoupled_scan_finds_bare_crossing() {
        let cli = parse(&[
            "scan-spectrum",
            "--kind",
            "generic",
            "--rabi",
            "0",
            "--n-fock",
            "6",
            "--points",
            "41",
        ]);
        let out: Value = serde_json::from_str(&run(&cli).unwrap()).unwrap();
        assert!((out["structural"]["xi_s"].as_f64().unwrap() - 1.0).abs() < 1e-7);
        assert!(out["structural"]["min_gap"].as_f64().unwrap().abs() < 1e-7);
        assert_eq!(out["units"], UNITS);
    }

    #[test]
    fn numeric_failure_exit_code() {
        let cli = parse(&[
            "scan-spectrum",
            "--kind",
            "generic",
            "--rabi",
            "0.05",
            "--n-fock",
            "6",
            "--window",
            "0.5,0.9",
        ]);
        // window excludes the crossing: a configuration error
        assert_eq!(exit_code(&run(&cli).unwrap_err()), 2);
        assert_eq!(exit_code(&Error::ExtremumOnBoundary { xi: 1.0 }), 3);
    }

    #[test]
    fn runs_are_deterministic() {
        let args = [
            "find-resonance",
            "--kind",
            "generic",
            "--rabi",
            "0.05",
            "--n-fock",
            "8",
            "--points",
            "41",
        ];
        let a = run(&parse(&args)).unwrap();
        let b = run(&parse(&args)).unwrap();
        assert_eq!(a, b);
        let v: Value = serde_json::from_str(&a).unwrap();
        let xs = v["numeric"]["xi_s"].as_f64().unwrap();
        let xd = v["numeric"]["xi_d"].as_f64().unwrap();
        assert!((xs - 1.0).abs() < 1e-7 && (xd - 1.0).abs() < 1e-7);
        assert!((v["flip_maximum"]["xi_d"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    }
}
