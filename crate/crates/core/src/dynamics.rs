//! Exact propagation on the truncated space: state-flip probabilities, the
//! dynamical resonance, gate errors and the pulse-rate bound.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::effective::{dynamical_resonance_from_delta, effective_at, shift_closed_forms};
use crate::error::{invalid, Error, Result};
use crate::fock::{basis_state, diagonalize, EigenDecomposition, HermitianOperator};
use crate::models::{ModelKind, ModelSpec, ScanModel};
use crate::report::{csv_preamble, fmt_sig};
use crate::search::{golden_section_max, linear_fit, LinearFit, REFINE_RTOL};
use crate::spectra::{find_structural_resonance, scan_levels};

pub const NORM_TOL: f64 = 1e-12;

/// Highest vibrational levels watched for truncation leakage.
pub const LEAKAGE_LEVELS: usize = 5;
pub const LEAKAGE_TOL: f64 = 1e-6;

/// Spectral propagator `exp(-iHt)` of a fixed Hamiltonian.
pub struct Propagator {
    eig: EigenDecomposition,
}

impl Propagator {
    pub fn new(h: &HermitianOperator) -> Self {
        Self {
            eig: diagonalize(h),
        }
    }

    pub fn evolve(&self, psi0: &DVector<Complex64>, t: f64) -> Result<DVector<Complex64>> {
        let norm = psi0.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        if psi0.len() != self.eig.len() {
            return Err(invalid(format!(
                "state has dimension {}, Hamiltonian {}",
                psi0.len(),
                self.eig.len()
            )));
        }
        let v = &self.eig.eigenvectors;
        let mut coeffs = v.ad_mul(psi0);
        for (c, &lambda) in coeffs.iter_mut().zip(self.eig.eigenvalues.iter()) {
            *c *= Complex64::from_polar(1.0, -lambda * t);
        }
        Ok(v * coeffs)
    }
}

pub fn propagate(
    h: &HermitianOperator,
    psi0: &DVector<Complex64>,
    t: f64,
) -> Result<DVector<Complex64>> {
    Propagator::new(h).evolve(psi0, t)
}

/// Rule fixing the pulse duration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PulseSpec {
    /// `t = pi / (2 sqrt(delta^2 + |r_ab|^2))`, a pi pulse of the effective model.
    EffectivePi,
    /// `eta rabi t = pi`.
    LdPi,
    /// `eta rabi sqrt(n + 1) t = pi`.
    SidebandPi,
    Explicit {
        time: f64,
    },
}

impl PulseSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PulseSpec::EffectivePi => "effective_pi",
            PulseSpec::LdPi => "ld_pi",
            PulseSpec::SidebandPi => "sideband_pi",
            PulseSpec::Explicit { .. } => "explicit",
        }
    }

    pub fn duration(&self, model: &dyn ScanModel, xi: f64) -> Result<f64> {
        let nominal = |sideband: bool| {
            model
                .pulse_frequency(xi, sideband)
                .ok_or_else(|| invalid(format!("model defines no {} pulse", self.name())))
        };
        let t = match *self {
            PulseSpec::EffectivePi => PI / (2.0 * effective_at(model, xi)?.half_splitting()),
            PulseSpec::LdPi => PI / nominal(false)?,
            PulseSpec::SidebandPi => PI / nominal(true)?,
            PulseSpec::Explicit { time } => time,
        };
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!(
                "{} pulse has non-positive duration {t}",
                self.name()
            )));
        }
        Ok(t)
    }
}

/// `pi / (eta rabi sqrt(n + 1))`.
pub fn pi_duration(eta: f64, rabi: f64, n: usize) -> f64 {
    PI / (eta * rabi * ((n + 1) as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipResult {
    pub xi: f64,
    pub probability: f64,
    pub duration: f64,
    /// Final weight on the highest [`LEAKAGE_LEVELS`] vibrational levels.
    pub leakage: f64,
    pub leakage_warning: bool,
}

/// Prepares `|a>`, propagates under the full Hamiltonian at `xi` and returns
/// `|<b|psi(t)>|^2`.
pub fn flip_probability(model: &dyn ScanModel, xi: f64, pulse: PulseSpec) -> Result<FlipResult> {
    let partition = model.partition_at(xi)?;
    let duration = pulse.duration(model, xi)?;
    let n_fock = partition.n_fock();
    let psi0 = basis_state(partition.a, n_fock)?;
    let psi = propagate(&partition.full()?, &psi0, duration)?;
    let first_watched = 2 * n_fock.saturating_sub(LEAKAGE_LEVELS);
    let leakage = psi.iter().skip(first_watched).map(|z| z.norm_sqr()).sum();
    Ok(FlipResult {
        xi,
        probability: psi[partition.b.flat()].norm_sqr(),
        duration,
        leakage,
        leakage_warning: leakage > LEAKAGE_TOL,
    })
}

/// `sqrt(1 - P_flip)`.
pub fn gate_error(model: &dyn ScanModel, xi: f64, pulse: PulseSpec) -> Result<f64> {
    Ok(error_from_probability(
        flip_probability(model, xi, pulse)?.probability,
    ))
}

pub fn error_from_probability(p: f64) -> f64 {
    (1.0 - p).clamp(0.0, 1.0).sqrt()
}

/// Flip probability over a grid of `xi`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlipScan {
    pub pulse: PulseSpec,
    pub points: Vec<FlipResult>,
}

impl FlipScan {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(csv_preamble().as_bytes())?;
        writeln!(out, "xi,P,pulse_rule")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{}",
                fmt_sig(p.xi),
                fmt_sig(p.probability),
                self.pulse.name()
            )?;
        }
        Ok(())
    }

    pub fn any_leakage(&self) -> bool {
        self.points.iter().any(|p| p.leakage_warning)
    }
}

pub fn scan_flip_probability(
    model: &dyn ScanModel,
    grid: &[f64],
    pulse: PulseSpec,
) -> Result<FlipScan> {
    let points = grid
        .par_iter()
        .map(|&xi| flip_probability(model, xi, pulse))
        .collect::<Result<Vec<_>>>()?;
    Ok(FlipScan { pulse, points })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicalResonance {
    pub xi_d: f64,
    pub p_max: f64,
    pub scan: FlipScan,
}

/// Grid scan of `P_flip` followed by golden-section refinement of the maximum.
pub fn find_dynamical_resonance(
    model: &dyn ScanModel,
    window: (f64, f64),
    points: usize,
    pulse: PulseSpec,
) -> Result<DynamicalResonance> {
    if points < 3 || !(window.0 < window.1) {
        return Err(invalid(format!(
            "need a nonempty window and at least 3 points, got [{}, {}] with {points}",
            window.0, window.1
        )));
    }
    let grid = crate::search::linspace(window.0, window.1, points);
    let scan = scan_flip_probability(model, &grid, pulse)?;
    let i = (0..points)
        .max_by(|&i, &j| {
            scan.points[i]
                .probability
                .total_cmp(&scan.points[j].probability)
        })
        .expect("nonempty grid");
    if i == 0 || i == points - 1 {
        return Err(Error::ExtremumOnBoundary { xi: grid[i] });
    }
    let (xi_d, p_max) = golden_section_max(
        |x| flip_probability(model, x, pulse).map(|r| r.probability),
        grid[i - 1],
        grid[i + 1],
        REFINE_RTOL,
    )?;
    Ok(DynamicalResonance { xi_d, p_max, scan })
}

/// Where the scan parameter is set when operating the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    /// Bare crossing `xi_0`.
    Bare,
    /// Minimal splitting `xi_S`.
    Structural,
    /// Vanishing effective detuning `xi_D`.
    Dynamical,
}

impl Tuning {
    pub const ALL: [Tuning; 3] = [Tuning::Bare, Tuning::Structural, Tuning::Dynamical];

    pub fn name(self) -> &'static str {
        match self {
            Tuning::Bare => "bare",
            Tuning::Structural => "structural",
            Tuning::Dynamical => "dynamical",
        }
    }
}

/// How tuned values of `xi` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum TuningSource {
    /// Leading-order LD formulas (SS gate only).
    ClosedForm,
    /// Gap minimum and root of `delta` in `xi_0 +- half_width`.
    Numeric { half_width: f64, points: usize },
}

pub fn tuned_xi(spec: &ModelSpec, tuning: Tuning, source: TuningSource) -> Result<f64> {
    let xi_0 = spec.bare_crossing().xi_0;
    if tuning == Tuning::Bare {
        return Ok(xi_0);
    }
    match source {
        TuningSource::ClosedForm => {
            if spec.kind != ModelKind::SsGate {
                return Err(invalid("closed-form tunings exist only for the SS gate"));
            }
            let k = spec.sideband_order();
            if k < 1 {
                return Err(Error::UnsupportedSideband(0));
            }
            let report = shift_closed_forms(spec.transition[0], k as usize, spec.eta)?;
            match tuning {
                Tuning::Structural => Ok(report.xi_s),
                _ => report.xi_d.ok_or_else(|| {
                    invalid(format!(
                        "no closed-form dynamical resonance for sideband {k}"
                    ))
                }),
            }
        }
        TuningSource::Numeric { half_width, points } => {
            let window = (xi_0 - half_width, xi_0 + half_width);
            match tuning {
                Tuning::Structural => {
                    Ok(find_structural_resonance(&scan_levels(spec, window, points)?)?.xi_s)
                }
                _ => dynamical_resonance_from_delta(spec, window),
            }
        }
    }
}

/// Model parameter varied along a gate-error curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Eta,
    Rabi,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Eta => "eta",
            SweepParameter::Rabi => "rabi",
        }
    }

    pub fn apply(self, spec: &ModelSpec, value: f64) -> ModelSpec {
        let mut out = spec.clone();
        match self {
            SweepParameter::Eta => out.eta = value,
            SweepParameter::Rabi => out.rabi = value,
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateErrorCurve {
    pub tuning: Tuning,
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub xi: Vec<f64>,
    pub errors: Vec<f64>,
}

impl GateErrorCurve {
    pub fn fit(&self) -> Result<LinearFit> {
        linear_fit(&self.grid, &self.errors)
    }

    /// Error at the grid point closest to `value`.
    pub fn error_near(&self, value: f64) -> f64 {
        let i = (0..self.grid.len())
            .min_by(|&i, &j| {
                (self.grid[i] - value)
                    .abs()
                    .total_cmp(&(self.grid[j] - value).abs())
            })
            .expect("nonempty curve");
        self.errors[i]
    }
}

pub fn gate_error_curve(
    base: &ModelSpec,
    parameter: SweepParameter,
    grid: &[f64],
    tuning: Tuning,
    pulse: PulseSpec,
    source: TuningSource,
) -> Result<GateErrorCurve> {
    let rows = grid
        .par_iter()
        .map(|&value| {
            let spec = parameter.apply(base, value);
            spec.validate()?;
            let xi = tuned_xi(&spec, tuning, source)?;
            Ok((xi, gate_error(&spec, xi, pulse)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let (xi, errors) = rows.into_iter().unzip();
    Ok(GateErrorCurve {
        tuning,
        parameter,
        grid: grid.to_vec(),
        xi,
        errors,
    })
}

/// CSV with columns `<parameter>, error, tuning`, one block per curve.
pub fn write_curves_csv<W: Write>(curves: &[GateErrorCurve], mut out: W) -> std::io::Result<()> {
    out.write_all(csv_preamble().as_bytes())?;
    let parameter = curves.first().map_or("eta", |c| c.parameter.name());
    writeln!(out, "{parameter},error,tuning")?;
    for curve in curves {
        for (x, e) in curve.grid.iter().zip(&curve.errors) {
            writeln!(
                out,
                "{},{},{}",
                fmt_sig(*x),
                fmt_sig(*e),
                curve.tuning.name()
            )?;
        }
    }
    Ok(())
}

/// Admissible pulse rate for one tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleRate {
    pub tuning: Tuning,
    /// Largest `eta` whose fitted error stays below the threshold.
    pub eta_max: f64,
    pub duration: f64,
    pub rate: f64,
    pub fit: LinearFit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedBound {
    pub epsilon_t: f64,
    pub eta: f64,
    pub rabi: f64,
    pub n: usize,
    /// `T_n` at the requested `eta`.
    pub duration: f64,
    pub rate: f64,
    pub bare: AdmissibleRate,
    pub dynamical: AdmissibleRate,
    /// Admissible rate, dynamical over bare tuning.
    pub rate_ratio: f64,
    /// Advantage `1/eta` of the SS bound over a bound scaling with `eta`.
    pub cz_rate_ratio: f64,
    pub units: String,
}

fn admissible(
    tuning: Tuning,
    fit: LinearFit,
    epsilon_t: f64,
    eta_range: (f64, f64),
    rabi: f64,
    n: usize,
) -> Result<AdmissibleRate> {
    let eta_max = fit.invert(epsilon_t);
    if !(fit.slope > 0.0 && eta_range.0 <= eta_max && eta_max <= eta_range.1) {
        return Err(Error::ThresholdUnreachable {
            epsilon_t,
            eta_min: eta_range.0,
            eta_max: eta_range.1,
            tuning: tuning.name(),
        });
    }
    let duration = pi_duration(eta_max, rabi, n);
    Ok(AdmissibleRate {
        tuning,
        eta_max,
        duration,
        rate: 1.0 / duration,
        fit,
    })
}

/// Inverts the fitted linear error models `eps(eta)` at `epsilon_t`.
pub fn speed_bound(
    epsilon_t: f64,
    eta: f64,
    rabi: f64,
    n: usize,
    bare_fit: LinearFit,
    dynamical_fit: LinearFit,
    eta_range: (f64, f64),
) -> Result<SpeedBound> {
    if !(epsilon_t > 0.0 && epsilon_t < 1.0) {
        return Err(invalid(format!(
            "epsilon_t must lie in (0, 1), got {epsilon_t}"
        )));
    }
    if !(eta > 0.0 && rabi > 0.0) {
        return Err(invalid("eta and rabi must be positive"));
    }
    let bare = admissible(Tuning::Bare, bare_fit, epsilon_t, eta_range, rabi, n)?;
    let dynamical = admissible(
        Tuning::Dynamical,
        dynamical_fit,
        epsilon_t,
        eta_range,
        rabi,
        n,
    )?;
    let duration = pi_duration(eta, rabi, n);
    Ok(SpeedBound {
        epsilon_t,
        eta,
        rabi,
        n,
        duration,
        rate: 1.0 / duration,
        rate_ratio: dynamical.rate / bare.rate,
        bare,
        dynamical,
        cz_rate_ratio: 1.0 / eta,
        units: crate::report::UNITS.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::flip_probability_formula;
    use crate::fock::embed;
    use crate::models::{build_generic_partition, multiphonon_coupling, BareCrossing, FnModel};
    use nalgebra::{DMatrix, Matrix2};

    fn two_level(delta: f64, r: Complex64) -> HermitianOperator {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::from(-delta), r, r.conj(), Complex64::from(delta)],
        );
        HermitianOperator::new(m, 1).unwrap()
    }

    #[test]
    fn trivial_evolutions() {
        let h = two_level(0.3, Complex64::new(0.1, 0.2));
        let psi0 = DVector::from_vec(vec![Complex64::from(0.6), Complex64::new(0.0, 0.8)]);
        assert!((propagate(&h, &psi0, 0.0).unwrap() - &psi0).norm() < 1e-14);
        let d = two_level(0.7, Complex64::from(0.0));
        let psi = propagate(&d, &psi0, 3.3).unwrap();
        assert!((psi[0].norm_sqr() - 0.36).abs() < 1e-14);
        assert!((psi[0] - Complex64::from_polar(0.6, 0.7 * 3.3)).norm() < 1e-14);
    }

    #[test]
    fn unnormalized_state_rejected() {
        let h = two_level(0.3, Complex64::from(0.1));
        let psi0 = DVector::from_vec(vec![Complex64::from(1.0), Complex64::from(0.1)]);
        assert!(matches!(
            propagate(&h, &psi0, 1.0),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn unitarity_and_time_reversal() {
        let spec = ModelSpec::ss_gate(0.3, 0);
        let h = spec.hamiltonian().unwrap();
        let prop = Propagator::new(&h);
        let psi0 = basis_state(spec.resonant_pair().0, spec.n_fock).unwrap();
        let psi = prop.evolve(&psi0, 17.3).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-10);
        let back = prop.evolve(&psi, -17.3).unwrap();
        assert!((back - psi0).norm() < 1e-10);
    }

    #[test]
    fn two_level_flip_formula() {
        let (delta, r, t) = (0.2, Complex64::new(0.05, -0.3), 4.1);
        let psi = propagate(
            &two_level(delta, r),
            &DVector::from_vec(vec![Complex64::from(1.0), Complex64::from(0.0)]),
            t,
        )
        .unwrap();
        assert!((psi[1].norm_sqr() - flip_probability_formula(delta, r.norm(), t)).abs() < 1e-12);
    }

    #[test]
    fn resonant_effective_pi_pulse_flips() {
        let spec = ModelSpec::generic(0.02, 1.0, [0, 1]).with_n_fock(10);
        let res = flip_probability(&spec, 1.0, PulseSpec::EffectivePi).unwrap();
        assert!((res.probability - 1.0).abs() < 1e-12);
        assert!((res.duration / (PI / 0.02) - 1.0).abs() < 1e-6);
        assert!(!res.leakage_warning);
    }

    #[test]
    fn pulse_durations() {
        let spec = ModelSpec::ss_gate(0.1, 1);
        assert!((PulseSpec::LdPi.duration(&spec, 1.0).unwrap() - PI / 0.1).abs() < 1e-12);
        let t = PulseSpec::SidebandPi.duration(&spec, 1.0).unwrap();
        assert!((t - PI / (0.1 * 2f64.sqrt())).abs() < 1e-12);
        assert!((pi_duration(0.1, 1.0, 3) - pi_duration(0.1, 1.0, 0) / 2.0).abs() < 1e-12);
        assert!(PulseSpec::Explicit { time: 0.0 }
            .duration(&spec, 1.0)
            .is_err());
        let toy = FnModel {
            build: |xi: f64| {
                build_generic_partition(1.0, xi, [0, 1], 4, |l| multiphonon_coupling(l, 0.1, 1))
            },
            crossing: BareCrossing {
                xi_0: 1.0,
                e_0: 0.5,
            },
        };
        assert!(PulseSpec::LdPi.duration(&toy, 1.0).is_err());
    }

    #[test]
    fn pulse_json_tags() {
        let v = serde_json::to_value(PulseSpec::Explicit { time: 2.0 }).unwrap();
        assert_eq!(v["rule"], "explicit");
        let p: PulseSpec = serde_json::from_str(r#"{"rule":"ld_pi"}"#).unwrap();
        assert_eq!(p, PulseSpec::LdPi);
    }

    #[test]
    fn truncation_leakage_flagged() {
        // a displaced state spreads over every vibrational level
        let spec = ModelSpec::ss_gate(2.0, 0).with_n_fock(8);
        let res = flip_probability(&spec, 1.0, PulseSpec::Explicit { time: 3.0 }).unwrap();
        assert!(res.leakage_warning, "{}", res.leakage);
    }

    #[test]
    fn constant_coupling_peaks_at_zero_detuning() {
        let spec = ModelSpec::generic(0.02, 1.0, [0, 1]).with_n_fock(6);
        let pulse = PulseSpec::Explicit { time: PI / 0.02 };
        let res = find_dynamical_resonance(&spec, (0.9, 1.1), 41, pulse).unwrap();
        assert!((res.xi_d - 1.0).abs() < 1e-6, "{}", res.xi_d);
        assert!((res.p_max - 1.0).abs() < 1e-10);
    }

    #[test]
    fn maximum_on_boundary_rejected() {
        let spec = ModelSpec::generic(0.02, 1.0, [0, 1]).with_n_fock(6);
        let pulse = PulseSpec::Explicit { time: PI / 0.02 };
        assert!(matches!(
            find_dynamical_resonance(&spec, (1.02, 1.2), 11, pulse),
            Err(Error::ExtremumOnBoundary { .. })
        ));
    }

    #[test]
    fn ss_dynamical_resonance_below_unit_probability() {
        let spec = ModelSpec::ss_gate(0.3, 0);
        let res = find_dynamical_resonance(&spec, (0.95, 1.2), 51, PulseSpec::LdPi).unwrap();
        assert!((res.xi_d - 1.0675).abs() < 0.01, "{}", res.xi_d);
        assert!(res.p_max < 1.0 && res.p_max > 0.9);
    }

    #[test]
    fn effective_model_matches_exact_peak() {
        for eta in [0.05, 0.1] {
            let spec = ModelSpec::ss_gate(eta, 0);
            let xi = tuned_xi(&spec, Tuning::Dynamical, TuningSource::ClosedForm).unwrap();
            let exact = flip_probability(&spec, xi, PulseSpec::LdPi).unwrap();
            let eff = effective_at(&spec, xi).unwrap();
            let approx = eff.flip_probability(exact.duration);
            assert!(
                (exact.probability - approx).abs() < 0.05,
                "{eta}: {} {approx}",
                exact.probability
            );
        }
    }

    #[test]
    fn gate_error_curves_and_csv() {
        let base = ModelSpec::ss_gate(0.1, 0);
        let grid = [0.1, 0.2];
        let curves: Vec<_> = Tuning::ALL
            .iter()
            .map(|&t| {
                gate_error_curve(
                    &base,
                    SweepParameter::Eta,
                    &grid,
                    t,
                    PulseSpec::LdPi,
                    TuningSource::ClosedForm,
                )
                .unwrap()
            })
            .collect();
        let at = |t: usize| curves[t].error_near(0.2);
        assert!(at(1) > at(0) && at(0) > at(2));
        let mut buf = Vec::new();
        write_curves_csv(&curves, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("eta,error,tuning"));
        assert_eq!(text.lines().count(), 2 + 6);
        assert!(text.lines().last().unwrap().ends_with(",dynamical"));
    }

    #[test]
    fn closed_form_tunings_need_ss_gate() {
        let cz = ModelSpec::cz_gate(0.1, 0.3, 0);
        assert!(tuned_xi(&cz, Tuning::Structural, TuningSource::ClosedForm).is_err());
        assert_eq!(
            tuned_xi(&cz, Tuning::Bare, TuningSource::ClosedForm).unwrap(),
            1.0
        );
        let ss2 = ModelSpec {
            transition: [0, 2],
            ..ModelSpec::ss_gate(0.1, 0)
        };
        assert!(tuned_xi(&ss2, Tuning::Structural, TuningSource::ClosedForm).is_ok());
        assert!(tuned_xi(&ss2, Tuning::Dynamical, TuningSource::ClosedForm).is_err());
    }

    #[test]
    fn speed_bound_inverts_fits() {
        let bare = LinearFit {
            slope: 0.8,
            intercept: 0.0,
            r_squared: 1.0,
        };
        let dynamical = LinearFit {
            slope: 0.25,
            intercept: 0.0,
            r_squared: 1.0,
        };
        let sb = speed_bound(0.05, 0.1, 1.0, 0, bare, dynamical, (0.05, 0.3)).unwrap();
        assert!((sb.rate - 0.1 / PI).abs() < 1e-15);
        assert!((sb.bare.eta_max - 0.0625).abs() < 1e-15);
        assert!((sb.rate_ratio - 3.2).abs() < 1e-12);
        assert!((sb.cz_rate_ratio - 10.0).abs() < 1e-12);
        assert!(matches!(
            speed_bound(0.5, 0.1, 1.0, 0, bare, dynamical, (0.05, 0.3)),
            Err(Error::ThresholdUnreachable { .. })
        ));
        assert!(speed_bound(1.5, 0.1, 1.0, 0, bare, dynamical, (0.05, 0.3)).is_err());
    }

    #[test]
    fn diagonal_hamiltonian_keeps_populations() {
        let osc = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::from(0.0),
            Complex64::from(1.0),
        ]));
        let h = HermitianOperator::new(embed(&osc, &Matrix2::identity()), 2).unwrap();
        let amp = Complex64::from(0.5);
        let psi0 = DVector::from_element(4, amp);
        let psi = propagate(&h, &psi0, 2.2).unwrap();
        for z in psi.iter() {
            assert!((z.norm_sqr() - 0.25).abs() < 1e-14);
        }
    }
}
