//! Level-shift operator `R(E)` restricted to the resonant pair, the implicit
//! two-level effective Hamiltonian built from it, and the leading-order
//! Lamb-Dicke closed forms for the SS gate.
//!
//! Conventions: `delta = (w_b - w_a + r_bb - r_aa) / 2`, so the traceless
//! effective matrix is `[[-delta, r_ab], [r_ab*, delta]]` in the `(|a>, |b>)`
//! basis, and `Delta_D = xi_D - xi_S`.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{Partition, ScanModel};
use crate::report::UNITS;
use crate::search::{bisect, linspace, sign_change_near, REFINE_RTOL};
use crate::spectra::{find_structural_resonance, scan_levels, StructuralResonance};

/// Condition estimate above which the Q-subspace resolvent counts as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Central-difference step in `xi` for derivatives of `r`.
pub const DERIVATIVE_STEP: f64 = 1e-4;

pub const DEFAULT_MAX_ITER: usize = 50;

/// Consecutive non-decreasing term norms that count as divergence.
pub const DIVERGENCE_WINDOW: usize = 5;

/// Default tolerance of the implicit energy iteration.
pub const ENERGY_TOL: f64 = 1e-13;

fn block(m: &DMatrix<Complex64>, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
    m.select_rows(rows.iter()).select_columns(cols.iter())
}

fn to_matrix2(m: &DMatrix<Complex64>) -> Matrix2<Complex64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn norm1(m: &DMatrix<Complex64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `(E - M)^-1` for a Q block, rejecting near-singular systems.
fn q_inverse(m: &DMatrix<Complex64>, energy: f64) -> Result<DMatrix<Complex64>> {
    let n = m.nrows();
    let shifted = DMatrix::from_diagonal_element(n, n, Complex64::from(energy)) - m;
    let inverse = shifted
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularResolvent {
            energy,
            condition: f64::INFINITY,
        })?;
    let condition = norm1(&shifted) * norm1(&inverse);
    if !(condition <= SINGULAR_CONDITION) {
        return Err(Error::SingularResolvent { energy, condition });
    }
    Ok(inverse)
}

/// `R(E) = PVP + PVQ [Q(E - H)Q]^-1 QVP` on the pair `(|a>, |b>)`.
pub fn level_shift_resolvent(partition: &Partition, energy: f64) -> Result<Matrix2<Complex64>> {
    let p = partition.p_indices();
    let q = partition.q_indices();
    let v = partition.v.matrix();
    let h = partition.full()?.into_matrix();
    let pvp = block(v, &p, &p);
    if q.is_empty() {
        return Ok(to_matrix2(&pvp));
    }
    let g = q_inverse(&block(&h, &q, &q), energy)?;
    let r = pvp + block(v, &p, &q) * g * block(v, &q, &p);
    Ok(to_matrix2(&r))
}

/// Partial sum `PVP + sum_{n=1}^{order} PV (G0 V)^n P` with `G0 = Q/(E - H0)`.
pub fn level_shift_series(
    partition: &Partition,
    energy: f64,
    order: usize,
) -> Result<Matrix2<Complex64>> {
    let p = partition.p_indices();
    let q = partition.q_indices();
    let v = partition.v.matrix();
    let mut sum = block(v, &p, &p);
    if order == 0 || q.is_empty() {
        return Ok(to_matrix2(&sum));
    }
    let g0 = q_inverse(&block(partition.h0.matrix(), &q, &q), energy)?;
    let pvq = block(v, &p, &q);
    let step = &g0 * block(v, &q, &q);
    let mut y = &g0 * block(v, &q, &p);
    let mut last_norm = 0.0;
    let mut rising = 0;
    for n in 1..=order {
        if n > 1 {
            y = &step * y;
        }
        let term = &pvq * &y;
        let norm = term.norm();
        // odd orders can vanish by symmetry; compare only nonzero terms
        if norm > 0.0 {
            if last_norm > 0.0 && norm >= last_norm {
                rising += 1;
                if rising >= DIVERGENCE_WINDOW {
                    return Err(Error::SeriesDivergence { order: n });
                }
            } else {
                rising = 0;
            }
            last_norm = norm;
        }
        sum += term;
    }
    Ok(to_matrix2(&sum))
}

/// The traceless 2x2 effective Hamiltonian plus its trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTwoLevel {
    pub xi: f64,
    /// Energy at which `R` was evaluated.
    pub energy: f64,
    pub omega_a: f64,
    pub omega_b: f64,
    pub r_aa: f64,
    pub r_bb: f64,
    pub r_ab: Complex64,
    pub delta: f64,
    /// `(w_a + w_b)/2 + (r_aa + r_bb)/2`.
    pub trace: f64,
    /// Mixing angle in `[0, pi]` with `tan(theta) = -|r_ab| / delta`.
    pub theta: f64,
    /// Phase of `r_ab`.
    pub phi: f64,
}

impl EffectiveTwoLevel {
    pub fn from_elements(
        xi: f64,
        energy: f64,
        omega_a: f64,
        omega_b: f64,
        r_aa: f64,
        r_bb: f64,
        r_ab: Complex64,
    ) -> Self {
        let delta = 0.5 * (omega_b - omega_a + r_bb - r_aa);
        Self {
            xi,
            energy,
            omega_a,
            omega_b,
            r_aa,
            r_bb,
            r_ab,
            delta,
            trace: 0.5 * (omega_a + omega_b) + 0.5 * (r_aa + r_bb),
            theta: r_ab.norm().atan2(-delta),
            phi: r_ab.arg(),
        }
    }

    /// `sqrt(delta^2 + |r_ab|^2)`, half the dressed splitting.
    pub fn half_splitting(&self) -> f64 {
        self.delta.hypot(self.r_ab.norm())
    }

    pub fn splitting(&self) -> f64 {
        2.0 * self.half_splitting()
    }

    /// Absolute dressed energies `(E_+, E_-)`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let h = self.half_splitting();
        (self.trace + h, self.trace - h)
    }

    pub fn matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(
            Complex64::from(-self.delta),
            self.r_ab,
            self.r_ab.conj(),
            Complex64::from(self.delta),
        )
    }

    /// Coefficients of `|eps_+>` on `(|a>, |b>)`.
    pub fn dressed_plus(&self) -> [Complex64; 2] {
        let (s, c) = (0.5 * self.theta).sin_cos();
        let half = Complex64::from_polar(1.0, 0.5 * self.phi);
        [c * half, s * half.conj()]
    }

    /// Coefficients of `|eps_->` on `(|a>, |b>)`.
    pub fn dressed_minus(&self) -> [Complex64; 2] {
        let (s, c) = (0.5 * self.theta).sin_cos();
        let half = Complex64::from_polar(1.0, 0.5 * self.phi);
        [-s * half, c * half.conj()]
    }

    /// `[p_a+, p_a-, p_b+, p_b-]`.
    pub fn character(&self) -> [f64; 4] {
        let (s, c) = (0.5 * self.theta).sin_cos();
        [c * c, s * s, s * s, c * c]
    }

    /// Flip probability `|<b|exp(-iHt)|a>|^2` of the effective model.
    pub fn flip_probability(&self, t: f64) -> f64 {
        flip_probability_formula(self.delta, self.r_ab.norm(), t)
    }
}

/// `|r|^2 / (delta^2 + |r|^2) * sin^2(sqrt(delta^2 + |r|^2) t)`.
pub fn flip_probability_formula(delta: f64, r_abs: f64, t: f64) -> f64 {
    let h2 = delta * delta + r_abs * r_abs;
    if h2 == 0.0 {
        return 0.0;
    }
    r_abs * r_abs / h2 * (h2.sqrt() * t).sin().powi(2)
}

pub fn effective_from_shift(
    partition: &Partition,
    energy: f64,
    r: &Matrix2<Complex64>,
) -> EffectiveTwoLevel {
    EffectiveTwoLevel::from_elements(
        partition.xi,
        energy,
        partition.omega_a(),
        partition.omega_b(),
        r[(0, 0)].re,
        r[(1, 1)].re,
        r[(0, 1)],
    )
}

pub fn effective_hamiltonian(partition: &Partition, energy: f64) -> Result<EffectiveTwoLevel> {
    let r = level_shift_resolvent(partition, energy)?;
    Ok(effective_from_shift(partition, energy, &r))
}

/// Which eigenvalue of `H_eff(E)` the implicit iteration follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Upper,
    Lower,
    /// The trace, midway between the two dressed levels.
    Center,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImplicitSolution {
    pub energy: f64,
    pub iterations: usize,
    /// Energies visited, starting from the bare midpoint.
    pub history: Vec<f64>,
    pub effective: EffectiveTwoLevel,
}

/// Fixed point of `E = branch eigenvalue of H_eff(E)`, starting from
/// `(w_a + w_b)/2`.
pub fn iterate_implicit_energy(
    partition: &Partition,
    branch: Branch,
    tol: f64,
    max_iter: usize,
) -> Result<ImplicitSolution> {
    let mut energy = 0.5 * (partition.omega_a() + partition.omega_b());
    let mut history = vec![energy];
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        let eff = effective_hamiltonian(partition, energy)?;
        let (up, down) = eff.eigenvalues();
        let next = match branch {
            Branch::Upper => up,
            Branch::Lower => down,
            Branch::Center => eff.trace,
        };
        residual = (next - energy).abs();
        history.push(next);
        if residual <= tol {
            return Ok(ImplicitSolution {
                energy: next,
                iterations: iteration,
                history,
                effective: eff,
            });
        }
        energy = next;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Effective Hamiltonian at `xi` with `R` evaluated at the self-consistent
/// center energy.
pub fn effective_at(model: &dyn ScanModel, xi: f64) -> Result<EffectiveTwoLevel> {
    let partition = model.partition_at(xi)?;
    Ok(
        iterate_implicit_energy(&partition, Branch::Center, ENERGY_TOL, DEFAULT_MAX_ITER)?
            .effective,
    )
}

/// `2 delta d(delta)/d(xi) + d|r_ab|^2/d(xi)`, zero at the minimal splitting.
pub fn minimal_splitting_residual(model: &dyn ScanModel, xi: f64) -> Result<f64> {
    let h = DERIVATIVE_STEP;
    let mid = effective_at(model, xi)?;
    let up = effective_at(model, xi + h)?;
    let down = effective_at(model, xi - h)?;
    let d_delta = (up.delta - down.delta) / (2.0 * h);
    let d_r2 = (up.r_ab.norm_sqr() - down.r_ab.norm_sqr()) / (2.0 * h);
    Ok(2.0 * mid.delta * d_delta + d_r2)
}

// ---------------------------------------------------------------------------
// Shift reports

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMethod {
    ClosedFormLd,
    Resolvent,
    SeriesOrderK,
    NumericScan,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftReport {
    pub method: ShiftMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series_order: Option<usize>,
    pub xi_0: f64,
    pub xi_s: f64,
    pub xi_d: Option<f64>,
    /// `xi_S - xi_0`.
    pub delta_s: f64,
    /// `xi_D - xi_S`.
    pub delta_d: Option<f64>,
    pub min_gap: Option<f64>,
    /// `|Delta_D| <= 0.1 |Delta_S|`.
    pub dynamical_shift_negligible: Option<bool>,
    pub units: String,
    pub tolerance: f64,
    pub notes: Vec<String>,
}

impl ShiftReport {
    pub fn new(
        method: ShiftMethod,
        xi_0: f64,
        xi_s: f64,
        xi_d: Option<f64>,
        tolerance: f64,
    ) -> Self {
        let delta_s = xi_s - xi_0;
        let delta_d = xi_d.map(|d| d - xi_s);
        Self {
            method,
            series_order: None,
            xi_0,
            xi_s,
            xi_d,
            delta_s,
            delta_d,
            min_gap: None,
            dynamical_shift_negligible: delta_d.map(|d| d.abs() <= 0.1 * delta_s.abs()),
            units: UNITS.to_string(),
            tolerance,
            notes: Vec::new(),
        }
    }
}

/// Leading-order LD elements of the SS gate for `|+,n_+> <-> |-,n_->`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdElements {
    pub r_pp: f64,
    pub r_mm: f64,
    pub r_pm: Complex64,
}

fn f_term(upper: bool, n: usize, energy: f64, rabi: f64) -> f64 {
    // bare levels eps_{s,m} = m +- rabi/2 of the opposite spin
    let other = |m: f64| {
        if upper {
            m - rabi / 2.0
        } else {
            m + rabi / 2.0
        }
    };
    let sign = if upper { -1.0 } else { 1.0 };
    let n_f = n as f64;
    let mut sum = 0.0;
    if n > 0 {
        let den = energy - other(n_f - 1.0);
        if den != 0.0 {
            sum += n_f / den;
        }
    }
    let den = energy - other(n_f + 1.0);
    if den != 0.0 {
        sum += (n_f + 1.0) / den;
    }
    sign * 0.5 * (n_f + 0.5) + rabi / 4.0 * sum
}

/// Diagonal elements `eta^2 rabi F_pm(E, rabi)` and the direct first-sideband
/// coupling; terms with a vanishing denominator are omitted.
pub fn ld_elements(n_plus: usize, n_minus: usize, eta: f64, rabi: f64, energy: f64) -> LdElements {
    let r_pm = if n_minus == n_plus + 1 {
        Complex64::new(0.0, eta * rabi / 2.0 * (n_minus as f64).sqrt())
    } else {
        Complex64::from(0.0)
    };
    LdElements {
        r_pp: eta * eta * rabi * f_term(true, n_plus, energy, rabi),
        r_mm: eta * eta * rabi * f_term(false, n_minus, energy, rabi),
        r_pm,
    }
}

/// Tabulated `eta^2` coefficient of the structural shift for sideband `k`.
pub fn tabulated_structural_coefficient(n: usize, k: usize) -> Result<f64> {
    let n = n as f64;
    match k {
        1 => Ok(-0.25 * (n + 1.0)),
        2 => Ok(-(2.0 * n + 3.0) / 3.0),
        3 => Ok(-0.375 * (n + 2.0)),
        4 => Ok(-2.0 / 15.0 * (2.0 * n + 5.0)),
        _ => Err(Error::UnsupportedSideband(k)),
    }
}

/// Leading-order SS-gate shifts for `|+,n> <-> |-,n+k>`.
///
/// Elements are evaluated at the bare crossing `(xi_0, E_0)`. For `k = 1` the
/// dynamical shift uses `d|r_+-|^2/d(rabi)` only, the derivatives of the
/// diagonal elements being of higher order in `eta`. For `k > 1` the direct
/// coupling is of order `eta^k` and no dynamical shift is reported.
pub fn shift_closed_forms(n: usize, k: usize, eta: f64) -> Result<ShiftReport> {
    if !(1..=4).contains(&k) {
        return Err(Error::UnsupportedSideband(k));
    }
    let xi_0 = k as f64;
    let e_0 = (2 * n + k) as f64 / 2.0;
    let el = ld_elements(n, n + k, eta, xi_0, e_0);
    let shift = el.r_mm - el.r_pp;
    let mut report = if k == 1 {
        let xi_d = xi_0 + shift;
        // d|r_+-|^2 / d(rabi) = eta^2 rabi n_- / 2
        let d_r2 = eta * eta * xi_0 * (n + 1) as f64 / 2.0;
        let xi_s = xi_d - 2.0 * d_r2;
        let mut r = ShiftReport::new(ShiftMethod::ClosedFormLd, xi_0, xi_s, Some(xi_d), 0.0);
        r.notes.push("dynamical shift evaluated at xi_0".into());
        r.notes
            .push("derivatives of r_++ and r_-- dropped (higher order in eta)".into());
        r
    } else {
        let mut r = ShiftReport::new(ShiftMethod::ClosedFormLd, xi_0, xi_0 + shift, None, 0.0);
        r.notes.push(format!(
            "direct coupling is of order eta^{k}; dynamical shift not evaluated"
        ));
        r
    };
    report
        .notes
        .push("leading order in eta; elements evaluated at (xi_0, E_0)".into());
    Ok(report)
}

/// How the level-shift operator is evaluated in [`shift_first_order`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftEvaluation {
    Resolvent,
    Series(usize),
}

fn level_shift_with(
    partition: &Partition,
    energy: f64,
    how: ShiftEvaluation,
) -> Result<Matrix2<Complex64>> {
    match how {
        ShiftEvaluation::Resolvent => level_shift_resolvent(partition, energy),
        ShiftEvaluation::Series(order) => level_shift_series(partition, energy, order),
    }
}

/// First-approximation shifts: `R` evaluated at `E_0` with derivatives taken
/// at `xi_0`, derivatives of the diagonal elements retained.
pub fn shift_first_order(model: &dyn ScanModel, how: ShiftEvaluation) -> Result<ShiftReport> {
    let crossing = model.bare_crossing();
    let (xi_0, e_0) = (crossing.xi_0, crossing.e_0);
    let h = DERIVATIVE_STEP;
    let eval = |xi: f64| -> Result<EffectiveTwoLevel> {
        let partition = model.partition_at(xi)?;
        let r = level_shift_with(&partition, e_0, how)?;
        Ok(effective_from_shift(&partition, e_0, &r))
    };
    let mid = eval(xi_0)?;
    let up = eval(xi_0 + h)?;
    let down = eval(xi_0 - h)?;
    // bare detuning slope d(w_b - w_a)/d(xi)
    let s = ((up.omega_b - up.omega_a) - (down.omega_b - down.omega_a)) / (2.0 * h);
    if s == 0.0 {
        return Err(invalid("bare levels do not move apart with xi"));
    }
    let d_delta = (up.delta - down.delta) / (2.0 * h);
    let d_r2 = (up.r_ab.norm_sqr() - down.r_ab.norm_sqr()) / (2.0 * h);
    let xi_d = xi_0 - (mid.r_bb - mid.r_aa) / s;
    let xi_s = xi_d - d_r2 / (2.0 * d_delta * d_delta);
    let method = match how {
        ShiftEvaluation::Resolvent => ShiftMethod::Resolvent,
        ShiftEvaluation::Series(_) => ShiftMethod::SeriesOrderK,
    };
    let mut report = ShiftReport::new(method, xi_0, xi_s, Some(xi_d), h);
    if let ShiftEvaluation::Series(order) = how {
        report.series_order = Some(order);
    }
    report
        .notes
        .push("elements evaluated at (xi_0, E_0)".into());
    Ok(report)
}

/// Structural resonance from the dressed-spectrum scan and dynamical
/// resonance from the root of `delta(xi)` at the self-consistent energy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericResonances {
    pub report: ShiftReport,
    pub structural: StructuralResonance,
}

/// Samples of `delta` used to bracket its root.
const DELTA_SAMPLES: usize = 41;

pub fn dynamical_resonance_from_delta(model: &dyn ScanModel, window: (f64, f64)) -> Result<f64> {
    let grid = linspace(window.0, window.1, DELTA_SAMPLES);
    let deltas = grid
        .iter()
        .map(|&x| effective_at(model, x).map(|e| e.delta))
        .collect::<Result<Vec<_>>>()?;
    let xi_0 = model.bare_crossing().xi_0;
    let start = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - xi_0).abs().total_cmp(&(b.1 - xi_0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let k = sign_change_near(&deltas, start).ok_or(Error::RootNotBracketed {
        what: "effective detuning",
        lo: window.0,
        hi: window.1,
    })?;
    bisect(
        |x| effective_at(model, x).map(|e| e.delta),
        grid[k],
        grid[k + 1],
        REFINE_RTOL,
        "effective detuning",
    )
}

pub fn locate_resonances_numeric(
    model: &dyn ScanModel,
    window: (f64, f64),
    points: usize,
) -> Result<NumericResonances> {
    let track = scan_levels(model, window, points)?;
    let structural = find_structural_resonance(&track)?;
    let xi_d = dynamical_resonance_from_delta(model, window)?;
    let xi_0 = model.bare_crossing().xi_0;
    let mut report = ShiftReport::new(
        ShiftMethod::NumericScan,
        xi_0,
        structural.xi_s,
        Some(xi_d),
        REFINE_RTOL,
    );
    report.min_gap = Some(structural.min_gap);
    report
        .notes
        .push("xi_D from the root of delta with R at the self-consistent center energy".into());
    if !track.is_isolated() {
        report.notes.push(format!(
            "a third level exceeds overlap {} with the resonant pair",
            crate::spectra::INTRUSION_THRESHOLD
        ));
    }
    if !structural.slopes_agree {
        report
            .notes
            .push("level-slope crossing disagrees with the gap minimum beyond tolerance".into());
    }
    Ok(NumericResonances { report, structural })
}
