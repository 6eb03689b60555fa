//! Concrete Hamiltonians and their `H0 + V` partitions.
//!
//! Three models are supported:
//!
//! * the generic two-level system plus oscillator, `H = w a^dag a + (xi/2) s_z + V`,
//!   with a multi-phonon Jaynes-Cummings coupling of strength `rabi`;
//! * the Stark-shift (SS) gate: the trapped-ion Hamiltonian at zero detuning,
//!   written in the `|+->` basis and split with the Lamb-Dicke parameter as
//!   the small quantity (scan parameter: the Rabi frequency);
//! * the Cirac-Zoller (CZ) interaction: the same Hamiltonian in the bare
//!   `|g>, |e>` basis, split with the Rabi frequency as the small quantity
//!   (scan parameter: the detuning).

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fock::{
    build_ladder_operators, coupling_matrix, embed, BasisIndex, HermitianOperator, Ladder, Spin,
    DEFAULT_N_FOCK, I, ONE, ZERO,
};

/// Trap frequency; the unit of every energy and frequency in the crate.
pub const OMEGA_T: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GenericTwoLevelOscillator,
    SsGate,
    CzGate,
}

/// Which model parameter is scanned as `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiParameter {
    /// Rabi frequency (SS gate).
    Rabi,
    /// Laser detuning (CZ interaction).
    Detuning,
    /// Two-level splitting of the generic model, stored in the `detuning` field.
    Splitting,
}

impl XiParameter {
    pub fn name(self) -> &'static str {
        match self {
            XiParameter::Rabi => "rabi",
            XiParameter::Detuning => "detuning",
            XiParameter::Splitting => "splitting",
        }
    }
}

fn default_n_fock() -> usize {
    DEFAULT_N_FOCK
}

fn default_transition() -> [usize; 2] {
    [0, 1]
}

/// Model description, serializable as the JSON model config.
///
/// For the generic model `detuning` holds the two-level splitting `xi` and
/// `rabi` the coupling strength; `eta` is unused there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub rabi: f64,
    #[serde(default)]
    pub detuning: f64,
    #[serde(default = "default_n_fock")]
    pub n_fock: usize,
    /// `(n_a, n_b)`: vibrational numbers of the two resonant bare states.
    #[serde(default = "default_transition")]
    pub transition: [usize; 2],
}

/// Location of the bare level crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BareCrossing {
    pub xi_0: f64,
    pub e_0: f64,
}

impl ModelSpec {
    /// SS gate at the first Rabi resonance for `|+,n> <-> |-,n+1>`.
    pub fn ss_gate(eta: f64, n: usize) -> Self {
        Self {
            kind: ModelKind::SsGate,
            eta,
            rabi: OMEGA_T,
            detuning: 0.0,
            n_fock: DEFAULT_N_FOCK,
            transition: [n, n + 1],
        }
    }

    /// CZ interaction on the first blue sideband `|g,n> <-> |e,n+1>`.
    pub fn cz_gate(eta: f64, rabi: f64, n: usize) -> Self {
        Self {
            kind: ModelKind::CzGate,
            eta,
            rabi,
            detuning: OMEGA_T,
            n_fock: 20,
            transition: [n, n + 1],
        }
    }

    /// Generic model with a multi-phonon Jaynes-Cummings coupling.
    pub fn generic(coupling: f64, splitting: f64, transition: [usize; 2]) -> Self {
        Self {
            kind: ModelKind::GenericTwoLevelOscillator,
            eta: 0.0,
            rabi: coupling,
            detuning: splitting,
            n_fock: DEFAULT_N_FOCK,
            transition,
        }
    }

    pub fn with_n_fock(mut self, n_fock: usize) -> Self {
        self.n_fock = n_fock;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(invalid(format!(
                "eta must be finite and >= 0, got {}",
                self.eta
            )));
        }
        if !self.rabi.is_finite() || !self.detuning.is_finite() {
            return Err(invalid("rabi and detuning must be finite"));
        }
        if self.n_fock < 2 {
            return Err(invalid(format!(
                "n_fock must be at least 2, got {}",
                self.n_fock
            )));
        }
        let [na, nb] = self.transition;
        if na.max(nb) >= self.n_fock {
            return Err(invalid(format!(
                "transition ({na}, {nb}) lies outside truncation n_fock = {}",
                self.n_fock
            )));
        }
        match self.kind {
            ModelKind::SsGate => {
                if self.detuning != 0.0 {
                    return Err(invalid(format!(
                        "the SS gate requires zero detuning, got {}",
                        self.detuning
                    )));
                }
                if nb <= na {
                    return Err(invalid(format!(
                        "SS transition |+,{na}> <-> |-,{nb}> needs n_minus > n_plus"
                    )));
                }
            }
            ModelKind::CzGate => {
                if na == nb {
                    return Err(invalid("CZ transition must change the vibrational number"));
                }
            }
            ModelKind::GenericTwoLevelOscillator => {}
        }
        Ok(())
    }

    pub fn xi_parameter(&self) -> XiParameter {
        match self.kind {
            ModelKind::SsGate => XiParameter::Rabi,
            ModelKind::CzGate => XiParameter::Detuning,
            ModelKind::GenericTwoLevelOscillator => XiParameter::Splitting,
        }
    }

    pub fn xi(&self) -> f64 {
        match self.xi_parameter() {
            XiParameter::Rabi => self.rabi,
            XiParameter::Detuning | XiParameter::Splitting => self.detuning,
        }
    }

    pub fn with_xi(&self, xi: f64) -> Self {
        let mut out = self.clone();
        match self.xi_parameter() {
            XiParameter::Rabi => out.rabi = xi,
            XiParameter::Detuning | XiParameter::Splitting => out.detuning = xi,
        }
        out
    }

    /// Signed number of vibrational quanta exchanged, `n_b - n_a`.
    pub fn sideband_order(&self) -> i64 {
        self.transition[1] as i64 - self.transition[0] as i64
    }

    /// The two resonant bare states `(|a>, |b>)` in the partition basis.
    pub fn resonant_pair(&self) -> (BasisIndex, BasisIndex) {
        let [na, nb] = self.transition;
        match self.kind {
            // |a> = |+,n_+>, |b> = |-,n_->; |a>, |b> of the generic model
            ModelKind::SsGate | ModelKind::GenericTwoLevelOscillator => (
                BasisIndex::new(Spin::Upper, na),
                BasisIndex::new(Spin::Lower, nb),
            ),
            // |a> = |g,n_a>, |b> = |e,n_b>, with Upper = |e>
            ModelKind::CzGate => (
                BasisIndex::new(Spin::Lower, na),
                BasisIndex::new(Spin::Upper, nb),
            ),
        }
    }

    pub fn bare_crossing(&self) -> BareCrossing {
        let [na, nb] = self.transition;
        BareCrossing {
            xi_0: (nb as f64 - na as f64) * OMEGA_T,
            e_0: (na + nb) as f64 * OMEGA_T / 2.0,
        }
    }

    pub fn partition(&self) -> Result<Partition> {
        self.validate()?;
        match self.kind {
            ModelKind::SsGate => build_ss_partition(self),
            ModelKind::CzGate => build_cz_partition(self),
            ModelKind::GenericTwoLevelOscillator => {
                let k = self.sideband_order();
                let g = self.rabi;
                build_generic_partition(OMEGA_T, self.detuning, self.transition, self.n_fock, |l| {
                    multiphonon_coupling(l, g, k)
                })
            }
        }
    }

    /// Full Hamiltonian in the partition basis.
    pub fn hamiltonian(&self) -> Result<HermitianOperator> {
        self.partition()?.full()
    }
}

/// `Omega_R^(0) = (n_- - n_+) omega_T`, the bare Rabi resonance of `|+,n_+> <-> |-,n_->`.
pub fn rabi_resonance(n_plus: usize, n_minus: usize) -> f64 {
    (n_minus as f64 - n_plus as f64) * OMEGA_T
}

/// `H = H0 + V` with the resonant pair `|a>, |b>` spanning P.
#[derive(Debug, Clone)]
pub struct Partition {
    pub h0: HermitianOperator,
    pub v: HermitianOperator,
    pub a: BasisIndex,
    pub b: BasisIndex,
    pub xi: f64,
}

impl Partition {
    pub fn n_fock(&self) -> usize {
        self.h0.n_fock()
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn full(&self) -> Result<HermitianOperator> {
        self.h0.add(&self.v)
    }

    /// Bare energy `<alpha|H0|alpha>`.
    pub fn bare_energy(&self, state: BasisIndex) -> f64 {
        self.h0.entry(state, state).re
    }

    pub fn omega_a(&self) -> f64 {
        self.bare_energy(self.a)
    }

    pub fn omega_b(&self) -> f64 {
        self.bare_energy(self.b)
    }

    pub fn p_indices(&self) -> [usize; 2] {
        [self.a.flat(), self.b.flat()]
    }

    pub fn q_indices(&self) -> Vec<usize> {
        let p = self.p_indices();
        (0..self.dim()).filter(|i| !p.contains(i)).collect()
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

// Spin matrices in the (Upper, Lower) ordering.
fn sigma_z() -> Matrix2<Complex64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

fn sigma_plus() -> Matrix2<Complex64> {
    Matrix2::new(ZERO, ONE, ZERO, ZERO)
}

fn sigma_minus() -> Matrix2<Complex64> {
    Matrix2::new(ZERO, ZERO, ONE, ZERO)
}

fn sigma_x() -> Matrix2<Complex64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

/// Pauli operators used by the models, `(Upper, Lower)` ordering.
pub mod pauli {
    use super::*;

    pub fn z() -> Matrix2<Complex64> {
        sigma_z()
    }

    pub fn x() -> Matrix2<Complex64> {
        sigma_x()
    }

    pub fn plus() -> Matrix2<Complex64> {
        sigma_plus()
    }

    pub fn minus() -> Matrix2<Complex64> {
        sigma_minus()
    }

    /// Columns are `|+>, |->` expressed in `(|e>, |g>)`, with
    /// `|+-> = (|g> +- |e>)/sqrt 2`.
    pub fn plus_minus_basis() -> Matrix2<Complex64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Matrix2::new(c(s), c(-s), c(s), c(s))
    }
}

fn identity_spin() -> Matrix2<Complex64> {
    Matrix2::identity()
}

/// `1_osc (x) W` mapping `|+->` amplitudes to `|e>, |g>` amplitudes.
pub fn spin_basis_change(n_fock: usize) -> DMatrix<Complex64> {
    embed(
        &DMatrix::identity(n_fock, n_fock),
        &pauli::plus_minus_basis(),
    )
}

/// Trapped-ion Hamiltonian in the `{|g>, |e>} (x) Fock` basis (Upper = `|e>`):
/// `H = w_T a^dag a - (Delta/2) s_z + (Omega_R/2) [e^{i eta (a + a^dag)} s_+ + h.c.]`.
pub fn build_full_ion_hamiltonian(spec: &ModelSpec) -> Result<HermitianOperator> {
    spec.validate()?;
    let ladder = build_ladder_operators(spec.n_fock)?;
    let u = coupling_matrix(spec.eta, spec.n_fock);
    let h = embed(&(ladder.number() * c(OMEGA_T)), &identity_spin())
        - embed(
            &DMatrix::identity(spec.n_fock, spec.n_fock),
            &(sigma_z() * c(spec.detuning / 2.0)),
        )
        + (embed(&u, &sigma_plus()) + embed(&u.adjoint(), &sigma_minus())) * c(spec.rabi / 2.0);
    HermitianOperator::new(h, spec.n_fock)
}

/// The ion Hamiltonian written directly in the `|+->` basis, detuning included.
pub fn build_ss_basis_hamiltonian(spec: &ModelSpec) -> Result<HermitianOperator> {
    let ladder = build_ladder_operators(spec.n_fock)?;
    let u = coupling_matrix(spec.eta, spec.n_fock);
    let cos_part = u.map(|z| c(z.re));
    let sin_part = u.map(|z| c(z.im));
    let id = DMatrix::identity(spec.n_fock, spec.n_fock);
    let h = embed(&(ladder.number() * c(OMEGA_T)), &identity_spin())
        + embed(&id, &(sigma_x() * c(spec.detuning / 2.0)))
        + (embed(&cos_part, &sigma_z()) + embed(&sin_part, &((sigma_plus() - sigma_minus()) * I)))
            * c(spec.rabi / 2.0);
    HermitianOperator::new(h, spec.n_fock)
}

/// `H0 = w_T a^dag a + (Omega_R/2) s~_z`,
/// `V = (Omega_R/2)[(cos a^ - 1) s~_z + i sin a^ (s~_+ - s~_-)]`, `a^ = eta (a + a^dag)`.
pub fn build_ss_partition(spec: &ModelSpec) -> Result<Partition> {
    if spec.kind != ModelKind::SsGate {
        return Err(invalid("build_ss_partition needs an ss_gate spec"));
    }
    spec.validate()?;
    let n_fock = spec.n_fock;
    let ladder = build_ladder_operators(n_fock)?;
    let u = coupling_matrix(spec.eta, n_fock);
    let id = DMatrix::<Complex64>::identity(n_fock, n_fock);
    let cos_minus_one = u.map(|z| c(z.re)) - &id;
    let sin_part = u.map(|z| c(z.im));
    let half_rabi = c(spec.rabi / 2.0);

    let h0 = embed(&(ladder.number() * c(OMEGA_T)), &identity_spin())
        + embed(&id, &(sigma_z() * half_rabi));
    let v = (embed(&cos_minus_one, &sigma_z())
        + embed(&sin_part, &((sigma_plus() - sigma_minus()) * I)))
        * half_rabi;
    let (a, b) = spec.resonant_pair();
    Ok(Partition {
        h0: HermitianOperator::new(h0, n_fock)?,
        v: HermitianOperator::new(v, n_fock)?,
        a,
        b,
        xi: spec.rabi,
    })
}

/// `H0 = w_T a^dag a - (Delta/2) s_z`, `V = (Omega_R/2)[e^{i eta (a + a^dag)} s_+ + h.c.]`.
pub fn build_cz_partition(spec: &ModelSpec) -> Result<Partition> {
    if spec.kind != ModelKind::CzGate {
        return Err(invalid("build_cz_partition needs a cz_gate spec"));
    }
    spec.validate()?;
    let n_fock = spec.n_fock;
    let ladder = build_ladder_operators(n_fock)?;
    let u = coupling_matrix(spec.eta, n_fock);
    let h0 = embed(&(ladder.number() * c(OMEGA_T)), &identity_spin())
        - embed(
            &DMatrix::identity(n_fock, n_fock),
            &(sigma_z() * c(spec.detuning / 2.0)),
        );
    let v = (embed(&u, &sigma_plus()) + embed(&u.adjoint(), &sigma_minus())) * c(spec.rabi / 2.0);
    let (a, b) = spec.resonant_pair();
    Ok(Partition {
        h0: HermitianOperator::new(h0, n_fock)?,
        v: HermitianOperator::new(v, n_fock)?,
        a,
        b,
        xi: spec.detuning,
    })
}

/// `H0 = w a^dag a + (xi/2) s_z` with `s_z = |a><a| - |b><b|`; `V` from `v_builder`.
///
/// Bare levels `n w +- xi/2`; `|a, n_a>` and `|b, n_b>` cross at
/// `xi_0 = (n_b - n_a) w`, `E_0 = (n_a + n_b) w / 2`.
pub fn build_generic_partition<F>(
    omega: f64,
    xi: f64,
    transition: [usize; 2],
    n_fock: usize,
    v_builder: F,
) -> Result<Partition>
where
    F: FnOnce(&Ladder) -> DMatrix<Complex64>,
{
    if !(omega > 0.0) {
        return Err(invalid(format!(
            "oscillator frequency must be positive, got {omega}"
        )));
    }
    let ladder = build_ladder_operators(n_fock)?;
    let [na, nb] = transition;
    if na.max(nb) >= n_fock {
        return Err(invalid(format!(
            "transition ({na}, {nb}) lies outside truncation n_fock = {n_fock}"
        )));
    }
    let h0 = embed(&(ladder.number() * c(omega)), &identity_spin())
        + embed(
            &DMatrix::identity(n_fock, n_fock),
            &(sigma_z() * c(xi / 2.0)),
        );
    let v = v_builder(&ladder);
    Ok(Partition {
        h0: HermitianOperator::new(h0, n_fock)?,
        v: HermitianOperator::new(v, n_fock)?,
        a: BasisIndex::new(Spin::Upper, na),
        b: BasisIndex::new(Spin::Lower, nb),
        xi,
    })
}

/// `(g/2)(A s_+ + A^dag s_-)` with `A = a^k` (`k >= 0`) or `(a^dag)^{-k}`;
/// couples `|a, n>` to `|b, n + k>` only.
pub fn multiphonon_coupling(ladder: &Ladder, g: f64, k: i64) -> DMatrix<Complex64> {
    let n = ladder.n_fock();
    let step = if k >= 0 {
        &ladder.annihilation
    } else {
        &ladder.creation
    };
    let mut op = DMatrix::<Complex64>::identity(n, n);
    for _ in 0..k.unsigned_abs() {
        op = &op * step;
    }
    (embed(&op, &sigma_plus()) + embed(&op.adjoint(), &sigma_minus())) * c(g / 2.0)
}

/// A one-parameter family `H(xi) = H0(xi) + V(xi)` with a fixed resonant pair.
pub trait ScanModel: Sync {
    fn partition_at(&self, xi: f64) -> Result<Partition>;

    fn bare_crossing(&self) -> BareCrossing;

    /// Nominal resonant coupling frequency behind the `ld_pi` (`sideband = false`)
    /// and `sideband_pi` pulse rules, if the family defines one.
    fn pulse_frequency(&self, _xi: f64, _sideband: bool) -> Option<f64> {
        None
    }
}

impl ScanModel for ModelSpec {
    fn partition_at(&self, xi: f64) -> Result<Partition> {
        self.with_xi(xi).partition()
    }

    fn bare_crossing(&self) -> BareCrossing {
        ModelSpec::bare_crossing(self)
    }

    fn pulse_frequency(&self, xi: f64, sideband: bool) -> Option<f64> {
        let spec = self.with_xi(xi);
        let [na, nb] = spec.transition;
        let (lo, hi) = (na.min(nb), na.max(nb));
        match spec.kind {
            ModelKind::SsGate | ModelKind::CzGate => {
                let base = spec.eta * spec.rabi;
                Some(if sideband {
                    base * ((lo + 1) as f64).sqrt()
                } else {
                    base
                })
            }
            ModelKind::GenericTwoLevelOscillator => {
                // sqrt(hi!/lo!) is the multi-phonon matrix element
                let factor: f64 = ((lo + 1)..=hi).map(|k| (k as f64).sqrt()).product();
                Some(if sideband {
                    spec.rabi * factor
                } else {
                    spec.rabi
                })
            }
        }
    }
}

/// A family built from a closure, for toy models and custom couplings.
pub struct FnModel<F> {
    pub build: F,
    pub crossing: BareCrossing,
}

impl<F> ScanModel for FnModel<F>
where
    F: Fn(f64) -> Result<Partition> + Sync,
{
    fn partition_at(&self, xi: f64) -> Result<Partition> {
        (self.build)(xi)
    }

    fn bare_crossing(&self) -> BareCrossing {
        self.crossing
    }
}
