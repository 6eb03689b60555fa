//! Truncated Fock space of a two-level system times a harmonic oscillator.
//!
//! Product states `|s, n>` are stored at flat index `2n + s`, with `s = 0`
//! for the upper spin label and `s = 1` for the lower one. Energies are in
//! units of the oscillator frequency (`hbar = omega_T = 1`).

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on `|H - H^dagger|` accepted by [`HermitianOperator::new`].
pub const HERMITICITY_TOL: f64 = 1e-12;

/// Default truncation for first-sideband studies.
pub const DEFAULT_N_FOCK: usize = 25;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Internal two-level label.
///
/// What the labels mean depends on the model: `|a>/|b>` for the generic
/// model, `|+>/|->` for the Stark-shift gate and `|e>/|g>` for the bare ion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    Upper,
    Lower,
}

impl Spin {
    pub fn offset(self) -> usize {
        match self {
            Spin::Upper => 0,
            Spin::Lower => 1,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Upper => Spin::Lower,
            Spin::Lower => Spin::Upper,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisIndex {
    pub spin: Spin,
    pub n: usize,
}

impl BasisIndex {
    pub fn new(spin: Spin, n: usize) -> Self {
        Self { spin, n }
    }

    pub fn flat(&self) -> usize {
        2 * self.n + self.spin.offset()
    }

    pub fn from_flat(index: usize) -> Self {
        let spin = if index % 2 == 0 {
            Spin::Upper
        } else {
            Spin::Lower
        };
        Self { spin, n: index / 2 }
    }

    /// Flat index, checked against the truncation bound.
    pub fn checked_flat(&self, n_fock: usize) -> Result<usize> {
        if self.n >= n_fock {
            return Err(invalid(format!(
                "vibrational level {} outside truncation n_fock = {}",
                self.n, n_fock
            )));
        }
        Ok(self.flat())
    }
}

/// Dense Hermitian matrix on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: DMatrix<Complex64>,
    n_fock: usize,
}

impl HermitianOperator {
    /// Wraps `matrix`, rejecting it if it deviates from its adjoint by more than
    /// [`HERMITICITY_TOL`] in any entry.
    pub fn new(matrix: DMatrix<Complex64>, n_fock: usize) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let max_violation = hermiticity_violation(&matrix);
        if max_violation > HERMITICITY_TOL {
            return Err(Error::NotHermitian { max_violation });
        }
        Ok(Self { matrix, n_fock })
    }

    pub fn zeros(n_fock: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(2 * n_fock, 2 * n_fock),
            n_fock,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn entry(&self, row: BasisIndex, col: BasisIndex) -> Complex64 {
        self.matrix[(row.flat(), col.flat())]
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        if self.dim() != other.dim() {
            return Err(invalid("dimension mismatch in operator sum"));
        }
        HermitianOperator::new(&self.matrix + &other.matrix, self.n_fock)
    }

    pub fn to_dump(&self) -> MatrixDump {
        MatrixDump {
            dim: self.dim(),
            n_fock: self.n_fock,
            entries: self
                .matrix
                .transpose()
                .iter()
                .map(|z| [z.re, z.im])
                .collect(),
        }
    }

    pub fn from_dump(dump: &MatrixDump) -> Result<Self> {
        if dump.entries.len() != dump.dim * dump.dim {
            return Err(invalid(format!(
                "matrix dump has {} entries, expected {}",
                dump.entries.len(),
                dump.dim * dump.dim
            )));
        }
        let matrix = DMatrix::from_row_iterator(
            dump.dim,
            dump.dim,
            dump.entries.iter().map(|&[re, im]| Complex64::new(re, im)),
        );
        Self::new(matrix, dump.n_fock)
    }
}

pub fn hermiticity_violation(matrix: &DMatrix<Complex64>) -> f64 {
    let n = matrix.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Debug/golden-test serialization: row-major `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDump {
    pub dim: usize,
    pub n_fock: usize,
    pub entries: Vec<[f64; 2]>,
}

/// Oscillator ladder operators truncated to `n_fock` levels.
#[derive(Debug, Clone)]
pub struct Ladder {
    pub annihilation: DMatrix<Complex64>,
    pub creation: DMatrix<Complex64>,
}

impl Ladder {
    pub fn n_fock(&self) -> usize {
        self.annihilation.nrows()
    }

    /// `a^dagger a`
    pub fn number(&self) -> DMatrix<Complex64> {
        &self.creation * &self.annihilation
    }

    /// `a + a^dagger`
    pub fn quadrature(&self) -> DMatrix<Complex64> {
        &self.annihilation + &self.creation
    }
}

pub fn build_ladder_operators(n_fock: usize) -> Result<Ladder> {
    if n_fock < 2 {
        return Err(invalid(format!("n_fock must be at least 2, got {n_fock}")));
    }
    let mut annihilation = DMatrix::zeros(n_fock, n_fock);
    for n in 1..n_fock {
        annihilation[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    let creation = annihilation.adjoint();
    Ok(Ladder {
        annihilation,
        creation,
    })
}

/// Generalized Laguerre polynomial `L_n^(alpha)(x)` by upward recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut curr = 1.0 + alpha - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * curr - (k + alpha) * prev) / (k + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// Matrix element `<n| exp(i eta (a + a^dagger)) |n'>`, per unit Rabi frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingStrength {
    pub value: Complex64,
}

impl CouplingStrength {
    /// `C_{n,n'}`, the `cos(eta (a + a^dagger))` element.
    pub fn cos_part(&self) -> f64 {
        self.value.re
    }

    /// `S_{n,n'}`, the `sin(eta (a + a^dagger))` element.
    pub fn sin_part(&self) -> f64 {
        self.value.im
    }
}

/// Closed form `e^{-eta^2/2} (i eta)^{|n-n'|} sqrt(n_<!/n_>!) L_{n_<}^{|n-n'|}(eta^2)`.
pub fn coupling_strength(eta: f64, n: usize, n_prime: usize) -> CouplingStrength {
    let (lo, hi) = if n <= n_prime {
        (n, n_prime)
    } else {
        (n_prime, n)
    };
    let d = hi - lo;
    let x = eta * eta;
    // eta^d sqrt(lo!/hi!) as a running product to stay finite for large n
    let mut magnitude = (-0.5 * x).exp();
    for k in (lo + 1)..=hi {
        magnitude *= eta / (k as f64).sqrt();
    }
    magnitude *= laguerre(lo, d as f64, x);
    let phase = match d % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    };
    CouplingStrength {
        value: phase * magnitude,
    }
}

/// `exp(i eta (a + a^dagger))` built from the closed-form elements.
pub fn coupling_matrix(eta: f64, n_fock: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n_fock, n_fock, |i, j| coupling_strength(eta, i, j).value)
}

/// `exp(i eta (a + a^dagger))` by diagonalizing the truncated quadrature.
///
/// Exactly unitary on the truncated space; entries near the top of the
/// ladder carry truncation error.
pub fn matrix_exponential_quadrature(eta: f64, n_fock: usize) -> Result<DMatrix<Complex64>> {
    let ladder = build_ladder_operators(n_fock)?;
    let x = ladder.quadrature().map(|z| z.re);
    let eig = SymmetricEigen::new(x);
    let v = eig.eigenvectors.map(|r| Complex64::new(r, 0.0));
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (I * eta * l).exp()));
    Ok(&v * phases * v.transpose())
}

/// `osc (x) spin` in the flat `2n + s` ordering.
pub fn embed(osc: &DMatrix<Complex64>, spin: &Matrix2<Complex64>) -> DMatrix<Complex64> {
    let n = osc.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let o = osc[(i, j)];
            if o == ZERO {
                continue;
            }
            for s in 0..2 {
                for t in 0..2 {
                    out[(2 * i + s, 2 * j + t)] = o * spin[(s, t)];
                }
            }
        }
    }
    out
}

pub fn basis_state(index: BasisIndex, n_fock: usize) -> Result<DVector<Complex64>> {
    let flat = index.checked_flat(n_fock)?;
    let mut v = DVector::zeros(2 * n_fock);
    v[flat] = ONE;
    Ok(v)
}

/// Spectrum in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest `|H v_k - lambda_k v_k|` over all pairs.
    pub fn max_residual(&self, h: &DMatrix<Complex64>) -> f64 {
        (0..self.len())
            .map(|k| {
                let v = self.eigenvectors.column(k);
                (h * v - v * Complex64::new(self.eigenvalues[k], 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Largest entry of `|V^dagger V - 1|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.eigenvectors.adjoint() * &self.eigenvectors;
        let n = gram.nrows();
        (gram - DMatrix::<Complex64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// `sum_k lambda_k v_k v_k^dagger`
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let d = DMatrix::from_diagonal(&self.eigenvalues.map(|l| Complex64::new(l, 0.0)));
        &self.eigenvectors * d * self.eigenvectors.adjoint()
    }
}

pub fn diagonalize(h: &HermitianOperator) -> EigenDecomposition {
    decompose(h.matrix().clone())
}

/// Like [`diagonalize`] for a raw matrix; rejects non-Hermitian input.
pub fn diagonalize_matrix(matrix: DMatrix<Complex64>) -> Result<EigenDecomposition> {
    let max_violation = hermiticity_violation(&matrix);
    if max_violation > HERMITICITY_TOL {
        return Err(Error::NotHermitian { max_violation });
    }
    Ok(decompose(matrix))
}

fn decompose(matrix: DMatrix<Complex64>) -> EigenDecomposition {
    let n = matrix.nrows();
    let eig = SymmetricEigen::new(matrix);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub n_fock: usize,
    pub doubled_n_fock: usize,
    pub max_shift: f64,
    pub converged: bool,
}

/// Compares the lowest `tracked` eigenvalues at `n_fock` and `2 n_fock`.
pub fn check_truncation_convergence<F>(
    build: F,
    n_fock: usize,
    tracked: usize,
    tol: f64,
) -> Result<ConvergenceReport>
where
    F: Fn(usize) -> Result<HermitianOperator>,
{
    let small = diagonalize(&build(n_fock)?);
    let large = diagonalize(&build(2 * n_fock)?);
    if tracked > small.len() {
        return Err(invalid(format!(
            "cannot track {tracked} levels in a {}-dimensional space",
            small.len()
        )));
    }
    let max_shift = (0..tracked)
        .map(|k| (small.eigenvalues[k] - large.eigenvalues[k]).abs())
        .fold(0.0, f64::max);
    Ok(ConvergenceReport {
        n_fock,
        doubled_n_fock: 2 * n_fock,
        max_shift,
        converged: max_shift <= tol,
    })
}
