//! Dressed-spectrum scans: the structural resonance (minimal splitting of the
//! resonant pair) and the change of character of the dressed states.
//!
//! At every grid point the full truncated Hamiltonian is diagonalized. The two
//! dressed levels of the resonant pair are followed by maximal eigenvector
//! overlap with the previous grid point, starting from the two eigenvectors
//! with the largest weight on `|a>, |b>`.

use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fock::{diagonalize, BasisIndex, EigenDecomposition};
use crate::models::ScanModel;
use crate::report::{csv_preamble, fmt_sig};
use crate::search::{
    bisect, golden_section_min, linspace, sign_change_near, tolerance_at, REFINE_RTOL,
};

pub const DEFAULT_SCAN_POINTS: usize = 201;

/// A third level whose weight on the resonant pair exceeds this marks the
/// crossing as not isolated.
pub const INTRUSION_THRESHOLD: f64 = 0.1;

/// Central-difference step for refining the zero of the level-slope difference.
pub const SLOPE_STEP: f64 = 1e-5;

/// The two dressed states of the resonant pair at one value of `xi`.
#[derive(Debug, Clone)]
pub struct DressedPair {
    pub xi: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub plus: DVector<Complex64>,
    pub minus: DVector<Complex64>,
    /// Largest weight on `|a>, |b>` among all other eigenvectors.
    pub intruder_weight: f64,
}

impl DressedPair {
    pub fn gap(&self) -> f64 {
        self.e_plus - self.e_minus
    }

    /// `[p_a+, p_a-, p_b+, p_b-]` with `p_alpha,pm = |<alpha|eps_pm>|^2`.
    pub fn character(&self, a: BasisIndex, b: BasisIndex) -> [f64; 4] {
        [
            self.plus[a.flat()].norm_sqr(),
            self.minus[a.flat()].norm_sqr(),
            self.plus[b.flat()].norm_sqr(),
            self.minus[b.flat()].norm_sqr(),
        ]
    }
}

fn pair_weight(eig: &EigenDecomposition, k: usize, p: [usize; 2]) -> f64 {
    let v = eig.eigenvectors.column(k);
    v[p[0]].norm_sqr() + v[p[1]].norm_sqr()
}

fn select_by_weight(eig: &EigenDecomposition, p: [usize; 2]) -> [usize; 2] {
    let mut order: Vec<usize> = (0..eig.len()).collect();
    order.sort_by(|&i, &j| pair_weight(eig, j, p).total_cmp(&pair_weight(eig, i, p)));
    [order[0], order[1]]
}

fn select_by_overlap(eig: &EigenDecomposition, prev: [&DVector<Complex64>; 2]) -> [usize; 2] {
    let overlap = |track: usize, k: usize| eig.eigenvectors.column(k).dotc(prev[track]).norm_sqr();
    let best = |track: usize, skip: Option<usize>| {
        (0..eig.len())
            .filter(|&k| Some(k) != skip)
            .max_by(|&i, &j| overlap(track, i).total_cmp(&overlap(track, j)))
            .unwrap_or(0)
    };
    let first0 = best(0, None);
    let first1 = best(1, None);
    if first0 != first1 {
        return [first0, first1];
    }
    // both tracks want the same level: the stronger claim keeps it
    if overlap(0, first0) >= overlap(1, first1) {
        [first0, best(1, Some(first0))]
    } else {
        [best(0, Some(first1)), first1]
    }
}

fn pair_from(eig: &EigenDecomposition, xi: f64, picked: [usize; 2], p: [usize; 2]) -> DressedPair {
    let (hi, lo) = if eig.eigenvalues[picked[0]] >= eig.eigenvalues[picked[1]] {
        (picked[0], picked[1])
    } else {
        (picked[1], picked[0])
    };
    let intruder_weight = (0..eig.len())
        .filter(|k| !picked.contains(k))
        .map(|k| pair_weight(eig, k, p))
        .fold(0.0, f64::max);
    DressedPair {
        xi,
        e_plus: eig.eigenvalues[hi],
        e_minus: eig.eigenvalues[lo],
        plus: eig.eigenvectors.column(hi).into_owned(),
        minus: eig.eigenvectors.column(lo).into_owned(),
        intruder_weight,
    }
}

/// Dressed pair at a single `xi`, picked by weight on `|a>, |b>`.
pub fn dressed_pair(model: &dyn ScanModel, xi: f64) -> Result<DressedPair> {
    let partition = model.partition_at(xi)?;
    let eig = diagonalize(&partition.full()?);
    let p = partition.p_indices();
    Ok(pair_from(&eig, xi, select_by_weight(&eig, p), p))
}

pub fn gap_at(model: &dyn ScanModel, xi: f64) -> Result<f64> {
    Ok(dressed_pair(model, xi)?.gap())
}

/// Dressed levels of the resonant pair over a grid of `xi`.
pub struct LevelTrack<'m> {
    model: &'m dyn ScanModel,
    pub a: BasisIndex,
    pub b: BasisIndex,
    pub xi: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
    pub p_a_plus: Vec<f64>,
    pub p_a_minus: Vec<f64>,
    pub p_b_plus: Vec<f64>,
    pub p_b_minus: Vec<f64>,
    /// Grid indices where a third level intrudes into the resonant pair.
    pub intruders: Vec<usize>,
}

impl<'m> LevelTrack<'m> {
    pub fn model(&self) -> &'m dyn ScanModel {
        self.model
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        (self.xi[self.len() - 1] - self.xi[0]) / (self.len() - 1) as f64
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.e_plus
            .iter()
            .zip(&self.e_minus)
            .map(|(p, m)| p - m)
            .collect()
    }

    pub fn is_isolated(&self) -> bool {
        self.intruders.is_empty()
    }

    /// CSV with columns `xi, E_plus, E_minus, gap, p_a_plus, p_a_minus`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(csv_preamble().as_bytes())?;
        writeln!(out, "xi,E_plus,E_minus,gap,p_a_plus,p_a_minus")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_sig(self.xi[i]),
                fmt_sig(self.e_plus[i]),
                fmt_sig(self.e_minus[i]),
                fmt_sig(self.e_plus[i] - self.e_minus[i]),
                fmt_sig(self.p_a_plus[i]),
                fmt_sig(self.p_a_minus[i]),
            )?;
        }
        Ok(())
    }
}

/// Scans `window`, which must contain the bare crossing.
pub fn scan_levels<'m>(
    model: &'m dyn ScanModel,
    window: (f64, f64),
    points: usize,
) -> Result<LevelTrack<'m>> {
    let xi_0 = model.bare_crossing().xi_0;
    if !(window.0 <= xi_0 && xi_0 <= window.1) {
        return Err(invalid(format!(
            "scan window [{}, {}] does not contain the bare crossing xi_0 = {xi_0}",
            window.0, window.1
        )));
    }
    scan_levels_anywhere(model, window, points)
}

/// Like [`scan_levels`] without requiring the bare crossing inside the window.
pub fn scan_levels_anywhere<'m>(
    model: &'m dyn ScanModel,
    window: (f64, f64),
    points: usize,
) -> Result<LevelTrack<'m>> {
    if points < 3 {
        return Err(invalid(format!(
            "a scan needs at least 3 points, got {points}"
        )));
    }
    if !(window.0 < window.1) {
        return Err(invalid(format!(
            "empty scan window [{}, {}]",
            window.0, window.1
        )));
    }
    let grid = linspace(window.0, window.1, points);
    let decomps = grid
        .par_iter()
        .map(|&xi| {
            let partition = model.partition_at(xi)?;
            Ok((
                diagonalize(&partition.full()?),
                partition.p_indices(),
                partition.a,
                partition.b,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let (_, _, a, b) = decomps[0];
    let mut track = LevelTrack {
        model,
        a,
        b,
        xi: grid.clone(),
        e_plus: Vec::with_capacity(points),
        e_minus: Vec::with_capacity(points),
        p_a_plus: Vec::with_capacity(points),
        p_a_minus: Vec::with_capacity(points),
        p_b_plus: Vec::with_capacity(points),
        p_b_minus: Vec::with_capacity(points),
        intruders: Vec::new(),
    };
    let mut previous: Option<[DVector<Complex64>; 2]> = None;
    for (i, (eig, p, _, _)) in decomps.iter().enumerate() {
        let picked = match &previous {
            None => select_by_weight(eig, *p),
            Some([v0, v1]) => select_by_overlap(eig, [v0, v1]),
        };
        let pair = pair_from(eig, grid[i], picked, *p);
        let [pap, pam, pbp, pbm] = pair.character(a, b);
        track.e_plus.push(pair.e_plus);
        track.e_minus.push(pair.e_minus);
        track.p_a_plus.push(pap);
        track.p_a_minus.push(pam);
        track.p_b_plus.push(pbp);
        track.p_b_minus.push(pbm);
        if pair.intruder_weight > INTRUSION_THRESHOLD {
            track.intruders.push(i);
        }
        previous = Some([
            eig.eigenvectors.column(picked[0]).into_owned(),
            eig.eigenvectors.column(picked[1]).into_owned(),
        ]);
    }
    Ok(track)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuralResonance {
    pub xi_s: f64,
    pub min_gap: f64,
    /// Zero of the difference of the dressed-level slopes.
    pub xi_slope: Option<f64>,
    /// Whether `xi_slope` lies within ten refinement tolerances of `xi_s`.
    pub slopes_agree: bool,
    pub grid_index: usize,
}

/// Minimal splitting of the tracked pair, refined by golden section, with the
/// zero-slope crossing of the two dressed levels as a cross-check.
pub fn find_structural_resonance(track: &LevelTrack<'_>) -> Result<StructuralResonance> {
    let n = track.len();
    let gaps = track.gaps();
    let i = (0..n)
        .min_by(|&i, &j| gaps[i].total_cmp(&gaps[j]))
        .expect("scan has at least 3 points");
    if i == 0 || i == n - 1 {
        return Err(crate::Error::ExtremumOnBoundary { xi: track.xi[i] });
    }
    let model = track.model;
    // tighter than the reported tolerance so exact crossings resolve to a vanishing gap
    let (xi_s, min_gap) = golden_section_min(
        |x| gap_at(model, x),
        track.xi[i - 1],
        track.xi[i + 1],
        REFINE_RTOL * 1e-2,
    )?;

    let xi_slope = slope_crossing(track, &gaps, i)?;
    let slopes_agree = xi_slope
        .map(|x| (x - xi_s).abs() <= 10.0 * tolerance_at(xi_s, REFINE_RTOL))
        .unwrap_or(false);
    Ok(StructuralResonance {
        xi_s,
        min_gap,
        xi_slope,
        slopes_agree,
        grid_index: i,
    })
}

/// Grid central differences (step = spacing) bracket the point where the two
/// level slopes coincide; bisection on fine central differences refines it.
fn slope_crossing(track: &LevelTrack<'_>, gaps: &[f64], near: usize) -> Result<Option<f64>> {
    let n = track.len();
    let h = track.spacing();
    let slope_diff: Vec<f64> = (1..n - 1)
        .map(|j| {
            let sp = (track.e_plus[j + 1] - track.e_plus[j - 1]) / (2.0 * h);
            let sm = (track.e_minus[j + 1] - track.e_minus[j - 1]) / (2.0 * h);
            sp - sm
        })
        .collect();
    debug_assert_eq!(slope_diff.len(), gaps.len() - 2);
    let Some(k) = sign_change_near(&slope_diff, near.saturating_sub(1)) else {
        return Ok(None);
    };
    // slope_diff[k] sits at grid index k + 1
    let lo = track.xi[k];
    let hi = track.xi[(k + 3).min(n - 1)];
    let model = track.model;
    let fine = |x: f64| -> Result<f64> {
        Ok((gap_at(model, x + SLOPE_STEP)? - gap_at(model, x - SLOPE_STEP)?) / (2.0 * SLOPE_STEP))
    };
    match bisect(fine, lo, hi, REFINE_RTOL * 1e-2, "level-slope difference") {
        Ok(x) => Ok(Some(x)),
        Err(crate::Error::RootNotBracketed { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterProfile {
    pub xi: Vec<f64>,
    pub p_a_plus: Vec<f64>,
    pub p_a_minus: Vec<f64>,
    pub p_b_plus: Vec<f64>,
    pub p_b_minus: Vec<f64>,
    /// Where `p_a+ = p_a-`, if the window contains the change of character.
    pub xi_char: Option<f64>,
}

pub fn character_profile(track: &LevelTrack<'_>) -> Result<CharacterProfile> {
    let diff: Vec<f64> = track
        .p_a_plus
        .iter()
        .zip(&track.p_a_minus)
        .map(|(p, m)| p - m)
        .collect();
    let center = track.len() / 2;
    let xi_char = match sign_change_near(&diff, center) {
        None => None,
        Some(k) => {
            let model = track.model;
            let (a, b) = (track.a, track.b);
            let f = |x: f64| -> Result<f64> {
                let [pap, pam, _, _] = dressed_pair(model, x)?.character(a, b);
                Ok(pap - pam)
            };
            Some(bisect(
                f,
                track.xi[k],
                track.xi[k + 1],
                REFINE_RTOL,
                "character difference",
            )?)
        }
    };
    Ok(CharacterProfile {
        xi: track.xi.clone(),
        p_a_plus: track.p_a_plus.clone(),
        p_a_minus: track.p_a_minus.clone(),
        p_b_plus: track.p_b_plus.clone(),
        p_b_minus: track.p_b_minus.clone(),
        xi_char,
    })
}
