//! One-dimensional extremum and root refinement, plus the small least-squares
//! fits used by the shift and error analyses.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance used by every refinement in the crate.
pub const REFINE_RTOL: f64 = 1e-8;

const INV_PHI: f64 = 0.618_033_988_749_894_9; // (sqrt 5 - 1) / 2

/// Width tolerance for a refinement around `x`.
pub fn tolerance_at(x: f64, rtol: f64) -> f64 {
    rtol * x.abs().max(1.0)
}

/// Golden-section minimization of `f` on `[lo, hi]`, returning `(x, f(x))`.
///
/// Stops once the bracket is narrower than `rtol * max(|x|, 1)`.
pub fn golden_section_min<F>(mut f: F, lo: f64, hi: f64, rtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) {
        return Err(invalid(format!("empty bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    // the bracket shrinks by 1/phi per step; 200 steps is far past f64 resolution
    for _ in 0..200 {
        if b - a <= tolerance_at(0.5 * (a + b), rtol) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Golden-section maximization; see [`golden_section_min`].
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, rtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (x, fx) = golden_section_min(|x| f(x).map(|v| -v), lo, hi, rtol)?;
    Ok((x, -fx))
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
pub fn bisect<F>(mut f: F, lo: f64, hi: f64, rtol: f64, what: &'static str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::RootNotBracketed { what, lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if b - a <= tolerance_at(mid, rtol) {
            return Ok(mid);
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Interval `[x_i, x_{i+1}]` closest to `start` where the samples change sign.
pub fn sign_change_near(values: &[f64], start: usize) -> Option<usize> {
    (0..values.len().saturating_sub(1))
        .filter(|&i| values[i] == 0.0 || values[i].signum() != values[i + 1].signum())
        .min_by_key(|&i| i.abs_diff(start))
}

/// Evenly spaced grid including both endpoints.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect()
}

/// `y = slope x + intercept` by least squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LinearFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// `x` with `eval(x) == y`.
    pub fn invert(&self, y: f64) -> f64 {
        (y - self.intercept) / self.slope
    }
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("linear fit needs two or more paired samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("linear fit needs distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - slope * xi - intercept).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Least-squares coefficient `c` of `y = c x` (line through the origin).
pub fn proportional_fit(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(invalid("proportional fit needs paired samples"));
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(invalid("proportional fit needs a nonzero abscissa"));
    }
    Ok(x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_finds_parabola_minimum() {
        let (x, fx) = golden_section_min(|x| Ok((x - 0.3).powi(2)), -1.0, 2.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx < 1e-18);
    }

    #[test]
    fn golden_rejects_empty_bracket() {
        assert!(golden_section_min(|x| Ok(x), 1.0, 1.0, 1e-8).is_err());
    }

    #[test]
    fn bisect_requires_bracket() {
        let r = bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-8, "test");
        assert!(matches!(r, Err(Error::RootNotBracketed { .. })));
        let root = bisect(|x| Ok(x.cos()), 1.0, 2.0, 1e-12, "cos").unwrap();
        assert!((root - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
    }

    #[test]
    fn sign_change_search() {
        let v = [3.0, 2.0, 1.0, -1.0, -2.0, 1.0];
        assert_eq!(sign_change_near(&v, 0), Some(2));
        assert_eq!(sign_change_near(&v, 5), Some(4));
        assert_eq!(sign_change_near(&[1.0, 2.0, 3.0], 1), None);
    }

    #[test]
    fn linspace_endpoints() {
        let g = linspace(0.8, 1.2, 201);
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], 0.8);
        assert_eq!(g[200], 1.2);
    }

    #[test]
    fn fits_recover_exact_lines() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope - 2.5).abs() < 1e-14);
        assert!((fit.intercept + 1.0).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
        assert!((fit.invert(fit.eval(1.7)) - 1.7).abs() < 1e-14);
        let c = proportional_fit(&x, &x.map(|v| -0.25 * v)).unwrap();
        assert!((c + 0.25).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn golden_brackets_shifted_quartic(center in -0.9f64..0.9, scale in 0.1f64..10.0) {
            let (x, _) = golden_section_min(
                |x| Ok(scale * (x - center).powi(2) + 0.1 * (x - center).powi(4)),
                -1.0, 1.0, 1e-9,
            ).unwrap();
            prop_assert!((x - center).abs() < 1e-6);
        }
    }
}
