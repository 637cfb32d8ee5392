use serde::Serialize;

use super::{check_problem, finish, SolverConfig};
use crate::distribution::{BinnedDistribution, SimplexWeights};
use crate::error::{Error, Result};
use crate::fit::{FitResult, Method};
use crate::ratios::DensityRatioProfile;

/// Search interval for the scalar root is `[ROOT_EPSILON, 1 − ROOT_EPSILON]`.
pub(crate) const ROOT_EPSILON: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinaryExistence {
    /// An interior solution exists iff both means exceed one.
    pub exists: bool,
    pub mean_x: f64,
    /// `+inf` when the test distribution puts mass where `X = 0`.
    pub mean_inv_x: f64,
}

/// Two-component problem in which the ratio at each bin is `a / b`:
/// `G(p) = Σ g (a − b) / (p a + (1 − p) b)`, strictly decreasing in `p`.
pub(crate) struct Collapsed<'a> {
    pub g: &'a [f64],
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Collapsed<'_> {
    pub fn existence(&self) -> BinaryExistence {
        let mut mean_x = 0.0;
        let mut mean_inv_x = 0.0;
        for ((g, a), b) in self.g.iter().zip(&self.a).zip(&self.b) {
            if *g <= 0.0 || (*a == 0.0 && *b == 0.0) {
                continue;
            }
            mean_x += if *b > 0.0 { g * a / b } else { f64::INFINITY };
            mean_inv_x += if *a > 0.0 { g * b / a } else { f64::INFINITY };
        }
        BinaryExistence {
            exists: mean_x > 1.0 && mean_inv_x > 1.0,
            mean_x,
            mean_inv_x,
        }
    }

    pub fn value(&self, p: f64) -> f64 {
        self.terms(p).0
    }

    fn terms(&self, p: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        for ((g, a), b) in self.g.iter().zip(&self.a).zip(&self.b) {
            if *g <= 0.0 {
                continue;
            }
            let d = p * a + (1.0 - p) * b;
            if d <= 0.0 {
                continue;
            }
            let r = (a - b) / d;
            value += g * r;
            slope -= g * r * r;
        }
        (value, slope)
    }

    /// Root of `G` in `[ROOT_EPSILON, 1 − ROOT_EPSILON]` by bracketed Newton
    /// with bisection fallback. `None` when `G` does not change sign there.
    pub fn root(&self) -> Option<(f64, usize)> {
        let (mut lo, mut hi) = (ROOT_EPSILON, 1.0 - ROOT_EPSILON);
        if self.value(lo) <= 0.0 || self.value(hi) >= 0.0 {
            return None;
        }
        let mut x = 0.5;
        for iteration in 1..=200 {
            let (gx, slope) = self.terms(x);
            if gx == 0.0 {
                return Some((x, iteration));
            }
            if gx > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - gx / slope;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 2.0 * f64::EPSILON * x.max(1e-300)
                || hi - lo <= 2.0 * f64::EPSILON * hi
            {
                return Some((next, iteration));
            }
            x = next;
        }
        Some((x, 200))
    }
}

fn require_two(ratios: &DensityRatioProfile) -> Result<usize> {
    match ratios.class_count() {
        2 => Ok(1 - ratios.reference_class()),
        found => Err(Error::ClassCount { expected: 2, found }),
    }
}

fn collapsed<'a>(
    test: &'a BinnedDistribution,
    ratios: &DensityRatioProfile,
    free: usize,
) -> Collapsed<'a> {
    let n = test.len();
    Collapsed {
        g: test.weights(),
        a: (0..n).map(|b| ratios.ratio(b, free)).collect(),
        b: vec![1.0; n],
    }
}

/// Necessary and sufficient condition `E[X] > 1` and `E[1/X] > 1` (expectations
/// under the test distribution) for an interior solution with two classes.
pub fn existence_check_binary(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
) -> Result<BinaryExistence> {
    let free = require_two(ratios)?;
    crate::distribution::ensure_same_support(ratios.support(), test.support(), "existence check")?;
    Ok(collapsed(test, ratios, free).existence())
}

/// Unique interior root of the scalar stationarity equation, or the nearer
/// vertex with the boundary alarm when none exists.
pub fn solve_binary(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    config: &SolverConfig,
) -> Result<FitResult> {
    let free = require_two(ratios)?;
    check_problem(test, ratios, config)?;
    let reference = ratios.reference_class();
    let problem = collapsed(test, ratios, free);
    let existence = problem.existence();
    let with_free = |p: f64| {
        let mut v = vec![0.0; 2];
        v[free] = p;
        v[reference] = 1.0 - p;
        SimplexWeights::new(v)
    };
    let mut notes = vec![format!(
        "E[X] = {:.6}, E[1/X] = {:.6}",
        existence.mean_x, existence.mean_inv_x
    )];
    if existence.exists {
        if let Some((p, iterations)) = problem.root() {
            return finish(
                test,
                ratios,
                config,
                with_free(p)?,
                Method::BinaryRoot,
                iterations,
                false,
                notes,
            );
        }
        notes.push("root lies within 1e-14 of the boundary".into());
    }
    // G(0) = E[X] − 1 ≤ 0 puts the maximum at p = 0, otherwise at p = 1.
    let vertex = if existence.mean_x <= 1.0 { 0.0 } else { 1.0 };
    finish(
        test,
        ratios,
        config,
        with_free(vertex)?,
        Method::BinaryRoot,
        0,
        true,
        notes,
    )
}
