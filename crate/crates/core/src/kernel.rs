//! Objective, gradient, Jacobian and exact-fit reconstruction for the weight
//! estimation problem of a simple finite mixture.
//!
//! With `D(bin) = Σ_i p_i X_i(bin)` (the reference class has `X = 1`), the
//! log-likelihood up to terms independent of the weights is
//! `F(p) = Σ_bins g · log D`, its gradient over the free classes is
//! `G_j = Σ_bins g · (X_j − 1) / D` and the Jacobian of `G` is
//! `J_ij = −Σ_bins g · (X_i − 1)(X_j − 1) / D²`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::distribution::{ensure_same_support, BinnedDistribution, SimplexWeights};
use crate::error::{Error, Result};
use crate::ratios::DensityRatioProfile;

/// Gradient sup-norm below which weights count as a stationary point.
pub const STATIONARY_TOLERANCE: f64 = 1e-10;

fn check_inputs(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    weights: &[f64],
) -> Result<()> {
    ensure_same_support(
        ratios.support(),
        test.support(),
        "test distribution vs ratios",
    )?;
    if weights.len() != ratios.class_count() {
        return Err(Error::ClassCount {
            expected: ratios.class_count(),
            found: weights.len(),
        });
    }
    Ok(())
}

fn check_interior(weights: &SimplexWeights) -> Result<()> {
    if weights.is_interior() {
        Ok(())
    } else {
        Err(Error::NotInterior)
    }
}

#[inline]
pub(crate) fn denominator(row: &[f64], weights: &[f64]) -> f64 {
    row.iter().zip(weights).map(|(x, p)| x * p).sum()
}

/// `F` at any point of the closed simplex; `-inf` where a bin with test mass
/// gets zero mixture density.
pub(crate) fn objective_closed(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    weights: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (b, g) in test.weights().iter().enumerate() {
        if *g > 0.0 {
            let d = denominator(ratios.row(b), weights);
            if d <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += g * d.ln();
        }
    }
    total
}

/// Gradient at any point of the closed simplex; entries may be infinite at
/// the boundary.
pub(crate) fn gradient_closed(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    weights: &[f64],
) -> Vec<f64> {
    let free = ratios.free_classes();
    let mut grad = vec![0.0; free.len()];
    for (b, g) in test.weights().iter().enumerate() {
        if *g > 0.0 {
            let row = ratios.row(b);
            let d = denominator(row, weights);
            for (out, &j) in grad.iter_mut().zip(&free) {
                let num = g * (row[j] - 1.0);
                *out += if d > 0.0 {
                    num / d
                } else if num == 0.0 {
                    0.0
                } else {
                    num.signum() * f64::INFINITY
                };
            }
        }
    }
    grad
}

pub(crate) fn jacobian_raw(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    weights: &[f64],
) -> DMatrix<f64> {
    let free = ratios.free_classes();
    let n = free.len();
    let mut jac = DMatrix::zeros(n, n);
    for (b, g) in test.weights().iter().enumerate() {
        if *g > 0.0 {
            let row = ratios.row(b);
            let d = denominator(row, weights);
            let scale = g / (d * d);
            for r in 0..n {
                let xr = row[free[r]] - 1.0;
                for c in r..n {
                    jac[(r, c)] -= scale * xr * (row[free[c]] - 1.0);
                }
            }
        }
    }
    for r in 0..n {
        for c in 0..r {
            jac[(r, c)] = jac[(c, r)];
        }
    }
    jac
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Per-bin convex combination `Σ_i p_i f_i`.
pub fn mixture_density(
    weights: &SimplexWeights,
    components: &[BinnedDistribution],
) -> Result<BinnedDistribution> {
    if components.len() != weights.len() {
        return Err(Error::ClassCount {
            expected: components.len(),
            found: weights.len(),
        });
    }
    let support = components
        .first()
        .ok_or(Error::TooFewClasses(0))?
        .support()
        .to_vec();
    for c in components {
        ensure_same_support(&support, c.support(), "mixture components")?;
    }
    let mixed = (0..support.len())
        .map(|b| {
            components
                .iter()
                .zip(weights.values())
                .map(|(c, p)| p * c.weights()[b])
                .sum()
        })
        .collect();
    BinnedDistribution::from_counts(support, mixed)
}

/// The objective `F(p) = Σ g · log(1 + Σ_i p_i (X_i − 1))` on the open simplex.
pub fn objective(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    weights: &SimplexWeights,
) -> Result<f64> {
    check_inputs(test, ratios, weights.values())?;
    check_interior(weights)?;
    for (b, g) in test.weights().iter().enumerate() {
        if *g > 0.0 && denominator(ratios.row(b), weights.values()) <= 0.0 {
            return Err(Error::Domain {
                bin: test.support()[b].clone(),
            });
        }
    }
    Ok(objective_closed(test, ratios, weights.values()))
}

/// Partial derivatives of `F` with respect to the free (non-reference) weights.
pub fn gradient(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    weights: &SimplexWeights,
) -> Result<Vec<f64>> {
    check_inputs(test, ratios, weights.values())?;
    check_interior(weights)?;
    Ok(gradient_closed(test, ratios, weights.values()))
}

/// Upper bound `1/p_j + 1/p_ref` on `|G_j|` over the open simplex.
pub fn gradient_bound(ratios: &DensityRatioProfile, weights: &SimplexWeights) -> Vec<f64> {
    let p_ref = weights[ratios.reference_class()];
    ratios
        .free_classes()
        .into_iter()
        .map(|j| 1.0 / weights[j] + 1.0 / p_ref)
        .collect()
}

/// Jacobian of the gradient: symmetric and negative semidefinite.
pub fn jacobian(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    weights: &SimplexWeights,
) -> Result<DMatrix<f64>> {
    check_inputs(test, ratios, weights.values())?;
    check_interior(weights)?;
    Ok(jacobian_raw(test, ratios, weights.values()))
}

/// Component densities `g_i = g X_i / D` that share the ratios `X` and mix,
/// with the stationary weights, to exactly `g`.
pub fn exact_fit_components(
    test: &BinnedDistribution,
    ratios: &DensityRatioProfile,
    weights: &SimplexWeights,
    tolerance: f64,
) -> Result<Vec<BinnedDistribution>> {
    let grad = gradient(test, ratios, weights)?;
    if ratios.is_uninformative_on(test)? {
        return Err(Error::NoInformation);
    }
    let norm = sup_norm(&grad);
    if !(norm <= tolerance) {
        return Err(Error::NotStationary { norm, tolerance });
    }
    let k = ratios.class_count();
    let mut masses = vec![Vec::with_capacity(test.len()); k];
    for (b, g) in test.weights().iter().enumerate() {
        let row = ratios.row(b);
        let d = denominator(row, weights.values());
        for (i, m) in masses.iter_mut().enumerate() {
            m.push(if *g > 0.0 { g * row[i] / d } else { 0.0 });
        }
    }
    // Each component's mass deviates from 1 by at most about 2·|G|.
    let slack = 2.0 * tolerance + 1e-12;
    masses
        .into_iter()
        .map(|m| BinnedDistribution::with_tolerance(test.support().to_vec(), m, slack))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlDivergence {
    /// `Σ g log(g/h)`, or `+inf` when `g` is not absolutely continuous w.r.t. `h`.
    pub value: f64,
    pub absolutely_continuous: bool,
}

/// Kullback-Leibler divergence of `g` from `h` on a shared support.
pub fn kl_divergence(g: &BinnedDistribution, h: &BinnedDistribution) -> Result<KlDivergence> {
    ensure_same_support(g.support(), h.support(), "kl divergence")?;
    let mut value = 0.0;
    for (gv, hv) in g.weights().iter().zip(h.weights()) {
        if *gv > 0.0 {
            if *hv <= 0.0 {
                return Ok(KlDivergence {
                    value: f64::INFINITY,
                    absolutely_continuous: false,
                });
            }
            value += gv * (gv / hv).ln();
        }
    }
    Ok(KlDivergence {
        value: value.max(0.0),
        absolutely_continuous: true,
    })
}
