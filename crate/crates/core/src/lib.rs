//! Weight estimation for simple finite mixtures (fixed components, unknown
//! weights) and the class-prevalence, loss-rate and cost forecasts built on it.
//!
//! Distributions live on finite labelled supports. The maximum-likelihood
//! (minimum Kullback-Leibler) weights depend on the component densities only
//! through their ratios against a reference class; whenever the optimum lies
//! inside the simplex there are components with the same ratios that
//! reproduce the test distribution exactly ([`kernel::exact_fit_components`]).

pub mod cost;
pub mod distribution;
pub mod error;
pub mod fit;
pub mod io;
pub mod kernel;
pub mod model;
pub mod moments;
pub mod ratios;
pub mod sim;
pub mod solver;

pub use distribution::{BinnedDistribution, SimplexWeights};
pub use error::{Error, Result};
pub use fit::{FitResult, Method};
pub use model::{ConsistencyCheck, ModelParts, TrainingModel};
pub use ratios::DensityRatioProfile;
pub use solver::{fit, SolverConfig, SolverMethod};
