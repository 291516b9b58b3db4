//! Neural Bayes estimation for replicated data.
//!
//! The crate trains permutation-invariant neural networks to map sets of
//! independent replicates to Bayes point estimates of the parameters that
//! generated them.  Once trained, an estimator is amortised: applying it to
//! new data costs one forward pass, which makes prior-sensitivity studies and
//! bootstrap uncertainty quantification cheap.
//!
//! Modules, bottom-up:
//!
//! * [`numerics`]: special functions (log-gamma, incomplete gamma, Bessel
//!   `K_nu`, Matern covariance), dense Cholesky kernels, the delta-Laplace
//!   distribution and deterministic splittable random streams.
//! * [`models`]: priors, spatial domains and the simulators (two toy scalar
//!   models, a linear regression, a Gaussian process, Schlather's max-stable
//!   process and a spatial conditional-extremes model), plus closed-form
//!   Bayes estimators where they exist.
//! * [`network`]: dense layers, DeepSets estimators with optional expert
//!   summary statistics, piecewise routing over replicate count and
//!   checkpoint serialization.
//! * [`training`]: losses, Adam, Monte-Carlo Bayes risk and the training
//!   loop with early stopping and pre-training chains.
//! * [`likelihood`]: Gaussian and pairwise Schlather likelihoods with a
//!   bounded Nelder-Mead maximiser for MAP baselines.
//! * [`assess`]: shared-data risk comparisons, sampling distributions and
//!   block bootstrap confidence intervals.

pub mod assess;
pub mod likelihood;
pub mod models;
pub mod network;
pub mod numerics;
pub mod training;
