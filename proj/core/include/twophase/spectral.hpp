#pragma once

// Spectral bound, Perron eigenvector, closed-form bounds, resolvent probes and
// exponential-growth fitting.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "twophase/evolution.hpp"
#include "twophase/operators.hpp"

namespace twophase {

struct SpectralOptions {
  double tol = 1e-10;
  /// Initial shift; defaults to ||M||_inf + 1.
  std::optional<double> shift0;
  int max_iterations = 2000;
};

struct Eigenpair {
  double value = 0.0;
  /// Nonnegative, unit mass.
  StateVector vector;
  bool converged = false;
  int iterations = 0;
  /// "block" when computed cell by cell, "shift-invert" otherwise.
  std::string method;
};

/// Rightmost real eigenvalue and nonnegative eigenvector of the selected operator
/// (Part::full or Part::no_recruitment).
///
/// When the recruitment kernel vanishes above the diagonal the matrix is block
/// lower-triangular and the pair is computed exactly from the 2x2 cell blocks.
/// Otherwise shift-and-invert power iteration is used with the shift moved to
/// estimate + 1. Throws IterationError on non-convergence and NumericalError when
/// the iteration oscillates like a complex dominant pair.
Eigenpair spectral_bound(const DiscreteGenerator& gen, Part which, const SpectralOptions& opts = {});

/// P(lambda) = lambda^2 + lambda (l1 + c2 + l_mu) + l_mu c2
double growth_polynomial(double lambda, double l1, double c2, double l_mu);

/// Right root of P. Throws ConfigError for negative inputs.
double closed_form_sB(double l1, double c2, double l_mu);

struct GapBound {
  double lambda_star = 0.0;
  double delta = 0.0;
  double eps_bar = 0.0;
};

/// f(eps) = eps^2 + eps (2 lambda* + c1 + c2 + mu) - (lambda* + eps + c2) int_beta1
double gap_function(double eps, double lambda_star, double c1, double c2, double mu,
                    double int_beta1);

/// Explicit lower bound eps_bar of s(A) - s(B) for constant c1, c2, mu > 0.
GapBound spectral_gap_lower_bound(double c1, double c2, double mu, double int_beta1);

/// Finite-domain surrogate of s(B): the exact discrete value, or -infinity when it lies
/// below -gamma0/h + ||B1 + B2||_inf (the regime that diverges under refinement).
struct SBSurrogate {
  double discrete = 0.0;
  double threshold = 0.0;
  double value = 0.0;
  bool divergent() const noexcept { return std::isinf(value); }
};
SBSurrogate sB_surrogate_finite(const DiscreteGenerator& gen);

/// Tail limits used by the closed form on a truncated domain. Present when c2 is
/// constant and mu, c1 settle over the last 10% of cells.
struct TailLimits {
  double l_mu = 0.0;
  double l1 = 0.0;
  double c2 = 0.0;
  int window = 0;
};
std::optional<TailLimits> tail_limits(const ModelParams& params);

/// Solution of (lambda - B) U = H on [0, S_max] by the coupled Duhamel fixed point
///   u1 = T_{mu+c1}(h1 + c2 u2),   u2 = T_{c2}(h2 + c1 u1).
struct DuhamelSolution {
  StateVector u;
  int iterations = 0;
};
DuhamelSolution coupled_duhamel(const SizeGrid& grid, const ModelParams& params, double lambda,
                                const StateVector& source, double tol = 1e-12,
                                int max_iterations = 20000);

enum class ProbeClass { bounded, diverging, inconclusive };
const char* to_string(ProbeClass c);

struct ProbeResult {
  double lambda = 0.0;
  std::vector<double> smax;
  std::vector<double> masses;
  /// masses[k+1] / masses[k]
  std::vector<double> ratios;
  ProbeClass classification = ProbeClass::inconclusive;
};

/// Resolvent-boundedness probe of (lambda - B) across truncations sharing the cell width h.
/// The source is H = (1_[0,1], 1_[0,1]). Throws IterationError when the fixed point fails.
ProbeResult sB_probe_infinite(const ModelParamsSpec& spec, double lambda,
                              const std::vector<double>& smax_list, double h);

enum class AegStatus { fitted, extinct };

struct AegFit {
  AegStatus status = AegStatus::fitted;
  /// Growth rate of the continuous flow, undoing the backward-Euler amplification.
  double lambda0_fit = 0.0;
  /// Least-squares slope of log mass over the fit window.
  double raw_log_slope = 0.0;
  /// Fitted exponential rate of the distance of the normalized profile to the reference.
  double profile_decay_rate = 0.0;
  /// Distance of the final normalized profile to the reference.
  double residual = 0.0;
  int window_records = 0;
};

/// Fits the last half of the trajectory. The reference profile is `eig_candidate`
/// when given, else the final normalized profile. Throws InsufficientDataError when
/// the window holds fewer than 20 records.
AegFit detect_AEG(const Trajectory& traj, const std::optional<StateVector>& eig_candidate = {});

struct SpectralReport {
  double s_A = 0.0;
  bool s_A_converged = false;
  std::string s_A_method;
  StateVector eigfun;
  /// -infinity marks the refinement-divergent regime.
  double s_B_surrogate = 0.0;
  std::string s_B_source;
  std::optional<double> lambda_star;
  std::optional<double> eps_bar;
  std::optional<double> delta;
  double gap = 0.0;
  std::optional<AegFit> aeg;
  std::vector<ProbeResult> probes;
};

}  // namespace twophase
