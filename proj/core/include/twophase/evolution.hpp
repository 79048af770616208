#pragma once

// Backward-Euler evolution of the discrete semigroup and the diagnostics built on it.

#include <functional>
#include <iosfwd>
#include <vector>

#include "twophase/operators.hpp"

namespace twophase {

/// One implicit step (I - dt M)^{-1} U of the full generator.
/// Throws NumericalError when 1/dt is too close to the spectrum.
StateVector step_implicit(const DiscreteGenerator& gen, const StateVector& u, double dt);

struct Trajectory {
  double dt = 0.0;
  /// Per step, including t = 0: size steps + 1.
  std::vector<double> times;
  std::vector<double> masses;
  std::vector<double> masses_u1;
  std::vector<double> masses_u2;
  /// Decimated profiles; the final state is always recorded.
  std::vector<int> record_steps;
  std::vector<double> record_times;
  std::vector<StateVector> states;

  int steps() const noexcept { return static_cast<int>(times.size()) - 1; }
  const StateVector& final_state() const { return states.back(); }
};

/// Called after every step with (step index, time, state).
using StepObserver = std::function<void(int, double, const StateVector&)>;

/// ceil(T/dt) implicit steps from u0, recording profiles every `record_every` steps.
Trajectory evolve(const DiscreteGenerator& gen, const StateVector& u0, double dt, double T,
                  int record_every, const StepObserver& observer = {});

struct MassBalanceReport {
  /// Midpoints of consecutive records.
  std::vector<double> times;
  /// dM/dt - [ int (int beta ds - mu) u1 dy - outflow ] between consecutive records.
  std::vector<double> drift;
  double max_abs_drift = 0.0;
  /// log(M(T) / M(0)) / T
  double mean_log_rate = 0.0;
};

/// Compares the finite-difference mass derivative with the quadrature of the mass identity.
/// The right-edge outflow flux is part of the identity. Throws InsufficientDataError with
/// fewer than two records.
MassBalanceReport mass_balance(const Trajectory& traj, const DiscreteGenerator& gen);

/// Closed lattice ideal described by per-phase support lower bounds.
struct Ideal {
  const char* name = "custom";
  /// u1 must vanish on cells whose center lies below this size.
  double u1_from = 0.0;
  double u2_from = 0.0;
  /// u1 must vanish everywhere.
  bool u1_zero = false;

  /// L1(eps, m)^2
  static Ideal Y1(double eps) { return {"Y1", eps, eps, false}; }
  /// L1(0, m) x L1(k, m)
  static Ideal Y2(double k) { return {"Y2", 0.0, k, false}; }
  /// {0} x L1(k, m)
  static Ideal Y3(double k) { return {"Y3", 0.0, k, true}; }
  /// L1(b1, m) x L1(b2, m)
  static Ideal small(double b1, double b2) { return {"small", b1, b2, false}; }

  /// Mass of |u| outside the ideal's support pattern.
  double leakage(const SizeGrid& grid, const StateVector& u) const;
};

struct IdealProbeResult {
  double max_leakage = 0.0;
  Trajectory trajectory;
};

/// Evolves u0 and tracks the largest leakage out of `ideal` over every step.
/// Throws ConfigError when u0 does not lie in the ideal.
IdealProbeResult ideal_invariance_probe(const DiscreteGenerator& gen, const Ideal& ideal,
                                        const StateVector& u0, double T, double dt,
                                        int record_every = 100);

/// CSV with header t,mass_total,mass_u1,mass_u2 (every step).
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
/// CSV with header s,u1,u2.
void write_profile_csv(std::ostream& os, const SizeGrid& grid, const StateVector& u);

}  // namespace twophase
