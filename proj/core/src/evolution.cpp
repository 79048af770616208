#include "twophase/evolution.hpp"

#include <cmath>
#include <ostream>

#include "twophase/error.hpp"

namespace twophase {

namespace {

double outflow_flux(const DiscreteGenerator& gen, const StateVector& u) {
  const int last = gen.cells() - 1;
  const auto k = static_cast<std::size_t>(last);
  return gen.params().gamma1[k] * u.u1()[last] + gen.params().gamma2[k] * u.u2()[last];
}

// int (int beta ds - mu) u1 dy - outflow, in the discrete quadrature.
double mass_rate(const DiscreteGenerator& gen, const std::vector<double>& col_int,
                 const StateVector& u) {
  const auto& mu = gen.params().mu;
  double acc = 0.0;
  for (int j = 0; j < gen.cells(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    acc += (col_int[k] - mu[k]) * u.u1()[j];
  }
  return acc * u.h() - outflow_flux(gen, u);
}

}  // namespace

StateVector step_implicit(const DiscreteGenerator& gen, const StateVector& u, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be positive");
  const double lambda = 1.0 / dt;
  std::shared_ptr<const Resolvent> solver;
  try {
    solver = gen.resolvent(lambda, Part::full);
  } catch (const SpectralProximityError&) {
    throw NumericalError("implicit step failed: dt = " + std::to_string(dt) +
                         " is too large for this generator");
  }
  StateVector out = solver->solve(u);
  out.data() *= lambda;
  if (!out.all_finite()) throw NumericalError("implicit step produced non-finite values");
  return out;
}

Trajectory evolve(const DiscreteGenerator& gen, const StateVector& u0, double dt, double T,
                  int record_every, const StepObserver& observer) {
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(T >= 0.0) || !std::isfinite(T)) throw ConfigError("T must be nonnegative");
  if (record_every < 1) throw ConfigError("record_every must be at least 1");
  if (u0.cells() != gen.cells()) throw ConfigError("initial state does not match the grid");

  const int steps = static_cast<int>(std::ceil(T / dt - 1e-9));
  Trajectory traj;
  traj.dt = dt;
  traj.times.reserve(static_cast<std::size_t>(steps) + 1);
  traj.masses.reserve(static_cast<std::size_t>(steps) + 1);

  auto push_mass = [&traj](double t, const StateVector& u) {
    traj.times.push_back(t);
    traj.masses.push_back(u.mass());
    traj.masses_u1.push_back(u.mass_u1());
    traj.masses_u2.push_back(u.mass_u2());
  };
  auto push_record = [&traj](int step, double t, const StateVector& u) {
    traj.record_steps.push_back(step);
    traj.record_times.push_back(t);
    traj.states.push_back(u);
  };

  StateVector u = u0;
  push_mass(0.0, u);
  push_record(0, 0.0, u);
  for (int k = 1; k <= steps; ++k) {
    u = step_implicit(gen, u, dt);
    const double t = k * dt;
    push_mass(t, u);
    if (k % record_every == 0 || k == steps) push_record(k, t, u);
    if (observer) observer(k, t, u);
  }
  return traj;
}

MassBalanceReport mass_balance(const Trajectory& traj, const DiscreteGenerator& gen) {
  if (traj.states.size() < 2) throw InsufficientDataError("mass balance needs at least two records");
  const auto col_int = gen.kernel().column_integrals(gen.grid().h());

  MassBalanceReport rep;
  double prev_rate = mass_rate(gen, col_int, traj.states.front());
  for (std::size_t r = 1; r < traj.states.size(); ++r) {
    const double t0 = traj.record_times[r - 1];
    const double t1 = traj.record_times[r];
    const double rate = mass_rate(gen, col_int, traj.states[r]);
    const double dm = (traj.states[r].mass() - traj.states[r - 1].mass()) / (t1 - t0);
    const double drift = dm - 0.5 * (prev_rate + rate);
    rep.times.push_back(0.5 * (t0 + t1));
    rep.drift.push_back(drift);
    rep.max_abs_drift = std::max(rep.max_abs_drift, std::abs(drift));
    prev_rate = rate;
  }
  const double m0 = traj.masses.front();
  const double m1 = traj.masses.back();
  const double T = traj.times.back();
  if (m0 > 0.0 && m1 > 0.0 && T > 0.0) rep.mean_log_rate = std::log(m1 / m0) / T;
  return rep;
}

double Ideal::leakage(const SizeGrid& grid, const StateVector& u) const {
  double out = 0.0;
  for (int i = 0; i < grid.size(); ++i) {
    const double c = grid.center(i);
    if (u1_zero || c < u1_from) out += std::abs(u.u1()[i]);
    if (c < u2_from) out += std::abs(u.u2()[i]);
  }
  return out * grid.h();
}

IdealProbeResult ideal_invariance_probe(const DiscreteGenerator& gen, const Ideal& ideal,
                                        const StateVector& u0, double T, double dt,
                                        int record_every) {
  if (ideal.leakage(gen.grid(), u0) != 0.0)
    throw ConfigError(std::string("initial state does not lie in ideal ") + ideal.name);
  IdealProbeResult res;
  res.trajectory = evolve(gen, u0, dt, T, record_every,
                          [&](int, double, const StateVector& u) {
                            res.max_leakage = std::max(res.max_leakage, ideal.leakage(gen.grid(), u));
                          });
  return res;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,mass_total,mass_u1,mass_u2\n";
  os.precision(12);
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    os << traj.times[k] << ',' << traj.masses[k] << ',' << traj.masses_u1[k] << ','
       << traj.masses_u2[k] << '\n';
}

void write_profile_csv(std::ostream& os, const SizeGrid& grid, const StateVector& u) {
  os << "s,u1,u2\n";
  os.precision(12);
  for (int i = 0; i < grid.size(); ++i)
    os << grid.center(i) << ',' << u.u1()[i] << ',' << u.u2()[i] << '\n';
}

}  // namespace twophase
