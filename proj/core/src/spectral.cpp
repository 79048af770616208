#include "twophase/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "twophase/error.hpp"

namespace twophase {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Block2 {
  double p, q, r, t;  // [[p, q], [r, t]], q, r >= 0
};

double perron_root(const Block2& b) {
  const double half = 0.5 * (b.p - b.t);
  return 0.5 * (b.p + b.t) + std::sqrt(half * half + b.q * b.r);
}

// Nonnegative null vector of (B - rho I) for the Perron root rho of a Metzler 2x2 block.
std::pair<double, double> perron_vector(const Block2& b, double rho) {
  if (b.q > 0.0) return {b.q, std::max(0.0, rho - b.p)};
  if (b.r > 0.0) return {std::max(0.0, rho - b.t), b.r};
  return b.p >= b.t ? std::pair{1.0, 0.0} : std::pair{0.0, 1.0};
}

Block2 cell_block(const DiscreteGenerator& gen, int i, bool with_recruitment) {
  const auto& p = gen.params();
  const auto k = static_cast<std::size_t>(i);
  const double inv_h = 1.0 / gen.grid().h();
  Block2 b{};
  b.p = -p.gamma1[k] * inv_h - p.mu[k] - p.c1[k];
  b.t = -p.gamma2[k] * inv_h - p.c2[k];
  b.q = p.c2[k];
  b.r = p.c1[k];
  if (with_recruitment) b.p += gen.B3_block()(i, i);
  return b;
}

// Exact Perron pair of a block lower-triangular generator.
Eigenpair block_eigenpair(const DiscreteGenerator& gen, bool with_recruitment) {
  const int n = gen.cells();
  const double inv_h = 1.0 / gen.grid().h();
  std::vector<Block2> blocks(static_cast<std::size_t>(n));
  std::vector<double> roots(static_cast<std::size_t>(n));
  double best = -kInf;
  for (int i = 0; i < n; ++i) {
    blocks[static_cast<std::size_t>(i)] = cell_block(gen, i, with_recruitment);
    roots[static_cast<std::size_t>(i)] = perron_root(blocks[static_cast<std::size_t>(i)]);
    best = std::max(best, roots[static_cast<std::size_t>(i)]);
  }
  // The last cell attaining the maximum keeps every later block strictly below rho.
  int k = n - 1;
  while (roots[static_cast<std::size_t>(k)] < best - 1e-12 * std::max(1.0, std::abs(best))) --k;
  const double rho = roots[static_cast<std::size_t>(k)];

  StateVector v(n, gen.grid().h());
  const auto [a0, b0] = perron_vector(blocks[static_cast<std::size_t>(k)], rho);
  v.u1()[k] = a0;
  v.u2()[k] = b0;
  const auto& g1 = gen.params().gamma1;
  const auto& g2 = gen.params().gamma2;
  const Eigen::MatrixXd& b3 = gen.B3_block();
  for (int j = k + 1; j < n; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    double r1 = g1[jj - 1] * inv_h * v.u1()[j - 1];
    double r2 = g2[jj - 1] * inv_h * v.u2()[j - 1];
    if (with_recruitment)
      for (int l = k; l < j; ++l) r1 += b3(j, l) * v.u1()[l];
    // (rho I - D_j) x = r
    const Block2& d = blocks[jj];
    const double a = rho - d.p, b = -d.q, c = -d.r, e = rho - d.t;
    const double det = a * e - b * c;
    v.u1()[j] = (e * r1 - b * r2) / det;
    v.u2()[j] = (a * r2 - c * r1) / det;
  }
  Eigenpair out;
  out.value = rho;
  out.vector = v.normalized();
  out.converged = true;
  out.iterations = 0;
  out.method = "block";
  return out;
}

// Collatz-Wielandt upper bound max_i (Mx)_i / x_i, valid for x > 0.
std::optional<double> collatz_upper(const DiscreteGenerator& gen, const StateVector& x) {
  if (!(x.min() > 0.0)) return std::nullopt;
  const StateVector mx = gen.apply(Part::full, x);
  return (mx.data().array() / x.data().array()).maxCoeff();
}

Eigenpair shift_invert(const DiscreteGenerator& gen, const SpectralOptions& opts) {
  const int n = gen.cells();
  const double h = gen.grid().h();
  double sigma = opts.shift0.value_or(gen.inf_norm() + 1.0);

  auto fresh_start = [&]() {
    StateVector x(Eigen::VectorXd::Ones(2 * n), h);
    return x.normalized();
  };
  std::shared_ptr<const Resolvent> solver;
  auto refactor = [&]() {
    for (int attempt = 0; attempt < 50; ++attempt) {
      try {
        solver = factorize(gen, sigma, Part::full);
        return;
      } catch (const SpectralProximityError&) {
        sigma += 0.5 * std::max(1.0, std::abs(sigma)) * 1e-3 + 1e-3;
      }
    }
    throw NumericalError("could not factorize the shifted generator near " + std::to_string(sigma));
  };
  refactor();

  StateVector x = fresh_start();
  double est = std::numeric_limits<double>::quiet_NaN();
  int at_shift = 0;
  int small = 0;
  std::deque<double> increments;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    StateVector y = solver->solve(x);
    const double scale = y.data().cwiseAbs().maxCoeff();
    const double ymass = y.mass();
    if (!y.all_finite() || !(ymass > 0.0) || y.min() < -1e-10 * scale) {
      // The shift fell inside the spectrum: move right and restart.
      sigma += std::max(1.0, std::abs(sigma));
      refactor();
      x = fresh_start();
      est = std::numeric_limits<double>::quiet_NaN();
      at_shift = 0;
      small = 0;
      increments.clear();
      continue;
    }
    const double rho = ymass / x.mass();
    const double next = sigma - 1.0 / rho;
    x = StateVector(y.data() / ymass, h);
    ++at_shift;

    if (std::isfinite(est)) {
      const double inc = next - est;
      increments.push_back(inc);
      if (increments.size() > 40) increments.pop_front();
      small = (at_shift >= 3 && std::abs(inc) <= opts.tol * std::max(1.0, std::abs(next))) ? small + 1 : 0;
    }
    est = next;
    if (small >= 2) {
      Eigenpair out;
      out.value = est;
      Eigen::VectorXd v = x.data().cwiseMax(0.0);
      out.vector = StateVector(std::move(v), h).normalized();
      out.converged = true;
      out.iterations = it;
      out.method = "shift-invert";
      return out;
    }

    if (at_shift >= 40 && increments.size() == 40) {
      int flips = 0;
      for (std::size_t k = 1; k < increments.size(); ++k)
        if ((increments[k] > 0.0) != (increments[k - 1] > 0.0)) ++flips;
      double early = 0.0, late = 0.0;
      for (std::size_t k = 0; k < 10; ++k) {
        early += std::abs(increments[k]);
        late += std::abs(increments[increments.size() - 1 - k]);
      }
      if (flips >= 30 && late >= 0.5 * early)
        throw NumericalError("shift-invert iteration oscillates; dominant eigenvalue looks complex");
    }

    double target = est + 1.0;
    if (auto cw = collatz_upper(gen, x); cw && target <= *cw) target = *cw + 0.5;
    if (std::abs(target - sigma) > 0.1) {
      sigma = target;
      refactor();
      at_shift = 0;
      small = 0;
      increments.clear();
    }
  }
  throw IterationError("spectral bound did not converge", opts.max_iterations, est);
}

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

bool settles(const std::vector<double>& v, std::size_t from, double rel) {
  const auto [lo, hi] = std::minmax_element(v.begin() + static_cast<std::ptrdiff_t>(from), v.end());
  return *hi - *lo <= rel * std::max(1.0, std::abs(*hi));
}

}  // namespace

Eigenpair spectral_bound(const DiscreteGenerator& gen, Part which, const SpectralOptions& opts) {
  if (!(opts.tol > 0.0)) throw ConfigError("spectral tolerance must be positive");
  if (which == Part::no_recruitment) return block_eigenpair(gen, false);
  if (which != Part::full) throw ConfigError("spectral_bound supports the full operator and B only");
  if (gen.recruitment_lower_triangular()) return block_eigenpair(gen, true);
  return shift_invert(gen, opts);
}

double growth_polynomial(double lambda, double l1, double c2, double l_mu) {
  return lambda * lambda + lambda * (l1 + c2 + l_mu) + l_mu * c2;
}

double closed_form_sB(double l1, double c2, double l_mu) {
  if (!(l1 >= 0.0) || !(c2 >= 0.0) || !(l_mu >= 0.0))
    throw ConfigError("closed-form spectral bound needs nonnegative l1, c2, l_mu");
  const double b = l1 + c2 + l_mu;
  const double prod = l_mu * c2;
  if (prod == 0.0) return 0.0;
  // Right root of lambda^2 + b lambda + prod, computed without cancellation.
  const double disc = std::sqrt(std::max(0.0, b * b - 4.0 * prod));
  return -2.0 * prod / (b + disc);
}

double gap_function(double eps, double lambda_star, double c1, double c2, double mu,
                    double int_beta1) {
  return eps * eps + eps * (2.0 * lambda_star + c1 + c2 + mu) -
         (lambda_star + eps + c2) * int_beta1;
}

GapBound spectral_gap_lower_bound(double c1, double c2, double mu, double int_beta1) {
  if (!(c1 > 0.0) || !(c2 > 0.0) || !(mu > 0.0))
    throw ConfigError("gap bound needs positive constant c1, c2, mu");
  if (!(int_beta1 >= 0.0)) throw ConfigError("integral of beta1 must be nonnegative");
  GapBound g;
  g.lambda_star = closed_form_sB(c1, c2, mu);
  const double a = 2.0 * g.lambda_star + c1 + c2 + mu - int_beta1;
  g.delta = a * a + 4.0 * (g.lambda_star + c2) * int_beta1;
  if (g.delta < 0.0) throw NumericalError("negative discriminant in gap bound");
  const double root = std::sqrt(g.delta);
  // Positive root of eps^2 + a eps - (lambda* + c2) int_beta1, cancellation-free.
  const double cst = (g.lambda_star + c2) * int_beta1;
  if (cst == 0.0)
    g.eps_bar = std::max(0.0, -a);
  else
    g.eps_bar = a >= 0.0 ? 2.0 * cst / (a + root) : 0.5 * (-a + root);
  return g;
}

SBSurrogate sB_surrogate_finite(const DiscreteGenerator& gen) {
  SBSurrogate s;
  s.discrete = block_eigenpair(gen, false).value;
  s.threshold = -gen.params().gamma0 / gen.grid().h() + gen.coupling_inf_norm();
  s.value = s.discrete <= s.threshold + 1e-12 ? -kInf : s.discrete;
  return s;
}

std::optional<TailLimits> tail_limits(const ModelParams& params) {
  const auto n = static_cast<std::size_t>(params.size());
  if (n == 0) return std::nullopt;
  const std::size_t window = std::max<std::size_t>(1, n / 10);
  const std::size_t from = n - window;
  if (!settles(params.c2, 0, 1e-12)) return std::nullopt;
  if (!settles(params.mu, from, 1e-6) || !settles(params.c1, from, 1e-6)) return std::nullopt;
  TailLimits t;
  t.l_mu = params.mu.back();
  t.l1 = params.c1.back();
  t.c2 = params.c2.back();
  t.window = static_cast<int>(window);
  return t;
}

DuhamelSolution coupled_duhamel(const SizeGrid& grid, const ModelParams& params, double lambda,
                                const StateVector& source, double tol, int max_iterations) {
  const int n = grid.size();
  if (source.cells() != n || params.size() != n)
    throw ConfigError("probe inputs do not match the grid");
  std::vector<double> decay1(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < decay1.size(); ++i) decay1[i] = params.mu[i] + params.c1[i];

  std::vector<double> u1(static_cast<std::size_t>(n), 0.0), u2(u1), rhs(u1);
  DuhamelSolution sol;
  for (int it = 1; it <= max_iterations; ++it) {
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      rhs[k] = source.u1()[i] + params.c2[k] * u2[k];
    }
    auto n1 = transport_duhamel(lambda, rhs, params.gamma1, decay1, grid);
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      rhs[k] = source.u2()[i] + params.c1[k] * n1[k];
    }
    auto n2 = transport_duhamel(lambda, rhs, params.gamma2, params.c2, grid);

    double diff = 0.0, norm = 0.0;
    bool finite = true;
    for (std::size_t k = 0; k < n1.size(); ++k) {
      diff += std::abs(n1[k] - u1[k]) + std::abs(n2[k] - u2[k]);
      norm += std::abs(n1[k]) + std::abs(n2[k]);
      finite = finite && std::isfinite(n1[k]) && std::isfinite(n2[k]);
    }
    u1 = std::move(n1);
    u2 = std::move(n2);
    sol.iterations = it;
    if (!finite || diff <= tol * norm) {
      sol.u = StateVector::from_phases(u1, u2, grid.h());
      return sol;
    }
  }
  double last = 0.0;
  for (std::size_t k = 0; k < u1.size(); ++k) last += (u1[k] + u2[k]) * grid.h();
  throw IterationError("coupled Duhamel fixed point did not converge", max_iterations, last);
}

const char* to_string(ProbeClass c) {
  switch (c) {
    case ProbeClass::bounded: return "resolvent-bounded";
    case ProbeClass::diverging: return "diverging";
    case ProbeClass::inconclusive: return "inconclusive";
  }
  return "?";
}

ProbeResult sB_probe_infinite(const ModelParamsSpec& spec, double lambda,
                              const std::vector<double>& smax_list, double h) {
  if (smax_list.size() < 2) throw ConfigError("probe needs at least two truncation lengths");
  if (!std::is_sorted(smax_list.begin(), smax_list.end()) ||
      std::adjacent_find(smax_list.begin(), smax_list.end()) != smax_list.end())
    throw ConfigError("truncation lengths must be strictly increasing");
  if (!(h > 0.0)) throw ConfigError("probe cell width must be positive");

  const Coefficient unit = Coefficient::indicator(0.0, 1.0);
  ProbeResult res;
  res.lambda = lambda;
  for (double smax : smax_list) {
    const int n = static_cast<int>(std::lround(smax / h));
    const SizeGrid grid(DomainKind::truncated_infinite, smax, n);
    const ModelParams params = sample_params(spec, grid);
    const StateVector source = StateVector::sample(grid, unit, unit);
    const auto sol = coupled_duhamel(grid, params, lambda, source);
    res.smax.push_back(smax);
    res.masses.push_back(sol.u.all_finite() ? sol.u.norm() : kInf);
  }
  bool all_up = true, all_flat = true;
  for (std::size_t k = 1; k < res.masses.size(); ++k) {
    const double ratio = res.masses[k] / res.masses[k - 1];
    res.ratios.push_back(ratio);
    all_up = all_up && (std::isnan(ratio) || ratio >= 1.2);
    all_flat = all_flat && ratio <= 1.02;
  }
  if (all_up)
    res.classification = ProbeClass::diverging;
  else if (all_flat)
    res.classification = ProbeClass::bounded;
  return res;
}

AegFit detect_AEG(const Trajectory& traj, const std::optional<StateVector>& eig_candidate) {
  if (traj.states.empty() || traj.times.size() < 2)
    throw InsufficientDataError("trajectory has no time steps");
  AegFit fit;
  for (double m : traj.masses) {
    if (!(m > 0.0) || !std::isfinite(m)) {
      fit.status = AegStatus::extinct;
      return fit;
    }
  }
  const double T = traj.times.back();
  const double t_half = 0.5 * T;

  std::vector<std::size_t> window;
  for (std::size_t r = 0; r < traj.states.size(); ++r)
    if (traj.record_times[r] >= t_half) window.push_back(r);
  fit.window_records = static_cast<int>(window.size());
  if (window.size() < 20)
    throw InsufficientDataError("fit window holds " + std::to_string(window.size()) +
                                " records, need 20");

  std::vector<double> ts, logs;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    if (traj.times[k] < t_half) continue;
    ts.push_back(traj.times[k]);
    logs.push_back(std::log(traj.masses[k]));
  }
  fit.raw_log_slope = ls_slope(ts, logs);
  // Backward Euler multiplies the dominant mode by 1 / (1 - dt s) per step.
  fit.lambda0_fit = (1.0 - std::exp(-fit.raw_log_slope * traj.dt)) / traj.dt;

  const StateVector reference =
      eig_candidate ? eig_candidate->normalized() : traj.final_state().normalized();
  std::vector<double> dt_, dlog;
  for (std::size_t r = 0; r < traj.states.size(); ++r) {
    if (traj.record_times[r] < 0.1 * T) continue;
    const double d = traj.states[r].normalized().l1_distance(reference);
    if (d <= 1e-12) continue;
    dt_.push_back(traj.record_times[r]);
    dlog.push_back(std::log(d));
  }
  fit.profile_decay_rate = dt_.size() >= 2 ? ls_slope(dt_, dlog) : -kInf;
  fit.residual = traj.final_state().normalized().l1_distance(reference);
  return fit;
}

}  // namespace twophase
