#include "twophase/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace twophase {

namespace {

constexpr double kMarginTol = 1e-12;
constexpr double kTailZero = 1e-6;

double max_of(std::span<const double> v) {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

bool all_equal(std::span<const double> v) {
  if (v.empty()) return true;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo <= 1e-12 * std::max(1.0, std::abs(*hi));
}

// Edge integrals are compared against this fraction of the total kernel mass.
double kernel_threshold(const Kernel& kernel, double h) {
  return 1e-12 * kernel.beta.sum() * h * h;
}

}  // namespace

SupportExtent support_extent(std::span<const double> values, const SizeGrid& grid, double tol_rel) {
  SupportExtent ext;
  const double peak = max_of(values);
  if (!(peak > 0.0)) return ext;
  const double thr = tol_rel * peak;
  for (int i = 0; i < grid.size(); ++i) {
    if (values[static_cast<std::size_t>(i)] > thr) {
      if (!ext.lo) ext.lo = grid.edge(i);
      ext.hi = grid.edge(i + 1);
    }
  }
  return ext;
}

SupportCheck check_supports(const ModelParams& params, const SizeGrid& grid, double tol_rel) {
  return {support_extent(params.c1, grid, tol_rel), support_extent(params.c2, grid, tol_rel)};
}

std::vector<double> edge_integrals(const Kernel& kernel, const SizeGrid& grid) {
  const int n = grid.size();
  const double h2 = grid.h() * grid.h();
  const Eigen::MatrixXd& b = kernel.beta;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n) - 1);
  // acc(k) = sum_{i < k, j >= k} beta(i, j)
  double acc = 0.0;
  for (int k = 1; k < n; ++k) {
    acc += b.row(k - 1).tail(n - k + 1).sum();  // row k-1 joins the s-range
    acc -= b.col(k - 1).head(k - 1).sum();      // column k-1 leaves the y-range
    acc -= b(k - 1, k - 1);
    out.push_back(std::max(0.0, acc) * h2);
  }
  return out;
}

Condition check_H1_family(const Kernel& kernel, const SizeGrid& grid, H1Mode mode) {
  const auto integrals = edge_integrals(kernel, grid);
  const double thr = kernel_threshold(kernel, grid.h());
  Condition c;
  for (std::size_t k = 0; k < integrals.size(); ++k) {
    const bool positive = integrals[k] > thr && integrals[k] > 0.0;
    const double eps = grid.edge(static_cast<int>(k) + 1);
    if (mode == H1Mode::all_eps && !positive) {
      c.holds = false;
      c.witness = eps;
      return c;
    }
    if (mode == H1Mode::exists_eps && positive) {
      c.holds = true;
      c.witness = eps;
      return c;
    }
  }
  c.holds = mode == H1Mode::all_eps;
  return c;
}

B1B2 compute_b1_b2(const Kernel& kernel, const ModelParams& params, const SizeGrid& grid) {
  B1B2 r;
  const auto sup = check_supports(params, grid);
  if (!sup.c2.hi || *sup.c2.hi < grid.length()) {
    r.failed = "H3";
    return r;
  }
  const auto integrals = edge_integrals(kernel, grid);
  const double thr = kernel_threshold(kernel, grid.h());
  std::size_t first = integrals.size();
  for (std::size_t k = 0; k < integrals.size(); ++k)
    if (integrals[k] > thr && integrals[k] > 0.0) {
      first = k;
      break;
    }
  if (first == integrals.size()) {
    r.failed = "H1bis";
    return r;
  }
  for (std::size_t k = first; k < integrals.size(); ++k)
    if (!(integrals[k] > thr && integrals[k] > 0.0)) {
      r.failed = "HypBeta";
      return r;
    }
  // The infimum lies between the last vanishing edge and the first positive one.
  const double b1 = grid.edge(static_cast<int>(first));

  const double c1_peak = max_of(params.c1);
  std::optional<double> b2;
  for (int i = 0; i < grid.size() && c1_peak > 0.0; ++i) {
    if (grid.center(i) < b1) continue;
    if (params.c1[static_cast<std::size_t>(i)] > 1e-12 * c1_peak) {
      b2 = std::max(b1, grid.edge(i));
      break;
    }
  }
  if (!b2) {
    r.failed = "HypC1";
    return r;
  }
  r.b1 = b1;
  r.b2 = b2;
  return r;
}

const char* to_string(Conservativity c) {
  switch (c) {
    case Conservativity::super: return "super";
    case Conservativity::sub: return "sub";
    case Conservativity::neutral: return "neutral";
    case Conservativity::mixed: return "mixed";
  }
  return "?";
}

ConservativityReport classify_conservativity(const Kernel& kernel, const ModelParams& params,
                                             const SizeGrid& grid) {
  ConservativityReport r;
  const auto cols = kernel.column_integrals(grid.h());
  r.min_margin = std::numeric_limits<double>::infinity();
  r.max_margin = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const double m = cols[j] - params.mu[j];
    r.min_margin = std::min(r.min_margin, m);
    r.max_margin = std::max(r.max_margin, m);
  }
  const bool super = r.min_margin >= -kMarginTol;
  const bool sub = r.max_margin <= kMarginTol;
  r.cls = super && sub ? Conservativity::neutral
          : super      ? Conservativity::super
          : sub        ? Conservativity::sub
                       : Conservativity::mixed;

  if (grid.truncated()) {
    const auto n = static_cast<std::size_t>(grid.size());
    const std::size_t window = std::max<std::size_t>(1, n / 10);
    r.tail_window = static_cast<int>(window);
    auto tail = [&](const std::vector<double>& v) {
      return std::minmax_element(v.end() - static_cast<std::ptrdiff_t>(window), v.end());
    };
    const auto [mu_lo, mu_hi] = tail(params.mu);
    const auto [c2_lo, c2_hi] = tail(params.c2);
    r.liminf_mu = *mu_lo;
    r.limsup_mu = *mu_hi;
    r.liminf_c2 = *c2_lo;
    r.limsup_c2 = *c2_hi;
  }
  return r;
}

const char* to_string(Predicted p) {
  switch (p) {
    case Predicted::irreducible_gap_aeg: return "irreducible+gap+AEG";
    case Predicted::gap_only: return "gap-only";
    case Predicted::no_gap: return "no-gap";
    case Predicted::empty_spectrum: return "empty-spectrum";
    case Predicted::undetermined: return "undetermined";
  }
  return "?";
}

bool generator_graph_strongly_connected(const Kernel& kernel, const ModelParams& params,
                                        const SizeGrid& grid) {
  const int n = grid.size();
  const int dim = 2 * n;
  std::vector<std::vector<int>> fwd(static_cast<std::size_t>(dim)), bwd(fwd);
  auto link = [&](int from, int to) {
    fwd[static_cast<std::size_t>(from)].push_back(to);
    bwd[static_cast<std::size_t>(to)].push_back(from);
  };
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (i + 1 < n) {
      link(i, i + 1);
      link(n + i, n + i + 1);
    }
    if (params.c1[k] > 0.0) link(i, n + i);
    if (params.c2[k] > 0.0) link(n + i, i);
    for (int j = 0; j < n; ++j)
      if (j != i && kernel.beta(i, j) > 0.0) link(j, i);
  }
  auto reaches_all = [dim](const std::vector<std::vector<int>>& adj) {
    std::vector<char> seen(static_cast<std::size_t>(dim), 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int count = 1;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int w : adj[static_cast<std::size_t>(v)])
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          ++count;
          q.push(w);
        }
    }
    return count == dim;
  };
  return reaches_all(fwd) && reaches_all(bwd);
}

Verdict full_verdict(const Kernel& kernel, const ModelParams& params, const SizeGrid& grid) {
  Verdict v;
  v.domain = grid.kind();
  v.h = grid.h();
  v.supports = check_supports(params, grid);
  v.H1 = check_H1_family(kernel, grid, H1Mode::all_eps);
  v.H1bis = check_H1_family(kernel, grid, H1Mode::exists_eps);

  v.H2.holds = v.supports.c1.lo && *v.supports.c1.lo == 0.0;
  v.H2.witness = v.supports.c1.lo;
  v.H3.holds = v.supports.c2.hi && *v.supports.c2.hi >= grid.length();
  v.H3.witness = v.supports.c2.hi;
  v.irreducible = v.H1.holds && v.H2.holds && v.H3.holds;
  v.discrete_irreducible = generator_graph_strongly_connected(kernel, params, grid);
  v.b = compute_b1_b2(kernel, params, grid);
  v.conservativity = classify_conservativity(kernel, params, grid);
  if (kernel.dominator) v.weak_compact_sufficient = true;

  double int_beta1 = 0.0;
  for (double b : kernel.beta1) int_beta1 += b * grid.h();
  v.constant_case = all_equal(params.c1) && all_equal(params.c2) && all_equal(params.mu) &&
                    params.c1.front() > 0.0 && params.c2.front() > 0.0 &&
                    params.mu.front() > 0.0 && int_beta1 > 0.0;

  if (!grid.truncated()) {
    if (!v.H1bis.holds) {
      v.predicted = Predicted::empty_spectrum;
      v.basis = "empty spectrum without a one-sided kernel";
    } else if (v.irreducible) {
      v.predicted = Predicted::irreducible_gap_aeg;
      v.basis = "irreducibility criterion and gap characterization";
    } else {
      v.predicted = Predicted::gap_only;
      v.basis = "gap characterization without irreducibility";
    }
    return v;
  }

  const auto& c = v.conservativity;
  const double mu_scale = kTailZero * std::max(1.0, max_of(params.mu));
  const double c2_scale = kTailZero * std::max(1.0, max_of(params.c2));
  const bool tail_mu_positive = *c.liminf_mu > mu_scale;
  const bool tail_c2_positive = *c.liminf_c2 > c2_scale;
  const bool tail_mu_zero = *c.limsup_mu <= mu_scale;
  const bool tail_c2_zero = *c.limsup_c2 <= c2_scale;
  const bool super = c.cls == Conservativity::super || c.cls == Conservativity::neutral;
  const bool sub = c.cls == Conservativity::sub || c.cls == Conservativity::neutral;

  auto gap = [&](const char* basis) {
    v.predicted = v.irreducible ? Predicted::irreducible_gap_aeg : Predicted::gap_only;
    v.basis = basis;
  };
  if (super && tail_mu_positive && tail_c2_positive) {
    gap("super-conservative gap");
  } else if (sub && (tail_c2_zero || tail_mu_zero)) {
    v.predicted = Predicted::no_gap;
    v.basis = "sub-conservative without a spectral gap";
  } else if (v.constant_case) {
    gap("constant-rate gap bound");
  } else {
    v.predicted = Predicted::undetermined;
    v.basis = "no applicable criterion";
  }
  return v;
}

}  // namespace twophase
