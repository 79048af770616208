#pragma once

// Grid-resolution checks of the irreducibility, spectral-gap and conservativity
// hypotheses, composed into a predicted outcome class.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twophase/grid.hpp"

namespace twophase {

/// [lo, hi] spanned by the cells where a grid function exceeds tol_rel * max.
/// Empty when the function vanishes identically.
struct SupportExtent {
  std::optional<double> lo;
  std::optional<double> hi;
  bool empty() const noexcept { return !lo.has_value(); }
};
SupportExtent support_extent(std::span<const double> values, const SizeGrid& grid,
                             double tol_rel = 1e-12);

struct SupportCheck {
  SupportExtent c1;
  SupportExtent c2;
  /// inf supp c1, absent when c1 == 0
  std::optional<double> inf_supp_c1() const { return c1.lo; }
  /// sup supp c2, absent when c2 == 0
  std::optional<double> sup_supp_c2() const { return c2.hi; }
};
SupportCheck check_supports(const ModelParams& params, const SizeGrid& grid, double tol_rel = 1e-12);

/// int_0^eps int_eps^m beta(s, y) dy ds at every interior edge eps = edge(k), k = 1..n-1.
std::vector<double> edge_integrals(const Kernel& kernel, const SizeGrid& grid);

enum class H1Mode { all_eps, exists_eps };

struct Condition {
  bool holds = false;
  /// all_eps: first failing eps. exists_eps: first succeeding delta.
  std::optional<double> witness;
};
Condition check_H1_family(const Kernel& kernel, const SizeGrid& grid, H1Mode mode);

struct B1B2 {
  std::optional<double> b1;
  std::optional<double> b2;
  /// Name of the failing hypothesis when absent.
  std::string failed;
  bool present() const noexcept { return b1.has_value(); }
};
B1B2 compute_b1_b2(const Kernel& kernel, const ModelParams& params, const SizeGrid& grid);

enum class Conservativity { super, sub, neutral, mixed };
const char* to_string(Conservativity c);

struct ConservativityReport {
  Conservativity cls = Conservativity::mixed;
  /// Extremes over y of int beta(s, y) ds - mu(y).
  double min_margin = 0.0;
  double max_margin = 0.0;
  /// Tail surrogates over the last 10% of cells (truncated domains only).
  int tail_window = 0;
  std::optional<double> liminf_mu;
  std::optional<double> limsup_mu;
  std::optional<double> liminf_c2;
  std::optional<double> limsup_c2;
};
ConservativityReport classify_conservativity(const Kernel& kernel, const ModelParams& params,
                                             const SizeGrid& grid);

enum class Predicted { irreducible_gap_aeg, gap_only, no_gap, empty_spectrum, undetermined };
const char* to_string(Predicted p);

struct Verdict {
  DomainKind domain = DomainKind::finite;
  double h = 0.0;
  /// H1/H2/H3 on a finite domain, H4/H5/H6 on a truncated one.
  Condition H1, H2, H3;
  Condition H1bis;
  bool irreducible = false;
  /// Strong connectivity of the discrete generator's graph.
  bool discrete_irreducible = false;
  SupportCheck supports;
  B1B2 b;
  ConservativityReport conservativity;
  /// Dominator supplied and respected. Absent when no dominator was given.
  std::optional<bool> weak_compact_sufficient;
  /// Constant c1, c2, mu > 0 with a nonzero beta1.
  bool constant_case = false;
  Predicted predicted = Predicted::undetermined;
  /// Name of the result each prediction rests on.
  std::string basis;
};

Verdict full_verdict(const Kernel& kernel, const ModelParams& params, const SizeGrid& grid);

/// True when the off-diagonal pattern of the discrete generator is strongly connected.
bool generator_graph_strongly_connected(const Kernel& kernel, const ModelParams& params,
                                        const SizeGrid& grid);

}  // namespace twophase
