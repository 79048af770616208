#pragma once

// Size mesh, coefficient descriptors and their sampled counterparts.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace twophase {

enum class DomainKind { finite, truncated_infinite };

const char* to_string(DomainKind kind);

struct DomainSpec {
  DomainKind kind = DomainKind::finite;
  /// m for a finite domain, S_max for a truncated infinite one.
  double length = 1.0;
};

/// Uniform partition of [0, length] into n cells.
class SizeGrid {
 public:
  SizeGrid(DomainKind kind, double length, int n);

  DomainKind kind() const noexcept { return kind_; }
  bool truncated() const noexcept { return kind_ == DomainKind::truncated_infinite; }
  int size() const noexcept { return n_; }
  double length() const noexcept { return length_; }
  /// Cell width (the mesh is uniform, so this is also the max width).
  double h() const noexcept { return h_; }

  std::span<const double> edges() const noexcept { return edges_; }
  std::span<const double> centers() const noexcept { return centers_; }
  double edge(int i) const { return edges_[static_cast<std::size_t>(i)]; }
  double center(int i) const { return centers_[static_cast<std::size_t>(i)]; }

  bool operator==(const SizeGrid& other) const noexcept;

 private:
  DomainKind kind_;
  double length_;
  int n_;
  double h_;
  std::vector<double> edges_;
  std::vector<double> centers_;
};

/// Uniform mesh over [0, m] or [0, S_max]. Throws ConfigError for n < 2 or length <= 0.
SizeGrid build_grid(const DomainSpec& domain, int n);

/// A scalar function of size, described in a serializable way where possible.
class Coefficient {
 public:
  struct Constant {
    double value;
  };
  /// Step interpolation: value of the last breakpoint with s_k <= s (first value left of s_0).
  struct StepTable {
    std::vector<std::pair<double, double>> points;
  };
  /// offset + amplitude * exp(-rate * s)
  struct ExpDecay {
    double amplitude;
    double rate;
    double offset = 0.0;
  };
  /// value on [lo, hi], zero elsewhere
  struct Indicator {
    double lo;
    double hi;
    double value = 1.0;
  };
  struct Linear {
    double intercept;
    double slope;
  };
  struct Function {
    std::function<double(double)> fn;
    std::string label;
  };
  using Form = std::variant<Constant, StepTable, ExpDecay, Indicator, Linear, Function>;

  Coefficient() : form_(Constant{0.0}) {}
  explicit Coefficient(Form form) : form_(std::move(form)) {}

  static Coefficient constant(double value) { return Coefficient(Constant{value}); }
  static Coefficient step_table(std::vector<std::pair<double, double>> points);
  static Coefficient exp_decay(double amplitude, double rate, double offset = 0.0) {
    return Coefficient(ExpDecay{amplitude, rate, offset});
  }
  static Coefficient indicator(double lo, double hi, double value = 1.0) {
    return Coefficient(Indicator{lo, hi, value});
  }
  static Coefficient linear(double intercept, double slope) {
    return Coefficient(Linear{intercept, slope});
  }
  static Coefficient function(std::function<double(double)> fn, std::string label = "closure") {
    return Coefficient(Function{std::move(fn), std::move(label)});
  }

  double operator()(double s) const;
  const Form& form() const noexcept { return form_; }
  bool is_constant() const noexcept { return std::holds_alternative<Constant>(form_); }
  std::string describe() const;

 private:
  Form form_;
};

struct ModelParamsSpec {
  Coefficient gamma1 = Coefficient::constant(1.0);
  Coefficient gamma2 = Coefficient::constant(1.0);
  Coefficient mu = Coefficient::constant(0.0);
  Coefficient c1 = Coefficient::constant(0.0);
  Coefficient c2 = Coefficient::constant(0.0);
  double gamma0 = 1.0;
};

/// Coefficients sampled at cell centers.
struct ModelParams {
  std::vector<double> gamma1;
  std::vector<double> gamma2;
  std::vector<double> mu;
  std::vector<double> c1;
  std::vector<double> c2;
  double gamma0 = 1.0;

  int size() const noexcept { return static_cast<int>(mu.size()); }
};

/// Samples every coefficient at the cell centers and validates positivity and the
/// growth-rate lower bound. Throws ValidationError naming the field and cell.
ModelParams sample_params(const ModelParamsSpec& spec, const SizeGrid& grid);

enum class KernelRegion { s_gt_y, s_ge_y, s_lt_y, box };

struct KernelSpec {
  struct Constant {
    double value;
  };
  /// beta(s, y) = f(s) * g(y)
  struct Product {
    Coefficient s_factor;
    Coefficient y_factor;
  };
  /// Cell values; must be n x n for the grid it is built on.
  struct Table {
    std::vector<std::vector<double>> values;
  };
  /// value * 1_region(s, y). For box, the ranges are closed intervals.
  struct Indicator {
    KernelRegion region = KernelRegion::box;
    std::pair<double, double> s_range{0.0, 0.0};
    std::pair<double, double> y_range{0.0, 0.0};
    double value = 1.0;
  };
  struct Function {
    std::function<double(double, double)> fn;
    std::string label;
  };
  using Form = std::variant<Constant, Product, Table, Indicator, Function>;

  Form form = Constant{0.0};
  double scale = 1.0;
  /// beta_hat(s) with beta(s, y) <= beta_hat(s); sufficient for weak compactness.
  std::optional<Coefficient> dominator;

  static KernelSpec of(Form f) {
    KernelSpec k;
    k.form = std::move(f);
    return k;
  }
  static KernelSpec constant(double value) { return of(Constant{value}); }
  static KernelSpec product(Coefficient f, Coefficient g) {
    return of(Product{std::move(f), std::move(g)});
  }
  static KernelSpec lower_triangle(double value = 1.0) {
    return of(Indicator{KernelRegion::s_gt_y, {}, {}, value});
  }
  /// value on [s_lo, s_hi] x [y_lo, y_hi]
  static KernelSpec box(double s_lo, double s_hi, double y_lo, double y_hi, double value = 1.0) {
    return of(Indicator{KernelRegion::box, {s_lo, s_hi}, {y_lo, y_hi}, value});
  }
  static KernelSpec function(std::function<double(double, double)> fn,
                             std::string label = "closure") {
    return of(Function{std::move(fn), std::move(label)});
  }

  double operator()(double s, double y) const;
};

/// Recruitment kernel sampled at (center_i, center_j).
struct Kernel {
  /// beta(i, j) = beta(s_i, y_j), n x n
  Eigen::MatrixXd beta;
  /// max_j sum_i beta(i, j) h
  double k_beta = 0.0;
  /// min_j beta(i, j)
  std::vector<double> beta1;
  std::optional<std::vector<double>> dominator;

  int size() const noexcept { return static_cast<int>(beta.rows()); }
  /// sum_i beta(i, j) h for every column j.
  std::vector<double> column_integrals(double h) const;
};

Kernel build_kernel(const KernelSpec& spec, const SizeGrid& grid);

}  // namespace twophase
