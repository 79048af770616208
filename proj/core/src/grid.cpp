#include "twophase/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "twophase/error.hpp"

namespace twophase {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<double> sample(const Coefficient& c, const SizeGrid& grid) {
  std::vector<double> out(static_cast<std::size_t>(grid.size()));
  for (int i = 0; i < grid.size(); ++i) out[static_cast<std::size_t>(i)] = c(grid.center(i));
  return out;
}

void require_finite_nonnegative(const std::vector<double>& v, const std::string& field) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw ValidationError(field, static_cast<int>(i), "non-finite sample");
    if (v[i] < 0.0) throw ValidationError(field, static_cast<int>(i), "negative rate sample");
  }
}

void require_above(const std::vector<double>& v, double bound, const std::string& field) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw ValidationError(field, static_cast<int>(i), "non-finite sample");
    if (v[i] < bound) {
      std::ostringstream os;
      os << "growth rate " << v[i] << " below gamma0 = " << bound;
      throw ValidationError(field, static_cast<int>(i), os.str());
    }
  }
}

bool in_closed(double x, std::pair<double, double> r) { return x >= r.first && x <= r.second; }

}  // namespace

const char* to_string(DomainKind kind) {
  return kind == DomainKind::finite ? "finite" : "truncated_infinite";
}

SizeGrid::SizeGrid(DomainKind kind, double length, int n)
    : kind_(kind), length_(length), n_(n), h_(0.0) {
  if (!(length > 0.0) || !std::isfinite(length))
    throw ConfigError("domain length must be positive and finite");
  if (n < 2) throw ConfigError("grid needs at least 2 cells");
  h_ = length / n;
  edges_.resize(static_cast<std::size_t>(n) + 1);
  centers_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i <= n; ++i) edges_[static_cast<std::size_t>(i)] = length * i / n;
  edges_.back() = length;
  for (int i = 0; i < n; ++i)
    centers_[static_cast<std::size_t>(i)] = length * (i + 0.5) / n;
}

bool SizeGrid::operator==(const SizeGrid& other) const noexcept {
  return kind_ == other.kind_ && length_ == other.length_ && n_ == other.n_;
}

SizeGrid build_grid(const DomainSpec& domain, int n) { return SizeGrid(domain.kind, domain.length, n); }

Coefficient Coefficient::step_table(std::vector<std::pair<double, double>> points) {
  if (points.empty()) throw ConfigError("step table needs at least one point");
  std::sort(points.begin(), points.end());
  return Coefficient(StepTable{std::move(points)});
}

double Coefficient::operator()(double s) const {
  return std::visit(
      Overloaded{
          [](const Constant& c) { return c.value; },
          [s](const StepTable& t) {
            double v = t.points.front().second;
            for (const auto& [x, y] : t.points) {
              if (x <= s)
                v = y;
              else
                break;
            }
            return v;
          },
          [s](const ExpDecay& e) { return e.offset + e.amplitude * std::exp(-e.rate * s); },
          [s](const Indicator& ind) { return (s >= ind.lo && s <= ind.hi) ? ind.value : 0.0; },
          [s](const Linear& l) { return l.intercept + l.slope * s; },
          [s](const Function& f) { return f.fn(s); },
      },
      form_);
}

std::string Coefficient::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Constant& c) { os << "constant(" << c.value << ")"; },
                 [&](const StepTable& t) { os << "table(" << t.points.size() << " points)"; },
                 [&](const ExpDecay& e) {
                   os << "exp_decay(" << e.amplitude << ", " << e.rate << ", " << e.offset << ")";
                 },
                 [&](const Indicator& i) {
                   os << "indicator([" << i.lo << ", " << i.hi << "], " << i.value << ")";
                 },
                 [&](const Linear& l) { os << "linear(" << l.intercept << ", " << l.slope << ")"; },
                 [&](const Function& f) { os << f.label; },
             },
             form_);
  return os.str();
}

ModelParams sample_params(const ModelParamsSpec& spec, const SizeGrid& grid) {
  if (!(spec.gamma0 > 0.0) || !std::isfinite(spec.gamma0))
    throw ValidationError("coefficients.gamma0", -1, "gamma0 must be positive");
  ModelParams p;
  p.gamma0 = spec.gamma0;
  p.gamma1 = sample(spec.gamma1, grid);
  p.gamma2 = sample(spec.gamma2, grid);
  p.mu = sample(spec.mu, grid);
  p.c1 = sample(spec.c1, grid);
  p.c2 = sample(spec.c2, grid);
  require_above(p.gamma1, spec.gamma0, "coefficients.gamma1");
  require_above(p.gamma2, spec.gamma0, "coefficients.gamma2");
  require_finite_nonnegative(p.mu, "coefficients.mu");
  require_finite_nonnegative(p.c1, "coefficients.c1");
  require_finite_nonnegative(p.c2, "coefficients.c2");
  return p;
}

double KernelSpec::operator()(double s, double y) const {
  const double base = std::visit(
      Overloaded{
          [](const Constant& c) { return c.value; },
          [s, y](const Product& p) { return p.s_factor(s) * p.y_factor(y); },
          [](const Table&) -> double {
            throw ConfigError("table kernels can only be evaluated on their grid");
          },
          [s, y](const Indicator& ind) {
            bool inside = false;
            switch (ind.region) {
              case KernelRegion::s_gt_y: inside = s > y; break;
              case KernelRegion::s_ge_y: inside = s >= y; break;
              case KernelRegion::s_lt_y: inside = s < y; break;
              case KernelRegion::box: inside = in_closed(s, ind.s_range) && in_closed(y, ind.y_range); break;
            }
            return inside ? ind.value : 0.0;
          },
          [s, y](const Function& f) { return f.fn(s, y); },
      },
      form);
  return scale * base;
}

std::vector<double> Kernel::column_integrals(double h) const {
  std::vector<double> out(static_cast<std::size_t>(beta.cols()));
  for (Eigen::Index j = 0; j < beta.cols(); ++j)
    out[static_cast<std::size_t>(j)] = beta.col(j).sum() * h;
  return out;
}

Kernel build_kernel(const KernelSpec& spec, const SizeGrid& grid) {
  const int n = grid.size();
  Kernel k;
  k.beta.resize(n, n);
  if (const auto* table = std::get_if<KernelSpec::Table>(&spec.form)) {
    if (static_cast<int>(table->values.size()) != n)
      throw ConfigError("kernel table has " + std::to_string(table->values.size()) +
                        " rows, grid has " + std::to_string(n) + " cells");
    for (int i = 0; i < n; ++i) {
      const auto& row = table->values[static_cast<std::size_t>(i)];
      if (static_cast<int>(row.size()) != n)
        throw ConfigError("kernel table row " + std::to_string(i) + " has wrong length");
      for (int j = 0; j < n; ++j) k.beta(i, j) = spec.scale * row[static_cast<std::size_t>(j)];
    }
  } else {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) k.beta(i, j) = spec(grid.center(i), grid.center(j));
  }

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double v = k.beta(i, j);
      if (!std::isfinite(v)) throw ValidationError("kernel", i * n + j, "non-finite kernel sample");
      if (v < 0.0) throw ValidationError("kernel", i * n + j, "negative kernel sample");
    }

  const auto cols = k.column_integrals(grid.h());
  k.k_beta = cols.empty() ? 0.0 : *std::max_element(cols.begin(), cols.end());
  k.beta1.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) k.beta1[static_cast<std::size_t>(i)] = k.beta.row(i).minCoeff();

  if (spec.dominator) {
    std::vector<double> dom = sample(*spec.dominator, grid);
    for (int i = 0; i < n; ++i) {
      const double bound = dom[static_cast<std::size_t>(i)];
      if (!std::isfinite(bound) || bound < 0.0)
        throw ValidationError("kernel.dominator", i, "dominator must be finite and nonnegative");
      if (k.beta.row(i).maxCoeff() > bound)
        throw ValidationError("kernel.dominator", i, "kernel exceeds its dominator");
    }
    k.dominator = std::move(dom);
  }
  return k;
}

}  // namespace twophase
