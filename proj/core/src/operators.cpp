#include "twophase/operators.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <mutex>
#include <ostream>

#include <Eigen/LU>
#include <Eigen/SparseCore>

#include "twophase/error.hpp"

namespace twophase {

namespace {

using Triplet = Eigen::Triplet<double>;

constexpr std::size_t kCacheCapacity = 8;

int part_rank(Part p) { return static_cast<int>(p); }

// 2x2 diagonal block of (lambda I - M_part) at one cell, inverted.
struct CellBlock {
  double a, b, c, d;  // [[a, b], [c, d]]
  double det;
};

/// Exact forward substitution for the block lower-bidiagonal parts A, A+B1, A+B1+B2.
class BidiagonalResolvent final : public Resolvent {
 public:
  BidiagonalResolvent(const DiscreteGenerator& gen, double lambda, Part part)
      : Resolvent(lambda, part), n_(gen.cells()), inv_h_(1.0 / gen.grid().h()) {
    const auto& p = gen.params();
    const bool loss = part_rank(part) >= part_rank(Part::transport_loss);
    const bool coupling = part_rank(part) >= part_rank(Part::no_recruitment);
    blocks_.resize(static_cast<std::size_t>(n_));
    g1_ = p.gamma1;
    g2_ = p.gamma2;
    for (int i = 0; i < n_; ++i) {
      const auto k = static_cast<std::size_t>(i);
      CellBlock blk{};
      blk.a = lambda + p.gamma1[k] * inv_h_ + (loss ? p.mu[k] + p.c1[k] : 0.0);
      blk.d = lambda + p.gamma2[k] * inv_h_ + (loss ? p.c2[k] : 0.0);
      blk.b = coupling ? -p.c2[k] : 0.0;
      blk.c = coupling ? -p.c1[k] : 0.0;
      blk.det = blk.a * blk.d - blk.b * blk.c;
      const double scale = std::max(std::abs(blk.a * blk.d), std::abs(blk.b * blk.c));
      if (!std::isfinite(blk.det) || std::abs(blk.det) <= 1e-13 * scale || scale == 0.0)
        throw SpectralProximityError(lambda);
      blocks_[k] = blk;
    }
  }

  StateVector solve(const StateVector& rhs) const override {
    StateVector out(n_, rhs.h());
    solve_into(rhs.data(), out.data());
    return out;
  }

  template <class In, class Out>
  void solve_into(const In& rhs, Out& x) const {
    double prev1 = 0.0, prev2 = 0.0;
    for (int i = 0; i < n_; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const CellBlock& blk = blocks_[k];
      double r1 = rhs[i];
      double r2 = rhs[n_ + i];
      if (i > 0) {
        r1 += g1_[k - 1] * inv_h_ * prev1;
        r2 += g2_[k - 1] * inv_h_ * prev2;
      }
      const double x1 = (blk.d * r1 - blk.b * r2) / blk.det;
      const double x2 = (blk.a * r2 - blk.c * r1) / blk.det;
      x[i] = x1;
      x[n_ + i] = x2;
      prev1 = x1;
      prev2 = x2;
    }
  }

 private:
  int n_;
  double inv_h_;
  std::vector<CellBlock> blocks_;
  std::vector<double> g1_, g2_;
};

/// Full resolvent via the Schur complement on the recruited phase:
///   x = y + Z x1,   (I - Z_top) x1 = y_top,   y = R_B b,   Z = R_B [B3; 0].
class SchurResolvent final : public Resolvent {
 public:
  SchurResolvent(const DiscreteGenerator& gen, double lambda)
      : Resolvent(lambda, Part::full), base_(gen, lambda, Part::no_recruitment), n_(gen.cells()) {
    const Eigen::MatrixXd& b3 = gen.B3_block();
    z_.setZero(2 * n_, n_);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(2 * n_);
    Eigen::VectorXd col(2 * n_);
    for (int j = 0; j < n_; ++j) {
      if (b3.col(j).isZero(0.0)) continue;
      rhs.head(n_) = b3.col(j);
      base_.solve_into(rhs, col);
      z_.col(j) = col;
    }
    Eigen::MatrixXd schur = -z_.topRows(n_);
    schur.diagonal().array() += 1.0;
    lu_.compute(schur);
    const double rc = lu_.rcond();
    if (!std::isfinite(rc) || rc < 1e-13) throw SpectralProximityError(lambda);
  }

  StateVector solve(const StateVector& rhs) const override {
    Eigen::VectorXd y(2 * n_);
    base_.solve_into(rhs.data(), y);
    const Eigen::VectorXd x1 = lu_.solve(y.head(n_));
    y.noalias() += z_ * x1;
    return StateVector(std::move(y), rhs.h());
  }

 private:
  BidiagonalResolvent base_;
  int n_;
  Eigen::MatrixXd z_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

}  // namespace

const char* to_string(Part part) {
  switch (part) {
    case Part::transport: return "A";
    case Part::transport_loss: return "A+B1";
    case Part::no_recruitment: return "B";
    case Part::full: return "full";
  }
  return "?";
}

// ---------------------------------------------------------------- StateVector

StateVector::StateVector(int cells, double h) : data_(Eigen::VectorXd::Zero(2 * cells)), h_(h) {}

StateVector::StateVector(Eigen::VectorXd data, double h) : data_(std::move(data)), h_(h) {
  if (data_.size() % 2 != 0) throw ConfigError("state vector must hold two phases of equal length");
}

StateVector StateVector::from_phases(std::span<const double> u1, std::span<const double> u2,
                                     double h) {
  if (u1.size() != u2.size()) throw ConfigError("phase lengths differ");
  const auto n = static_cast<int>(u1.size());
  StateVector s(n, h);
  for (int i = 0; i < n; ++i) {
    s.data_[i] = u1[static_cast<std::size_t>(i)];
    s.data_[n + i] = u2[static_cast<std::size_t>(i)];
  }
  return s;
}

StateVector StateVector::sample(const SizeGrid& grid, const Coefficient& u1, const Coefficient& u2) {
  const int n = grid.size();
  StateVector s(n, grid.h());
  for (int i = 0; i < n; ++i) {
    s.data_[i] = u1(grid.center(i));
    s.data_[n + i] = u2(grid.center(i));
  }
  return s;
}

StateVector StateVector::normalized() const {
  const double m = mass();
  if (!(m > 0.0) || !std::isfinite(m)) throw NumericalError("cannot normalize a state with non-positive mass");
  return StateVector(data_ / m, h_);
}

double StateVector::l1_distance(const StateVector& other) const {
  return (data_ - other.data_).cwiseAbs().sum() * h_;
}

// ----------------------------------------------------------- DiscreteGenerator

struct DiscreteGenerator::Cache {
  std::mutex mutex;
  std::map<std::pair<double, int>, std::shared_ptr<const Resolvent>> entries;
  std::deque<std::pair<double, int>> order;
};

DiscreteGenerator::DiscreteGenerator(SizeGrid grid, ModelParams params, Kernel kernel)
    : grid_(std::move(grid)),
      params_(std::move(params)),
      kernel_(std::move(kernel)),
      cache_(std::make_shared<Cache>()) {}

DiscreteGenerator DiscreteGenerator::assemble(const SizeGrid& grid, const ModelParams& params,
                                              const Kernel& kernel) {
  const int n = grid.size();
  if (params.size() != n || static_cast<int>(params.gamma1.size()) != n ||
      static_cast<int>(params.gamma2.size()) != n || static_cast<int>(params.c1.size()) != n ||
      static_cast<int>(params.c2.size()) != n)
    throw ConfigError("model parameters were sampled on a different grid");
  if (kernel.size() != n || kernel.beta.cols() != n)
    throw ConfigError("kernel was sampled on a different grid");

  DiscreteGenerator gen(grid, params, kernel);
  const double inv_h = 1.0 / grid.h();
  const int dim = 2 * n;

  std::vector<Triplet> ta, tb1, tb2;
  ta.reserve(static_cast<std::size_t>(2 * dim));
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    ta.emplace_back(i, i, -params.gamma1[k] * inv_h);
    ta.emplace_back(n + i, n + i, -params.gamma2[k] * inv_h);
    if (i > 0) {
      ta.emplace_back(i, i - 1, params.gamma1[k - 1] * inv_h);
      ta.emplace_back(n + i, n + i - 1, params.gamma2[k - 1] * inv_h);
    }
    tb1.emplace_back(i, i, -(params.mu[k] + params.c1[k]));
    tb1.emplace_back(n + i, n + i, -params.c2[k]);
    if (params.c2[k] != 0.0) tb2.emplace_back(i, n + i, params.c2[k]);
    if (params.c1[k] != 0.0) tb2.emplace_back(n + i, i, params.c1[k]);
  }
  gen.a_.resize(dim, dim);
  gen.a_.setFromTriplets(ta.begin(), ta.end());
  gen.b1_.resize(dim, dim);
  gen.b1_.setFromTriplets(tb1.begin(), tb1.end());
  gen.b2_.resize(dim, dim);
  gen.b2_.setFromTriplets(tb2.begin(), tb2.end());

  gen.b3_ = kernel.beta * grid.h();
  gen.has_recruitment_ = !gen.b3_.isZero(0.0);
  gen.lower_triangular_ = true;
  for (int j = 1; j < n && gen.lower_triangular_; ++j)
    for (int i = 0; i < j; ++i)
      if (gen.b3_(i, j) != 0.0) {
        gen.lower_triangular_ = false;
        break;
      }
  return gen;
}

Eigen::MatrixXd DiscreteGenerator::dense(Part part) const {
  Eigen::MatrixXd m = Eigen::MatrixXd(a_);
  if (part_rank(part) >= part_rank(Part::transport_loss)) m += Eigen::MatrixXd(b1_);
  if (part_rank(part) >= part_rank(Part::no_recruitment)) m += Eigen::MatrixXd(b2_);
  if (part == Part::full) m.topLeftCorner(cells(), cells()) += b3_;
  return m;
}

StateVector DiscreteGenerator::apply(Part part, const StateVector& u) const {
  if (u.cells() != cells()) throw ConfigError("state vector does not match the generator grid");
  StateVector out(cells(), u.h());
  out.data() = a_ * u.data();
  if (part_rank(part) >= part_rank(Part::transport_loss)) out.data() += b1_ * u.data();
  if (part_rank(part) >= part_rank(Part::no_recruitment)) out.data() += b2_ * u.data();
  if (part == Part::full && has_recruitment_) out.u1().noalias() += b3_ * u.u1();
  return out;
}

double DiscreteGenerator::inf_norm() const {
  const int n = cells();
  const double inv_h = 1.0 / grid_.h();
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    double r1 = std::abs(-params_.gamma1[k] * inv_h - params_.mu[k] - params_.c1[k] + b3_(i, i));
    r1 += params_.c2[k] + (b3_.row(i).cwiseAbs().sum() - std::abs(b3_(i, i)));
    if (i > 0) r1 += params_.gamma1[k - 1] * inv_h;
    double r2 = std::abs(-params_.gamma2[k] * inv_h - params_.c2[k]) + params_.c1[k];
    if (i > 0) r2 += params_.gamma2[k - 1] * inv_h;
    best = std::max({best, r1, r2});
  }
  return best;
}

double DiscreteGenerator::coupling_inf_norm() const {
  double best = 0.0;
  for (std::size_t k = 0; k < params_.mu.size(); ++k)
    best = std::max({best, params_.mu[k] + params_.c1[k] + params_.c2[k], params_.c2[k] + params_.c1[k]});
  return best;
}

std::shared_ptr<const Resolvent> DiscreteGenerator::resolvent(double lambda, Part part) const {
  const auto key = std::make_pair(lambda, part_rank(part));
  {
    std::lock_guard lock(cache_->mutex);
    if (auto it = cache_->entries.find(key); it != cache_->entries.end()) return it->second;
  }
  auto fresh = factorize(*this, lambda, part);
  std::lock_guard lock(cache_->mutex);
  auto [it, inserted] = cache_->entries.emplace(key, fresh);
  if (inserted) {
    cache_->order.push_back(key);
    while (cache_->order.size() > kCacheCapacity) {
      cache_->entries.erase(cache_->order.front());
      cache_->order.pop_front();
    }
  }
  return it->second;
}

void DiscreteGenerator::export_coo(std::ostream& os, Part part) const {
  const Eigen::MatrixXd m = dense(part);
  os << "# row col value (" << to_string(part) << ", dim " << m.rows() << ")\n";
  os.precision(17);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != 0.0) os << i << ' ' << j << ' ' << m(i, j) << '\n';
}

// ------------------------------------------------------------------ resolvents

std::shared_ptr<const Resolvent> factorize(const DiscreteGenerator& gen, double lambda, Part part) {
  if (!std::isfinite(lambda)) throw SpectralProximityError(lambda);
  if (part == Part::full && gen.has_recruitment())
    return std::make_shared<SchurResolvent>(gen, lambda);
  if (part == Part::full)
    return std::make_shared<BidiagonalResolvent>(gen, lambda, Part::no_recruitment);
  return std::make_shared<BidiagonalResolvent>(gen, lambda, part);
}

StateVector resolvent_direct(const DiscreteGenerator& gen, double lambda, const StateVector& rhs,
                             Part which) {
  if (rhs.cells() != gen.cells()) throw ConfigError("right-hand side does not match the grid");
  StateVector u = gen.resolvent(lambda, which)->solve(rhs);
  if (!u.all_finite()) throw SpectralProximityError(lambda);
  return u;
}

std::vector<double> transport_duhamel(double lambda, std::span<const double> source,
                                      std::span<const double> gamma, std::span<const double> decay,
                                      const SizeGrid& grid) {
  const auto n = static_cast<std::size_t>(grid.size());
  if (source.size() != n || gamma.size() != n || (!decay.empty() && decay.size() != n))
    throw ConfigError("transport resolvent inputs do not match the grid");
  const double h = grid.h();
  auto rate = [&](std::size_t i) { return (lambda + (decay.empty() ? 0.0 : decay[i])) / gamma[i]; };

  std::vector<double> u(n);
  // acc = sum_{j < i} h g_j exp(-(Phi(c_i) - Phi(c_j)))
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) acc = std::exp(-0.5 * h * (rate(i - 1) + rate(i))) * (acc + h * source[i - 1]);
    const double half = 0.5 * h * source[i] * std::exp(-0.25 * h * rate(i));
    u[i] = (acc + half) / gamma[i];
  }
  return u;
}

std::vector<double> resolvent_transport_analytic(double lambda, std::span<const double> source,
                                                 std::span<const double> gamma,
                                                 const SizeGrid& grid) {
  return transport_duhamel(lambda, source, gamma, {}, grid);
}

NeumannResult resolvent_neumann(const DiscreteGenerator& gen, double lambda, const StateVector& rhs,
                                NeumannSplit split, int max_terms, double tol) {
  if (max_terms < 1) throw ConfigError("max_terms must be at least 1");
  const Part base = split == NeumannSplit::recruitment ? Part::no_recruitment : Part::transport_loss;
  const auto solver = gen.resolvent(lambda, base);
  const int n = gen.cells();

  auto perturb = [&](const StateVector& v) {
    StateVector out(n, v.h());
    if (split == NeumannSplit::recruitment) {
      out.u1().noalias() = gen.B3_block() * v.u1();
    } else {
      out.data() = gen.B2_block() * v.data();
    }
    return out;
  };

  NeumannResult result;
  StateVector term = solver->solve(rhs);
  result.sum = term;
  result.terms = 1;
  double prev_norm = term.norm();
  int rising = 0;
  while (true) {
    if (prev_norm == 0.0 || prev_norm <= tol * result.sum.norm()) {
      result.status = NeumannStatus::converged;
      return result;
    }
    if (result.terms >= max_terms) {
      result.status = result.last_ratio > 0.999 ? NeumannStatus::diverged : NeumannStatus::exhausted;
      return result;
    }
    term = solver->solve(perturb(term));
    const double norm = term.norm();
    result.last_ratio = norm / prev_norm;
    if (norm != 0.0) {
      result.sum.data() += term.data();
      ++result.terms;
    }
    rising = result.last_ratio > 0.999 ? rising + 1 : 0;
    if (rising >= 10 || !std::isfinite(norm)) {
      result.status = NeumannStatus::diverged;
      return result;
    }
    prev_norm = norm;
  }
}

Eigen::MatrixXd VolterraOp::matrix() const {
  const int n = grid.size();
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
  v.triangularView<Eigen::Lower>().setConstant(k * grid.h());
  return v;
}

std::vector<double> volterra_norm_sequence(const VolterraOp& op, int count) {
  if (count < 1) throw ConfigError("need at least one power");
  const Eigen::MatrixXd v = op.matrix();
  Eigen::MatrixXd power = v;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int p = 1; p <= count; ++p) {
    // L1 operator norm on a uniform grid is the max column sum.
    const double norm = power.cwiseAbs().colwise().sum().maxCoeff();
    out.push_back(std::pow(norm, 1.0 / p));
    if (p < count) power = (v * power).eval();
  }
  return out;
}

}  // namespace twophase
