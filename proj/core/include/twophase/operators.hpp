#pragma once

// Discrete generator of the two-phase transport system and its resolvents.
//
// Unknowns are ordered phase-major: entries [0, n) hold u1, [n, 2n) hold u2.
// The transport block is first-order conservative upwind with zero inflow at
// s = 0 and free outflow at the right edge.

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "twophase/grid.hpp"

namespace twophase {

/// Which block sum of the generator an operation refers to.
enum class Part {
  transport,       // A
  transport_loss,  // A + B1
  no_recruitment,  // A + B1 + B2 (the operator B without the kernel)
  full,            // A + B1 + B2 + B3
};

const char* to_string(Part part);

/// Cell-averaged pair (u1, u2) on a uniform grid.
class StateVector {
 public:
  StateVector() = default;
  StateVector(int cells, double h);
  StateVector(Eigen::VectorXd data, double h);

  static StateVector from_phases(std::span<const double> u1, std::span<const double> u2, double h);
  /// Samples both phases at the cell centers.
  static StateVector sample(const SizeGrid& grid, const Coefficient& u1, const Coefficient& u2);

  int cells() const noexcept { return static_cast<int>(data_.size() / 2); }
  double h() const noexcept { return h_; }

  Eigen::VectorXd& data() noexcept { return data_; }
  const Eigen::VectorXd& data() const noexcept { return data_; }

  auto u1() { return data_.head(cells()); }
  auto u1() const { return data_.head(cells()); }
  auto u2() { return data_.tail(cells()); }
  auto u2() const { return data_.tail(cells()); }

  /// sum (u1 + u2) h
  double mass() const { return data_.sum() * h_; }
  double mass_u1() const { return u1().sum() * h_; }
  double mass_u2() const { return u2().sum() * h_; }
  /// ||u1||_1 + ||u2||_1
  double norm() const { return data_.cwiseAbs().sum() * h_; }
  double min() const { return data_.minCoeff(); }
  bool all_finite() const { return data_.allFinite(); }

  /// Copy rescaled to unit mass. Throws NumericalError when the mass is not positive.
  StateVector normalized() const;
  double l1_distance(const StateVector& other) const;

 private:
  Eigen::VectorXd data_;
  double h_ = 0.0;
};

class Resolvent;

class DiscreteGenerator {
 public:
  using Sparse = Eigen::SparseMatrix<double>;

  /// Throws ConfigError when params or kernel were sampled on another grid size.
  static DiscreteGenerator assemble(const SizeGrid& grid, const ModelParams& params,
                                    const Kernel& kernel);

  const SizeGrid& grid() const noexcept { return grid_; }
  const ModelParams& params() const noexcept { return params_; }
  const Kernel& kernel() const noexcept { return kernel_; }
  int cells() const noexcept { return grid_.size(); }
  int dim() const noexcept { return 2 * grid_.size(); }

  const Sparse& A_block() const noexcept { return a_; }
  const Sparse& B1_block() const noexcept { return b1_; }
  const Sparse& B2_block() const noexcept { return b2_; }
  /// n x n recruitment quadrature, B3(i, j) = beta(s_i, y_j) h. Acts on u1, feeds u1.
  const Eigen::MatrixXd& B3_block() const noexcept { return b3_; }

  /// Dense 2n x 2n matrix of the selected block sum.
  Eigen::MatrixXd dense(Part part) const;
  /// M_part * U without forming the matrix.
  StateVector apply(Part part, const StateVector& u) const;

  /// Row-sum norm of the full generator.
  double inf_norm() const;
  /// Row-sum norm of B1 + B2.
  double coupling_inf_norm() const;
  /// True when beta(i, j) == 0 for every i < j, i.e. the full matrix is
  /// block lower-triangular in cell order.
  bool recruitment_lower_triangular() const noexcept { return lower_triangular_; }
  bool has_recruitment() const noexcept { return has_recruitment_; }

  /// Factorized (lambda I - M_part)^{-1}. Factorizations are cached per (lambda, part)
  /// and are immutable, so concurrent solves on one factorization are fine.
  std::shared_ptr<const Resolvent> resolvent(double lambda, Part part) const;

  /// Writes "row col value" triplets of the selected block sum.
  void export_coo(std::ostream& os, Part part) const;

 private:
  struct Cache;

  DiscreteGenerator(SizeGrid grid, ModelParams params, Kernel kernel);

  SizeGrid grid_;
  ModelParams params_;
  Kernel kernel_;
  Sparse a_, b1_, b2_;
  Eigen::MatrixXd b3_;
  bool lower_triangular_ = true;
  bool has_recruitment_ = false;
  std::shared_ptr<Cache> cache_;
};

/// Solver for (lambda I - M_part) U = H.
class Resolvent {
 public:
  virtual ~Resolvent() = default;

  double lambda() const noexcept { return lambda_; }
  Part part() const noexcept { return part_; }
  virtual StateVector solve(const StateVector& rhs) const = 0;

 protected:
  Resolvent(double lambda, Part part) : lambda_(lambda), part_(part) {}

 private:
  double lambda_;
  Part part_;
};

/// Builds an uncached factorization. Throws SpectralProximityError when singular.
std::shared_ptr<const Resolvent> factorize(const DiscreteGenerator& gen, double lambda, Part part);

/// Solves (lambda I - M_which) U = H with the cached factorization.
StateVector resolvent_direct(const DiscreteGenerator& gen, double lambda, const StateVector& rhs,
                             Part which);

/// Midpoint-quadrature evaluation at the cell centers of
///   u(s) = 1/gamma(s) int_0^s h(y) exp(-int_y^s (lambda + decay(z)) / gamma(z) dz) dy.
/// An empty `decay` means zero.
std::vector<double> transport_duhamel(double lambda, std::span<const double> source,
                                      std::span<const double> gamma, std::span<const double> decay,
                                      const SizeGrid& grid);

/// Closed-form transport resolvent (lambda - A_i)^{-1} h for one phase.
std::vector<double> resolvent_transport_analytic(double lambda, std::span<const double> source,
                                                 std::span<const double> gamma,
                                                 const SizeGrid& grid);

enum class NeumannSplit {
  recruitment,  // (lambda - B - B3)^{-1} = R_B sum (B3 R_B)^k
  coupling,     // (lambda - A - B1 - B2)^{-1} = R_{A+B1} sum (B2 R_{A+B1})^k
};

enum class NeumannStatus { converged, diverged, exhausted };

struct NeumannResult {
  StateVector sum;
  int terms = 0;
  NeumannStatus status = NeumannStatus::exhausted;
  /// ||term_k|| / ||term_{k-1}|| for the last computed term.
  double last_ratio = 0.0;
};

/// Partial sums of the perturbation series. Divergence is declared when the
/// term-norm ratio exceeds 0.999 for 10 consecutive terms.
NeumannResult resolvent_neumann(const DiscreteGenerator& gen, double lambda, const StateVector& rhs,
                                NeumannSplit split, int max_terms, double tol);

/// Cumulative-integral operator (V h)(s_i) = k sum_{j <= i} h_j dy.
struct VolterraOp {
  double k;
  SizeGrid grid;

  Eigen::MatrixXd matrix() const;
};

/// ||V^p||_1^{1/p} for p = 1..N.
std::vector<double> volterra_norm_sequence(const VolterraOp& op, int count);

}  // namespace twophase
