#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "chaoslab/geometry.hpp"

namespace chaoslab::field {

enum class KernelFamily { lipschitz_closed_form, holder_power, sobolev_singular, tabulated, mollified };

enum class ClosedForm { zero, constant, sine, linear_capped, clamp_attract };

/// odd: min(|z|^a, 1) z/|z|.  even: min(|z|^a, 1), scalar, d = 1 only.
enum class PowerShape { odd, even };

/// Declared Hoelder data: |K(x,y) - K(x',y')| <= constant (|x-x'| + |y-y'|)^alpha.
struct HolderData {
  double alpha = 1.0;
  double constant = 0.0;
};

/// Nodes and values of a tabulated scalar kernel on R x R, bilinearly interpolated.
struct KernelTable {
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> values;  // values[i * ys.size() + j] = K(xs[i], ys[j])
};

/// Parse a kernel table from CSV with header `x,y,k1`; rows may come in any order
/// but must fill the full tensor grid.
KernelTable load_kernel_table(const std::string& path);
KernelTable parse_kernel_table(const std::string& csv_text);

/**
 * Interaction kernel K(x, y): R^d x R^d -> R^d with a declared sup bound and
 * Hoelder class. Immutable; copies share any tabulated or mollified payload.
 *
 * Besides pointwise evaluation, a kernel knows how to form the interaction sums
 * sum_j K(x_i, x_j) that every drift in the lab is built from, with exact fast
 * paths for the separable sine kernel and the one-dimensional capped power law.
 */
class Kernel {
 public:
  static Kernel zero(int dim = 1);
  static Kernel constant(Vec value, int dim = 1);
  /// K(x, y) = sin(x - y), componentwise in d = 2.
  static Kernel sine(int dim = 1);
  /// K(x, y) = (x - y) projected onto the ball of the given radius.
  static Kernel linear_capped(double radius, int dim = 1);
  /// K(x, y) = clamp(y - x, -1, 1); attractive and Lipschitz, d = 1.
  static Kernel clamp_attract();
  /// Capped power law of exponent alpha in (0, 1]; cap radius fixed at 1.
  static Kernel holder_power(double alpha, int dim = 1, PowerShape shape = PowerShape::odd);
  /// Power singularity |z|^exponent carrying Sobolev data W^{s,q} for the rate formulas.
  static Kernel sobolev_singular(double exponent, double s, double q, int dim = 1);
  static Kernel tabulated(KernelTable table);

  Vec operator()(const Vec& x, const Vec& y) const noexcept;

  int dim() const noexcept { return dim_; }
  KernelFamily family() const noexcept { return family_; }
  ClosedForm closed_form() const noexcept { return form_; }
  PowerShape shape() const noexcept { return shape_; }
  /// Power exponent for holder_power / sobolev_singular.
  double exponent() const noexcept { return exponent_; }
  double sobolev_s() const noexcept { return sobolev_s_; }
  double sobolev_q() const noexcept { return sobolev_q_; }
  double radius() const noexcept { return radius_; }
  Vec constant_value() const noexcept { return constant_; }
  double mollifier_scale() const noexcept { return mollifier_scale_; }
  const Kernel* base() const noexcept { return base_.get(); }

  /// M = sup |K|.
  double bound() const noexcept { return bound_; }
  HolderData holder() const noexcept { return holder_; }

  /// K(y, x) = -K(x, y) for all x, y.
  bool antisymmetric() const noexcept;
  /// K(x, y) depends on x - y only.
  bool translation_invariant() const noexcept;
  /// K(x, x) = 0 for all x.
  bool vanishes_on_diagonal() const noexcept;

  std::string describe() const;

  /// out_i = sum_j K(x_i, x_j) with x the snapshot itself (flat, stride dim).
  void sum_over_self(std::span<const double> positions, std::span<double> out) const;
  /// out_q = sum_j K(query_q, source_j).
  void sum_over_sources(std::span<const double> queries, std::span<const double> sources,
                        std::span<double> out) const;

 private:
  friend Kernel mollify_kernel(const Kernel& kernel, double scale);

  Kernel() = default;

  Vec eval_power(const Vec& x, const Vec& y) const noexcept;
  Vec eval_table(const Vec& x, const Vec& y) const noexcept;
  Vec eval_mollified(const Vec& x, const Vec& y) const noexcept;

  KernelFamily family_ = KernelFamily::lipschitz_closed_form;
  ClosedForm form_ = ClosedForm::zero;
  PowerShape shape_ = PowerShape::odd;
  int dim_ = 1;
  double exponent_ = 1.0;
  double sobolev_s_ = 0.0;
  double sobolev_q_ = 0.0;
  double radius_ = 1.0;
  Vec constant_{0.0, 0.0};
  double bound_ = 0.0;
  HolderData holder_{};
  double mollifier_scale_ = 0.0;
  std::shared_ptr<const KernelTable> table_;
  std::shared_ptr<const Kernel> base_;
  std::shared_ptr<const std::vector<double>> stencil_;  // offsets then weights, per axis
};

/// K(x, y) with dimension checks on raw coordinate spans.
Vec eval_kernel(const Kernel& kernel, std::span<const double> x, std::span<const double> y);

/// Gaussian smoothing of K in its first argument, scale > 0, 33-point stencil per axis.
/// Keeps the bound and the declared Hoelder constant of the input.
Kernel mollify_kernel(const Kernel& kernel, double scale);

}  // namespace chaoslab::field
