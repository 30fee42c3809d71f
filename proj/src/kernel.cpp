#include "chaoslab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>

#include "chaoslab/errors.hpp"

namespace chaoslab::field {

namespace {

constexpr int kStencilPoints = 33;
constexpr double kStencilHalfWidth = 4.0;  // in units of the mollifier scale

inline double capped_power(double r, double alpha) noexcept {
  if (r >= 1.0) return 1.0;
  if (alpha == 0.5) return std::sqrt(r);
  if (alpha == 1.0) return r;
  return std::pow(r, alpha);
}

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw InvalidArgument("kernel dimension must be 1 or 2, got " + std::to_string(dim));
  }
}

std::vector<std::size_t> sorted_order(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && a < b);
  });
  return order;
}

/// sum_j sign(x_i - x_j) min(|x_i - x_j|^alpha, 1) for a 1-d snapshot, pairs visited once.
void power_self_sums_1d(std::span<const double> x, double alpha, std::span<double> out) {
  const std::size_t n = x.size();
  const auto order = sorted_order(x);
  std::vector<double> xs(n);
  for (std::size_t a = 0; a < n; ++a) xs[a] = x[order[a]];
  std::vector<double> acc(n, 0.0);

  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t a = 0; a < n; ++a) {
    const double xa = xs[a];
    while (xa - xs[lo] >= 1.0) ++lo;
    if (hi < a + 1) hi = a + 1;
    while (hi < n && xs[hi] - xa < 1.0) ++hi;

    double s = 0.0;
    double* accp = acc.data();
    const double* xsp = xs.data();
    if (alpha == 0.5) {
#pragma omp simd reduction(+ : s)
      for (std::size_t b = a + 1; b < hi; ++b) {
        const double v = std::sqrt(xsp[b] - xa);
        s += v;
        accp[b] += v;
      }
    } else {
      for (std::size_t b = a + 1; b < hi; ++b) {
        const double v = capped_power(xsp[b] - xa, alpha);
        s += v;
        accp[b] += v;
      }
    }
    // far particles on the left push by +1, on the right by -1
    acc[a] += static_cast<double>(lo) - static_cast<double>(n - hi) - s;
  }
  for (std::size_t a = 0; a < n; ++a) out[order[a]] = acc[a];
}

void power_source_sums_1d(std::span<const double> queries, std::span<const double> sources,
                          double alpha, std::span<double> out) {
  std::vector<double> xs(sources.begin(), sources.end());
  std::sort(xs.begin(), xs.end());
  const auto n = static_cast<double>(xs.size());
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const double xq = queries[q];
    const auto first_near = std::upper_bound(xs.begin(), xs.end(), xq - 1.0);
    const auto first_far_right = std::lower_bound(first_near, xs.end(), xq + 1.0);
    const auto left = static_cast<double>(first_near - xs.begin());
    const auto right = n - static_cast<double>(first_far_right - xs.begin());
    double s = 0.0;
    for (auto it = first_near; it != first_far_right; ++it) {
      const double z = xq - *it;
      if (z > 0.0) {
        s += capped_power(z, alpha);
      } else if (z < 0.0) {
        s -= capped_power(-z, alpha);
      }
    }
    out[q] = left - right + s;
  }
}

}  // namespace

KernelTable parse_kernel_table(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("kernel table: empty CSV");
  {
    std::string h = line;
    h.erase(std::remove_if(h.begin(), h.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
            h.end());
    if (h.rfind("x,y,k1", 0) != 0) throw InvalidArgument("kernel table: header must start with x,y,k1");
    if (h != "x,y,k1") throw InvalidArgument("kernel table: only scalar (d = 1) tables are supported");
  }
  std::map<std::pair<double, double>, double> cells;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string a, b, c;
    if (!std::getline(fields, a, ',') || !std::getline(fields, b, ',') || !std::getline(fields, c)) {
      throw InvalidArgument("kernel table: malformed row " + std::to_string(row));
    }
    try {
      cells[{std::stod(a), std::stod(b)}] = std::stod(c);
    } catch (const std::exception&) {
      throw InvalidArgument("kernel table: non-numeric entry on row " + std::to_string(row));
    }
  }
  KernelTable table;
  for (const auto& [key, value] : cells) {
    if (table.xs.empty() || table.xs.back() != key.first) table.xs.push_back(key.first);
  }
  std::vector<double> ys;
  for (const auto& [key, value] : cells) ys.push_back(key.second);
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  table.ys = ys;
  if (table.xs.size() < 2 || table.ys.size() < 2) {
    throw InvalidArgument("kernel table: need at least 2 nodes per axis");
  }
  if (cells.size() != table.xs.size() * table.ys.size()) {
    throw InvalidArgument("kernel table: rows do not fill the tensor grid");
  }
  table.values.reserve(cells.size());
  for (const auto& [key, value] : cells) table.values.push_back(value);
  return table;
}

KernelTable load_kernel_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("kernel table: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_kernel_table(text.str());
}

Kernel Kernel::zero(int dim) {
  check_dim(dim);
  Kernel k;
  k.dim_ = dim;
  k.form_ = ClosedForm::zero;
  k.holder_ = {1.0, 0.0};
  return k;
}

Kernel Kernel::constant(Vec value, int dim) {
  check_dim(dim);
  Kernel k;
  k.dim_ = dim;
  k.form_ = ClosedForm::constant;
  if (dim == 1) value[1] = 0.0;
  k.constant_ = value;
  k.bound_ = norm(value, dim);
  k.holder_ = {1.0, 0.0};
  return k;
}

Kernel Kernel::sine(int dim) {
  check_dim(dim);
  Kernel k;
  k.dim_ = dim;
  k.form_ = ClosedForm::sine;
  k.bound_ = std::sqrt(static_cast<double>(dim));
  k.holder_ = {1.0, 1.0};
  return k;
}

Kernel Kernel::linear_capped(double radius, int dim) {
  check_dim(dim);
  if (!(radius > 0.0)) throw InvalidArgument("linear_capped: radius must be positive");
  Kernel k;
  k.dim_ = dim;
  k.form_ = ClosedForm::linear_capped;
  k.radius_ = radius;
  k.bound_ = radius;
  k.holder_ = {1.0, 1.0};
  return k;
}

Kernel Kernel::clamp_attract() {
  Kernel k;
  k.dim_ = 1;
  k.form_ = ClosedForm::clamp_attract;
  k.bound_ = 1.0;
  k.holder_ = {1.0, 1.0};
  return k;
}

Kernel Kernel::holder_power(double alpha, int dim, PowerShape shape) {
  check_dim(dim);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0,1]");
  if (shape == PowerShape::even && dim != 1) {
    throw InvalidArgument("even power kernel is scalar and needs d = 1");
  }
  Kernel k;
  k.family_ = KernelFamily::holder_power;
  k.dim_ = dim;
  k.shape_ = shape;
  k.exponent_ = alpha;
  k.bound_ = 1.0;
  // antipodal points realise the odd constant 2^(1-alpha)
  k.holder_ = {alpha, shape == PowerShape::odd ? std::pow(2.0, 1.0 - alpha) : 1.0};
  return k;
}

Kernel Kernel::sobolev_singular(double exponent, double s, double q, int dim) {
  Kernel k = holder_power(exponent, dim, PowerShape::odd);
  if (!(s > 0.0)) throw InvalidArgument("sobolev_singular: s must be positive");
  if (!(q > 2.0)) throw InvalidArgument("sobolev_singular: q must exceed 2");
  k.family_ = KernelFamily::sobolev_singular;
  k.sobolev_s_ = s;
  k.sobolev_q_ = q;
  return k;
}

Kernel Kernel::tabulated(KernelTable table) {
  const std::size_t nx = table.xs.size();
  const std::size_t ny = table.ys.size();
  if (nx < 2 || ny < 2 || table.values.size() != nx * ny) {
    throw InvalidArgument("tabulated kernel: table shape mismatch");
  }
  for (std::size_t i = 1; i < nx; ++i) {
    if (!(table.xs[i] > table.xs[i - 1])) throw InvalidArgument("tabulated kernel: x nodes must increase");
  }
  for (std::size_t j = 1; j < ny; ++j) {
    if (!(table.ys[j] > table.ys[j - 1])) throw InvalidArgument("tabulated kernel: y nodes must increase");
  }
  Kernel k;
  k.family_ = KernelFamily::tabulated;
  k.dim_ = 1;
  double bound = 0.0;
  double lip = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      const double v = table.values[i * ny + j];
      if (!std::isfinite(v)) throw InvalidArgument("tabulated kernel: non-finite value");
      bound = std::max(bound, std::abs(v));
      if (i + 1 < nx) {
        lip = std::max(lip, std::abs(table.values[(i + 1) * ny + j] - v) / (table.xs[i + 1] - table.xs[i]));
      }
      if (j + 1 < ny) {
        lip = std::max(lip, std::abs(table.values[i * ny + j + 1] - v) / (table.ys[j + 1] - table.ys[j]));
      }
    }
  }
  k.bound_ = bound;
  k.holder_ = {1.0, lip};
  k.table_ = std::make_shared<const KernelTable>(std::move(table));
  return k;
}

Vec Kernel::operator()(const Vec& x, const Vec& y) const noexcept {
  switch (family_) {
    case KernelFamily::holder_power:
    case KernelFamily::sobolev_singular:
      return eval_power(x, y);
    case KernelFamily::tabulated:
      return eval_table(x, y);
    case KernelFamily::mollified:
      return eval_mollified(x, y);
    case KernelFamily::lipschitz_closed_form:
      break;
  }
  Vec out{0.0, 0.0};
  switch (form_) {
    case ClosedForm::zero:
      break;
    case ClosedForm::constant:
      out = constant_;
      break;
    case ClosedForm::sine:
      for (int k = 0; k < dim_; ++k) out[k] = std::sin(x[k] - y[k]);
      break;
    case ClosedForm::linear_capped: {
      Vec z{0.0, 0.0};
      for (int k = 0; k < dim_; ++k) z[k] = x[k] - y[k];
      const double r = norm(z, dim_);
      const double scale = r > radius_ ? radius_ / r : 1.0;
      for (int k = 0; k < dim_; ++k) out[k] = z[k] * scale;
      break;
    }
    case ClosedForm::clamp_attract:
      out[0] = std::clamp(y[0] - x[0], -1.0, 1.0);
      break;
  }
  return out;
}

Vec Kernel::eval_power(const Vec& x, const Vec& y) const noexcept {
  Vec out{0.0, 0.0};
  if (dim_ == 1) {
    const double z = x[0] - y[0];
    const double r = std::abs(z);
    if (shape_ == PowerShape::even) {
      out[0] = capped_power(r, exponent_);
    } else if (z != 0.0) {
      out[0] = std::copysign(capped_power(r, exponent_), z);
    }
    return out;
  }
  Vec z{x[0] - y[0], x[1] - y[1]};
  const double r = norm(z, dim_);
  if (r == 0.0) return out;
  const double scale = capped_power(r, exponent_) / r;
  out[0] = z[0] * scale;
  out[1] = z[1] * scale;
  return out;
}

Vec Kernel::eval_table(const Vec& x, const Vec& y) const noexcept {
  const auto& t = *table_;
  auto locate = [](const std::vector<double>& nodes, double v, std::size_t& cell, double& frac) {
    if (v <= nodes.front()) {
      cell = 0;
      frac = 0.0;
      return;
    }
    if (v >= nodes.back()) {
      cell = nodes.size() - 2;
      frac = 1.0;
      return;
    }
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), v);
    cell = static_cast<std::size_t>(it - nodes.begin()) - 1;
    frac = (v - nodes[cell]) / (nodes[cell + 1] - nodes[cell]);
  };
  std::size_t i = 0, j = 0;
  double fx = 0.0, fy = 0.0;
  locate(t.xs, x[0], i, fx);
  locate(t.ys, y[0], j, fy);
  const std::size_t ny = t.ys.size();
  const double v00 = t.values[i * ny + j];
  const double v01 = t.values[i * ny + j + 1];
  const double v10 = t.values[(i + 1) * ny + j];
  const double v11 = t.values[(i + 1) * ny + j + 1];
  // exact node hits return the stored value untouched
  double v;
  if (fx == 0.0 && fy == 0.0) {
    v = v00;
  } else {
    v = (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) + fx * ((1.0 - fy) * v10 + fy * v11);
  }
  return {v, 0.0};
}

Vec Kernel::eval_mollified(const Vec& x, const Vec& y) const noexcept {
  const auto& st = *stencil_;
  const double* offsets = st.data();
  const double* weights = st.data() + kStencilPoints;
  Vec out{0.0, 0.0};
  if (dim_ == 1) {
    for (int a = 0; a < kStencilPoints; ++a) {
      const Vec v = (*base_)({x[0] - offsets[a], 0.0}, y);
      out[0] += weights[a] * v[0];
    }
    return out;
  }
  for (int a = 0; a < kStencilPoints; ++a) {
    for (int b = 0; b < kStencilPoints; ++b) {
      const double w = weights[a] * weights[b];
      const Vec v = (*base_)({x[0] - offsets[a], x[1] - offsets[b]}, y);
      out[0] += w * v[0];
      out[1] += w * v[1];
    }
  }
  return out;
}

bool Kernel::translation_invariant() const noexcept {
  switch (family_) {
    case KernelFamily::tabulated:
      return false;
    case KernelFamily::mollified:
      return base_->translation_invariant();
    default:
      return true;
  }
}

bool Kernel::antisymmetric() const noexcept {
  switch (family_) {
    case KernelFamily::holder_power:
    case KernelFamily::sobolev_singular:
      return shape_ == PowerShape::odd;
    case KernelFamily::tabulated:
      return false;
    case KernelFamily::mollified:
      return base_->antisymmetric() && base_->translation_invariant();
    case KernelFamily::lipschitz_closed_form:
      break;
  }
  return form_ != ClosedForm::constant || bound_ == 0.0;
}

bool Kernel::vanishes_on_diagonal() const noexcept {
  switch (family_) {
    case KernelFamily::holder_power:
    case KernelFamily::sobolev_singular:
      return true;
    case KernelFamily::tabulated:
      return false;
    case KernelFamily::mollified:
      return base_->antisymmetric() && base_->translation_invariant();
    case KernelFamily::lipschitz_closed_form:
      break;
  }
  return form_ != ClosedForm::constant || bound_ == 0.0;
}

std::string Kernel::describe() const {
  std::ostringstream s;
  s.precision(17);
  switch (family_) {
    case KernelFamily::holder_power:
      s << "holder_power(alpha=" << exponent_ << ",shape=" << (shape_ == PowerShape::odd ? "odd" : "even")
        << ",d=" << dim_ << ")";
      break;
    case KernelFamily::sobolev_singular:
      s << "sobolev_singular(exponent=" << exponent_ << ",s=" << sobolev_s_ << ",q=" << sobolev_q_ << ",d=" << dim_
        << ")";
      break;
    case KernelFamily::tabulated:
      s << "tabulated(" << table_->xs.size() << "x" << table_->ys.size() << ")";
      break;
    case KernelFamily::mollified:
      s << "mollified(" << base_->describe() << ",scale=" << mollifier_scale_ << ")";
      break;
    case KernelFamily::lipschitz_closed_form:
      switch (form_) {
        case ClosedForm::zero:
          s << "zero(d=" << dim_ << ")";
          break;
        case ClosedForm::constant:
          s << "constant(" << constant_[0] << "," << constant_[1] << ",d=" << dim_ << ")";
          break;
        case ClosedForm::sine:
          s << "sine(d=" << dim_ << ")";
          break;
        case ClosedForm::linear_capped:
          s << "linear_capped(radius=" << radius_ << ",d=" << dim_ << ")";
          break;
        case ClosedForm::clamp_attract:
          s << "clamp_attract";
          break;
      }
      break;
  }
  return s.str();
}

void Kernel::sum_over_self(std::span<const double> positions, std::span<double> out) const {
  const auto d = static_cast<std::size_t>(dim_);
  if (positions.size() % d != 0 || out.size() != positions.size()) {
    throw InvalidArgument("sum_over_self: buffer shape mismatch");
  }
  const std::size_t n = positions.size() / d;
  std::fill(out.begin(), out.end(), 0.0);
  if (n == 0) return;

  if (family_ == KernelFamily::lipschitz_closed_form) {
    if (form_ == ClosedForm::zero) return;
    if (form_ == ClosedForm::constant) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < d; ++k) out[i * d + k] = static_cast<double>(n) * constant_[k];
      }
      return;
    }
    if (form_ == ClosedForm::sine) {
      // sin(x - y) = sin x cos y - cos x sin y
      for (std::size_t k = 0; k < d; ++k) {
        double ssum = 0.0, csum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          ssum += std::sin(positions[j * d + k]);
          csum += std::cos(positions[j * d + k]);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double xi = positions[i * d + k];
          out[i * d + k] = std::sin(xi) * csum - std::cos(xi) * ssum;
        }
      }
      return;
    }
  }
  if ((family_ == KernelFamily::holder_power || family_ == KernelFamily::sobolev_singular) && dim_ == 1 &&
      shape_ == PowerShape::odd) {
    power_self_sums_1d(positions, exponent_, out);
    return;
  }
  if (family_ == KernelFamily::mollified) {
    sum_over_sources(positions, positions, out);
    return;
  }
  if (antisymmetric()) {
    for (std::size_t i = 0; i < n; ++i) {
      const Vec xi = point_at(positions, i, dim_);
      for (std::size_t j = i + 1; j < n; ++j) {
        const Vec v = (*this)(xi, point_at(positions, j, dim_));
        for (std::size_t k = 0; k < d; ++k) {
          out[i * d + k] += v[k];
          out[j * d + k] -= v[k];
        }
      }
    }
    return;
  }
  sum_over_sources(positions, positions, out);
}

void Kernel::sum_over_sources(std::span<const double> queries, std::span<const double> sources,
                              std::span<double> out) const {
  const auto d = static_cast<std::size_t>(dim_);
  if (queries.size() % d != 0 || sources.size() % d != 0 || out.size() != queries.size()) {
    throw InvalidArgument("sum_over_sources: buffer shape mismatch");
  }
  const std::size_t nq = queries.size() / d;
  const std::size_t ns = sources.size() / d;
  std::fill(out.begin(), out.end(), 0.0);
  if (ns == 0 || nq == 0) return;

  if (family_ == KernelFamily::lipschitz_closed_form) {
    if (form_ == ClosedForm::zero) return;
    if (form_ == ClosedForm::constant) {
      for (std::size_t i = 0; i < nq; ++i) {
        for (std::size_t k = 0; k < d; ++k) out[i * d + k] = static_cast<double>(ns) * constant_[k];
      }
      return;
    }
    if (form_ == ClosedForm::sine) {
      for (std::size_t k = 0; k < d; ++k) {
        double ssum = 0.0, csum = 0.0;
        for (std::size_t j = 0; j < ns; ++j) {
          ssum += std::sin(sources[j * d + k]);
          csum += std::cos(sources[j * d + k]);
        }
        for (std::size_t i = 0; i < nq; ++i) {
          const double xi = queries[i * d + k];
          out[i * d + k] = std::sin(xi) * csum - std::cos(xi) * ssum;
        }
      }
      return;
    }
  }
  if ((family_ == KernelFamily::holder_power || family_ == KernelFamily::sobolev_singular) && dim_ == 1 &&
      shape_ == PowerShape::odd) {
    power_source_sums_1d(queries, sources, exponent_, out);
    return;
  }
  if (family_ == KernelFamily::mollified) {
    // smoothing acts on the query argument, so each stencil node is a shifted base sum
    const auto& st = *stencil_;
    const double* offsets = st.data();
    const double* weights = st.data() + kStencilPoints;
    std::vector<double> shifted(queries.size());
    std::vector<double> partial(queries.size());
    const int axes = dim_;
    const int total = axes == 1 ? kStencilPoints : kStencilPoints * kStencilPoints;
    for (int node = 0; node < total; ++node) {
      const int a = node % kStencilPoints;
      const int b = node / kStencilPoints;
      const double w = axes == 1 ? weights[a] : weights[a] * weights[b];
      for (std::size_t i = 0; i < nq; ++i) {
        shifted[i * d] = queries[i * d] - offsets[a];
        if (axes == 2) shifted[i * d + 1] = queries[i * d + 1] - offsets[b];
      }
      base_->sum_over_sources(shifted, sources, partial);
      for (std::size_t i = 0; i < queries.size(); ++i) out[i] += w * partial[i];
    }
    return;
  }
  for (std::size_t i = 0; i < nq; ++i) {
    const Vec xi = point_at(queries, i, dim_);
    Vec acc{0.0, 0.0};
    for (std::size_t j = 0; j < ns; ++j) {
      const Vec v = (*this)(xi, point_at(sources, j, dim_));
      acc[0] += v[0];
      acc[1] += v[1];
    }
    for (std::size_t k = 0; k < d; ++k) out[i * d + k] = acc[k];
  }
}

Vec eval_kernel(const Kernel& kernel, std::span<const double> x, std::span<const double> y) {
  const auto d = static_cast<std::size_t>(kernel.dim());
  if (x.size() != d || y.size() != d) {
    throw InvalidArgument("eval_kernel: point dimension does not match kernel dimension " + std::to_string(d));
  }
  Vec a{0.0, 0.0}, b{0.0, 0.0};
  for (std::size_t k = 0; k < d; ++k) {
    a[k] = x[k];
    b[k] = y[k];
  }
  return kernel(a, b);
}

Kernel mollify_kernel(const Kernel& kernel, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("mollify_kernel: scale must be positive");
  auto stencil = std::make_shared<std::vector<double>>(2 * kStencilPoints);
  double total = 0.0;
  for (int a = 0; a < kStencilPoints; ++a) {
    const double u = -kStencilHalfWidth + 2.0 * kStencilHalfWidth * a / (kStencilPoints - 1);
    (*stencil)[a] = u * scale;
    const double w = std::exp(-0.5 * u * u);
    (*stencil)[kStencilPoints + a] = w;
    total += w;
  }
  for (int a = 0; a < kStencilPoints; ++a) (*stencil)[kStencilPoints + a] /= total;

  Kernel k;
  k.family_ = KernelFamily::mollified;
  k.dim_ = kernel.dim();
  k.bound_ = kernel.bound();
  k.holder_ = kernel.holder();
  k.mollifier_scale_ = scale;
  k.base_ = std::make_shared<const Kernel>(kernel);
  k.stencil_ = std::move(stencil);
  return k;
}

}  // namespace chaoslab::field
