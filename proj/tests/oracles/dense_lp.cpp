#include "oracles/dense_lp.hpp"

#include <cmath>
#include <stdexcept>

namespace oracle {

namespace {

constexpr double kTol = 1e-11;

struct Tableau {
  std::vector<std::vector<double>> t;  // rows: constraints, last row objective; last column rhs
  std::vector<int> basis;
};

void pivot(Tableau& tab, std::size_t row, std::size_t col) {
  auto& t = tab.t;
  const double p = t[row][col];
  for (double& v : t[row]) v /= p;
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (r == row) continue;
    const double f = t[r][col];
    if (f == 0.0) continue;
    for (std::size_t c = 0; c < t[r].size(); ++c) t[r][c] -= f * t[row][c];
  }
  tab.basis[row] = static_cast<int>(col);
}

/// Minimise the objective row over columns [0, usable) with Bland's rule.
void simplex(Tableau& tab, std::size_t usable) {
  auto& t = tab.t;
  const std::size_t rows = t.size() - 1;
  const std::size_t rhs = t[0].size() - 1;
  for (;;) {
    std::size_t enter = usable;
    for (std::size_t c = 0; c < usable; ++c) {
      if (t[rows][c] < -kTol) {
        enter = c;
        break;
      }
    }
    if (enter == usable) return;
    std::size_t leave = rows;
    double best = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (t[r][enter] > kTol) {
        const double ratio = t[r][rhs] / t[r][enter];
        if (leave == rows || ratio < best - kTol ||
            (std::abs(ratio - best) <= kTol && tab.basis[r] < tab.basis[leave])) {
          leave = r;
          best = ratio;
        }
      }
    }
    if (leave == rows) throw std::runtime_error("oracle LP unbounded");
    pivot(tab, leave, enter);
  }
}

}  // namespace

double lp_min_standard(const std::vector<std::vector<double>>& a, const std::vector<double>& b,
                       const std::vector<double>& c) {
  const std::size_t rows = a.size();
  const std::size_t cols = c.size();
  Tableau tab;
  tab.t.assign(rows + 1, std::vector<double>(cols + rows + 1, 0.0));
  tab.basis.assign(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double sign = b[r] < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < cols; ++j) tab.t[r][j] = sign * a[r][j];
    tab.t[r][cols + r] = 1.0;
    tab.t[r][cols + rows] = sign * b[r];
    tab.basis[r] = static_cast<int>(cols + r);
  }
  // phase one: minimise the sum of artificials
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j <= cols + rows; ++j) {
      if (j < cols || j == cols + rows) tab.t[rows][j] -= tab.t[r][j];
    }
  }
  simplex(tab, cols + rows);
  if (tab.t[rows][cols + rows] < -1e-9) throw std::runtime_error("oracle LP infeasible");
  // drive remaining artificials out of the basis where possible
  for (std::size_t r = 0; r < rows; ++r) {
    if (tab.basis[r] >= static_cast<int>(cols)) {
      for (std::size_t j = 0; j < cols; ++j) {
        if (std::abs(tab.t[r][j]) > 1e-9) {
          pivot(tab, r, j);
          break;
        }
      }
    }
  }
  // phase two objective
  auto& obj = tab.t[rows];
  std::fill(obj.begin(), obj.end(), 0.0);
  for (std::size_t j = 0; j < cols; ++j) obj[j] = c[j];
  for (std::size_t r = 0; r < rows; ++r) {
    const auto bj = static_cast<std::size_t>(tab.basis[r]);
    if (bj < cols && obj[bj] != 0.0) {
      const double f = obj[bj];
      for (std::size_t j = 0; j <= cols + rows; ++j) obj[j] -= f * tab.t[r][j];
    }
  }
  simplex(tab, cols);
  return -obj[cols + rows];
}

double transport_lp(const std::vector<double>& supply, const std::vector<double>& demand,
                    const std::vector<std::vector<double>>& cost) {
  const std::size_t m = supply.size(), n = demand.size();
  std::vector<std::vector<double>> a(m + n, std::vector<double>(m * n, 0.0));
  std::vector<double> b(m + n), c(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      a[i][i * n + j] = 1.0;
      a[m + j][i * n + j] = 1.0;
      c[i * n + j] = cost[i][j];
    }
  }
  for (std::size_t i = 0; i < m; ++i) b[i] = supply[i];
  for (std::size_t j = 0; j < n; ++j) b[m + j] = demand[j];
  return lp_min_standard(a, b, c);
}

double bounded_lipschitz_lp(const std::vector<double>& w, const std::vector<std::vector<double>>& dist) {
  // h = p - q with p, q >= 0; every inequality gets its own slack column
  const std::size_t k = w.size();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i != j) pairs.emplace_back(i, j);
    }
  }
  const std::size_t ineq = 2 * k + pairs.size();
  const std::size_t cols = 2 * k + ineq;
  std::vector<std::vector<double>> a(ineq, std::vector<double>(cols, 0.0));
  std::vector<double> b(ineq), c(cols, 0.0);
  std::size_t row = 0;
  for (std::size_t i = 0; i < k; ++i) {
    a[row][i] = 1.0;  // h_i <= 1
    a[row][k + i] = -1.0;
    a[row][2 * k + row] = 1.0;
    b[row++] = 1.0;
    a[row][i] = -1.0;  // -h_i <= 1
    a[row][k + i] = 1.0;
    a[row][2 * k + row] = 1.0;
    b[row++] = 1.0;
  }
  for (const auto& [i, j] : pairs) {
    a[row][i] = 1.0;  // h_i - h_j <= d_ij
    a[row][k + i] = -1.0;
    a[row][j] = -1.0;
    a[row][k + j] = 1.0;
    a[row][2 * k + row] = 1.0;
    b[row++] = dist[i][j];
  }
  for (std::size_t i = 0; i < k; ++i) {
    c[i] = -w[i];
    c[k + i] = w[i];
  }
  return -lp_min_standard(a, b, c);
}

}  // namespace oracle
