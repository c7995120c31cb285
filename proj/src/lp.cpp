#include "pwabs/lp.hpp"

#include <cmath>
#include <vector>

#include "pwabs/error.hpp"

namespace pwabs::lp {
namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-11;

// Tableau in canonical form: rows [0, m) are constraints, row m holds the
// reduced costs of the current objective (minimization), last column is rhs.
class Tableau {
 public:
  Tableau(int rows, int cols) : m_(rows), n_(cols), t_(Eigen::MatrixXd::Zero(rows + 1, cols + 1)), basis_(rows, -1) {}

  double& at(int r, int c) { return t_(r, c); }
  double rhs(int r) const { return t_(r, n_); }
  int rows() const { return m_; }
  int cols() const { return n_; }
  std::vector<int>& basis() { return basis_; }

  void set_objective(const Eigen::VectorXd& cost) {
    t_.row(m_).setZero();
    t_.row(m_).head(n_) = cost.transpose();
    for (int i = 0; i < m_; ++i) {
      const double cb = cost(basis_[i]);
      if (cb != 0.0) t_.row(m_) -= cb * t_.row(i);
    }
  }

  // Returns false when unbounded. `allowed` masks columns that may enter.
  bool optimize(const std::vector<bool>& allowed, int budget) {
    for (int iter = 0;; ++iter) {
      if (iter > budget) throw NumericalFailure("simplex pivot budget exceeded");
      int enter = -1;
      for (int j = 0; j < n_; ++j) {
        if (allowed[j] && t_(m_, j) < -kCostTol) {
          enter = j;
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = t_(i, n_) / a;
        if (leave < 0 || ratio < best - 1e-14 ||
            (std::abs(ratio - best) <= 1e-14 && basis_[i] < basis_[leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  }

  void pivot(int r, int c) {
    t_.row(r) /= t_(r, c);
    for (int i = 0; i <= m_; ++i) {
      if (i == r) continue;
      const double f = t_(i, c);
      if (f != 0.0) t_.row(i) -= f * t_.row(r);
    }
    basis_[r] = c;
  }

  double objective() const { return -t_(m_, n_); }

 private:
  int m_;
  int n_;
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace

Result maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                const Eigen::VectorXd& b) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (c.size() != n || b.size() != m) throw DimensionMismatch("lp: inconsistent problem sizes");

  // Columns: u (n), v (n), slacks (m), artificials (one per negative rhs row).
  std::vector<int> art_row;
  for (int i = 0; i < m; ++i)
    if (b(i) < 0.0) art_row.push_back(i);
  const int na = static_cast<int>(art_row.size());
  const int cols = 2 * n + m + na;
  Tableau tab(m, cols);

  int a = 0;
  for (int i = 0; i < m; ++i) {
    const double sign = b(i) < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) {
      tab.at(i, j) = sign * A(i, j);
      tab.at(i, n + j) = -sign * A(i, j);
    }
    tab.at(i, 2 * n + i) = sign;
    tab.at(i, cols) = sign * b(i);
    if (b(i) < 0.0) {
      tab.at(i, 2 * n + m + a) = 1.0;
      tab.basis()[i] = 2 * n + m + a;
      ++a;
    } else {
      tab.basis()[i] = 2 * n + i;
    }
  }

  const int budget = 50 * (m + cols) + 1000;
  std::vector<bool> allowed(cols, true);

  if (na > 0) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols);
    phase1.tail(na).setOnes();
    tab.set_objective(phase1);
    tab.optimize(allowed, budget);
    const double scale = 1.0 + b.cwiseAbs().maxCoeff();
    if (tab.objective() > 1e-9 * scale) return Result{Status::Infeasible, 0.0, {}};
    // Drive zero-level artificials out of the basis where possible.
    for (int i = 0; i < m; ++i) {
      if (tab.basis()[i] < 2 * n + m) continue;
      for (int j = 0; j < 2 * n + m; ++j) {
        if (std::abs(tab.at(i, j)) > 1e-9) {
          tab.pivot(i, j);
          break;
        }
      }
    }
    for (int j = 2 * n + m; j < cols; ++j) allowed[j] = false;
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols);
  phase2.head(n) = -c;
  phase2.segment(n, n) = c;
  tab.set_objective(phase2);
  if (!tab.optimize(allowed, budget)) return Result{Status::Unbounded, 0.0, {}};

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i) {
    const int j = tab.basis()[i];
    if (j < n) x(j) += tab.rhs(i);
    else if (j < 2 * n) x(j - n) -= tab.rhs(i);
  }
  return Result{Status::Optimal, c.dot(x), x};
}

}  // namespace pwabs::lp
