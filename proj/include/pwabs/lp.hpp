#pragma once

#include <Eigen/Dense>

namespace pwabs::lp {

enum class Status { Optimal, Infeasible, Unbounded };

struct Result {
  Status status = Status::Infeasible;
  double objective = 0.0;
  Eigen::VectorXd x;
};

/// maximize c'x subject to A x <= b with x free.
///
/// Dense two-phase tableau simplex with Bland's anti-cycling rule. Sized for
/// the small problems of polytope algebra (tens of rows). Throws
/// NumericalFailure if the pivot budget is exhausted.
Result maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                const Eigen::VectorXd& b);

}  // namespace pwabs::lp
