#pragma once

#include "abstrakt/types.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace abstrakt {

/// Least-squares: the minimum-Frobenius-norm X minimizing ||A*X - B||_F
/// (pseudo-inverse solution; works for rank-deficient A).
Matrix solve_least_squares(const Matrix& A, const Matrix& B);

struct PsdCheck {
  bool is_psd;
  double min_eig;
};

/// Smallest eigenvalue test: is_psd iff min_eig >= -tol.
PsdCheck check_psd(const SymMatrix& M, double tol);

/// Linear-objective SDP over block LMI constraints:
///   minimize c'x  subject to  F0_k + sum_i x_i Fi_k <= 0 for each block k,
///   and optionally x >= lower bounds componentwise.
struct LmiProblem {
  struct Block {
    Matrix F0;
    std::vector<Matrix> Fi;  // one per variable, all sharing F0's order
  };

  Index num_vars = 0;
  Vector objective;
  std::vector<Block> blocks;
  std::optional<Vector> var_lower_bounds;

  void validate() const;
};

struct SolverOptions {
  double feas_tol = 1e-7;   // constraint blocks are accepted up to feas_tol * I
  double step_tol = 1e-8;   // duality-gap / step tolerance
  int max_newton = 200;     // Newton iteration budget per barrier stage
  double var_box = 1e5;     // |x_i| bound keeping barrier sublevel sets compact
  double t_growth = 10.0;   // barrier parameter growth per outer step
  bool verbose = false;
};

struct SdpSolution {
  enum class Status { Optimal, Infeasible, MaxIter };

  Status status = Status::MaxIter;
  Vector x;
  double objective_value = 0.0;
  double max_constraint_eig = 0.0;
  int newton_iterations = 0;
  std::string message;
};

SdpSolution solve_sdp(const LmiProblem& p, const SolverOptions& opts = {});

/// Evaluate F0 + sum x_i Fi for block k.
Matrix lmi_block_value(const LmiProblem& p, Index k, const Vector& x);
/// max over blocks of lambda_max(F0 + sum x_i Fi).
double lmi_max_eig(const LmiProblem& p, const Vector& x);

/// One oracle probe for bisect_feasibility.
template <class Payload>
struct OracleEval {
  bool feasible = false;
  double value = 0.0;
  Payload payload{};
};

template <class Payload>
struct BisectResult {
  double alpha_star = 0.0;
  double value = 0.0;
  Payload payload{};
};

/// Minimize oracle(alpha).value over the feasible alphas in [lo, hi].
/// Grid scan followed by interval refinement; infeasible probes count as
/// +inf, so for a monotone value the result lands on the feasibility
/// boundary. The caller guarantees the feasible set is an interval;
/// violations degrade to best-found.
template <class Oracle>
auto bisect_feasibility(double lo, double hi, Oracle&& oracle, double tol, int grid_points = 17)
    -> BisectResult<decltype(oracle(lo).payload)> {
  using Payload = decltype(oracle(lo).payload);
  if (!(lo < hi)) throw Error(ErrorCode::InvalidConfig, "bisect_feasibility: requires lo < hi");
  if (grid_points < 3) grid_points = 3;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  double best_a = 0.0, best_v = kInf;
  Payload best_p{};
  // Returns the probe value (+inf when infeasible); remembers the best
  // payload, preferring smaller alpha on ties.
  auto probe = [&](double a) -> double {
    auto r = oracle(a);
    if (!r.feasible) return kInf;
    if (r.value < best_v || (r.value == best_v && a < best_a)) {
      best_a = a;
      best_v = r.value;
      best_p = std::move(r.payload);
    }
    return r.value;
  };

  const double h = (hi - lo) / (grid_points - 1);
  for (int i = 0; i < grid_points; ++i) probe(lo + i * h);
  if (!(best_v < kInf))
    throw Error(ErrorCode::Infeasible, "bisect_feasibility: no feasible point in [lo, hi]");

  // Trisection-style refinement in the bracket around the best grid point;
  // infeasible probes act as +inf, so a monotone value lands on the
  // feasibility boundary.
  double a_lo = std::max(lo, best_a - h);
  double a_hi = std::min(hi, best_a + h);
  double a_star = best_a;
  double v_star = best_v;
  while (a_hi - a_lo > tol) {
    const double u = 0.5 * (a_lo + a_star);
    const double w = 0.5 * (a_star + a_hi);
    const double vu = probe(u);
    const double vw = probe(w);
    if (vu <= v_star && vu <= vw) {
      a_hi = a_star;
      a_star = u;
      v_star = vu;
    } else if (vw < v_star && vw < vu) {
      a_lo = a_star;
      a_star = w;
      v_star = vw;
    } else {
      a_lo = u;
      a_hi = w;
    }
  }
  return BisectResult<Payload>{best_a, best_v, std::move(best_p)};
}

}  // namespace abstrakt
