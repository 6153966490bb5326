#include "abstrakt/conic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <sstream>

namespace abstrakt {

Matrix solve_least_squares(const Matrix& A, const Matrix& B) {
  if (A.rows() == 0 || A.cols() == 0)
    throw Error(ErrorCode::DimensionMismatch, "solve_least_squares: A is empty");
  if (B.rows() != A.rows()) {
    std::ostringstream os;
    os << "solve_least_squares: A has " << A.rows() << " rows but B has " << B.rows();
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
  if (!A.allFinite() || !B.allFinite())
    throw Error(ErrorCode::NonFinite, "solve_least_squares: non-finite entries");
  // CompleteOrthogonalDecomposition yields the minimum-norm solution for
  // rank-deficient A as well.
  return A.completeOrthogonalDecomposition().solve(B);
}

PsdCheck check_psd(const SymMatrix& M, double tol) {
  if (!M.mat().allFinite())
    throw Error(ErrorCode::NonFinite, "check_psd: non-finite entries");
  if (M.order() == 0) return {true, 0.0};
  Eigen::SelfAdjointEigenSolver<Matrix> es(M.mat(), Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  return {min_eig >= -tol, min_eig};
}

void LmiProblem::validate() const {
  if (objective.size() != num_vars)
    throw Error(ErrorCode::DimensionMismatch, "LmiProblem: objective length != num_vars");
  if (var_lower_bounds && var_lower_bounds->size() != num_vars)
    throw Error(ErrorCode::DimensionMismatch, "LmiProblem: bound length != num_vars");
  for (const auto& b : blocks) {
    if (b.F0.rows() != b.F0.cols())
      throw Error(ErrorCode::DimensionMismatch, "LmiProblem: non-square block");
    if (static_cast<Index>(b.Fi.size()) != num_vars)
      throw Error(ErrorCode::DimensionMismatch, "LmiProblem: block has wrong Fi count");
    for (const auto& F : b.Fi)
      if (F.rows() != b.F0.rows() || F.cols() != b.F0.cols())
        throw Error(ErrorCode::DimensionMismatch, "LmiProblem: Fi order mismatch within block");
  }
}

Matrix lmi_block_value(const LmiProblem& p, Index k, const Vector& x) {
  Matrix S = p.blocks[k].F0;
  for (Index i = 0; i < p.num_vars; ++i)
    if (x[i] != 0.0) S += x[i] * p.blocks[k].Fi[i];
  return S;
}

double lmi_max_eig(const LmiProblem& p, const Vector& x) {
  double worst = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (Index k = 0; k < static_cast<Index>(p.blocks.size()); ++k) {
    if (p.blocks[k].F0.rows() == 0) continue;
    Eigen::SelfAdjointEigenSolver<Matrix> es(lmi_block_value(p, k, x), Eigen::EigenvaluesOnly);
    worst = std::max(worst, es.eigenvalues().maxCoeff());
    any = true;
  }
  return any ? worst : 0.0;
}

namespace {

// Internal dense form used by the barrier: slack matrices S_k(x) =
// -(F0_k + sum x_i Fi_k) must stay positive definite.
struct BarrierProblem {
  Vector c;
  std::vector<LmiProblem::Block> blocks;  // skips zero-order blocks
  Index total_order = 0;

  // Sparsity: variable indices that actually touch each block.
  std::vector<std::vector<Index>> active;

  void finalize() {
    total_order = 0;
    active.clear();
    for (const auto& b : blocks) {
      total_order += b.F0.rows();
      std::vector<Index> act;
      for (Index i = 0; i < static_cast<Index>(b.Fi.size()); ++i)
        if ((b.Fi[i].array() != 0.0).any()) act.push_back(i);
      active.push_back(std::move(act));
    }
  }
};

struct CholSet {
  std::vector<Eigen::LLT<Matrix>> llt;
  double logdet = 0.0;
};

// Cholesky-factor every slack block; nullopt if any is not PD.
std::optional<CholSet> factor(const BarrierProblem& bp, const Vector& x) {
  CholSet out;
  out.llt.reserve(bp.blocks.size());
  for (const auto& b : bp.blocks) {
    Matrix S = -b.F0;
    for (Index i = 0; i < static_cast<Index>(b.Fi.size()); ++i)
      if (x[i] != 0.0) S -= x[i] * b.Fi[i];
    Eigen::LLT<Matrix> llt(S);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const auto& L = llt.matrixLLT();
    for (Index i = 0; i < L.rows(); ++i) {
      if (!(L(i, i) > 0.0) || !std::isfinite(L(i, i))) return std::nullopt;
      out.logdet += 2.0 * std::log(L(i, i));
    }
    out.llt.push_back(std::move(llt));
  }
  return out;
}

struct NewtonStats {
  int iterations = 0;
  bool converged = false;
};

// Damped Newton on  t * c'x - sum_k log det S_k(x).
NewtonStats center(const BarrierProblem& bp, Vector& x, double t, double lambda2_tol,
                   int max_iters) {
  const Index n = x.size();
  NewtonStats stats;
  auto fac = factor(bp, x);
  if (!fac) throw Error(ErrorCode::NoConvergence, "barrier: start point not strictly feasible");

  for (; stats.iterations < max_iters; ++stats.iterations) {
    Vector g = t * bp.c;
    Matrix H = Matrix::Zero(n, n);
    for (size_t k = 0; k < bp.blocks.size(); ++k) {
      const auto& b = bp.blocks[k];
      const auto& act = bp.active[k];
      const auto& L = fac->llt[k];
      std::vector<Matrix> G(act.size());
      for (size_t a = 0; a < act.size(); ++a) {
        // G_a = S^{-1} F_a via two triangular solves, kept as full matrix
        Matrix Tmp = L.matrixL().solve(b.Fi[act[a]]);
        G[a] = L.matrixU().solve(Tmp);  // = S^{-1} F_a (not symmetric in general)
        g[act[a]] += G[a].trace();
      }
      for (size_t a = 0; a < act.size(); ++a)
        for (size_t bb = a; bb < act.size(); ++bb) {
          const double h = (G[a].array() * G[bb].transpose().array()).sum();  // tr(G_a G_b)
          H(act[a], act[bb]) += h;
          if (act[a] != act[bb]) H(act[bb], act[a]) += h;
        }
    }
    H.diagonal().array() += 1e-13;

    Eigen::LDLT<Matrix> ldlt(H);
    Vector dx = ldlt.solve(-g);
    const double lambda2 = -g.dot(dx);
    if (!std::isfinite(lambda2)) throw Error(ErrorCode::NoConvergence, "barrier: Newton breakdown");
    if (lambda2 * 0.5 <= lambda2_tol) {
      stats.converged = true;
      return stats;
    }

    // Backtracking line search on the barrier objective.
    const double f0 = t * bp.c.dot(x) - fac->logdet;
    const double slope = g.dot(dx);
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Vector xn = x + step * dx;
      auto fn = factor(bp, xn);
      if (fn) {
        const double f1 = t * bp.c.dot(xn) - fn->logdet;
        if (f1 <= f0 + 0.01 * step * slope) {
          x = std::move(xn);
          fac = std::move(fn);
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) {
      stats.converged = lambda2 * 0.5 <= 1e3 * lambda2_tol;
      return stats;  // stalled (numerical floor)
    }
  }
  return stats;
}

// Outer barrier loop: returns total Newton iterations; x must be strictly
// feasible on entry. Stops when total_order / t <= gap_tol * max(1, |c'x|).
int outer_loop(const BarrierProblem& bp, Vector& x, double gap_tol, double t_growth,
               int max_newton, const std::function<bool(const Vector&)>& early_exit) {
  double t = std::max(1.0, static_cast<double>(bp.total_order) /
                               std::max(1.0, std::abs(bp.c.dot(x))));
  int used = 0;
  while (used < max_newton) {
    NewtonStats st = center(bp, x, t, 1e-9, max_newton - used);
    used += std::max(st.iterations, 1);
    if (early_exit && early_exit(x)) return used;
    if (bp.total_order / t <= gap_tol * std::max(1.0, std::abs(bp.c.dot(x)))) return used;
    t *= t_growth;
  }
  return used;
}

// |x_i| <= bound as 1x1 blocks, keeping barrier sublevel sets compact even
// along objective-flat feasible rays.
void append_box(BarrierProblem& bp, double bound) {
  const Index n = bp.c.size();
  for (Index i = 0; i < n; ++i) {
    for (double sgn : {1.0, -1.0}) {
      LmiProblem::Block blk;
      blk.F0 = Matrix::Constant(1, 1, -bound);
      blk.Fi.assign(n, Matrix::Zero(1, 1));
      blk.Fi[i](0, 0) = sgn;
      bp.blocks.push_back(std::move(blk));
    }
  }
}

}  // namespace

SdpSolution solve_sdp(const LmiProblem& p, const SolverOptions& opts) {
  p.validate();
  SdpSolution sol;

  // Degenerate problems are accepted and return trivially Optimal.
  if (p.num_vars == 0) {
    double worst = 0.0;
    for (const auto& b : p.blocks)
      if (b.F0.rows() > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(b.F0, Eigen::EigenvaluesOnly);
        worst = std::max(worst, es.eigenvalues().maxCoeff());
      }
    if (worst <= opts.feas_tol) {
      sol.status = SdpSolution::Status::Optimal;
      sol.x = Vector::Zero(0);
      sol.max_constraint_eig = worst;
      return sol;
    }
    sol.status = SdpSolution::Status::Infeasible;
    sol.message = "constant blocks are not negative semidefinite";
    return sol;
  }

  // Fold lower bounds into scalar blocks: lb_i - x_i <= 0.
  LmiProblem q = p;
  if (q.var_lower_bounds) {
    for (Index i = 0; i < q.num_vars; ++i) {
      const double lb = (*q.var_lower_bounds)[i];
      if (!std::isfinite(lb)) continue;
      LmiProblem::Block blk;
      blk.F0 = Matrix::Constant(1, 1, lb);
      blk.Fi.assign(q.num_vars, Matrix::Zero(1, 1));
      blk.Fi[i](0, 0) = -1.0;
      q.blocks.push_back(std::move(blk));
    }
    q.var_lower_bounds.reset();
  }
  // Drop empty blocks.
  std::erase_if(q.blocks, [](const LmiProblem::Block& b) { return b.F0.rows() == 0; });
  if (q.blocks.empty()) {
    sol.status = SdpSolution::Status::Optimal;
    sol.x = Vector::Zero(q.num_vars);
    sol.objective_value = 0.0;
    return sol;
  }
  for (const auto& b : q.blocks) {
    if (!b.F0.allFinite())
      throw Error(ErrorCode::NonFinite, "solve_sdp: non-finite block data");
    for (const auto& F : b.Fi)
      if (!F.allFinite()) throw Error(ErrorCode::NonFinite, "solve_sdp: non-finite block data");
  }

  const Index n = q.num_vars;

  // ---- Phase 1: minimize s subject to F(x) - s I <= 0, s bounded below.
  Vector x = Vector::Zero(n);
  const double s0 = lmi_max_eig(q, x) + 1.0;
  const double s_cap = 2.0 * std::max(1.0, std::abs(s0));

  BarrierProblem p1;
  p1.c = Vector::Zero(n + 1);
  p1.c[n] = 1.0;
  for (const auto& b : q.blocks) {
    LmiProblem::Block blk;
    blk.F0 = b.F0;
    blk.Fi = b.Fi;
    blk.Fi.push_back(-Matrix::Identity(b.F0.rows(), b.F0.rows()));
    p1.blocks.push_back(std::move(blk));
  }
  {
    LmiProblem::Block cap;  // -s_cap - s <= 0
    cap.F0 = Matrix::Constant(1, 1, -s_cap);
    cap.Fi.assign(n + 1, Matrix::Zero(1, 1));
    cap.Fi[n](0, 0) = -1.0;
    p1.blocks.push_back(std::move(cap));
  }
  append_box(p1, opts.var_box);
  p1.finalize();

  Vector xs(n + 1);
  xs.head(n) = x;
  xs[n] = s0;
  const double deep_feasible = -0.05 * std::max(1.0, std::abs(s0));
  int used1 = outer_loop(
      p1, xs, std::min(0.05 * opts.feas_tol, opts.step_tol), opts.t_growth, opts.max_newton,
      [&](const Vector& v) { return v[n] < deep_feasible; });
  sol.newton_iterations += used1;
  const double s_star = xs[n];
  if (s_star >= deep_feasible && used1 >= opts.max_newton) {
    sol.status = SdpSolution::Status::MaxIter;
    sol.x = xs.head(n);
    sol.message = "phase-1 iteration budget exhausted";
    sol.max_constraint_eig = lmi_max_eig(q, sol.x);
    return sol;
  }
  if (s_star > 0.5 * opts.feas_tol) {
    sol.status = SdpSolution::Status::Infeasible;
    sol.x = xs.head(n);
    std::ostringstream os;
    os << "phase-1 optimum s* = " << s_star << " > 0; no strictly feasible point found";
    sol.message = os.str();
    sol.max_constraint_eig = lmi_max_eig(q, sol.x);
    return sol;
  }

  // ---- Phase 2: minimize the objective over the feas_tol-shifted blocks,
  // which have a strict interior even when the original feasible set lies on
  // the PSD boundary (common for the relaxed coupling problems).
  const double sigma = opts.feas_tol;
  BarrierProblem p2;
  p2.c = q.objective;
  for (const auto& b : q.blocks) {
    LmiProblem::Block blk;
    blk.F0 = b.F0 - sigma * Matrix::Identity(b.F0.rows(), b.F0.rows());
    blk.Fi = b.Fi;
    p2.blocks.push_back(std::move(blk));
  }
  append_box(p2, opts.var_box);
  p2.finalize();

  x = xs.head(n);
  if (!factor(p2, x)) {
    // Phase-1 point sits between s* and sigma; nudge via a few more
    // phase-1 steps is not available, so fail loudly.
    sol.status = SdpSolution::Status::MaxIter;
    sol.x = x;
    sol.message = "phase-1 point not interior for shifted problem";
    sol.max_constraint_eig = lmi_max_eig(q, x);
    return sol;
  }
  int used2 = outer_loop(p2, x, opts.step_tol, opts.t_growth, opts.max_newton, nullptr);
  sol.newton_iterations += used2;
  sol.x = x;
  sol.objective_value = q.objective.dot(x);
  sol.max_constraint_eig = lmi_max_eig(q, x);
  sol.status = (used2 >= opts.max_newton) ? SdpSolution::Status::MaxIter
                                          : SdpSolution::Status::Optimal;
  if (sol.status == SdpSolution::Status::Optimal && sol.max_constraint_eig > opts.feas_tol) {
    sol.status = SdpSolution::Status::MaxIter;
    sol.message = "solution violates feasibility tolerance";
  }
  return sol;
}

}  // namespace abstrakt
