#include "abstrakt/aggregation.hpp"

#include "abstrakt/sobol.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace abstrakt {

Matrix partition_matrix(const std::vector<int>& assign, int num_groups) {
  const Index L = static_cast<Index>(assign.size());
  Matrix P = Matrix::Zero(L, num_groups);
  for (Index l = 0; l < L; ++l) {
    const int g = assign[static_cast<size_t>(l)];
    if (g < 0 || g >= num_groups)
      throw Error(ErrorCode::InvalidConfig, "partition_matrix: group index out of range");
    P(l, g) = 1.0;
  }
  for (int g = 0; g < num_groups; ++g)
    if (P.col(g).sum() < 0.5)
      throw Error(ErrorCode::EmptyGroup,
                  "partition_matrix: group " + std::to_string(g) + " is empty");
  return P;
}

Matrix optimal_group_coupling(const Matrix& Mtilde, const std::vector<int>& assign,
                              int num_groups) {
  const Index L = Mtilde.rows();
  if (Mtilde.cols() != L)
    throw Error(ErrorCode::DimensionMismatch, "optimal_group_coupling: Mtilde not square");
  if (static_cast<Index>(assign.size()) != L)
    throw Error(ErrorCode::DimensionMismatch, "optimal_group_coupling: assign length != L");
  const Matrix P = partition_matrix(assign, num_groups);  // also checks non-empty groups
  const Matrix MP = Mtilde * P;
  Matrix Mbar = Matrix::Zero(num_groups, num_groups);
  Vector counts = Vector::Zero(num_groups);
  for (Index l = 0; l < L; ++l) {
    const int g = assign[static_cast<size_t>(l)];
    Mbar.row(g) += MP.row(l);
    counts[g] += 1.0;
  }
  for (int g = 0; g < num_groups; ++g) Mbar.row(g) /= counts[g];
  return Mbar;
}

EquitableReport is_equitable(const Matrix& Mtilde, const std::vector<int>& assign, int num_groups,
                             double tol) {
  EquitableReport rep;
  rep.Mbar = optimal_group_coupling(Mtilde, assign, num_groups);
  const Matrix P = partition_matrix(assign, num_groups);
  rep.residual_norm = (Mtilde * P - P * rep.Mbar).norm();
  rep.equitable = rep.residual_norm <= tol;
  return rep;
}

Matrix PreAssignment::Pbar(int num_groups) const {
  const Index L = static_cast<Index>(assign.size());
  Matrix P = Matrix::Zero(L, num_groups);
  for (Index l = 0; l < L; ++l) {
    const int g = assign[static_cast<size_t>(l)];
    if (g >= num_groups)
      throw Error(ErrorCode::InvalidConfig, "PreAssignment: group index out of range");
    if (g >= 0) P(l, g) = 1.0;
  }
  return P;
}

Matrix PreAssignment::T(int num_groups) const {
  const Matrix P = Pbar(num_groups);
  return Matrix(P.colwise().sum().asDiagonal());
}

Partition make_partition(const Matrix& Mtilde, const std::vector<int>& assign, int num_groups) {
  Partition part;
  part.L = static_cast<int>(assign.size());
  part.N = num_groups;
  part.assign = assign;
  part.P = partition_matrix(assign, num_groups);
  part.Mbar = optimal_group_coupling(Mtilde, assign, num_groups);
  part.Ybar = Mtilde * part.P - part.P * part.Mbar;
  part.residual_norm = part.Ybar.norm();
  return part;
}

namespace {

// Squared Frobenius norm of Mtilde P - P Mbar* for complete assignments,
// evaluated from the per-group column sums.
double partition_cost(const Matrix& Mtilde, const std::vector<int>& assign, int N) {
  const Index L = Mtilde.rows();
  Matrix colsum = Matrix::Zero(L, N);  // column j = sum of Mtilde columns in group j
  for (Index k = 0; k < L; ++k) colsum.col(assign[static_cast<size_t>(k)]) += Mtilde.col(k);
  // within-group variance of every column, accumulated over groups
  Matrix group_sum = Matrix::Zero(N, N);
  Vector counts = Vector::Zero(N);
  for (Index l = 0; l < L; ++l) {
    group_sum.row(assign[static_cast<size_t>(l)]) += colsum.row(l);
    counts[assign[static_cast<size_t>(l)]] += 1.0;
  }
  double cost = 0.0;
  for (Index l = 0; l < L; ++l) {
    const int i = assign[static_cast<size_t>(l)];
    for (int j = 0; j < N; ++j) {
      const double dev = colsum(l, j) - group_sum(i, j) / counts[i];
      cost += dev * dev;
    }
  }
  return cost;
}

struct SearchState {
  const Matrix& Mtilde;
  int N;
  std::vector<int> assign;
  std::vector<Index> free_agents;
  std::vector<int> group_fill;         // current member counts
  std::vector<int> symmetric_groups;   // groups with no pre-assigned member, ascending
  uint64_t leaves = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> best_assign;
};

void dfs(SearchState& st, size_t depth) {
  const int N = st.N;
  if (depth == st.free_agents.size()) {
    ++st.leaves;
    const double c = partition_cost(st.Mtilde, st.assign, N);
    if (c < st.best_cost - 1e-15) {
      st.best_cost = c;
      st.best_assign = st.assign;
    }
    return;
  }
  const Index agent = st.free_agents[depth];
  const size_t remaining = st.free_agents.size() - depth;
  // Relabeling symmetry: a fresh symmetric group may only be opened in
  // index order.
  int first_unused_sym = -1;
  for (int g : st.symmetric_groups)
    if (st.group_fill[static_cast<size_t>(g)] == 0) {
      first_unused_sym = g;
      break;
    }
  size_t empties = 0;
  for (int g = 0; g < N; ++g)
    if (st.group_fill[static_cast<size_t>(g)] == 0) ++empties;

  for (int g = 0; g < N; ++g) {
    const bool fresh_sym = st.group_fill[static_cast<size_t>(g)] == 0 &&
                           std::find(st.symmetric_groups.begin(), st.symmetric_groups.end(), g) !=
                               st.symmetric_groups.end();
    if (fresh_sym && g != first_unused_sym) continue;
    const size_t need = empties - (st.group_fill[static_cast<size_t>(g)] == 0 ? 1 : 0);
    if (need > remaining - 1) continue;  // cannot fill the other empty groups
    st.assign[static_cast<size_t>(agent)] = g;
    st.group_fill[static_cast<size_t>(g)]++;
    dfs(st, depth + 1);
    st.group_fill[static_cast<size_t>(g)]--;
    st.assign[static_cast<size_t>(agent)] = -1;
  }
}

// Greedy seeding plus single-move local search for instances past the
// exhaustive budget.
std::vector<int> greedy_local_search(const Matrix& Mtilde, const std::vector<int>& pre, int N,
                                     int rounds) {
  const Index L = Mtilde.rows();
  std::vector<int> assign = pre;
  std::vector<int> fill(static_cast<size_t>(N), 0);
  for (int g : assign)
    if (g >= 0) fill[static_cast<size_t>(g)]++;
  // seed: empty groups first, then cheapest-cost group per agent
  for (Index l = 0; l < L; ++l) {
    if (assign[static_cast<size_t>(l)] >= 0) continue;
    int pick = -1;
    for (int g = 0; g < N; ++g)
      if (fill[static_cast<size_t>(g)] == 0) {
        pick = g;
        break;
      }
    if (pick < 0) {
      double best = std::numeric_limits<double>::infinity();
      for (int g = 0; g < N; ++g) {
        assign[static_cast<size_t>(l)] = g;
        std::vector<int> trial = assign;
        for (Index k = l + 1; k < L; ++k)
          if (trial[static_cast<size_t>(k)] < 0) trial[static_cast<size_t>(k)] = 0;
        const double c = partition_cost(Mtilde, trial, N);
        if (c < best) {
          best = c;
          pick = g;
        }
      }
    }
    assign[static_cast<size_t>(l)] = pick;
    fill[static_cast<size_t>(pick)]++;
  }
  double cost = partition_cost(Mtilde, assign, N);
  for (int round = 0; round < rounds; ++round) {
    bool improved = false;
    for (Index l = 0; l < L; ++l) {
      if (pre[static_cast<size_t>(l)] >= 0) continue;
      const int old = assign[static_cast<size_t>(l)];
      if (fill[static_cast<size_t>(old)] == 1) continue;  // would empty the group
      for (int g = 0; g < N; ++g) {
        if (g == old) continue;
        assign[static_cast<size_t>(l)] = g;
        const double c = partition_cost(Mtilde, assign, N);
        if (c < cost - 1e-15) {
          cost = c;
          fill[static_cast<size_t>(old)]--;
          fill[static_cast<size_t>(g)]++;
          improved = true;
          break;
        }
        assign[static_cast<size_t>(l)] = old;
      }
    }
    if (!improved) break;
  }
  return assign;
}

}  // namespace

Partition partition_search(const Matrix& Mtilde, const PreAssignment& pre, int num_groups,
                           const PartitionSearchOptions& opts) {
  const Index L = Mtilde.rows();
  if (Mtilde.cols() != L)
    throw Error(ErrorCode::DimensionMismatch, "partition_search: Mtilde not square");
  if (static_cast<Index>(pre.assign.size()) != L)
    throw Error(ErrorCode::DimensionMismatch, "partition_search: pre-assignment length != L");
  if (num_groups < 1 || num_groups > static_cast<int>(L))
    throw Error(ErrorCode::InvalidConfig, "partition_search: invalid group count");

  std::vector<int> fill(static_cast<size_t>(num_groups), 0);
  std::vector<Index> free_agents;
  for (Index l = 0; l < L; ++l) {
    const int g = pre.assign[static_cast<size_t>(l)];
    if (g >= num_groups)
      throw Error(ErrorCode::InvalidConfig, "partition_search: pre-assignment group out of range");
    if (g >= 0)
      fill[static_cast<size_t>(g)]++;
    else
      free_agents.push_back(l);
  }
  size_t empty_groups = 0;
  for (int c : fill)
    if (c == 0) ++empty_groups;
  if (empty_groups > free_agents.size())
    throw Error(ErrorCode::Infeasible,
                "partition_search: not enough free agents to populate every group");

  double leaves_est = 1.0;
  for (size_t k = 0; k < free_agents.size() && leaves_est <= 1e18; ++k) leaves_est *= num_groups;

  Partition part;
  if (leaves_est <= static_cast<double>(opts.max_leaves)) {
    SearchState st{Mtilde, num_groups, pre.assign, free_agents, fill, {}, 0};
    for (int g = 0; g < num_groups; ++g)
      if (fill[static_cast<size_t>(g)] == 0) st.symmetric_groups.push_back(g);
    dfs(st, 0);
    if (!std::isfinite(st.best_cost))
      throw Error(ErrorCode::Infeasible, "partition_search: no feasible assignment");
    part = make_partition(Mtilde, st.best_assign, num_groups);
    part.exact = true;
  } else {
    const std::vector<int> assign =
        greedy_local_search(Mtilde, pre.assign, num_groups, opts.local_search_rounds);
    part = make_partition(Mtilde, assign, num_groups);
    part.exact = false;
  }
  return part;
}

namespace {

Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

Matrix central_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x) {
  const Index n = x.size();
  const Index m = f(x).size();
  Matrix J(m, n);
  Vector xp = x, xm = x;
  for (Index k = 0; k < n; ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
    xp[k] += h;
    xm[k] -= h;
    J.col(k) = (f(xp) - f(xm)) / (2.0 * h);
    xp[k] = x[k];
    xm[k] = x[k];
  }
  return J;
}

}  // namespace

StorageProfile agent_storage_profile(const AgentSpec& spec, const NominalModel& nominal,
                                     const SampleBox& box) {
  if (spec.n <= 0 || spec.p <= 0)
    throw Error(ErrorCode::InvalidConfig, "agent_storage_profile: dimensions not set");
  if (spec.Q.order() != spec.n)
    throw Error(ErrorCode::DimensionMismatch, "agent_storage_profile: Q order != n");
  if (spec.B.rows() != spec.n || spec.B.cols() != spec.p || spec.C.rows() != spec.p ||
      spec.C.cols() != spec.n)
    throw Error(ErrorCode::DimensionMismatch, "agent_storage_profile: B or C shape");

  const double sum = spec.lambda + spec.theta;
  if (!(sum < 0.0))
    throw Error(ErrorCode::ConditionViolated,
                "agent_storage_profile: lambda + theta < 0 fails (lambda + theta = " +
                    std::to_string(sum) + ")");
  const double eps = spec.eps > 0.0 ? spec.eps : 0.5 * std::abs(sum);
  if (!(eps < std::abs(sum)))
    throw Error(ErrorCode::ConditionViolated,
                "agent_storage_profile: eps must lie in (0, |lambda + theta|)");

  Eigen::SelfAdjointEigenSolver<Matrix> esQ(spec.Q.mat());
  const double qmin = esQ.eigenvalues().minCoeff();
  const double qmax = esQ.eigenvalues().maxCoeff();
  if (qmin <= 0.0)
    throw Error(ErrorCode::ConditionViolated, "agent_storage_profile: Q must be positive definite");

  // Q B = C' must hold exactly.
  const double qb_err = (spec.Q.mat() * spec.B - spec.C.transpose()).cwiseAbs().maxCoeff();
  if (qb_err > 1e-10)
    throw Error(ErrorCode::ConditionViolated,
                "agent_storage_profile: Q B = C' fails (max deviation " + std::to_string(qb_err) +
                    ")");

  // Drift condition Q J + J' Q <= 2 lambda I at sample points.
  if (box.state_lo.size() != spec.n || box.state_hi.size() != spec.n)
    throw Error(ErrorCode::DimensionMismatch, "agent_storage_profile: state box size != n");
  const Matrix pts = sobol_box(box.state_lo, box.state_hi, box.count);
  double worst_drift = -std::numeric_limits<double>::infinity();
  Vector worst_drift_x;
  for (Index s = 0; s < pts.rows(); ++s) {
    const Vector x = pts.row(s).transpose();
    const Matrix J = spec.alpha_jac ? spec.alpha_jac(x) : central_jacobian(spec.alpha_fn, x);
    const Matrix G = spec.Q.mat() * J + J.transpose() * spec.Q.mat() -
                     2.0 * spec.lambda * Matrix::Identity(spec.n, spec.n);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (G + G.transpose()), Eigen::EigenvaluesOnly);
    const double v = es.eigenvalues().maxCoeff();
    if (v > worst_drift) {
      worst_drift = v;
      worst_drift_x = x;
    }
  }
  const double drift_tol = 1e-8 * std::max(1.0, qmax * std::abs(spec.lambda));
  if (worst_drift > drift_tol) {
    std::ostringstream os;
    os << "agent_storage_profile: drift condition Q J + J' Q <= 2 lambda I fails by "
       << worst_drift << " at x = [" << worst_drift_x.transpose() << "]";
    throw Error(ErrorCode::ConditionViolated, os.str());
  }

  // Interface condition at joint (x, xhat, uhat) samples.
  if (spec.interface_fn) {
    if (box.input_lo.size() != spec.m || box.input_hi.size() != spec.m)
      throw Error(ErrorCode::DimensionMismatch, "agent_storage_profile: input box size != m");
    Vector lo(2 * spec.n + spec.m), hi(2 * spec.n + spec.m);
    lo << box.state_lo, box.state_lo, box.input_lo;
    hi << box.state_hi, box.state_hi, box.input_hi;
    const Matrix jpts = sobol_box(lo, hi, box.count);
    double worst_if = -std::numeric_limits<double>::infinity();
    Vector worst_if_pt;
    for (Index s = 0; s < jpts.rows(); ++s) {
      const Vector x = jpts.row(s).segment(0, spec.n).transpose();
      const Vector xh = jpts.row(s).segment(spec.n, spec.n).transpose();
      const Vector uh = jpts.row(s).segment(2 * spec.n, spec.m).transpose();
      const Vector u = spec.interface_fn(x, xh, uh);
      const Vector e = x - xh;
      const double lhs =
          e.dot(spec.Q.mat() * (spec.beta_fn(x) * u - nominal.beta_fn(xh) * uh));
      const double rhs = spec.theta * e.squaredNorm() + spec.rho(uh.norm());
      const double v = lhs - rhs;
      if (v > worst_if) {
        worst_if = v;
        worst_if_pt = jpts.row(s).transpose();
      }
    }
    const double if_tol = 1e-8 * std::max(1.0, qmax);
    if (worst_if > if_tol) {
      std::ostringstream os;
      os << "agent_storage_profile: interface condition fails by " << worst_if
         << " at (x, xhat, uhat) = [" << worst_if_pt.transpose() << "]";
      throw Error(ErrorCode::ConditionViolated, os.str());
    }
  }

  StorageProfile prof;
  prof.Q = spec.Q;
  prof.lambda = spec.lambda;
  prof.theta = spec.theta;
  prof.eps = eps;
  prof.eta = ParamK{2.0 * eps / qmax, 1};
  prof.nu = ParamK{0.5 * qmin, 2};
  prof.rho = spec.rho;
  prof.Xtilde = SupplyRate::passive(spec.p);
  prof.n = spec.n;
  prof.m = spec.m;
  prof.p = spec.p;
  prof.alpha_fn = spec.alpha_fn;
  prof.beta_fn = spec.beta_fn;
  prof.interface_fn = spec.interface_fn;

  const double denom = 4.0 * (std::abs(sum) - eps);
  const Matrix Qm = spec.Q.mat();
  auto agent_alpha = spec.alpha_fn;
  auto nominal_alpha = nominal.alpha_fn;
  prof.delta_fn = [Qm, agent_alpha, nominal_alpha, denom](const Vector& xhat) {
    return (Qm * (agent_alpha(xhat) - nominal_alpha(xhat))).squaredNorm() / denom;
  };
  return prof;
}

ParamK rollup_eta(const std::vector<ParamK>& etas) {
  if (etas.empty()) throw Error(ErrorCode::EmptyGroup, "rollup_eta: empty group");
  ParamK out{std::numeric_limits<double>::infinity(), etas.front().exponent};
  for (const auto& e : etas) {
    if (e.exponent != out.exponent)
      throw Error(ErrorCode::MixedExponents, "rollup_eta: mixed class-K exponents");
    out.coeff = std::min(out.coeff, e.coeff);
  }
  if (out.exponent != 1)
    throw Error(ErrorCode::MixedExponents, "rollup_eta: closed form requires linear eta");
  return out;
}

ParamK rollup_nu(const std::vector<ParamK>& nus) {
  if (nus.empty()) throw Error(ErrorCode::EmptyGroup, "rollup_nu: empty group");
  double inv_sum = 0.0;
  for (const auto& v : nus) {
    if (v.exponent != 2)
      throw Error(ErrorCode::MixedExponents, "rollup_nu: closed form requires quadratic nu");
    if (v.coeff <= 0.0) throw Error(ErrorCode::InvalidConfig, "rollup_nu: nu coeff must be > 0");
    inv_sum += 1.0 / v.coeff;
  }
  return ParamK{1.0 / inv_sum, 2};
}

ParamK rollup_rho(const std::vector<ParamK>& rhos) {
  ParamK out{0.0, 1};
  bool have_exp = false;
  for (const auto& r : rhos) {
    if (r.coeff == 0.0) continue;
    if (have_exp && r.exponent != out.exponent)
      throw Error(ErrorCode::MixedExponents, "rollup_rho: mixed class-K exponents");
    out.exponent = r.exponent;
    have_exp = true;
    out.coeff += r.coeff;
  }
  return out;
}

SubsystemCert group_subsystem(const std::vector<StorageProfile>& profiles) {
  if (profiles.empty()) throw Error(ErrorCode::EmptyGroup, "group_subsystem: empty group");
  const Index p = profiles.front().p;
  for (const auto& prof : profiles) {
    if (prof.p != p)
      throw Error(ErrorCode::DimensionMismatch, "group_subsystem: mixed internal-output sizes");
    if (!prof.Xtilde.full().isApprox(profiles.front().Xtilde.full(), 1e-12))
      throw Error(ErrorCode::ConditionViolated, "group_subsystem: supply rates differ in group");
  }
  const Index Li = static_cast<Index>(profiles.size());

  SubsystemCert cert;
  std::vector<ParamK> etas, nus, rhos;
  for (const auto& prof : profiles) {
    etas.push_back(prof.eta);
    nus.push_back(prof.nu);
    rhos.push_back(prof.rho);
  }
  cert.eta = rollup_eta(etas);
  cert.nu = rollup_nu(nus);
  cert.rho = rollup_rho(rhos);

  const SupplyRate& Xt = profiles.front().Xtilde;
  const Matrix I_L = Matrix::Identity(Li, Li);
  cert.X.X11 = kron(I_L, Xt.X11);
  cert.X.X12 = kron(I_L, Xt.X12);
  cert.X.X21 = kron(I_L, Xt.X21);
  cert.X.X22 = kron(I_L, Xt.X22);

  cert.W = Matrix::Identity(Li * p, Li * p);
  cert.What = kron(Matrix::Ones(Li, 1), Matrix::Identity(p, p));
  cert.H = cert.What;

  std::vector<std::function<double(const Vector&)>> deltas;
  for (const auto& prof : profiles) deltas.push_back(prof.delta_fn);
  cert.delta = [deltas](const Vector& xhat) {
    double s = 0.0;
    for (const auto& d : deltas) s += d(xhat);
    return s;
  };
  return cert;
}

std::string partition_to_dot(const Partition& part) {
  std::ostringstream os;
  os << "digraph groups {\n";
  for (int g = 0; g < part.N; ++g) {
    os << "  g" << g << " [label=\"group " << g + 1 << "\\n{";
    bool first = true;
    for (int l = 0; l < part.L; ++l)
      if (part.assign[static_cast<size_t>(l)] == g) {
        if (!first) os << ",";
        os << l + 1;
        first = false;
      }
    os << "}\"];\n";
  }
  for (int i = 0; i < part.N; ++i)
    for (int j = 0; j < part.N; ++j) {
      if (i == j || part.Mbar(i, j) == 0.0) continue;
      os << "  g" << j << " -> g" << i << " [label=\"" << part.Mbar(i, j) << "\"];\n";
    }
  os << "}\n";
  return os.str();
}

}  // namespace abstrakt
