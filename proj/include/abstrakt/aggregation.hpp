#pragma once

#include "abstrakt/composition.hpp"
#include "abstrakt/types.hpp"

#include <functional>
#include <vector>

namespace abstrakt {

/// L x N binary partition matrix from a 0-based group assignment.
Matrix partition_matrix(const std::vector<int>& assign, int num_groups);

/// Closed-form optimal group coupling: entry (i, j) is the mean over the
/// group-i rows of column j of Mtilde * P. Minimizes ||Mtilde P - P Mbar||_F
/// exactly.
Matrix optimal_group_coupling(const Matrix& Mtilde, const std::vector<int>& assign,
                              int num_groups);

struct EquitableReport {
  bool equitable = false;
  Matrix Mbar;
  double residual_norm = 0.0;
};

EquitableReport is_equitable(const Matrix& Mtilde, const std::vector<int>& assign, int num_groups,
                             double tol = 1e-9);

/// Hand-picked group memberships; agents not pre-assigned are free.
struct PreAssignment {
  std::vector<int> assign;  // length L, group index or -1 when free

  static PreAssignment none(int L) { return {std::vector<int>(static_cast<size_t>(L), -1)}; }
  Matrix Pbar(int num_groups) const;  // zero rows for free agents
  Matrix T(int num_groups) const;     // diag of pre-assigned counts
};

struct Partition {
  int L = 0;
  int N = 0;
  std::vector<int> assign;
  Matrix P;
  Matrix Mbar;
  Matrix Ybar;
  double residual_norm = 0.0;
  bool exact = true;  // false when the local-search fallback was used
};

struct PartitionSearchOptions {
  // Exhaustive-search leaf budget before switching to the greedy +
  // local-search fallback.
  uint64_t max_leaves = 5'000'000;
  int local_search_rounds = 200;
};

/// Minimize ||Mtilde P - P Mbar||_F over partitions respecting the
/// pre-assignment, with the closed-form inner Mbar. Exact search enumerates
/// assignment vectors in lexicographic order (pruning relabelings of groups
/// without pre-assigned members), so ties return the lexicographically
/// smallest assignment.
Partition partition_search(const Matrix& Mtilde, const PreAssignment& pre, int num_groups,
                           const PartitionSearchOptions& opts = {});

/// Finalize a Partition record for a known assignment.
Partition make_partition(const Matrix& Mtilde, const std::vector<int>& assign, int num_groups);

/// Heterogeneous agent  xdot = alpha_l(x) + beta_l(x) u + B w,  y2 = C x,
/// with the candidate storage data (Q, lambda, theta, eps) to be verified.
struct AgentSpec {
  Index n = 0, m = 0, p = 0;
  std::function<Vector(const Vector&)> alpha_fn;
  std::function<Matrix(const Vector&)> alpha_jac;  // optional; else central differences
  std::function<Matrix(const Vector&)> beta_fn;
  Matrix B;  // n x p
  Matrix C;  // p x n
  SymMatrix Q;
  double lambda = 0.0;
  double theta = 0.0;
  double eps = -1.0;  // <= 0 picks the default |lambda + theta| / 2
  ParamK rho{0.0, 1};
  std::function<Vector(const Vector& x, const Vector& xhat, const Vector& uhat)> interface_fn;
};

/// Nominal model shared by the abstraction.
struct NominalModel {
  std::function<Vector(const Vector&)> alpha_fn;
  std::function<Matrix(const Vector&)> beta_fn;
};

struct SampleBox {
  Vector state_lo, state_hi;  // box for the drift-Jacobian condition
  Vector input_lo, input_hi;  // abstract-input box for the interface condition
  int count = 1000;
};

/// Verified per-agent storage data: Vtilde = (1/2)(x - xhat)' Q (x - xhat),
/// eta linear, nu quadratic, delta from the drift mismatch, passive supply
/// rate.
struct StorageProfile {
  SymMatrix Q;
  double lambda = 0.0, theta = 0.0, eps = 0.0;
  ParamK eta, nu, rho;
  std::function<double(const Vector&)> delta_fn;
  SupplyRate Xtilde;
  Index n = 0, m = 0, p = 0;
  std::function<Vector(const Vector&)> alpha_fn;
  std::function<Matrix(const Vector&)> beta_fn;
  std::function<Vector(const Vector&, const Vector&, const Vector&)> interface_fn;
};

/// Check the storage conditions by sampling (Sobol points over the supplied
/// boxes; exact for affine drift) and build the profile. Throws
/// Error(ConditionViolated) naming the failed condition and worst sample.
StorageProfile agent_storage_profile(const AgentSpec& spec, const NominalModel& nominal,
                                     const SampleBox& box);

/// Group roll-up: eta_i slope = min, nu_i via series combination, rho_i and
/// delta_i summed, passive supply rate of size L_i * p, W_i = I,
/// What_i = H_i = ones kron I_p.
SubsystemCert group_subsystem(const std::vector<StorageProfile>& profiles);

/// Closed-form parametric roll-ups (all slopes must share the exponent).
ParamK rollup_eta(const std::vector<ParamK>& etas);
ParamK rollup_nu(const std::vector<ParamK>& nus);
ParamK rollup_rho(const std::vector<ParamK>& rhos);

/// DOT rendering of the grouped interconnection (groups as nodes, Mbar
/// entries as edges).
std::string partition_to_dot(const Partition& part);

}  // namespace abstrakt
