#pragma once

#include "abstrakt/conic.hpp"
#include "abstrakt/types.hpp"

#include <functional>
#include <vector>

namespace abstrakt {

/// Parametric class-K function c * s^p with p in {1, 2}; coeff 0 encodes
/// the zero function (allowed for rho).
struct ParamK {
  double coeff = 0.0;
  int exponent = 1;

  double operator()(double s) const {
    return exponent == 1 ? coeff * s : coeff * s * s;
  }
};

/// Quadratic supply-rate block structure
/// [w_cmp; y_cmp]' [X11 X12; X21 X22] [w_cmp; y_cmp].
struct SupplyRate {
  Matrix X11, X12, X21, X22;

  static SupplyRate passive(Index p);  // (1/2) [0 I; I 0]
  Matrix full() const;
  void validate() const;
};

/// Per-subsystem practical storage-function data: the dissipativity
/// inequality holds with comparison matrices (W, What, H), supply rate X,
/// and gain functions (nu, eta, rho, delta).
struct SubsystemCert {
  Matrix W, What, H;
  SupplyRate X;
  ParamK nu, eta, rho;
  std::function<double(const Vector&)> delta;  // Delta_i(xhat_i) >= 0
  Matrix delta_quad;                           // optional matrix form y'My

  Index r() const { return W.rows(); }      // compared internal-input size
  Index p() const { return W.cols(); }      // internal input size
  Index phat() const { return What.cols(); }
  Index q2() const { return H.rows(); }     // internal output size
  Index q2hat() const { return H.cols(); }
  void validate() const;
};

/// Block matrices of the interconnected certificate.
struct GlobalAssembly {
  Matrix W, What, H, X;
  std::vector<Index> r_dims, q2_dims, q2hat_dims;

  Index total_r() const;
  Index total_q2() const;
  Index total_q2hat() const;
};

/// diag(W_i), diag(What_i), diag(H_i) and the interleaved
/// [diag(mu_i X11_i), diag(mu_i X12_i); diag(mu_i X21_i), diag(mu_i X22_i)].
GlobalAssembly assemble_global(const std::vector<SubsystemCert>& certs, const Vector& mu);

struct CouplingFit {
  Matrix Mhat;  // least-squares minimizer of ||W M H - What Mhat||_F
  Matrix Y;     // attained residual
};

CouplingFit fit_coupling(const Matrix& W, const Matrix& M, const Matrix& H, const Matrix& What);

/// Q(Z, mu) = [Y, WM; 0, I]' X [Y, WM; 0, I] - [Z 0; 0 0], with X already
/// mu-weighted.
Matrix assemble_Q(const Matrix& Xglobal, const Matrix& Y, const Matrix& WM, const Matrix& Z);

struct ComposedCert {
  Vector mu;
  SymMatrix Z;
  Matrix Y;
  Matrix Mhat;
  GlobalAssembly global;
  double objective = 0.0;
  double q_max_eig = 0.0;
};

struct RelaxOptions {
  Vector pin_mu;  // empty: mu free with mu_i >= 1
  Vector s_scale; // diagonal of S per abstract internal output; empty: ones
  Vector r_scale; // weights r_i; empty: ones
  SolverOptions sdp{};
};

/// Relaxed-coupling feasibility/optimization: minimize
/// tr(S^{-T} Z S^{-1}) + sum mu_i / r_i over Z >= 0, mu_i >= 1 subject to
/// Q(Z, mu) <= 0. Throws Error(Infeasible) with the null-space diagnosis
/// when no PSD Z exists.
ComposedCert solve_relaxed(const Matrix& Y, const Matrix& W, const Matrix& M,
                           const std::vector<SubsystemCert>& certs,
                           const RelaxOptions& opts = {});

/// Delta(xhat) = h2hat' Z h2hat + sum_i mu_i Delta_i.
double delta_global(const ComposedCert& cert, const Vector& h2hat_values,
                    const Vector& delta_i_values);

struct ExistsZ {
  bool exists = false;
  SymMatrix witness;  // (1/phi) B B' with B = (1/2) Ybar', when exists
  double phi = 0.0;
};

/// Existence of Z = Z' >= 0 with [[-Z, B],[B', C]] <= 0 for B = Ybar'/2,
/// C = (Mtilde + Mtilde')/2: holds iff every null vector of Mtilde+Mtilde'
/// is annihilated by Ybar'. Requires Mtilde + Mtilde' <= 0.
ExistsZ exists_Z(const Matrix& Mtilde, const Matrix& Ybar, double null_tol = 1e-9,
                 double annihilate_tol = 1e-8);

/// Generic sampled verifier for dissipation inequalities
///   dV/dx f(x, v(x,xh,uh), w) + dV/dxh fhat(xh, uh, wh) <= rhs_bound(...)
/// over a box in the concatenated (x, xh, uh, w, wh) coordinates.
struct DissipationProblem {
  Index n = 0, nhat = 0, mhat = 0, p = 0, phat = 0;
  std::function<Vector(const Vector& x, const Vector& u, const Vector& w)> f;
  std::function<Vector(const Vector& xh, const Vector& uh, const Vector& wh)> fhat;
  std::function<Vector(const Vector& x, const Vector& xh, const Vector& uh)> interface_fn;
  std::function<double(const Vector& x, const Vector& xh)> V;
  // Gradient w.r.t. [x; xh]; empty -> central differences.
  std::function<Vector(const Vector& x, const Vector& xh)> gradV;
  std::function<double(double V, const Vector& x, const Vector& xh, const Vector& uh,
                       const Vector& w, const Vector& wh)>
      rhs_bound;
};

struct DissipationCheck {
  double max_violation = 0.0;
  Vector worst_point;
  bool pass = false;
};

DissipationCheck check_dissipation_samples(const DissipationProblem& prob, const Vector& box_lo,
                                           const Vector& box_hi, int n_samples, double tol,
                                           uint64_t seed = 0);

}  // namespace abstrakt
