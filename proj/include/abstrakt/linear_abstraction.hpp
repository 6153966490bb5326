#pragma once

#include "abstrakt/conic.hpp"
#include "abstrakt/types.hpp"

namespace abstrakt {

/// LTI plant  xdot = A x + B u,  y = C x.
struct LinearSystem {
  Matrix A, B, C;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index q() const { return C.rows(); }
  void validate() const;
};

/// PBH rank test on the unstable closed-right-half-plane eigenvalues.
bool is_stabilizable(const LinearSystem& sys, double sv_tol = 1e-9);

/// Abstraction data: xhatdot = Ahat xhat + Bhat uhat, yhat = Chat xhat,
/// related to the plant through the lift P. D is the fit residual
/// A P - P Ahat + B Q.
struct LinearAbstraction {
  Matrix P, Ahat, Bhat, Chat, Q, R, D;

  Index nhat() const { return P.cols(); }
  Index mhat() const { return Bhat.cols(); }
};

/// Truncation lift [I; 0].
Matrix truncation_lift(Index n, Index nhat);

/// Fit (Ahat, Q) minimizing ||A P - (P Ahat - B Q)||_F; Chat = C P and D is
/// the attained residual. Bhat and R are left for fit_input_map.
LinearAbstraction fit_abstraction(const LinearSystem& sys, const Matrix& P,
                                  double rank_tol = 1e-10);

/// R = argmin ||B R - P Bhat||_F (minimum-norm).
Matrix fit_input_map(const LinearSystem& sys, const Matrix& P, const Matrix& Bhat);

/// Practical-simulation-function data for the linear construction:
/// V(x, xhat) = (x - P xhat)' U (x - P xhat), with
///   nu(s)   = nu_coeff * s^2,
///   eta(s)  = alpha * s,
///   rho(s)  = alpha * s^2,
///   Delta(xhat) = alpha * ||D xhat||^2.
struct AbstractionCertificate {
  SymMatrix U;
  Matrix K;
  double alpha = 0.0;
  double beta = 0.0;
  double nu_coeff = 0.0;
  double eta_rate = 0.0;
  double rho_coeff = 0.0;
  Matrix delta_matrix;  // D
  double e_bar = 0.0;   // 1 / sqrt(lambda_min(U))
};

struct GainSynthOptions {
  double log10_alpha_lo = -4.0;
  double log10_alpha_hi = 4.0;
  double log10_alpha_tol = 0.05;
  int grid_points = 17;
  double z_min = 1e-6;  // floor on Z = U^{-1} keeping it invertible
  SolverOptions sdp{};
};

/// Gain synthesis for the error dynamics edot = (A + B K) e + W d with
/// ||d||_inf <= 1: minimizes the enclosing-ball radius of the invariant
/// ellipsoid over a bisection in alpha. W may have zero columns.
AbstractionCertificate synth_gain_for_disturbance(const LinearSystem& sys, const Matrix& W,
                                                  const GainSynthOptions& opts = {});

/// Standard disturbance shaping W = [I, B R - P Bhat], d = [D xhat; uhat].
AbstractionCertificate synth_gain(const LinearSystem& sys, const LinearAbstraction& abs,
                                  const GainSynthOptions& opts = {});

/// Interface u = K (x - P xhat) + Q xhat + R uhat.
Vector interface_refine(const Vector& x, const Vector& xhat, const Vector& uhat,
                        const LinearAbstraction& abs, const AbstractionCertificate& cert);

/// Comparison-lemma output-error envelope at time t from
/// vdot <= -alpha v + alpha (u_sup^2 + d_sup^2):
/// returns nu^{-1}(e^{-alpha t} V0 + (1 - e^{-alpha t})(u_sup^2 + d_sup^2)).
double error_bound(const AbstractionCertificate& cert, double V0, double u_hat_sup,
                   double Dx_hat_sup, double t);

/// The Optimization-Problem-1 constraint X(Z, Y, alpha) for verification.
Matrix opt1_constraint(const LinearSystem& sys, const Matrix& W, const Matrix& Z, const Matrix& Y,
                       double alpha);

}  // namespace abstrakt
