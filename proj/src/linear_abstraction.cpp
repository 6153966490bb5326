#include "abstrakt/linear_abstraction.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>

namespace abstrakt {

void LinearSystem::validate() const {
  if (A.rows() != A.cols()) throw Error(ErrorCode::DimensionMismatch, "LinearSystem: A not square");
  if (B.rows() != A.rows())
    throw Error(ErrorCode::DimensionMismatch, "LinearSystem: B row count != n");
  if (C.cols() != A.rows())
    throw Error(ErrorCode::DimensionMismatch, "LinearSystem: C column count != n");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite())
    throw Error(ErrorCode::NonFinite, "LinearSystem: non-finite entries");
}

bool is_stabilizable(const LinearSystem& sys, double sv_tol) {
  sys.validate();
  const Index n = sys.n();
  Eigen::EigenSolver<Matrix> es(sys.A);
  for (Index i = 0; i < n; ++i) {
    const std::complex<double> lam = es.eigenvalues()[i];
    if (lam.real() < 0.0) continue;
    // [A - lam I, B] must have full row rank at every unstable eigenvalue.
    Eigen::MatrixXcd pencil(n, n + sys.m());
    pencil.leftCols(n) = sys.A.cast<std::complex<double>>();
    pencil.leftCols(n).diagonal().array() -= lam;
    pencil.rightCols(sys.m()) = sys.B.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
    if (svd.singularValues().minCoeff() < sv_tol * std::max(1.0, svd.singularValues().maxCoeff()))
      return false;
  }
  return true;
}

Matrix truncation_lift(Index n, Index nhat) {
  if (nhat > n) throw Error(ErrorCode::DimensionMismatch, "truncation_lift: nhat > n");
  Matrix P = Matrix::Zero(n, nhat);
  P.topRows(nhat).setIdentity();
  return P;
}

LinearAbstraction fit_abstraction(const LinearSystem& sys, const Matrix& P, double rank_tol) {
  sys.validate();
  const Index n = sys.n();
  if (P.rows() != n) throw Error(ErrorCode::DimensionMismatch, "fit_abstraction: P rows != n");
  const Index nhat = P.cols();

  Eigen::JacobiSVD<Matrix> svd(P);
  if (svd.rank() < nhat ||
      svd.singularValues().minCoeff() < rank_tol * std::max(1.0, svd.singularValues().maxCoeff()))
    throw Error(ErrorCode::RankDeficient, "fit_abstraction: P is not full column rank");

  // A P = P Ahat - B Q relaxed: stack G = [P, -B] and solve min ||G X - A P||.
  Matrix G(n, nhat + sys.m());
  G.leftCols(nhat) = P;
  G.rightCols(sys.m()) = -sys.B;
  const Matrix T = sys.A * P;
  const Matrix X = solve_least_squares(G, T);

  LinearAbstraction abs;
  abs.P = P;
  abs.Ahat = X.topRows(nhat);
  abs.Q = X.bottomRows(sys.m());
  abs.D = T - G * X;  // = A P - P Ahat + B Q
  abs.Chat = sys.C * P;
  return abs;
}

Matrix fit_input_map(const LinearSystem& sys, const Matrix& P, const Matrix& Bhat) {
  sys.validate();
  if (P.rows() != sys.n() || Bhat.rows() != P.cols())
    throw Error(ErrorCode::DimensionMismatch, "fit_input_map: inconsistent P/Bhat");
  if (sys.B.cols() == 0) return Matrix::Zero(0, Bhat.cols());
  if ((sys.B.array() == 0.0).all()) return Matrix::Zero(sys.m(), Bhat.cols());
  return solve_least_squares(sys.B, P * Bhat);
}

Matrix opt1_constraint(const LinearSystem& sys, const Matrix& W, const Matrix& Z, const Matrix& Y,
                       double alpha) {
  const Index n = sys.n();
  const Index nd = W.cols();
  Matrix X = Matrix::Zero(n + nd, n + nd);
  X.topLeftCorner(n, n) = sys.A * Z + Z * sys.A.transpose() + Y.transpose() * sys.B.transpose() +
                          sys.B * Y + alpha * Z;
  X.topRightCorner(n, nd) = W;
  X.bottomLeftCorner(nd, n) = W.transpose();
  X.bottomRightCorner(nd, nd) = -alpha * Matrix::Identity(nd, nd);
  return X;
}

namespace {

// Symmetric basis element for the upper-triangle parameterization of Z.
Matrix sym_basis(Index i, Index j, Index n) {
  Matrix E = Matrix::Zero(n, n);
  E(i, j) = 1.0;
  E(j, i) = 1.0;
  return E;
}

struct Opt1Encoding {
  LmiProblem problem;
  std::vector<std::pair<Index, Index>> z_index;
  Index ny = 0;
};

// Variables: upper triangle of Z, entries of Y (row-major), beta.
Opt1Encoding encode_opt1(const LinearSystem& sys, const Matrix& W, double alpha, double z_min) {
  const Index n = sys.n();
  const Index m = sys.m();
  const Index nd = W.cols();
  Opt1Encoding enc;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) enc.z_index.emplace_back(i, j);
  const Index nz = static_cast<Index>(enc.z_index.size());
  enc.ny = m * n;
  const Index nv = nz + enc.ny + 1;

  LmiProblem& p = enc.problem;
  p.num_vars = nv;
  p.objective = Vector::Zero(nv);
  p.objective[nv - 1] = 1.0;  // minimize beta

  // Block 1: X(Z, Y, alpha) <= 0.
  LmiProblem::Block b1;
  const Index N = n + nd;
  b1.F0 = Matrix::Zero(N, N);
  b1.F0.topRightCorner(n, nd) = W;
  b1.F0.bottomLeftCorner(nd, n) = W.transpose();
  b1.F0.bottomRightCorner(nd, nd) = -alpha * Matrix::Identity(nd, nd);
  b1.Fi.reserve(nv);
  for (const auto& [i, j] : enc.z_index) {
    const Matrix E = sym_basis(i, j, n);
    Matrix F = Matrix::Zero(N, N);
    Matrix top = sys.A * E + E * sys.A.transpose() + alpha * E;
    F.topLeftCorner(n, n) = 0.5 * (top + top.transpose());
    b1.Fi.push_back(std::move(F));
  }
  for (Index r = 0; r < m; ++r)
    for (Index c = 0; c < n; ++c) {
      Matrix F = Matrix::Zero(N, N);
      Matrix BY = sys.B.col(r) * Matrix::Identity(n, n).row(c);
      F.topLeftCorner(n, n) = BY + BY.transpose();
      b1.Fi.push_back(std::move(F));
    }
  b1.Fi.push_back(Matrix::Zero(N, N));
  p.blocks.push_back(std::move(b1));

  // Block 2: Z - beta I <= 0.
  LmiProblem::Block b2;
  b2.F0 = Matrix::Zero(n, n);
  for (const auto& [i, j] : enc.z_index) b2.Fi.push_back(sym_basis(i, j, n));
  for (Index k = 0; k < enc.ny; ++k) b2.Fi.push_back(Matrix::Zero(n, n));
  b2.Fi.push_back(-Matrix::Identity(n, n));
  p.blocks.push_back(std::move(b2));

  // Block 3: z_min I - Z <= 0 keeps Z invertible.
  LmiProblem::Block b3;
  b3.F0 = z_min * Matrix::Identity(n, n);
  for (const auto& [i, j] : enc.z_index) b3.Fi.push_back(-sym_basis(i, j, n));
  for (Index k = 0; k < enc.ny; ++k) b3.Fi.push_back(Matrix::Zero(n, n));
  b3.Fi.push_back(Matrix::Zero(n, n));
  p.blocks.push_back(std::move(b3));
  return enc;
}

struct GainSolve {
  Matrix Z, Y;
  double beta = 0.0;
};

}  // namespace

AbstractionCertificate synth_gain_for_disturbance(const LinearSystem& sys, const Matrix& W,
                                                  const GainSynthOptions& opts) {
  sys.validate();
  if (W.rows() != sys.n())
    throw Error(ErrorCode::DimensionMismatch, "synth_gain: W row count != n");
  if (!is_stabilizable(sys))
    throw Error(ErrorCode::NotStabilizable, "synth_gain: (A, B) is not stabilizable");

  const Index n = sys.n();
  const Index m = sys.m();

  auto oracle = [&](double log10_alpha) -> OracleEval<GainSolve> {
    const double alpha = std::pow(10.0, log10_alpha);
    Opt1Encoding enc = encode_opt1(sys, W, alpha, opts.z_min);
    SdpSolution s = solve_sdp(enc.problem, opts.sdp);
    OracleEval<GainSolve> out;
    if (s.status != SdpSolution::Status::Optimal) return out;
    out.feasible = true;
    out.value = s.objective_value;
    const Index nz = static_cast<Index>(enc.z_index.size());
    out.payload.Z = Matrix::Zero(n, n);
    for (Index k = 0; k < nz; ++k) {
      const auto [i, j] = enc.z_index[k];
      out.payload.Z(i, j) = s.x[k];
      out.payload.Z(j, i) = s.x[k];
    }
    out.payload.Y = Matrix::Zero(m, n);
    for (Index r = 0; r < m; ++r)
      for (Index c = 0; c < n; ++c) out.payload.Y(r, c) = s.x[nz + r * n + c];
    out.payload.beta = s.objective_value;
    return out;
  };

  BisectResult<GainSolve> best;
  try {
    best = bisect_feasibility(opts.log10_alpha_lo, opts.log10_alpha_hi, oracle,
                              opts.log10_alpha_tol, opts.grid_points);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Infeasible)
      throw Error(ErrorCode::Infeasible,
                  "synth_gain: Optimization Problem 1 infeasible for every alpha in the grid");
    throw;
  }

  AbstractionCertificate cert;
  cert.alpha = std::pow(10.0, best.alpha_star);
  cert.beta = best.value;
  const Matrix& Z = best.payload.Z;
  Matrix U = Z.inverse();
  U = 0.5 * (U + U.transpose());
  cert.U = SymMatrix(U);
  cert.K = best.payload.Y * U;

  Eigen::SelfAdjointEigenSolver<Matrix> esU(U, Eigen::EigenvaluesOnly);
  const double lam_min_U = esU.eigenvalues().minCoeff();
  if (lam_min_U <= 0.0)
    throw Error(ErrorCode::NoConvergence, "synth_gain: returned U is not positive definite");
  cert.e_bar = 1.0 / std::sqrt(lam_min_U);
  cert.eta_rate = cert.alpha;
  cert.rho_coeff = cert.alpha;

  const Matrix CtC = sys.C.transpose() * sys.C;
  Eigen::SelfAdjointEigenSolver<Matrix> esC(CtC, Eigen::EigenvaluesOnly);
  const double lam_max_C = esC.eigenvalues().maxCoeff();
  cert.nu_coeff = lam_max_C > 0.0 ? lam_min_U / lam_max_C : lam_min_U;
  return cert;
}

AbstractionCertificate synth_gain(const LinearSystem& sys, const LinearAbstraction& abs,
                                  const GainSynthOptions& opts) {
  const Index n = sys.n();
  Matrix W(n, n + abs.mhat());
  W.leftCols(n).setIdentity();
  if (abs.mhat() > 0) W.rightCols(abs.mhat()) = sys.B * abs.R - abs.P * abs.Bhat;
  AbstractionCertificate cert = synth_gain_for_disturbance(sys, W, opts);
  cert.delta_matrix = abs.D;
  return cert;
}

Vector interface_refine(const Vector& x, const Vector& xhat, const Vector& uhat,
                        const LinearAbstraction& abs, const AbstractionCertificate& cert) {
  Vector u = cert.K * (x - abs.P * xhat) + abs.Q * xhat;
  if (abs.R.size() > 0 && uhat.size() > 0) u += abs.R * uhat;
  return u;
}

double error_bound(const AbstractionCertificate& cert, double V0, double u_hat_sup,
                   double Dx_hat_sup, double t) {
  if (V0 < 0.0 || u_hat_sup < 0.0 || Dx_hat_sup < 0.0 || t < 0.0)
    throw Error(ErrorCode::InvalidConfig, "error_bound: arguments must be nonnegative");
  const double decay = std::exp(-cert.alpha * t);
  const double steady = u_hat_sup * u_hat_sup + Dx_hat_sup * Dx_hat_sup;
  const double v_bound = decay * V0 + (1.0 - decay) * steady;
  return std::sqrt(v_bound / cert.nu_coeff);
}

}  // namespace abstrakt
