#include "abstrakt/composition.hpp"

#include "abstrakt/rng.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace abstrakt {

SupplyRate SupplyRate::passive(Index p) {
  SupplyRate x;
  x.X11 = Matrix::Zero(p, p);
  x.X12 = 0.5 * Matrix::Identity(p, p);
  x.X21 = 0.5 * Matrix::Identity(p, p);
  x.X22 = Matrix::Zero(p, p);
  return x;
}

Matrix SupplyRate::full() const {
  Matrix X(X11.rows() + X21.rows(), X11.cols() + X12.cols());
  X << X11, X12, X21, X22;
  return X;
}

void SupplyRate::validate() const {
  if (X11.rows() != X11.cols() || X22.rows() != X22.cols())
    throw Error(ErrorCode::DimensionMismatch, "SupplyRate: diagonal blocks must be square");
  if (X12.rows() != X11.rows() || X12.cols() != X22.cols() || X21.rows() != X22.rows() ||
      X21.cols() != X11.cols())
    throw Error(ErrorCode::DimensionMismatch, "SupplyRate: off-diagonal block shapes");
  if (!X11.isApprox(X11.transpose(), 1e-12) || !X22.isApprox(X22.transpose(), 1e-12) ||
      !X21.isApprox(X12.transpose(), 1e-12))
    throw Error(ErrorCode::ConditionViolated, "SupplyRate: X must be symmetric (X21 = X12')");
}

void SubsystemCert::validate() const {
  X.validate();
  if (X.X11.rows() != W.rows())
    throw Error(ErrorCode::DimensionMismatch, "SubsystemCert: X11 order != rows of W");
  if (What.rows() != W.rows())
    throw Error(ErrorCode::DimensionMismatch, "SubsystemCert: What rows != W rows");
  if (X.X22.rows() != H.rows())
    throw Error(ErrorCode::DimensionMismatch, "SubsystemCert: X22 order != rows of H");
}

Index GlobalAssembly::total_r() const {
  Index s = 0;
  for (Index d : r_dims) s += d;
  return s;
}
Index GlobalAssembly::total_q2() const {
  Index s = 0;
  for (Index d : q2_dims) s += d;
  return s;
}
Index GlobalAssembly::total_q2hat() const {
  Index s = 0;
  for (Index d : q2hat_dims) s += d;
  return s;
}

namespace {

Matrix block_diag(const std::vector<Matrix>& blocks) {
  Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

// The interleaved mu-weighted X; weights may be zero here (used to isolate
// one subsystem's contribution).
Matrix assemble_X_weights(const std::vector<SubsystemCert>& certs, const Vector& mu) {
  std::vector<Matrix> X11s, X12s, X21s, X22s;
  for (size_t i = 0; i < certs.size(); ++i) {
    const double m = mu[static_cast<Index>(i)];
    X11s.push_back(m * certs[i].X.X11);
    X12s.push_back(m * certs[i].X.X12);
    X21s.push_back(m * certs[i].X.X21);
    X22s.push_back(m * certs[i].X.X22);
  }
  const Matrix T11 = block_diag(X11s), T12 = block_diag(X12s);
  const Matrix T21 = block_diag(X21s), T22 = block_diag(X22s);
  Matrix X = Matrix::Zero(T11.rows() + T21.rows(), T11.cols() + T12.cols());
  X << T11, T12, T21, T22;
  return X;
}

}  // namespace

GlobalAssembly assemble_global(const std::vector<SubsystemCert>& certs, const Vector& mu) {
  if (static_cast<Index>(certs.size()) != mu.size())
    throw Error(ErrorCode::DimensionMismatch, "assemble_global: |mu| != number of subsystems");
  if ((mu.array() <= 0.0).any())
    throw Error(ErrorCode::InvalidConfig, "assemble_global: mu must be positive");

  GlobalAssembly g;
  std::vector<Matrix> Ws, Whats, Hs;
  for (size_t i = 0; i < certs.size(); ++i) {
    certs[i].validate();
    Ws.push_back(certs[i].W);
    Whats.push_back(certs[i].What);
    Hs.push_back(certs[i].H);
    g.r_dims.push_back(certs[i].r());
    g.q2_dims.push_back(certs[i].q2());
    g.q2hat_dims.push_back(certs[i].q2hat());
  }
  g.W = block_diag(Ws);
  g.What = block_diag(Whats);
  g.H = block_diag(Hs);
  g.X = assemble_X_weights(certs, mu);
  return g;
}

CouplingFit fit_coupling(const Matrix& W, const Matrix& M, const Matrix& H, const Matrix& What) {
  if (W.cols() != M.rows() || M.cols() != H.rows())
    throw Error(ErrorCode::DimensionMismatch, "fit_coupling: W M H dimensions do not chain");
  const Matrix target = W * M * H;
  if (What.rows() != target.rows())
    throw Error(ErrorCode::DimensionMismatch, "fit_coupling: What rows != rows of W M H");
  CouplingFit fit;
  fit.Mhat = solve_least_squares(What, target);
  fit.Y = target - What * fit.Mhat;
  return fit;
}

Matrix assemble_Q(const Matrix& Xglobal, const Matrix& Y, const Matrix& WM, const Matrix& Z) {
  const Index q2 = WM.cols();
  const Index q2hat = Y.cols();
  if (Y.rows() != WM.rows())
    throw Error(ErrorCode::DimensionMismatch, "assemble_Q: Y and WM row mismatch");
  if (Xglobal.rows() != Y.rows() + q2)
    throw Error(ErrorCode::DimensionMismatch, "assemble_Q: X order != rows(Y) + q2");
  if (Z.rows() != q2hat || Z.cols() != q2hat)
    throw Error(ErrorCode::DimensionMismatch, "assemble_Q: Z order != q2hat");
  Matrix T = Matrix::Zero(Y.rows() + q2, q2hat + q2);
  T.topLeftCorner(Y.rows(), q2hat) = Y;
  T.topRightCorner(Y.rows(), q2) = WM;
  T.bottomRightCorner(q2, q2).setIdentity();
  Matrix Q = T.transpose() * Xglobal * T;
  Q.topLeftCorner(q2hat, q2hat) -= Z;
  return 0.5 * (Q + Q.transpose());
}

namespace {

Matrix sym_basis(Index i, Index j, Index n) {
  Matrix E = Matrix::Zero(n, n);
  E(i, j) = 1.0;
  E(j, i) = 1.0;
  return E;
}

Matrix clip_psd(const Matrix& Z) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (Z + Z.transpose()));
  Vector lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

ComposedCert solve_relaxed(const Matrix& Y, const Matrix& W, const Matrix& M,
                           const std::vector<SubsystemCert>& certs, const RelaxOptions& opts) {
  const Index N = static_cast<Index>(certs.size());
  if (N == 0) throw Error(ErrorCode::InvalidConfig, "solve_relaxed: no subsystems");
  const bool pinned = opts.pin_mu.size() > 0;
  if (pinned && opts.pin_mu.size() != N)
    throw Error(ErrorCode::DimensionMismatch, "solve_relaxed: pin_mu size != N");

  const Matrix WM = W * M;
  if (WM.rows() != Y.rows())
    throw Error(ErrorCode::DimensionMismatch, "solve_relaxed: Y rows != rows of W M");

  const Index q2hat = Y.cols();
  Vector r = opts.r_scale.size() ? opts.r_scale : Vector::Ones(N);
  Vector s = opts.s_scale.size() ? opts.s_scale : Vector::Ones(q2hat);
  if (r.size() != N) throw Error(ErrorCode::DimensionMismatch, "solve_relaxed: r size != N");
  if (s.size() != q2hat)
    throw Error(ErrorCode::DimensionMismatch, "solve_relaxed: S diagonal size != q2hat");
  if ((r.array() <= 0.0).any() || (s.array() <= 0.0).any())
    throw Error(ErrorCode::InvalidConfig, "solve_relaxed: S and r must be positive");

  // Per-subsystem constraint contribution: Q is affine in mu through
  // X(mu_1 X_1, ..., mu_N X_N).
  std::vector<Matrix> Qi(N);
  for (Index i = 0; i < N; ++i) {
    Vector e = Vector::Zero(N);
    e[i] = 1.0;
    Qi[i] = assemble_Q(assemble_X_weights(certs, e), Y, WM, Matrix::Zero(q2hat, q2hat));
  }

  std::vector<std::pair<Index, Index>> z_index;
  for (Index i = 0; i < q2hat; ++i)
    for (Index j = i; j < q2hat; ++j) z_index.emplace_back(i, j);
  const Index nz = static_cast<Index>(z_index.size());
  const Index num_mu = pinned ? 0 : N;
  const Index nv = nz + num_mu;

  LmiProblem p;
  p.num_vars = nv;
  p.objective = Vector::Zero(nv);
  for (Index k = 0; k < nz; ++k) {
    const auto [i, j] = z_index[k];
    if (i == j) p.objective[k] = 1.0 / (s[i] * s[i]);  // tr(S^{-T} Z S^{-1})
  }

  // Block 1: Q(Z, mu) <= 0.
  LmiProblem::Block b1;
  const Index ord = Qi[0].rows();
  b1.F0 = Matrix::Zero(ord, ord);
  if (pinned)
    for (Index i = 0; i < N; ++i) b1.F0 += opts.pin_mu[i] * Qi[i];
  b1.Fi.reserve(nv);
  for (Index k = 0; k < nz; ++k) {
    const auto [i, j] = z_index[k];
    Matrix F = Matrix::Zero(ord, ord);
    F.topLeftCorner(q2hat, q2hat) = -sym_basis(i, j, q2hat);
    b1.Fi.push_back(std::move(F));
  }
  if (!pinned)
    for (Index i = 0; i < N; ++i) b1.Fi.push_back(Qi[i]);
  p.blocks.push_back(std::move(b1));

  // Block 2: -Z <= 0.
  LmiProblem::Block b2;
  b2.F0 = Matrix::Zero(q2hat, q2hat);
  for (Index k = 0; k < nz; ++k) {
    const auto [i, j] = z_index[k];
    b2.Fi.push_back(-sym_basis(i, j, q2hat));
  }
  for (Index k = 0; k < num_mu; ++k) b2.Fi.push_back(Matrix::Zero(q2hat, q2hat));
  p.blocks.push_back(std::move(b2));

  if (!pinned) {
    for (Index i = 0; i < N; ++i) p.objective[nz + i] = 1.0 / r[i];
    Vector lb = Vector::Constant(nv, -std::numeric_limits<double>::infinity());
    lb.tail(N).setOnes();  // mu_i >= 1
    p.var_lower_bounds = lb;
  }

  SdpSolution sol = solve_sdp(p, opts.sdp);
  if (sol.status == SdpSolution::Status::Infeasible) {
    std::ostringstream os;
    os << "solve_relaxed: no PSD Z satisfies the relaxed coupling inequality "
          "(a null vector of M + M' is not annihilated by the residual Y'); "
       << sol.message;
    throw Error(ErrorCode::Infeasible, os.str());
  }
  if (sol.status == SdpSolution::Status::MaxIter)
    throw Error(ErrorCode::NoConvergence, "solve_relaxed: solver did not converge: " + sol.message);

  ComposedCert cert;
  Matrix Z = Matrix::Zero(q2hat, q2hat);
  for (Index k = 0; k < nz; ++k) {
    const auto [i, j] = z_index[k];
    Z(i, j) = sol.x[k];
    Z(j, i) = sol.x[k];
  }
  // Enlarging Z only helps Q(Z, mu) <= 0, so PSD clipping is safe.
  cert.Z = SymMatrix(clip_psd(Z));
  cert.mu = pinned ? opts.pin_mu : Vector(sol.x.tail(N));
  cert.Y = Y;
  cert.global = assemble_global(certs, cert.mu);
  cert.objective = sol.objective_value;
  Eigen::SelfAdjointEigenSolver<Matrix> es(assemble_Q(cert.global.X, Y, WM, cert.Z.mat()),
                                           Eigen::EigenvaluesOnly);
  cert.q_max_eig = es.eigenvalues().maxCoeff();
  return cert;
}

double delta_global(const ComposedCert& cert, const Vector& h2hat_values,
                    const Vector& delta_i_values) {
  if (h2hat_values.size() != cert.Z.order())
    throw Error(ErrorCode::DimensionMismatch, "delta_global: h2hat size != order of Z");
  if (delta_i_values.size() != cert.mu.size())
    throw Error(ErrorCode::DimensionMismatch, "delta_global: delta values size != N");
  return h2hat_values.dot(cert.Z.mat() * h2hat_values) + cert.mu.dot(delta_i_values);
}

ExistsZ exists_Z(const Matrix& Mtilde, const Matrix& Ybar, double null_tol,
                 double annihilate_tol) {
  if (Mtilde.rows() != Mtilde.cols())
    throw Error(ErrorCode::DimensionMismatch, "exists_Z: Mtilde not square");
  if (Ybar.rows() != Mtilde.rows())
    throw Error(ErrorCode::DimensionMismatch, "exists_Z: Ybar rows != order of Mtilde");
  const Matrix Msym = Mtilde + Mtilde.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(Msym);
  if (es.eigenvalues().maxCoeff() > null_tol)
    throw Error(ErrorCode::ConditionViolated, "exists_Z: M + M' has a positive eigenvalue");

  ExistsZ out;
  out.exists = true;
  for (Index i = 0; i < Msym.rows(); ++i) {
    if (std::abs(es.eigenvalues()[i]) > null_tol) continue;
    const Vector v = es.eigenvectors().col(i);
    if ((Ybar.transpose() * v).norm() > annihilate_tol) {
      out.exists = false;
      break;
    }
  }
  if (!out.exists) return out;

  // Constructive witness Z = (1/phi) B B' with B = Ybar'/2 and phi the
  // smallest nonzero eigenvalue of -(M + M')/2.
  double phi = 0.0;
  for (Index i = 0; i < Msym.rows(); ++i) {
    const double lam = -0.5 * es.eigenvalues()[i];
    if (lam > 0.5 * null_tol && (phi == 0.0 || lam < phi)) phi = lam;
  }
  if (phi == 0.0) {
    // M + M' = 0 forces Ybar = 0; the zero matrix is a witness.
    out.witness = SymMatrix(Matrix::Zero(Ybar.cols(), Ybar.cols()));
    return out;
  }
  out.phi = phi;
  out.witness = SymMatrix((0.25 / phi) * (Ybar.transpose() * Ybar));
  return out;
}

DissipationCheck check_dissipation_samples(const DissipationProblem& prob, const Vector& box_lo,
                                           const Vector& box_hi, int n_samples, double tol,
                                           uint64_t seed) {
  const Index dim = prob.n + prob.nhat + prob.mhat + prob.p + prob.phat;
  if (box_lo.size() != dim || box_hi.size() != dim)
    throw Error(ErrorCode::DimensionMismatch,
                "check_dissipation_samples: box size != n + nhat + mhat + p + phat");

  CounterRng rng(seed, /*stream=*/17);
  DissipationCheck out;
  out.max_violation = -std::numeric_limits<double>::infinity();

  for (int it = 0; it < n_samples; ++it) {
    Vector pt(dim);
    for (Index k = 0; k < dim; ++k) pt[k] = rng.uniform(box_lo[k], box_hi[k]);
    Index off = 0;
    const Vector x = pt.segment(off, prob.n);
    off += prob.n;
    const Vector xh = pt.segment(off, prob.nhat);
    off += prob.nhat;
    const Vector uh = pt.segment(off, prob.mhat);
    off += prob.mhat;
    const Vector w = pt.segment(off, prob.p);
    off += prob.p;
    const Vector wh = pt.segment(off, prob.phat);

    const Vector u = prob.interface_fn ? prob.interface_fn(x, xh, uh) : uh;
    const Vector fx = prob.f(x, u, w);
    const Vector fxh = prob.fhat(xh, uh, wh);
    if (!fx.allFinite() || !fxh.allFinite()) {
      std::ostringstream os;
      os << "check_dissipation_samples: non-finite dynamics at sample [" << pt.transpose() << "]";
      throw Error(ErrorCode::NonFinite, os.str());
    }

    Vector grad;
    if (prob.gradV) {
      grad = prob.gradV(x, xh);
    } else {
      grad.resize(prob.n + prob.nhat);
      Vector xp = x, xm = x, xhp = xh, xhm = xh;
      for (Index k = 0; k < prob.n; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
        xp[k] += h;
        xm[k] -= h;
        grad[k] = (prob.V(xp, xh) - prob.V(xm, xh)) / (2.0 * h);
        xp[k] = x[k];
        xm[k] = x[k];
      }
      for (Index k = 0; k < prob.nhat; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(xh[k]));
        xhp[k] += h;
        xhm[k] -= h;
        grad[prob.n + k] = (prob.V(x, xhp) - prob.V(x, xhm)) / (2.0 * h);
        xhp[k] = xh[k];
        xhm[k] = xh[k];
      }
    }
    const double vdot = grad.head(prob.n).dot(fx) + grad.tail(prob.nhat).dot(fxh);
    const double vval = prob.V(x, xh);
    const double violation = vdot - prob.rhs_bound(vval, x, xh, uh, w, wh);
    if (violation > out.max_violation) {
      out.max_violation = violation;
      out.worst_point = pt;
    }
  }
  out.pass = out.max_violation <= tol;
  return out;
}

}  // namespace abstrakt
