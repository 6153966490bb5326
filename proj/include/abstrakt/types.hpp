#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace abstrakt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorCode {
  DimensionMismatch,
  NonFinite,
  RankDeficient,
  Infeasible,
  NotStabilizable,
  EmptyGroup,
  ConditionViolated,
  InterfaceGuard,
  InvalidConfig,
  MixedExponents,
  NoConvergence,
};

/// Error with a machine-readable code alongside the message.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::RankDeficient: return "rank_deficient";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::NotStabilizable: return "not_stabilizable";
    case ErrorCode::EmptyGroup: return "empty_group";
    case ErrorCode::ConditionViolated: return "condition_violated";
    case ErrorCode::InterfaceGuard: return "interface_guard";
    case ErrorCode::InvalidConfig: return "invalid_config";
    case ErrorCode::MixedExponents: return "mixed_exponents";
    case ErrorCode::NoConvergence: return "no_convergence";
  }
  return "unknown";
}

/// Dense symmetric matrix; the upper triangle is authoritative and the
/// lower triangle is filled in on construction.
class SymMatrix {
public:
  SymMatrix() = default;

  explicit SymMatrix(const Matrix& m) : m_(m) {
    if (m_.rows() != m_.cols())
      throw Error(ErrorCode::DimensionMismatch, "SymMatrix requires a square matrix");
    m_.triangularView<Eigen::StrictlyLower>() = m_.transpose().triangularView<Eigen::StrictlyLower>();
  }

  static SymMatrix identity(Index n) { return SymMatrix(Matrix::Identity(n, n)); }
  static SymMatrix zero(Index n) { return SymMatrix(Matrix::Zero(n, n)); }

  Index order() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

private:
  Matrix m_;
};

}  // namespace abstrakt
