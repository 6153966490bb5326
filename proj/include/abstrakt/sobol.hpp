#pragma once

#include "abstrakt/types.hpp"

#include <cstdint>
#include <vector>

namespace abstrakt {

// Sobol low-discrepancy sequence, dimensions 1..10 (Joe-Kuo direction
// numbers). Enough for the state/input boxes used by the certificate
// condition checks; higher-dimensional sampling falls back to CounterRng
// at the call sites.
class SobolSequence {
public:
  static constexpr int kMaxDim = 10;

  explicit SobolSequence(int dim);

  /// Point index i (i >= 0) of the sequence, each coordinate in [0,1).
  Vector point(uint64_t i) const;

  int dim() const { return dim_; }

private:
  int dim_;
  // v_[d][b]: direction number for dimension d, bit b (32 bits).
  std::vector<std::vector<uint32_t>> v_;
};

/// n Sobol points scaled into [lo, hi], one per row.
Matrix sobol_box(const Vector& lo, const Vector& hi, int n);

}  // namespace abstrakt
