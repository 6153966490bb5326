#include "abstrakt/sobol.hpp"

namespace abstrakt {

namespace {

// First rows of the Joe-Kuo D6 table: degree s, coefficient a, and the
// initial direction integers m_1..m_s for dimensions 2..10. Dimension 1
// is the van der Corput sequence in base 2.
struct JoeKuoRow {
  int s;
  uint32_t a;
  uint32_t m[5];
};

constexpr JoeKuoRow kTable[] = {
    {1, 0, {1, 0, 0, 0, 0}},    // dim 2
    {2, 1, {1, 3, 0, 0, 0}},    // dim 3
    {3, 1, {1, 3, 1, 0, 0}},    // dim 4
    {3, 2, {1, 1, 1, 0, 0}},    // dim 5
    {4, 1, {1, 1, 3, 3, 0}},    // dim 6
    {4, 4, {1, 3, 5, 13, 0}},   // dim 7
    {5, 2, {1, 1, 5, 5, 17}},   // dim 8
    {5, 4, {1, 1, 5, 5, 5}},    // dim 9
    {5, 7, {1, 1, 7, 11, 19}},  // dim 10
};

constexpr int kBits = 32;

}  // namespace

SobolSequence::SobolSequence(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim)
    throw Error(ErrorCode::InvalidConfig,
                "SobolSequence supports 1.." + std::to_string(kMaxDim) + " dimensions, got " +
                    std::to_string(dim));
  v_.resize(dim_);
  for (int d = 0; d < dim_; ++d) {
    auto& v = v_[d];
    v.assign(kBits, 0);
    if (d == 0) {
      for (int b = 0; b < kBits; ++b) v[b] = 1u << (31 - b);
      continue;
    }
    const JoeKuoRow& row = kTable[d - 1];
    const int s = row.s;
    for (int b = 0; b < s && b < kBits; ++b) v[b] = row.m[b] << (31 - b);
    for (int b = s; b < kBits; ++b) {
      v[b] = v[b - s] ^ (v[b - s] >> s);
      for (int k = 1; k < s; ++k)
        if ((row.a >> (s - 1 - k)) & 1u) v[b] ^= v[b - k];
    }
  }
}

Vector SobolSequence::point(uint64_t i) const {
  // Gray-code free direct evaluation: XOR the direction numbers selected
  // by the Gray code of i.
  const uint64_t gray = i ^ (i >> 1);
  Vector p = Vector::Zero(dim_);
  for (int d = 0; d < dim_; ++d) {
    uint32_t x = 0;
    for (int b = 0; b < kBits; ++b)
      if ((gray >> b) & 1ull) x ^= v_[d][b];
    p[d] = static_cast<double>(x) * 0x1.0p-32;
  }
  return p;
}

Matrix sobol_box(const Vector& lo, const Vector& hi, int n) {
  if (lo.size() != hi.size())
    throw Error(ErrorCode::DimensionMismatch, "sobol_box: lo/hi size mismatch");
  SobolSequence seq(static_cast<int>(lo.size()));
  Matrix pts(n, lo.size());
  for (int i = 0; i < n; ++i) {
    const Vector u = seq.point(static_cast<uint64_t>(i) + 1);  // skip the origin
    pts.row(i) = (lo.array() + (hi - lo).array() * u.array()).transpose();
  }
  return pts;
}

}  // namespace abstrakt
