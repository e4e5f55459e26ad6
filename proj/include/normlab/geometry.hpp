#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

// Direction/norm primitives shared by every other module. Free functions are
// templated on the Eigen expression so callers can pass columns, blocks or
// products without materializing them first.

namespace normlab {

// Norms below this are treated as the zero vector everywhere.
inline constexpr double kZeroNormThreshold = 1e-300;

class ZeroVectorError : public std::runtime_error {
 public:
  ZeroVectorError() : std::runtime_error("zero vector: norm below 1e-300") {}
};

// Angle in radians, always in [0, pi].
struct Angle {
  double radians = 0.0;
};

template <typename Derived>
using PlainVector = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;

template <typename Derived>
typename Derived::Scalar checked_norm(const Eigen::MatrixBase<Derived>& v) {
  const auto n = v.norm();
  if (n < kZeroNormThreshold) throw ZeroVectorError{};
  return n;
}

template <typename Derived>
PlainVector<Derived> normalize(const Eigen::MatrixBase<Derived>& v) {
  return v / checked_norm(v);
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  const auto c = a.dot(b) / (checked_norm(a) * checked_norm(b));
  // Clamp rounding spill so acos stays defined.
  return std::clamp<typename DerivedA::Scalar>(c, -1, 1);
}

// Component of a orthogonal to base: (I - bb^T/|b|^2) a, without forming the
// projector.
template <typename DerivedA, typename DerivedB>
PlainVector<DerivedA> tangent_project(const Eigen::MatrixBase<DerivedA>& a,
                                      const Eigen::MatrixBase<DerivedB>& base) {
  const auto nb = checked_norm(base);
  return a - (base.dot(a) / (nb * nb)) * base;
}

template <typename DerivedA, typename DerivedB>
Angle angle_between(const Eigen::MatrixBase<DerivedA>& a,
                    const Eigen::MatrixBase<DerivedB>& b) {
  return Angle{std::acos(cosine_similarity(a, b))};
}

}  // namespace normlab
