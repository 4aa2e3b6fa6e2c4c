#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "beamtrack/errors.hpp"

namespace beamtrack {

using cplx = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat4 = Eigen::Matrix4d;
using CVec3 = Eigen::Vector3cd;
using CMat3 = Eigen::Matrix3cd;

inline constexpr double kPivotGuard = 1e-14;
inline constexpr double kMaxCondition = 1e12;

// Closed-form inverse of a small fixed-size matrix. Eigen evaluates 2x2..4x4
// inverses by cofactor expansion; the determinant is checked first.
template <class Derived>
auto small_inverse(const Eigen::MatrixBase<Derived>& a, const char* what = "matrix")
    -> Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime,
                     Derived::ColsAtCompileTime> {
    static_assert(Derived::RowsAtCompileTime != Eigen::Dynamic &&
                      Derived::RowsAtCompileTime <= 4,
                  "small_inverse is for fixed sizes up to 4x4");
    constexpr int n = Derived::RowsAtCompileTime;
    const double scale = a.cwiseAbs().maxCoeff();
    const double det = std::abs(a.determinant());
    if (!(scale > 0.0) || !std::isfinite(det) ||
        det <= kPivotGuard * std::pow(scale, n)) {
        throw SingularFisher(std::string(what) + ": determinant below pivot guard");
    }
    return a.inverse();
}

// Spectral condition number of a real symmetric matrix.
template <class Derived>
double symmetric_condition(const Eigen::MatrixBase<Derived>& a) {
    using M = Eigen::Matrix<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
    Eigen::SelfAdjointEigenSolver<M> es(M(a.eval()));
    const auto ev = es.eigenvalues().cwiseAbs();
    const double lo = ev.minCoeff();
    if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
    return ev.maxCoeff() / lo;
}

// Inverse of a symmetric Fisher matrix with the conditioning check applied.
template <class Derived>
auto fisher_inverse(const Eigen::MatrixBase<Derived>& f, const char* what = "Fisher matrix") {
    const double c = symmetric_condition(f);
    if (!(c < kMaxCondition)) {
        throw SingularFisher(std::string(what) + ": condition number exceeds 1e12");
    }
    return small_inverse(f, what);
}

} // namespace beamtrack
