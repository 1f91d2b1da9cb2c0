#include "geonmpc/so3.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SVD>

#include "geonmpc/errors.hpp"

namespace geonmpc {

RotationMatrix RotationMatrix::from_matrix(const Mat3 & m, double tol)
{
  if (!m.allFinite()) { throw InvalidRotation("rotation matrix has non-finite entries"); }
  const double orth = (m.transpose() * m - Mat3::Identity()).norm();
  const double det  = m.determinant();
  if (orth > tol || std::abs(det - 1.0) > tol) {
    std::ostringstream os;
    os << "matrix is not in SO(3): ||R^T R - I||_F = " << orth << ", det = " << det;
    throw InvalidRotation(os.str());
  }
  return RotationMatrix(m);
}

RotationMatrix RotationMatrix::project(const Mat3 & m, double * distance)
{
  if (!m.allFinite()) { throw InvalidRotation("cannot project non-finite matrix"); }
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sigma = svd.singularValues();
  if (sigma(2) <= 1e-12 * std::max(1.0, sigma(0))) {
    throw InvalidRotation("cannot project a singular matrix onto SO(3)");
  }
  Mat3 u = svd.matrixU();
  const Mat3 & v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) { u.col(2) *= -1.0; }
  Mat3 r = u * v.transpose();
  if (distance != nullptr) { *distance = (m - r).norm(); }
  return RotationMatrix(r);
}

double RotationMatrix::orthogonality_error() const
{
  return (m_.transpose() * m_ - Mat3::Identity()).norm();
}

void AttitudeErrorWeights::validate() const
{
  if (!(k1 > 0.0) || !(k2 > 0.0)) { throw InvalidArgument("attitude gains k1, k2 must be positive"); }
  constexpr double tol = 1e-9;
  if (std::abs(e1.norm() - 1.0) > tol || std::abs(e2.norm() - 1.0) > tol) {
    throw InvalidArgument("attitude directions e1, e2 must be unit vectors");
  }
  if (std::abs(e1.dot(e2)) > tol) { throw InvalidArgument("attitude directions e1, e2 must be orthogonal"); }
}

Mat3 skew(const Vec3 & v)
{
  Mat3 s;
  // clang-format off
  s <<   0.0, -v.z(),  v.y(),
       v.z(),    0.0, -v.x(),
      -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

Vec3 unskew(const Mat3 & m, double tol)
{
  const double asym = (m + m.transpose()).norm();
  if (!(asym <= tol)) {
    std::ostringstream os;
    os << "matrix is not skew-symmetric: ||M + M^T||_F = " << asym;
    throw NotSkewSymmetric(os.str());
  }
  return Vec3(0.5 * (m(2, 1) - m(1, 2)), 0.5 * (m(0, 2) - m(2, 0)), 0.5 * (m(1, 0) - m(0, 1)));
}

RotationMatrix cayley(const Vec3 & v)
{
  const Mat3 s   = skew(v);
  const double c = 4.0 / (4.0 + v.squaredNorm());
  return RotationMatrix::unchecked(Mat3::Identity() + c * (s + 0.5 * s * s));
}

RotationMatrix expm_so3(const Vec3 & v)
{
  const double theta2 = v.squaredNorm();
  const double theta  = std::sqrt(theta2);
  double a, b;
  if (theta < 1e-6) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 s = skew(v);
  return RotationMatrix::unchecked(Mat3::Identity() + a * s + b * s * s);
}

Vec3 cayley_inverse(const RotationMatrix & r, double tol)
{
  const Mat3 & m     = r.matrix();
  const double denom = 1.0 + m.trace();
  if (denom < tol) { throw CayleySingular("Cayley map is singular at half-turn rotations (trace(R) = -1)"); }
  const Vec3 axial(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return (2.0 / denom) * axial;
}

Mat3 cayley_right_jacobian(const Vec3 & v)
{
  return (4.0 / (4.0 + v.squaredNorm())) * (Mat3::Identity() - 0.5 * skew(v));
}

Mat3 cayley_right_jacobian_inverse(const Vec3 & v)
{
  return Mat3::Identity() + 0.5 * skew(v) + 0.25 * v * v.transpose();
}

Mat3 cayley_left_jacobian_inverse(const Vec3 & v)
{
  return Mat3::Identity() - 0.5 * skew(v) + 0.25 * v * v.transpose();
}

double attitude_error_component(const RotationMatrix & r, const RotationMatrix & rd, const Vec3 & e)
{
  return 1.0 - (r * e).dot(rd * e);
}

double attitude_error(const RotationMatrix & r, const RotationMatrix & rd, const AttitudeErrorWeights & w)
{
  return w.k1 * attitude_error_component(r, rd, w.e1) + w.k2 * attitude_error_component(r, rd, w.e2);
}

Vec3 attitude_error_gradient(const RotationMatrix & r, const RotationMatrix & rd, const AttitudeErrorWeights & w)
{
  const Mat3 rel = r.matrix().transpose() * rd.matrix();
  return w.k1 * (rel * w.e1).cross(w.e1) + w.k2 * (rel * w.e2).cross(w.e2);
}

}  // namespace geonmpc
