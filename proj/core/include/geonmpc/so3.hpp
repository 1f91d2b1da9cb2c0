#pragma once

/**
 * @file
 * @brief SO(3) primitives: skew maps, Cayley and exponential maps, attitude error.
 *
 * Rotations are stored as matrices throughout. Tangent perturbations are
 * right-trivialized, i.e. a perturbed rotation is written R * cay(eta).
 */

#include <Eigen/Dense>

namespace geonmpc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Default tolerance on ||R^T R - I||_F and |det R - 1|.
inline constexpr double kOrthogonalityTol = 1e-9;

/// Default tolerance on ||M + M^T||_F for unskew().
inline constexpr double kSkewTol = 1e-9;

class RotationMatrix
{
public:
  /// Identity rotation.
  RotationMatrix() : m_(Mat3::Identity()) {}

  /// Validating constructor. Throws InvalidRotation if the matrix is not in SO(3) within `tol`.
  static RotationMatrix from_matrix(const Mat3 & m, double tol = kOrthogonalityTol);

  /**
   * @brief Closest rotation in Frobenius norm (polar projection).
   *
   * Meant for user-supplied near-rotations such as matrices printed with a
   * few decimals. If `distance` is non-null it receives ||m - R||_F.
   * Throws InvalidRotation if m is singular or not finite.
   */
  static RotationMatrix project(const Mat3 & m, double * distance = nullptr);

  /// Wraps a matrix the caller guarantees to be a rotation (group products, exact maps).
  static RotationMatrix unchecked(const Mat3 & m) { return RotationMatrix(m); }

  const Mat3 & matrix() const { return m_; }
  double operator()(Eigen::Index r, Eigen::Index c) const { return m_(r, c); }

  RotationMatrix transpose() const { return RotationMatrix(m_.transpose()); }
  RotationMatrix operator*(const RotationMatrix & o) const { return RotationMatrix(m_ * o.m_); }
  Vec3 operator*(const Vec3 & v) const { return m_ * v; }

  /// ||R^T R - I||_F
  double orthogonality_error() const;

  bool operator==(const RotationMatrix & o) const { return m_ == o.m_; }

private:
  explicit RotationMatrix(const Mat3 & m) : m_(m) {}
  Mat3 m_;
};

/// Weights and unit directions of the attitude error function.
struct AttitudeErrorWeights
{
  double k1{10.0};
  double k2{1.0};
  Vec3 e1{Vec3::UnitX()};
  Vec3 e2{Vec3::UnitY()};

  /// Throws InvalidArgument unless k1, k2 > 0 and e1, e2 are orthonormal.
  void validate() const;
};

/// S(v) with S(v) w = v x w.
Mat3 skew(const Vec3 & v);

/// Inverse of skew(). Throws NotSkewSymmetric if ||M + M^T||_F > tol.
Vec3 unskew(const Mat3 & m, double tol = kSkewTol);

/// cay(v) = (I + S(v)/2)(I - S(v)/2)^{-1}, evaluated in closed form.
RotationMatrix cayley(const Vec3 & v);

/// Rodrigues formula; Taylor expansion below ||v|| = 1e-6.
RotationMatrix expm_so3(const Vec3 & v);

/// Inverse Cayley map. Throws CayleySingular when trace(R) + 1 < tol (half-turn rotations).
Vec3 cayley_inverse(const RotationMatrix & r, double tol = 1e-9);

/**
 * @brief Right-trivialized differential of the Cayley map.
 *
 * cay(v + d) = cay(v) * cay(J_r(v) d) + O(|d|^2), with
 * J_r(v) = 4 / (4 + |v|^2) (I - S(v)/2).
 */
Mat3 cayley_right_jacobian(const Vec3 & v);

/// J_r(v)^{-1} = I + S(v)/2 + v v^T / 4.
Mat3 cayley_right_jacobian_inverse(const Vec3 & v);

/// Inverse of the left-trivialized differential: I - S(v)/2 + v v^T / 4.
Mat3 cayley_left_jacobian_inverse(const Vec3 & v);

/// Psi_i(R, Rd) = 1 - (R e_i) . (Rd e_i)
double attitude_error_component(const RotationMatrix & r, const RotationMatrix & rd, const Vec3 & e);

/// Psi(R, Rd) = k1 Psi_1 + k2 Psi_2. Non-negative, zero iff R = Rd.
double attitude_error(const RotationMatrix & r, const RotationMatrix & rd,
                      const AttitudeErrorWeights & w);

/// Gradient of attitude_error with respect to a right perturbation R * cay(eta) at eta = 0.
Vec3 attitude_error_gradient(const RotationMatrix & r, const RotationMatrix & rd,
                             const AttitudeErrorWeights & w);

}  // namespace geonmpc
