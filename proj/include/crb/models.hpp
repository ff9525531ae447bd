#ifndef CRB_MODELS_HPP
#define CRB_MODELS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "crb/errors.hpp"
#include "crb/fim.hpp"

namespace crb {

namespace detail {

/// Numerical rank with the 1e-10 * sigma_max convention.
inline Eigen::Index numerical_rank(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double cutoff = 1e-10 * sv[0];
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > cutoff) ++rank;
  return rank;
}

}  // namespace detail

/// Linear mixed model y = A x + B z + w with white Gaussian noise of
/// variance v. The stacked design [A B] must have full column rank and
/// strictly fewer columns than rows.
struct LmmSpec {
  Eigen::MatrixXd design_x;  // n x k_x
  Eigen::MatrixXd design_z;  // n x k_z
  double noise_variance = 1.0;

  LmmSpec(Eigen::MatrixXd a, Eigen::MatrixXd b, double v)
      : design_x(std::move(a)), design_z(std::move(b)), noise_variance(v) {
    if (design_x.rows() != design_z.rows())
      throw DimensionMismatch("LmmSpec: designs must share the sample dimension");
    if (noise_variance <= 0.0) throw InvalidArgument("LmmSpec: noise variance must be > 0");
    const Eigen::Index n = design_x.rows();
    const Eigen::Index k = design_x.cols() + design_z.cols();
    if (design_x.cols() == 0 || design_z.cols() == 0)
      throw InvalidArgument("LmmSpec: both parameter blocks must be non-empty");
    Eigen::MatrixXd stacked(n, k);
    stacked << design_x, design_z;
    if (k >= n || detail::numerical_rank(stacked) != k)
      throw RankDeficient("LmmSpec: rank([A B]) = k_x + k_z < n violated");
  }

  Eigen::Index samples() const { return design_x.rows(); }
  Eigen::Index dim_x() const { return design_x.cols(); }
  Eigen::Index dim_z() const { return design_z.cols(); }
};

/// Sinusoid-in-noise model y(k) = A cos(wk) + B sin(wk) + C + w(k),
/// k = 0..n-1, white Gaussian noise of variance v. A/B are the in-phase
/// and quadrature amplitudes of the equivalent alpha*sin(wk + phi) tone.
struct SineSpec {
  double cos_amplitude = 0.0;  // A
  double sin_amplitude = 0.0;  // B
  double offset = 0.0;         // C
  double omega = 0.0;          // radians per sample, in (0, pi)
  double noise_variance = 1.0;
  Eigen::Index samples = 0;

  SineSpec(double a, double b, double c, double w, double v, Eigen::Index n)
      : cos_amplitude(a), sin_amplitude(b), offset(c), omega(w), noise_variance(v),
        samples(n) {
    if (a * a + b * b <= 0.0)
      throw InvalidArgument("SineSpec: amplitude must be non-zero (A^2 + B^2 > 0)");
    if (!(w > 0.0 && w < std::numbers::pi))
      throw InvalidArgument("SineSpec: omega must lie strictly inside (0, pi)");
    if (v <= 0.0) throw InvalidArgument("SineSpec: noise variance must be > 0");
    if (n < 8) throw InvalidArgument("SineSpec: needs at least 8 samples");
  }

  double amplitude() const { return std::hypot(cos_amplitude, sin_amplitude); }
  double phase() const { return std::atan2(cos_amplitude, sin_amplitude); }
};

/// Invertible parameter map differential d(g)/d(theta) with its label maps.
struct Jacobian {
  Eigen::MatrixXd matrix;
  std::vector<std::string> in_labels;
  std::vector<std::string> out_labels;

  Jacobian(Eigen::MatrixXd m, std::vector<std::string> in, std::vector<std::string> out)
      : matrix(std::move(m)), in_labels(std::move(in)), out_labels(std::move(out)) {
    if (matrix.rows() != matrix.cols())
      throw DimensionMismatch("Jacobian: matrix must be square");
    if (static_cast<Eigen::Index>(in_labels.size()) != matrix.cols() ||
        static_cast<Eigen::Index>(out_labels.size()) != matrix.rows())
      throw DimensionMismatch("Jacobian: label count must match the dimension");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(matrix);
    if (!lu.isInvertible())
      throw SingularJacobian("Jacobian: matrix is numerically singular");
  }
};

/// Fisher matrix of the linear mixed model:
/// (1/v) [[A'A, A'B, 0], [B'A, B'B, 0], [0, 0, n/(2v)]]
/// with blocks x, z and the decoupled noise-variance block v.
inline std::pair<FisherMatrix, Partition> lmm_fisher(const LmmSpec& spec) {
  const Eigen::Index kx = spec.dim_x();
  const Eigen::Index kz = spec.dim_z();
  const Eigen::Index k = kx + kz + 1;
  const double v = spec.noise_variance;

  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(k, k);
  j.topLeftCorner(kx, kx) = spec.design_x.transpose() * spec.design_x / v;
  j.block(0, kx, kx, kz) = spec.design_x.transpose() * spec.design_z / v;
  j.block(kx, 0, kz, kx) = j.block(0, kx, kx, kz).transpose();
  j.block(kx, kx, kz, kz) = spec.design_z.transpose() * spec.design_z / v;
  j(k - 1, k - 1) = static_cast<double>(spec.samples()) / (2.0 * v * v);

  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < kx; ++i) labels.push_back("x_" + std::to_string(i));
  for (Eigen::Index i = 0; i < kz; ++i) labels.push_back("z_" + std::to_string(i));
  labels.push_back("v");

  Partition p = Partition::contiguous({{"x", kx}, {"z", kz}, {"v", 1}}, k);
  return {make_fisher(std::move(j), std::move(labels)), std::move(p)};
}

/// Projector onto the orthogonal complement of range(A):
/// I - A (A'A)^{-1} A', computed from a thin QR factor.
inline Eigen::MatrixXd orth_projector(const Eigen::MatrixXd& a) {
  if (detail::numerical_rank(a) != a.cols())
    throw RankDeficient("orth_projector: matrix does not have full column rank");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  const Eigen::MatrixXd q =
      qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd proj =
      Eigen::MatrixXd::Identity(a.rows(), a.rows()) - q * q.transpose();
  Eigen::MatrixXd sym = 0.5 * (proj + proj.transpose());
  return sym;
}

/// Multiplicative penalty on the bound for x from not knowing z:
/// |B'B| / |B' P_A^perp B| >= 1, equal to 1 iff A'B = 0.
inline double lmm_inflation(const LmmSpec& spec) {
  const Eigen::MatrixXd& b = spec.design_z;
  const Eigen::MatrixXd proj = orth_projector(spec.design_x);
  const Eigen::MatrixXd gram = b.transpose() * b;
  Eigen::MatrixXd projected = b.transpose() * proj * b;
  projected = 0.5 * (projected + projected.transpose()).eval();
  const double log_factor = detail::spd_logdet(gram, "B'B") -
                            detail::spd_logdet(projected, "B' P_A^perp B");
  return std::exp(log_factor);
}

/// Leading-order Fisher matrix of the sine model over [A, B, C, omega, v]:
/// (1/2v) [[n, 0, 0, -Bn^2/2, 0],
///         [0, n, 0,  An^2/2, 0],
///         [0, 0, 2n, 0,      0],
///         [-Bn^2/2, An^2/2, 0, (A^2+B^2)n^3/3, 0],
///         [0, 0, 0, 0, n/v]]
/// Positive definite for every valid spec. Scalar blocks named after the
/// parameters.
inline std::pair<FisherMatrix, Partition> sine_fisher_dominant(const SineSpec& spec) {
  const double n = static_cast<double>(spec.samples);
  const double a = spec.cos_amplitude;
  const double b = spec.sin_amplitude;
  const double v = spec.noise_variance;
  const double s = 1.0 / (2.0 * v);

  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(5, 5);
  j(0, 0) = s * n;
  j(1, 1) = s * n;
  j(2, 2) = s * 2.0 * n;
  j(3, 3) = s * (a * a + b * b) * n * n * n / 3.0;
  j(4, 4) = s * n / v;
  j(0, 3) = j(3, 0) = s * (-b * n * n / 2.0);
  j(1, 3) = j(3, 1) = s * (a * n * n / 2.0);

  const std::vector<std::string> labels = {"A", "B", "C", "omega", "v"};
  return {make_fisher(std::move(j), labels), Partition::scalar(labels)};
}

/// Nuisance inflation of the amplitude/offset bounds caused by an unknown
/// frequency, under the dominant Fisher matrix:
///   f_A = 1 + 3B^2/(A^2+B^2), f_B = 1 + 3A^2/(A^2+B^2), f_C = 1.
/// Each factor lies in [1, 4] and f_A + f_B = 5.
inline std::map<std::string, double> sine_inflation_factors(const SineSpec& spec) {
  const double a2 = spec.cos_amplitude * spec.cos_amplitude;
  const double b2 = spec.sin_amplitude * spec.sin_amplitude;
  const double power = a2 + b2;
  return {{"A", 1.0 + 3.0 * b2 / power}, {"B", 1.0 + 3.0 * a2 / power}, {"C", 1.0}};
}

/// Congruence transform to the parameters of g: J_out = G^{-T} J G^{-1}
/// with G = d(g)/d(theta), so that J_out^{-1} = G J^{-1} G'.
inline FisherMatrix reparameterize(const FisherMatrix& j, const Jacobian& g) {
  if (g.in_labels != j.labels())
    throw DimensionMismatch(
        "reparameterize: Jacobian input labels must match the matrix labels");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(g.matrix);
  if (!lu.isInvertible())
    throw SingularJacobian("reparameterize: Jacobian is numerically singular");
  const Eigen::MatrixXd ginv = lu.inverse();
  Eigen::MatrixXd out = ginv.transpose() * j.entries() * ginv;
  Eigen::MatrixXd sym = 0.5 * (out + out.transpose());
  return make_fisher(std::move(sym), g.out_labels);
}

/// Differential of (A, B, C, omega, v) -> (alpha, phi, C, omega, v) with
/// alpha = sqrt(A^2+B^2), phi = atan(A/B), evaluated at the spec's tone:
/// [[sin phi,       cos phi,        0],
///  [cos(phi)/alpha, -sin(phi)/alpha, 0],
///  [0,              0,              I]]
inline Jacobian amplitude_phase_jacobian(const SineSpec& spec) {
  const double alpha = spec.amplitude();
  const double phi = spec.phase();
  Eigen::MatrixXd g = Eigen::MatrixXd::Identity(5, 5);
  g(0, 0) = std::sin(phi);
  g(0, 1) = std::cos(phi);
  g(1, 0) = std::cos(phi) / alpha;
  g(1, 1) = -std::sin(phi) / alpha;
  return Jacobian(std::move(g), {"A", "B", "C", "omega", "v"},
                  {"alpha", "phi", "C", "omega", "v"});
}

}  // namespace crb

#endif
