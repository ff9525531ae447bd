#ifndef CRB_VALIDATE_HPP
#define CRB_VALIDATE_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "crb/detail/fft.hpp"
#include "crb/errors.hpp"
#include "crb/fim.hpp"
#include "crb/models.hpp"
#include "crb/numeric_fim.hpp"
#include "crb/rng.hpp"

namespace crb {

/// Sample MSE matrix of an estimator over Monte Carlo trials, with the
/// bookkeeping needed to reproduce and to compare against a CrbValue.
class EmpiricalMse {
 public:
  EmpiricalMse(Eigen::MatrixXd matrix, std::vector<std::string> labels,
               std::int64_t trials, std::uint64_t seed, std::string estimator_name,
               std::int64_t discarded = 0)
      : matrix_(std::move(matrix)), labels_(std::move(labels)), trials_(trials),
        seed_(seed), estimator_name_(std::move(estimator_name)), discarded_(discarded) {
    if (matrix_.rows() != matrix_.cols())
      throw DimensionMismatch("EmpiricalMse: matrix must be square");
    if (static_cast<Eigen::Index>(labels_.size()) != matrix_.rows())
      throw DimensionMismatch("EmpiricalMse: label count must match the dimension");
    if (trials_ < matrix_.rows() + 1)
      throw InvalidArgument(
          "EmpiricalMse: needs trials >= k + 1 for a meaningful generalized variance");
    const double scale = matrix_.cwiseAbs().maxCoeff();
    if ((matrix_ - matrix_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw NotSymmetric("EmpiricalMse: matrix is not symmetric");
    Eigen::MatrixXd sym = 0.5 * (matrix_ + matrix_.transpose());
    matrix_ = std::move(sym);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()[0] < -1e-10 * scale)
      throw NotPositiveDefinite("EmpiricalMse: matrix is not positive semidefinite");
  }

  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::int64_t trials() const { return trials_; }
  std::int64_t discarded() const { return discarded_; }
  std::uint64_t seed() const { return seed_; }
  const std::string& estimator_name() const { return estimator_name_; }

  /// log |P|; the empirical generalized error variance in log space.
  double log_gen_variance() const {
    return detail::spd_logdet(matrix_, "the empirical MSE matrix of " + estimator_name_);
  }

 private:
  Eigen::MatrixXd matrix_;
  std::vector<std::string> labels_;
  std::int64_t trials_;
  std::uint64_t seed_;
  std::string estimator_name_;
  std::int64_t discarded_;
};

/// Sub-MSE over a label subset (order as given).
inline EmpiricalMse submatrix(const EmpiricalMse& mse, const std::vector<std::string>& labels) {
  std::vector<Eigen::Index> idx;
  for (const auto& l : labels) {
    const auto it = std::find(mse.labels().begin(), mse.labels().end(), l);
    if (it == mse.labels().end())
      throw InvalidArgument("submatrix: no parameter labeled '" + l + "'");
    idx.push_back(static_cast<Eigen::Index>(it - mse.labels().begin()));
  }
  return EmpiricalMse(mse.matrix()(idx, idx), labels, mse.trials(), mse.seed(),
                      mse.estimator_name(), mse.discarded());
}

enum class Verdict { Attains, Respects, Violates };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Attains: return "Attains";
    case Verdict::Respects: return "Respects";
    default: return "Violates";
  }
}

/// Log-space comparison of the empirical generalized variance against a
/// bound, with multiplicative slack for sampling error:
///   Violates  iff log|P| < log CRB - log(1+slack)
///   Attains   iff within +/- log(1+slack)
///   Respects  otherwise.
inline Verdict compare(const EmpiricalMse& mse, const CrbValue& bound, double slack) {
  if (mse.matrix().rows() != bound.dimension)
    throw DimensionMismatch("compare: MSE covers " + std::to_string(mse.matrix().rows()) +
                            " parameters but the bound covers " +
                            std::to_string(bound.dimension));
  if (slack <= 0.0) throw InvalidArgument("compare: slack must be > 0");
  const double margin = std::log1p(slack);
  const double gap = mse.log_gen_variance() - bound.log_value;
  if (gap < -margin) return Verdict::Violates;
  if (gap <= margin) return Verdict::Attains;
  return Verdict::Respects;
}

enum class LmmMode { joint, z_known };
enum class SineMode { omega_known, omega_unknown };

/// Least-squares estimation of x (and z in joint mode) from simulated
/// draws of y = A x + B z + w. The estimator is efficient, so in joint
/// mode the x-block generalized variance matches CRB(x) up to sampling
/// error.
inline EmpiricalMse run_lmm_experiment(const LmmSpec& spec, const Eigen::VectorXd& x_true,
                                       const Eigen::VectorXd& z_true, std::int64_t trials,
                                       std::uint64_t seed, LmmMode mode) {
  if (x_true.size() != spec.dim_x() || z_true.size() != spec.dim_z())
    throw DimensionMismatch("run_lmm_experiment: truth dimensions do not match the spec");
  if (trials < 100) throw InvalidArgument("run_lmm_experiment: needs trials >= 100");

  const Eigen::Index n = spec.samples();
  const Eigen::VectorXd mean = spec.design_x * x_true + spec.design_z * z_true;
  const double noise_sd = std::sqrt(spec.noise_variance);

  Eigen::MatrixXd design;
  Eigen::VectorXd truth;
  std::vector<std::string> labels;
  if (mode == LmmMode::joint) {
    design.resize(n, spec.dim_x() + spec.dim_z());
    design << spec.design_x, spec.design_z;
    truth.resize(design.cols());
    truth << x_true, z_true;
    for (Eigen::Index i = 0; i < spec.dim_x(); ++i) labels.push_back("x_" + std::to_string(i));
    for (Eigen::Index i = 0; i < spec.dim_z(); ++i) labels.push_back("z_" + std::to_string(i));
  } else {
    design = spec.design_x;
    truth = x_true;
    for (Eigen::Index i = 0; i < spec.dim_x(); ++i) labels.push_back("x_" + std::to_string(i));
  }
  // Pseudo-inverse via QR once; the per-trial work is one apply.
  const Eigen::MatrixXd pinv =
      design.colPivHouseholderQr().solve(Eigen::MatrixXd::Identity(n, n));

  const Eigen::Index k = design.cols();
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(k, k);
  for (std::int64_t t = 0; t < trials; ++t) {
    Rng rng(seed, static_cast<std::uint64_t>(t));
    const Eigen::VectorXd y = mean + noise_sd * rng.gaussian_vector(n);
    const Eigen::VectorXd target = mode == LmmMode::joint ? y : (y - spec.design_z * z_true).eval();
    const Eigen::VectorXd err = pinv * target - truth;
    accum.noalias() += err * err.transpose();
  }
  return EmpiricalMse(accum / static_cast<double>(trials), labels, trials, seed,
                      mode == LmmMode::joint ? "lmm-ls-joint" : "lmm-ls-z-known");
}

namespace detail {

/// Data-independent part of the three-column sine regression at omega:
/// Gram matrix of [cos(wk), sin(wk), 1] over k = 0..n-1, plus its first
/// two derivatives in omega, all from geometric sums.
struct SineGram {
  Eigen::Matrix3d g, dg, ddg;
};

inline SineGram sine_gram(double omega, Eigen::Index n) {
  std::complex<double> p0(0, 0), p1(0, 0), p2(0, 0);
  std::complex<double> w0(0, 0), w1(0, 0), w2(0, 0);
  const std::complex<double> e1 = std::polar(1.0, omega);
  const std::complex<double> e2 = std::polar(1.0, 2.0 * omega);
  std::complex<double> r1(1.0, 0.0), r2(1.0, 0.0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    if ((k & 127) == 0) {  // refresh the rotators to stop drift
      r1 = std::polar(1.0, omega * kk);
      r2 = std::polar(1.0, 2.0 * omega * kk);
    }
    p0 += r1;
    p1 += kk * r1;
    p2 += kk * kk * r1;
    w0 += r2;
    w1 += kk * r2;
    w2 += kk * kk * r2;
    r1 *= e1;
    r2 *= e2;
  }
  const double nn = static_cast<double>(n);
  SineGram out;
  out.g << (nn + w0.real()) / 2.0, w0.imag() / 2.0, p0.real(),
           w0.imag() / 2.0, (nn - w0.real()) / 2.0, p0.imag(),
           p0.real(), p0.imag(), nn;
  // d/dw: dW0 = 2i W1 and dP0 = i P1.
  out.dg << -w1.imag(), w1.real(), -p1.imag(),
            w1.real(), w1.imag(), p1.real(),
            -p1.imag(), p1.real(), 0.0;
  // d2/dw2: d2W0 = -4 W2 and d2P0 = -P2.
  out.ddg << -2.0 * w2.real(), -2.0 * w2.imag(), -p2.real(),
             -2.0 * w2.imag(), 2.0 * w2.real(), -p2.imag(),
             -p2.real(), -p2.imag(), 0.0;
  return out;
}

/// Data-dependent projections r = [sum y cos, sum y sin, sum y] and their
/// first two omega-derivatives.
struct SineProjections {
  Eigen::Vector3d r, dr, ddr;
};

inline SineProjections sine_projections(const Eigen::VectorXd& y, double omega) {
  std::complex<double> t0(0, 0), t1(0, 0), t2(0, 0);
  const std::complex<double> e1 = std::polar(1.0, omega);
  std::complex<double> r1(1.0, 0.0);
  const Eigen::Index n = y.size();
  double total = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double kk = static_cast<double>(k);
    if ((k & 127) == 0) r1 = std::polar(1.0, omega * kk);
    const std::complex<double> yk = y[k] * r1;
    t0 += yk;
    t1 += kk * yk;
    t2 += kk * kk * yk;
    total += y[k];
    r1 *= e1;
  }
  SineProjections out;
  out.r << t0.real(), t0.imag(), total;
  out.dr << -t1.imag(), t1.real(), 0.0;
  out.ddr << -t2.real(), -t2.imag(), 0.0;
  return out;
}

/// Concentrated least-squares criterion Q(w) = r'G^{-1}r and its first two
/// derivatives; maximizing Q is equivalent to minimizing the residual.
struct SineCriterion {
  double q, dq, ddq;
  Eigen::Vector3d coeffs;  // G^{-1} r, the fitted (A, B, C)
};

inline SineCriterion sine_criterion(const Eigen::VectorXd& y, double omega) {
  const SineGram gram = sine_gram(omega, y.size());
  const SineProjections pr = sine_projections(y, omega);
  const Eigen::Vector3d u = gram.g.ldlt().solve(pr.r);
  const Eigen::Vector3d du = gram.g.ldlt().solve((pr.dr - gram.dg * u).eval());
  SineCriterion out;
  out.q = pr.r.dot(u);
  out.dq = 2.0 * pr.dr.dot(u) - u.dot(gram.dg * u);
  out.ddq = 2.0 * pr.ddr.dot(u) + 2.0 * pr.dr.dot(du) - 2.0 * du.dot(gram.dg * u) -
            u.dot(gram.ddg * u);
  out.coeffs = u;
  return out;
}

struct SineFit {
  double a, b, c, omega;
  bool converged;
};

/// Single-tone fit: coarse maximization of Q over the DFT half-spectrum
/// grid (bins restricted to the admissible band), then at most 20 Newton
/// steps on the concentrated criterion.
struct SineFitter {
  Eigen::Index n;
  double band_lo, band_hi;
  std::size_t fft_size;
  std::vector<std::size_t> grid_bin;
  std::vector<double> grid_omega;
  std::vector<Eigen::Matrix3d> grid_gram_inv;
  int newton_cap = 20;

  explicit SineFitter(Eigen::Index samples) : n(samples) {
    band_lo = 2.0 * std::numbers::pi / static_cast<double>(n);
    band_hi = std::numbers::pi - band_lo;
    fft_size = detail::next_pow2(static_cast<std::size_t>(8 * n));
    for (std::size_t j = 1; j < fft_size / 2; ++j) {
      const double w = 2.0 * std::numbers::pi * static_cast<double>(j) /
                       static_cast<double>(fft_size);
      if (w < band_lo || w > band_hi) continue;
      grid_bin.push_back(j);
      grid_omega.push_back(w);
      grid_gram_inv.push_back(sine_gram(w, n).g.inverse());
    }
  }

  SineFit fit(const Eigen::VectorXd& y) const {
    // coarse stage: Q over the grid, projections via one zero-padded FFT
    std::vector<std::complex<double>> buf(fft_size, {0.0, 0.0});
    for (Eigen::Index k = 0; k < n; ++k) buf[static_cast<std::size_t>(k)] = y[k];
    fft_pow2(buf);
    const double total = y.sum();

    double best_q = -std::numeric_limits<double>::infinity();
    double best_w = grid_omega.front();
    for (std::size_t i = 0; i < grid_omega.size(); ++i) {
      // X_j = sum y e^{-iwk}, so cos-sum = Re, sin-sum = -Im
      const std::size_t j = grid_bin[i];
      const Eigen::Vector3d r(buf[j].real(), -buf[j].imag(), total);
      const double q = r.dot(grid_gram_inv[i] * r);
      if (q > best_q) {
        best_q = q;
        best_w = grid_omega[i];
      }
    }

    // refinement: Newton on Q with clamped steps
    const double grid_spacing = 2.0 * std::numbers::pi / static_cast<double>(fft_size);
    const double max_step = 2.0 * grid_spacing;
    double w = best_w;
    bool converged = false;
    for (int it = 0; it < newton_cap; ++it) {
      const SineCriterion crit = sine_criterion(y, w);
      double step;
      if (crit.ddq < 0.0) {
        step = -crit.dq / crit.ddq;
      } else {
        step = (crit.dq > 0.0 ? 1.0 : -1.0) * grid_spacing / 2.0;
      }
      step = std::clamp(step, -max_step, max_step);
      w += step;
      if (w < band_lo || w > band_hi) break;  // left the admissible band
      if (std::abs(step) <= 1e-10) {
        converged = true;
        break;
      }
    }
    SineFit out{0.0, 0.0, 0.0, w, converged};
    if (converged) {
      const SineCriterion crit = sine_criterion(y, w);
      out.a = crit.coeffs[0];
      out.b = crit.coeffs[1];
      out.c = crit.coeffs[2];
    }
    return out;
  }
};

}  // namespace detail

/// Monte Carlo MSE of the sine-wave estimators. omega_known fits (A, B, C)
/// by linear least squares at the true frequency; omega_unknown first
/// estimates the frequency (grid + Newton on the concentrated criterion)
/// and returns the MSE over (A, B, C, omega). Nonconvergent trials are
/// discarded and counted; more than 1% discards fails loudly.
inline EmpiricalMse run_sine_experiment(const SineSpec& spec, std::int64_t trials,
                                        std::uint64_t seed, SineMode mode) {
  const Eigen::Index n = spec.samples;
  if (n < 64) throw InvalidArgument("run_sine_experiment: needs n >= 64");
  const double guard = 2.0 * std::numbers::pi / static_cast<double>(n);
  if (spec.omega < guard || spec.omega > std::numbers::pi - guard)
    throw InvalidArgument(
        "run_sine_experiment: omega must be at least 2*pi/n away from 0 and pi");
  if (trials < 5) throw InvalidArgument("run_sine_experiment: needs trials >= 5");

  Eigen::VectorXd signal(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double wk = spec.omega * static_cast<double>(k);
    signal[k] = spec.cos_amplitude * std::cos(wk) + spec.sin_amplitude * std::sin(wk) +
                spec.offset;
  }
  const double noise_sd = std::sqrt(spec.noise_variance);

  if (mode == SineMode::omega_known) {
    const Eigen::Matrix3d gram_inv = detail::sine_gram(spec.omega, n).g.inverse();
    Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(3, 3);
    for (std::int64_t t = 0; t < trials; ++t) {
      Rng rng(seed, static_cast<std::uint64_t>(t));
      const Eigen::VectorXd y = signal + noise_sd * rng.gaussian_vector(n);
      const Eigen::Vector3d fit =
          gram_inv * detail::sine_projections(y, spec.omega).r;
      Eigen::Vector3d err(fit[0] - spec.cos_amplitude, fit[1] - spec.sin_amplitude,
                          fit[2] - spec.offset);
      accum.noalias() += err * err.transpose();
    }
    return EmpiricalMse(accum / static_cast<double>(trials), {"A", "B", "C"}, trials,
                        seed, "sine-ls-omega-known");
  }

  const detail::SineFitter fitter(n);
  Eigen::MatrixXd accum = Eigen::MatrixXd::Zero(4, 4);
  std::int64_t used = 0, discarded = 0;
  for (std::int64_t t = 0; t < trials; ++t) {
    Rng rng(seed, static_cast<std::uint64_t>(t));
    const Eigen::VectorXd y = signal + noise_sd * rng.gaussian_vector(n);
    const detail::SineFit fit = fitter.fit(y);
    if (!fit.converged) {
      ++discarded;
      continue;
    }
    Eigen::Vector4d err(fit.a - spec.cos_amplitude, fit.b - spec.sin_amplitude,
                        fit.c - spec.offset, fit.omega - spec.omega);
    accum.noalias() += err * err.transpose();
    ++used;
  }
  if (discarded * 100 > trials)
    throw ConvergenceFailure("run_sine_experiment: " + std::to_string(discarded) + " of " +
                             std::to_string(trials) +
                             " trials failed to converge (> 1%); the comparison against "
                             "the bound is not meaningful in the threshold regime");
  return EmpiricalMse(accum / static_cast<double>(used), {"A", "B", "C", "omega"}, used,
                      seed, "sine-grid-newton", discarded);
}

// ---------------------------------------------------------------------------
// Packaged experiments: run the estimators, compare against the bounds,
// and emit a report the CLI can render.

struct ExperimentEntry {
  std::string quantity;
  double log_empirical = 0.0;
  double log_bound = 0.0;
  double ratio = 0.0;  // linear empirical / bound
  Verdict verdict = Verdict::Attains;
};

struct ExperimentReport {
  std::string model;
  std::int64_t trials = 0;
  std::int64_t discarded = 0;
  std::uint64_t seed = 0;
  double slack = 0.0;
  std::vector<ExperimentEntry> entries;
  std::vector<std::pair<std::string, double>> metrics;

  Verdict overall() const {
    Verdict worst = Verdict::Attains;
    for (const auto& e : entries) {
      if (e.verdict == Verdict::Violates) return Verdict::Violates;
      if (e.verdict == Verdict::Respects) worst = Verdict::Respects;
    }
    return worst;
  }
};

namespace detail {

inline ExperimentEntry compare_entry(std::string quantity, const EmpiricalMse& mse,
                                     const CrbValue& bound, double slack) {
  ExperimentEntry e;
  e.quantity = std::move(quantity);
  e.log_empirical = mse.log_gen_variance();
  e.log_bound = bound.log_value;
  e.ratio = std::exp(e.log_empirical - e.log_bound);
  e.verdict = compare(mse, bound, slack);
  return e;
}

}  // namespace detail

/// Both LMM modes against the matching bounds, plus the observed
/// joint-vs-known inflation of the x block. Default slack 0.05 suits
/// linear problems at trials >= 1e5.
inline ExperimentReport validate_lmm(const LmmSpec& spec, const Eigen::VectorXd& x_true,
                                     const Eigen::VectorXd& z_true, std::int64_t trials,
                                     std::uint64_t seed, double slack = 0.05) {
  const auto [fim, partition] = lmm_fisher(spec);
  ExperimentReport report;
  report.model = "lmm";
  report.trials = trials;
  report.seed = seed;
  report.slack = slack;

  const EmpiricalMse joint =
      run_lmm_experiment(spec, x_true, z_true, trials, seed, LmmMode::joint);
  const EmpiricalMse known =
      run_lmm_experiment(spec, x_true, z_true, trials, seed, LmmMode::z_known);

  std::vector<std::string> x_labels;
  for (Eigen::Index i = 0; i < spec.dim_x(); ++i) x_labels.push_back("x_" + std::to_string(i));
  const EmpiricalMse joint_x = submatrix(joint, x_labels);

  report.entries.push_back(detail::compare_entry(
      "genvar(x | joint LS) vs CRB(x)", joint_x, crb_marginal(fim, partition, "x"), slack));
  report.entries.push_back(detail::compare_entry(
      "genvar(x,z | joint LS) vs CRB(x,z)", joint,
      crb_joint(fim, partition, {"x", "z"}), slack));
  report.entries.push_back(detail::compare_entry(
      "genvar(x | z known) vs CRB(x|z)", known,
      crb_conditional(fim, partition, "x", {"z"}), slack));

  const double observed_inflation =
      std::exp(joint_x.log_gen_variance() - known.log_gen_variance());
  report.metrics.emplace_back("observed x inflation (joint/known)", observed_inflation);
  report.metrics.emplace_back("predicted inflation |B'B|/|B'P^perp B|", lmm_inflation(spec));
  return report;
}

/// Both sine modes against exact finite-n bounds from the signal gradients,
/// plus per-parameter inflation ratios against the dominant-matrix factors.
/// Default slack 0.15 suits the nonlinear fit at trials ~ 2000.
inline ExperimentReport validate_sine(const SineSpec& spec, std::int64_t trials,
                                      std::uint64_t seed, double slack = 0.15) {
  ExperimentReport report;
  report.model = "sine";
  report.trials = trials;
  report.seed = seed;
  report.slack = slack;

  const EmpiricalMse unknown =
      run_sine_experiment(spec, trials, seed, SineMode::omega_unknown);
  const EmpiricalMse known = run_sine_experiment(spec, trials, seed, SineMode::omega_known);
  report.discarded = unknown.discarded();

  // Exact bounds: 4-parameter model for the unknown-frequency fit, and the
  // same model with the omega column deleted for the known-frequency fit.
  const FisherMatrix fim4 = gaussian_fim(sine_signal_model(spec), sine_theta(spec), false);
  const Partition p4 = Partition::scalar(fim4.labels());
  const double omega = spec.omega;
  const Eigen::Index n = spec.samples;
  AdditiveGaussianModel known_model;
  known_model.noise_variance = spec.noise_variance;
  known_model.theta_labels = {"A", "B", "C"};
  known_model.signal_gradient = [n, omega](const Eigen::VectorXd&) {
    Eigen::MatrixXd d(n, 3);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double wk = omega * static_cast<double>(k);
      d(k, 0) = std::cos(wk);
      d(k, 1) = std::sin(wk);
      d(k, 2) = 1.0;
    }
    return d;
  };
  Eigen::VectorXd theta3(3);
  theta3 << spec.cos_amplitude, spec.sin_amplitude, spec.offset;
  const FisherMatrix fim3 = gaussian_fim(known_model, theta3, false);
  const Partition p3 = Partition::scalar(fim3.labels());

  report.entries.push_back(detail::compare_entry(
      "genvar(A,B,C | omega known) vs CRB", known, crb_joint(fim3, p3, {"A", "B", "C"}),
      slack));
  for (const std::string param : {"A", "B", "C", "omega"}) {
    report.entries.push_back(detail::compare_entry(
        "MSE(" + param + " | omega unknown) vs CRB(" + param + ")",
        submatrix(unknown, {param}), crb_marginal(fim4, p4, param), slack));
  }

  const auto factors = sine_inflation_factors(spec);
  for (const std::string param : {"A", "B", "C"}) {
    const double observed = submatrix(unknown, {param}).matrix()(0, 0) /
                            submatrix(known, {param}).matrix()(0, 0);
    report.metrics.emplace_back("observed MSE inflation " + param, observed);
    report.metrics.emplace_back("predicted inflation " + param, factors.at(param));
  }
  report.metrics.emplace_back("discarded trials", static_cast<double>(unknown.discarded()));
  return report;
}

}  // namespace crb

#endif
