#ifndef CRB_NUMERIC_FIM_HPP
#define CRB_NUMERIC_FIM_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "crb/errors.hpp"
#include "crb/fim.hpp"
#include "crb/models.hpp"
#include "crb/rng.hpp"

namespace crb {

/// y = signal(theta) + w with white Gaussian w of the given variance.
/// signal_gradient may be empty; the gradient is then obtained by central
/// finite differences.
struct AdditiveGaussianModel {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> signal;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> signal_gradient;  // optional
  double noise_variance = 1.0;
  std::vector<std::string> theta_labels;
};

/// Generic model given by its log-likelihood and a synthetic-data sampler.
/// The sampler must be a pure function of (theta, seed).
struct LogLikelihoodModel {
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> loglik;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, std::uint64_t)> sampler;
  std::vector<std::string> theta_labels;
};

/// Monte Carlo Fisher-matrix estimate with its per-entry standard error
/// (of the sample mean); the report channel for estimator diagnostics.
struct FimEstimate {
  FisherMatrix fim;
  Eigen::MatrixXd standard_error;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
};

namespace detail {

inline double fd_step(double theta_i, double step) {
  return step > 0.0 ? step : 1e-5 * std::max(1.0, std::abs(theta_i));
}

}  // namespace detail

/// Exact Fisher matrix of an additive white-Gaussian model at theta:
/// (1/v) D'D with D the signal gradient, plus the decoupled n/(2v^2)
/// noise-variance entry when include_noise_variance is set.
inline FisherMatrix gaussian_fim(const AdditiveGaussianModel& model,
                                 const Eigen::VectorXd& theta,
                                 bool include_noise_variance, double step = 0.0) {
  if (static_cast<Eigen::Index>(model.theta_labels.size()) != theta.size())
    throw DimensionMismatch("gaussian_fim: theta dimension does not match the labels");
  const Eigen::Index k = theta.size();
  const double v = model.noise_variance;

  Eigen::MatrixXd grad;
  if (model.signal_gradient) {
    grad = model.signal_gradient(theta);
  } else {
    Eigen::VectorXd probe = theta;
    for (Eigen::Index i = 0; i < k; ++i) {
      const double h = detail::fd_step(theta[i], step);
      probe[i] = theta[i] + h;
      const Eigen::VectorXd hi = model.signal(probe);
      probe[i] = theta[i] - h;
      const Eigen::VectorXd lo = model.signal(probe);
      probe[i] = theta[i];
      if (grad.size() == 0) grad.resize(hi.size(), k);
      grad.col(i) = (hi - lo) / (2.0 * h);
    }
  }
  const Eigen::Index n = grad.rows();

  Eigen::MatrixXd j_signal = grad.transpose() * grad / v;
  Eigen::MatrixXd sym = 0.5 * (j_signal + j_signal.transpose());
  std::vector<std::string> labels = model.theta_labels;

  Eigen::MatrixXd j = std::move(sym);
  if (include_noise_variance) {
    Eigen::MatrixXd bordered = Eigen::MatrixXd::Zero(k + 1, k + 1);
    bordered.topLeftCorner(k, k) = j;
    bordered(k, k) = static_cast<double>(n) / (2.0 * v * v);
    j = std::move(bordered);
    labels.push_back("v");
  }

  try {
    return make_fisher(std::move(j), std::move(labels));
  } catch (const NotPositiveDefinite&) {
    throw NotPositiveDefinite(
        "gaussian_fim: information matrix is singular at theta; the "
        "parameterization is not locally identifiable");
  }
}

namespace detail {

/// Central-difference score of the log-likelihood at theta for fixed data.
inline Eigen::VectorXd fd_score(const LogLikelihoodModel& model, const Eigen::VectorXd& theta,
                                const Eigen::VectorXd& y, double step) {
  const Eigen::Index k = theta.size();
  Eigen::VectorXd score(k);
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < k; ++i) {
    const double h = fd_step(theta[i], step);
    probe[i] = theta[i] + h;
    const double hi = model.loglik(probe, y);
    probe[i] = theta[i] - h;
    const double lo = model.loglik(probe, y);
    probe[i] = theta[i];
    score[i] = (hi - lo) / (2.0 * h);
  }
  return score;
}

/// Central-difference Hessian of the log-likelihood at theta for fixed data.
inline Eigen::MatrixXd fd_hessian(const LogLikelihoodModel& model, const Eigen::VectorXd& theta,
                                  const Eigen::VectorXd& y, double step) {
  const Eigen::Index k = theta.size();
  Eigen::MatrixXd hess(k, k);
  Eigen::VectorXd probe = theta;
  const double center = model.loglik(theta, y);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double hi = fd_step(theta[i], step);
    probe[i] = theta[i] + hi;
    const double up = model.loglik(probe, y);
    probe[i] = theta[i] - hi;
    const double down = model.loglik(probe, y);
    probe[i] = theta[i];
    hess(i, i) = (up - 2.0 * center + down) / (hi * hi);
    for (Eigen::Index l = i + 1; l < k; ++l) {
      const double hl = fd_step(theta[l], step);
      probe[i] = theta[i] + hi;
      probe[l] = theta[l] + hl;
      const double pp = model.loglik(probe, y);
      probe[l] = theta[l] - hl;
      const double pm = model.loglik(probe, y);
      probe[i] = theta[i] - hi;
      const double mm = model.loglik(probe, y);
      probe[l] = theta[l] + hl;
      const double mp = model.loglik(probe, y);
      probe[i] = theta[i];
      probe[l] = theta[l];
      hess(i, l) = hess(l, i) = (pp - pm - mp + mm) / (4.0 * hi * hl);
    }
  }
  return hess;
}

/// Shared Monte Carlo loop: average per-trial symmetric matrices produced
/// by `trial_matrix`, accumulate per-entry variance, and gate the mean
/// through the positive-definiteness check. Trials use counter-based
/// substreams, so the result depends only on (seed, trials).
template <typename TrialMatrix>
FimEstimate mc_fim_estimate(const LogLikelihoodModel& model, const Eigen::VectorXd& theta,
                            std::int64_t trials, std::uint64_t seed,
                            TrialMatrix&& trial_matrix, const std::string& name) {
  if (trials < 2) throw InvalidArgument(name + ": needs at least 2 trials");
  if (static_cast<Eigen::Index>(model.theta_labels.size()) != theta.size())
    throw DimensionMismatch(name + ": theta dimension does not match the labels");
  const Eigen::Index k = theta.size();

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(k, k);
  for (std::int64_t t = 0; t < trials; ++t) {
    const Eigen::VectorXd y = model.sampler(theta, substream(seed, static_cast<std::uint64_t>(t)));
    const Eigen::MatrixXd m = trial_matrix(y);
    sum += m;
    sum_sq += m.cwiseProduct(m);
  }
  const double tn = static_cast<double>(trials);
  Eigen::MatrixXd mean = sum / tn;
  Eigen::MatrixXd var = (sum_sq / tn - mean.cwiseProduct(mean)) * (tn / (tn - 1.0));
  Eigen::MatrixXd se = (var / tn).cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd sym = 0.5 * (mean + mean.transpose());

  try {
    return FimEstimate{make_fisher(std::move(sym), model.theta_labels), std::move(se),
                       trials, seed};
  } catch (const NotPositiveDefinite&) {
    Eigen::MatrixXd resym = 0.5 * (mean + mean.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(resym, Eigen::EigenvaluesOnly);
    throw NotPositiveDefinite(
        name + ": estimated information matrix is not positive definite "
               "(smallest eigenvalue " +
        std::to_string(es.eigenvalues()[0]) + "); raise the trial count");
  }
}

}  // namespace detail

/// Sample mean of score outer products, scores by central differences.
inline FimEstimate mc_score_fim(const LogLikelihoodModel& model, const Eigen::VectorXd& theta,
                                std::int64_t trials, std::uint64_t seed, double step = 0.0) {
  return detail::mc_fim_estimate(
      model, theta, trials, seed,
      [&](const Eigen::VectorXd& y) -> Eigen::MatrixXd {
        const Eigen::VectorXd s = detail::fd_score(model, theta, y, step);
        return s * s.transpose();
      },
      "mc_score_fim");
}

/// Sample mean of negated finite-difference Hessians of the log-likelihood.
inline FimEstimate fd_hessian_fim(const LogLikelihoodModel& model, const Eigen::VectorXd& theta,
                                  std::int64_t trials, std::uint64_t seed, double step = 0.0) {
  return detail::mc_fim_estimate(
      model, theta, trials, seed,
      [&](const Eigen::VectorXd& y) -> Eigen::MatrixXd {
        return -detail::fd_hessian(model, theta, y, step);
      },
      "fd_hessian_fim");
}

// ---------------------------------------------------------------------------
// Built-in models shared by the CLI and the validation harness.

/// Constant-mean model x(theta) = theta * 1_n.
inline AdditiveGaussianModel gaussian_mean_model(Eigen::Index n, double v) {
  AdditiveGaussianModel m;
  m.signal = [n](const Eigen::VectorXd& theta) {
    return Eigen::VectorXd::Constant(n, theta[0]).eval();
  };
  m.signal_gradient = [n](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Ones(n, 1).eval();
  };
  m.noise_variance = v;
  m.theta_labels = {"mu"};
  return m;
}

inline LogLikelihoodModel gaussian_mean_loglik(Eigen::Index n, double v) {
  LogLikelihoodModel m;
  m.loglik = [n, v](const Eigen::VectorXd& theta, const Eigen::VectorXd& y) {
    return -0.5 / v * (y.array() - theta[0]).square().sum();
  };
  m.sampler = [n, v](const Eigen::VectorXd& theta, std::uint64_t seed) {
    Rng rng(seed);
    return (Eigen::VectorXd::Constant(n, theta[0]) +
            std::sqrt(v) * rng.gaussian_vector(n))
        .eval();
  };
  m.theta_labels = {"mu"};
  return m;
}

/// LMM signal model over theta = (x..., z...); noise variance from the spec.
inline AdditiveGaussianModel lmm_signal_model(const LmmSpec& spec) {
  AdditiveGaussianModel m;
  const Eigen::Index kx = spec.dim_x();
  const Eigen::Index kz = spec.dim_z();
  Eigen::MatrixXd design(spec.samples(), kx + kz);
  design << spec.design_x, spec.design_z;
  m.signal = [design](const Eigen::VectorXd& theta) { return (design * theta).eval(); };
  m.signal_gradient = [design](const Eigen::VectorXd&) { return design; };
  m.noise_variance = spec.noise_variance;
  for (Eigen::Index i = 0; i < kx; ++i) m.theta_labels.push_back("x_" + std::to_string(i));
  for (Eigen::Index i = 0; i < kz; ++i) m.theta_labels.push_back("z_" + std::to_string(i));
  return m;
}

/// LMM log-likelihood model over theta = (x..., z..., v); matches the
/// parameter set of lmm_fisher.
inline LogLikelihoodModel lmm_loglik_model(const LmmSpec& spec) {
  LogLikelihoodModel m;
  const Eigen::Index kx = spec.dim_x();
  const Eigen::Index kz = spec.dim_z();
  const Eigen::Index n = spec.samples();
  Eigen::MatrixXd design(n, kx + kz);
  design << spec.design_x, spec.design_z;
  m.loglik = [design, n](const Eigen::VectorXd& theta, const Eigen::VectorXd& y) {
    const Eigen::Index k = design.cols();
    const double v = theta[k];
    if (v <= 0.0) return -std::numeric_limits<double>::infinity();
    const Eigen::VectorXd resid = y - design * theta.head(k);
    return -0.5 * n * std::log(2.0 * std::numbers::pi * v) -
           resid.squaredNorm() / (2.0 * v);
  };
  m.sampler = [design](const Eigen::VectorXd& theta, std::uint64_t seed) {
    const Eigen::Index k = design.cols();
    Rng rng(seed);
    return (design * theta.head(k) +
            std::sqrt(theta[k]) * rng.gaussian_vector(design.rows()))
        .eval();
  };
  for (Eigen::Index i = 0; i < kx; ++i) m.theta_labels.push_back("x_" + std::to_string(i));
  for (Eigen::Index i = 0; i < kz; ++i) m.theta_labels.push_back("z_" + std::to_string(i));
  m.theta_labels.push_back("v");
  return m;
}

/// Sine signal model over theta = (A, B, C, omega) with analytic gradient;
/// the exact finite-n counterpart of the dominant matrix.
inline AdditiveGaussianModel sine_signal_model(const SineSpec& spec) {
  AdditiveGaussianModel m;
  const Eigen::Index n = spec.samples;
  m.signal = [n](const Eigen::VectorXd& theta) {
    Eigen::VectorXd x(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double wk = theta[3] * static_cast<double>(k);
      x[k] = theta[0] * std::cos(wk) + theta[1] * std::sin(wk) + theta[2];
    }
    return x;
  };
  m.signal_gradient = [n](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd d(n, 4);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double kk = static_cast<double>(k);
      const double wk = theta[3] * kk;
      const double c = std::cos(wk);
      const double s = std::sin(wk);
      d(k, 0) = c;
      d(k, 1) = s;
      d(k, 2) = 1.0;
      d(k, 3) = kk * (-theta[0] * s + theta[1] * c);
    }
    return d;
  };
  m.noise_variance = spec.noise_variance;
  m.theta_labels = {"A", "B", "C", "omega"};
  return m;
}

inline Eigen::VectorXd sine_theta(const SineSpec& spec) {
  Eigen::VectorXd theta(4);
  theta << spec.cos_amplitude, spec.sin_amplitude, spec.offset, spec.omega;
  return theta;
}

/// Sine log-likelihood model over theta = (A, B, C, omega, v).
inline LogLikelihoodModel sine_loglik_model(const SineSpec& spec) {
  LogLikelihoodModel m;
  const Eigen::Index n = spec.samples;
  const auto signal = [n](const Eigen::VectorXd& theta) {
    Eigen::VectorXd x(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double wk = theta[3] * static_cast<double>(k);
      x[k] = theta[0] * std::cos(wk) + theta[1] * std::sin(wk) + theta[2];
    }
    return x;
  };
  m.loglik = [signal, n](const Eigen::VectorXd& theta, const Eigen::VectorXd& y) {
    const double v = theta[4];
    if (v <= 0.0) return -std::numeric_limits<double>::infinity();
    return -0.5 * n * std::log(2.0 * std::numbers::pi * v) -
           (y - signal(theta)).squaredNorm() / (2.0 * v);
  };
  m.sampler = [signal](const Eigen::VectorXd& theta, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::VectorXd x = signal(theta);
    return (x + std::sqrt(theta[4]) * rng.gaussian_vector(x.size())).eval();
  };
  m.theta_labels = {"A", "B", "C", "omega", "v"};
  return m;
}

}  // namespace crb

#endif
