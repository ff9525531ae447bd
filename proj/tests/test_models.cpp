#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "crb/fim.hpp"
#include "crb/models.hpp"
#include "oracle.hpp"
#include "test_util.hpp"

using crb::FisherMatrix;
using crb::Jacobian;
using crb::LmmSpec;
using crb::Partition;
using crb::SineSpec;
using crb::testutil::close_log;

namespace {

// the worked three-sample instance: A = e1, B = (1,1,0)'
LmmSpec worked_lmm() {
  Eigen::MatrixXd a(3, 1), b(3, 1);
  a << 1, 0, 0;
  b << 1, 1, 0;
  return LmmSpec(a, b, 1.0);
}

LmmSpec orthogonal_lmm() {
  Eigen::MatrixXd a(3, 1), b(3, 1);
  a << 1, 0, 0;
  b << 0, 1, 0;
  return LmmSpec(a, b, 1.0);
}

SineSpec some_sine(double a, double b) {
  return SineSpec(a, b, 0.3, 0.3 * std::numbers::pi, 0.01, 256);
}

}  // namespace

TEST_CASE("lmm_fisher reproduces the closed form", "[model-zoo]") {
  SECTION("orthonormal designs give an identity information block") {
    const auto [j, p] = crb::lmm_fisher(orthogonal_lmm());
    REQUIRE(j.size() == 3);
    REQUIRE(j.labels() == std::vector<std::string>{"x_0", "z_0", "v"});
    REQUIRE(j.entries().topLeftCorner(2, 2).isApprox(Eigen::MatrixXd::Identity(2, 2)));
    REQUIRE(j.entries()(2, 2) == 1.5);  // n/(2v^2)
  }
  SECTION("the noise-variance block is always decoupled") {
    const auto [j, p] = crb::lmm_fisher(worked_lmm());
    REQUIRE(crb::independence_check(j, p, "x", "v", 1e-14));
    REQUIRE(crb::independence_check(j, p, "z", "v", 1e-14));
    const Partition merged({{"xz", {0, 1}}, {"v", {2}}}, 3);
    REQUIRE(crb::independence_check(j, merged, "xz", "v", 1e-14));
    const double joint = crb::crb_joint(j, merged, {"xz", "v"}).log_value;
    const double split = crb::crb_marginal(j, merged, "xz").log_value +
                         crb::crb_marginal(j, merged, "v").log_value;
    REQUIRE(close_log(joint, split, 1e-12));
  }
  SECTION("orthogonal ranges make ignorance about z free") {
    const auto [j, p] = crb::lmm_fisher(orthogonal_lmm());
    REQUIRE(close_log(crb::crb_marginal(j, p, "x").log_value,
                      crb::crb_conditional(j, p, "x", {"z"}).log_value, 1e-12));
  }
  SECTION("rank violations are rejected") {
    Eigen::MatrixXd a(2, 1), b(2, 1);
    a << 1, 0;
    b << 0, 1;
    REQUIRE_THROWS_AS(LmmSpec(a, b, 1.0), crb::RankDeficient);  // k_x + k_z = n
    Eigen::MatrixXd a3(3, 1), b3(3, 1);
    a3 << 1, 0, 0;
    b3 << 2, 0, 0;  // B inside range(A)
    REQUIRE_THROWS_AS(LmmSpec(a3, b3, 1.0), crb::RankDeficient);
  }
}

TEST_CASE("orth_projector", "[model-zoo]") {
  SECTION("axis vector") {
    Eigen::MatrixXd a(2, 1);
    a << 1, 0;
    const Eigen::MatrixXd p = crb::orth_projector(a);
    REQUIRE(p.isApprox(Eigen::Vector2d(0, 1).asDiagonal().toDenseMatrix(), 1e-14));
  }
  SECTION("orthonormal columns give I - QQ'") {
    Eigen::MatrixXd q(3, 2);
    q << 1, 0, 0, 1, 0, 0;
    const Eigen::MatrixXd p = crb::orth_projector(q);
    REQUIRE(p.isApprox(Eigen::MatrixXd::Identity(3, 3) - q * q.transpose(), 1e-14));
  }
  SECTION("projector laws on random input") {
    crb::Rng rng(41);
    Eigen::MatrixXd a(7, 3);
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cols(); ++c) a(r, c) = rng.gaussian();
    const Eigen::MatrixXd p = crb::orth_projector(a);
    REQUIRE((p * p - p).cwiseAbs().maxCoeff() <= 1e-10);
    REQUIRE((p - p.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE((p * a).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SECTION("column-rank deficiency is rejected") {
    Eigen::MatrixXd a(3, 2);
    a << 1, 2, 0, 0, 0, 0;
    REQUIRE_THROWS_AS(crb::orth_projector(a), crb::RankDeficient);
  }
}

TEST_CASE("lmm_inflation", "[model-zoo]") {
  SECTION("worked instance doubles the bound") {
    const double f = crb::lmm_inflation(worked_lmm());
    REQUIRE_THAT(f, Catch::Matchers::WithinRel(2.0, 1e-12));
    const auto [j, p] = crb::lmm_fisher(worked_lmm());
    const double marg = crb::crb_marginal(j, p, "x").log_value;
    const double cond = crb::crb_conditional(j, p, "x", {"z"}).log_value;
    REQUIRE(close_log(marg, std::log(f) + cond, 1e-10));
  }
  SECTION("orthogonal ranges cost nothing") {
    REQUIRE_THAT(crb::lmm_inflation(orthogonal_lmm()),
                 Catch::Matchers::WithinRel(1.0, 1e-10));
  }
  SECTION("agrees with bayes_factor on random instances") {
    crb::Rng rng(43);
    for (int rep = 0; rep < 25; ++rep) {
      const Eigen::Index n = 6 + static_cast<Eigen::Index>(rng.next_u64() % 6);
      const Eigen::Index kx = 1 + static_cast<Eigen::Index>(rng.next_u64() % 2);
      const Eigen::Index kz = 1 + static_cast<Eigen::Index>(rng.next_u64() % 2);
      Eigen::MatrixXd a(n, kx), b(n, kz);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < kx; ++c) a(i, c) = rng.gaussian();
        for (Eigen::Index c = 0; c < kz; ++c) b(i, c) = rng.gaussian();
      }
      const LmmSpec spec(a, b, 0.5 + rng.uniform());
      const auto [j, p] = crb::lmm_fisher(spec);
      const auto bayes = crb::bayes_factor(j, p, "x", "z");
      REQUIRE(close_log(std::log(crb::lmm_inflation(spec)), bayes.log_factor, 1e-8));
      REQUIRE(crb::lmm_inflation(spec) >= 1.0 - 1e-10);
    }
  }
}

TEST_CASE("sine_fisher_dominant entries", "[model-zoo]") {
  const SineSpec spec(1.0, 0.0, 0.0, 0.3 * std::numbers::pi, 1.0, 100);
  const auto [j, p] = crb::sine_fisher_dominant(spec);
  REQUIRE(j.labels() == std::vector<std::string>{"A", "B", "C", "omega", "v"});
  const double n = 100.0;
  REQUIRE(j.entries()(3, 3) == n * n * n / 6.0);  // (1/2v)(A^2+B^2)n^3/3
  REQUIRE(j.entries()(0, 3) == 0.0);              // -B n^2/4v with B = 0
  REQUIRE(j.entries()(1, 3) == n * n / 4.0);      // A n^2/4v
  REQUIRE(j.entries()(2, 2) == n);                // 2n/2v
  REQUIRE(j.entries()(4, 4) == n / 2.0);          // n/(2v^2)
}

TEST_CASE("dominant-matrix frequency bounds", "[model-zoo]") {
  for (const auto& [a, b] : std::vector<std::pair<double, double>>{
           {1.0, 0.0}, {0.0, 1.0}, {0.7, -1.2}, {0.3, 0.3}}) {
    const SineSpec spec = some_sine(a, b);
    const auto [j, p] = crb::sine_fisher_dominant(spec);
    const double n3 = std::pow(static_cast<double>(spec.samples), 3);
    const double power = a * a + b * b;
    const double expected_marginal = (2.0 * spec.noise_variance / n3) * 12.0 / power;
    const double expected_cond_a =
        (2.0 * spec.noise_variance / n3) * 12.0 / (power + 3.0 * b * b);
    REQUIRE(close_log(crb::crb_marginal(j, p, "omega").log_value,
                      std::log(expected_marginal), 1e-10));
    REQUIRE(close_log(crb::crb_conditional(j, p, "omega", {"A"}).log_value,
                      std::log(expected_cond_a), 1e-10));
  }
}

TEST_CASE("sine_inflation_factors", "[model-zoo]") {
  SECTION("interval endpoints") {
    const auto f = crb::sine_inflation_factors(some_sine(0.0, 1.0));
    REQUIRE(f.at("A") == 4.0);
    REQUIRE(f.at("B") == 1.0);
    REQUIRE(f.at("C") == 1.0);
  }
  SECTION("balanced amplitudes") {
    const auto f = crb::sine_inflation_factors(some_sine(0.5, 0.5));
    REQUIRE_THAT(f.at("A"), Catch::Matchers::WithinRel(2.5, 1e-14));
    REQUIRE_THAT(f.at("B"), Catch::Matchers::WithinRel(2.5, 1e-14));
  }
  SECTION("factors match bayes_factor on the dominant matrix") {
    crb::Rng rng(47);
    for (int rep = 0; rep < 20; ++rep) {
      const double a = 2.0 * rng.uniform() - 1.0;
      const double b = 2.0 * rng.uniform() - 1.0;
      if (a * a + b * b < 1e-3) continue;
      const SineSpec spec = some_sine(a, b);
      const auto [j, p] = crb::sine_fisher_dominant(spec);
      const auto f = crb::sine_inflation_factors(spec);
      for (const std::string param : {"A", "B", "C"}) {
        const auto bayes = crb::bayes_factor(j, p, param, "omega");
        REQUIRE(close_log(std::log(f.at(param)), bayes.log_factor, 1e-8));
        REQUIRE(f.at(param) >= 1.0);
        REQUIRE(f.at(param) <= 4.0);
      }
      REQUIRE_THAT(f.at("A") + f.at("B"), Catch::Matchers::WithinRel(5.0, 1e-12));
    }
  }
}

TEST_CASE("reparameterize", "[model-zoo]") {
  const SineSpec spec = some_sine(0.8, -0.6);
  const auto [j, p] = crb::sine_fisher_dominant(spec);

  SECTION("identity map is a no-op") {
    const Jacobian id(Eigen::MatrixXd::Identity(5, 5), j.labels(), j.labels());
    const FisherMatrix out = crb::reparameterize(j, id);
    REQUIRE(out.entries().isApprox(j.entries(), 1e-14));
  }
  SECTION("round trip through the map and its inverse") {
    const Jacobian fwd = crb::amplitude_phase_jacobian(spec);
    const FisherMatrix mid = crb::reparameterize(j, fwd);
    const Jacobian back(fwd.matrix.inverse(), fwd.out_labels, fwd.in_labels);
    const FisherMatrix out = crb::reparameterize(mid, back);
    REQUIRE((out.entries() - j.entries()).cwiseAbs().maxCoeff() <=
            1e-8 * j.entries().cwiseAbs().maxCoeff());
  }
  SECTION("amplitude/phase bounds under an unknown frequency") {
    const FisherMatrix jp = crb::reparameterize(j, crb::amplitude_phase_jacobian(spec));
    const Partition pp = Partition::scalar(jp.labels());
    const auto phi = crb::bayes_factor(jp, pp, "phi", "omega");
    const auto alpha = crb::bayes_factor(jp, pp, "alpha", "omega");
    REQUIRE_THAT(phi.factor, Catch::Matchers::WithinRel(4.0, 1e-6));
    REQUIRE_THAT(alpha.factor, Catch::Matchers::WithinRel(1.0, 1e-6));
  }
  SECTION("scalar scaling scales the bound quadratically") {
    const FisherMatrix scalar = crb::make_fisher(Eigen::MatrixXd::Constant(1, 1, 5.0), {"t"});
    const Partition ps = Partition::scalar(std::vector<std::string>{"t"});
    const double c = 3.0;
    const Jacobian scale(Eigen::MatrixXd::Constant(1, 1, c), {"t"}, {"s"});
    const FisherMatrix out = crb::reparameterize(scalar, scale);
    REQUIRE(close_log(
        crb::crb_marginal(out, Partition::scalar(std::vector<std::string>{"s"}), "s").log_value,
        crb::crb_marginal(scalar, ps, "t").log_value + 2.0 * std::log(c), 1e-12));
  }
  SECTION("composition acts like the product map") {
    const Jacobian g1 = crb::amplitude_phase_jacobian(spec);
    Eigen::MatrixXd d = Eigen::VectorXd::LinSpaced(5, 1.0, 3.0).asDiagonal();
    const Jacobian g2(d, g1.out_labels, {"s0", "s1", "s2", "s3", "s4"});
    const FisherMatrix stepwise = crb::reparameterize(crb::reparameterize(j, g1), g2);
    const Jacobian product(g2.matrix * g1.matrix, g1.in_labels, g2.out_labels);
    const FisherMatrix direct = crb::reparameterize(j, product);
    REQUIRE(stepwise.entries().isApprox(direct.entries(), 1e-10));
  }
  SECTION("singular maps are rejected") {
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(5, 5);
    REQUIRE_THROWS_AS(Jacobian(zero, j.labels(), j.labels()), crb::SingularJacobian);
  }
  SECTION("label mismatch is rejected") {
    const Jacobian id(Eigen::MatrixXd::Identity(5, 5), {"A", "B", "C", "omega", "w"},
                      j.labels());
    REQUIRE_THROWS_AS(crb::reparameterize(j, id), crb::DimensionMismatch);
  }
}

TEST_CASE("more samples never hurt the linear model", "[model-zoo][property]") {
  crb::Rng rng(53);
  for (int rep = 0; rep < 40; ++rep) {
    const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.next_u64() % 5);
    Eigen::MatrixXd a(n + 3, 1), b(n + 3, 1);
    for (Eigen::Index i = 0; i < n + 3; ++i) {
      a(i, 0) = rng.gaussian();
      b(i, 0) = rng.gaussian();
    }
    const LmmSpec base(a.topRows(n), b.topRows(n), 1.0);
    const LmmSpec grown(a, b, 1.0);
    const auto [j0, p0] = crb::lmm_fisher(base);
    const auto [j1, p1] = crb::lmm_fisher(grown);
    REQUIRE(crb::crb_marginal(j1, p1, "x").log_value <=
            crb::crb_marginal(j0, p0, "x").log_value + 1e-10);
  }
}

TEST_CASE("sine spec guards its domain", "[model-zoo]") {
  REQUIRE_THROWS_AS(SineSpec(0.0, 0.0, 0.0, 1.0, 1.0, 64), crb::InvalidArgument);
  REQUIRE_THROWS_AS(SineSpec(1.0, 0.0, 0.0, 0.0, 1.0, 64), crb::InvalidArgument);
  REQUIRE_THROWS_AS(SineSpec(1.0, 0.0, 0.0, std::numbers::pi, 1.0, 64),
                    crb::InvalidArgument);
  REQUIRE_THROWS_AS(SineSpec(1.0, 0.0, 0.0, 1.0, -1.0, 64), crb::InvalidArgument);
  REQUIRE_THROWS_AS(SineSpec(1.0, 0.0, 0.0, 1.0, 1.0, 4), crb::InvalidArgument);
}
