// crb: command-line front end for the Cramér-Rao bound toolkit.
//
// Exit codes: 0 success, 2 config/usage error, 3 numerical failure,
// 4 a Monte Carlo experiment violated its bound.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include "crb/crb.hpp"

namespace {

using crb::FisherMatrix;
using crb::Partition;
using crb::Report;

struct FimSource {
  FisherMatrix fisher;
  Partition partition;
  std::string origin;
};

/// Load the working matrix either from a matrix file or from a built-in
/// model config. A sine model is reparameterized to (alpha, phi, C, omega,
/// v) when any requested block name asks for the amplitude/phase view.
FimSource resolve_fim(const std::string& matrix_path, const std::string& model_path,
                      const std::vector<std::string>& requested) {
  if (matrix_path.empty() == model_path.empty())
    throw crb::ConfigError("exactly one of --matrix or --model is required");
  if (!matrix_path.empty()) {
    crb::MatrixFile file = crb::load_matrix_file(matrix_path);
    return {std::move(file.fisher), std::move(file.partition), matrix_path};
  }
  const crb::ModelConfig config = crb::load_model_config(model_path);
  if (std::holds_alternative<crb::LmmSpec>(config.model)) {
    auto [fisher, partition] = crb::lmm_fisher(std::get<crb::LmmSpec>(config.model));
    return {std::move(fisher), std::move(partition), model_path};
  }
  if (std::holds_alternative<crb::SineSpec>(config.model)) {
    const auto& spec = std::get<crb::SineSpec>(config.model);
    auto [fisher, partition] = crb::sine_fisher_dominant(spec);
    const bool wants_polar =
        std::find(requested.begin(), requested.end(), "alpha") != requested.end() ||
        std::find(requested.begin(), requested.end(), "phi") != requested.end();
    if (wants_polar) {
      FisherMatrix polar = crb::reparameterize(fisher, crb::amplitude_phase_jacobian(spec));
      Partition scalar = Partition::scalar(polar.labels());
      return {std::move(polar), std::move(scalar), model_path};
    }
    return {std::move(fisher), std::move(partition), model_path};
  }
  throw crb::ConfigError("this command needs an lmm or sine model config");
}

std::string join_names(const std::vector<std::string>& names, const char* sep = ",") {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += sep;
    out += n;
  }
  return out;
}

void print_report(const Report& report, const std::string& output) {
  if (output == "json")
    std::cout << report.to_json().dump(2) << "\n";
  else if (output == "csv")
    std::cout << report.to_csv();
  else
    std::cout << report.to_text();
}

// ---------------------------------------------------------------------------
// shared option bundles

struct CommonOpts {
  std::string output = "text";
};

void add_output_option(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--output", opts.output, "Report format")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();
}

struct MatrixOpts {
  std::string matrix_path;
  std::string model_path;
};

void add_matrix_options(CLI::App* cmd, MatrixOpts& opts) {
  cmd->add_option("--matrix", opts.matrix_path, "Matrix file (JSON)");
  cmd->add_option("--model", opts.model_path, "Model config (lmm or sine JSON)");
}

// ---------------------------------------------------------------------------
// model helpers for `fim` and `validate`

crb::LogLikelihoodModel builtin_loglik(const crb::ModelConfig& config,
                                       Eigen::VectorXd* theta) {
  if (std::holds_alternative<crb::LmmSpec>(config.model)) {
    const auto& spec = std::get<crb::LmmSpec>(config.model);
    crb::LogLikelihoodModel model = crb::lmm_loglik_model(spec);
    theta->setZero(spec.dim_x() + spec.dim_z() + 1);
    (*theta)[theta->size() - 1] = spec.noise_variance;
    return model;
  }
  if (std::holds_alternative<crb::SineSpec>(config.model)) {
    const auto& spec = std::get<crb::SineSpec>(config.model);
    crb::LogLikelihoodModel model = crb::sine_loglik_model(spec);
    theta->resize(5);
    *theta << spec.cos_amplitude, spec.sin_amplitude, spec.offset, spec.omega,
        spec.noise_variance;
    return model;
  }
  const auto& custom = std::get<crb::CustomLoglikConfig>(config.model);
  if (custom.name == "gaussian-mean") {
    const auto n = crb::detail::require<Eigen::Index>(custom.raw, "n");
    const auto v = crb::detail::require<double>(custom.raw, "v");
    theta->setZero(1);
    return crb::gaussian_mean_loglik(n, v);
  }
  throw crb::ConfigError("unknown custom-loglik model '" + custom.name +
                         "' (built-ins: gaussian-mean)");
}

crb::AdditiveGaussianModel builtin_signal(const crb::ModelConfig& config,
                                          Eigen::VectorXd* theta) {
  if (std::holds_alternative<crb::LmmSpec>(config.model)) {
    const auto& spec = std::get<crb::LmmSpec>(config.model);
    theta->setZero(spec.dim_x() + spec.dim_z());
    return crb::lmm_signal_model(spec);
  }
  if (std::holds_alternative<crb::SineSpec>(config.model)) {
    const auto& spec = std::get<crb::SineSpec>(config.model);
    *theta = crb::sine_theta(spec);
    return crb::sine_signal_model(spec);
  }
  const auto& custom = std::get<crb::CustomLoglikConfig>(config.model);
  if (custom.name == "gaussian-mean") {
    const auto n = crb::detail::require<Eigen::Index>(custom.raw, "n");
    const auto v = crb::detail::require<double>(custom.raw, "v");
    theta->setZero(1);
    return crb::gaussian_mean_model(n, v);
  }
  throw crb::ConfigError("unknown custom-loglik model '" + custom.name +
                         "' (built-ins: gaussian-mean)");
}

void apply_theta_override(const crb::ModelConfig& config, Eigen::VectorXd* theta) {
  if (!config.theta) return;
  if (static_cast<Eigen::Index>(config.theta->size()) != theta->size())
    throw crb::ConfigError("config theta has " + std::to_string(config.theta->size()) +
                           " entries; the model expects " + std::to_string(theta->size()));
  for (Eigen::Index i = 0; i < theta->size(); ++i) (*theta)[i] = (*config.theta)[i];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cramér-Rao bound decompositions over partitioned Fisher matrices"};
  app.require_subcommand(1);

  // joint
  auto joint_opts = std::make_shared<MatrixOpts>();
  auto joint_common = std::make_shared<CommonOpts>();
  auto joint_blocks = std::make_shared<std::vector<std::string>>();
  CLI::App* joint = app.add_subcommand("joint", "Joint bound for a set of blocks");
  add_matrix_options(joint, *joint_opts);
  add_output_option(joint, *joint_common);
  joint->add_option("--blocks", *joint_blocks, "Block names")->delimiter(',')->required();

  // marginal
  auto marg_opts = std::make_shared<MatrixOpts>();
  auto marg_common = std::make_shared<CommonOpts>();
  auto marg_interest = std::make_shared<std::string>();
  CLI::App* marginal =
      app.add_subcommand("marginal", "Bound for one block, everything else unknown");
  add_matrix_options(marginal, *marg_opts);
  add_output_option(marginal, *marg_common);
  marginal->add_option("--interest", *marg_interest, "Block of interest")->required();

  // conditional
  auto cond_opts = std::make_shared<MatrixOpts>();
  auto cond_common = std::make_shared<CommonOpts>();
  auto cond_interest = std::make_shared<std::string>();
  auto cond_known = std::make_shared<std::vector<std::string>>();
  CLI::App* conditional =
      app.add_subcommand("conditional", "Bound for one block with some blocks known");
  add_matrix_options(conditional, *cond_opts);
  add_output_option(conditional, *cond_common);
  conditional->add_option("--interest", *cond_interest, "Block of interest")->required();
  conditional->add_option("--known", *cond_known, "Blocks treated as known")->delimiter(',');

  // chain
  auto chain_opts = std::make_shared<MatrixOpts>();
  auto chain_common = std::make_shared<CommonOpts>();
  auto chain_order = std::make_shared<std::vector<std::string>>();
  CLI::App* chain = app.add_subcommand("chain", "Chain-rule factorization of the joint bound");
  add_matrix_options(chain, *chain_opts);
  add_output_option(chain, *chain_common);
  chain->add_option("--order", *chain_order, "Block permutation")->delimiter(',')->required();

  // bayes
  auto bayes_opts = std::make_shared<MatrixOpts>();
  auto bayes_common = std::make_shared<CommonOpts>();
  auto bayes_interest = std::make_shared<std::string>();
  auto bayes_other = std::make_shared<std::string>();
  CLI::App* bayes = app.add_subcommand("bayes", "Bayes-rule factor CRB(b)/CRB(b|a)");
  add_matrix_options(bayes, *bayes_opts);
  add_output_option(bayes, *bayes_common);
  bayes->add_option("--interest", *bayes_interest, "Block of interest")->required();
  bayes->add_option("--other", *bayes_other, "Nuisance block")->required();

  // independence
  auto indep_opts = std::make_shared<MatrixOpts>();
  auto indep_common = std::make_shared<CommonOpts>();
  auto indep_a = std::make_shared<std::string>();
  auto indep_b = std::make_shared<std::string>();
  auto indep_tol = std::make_shared<double>(1e-12);
  CLI::App* independence =
      app.add_subcommand("independence", "Test whether two blocks decouple");
  add_matrix_options(independence, *indep_opts);
  add_output_option(independence, *indep_common);
  independence->add_option("--a", *indep_a, "First block")->required();
  independence->add_option("--b", *indep_b, "Second block")->required();
  independence->add_option("--tol", *indep_tol, "Relative cross-block tolerance")
      ->capture_default_str();

  // lmm
  auto lmm_common = std::make_shared<CommonOpts>();
  auto lmm_config = std::make_shared<std::string>();
  auto lmm_inflation_only = std::make_shared<bool>(false);
  CLI::App* lmm = app.add_subcommand("lmm", "Linear mixed model bounds and inflation");
  add_output_option(lmm, *lmm_common);
  lmm->add_option("--config", *lmm_config, "LMM config (JSON)")->required();
  lmm->add_flag("--inflation", *lmm_inflation_only, "Report only the inflation factor");

  // sine
  auto sine_common = std::make_shared<CommonOpts>();
  auto sine_config = std::make_shared<std::string>();
  auto sine_factors_only = std::make_shared<bool>(false);
  CLI::App* sine = app.add_subcommand("sine", "Sine-model dominant-matrix bounds");
  add_output_option(sine, *sine_common);
  sine->add_option("--config", *sine_config, "Sine config (JSON)")->required();
  sine->add_flag("--factors", *sine_factors_only, "Report only the inflation factors");

  // fim
  auto fim_common = std::make_shared<CommonOpts>();
  auto fim_config = std::make_shared<std::string>();
  auto fim_method = std::make_shared<std::string>("gaussian");
  auto fim_include_v = std::make_shared<bool>(false);
  auto fim_trials = std::make_shared<std::int64_t>(10000);
  auto fim_seed = std::make_shared<std::uint64_t>(0);
  auto fim_step = std::make_shared<double>(0.0);
  CLI::App* fim = app.add_subcommand("fim", "Fisher matrix of a model");
  add_output_option(fim, *fim_common);
  fim->add_option("--config", *fim_config, "Model config (JSON)")->required();
  fim->add_option("--method", *fim_method, "gaussian | score | hessian")
      ->check(CLI::IsMember({"gaussian", "score", "hessian"}))
      ->capture_default_str();
  fim->add_flag("--include-v", *fim_include_v,
                "Append the noise-variance block (gaussian method)");
  fim->add_option("--trials", *fim_trials, "Monte Carlo trials")->capture_default_str();
  fim->add_option("--seed", *fim_seed, "Random seed")->capture_default_str();
  fim->add_option("--step", *fim_step, "Finite-difference step (0 = automatic)")
      ->capture_default_str();

  // validate
  auto val_common = std::make_shared<CommonOpts>();
  auto val_config = std::make_shared<std::string>();
  auto val_trials = std::make_shared<std::int64_t>(0);
  auto val_seed = std::make_shared<std::uint64_t>(0);
  auto val_slack = std::make_shared<double>(0.0);
  CLI::App* validate =
      app.add_subcommand("validate", "Monte Carlo check of estimator MSE against the bounds");
  add_output_option(validate, *val_common);
  validate->add_option("--config", *val_config, "Model config (JSON)")->required();
  validate->add_option("--trials", *val_trials, "Trials (0 = model default)")
      ->capture_default_str();
  validate->add_option("--seed", *val_seed, "Random seed")->capture_default_str();
  validate->add_option("--slack", *val_slack, "Sampling slack (0 = model default)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (joint->parsed()) {
      const FimSource src = resolve_fim(joint_opts->matrix_path, joint_opts->model_path,
                                        *joint_blocks);
      Report report;
      report.command = "joint";
      report.context.emplace_back("input", src.origin);
      report.context.emplace_back("blocks", join_names(*joint_blocks));
      report.add_crb("CRB(" + join_names(*joint_blocks) + ")",
                     crb::crb_joint(src.fisher, src.partition, *joint_blocks));
      print_report(report, joint_common->output);
    } else if (marginal->parsed()) {
      const FimSource src = resolve_fim(marg_opts->matrix_path, marg_opts->model_path,
                                        {*marg_interest});
      Report report;
      report.command = "marginal";
      report.context.emplace_back("input", src.origin);
      report.add_crb("CRB(" + *marg_interest + ")",
                     crb::crb_marginal(src.fisher, src.partition, *marg_interest));
      print_report(report, marg_common->output);
    } else if (conditional->parsed()) {
      std::vector<std::string> requested = *cond_known;
      requested.push_back(*cond_interest);
      const FimSource src =
          resolve_fim(cond_opts->matrix_path, cond_opts->model_path, requested);
      Report report;
      report.command = "conditional";
      report.context.emplace_back("input", src.origin);
      report.add_crb(
          "CRB(" + *cond_interest + "|" + join_names(*cond_known) + ")",
          crb::crb_conditional(src.fisher, src.partition, *cond_interest, *cond_known));
      print_report(report, cond_common->output);
    } else if (chain->parsed()) {
      const FimSource src =
          resolve_fim(chain_opts->matrix_path, chain_opts->model_path, *chain_order);
      Report report;
      report.command = "chain";
      report.context.emplace_back("input", src.origin);
      report.context.emplace_back("order", join_names(*chain_order));
      double log_sum = 0.0;
      const auto factors = crb::chain_decompose(src.fisher, src.partition, *chain_order);
      for (std::size_t i = 0; i < factors.size(); ++i) {
        const auto& [name, value] = factors[i];
        std::vector<std::string> later(chain_order->begin() + i + 1, chain_order->end());
        const std::string label =
            later.empty() ? "CRB(" + name + ")" : "CRB(" + name + "|" + join_names(later) + ")";
        report.add_crb(label, value);
        log_sum += value.log_value;
      }
      crb::CrbValue joint_value =
          crb::crb_joint(src.fisher, src.partition, src.partition.block_names());
      report.add_crb("CRB(" + join_names(src.partition.block_names()) + ")", joint_value);
      report.add_scalar("log-sum of factors", log_sum);
      print_report(report, chain_common->output);
    } else if (bayes->parsed()) {
      const FimSource src = resolve_fim(bayes_opts->matrix_path, bayes_opts->model_path,
                                        {*bayes_interest, *bayes_other});
      const auto decomposition =
          crb::bayes_factor(src.fisher, src.partition, *bayes_interest, *bayes_other);
      Report report;
      report.command = "bayes";
      report.context.emplace_back("input", src.origin);
      report.context.emplace_back("interest", *bayes_interest);
      report.context.emplace_back("other", *bayes_other);
      report.add_scalar("factor CRB(" + *bayes_other + ")/CRB(" + *bayes_other + "|" +
                            *bayes_interest + ")",
                        decomposition.factor);
      report.add_crb("CRB(" + *bayes_interest + ")", decomposition.lhs);
      report.add_crb("CRB(" + *bayes_interest + "|" + *bayes_other + ")",
                     crb::crb_conditional(src.fisher, src.partition, *bayes_interest,
                                          {*bayes_other}));
      report.add_crb("factor * CRB(" + *bayes_interest + "|" + *bayes_other + ")",
                     decomposition.rhs_product);
      print_report(report, bayes_common->output);
    } else if (independence->parsed()) {
      const FimSource src = resolve_fim(indep_opts->matrix_path, indep_opts->model_path,
                                        {*indep_a, *indep_b});
      const bool verdict =
          crb::independence_check(src.fisher, src.partition, *indep_a, *indep_b, *indep_tol);
      Report report;
      report.command = "independence";
      report.context.emplace_back("input", src.origin);
      report.add_text("independent(" + *indep_a + "," + *indep_b + ")",
                      verdict ? "true" : "false");
      const auto& ia = src.partition.block(*indep_a).indices;
      const auto& ib = src.partition.block(*indep_b).indices;
      report.add_scalar("max |cross entry|",
                        src.fisher.entries()(ia, ib).cwiseAbs().maxCoeff());
      print_report(report, indep_common->output);
    } else if (lmm->parsed()) {
      const crb::ModelConfig config = crb::load_model_config(*lmm_config);
      if (!std::holds_alternative<crb::LmmSpec>(config.model))
        throw crb::ConfigError("crb lmm needs a config with \"model\": \"lmm\"");
      const auto& spec = std::get<crb::LmmSpec>(config.model);
      const auto [fisher, partition] = crb::lmm_fisher(spec);
      Report report;
      report.command = "lmm";
      report.context.emplace_back("config", *lmm_config);
      report.add_scalar("inflation |B'B|/|B'P^perp B|", crb::lmm_inflation(spec));
      if (!*lmm_inflation_only) {
        report.add_crb("CRB(x)", crb::crb_marginal(fisher, partition, "x"));
        report.add_crb("CRB(x|z)", crb::crb_conditional(fisher, partition, "x", {"z"}));
        report.add_crb("CRB(z)", crb::crb_marginal(fisher, partition, "z"));
        report.add_crb("CRB(v)", crb::crb_marginal(fisher, partition, "v"));
        report.add_text("independent(x,v)",
                        crb::independence_check(fisher, partition, "x", "v", 1e-12)
                            ? "true"
                            : "false");
      }
      print_report(report, lmm_common->output);
    } else if (sine->parsed()) {
      const crb::ModelConfig config = crb::load_model_config(*sine_config);
      if (!std::holds_alternative<crb::SineSpec>(config.model))
        throw crb::ConfigError("crb sine needs a config with \"model\": \"sine\"");
      const auto& spec = std::get<crb::SineSpec>(config.model);
      const auto [fisher, partition] = crb::sine_fisher_dominant(spec);
      const auto factors = crb::sine_inflation_factors(spec);
      Report report;
      report.command = "sine";
      report.context.emplace_back("config", *sine_config);
      report.add_scalar("inflation A", factors.at("A"));
      report.add_scalar("inflation B", factors.at("B"));
      report.add_scalar("inflation C", factors.at("C"));
      if (!*sine_factors_only) {
        report.add_crb("CRB(omega)", crb::crb_marginal(fisher, partition, "omega"));
        report.add_crb("CRB(omega|A)",
                       crb::crb_conditional(fisher, partition, "omega", {"A"}));
        const FisherMatrix polar =
            crb::reparameterize(fisher, crb::amplitude_phase_jacobian(spec));
        const Partition pp = Partition::scalar(polar.labels());
        report.add_scalar("factor phi vs omega",
                          crb::bayes_factor(polar, pp, "phi", "omega").factor);
        report.add_scalar("factor alpha vs omega",
                          crb::bayes_factor(polar, pp, "alpha", "omega").factor);
      }
      print_report(report, sine_common->output);
    } else if (fim->parsed()) {
      const crb::ModelConfig config = crb::load_model_config(*fim_config);
      Eigen::VectorXd theta;
      Report report;
      report.command = "fim";
      report.context.emplace_back("config", *fim_config);
      report.context.emplace_back("method", *fim_method);
      std::optional<FisherMatrix> result;
      Eigen::MatrixXd standard_error;
      if (*fim_method == "gaussian") {
        const crb::AdditiveGaussianModel model = builtin_signal(config, &theta);
        apply_theta_override(config, &theta);
        result = crb::gaussian_fim(model, theta, *fim_include_v, *fim_step);
      } else {
        const crb::LogLikelihoodModel model = builtin_loglik(config, &theta);
        apply_theta_override(config, &theta);
        const crb::FimEstimate estimate =
            *fim_method == "score"
                ? crb::mc_score_fim(model, theta, *fim_trials, *fim_seed, *fim_step)
                : crb::fd_hessian_fim(model, theta, *fim_trials, *fim_seed, *fim_step);
        result = estimate.fim;
        standard_error = estimate.standard_error;
        report.context.emplace_back("trials", std::to_string(estimate.trials));
        report.context.emplace_back("seed", std::to_string(estimate.seed));
      }
      if (fim_common->output == "json") {
        nlohmann::ordered_json out =
            crb::fisher_to_json(*result, Partition::scalar(result->labels()));
        if (standard_error.size() > 0) {
          nlohmann::ordered_json se = nlohmann::ordered_json::array();
          for (Eigen::Index r = 0; r < standard_error.rows(); ++r) {
            nlohmann::ordered_json row = nlohmann::ordered_json::array();
            for (Eigen::Index c = 0; c < standard_error.cols(); ++c)
              row.push_back(standard_error(r, c));
            se.push_back(std::move(row));
          }
          out["standard_error"] = std::move(se);
        }
        std::cout << out.dump(2) << "\n";
      } else {
        const auto& labels = result->labels();
        for (Eigen::Index r = 0; r < result->size(); ++r)
          for (Eigen::Index c = 0; c <= r; ++c)
            report.add_scalar("J(" + labels[r] + "," + labels[c] + ")",
                              result->entries()(r, c));
        print_report(report, fim_common->output);
      }
    } else if (validate->parsed()) {
      const crb::ModelConfig config = crb::load_model_config(*val_config);
      crb::ExperimentReport experiment;
      if (std::holds_alternative<crb::LmmSpec>(config.model)) {
        const auto& spec = std::get<crb::LmmSpec>(config.model);
        const std::int64_t trials = *val_trials > 0 ? *val_trials : 100000;
        const double slack = *val_slack > 0 ? *val_slack : 0.05;
        experiment = crb::validate_lmm(spec, Eigen::VectorXd::Ones(spec.dim_x()),
                                       Eigen::VectorXd::Ones(spec.dim_z()), trials,
                                       *val_seed, slack);
      } else if (std::holds_alternative<crb::SineSpec>(config.model)) {
        const auto& spec = std::get<crb::SineSpec>(config.model);
        const std::int64_t trials = *val_trials > 0 ? *val_trials : 2000;
        const double slack = *val_slack > 0 ? *val_slack : 0.15;
        experiment = crb::validate_sine(spec, trials, *val_seed, slack);
      } else {
        throw crb::ConfigError("crb validate needs an lmm or sine model config");
      }
      print_report(crb::to_report(experiment, "validate"), val_common->output);
      if (experiment.overall() == crb::Verdict::Violates) return 4;
    }
  } catch (const crb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const crb::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const crb::InvalidOrder& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const crb::EmptyComplement& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const crb::DimensionMismatch& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const crb::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
