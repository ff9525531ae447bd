#ifndef CRB_FIM_HPP
#define CRB_FIM_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "crb/errors.hpp"

namespace crb {

namespace detail {

/// log|M| for symmetric positive-definite M via Cholesky. `what` names the
/// quantity in the error when the factorization breaks.
inline double spd_logdet(const Eigen::MatrixXd& m, const std::string& what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("Cholesky factorization failed for " + what);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline std::string join(std::span<const std::string> names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += ",";
    out += n;
  }
  return out;
}

}  // namespace detail

/// Labeled symmetric positive-definite Fisher information matrix.
///
/// Construction symmetrizes the input by averaging with its transpose
/// (after checking the asymmetry is within a 1e-10 relative tolerance) and
/// requires a successful Cholesky factorization. Instances are immutable.
class FisherMatrix {
 public:
  static constexpr double kSymmetryTolerance = 1e-10;

  FisherMatrix(Eigen::MatrixXd entries, std::vector<std::string> labels)
      : entries_(std::move(entries)), labels_(std::move(labels)) {
    if (entries_.rows() != entries_.cols())
      throw DimensionMismatch("FisherMatrix: matrix must be square, got " +
                              std::to_string(entries_.rows()) + "x" +
                              std::to_string(entries_.cols()));
    if (entries_.rows() == 0)
      throw InvalidArgument("FisherMatrix: matrix must be non-empty");
    if (static_cast<Eigen::Index>(labels_.size()) != entries_.rows())
      throw DimensionMismatch("FisherMatrix: " + std::to_string(labels_.size()) +
                              " labels for a " + std::to_string(entries_.rows()) +
                              "-dimensional matrix");
    std::set<std::string> seen(labels_.begin(), labels_.end());
    if (seen.size() != labels_.size())
      throw InvalidArgument("FisherMatrix: parameter labels must be unique");

    const double scale = entries_.cwiseAbs().maxCoeff();
    const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
    if (asym > kSymmetryTolerance * scale)
      throw NotSymmetric("FisherMatrix: asymmetry " + std::to_string(asym) +
                         " exceeds tolerance " + std::to_string(kSymmetryTolerance * scale));
    Eigen::MatrixXd sym = 0.5 * (entries_ + entries_.transpose());
    entries_ = std::move(sym);

    Eigen::LLT<Eigen::MatrixXd> llt(entries_);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("FisherMatrix: matrix is not positive definite");
  }

  Eigen::Index size() const { return entries_.rows(); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  const std::vector<std::string>& labels() const { return labels_; }

  Eigen::Index index_of(const std::string& label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end())
      throw InvalidArgument("FisherMatrix: no parameter labeled '" + label + "'");
    return static_cast<Eigen::Index>(it - labels_.begin());
  }

  /// Spectral condition number estimate; tests use it to reject
  /// pathological random draws before asserting identity tolerances.
  double condition_estimate() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(entries_, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    if (ev[0] <= 0.0) return std::numeric_limits<double>::infinity();
    return ev[ev.size() - 1] / ev[0];
  }

 private:
  Eigen::MatrixXd entries_;
  std::vector<std::string> labels_;
};

/// Validated factory, the usual entry point.
inline FisherMatrix make_fisher(Eigen::MatrixXd entries, std::vector<std::string> labels) {
  return FisherMatrix(std::move(entries), std::move(labels));
}

struct Block {
  std::string name;
  std::vector<Eigen::Index> indices;
};

/// Ordered, disjoint, non-empty index blocks over the parameters of a
/// FisherMatrix. Blocks are index sets and need not be contiguous.
///
/// Convention used by every bound computation: parameters not covered by
/// any block are treated as known (their rows and columns are excluded
/// from the algebra); blocks that are neither of interest nor declared
/// known are unknown nuisance parameters and get Schur-eliminated.
class Partition {
 public:
  Partition(std::vector<Block> blocks, Eigen::Index dimension)
      : blocks_(std::move(blocks)), dimension_(dimension) {
    if (blocks_.empty()) throw InvalidArgument("Partition: needs at least one block");
    std::set<std::string> names;
    std::set<Eigen::Index> used;
    for (const auto& b : blocks_) {
      if (b.indices.empty())
        throw InvalidArgument("Partition: block '" + b.name + "' is empty");
      if (!names.insert(b.name).second)
        throw InvalidArgument("Partition: duplicate block name '" + b.name + "'");
      for (const auto i : b.indices) {
        if (i < 0 || i >= dimension_)
          throw InvalidArgument("Partition: index " + std::to_string(i) +
                                " outside 0.." + std::to_string(dimension_ - 1));
        if (!used.insert(i).second)
          throw InvalidArgument("Partition: index " + std::to_string(i) +
                                " appears in more than one block");
      }
    }
  }

  /// One scalar block per label, in label order.
  static Partition scalar(const std::vector<std::string>& labels) {
    std::vector<Block> blocks;
    blocks.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
      blocks.push_back({labels[i], {static_cast<Eigen::Index>(i)}});
    return Partition(std::move(blocks), static_cast<Eigen::Index>(labels.size()));
  }

  /// Contiguous blocks of the given sizes, starting at index 0.
  static Partition contiguous(const std::vector<std::pair<std::string, Eigen::Index>>& sizes,
                              Eigen::Index dimension) {
    std::vector<Block> blocks;
    Eigen::Index at = 0;
    for (const auto& [name, size] : sizes) {
      Block b{name, {}};
      for (Eigen::Index i = 0; i < size; ++i) b.indices.push_back(at++);
      blocks.push_back(std::move(b));
    }
    return Partition(std::move(blocks), dimension);
  }

  const std::vector<Block>& blocks() const { return blocks_; }
  Eigen::Index dimension() const { return dimension_; }

  bool has(const std::string& name) const {
    return std::any_of(blocks_.begin(), blocks_.end(),
                       [&](const Block& b) { return b.name == name; });
  }

  const Block& block(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return b;
    throw InvalidArgument("Partition: no block named '" + name + "'");
  }

  std::vector<std::string> block_names() const {
    std::vector<std::string> out;
    out.reserve(blocks_.size());
    for (const auto& b : blocks_) out.push_back(b.name);
    return out;
  }

  /// Concatenated indices of the named blocks, in partition order (so the
  /// extraction is deterministic regardless of the caller's name order).
  std::vector<Eigen::Index> indices(std::span<const std::string> names) const {
    for (const auto& n : names) block(n);  // validate all names first
    std::vector<Eigen::Index> out;
    for (const auto& b : blocks_) {
      if (std::find(names.begin(), names.end(), b.name) == names.end()) continue;
      out.insert(out.end(), b.indices.begin(), b.indices.end());
    }
    return out;
  }

 private:
  std::vector<Block> blocks_;
  Eigen::Index dimension_;
};

/// A Cramér-Rao bound on the generalized error variance of the `interest`
/// parameters, stored in log space. `known` lists the blocks assumed
/// known; every other partitioned block was treated as unknown.
struct CrbValue {
  double log_value = 0.0;
  std::vector<std::string> interest;
  std::vector<std::string> known;
  Eigen::Index dimension = 0;  // number of parameters of interest

  double value() const { return std::exp(log_value); }
};

namespace detail {

inline void check_partition(const FisherMatrix& j, const Partition& p) {
  if (p.dimension() != j.size())
    throw DimensionMismatch("partition covers a " + std::to_string(p.dimension()) +
                            "-dimensional space but the matrix is " +
                            std::to_string(j.size()) + "-dimensional");
}

/// Effective information matrix for the `interest` indices after
/// Schur-eliminating the `unknown` indices; `known` rows/columns were
/// already left out by the caller. The names feed error messages only.
inline Eigen::MatrixXd effective_information(const Eigen::MatrixXd& j,
                                             const std::vector<Eigen::Index>& interest,
                                             const std::vector<Eigen::Index>& unknown,
                                             const std::string& unknown_name) {
  Eigen::MatrixXd jii = j(interest, interest);
  if (unknown.empty()) return jii;
  const Eigen::MatrixXd juu = j(unknown, unknown);
  const Eigen::MatrixXd jui = j(unknown, interest);
  Eigen::LLT<Eigen::MatrixXd> llt(juu);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("Schur elimination failed: block(s) " + unknown_name +
                              " are numerically singular");
  // S = J_ii - J_iu J_uu^{-1} J_ui via the triangular factor; an exactly
  // zero cross block leaves J_ii bit-identical.
  const Eigen::MatrixXd w =
      llt.matrixL().solve(jui);
  Eigen::MatrixXd s = jii - w.transpose() * w;
  Eigen::MatrixXd sym = 0.5 * (s + s.transpose());
  return sym;
}

/// Shared kernel: log CRB of the union of `interest` blocks with `known`
/// blocks deleted and all remaining partitioned blocks Schur-eliminated.
inline double log_crb(const FisherMatrix& j, const Partition& p,
                      std::span<const std::string> interest,
                      std::span<const std::string> known) {
  check_partition(j, p);
  const std::vector<Eigen::Index> interest_idx = p.indices(interest);
  std::vector<std::string> unknown_names;
  for (const auto& b : p.blocks()) {
    const bool is_interest =
        std::find(interest.begin(), interest.end(), b.name) != interest.end();
    const bool is_known = std::find(known.begin(), known.end(), b.name) != known.end();
    if (!is_interest && !is_known) unknown_names.push_back(b.name);
  }
  const std::vector<Eigen::Index> unknown_idx = p.indices(unknown_names);
  const Eigen::MatrixXd s = effective_information(j.entries(), interest_idx, unknown_idx,
                                                  join(unknown_names));
  return -spd_logdet(s, "the effective information of block(s) " + join(interest));
}

}  // namespace detail

/// J_keep minus its coupling through all other partitioned blocks:
/// J_a - J_ab J_b^{-1} J_ba with b the union of the remaining blocks.
/// Positive definite whenever the full matrix is.
inline Eigen::MatrixXd schur_complement(const FisherMatrix& j, const Partition& p,
                                        const std::string& keep) {
  detail::check_partition(j, p);
  const Block& kept = p.block(keep);
  std::vector<std::string> rest;
  for (const auto& b : p.blocks())
    if (b.name != keep) rest.push_back(b.name);
  if (rest.empty())
    throw EmptyComplement("schur_complement: block '" + keep +
                          "' covers every partitioned index; use the plain block");
  return detail::effective_information(j.entries(), kept.indices, p.indices(rest),
                                       detail::join(rest));
}

/// Joint bound for the named blocks, everything else unknown:
/// |J^{-1}| restricted to the blocks' union.
inline CrbValue crb_joint(const FisherMatrix& j, const Partition& p,
                          std::span<const std::string> blocks) {
  if (blocks.empty()) throw InvalidArgument("crb_joint: needs at least one block");
  CrbValue out;
  out.log_value = detail::log_crb(j, p, blocks, {});
  out.interest.assign(blocks.begin(), blocks.end());
  out.dimension = static_cast<Eigen::Index>(p.indices(blocks).size());
  return out;
}

inline CrbValue crb_joint(const FisherMatrix& j, const Partition& p,
                          std::initializer_list<std::string> blocks) {
  std::vector<std::string> v(blocks);
  return crb_joint(j, p, std::span<const std::string>(v));
}

/// Bound for `interest` with the `known` blocks known (rows/columns
/// deleted) and every other block an unknown nuisance (Schur-eliminated).
inline CrbValue crb_conditional(const FisherMatrix& j, const Partition& p,
                                const std::string& interest,
                                std::span<const std::string> known) {
  if (std::find(known.begin(), known.end(), interest) != known.end())
    throw InvalidArgument("crb_conditional: block '" + interest +
                          "' cannot be both of interest and known");
  const std::string interest_arr[] = {interest};
  CrbValue out;
  out.log_value = detail::log_crb(j, p, interest_arr, known);
  out.interest = {interest};
  out.known.assign(known.begin(), known.end());
  out.dimension = static_cast<Eigen::Index>(p.block(interest).indices.size());
  return out;
}

inline CrbValue crb_conditional(const FisherMatrix& j, const Partition& p,
                                const std::string& interest,
                                std::initializer_list<std::string> known) {
  std::vector<std::string> v(known);
  return crb_conditional(j, p, interest, std::span<const std::string>(v));
}

/// Bound for `interest` with every other block unknown. Same as
/// crb_conditional with nothing known; named separately because it is the
/// headline quantity of the decomposition rules.
inline CrbValue crb_marginal(const FisherMatrix& j, const Partition& p,
                             const std::string& interest) {
  return crb_conditional(j, p, interest, {});
}

/// Chain-rule factorization: for order (b_1, ..., b_m) returns the factors
/// CRB(b_i | b_{i+1}, ..., b_m), with the earlier blocks unknown, whose
/// log-values sum to the joint log CRB of all blocks for any order.
inline std::vector<std::pair<std::string, CrbValue>> chain_decompose(
    const FisherMatrix& j, const Partition& p, std::span<const std::string> order) {
  std::vector<std::string> sorted_order(order.begin(), order.end());
  std::vector<std::string> sorted_blocks = p.block_names();
  std::sort(sorted_order.begin(), sorted_order.end());
  std::sort(sorted_blocks.begin(), sorted_blocks.end());
  if (sorted_order != sorted_blocks)
    throw InvalidOrder("chain_decompose: order [" + detail::join(order) +
                       "] is not a permutation of the partition's blocks [" +
                       detail::join(sorted_blocks) + "]");

  std::vector<std::pair<std::string, CrbValue>> factors;
  factors.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::vector<std::string> later(order.begin() + i + 1, order.end());
    factors.emplace_back(order[i], crb_conditional(j, p, order[i], later));
  }
  return factors;
}

inline std::vector<std::pair<std::string, CrbValue>> chain_decompose(
    const FisherMatrix& j, const Partition& p, std::initializer_list<std::string> order) {
  std::vector<std::string> v(order);
  return chain_decompose(j, p, std::span<const std::string>(v));
}

/// The Bayes-rule decomposition CRB(a) = factor * CRB(a|b) with
/// factor = CRB(b) / CRB(b|a) >= 1. Additional partitioned blocks are
/// unknown nuisances on both sides. `lhs` is CRB(a); `rhs_product` is
/// factor * CRB(a|b), so callers can assert the identity directly.
struct BayesDecomposition {
  double factor = 1.0;
  double log_factor = 0.0;
  CrbValue lhs;
  CrbValue rhs_product;
};

inline BayesDecomposition bayes_factor(const FisherMatrix& j, const Partition& p,
                                       const std::string& interest,
                                       const std::string& other) {
  if (interest == other)
    throw InvalidArgument("bayes_factor: interest and other must differ");
  BayesDecomposition out;
  const CrbValue other_marginal = crb_marginal(j, p, other);
  const CrbValue other_cond = crb_conditional(j, p, other, {interest});
  out.log_factor = other_marginal.log_value - other_cond.log_value;
  out.factor = std::exp(out.log_factor);
  out.lhs = crb_marginal(j, p, interest);
  const CrbValue interest_cond = crb_conditional(j, p, interest, {other});
  out.rhs_product = interest_cond;
  out.rhs_product.log_value += out.log_factor;
  out.rhs_product.known.clear();  // the product is a marginal-bound identity
  return out;
}

/// CRB analog of independence: true iff the cross block J_ab vanishes
/// relative to the blocks' diagonal scale, in which case the joint bound
/// factorizes as CRB(a,b) = CRB(a) * CRB(b). The scale is
/// sqrt(max diag J_aa * max diag J_bb).
inline bool independence_check(const FisherMatrix& j, const Partition& p,
                               const std::string& a, const std::string& b, double tol) {
  detail::check_partition(j, p);
  if (a == b) throw InvalidArgument("independence_check: blocks must differ");
  const auto& ia = p.block(a).indices;
  const auto& ib = p.block(b).indices;
  const Eigen::MatrixXd cross = j.entries()(ia, ib);
  double diag_a = 0.0, diag_b = 0.0;
  for (const auto i : ia) diag_a = std::max(diag_a, j.entries()(i, i));
  for (const auto i : ib) diag_b = std::max(diag_b, j.entries()(i, i));
  const double scale = std::sqrt(diag_a * diag_b);
  return cross.cwiseAbs().maxCoeff() <= tol * scale;
}

}  // namespace crb

#endif
