#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bvlmc {

/// State space {0, ..., size-1}. State 0 is the multinomial baseline.
struct Alphabet {
  int size = 2;

  void validate() const;
  bool operator==(const Alphabet&) const = default;
};

/// A state string in reverse time: symbols()[0] is the most recent state.
/// The empty context is the root of every tree.
class Context {
 public:
  Context() = default;
  explicit Context(std::vector<int> symbols) : symbols_(std::move(symbols)) {}

  /// Parses a digit string such as "0111" (most recent symbol first).
  static Context parse(std::string_view digits);

  const std::vector<int>& symbols() const { return symbols_; }
  std::size_t size() const { return symbols_.size(); }
  bool is_root() const { return symbols_.empty(); }
  int operator[](std::size_t i) const { return symbols_[i]; }

  /// Drops the past-most symbol.
  Context parent() const;
  /// Appends w as the new past-most symbol.
  Context child(int w) const;
  int pastmost() const { return symbols_.back(); }
  bool has_prefix(const Context& prefix) const;

  std::string str() const;

  auto operator<=>(const Context&) const = default;

 private:
  std::vector<int> symbols_;
};

/// theta^u = (alpha^u, beta^u) for one context.
///
/// alpha holds one intercept per non-baseline target state (p-1 entries).
/// beta is (p-1) x (h*d); column lag*d + j is covariate j at lag lag+1, so
/// lag 0 is the most recent covariate row. The baseline state's block is
/// identically zero and not stored.
struct ParamBlock {
  int d = 0;
  int h = 0;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd beta;

  ParamBlock() = default;
  /// All-zero block.
  ParamBlock(int p, int d, int h);

  int p() const { return static_cast<int>(alpha.size()) + 1; }
  int free_parameters() const { return (p() - 1) * (1 + h * d); }
  int beta_count() const { return (p() - 1) * h * d; }

  /// Coefficient of target state (k+1), covariate j at lag index `lag`.
  double coef(int k, int lag, int j) const { return beta(k, lag * d + j); }

  /// Keeps the first new_h lag rows.
  ParamBlock truncated(int new_h) const;
  /// Drops trailing lag rows that are zero for every target state.
  ParamBlock trimmed() const;

  /// Flat parameter vector: per non-baseline state, [alpha, beta row].
  Eigen::VectorXd flatten() const;
  static ParamBlock unflatten(int p, int d, int h, const Eigen::VectorXd& theta);

  void validate(int p, int d, std::size_t context_length) const;
};

/// Aligned state sequence and covariate matrix (row t is x_t).
struct Dataset {
  int p = 2;
  std::vector<int> states;
  Eigen::MatrixXd covariates;

  std::size_t size() const { return states.size(); }
  int dim() const { return static_cast<int>(covariates.cols()); }
  void validate() const;
};

/// Rooted p-ary context tree. Every internal node has all p children, so
/// any long-enough history resolves to exactly one leaf. Only leaves carry
/// parameter blocks.
class ContextTree {
 public:
  /// Root-only tree with no parameters.
  ContextTree(int p, int d);

  /// Builds and validates a tree from its leaves.
  static ContextTree from_leaves(int p, int d,
                                 const std::vector<std::pair<Context, std::optional<ParamBlock>>>& leaves);

  int p() const { return p_; }
  int d() const { return d_; }

  bool contains(const Context& u) const { return nodes_.count(u) > 0; }
  bool is_leaf(const Context& u) const;
  /// Max leaf depth.
  int order() const;

  /// All nodes in lexicographic order, root first.
  std::vector<Context> nodes() const;
  /// Leaves in lexicographic order.
  std::vector<Context> leaves() const;
  std::vector<Context> children(const Context& u) const;

  const std::optional<ParamBlock>& block(const Context& leaf) const;
  void set_block(const Context& leaf, ParamBlock block);
  bool fully_parameterized() const;

  /// Turns a leaf into an internal node with p fresh leaves.
  void split(const Context& leaf);
  /// Removes all children of `parent` (which must all be leaves).
  void collapse(const Context& parent);

  /// Leaf reached from the root along `history` (most recent first).
  Context lookup(std::span<const int> history) const;
  /// Leaf governing the transition into time index t of `states`.
  Context resolve(std::span<const int> states, std::size_t t) const;

  bool same_structure(const ContextTree& other) const;
  bool operator==(const ContextTree& other) const;

  void validate() const;

 private:
  int p_;
  int d_;
  std::map<Context, std::optional<ParamBlock>> nodes_;
};

/// Number of positions t with y_t y_{t-1} ... y_{t-|v|+1} = v.
std::size_t count_occurrences(const Dataset& data, const Context& v);
std::size_t count_occurrences(std::span<const int> states, const Context& v);

Context lookup_context(const ContextTree& tree, std::span<const int> history);

/// Nodes sharing u's parent, excluding u.
std::vector<Context> siblings(const ContextTree& tree, const Context& u);

/// Copy of `tree` with the children of `parent` removed; parent becomes an
/// unparameterized leaf.
ContextTree merge_leaves(const ContextTree& tree, const Context& parent);

}  // namespace bvlmc
