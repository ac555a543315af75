#include "bvlmc/core.hpp"

#include <algorithm>
#include <cmath>

#include "bvlmc/error.hpp"

namespace bvlmc {

void Alphabet::validate() const {
  if (size < 2) throw UsageError("alphabet needs at least 2 states, got " + std::to_string(size));
}

// ---------------------------------------------------------------------------
// Context

Context Context::parse(std::string_view digits) {
  std::vector<int> symbols;
  symbols.reserve(digits.size());
  for (char c : digits) {
    if (c < '0' || c > '9') throw UsageError("context string must be digits: " + std::string(digits));
    symbols.push_back(c - '0');
  }
  return Context(std::move(symbols));
}

Context Context::parent() const {
  if (is_root()) throw RootHasNoSiblings("root has no parent");
  return Context(std::vector<int>(symbols_.begin(), symbols_.end() - 1));
}

Context Context::child(int w) const {
  auto s = symbols_;
  s.push_back(w);
  return Context(std::move(s));
}

bool Context::has_prefix(const Context& prefix) const {
  if (prefix.size() > size()) return false;
  return std::equal(prefix.symbols_.begin(), prefix.symbols_.end(), symbols_.begin());
}

std::string Context::str() const {
  if (is_root()) return "<root>";
  std::string out;
  for (std::size_t i = 0; i < symbols_.size(); ++i) {
    if (symbols_[i] < 10) {
      out.push_back(static_cast<char>('0' + symbols_[i]));
    } else {
      if (i > 0) out.push_back('.');
      out += std::to_string(symbols_[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ParamBlock

ParamBlock::ParamBlock(int p, int d_, int h_)
    : d(d_), h(h_), alpha(Eigen::VectorXd::Zero(p - 1)), beta(Eigen::MatrixXd::Zero(p - 1, h_ * d_)) {}

ParamBlock ParamBlock::truncated(int new_h) const {
  if (new_h > h || new_h < 0) throw UsageError("cannot truncate beta of length " + std::to_string(h) + " to " + std::to_string(new_h));
  ParamBlock out = *this;
  out.h = new_h;
  out.beta = beta.leftCols(new_h * d);
  return out;
}

ParamBlock ParamBlock::trimmed() const {
  int keep = h;
  while (keep > 0 && beta.middleCols((keep - 1) * d, d).isZero(0.0)) --keep;
  return truncated(keep);
}

Eigen::VectorXd ParamBlock::flatten() const {
  const int q = 1 + h * d;
  Eigen::VectorXd theta(static_cast<Eigen::Index>(p() - 1) * q);
  for (int k = 0; k < p() - 1; ++k) {
    theta(k * q) = alpha(k);
    if (h * d > 0) theta.segment(k * q + 1, h * d) = beta.row(k).transpose();
  }
  return theta;
}

ParamBlock ParamBlock::unflatten(int p, int d, int h, const Eigen::VectorXd& theta) {
  const int q = 1 + h * d;
  if (theta.size() != static_cast<Eigen::Index>(p - 1) * q) throw UsageError("parameter vector has the wrong length");
  ParamBlock out(p, d, h);
  for (int k = 0; k < p - 1; ++k) {
    out.alpha(k) = theta(k * q);
    if (h * d > 0) out.beta.row(k) = theta.segment(k * q + 1, h * d).transpose();
  }
  return out;
}

void ParamBlock::validate(int p, int d_, std::size_t context_length) const {
  if (d != d_) throw MalformedModel("parameter block covariate dimension mismatch");
  if (h < 0 || static_cast<std::size_t>(h) > context_length)
    throw MalformedModel("beta length " + std::to_string(h) + " exceeds context length " + std::to_string(context_length));
  if (alpha.size() != p - 1) throw MalformedModel("alpha must have one entry per non-baseline state");
  if (beta.rows() != p - 1 || beta.cols() != h * d) throw MalformedModel("beta has the wrong shape");
  if (!alpha.allFinite() || !beta.allFinite()) throw MalformedModel("non-finite coefficient");
}

// ---------------------------------------------------------------------------
// Dataset

void Dataset::validate() const {
  Alphabet{p}.validate();
  if (static_cast<std::size_t>(covariates.rows()) != states.size())
    throw DataError("states and covariates differ in length");
  for (int y : states)
    if (y < 0 || y >= p) throw DataError("state " + std::to_string(y) + " outside 0.." + std::to_string(p - 1));
  if (!covariates.allFinite()) throw DataError("non-finite covariate value");
}

// ---------------------------------------------------------------------------
// ContextTree

ContextTree::ContextTree(int p, int d) : p_(p), d_(d) {
  Alphabet{p}.validate();
  if (d < 0) throw UsageError("negative covariate dimension");
  nodes_.emplace(Context{}, std::nullopt);
}

ContextTree ContextTree::from_leaves(int p, int d,
                                     const std::vector<std::pair<Context, std::optional<ParamBlock>>>& leaves) {
  ContextTree tree(p, d);
  if (leaves.empty()) throw MalformedModel("model has no leaves");
  for (const auto& [u, block] : leaves) {
    for (int s : u.symbols())
      if (s < 0 || s >= p) throw MalformedModel("context " + u.str() + " has a symbol outside the alphabet");
    if (tree.nodes_.count(u) && u.is_root()) {
      tree.nodes_[u] = block;
      continue;
    }
    // Insert the leaf and all its prefixes.
    Context prefix;
    tree.nodes_.try_emplace(prefix, std::nullopt);
    for (int s : u.symbols()) {
      prefix = prefix.child(s);
      tree.nodes_.try_emplace(prefix, std::nullopt);
    }
    auto& slot = tree.nodes_[u];
    if (slot.has_value()) throw MalformedModel("duplicate leaf " + u.str());
    slot = block;
  }
  // Every listed context must end up a leaf.
  for (const auto& [u, block] : leaves)
    if (!tree.is_leaf(u)) throw MalformedModel("context " + u.str() + " is listed as a leaf but has descendants");
  if (tree.leaves().size() != leaves.size()) throw MalformedModel("leaf set is not prefix-closed");
  tree.validate();
  return tree;
}

bool ContextTree::is_leaf(const Context& u) const {
  if (!contains(u)) return false;
  // Any child present means internal; completeness is checked in validate().
  auto it = nodes_.upper_bound(u);
  return it == nodes_.end() || !it->first.has_prefix(u);
}

int ContextTree::order() const {
  std::size_t depth = 0;
  for (const auto& [u, _] : nodes_) depth = std::max(depth, u.size());
  return static_cast<int>(depth);
}

std::vector<Context> ContextTree::nodes() const {
  std::vector<Context> out;
  out.reserve(nodes_.size());
  for (const auto& [u, _] : nodes_) out.push_back(u);
  return out;
}

std::vector<Context> ContextTree::leaves() const {
  std::vector<Context> out;
  for (const auto& [u, _] : nodes_)
    if (is_leaf(u)) out.push_back(u);
  return out;
}

std::vector<Context> ContextTree::children(const Context& u) const {
  std::vector<Context> out;
  for (int w = 0; w < p_; ++w) {
    auto c = u.child(w);
    if (contains(c)) out.push_back(std::move(c));
  }
  return out;
}

const std::optional<ParamBlock>& ContextTree::block(const Context& leaf) const {
  auto it = nodes_.find(leaf);
  if (it == nodes_.end()) throw UsageError("context " + leaf.str() + " not in tree");
  return it->second;
}

void ContextTree::set_block(const Context& leaf, ParamBlock block) {
  if (!is_leaf(leaf)) throw UsageError("parameters can only be attached to leaves, " + leaf.str() + " is not one");
  block.validate(p_, d_, leaf.size());
  nodes_[leaf] = std::move(block);
}

bool ContextTree::fully_parameterized() const {
  for (const auto& [u, block] : nodes_)
    if (is_leaf(u) && !block.has_value()) return false;
  return true;
}

void ContextTree::split(const Context& leaf) {
  if (!is_leaf(leaf)) throw UsageError("cannot split non-leaf " + leaf.str());
  nodes_[leaf].reset();
  for (int w = 0; w < p_; ++w) nodes_.emplace(leaf.child(w), std::nullopt);
}

void ContextTree::collapse(const Context& parent) {
  if (!contains(parent)) throw UsageError("context " + parent.str() + " not in tree");
  const auto kids = children(parent);
  if (kids.empty()) throw ChildrenNotLeaves(parent.str() + " has no children to merge");
  for (const auto& c : kids)
    if (!is_leaf(c)) throw ChildrenNotLeaves("child " + c.str() + " of " + parent.str() + " has children");
  for (const auto& c : kids) nodes_.erase(c);
  nodes_[parent].reset();
}

Context ContextTree::lookup(std::span<const int> history) const {
  Context node;
  while (!is_leaf(node)) {
    if (node.size() >= history.size())
      throw HistoryTooShort("history of length " + std::to_string(history.size()) + " does not reach a leaf");
    node = node.child(history[node.size()]);
    if (!contains(node)) throw HistoryTooShort("history symbol outside the tree at " + node.str());
  }
  return node;
}

Context ContextTree::resolve(std::span<const int> states, std::size_t t) const {
  Context node;
  while (!is_leaf(node)) {
    const std::size_t k = node.size();
    if (k >= t) throw HistoryTooShort("time " + std::to_string(t) + " has too little history");
    node = node.child(states[t - 1 - k]);
  }
  return node;
}

bool ContextTree::same_structure(const ContextTree& other) const {
  if (p_ != other.p_ || d_ != other.d_ || nodes_.size() != other.nodes_.size()) return false;
  auto a = nodes_.begin();
  auto b = other.nodes_.begin();
  for (; a != nodes_.end(); ++a, ++b)
    if (a->first != b->first) return false;
  return true;
}

namespace {
bool same_block(const std::optional<ParamBlock>& a, const std::optional<ParamBlock>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->d == b->d && a->h == b->h && a->alpha.size() == b->alpha.size() && a->alpha == b->alpha &&
         a->beta.rows() == b->beta.rows() && a->beta.cols() == b->beta.cols() && a->beta == b->beta;
}
}  // namespace

bool ContextTree::operator==(const ContextTree& other) const {
  if (!same_structure(other)) return false;
  auto a = nodes_.begin();
  auto b = other.nodes_.begin();
  for (; a != nodes_.end(); ++a, ++b)
    if (!same_block(a->second, b->second)) return false;
  return true;
}

void ContextTree::validate() const {
  if (!contains(Context{})) throw MalformedModel("tree has no root");
  for (const auto& [u, block] : nodes_) {
    for (int s : u.symbols())
      if (s < 0 || s >= p_) throw MalformedModel("context " + u.str() + " has a symbol outside the alphabet");
    if (!u.is_root() && !contains(u.parent())) throw MalformedModel("node " + u.str() + " has no parent (not prefix-closed)");
    const auto kids = children(u);
    if (!kids.empty() && static_cast<int>(kids.size()) != p_)
      throw MalformedModel("internal node " + u.str() + " has " + std::to_string(kids.size()) + " of " +
                           std::to_string(p_) + " children; some histories would not resolve");
    if (block.has_value()) {
      if (!kids.empty()) throw MalformedModel("internal node " + u.str() + " carries parameters");
      block->validate(p_, d_, u.size());
    }
  }
}

// ---------------------------------------------------------------------------
// Free operations

std::size_t count_occurrences(std::span<const int> states, const Context& v) {
  const std::size_t len = v.size();
  if (len == 0) return states.size();
  std::size_t count = 0;
  for (std::size_t t = len - 1; t < states.size(); ++t) {
    bool match = true;
    for (std::size_t i = 0; i < len && match; ++i) match = states[t - i] == v[i];
    count += match;
  }
  return count;
}

std::size_t count_occurrences(const Dataset& data, const Context& v) { return count_occurrences(data.states, v); }

Context lookup_context(const ContextTree& tree, std::span<const int> history) { return tree.lookup(history); }

std::vector<Context> siblings(const ContextTree& tree, const Context& u) {
  if (u.is_root()) throw RootHasNoSiblings("the root has no siblings");
  if (!tree.contains(u)) throw UsageError("context " + u.str() + " not in tree");
  std::vector<Context> out;
  for (auto& c : tree.children(u.parent()))
    if (c != u) out.push_back(std::move(c));
  return out;
}

ContextTree merge_leaves(const ContextTree& tree, const Context& parent) {
  ContextTree out = tree;
  out.collapse(parent);
  return out;
}

}  // namespace bvlmc
