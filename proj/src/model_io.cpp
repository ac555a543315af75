#include "bvlmc/model_io.hpp"

#include <fstream>
#include <sstream>

#include "bvlmc/error.hpp"

namespace bvlmc {

using nlohmann::json;

json model_to_json(const ContextTree& tree) {
  json leaves = json::array();
  for (const auto& u : tree.leaves()) {
    const auto& block = tree.block(u);
    if (!block) throw UsageError("leaf " + u.str() + " has no parameters to serialize");
    json alpha = json::array();
    json beta = json::array();
    for (int k = 0; k < tree.p() - 1; ++k) {
      alpha.push_back(block->alpha(k));
      json lags = json::array();
      for (int lag = 0; lag < block->h; ++lag) {
        json row = json::array();
        for (int j = 0; j < block->d; ++j) row.push_back(block->coef(k, lag, j));
        lags.push_back(std::move(row));
      }
      beta.push_back(std::move(lags));
    }
    leaves.push_back({{"context", u.symbols()}, {"alpha", std::move(alpha)}, {"beta", std::move(beta)}});
  }
  return {{"p", tree.p()}, {"d", tree.d()}, {"leaves", std::move(leaves)}};
}

namespace {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw MalformedModel(std::string("missing field \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw MalformedModel(std::string("bad field \"") + key + "\": " + e.what());
  }
}

}  // namespace

ContextTree model_from_json(const json& j) {
  const int p = field<int>(j, "p");
  const int d = field<int>(j, "d");
  if (p < 2) throw MalformedModel("p must be at least 2");
  if (d < 0) throw MalformedModel("d must be nonnegative");
  const auto& leaves = j.at("leaves");
  if (!leaves.is_array()) throw MalformedModel("\"leaves\" must be an array");

  std::vector<std::pair<Context, std::optional<ParamBlock>>> parsed;
  for (const auto& leaf : leaves) {
    Context u(field<std::vector<int>>(leaf, "context"));
    const auto alpha = field<std::vector<double>>(leaf, "alpha");
    const auto beta = field<std::vector<std::vector<std::vector<double>>>>(leaf, "beta");
    if (static_cast<int>(alpha.size()) != p - 1 || static_cast<int>(beta.size()) != p - 1)
      throw MalformedModel("leaf " + u.str() + " needs p-1 alpha and beta entries");
    const int h = static_cast<int>(beta.front().size());
    ParamBlock block(p, d, h);
    for (int k = 0; k < p - 1; ++k) {
      block.alpha(k) = alpha[k];
      if (static_cast<int>(beta[k].size()) != h) throw MalformedModel("leaf " + u.str() + " has ragged beta lengths");
      for (int lag = 0; lag < h; ++lag) {
        if (static_cast<int>(beta[k][lag].size()) != d)
          throw MalformedModel("leaf " + u.str() + " has a beta row of the wrong width");
        for (int c = 0; c < d; ++c) block.beta(k, lag * d + c) = beta[k][lag][c];
      }
    }
    parsed.emplace_back(std::move(u), std::move(block));
  }
  return ContextTree::from_leaves(p, d, parsed);
}

std::string serialize(const ContextTree& tree) { return model_to_json(tree).dump(2) + "\n"; }

ContextTree parse(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw MalformedModel(std::string("model is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

ContextTree load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void save_model(const ContextTree& tree, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << serialize(tree);
}

}  // namespace bvlmc
