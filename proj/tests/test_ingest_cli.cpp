#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "bvlmc/cli.hpp"
#include "bvlmc/error.hpp"
#include "bvlmc/glm.hpp"
#include "bvlmc/ingest.hpp"
#include "bvlmc/model_io.hpp"
#include "bvlmc/simulate.hpp"

using namespace bvlmc;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("bvlmc_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string write_file(const std::string& name, const std::string& text) {
  const fs::path path = scratch_dir() / name;
  std::ofstream(path, std::ios::binary) << text;
  return path.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

CsvTable table_of(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bvlmc");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

IngestSpec price_spec() {
  return ingest_spec_from_json(nlohmann::json::parse(R"({
    "target": {"column": "price", "transform": ["log_return", "binarize_sign"]},
    "covariates": [{"column": "index", "transform": "log_return"}]
  })"));
}

}  // namespace

TEST_CASE("hand-worked six-row fixture") {
  const CsvTable table = table_of(
      "date,price,index\n"
      "d1,100,50\n"
      "d2,102,51\n"
      "d3,101,50\n"
      "d4,105,52\n"
      "d5,104,53\n"
      "d6,106,52\n");
  const IngestResult r = ingest(table, price_spec());
  // Row 0 has no previous price, so it is lost to differencing.
  CHECK(r.data.states == std::vector<int>{1, 0, 1, 0, 1});
  CHECK(r.source_rows == std::vector<std::size_t>{1, 2, 3, 4, 5});
  REQUIRE(r.data.dim() == 1);
  const double expected[] = {std::log(51.0 / 50.0), std::log(50.0 / 51.0), std::log(52.0 / 50.0),
                             std::log(53.0 / 52.0), std::log(52.0 / 53.0)};
  for (int t = 0; t < 5; ++t) CHECK(r.data.covariates(t, 0) == Approx(expected[t]).epsilon(1e-15));
  CHECK(r.data.p == 2);
}

TEST_CASE("single transforms") {
  const CsvTable prices = table_of("y,px\n0,100\n0,110\n");
  IngestSpec spec;
  spec.target = {"y", {}};
  spec.covariates = {{"px", {Transform::LogReturn}}};
  const IngestResult r = ingest(prices, spec);
  REQUIRE(r.data.size() == 1);
  CHECK(r.data.covariates(0, 0) == Approx(std::log(1.1)).epsilon(1e-15));

  const CsvTable signs = table_of("ret\n0.5\n-0.2\n0.1\n");
  IngestSpec sign_spec;
  sign_spec.target = {"ret", {Transform::BinarizeSign}};
  CHECK(ingest(signs, sign_spec).data.states == std::vector<int>{1, 0, 1});
  CHECK(transform_from_string("log_return") == Transform::LogReturn);
  CHECK_THROWS_AS(transform_from_string("diff"), UsageError);
}

TEST_CASE("ingest errors") {
  const CsvTable table = table_of("y,x\n0,1.5\n1,abc\n");
  IngestSpec missing;
  missing.target = {"state", {}};
  CHECK_THROWS_AS(ingest(table, missing), MissingColumn);
  IngestSpec bad;
  bad.target = {"y", {}};
  bad.covariates = {{"x", {}}};
  CHECK_THROWS_AS(ingest(table, bad), NonNumericCell);
  IngestSpec empty;
  empty.target = {"y", {Transform::LogReturn, Transform::BinarizeSign}};
  CHECK_THROWS_AS(ingest(table_of("y\n5\n"), empty), EmptyAfterTransform);
  CHECK_THROWS(read_csv_file((scratch_dir() / "absent.csv").string()));
}

TEST_CASE("chronological to reverse time") {
  const std::vector<int> chrono{1, 1, 0};
  CHECK(to_reverse_time(chrono) == std::vector<int>{0, 1, 1});
  Eigen::MatrixXd x(3, 1);
  x << 1, 2, 3;
  CHECK(to_reverse_time(x)(0, 0) == 3);
}

TEST_CASE("dataset CSV round trip") {
  const Dataset data = generate(builtin_model("model2"), 50, 3);
  std::ostringstream csv;
  write_dataset_csv(data, csv);
  const Dataset back = ingest(table_of(csv.str()), default_ingest_spec(table_of(csv.str()))).data;
  CHECK(back.states == data.states);
  CHECK(back.covariates == data.covariates);
}

TEST_CASE("predict on Model 1") {
  const std::string model = write_file("model1.json", serialize(builtin_model("model1").tree));
  const std::string zeros = write_file("zeros.csv", "x1\n0\n0\n");
  const Run r = run_cli({"predict", "--model", model, "--history", "0,1,1,1,0", "--covariates", zeros});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("context 0111") != std::string::npos);
  CHECK(r.out.find("P(1) = 0.880797") != std::string::npos);

  const ContextTree tree = builtin_model("model1").tree;
  const std::vector<int> history{1, 0, 0, 1, 1};
  Eigen::MatrixXd x(4, 1);
  x << 0.2, -0.4, 1.1, 0.7;
  const Eigen::VectorXd prob = cli::predict_next(tree, history, x);
  const Context leaf = lookup_context(tree, std::vector<int>{1, 1, 0, 0, 1});
  Eigen::MatrixXd recent(4, 1);
  recent << 0.7, 1.1, -0.4, 0.2;
  CHECK(prob(1) == transition_probability(*tree.block(leaf), recent.topRows(tree.block(leaf)->h), 1));
}

TEST_CASE("simulate is byte-identical for equal seeds") {
  const std::string a = (scratch_dir() / "a.csv").string();
  const std::string b = (scratch_dir() / "b.csv").string();
  CHECK(run_cli({"simulate", "--model", "model2", "--n", "1000", "--seed", "7", "--out", a}).code == 0);
  CHECK(run_cli({"simulate", "--model", "model2", "--n", "1000", "--seed", "7", "--out", b}).code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a).rfind("y,x1\n", 0) == 0);
}

TEST_CASE("fit output round-trips into predict") {
  const std::string data = (scratch_dir() / "fit.csv").string();
  const std::string model = (scratch_dir() / "fit.json").string();
  REQUIRE(run_cli({"simulate", "--model", "model2", "--n", "1000", "--seed", "7", "--out", data}).code == 0);
  const Run fit = run_cli({"fit", "--data", data, "--tune", "--out", model});
  REQUIRE(fit.code == 0);
  CHECK(fit.out.find("BIC") != std::string::npos);
  const ContextTree tree = load_model(model);
  CHECK_NOTHROW(tree.validate());
  CHECK(parse(serialize(tree)) == tree);

  const std::string rows = write_file("rows.csv", "x1\n0.1\n-0.3\n0.25\n");
  const Run pred = run_cli({"predict", "--model", model, "--history", "1,0,0,1", "--covariates", rows});
  CHECK(pred.code == 0);
}

TEST_CASE("exit codes") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"simulate", "--model", "model9", "--n", "10"}).code == 2);
  CHECK(run_cli({"fit", "--data", "/nonexistent/file.csv"}).code == 3);
  CHECK(run_cli({"fit", "--data", write_file("bad.csv", "y,x\n0,abc\n")}).code == 3);
  const Run fail = run_cli({"evaluate", "--model", "model1", "--n", "3", "--runs", "2", "--threads", "1"});
  CHECK(fail.code == 4);
  CHECK(run_cli({"predict", "--model", write_file("m.json", serialize(builtin_model("model1").tree)), "--history",
                 "1"})
            .code == 2);
}

TEST_CASE("tree rendering") {
  const std::string text = cli::render_tree(builtin_model("model2").tree);
  CHECK(text.rfind("y\n", 0) == 0);
  CHECK(text.find("-- 0") != std::string::npos);
  CHECK(text.find("(") != std::string::npos);
}
