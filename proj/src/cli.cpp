#include "bvlmc/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "bvlmc/error.hpp"
#include "bvlmc/glm.hpp"
#include "bvlmc/ingest.hpp"
#include "bvlmc/model_io.hpp"
#include "bvlmc/simulate.hpp"

namespace bvlmc::cli {

namespace {

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

std::string annotate(const ParamBlock& block) {
  std::string out = "(";
  for (int k = 0; k < block.alpha.size(); ++k) out += (k ? ", " : "") + fmt(block.alpha(k));
  out += ")";
  if (block.h > 0) {
    out += "  beta";
    for (int k = 0; k < block.p() - 1; ++k) {
      out += block.p() > 2 ? " [state " + std::to_string(k + 1) + "]" : "";
      out += " =";
      for (int lag = 0; lag < block.h; ++lag) {
        out += " (";
        for (int j = 0; j < block.d; ++j) out += (j ? ", " : "") + fmt(block.coef(k, lag, j));
        out += ")";
      }
    }
  }
  return out;
}

void render_node(const ContextTree& tree, const Context& u, const std::string& indent, std::ostringstream& os) {
  const auto kids = tree.children(u);
  for (std::size_t i = 0; i < kids.size(); ++i) {
    const bool last = i + 1 == kids.size();
    const Context& c = kids[i];
    os << indent << (last ? "`-- " : "|-- ") << c.pastmost();
    if (tree.is_leaf(c) && tree.block(c)) os << ' ' << annotate(*tree.block(c));
    os << '\n';
    render_node(tree, c, indent + (last ? "    " : "|   "), os);
  }
}

ModelSpec load_spec(const std::string& name) {
  if (name == "model1" || name == "model2" || name == "model3") return builtin_model(name);
  if (!std::filesystem::exists(name)) throw UnknownModel("unknown model \"" + name + "\" (not a built-in name or a file)");
  return {std::filesystem::path(name).stem().string(), load_model(name)};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

std::vector<int> parse_history(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("history must be comma-separated state indices, got \"" + item + "\"");
    }
  }
  return out;
}

Eigen::MatrixXd read_covariate_rows(const std::string& path, int d) {
  const CsvTable table = read_csv_file(path);
  if (static_cast<int>(table.header.size()) != d)
    throw DataError("covariate file has " + std::to_string(table.header.size()) + " columns, model expects " +
                    std::to_string(d));
  // Reuse ingest's numeric parsing: every column is a covariate, the target
  // is a constant-zero column.
  IngestSpec spec;
  CsvTable padded = table;
  padded.header.insert(padded.header.begin(), "__state__");
  for (auto& row : padded.rows) row.insert(row.begin(), "0");
  spec.target.column = "__state__";
  for (const auto& name : table.header) spec.covariates.push_back({name, {}});
  return ingest(padded, spec).data.covariates;
}

struct FitOptions {
  std::string data;
  std::string ingest_spec;
  int s = 2;
  double gamma = 1e-3;
  bool tune = false;
  int cap = 0;
  bool bonferroni = false;
  bool conventional = false;
  std::string criterion = "conventional";
  std::string out;
};

int cmd_fit(const FitOptions& o, std::ostream& out) {
  const CsvTable table = read_csv_file(o.data);
  const IngestSpec spec = o.ingest_spec.empty() ? default_ingest_spec(table) : load_ingest_spec(o.ingest_spec);
  const Dataset data = ingest(table, spec).data;

  FitConfig config;
  config.s = o.s;
  config.gamma = o.gamma;
  config.max_order_cap = o.cap;
  config.bonferroni = o.bonferroni;
  config.conventional_criteria = o.conventional;
  const FitReport report = o.tune ? select_tuning(data, kDefaultSGrid, kDefaultGammaGrid, config, tuning_criterion_from_string(o.criterion)).report : fit(data, config);

  out << render_tree(report.tree) << '\n' << criteria_table(report);
  if (!o.out.empty()) write_text(o.out, report_to_json(report).dump(2) + "\n");
  return kSuccess;
}

int cmd_simulate(const std::string& model, std::size_t n, std::uint64_t seed, const std::string& path, std::ostream& out) {
  const Dataset data = generate(load_spec(model), n, seed);
  std::ostringstream csv;
  write_dataset_csv(data, csv);
  if (path.empty()) {
    out << csv.str();
  } else {
    write_text(path, csv.str());
  }
  return kSuccess;
}

struct EvaluateOptions {
  std::string model;
  std::size_t n = 1000;
  int runs = 100;
  std::uint64_t seed = 1;
  bool tune = false;
  std::string criterion = "conventional";
  int s = 2;
  double gamma = 1e-3;
  unsigned threads = 0;
  std::string out;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  MonteCarloOptions mc;
  mc.n = o.n;
  mc.runs = o.runs;
  mc.base_seed = o.seed;
  mc.tune = o.tune;
  mc.criterion = tuning_criterion_from_string(o.criterion);
  mc.config.s = o.s;
  mc.config.gamma = o.gamma;
  mc.threads = o.threads;
  const MonteCarloReport report = monte_carlo(load_spec(o.model), mc);
  out << monte_carlo_table(report);
  if (!o.out.empty()) write_text(o.out, monte_carlo_to_json(report).dump(2) + "\n");
  return report.failures == report.runs ? kNumericalFailure : kSuccess;
}

int cmd_predict(const std::string& model_path, const std::string& history_text, const std::string& covariate_path,
                std::ostream& out) {
  const ContextTree tree = load_model(model_path);
  const std::vector<int> history = parse_history(history_text);
  for (int y : history)
    if (y >= tree.p()) throw UsageError("history state " + std::to_string(y) + " outside the model's alphabet");
  Eigen::MatrixXd covariates(0, tree.d());
  if (!covariate_path.empty()) covariates = read_covariate_rows(covariate_path, tree.d());

  const auto reversed = to_reverse_time(history);
  const Context leaf = tree.lookup(reversed);
  const Eigen::VectorXd prob = predict_next(tree, history, covariates);
  out << "context " << leaf.str() << '\n';
  for (int k = 0; k < prob.size(); ++k) out << "P(" << k << ") = " << std::setprecision(10) << prob(k) << '\n';
  return kSuccess;
}

}  // namespace

std::string render_tree(const ContextTree& tree) {
  std::ostringstream os;
  os << 'y';
  if (tree.is_leaf(Context{}) && tree.block(Context{})) os << ' ' << annotate(*tree.block(Context{}));
  os << '\n';
  render_node(tree, Context{}, "", os);
  return os.str();
}

std::string criteria_table(const FitReport& r) {
  std::ostringstream os;
  const auto cell = [&os](const std::string& s) { os << std::setw(12) << s; };
  for (const char* h : {"BIC", "AIC", "logLik", "n_alpha", "n_beta", "order", "order_cov", "n_eff"}) cell(h);
  os << '\n';
  cell(fmt(r.bic));
  cell(fmt(r.aic));
  cell(fmt(r.loglik, 4));
  cell(std::to_string(r.n_alpha));
  cell(std::to_string(r.n_beta));
  cell(std::to_string(r.order_tree()));
  cell(std::to_string(r.order_covar()));
  cell(std::to_string(r.n_eff));
  os << "\ns = " << r.config.s << ", gamma = " << r.config.gamma << ", maximal order = " << r.maximal_tree.order()
     << ", tests = " << r.audit.size() << '\n';
  return os.str();
}

Eigen::VectorXd predict_next(const ContextTree& tree, std::span<const int> history, const Eigen::MatrixXd& covariates) {
  const auto reversed = to_reverse_time(history);
  const Context leaf = tree.lookup(reversed);
  const auto& block = tree.block(leaf);
  if (!block) throw UsageError("leaf " + leaf.str() + " has no parameters");
  return transition_probabilities(*block, to_reverse_time(covariates));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-tree Markov chains whose transitions depend on covariates"};
  app.require_subcommand(1);

  FitOptions fit_opts;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a beta-context tree to a CSV series");
  fit_cmd->add_option("--data", fit_opts.data, "CSV file with a header row")->required();
  fit_cmd->add_option("--ingest", fit_opts.ingest_spec, "Ingest spec JSON (default: first column is the state)");
  auto* s_opt = fit_cmd->add_option("--s", fit_opts.s, "Observations per parameter")->check(CLI::PositiveNumber);
  auto* g_opt = fit_cmd->add_option("--gamma", fit_opts.gamma, "Per-test significance level")
                    ->check(CLI::Range(0.0, 1.0));
  auto* tune_flag = fit_cmd->add_flag("--tune", fit_opts.tune, "Choose s and gamma by BIC over the default grid");
  tune_flag->excludes(s_opt)->excludes(g_opt);
  fit_cmd->add_option("--tune-criterion", fit_opts.criterion, "Tuning score: conventional (all parameters) or beta")
      ->check(CLI::IsMember({"conventional", "beta"}));
  fit_cmd->add_option("--cap", fit_opts.cap, "Maximal tree depth cap (default floor(log2 n))");
  fit_cmd->add_flag("--bonferroni", fit_opts.bonferroni, "Divide gamma by the number of tests in each pass");
  fit_cmd->add_flag("--count-intercepts", fit_opts.conventional, "Count intercepts in the AIC/BIC penalty");
  fit_cmd->add_option("--out", fit_opts.out, "Write the fitted model and report as JSON");

  std::string sim_model;
  std::size_t sim_n = 1000;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a series from a model");
  sim_cmd->add_option("--model", sim_model, "model1, model2, model3 or a model JSON file")->required();
  sim_cmd->add_option("--n", sim_n, "Number of transitions")->required()->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim_seed, "RNG seed");
  sim_cmd->add_option("--out", sim_out, "Output CSV (default stdout)");

  EvaluateOptions eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "Monte Carlo recovery study");
  eval_cmd->add_option("--model", eval_opts.model, "model1, model2, model3 or a model JSON file")->required();
  eval_cmd->add_option("--n", eval_opts.n, "Transitions per run")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--runs", eval_opts.runs, "Number of runs")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", eval_opts.seed, "Base seed; run i uses seed + i");
  auto* es_opt = eval_cmd->add_option("--s", eval_opts.s, "Observations per parameter")->check(CLI::PositiveNumber);
  auto* eg_opt = eval_cmd->add_option("--gamma", eval_opts.gamma, "Per-test significance level")
                     ->check(CLI::Range(0.0, 1.0));
  eval_cmd->add_flag("--tune", eval_opts.tune, "Tune s and gamma by BIC in every run")->excludes(es_opt)->excludes(eg_opt);
  eval_cmd->add_option("--tune-criterion", eval_opts.criterion, "Tuning score: conventional (all parameters) or beta")
      ->check(CLI::IsMember({"conventional", "beta"}));
  eval_cmd->add_option("--threads", eval_opts.threads, "Worker threads (default: all cores)");
  eval_cmd->add_option("--out", eval_opts.out, "Write the JSON report");

  std::string pred_model;
  std::string pred_history;
  std::string pred_covariates;
  auto* pred_cmd = app.add_subcommand("predict", "Next-state probabilities");
  pred_cmd->add_option("--model", pred_model, "Model JSON")->required();
  pred_cmd->add_option("--history", pred_history, "Comma-separated states, oldest first")->required();
  pred_cmd->add_option("--covariates", pred_covariates, "CSV of the most recent covariate rows, oldest first");

  std::vector<std::string> reversed_args(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed_args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit_opts, out);
    if (*sim_cmd) return cmd_simulate(sim_model, sim_n, sim_seed, sim_out, out);
    if (*eval_cmd) return cmd_evaluate(eval_opts, out);
    if (*pred_cmd) return cmd_predict(pred_model, pred_history, pred_covariates, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
  return kUsage;
}

}  // namespace bvlmc::cli
