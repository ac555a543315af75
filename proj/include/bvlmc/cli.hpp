#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bvlmc/algorithm.hpp"
#include "bvlmc/core.hpp"

namespace bvlmc::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 2, kDataError = 3, kNumericalFailure = 4 };

/// Entry point shared by the executable and the tests. args[0] is the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// ASCII tree, root at the left, leaves annotated with "(alpha)" and their
/// beta rows.
std::string render_tree(const ContextTree& tree);
std::string criteria_table(const FitReport& report);

/// Next-state distribution. `history` and `covariates` are chronological
/// (oldest first); only the most recent rows are used.
Eigen::VectorXd predict_next(const ContextTree& tree, std::span<const int> history, const Eigen::MatrixXd& covariates);

}  // namespace bvlmc::cli
