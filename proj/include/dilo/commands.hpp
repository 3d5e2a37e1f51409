// Implementations of the CLI subcommands. Each function takes the already
// parsed arguments, does the work, and returns a process exit code (0 on
// success). Errors are reported by throwing; the CLI driver maps exception
// types to exit codes.
#pragma once

#include <string>

namespace dilo {

// Generates the expert (observation-only) and offline datasets described by
// the config and writes them under the resolved output directory.
int run_gen_data(const std::string& config_path);

// Trains the value function on the generated datasets, extracts a policy,
// and writes metrics.csv, value.ckpt, and policy.ckpt.
int run_train(const std::string& config_path);

// Evaluates a policy checkpoint and appends one row to eval_results.csv.
int run_eval(const std::string& config_path, const std::string& ckpt_path);

// Runs the primal/dual certification on the configured instances and writes
// oracle_check.csv. Returns 0 even when gaps are large; the CSV carries the
// verdict so callers can apply their own thresholds.
int run_oracle_check(const std::string& config_path);

// Prints per-sample diagnostics (recovered ratio, implied reward, residual)
// for a value checkpoint against a dataset.
int run_diagnose(const std::string& ckpt_path, const std::string& data_path);

}  // namespace dilo
