#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "afl/experiment.hpp"
#include "afl/mechanism.hpp"

// Config-file driven experiment runner.
//
// Config files are flat `key = value` lines; `#` starts a comment and list
// values are comma separated. Unknown keys are errors. Defaults are those of
// ExperimentConfig (w1 = w2 = 0.5, delta = 2, lambda = 1). `none` clears the
// regimes and tamper lists.
namespace afl::cli {

/// Exit codes of every command.
enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2 };

class ConfigError : public std::runtime_error {
public:
  ConfigError(std::size_t line, std::string field, const std::string& message);

  std::size_t line() const { return line_; }  // 0 when not tied to a line
  const std::string& field() const { return field_; }

private:
  std::size_t line_;
  std::string field_;
};

/// Parses and validates. Syntax errors carry the line and key; invariant
/// violations carry the invariant text, e.g. "k_select <= n_clients".
experiment::ExperimentConfig parse_config_text(const std::string& text);
experiment::ExperimentConfig parse_config(const std::filesystem::path& path);

/// Every field in a fixed order, one `key = value` per line.
std::string canonical_text(const experiment::ExperimentConfig& cfg);
/// SHA-256 hex of canonical_text.
std::string config_hash(const experiment::ExperimentConfig& cfg);

/// Runs the experiment and writes rounds.csv, summary.csv, reputation.csv,
/// robustness.csv (when a tamper grid is configured) and the ledger files
/// into cfg.output_dir.
int cmd_run(const experiment::ExperimentConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_run(const std::filesystem::path& config_path, std::ostream& out, std::ostream& err);

/// Prints "Ok" (exit 0) or the first tampered record index (exit 1);
/// unreadable or malformed files exit 2.
int cmd_verify_ledger(const std::filesystem::path& path, std::ostream& out, std::ostream& err);

/// Prints the contract for one client type.
int cmd_solve(double theta, double lambda, double delta, const std::string& regime, std::ostream& out,
              std::ostream& err);

}  // namespace afl::cli
