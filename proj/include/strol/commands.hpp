#pragma once

// The CLI subcommands as callable functions. Each returns a process exit code:
// 0 success, 1 runtime failure, 2 configuration or usage error, 3 port busy.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace strol {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitPortBusy = 3 };

/// Flags shared by every subcommand; unset values fall back to the config.
struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> episodes;
  std::optional<std::filesystem::path> weights;  ///< directory holding <rule>.weights
  std::optional<std::filesystem::path> out;      ///< output directory (train, eval, bench) or file (basin)
  std::string rule = "strol";                    ///< basin and serve: rule to start with
  std::optional<int> resolution;                 ///< basin grid points per axis
  unsigned short port = 8765;
  int tick_ms = 50;
};

/// Trains every rule in train.rules; writes <out>/<rule>.weights and <out>/<rule>_loss.csv.
int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Evaluates every available rule under the training condition; writes <out>/eval.csv.
int cmd_eval(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Runs the [bench] sweep; writes <out>/summary.csv and <out>/episodes.csv.
int cmd_bench(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Writes a basin-of-attraction map over the human action grid (2-D action spaces only).
int cmd_basin(const CommandOptions& opts, std::ostream& out, std::ostream& err);
/// Hosts live sessions until interrupted.
int cmd_serve(const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace strol
