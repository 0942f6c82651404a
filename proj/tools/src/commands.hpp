#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace revprop::cli {

struct CommandContext {
  RunConfig config;
  std::filesystem::path out_dir;     ///< empty: command default
  std::vector<std::string> models;   ///< eval only; "@truth" is the ground truth
  std::ostream* log = nullptr;
  std::ostream* err = nullptr;
};

int cmd_gen_data(const CommandContext& ctx);
int cmd_train(const CommandContext& ctx);
int cmd_eval(const CommandContext& ctx);
int cmd_profile(const CommandContext& ctx);

/// Full command line: verb plus flags. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Paths of subject i's volumes inside a data directory.
std::filesystem::path hr_path(const std::filesystem::path& dir, std::size_t subject);
std::filesystem::path lr_path(const std::filesystem::path& dir, std::size_t subject);
/// Normalisation statistics stored next to a model file.
std::filesystem::path norm_path(const std::filesystem::path& model);

/// Deterministic per-purpose seed derivation.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index);

}  // namespace revprop::cli
