#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "revprop/data.hpp"
#include "revprop/engine.hpp"
#include "revprop/network.hpp"
#include "revprop/trainer.hpp"

namespace revprop::cli {

/// Flat run configuration. Every key has a default; see `describe()`.
struct RunConfig {
  // network
  std::size_t input_channels = 6;
  std::size_t upsampling_rate = 2;
  std::vector<std::size_t> espcn_widths{50, 100};
  std::size_t revnet_blocks = 4;
  Precision precision = Precision::f32;

  // data
  std::string data_dir = "data";
  std::size_t subjects = 16;
  std::size_t test_subjects = 8;
  std::size_t grid_extent = 64;
  std::size_t bumps_per_channel = 30;
  std::size_t patches_per_subject = 2250;
  std::size_t patch_extent = 11;
  double train_fraction = 0.8;
  std::size_t interior_margin = 2;

  // protocol
  std::uint64_t seed = 1;
  double learning_rate = 1e-4;
  double lr_decay = 0.5;
  std::size_t lr_plateau = 5;
  double lr_floor = 1e-6;
  std::size_t patience = 10;
  std::size_t max_epochs = 100;
  std::size_t batch_size = 12;
  BackpropMode backprop = BackpropMode::efficient;
  bool multi_seed = false;
  std::size_t seeds = 4;

  // profile
  std::vector<std::size_t> profile_blocks{0, 1, 2, 4, 8};
  std::vector<BackpropMode> profile_modes{BackpropMode::naive, BackpropMode::efficient};

  [[nodiscard]] NetworkSpec network_spec() const;
  [[nodiscard]] ProtocolConfig protocol() const;
  [[nodiscard]] SyntheticConfig synthetic() const;
  [[nodiscard]] PatchGeometry geometry() const;
  [[nodiscard]] std::size_t train_subject_count() const { return subjects - test_subjects; }

  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

/// Parses `key = value` lines; `#` starts a comment. Unknown keys, repeated
/// keys and malformed values raise ConfigError with the line number.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value, in a stable order, parseable by parse_config.
std::string to_text(const RunConfig& config);

/// Key names in to_text order.
std::vector<std::string> config_keys();

}  // namespace revprop::cli
