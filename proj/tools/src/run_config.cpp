#include "run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "revprop/error.hpp"

namespace revprop::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_double(const std::string& v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty entry in list '" + v + "'");
    out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& v) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  for (const auto& s : split_list(v)) out.push_back(parse_size(s));
  return out;
}

std::string fmt_double(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, p);
}

template <class V, class F>
std::string join(const std::vector<V>& v, F f) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += f(v[i]);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_FIELD(name) \
  Field{#name, [](RunConfig& c, const std::string& v) { c.name = parse_size(v); }, \
        [](const RunConfig& c) { return std::to_string(c.name); }}
#define DOUBLE_FIELD(name) \
  Field{#name, [](RunConfig& c, const std::string& v) { c.name = parse_double(v); }, \
        [](const RunConfig& c) { return fmt_double(c.name); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      SIZE_FIELD(input_channels),
      SIZE_FIELD(upsampling_rate),
      Field{"espcn_widths", [](RunConfig& c, const std::string& v) { c.espcn_widths = parse_size_list(v); },
            [](const RunConfig& c) {
              return join(c.espcn_widths, [](std::size_t w) { return std::to_string(w); });
            }},
      SIZE_FIELD(revnet_blocks),
      Field{"precision", [](RunConfig& c, const std::string& v) { c.precision = parse_precision(v); },
            [](const RunConfig& c) { return to_string(c.precision); }},
      Field{"data_dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; },
            [](const RunConfig& c) { return c.data_dir; }},
      SIZE_FIELD(subjects),
      SIZE_FIELD(test_subjects),
      SIZE_FIELD(grid_extent),
      SIZE_FIELD(bumps_per_channel),
      SIZE_FIELD(patches_per_subject),
      SIZE_FIELD(patch_extent),
      DOUBLE_FIELD(train_fraction),
      SIZE_FIELD(interior_margin),
      Field{"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64(v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      DOUBLE_FIELD(learning_rate),
      DOUBLE_FIELD(lr_decay),
      SIZE_FIELD(lr_plateau),
      DOUBLE_FIELD(lr_floor),
      SIZE_FIELD(patience),
      SIZE_FIELD(max_epochs),
      SIZE_FIELD(batch_size),
      Field{"backprop", [](RunConfig& c, const std::string& v) { c.backprop = parse_backprop_mode(v); },
            [](const RunConfig& c) { return to_string(c.backprop); }},
      Field{"multi_seed", [](RunConfig& c, const std::string& v) { c.multi_seed = parse_bool(v); },
            [](const RunConfig& c) { return std::string(c.multi_seed ? "true" : "false"); }},
      SIZE_FIELD(seeds),
      Field{"profile_blocks", [](RunConfig& c, const std::string& v) { c.profile_blocks = parse_size_list(v); },
            [](const RunConfig& c) {
              return join(c.profile_blocks, [](std::size_t n) { return std::to_string(n); });
            }},
      Field{"profile_modes",
            [](RunConfig& c, const std::string& v) {
              c.profile_modes.clear();
              for (const auto& s : split_list(v)) c.profile_modes.push_back(parse_backprop_mode(s));
            },
            [](const RunConfig& c) {
              return join(c.profile_modes, [](BackpropMode m) { return to_string(m); });
            }},
  };
  return f;
}

#undef SIZE_FIELD
#undef DOUBLE_FIELD

}  // namespace

NetworkSpec RunConfig::network_spec() const {
  NetworkSpec s;
  s.input_channels = input_channels;
  s.upsampling_rate = upsampling_rate;
  s.layers = NetworkSpec::espcn_layers(input_channels, upsampling_rate, espcn_widths);
  s.blocks_per_stack = revnet_blocks;
  s.precision = precision;
  return s;
}

ProtocolConfig RunConfig::protocol() const {
  ProtocolConfig p;
  p.learning_rate = learning_rate;
  p.lr_decay = lr_decay;
  p.lr_plateau = lr_plateau;
  p.lr_floor = lr_floor;
  p.patience = patience;
  p.max_epochs = max_epochs;
  p.batch_size = batch_size;
  p.backprop = backprop;
  return p;
}

SyntheticConfig RunConfig::synthetic() const {
  return SyntheticConfig{input_channels, grid_extent, bumps_per_channel};
}

PatchGeometry RunConfig::geometry() const {
  return PatchGeometry{patch_extent, network_spec().spatial_shrink(), upsampling_rate};
}

void RunConfig::validate() const {
  const auto spec = network_spec();
  spec.validate();
  protocol().validate();
  geometry().validate();
  (void)spec.output_shape(Shape{input_channels, patch_extent, patch_extent, patch_extent});
  if (subjects == 0) throw ConfigError("subjects must be at least 1");
  if (test_subjects >= subjects) throw ConfigError("test_subjects must leave at least one training subject");
  if (upsampling_rate == 0) throw ConfigError("upsampling_rate must be positive");
  if (grid_extent % upsampling_rate != 0) throw ConfigError("grid_extent must be divisible by upsampling_rate");
  if (grid_extent / upsampling_rate < patch_extent) throw ConfigError("patch_extent exceeds the LR grid");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (seeds == 0) throw ConfigError("seeds must be at least 1");
  if (profile_modes.empty()) throw ConfigError("profile_modes must not be empty");
  if (profile_blocks.empty()) throw ConfigError("profile_blocks must not be empty");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.key] = &f;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    auto it = index.find(key);
    if (it == index.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "key '" + key + "' given twice");
    try {
      it->second->set(base, value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.key);
  return out;
}

}  // namespace revprop::cli
