#include "revprop/model_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "binary_io.hpp"
#include "revprop/error.hpp"

namespace revprop {

using detail::read_le;
using detail::write_le;

namespace {

template <std::floating_point T>
constexpr Precision precision_of() {
  return std::is_same_v<T, float> ? Precision::f32 : Precision::f64;
}

template <std::floating_point T>
void write_tensor(std::ostream& os, const std::string& name, const Tensor<T>& t) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  const auto& dims = t.shape().dims();
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
  detail::write_array(os, t.data().data(), t.size());
}

template <std::floating_point T>
void read_tensor(std::istream& is, const std::string& expected_name, Tensor<T>& t) {
  const auto len = read_le<std::uint32_t>(is, "entry name length");
  if (len > 4096) throw FormatError("implausible entry name length");
  std::string name(len, '\0');
  detail::read_array(is, name.data(), len, "entry name");
  if (name != expected_name) {
    throw FormatError("registry entry '" + name + "' where '" + expected_name + "' was expected");
  }
  const auto rank = read_le<std::uint32_t>(is, "rank");
  std::vector<std::size_t> dims(rank);
  for (auto& d : dims) d = read_le<std::uint32_t>(is, "extent");
  if (Shape(dims) != t.shape()) {
    throw FormatError("entry '" + name + "' has shape " + Shape(dims).to_string() + ", spec implies " +
                      t.shape().to_string());
  }
  detail::read_array(is, t.data().data(), t.size(), name.c_str());
}

}  // namespace

void write_spec(std::ostream& os, const NetworkSpec& spec) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(spec.input_channels));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(spec.upsampling_rate));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(spec.blocks_per_stack));
  write_le<std::uint8_t>(os, spec.precision == Precision::f32 ? 0 : 1);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& l : spec.layers) {
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.kernel));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.out_channels));
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(l.padding));
    write_le<std::uint8_t>(os, l.relu ? 1 : 0);
  }
}

NetworkSpec read_spec(std::istream& is) {
  NetworkSpec spec;
  spec.input_channels = read_le<std::uint32_t>(is, "input channels");
  spec.upsampling_rate = read_le<std::uint32_t>(is, "upsampling rate");
  spec.blocks_per_stack = read_le<std::uint32_t>(is, "blocks per stack");
  const auto prec = read_le<std::uint8_t>(is, "precision");
  if (prec > 1) throw FormatError("unknown precision flag " + std::to_string(prec));
  spec.precision = prec == 0 ? Precision::f32 : Precision::f64;
  const auto n = read_le<std::uint32_t>(is, "layer count");
  if (n == 0 || n > 1024) throw FormatError("implausible layer count " + std::to_string(n));
  spec.layers.resize(n);
  for (auto& l : spec.layers) {
    l.kernel = read_le<std::uint32_t>(is, "kernel");
    l.out_channels = read_le<std::uint32_t>(is, "out channels");
    l.padding = read_le<std::uint32_t>(is, "padding");
    l.relu = read_le<std::uint8_t>(is, "relu flag") != 0;
  }
  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("stored network spec is invalid: ") + e.what());
  }
  return spec;
}

template <std::floating_point T>
void write_model(std::ostream& os, const NetworkSpec& spec, const NetworkParams<T>& params) {
  NetworkSpec stored = spec;
  stored.precision = precision_of<T>();
  detail::write_magic(os, "RVPM");
  write_le<std::uint32_t>(os, kModelFormatVersion);
  write_spec(os, stored);
  const auto reg = kernel_registry(params);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(2 * reg.size()));
  for (const auto& [name, k] : reg) {
    write_tensor(os, name + ".weight", k->weights);
    write_tensor(os, name + ".bias", k->bias);
  }
}

template <std::floating_point T>
void save_model(const std::filesystem::path& path, const NetworkSpec& spec, const NetworkParams<T>& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_model(os, spec, params);
  os.flush();
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

template <std::floating_point T>
LoadedModel<T> read_model(std::istream& is) {
  detail::expect_magic(is, "RVPM");
  const auto version = read_le<std::uint32_t>(is, "version");
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  LoadedModel<T> m;
  m.spec = read_spec(is);
  if (m.spec.precision != precision_of<T>()) {
    throw FormatError("model stored in " + to_string(m.spec.precision) + "-bit precision");
  }
  m.params = allocate_params<T>(m.spec);
  auto reg = kernel_registry(m.params);
  const auto count = read_le<std::uint32_t>(is, "entry count");
  if (count != 2 * reg.size()) {
    throw FormatError("model has " + std::to_string(count) + " entries, spec implies " +
                      std::to_string(2 * reg.size()));
  }
  for (auto& [name, k] : reg) {
    read_tensor(is, name + ".weight", k->weights);
    read_tensor(is, name + ".bias", k->bias);
  }
  return m;
}

template <std::floating_point T>
LoadedModel<T> load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model " + path.string());
  return read_model<T>(is);
}

NetworkSpec read_model_spec(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open model " + path.string());
  detail::expect_magic(is, "RVPM");
  const auto version = read_le<std::uint32_t>(is, "version");
  if (version != kModelFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  return read_spec(is);
}

#define REVPROP_INSTANTIATE(T)                                                               \
  template void write_model(std::ostream&, const NetworkSpec&, const NetworkParams<T>&);     \
  template void save_model(const std::filesystem::path&, const NetworkSpec&,                 \
                           const NetworkParams<T>&);                                         \
  template LoadedModel<T> read_model(std::istream&);                                         \
  template LoadedModel<T> load_model(const std::filesystem::path&);

REVPROP_INSTANTIATE(float)
REVPROP_INSTANTIATE(double)

#undef REVPROP_INSTANTIATE

}  // namespace revprop
