#include "aclstm/weights.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "aclstm/error.hpp"
#include "text_util.hpp"

namespace aclstm {

namespace {

constexpr const char* kMagic = "ACW1";

template <class U>
void put(std::ostream& out, U v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class U>
bool get(std::istream& in, U& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof v));
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + std::to_string(v[k]);
  return s;
}

std::vector<int> split_ints(const std::string& s, const char* what) {
  std::vector<int> out;
  if (text::trim(s).empty()) return out;
  for (const auto& part : text::split(s, ',')) out.push_back(static_cast<int>(text::parse_int(part, what)));
  return out;
}

const NamedArray& find_array(const WeightFile& f, const std::string& name) {
  for (const auto& a : f.arrays)
    if (a.name == name) return a;
  throw IoError(IoErrc::bad_format, "weights: missing array '" + name + "'");
}

}  // namespace

std::string format_double(double value) { return text::format_double(value); }

std::string format_norm_stats(const NormStats& s) {
  return format_double(s.mean_i) + "," + format_double(s.mean_q) + "," + format_double(s.std_i) + "," +
         format_double(s.std_q);
}

NormStats parse_norm_stats(const std::string& v) {
  const auto parts = text::split(v, ',');
  if (parts.size() != 4) throw ConfigError("norm stats need four values");
  return {text::parse_double(parts[0], "norm"), text::parse_double(parts[1], "norm"),
          text::parse_double(parts[2], "norm"), text::parse_double(parts[3], "norm")};
}

const std::string& WeightFile::get(const std::string& key) const {
  for (const auto& [k, v] : header)
    if (k == key) return v;
  throw IoError(IoErrc::bad_format, "weights: header lacks '" + key + "'");
}

bool WeightFile::has(const std::string& key) const {
  for (const auto& kv : header)
    if (kv.first == key) return true;
  return false;
}

void WeightFile::set(const std::string& key, const std::string& value) {
  for (auto& kv : header)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  header.emplace_back(key, value);
}

void write_acw(const std::filesystem::path& path, const WeightFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrc::unreadable, "cannot open for writing: " + path.string());
  out << kMagic << '\n';
  out << "precision=" << to_string(file.precision) << '\n';
  for (const auto& [k, v] : file.header)
    if (k != "precision") out << k << '=' << v << '\n';
  out << "end\n";
  for (const auto& a : file.arrays) {
    if (a.data.size() != a.rows * a.cols) throw ConfigError("weights: array '" + a.name + "' has inconsistent shape");
    put(out, static_cast<std::uint32_t>(a.name.size()));
    out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    put(out, static_cast<std::uint64_t>(a.rows));
    put(out, static_cast<std::uint64_t>(a.cols));
    for (double v : a.data) {
      if (file.precision == Precision::f32)
        put(out, static_cast<float>(v));
      else
        put(out, v);
    }
  }
  if (!out) throw IoError(IoErrc::unreadable, "write failed: " + path.string());
}

WeightFile read_acw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::unreadable, path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw IoError(IoErrc::bad_magic, path.string());
  WeightFile f;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(IoErrc::bad_format, path.string() + ": header line '" + line + "'");
    f.header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  if (!ended) throw IoError(IoErrc::truncated, path.string() + ": header not terminated");
  try {
    f.precision = parse_precision(f.get("precision"));
  } catch (const ConfigError& e) {
    throw IoError(IoErrc::bad_format, path.string() + ": " + e.what());
  }
  while (true) {
    std::uint32_t name_len = 0;
    if (!get(in, name_len)) break;
    if (name_len > 4096) throw IoError(IoErrc::bad_format, path.string() + ": implausible array name length");
    NamedArray a;
    a.name.resize(name_len);
    std::uint64_t rows = 0, cols = 0;
    if (!in.read(a.name.data(), name_len) || !get(in, rows) || !get(in, cols))
      throw IoError(IoErrc::truncated, path.string());
    if (rows * cols > (std::uint64_t{1} << 32)) throw IoError(IoErrc::bad_format, path.string() + ": array too large");
    a.rows = rows;
    a.cols = cols;
    a.data.resize(rows * cols);
    for (auto& v : a.data) {
      bool ok;
      if (f.precision == Precision::f32) {
        float s = 0;
        ok = get(in, s);
        v = s;
      } else {
        ok = get(in, v);
      }
      if (!ok) throw IoError(IoErrc::truncated, path.string() + ": array '" + a.name + "'");
    }
    f.arrays.push_back(std::move(a));
  }
  return f;
}

template <class T>
WeightFile network_weights(const NetworkParams<T>& p, const NormStats& norm_in, const NormStats& norm_out,
                           std::uint64_t seed) {
  WeightFile f;
  f.precision = std::is_same_v<T, float> ? Precision::f32 : Precision::f64;
  const auto& s = p.spec;
  f.set("model", to_string(s.kind));
  if (s.recurrent()) {
    f.set("layers", std::to_string(s.layers));
    f.set("hidden", std::to_string(s.hidden));
    if (s.kind == ModelKind::aclstm) {
      f.set("film_hidden", std::to_string(s.film_hidden));
      f.set("film_site", to_string(s.film_site));
    }
  } else {
    f.set("tdnn_memory", std::to_string(s.tdnn_memory));
    f.set("tdnn_order", std::to_string(s.tdnn_order));
    f.set("tdnn_hidden", std::to_string(s.tdnn_hidden));
  }
  f.set("amp_source", to_string(s.amp_source));
  f.set("params", std::to_string(p.values.size()));
  f.set("seed", std::to_string(seed));
  f.set("norm_in", format_norm_stats(norm_in));
  f.set("norm_out", format_norm_stats(norm_out));
  for (const auto& slot : p.layout.slots()) {
    NamedArray a{slot.name, slot.rows, slot.cols, {}};
    a.data.assign(p.values.begin() + static_cast<long>(slot.offset),
                  p.values.begin() + static_cast<long>(slot.offset + slot.size()));
    f.arrays.push_back(std::move(a));
  }
  return f;
}

ModelSpec model_spec_from_header(const WeightFile& f) {
  try {
    ModelSpec s;
    s.kind = parse_model_kind(f.get("model"));
    auto integer = [&](const char* key, int fallback) {
      return f.has(key) ? static_cast<int>(text::parse_int(f.get(key), key)) : fallback;
    };
    s.layers = integer("layers", s.layers);
    s.hidden = integer("hidden", s.hidden);
    s.film_hidden = integer("film_hidden", s.film_hidden);
    if (f.has("film_site")) s.film_site = parse_film_site(f.get("film_site"));
    if (f.has("amp_source")) s.amp_source = parse_amp_source(f.get("amp_source"));
    s.tdnn_memory = integer("tdnn_memory", s.tdnn_memory);
    s.tdnn_order = integer("tdnn_order", s.tdnn_order);
    s.tdnn_hidden = integer("tdnn_hidden", s.tdnn_hidden);
    s.validate();
    return s;
  } catch (const ConfigError& e) {
    throw IoError(IoErrc::bad_format, std::string("weights header: ") + e.what());
  }
}

template <class T>
NetworkParams<T> network_from_weights(const WeightFile& f) {
  NetworkParams<T> p(model_spec_from_header(f));
  if (f.arrays.size() != p.layout.slots().size())
    throw IoError(IoErrc::bad_format, "weights: expected " + std::to_string(p.layout.slots().size()) + " arrays, found " +
                                          std::to_string(f.arrays.size()));
  for (const auto& slot : p.layout.slots()) {
    const auto& a = find_array(f, slot.name);
    if (a.rows != slot.rows || a.cols != slot.cols)
      throw IoError(IoErrc::bad_format, "weights: array '" + slot.name + "' has shape " + std::to_string(a.rows) + "x" +
                                            std::to_string(a.cols) + ", expected " + std::to_string(slot.rows) + "x" +
                                            std::to_string(slot.cols));
    for (std::size_t k = 0; k < a.data.size(); ++k) p.values[slot.offset + k] = static_cast<T>(a.data[k]);
  }
  return p;
}

WeightFile poly_weights(const MpSpec& spec, const ComplexVector& coeffs, bool generalized) {
  spec.validate();
  if (static_cast<std::size_t>(coeffs.size()) != spec.coefficient_count())
    throw ConfigError("weights: coefficient count does not match the polynomial spec");
  WeightFile f;
  f.precision = Precision::f64;
  f.set("model", generalized ? "gmp" : "mp");
  f.set("memory_depth", std::to_string(spec.memory_depth));
  f.set("order", std::to_string(spec.order));
  f.set("odd_only", spec.odd_only ? "true" : "false");
  f.set("zero_pad", spec.zero_pad ? "true" : "false");
  f.set("lags", join_ints(spec.lags));
  f.set("cross_memory_depth", std::to_string(spec.cross_memory_depth));
  f.set("cross_orders", join_ints(spec.cross_orders));
  f.set("params", std::to_string(2 * spec.coefficient_count()));
  NamedArray a{"coeffs", static_cast<std::size_t>(coeffs.size()), 2, {}};
  for (long k = 0; k < coeffs.size(); ++k) {
    a.data.push_back(coeffs[k].real());
    a.data.push_back(coeffs[k].imag());
  }
  f.arrays.push_back(std::move(a));
  return f;
}

MpSpec poly_spec_from_header(const WeightFile& f) {
  try {
    const auto& model = f.get("model");
    if (model != "mp" && model != "gmp") throw ConfigError("not a polynomial model: " + model);
    MpSpec s;
    s.memory_depth = static_cast<int>(text::parse_int(f.get("memory_depth"), "memory_depth"));
    s.order = static_cast<int>(text::parse_int(f.get("order"), "order"));
    s.odd_only = f.get("odd_only") == "true";
    s.zero_pad = f.get("zero_pad") == "true";
    s.lags = split_ints(f.get("lags"), "lags");
    s.cross_memory_depth = static_cast<int>(text::parse_int(f.get("cross_memory_depth"), "cross_memory_depth"));
    s.cross_orders = split_ints(f.get("cross_orders"), "cross_orders");
    s.validate();
    return s;
  } catch (const ConfigError& e) {
    throw IoError(IoErrc::bad_format, std::string("weights header: ") + e.what());
  }
}

ComplexVector poly_coeffs_from_weights(const WeightFile& f) {
  const auto spec = poly_spec_from_header(f);
  const auto& a = find_array(f, "coeffs");
  if (a.cols != 2 || a.rows != spec.coefficient_count())
    throw IoError(IoErrc::bad_format, "weights: coefficient array shape does not match the header");
  ComplexVector c(static_cast<long>(a.rows));
  for (std::size_t k = 0; k < a.rows; ++k) c[static_cast<long>(k)] = {a.data[2 * k], a.data[2 * k + 1]};
  return c;
}

template WeightFile network_weights<float>(const NetworkParams<float>&, const NormStats&, const NormStats&,
                                           std::uint64_t);
template WeightFile network_weights<double>(const NetworkParams<double>&, const NormStats&, const NormStats&,
                                            std::uint64_t);
template NetworkParams<float> network_from_weights<float>(const WeightFile&);
template NetworkParams<double> network_from_weights<double>(const WeightFile&);

}  // namespace aclstm
