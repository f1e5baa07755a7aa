#include "aclstm/config.hpp"

#include <fstream>
#include <sstream>

#include "aclstm/error.hpp"
#include "text_util.hpp"

namespace aclstm {

namespace {

// Every recognised key and its default.
const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> d{
      {"seed", "1"},
      {"precision", "f32"},
      {"threads", "1"},

      {"signal.fft_size", "256"},
      {"signal.active_subcarriers", "128"},
      {"signal.cp_len", "16"},
      {"signal.qam_order", "256"},
      {"signal.oversample", "2"},
      {"signal.num_symbols", "0"},  // 0: smallest count reaching signal.min_samples
      {"signal.min_samples", "40000"},
      {"signal.sample_rate_hz", "1"},
      {"signal.papr_target_db", "8.5"},
      {"signal.cfr_max_iter", "10"},

      {"dut.pre_fir", "1:0, 0.1:-0.05, 0:0.02"},
      {"dut.post_fir", "1:0, -0.08:0.03"},
      {"dut.saleh_alpha_a", "2"},
      {"dut.saleh_beta_a", "1"},
      {"dut.saleh_alpha_p", "1.0471975511965976"},
      {"dut.saleh_beta_p", "1"},
      {"dut.noise_dbc", "-80"},
      {"dut.drive_mean_modulus", "0.5"},

      {"split.train", "0.8"},
      {"split.val", "0.1"},
      {"split.test", "0.1"},

      {"capture.input", ""},
      {"capture.output", ""},

      {"dataset", ""},  // empty: dataset.meta inside the output directory

      {"model", "aclstm"},
      {"name", ""},  // weight/history file stem; empty: the model family
      {"model.layers", "1"},
      {"model.hidden", "8"},
      {"model.film_hidden", "4"},
      {"model.film_site", "candidate"},
      {"model.amp_source", "raw"},
      {"tdnn.memory", "3"},
      {"tdnn.order", "3"},
      {"tdnn.hidden", "16"},
      {"mp.memory_depth", "4"},
      {"mp.order", "9"},
      {"mp.odd_only", "false"},
      {"gmp.lags", "1, 2, -1"},
      {"gmp.cross_memory_depth", "1"},
      {"gmp.cross_orders", "3, 5, 7"},

      {"train.epochs", "200"},
      {"train.batch_size", "256"},
      {"train.window", "64"},
      {"train.lr", "1e-3"},
      {"train.plateau_factor", "0.5"},
      {"train.plateau_patience", "10"},
      {"train.plateau_threshold", "1e-7"},
      {"train.min_lr", "1e-5"},
      {"train.adam_beta1", "0.9"},
      {"train.adam_beta2", "0.999"},
      {"train.adam_eps", "1e-8"},

      {"eval.weights", ""},  // empty: every known model file found in the output directory
      {"eval.welch_segment", "1024"},
      {"eval.welch_overlap", "0.5"},
      {"eval.welch_window", "hann"},
      {"eval.occupied_fraction", "0"},  // 0: taken from the OFDM plan

      {"gradcheck.models", "aclstm, lstm, arvtdnn"},
      {"gradcheck.film_sites", "candidate, forget"},
      {"gradcheck.seeds", "5"},
      {"gradcheck.hidden", "3"},
      {"gradcheck.film_hidden", "3"},
      {"gradcheck.window", "8"},
      {"gradcheck.step", "1e-5"},
      {"gradcheck.tolerance", "1e-6"},
      {"gradcheck.corrupt", "0"},
  };
  return d;
}

}  // namespace

RunConfig::RunConfig() : values_(defaults()) {}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrc::unreadable, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig c;
  c.parse(ss.str(), path.string());
  return c;
}

void RunConfig::parse(std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(std::string(origin) + ":" + std::to_string(line_no) + ": expected key=value");
    set(std::string(text::trim(line.substr(0, eq))), std::string(text::trim(line.substr(eq + 1))));
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
  set_.insert(key);
}

bool RunConfig::known(const std::string& key) const { return defaults().count(key) != 0; }

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const { return text::parse_double(raw(key), key); }

long long RunConfig::integer(const std::string& key) const { return text::parse_int(raw(key), key); }

bool RunConfig::boolean(const std::string& key) const {
  const auto& v = raw(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::strings(const std::string& key) const {
  std::vector<std::string> out;
  if (text::trim(raw(key)).empty()) return out;
  for (auto& s : text::split(raw(key), ','))
    if (!s.empty()) out.push_back(std::move(s));
  return out;
}

std::vector<double> RunConfig::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : strings(key)) out.push_back(text::parse_double(s, key));
  return out;
}

std::vector<int> RunConfig::integers(const std::string& key) const {
  std::vector<int> out;
  for (const auto& s : strings(key)) out.push_back(static_cast<int>(text::parse_int(s, key)));
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

void RunConfig::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::unreadable, "cannot open for writing: " + path.string());
  out << dump();
  if (!out) throw IoError(IoErrc::unreadable, "write failed: " + path.string());
}

}  // namespace aclstm
