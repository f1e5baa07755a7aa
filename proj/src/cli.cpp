#include "aclstm/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>

#include "aclstm/config.hpp"
#include "aclstm/dut.hpp"
#include "aclstm/error.hpp"
#include "aclstm/metrics.hpp"
#include "aclstm/nn.hpp"
#include "aclstm/poly.hpp"
#include "aclstm/signal.hpp"
#include "aclstm/train.hpp"
#include "aclstm/weights.hpp"
#include "text_util.hpp"

namespace aclstm::cli {

namespace {

namespace fs = std::filesystem;

struct Context {
  RunConfig cfg;
  fs::path out_dir;
  std::ostream& out;
  std::ostream& err;

  std::uint64_t seed() const { return static_cast<std::uint64_t>(cfg.integer("seed")); }
  fs::path path(const std::string& name) const { return out_dir / name; }
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

int as_int(const RunConfig& cfg, const std::string& key) { return static_cast<int>(cfg.integer(key)); }

// "re:im, re:im, ..." (a bare real number is accepted too).
std::vector<Complex> parse_taps(const RunConfig& cfg, const std::string& key) {
  std::vector<Complex> taps;
  for (const auto& item : cfg.strings(key)) {
    const auto parts = text::split(item, ':');
    if (parts.size() == 1) {
      taps.emplace_back(text::parse_double(parts[0], key), 0.0);
    } else if (parts.size() == 2) {
      taps.emplace_back(text::parse_double(parts[0], key), text::parse_double(parts[1], key));
    } else {
      throw ConfigError(key + ": bad tap '" + item + "'");
    }
  }
  return taps;
}

std::pair<OfdmPlan, int> plan_from_config(const RunConfig& cfg, std::uint64_t seed) {
  OfdmPlan plan;
  plan.fft_size = as_int(cfg, "signal.fft_size");
  plan.active_subcarriers = as_int(cfg, "signal.active_subcarriers");
  plan.cp_len = as_int(cfg, "signal.cp_len");
  plan.qam_order = as_int(cfg, "signal.qam_order");
  plan.seed = seed;
  const int os = as_int(cfg, "signal.oversample");
  const auto symbols = cfg.integer("signal.num_symbols");
  if (symbols < 0) throw ConfigError("signal.num_symbols must be >= 0");
  plan.num_symbols = symbols > 0 ? static_cast<int>(symbols)
                                 : symbols_for_length(plan, os, static_cast<std::size_t>(cfg.integer("signal.min_samples")));
  plan.validate();
  return {plan, os};
}

SynthDutSpec dut_from_config(const RunConfig& cfg) {
  SynthDutSpec d;
  d.pre_fir = parse_taps(cfg, "dut.pre_fir");
  d.post_fir = parse_taps(cfg, "dut.post_fir");
  d.saleh_alpha_a = cfg.real("dut.saleh_alpha_a");
  d.saleh_beta_a = cfg.real("dut.saleh_beta_a");
  d.saleh_alpha_p = cfg.real("dut.saleh_alpha_p");
  d.saleh_beta_p = cfg.real("dut.saleh_beta_p");
  d.noise_dbc = cfg.real("dut.noise_dbc");
  d.validate();
  return d;
}

SplitFractions split_from_config(const RunConfig& cfg) {
  return {cfg.real("split.train"), cfg.real("split.val"), cfg.real("split.test")};
}

ModelSpec model_from_config(const RunConfig& cfg, ModelKind kind) {
  ModelSpec s;
  s.kind = kind;
  s.layers = as_int(cfg, "model.layers");
  s.hidden = as_int(cfg, "model.hidden");
  s.film_hidden = as_int(cfg, "model.film_hidden");
  s.film_site = parse_film_site(cfg.str("model.film_site"));
  s.amp_source = parse_amp_source(cfg.str("model.amp_source"));
  s.tdnn_memory = as_int(cfg, "tdnn.memory");
  s.tdnn_order = as_int(cfg, "tdnn.order");
  s.tdnn_hidden = as_int(cfg, "tdnn.hidden");
  s.validate();
  return s;
}

MpSpec poly_from_config(const RunConfig& cfg, bool generalized) {
  MpSpec s = MpSpec::mp(as_int(cfg, "mp.memory_depth"), as_int(cfg, "mp.order"));
  s.odd_only = cfg.boolean("mp.odd_only");
  if (generalized) {
    s.lags = cfg.integers("gmp.lags");
    s.cross_memory_depth = as_int(cfg, "gmp.cross_memory_depth");
    s.cross_orders = cfg.integers("gmp.cross_orders");
    if (s.lags.empty()) throw ConfigError("gmp.lags must not be empty");
  }
  s.validate();
  return s;
}

TrainConfig train_from_config(const RunConfig& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.epochs = as_int(cfg, "train.epochs");
  t.batch_size = as_int(cfg, "train.batch_size");
  t.window_len = as_int(cfg, "train.window");
  t.lr0 = cfg.real("train.lr");
  t.plateau_factor = cfg.real("train.plateau_factor");
  t.plateau_patience = as_int(cfg, "train.plateau_patience");
  t.plateau_threshold = cfg.real("train.plateau_threshold");
  t.min_lr = cfg.real("train.min_lr");
  t.adam.beta1 = cfg.real("train.adam_beta1");
  t.adam.beta2 = cfg.real("train.adam_beta2");
  t.adam.eps = cfg.real("train.adam_eps");
  t.seed = seed;
  t.precision = parse_precision(cfg.str("precision"));
  t.threads = as_int(cfg, "threads");
  t.validate();
  return t;
}

fs::path manifest_path(const Context& ctx) {
  const auto& p = ctx.cfg.str("dataset");
  return p.empty() ? ctx.path("dataset.meta") : fs::path(p);
}

std::string model_name(const RunConfig& cfg) {
  const auto& name = cfg.str("name");
  return name.empty() ? cfg.str("model") : name;
}

bool is_poly(const std::string& kind) { return kind == "mp" || kind == "gmp"; }

int cmd_gen(Context& ctx) {
  auto [plan, os] = plan_from_config(ctx.cfg, ctx.seed());
  auto [wave, full_plan] = generate_ofdm(plan, os, ctx.cfg.real("signal.sample_rate_hz"));
  const double before = papr_db(wave);
  CfrOptions opt;
  opt.passband = full_plan.occupied_fraction(os);
  opt.max_iterations = as_int(ctx.cfg, "signal.cfr_max_iter");
  const double target = ctx.cfg.real("signal.papr_target_db");
  auto cfr = crest_factor_reduce(wave, target, opt);
  cfr.waveform.label = "excitation";

  write_iqf(ctx.path("excitation.iqf"), cfr.waveform);
  write_plan(ctx.path("plan.txt"), full_plan, os);
  ctx.cfg.write(ctx.path("gen.config"));
  ctx.out << "excitation: " << cfr.waveform.size() << " samples, " << full_plan.num_symbols << " symbols\n"
          << "PAPR " << fmt("%.2f", before) << " dB -> " << fmt("%.2f", cfr.papr_db) << " dB (target "
          << fmt("%.2f", target) << " dB, " << cfr.iterations << " CFR iterations)\n";
  if (!cfr.reached) ctx.err << "warning: PAPR target not reached; kept the best iterate\n";
  return kOk;
}

int cmd_capture(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const fs::path plan_file = ctx.path("plan.txt");
  DatasetManifest m;
  Dataset data;
  if (!cfg.str("capture.output").empty()) {
    if (cfg.str("capture.input").empty()) throw ConfigError("capture.output given without capture.input");
    m.input = fs::absolute(cfg.str("capture.input"));
    m.output = fs::absolute(cfg.str("capture.output"));
    auto x = read_iqf(m.input);
    auto y = read_iqf(m.output);
    if (x.size() != y.size())
      throw IoError(IoErrc::length_mismatch, m.input.string() + " and " + m.output.string() + " differ in length");
    if (x.sample_rate_hz != y.sample_rate_hz) throw IoError(IoErrc::rate_mismatch, m.input.string());
    data = make_dataset(std::move(x), std::move(y), split_from_config(cfg));
  } else {
    const fs::path src = cfg.str("capture.input").empty() ? ctx.path("excitation.iqf") : fs::path(cfg.str("capture.input"));
    auto x = read_iqf(src);
    double mean_mod = 0.0;
    for (const auto& s : x.samples) mean_mod += std::abs(s);
    mean_mod /= static_cast<double>(x.size());
    if (!(mean_mod > 0.0)) throw DomainError("capture: excitation is all zero");
    const double scale = cfg.real("dut.drive_mean_modulus") / mean_mod;
    for (auto& s : x.samples) s *= scale;
    x.label = "pa_input";
    const auto y = synth_dut_forward(dut_from_config(cfg), x, ctx.seed());
    write_iqf(ctx.path("pa_in.iqf"), x);
    write_iqf(ctx.path("pa_out.iqf"), y);
    // Re-read so the dataset sees exactly the stored (f32) samples.
    data = make_dataset(read_iqf(ctx.path("pa_in.iqf")), read_iqf(ctx.path("pa_out.iqf")), split_from_config(cfg));
    m.input = "pa_in.iqf";
    m.output = "pa_out.iqf";
  }
  if (fs::exists(plan_file)) m.plan = "plan.txt";
  m.length = data.size();
  m.train_end = data.train_end;
  m.val_end = data.val_end;
  m.norm_in = data.norm_in;
  m.norm_out = data.norm_out;
  write_manifest(ctx.path("dataset.meta"), m);
  ctx.cfg.write(ctx.path("capture.config"));

  ctx.out << "dataset: " << m.length << " samples, train [0, " << m.train_end << "), val [" << m.train_end << ", "
          << m.val_end << "), test [" << m.val_end << ", " << m.length << ")\n";
  if (!m.plan.empty()) {
    const auto [plan, os] = read_plan(plan_file);
    const auto mask = ChannelMask::contiguous(plan.occupied_fraction(os));
    const auto in_acpr = acpr_db(welch_psd(data.input.samples), mask);
    const auto out_acpr = acpr_db(welch_psd(data.output.samples), mask);
    ctx.out << "ACPR input " << fmt("%.2f", in_acpr.combined) << " dB, output " << fmt("%.2f", out_acpr.combined)
            << " dB\n";
  }
  return kOk;
}

template <class T>
int train_network(Context& ctx, const Dataset& data, const ModelSpec& spec, const TrainConfig& tc) {
  const DatasetAccess access(data, spec.amp_source);
  const auto result = train<T>(spec, access, tc);
  const auto name = model_name(ctx.cfg);
  write_history_csv(ctx.path(name + "_history.csv"), result.history);
  if (result.diverged) {
    ctx.err << "training diverged: " << result.diagnostics << "\n";
    return kNumericError;
  }
  write_acw(ctx.path(name + ".acw"), network_weights(result.params, data.norm_in, data.norm_out, tc.seed));
  ctx.out << name << ": " << result.params.values.size() << " parameters, " << result.history.size() << " epochs";
  if (!result.history.empty()) {
    const auto& best = result.history[static_cast<std::size_t>(std::max(result.best_epoch, 1)) - 1];
    ctx.out << ", best epoch " << result.best_epoch << " (val MSE " << fmt("%.4e", best.val_mse) << ")";
  }
  ctx.out << "\n";
  return kOk;
}

int cmd_train(Context& ctx) {
  const auto manifest = read_manifest(manifest_path(ctx));
  const auto data = load_dataset(manifest);
  const auto& kind = ctx.cfg.str("model");
  const auto name = model_name(ctx.cfg);
  ctx.cfg.write(ctx.path(name + ".config"));
  if (is_poly(kind)) {
    const auto spec = poly_from_config(ctx.cfg, kind == "gmp");
    const auto fit = mp_fit(data.input.samples, data.output.samples, spec, 0, data.train_end);
    write_acw(ctx.path(name + ".acw"), poly_weights(spec, fit.coeffs, kind == "gmp"));
    ctx.out << name << ": " << fit.coeffs.size() << " complex coefficients, train residual NMSE "
            << fmt("%.2f", fit.residual_nmse_db) << " dB" << (fit.rank_deficient ? " (rank deficient)" : "") << "\n";
    return kOk;
  }
  const auto spec = model_from_config(ctx.cfg, parse_model_kind(kind));
  const auto tc = train_from_config(ctx.cfg, ctx.seed());
  return tc.precision == Precision::f32 ? train_network<float>(ctx, data, spec, tc)
                                        : train_network<double>(ctx, data, spec, tc);
}

template <class T>
std::vector<Complex> network_test_output(const WeightFile& f, const Dataset& data) {
  const auto p = network_from_weights<T>(f);
  const auto norm_in = parse_norm_stats(f.get("norm_in"));
  const auto norm_out = parse_norm_stats(f.get("norm_out"));
  const auto input = prepare_input<T>(data.input, norm_in, p.spec.amp_source, 0, data.size());
  const auto pred = predict(p, input.view());
  std::vector<Complex> y(data.size() - data.val_end);
  for (std::size_t n = data.val_end; n < data.size(); ++n) {
    const double i = static_cast<double>(pred[2 * n]) * norm_out.std_i + norm_out.mean_i;
    const double q = static_cast<double>(pred[2 * n + 1]) * norm_out.std_q + norm_out.mean_q;
    if (!std::isfinite(i) || !std::isfinite(q)) throw NumericError("model output is not finite");
    y[n - data.val_end] = {i, q};
  }
  return y;
}

int cmd_eval(Context& ctx) {
  const auto manifest = read_manifest(manifest_path(ctx));
  const auto data = load_dataset(manifest);
  std::optional<std::pair<OfdmPlan, int>> plan;
  if (!manifest.plan.empty()) plan = read_plan(manifest.plan);

  double occupied = ctx.cfg.real("eval.occupied_fraction");
  if (!(occupied > 0.0)) {
    if (!plan) throw ConfigError("eval.occupied_fraction is required when the dataset has no OFDM plan");
    occupied = plan->first.occupied_fraction(plan->second);
  }
  const auto mask = ChannelMask::contiguous(occupied);
  WelchOptions welch;
  welch.segment_len = static_cast<std::size_t>(ctx.cfg.integer("eval.welch_segment"));
  welch.overlap = ctx.cfg.real("eval.welch_overlap");
  welch.window = parse_window_kind(ctx.cfg.str("eval.welch_window"));
  const OfdmPlan* plan_ptr = plan ? &plan->first : nullptr;
  const int os = plan ? plan->second : 1;

  std::vector<fs::path> files;
  for (const auto& w : ctx.cfg.strings("eval.weights")) files.emplace_back(w);
  if (files.empty()) {
    for (const auto& entry : fs::directory_iterator(ctx.out_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".acw") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
  }
  ctx.cfg.write(ctx.path("eval.config"));

  const std::span<const Complex> measured(data.output.samples.data() + data.val_end, data.size() - data.val_end);
  auto psd_of = [&](std::span<const Complex> y) {
    WelchOptions w = welch;
    w.segment_len = std::min(w.segment_len, std::bit_floor(y.size()));
    return welch_psd(y, w);
  };
  std::vector<MetricsReport> rows;
  rows.push_back(metrics_report(data, measured, "measured", 0, plan_ptr, os, mask, welch));
  write_psd_csv(ctx.path("psd_measured.csv"), psd_of(measured));

  for (const auto& file : files) {
    const auto f = read_acw(file);
    const auto name = file.stem().string();
    const auto& kind = f.get("model");
    std::vector<Complex> y;
    std::size_t params = 0;
    if (is_poly(kind)) {
      const auto spec = poly_spec_from_header(f);
      const auto coeffs = poly_coeffs_from_weights(f);
      const auto full = mp_predict(data.input.samples, spec, coeffs);
      y.assign(full.begin() + static_cast<long>(data.val_end), full.end());
      params = 2 * spec.coefficient_count();
    } else {
      y = f.precision == Precision::f32 ? network_test_output<float>(f, data) : network_test_output<double>(f, data);
      params = param_count(model_spec_from_header(f));
    }
    rows.push_back(metrics_report(data, y, name, params, plan_ptr, os, mask, welch));
    write_psd_csv(ctx.path("psd_" + name + ".csv"), psd_of(y));
  }
  write_metrics_csv(ctx.path("metrics.csv"), rows);
  for (const auto& r : rows) ctx.out << r.text() << "\n";
  return kOk;
}

int cmd_gradcheck(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (parse_precision(cfg.str("precision")) != Precision::f64 && cfg.overridden("precision"))
    throw ConfigError("gradcheck runs in f64 only; precision=f32 is not supported");
  GradCheckOptions opt;
  opt.tolerance = cfg.real("gradcheck.tolerance");
  opt.step = cfg.real("gradcheck.step");
  opt.window = static_cast<std::size_t>(cfg.integer("gradcheck.window"));
  opt.corrupt = cfg.real("gradcheck.corrupt");
  const auto seeds = cfg.integer("gradcheck.seeds");
  if (seeds < 1) throw ConfigError("gradcheck.seeds must be >= 1");

  std::vector<ModelSpec> specs;
  for (const auto& name : cfg.strings("gradcheck.models")) {
    ModelSpec s;
    s.kind = parse_model_kind(name);
    s.hidden = as_int(cfg, "gradcheck.hidden");
    s.film_hidden = as_int(cfg, "gradcheck.film_hidden");
    s.tdnn_hidden = s.hidden;
    s.layers = 1;
    if (s.kind == ModelKind::aclstm) {
      for (const auto& site : cfg.strings("gradcheck.film_sites")) {
        s.film_site = parse_film_site(site);
        specs.push_back(s);
      }
    } else {
      specs.push_back(s);
    }
  }
  if (specs.empty()) throw ConfigError("gradcheck.models is empty");

  std::string report;
  bool all_passed = true;
  for (const auto& spec : specs) {
    for (long long k = 0; k < seeds; ++k) {
      const auto r = grad_check(spec, ctx.seed() + static_cast<std::uint64_t>(k), opt);
      all_passed = all_passed && r.passed;
      char line[256];
      std::snprintf(line, sizeof line, "%-16s seed %-4llu params %-4zu max rel error %.3e at %-14s %s\n",
                    r.model.c_str(), static_cast<unsigned long long>(r.seed), r.checked, r.max_rel_error,
                    r.worst_param.c_str(), r.passed ? "PASS" : "FAIL");
      report += line;
    }
  }
  report += all_passed ? "gradcheck passed\n" : "gradcheck FAILED\n";
  ctx.out << report;
  std::ofstream(ctx.path("gradcheck.txt"), std::ios::trunc) << report;
  ctx.cfg.write(ctx.path("gradcheck.config"));
  return all_passed ? kOk : kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Amplitude-conditioned LSTM power amplifier modeling"};
  app.name("aclstm");
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, precision, out_dir = "out";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_flag("--deterministic", deterministic, "single worker thread");
  app.add_option("--precision", precision, "f32 or f64 (overrides the config)");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--set", overrides, "extra key=value overrides, applied last");

  std::string command;
  for (const char* name : {"gen", "capture", "train", "eval", "gradcheck"}) {
    static const std::map<std::string, std::string> help{
        {"gen", "generate the OFDM excitation and its plan"},
        {"capture", "run the synthetic DUT (or ingest files) and write the dataset"},
        {"train", "train or fit the configured model"},
        {"eval", "evaluate model files on the test split"},
        {"gradcheck", "check analytic gradients against finite differences"}};
    app.add_subcommand(name, help.at(name))->callback([&command, name] { command = name; });
  }

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    Context ctx{config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path), out_dir, out, err};
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      ctx.cfg.set(std::string(text::trim(kv.substr(0, eq))), std::string(text::trim(kv.substr(eq + 1))));
    }
    if (seed) ctx.cfg.set("seed", std::to_string(*seed));
    if (!precision.empty()) ctx.cfg.set("precision", precision);
    if (deterministic) ctx.cfg.set("threads", "1");
    parse_precision(ctx.cfg.str("precision"));
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw IoError(IoErrc::unreadable, "cannot create " + ctx.out_dir.string() + ": " + ec.message());

    if (command == "gen") return cmd_gen(ctx);
    if (command == "capture") return cmd_capture(ctx);
    if (command == "train") return cmd_train(ctx);
    if (command == "eval") return cmd_eval(ctx);
    return cmd_gradcheck(ctx);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  }
}

}  // namespace aclstm::cli
