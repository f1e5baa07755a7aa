// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "aclstm/cli.hpp"
#include "aclstm/dut.hpp"
#include "aclstm/metrics.hpp"
#include "aclstm/nn.hpp"
#include "aclstm/poly.hpp"
#include "aclstm/signal.hpp"
#include "aclstm/train.hpp"
#include "oracles.hpp"

using namespace aclstm;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("criterion %d %-28s %s  %s\n", id, name, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* spec, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, spec, a, b, c, d);
  return buf;
}

int cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream o, e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str();
  if (code != 0) std::fprintf(stderr, "%s", e.str().c_str());
  return code;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "aclstm_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. Analytic gradients against central differences, every model and FiLM site, 5 seeds.
void gradient_exactness() {
  const auto dir = fresh_dir("gradcheck");
  const auto t0 = Clock::now();
  std::string out;
  const int code = cli({"--out", dir.string(), "--precision", "f64", "--set", "gradcheck.seeds=5", "gradcheck"}, &out);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  int runs = 0;
  std::istringstream in(out);
  for (std::string line; std::getline(in, line);) {
    const auto pos = line.find("max rel error ");
    if (pos == std::string::npos) continue;
    worst = std::max(worst, std::stod(line.substr(pos + 14)));
    ++runs;
  }
  report(1, "gradient exactness", code == 0 && runs == 20 && worst < 1e-6 && secs < 30.0,
         fmt("%.0f runs, max rel error %.2e (< 1e-6), %.1f s (< 30 s)", runs, worst, secs));
}

// 2. Neutral FiLM reduces AC-LSTM to LSTM in value and gradient.
void neutral_film() {
  const auto t0 = Clock::now();
  double fwd = 0.0, bwd = 0.0;
  for (unsigned seed = 1; seed <= 5; ++seed) {
    ModelSpec s;
    s.hidden = 8;
    s.layers = 1 + seed % 2;
    NetworkParams<double> ac(s);
    ac.values = oracle::uniform(ac.values.size(), seed, -0.6, 0.6);
    for (int l = 0; l < s.layers; ++l) {
      const std::string pre = "l" + std::to_string(l) + ".film.";
      for (auto& v : ac.slot(pre + "w2")) v = 0.0;
      auto b2 = ac.slot(pre + "b2");
      for (std::size_t k = 0; k < b2.size(); ++k) b2[k] = k < b2.size() / 2 ? 1.0 : 0.0;
    }
    ModelSpec ls_spec = s;
    ls_spec.kind = ModelKind::lstm;
    NetworkParams<double> ls(ls_spec);
    for (const auto& slot : ls.layout.slots()) {
      const auto src = ac.slot(slot.name);
      std::copy(src.begin(), src.end(), ls.slot(slot.name).begin());
    }
    const auto iq = oracle::uniform(512, seed + 10, -1.5, 1.5);
    const auto amp = oracle::uniform(256, seed + 20, 0.0, 1.5);
    const auto target = oracle::uniform(512, seed + 30, -1.0, 1.0);
    const SequenceInput<double> x{iq, amp};
    const auto ya = predict(ac, x), yl = predict(ls, x);
    for (std::size_t k = 0; k < ya.size(); ++k) fwd = std::max(fwd, std::abs(ya[k] - yl[k]));
    const auto ga = backward(ac, x, std::span<const double>(target));
    const auto gl = backward(ls, x, std::span<const double>(target));
    for (const auto& slot : ls.layout.slots()) {
      const auto off = ga.grad.layout.at(slot.name).offset;
      for (std::size_t k = 0; k < slot.size(); ++k)
        bwd = std::max(bwd, std::abs(ga.grad.values[off + k] - gl.grad.values[slot.offset + k]));
    }
  }
  const double secs = seconds_since(t0);
  report(2, "neutral-FiLM equivalence", fwd <= 1e-12 && bwd <= 1e-10 && secs < 5.0,
         fmt("forward %.1e (<= 1e-12), backward %.1e (<= 1e-10), %.2f s (< 5 s)", fwd, bwd, secs));
}

// 3. Metric analytic examples and the ACPR band-sum oracle.
void metric_oracles() {
  int bad = 0;
  auto expect = [&](bool ok) { bad += ok ? 0 : 1; };
  const std::vector<Complex> y{{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  std::vector<Complex> half(y), zero(4);
  for (auto& v : half) v *= 0.5;
  expect(nmse_db(y, y) == kDbFloor);
  expect(std::abs(nmse_db(y, zero)) < 1e-12);
  expect(std::abs(nmse_db(y, half) - 10.0 * std::log10(0.25)) < 1e-12);

  PsdEstimate psd;
  psd.segment_len = 1024;
  for (int j = 0; j < 1024; ++j) {
    const double f = (j - 512) / 1024.0;
    psd.freqs.push_back(f);
    psd.power.push_back(f >= -0.125 && f < 0.125 ? 1.0 : 0.01);
  }
  const auto mask = ChannelMask::contiguous(0.25);
  const auto r = acpr_db(psd, mask);
  expect(std::abs(r.lower + 20.0) < 1e-12 && std::abs(r.upper + 20.0) < 1e-12);
  for (auto& p : psd.power)
    if (p == 0.01) p = 0.0;
  expect(acpr_db(psd, mask).combined == kDbFloor);

  std::vector<Complex> scaled(y), offset(y);
  for (auto& v : scaled) v *= 1.1;
  for (auto& v : offset) v += Complex{0.1, -0.05};
  expect(evm_rms_percent(y, y) == 0.0);
  expect(std::abs(evm_rms_percent(scaled, y) - 10.0) < 1e-12);
  expect(std::abs(evm_rms_percent(offset, y) - 100.0 * std::sqrt(0.0125)) < 1e-12);

  // The full default frame, so both estimates have settled to within a few hundredths of a dB.
  OfdmPlan plan;
  plan.num_symbols = 74;
  plan.seed = 3;
  auto [w, full] = generate_ofdm(plan, 2);
  double mean_mod = 0.0;
  for (const auto& s : w.samples) mean_mod += std::abs(s);
  mean_mod /= static_cast<double>(w.size());
  for (auto& s : w.samples) s *= 0.5 / mean_mod;
  const auto out = synth_dut_forward(SynthDutSpec{}, w, 3);
  constexpr std::size_t len = 32768;
  const std::vector<Complex> x(out.samples.begin(), out.samples.begin() + len);
  std::vector<Complex> xw(x);
  for (std::size_t n = 0; n < xw.size(); ++n)
    xw[n] *= 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(len)));
  const auto X = oracle::dft(xw);
  const double occ = full.occupied_fraction(2);
  double main = 0.0, lower = 0.0, upper = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    const double f = (k < len / 2 ? static_cast<double>(k) : static_cast<double>(k) - len) / static_cast<double>(len);
    const double p = std::norm(X[k]);
    if (f >= -occ / 2 && f < occ / 2) main += p;
    if (f >= -1.5 * occ && f < -occ / 2) lower += p;
    if (f >= occ / 2 && f < 1.5 * occ) upper += p;
  }
  const double ref = 10.0 * std::log10(0.5 * (lower + upper) / main);
  const double got = acpr_db(welch_psd(x), ChannelMask::contiguous(full.occupied_fraction(2))).combined;
  report(3, "metric oracles", bad == 0 && std::abs(got - ref) <= 0.1,
         fmt("%.0f analytic mismatches, ACPR %.3f dB vs oracle %.3f dB (|diff| <= 0.1)", bad, got, ref));
}

// 4. Noise-free memory polynomial identification.
void polynomial_oracle() {
  const auto t0 = Clock::now();
  const auto x = oracle::complex_gaussian(10000, 41, 0.5);
  auto c = oracle::complex_gaussian(9, 42, 0.05);
  c[0] += 1.0;
  const auto y = oracle::memory_polynomial(x, 2, 3, c);
  const auto fit = mp_fit(x, y, MpSpec::mp(2, 3));
  double worst = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k)
    worst = std::max(worst, std::abs(fit.coeffs(static_cast<long>(k)) - c[k]) / std::abs(c[k]));
  const double secs = seconds_since(t0);
  report(4, "polynomial identification", worst <= 1e-8 && fit.residual_nmse_db < -120.0 && secs < 10.0,
         fmt("coefficient rel error %.1e (<= 1e-8), residual %.1f dB (< -120), %.2f s", worst, fit.residual_nmse_db,
             secs));
}

std::vector<Complex> network_test_output(const NetworkParams<float>& p, const Dataset& data) {
  const auto in = prepare_input<float>(data.input, data.norm_in, p.spec.amp_source, 0, data.size());
  const auto pred = predict(p, in.view());
  std::vector<Complex> y;
  for (std::size_t n = data.val_end; n < data.size(); ++n)
    y.emplace_back(pred[2 * n] * data.norm_out.std_i + data.norm_out.mean_i,
                   pred[2 * n + 1] * data.norm_out.std_q + data.norm_out.mean_q);
  return y;
}

// Frames of a real dataset behind a guard that refuses test indices.
class GuardedAccess : public SampleAccess {
 public:
  explicit GuardedAccess(const SampleAccess& inner) : inner_(inner) {}
  std::size_t length() const override { return inner_.length(); }
  std::size_t train_end() const override { return inner_.train_end(); }
  std::size_t val_end() const override { return inner_.val_end(); }
  Frame frame(std::size_t n) const override {
    std::size_t seen = max_.load();
    while (n > seen && !max_.compare_exchange_weak(seen, n)) {
    }
    if (n >= inner_.val_end()) {
      ++violations_;
      throw std::logic_error("test index requested");
    }
    return inner_.frame(n);
  }
  std::size_t max_index() const { return max_.load(); }
  int violations() const { return violations_.load(); }

 private:
  const SampleAccess& inner_;
  mutable std::atomic<std::size_t> max_{0};
  mutable std::atomic<int> violations_{0};
};

// 5 and 6. Desk-scale experiment on the default synthetic device.
void desk_experiment() {
  const auto t0 = Clock::now();
  const auto dir = fresh_dir("experiment");
  if (cli({"--out", dir.string(), "--seed", "1", "gen"}) != 0 || cli({"--out", dir.string(), "--seed", "1", "capture"}) != 0) {
    report(5, "desk-scale experiment", false, "gen/capture failed");
    report(6, "spectral fidelity", false, "gen/capture failed");
    return;
  }
  const auto manifest = read_manifest(dir / "dataset.meta");
  const auto data = load_dataset(manifest);
  const auto [plan, os] = read_plan(dir / "plan.txt");
  const double papr = papr_db(read_iqf(dir / "excitation.iqf"));
  const auto mask = ChannelMask::contiguous(plan.occupied_fraction(os));
  const std::span<const Complex> measured(data.output.samples.data() + data.val_end, data.size() - data.val_end);
  const auto measured_report = metrics_report(data, measured, "measured", 0, &plan, os, mask);

  const auto mp = mp_fit(data.input.samples, data.output.samples, MpSpec::mp(4, 9), 0, data.train_end);
  const auto mp_full = mp_predict(data.input.samples, MpSpec::mp(4, 9), mp.coeffs);
  const std::vector<Complex> mp_test(mp_full.begin() + static_cast<long>(data.val_end), mp_full.end());
  const double mp_nmse = nmse_db(measured, mp_test);

  ModelSpec ac_spec;
  ac_spec.hidden = 8;
  ModelSpec lstm_spec = ac_spec;
  lstm_spec.kind = ModelKind::lstm;
  lstm_spec.hidden = 9;
  const double pc_ratio = static_cast<double>(param_count(lstm_spec)) / static_cast<double>(param_count(ac_spec));

  TrainConfig tc;
  tc.epochs = 100;
  tc.window_len = 16;
  tc.batch_size = 2;
  tc.lr0 = 5e-3;
  tc.precision = Precision::f32;
  const DatasetAccess access(data, AmpSource::raw);

  std::vector<double> ac_nmse, lstm_nmse, ac_acpr;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    tc.seed = seed;
    for (const auto* spec : {&ac_spec, &lstm_spec}) {
      const auto r = train<float>(*spec, access, tc);
      const auto y = network_test_output(r.params, data);
      const auto m = metrics_report(data, y, to_string(spec->kind), param_count(*spec), &plan, os, mask);
      std::printf("  seed %llu %-6s test NMSE %7.2f dB  ACPR %7.2f dB  EVM %5.2f %%  best epoch %d%s\n",
                  static_cast<unsigned long long>(seed), to_string(spec->kind), m.nmse_db, m.acpr.combined, m.evm_pct,
                  r.best_epoch, r.diverged ? "  (diverged)" : "");
      std::fflush(stdout);
      (spec == &ac_spec ? ac_nmse : lstm_nmse).push_back(r.diverged ? 0.0 : m.nmse_db);
      if (spec == &ac_spec) ac_acpr.push_back(m.acpr.combined);
    }
  }
  const double secs = seconds_since(t0);
  const double ac_med = median(ac_nmse), lstm_med = median(lstm_nmse);
  const double worst = std::max(*std::max_element(ac_nmse.begin(), ac_nmse.end()),
                                *std::max_element(lstm_nmse.begin(), lstm_nmse.end()));
  std::printf("  excitation %zu samples, PAPR %.2f dB; params AC-LSTM %zu, LSTM %zu (ratio %.3f); MP test NMSE %.2f dB\n",
              data.size(), papr, param_count(ac_spec), param_count(lstm_spec), pc_ratio, mp_nmse);
  const bool setup = data.size() >= 40000 && papr >= 8.0 && papr <= 8.8 && std::abs(pc_ratio - 1.0) <= 0.05;
  const bool a = worst <= -30.0;
  const bool b = ac_med <= lstm_med + 0.0;
  const bool c = std::max(ac_med, lstm_med) <= mp_nmse - 3.0;
  std::printf("  (a) every run <= -30 dB: %s (worst %.2f dB)\n", a ? "yes" : "no", worst);
  std::printf("  (b) AC-LSTM median %.2f dB <= LSTM median %.2f dB: %s\n", ac_med, lstm_med, b ? "yes" : "no");
  std::printf("  (c) both medians <= MP %.2f dB - 3 dB: %s\n", mp_nmse, c ? "yes" : "no");
  report(5, "desk-scale experiment", setup && a && b && c && secs < 1200.0,
         fmt("AC-LSTM %.2f dB, LSTM %.2f dB, MP %.2f dB, %.0f s (< 1200 s)", ac_med, lstm_med, mp_nmse, secs));

  const double acpr_med = median(ac_acpr);
  const double gap = acpr_med - measured_report.acpr.combined;
  report(6, "spectral fidelity", std::abs(gap) <= 1.5,
         fmt("AC-LSTM ACPR %.2f dB vs device %.2f dB (|diff| %.2f <= 1.5)", acpr_med, measured_report.acpr.combined,
             std::abs(gap)));

}

// 8. Training through an access guard never reaches the test block; normalization
// statistics depend on the train block only.
void no_leakage() {
  const auto dir = fs::temp_directory_path() / "aclstm_acceptance" / "experiment";
  const auto data = load_dataset(read_manifest(dir / "dataset.meta"));
  const DatasetAccess access(data, AmpSource::raw);
  ModelSpec ac_spec;
  TrainConfig tc;
  tc.window_len = 16;
  tc.batch_size = 2;
  tc.lr0 = 5e-3;
  tc.precision = Precision::f32;
  GuardedAccess guard(access);
  TrainConfig quick = tc;
  quick.epochs = 2;
  quick.seed = 1;
  bool threw = false;
  try {
    train<float>(ac_spec, guard, quick);
  } catch (const std::logic_error&) {
    threw = true;
  }
  Dataset mutated = data;
  for (std::size_t n = data.val_end; n < data.size(); ++n) {
    mutated.input.samples[n] *= 3.0;
    mutated.output.samples[n] = {7.0, -7.0};
  }
  const auto rebuilt = make_dataset(mutated.input, mutated.output);
  const auto same = [](const NormStats& p, const NormStats& q) {
    return p.mean_i == q.mean_i && p.mean_q == q.mean_q && p.std_i == q.std_i && p.std_q == q.std_q;
  };
  const bool norm_ok = same(rebuilt.norm_in, data.norm_in) && same(rebuilt.norm_out, data.norm_out) &&
                       same(fit_norm(std::span<const Complex>(data.input.samples).first(data.train_end)), data.norm_in);
  report(8, "no leakage", !threw && guard.violations() == 0 && guard.max_index() == data.val_end - 1 && norm_ok,
         fmt("max index read %.0f (< test start %.0f), %.0f violations, train-only norm stats ", guard.max_index(),
             data.val_end, guard.violations()) +
             (norm_ok ? "yes" : "no"));
}

// 7. Byte-identical artifacts on reruns.
void reproducibility() {
  const std::vector<std::vector<std::string>> steps{
      {"gen"},
      {"capture"},
      {"--set", "train.epochs=3", "--set", "train.batch_size=8", "train"},
      {"--set", "model=lstm", "--set", "model.hidden=9", "--set", "train.epochs=3", "--set", "train.batch_size=8", "train"},
      {"--set", "model=arvtdnn", "--set", "train.epochs=3", "--set", "train.batch_size=8", "train"},
      {"--set", "model=mp", "train"},
      {"--set", "model=gmp", "train"},
      {"eval"},
      {"--set", "gradcheck.seeds=1", "gradcheck"}};
  std::vector<fs::path> dirs{fresh_dir("rerun_a"), fresh_dir("rerun_b")};
  bool ok = true;
  for (const auto& dir : dirs)
    for (const auto& step : steps) {
      std::vector<std::string> args{"--out", dir.string(), "--seed", "3", "--deterministic", "--set", "signal.min_samples=12000"};
      args.insert(args.end(), step.begin(), step.end());
      ok = ok && cli(args) == 0;
    }
  int compared = 0, differing = 0;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".acw") continue;
    ++compared;
    if (slurp(entry.path()) != slurp(dirs[1] / entry.path().filename())) {
      ++differing;
      std::printf("  differs: %s\n", entry.path().filename().string().c_str());
    }
  }
  report(7, "reproducibility", ok && compared >= 10 && differing == 0,
         fmt("%.0f CSV/weight files compared, %.0f differ", compared, differing));
}

}  // namespace

int main() {
  gradient_exactness();
  neutral_film();
  metric_oracles();
  polynomial_oracle();
  desk_experiment();
  reproducibility();
  no_leakage();
  std::printf("%s: %d criterion(s) failed\n", failures ? "ACCEPTANCE FAILED" : "acceptance passed", failures);
  return failures ? 1 : 0;
}
