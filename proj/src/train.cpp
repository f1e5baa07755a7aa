#include "aclstm/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "aclstm/error.hpp"
#include "aclstm/rng.hpp"
#include "nn_kernels.hpp"
#include "text_util.hpp"

namespace aclstm {

const char* to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view text) {
  if (text == "f32") return Precision::f32;
  if (text == "f64") return Precision::f64;
  throw ConfigError("precision must be f32 or f64, got '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (window_len < 1) throw ConfigError("train: window_len must be >= 1");
  if (!(lr0 > 0.0) || !(min_lr > 0.0)) throw ConfigError("train: learning rates must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ConfigError("train: plateau_factor must lie in (0, 1)");
  if (plateau_patience < 1) throw ConfigError("train: plateau_patience must be >= 1");
  if (!(plateau_threshold >= 0.0)) throw ConfigError("train: plateau_threshold must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0 && adam.eps > 0.0))
    throw ConfigError("train: invalid Adam hyperparameters");
  if (threads < 1) throw ConfigError("train: threads must be >= 1");
}

DatasetAccess::DatasetAccess(const Dataset& data, AmpSource amp_source) : data_(data), amp_source_(amp_source) {}

Frame DatasetAccess::frame(std::size_t n) const {
  const Complex x = data_.input.samples.at(n);
  const Complex y = data_.output.samples.at(n);
  const auto& ni = data_.norm_in;
  const auto& no = data_.norm_out;
  Frame f;
  f.i = (x.real() - ni.mean_i) / ni.std_i;
  f.q = (x.imag() - ni.mean_q) / ni.std_q;
  f.amp = amp_source_ == AmpSource::raw ? std::abs(x) : std::hypot(f.i, f.q);
  f.target_i = (y.real() - no.mean_i) / no.std_i;
  f.target_q = (y.imag() - no.mean_q) / no.std_q;
  return f;
}

template <class T>
PreparedInput<T> prepare_input(const Waveform& input, const NormStats& norm_in, AmpSource amp_source,
                               std::size_t begin, std::size_t end) {
  if (begin > end || end > input.size()) throw ConfigError("prepare_input: range out of bounds");
  PreparedInput<T> out;
  out.iq.resize(2 * (end - begin));
  out.amp.resize(end - begin);
  for (std::size_t n = begin; n < end; ++n) {
    const Complex x = input.samples[n];
    const double i = (x.real() - norm_in.mean_i) / norm_in.std_i;
    const double q = (x.imag() - norm_in.mean_q) / norm_in.std_q;
    out.iq[2 * (n - begin)] = static_cast<T>(i);
    out.iq[2 * (n - begin) + 1] = static_cast<T>(q);
    out.amp[n - begin] = static_cast<T>(amp_source == AmpSource::raw ? std::abs(x) : std::hypot(i, q));
  }
  return out;
}

template <class T>
T mse_loss(std::span<const T> pred, std::span<const T> target) {
  if (pred.size() != target.size()) throw ConfigError("mse_loss: length mismatch");
  if (pred.empty()) throw ConfigError("mse_loss: empty input");
  T acc = T(0);
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const T d = pred[k] - target[k];
    acc += d * d;
  }
  return acc / static_cast<T>(pred.size());
}

namespace {

template <class T>
void backward_recurrent(const NetworkParams<T>& p, SequenceInput<T> x, const ForwardTrace<T>& tr,
                        const std::vector<T>& dy, std::span<T> grad) {
  const auto& spec = p.spec;
  const std::size_t steps = tr.steps;
  const auto h = static_cast<std::size_t>(spec.hidden);
  const auto layers = static_cast<std::size_t>(spec.layers);
  const bool film = spec.kind == ModelKind::aclstm;
  const std::size_t fh = film ? static_cast<std::size_t>(spec.film_hidden) : 0;
  auto gslot = [&](const std::string& name) { return grad.data() + p.layout.at(name).offset; };

  // Head: y = out.w relu(fc.w h_top + fc.b) + out.b.
  const T* fc_w = p.slot("fc.w").data();
  const T* out_w = p.slot("out.w").data();
  T* g_fc_w = gslot("fc.w");
  T* g_fc_b = gslot("fc.b");
  T* g_out_w = gslot("out.w");
  T* g_out_b = gslot("out.b");
  std::vector<T> dh_ext(steps * h, T(0));
  std::vector<T> dr(h), dz(h);
  const auto& top = tr.layers.back();
  for (std::size_t t = 0; t < steps; ++t) {
    const T* d = dy.data() + 2 * t;
    const T* r = tr.head_act.data() + t * h;
    const T* z = tr.head_pre.data() + t * h;
    detail::outer_acc(d, r, 2, h, g_out_w);
    g_out_b[0] += d[0];
    g_out_b[1] += d[1];
    std::fill(dr.begin(), dr.end(), T(0));
    detail::gemv_t_acc(out_w, d, 2, h, dr.data());
    for (std::size_t k = 0; k < h; ++k) dz[k] = z[k] > T(0) ? dr[k] : T(0);
    detail::outer_acc(dz.data(), top.h.data() + t * h, h, h, g_fc_w);
    for (std::size_t k = 0; k < h; ++k) g_fc_b[k] += dz[k];
    detail::gemv_t_acc(fc_w, dz.data(), h, h, dh_ext.data() + t * h);
  }

  std::vector<T> dh(h), dc(h), dh_next(h), dc_next(h), dzs[4] = {std::vector<T>(h), std::vector<T>(h),
                                                                 std::vector<T>(h), std::vector<T>(h)};
  std::vector<T> dfilm(2 * h), ds(fh), dx_layer;
  for (std::size_t li = layers; li-- > 0;) {
    const auto& lt = tr.layers[li];
    const auto cell = lstm_view(p, static_cast<int>(li));
    const std::size_t in = cell.input;
    const std::string pre = "l" + std::to_string(li) + ".";
    T* gw[4] = {gslot(pre + "W_f"), gslot(pre + "W_i"), gslot(pre + "W_o"), gslot(pre + "W_c")};
    T* gu[4] = {gslot(pre + "U_f"), gslot(pre + "U_i"), gslot(pre + "U_o"), gslot(pre + "U_c")};
    T* gb[4] = {gslot(pre + "b_f"), gslot(pre + "b_i"), gslot(pre + "b_o"), gslot(pre + "b_c")};
    FilmView<T> fv{};
    T *g_w1 = nullptr, *g_b1 = nullptr, *g_w2 = nullptr, *g_b2 = nullptr;
    if (film) {
      fv = film_view(p, static_cast<int>(li));
      g_w1 = gslot(pre + "film.w1");
      g_b1 = gslot(pre + "film.b1");
      g_w2 = gslot(pre + "film.w2");
      g_b2 = gslot(pre + "film.b2");
    }
    const bool need_dx = li > 0;
    if (need_dx) dx_layer.assign(steps * in, T(0));
    std::fill(dh_next.begin(), dh_next.end(), T(0));
    std::fill(dc_next.begin(), dc_next.end(), T(0));

    for (std::size_t t = steps; t-- > 0;) {
      const std::size_t o = t * h;
      const T* f = lt.f.data() + o;
      const T* ig = lt.i.data() + o;
      const T* og = lt.o.data() + o;
      const T* g = lt.g.data() + o;
      const T* m = lt.modulated.data() + o;
      const T* tc = lt.tanh_c.data() + o;
      const T* h_prev = t > 0 ? lt.h.data() + o - h : lt.h0.data();
      const T* c_prev = t > 0 ? lt.c.data() + o - h : lt.c0.data();
      const T* xin = li == 0 ? x.iq.data() + 2 * t : tr.layers[li - 1].h.data() + o;
      const T* gamma = film ? lt.gamma.data() + o : nullptr;

      for (std::size_t k = 0; k < h; ++k) {
        dh[k] = dh_ext[o + k] + dh_next[k];
        dc[k] = dc_next[k] + dh[k] * og[k] * (T(1) - tc[k] * tc[k]);
        const T d_o = dh[k] * tc[k];
        dzs[kOutput][k] = d_o * og[k] * (T(1) - og[k]);
      }
      for (std::size_t k = 0; k < h; ++k) {
        T df, di, dg;
        if (film && spec.film_site == FilmSite::candidate) {
          const T dm = dc[k] * ig[k];
          df = dc[k] * c_prev[k];
          di = dc[k] * m[k];
          dg = dm * gamma[k];
          dfilm[k] = dm * g[k];
          dfilm[h + k] = dm;
          dc_next[k] = dc[k] * f[k];
        } else if (film) {
          const T fm = std::clamp(m[k], T(0), T(1));
          const T draw = (m[k] > T(0) && m[k] < T(1)) ? dc[k] * c_prev[k] : T(0);
          df = draw * gamma[k];
          dfilm[k] = draw * f[k];
          dfilm[h + k] = draw;
          di = dc[k] * g[k];
          dg = dc[k] * ig[k];
          dc_next[k] = dc[k] * fm;
        } else {
          df = dc[k] * c_prev[k];
          di = dc[k] * g[k];
          dg = dc[k] * ig[k];
          dc_next[k] = dc[k] * f[k];
        }
        dzs[kForget][k] = df * f[k] * (T(1) - f[k]);
        dzs[kInput][k] = di * ig[k] * (T(1) - ig[k]);
        dzs[kCandidate][k] = dg * (T(1) - g[k] * g[k]);
      }
      std::fill(dh_next.begin(), dh_next.end(), T(0));
      for (std::size_t gate = 0; gate < 4; ++gate) {
        const T* d = dzs[gate].data();
        detail::outer_acc(d, xin, h, in, gw[gate]);
        detail::outer_acc(d, h_prev, h, h, gu[gate]);
        for (std::size_t k = 0; k < h; ++k) gb[gate][k] += d[k];
        detail::gemv_t_acc(cell.u[gate], d, h, h, dh_next.data());
        if (need_dx) detail::gemv_t_acc(cell.w[gate], d, h, in, dx_layer.data() + t * in);
      }
      if (film) {
        const T* s = lt.film_hidden.data() + t * fh;
        detail::outer_acc(dfilm.data(), s, 2 * h, fh, g_w2);
        for (std::size_t k = 0; k < 2 * h; ++k) g_b2[k] += dfilm[k];
        std::fill(ds.begin(), ds.end(), T(0));
        detail::gemv_t_acc(fv.w2, dfilm.data(), 2 * h, fh, ds.data());
        const T a = x.amp[t];
        for (std::size_t k = 0; k < fh; ++k) {
          const T du = ds[k] * (T(1) - s[k] * s[k]);
          g_w1[k] += du * a;
          g_b1[k] += du;
        }
      }
    }
    if (need_dx) dh_ext.swap(dx_layer);
  }
}

template <class T>
void backward_tdnn(const NetworkParams<T>& p, const ForwardTrace<T>& tr, const std::vector<T>& dy, std::span<T> grad) {
  const std::size_t steps = tr.steps;
  const std::size_t nf = p.spec.tdnn_features();
  const auto hd = static_cast<std::size_t>(p.spec.tdnn_hidden);
  auto gslot = [&](const std::string& name) { return grad.data() + p.layout.at(name).offset; };
  const T* out_w = p.slot("out.w").data();
  T* g_w = gslot("tdnn.w");
  T* g_b = gslot("tdnn.b");
  T* g_out_w = gslot("out.w");
  T* g_out_b = gslot("out.b");
  std::vector<T> dr(hd);
  for (std::size_t t = 0; t < steps; ++t) {
    const T* d = dy.data() + 2 * t;
    const T* r = tr.head_act.data() + t * hd;
    detail::outer_acc(d, r, 2, hd, g_out_w);
    g_out_b[0] += d[0];
    g_out_b[1] += d[1];
    std::fill(dr.begin(), dr.end(), T(0));
    detail::gemv_t_acc(out_w, d, 2, hd, dr.data());
    for (std::size_t k = 0; k < hd; ++k) dr[k] *= T(1) - r[k] * r[k];
    detail::outer_acc(dr.data(), tr.features.data() + t * nf, hd, nf, g_w);
    for (std::size_t k = 0; k < hd; ++k) g_b[k] += dr[k];
  }
}

}  // namespace

template <class T>
T accumulate_gradient(const NetworkParams<T>& p, SequenceInput<T> x, std::span<const T> target, T scale,
                      std::span<T> grad) {
  if (grad.size() != p.values.size()) throw ConfigError("backward: gradient store has the wrong size");
  if (target.size() != x.iq.size()) throw ConfigError("backward: target length mismatch");
  thread_local ForwardTrace<T> trace;
  const auto pred = predict(p, x, &trace);
  const T loss = mse_loss<T>(pred, target);
  const T k = scale * T(2) / static_cast<T>(pred.size());
  std::vector<T> dy(pred.size());
  for (std::size_t n = 0; n < pred.size(); ++n) dy[n] = k * (pred[n] - target[n]);
  if (p.spec.recurrent())
    backward_recurrent(p, x, trace, dy, grad);
  else
    backward_tdnn(p, trace, dy, grad);
  return loss;
}

template <class T>
LossAndGradient<T> backward(const NetworkParams<T>& p, SequenceInput<T> x, std::span<const T> target) {
  LossAndGradient<T> out{T(0), GradientStore<T>(p.spec)};
  out.loss = accumulate_gradient(p, x, target, T(1), std::span<T>(out.grad.values));
  if (!std::isfinite(static_cast<double>(out.loss))) throw NumericError("backward: non-finite loss");
  return out;
}

template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& st, double lr, const AdamConfig& cfg) {
  if (grads.size() != params.size()) throw ConfigError("adam_step: gradient shape mismatch");
  if (st.m.empty()) {
    st.m.assign(params.size(), T(0));
    st.v.assign(params.size(), T(0));
  }
  if (st.m.size() != params.size() || st.v.size() != params.size())
    throw ConfigError("adam_step: optimizer state shape mismatch");
  ++st.step;
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, static_cast<double>(st.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, static_cast<double>(st.step)));
  const T step = static_cast<T>(lr);
  const T eps = static_cast<T>(cfg.eps);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const T g = grads[k];
    st.m[k] = b1 * st.m[k] + (T(1) - b1) * g;
    st.v[k] = b2 * st.v[k] + (T(1) - b2) * g * g;
    const T mhat = st.m[k] / c1;
    const T vhat = st.v[k] / c2;
    params[k] -= step * mhat / (std::sqrt(vhat) + eps);
  }
}

namespace {

template <class T>
struct Block {
  std::vector<T> iq;
  std::vector<T> amp;
  std::vector<T> target;

  SequenceInput<T> window(std::size_t start, std::size_t len) const {
    return {std::span<const T>(iq).subspan(2 * start, 2 * len), std::span<const T>(amp).subspan(start, len)};
  }
  std::span<const T> target_window(std::size_t start, std::size_t len) const {
    return std::span<const T>(target).subspan(2 * start, 2 * len);
  }
};

template <class T>
Block<T> read_block(const SampleAccess& data, std::size_t begin, std::size_t end) {
  Block<T> b;
  b.iq.reserve(2 * (end - begin));
  b.amp.reserve(end - begin);
  b.target.reserve(2 * (end - begin));
  for (std::size_t n = begin; n < end; ++n) {
    const Frame f = data.frame(n);
    b.iq.push_back(static_cast<T>(f.i));
    b.iq.push_back(static_cast<T>(f.q));
    b.amp.push_back(static_cast<T>(f.amp));
    b.target.push_back(static_cast<T>(f.target_i));
    b.target.push_back(static_cast<T>(f.target_q));
  }
  return b;
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

template <class T>
TrainResult<T> train(const ModelSpec& spec, const SampleAccess& data, const TrainConfig& cfg,
                     const EpochCallback<T>& on_epoch) {
  spec.validate();
  cfg.validate();
  const std::size_t train_end = data.train_end();
  const std::size_t val_end = data.val_end();
  if (!(0 < train_end && train_end < val_end && val_end <= data.length()))
    throw ConfigError("train: invalid split bounds");
  const auto window = static_cast<std::size_t>(cfg.window_len);
  if (window > train_end) throw ConfigError("train: window_len exceeds the training block");

  TrainResult<T> result{init_params<T>(spec, cfg.seed), {}, 0, false, {}};
  if (cfg.epochs == 0) return result;

  const Block<T> train_block = read_block<T>(data, 0, train_end);
  const Block<T> val_block = read_block<T>(data, train_end, val_end);
  const std::size_t num_windows = train_end / window;

  NetworkParams<T> params = result.params;
  const std::size_t n = params.values.size();
  AdamState<T> adam;
  auto shuffle_rng = make_stream(cfg.seed, "shuffle");
  std::vector<std::size_t> order(num_windows);
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::vector<T>> per_window(std::min(batch, num_windows), std::vector<T>(n));
  std::vector<T> window_loss(per_window.size());
  std::vector<T> grad(n);

  double lr = cfg.lr0;
  double best_val = std::numeric_limits<double>::infinity();
  double plateau_ref = best_val;
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < num_windows; start += batch) {
      const std::size_t count = std::min(batch, num_windows - start);
      auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t w = first; w < count; w += stride) {
          auto& g = per_window[w];
          std::fill(g.begin(), g.end(), T(0));
          const std::size_t s = order[start + w] * window;
          window_loss[w] = accumulate_gradient<T>(params, train_block.window(s, window),
                                                  train_block.target_window(s, window), T(1), g);
        }
      };
      const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), count);
      if (workers > 1) {
        std::vector<std::jthread> pool;
        for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work, k, workers);
      } else {
        work(0, 1);
      }
      // Fixed reduction order keeps results independent of the thread count.
      std::fill(grad.begin(), grad.end(), T(0));
      double batch_loss = 0.0;
      for (std::size_t w = 0; w < count; ++w) {
        batch_loss += static_cast<double>(window_loss[w]);
        for (std::size_t k = 0; k < n; ++k) grad[k] += per_window[w][k];
      }
      const T inv = T(1) / static_cast<T>(count);
      for (auto& g : grad) g *= inv;
      if (!finite(batch_loss)) {
        result.diverged = true;
        result.diagnostics = "non-finite training loss in epoch " + std::to_string(epoch);
        return result;
      }
      loss_sum += batch_loss;
      adam_step<T>(params.values, grad, adam, lr, cfg.adam);
    }

    const auto val_pred = predict(params, SequenceInput<T>{val_block.iq, val_block.amp});
    const double val_mse = static_cast<double>(mse_loss<T>(val_pred, val_block.target));
    if (!finite(val_mse)) {
      result.diverged = true;
      result.diagnostics = "non-finite validation loss in epoch " + std::to_string(epoch);
      return result;
    }
    result.history.push_back({epoch, loss_sum / static_cast<double>(num_windows), val_mse, lr});
    if (val_mse < best_val) {
      best_val = val_mse;
      result.params = params;
      result.best_epoch = epoch;
    }
    if (val_mse < plateau_ref - cfg.plateau_threshold) {
      plateau_ref = val_mse;
      stale = 0;
    } else if (++stale >= cfg.plateau_patience) {
      lr = std::max(lr * cfg.plateau_factor, cfg.min_lr);
      stale = 0;
    }
    if (on_epoch) on_epoch(epoch, params);
  }
  return result;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrc::unreadable, "cannot open for writing: " + path.string());
  out << "epoch,train_mse,val_mse,lr\n";
  for (const auto& r : history)
    out << r.epoch << ',' << text::format_double(r.train_mse) << ',' << text::format_double(r.val_mse) << ','
        << text::format_double(r.lr) << '\n';
  if (!out) throw IoError(IoErrc::unreadable, "write failed: " + path.string());
}

GradCheckReport grad_check(const ModelSpec& spec, std::uint64_t seed, const GradCheckOptions& options) {
  if (options.window == 0) throw ConfigError("grad_check: window must be >= 1");
  if (!(options.step > 0.0)) throw ConfigError("grad_check: step must be positive");
  ModelSpec tiny = spec;
  tiny.hidden = std::min(tiny.hidden, 4);
  tiny.film_hidden = std::min(tiny.film_hidden, 4);
  tiny.layers = std::min(tiny.layers, 2);
  tiny.tdnn_hidden = std::min(tiny.tdnn_hidden, 4);
  tiny.tdnn_memory = std::min(tiny.tdnn_memory, 3);
  tiny.tdnn_order = std::min(tiny.tdnn_order, 3);
  tiny.validate();
  const std::size_t steps = std::min<std::size_t>(options.window, 8);

  auto p = init_params<double>(tiny, seed);
  auto rng = make_stream(seed, "gradcheck");
  std::uniform_real_distribution<double> jitter(-0.4, 0.4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Move away from the neutral FiLM start so every path carries gradient.
  for (auto& v : p.values) v += jitter(rng);
  std::vector<double> iq(2 * steps), amp(steps), target(2 * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    iq[2 * t] = gauss(rng);
    iq[2 * t + 1] = gauss(rng);
    amp[t] = std::hypot(iq[2 * t], iq[2 * t + 1]);
    target[2 * t] = 0.5 * gauss(rng);
    target[2 * t + 1] = 0.5 * gauss(rng);
  }
  const SequenceInput<double> x{iq, amp};

  std::vector<double> analytic(p.values.size(), 0.0);
  accumulate_gradient<double>(p, x, target, 1.0, analytic);
  if (options.corrupt != 0.0) analytic[0] += options.corrupt;

  GradCheckReport report;
  report.model = std::string(to_string(tiny.kind)) + (tiny.kind == ModelKind::aclstm ? std::string("/") + to_string(tiny.film_site) : "");
  report.seed = seed;
  // The difference quotient is evaluated in extended precision: with f64 losses
  // the cancellation error alone exceeds the tolerance for gradients near 1e-6.
  auto pl = convert_params<long double>(p);
  const std::vector<long double> iq_l(iq.begin(), iq.end()), amp_l(amp.begin(), amp.end());
  const SequenceInput<long double> xl{iq_l, amp_l};
  auto loss_l = [&] {
    const auto pred = predict(pl, xl);
    long double acc = 0.0L;
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const long double d = pred[j] - static_cast<long double>(target[j]);
      acc += d * d;
    }
    return acc / static_cast<long double>(pred.size());
  };
  const double h = options.step;
  for (std::size_t k = 0; k < p.values.size(); ++k) {
    const long double saved = pl.values[k];
    pl.values[k] = saved + h;
    const long double up = loss_l();
    pl.values[k] = saved - h;
    const long double down = loss_l();
    pl.values[k] = saved;
    const double numeric = static_cast<double>((up - down) / (2.0L * h));
    const double rel = std::abs(analytic[k] - numeric) / std::max(std::abs(analytic[k]), 1e-8);
    ++report.checked;
    if (rel > report.max_rel_error || !std::isfinite(rel)) {
      report.max_rel_error = std::isfinite(rel) ? rel : std::numeric_limits<double>::infinity();
      const auto& slot = p.layout.slot_of(k);
      report.worst_param = slot.name + "[" + std::to_string(k - slot.offset) + "]";
      report.worst_index = k;
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

#define ACLSTM_INSTANTIATE(T)                                                                                    \
  template PreparedInput<T> prepare_input<T>(const Waveform&, const NormStats&, AmpSource, std::size_t,          \
                                             std::size_t);                                                       \
  template T mse_loss<T>(std::span<const T>, std::span<const T>);                                                \
  template T accumulate_gradient<T>(const NetworkParams<T>&, SequenceInput<T>, std::span<const T>, T,            \
                                    std::span<T>);                                                               \
  template LossAndGradient<T> backward<T>(const NetworkParams<T>&, SequenceInput<T>, std::span<const T>);        \
  template void adam_step<T>(std::span<T>, std::span<const T>, AdamState<T>&, double, const AdamConfig&);        \
  template TrainResult<T> train<T>(const ModelSpec&, const SampleAccess&, const TrainConfig&,                    \
                                   const EpochCallback<T>&);

ACLSTM_INSTANTIATE(float)
ACLSTM_INSTANTIATE(double)

#undef ACLSTM_INSTANTIATE

}  // namespace aclstm
