#include "aclstm/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "aclstm/error.hpp"
#include "aclstm/rng.hpp"
#include "nn_kernels.hpp"

namespace aclstm {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::aclstm: return "aclstm";
    case ModelKind::lstm: return "lstm";
    case ModelKind::arvtdnn: return "arvtdnn";
  }
  return "?";
}

const char* to_string(FilmSite site) { return site == FilmSite::candidate ? "candidate" : "forget"; }
const char* to_string(AmpSource source) { return source == AmpSource::raw ? "raw" : "normalized"; }

ModelKind parse_model_kind(std::string_view text) {
  if (text == "aclstm") return ModelKind::aclstm;
  if (text == "lstm") return ModelKind::lstm;
  if (text == "arvtdnn") return ModelKind::arvtdnn;
  throw ConfigError("unknown neural model '" + std::string(text) + "'");
}

FilmSite parse_film_site(std::string_view text) {
  if (text == "candidate") return FilmSite::candidate;
  if (text == "forget") return FilmSite::forget;
  throw ConfigError("film_site must be candidate or forget, got '" + std::string(text) + "'");
}

AmpSource parse_amp_source(std::string_view text) {
  if (text == "raw") return AmpSource::raw;
  if (text == "normalized") return AmpSource::normalized;
  throw ConfigError("amp_source must be raw or normalized, got '" + std::string(text) + "'");
}

std::size_t ModelSpec::tdnn_features() const {
  const auto taps = static_cast<std::size_t>(tdnn_memory + 1);
  return 2 * taps + static_cast<std::size_t>(tdnn_order) * taps;
}

void ModelSpec::validate() const {
  if (recurrent()) {
    if (layers < 1) throw ConfigError("model: at least one recurrent layer is required");
    if (hidden < 1) throw ConfigError("model: hidden must be >= 1");
    if (kind == ModelKind::aclstm && film_hidden < 1) throw ConfigError("model: film_hidden must be >= 1");
  } else {
    if (tdnn_memory < 0) throw ConfigError("model: tdnn_memory must be >= 0");
    if (tdnn_order < 0) throw ConfigError("model: tdnn_order must be >= 0");
    if (tdnn_hidden < 1) throw ConfigError("model: tdnn_hidden must be >= 1");
  }
}

ParamLayout::ParamLayout(const ModelSpec& spec) {
  if (spec.recurrent()) {
    if (spec.layers < 0 || spec.hidden < 1) throw ConfigError("model: invalid layer count or hidden size");
    const auto h = static_cast<std::size_t>(spec.hidden);
    for (int l = 0; l < spec.layers; ++l) {
      const std::string pre = "l" + std::to_string(l) + ".";
      const std::size_t in = l == 0 ? 2 : h;
      for (const char* g : {"f", "i", "o", "c"}) add(pre + "W_" + g, h, in);
      for (const char* g : {"f", "i", "o", "c"}) add(pre + "U_" + g, h, h);
      for (const char* g : {"f", "i", "o", "c"}) add(pre + "b_" + g, h, 1);
      if (spec.kind == ModelKind::aclstm) {
        const auto fh = static_cast<std::size_t>(spec.film_hidden);
        add(pre + "film.w1", fh, 1);
        add(pre + "film.b1", fh, 1);
        add(pre + "film.w2", 2 * h, fh);
        add(pre + "film.b2", 2 * h, 1);
      }
    }
    add("fc.w", h, h);
    add("fc.b", h, 1);
    add("out.w", 2, h);
    add("out.b", 2, 1);
  } else {
    const auto hd = static_cast<std::size_t>(spec.tdnn_hidden);
    add("tdnn.w", hd, spec.tdnn_features());
    add("tdnn.b", hd, 1);
    add("out.w", 2, hd);
    add("out.b", 2, 1);
  }
}

void ParamLayout::add(std::string name, std::size_t rows, std::size_t cols) {
  slots_.push_back({std::move(name), rows, cols, total_});
  total_ += rows * cols;
}

const TensorSlot& ParamLayout::at(std::string_view name) const {
  for (const auto& s : slots_)
    if (s.name == name) return s;
  throw ConfigError("no parameter named '" + std::string(name) + "'");
}

const TensorSlot& ParamLayout::slot_of(std::size_t index) const {
  for (const auto& s : slots_)
    if (index >= s.offset && index < s.offset + s.size()) return s;
  throw ConfigError("parameter index out of range");
}

std::size_t param_count(const ModelSpec& spec) { return ParamLayout(spec).total(); }

template <class T>
LstmCellView<T> lstm_view(const NetworkParams<T>& p, int layer) {
  const std::string pre = "l" + std::to_string(layer) + ".";
  LstmCellView<T> v;
  v.hidden = static_cast<std::size_t>(p.spec.hidden);
  v.input = p.layout.at(pre + "W_f").cols;
  const char* gates[4] = {"f", "i", "o", "c"};
  for (std::size_t g = 0; g < 4; ++g) {
    v.w[g] = p.slot(pre + "W_" + gates[g]).data();
    v.u[g] = p.slot(pre + "U_" + gates[g]).data();
    v.b[g] = p.slot(pre + "b_" + gates[g]).data();
  }
  return v;
}

template <class T>
FilmView<T> film_view(const NetworkParams<T>& p, int layer) {
  const std::string pre = "l" + std::to_string(layer) + ".film.";
  FilmView<T> v;
  v.hidden = static_cast<std::size_t>(p.spec.hidden);
  v.film_hidden = static_cast<std::size_t>(p.spec.film_hidden);
  v.w1 = p.slot(pre + "w1").data();
  v.b1 = p.slot(pre + "b1").data();
  v.w2 = p.slot(pre + "w2").data();
  v.b2 = p.slot(pre + "b2").data();
  return v;
}

template <class T>
AcLstmLayerView<T> aclstm_view(const NetworkParams<T>& p, int layer) {
  return {lstm_view(p, layer), film_view(p, layer), p.spec.film_site};
}

template <class T>
RecurrentState<T> zero_state(const ModelSpec& spec) {
  if (!spec.recurrent()) return {};
  return RecurrentState<T>(static_cast<std::size_t>(spec.layers), CellState<T>::zeros(static_cast<std::size_t>(spec.hidden)));
}

template <class T>
T amplitude(T i, T q) {
  return std::hypot(i, q);
}

template <class T>
void film_eval(const FilmView<T>& p, T a, std::span<T> gamma, std::span<T> beta) {
  if (gamma.size() != p.hidden || beta.size() != p.hidden) throw ConfigError("film_eval: output size mismatch");
  std::vector<T> s(p.film_hidden);
  detail::film_forward(p, a, s.data(), gamma.data(), beta.data());
}

template <class T>
CellState<T> lstm_step(const LstmCellView<T>& p, std::span<const T> x, const CellState<T>& state) {
  if (x.size() != p.input || state.h.size() != p.hidden || state.c.size() != p.hidden)
    throw ConfigError("lstm_step: dimension mismatch");
  detail::StepScratch<T> s(p.hidden, 0);
  auto rec = s.record();
  detail::cell_step<T>(p, nullptr, FilmSite::candidate, x.data(), state.h.data(), state.c.data(), T(0), rec);
  return {std::vector<T>(rec.h, rec.h + p.hidden), std::vector<T>(rec.c, rec.c + p.hidden)};
}

template <class T>
CellState<T> aclstm_step(const AcLstmLayerView<T>& p, std::span<const T> x, const CellState<T>& state, T a) {
  const auto& l = p.lstm;
  if (x.size() != l.input || state.h.size() != l.hidden || state.c.size() != l.hidden || p.film.hidden != l.hidden)
    throw ConfigError("aclstm_step: dimension mismatch");
  detail::StepScratch<T> s(l.hidden, p.film.film_hidden);
  auto rec = s.record();
  detail::cell_step<T>(l, &p.film, p.site, x.data(), state.h.data(), state.c.data(), a, rec);
  return {std::vector<T>(rec.h, rec.h + l.hidden), std::vector<T>(rec.c, rec.c + l.hidden)};
}

namespace {

template <class T>
void resize_layer_trace(LayerTrace<T>& lt, std::size_t steps, std::size_t h, std::size_t fh, bool film) {
  for (auto* v : {&lt.f, &lt.i, &lt.o, &lt.g, &lt.modulated, &lt.c, &lt.tanh_c, &lt.h}) v->assign(steps * h, T(0));
  if (film) {
    lt.gamma.assign(steps * h, T(0));
    lt.beta.assign(steps * h, T(0));
    lt.film_hidden.assign(steps * fh, T(0));
  } else {
    lt.gamma.clear();
    lt.beta.clear();
    lt.film_hidden.clear();
  }
}

}  // namespace

template <class T>
std::vector<T> network_forward(const NetworkParams<T>& p, SequenceInput<T> x, RecurrentState<T>& state,
                               ForwardTrace<T>* trace) {
  const auto& spec = p.spec;
  spec.validate();
  if (!spec.recurrent()) throw ConfigError("network_forward: not a recurrent model");
  const std::size_t steps = x.length();
  const auto h = static_cast<std::size_t>(spec.hidden);
  const auto layers = static_cast<std::size_t>(spec.layers);
  const bool film = spec.kind == ModelKind::aclstm;
  const std::size_t fh = film ? static_cast<std::size_t>(spec.film_hidden) : 0;
  if (steps == 0) throw ConfigError("network_forward: empty sequence");
  if (x.iq.size() != 2 * steps) throw ConfigError("network_forward: iq/amplitude length mismatch");
  if (state.size() != layers) throw ConfigError("network_forward: state has wrong layer count");
  for (const auto& s : state)
    if (s.h.size() != h || s.c.size() != h) throw ConfigError("network_forward: state has wrong width");

  std::vector<LstmCellView<T>> cells;
  std::vector<FilmView<T>> films;
  for (std::size_t l = 0; l < layers; ++l) {
    cells.push_back(lstm_view(p, static_cast<int>(l)));
    if (film) films.push_back(film_view(p, static_cast<int>(l)));
  }
  const T* fc_w = p.slot("fc.w").data();
  const T* fc_b = p.slot("fc.b").data();
  const T* out_w = p.slot("out.w").data();
  const T* out_b = p.slot("out.b").data();

  std::vector<detail::StepScratch<T>> scratch;
  if (trace) {
    trace->steps = steps;
    trace->layers.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      resize_layer_trace(trace->layers[l], steps, h, fh, film);
      trace->layers[l].h0 = state[l].h;
      trace->layers[l].c0 = state[l].c;
    }
    trace->head_pre.assign(steps * h, T(0));
    trace->head_act.assign(steps * h, T(0));
    trace->features.clear();
    trace->output.assign(steps * 2, T(0));
  } else {
    for (std::size_t l = 0; l < layers; ++l) scratch.emplace_back(h, fh);
  }

  std::vector<T> out(2 * steps);
  std::vector<T> pre(h), act(h);
  for (std::size_t t = 0; t < steps; ++t) {
    const T a = x.amp[t];
    const T* input = x.iq.data() + 2 * t;
    for (std::size_t l = 0; l < layers; ++l) {
      detail::StepRecord<T> rec = trace ? detail::trace_record(trace->layers[l], t, h, fh) : scratch[l].record();
      detail::cell_step<T>(cells[l], film ? &films[l] : nullptr, spec.film_site, input, state[l].h.data(),
                           state[l].c.data(), a, rec);
      std::copy(rec.h, rec.h + h, state[l].h.begin());
      std::copy(rec.c, rec.c + h, state[l].c.begin());
      input = state[l].h.data();
    }
    T* z = trace ? trace->head_pre.data() + t * h : pre.data();
    T* r = trace ? trace->head_act.data() + t * h : act.data();
    detail::affine(fc_w, fc_b, input, h, h, z);
    for (std::size_t k = 0; k < h; ++k) r[k] = z[k] > T(0) ? z[k] : T(0);
    detail::affine(out_w, out_b, r, 2, h, out.data() + 2 * t);
  }
  if (trace) trace->output = out;
  return out;
}

template <class T>
std::vector<T> arvtdnn_forward(const NetworkParams<T>& p, SequenceInput<T> x, ForwardTrace<T>* trace) {
  const auto& spec = p.spec;
  spec.validate();
  if (spec.kind != ModelKind::arvtdnn) throw ConfigError("arvtdnn_forward: not an ARVTDNN model");
  const std::size_t steps = x.length();
  if (steps == 0) throw ConfigError("arvtdnn_forward: empty sequence");
  if (x.iq.size() != 2 * steps) throw ConfigError("arvtdnn_forward: iq/amplitude length mismatch");
  const std::size_t nf = spec.tdnn_features();
  const auto hd = static_cast<std::size_t>(spec.tdnn_hidden);
  const T* w = p.slot("tdnn.w").data();
  const T* b = p.slot("tdnn.b").data();
  const T* out_w = p.slot("out.w").data();
  const T* out_b = p.slot("out.b").data();

  if (trace) {
    trace->steps = steps;
    trace->layers.clear();
    trace->features.assign(steps * nf, T(0));
    trace->head_pre.assign(steps * hd, T(0));
    trace->head_act.assign(steps * hd, T(0));
  }
  std::vector<T> feat(nf), pre(hd), act(hd), out(2 * steps);
  for (std::size_t t = 0; t < steps; ++t) {
    T* f = trace ? trace->features.data() + t * nf : feat.data();
    detail::tdnn_features(spec, x, t, f);
    T* z = trace ? trace->head_pre.data() + t * hd : pre.data();
    T* r = trace ? trace->head_act.data() + t * hd : act.data();
    detail::affine(w, b, f, hd, nf, z);
    for (std::size_t k = 0; k < hd; ++k) r[k] = std::tanh(z[k]);
    detail::affine(out_w, out_b, r, 2, hd, out.data() + 2 * t);
  }
  if (trace) trace->output = out;
  return out;
}

template <class T>
std::vector<T> predict(const NetworkParams<T>& p, SequenceInput<T> x, ForwardTrace<T>* trace) {
  if (!p.spec.recurrent()) return arvtdnn_forward(p, x, trace);
  auto state = zero_state<T>(p.spec);
  return network_forward(p, x, state, trace);
}

template <class T>
NetworkParams<T> init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  NetworkParams<T> p(spec);
  auto rng = make_stream(seed, "init");
  auto film_rng = make_stream(seed, "init.film");
  auto fill = [](std::span<T> v, Rng& g, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& e : v) e = static_cast<T>(u(g));
  };
  if (spec.recurrent()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(spec.hidden));
    for (int l = 0; l < spec.layers; ++l) {
      const std::string pre = "l" + std::to_string(l) + ".";
      for (const char* g : {"f", "i", "o", "c"}) fill(p.slot(pre + "W_" + g), rng, bound);
      for (const char* g : {"f", "i", "o", "c"}) fill(p.slot(pre + "U_" + g), rng, bound);
      std::ranges::fill(p.slot(pre + "b_f"), T(1));
      for (const char* g : {"i", "o", "c"}) fill(p.slot(pre + "b_" + g), rng, bound);
      if (spec.kind == ModelKind::aclstm) {
        fill(p.slot(pre + "film.w1"), film_rng, 1.0);
        fill(p.slot(pre + "film.b1"), film_rng, 1.0);
        std::ranges::fill(p.slot(pre + "film.w2"), T(0));
        auto b2 = p.slot(pre + "film.b2");
        std::fill(b2.begin(), b2.begin() + spec.hidden, T(1));
        std::fill(b2.begin() + spec.hidden, b2.end(), T(0));
      }
    }
    fill(p.slot("fc.w"), rng, bound);
    fill(p.slot("fc.b"), rng, bound);
    fill(p.slot("out.w"), rng, bound);
    std::ranges::fill(p.slot("out.b"), T(0));
  } else {
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(spec.tdnn_features()));
    const double out_bound = 1.0 / std::sqrt(static_cast<double>(spec.tdnn_hidden));
    fill(p.slot("tdnn.w"), rng, in_bound);
    fill(p.slot("tdnn.b"), rng, in_bound);
    fill(p.slot("out.w"), rng, out_bound);
    std::ranges::fill(p.slot("out.b"), T(0));
  }
  return p;
}

#define ACLSTM_INSTANTIATE(T)                                                                                   \
  template LstmCellView<T> lstm_view(const NetworkParams<T>&, int);                                             \
  template FilmView<T> film_view(const NetworkParams<T>&, int);                                                 \
  template AcLstmLayerView<T> aclstm_view(const NetworkParams<T>&, int);                                        \
  template RecurrentState<T> zero_state<T>(const ModelSpec&);                                                   \
  template T amplitude(T, T);                                                                                   \
  template void film_eval(const FilmView<T>&, T, std::span<T>, std::span<T>);                                   \
  template CellState<T> lstm_step(const LstmCellView<T>&, std::span<const T>, const CellState<T>&);             \
  template CellState<T> aclstm_step(const AcLstmLayerView<T>&, std::span<const T>, const CellState<T>&, T);     \
  template std::vector<T> network_forward(const NetworkParams<T>&, SequenceInput<T>, RecurrentState<T>&,        \
                                          ForwardTrace<T>*);                                                    \
  template std::vector<T> arvtdnn_forward(const NetworkParams<T>&, SequenceInput<T>, ForwardTrace<T>*);         \
  template std::vector<T> predict(const NetworkParams<T>&, SequenceInput<T>, ForwardTrace<T>*);                 \
  template NetworkParams<T> init_params<T>(const ModelSpec&, std::uint64_t);

ACLSTM_INSTANTIATE(float)
ACLSTM_INSTANTIATE(double)
ACLSTM_INSTANTIATE(long double)

#undef ACLSTM_INSTANTIATE

}  // namespace aclstm
