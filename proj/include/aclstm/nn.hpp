#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aclstm {

enum class ModelKind { aclstm, lstm, arvtdnn };
// Where the amplitude-driven FiLM affine transform is applied.
enum class FilmSite { candidate, forget };
// Envelope source for a_t: the physical (pre-normalization) input, or the normalized one.
enum class AmpSource { raw, normalized };

const char* to_string(ModelKind kind);
const char* to_string(FilmSite site);
const char* to_string(AmpSource source);
ModelKind parse_model_kind(std::string_view text);
FilmSite parse_film_site(std::string_view text);
AmpSource parse_amp_source(std::string_view text);

struct ModelSpec {
  ModelKind kind = ModelKind::aclstm;
  int layers = 1;
  int hidden = 8;
  int film_hidden = 4;
  FilmSite film_site = FilmSite::candidate;
  AmpSource amp_source = AmpSource::raw;
  // ARVTDNN: memory depth M, envelope power order P, tanh hidden width.
  int tdnn_memory = 3;
  int tdnn_order = 3;
  int tdnn_hidden = 16;

  bool recurrent() const { return kind != ModelKind::arvtdnn; }
  std::size_t tdnn_features() const;
  void validate() const;
};

// Named row-major tensor inside the flat parameter vector.
struct TensorSlot {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return rows * cols; }
};

// Fixed parameter order. Recurrent models, per layer l:
//   l<l>.W_{f,i,o,c} (hidden x in), l<l>.U_{f,i,o,c} (hidden x hidden), l<l>.b_{f,i,o,c},
//   [AC-LSTM] l<l>.film.w1 (film_hidden x 1), .b1, .w2 (2 hidden x film_hidden), .b2
// then fc.w (hidden x hidden), fc.b, out.w (2 x hidden), out.b.
// ARVTDNN: tdnn.w (hidden x features), tdnn.b, out.w (2 x hidden), out.b.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelSpec& spec);

  const std::vector<TensorSlot>& slots() const { return slots_; }
  const TensorSlot& at(std::string_view name) const;
  std::size_t total() const { return total_; }
  // Slot owning flat index `index`.
  const TensorSlot& slot_of(std::size_t index) const;

 private:
  void add(std::string name, std::size_t rows, std::size_t cols);

  std::vector<TensorSlot> slots_;
  std::size_t total_ = 0;
};

// Exact number of trainable scalars. A zero-layer recurrent spec counts the head only.
std::size_t param_count(const ModelSpec& spec);

template <class T>
struct NetworkParams {
  ModelSpec spec;
  ParamLayout layout;
  std::vector<T> values;

  explicit NetworkParams(const ModelSpec& s) : spec(s), layout(s), values(layout.total(), T(0)) {}

  std::span<T> slot(std::string_view name) {
    const auto& s = layout.at(name);
    return {values.data() + s.offset, s.size()};
  }
  std::span<const T> slot(std::string_view name) const {
    const auto& s = layout.at(name);
    return {values.data() + s.offset, s.size()};
  }
};

enum Gate : std::size_t { kForget = 0, kInput = 1, kOutput = 2, kCandidate = 3 };

template <class T>
struct LstmCellView {
  std::size_t input = 0;
  std::size_t hidden = 0;
  std::array<const T*, 4> w{};  // hidden x input, indexed by Gate
  std::array<const T*, 4> u{};  // hidden x hidden
  std::array<const T*, 4> b{};  // hidden
};

// gamma = out[0:hidden], beta = out[hidden:2 hidden] of w2 tanh(w1 a + b1) + b2.
template <class T>
struct FilmView {
  std::size_t hidden = 0;
  std::size_t film_hidden = 0;
  const T* w1 = nullptr;
  const T* b1 = nullptr;
  const T* w2 = nullptr;
  const T* b2 = nullptr;
};

template <class T>
struct AcLstmLayerView {
  LstmCellView<T> lstm;
  FilmView<T> film;
  FilmSite site = FilmSite::candidate;
};

template <class T>
LstmCellView<T> lstm_view(const NetworkParams<T>& p, int layer);
template <class T>
FilmView<T> film_view(const NetworkParams<T>& p, int layer);
template <class T>
AcLstmLayerView<T> aclstm_view(const NetworkParams<T>& p, int layer);

template <class T>
struct CellState {
  std::vector<T> h;
  std::vector<T> c;

  static CellState zeros(std::size_t hidden) { return {std::vector<T>(hidden, T(0)), std::vector<T>(hidden, T(0))}; }
};

template <class T>
using RecurrentState = std::vector<CellState<T>>;

template <class T>
RecurrentState<T> zero_state(const ModelSpec& spec);

template <class T>
T amplitude(T i, T q);

template <class T>
void film_eval(const FilmView<T>& p, T a, std::span<T> gamma, std::span<T> beta);

template <class T>
CellState<T> lstm_step(const LstmCellView<T>& p, std::span<const T> x, const CellState<T>& state);

// `a` is the envelope of the network input at this time step (shared by all layers).
template <class T>
CellState<T> aclstm_step(const AcLstmLayerView<T>& p, std::span<const T> x, const CellState<T>& state, T a);

// Normalized (I, Q) pairs interleaved in `iq`, and the envelope a_t per step.
template <class T>
struct SequenceInput {
  std::span<const T> iq;
  std::span<const T> amp;

  std::size_t length() const { return amp.size(); }
};

// Intermediates of one recurrent layer, each (steps x hidden) row-major
// except film_hidden (steps x film_hidden).
template <class T>
struct LayerTrace {
  std::vector<T> h0, c0;  // state entering the sequence
  std::vector<T> f, i, o, g;
  std::vector<T> gamma, beta, film_hidden;
  std::vector<T> modulated;  // gamma*g+beta (candidate site) or gamma*f+beta before clamping (forget site)
  std::vector<T> c, tanh_c, h;
};

template <class T>
struct ForwardTrace {
  std::size_t steps = 0;
  std::vector<LayerTrace<T>> layers;
  std::vector<T> head_pre;  // steps x hidden (fc pre-activation or tdnn pre-activation)
  std::vector<T> head_act;  // steps x hidden
  std::vector<T> features;  // ARVTDNN only: steps x features
  std::vector<T> output;    // steps x 2
};

// Recurrent forward. `state` holds the per-layer state on entry and the final
// state on return, so consecutive windows chain exactly. Returns (I, Q)
// predictions interleaved.
template <class T>
std::vector<T> network_forward(const NetworkParams<T>& p, SequenceInput<T> x, RecurrentState<T>& state,
                               ForwardTrace<T>* trace = nullptr);

// Feed-forward time-delay network. History before the sequence start is zero.
template <class T>
std::vector<T> arvtdnn_forward(const NetworkParams<T>& p, SequenceInput<T> x, ForwardTrace<T>* trace = nullptr);

// Zero initial state; dispatches on the model kind.
template <class T>
std::vector<T> predict(const NetworkParams<T>& p, SequenceInput<T> x, ForwardTrace<T>* trace = nullptr);

// Gate weights U(-1/sqrt(hidden), 1/sqrt(hidden)); b_f = 1; FiLM w2 = 0 and
// b2 = [1..1 | 0..0]. FiLM draws use a separate stream so that AC-LSTM and
// LSTM from the same seed share every gate and head value.
template <class T>
NetworkParams<T> init_params(const ModelSpec& spec, std::uint64_t seed);

template <class To, class From>
NetworkParams<To> convert_params(const NetworkParams<From>& p) {
  NetworkParams<To> out(p.spec);
  for (std::size_t k = 0; k < p.values.size(); ++k) out.values[k] = static_cast<To>(p.values[k]);
  return out;
}

}  // namespace aclstm
