#pragma once

// Per-step kernels shared by the forward pass and backpropagation.

#include <algorithm>
#include <cmath>
#include <vector>

#include "aclstm/nn.hpp"

namespace aclstm::detail {

// out = W x + b, W row-major (rows x cols). `b` may be null.
template <class T>
inline void affine(const T* w, const T* b, const T* x, std::size_t rows, std::size_t cols, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = b ? b[r] : T(0);
    const T* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

// out += W x
template <class T>
inline void gemv_acc(const T* w, const T* x, std::size_t rows, std::size_t cols, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = T(0);
    const T* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] += acc;
  }
}

// out += W^T y
template <class T>
inline void gemv_t_acc(const T* w, const T* y, std::size_t rows, std::size_t cols, T* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T yr = y[r];
    const T* row = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c] * yr;
  }
}

// G += y x^T
template <class T>
inline void outer_acc(const T* y, const T* x, std::size_t rows, std::size_t cols, T* g) {
  for (std::size_t r = 0; r < rows; ++r) {
    const T yr = y[r];
    T* row = g + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += yr * x[c];
  }
}

template <class T>
inline T sigmoid(T z) {
  return T(1) / (T(1) + std::exp(-z));
}

template <class T>
inline void film_forward(const FilmView<T>& p, T a, T* hidden, T* gamma, T* beta) {
  for (std::size_t k = 0; k < p.film_hidden; ++k) hidden[k] = std::tanh(p.w1[k] * a + p.b1[k]);
  affine(p.w2, p.b2, hidden, p.hidden, p.film_hidden, gamma);
  affine(p.w2 + p.hidden * p.film_hidden, p.b2 + p.hidden, hidden, p.hidden, p.film_hidden, beta);
}

// Destinations for one step of one layer. FiLM pointers are null for a plain LSTM.
template <class T>
struct StepRecord {
  T* f;
  T* i;
  T* o;
  T* g;
  T* gamma;
  T* beta;
  T* film_hidden;
  T* modulated;
  T* c;
  T* tanh_c;
  T* h;
};

template <class T>
struct StepScratch {
  std::vector<T> buf;
  std::size_t h, fh;

  StepScratch(std::size_t hidden, std::size_t film_hidden)
      : buf(10 * hidden + film_hidden, T(0)), h(hidden), fh(film_hidden) {}

  StepRecord<T> record() {
    T* p = buf.data();
    const bool film = fh > 0;
    return {p, p + h, p + 2 * h, p + 3 * h, film ? p + 4 * h : nullptr, film ? p + 5 * h : nullptr,
            film ? p + 10 * h : nullptr, p + 6 * h, p + 7 * h, p + 8 * h, p + 9 * h};
  }
};

template <class T>
inline StepRecord<T> trace_record(LayerTrace<T>& lt, std::size_t t, std::size_t h, std::size_t fh) {
  const std::size_t o = t * h;
  const bool film = !lt.gamma.empty();
  return {lt.f.data() + o,
          lt.i.data() + o,
          lt.o.data() + o,
          lt.g.data() + o,
          film ? lt.gamma.data() + o : nullptr,
          film ? lt.beta.data() + o : nullptr,
          film ? lt.film_hidden.data() + t * fh : nullptr,
          lt.modulated.data() + o,
          lt.c.data() + o,
          lt.tanh_c.data() + o,
          lt.h.data() + o};
}

// One LSTM / AC-LSTM step. With `film` null this is the standard cell.
template <class T>
inline void cell_step(const LstmCellView<T>& p, const FilmView<T>* film, FilmSite site, const T* x, const T* h_prev,
                      const T* c_prev, T a, const StepRecord<T>& r) {
  const std::size_t h = p.hidden;
  T* pre[4] = {r.f, r.i, r.o, r.g};
  for (std::size_t gate = 0; gate < 4; ++gate) {
    affine(p.w[gate], p.b[gate], x, h, p.input, pre[gate]);
    gemv_acc(p.u[gate], h_prev, h, h, pre[gate]);
  }
  for (std::size_t k = 0; k < h; ++k) {
    r.f[k] = sigmoid(r.f[k]);
    r.i[k] = sigmoid(r.i[k]);
    r.o[k] = sigmoid(r.o[k]);
    r.g[k] = std::tanh(r.g[k]);
  }
  if (film) {
    film_forward(*film, a, r.film_hidden, r.gamma, r.beta);
    if (site == FilmSite::candidate) {
      for (std::size_t k = 0; k < h; ++k) {
        r.modulated[k] = r.gamma[k] * r.g[k] + r.beta[k];
        r.c[k] = r.f[k] * c_prev[k] + r.i[k] * r.modulated[k];
      }
    } else {
      for (std::size_t k = 0; k < h; ++k) {
        r.modulated[k] = r.gamma[k] * r.f[k] + r.beta[k];
        const T fm = std::clamp(r.modulated[k], T(0), T(1));
        r.c[k] = fm * c_prev[k] + r.i[k] * r.g[k];
      }
    }
  } else {
    for (std::size_t k = 0; k < h; ++k) {
      r.modulated[k] = r.g[k];
      r.c[k] = r.f[k] * c_prev[k] + r.i[k] * r.g[k];
    }
  }
  for (std::size_t k = 0; k < h; ++k) {
    r.tanh_c[k] = std::tanh(r.c[k]);
    r.h[k] = r.o[k] * r.tanh_c[k];
  }
}

// [I(t-m), Q(t-m)] for m = 0..M, then a(t-m)^k for m = 0..M, k = 1..P; zero before t = 0.
template <class T>
inline void tdnn_features(const ModelSpec& spec, SequenceInput<T> x, std::size_t t, T* f) {
  const auto taps = static_cast<std::size_t>(spec.tdnn_memory + 1);
  const auto order = static_cast<std::size_t>(spec.tdnn_order);
  for (std::size_t m = 0; m < taps; ++m) {
    const bool valid = m <= t;
    f[2 * m] = valid ? x.iq[2 * (t - m)] : T(0);
    f[2 * m + 1] = valid ? x.iq[2 * (t - m) + 1] : T(0);
  }
  T* env = f + 2 * taps;
  for (std::size_t m = 0; m < taps; ++m) {
    const T a = m <= t ? x.amp[t - m] : T(0);
    T pw = T(1);
    for (std::size_t k = 0; k < order; ++k) {
      pw *= a;
      env[m * order + k] = pw;
    }
  }
}

}  // namespace aclstm::detail
