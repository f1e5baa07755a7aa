#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "aclstm/dut.hpp"
#include "aclstm/nn.hpp"

namespace aclstm {

enum class Precision { f32, f64 };
const char* to_string(Precision p);
Precision parse_precision(std::string_view text);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 256;  // windows per minibatch
  int window_len = 64;
  double lr0 = 1e-3;
  double plateau_factor = 0.5;
  int plateau_patience = 10;
  double plateau_threshold = 1e-7;
  double min_lr = 1e-5;
  AdamConfig adam;
  std::uint64_t seed = 1;
  Precision precision = Precision::f32;
  // Worker threads for per-window gradients; results do not depend on it.
  int threads = 1;

  void validate() const;
};

// One normalized frame of the training stream.
struct Frame {
  double i = 0.0;
  double q = 0.0;
  double amp = 0.0;
  double target_i = 0.0;
  double target_q = 0.0;
};

// Read access to a split dataset. The trainer only ever asks for frames below val_end().
class SampleAccess {
 public:
  virtual ~SampleAccess() = default;
  virtual std::size_t length() const = 0;
  virtual std::size_t train_end() const = 0;
  virtual std::size_t val_end() const = 0;
  virtual Frame frame(std::size_t n) const = 0;
};

class DatasetAccess : public SampleAccess {
 public:
  DatasetAccess(const Dataset& data, AmpSource amp_source);

  std::size_t length() const override { return data_.size(); }
  std::size_t train_end() const override { return data_.train_end; }
  std::size_t val_end() const override { return data_.val_end; }
  Frame frame(std::size_t n) const override;

 private:
  const Dataset& data_;
  AmpSource amp_source_;
};

// Normalized model inputs for samples [begin, end) of a dataset input.
template <class T>
struct PreparedInput {
  std::vector<T> iq;
  std::vector<T> amp;

  SequenceInput<T> view() const { return {iq, amp}; }
};

template <class T>
PreparedInput<T> prepare_input(const Waveform& input, const NormStats& norm_in, AmpSource amp_source,
                               std::size_t begin, std::size_t end);

// Mean over steps and both components of the squared error.
template <class T>
T mse_loss(std::span<const T> pred, std::span<const T> target);

template <class T>
struct GradientStore {
  ParamLayout layout;
  std::vector<T> values;

  explicit GradientStore(const ModelSpec& spec) : layout(spec), values(layout.total(), T(0)) {}
};

template <class T>
struct LossAndGradient {
  T loss;
  GradientStore<T> grad;
};

// Exact reverse-mode gradient of mse_loss over one window, starting from
// zero recurrent state (treated as constant).
template <class T>
LossAndGradient<T> backward(const NetworkParams<T>& p, SequenceInput<T> x, std::span<const T> target);

// Same, accumulating scale * dLoss/dParams into `grad`. Returns the loss.
template <class T>
T accumulate_gradient(const NetworkParams<T>& p, SequenceInput<T> x, std::span<const T> target, T scale,
                      std::span<T> grad);

template <class T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  long step = 0;
};

template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state, double lr,
               const AdamConfig& cfg = {});

struct EpochRecord {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double lr = 0.0;
};

template <class T>
struct TrainResult {
  NetworkParams<T> params;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 when no epoch ran
  bool diverged = false;
  std::string diagnostics;
};

// Called after every epoch with the current (not best) parameters.
template <class T>
using EpochCallback = std::function<void(int epoch, const NetworkParams<T>& current)>;

template <class T>
TrainResult<T> train(const ModelSpec& spec, const SampleAccess& data, const TrainConfig& cfg,
                     const EpochCallback<T>& on_epoch = {});

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

struct GradCheckOptions {
  double tolerance = 1e-6;
  double step = 1e-5;
  std::size_t window = 8;
  // Fault injection: add this to the analytic gradient at flat index 0 when nonzero.
  double corrupt = 0.0;
};

struct GradCheckReport {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  bool passed = false;
};

// Compares backward() against central differences on a tiny f64 model
// (hidden <= 4, window <= 8) with randomized parameters and data.
GradCheckReport grad_check(const ModelSpec& spec, std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace aclstm
