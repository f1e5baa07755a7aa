#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <vector>

#include "aclstm/signal.hpp"

namespace aclstm {

// Wiener-Hammerstein device: FIR -> Saleh AM/AM + AM/PM -> FIR, plus an
// additive complex Gaussian noise floor relative to the clean output power.
struct SynthDutSpec {
  std::vector<Complex> pre_fir{{1.0, 0.0}, {0.10, -0.05}, {0.0, 0.02}};
  double saleh_alpha_a = 2.0;
  double saleh_beta_a = 1.0;
  double saleh_alpha_p = std::numbers::pi / 3.0;
  double saleh_beta_p = 1.0;
  std::vector<Complex> post_fir{{1.0, 0.0}, {-0.08, 0.03}};
  // dBc; -infinity disables noise.
  double noise_dbc = -80.0;

  void validate() const;
};

// Static Saleh nonlinearity applied to one sample.
Complex saleh(const SynthDutSpec& spec, Complex x);

// Causal and deterministic for a given seed (noise uses the "noise" stream).
Waveform synth_dut_forward(const SynthDutSpec& spec, const Waveform& x, std::uint64_t seed);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

// Paired waveforms with contiguous train/val/test blocks:
// train = [0, train_end), val = [train_end, val_end), test = [val_end, size).
// Normalization statistics come from the train block only.
struct Dataset {
  Waveform input;
  Waveform output;
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  NormStats norm_in;
  NormStats norm_out;

  std::size_t size() const { return input.size(); }
};

Dataset make_dataset(Waveform x, Waveform y, const SplitFractions& fractions = {});
Dataset ingest_dataset(const std::filesystem::path& path_in, const std::filesystem::path& path_out);

// `dataset.meta` manifest: key=value lines.
struct DatasetManifest {
  std::filesystem::path input;
  std::filesystem::path output;
  std::filesystem::path plan;  // empty when no plan is attached
  std::size_t length = 0;
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  NormStats norm_in;
  NormStats norm_out;
};

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);
// Loads both waveforms from a manifest and re-applies its recorded split.
Dataset load_dataset(const DatasetManifest& manifest);

}  // namespace aclstm
