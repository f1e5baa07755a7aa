#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "aclstm/nn.hpp"
#include "aclstm/poly.hpp"
#include "aclstm/signal.hpp"
#include "aclstm/train.hpp"

namespace aclstm {

struct NamedArray {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
};

// "ACW1" container: a text header of key=value lines terminated by "end",
// then for each array: u32 name length, name bytes, u64 rows, u64 cols and
// rows*cols little-endian scalars of the header's precision.
struct WeightFile {
  std::vector<std::pair<std::string, std::string>> header;
  Precision precision = Precision::f64;
  std::vector<NamedArray> arrays;

  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
};

void write_acw(const std::filesystem::path& path, const WeightFile& file);
WeightFile read_acw(const std::filesystem::path& path);

template <class T>
WeightFile network_weights(const NetworkParams<T>& p, const NormStats& norm_in, const NormStats& norm_out,
                           std::uint64_t seed);
ModelSpec model_spec_from_header(const WeightFile& file);
// Validates every array name and shape against the layout implied by the header.
template <class T>
NetworkParams<T> network_from_weights(const WeightFile& file);

WeightFile poly_weights(const MpSpec& spec, const ComplexVector& coeffs, bool generalized);
MpSpec poly_spec_from_header(const WeightFile& file);
ComplexVector poly_coeffs_from_weights(const WeightFile& file);

NormStats parse_norm_stats(const std::string& text);
std::string format_norm_stats(const NormStats& stats);
// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

}  // namespace aclstm
