#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "aclstm/signal.hpp"

namespace aclstm {

// Memory polynomial (MP) with optional generalized (GMP) cross terms.
//
// Main branch column (m, k), m = 0..M, k in orders():  x[n-m] |x[n-m]|^(k-1).
// Cross branch column (lag, m, k), k in cross_orders: x[n-m] |x[n-m-lag]|^(k-1)
// where lag > 0 is lagging envelope and lag < 0 leading envelope.
struct MpSpec {
  int memory_depth = 4;
  int order = 9;
  bool odd_only = false;
  // Zero history before the first sample (and after the last sample for
  // leading terms). When false, the first rows are dropped by mp_fit.
  bool zero_pad = true;

  std::vector<int> lags;  // signed; empty for a plain MP
  int cross_memory_depth = 0;
  std::vector<int> cross_orders;

  std::vector<int> orders() const;
  std::size_t coefficient_count() const;
  // Largest look-back and look-ahead in samples.
  int max_lag() const;
  int max_lead() const;
  void validate() const;

  static MpSpec mp(int memory_depth, int order) {
    MpSpec s;
    s.memory_depth = memory_depth;
    s.order = order;
    return s;
  }
  // 45 main-branch columns (M=4, K=1..9) plus 18 cross columns: lags {+1, +2, -1},
  // cross taps m = 0..1, cross orders {3, 5, 7}. 63 coefficients total.
  static MpSpec gmp_default();
};

using ComplexMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic>;
using ComplexVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1>;

// Rows n = 0..len-1 of the basis.
ComplexMatrix mp_basis(std::span<const Complex> x, const MpSpec& spec);

struct MpFit {
  ComplexVector coeffs;
  double residual_nmse_db = 0.0;
  std::size_t rank = 0;
  bool rank_deficient = false;
};

// Least squares via column-pivoted complete orthogonal decomposition; rank
// deficient problems get the minimum-norm solution and the flag set.
// Only rows [row_begin, row_end) of the basis enter the fit.
MpFit mp_fit(std::span<const Complex> x, std::span<const Complex> y, const MpSpec& spec,
             std::size_t row_begin = 0, std::size_t row_end = static_cast<std::size_t>(-1));

std::vector<Complex> mp_predict(std::span<const Complex> x, const MpSpec& spec, const ComplexVector& coeffs);

}  // namespace aclstm
