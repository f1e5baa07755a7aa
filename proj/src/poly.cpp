#include "aclstm/poly.hpp"

#include <algorithm>
#include <cmath>

#include "aclstm/error.hpp"

namespace aclstm {

std::vector<int> MpSpec::orders() const {
  std::vector<int> out;
  for (int k = 1; k <= order; ++k)
    if (!odd_only || k % 2 == 1) out.push_back(k);
  return out;
}

std::size_t MpSpec::coefficient_count() const {
  return static_cast<std::size_t>(memory_depth + 1) * orders().size() +
         lags.size() * static_cast<std::size_t>(cross_memory_depth + 1) * cross_orders.size();
}

int MpSpec::max_lag() const {
  int lag = memory_depth;
  for (int l : lags)
    if (l > 0) lag = std::max(lag, cross_memory_depth + l);
  return std::max(lag, lags.empty() ? 0 : cross_memory_depth);
}

int MpSpec::max_lead() const {
  int lead = 0;
  for (int l : lags)
    if (l < 0) lead = std::max(lead, -l);
  return lead;
}

void MpSpec::validate() const {
  if (memory_depth < 0) throw ConfigError("mp: memory depth must be >= 0");
  if (order < 1) throw ConfigError("mp: nonlinearity order must be >= 1");
  if (cross_memory_depth < 0) throw ConfigError("gmp: cross memory depth must be >= 0");
  for (int l : lags)
    if (l == 0) throw ConfigError("gmp: cross-term lag must be nonzero");
  for (int k : cross_orders)
    if (k < 2) throw ConfigError("gmp: cross-term orders must be >= 2");
  if (!lags.empty() && cross_orders.empty()) throw ConfigError("gmp: lags given without cross orders");
}

MpSpec MpSpec::gmp_default() {
  MpSpec s = mp(4, 9);
  s.lags = {1, 2, -1};
  s.cross_memory_depth = 1;
  s.cross_orders = {3, 5, 7};
  return s;
}

ComplexMatrix mp_basis(std::span<const Complex> x, const MpSpec& spec) {
  spec.validate();
  const auto len = static_cast<long>(x.size());
  if (len <= spec.memory_depth) throw ConfigError("mp: sequence must be longer than the memory depth");
  const auto orders = spec.orders();
  ComplexMatrix phi(len, static_cast<long>(spec.coefficient_count()));
  std::vector<double> mag(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) mag[n] = std::abs(x[n]);
  auto sample = [&](long idx) { return idx >= 0 && idx < len ? x[static_cast<std::size_t>(idx)] : Complex{}; };
  auto envelope = [&](long idx) { return idx >= 0 && idx < len ? mag[static_cast<std::size_t>(idx)] : 0.0; };

  for (long n = 0; n < len; ++n) {
    long col = 0;
    for (int m = 0; m <= spec.memory_depth; ++m) {
      const Complex s = sample(n - m);
      const double r = envelope(n - m);
      for (int k : orders) phi(n, col++) = s * std::pow(r, k - 1);
    }
    for (int lag : spec.lags) {
      for (int m = 0; m <= spec.cross_memory_depth; ++m) {
        const Complex s = sample(n - m);
        const double r = envelope(n - m - lag);
        for (int k : spec.cross_orders) phi(n, col++) = s * std::pow(r, k - 1);
      }
    }
  }
  return phi;
}

MpFit mp_fit(std::span<const Complex> x, std::span<const Complex> y, const MpSpec& spec, std::size_t row_begin,
             std::size_t row_end) {
  if (x.size() != y.size()) throw ConfigError("mp_fit: input and output lengths differ");
  const ComplexMatrix phi = mp_basis(x, spec);
  row_end = std::min(row_end, x.size());
  if (!spec.zero_pad) {
    row_begin = std::max(row_begin, static_cast<std::size_t>(spec.max_lag()));
    row_end = std::min(row_end, x.size() - static_cast<std::size_t>(spec.max_lead()));
  }
  if (row_begin >= row_end) throw ConfigError("mp_fit: empty row range");
  const auto rows = static_cast<long>(row_end - row_begin);
  const auto a = phi.middleRows(static_cast<long>(row_begin), rows);
  ComplexVector b(rows);
  for (long r = 0; r < rows; ++r) b(r) = y[row_begin + static_cast<std::size_t>(r)];

  Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(a);
  MpFit fit;
  fit.coeffs = cod.solve(b);
  fit.rank = static_cast<std::size_t>(cod.rank());
  fit.rank_deficient = fit.rank < static_cast<std::size_t>(a.cols());
  const double err = (a * fit.coeffs - b).squaredNorm();
  const double ref = b.squaredNorm();
  if (ref == 0.0) throw DomainError("mp_fit: zero-energy target");
  fit.residual_nmse_db = err > 0.0 ? std::max(10.0 * std::log10(err / ref), -200.0) : -200.0;
  return fit;
}

std::vector<Complex> mp_predict(std::span<const Complex> x, const MpSpec& spec, const ComplexVector& coeffs) {
  if (static_cast<std::size_t>(coeffs.size()) != spec.coefficient_count())
    throw ConfigError("mp_predict: coefficient count does not match the spec");
  const ComplexVector y = mp_basis(x, spec) * coeffs;
  return {y.data(), y.data() + y.size()};
}

}  // namespace aclstm
