#pragma once

#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "sqkd/grid.hpp"

namespace sqkd {

using cdouble = std::complex<double>;

/// Unitary continuous-normalized transform evaluated by FFT:
///   out(r_m) = step/sqrt(2 pi) * sum_j in(x_j) exp(+i x_j r_m)
/// with r on from.reciprocal(). Preserves sum |.|^2 * step (Parseval).
class CenteredDft {
 public:
  explicit CenteredDft(const Grid1D& from) : from_(from), to_(from.reciprocal()) {
    const std::size_t n = from.size();
    pre_.resize(n);
    post_.resize(n);
    const double x0 = from.min();
    const double r0 = to_.min();
    const double scale = from.step() / std::sqrt(2.0 * std::numbers::pi) * static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) {
      pre_[j] = std::polar(1.0, static_cast<double>(j) * from.step() * r0);
      post_[j] = scale * std::polar(1.0, x0 * r0 + x0 * static_cast<double>(j) * to_.step());
    }
  }

  const Grid1D& input_grid() const { return from_; }
  const Grid1D& output_grid() const { return to_; }

  std::vector<cdouble> operator()(std::span<const cdouble> in) const {
    const std::size_t n = from_.size();
    std::vector<cdouble> work(n), out(n);
    for (std::size_t j = 0; j < n; ++j) work[j] = in[j] * pre_[j];
    Eigen::FFT<double> fft;
    fft.inv(out, work);  // (1/N) sum_j work_j exp(+2 pi i j m / N)
    for (std::size_t m = 0; m < n; ++m) out[m] *= post_[m];
    return out;
  }

 private:
  Grid1D from_;
  Grid1D to_;
  std::vector<cdouble> pre_;
  std::vector<cdouble> post_;
};

/// Applies the centered transform along both axes of a signal x idler matrix.
inline Eigen::MatrixXcd centered_dft_2d(const Eigen::MatrixXcd& values, const Grid1D& signal,
                                        const Grid1D& idler) {
  const CenteredDft along_signal(signal);
  const CenteredDft along_idler(idler);
  Eigen::MatrixXcd out(values.rows(), values.cols());
  std::vector<cdouble> line;
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    line.assign(values.col(c).data(), values.col(c).data() + values.rows());
    const auto t = along_signal(line);
    for (Eigen::Index r = 0; r < values.rows(); ++r) out(r, c) = t[static_cast<std::size_t>(r)];
  }
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    line.resize(static_cast<std::size_t>(values.cols()));
    for (Eigen::Index c = 0; c < values.cols(); ++c) line[static_cast<std::size_t>(c)] = out(r, c);
    const auto t = along_idler(line);
    for (Eigen::Index c = 0; c < values.cols(); ++c) out(r, c) = t[static_cast<std::size_t>(c)];
  }
  return out;
}

}  // namespace sqkd
