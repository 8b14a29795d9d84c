#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "bevloc/core/error.hpp"
#include "bevloc/core/grid.hpp"
#include "bevloc/core/parallel.hpp"
#include "bevloc/localizer/encoder.hpp"

namespace bevloc {

/// Valid-mode similarity scores: entry (i, j) compares the template with the
/// tile window whose top-left cell is (i, j) in encoded cells. `origin` and
/// `step` map an index to the map-frame position the template centre would
/// have there: (origin_x + j * step, origin_y + i * step).
struct SimilarityMap {
  Grid2 scores;
  double origin_x = 0.0;
  double origin_y = 0.0;
  double step = 1.0;

  double x_at(double j) const { return origin_x + j * step; }
  double y_at(double i) const { return origin_y + i * step; }
};

enum class MatchMethod { kFft, kDirect };

namespace detail {

inline void check_match_inputs(const FeatureGrid& bev, std::span<const std::uint8_t> mask, const FeatureGrid& tile) {
  require(bev.channels == tile.channels, Errc::kShapeMismatch, "template and tile differ in channel count");
  require(mask.size() == static_cast<std::size_t>(bev.rows) * bev.cols, Errc::kShapeMismatch,
          "template mask does not match the template");
  require(bev.rows > 0 && bev.cols > 0, Errc::kEmptyInput, "template is empty");
  require(bev.rows <= tile.rows && bev.cols <= tile.cols, Errc::kTemplateTooLarge,
          "template is larger than the map tile");
}

inline double cosine(double dot, double bev_energy, double window_energy, double zero_energy) {
  if (!(bev_energy > zero_energy) || !(window_energy > zero_energy)) return 0.0;
  return std::clamp(dot / (std::sqrt(bev_energy) * std::sqrt(window_energy)), -1.0, 1.0);
}

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Smallest n' >= n whose only prime factors are 2, 3, 5 and 7.
inline int fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

/// Real 2D FFT workspace of fixed size; plans are created under the global
/// planner lock, execution is lock-free.
class Fft2 {
 public:
  Fft2(int rows, int cols) : rows_(rows), cols_(cols), half_(cols / 2 + 1) {
    real_ = fftw_alloc_real(static_cast<std::size_t>(rows) * cols);
    spec_ = fftw_alloc_complex(static_cast<std::size_t>(rows) * half_);
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c_2d(rows, cols, real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_2d(rows, cols, spec_, real_, FFTW_ESTIMATE);
  }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;
  ~Fft2() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(inverse_);
    }
    fftw_free(real_);
    fftw_free(spec_);
  }

  std::size_t spectrum_size() const { return static_cast<std::size_t>(rows_) * half_; }

  /// Spectrum of `src` (src_rows x src_cols, row-major) zero-padded.
  std::vector<std::complex<double>> forward(std::span<const double> src, int src_rows, int src_cols) {
    std::fill_n(real_, static_cast<std::size_t>(rows_) * cols_, 0.0);
    for (int r = 0; r < src_rows; ++r)
      std::copy_n(src.data() + static_cast<std::size_t>(r) * src_cols, src_cols,
                  real_ + static_cast<std::size_t>(r) * cols_);
    fftw_execute(forward_);
    std::vector<std::complex<double>> out(spectrum_size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = {spec_[i][0], spec_[i][1]};
    return out;
  }

  /// Unnormalized inverse; the result lives in the workspace until the next call.
  const double* inverse(const std::vector<std::complex<double>>& spectrum) {
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
      spec_[i][0] = spectrum[i].real();
      spec_[i][1] = spectrum[i].imag();
    }
    fftw_execute(inverse_);
    return real_;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

 private:
  int rows_;
  int cols_;
  int half_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace detail

/// Masked cosine similarity of the template `bev` (cells with mask == 0 are
/// ignored) against every valid placement in `tile`:
///
///   score(i, j) = sum_{m} B . T(i + a, j + b) / (|B| |T_window|)
///
/// where sums and norms run over the masked template cells and all channels.
/// Placements where either side has no energy score 0.
inline SimilarityMap match_template(const FeatureGrid& bev, std::span<const std::uint8_t> mask,
                                    const FeatureGrid& tile, MatchMethod method = MatchMethod::kFft,
                                    int threads = 1) {
  detail::check_match_inputs(bev, mask, tile);
  const int out_rows = tile.rows - bev.rows + 1, out_cols = tile.cols - bev.cols + 1;
  const int channels = bev.channels;
  SimilarityMap out;
  out.scores = Grid2(out_rows, out_cols, 0.0);

  std::vector<double> masked(bev.data.size());
  double bev_energy = 0.0;
  for (int k = 0; k < channels; ++k)
    for (int r = 0; r < bev.rows; ++r)
      for (int c = 0; c < bev.cols; ++c) {
        const double v = mask[static_cast<std::size_t>(r) * bev.cols + c] ? bev.at(k, r, c) : 0.0;
        masked[bev.index(k, r, c)] = v;
        bev_energy += v * v;
      }
  double tile_energy = 0.0;
  for (double v : tile.data) tile_energy += v * v;
  // Relative floor separating "no energy" from FFT round-off.
  const double zero_energy = 1e-9 * std::max(tile_energy, 1.0);

  if (method == MatchMethod::kDirect) {
    parallel_for(0, static_cast<std::size_t>(out_rows), threads, [&](std::size_t row) {
      const int i = static_cast<int>(row);
      for (int j = 0; j < out_cols; ++j) {
        double dot = 0.0, window = 0.0;
        for (int k = 0; k < channels; ++k)
          for (int a = 0; a < bev.rows; ++a)
            for (int b = 0; b < bev.cols; ++b) {
              if (!mask[static_cast<std::size_t>(a) * bev.cols + b]) continue;
              const double t = tile.at(k, i + a, j + b);
              dot += masked[bev.index(k, a, b)] * t;
              window += t * t;
            }
        out.scores(i, j) = detail::cosine(dot, bev_energy, window, zero_energy);
      }
    });
    return out;
  }

  // Circular correlation on a padded grid equals the valid-mode correlation
  // for every placement that does not wrap.
  detail::Fft2 fft(detail::fft_size(tile.rows), detail::fft_size(tile.cols));
  const std::size_t n_spec = fft.spectrum_size();
  std::vector<std::complex<double>> dot_spec(n_spec, 0.0), energy_spec;
  std::vector<double> tile_sq(static_cast<std::size_t>(tile.rows) * tile.cols, 0.0);
  std::vector<double> mask_d(mask.begin(), mask.end());
  for (int k = 0; k < channels; ++k) {
    const auto t_plane = tile.plane(k);
    for (std::size_t i = 0; i < t_plane.size(); ++i) tile_sq[i] += t_plane[i] * t_plane[i];
    const auto ft = fft.forward(t_plane, tile.rows, tile.cols);
    const auto fb = fft.forward(std::span<const double>(masked).subspan(bev.index(k, 0, 0), bev.plane(k).size()),
                                bev.rows, bev.cols);
    for (std::size_t i = 0; i < n_spec; ++i) dot_spec[i] += std::conj(fb[i]) * ft[i];
  }
  {
    const auto ft = fft.forward(tile_sq, tile.rows, tile.cols);
    const auto fm = fft.forward(mask_d, bev.rows, bev.cols);
    energy_spec.resize(n_spec);
    for (std::size_t i = 0; i < n_spec; ++i) energy_spec[i] = std::conj(fm[i]) * ft[i];
  }
  const double norm = 1.0 / (static_cast<double>(fft.rows()) * fft.cols());
  Grid2 dots(out_rows, out_cols);
  {
    const double* d = fft.inverse(dot_spec);
    for (int i = 0; i < out_rows; ++i)
      for (int j = 0; j < out_cols; ++j) dots(i, j) = d[static_cast<std::size_t>(i) * fft.cols() + j] * norm;
  }
  const double* e = fft.inverse(energy_spec);
  for (int i = 0; i < out_rows; ++i)
    for (int j = 0; j < out_cols; ++j) {
      const double window = e[static_cast<std::size_t>(i) * fft.cols() + j] * norm;
      out.scores(i, j) = detail::cosine(dots(i, j), bev_energy, window, zero_energy);
    }
  return out;
}

/// Probability map produced by softmax2d.
struct ProbabilityMap {
  Grid2 p;
  double tau = 1.0;
};

/// exp(M / tau) / sum exp(M / tau), evaluated after subtracting the maximum.
inline ProbabilityMap softmax2d(const Grid2& m, double tau) {
  require(tau > 0 && std::isfinite(tau), Errc::kInvalidArgument, "softmax temperature must be positive");
  require(m.size() > 0, Errc::kEmptyInput, "softmax of an empty map");
  ProbabilityMap out{Grid2(m.rows(), m.cols()), tau};
  const double top = *std::max_element(m.data().begin(), m.data().end());
  double sum = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    out.p.data()[i] = std::exp((m.data()[i] - top) / tau);
    sum += out.p.data()[i];
  }
  for (double& v : out.p.data()) v /= sum;
  return out;
}

/// W_ij = (i, j).
struct CoordinateWeights {
  Grid2 i;
  Grid2 j;
};

inline CoordinateWeights coordinate_weights(int rows, int cols) {
  CoordinateWeights w{Grid2(rows, cols), Grid2(rows, cols)};
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      w.i(r, c) = r;
      w.j(r, c) = c;
    }
  return w;
}

struct MapIndex {
  double i = 0.0;
  double j = 0.0;
};

/// sum_ij W_ij * p_ij: the probability-weighted mean index.
inline MapIndex soft_argmax(const Grid2& p) {
  require(p.size() > 0, Errc::kEmptyInput, "soft-argmax of an empty map");
  MapIndex out;
  for (int r = 0; r < p.rows(); ++r)
    for (int c = 0; c < p.cols(); ++c) {
      out.i += r * p(r, c);
      out.j += c * p(r, c);
    }
  return out;
}

/// Index of the largest entry (first in row-major order on ties).
inline std::pair<int, int> argmax(const Grid2& m) {
  require(m.size() > 0, Errc::kEmptyInput, "argmax of an empty map");
  const auto it = std::max_element(m.data().begin(), m.data().end());
  const auto idx = static_cast<int>(it - m.data().begin());
  return {idx / m.cols(), idx % m.cols()};
}

}  // namespace bevloc
