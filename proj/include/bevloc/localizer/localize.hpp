#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevloc/bev_projection.hpp"
#include "bevloc/core/error.hpp"
#include "bevloc/core/random.hpp"
#include "bevloc/geometry.hpp"
#include "bevloc/localizer/encoder.hpp"
#include "bevloc/localizer/matching.hpp"
#include "bevloc/semantic_map.hpp"

namespace bevloc {

struct LocalizerConfig {
  std::string encoder = "identity";
  int stride = 1;
  double tau = 0.002;
  double r_max = 100.0;
  double tile_side = 300.0;
  double tile_resolution = 0.3;
  double template_side = 100.0;  ///< map-aligned template window around the ego
  bool rotation_sweep = false;
  double sweep_range_deg = 3.0;
  double sweep_step_deg = 1.0;

  EncoderSpec encoder_spec() const {
    EncoderSpec e;
    e.name = encoder;
    e.stride = stride;
    e.resolution = tile_resolution;
    return e;
  }

  void validate() const {
    encoder_spec().validate();
    require(tau > 0 && std::isfinite(tau), Errc::kInvalidSpec, "tau must be positive");
    require(r_max >= 0, Errc::kInvalidSpec, "r_max must be non-negative");
    require(tile_side > 0 && tile_resolution > 0, Errc::kInvalidSpec, "tile side and resolution must be positive");
    require(template_side > 0, Errc::kInvalidSpec, "template side must be positive");
    require(template_side <= tile_side, Errc::kTemplateTooLarge, "BEV template is larger than the map tile");
    require(!rotation_sweep || (sweep_range_deg >= 0 && sweep_step_deg > 0), Errc::kInvalidSpec,
            "invalid rotation sweep");
  }
};

inline nlohmann::json localizer_config_to_json(const LocalizerConfig& c) {
  return {{"encoder", c.encoder},
          {"stride", c.stride},
          {"tau", c.tau},
          {"r_max", c.r_max},
          {"tile_side", c.tile_side},
          {"tile_resolution", c.tile_resolution},
          {"template_side", c.template_side},
          {"rotation_sweep", c.rotation_sweep},
          {"sweep_range_deg", c.sweep_range_deg},
          {"sweep_step_deg", c.sweep_step_deg}};
}

inline LocalizerConfig localizer_config_from_json(const nlohmann::json& j, LocalizerConfig c = {}) {
  require(j.is_object(), Errc::kInvalidSpec, "localizer config must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "encoder") c.encoder = v.get<std::string>();
      else if (key == "stride") c.stride = v.get<int>();
      else if (key == "tau") c.tau = v.get<double>();
      else if (key == "r_max") c.r_max = v.get<double>();
      else if (key == "tile_side") c.tile_side = v.get<double>();
      else if (key == "tile_resolution") c.tile_resolution = v.get<double>();
      else if (key == "template_side") c.template_side = v.get<double>();
      else if (key == "rotation_sweep") c.rotation_sweep = v.get<bool>();
      else if (key == "sweep_range_deg") c.sweep_range_deg = v.get<double>();
      else if (key == "sweep_step_deg") c.sweep_step_deg = v.get<double>();
      else fail(Errc::kInvalidSpec, "unknown localizer key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kInvalidSpec, std::string("malformed localizer config: ") + e.what());
  }
  return c;
}

/// Coarse prior: offset direction uniform on the circle, radius uniform on
/// [0, r_max]; heading unchanged.
inline EgoPose perturb(const EgoPose& pose, Rng& rng, double r_max = 100.0) {
  require(r_max >= 0, Errc::kInvalidArgument, "r_max must be non-negative");
  const double r = rng.uniform(0.0, r_max);
  const double theta = rng.angle();
  return {pose.x + r * std::cos(theta), pose.y + r * std::sin(theta), pose.yaw};
}

/// BEV resampled onto a map-aligned square around the ego: template cell
/// (a, b) sits at map-frame offset ((b - (T-1)/2) * res, (a - (T-1)/2) * res)
/// from the ego position. Bilinear over observed cells; a cell is valid when
/// at least half of its bilinear weight falls on observed BEV cells.
struct BevTemplate {
  FeatureGrid features;
  std::vector<std::uint8_t> mask;
};

inline BevTemplate map_aligned_template(const BevGrid& bev, double heading, int cells, double resolution) {
  require(bev.size() > 0, Errc::kEmptyInput, "BEV is empty");
  const auto& g = bev.scores.geometry();
  const int channels = bev.channels();
  BevTemplate t{FeatureGrid(cells, cells, channels), std::vector<std::uint8_t>(static_cast<std::size_t>(cells) * cells)};
  const double c = std::cos(heading), s = std::sin(heading);
  const double half = (cells - 1) / 2.0;
  std::vector<double> acc(channels);
  for (int a = 0; a < cells; ++a)
    for (int b = 0; b < cells; ++b) {
      const double dx = (b - half) * resolution, dy = (a - half) * resolution;
      // Map-frame offset into the ego frame (rotate by -heading).
      const double ex = c * dx + s * dy, ey = -s * dx + c * dy;
      const double u = (ex - g.origin_x) / g.resolution, v = (ey - g.origin_y) / g.resolution;
      const int c0 = static_cast<int>(std::floor(u)), r0 = static_cast<int>(std::floor(v));
      const double fu = u - c0, fv = v - r0;
      double wsum = 0.0;
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int dr = 0; dr <= 1; ++dr)
        for (int dc = 0; dc <= 1; ++dc) {
          const int r = r0 + dr, col = c0 + dc;
          if (r < 0 || col < 0 || r >= g.height || col >= g.width || !bev.observed(r, col)) continue;
          const double w = (dr ? fv : 1 - fv) * (dc ? fu : 1 - fu);
          if (w <= 0.0) continue;
          wsum += w;
          for (int k = 0; k < channels; ++k) acc[k] += w * bev.scores.at(k, r, col);
        }
      if (wsum < 0.5) continue;
      t.mask[static_cast<std::size_t>(a) * cells + b] = 1;
      for (int k = 0; k < channels; ++k) t.features.at(k, a, b) = acc[k] / wsum;
    }
  return t;
}

struct LocalizationResult {
  EgoPose estimate;               ///< soft-argmax position, prior (or swept) heading
  MapIndex peak;                  ///< continuous soft-argmax index
  int argmax_i = 0;
  int argmax_j = 0;
  Vec2 argmax_position = Vec2::Zero();
  double peak_probability = 0.0;  ///< largest entry of the probability map
  double peak_score = 0.0;        ///< similarity at the integer argmax
  SimilarityMap similarity;
  ProbabilityMap probability;
};

namespace detail {

inline LocalizationResult localize_at_heading(const BevGrid& bev, const MapTile& tile, double heading,
                                              const LocalizerConfig& cfg, int threads) {
  const double res = tile.window.resolution;
  const int cells = tile_cells(cfg.template_side, res);
  require(cells <= tile.side(), Errc::kTemplateTooLarge, "BEV template is larger than the map tile");
  const BevTemplate tmpl = map_aligned_template(bev, heading, cells, res);

  const EncoderSpec enc = cfg.encoder_spec();
  const FeatureGrid bev_f = encode(tmpl.features, enc);
  const auto mask_f = encode_mask(tmpl.mask, cells, cells, enc.stride);
  const FeatureGrid tile_f = encode(to_features(tile.raster), enc);

  LocalizationResult out;
  out.similarity = match_template(bev_f, mask_f, tile_f, MatchMethod::kFft, threads);
  // Placement (i, j) puts template cell (0, 0) on tile cell (s*i, s*j); the
  // ego sits at the template centre.
  const double s = enc.stride;
  const double half = (cells - 1) / 2.0;
  out.similarity.origin_x = (static_cast<double>(tile.window.first_col) + half) * res;
  out.similarity.origin_y = (static_cast<double>(tile.window.first_row) + half) * res;
  out.similarity.step = s * res;

  out.probability = softmax2d(out.similarity.scores, cfg.tau);
  out.peak = soft_argmax(out.probability.p);
  std::tie(out.argmax_i, out.argmax_j) = argmax(out.similarity.scores);
  out.peak_score = out.similarity.scores(out.argmax_i, out.argmax_j);
  out.peak_probability = *std::max_element(out.probability.p.data().begin(), out.probability.p.data().end());
  out.argmax_position = {out.similarity.x_at(out.argmax_j), out.similarity.y_at(out.argmax_i)};
  out.estimate = {out.similarity.x_at(out.peak.j), out.similarity.y_at(out.peak.i), heading};
  return out;
}

}  // namespace detail

/// Relocalizes an ego-frame BEV against a tile cropped around `prior`.
inline LocalizationResult localize(const BevGrid& bev, const MapTile& tile, const EgoPose& prior,
                                   const LocalizerConfig& cfg, int threads = 1) {
  cfg.validate();
  require(std::isfinite(prior.yaw), Errc::kMissingHeading, "prior heading is required");
  if (!cfg.rotation_sweep) return detail::localize_at_heading(bev, tile, prior.yaw, cfg, threads);

  std::optional<LocalizationResult> best;
  const int steps = static_cast<int>(std::floor(cfg.sweep_range_deg / cfg.sweep_step_deg + 1e-9));
  for (int k = -steps; k <= steps; ++k) {
    const double heading = prior.yaw + deg2rad(k * cfg.sweep_step_deg);
    auto r = detail::localize_at_heading(bev, tile, heading, cfg, threads);
    if (!best || r.peak_score > best->peak_score) best = std::move(r);
  }
  return *best;
}

inline LocalizationResult localize(const BevGrid& bev, const SemanticMap& map, const EgoPose& prior,
                                   const LocalizerConfig& cfg, int threads = 1) {
  cfg.validate();
  require(std::isfinite(prior.yaw), Errc::kMissingHeading, "prior heading is required");
  const MapTile tile = crop_tile(map, prior, cfg.tile_side, cfg.tile_resolution, threads);
  return localize(bev, tile, prior, cfg, threads);
}

/// Probability map as 16-bit PGM samples, row 0 at the bottom (+y up),
/// max-normalized.
inline std::vector<std::uint16_t> probability_pgm(const Grid2& p) {
  const double top = *std::max_element(p.data().begin(), p.data().end());
  std::vector<std::uint16_t> px(p.size());
  for (int r = 0; r < p.rows(); ++r)
    for (int c = 0; c < p.cols(); ++c) {
      const double v = top > 0 ? p(r, c) / top : 0.0;
      px[static_cast<std::size_t>(p.rows() - 1 - r) * p.cols() + c] =
          static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
    }
  return px;
}

}  // namespace bevloc
