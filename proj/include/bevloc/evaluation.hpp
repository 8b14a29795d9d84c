#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bevloc/bev_projection.hpp"
#include "bevloc/core/error.hpp"
#include "bevloc/core/parallel.hpp"
#include "bevloc/core/random.hpp"
#include "bevloc/localizer/localize.hpp"
#include "bevloc/rig_io.hpp"
#include "bevloc/synthworld/generate.hpp"
#include "bevloc/synthworld/render.hpp"

namespace bevloc {

// ---------------------------------------------------------------------------
// IoU
// ---------------------------------------------------------------------------

enum class MaskPolicy { kObserved, kFull };

inline std::string to_string(MaskPolicy p) { return p == MaskPolicy::kObserved ? "observed" : "full"; }

inline MaskPolicy mask_policy_from_string(const std::string& s) {
  if (s == "observed") return MaskPolicy::kObserved;
  if (s == "full") return MaskPolicy::kFull;
  fail(Errc::kInvalidSpec, "unknown mask policy '" + s + "' (expected observed or full)");
}

struct IoUEntry {
  std::string category;
  long long intersection = 0;
  long long union_ = 0;
  std::optional<double> iou;  ///< undefined when the union is empty
};

/// Intersection over union of one channel after binarizing both grids at
/// `threshold` (score >= threshold). Under kObserved only cells observed in
/// `pred` count.
inline IoUEntry iou(const BevGrid& pred, const BevGrid& gt, int channel, MaskPolicy policy = MaskPolicy::kObserved,
                    double threshold = 0.5) {
  require(pred.size() == gt.size() && pred.channels() == gt.channels(), Errc::kShapeMismatch,
          "IoU inputs differ in shape");
  require(channel >= 0 && channel < pred.channels(), Errc::kInvalidArgument, "IoU channel out of range");
  IoUEntry e;
  const int s = pred.size();
  for (int r = 0; r < s; ++r)
    for (int c = 0; c < s; ++c) {
      if (policy == MaskPolicy::kObserved && !pred.observed(r, c)) continue;
      const bool a = pred.scores.at(channel, r, c) >= threshold;
      const bool b = gt.scores.at(channel, r, c) >= threshold;
      e.intersection += a && b;
      e.union_ += a || b;
    }
  if (e.union_ > 0) e.iou = static_cast<double>(e.intersection) / static_cast<double>(e.union_);
  return e;
}

struct IoUReport {
  MaskPolicy policy = MaskPolicy::kObserved;
  std::vector<std::string> categories;
  std::vector<double> mean_iou;  ///< NaN where no scene had a defined IoU
  std::vector<int> defined;      ///< scenes contributing to each mean
};

// ---------------------------------------------------------------------------
// Recall
// ---------------------------------------------------------------------------

inline std::vector<double> default_recall_thresholds() { return {1.0, 2.0, 5.0, 10.0}; }

struct RecallReport {
  std::vector<double> thresholds;
  std::vector<double> recall;
  std::size_t samples = 0;
  std::size_t failures = 0;        ///< non-finite errors, counted as misses
  std::vector<double> quantile_levels = {0.25, 0.5, 0.75, 0.9};
  std::vector<double> quantiles;   ///< may be +inf when failures dominate
};

/// Nearest-rank quantile of sorted values.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const auto n = sorted.size();
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  return sorted[std::clamp<std::size_t>(rank, 1, n) - 1];
}

/// Fraction of errors <= each threshold. Non-finite errors are failures:
/// kept in the denominator and never counted as hits.
inline RecallReport recall_accuracy(std::span<const double> errors,
                                    std::vector<double> thresholds = default_recall_thresholds()) {
  require(!errors.empty(), Errc::kEmptyInput, "recall of an empty error list");
  for (double e : errors) require(!(e < 0), Errc::kInvalidArgument, "errors must be non-negative");
  std::sort(thresholds.begin(), thresholds.end());
  RecallReport out;
  out.thresholds = thresholds;
  out.samples = errors.size();
  std::vector<double> sorted(errors.begin(), errors.end());
  for (double& e : sorted)
    if (!std::isfinite(e)) {
      e = std::numeric_limits<double>::infinity();
      ++out.failures;
    }
  std::sort(sorted.begin(), sorted.end());
  for (double t : thresholds) {
    const auto hits = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
    out.recall.push_back(static_cast<double>(hits) / static_cast<double>(sorted.size()));
  }
  for (double q : out.quantile_levels) out.quantiles.push_back(quantile_sorted(sorted, q));
  return out;
}

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int trials = 100;
  WorldSpec world;  ///< per-trial seed overrides world.seed
  BevSpec bev;
  LocalizerConfig localizer;
  std::string bev_source = "oracle";  ///< "oracle" or "projected"
  double pose_margin = 250.0;         ///< keep the ego this far inside the world edge
  MaskPolicy iou_mask = MaskPolicy::kObserved;
  double binarize_threshold = 0.5;
  bool record_wall_time = false;  ///< wall_ms breaks byte-identical CSVs, so off by default
  std::optional<CameraRig> rig;   ///< default_rig() when unset

  CameraRig effective_rig() const { return rig ? *rig : default_rig(); }

  void validate() const {
    require(trials >= 1, Errc::kInvalidSpec, "trials must be >= 1");
    world.validate();
    bev.validate();
    localizer.validate();
    require(bev_source == "oracle" || bev_source == "projected", Errc::kInvalidSpec,
            "bev_source must be oracle or projected");
    require(pose_margin >= 0, Errc::kInvalidSpec, "pose_margin must be non-negative");
    require(binarize_threshold > 0 && binarize_threshold < 1, Errc::kInvalidSpec,
            "binarize_threshold must lie in (0, 1)");
    effective_rig().validate();
  }
};

inline nlohmann::json bev_spec_to_json(const BevSpec& s) {
  return {{"side", s.side}, {"resolution", s.resolution}, {"bins", s.bins}};
}

inline BevSpec bev_spec_from_json(const nlohmann::json& j, BevSpec s = {}) {
  require(j.is_object(), Errc::kInvalidSpec, "BEV spec must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "side") s.side = v.get<double>();
      else if (key == "resolution") s.resolution = v.get<double>();
      else if (key == "bins") s.bins = v.get<std::vector<double>>();
      else fail(Errc::kInvalidSpec, "unknown BEV key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kInvalidSpec, std::string("malformed BEV spec: ") + e.what());
  }
  return s;
}

inline nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  nlohmann::json j = {{"seed", c.seed},
                      {"trials", c.trials},
                      {"world", spec_to_json(c.world)},
                      {"bev", bev_spec_to_json(c.bev)},
                      {"localizer", localizer_config_to_json(c.localizer)},
                      {"bev_source", c.bev_source},
                      {"pose_margin", c.pose_margin},
                      {"iou_mask", to_string(c.iou_mask)},
                      {"binarize_threshold", c.binarize_threshold},
                      {"record_wall_time", c.record_wall_time}};
  if (c.rig) j["rig"] = rig_to_json(*c.rig);
  return j;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
  require(j.is_object(), Errc::kInvalidSpec, "experiment config must be an object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "trials") c.trials = v.get<int>();
      else if (key == "world") c.world = spec_from_json(v, c.world);
      else if (key == "bev") c.bev = bev_spec_from_json(v, c.bev);
      else if (key == "localizer") c.localizer = localizer_config_from_json(v, c.localizer);
      else if (key == "bev_source") c.bev_source = v.get<std::string>();
      else if (key == "pose_margin") c.pose_margin = v.get<double>();
      else if (key == "iou_mask") c.iou_mask = mask_policy_from_string(v.get<std::string>());
      else if (key == "binarize_threshold") c.binarize_threshold = v.get<double>();
      else if (key == "record_wall_time") c.record_wall_time = v.get<bool>();
      else if (key == "rig") c.rig = rig_from_json(v);
      else fail(Errc::kInvalidSpec, "unknown experiment key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kInvalidSpec, std::string("malformed experiment config: ") + e.what());
  }
  return c;
}

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  EgoPose truth;
  EgoPose prior;
  Vec2 estimate = Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  double error_m = std::numeric_limits<double>::infinity();
  double peak_probability = 0.0;
  double wall_ms = 0.0;
  std::vector<std::optional<double>> iou;  ///< per category, projected BEV only
  std::string failure;                     ///< empty on success
};

struct ExperimentResult {
  std::vector<TrialRecord> trials;
  RecallReport recall;
  IoUReport iou;
  std::vector<std::string> categories;
};

/// Per-stage wall times of one trial, in milliseconds.
struct StageTimes {
  double world_ms = 0.0;
  double render_ms = 0.0;
  double projection_ms = 0.0;
  double tile_ms = 0.0;
  double matching_ms = 0.0;
  double total_ms = 0.0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace detail

/// One-hot label features and height distributions of every camera, lifted
/// into the BEV volume and flattened.
inline BevGrid project_observation(const SurroundObservation& obs, const CameraRig& rig, const BevSpec& spec,
                                   int threads = 1) {
  require(obs.cameras.size() == rig.size(), Errc::kShapeMismatch, "observation does not match the rig");
  std::vector<Image<double>> features, heights;
  for (const auto& cam : obs.cameras) {
    features.push_back(semantic_features(cam, obs.category_count));
    heights.push_back(height_to_distribution(cam.heights, spec.bins));
  }
  return flatten_volume(project_to_volume(features, heights, rig, spec, threads), spec, threads);
}

namespace detail {

/// Renders, projects and flattens the surround view of `pose`.
inline BevGrid projected_bev(const World& world, const CameraRig& rig, const EgoPose& pose, const BevSpec& spec,
                             StageTimes& times, int threads) {
  auto t0 = Clock::now();
  const Scene scene(world);
  const SurroundObservation obs = render_surround(scene, rig, pose, threads);
  times.render_ms = ms_since(t0);
  t0 = Clock::now();
  BevGrid bev = project_observation(obs, rig, spec, threads);
  times.projection_ms = ms_since(t0);
  return bev;
}

}  // namespace detail

/// One Monte Carlo trial; every random draw derives from `seed`.
inline TrialRecord run_trial(const ExperimentConfig& cfg, const CameraRig& rig, int index, std::uint64_t seed,
                             StageTimes* times_out = nullptr, int threads = 1) {
  using detail::Clock;
  using detail::ms_since;
  TrialRecord rec;
  rec.trial = index;
  rec.seed = seed;
  StageTimes times;
  const auto t_start = Clock::now();
  try {
    auto t0 = Clock::now();
    WorldSpec ws = cfg.world;
    ws.seed = seed;
    const World world = generate_world(ws);
    Rng rng(derive_seed(seed, 1));
    rec.truth = sample_drivable_pose(world, rng, cfg.pose_margin);
    rec.prior = perturb(rec.truth, rng, cfg.localizer.r_max);
    times.world_ms = ms_since(t0);

    const BevGrid oracle = oracle_bev(world, rec.truth, cfg.bev);
    BevGrid bev;
    if (cfg.bev_source == "projected") {
      bev = detail::projected_bev(world, rig, rec.truth, cfg.bev, times, threads);
      for (int k = 0; k < bev.channels(); ++k)
        rec.iou.push_back(iou(bev, oracle, k, cfg.iou_mask, cfg.binarize_threshold).iou);
    } else {
      bev = oracle;
    }

    t0 = Clock::now();
    const MapTile tile = crop_tile(world.map, rec.prior, cfg.localizer.tile_side, cfg.localizer.tile_resolution,
                                   threads);
    times.tile_ms = ms_since(t0);
    t0 = Clock::now();
    const LocalizationResult loc = localize(bev, tile, rec.prior, cfg.localizer, threads);
    times.matching_ms = ms_since(t0);

    rec.estimate = loc.estimate.position();
    rec.error_m = (rec.estimate - rec.truth.position()).norm();
    rec.peak_probability = loc.peak_probability;
    if (!std::isfinite(rec.error_m)) {
      rec.error_m = std::numeric_limits<double>::infinity();
      rec.failure = "non-finite estimate";
    }
  } catch (const std::exception& e) {
    rec.error_m = std::numeric_limits<double>::infinity();
    rec.failure = e.what();
  }
  times.total_ms = detail::ms_since(t_start);
  if (cfg.record_wall_time) rec.wall_ms = times.total_ms;
  if (times_out) *times_out = times;
  return rec;
}

inline std::uint64_t trial_seed(std::uint64_t master, int index) {
  return derive_seed(master, static_cast<std::uint64_t>(index));
}

/// Runs all trials, in parallel across trials. Each trial is single-threaded
/// and seeded from (cfg.seed, trial index), so results do not depend on
/// `threads`.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1) {
  cfg.validate();
  const CameraRig rig = cfg.effective_rig();
  ExperimentResult out;
  out.categories = {kDrivable, kWalkway, kCrossing};
  out.trials.resize(cfg.trials);
  parallel_for(0, static_cast<std::size_t>(cfg.trials), threads, [&](std::size_t i) {
    const int idx = static_cast<int>(i);
    out.trials[i] = run_trial(cfg, rig, idx, trial_seed(cfg.seed, idx));
  });

  std::vector<double> errors;
  for (const auto& t : out.trials) errors.push_back(t.error_m);
  out.recall = recall_accuracy(errors);

  out.iou.policy = cfg.iou_mask;
  out.iou.categories = out.categories;
  out.iou.mean_iou.assign(out.categories.size(), std::numeric_limits<double>::quiet_NaN());
  out.iou.defined.assign(out.categories.size(), 0);
  for (std::size_t k = 0; k < out.categories.size(); ++k) {
    double sum = 0.0;
    for (const auto& t : out.trials)
      if (k < t.iou.size() && t.iou[k]) {
        sum += *t.iou[k];
        ++out.iou.defined[k];
      }
    if (out.iou.defined[k] > 0) out.iou.mean_iou[k] = sum / out.iou.defined[k];
  }
  return out;
}

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace detail

inline std::string experiment_csv(const ExperimentResult& r, bool with_wall_time) {
  std::string out = "trial,seed,true_x,true_y,prior_x,prior_y,est_x,est_y,error_m,peak_prob,wall_ms\n";
  using detail::fmt;
  for (const auto& t : r.trials) {
    out += std::to_string(t.trial) + "," + std::to_string(t.seed) + "," + fmt(t.truth.x) + "," + fmt(t.truth.y) +
           "," + fmt(t.prior.x) + "," + fmt(t.prior.y) + "," + fmt(t.estimate.x()) + "," + fmt(t.estimate.y()) +
           "," + fmt(t.error_m) + "," + fmt(t.peak_probability) + "," + (with_wall_time ? fmt(t.wall_ms) : "") +
           "\n";
  }
  return out;
}

inline nlohmann::json experiment_summary(const ExperimentResult& r) {
  using detail::finite_or_null;
  nlohmann::json recall = nlohmann::json::array();
  for (std::size_t i = 0; i < r.recall.thresholds.size(); ++i)
    recall.push_back({{"threshold_m", r.recall.thresholds[i]}, {"recall", r.recall.recall[i]}});
  nlohmann::json quantiles = nlohmann::json::object();
  for (std::size_t i = 0; i < r.recall.quantile_levels.size(); ++i) {
    char key[16];
    std::snprintf(key, sizeof key, "p%02d", static_cast<int>(std::lround(r.recall.quantile_levels[i] * 100)));
    quantiles[key] = finite_or_null(r.recall.quantiles[i]);
  }
  nlohmann::json iou = nlohmann::json::object();
  for (std::size_t k = 0; k < r.iou.categories.size(); ++k)
    iou[r.iou.categories[k]] = {{"mean", finite_or_null(r.iou.mean_iou[k])}, {"scenes", r.iou.defined[k]}};
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& t : r.trials)
    if (!t.failure.empty()) failures.push_back({{"trial", t.trial}, {"error", t.failure}});
  return {{"samples", r.recall.samples},
          {"failures", r.recall.failures},
          {"recall", recall},
          {"error_quantiles_m", quantiles},
          {"iou", {{"mask", to_string(r.iou.policy)}, {"categories", iou}}},
          {"failed_trials", failures}};
}

}  // namespace bevloc
