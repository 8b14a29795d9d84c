// bevloc command-line front end.
//
// Every subcommand builds one JSON config (defaults, then --config, then
// --set key.path=value, then explicit flags), validates it, writes it to
// <out>/config.json and runs. `bevloc <cmd> --config <out>/config.json`
// replays a run.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bevloc/bevloc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit : int {
  kOk = 0,
  kUsage = 2,
  kMissingFile = 3,
  kInvalidConfig = 4,
  kDimsMismatch = 5,
  kMalformedFile = 6,
  kOutputExists = 7,
  kRuntime = 8,
};

const char* exit_name(int code) {
  switch (code) {
    case kUsage: return "usage";
    case kMissingFile: return "missing_file";
    case kInvalidConfig: return "invalid_config";
    case kDimsMismatch: return "dims_mismatch";
    case kMalformedFile: return "malformed_file";
    case kOutputExists: return "output_exists";
    default: return "runtime";
  }
}

struct CliError : std::runtime_error {
  CliError(int code_, const std::string& what) : std::runtime_error(what), code(code_) {}
  int code;
};

int exit_code(bevloc::Errc e) {
  using bevloc::Errc;
  switch (e) {
    case Errc::kInvalidArgument:
    case Errc::kInvalidSpec:
    case Errc::kUnknownEncoder:
    case Errc::kMissingHeading: return kInvalidConfig;
    case Errc::kShapeMismatch:
    case Errc::kTemplateTooLarge: return kDimsMismatch;
    case Errc::kMagicMismatch:
    case Errc::kMalformedHeader:
    case Errc::kTruncated: return kMalformedFile;
    default: return kRuntime;
  }
}

int report(int code, const std::string& message) {
  const json line = {{"error", exit_name(code)}, {"exit", code}, {"message", message}};
  std::cerr << line.dump() << "\n";
  return code;
}

// ---------------------------------------------------------------------------
// Shared options
// ---------------------------------------------------------------------------

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  bool force = false;
  int threads = 0;
  bool quiet = false;

  int thread_count() const { return threads > 0 ? threads : bevloc::default_thread_count(); }
};

void add_common(CLI::App* sub, Common& c, bool out_required) {
  sub->add_option("--config", c.config, "JSON config merged under the flags");
  sub->add_option("--set", c.sets, "override a config key, key.path=value (repeatable)");
  auto* out = sub->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
  sub->add_flag("--force", c.force, "overwrite a non-empty output directory");
  sub->add_option("--threads", c.threads, "worker threads (default: hardware count)")->check(CLI::NonNegativeNumber);
  sub->add_flag("--quiet", c.quiet, "do not log written files");
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw CliError(kInvalidConfig, std::string("no ") + what + " given");
  if (!fs::exists(path)) throw CliError(kMissingFile, std::string(what) + " not found: " + path);
}

json load_json(const std::string& path, const char* what) {
  require_file(path, what);
  return bevloc::read_json_file(path);
}

/// Sets a dotted key path, creating objects on the way. The value is parsed
/// as JSON when possible, otherwise taken as a string.
void apply_set(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw CliError(kUsage, "--set expects key.path=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) keys.push_back(key);
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->is_object()) throw CliError(kInvalidConfig, "--set path '" + path + "' crosses a non-object");
    node = &(*node)[keys[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) throw CliError(kInvalidConfig, "--set path '" + path + "' crosses a non-object");
  (*node)[keys.back()] = std::move(value);
}

/// Recursive object merge; `patch` wins.
void merge_into(json& base, const json& patch) {
  for (const auto& [k, v] : patch.items()) {
    if (v.is_object() && base.contains(k) && base[k].is_object()) merge_into(base[k], v);
    else base[k] = v;
  }
}

json base_config(const Common& c, json defaults) {
  if (!c.config.empty()) {
    const json file = load_json(c.config, "config file");
    if (!file.is_object()) throw CliError(kInvalidConfig, "config file must hold a JSON object");
    merge_into(defaults, file);
  }
  for (const auto& s : c.sets) apply_set(defaults, s);
  return defaults;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw CliError(kInvalidConfig, where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; }) == allowed.end())
      throw CliError(kInvalidConfig, "unknown " + where + " key '" + k + "'");
}

class Output {
 public:
  Output(const Common& c) : quiet_(c.quiet) {
    if (c.out.empty()) return;
    dir_ = c.out;
    if (fs::exists(dir_)) {
      if (!fs::is_directory(dir_)) throw CliError(kOutputExists, "output path exists and is not a directory: " + c.out);
      if (!fs::is_empty(dir_) && !c.force)
        throw CliError(kOutputExists, "output directory is not empty (use --force): " + c.out);
    }
    fs::create_directories(dir_);
  }

  bool enabled() const { return !dir_.empty(); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  void text(const std::string& name, const std::string& content) {
    bevloc::write_text_file(path(name), content);
    log(name);
  }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
  void log(const std::string& name) const {
    if (!quiet_) std::cerr << "bevloc: wrote " << path(name).string() << "\n";
  }

 private:
  fs::path dir_;
  bool quiet_;
};

// Poses cross the CLI boundary as x, y (metres) and yaw in degrees.
json pose_json(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string tok;
  try {
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  } catch (const std::exception&) {
    throw CliError(kUsage, "pose must be x,y,yaw_deg, got '" + text + "'");
  }
  if (v.size() != 3) throw CliError(kUsage, "pose must be x,y,yaw_deg, got '" + text + "'");
  return {{"x", v[0]}, {"y", v[1]}, {"yaw_deg", v[2]}};
}

bevloc::EgoPose pose_from(const json& j, const std::string& where) {
  check_keys(j, {"x", "y", "yaw_deg"}, where);
  try {
    return {j.at("x").get<double>(), j.at("y").get<double>(), bevloc::deg2rad(j.at("yaw_deg").get<double>())};
  } catch (const json::exception& e) {
    throw CliError(kInvalidConfig, where + " needs numeric x, y and yaw_deg");
  }
}

json pose_to_json(const bevloc::EgoPose& p) {
  return {{"x", p.x}, {"y", p.y}, {"yaw_deg", bevloc::rad2deg(p.yaw)}};
}

std::string str_or_empty(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return {};
  if (!j[key].is_string()) throw CliError(kInvalidConfig, std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string tok;
  try {
    while (std::getline(ss, tok, ',')) v.push_back(std::stod(tok));
  } catch (const std::exception&) {
    throw CliError(kUsage, "expected a comma-separated number list, got '" + text + "'");
  }
  return v;
}

bevloc::CameraRig rig_from(const std::string& path) {
  return path.empty() ? bevloc::default_rig() : bevloc::rig_from_json(load_json(path, "rig"));
}

bevloc::World world_from(const std::string& path) {
  auto w = bevloc::world_from_json(load_json(path, "world"));
  w.validate();
  return w;
}

std::string safe_name(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return s;
}

void write_bev(Output& out, const bevloc::BevGrid& bev, const std::vector<std::string>& categories, bool f32) {
  const std::string name = f32 ? "bev.smf" : "bev.smr";
  bevloc::save_bev(bev, out.path(name));
  out.log(name);
  for (int k = 0; k < bev.channels(); ++k) {
    const std::string pgm = "preview_" + safe_name(k < static_cast<int>(categories.size()) ? categories[k]
                                                                                          : std::to_string(k)) +
                            ".pgm";
    bevloc::save_pgm(out.path(pgm), bev.size(), bev.size(), bevloc::bev_preview(bev, k), 255);
    out.log(pgm);
  }
  out.json_file("bev.json", {{"categories", categories},
                             {"size", bev.size()},
                             {"resolution", bev.scores.geometry().resolution}});
}

// ---------------------------------------------------------------------------
// gen-world
// ---------------------------------------------------------------------------

struct GenWorldArgs {
  Common common;
  std::uint64_t seed = 0;
  double extent = 0.0;
};

int run_gen_world(CLI::App* sub, GenWorldArgs& a) {
  json cfg = base_config(a.common, bevloc::spec_to_json(bevloc::WorldSpec{}));
  if (sub->count("--seed")) cfg["seed"] = a.seed;
  if (sub->count("--extent")) cfg["extent"] = a.extent;
  const bevloc::WorldSpec spec = bevloc::spec_from_json(cfg);
  spec.validate();
  Output out(a.common);
  const bevloc::World world = bevloc::generate_world(spec);
  out.json_file("config.json", bevloc::spec_to_json(spec));
  out.json_file("world.json", bevloc::world_to_json(world));
  return kOk;
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderArgs {
  Common common;
  std::string world, rig, pose;
};

int run_render(CLI::App* sub, RenderArgs& a) {
  json cfg = base_config(a.common, {{"world", nullptr}, {"rig", nullptr}, {"pose", {{"x", 0.0}, {"y", 0.0}, {"yaw_deg", 0.0}}}});
  if (sub->count("--world")) cfg["world"] = a.world;
  if (sub->count("--rig")) cfg["rig"] = a.rig;
  if (sub->count("--pose")) cfg["pose"] = pose_json(a.pose);
  check_keys(cfg, {"world", "rig", "pose"}, "render config");
  const bevloc::EgoPose pose = pose_from(cfg["pose"], "pose");
  const bevloc::World world = world_from(str_or_empty(cfg, "world"));
  const bevloc::CameraRig rig = rig_from(str_or_empty(cfg, "rig"));
  Output out(a.common);
  const auto obs = bevloc::render_surround(world, rig, pose, a.common.thread_count());
  out.json_file("config.json", cfg);
  bevloc::save_observation(obs, rig, out.path(""));
  for (const auto& cam : rig.cameras) {
    out.log(cam.name + ".labels.smr");
    out.log(cam.name + ".heights.smf");
  }
  out.log("manifest.json");
  bevloc::save_rig(rig, out.path("rig.json"));
  out.log("rig.json");
  return kOk;
}

// ---------------------------------------------------------------------------
// build-bev
// ---------------------------------------------------------------------------

struct BuildBevArgs {
  Common common;
  std::string obs, rig, world, pose, bins, format;
  double bev_res = 0.0, bev_side = 0.0;
};

json bev_defaults() { return bevloc::bev_spec_to_json(bevloc::BevSpec{}); }

int run_build_bev(CLI::App* sub, BuildBevArgs& a) {
  json cfg = base_config(a.common, {{"obs", nullptr},
                                    {"rig", nullptr},
                                    {"world", nullptr},
                                    {"pose", nullptr},
                                    {"bev", bev_defaults()},
                                    {"format", "u8"}});
  if (sub->count("--obs")) cfg["obs"] = a.obs;
  if (sub->count("--rig")) cfg["rig"] = a.rig;
  if (sub->count("--world")) cfg["world"] = a.world;
  if (sub->count("--pose")) cfg["pose"] = pose_json(a.pose);
  if (sub->count("--bev-res")) cfg["bev"]["resolution"] = a.bev_res;
  if (sub->count("--bev-side")) cfg["bev"]["side"] = a.bev_side;
  if (sub->count("--bins")) cfg["bev"]["bins"] = parse_list(a.bins);
  if (sub->count("--format")) cfg["format"] = a.format;
  check_keys(cfg, {"obs", "rig", "world", "pose", "bev", "format"}, "build-bev config");
  const bevloc::BevSpec spec = bevloc::bev_spec_from_json(cfg["bev"]);
  spec.validate();
  const std::string format = cfg["format"].is_string() ? cfg["format"].get<std::string>() : "";
  if (format != "u8" && format != "f32") throw CliError(kInvalidConfig, "format must be u8 or f32");
  const std::string obs_dir = str_or_empty(cfg, "obs"), world_path = str_or_empty(cfg, "world");
  if (obs_dir.empty() == world_path.empty())
    throw CliError(kInvalidConfig, "give exactly one of --obs (projected BEV) or --world with --pose (oracle BEV)");

  bevloc::BevGrid bev;
  std::vector<std::string> categories;
  if (!obs_dir.empty()) {
    require_file((fs::path(obs_dir) / "manifest.json").string(), "observation manifest");
    const bevloc::CameraRig rig = rig_from(str_or_empty(cfg, "rig"));
    const auto obs = bevloc::load_observation(obs_dir, rig);
    categories.assign(obs.label_names.begin(), obs.label_names.begin() + std::min<std::size_t>(
                                                                             obs.category_count, obs.label_names.size()));
    Output out(a.common);
    bev = bevloc::project_observation(obs, rig, spec, a.common.thread_count());
    out.json_file("config.json", cfg);
    write_bev(out, bev, categories, format == "f32");
    return kOk;
  }
  if (!cfg.contains("pose") || cfg["pose"].is_null()) throw CliError(kInvalidConfig, "an oracle BEV needs --pose");
  const bevloc::EgoPose pose = pose_from(cfg["pose"], "pose");
  const bevloc::World world = world_from(world_path);
  Output out(a.common);
  bev = bevloc::oracle_bev(world, pose, spec);
  out.json_file("config.json", cfg);
  write_bev(out, bev, world.map.categories, format == "f32");
  return kOk;
}

// ---------------------------------------------------------------------------
// localize
// ---------------------------------------------------------------------------

struct LocalizeArgs {
  Common common;
  std::string bev, obs, rig, map, prior, truth, encoder;
  int stride = 1;
  double tau = 0.0;
  bool sweep = false;
};

int run_localize(CLI::App* sub, LocalizeArgs& a) {
  json cfg = base_config(a.common, {{"bev", nullptr},
                                    {"obs", nullptr},
                                    {"rig", nullptr},
                                    {"bev_spec", bev_defaults()},
                                    {"map", nullptr},
                                    {"prior", nullptr},
                                    {"truth", nullptr},
                                    {"localizer", bevloc::localizer_config_to_json(bevloc::LocalizerConfig{})}});
  if (sub->count("--bev")) cfg["bev"] = a.bev;
  if (sub->count("--obs")) cfg["obs"] = a.obs;
  if (sub->count("--rig")) cfg["rig"] = a.rig;
  if (sub->count("--map")) cfg["map"] = a.map;
  if (sub->count("--prior")) cfg["prior"] = pose_json(a.prior);
  if (sub->count("--truth")) cfg["truth"] = pose_json(a.truth);
  if (sub->count("--encoder")) cfg["localizer"]["encoder"] = a.encoder;
  if (sub->count("--stride")) cfg["localizer"]["stride"] = a.stride;
  if (sub->count("--tau")) cfg["localizer"]["tau"] = a.tau;
  if (sub->count("--rotation-sweep")) cfg["localizer"]["rotation_sweep"] = a.sweep;
  check_keys(cfg, {"bev", "obs", "rig", "bev_spec", "map", "prior", "truth", "localizer"}, "localize config");
  const bevloc::LocalizerConfig lc = bevloc::localizer_config_from_json(cfg["localizer"]);
  lc.validate();
  if (cfg["prior"].is_null()) throw CliError(kInvalidConfig, "localize needs --prior x,y,yaw_deg");
  const bevloc::EgoPose prior = pose_from(cfg["prior"], "prior");
  const std::string bev_path = str_or_empty(cfg, "bev"), obs_dir = str_or_empty(cfg, "obs");
  if (bev_path.empty() == obs_dir.empty()) throw CliError(kInvalidConfig, "give exactly one of --bev or --obs");

  const bevloc::SemanticMap map = bevloc::map_from_json(load_json(str_or_empty(cfg, "map"), "map"));
  bevloc::BevGrid bev;
  if (!bev_path.empty()) {
    require_file(bev_path, "BEV");
    bev = bevloc::load_bev(bev_path);
  } else {
    require_file((fs::path(obs_dir) / "manifest.json").string(), "observation manifest");
    const bevloc::BevSpec spec = bevloc::bev_spec_from_json(cfg["bev_spec"]);
    spec.validate();
    const bevloc::CameraRig rig = rig_from(str_or_empty(cfg, "rig"));
    bev = bevloc::project_observation(bevloc::load_observation(obs_dir, rig), rig, spec, a.common.thread_count());
  }
  if (bev.channels() != static_cast<int>(map.size()))
    throw CliError(kDimsMismatch, "BEV has " + std::to_string(bev.channels()) + " channels but the map has " +
                                      std::to_string(map.size()) + " categories");

  Output out(a.common);
  const auto r = bevloc::localize(bev, map, prior, lc, a.common.thread_count());
  json result = {{"estimate", pose_to_json(r.estimate)},
                 {"argmax", {{"x", r.argmax_position.x()}, {"y", r.argmax_position.y()}}},
                 {"peak_probability", r.peak_probability},
                 {"peak_score", r.peak_score},
                 {"prior", pose_to_json(prior)},
                 {"likelihood",
                  {{"rows", r.probability.p.rows()},
                   {"cols", r.probability.p.cols()},
                   {"origin_x", r.similarity.origin_x},
                   {"origin_y", r.similarity.origin_y},
                   {"step", r.similarity.step},
                   {"tau", r.probability.tau}}}};
  if (!cfg["truth"].is_null()) {
    const bevloc::EgoPose truth = pose_from(cfg["truth"], "truth");
    result["truth"] = pose_to_json(truth);
    result["error_m"] = (r.estimate.position() - truth.position()).norm();
  }
  if (out.enabled()) {
    out.json_file("config.json", cfg);
    out.json_file("result.json", result);
    bevloc::save_pgm(out.path("likelihood.pgm"), r.probability.p.cols(), r.probability.p.rows(),
                     bevloc::probability_pgm(r.probability.p), 65535);
    out.log("likelihood.pgm");
  } else {
    std::cout << result.dump(2) << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate / bench
// ---------------------------------------------------------------------------

struct EvaluateArgs {
  Common common;
  std::uint64_t seed = 0;
  int trials = 0;
  std::string bev_source;
};

bevloc::ExperimentConfig experiment_from(CLI::App* sub, EvaluateArgs& a, json defaults) {
  json cfg = base_config(a.common, std::move(defaults));
  if (sub->count("--seed")) cfg["seed"] = a.seed;
  if (sub->count("--trials")) cfg["trials"] = a.trials;
  if (sub->count("--bev-source")) cfg["bev_source"] = a.bev_source;
  auto ec = bevloc::experiment_config_from_json(cfg);
  ec.validate();
  return ec;
}

int run_evaluate(CLI::App* sub, EvaluateArgs& a) {
  const auto cfg = experiment_from(sub, a, bevloc::experiment_config_to_json(bevloc::ExperimentConfig{}));
  Output out(a.common);
  const auto result = bevloc::run_experiment(cfg, a.common.thread_count());
  out.json_file("config.json", bevloc::experiment_config_to_json(cfg));
  out.text("trials.csv", bevloc::experiment_csv(result, cfg.record_wall_time));
  out.json_file("summary.json", bevloc::experiment_summary(result));
  return kOk;
}

int run_bench(CLI::App* sub, EvaluateArgs& a) {
  bevloc::ExperimentConfig defaults;
  defaults.trials = 5;
  defaults.bev_source = "projected";
  const auto cfg = experiment_from(sub, a, bevloc::experiment_config_to_json(defaults));
  Output out(a.common);
  const auto rig = cfg.effective_rig();
  const int threads = a.common.thread_count();

  std::vector<bevloc::StageTimes> times(cfg.trials);
  int failures = 0;
  for (int i = 0; i < cfg.trials; ++i) {
    const auto rec = bevloc::run_trial(cfg, rig, i, bevloc::trial_seed(cfg.seed, i), &times[i], threads);
    if (!rec.failure.empty()) ++failures;
  }
  struct Row {
    const char* name;
    double bevloc::StageTimes::*field;
  };
  const Row rows[] = {{"world", &bevloc::StageTimes::world_ms},       {"render", &bevloc::StageTimes::render_ms},
                      {"projection", &bevloc::StageTimes::projection_ms}, {"tile", &bevloc::StageTimes::tile_ms},
                      {"matching", &bevloc::StageTimes::matching_ms},  {"end_to_end", &bevloc::StageTimes::total_ms}};
  json stages = json::object();
  std::printf("%-12s %10s %10s %10s\n", "stage", "mean_ms", "median_ms", "max_ms");
  for (const auto& row : rows) {
    std::vector<double> v;
    for (const auto& t : times) v.push_back(t.*row.field);
    std::sort(v.begin(), v.end());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= v.size();
    const double median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    std::printf("%-12s %10.2f %10.2f %10.2f\n", row.name, mean, median, v.back());
    stages[row.name] = {{"mean_ms", mean}, {"median_ms", median}, {"max_ms", v.back()}};
  }
  std::printf("trials %d, threads %d, failures %d\n", cfg.trials, threads, failures);
  if (out.enabled()) {
    out.json_file("config.json", bevloc::experiment_config_to_json(cfg));
    out.json_file("bench.json", {{"trials", cfg.trials}, {"threads", threads}, {"failures", failures}, {"stages", stages}});
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic BEV reconstruction and map relocalization on synthetic street worlds", "bevloc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenWorldArgs gw;
  auto* gen = app.add_subcommand("gen-world", "generate a synthetic street world");
  add_common(gen, gw.common, true);
  gen->add_option("--seed", gw.seed, "world seed");
  gen->add_option("--extent", gw.extent, "world side in metres");

  RenderArgs rd;
  auto* render = app.add_subcommand("render", "render label and height images for every rig camera");
  add_common(render, rd.common, true);
  render->add_option("--world", rd.world, "world JSON");
  render->add_option("--rig", rd.rig, "rig JSON (default: built-in six-camera rig)");
  render->add_option("--pose", rd.pose, "ego pose x,y,yaw_deg");

  BuildBevArgs bb;
  auto* build = app.add_subcommand("build-bev", "project an observation (or rasterize the map) into a BEV grid");
  add_common(build, bb.common, true);
  build->add_option("--obs", bb.obs, "observation directory written by render");
  build->add_option("--rig", bb.rig, "rig JSON (default: built-in rig)");
  build->add_option("--world", bb.world, "world JSON, for an oracle BEV");
  build->add_option("--pose", bb.pose, "ego pose x,y,yaw_deg, for an oracle BEV");
  build->add_option("--bev-res", bb.bev_res, "cell size in metres");
  build->add_option("--bev-side", bb.bev_side, "grid side in metres");
  build->add_option("--bins", bb.bins, "height bins, comma-separated metres");
  build->add_option("--format", bb.format, "u8 (.smr) or f32 (.smf)");

  LocalizeArgs lo;
  auto* loc = app.add_subcommand("localize", "relocalize a BEV against the map around a coarse prior");
  add_common(loc, lo.common, false);
  loc->add_option("--bev", lo.bev, "BEV file (.smr or .smf)");
  loc->add_option("--obs", lo.obs, "observation directory, projected on the fly");
  loc->add_option("--rig", lo.rig, "rig JSON for --obs");
  loc->add_option("--map", lo.map, "map or world JSON");
  loc->add_option("--prior", lo.prior, "prior pose x,y,yaw_deg");
  loc->add_option("--truth", lo.truth, "true pose x,y,yaw_deg, adds error_m to the result");
  loc->add_option("--encoder", lo.encoder, "identity, pyramid or distance");
  loc->add_option("--stride", lo.stride, "encoder stride");
  loc->add_option("--tau", lo.tau, "softmax temperature");
  loc->add_flag("--rotation-sweep", lo.sweep, "also search small heading offsets");

  EvaluateArgs ev;
  auto* eval = app.add_subcommand("evaluate", "Monte Carlo localization experiment");
  add_common(eval, ev.common, true);
  eval->add_option("--seed", ev.seed, "master seed");
  eval->add_option("--trials", ev.trials, "number of trials");
  eval->add_option("--bev-source", ev.bev_source, "oracle or projected");

  EvaluateArgs be;
  auto* bench = app.add_subcommand("bench", "per-stage timing");
  add_common(bench, be.common, false);
  bench->add_option("--seed", be.seed, "master seed");
  bench->add_option("--trials", be.trials, "number of trials");
  bench->add_option("--bev-source", be.bev_source, "oracle or projected");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(kUsage, e.what());
  }

  try {
    if (*gen) return run_gen_world(gen, gw);
    if (*render) return run_render(render, rd);
    if (*build) return run_build_bev(build, bb);
    if (*loc) return run_localize(loc, lo);
    if (*eval) return run_evaluate(eval, ev);
    if (*bench) return run_bench(bench, be);
  } catch (const CliError& e) {
    return report(e.code, e.what());
  } catch (const bevloc::Error& e) {
    return report(exit_code(e.code()), e.what());
  } catch (const std::exception& e) {
    return report(kRuntime, e.what());
  }
  return report(kUsage, "no subcommand");
}
