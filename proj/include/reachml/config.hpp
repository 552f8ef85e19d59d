#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "reachml/common.hpp"
#include "reachml/experiment.hpp"

namespace reachml {

using Json = nlohmann::ordered_json;

namespace detail {

// Rejects keys that are not in the allowed set; names the section and key.
inline void check_keys(const Json& j, const std::string& section,
                       const std::set<std::string>& allowed) {
  if (!j.is_object()) {
    throw ConfigError("config section '" + section + "' must be an object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" +
                        (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

template <typename T>
void read(const Json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + section + "." + key + "' has the wrong type");
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig cfg;
  detail::check_keys(j, "", {"root_seed", "threads", "geometry", "episode", "sampler",
                             "network", "training", "cem", "experiment"});
  detail::read(j, "", "root_seed", cfg.root_seed);
  detail::read(j, "", "threads", cfg.threads);

  if (j.contains("geometry")) {
    const auto& g = j.at("geometry");
    detail::check_keys(g, "geometry",
                       {"upper_len_cm", "fore_len_cm", "vel_limit_rad_s", "acc_limit_rad_s2",
                        "steps_per_second", "initial_pose_deg"});
    detail::read(g, "geometry", "upper_len_cm", cfg.geometry.upper_len);
    detail::read(g, "geometry", "fore_len_cm", cfg.geometry.fore_len);
    detail::read(g, "geometry", "vel_limit_rad_s", cfg.geometry.vel_limit);
    detail::read(g, "geometry", "acc_limit_rad_s2", cfg.geometry.acc_limit);
    detail::read(g, "geometry", "steps_per_second", cfg.geometry.steps_per_second);
    if (g.contains("initial_pose_deg")) {
      std::vector<double> pose;
      detail::read(g, "geometry", "initial_pose_deg", pose);
      if (pose.size() != 2) {
        throw ConfigError("geometry.initial_pose_deg must have two entries");
      }
      cfg.geometry.initial_shoulder = deg_to_rad(pose[0]);
      cfg.geometry.initial_elbow = deg_to_rad(pose[1]);
    }
  }

  if (j.contains("episode")) {
    const auto& e = j.at("episode");
    detail::check_keys(e, "episode", {"max_steps", "walk_steps", "dwell_steps",
                                      "goal_radius_cm", "goal_dist_cm"});
    detail::read(e, "episode", "max_steps", cfg.episode.max_steps);
    detail::read(e, "episode", "walk_steps", cfg.episode.walk_steps);
    detail::read(e, "episode", "dwell_steps", cfg.episode.dwell_steps);
    detail::read(e, "episode", "goal_radius_cm", cfg.episode.goal_radius);
    detail::read(e, "episode", "goal_dist_cm", cfg.episode.goal_dist);
  }

  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    detail::check_keys(s, "sampler", {"rot_range_deg", "shear_range", "scale_range",
                                      "substitute_band_deg", "substitute_angle_deg"});
    auto read_pair = [&s](const char* key, double& lo, double& hi) {
      if (!s.contains(key)) return;
      std::vector<double> v;
      detail::read(s, "sampler", key, v);
      if (v.size() != 2) {
        throw ConfigError(std::string("sampler.") + key + " must have two entries");
      }
      lo = v[0];
      hi = v[1];
    };
    read_pair("rot_range_deg", cfg.sampler.rot_min_deg, cfg.sampler.rot_max_deg);
    read_pair("shear_range", cfg.sampler.shear_min, cfg.sampler.shear_max);
    read_pair("scale_range", cfg.sampler.scale_min, cfg.sampler.scale_max);
    read_pair("substitute_band_deg", cfg.sampler.band_lo_deg, cfg.sampler.band_hi_deg);
    detail::read(s, "sampler", "substitute_angle_deg", cfg.sampler.band_sub_deg);
  }

  if (j.contains("network")) {
    const auto& n = j.at("network");
    detail::check_keys(n, "network", {"hidden"});
    detail::read(n, "network", "hidden", cfg.hidden);
  }

  if (j.contains("training")) {
    const auto& t = j.at("training");
    detail::check_keys(t, "training",
                       {"learning_rate", "beta1", "beta2", "epsilon", "clip_norm", "batch_size",
                        "epochs", "plateau_patience", "plateau_tol", "norm_pos_cm"});
    detail::read(t, "training", "learning_rate", cfg.training.learning_rate);
    detail::read(t, "training", "beta1", cfg.training.beta1);
    detail::read(t, "training", "beta2", cfg.training.beta2);
    detail::read(t, "training", "epsilon", cfg.training.epsilon);
    detail::read(t, "training", "clip_norm", cfg.training.clip_norm);
    detail::read(t, "training", "batch_size", cfg.training.batch_size);
    detail::read(t, "training", "epochs", cfg.training.epochs);
    detail::read(t, "training", "plateau_patience", cfg.training.plateau_patience);
    detail::read(t, "training", "plateau_tol", cfg.training.plateau_tol);
    detail::read(t, "training", "norm_pos_cm", cfg.training.norm_pos_cm);
  }

  if (j.contains("cem")) {
    const auto& c = j.at("cem");
    detail::check_keys(c, "cem", {"population", "elite_count", "iterations", "horizon",
                                  "init_stddev", "min_stddev"});
    detail::read(c, "cem", "population", cfg.cem.population);
    detail::read(c, "cem", "elite_count", cfg.cem.elite_count);
    detail::read(c, "cem", "iterations", cfg.cem.iterations);
    detail::read(c, "cem", "horizon", cfg.cem.horizon);
    detail::read(c, "cem", "init_stddev", cfg.cem.init_stddev);
    detail::read(c, "cem", "min_stddev", cfg.cem.min_stddev);
  }

  if (j.contains("experiment")) {
    const auto& e = j.at("experiment");
    detail::check_keys(e, "experiment",
                       {"corpus_size", "corpus_scale", "blocks", "reaches_per_block",
                        "heldout_walks", "baseline_episodes", "bootstrap_resamples",
                        "test_rotation_deg"});
    detail::read(e, "experiment", "corpus_size", cfg.experiment.corpus_size);
    detail::read(e, "experiment", "corpus_scale", cfg.experiment.corpus_scale);
    detail::read(e, "experiment", "blocks", cfg.experiment.blocks);
    detail::read(e, "experiment", "reaches_per_block", cfg.experiment.reaches_per_block);
    detail::read(e, "experiment", "heldout_walks", cfg.experiment.heldout_walks);
    detail::read(e, "experiment", "baseline_episodes", cfg.experiment.baseline_episodes);
    detail::read(e, "experiment", "bootstrap_resamples", cfg.experiment.bootstrap_resamples);
    detail::read(e, "experiment", "test_rotation_deg", cfg.experiment.test_rotation_deg);
  }

  cfg.validate();
  return cfg;
}

inline Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["root_seed"] = cfg.root_seed;
  j["threads"] = cfg.threads;
  j["geometry"] = {{"upper_len_cm", cfg.geometry.upper_len},
                   {"fore_len_cm", cfg.geometry.fore_len},
                   {"vel_limit_rad_s", cfg.geometry.vel_limit},
                   {"acc_limit_rad_s2", cfg.geometry.acc_limit},
                   {"steps_per_second", cfg.geometry.steps_per_second},
                   {"initial_pose_deg",
                    {rad_to_deg(cfg.geometry.initial_shoulder),
                     rad_to_deg(cfg.geometry.initial_elbow)}}};
  j["episode"] = {{"max_steps", cfg.episode.max_steps},
                  {"walk_steps", cfg.episode.walk_steps},
                  {"dwell_steps", cfg.episode.dwell_steps},
                  {"goal_radius_cm", cfg.episode.goal_radius},
                  {"goal_dist_cm", cfg.episode.goal_dist}};
  j["sampler"] = {{"rot_range_deg", {cfg.sampler.rot_min_deg, cfg.sampler.rot_max_deg}},
                  {"shear_range", {cfg.sampler.shear_min, cfg.sampler.shear_max}},
                  {"scale_range", {cfg.sampler.scale_min, cfg.sampler.scale_max}},
                  {"substitute_band_deg", {cfg.sampler.band_lo_deg, cfg.sampler.band_hi_deg}},
                  {"substitute_angle_deg", cfg.sampler.band_sub_deg}};
  j["network"] = {{"hidden", cfg.hidden}};
  j["training"] = {{"learning_rate", cfg.training.learning_rate},
                   {"beta1", cfg.training.beta1},
                   {"beta2", cfg.training.beta2},
                   {"epsilon", cfg.training.epsilon},
                   {"clip_norm", cfg.training.clip_norm},
                   {"batch_size", cfg.training.batch_size},
                   {"epochs", cfg.training.epochs},
                   {"plateau_patience", cfg.training.plateau_patience},
                   {"plateau_tol", cfg.training.plateau_tol},
                   {"norm_pos_cm", cfg.training.norm_pos_cm}};
  j["cem"] = {{"population", cfg.cem.population},
              {"elite_count", cfg.cem.elite_count},
              {"iterations", cfg.cem.iterations},
              {"horizon", cfg.cem.horizon},
              {"init_stddev", cfg.cem.init_stddev},
              {"min_stddev", cfg.cem.min_stddev}};
  j["experiment"] = {{"corpus_size", cfg.experiment.corpus_size},
                     {"corpus_scale", cfg.experiment.corpus_scale},
                     {"blocks", cfg.experiment.blocks},
                     {"reaches_per_block", cfg.experiment.reaches_per_block},
                     {"heldout_walks", cfg.experiment.heldout_walks},
                     {"baseline_episodes", cfg.experiment.baseline_episodes},
                     {"bootstrap_resamples", cfg.experiment.bootstrap_resamples},
                     {"test_rotation_deg", cfg.experiment.test_rotation_deg}};
  return j;
}

// Canonical serialized form; its hash is embedded in every output artifact.
inline std::string config_canonical(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump(2);
}

inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(config_canonical(cfg));
}

// Empty or whitespace-only files yield the documented defaults; partial
// files override only the keys they name.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw MissingInputError("cannot open config file: " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    ExperimentConfig cfg;
    cfg.validate();
    return cfg;
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path.string());
  out << config_canonical(cfg) << '\n';
}

}  // namespace reachml
