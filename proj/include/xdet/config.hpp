#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "xdet/objectives.hpp"

namespace xdet {

// Resolved experiment configuration. JSON-backed with schema validation;
// flags override file values in the CLI layer.
struct TrainConfig {
  int version = 1;

  std::string source_train;
  std::string target_train;
  std::string target_test;

  LossWeights weights;
  bool enable_uda = true;
  bool enable_rp = true;
  bool enable_cl = true;
  RotationMode rotation_mode = RotationMode::proposal;
  bool rp_proposals_from_rotated = true;  // ablation flip: proposals from the
                                          // unrotated image, boxes mapped over

  int top_k = 32;
  real grl_beta = real(1);

  real lr = real(0.05);
  real momentum = real(0.9);
  int steps = 3000;
  int eval_interval = 200;

  int aug_op_count = 2;
  real aug_magnitude = real(0.7);

  real eval_score_threshold = real(0.05);
  real eval_nms_iou = real(0.5);

  std::uint64_t seed = 0;
  std::string out_dir = "runs/out";
};

// Throws std::runtime_error naming the offending key on schema violations
// (unknown keys, wrong types, bad enum values).
TrainConfig load_config(const std::string& path);
TrainConfig config_from_json_text(const std::string& text, const std::string& origin);

void save_config(const std::string& path, const TrainConfig& config);
std::string config_to_json_text(const TrainConfig& config);

}  // namespace xdet
