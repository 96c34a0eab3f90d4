#include "xdet/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace xdet {

using nlohmann::json;

namespace {

[[noreturn]] void bad_key(const std::string& origin, const std::string& key,
                          const std::string& why) {
  throw std::runtime_error(origin + ": config key '" + key + "' " + why);
}

class Checker {
 public:
  Checker(const json& j, std::string origin, std::string prefix)
      : j_(j), origin_(std::move(origin)), prefix_(std::move(prefix)) {
    if (!j_.is_object()) bad_key(origin_, prefix_.empty() ? "<root>" : prefix_, "must be an object");
  }

  ~Checker() = default;

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) bad_key(origin_, prefix_ + it.key(), "is unknown");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  void read(const std::string& key, T& out, const char* type_name) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      bad_key(origin_, prefix_ + key, std::string("must be ") + type_name);
    }
  }

  const json& sub(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

 private:
  const json& j_;
  std::string origin_;
  std::string prefix_;
  std::set<std::string> seen_;
};

}  // namespace

TrainConfig config_from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::runtime_error(origin + ": not valid JSON: " + e.what());
  }

  TrainConfig c;
  Checker root(j, origin, "");
  root.read("version", c.version, "an integer");
  if (c.version != 1) bad_key(origin, "version", "must be 1");

  if (root.has("data")) {
    Checker data(root.sub("data"), origin, "data.");
    data.read("source_train", c.source_train, "a string path");
    data.read("target_train", c.target_train, "a string path");
    data.read("target_test", c.target_test, "a string path");
    data.finish();
  }
  if (root.has("weights")) {
    Checker w(root.sub("weights"), origin, "weights.");
    w.read("alpha", c.weights.alpha, "a number");
    w.read("lambda1", c.weights.lambda1, "a number");
    w.read("lambda2", c.weights.lambda2, "a number");
    w.read("sigma", c.weights.sigma, "a number");
    w.finish();
    if (c.weights.alpha < 0) bad_key(origin, "weights.alpha", "must be non-negative");
    if (c.weights.lambda1 < 0) bad_key(origin, "weights.lambda1", "must be non-negative");
    if (c.weights.lambda2 < 0) bad_key(origin, "weights.lambda2", "must be non-negative");
    if (c.weights.sigma < 0 || c.weights.sigma > 1)
      bad_key(origin, "weights.sigma", "must be in [0,1]");
  }
  if (root.has("tasks")) {
    Checker t(root.sub("tasks"), origin, "tasks.");
    t.read("uda", c.enable_uda, "a boolean");
    t.read("rp", c.enable_rp, "a boolean");
    t.read("cl", c.enable_cl, "a boolean");
    std::string mode = c.rotation_mode == RotationMode::proposal ? "proprot" : "imgrot";
    t.read("rotation_mode", mode, "\"proprot\" or \"imgrot\"");
    if (mode == "proprot")
      c.rotation_mode = RotationMode::proposal;
    else if (mode == "imgrot")
      c.rotation_mode = RotationMode::image;
    else
      bad_key(origin, "tasks.rotation_mode", "must be \"proprot\" or \"imgrot\"");
    t.read("rp_proposals_from_rotated", c.rp_proposals_from_rotated, "a boolean");
    t.finish();
  }
  if (root.has("model")) {
    Checker m(root.sub("model"), origin, "model.");
    m.read("top_k", c.top_k, "an integer");
    m.read("grl_beta", c.grl_beta, "a number");
    m.finish();
    if (c.top_k < 1) bad_key(origin, "model.top_k", "must be >= 1");
  }
  if (root.has("optim")) {
    Checker o(root.sub("optim"), origin, "optim.");
    o.read("lr", c.lr, "a number");
    o.read("momentum", c.momentum, "a number");
    o.finish();
    if (c.lr <= 0) bad_key(origin, "optim.lr", "must be positive");
  }
  if (root.has("train")) {
    Checker t(root.sub("train"), origin, "train.");
    t.read("steps", c.steps, "an integer");
    t.read("eval_interval", c.eval_interval, "an integer");
    t.read("seed", c.seed, "an unsigned integer");
    t.read("out_dir", c.out_dir, "a string path");
    t.finish();
    if (c.steps < 0) bad_key(origin, "train.steps", "must be >= 0");
    if (c.eval_interval < 1) bad_key(origin, "train.eval_interval", "must be >= 1");
  }
  if (root.has("augment")) {
    Checker a(root.sub("augment"), origin, "augment.");
    a.read("op_count", c.aug_op_count, "an integer");
    a.read("magnitude", c.aug_magnitude, "a number");
    a.finish();
    if (c.aug_op_count < 1) bad_key(origin, "augment.op_count", "must be >= 1");
    if (c.aug_magnitude < 0 || c.aug_magnitude > 1)
      bad_key(origin, "augment.magnitude", "must be in [0,1]");
  }
  if (root.has("eval")) {
    Checker e(root.sub("eval"), origin, "eval.");
    e.read("score_threshold", c.eval_score_threshold, "a number");
    e.read("nms_iou", c.eval_nms_iou, "a number");
    e.finish();
  }
  root.finish();
  return c;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str(), path);
}

std::string config_to_json_text(const TrainConfig& c) {
  json j = {
      {"version", c.version},
      {"data",
       {{"source_train", c.source_train},
        {"target_train", c.target_train},
        {"target_test", c.target_test}}},
      {"weights",
       {{"alpha", c.weights.alpha},
        {"lambda1", c.weights.lambda1},
        {"lambda2", c.weights.lambda2},
        {"sigma", c.weights.sigma}}},
      {"tasks",
       {{"uda", c.enable_uda},
        {"rp", c.enable_rp},
        {"cl", c.enable_cl},
        {"rotation_mode", c.rotation_mode == RotationMode::proposal ? "proprot" : "imgrot"},
        {"rp_proposals_from_rotated", c.rp_proposals_from_rotated}}},
      {"model", {{"top_k", c.top_k}, {"grl_beta", c.grl_beta}}},
      {"optim", {{"lr", c.lr}, {"momentum", c.momentum}}},
      {"train",
       {{"steps", c.steps},
        {"eval_interval", c.eval_interval},
        {"seed", c.seed},
        {"out_dir", c.out_dir}}},
      {"augment", {{"op_count", c.aug_op_count}, {"magnitude", c.aug_magnitude}}},
      {"eval",
       {{"score_threshold", c.eval_score_threshold}, {"nms_iou", c.eval_nms_iou}}},
  };
  return j.dump(2) + "\n";
}

void save_config(const std::string& path, const TrainConfig& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << config_to_json_text(config);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace xdet
