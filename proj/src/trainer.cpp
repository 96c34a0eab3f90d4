#include "xdet/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "xdet/checkpoint.hpp"
#include "xdet/objectives.hpp"

namespace xdet {

namespace fs = std::filesystem;

std::shared_ptr<const DatasetBundle> load_datasets(const TrainConfig& config) {
  auto data = std::make_shared<DatasetBundle>();
  if (config.source_train.empty())
    throw std::runtime_error("missing dataset path: data.source_train");
  data->source_train = load_scenes(config.source_train);
  if (data->source_train.empty())
    throw std::runtime_error("empty source train split: " + config.source_train);

  const bool target_needed = config.enable_uda || config.enable_rp || config.enable_cl;
  if (target_needed) {
    if (config.target_train.empty())
      throw std::runtime_error("missing dataset path: data.target_train");
    data->target_train = load_images_only(config.target_train);
    if (data->target_train.empty())
      throw std::runtime_error("empty target train split: " + config.target_train);
  }
  if (!config.target_test.empty()) data->target_test = load_scenes(config.target_test);
  return data;
}

std::size_t Trainer::Cycler::next(Rng& rng, std::size_t n) {
  if (order.size() != n || pos >= order.size()) {
    if (order.size() != n) {
      order.resize(n);
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
    }
    rng.shuffle(order);
    pos = 0;
  }
  return order[pos++];
}

Trainer::Trainer(const TrainConfig& config, std::shared_ptr<const DatasetBundle> data)
    : config_(config),
      data_(data ? std::move(data) : load_datasets(config)),
      model_(config.seed),
      data_source_rng_(config.seed, "data-source"),
      data_target_rng_(config.seed, "data-target"),
      rotation_rng_(config.seed, "rotation"),
      augment_rng_(config.seed, "augmentation") {
  sgd_.lr = config_.lr;
  sgd_.momentum = config_.momentum;
}

LossBreakdown Trainer::train_step() {
  ++step_;
  const Scene& s = data_->source_train[source_cycler_.next(data_source_rng_,
                                                           data_->source_train.size())];
  const UnlabeledImage* t = nullptr;
  if (needs_target())
    t = &data_->target_train[target_cycler_.next(data_target_rng_,
                                                 data_->target_train.size())];

  // All randomness is drawn before any forward pass, one draw per enabled
  // task per domain.
  QuarterTurn theta_s = QuarterTurn::deg0, theta_t = QuarterTurn::deg0;
  if (config_.enable_rp) {
    theta_s = static_cast<QuarterTurn>(rotation_rng_.uniform_int(4));
    theta_t = static_cast<QuarterTurn>(rotation_rng_.uniform_int(4));
  }
  std::uint64_t aug_seed_s = 0, aug_seed_t = 0;
  if (config_.enable_cl) {
    aug_seed_s = augment_rng_.next_u64();
    aug_seed_t = augment_rng_.next_u64();
  }

  AugmentationPolicy policy;
  policy.op_count = config_.aug_op_count;
  policy.magnitude = config_.aug_magnitude;
  policy.seed = config_.seed;

  // Pseudo-label pass for the target image: plain values, nothing recorded.
  std::vector<BoundingBox> t_boxes;
  std::vector<std::vector<real>> t_probs;
  if (config_.enable_cl) {
    DetectionPass t_pass = forward_detection(model_, t->image, config_.top_k);
    for (const Proposal& p : t_pass.props.items) t_boxes.push_back(p.box);
    t_probs = class_probability_rows(t_pass.cls_logits);
  }
  // Proposal boxes for the unrotated-proposals ablation path.
  std::vector<BoundingBox> t_plain_boxes;
  if (config_.enable_rp && config_.rotation_mode == RotationMode::proposal &&
      !config_.rp_proposals_from_rotated) {
    if (!t_boxes.empty()) {
      t_plain_boxes = t_boxes;
    } else {
      Tensor tf = model_.extract_features(t->image);
      for (const Proposal& p : model_.propose(tf, config_.top_k).items)
        t_plain_boxes.push_back(p.box);
    }
  }

  Tape tape;
  TotalLoss total;
  {
    TapeScope scope(tape);

    DetectionPass src_pass = forward_detection(model_, s.image, config_.top_k);
    Tensor det = detection_loss(src_pass, s.annotations);

    Tensor uda, rp, cl;
    real cl_accept = 0;
    if (config_.enable_uda) {
      Tensor t_features = model_.extract_features(t->image);
      uda = uda_loss(model_, src_pass.features, t_features, config_.grl_beta);
    }
    if (config_.enable_rp) {
      const ImageBuffer s_rot = rotate_image(s.image, theta_s);
      const ImageBuffer t_rot = rotate_image(t->image, theta_t);
      RotationPass ps, pt;
      if (config_.rotation_mode == RotationMode::proposal &&
          !config_.rp_proposals_from_rotated) {
        const real w = static_cast<real>(s.image.width());
        const real h = static_cast<real>(s.image.height());
        std::vector<BoundingBox> s_boxes;
        for (const Proposal& p : src_pass.props.items)
          s_boxes.push_back(rotate_box(p.box, theta_s, w, h));
        std::vector<BoundingBox> t_mapped;
        const real tw = static_cast<real>(t->image.width());
        const real th = static_cast<real>(t->image.height());
        for (const BoundingBox& b : t_plain_boxes)
          t_mapped.push_back(rotate_box(b, theta_t, tw, th));
        ps = forward_rotation_at_boxes(model_, s_rot, s_boxes);
        pt = forward_rotation_at_boxes(model_, t_rot, t_mapped);
      } else {
        ps = forward_rotation(model_, s_rot, config_.rotation_mode, config_.top_k);
        pt = forward_rotation(model_, t_rot, config_.rotation_mode, config_.top_k);
      }
      rp = rotation_loss(ps, theta_s, pt, theta_t, config_.rotation_mode);
    }
    if (config_.enable_cl) {
      std::vector<BoundingBox> s_boxes;
      for (const Proposal& p : src_pass.props.items) s_boxes.push_back(p.box);
      // Source pseudo-labels reuse the detection pass's classifier outputs as
      // plain values; nothing flows back through them.
      std::vector<std::vector<real>> s_probs = class_probability_rows(src_pass.cls_logits);
      ConsistencyTerm cl_s = consistency_loss_one_image(
          model_, s_boxes, s_probs, s.image, policy, aug_seed_s, config_.weights.sigma);
      ConsistencyTerm cl_t = consistency_loss_one_image(
          model_, t_boxes, t_probs, t->image, policy, aug_seed_t, config_.weights.sigma);
      ConsistencyResult combined = consistency_loss(cl_s, cl_t);
      cl = combined.loss;
      cl_accept = combined.accept_fraction;
    }

    total = total_loss(&det, config_.enable_uda ? &uda : nullptr,
                       config_.enable_rp ? &rp : nullptr,
                       config_.enable_cl ? &cl : nullptr, cl_accept, config_.weights);

    if (!std::isfinite(total.breakdown.total)) {
      std::ostringstream os;
      os << "non-finite total loss at step " << step_ << ": det=" << total.breakdown.l_det
         << " uda=" << total.breakdown.l_uda << " rp=" << total.breakdown.l_rp
         << " cl=" << total.breakdown.l_cl;
      throw std::runtime_error(os.str());
    }
    tape.backward(total.value);
  }

  std::vector<Tensor> params = model_.params();
  sgd_step(params, sgd_);
  return total.breakdown;
}

double Trainer::evaluate_target_map(std::vector<PredRecord>* predictions_out) const {
  if (data_->target_test.empty())
    throw std::runtime_error("missing dataset path: data.target_test");
  std::vector<PredRecord> preds;
  std::vector<GtInstance> gts;
  for (const Scene& scene : data_->target_test) {
    for (const Detection& d :
         model_.detect(scene.image, config_.eval_score_threshold, config_.eval_nms_iou,
                       config_.top_k))
      preds.push_back({scene.id, d.class_id, d.box, d.confidence});
    for (const Annotation& a : scene.annotations) gts.push_back({scene.id, a.class_id, a.box});
  }
  EvalResult result = mean_average_precision(preds, gts, kNumClasses);
  if (predictions_out) *predictions_out = std::move(preds);
  return result.map;
}

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

double Trainer::run() {
  fs::create_directories(config_.out_dir);
  save_config((fs::path(config_.out_dir) / "config.json").string(), config_);

  const std::string metrics_path = (fs::path(config_.out_dir) / "metrics.csv").string();
  std::ofstream metrics(metrics_path);
  if (!metrics) throw std::runtime_error("cannot write metrics: " + metrics_path);
  metrics << "step,l_det,l_uda,l_rp,l_cl,total,cl_accept_fraction,target_map\n";

  const auto t_start = std::chrono::steady_clock::now();
  double final_map = 0;
  bool evaluated = false;
  for (int i = 1; i <= config_.steps; ++i) {
    LossBreakdown b = train_step();
    std::string map_field;
    if (i % config_.eval_interval == 0 || i == config_.steps) {
      final_map = evaluate_target_map();
      evaluated = true;
      map_field = fmt_real(final_map);
    }
    metrics << i << "," << fmt_real(b.l_det) << "," << fmt_real(b.l_uda) << ","
            << fmt_real(b.l_rp) << "," << fmt_real(b.l_cl) << "," << fmt_real(b.total) << ","
            << fmt_real(b.cl_accept_fraction) << "," << map_field << "\n";
  }
  metrics.close();
  if (!metrics) throw std::runtime_error("write failed: " + metrics_path);

  NamedParams params = model_.named_params();
  save_checkpoint((fs::path(config_.out_dir) / "checkpoint.bin").string(), params);

  std::vector<PredRecord> preds;
  if (!data_->target_test.empty()) {
    if (!evaluated || config_.steps == 0) final_map = evaluate_target_map(&preds);
    else evaluate_target_map(&preds);
    write_predictions_jsonl((fs::path(config_.out_dir) / "predictions.jsonl").string(), preds);
    std::vector<GtInstance> gts;
    for (const Scene& scene : data_->target_test)
      for (const Annotation& a : scene.annotations)
        gts.push_back({scene.id, a.class_id, a.box});
    write_eval_csv((fs::path(config_.out_dir) / "results.csv").string(),
                   mean_average_precision(preds, gts, kNumClasses));
  }

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  // Wall-clock stays out of metrics.csv so reruns stay byte-identical.
  std::ofstream summary((fs::path(config_.out_dir) / "summary.txt").string());
  summary << "steps " << config_.steps << "\n"
          << "final_target_map " << fmt_real(final_map) << "\n"
          << "wall_seconds " << fmt_real(seconds) << "\n";
  return final_map;
}

namespace {

struct VariantSpec {
  std::string name;
  void (*apply)(TrainConfig&);
};

const VariantSpec kVariants[] = {
    {"source_only",
     [](TrainConfig& c) {
       c.enable_uda = false;
       c.enable_rp = false;
       c.enable_cl = false;
     }},
    {"uda",
     [](TrainConfig& c) {
       c.enable_uda = true;
       c.enable_rp = false;
       c.enable_cl = false;
     }},
    {"uda+rp",
     [](TrainConfig& c) {
       c.enable_uda = true;
       c.enable_rp = true;
       c.enable_cl = false;
       c.rotation_mode = RotationMode::proposal;
     }},
    {"uda+cl",
     [](TrainConfig& c) {
       c.enable_uda = true;
       c.enable_rp = false;
       c.enable_cl = true;
     }},
    {"uda+rp+cl",
     [](TrainConfig& c) {
       c.enable_uda = true;
       c.enable_rp = true;
       c.enable_cl = true;
       c.rotation_mode = RotationMode::proposal;
     }},
    {"uda+imgrot",
     [](TrainConfig& c) {
       c.enable_uda = true;
       c.enable_rp = true;
       c.enable_cl = false;
       c.rotation_mode = RotationMode::image;
     }},
};

}  // namespace

AblationResult ablate(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                      int jobs, std::ostream* progress) {
  // Datasets are shared read-only across the grid; loading uses a config with
  // every task enabled so the target split is present for all variants.
  TrainConfig loader = base;
  loader.enable_uda = loader.enable_rp = loader.enable_cl = true;
  std::shared_ptr<const DatasetBundle> data = load_datasets(loader);

  struct Job {
    const VariantSpec* variant;
    std::uint64_t seed;
  };
  std::vector<Job> todo;
  for (const VariantSpec& v : kVariants)
    for (std::uint64_t s : seeds) todo.push_back({&v, s});

  AblationResult result;
  result.rows.resize(todo.size());

  std::atomic<std::size_t> next{0};
  std::mutex io_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const Job& job = todo[i];
      AblationRow row;
      row.variant = job.variant->name;
      row.seed = job.seed;
      try {
        TrainConfig c = base;
        job.variant->apply(c);
        c.seed = job.seed;
        c.out_dir = (fs::path(base.out_dir) /
                     (job.variant->name + "_seed" + std::to_string(job.seed)))
                        .string();
        Trainer trainer(c, data);
        row.target_map = trainer.run();
        row.ok = true;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
      if (progress) {
        std::lock_guard<std::mutex> lock(io_mutex);
        *progress << "  " << row.variant << " seed " << row.seed << ": "
                  << (row.ok ? fmt_real(row.target_map) : "FAILED: " + row.error) << "\n";
      }
      result.rows[i] = std::move(row);
    }
  };

  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();

  for (const VariantSpec& v : kVariants) {
    std::vector<double> maps;
    for (const AblationRow& row : result.rows)
      if (row.ok && row.variant == v.name) maps.push_back(row.target_map);
    double median = std::nan("");
    if (!maps.empty()) {
      std::sort(maps.begin(), maps.end());
      median = maps[maps.size() / 2];
      if (maps.size() % 2 == 0) median = (median + maps[maps.size() / 2 - 1]) / 2;
    }
    result.medians.emplace_back(v.name, median);
  }
  return result;
}

void write_ablation_csv(const std::string& path, const AblationResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ablation csv: " + path);
  out << "variant,seed,target_map,status\n";
  for (const AblationRow& row : result.rows)
    out << row.variant << "," << row.seed << ","
        << (row.ok ? fmt_real(row.target_map) : "") << ","
        << (row.ok ? "ok" : "failed: " + row.error) << "\n";
  for (const auto& [variant, median] : result.medians)
    out << variant << ",median," << (std::isnan(median) ? "" : fmt_real(median)) << ",\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace xdet
