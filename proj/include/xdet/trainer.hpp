#pragma once

#include <memory>
#include <string>
#include <vector>

#include "xdet/config.hpp"
#include "xdet/evaluation.hpp"
#include "xdet/model.hpp"
#include "xdet/optim.hpp"
#include "xdet/rng.hpp"

namespace xdet {

// Datasets shared read-only between runs (the ablation grid reuses them).
struct DatasetBundle {
  std::vector<Scene> source_train;
  std::vector<UnlabeledImage> target_train;  // images only; labels never loaded
  std::vector<Scene> target_test;            // evaluation only
};

std::shared_ptr<const DatasetBundle> load_datasets(const TrainConfig& config);

// Training loop: one source scene and one target image per step, one
// rotation draw and one augmentation draw per enabled task per domain, one
// backward pass, one optimizer step. Randomness comes from per-purpose
// streams derived from the master seed, so disabling a task never shifts the
// draws of another.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& config,
                   std::shared_ptr<const DatasetBundle> data = nullptr);

  LossBreakdown train_step();

  // Runs config.steps steps; writes metrics.csv, checkpoint.bin, the resolved
  // config snapshot, final target-test predictions and per-class AP table
  // under config.out_dir. Returns the final target mAP.
  double run();

  double evaluate_target_map(std::vector<PredRecord>* predictions_out = nullptr) const;

  DetectionModel& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  int step_index() const { return step_; }

 private:
  struct Cycler {
    std::vector<std::size_t> order;
    std::size_t pos = 0;
    std::size_t next(Rng& rng, std::size_t n);
  };

  TrainConfig config_;
  std::shared_ptr<const DatasetBundle> data_;
  DetectionModel model_;
  SgdState sgd_;
  int step_ = 0;

  Rng data_source_rng_;
  Rng data_target_rng_;
  Rng rotation_rng_;
  Rng augment_rng_;
  Cycler source_cycler_;
  Cycler target_cycler_;

  bool needs_target() const {
    return config_.enable_uda || config_.enable_rp || config_.enable_cl;
  }
};

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  double target_map = 0;
  bool ok = false;
  std::string error;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<std::pair<std::string, double>> medians;  // per variant, failures excluded
};

// Runs {source_only, uda, uda+rp, uda+cl, uda+rp+cl, uda+imgrot} over the
// given seeds with shared datasets, `jobs` runs in parallel (each run is
// single-threaded and deterministic). Per-run failures are recorded and the
// grid continues.
AblationResult ablate(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                      int jobs, std::ostream* progress = nullptr);

void write_ablation_csv(const std::string& path, const AblationResult& result);

}  // namespace xdet
