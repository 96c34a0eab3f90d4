#include "xdet/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace xdet {

using nlohmann::json;

void write_predictions_jsonl(const std::string& path, const std::vector<PredRecord>& preds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictions: " + path);
  for (const PredRecord& p : preds) {
    json j = {{"image_id", p.image_id},
              {"class_id", p.class_id},
              {"box", {p.box.x_min, p.box.y_min, p.box.x_max, p.box.y_max}},
              {"confidence", p.confidence}};
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<PredRecord> read_predictions_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions: " + path);
  std::vector<PredRecord> preds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    PredRecord p;
    p.image_id = j.at("image_id").get<std::int64_t>();
    p.class_id = j.at("class_id").get<int>();
    p.box = {j.at("box").at(0).get<real>(), j.at("box").at(1).get<real>(),
             j.at("box").at(2).get<real>(), j.at("box").at(3).get<real>()};
    p.confidence = j.at("confidence").get<real>();
    preds.push_back(p);
  }
  return preds;
}

std::vector<GtInstance> ground_truth_from_index(const std::string& index_path) {
  std::vector<GtInstance> gts;
  for (const IndexEntry& e : load_index(index_path))
    for (const Annotation& a : e.annotations) gts.push_back({e.id, a.class_id, a.box});
  return gts;
}

double average_precision(std::vector<PredRecord> dets, const std::vector<GtInstance>& gts,
                         real iou_threshold) {
  const int num_gt = static_cast<int>(gts.size());
  if (num_gt == 0)
    throw std::invalid_argument("average_precision: undefined with zero ground truths");
  if (dets.empty()) return 0.0;

  // Rank: confidence desc, ties by image id then input order.
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].confidence != dets[b].confidence)
      return dets[a].confidence > dets[b].confidence;
    return dets[a].image_id < dets[b].image_id;
  });

  std::map<std::int64_t, std::vector<std::size_t>> gt_by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) gt_by_image[gts[g].image_id].push_back(g);
  std::vector<char> gt_matched(gts.size(), 0);

  int tp = 0, fp = 0;
  std::vector<double> recall, precision;
  for (std::size_t rank : order) {
    const PredRecord& d = dets[rank];
    real best_iou = 0;
    std::size_t best_gt = gts.size();
    auto it = gt_by_image.find(d.image_id);
    if (it != gt_by_image.end()) {
      for (std::size_t g : it->second) {
        if (gt_matched[g]) continue;
        const real v = iou(d.box, gts[g].box);
        if (v > best_iou) {
          best_iou = v;
          best_gt = g;
        }
      }
    }
    if (best_gt < gts.size() && best_iou >= iou_threshold) {
      gt_matched[best_gt] = 1;
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / num_gt);
    precision.push_back(static_cast<double>(tp) / (tp + fp));
  }

  // Area under the monotone (running max from the right) envelope.
  double ap = 0, prev_recall = 0, env = 0;
  std::vector<double> envelope(precision.size());
  for (std::size_t i = precision.size(); i-- > 0;) {
    env = std::max(env, precision[i]);
    envelope[i] = env;
  }
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * envelope[i];
    prev_recall = recall[i];
  }
  return ap;
}

EvalResult mean_average_precision(const std::vector<PredRecord>& preds,
                                  const std::vector<GtInstance>& gts, int num_classes,
                                  real iou_threshold) {
  for (const PredRecord& p : preds)
    if (p.class_id < 0 || p.class_id >= num_classes)
      throw std::invalid_argument("mean_average_precision: unknown class id " +
                                  std::to_string(p.class_id));
  for (const GtInstance& g : gts)
    if (g.class_id < 0 || g.class_id >= num_classes)
      throw std::invalid_argument("mean_average_precision: unknown class id " +
                                  std::to_string(g.class_id));

  EvalResult result;
  double ap_sum = 0;
  int defined = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<PredRecord> class_dets;
    std::vector<GtInstance> class_gts;
    for (const PredRecord& p : preds)
      if (p.class_id == c) class_dets.push_back(p);
    for (const GtInstance& g : gts)
      if (g.class_id == c) class_gts.push_back(g);
    if (class_gts.empty()) {
      result.undefined_classes.push_back(c);
      continue;
    }
    ClassAp entry;
    entry.class_id = c;
    entry.num_gt = static_cast<int>(class_gts.size());
    entry.num_det = static_cast<int>(class_dets.size());
    entry.ap = average_precision(std::move(class_dets), class_gts, iou_threshold);
    ap_sum += entry.ap;
    ++defined;
    result.per_class.push_back(entry);
  }
  result.map = defined > 0 ? ap_sum / defined : 0.0;
  return result;
}

namespace {

const char* class_label(int c) {
  return (c >= 0 && c < kNumClasses) ? kClassNames[c] : "?";
}

}  // namespace

void write_eval_csv(const std::string& path, const EvalResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write eval csv: " + path);
  out << "# all-points AP, IoU threshold 0.5\n";
  out << "class,AP\n";
  for (const ClassAp& c : result.per_class)
    out << class_label(c.class_id) << "," << c.ap << "\n";
  out << "mAP," << result.map << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string format_eval_table(const EvalResult& result) {
  std::ostringstream os;
  os << "class      AP       (#gt, #det)\n";
  for (const ClassAp& c : result.per_class) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%-10s %.4f   (%d, %d)\n", class_label(c.class_id), c.ap,
                  c.num_gt, c.num_det);
    os << buf;
  }
  for (int c : result.undefined_classes)
    os << class_label(c) << "   (no ground truth instances; excluded from mAP)\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "mAP        %.4f\n", result.map);
  os << buf;
  return os.str();
}

}  // namespace xdet
