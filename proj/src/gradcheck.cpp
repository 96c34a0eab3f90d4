#include "xdet/gradcheck.hpp"

#include <cmath>
#include <iomanip>

#include "xdet/objectives.hpp"
#include "xdet/rng.hpp"
#include "xdet/scenegen.hpp"

namespace xdet {

GradCheckResult check_gradients(const std::string& name, const std::vector<Tensor>& params,
                                const std::function<Tensor()>& forward) {
  constexpr double eps = 1e-4;

  // Analytic pass.
  for (const Tensor& p : params) {
    p.node()->ensure_grad();
    std::fill(p.node()->grad.begin(), p.node()->grad.end(), real(0));
  }
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(forward());
  }
  std::vector<std::vector<real>> analytic;
  for (const Tensor& p : params) analytic.push_back(p.grad());

  GradCheckResult result;
  result.name = name;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& values = params[pi].node()->value;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const real saved = values[i];
      values[i] = saved + static_cast<real>(eps);
      const double f_plus = static_cast<double>(forward().item());
      values[i] = saved - static_cast<real>(eps);
      const double f_minus = static_cast<double>(forward().item());
      values[i] = saved;

      const double fd = (f_plus - f_minus) / (2 * eps);
      const double an = static_cast<double>(analytic[pi][i]);
      const double mag = std::max(std::abs(an), std::abs(fd));
      double err;
      if (mag < 1e-6) {
        // Near zero the absolute error must stay below 1e-6; report it on
        // the relative scale so a violation fails the 1e-4 gate.
        err = std::abs(an - fd) < 1e-6 ? 0.0 : 1.0;
      } else {
        err = std::abs(an - fd) / mag;
      }
      result.max_rel_err = std::max(result.max_rel_err, err);
      ++result.entries;
    }
  }
  for (const Tensor& p : params)
    std::fill(p.node()->grad.begin(), p.node()->grad.end(), real(0));
  return result;
}

namespace {

Tensor rand_tensor(std::vector<int> shape, Rng& rng, real lo = -1, real hi = 1) {
  Tensor t = Tensor::zeros(std::move(shape), true);
  for (real& v : t.values()) v = static_cast<real>(rng.uniform(lo, hi));
  return t;
}

bool report(std::ostream& out, const GradCheckResult& r, bool& all_ok) {
  out << "  " << std::left << std::setw(28) << r.name << " max rel err "
      << std::scientific << std::setprecision(3) << r.max_rel_err << "  ("
      << r.entries << " entries)" << (r.ok() ? "" : "  FAIL") << "\n";
  all_ok = all_ok && r.ok();
  return r.ok();
}

void op_checks(std::ostream& out, bool& all_ok) {
  Rng rng(20240811, "gradcheck-ops");

  {
    Tensor a = rand_tensor({3, 4}, rng), b = rand_tensor({3, 4}, rng);
    report(out, check_gradients("op add", {a, b},
                                [&] { return mean_all(add(a, b)); }),
           all_ok);
    report(out, check_gradients("op sub", {a, b},
                                [&] { return mean_all(mul(sub(a, b), sub(a, b))); }),
           all_ok);
    report(out, check_gradients("op mul", {a, b},
                                [&] { return sum(mul(a, b)); }),
           all_ok);
  }
  {
    Tensor a = rand_tensor({3, 4}, rng), bias = rand_tensor({4}, rng);
    report(out, check_gradients("op add broadcast", {a, bias},
                                [&] { return sum(mul(add(a, bias), add(a, bias))); }),
           all_ok);
    report(out, check_gradients("op mul broadcast", {a, bias},
                                [&] { return sum(mul(mul(a, bias), a)); }),
           all_ok);
  }
  {
    Tensor a = rand_tensor({3, 5}, rng), b = rand_tensor({5, 2}, rng);
    report(out, check_gradients("op matmul", {a, b},
                                [&] { return mean_all(mul(matmul(a, b), matmul(a, b))); }),
           all_ok);
  }
  {
    Tensor x = rand_tensor({6, 5, 2}, rng);
    Tensor w = rand_tensor({3, 3, 2, 3}, rng, -0.5, 0.5);
    Tensor b = rand_tensor({3}, rng, -0.1, 0.1);
    report(out, check_gradients("op conv2d stride1", {x, w, b},
                                [&] { return mean_all(mul(conv2d(x, w, b, 1), conv2d(x, w, b, 1))); }),
           all_ok);
    report(out, check_gradients("op conv2d stride2", {x, w, b},
                                [&] { return mean_all(conv2d(x, w, b, 2)); }),
           all_ok);
  }
  {
    // Keep relu inputs away from the kink at 0.
    Tensor x = Tensor::from({6}, {real(-1.3), real(-0.4), real(0.2), real(0.9), real(1.7),
                                  real(-2.2)}, true);
    report(out, check_gradients("op relu", {x},
                                [&] { return sum(mul(relu(x), relu(x))); }),
           all_ok);
  }
  {
    Tensor x = rand_tensor({7}, rng, -3, 3);
    report(out, check_gradients("op sigmoid", {x}, [&] { return sum(sigmoid(x)); }), all_ok);
    report(out, check_gradients("op softplus", {x}, [&] { return sum(softplus(x)); }), all_ok);
    report(out, check_gradients("op grad_reverse", {x},
                                [&] { return sum(mul(grad_reverse(x, real(0.7)), x)); }),
           all_ok);
  }
  {
    Tensor x = rand_tensor({5}, rng, 0.2, 3.0);
    report(out, check_gradients("op log", {x}, [&] { return sum(log_t(x)); }), all_ok);
  }
  {
    Tensor x = rand_tensor({3, 4}, rng, -2, 2);
    Tensor w = rand_tensor({3, 4}, rng);
    report(out, check_gradients("op softmax", {x, w},
                                [&] { return sum(mul(softmax(x), w)); }),
           all_ok);
    report(out, check_gradients("op log_softmax", {x, w},
                                [&] { return sum(mul(log_softmax(x), w)); }),
           all_ok);
  }
  {
    Tensor x = rand_tensor({4, 3, 2}, rng);
    report(out, check_gradients("op sum", {x}, [&] { return sum(x); }), all_ok);
    report(out, check_gradients("op mean_all", {x}, [&] { return mean_all(x); }), all_ok);
    Tensor w = rand_tensor({2}, rng);
    report(out, check_gradients("op global_mean", {x, w},
                                [&] { return sum(mul(global_mean(x), w)); }),
           all_ok);
    report(out, check_gradients("op reshape", {x},
                                [&] { return mean_all(mul(reshape(x, {6, 4}), reshape(x, {6, 4}))); }),
           all_ok);
  }
  {
    Tensor x = rand_tensor({4, 3, 5}, rng);
    std::vector<std::vector<int>> groups = {{0, 1, 4}, {5}, {2, 6, 7, 11}};
    Tensor w = rand_tensor({3, 5}, rng);
    report(out, check_gradients("op roi_mean", {x, w},
                                [&] { return sum(mul(roi_mean(x, groups), w)); }),
           all_ok);
  }
  {
    Tensor a = rand_tensor({4}, rng), b = rand_tensor({4}, rng), c = rand_tensor({4}, rng);
    report(out, check_gradients("op stack0", {a, b, c},
                                [&] {
                                  Tensor s = stack0({a, b, c});
                                  return sum(mul(s, s));
                                }),
           all_ok);
  }
  {
    Tensor x = rand_tensor({3}, rng);
    report(out, check_gradients("op scale", {x}, [&] { return sum(scale(x, real(-2.5))); }),
           all_ok);
  }
}

void loss_checks(std::ostream& out, bool& all_ok) {
  // Small scenes keep the whole-parameter sweep fast.
  const Scene src = generate_scene(101, Domain::source);
  const Scene tgt = generate_scene(101, Domain::target);
  ImageBuffer src_small(32, 32), tgt_small(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) {
        src_small.at(y, x, c) = src.image.at(y * 2, x * 2, c);
        tgt_small.at(y, x, c) = tgt.image.at(y * 2, x * 2, c);
      }
  std::vector<Annotation> anns;
  for (const Annotation& a : src.annotations) {
    Annotation scaled = a;
    scaled.box = {a.box.x_min / 2, a.box.y_min / 2, a.box.x_max / 2, a.box.y_max / 2};
    anns.push_back(scaled);
  }

  DetectionModel model(7);
  std::vector<Tensor> params = model.params();
  const int top_k = 8;

  // Freeze every data-dependent selection at the unperturbed parameters.
  std::vector<int> fixed_anchors;
  DetectionMatchPlan plan;
  {
    DetectionPass pass = forward_detection(model, src_small, top_k);
    for (const Proposal& p : pass.props.items) fixed_anchors.push_back(p.anchor_id);
    plan = plan_detection_match(pass, anns);
  }
  report(out,
         check_gradients("loss detection", params,
                         [&] {
                           DetectionPass pass =
                               forward_detection(model, src_small, top_k, &fixed_anchors);
                           return detection_loss(pass, anns, &plan);
                         }),
         all_ok);

  report(out,
         check_gradients("loss uda", params,
                         [&] {
                           Tensor fs = model.extract_features(src_small);
                           Tensor ft = model.extract_features(tgt_small);
                           return uda_loss(model, fs, ft, real(1));
                         }),
         all_ok);

  const ImageBuffer src_rot = rotate_image(src_small, QuarterTurn::deg90);
  const ImageBuffer tgt_rot = rotate_image(tgt_small, QuarterTurn::deg270);
  std::vector<int> rot_anchors_s, rot_anchors_t;
  {
    RotationPass ps = forward_rotation(model, src_rot, RotationMode::proposal, top_k);
    for (const Proposal& p : ps.props.items) rot_anchors_s.push_back(p.anchor_id);
    RotationPass pt = forward_rotation(model, tgt_rot, RotationMode::proposal, top_k);
    for (const Proposal& p : pt.props.items) rot_anchors_t.push_back(p.anchor_id);
  }
  report(out,
         check_gradients("loss rotation proprot", params,
                         [&] {
                           RotationPass ps = forward_rotation(model, src_rot,
                                                              RotationMode::proposal, top_k,
                                                              &rot_anchors_s);
                           RotationPass pt = forward_rotation(model, tgt_rot,
                                                              RotationMode::proposal, top_k,
                                                              &rot_anchors_t);
                           return rotation_loss(ps, QuarterTurn::deg90, pt, QuarterTurn::deg270,
                                                RotationMode::proposal);
                         }),
         all_ok);

  report(out,
         check_gradients("loss rotation imgrot", params,
                         [&] {
                           RotationPass ps =
                               forward_rotation(model, src_rot, RotationMode::image, top_k);
                           RotationPass pt =
                               forward_rotation(model, tgt_rot, RotationMode::image, top_k);
                           return rotation_loss(ps, QuarterTurn::deg90, pt, QuarterTurn::deg270,
                                                RotationMode::image);
                         }),
         all_ok);

  // Consistency: freeze boxes and pseudo-labels, pick sigma so the gate has
  // mixed outcomes with a margin much wider than the FD step.
  std::vector<BoundingBox> boxes;
  std::vector<std::vector<real>> probs;
  {
    DetectionPass pass = forward_detection(model, src_small, top_k);
    for (const Proposal& p : pass.props.items) boxes.push_back(p.box);
    probs = class_probability_rows(pass.cls_logits);
  }
  std::vector<real> maxes;
  for (const auto& row : probs) maxes.push_back(row[argmax_index(row)]);
  std::sort(maxes.begin(), maxes.end());
  const real sigma = maxes[maxes.size() / 2];  // roughly half gated out
  AugmentationPolicy policy;
  policy.magnitude = real(0.5);
  report(out,
         check_gradients("loss consistency", params,
                         [&] {
                           ConsistencyTerm term = consistency_loss_one_image(
                               model, boxes, probs, src_small, policy, 33, sigma);
                           return term.loss;
                         }),
         all_ok);
}

}  // namespace

bool run_full_gradcheck(std::ostream& out) {
  bool all_ok = true;
  out << "per-op gradient checks (central differences, eps 1e-4):\n";
  op_checks(out, all_ok);
  out << "loss-term gradient checks:\n";
  loss_checks(out, all_ok);
  out << (all_ok ? "gradcheck: all checks below 1e-4\n" : "gradcheck: FAILURES above\n");
  return all_ok;
}

}  // namespace xdet
