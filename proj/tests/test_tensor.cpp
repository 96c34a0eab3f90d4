#include "xdet/tensor.hpp"

#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "xdet/checkpoint.hpp"
#include "xdet/gradcheck.hpp"
#include "xdet/optim.hpp"
#include "xdet/rng.hpp"

using namespace xdet;

TEST_CASE("softmax of equal logits is uniform") {
  const Tensor p = softmax(Tensor::from({4}, {0, 0, 0, 0}));
  for (real v : p.values()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(1, "softmax-rows");
  Tensor x = Tensor::zeros({5, 7});
  for (real& v : x.values()) v = static_cast<real>(rng.uniform(-10, 10));
  const Tensor p = softmax(x);
  for (int r = 0; r < 5; ++r) {
    real s = 0;
    for (int c = 0; c < 7; ++c) s += p.values()[r * 7 + c];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("relu forward and gradient at a negative input") {
  Tensor x = Tensor::from({1}, {real(-1.5)}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor y = sum(relu(x));
    CHECK(y.item() == real(0));
    tape.backward(y);
  }
  CHECK(x.grad()[0] == real(0));
}

TEST_CASE("grad_reverse is identity forward, negation backward") {
  Tensor x = Tensor::from({3}, {real(0.5), real(-2), real(7)}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor y = grad_reverse(x, real(1));
    CHECK(y.values() == x.values());  // bit-identical forward
    tape.backward(sum(y));
  }
  for (real g : x.grad()) CHECK(g == real(-1));
}

TEST_CASE("grad_reverse with beta 0 blocks gradients entirely") {
  Tensor x = Tensor::from({2}, {real(1), real(2)}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(grad_reverse(x, real(0))));
  }
  CHECK(x.grad()[0] == real(0));
  CHECK(x.grad()[1] == real(0));
}

TEST_CASE("backward spec examples") {
  SUBCASE("sum of squares") {
    Tensor w = Tensor::from({2}, {1, 2}, true);
    Tape tape;
    {
      TapeScope scope(tape);
      tape.backward(sum(mul(w, w)));
    }
    CHECK(w.grad()[0] == doctest::Approx(2));
    CHECK(w.grad()[1] == doctest::Approx(4));
  }
  SUBCASE("mean over four elements") {
    Tensor w = Tensor::from({4}, {1, 2, 3, 4}, true);
    Tape tape;
    {
      TapeScope scope(tape);
      tape.backward(mean_all(w));
    }
    for (real g : w.grad()) CHECK(g == doctest::Approx(0.25));
  }
}

TEST_CASE("backward rejects non-scalar losses and empty tapes") {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor y = mul(w, w);
    CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  }
  Tape empty;
  CHECK_THROWS_AS(empty.backward(Tensor::scalar(1)), std::logic_error);
}

TEST_CASE("backward accumulates linearly across separate tapes") {
  Rng rng(2, "linearity");
  Tensor w = Tensor::zeros({6}, true);
  for (real& v : w.values()) v = static_cast<real>(rng.uniform(-1, 1));

  auto l1 = [&] { return sum(mul(w, w)); };
  auto l2 = [&] { return mean_all(mul(w, Tensor::from({6}, {1, 2, 3, 4, 5, 6}))); };

  // backward(L1 + L2) in one tape
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(add(l1(), l2()));
  }
  const std::vector<real> combined = w.grad();
  std::fill(w.node()->grad.begin(), w.node()->grad.end(), real(0));

  // two separate backwards accumulate into the same grad buffer
  {
    Tape t1;
    TapeScope scope(t1);
    t1.backward(l1());
  }
  {
    Tape t2;
    TapeScope scope(t2);
    t2.backward(l2());
  }
  for (std::size_t i = 0; i < combined.size(); ++i)
    CHECK(w.grad()[i] == doctest::Approx(combined[i]).epsilon(1e-12));
}

TEST_CASE("tape is cleared after backward") {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = sum(mul(w, w));
    CHECK(tape.size() > 0);
    tape.backward(loss);
  }
  CHECK(tape.size() == 0);
}

TEST_CASE("ops outside a tape do not record") {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  Tensor y = mul(w, w);  // no TapeScope
  CHECK(!y.requires_grad());
}

TEST_CASE("shape mismatches name both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({4});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,3]"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[4]"), std::invalid_argument);
}

TEST_CASE("conv2d output shapes follow the stride arithmetic") {
  Tensor w = Tensor::zeros({3, 3, 3, 8});
  Tensor b = Tensor::zeros({8});
  CHECK(conv2d(Tensor::zeros({64, 64, 3}), w, b, 2).shape() == std::vector<int>{32, 32, 8});
  CHECK(conv2d(Tensor::zeros({64, 64, 3}), w, b, 1).shape() == std::vector<int>{64, 64, 8});
  CHECK(conv2d(Tensor::zeros({7, 5, 3}), w, b, 2).shape() == std::vector<int>{4, 3, 8});
}

TEST_CASE("roi_mean over all cells equals global_mean exactly") {
  Rng rng(3, "roi-global");
  Tensor x = Tensor::zeros({5, 4, 6});
  for (real& v : x.values()) v = static_cast<real>(rng.uniform(-2, 2));
  std::vector<int> all_cells(20);
  for (int i = 0; i < 20; ++i) all_cells[i] = i;
  const Tensor pooled = roi_mean(x, {all_cells});
  const Tensor global = global_mean(x);
  for (int c = 0; c < 6; ++c) CHECK(pooled.values()[c] == global.values()[c]);
}

TEST_CASE("one_hot basics") {
  const Tensor t = one_hot(2, 4);
  CHECK(t.values() == std::vector<real>{0, 0, 1, 0});
  CHECK(!t.requires_grad());
  CHECK_THROWS_AS(one_hot(4, 4), std::invalid_argument);
}

TEST_CASE("sgd_step spec examples") {
  SUBCASE("single step without momentum") {
    std::vector<Tensor> params = {Tensor::from({1}, {1}, true)};
    params[0].node()->ensure_grad();
    params[0].node()->grad[0] = 1;
    SgdState sgd;
    sgd.lr = real(0.1);
    sgd.momentum = 0;
    sgd_step(params, sgd);
    CHECK(params[0].values()[0] == doctest::Approx(0.9));
    CHECK(params[0].grad()[0] == real(0));  // zeroed
  }
  SUBCASE("two steps with momentum") {
    std::vector<Tensor> params = {Tensor::from({1}, {0}, true)};
    SgdState sgd;
    sgd.lr = real(0.1);
    sgd.momentum = real(0.9);
    for (int step = 0; step < 2; ++step) {
      params[0].node()->ensure_grad();
      params[0].node()->grad[0] = 1;
      sgd_step(params, sgd);
    }
    CHECK(params[0].values()[0] == doctest::Approx(-0.29));
  }
  SUBCASE("zero gradients and zero velocity leave parameters unchanged") {
    std::vector<Tensor> params = {Tensor::from({3}, {1, 2, 3}, true)};
    SgdState sgd;
    sgd_step(params, sgd);
    CHECK(params[0].values() == std::vector<real>{1, 2, 3});
  }
}

TEST_CASE("checkpoint round trip and error paths") {
  Rng rng(4, "ckpt");
  NamedParams params = {{"a.w", Tensor::zeros({3, 2}, true)}, {"b.b", Tensor::zeros({5}, true)}};
  for (auto& [name, t] : params)
    for (real& v : t.values()) v = static_cast<real>(rng.uniform(-3, 3));

  const std::string path =
      (std::filesystem::temp_directory_path() / "xdet_ckpt_test.bin").string();
  save_checkpoint(path, params);

  NamedParams loaded = {{"a.w", Tensor::zeros({3, 2}, true)}, {"b.b", Tensor::zeros({5}, true)}};
  load_checkpoint(path, loaded);
  for (std::size_t i = 0; i < params.size(); ++i)
    CHECK(loaded[i].second.values() == params[i].second.values());  // bit-exact

  NamedParams wrong_name = {{"a.w", Tensor::zeros({3, 2}, true)},
                            {"c.b", Tensor::zeros({5}, true)}};
  CHECK_THROWS_WITH_AS(load_checkpoint(path, wrong_name), doctest::Contains("c.b"),
                       std::runtime_error);
  NamedParams wrong_shape = {{"a.w", Tensor::zeros({2, 3}, true)},
                             {"b.b", Tensor::zeros({5}, true)}};
  CHECK_THROWS_AS(load_checkpoint(path, wrong_shape), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("finite-difference suite over every op and loss term") {
  std::ostringstream sink;
  const bool all_ok = run_full_gradcheck(sink);
  INFO(sink.str());
  CHECK(all_ok);
}
