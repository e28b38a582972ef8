#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "leformer/core/gradcheck.hpp"
#include "leformer/eval/complexity.hpp"
#include "leformer/eval/evaluate.hpp"
#include "leformer/model/leformer.hpp"

using namespace leformer;

TEST_CASE("width multiplier scales channels, rounded up to head multiples") {
  ModelConfig quarter = tiny_config(4).resolved();
  CHECK(quarter.stages[0].c == 8);
  CHECK(quarter.stages[1].c == 16);
  CHECK(quarter.stages[2].c == 40);
  CHECK(quarter.stages[3].c == 48);
  CHECK(quarter.decoder_dim == 48);

  ModelConfig eighth = tiny_config(8).resolved();
  CHECK(eighth.stages[0].c == 4);
  CHECK(eighth.stages[2].c == 20);
  CHECK(eighth.stages[3].c == 24);
  for (const auto& st : eighth.stages) CHECK(st.c % st.n == 0);
}

TEST_CASE("config validation") {
  ModelConfig bad;
  bad.ptl_stages = 5;
  CHECK_THROWS_AS(bad.validate(), ValueError);
  ModelConfig none;
  none.use_ce = none.use_te = false;
  CHECK_THROWS_AS(none.validate(), ValueError);
}

TEST_CASE("stage shape pipeline at 64x64 in both branches") {
  LeFormer<float> model(tiny_config(8), 0);
  Tensor<float> image({1, 3, 64, 64});
  LeFormer<float>::StageOutputs stages;
  auto logits = model.forward(image, stages);
  CHECK(logits.shape() == Shape{1, 2, 64, 64});
  const auto& cfg = model.config();
  for (int i = 0; i < 4; ++i) {
    const int64_t hw = 64 >> (i + 2);
    CHECK(stages.ce[i].shape() == Shape{1, cfg.stages[i].c, hw, hw});
    CHECK(stages.te[i].shape() == Shape{1, cfg.stages[i].c, hw, hw});
    CHECK(stages.fused[i].shape() == Shape{1, cfg.stages[i].c, hw, hw});
  }
  CHECK_THROWS_AS(model.forward(Tensor<float>({1, 3, 48, 48})), ValueError);
}

TEST_CASE("batch of two identical images gives identical per-image logits") {
  LeFormer<float> model(tiny_config(8), 3);
  Rng rng(4);
  Tensor<float> one({1, 3, 32, 32});
  for (auto& v : one.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  Tensor<float> two({2, 3, 32, 32});
  std::copy(one.values().begin(), one.values().end(), two.values().begin());
  std::copy(one.values().begin(), one.values().end(), two.values().begin() + one.numel());

  auto logits = model.forward(two);
  const int64_t per = logits.numel() / 2;
  for (int64_t i = 0; i < per; ++i) CHECK(logits.data()[i] == logits.data()[per + i]);
}

TEST_CASE("same seed reproduces bitwise-identical parameters") {
  LeFormer<float> a(tiny_config(8), 42), b(tiny_config(8), 42), c(tiny_config(8), 43);
  REQUIRE(a.params().size() == b.params().size());
  bool all_equal = true, any_diff_seed = false;
  for (size_t i = 0; i < a.params().size(); ++i) {
    if (a.params().entry(i).tensor.values() != b.params().entry(i).tensor.values())
      all_equal = false;
    if (a.params().entry(i).tensor.values() != c.params().entry(i).tensor.values())
      any_diff_seed = true;
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("model parameter totals equal the complexity analyzer exactly") {
  const std::vector<std::pair<std::string, ModelConfig>> cases = {
      {"full", ModelConfig{}},
      {"ce_only", ce_only_config()},
      {"te_only", te_only_config()},
      {"tiny", tiny_config(8)},
      {"no_msca", [] {
         ModelConfig c;
         c.use_msca = false;
         return c;
       }()},
  };
  for (const auto& [name, cfg] : cases) {
    INFO(name);
    LeFormer<float> model(cfg, 0);
    const auto report = count_macs(cfg, 256, 256);
    CHECK(model.params().count_params() == report.total_params());
  }
}

TEST_CASE("every learnable tensor receives a nonzero gradient") {
  // 64x64 keeps stage 4 at 2x2: with a single token the attention weights are
  // constant and K would legitimately see zero gradient
  LeFormer<double> model(tiny_config(8), 5);
  Rng rng(6);
  Tensor<double> image({1, 3, 64, 64});
  for (auto& v : image.values()) v = rng.uniform(0.0, 1.0);

  GradTape<double> tape;
  {
    GradTape<double>::Scope scope(tape);
    tape.backward(sum_all(model.forward(image)));
  }
  for (const auto& e : model.params()) {
    bool nonzero = false;
    for (double g : e.tensor.grad_values())
      if (g != 0.0) nonzero = true;
    INFO(e.name);
    CHECK(nonzero);
  }
}

TEST_CASE("a frozen instance supports concurrent read-only forward passes") {
  LeFormer<float> model(tiny_config(8), 11);
  Rng rng(12);
  Tensor<float> image({1, 3, 32, 32});
  for (auto& v : image.values()) v = static_cast<float>(rng.uniform(0.0, 1.0));
  const auto reference = model.forward(image).values();

  std::vector<std::vector<float>> results(4);
  std::vector<std::thread> threads;
  for (auto& slot : results)
    threads.emplace_back([&model, &image, &slot] { slot = model.forward(image).values(); });
  for (auto& t : threads) t.join();
  for (const auto& r : results) CHECK(r == reference);
}

TEST_CASE("tiny end-to-end loss gradient matches finite differences on samples") {
  LeFormer<double> model(tiny_config(8), 7);
  Rng rng(8);
  Tensor<double> image({1, 3, 32, 32});
  for (auto& v : image.values()) v = rng.uniform(0.0, 1.0);
  Tensor<double> probe_w({1, 2, 32, 32});
  for (auto& v : probe_w.values()) v = rng.uniform(-1.0, 1.0);

  GradTape<double> tape;
  {
    GradTape<double>::Scope scope(tape);
    tape.backward(sum_all(mul(model.forward(image), probe_w)));
  }

  auto loss_value = [&]() {
    typename GradTape<double>::Pause pause;
    auto logits = model.forward(image);
    double s = 0.0;
    for (int64_t i = 0; i < logits.numel(); ++i) s += logits.data()[i] * probe_w.data()[i];
    return s;
  };

  // spot-check three parameters from different subsystems
  const char* names[] = {"ce/stage1/msca/proj/weight", "te/stage2/block1/attn/q/weight",
                         "decoder/fuse/weight"};
  const double h = 1e-4;
  for (const char* name : names) {
    auto* p = model.params().find(name);
    REQUIRE(p != nullptr);
    Rng pick(fnv1a64(name));
    for (int rep = 0; rep < 3; ++rep) {
      const int64_t idx = pick.uniform_int(0, p->numel() - 1);
      const double orig = p->data()[idx];
      p->data()[idx] = orig + h;
      const double fp = loss_value();
      p->data()[idx] = orig - h;
      const double fm = loss_value();
      p->data()[idx] = orig;
      const double fd = (fp - fm) / (2 * h);
      const double ad = p->grad_values()[idx];
      const double denom = std::max({std::abs(fd), std::abs(ad), 1e-7});
      INFO(name << "[" << idx << "] autograd " << ad << " vs fd " << fd);
      CHECK(std::abs(fd - ad) / denom < 1e-4);
    }
  }
}
