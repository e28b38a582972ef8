#include <catch2/catch_amalgamated.hpp>

#include "leformer/core/gradcheck.hpp"
#include "leformer/eval/evaluate.hpp"
#include "leformer/model/blocks.hpp"
#include "oracles/reference_ops.hpp"

using namespace leformer;

namespace {

template <typename T>
void zero_params(ParamStore<T>& ps, std::string_view prefix = "") {
  for (auto& e : ps) {
    if (!prefix.empty() && e.name.rfind(prefix, 0) != 0) continue;
    std::fill(e.tensor.values().begin(), e.tensor.values().end(), T(0));
  }
}

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

}  // namespace

TEST_CASE("CBAM zero-weight case gives 0.25x") {
  ParamStore<double> ps;
  Initializer init(0);
  Cbam<double> cbam(ps, init, "cbam", 8, 4);
  zero_params(ps);
  Rng rng(1);
  auto x = random_tensor<double>({2, 8, 5, 5}, rng, 0.1, 1.0);
  auto y = cbam.forward(x);
  REQUIRE(y.shape() == x.shape());
  for (int64_t i = 0; i < x.numel(); ++i)
    CHECK_THAT(y.data()[i], Catch::Matchers::WithinAbs(0.25 * x.data()[i], 1e-12));
}

TEST_CASE("CBAM output shape and reduction precondition") {
  ParamStore<float> ps;
  Initializer init(0);
  Cbam<float> cbam(ps, init, "cbam", 128, 16);
  Tensor<float> x({1, 128, 16, 16});
  CHECK(cbam.forward(x).shape() == Shape{1, 128, 16, 16});
  ParamStore<float> ps2;
  CHECK_THROWS_AS(Cbam<float>(ps2, init, "c", 8, 16), ValueError);
}

TEST_CASE("CBAM channel attention matches a hand-rolled pool/MLP/sigmoid oracle") {
  ParamStore<double> ps;
  Initializer init(5);
  Cbam<double> cbam(ps, init, "cbam", 8, 4);
  Rng rng(9);
  auto x = random_tensor<double>({1, 8, 4, 4}, rng);

  auto got = cbam.channel_attention(x);

  const auto& w1 = *ps.find("cbam/fc1/weight");
  const auto& b1 = *ps.find("cbam/fc1/bias");
  const auto& w2 = *ps.find("cbam/fc2/weight");
  const auto& b2 = *ps.find("cbam/fc2/bias");
  const int64_t hidden = w1.dim(0);
  auto mlp = [&](const std::vector<double>& in) {
    std::vector<double> h(hidden, 0.0), out(8, 0.0);
    for (int64_t i = 0; i < hidden; ++i) {
      double s = b1.data()[i];
      for (int64_t j = 0; j < 8; ++j) s += w1.at({i, j}) * in[j];
      h[i] = s * 0.5 * (1.0 + std::erf(s / std::sqrt(2.0)));  // exact GELU
    }
    for (int64_t i = 0; i < 8; ++i) {
      double s = b2.data()[i];
      for (int64_t j = 0; j < hidden; ++j) s += w2.at({i, j}) * h[j];
      out[i] = s;
    }
    return out;
  };
  std::vector<double> avg(8, 0.0), mx(8, -1e300);
  for (int64_t c = 0; c < 8; ++c)
    for (int64_t i = 0; i < 16; ++i) {
      const double v = x.data()[c * 16 + i];
      avg[c] += v / 16.0;
      mx[c] = std::max(mx[c], v);
    }
  const auto a = mlp(avg), m = mlp(mx);
  for (int64_t c = 0; c < 8; ++c) {
    const double want = 1.0 / (1.0 + std::exp(-(a[c] + m[c])));
    CHECK_THAT(got.at({0, c}), Catch::Matchers::WithinAbs(want, 1e-12));
  }
}

TEST_CASE("MSCA residual identity with zero conv weights") {
  ParamStore<double> ps;
  Initializer init(0);
  Msca<double> msca(ps, init, "msca", 8, 4);
  zero_params(ps, "msca/proj");
  Rng rng(3);
  auto x = random_tensor<double>({1, 8, 6, 6}, rng);
  auto y = msca.forward(x);
  for (int64_t i = 0; i < x.numel(); ++i)
    CHECK_THAT(y.data()[i], Catch::Matchers::WithinAbs(x.data()[i], 1e-12));
}

TEST_CASE("MSCA is shape preserving") {
  ParamStore<float> ps;
  Initializer init(1);
  Msca<float> msca(ps, init, "msca", 32, 16);
  Tensor<float> x({1, 32, 16, 16});
  CHECK(msca.forward(x).shape() == Shape{1, 32, 16, 16});
}

TEST_CASE("MSCA dilated branches match the nested-loop oracle") {
  ParamStore<double> ps;
  Initializer init(2);
  Msca<double> msca(ps, init, "msca", 4, 4);
  Rng rng(4);
  auto x = random_tensor<double>({1, 4, 8, 8}, rng);
  for (int d = 1; d <= 4; ++d) {
    const auto& conv = msca.dilated_branch(d - 1);
    auto got = conv.forward(x);
    auto want = oracle::conv2d(x.values(), 1, 4, 8, 8, conv.weight().values(), 4, 3, 3,
                               conv.bias().values(), 1, 1, d, d, d, d, 4);
    REQUIRE(got.shape() == Shape{1, 4, 8, 8});
    for (int64_t i = 0; i < got.numel(); ++i)
      CHECK_THAT(got.data()[i], Catch::Matchers::WithinAbs(want[i], 1e-12));
  }
}

TEST_CASE("efficient attention equals dense oracle for R=1 identity projections") {
  const int64_t c = 4, h = 4, w = 4, n = h * w;
  ParamStore<double> ps;
  Initializer init(0);
  EfficientSelfAttention<double> esa(ps, init, "attn", c, 1, 1);
  // identity projections, zero biases
  for (const char* name : {"attn/q", "attn/k", "attn/v", "attn/proj"}) {
    auto* wt = ps.find(std::string(name) + "/weight");
    std::fill(wt->values().begin(), wt->values().end(), 0.0);
    for (int64_t i = 0; i < c; ++i) wt->at_mut({i, i}) = 1.0;
    zero_params(ps, std::string(name) + "/bias");
  }
  Rng rng(6);
  auto x = random_tensor<double>({1, n, c}, rng);
  auto got = esa.forward(x, h, w);
  auto want = oracle::dense_attention(x.values(), x.values(), x.values(), n, n, c);
  for (int64_t i = 0; i < got.numel(); ++i)
    CHECK_THAT(got.data()[i], Catch::Matchers::WithinAbs(want[i], 1e-9));
}

TEST_CASE("efficient attention with random weights matches a loop oracle") {
  const int64_t c = 6, heads = 2, h = 4, w = 4, n = h * w;
  ParamStore<double> ps;
  Initializer init(8);
  EfficientSelfAttention<double> esa(ps, init, "attn", c, heads, 1);
  Rng rng(10);
  auto x = random_tensor<double>({1, n, c}, rng);
  auto got = esa.forward(x, h, w);

  auto apply_linear = [&](const char* name, const std::vector<double>& in) {
    const auto& wt = *ps.find(std::string("attn/") + name + "/weight");
    const auto& bs = *ps.find(std::string("attn/") + name + "/bias");
    std::vector<double> out(static_cast<size_t>(n * c), 0.0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t o = 0; o < c; ++o) {
        double s = bs.data()[o];
        for (int64_t j = 0; j < c; ++j) s += wt.at({o, j}) * in[i * c + j];
        out[i * c + o] = s;
      }
    return out;
  };
  const auto q = apply_linear("q", x.values());
  const auto k = apply_linear("k", x.values());
  const auto v = apply_linear("v", x.values());
  const int64_t dh = c / heads;
  std::vector<double> mixed(static_cast<size_t>(n * c), 0.0);
  for (int64_t hd = 0; hd < heads; ++hd) {
    std::vector<double> qh(n * dh), kh(n * dh), vh(n * dh);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t d = 0; d < dh; ++d) {
        qh[i * dh + d] = q[i * c + hd * dh + d];
        kh[i * dh + d] = k[i * c + hd * dh + d];
        vh[i * dh + d] = v[i * c + hd * dh + d];
      }
    auto oh = oracle::dense_attention(qh, kh, vh, n, n, dh);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t d = 0; d < dh; ++d) mixed[i * c + hd * dh + d] = oh[i * dh + d];
  }
  const auto want = apply_linear("proj", mixed);
  for (int64_t i = 0; i < got.numel(); ++i)
    CHECK_THAT(got.data()[i], Catch::Matchers::WithinAbs(want[i], 1e-9));
}

TEST_CASE("sequence reduction shortens K/V and attention weights sum to 1") {
  const int64_t c = 8, heads = 2, h = 8, w = 8, n = h * w, r = 4;
  ParamStore<double> ps;
  Initializer init(12);
  EfficientSelfAttention<double> esa(ps, init, "attn", c, heads, r);
  Rng rng(14);
  auto x = random_tensor<double>({2, n, c}, rng);
  Tensor<double> weights;
  auto y = esa.forward(x, h, w, &weights);
  CHECK(y.shape() == Shape{2, n, c});
  REQUIRE(weights.shape() == Shape{2 * heads, n, n / (r * r)});
  for (int64_t row = 0; row < weights.dim(0) * weights.dim(1); ++row) {
    double s = 0.0;
    for (int64_t k = 0; k < weights.dim(2); ++k)
      s += weights.data()[row * weights.dim(2) + k];
    CHECK_THAT(s, Catch::Matchers::WithinAbs(1.0, 1e-6));
  }
  CHECK_THROWS_AS(esa.forward(x, h + 1, w, nullptr), ShapeError);
  ParamStore<double> ps2;
  EfficientSelfAttention<double> esa3(ps2, init, "attn", c, heads, 3);
  CHECK_THROWS_AS(esa3.forward(x, h, w), ValueError);  // 8 not divisible by 3
}

TEST_CASE("mix-ffn residual identity, shape, gradient") {
  ParamStore<double> ps;
  Initializer init(4);
  MixFfn<double> ffn(ps, init, "ffn", 8, 4);
  zero_params(ps);
  Rng rng(16);
  auto x = random_tensor<double>({2, 16, 8}, rng);
  auto y = ffn.forward(x, 4, 4);
  CHECK(y.values() == x.values());

  ParamStore<float> psf;
  Initializer initf(5);
  MixFfn<float> ffnf(psf, initf, "ffn", 32, 4);
  Tensor<float> xs({2, 64, 32});
  CHECK(ffnf.forward(xs, 8, 8).shape() == Shape{2, 64, 32});

  // gradient check on a 1x16x8 sequence
  ParamStore<double> psg;
  Initializer initg(6);
  MixFfn<double> ffng(psg, initg, "ffn", 8, 2);
  psg.mark_all_requires_grad();
  auto x0 = random_tensor<double>({1, 16, 8}, rng);
  GradTape<double> tape;
  {
    GradTape<double>::Scope scope(tape);
    auto out = ffng.forward(x0, 4, 4);
    tape.backward(sum_all(mul(out, out)));
  }
  auto* fc1w = psg.find("ffn/fc1/weight");
  auto eval = [&](const Tensor<double>& wv) {
    auto saved = fc1w->values();
    fc1w->values() = wv.values();
    GradTape<double>::Pause pause;
    auto out = ffng.forward(x0, 4, 4);
    double s = 0.0;
    for (double v : out.values()) s += v * v;
    fc1w->values() = saved;
    return s;
  };
  Tensor<double> probe = Tensor<double>::from_data(fc1w->shape(), fc1w->values());
  auto fd = finite_diff_grad<double>(eval, probe, 1e-6);
  CHECK(max_rel_err(fc1w->grad(), fd) < 1e-4);
}

TEST_CASE("PTL pooling mixer vanishes on constant maps") {
  auto u = Tensor<double>::full({1, 9, 4}, 1.7);  // 3x3 map, 4 channels
  auto mixed = TransformerBlock<double>::pool_mixer(u, 3, 3);
  for (double v : mixed.values()) CHECK_THAT(v, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("transformer blocks with zeroed non-residual weights are identity maps") {
  StageConfig st{3, 2, 1, 8, 2, 2, 2};
  Rng rng(20);
  {
    ParamStore<double> ps;
    Initializer init(9);
    TransformerBlock<double> blk(ps, init, "blk", st, 4, BlockKind::etl);
    zero_params(ps, "blk/attn/proj");
    zero_params(ps, "blk/ffn/fc2");
    auto x = random_tensor<double>({1, 16, 8}, rng);
    auto y = blk.forward(x, 4, 4);
    for (int64_t i = 0; i < x.numel(); ++i)
      CHECK_THAT(y.data()[i], Catch::Matchers::WithinAbs(x.data()[i], 1e-12));
  }
  {
    // the PTL mixer carries no weights; it vanishes on constant maps, where
    // the zero-FFN block reduces to the identity
    ParamStore<double> ps;
    Initializer init(9);
    TransformerBlock<double> blk(ps, init, "blk", st, 4, BlockKind::ptl);
    zero_params(ps, "blk/ffn/fc2");
    auto x = Tensor<double>::full({1, 16, 8}, 0.8125);
    auto y = blk.forward(x, 4, 4);
    for (int64_t i = 0; i < x.numel(); ++i)
      CHECK_THAT(y.data()[i], Catch::Matchers::WithinAbs(x.data()[i], 1e-12));
  }
}

TEST_CASE("CEF selection kernel and gradient flow to both branches") {
  const int64_t c = 4, h = 3, w = 3;
  ParamStore<double> ps;
  Initializer init(10);
  CefFuse<double> cef(ps, init, "cef", c);
  auto* fw = ps.find("cef/fuse/weight");
  std::fill(fw->values().begin(), fw->values().end(), 0.0);
  for (int64_t i = 0; i < c; ++i) fw->at_mut({i, i, 0, 0}) = 1.0;  // identity on the TE half
  zero_params(ps, "cef/fuse/bias");

  Rng rng(22);
  auto ce_map = random_tensor<double>({1, c, h, w}, rng);
  auto te_seq = random_tensor<double>({1, h * w, c}, rng);
  auto fused = cef.forward(ce_map, te_seq, h, w);
  auto te_map = seq_to_map(te_seq, h, w);
  auto want = gelu(te_map);
  for (int64_t i = 0; i < fused.numel(); ++i)
    CHECK_THAT(fused.data()[i], Catch::Matchers::WithinAbs(want.data()[i], 1e-12));

  // stage-3 shaped contract: (160,16,16) with a 256x160 sequence
  ParamStore<float> ps3;
  Initializer init3(0);
  CefFuse<float> cef3(ps3, init3, "cef3", 160);
  Tensor<float> ce3({1, 160, 16, 16});
  Tensor<float> te3({1, 256, 160});
  CHECK(cef3.forward(ce3, te3, 16, 16).shape() == Shape{1, 160, 16, 16});

  // gradient flows into both encoder branches
  ParamStore<double> psg;
  Initializer initg(11);
  CefFuse<double> cefg(psg, initg, "cef", c);
  GradTape<double> tape;
  GradTape<double>::Scope scope(tape);
  auto ce_in = random_tensor<double>({1, c, h, w}, rng);
  auto te_in = random_tensor<double>({1, h * w, c}, rng);
  ce_in.set_requires_grad();
  te_in.set_requires_grad();
  tape.backward(sum_all(cefg.forward(ce_in, te_in, h, w)));
  auto nonzero = [](const std::vector<double>& g) {
    for (double v : g)
      if (v != 0.0) return true;
    return false;
  };
  CHECK(nonzero(ce_in.grad_values()));
  CHECK(nonzero(te_in.grad_values()));
}

TEST_CASE("decoder output shape, projection params, argmax shift invariance") {
  ParamStore<float> ps;
  Initializer init(0);
  Decoder<float> dec(ps, init, "decoder", {32, 64, 160, 192}, 256, 2);
  // per-stage projection parameter count at decoder_dim=256
  int64_t proj_params = 0;
  for (int i = 1; i <= 4; ++i) proj_params += ps.count_params(str_cat("decoder/proj", i));
  CHECK(proj_params == 115712);

  std::array<Tensor<float>, 4> fused{
      Tensor<float>({1, 32, 16, 16}), Tensor<float>({1, 64, 8, 8}),
      Tensor<float>({1, 160, 4, 4}), Tensor<float>({1, 192, 2, 2})};
  Rng rng(30);
  for (auto& f : fused)
    for (auto& v : f.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  auto logits = dec.forward(fused, 64, 64);
  REQUIRE(logits.shape() == Shape{1, 2, 64, 64});

  auto shifted = add(logits, Tensor<float>::full({1}, 3.25f));
  CHECK(logits_to_mask(logits).v == logits_to_mask(shifted).v);
}
