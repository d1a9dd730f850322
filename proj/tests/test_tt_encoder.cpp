#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"
#include "tt/grad_check.hpp"
#include "tt/tt_encoder.hpp"

using namespace tt;
using tt::test::max_abs_diff;
using tt::test::random_tensor;

namespace {

TTConfig small_tt(Index d_prime = 6, Index b = 2, Index w = 1) {
  TTConfig cfg;
  cfg.num_layers = 2;
  cfg.d_prime = d_prime;
  cfg.heads = 2;
  cfg.ffn_width = 2 * d_prime;
  cfg.b = b;
  cfg.w = w;
  return cfg;
}

void zero_mixing_weights(ParameterStore& store, const TTConfig& cfg) {
  for (Index li = 0; li < cfg.num_layers; ++li) {
    const std::string pre = "tt.layer" + std::to_string(li) + ".";
    for (const char* name : {"attn.wo", "attn.bo", "ffn.in.w", "ffn.in.b", "ffn.out.w", "ffn.out.b"})
      store.at(pre + name).value.set_zero();
  }
}

}  // namespace

TEST_CASE("conv3_forward") {
  TTConfig cfg = small_tt();
  SUBCASE("shape is preserved") {
    ParameterStore store(1);
    TTParams params = TTParams::create(store, cfg);
    Graph g;
    Rng rng(2);
    Var r = g.leaf(random_tensor({5, 5, cfg.d_prime}, rng));
    CHECK(conv3_forward(r, params).shape() == r.shape());
  }
  SUBCASE("center-delta kernel is the identity") {
    ParameterStore store(3);
    TTParams params = TTParams::create(store, cfg);
    params.conv_w->value.set_zero();
    params.conv_b->value.set_zero();
    const Index c = cfg.d_prime;
    for (Index ch = 0; ch < c; ++ch)
      params.conv_w->value[((1 * 3 + 1) * c + ch) * c + ch] = 1.0;
    Graph g;
    Rng rng(4);
    Tensor x = random_tensor({4, 4, c}, rng);
    Var out = conv3_forward(g.leaf(x), params);
    CHECK(max_abs_diff(out.value(), x) == 0.0);
  }
  SUBCASE("matches a nested-loop convolution oracle") {
    ParameterStore store(5);
    TTParams params = TTParams::create(store, cfg);
    Rng rng(6);
    const Index n = 4, c = cfg.d_prime;
    Tensor x = random_tensor({n, n, c}, rng);
    Graph g;
    Var out = conv3_forward(g.leaf(x), params);
    const Tensor& w = params.conv_w->value;
    const Tensor& bias = params.conv_b->value;
    for (Index r = 0; r < n; ++r)
      for (Index cc = 0; cc < n; ++cc)
        for (Index o = 0; o < c; ++o) {
          double acc = bias[o];
          for (Index di = 0; di < 3; ++di)
            for (Index dj = 0; dj < 3; ++dj) {
              const Index sr = r + di - 1, sc = cc + dj - 1;
              if (sr < 0 || sr >= n || sc < 0 || sc >= n) continue;
              for (Index ci = 0; ci < c; ++ci)
                acc += x[(sr * n + sc) * c + ci] * w[((di * 3 + dj) * c + ci) * c + o];
            }
          CHECK(out.value()[(r * n + cc) * c + o] == doctest::Approx(acc).epsilon(1e-12));
        }
  }
}

TEST_CASE("tt_layer_forward shift behaviour") {
  TTConfig cfg = small_tt();
  ParameterStore store(7);
  TTParams params = TTParams::create(store, cfg);
  zero_mixing_weights(store, cfg);
  Rng rng(8);
  Tensor x = random_tensor({4, 4, cfg.d_prime}, rng);
  SUBCASE("zeroed mixing weights leave only the shift") {
    Graph g;
    Var out = tt_layer_forward(g.leaf(x), params.layer_vars(g, 0), cfg, 0);
    Graph g2;
    Var expect = loop_shift(g2.leaf(x), cfg.shift());
    CHECK(max_abs_diff(out.value(), expect.value()) == 0.0);
  }
  SUBCASE("an even-odd pair cancels exactly") {
    Graph g;
    Var mid = tt_layer_forward(g.leaf(x), params.layer_vars(g, 0), cfg, 0);
    Var out = tt_layer_forward(mid, params.layer_vars(g, 1), cfg, 1);
    CHECK(max_abs_diff(out.value(), x) == 0.0);
  }
  SUBCASE("disabled loop shift skips the translation") {
    TTConfig no_shift = cfg;
    no_shift.loop_shift_enabled = false;
    Graph g;
    Var out = tt_layer_forward(g.leaf(x), params.layer_vars(g, 0), no_shift, 0);
    CHECK(max_abs_diff(out.value(), x) == 0.0);
  }
}

TEST_CASE("tt_forward") {
  SUBCASE("zero mixing weights make the stack an exact identity") {
    TTConfig cfg = small_tt();
    ParameterStore store(9);
    TTParams params = TTParams::create(store, cfg);
    zero_mixing_weights(store, cfg);
    Rng rng(10);
    Tensor x = random_tensor({6, 6, cfg.d_prime}, rng);
    Graph g;
    Var out = tt_forward(g.leaf(x), params, cfg);
    CHECK(max_abs_diff(out.value(), x) == 0.0);
  }
  SUBCASE("tracer cell stays put through the paired shifts") {
    TTConfig cfg = small_tt();
    ParameterStore store(11);
    TTParams params = TTParams::create(store, cfg);
    zero_mixing_weights(store, cfg);
    Tensor x({4, 4, cfg.d_prime});
    x[(2 * 4 + 3) * cfg.d_prime + 1] = 42.0;
    Graph g;
    Var out = tt_forward(g.leaf(x), params, cfg);
    CHECK(out.value()[(2 * 4 + 3) * cfg.d_prime + 1] == 42.0);
    CHECK(out.value().array().abs().sum() == 42.0);
  }
  SUBCASE("odd layer count is rejected") {
    TTConfig cfg = small_tt();
    cfg.num_layers = 3;
    ParameterStore store(12);
    TTParams params = TTParams::create(store, cfg);
    Graph g;
    Var x = g.leaf(Tensor({4, 4, cfg.d_prime}));
    CHECK_THROWS_AS(tt_forward(x, params, cfg), ConfigError);
  }
  SUBCASE("shape preservation across configs") {
    for (Index b : {1, 2, 3}) {
      TTConfig cfg = small_tt(6, b, 1);
      ParameterStore store(13 + static_cast<uint64_t>(b));
      TTParams params = TTParams::create(store, cfg);
      Rng rng(14);
      Tensor x = random_tensor({6, 6, cfg.d_prime}, rng);
      Graph g;
      CHECK(tt_forward(g.leaf(x), params, cfg).shape() == x.shape());
    }
  }
  SUBCASE("w=l stripe without shifts equals the full-attention normal stack") {
    TTConfig stripe_cfg = small_tt(6, 2, 3);  // n=6, b=2 -> l=3, w=l=3
    stripe_cfg.loop_shift_enabled = false;
    TTConfig normal_cfg = stripe_cfg;
    normal_cfg.attention = AttnMode::Full;
    ParameterStore store(15);
    TTParams params = TTParams::create(store, stripe_cfg);
    Rng rng(16);
    Tensor x = random_tensor({6, 6, stripe_cfg.d_prime}, rng);
    Graph g;
    Var a = tt_forward(g.leaf(x), params, stripe_cfg);
    Graph g2;
    Var b2 = tt_forward(g2.leaf(x), params, normal_cfg);
    CHECK(max_abs_diff(a.value(), b2.value()) < 1e-9);
  }
}

TEST_CASE("weighted_residual") {
  TTConfig cfg = small_tt();
  ParameterStore store(17);
  TTParams params = TTParams::create(store, cfg);
  Rng rng(18);
  Tensor rn = random_tensor({3, 3, cfg.d_prime}, rng);
  Tensor r0 = random_tensor({3, 3, cfg.d_prime}, rng);
  SUBCASE("gate logit 0 is the elementwise mean") {
    Graph g;
    Var out = weighted_residual(g.leaf(rn), g.leaf(r0), params);
    for (Index i = 0; i < out.size(); ++i)
      CHECK(out.value()[i] == doctest::Approx(0.5 * (rn[i] + r0[i])).epsilon(1e-12));
  }
  SUBCASE("large positive logit selects R^N, large negative selects R^0") {
    params.gate->value[0] = 40.0;
    Graph g;
    Var hi = weighted_residual(g.leaf(rn), g.leaf(r0), params);
    CHECK(max_abs_diff(hi.value(), rn) < 1e-12);
    params.gate->value[0] = -40.0;
    Graph g2;
    Var lo = weighted_residual(g2.leaf(rn), g2.leaf(r0), params);
    CHECK(max_abs_diff(lo.value(), r0) < 1e-12);
  }
  SUBCASE("per-channel gate mixes channels independently") {
    TTConfig vcfg = small_tt();
    vcfg.per_channel_gate = true;
    ParameterStore store2(19);
    TTParams params2 = TTParams::create(store2, vcfg);
    params2.gate->value[0] = 40.0;
    for (Index c = 1; c < vcfg.d_prime; ++c) params2.gate->value[c] = -40.0;
    Graph g;
    Var out = weighted_residual(g.leaf(rn), g.leaf(r0), params2);
    for (Index cell = 0; cell < 9; ++cell) {
      CHECK(out.value()[cell * vcfg.d_prime + 0] ==
            doctest::Approx(rn[cell * vcfg.d_prime + 0]).epsilon(1e-9));
      CHECK(out.value()[cell * vcfg.d_prime + 1] ==
            doctest::Approx(r0[cell * vcfg.d_prime + 1]).epsilon(1e-9));
    }
  }
}

TEST_CASE("tt stack gradient flow") {
  TTConfig cfg = small_tt(4, 2, 1);
  ParameterStore store(20);
  TTParams params = TTParams::create(store, cfg);
  Rng rng(21);
  const Tensor x = random_tensor({4, 4, cfg.d_prime}, rng);
  auto f = [&](Graph& g) {
    Var r0 = g.leaf(x);
    Var rn = tt_forward(r0, params, cfg);
    return tt::test::probe_loss(weighted_residual(rn, r0, params));
  };
  GradCheckResult res = grad_check(store, f, 1e-5);
  CAPTURE(res.worst_param);
  CAPTURE(res.analytic);
  CAPTURE(res.numeric);
  CHECK(res.max_rel_error < 1e-4);
}
