#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tt/grad_check.hpp"
#include "tt/table_encoder.hpp"

using namespace tt;
using tt::test::max_abs_diff;
using tt::test::random_tensor;

namespace {

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.vocab_size = 11;
  cfg.d = 5;
  cfg.d_bilinear = 3;
  cfg.d_prime = 4;
  return cfg;
}

// Loop-based oracle for one biaffine cell, independent of the graph ops.
std::vector<double> cell_oracle(const Tensor& h, const Tensor& ha, const Tensor& ho,
                                const Tensor& w1, const Tensor& w2, Index i, Index j,
                                const EncoderConfig& cfg) {
  const Index d = cfg.d, db = cfg.d_bilinear;
  std::vector<double> out;
  for (Index c = 0; c < d; ++c) {
    double acc = 0.0;
    for (Index k = 0; k < d; ++k) acc += ha[i * d + k] * w1[k * d + c];
    for (Index k = 0; k < d; ++k) acc += ho[j * d + k] * w1[(d + k) * d + c];
    out.push_back(acc);
  }
  for (Index kk = 0; kk < db; ++kk) {
    double acc = 0.0;
    for (Index a = 0; a < d; ++a)
      for (Index b = 0; b < d; ++b) acc += ha[i * d + a] * w2[(a * db + kk) * d + b] * ho[j * d + b];
    out.push_back(acc);
  }
  const Index lo = std::min(i, j), hi = std::max(i, j);
  for (Index c = 0; c < d; ++c) {
    double best = h[lo * d + c];
    for (Index t = lo + 1; t <= hi; ++t) best = std::max(best, h[t * d + c]);
    out.push_back(best);
  }
  return out;
}

}  // namespace

TEST_CASE("encode_sentence is an embedding lookup") {
  ParameterStore store(9);
  EncoderConfig cfg = small_config();
  EncoderParams params = EncoderParams::create(store, cfg);
  Graph g;
  Var h = encode_sentence(g, params, {3, 7, 3});
  CHECK(h.shape() == std::vector<Index>{3, cfg.d});
  // repeated token ids produce identical rows
  for (Index c = 0; c < cfg.d; ++c) CHECK(h.value()[0 * cfg.d + c] == h.value()[2 * cfg.d + c]);
  CHECK_THROWS_AS(encode_sentence(g, params, {11}), DataError);
  SUBCASE("deterministic under fixed seed") {
    ParameterStore store2(9);
    EncoderParams params2 = EncoderParams::create(store2, cfg);
    Graph g2;
    Var h2 = encode_sentence(g2, params2, {3, 7, 3});
    CHECK(max_abs_diff(h.value(), h2.value()) == 0.0);
  }
}

TEST_CASE("project_ao") {
  ParameterStore store(10);
  EncoderConfig cfg = small_config();
  EncoderParams params = EncoderParams::create(store, cfg);
  SUBCASE("identity weights pass H through") {
    for (Parameter* p : {params.linear_a_w, params.linear_o_w}) {
      p->value.set_zero();
      for (Index i = 0; i < cfg.d; ++i) p->value[i * cfg.d + i] = 1.0;
    }
    Graph g;
    Var h = encode_sentence(g, params, {0, 1, 2});
    AspectOpinion ao = project_ao(h, params);
    CHECK(max_abs_diff(ao.ha.value(), h.value()) == 0.0);
    CHECK(max_abs_diff(ao.ho.value(), h.value()) == 0.0);
  }
  SUBCASE("distinct random weights separate the projections") {
    Graph g;
    Var h = encode_sentence(g, params, {0, 1, 2});
    AspectOpinion ao = project_ao(h, params);
    CHECK(ao.ha.shape() == std::vector<Index>{3, cfg.d});
    CHECK(ao.ho.shape() == std::vector<Index>{3, cfg.d});
    CHECK(max_abs_diff(ao.ha.value(), ao.ho.value()) > 1e-6);
  }
}

TEST_CASE("biaffine_table") {
  EncoderConfig cfg = small_config();
  SUBCASE("n=1 pooling term equals H[0]") {
    ParameterStore store(11);
    EncoderParams params = EncoderParams::create(store, cfg);
    Graph g;
    Var h = encode_sentence(g, params, {4});
    AspectOpinion ao = project_ao(h, params);
    Var rraw = biaffine_table(ao.ha, ao.ho, h, params);
    CHECK(rraw.shape() == std::vector<Index>{1, 1, 2 * cfg.d + cfg.d_bilinear});
    for (Index c = 0; c < cfg.d; ++c)
      CHECK(rraw.value()[cfg.d + cfg.d_bilinear + c] == h.value()[c]);
  }
  SUBCASE("zeroed W2 zeroes exactly the bilinear slice") {
    ParameterStore store(12);
    EncoderParams params = EncoderParams::create(store, cfg);
    params.w2->value.set_zero();
    Graph g;
    Var h = encode_sentence(g, params, {1, 2, 3});
    AspectOpinion ao = project_ao(h, params);
    Var rraw = biaffine_table(ao.ha, ao.ho, h, params);
    const Index width = 2 * cfg.d + cfg.d_bilinear;
    for (Index cell = 0; cell < 9; ++cell) {
      for (Index c = cfg.d; c < cfg.d + cfg.d_bilinear; ++c)
        CHECK(rraw.value()[cell * width + c] == 0.0);
      // other slices stay generically nonzero
      double mag = 0.0;
      for (Index c = 0; c < cfg.d; ++c) mag += std::abs(rraw.value()[cell * width + c]);
      CHECK(mag > 1e-9);
    }
  }
  SUBCASE("zeroed W1 zeroes exactly the concat slice") {
    ParameterStore store(13);
    EncoderParams params = EncoderParams::create(store, cfg);
    params.w1->value.set_zero();
    Graph g;
    Var h = encode_sentence(g, params, {1, 2});
    AspectOpinion ao = project_ao(h, params);
    Var rraw = biaffine_table(ao.ha, ao.ho, h, params);
    const Index width = 2 * cfg.d + cfg.d_bilinear;
    for (Index cell = 0; cell < 4; ++cell)
      for (Index c = 0; c < cfg.d; ++c) CHECK(rraw.value()[cell * width + c] == 0.0);
  }
  SUBCASE("matches the loop oracle on random inputs") {
    Rng rng(123);
    for (int trial = 0; trial < 10; ++trial) {
      ParameterStore store(1000 + static_cast<uint64_t>(trial));
      EncoderParams params = EncoderParams::create(store, cfg);
      const Index n = static_cast<Index>(rng.uniform_int(1, 6));
      std::vector<int> ids;
      for (Index i = 0; i < n; ++i) ids.push_back(static_cast<int>(rng.uniform_int(0, 10)));
      Graph g;
      Var h = encode_sentence(g, params, ids);
      AspectOpinion ao = project_ao(h, params);
      Var rraw = biaffine_table(ao.ha, ao.ho, h, params);
      const Index width = 2 * cfg.d + cfg.d_bilinear;
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
          const std::vector<double> want =
              cell_oracle(h.value(), ao.ha.value(), ao.ho.value(), params.w1->value,
                          params.w2->value, i, j, cfg);
          for (Index c = 0; c < width; ++c)
            CHECK(rraw.value()[(i * n + j) * width + c] ==
                  doctest::Approx(want[static_cast<size_t>(c)]).epsilon(1e-12));
        }
    }
  }
  SUBCASE("pooling slice is symmetric in span extent") {
    ParameterStore store(14);
    EncoderParams params = EncoderParams::create(store, cfg);
    Graph g;
    Var h = encode_sentence(g, params, {0, 5, 9, 2});
    AspectOpinion ao = project_ao(h, params);
    Var rraw = biaffine_table(ao.ha, ao.ho, h, params);
    const Index width = 2 * cfg.d + cfg.d_bilinear;
    const Index n = 4;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        for (Index c = 0; c < cfg.d; ++c) {
          const Index off = cfg.d + cfg.d_bilinear + c;
          CHECK(rraw.value()[(i * n + j) * width + off] == rraw.value()[(j * n + i) * width + off]);
        }
  }
}

TEST_CASE("compress") {
  EncoderConfig cfg = small_config();
  ParameterStore store(15);
  EncoderParams params = EncoderParams::create(store, cfg);
  Graph g;
  Var h = encode_sentence(g, params, {1, 2, 3});
  AspectOpinion ao = project_ao(h, params);
  Var rraw = biaffine_table(ao.ha, ao.ho, h, params);
  Var r = compress(rraw, params);
  CHECK(r.shape() == std::vector<Index>{3, 3, cfg.d_prime});
  SUBCASE("zero weights and bias produce an all-zero table") {
    params.linear_d_w->value.set_zero();
    params.linear_d_b->value.set_zero();
    Graph g2;
    Var h2 = encode_sentence(g2, params, {1, 2, 3});
    AspectOpinion ao2 = project_ao(h2, params);
    Var r2 = compress(biaffine_table(ao2.ha, ao2.ho, h2, params), params);
    CHECK(r2.value().array().abs().maxCoeff() == 0.0);
  }
  SUBCASE("matches a per-cell linear oracle") {
    const Index width = 2 * cfg.d + cfg.d_bilinear;
    for (Index cell = 0; cell < 9; ++cell)
      for (Index c = 0; c < cfg.d_prime; ++c) {
        double acc = params.linear_d_b->value[c];
        for (Index k = 0; k < width; ++k)
          acc += rraw.value()[cell * width + k] * params.linear_d_w->value[k * cfg.d_prime + c];
        CHECK(r.value()[cell * cfg.d_prime + c] == doctest::Approx(acc).epsilon(1e-12));
      }
  }
}

TEST_CASE("encoder end to end is differentiable") {
  EncoderConfig cfg = small_config();
  ParameterStore store(16);
  EncoderParams params = EncoderParams::create(store, cfg);
  auto f = [&](Graph& g) {
    Var h = encode_sentence(g, params, {0, 3, 6, 9});
    AspectOpinion ao = project_ao(h, params);
    Var rraw = biaffine_table(ao.ha, ao.ho, h, params);
    return tt::test::probe_loss(compress(rraw, params));
  };
  GradCheckResult res = grad_check(store, f, 1e-5);
  CAPTURE(res.worst_param);
  CHECK(res.max_rel_error < 1e-4);
}
