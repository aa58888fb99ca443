#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "bid/errors.hpp"
#include "bid/kernels.hpp"
#include "bid/quantizer.hpp"
#include "bid/rng.hpp"
#include "test_util.hpp"

using namespace bid;
using bid::test::random_mat;

namespace {

// A self-contained codebook over local arrays.
struct LocalBook {
  Mat<float> entries;
  Mat<float> size;
  Mat<float> sum;
  Codebook cb;

  LocalBook(int k, int d, float decay = 0.99f) : entries(k, d), size(1, k, 1.0f), sum(k, d) {
    cb.entries = &entries;
    cb.ema_cluster_size = &size;
    cb.ema_sum = &sum;
    cb.decay = decay;
    cb.epsilon = 1e-5f;
    cb.trainable = true;
  }

  void randomize(std::mt19937_64& g) {
    for (auto& x : entries.v) x = static_cast<float>(rng::uniform(g, -1, 1));
    sum.v = entries.v;
  }
};

// Brute-force argmin used as the oracle against nearest_code.
int scan_argmin(const float* f, const Mat<float>& entries) {
  int best = 0;
  double best_d = 1e300;
  for (int k = 0; k < entries.rows; ++k) {
    double d = 0;
    for (int c = 0; c < entries.cols; ++c) {
      const double diff = double(f[c]) - double(entries.at(k, c));
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("nearest code: inspectable cases") {
  LocalBook book(2, 2);
  book.entries.at(0, 0) = 0.0f;
  book.entries.at(0, 1) = 0.0f;
  book.entries.at(1, 0) = 1.0f;
  book.entries.at(1, 1) = 1.0f;
  const float f[2] = {0.1f, 0.1f};
  CHECK(nearest_code(f, book.entries).index == 0);

  LocalBook big(8, 3);
  std::mt19937_64 g(1);
  big.randomize(g);
  const float* c3 = big.entries.row(3);
  const auto hit = nearest_code(c3, big.entries);
  CHECK(hit.index == 3);
  CHECK(hit.distance_sq == 0.0);
}

TEST_CASE("nearest code matches exhaustive scan on random queries") {
  std::mt19937_64 g(2);
  LocalBook book(16, 4);
  book.randomize(g);
  for (int i = 0; i < 100; ++i) {
    const auto f = random_mat<float>(1, 4, g);
    CHECK(nearest_code(f.row(0), book.entries).index == scan_argmin(f.row(0), book.entries));
  }
}

TEST_CASE("nearest code rejects non-finite input and empty codebooks") {
  LocalBook book(2, 2);
  const float bad[2] = {std::nanf(""), 0.0f};
  CHECK_THROWS_AS(nearest_code(bad, book.entries), NumericalError);
}

TEST_CASE("rvq: L=0 leaves z_sum = z0") {
  std::mt19937_64 g(3);
  LocalBook class_cb(4, 3), res_cb(4, 3);
  class_cb.randomize(g);
  res_cb.randomize(g);
  const auto f = random_mat<float>(6, 3, g);
  const auto b = rvq_quantize(f, class_cb.cb, res_cb.cb, 0);
  CHECK(b.z_sum == b.z0);
  CHECK(b.residuals.empty());
}

TEST_CASE("rvq: hand-traced bundle at T=3, d=2, K=2, L=2") {
  LocalBook class_cb(2, 2), res_cb(2, 2);
  class_cb.entries.at(0, 0) = 0.0f;
  class_cb.entries.at(0, 1) = 0.0f;
  class_cb.entries.at(1, 0) = 1.0f;
  class_cb.entries.at(1, 1) = 1.0f;
  res_cb.entries.at(0, 0) = 0.0f;
  res_cb.entries.at(0, 1) = 0.0f;
  res_cb.entries.at(1, 0) = 0.15f;
  res_cb.entries.at(1, 1) = 0.0f;

  Mat<float> f(3, 2);
  f.at(0, 0) = 0.1f;  f.at(0, 1) = 0.0f;   // class 0; residual (0.1, 0)
  f.at(1, 0) = 0.9f;  f.at(1, 1) = 1.1f;   // class 1 (0.02 vs 2.02)
  f.at(2, 0) = 0.6f;  f.at(2, 1) = 0.6f;   // class 1 (0.32 vs 0.72)

  const auto b = rvq_quantize(f, class_cb.cb, res_cb.cb, 2);
  CHECK(b.class_indices == std::vector<int>{0, 1, 1});

  // frame 0: residual (0.1,0): d(r0)=0.01 > d(r1)=0.0025 -> code 1;
  // next residual (-0.05,0): d(r0)=0.0025 < d(r1)=0.04 -> code 0
  CHECK(b.residual_indices[0][0] == 1);
  CHECK(b.residual_indices[1][0] == 0);
  // frame 1: residual (-0.1,0.1): d(r0)=0.02 < d(r1)=0.0725 -> code 0 twice
  CHECK(b.residual_indices[0][1] == 0);
  CHECK(b.residual_indices[1][1] == 0);
  // frame 2: residual (-0.4,-0.4): d(r0)=0.32 < d(r1)=0.4625 -> code 0
  CHECK(b.residual_indices[0][2] == 0);

  CHECK(b.z_sum.at(0, 0) == doctest::Approx(0.15f));
  CHECK(b.z_sum.at(1, 0) == doctest::Approx(1.0f));

  // commitment = mean over frames of |f - z_sum|^2
  double expect = 0;
  for (int i = 0; i < 3; ++i)
    expect += kernels::l2sq(f.row(i), b.z_sum.row(i), 2);
  CHECK(b.commitment == doctest::Approx(expect / 3));
}

TEST_CASE("rvq telescoping: z_sum equals z0 plus residual codes exactly") {
  std::mt19937_64 g(4);
  LocalBook class_cb(8, 4), res_cb(16, 4);
  class_cb.randomize(g);
  res_cb.randomize(g);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_mat<float>(10, 4, g);
    const auto b = rvq_quantize(f, class_cb.cb, res_cb.cb, 4);
    Mat<float> recon = b.z0;
    for (const auto& r : b.residuals)
      for (std::size_t i = 0; i < recon.size(); ++i) recon.v[i] += r.v[i];
    CHECK(recon == b.z_sum);
  }
}

TEST_CASE("rvq: with a zero residual code, per-layer error is non-increasing") {
  std::mt19937_64 g(5);
  LocalBook class_cb(4, 4), res_cb(8, 4);
  class_cb.randomize(g);
  res_cb.randomize(g);
  for (int c = 0; c < 4; ++c) res_cb.entries.at(0, c) = 0.0f;  // zero code present

  for (int trial = 0; trial < 100; ++trial) {
    const auto f = random_mat<float>(5, 4, g);
    double prev = 1e300;
    for (int layers = 0; layers <= 4; ++layers) {
      const auto b = rvq_quantize(f, class_cb.cb, res_cb.cb, layers);
      double err = 0;
      for (int i = 0; i < f.rows; ++i) err += kernels::l2sq(f.row(i), b.z_sum.row(i), f.cols);
      CHECK(err <= prev + 1e-5);
      prev = err;
    }
  }
}

TEST_CASE("assignment indices are invariant under joint positive scaling") {
  std::mt19937_64 g(6);
  LocalBook class_cb(8, 4), res_cb(8, 4);
  class_cb.randomize(g);
  res_cb.randomize(g);
  const auto f = random_mat<float>(12, 4, g);
  const auto base = rvq_quantize(f, class_cb.cb, res_cb.cb, 2);

  for (const float alpha : {2.0f, 0.5f, 3.7f}) {
    LocalBook c2(8, 4), r2(8, 4);
    for (std::size_t i = 0; i < c2.entries.size(); ++i)
      c2.entries.v[i] = alpha * class_cb.entries.v[i];
    for (std::size_t i = 0; i < r2.entries.size(); ++i)
      r2.entries.v[i] = alpha * res_cb.entries.v[i];
    Mat<float> f2 = f;
    for (auto& x : f2.v) x *= alpha;
    const auto scaled = rvq_quantize(f2, c2.cb, r2.cb, 2);
    CHECK(scaled.class_indices == base.class_indices);
    CHECK(scaled.residual_indices == base.residual_indices);
  }
}

TEST_CASE("commitment loss is zero when features sit on codebook entries (L=0)") {
  std::mt19937_64 g(7);
  LocalBook class_cb(4, 3), res_cb(4, 3);
  class_cb.randomize(g);
  res_cb.randomize(g);
  Mat<float> f(4, 3);
  for (int i = 0; i < 4; ++i)
    std::copy_n(class_cb.entries.row(i), 3, f.row(i));
  const auto b = rvq_quantize(f, class_cb.cb, res_cb.cb, 0);
  CHECK(b.commitment == 0.0);
}

TEST_CASE("ema: no assignments leave entries essentially unchanged") {
  std::mt19937_64 g(8);
  LocalBook book(4, 3);
  book.randomize(g);
  const auto before = book.entries;
  ema_update(book.cb, {}, Mat<float>(0, 3));
  for (std::size_t i = 0; i < before.size(); ++i)
    CHECK(book.entries.v[i] == doctest::Approx(before.v[i]).epsilon(1e-4));
}

TEST_CASE("ema: converges to cluster means on a two-cluster fixture") {
  std::mt19937_64 g(9);
  LocalBook book(2, 2);
  book.entries.at(0, 0) = 0.1f;
  book.entries.at(0, 1) = 0.1f;
  book.entries.at(1, 0) = 0.9f;
  book.entries.at(1, 1) = 0.9f;
  book.sum.v = book.entries.v;

  // Fixed, well-separated point clouds around (0,0) and (1,1), 16 points
  // each so the accumulators swamp the initial entries within 100 steps.
  const int per_cluster = 16;
  Mat<float> feats(2 * per_cluster, 2);
  std::vector<int> idx(2 * per_cluster);
  for (int i = 0; i < per_cluster; ++i) {
    const float jitter = 0.01f * i - 0.075f;
    feats.at(i, 0) = jitter;
    feats.at(i, 1) = jitter;
    idx[i] = 0;
    feats.at(per_cluster + i, 0) = 1.0f + jitter;
    feats.at(per_cluster + i, 1) = 1.0f + jitter;
    idx[per_cluster + i] = 1;
  }
  for (int step = 0; step < 100; ++step) ema_update(book.cb, idx, feats);

  CHECK(std::fabs(book.entries.at(0, 0) - 0.0f) < 1e-2);
  CHECK(std::fabs(book.entries.at(0, 1) - 0.0f) < 1e-2);
  CHECK(std::fabs(book.entries.at(1, 0) - 1.0f) < 1e-2);
  CHECK(std::fabs(book.entries.at(1, 1) - 1.0f) < 1e-2);
}

TEST_CASE("ema: decay=0 jumps to per-step cluster means") {
  LocalBook book(2, 1, /*decay=*/0.0f);
  book.entries.at(0, 0) = 5.0f;
  book.entries.at(1, 0) = -5.0f;
  book.sum.v = book.entries.v;

  Mat<float> feats(3, 1);
  feats.at(0, 0) = 1.0f;
  feats.at(1, 0) = 3.0f;
  feats.at(2, 0) = 10.0f;
  ema_update(book.cb, {0, 0, 1}, feats);
  CHECK(book.entries.at(0, 0) == doctest::Approx(2.0f).epsilon(1e-4));   // mean(1, 3)
  CHECK(book.entries.at(1, 0) == doctest::Approx(10.0f).epsilon(1e-4));
}

TEST_CASE("ema: frozen codebooks reject updates") {
  LocalBook book(2, 2);
  book.cb.trainable = false;
  CHECK_THROWS_AS(ema_update(book.cb, {}, Mat<float>(0, 2)), std::invalid_argument);
}

TEST_CASE("usage stats: perplexity and dead codes") {
  SUBCASE("uniform usage over K=64 has perplexity 64") {
    std::vector<std::int64_t> counts(64, 10);
    const auto s = usage_stats(counts, 1.0);
    CHECK(s.perplexity == doctest::Approx(64.0));
    CHECK(s.dead_codes.empty());
  }
  SUBCASE("single code used has perplexity 1") {
    std::vector<std::int64_t> counts = {0, 100, 0};
    const auto s = usage_stats(counts, 1.0);
    CHECK(s.perplexity == doctest::Approx(1.0));
    CHECK(s.dead_codes == std::vector<int>{0, 2});
  }
  SUBCASE("counts [3,1,0,0]") {
    const auto s = usage_stats(std::vector<std::int64_t>{3, 1, 0, 0}, 1.0);
    const double h = -(0.75 * std::log(0.75) + 0.25 * std::log(0.25));
    CHECK(s.perplexity == doctest::Approx(std::exp(h)).epsilon(1e-6));
    CHECK(std::exp(h) == doctest::Approx(1.7548).epsilon(1e-3));
    CHECK(s.dead_codes == std::vector<int>{2, 3});
  }
  SUBCASE("history form") {
    const auto s = usage_stats(std::vector<int>{0, 0, 0, 1}, 4, 1.0);
    CHECK(s.counts == std::vector<std::int64_t>{3, 1, 0, 0});
  }
  SUBCASE("empty history throws") {
    CHECK_THROWS_AS(usage_stats(std::vector<std::int64_t>{}, 1.0), std::invalid_argument);
  }
}

TEST_CASE("dead code reinit: dead entries take candidate rows, live ones stay") {
  std::mt19937_64 g(10);
  LocalBook book(3, 2);
  book.randomize(g);
  const auto before = book.entries;
  const auto candidates = random_mat<float>(5, 2, g);

  SUBCASE("no dead codes, no change") {
    reinit_dead_codes(book.cb, {}, candidates, 42);
    CHECK(book.entries == before);
  }

  SUBCASE("one dead code, one candidate") {
    Mat<float> single(1, 2);
    single.at(0, 0) = 7.0f;
    single.at(0, 1) = -7.0f;
    reinit_dead_codes(book.cb, {1}, single, 42);
    CHECK(book.entries.at(1, 0) == 7.0f);
    CHECK(book.entries.at(1, 1) == -7.0f);
    CHECK(book.entries.at(0, 0) == before.at(0, 0));
    CHECK(book.entries.at(2, 0) == before.at(2, 0));
  }

  SUBCASE("deterministic given seed") {
    LocalBook b1(3, 2), b2(3, 2);
    b1.entries = before;
    b2.entries = before;
    reinit_dead_codes(b1.cb, {0, 2}, candidates, 77);
    reinit_dead_codes(b2.cb, {0, 2}, candidates, 77);
    CHECK(b1.entries == b2.entries);
  }
}
