#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "bid/gradcheck.hpp"
#include "bid/mat.hpp"
#include "bid/tape.hpp"
#include "test_util.hpp"

using namespace bid;
using bid::test::random_mat;
using bid::test::random_mat_off_zero;

namespace {

// Independent conv oracle: direct triple loop over output channel, time and
// taps with explicit zero padding.
template <class T>
Mat<T> conv_naive(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b, int k, int dil) {
  const int cin = x.rows, t = x.cols, cout = w.rows;
  const int pad = dil * (k - 1) / 2;
  Mat<T> y(cout, t);
  for (int o = 0; o < cout; ++o) {
    for (int c = 0; c < t; ++c) {
      T acc = b.at(0, o);
      for (int i = 0; i < cin; ++i) {
        for (int kk = 0; kk < k; ++kk) {
          const int src = c + kk * dil - pad;
          if (src >= 0 && src < t) acc += w.at(o, i * k + kk) * x.at(i, src);
        }
      }
      y.at(o, c) = acc;
    }
  }
  return y;
}

}  // namespace

TEST_CASE("conv1d identity kernel k=1") {
  std::mt19937_64 g(1);
  const auto x = random_mat<double>(3, 7, g);
  Mat<double> w(3, 3);  // identity over channels
  for (int i = 0; i < 3; ++i) w.at(i, i) = 1.0;
  Mat<double> b(1, 3);

  Tape<double> t;
  const auto xid = t.own(x, false);
  const auto y = t.conv1d(xid, t.own(w, false), t.own(b, false), 1, 1);
  CHECK(t.val(y) == x);
}

TEST_CASE("conv1d matches naive triple-loop oracle") {
  std::mt19937_64 g(2);
  const std::tuple<int, int, int, int, int> cases[] = {
      {2, 3, 5, 3, 1}, {1, 1, 9, 3, 3}, {4, 2, 12, 3, 9}, {3, 3, 8, 1, 1}, {2, 5, 16, 9, 1}};
  for (const auto& [cin, cout, tlen, k, dil] : cases) {
    const auto x = random_mat<double>(cin, tlen, g);
    const auto w = random_mat<double>(cout, cin * k, g);
    const auto b = random_mat<double>(1, cout, g);
    Tape<double> t;
    const auto y = t.conv1d(t.own(x, false), t.own(w, false), t.own(b, false), k, dil);
    const auto ref = conv_naive(x, w, b, k, dil);
    REQUIRE(t.val(y).rows == cout);
    REQUIRE(t.val(y).cols == tlen);
    for (std::size_t i = 0; i < ref.size(); ++i)
      CHECK(t.val(y).v[i] == doctest::Approx(ref.v[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv1d k=3 dilation=9 keeps T=120") {
  std::mt19937_64 g(3);
  const auto x = random_mat<float>(2, 120, g);
  const auto w = random_mat<float>(2, 6, g);
  const auto b = random_mat<float>(1, 2, g);
  Tape<float> t;
  const auto y = t.conv1d(t.own(x, false), t.own(w, false), t.own(b, false), 3, 9);
  CHECK(t.val(y).cols == 120);
}

TEST_CASE("conv1d rejects even kernels and bad shapes") {
  Tape<float> t;
  const auto x = t.own(Mat<float>(2, 5), false);
  const auto w = t.own(Mat<float>(2, 4), false);
  const auto b = t.own(Mat<float>(1, 2), false);
  CHECK_THROWS_AS(t.conv1d(x, w, b, 2, 1), std::invalid_argument);
  const auto wbad = t.own(Mat<float>(2, 5), false);
  CHECK_THROWS_AS(t.conv1d(x, wbad, b, 3, 1), std::invalid_argument);
}

TEST_CASE("conv1d is linear in its input (zero bias)") {
  std::mt19937_64 g(4);
  const auto x1 = random_mat<double>(3, 10, g);
  const auto x2 = random_mat<double>(3, 10, g);
  const auto w = random_mat<double>(2, 9, g);
  const Mat<double> b(1, 2);
  const double alpha = 0.7, beta = -1.3;

  Mat<double> mix(3, 10);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.v[i] = alpha * x1.v[i] + beta * x2.v[i];

  Tape<double> t;
  const auto wid = t.own(w, false);
  const auto bid = t.own(b, false);
  const auto y1 = t.conv1d(t.own(x1, false), wid, bid, 3, 3);
  const auto y2 = t.conv1d(t.own(x2, false), wid, bid, 3, 3);
  const auto ym = t.conv1d(t.own(mix, false), wid, bid, 3, 3);
  for (std::size_t i = 0; i < t.val(ym).size(); ++i)
    CHECK(t.val(ym).v[i] ==
          doctest::Approx(alpha * t.val(y1).v[i] + beta * t.val(y2).v[i]).epsilon(1e-10));
}

TEST_CASE("gradient checks: linear, relu, conv at dilations 1/3/9") {
  std::mt19937_64 g(5);

  SUBCASE("linear layer") {
    std::vector<Mat<double>> inputs = {random_mat<double>(3, 6, g), random_mat<double>(4, 3, g),
                                       random_mat<double>(1, 4, g)};
    const double err = grad_check_max_rel_error(
        [&](Tape<double>& t, const std::vector<Mat<double>>& xs) {
          std::vector<Tape<double>::Id> ids;
          for (const auto& m : xs) ids.push_back(t.own(m, true));
          const auto y = t.linear(ids[0], ids[1], ids[2]);
          const auto loss = t.mse_loss(y, Mat<double>(4, 6), 6);
          return std::pair{loss, ids};
        },
        inputs, 1e-5);
    CHECK(err < 1e-6);
  }

  SUBCASE("relu away from the kink") {
    std::vector<Mat<double>> inputs = {random_mat_off_zero<double>(3, 8, g, 0.1)};
    const double err = grad_check_max_rel_error(
        [&](Tape<double>& t, const std::vector<Mat<double>>& xs) {
          std::vector<Tape<double>::Id> ids = {t.own(xs[0], true)};
          const auto y = t.relu(ids[0]);
          const auto loss = t.mse_loss(y, Mat<double>(3, 8, 0.5), 8);
          return std::pair{loss, ids};
        },
        inputs, 1e-5);
    CHECK(err < 1e-6);
  }

  for (const int dil : {1, 3, 9}) {
    CAPTURE(dil);
    std::vector<Mat<double>> inputs = {random_mat<double>(2, 14, g), random_mat<double>(3, 6, g),
                                       random_mat<double>(1, 3, g)};
    const double err = grad_check_max_rel_error(
        [&](Tape<double>& t, const std::vector<Mat<double>>& xs) {
          std::vector<Tape<double>::Id> ids;
          for (const auto& m : xs) ids.push_back(t.own(m, true));
          const auto y = t.conv1d(ids[0], ids[1], ids[2], 3, dil);
          const auto loss = t.mse_loss(y, Mat<double>(3, 14, 0.1), 14);
          return std::pair{loss, ids};
        },
        inputs, 1e-5);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("gradient checks: mask, concat, straight-through surrogate, losses") {
  std::mt19937_64 g(6);

  SUBCASE("mask_cols and concat_rows") {
    std::vector<Mat<double>> inputs = {random_mat<double>(2, 10, g),
                                       random_mat<double>(3, 10, g)};
    std::vector<std::uint8_t> keep = {1, 0, 0, 1, 1, 0, 1, 1, 0, 1};
    const double err = grad_check_max_rel_error(
        [&](Tape<double>& t, const std::vector<Mat<double>>& xs) {
          std::vector<Tape<double>::Id> ids = {t.own(xs[0], true), t.own(xs[1], true)};
          const auto m = t.mask_cols(ids[0], keep);
          const auto c = t.concat_rows(m, ids[1]);
          const auto loss = t.mse_loss(c, Mat<double>(5, 10), 10);
          return std::pair{loss, ids};
        },
        inputs, 1e-5);
    CHECK(err < 1e-6);
  }

  SUBCASE("add_const surrogate passes gradient unchanged") {
    std::mt19937_64 g2(7);
    const auto offset = random_mat<double>(2, 6, g2);
    std::vector<Mat<double>> inputs = {random_mat<double>(2, 6, g2)};
    const double err = grad_check_max_rel_error(
        [&](Tape<double>& t, const std::vector<Mat<double>>& xs) {
          std::vector<Tape<double>::Id> ids = {t.own(xs[0], true)};
          const auto z = t.add_const(ids[0], offset);
          const auto loss = t.mse_loss(z, Mat<double>(2, 6, 0.3), 6);
          return std::pair{loss, ids};
        },
        inputs, 1e-5);
    CHECK(err < 1e-6);
  }

  SUBCASE("frame_sq_loss and cross_entropy") {
    const auto target = random_mat<double>(4, 5, g);
    std::vector<Mat<double>> inputs = {random_mat<double>(4, 5, g)};
    const double err = grad_check_max_rel_error(
        [&](Tape<double>& t, const std::vector<Mat<double>>& xs) {
          std::vector<Tape<double>::Id> ids = {t.own(xs[0], true)};
          return std::pair{t.frame_sq_loss(ids[0], target, 5), ids};
        },
        inputs, 1e-5);
    CHECK(err < 1e-6);

    std::vector<int> labels = {0, 2, 1, 2, 0};
    std::vector<Mat<double>> logits = {random_mat<double>(3, 5, g)};
    const double err2 = grad_check_max_rel_error(
        [&](Tape<double>& t, const std::vector<Mat<double>>& xs) {
          std::vector<Tape<double>::Id> ids = {t.own(xs[0], true)};
          return std::pair{t.cross_entropy(ids[0], labels, 5), ids};
        },
        logits, 1e-5);
    CHECK(err2 < 1e-6);
  }
}

TEST_CASE("straight_through forwards the target and passes gradients to the input") {
  std::mt19937_64 g(8);
  const auto x = random_mat<float>(3, 4, g);
  const auto q = random_mat<float>(3, 4, g);
  Tape<float> t;
  const auto xid = t.own(x, true);
  const auto y = t.straight_through(xid, q);
  CHECK(t.val(y) == q);

  const auto loss = t.mse_loss(y, Mat<float>(3, 4), 4);
  t.add_seed(loss, 1.0f);
  t.backward();
  // d(loss)/dy = 2*q/(rows*cols); the same must land on x exactly.
  const Mat<float>& gx = t.grad_of(xid);
  REQUIRE(!gx.empty());
  for (std::size_t i = 0; i < gx.size(); ++i)
    CHECK(gx.v[i] == doctest::Approx(2.0f * q.v[i] / 12.0f));
}

TEST_CASE("stop_gradient truncates backward flow") {
  std::mt19937_64 g(9);
  const auto x = random_mat<float>(2, 3, g);
  Tape<float> t;
  const auto xid = t.own(x, true);
  const auto y = t.stop_gradient(xid);
  const auto loss = t.mse_loss(y, Mat<float>(2, 3), 3);
  CHECK_FALSE(t.needs(loss));
  t.backward();
  CHECK(t.grad_of(xid).empty());
}

TEST_CASE("mse and cross-entropy trivial values") {
  std::mt19937_64 g(10);
  const auto x = random_mat<float>(3, 4, g);
  Tape<float> t;
  const auto xid = t.own(x, false);
  const auto zero = t.mse_loss(xid, x, 4);
  CHECK(t.val(zero).at(0, 0) == 0.0f);

  Mat<float> shifted = x;
  for (auto& v : shifted.v) v += 1.0f;
  const auto sid = t.own(shifted, false);
  const auto one = t.mse_loss(sid, x, 4);
  CHECK(t.val(one).at(0, 0) == doctest::Approx(1.0f));
}
