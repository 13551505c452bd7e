#include "doctest.h"

#include <cmath>
#include <functional>

#include "gpse/autodiff.hpp"
#include "gpse/errors.hpp"
#include "gpse/rng.hpp"

using namespace gpse;

namespace {

// Central-difference check of d(loss)/d(leaf) for every coordinate of `leaf`.
double fd_check_leaf(Var leaf, const std::function<Var()>& loss_fn, double eps = 1e-5) {
  auto& g = leaf.grad();
  std::fill(g.data.begin(), g.data.end(), 0.0);
  backward(loss_fn());

  double max_rel = 0.0;
  for (size_t i = 0; i < leaf.value().size(); ++i) {
    double saved = leaf.value().data[i];
    NoGradGuard ng;
    leaf.value().data[i] = saved + eps;
    double lp = loss_fn().scalar();
    leaf.value().data[i] = saved - eps;
    double lm = loss_fn().scalar();
    leaf.value().data[i] = saved;
    double fd = (lp - lm) / (2.0 * eps);
    double ad = leaf.grad().data[i];
    max_rel = std::max(max_rel,
                       std::fabs(fd - ad) / std::max({1.0, std::fabs(fd), std::fabs(ad)}));
  }
  return max_rel;
}

}  // namespace

TEST_CASE("autodiff: loss = sum of a parameter gives gradient of ones") {
  Rng rng(1);
  Var w = Var::leaf(Tensor::randn({3, 4}, rng), true);
  backward(ops::sum_all(w));
  for (double g : w.grad().data) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("autodiff: grad of ||W v||^2 is 2 (W v) v^T") {
  Rng rng(2);
  Var w = Var::leaf(Tensor::randn({4, 3}, rng), true);
  Tensor vt({1, 3});
  for (auto& x : vt.data) x = rng.normal();
  Var v = Var::constant(vt);
  Var b = Var::leaf(Tensor::zeros({4}), false);

  Var y = ops::linear(v, w, b);  // [1,4]
  backward(ops::sum_all(ops::square(y)));

  for (int i = 0; i < 4; ++i) {
    double wv = 0.0;
    for (int j = 0; j < 3; ++j) wv += w.value().data[i * 3 + j] * vt.data[j];
    for (int j = 0; j < 3; ++j) {
      double expect = 2.0 * wv * vt.data[j];
      CHECK(w.grad().data[i * 3 + j] == doctest::Approx(expect).epsilon(1e-10));
    }
  }
}

TEST_CASE("autodiff: gradient accumulation until zeroed") {
  Var w = Var::leaf(Tensor::full({2}, 3.0), true);
  backward(ops::sum_all(w));
  backward(ops::sum_all(w));
  for (double g : w.grad().data) CHECK(g == doctest::Approx(2.0));
  std::fill(w.grad().data.begin(), w.grad().data.end(), 0.0);
  backward(ops::sum_all(w));
  for (double g : w.grad().data) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("autodiff: backward requires a recorded scalar graph") {
  Var w = Var::leaf(Tensor::full({2}, 1.0), true);
  CHECK_THROWS_AS(backward(w), ConfigError);  // non-scalar
  Var c = Var::constant(Tensor::full({1}, 1.0));
  CHECK_THROWS_AS(backward(c), ConfigError);  // no graph
  {
    NoGradGuard ng;
    Var loss = ops::sum_all(ops::square(w));
    CHECK_THROWS_AS(backward(loss), ConfigError);  // forward ran without grad
  }
}

TEST_CASE("autodiff: elementwise op gradients (fd)") {
  Rng rng(3);
  Var a = Var::leaf(Tensor::randn({2, 3, 2, 2}, rng), true);
  Var b = Var::leaf(Tensor::randn({2, 3, 2, 2}, rng), true);

  CHECK(fd_check_leaf(a, [&] { return ops::sum_all(ops::square(ops::add(a, b))); }) < 1e-8);
  CHECK(fd_check_leaf(b, [&] { return ops::sum_all(ops::square(ops::sub(a, b))); }) < 1e-8);
  CHECK(fd_check_leaf(a, [&] { return ops::sum_all(ops::square(ops::mul(a, b))); }) < 1e-7);
  CHECK(fd_check_leaf(a, [&] { return ops::mean_all(ops::silu(ops::scale(a, 1.7))); }) < 1e-8);
}

TEST_CASE("autodiff: conv2d gradients (fd, incl. stride 2)") {
  Rng rng(4);
  Var x = Var::leaf(Tensor::randn({2, 3, 6, 5}, rng), true);
  Var w = Var::leaf(Tensor::randn({4, 3, 3, 3}, rng, 0.5), true);
  Var b = Var::leaf(Tensor::randn({4}, rng), true);

  auto loss1 = [&] { return ops::mean_all(ops::square(ops::conv2d(x, w, b, 1, 1))); };
  CHECK(fd_check_leaf(x, loss1) < 1e-7);
  CHECK(fd_check_leaf(w, loss1) < 1e-7);
  CHECK(fd_check_leaf(b, loss1) < 1e-7);

  auto loss2 = [&] { return ops::mean_all(ops::square(ops::conv2d(x, w, b, 2, 1))); };
  CHECK(fd_check_leaf(x, loss2) < 1e-7);
  CHECK(fd_check_leaf(w, loss2) < 1e-7);

  // 1x1 conv
  Var w1 = Var::leaf(Tensor::randn({2, 3, 1, 1}, rng), true);
  Var b1 = Var::leaf(Tensor::zeros({2}), true);
  auto loss3 = [&] { return ops::mean_all(ops::square(ops::conv2d(x, w1, b1, 1, 0))); };
  CHECK(fd_check_leaf(w1, loss3) < 1e-8);
}

TEST_CASE("autodiff: conv2d matches a direct nested-loop convolution") {
  Rng rng(14);
  Tensor xt = Tensor::randn({1, 2, 5, 4}, rng);
  Tensor wt = Tensor::randn({3, 2, 3, 3}, rng);
  Tensor bt = Tensor::randn({3}, rng);
  Var out = ops::conv2d(Var::constant(xt), Var::constant(wt), Var::constant(bt), 1, 1);
  for (int co = 0; co < 3; ++co)
    for (int ho = 0; ho < 5; ++ho)
      for (int wo = 0; wo < 4; ++wo) {
        double acc = bt.data[co];
        for (int ci = 0; ci < 2; ++ci)
          for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
              int hi = ho + r - 1, wi = wo + c - 1;
              if (hi < 0 || hi >= 5 || wi < 0 || wi >= 4) continue;
              acc += xt.at4(0, ci, hi, wi) * wt.at4(co, ci, r, c);
            }
        CHECK(out.value().at4(0, co, ho, wo) == doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("autodiff: group_norm gradients (fd)") {
  Rng rng(5);
  Var x = Var::leaf(Tensor::randn({2, 4, 3, 3}, rng), true);
  Var gamma = Var::leaf(Tensor::randn({4}, rng, 0.3), true);
  Var beta = Var::leaf(Tensor::randn({4}, rng, 0.3), true);
  for (auto& v : gamma.value().data) v += 1.0;

  auto loss = [&] {
    Var y = ops::group_norm(x, gamma, beta, 2);
    return ops::mean_all(ops::square(y));
  };
  CHECK(fd_check_leaf(x, loss, 1e-5) < 1e-6);
  CHECK(fd_check_leaf(gamma, loss, 1e-5) < 1e-7);
  CHECK(fd_check_leaf(beta, loss, 1e-5) < 1e-7);
}

TEST_CASE("autodiff: upsample/concat/pad/crop/channel_bias/row_scale (fd)") {
  Rng rng(6);
  Var x = Var::leaf(Tensor::randn({2, 3, 2, 3}, rng), true);
  Var y = Var::leaf(Tensor::randn({2, 2, 2, 3}, rng), true);
  Var s = Var::leaf(Tensor::randn({2, 3}, rng), true);

  CHECK(fd_check_leaf(x, [&] {
          return ops::mean_all(ops::square(ops::upsample_nearest2(x)));
        }) < 1e-8);
  CHECK(fd_check_leaf(y, [&] {
          return ops::mean_all(ops::square(ops::concat_channels(x, y)));
        }) < 1e-8);
  CHECK(fd_check_leaf(x, [&] {
          return ops::mean_all(ops::square(ops::pad_hw(x, 4, 5)));
        }) < 1e-8);
  CHECK(fd_check_leaf(x, [&] {
          return ops::mean_all(ops::square(ops::crop_hw(x, 1, 2)));
        }) < 1e-8);
  auto cb_loss = [&] { return ops::mean_all(ops::square(ops::channel_bias(x, s))); };
  CHECK(fd_check_leaf(x, cb_loss) < 1e-8);
  CHECK(fd_check_leaf(s, cb_loss) < 1e-8);
  CHECK(fd_check_leaf(x, [&] {
          return ops::mean_all(ops::square(ops::row_scale(x, {0.5, -1.5})));
        }) < 1e-8);
}

TEST_CASE("autodiff: epsilon sweep shows the v-shaped fd error curve") {
  // Too-large eps -> truncation error; too-small eps -> roundoff. The minimum
  // sits in between.
  Rng rng(7);
  Var x = Var::leaf(Tensor::randn({1, 2, 4, 4}, rng), true);
  auto loss = [&] { return ops::mean_all(ops::silu(ops::square(x))); };

  std::vector<double> errs;
  for (double eps : {1e-2, 1e-5, 1e-11}) errs.push_back(fd_check_leaf(x, loss, eps));
  CHECK(errs[1] < errs[0]);
  CHECK(errs[1] < errs[2]);
}

TEST_CASE("autodiff: no-grad mode records nothing") {
  Var w = Var::leaf(Tensor::full({2}, 1.0), true);
  {
    NoGradGuard ng;
    Var y = ops::scale(w, 2.0);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.value().data[0] == doctest::Approx(2.0));
  }
  Var y = ops::scale(w, 2.0);
  CHECK(y.requires_grad());
}

TEST_CASE("autodiff: complex_mse equals the complex mean square") {
  // [1,2,2,1]: two complex elements (re plane, im plane)
  Tensor t({1, 2, 2, 1});
  t.at4(0, 0, 0, 0) = 3.0;  // re of elem 0
  t.at4(0, 0, 1, 0) = 0.0;  // re of elem 1
  t.at4(0, 1, 0, 0) = 4.0;  // im of elem 0
  t.at4(0, 1, 1, 0) = 2.0;  // im of elem 1
  // |e0|^2 = 25, |e1|^2 = 4 -> mean = 14.5
  Var v = Var::constant(t);
  CHECK(ops::complex_mse(v).scalar() == doctest::Approx(14.5).epsilon(1e-12));
}
