#include <doctest.h>

#include <cmath>

#include "nots/gradcheck.hpp"
#include "nots/rng.hpp"
#include "nots/tape.hpp"

using namespace nots;

namespace {

Array rand_array(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Array a(std::move(shape));
  for (double& v : a.data) v = rng.uniform(lo, hi);
  return a;
}

}  // namespace

TEST_CASE("matmul identity case") {
  Tape t;
  Array a({2, 3}, {1, 0, 0, 0, 1, 0});
  Array b({3, 2}, {1, 0, 0, 1, 0, 0});
  VarId y = ops::matmul(t, t.constant(a), t.constant(b));
  const Array& v = t.value(y);
  CHECK(v.shape == std::vector<int>{2, 2});
  CHECK(v.at(0, 0) == doctest::Approx(1.0));
  CHECK(v.at(0, 1) == doctest::Approx(0.0));
  CHECK(v.at(1, 0) == doctest::Approx(0.0));
  CHECK(v.at(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("matmul shape mismatch names op and dims") {
  Tape t;
  VarId a = t.constant(Array({2, 3}));
  VarId b = t.constant(Array({2, 2}));
  CHECK_THROWS_WITH_AS(ops::matmul(t, a, b),
                       doctest::Contains("matmul"), ShapeError);
}

TEST_CASE("conv1d DC gain one with averaging kernel and reflect padding") {
  Tape t;
  Array x({1, 8}, std::vector<double>(8, 1.0));
  Array w({1, 1, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  VarId y = ops::conv1d(t, t.constant(x), t.constant(w), 1, PadMode::Reflect);
  const Array& v = t.value(y);
  REQUIRE(v.shape == std::vector<int>{1, 8});
  for (double e : v.data) CHECK(e == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mae identity is zero") {
  Tape t;
  Array x({1, 3}, {1, 2, 3});
  VarId y = ops::mae(t, t.constant(x), t.constant(x));
  CHECK(t.value(y).item() == 0.0);
}

TEST_CASE("backward of linear loss returns the data") {
  Tape t;
  Array w({1, 2}, {5.0, -1.0});
  Array x({1, 2}, {2.0, 3.0});
  VarId wp = t.param(w, 0);
  VarId y = ops::sum(t, ops::mul(t, wp, t.constant(x)));
  auto grads = t.backward(y);
  CHECK(grads.at(0).data == std::vector<double>{2.0, 3.0});
}

TEST_CASE("mae gradient sign times input; w=1 x=2 y=5 gives -2") {
  Tape t;
  VarId w = t.param(Array({1, 1}, {1.0}), 0);
  VarId pred = ops::mul(t, w, t.constant(Array({1, 1}, {2.0})));
  VarId loss = ops::mae(t, pred, t.constant(Array({1, 1}, {5.0})));
  auto grads = t.backward(loss);
  CHECK(grads.at(0).data[0] == doctest::Approx(-2.0));
}

TEST_CASE("mae subgradient at zero residual is zero") {
  Tape t;
  VarId w = t.param(Array({1, 1}, {2.5}), 0);
  VarId loss = ops::mae(t, w, t.constant(Array({1, 1}, {2.5})));
  auto grads = t.backward(loss);
  CHECK(grads.at(0).data[0] == 0.0);
}

TEST_CASE("non-scalar loss rejected") {
  Tape t;
  VarId x = t.param(Array({2, 2}, {1, 2, 3, 4}), 0);
  CHECK_THROWS_AS(t.backward(x), ShapeError);
}

TEST_CASE("unused parameters get exact zero gradients") {
  Tape t;
  VarId used = t.param(Array({1, 1}, {1.0}), 0);
  t.param(Array({2, 2}, {1, 2, 3, 4}), 1);
  VarId loss = ops::sum(t, used);
  auto grads = t.backward(loss);
  CHECK(grads.at(1).data == std::vector<double>(4, 0.0));
}

TEST_CASE("gradient accumulation is linear: backward of sum equals sum of grads") {
  Rng rng(2);
  Array w = rand_array({2, 3}, rng);
  Array x = rand_array({3, 2}, rng);

  auto grad_of = [&](bool both) {
    Tape t;
    VarId wp = t.param(w, 0);
    VarId l1 = ops::mean(t, ops::matmul(t, wp, t.constant(x)));
    VarId l2 = ops::sum(t, ops::relu(t, wp));
    VarId loss = both ? ops::add(t, l1, l2) : l1;
    return t.backward(loss).at(0);
  };
  auto grad_l2_only = [&] {
    Tape t;
    VarId wp = t.param(w, 0);
    return t.backward(ops::sum(t, ops::relu(t, wp))).at(0);
  };
  Array sum = grad_of(true);
  Array a = grad_of(false);
  Array b = grad_l2_only();
  for (std::size_t i = 0; i < sum.size(); ++i)
    CHECK(sum.data[i] == doctest::Approx(a.data[i] + b.data[i]).epsilon(1e-12));
}

TEST_CASE("grad_check simple square function") {
  auto f = [](Tape& t, const std::vector<VarId>& p) {
    return ops::sum(t, ops::mul(t, p[0], p[0]));
  };
  auto report = grad_check(f, {Array({1, 1}, {3.0})}, 1e-5, 1e-6);
  REQUIRE(report.entries.size() == 1);
  CHECK(report.pass);
  CHECK(report.entries[0].checked == 1);
}

TEST_CASE("grad_check skips exactly-zero mae residual as nondifferentiable") {
  auto f = [](Tape& t, const std::vector<VarId>& p) {
    return ops::mae(t, p[0], t.constant(Array({1, 1}, {1.5})));
  };
  auto report = grad_check(f, {Array({1, 1}, {1.5})}, 1e-6, 1e-4);
  CHECK(report.entries[0].skipped == 1);
  CHECK(report.entries[0].checked == 0);
  CHECK(report.to_string().find("nondifferentiable point") != std::string::npos);
}

TEST_CASE("grad_check validates step range") {
  auto f = [](Tape& t, const std::vector<VarId>& p) { return ops::sum(t, p[0]); };
  CHECK_THROWS_AS(grad_check(f, {Array({1, 1}, {1.0})}, 0.0, 1e-4),
                  std::invalid_argument);
  CHECK_THROWS_AS(grad_check(f, {Array({1, 1}, {1.0})}, 0.5, 1e-4),
                  std::invalid_argument);
}

TEST_CASE("two-layer relu net matches finite differences") {
  Rng rng(7);
  auto f = [](Tape& t, const std::vector<VarId>& p) {
    VarId h = ops::relu(t, ops::matmul(t, p[0], p[1]));
    VarId y = ops::matmul(t, h, p[2]);
    return ops::mae(t, y, t.constant(Array({2, 2}, {0.3, -0.2, 0.1, 0.4})));
  };
  auto report = grad_check(
      f, {rand_array({2, 3}, rng), rand_array({3, 4}, rng), rand_array({4, 2}, rng)},
      1e-5, 1e-4);
  CHECK(report.pass);
}

TEST_CASE("property: every differentiable op passes finite differences over 100 seeds") {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    GradCheckReport r;
    switch (seed % 10) {
      case 0:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              return ops::mean(t, ops::matmul(t, p[0], p[1]));
            },
            {rand_array({2, 3}, rng), rand_array({3, 2}, rng)}, 1e-5, 1e-4);
        break;
      case 1:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              return ops::mean(t, ops::conv1d(t, p[0], p[1], 1, PadMode::Zero));
            },
            {rand_array({2, 6}, rng), rand_array({3, 2, 3}, rng)}, 1e-5, 1e-4);
        break;
      case 2:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              return ops::mean(t, ops::conv1d(t, p[0], p[1], 2, PadMode::Reflect));
            },
            {rand_array({1, 8}, rng), rand_array({2, 1, 3}, rng)}, 1e-5, 1e-4);
        break;
      case 3:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              return ops::mean(t, ops::conv1d_transpose(t, p[0], p[1], 2, 8));
            },
            {rand_array({2, 4}, rng), rand_array({2, 1, 3}, rng)}, 1e-5, 1e-4);
        break;
      case 4:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              return ops::mae(t, ops::softmax_rows(t, p[0]),
                              t.constant(Array({2, 3}, {1, 0, 0, 0, 1, 0})));
            },
            {rand_array({2, 3}, rng)}, 1e-5, 1e-4);
        break;
      case 5:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              VarId y = ops::normalize_rows(t, p[0]);
              return ops::mae(t, y, t.constant(Array({2, 4})));
            },
            {rand_array({2, 4}, rng)}, 1e-5, 1e-4);
        break;
      case 6:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              VarId y = ops::shift_rows(t, ops::scale_rows(t, p[0], p[1]), p[2]);
              return ops::mean(t, ops::mul(t, y, y));
            },
            {rand_array({3, 2}, rng), rand_array({3}, rng), rand_array({3}, rng)},
            1e-5, 1e-4);
        break;
      case 7:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              VarId y = ops::rotary(t, p[0], {0, 1, 2, 3}, 10000.0);
              return ops::mean(t, ops::mul(t, y, y));
            },
            {rand_array({4, 6}, rng)}, 1e-5, 1e-4);
        break;
      case 8:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              VarId y = ops::concat_rows(t, {ops::slice_rows(t, p[0], 0, 2), p[1]});
              return ops::mean(t, ops::transpose(t, y));
            },
            {rand_array({3, 3}, rng), rand_array({2, 3}, rng)}, 1e-5, 1e-4);
        break;
      default:
        r = grad_check(
            [](Tape& t, const std::vector<VarId>& p) {
              return ops::cross_entropy(t, p[0],
                                        t.constant(Array({2, 3}, {1, 0, 0, 0, 0, 1})));
            },
            {rand_array({2, 3}, rng)}, 1e-5, 1e-4);
        break;
    }
    if (!r.pass) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("ops deterministic: identical inputs give bit-identical outputs") {
  Rng r1(9), r2(9);
  Array x1 = rand_array({3, 5}, r1), x2 = rand_array({3, 5}, r2);
  Tape t1, t2;
  VarId y1 = ops::softmax_rows(t1, ops::normalize_rows(t1, t1.constant(x1)));
  VarId y2 = ops::softmax_rows(t2, ops::normalize_rows(t2, t2.constant(x2)));
  CHECK(t1.value(y1).data == t2.value(y2).data);
}

TEST_CASE("forward ops keep finite values on finite inputs") {
  Rng rng(12);
  Tape t;
  VarId x = t.constant(rand_array({4, 8}, rng, -50.0, 50.0));
  VarId y = ops::softmax_rows(t, ops::normalize_rows(t, ops::relu(t, x)));
  CHECK(t.value(y).all_finite());
}
