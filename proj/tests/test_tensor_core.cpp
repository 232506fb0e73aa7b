#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "lgcn/grad_check.hpp"
#include "lgcn/ops.hpp"
#include "lgcn/params.hpp"

using namespace lgcn;
using namespace testing;

TEST_SUITE("tensor-core") {

TEST_CASE("matmul examples") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  CHECK(to_vec(matmul(eye, m)) == std::vector<double>{1, 2, 3, 4});
  Tensor sel({2, 2}, {1, 0, 0, 0});
  Tensor b({2, 2}, {5, 6, 7, 8});
  CHECK(to_vec(matmul(sel, b)) == std::vector<double>{5, 6, 0, 0});
}

TEST_CASE("matmul matches a triple loop") {
  Rng rng(1);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  auto ref = naive_matmul(to_vec(a), to_vec(b), 3, 4, 2);
  CHECK(max_abs_diff(to_vec(matmul(a, b)), ref) < 1e-15);

  // integer-valued inputs: products and sums are exact
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(6), k = 1 + rng.below(6), n = 1 + rng.below(6);
    std::vector<double> av(m * k), bv(k * n);
    for (double& v : av) v = static_cast<double>(static_cast<int>(rng.below(21)) - 10);
    for (double& v : bv) v = static_cast<double>(static_cast<int>(rng.below(21)) - 10);
    CHECK(to_vec(matmul(Tensor({m, k}, av), Tensor({k, n}, bv))) == naive_matmul(av, bv, m, k, n));
  }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("softmax examples") {
  CHECK(to_vec(softmax_rows(Tensor({1, 2}, {0, 0}))) == std::vector<double>{0.5, 0.5});
  auto s = softmax_rows(Tensor({1, 2}, {1, 0}));
  const double e = std::exp(1.0);
  CHECK(s.at(0) == doctest::Approx(e / (e + 1)).epsilon(1e-15));
  CHECK(s.at(1) == doctest::Approx(1 / (e + 1)).epsilon(1e-15));
  CHECK(s.at(0) == doctest::Approx(0.73106).epsilon(1e-5));
}

TEST_CASE("softmax rows sum to one and lie in (0, 1)") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = random_tensor({4, 7}, rng, -5, 5);
    Tensor s = softmax_rows(x);
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 7; ++c) {
        CHECK(s.at(r, c) > 0.0);
        CHECK(s.at(r, c) < 1.0);
        sum += s.at(r, c);
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("concat and slice") {
  Tensor c = concat_last({Tensor({2}, {1, 2}), Tensor({1}, {3})});
  CHECK(to_vec(c) == std::vector<double>{1, 2, 3});
  Tensor one({2, 2}, {1, 2, 3, 4});
  CHECK(to_vec(concat_last({one})) == to_vec(one));

  Rng rng(3);
  Tensor a = random_tensor({3, 2}, rng), b = random_tensor({3, 4}, rng), d = random_tensor({3, 1}, rng);
  Tensor all = concat_last({a, b, d});
  CHECK(to_vec(slice_last(all, 0, 2)) == to_vec(a));
  CHECK(to_vec(slice_last(all, 2, 4)) == to_vec(b));
  CHECK(to_vec(slice_last(all, 6, 1)) == to_vec(d));
  CHECK_THROWS_AS(concat_last({Tensor::zeros({2, 2}), Tensor::zeros({3, 2})}), DimensionError);
}

TEST_CASE("elementwise examples") {
  CHECK(to_vec(relu(Tensor({2}, {-1, 2}))) == std::vector<double>{0, 2});
  CHECK(elu(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(elu(Tensor::scalar(-1.0)).item() == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
  CHECK(elu(Tensor::scalar(-1.0)).item() == doctest::Approx(-0.63212).epsilon(1e-5));
  CHECK(to_vec(mul(Tensor({2}, {2, 3}), Tensor({2}, {4, 5}))) == std::vector<double>{8, 15});
  CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
  // scalar broadcast is the only implicit broadcast
  CHECK(to_vec(add(Tensor({2}, {1, 2}), Tensor::scalar(1.0))) == std::vector<double>{2, 3});
}

TEST_CASE("reduce examples") {
  CHECK(reduce(Tensor({3}, {1, 2, 3}), Reduce::kMean, 0).item() == 2.0);
  CHECK(to_vec(reduce(Tensor({2, 2}, {1, 5, 4, 2}), Reduce::kMax, 0)) == std::vector<double>{4, 5});
  Rng rng(4);
  Tensor x = random_tensor({5, 3}, rng);
  auto sum = to_vec(reduce(x, Reduce::kSum, 0)), mean = to_vec(reduce(x, Reduce::kMean, 0));
  for (std::size_t i = 0; i < 3; ++i) CHECK(sum[i] == doctest::Approx(mean[i] * 5).epsilon(1e-14));
  CHECK_THROWS_AS(reduce(x, Reduce::kSum, 2), DimensionError);
}

TEST_CASE("max-reduce gradient is a first-argmax one-hot mask") {
  Tensor x({3, 2}, {1, 7, 4, 7, 4, 0}, true);
  Tape tape;
  {
    TapeScope scope(tape);
    Tensor loss = sum_all(reduce(x, Reduce::kMax, 0));
    tape.backward(loss);
  }
  CHECK(to_vec(Tensor({3, 2}, {x.grad().begin(), x.grad().end()})) == std::vector<double>{0, 1, 1, 0, 0, 0});
}

TEST_CASE("backward examples") {
  Rng rng(5);
  Tensor x = random_tensor({2, 3}, rng);
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum_all(x));
  }
  for (double g : x.grad()) CHECK(g == 1.0);
  x.zero_grad();
  {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum_all(mul(x, x)));
  }
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.grad()[i] == doctest::Approx(2 * x.at(i)).epsilon(1e-15));
}

TEST_CASE("backward rejects a non-scalar loss") {
  Tensor x = Tensor::zeros({2}, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = scale(x, 2.0);
  CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("backward twice without zeroing doubles leaf gradients") {
  Rng rng(6);
  Tensor a = random_tensor({3, 3}, rng), b = random_tensor({3, 2}, rng);
  Tape tape;
  TapeScope scope(tape);
  Tensor loss = sum_all(tanh(matmul(softmax_rows(a), b)));
  tape.backward(loss);
  auto ga = std::vector<double>(a.grad().begin(), a.grad().end());
  auto gb = std::vector<double>(b.grad().begin(), b.grad().end());
  tape.backward(loss);
  for (std::size_t i = 0; i < ga.size(); ++i) CHECK(a.grad()[i] == doctest::Approx(2 * ga[i]).epsilon(1e-14));
  for (std::size_t i = 0; i < gb.size(); ++i) CHECK(b.grad()[i] == doctest::Approx(2 * gb[i]).epsilon(1e-14));
}

TEST_CASE("tape records in topological order and replays in reverse") {
  Tensor x = Tensor::full({2}, 0.5, true);
  Tape tape;
  TapeScope scope(tape);
  Tensor y = sigmoid(x);
  Tensor z = mul(y, y);
  Tensor loss = sum_all(z);
  REQUIRE(tape.size() >= 3);
  // every entry's inputs are leaves or outputs of earlier entries
  for (std::size_t i = 0; i < tape.size(); ++i) {
    for (const auto& in : tape.entries()[i].inputs) {
      bool earlier = in.id() == x.id();
      for (std::size_t j = 0; j < i; ++j) earlier = earlier || tape.entries()[j].output.id() == in.id();
      CHECK(earlier);
    }
  }
}

TEST_CASE("grad_check examples") {
  auto sq = [](const Tensor& x) { return sum_all(mul(x, x)); };
  CHECK(grad_check(sq, Tensor({2}, {1, 2}, true)) < 1e-7);

  Rng rng(7);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  auto chain = [&]() { return sum_all(mul(matmul(softmax_rows(a), b), matmul(softmax_rows(a), b))); };
  CHECK(grad_check(chain, {a, b}).max_rel_error < 1e-4);

  auto constant = [](const Tensor& x) { return add_scalar(scale(sum_all(x), 0.0), 3.0); };
  Tensor c = random_tensor({3}, rng);
  CHECK(grad_check(constant, c) == 0.0);
}

TEST_CASE("every differentiable op passes grad_check at random inputs") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = random_tensor({3, 4}, rng), y = random_tensor({3, 4}, rng), w = random_tensor({4, 2}, rng);
    Tensor probe = random_tensor({3, 4}, rng, 0.5, 1.5, false);
    auto weighted = [&](const Tensor& t) { return sum_all(mul(t, probe)); };
    CHECK(grad_check([&] { return sum_all(matmul(x, w)); }, {x, w}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return weighted(add(x, y)); }, {x, y}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return weighted(sub(x, y)); }, {x, y}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return weighted(mul(x, y)); }, {x, y}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return weighted(elu(x)); }, {x}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return weighted(sigmoid(x)); }, {x}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return weighted(tanh(x)); }, {x}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return weighted(softmax_rows(x)); }, {x}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return sum_all(mul(transpose(x), transpose(probe))); }, {x}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return sum_all(reduce(mul(x, probe), Reduce::kMean, 0)); }, {x}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return sum_all(reduce(mul(x, probe), Reduce::kMax, 1)); }, {x}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return cross_entropy(reshape(slice_rows(x, 1, 1), {4}), 2); }, {x}).max_rel_error < 1e-4);
    CHECK(grad_check([&] { return sum_all(mul(concat_last({x, y}), concat_last({probe, probe}))); }, {x, y})
              .max_rel_error < 1e-4);
  }
}

TEST_CASE("adam: zero gradient leaves parameters and moments unchanged") {
  Tensor p({3}, {0.1, -0.2, 0.3}, true);
  std::vector<Tensor> params{p};
  Adam adam({1e-3, 0.9, 0.999, 1e-8});
  adam.step(params, {{0, 0, 0}});
  CHECK(to_vec(p) == std::vector<double>{0.1, -0.2, 0.3});
  for (double m : adam.first_moment(0)) CHECK(m == 0.0);
  for (double v : adam.second_moment(0)) CHECK(v == 0.0);
  CHECK(adam.steps() == 1);
}

TEST_CASE("adam: first step moves each coordinate by about lr") {
  const double lr = 1e-3;
  Tensor p({3}, {0.0, 1.0, -1.0}, true);
  std::vector<Tensor> params{p};
  Adam adam({lr, 0.9, 0.999, 1e-8});
  adam.step(params, {{0.5, -3.0, 1e-3}});
  // m_hat / sqrt(v_hat) = g / |g| on the first step
  CHECK(p.at(0) == doctest::Approx(-lr).epsilon(1e-6));
  CHECK(p.at(1) == doctest::Approx(1.0 + lr).epsilon(1e-6));
  CHECK(p.at(2) == doctest::Approx(-1.0 - lr).epsilon(1e-4));
}

TEST_CASE("adam: two steps match a hand-rolled scalar oracle") {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Tensor p({1}, {0.5}, true);
  std::vector<Tensor> params{p};
  Adam adam({lr, b1, b2, eps});
  double theta = 0.5, m = 0.0, v = 0.0;
  const double grads[2] = {0.3, -0.7};
  for (int t = 1; t <= 2; ++t) {
    adam.step(params, {{grads[t - 1]}});
    m = b1 * m + (1 - b1) * grads[t - 1];
    v = b2 * v + (1 - b2) * grads[t - 1] * grads[t - 1];
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    theta -= lr * mh / (std::sqrt(vh) + eps);
  }
  CHECK(p.at(0) == theta);
  CHECK(adam.steps() == 2);
}

TEST_CASE("adam: shape mismatch") {
  Tensor p = Tensor::zeros({3}, true);
  std::vector<Tensor> params{p};
  Adam adam({});
  CHECK_THROWS_AS(adam.step(params, {{1.0, 2.0}}), DimensionError);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(9);
  ParamStore a, b;
  a.add_uniform("x", {2, 3}, 1.0, rng);
  a.add_uniform("y", {4}, 1.0, rng);
  b.add("x", {2, 3});
  b.add("y", {4});
  const auto dir = std::filesystem::temp_directory_path() / "lgcn_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(a, dir);
  load_checkpoint(b, dir);
  CHECK(to_vec(a.get("x")) == to_vec(b.get("x")));
  CHECK(to_vec(a.get("y")) == to_vec(b.get("y")));
  ParamStore wrong;
  wrong.add("x", {3, 2});
  wrong.add("y", {4});
  CHECK_THROWS(load_checkpoint(wrong, dir));
  std::filesystem::remove_all(dir);
}

TEST_CASE("rng is reproducible") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  CHECK(Rng(42).next() != c.next());
}

}
