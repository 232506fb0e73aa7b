#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "lgcn/grad_check.hpp"
#include "lgcn/layers.hpp"
#include "lgcn/ops.hpp"

using namespace lgcn;
using namespace testing;

namespace {

// Unrolled single-direction LSTM on plain vectors, gate order i, f, g, o.
std::vector<std::vector<double>> lstm_oracle(const LstmCell& cell, const std::vector<std::vector<double>>& xs,
                                             bool reverse) {
  const std::size_t h = cell.hidden(), in = cell.in_dim();
  std::vector<double> hid(h, 0.0), mem(h, 0.0);
  std::vector<std::vector<double>> out(xs.size());
  for (std::size_t step = 0; step < xs.size(); ++step) {
    const std::size_t t = reverse ? xs.size() - 1 - step : step;
    std::vector<double> z(4 * h);
    for (std::size_t j = 0; j < 4 * h; ++j) {
      double s = cell.bias.at(j);
      for (std::size_t i = 0; i < in; ++i) s += xs[t][i] * cell.w_input.at(i * 4 * h + j);
      for (std::size_t i = 0; i < h; ++i) s += hid[i] * cell.w_hidden.at(i * 4 * h + j);
      z[j] = s;
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = sigmoid(z[j]), fg = sigmoid(z[h + j]), g = std::tanh(z[2 * h + j]), og = sigmoid(z[3 * h + j]);
      mem[j] = fg * mem[j] + ig * g;
      hid[j] = og * std::tanh(mem[j]);
    }
    out[t] = hid;
  }
  return out;
}

}  // namespace

TEST_SUITE("nn-layers") {

TEST_CASE("linear examples") {
  ParamStore ps;
  Rng rng(1);
  Linear lin = Linear::create(ps, "lin", 3, 3, rng);
  set_values(lin.weight, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  set_all(lin.bias, 0.0);
  Tensor x = random_tensor({4, 3}, rng);
  CHECK(to_vec(linear_forward(lin, x)) == to_vec(x));

  set_all(lin.weight, 0.0);
  set_values(lin.bias, {1.5, -2, 0.25});
  Tensor y = linear_forward(lin, x);
  for (std::size_t r = 0; r < 4; ++r) CHECK(std::vector<double>{y.at(r, 0), y.at(r, 1), y.at(r, 2)} == std::vector<double>{1.5, -2, 0.25});

  Linear lin2 = Linear::create(ps, "lin2", 3, 2, rng);
  fill_uniform(lin2.bias, rng, 1.0);
  auto ref = naive_matmul(to_vec(x), to_vec(lin2.weight), 4, 3, 2);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 2; ++c) ref[r * 2 + c] += lin2.bias.at(c);
  CHECK(max_abs_diff(to_vec(linear_forward(lin2, x)), ref) < 1e-15);
  CHECK_THROWS_AS(linear_forward(lin2, Tensor::zeros({4, 2})), DimensionError);
}

TEST_CASE("highway forced gates") {
  ParamStore ps;
  Rng rng(2);
  Highway hw = Highway::create(ps, "hw", 4, rng);
  Tensor x = random_tensor({3, 4}, rng);
  for (auto& l : hw.layers) set_all(l.gate.bias, -1e6);
  CHECK(to_vec(highway_forward(hw, x)) == to_vec(x));

  for (auto& l : hw.layers) set_all(l.gate.bias, 1e6);
  Tensor expected = x;
  for (auto& l : hw.layers) expected = relu(linear_forward(l.transform, expected));
  CHECK(to_vec(highway_forward(hw, x)) == to_vec(expected));
}

TEST_CASE("highway matches the direct formula") {
  ParamStore ps;
  Rng rng(3);
  Highway hw = Highway::create(ps, "hw", 3, rng);
  for (auto& l : hw.layers) {
    fill_uniform(l.gate.bias, rng, 0.5);
    fill_uniform(l.transform.bias, rng, 0.5);
  }
  Tensor x = random_tensor({2, 3}, rng);
  std::vector<double> cur = to_vec(x);
  for (const auto& l : hw.layers) {
    std::vector<double> next(cur.size());
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t j = 0; j < 3; ++j) {
        double t = l.transform.bias.at(j), g = l.gate.bias.at(j);
        for (std::size_t i = 0; i < 3; ++i) {
          t += cur[r * 3 + i] * l.transform.weight.at(i * 3 + j);
          g += cur[r * 3 + i] * l.gate.weight.at(i * 3 + j);
        }
        g = sigmoid(g);
        next[r * 3 + j] = g * std::max(0.0, t) + (1 - g) * cur[r * 3 + j];
      }
    cur = next;
  }
  CHECK(max_abs_diff(to_vec(highway_forward(hw, x)), cur) < 1e-14);
}

TEST_CASE("embedding lookup") {
  ParamStore ps;
  Rng rng(4);
  EmbeddingTable table = EmbeddingTable::create(ps, "emb", 6, 3, rng);
  std::vector<std::int64_t> pad{0};
  Tensor row = embedding_lookup(table, pad);
  CHECK(to_vec(row) == std::vector<double>{0, 0, 0});

  std::vector<std::int64_t> ids{3, 0, 3, 5};
  Tensor rows;
  {
    Tape tape;
    TapeScope scope(tape);
    rows = embedding_lookup(table, ids);
    tape.backward(sum_all(rows));
  }
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(rows.at(i, j) == table.rows.at(static_cast<std::size_t>(ids[i]) * 3 + j));
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(table.rows.grad()[0 * 3 + j] == 0.0);  // pad row
    CHECK(table.rows.grad()[3 * 3 + j] == 2.0);  // repeated id
    CHECK(table.rows.grad()[5 * 3 + j] == 1.0);
    CHECK(table.rows.grad()[2 * 3 + j] == 0.0);
  }
  std::vector<std::int64_t> bad{6};
  CHECK_THROWS_AS(embedding_lookup(table, bad), DimensionError);
}

TEST_CASE("char cnn") {
  ParamStore ps;
  Rng rng(5);
  Conv2d conv = Conv2d::create(ps, "cnn", 2, 3, 4, rng);
  CHECK(to_vec(char_cnn(conv, Tensor::zeros({2, 5, 3}))) == std::vector<double>(8, 0.0));
  CHECK(char_cnn(conv, random_tensor({3, 6, 3}, rng)).shape() == Shape{3, 4});
  CHECK_THROWS_AS(char_cnn(conv, Tensor::zeros({1, 1, 3})), DimensionError);

  // one kernel tuned to the pattern e0 followed by e1; it fires only where that pair appears
  Conv2d single = Conv2d::create(ps, "single", 2, 3, 1, rng);
  set_values(single.kernel, {1, 0, 0, 0, 1, 0});
  set_all(single.bias, -1.0);
  std::vector<double> chars(6 * 3, 0.0);
  auto onehot = [&](std::size_t pos, std::size_t axis) { chars[pos * 3 + axis] = 1.0; };
  onehot(0, 2);
  onehot(1, 1);
  onehot(2, 0);
  onehot(3, 1);  // match starts at position 2
  onehot(4, 0);
  onehot(5, 2);
  Tensor emb({1, 6, 3}, chars);
  CHECK(char_cnn(single, emb).item() == 1.0);
  // with the match removed nothing fires
  chars[3 * 3 + 1] = 0.0;
  CHECK(char_cnn(single, Tensor({1, 6, 3}, chars)).item() == 0.0);
}

TEST_CASE("bilstm examples") {
  ParamStore ps;
  Rng rng(6);
  BiLstm rnn = BiLstm::create(ps, "rnn", 3, 2, rng);
  Tensor x = random_tensor({4, 3}, rng);
  for (const auto& [name, t] : ps.entries()) set_all(t, 0.0);
  CHECK(to_vec(bilstm_forward(rnn, x, 4)) == std::vector<double>(16, 0.0));

  BiLstm r2 = BiLstm::create(ps, "r2", 3, 2, rng);
  fill_uniform(r2.forward.bias, rng, 0.5);
  fill_uniform(r2.backward.bias, rng, 0.5);
  Tensor one = random_tensor({1, 3}, rng);
  Tensor out = bilstm_forward(r2, one, 1);
  auto f = lstm_oracle(r2.forward, {to_vec(one)}, false)[0];
  auto b = lstm_oracle(r2.backward, {to_vec(one)}, true)[0];
  CHECK(max_abs_diff(to_vec(out), {f[0], f[1], b[0], b[1]}) < 1e-15);
  CHECK_THROWS_AS(bilstm_forward(r2, one, 2), ContractError);
}

TEST_CASE("bilstm L=2 scalar case matches unrolled equations") {
  ParamStore ps;
  Rng rng(7);
  BiLstm rnn = BiLstm::create(ps, "rnn", 1, 1, rng);
  fill_uniform(rnn.forward.bias, rng, 1.0);
  fill_uniform(rnn.backward.bias, rng, 1.0);
  Tensor x({2, 1}, {0.7, -0.4});
  Tensor out = bilstm_forward(rnn, x, 2);
  auto f = lstm_oracle(rnn.forward, {{0.7}, {-0.4}}, false);
  auto b = lstm_oracle(rnn.backward, {{0.7}, {-0.4}}, true);
  CHECK(max_abs_diff(to_vec(out), {f[0][0], b[0][0], f[1][0], b[1][0]}) < 1e-15);
}

TEST_CASE("bilstm padding rows are zero and get no gradient") {
  ParamStore ps;
  Rng rng(8);
  BiLstm rnn = BiLstm::create(ps, "rnn", 3, 2, rng);
  Tensor x = random_tensor({5, 3}, rng);
  Tape tape;
  TapeScope scope(tape);
  Tensor out = bilstm_forward(rnn, x, 3);
  for (std::size_t r = 3; r < 5; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(out.at(r, c) == 0.0);
  tape.backward(sum_all(out));
  for (std::size_t r = 3; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(x.grad()[r * 3 + c] == 0.0);
}

TEST_CASE("reversing the input swaps bilstm halves at mirrored positions") {
  ParamStore ps;
  Rng rng(9);
  BiLstm rnn = BiLstm::create(ps, "rnn", 2, 3, rng);
  // share weights across directions so the swap is exact
  set_values(rnn.backward.w_input, to_vec(rnn.forward.w_input));
  set_values(rnn.backward.w_hidden, to_vec(rnn.forward.w_hidden));
  set_values(rnn.backward.bias, to_vec(rnn.forward.bias));
  Tensor x = random_tensor({4, 2}, rng);
  std::vector<double> rv;
  for (std::size_t r = 4; r-- > 0;) rv.insert(rv.end(), {x.at(r, 0), x.at(r, 1)});
  Tensor a = bilstm_forward(rnn, x, 4), b = bilstm_forward(rnn, Tensor({4, 2}, rv), 4);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(a.at(t, j) == doctest::Approx(b.at(3 - t, 3 + j)).epsilon(1e-14));
      CHECK(a.at(t, 3 + j) == doctest::Approx(b.at(3 - t, j)).epsilon(1e-14));
    }
}

TEST_CASE("conv1d examples") {
  ParamStore ps;
  Rng rng(10);
  Conv1d id = Conv1d::create(ps, "id", 3, 3, 1, rng);
  set_values(id.kernel, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor x = random_tensor({5, 3}, rng);
  CHECK(to_vec(conv1d_forward(id, x)) == to_vec(x));

  Conv1d avg = Conv1d::create(ps, "avg", 1, 1, 3, rng);
  set_all(avg.kernel, 1.0 / 3.0);
  Tensor constant = Tensor::full({6, 1}, 2.5);
  Tensor y = conv1d_forward(avg, constant);
  // interior positions see three taps; ends see zero padding
  for (std::size_t t = 1; t < 5; ++t) CHECK(y.at(t) == doctest::Approx(2.5).epsilon(1e-15));

  Conv1d conv = Conv1d::create(ps, "conv", 2, 3, 3, rng);
  fill_uniform(conv.bias, rng, 1.0);
  Tensor s = random_tensor({4, 2}, rng);
  std::vector<double> ref(4 * 3);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t o = 0; o < 3; ++o) {
      double acc = conv.bias.at(o);
      for (std::size_t w = 0; w < 3; ++w) {
        const long src = static_cast<long>(t) + static_cast<long>(w) - 1;
        if (src < 0 || src >= 4) continue;
        for (std::size_t i = 0; i < 2; ++i) acc += s.at(static_cast<std::size_t>(src), i) * conv.kernel.at((w * 2 + i) * 3 + o);
      }
      ref[t * 3 + o] = acc;
    }
  CHECK(max_abs_diff(to_vec(conv1d_forward(conv, s)), ref) < 1e-15);
  CHECK(conv1d_forward(conv, s).shape() == Shape{4, 3});
  CHECK_THROWS_AS(conv1d_forward(conv, Tensor::zeros({4, 3})), DimensionError);
}

TEST_CASE("every layer passes grad_check on parameters and inputs") {
  ParamStore ps;
  Rng rng(11);
  auto all_params = [&]() {
    std::vector<Tensor> out;
    for (const auto& [name, t] : ps.entries()) out.push_back(t);
    return out;
  };
  Linear lin = Linear::create(ps, "lin", 3, 2, rng);
  Mlp mlp = Mlp::create(ps, "mlp", 3, 4, 2, Activation::kElu, rng);
  Highway hw = Highway::create(ps, "hw", 3, rng);
  Conv1d c1 = Conv1d::create(ps, "c1", 3, 2, 3, rng);
  Conv2d c2 = Conv2d::create(ps, "c2", 2, 3, 2, rng);
  BiLstm rnn = BiLstm::create(ps, "rnn", 3, 2, rng);
  EmbeddingTable emb = EmbeddingTable::create(ps, "emb", 5, 3, rng);
  for (auto t : all_params()) fill_uniform(t, rng, 0.8);
  set_values(emb.rows, {0, 0, 0});

  Tensor x = random_tensor({4, 3}, rng);
  Tensor chars = random_tensor({2, 4, 3}, rng);
  Tensor probe2 = random_tensor({4, 2}, rng, 0.5, 1.5, false);
  Tensor probe3 = random_tensor({4, 3}, rng, 0.5, 1.5, false);
  Tensor probe4 = random_tensor({4, 4}, rng, 0.5, 1.5, false);
  std::vector<std::int64_t> ids{2, 0, 4, 2};

  auto wrt = [&](std::initializer_list<Tensor> extra) {
    std::vector<Tensor> v(extra);
    return v;
  };
  CHECK(grad_check([&] { return sum_all(mul(linear_forward(lin, x), probe2)); }, wrt({lin.weight, lin.bias, x}))
            .max_rel_error < 1e-4);
  CHECK(grad_check([&] { return sum_all(mul(mlp_forward(mlp, x), probe2)); },
                   wrt({mlp.first.weight, mlp.first.bias, mlp.second.weight, mlp.second.bias, x}))
            .max_rel_error < 1e-4);
  CHECK(grad_check([&] { return sum_all(mul(highway_forward(hw, x), probe3)); },
                   wrt({hw.layers[0].transform.weight, hw.layers[0].gate.weight, hw.layers[1].transform.bias,
                        hw.layers[1].gate.bias, x}))
            .max_rel_error < 1e-4);
  CHECK(grad_check([&] { return sum_all(mul(conv1d_forward(c1, x), probe2)); }, wrt({c1.kernel, c1.bias, x}))
            .max_rel_error < 1e-4);
  CHECK(grad_check([&] { return sum_all(char_cnn(c2, chars)); }, wrt({c2.kernel, c2.bias, chars})).max_rel_error <
        1e-4);
  CHECK(grad_check([&] { return sum_all(mul(bilstm_forward(rnn, x, 4), probe4)); },
                   wrt({rnn.forward.w_input, rnn.forward.w_hidden, rnn.forward.bias, rnn.backward.w_input,
                        rnn.backward.w_hidden, rnn.backward.bias, x}))
            .max_rel_error < 1e-4);
  CHECK(grad_check([&] { return sum_all(mul(embedding_lookup(emb, ids), probe3)); }, wrt({emb.rows})).max_rel_error <
        1e-4);
}

}
