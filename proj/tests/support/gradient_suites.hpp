// Copyright 2026 The dlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef DLM_TESTS_GRADIENT_SUITES_HPP
#define DLM_TESTS_GRADIENT_SUITES_HPP

// Finite-difference checks over every op, layer and both architectures,
// shared by the unit suites and the acceptance runner. Each returns one
// outcome per check; callers apply the tolerance.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dlm/layers.hpp"
#include "dlm/model.hpp"
#include "grad_check.hpp"

namespace dlm::testing {

struct GradOutcome {
  std::string name;
  double error = 0.0;          // gradient error
  double forward_error = 0.0;  // engine vs double oracle, per-op only
  std::string worst;
};

namespace detail {

// Double-precision reference forwards used as finite-difference oracles.
using Vec = std::vector<double>;
using Vecs = std::vector<Vec>;

Vec mm(const Vec& a, const Vec& b, std::size_t m, std::size_t k, std::size_t n) {
  Vec c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

double sum_of(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

template <typename F>
Vec map1(const Vec& v, F f) {
  Vec out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), f);
  return out;
}

template <typename F>
Vec map2(const Vec& a, const Vec& b, F f) {
  Vec out(std::max(a.size(), b.size()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[a.size() == 1 ? 0 : i], b[b.size() == 1 ? 0 : i]);
  return out;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Vec softmax_ref(const Vec& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  Vec e = map1(v, [&](double x) { return std::exp(x - mx); });
  const double z = sum_of(e);
  return map1(e, [&](double x) { return x / z; });
}

Vec sub_range(const Vec& v, std::size_t begin, std::size_t count) {
  return Vec(v.begin() + static_cast<long>(begin), v.begin() + static_cast<long>(begin + count));
}

Vec cat(std::initializer_list<Vec> parts) {
  Vec out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

EncoderParams make_encoder(ParamStore& store, Rng& rng, std::size_t d_in, std::size_t layers, std::size_t u,
                           float scale = 0.5f) {
  EncoderParams p;
  std::size_t in = d_in;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string prefix = "enc." + std::to_string(l);
    p.layers.push_back({register_lstm(store, prefix + ".fw", in, u), register_lstm(store, prefix + ".bw", in, u)});
    in = 2 * u;
  }
  init_uniform(store, rng, scale);
  return p;
}

AttentionParams make_attention(Rng& rng, std::size_t u, std::size_t d_h, std::size_t d_a, std::size_t K,
                               std::size_t w, double range = 1.0) {
  AttentionParams p;
  p.w_query = random_tensor(rng, {d_a, u}, -range, range);
  p.w_key = random_tensor(rng, {d_a, d_h}, -range, range);
  p.w_location = random_tensor(rng, {d_a, K}, -range, range);
  p.filters = random_tensor(rng, {K, w}, -range, range);
  p.energy = random_tensor(rng, {d_a}, -range, range);
  p.energy_bias = random_tensor(rng, {d_a}, -range, range);
  return p;
}

}  // namespace detail

// Every differentiable op against central finite differences of a double
// reference, inputs in [-2, 2].
inline std::vector<GradOutcome> op_gradient_checks(int seed) {
  using namespace detail;
  std::vector<GradOutcome> out;
  Rng rng(1000 + seed);
  auto check = [&](const char* name, std::vector<Tensor> leaves, const std::function<Tensor(Tape&)>& fn,
                   const DoubleForward& oracle) {
    const auto r = grad_check_oracle(std::move(leaves), fn, oracle, 1e-3, seed);
    out.push_back({name, r.max_grad_error, r.max_forward_error, r.worst});
  };
  Tensor a = random_tensor(rng, {3, 4});
  Tensor b = random_tensor(rng, {4, 2});
  Tensor u = random_tensor(rng, {5});
  Tensor v = random_tensor(rng, {5});
  Tensor pos = random_tensor(rng, {5}, 0.5, 2.0);
  Tensor m = random_tensor(rng, {6, 3});
  Tensor sq = random_tensor(rng, {3, 3});
  Tensor rowv = random_tensor(rng, {3});
  Tensor s = random_tensor(rng, {7});
  Tensor f = random_tensor(rng, {2, 3});
  Tensor gates = random_tensor(rng, {12});
  Tensor cell = random_tensor(rng, {3});
  Tensor c = Tensor::scalar(static_cast<float>(rng.uniform(-2, 2)), true);

  check("matmul", {a, b}, [&](Tape& t) { return matmul(t, a, b); },
        [](const Vecs& x) { return mm(x[0], x[1], 3, 4, 2); });
  check("transpose", {a}, [&](Tape& t) { return transpose(t, a); }, [](const Vecs& x) {
    Vec o(12);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 4; ++j) o[j * 3 + i] = x[0][i * 4 + j];
    return o;
  });
  check("add", {u, v}, [&](Tape& t) { return add(t, u, v); },
        [](const Vecs& x) { return map2(x[0], x[1], std::plus<>()); });
  check("add scalar", {u, c}, [&](Tape& t) { return add(t, c, u); },
        [](const Vecs& x) { return map2(x[1], x[0], std::plus<>()); });
  check("sub", {u, v}, [&](Tape& t) { return sub(t, u, v); },
        [](const Vecs& x) { return map2(x[0], x[1], std::minus<>()); });
  check("mul", {u, v}, [&](Tape& t) { return mul(t, u, v); },
        [](const Vecs& x) { return map2(x[0], x[1], std::multiplies<>()); });
  check("mul scalar", {u, c}, [&](Tape& t) { return mul(t, u, c); },
        [](const Vecs& x) { return map2(x[0], x[1], std::multiplies<>()); });
  check("scale", {u}, [&](Tape& t) { return scale(t, u, -1.75f); },
        [](const Vecs& x) { return map1(x[0], [](double z) { return -1.75 * z; }); });
  check("tanh", {u}, [&](Tape& t) { return tanh(t, u); },
        [](const Vecs& x) { return map1(x[0], [](double z) { return std::tanh(z); }); });
  check("sigmoid", {u}, [&](Tape& t) { return sigmoid(t, u); },
        [](const Vecs& x) { return map1(x[0], sig); });
  check("log", {pos}, [&](Tape& t) { return log(t, pos); },
        [](const Vecs& x) { return map1(x[0], [](double z) { return std::log(z); }); });
  check("softmax", {u}, [&](Tape& t) { return softmax(t, u); },
        [](const Vecs& x) { return softmax_ref(x[0]); });
  check("log_softmax", {u}, [&](Tape& t) { return log_softmax(t, u); },
        [](const Vecs& x) { return map1(softmax_ref(x[0]), [](double z) { return std::log(z); }); });
  check("sum", {m}, [&](Tape& t) { return sum(t, m); }, [](const Vecs& x) { return Vec{sum_of(x[0])}; });
  check("pick", {u}, [&](Tape& t) { return pick(t, u, 3); }, [](const Vecs& x) { return Vec{x[0][3]}; });
  check("slice", {u}, [&](Tape& t) { return slice(t, u, 1, 3); },
        [](const Vecs& x) { return sub_range(x[0], 1, 3); });
  check("concat", {u, v, rowv}, [&](Tape& t) {
    const Tensor parts[] = {u, v, rowv};
    return concat(t, parts);
  }, [](const Vecs& x) { return cat({x[0], x[1], x[2]}); });
  check("row", {m}, [&](Tape& t) { return row(t, m, 4); },
        [](const Vecs& x) { return sub_range(x[0], 12, 3); });
  check("rows", {m}, [&](Tape& t) { return rows(t, m, 1, 3); },
        [](const Vecs& x) { return sub_range(x[0], 3, 9); });
  check("subsample_rows", {m}, [&](Tape& t) { return subsample_rows(t, m, 4); },
        [](const Vecs& x) { return cat({sub_range(x[0], 0, 3), sub_range(x[0], 12, 3)}); });
  check("stack_rows", {u, v}, [&](Tape& t) {
    const Tensor parts[] = {u, v, u};
    return stack_rows(t, parts);
  }, [](const Vecs& x) { return cat({x[0], x[1], x[0]}); });
  check("concat_cols", {sq, a}, [&](Tape& t) { return concat_cols(t, sq, a); }, [](const Vecs& x) {
    Vec o;
    for (std::size_t i = 0; i < 3; ++i) o = cat({o, sub_range(x[0], i * 3, 3), sub_range(x[1], i * 4, 4)});
    return o;
  });
  check("add_to_rows", {m, rowv}, [&](Tape& t) { return add_to_rows(t, m, rowv); }, [](const Vecs& x) {
    Vec o = x[0];
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += x[1][i % 3];
    return o;
  });
  check("conv1d_same", {s, f}, [&](Tape& t) { return conv1d_same(t, s, f); }, [](const Vecs& x) {
    Vec o(7 * 2, 0.0);
    for (long t = 0; t < 7; ++t)
      for (std::size_t k = 0; k < 2; ++k)
        for (long j = 0; j < 3; ++j) {
          const long src = t - 1 + j;
          if (src >= 0 && src < 7) o[static_cast<std::size_t>(t) * 2 + k] += x[1][k * 3 + j] * x[0][src];
        }
    return o;
  });
  check("lstm_cell", {gates, cell}, [&](Tape& t) { return lstm_cell(t, gates, cell); }, [](const Vecs& x) {
    const std::size_t u3 = 3;
    Vec h(u3), c2(u3);
    for (std::size_t j = 0; j < u3; ++j) {
      const double i = sig(x[0][j]), fg = sig(x[0][u3 + j]), g = std::tanh(x[0][2 * u3 + j]),
                   o = sig(x[0][3 * u3 + j]);
      c2[j] = fg * x[1][j] + i * g;
      h[j] = o * std::tanh(c2[j]);
    }
    return cat({h, c2});
  });
  return out;
}

// LSTM step, bidirectional encoder and attention, finite differences on the
// engine itself.
inline std::vector<GradOutcome> layer_gradient_checks(int seed) {
  using namespace detail;
  std::vector<GradOutcome> out;
  Rng rng(300 + seed);
  {
    ParamStore store;
    auto p = register_lstm(store, "cell", 3, 2);
    init_uniform(store, rng, 1.0f);
    Tensor x = random_tensor(rng, {3});
    Tensor h0 = random_tensor(rng, {2}, -1, 1);
    Tensor c0 = random_tensor(rng, {2}, -1, 1);
    std::vector<Tensor> leaves = {p.w_input, p.w_hidden, p.bias, x, h0, c0};
    const auto r = grad_check(leaves, [&](Tape& t) {
      const auto s = lstm_step(t, p, LstmState{h0, c0}, x);
      const Tensor parts[] = {s.hidden, s.cell};
      return concat(t, parts);
    });
    out.push_back({"lstm_step", r.max_error, 0.0, r.worst});
  }
  {
    ParamStore store;
    const auto enc = make_encoder(store, rng, 2, 2, 2);
    Tensor x = random_tensor(rng, {6, 2}, -1, 1);
    std::vector<Tensor> leaves = {x};
    for (const auto& n : store.names()) leaves.push_back(store.get(n));
    const auto r = grad_check(leaves, [&](Tape& t) { return encode(t, enc, x).h; });
    out.push_back({"encode", r.max_error, 0.0, r.worst});
  }
  {
    auto p = make_attention(rng, 3, 4, 3, 2, 3);
    Tensor h = random_tensor(rng, {4, 4}, -1, 1);
    Tensor q = random_tensor(rng, {3}, -1, 1);
    Tensor prev = Tensor::from_data({4}, {0.1f, 0.4f, 0.3f, 0.2f}, true);
    std::vector<Tensor> leaves = {p.w_query, p.w_key, p.w_location, p.filters, p.energy, p.energy_bias,
                                  h, q, prev};
    const auto r = grad_check(leaves, [&](Tape& t) {
      const auto a = attend(t, p, EncoderOutput{h, 4}, q, prev);
      const Tensor parts[] = {a.context, a.weights};
      return concat(t, parts);
    });
    out.push_back({"attend", r.max_error, 0.0, r.worst});
  }
  return out;
}

// Whole network: eight frames encode to two, three output tokens.
inline GradOutcome model_gradient_check(Architecture arch, int seed) {
  ModelConfig c;
  c.arch = arch;
  c.vocab_size = 4;
  c.feature_dim = 3;
  c.encoder_layers = 1;
  c.encoder_units = 3;
  c.embedding_dim = 3;
  c.decoder_units = 4;
  c.attention_dim = 3;
  c.location_filters = 2;
  c.location_width = 3;
  c.init_scale = 0.5f;
  Rng rng(70 + seed);
  Model m(c, rng);
  const Tensor x = random_tensor(rng, {8, 3}, -1, 1, false);
  const std::vector<TokenId> y = {2, 3, kEosId};
  std::vector<Tensor> leaves;
  for (const auto& n : m.params().names()) leaves.push_back(m.params().get(n));
  const auto r = grad_check(leaves, [&](Tape& t) { return concat(t, m.forward_asr(t, x, y).log_probs); });
  return {std::string(to_string(arch)), r.max_error, 0.0, r.worst};
}

}  // namespace dlm::testing

#endif  // DLM_TESTS_GRADIENT_SUITES_HPP
