#include <cmath>
#include <random>

#include "doctest.h"
#include "mona/autodiff.hpp"
#include "mona/errors.hpp"
#include "test_util.hpp"

using namespace mona;
using mona::testing::random_tensor;

namespace {

double cos_of(const Tensor& a, const Tensor& b) {
  Tape tape;
  return cosine_similarity(tape.constant(a), tape.constant(b)).value().item();
}

}  // namespace

TEST_CASE("cosine_similarity examples") {
  CHECK(cos_of(Tensor::vector({1, 0}), Tensor::vector({1, 0})) == 1.0);
  CHECK(cos_of(Tensor::vector({1, 0}), Tensor::vector({0, 1})) == 0.0);
  CHECK(cos_of(Tensor::vector({1, 2}), Tensor::vector({2, 4})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(cos_of(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), DimensionError);
}

TEST_CASE("cosine_similarity is finite at the zero vector") {
  const Tensor zero = Tensor::vector({0, 0, 0});
  CHECK(cos_of(zero, Tensor::vector({1, 2, 3})) == 0.0);
  Tensor g = grad([](Var x) { return cosine_similarity(x, x.tape().constant(Tensor::vector({1, 2, 3}))); },
                  zero);
  CHECK(g.all_finite());
}

TEST_CASE("cosine_similarity is scale invariant") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor a = random_tensor(rng, {5});
    const double lambda = std::uniform_real_distribution<double>(1e-3, 1e3)(rng);
    Tensor b = a;
    for (double& v : b.data()) v *= lambda;
    CHECK(std::abs(cos_of(a, b) - 1.0) <= 1e-9);
  }
}

TEST_CASE("gelu limits") {
  Tape tape;
  Var x = tape.constant(Tensor::vector({0.0, 10.0, -10.0}));
  const Tensor y = gelu(x).value();
  CHECK(y[0] == 0.0);
  CHECK(std::abs(y[1] - 10.0) <= 1e-6);
  CHECK(std::abs(y[2]) < 1e-6);
}

TEST_CASE("grad of simple functions") {
  Tensor g = grad([](Var x) { return sum(square(x)); }, Tensor::vector({1, 2}));
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 4.0);

  const Tensor c = Tensor::vector({0.3, -1.2, 2.0});
  Tensor gc = grad([&c](Var x) { return cosine_similarity(x, x.tape().constant(c)); }, c);
  for (double v : gc.data()) CHECK(std::abs(v) <= 1e-10);
}

TEST_CASE("grad rejects non-scalar outputs") {
  CHECK_THROWS_AS(grad([](Var x) { return square(x); }, Tensor::vector({1, 2})), ContractError);
}

TEST_CASE("finite_difference_gradient examples") {
  Tensor g = finite_difference_gradient([](Var x) { return sum(square(x)); }, Tensor::vector({3}), 1e-5);
  CHECK(std::abs(g[0] - 6.0) <= 1e-8);
  Tensor e = finite_difference_gradient([](Var x) { return sum(exp(x)); }, Tensor::vector({0}), 1e-5);
  CHECK(std::abs(e[0] - 1.0) <= 1e-8);
  CHECK_THROWS_AS(finite_difference_gradient([](Var x) { return sum(x); }, Tensor::vector({0}), 0.0),
                  PreconditionError);
}

TEST_CASE("random three-layer composition matches central differences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Tensor> inputs = {random_tensor(rng, {3, 4}), random_tensor(rng, {4, 5}),
                                  random_tensor(rng, {5, 2}), random_tensor(rng, {1, 2})};
    ScalarFunction f = [](Tape&, std::span<const Var> v) {
      Var h1 = gelu(matmul(v[0], v[1]));
      Var h2 = tanh(matmul(h1, v[2]) + v[3]);
      return mean(square(h2));
    };
    auto analytic = grad(f, inputs);
    auto numeric = finite_difference_gradient(f, inputs, 1e-5);
    for (std::size_t k = 0; k < inputs.size(); ++k)
      CHECK(max_relative_error(analytic[k], numeric[k]) <= 1e-4);
  }
}

// Every differentiable primitive against central differences on [-2, 2].
TEST_CASE("primitive gradients match central differences") {
  std::mt19937_64 rng(3);
  const Tensor mask = Tensor::matrix({{1, 0, 1}, {1, 1, 0}, {0, 1, 1}});
  const std::vector<std::pair<std::size_t, std::size_t>> cells = {{0, 1}, {2, 2}, {1, 0}, {0, 1}};
  const std::vector<std::size_t> pick = {2, 0, 2};
  std::vector<std::pair<const char*, ScalarFunction>> cases = {
      {"add", [](Tape&, std::span<const Var> v) { return sum(square(v[0] + v[1])); }},
      {"sub", [](Tape&, std::span<const Var> v) { return sum(square(v[0] - v[1])); }},
      {"mul", [](Tape&, std::span<const Var> v) { return sum(v[0] * v[1]); }},
      {"div", [](Tape&, std::span<const Var> v) { return sum(v[0] / add_scalar(square(v[1]), 1.0)); }},
      {"broadcast row", [](Tape&, std::span<const Var> v) { return sum(square(v[0] * sum_axis(v[1], 0))); }},
      {"broadcast col", [](Tape&, std::span<const Var> v) { return sum(square(v[0] - mean_axis(v[1], 1))); }},
      {"exp/log", [](Tape&, std::span<const Var> v) { return sum(log(add_scalar(exp(v[0]), 1.0))); }},
      {"sqrt", [](Tape&, std::span<const Var> v) { return sum(sqrt(add_scalar(square(v[0]), 0.5))); }},
      {"tanh/gelu", [](Tape&, std::span<const Var> v) { return sum(tanh(gelu(v[0])) * v[1]); }},
      {"matmul/transpose", [](Tape&, std::span<const Var> v) { return sum(square(matmul(v[0], transpose(v[1])))); }},
      {"scale/neg", [](Tape&, std::span<const Var> v) { return sum(square(neg(scale(v[0], 3.0)))); }},
      {"select_cols", [&pick](Tape&, std::span<const Var> v) { return sum(square(select_cols(v[0], pick))); }},
      {"concat", [](Tape&, std::span<const Var> v) {
         std::vector<Var> c = {v[0], v[1]};
         std::vector<Var> r = {concat_cols(c), square(concat_cols(c))};
         return sum(tanh(concat_rows(r)));
       }},
      {"shift", [](Tape&, std::span<const Var> v) { return sum(square(shift_cols(v[0], 1) - shift_cols(v[1], -2))); }},
      {"gather", [&cells](Tape&, std::span<const Var> v) { return sum(square(gather(v[0], cells))); }},
      {"logsumexp", [&mask](Tape&, std::span<const Var> v) { return sum(square(logsumexp_rows(v[0], mask))); }},
      {"cosine_matrix", [](Tape&, std::span<const Var> v) { return sum(square(cosine_matrix(v[0], v[1]))); }},
  };
  for (const auto& [name, f] : cases) {
    CAPTURE(name);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Tensor> inputs = {random_tensor(rng, {3, 3}), random_tensor(rng, {3, 3})};
      auto analytic = grad(f, inputs);
      auto numeric = finite_difference_gradient(f, inputs, 1e-5);
      for (std::size_t k = 0; k < inputs.size(); ++k)
        CHECK(max_relative_error(analytic[k], numeric[k]) <= 1e-4);
    }
  }
}

TEST_CASE("backward is deterministic") {
  std::mt19937_64 rng(5);
  std::vector<Tensor> inputs = {random_tensor(rng, {4, 6}), random_tensor(rng, {4, 6})};
  ScalarFunction f = [](Tape&, std::span<const Var> v) {
    return sum(exp(scale(cosine_matrix(v[0], v[1]), 10.0)));
  };
  auto g1 = grad(f, inputs);
  auto g2 = grad(f, inputs);
  CHECK(g1[0] == g2[0]);
  CHECK(g1[1] == g2[1]);
}

TEST_CASE("tensor shape invariants") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.transposed()(2, 1) == 6.0);
  Tape tape;
  CHECK_THROWS_AS(matmul(tape.constant(t), tape.constant(t)), DimensionError);
}
