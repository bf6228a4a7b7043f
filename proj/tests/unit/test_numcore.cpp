#include <doctest.h>

#include <cmath>
#include <vector>

#include "mql/numcore/adam.hpp"
#include "mql/numcore/grad_check.hpp"
#include "mql/numcore/mlp.hpp"
#include "mql/numcore/random.hpp"

using namespace mql;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace {

// Independent forward pass, one sample at a time with explicit loops.
Vec naive_forward(const Mlp<double>& p, const Vec& x) {
  Vec h = x;
  for (std::size_t k = 0; k < p.weights.size(); ++k) {
    Vec z(p.weights[k].rows());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      double acc = p.biases[k](i);
      for (Eigen::Index j = 0; j < h.size(); ++j) acc += p.weights[k](i, j) * h(j);
      z(i) = p.activations[k] == Activation::relu ? std::max(acc, 0.0) : acc;
    }
    h = z;
  }
  return h;
}

Mat random_input(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

OutputLoss<double> squared_error(const Mat& target) {
  return [target](const Mat& y) {
    const Mat d = y - target;
    return std::make_pair(0.5 * d.squaredNorm(), Mat(d));
  };
}

}  // namespace

TEST_CASE("mlp_init zeroes biases and is deterministic") {
  const auto a = mlp_init<double>({3, 2}, 7);
  const auto b = mlp_init<double>({3, 2}, 7);
  CHECK(a.biases[0].isZero(0.0));
  CHECK(a.weights[0] == b.weights[0]);
  const double bound = 1.0 / std::sqrt(3.0);
  CHECK(a.weights[0].cwiseAbs().maxCoeff() <= bound);
  const auto c = mlp_init<double>({3, 2}, 8);
  CHECK(a.weights[0] != c.weights[0]);
}

TEST_CASE("mlp parameter count matches the layer shapes") {
  const auto p = mlp_init<double>({4, 400, 300, 1}, 1);
  // 4*400 + 400 + 400*300 + 300 + 300 + 1
  CHECK(p.parameter_count() == 122601);
  Eigen::Index stored = 0;
  auto copy = p;
  for_each_parameter(copy, [&](double&) { ++stored; });
  CHECK(stored == 122601);
  CHECK(p.activations.back() == Activation::identity);
}

TEST_CASE("mlp_init rejects bad layer sizes") {
  CHECK_THROWS_AS(mlp_init<double>({3}, 1), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init<double>({3, 0, 1}, 1), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init<double>({-2, 1}, 1), std::invalid_argument);
}

TEST_CASE("mlp_forward degenerate cases") {
  auto p = mlp_init<double>({3, 4, 2}, 3);
  for (auto& w : p.weights) w.setZero();
  p.biases[1] << 0.25, -1.5;
  const Mat out = mlp_predict(p, random_input(3, 1, 1));
  CHECK(out(0, 0) == 0.25);
  CHECK(out(1, 0) == -1.5);

  Mlp<double> lin;
  lin.weights.push_back((Mat(1, 2) << 1.0, 1.0).finished());
  lin.biases.push_back(Vec::Zero(1));
  lin.activations.push_back(Activation::identity);
  CHECK(mlp_predict(lin, (Vec(2) << 3.0, 4.0).finished())(0, 0) == 7.0);
  CHECK_THROWS_AS(mlp_forward(lin, Vec::Zero(3)), std::invalid_argument);
}

TEST_CASE("mlp_forward matches a naive loop implementation") {
  const auto p = mlp_init<double>({5, 16, 8, 3}, 11);
  const Mat x = random_input(5, 7, 2);
  const auto acts = mlp_forward(p, x);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    CHECK((acts.output().col(j) - naive_forward(p, x.col(j))).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(mlp_predict(p, x) == acts.output());
  CHECK(mlp_forward(p, x).output() == acts.output());
}

TEST_CASE("mlp_backward basic identities") {
  const auto p = mlp_init<double>({3, 6, 2}, 5);
  const Mat x = random_input(3, 4, 9);
  const auto acts = mlp_forward(p, x);
  const auto zero = mlp_backward(p, acts, Mat::Zero(2, 4));
  for_each_parameter(zero.grad, [](double g) { CHECK(g == 0.0); });

  Mlp<double> lin;
  lin.weights.push_back(Mat::Constant(1, 1, 0.7));
  lin.biases.push_back(Vec::Zero(1));
  lin.activations.push_back(Activation::identity);
  const auto lin_acts = mlp_forward(lin, Mat::Constant(1, 1, 3.0));
  const auto g = mlp_backward(lin, lin_acts, Mat::Constant(1, 1, 1.0));
  CHECK(g.grad.weights[0](0, 0) == 3.0);
  CHECK(g.grad.biases[0](0) == 1.0);
  CHECK(g.input_grad(0, 0) == doctest::Approx(0.7));
  CHECK_THROWS_AS(mlp_backward(p, acts, Mat::Zero(3, 4)), std::invalid_argument);
}

TEST_CASE("relu subgradient at zero is zero") {
  Mlp<double> p;
  p.weights.push_back(Mat::Constant(1, 1, 1.0));
  p.biases.push_back(Vec::Zero(1));
  p.activations.push_back(Activation::relu);
  const auto acts = mlp_forward(p, Mat::Zero(1, 1));
  const auto g = mlp_backward(p, acts, Mat::Ones(1, 1));
  CHECK(g.grad.biases[0](0) == 0.0);
}

TEST_CASE("grad_check: exact, random and corrupted backward passes") {
  SUBCASE("identity network with quadratic loss") {
    Mlp<double> id;
    id.weights.push_back(Mat::Identity(3, 3));
    id.biases.push_back(Vec::Zero(3));
    id.activations.push_back(Activation::identity);
    CHECK(grad_check(id, random_input(3, 2, 4), squared_error(Mat::Zero(3, 2))) < 1e-9);
  }
  SUBCASE("random [3,16,1] network") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto p = mlp_init<double>({3, 16, 1}, seed);
      CHECK(grad_check(p, random_input(3, 8, seed + 100), squared_error(random_input(1, 8, seed + 200))) < 1e-6);
    }
  }
  SUBCASE("deeper network with batch") {
    const auto p = mlp_init<double>({4, 12, 9, 2}, 42);
    CHECK(grad_check(p, random_input(4, 5, 1), squared_error(random_input(2, 5, 2))) < 1e-6);
  }
  SUBCASE("a sign flip in the analytic gradient is detected") {
    auto p = mlp_init<double>({3, 16, 1}, 3);
    const Mat x = random_input(3, 8, 5);
    const auto loss = squared_error(random_input(1, 8, 6));
    const auto acts = mlp_forward(p, x);
    auto back = mlp_backward(p, acts, loss(acts.output()).second);
    back.grad.weights[0] *= -1.0;
    std::vector<double*> coords;
    for_each_parameter(p, [&](double& v) { coords.push_back(&v); });
    std::vector<double> analytic;
    for_each_parameter(back.grad, [&](double g) { analytic.push_back(g); });
    const double err =
        finite_difference_check<double>(coords, analytic, [&] { return loss(mlp_predict(p, x)).first; });
    CHECK(err > 1e-2);
  }
}

TEST_CASE("gradient_relative_error reports non-finite comparisons as infinity") {
  CHECK(std::isinf(gradient_relative_error(std::nan(""), 1.0)));
  CHECK(gradient_relative_error(2.0, 2.0) == 0.0);
  CHECK(gradient_relative_error(0.5, 0.25) == doctest::Approx(0.25));
}

TEST_CASE("adam: zero gradient leaves parameters bitwise unchanged") {
  auto p = mlp_init<double>({3, 4, 1}, 2);
  const auto before = p;
  auto st = AdamState<double>::for_params(p);
  adam_step(st, p, MlpGrad<double>::zeros_like(p), 1e-3);
  CHECK(st.step_count == 1);
  for (std::size_t k = 0; k < p.weights.size(); ++k) {
    CHECK(p.weights[k] == before.weights[k]);
    CHECK(p.biases[k] == before.biases[k]);
  }
}

TEST_CASE("adam: first step moves each parameter by lr in the gradient's sign") {
  auto p = mlp_init<double>({2, 3}, 4);
  const auto before = p;
  auto g = MlpGrad<double>::zeros_like(p);
  g.weights[0] << 50.0, -50.0, 80.0, -120.0, 65.0, 200.0;
  g.biases[0] << -75.0, 90.0, 55.0;
  auto st = AdamState<double>::for_params(p);
  const double lr = 1e-3;
  adam_step(st, p, g, lr);
  const Mat dw = p.weights[0] - before.weights[0];
  for (Eigen::Index i = 0; i < dw.size(); ++i)
    CHECK(std::abs(dw.data()[i] + lr * (g.weights[0].data()[i] > 0 ? 1.0 : -1.0)) < 1e-12);
  const Vec db = p.biases[0] - before.biases[0];
  for (Eigen::Index i = 0; i < db.size(); ++i) CHECK(std::abs(db(i) + lr * (g.biases[0](i) > 0 ? 1.0 : -1.0)) < 1e-12);
}

TEST_CASE("adam minimizes a convex quadratic") {
  Mlp<double> p;
  p.weights.push_back(Mat::Zero(2, 2));
  p.biases.push_back(Vec::Zero(2));
  p.activations.push_back(Activation::identity);
  Mat cw(2, 2);
  cw << 0.5, -1.0, 0.25, 1.5;
  const Vec cb = (Vec(2) << -0.75, 0.3).finished();
  auto st = AdamState<double>::for_params(p);
  auto loss = [&] { return (p.weights[0] - cw).squaredNorm() + (p.biases[0] - cb).squaredNorm(); };
  for (int i = 0; i < 200; ++i) {
    MlpGrad<double> g;
    g.weights.push_back(2.0 * (p.weights[0] - cw));
    g.biases.push_back(2.0 * (p.biases[0] - cb));
    adam_step(st, p, g, 0.05);
  }
  CHECK(st.step_count == 200);
  CHECK(loss() < 1e-3);
}

TEST_CASE("adam rejects non-finite and mis-shaped gradients") {
  auto p = mlp_init<double>({2, 2}, 1);
  const auto before = p;
  auto st = AdamState<double>::for_params(p);
  auto g = MlpGrad<double>::zeros_like(p);
  g.weights[0](0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(adam_step(st, p, g, 1e-3), DivergenceError);
  CHECK(st.step_count == 0);
  CHECK(p.weights[0] == before.weights[0]);
  auto bad = MlpGrad<double>::zeros_like(mlp_init<double>({3, 2}, 1));
  CHECK_THROWS_AS(adam_step(st, p, bad, 1e-3), std::invalid_argument);
}

TEST_CASE("soft_update interpolates toward the source") {
  auto src = mlp_init<double>({1, 1}, 1);
  auto dst = src;
  src.weights[0](0, 0) = 2.0;
  dst.weights[0](0, 0) = 0.0;
  soft_update(src, dst, 0.5);
  CHECK(dst.weights[0](0, 0) == 1.0);
  soft_update(src, dst, 1.0);
  CHECK(dst.weights[0] == src.weights[0]);
}

TEST_CASE("float instantiation compiles and runs") {
  const auto p = mlp_init<float>({3, 5, 1}, 9);
  const Eigen::MatrixXf x = Eigen::MatrixXf::Ones(3, 2);
  const auto acts = mlp_forward(p, x);
  CHECK(acts.output().cols() == 2);
  const auto back = mlp_backward(p, acts, Eigen::MatrixXf::Ones(1, 2));
  CHECK(back.grad.all_finite());
}

TEST_CASE("seed derivation separates consumers") {
  CHECK(derive_seed(1, "env") != derive_seed(1, "explore"));
  CHECK(derive_seed(1, "env") != derive_seed(2, "env"));
  CHECK(derive_seed(1, "env") == derive_seed(1, "env"));
  CHECK(derive_seed(5, std::uint64_t{0}) != derive_seed(5, std::uint64_t{1}));
}
