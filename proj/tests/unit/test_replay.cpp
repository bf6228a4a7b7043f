#include <doctest.h>

#include <cmath>
#include <numeric>

#include "mql/replay/buffer.hpp"
#include "mql/replay/sum_tree.hpp"

using namespace mql;

namespace {

Transition tagged(double tag) {
  Transition t;
  t.s = Obs::Constant(2, tag);
  t.a = 0;
  t.r = tag;
  t.s_next = Obs::Constant(2, tag + 1);
  return t;
}

ReplayBuffer filled(SamplerScheme scheme, double alpha, const std::vector<double>& sigma) {
  PriorityParams p;
  p.scheme = scheme;
  p.alpha = alpha;
  ReplayBuffer b(p, 64);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    b.push(tagged(static_cast<double>(i)));
    idx.push_back(i);
  }
  b.set_priorities(idx, Eigen::Map<const Eigen::VectorXd>(sigma.data(), static_cast<Eigen::Index>(sigma.size())));
  return b;
}

// Linear-scan oracle over the first n leaves.
std::size_t scan_prefix(const SumTree& t, std::size_t n, double mass) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += t.leaf(i);
    if (acc > mass) return i;
  }
  return n - 1;
}

void check_tree(const ReplayBuffer& b) {
  const auto& t = b.tree();
  CHECK(t.max_sum_defect() < 1e-9);
  double naive = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) naive += std::pow(b.priority(i), b.params().alpha);
  CHECK(std::abs(t.total() - naive) < 1e-9);
}

}  // namespace

TEST_CASE("sum tree basics") {
  SumTree t(5);
  CHECK(t.capacity() == 8);
  for (std::size_t i = 0; i < 4; ++i) t.set(i, static_cast<double>(i + 1));
  CHECK(t.total() == 10.0);
  CHECK(t.find_prefix(0.5) == 0);
  CHECK(t.find_prefix(5.9) == 2);
  CHECK(t.find_prefix(1.0) == 1);
  CHECK(t.find_prefix(9.99) == 3);
  CHECK_THROWS_AS(t.find_prefix(10.0), std::out_of_range);
  CHECK_THROWS_AS(t.find_prefix(-0.1), std::out_of_range);
  CHECK_THROWS_AS(t.set(0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(t.set(8, 1.0), std::out_of_range);
}

TEST_CASE("prefix search agrees with a linear scan") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  SumTree t(1000);
  for (std::size_t i = 0; i < 1000; ++i) t.set(i, i % 17 == 0 ? 0.0 : u(rng));
  std::uniform_real_distribution<double> m(0.0, t.total());
  int mismatches = 0;
  for (int q = 0; q < 10000; ++q) {
    const double mass = m(rng);
    if (t.find_prefix(mass) != scan_prefix(t, 1000, mass)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("push assigns priority one and keeps tree sums") {
  PriorityParams p;
  p.scheme = SamplerScheme::mper;
  p.alpha = 0.7;
  ReplayBuffer b(p, 8);
  b.push(tagged(0));
  CHECK(b.size() == 1);
  CHECK(b.priority(0) == 1.0);
  CHECK(b.tree().total() == doctest::Approx(std::pow(1.0, 0.7)));
  b.set_priorities({0}, Eigen::VectorXd::Constant(1, 3.0));
  b.push(tagged(1));
  CHECK(b.tree().total() == doctest::Approx(std::pow(3.0, 0.7) + 1.0).epsilon(1e-14));
}

TEST_CASE("max new-priority mode uses the largest priority seen") {
  PriorityParams p;
  p.scheme = SamplerScheme::per;
  p.new_priority = NewPriority::max;
  ReplayBuffer b(p, 8);
  b.push(tagged(0));
  b.set_priorities({0}, Eigen::VectorXd::Constant(1, 4.0));
  b.push(tagged(1));
  CHECK(b.priority(1) == 4.0);
}

TEST_CASE("ring buffer evicts the oldest") {
  ReplayBuffer b(PriorityParams{}, 4);
  for (int i = 0; i < 5; ++i) b.push(tagged(i));
  CHECK(b.size() == 4);
  CHECK(b[0].r == 4.0);
  CHECK(b[1].r == 1.0);
  for (int i = 5; i < 11; ++i) b.push(tagged(i));
  std::vector<double> rs;
  for (std::size_t i = 0; i < 4; ++i) rs.push_back(b[i].r);
  std::sort(rs.begin(), rs.end());
  CHECK(rs == std::vector<double>{7, 8, 9, 10});
}

TEST_CASE("probabilities follow the priority law") {
  const auto b = filled(SamplerScheme::per, 1.0, {1.0, 3.0});
  CHECK(b.probability(0) == 0.25);
  CHECK(b.probability(1) == 0.75);
  const auto c = filled(SamplerScheme::per, 0.5, {1.0, 9.0});
  CHECK(c.probability(0) == doctest::Approx(0.25));
}

TEST_CASE("stratified sampling frequencies over 1e6 draws") {
  const auto b = filled(SamplerScheme::mper, 1.0, {1, 2, 3, 4});
  Rng rng(99);
  std::array<double, 4> counts{};
  const int rounds = 250000, m = 4;
  for (int k = 0; k < rounds; ++k)
    for (auto i : b.sample(m, 0.4, rng).indices) counts[i] += 1;
  const double n = static_cast<double>(rounds) * m;
  for (int i = 0; i < 4; ++i) CHECK(std::abs(counts[i] / n - 0.1 * (i + 1)) < 0.005);
}

TEST_CASE("importance weights") {
  Rng rng(1);
  const auto flat = filled(SamplerScheme::per, 0.7, std::vector<double>(10, 2.5));
  const auto s = flat.sample(6, 0.4, rng);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(s.is_weights(i) == doctest::Approx(1.0).epsilon(1e-14));

  const auto skew = filled(SamplerScheme::per, 1.0, {1, 2, 3, 4});
  const auto t = skew.sample(4, 0.6, rng);
  CHECK(t.is_weights.maxCoeff() == 1.0);
  Eigen::VectorXd raw(4);
  for (Eigen::Index i = 0; i < 4; ++i) raw(i) = std::pow(1.0 / (4.0 * t.probabilities(i)), 0.6);
  raw /= raw.maxCoeff();
  CHECK((raw - t.is_weights).norm() < 1e-12);

  ReplayBuffer u(PriorityParams{}, 16);
  for (int i = 0; i < 16; ++i) u.push(tagged(i));
  CHECK(u.sample(8, 1.0, rng).is_weights == Eigen::VectorXd::Ones(8));
  CHECK_THROWS_AS(u.sample(17, 1.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(u.sample(0, 1.0, rng), std::invalid_argument);
}

TEST_CASE("mper and per priority formulas") {
  PriorityParams p;
  p.scheme = SamplerScheme::mper;
  ReplayBuffer b(p, 8);
  for (int i = 0; i < 3; ++i) b.push(tagged(i));
  b.update_priorities_mper({1}, Eigen::VectorXd::Constant(1, 0.1), Eigen::VectorXd::Constant(1, 0.2),
                           Eigen::VectorXd::Constant(1, 0.09), {1, 1, 1});
  CHECK(b.priority(1) == doctest::Approx(0.14 + p.epsilon).epsilon(1e-14));
  b.update_priorities_mper({2}, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1),
                           {1, 1, 1});
  CHECK(b.priority(2) == p.epsilon);
  CHECK(b.probability(2) > 0.0);
  b.update_priorities_per({0}, Eigen::VectorXd::Constant(1, -0.3));
  CHECK(b.priority(0) == doctest::Approx(0.3 + p.epsilon));
  check_tree(b);
  CHECK_THROWS_AS(b.update_priorities_per({3}, Eigen::VectorXd::Zero(1)), std::out_of_range);
  CHECK_THROWS_AS(b.update_priorities_per({0, 1}, Eigen::VectorXd::Zero(1)), std::invalid_argument);
}

TEST_CASE("duplicate indices in one update: last write wins") {
  auto b = filled(SamplerScheme::per, 1.0, {1, 1, 1});
  b.set_priorities({1, 1}, (Eigen::VectorXd(2) << 5.0, 2.0).finished());
  CHECK(b.priority(1) == 2.0);
  check_tree(b);
}

TEST_CASE("tree integrity under random pushes and updates") {
  PriorityParams p;
  p.scheme = SamplerScheme::mper;
  p.alpha = 0.6;
  p.rebuild_interval = 257;
  ReplayBuffer b(p, 300);
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int step = 0; step < 5000; ++step) {
    b.push(tagged(step));
    if (b.size() >= 8 && step % 3 == 0) {
      const auto s = b.sample(8, 0.5, rng);
      Eigen::VectorXd dq(8), dr(8), dt(8);
      for (int i = 0; i < 8; ++i) {
        dq(i) = u(rng);
        dr(i) = u(rng);
        dt(i) = u(rng);
      }
      b.update_priorities_mper(s.indices, dq, dr, dt, {0.5, 1.5, 2.0});
    }
    if (step % 500 == 0) check_tree(b);
  }
  check_tree(b);
}

TEST_CASE("mper ranking matches per ranking when only the Q term counts") {
  Rng rng(2);
  std::normal_distribution<double> g;
  PriorityParams pm, pp;
  pm.scheme = SamplerScheme::mper;
  pp.scheme = SamplerScheme::per;
  ReplayBuffer m(pm, 32), q(pp, 32);
  std::vector<std::size_t> idx;
  for (int i = 0; i < 20; ++i) {
    m.push(tagged(i));
    q.push(tagged(i));
    idx.push_back(i);
  }
  Eigen::VectorXd dq(20), other(20);
  for (int i = 0; i < 20; ++i) {
    dq(i) = g(rng);
    other(i) = std::abs(g(rng));
  }
  m.update_priorities_mper(idx, dq, other, other, {1.0, 0.0, 0.0});
  q.update_priorities_per(idx, dq);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 20; ++j) CHECK((m.priority(i) < m.priority(j)) == (q.priority(i) < q.priority(j)));
}

TEST_CASE("beta schedule") {
  CHECK(beta_schedule(0, 1000, 0.4) == 0.4);
  CHECK(beta_schedule(1000, 1000, 0.4) == 1.0);
  CHECK(beta_schedule(500, 1000, 0.4) == doctest::Approx(0.7));
  double prev = 0.0;
  for (int s = 0; s <= 1000; s += 50) {
    const double b = beta_schedule(s, 1000, 0.4);
    CHECK(b >= prev);
    prev = b;
  }
}

TEST_CASE("uniform sampling is flat and ignores priorities") {
  auto b = filled(SamplerScheme::uniform, 0.7, {100, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  Rng rng(4);
  std::array<double, 10> counts{};
  const int draws = 200000;
  for (int k = 0; k < draws / 10; ++k)
    for (auto i : b.sample(10, 0.4, rng).indices) counts[i] += 1;
  double chi2 = 0.0;
  const double expected = draws / 10.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 9 degrees of freedom; 27.88 is the 0.999 quantile.
  CHECK(chi2 < 27.88);
  CHECK(b.probability(0) == 0.1);
}

TEST_CASE("sampler names") {
  CHECK(parse_sampler("mper") == SamplerScheme::mper);
  CHECK(to_string(SamplerScheme::per) == "per");
  CHECK_THROWS_AS(parse_sampler("rank"), std::invalid_argument);
  CHECK_THROWS_AS(ReplayBuffer(PriorityParams{}, 0), std::invalid_argument);
}
