#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "matgraph/errors.hpp"
#include "matgraph/metrics.hpp"

using namespace matgraph;

namespace {

struct Fuzz {
  PredictionSet ranked;
  std::vector<std::int32_t> truth;
  std::vector<std::uint8_t> mask;
  std::size_t classes = 0;
};

/// Random softmax-like rows with a few exact ties thrown in.
Fuzz fuzz(std::size_t n, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::uniform_int_distribution<int> label(0, int(classes) - 1);
  Fuzz f;
  f.classes = classes;
  ad::Tensor<float> p(n, classes);
  for (std::size_t r = 0; r < n; ++r) {
    float sum = 0;
    for (std::size_t c = 0; c < classes; ++c) sum += p.at(r, c) = (r % 7 == 0 && c < 2) ? 0.5f : u(rng);
    for (std::size_t c = 0; c < classes; ++c) p.at(r, c) /= sum;
    f.truth.push_back(label(rng));
    f.mask.push_back(r % 5 != 0);
  }
  f.ranked = rank_predictions(p);
  return f;
}

double accuracy(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                const std::vector<std::uint8_t>& mask) {
  std::size_t n = 0, hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (mask[i]) {
      ++n;
      hit += pred[i] == truth[i];
    }
  return double(hit) / double(n);
}

/// Support-weighted mean of 2PR/(P+R), computed from precision and recall.
double weighted_f1_oracle(const std::vector<std::int32_t>& pred, const std::vector<std::int32_t>& truth,
                          const std::vector<std::uint8_t>& mask) {
  std::map<int, double> predicted, actual, correct;
  double n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!mask[i]) continue;
    n += 1;
    predicted[pred[i]] += 1;
    actual[truth[i]] += 1;
    if (pred[i] == truth[i]) correct[truth[i]] += 1;
  }
  double total = 0;
  for (const auto& [c, support] : actual) {
    const double p = predicted[c] > 0 ? correct[c] / predicted[c] : 0.0;
    const double r = correct[c] / support;
    total += support * (p + r > 0 ? 2 * p * r / (p + r) : 0.0);
  }
  return total / n;
}

}  // namespace

TEST_CASE("micro F1 by hand") {
  const std::vector<std::uint8_t> all{1, 1, 1};
  CHECK(micro_f1({0, 1, 0}, {0, 1, 1}, all) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(micro_f1({2, 1, 0}, {2, 1, 0}, all) == 1.0);
  CHECK(micro_f1({1, 1, 1}, {0, 0, 0}, all) == 0.0);
  // Masked instances do not count.
  CHECK(micro_f1({0, 1, 0}, {0, 1, 1}, {1, 1, 0}) == 1.0);
}

TEST_CASE("micro F1 equals accuracy on fuzzed instances") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto f = fuzz(1000, 6, seed);
    const auto pred = argmax_labels(f.ranked);
    CHECK(micro_f1(pred, f.truth, f.mask) == accuracy(pred, f.truth, f.mask));
  }
}

TEST_CASE("weighted F1 matches the precision/recall oracle") {
  const std::vector<std::uint8_t> all{1, 1, 1, 1};
  CHECK(weighted_f1({0, 0, 1, 1}, {0, 0, 0, 1}, all) == doctest::Approx((3 * 0.8 + 2.0 / 3.0) / 4));
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const auto f = fuzz(500, 5, seed);
    const auto pred = argmax_labels(f.ranked);
    CHECK(weighted_f1(pred, f.truth, f.mask) == doctest::Approx(weighted_f1_oracle(pred, f.truth, f.mask)).epsilon(1e-12));
  }
}

TEST_CASE("weighted F1 equals micro F1 for equal supports and equal per-class F1") {
  // Each class: one hit, one miss in each direction.
  const std::vector<std::int32_t> truth{0, 0, 1, 1, 2, 2};
  const std::vector<std::int32_t> pred{0, 1, 1, 2, 2, 0};
  const std::vector<std::uint8_t> all(6, 1);
  CHECK(weighted_f1(pred, truth, all) == doctest::Approx(micro_f1(pred, truth, all)).epsilon(1e-15));
  CHECK(micro_f1(pred, truth, all) == doctest::Approx(0.5));
}

TEST_CASE("ranked rows break ties by ascending label") {
  const float p[] = {0.3f, 0.4f, 0.3f};
  const auto r = rank_row(p, 3);
  CHECK(r.labels == std::vector<std::int32_t>{1, 0, 2});
  CHECK(r.probs[0] == doctest::Approx(0.4));

  const auto f = fuzz(200, 5, 3);
  for (const auto& row : f.ranked) {
    CHECK(std::is_sorted(row.probs.rbegin(), row.probs.rend()));
    for (std::size_t i = 1; i < row.probs.size(); ++i)
      if (row.probs[i] == row.probs[i - 1]) CHECK(row.labels[i] > row.labels[i - 1]);
    CHECK(std::accumulate(row.probs.begin(), row.probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("top-k by hand") {
  const float p[] = {0.5f, 0.3f, 0.2f};
  const PredictionSet ranked{rank_row(p, 3)};
  CHECK(topk_score(ranked, {1}, {1}, 1) == 0.0);
  CHECK(topk_score(ranked, {1}, {1}, 2) == 1.0);
  CHECK(topk_score(ranked, {2}, {1}, 3) == 1.0);
  CHECK(topk_predictions(ranked, {1}, 1) == std::vector<std::int32_t>{0});
  CHECK(topk_predictions(ranked, {1}, 2) == std::vector<std::int32_t>{1});
}

TEST_CASE("top-k is monotone, hits everything at k = C and matches argmax at k = 1") {
  for (std::uint64_t seed = 20; seed < 25; ++seed) {
    const auto f = fuzz(1000, 7, seed);
    double prev = 0.0;
    for (int k = 1; k <= 7; ++k) {
      const double s = topk_score(f.ranked, f.truth, f.mask, k);
      CHECK(s >= prev);
      prev = s;
    }
    CHECK(prev == 1.0);
    CHECK(topk_score(f.ranked, f.truth, f.mask, 1) == micro_f1(argmax_labels(f.ranked), f.truth, f.mask));
  }
}

TEST_CASE("metrics are invariant under a consistent reordering") {
  auto f = fuzz(300, 4, 31);
  const auto pred = argmax_labels(f.ranked);
  const double micro = micro_f1(pred, f.truth, f.mask);
  const double weighted = weighted_f1(pred, f.truth, f.mask);
  const double top2 = topk_score(f.ranked, f.truth, f.mask, 2);

  std::vector<std::size_t> perm(300);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  Fuzz g;
  for (auto i : perm) {
    g.ranked.push_back(f.ranked[i]);
    g.truth.push_back(f.truth[i]);
    g.mask.push_back(f.mask[i]);
  }
  const auto gpred = argmax_labels(g.ranked);
  CHECK(micro_f1(gpred, g.truth, g.mask) == micro);
  CHECK(weighted_f1(gpred, g.truth, g.mask) == doctest::Approx(weighted).epsilon(1e-14));
  CHECK(topk_score(g.ranked, g.truth, g.mask, 2) == top2);
}

TEST_CASE("metric errors") {
  const float p[] = {0.5f, 0.5f};
  const PredictionSet ranked{rank_row(p, 2)};
  CHECK_THROWS_AS(micro_f1({0}, {0}, {0}), MetricError);
  CHECK_THROWS_AS(weighted_f1({0}, {0}, {0}), MetricError);
  CHECK_THROWS_AS(micro_f1({0, 1}, {0}, {1}), MetricError);
  CHECK_THROWS_AS(topk_score(ranked, {0}, {1}, 3), MetricError);
  CHECK_THROWS_AS(topk_score(ranked, {0}, {1}, 0), MetricError);
  CHECK_THROWS_AS(topk_score(ranked, {0}, {0}, 1), MetricError);
}

TEST_CASE("report collects every metric within [0, 1]") {
  const auto f = fuzz(400, 4, 41);
  const auto r = compute_report(f.ranked, f.truth, f.mask, 4);
  CHECK(r.instances == std::size_t(std::count(f.mask.begin(), f.mask.end(), 1)));
  REQUIRE(r.topk.size() == 3);
  REQUIRE(r.weighted_topk.size() == 3);
  CHECK(r.topk[0] == r.micro_f1);
  CHECK(r.weighted_topk[0] == doctest::Approx(r.weighted_f1).epsilon(1e-14));
  std::int64_t support = 0;
  for (const auto& c : r.per_class) {
    CHECK(c.precision >= 0.0);
    CHECK(c.precision <= 1.0);
    CHECK(c.recall >= 0.0);
    CHECK(c.recall <= 1.0);
    support += c.support;
  }
  CHECK(std::size_t(support) == r.instances);
  for (double v : {r.micro_f1, r.weighted_f1}) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  const auto j = r.to_json();
  CHECK(j.at("topk").size() == 3);
  CHECK(j.at("per_class").size() == 4);
  // Two classes cap the top-k list at two entries.
  const auto f2 = fuzz(50, 2, 42);
  CHECK(compute_report(f2.ranked, f2.truth, f2.mask, 2).topk.size() == 2);
}
