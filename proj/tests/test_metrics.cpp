#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "lesionbench/error.hpp"
#include "lesionbench/metrics.hpp"
#include "lesionbench/random.hpp"

using namespace lesionbench;

namespace {

ConfusionMatrix example() { return ConfusionMatrix(3, {2, 1, 0, 0, 1, 1, 1, 0, 2}); }

ConfusionMatrix random_matrix(SplitMix64& rng, std::size_t n) {
  ConfusionMatrix cm(n);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t p = 0; p < n; ++p) {
      if (rng.below(3) != 0) cm.add(t, p, rng.below(20));
    }
  }
  if (cm.total() == 0) cm.add(0, n - 1);
  return cm;
}

}  // namespace

TEST_CASE("confusion counting") {
  const std::vector<std::size_t> t1 = {0, 1, 2};
  const auto id = confusion(t1, t1, 3);
  CHECK(id == ConfusionMatrix(3, {1, 0, 0, 0, 1, 0, 0, 0, 1}));

  const std::vector<std::size_t> t2 = {0, 0}, p2 = {1, 1};
  CHECK(confusion(t2, p2, 3) == ConfusionMatrix(3, {0, 2, 0, 0, 0, 0, 0, 0, 0}));

  const std::vector<std::size_t> t3 = {0, 1, 1, 2}, p3 = {0, 2, 1, 2};
  const auto cm = confusion(t3, p3, 3);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(1, 2) == 1);
  CHECK(cm.at(1, 1) == 1);
  CHECK(cm.at(2, 2) == 1);
  CHECK(cm.total() == 4);

  const std::vector<std::size_t> bad = {0, 3};
  CHECK_THROWS_AS(confusion(t2, bad, 3), ValidationError);
  CHECK_THROWS_AS(confusion(t1, t2, 3), ValidationError);
  CHECK_THROWS_AS(confusion(std::span<const std::size_t>{}, std::span<const std::size_t>{}, 3), ValidationError);
}

TEST_CASE("jaccard macro values") {
  CHECK(jaccard_macro(ConfusionMatrix(3, {4, 0, 0, 0, 2, 0, 0, 0, 9})) == 100.0);
  CHECK(jaccard_macro(ConfusionMatrix(3, {0, 3, 1, 2, 0, 5, 1, 1, 0})) == 0.0);
  CHECK(jaccard_macro(example()) == doctest::Approx(100.0 * (0.5 + 1.0 / 3.0 + 0.5) / 3.0));
  CHECK(jaccard_macro(example()) == doctest::Approx(44.44).epsilon(1e-3));
  // A class that never occurs and is never predicted contributes 0.
  CHECK(jaccard_macro(ConfusionMatrix(2, {5, 0, 0, 0})) == 50.0);
  CHECK_THROWS_AS(jaccard_macro(ConfusionMatrix(3)), ValidationError);
}

TEST_CASE("precision recall f1") {
  const ConfusionMatrix perfect(3, {4, 0, 0, 0, 2, 0, 0, 0, 9});
  for (auto mode : {Averaging::PerClass, Averaging::Micro, Averaging::Macro}) {
    for (const auto& p : prf(perfect, mode)) CHECK(p == Prf{1.0, 1.0, 1.0});
  }
  const auto micro = prf(example(), Averaging::Micro).front();
  CHECK(micro.precision == 0.625);
  CHECK(micro.recall == 0.625);
  CHECK(micro.f1 == 0.625);
  const auto per = prf(example(), Averaging::PerClass);
  CHECK(per[1].precision == 0.5);
  CHECK(per[0].recall == doctest::Approx(2.0 / 3.0));
  const auto macro = prf(example(), Averaging::Macro).front();
  CHECK(macro.f1 == doctest::Approx((per[0].f1 + per[1].f1 + per[2].f1) / 3.0));
  // Never-predicted class: precision 0 by convention, no NaN.
  const auto degenerate = prf(ConfusionMatrix(2, {3, 0, 2, 0}), Averaging::PerClass);
  CHECK(degenerate[1] == Prf{0.0, 0.0, 0.0});
}

TEST_CASE("uniform random predictions sit near chance") {
  SplitMix64 rng(1);
  ConfusionMatrix cm(3);
  for (int i = 0; i < 30000; ++i) cm.add(static_cast<std::size_t>(i % 3), rng.below(3));
  const auto micro = prf(cm, Averaging::Micro).front();
  CHECK(micro.f1 == doctest::Approx(1.0 / 3.0).epsilon(0.05));
  CHECK(micro.precision == micro.recall);
}

TEST_CASE("metric identities on random matrices") {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto cm = random_matrix(rng, 2 + rng.below(5));
    const auto micro = prf(cm, Averaging::Micro).front();
    const double acc = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
    REQUIRE(micro.precision == acc);
    REQUIRE(micro.recall == acc);
    REQUIRE(micro.f1 == acc);
    const auto report = evaluate(cm, std::vector<std::string>(cm.num_classes(), "c"));
    for (const auto& c : report.per_class) {
      REQUIRE(std::abs(c.jaccard - c.f1 / (2.0 - c.f1)) <= 1e-12);
    }
    const bool zero_diag = cm.trace() == 0;
    REQUIRE((jaccard_macro(cm) == 0.0) == zero_diag);
    const bool off_zero = cm.trace() == cm.total();
    // 100 needs every class to have TP > 0 as well.
    bool all_present = true;
    for (std::size_t c = 0; c < cm.num_classes(); ++c) all_present = all_present && cm.at(c, c) > 0;
    if (off_zero && all_present) REQUIRE(jaccard_macro(cm) == doctest::Approx(100.0));
    if (!off_zero) REQUIRE(jaccard_macro(cm) < 100.0);
  }
}

TEST_CASE("permuting the class axis permutes per-class values only") {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    const auto cm = random_matrix(rng, n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(perm), rng);
    ConfusionMatrix permuted(n);
    for (std::size_t t = 0; t < n; ++t) {
      for (std::size_t p = 0; p < n; ++p) permuted.add(perm[t], perm[p], cm.at(t, p));
    }
    const auto a = evaluate(cm, std::vector<std::string>(n, "c"));
    const auto b = evaluate(permuted, std::vector<std::string>(n, "c"));
    for (std::size_t c = 0; c < n; ++c) REQUIRE(a.per_class[c] == b.per_class[perm[c]]);
    CHECK(a.micro == b.micro);
    CHECK(a.macro.f1 == doctest::Approx(b.macro.f1).epsilon(1e-14));
    CHECK(a.jaccard_macro_percent == doctest::Approx(b.jaccard_macro_percent).epsilon(1e-14));
  }
}

TEST_CASE("evaluation report JSON round trip") {
  const auto r = evaluate(example(), {"benign", "malignant", "melanoma"});
  CHECK(r.accuracy == 0.625);
  const auto back = EvaluationReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  CHECK(back == r);
  CHECK_THROWS_AS(evaluate(example(), {"a", "b"}), ValidationError);
}
