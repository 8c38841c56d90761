#include <doctest.h>

#include <cmath>
#include <random>

#include "nestrank/pipeline.hpp"
#include "support/synthetic.hpp"

using namespace nestrank;
using namespace testsupport;

namespace {

// Ranker whose output layer ignores the input and produces fixed softmax
// scores; used to pin down the threshold rule.
PairwiseRanker fixed_output_ranker(double p_first) {
  PairwiseRanker r = PairwiseRanker::initialized(0);
  std::vector<double> params(r.flatten_params().size(), 0.0);
  // final layer bias is the last two entries of the flat layout
  params[params.size() - 2] = std::log(p_first / (1.0 - p_first));
  params[params.size() - 1] = 0.0;
  r.set_params(params);
  return r;
}

const VariantStats kA{10, 20, 30, 40};
const VariantStats kB{40, 30, 20, 10};

}  // namespace

TEST_CASE("normalize_pair divides by the joint sum") {
  auto v = normalize_pair(VariantStats{1, 0, 0, 0}, VariantStats{1, 0, 0, 0});
  CHECK(v == std::array<double, 8>{0.5, 0, 0, 0, 0.5, 0, 0, 0});

  auto w = normalize_pair(VariantStats{2, 2, 0, 0}, VariantStats{0, 0, 2, 2});
  CHECK(w == std::array<double, 8>{0.25, 0.25, 0, 0, 0, 0, 0.25, 0.25});

  CHECK_THROWS_AS(normalize_pair(VariantStats{0, 0, 0, 0}, VariantStats{0, 0, 0, 0}),
                  DegeneratePairError);

  double sum = 0;
  for (double x : normalize_pair(kA, kB)) sum += x;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize_pair of swapped inputs is the swapped vector") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 50; ++t) {
    VariantStats a{static_cast<std::int64_t>(rng() % 1000), static_cast<std::int64_t>(rng() % 1000),
                   static_cast<std::int64_t>(rng() % 1000), static_cast<std::int64_t>(rng() % 1000)};
    VariantStats b{static_cast<std::int64_t>(rng() % 1000), static_cast<std::int64_t>(rng() % 1000),
                   static_cast<std::int64_t>(rng() % 1000), 1 + static_cast<std::int64_t>(rng() % 1000)};
    auto ab = normalize_pair(a, b);
    auto ba = normalize_pair(b, a);
    for (int i = 0; i < 4; ++i) {
      CHECK(ab[static_cast<std::size_t>(i)] == ba[static_cast<std::size_t>(i + 4)]);
      CHECK(ab[static_cast<std::size_t>(i + 4)] == ba[static_cast<std::size_t>(i)]);
    }
  }
}

TEST_CASE("softmax outputs sum to one") {
  PairwiseRanker r = PairwiseRanker::initialized(7);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 100; ++t) {
    VariantStats a{static_cast<std::int64_t>(rng() % 100000), static_cast<std::int64_t>(rng() % 100000),
                   static_cast<std::int64_t>(rng() % 100000), static_cast<std::int64_t>(rng() % 100000)};
    VariantStats b{static_cast<std::int64_t>(rng() % 100000), static_cast<std::int64_t>(rng() % 100000),
                   static_cast<std::int64_t>(rng() % 100000), 1 + static_cast<std::int64_t>(rng() % 100000)};
    auto o = r.forward(normalize_pair(a, b));
    CHECK(std::fabs(o[0] + o[1] - 1.0) <= 1e-9);
  }
}

TEST_CASE("compare applies the 0.6 threshold") {
  CHECK(fixed_output_ranker(0.9).compare(kA, kB) == CompareOutcome::WIN_A);
  CHECK(fixed_output_ranker(0.45).compare(kA, kB) == CompareOutcome::DRAW);   // (0.45, 0.55)
  CHECK(fixed_output_ranker(0.39).compare(kA, kB) == CompareOutcome::WIN_B);  // (0.39, 0.61)
  CHECK(fixed_output_ranker(0.9).theta == 0.6);
  CHECK_THROWS_AS(fixed_output_ranker(0.9).compare(VariantStats{}, VariantStats{}),
                  DegeneratePairError);
}

TEST_CASE("analytic gradients match central finite differences") {
  PairwiseRanker r = PairwiseRanker::initialized(21);
  std::vector<TrainPair> batch = separable_dataset(4, 77);
  std::vector<double> grads = r.batch_gradients(batch);
  std::vector<double> params = r.flatten_params();
  REQUIRE(grads.size() == params.size());

  std::mt19937_64 rng(31);
  double worst = 0;
  int significant = 0;
  for (int t = 0; t < 60; ++t) {
    std::size_t idx = rng() % params.size();
    double h = 1e-5;
    std::vector<double> p = params;
    p[idx] += h;
    r.set_params(p);
    double up = r.batch_loss(batch);
    p[idx] -= 2 * h;
    r.set_params(p);
    double down = r.batch_loss(batch);
    r.set_params(params);
    double numeric = (up - down) / (2 * h);
    double analytic = grads[idx];
    if (std::fabs(numeric) > 1e-7 || std::fabs(analytic) > 1e-7) {
      double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
      double rel = std::fabs(numeric - analytic) / denom;
      CHECK(rel <= 1e-4);
      worst = std::max(worst, rel);
      ++significant;
    }
  }
  CHECK(significant > 0);
  CHECK(worst <= 1e-4);
}

TEST_CASE("training on separable data generalizes") {
  auto data = separable_dataset(2000, 1234);
  TrainReport rep = train_with_holdout(data, 0.7, 200, 0.05, 42);
  CHECK(rep.train_rows == 1400);
  CHECK(rep.holdout_rows == 600);
  CHECK(rep.holdout_accuracy >= 0.90);
}

TEST_CASE("contradictory labels yield chance accuracy without crashing") {
  auto data = contradictory_dataset(500, 88);
  PairwiseRanker net = PairwiseRanker::train(data, 20, 0.05, 42);
  double acc = PairwiseRanker::accuracy(net, data);
  CHECK(acc == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("zero epochs returns the initialized weights unchanged") {
  auto data = separable_dataset(50, 3);
  PairwiseRanker trained = PairwiseRanker::train(data, 0, 0.05, 99);
  CHECK(trained.flatten_params() == PairwiseRanker::initialized(99).flatten_params());
  CHECK_THROWS_AS(PairwiseRanker::train({}, 10, 0.05, 1), EmptyDatasetError);
}

TEST_CASE("weights file round-trips bit-identically") {
  auto data = separable_dataset(200, 6);
  PairwiseRanker net = PairwiseRanker::train(data, 5, 0.05, 7);
  std::string text = net.save_text();
  PairwiseRanker back = PairwiseRanker::load_text(text);
  CHECK(back.flatten_params() == net.flatten_params());
  CHECK(back.theta == net.theta);
  CHECK(back.save_text() == text);

  CHECK_THROWS_AS(PairwiseRanker::load_text("garbage"), ParseError);
  CHECK_THROWS_AS(PairwiseRanker::load("/nonexistent/weights"), MissingWeightsError);
}

TEST_CASE("tournament of one variant has zero wins") {
  PairwiseRanker r = PairwiseRanker::initialized(0);
  TournamentResult res = tournament(r, {TournamentEntry{"only", kA, Rational(1)}});
  CHECK(res.ranked == std::vector<std::string>{"only"});
  CHECK(res.wins == std::vector<std::pair<std::string, int>>{{"only", 0}});
  CHECK(res.symmetry == 1.0);
}

TEST_CASE("transitive tournament ranks by wins") {
  // trained on the mem rule; three variants with strictly ordered mem
  auto data = separable_dataset(2000, 1234);
  PairwiseRanker net = PairwiseRanker::train(data, 200, 0.05, 42);
  VariantStats a{100, 200, 300, 1000};
  VariantStats b{100, 200, 300, 8000000};
  VariantStats c{100, 200, 300, 16000000};
  CHECK(net.compare(a, b) == CompareOutcome::WIN_A);
  CHECK(net.compare(a, c) == CompareOutcome::WIN_A);
  CHECK(net.compare(b, c) == CompareOutcome::WIN_A);
  TournamentResult res = tournament(net, {TournamentEntry{"vc", c, Rational(3)},
                                          TournamentEntry{"vb", b, Rational(2)},
                                          TournamentEntry{"va", a, Rational(1)}});
  CHECK(res.ranked == std::vector<std::string>{"va", "vb", "vc"});
  CHECK(tournament_rank(net, {TournamentEntry{"vc", c, Rational(3)},
                              TournamentEntry{"vb", b, Rational(2)},
                              TournamentEntry{"va", a, Rational(1)}},
                        1) == std::vector<std::string>{"va"});
}

TEST_CASE("tournament output is a permutation and wins sum to decisive games") {
  PairwiseRanker net = PairwiseRanker::initialized(12);
  std::mt19937_64 rng(64);
  for (int t = 0; t < 20; ++t) {
    std::vector<TournamentEntry> entries;
    std::size_t count = 2 + rng() % 6;
    for (std::size_t v = 0; v < count; ++v) {
      VariantStats s{static_cast<std::int64_t>(rng() % 10000),
                     static_cast<std::int64_t>(rng() % 100000),
                     static_cast<std::int64_t>(rng() % 1000000),
                     1 + static_cast<std::int64_t>(rng() % 10000000)};
      entries.push_back(TournamentEntry{"v" + std::to_string(v), s,
                                        Rational(static_cast<std::int64_t>(rng() % 1000))});
    }
    TournamentResult res = tournament(net, entries);

    std::set<std::string> in_ids, out_ids(res.ranked.begin(), res.ranked.end());
    for (auto& e : entries) in_ids.insert(e.id);
    CHECK(out_ids == in_ids);

    int decisive = 0;
    for (std::size_t i = 0; i < entries.size(); ++i)
      for (std::size_t j = i + 1; j < entries.size(); ++j)
        if (net.compare(entries[i].stats, entries[j].stats) != CompareOutcome::DRAW) ++decisive;
    int total_wins = 0;
    for (auto& [id, w] : res.wins) total_wins += w;
    CHECK(total_wins == decisive);
  }
}

TEST_CASE("all-draw tournaments fall back to cost then id") {
  PairwiseRanker draws = fixed_output_ranker(0.5);  // (0.5, 0.5): never above theta
  TournamentResult res = tournament(draws, {TournamentEntry{"z", kA, Rational(1)},
                                            TournamentEntry{"y", kB, Rational(1)},
                                            TournamentEntry{"x", kA, Rational(5)}});
  for (auto& [id, w] : res.wins) CHECK(w == 0);
  CHECK(res.ranked == std::vector<std::string>{"y", "z", "x"});  // cost 1 (y<z by id), cost 5
  CHECK(res.symmetry == 1.0);
  CHECK_THROWS_AS(tournament_rank(draws, {}, 1), EmptyInputError);
}
