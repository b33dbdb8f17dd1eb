#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "seedsel/learn.hpp"

using namespace seedsel;

namespace {

SparseVector sv(std::vector<std::pair<std::uint32_t, double>> e) {
  SparseVector v;
  for (auto [c, w] : e) v.entries.push_back({c, w});
  return v;
}

std::vector<TrainingExample> random_examples(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<TrainingExample> ex;
  for (std::size_t i = 0; i < n; ++i) {
    SparseVector v;
    for (std::uint32_t c = 0; c < dim; ++c)
      if (rng.bernoulli(0.4)) v.entries.push_back({c, rng.uniform()});
    ex.push_back({v, rng.bernoulli(0.5) ? Label::positive : Label::negative});
  }
  ex[0].label = Label::positive;
  ex[1].label = Label::negative;
  return ex;
}

}  // namespace

TEST_CASE("sigmoid and softplus stay finite") {
  REQUIRE(sigmoid(0.0) == 0.5);
  REQUIRE(std::abs(sigmoid(40.0) - 1.0) < 1e-12);
  REQUIRE(sigmoid(-40.0) == Catch::Approx(4.248354255291589e-18).epsilon(1e-9));
  REQUIRE(sigmoid(-1000.0) >= 0.0);
  REQUIRE(sigmoid(1000.0) == 1.0);
  REQUIRE(softplus(1000.0) == Catch::Approx(1000.0));
  REQUIRE(softplus(-1000.0) >= 0.0);
  REQUIRE(softplus(0.0) == Catch::Approx(std::log(2.0)));
}

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(17);
  const double h = 1e-5;
  for (int probe = 0; probe < 5; ++probe) {
    const std::size_t dim = 6;
    const auto ex = random_examples(rng, 15, dim);
    std::vector<double> w(dim);
    for (auto& x : w) x = 2.0 * rng.normal();
    const double b = rng.normal();
    const double lambda = 0.1 * rng.uniform();
    const auto obj = logistic_objective(ex, w, b, lambda);
    double worst = 0;
    for (std::size_t j = 0; j <= dim; ++j) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (j < dim) {
        wp[j] += h;
        wm[j] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd = (logistic_objective(ex, wp, bp, lambda, false).loss -
                         logistic_objective(ex, wm, bm, lambda, false).loss) / (2 * h);
      const double an = j < dim ? obj.gradient[j] : obj.intercept_gradient;
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-8, std::max(std::abs(fd), std::abs(an))));
    }
    REQUIRE(worst < 1e-5);
  }
}

TEST_CASE("separable one-feature data") {
  std::vector<TrainingExample> ex{{sv({{0, 0.5}}), Label::positive}, {SparseVector{}, Label::negative}};
  TrainConfig cfg;
  cfg.l2_lambda = 0.0;
  const auto m = train(ex, 1, cfg);
  REQUIRE(m.weights[0] > 0.0);
  REQUIRE(score(m, ex[0].features) > 0.5);
  REQUIRE(score(m, ex[1].features) < 0.5);
  REQUIRE(m.meta.seed_size == 2);
  REQUIRE(m.meta.positives == 1);
}

TEST_CASE("mirrored data gives a zero intercept") {
  // features mirrored across the two columns, labels swapped
  Rng rng(4);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 10; ++i) {
    const double a = rng.uniform() + 0.1, b = rng.uniform() + 0.1;
    ex.push_back({sv({{0, a}, {1, b}}), Label::positive});
    ex.push_back({sv({{0, b}, {1, a}}), Label::negative});
  }
  TrainConfig cfg;
  cfg.l2_lambda = 0.01;
  cfg.tolerance = 1e-12;  // the default stops about 2e-4 short of the optimum here
  const auto m = train(ex, 2, cfg);
  REQUIRE(std::abs(m.intercept) < 1e-4);
  REQUIRE(m.weights[0] == Catch::Approx(-m.weights[1]).margin(1e-6));
}

TEST_CASE("degenerate seeds are rejected") {
  std::vector<TrainingExample> pos{{sv({{0, 1.0}}), Label::positive}, {sv({{1, 1.0}}), Label::positive}};
  try {
    train(pos, 2);
    FAIL("expected an error");
  } catch (const DegenerateSeedError& e) {
    REQUIRE(std::string(e.what()).find("negative") != std::string::npos);
  }
  std::vector<TrainingExample> neg{{sv({{0, 1.0}}), Label::negative}, {sv({{1, 1.0}}), Label::negative}};
  try {
    train(neg, 2);
    FAIL("expected an error");
  } catch (const DegenerateSeedError& e) {
    REQUIRE(std::string(e.what()).find("positive") != std::string::npos);
  }
  std::vector<TrainingExample> one{{sv({{0, 1.0}}), Label::negative}};
  REQUIRE_THROWS_AS(train(one, 2), DegenerateSeedError);
  std::vector<TrainingExample> wide{{sv({{5, 1.0}}), Label::negative}, {sv({{0, 1.0}}), Label::positive}};
  REQUIRE_THROWS_AS(train(wide, 2), ValidationError);
}

TEST_CASE("training loss never increases and order does not matter") {
  Rng rng(23);
  auto ex = random_examples(rng, 60, 10);
  TrainConfig cfg;
  double prev = 1e300;
  for (std::size_t epochs : {1, 2, 5, 10, 30, 100}) {
    cfg.max_epochs = epochs;
    cfg.tolerance = 0.0;
    const auto m = train(ex, 10, cfg);
    REQUIRE(m.meta.final_loss <= prev + 1e-15);
    prev = m.meta.final_loss;
  }
  cfg = {};
  const auto a = train(ex, 10, cfg);
  std::reverse(ex.begin(), ex.end());
  const auto b = train(ex, 10, cfg);
  for (std::size_t j = 0; j < 10; ++j) REQUIRE(a.weights[j] == Catch::Approx(b.weights[j]).margin(1e-12));
  REQUIRE(a.intercept == Catch::Approx(b.intercept).margin(1e-12));
}

TEST_CASE("heavy regularization flattens scores") {
  Rng rng(5);
  const auto ex = random_examples(rng, 40, 8);
  TrainConfig cfg;
  cfg.l2_lambda = 1e6;
  const auto m = train(ex, 8, cfg);
  double norm = 0;
  for (double w : m.weights) norm += w * w;
  REQUIRE(std::sqrt(norm) < 1e-5);
  for (const auto& e : ex) REQUIRE(score(m, e.features) == Catch::Approx(sigmoid(m.intercept)).margin(1e-6));
}

TEST_CASE("score is monotone in a present feature") {
  Model m;
  m.weights = {0.0, 0.0};
  REQUIRE(score(m, sv({{0, 0.3}, {1, 0.7}})) == 0.5);
  const double before = score(m, sv({{1, 0.7}}));
  m.weights[1] = 0.5;
  REQUIRE(score(m, sv({{1, 0.7}})) > before);
}

TEST_CASE("model json round trip checks the vocabulary") {
  Vocabulary vocab({"aa", "bb"}, {2, 1});
  Vocabulary other({"aa", "cc"}, {2, 1});
  Model m;
  m.weights = {0.25, -1.5};
  m.intercept = 0.125;
  m.meta = {12, 0.5, 20, 7};
  m.vocabulary_hash = vocab.hash();
  const auto path = std::filesystem::temp_directory_path() / "seedsel_model.json";
  save_model(path, m);
  const auto back = load_model(path, vocab);
  REQUIRE(back.weights == m.weights);
  REQUIRE(back.intercept == m.intercept);
  REQUIRE(back.meta.epochs == 12);
  REQUIRE(back.meta.positives == 7);
  REQUIRE_THROWS_AS(load_model(path, other), ValidationError);
  REQUIRE_THROWS_AS(model_from_json(nlohmann::json{{"weights", 1}}, vocab), ValidationError);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.l2_lambda = -1;
  REQUIRE_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.max_epochs = 0;
  REQUIRE_THROWS_AS(c.validate(), ValidationError);
}
