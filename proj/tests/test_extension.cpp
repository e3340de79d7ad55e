#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "omlclient/arff.hpp"
#include "omlclient/extension.hpp"

using namespace oml;
using namespace oml::ext;

namespace {

arff::DataTable table_from(const std::string& text) {
  return arff::coerce_table(arff::parse(text));
}

// Two numeric features, binary target; x1 separates the classes cleanly.
const char* kSimple =
    "@RELATION simple\n"
    "@ATTRIBUTE x1 NUMERIC\n"
    "@ATTRIBUTE x2 NUMERIC\n"
    "@ATTRIBUTE class {neg,pos}\n"
    "@DATA\n"
    "1,5,neg\n"
    "2,4,neg\n"
    "3,3,neg\n"
    "7,2,pos\n"
    "8,1,pos\n"
    "9,0,pos\n"
    "2.5,9,neg\n"
    "7.5,9,pos\n";

std::vector<std::int64_t> range_idx(std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> out;
  for (std::int64_t i = lo; i < hi; ++i) out.push_back(i);
  return out;
}

// Larger class-balanced table for grid-search tests: with 14 training rows a
// random half of the training fold virtually never collapses to one class.
arff::DataTable grid_table() {
  std::string text =
      "@RELATION g\n@ATTRIBUTE x1 NUMERIC\n@ATTRIBUTE x2 NUMERIC\n"
      "@ATTRIBUTE class {neg,pos}\n@DATA\n";
  std::mt19937_64 gen(4242);
  std::uniform_real_distribution<double> noise(0.0, 1.0);
  for (int i = 0; i < 16; ++i) {
    double x1 = (i % 4) * 3.0 + noise(gen);
    double x2 = (i / 4) * 3.0 + noise(gen);
    // XOR-ish labels so deeper stumps genuinely help.
    bool pos = (x1 > 5.0) != (x2 > 5.0);
    text += arff::format_double(x1) + "," + arff::format_double(x2) + "," +
            (pos ? "pos" : "neg") + "\n";
  }
  return table_from(text);
}

}  // namespace

TEST_CASE("make_spec fills defaults and rejects unknowns") {
  ModelSpec s = make_spec("stump");
  REQUIRE(s.params.size() == 1);
  CHECK(s.params[0] == std::pair<std::string, std::string>{"max_depth", "1"});

  ModelSpec s2 = make_spec("stump", {{"max_depth", "3"}});
  CHECK(s2.params[0].second == "3");

  CHECK_THROWS_AS(make_spec("boosting"), UnknownFlavorError);
  CHECK_THROWS_AS(make_spec("stump", {{"min_samples", "2"}}), InvalidParameterError);
  CHECK_THROWS_AS(make_spec("stump", {{"max_depth", "zero"}}), InvalidParameterError);
  CHECK_THROWS_AS(make_spec("grid", {{"grid", "max_depth="}}), InvalidParameterError);
}

TEST_CASE("model_to_flow maps the reference family into the ref namespace") {
  Flow majority = model_to_flow(make_spec("majority"));
  CHECK(majority.name == "ref.majority");
  CHECK(majority.parameters.empty());
  CHECK(majority.external_version == kExtensionVersion);

  ModelSpec pipeline = make_spec(
      "pipeline", {},
      {make_spec("impute.mean"), make_spec("onehot"), make_spec("stump")});
  Flow pf = model_to_flow(pipeline);
  CHECK(canonical_flow_name(pf) ==
        "ref.pipeline(imputer=ref.impute.mean,encoder=ref.onehot,learner=ref.stump)");

  ModelSpec grid =
      make_spec("grid", {{"grid", "max_depth=1;2;3"}}, {make_spec("stump")});
  Flow gf = model_to_flow(grid);
  CHECK(gf.name == "ref.grid");
  REQUIRE(gf.components.size() == 1);
  CHECK(gf.components[0].first == "inner");
  REQUIRE(gf.parameters.size() == 1);
  CHECK(gf.parameters[0].name == "grid");
  CHECK(gf.parameters[0].default_value == "max_depth=1;2;3");
}

TEST_CASE("flow_to_model inverts model_to_flow and applies setup overrides") {
  for (const ModelSpec& m :
       {make_spec("majority"), make_spec("nn1"),
        make_spec("stump", {{"max_depth", "2"}}),
        make_spec("pipeline", {},
                  {make_spec("impute.mean"), make_spec("onehot"),
                   make_spec("stump")}),
        make_spec("grid", {{"grid", "max_depth=1;2;3"}}, {make_spec("stump")})}) {
    Flow f = model_to_flow(m);
    CHECK(flow_to_model(f, {}) == m);
    CHECK(model_to_flow(flow_to_model(f, {})) == f);
  }

  ModelSpec pipeline = make_spec(
      "pipeline", {}, {make_spec("impute.mean"), make_spec("stump")});
  Flow f = model_to_flow(pipeline);
  ModelSpec overridden = flow_to_model(f, {{"learner.max_depth", "2"}});
  REQUIRE(overridden.children.size() == 2);
  CHECK(overridden.children[1].params[0].second == "2");

  CHECK_THROWS_AS(flow_to_model(f, {{"learner.nope", "2"}}), InvalidParameterError);
  CHECK_THROWS_AS(flow_to_model(f, {{"learner.max_depth", "x"}}),
                  InvalidParameterError);

  Flow foreign;
  foreign.name = "sklearn.svm.classes.SVC";
  foreign.external_version = "sklearn==0.21.2";
  CHECK_THROWS_AS(flow_to_model(foreign, {}), UnknownFlowError);
}

TEST_CASE("majority learner emits frequency confidences") {
  arff::DataTable table = table_from(
      "@RELATION m\n@ATTRIBUTE x NUMERIC\n@ATTRIBUTE class {a,b}\n@DATA\n"
      "1,a\n2,a\n3,b\n4,b\n5,a\n");
  // train labels [a,a,b] -> prediction a with confidences [2/3, 1/3]
  FoldResult r = fit_predict_fold(make_spec("majority"), table, "class", {"a", "b"},
                                  {0, 1, 2}, {3, 4}, 1);
  REQUIRE(r.predictions.size() == 2);
  for (const PredictionFragment& p : r.predictions) {
    CHECK(p.prediction == "a");
    REQUIRE(p.confidences.size() == 2);
    CHECK(p.confidences[0] == 2.0 / 3.0);
    CHECK(p.confidences[1] == 1.0 / 3.0);
  }
  CHECK(r.trace.empty());
}

TEST_CASE("majority tolerates a single-class fold; stump does not") {
  arff::DataTable table = table_from(
      "@RELATION m\n@ATTRIBUTE x NUMERIC\n@ATTRIBUTE class {a,b}\n@DATA\n"
      "1,a\n2,a\n3,a\n4,b\n");
  FoldResult r = fit_predict_fold(make_spec("majority"), table, "class", {"a", "b"},
                                  {0, 1, 2}, {3}, 1);
  CHECK(r.predictions[0].prediction == "a");
  CHECK_THROWS_AS(fit_predict_fold(make_spec("stump"), table, "class", {"a", "b"},
                                   {0, 1, 2}, {3}, 1),
                  DegenerateFoldError);
}

TEST_CASE("1-NN returns the label of an identical training point") {
  arff::DataTable table = table_from(kSimple);
  FoldResult r = fit_predict_fold(make_spec("nn1"), table, "class", {"neg", "pos"},
                                  {0, 1, 2, 3, 4, 5}, {6, 7}, 1);
  // rows 6 and 7 are nearest to rows 1 and 4 respectively
  CHECK(r.predictions[0].prediction == "neg");
  CHECK(r.predictions[1].prediction == "pos");

  // exact duplicate: distance zero, confidence 1 on that label
  arff::DataTable t2 = table_from(
      "@RELATION d\n@ATTRIBUTE x NUMERIC\n@ATTRIBUTE class {a,b}\n@DATA\n"
      "1,a\n5,b\n1,b\n");
  // test row 2 equals train row 0 exactly
  FoldResult ident = fit_predict_fold(make_spec("nn1"), t2, "class", {"a", "b"},
                                      {0, 1}, {2}, 1);
  CHECK(ident.predictions[0].prediction == "a");
  CHECK(ident.predictions[0].confidences == std::vector<double>{1.0, 0.0});
}

TEST_CASE("1-NN tie-breaks are seed dependent but per-row stable") {
  // The test point at x=2 is equidistant from a-labelled x=1 and b-labelled x=3.
  arff::DataTable table = table_from(
      "@RELATION tie\n@ATTRIBUTE x NUMERIC\n@ATTRIBUTE class {a,b}\n@DATA\n"
      "1,a\n3,b\n2,a\n");
  std::set<std::string> outcomes;
  for (std::int64_t seed = 1; seed <= 32; ++seed) {
    FoldResult r = fit_predict_fold(make_spec("nn1"), table, "class", {"a", "b"},
                                    {0, 1}, {2}, seed);
    outcomes.insert(r.predictions[0].prediction);
    // stable for a fixed seed
    FoldResult again = fit_predict_fold(make_spec("nn1"), table, "class",
                                        {"a", "b"}, {0, 1}, {2}, seed);
    CHECK(again.predictions[0].prediction == r.predictions[0].prediction);
  }
  CHECK(outcomes.size() == 2);  // some seed picks each side of the tie
}

TEST_CASE("stump splits on the most accurate feature with midpoint threshold") {
  arff::DataTable table = table_from(kSimple);
  FoldResult r = fit_predict_fold(make_spec("stump"), table, "class", {"neg", "pos"},
                                  {0, 1, 2, 3, 4, 5}, {6, 7}, 1);
  // x1 separates the training rows perfectly at threshold 5 (midpoint of 3, 7)
  CHECK(r.predictions[0].prediction == "neg");  // x1 = 2.5
  CHECK(r.predictions[1].prediction == "pos");  // x1 = 7.5
}

TEST_CASE("pipeline handles missing values and nominal features") {
  arff::DataTable table = table_from(
      "@RELATION p\n"
      "@ATTRIBUTE num NUMERIC\n"
      "@ATTRIBUTE cat {u,v}\n"
      "@ATTRIBUTE class {a,b}\n"
      "@DATA\n"
      "1,u,a\n?,v,b\n2,u,a\n10,v,b\n11,?,b\n1.5,u,a\n");
  ModelSpec pipeline = make_spec(
      "pipeline", {},
      {make_spec("impute.mean"), make_spec("onehot"), make_spec("nn1")});
  FoldResult r = fit_predict_fold(pipeline, table, "class", {"a", "b"},
                                  {0, 1, 2, 3, 4}, {5}, 1);
  CHECK(r.predictions[0].prediction == "a");

  CHECK_THROWS_AS(fit_predict_fold(make_spec("impute.mean"), table, "class",
                                   {"a", "b"}, {0, 1}, {2}, 1),
                  InvalidParameterError);
}

TEST_CASE("train and test indices must be disjoint and in range") {
  arff::DataTable table = table_from(kSimple);
  CHECK_THROWS_AS(fit_predict_fold(make_spec("majority"), table, "class",
                                   {"neg", "pos"}, {0, 1}, {1, 2}, 1),
                  InvalidParameterError);
  CHECK_THROWS_AS(fit_predict_fold(make_spec("majority"), table, "class",
                                   {"neg", "pos"}, {0, 99}, {1}, 1),
                  InvalidParameterError);
}

TEST_CASE("grid search traces every candidate and selects the oracle maximum") {
  arff::DataTable table = grid_table();
  std::vector<std::int64_t> train = range_idx(0, 14);
  std::vector<std::int64_t> test = {14, 15};
  std::int64_t seed = 5;

  ModelSpec grid =
      make_spec("grid", {{"grid", "max_depth=1;2;3"}}, {make_spec("stump")});
  FoldResult r = fit_predict_fold(grid, table, "class", {"neg", "pos"}, train,
                                  test, seed);
  REQUIRE(r.trace.size() == 3);

  // Independent oracle: evaluate each depth on the same inner split with two
  // plain stump fits and pooled accuracy.
  auto [half_a, half_b] = inner_cv_split(train, seed);
  std::vector<double> oracle_eval;
  const arff::Column* target = table.find_column("class");
  auto truth = [&](std::int64_t row) {
    return target->categories[static_cast<std::size_t>(
        target->codes[static_cast<std::size_t>(row)])];
  };
  for (const char* depth : {"1", "2", "3"}) {
    ModelSpec stump = make_spec("stump", {{"max_depth", depth}});
    std::size_t correct = 0, total = 0;
    for (const auto& [tr, te] :
         {std::make_pair(half_a, half_b), std::make_pair(half_b, half_a)}) {
      FoldResult inner =
          fit_predict_fold(stump, table, "class", {"neg", "pos"}, tr, te, seed);
      for (const PredictionFragment& p : inner.predictions) {
        if (p.prediction == truth(p.row_id)) ++correct;
        ++total;
      }
    }
    oracle_eval.push_back(static_cast<double>(correct) /
                          static_cast<double>(total));
  }

  int selected_count = 0;
  double selected_eval = -1;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.trace[i].iteration == static_cast<int>(i));
    CHECK(r.trace[i].setup_string ==
          "max_depth=" + std::to_string(i + 1));
    CHECK(r.trace[i].evaluation == oracle_eval[i]);
    if (r.trace[i].selected) {
      ++selected_count;
      selected_eval = r.trace[i].evaluation;
    }
  }
  CHECK(selected_count == 1);
  CHECK(selected_eval == *std::max_element(oracle_eval.begin(), oracle_eval.end()));

  // Ties keep the first grid point (identical candidates always tie).
  ModelSpec tied = make_spec("grid", {{"grid", "max_depth=2;2"}},
                             {make_spec("stump")});
  FoldResult tr = fit_predict_fold(tied, table, "class", {"neg", "pos"}, train,
                                   test, seed);
  REQUIRE(tr.trace.size() == 2);
  CHECK(tr.trace[0].evaluation == tr.trace[1].evaluation);
  CHECK(tr.trace[0].selected);
  CHECK(!tr.trace[1].selected);
}

TEST_CASE("fit_predict_fold is deterministic") {
  arff::DataTable table = grid_table();
  for (const ModelSpec& m :
       {make_spec("majority"), make_spec("nn1"), make_spec("stump"),
        make_spec("grid", {{"grid", "max_depth=1;2"}}, {make_spec("stump")})}) {
    FoldResult a = fit_predict_fold(m, table, "class", {"neg", "pos"},
                                    range_idx(0, 14), {14, 15}, 42);
    FoldResult b = fit_predict_fold(m, table, "class", {"neg", "pos"},
                                    range_idx(0, 14), {14, 15}, 42);
    REQUIRE(a.predictions.size() == b.predictions.size());
    for (std::size_t i = 0; i < a.predictions.size(); ++i) {
      CHECK(a.predictions[i].prediction == b.predictions[i].prediction);
      CHECK(a.predictions[i].confidences == b.predictions[i].confidences);
    }
    CHECK(a.trace == b.trace);
  }
}

TEST_CASE("permuting test rows permutes predictions identically") {
  arff::DataTable table = table_from(kSimple);
  std::vector<std::int64_t> test = {3, 6, 7};
  std::vector<std::int64_t> train = {0, 1, 2, 4, 5};
  for (const ModelSpec& m :
       {make_spec("majority"), make_spec("nn1"), make_spec("stump")}) {
    FoldResult fwd = fit_predict_fold(m, table, "class", {"neg", "pos"}, train,
                                      test, 9);
    std::vector<std::int64_t> reversed(test.rbegin(), test.rend());
    FoldResult rev = fit_predict_fold(m, table, "class", {"neg", "pos"}, train,
                                      reversed, 9);
    std::map<std::int64_t, std::string> by_row;
    for (const PredictionFragment& p : fwd.predictions)
      by_row[p.row_id] = p.prediction;
    for (const PredictionFragment& p : rev.predictions)
      CHECK(by_row.at(p.row_id) == p.prediction);
  }
}

TEST_CASE("confidences are normalized and consistent with the prediction") {
  arff::DataTable table = table_from(kSimple);
  for (const ModelSpec& m :
       {make_spec("majority"), make_spec("nn1"), make_spec("stump")}) {
    FoldResult r = fit_predict_fold(m, table, "class", {"neg", "pos"},
                                    range_idx(0, 6), {6, 7}, 3);
    for (const PredictionFragment& p : r.predictions) {
      double sum = 0;
      for (double c : p.confidences) {
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
        sum += c;
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
      std::size_t arg = static_cast<std::size_t>(
          std::max_element(p.confidences.begin(), p.confidences.end()) -
          p.confidences.begin());
      CHECK(p.prediction == (arg == 0 ? "neg" : "pos"));
    }
  }
}

TEST_CASE("inner_cv_split halves the training fold deterministically") {
  std::vector<std::int64_t> train = range_idx(0, 11);
  auto [a, b] = inner_cv_split(train, 7);
  CHECK(a.size() + b.size() == train.size());
  CHECK(std::is_sorted(a.begin(), a.end()));
  CHECK(std::is_sorted(b.begin(), b.end()));
  std::set<std::int64_t> seen(a.begin(), a.end());
  for (std::int64_t i : b) CHECK(seen.insert(i).second);
  CHECK(seen.size() == train.size());
  auto [a2, b2] = inner_cv_split(train, 7);
  CHECK(a == a2);
  CHECK(b == b2);
}

TEST_CASE("extract_setup walks role-dotted paths") {
  ModelSpec grid = make_spec("grid", {{"grid", "max_depth=1;2"}},
                             {make_spec("stump")});
  auto setup = extract_setup(grid);
  REQUIRE(setup.size() == 2);
  CHECK(setup[0] == std::pair<std::string, std::string>{"grid", "max_depth=1;2"});
  CHECK(setup[1] == std::pair<std::string, std::string>{"inner.max_depth", "1"});

  ModelSpec pipeline = make_spec(
      "pipeline", {}, {make_spec("impute.mean"), make_spec("stump")});
  auto ps = extract_setup(pipeline);
  REQUIRE(ps.size() == 1);
  CHECK(ps[0] == std::pair<std::string, std::string>{"learner.max_depth", "1"});
}

TEST_CASE("the registry knows exactly the ref flavor") {
  CHECK(find_extension("ref").flow_namespace() == "ref.");
  CHECK_THROWS_AS(find_extension("sklearn"), UnknownFlavorError);
  Flow f;
  f.name = "ref.majority";
  CHECK(extension_for_flow(f).flavor() == "ref");
  f.name = "torch.module";
  CHECK_THROWS_AS(extension_for_flow(f), UnknownFlowError);
}
