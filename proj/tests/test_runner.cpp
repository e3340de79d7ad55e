#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include <unistd.h>

#include "omlclient/mockserver.hpp"
#include "omlclient/runner.hpp"

using namespace oml;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("omlrun-" + std::to_string(::getpid()) + "-" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

Task classification_task(int folds = 2, int repeats = 1) {
  Task t;
  t.id = 1;
  t.dataset_id = 1;
  t.target_name = "class";
  t.class_labels = {"a", "b"};
  t.task_type = TaskType::SupervisedClassification;
  t.estimation_procedure.folds = folds;
  t.estimation_procedure.repeats = repeats;
  return t;
}

arff::ArffDocument splits_doc_skeleton() {
  arff::ArffDocument doc;
  doc.relation = "splits";
  doc.attributes.push_back({"type", FeatureKind::Nominal, {"TRAIN", "TEST"}});
  doc.attributes.push_back({"rowid", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"repeat", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"fold", FeatureKind::Numeric, {}});
  return doc;
}

void add_split_row(arff::ArffDocument& doc, const std::string& type, double rowid,
                   double repeat, double fold) {
  doc.rows.push_back({type, rowid, repeat, fold});
}

// 4 rows, 2 folds: fold 0 tests {0,2}, fold 1 tests {1,3}.
arff::ArffDocument four_row_two_fold() {
  arff::ArffDocument doc = splits_doc_skeleton();
  for (int fold = 0; fold < 2; ++fold)
    for (int rid = 0; rid < 4; ++rid)
      add_split_row(doc, (rid % 2 == fold ? "TEST" : "TRAIN"),
                    static_cast<double>(rid), 0, static_cast<double>(fold));
  return doc;
}

}  // namespace

TEST_CASE("iter_splits groups by repeat and fold with ascending indices") {
  Task t = classification_task();
  std::vector<runner::FoldSplit> splits = runner::iter_splits(t, four_row_two_fold());
  REQUIRE(splits.size() == 2);
  CHECK(splits[0].repeat == 0);
  CHECK(splits[0].fold == 0);
  CHECK(splits[0].test_idx == std::vector<std::int64_t>{0, 2});
  CHECK(splits[0].train_idx == std::vector<std::int64_t>{1, 3});
  CHECK(splits[1].fold == 1);
  CHECK(splits[1].test_idx == std::vector<std::int64_t>{1, 3});
  CHECK(splits[1].train_idx == std::vector<std::int64_t>{0, 2});
}

TEST_CASE("iter_splits rejects malformed split tables") {
  Task t = classification_task();

  SUBCASE("row appearing in two test folds of one repeat") {
    arff::ArffDocument doc = four_row_two_fold();
    add_split_row(doc, "TEST", 0, 0, 1);  // row 0 already tests in fold 0
    try {
      runner::iter_splits(t, doc);
      FAIL("expected SplitIntegrityError");
    } catch (const runner::SplitIntegrityError& e) {
      CHECK(std::string(e.what()).find("two test folds") != std::string::npos);
    }
  }
  SUBCASE("test folds not covering every row id") {
    arff::ArffDocument doc = splits_doc_skeleton();
    add_split_row(doc, "TEST", 0, 0, 0);
    add_split_row(doc, "TRAIN", 1, 0, 0);
    add_split_row(doc, "TRAIN", 0, 0, 1);
    add_split_row(doc, "TRAIN", 1, 0, 1);  // row 1 never tested
    try {
      runner::iter_splits(t, doc);
      FAIL("expected SplitIntegrityError");
    } catch (const runner::SplitIntegrityError& e) {
      CHECK(std::string(e.what()).find("do not cover") != std::string::npos);
    }
  }
  SUBCASE("missing cell") {
    arff::ArffDocument doc = four_row_two_fold();
    doc.rows[0][1] = arff::Missing{};
    CHECK_THROWS_AS(runner::iter_splits(t, doc), runner::SplitIntegrityError);
  }
  SUBCASE("missing attribute") {
    arff::ArffDocument doc = four_row_two_fold();
    doc.attributes[1].name = "row";  // no longer called rowid
    CHECK_THROWS_AS(runner::iter_splits(t, doc), runner::SplitIntegrityError);
  }
  SUBCASE("unknown type value") {
    arff::ArffDocument doc = splits_doc_skeleton();
    doc.attributes[0].nominal_values = {"TRAIN", "TEST", "EVAL"};
    add_split_row(doc, "EVAL", 0, 0, 0);
    CHECK_THROWS_AS(runner::iter_splits(t, doc), runner::SplitIntegrityError);
  }
}

TEST_CASE("fold_seed is an injective affine map over the fold grid") {
  CHECK(runner::fold_seed(1, 0, 0, 10) == 1);
  CHECK(runner::fold_seed(1, 2, 3, 10) == 24);
  CHECK(runner::fold_seed(100, 1, 0, 5) == 105);
  std::set<std::int64_t> seen;
  for (int rep = 0; rep < 4; ++rep)
    for (int fold = 0; fold < 7; ++fold)
      CHECK(seen.insert(runner::fold_seed(17, rep, fold, 7)).second);
}

TEST_CASE("score computes pooled predictive accuracy") {
  auto row = [](const std::string& pred, const std::string& truth) {
    PredictionRow p;
    p.prediction = pred;
    p.truth = truth;
    return p;
  };
  std::vector<PredictionRow> all_right = {row("a", "a"), row("b", "b")};
  CHECK(runner::score(all_right, "predictive_accuracy") == 1.0);
  std::vector<PredictionRow> three_of_four = {row("a", "a"), row("a", "a"),
                                              row("b", "b"), row("a", "b")};
  CHECK(runner::score(three_of_four, "predictive_accuracy") == 0.75);
  CHECK_THROWS_AS(runner::score({}, "predictive_accuracy"),
                  runner::UnknownMetricError);
  CHECK_THROWS_AS(runner::score(all_right, "f_measure"),
                  runner::UnknownMetricError);
}

TEST_CASE("predictions_to_arff emits the shared prediction schema") {
  Task t = classification_task();
  Run run;
  run.task_id = 1;
  PredictionRow p;
  p.repeat = 0;
  p.fold = 1;
  p.row_id = 7;
  p.prediction = "a";
  p.truth = "b";
  p.confidences = {0.75, 0.25};
  PredictionRow q = p;
  q.row_id = 8;
  q.truth = "?";  // unknown truth serializes as a missing cell
  run.predictions = {p, q};

  arff::ArffDocument doc = runner::predictions_to_arff(run, t);
  CHECK(doc.relation == "openml_task_1_predictions");
  REQUIRE(doc.attributes.size() == 7);  // 5 fixed + one confidence per label
  CHECK(doc.attributes[3].name == "prediction");
  CHECK(doc.attributes[3].nominal_values == std::vector<std::string>{"a", "b"});
  CHECK(doc.attributes[5].name == "confidence.a");
  CHECK(doc.attributes[6].name == "confidence.b");

  REQUIRE(doc.rows.size() == 2);
  CHECK(std::get<std::string>(doc.rows[0][4]) == "b");
  CHECK(arff::is_missing(doc.rows[1][4]));
  CHECK(std::get<double>(doc.rows[0][5]) + std::get<double>(doc.rows[0][6]) == 1.0);

  // The document survives a serialize/parse roundtrip.
  CHECK(arff::parse(arff::serialize(doc)) == doc);

  run.predictions.clear();
  CHECK_THROWS_AS(runner::predictions_to_arff(run, t), std::invalid_argument);
}

TEST_CASE("make_cv_splits yields valid, balanced, deterministic folds") {
  arff::ArffDocument doc = runner::make_cv_splits(6, 23, 2, 5);
  CHECK(doc == runner::make_cv_splits(6, 23, 2, 5));
  CHECK(doc != runner::make_cv_splits(7, 23, 2, 5));  // seeded by task id

  Task t = classification_task(5, 2);
  std::vector<runner::FoldSplit> splits = runner::iter_splits(t, doc);
  REQUIRE(splits.size() == 10);
  for (const runner::FoldSplit& s : splits) {
    CHECK(s.test_idx.size() >= 23 / 5);
    CHECK(s.test_idx.size() <= 23 / 5 + 1);
    CHECK(s.train_idx.size() + s.test_idx.size() == 23);
  }
}

TEST_CASE("run_model_on_task against the fixture corpus") {
  TempDir fixtures;
  TempDir cache_dir;
  mock::write_fixture_corpus(fixtures.path);
  mock::MockServer server(fixtures.path);
  protocol::Client client(protocol::ServerConfig{server.base_url(), {}, 30.0, 0});
  cache::CacheConfig cfg{cache_dir.path, false};
  runner::RunContext ctx{cfg, &client, 1};

  Task task = cache::get_task(cfg, client, 11);
  Run run = runner::run_model_on_task(ext::make_spec("majority"), task, 42, ctx);

  // Independent oracle: recompute the majority prediction per fold straight
  // from the fixture payload and split table.
  DatasetDescription d = cache::get_dataset(cfg, client, task.dataset_id);
  arff::DataTable table = cache::fetch_dataset_payload(cfg, client, d);
  arff::ArffDocument splits_doc = cache::fetch_task_splits(cfg, client, task);
  std::vector<runner::FoldSplit> splits = runner::iter_splits(task, splits_doc);
  const arff::Column* target = table.find_column(task.target_name);
  REQUIRE(target != nullptr);
  auto truth = [&](std::int64_t row) -> std::string {
    std::size_t i = static_cast<std::size_t>(row);
    if (target->missing[i]) return "?";
    return target->categories[static_cast<std::size_t>(target->codes[i])];
  };
  std::size_t correct = 0, total = 0;
  for (const runner::FoldSplit& s : splits) {
    std::vector<std::size_t> counts(task.class_labels.size(), 0);
    for (std::int64_t r : s.train_idx) {
      auto it = std::find(task.class_labels.begin(), task.class_labels.end(),
                          truth(r));
      if (it != task.class_labels.end())
        ++counts[static_cast<std::size_t>(it - task.class_labels.begin())];
    }
    std::string majority = task.class_labels[static_cast<std::size_t>(
        std::max_element(counts.begin(), counts.end()) - counts.begin())];
    for (std::int64_t r : s.test_idx) {
      if (truth(r) == majority) ++correct;
      ++total;
    }
  }
  double oracle = static_cast<double>(correct) / static_cast<double>(total);
  CHECK(run.local_evaluations.at("predictive_accuracy") == oracle);

  // Predictions are in canonical order and cover each repeat completely.
  std::map<int, std::set<std::int64_t>> per_repeat;
  for (std::size_t i = 1; i < run.predictions.size(); ++i) {
    const PredictionRow& a = run.predictions[i - 1];
    const PredictionRow& b = run.predictions[i];
    CHECK(std::tie(a.repeat, a.fold, a.row_id) < std::tie(b.repeat, b.fold, b.row_id));
  }
  for (const PredictionRow& p : run.predictions)
    CHECK(per_repeat[p.repeat].insert(p.row_id).second);
  REQUIRE(per_repeat.size() == 2);  // the fixture task is 2 repeats x 2 folds
  for (const auto& [rep, rows] : per_repeat)
    CHECK(rows.size() == table.row_count);

  // Determinism, and worker-count independence of the serialized artifact.
  Run again = runner::run_model_on_task(ext::make_spec("majority"), task, 42, ctx);
  CHECK(again == run);
  runner::RunContext parallel{cfg, &client, 4};
  Run par = runner::run_model_on_task(
      ext::make_spec("pipeline", {},
                     {ext::make_spec("impute.mean"), ext::make_spec("onehot"),
                      ext::make_spec("stump")}),
      task, 7, ctx);
  Run par4 = runner::run_model_on_task(
      ext::make_spec("pipeline", {},
                     {ext::make_spec("impute.mean"), ext::make_spec("onehot"),
                      ext::make_spec("stump")}),
      task, 7, parallel);
  CHECK(arff::serialize(runner::predictions_to_arff(par, task)) ==
        arff::serialize(runner::predictions_to_arff(par4, task)));

  // Different base seeds keep the structure but reseed every fold.
  Run other_seed = runner::run_model_on_task(ext::make_spec("majority"), task, 43, ctx);
  CHECK(other_seed.seed == 43);
  CHECK(other_seed.predictions.size() == run.predictions.size());
}
