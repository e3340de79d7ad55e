#include "omlclient/runner.hpp"

#include <algorithm>
#include <future>
#include <random>
#include <map>
#include <set>

namespace oml::runner {

namespace {

const arff::Column& need_column(const arff::ArffDocument& doc,
                                const arff::DataTable& table,
                                const std::string& name) {
  const arff::Column* col = table.find_column(name);
  if (!col)
    throw SplitIntegrityError("split table is missing attribute '" + name + "'");
  (void)doc;
  return *col;
}

}  // namespace

std::vector<FoldSplit> iter_splits(const Task& task,
                                   const arff::ArffDocument& splits_doc) {
  arff::DataTable table = arff::coerce_table(splits_doc);
  const arff::Column& type = need_column(splits_doc, table, "type");
  const arff::Column& rowid = need_column(splits_doc, table, "rowid");
  const arff::Column& repeat = need_column(splits_doc, table, "repeat");
  const arff::Column& fold = need_column(splits_doc, table, "fold");
  if (type.kind != FeatureKind::Nominal)
    throw SplitIntegrityError("split attribute 'type' must be nominal");

  std::map<std::pair<int, int>, FoldSplit> groups;
  std::set<std::int64_t> all_row_ids;
  for (std::size_t i = 0; i < table.row_count; ++i) {
    if (type.missing[i] || rowid.missing[i] || repeat.missing[i] || fold.missing[i])
      throw SplitIntegrityError("split table row " + std::to_string(i) +
                                " has a missing cell");
    const std::string& t = type.categories[static_cast<std::size_t>(type.codes[i])];
    auto rid = static_cast<std::int64_t>(rowid.reals[i]);
    int rep = static_cast<int>(repeat.reals[i]);
    int fld = static_cast<int>(fold.reals[i]);
    FoldSplit& g = groups[{rep, fld}];
    g.repeat = rep;
    g.fold = fld;
    all_row_ids.insert(rid);
    if (t == "TRAIN")
      g.train_idx.push_back(rid);
    else if (t == "TEST")
      g.test_idx.push_back(rid);
    else
      throw SplitIntegrityError("split type must be TRAIN or TEST, got '" + t + "'");
  }

  // Per repeat, test folds must be pairwise disjoint and cover all row ids.
  std::map<int, std::set<std::int64_t>> covered;
  for (auto& [key, g] : groups) {
    std::sort(g.train_idx.begin(), g.train_idx.end());
    std::sort(g.test_idx.begin(), g.test_idx.end());
    std::set<std::int64_t>& seen = covered[key.first];
    for (std::int64_t rid : g.test_idx)
      if (!seen.insert(rid).second)
        throw SplitIntegrityError("row " + std::to_string(rid) +
                                  " appears in two test folds of repeat " +
                                  std::to_string(key.first));
  }
  for (const auto& [rep, seen] : covered) {
    if (seen != all_row_ids)
      throw SplitIntegrityError("test folds of repeat " + std::to_string(rep) +
                                " do not cover all row ids");
  }

  (void)task;
  std::vector<FoldSplit> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) out.push_back(std::move(g));  // map is ordered
  return out;
}

std::int64_t fold_seed(std::int64_t base_seed, int repeat, int fold, int folds) {
  return base_seed + static_cast<std::int64_t>(repeat) * folds + fold;
}

Run run_model_on_task(const ext::ModelSpec& model, const Task& task,
                      std::int64_t base_seed, const RunContext& ctx) {
  if (task.task_type != TaskType::SupervisedClassification)
    throw std::invalid_argument("only classification tasks are supported");
  if (!ctx.client) throw std::invalid_argument("RunContext has no client");
  const protocol::Client& client = *ctx.client;

  DatasetDescription dataset = cache::get_dataset(ctx.cache, client, task.dataset_id);
  arff::DataTable table = cache::fetch_dataset_payload(ctx.cache, client, dataset);
  arff::ArffDocument splits_doc = cache::fetch_task_splits(ctx.cache, client, task);
  std::vector<FoldSplit> splits = iter_splits(task, splits_doc);

  const arff::Column* target = table.find_column(task.target_name);
  if (!target)
    throw std::invalid_argument("target '" + task.target_name +
                                "' is not a column of dataset " +
                                std::to_string(task.dataset_id));

  int folds = task.estimation_procedure.folds;
  auto run_fold = [&](const FoldSplit& s) -> ext::FoldResult {
    try {
      return ext::fit_predict_fold(model, table, task.target_name, task.class_labels,
                                   s.train_idx, s.test_idx,
                                   fold_seed(base_seed, s.repeat, s.fold, folds));
    } catch (const std::exception& e) {
      throw std::runtime_error("fold (repeat " + std::to_string(s.repeat) +
                               ", fold " + std::to_string(s.fold) +
                               ") failed: " + e.what());
    }
  };

  std::vector<ext::FoldResult> results(splits.size());
  if (ctx.workers <= 1) {
    for (std::size_t i = 0; i < splits.size(); ++i) results[i] = run_fold(splits[i]);
  } else {
    std::vector<std::future<ext::FoldResult>> futures;
    futures.reserve(splits.size());
    for (const FoldSplit& s : splits)
      futures.push_back(std::async(std::launch::async, run_fold, std::cref(s)));
    for (std::size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
  }

  auto truth_label = [&](std::int64_t row) -> std::string {
    std::size_t i = static_cast<std::size_t>(row);
    if (target->kind == FeatureKind::Nominal && !target->missing[i])
      return target->categories[static_cast<std::size_t>(target->codes[i])];
    if ((target->kind == FeatureKind::String || target->kind == FeatureKind::Date) &&
        !target->missing[i])
      return target->strings[i];
    if (target->kind == FeatureKind::Numeric && !target->missing[i])
      return arff::format_double(target->reals[i]);
    return "?";
  };

  Run run;
  run.task_id = task.id;
  run.seed = base_seed;
  Flow flow = ext::model_to_flow(model);
  run.setup = ext::extract_setup(model);
  for (std::size_t i = 0; i < splits.size(); ++i) {
    const FoldSplit& s = splits[i];
    for (const ext::PredictionFragment& frag : results[i].predictions) {
      PredictionRow row;
      row.repeat = s.repeat;
      row.fold = s.fold;
      row.row_id = frag.row_id;
      row.prediction = frag.prediction;
      row.truth = truth_label(frag.row_id);
      row.confidences = frag.confidences;
      run.predictions.push_back(std::move(row));
    }
    for (TraceRow t : results[i].trace) {
      t.repeat = s.repeat;
      t.fold = s.fold;
      run.trace.push_back(t);
    }
  }
  // Canonical order regardless of execution schedule.
  std::sort(run.predictions.begin(), run.predictions.end(),
            [](const PredictionRow& a, const PredictionRow& b) {
              return std::tie(a.repeat, a.fold, a.row_id) <
                     std::tie(b.repeat, b.fold, b.row_id);
            });
  run.local_evaluations["predictive_accuracy"] =
      score(run.predictions, "predictive_accuracy");
  (void)flow;
  return run;
}

double score(const std::vector<PredictionRow>& predictions,
             const std::string& function) {
  if (function != "predictive_accuracy")
    throw UnknownMetricError("unsupported metric '" + function + "'");
  if (predictions.empty())
    throw UnknownMetricError("cannot score an empty prediction list");
  std::size_t correct = 0;
  for (const PredictionRow& p : predictions)
    if (p.prediction == p.truth) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

arff::ArffDocument predictions_to_arff(const Run& run, const Task& task) {
  if (run.predictions.empty())
    throw std::invalid_argument("run has no predictions");
  arff::ArffDocument doc;
  doc.relation = "openml_task_" + std::to_string(task.id) + "_predictions";
  doc.attributes.push_back({"repeat", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"fold", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"row_id", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"prediction", FeatureKind::Nominal, task.class_labels});
  doc.attributes.push_back({"correct", FeatureKind::Nominal, task.class_labels});
  for (const std::string& label : task.class_labels)
    doc.attributes.push_back({"confidence." + label, FeatureKind::Numeric, {}});
  for (const PredictionRow& p : run.predictions) {
    std::vector<arff::Cell> row;
    row.emplace_back(static_cast<double>(p.repeat));
    row.emplace_back(static_cast<double>(p.fold));
    row.emplace_back(static_cast<double>(p.row_id));
    row.emplace_back(p.prediction);
    if (p.truth == "?")
      row.emplace_back(arff::Missing{});
    else
      row.emplace_back(p.truth);
    for (double c : p.confidences) row.emplace_back(c);
    doc.rows.push_back(std::move(row));
  }
  return doc;
}

arff::ArffDocument make_cv_splits(std::int64_t task_id, std::size_t n_rows,
                                  int repeats, int folds) {
  arff::ArffDocument doc;
  doc.relation = "openml_task_" + std::to_string(task_id) + "_splits";
  doc.attributes.push_back({"type", FeatureKind::Nominal, {"TRAIN", "TEST"}});
  doc.attributes.push_back({"rowid", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"repeat", FeatureKind::Numeric, {}});
  doc.attributes.push_back({"fold", FeatureKind::Numeric, {}});
  for (int rep = 0; rep < repeats; ++rep) {
    std::vector<std::size_t> shuffled(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) shuffled[i] = i;
    std::mt19937_64 gen(static_cast<std::uint64_t>(task_id) * 1000 +
                        static_cast<std::uint64_t>(rep));
    std::shuffle(shuffled.begin(), shuffled.end(), gen);
    std::vector<int> fold_of(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i)
      fold_of[shuffled[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    for (int fold = 0; fold < folds; ++fold) {
      for (std::size_t rid = 0; rid < n_rows; ++rid) {
        std::string type = fold_of[rid] == fold ? "TEST" : "TRAIN";
        doc.rows.push_back({type, static_cast<double>(rid),
                            static_cast<double>(rep), static_cast<double>(fold)});
      }
    }
  }
  return doc;
}

}  // namespace oml::runner
