#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "omlclient/arff.hpp"
#include "omlclient/cache.hpp"
#include "omlclient/cli_support.hpp"
#include "omlclient/entities.hpp"
#include "omlclient/extension.hpp"
#include "omlclient/mockserver.hpp"
#include "omlclient/protocol.hpp"
#include "omlclient/runner.hpp"

namespace fs = std::filesystem;
using namespace oml;

namespace {

struct GlobalOpts {
  std::string server;
  std::string apikey;
  std::string cachedir;
  std::string config_file;
  bool offline = false;
};

struct Context {
  protocol::Client client;
  cache::CacheConfig ccfg;
  std::string host;
};

Context make_context(const GlobalOpts& g) {
  cli::Config cfg = cli::load_config(
      g.config_file.empty() ? std::optional<fs::path>{} : fs::path(g.config_file));
  if (!g.server.empty()) cfg.server = g.server;
  if (!g.apikey.empty()) cfg.apikey = g.apikey;
  if (!g.cachedir.empty()) cfg.cachedir = g.cachedir;

  protocol::ServerConfig server_cfg;
  server_cfg.base_url = cfg.server;
  if (!cfg.apikey.empty()) server_cfg.api_key = cfg.apikey;
  cache::CacheConfig ccfg;
  ccfg.root_dir =
      cfg.cachedir.empty() ? cache::default_cache_root() : fs::path(cfg.cachedir);
  ccfg.offline = g.offline;
  std::string host = cache::host_of(cfg.server);
  return Context{protocol::Client(server_cfg), ccfg, host};
}

std::string read_file_or_die(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read file: " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// List reads are cached under {host}/query/{md5-of-path}.xml so every read
// command works offline once warm.
std::string cached_query(const Context& ctx, const std::string& path) {
  fs::path rel = fs::path(ctx.host) / "query" / (cache::md5_hex(path) + ".xml");
  return cache::fetch_cached(ctx.ccfg, rel, std::nullopt,
                             [&] { return ctx.client.get_bytes(path); });
}

std::int64_t publish_run_with_flow(const Context& ctx, const ext::ModelSpec& model,
                                   Run run, const Task& task) {
  Flow flow = ext::model_to_flow(model);
  std::int64_t flow_id = ctx.client.publish_flow(flow);
  run.flow_id = flow_id;
  std::string predictions = arff::serialize(runner::predictions_to_arff(run, task));
  return ctx.client.publish_run(run, predictions);
}

int run_command(const GlobalOpts& g, const std::vector<std::int64_t>& task_ids,
                const std::string& suite_alias, const std::string& model_text,
                std::int64_t seed, bool publish, int workers) {
  Context ctx = make_context(g);
  ext::ModelSpec model = cli::parse_model_spec(model_text);
  std::vector<std::int64_t> ids = task_ids;
  if (!suite_alias.empty()) {
    Suite suite = cache::get_suite(ctx.ccfg, ctx.client, suite_alias);
    ids.insert(ids.end(), suite.task_ids.begin(), suite.task_ids.end());
  }
  if (ids.empty()) throw std::runtime_error("no tasks given: use --task or --suite");
  runner::RunContext rctx{ctx.ccfg, &ctx.client, workers};
  for (std::int64_t id : ids) {
    Task task = cache::get_task(ctx.ccfg, ctx.client, id);
    Run run = runner::run_model_on_task(model, task, seed, rctx);
    std::cout << "task " << id << ": predictive_accuracy="
              << arff::format_double(run.local_evaluations.at("predictive_accuracy"));
    if (publish) {
      std::int64_t run_id = publish_run_with_flow(ctx, model, run, task);
      std::cout << " run_id=" << run_id;
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Client for an OpenML-style machine-learning experiment platform"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--server", g.server, "Server base URL");
  app.add_option("--apikey", g.apikey, "API key for publishing");
  app.add_option("--cachedir", g.cachedir, "Cache directory");
  app.add_option("--config", g.config_file, "Config file path");
  app.add_flag("--offline", g.offline, "Serve all reads from the local cache");

  // datasets
  auto* datasets = app.add_subcommand("datasets", "Dataset operations");
  datasets->require_subcommand(1);
  auto* ds_list = datasets->add_subcommand("list", "List datasets");
  std::int64_t offset = 0, limit = 100;
  std::string name_filter;
  ds_list->add_option("--offset", offset);
  ds_list->add_option("--limit", limit);
  ds_list->add_option("--name", name_filter, "Exact name filter");
  auto* ds_get = datasets->add_subcommand("get", "Fetch one dataset description");
  std::int64_t dataset_id = 0;
  ds_get->add_option("id", dataset_id)->required();
  auto* ds_upload = datasets->add_subcommand("upload", "Publish a dataset");
  std::string description_path, data_path;
  ds_upload->add_option("--description", description_path)->required();
  ds_upload->add_option("--data", data_path)->required();

  // tasks
  auto* tasks_cmd = app.add_subcommand("tasks", "Task operations");
  tasks_cmd->require_subcommand(1);
  auto* task_get = tasks_cmd->add_subcommand("get", "Fetch one task");
  std::int64_t task_id = 0;
  task_get->add_option("id", task_id)->required();
  auto* task_create = tasks_cmd->add_subcommand("create", "Create and publish a task");
  std::int64_t create_dataset = 0;
  std::string create_target;
  int create_folds = 10, create_repeats = 1;
  task_create->add_option("--dataset", create_dataset)->required();
  task_create->add_option("--target", create_target)->required();
  task_create->add_option("--folds", create_folds);
  task_create->add_option("--repeats", create_repeats);

  // suites
  auto* suites = app.add_subcommand("suites", "Suite operations");
  suites->require_subcommand(1);
  auto* suite_get = suites->add_subcommand("get", "Fetch a suite by alias");
  std::string suite_alias;
  suite_get->add_option("alias", suite_alias)->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "Run a model on tasks or a suite");
  std::vector<std::int64_t> run_tasks;
  std::string run_suite, run_model;
  std::int64_t run_seed = runner::kDefaultBaseSeed;
  bool run_publish = false;
  int run_workers = 1;
  run_cmd->add_option("--task", run_tasks, "Task id (repeatable)");
  run_cmd->add_option("--suite", run_suite, "Suite alias");
  run_cmd->add_option("--model", run_model, "Model spec string")->required();
  run_cmd->add_option("--seed", run_seed, "Base seed");
  run_cmd->add_flag("--publish", run_publish, "Publish each run");
  run_cmd->add_option("--workers", run_workers, "Fold-level parallelism");

  // evals
  auto* evals = app.add_subcommand("evals", "Evaluation operations");
  evals->require_subcommand(1);
  auto* evals_export = evals->add_subcommand("export", "Export evaluations to CSV");
  std::string evals_function;
  std::vector<std::int64_t> evals_flows, evals_tasks;
  std::vector<std::string> log10_cols, ln_cols;
  std::string evals_out;
  evals_export->add_option("--function", evals_function)->required();
  evals_export->add_option("--flow", evals_flows, "Flow id (repeatable)");
  evals_export->add_option("--task", evals_tasks, "Task id (repeatable)");
  evals_export->add_option("--log10", log10_cols, "Column to replace by log10");
  evals_export->add_option("--ln", ln_cols, "Column to replace by natural log");
  evals_export->add_option("--out", evals_out)->required();

  // cache
  auto* cache_cmd = app.add_subcommand("cache", "Cache operations");
  cache_cmd->require_subcommand(1);
  auto* cache_clear = cache_cmd->add_subcommand("clear", "Delete cached artifacts");
  std::string clear_kind, clear_id;
  cache_clear->add_option("--kind", clear_kind, "Entity kind (dataset|task|flow|study)");
  cache_clear->add_option("--id", clear_id, "Entity id");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (ds_list->parsed()) {
      Context ctx = make_context(g);
      std::map<std::string, std::string> filters;
      if (!name_filter.empty()) filters["name"] = name_filter;
      std::string body = cached_query(
          ctx, protocol::entity_list_path(protocol::EntityKind::Dataset, filters,
                                          offset, limit));
      for (const protocol::EntitySummary& s : protocol::parse_entity_list(body))
        std::cout << s.id << "\t" << s.name << "\n";
    } else if (ds_get->parsed()) {
      Context ctx = make_context(g);
      DatasetDescription d = cache::get_dataset(ctx.ccfg, ctx.client, dataset_id);
      std::cout << "id=" << *d.id << " name=" << d.name << " version=" << d.version
                << " features=" << d.features.size()
                << " checksum=" << d.file_checksum << "\n";
    } else if (ds_upload->parsed()) {
      Context ctx = make_context(g);
      DatasetDescription d =
          protocol::decode_dataset(xml::parse(read_file_or_die(description_path)));
      std::string payload = read_file_or_die(data_path);
      d.file_checksum = cache::md5_hex(payload);
      std::int64_t id = ctx.client.publish_dataset(d, payload);
      std::cout << "dataset_id=" << id << "\n";
    } else if (task_get->parsed()) {
      Context ctx = make_context(g);
      Task t = cache::get_task(ctx.ccfg, ctx.client, task_id);
      std::cout << "id=" << t.id << " type=" << to_string(t.task_type)
                << " dataset=" << t.dataset_id << " target=" << t.target_name
                << " folds=" << t.estimation_procedure.folds
                << " repeats=" << t.estimation_procedure.repeats << "\n";
    } else if (task_create->parsed()) {
      Context ctx = make_context(g);
      DatasetDescription d = cache::get_dataset(ctx.ccfg, ctx.client, create_dataset);
      arff::DataTable table = cache::fetch_dataset_payload(ctx.ccfg, ctx.client, d);
      const arff::Column* target = table.find_column(create_target);
      if (!target || target->kind != FeatureKind::Nominal)
        throw std::runtime_error("target must be a nominal column: " + create_target);
      Task t;
      t.id = 1;  // placeholder; the server assigns the real id
      t.dataset_id = create_dataset;
      t.target_name = create_target;
      t.estimation_procedure = {EstimationKind::CrossValidation, create_repeats,
                                create_folds, 0.0, ""};
      t.class_labels = target->categories;
      std::string splits = arff::serialize(runner::make_cv_splits(
          create_dataset, table.row_count, create_repeats, create_folds));
      std::int64_t id = ctx.client.publish_task(t, splits);
      std::cout << "task_id=" << id << "\n";
    } else if (suite_get->parsed()) {
      Context ctx = make_context(g);
      Suite s = cache::get_suite(ctx.ccfg, ctx.client, suite_alias);
      std::cout << "alias=" << s.alias << " name=" << s.name << " tasks=";
      for (std::size_t i = 0; i < s.task_ids.size(); ++i)
        std::cout << (i ? "," : "") << s.task_ids[i];
      std::cout << "\n";
    } else if (run_cmd->parsed()) {
      return run_command(g, run_tasks, run_suite, run_model, run_seed, run_publish,
                         run_workers);
    } else if (evals_export->parsed()) {
      Context ctx = make_context(g);
      std::string body = cached_query(
          ctx, protocol::evaluation_list_path(evals_function, evals_flows,
                                              evals_tasks));
      protocol::EvaluationTable table = protocol::flatten_evaluations(
          protocol::parse_evaluation_list(body), true);
      std::vector<std::string> log_cols = log10_cols;
      bool natural = false;
      if (!ln_cols.empty()) {
        if (!log10_cols.empty())
          throw std::runtime_error("--log10 and --ln cannot be mixed");
        log_cols = ln_cols;
        natural = true;
      }
      std::size_t rows = cli::export_evaluations(table, log_cols, natural, evals_out);
      std::cout << "rows=" << rows << " out=" << evals_out << "\n";
    } else if (cache_clear->parsed()) {
      Context ctx = make_context(g);
      std::size_t removed = cache::clear(ctx.ccfg, ctx.host, clear_kind, clear_id);
      std::cout << "removed=" << removed << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
