#include <algorithm>
#include <chrono>
#include <functional>
#include <sstream>
#include <thread>

#include "omlclient/arff.hpp"

#include <httplib.h>

#include "omlclient/protocol.hpp"

namespace oml::protocol {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw TransportError("URL is not absolute: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport : public Transport {
 public:
  HttpResponse get(const std::string& url, double timeout_seconds) override {
    SplitUrl u = split_url(url);
    httplib::Client cli(u.origin);
    set_timeouts(cli, timeout_seconds);
    auto res = cli.Get(u.path);
    if (!res) throw TransportError("GET " + url + " failed: " + to_string(res.error()));
    return {res->status, res->body};
  }

  HttpResponse post(const std::string& url, const std::vector<MultipartPart>& parts,
                    double timeout_seconds) override {
    SplitUrl u = split_url(url);
    httplib::Client cli(u.origin);
    set_timeouts(cli, timeout_seconds);
    httplib::MultipartFormDataItems items;
    for (const MultipartPart& p : parts)
      items.push_back({p.name, p.content, p.filename, "application/octet-stream"});
    auto res = cli.Post(u.path, items);
    if (!res) throw TransportError("POST " + url + " failed: " + to_string(res.error()));
    return {res->status, res->body};
  }

 private:
  static void set_timeouts(httplib::Client& cli, double seconds) {
    auto usec = static_cast<time_t>(seconds * 1e6);
    cli.set_connection_timeout(0, usec);
    cli.set_read_timeout(0, usec);
    cli.set_write_timeout(0, usec);
  }
};

// Deterministic per-request jitter so retry schedules are reproducible.
std::chrono::milliseconds backoff_delay(const std::string& request_key, int attempt) {
  std::uint64_t h = std::hash<std::string>{}(request_key + "#" + std::to_string(attempt));
  std::uint64_t base = 50u << attempt;  // 50ms, 100ms, 200ms, ...
  return std::chrono::milliseconds(base + h % 25);
}

bool retryable_status(int status) { return status >= 500; }

}  // namespace

std::string scrub_secret(std::string message, const ServerConfig& cfg) {
  if (!cfg.api_key || cfg.api_key->empty()) return message;
  const std::string& key = *cfg.api_key;
  std::size_t pos = 0;
  while ((pos = message.find(key, pos)) != std::string::npos) {
    message.replace(pos, key.size(), "***");
    pos += 3;
  }
  return message;
}

std::shared_ptr<Transport> default_transport() {
  return std::make_shared<HttplibTransport>();
}

Client::Client(ServerConfig cfg, std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
  if (cfg_.base_url.find("://") == std::string::npos)
    throw TransportError("base_url must be absolute: " + cfg_.base_url);
  if (cfg_.retries < 0 || cfg_.retries > 10)
    throw TransportError("retries must be in [0, 10]");
  while (!cfg_.base_url.empty() && cfg_.base_url.back() == '/')
    cfg_.base_url.pop_back();
}

std::string Client::absolute(const std::string& path_or_url) const {
  if (path_or_url.find("://") != std::string::npos) return path_or_url;
  if (!path_or_url.empty() && path_or_url.front() == '/')
    return cfg_.base_url + path_or_url;
  return cfg_.base_url + "/" + path_or_url;
}

HttpResponse Client::request_get(const std::string& url) const {
  std::string last_error;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(backoff_delay(url, attempt - 1));
    try {
      HttpResponse res = transport_->get(url, cfg_.timeout_seconds);
      if (!retryable_status(res.status) || attempt == cfg_.retries) return res;
      last_error = "http " + std::to_string(res.status);
    } catch (const TransportError& e) {
      if (attempt == cfg_.retries)
        throw TransportError(scrub_secret(e.what(), cfg_));
      last_error = e.what();
    }
  }
  throw TransportError(scrub_secret(last_error, cfg_));
}

std::string Client::get_bytes(const std::string& path_or_url) const {
  HttpResponse res = request_get(absolute(path_or_url));
  if (res.status < 200 || res.status >= 300) {
    ApiError err = decode_error(res.status, res.body);
    throw ApiError(err.http_status, err.code, scrub_secret(err.message, cfg_));
  }
  return res.body;
}

namespace {

xml::Node get_xml(const Client& c, const std::string& path) {
  std::string body = c.get_bytes(path);
  try {
    return xml::parse(body);
  } catch (const xml::XmlError& e) {
    throw DecodeError(std::string("malformed XML from ") + path + ": " + e.what());
  }
}

void require_valid(std::vector<std::string> violations, const std::string& what) {
  if (!violations.empty())
    throw DecodeError("server returned invalid " + what + ": " + violations.front());
}

}  // namespace

DatasetDescription Client::get_dataset(std::int64_t id) const {
  DatasetDescription d = decode_dataset(get_xml(*this, "/data/" + std::to_string(id)));
  require_valid(validate(d), "dataset");
  return d;
}

Task Client::get_task(std::int64_t id) const {
  Task t = decode_task(get_xml(*this, "/task/" + std::to_string(id)));
  require_valid(validate(t), "task");
  return t;
}

Flow Client::get_flow(std::int64_t id) const {
  Flow f = decode_flow(get_xml(*this, "/flow/" + std::to_string(id)));
  require_valid(validate(f), "flow");
  return f;
}

Run Client::get_run(std::int64_t id) const {
  return decode_run(get_xml(*this, "/run/" + std::to_string(id)));
}

Suite Client::get_suite(const std::string& alias) const {
  Suite s = decode_suite(get_xml(*this, "/study/" + alias));
  require_valid(validate(s), "study");
  return s;
}

std::string Client::predictions_of_run(std::int64_t run_id) const {
  return get_bytes("/run/" + std::to_string(run_id) + "/predictions");
}

std::string entity_list_path(EntityKind kind,
                             const std::map<std::string, std::string>& filters,
                             std::int64_t offset, std::int64_t limit) {
  if (limit < 1 || limit > 10000)
    throw DecodeError("limit must be in [1, 10000]");
  std::string kind_path = kind == EntityKind::Dataset ? "data" : to_string(kind);
  std::ostringstream path;
  path << '/' << kind_path << "/list";
  for (const auto& [name, value] : filters) path << '/' << name << '/' << value;
  path << "/offset/" << offset << "/limit/" << limit;
  return path.str();
}

std::string evaluation_list_path(const std::string& function,
                                 const std::vector<std::int64_t>& flows,
                                 const std::vector<std::int64_t>& tasks) {
  if (function.empty()) throw DecodeError("function must be non-empty");
  if (flows.empty() && tasks.empty())
    throw DecodeError("at least one of flows/tasks must be non-empty");
  std::ostringstream path;
  path << "/evaluation/list/function/" << function;
  for (std::int64_t f : flows) path << "/flow/" << f;
  for (std::int64_t t : tasks) path << "/task/" << t;
  return path.str();
}

std::vector<EntitySummary> parse_entity_list(const std::string& xml_body) {
  xml::Node n = xml::parse(xml_body);
  std::vector<EntitySummary> out;
  for (const xml::Node* item : n.find_all("item"))
    out.push_back({std::stoll(item->child_text("id", "0")), item->child_text("name")});
  return out;
}

std::vector<EvaluationRecord> parse_evaluation_list(const std::string& xml_body) {
  xml::Node n = xml::parse(xml_body);
  std::vector<EvaluationRecord> out;
  for (const xml::Node* e : n.find_all("evaluation"))
    out.push_back(decode_evaluation(*e));
  return out;
}

std::vector<EntitySummary> Client::list_entities(
    EntityKind kind, const std::map<std::string, std::string>& filters,
    std::int64_t offset, std::int64_t limit) const {
  return parse_entity_list(get_bytes(entity_list_path(kind, filters, offset, limit)));
}

std::vector<EvaluationRecord> Client::list_evaluations(
    const std::string& function, const std::vector<std::int64_t>& flows,
    const std::vector<std::int64_t>& tasks) const {
  return parse_evaluation_list(get_bytes(evaluation_list_path(function, flows, tasks)));
}

std::int64_t Client::publish(const std::string& kind_path, const xml::Node& description,
                             const std::vector<MultipartPart>& attachments) const {
  if (!cfg_.api_key || cfg_.api_key->empty())
    throw ApiError(401, 103, "authentication required: no api_key configured");
  std::vector<MultipartPart> parts;
  parts.push_back({"description", "description.xml", xml::serialize(description)});
  for (const MultipartPart& a : attachments) parts.push_back(a);
  std::string url = cfg_.base_url + "/" + kind_path + "?api_key=" + *cfg_.api_key;
  HttpResponse res;
  try {
    res = transport_->post(url, parts, cfg_.timeout_seconds);
  } catch (const TransportError& e) {
    throw TransportError(scrub_secret(e.what(), cfg_));
  }
  if (res.status < 200 || res.status >= 300) {
    ApiError err = decode_error(res.status, res.body);
    throw ApiError(err.http_status, err.code, scrub_secret(err.message, cfg_));
  }
  xml::Node n = xml::parse(res.body);
  if (n.name != "upload" || !n.find("id"))
    throw DecodeError("unexpected upload response");
  return std::stoll(n.child_text("id"));
}

std::int64_t Client::publish_dataset(const DatasetDescription& d,
                                     const std::string& payload_arff) const {
  require_valid(validate(d), "dataset");
  return publish("data", encode(d), {{"dataset", "payload.arff", payload_arff}});
}

std::int64_t Client::publish_flow(const Flow& f) const {
  require_valid(validate(f), "flow");
  return publish("flow", encode(f), {});
}

std::int64_t Client::publish_run(const Run& r,
                                 const std::string& predictions_arff) const {
  return publish("run", encode(r),
                 {{"predictions", "predictions.arff", predictions_arff}});
}

std::int64_t Client::publish_task(const Task& t, const std::string& splits_arff) const {
  require_valid(validate(t), "task");
  return publish("task", encode(t), {{"splits", "splits.arff", splits_arff}});
}

EvaluationTable list_evaluations_setups(const Client& client,
                                        const std::string& function,
                                        const std::vector<std::int64_t>& flows,
                                        const std::vector<std::int64_t>& tasks,
                                        bool parameters_in_separate_columns) {
  return flatten_evaluations(client.list_evaluations(function, flows, tasks),
                             parameters_in_separate_columns);
}

EvaluationTable flatten_evaluations(const std::vector<EvaluationRecord>& records,
                                    bool parameters_in_separate_columns) {
  EvaluationTable table;
  table.columns = {"run_id", "task_id", "flow_id", "function", "value"};
  if (parameters_in_separate_columns) {
    // Column union over all matched setups, in first-seen order.
    std::vector<std::string> param_cols;
    for (const EvaluationRecord& r : records)
      for (const auto& [name, value] : r.parameters)
        if (std::find(param_cols.begin(), param_cols.end(), name) == param_cols.end())
          param_cols.push_back(name);
    table.columns.insert(table.columns.end(), param_cols.begin(), param_cols.end());
    for (const EvaluationRecord& r : records) {
      std::vector<std::string> row = {
          std::to_string(r.run_id), std::to_string(r.task_id),
          std::to_string(r.flow_id), r.function, arff::format_double(r.value)};
      for (const std::string& col : param_cols) {
        auto it = r.parameters.find(col);
        row.push_back(it == r.parameters.end() ? "?" : it->second);
      }
      table.rows.push_back(std::move(row));
    }
  } else {
    table.columns.push_back("parameters");
    for (const EvaluationRecord& r : records) {
      std::string packed;
      for (const auto& [name, value] : r.parameters) {
        if (!packed.empty()) packed += ";";
        packed += name + "=" + value;
      }
      table.rows.push_back({std::to_string(r.run_id), std::to_string(r.task_id),
                            std::to_string(r.flow_id), r.function,
                            arff::format_double(r.value), packed});
    }
  }
  return table;
}

}  // namespace oml::protocol
