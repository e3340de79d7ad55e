#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "omlclient/entities.hpp"
#include "omlclient/xml.hpp"

// The platform's REST/XML wire protocol: fetch and publish entities, list
// with filters, decode server errors, authenticate with an API key.
namespace oml::protocol {

struct ServerConfig {
  std::string base_url;  // absolute, e.g. "http://127.0.0.1:8080"
  std::optional<std::string> api_key;
  double timeout_seconds = 30.0;
  int retries = 2;  // at most 10
};

struct ApiError : std::runtime_error {
  ApiError(int http_status, int code, const std::string& message)
      : std::runtime_error("server error " + std::to_string(code) + " (http " +
                           std::to_string(http_status) + "): " + message),
        http_status(http_status),
        code(code),
        message(message) {}
  int http_status;
  int code;
  std::string message;
};

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Replaces any occurrence of the API key in a message with "***".
std::string scrub_secret(std::string message, const ServerConfig& cfg);

// ---- wire codec (shared with the mock server) ----

xml::Node encode(const DatasetDescription& d);
xml::Node encode(const Task& t);
xml::Node encode(const Flow& f);
xml::Node encode(const Run& r);
xml::Node encode(const Suite& s);
xml::Node encode(const EvaluationRecord& e);

DatasetDescription decode_dataset(const xml::Node& n);
Task decode_task(const xml::Node& n);
Flow decode_flow(const xml::Node& n);
Run decode_run(const xml::Node& n);
Suite decode_suite(const xml::Node& n);
EvaluationRecord decode_evaluation(const xml::Node& n);

ApiError decode_error(int http_status, const std::string& body);
std::string encode_error(int code, const std::string& message);

// ---- transport ----

struct HttpResponse {
  int status = 0;
  std::string body;
};

struct MultipartPart {
  std::string name;
  std::string filename;  // empty for form fields
  std::string content;
};

// Pluggable so tests can fake the network; the default talks HTTP via
// cpp-httplib.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse get(const std::string& url, double timeout_seconds) = 0;
  virtual HttpResponse post(const std::string& url,
                            const std::vector<MultipartPart>& parts,
                            double timeout_seconds) = 0;
};

std::shared_ptr<Transport> default_transport();

// ---- client ----

enum class EntityKind { Dataset, Task, Flow, Run, Suite };

std::string to_string(EntityKind k);

struct EntitySummary {
  std::int64_t id = 0;
  std::string name;
};

class Client {
 public:
  explicit Client(ServerConfig cfg,
                  std::shared_ptr<Transport> transport = default_transport());

  const ServerConfig& config() const { return cfg_; }

  // GET + decode + validate. Dataset retrieval resolves the payload URL and
  // checksum but does not download the payload itself.
  DatasetDescription get_dataset(std::int64_t id) const;
  Task get_task(std::int64_t id) const;
  Flow get_flow(std::int64_t id) const;
  Run get_run(std::int64_t id) const;
  Suite get_suite(const std::string& alias) const;

  std::vector<EntitySummary> list_entities(
      EntityKind kind, const std::map<std::string, std::string>& filters,
      std::int64_t offset, std::int64_t limit) const;

  std::vector<EvaluationRecord> list_evaluations(
      const std::string& function, const std::vector<std::int64_t>& flows,
      const std::vector<std::int64_t>& tasks) const;

  std::int64_t publish_dataset(const DatasetDescription& d,
                               const std::string& payload_arff) const;
  std::int64_t publish_flow(const Flow& f) const;
  std::int64_t publish_run(const Run& r, const std::string& predictions_arff) const;
  std::int64_t publish_task(const Task& t, const std::string& splits_arff) const;

  // Raw GET of a server-relative or absolute resource path, with the retry
  // policy applied. Used by the cache layer as its remote-bytes supplier.
  std::string get_bytes(const std::string& path_or_url) const;

  std::string predictions_of_run(std::int64_t run_id) const;

 private:
  HttpResponse request_get(const std::string& url) const;
  std::int64_t publish(const std::string& kind_path, const xml::Node& description,
                       const std::vector<MultipartPart>& attachments) const;
  std::string absolute(const std::string& path_or_url) const;

  ServerConfig cfg_;
  std::shared_ptr<Transport> transport_;
};

// Evaluations table in the Fig.-style flattened form. When
// parameters_in_separate_columns, each distinct stored parameter name becomes
// its own column after the fixed columns; absent cells carry the missing
// marker "?".
struct EvaluationTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

EvaluationTable list_evaluations_setups(const Client& client,
                                        const std::string& function,
                                        const std::vector<std::int64_t>& flows,
                                        const std::vector<std::int64_t>& tasks,
                                        bool parameters_in_separate_columns);

// Request paths and response parsing for the list endpoints, shared by the
// client and by callers that route list reads through the cache.
std::string entity_list_path(EntityKind kind,
                             const std::map<std::string, std::string>& filters,
                             std::int64_t offset, std::int64_t limit);
std::string evaluation_list_path(const std::string& function,
                                 const std::vector<std::int64_t>& flows,
                                 const std::vector<std::int64_t>& tasks);
std::vector<EntitySummary> parse_entity_list(const std::string& xml_body);
std::vector<EvaluationRecord> parse_evaluation_list(const std::string& xml_body);
EvaluationTable flatten_evaluations(const std::vector<EvaluationRecord>& records,
                                    bool parameters_in_separate_columns);

}  // namespace oml::protocol
