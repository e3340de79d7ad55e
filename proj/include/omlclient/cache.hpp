#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include "omlclient/arff.hpp"
#include "omlclient/entities.hpp"
#include "omlclient/protocol.hpp"

// Content-addressed on-disk cache for entity descriptions and payload files,
// with checksum verification and a strict offline mode. Safe for concurrent
// use across threads and processes; atomic rename is the only coordination
// primitive.
namespace oml::cache {

struct CacheConfig {
  std::filesystem::path root_dir;
  bool offline = false;
};

struct OfflineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ChecksumError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Artifact { Description, Payload, Splits, Features };

std::string to_string(Artifact a);

// Deterministic relative layout {host}/{kind}/{id}/{artifact}.{ext};
// injective over (host, kind, id, artifact).
std::filesystem::path cache_path(const std::string& host, const std::string& kind,
                                 const std::string& id, Artifact artifact);

// Host component of an absolute URL, e.g. "www.openml.org" or "127.0.0.1:8080".
std::string host_of(const std::string& base_url);

std::string md5_hex(std::string_view bytes);

using Fetcher = std::function<std::string()>;

// Cache-through read. A hit (existing file whose checksum matches, when one
// is expected) never invokes the fetcher; a miss while offline raises
// OfflineError; otherwise fetched bytes are verified and written atomically.
// Mismatched on-disk entries are treated as misses and re-fetched once.
std::string fetch_cached(const CacheConfig& cfg, const std::filesystem::path& rel_path,
                         const std::optional<std::string>& expected_md5,
                         const Fetcher& fetch);

// Cached description reads for each entity kind.
DatasetDescription get_dataset(const CacheConfig& cfg, const protocol::Client& client,
                               std::int64_t id);
Task get_task(const CacheConfig& cfg, const protocol::Client& client, std::int64_t id);
Flow get_flow(const CacheConfig& cfg, const protocol::Client& client, std::int64_t id);
Suite get_suite(const CacheConfig& cfg, const protocol::Client& client,
                const std::string& alias);

// Payload/splits fetch, composed of fetch_cached + arff parsing.
arff::DataTable fetch_dataset_payload(const CacheConfig& cfg,
                                      const protocol::Client& client,
                                      const DatasetDescription& dataset);
arff::ArffDocument fetch_task_splits(const CacheConfig& cfg,
                                     const protocol::Client& client, const Task& task);

// Deletes cached artifacts; kind/id empty means everything under the host.
std::size_t clear(const CacheConfig& cfg, const std::string& host,
                  const std::string& kind = {}, const std::string& id = {});

// Default cache root: $OMLCLIENT_CACHEDIR, else ~/.omlclient/cache.
std::filesystem::path default_cache_root();

}  // namespace oml::cache
