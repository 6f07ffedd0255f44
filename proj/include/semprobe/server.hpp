#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "semprobe/dimension_analysis.hpp"
#include "semprobe/embedding_table.hpp"
#include "semprobe/latent_model.hpp"
#include "semprobe/probe.hpp"
#include "semprobe/training_trace.hpp"

namespace httplib {
class Server;
}

namespace semprobe {

struct ModelSession {
  std::string id;
  ModelCheckpoint checkpoint;
  std::shared_ptr<const EmbeddingTable> table;
  TrainingTrace trace;
  std::vector<DimensionProfile> profiles;
};

/// Loaded models by id. Filled before serving, read-only afterwards.
class SessionRegistry {
 public:
  /// Profiles the table against the checkpoint. Throws ConfigInvalid on a
  /// duplicate id and ShapeMismatch when the table does not fit the model.
  const ModelSession& add(std::string id, ModelCheckpoint checkpoint,
                          std::shared_ptr<const EmbeddingTable> table, TrainingTrace trace = {});

  /// Throws Error{UnknownModel}.
  const ModelSession& get(const std::string& id) const;
  const std::vector<std::unique_ptr<ModelSession>>& sessions() const { return sessions_; }
  bool empty() const { return sessions_.empty(); }

 private:
  std::vector<std::unique_ptr<ModelSession>> sessions_;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Transport-independent request handling. Safe to call from many threads.
class Api {
 public:
  explicit Api(const SessionRegistry& registry, ProbeOptions probe_options = {});

  ApiResponse handle(const ApiRequest& request);

  /// Probe reports for the requested dims, served from the per-(model, pair)
  /// cache and computed on a miss.
  std::vector<ProbeReport> probe_reports(const ModelSession& session, const std::string& w1,
                                         const std::string& w2,
                                         const std::vector<std::size_t>& dims);

 private:
  nlohmann::json models(const ApiRequest& req);
  nlohmann::json trace(const ModelSession& s, const ApiRequest& req);
  nlohmann::json dims(const ModelSession& s, const ApiRequest& req);
  nlohmann::json probe(const ModelSession& s, const nlohmann::json& body);
  nlohmann::json projection(const ModelSession& s, const nlohmann::json& body);
  nlohmann::json wordcloud(const ModelSession& s, const nlohmann::json& body);
  nlohmann::json vocab(const ModelSession& s, const ApiRequest& req);

  using CacheKey = std::tuple<std::string, std::string, std::string>;
  using CacheEntry = std::vector<std::optional<ProbeReport>>;

  const SessionRegistry& registry_;
  ProbeOptions probe_options_;
  std::shared_mutex cache_mutex_;
  std::map<CacheKey, CacheEntry> cache_;
};

nlohmann::json probe_report_json(const ProbeReport& report);
nlohmann::json histogram_json(const AngleHistogram& histogram);

/// Routes every API path of `api` onto `server`, with CORS headers.
void mount_api(httplib::Server& server, Api& api);

/// Owns an httplib server bound to one port.
class HttpService {
 public:
  HttpService(const SessionRegistry& registry, std::string cors_origin = "*");
  ~HttpService();

  /// Port 0 picks an ephemeral port. Returns the bound port. Throws
  /// Error{PortInUse}.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  Api api_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace semprobe
