#include "semprobe/server.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>

#include "httplib.h"

#include "semprobe/errors.hpp"

namespace semprobe {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxVocabLimit = 1000;

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '/'))
    if (!part.empty()) parts.push_back(part);
  return parts;
}

Error bad_request(const std::string& message) { return Error(ErrorCode::BadRequest, message); }

std::string required_string(const json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || !it->is_string())
    throw bad_request(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

std::size_t size_field(const json& body, const char* key, std::optional<std::size_t> fallback) {
  const auto it = body.find(key);
  if (it == body.end() || it->is_null()) {
    if (fallback) return *fallback;
    throw bad_request(std::string("field '") + key + "' is required");
  }
  if (it->is_number_unsigned()) return it->get<std::size_t>();
  if (it->is_number_integer()) {
    if (std::string_view(key) == "dim")
      throw Error(ErrorCode::DimensionOutOfRange, "dimension must be non-negative");
    throw bad_request(std::string("field '") + key + "' must be non-negative");
  }
  throw bad_request(std::string("field '") + key + "' must be an integer");
}

std::uint64_t parse_seed(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw bad_request("seed must be a non-negative integer");
}

std::uint64_t request_seed(const ApiRequest& req, const json& body) {
  if (body.is_object()) {
    const auto it = body.find("seed");
    if (it != body.end() && !it->is_null()) {
      if (!it->is_number_unsigned()) throw bad_request("seed must be a non-negative integer");
      return it->get<std::uint64_t>();
    }
  }
  if (auto it = req.query.find("seed"); it != req.query.end()) return parse_seed(it->second);
  return 0;
}

std::size_t query_size(const ApiRequest& req, const std::string& key, std::size_t fallback) {
  const auto it = req.query.find(key);
  if (it == req.query.end() || it->second.empty()) return fallback;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw bad_request(key + " must be a non-negative integer");
}

std::optional<std::pair<std::string, std::string>> query_pair(const ApiRequest& req) {
  const auto it = req.query.find("pair");
  if (it == req.query.end() || it->second.empty()) return std::nullopt;
  const auto comma = it->second.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == it->second.size() ||
      it->second.find(',', comma + 1) != std::string::npos)
    throw bad_request("pair must be 'word1,word2'");
  return std::make_pair(it->second.substr(0, comma), it->second.substr(comma + 1));
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownWord:
    case ErrorCode::UnknownModel:
      return 404;
    case ErrorCode::BadRange:
    case ErrorCode::BadRequest:
    case ErrorCode::DimensionOutOfRange:
    case ErrorCode::EmptyRange:
    case ErrorCode::ZeroSemanticDirection:
    case ErrorCode::ConfigInvalid:
    case ErrorCode::KTooLarge:
      return 400;
    default:
      return 500;
  }
}

json profile_json(const DimensionProfile& p) {
  return {{"dim", p.index},
          {"entropy", p.entropy},
          {"mean_min", p.mean_min},
          {"q1", p.q1},
          {"median", p.median},
          {"q3", p.q3},
          {"mean_max", p.mean_max},
          {"avg_sigma", p.avg_sigma ? json(*p.avg_sigma) : json(nullptr)},
          {"useful", p.useful}};
}

std::vector<std::size_t> all_dims(const ModelSession& s) {
  std::vector<std::size_t> dims(s.checkpoint.latent_dim());
  std::iota(dims.begin(), dims.end(), 0);
  return dims;
}

}  // namespace

const ModelSession& SessionRegistry::add(std::string id, ModelCheckpoint checkpoint,
                                         std::shared_ptr<const EmbeddingTable> table,
                                         TrainingTrace trace) {
  if (id.empty() || id.find('/') != std::string::npos)
    throw Error(ErrorCode::ConfigInvalid, "model id must be non-empty and contain no '/'");
  for (const auto& s : sessions_)
    if (s->id == id) throw Error(ErrorCode::ConfigInvalid, "duplicate model id: " + id);
  if (!table) throw Error(ErrorCode::ConfigInvalid, "model " + id + " has no embedding table");
  checkpoint.validate();
  auto session = std::make_unique<ModelSession>();
  session->id = std::move(id);
  session->profiles = dimension_profiles(checkpoint, *table);
  session->checkpoint = std::move(checkpoint);
  session->table = std::move(table);
  session->trace = std::move(trace);
  sessions_.push_back(std::move(session));
  return *sessions_.back();
}

const ModelSession& SessionRegistry::get(const std::string& id) const {
  for (const auto& s : sessions_)
    if (s->id == id) return *s;
  throw Error(ErrorCode::UnknownModel, "unknown model: " + id);
}

Api::Api(const SessionRegistry& registry, ProbeOptions probe_options)
    : registry_(registry), probe_options_(probe_options) {}

json probe_report_json(const ProbeReport& r) {
  return {{"dim", r.dim},
          {"theta", r.theta},
          {"phi", r.phi},
          {"level", r.encoding_level},
          {"extent", (r.extent_w1 + r.extent_w2) / 2.0},
          {"extent_w1", r.extent_w1},
          {"extent_w2", r.extent_w2},
          {"degenerate", r.degenerate},
          {"pair_diff", r.pair_diff}};
}

json histogram_json(const AngleHistogram& h) {
  return {{"bin_width", AngleHistogram::kBinWidth}, {"density", h.density}};
}

std::vector<ProbeReport> Api::probe_reports(const ModelSession& s, const std::string& w1,
                                            const std::string& w2,
                                            const std::vector<std::size_t>& dims) {
  const CacheKey key{s.id, w1, w2};
  const std::size_t m = s.checkpoint.latent_dim();
  for (std::size_t d : dims)
    if (d >= m)
      throw Error(ErrorCode::DimensionOutOfRange,
                  "dimension " + std::to_string(d) + " is out of range [0, " + std::to_string(m) + ")");

  std::vector<std::optional<ProbeReport>> found(dims.size());
  {
    std::shared_lock lock(cache_mutex_);
    if (auto it = cache_.find(key); it != cache_.end())
      for (std::size_t i = 0; i < dims.size(); ++i) found[i] = it->second[dims[i]];
  }
  std::vector<ProbeReport> fresh;
  for (std::size_t i = 0; i < dims.size(); ++i)
    if (!found[i]) {
      found[i] = probe_dimension(s.checkpoint, *s.table, s.profiles, w1, w2, dims[i], probe_options_);
      fresh.push_back(*found[i]);
    }
  if (!fresh.empty()) {
    std::unique_lock lock(cache_mutex_);
    auto& entry = cache_[key];
    entry.resize(m);
    for (auto& r : fresh) entry[r.dim] = std::move(r);
  }
  std::vector<ProbeReport> out;
  out.reserve(dims.size());
  for (auto& r : found) out.push_back(std::move(*r));
  return out;
}

json Api::models(const ApiRequest&) {
  json list = json::array();
  for (const auto& s : registry_.sessions()) {
    const auto& cfg = s->checkpoint.config;
    list.push_back({{"id", s->id},
                    {"kind", model_kind_name(cfg.kind)},
                    {"beta", cfg.effective_beta()},
                    {"epoch", s->checkpoint.epoch},
                    {"latent_dim", cfg.latent_dim},
                    {"input_dim", cfg.input_dim},
                    {"vocab_size", s->table->size()},
                    {"useful_dims", useful_dimensions(s->profiles).size()},
                    {"trace_epochs", s->trace.records.size()}});
  }
  return {{"models", list}};
}

json Api::trace(const ModelSession& s, const ApiRequest&) {
  json records = json::array();
  for (const auto& r : s.trace.records) records.push_back(json::parse(trace_record_json(r)));
  return {{"model", s.id}, {"kind", model_kind_name(s.checkpoint.kind())}, {"records", records}};
}

json Api::dims(const ModelSession& s, const ApiRequest& req) {
  std::string sort = "entropy";
  if (auto it = req.query.find("sort"); it != req.query.end() && !it->second.empty()) sort = it->second;
  if (sort != "entropy" && sort != "angle" && sort != "pair_diff")
    throw bad_request("sort must be one of entropy, angle, pair_diff");
  const auto pair = query_pair(req);
  if (sort != "entropy" && !pair) throw bad_request("sort=" + sort + " needs pair=word1,word2");

  const std::size_t m = s.checkpoint.latent_dim();
  std::vector<json> rows(m);
  for (std::size_t d = 0; d < m; ++d) rows[d] = profile_json(s.profiles[d]);

  std::vector<double> pair_diff(m, 0.0), level(m, 90.0);
  if (pair) {
    const auto mu1 = encode(s.checkpoint, s.table->vector_of(pair->first)).mean;
    const auto mu2 = encode(s.checkpoint, s.table->vector_of(pair->second)).mean;
    for (std::size_t d = 0; d < m; ++d) {
      pair_diff[d] = std::abs(mu1[d] - mu2[d]);
      rows[d]["pair_diff"] = pair_diff[d];
    }
    if (sort == "angle") {
      for (const auto& r : probe_reports(s, pair->first, pair->second, all_dims(s))) {
        level[r.dim] = r.encoding_level;
        auto& row = rows[r.dim];
        const json pj = probe_report_json(r);
        for (const char* k : {"theta", "phi", "level", "extent", "extent_w1", "extent_w2", "degenerate"})
          row[k] = pj[k];
      }
    }
  }

  std::vector<std::size_t> order = all_dims(s);
  if (sort == "entropy")
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
      return s.profiles[a].entropy > s.profiles[b].entropy;
    });
  else if (sort == "angle")
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return level[a] < level[b]; });
  else
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return pair_diff[a] > pair_diff[b]; });

  json out_rows = json::array();
  for (std::size_t d : order) out_rows.push_back(std::move(rows[d]));
  json out = {{"model", s.id}, {"sort", sort}, {"dims", out_rows}};
  if (pair) out["pair"] = {pair->first, pair->second};
  return out;
}

json Api::probe(const ModelSession& s, const json& body) {
  const std::string w1 = required_string(body, "word1");
  const std::string w2 = required_string(body, "word2");
  std::vector<std::size_t> dims;
  const auto it = body.find("dims");
  if (it == body.end() || it->is_null() || (it->is_string() && *it == "useful")) {
    dims = useful_dimensions(s.profiles);
  } else if (it->is_string() && *it == "all") {
    dims = all_dims(s);
  } else if (it->is_array()) {
    for (const auto& d : *it) {
      if (d.is_number_integer() && !d.is_number_unsigned())
        throw Error(ErrorCode::DimensionOutOfRange, "dimension must be non-negative");
      if (!d.is_number_unsigned()) throw bad_request("dims must hold integers");
      dims.push_back(d.get<std::size_t>());
    }
  } else {
    throw bad_request("dims must be \"useful\", \"all\" or a list of integers");
  }
  // fail on unknown words even when the dim list is empty
  s.table->index_of(w1);
  s.table->index_of(w2);

  const auto reports = probe_reports(s, w1, w2, dims);
  json rows = json::array();
  std::vector<double> levels;
  for (const auto& r : reports) {
    rows.push_back(probe_report_json(r));
    levels.push_back(r.encoding_level);
  }
  return {{"model", s.id},
          {"word1", w1},
          {"word2", w2},
          {"dims", rows},
          {"histogram", histogram_json(angle_histogram(levels))}};
}

json Api::projection(const ModelSession& s, const json& body) {
  const std::string w1 = required_string(body, "word1");
  const std::string w2 = required_string(body, "word2");
  const std::size_t dim = size_field(body, "dim", std::nullopt);
  SceneOptions options;
  options.probe = probe_options_;
  options.neighbors = size_field(body, "k", options.neighbors);
  options.interpolation_samples = size_field(body, "t_samples", options.interpolation_samples);
  options.probe.samples = size_field(body, "p_samples", options.probe.samples);
  if (options.neighbors == 0 || options.neighbors > s.table->size())
    throw bad_request("k must be in [1, vocabulary size]");
  if (options.interpolation_samples < 2) throw bad_request("t_samples must be at least 2");
  if (options.probe.samples < 2) throw bad_request("p_samples must be at least 2");

  const auto scene = projection_scene(s.checkpoint, *s.table, s.profiles, w1, w2, dim, options);
  json points = json::array();
  for (const auto& p : scene.points) {
    json jp = {{"role", scene_role_name(p.role)}, {"x", p.xy[0]}, {"y", p.xy[1]}};
    if (p.owner >= 0) jp["owner"] = p.owner;
    switch (p.role) {
      case SceneRole::Anchor: jp["label"] = p.label; break;
      case SceneRole::Interpolation: jp["t"] = p.t; break;
      case SceneRole::Neighbor:
        jp["label"] = p.label;
        jp["rank"] = p.rank;
        jp["distance"] = p.distance;
        break;
      case SceneRole::Perturbation: jp["value"] = p.t; break;
    }
    points.push_back(std::move(jp));
  }
  return {{"model", s.id},      {"word1", w1},
          {"word2", w2},        {"dim", scene.dim},
          {"theta", scene.theta}, {"phi", scene.phi},
          {"degenerate", scene.degenerate}, {"points", points}};
}

json Api::wordcloud(const ModelSession& s, const json& body) {
  const std::string w1 = required_string(body, "word1");
  const std::string w2 = required_string(body, "word2");
  const std::size_t dim = size_field(body, "dim", std::nullopt);
  if (dim >= s.checkpoint.latent_dim())
    throw Error(ErrorCode::DimensionOutOfRange,
                "dimension " + std::to_string(dim) + " is out of range [0, " +
                    std::to_string(s.checkpoint.latent_dim()) + ")");
  double lo = s.profiles[dim].mean_min;
  double hi = s.profiles[dim].mean_max;
  if (const auto it = body.find("range"); it != body.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number())
      throw Error(ErrorCode::BadRange, "range must be [a, b]");
    lo = (*it)[0].get<double>();
    hi = (*it)[1].get<double>();
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw Error(ErrorCode::BadRange, "range must satisfy a < b");
  }
  WordCloudOptions options;
  options.samples_per_word = size_field(body, "n", options.samples_per_word);
  options.neighbors = size_field(body, "k", options.neighbors);
  const auto seed_it = body.find("seed");
  if (seed_it != body.end() && !seed_it->is_null()) {
    if (!seed_it->is_number_unsigned()) throw bad_request("seed must be a non-negative integer");
    options.seed = seed_it->get<std::uint64_t>();
  }
  if (options.samples_per_word == 0) throw bad_request("n must be positive");
  if (options.neighbors == 0 || options.neighbors > s.table->size())
    throw bad_request("k must be in [1, vocabulary size]");

  const auto cloud = word_cloud(s.checkpoint, *s.table, s.profiles, w1, w2, dim, lo, hi, options);
  json entries = json::array();
  for (const auto& e : cloud.entries)
    entries.push_back({{"token", e.token}, {"frequency", e.frequency}, {"min_distance", e.min_distance}});
  return {{"model", s.id},
          {"word1", w1},
          {"word2", w2},
          {"dim", dim},
          {"range", {cloud.range_lo, cloud.range_hi}},
          {"clamped", cloud.clamped},
          {"diversity", cloud.diversity},
          {"entries", entries}};
}

json Api::vocab(const ModelSession& s, const ApiRequest& req) {
  std::string prefix;
  if (auto it = req.query.find("prefix"); it != req.query.end()) prefix = it->second;
  const std::size_t limit = std::min(query_size(req, "limit", 20), kMaxVocabLimit);
  json words = json::array();
  std::size_t matches = 0;
  for (const auto& w : s.table->words()) {
    if (w.compare(0, prefix.size(), prefix) != 0) continue;
    if (words.size() < limit) words.push_back(w);
    ++matches;
  }
  return {{"model", s.id}, {"prefix", prefix}, {"words", words}, {"matches", matches}};
}

ApiResponse Api::handle(const ApiRequest& req) {
  ApiResponse res;
  std::optional<std::uint64_t> seed;
  const ModelSession* session = nullptr;
  try {
    json body = json::object();
    if (req.method == "POST") {
      if (req.body.empty()) throw bad_request("request body must be a JSON object");
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        throw bad_request("request body is not valid JSON");
      }
      if (!body.is_object()) throw bad_request("request body must be a JSON object");
    }
    seed = request_seed(req, body);

    const auto parts = split_path(req.path);
    if (parts.size() < 2 || parts[0] != "api" || parts[1] != "models") {
      res.status = 404;
      res.body = {{"error", "not_found"}, {"message", "no such endpoint: " + req.path}};
      return res;
    }
    auto wrong_method = [&] {
      res.status = 405;
      res.body = {{"error", "method_not_allowed"}, {"message", req.method + " " + req.path}};
    };

    if (parts.size() == 2) {
      if (req.method != "GET") {
        wrong_method();
        return res;
      }
      res.body = models(req);
    } else if (parts.size() == 4) {
      session = &registry_.get(parts[2]);
      const std::string& action = parts[3];
      const bool get = req.method == "GET";
      if (action == "trace" && get) res.body = trace(*session, req);
      else if (action == "dims" && get) res.body = dims(*session, req);
      else if (action == "vocab" && get) res.body = vocab(*session, req);
      else if (action == "probe" && !get) res.body = probe(*session, body);
      else if (action == "projection" && !get) res.body = projection(*session, body);
      else if (action == "wordcloud" && !get) res.body = wordcloud(*session, body);
      else if (action == "trace" || action == "dims" || action == "vocab" || action == "probe" ||
               action == "projection" || action == "wordcloud") {
        wrong_method();
        return res;
      } else {
        res.status = 404;
        res.body = {{"error", "not_found"}, {"message", "no such endpoint: " + req.path}};
        return res;
      }
    } else {
      res.status = 404;
      res.body = {{"error", "not_found"}, {"message", "no such endpoint: " + req.path}};
      return res;
    }
    res.status = 200;
  } catch (const UnknownWordError& e) {
    res.status = 404;
    res.body = {{"error", error_code_name(e.code())}, {"word", e.word()}};
  } catch (const Error& e) {
    res.status = status_for(e.code());
    res.body = {{"error", error_code_name(e.code())}, {"message", e.what()}};
  } catch (const std::exception& e) {
    res.status = 500;
    res.body = {{"error", "internal"}, {"message", e.what()}};
  }
  if (res.status == 200) {
    res.body["seed"] = seed ? json(*seed) : json(nullptr);
    res.body["epoch"] = session ? json(session->checkpoint.epoch) : json(nullptr);
  }
  return res;
}

void mount_api(httplib::Server& server, Api& api) {
  auto forward = [&api](const httplib::Request& req, httplib::Response& res) {
    ApiRequest ar;
    ar.method = req.method;
    ar.path = req.path;
    for (const auto& [k, v] : req.params) ar.query.emplace(k, v);
    ar.body = req.body;
    const ApiResponse out = api.handle(ar);
    res.status = out.status;
    res.set_content(out.body.dump(-1, ' ', false, json::error_handler_t::replace),
                    "application/json; charset=utf-8");
  };
  server.Get(R"(/api/.*)", forward);
  server.Post(R"(/api/.*)", forward);
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
}

HttpService::HttpService(const SessionRegistry& registry, std::string cors_origin)
    : api_(registry), server_(std::make_unique<httplib::Server>()) {
  if (registry.empty()) throw Error(ErrorCode::ConfigInvalid, "no models loaded");
  // SO_REUSEPORT (httplib's default) would let two services share a port
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  server_->set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  mount_api(*server_, api_);
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  int bound = -1;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (server_->bind_to_port(host, port)) {
    bound = port;
  }
  if (bound < 0)
    throw Error(ErrorCode::PortInUse, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpService::listen() { server_->listen_after_bind(); }

void HttpService::stop() {
  if (server_) server_->stop();
}

}  // namespace semprobe
