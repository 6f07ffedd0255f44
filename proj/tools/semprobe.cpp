#include <algorithm>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "semprobe/checkpoint_io.hpp"
#include "semprobe/dimension_analysis.hpp"
#include "semprobe/embedding_table.hpp"
#include "semprobe/errors.hpp"
#include "semprobe/evaluation.hpp"
#include "semprobe/probe.hpp"
#include "semprobe/server.hpp"
#include "semprobe/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace semprobe;

namespace {

struct Common {
  std::string embeddings;
  std::size_t limit = 0;
  bool json_out = false;
};

struct TrainArgs {
  std::string model = "bvae";
  double beta = 1e-5;
  std::size_t latent_dim = 350;
  std::vector<std::size_t> hidden = {400};
  std::size_t epochs = 100;
  std::size_t batch = 128;
  std::uint64_t seed = 1;
  double lr = 1e-3;
  std::string out = "model.ckpt";
  std::string trace;
  std::string semeval;
  std::string analogy;
  std::size_t analogy_questions = EvalBundle::kTelemetryAnalogies;
  std::size_t analogy_candidates = 0;
  std::string config;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  bool raw = false;
  std::string semeval;
  std::string analogy;
  std::string dims = "all";
  std::size_t analogy_candidates = 0;
};

struct ProbeArgs {
  std::string checkpoint;
  std::string pair;
  std::optional<std::size_t> dim;
  std::size_t samples = 700;
};

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::string> checkpoints;
  std::vector<std::string> traces;
  std::string cors_origin = "*";
};

std::optional<std::size_t> as_limit(std::size_t v) {
  if (v == 0) return std::nullopt;
  return v;
}

EmbeddingTable read_table(const Common& c) {
  return load_vectors(c.embeddings, as_limit(c.limit));
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string fmt_opt(const std::optional<double>& v, int precision = 4) {
  return v ? fmt(*v, precision) : "-";
}

fs::path default_trace_path(const fs::path& checkpoint) {
  return fs::path(checkpoint.string() + ".trace.jsonl");
}

std::pair<std::string, std::string> split_pair(const std::string& pair) {
  const auto comma = pair.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == pair.size())
    throw Error(ErrorCode::BadRequest, "--pair must look like word1,word2");
  return {pair.substr(0, comma), pair.substr(comma + 1)};
}

int run_train(const Common& c, const TrainArgs& a, const CLI::App& cmd) {
  TrainConfig config;
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw Error(ErrorCode::Io, "cannot open config: " + a.config);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
    }
    config = config_from_json(doc);
  }
  auto given = [&](const char* flag) { return cmd.count(flag) > 0 || a.config.empty(); };
  if (given("--model")) config.kind = model_kind_from_name(a.model);
  if (given("--beta")) config.beta = a.beta;
  if (given("--latent-dim")) config.latent_dim = a.latent_dim;
  if (given("--hidden")) config.hidden = a.hidden;
  if (given("--epochs")) config.epochs = a.epochs;
  if (given("--batch")) config.batch_size = a.batch;
  if (given("--seed")) config.seed = a.seed;
  if (given("--lr")) config.learning_rate = a.lr;
  if (config.kind == ModelKind::AE && cmd.count("--beta") > 0)
    std::cerr << "warning: --beta is ignored for --model ae\n";

  const EmbeddingTable table = read_table(c);
  config.input_dim = table.dim();
  config.validate();

  EvalBundle bundle;
  if (!a.semeval.empty()) bundle.similarity = load_similarity_pairs(a.semeval);
  if (!a.analogy.empty()) bundle.analogy = load_analogies(a.analogy).subsample(a.analogy_questions);
  bundle.analogy_candidate_limit = as_limit(a.analogy_candidates);

  TrainOptions options;
  EpochHook telemetry = telemetry_hook(table, bundle);
  const bool quiet = a.quiet || c.json_out;
  options.on_epoch = [&](const ModelCheckpoint& ckpt, TraceRecord& record) {
    telemetry(ckpt, record);
    if (!quiet)
      std::cerr << "epoch " << record.epoch << "/" << config.epochs << "  recon "
                << fmt(record.recon_loss) << "  kl " << fmt(record.kl_loss) << "  useful "
                << (record.useful_dims ? std::to_string(*record.useful_dims) : "-") << "  semeval "
                << fmt_opt(record.semeval) << "  analogy " << fmt_opt(record.analogy) << "\n";
  };

  const fs::path out = a.out;
  const fs::path trace_path = a.trace.empty() ? default_trace_path(out) : fs::path(a.trace);
  TrainResult result;
  try {
    result = train(table, config, std::move(options));
  } catch (const NonFiniteLossError& e) {
    save_checkpoint(e.last_finite(), out);
    e.trace().save(trace_path);
    throw;
  }
  save_checkpoint(result.checkpoint, out);
  result.trace.save(trace_path);

  const TraceRecord final_record = epoch_metrics(result.checkpoint, table, bundle);
  if (c.json_out) {
    json j = json::parse(trace_record_json(final_record));
    j["checkpoint"] = out.string();
    j["trace"] = trace_path.string();
    j["kind"] = model_kind_name(config.kind);
    j["latent_dim"] = config.latent_dim;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "checkpoint   " << out.string() << "\n"
              << "trace        " << trace_path.string() << "\n"
              << "model        " << model_kind_name(config.kind) << " (beta "
              << config.effective_beta() << ", m " << config.latent_dim << ")\n"
              << "epochs       " << result.checkpoint.epoch << "\n"
              << "recon_loss   " << fmt(final_record.recon_loss) << "\n"
              << "kl_loss      " << fmt(final_record.kl_loss) << "\n"
              << "useful_dims  " << final_record.useful_dims.value_or(0) << " / " << config.latent_dim << "\n"
              << "semeval      " << fmt_opt(final_record.semeval) << "\n"
              << "analogy      " << fmt_opt(final_record.analogy) << "\n";
  }
  return 0;
}

int run_eval(const Common& c, const EvalArgs& a) {
  if (a.semeval.empty() && a.analogy.empty())
    throw Error(ErrorCode::BadRequest, "eval needs --semeval and/or --analogy");
  if (a.raw == !a.checkpoint.empty())
    throw Error(ErrorCode::BadRequest, "eval needs exactly one of --checkpoint or --raw");
  std::optional<ModelCheckpoint> ckpt;
  if (!a.raw) ckpt = load_checkpoint(a.checkpoint);
  const EmbeddingTable table = read_table(c);
  std::optional<SimilarityPairset> pairs;
  std::optional<AnalogySet> questions;
  if (!a.semeval.empty()) pairs = load_similarity_pairs(a.semeval);
  if (!a.analogy.empty()) questions = load_analogies(a.analogy);
  const auto limit = as_limit(a.analogy_candidates);

  json out;
  if (a.raw) {
    std::optional<SimilarityResult> sim;
    std::optional<AnalogyResult> ana;
    if (pairs) sim = semantic_similarity_score(table, *pairs);
    if (questions) ana = analogy_accuracy(table, *questions, limit);
    out = metrics_json(sim, ana);
    out["source"] = "raw";
    out["dims_used"] = table.dim();
    out["useful_dims"] = nullptr;
  } else {
    const DimSelection sel = a.dims == "useful" ? DimSelection::UsefulOnly : DimSelection::All;
    const auto ev = evaluate_latent(*ckpt, table, pairs ? &*pairs : nullptr,
                                    questions ? &*questions : nullptr, sel, limit);
    if (ev.similarity_error) throw Error(ErrorCode::InsufficientPairs, *ev.similarity_error);
    out = metrics_json(ev.similarity, ev.analogy);
    out["source"] = a.checkpoint;
    out["kind"] = model_kind_name(ckpt->kind());
    out["epoch"] = ckpt->epoch;
    out["dims"] = a.dims;
    out["dims_used"] = ev.dims.size();
    out["useful_dims"] = ev.useful_dims;
  }
  out["semeval"] = out["rho"];
  out.erase("rho");
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_dims(const Common& c, const std::string& checkpoint) {
  const ModelCheckpoint ckpt = load_checkpoint(checkpoint);
  const EmbeddingTable table = read_table(c);
  auto profiles = dimension_profiles(ckpt, table);
  std::stable_sort(profiles.begin(), profiles.end(),
                   [](const auto& x, const auto& y) { return x.entropy > y.entropy; });
  const std::size_t useful = useful_dimensions(profiles).size();
  if (c.json_out) {
    json rows = json::array();
    for (const auto& p : profiles)
      rows.push_back({{"dim", p.index}, {"entropy", p.entropy}, {"mean_min", p.mean_min},
                      {"q1", p.q1}, {"median", p.median}, {"q3", p.q3}, {"mean_max", p.mean_max},
                      {"avg_sigma", p.avg_sigma ? json(*p.avg_sigma) : json(nullptr)},
                      {"useful", p.useful}});
    std::cout << json{{"kind", model_kind_name(ckpt.kind())}, {"epoch", ckpt.epoch},
                      {"useful_dims", useful}, {"deprecated_dims", profiles.size() - useful},
                      {"dims", rows}}
                     .dump(2)
              << "\n";
    return 0;
  }
  std::cout << std::left << std::setw(6) << "dim" << std::right << std::setw(10) << "entropy"
            << std::setw(10) << "min" << std::setw(10) << "q1" << std::setw(10) << "median"
            << std::setw(10) << "q3" << std::setw(10) << "max" << std::setw(10) << "sigma"
            << "  status\n";
  for (const auto& p : profiles)
    std::cout << std::left << std::setw(6) << p.index << std::right << std::setw(10) << fmt(p.entropy)
              << std::setw(10) << fmt(p.mean_min) << std::setw(10) << fmt(p.q1) << std::setw(10)
              << fmt(p.median) << std::setw(10) << fmt(p.q3) << std::setw(10) << fmt(p.mean_max)
              << std::setw(10) << fmt_opt(p.avg_sigma) << "  " << (p.useful ? "useful" : "deprecated")
              << "\n";
  std::cout << "useful " << useful << ", deprecated " << profiles.size() - useful << "\n";
  return 0;
}

int run_probe(const Common& c, const ProbeArgs& a) {
  const auto [w1, w2] = split_pair(a.pair);
  const ModelCheckpoint ckpt = load_checkpoint(a.checkpoint);
  const EmbeddingTable table = read_table(c);
  const auto profiles = dimension_profiles(ckpt, table);
  ProbeOptions options;
  options.samples = a.samples;
  std::optional<std::vector<std::size_t>> dims;
  if (a.dim) dims = std::vector<std::size_t>{*a.dim};
  const ProbeSummary summary = probe_all(ckpt, table, profiles, w1, w2, dims, options);

  if (c.json_out) {
    json rows = json::array();
    for (const auto& r : summary.reports) rows.push_back(probe_report_json(r));
    std::cout << json{{"word1", w1}, {"word2", w2}, {"epoch", ckpt.epoch}, {"dims", rows},
                      {"histogram", histogram_json(summary.histogram)}}
                     .dump(2)
              << "\n";
    return 0;
  }
  std::cout << std::left << std::setw(6) << "dim" << std::right << std::setw(9) << "theta"
            << std::setw(9) << "phi" << std::setw(9) << "level" << std::setw(12) << "extent_w1"
            << std::setw(12) << "extent_w2" << std::setw(11) << "pair_diff" << "  note\n";
  for (const auto& r : summary.reports)
    std::cout << std::left << std::setw(6) << r.dim << std::right << std::setw(9) << fmt(r.theta, 2)
              << std::setw(9) << fmt(r.phi, 2) << std::setw(9) << fmt(r.encoding_level, 2)
              << std::setw(12) << fmt(r.extent_w1) << std::setw(12) << fmt(r.extent_w2)
              << std::setw(11) << fmt(r.pair_diff) << "  " << (r.degenerate ? "degenerate" : "")
              << "\n";
  std::cout << summary.reports.size() << " reports for " << w1 << " -> " << w2 << "\n";
  return 0;
}

std::unique_ptr<HttpService> g_service;

int run_serve(const Common& c, const ServeArgs& a, bool port_given) {
  if (a.checkpoints.empty()) throw Error(ErrorCode::BadRequest, "serve needs at least one --checkpoint");
  if (!a.traces.empty() && a.traces.size() != a.checkpoints.size())
    throw Error(ErrorCode::BadRequest, "--trace must be given once per --checkpoint or not at all");
  auto table = std::make_shared<const EmbeddingTable>(read_table(c));
  SessionRegistry registry;
  for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
    const fs::path path = a.checkpoints[i];
    ModelCheckpoint ckpt = load_checkpoint(path);
    TrainingTrace trace;
    const fs::path trace_path = a.traces.empty() ? default_trace_path(path) : fs::path(a.traces[i]);
    if (!a.traces.empty() || fs::exists(trace_path)) trace = TrainingTrace::load(trace_path);
    std::string id = path.stem().string();
    for (const auto& s : registry.sessions())
      if (s->id == id) id += "-" + std::to_string(i);
    const auto& session = registry.add(id, std::move(ckpt), table, std::move(trace));
    std::cerr << "loaded " << session.id << " (" << model_kind_name(session.checkpoint.kind())
              << ", epoch " << session.checkpoint.epoch << ")\n";
  }
  int port = a.port;
  if (const char* env = std::getenv("SEMPROBE_PORT"); env && !port_given)
    port = std::atoi(env);
  g_service = std::make_unique<HttpService>(registry, a.cors_origin);
  const int bound = g_service->bind(a.host, port);
  std::cerr << "listening on http://" << a.host << ":" << bound << "\n";
  std::signal(SIGINT, [](int) { if (g_service) g_service->stop(); });
  std::signal(SIGTERM, [](int) { if (g_service) g_service->stop(); });
  g_service->listen();
  g_service.reset();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space training, evaluation and probing for word embeddings"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* cmd, bool embeddings_required) {
    auto* opt = cmd->add_option("--embeddings", common.embeddings, "Word vectors in .vec text format")
                    ->check(CLI::ExistingFile);
    if (embeddings_required) opt->required();
    cmd->add_option("--limit", common.limit, "Read only the first N words (0 = all)");
    cmd->add_flag("--json", common.json_out, "Machine-readable JSON output");
  };

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train an AE or beta-VAE on word vectors");
  add_common(train_cmd, true);
  train_cmd->add_option("--model", ta.model, "Model kind")->check(CLI::IsMember({"ae", "bvae"}));
  train_cmd->add_option("--beta", ta.beta, "KL weight (ignored for ae)")->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--latent-dim", ta.latent_dim, "Latent dimensionality")->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden", ta.hidden, "Hidden layer widths")->expected(1, -1);
  train_cmd->add_option("--epochs", ta.epochs, "Training epochs");
  train_cmd->add_option("--batch", ta.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", ta.seed, "Random seed");
  train_cmd->add_option("--lr", ta.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", ta.out, "Checkpoint output path");
  train_cmd->add_option("--trace", ta.trace, "Trace output path (default: <out>.trace.jsonl)");
  train_cmd->add_option("--semeval", ta.semeval, "Similarity pairs for telemetry")->check(CLI::ExistingFile);
  train_cmd->add_option("--analogy", ta.analogy, "Analogy questions for telemetry")->check(CLI::ExistingFile);
  train_cmd->add_option("--analogy-questions", ta.analogy_questions, "Telemetry analogy subsample size");
  train_cmd->add_option("--analogy-candidates", ta.analogy_candidates,
                        "Answer candidates: first N words (0 = all)");
  train_cmd->add_option("--config", ta.config, "JSON training config; explicit flags override it")
      ->check(CLI::ExistingFile);
  train_cmd->add_flag("--quiet", ta.quiet, "No per-epoch progress");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Score similarity and analogy on a checkpoint or raw vectors");
  add_common(eval_cmd, true);
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "Trained checkpoint");
  eval_cmd->add_flag("--raw", ea.raw, "Evaluate the embeddings themselves");
  eval_cmd->add_option("--semeval", ea.semeval, "Similarity pairs (TSV)")->check(CLI::ExistingFile);
  eval_cmd->add_option("--analogy", ea.analogy, "Analogy questions")->check(CLI::ExistingFile);
  eval_cmd->add_option("--dims", ea.dims, "Latent dims to use")->check(CLI::IsMember({"all", "useful"}));
  eval_cmd->add_option("--analogy-candidates", ea.analogy_candidates,
                       "Answer candidates: first N words (0 = all)");

  std::string dims_checkpoint;
  auto* dims_cmd = app.add_subcommand("dims", "Per-dimension statistics sorted by entropy");
  add_common(dims_cmd, true);
  dims_cmd->add_option("--checkpoint", dims_checkpoint, "Trained checkpoint")->required();

  ProbeArgs pa;
  auto* probe_cmd = app.add_subcommand("probe", "Perturbation probing for a word pair");
  add_common(probe_cmd, true);
  probe_cmd->add_option("--checkpoint", pa.checkpoint, "Trained checkpoint")->required();
  probe_cmd->add_option("--pair", pa.pair, "Word pair as word1,word2")->required();
  probe_cmd->add_option("--dim", pa.dim, "Single dimension (default: all useful dims)");
  probe_cmd->add_option("--samples", pa.samples, "Perturbation samples per word")->check(CLI::Range(2, 1000000));

  ServeArgs sa;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP/JSON API for the explorer");
  add_common(serve_cmd, true);
  serve_cmd->add_option("--host", sa.host, "Bind address");
  serve_cmd->add_option("--port", sa.port, "Port (SEMPROBE_PORT overrides the default)")
      ->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--checkpoint", sa.checkpoints, "Checkpoint to serve (repeatable)")
      ->required()
      ->take_all();
  serve_cmd->add_option("--trace", sa.traces, "Trace per checkpoint (default: <checkpoint>.trace.jsonl)")
      ->take_all();
  serve_cmd->add_option("--cors-origin", sa.cors_origin, "Access-Control-Allow-Origin value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) return run_train(common, ta, *train_cmd);
    if (*eval_cmd) return run_eval(common, ea);
    if (*dims_cmd) return run_dims(common, dims_checkpoint);
    if (*probe_cmd) return run_probe(common, pa);
    if (*serve_cmd) return run_serve(common, sa, serve_cmd->count("--port") > 0);
  } catch (const UnknownWordError& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
