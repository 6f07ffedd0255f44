#include "semprobe/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>

#include "semprobe/dimension_analysis.hpp"
#include "semprobe/errors.hpp"
#include "semprobe/stats.hpp"

namespace semprobe {

namespace {

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::optional<std::size_t> lookup(const EmbeddingTable& t, const std::string& word) {
  if (auto r = t.find(word)) return r;
  return t.find(lowercase(word));
}

}  // namespace

std::size_t AnalogySet::size() const {
  std::size_t n = 0;
  for (const auto& s : sections) n += s.questions.size();
  return n;
}

AnalogySet AnalogySet::subsample(std::size_t max_questions) const {
  const std::size_t total = size();
  if (total <= max_questions) return *this;
  AnalogySet out;
  const double stride = static_cast<double>(total) / static_cast<double>(max_questions);
  std::size_t global = 0;
  std::size_t taken = 0;
  for (const auto& section : sections) {
    AnalogySection kept{section.name, {}};
    for (const auto& q : section.questions) {
      const auto wanted = static_cast<std::size_t>(std::floor(static_cast<double>(taken) * stride));
      if (taken < max_questions && global == wanted) {
        kept.questions.push_back(q);
        ++taken;
      }
      ++global;
    }
    if (!kept.questions.empty()) out.sections.push_back(std::move(kept));
  }
  return out;
}

SimilarityPairset parse_similarity_pairs(std::istream& in) {
  SimilarityPairset pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(t);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(trim(field));
    double score = 0.0;
    try {
      if (fields.size() != 3) throw std::invalid_argument("field count");
      std::size_t used = 0;
      score = std::stod(fields[2], &used);
      if (used != fields[2].size() || !std::isfinite(score)) throw std::invalid_argument("score");
    } catch (const std::exception&) {
      throw Error(ErrorCode::BadRequest, "similarity line " + std::to_string(line_no) +
                                             ": expected 'word1<TAB>word2<TAB>score'");
    }
    pairs.push_back({fields[0], fields[1], score});
  }
  return pairs;
}

SimilarityPairset load_similarity_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open similarity file: " + path.string());
  return parse_similarity_pairs(in);
}

AnalogySet parse_analogies(std::istream& in) {
  AnalogySet set;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == ':') {
      set.sections.push_back({trim(t.substr(1)), {}});
      continue;
    }
    std::stringstream ss(t);
    std::vector<std::string> tok;
    std::string w;
    while (ss >> w) tok.push_back(lowercase(w));
    if (tok.size() != 4)
      throw Error(ErrorCode::BadRequest,
                  "analogy line " + std::to_string(line_no) + ": expected four tokens");
    if (set.sections.empty()) set.sections.push_back({"default", {}});
    set.sections.back().questions.push_back({tok[0], tok[1], tok[2], tok[3]});
  }
  return set;
}

AnalogySet load_analogies(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open analogy file: " + path.string());
  return parse_analogies(in);
}

SimilarityResult semantic_similarity_score(const EmbeddingTable& vectors,
                                           const SimilarityPairset& pairs) {
  SimilarityResult result;
  std::vector<double> gold, model;
  for (const auto& p : pairs) {
    const auto a = lookup(vectors, p.word_a);
    const auto b = lookup(vectors, p.word_b);
    if (!a || !b) {
      ++result.skipped;
      continue;
    }
    const double na = vectors.row_norm(*a), nb = vectors.row_norm(*b);
    const double cos = (na > 0.0 && nb > 0.0) ? dot(vectors.row(*a), vectors.row(*b)) / (na * nb) : 0.0;
    gold.push_back(p.gold);
    model.push_back(cos);
  }
  result.used = gold.size();
  if (result.used < 2)
    throw Error(ErrorCode::InsufficientPairs,
                "only " + std::to_string(result.used) + " similarity pairs are in vocabulary");
  result.rho = spearman_rho(gold, model);
  return result;
}

AnalogyResult analogy_accuracy(const EmbeddingTable& vectors, const AnalogySet& questions,
                               std::optional<std::size_t> candidate_limit) {
  const std::size_t pool = std::min(vectors.size(), candidate_limit.value_or(vectors.size()));
  const std::size_t n = vectors.dim();

  // Unit-normalised candidate rows, stored transposed for the batched scoring.
  Matrix unit_t(n, pool);
  for (std::size_t r = 0; r < pool; ++r) {
    const double nr = vectors.row_norm(r);
    for (std::size_t i = 0; i < n; ++i) unit_t(i, r) = nr > 0.0 ? vectors.row(r)[i] / nr : 0.0;
  }
  auto unit = [&](std::size_t row, Vector& out) {
    const double nr = vectors.row_norm(row);
    for (std::size_t i = 0; i < n; ++i) out[i] += nr > 0.0 ? vectors.row(row)[i] / nr : 0.0;
  };

  struct Pending {
    std::size_t section;
    std::size_t a, b, c, d;
  };

  AnalogyResult result;
  result.per_section.resize(questions.sections.size());
  std::vector<Pending> pending;
  for (std::size_t s = 0; s < questions.sections.size(); ++s) {
    result.per_section[s].name = questions.sections[s].name;
    for (const auto& q : questions.sections[s].questions) {
      const auto a = vectors.find(lowercase(q.a)), b = vectors.find(lowercase(q.b));
      const auto c = vectors.find(lowercase(q.c)), d = vectors.find(lowercase(q.d));
      if (!a || !b || !c || !d) {
        ++result.per_section[s].skipped;
        ++result.skipped;
        continue;
      }
      pending.push_back({s, *a, *b, *c, *d});
    }
  }

  constexpr std::size_t kChunk = 256;
  const Vector zero_bias(pool, 0.0);
  Matrix targets, scores;
  for (std::size_t start = 0; start < pending.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, pending.size() - start);
    targets = Matrix(count, n);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& p = pending[start + i];
      Vector t(n, 0.0), neg_a(n, 0.0);
      unit(p.b, t);
      unit(p.c, t);
      unit(p.a, neg_a);
      for (std::size_t k = 0; k < n; ++k) targets(i, k) = t[k] - neg_a[k];
    }
    affine_rows(targets, unit_t, zero_bias, scores);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& p = pending[start + i];
      const auto row = scores.row(i);
      std::size_t best = pool;
      double best_score = -std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < pool; ++r) {
        if (r == p.a || r == p.b || r == p.c) continue;
        if (row[r] > best_score) {
          best_score = row[r];
          best = r;
        }
      }
      auto& sec = result.per_section[p.section];
      ++sec.answered;
      ++result.answered;
      if (best == p.d) {
        ++sec.correct;
        ++result.correct;
      }
    }
  }
  for (auto& sec : result.per_section)
    if (sec.answered) sec.accuracy = static_cast<double>(sec.correct) / static_cast<double>(sec.answered);
  if (result.answered)
    result.accuracy = static_cast<double>(result.correct) / static_cast<double>(result.answered);
  return result;
}

EmbeddingTable latent_view(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                           std::span<const std::size_t> dims) {
  if (dims.empty()) throw Error(ErrorCode::NoUsefulDims, "latent view needs at least one dimension");
  const CodeBatch codes = encode_batch(ckpt, table.vectors());
  Matrix restricted(table.size(), dims.size());
  for (std::size_t w = 0; w < table.size(); ++w)
    for (std::size_t j = 0; j < dims.size(); ++j) {
      if (dims[j] >= ckpt.latent_dim())
        throw Error(ErrorCode::DimensionOutOfRange, "dimension " + std::to_string(dims[j]) + " out of range");
      restricted(w, j) = codes.mean(w, dims[j]);
    }
  return EmbeddingTable(table.words(), std::move(restricted));
}

LatentEvaluation evaluate_latent(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                                 const SimilarityPairset* pairs, const AnalogySet* questions,
                                 DimSelection selection,
                                 std::optional<std::size_t> candidate_limit) {
  ckpt.validate();
  const auto profiles = dimension_profiles(ckpt, table);
  LatentEvaluation out;
  const auto useful = useful_dimensions(profiles);
  out.useful_dims = useful.size();
  if (selection == DimSelection::UsefulOnly) {
    if (useful.empty()) throw Error(ErrorCode::NoUsefulDims, "no useful latent dimensions");
    out.dims = useful;
  } else {
    out.dims.resize(ckpt.latent_dim());
    std::iota(out.dims.begin(), out.dims.end(), 0);
  }
  const EmbeddingTable view = latent_view(ckpt, table, out.dims);
  if (pairs) {
    try {
      out.similarity = semantic_similarity_score(view, *pairs);
    } catch (const Error& e) {
      out.similarity_error = e.what();
    }
  }
  if (questions) out.analogy = analogy_accuracy(view, *questions, candidate_limit);
  return out;
}

nlohmann::json metrics_json(const std::optional<SimilarityResult>& similarity,
                            const std::optional<AnalogyResult>& analogy) {
  nlohmann::json j;
  j["rho"] = similarity ? nlohmann::json(similarity->rho) : nlohmann::json(nullptr);
  j["analogy"] = analogy && analogy->accuracy ? nlohmann::json(*analogy->accuracy) : nlohmann::json(nullptr);
  j["used"] = {{"similarity", similarity ? similarity->used : 0},
               {"analogy", analogy ? analogy->answered : 0}};
  j["skipped"] = {{"similarity", similarity ? similarity->skipped : 0},
                  {"analogy", analogy ? analogy->skipped : 0}};
  nlohmann::json sections = nlohmann::json::array();
  if (analogy) {
    for (const auto& s : analogy->per_section)
      sections.push_back({{"name", s.name},
                          {"accuracy", s.accuracy ? nlohmann::json(*s.accuracy) : nlohmann::json(nullptr)},
                          {"correct", s.correct},
                          {"answered", s.answered},
                          {"skipped", s.skipped}});
  }
  j["per_section"] = sections;
  return j;
}

}  // namespace semprobe
