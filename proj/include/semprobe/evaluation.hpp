#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "semprobe/embedding_table.hpp"
#include "semprobe/latent_model.hpp"

namespace semprobe {

struct SimilarityPair {
  std::string word_a;
  std::string word_b;
  double gold = 0.0;
};
using SimilarityPairset = std::vector<SimilarityPair>;

struct AnalogyQuestion {
  std::string a, b, c, d;
};

struct AnalogySection {
  std::string name;
  std::vector<AnalogyQuestion> questions;
};

struct AnalogySet {
  std::vector<AnalogySection> sections;

  std::size_t size() const;
  /// Keeps at most `max_questions`, taking an even stride through every
  /// section so that all sections stay represented.
  AnalogySet subsample(std::size_t max_questions) const;
};

/// TSV "word1<TAB>word2<TAB>score"; blank lines and lines starting with '#'
/// are ignored.
SimilarityPairset parse_similarity_pairs(std::istream& in);
SimilarityPairset load_similarity_pairs(const std::filesystem::path& path);

/// Google analogy format: ": section" headers followed by four-token
/// question lines. Tokens are lowercased.
AnalogySet parse_analogies(std::istream& in);
AnalogySet load_analogies(const std::filesystem::path& path);

struct SimilarityResult {
  double rho = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

/// Spearman correlation between gold scores and cosine similarity. Pairs
/// with an out-of-vocabulary word are skipped and counted. Throws
/// InsufficientPairs if fewer than two pairs are usable.
SimilarityResult semantic_similarity_score(const EmbeddingTable& vectors,
                                           const SimilarityPairset& pairs);

struct SectionScore {
  std::string name;
  std::size_t correct = 0;
  std::size_t answered = 0;
  std::size_t skipped = 0;
  std::optional<double> accuracy;
};

struct AnalogyResult {
  std::optional<double> accuracy;  // empty when every question was skipped
  std::size_t correct = 0;
  std::size_t answered = 0;
  std::size_t skipped = 0;
  std::vector<SectionScore> per_section;
};

/// 3CosAdd over length-normalised vectors: argmax cos(v, b - a + c) with a,
/// b and c excluded. `candidate_limit` restricts candidates to the first rows.
AnalogyResult analogy_accuracy(const EmbeddingTable& vectors, const AnalogySet& questions,
                               std::optional<std::size_t> candidate_limit = std::nullopt);

enum class DimSelection { All, UsefulOnly };

/// Table of latent means restricted to `dims`, in vocabulary order.
EmbeddingTable latent_view(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                           std::span<const std::size_t> dims);

struct LatentEvaluation {
  std::vector<std::size_t> dims;
  std::size_t useful_dims = 0;
  std::optional<SimilarityResult> similarity;
  std::optional<AnalogyResult> analogy;
  std::optional<std::string> similarity_error;
};

/// Scores the latent means on the selected dimensions. UsefulOnly uses the
/// entropy-gap classification; throws NoUsefulDims if it is empty.
LatentEvaluation evaluate_latent(const ModelCheckpoint& ckpt, const EmbeddingTable& table,
                                 const SimilarityPairset* pairs, const AnalogySet* questions,
                                 DimSelection selection,
                                 std::optional<std::size_t> candidate_limit = std::nullopt);

/// {rho, analogy, used, skipped, per_section}
nlohmann::json metrics_json(const std::optional<SimilarityResult>& similarity,
                            const std::optional<AnalogyResult>& analogy);

}  // namespace semprobe
