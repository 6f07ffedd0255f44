#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "semprobe/linalg.hpp"

namespace semprobe {

struct Neighbor {
  std::string token;
  std::size_t row = 0;
  double distance = 0.0;  // 1 - cosine similarity
  std::size_t rank = 0;   // 1-based
};

/// Vocabulary plus a V x n matrix of word vectors. Immutable once built, so
/// lookups and neighbor queries are safe from any number of threads.
class EmbeddingTable {
 public:
  /// Throws Error{DuplicateToken, InvalidToken, DimensionMismatch, EmptyFile}.
  EmbeddingTable(std::vector<std::string> words, Matrix vectors);

  std::size_t size() const noexcept { return words_.size(); }
  std::size_t dim() const noexcept { return vectors_.cols(); }

  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::string& word(std::size_t row) const { return words_.at(row); }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::span<const double> row(std::size_t r) const { return vectors_.row(r); }
  double row_norm(std::size_t r) const { return norms_.at(r); }

  bool contains(std::string_view token) const;
  std::optional<std::size_t> find(std::string_view token) const;
  /// Throws UnknownWordError for out-of-vocabulary tokens.
  std::size_t index_of(std::string_view token) const;
  std::span<const double> vector_of(std::string_view token) const {
    return row(index_of(token));
  }

  /// Exact cosine kNN by full scan. Ties go to the lower row index.
  std::vector<Neighbor> nearest_neighbors(
      std::span<const double> query, std::size_t k,
      const std::unordered_set<std::string>& exclude = {}) const;

  /// Writes the table in ".vec" text format with 6 significant digits.
  void write_vec(std::ostream& out) const;

 private:
  std::vector<std::string> words_;
  Matrix vectors_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parses the ".vec" text format: a header "V n" followed by lines
/// "token v1 ... vn". `limit` keeps the first rows in file order.
EmbeddingTable load_vectors(const std::filesystem::path& path,
                            std::optional<std::size_t> limit = std::nullopt);
EmbeddingTable parse_vectors(std::istream& in,
                             std::optional<std::size_t> limit = std::nullopt);

}  // namespace semprobe
