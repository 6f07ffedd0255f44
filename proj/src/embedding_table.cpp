#include "semprobe/embedding_table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "semprobe/errors.hpp"

namespace semprobe {

namespace {

constexpr double kZeroNorm = 1e-12;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && !is_space(line[j])) ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& value) {
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_count(std::string_view s, std::size_t& value) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, Matrix vectors)
    : words_(std::move(words)), vectors_(std::move(vectors)) {
  if (words_.empty()) throw Error(ErrorCode::EmptyFile, "embedding table has no rows");
  if (vectors_.rows() != words_.size())
    throw Error(ErrorCode::DimensionMismatch, "word count does not match vector rows");
  if (vectors_.cols() == 0)
    throw Error(ErrorCode::DimensionMismatch, "embedding dimensionality must be >= 1");
  index_.reserve(words_.size());
  norms_.resize(words_.size());
  for (std::size_t r = 0; r < words_.size(); ++r) {
    const auto& w = words_[r];
    if (w.empty() || std::any_of(w.begin(), w.end(), [](char c) { return is_space(c) || c == '\n'; }))
      throw Error(ErrorCode::InvalidToken, "invalid token at row " + std::to_string(r));
    if (!index_.emplace(w, r).second)
      throw Error(ErrorCode::DuplicateToken, "duplicate token: " + w);
    norms_[r] = norm(vectors_.row(r));
  }
}

bool EmbeddingTable::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingTable::index_of(std::string_view token) const {
  auto r = find(token);
  if (!r) throw UnknownWordError(std::string(token));
  return *r;
}

std::vector<Neighbor> EmbeddingTable::nearest_neighbors(
    std::span<const double> query, std::size_t k,
    const std::unordered_set<std::string>& exclude) const {
  if (query.size() != dim())
    throw Error(ErrorCode::ShapeMismatch, "query length does not match table dimensionality");
  const double qn = norm(query);
  if (!(qn >= kZeroNorm)) throw Error(ErrorCode::ZeroQuery, "query vector has zero norm");

  std::vector<std::size_t> eligible;
  eligible.reserve(size());
  for (std::size_t r = 0; r < size(); ++r)
    if (exclude.empty() || !exclude.count(words_[r])) eligible.push_back(r);
  if (k == 0 || eligible.size() < k)
    throw Error(ErrorCode::KTooLarge, "requested " + std::to_string(k) +
                                          " neighbors but only " +
                                          std::to_string(eligible.size()) + " are eligible");

  std::vector<double> dist(size(), 0.0);
  for (std::size_t r : eligible) {
    const double rn = norms_[r];
    const double cos = rn < kZeroNorm ? 0.0 : dot(query, vectors_.row(r)) / (qn * rn);
    dist[r] = std::clamp(1.0 - cos, 0.0, 2.0);
  }
  auto closer = [&](std::size_t a, std::size_t b) {
    return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
  };
  std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k),
                    eligible.end(), closer);

  std::vector<Neighbor> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r = eligible[i];
    out.push_back({words_[r], r, dist[r], i + 1});
  }
  return out;
}

void EmbeddingTable::write_vec(std::ostream& out) const {
  out << size() << ' ' << dim() << '\n';
  std::ostringstream line;
  line << std::setprecision(6);
  for (std::size_t r = 0; r < size(); ++r) {
    line.str({});
    line << words_[r];
    for (double v : vectors_.row(r)) line << ' ' << v;
    line << '\n';
    out << line.str();
  }
}

EmbeddingTable parse_vectors(std::istream& in, std::optional<std::size_t> limit) {
  if (limit && *limit == 0) throw Error(ErrorCode::ConfigInvalid, "limit must be positive");
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!split_fields(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw Error(ErrorCode::EmptyFile, "vector file is empty");

  const auto header = split_fields(line);
  std::size_t declared_rows = 0, dim = 0;
  if (header.size() != 2 || !parse_count(header[0], declared_rows) ||
      !parse_count(header[1], dim) || declared_rows == 0 || dim == 0)
    throw Error(ErrorCode::MalformedHeader, "first line must be two positive integers 'V n'");

  const std::size_t rows = limit ? std::min(*limit, declared_rows) : declared_rows;
  std::vector<std::string> words;
  words.reserve(rows);
  Matrix vectors(rows, dim);
  std::size_t line_no = 1;
  while (words.size() < rows && std::getline(in, line)) {
    ++line_no;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (fields.size() != dim + 1)
      throw Error(ErrorCode::DimensionMismatch,
                  "line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                      " values, found " + std::to_string(fields.size() - 1));
    auto dst = vectors.row(words.size());
    for (std::size_t i = 0; i < dim; ++i) {
      if (!parse_double(fields[i + 1], dst[i]) || !std::isfinite(dst[i]))
        throw Error(ErrorCode::DimensionMismatch,
                    "line " + std::to_string(line_no) + ": bad number '" +
                        std::string(fields[i + 1]) + "'");
    }
    words.emplace_back(fields[0]);
  }
  if (words.size() < rows)
    throw Error(ErrorCode::MalformedHeader,
                "header declares " + std::to_string(declared_rows) + " rows but file has " +
                    std::to_string(words.size()));
  return EmbeddingTable(std::move(words), std::move(vectors));
}

EmbeddingTable load_vectors(const std::filesystem::path& path, std::optional<std::size_t> limit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open vector file: " + path.string());
  return parse_vectors(in, limit);
}

}  // namespace semprobe
