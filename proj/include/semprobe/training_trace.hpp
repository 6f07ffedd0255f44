#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace semprobe {

/// One epoch of training telemetry. Optional metrics are recorded as JSON
/// null when they could not be computed.
struct TraceRecord {
  std::size_t epoch = 0;
  double recon_loss = 0.0;  // per-sample mean
  double kl_loss = 0.0;     // per-sample mean; 0 for AE
  std::optional<std::size_t> useful_dims;
  std::optional<double> semeval;
  std::optional<double> analogy;
};

struct TrainingTrace {
  std::vector<TraceRecord> records;

  bool empty() const { return records.empty(); }
  /// Throws ConfigInvalid unless epochs are strictly increasing.
  void append(TraceRecord record);

  /// JSON lines: {epoch, recon_loss, kl_loss, useful_dims, semeval, analogy}.
  std::string to_jsonl() const;
  static TrainingTrace from_jsonl(std::istream& in);

  void save(const std::filesystem::path& path) const;
  static TrainingTrace load(const std::filesystem::path& path);
};

std::string trace_record_json(const TraceRecord& record);

}  // namespace semprobe
