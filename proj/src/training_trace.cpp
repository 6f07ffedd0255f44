#include "semprobe/training_trace.hpp"

#include <fstream>
#include <istream>

#include "json.hpp"
#include "semprobe/errors.hpp"

namespace semprobe {

namespace {

template <typename T>
nlohmann::ordered_json nullable(const std::optional<T>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

void TrainingTrace::append(TraceRecord record) {
  if (!records.empty() && record.epoch <= records.back().epoch)
    throw Error(ErrorCode::ConfigInvalid, "trace epochs must be strictly increasing");
  records.push_back(std::move(record));
}

std::string trace_record_json(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["recon_loss"] = r.recon_loss;
  j["kl_loss"] = r.kl_loss;
  j["useful_dims"] = nullable(r.useful_dims);
  j["semeval"] = nullable(r.semeval);
  j["analogy"] = nullable(r.analogy);
  return j.dump();
}

std::string TrainingTrace::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    out += trace_record_json(r);
    out += '\n';
  }
  return out;
}

TrainingTrace TrainingTrace::from_jsonl(std::istream& in) {
  TrainingTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceRecord r;
      r.epoch = j.at("epoch").get<std::size_t>();
      r.recon_loss = j.at("recon_loss").get<double>();
      r.kl_loss = j.value("kl_loss", 0.0);
      r.useful_dims = optional_field<std::size_t>(j, "useful_dims");
      r.semeval = optional_field<double>(j, "semeval");
      r.analogy = optional_field<double>(j, "analogy");
      trace.append(r);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Io, "trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

void TrainingTrace::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write trace: " + path.string());
  out << to_jsonl();
}

TrainingTrace TrainingTrace::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open trace: " + path.string());
  return from_jsonl(in);
}

}  // namespace semprobe
