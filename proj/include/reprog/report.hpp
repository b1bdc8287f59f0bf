#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "reprog/diagnostics.hpp"
#include "reprog/input_transform.hpp"
#include "reprog/output_map.hpp"
#include "reprog/reprogram.hpp"
#include "reprog/run_config.hpp"

namespace reprog {

// Files making up a run report directory.
namespace report_files {
inline constexpr const char* config = "config.json";
inline constexpr const char* transform = "transform.json";
inline constexpr const char* output_map = "output_map.json";
inline constexpr const char* trace = "trace.jsonl";
inline constexpr const char* timing = "timing.jsonl";
inline constexpr const char* summary = "summary.json";
inline constexpr const char* theorem1 = "theorem1.json";
}  // namespace report_files

nlohmann::json transform_json(const InputTransform& t);
InputTransform transform_from_json(const nlohmann::json& j);

nlohmann::json output_map_json(const OutputMap& out);
OutputMap output_map_from_json(const nlohmann::json& j);

nlohmann::json epoch_json(const EpochRecord& r);

// One line per record, baseline first. Wall-clock time is kept out so the
// trace of a seeded run is reproducible byte for byte.
std::string trace_jsonl(const TrainTrace& trace);

struct RunSummary {
  std::string source_digest_before;
  std::string source_digest_after;
  std::size_t trainable_parameters = 0;
  double final_test_accuracy = 0.0;
  std::size_t queries = 0;   // samples sent to the source model
  std::size_t requests = 0;  // batched calls made to it
  std::optional<std::size_t> endpoint_samples;
  std::optional<std::size_t> endpoint_requests;
};

void write_report(const std::filesystem::path& dir, const RunConfig& cfg, const ReprogramResult& result,
                  const RunSummary& summary);

nlohmann::json theorem1_json(const Theorem1Report& r);
void write_theorem1(const std::filesystem::path& dir, const Theorem1Report& r);

struct LoadedReport {
  RunConfig config;
  InputTransform transform;
  OutputMap output;
};

LoadedReport load_report(const std::filesystem::path& dir);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace reprog
