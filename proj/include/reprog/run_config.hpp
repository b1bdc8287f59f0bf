#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "reprog/dataset.hpp"
#include "reprog/model.hpp"
#include "reprog/reprogram.hpp"

namespace reprog {

// Where a dataset comes from. Paths are stored absolute.
struct DatasetSpec {
  enum class Format { synthetic_source, synthetic_target, idx, ucr };

  Format format = Format::synthetic_target;
  std::size_t samples = 0;  // synthetic
  std::uint64_t seed = 0;   // synthetic
  std::filesystem::path images;  // idx
  std::filesystem::path labels;  // idx
  std::filesystem::path path;    // ucr

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

Dataset load_dataset(const DatasetSpec& spec);

struct EndpointSpec {
  std::vector<std::string> command;
  friend bool operator==(const EndpointSpec&, const EndpointSpec&) = default;
};

struct DiagnosticsSpec {
  std::size_t n_rep = 100;
  bool track_alignment = false;
  std::uint64_t seed = 0;
  friend bool operator==(const DiagnosticsSpec&, const DiagnosticsSpec&) = default;
};

// Fully resolved configuration of a `reprogram` run.
struct RunConfig {
  std::filesystem::path source_checkpoint;
  DatasetSpec target;
  DatasetSpec target_test;
  std::optional<DatasetSpec> source_heldout;
  std::optional<EndpointSpec> endpoint;
  ReprogramConfig reprogram;
  DiagnosticsSpec diagnostics;
  std::filesystem::path report_dir;
};

// Strict parse: unknown keys, wrong types and missing required keys raise
// ConfigError naming the JSON path. Relative paths resolve against `base`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base);
nlohmann::json to_json(const RunConfig& cfg);

struct SourceRunConfig {
  DatasetSpec dataset;
  std::vector<std::size_t> hidden = {32};
  SourceTrainConfig training;
  std::filesystem::path checkpoint;
};

SourceRunConfig parse_source_config(const nlohmann::json& j, const std::filesystem::path& base);
nlohmann::json to_json(const SourceRunConfig& cfg);

// Dense/relu stack ending in softmax, built from the hidden widths.
std::vector<LayerSpec> mlp_architecture(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                                        std::size_t classes);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace reprog
