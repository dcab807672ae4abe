#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "levybench/forward.hpp"
#include "levybench/processes.hpp"

namespace levybench {

enum class Split : std::uint8_t { Repository = 1, Validation = 2, Test = 3 };

// Stream-id domains. The low byte of the domain tag carries the split.
enum class StreamPurpose : std::uint8_t { Signal = 1, Noise = 2, Chain = 3, Operator = 4 };

std::uint64_t example_stream_id(StreamPurpose purpose, Split split, std::size_t index);

struct Example {
  Vector signal;
  Vector measurements;
};

struct DatasetSizes {
  std::size_t repository = 0;
  std::size_t validation = 1000;
  std::size_t test = 1000;
};

struct DatasetTriple {
  std::uint64_t master_seed = 0;
  IdDistribution distribution = LaplaceIncrements{1.0};
  ProblemInstance instance;
  std::optional<double> target_snr_db;
  std::vector<Example> repository;
  std::vector<Example> validation;
  std::vector<Example> test;

  const std::vector<Example>& split(Split s) const;
  // Hash of the serialized header: identifies the generating configuration.
  std::string fingerprint() const;
};

// Generates all three splits, each example on its own (signal, noise) stream
// pair derived from the master seed, split and index. When a target SNR is
// given, the noise variance is calibrated on the validation and test signals
// (the repository when both are empty) before any noise is drawn, so the
// repository prefix does not depend on its requested size.
DatasetTriple generate_dataset(std::uint64_t master_seed, const IdDistribution& dist, ProblemInstance inst,
                               const DatasetSizes& sizes, std::optional<double> target_snr_db);

// Average measurement SNR realized over the given splits.
double realized_snr_db(const DatasetTriple& ds, const std::vector<Split>& splits);

nlohmann::json distribution_to_json(const IdDistribution& dist);
IdDistribution distribution_from_json(const nlohmann::json& j);

nlohmann::json dataset_header(const DatasetTriple& ds);

std::string serialize_dataset(const DatasetTriple& ds);
DatasetTriple deserialize_dataset(const std::string& bytes);

void export_dataset(const DatasetTriple& ds, const std::filesystem::path& path);
DatasetTriple import_dataset(const std::filesystem::path& path);

// One line per example: split,index,s_1..s_K,y_1..y_M (after a header row).
void export_dataset_csv(const DatasetTriple& ds, const std::filesystem::path& path);

}  // namespace levybench
