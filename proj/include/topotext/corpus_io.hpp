#pragma once

// Embedding datasets: EMB1 binary files, CSV, JSON manifests, synthetic
// multi-author corpora and label regrouping.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace topotext {

enum class Split { Unspecified, Train, Validation, Test };

std::string to_string(Split split);
Split parse_split(const std::string& name);

struct EmbeddingRecord {
  std::uint32_t label = 0;
  std::string label_name;
  std::vector<double> vector;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

struct DatasetManifest {
  std::size_t n_samples = 0;
  std::size_t dim = 0;
  std::vector<std::string> label_names;
  Split split = Split::Unspecified;
  /// Generator name, seed and parameters for synthetic data; null otherwise.
  nlohmann::json generator;

  void validate() const;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<EmbeddingRecord> records;

  std::size_t num_labels() const { return manifest.label_names.size(); }
  std::vector<std::size_t> class_counts() const;
  /// Throws unless every record matches the manifest.
  void validate() const;
};

/// EMB1 layout (all integers little-endian):
///   "EMB1" | u32 version=1 | u32 n_samples | u32 D | u32 n_labels
///   | n_labels x (u16 byte length, UTF-8 name)
///   | n_samples x (u32 label, D x f32)
/// Vectors are rounded to f32 on write.
void write_emb1(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_emb1(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_emb1(const Dataset& dataset);
Dataset decode_emb1(const std::vector<std::uint8_t>& bytes);

/// CSV with header `label,f0,...,f{D-1}`; label names are mapped to indices
/// in first-appearance order.
Dataset read_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text);
std::string to_csv(const Dataset& dataset);

/// Strict decimal parse of one CSV field; throws ParseError.
double parse_real(std::string_view text);

/// Reads EMB1 or CSV, chosen by extension (`.csv` means CSV).
Dataset read_dataset(const std::filesystem::path& path);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

struct MeanShiftParams {
  std::vector<std::size_t> per_class;  // one count per class, class 0 = "human"
  std::size_t dim = 768;
  double shift_norm = 1.0;
  double noise_sd = 0.25;
  std::uint64_t seed = 42;
  Split split = Split::Train;
};

/// Class k ~ N(mu_k, noise_sd^2 I) with mutually orthogonal mu_k of norm
/// shift_norm. The class means depend only on the seed, so every split of
/// the same seed shares them.
Dataset generate_mean_shift(const MeanShiftParams& params);

struct StructureShiftParams {
  std::vector<std::size_t> per_class;
  std::size_t dim = 768;
  std::size_t rows = 24;
  double cluster_spread = 0.05;
  double center_spread = 1.0;
  std::uint64_t seed = 42;
  Split split = Split::Train;
};

/// Class k folds into `rows` points drawn from k + 1 Gaussian clusters in
/// R^(dim/rows). Each sample is centred and emitted together with its
/// negation, so all classes share a zero mean and differ only in the
/// geometry of the reshaped rows.
Dataset generate_structure_shift(const StructureShiftParams& params);

/// Relabels every record through `mapping` (fine name -> coarse name).
/// Coarse labels are indexed in the order they are first reached walking
/// the fine labels in manifest order.
Dataset regroup_labels(const Dataset& dataset, const std::map<std::string, std::string>& mapping);

/// Keeps only records whose label name is in `keep`, reindexing the
/// surviving labels in manifest order.
Dataset filter_labels(const Dataset& dataset, const std::set<std::string>& keep);

}  // namespace topotext
