#pragma once

// Variant sweeps over seeded datasets, result tables and PCA export.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "topotext/classifier_head.hpp"
#include "topotext/corpus_io.hpp"
#include "topotext/metrics.hpp"

namespace topotext {

struct DatasetSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

struct GeneratorSpec {
  std::string kind = "structure_shift";  // or "mean_shift"
  std::size_t classes = 6;
  std::size_t train_per_class = 200;
  std::size_t validation_per_class = 50;
  std::size_t test_per_class = 50;
  /// Per-class training counts (imbalanced corpora); overrides
  /// classes/train_per_class when non-empty.
  std::vector<std::size_t> train_counts;
  std::size_t dim = 768;
  std::size_t rows = 24;  // structure_shift only
  double noise_sd = 0.25;  // mean_shift only
  std::uint64_t seed = 42;
};

DatasetSplits generate_splits(const GeneratorSpec& spec);

/// Reads `<dir>/{train,validation,test}.emb1`; a missing file is an
/// InvalidPlan error.
DatasetSplits load_splits(const std::filesystem::path& dir);

/// Writes the three EMB1 files plus `manifest.json` keyed by split name.
void write_splits(const std::filesystem::path& dir, const DatasetSplits& splits);

struct ExperimentPlan {
  std::optional<std::filesystem::path> dataset_dir;
  std::optional<GeneratorSpec> generator;
  /// Attention features per split, required only for tda_attn variants.
  std::optional<std::filesystem::path> attention_dir;
  /// Input width and label count are taken from the training split.
  std::vector<HeadConfig> variants;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Empty: nothing is written.
  std::filesystem::path output_dir;
  Variant baseline = Variant::Plain;
};

struct RunResult {
  Variant variant = Variant::Plain;
  std::uint64_t seed = 0;
  MetricsReport test;
  MetricsReport validation;
  /// Macro-F1 gain over the baseline variant trained with the same seed.
  std::optional<double> gain_pct;
};

struct VariantSummary {
  Variant variant = Variant::Plain;
  std::size_t runs = 0;
  double mean_macro_f1 = 0.0;
  double std_macro_f1 = 0.0;
  double mean_weighted_f1 = 0.0;
  double std_weighted_f1 = 0.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  std::optional<double> gain_pct;
};

struct ExperimentResult {
  std::vector<RunResult> runs;  // variant-major, then seed order
  std::vector<VariantSummary> summaries;

  const VariantSummary& summary(Variant variant) const;
};

/// Learning rate used by the synthetic benchmarks.
inline constexpr double kBenchmarkLearningRate = 1e-3;

/// plain, tda and gaussian heads with default hyperparameters apart from the
/// learning rate.
std::vector<HeadConfig> benchmark_variants(double learning_rate = kBenchmarkLearningRate);

ExperimentResult run_plan(const ExperimentPlan& plan);

/// Same as run_plan on already-loaded splits (no files written).
ExperimentResult run_variants(const DatasetSplits& splits, const std::vector<HeadConfig>& variants,
                              const std::vector<std::uint64_t>& seeds, Variant baseline,
                              const DatasetSplits* attention = nullptr);

std::string results_csv(const ExperimentResult& result);
std::string results_markdown(const ExperimentResult& result);

struct PcaResult {
  std::vector<std::vector<double>> components;  // k unit vectors
  std::vector<double> variances;                // eigenvalues, descending
  std::vector<std::vector<double>> coords;      // n x k projections
  std::vector<std::string> labels;              // one per row
};

/// Top-k principal components by power iteration with deflation
/// (tolerance 1e-9, at most 1e4 iterations per component).
PcaResult pca(const std::vector<std::vector<double>>& rows, std::vector<std::string> labels,
              std::size_t k = 2);

/// Projects the raw embeddings, or embedding + TDA features when a tda
/// model configuration is given.
PcaResult pca_project(const Dataset& data, std::size_t k = 2, const HeadConfig* tda_config = nullptr);

/// `label,pc1,pc2,...`
std::string pca_to_csv(const PcaResult& result);

}  // namespace topotext
