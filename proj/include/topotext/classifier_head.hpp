#pragma once

// Linear-softmax attribution head: dropout, optional Gaussian noise, optional
// TDA feature concatenation, linear layer, softmax, cross-entropy training.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "topotext/corpus_io.hpp"
#include "topotext/metrics.hpp"
#include "topotext/rng.hpp"
#include "topotext/tda_features.hpp"

namespace topotext {

enum class Variant : std::uint8_t { Plain = 0, Tda = 1, Gaussian = 2, TdaAttn = 3 };

std::string to_string(Variant variant);
Variant parse_variant(const std::string& name);

enum class Mode { Train, Eval };

struct HeadConfig {
  Variant variant = Variant::Plain;
  std::size_t input_dim = 768;
  std::size_t num_labels = 2;
  double dropout_p = 0.3;
  double gaussian_sigma = 0.1;
  ReshapeSpec reshape{24, 32, false};
  /// Width of the attention-mode side features is 3 * expected_pairs.
  std::size_t expected_pairs = 0;
  double learning_rate = 2e-5;
  std::size_t batch_size = 16;
  std::size_t epochs = 5;
  std::uint64_t seed = 42;
  /// Compute TDA features once from the raw embedding instead of from every
  /// dropped-out copy during training.
  bool tda_from_raw = false;

  std::size_t extra_width() const;
  /// Width F of the vector entering the linear layer.
  std::size_t feature_width() const { return input_dim + extra_width(); }
  void validate() const;
};

nlohmann::json config_to_json(const HeadConfig& cfg);
HeadConfig config_from_json(const nlohmann::json& j);

struct HeadModel {
  Variant variant = Variant::Plain;
  std::size_t input_dim = 0;
  std::size_t num_labels = 0;
  std::size_t feature_width = 0;
  std::vector<double> weights;  // num_labels x feature_width, row-major
  std::vector<double> bias;     // num_labels

  double& weight(std::size_t label, std::size_t feature) {
    return weights[label * feature_width + feature];
  }
  double weight(std::size_t label, std::size_t feature) const {
    return weights[label * feature_width + feature];
  }
  void check_against(const HeadConfig& cfg) const;
  friend bool operator==(const HeadModel&, const HeadModel&) = default;
};

struct Prediction {
  std::vector<double> probs;
  std::size_t label = 0;
};

/// Weights uniform in +-1/sqrt(F), bias zero, drawn from the config seed.
HeadModel init_model(const HeadConfig& cfg);

/// Numerically stable softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);

/// Pre-linear feature vector. In train mode `rng` drives the dropout mask
/// and Gaussian noise and must not be null. `side` carries the attention
/// features for the tda_attn variant; `cached_tda` (when non-empty) replaces
/// the TDA features of the tda variant.
std::vector<double> build_features(const HeadConfig& cfg, std::span<const double> embedding,
                                   Mode mode, Rng* rng, std::span<const double> side = {},
                                   std::span<const double> cached_tda = {});

std::vector<double> logits(const HeadModel& model, std::span<const double> features);

Prediction forward(const HeadModel& model, const HeadConfig& cfg,
                   std::span<const double> embedding, Mode mode, Rng* rng,
                   std::span<const double> side = {});

struct Gradient {
  double loss = 0.0;
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Mean cross-entropy over the batch and its gradient w.r.t. W and b.
Gradient loss_and_gradient(const HeadModel& model,
                           std::span<const std::vector<double>> features,
                           std::span<const std::uint32_t> labels);

double cross_entropy(std::span<const double> probs, std::size_t label);

/// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) on mean cross-entropy.
/// Deterministic given cfg.seed. `side` must be given for tda_attn and hold
/// one record per training record.
HeadModel train(const Dataset& data, const HeadConfig& cfg, const Dataset* side = nullptr);

std::vector<Prediction> predict(const HeadModel& model, const HeadConfig& cfg,
                                const Dataset& data, const Dataset* side = nullptr);

MetricsReport evaluate(const HeadModel& model, const HeadConfig& cfg, const Dataset& data,
                       const Dataset* side = nullptr);

/// THD1 layout (little-endian): "THD1" | u32 version=1 | u8 variant
/// | u32 D | u32 L | u32 F | L*F f64 weights (row-major) | L f64 bias.
std::vector<std::uint8_t> encode_model(const HeadModel& model);
HeadModel decode_model(const std::vector<std::uint8_t>& bytes);

/// Writes the THD1 file and `<path>.json` holding the full HeadConfig.
void save_model(const std::filesystem::path& path, const HeadModel& model, const HeadConfig& cfg);

struct LoadedModel {
  HeadModel model;
  HeadConfig config;
};
LoadedModel load_model(const std::filesystem::path& path);

std::filesystem::path config_sidecar(const std::filesystem::path& model_path);

}  // namespace topotext
