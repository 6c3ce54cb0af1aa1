#pragma once

// Embedding -> point cloud -> H0 diagram -> fixed-length feature vector.

#include <cstddef>
#include <span>
#include <vector>

#include "topotext/persistence.hpp"

namespace topotext {

/// Row/column shape used to fold a 1 x D embedding into r points in R^c.
struct ReshapeSpec {
  std::size_t rows = 0;
  std::size_t cols = 0;
  /// Skip the rows <= cols guard.
  bool allow_unstable = false;

  std::size_t width() const { return rows * cols; }
  /// 3 * (rows - 1): one (birth, death, persistence) triple per finite H0 pair.
  std::size_t feature_width() const { return rows < 1 ? 0 : 3 * (rows - 1); }
  void validate(std::size_t embedding_width) const;
};

/// Closest-to-square factorisation r x c of D with r <= c and r >= 2.
ReshapeSpec default_reshape(std::size_t width);

PointCloud reshape_embedding(std::span<const double> embedding, const ReshapeSpec& spec);

/// Flattened (birth, death, death - birth) triples of the finite H0 pairs,
/// ordered by death ascending. Length is always spec.feature_width().
std::vector<double> extract_tda_features(std::span<const double> embedding,
                                         const ReshapeSpec& spec);

/// Attention-matrix mode: the rows x cols matrix is used directly as a point
/// cloud. The triple list is zero-padded or truncated (dropping the
/// largest-death triples) to exactly 3 * expected_pairs values.
std::vector<double> extract_tda_features_attn(std::span<const double> matrix, std::size_t rows,
                                              std::size_t cols, std::size_t expected_pairs);

/// Pool-mode extraction over many embeddings; runs in parallel, output order
/// follows input order.
std::vector<std::vector<double>> extract_batch(std::span<const std::vector<double>> embeddings,
                                               const ReshapeSpec& spec);

std::vector<std::vector<double>> extract_batch_attn(
    std::span<const std::vector<double>> matrices, std::size_t rows, std::size_t cols,
    std::size_t expected_pairs);

}  // namespace topotext
