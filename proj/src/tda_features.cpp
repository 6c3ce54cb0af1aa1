#include "topotext/tda_features.hpp"

#include <cmath>
#include <string>

#include "topotext/error.hpp"
#include "topotext/parallel.hpp"

namespace topotext {

void ReshapeSpec::validate(std::size_t embedding_width) const {
  if (rows < 2 || cols < 1) {
    throw Error(ErrorKind::ShapeMismatch, "reshape needs rows >= 2 and cols >= 1");
  }
  if (rows * cols != embedding_width) {
    throw Error(ErrorKind::ShapeMismatch,
                std::to_string(rows) + "x" + std::to_string(cols) + " does not match width " +
                    std::to_string(embedding_width));
  }
  if (rows > cols && !allow_unstable) {
    throw Error(ErrorKind::UnstableShape, std::to_string(rows) + "x" + std::to_string(cols) +
                                              " has more rows than columns");
  }
}

ReshapeSpec default_reshape(std::size_t width) {
  if (width < 4) throw Error(ErrorKind::NoValidShape, "width must be at least 4");
  std::size_t rows = static_cast<std::size_t>(std::sqrt(static_cast<double>(width)));
  while (rows * rows > width) --rows;
  while ((rows + 1) * (rows + 1) <= width) ++rows;
  for (; rows >= 2; --rows) {
    if (width % rows == 0) return {rows, width / rows, false};
  }
  throw Error(ErrorKind::NoValidShape, std::to_string(width) + " is prime");
}

PointCloud reshape_embedding(std::span<const double> embedding, const ReshapeSpec& spec) {
  spec.validate(embedding.size());
  return PointCloud(spec.rows, spec.cols, std::vector<double>(embedding.begin(), embedding.end()));
}

namespace {

void append_triples(const std::vector<PersistencePair>& pairs, std::size_t count,
                    std::vector<double>& out) {
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = pairs[i];
    out.push_back(p.birth);
    out.push_back(p.death);
    out.push_back(p.death - p.birth);
  }
}

}  // namespace

std::vector<double> extract_tda_features(std::span<const double> embedding,
                                         const ReshapeSpec& spec) {
  const auto cloud = reshape_embedding(embedding, spec);
  const auto pairs = persistence_h0(pairwise_distances(cloud));
  std::vector<double> out;
  out.reserve(spec.feature_width());
  append_triples(pairs, pairs.size(), out);
  return out;
}

std::vector<double> extract_tda_features_attn(std::span<const double> matrix, std::size_t rows,
                                              std::size_t cols, std::size_t expected_pairs) {
  if (rows < 2) throw Error(ErrorKind::InvalidInput, "attention matrix needs at least 2 rows");
  if (expected_pairs < 1) throw Error(ErrorKind::InvalidInput, "expected_pairs must be >= 1");
  if (rows * cols != matrix.size()) {
    throw Error(ErrorKind::ShapeMismatch, "attention matrix size does not match rows x cols");
  }
  const PointCloud cloud(rows, cols, std::vector<double>(matrix.begin(), matrix.end()));
  const auto pairs = persistence_h0(pairwise_distances(cloud));
  std::vector<double> out;
  out.reserve(3 * expected_pairs);
  // Pairs are death-ascending, so keeping a prefix drops the largest deaths.
  append_triples(pairs, std::min(pairs.size(), expected_pairs), out);
  out.resize(3 * expected_pairs, 0.0);
  return out;
}

std::vector<std::vector<double>> extract_batch(std::span<const std::vector<double>> embeddings,
                                               const ReshapeSpec& spec) {
  std::vector<std::vector<double>> out(embeddings.size());
  parallel_for(embeddings.size(),
               [&](std::size_t i) { out[i] = extract_tda_features(embeddings[i], spec); });
  return out;
}

std::vector<std::vector<double>> extract_batch_attn(
    std::span<const std::vector<double>> matrices, std::size_t rows, std::size_t cols,
    std::size_t expected_pairs) {
  std::vector<std::vector<double>> out(matrices.size());
  parallel_for(matrices.size(), [&](std::size_t i) {
    out[i] = extract_tda_features_attn(matrices[i], rows, cols, expected_pairs);
  });
  return out;
}

}  // namespace topotext
