#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace topotext {

/// Row = true class, column = predicted class.
using ConfusionMatrix = std::vector<std::vector<std::size_t>>;

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  ConfusionMatrix confusion;
  std::size_t num_samples = 0;
};

/// Per-class scores use 0 for undefined ratios. Macro and weighted averages
/// run over the classes that occur either as a true label or as a
/// prediction.
MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion);

MetricsReport metrics_from_predictions(std::span<const std::size_t> truth,
                                       std::span<const std::size_t> predicted,
                                       std::size_t num_labels);

/// Percent change of macro F1 from `baseline` to `candidate`.
double compare_gain(const MetricsReport& baseline, const MetricsReport& candidate);
double compare_gain(double baseline_macro_f1, double candidate_macro_f1);

/// "+3.9%" style display string.
std::string format_gain(double percent, int decimals = 1);

}  // namespace topotext
