#include "topotext/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "topotext/error.hpp"

namespace topotext {

MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  const std::size_t n = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != n) throw Error(ErrorKind::ShapeMismatch, "confusion matrix must be square");
  }

  MetricsReport report;
  report.confusion = confusion;
  report.per_class.resize(n);

  std::vector<std::size_t> predicted(n, 0);
  std::size_t total = 0;
  std::size_t correct = 0;
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t p = 0; p < n; ++p) {
      predicted[p] += confusion[t][p];
      report.per_class[t].support += confusion[t][p];
      total += confusion[t][p];
    }
    correct += confusion[t][t];
  }
  report.num_samples = total;
  report.accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;

  std::size_t active = 0;
  for (std::size_t k = 0; k < n; ++k) {
    auto& m = report.per_class[k];
    const double tp = static_cast<double>(confusion[k][k]);
    if (predicted[k]) m.precision = tp / static_cast<double>(predicted[k]);
    if (m.support) m.recall = tp / static_cast<double>(m.support);
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    if (m.support == 0 && predicted[k] == 0) continue;
    ++active;
    report.macro_precision += m.precision;
    report.macro_recall += m.recall;
    report.macro_f1 += m.f1;
    report.weighted_f1 += m.f1 * static_cast<double>(m.support);
  }
  if (active) {
    report.macro_precision /= static_cast<double>(active);
    report.macro_recall /= static_cast<double>(active);
    report.macro_f1 /= static_cast<double>(active);
  }
  if (total) report.weighted_f1 /= static_cast<double>(total);
  return report;
}

MetricsReport metrics_from_predictions(std::span<const std::size_t> truth,
                                       std::span<const std::size_t> predicted,
                                       std::size_t num_labels) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorKind::ShapeMismatch, "truth and prediction counts differ");
  }
  ConfusionMatrix confusion(num_labels, std::vector<std::size_t>(num_labels, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_labels || predicted[i] >= num_labels) {
      throw Error(ErrorKind::InvalidLabel, "label out of range");
    }
    ++confusion[truth[i]][predicted[i]];
  }
  return metrics_from_confusion(confusion);
}

double compare_gain(double baseline_macro_f1, double candidate_macro_f1) {
  if (baseline_macro_f1 == 0.0) {
    throw Error(ErrorKind::UndefinedGain, "baseline macro F1 is zero");
  }
  return (candidate_macro_f1 - baseline_macro_f1) / baseline_macro_f1 * 100.0;
}

double compare_gain(const MetricsReport& baseline, const MetricsReport& candidate) {
  return compare_gain(baseline.macro_f1, candidate.macro_f1);
}

std::string format_gain(double percent, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%+.*f%%", decimals, percent);
  std::string s(buf);
  if (s.rfind("-0.", 0) == 0 && std::abs(percent) < 0.5 * std::pow(10.0, -decimals)) s[0] = '+';
  return s;
}

}  // namespace topotext
