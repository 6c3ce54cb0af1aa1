#include "topotext/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "topotext/error.hpp"
#include "topotext/parallel.hpp"
#include "topotext/rng.hpp"

namespace topotext {

namespace {

Dataset generate_one(const GeneratorSpec& spec, std::size_t per_class, Split split) {
  const std::size_t classes =
      spec.train_counts.empty() ? spec.classes : spec.train_counts.size();
  std::vector<std::size_t> counts(classes, per_class);
  if (split == Split::Train && !spec.train_counts.empty()) counts = spec.train_counts;
  if (spec.kind == "mean_shift") {
    MeanShiftParams p;
    p.per_class = counts;
    p.dim = spec.dim;
    p.noise_sd = spec.noise_sd;
    p.seed = spec.seed;
    p.split = split;
    return generate_mean_shift(p);
  }
  if (spec.kind == "structure_shift") {
    StructureShiftParams p;
    p.per_class = counts;
    p.dim = spec.dim;
    p.rows = spec.rows;
    p.seed = spec.seed;
    p.split = split;
    return generate_structure_shift(p);
  }
  throw Error(ErrorKind::InvalidPlan, "unknown generator '" + spec.kind + "'");
}

std::string fixed(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace

std::vector<HeadConfig> benchmark_variants(double learning_rate) {
  std::vector<HeadConfig> out;
  for (auto v : {Variant::Plain, Variant::Tda, Variant::Gaussian}) {
    HeadConfig cfg;
    cfg.variant = v;
    cfg.learning_rate = learning_rate;
    out.push_back(cfg);
  }
  return out;
}

DatasetSplits generate_splits(const GeneratorSpec& spec) {
  return {generate_one(spec, spec.train_per_class, Split::Train),
          generate_one(spec, spec.validation_per_class, Split::Validation),
          generate_one(spec, spec.test_per_class, Split::Test)};
}

DatasetSplits load_splits(const std::filesystem::path& dir) {
  auto load = [&](const char* name, Split split) {
    const auto path = dir / (std::string(name) + ".emb1");
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::InvalidPlan, "missing split file " + path.string());
    }
    auto ds = read_emb1(path);
    ds.manifest.split = split;
    return ds;
  };
  return {load("train", Split::Train), load("validation", Split::Validation),
          load("test", Split::Test)};
}

void write_splits(const std::filesystem::path& dir, const DatasetSplits& splits) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  for (const auto* ds : {&splits.train, &splits.validation, &splits.test}) {
    const auto name = to_string(ds->manifest.split);
    write_emb1(dir / (name + ".emb1"), *ds);
    manifest[name] = manifest_to_json(ds->manifest);
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

const VariantSummary& ExperimentResult::summary(Variant variant) const {
  for (const auto& s : summaries) {
    if (s.variant == variant) return s;
  }
  throw Error(ErrorKind::InvalidPlan, "variant " + to_string(variant) + " not in results");
}

ExperimentResult run_variants(const DatasetSplits& splits, const std::vector<HeadConfig>& variants,
                              const std::vector<std::uint64_t>& seeds, Variant baseline,
                              const DatasetSplits* attention) {
  if (variants.empty()) throw Error(ErrorKind::InvalidPlan, "plan has no variants");
  if (seeds.empty()) throw Error(ErrorKind::InvalidPlan, "plan has no seeds");
  if (splits.train.records.empty() || splits.test.records.empty()) {
    throw Error(ErrorKind::InvalidPlan, "train and test splits must be non-empty");
  }

  std::vector<HeadConfig> configs = variants;
  for (auto& cfg : configs) {
    cfg.input_dim = splits.train.manifest.dim;
    cfg.num_labels = splits.train.num_labels();
    if (cfg.variant == Variant::TdaAttn && attention == nullptr) {
      throw Error(ErrorKind::InvalidPlan, "tda_attn variant needs attention features");
    }
    cfg.validate();
  }

  ExperimentResult result;
  result.runs.resize(configs.size() * seeds.size());
  // Each cell is single-threaded; cells are independent and written by index.
  parallel_for(result.runs.size(), [&](std::size_t cell) {
    auto cfg = configs[cell / seeds.size()];
    cfg.seed = seeds[cell % seeds.size()];
    const bool attn = cfg.variant == Variant::TdaAttn;
    const auto model = train(splits.train, cfg, attn ? &attention->train : nullptr);
    auto& run = result.runs[cell];
    run.variant = cfg.variant;
    run.seed = cfg.seed;
    run.test = evaluate(model, cfg, splits.test, attn ? &attention->test : nullptr);
    if (!splits.validation.records.empty()) {
      run.validation =
          evaluate(model, cfg, splits.validation, attn ? &attention->validation : nullptr);
    }
  });

  for (auto& run : result.runs) {
    for (const auto& base : result.runs) {
      if (base.variant == baseline && base.seed == run.seed && run.variant != baseline &&
          base.test.macro_f1 > 0.0) {
        run.gain_pct = compare_gain(base.test, run.test);
      }
    }
  }

  for (const auto& cfg : configs) {
    VariantSummary s;
    s.variant = cfg.variant;
    std::vector<double> macro, weighted, acc, prec, rec;
    for (const auto& run : result.runs) {
      if (run.variant != cfg.variant) continue;
      macro.push_back(run.test.macro_f1);
      weighted.push_back(run.test.weighted_f1);
      acc.push_back(run.test.accuracy);
      prec.push_back(run.test.macro_precision);
      rec.push_back(run.test.macro_recall);
    }
    s.runs = macro.size();
    std::tie(s.mean_macro_f1, s.std_macro_f1) = mean_std(macro);
    std::tie(s.mean_weighted_f1, s.std_weighted_f1) = mean_std(weighted);
    std::tie(s.mean_accuracy, s.std_accuracy) = mean_std(acc);
    s.mean_precision = mean_std(prec).first;
    s.mean_recall = mean_std(rec).first;
    result.summaries.push_back(s);
  }
  for (auto& s : result.summaries) {
    for (const auto& base : result.summaries) {
      if (base.variant == baseline && s.variant != baseline && base.mean_macro_f1 > 0.0) {
        s.gain_pct = compare_gain(base.mean_macro_f1, s.mean_macro_f1);
      }
    }
  }
  return result;
}

ExperimentResult run_plan(const ExperimentPlan& plan) {
  if (plan.dataset_dir.has_value() == plan.generator.has_value()) {
    throw Error(ErrorKind::InvalidPlan, "plan needs exactly one of a dataset dir or a generator");
  }
  const DatasetSplits splits =
      plan.dataset_dir ? load_splits(*plan.dataset_dir) : generate_splits(*plan.generator);
  std::optional<DatasetSplits> attention;
  if (plan.attention_dir) attention = load_splits(*plan.attention_dir);

  auto result = run_variants(splits, plan.variants, plan.seeds, plan.baseline,
                             attention ? &*attention : nullptr);
  if (!plan.output_dir.empty()) {
    std::filesystem::create_directories(plan.output_dir);
    write_text(plan.output_dir / "results.csv", results_csv(result));
    write_text(plan.output_dir / "results.md", results_markdown(result));
  }
  return result;
}

std::string results_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "variant,seed,accuracy,macro_precision,macro_recall,macro_f1,weighted_f1,"
         "val_macro_f1,gain_pct\n";
  for (const auto& r : result.runs) {
    out << to_string(r.variant) << ',' << r.seed << ',' << fixed(r.test.accuracy) << ','
        << fixed(r.test.macro_precision) << ',' << fixed(r.test.macro_recall) << ','
        << fixed(r.test.macro_f1) << ',' << fixed(r.test.weighted_f1) << ','
        << fixed(r.validation.macro_f1) << ',' << (r.gain_pct ? fixed(*r.gain_pct, 4) : "")
        << '\n';
  }
  for (const auto& s : result.summaries) {
    out << to_string(s.variant) << ",mean," << fixed(s.mean_accuracy) << ','
        << fixed(s.mean_precision) << ',' << fixed(s.mean_recall) << ','
        << fixed(s.mean_macro_f1) << ',' << fixed(s.mean_weighted_f1) << ",,"
        << (s.gain_pct ? fixed(*s.gain_pct, 4) : "") << '\n';
    out << to_string(s.variant) << ",stddev," << fixed(s.std_accuracy) << ",,,"
        << fixed(s.std_macro_f1) << ',' << fixed(s.std_weighted_f1) << ",,\n";
  }
  return out.str();
}

std::string results_markdown(const ExperimentResult& result) {
  std::ostringstream out;
  out << "| Model | Precision | Recall | Accuracy | Weighted F1 | Macro F1 | % Gain |\n";
  out << "|---|---|---|---|---|---|---|\n";
  for (const auto& s : result.summaries) {
    out << "| " << to_string(s.variant) << " | " << fixed(s.mean_precision, 4) << " | "
        << fixed(s.mean_recall, 4) << " | " << fixed(s.mean_accuracy, 4) << " | "
        << fixed(s.mean_weighted_f1, 4) << " | " << fixed(s.mean_macro_f1, 4) << " ± "
        << fixed(s.std_macro_f1, 4) << " | " << (s.gain_pct ? format_gain(*s.gain_pct) : "-")
        << " |\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// PCA

namespace {

constexpr double kPcaTolerance = 1e-9;
constexpr std::size_t kPcaMaxIterations = 10000;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  for (auto& x : v) x /= n;
}

// Flip so the largest-magnitude entry is positive.
void canonical_sign(std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0) {
    for (auto& x : v) x = -x;
  }
}

void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& b : basis) {
      const double d = dot(v, b);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= d * b[i];
    }
  }
}

}  // namespace

PcaResult pca(const std::vector<std::vector<double>>& rows, std::vector<std::string> labels,
              std::size_t k) {
  if (rows.empty()) throw Error(ErrorKind::InvalidInput, "PCA needs at least one row");
  const std::size_t dim = rows.front().size();
  if (k < 1 || k > dim) throw Error(ErrorKind::InvalidInput, "PCA needs 1 <= k <= D");
  for (const auto& r : rows) {
    if (r.size() != dim) throw Error(ErrorKind::ShapeMismatch, "ragged PCA input");
  }

  std::vector<double> mean(dim, 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < dim; ++j) mean[j] += r[j];
  }
  for (auto& m : mean) m /= static_cast<double>(rows.size());

  // Covariance (upper triangle filled, then mirrored).
  std::vector<double> cov(dim * dim, 0.0);
  std::vector<double> centered(dim);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < dim; ++j) centered[j] = r[j] - mean[j];
    for (std::size_t a = 0; a < dim; ++a) {
      const double ca = centered[a];
      if (ca == 0.0) continue;
      double* row = cov.data() + a * dim;
      for (std::size_t b = a; b < dim; ++b) row[b] += ca * centered[b];
    }
  }
  const double denom = rows.size() > 1 ? static_cast<double>(rows.size() - 1) : 1.0;
  double trace = 0.0;
  for (std::size_t a = 0; a < dim; ++a) {
    for (std::size_t b = a; b < dim; ++b) {
      cov[a * dim + b] /= denom;
      cov[b * dim + a] = cov[a * dim + b];
    }
    trace += cov[a * dim + a];
  }
  if (!(trace > 0.0)) throw Error(ErrorKind::DegenerateData, "dataset has zero variance");

  PcaResult result;
  Rng rng(0x5eed'0f'9ca);
  std::vector<double> next(dim);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.normal();
    orthogonalize(v, result.components);
    normalize(v);
    double lambda = 0.0;
    for (std::size_t it = 0; it < kPcaMaxIterations; ++it) {
      for (std::size_t a = 0; a < dim; ++a) {
        const double* row = cov.data() + a * dim;
        double s = 0.0;
        for (std::size_t b = 0; b < dim; ++b) s += row[b] * v[b];
        next[a] = s;
      }
      orthogonalize(next, result.components);
      lambda = std::sqrt(dot(next, next));
      if (lambda <= 1e-14 * trace) break;
      for (auto& x : next) x /= lambda;
      double diff = 0.0;
      for (std::size_t a = 0; a < dim; ++a) diff += (next[a] - v[a]) * (next[a] - v[a]);
      v.swap(next);
      if (std::sqrt(diff) < kPcaTolerance) break;
    }
    if (lambda <= 1e-14 * trace) {
      // Remaining variance is zero: any direction orthogonal to the
      // components found so far is a valid eigenvector.
      lambda = 0.0;
      for (std::size_t axis = 0; axis < dim; ++axis) {
        std::vector<double> e(dim, 0.0);
        e[axis] = 1.0;
        orthogonalize(e, result.components);
        if (dot(e, e) > 1e-6) {
          v = std::move(e);
          break;
        }
      }
      normalize(v);
    }
    canonical_sign(v);
    // Rayleigh quotient for the reported variance.
    double rq = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < dim; ++b) s += cov[a * dim + b] * v[b];
      rq += v[a] * s;
    }
    result.variances.push_back(lambda == 0.0 ? 0.0 : rq);
    // Hotelling deflation: remove the found direction from the covariance.
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b) cov[a * dim + b] -= rq * v[a] * v[b];
    }
    result.components.push_back(std::move(v));
  }

  result.coords.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<double> proj(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < dim; ++j) proj[c] += (r[j] - mean[j]) * result.components[c][j];
    }
    result.coords.push_back(std::move(proj));
  }
  result.labels = std::move(labels);
  return result;
}

PcaResult pca_project(const Dataset& data, std::size_t k, const HeadConfig* tda_config) {
  if (data.records.empty()) throw Error(ErrorKind::InvalidInput, "empty dataset");
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  rows.reserve(data.records.size());
  for (const auto& r : data.records) {
    rows.push_back(r.vector);
    labels.push_back(data.manifest.label_names.at(r.label));
  }
  if (tda_config != nullptr && tda_config->variant == Variant::Tda) {
    const auto tda = extract_batch(rows, tda_config->reshape);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      rows[i].insert(rows[i].end(), tda[i].begin(), tda[i].end());
    }
  }
  return pca(rows, std::move(labels), k);
}

std::string pca_to_csv(const PcaResult& result) {
  std::ostringstream out;
  out << "label";
  for (std::size_t c = 0; c < result.components.size(); ++c) out << ",pc" << (c + 1);
  out << '\n';
  for (std::size_t i = 0; i < result.coords.size(); ++i) {
    out << result.labels[i];
    for (double v : result.coords[i]) out << ',' << format_real(v);
    out << '\n';
  }
  return out.str();
}

}  // namespace topotext
