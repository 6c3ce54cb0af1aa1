// topotext: command-line front end for TDA feature extraction, head training
// and evaluation, diagram export, synthetic corpora and benchmarks.
//
// Exit codes: 0 ok, 2 I/O or format error, 3 shape/validation error,
// 64 usage error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "topotext/classifier_head.hpp"
#include "topotext/corpus_io.hpp"
#include "topotext/error.hpp"
#include "topotext/experiment.hpp"
#include "topotext/persistence.hpp"
#include "topotext/rng.hpp"
#include "topotext/tda_features.hpp"

namespace fs = std::filesystem;
using namespace topotext;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 2;
constexpr int kExitShape = 3;
constexpr int kExitUsage = 64;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FormatError:
    case ErrorKind::CorruptFile:
    case ErrorKind::ParseError:
    case ErrorKind::IoError:
      return kExitIo;
    default:
      return kExitShape;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
}

Dataset load_input(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::IoError, "no such file: " + path.string());
  return read_dataset(path);
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string in, out, mode = "pool";
  std::size_t rows = 0, cols = 0, pairs = 0;
  bool allow_unstable = false;
};

int cmd_extract(const ExtractArgs& a) {
  const Dataset input = load_input(a.in);
  std::vector<std::vector<double>> vectors;
  vectors.reserve(input.records.size());
  for (const auto& r : input.records) vectors.push_back(r.vector);

  std::vector<std::vector<double>> features;
  std::size_t width = 0;
  if (a.mode == "pool") {
    ReshapeSpec spec = (a.rows == 0 && a.cols == 0) ? default_reshape(input.manifest.dim)
                                                   : ReshapeSpec{a.rows, a.cols, false};
    spec.allow_unstable = a.allow_unstable;
    spec.validate(input.manifest.dim);
    features = extract_batch(vectors, spec);
    width = spec.feature_width();
  } else {
    if (a.rows < 2 || a.rows * a.cols != input.manifest.dim) {
      throw Error(ErrorKind::ShapeMismatch, "attention mode needs --rows x --cols = record width");
    }
    const std::size_t pairs = a.pairs == 0 ? a.rows - 1 : a.pairs;
    features = extract_batch_attn(vectors, a.rows, a.cols, pairs);
    width = 3 * pairs;
  }

  Dataset out;
  out.manifest = input.manifest;
  out.manifest.dim = width;
  out.manifest.generator = nullptr;
  out.records.reserve(input.records.size());
  for (std::size_t i = 0; i < input.records.size(); ++i) {
    out.records.push_back({input.records[i].label, input.records[i].label_name,
                           std::move(features[i])});
  }
  write_emb1(a.out, out);
  std::cout << a.in << ": samples=" << out.records.size() << " dim=" << width << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct HeadArgs {
  std::string variant = "plain";
  std::size_t rows = 0, cols = 0, pairs = 0, labels = 0;
  std::size_t epochs = 5, batch = 16;
  double lr = 2e-5, dropout = 0.3, sigma = 0.1;
  std::uint64_t seed = 42;
  bool allow_unstable = false, tda_from_raw = false;
};

void add_head_options(CLI::App* cmd, HeadArgs& h) {
  cmd->add_option("--variant", h.variant, "Head variant: plain, tda, gaussian or tda_attn")
      ->check(CLI::IsMember({"plain", "tda", "gaussian", "tda_attn"}));
  cmd->add_option("--rows", h.rows, "Reshape rows for the tda variant (default: closest to square)");
  cmd->add_option("--cols", h.cols, "Reshape columns for the tda variant");
  cmd->add_option("--pairs", h.pairs, "Attention-mode pair count (tda_attn width = 3 x pairs)");
  cmd->add_option("--labels", h.labels, "Number of labels (default: from the dataset)");
  cmd->add_option("--epochs", h.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", h.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--batch", h.batch, "Mini-batch size")->capture_default_str();
  cmd->add_option("--dropout", h.dropout, "Dropout probability")->capture_default_str();
  cmd->add_option("--sigma", h.sigma, "Gaussian-noise standard deviation")->capture_default_str();
  cmd->add_option("--seed", h.seed, "Random seed")->capture_default_str();
  cmd->add_flag("--allow-unstable", h.allow_unstable, "Permit reshapes with rows > cols");
  cmd->add_flag("--tda-from-raw", h.tda_from_raw,
                "Compute training TDA features from the raw embedding, not the dropped-out one");
}

HeadConfig make_config(const HeadArgs& h, const Dataset& data) {
  HeadConfig cfg;
  cfg.variant = parse_variant(h.variant);
  cfg.input_dim = data.manifest.dim;
  cfg.num_labels = h.labels ? h.labels : data.num_labels();
  if (h.labels && h.labels < data.num_labels()) {
    throw Error(ErrorKind::InvalidLabel, "--labels is smaller than the dataset's label count");
  }
  cfg.dropout_p = h.dropout;
  cfg.gaussian_sigma = h.sigma;
  cfg.learning_rate = h.lr;
  cfg.batch_size = h.batch;
  cfg.epochs = h.epochs;
  cfg.seed = h.seed;
  cfg.tda_from_raw = h.tda_from_raw;
  if (cfg.variant == Variant::Tda) {
    cfg.reshape = (h.rows == 0 && h.cols == 0) ? default_reshape(cfg.input_dim)
                                               : ReshapeSpec{h.rows, h.cols, false};
  }
  cfg.reshape.allow_unstable = h.allow_unstable;
  cfg.expected_pairs = h.pairs;
  return cfg;
}

struct TrainArgs {
  std::string train, out, side;
  HeadArgs head;
};

int cmd_train(const TrainArgs& a) {
  const Dataset data = load_input(a.train);
  Dataset side;
  HeadArgs head = a.head;
  if (!a.side.empty()) {
    side = load_input(a.side);
    if (head.pairs == 0) head.pairs = side.manifest.dim / 3;
  }
  const HeadConfig cfg = make_config(head, data);
  const auto model = train(data, cfg, a.side.empty() ? nullptr : &side);
  save_model(a.out, model, cfg);
  std::cout << "trained " << to_string(cfg.variant) << " head: samples=" << data.records.size()
            << " F=" << model.feature_width << " L=" << model.num_labels << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

nlohmann::json report_to_json(const MetricsReport& r, const std::vector<std::string>& names) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t k = 0; k < r.per_class.size(); ++k) {
    classes.push_back({{"label", k < names.size() ? names[k] : std::to_string(k)},
                       {"precision", r.per_class[k].precision},
                       {"recall", r.per_class[k].recall},
                       {"f1", r.per_class[k].f1},
                       {"support", r.per_class[k].support}});
  }
  return {{"accuracy", r.accuracy},
          {"macro_precision", r.macro_precision},
          {"macro_recall", r.macro_recall},
          {"macro_f1", r.macro_f1},
          {"weighted_f1", r.weighted_f1},
          {"num_samples", r.num_samples},
          {"per_class", classes},
          {"confusion", r.confusion}};
}

struct EvalArgs {
  std::string model, data, side, out;
};

int cmd_eval(const EvalArgs& a) {
  const auto loaded = load_model(a.model);
  const Dataset data = load_input(a.data);
  Dataset side;
  if (!a.side.empty()) side = load_input(a.side);
  const auto report =
      evaluate(loaded.model, loaded.config, data, a.side.empty() ? nullptr : &side);
  const auto j = report_to_json(report, data.manifest.label_names);
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");

  char line[256];
  std::cout << "| Model | Precision | Recall | Accuracy | Weighted F1 | Macro F1 |\n"
            << "|---|---|---|---|---|---|\n";
  std::snprintf(line, sizeof(line), "| %s | %.4f | %.4f | %.4f | %.4f | %.4f |\n",
                to_string(loaded.config.variant).c_str(), report.macro_precision,
                report.macro_recall, report.accuracy, report.weighted_f1, report.macro_f1);
  std::cout << line;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string kind = "structure_shift", out;
  std::size_t labels = 6, train = 200, val = 50, test = 50, dim = 768, rows = 24;
  std::vector<std::size_t> per_class;
  double noise_sd = 0.25;
  std::uint64_t seed = 42;
};

int cmd_gen(const GenArgs& a) {
  GeneratorSpec spec;
  spec.kind = a.kind;
  spec.classes = a.labels;
  spec.train_per_class = a.train;
  spec.validation_per_class = a.val;
  spec.test_per_class = a.test;
  spec.train_counts = a.per_class;
  spec.dim = a.dim;
  spec.rows = a.rows;
  spec.noise_sd = a.noise_sd;
  spec.seed = a.seed;
  const auto splits = generate_splits(spec);
  write_splits(a.out, splits);
  std::cout << "wrote " << a.kind << " corpus to " << a.out
            << ": train=" << splits.train.records.size()
            << " validation=" << splits.validation.records.size()
            << " test=" << splits.test.records.size() << " D=" << a.dim << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

PointCloud read_points_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::string line;
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (first) {
      first = false;
      try {
        parse_real(fields[0]);
      } catch (const Error&) {
        continue;  // header line
      }
    }
    if (cols == 0) cols = fields.size();
    if (fields.size() != cols) throw Error(ErrorKind::FormatError, "ragged point row");
    for (const auto& f : fields) values.push_back(parse_real(f));
    ++rows;
  }
  if (rows == 0) throw Error(ErrorKind::FormatError, "no points in " + path.string());
  return PointCloud(rows, cols, std::move(values));
}

struct DiagramArgs {
  std::string points, in, out;
  std::size_t index = 0, rows = 0, cols = 0;
  int max_dim = 0;
  double threshold = -1.0;
  bool allow_unstable = false, json = false;
};

int cmd_diagram(const DiagramArgs& a) {
  if (a.points.empty() == a.in.empty()) {
    throw Error(ErrorKind::InvalidInput, "give exactly one of --points or --in");
  }
  std::optional<PointCloud> cloud;
  if (!a.points.empty()) {
    cloud = read_points_csv(a.points);
  } else {
    const Dataset data = load_input(a.in);
    if (a.index >= data.records.size()) {
      throw Error(ErrorKind::InvalidInput, "--index beyond the number of samples");
    }
    ReshapeSpec spec = (a.rows == 0 && a.cols == 0) ? default_reshape(data.manifest.dim)
                                                   : ReshapeSpec{a.rows, a.cols, false};
    spec.allow_unstable = a.allow_unstable;
    cloud = reshape_embedding(data.records[a.index].vector, spec);
  }
  H1Options h1;
  h1.threshold = a.threshold;
  const auto diagram = compute_diagram(*cloud, a.max_dim, h1);
  const std::string text = a.json ? diagram_to_json(diagram) + "\n" : diagram_to_csv(diagram);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  std::size_t count = 200, cols = 32;
  std::uint64_t seed = 42;
};

int cmd_bench(const BenchArgs& a) {
  Rng rng = Rng(a.seed).stream("bench");
  std::cout << "rows,cols,clouds,seconds,clouds_per_sec\n";
  for (std::size_t rows : {24, 128, 512}) {
    const std::size_t count = std::max<std::size_t>(1, a.count * 24 * 24 / (rows * rows));
    std::vector<std::vector<double>> clouds(count, std::vector<double>(rows * a.cols));
    for (auto& c : clouds) {
      for (auto& v : c) v = rng.normal();
    }
    const ReshapeSpec spec{rows, a.cols, true};
    const auto start = std::chrono::steady_clock::now();
    const auto features = extract_batch(clouds, spec);
    const double seconds = elapsed_ms(start) / 1000.0;
    std::cout << rows << ',' << a.cols << ',' << features.size() << ',' << seconds << ','
              << static_cast<double>(features.size()) / seconds << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PcaArgs {
  std::string data, model, out;
  std::size_t k = 2;
};

int cmd_pca(const PcaArgs& a) {
  const Dataset data = load_input(a.data);
  std::optional<LoadedModel> loaded;
  if (!a.model.empty()) loaded = load_model(a.model);
  const auto result = pca_project(data, a.k, loaded ? &loaded->config : nullptr);
  write_text(a.out, pca_to_csv(result));
  std::cout << "pca: samples=" << result.coords.size() << " k=" << a.k << " variances=";
  for (std::size_t c = 0; c < result.variances.size(); ++c) {
    std::cout << (c ? "," : "") << format_real(result.variances[c]);
  }
  std::cout << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ExperimentArgs {
  std::string data_dir, attention_dir, out, kind = "structure_shift";
  std::vector<std::string> variants{"plain", "tda", "gaussian"};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t labels = 6, train = 200, val = 50, test = 50, dim = 768, rows = 24;
  std::size_t epochs = 5, batch = 16;
  double lr = kBenchmarkLearningRate, dropout = 0.3, sigma = 0.1, noise_sd = 0.25;
  std::uint64_t seed = 42;
  bool tda_from_raw = false;
};

int cmd_experiment(const ExperimentArgs& a) {
  ExperimentPlan plan;
  if (!a.data_dir.empty()) {
    plan.dataset_dir = a.data_dir;
  } else {
    GeneratorSpec spec;
    spec.kind = a.kind;
    spec.classes = a.labels;
    spec.train_per_class = a.train;
    spec.validation_per_class = a.val;
    spec.test_per_class = a.test;
    spec.dim = a.dim;
    spec.rows = a.rows;
    spec.noise_sd = a.noise_sd;
    spec.seed = a.seed;
    plan.generator = spec;
  }
  if (!a.attention_dir.empty()) plan.attention_dir = a.attention_dir;
  for (const auto& name : a.variants) {
    HeadConfig cfg;
    cfg.variant = parse_variant(name);
    cfg.learning_rate = a.lr;
    cfg.dropout_p = a.dropout;
    cfg.gaussian_sigma = a.sigma;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.tda_from_raw = a.tda_from_raw;
    if (cfg.variant == Variant::Tda) cfg.reshape = default_reshape(a.dim);
    plan.variants.push_back(cfg);
  }
  plan.seeds = a.seeds;
  plan.output_dir = a.out;
  const auto result = run_plan(plan);
  std::cout << results_markdown(result);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topotext: topological features for embedding-based authorship attribution"};
  app.require_subcommand(1);

  ExtractArgs extract;
  auto* c_extract = app.add_subcommand("extract", "Write TDA feature vectors for every sample");
  c_extract->add_option("--in", extract.in, "Input EMB1 or CSV file")->required();
  c_extract->add_option("--out", extract.out, "Output EMB1 file")->required();
  c_extract->add_option("--rows", extract.rows, "Reshape rows (pool) or matrix rows (attn)");
  c_extract->add_option("--cols", extract.cols, "Reshape columns (pool) or matrix columns (attn)");
  c_extract->add_option("--mode", extract.mode, "pool: reshaped embedding; attn: matrix rows")
      ->check(CLI::IsMember({"pool", "attn"}))
      ->capture_default_str();
  c_extract->add_option("--pairs", extract.pairs, "Attention-mode pair count (default rows - 1)");
  c_extract->add_flag("--allow-unstable", extract.allow_unstable,
                      "Permit reshapes with rows > cols");

  TrainArgs train_args;
  auto* c_train = app.add_subcommand("train", "Train an attribution head");
  c_train->add_option("--train", train_args.train, "Training EMB1 or CSV file")->required();
  c_train->add_option("--out", train_args.out, "Output THD1 model (config goes to <out>.json)")
      ->required();
  c_train->add_option("--side", train_args.side, "Attention features for tda_attn (EMB1)");
  add_head_options(c_train, train_args.head);

  EvalArgs eval_args;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a trained head");
  c_eval->add_option("--model", eval_args.model, "THD1 model file")->required();
  c_eval->add_option("--data", eval_args.data, "Evaluation EMB1 or CSV file")->required();
  c_eval->add_option("--side", eval_args.side, "Attention features for tda_attn (EMB1)");
  c_eval->add_option("--out", eval_args.out, "Write the metrics report as JSON");

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Generate a synthetic train/validation/test corpus");
  c_gen->add_option("--kind", gen.kind, "structure_shift or mean_shift")
      ->check(CLI::IsMember({"structure_shift", "mean_shift"}))
      ->capture_default_str();
  c_gen->add_option("--out", gen.out, "Output directory")->required();
  c_gen->add_option("--labels", gen.labels, "Number of classes")->capture_default_str();
  c_gen->add_option("--train-per-class", gen.train, "Training samples per class")
      ->capture_default_str();
  c_gen->add_option("--val-per-class", gen.val, "Validation samples per class")
      ->capture_default_str();
  c_gen->add_option("--test-per-class", gen.test, "Test samples per class")->capture_default_str();
  c_gen->add_option("--per-class", gen.per_class,
                    "Comma-separated training counts per class (imbalanced corpora)")
      ->delimiter(',');
  c_gen->add_option("--dim", gen.dim, "Embedding width D")->capture_default_str();
  c_gen->add_option("--rows", gen.rows, "Reshape rows (structure_shift)")->capture_default_str();
  c_gen->add_option("--noise-sd", gen.noise_sd, "Per-coordinate noise sd (mean_shift)")
      ->capture_default_str();
  c_gen->add_option("--seed", gen.seed, "Random seed")->capture_default_str();

  DiagramArgs diagram;
  auto* c_diagram = app.add_subcommand("diagram", "Export the persistence diagram of one sample");
  c_diagram->add_option("--points", diagram.points, "Point-cloud CSV (one point per row)");
  c_diagram->add_option("--in", diagram.in, "EMB1 or CSV dataset");
  c_diagram->add_option("--index", diagram.index, "Sample index in --in")->capture_default_str();
  c_diagram->add_option("--rows", diagram.rows, "Reshape rows");
  c_diagram->add_option("--cols", diagram.cols, "Reshape columns");
  c_diagram->add_flag("--allow-unstable", diagram.allow_unstable,
                      "Permit reshapes with rows > cols");
  c_diagram->add_option("--max-dim", diagram.max_dim, "Highest homology dimension (0 or 1)")
      ->check(CLI::Range(0, 1))
      ->capture_default_str();
  c_diagram->add_option("--threshold", diagram.threshold,
                        "Rips truncation radius for H1 (default: enclosing radius)");
  c_diagram->add_flag("--json", diagram.json, "Write JSON instead of CSV");
  c_diagram->add_option("--out", diagram.out, "Output file (default: stdout)");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Measure extraction throughput for r = 24, 128, 512");
  c_bench->add_option("--count", bench.count, "Clouds at r = 24 (scaled down for larger r)")
      ->capture_default_str();
  c_bench->add_option("--cols", bench.cols, "Point dimension")->capture_default_str();
  c_bench->add_option("--seed", bench.seed, "Random seed")->capture_default_str();

  PcaArgs pca_args;
  auto* c_pca = app.add_subcommand("pca", "Project embeddings onto their principal components");
  c_pca->add_option("--data", pca_args.data, "EMB1 or CSV dataset")->required();
  c_pca->add_option("--model", pca_args.model, "tda model: project embedding + TDA features");
  c_pca->add_option("--k", pca_args.k, "Number of components")->capture_default_str();
  c_pca->add_option("--out", pca_args.out, "Output CSV (label,pc1,pc2,...)")->required();

  ExperimentArgs exp;
  auto* c_exp = app.add_subcommand("experiment", "Train and compare head variants over seeds");
  c_exp->add_option("--data-dir", exp.data_dir, "Directory with train/validation/test .emb1");
  c_exp->add_option("--attention-dir", exp.attention_dir,
                    "Directory with attention features per split (tda_attn)");
  c_exp->add_option("--kind", exp.kind, "Generator when no --data-dir is given")
      ->check(CLI::IsMember({"structure_shift", "mean_shift"}))
      ->capture_default_str();
  c_exp->add_option("--variant", exp.variants, "Variants to compare")->delimiter(',');
  c_exp->add_option("--seeds", exp.seeds, "Training seeds")->delimiter(',');
  c_exp->add_option("--labels", exp.labels, "Generator classes")->capture_default_str();
  c_exp->add_option("--train-per-class", exp.train)->capture_default_str();
  c_exp->add_option("--val-per-class", exp.val)->capture_default_str();
  c_exp->add_option("--test-per-class", exp.test)->capture_default_str();
  c_exp->add_option("--dim", exp.dim, "Generator embedding width")->capture_default_str();
  c_exp->add_option("--rows", exp.rows, "Generator reshape rows")->capture_default_str();
  c_exp->add_option("--noise-sd", exp.noise_sd, "mean_shift noise sd")->capture_default_str();
  c_exp->add_option("--seed", exp.seed, "Generator seed")->capture_default_str();
  c_exp->add_option("--epochs", exp.epochs)->capture_default_str();
  c_exp->add_option("--batch", exp.batch)->capture_default_str();
  c_exp->add_option("--lr", exp.lr)->capture_default_str();
  c_exp->add_option("--dropout", exp.dropout)->capture_default_str();
  c_exp->add_option("--sigma", exp.sigma)->capture_default_str();
  c_exp->add_flag("--tda-from-raw", exp.tda_from_raw);
  c_exp->add_option("--out", exp.out, "Directory for results.csv and results.md");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_extract) return cmd_extract(extract);
    if (*c_train) return cmd_train(train_args);
    if (*c_eval) return cmd_eval(eval_args);
    if (*c_gen) return cmd_gen(gen);
    if (*c_diagram) return cmd_diagram(diagram);
    if (*c_bench) return cmd_bench(bench);
    if (*c_pca) return cmd_pca(pca_args);
    if (*c_exp) return cmd_experiment(exp);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
