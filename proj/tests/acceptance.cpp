// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "topotext/classifier_head.hpp"
#include "topotext/experiment.hpp"
#include "topotext/metrics.hpp"
#include "topotext/persistence.hpp"
#include "topotext/tda_features.hpp"

using namespace topotext;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!out.pass) ++failures;
  std::printf("%s  %-28s %s (%.2fs)\n", out.pass ? "PASS" : "FAIL", name.c_str(),
              out.detail.c_str(), secs);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<std::vector<double>> rows_of(const DistanceMatrix& d) {
  std::vector<std::vector<double>> rows(d.size(), std::vector<double>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j) rows[i][j] = d(i, j);
  return rows;
}

std::vector<double> h0_deaths(const std::vector<double>& flat, std::size_t r, std::size_t c) {
  std::vector<double> out;
  for (const auto& p : persistence_h0(pairwise_distances(PointCloud(r, c, flat))))
    out.push_back(p.death);
  std::sort(out.begin(), out.end());
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return kInfinity;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

Outcome h0_oracle() {
  Rng rng(2024);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t r = 2 + rng.below(63);
    const std::size_t c = 1 + rng.below(64);
    const auto m = oracle::random_matrix(rng, r, c);
    const auto ours = h0_deaths(m, r, c);
    const auto ref = oracle::prim_mst_weights(oracle::naive_distances(m, r, c));
    worst = std::max(worst, max_abs_diff(ours, ref));
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-9 && secs < 10.0,
          fmt("100 clouds, max |diff| %.3g, %.2fs", worst, secs)};
}

Outcome h1_oracle() {
  Rng rng(77);
  std::size_t mismatches = 0, bars = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t r = 3 + rng.below(10);
    const std::size_t c = 1 + rng.below(6);
    const auto d = pairwise_distances(PointCloud(r, c, oracle::random_matrix(rng, r, c)));
    const double threshold = t % 2 ? d.max_entry() : enclosing_radius(d);
    const auto ours = persistence_h1(d, threshold);
    std::vector<oracle::Bar> ref;
    for (const auto& b : oracle::naive_rips_bars(rows_of(d), threshold))
      if (b.dim == 1) ref.push_back(b);
    bars += ref.size();
    if (ours.size() != ref.size()) {
      ++mismatches;
      continue;
    }
    for (std::size_t i = 0; i < ours.size(); ++i) {
      if (ours[i].birth != ref[i].birth || ours[i].death != ref[i].death) {
        ++mismatches;
        break;
      }
    }
  }
  const auto sq = persistence_h1(pairwise_distances(PointCloud(4, 2, {0, 0, 1, 0, 1, 1, 0, 1})),
                                 2.0);
  const bool square_ok = sq.size() == 1 && std::abs(sq[0].birth - 1.0) <= 1e-9 &&
                          std::abs(sq[0].death - std::sqrt(2.0)) <= 1e-9;
  return {mismatches == 0 && square_ok,
          fmt("50 clouds, %g H1 bars, %g mismatches, square ok=%g", double(bars),
              double(mismatches), square_ok)};
}

Outcome shape_constants() {
  Rng rng(3);
  const auto v = oracle::random_matrix(rng, 1, 768);
  const ReshapeSpec spec{24, 32, false};
  const auto pairs = persistence_h0(pairwise_distances(reshape_embedding(v, spec))).size();
  const auto features = extract_tda_features(v, spec).size();
  HeadConfig tda;
  tda.variant = Variant::Tda;
  const auto head = tda.feature_width();
  const auto a400 =
      extract_tda_features_attn(oracle::random_matrix(rng, 400, 768), 400, 768, 399).size();
  const auto a512 =
      extract_tda_features_attn(oracle::random_matrix(rng, 512, 768), 512, 768, 511).size();
  HeadConfig attn;
  attn.variant = Variant::TdaAttn;
  attn.expected_pairs = 399;
  const auto w400 = attn.feature_width();
  attn.expected_pairs = 511;
  const auto w512 = attn.feature_width();
  const bool ok = pairs == 23 && features == 69 && head == 837 && a400 == 1197 &&
                  a512 == 1533 && w400 == 1965 && w512 == 2301;
  std::ostringstream s;
  s << pairs << '/' << features << '/' << head << ' ' << a400 << '/' << a512 << ' ' << w400
    << '/' << w512;
  return {ok, s.str()};
}

Outcome stability() {
  Rng rng(99);
  const ReshapeSpec spec{24, 32, false};
  bool length_ok = true;
  for (int t = 0; t < 1000; ++t) {
    auto v = oracle::random_matrix(rng, 1, 768);
    const double scale = std::exp(rng.uniform(-5.0, 5.0));
    for (auto& x : v) x *= scale;
    if (t % 100 == 0) std::fill(v.begin(), v.end(), 1.0);
    length_ok = length_ok && extract_tda_features(v, spec).size() == 69;
  }

  double worst_ratio = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto m = oracle::random_matrix(rng, 24, 32);
    const double eps = rng.uniform(1e-6, 0.01);
    auto moved = m;
    for (std::size_t i = 0; i < 24; ++i) {
      std::vector<double> dir(32);
      double norm = 0.0;
      for (auto& x : dir) {
        x = rng.normal();
        norm += x * x;
      }
      const double len = eps * rng.uniform() / std::sqrt(norm);
      for (std::size_t k = 0; k < 32; ++k) moved[i * 32 + k] += len * dir[k];
    }
    worst_ratio = std::max(worst_ratio,
                           max_abs_diff(h0_deaths(m, 24, 32), h0_deaths(moved, 24, 32)) / eps);
  }

  double worst_invariance = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto m = oracle::random_matrix(rng, 24, 32);
    const auto base = h0_deaths(m, 24, 32);
    std::vector<std::size_t> order(24);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 23; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    std::vector<double> permuted(m.size());
    for (std::size_t i = 0; i < 24; ++i)
      std::copy_n(m.begin() + order[i] * 32, 32, permuted.begin() + i * 32);
    const auto rot = oracle::random_rotation(rng, 32);
    std::vector<double> shift(32);
    for (auto& s : shift) s = rng.normal() * 10.0;
    std::vector<double> moved(m.size(), 0.0);
    for (std::size_t i = 0; i < 24; ++i)
      for (std::size_t a = 0; a < 32; ++a) {
        double s = shift[a];
        for (std::size_t b = 0; b < 32; ++b) s += rot[a * 32 + b] * m[i * 32 + b];
        moved[i * 32 + a] = s;
      }
    worst_invariance = std::max({worst_invariance, max_abs_diff(base, h0_deaths(permuted, 24, 32)),
                                 max_abs_diff(base, h0_deaths(moved, 24, 32))});
  }
  const bool ok = length_ok && worst_ratio <= 2.0 && worst_invariance <= 1e-6;
  return {ok, fmt("length const=%g, max death shift/eps %.3f, isometry err %.2g", length_ok,
                  worst_ratio, worst_invariance)};
}

Outcome gradient_check() {
  Rng rng(5150);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    HeadConfig cfg;
    cfg.input_dim = 2 + rng.below(10);
    cfg.num_labels = 2 + rng.below(5);
    cfg.seed = rng.next_u64();
    auto model = init_model(cfg);
    for (auto& b : model.bias) b = 0.5 * rng.normal();
    const std::size_t n = 1 + rng.below(8);
    std::vector<std::vector<double>> batch;
    std::vector<std::uint32_t> labels;
    for (std::size_t i = 0; i < n; ++i) {
      batch.push_back(oracle::random_matrix(rng, 1, cfg.input_dim));
      labels.push_back(static_cast<std::uint32_t>(rng.below(cfg.num_labels)));
    }
    const auto g = loss_and_gradient(model, batch, labels);
    const auto num = oracle::finite_difference_gradient(model, batch, labels, 1e-5);
    worst = std::max({worst, oracle::max_relative_error(g.weights, num.weights),
                      oracle::max_relative_error(g.bias, num.bias)});
  }
  return {worst <= 1e-4, fmt("20 instances, max relative error %.3g", worst)};
}

Outcome structure_shift() {
  GeneratorSpec spec;  // 6 classes, 200/50/50 per class, D 768, r 24
  const auto start = std::chrono::steady_clock::now();
  const auto splits = generate_splits(spec);
  const auto result = run_variants(splits, benchmark_variants(), {1, 2, 3}, Variant::Plain);
  const double secs = seconds_since(start);
  const double plain = result.summary(Variant::Plain).mean_macro_f1;
  const double tda = result.summary(Variant::Tda).mean_macro_f1;
  const double gauss = result.summary(Variant::Gaussian).mean_macro_f1;
  const bool ok = tda - plain >= 0.10 && gauss - plain < 0.05 && secs < 300.0;
  return {ok, fmt("macro F1 plain %.4f tda %.4f gaussian %.4f", plain, tda, gauss) +
                  fmt(", %.1fs", secs)};
}

Outcome mean_shift() {
  GeneratorSpec spec;
  spec.kind = "mean_shift";
  const auto splits = generate_splits(spec);
  const auto result = run_variants(splits, benchmark_variants(), {1, 2, 3}, Variant::Plain);
  const double plain = result.summary(Variant::Plain).mean_macro_f1;
  const double tda = result.summary(Variant::Tda).mean_macro_f1;
  return {plain >= 0.9 && std::abs(tda - plain) <= 0.05,
          fmt("macro F1 plain %.4f tda %.4f", plain, tda)};
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

bool agrees(const ConfusionMatrix& m) {
  const auto r = metrics_from_confusion(m);
  const auto h = oracle::hand_metrics(m);
  if (!close(r.accuracy, h.accuracy) || !close(r.macro_f1, h.macro_f1) ||
      !close(r.weighted_f1, h.weighted_f1) || !close(r.macro_precision, h.macro_precision) ||
      !close(r.macro_recall, h.macro_recall))
    return false;
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (!close(r.per_class[k].precision, h.precision[k]) ||
        !close(r.per_class[k].recall, h.recall[k]) || !close(r.per_class[k].f1, h.f1[k]))
      return false;
  }
  return true;
}

Outcome metrics_oracle() {
  std::size_t checked = 0, bad = 0;
  for (std::size_t v = 0; v <= 10; ++v) {
    bad += !agrees({{v}});
    ++checked;
  }
  for (std::size_t code = 0; code < 11 * 11 * 11 * 11; ++code) {
    std::size_t c = code;
    ConfusionMatrix m(2, std::vector<std::size_t>(2));
    for (auto& row : m)
      for (auto& e : row) {
        e = c % 11;
        c /= 11;
      }
    bad += !agrees(m);
    ++checked;
  }
  const std::size_t values[] = {0, 1, 2, 5, 10};
  std::size_t total3 = 1;
  for (int i = 0; i < 9; ++i) total3 *= 5;
  for (std::size_t code = 0; code < total3; ++code) {
    std::size_t c = code;
    ConfusionMatrix m(3, std::vector<std::size_t>(3));
    for (auto& row : m)
      for (auto& e : row) {
        e = values[c % 5];
        c /= 5;
      }
    bad += !agrees(m);
    ++checked;
  }
  Rng rng(31337);
  for (int t = 0; t < 20000; ++t) {
    ConfusionMatrix m(3, std::vector<std::size_t>(3));
    for (auto& row : m)
      for (auto& e : row) e = rng.below(11);
    bad += !agrees(m);
    ++checked;
  }
  const auto g3 = format_gain(compare_gain(0.8719, 0.9058));
  const auto g4 = format_gain(compare_gain(0.9064, 0.9746));
  return {bad == 0 && g3 == "+3.9%" && g4 == "+7.5%",
          std::to_string(checked) + " matrices, " + std::to_string(bad) + " mismatches, gains " +
              g3 + " " + g4};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& stdout_file) {
  const std::string cmd = std::string(TOPOTEXT_CLI_PATH) + " " + args + " > " +
                          stdout_file.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Snapshot of every regular file under `dir`, keyed by relative path.
std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file())
      files.emplace_back(fs::relative(e.path(), dir).string(), slurp(e.path()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

Outcome cli_determinism() {
  const fs::path work = fs::temp_directory_path() / "topotext_acceptance_cli";
  const std::string w = work.string();
  const std::vector<std::string> commands = {
      "gen --kind structure_shift --labels 3 --train-per-class 20 --val-per-class 5 "
      "--test-per-class 5 --out " + w + "/data",
      "extract --in " + w + "/data/test.emb1 --out " + w + "/feat.emb1",
      "train --train " + w + "/data/train.emb1 --variant tda --lr 1e-3 --out " + w + "/tda.thd",
      "train --train " + w + "/data/train.emb1 --variant gaussian --lr 1e-3 --out " + w +
          "/gauss.thd",
      "eval --model " + w + "/tda.thd --data " + w + "/data/test.emb1 --out " + w + "/eval.json",
      "diagram --in " + w + "/data/test.emb1 --index 3 --max-dim 1 --json --out " + w +
          "/diag.json",
      "pca --data " + w + "/data/test.emb1 --model " + w + "/tda.thd --out " + w + "/pca.csv",
      "experiment --data-dir " + w + "/data --seeds 1,2 --out " + w + "/exp",
  };
  std::vector<std::vector<std::pair<std::string, std::string>>> passes;
  for (int pass = 0; pass < 2; ++pass) {
    fs::remove_all(work);
    fs::create_directories(work / "stdout");
    for (std::size_t i = 0; i < commands.size(); ++i) {
      const int code = run_cli(commands[i], work / "stdout" / std::to_string(i));
      if (code != 0) {
        fs::remove_all(work);
        return {false, "command failed (exit " + std::to_string(code) + "): " + commands[i]};
      }
    }
    passes.push_back(snapshot(work));
  }
  fs::remove_all(work);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < std::min(passes[0].size(), passes[1].size()); ++i)
    differing += passes[0][i] != passes[1][i];
  const bool ok = passes[0].size() == passes[1].size() && differing == 0;
  return {ok, std::to_string(commands.size()) + " commands, " +
                  std::to_string(passes[0].size()) + " output files, " +
                  std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
  setenv("TOPOTEXT_THREADS", "1", 1);
  criterion("h0-oracle-equivalence", h0_oracle);
  criterion("h1-oracle-equivalence", h1_oracle);
  criterion("shape-constants", shape_constants);
  criterion("stability-invariants", stability);
  criterion("gradient-check", gradient_check);
  criterion("structure-shift-mechanism", structure_shift);
  criterion("mean-shift-sanity", mean_shift);
  criterion("metrics-oracle", metrics_oracle);
  criterion("cli-determinism", cli_determinism);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
