#include <cmath>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "topotext/classifier_head.hpp"
#include "topotext/error.hpp"

using namespace topotext;

namespace {

Dataset toy_separable(std::uint64_t seed) {
  Dataset ds;
  ds.manifest.dim = 2;
  ds.manifest.label_names = {"left", "right"};
  Rng rng(seed);
  for (int i = 0; i < 64; ++i) {
    const std::uint32_t label = i % 2;
    const double x = (label ? 2.0 : -2.0) + 0.3 * rng.normal();
    ds.records.push_back({label, ds.manifest.label_names[label], {x, 0.3 * rng.normal()}});
  }
  ds.manifest.n_samples = ds.records.size();
  return ds;
}

HeadConfig small_config(Variant v, std::size_t dim, std::size_t labels) {
  HeadConfig cfg;
  cfg.variant = v;
  cfg.input_dim = dim;
  cfg.num_labels = labels;
  return cfg;
}

}  // namespace

TEST_CASE("softmax") {
  const auto p = softmax(std::vector<double>{1e4, -1e4, 0.0, 1e4});
  double sum = 0.0;
  for (double v : p) {
    CHECK(std::isfinite(v));
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(0.5));

  const auto uniform = softmax(std::vector<double>(20, 0.0));
  CHECK(cross_entropy(uniform, 7) == doctest::Approx(std::log(20.0)).epsilon(1e-9));
  CHECK(std::abs(cross_entropy(uniform, 7) - 2.9957) < 1e-4);
}

TEST_CASE("forward") {
  SUBCASE("zero weights give uniform probabilities") {
    auto cfg = small_config(Variant::Plain, 768, 20);
    auto model = init_model(cfg);
    std::fill(model.weights.begin(), model.weights.end(), 0.0);
    Rng rng(1);
    const auto x = oracle::random_matrix(rng, 1, 768);
    const auto p = forward(model, cfg, x, Mode::Train, &rng);
    for (double v : p.probs) CHECK(v == doctest::Approx(0.05).epsilon(1e-12));
  }
  SUBCASE("tda variant concatenates to 837") {
    const auto cfg = small_config(Variant::Tda, 768, 4);
    CHECK(cfg.feature_width() == 837);
    const auto model = init_model(cfg);
    CHECK(model.feature_width == 837);
    Rng rng(2);
    const auto x = oracle::random_matrix(rng, 1, 768);
    CHECK(build_features(cfg, x, Mode::Eval, nullptr).size() == 837);
    const auto p = forward(model, cfg, x, Mode::Eval, nullptr);
    CHECK(std::accumulate(p.probs.begin(), p.probs.end(), 0.0) ==
          doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("eval mode is deterministic") {
    const auto cfg = small_config(Variant::Gaussian, 32, 3);
    const auto model = init_model(cfg);
    Rng rng(3);
    const auto x = oracle::random_matrix(rng, 1, 32);
    Rng a(10), b(20);
    CHECK(forward(model, cfg, x, Mode::Eval, &a).probs ==
          forward(model, cfg, x, Mode::Eval, &b).probs);
  }
  SUBCASE("shape mismatch") {
    const auto cfg = small_config(Variant::Plain, 32, 3);
    const auto model = init_model(cfg);
    CHECK_THROWS_AS(forward(model, cfg, std::vector<double>(31, 0.0), Mode::Eval, nullptr),
                    Error);
  }
}

TEST_CASE("zeroed TDA columns reproduce the plain head") {
  auto tda_cfg = small_config(Variant::Tda, 64, 5);
  tda_cfg.reshape = {8, 8};
  auto plain_cfg = small_config(Variant::Plain, 64, 5);
  auto tda = init_model(tda_cfg);
  HeadModel plain = init_model(plain_cfg);
  for (std::size_t l = 0; l < 5; ++l) {
    for (std::size_t f = 0; f < 64; ++f) plain.weight(l, f) = tda.weight(l, f);
    for (std::size_t f = 64; f < tda.feature_width; ++f) tda.weight(l, f) = 0.0;
    tda.bias[l] = plain.bias[l] = 0.1 * static_cast<double>(l);
  }
  Rng rng(4);
  for (int i = 0; i < 10; ++i) {
    const auto x = oracle::random_matrix(rng, 1, 64);
    CHECK(logits(tda, build_features(tda_cfg, x, Mode::Eval, nullptr)) ==
          logits(plain, build_features(plain_cfg, x, Mode::Eval, nullptr)));
  }
}

TEST_CASE("inverted dropout preserves the expected activation") {
  auto cfg = small_config(Variant::Plain, 16, 2);
  Rng rng(5);
  const auto x = oracle::random_matrix(rng, 1, 16);
  std::vector<double> mean(16, 0.0);
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    const auto dropped = build_features(cfg, x, Mode::Train, &rng);
    for (std::size_t i = 0; i < 16; ++i) mean[i] += dropped[i] / trials;
  }
  double err = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    err += (mean[i] - x[i]) * (mean[i] - x[i]);
    norm += x[i] * x[i];
  }
  CHECK(std::sqrt(err / norm) < 0.02);
  CHECK(build_features(cfg, x, Mode::Eval, nullptr) == x);
}

TEST_CASE("analytic gradient matches finite differences") {
  Rng rng(6);
  const auto cfg = small_config(Variant::Plain, 7, 4);
  auto model = init_model(cfg);
  for (auto& b : model.bias) b = rng.normal();
  std::vector<std::vector<double>> batch;
  std::vector<std::uint32_t> labels;
  for (int i = 0; i < 5; ++i) {
    batch.push_back(oracle::random_matrix(rng, 1, 7));
    labels.push_back(static_cast<std::uint32_t>(rng.below(4)));
  }
  const auto g = loss_and_gradient(model, batch, labels);
  const auto num = oracle::finite_difference_gradient(model, batch, labels);
  CHECK(oracle::max_relative_error(g.weights, num.weights) <= 1e-4);
  CHECK(oracle::max_relative_error(g.bias, num.bias) <= 1e-4);
}

TEST_CASE("training") {
  SUBCASE("separable toy problem reaches full training accuracy") {
    const auto data = toy_separable(1);
    auto cfg = small_config(Variant::Plain, 2, 2);
    cfg.learning_rate = 0.05;
    const auto model = train(data, cfg);
    CHECK(evaluate(model, cfg, data).accuracy == 1.0);
  }
  SUBCASE("same seed gives bit-identical weights") {
    const auto data = toy_separable(2);
    auto cfg = small_config(Variant::Gaussian, 2, 2);
    cfg.learning_rate = 0.01;
    CHECK(train(data, cfg).weights == train(data, cfg).weights);
    auto other = cfg;
    other.seed = cfg.seed + 1;
    CHECK(train(data, cfg).weights != train(data, other).weights);
  }
  SUBCASE("errors") {
    Dataset empty;
    empty.manifest.dim = 2;
    empty.manifest.label_names = {"a", "b"};
    const auto cfg = small_config(Variant::Plain, 2, 2);
    CHECK_THROWS_AS(train(empty, cfg), Error);
    auto bad = toy_separable(3);
    bad.records[0].label = 5;
    try {
      train(bad, cfg);
      FAIL("expected InvalidLabel");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidLabel);
    }
  }
  SUBCASE("tda_attn uses side features") {
    auto data = toy_separable(4);
    Dataset side;
    side.manifest = data.manifest;
    side.manifest.dim = 6;
    for (const auto& r : data.records) {
      side.records.push_back({r.label, r.label_name, std::vector<double>(6, r.label ? 1.0 : -1.0)});
    }
    auto cfg = small_config(Variant::TdaAttn, 2, 2);
    cfg.expected_pairs = 2;
    cfg.learning_rate = 0.05;
    const auto model = train(data, cfg, &side);
    CHECK(model.feature_width == 8);
    CHECK(evaluate(model, cfg, data, &side).accuracy == 1.0);
    CHECK_THROWS_AS(train(data, cfg), Error);
  }
}

TEST_CASE("model files") {
  auto cfg = small_config(Variant::Tda, 64, 3);
  cfg.reshape = {8, 8};
  const auto model = init_model(cfg);
  const auto path = std::filesystem::temp_directory_path() / "topotext_model_test.thd";
  save_model(path, model, cfg);
  const auto loaded = load_model(path);
  CHECK(loaded.model == model);
  CHECK(config_to_json(loaded.config) == config_to_json(cfg));

  auto bytes = encode_model(model);
  CHECK(bytes.size() == 4 + 4 + 1 + 12 + 8 * 3 * (64 + 21 + 1));
  CHECK(decode_model(bytes) == model);
  bytes[3] = '2';
  CHECK_THROWS_AS(decode_model(bytes), Error);
  bytes[3] = '1';
  bytes.pop_back();
  CHECK_THROWS_AS(decode_model(bytes), Error);
  std::filesystem::remove(path);
  std::filesystem::remove(config_sidecar(path));
}
