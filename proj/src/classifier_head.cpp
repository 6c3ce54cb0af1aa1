#include "topotext/classifier_head.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "topotext/error.hpp"
#include "topotext/parallel.hpp"

namespace topotext {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::Plain: return "plain";
    case Variant::Tda: return "tda";
    case Variant::Gaussian: return "gaussian";
    case Variant::TdaAttn: return "tda_attn";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "plain") return Variant::Plain;
  if (name == "tda") return Variant::Tda;
  if (name == "gaussian") return Variant::Gaussian;
  if (name == "tda_attn") return Variant::TdaAttn;
  throw Error(ErrorKind::InvalidParams, "unknown variant '" + name + "'");
}

std::size_t HeadConfig::extra_width() const {
  switch (variant) {
    case Variant::Tda: return reshape.feature_width();
    case Variant::TdaAttn: return 3 * expected_pairs;
    default: return 0;
  }
}

void HeadConfig::validate() const {
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw Error(ErrorKind::InvalidParams, "dropout_p must lie in [0, 1)");
  }
  if (num_labels < 2) throw Error(ErrorKind::InvalidParams, "num_labels must be >= 2");
  if (input_dim < 1) throw Error(ErrorKind::InvalidParams, "input_dim must be >= 1");
  if (batch_size < 1) throw Error(ErrorKind::InvalidParams, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidParams, "learning_rate must be > 0");
  if (!(gaussian_sigma >= 0.0)) throw Error(ErrorKind::InvalidParams, "sigma must be >= 0");
  if (variant == Variant::Tda) reshape.validate(input_dim);
  if (variant == Variant::TdaAttn && expected_pairs < 1) {
    throw Error(ErrorKind::InvalidParams, "tda_attn needs expected_pairs >= 1");
  }
}

nlohmann::json config_to_json(const HeadConfig& cfg) {
  return {{"variant", to_string(cfg.variant)},
          {"input_dim", cfg.input_dim},
          {"num_labels", cfg.num_labels},
          {"dropout_p", cfg.dropout_p},
          {"gaussian_sigma", cfg.gaussian_sigma},
          {"reshape",
           {{"rows", cfg.reshape.rows},
            {"cols", cfg.reshape.cols},
            {"allow_unstable", cfg.reshape.allow_unstable}}},
          {"expected_pairs", cfg.expected_pairs},
          {"learning_rate", cfg.learning_rate},
          {"batch_size", cfg.batch_size},
          {"epochs", cfg.epochs},
          {"seed", cfg.seed},
          {"tda_from_raw", cfg.tda_from_raw},
          {"feature_width", cfg.feature_width()}};
}

HeadConfig config_from_json(const nlohmann::json& j) {
  try {
    HeadConfig cfg;
    cfg.variant = parse_variant(j.at("variant").get<std::string>());
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.num_labels = j.at("num_labels").get<std::size_t>();
    cfg.dropout_p = j.value("dropout_p", cfg.dropout_p);
    cfg.gaussian_sigma = j.value("gaussian_sigma", cfg.gaussian_sigma);
    if (j.contains("reshape")) {
      const auto& r = j.at("reshape");
      cfg.reshape.rows = r.at("rows").get<std::size_t>();
      cfg.reshape.cols = r.at("cols").get<std::size_t>();
      cfg.reshape.allow_unstable = r.value("allow_unstable", false);
    }
    cfg.expected_pairs = j.value("expected_pairs", cfg.expected_pairs);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.tda_from_raw = j.value("tda_from_raw", cfg.tda_from_raw);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("bad head config: ") + e.what());
  }
}

void HeadModel::check_against(const HeadConfig& cfg) const {
  if (variant != cfg.variant || input_dim != cfg.input_dim || num_labels != cfg.num_labels ||
      feature_width != cfg.feature_width() || weights.size() != num_labels * feature_width ||
      bias.size() != num_labels) {
    throw Error(ErrorKind::ShapeMismatch, "model dimensions do not match its configuration");
  }
}

HeadModel init_model(const HeadConfig& cfg) {
  cfg.validate();
  HeadModel model;
  model.variant = cfg.variant;
  model.input_dim = cfg.input_dim;
  model.num_labels = cfg.num_labels;
  model.feature_width = cfg.feature_width();
  model.weights.resize(model.num_labels * model.feature_width);
  model.bias.assign(model.num_labels, 0.0);
  Rng rng = Rng(cfg.seed).stream("head/init");
  const double bound = 1.0 / std::sqrt(static_cast<double>(model.feature_width));
  for (auto& w : model.weights) w = rng.uniform(-bound, bound);
  return model;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.size());
  if (logits.empty()) return probs;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - top);
    total += probs[i];
  }
  for (auto& p : probs) p /= total;
  return probs;
}

std::vector<double> build_features(const HeadConfig& cfg, std::span<const double> embedding,
                                   Mode mode, Rng* rng, std::span<const double> side,
                                   std::span<const double> cached_tda) {
  if (embedding.size() != cfg.input_dim) {
    throw Error(ErrorKind::ShapeMismatch, "embedding width " + std::to_string(embedding.size()) +
                                              " != " + std::to_string(cfg.input_dim));
  }
  std::vector<double> x(embedding.begin(), embedding.end());
  if (mode == Mode::Train) {
    if (rng == nullptr) throw Error(ErrorKind::InvalidInput, "train mode needs an rng");
    if (cfg.dropout_p > 0.0) {
      const double scale = 1.0 / (1.0 - cfg.dropout_p);
      for (auto& v : x) v = rng->uniform() < cfg.dropout_p ? 0.0 : v * scale;
    }
    if (cfg.variant == Variant::Gaussian) {
      for (auto& v : x) v += rng->normal(0.0, cfg.gaussian_sigma);
    }
  }

  if (cfg.variant == Variant::Tda) {
    if (!cached_tda.empty()) {
      if (cached_tda.size() != cfg.extra_width()) {
        throw Error(ErrorKind::ShapeMismatch, "cached TDA features have the wrong width");
      }
      x.insert(x.end(), cached_tda.begin(), cached_tda.end());
    } else {
      const auto tda = extract_tda_features(x, cfg.reshape);
      x.insert(x.end(), tda.begin(), tda.end());
    }
  } else if (cfg.variant == Variant::TdaAttn) {
    if (side.size() != cfg.extra_width()) {
      throw Error(ErrorKind::ShapeMismatch, "attention features must have width " +
                                                std::to_string(cfg.extra_width()));
    }
    x.insert(x.end(), side.begin(), side.end());
  }
  return x;
}

std::vector<double> logits(const HeadModel& model, std::span<const double> features) {
  if (features.size() != model.feature_width) {
    throw Error(ErrorKind::ShapeMismatch, "feature width " + std::to_string(features.size()) +
                                              " != " + std::to_string(model.feature_width));
  }
  std::vector<double> z(model.num_labels);
  for (std::size_t l = 0; l < model.num_labels; ++l) {
    const double* row = model.weights.data() + l * model.feature_width;
    double acc = model.bias[l];
    for (std::size_t f = 0; f < model.feature_width; ++f) acc += row[f] * features[f];
    z[l] = acc;
  }
  return z;
}

namespace {

Prediction predict_features(const HeadModel& model, std::span<const double> features) {
  Prediction p;
  p.probs = softmax(logits(model, features));
  p.label = static_cast<std::size_t>(
      std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
  return p;
}

}  // namespace

Prediction forward(const HeadModel& model, const HeadConfig& cfg,
                   std::span<const double> embedding, Mode mode, Rng* rng,
                   std::span<const double> side) {
  model.check_against(cfg);
  return predict_features(model, build_features(cfg, embedding, mode, rng, side));
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
  // Clamp so a saturated softmax cannot produce inf.
  return -std::log(std::max(probs[label], 1e-300));
}

Gradient loss_and_gradient(const HeadModel& model,
                           std::span<const std::vector<double>> features,
                           std::span<const std::uint32_t> labels) {
  if (features.size() != labels.size() || features.empty()) {
    throw Error(ErrorKind::InvalidInput, "batch must be non-empty with one label per row");
  }
  Gradient g;
  g.weights.assign(model.weights.size(), 0.0);
  g.bias.assign(model.bias.size(), 0.0);
  const double inv_batch = 1.0 / static_cast<double>(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (labels[i] >= model.num_labels) throw Error(ErrorKind::InvalidLabel, "label out of range");
    auto probs = softmax(logits(model, features[i]));
    g.loss += cross_entropy(probs, labels[i]) * inv_batch;
    // dL/dz = (p - onehot) / B
    probs[labels[i]] -= 1.0;
    for (std::size_t l = 0; l < model.num_labels; ++l) {
      const double dz = probs[l] * inv_batch;
      g.bias[l] += dz;
      double* row = g.weights.data() + l * model.feature_width;
      const auto& x = features[i];
      for (std::size_t f = 0; f < model.feature_width; ++f) row[f] += dz * x[f];
    }
  }
  return g;
}

namespace {

class Adam {
 public:
  Adam(std::size_t n, double lr) : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, std::size_t t) {
    const double correction1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double correction2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      const double m_hat = m_[i] / correction1;
      const double v_hat = v_[i] / correction2;
      params[i] -= lr_ * m_hat / (std::sqrt(v_hat) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_;
  std::vector<double> m_;
  std::vector<double> v_;
};

void check_dataset(const Dataset& data, const HeadConfig& cfg, const Dataset* side) {
  for (const auto& r : data.records) {
    if (r.vector.size() != cfg.input_dim) {
      throw Error(ErrorKind::ShapeMismatch, "record width " + std::to_string(r.vector.size()) +
                                                " != " + std::to_string(cfg.input_dim));
    }
    if (r.label >= cfg.num_labels) {
      throw Error(ErrorKind::InvalidLabel, "label " + std::to_string(r.label) +
                                               " outside [0, " +
                                               std::to_string(cfg.num_labels) + ")");
    }
  }
  if (cfg.variant == Variant::TdaAttn) {
    if (side == nullptr || side->records.size() != data.records.size()) {
      throw Error(ErrorKind::ShapeMismatch,
                  "tda_attn needs one attention feature record per sample");
    }
  }
}

std::span<const double> side_of(const Dataset* side, std::size_t i) {
  if (side == nullptr) return {};
  return side->records[i].vector;
}

}  // namespace

HeadModel train(const Dataset& data, const HeadConfig& cfg, const Dataset* side) {
  cfg.validate();
  if (data.records.empty()) throw Error(ErrorKind::InvalidInput, "empty training set");
  check_dataset(data, cfg, side);

  HeadModel model = init_model(cfg);
  const Rng root(cfg.seed);
  Rng shuffle_rng = root.stream("head/shuffle");
  Rng step_rng = root.stream("head/step");

  std::vector<std::vector<double>> raw_tda;
  if (cfg.variant == Variant::Tda && cfg.tda_from_raw) {
    std::vector<std::vector<double>> embeddings;
    embeddings.reserve(data.records.size());
    for (const auto& r : data.records) embeddings.push_back(r.vector);
    raw_tda = extract_batch(embeddings, cfg.reshape);
  }

  Adam adam_w(model.weights.size(), cfg.learning_rate);
  Adam adam_b(model.bias.size(), cfg.learning_rate);
  std::vector<std::size_t> order(data.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  std::vector<std::vector<double>> batch;
  std::vector<std::uint32_t> batch_labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      batch_labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const auto cached = raw_tda.empty() ? std::span<const double>{}
                                            : std::span<const double>(raw_tda[idx]);
        batch.push_back(build_features(cfg, data.records[idx].vector, Mode::Train, &step_rng,
                                       side_of(side, idx), cached));
        batch_labels.push_back(data.records[idx].label);
      }
      const auto grad = loss_and_gradient(model, batch, batch_labels);
      ++step;
      adam_w.step(model.weights, grad.weights, step);
      adam_b.step(model.bias, grad.bias, step);
    }
  }
  return model;
}

std::vector<Prediction> predict(const HeadModel& model, const HeadConfig& cfg,
                                const Dataset& data, const Dataset* side) {
  model.check_against(cfg);
  check_dataset(data, cfg, side);
  std::vector<Prediction> out(data.records.size());
  parallel_for(data.records.size(), [&](std::size_t i) {
    out[i] = predict_features(
        model, build_features(cfg, data.records[i].vector, Mode::Eval, nullptr, side_of(side, i)));
  });
  return out;
}

MetricsReport evaluate(const HeadModel& model, const HeadConfig& cfg, const Dataset& data,
                       const Dataset* side) {
  if (data.records.empty()) throw Error(ErrorKind::InvalidInput, "empty evaluation set");
  const auto predictions = predict(model, cfg, data, side);
  std::vector<std::size_t> truth, predicted;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    truth.push_back(data.records[i].label);
    predicted.push_back(predictions[i].label);
  }
  return metrics_from_predictions(truth, predicted, cfg.num_labels);
}

// ---------------------------------------------------------------------------
// THD1 persistence

namespace {

constexpr char kModelMagic[4] = {'T', 'H', 'D', '1'};
constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& in, std::size_t& pos, int width) {
  if (pos + static_cast<std::size_t>(width) > in.size()) {
    throw Error(ErrorKind::CorruptFile, "truncated THD1 payload");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += static_cast<std::size_t>(width);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const HeadModel& model) {
  std::vector<std::uint8_t> out(kModelMagic, kModelMagic + 4);
  put_u32(out, kModelVersion);
  out.push_back(static_cast<std::uint8_t>(model.variant));
  put_u32(out, static_cast<std::uint32_t>(model.input_dim));
  put_u32(out, static_cast<std::uint32_t>(model.num_labels));
  put_u32(out, static_cast<std::uint32_t>(model.feature_width));
  for (double w : model.weights) put_f64(out, w);
  for (double b : model.bias) put_f64(out, b);
  return out;
}

HeadModel decode_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw Error(ErrorKind::FormatError, "missing THD1 magic");
  }
  std::size_t pos = 4;
  const auto version = get_le(bytes, pos, 4);
  if (version != kModelVersion) {
    throw Error(ErrorKind::FormatError, "unsupported THD1 version " + std::to_string(version));
  }
  const auto tag = get_le(bytes, pos, 1);
  if (tag > static_cast<std::uint64_t>(Variant::TdaAttn)) {
    throw Error(ErrorKind::FormatError, "unknown variant tag");
  }
  HeadModel model;
  model.variant = static_cast<Variant>(tag);
  model.input_dim = get_le(bytes, pos, 4);
  model.num_labels = get_le(bytes, pos, 4);
  model.feature_width = get_le(bytes, pos, 4);
  const std::size_t expected = pos + 8 * model.num_labels * (model.feature_width + 1);
  if (bytes.size() != expected) throw Error(ErrorKind::CorruptFile, "THD1 payload size mismatch");
  auto read_f64 = [&] {
    const std::uint64_t bits = get_le(bytes, pos, 8);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  };
  model.weights.resize(model.num_labels * model.feature_width);
  for (auto& w : model.weights) w = read_f64();
  model.bias.resize(model.num_labels);
  for (auto& b : model.bias) b = read_f64();
  return model;
}

std::filesystem::path config_sidecar(const std::filesystem::path& model_path) {
  auto p = model_path;
  p += ".json";
  return p;
}

void save_model(const std::filesystem::path& path, const HeadModel& model,
                const HeadConfig& cfg) {
  model.check_against(cfg);
  const auto bytes = encode_model(model);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  std::ofstream side(config_sidecar(path), std::ios::trunc);
  if (!side) throw Error(ErrorKind::IoError, "cannot write " + config_sidecar(path).string());
  side << config_to_json(cfg).dump(2) << '\n';
}

LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open model " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  LoadedModel loaded{decode_model(bytes), {}};
  std::ifstream side(config_sidecar(path));
  if (!side) throw Error(ErrorKind::IoError, "missing config sidecar for " + path.string());
  nlohmann::json j;
  try {
    side >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("bad config sidecar: ") + e.what());
  }
  loaded.config = config_from_json(j);
  loaded.model.check_against(loaded.config);
  return loaded;
}

}  // namespace topotext
