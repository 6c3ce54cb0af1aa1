#include "topotext/corpus_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unordered_map>

#include "topotext/error.hpp"
#include "topotext/persistence.hpp"
#include "topotext/rng.hpp"

namespace topotext {

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    case Split::Unspecified: break;
  }
  return "unspecified";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "validation") return Split::Validation;
  if (name == "test") return Split::Test;
  if (name == "unspecified") return Split::Unspecified;
  throw Error(ErrorKind::InvalidParams, "unknown split '" + name + "'");
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& name : label_names) {
    if (!seen.insert(name).second) {
      throw Error(ErrorKind::FormatError, "duplicate label name '" + name + "'");
    }
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_labels(), 0);
  for (const auto& r : records) {
    if (r.label < counts.size()) ++counts[r.label];
  }
  return counts;
}

void Dataset::validate() const {
  manifest.validate();
  if (manifest.n_samples != records.size()) {
    throw Error(ErrorKind::CorruptFile, "manifest n_samples does not match record count");
  }
  for (const auto& r : records) {
    if (r.vector.size() != manifest.dim) {
      throw Error(ErrorKind::ShapeMismatch, "record width differs from dataset width");
    }
    if (r.label >= num_labels()) throw Error(ErrorKind::InvalidLabel, "label out of range");
  }
}

// ---------------------------------------------------------------------------
// EMB1

namespace {

constexpr char kEmbMagic[4] = {'E', 'M', 'B', '1'};
constexpr std::uint32_t kEmbVersion = 1;

class ByteWriter {
 public:
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u32(bits);
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorKind::CorruptFile, "truncated EMB1 payload");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw Error(ErrorKind::InvalidInput, std::string(what) + " exceeds u32");
  return static_cast<std::uint32_t>(v);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_emb1(const Dataset& dataset) {
  dataset.validate();
  ByteWriter w;
  w.raw(kEmbMagic, 4);
  w.u32(kEmbVersion);
  w.u32(checked_u32(dataset.records.size(), "n_samples"));
  w.u32(checked_u32(dataset.manifest.dim, "D"));
  w.u32(checked_u32(dataset.num_labels(), "n_labels"));
  for (const auto& name : dataset.manifest.label_names) {
    if (name.size() > 0xffff) throw Error(ErrorKind::InvalidInput, "label name too long");
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.raw(name.data(), name.size());
  }
  for (const auto& r : dataset.records) {
    w.u32(r.label);
    for (double v : r.vector) w.f32(static_cast<float>(v));
  }
  return w.take();
}

Dataset decode_emb1(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbMagic, 4) != 0) {
    throw Error(ErrorKind::FormatError, "missing EMB1 magic");
  }
  ByteReader r(bytes);
  r.str(4);
  if (r.remaining() < 16) throw Error(ErrorKind::FormatError, "truncated EMB1 header");
  const std::uint32_t version = r.u32();
  if (version != kEmbVersion) {
    throw Error(ErrorKind::FormatError, "unsupported EMB1 version " + std::to_string(version));
  }
  Dataset ds;
  const std::uint32_t n = r.u32();
  ds.manifest.dim = r.u32();
  const std::uint32_t n_labels = r.u32();
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    const std::uint16_t len = r.u16();
    ds.manifest.label_names.push_back(r.str(len));
  }
  ds.manifest.validate();

  const std::size_t record_bytes = 4 + 4 * ds.manifest.dim;
  if (r.remaining() != record_bytes * n) {
    throw Error(ErrorKind::CorruptFile, "EMB1 payload holds " + std::to_string(r.remaining()) +
                                            " bytes, header promises " +
                                            std::to_string(record_bytes * n));
  }
  ds.records.resize(n);
  for (auto& rec : ds.records) {
    rec.label = r.u32();
    if (rec.label >= n_labels) throw Error(ErrorKind::CorruptFile, "record label out of range");
    rec.label_name = ds.manifest.label_names[rec.label];
    rec.vector.resize(ds.manifest.dim);
    for (auto& v : rec.vector) v = r.f32();
  }
  ds.manifest.n_samples = n;
  return ds;
}

void write_emb1(const std::filesystem::path& path, const Dataset& dataset) {
  const auto bytes = encode_emb1(dataset);
  write_file(path, bytes.data(), bytes.size());
}

Dataset read_emb1(const std::filesystem::path& path) { return decode_emb1(read_file(path)); }

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace

double parse_real(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::ParseError, "not a number: '" + std::string(text) + "'");
  }
  return value;
}

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  Dataset ds;
  std::unordered_map<std::string, std::uint32_t> index;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto fields = split_fields(trimmed);
    if (!have_header) {
      if (trim(fields[0]) != "label" || fields.size() < 2) {
        throw Error(ErrorKind::FormatError, "CSV header must be label,f0,...");
      }
      ds.manifest.dim = fields.size() - 1;
      have_header = true;
      continue;
    }
    if (fields.size() != ds.manifest.dim + 1) {
      throw Error(ErrorKind::FormatError, "line " + std::to_string(line_no) + " has " +
                                              std::to_string(fields.size() - 1) +
                                              " features, header declares " +
                                              std::to_string(ds.manifest.dim));
    }
    EmbeddingRecord rec;
    rec.label_name = std::string(trim(fields[0]));
    auto [it, inserted] =
        index.try_emplace(rec.label_name, static_cast<std::uint32_t>(index.size()));
    if (inserted) ds.manifest.label_names.push_back(rec.label_name);
    rec.label = it->second;
    rec.vector.reserve(ds.manifest.dim);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      const double v = parse_real(fields[f]);
      if (!std::isfinite(v)) throw Error(ErrorKind::ParseError, "non-finite feature value");
      rec.vector.push_back(v);
    }
    ds.records.push_back(std::move(rec));
  }
  if (!have_header) throw Error(ErrorKind::FormatError, "empty CSV input");
  ds.manifest.n_samples = ds.records.size();
  return ds;
}

Dataset read_csv(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_csv(std::string(bytes.begin(), bytes.end()));
}

std::string to_csv(const Dataset& dataset) {
  std::ostringstream out;
  out << "label";
  for (std::size_t f = 0; f < dataset.manifest.dim; ++f) out << ",f" << f;
  out << '\n';
  for (const auto& r : dataset.records) {
    out << dataset.manifest.label_names.at(r.label);
    for (double v : r.vector) out << ',' << format_real(v);
    out << '\n';
  }
  return out.str();
}

Dataset read_dataset(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return read_csv(path);
  return read_emb1(path);
}

nlohmann::json manifest_to_json(const DatasetManifest& manifest) {
  return {{"n_samples", manifest.n_samples},
          {"dim", manifest.dim},
          {"labels", manifest.label_names},
          {"split", to_string(manifest.split)},
          {"generator", manifest.generator}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.n_samples = j.at("n_samples").get<std::size_t>();
    m.dim = j.at("dim").get<std::size_t>();
    m.label_names = j.at("labels").get<std::vector<std::string>>();
    m.split = parse_split(j.value("split", std::string("unspecified")));
    if (j.contains("generator")) m.generator = j.at("generator");
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("bad manifest: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic corpora

namespace {

std::vector<std::string> synthetic_label_names(std::size_t classes) {
  std::vector<std::string> names{"human"};
  for (std::size_t k = 1; k < classes; ++k) names.push_back("author_" + std::to_string(k));
  return names;
}

double round_to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

double imbalance_ratio(const std::vector<std::size_t>& counts) {
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  return *lo == 0 ? 0.0 : static_cast<double>(*hi) / static_cast<double>(*lo);
}

Dataset make_dataset(std::vector<std::string> names, std::size_t dim, Split split,
                     nlohmann::json generator) {
  Dataset ds;
  ds.manifest.label_names = std::move(names);
  ds.manifest.dim = dim;
  ds.manifest.split = split;
  ds.manifest.generator = std::move(generator);
  return ds;
}

}  // namespace

Dataset generate_mean_shift(const MeanShiftParams& params) {
  const std::size_t classes = params.per_class.size();
  if (classes < 2) throw Error(ErrorKind::InvalidParams, "need at least 2 classes");
  if (classes > params.dim) {
    throw Error(ErrorKind::InvalidParams, "more classes than dimensions for orthogonal means");
  }
  if (!(params.noise_sd >= 0.0) || !(params.shift_norm > 0.0)) {
    throw Error(ErrorKind::InvalidParams, "noise_sd must be >= 0 and shift_norm > 0");
  }

  const Rng root(params.seed);
  Rng mean_rng = root.stream("mean_shift/means");
  std::vector<std::vector<double>> means;
  for (std::size_t k = 0; k < classes; ++k) {
    std::vector<double> v(params.dim);
    for (auto& x : v) x = mean_rng.normal();
    // Gram-Schmidt, applied twice for numerical orthogonality.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& m : means) {
        double dot = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * m[i];
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * m[i];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    means.push_back(std::move(v));
  }

  auto ds = make_dataset(synthetic_label_names(classes), params.dim, params.split,
                         {{"name", "mean_shift"},
                          {"seed", params.seed},
                          {"per_class", params.per_class},
                          {"dim", params.dim},
                          {"shift_norm", params.shift_norm},
                          {"noise_sd", params.noise_sd},
                          {"imbalance_ratio", imbalance_ratio(params.per_class)}});

  Rng sample_rng = root.stream("mean_shift/" + to_string(params.split));
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t s = 0; s < params.per_class[k]; ++s) {
      EmbeddingRecord rec;
      rec.label = static_cast<std::uint32_t>(k);
      rec.label_name = ds.manifest.label_names[k];
      rec.vector.resize(params.dim);
      for (std::size_t i = 0; i < params.dim; ++i) {
        rec.vector[i] =
            round_to_f32(params.shift_norm * means[k][i] + params.noise_sd * sample_rng.normal());
      }
      ds.records.push_back(std::move(rec));
    }
  }
  ds.manifest.n_samples = ds.records.size();
  return ds;
}

Dataset generate_structure_shift(const StructureShiftParams& params) {
  const std::size_t classes = params.per_class.size();
  if (classes < 1) throw Error(ErrorKind::InvalidParams, "need at least 1 class");
  if (params.rows < 2 || params.dim % params.rows != 0) {
    throw Error(ErrorKind::InvalidParams, "rows must divide dim");
  }
  if (classes > params.rows) {
    throw Error(ErrorKind::InvalidParams, "classes (" + std::to_string(classes) +
                                              ") exceed rows (" + std::to_string(params.rows) +
                                              ")");
  }
  const std::size_t rows = params.rows;
  const std::size_t cols = params.dim / rows;

  auto ds = make_dataset(synthetic_label_names(classes), params.dim, params.split,
                         {{"name", "structure_shift"},
                          {"seed", params.seed},
                          {"per_class", params.per_class},
                          {"dim", params.dim},
                          {"rows", rows},
                          {"cluster_spread", params.cluster_spread},
                          {"center_spread", params.center_spread},
                          {"imbalance_ratio", imbalance_ratio(params.per_class)}});

  Rng rng = Rng(params.seed).stream("structure_shift/" + to_string(params.split));
  for (std::size_t k = 0; k < classes; ++k) {
    const std::size_t clusters = k + 1;
    const std::size_t count = params.per_class[k];
    const std::size_t first = ds.records.size();
    std::vector<double> centers(clusters * cols);
    while (ds.records.size() - first < count) {
      for (auto& c : centers) c = rng.normal(0.0, params.center_spread);
      std::vector<double> x(params.dim);
      for (std::size_t i = 0; i < rows; ++i) {
        const double* center = centers.data() + (i % clusters) * cols;
        for (std::size_t j = 0; j < cols; ++j) {
          x[i * cols + j] = center[j] + rng.normal(0.0, params.cluster_spread);
        }
      }
      for (std::size_t j = 0; j < cols; ++j) {
        double centroid = 0.0;
        for (std::size_t i = 0; i < rows; ++i) centroid += x[i * cols + j];
        centroid /= static_cast<double>(rows);
        for (std::size_t i = 0; i < rows; ++i) x[i * cols + j] -= centroid;
      }
      for (auto& v : x) v = round_to_f32(v);

      EmbeddingRecord rec{static_cast<std::uint32_t>(k), ds.manifest.label_names[k], x};
      ds.records.push_back(rec);
      if (ds.records.size() - first < count) {
        for (auto& v : rec.vector) v = -v;
        ds.records.push_back(std::move(rec));
      }
    }
    if (count % 2 == 1) {
      std::vector<double> mean(params.dim, 0.0);
      for (std::size_t s = first; s < ds.records.size(); ++s) {
        for (std::size_t i = 0; i < params.dim; ++i) mean[i] += ds.records[s].vector[i];
      }
      for (auto& m : mean) m /= static_cast<double>(count);
      for (std::size_t s = first; s < ds.records.size(); ++s) {
        for (std::size_t i = 0; i < params.dim; ++i) {
          ds.records[s].vector[i] = round_to_f32(ds.records[s].vector[i] - mean[i]);
        }
      }
    }
  }
  ds.manifest.n_samples = ds.records.size();
  return ds;
}

// ---------------------------------------------------------------------------
// Label regrouping

Dataset regroup_labels(const Dataset& dataset,
                       const std::map<std::string, std::string>& mapping) {
  const auto counts = dataset.class_counts();
  std::vector<std::uint32_t> fine_to_coarse(dataset.num_labels(), 0xffffffffu);
  std::vector<std::string> coarse_names;
  for (std::size_t k = 0; k < dataset.num_labels(); ++k) {
    const auto& fine = dataset.manifest.label_names[k];
    const auto it = mapping.find(fine);
    if (it == mapping.end()) {
      if (counts[k] > 0) throw Error(ErrorKind::MappingError, "label '" + fine + "' is unmapped");
      continue;
    }
    auto pos = std::find(coarse_names.begin(), coarse_names.end(), it->second);
    if (pos == coarse_names.end()) pos = coarse_names.insert(coarse_names.end(), it->second);
    fine_to_coarse[k] = static_cast<std::uint32_t>(pos - coarse_names.begin());
  }

  Dataset out;
  out.manifest = dataset.manifest;
  out.manifest.label_names = coarse_names;
  out.records.reserve(dataset.records.size());
  for (const auto& r : dataset.records) {
    EmbeddingRecord rec = r;
    rec.label = fine_to_coarse[r.label];
    rec.label_name = coarse_names[rec.label];
    out.records.push_back(std::move(rec));
  }
  out.manifest.n_samples = out.records.size();
  return out;
}

Dataset filter_labels(const Dataset& dataset, const std::set<std::string>& keep) {
  const auto& names = dataset.manifest.label_names;
  for (const auto& k : keep) {
    if (std::find(names.begin(), names.end(), k) == names.end()) {
      throw Error(ErrorKind::MappingError, "unknown label '" + k + "'");
    }
  }
  std::vector<std::uint32_t> remap(names.size(), 0xffffffffu);
  std::vector<std::string> kept;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (keep.count(names[k])) {
      remap[k] = static_cast<std::uint32_t>(kept.size());
      kept.push_back(names[k]);
    }
  }
  Dataset out;
  out.manifest = dataset.manifest;
  out.manifest.label_names = kept;
  for (const auto& r : dataset.records) {
    if (remap[r.label] == 0xffffffffu) continue;
    EmbeddingRecord rec = r;
    rec.label = remap[r.label];
    out.records.push_back(std::move(rec));
  }
  out.manifest.n_samples = out.records.size();
  return out;
}

}  // namespace topotext
