#include "topotext/persistence.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <tuple>

#include "topotext/error.hpp"

namespace topotext {

PointCloud::PointCloud(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (rows_ < 2) throw Error(ErrorKind::InvalidInput, "point cloud needs at least 2 points");
  if (cols_ < 1) throw Error(ErrorKind::InvalidInput, "point cloud needs at least 1 coordinate");
  if (values_.size() != rows_ * cols_) {
    throw Error(ErrorKind::ShapeMismatch, "point cloud has " + std::to_string(values_.size()) +
                                              " values, expected " +
                                              std::to_string(rows_ * cols_));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidInput, "non-finite coordinate");
  }
}

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  if (values_.size() != n_ * n_) {
    throw Error(ErrorKind::ShapeMismatch, "distance matrix must be n*n");
  }
  for (std::size_t i = 0; i < n_; ++i) {
    if (values_[i * n_ + i] != 0.0) {
      throw Error(ErrorKind::InvalidInput, "distance matrix diagonal must be zero");
    }
    for (std::size_t j = i + 1; j < n_; ++j) {
      const double a = values_[i * n_ + j];
      if (!std::isfinite(a) || a < 0.0 || a != values_[j * n_ + i]) {
        throw Error(ErrorKind::InvalidInput,
                    "distance matrix must be symmetric, finite and non-negative");
      }
    }
  }
}

double DistanceMatrix::max_entry() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

std::vector<PersistencePair> PersistenceDiagram::in_dim(int dim) const {
  std::vector<PersistencePair> out;
  for (const auto& p : pairs) {
    if (p.dim == dim) out.push_back(p);
  }
  return out;
}

std::size_t PersistenceDiagram::betti(int dim, double t) const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [&](const auto& p) {
    return p.dim == dim && p.birth <= t && t < p.death;
  }));
}

DistanceMatrix pairwise_distances(const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = cloud.point(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto b = cloud.point(j);
      double sum = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        const double diff = a[k] - b[k];
        sum += diff * diff;
      }
      const double dist = std::sqrt(sum);
      if (!std::isfinite(dist)) throw Error(ErrorKind::InvalidInput, "distance overflow");
      d[i * n + j] = dist;
      d[j * n + i] = dist;
    }
  }
  return DistanceMatrix(n, std::move(d));
}

namespace {

struct Edge {
  double value;
  std::uint32_t u;
  std::uint32_t v;
};

bool edge_order(const Edge& a, const Edge& b) {
  return std::tie(a.value, a.u, a.v) < std::tie(b.value, b.u, b.v);
}

std::vector<Edge> sorted_edges(const DistanceMatrix& d, double threshold) {
  const std::size_t n = d.size();
  std::vector<Edge> edges;
  edges.reserve(n * (n - 1) / 2);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      if (d(i, j) <= threshold) edges.push_back({d(i, j), i, j});
    }
  }
  std::sort(edges.begin(), edges.end(), edge_order);
  return edges;
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return true;
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
};

// Z/2 column: sorted row indices.
using Column = std::vector<std::uint32_t>;

void add_column(Column& target, const Column& source, Column& scratch) {
  scratch.clear();
  std::set_symmetric_difference(target.begin(), target.end(), source.begin(), source.end(),
                                std::back_inserter(scratch));
  target.swap(scratch);
}

constexpr std::uint32_t kNone = 0xffffffffu;

}  // namespace

std::vector<PersistencePair> persistence_h0(const DistanceMatrix& d) {
  const std::size_t n = d.size();
  if (n < 2) throw Error(ErrorKind::InvalidInput, "H0 needs at least 2 points");
  const auto edges = sorted_edges(d, kInfinity);
  UnionFind components(n);
  std::vector<PersistencePair> pairs;
  pairs.reserve(n - 1);
  for (const auto& e : edges) {
    if (components.unite(e.u, e.v)) {
      pairs.push_back({0, 0.0, e.value});
      if (pairs.size() == n - 1) break;
    }
  }
  return pairs;
}

std::vector<PersistencePair> persistence_h1(const DistanceMatrix& d, double threshold,
                                            bool keep_zero_persistence) {
  if (!(threshold >= 0.0)) throw Error(ErrorKind::InvalidInput, "threshold must be >= 0");
  const std::size_t n = d.size();
  std::vector<PersistencePair> result;
  if (n < 3) return result;

  const auto edges = sorted_edges(d, threshold);
  std::vector<std::uint32_t> edge_position(n * n, kNone);
  for (std::uint32_t e = 0; e < edges.size(); ++e) {
    edge_position[edges[e].u * n + edges[e].v] = e;
  }

  struct Triangle {
    double value;
    std::uint32_t a, b, c;
  };
  std::vector<Triangle> triangles;
  for (std::uint32_t a = 0; a < n; ++a) {
    for (std::uint32_t b = a + 1; b < n; ++b) {
      if (d(a, b) > threshold) continue;
      for (std::uint32_t c = b + 1; c < n; ++c) {
        const double value = std::max({d(a, b), d(a, c), d(b, c)});
        if (value <= threshold) triangles.push_back({value, a, b, c});
      }
    }
  }
  std::sort(triangles.begin(), triangles.end(), [](const Triangle& x, const Triangle& y) {
    return std::tie(x.value, x.a, x.b, x.c) < std::tie(y.value, y.a, y.b, y.c);
  });

  // Triangle columns are reduced first; every pivot edge they produce is
  // positive, so its own column is cleared without reduction.
  std::vector<std::uint32_t> pivot_owner(edges.size(), kNone);
  std::vector<Column> reduced(triangles.size());
  std::vector<bool> cleared(edges.size(), false);
  Column scratch;
  for (std::uint32_t t = 0; t < triangles.size(); ++t) {
    const auto& tri = triangles[t];
    Column col = {edge_position[tri.a * n + tri.b], edge_position[tri.a * n + tri.c],
                  edge_position[tri.b * n + tri.c]};
    std::sort(col.begin(), col.end());
    while (!col.empty() && pivot_owner[col.back()] != kNone) {
      add_column(col, reduced[pivot_owner[col.back()]], scratch);
    }
    if (col.empty()) continue;
    const std::uint32_t low = col.back();
    pivot_owner[low] = t;
    cleared[low] = true;
    const double birth = edges[low].value;
    if (keep_zero_persistence || tri.value > birth) {
      result.push_back({1, birth, tri.value});
    }
    reduced[t] = std::move(col);
  }

  // Remaining edge columns: a column reducing to zero is a cycle that no
  // triangle below the threshold kills.
  std::vector<std::uint32_t> vertex_owner(n, kNone);
  std::vector<Column> edge_reduced(edges.size());
  for (std::uint32_t e = 0; e < edges.size(); ++e) {
    if (cleared[e]) continue;
    Column col = {edges[e].u, edges[e].v};
    while (!col.empty() && vertex_owner[col.back()] != kNone) {
      add_column(col, edge_reduced[vertex_owner[col.back()]], scratch);
    }
    if (col.empty()) {
      result.push_back({1, edges[e].value, kInfinity});
      continue;
    }
    vertex_owner[col.back()] = e;
    edge_reduced[e] = std::move(col);
  }

  std::sort(result.begin(), result.end(), [](const auto& x, const auto& y) {
    return std::tie(x.birth, x.death) < std::tie(y.birth, y.death);
  });
  return result;
}

double enclosing_radius(const DistanceMatrix& d) {
  double best = kInfinity;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double farthest = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j) farthest = std::max(farthest, d(i, j));
    best = std::min(best, farthest);
  }
  return d.size() == 0 ? 0.0 : best;
}

PersistenceDiagram compute_diagram(const PointCloud& cloud, int max_dim, const H1Options& h1) {
  if (max_dim < 0 || max_dim > 1) {
    throw Error(ErrorKind::InvalidInput, "max homology dimension must be 0 or 1");
  }
  const auto d = pairwise_distances(cloud);
  PersistenceDiagram diagram;
  diagram.num_points = cloud.size();
  diagram.ambient_dim = cloud.dim();
  diagram.max_dim = max_dim;
  diagram.pairs = persistence_h0(d);
  diagram.pairs.push_back({0, 0.0, kInfinity});
  if (max_dim >= 1) {
    const double threshold = h1.threshold < 0.0 ? enclosing_radius(d) : h1.threshold;
    auto loops = persistence_h1(d, threshold, h1.keep_zero_persistence);
    diagram.pairs.insert(diagram.pairs.end(), loops.begin(), loops.end());
  }
  return diagram;
}

std::string format_real(double value) {
  if (value == kInfinity) return "inf";
  if (value == -kInfinity) return "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string diagram_to_csv(const PersistenceDiagram& diagram) {
  std::ostringstream out;
  out << "dim,birth,death\n";
  for (const auto& p : diagram.pairs) {
    out << p.dim << ',' << format_real(p.birth) << ',' << format_real(p.death) << '\n';
  }
  return out.str();
}

std::string diagram_to_json(const PersistenceDiagram& diagram) {
  std::ostringstream out;
  out << "{\"pairs\":[";
  for (std::size_t i = 0; i < diagram.pairs.size(); ++i) {
    const auto& p = diagram.pairs[i];
    if (i) out << ',';
    out << "{\"dim\":" << p.dim << ",\"birth\":" << format_real(p.birth) << ",\"death\":";
    if (p.is_finite()) {
      out << format_real(p.death);
    } else {
      out << "\"inf\"";
    }
    out << '}';
  }
  out << "]}";
  return out.str();
}

}  // namespace topotext
