#pragma once

// Vietoris-Rips persistent homology in dimensions 0 and 1 over Z/2.

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace topotext {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// r points in R^c stored row-major.
class PointCloud {
 public:
  PointCloud(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t size() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return cols_; }
  std::span<const double> point(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

/// Dense symmetric distance matrix with zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix(std::size_t n, std::vector<double> values);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  std::span<const double> values() const noexcept { return values_; }
  double max_entry() const;

 private:
  std::size_t n_;
  std::vector<double> values_;
};

struct PersistencePair {
  int dim = 0;
  double birth = 0.0;
  double death = kInfinity;

  double persistence() const { return death - birth; }
  bool is_finite() const { return death != kInfinity; }
  friend bool operator==(const PersistencePair&, const PersistencePair&) = default;
};

struct PersistenceDiagram {
  std::vector<PersistencePair> pairs;
  std::size_t num_points = 0;
  std::size_t ambient_dim = 0;
  int max_dim = 0;

  std::vector<PersistencePair> in_dim(int dim) const;
  /// Number of dim-d bars alive at radius t (birth <= t < death).
  std::size_t betti(int dim, double t) const;
};

struct H1Options {
  /// Simplices with filtration value above this are left out. Negative means
  /// "use the enclosing radius".
  double threshold = -1.0;
  bool keep_zero_persistence = false;
};

DistanceMatrix pairwise_distances(const PointCloud& cloud);

/// Finite H0 pairs (birth 0, death = MST edge weight), sorted by death.
/// The single infinite bar is not part of the result.
std::vector<PersistencePair> persistence_h0(const DistanceMatrix& d);

/// H1 pairs of the Rips filtration truncated at `threshold`. Classes still
/// alive at the threshold are reported with infinite death. Sorted by
/// (birth, death).
std::vector<PersistencePair> persistence_h1(const DistanceMatrix& d, double threshold,
                                            bool keep_zero_persistence = false);

/// min_i max_j d(i, j). The Rips complex is a cone beyond this radius.
double enclosing_radius(const DistanceMatrix& d);

/// Full diagram: finite H0 pairs, the infinite H0 bar, and H1 when
/// max_dim >= 1.
PersistenceDiagram compute_diagram(const PointCloud& cloud, int max_dim = 0,
                                   const H1Options& h1 = {});

/// Diagram export. Numbers use the shortest round-trip representation;
/// infinite deaths are written as `inf`.
std::string diagram_to_csv(const PersistenceDiagram& diagram);
std::string diagram_to_json(const PersistenceDiagram& diagram);

/// Shortest decimal string that round-trips to `value`; `inf` for +infinity.
std::string format_real(double value);

}  // namespace topotext
