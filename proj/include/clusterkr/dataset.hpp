#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

namespace ckr {

/// One cluster as supplied by a caller. Rows of `x` hold the individual-level
/// coordinates first, then the cluster-level ones.
struct Cluster {
  std::string id;
  std::vector<double> y;
  std::vector<std::vector<double>> x;
};

struct ClusterSizeSummary {
  std::size_t n = 0;
  std::size_t G = 0;
  std::size_t max_ng = 0;
  std::size_t sum_ng_sq = 0;
  double mean_ng = 0.0;

  /// (1/n) sum_g n_g^2
  double mean_sq_size() const noexcept {
    return n == 0 ? 0.0 : static_cast<double>(sum_ng_sq) / static_cast<double>(n);
  }
};

/// Immutable clustered sample. Observations are stored contiguously in
/// cluster order; cluster g owns the half-open index range
/// [cluster_begin(g), cluster_end(g)).
///
/// A dataset may be empty (n = 0) only as the result of drop_cluster on a
/// single-cluster sample; estimators reject it.
class ClusteredDataset {
 public:
  ClusteredDataset() = default;
  ClusteredDataset(std::vector<Cluster> clusters, std::size_t d_ind, std::size_t d_cls);

  std::size_t n() const noexcept { return y_.size(); }
  std::size_t G() const noexcept { return ids_.size(); }
  std::size_t d() const noexcept { return d_ind_ + d_cls_; }
  std::size_t d_ind() const noexcept { return d_ind_; }
  std::size_t d_cls() const noexcept { return d_cls_; }
  bool empty() const noexcept { return y_.empty(); }

  std::span<const double> x(std::size_t i) const noexcept {
    return {x_.data() + i * d(), d()};
  }
  std::span<const double> x_ind(std::size_t i) const noexcept {
    return {x_.data() + i * d(), d_ind_};
  }
  std::span<const double> x_cls(std::size_t i) const noexcept {
    return {x_.data() + i * d() + d_ind_, d_cls_};
  }
  double y(std::size_t i) const noexcept { return y_[i]; }
  std::span<const double> ys() const noexcept { return y_; }
  /// Row-major n x d regressor matrix.
  std::span<const double> xs() const noexcept { return x_; }

  std::size_t cluster_of(std::size_t i) const noexcept { return cluster_of_[i]; }
  std::size_t cluster_begin(std::size_t g) const noexcept { return offsets_[g]; }
  std::size_t cluster_end(std::size_t g) const noexcept { return offsets_[g + 1]; }
  std::size_t cluster_size(std::size_t g) const noexcept { return offsets_[g + 1] - offsets_[g]; }
  const std::string& cluster_id(std::size_t g) const noexcept { return ids_[g]; }

  Cluster cluster(std::size_t g) const;

  /// Observation indices stably sorted by the first regressor coordinate,
  /// and the matching sorted coordinate values. Used for window searches.
  std::span<const std::size_t> sorted_order() const noexcept { return order_; }
  std::span<const double> sorted_first() const noexcept { return sorted_first_; }

 private:
  std::size_t d_ind_ = 1;
  std::size_t d_cls_ = 0;
  std::vector<std::string> ids_;
  std::vector<std::size_t> offsets_{0};
  std::vector<double> y_;
  std::vector<double> x_;
  std::vector<std::size_t> cluster_of_;
  std::vector<std::size_t> order_;
  std::vector<double> sorted_first_;
};

/// Column roles for CSV ingestion.
struct ColumnSchema {
  std::string cluster_col;
  std::string y_col;
  std::vector<std::string> x_cols;
  std::vector<std::string> cluster_level_cols;
};

ClusteredDataset load_csv(const std::filesystem::path& path, const ColumnSchema& schema);
ClusteredDataset read_csv(std::istream& in, const ColumnSchema& schema);

ClusterSizeSummary size_summary(const ClusteredDataset& ds);

ClusteredDataset drop_cluster(const ClusteredDataset& ds, std::size_t g);

/// Appends a cluster at the end (inverse of drop_cluster up to cluster order).
ClusteredDataset add_cluster(const ClusteredDataset& ds, Cluster cluster);

}  // namespace ckr
