#include "clusterkr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "clusterkr/error.hpp"
#include "clusterkr/format.hpp"

namespace ckr {

namespace {

bool same_bits(double a, double b) noexcept { return std::memcmp(&a, &b, sizeof(double)) == 0; }

// Minimal RFC 4180 record reader: quoted fields, doubled quotes, CRLF.
// Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line_no;
        field += ch;
      }
      continue;
    }
    if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\n') {
      ++line_no;
      if (!field.empty() && field.back() == '\r') field.pop_back();
      fields.push_back(std::move(field));
      return true;
    } else {
      field += ch;
    }
  }
  if (in_quotes) throw Error(ErrorKind::parse, "unterminated quoted field at line " + std::to_string(line_no));
  if (!any) return false;
  if (!field.empty() && field.back() == '\r') field.pop_back();
  fields.push_back(std::move(field));
  ++line_no;
  return true;
}

bool blank_record(const std::vector<std::string>& fields) {
  return fields.size() == 1 && fields[0].find_first_not_of(" \t\r") == std::string::npos;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorKind::schema, "missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

ClusteredDataset::ClusteredDataset(std::vector<Cluster> clusters, std::size_t d_ind, std::size_t d_cls)
    : d_ind_(d_ind), d_cls_(d_cls) {
  if (d_ind == 0) throw Error(ErrorKind::validation, "at least one individual-level regressor is required");
  const std::size_t dim = d_ind + d_cls;
  std::unordered_map<std::string, std::size_t> seen;
  ids_.reserve(clusters.size());
  for (std::size_t g = 0; g < clusters.size(); ++g) {
    Cluster& c = clusters[g];
    if (!seen.emplace(c.id, g).second)
      throw Error(ErrorKind::validation, "duplicate cluster id '" + c.id + "'");
    if (c.y.empty()) throw Error(ErrorKind::validation, "cluster '" + c.id + "' has no observations");
    if (c.y.size() != c.x.size())
      throw Error(ErrorKind::validation, "cluster '" + c.id + "': response and regressor row counts differ");
    for (std::size_t j = 0; j < c.y.size(); ++j) {
      const auto& row = c.x[j];
      if (row.size() != dim)
        throw Error(ErrorKind::validation, "cluster '" + c.id + "': regressor row has " +
                                               std::to_string(row.size()) + " coordinates, expected " +
                                               std::to_string(dim));
      if (!std::isfinite(c.y[j]) ||
          !std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); }))
        throw Error(ErrorKind::validation, "cluster '" + c.id + "': non-finite value");
      for (std::size_t q = d_ind; q < dim; ++q) {
        if (!same_bits(row[q], c.x[0][q]))
          throw Error(ErrorKind::validation, "cluster '" + c.id + "': cluster-level coordinate " +
                                                 std::to_string(q - d_ind) + " varies within the cluster");
      }
      y_.push_back(c.y[j]);
      x_.insert(x_.end(), row.begin(), row.end());
      cluster_of_.push_back(g);
    }
    offsets_.push_back(y_.size());
    ids_.push_back(std::move(c.id));
  }

  order_.resize(y_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return x_[a * dim] < x_[b * dim]; });
  sorted_first_.resize(order_.size());
  for (std::size_t k = 0; k < order_.size(); ++k) sorted_first_[k] = x_[order_[k] * dim];
}

Cluster ClusteredDataset::cluster(std::size_t g) const {
  if (g >= G()) throw_invalid("cluster index " + std::to_string(g) + " out of range");
  Cluster c;
  c.id = ids_[g];
  for (std::size_t i = cluster_begin(g); i < cluster_end(g); ++i) {
    c.y.push_back(y_[i]);
    auto row = x(i);
    c.x.emplace_back(row.begin(), row.end());
  }
  return c;
}

ClusteredDataset read_csv(std::istream& in, const ColumnSchema& schema) {
  if (schema.cluster_col.empty()) throw Error(ErrorKind::schema, "no cluster-id column given");
  if (schema.y_col.empty()) throw Error(ErrorKind::schema, "no response column given");
  if (schema.x_cols.empty()) throw Error(ErrorKind::schema, "at least one individual-level regressor column is required");

  std::size_t line_no = 0;
  std::vector<std::string> header;
  if (!read_record(in, header, line_no) || blank_record(header))
    throw Error(ErrorKind::validation, "no observations (empty file)");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  const std::size_t cid = find_column(header, schema.cluster_col);
  const std::size_t yid = find_column(header, schema.y_col);
  std::vector<std::size_t> xid;
  for (const auto& name : schema.x_cols) xid.push_back(find_column(header, name));
  for (const auto& name : schema.cluster_level_cols) xid.push_back(find_column(header, name));
  const std::size_t d_ind = schema.x_cols.size();

  std::vector<Cluster> clusters;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> fields;
  std::size_t rows = 0;
  while (true) {
    const std::size_t record_line = line_no + 1;
    if (!read_record(in, fields, line_no)) break;
    if (blank_record(fields)) continue;
    ++rows;
    if (fields.size() != header.size())
      throw Error(ErrorKind::parse, "line " + std::to_string(record_line) + ": expected " +
                                        std::to_string(header.size()) + " fields, found " +
                                        std::to_string(fields.size()));
    auto cell = [&](std::size_t col) {
      try {
        return parse_double(fields[col]);
      } catch (const Error& e) {
        throw Error(ErrorKind::parse, "line " + std::to_string(record_line) + ", column '" +
                                          header[col] + "': " + e.what());
      }
    };
    const std::string& id = fields[cid];
    if (id.empty())
      throw Error(ErrorKind::parse, "line " + std::to_string(record_line) + ": empty cluster id");
    auto [it, inserted] = index.emplace(id, clusters.size());
    if (inserted) clusters.push_back(Cluster{id, {}, {}});
    Cluster& c = clusters[it->second];
    c.y.push_back(cell(yid));
    std::vector<double> row;
    row.reserve(xid.size());
    for (std::size_t col : xid) row.push_back(cell(col));
    if (!c.x.empty()) {
      for (std::size_t q = d_ind; q < row.size(); ++q) {
        if (!same_bits(row[q], c.x.front()[q]))
          throw Error(ErrorKind::validation,
                      "cluster '" + id + "': cluster-level column '" +
                          schema.cluster_level_cols[q - d_ind] + "' varies within the cluster (line " +
                          std::to_string(record_line) + ")");
      }
    }
    c.x.push_back(std::move(row));
  }
  if (rows == 0) throw Error(ErrorKind::validation, "no observations");

  ClusteredDataset ds(std::move(clusters), d_ind, schema.cluster_level_cols.size());
  const auto s = size_summary(ds);
  if (!(s.sum_ng_sq >= s.n && s.n * s.n >= s.sum_ng_sq))
    throw Error(ErrorKind::validation, "inconsistent cluster-size aggregates");
  return ds;
}

ClusteredDataset load_csv(const std::filesystem::path& path, const ColumnSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  return read_csv(in, schema);
}

ClusterSizeSummary size_summary(const ClusteredDataset& ds) {
  ClusterSizeSummary s;
  s.n = ds.n();
  s.G = ds.G();
  for (std::size_t g = 0; g < ds.G(); ++g) {
    const std::size_t ng = ds.cluster_size(g);
    s.max_ng = std::max(s.max_ng, ng);
    s.sum_ng_sq += ng * ng;
  }
  s.mean_ng = s.G == 0 ? 0.0 : static_cast<double>(s.n) / static_cast<double>(s.G);
  return s;
}

ClusteredDataset drop_cluster(const ClusteredDataset& ds, std::size_t g) {
  if (g >= ds.G())
    throw_invalid("cluster index " + std::to_string(g) + " out of range (G=" + std::to_string(ds.G()) + ")");
  std::vector<Cluster> kept;
  kept.reserve(ds.G() - 1);
  for (std::size_t k = 0; k < ds.G(); ++k)
    if (k != g) kept.push_back(ds.cluster(k));
  return ClusteredDataset(std::move(kept), ds.d_ind(), ds.d_cls());
}

ClusteredDataset add_cluster(const ClusteredDataset& ds, Cluster cluster) {
  std::vector<Cluster> all;
  all.reserve(ds.G() + 1);
  for (std::size_t k = 0; k < ds.G(); ++k) all.push_back(ds.cluster(k));
  all.push_back(std::move(cluster));
  return ClusteredDataset(std::move(all), ds.d_ind(), ds.d_cls());
}

}  // namespace ckr
