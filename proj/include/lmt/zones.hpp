#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lmt/csv.hpp"
#include "lmt/data_model.hpp"

namespace lmt::zones {

// Dense n x n commuting matrix over regions plus an optional symmetric
// neighborhood relation. flow(i, i) is within-region commuting.
class FlowMatrix {
 public:
  FlowMatrix() = default;
  explicit FlowMatrix(std::vector<std::string> names);

  // Regions are the sorted union of all district names in both tables.
  static FlowMatrix from_records(const std::vector<CommutingFlow>& flows,
                                 const std::vector<Adjacency>& adjacency);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t index_of(const std::string& name) const;

  double flow(std::size_t from, std::size_t to) const { return flows_[from * size() + to]; }
  void set_flow(std::size_t from, std::size_t to, double v);
  void add_flow(std::size_t from, std::size_t to, double v) { flows_[from * size() + to] += v; }

  // Undirected tie weight: flow(i,j) + flow(j,i) for i != j, flow(i,i) on the diagonal.
  double tie(std::size_t i, std::size_t j) const {
    return i == j ? flow(i, i) : flow(i, j) + flow(j, i);
  }
  // Total commuting volume touching region i (outflows plus inflows).
  double volume(std::size_t i) const;

  bool has_adjacency() const { return has_adjacency_; }
  bool adjacent(std::size_t i, std::size_t j) const;
  void set_adjacent(std::size_t i, std::size_t j);
  void enable_adjacency() { has_adjacency_ = true; }
  const std::vector<std::vector<std::size_t>>& neighbors() const { return neighbors_; }

 private:
  std::vector<std::string> names_;
  std::vector<double> flows_;
  std::vector<std::vector<std::size_t>> neighbors_;
  bool has_adjacency_ = false;
};

// Region index -> zone id. Zone ids need not be contiguous.
using Assignment = std::vector<std::size_t>;

// Relabels zones 0..k-1 in order of first appearance.
Assignment canonical(const Assignment& a);
std::size_t zone_count(const Assignment& a);

// Weighted Newman modularity on the symmetrized flow graph. Throws
// ValidationError when the graph carries no weight.
double modularity(const FlowMatrix& flows, const Assignment& assignment);

struct MergeResult {
  FlowMatrix merged;      // flows re-aggregated at the merged level
  Assignment assignment;  // input region -> merged region (canonical)
  std::size_t merges = 0;
};

// One pass of dominant-flow merging: every region joins its strongest
// partner when that tie carries at least `threshold` of the region's
// commuting volume. Merges are applied as union-find.
MergeResult merge_pass(const FlowMatrix& flows, double threshold);

// Iterates merge_pass until nothing merges. Returns the district-level
// assignment; `passes` receives the number of passes that merged something.
Assignment merge_to_fixpoint(const FlowMatrix& flows, double threshold,
                             std::size_t* passes = nullptr);

bool is_contiguous(const FlowMatrix& flows, const Assignment& assignment);

// Moves every detached piece of a zone into the adjacent zone it shares the
// largest tie weight with, until all zones are contiguous. Pieces without
// any adjacent zone become zones of their own.
Assignment repair_contiguity(const FlowMatrix& flows, Assignment assignment);

struct ZonePartition {
  Assignment assignment;
  double q = 0.0;
  std::optional<double> threshold;  // nullopt: the unmerged district partition won
  bool contiguous = false;
  std::size_t passes = 0;
  std::size_t zones = 0;
};

ZonePartition delineate(const FlowMatrix& flows, const std::vector<double>& grid,
                        int threads = 1);

// "start:stop:step", inclusive of stop; or a comma separated list.
std::vector<double> parse_grid(const std::string& spec);

csv::Table partition_to_table(const FlowMatrix& flows, const ZonePartition& p);

// district -> zone label, read from a partition table (district, zone, ...).
std::map<std::string, std::string> read_zone_map(const csv::Table& t);

}  // namespace lmt::zones
