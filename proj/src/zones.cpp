#include "lmt/zones.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "lmt/common.hpp"
#include "lmt/parallel.hpp"

namespace lmt::zones {

FlowMatrix::FlowMatrix(std::vector<std::string> names)
    : names_(std::move(names)),
      flows_(names_.size() * names_.size(), 0.0),
      neighbors_(names_.size()) {}

FlowMatrix FlowMatrix::from_records(const std::vector<CommutingFlow>& flows,
                                    const std::vector<Adjacency>& adjacency) {
  std::set<std::string> names;
  for (const auto& f : flows) {
    names.insert(f.origin);
    names.insert(f.destination);
  }
  for (const auto& a : adjacency) {
    names.insert(a.a);
    names.insert(a.b);
  }
  FlowMatrix m(std::vector<std::string>(names.begin(), names.end()));
  for (const auto& f : flows) m.add_flow(m.index_of(f.origin), m.index_of(f.destination), f.commuters);
  for (const auto& a : adjacency) m.set_adjacent(m.index_of(a.a), m.index_of(a.b));
  if (!adjacency.empty()) m.has_adjacency_ = true;
  return m;
}

std::size_t FlowMatrix::index_of(const std::string& name) const {
  auto it = std::lower_bound(names_.begin(), names_.end(), name);
  if (it != names_.end() && *it == name) return static_cast<std::size_t>(it - names_.begin());
  // names are sorted for from_records; fall back to a scan otherwise
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  throw ValidationError("unknown district '" + name + "'");
}

void FlowMatrix::set_flow(std::size_t from, std::size_t to, double v) {
  if (v < 0.0) throw ValidationError("flows must be nonnegative");
  flows_[from * size() + to] = v;
}

double FlowMatrix::volume(std::size_t i) const {
  double v = 0.0;
  for (std::size_t j = 0; j < size(); ++j) v += flow(i, j) + flow(j, i);
  return v;
}

bool FlowMatrix::adjacent(std::size_t i, std::size_t j) const {
  const auto& nb = neighbors_[i];
  return std::find(nb.begin(), nb.end(), j) != nb.end();
}

void FlowMatrix::set_adjacent(std::size_t i, std::size_t j) {
  has_adjacency_ = true;
  if (i == j || adjacent(i, j)) return;
  neighbors_[i].push_back(j);
  neighbors_[j].push_back(i);
  std::sort(neighbors_[i].begin(), neighbors_[i].end());
  std::sort(neighbors_[j].begin(), neighbors_[j].end());
}

Assignment canonical(const Assignment& a) {
  std::unordered_map<std::size_t, std::size_t> relabel;
  Assignment out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [it, inserted] = relabel.emplace(a[i], relabel.size());
    out[i] = it->second;
  }
  return out;
}

std::size_t zone_count(const Assignment& a) {
  return std::set<std::size_t>(a.begin(), a.end()).size();
}

double modularity(const FlowMatrix& flows, const Assignment& assignment) {
  const std::size_t n = flows.size();
  if (assignment.size() != n) throw ValidationError("partition must cover every region");
  const Assignment zone = canonical(assignment);
  const std::size_t k = zone_count(zone);

  // edge weight m counts every undirected tie once, self loops once;
  // degrees count self loops twice so that sum(degree) = 2m.
  std::vector<double> internal(k, 0.0), degree(k, 0.0);
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double w = flows.tie(i, j);
      if (w == 0.0) continue;
      m += w;
      if (zone[i] == zone[j]) internal[zone[i]] += w;
      if (i == j) {
        degree[zone[i]] += 2.0 * w;
      } else {
        degree[zone[i]] += w;
        degree[zone[j]] += w;
      }
    }
  }
  if (!(m > 0.0)) throw ValidationError("modularity undefined: graph has no weight");
  double q = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double share = degree[c] / (2.0 * m);
    q += internal[c] / m - share * share;
  }
  return q;
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;  // the lower index stays root
  }

 private:
  std::vector<std::size_t> parent_;
};

FlowMatrix aggregate(const FlowMatrix& flows, const Assignment& zone, std::size_t k) {
  std::vector<std::string> names(k);
  std::vector<bool> named(k, false);
  for (std::size_t i = 0; i < flows.size(); ++i)
    if (!named[zone[i]]) {
      names[zone[i]] = flows.names()[i];
      named[zone[i]] = true;
    }
  FlowMatrix out(std::move(names));
  for (std::size_t i = 0; i < flows.size(); ++i)
    for (std::size_t j = 0; j < flows.size(); ++j) {
      const double f = flows.flow(i, j);
      if (f != 0.0) out.add_flow(zone[i], zone[j], f);
    }
  if (flows.has_adjacency()) {
    out.enable_adjacency();
    for (std::size_t i = 0; i < flows.size(); ++i)
      for (std::size_t j : flows.neighbors()[i])
        if (zone[i] != zone[j]) out.set_adjacent(zone[i], zone[j]);
  }
  return out;
}

// Connected pieces of zone z, each sorted ascending, ordered by their lowest member.
std::vector<std::vector<std::size_t>> pieces(const FlowMatrix& flows, const Assignment& a,
                                             std::size_t z) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<bool> seen(a.size(), false);
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (a[s] != z || seen[s]) continue;
    std::vector<std::size_t> piece{s}, stack{s};
    seen[s] = true;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : flows.neighbors()[v])
        if (a[w] == z && !seen[w]) {
          seen[w] = true;
          piece.push_back(w);
          stack.push_back(w);
        }
    }
    std::sort(piece.begin(), piece.end());
    out.push_back(std::move(piece));
  }
  return out;
}

}  // namespace

MergeResult merge_pass(const FlowMatrix& flows, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ValidationError("merge threshold must lie in (0, 1)");
  const std::size_t n = flows.size();
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double vol = flows.volume(i);
    if (!(vol > 0.0)) continue;
    std::size_t best = n;
    double best_w = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double w = flows.tie(i, j);
      if (w > best_w) {
        best_w = w;
        best = j;
      }
    }
    if (best < n && best_w / vol >= threshold) uf.unite(i, best);
  }
  Assignment roots(n);
  for (std::size_t i = 0; i < n; ++i) roots[i] = uf.find(i);
  MergeResult r;
  r.assignment = canonical(roots);
  const std::size_t k = zone_count(r.assignment);
  r.merges = n - k;
  r.merged = aggregate(flows, r.assignment, k);
  return r;
}

Assignment merge_to_fixpoint(const FlowMatrix& flows, double threshold, std::size_t* passes) {
  Assignment map(flows.size());
  std::iota(map.begin(), map.end(), 0);
  FlowMatrix current = flows;
  std::size_t merged_passes = 0;
  while (true) {
    auto step = merge_pass(current, threshold);
    if (step.merges == 0) break;
    for (auto& m : map) m = step.assignment[m];
    current = std::move(step.merged);
    ++merged_passes;
  }
  if (passes) *passes = merged_passes;
  return map;
}

bool is_contiguous(const FlowMatrix& flows, const Assignment& assignment) {
  if (!flows.has_adjacency()) return false;
  for (auto z : std::set<std::size_t>(assignment.begin(), assignment.end()))
    if (pieces(flows, assignment, z).size() > 1) return false;
  return true;
}

Assignment repair_contiguity(const FlowMatrix& flows, Assignment a) {
  if (!flows.has_adjacency()) return a;
  const std::size_t n = flows.size();
  std::size_t next_zone = a.empty() ? 0 : *std::max_element(a.begin(), a.end()) + 1;
  for (std::size_t guard = 0; guard < n * n + 1; ++guard) {
    bool changed = false;
    for (auto z : std::set<std::size_t>(a.begin(), a.end())) {
      auto parts = pieces(flows, a, z);
      if (parts.size() <= 1) continue;
      std::size_t keep = 0;
      for (std::size_t p = 1; p < parts.size(); ++p)
        if (parts[p].size() > parts[keep].size()) keep = p;
      for (std::size_t p = 0; p < parts.size(); ++p) {
        if (p == keep) continue;
        std::set<std::size_t> candidates;
        for (auto v : parts[p])
          for (auto w : flows.neighbors()[v])
            if (a[w] != z) candidates.insert(a[w]);
        std::size_t target = next_zone;
        double best = -1.0;
        for (auto c : candidates) {
          double w = 0.0;
          for (auto v : parts[p])
            for (std::size_t u = 0; u < n; ++u)
              if (a[u] == c) w += flows.tie(v, u);
          if (w > best) {
            best = w;
            target = c;
          }
        }
        if (target == next_zone) ++next_zone;
        for (auto v : parts[p]) a[v] = target;
      }
      changed = true;
      break;
    }
    if (!changed) return a;
  }
  throw EstimationError("contiguity repair did not terminate");
}

ZonePartition delineate(const FlowMatrix& flows, const std::vector<double>& grid, int threads) {
  if (grid.empty()) throw ValidationError("threshold grid must be nonempty");
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  auto finish = [&](Assignment a, std::optional<double> threshold, std::size_t passes) {
    ZonePartition p;
    if (flows.has_adjacency()) a = repair_contiguity(flows, std::move(a));
    p.assignment = canonical(a);
    p.q = modularity(flows, p.assignment);
    p.threshold = threshold;
    p.contiguous = is_contiguous(flows, p.assignment);
    p.passes = passes;
    p.zones = zone_count(p.assignment);
    return p;
  };

  std::vector<ZonePartition> results(sorted.size());
  parallel_for(sorted.size(), threads, [&](std::size_t k) {
    std::size_t passes = 0;
    auto a = merge_to_fixpoint(flows, sorted[k], &passes);
    results[k] = finish(std::move(a), sorted[k], passes);
  });

  std::size_t best = 0;
  for (std::size_t k = 1; k < results.size(); ++k)
    if (results[k].q > results[best].q) best = k;

  Assignment identity(flows.size());
  std::iota(identity.begin(), identity.end(), 0);
  auto unmerged = finish(std::move(identity), std::nullopt, 0);
  if (unmerged.q > results[best].q) return unmerged;
  return results[best];
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  auto bad = [&] { return ValidationError("bad threshold grid '" + spec + "'"); };
  if (spec.find(':') != std::string::npos) {
    auto p1 = spec.find(':');
    auto p2 = spec.find(':', p1 + 1);
    if (p2 == std::string::npos) throw bad();
    auto a = csv::parse_double(csv::trim(spec.substr(0, p1)));
    auto b = csv::parse_double(csv::trim(spec.substr(p1 + 1, p2 - p1 - 1)));
    auto s = csv::parse_double(csv::trim(spec.substr(p2 + 1)));
    if (!a || !b || !s || !(*s > 0.0) || *b < *a) throw bad();
    const auto steps = static_cast<long>(std::floor((*b - *a) / *s + 1e-9));
    for (long k = 0; k <= steps; ++k) out.push_back(std::round((*a + k * *s) * 1e12) / 1e12);
  } else {
    std::size_t start = 0;
    while (start <= spec.size()) {
      auto pos = spec.find(',', start);
      auto tok = csv::trim(spec.substr(start, pos == std::string::npos ? std::string::npos
                                                                        : pos - start));
      auto v = csv::parse_double(tok);
      if (!v) throw bad();
      out.push_back(*v);
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
  }
  for (double t : out)
    if (!(t > 0.0 && t < 1.0)) throw bad();
  return out;
}

csv::Table partition_to_table(const FlowMatrix& flows, const ZonePartition& p) {
  csv::Table t;
  t.header = {"district", "zone", "threshold", "q"};
  const std::string thr = p.threshold ? csv::format_double(*p.threshold) : "NA";
  const std::string q = csv::format_double(p.q);
  for (std::size_t i = 0; i < flows.size(); ++i)
    t.rows.push_back({flows.names()[i], std::to_string(p.assignment[i] + 1), thr, q});
  return t;
}

std::map<std::string, std::string> read_zone_map(const csv::Table& t) {
  const auto c_d = t.require_column("district", "partition");
  const auto c_z = t.require_column("zone", "partition");
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() <= std::max(c_d, c_z) || row[c_d].empty() || row[c_z].empty())
      throw ValidationError("partition line " + std::to_string(t.line_numbers[i]) +
                            ": malformed row");
    if (!out.emplace(row[c_d], row[c_z]).second)
      throw ValidationError("partition line " + std::to_string(t.line_numbers[i]) +
                            ": duplicate district " + row[c_d]);
  }
  return out;
}

}  // namespace lmt::zones
