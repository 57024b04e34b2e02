#include "lmt/instruments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace lmt::instruments {

Measure parse_measure(std::string_view s) {
  if (s == "baseline") return Measure::baseline;
  if (s == "flow_adjusted") return Measure::flow_adjusted;
  throw ValidationError("unknown tightness measure '" + std::string(s) + "'");
}

namespace {

struct Counts {
  double v = 0.0;
  double u = 0.0;
  double log_theta = 0.0;
  bool defined = false;
};

Counts counts_of(const tightness::MarketCell& c, Measure m) {
  Counts out;
  if (m == Measure::baseline) {
    out.v = c.v_total;
    out.u = static_cast<double>(c.u);
    out.defined = c.theta_defined();
    if (out.defined) out.log_theta = std::log(c.theta);
  } else {
    if (!std::isfinite(c.v_flow) || !std::isfinite(c.u_flow))
      throw ValidationError("flow-adjusted measure requested but cells carry no flow counts");
    out.v = c.v_flow;
    out.u = c.u_flow;
    out.defined = std::isfinite(c.theta_flow) && c.theta_flow > 0.0;
    if (out.defined) out.log_theta = std::log(c.theta_flow);
  }
  return out;
}

}  // namespace

std::vector<InstrumentRow> build(const std::vector<tightness::MarketCell>& cells, Measure measure) {
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < cells.size(); ++i)
    groups[{cells[i].key.occupation, cells[i].key.year}].push_back(i);

  std::vector<InstrumentRow> out(cells.size());
  for (auto& [key, idx] : groups) {
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return cells[a].key.region < cells[b].key.region; });
    const std::size_t n = idx.size();
    std::vector<Counts> c(n);
    for (std::size_t k = 0; k < n; ++k) c[k] = counts_of(cells[idx[k]], measure);

    // pre[k] sums entries [0, k), suf[k] sums entries (k, n)
    std::vector<Counts> pre(n + 1), suf(n + 1);
    std::vector<int> pre_n(n + 1, 0), suf_n(n + 1, 0);
    for (std::size_t k = 0; k < n; ++k) {
      pre[k + 1] = pre[k];
      pre[k + 1].v += c[k].v;
      pre[k + 1].u += c[k].u;
      pre_n[k + 1] = pre_n[k];
      if (c[k].defined) {
        pre[k + 1].log_theta += c[k].log_theta;
        ++pre_n[k + 1];
      }
    }
    for (std::size_t k = n; k-- > 0;) {
      suf[k] = suf[k + 1];
      suf_n[k] = suf_n[k + 1];
      if (k + 1 < n) {
        suf[k].v += c[k + 1].v;
        suf[k].u += c[k + 1].u;
        if (c[k + 1].defined) {
          suf[k].log_theta += c[k + 1].log_theta;
          ++suf_n[k];
        }
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      auto& row = out[idx[k]];
      const int others = pre_n[k] + suf_n[k];
      if (others > 0) row.z1 = (pre[k].log_theta + suf[k].log_theta) / others;
      const double v = pre[k].v + suf[k].v;
      const double u = pre[k].u + suf[k].u;
      if (v > 0.0 && u > 0.0) row.z2 = std::log(v / u);
      if (v > 0.0) row.loo_log_v_sum = std::log(v);
    }
  }
  return out;
}

std::vector<double> z1(const std::vector<tightness::MarketCell>& cells, Measure measure) {
  auto rows = build(cells, measure);
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i].z1;
  return out;
}

std::vector<double> z2(const std::vector<tightness::MarketCell>& cells, Measure measure) {
  auto rows = build(cells, measure);
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i].z2;
  return out;
}

std::vector<double> loo_vacancy_sum(const std::vector<tightness::MarketCell>& cells,
                                    Measure measure) {
  auto rows = build(cells, measure);
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i].loo_log_v_sum;
  return out;
}

Interacted interact(std::span<const double> values, std::span<const std::string> groups,
                    std::vector<std::string> levels) {
  if (values.size() != groups.size())
    throw ValidationError("interact: values and groups differ in length");
  std::set<std::string> present(groups.begin(), groups.end());
  if (levels.empty()) levels.assign(present.begin(), present.end());
  Interacted out;
  for (const auto& level : levels) {
    if (!present.count(level)) {
      out.warnings.push_back("group '" + level + "' is empty; its column is dropped");
      continue;
    }
    std::vector<double> col(values.size(), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i)
      if (groups[i] == level) col[i] = values[i];
    out.levels.push_back(level);
    out.columns.push_back(std::move(col));
  }
  if (out.columns.size() < 2)
    throw ValidationError("interact needs at least two nonempty groups");
  return out;
}

csv::Table append_to_table(csv::Table t, const std::vector<InstrumentRow>& rows) {
  if (rows.size() != t.rows.size())
    throw ValidationError("instrument rows do not align with cells");
  t.header.insert(t.header.end(), {"z1", "z2", "loo_log_v_sum"});
  for (std::size_t i = 0; i < rows.size(); ++i)
    t.rows[i].insert(t.rows[i].end(),
                     {csv::format_double(rows[i].z1), csv::format_double(rows[i].z2),
                      csv::format_double(rows[i].loo_log_v_sum)});
  return t;
}

}  // namespace lmt::instruments
