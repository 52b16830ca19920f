#pragma once

// JSON and text renderings of analysis results. Reports carry everything a
// viewer needs (values, heat positions, colors), so they can be re-rendered
// without the engine.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moviz/access_sim.hpp"
#include "moviz/cache_model.hpp"
#include "moviz/heatmap.hpp"
#include "moviz/movement.hpp"

namespace moviz::report {

using nlohmann::json;

inline json bindings_json(const Bindings& b) {
  json j = json::object();
  for (const auto& [k, v] : b) j[k] = v;
  return j;
}

inline json rational_json(const std::optional<Rational>& r) {
  if (!r) return nullptr;
  return {{"num", r->num}, {"den", r->den}, {"value", r->value()}};
}

inline json scale_json(const heatmap::ColorScale& s) {
  auto [lo, hi] = s.interval();
  auto legend = s.legend();
  json j = {{"method", heatmap::to_string(s.method())},
            {"interval", {lo, hi}},
            {"legend", {legend[0], legend[1], legend[2]}}};
  if (s.method() == heatmap::Method::Mean || s.method() == heatmap::Method::Median) j["center"] = s.center();
  if (s.method() == heatmap::Method::Histogram) j["buckets"] = s.buckets();
  return j;
}

inline json heat_json(const heatmap::ColorScale& s, double v) {
  double pos = s.position(v);
  return {{"position", pos}, {"color", heatmap::color(pos).hex()}};
}

inline json indices_json(const ContainerLayout& l, Int flat) { return l.unflat(flat); }

/// Per-edge logical movement with heat positions over edge bytes.
inline json movement_overlay(const Program& p, const MetricSet& m, heatmap::Method method) {
  json edges = json::array();
  std::vector<double> values(m.edge_bytes.begin(), m.edge_bytes.end());
  std::optional<heatmap::ColorScale> scale;
  if (!values.empty()) scale = heatmap::ColorScale::fit(values, method);
  for (std::size_t s = 0; s < p.states.size(); ++s) {
    for (const auto& e : p.states[s].edges) {
      json j = {{"id", e.id},
                {"state", p.states[s].name},
                {"src", e.src},
                {"dst", e.dst},
                {"container", e.container},
                {"kind", to_string(e.kind)},
                {"volume", derived_volume(e, p).str()},
                {"elements", m.edge_elements[e.id]},
                {"bytes", m.edge_bytes[e.id]}};
      j.update(heat_json(*scale, static_cast<double>(m.edge_bytes[e.id])));
      edges.push_back(std::move(j));
    }
  }
  json out = {{"edges", std::move(edges)}, {"sequence", m.sequence}};
  out["scale"] = scale ? scale_json(*scale) : json(nullptr);
  return out;
}

/// Per-node arithmetic intensity with heat positions; nodes without incident
/// bytes carry a null intensity and no position.
inline json intensity_overlay(const Program& p, const MetricSet& m, heatmap::Method method) {
  std::vector<double> values;
  for (const auto& n : m.nodes) {
    if (n.intensity) values.push_back(n.intensity->value());
  }
  std::optional<heatmap::ColorScale> scale;
  if (!values.empty()) scale = heatmap::ColorScale::fit(values, method);
  json nodes = json::array();
  for (const auto& n : m.nodes) {
    json j = {{"state", p.states[n.state].name},
              {"id", n.id},
              {"type", p.states[n.state].nodes[n.node].type_name()},
              {"ops", n.total_ops},
              {"bytes", n.incident_bytes},
              {"intensity", rational_json(n.intensity)}};
    if (n.intensity) j.update(heat_json(*scale, n.intensity->value()));
    nodes.push_back(std::move(j));
  }
  json out = {{"nodes", std::move(nodes)}, {"sequence", m.sequence}};
  out["scale"] = scale ? scale_json(*scale) : json(nullptr);
  return out;
}

inline json tasklets_json(const Program& p, const MetricSet& m) {
  json out = json::array();
  for (const auto& t : m.tasklets) {
    out.push_back({{"state", p.states[t.state].name},
                   {"id", t.id},
                   {"ops_per_execution", t.ops_per_execution},
                   {"executions", t.executions},
                   {"total_ops", t.total_ops}});
  }
  return out;
}

/// Global view: logical movement and intensity under one scale method.
inline json global_report(const Program& p, const MetricSet& m, heatmap::Method method) {
  return {{"program", p.name},
          {"bindings", bindings_json(m.bindings)},
          {"movement", movement_overlay(p, m, method)},
          {"intensity", intensity_overlay(p, m, method)},
          {"tasklets", tasklets_json(p, m)}};
}

inline json config_json(const CacheConfig& c) {
  json j = {{"line_size", c.line_size}};
  if (c.capacity_threshold) {
    j["capacity_threshold"] = *c.capacity_threshold;
  } else {
    j["capacity_threshold"] = "inf";
  }
  return j;
}

inline json miss_json(const MissCounts& m) {
  return {{"cold", m.cold}, {"capacity", m.capacity}, {"hit", m.hit}, {"misses", m.misses()}, {"total", m.total()}};
}

inline json misses_json(const AccessTrace& t, const MissStats& s) {
  json containers = json::array();
  for (std::size_t c = 0; c < s.containers.size(); ++c) {
    json j = miss_json(s.containers[c]);
    j["container"] = t.layouts[c].name;
    containers.push_back(std::move(j));
  }
  json edges = json::array();
  for (std::size_t e = 0; e < s.edges.size(); ++e) {
    json j = miss_json(s.edges[e]);
    j["id"] = e;
    edges.push_back(std::move(j));
  }
  return {{"config", config_json(s.config)},
          {"total", miss_json(s.total)},
          {"containers", std::move(containers)},
          {"edges", std::move(edges)}};
}

inline json physical_json(const Program& p, const PhysicalMovement& m) {
  json edges = json::array();
  for (std::size_t e = 0; e < m.edge_bytes.size(); ++e) {
    const Memlet& me = p.edge(e);
    edges.push_back({{"id", e}, {"src", me.src}, {"dst", me.dst}, {"container", me.container}, {"bytes", m.edge_bytes[e]}});
  }
  json containers = json::array();
  for (std::size_t c = 0; c < m.container_bytes.size(); ++c) {
    containers.push_back({{"container", p.containers[c].name}, {"bytes", m.container_bytes[c]}});
  }
  return {{"line_size", m.line_size}, {"edges", std::move(edges)}, {"containers", std::move(containers)}};
}

/// Per-container read/write counts as nested index-ordered arrays.
inline json counts_json(const AccessTrace& t, const AccessCountMap& m) {
  json out = json::array();
  for (std::size_t c = 0; c < t.layouts.size(); ++c) {
    const auto& l = t.layouts[c];
    out.push_back({{"container", l.name},
                   {"shape", l.shape},
                   {"reads", m.reads[c]},
                   {"writes", m.writes[c]}});
  }
  return out;
}

/// Non-zero entries only; used for sparse results like related accesses.
inline json sparse_counts_json(const AccessTrace& t, const AccessCountMap& m) {
  json out = json::array();
  for (const auto& e : m.nonzero()) {
    const auto& l = t.layouts[e.container];
    out.push_back({{"container", l.name},
                   {"indices", indices_json(l, e.element)},
                   {"reads", m.reads[e.container][e.element]},
                   {"writes", m.writes[e.container][e.element]},
                   {"count", m.total(e)}});
  }
  return out;
}

inline json event_json(const AccessEvent& ev) {
  json point = json::object();
  for (const auto& [k, v] : ev.point.values) point[k] = v;
  return {{"time", ev.time},
          {"point", std::move(point)},
          {"edge", ev.edge},
          {"container", ev.container},
          {"indices", ev.indices},
          {"kind", to_string(ev.kind)}};
}

inline json distance_json(std::uint64_t d) {
  if (d == kCold) return "cold";
  return d;
}

inline json histogram_json(const StackDistanceProfile& prof) {
  json h = json::object();
  for (const auto& [d, n] : prof.histogram) h[std::to_string(d)] = n;
  h["cold"] = prof.cold;
  return h;
}

/// Local view: trace summary, access counts, misses and physical movement.
inline json local_report(const Program& p, const AccessTrace& t, const StackDistanceProfile& prof,
                         const MissStats& misses, const PhysicalMovement& phys) {
  auto counts = access_counts(t);
  json per_container = json::array();
  for (std::size_t c = 0; c < t.layouts.size(); ++c) {
    std::uint64_t r = 0, w = 0;
    for (auto v : counts.reads[c]) r += v;
    for (auto v : counts.writes[c]) w += v;
    per_container.push_back({{"container", t.layouts[c].name},
                             {"reads", r},
                             {"writes", w},
                             {"distinct_lines", prof.distinct_lines_per_container[c]}});
  }
  return {{"program", p.name},
          {"bindings", bindings_json(t.bindings)},
          {"config", config_json(misses.config)},
          {"trace", {{"events", t.size()}, {"points", t.points.size()}, {"line_events", prof.events.size()}}},
          {"containers", std::move(per_container)},
          {"distinct_lines", prof.distinct_lines},
          {"histogram", histogram_json(prof)},
          {"misses", misses_json(t, misses)},
          {"physical", physical_json(p, phys)}};
}

inline void write_global_text(std::ostream& os, const Program& p, const MetricSet& m, heatmap::Method method) {
  json r = movement_overlay(p, m, method);
  os << "program " << p.name << "\n";
  os << "bindings";
  for (const auto& [k, v] : m.bindings) os << ' ' << k << '=' << v;
  os << "\n\nedges (scale " << heatmap::to_string(method) << ")\n";
  for (const auto& e : r["edges"]) {
    os << "  [" << e["id"].get<std::size_t>() << "] " << e["src"].get<std::string>() << " -> "
       << e["dst"].get<std::string>() << "  " << e["container"].get<std::string>() << "  "
       << e["bytes"].get<Int>() << " B  heat " << e["position"].get<double>() << "\n";
  }
  os << "\nnodes\n";
  for (const auto& n : m.nodes) {
    os << "  " << n.id << "  ops " << n.total_ops << "  bytes " << n.incident_bytes;
    if (n.intensity) os << "  intensity " << n.intensity->num << '/' << n.intensity->den;
    os << "\n";
  }
}

}  // namespace moviz::report
