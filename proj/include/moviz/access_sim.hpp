#pragma once

// Iteration-space simulation: enumerates every map scope point in a fixed
// presentation order and records each element touched by each memlet.
//
// Order: states in sequence; within a graph, children in topological order
// with declaration order breaking ties; map points lexicographically with the
// first parameter slowest; per tasklet execution all reads (memlet id order)
// then all writes; subset elements row-major.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "moviz/program.hpp"

namespace moviz {

struct IterationPoint {
  std::vector<std::pair<std::string, Int>> values;  // outermost scope first

  std::optional<Int> get(std::string_view param) const {
    for (const auto& [k, v] : values) {
      if (k == param) return v;
    }
    return std::nullopt;
  }
  std::string str() const {
    std::string s;
    for (const auto& [k, v] : values) {
      if (!s.empty()) s += ',';
      s += k + "=" + std::to_string(v);
    }
    return s;
  }
  friend bool operator==(const IterationPoint&, const IterationPoint&) = default;
};

/// Compact trace record; the time index is the record's position.
struct Access {
  std::uint32_t point = 0;
  std::uint32_t edge = 0;
  Int element = 0;  // row-major flat index into the container
  friend bool operator==(const Access&, const Access&) = default;
};

struct AccessEvent {
  std::uint64_t time = 0;
  IterationPoint point;
  std::size_t edge = 0;
  std::string container;
  std::vector<Int> indices;
  AccessKind kind = AccessKind::Read;
};

struct EdgeInfo {
  std::size_t container = 0;
  AccessKind kind = AccessKind::Read;
};

struct ElementRef {
  std::size_t container = 0;
  Int element = 0;  // row-major flat index
  friend auto operator<=>(const ElementRef&, const ElementRef&) = default;
};

class AccessTrace {
 public:
  Bindings bindings;
  std::vector<ContainerLayout> layouts;  // indexed like Program::containers
  std::vector<EdgeInfo> edges;           // indexed by memlet id
  std::vector<IterationPoint> points;
  std::vector<Access> accesses;

  std::size_t size() const { return accesses.size(); }

  std::size_t container_of(const Access& a) const { return edges[a.edge].container; }
  AccessKind kind_of(const Access& a) const { return edges[a.edge].kind; }

  std::optional<std::size_t> container_index(std::string_view name) const {
    for (std::size_t i = 0; i < layouts.size(); ++i) {
      if (layouts[i].name == name) return i;
    }
    return std::nullopt;
  }

  AccessEvent event(std::size_t t) const {
    const Access& a = accesses.at(t);
    const auto& l = layouts[container_of(a)];
    return {t, points[a.point], a.edge, l.name, l.unflat(a.element), kind_of(a)};
  }

  /// Resolves and bounds-checks an element given by indices.
  ElementRef element(std::string_view container, std::span<const Int> indices) const {
    auto c = container_index(container);
    if (!c) throw SimulationError("unknown container '" + std::string(container) + "'");
    if (!layouts[*c].contains(indices)) {
      throw SimulationError("element index out of range for container '" + std::string(container) + "'");
    }
    return {*c, layouts[*c].flat(indices)};
  }
};

struct SimOptions {
  /// Map parameters fixed to a single value (slider positions). A pinned
  /// value outside a range yields no points for that scope.
  std::map<std::string, Int, std::less<>> pinned;
  std::size_t max_events = 10'000'000;
  /// Polled periodically; returning true aborts with SimulationCancelled.
  std::function<bool()> cancelled;
};

class SimulationCancelled : public SimulationError {
 public:
  SimulationCancelled() : SimulationError("simulation cancelled by a newer request") {}
};

namespace detail {

class Simulator {
 public:
  Simulator(const Program& p, const Bindings& b, const SimOptions& opts, bool record)
      : p_(p), opts_(opts), record_(record) {
    trace_.bindings = p.bindings_with_defaults(b);
    env_ = trace_.bindings;
    for (const auto& c : p.containers) {
      try {
        trace_.layouts.push_back(evaluate_layout(c, env_));
      } catch (const EvalError& ex) {
        throw SimulationError("containers[" + c.name + "]: " + ex.what());
      }
    }
    trace_.edges.resize(p.edge_count());
    for (const auto& st : p.states) {
      for (const auto& e : st.edges) {
        trace_.edges[e.id] = {*p.container_index(e.container), e.kind};
      }
    }
  }

  AccessTrace run() {
    for (const auto& st : p_.states) {
      prepare(st);
      IterationPoint top;
      exec_graph(st, std::nullopt, top);
    }
    return std::move(trace_);
  }

 private:
  struct Plan {
    std::vector<std::size_t> reads;   // memlet ids into a tasklet / copies into an access node
    std::vector<std::size_t> writes;  // memlet ids out of a tasklet
  };

  void prepare(const State& st) {
    st_ = &st;
    plans_.assign(st.nodes.size(), {});
    ids_.clear();
    for (std::size_t n = 0; n < st.nodes.size(); ++n) ids_.emplace(st.nodes[n].id, n);
    for (std::size_t k = 0; k < st.edges.size(); ++k) {
      const Memlet& e = st.edges[k];
      std::size_t s = ids_.at(e.src);
      std::size_t d = ids_.at(e.dst);
      if (st.nodes[d].is_tasklet()) {
        plans_[d].reads.push_back(k);
      } else if (st.nodes[s].is_tasklet()) {
        plans_[s].writes.push_back(k);
      } else {
        plans_[d].reads.push_back(k);  // access -> access copy fires at its destination
      }
    }
    orders_.clear();
  }

  const std::vector<std::size_t>& order(std::optional<std::size_t> parent) {
    long key = parent ? static_cast<long>(*parent) : -1L;
    auto it = orders_.find(key);
    if (it != orders_.end()) return it->second;
    auto ord = ordered_children(*st_, parent);
    if (!ord) throw SimulationError("states[" + st_->name + "]: dataflow graph contains a cycle");
    return orders_.emplace(key, std::move(*ord)).first->second;
  }

  void exec_graph(const State& st, std::optional<std::size_t> parent, const IterationPoint& where) {
    std::optional<std::uint32_t> shared_point;
    for (std::size_t n : order(parent)) {
      const Node& node = st.nodes[n];
      if (node.is_map()) {
        exec_map(st, n, where);
        continue;
      }
      const Plan& plan = plans_[n];
      if (plan.reads.empty() && plan.writes.empty()) continue;
      std::uint32_t pt;
      if (parent) {
        if (!shared_point) shared_point = new_point(where);
        pt = *shared_point;
      } else {
        pt = new_point(where);
      }
      for (auto k : plan.reads) fire(st, st.edges[k], pt);
      for (auto k : plan.writes) fire(st, st.edges[k], pt);
    }
  }

  void exec_map(const State& st, std::size_t n, const IterationPoint& where) {
    const MapScope& m = st.nodes[n].map();
    std::vector<std::vector<Int>> values(m.params.size());
    IterationPoint inner = where;
    inner.values.resize(where.values.size() + m.params.size());
    recurse_params(st, n, m, 0, inner, where.values.size());
  }

  void recurse_params(const State& st, std::size_t n, const MapScope& m, std::size_t k, IterationPoint& pt,
                      std::size_t base) {
    if (k == m.params.size()) {
      exec_graph(st, n, pt);
      return;
    }
    const std::string& prm = m.params[k];
    const Range& r = m.ranges[k];
    std::string path = node_path(st, n) + ".ranges[" + prm + "]";
    Int lo = eval(r.begin, path);
    Int hi = eval(r.end, path);
    Int step = eval(r.step, path);
    if (step < 1) throw SimulationError(path + ": range step must be >= 1 (got " + std::to_string(step) + ")");
    auto body = [&](Int v) {
      env_[prm] = v;
      pt.values[base + k] = {prm, v};
      recurse_params(st, n, m, k + 1, pt, base);
    };
    if (auto pin = opts_.pinned.find(prm); pin != opts_.pinned.end()) {
      Int v = pin->second;
      if (v >= lo && v <= hi && (v - lo) % step == 0) body(v);
    } else {
      for (Int v = lo; v <= hi; v += step) body(v);
    }
    env_.erase(prm);
  }

  std::uint32_t new_point(const IterationPoint& where) {
    trace_.points.push_back(where);
    return static_cast<std::uint32_t>(trace_.points.size() - 1);
  }

  Int eval(const Expr& e, const std::string& path) {
    try {
      return sym::evaluate(e, env_);
    } catch (const EvalError& ex) {
      throw SimulationError(path + ": " + ex.what());
    }
  }

  void fire(const State& st, const Memlet& e, std::uint32_t pt) {
    if (!record_) return;
    const EdgeInfo& info = trace_.edges[e.id];
    const ContainerLayout& layout = trace_.layouts[info.container];
    std::size_t rank = e.subset.size();
    std::vector<Int> lo(rank), hi(rank), step(rank), idx(rank);
    std::string path;
    for (std::size_t d = 0; d < rank; ++d) {
      const Range& r = e.subset[d];
      if (path.empty()) path = edge_path(st, e);
      lo[d] = eval(r.begin, path);
      hi[d] = eval(r.end, path);
      step[d] = eval(r.step, path);
      if (step[d] < 1) throw SimulationError(path + ": subset step must be >= 1");
      if (lo[d] > hi[d]) return;  // empty subset
      idx[d] = lo[d];
    }
    for (;;) {
      if (!layout.contains(idx)) {
        std::string where;
        for (std::size_t d = 0; d < rank; ++d) where += (d ? "," : "") + std::to_string(idx[d]);
        throw SimulationError(edge_path(st, e) + ": out-of-bounds access " + layout.name + "[" + where +
                              "] at point (" + trace_.points[pt].str() + ")");
      }
      if (trace_.accesses.size() >= opts_.max_events) {
        throw SimulationError("trace exceeds the budget of " + std::to_string(opts_.max_events) +
                              " events; reduce the parameters or raise the event budget");
      }
      if (opts_.cancelled && (trace_.accesses.size() & 0xFFFF) == 0 && opts_.cancelled()) {
        throw SimulationCancelled();
      }
      trace_.accesses.push_back({pt, static_cast<std::uint32_t>(e.id), layout.flat(idx)});
      std::size_t d = rank;
      while (d-- > 0) {
        idx[d] += step[d];
        if (idx[d] <= hi[d]) break;
        idx[d] = lo[d];
      }
      if (d == static_cast<std::size_t>(-1)) break;
    }
  }

  const Program& p_;
  const SimOptions& opts_;
  bool record_;
  AccessTrace trace_;
  Bindings env_;
  const State* st_ = nullptr;
  std::vector<Plan> plans_;
  std::unordered_map<std::string_view, std::size_t> ids_;
  std::map<long, std::vector<std::size_t>> orders_;
};

}  // namespace detail

inline AccessTrace simulate_accesses(const Program& p, const Bindings& b, const SimOptions& opts = {}) {
  return detail::Simulator(p, b, opts, true).run();
}

/// Scope points at which at least one tasklet or copy executes, in
/// simulation order.
inline std::vector<IterationPoint> enumerate_iteration_space(const Program& p, const Bindings& b,
                                                             const SimOptions& opts = {}) {
  return detail::Simulator(p, b, opts, false).run().points;
}

// ---------------------------------------------------------------------------
// Derived views

struct AccessCountMap {
  std::vector<std::vector<std::uint64_t>> reads;   // [container][flat element]
  std::vector<std::vector<std::uint64_t>> writes;  // [container][flat element]

  static AccessCountMap zeros(const AccessTrace& t) {
    AccessCountMap m;
    for (const auto& l : t.layouts) {
      m.reads.emplace_back(static_cast<std::size_t>(l.size()), 0);
      m.writes.emplace_back(static_cast<std::size_t>(l.size()), 0);
    }
    return m;
  }

  std::uint64_t total(std::size_t c, Int f) const { return reads[c][f] + writes[c][f]; }
  std::uint64_t total(const ElementRef& e) const { return total(e.container, e.element); }

  std::uint64_t sum() const {
    std::uint64_t s = 0;
    for (std::size_t c = 0; c < reads.size(); ++c) {
      for (std::size_t f = 0; f < reads[c].size(); ++f) s += reads[c][f] + writes[c][f];
    }
    return s;
  }

  /// Elements with a non-zero total.
  std::vector<ElementRef> nonzero() const {
    std::vector<ElementRef> out;
    for (std::size_t c = 0; c < reads.size(); ++c) {
      for (std::size_t f = 0; f < reads[c].size(); ++f) {
        if (reads[c][f] + writes[c][f]) out.push_back({c, static_cast<Int>(f)});
      }
    }
    return out;
  }

  friend bool operator==(const AccessCountMap&, const AccessCountMap&) = default;
};

inline AccessCountMap access_counts(const AccessTrace& t) {
  AccessCountMap m = AccessCountMap::zeros(t);
  for (const auto& a : t.accesses) {
    auto& v = t.kind_of(a) == AccessKind::Read ? m.reads : m.writes;
    ++v[t.container_of(a)][a.element];
  }
  return m;
}

/// For every iteration point touching a selected element, counts each other
/// element touched at that point once. Selections stack additively. Counts
/// are filed under `reads` or `writes` by how the related element was first
/// touched at that point.
inline AccessCountMap related_accesses(const AccessTrace& t, std::span<const ElementRef> selected) {
  for (const auto& s : selected) {
    if (s.container >= t.layouts.size() || s.element < 0 || s.element >= t.layouts[s.container].size()) {
      throw SimulationError("selected element out of range");
    }
  }
  AccessCountMap m = AccessCountMap::zeros(t);
  std::vector<std::vector<std::size_t>> hits(t.points.size());  // point -> selection indices
  for (const auto& a : t.accesses) {
    ElementRef e{t.container_of(a), a.element};
    for (std::size_t s = 0; s < selected.size(); ++s) {
      if (selected[s] == e) {
        auto& h = hits[a.point];
        if (std::find(h.begin(), h.end(), s) == h.end()) h.push_back(s);
      }
    }
  }
  std::unordered_map<std::uint32_t, std::vector<std::pair<ElementRef, AccessKind>>> touched;
  for (const auto& a : t.accesses) {
    if (hits[a.point].empty()) continue;
    ElementRef e{t.container_of(a), a.element};
    auto& v = touched[a.point];
    bool seen = std::any_of(v.begin(), v.end(), [&](const auto& x) { return x.first == e; });
    if (!seen) v.emplace_back(e, t.kind_of(a));
  }
  for (const auto& [pt, elems] : touched) {
    for (auto s : hits[pt]) {
      for (const auto& [e, kind] : elems) {
        if (e == selected[s]) continue;
        auto& v = kind == AccessKind::Read ? m.reads : m.writes;
        ++v[e.container][e.element];
      }
    }
  }
  return m;
}

inline AccessCountMap related_accesses(const AccessTrace& t, std::initializer_list<ElementRef> selected) {
  return related_accesses(t, std::span<const ElementRef>(selected.begin(), selected.size()));
}

/// Events with time in [t0, t1).
inline std::vector<AccessEvent> trace_window(const AccessTrace& t, std::size_t t0, std::size_t t1) {
  if (t0 > t1 || t1 > t.size()) {
    throw SimulationError("trace window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                          ") is outside [0, " + std::to_string(t.size()) + "]");
  }
  std::vector<AccessEvent> out;
  out.reserve(t1 - t0);
  for (std::size_t i = t0; i < t1; ++i) out.push_back(t.event(i));
  return out;
}

/// Accesses whose iteration point agrees with every pinned parameter it binds.
inline std::vector<Access> project(const AccessTrace& t, const std::map<std::string, Int, std::less<>>& pinned) {
  std::vector<char> keep(t.points.size(), 1);
  for (std::size_t p = 0; p < t.points.size(); ++p) {
    for (const auto& [k, v] : pinned) {
      auto got = t.points[p].get(k);
      if (got && *got != v) keep[p] = 0;
    }
  }
  std::vector<Access> out;
  for (const auto& a : t.accesses) {
    if (keep[a.point]) out.push_back(a);
  }
  return out;
}

}  // namespace moviz
