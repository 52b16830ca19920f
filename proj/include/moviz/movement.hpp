#pragma once

// Logical data movement per memlet, arithmetic operation counts per tasklet,
// and arithmetic intensity per computation node, all as functions of the
// symbol bindings.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "moviz/program.hpp"
#include "moviz/tasklet.hpp"

namespace moviz {

struct Rational {
  Int num = 0;
  Int den = 1;

  static Rational make(Int n, Int d) {
    Int g = std::gcd(n, d);
    if (g == 0) g = 1;
    return {n / g, d / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

struct NodeMetric {
  std::size_t state = 0;
  std::size_t node = 0;
  std::string id;
  Int total_ops = 0;
  Int incident_bytes = 0;
  std::optional<Rational> intensity;  // nullopt when incident_bytes == 0
};

struct TaskletMetric {
  std::size_t state = 0;
  std::size_t node = 0;
  std::string id;
  Int ops_per_execution = 0;
  Int executions = 0;
  Int total_ops = 0;
};

struct MetricSet {
  Bindings bindings;
  std::vector<Int> edge_elements;  // indexed by memlet id
  std::vector<Int> edge_bytes;     // indexed by memlet id
  std::vector<TaskletMetric> tasklets;
  std::vector<NodeMetric> nodes;  // tasklets and map scopes
  std::uint64_t sequence = 0;

  const NodeMetric* node(std::size_t state, std::string_view id) const {
    for (const auto& n : nodes) {
      if (n.state == state && n.id == id) return &n;
    }
    return nullptr;
  }
};

namespace detail {
inline std::atomic<std::uint64_t>& metric_sequence() {
  static std::atomic<std::uint64_t> seq{0};
  return seq;
}

inline Int evaluate_at(const Expr& e, const Bindings& b, const std::string& path) {
  try {
    return sym::evaluate(e, b);
  } catch (const EvalError& ex) {
    throw EvalError(path + ": " + ex.what());
  }
}
}  // namespace detail

/// Program compiled for repeated evaluation: volumes, trip counts and op
/// counts are derived once; evaluate() only substitutes numbers.
class MovementModel {
 public:
  explicit MovementModel(const Program& p) {
    edges_.resize(p.edge_count());
    for (std::size_t si = 0; si < p.states.size(); ++si) {
      const State& st = p.states[si];
      std::unordered_map<std::string_view, std::size_t> ids;
      for (std::size_t n = 0; n < st.nodes.size(); ++n) ids.emplace(st.nodes[n].id, n);
      std::vector<std::vector<std::size_t>> chains(st.nodes.size());
      for (std::size_t n = 0; n < st.nodes.size(); ++n) chains[n] = st.scope_chain(n);

      // scope node index -> position in scopes_
      std::unordered_map<std::size_t, std::size_t> scope_slot;
      for (std::size_t n = 0; n < st.nodes.size(); ++n) {
        if (!st.nodes[n].is_map()) continue;
        Scope sc;
        sc.state = si;
        sc.node = n;
        sc.id = st.nodes[n].id;
        sc.path = detail::node_path(st, n);
        for (const auto& r : st.nodes[n].map().ranges) sc.ranges.push_back(r);
        scope_slot[n] = scopes_.size();
        scopes_.push_back(std::move(sc));
      }

      std::unordered_map<std::size_t, std::size_t> tasklet_slot;
      for (std::size_t n = 0; n < st.nodes.size(); ++n) {
        if (!st.nodes[n].is_tasklet()) continue;
        Task t;
        t.state = si;
        t.node = n;
        t.id = st.nodes[n].id;
        t.path = detail::node_path(st, n);
        try {
          t.ops = tasklet::count_arithmetic_ops(st.nodes[n].tasklet().code);
        } catch (const ParseError& ex) {
          throw ParseError(t.path + ": " + ex.what(), ex.position());
        }
        for (auto m : chains[n]) t.scopes.push_back(scope_slot.at(m));
        for (auto m : chains[n]) scopes_[scope_slot.at(m)].tasklets.push_back(tasklets_.size());
        tasklet_slot[n] = tasklets_.size();
        tasklets_.push_back(std::move(t));
      }

      for (const auto& e : st.edges) {
        Edge& ed = edges_[e.id];
        ed.path = detail::edge_path(st, e);
        auto s = ids.find(e.src);
        auto d = ids.find(e.dst);
        if (s == ids.end() || d == ids.end()) throw SchemaError(ed.path + ": dangling endpoint");
        const auto& chain = chains[s->second].size() >= chains[d->second].size() ? chains[s->second]
                                                                                   : chains[d->second];
        ed.element_size = p.container(e.container).element_size;
        if (e.volume) {
          ed.volume = *e.volume;
        } else {
          Expr v = Expr::literal(1);
          for (const auto& r : e.subset) v = v * r.size();
          for (auto m : chain) {
            for (const auto& r : st.nodes[m].map().ranges) v = v * r.size();
          }
          ed.volume = sym::fold(v);
        }
        for (auto endpoint : {s->second, d->second}) {
          if (auto it = tasklet_slot.find(endpoint); it != tasklet_slot.end()) {
            tasklets_[it->second].edges.push_back(e.id);
          }
        }
        // Boundary crossings: scopes containing exactly one endpoint.
        const auto& cs = chains[s->second];
        const auto& cd = chains[d->second];
        for (const auto* c : {&cs, &cd}) {
          const auto& other = c == &cs ? cd : cs;
          for (auto m : *c) {
            if (std::find(other.begin(), other.end(), m) == other.end()) {
              scopes_[scope_slot.at(m)].edges.push_back(e.id);
            }
          }
        }
      }
    }
  }

  MetricSet evaluate(const Bindings& b) const {
    MetricSet m;
    m.bindings = b;
    m.sequence = ++detail::metric_sequence();
    m.edge_elements.resize(edges_.size());
    m.edge_bytes.resize(edges_.size());
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      Int n = detail::evaluate_at(edges_[i].volume, b, edges_[i].path);
      m.edge_elements[i] = n;
      m.edge_bytes[i] = n * edges_[i].element_size;
    }
    std::vector<Int> trips(scopes_.size());
    for (std::size_t s = 0; s < scopes_.size(); ++s) {
      Int t = 1;
      for (const auto& r : scopes_[s].ranges) {
        Int lo = detail::evaluate_at(r.begin, b, scopes_[s].path);
        Int hi = detail::evaluate_at(r.end, b, scopes_[s].path);
        Int step = detail::evaluate_at(r.step, b, scopes_[s].path);
        if (step < 1) throw EvalError(scopes_[s].path + ": range step must be >= 1");
        t *= std::max<Int>(0, sym::floor_div(hi - lo, step) + 1);
      }
      trips[s] = t;
    }
    std::vector<Int> task_total(tasklets_.size());
    for (std::size_t k = 0; k < tasklets_.size(); ++k) {
      const Task& t = tasklets_[k];
      Int execs = 1;
      for (auto s : t.scopes) execs *= trips[s];
      task_total[k] = execs * t.ops;
      m.tasklets.push_back({t.state, t.node, t.id, t.ops, execs, task_total[k]});
      Int bytes = 0;
      for (auto e : t.edges) bytes += m.edge_bytes[e];
      m.nodes.push_back(make_node(t.state, t.node, t.id, task_total[k], bytes));
    }
    for (const auto& sc : scopes_) {
      Int ops = 0;
      for (auto k : sc.tasklets) ops += task_total[k];
      Int bytes = 0;
      for (auto e : sc.edges) bytes += m.edge_bytes[e];
      m.nodes.push_back(make_node(sc.state, sc.node, sc.id, ops, bytes));
    }
    return m;
  }

 private:
  struct Edge {
    Expr volume;
    Int element_size = 1;
    std::string path;
  };
  struct Task {
    std::size_t state = 0, node = 0;
    std::string id, path;
    Int ops = 0;
    std::vector<std::size_t> scopes;
    std::vector<std::size_t> edges;
  };
  struct Scope {
    std::size_t state = 0, node = 0;
    std::string id, path;
    std::vector<Range> ranges;
    std::vector<std::size_t> tasklets;
    std::vector<std::size_t> edges;
  };

  static NodeMetric make_node(std::size_t st, std::size_t n, const std::string& id, Int ops, Int bytes) {
    NodeMetric nm{st, n, id, ops, bytes, std::nullopt};
    if (bytes > 0) nm.intensity = Rational::make(ops, bytes);
    return nm;
  }

  std::vector<Edge> edges_;
  std::vector<Task> tasklets_;
  std::vector<Scope> scopes_;
};

inline Int count_arithmetic_ops(const Tasklet& t) { return tasklet::count_arithmetic_ops(t.code); }

inline MetricSet compute_metrics(const Program& p, const Bindings& b) {
  return MovementModel(p).evaluate(p.bindings_with_defaults(b));
}

/// Same contract as compute_metrics; callers that re-evaluate often should
/// keep a MovementModel and call evaluate() directly.
inline MetricSet reevaluate(const MovementModel& model, const Bindings& b) { return model.evaluate(b); }

inline MetricSet reevaluate(const Program& p, const Bindings& b) { return compute_metrics(p, b); }

}  // namespace moviz
