#pragma once

// Hierarchical dataflow program: data containers, ordered states, and per
// state a graph of access nodes, tasklets and map scopes connected by memlets.
//
// Nodes of a state are stored flat in pre-order; a node inside a map scope
// records the index of that scope in `parent`. Memlets are stored flat per
// state as well and carry a program-wide id.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "moviz/error.hpp"
#include "moviz/symbolic.hpp"
#include "moviz/tasklet.hpp"

namespace moviz {

using sym::Bindings;
using sym::Expr;
using sym::Int;

enum class AccessKind { Read, Write };

inline const char* to_string(AccessKind k) { return k == AccessKind::Read ? "read" : "write"; }

struct Range {
  Expr begin;
  Expr end;  // inclusive
  Expr step = Expr::literal(1);

  /// Number of points, as an expression: (end - begin)/step + 1.
  Expr size() const {
    if (begin == end) return Expr::literal(1);
    return sym::fold((end - begin) / step + Expr::literal(1));
  }
};

struct Symbol {
  std::string name;
  std::optional<Int> default_value;
};

struct Container {
  std::string name;
  std::vector<Expr> shape;
  Int element_size = 8;
  std::optional<std::vector<Expr>> strides;
  Expr start_offset = Expr::literal(0);

  std::size_t rank() const { return shape.size(); }

  /// Explicit strides, or row-major contiguous ones built from the shape.
  std::vector<Expr> effective_strides() const {
    if (strides) return *strides;
    std::vector<Expr> out(shape.size());
    Expr acc = Expr::literal(1);
    for (std::size_t d = shape.size(); d-- > 0;) {
      out[d] = acc;
      acc = sym::fold(acc * shape[d]);
    }
    return out;
  }
};

struct AccessNode {
  std::string container;
};

struct Tasklet {
  std::string code;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

struct MapScope {
  std::vector<std::string> params;
  std::vector<Range> ranges;
  bool ordered = false;  // sequential loop; affects labeling only
};

struct Node {
  std::string id;
  std::variant<AccessNode, Tasklet, MapScope> kind;
  std::optional<std::size_t> parent;  // enclosing map scope (index into State::nodes)
  std::string label;
  std::optional<std::string> source;  // source location link for attribution

  bool is_access() const { return std::holds_alternative<AccessNode>(kind); }
  bool is_tasklet() const { return std::holds_alternative<Tasklet>(kind); }
  bool is_map() const { return std::holds_alternative<MapScope>(kind); }
  const AccessNode& access() const { return std::get<AccessNode>(kind); }
  const Tasklet& tasklet() const { return std::get<Tasklet>(kind); }
  const MapScope& map() const { return std::get<MapScope>(kind); }
  const char* type_name() const { return is_access() ? "access" : is_tasklet() ? "tasklet" : "map"; }
};

struct Memlet {
  std::size_t id = 0;  // program-wide, dense
  std::string src;
  std::string src_conn;
  std::string dst;
  std::string dst_conn;
  std::string container;
  std::vector<Range> subset;
  std::optional<Expr> volume;
  AccessKind kind = AccessKind::Read;
  std::optional<std::size_t> declared_in;  // map scope whose body lists this edge
};

struct State {
  std::string name;
  std::vector<Node> nodes;
  std::vector<Memlet> edges;

  std::optional<std::size_t> find(std::string_view id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].id == id) return i;
    }
    return std::nullopt;
  }

  /// Enclosing map scopes of a node, outermost first.
  std::vector<std::size_t> scope_chain(std::size_t node) const {
    std::vector<std::size_t> chain;
    for (auto p = nodes[node].parent; p; p = nodes[*p].parent) chain.push_back(*p);
    std::reverse(chain.begin(), chain.end());
    return chain;
  }

  /// Scope chain of a memlet: that of its more deeply nested endpoint.
  std::vector<std::size_t> edge_scope(const Memlet& e) const {
    auto s = find(e.src);
    auto d = find(e.dst);
    std::vector<std::size_t> a = s ? scope_chain(*s) : std::vector<std::size_t>{};
    std::vector<std::size_t> b = d ? scope_chain(*d) : std::vector<std::size_t>{};
    return a.size() >= b.size() ? a : b;
  }

  /// The access node of a memlet on its container's side, if any.
  std::optional<std::size_t> container_endpoint(const Memlet& e) const {
    auto idx = find(e.kind == AccessKind::Read ? e.src : e.dst);
    if (idx && nodes[*idx].is_access()) return idx;
    return std::nullopt;
  }
};

struct Program {
  std::string name;
  std::vector<Symbol> symbols;
  std::vector<Container> containers;
  std::vector<State> states;

  std::optional<std::size_t> container_index(std::string_view n) const {
    for (std::size_t i = 0; i < containers.size(); ++i) {
      if (containers[i].name == n) return i;
    }
    return std::nullopt;
  }

  const Container& container(std::string_view n) const {
    auto i = container_index(n);
    if (!i) throw SchemaError("unknown container '" + std::string(n) + "'");
    return containers[*i];
  }

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& s : states) n += s.edges.size();
    return n;
  }

  /// (state index, edge index) for a program-wide edge id.
  std::pair<std::size_t, std::size_t> locate_edge(std::size_t id) const {
    std::size_t base = 0;
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (id < base + states[s].edges.size()) return {s, id - base};
      base += states[s].edges.size();
    }
    throw SchemaError("unknown edge id " + std::to_string(id));
  }

  const Memlet& edge(std::size_t id) const {
    auto [s, e] = locate_edge(id);
    return states[s].edges[e];
  }

  /// Renumbers memlet ids densely in state order.
  void renumber_edges() {
    std::size_t id = 0;
    for (auto& s : states) {
      for (auto& e : s.edges) e.id = id++;
    }
  }

  /// Symbol defaults merged with (and overridden by) `overrides`.
  Bindings bindings_with_defaults(const Bindings& overrides = {}) const {
    Bindings b;
    for (const auto& s : symbols) {
      if (s.default_value) b[s.name] = *s.default_value;
    }
    for (const auto& [k, v] : overrides) b[k] = v;
    return b;
  }
};

// ---------------------------------------------------------------------------
// Evaluated container layout

struct ContainerLayout {
  std::string name;
  std::vector<Int> shape;
  std::vector<Int> strides;
  Int start_offset = 0;
  Int element_size = 0;

  Int size() const {
    Int n = 1;
    for (Int e : shape) n *= e;
    return n;
  }

  bool contains(std::span<const Int> idx) const {
    if (idx.size() != shape.size()) return false;
    for (std::size_t d = 0; d < idx.size(); ++d) {
      if (idx[d] < 0 || idx[d] >= shape[d]) return false;
    }
    return true;
  }

  /// Row-major logical index (independent of the memory layout).
  Int flat(std::span<const Int> idx) const {
    Int f = 0;
    for (std::size_t d = 0; d < idx.size(); ++d) f = f * shape[d] + idx[d];
    return f;
  }

  std::vector<Int> unflat(Int f) const {
    std::vector<Int> idx(shape.size());
    for (std::size_t d = shape.size(); d-- > 0;) {
      idx[d] = f % shape[d];
      f /= shape[d];
    }
    return idx;
  }

  /// Memory offset in elements from the container base.
  Int element_offset(std::span<const Int> idx) const {
    Int off = start_offset;
    for (std::size_t d = 0; d < idx.size(); ++d) off += idx[d] * strides[d];
    return off;
  }

  Int element_offset_flat(Int f) const {
    Int off = start_offset;
    for (std::size_t d = shape.size(); d-- > 0;) {
      off += (f % shape[d]) * strides[d];
      f /= shape[d];
    }
    return off;
  }

  /// One past the largest element offset.
  Int extent() const {
    Int hi = start_offset;
    for (std::size_t d = 0; d < shape.size(); ++d) hi += (shape[d] - 1) * strides[d];
    return hi + 1;
  }
};

/// True iff the strided index map is injective over the index domain.
inline bool layout_injective(std::span<const Int> shape, std::span<const Int> strides) {
  std::vector<std::size_t> dims;
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (shape[d] > 1) dims.push_back(d);
  }
  std::sort(dims.begin(), dims.end(), [&](auto a, auto b) { return strides[a] < strides[b]; });
  Int reach = 0;
  bool nested = true;
  for (auto d : dims) {
    if (strides[d] <= reach) {
      nested = false;
      break;
    }
    reach += strides[d] * (shape[d] - 1);
  }
  if (nested) return true;
  Int total = 1;
  for (Int e : shape) total *= e;
  if (total > (Int{1} << 22)) return false;
  std::vector<Int> offs;
  offs.reserve(static_cast<std::size_t>(total));
  std::vector<Int> idx(shape.size(), 0);
  for (Int n = 0; n < total; ++n) {
    Int off = 0;
    for (std::size_t d = 0; d < shape.size(); ++d) off += idx[d] * strides[d];
    offs.push_back(off);
    for (std::size_t d = shape.size(); d-- > 0;) {
      if (++idx[d] < shape[d]) break;
      idx[d] = 0;
    }
  }
  std::sort(offs.begin(), offs.end());
  return std::adjacent_find(offs.begin(), offs.end()) == offs.end();
}

inline ContainerLayout evaluate_layout(const Container& c, const Bindings& b) {
  ContainerLayout l;
  l.name = c.name;
  l.element_size = c.element_size;
  for (const auto& e : c.shape) l.shape.push_back(sym::evaluate(e, b));
  for (const auto& e : c.effective_strides()) l.strides.push_back(sym::evaluate(e, b));
  l.start_offset = sym::evaluate(c.start_offset, b);
  for (std::size_t d = 0; d < l.shape.size(); ++d) {
    if (l.shape[d] < 1) {
      throw SimulationError("container '" + c.name + "' has extent " + std::to_string(l.shape[d]) +
                            " in dimension " + std::to_string(d));
    }
    if (l.strides[d] < 1) {
      throw SimulationError("container '" + c.name + "' has stride " + std::to_string(l.strides[d]) +
                            " in dimension " + std::to_string(d));
    }
  }
  if (l.start_offset < 0) throw SimulationError("container '" + c.name + "' has negative start offset");
  if (!layout_injective(l.shape, l.strides)) {
    throw SimulationError("container '" + c.name + "' has a non-injective (overlapping) layout");
  }
  return l;
}

// ---------------------------------------------------------------------------
// Graph ordering

/// Children of `parent` (nullopt = state top level) in topological order of
/// the memlets lifted to that level; declaration order breaks ties. Returns
/// nullopt if the lifted graph has a cycle.
inline std::optional<std::vector<std::size_t>> ordered_children(const State& st,
                                                                 std::optional<std::size_t> parent) {
  std::vector<std::size_t> kids;
  std::vector<int> slot(st.nodes.size(), -1);
  for (std::size_t i = 0; i < st.nodes.size(); ++i) {
    if (st.nodes[i].parent == parent) {
      slot[i] = static_cast<int>(kids.size());
      kids.push_back(i);
    }
  }
  auto lift = [&](std::string_view id) -> int {
    auto n = st.find(id);
    if (!n) return -1;
    std::optional<std::size_t> cur = *n;
    while (cur && st.nodes[*cur].parent != parent) cur = st.nodes[*cur].parent;
    return cur ? slot[*cur] : -1;
  };
  std::vector<std::set<int>> succ(kids.size());
  std::vector<int> indeg(kids.size(), 0);
  for (const auto& e : st.edges) {
    int a = lift(e.src);
    int b = lift(e.dst);
    if (a < 0 || b < 0 || a == b) continue;
    if (succ[a].insert(b).second) ++indeg[b];
  }
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t k = 0; k < kids.size(); ++k) {
    if (indeg[k] == 0) ready.push(static_cast<int>(k));
  }
  std::vector<std::size_t> out;
  while (!ready.empty()) {
    int k = ready.top();
    ready.pop();
    out.push_back(kids[k]);
    for (int s : succ[k]) {
      if (--indeg[s] == 0) ready.push(s);
    }
  }
  if (out.size() != kids.size()) return std::nullopt;
  return out;
}

// ---------------------------------------------------------------------------
// Validation

enum class Severity { Error, Warning };

inline const char* to_string(Severity s) { return s == Severity::Error ? "error" : "warning"; }

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string path;
  std::string message;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Diagnostic> diags)
      : Error(summary(diags)), diagnostics_(std::move(diags)) {}

  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  static std::string summary(const std::vector<Diagnostic>& d) {
    std::string s = "invalid program";
    for (const auto& x : d) {
      if (x.severity == Severity::Error) {
        s += ": " + x.path + ": " + x.message;
        break;
      }
    }
    return s;
  }
  std::vector<Diagnostic> diagnostics_;
};

namespace detail {

inline std::string node_path(const State& st, std::size_t n) {
  return "states[" + st.name + "].nodes[" + st.nodes[n].id + "]";
}

inline std::string edge_path(const State& st, const Memlet& e) {
  return "states[" + st.name + "].edges[" + std::to_string(e.id) + "](" + e.src + "->" + e.dst + ")";
}

class Validator {
 public:
  Validator(const Program& p, std::optional<Bindings> bindings) : p_(p), bindings_(std::move(bindings)) {}

  std::vector<Diagnostic> run() {
    for (const auto& s : p_.symbols) declared_.insert(s.name);
    check_unique();
    check_containers();
    for (const auto& st : p_.states) check_state(st);
    return std::move(diags_);
  }

 private:
  void error(std::string path, std::string msg) {
    diags_.push_back({Severity::Error, std::move(path), std::move(msg)});
  }
  void warning(std::string path, std::string msg) {
    diags_.push_back({Severity::Warning, std::move(path), std::move(msg)});
  }

  void check_unique() {
    std::set<std::string> seen;
    for (const auto& s : p_.symbols) {
      if (!seen.insert(s.name).second) error("symbols[" + s.name + "]", "duplicate symbol '" + s.name + "'");
    }
    seen.clear();
    for (const auto& c : p_.containers) {
      if (!seen.insert(c.name).second) {
        error("containers[" + c.name + "]", "duplicate container '" + c.name + "'");
      }
    }
    seen.clear();
    for (const auto& st : p_.states) {
      if (!seen.insert(st.name).second) error("states[" + st.name + "]", "duplicate state '" + st.name + "'");
    }
  }

  void check_symbols(const Expr& e, const std::set<std::string>& extra, const std::string& path,
                     const char* what) {
    for (const auto& s : sym::free_symbols(e)) {
      if (!declared_.count(s) && !extra.count(s)) {
        error(path, std::string(what) + " references undeclared symbol '" + s + "'");
      }
    }
  }

  // Bindings for evaluated checks: explicit ones, else defaults if complete.
  std::optional<Bindings> eval_bindings() const {
    if (bindings_) return p_.bindings_with_defaults(*bindings_);
    Bindings b = p_.bindings_with_defaults();
    if (b.size() < declared_.size()) return std::nullopt;
    return b;
  }

  void check_containers() {
    auto b = eval_bindings();
    for (const auto& c : p_.containers) {
      std::string path = "containers[" + c.name + "]";
      if (c.shape.empty()) error(path, "container must have rank >= 1");
      if (c.element_size < 1) error(path, "element_size must be positive");
      if (c.strides && c.strides->size() != c.shape.size()) {
        error(path, "strides rank " + std::to_string(c.strides->size()) + " does not match shape rank " +
                        std::to_string(c.shape.size()));
        continue;
      }
      bool symbols_ok = true;
      std::size_t before = diags_.size();
      for (const auto& e : c.shape) check_symbols(e, {}, path + ".shape", "shape");
      for (const auto& e : c.effective_strides()) check_symbols(e, {}, path + ".strides", "stride");
      check_symbols(c.start_offset, {}, path + ".start_offset", "start offset");
      symbols_ok = diags_.size() == before;
      if (b && symbols_ok && !c.shape.empty()) {
        try {
          evaluate_layout(c, *b);
        } catch (const Error& ex) {
          error(path, ex.what());
        }
      }
    }
  }

  void check_state(const State& st) {
    std::set<std::string> ids;
    for (std::size_t n = 0; n < st.nodes.size(); ++n) {
      const auto& node = st.nodes[n];
      if (!ids.insert(node.id).second) error(node_path(st, n), "duplicate node id '" + node.id + "'");
      if (node.parent && (*node.parent >= st.nodes.size() || !st.nodes[*node.parent].is_map())) {
        error(node_path(st, n), "parent is not a map scope");
      }
    }
    for (std::size_t n = 0; n < st.nodes.size(); ++n) check_node(st, n);

    std::map<std::pair<std::size_t, std::string>, int> conn_uses;
    for (const auto& e : st.edges) check_edge(st, e, conn_uses);
    for (std::size_t n = 0; n < st.nodes.size(); ++n) {
      if (!st.nodes[n].is_tasklet()) continue;
      const auto& t = st.nodes[n].tasklet();
      for (const auto* list : {&t.inputs, &t.outputs}) {
        for (const auto& c : *list) {
          int uses = conn_uses[{n, c}];
          if (uses != 1) {
            error(node_path(st, n), "connector '" + c + "' is attached by " + std::to_string(uses) +
                                        " memlets (expected exactly 1)");
          }
        }
      }
    }

    std::vector<std::optional<std::size_t>> scopes{std::nullopt};
    for (std::size_t n = 0; n < st.nodes.size(); ++n) {
      if (st.nodes[n].is_map()) scopes.emplace_back(n);
    }
    for (auto s : scopes) {
      if (!ordered_children(st, s)) {
        error(s ? node_path(st, *s) : "states[" + st.name + "]", "dataflow graph contains a cycle");
      }
    }
  }

  std::set<std::string> scope_params(const State& st, const std::vector<std::size_t>& chain) {
    std::set<std::string> out;
    for (auto m : chain) {
      for (const auto& prm : st.nodes[m].map().params) out.insert(prm);
    }
    return out;
  }

  void check_range(const Range& r, const std::set<std::string>& params, const std::string& path) {
    check_symbols(r.begin, params, path, "range begin");
    check_symbols(r.end, params, path, "range end");
    check_symbols(r.step, params, path, "range step");
    auto b = eval_bindings();
    if (!b) return;
    try {
      Int step = sym::evaluate(r.step, *b);
      if (step < 1) error(path, "range step must be >= 1 (got " + std::to_string(step) + ")");
      Int lo = sym::evaluate(r.begin, *b);
      Int hi = sym::evaluate(r.end, *b);
      if (lo > hi + 1) {
        error(path, "range begin " + std::to_string(lo) + " exceeds end+1 (" + std::to_string(hi + 1) + ")");
      }
    } catch (const EvalError&) {
      // depends on enclosing map parameters; checked during simulation
    }
  }

  void check_node(const State& st, std::size_t n) {
    const auto& node = st.nodes[n];
    std::string path = node_path(st, n);
    if (node.is_access()) {
      if (!p_.container_index(node.access().container)) {
        error(path, "access node references undeclared container '" + node.access().container + "'");
      }
    } else if (node.is_tasklet()) {
      const auto& t = node.tasklet();
      std::set<std::string> conns;
      for (const auto* list : {&t.inputs, &t.outputs}) {
        for (const auto& c : *list) {
          if (!conns.insert(c).second) error(path, "duplicate connector '" + c + "'");
        }
      }
      try {
        tasklet::parse(t.code);
      } catch (const ParseError& ex) {
        error(path, std::string("tasklet code: ") + ex.what());
      }
    } else {
      const auto& m = node.map();
      if (m.params.size() != m.ranges.size()) {
        error(path, "map has " + std::to_string(m.params.size()) + " parameters but " +
                        std::to_string(m.ranges.size()) + " ranges");
        return;
      }
      if (m.params.empty()) error(path, "map scope needs at least one parameter");
      std::set<std::string> outer = scope_params(st, st.scope_chain(n));
      std::set<std::string> mine;
      for (std::size_t k = 0; k < m.params.size(); ++k) {
        const auto& prm = m.params[k];
        if (!mine.insert(prm).second) error(path, "duplicate map parameter '" + prm + "'");
        if (declared_.count(prm) || outer.count(prm)) {
          error(path, "map parameter '" + prm + "' shadows an enclosing name");
        }
        check_range(m.ranges[k], outer, path + ".ranges[" + prm + "]");
      }
    }
  }

  void check_edge(const State& st, const Memlet& e, std::map<std::pair<std::size_t, std::string>, int>& uses) {
    std::string path = edge_path(st, e);
    auto s = st.find(e.src);
    auto d = st.find(e.dst);
    if (!s) error(path, "unknown source node '" + e.src + "'");
    if (!d) error(path, "unknown destination node '" + e.dst + "'");
    auto ci = p_.container_index(e.container);
    if (!ci) {
      error(path, "memlet references undeclared container '" + e.container + "'");
    } else if (e.subset.size() != p_.containers[*ci].rank()) {
      error(path, "subset rank " + std::to_string(e.subset.size()) + " does not match container '" +
                      e.container + "' of rank " + std::to_string(p_.containers[*ci].rank()));
    }
    if (!s || !d) return;
    const Node& sn = st.nodes[*s];
    const Node& dn = st.nodes[*d];
    if (sn.is_map() || dn.is_map()) {
      error(path, "memlets connect access nodes and tasklets, not map scopes");
      return;
    }
    const Node& data_side = e.kind == AccessKind::Read ? sn : dn;
    if (!data_side.is_access()) {
      error(path, std::string("a ") + to_string(e.kind) + " memlet needs an access node on its " +
                      (e.kind == AccessKind::Read ? "source" : "destination") + " side");
    } else if (data_side.access().container != e.container) {
      error(path, "memlet container '" + e.container + "' does not match access node container '" +
                      data_side.access().container + "'");
    }
    if (sn.is_tasklet()) {
      const auto& outs = sn.tasklet().outputs;
      if (std::find(outs.begin(), outs.end(), e.src_conn) == outs.end()) {
        error(path, "source connector '" + e.src_conn + "' is not an output of tasklet '" + sn.id + "'");
      } else {
        ++uses[{*s, e.src_conn}];
      }
    }
    if (dn.is_tasklet()) {
      const auto& ins = dn.tasklet().inputs;
      if (std::find(ins.begin(), ins.end(), e.dst_conn) == ins.end()) {
        error(path, "destination connector '" + e.dst_conn + "' is not an input of tasklet '" + dn.id + "'");
      } else {
        ++uses[{*d, e.dst_conn}];
      }
    }
    auto a = st.scope_chain(*s);
    auto b = st.scope_chain(*d);
    const auto& shorter = a.size() <= b.size() ? a : b;
    const auto& longer = a.size() <= b.size() ? b : a;
    if (!std::equal(shorter.begin(), shorter.end(), longer.begin())) {
      error(path, "memlet endpoints lie in unrelated map scopes");
      return;
    }
    auto params = scope_params(st, longer);
    for (std::size_t k = 0; k < e.subset.size(); ++k) {
      check_symbols(e.subset[k].begin, params, path + ".subset", "subset");
      check_symbols(e.subset[k].end, params, path + ".subset", "subset");
      check_symbols(e.subset[k].step, params, path + ".subset", "subset");
    }
    if (e.volume) check_symbols(*e.volume, params, path + ".volume", "volume");
  }

  const Program& p_;
  std::optional<Bindings> bindings_;
  std::set<std::string> declared_;
  std::vector<Diagnostic> diags_;
};

}  // namespace detail

/// Checks every structural invariant. Evaluated checks (extents, strides,
/// layout injectivity, range steps) use `bindings` merged over the symbol
/// defaults, or the defaults alone when they cover every symbol.
inline std::vector<Diagnostic> validate(const Program& p, std::optional<Bindings> bindings = std::nullopt) {
  return detail::Validator(p, std::move(bindings)).run();
}

inline bool has_errors(const std::vector<Diagnostic>& d) {
  return std::any_of(d.begin(), d.end(), [](const auto& x) { return x.severity == Severity::Error; });
}

/// Elements moved by a memlet per full execution of its scope: the explicit
/// volume, or (product of subset range sizes) x (product of the trip counts
/// of every enclosing map).
inline Expr derived_volume(const Memlet& e, const Program& p) {
  if (e.volume) return *e.volume;
  auto [si, ei] = p.locate_edge(e.id);
  const State& st = p.states[si];
  Expr v = Expr::literal(1);
  for (const auto& r : e.subset) v = v * r.size();
  for (auto m : st.edge_scope(e)) {
    for (const auto& r : st.nodes[m].map().ranges) v = v * r.size();
  }
  return sym::fold(v);
}

// ---------------------------------------------------------------------------
// JSON encoding

namespace detail {

using nlohmann::json;

inline const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError((path.empty() ? std::string("/") : path) + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError((path.empty() ? std::string("/") : path) + ": missing required key '" + key + "'");
  return *it;
}

inline std::string str_field(const json& j, const char* key, const std::string& path) {
  const auto& v = field(j, key, path);
  if (!v.is_string()) throw SchemaError(path + "/" + key + ": expected a string");
  return v.get<std::string>();
}

inline std::string opt_str(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) return {};
  if (!j[key].is_string()) throw SchemaError(path + "/" + key + ": expected a string");
  return j[key].get<std::string>();
}

inline const json& array_field(const json& j, const char* key, const std::string& path) {
  const auto& v = field(j, key, path);
  if (!v.is_array()) throw SchemaError(path + "/" + key + ": expected an array");
  return v;
}

inline Expr expr_value(const json& v, const std::string& path) {
  if (v.is_number_integer()) return Expr::literal(v.get<Int>());
  if (!v.is_string()) throw SchemaError(path + ": expected an expression string");
  try {
    return sym::parse_expr(v.get<std::string>());
  } catch (const ParseError& ex) {
    throw SchemaError(path + ": " + ex.what());
  }
}

inline Range range_value(const json& v, const std::string& path) {
  Range r;
  r.begin = expr_value(field(v, "begin", path), path + "/begin");
  r.end = expr_value(field(v, "end", path), path + "/end");
  if (v.contains("step")) r.step = expr_value(v["step"], path + "/step");
  return r;
}

inline std::vector<std::string> string_list(const json& j, const char* key, const std::string& path) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) throw SchemaError(path + "/" + key + ": expected an array");
  for (std::size_t i = 0; i < j[key].size(); ++i) {
    if (!j[key][i].is_string()) throw SchemaError(path + "/" + key + "/" + std::to_string(i) + ": expected a string");
    out.push_back(j[key][i].get<std::string>());
  }
  return out;
}

inline void read_graph(const json& g, const std::string& path, State& st, std::optional<std::size_t> parent) {
  const auto& nodes = array_field(g, "nodes", path);
  std::vector<std::pair<std::size_t, const json*>> bodies;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::string np = path + "/nodes/" + std::to_string(i);
    const json& jn = nodes[i];
    Node n;
    n.id = str_field(jn, "id", np);
    n.parent = parent;
    n.label = opt_str(jn, "label", np);
    if (jn.contains("source")) n.source = opt_str(jn, "source", np);
    std::string type = str_field(jn, "type", np);
    if (type == "access") {
      n.kind = AccessNode{str_field(jn, "container", np)};
    } else if (type == "tasklet") {
      Tasklet t;
      t.code = str_field(jn, "code", np);
      t.inputs = string_list(jn, "inputs", np);
      t.outputs = string_list(jn, "outputs", np);
      n.kind = std::move(t);
    } else if (type == "map") {
      MapScope m;
      m.params = string_list(jn, "params", np);
      const auto& rs = array_field(jn, "ranges", np);
      for (std::size_t k = 0; k < rs.size(); ++k) {
        m.ranges.push_back(range_value(rs[k], np + "/ranges/" + std::to_string(k)));
      }
      if (jn.contains("ordered")) {
        if (!jn["ordered"].is_boolean()) throw SchemaError(np + "/ordered: expected a boolean");
        m.ordered = jn["ordered"].get<bool>();
      }
      field(jn, "body", np);
      n.kind = std::move(m);
    } else {
      throw SchemaError(np + "/type: unknown node type '" + type + "'");
    }
    std::size_t idx = st.nodes.size();
    st.nodes.push_back(std::move(n));
    if (type == "map") read_graph(jn["body"], np + "/body", st, idx);
  }
  if (!g.contains("edges")) return;
  const auto& edges = array_field(g, "edges", path);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    std::string ep = path + "/edges/" + std::to_string(i);
    const json& je = edges[i];
    Memlet m;
    m.src = str_field(je, "src", ep);
    m.dst = str_field(je, "dst", ep);
    m.src_conn = opt_str(je, "src_conn", ep);
    m.dst_conn = opt_str(je, "dst_conn", ep);
    m.container = str_field(je, "container", ep);
    const auto& sub = array_field(je, "subset", ep);
    for (std::size_t k = 0; k < sub.size(); ++k) {
      m.subset.push_back(range_value(sub[k], ep + "/subset/" + std::to_string(k)));
    }
    if (je.contains("volume")) m.volume = expr_value(je["volume"], ep + "/volume");
    std::string kind = str_field(je, "kind", ep);
    if (kind == "read") {
      m.kind = AccessKind::Read;
    } else if (kind == "write") {
      m.kind = AccessKind::Write;
    } else {
      throw SchemaError(ep + "/kind: expected 'read' or 'write'");
    }
    m.declared_in = parent;
    st.edges.push_back(std::move(m));
  }
}

inline json range_json(const Range& r) {
  json j{{"begin", r.begin.str()}, {"end", r.end.str()}};
  if (!r.step.is_literal(1)) j["step"] = r.step.str();
  return j;
}

inline json graph_json(const State& st, std::optional<std::size_t> parent) {
  json nodes = json::array();
  for (std::size_t i = 0; i < st.nodes.size(); ++i) {
    const Node& n = st.nodes[i];
    if (n.parent != parent) continue;
    json jn{{"id", n.id}, {"type", n.type_name()}};
    if (!n.label.empty()) jn["label"] = n.label;
    if (n.source) jn["source"] = *n.source;
    if (n.is_access()) {
      jn["container"] = n.access().container;
    } else if (n.is_tasklet()) {
      jn["code"] = n.tasklet().code;
      jn["inputs"] = n.tasklet().inputs;
      jn["outputs"] = n.tasklet().outputs;
    } else {
      jn["params"] = n.map().params;
      json rs = json::array();
      for (const auto& r : n.map().ranges) rs.push_back(range_json(r));
      jn["ranges"] = rs;
      if (n.map().ordered) jn["ordered"] = true;
      jn["body"] = graph_json(st, i);
    }
    nodes.push_back(std::move(jn));
  }
  json edges = json::array();
  for (const auto& e : st.edges) {
    if (e.declared_in != parent) continue;
    json je{{"src", e.src}, {"dst", e.dst}, {"container", e.container}, {"kind", to_string(e.kind)}};
    if (!e.src_conn.empty()) je["src_conn"] = e.src_conn;
    if (!e.dst_conn.empty()) je["dst_conn"] = e.dst_conn;
    json sub = json::array();
    for (const auto& r : e.subset) sub.push_back(range_json(r));
    je["subset"] = sub;
    if (e.volume) je["volume"] = e.volume->str();
    edges.push_back(std::move(je));
  }
  return json{{"nodes", nodes}, {"edges", edges}};
}

}  // namespace detail

/// Structural decoding only (no semantic validation). Throws SchemaError with
/// a JSON-pointer style path on malformed documents.
inline Program parse_program(const nlohmann::json& doc) {
  using detail::field;
  Program p;
  p.name = detail::str_field(doc, "name", "");
  if (doc.contains("symbols")) {
    const auto& syms = detail::array_field(doc, "symbols", "");
    for (std::size_t i = 0; i < syms.size(); ++i) {
      std::string sp = "/symbols/" + std::to_string(i);
      Symbol s;
      if (syms[i].is_string()) {
        s.name = syms[i].get<std::string>();
      } else {
        s.name = detail::str_field(syms[i], "name", sp);
        if (syms[i].contains("default")) {
          if (!syms[i]["default"].is_number_integer()) throw SchemaError(sp + "/default: expected an integer");
          s.default_value = syms[i]["default"].get<Int>();
        }
      }
      p.symbols.push_back(std::move(s));
    }
  }
  const auto& cs = detail::array_field(doc, "containers", "");
  for (std::size_t i = 0; i < cs.size(); ++i) {
    std::string cp = "/containers/" + std::to_string(i);
    Container c;
    c.name = detail::str_field(cs[i], "name", cp);
    const auto& shape = detail::array_field(cs[i], "shape", cp);
    for (std::size_t d = 0; d < shape.size(); ++d) {
      c.shape.push_back(detail::expr_value(shape[d], cp + "/shape/" + std::to_string(d)));
    }
    const auto& es = field(cs[i], "element_size", cp);
    if (!es.is_number_integer()) throw SchemaError(cp + "/element_size: expected an integer");
    c.element_size = es.get<Int>();
    if (cs[i].contains("strides")) {
      const auto& st = detail::array_field(cs[i], "strides", cp);
      std::vector<Expr> strides;
      for (std::size_t d = 0; d < st.size(); ++d) {
        strides.push_back(detail::expr_value(st[d], cp + "/strides/" + std::to_string(d)));
      }
      c.strides = std::move(strides);
    }
    if (cs[i].contains("start_offset")) c.start_offset = detail::expr_value(cs[i]["start_offset"], cp + "/start_offset");
    p.containers.push_back(std::move(c));
  }
  const auto& states = detail::array_field(doc, "states", "");
  for (std::size_t i = 0; i < states.size(); ++i) {
    std::string sp = "/states/" + std::to_string(i);
    State st;
    st.name = detail::str_field(states[i], "name", sp);
    detail::read_graph(states[i], sp, st, std::nullopt);
    // Flat edge order: top-level edges first, then each scope body's edges in
    // node order. read_graph appends bodies before the enclosing graph's
    // edges, so reorder by declaring scope.
    std::stable_sort(st.edges.begin(), st.edges.end(), [](const Memlet& a, const Memlet& b) {
      auto key = [](const Memlet& m) { return m.declared_in ? static_cast<long>(*m.declared_in) : -1L; };
      return key(a) < key(b);
    });
    p.states.push_back(std::move(st));
  }
  p.renumber_edges();
  return p;
}

inline Program parse_program(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError(std::string("malformed JSON: ") + ex.what(), ex.byte > 0 ? ex.byte - 1 : 0);
  }
  return parse_program(doc);
}

/// Decodes and validates; throws ValidationError if any error diagnostic.
inline Program load_program(std::string_view text) {
  Program p = parse_program(text);
  auto diags = validate(p);
  if (has_errors(diags)) throw ValidationError(std::move(diags));
  return p;
}

inline nlohmann::json to_json(const Program& p) {
  using nlohmann::json;
  json syms = json::array();
  for (const auto& s : p.symbols) {
    json js{{"name", s.name}};
    if (s.default_value) js["default"] = *s.default_value;
    syms.push_back(std::move(js));
  }
  json cs = json::array();
  for (const auto& c : p.containers) {
    json jc{{"name", c.name}, {"element_size", c.element_size}};
    json shape = json::array();
    for (const auto& e : c.shape) shape.push_back(e.str());
    jc["shape"] = shape;
    if (c.strides) {
      json st = json::array();
      for (const auto& e : *c.strides) st.push_back(e.str());
      jc["strides"] = st;
    }
    if (!c.start_offset.is_literal(0)) jc["start_offset"] = c.start_offset.str();
    cs.push_back(std::move(jc));
  }
  json states = json::array();
  for (const auto& st : p.states) {
    json js = detail::graph_json(st, std::nullopt);
    js["name"] = st.name;
    states.push_back(std::move(js));
  }
  return json{{"name", p.name}, {"symbols", syms}, {"containers", cs}, {"states", states}};
}

inline std::string serialize(const Program& p) { return to_json(p).dump(2); }

}  // namespace moviz
