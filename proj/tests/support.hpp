#pragma once

// Shared test helpers: fixture loading and reference implementations that
// recompute results the slow, obvious way.

#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moviz/moviz.hpp"

namespace testing_support {

using moviz::Int;

inline std::string fixture_path(const std::string& name) { return std::string(MOVIZ_FIXTURE_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline moviz::Program fixture(const std::string& name) { return moviz::load_program(slurp(fixture_path(name))); }

inline constexpr std::uint64_t kColdRef = std::numeric_limits<std::uint64_t>::max();

/// Line references in processing order: events in time order, lines of one
/// event ascending. `event_of[k]` is the event index of reference k.
struct LineRefs {
  std::vector<Int> line;
  std::vector<std::size_t> event_of;
};

/// O(n^2) stack distances: for each reference, the number of distinct lines
/// referenced after the line's previous reference and before the current
/// event began; cold when the line was never referenced by an earlier event.
inline std::vector<std::uint64_t> rescan_distances(const LineRefs& r) {
  std::vector<std::uint64_t> out(r.line.size(), kColdRef);
  std::size_t event_start = 0;
  for (std::size_t k = 0; k < r.line.size(); ++k) {
    if (k > 0 && r.event_of[k] != r.event_of[k - 1]) event_start = k;
    std::size_t prev = SIZE_MAX;
    for (std::size_t j = event_start; j-- > 0;) {
      if (r.line[j] == r.line[k]) {
        prev = j;
        break;
      }
    }
    if (prev == SIZE_MAX) continue;
    std::set<Int> between(r.line.begin() + static_cast<std::ptrdiff_t>(prev) + 1,
                          r.line.begin() + static_cast<std::ptrdiff_t>(event_start));
    out[k] = between.size();
  }
  return out;
}

/// Byte address of every element of every container, recomputed from the
/// program: bases rounded up to the line size in declaration order,
/// address = base + (start_offset + sum idx*stride) * element_size.
struct BruteLayout {
  struct Elem {
    std::size_t container;
    std::vector<Int> idx;
    Int addr;
    Int size;
  };
  std::vector<Elem> elems;
};

inline BruteLayout brute_layout(const moviz::Program& p, const moviz::Bindings& b, Int line) {
  BruteLayout out;
  Int next = 0;
  for (std::size_t c = 0; c < p.containers.size(); ++c) {
    const auto& con = p.containers[c];
    std::vector<Int> shape, strides;
    for (const auto& e : con.shape) shape.push_back(moviz::sym::evaluate(e, b));
    if (con.strides) {
      for (const auto& e : *con.strides) strides.push_back(moviz::sym::evaluate(e, b));
    } else {
      strides.assign(shape.size(), 1);
      for (std::size_t d = shape.size(); d-- > 1;) strides[d - 1] = strides[d] * shape[d];
    }
    Int off = moviz::sym::evaluate(con.start_offset, b);
    Int base = ((next + line - 1) / line) * line;
    Int max_end = base;
    std::vector<Int> idx(shape.size(), 0);
    bool done = shape.empty();
    while (!done) {
      Int lin = off;
      for (std::size_t d = 0; d < shape.size(); ++d) lin += idx[d] * strides[d];
      Int addr = base + lin * con.element_size;
      out.elems.push_back({c, idx, addr, con.element_size});
      max_end = std::max(max_end, addr + con.element_size);
      std::size_t d = shape.size();
      while (d > 0) {
        --d;
        if (++idx[d] < shape[d]) break;
        idx[d] = 0;
        if (d == 0) done = true;
      }
    }
    next = max_end;
  }
  return out;
}

/// All elements sharing at least one line with the element at `addr`.
inline std::set<std::pair<std::size_t, std::vector<Int>>> brute_line_mates(const BruteLayout& l, std::size_t c,
                                                                           const std::vector<Int>& idx, Int line) {
  Int addr = -1, size = 0;
  for (const auto& e : l.elems) {
    if (e.container == c && e.idx == idx) {
      addr = e.addr;
      size = e.size;
    }
  }
  Int lo = addr / line, hi = (addr + size - 1) / line;
  std::set<std::pair<std::size_t, std::vector<Int>>> out;
  for (const auto& e : l.elems) {
    Int a = e.addr / line, z = (e.addr + e.size - 1) / line;
    if (a <= hi && z >= lo) out.insert({e.container, e.idx});
  }
  return out;
}

/// A single one-dimensional container trace with the given element visits.
inline moviz::AccessTrace synthetic_trace(Int elements, Int element_size, const std::vector<Int>& visits) {
  moviz::Container c;
  c.name = "X";
  c.shape = {moviz::Expr::literal(elements)};
  c.element_size = element_size;
  moviz::AccessTrace t;
  t.layouts.push_back(moviz::evaluate_layout(c, {}));
  t.edges.push_back({0, moviz::AccessKind::Read});
  t.points.emplace_back();
  for (Int v : visits) t.accesses.push_back({0, 0, v});
  return t;
}

/// Lines overlapped by element f of a synthetic trace, ascending.
inline LineRefs synthetic_refs(const std::vector<Int>& visits, Int element_size, Int line) {
  LineRefs r;
  for (std::size_t e = 0; e < visits.size(); ++e) {
    Int a = visits[e] * element_size;
    for (Int l = a / line; l <= (a + element_size - 1) / line; ++l) {
      r.line.push_back(l);
      r.event_of.push_back(e);
    }
  }
  return r;
}

/// A map over (i, j) whose body holds `edges / 2` tasklets, each reading
/// A[i, j] and writing B[i, j]. Used for re-evaluation latency checks.
inline moviz::Program synthetic_program(std::size_t edges) {
  using nlohmann::json;
  json body_nodes = json::array(), top_edges = json::array();
  auto cell = json::array({{{"begin", "i"}, {"end", "i"}}, {{"begin", "j"}, {"end", "j"}}});
  for (std::size_t t = 0; t < edges / 2; ++t) {
    std::string id = "t" + std::to_string(t);
    body_nodes.push_back({{"id", id}, {"type", "tasklet"}, {"code", "o = a * 2 + 1"}, {"inputs", {"a"}}, {"outputs", {"o"}}});
    top_edges.push_back({{"src", "A"}, {"dst", id}, {"dst_conn", "a"}, {"container", "A"}, {"kind", "read"}, {"subset", cell}});
    top_edges.push_back({{"src", id}, {"src_conn", "o"}, {"dst", "B"}, {"container", "B"}, {"kind", "write"}, {"subset", cell}});
  }
  json doc = {
      {"name", "synthetic"},
      {"symbols", {{{"name", "N"}, {"default", 64}}, {{"name", "M"}, {"default", 32}}}},
      {"containers",
       {{{"name", "A"}, {"shape", {"N", "M"}}, {"element_size", 8}},
        {{"name", "B"}, {"shape", {"N", "M"}}, {"element_size", 4}}}},
      {"states",
       {{{"name", "main"},
         {"nodes",
          {{{"id", "A"}, {"type", "access"}, {"container", "A"}},
           {{"id", "grid"},
            {"type", "map"},
            {"params", {"i", "j"}},
            {"ranges", {{{"begin", "0"}, {"end", "N - 1"}}, {{"begin", "0"}, {"end", "M - 1"}}}},
            {"body", {{"nodes", body_nodes}, {"edges", json::array()}}}},
           {{"id", "B"}, {"type", "access"}, {"container", "B"}}}},
         {"edges", top_edges}}}}};
  return moviz::parse_program(doc);
}

}  // namespace testing_support
