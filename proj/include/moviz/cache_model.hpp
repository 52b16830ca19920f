#pragma once

// Byte layout of containers, cache-line neighbourhoods, LRU stack distances
// at cache-line granularity, and miss classification for a fully-associative
// LRU cache.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "moviz/access_sim.hpp"
#include "moviz/program.hpp"

namespace moviz {

struct CacheConfig {
  Int line_size = 64;
  /// Lines; nullopt models an infinite cache (only cold misses).
  std::optional<std::uint64_t> capacity_threshold;

  void check() const {
    if (line_size < 1 || (line_size & (line_size - 1)) != 0) {
      throw Error("line size must be a positive power of two (got " + std::to_string(line_size) + ")");
    }
    if (capacity_threshold && *capacity_threshold == 0) throw Error("capacity threshold must be positive");
  }

  /// "inf" or a positive integer.
  static std::optional<std::uint64_t> parse_threshold(std::string_view s) {
    if (s == "inf" || s == "infinite" || s == "∞") return std::nullopt;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || v == 0) {
      throw Error("capacity threshold must be a positive integer or 'inf' (got '" + std::string(s) + "')");
    }
    return v;
  }

  std::string threshold_str() const { return capacity_threshold ? std::to_string(*capacity_threshold) : "inf"; }

  friend bool operator==(const CacheConfig&, const CacheConfig&) = default;
};

class MemoryMap {
 public:
  MemoryMap() = default;

  /// Containers placed in order, each base rounded up to the next line
  /// boundary after the previous container's last byte.
  MemoryMap(std::vector<ContainerLayout> layouts, Int line_size) : layouts_(std::move(layouts)), line_(line_size) {
    Int next = 0;
    for (const auto& l : layouts_) {
      Int base = (next + line_ - 1) / line_ * line_;
      bases_.push_back(base);
      next = base + l.extent() * l.element_size;
    }
  }

  Int line_size() const { return line_; }
  const std::vector<ContainerLayout>& layouts() const { return layouts_; }
  Int base(std::size_t c) const { return bases_.at(c); }
  Int end(std::size_t c) const { return bases_[c] + layouts_[c].extent() * layouts_[c].element_size; }

  Int address(std::size_t c, Int flat) const {
    const auto& l = layouts_[c];
    return bases_[c] + l.element_offset_flat(flat) * l.element_size;
  }

  /// Inclusive range of line ids overlapped by an element.
  std::pair<Int, Int> lines(std::size_t c, Int flat) const {
    Int a = address(c, flat);
    return {a / line_, (a + layouts_[c].element_size - 1) / line_};
  }

  std::optional<std::size_t> container_index(std::string_view name) const {
    for (std::size_t i = 0; i < layouts_.size(); ++i) {
      if (layouts_[i].name == name) return i;
    }
    return std::nullopt;
  }

 private:
  std::vector<ContainerLayout> layouts_;
  std::vector<Int> bases_;
  Int line_ = 64;
};

inline MemoryMap build_memory_map(const Program& p, const Bindings& b, const CacheConfig& config) {
  config.check();
  Bindings full = p.bindings_with_defaults(b);
  std::vector<ContainerLayout> layouts;
  for (const auto& c : p.containers) {
    try {
      layouts.push_back(evaluate_layout(c, full));
    } catch (const EvalError& ex) {
      throw SimulationError("containers[" + c.name + "]: " + ex.what());
    }
  }
  return MemoryMap(std::move(layouts), config.line_size);
}

inline MemoryMap build_memory_map(const AccessTrace& t, const CacheConfig& config) {
  config.check();
  return MemoryMap(t.layouts, config.line_size);
}

/// Every element (any container) whose bytes overlap a line that the
/// queried element overlaps. Includes the element itself.
inline std::vector<ElementRef> line_mates(std::size_t container, Int element, const MemoryMap& map) {
  const auto& layouts = map.layouts();
  if (container >= layouts.size() || element < 0 || element >= layouts[container].size()) {
    throw SimulationError("element out of range");
  }
  auto [first, last] = map.lines(container, element);
  Int lo = first * map.line_size();
  Int hi = (last + 1) * map.line_size();
  std::vector<ElementRef> out;
  for (std::size_t c = 0; c < layouts.size(); ++c) {
    if (map.end(c) <= lo || map.base(c) >= hi) continue;
    const auto& l = layouts[c];
    for (Int f = 0; f < l.size(); ++f) {
      Int a = map.address(c, f);
      if (a < hi && a + l.element_size > lo) out.push_back({c, f});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stack distances

inline constexpr std::uint64_t kCold = std::numeric_limits<std::uint64_t>::max();

inline std::string distance_str(std::uint64_t d) { return d == kCold ? "cold" : std::to_string(d); }

/// One (access, overlapped line) pair and its measured stack distance.
struct LineEvent {
  std::uint64_t access = 0;  // trace time index
  std::uint32_t edge = 0;
  std::uint32_t container = 0;
  Int element = 0;
  Int line = 0;
  std::uint64_t distance = kCold;
};

struct StackDistanceProfile {
  std::vector<LineEvent> events;
  /// Per container, CSR offsets (size elements+1) into `distances`.
  std::vector<std::vector<std::uint32_t>> offsets;
  std::vector<std::vector<std::uint64_t>> distances;
  std::map<std::uint64_t, std::uint64_t> histogram;  // finite distance -> count
  std::uint64_t cold = 0;
  std::uint64_t distinct_lines = 0;
  std::vector<std::uint64_t> distinct_lines_per_container;
  Bindings bindings;
  Int line_size = 0;

  std::span<const std::uint64_t> element(std::size_t c, Int f) const {
    const auto& o = offsets.at(c);
    return std::span<const std::uint64_t>(distances[c]).subspan(o.at(f), o[f + 1] - o[f]);
  }
};

namespace detail {

// Fenwick tree over line-event slots; a slot is marked while it holds the
// most recent reference of some line.
class Fenwick {
 public:
  explicit Fenwick(std::size_t n) : t_(n + 1, 0) {}
  void add(std::size_t i, std::int64_t v) {
    for (++i; i < t_.size(); i += i & (~i + 1)) t_[i] += v;
  }
  std::int64_t prefix(std::size_t i) const {  // sum of [0, i)
    std::int64_t s = 0;
    for (; i > 0; i -= i & (~i + 1)) s += t_[i];
    return s;
  }

 private:
  std::vector<std::int64_t> t_;
};

}  // namespace detail

/// LRU stack distance of every line touched by every access. Lines of one
/// access are measured against the stack before any of them moves, then
/// pushed to the top in ascending line order. Runs in O(n log n).
inline StackDistanceProfile stack_distances(const AccessTrace& trace, const MemoryMap& map) {
  StackDistanceProfile prof;
  prof.bindings = trace.bindings;
  prof.line_size = map.line_size();
  std::size_t total = 0;
  for (const auto& a : trace.accesses) {
    auto [f, l] = map.lines(trace.container_of(a), a.element);
    total += static_cast<std::size_t>(l - f + 1);
  }
  prof.events.reserve(total);
  detail::Fenwick marks(total);
  std::unordered_map<Int, std::size_t> last;
  last.reserve(1024);
  std::size_t slot = 0;
  for (std::size_t t = 0; t < trace.accesses.size(); ++t) {
    const Access& a = trace.accesses[t];
    std::size_t c = trace.container_of(a);
    auto [first, lastline] = map.lines(c, a.element);
    std::size_t begin = prof.events.size();
    for (Int line = first; line <= lastline; ++line) {
      LineEvent ev{t, a.edge, static_cast<std::uint32_t>(c), a.element, line, kCold};
      if (auto it = last.find(line); it != last.end()) {
        ev.distance = static_cast<std::uint64_t>(marks.prefix(slot) - marks.prefix(it->second + 1));
      }
      prof.events.push_back(ev);
    }
    for (std::size_t k = begin; k < prof.events.size(); ++k) {
      Int line = prof.events[k].line;
      auto it = last.find(line);
      if (it != last.end()) {
        marks.add(it->second, -1);
        it->second = slot;
      } else {
        last.emplace(line, slot);
      }
      marks.add(slot, 1);
      ++slot;
    }
  }
  prof.distinct_lines = last.size();

  prof.offsets.resize(trace.layouts.size());
  prof.distances.resize(trace.layouts.size());
  prof.distinct_lines_per_container.assign(trace.layouts.size(), 0);
  for (std::size_t c = 0; c < trace.layouts.size(); ++c) {
    prof.offsets[c].assign(static_cast<std::size_t>(trace.layouts[c].size()) + 1, 0);
  }
  for (const auto& ev : prof.events) {
    ++prof.offsets[ev.container][ev.element + 1];
    if (ev.distance == kCold) {
      ++prof.cold;
      ++prof.distinct_lines_per_container[ev.container];
    } else {
      ++prof.histogram[ev.distance];
    }
  }
  for (auto& o : prof.offsets) {
    for (std::size_t i = 1; i < o.size(); ++i) o[i] += o[i - 1];
  }
  std::vector<std::vector<std::uint32_t>> fill(prof.offsets.size());
  for (std::size_t c = 0; c < prof.offsets.size(); ++c) {
    prof.distances[c].resize(prof.offsets[c].back());
    fill[c].assign(prof.offsets[c].begin(), prof.offsets[c].end() - 1);
  }
  for (const auto& ev : prof.events) prof.distances[ev.container][fill[ev.container][ev.element]++] = ev.distance;
  return prof;
}

enum class DistanceMode { Min, Median, Max };

inline std::optional<DistanceMode> parse_distance_mode(std::string_view s) {
  if (s == "min") return DistanceMode::Min;
  if (s == "median") return DistanceMode::Median;
  if (s == "max") return DistanceMode::Max;
  return std::nullopt;
}

/// Aggregate of a distance list; COLD orders above every finite distance,
/// median is the lower median.
inline std::optional<std::uint64_t> aggregate(std::span<const std::uint64_t> ds, DistanceMode mode) {
  if (ds.empty()) return std::nullopt;
  std::vector<std::uint64_t> v(ds.begin(), ds.end());
  std::sort(v.begin(), v.end());
  switch (mode) {
    case DistanceMode::Min: return v.front();
    case DistanceMode::Max: return v.back();
    case DistanceMode::Median: return v[(v.size() - 1) / 2];
  }
  return std::nullopt;
}

/// Per container, per element aggregate; nullopt for never-accessed elements.
inline std::vector<std::vector<std::optional<std::uint64_t>>> distance_stats(const StackDistanceProfile& prof,
                                                                            DistanceMode mode) {
  std::vector<std::vector<std::optional<std::uint64_t>>> out(prof.offsets.size());
  for (std::size_t c = 0; c < prof.offsets.size(); ++c) {
    std::size_t n = prof.offsets[c].size() - 1;
    out[c].resize(n);
    for (std::size_t f = 0; f < n; ++f) out[c][f] = aggregate(prof.element(c, static_cast<Int>(f)), mode);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Misses

struct MissCounts {
  std::uint64_t cold = 0;
  std::uint64_t capacity = 0;
  std::uint64_t hit = 0;

  std::uint64_t misses() const { return cold + capacity; }
  std::uint64_t total() const { return cold + capacity + hit; }
  MissCounts& operator+=(const MissCounts& o) {
    cold += o.cold;
    capacity += o.capacity;
    hit += o.hit;
    return *this;
  }
  friend bool operator==(const MissCounts&, const MissCounts&) = default;
};

struct MissStats {
  std::vector<std::vector<MissCounts>> elements;  // [container][flat element]
  std::vector<MissCounts> containers;
  std::vector<MissCounts> edges;  // by memlet id
  MissCounts total;
  CacheConfig config;
  Bindings bindings;
};

/// COLD -> cold miss; distance >= threshold -> capacity miss; else hit.
/// Conflict misses are not modeled (fully-associative cache).
inline MissStats classify_misses(const StackDistanceProfile& prof, const CacheConfig& config,
                                 std::size_t edge_count = 0) {
  MissStats s;
  s.config = config;
  s.bindings = prof.bindings;
  s.containers.resize(prof.offsets.size());
  s.elements.resize(prof.offsets.size());
  for (std::size_t c = 0; c < prof.offsets.size(); ++c) s.elements[c].resize(prof.offsets[c].size() - 1);
  std::size_t max_edge = edge_count;
  for (const auto& ev : prof.events) max_edge = std::max<std::size_t>(max_edge, ev.edge + 1);
  s.edges.resize(max_edge);
  for (const auto& ev : prof.events) {
    MissCounts one;
    if (ev.distance == kCold) {
      one.cold = 1;
    } else if (config.capacity_threshold && ev.distance >= *config.capacity_threshold) {
      one.capacity = 1;
    } else {
      one.hit = 1;
    }
    s.elements[ev.container][ev.element] += one;
    s.containers[ev.container] += one;
    s.edges[ev.edge] += one;
    s.total += one;
  }
  return s;
}

struct PhysicalMovement {
  std::vector<Int> edge_bytes;       // by memlet id
  std::vector<Int> container_bytes;  // by container index
  Int line_size = 0;
};

/// Bytes crossing the memory interface: misses x line size per container;
/// per memlet the misses its own events caused at each access-node endpoint.
inline PhysicalMovement physical_movement(const Program& p, const MissStats& misses, const CacheConfig& config,
                                          const Bindings& b) {
  if (p.bindings_with_defaults(b) != misses.bindings) {
    throw SimulationError("miss statistics were computed for different bindings");
  }
  if (misses.containers.size() != p.containers.size()) {
    throw SimulationError("miss statistics do not belong to this program");
  }
  PhysicalMovement out;
  out.line_size = config.line_size;
  for (const auto& c : misses.containers) out.container_bytes.push_back(static_cast<Int>(c.misses()) * config.line_size);
  out.edge_bytes.assign(p.edge_count(), 0);
  for (const auto& st : p.states) {
    for (const auto& e : st.edges) {
      std::uint64_t n = e.id < misses.edges.size() ? misses.edges[e.id].misses() : 0;
      for (const auto& endpoint : {e.src, e.dst}) {
        auto idx = st.find(endpoint);
        if (idx && st.nodes[*idx].is_access() && st.nodes[*idx].access().container == e.container) {
          out.edge_bytes[e.id] += static_cast<Int>(n) * config.line_size;
        }
      }
    }
  }
  return out;
}

}  // namespace moviz
