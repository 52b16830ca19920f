#pragma once

// One loaded program plus the mutable analysis state (bindings, cache
// config) and caches derived from it. Readers run concurrently; mutations
// go through a single writer and bump a state version. A simulation that is
// superseded by a newer version is cancelled.

#include <algorithm>
#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>

#include "moviz/access_sim.hpp"
#include "moviz/cache_model.hpp"
#include "moviz/movement.hpp"

namespace moviz {

/// A mutation named a state version that is no longer current.
class StaleVersion : public Error {
 public:
  StaleVersion(std::uint64_t expected, std::uint64_t current)
      : Error("state version " + std::to_string(expected) + " is stale (current " + std::to_string(current) + ")"),
        current_(current) {}
  std::uint64_t current() const { return current_; }

 private:
  std::uint64_t current_;
};

struct SessionStats {
  std::uint64_t version = 0;
  std::uint64_t metric_evaluations = 0;
  std::uint64_t metric_cache_hits = 0;
  std::uint64_t simulations = 0;
  std::uint64_t simulation_cache_hits = 0;
  std::uint64_t simulations_cancelled = 0;
};

/// Everything derived from one (bindings, line size) simulation.
struct LocalAnalysis {
  AccessTrace trace;
  MemoryMap map;
  StackDistanceProfile profile;
};

class AnalysisSession {
 public:
  explicit AnalysisSession(Program p, SimOptions sim_options = {})
      : program_(std::move(p)), model_(program_), sim_options_(std::move(sim_options)) {
    bindings_ = program_.bindings_with_defaults();
  }

  const Program& program() const { return program_; }

  std::uint64_t version() const {
    std::shared_lock lk(mu_);
    return version_;
  }

  Bindings bindings() const {
    std::shared_lock lk(mu_);
    return bindings_;
  }

  CacheConfig config() const {
    std::shared_lock lk(mu_);
    return config_;
  }

  /// Merges `b` into the current bindings. Unknown symbols, invalid values
  /// and stale versions are rejected without changing state.
  std::uint64_t set_bindings(const Bindings& b, std::optional<std::uint64_t> expected = std::nullopt) {
    for (const auto& [k, v] : b) {
      bool known = std::any_of(program_.symbols.begin(), program_.symbols.end(), [&](const Symbol& s) { return s.name == k; });
      if (!known) throw EvalError("unknown symbol '" + k + "'");
    }
    std::unique_lock lk(mu_);
    check_version(expected);
    Bindings next = bindings_;
    for (const auto& [k, v] : b) next[k] = v;
    auto diags = validate(program_, next);
    if (has_errors(diags)) throw ValidationError(std::move(diags));
    if (next != bindings_) {
      bindings_ = std::move(next);
      bump();
    }
    return version_;
  }

  std::uint64_t set_config(const CacheConfig& c, std::optional<std::uint64_t> expected = std::nullopt) {
    c.check();
    std::unique_lock lk(mu_);
    check_version(expected);
    if (!(c == config_)) {
      // the profile depends on the line size only; the threshold is applied late
      bool resimulate = c.line_size != config_.line_size;
      config_ = c;
      ++version_;
      if (resimulate) local_.reset();
    }
    return version_;
  }

  /// Metrics for the current bindings (cached).
  std::shared_ptr<const MetricSet> metrics() {
    std::uint64_t v;
    Bindings b;
    {
      std::shared_lock lk(mu_);
      if (metrics_ && metrics_->bindings == bindings_) {
        ++counters_.metric_cache_hits;
        return metrics_;
      }
      v = version_;
      b = bindings_;
    }
    auto m = std::make_shared<const MetricSet>(model_.evaluate(b));
    std::unique_lock lk(mu_);
    ++counters_.metric_evaluations;
    if (version_ == v) metrics_ = m;
    return m;
  }

  /// Trace, memory map and distance profile for the current bindings and
  /// line size. Cancelled with SimulationCancelled when the state version
  /// moves on while it runs.
  std::shared_ptr<const LocalAnalysis> local() {
    std::uint64_t v;
    Bindings b;
    CacheConfig c;
    {
      std::shared_lock lk(mu_);
      if (local_ && local_->trace.bindings == bindings_ && local_->map.line_size() == config_.line_size) {
        ++counters_.simulation_cache_hits;
        return local_;
      }
      v = version_;
      b = bindings_;
      c = config_;
    }
    SimOptions opts = sim_options_;
    auto outer = opts.cancelled;
    opts.cancelled = [this, v, outer] { return version_.load() != v || (outer && outer()); };
    std::shared_ptr<LocalAnalysis> la;
    try {
      auto trace = simulate_accesses(program_, b, opts);
      auto map = build_memory_map(trace, c);
      auto prof = stack_distances(trace, map);
      la = std::make_shared<LocalAnalysis>(LocalAnalysis{std::move(trace), std::move(map), std::move(prof)});
    } catch (const SimulationCancelled&) {
      std::unique_lock lk(mu_);
      ++counters_.simulations_cancelled;
      throw;
    }
    std::unique_lock lk(mu_);
    ++counters_.simulations;
    if (version_ == v) local_ = la;
    return la;
  }

  /// Miss classification under the current threshold; cheap, not cached.
  MissStats misses() {
    auto la = local();
    return classify_misses(la->profile, config_for(la), program_.edge_count());
  }

  PhysicalMovement physical() {
    auto la = local();
    CacheConfig c = config_for(la);
    auto ms = classify_misses(la->profile, c, program_.edge_count());
    return physical_movement(program_, ms, c, la->trace.bindings);
  }

  SessionStats stats() const {
    SessionStats s;
    s.version = version_;
    s.metric_evaluations = counters_.metric_evaluations;
    s.metric_cache_hits = counters_.metric_cache_hits;
    s.simulations = counters_.simulations;
    s.simulation_cache_hits = counters_.simulation_cache_hits;
    s.simulations_cancelled = counters_.simulations_cancelled;
    return s;
  }

 private:
  void check_version(std::optional<std::uint64_t> expected) const {
    if (expected && *expected != version_) throw StaleVersion(*expected, version_);
  }

  void bump() {
    ++version_;
    metrics_.reset();
    local_.reset();
  }

  // The threshold does not affect the profile, so it is read at call time;
  // the line size is taken from the analysis itself.
  CacheConfig config_for(const std::shared_ptr<const LocalAnalysis>& la) const {
    std::shared_lock lk(mu_);
    CacheConfig c = config_;
    c.line_size = la->map.line_size();
    return c;
  }

  const Program program_;
  const MovementModel model_;
  const SimOptions sim_options_;

  mutable std::shared_mutex mu_;
  std::atomic<std::uint64_t> version_{0};
  Bindings bindings_;
  CacheConfig config_;
  std::shared_ptr<const MetricSet> metrics_;
  std::shared_ptr<const LocalAnalysis> local_;
  // Counters are bumped under a shared lock, hence atomics.
  struct Counters {
    std::atomic<std::uint64_t> metric_evaluations{0}, metric_cache_hits{0}, simulations{0},
        simulation_cache_hits{0}, simulations_cancelled{0};
  };
  mutable Counters counters_;
};

}  // namespace moviz
