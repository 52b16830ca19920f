#include <gtest/gtest.h>

#include "support.hpp"

using namespace moviz;
using testing_support::fixture;

namespace {

CacheConfig line(Int bytes, std::optional<std::uint64_t> threshold = std::nullopt) {
  CacheConfig c;
  c.line_size = bytes;
  c.capacity_threshold = threshold;
  return c;
}

std::set<std::pair<std::size_t, std::vector<Int>>> engine_mates(const MemoryMap& m, std::size_t c,
                                                                const std::vector<Int>& idx) {
  std::set<std::pair<std::size_t, std::vector<Int>>> out;
  for (const auto& e : line_mates(c, m.layouts()[c].flat(idx), m)) {
    out.insert({e.container, m.layouts()[e.container].unflat(e.element)});
  }
  return out;
}

StackDistanceProfile profile_of(const std::vector<Int>& visits, Int elements, Int esz, Int line_size) {
  AccessTrace t = testing_support::synthetic_trace(elements, esz, visits);
  return stack_distances(t, build_memory_map(t, line(line_size)));
}

}  // namespace

TEST(MemoryMapTest, SingleContainer) {
  auto d = nlohmann::json::parse(testing_support::slurp(testing_support::fixture_path("outer.json")));
  Program p = load_program(d.dump());
  MemoryMap m = build_memory_map(p, p.bindings_with_defaults(), line(64));
  EXPECT_EQ(m.base(0), 0);
  EXPECT_EQ(m.address(0, 2), 16);
}

TEST(MemoryMapTest, RoundUpRule) {
  Program p = fixture("matmul.json");
  MemoryMap m = build_memory_map(p, p.bindings_with_defaults(), line(64));
  EXPECT_EQ(m.base(0), 0);
  EXPECT_EQ(m.end(0), 360);
  EXPECT_EQ(m.base(1), 384);
  for (std::size_t c = 0; c + 1 < p.containers.size(); ++c) EXPECT_LE(m.end(c), m.base(c + 1));
}

TEST(MemoryMapTest, PaddedHdiffRowsAreLineAligned) {
  Program p = fixture("hdiff_padded.json");
  Bindings b{{"I", 8}, {"J", 8}, {"K", 5}};
  MemoryMap m = build_memory_map(p, b, line(64));
  const auto& l = m.layouts()[0];
  EXPECT_EQ(l.strides, (std::vector<Int>{16 * 12, 16, 1}));
  for (Int k = 0; k < 5; ++k) {
    for (Int i = 0; i < 12; ++i) {
      std::vector<Int> idx{k, i, 0};
      EXPECT_EQ(m.address(0, l.flat(idx)) % 64, 0);
    }
  }
  // unpadded rows of 12 elements start every 96 bytes
  Program u = fixture("hdiff_reordered.json");
  MemoryMap mu = build_memory_map(u, b, line(64));
  std::vector<Int> row1{0, 1, 0};
  EXPECT_EQ(mu.address(0, mu.layouts()[0].flat(row1)) % 64, 32);
}

TEST(LineMates, RowMajorWrap) {
  Program p = fixture("matmul.json");
  MemoryMap m = build_memory_map(p, p.bindings_with_defaults(), line(64));
  auto got = engine_mates(m, 0, {0, 0});
  std::set<std::pair<std::size_t, std::vector<Int>>> expect;
  for (Int j = 0; j < 10; ++j) expect.insert({0, {0, j}});
  for (Int j = 0; j < 6; ++j) expect.insert({0, {1, j}});
  EXPECT_EQ(got, expect);
}

TEST(LineMates, ColumnMajor) {
  Program p = fixture("matmul.json");
  MemoryMap m = build_memory_map(p, p.bindings_with_defaults(), line(64));
  auto got = engine_mates(m, 1, {0, 1});
  std::set<std::pair<std::size_t, std::vector<Int>>> expect;
  // B[0,1] sits 40 bytes into the line holding column 0 and the top of column 1
  for (Int k = 0; k < 10; ++k) expect.insert({1, {k, 0}});
  for (Int k = 0; k < 6; ++k) expect.insert({1, {k, 1}});
  EXPECT_EQ(got, expect);
}

TEST(LineMates, ElementAsLargeAsLine) {
  auto d = nlohmann::json::parse(testing_support::slurp(testing_support::fixture_path("outer.json")));
  d["containers"][2]["element_size"] = 64;
  Program p = load_program(d.dump());
  MemoryMap m = build_memory_map(p, p.bindings_with_defaults(), line(64));
  EXPECT_EQ(line_mates(2, 5, m), (std::vector<ElementRef>{{2, 5}}));
  EXPECT_THROW(line_mates(2, 12, m), Error);
}

TEST(LineMates, MatchesAddressEnumeration) {
  for (const char* f : {"matmul.json", "conv3d.json", "hdiff.json", "hdiff_padded.json"}) {
    Program p = fixture(f);
    Bindings b = p.bindings_with_defaults();
    for (Int ls : {16, 32, 64, 128}) {
      MemoryMap m = build_memory_map(p, b, line(ls));
      auto brute = testing_support::brute_layout(p, b, ls);
      for (std::size_t k = 0; k < brute.elems.size(); k += 37) {
        const auto& e = brute.elems[k];
        EXPECT_EQ(m.address(e.container, m.layouts()[e.container].flat(e.idx)), e.addr);
        EXPECT_EQ(engine_mates(m, e.container, e.idx), testing_support::brute_line_mates(brute, e.container, e.idx, ls))
            << f << " line " << ls;
      }
    }
  }
}

TEST(StackDistance, Examples) {
  // element size 64 with 64-byte lines: element f lives on line f
  auto a = profile_of({0, 0}, 4, 64, 64);
  ASSERT_EQ(a.events.size(), 2u);
  EXPECT_EQ(a.events[0].distance, kCold);
  EXPECT_EQ(a.events[1].distance, 0u);
  auto b = profile_of({0, 1, 0}, 4, 64, 64);
  EXPECT_EQ(b.events[0].distance, kCold);
  EXPECT_EQ(b.events[1].distance, kCold);
  EXPECT_EQ(b.events[2].distance, 1u);
}

TEST(StackDistance, LineMatesShareReuse) {
  // 8-byte elements, 32-byte lines: elements 0..3 share line 0
  auto p = profile_of({0, 1, 2, 3, 4, 0}, 8, 8, 32);
  std::vector<std::uint64_t> d;
  for (const auto& e : p.events) d.push_back(e.distance);
  EXPECT_EQ(d, (std::vector<std::uint64_t>{kCold, 0, 0, 0, kCold, 1}));
}

TEST(StackDistance, SpanningElementMeasuresBeforeMoving) {
  // 12-byte elements on 16-byte lines: element 1 covers bytes 12..23 (lines 0 and 1)
  auto p = profile_of({1, 1}, 4, 12, 16);
  ASSERT_EQ(p.events.size(), 4u);
  EXPECT_EQ(p.events[2].line, 0);
  EXPECT_EQ(p.events[2].distance, 1u);  // line 1 was moved above line 0
  EXPECT_EQ(p.events[3].distance, 0u);
  EXPECT_EQ(p.element(0, 1).size(), 4u);
}

TEST(StackDistance, MatchesRescanOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    Int esz = std::vector<Int>{4, 8, 12, 24}[rng() % 4];
    Int ls = std::vector<Int>{16, 32, 64}[rng() % 3];
    Int lines = 1 + static_cast<Int>(rng() % 64);
    Int elements = std::max<Int>(1, lines * ls / esz);
    std::size_t n = 1 + rng() % 3000;
    std::vector<Int> visits(n);
    for (auto& v : visits) v = static_cast<Int>(rng() % elements);
    auto prof = profile_of(visits, elements, esz, ls);
    auto oracle = testing_support::rescan_distances(testing_support::synthetic_refs(visits, esz, ls));
    ASSERT_EQ(prof.events.size(), oracle.size());
    for (std::size_t k = 0; k < oracle.size(); ++k) ASSERT_EQ(prof.events[k].distance, oracle[k]) << trial << ":" << k;
  }
}

TEST(DistanceStats, Aggregates) {
  std::vector<std::uint64_t> a{0, 2, kCold};
  EXPECT_EQ(aggregate(a, DistanceMode::Min), 0u);
  EXPECT_EQ(aggregate(a, DistanceMode::Median), 2u);
  EXPECT_EQ(aggregate(a, DistanceMode::Max), kCold);
  std::vector<std::uint64_t> c{kCold};
  for (auto m : {DistanceMode::Min, DistanceMode::Median, DistanceMode::Max}) EXPECT_EQ(aggregate(c, m), kCold);
  std::vector<std::uint64_t> e{1, 3};
  EXPECT_EQ(aggregate(e, DistanceMode::Median), 1u);
  EXPECT_FALSE(aggregate(std::vector<std::uint64_t>{}, DistanceMode::Min));
}

TEST(DistanceStats, NeverAccessedIsAbsent) {
  auto p = profile_of({0, 2}, 4, 64, 64);
  auto s = distance_stats(p, DistanceMode::Max);
  EXPECT_TRUE(s[0][0]);
  EXPECT_FALSE(s[0][1]);
}

TEST(Misses, Classification) {
  // distances COLD, 0, 5 via lines 0 0 1 2 3 4 5 0 with the middle ones ignored
  auto p = profile_of({0, 0, 1, 2, 3, 4, 5, 0}, 8, 64, 64);
  auto s = classify_misses(p, line(64, 4));
  auto e0 = s.elements[0][0];
  EXPECT_EQ(e0.cold, 1u);
  EXPECT_EQ(e0.hit, 1u);
  EXPECT_EQ(e0.capacity, 1u);
  EXPECT_EQ(s.total.total(), p.events.size());
}

TEST(Misses, InfiniteThresholdCountsDistinctLines) {
  for (const char* f : {"outer.json", "matmul.json", "conv3d.json", "hdiff.json"}) {
    Program p = fixture(f);
    AccessTrace t = simulate_accesses(p, {});
    for (Int ls : {32, 64}) {
      auto prof = stack_distances(t, build_memory_map(t, line(ls)));
      auto s = classify_misses(prof, line(ls), p.edge_count());
      EXPECT_EQ(s.total.capacity, 0u);
      EXPECT_EQ(s.total.cold, prof.distinct_lines);
      auto phys = physical_movement(p, s, line(ls), {});
      for (std::size_t c = 0; c < p.containers.size(); ++c) {
        EXPECT_EQ(phys.container_bytes[c], static_cast<Int>(prof.distinct_lines_per_container[c]) * ls);
      }
    }
  }
}

TEST(Misses, ThresholdOneMissesEveryReuseOfAnotherLine) {
  auto p = profile_of({0, 0, 1, 0, 2, 2}, 4, 64, 64);
  auto s = classify_misses(p, line(64, 1));
  EXPECT_EQ(s.total.cold, 3u);
  EXPECT_EQ(s.total.capacity, 1u);
  EXPECT_EQ(s.total.hit, 2u);
}

TEST(Misses, MonotoneInThreshold) {
  AccessTrace t = simulate_accesses(fixture("conv3d.json"), {});
  auto prof = stack_distances(t, build_memory_map(t, line(64)));
  std::uint64_t prev = 0;
  for (std::uint64_t th : {1024u, 256u, 64u, 16u, 4u, 2u, 1u}) {
    auto s = classify_misses(prof, line(64, th));
    EXPECT_GE(s.total.misses(), prev);
    prev = s.total.misses();
  }
}

TEST(Physical, EdgeAttribution) {
  Program p = fixture("outer.json");
  AccessTrace t = simulate_accesses(p, {});
  auto prof = stack_distances(t, build_memory_map(t, line(64)));
  auto s = classify_misses(prof, line(64), p.edge_count());
  auto phys = physical_movement(p, s, line(64), {});
  // A, B fit one line each; C spans two
  EXPECT_EQ(phys.edge_bytes, (std::vector<Int>{64, 64, 128}));
  EXPECT_EQ(phys.container_bytes, (std::vector<Int>{64, 64, 128}));
  EXPECT_THROW(physical_movement(p, s, line(64), {{"N", 2}}), SimulationError);
}

TEST(Config, Threshold) {
  EXPECT_FALSE(CacheConfig::parse_threshold("inf"));
  EXPECT_EQ(CacheConfig::parse_threshold("32"), 32u);
  EXPECT_THROW(CacheConfig::parse_threshold("0"), Error);
  EXPECT_THROW(CacheConfig::parse_threshold("x"), Error);
  EXPECT_THROW(line(48).check(), Error);
}
