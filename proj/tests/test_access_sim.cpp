#include <gtest/gtest.h>

#include <atomic>

#include "support.hpp"

using namespace moviz;
using testing_support::fixture;

namespace {

ElementRef at(const AccessTrace& t, const char* c, std::vector<Int> idx) { return t.element(c, idx); }

nlohmann::json outer_doc() {
  return nlohmann::json::parse(testing_support::slurp(testing_support::fixture_path("outer.json")));
}

}  // namespace

TEST(IterationSpace, Lexicographic) {
  Program p = fixture("outer.json");
  auto pts = enumerate_iteration_space(p, {});
  // top-level units get an empty point each; only map body points carry values
  std::vector<IterationPoint> body;
  for (const auto& q : pts) {
    if (!q.values.empty()) body.push_back(q);
  }
  ASSERT_EQ(body.size(), 12u);
  EXPECT_EQ(body.front().str(), "i=0,j=0");
  EXPECT_EQ(body[1].str(), "i=0,j=1");
  EXPECT_EQ(body.back().str(), "i=2,j=3");
}

TEST(IterationSpace, StepAndEmpty) {
  auto d = outer_doc();
  d["states"][0]["nodes"][2]["ranges"][0]["step"] = "2";
  Program p = load_program(d.dump());
  std::set<Int> is;
  for (const auto& q : enumerate_iteration_space(p, {})) {
    if (auto i = q.get("i")) is.insert(*i);
  }
  EXPECT_EQ(is, (std::set<Int>{0, 2}));

  d = outer_doc();
  d["states"][0]["nodes"][2]["ranges"][0] = {{"begin", "1"}, {"end", "0"}};
  p = load_program(d.dump());
  for (const auto& q : enumerate_iteration_space(p, {})) EXPECT_TRUE(q.values.empty());
  EXPECT_EQ(simulate_accesses(p, {}).size(), 0u);
}

TEST(Simulate, OuterProductTrace) {
  Program p = fixture("outer.json");
  AccessTrace t = simulate_accesses(p, {});
  ASSERT_EQ(t.size(), 36u);
  AccessEvent e0 = t.event(0);
  EXPECT_EQ(e0.container, "A");
  EXPECT_EQ(e0.indices, (std::vector<Int>{0}));
  EXPECT_EQ(e0.kind, AccessKind::Read);
  EXPECT_EQ(e0.point.str(), "i=0,j=0");
  AccessEvent last = t.event(35);
  EXPECT_EQ(last.container, "C");
  EXPECT_EQ(last.indices, (std::vector<Int>{2, 3}));
  EXPECT_EQ(last.kind, AccessKind::Write);
}

TEST(Simulate, OuterProductCounts) {
  AccessTrace t = simulate_accesses(fixture("outer.json"), {});
  auto c = access_counts(t);
  for (Int i = 0; i < 3; ++i) EXPECT_EQ(c.total(at(t, "A", {i})), 4u);
  for (Int j = 0; j < 4; ++j) EXPECT_EQ(c.total(at(t, "B", {j})), 3u);
  for (Int i = 0; i < 3; ++i) {
    for (Int j = 0; j < 4; ++j) {
      auto e = at(t, "C", {i, j});
      EXPECT_EQ(c.writes[e.container][e.element], 1u);
      EXPECT_EQ(c.reads[e.container][e.element], 0u);
    }
  }
  EXPECT_EQ(c.sum(), t.size());
}

// Counts recomputed with plain nested loops over the iteration space.
TEST(Simulate, Conv3dAgainstBruteForce) {
  Program p = fixture("conv3d.json");
  AccessTrace t = simulate_accesses(p, {});
  auto c = access_counts(t);
  const int CI = 3, CO = 2, H = 9, W = 9, KH = 4, KW = 4, OH = H - KH + 1, OW = W - KW + 1;
  std::vector<std::uint64_t> in(CI * H * W), w(CO * CI * KH * KW), out_r(CO * OH * OW), out_w(CO * OH * OW);
  for (int co = 0; co < CO; ++co)
    for (int y = 0; y < OH; ++y)
      for (int x = 0; x < OW; ++x)
        for (int ci = 0; ci < CI; ++ci)
          for (int ky = 0; ky < KH; ++ky)
            for (int kx = 0; kx < KW; ++kx) {
              ++in[(ci * H + y + ky) * W + x + kx];
              ++w[((co * CI + ci) * KH + ky) * KW + kx];
              ++out_r[(co * OH + y) * OW + x];
              ++out_w[(co * OH + y) * OW + x];
            }
  EXPECT_EQ(c.reads[0], in);
  EXPECT_EQ(c.reads[1], w);
  EXPECT_EQ(c.reads[2], out_r);
  EXPECT_EQ(c.writes[2], out_w);
  for (auto v : w) EXPECT_EQ(v, 36u);
  for (Int ch = 0; ch < CI; ++ch) EXPECT_EQ(c.total(at(t, "inp", {ch, 0, 0})), 2u);
  EXPECT_EQ(t.size(), 4u * CO * OH * OW * CI * KH * KW);
}

TEST(Simulate, MatmulAgainstBruteForce) {
  Program p = fixture("matmul.json");
  AccessTrace t = simulate_accesses(p, {});
  auto c = access_counts(t);
  for (Int i = 0; i < 9; ++i)
    for (Int k = 0; k < 10; ++k) EXPECT_EQ(c.total(at(t, "A", {i, k})), 15u);
  for (Int k = 0; k < 10; ++k)
    for (Int j = 0; j < 15; ++j) EXPECT_EQ(c.total(at(t, "B", {k, j})), 9u);
  EXPECT_EQ(t.size(), 4u * 9 * 15 * 10);
}

TEST(Simulate, TraceLengthMatchesClosedForm) {
  for (const char* f : {"outer.json", "matmul.json", "conv3d.json", "hdiff.json", "hdiff_padded.json"}) {
    Program p = fixture(f);
    Bindings b = p.bindings_with_defaults();
    AccessTrace t = simulate_accesses(p, b);
    // every fixture memlet moves a fixed-size window per point, so the trace
    // length equals the summed window size times the points of its scope
    Int expect = 0;
    for (std::size_t e = 0; e < p.edge_count(); ++e) {
      const Memlet& me = p.edge(e);
      Int points = 1;
      auto [s, _] = p.locate_edge(e);
      // window sizes like (i + 4) - i + 1 do not depend on the point
      Bindings at_origin = b;
      for (auto n : p.states[s].edge_scope(me)) {
        const auto& map = p.states[s].nodes[n].map();
        for (const auto& r : map.ranges) points *= sym::evaluate(r.size(), b);
        for (const auto& prm : map.params) at_origin[prm] = 0;
      }
      Int window = 1;
      for (const auto& r : me.subset) window *= sym::evaluate(r.size(), at_origin);
      expect += window * points;
    }
    EXPECT_EQ(static_cast<Int>(t.size()), expect) << f;
    EXPECT_EQ(access_counts(t).sum(), t.size()) << f;
  }
}

TEST(Simulate, Deterministic) {
  Program p = fixture("conv3d.json");
  AccessTrace a = simulate_accesses(p, {});
  AccessTrace b = simulate_accesses(p, {});
  EXPECT_EQ(a.accesses, b.accesses);
  EXPECT_EQ(a.points, b.points);
}

TEST(Simulate, OutOfBoundsNamesEdgeAndPoint) {
  auto d = outer_doc();
  d["states"][0]["edges"][0]["subset"][0] = {{"begin", "i + 1"}, {"end", "i + 1"}};
  Program p = load_program(d.dump());
  try {
    simulate_accesses(p, {});
    FAIL();
  } catch (const SimulationError& e) {
    std::string w = e.what();
    EXPECT_NE(w.find("A->mult"), std::string::npos) << w;
    EXPECT_NE(w.find("i=2"), std::string::npos) << w;
  }
}

TEST(Simulate, EventBudgetAndCancellation) {
  Program p = fixture("matmul.json");
  SimOptions o;
  o.max_events = 100;
  EXPECT_THROW(simulate_accesses(p, {}, o), SimulationError);
  SimOptions c;
  c.cancelled = [] { return true; };
  EXPECT_THROW(simulate_accesses(p, {}, c), SimulationCancelled);
}

TEST(Related, OuterProductB0) {
  AccessTrace t = simulate_accesses(fixture("outer.json"), {});
  auto r = related_accesses(t, {at(t, "B", {0})});
  std::vector<ElementRef> expect;
  for (Int i = 0; i < 3; ++i) expect.push_back(at(t, "A", {i}));
  expect.push_back(at(t, "C", {0, 0}));
  expect.push_back(at(t, "C", {1, 0}));
  expect.push_back(at(t, "C", {2, 0}));
  std::sort(expect.begin(), expect.end());
  EXPECT_EQ(r.nonzero(), expect);
  for (const auto& e : expect) EXPECT_EQ(r.total(e), 1u);
}

TEST(Related, StackedSelections) {
  AccessTrace t = simulate_accesses(fixture("outer.json"), {});
  auto r = related_accesses(t, {at(t, "A", {1}), at(t, "B", {2})});
  EXPECT_EQ(r.total(at(t, "C", {1, 2})), 2u);
  EXPECT_EQ(r.total(at(t, "C", {1, 0})), 1u);
  // each selection counts the other at their shared point
  EXPECT_EQ(r.total(at(t, "A", {1})), 1u);
  EXPECT_EQ(r.total(at(t, "B", {2})), 1u);
}

TEST(Related, UnaccessedElementGivesEmptyMap) {
  auto d = outer_doc();
  d["containers"][0]["shape"] = {"N + 2"};  // A[3], A[4] act as padding
  AccessTrace t = simulate_accesses(load_program(d.dump()), {});
  auto e = at(t, "A", {4});
  EXPECT_EQ(access_counts(t).total(e), 0u);
  EXPECT_TRUE(related_accesses(t, {e}).nonzero().empty());
  EXPECT_THROW(related_accesses(t, {ElementRef{0, 1'000'000}}), SimulationError);
}

TEST(Related, SymmetricOnSingleElementMemlets) {
  AccessTrace t = simulate_accesses(fixture("matmul.json"), {});
  auto all = access_counts(t).nonzero();
  for (std::size_t a = 0; a < all.size(); a += 7) {
    auto ra = related_accesses(t, {all[a]});
    for (const auto& y : ra.nonzero()) {
      auto ry = related_accesses(t, {y});
      EXPECT_EQ(ra.total(y), ry.total(all[a]));
    }
  }
}

TEST(TraceWindow, Bounds) {
  AccessTrace t = simulate_accesses(fixture("outer.json"), {});
  auto w = trace_window(t, 0, 3);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0].container, "A");
  EXPECT_EQ(w[1].container, "B");
  EXPECT_EQ(w[2].container, "C");
  EXPECT_EQ(w[2].kind, AccessKind::Write);
  EXPECT_TRUE(trace_window(t, 5, 5).empty());
  EXPECT_EQ(trace_window(t, 0, t.size()).size(), t.size());
  EXPECT_THROW(trace_window(t, 4, 2), SimulationError);
  EXPECT_THROW(trace_window(t, 0, 37), SimulationError);
}

// Filtering the full trace by pinned parameters must equal simulating with
// those parameters pinned.
TEST(Projection, MatchesPinnedSimulation) {
  for (const char* f : {"outer.json", "matmul.json", "conv3d.json", "hdiff.json"}) {
    Program p = fixture(f);
    AccessTrace full = simulate_accesses(p, {});
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 6; ++trial) {
      std::map<std::string, Int, std::less<>> pins;
      for (const auto& pt : full.points) {
        for (const auto& [k, v] : pt.values) {
          if (rng() % 3 == 0) pins.emplace(k, v);
        }
        if (!pins.empty()) break;
      }
      SimOptions o;
      o.pinned = pins;
      AccessTrace pinned = simulate_accesses(p, {}, o);
      auto proj = project(full, pins);
      ASSERT_EQ(proj.size(), pinned.size()) << f;
      for (std::size_t i = 0; i < proj.size(); ++i) {
        EXPECT_EQ(proj[i].edge, pinned.accesses[i].edge);
        EXPECT_EQ(proj[i].element, pinned.accesses[i].element);
        EXPECT_EQ(full.points[proj[i].point], pinned.points[pinned.accesses[i].point]);
      }
    }
  }
}

TEST(Counts, EmptyTraceIsAllZero) {
  auto d = outer_doc();
  d["states"][0]["nodes"][2]["ranges"][1] = {{"begin", "0"}, {"end", "-1"}};
  AccessTrace t = simulate_accesses(load_program(d.dump()), {});
  auto c = access_counts(t);
  EXPECT_EQ(c.sum(), 0u);
  EXPECT_EQ(c.reads.size(), 3u);
}
