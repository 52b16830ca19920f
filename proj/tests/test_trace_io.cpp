#include <gtest/gtest.h>

#include "support.hpp"

using namespace moviz;
using testing_support::fixture;

namespace {

void expect_same(const std::vector<AccessEvent>& got, const AccessTrace& t) {
  ASSERT_EQ(got.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    AccessEvent e = t.event(i);
    EXPECT_EQ(got[i].time, e.time);
    EXPECT_EQ(got[i].point, e.point);
    EXPECT_EQ(got[i].edge, e.edge);
    EXPECT_EQ(got[i].container, e.container);
    EXPECT_EQ(got[i].indices, e.indices);
    EXPECT_EQ(got[i].kind, e.kind);
  }
}

}  // namespace

TEST(TraceIo, TextRoundTrip) {
  for (const char* f : {"outer.json", "conv3d.json"}) {
    AccessTrace t = simulate_accesses(fixture(f), {});
    std::stringstream ss;
    write_trace_text(ss, t);
    expect_same(read_trace_text(ss), t);
  }
}

TEST(TraceIo, BinaryRoundTrip) {
  for (const char* f : {"outer.json", "hdiff_padded.json"}) {
    AccessTrace t = simulate_accesses(fixture(f), {});
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    write_trace_binary(ss, t);
    expect_same(read_trace_binary(ss), t);
  }
}

TEST(TraceIo, TextFormatLayout) {
  AccessTrace t = simulate_accesses(fixture("outer.json"), {});
  std::stringstream ss;
  write_trace_text(ss, t);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "# moviz trace v1");
  std::getline(ss, line);
  std::getline(ss, line);
  EXPECT_EQ(line, "0\ti=0,j=0\t0\tA\t0\tR");
}

TEST(TraceIo, BinaryRejectsGarbage) {
  std::stringstream bad("not a trace at all");
  EXPECT_THROW(read_trace_binary(bad), Error);
  AccessTrace t = simulate_accesses(fixture("outer.json"), {});
  std::stringstream ss;
  write_trace_binary(ss, t);
  std::string s = ss.str();
  std::stringstream cut(s.substr(0, s.size() - 6));
  EXPECT_THROW(read_trace_binary(cut), Error);
}
