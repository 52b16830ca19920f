#pragma once

// Trace export.
//
// Text form, one event per line after a '#' header, tab-separated:
//   time  point(name=value,...)  edge  container  indices(i,j,...)  R|W
//
// Binary form, all fields little-endian 32-bit:
//   magic "MVZT", version (1)
//   container count, then per container: name length, rank, name bytes
//     padded with zeros to a multiple of 4
//   parameter-name count, then per name: length, bytes padded to 4
//   event count, then per event:
//     time, edge, container, kind (0 read, 1 write),
//     point arity, (name id, value) x arity, indices x container rank

#include <bit>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "moviz/access_sim.hpp"

namespace moviz {

inline void write_trace_text(std::ostream& os, const AccessTrace& t) {
  os << "# moviz trace v1\n# time\tpoint\tedge\tcontainer\tindices\tkind\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Access& a = t.accesses[i];
    const auto& l = t.layouts[t.container_of(a)];
    os << i << '\t' << t.points[a.point].str() << '\t' << a.edge << '\t' << l.name << '\t';
    auto idx = l.unflat(a.element);
    for (std::size_t d = 0; d < idx.size(); ++d) os << (d ? "," : "") << idx[d];
    os << '\t' << (t.kind_of(a) == AccessKind::Read ? 'R' : 'W') << '\n';
  }
}

namespace detail {

inline void put32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw Error("truncated binary trace");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

inline std::uint32_t narrow32(Int v) {
  if (v < INT32_MIN || v > INT32_MAX) throw Error("value does not fit the 32-bit trace format");
  return static_cast<std::uint32_t>(static_cast<std::int32_t>(v));
}

inline void put_string(std::ostream& os, const std::string& s) {
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
  static const char zeros[4] = {};
  os.write(zeros, static_cast<std::streamsize>((4 - s.size() % 4) % 4));
}

inline std::string get_string(std::istream& is, std::uint32_t n) {
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw Error("truncated binary trace");
  char pad[4];
  is.read(pad, (4 - n % 4) % 4);
  return s;
}

}  // namespace detail

inline constexpr std::uint32_t kTraceMagic = 0x545A564D;  // "MVZT" little-endian

inline void write_trace_binary(std::ostream& os, const AccessTrace& t) {
  using detail::put32;
  if (t.size() > UINT32_MAX) throw Error("trace too long for the 32-bit format");
  put32(os, kTraceMagic);
  put32(os, 1);
  put32(os, static_cast<std::uint32_t>(t.layouts.size()));
  for (const auto& l : t.layouts) {
    put32(os, static_cast<std::uint32_t>(l.name.size()));
    put32(os, static_cast<std::uint32_t>(l.shape.size()));
    detail::put_string(os, l.name);
  }
  std::map<std::string, std::uint32_t> names;
  std::vector<std::string> ordered;
  for (const auto& p : t.points) {
    for (const auto& [k, v] : p.values) {
      if (names.emplace(k, static_cast<std::uint32_t>(ordered.size())).second) ordered.push_back(k);
    }
  }
  put32(os, static_cast<std::uint32_t>(ordered.size()));
  for (const auto& n : ordered) {
    put32(os, static_cast<std::uint32_t>(n.size()));
    detail::put_string(os, n);
  }
  put32(os, static_cast<std::uint32_t>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Access& a = t.accesses[i];
    std::size_t c = t.container_of(a);
    put32(os, static_cast<std::uint32_t>(i));
    put32(os, a.edge);
    put32(os, static_cast<std::uint32_t>(c));
    put32(os, t.kind_of(a) == AccessKind::Read ? 0 : 1);
    const auto& pt = t.points[a.point];
    put32(os, static_cast<std::uint32_t>(pt.values.size()));
    for (const auto& [k, v] : pt.values) {
      put32(os, names[k]);
      put32(os, detail::narrow32(v));
    }
    for (Int x : t.layouts[c].unflat(a.element)) put32(os, detail::narrow32(x));
  }
}

inline std::vector<AccessEvent> read_trace_binary(std::istream& is) {
  using detail::get32;
  if (get32(is) != kTraceMagic) throw Error("not a binary moviz trace");
  if (get32(is) != 1) throw Error("unsupported binary trace version");
  std::uint32_t nc = get32(is);
  std::vector<std::pair<std::string, std::uint32_t>> containers;
  for (std::uint32_t i = 0; i < nc; ++i) {
    std::uint32_t len = get32(is);
    std::uint32_t rank = get32(is);
    containers.emplace_back(detail::get_string(is, len), rank);
  }
  std::uint32_t nn = get32(is);
  std::vector<std::string> names;
  for (std::uint32_t i = 0; i < nn; ++i) names.push_back(detail::get_string(is, get32(is)));
  std::uint32_t n = get32(is);
  std::vector<AccessEvent> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    AccessEvent ev;
    ev.time = get32(is);
    ev.edge = get32(is);
    std::uint32_t c = get32(is);
    if (c >= containers.size()) throw Error("binary trace references unknown container");
    ev.container = containers[c].first;
    ev.kind = get32(is) == 0 ? AccessKind::Read : AccessKind::Write;
    std::uint32_t arity = get32(is);
    for (std::uint32_t k = 0; k < arity; ++k) {
      std::uint32_t id = get32(is);
      if (id >= names.size()) throw Error("binary trace references unknown parameter");
      ev.point.values.emplace_back(names[id], static_cast<std::int32_t>(get32(is)));
    }
    for (std::uint32_t d = 0; d < containers[c].second; ++d) ev.indices.push_back(static_cast<std::int32_t>(get32(is)));
    out.push_back(std::move(ev));
  }
  return out;
}

inline std::vector<AccessEvent> read_trace_text(std::istream& is) {
  std::vector<AccessEvent> out;
  std::string line;
  auto ints = [](const std::string& s) {
    std::vector<Int> v;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) v.push_back(std::stoll(tok));
    return v;
  };
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, '\t')) f.push_back(tok);
    if (f.size() == 5) f.insert(f.begin() + 1, "");  // top-level event with an empty point
    if (f.size() != 6) throw Error("malformed trace line: " + line);
    AccessEvent ev;
    ev.time = std::stoull(f[0]);
    std::stringstream ps(f[1]);
    while (std::getline(ps, tok, ',')) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) throw Error("malformed trace point: " + f[1]);
      ev.point.values.emplace_back(tok.substr(0, eq), std::stoll(tok.substr(eq + 1)));
    }
    ev.edge = std::stoull(f[2]);
    ev.container = f[3];
    ev.indices = ints(f[4]);
    ev.kind = f[5] == "R" ? AccessKind::Read : AccessKind::Write;
    out.push_back(std::move(ev));
  }
  return out;
}

}  // namespace moviz
