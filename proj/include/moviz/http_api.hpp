#pragma once

// HTTP front end over an AnalysisSession. Every JSON body carries the state
// version it was computed against.
//
// Status codes: 400 malformed request, 404 unknown element, 409 stale state
// version (or a simulation superseded by one), 422 evaluation, validation
// or simulation error.

#include <charconv>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "moviz/report.hpp"
#include "moviz/session.hpp"

namespace moviz::http {

using nlohmann::json;

class BadRequest : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline Int parse_int(std::string_view s, const char* what) {
  Int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw BadRequest(std::string("malformed ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<Int> parse_indices(std::string_view s) {
  std::vector<Int> out;
  std::size_t start = 0;
  while (true) {
    auto comma = s.find(',', start);
    out.push_back(parse_int(s.substr(start, comma - start), "index"));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// "i=1,j=2"
inline std::map<std::string, Int, std::less<>> parse_pins(std::string_view s) {
  std::map<std::string, Int, std::less<>> out;
  if (s.empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto comma = s.find(',', start);
    auto item = s.substr(start, comma - start);
    auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) throw BadRequest("malformed pin '" + std::string(item) + "'");
    out[std::string(item.substr(0, eq))] = parse_int(item.substr(eq + 1), "pin value");
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline heatmap::Method scale_param(const httplib::Request& req) {
  std::string s = req.has_param("scale") ? req.get_param_value("scale") : "linear";
  auto m = heatmap::parse_method(s);
  if (!m) throw BadRequest("unknown scale method '" + s + "' (expected linear, mean, median or histogram)");
  return *m;
}

inline json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json j;
  try {
    j = json::parse(req.body);
  } catch (const json::parse_error& ex) {
    throw BadRequest(std::string("malformed JSON body: ") + ex.what());
  }
  if (!j.is_object()) throw BadRequest("request body must be a JSON object");
  return j;
}

inline std::optional<std::uint64_t> version_field(const json& body) {
  if (!body.contains("version")) return std::nullopt;
  if (!body["version"].is_number_unsigned()) throw BadRequest("'version' must be a non-negative integer");
  return body["version"].get<std::uint64_t>();
}

}  // namespace detail

class Service {
 public:
  explicit Service(AnalysisSession& s) : session_(s) { install(); }
  ~Service() { stop(); }
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  httplib::Server& server() { return server_; }

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Serves on the calling thread until stop().
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  template <class F>
  void guarded(httplib::Response& res, F&& f) {
    int status = 200;
    json body;
    try {
      body = f();
    } catch (const BadRequest& ex) {
      status = 400;
      body = {{"error", ex.what()}};
    } catch (const NotFound& ex) {
      status = 404;
      body = {{"error", ex.what()}};
    } catch (const StaleVersion& ex) {
      status = 409;
      body = {{"error", ex.what()}};
    } catch (const SimulationCancelled& ex) {
      status = 409;
      body = {{"error", ex.what()}};
    } catch (const ValidationError& ex) {
      status = 422;
      json diags = json::array();
      for (const auto& d : ex.diagnostics()) {
        diags.push_back({{"severity", to_string(d.severity)}, {"path", d.path}, {"message", d.message}});
      }
      body = {{"error", ex.what()}, {"diagnostics", std::move(diags)}};
    } catch (const ParseError& ex) {
      status = 400;
      body = {{"error", ex.what()}};
    } catch (const std::exception& ex) {
      // EvalError, SimulationError, SchemaError and the rest of the engine
      status = 422;
      body = {{"error", ex.what()}};
    }
    body["version"] = session_.version();
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <class F>
  void get(const std::string& pattern, F f) {
    server_.Get(pattern, [this, f](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { return f(req); });
    });
  }

  template <class F>
  void post(const std::string& pattern, F f) {
    server_.Post(pattern, [this, f](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { return f(req); });
    });
  }

  ElementRef resolve(const AccessTrace& t, const std::string& container, const std::string& indices) {
    auto c = t.container_index(container);
    if (!c) throw NotFound("unknown container '" + container + "'");
    auto idx = detail::parse_indices(indices);
    if (!t.layouts[*c].contains(idx)) throw NotFound("element " + container + "[" + indices + "] is out of range");
    return {*c, t.layouts[*c].flat(idx)};
  }

  json element_json(const AccessTrace& t, const ElementRef& e) {
    const auto& l = t.layouts[e.container];
    return {{"container", l.name}, {"indices", l.unflat(e.element)}};
  }

  void install() {
    using Req = httplib::Request;
    const Program& p = session_.program();

    get("/api/program", [&p](const Req&) {
      json syms = json::array();
      for (const auto& s : p.symbols) {
        json j = {{"name", s.name}};
        if (s.default_value) j["default"] = *s.default_value;
        syms.push_back(std::move(j));
      }
      return json{{"program", to_json(p)}, {"symbols", std::move(syms)}};
    });

    get("/api/params", [this](const Req&) { return json{{"bindings", report::bindings_json(session_.bindings())}}; });

    post("/api/params", [this](const Req& req) {
      json body = detail::parse_body(req);
      auto expected = detail::version_field(body);
      const json& src = body.contains("params") ? body["params"] : body;
      if (!src.is_object()) throw BadRequest("'params' must be an object");
      Bindings b;
      for (const auto& [k, v] : src.items()) {
        if (k == "version" && !body.contains("params")) continue;
        if (!v.is_number_integer()) throw BadRequest("value for '" + k + "' must be an integer");
        b[k] = v.get<Int>();
      }
      session_.set_bindings(b, expected);
      return json{{"bindings", report::bindings_json(session_.bindings())}};
    });

    get("/api/config", [this](const Req&) { return report::config_json(session_.config()); });

    post("/api/config", [this](const Req& req) {
      json body = detail::parse_body(req);
      auto expected = detail::version_field(body);
      CacheConfig c = session_.config();
      if (body.contains("line_size")) {
        if (!body["line_size"].is_number_integer()) throw BadRequest("'line_size' must be an integer");
        c.line_size = body["line_size"].get<Int>();
      }
      if (body.contains("capacity_threshold")) {
        const json& t = body["capacity_threshold"];
        if (t.is_string()) {
          try {
            c.capacity_threshold = CacheConfig::parse_threshold(t.get<std::string>());
          } catch (const Error& ex) {
            throw BadRequest(ex.what());
          }
        } else if (t.is_number_unsigned()) {
          c.capacity_threshold = t.get<std::uint64_t>();
        } else if (t.is_null()) {
          c.capacity_threshold.reset();
        } else {
          throw BadRequest("'capacity_threshold' must be a positive integer or \"inf\"");
        }
      }
      session_.set_config(c, expected);
      return report::config_json(session_.config());
    });

    get("/api/overlays/movement", [this, &p](const Req& req) {
      auto method = detail::scale_param(req);
      auto m = session_.metrics();
      json out = report::movement_overlay(p, *m, method);
      out["bindings"] = report::bindings_json(m->bindings);
      return out;
    });

    get("/api/overlays/intensity", [this, &p](const Req& req) {
      auto method = detail::scale_param(req);
      auto m = session_.metrics();
      json out = report::intensity_overlay(p, *m, method);
      out["bindings"] = report::bindings_json(m->bindings);
      return out;
    });

    post("/api/simulate", [this, &p](const Req& req) {
      json body = detail::parse_body(req);
      auto expected = detail::version_field(body);
      if (expected && *expected != session_.version()) throw StaleVersion(*expected, session_.version());
      auto la = session_.local();
      CacheConfig c = session_.config();
      c.line_size = la->map.line_size();
      auto ms = classify_misses(la->profile, c, p.edge_count());
      auto phys = physical_movement(p, ms, c, la->trace.bindings);
      return report::local_report(p, la->trace, la->profile, ms, phys);
    });

    get("/api/trace", [this](const Req& req) {
      auto la = session_.local();
      std::size_t n = la->trace.size();
      auto num = [&](const char* key, std::size_t dflt) -> std::size_t {
        if (!req.has_param(key)) return dflt;
        Int v = detail::parse_int(req.get_param_value(key), key);
        if (v < 0) throw BadRequest(std::string("'") + key + "' must be non-negative");
        return static_cast<std::size_t>(v);
      };
      std::size_t from = num("from", 0);
      std::size_t to = num("to", std::min(n, from + 1000));
      if (from > to || to > n) {
        throw BadRequest("trace window [" + std::to_string(from) + ", " + std::to_string(to) + ") is outside [0, " +
                         std::to_string(n) + "]");
      }
      if (to - from > kMaxWindow) throw BadRequest("trace window larger than " + std::to_string(kMaxWindow) + " events");
      json events = json::array();
      for (const auto& ev : trace_window(la->trace, from, to)) events.push_back(report::event_json(ev));
      return json{{"from", from}, {"to", to}, {"length", n}, {"events", std::move(events)}};
    });

    get("/api/counts", [this](const Req& req) {
      auto la = session_.local();
      const auto& t = la->trace;
      auto pins = detail::parse_pins(req.has_param("pin") ? req.get_param_value("pin") : "");
      AccessCountMap m = AccessCountMap::zeros(t);
      if (pins.empty()) {
        m = access_counts(t);
      } else {
        for (const auto& a : project(t, pins)) {
          auto& v = t.kind_of(a) == AccessKind::Read ? m.reads : m.writes;
          ++v[t.container_of(a)][a.element];
        }
      }
      json out = {{"containers", report::counts_json(t, m)}, {"events", m.sum()}};
      if (!pins.empty()) out["pin"] = pins;
      return out;
    });

    get(R"(/api/element/([^/]+)/([^/]+)/linemates)", [this](const Req& req) {
      auto la = session_.local();
      ElementRef e = resolve(la->trace, req.matches[1], req.matches[2]);
      json mates = json::array();
      for (const auto& m : line_mates(e.container, e.element, la->map)) mates.push_back(element_json(la->trace, m));
      auto [first, last] = la->map.lines(e.container, e.element);
      return json{{"element", element_json(la->trace, e)},
                  {"line_size", la->map.line_size()},
                  {"address", la->map.address(e.container, e.element)},
                  {"lines", {first, last}},
                  {"line_mates", std::move(mates)}};
    });

    // Additional selections stack: ?also=C:0,0;B:1
    get(R"(/api/element/([^/]+)/([^/]+)/related)", [this](const Req& req) {
      auto la = session_.local();
      std::vector<ElementRef> sel{resolve(la->trace, req.matches[1], req.matches[2])};
      if (req.has_param("also")) {
        std::string also = req.get_param_value("also");
        std::size_t start = 0;
        while (start <= also.size()) {
          auto semi = also.find(';', start);
          std::string item = also.substr(start, semi - start);
          auto colon = item.find(':');
          if (colon == std::string::npos) throw BadRequest("malformed selection '" + item + "'");
          sel.push_back(resolve(la->trace, item.substr(0, colon), item.substr(colon + 1)));
          if (semi == std::string::npos) break;
          start = semi + 1;
        }
      }
      json selected = json::array();
      for (const auto& s : sel) selected.push_back(element_json(la->trace, s));
      auto m = related_accesses(la->trace, sel);
      return json{{"selected", std::move(selected)}, {"related", report::sparse_counts_json(la->trace, m)}};
    });

    get(R"(/api/element/([^/]+)/([^/]+)/distances)", [this](const Req& req) {
      auto la = session_.local();
      ElementRef e = resolve(la->trace, req.matches[1], req.matches[2]);
      std::string mode_s = req.has_param("mode") ? req.get_param_value("mode") : "min";
      auto mode = parse_distance_mode(mode_s);
      if (!mode) throw BadRequest("unknown distance mode '" + mode_s + "' (expected min, median or max)");
      auto ds = la->profile.element(e.container, e.element);
      json list = json::array();
      for (auto d : ds) list.push_back(report::distance_json(d));
      auto agg = aggregate(ds, *mode);
      return json{{"element", element_json(la->trace, e)},
                  {"mode", mode_s},
                  {"value", agg ? report::distance_json(*agg) : json(nullptr)},
                  {"distances", std::move(list)}};
    });

    get("/api/misses", [this](const Req&) {
      auto la = session_.local();
      CacheConfig c = session_.config();
      c.line_size = la->map.line_size();
      return report::misses_json(la->trace, classify_misses(la->profile, c, session_.program().edge_count()));
    });

    get("/api/movement/physical", [this, &p](const Req&) { return report::physical_json(p, session_.physical()); });

    get("/api/stats", [this](const Req&) {
      auto s = session_.stats();
      return json{{"metric_evaluations", s.metric_evaluations},
                  {"metric_cache_hits", s.metric_cache_hits},
                  {"simulations", s.simulations},
                  {"simulation_cache_hits", s.simulation_cache_hits},
                  {"simulations_cancelled", s.simulations_cancelled}};
    });
  }

  static constexpr std::size_t kMaxWindow = 100'000;

  AnalysisSession& session_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace moviz::http
