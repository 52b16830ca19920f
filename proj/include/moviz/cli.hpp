#pragma once

// Command-line front end.
//
//   moviz validate <file> [--params k=v,...]
//   moviz movement <file> [--params k=v,...] [--scale M] [--format json|text]
//   moviz simulate <file> [--params k=v,...] [--line-size N] [--threshold N|inf]
//                  [--export-trace PATH --trace-format text|binary]
//   moviz serve <file> [--port N] [--host H]
//
// Exit status: 0 success, 1 the program failed validation (or could not be
// parsed), 2 usage error, 3 analysis error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "moviz/http_api.hpp"
#include "moviz/report.hpp"
#include "moviz/trace_io.hpp"

namespace moviz::cli {

enum Exit : int { kOk = 0, kInvalid = 1, kUsage = 2, kAnalysis = 3 };

class UsageError : public Error {
 public:
  using Error::Error;
};

/// "k=v[,k=v...]" with integer values.
inline Bindings parse_params(std::string_view s) {
  Bindings b;
  if (s.empty()) return b;
  std::size_t start = 0;
  while (true) {
    auto comma = s.find(',', start);
    auto item = s.substr(start, comma - start);
    auto eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0) throw UsageError("malformed parameter '" + std::string(item) + "'");
    std::string_view val = item.substr(eq + 1);
    Int v = 0;
    auto [p, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (val.empty() || ec != std::errc() || p != val.data() + val.size()) {
      throw UsageError("parameter '" + std::string(item.substr(0, eq)) + "' needs an integer value");
    }
    b[std::string(item.substr(0, eq))] = v;
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return b;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Bindings from a JSON object file overlaid with --params.
inline Bindings gather_bindings(const Program& p, const std::string& params, const std::string& params_file) {
  Bindings b;
  if (!params_file.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(params_file));
    } catch (const nlohmann::json::parse_error& ex) {
      throw UsageError("malformed parameter file '" + params_file + "': " + ex.what());
    }
    if (!j.is_object()) throw UsageError("parameter file must hold a JSON object");
    for (const auto& [k, v] : j.items()) {
      if (!v.is_number_integer()) throw UsageError("parameter '" + k + "' needs an integer value");
      b[k] = v.get<Int>();
    }
  }
  for (const auto& [k, v] : parse_params(params)) b[k] = v;
  // Parameter files may be shared between programs; only --params is strict.
  for (const auto& [k, v] : parse_params(params)) {
    bool known = std::any_of(p.symbols.begin(), p.symbols.end(), [&](const Symbol& s) { return s.name == k; });
    if (!known) throw UsageError("program has no symbol '" + k + "'");
  }
  for (auto it = b.begin(); it != b.end();) {
    bool known = std::any_of(p.symbols.begin(), p.symbols.end(), [&](const Symbol& s) { return s.name == it->first; });
    it = known ? std::next(it) : b.erase(it);
  }
  return p.bindings_with_defaults(b);
}

inline nlohmann::json diagnostics_json(const std::vector<Diagnostic>& ds) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : ds) out.push_back({{"severity", to_string(d.severity)}, {"path", d.path}, {"message", d.message}});
  return out;
}

namespace detail {

struct Reporter {
  std::ostream& err;
  bool json = false;

  int fail(int code, const char* kind, const std::string& message, const std::vector<Diagnostic>* diags = nullptr) {
    if (json) {
      nlohmann::json doc = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
      if (diags) doc["error"]["diagnostics"] = diagnostics_json(*diags);
      err << doc.dump(2) << "\n";
    } else {
      err << "moviz: " << message << "\n";
      if (diags) {
        for (const auto& d : *diags) err << "  " << to_string(d.severity) << ": " << d.path << ": " << d.message << "\n";
      }
    }
    return code;
  }
};

inline Program load_checked(const std::string& path) { return load_program(read_file(path)); }

}  // namespace detail

/// Runs one command. `args` excludes the executable name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Data-movement analysis for dataflow programs", "moviz"};
  app.require_subcommand(1);
  std::string error_format = "text";
  app.add_option("--error-format", error_format, "Error output format")->check(CLI::IsMember({"text", "json"}));

  std::string file, params, params_file, format = "json", scale = "linear", threshold = "inf";
  std::string export_path, trace_format = "text", host = "127.0.0.1";
  Int line_size = 64;
  int port = 0;

  auto add_params = [&](CLI::App* sub) {
    sub->add_option("file", file, "Program document (JSON)")->required();
    sub->add_option("--params", params, "Symbol bindings, k=v[,k=v...]");
    sub->add_option("--params-file", params_file, "JSON object of symbol bindings");
  };

  auto* validate_cmd = app.add_subcommand("validate", "Check a program document");
  add_params(validate_cmd);
  validate_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "text"}));

  auto* movement_cmd = app.add_subcommand("movement", "Logical data movement and arithmetic intensity");
  add_params(movement_cmd);
  movement_cmd->add_option("--scale", scale, "Heatmap scaling")
      ->check(CLI::IsMember({"linear", "mean", "median", "histogram"}));
  movement_cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "text"}));

  auto* simulate_cmd = app.add_subcommand("simulate", "Simulate accesses and model the cache");
  add_params(simulate_cmd);
  simulate_cmd->add_option("--line-size", line_size, "Cache line size in bytes");
  simulate_cmd->add_option("--threshold", threshold, "Capacity threshold in lines, or inf");
  simulate_cmd->add_option("--export-trace", export_path, "Write the access trace to this path");
  simulate_cmd->add_option("--trace-format", trace_format, "Trace file format")
      ->check(CLI::IsMember({"text", "binary"}));

  auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP API");
  add_params(serve_cmd);
  serve_cmd->add_option("--port", port, "Port (default $MOVIZ_PORT or 8080)");
  serve_cmd->add_option("--host", host, "Interface to bind");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    detail::Reporter rep{err, error_format == "json"};
    return rep.fail(kUsage, "usage", ex.what());
  }

  detail::Reporter rep{err, error_format == "json"};
  try {
    if (validate_cmd->parsed()) {
      Program p;
      try {
        std::string text = read_file(file);
        p = parse_program(std::string_view(text));
      } catch (const UsageError&) {
        throw;
      } catch (const ParseError& ex) {
        return rep.fail(kInvalid, "validation", ex.what());
      } catch (const SchemaError& ex) {
        return rep.fail(kInvalid, "validation", ex.what());
      }
      std::optional<Bindings> b;
      if (!params.empty() || !params_file.empty()) b = gather_bindings(p, params, params_file);
      auto diags = validate(p, b);
      if (format == "json") {
        out << nlohmann::json{{"program", p.name}, {"valid", !has_errors(diags)}, {"diagnostics", diagnostics_json(diags)}}
                   .dump(2)
            << "\n";
      } else {
        for (const auto& d : diags) out << to_string(d.severity) << ": " << d.path << ": " << d.message << "\n";
        if (!has_errors(diags)) out << p.name << ": ok\n";
      }
      return has_errors(diags) ? kInvalid : kOk;
    }

    Program p = detail::load_checked(file);
    Bindings b = gather_bindings(p, params, params_file);
    auto diags = validate(p, b);
    if (has_errors(diags)) return rep.fail(kInvalid, "validation", "invalid under the given bindings", &diags);

    if (movement_cmd->parsed()) {
      auto method = *heatmap::parse_method(scale);
      MetricSet m = compute_metrics(p, b);
      if (format == "text") {
        report::write_global_text(out, p, m, method);
      } else {
        out << report::global_report(p, m, method).dump(2) << "\n";
      }
      return kOk;
    }

    if (simulate_cmd->parsed()) {
      CacheConfig c;
      c.line_size = line_size;
      try {
        c.capacity_threshold = CacheConfig::parse_threshold(threshold);
        c.check();
      } catch (const Error& ex) {
        throw UsageError(ex.what());
      }
      AccessTrace t = simulate_accesses(p, b);
      if (!export_path.empty()) {
        std::ofstream f(export_path, trace_format == "binary" ? std::ios::binary : std::ios::out);
        if (!f) throw UsageError("cannot write '" + export_path + "'");
        if (trace_format == "binary") {
          write_trace_binary(f, t);
        } else {
          write_trace_text(f, t);
        }
      }
      auto map = build_memory_map(t, c);
      auto prof = stack_distances(t, map);
      auto ms = classify_misses(prof, c, p.edge_count());
      auto phys = physical_movement(p, ms, c, b);
      auto doc = report::local_report(p, t, prof, ms, phys);
      if (!export_path.empty()) doc["trace"]["exported"] = {{"path", export_path}, {"format", trace_format}};
      out << doc.dump(2) << "\n";
      return kOk;
    }

    if (serve_cmd->parsed()) {
      if (port == 0) {
        const char* env = std::getenv("MOVIZ_PORT");
        port = env ? static_cast<int>(http::detail::parse_int(env, "MOVIZ_PORT")) : 8080;
      }
      AnalysisSession session(std::move(p));
      session.set_bindings(b);
      http::Service svc(session);
      out << "serving " << session.program().name << " on http://" << host << ":" << port << "\n" << std::flush;
      if (!svc.listen(host, port)) return rep.fail(kAnalysis, "analysis", "cannot listen on " + host + ":" + std::to_string(port));
      return kOk;
    }
  } catch (const UsageError& ex) {
    return rep.fail(kUsage, "usage", ex.what());
  } catch (const http::BadRequest& ex) {
    return rep.fail(kUsage, "usage", ex.what());
  } catch (const ValidationError& ex) {
    return rep.fail(kInvalid, "validation", ex.what(), &ex.diagnostics());
  } catch (const ParseError& ex) {
    return rep.fail(kInvalid, "validation", ex.what());
  } catch (const SchemaError& ex) {
    return rep.fail(kInvalid, "validation", ex.what());
  } catch (const std::exception& ex) {
    return rep.fail(kAnalysis, "analysis", ex.what());
  }
  return kUsage;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace moviz::cli
