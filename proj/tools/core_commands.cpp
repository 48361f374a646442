#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include <spdlog/spdlog.h>

#include "cli.hpp"
#include "fedwad/error.hpp"
#include "fedwad/fedwad.hpp"
#include "fedwad/geodesics.hpp"
#include "fedwad/ot.hpp"
#include "fedwad/transport.hpp"

namespace fedwad::cli {

using json = nlohmann::ordered_json;

namespace {

const std::map<std::string, InterpMode> kModes{{"exact", InterpMode::Exact}, {"approx", InterpMode::Approx}};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json fed_result_json(const FedResult& r, const FedConfig& cfg) {
  json j;
  j["distance"] = r.distance;
  j["rounds_run"] = r.rounds_run;
  j["support_final"] = r.xi_final.size();
  j["bytes_exchanged"] = r.bytes_exchanged;
  j["measure_payload_bytes"] = r.measure_payload_bytes;
  j["mode"] = to_string(cfg.interp_mode);
  j["report_policy"] = to_string(cfg.report_policy);
  return j;
}

}  // namespace

void add_fed_flags(CLI::App& sub, FedFlags& f) {
  f.given["config"] = sub.add_option("--config", f.config_path, "JSON file with session settings")->check(CLI::ExistingFile);
  f.given["rounds"] = sub.add_option("--rounds", f.rounds, "protocol rounds K")->check(CLI::Range(1u, 1000000u));
  f.given["support"] = sub.add_option("--support", f.support, "support size S of the broadcast measure")->check(CLI::PositiveNumber);
  f.given["mode"] = sub.add_option("--mode", f.mode, "interpolation mode")->check(CLI::IsMember({"exact", "approx"}));
  f.given["t"] = sub.add_option("--t", f.t, "fixed interpolation parameter")->check(CLI::Range(0.0, 1.0));
  f.given["t_range"] = sub.add_option("--t-range", f.t_range, "draw t uniformly from [lo, hi] instead")->expected(2);
  f.given["init"] = sub.add_option("--init", f.init, "initial broadcast measure")->check(CLI::IsMember({"gaussian", "box"}));
  f.given["report"] = sub.add_option("--report", f.report, "when clients report distances")->check(CLI::IsMember({"last", "every"}));
  f.given["stop_tol"] = sub.add_option("--stop-tol", f.stop_tol, "exact mode: stop when A^(k) changes less than this");
}

FedConfig build_fed_config(const FedFlags& f, std::uint64_t seed) {
  FedFlags v = f;
  auto from_flag = [&](const char* key) { return f.given.at(key)->count() > 0; };
  if (!f.config_path.empty()) {
    json j;
    try {
      j = json::parse(read_text(f.config_path));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::Io, f.config_path + ": " + e.what());
    }
    try {
      if (j.contains("rounds") && !from_flag("rounds")) v.rounds = j["rounds"].get<unsigned>();
      if (j.contains("support") && !from_flag("support")) v.support = j["support"].get<Index>();
      if (j.contains("mode") && !from_flag("mode")) v.mode = j["mode"].get<std::string>();
      if (j.contains("init") && !from_flag("init")) v.init = j["init"].get<std::string>();
      if (j.contains("report") && !from_flag("report")) v.report = j["report"].get<std::string>();
      if (j.contains("stop_tol") && !from_flag("stop_tol")) v.stop_tol = j["stop_tol"].get<double>();
      if (j.contains("t") && !from_flag("t") && !from_flag("t_range")) {
        if (j["t"].is_object()) {
          v.t_range = {j["t"].at("lo").get<double>(), j["t"].at("hi").get<double>()};
        } else {
          v.t = j["t"].get<double>();
        }
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidParameter, f.config_path + ": " + e.what());
    }
    if (!kModes.contains(v.mode)) throw Error(ErrorCode::InvalidParameter, "unknown mode '" + v.mode + "'");
  }

  FedConfig cfg;
  cfg.rounds = v.rounds;
  cfg.support_size = v.support;
  cfg.interp_mode = kModes.at(v.mode);
  cfg.report_policy = v.report == "every" ? ReportPolicy::EveryRound : ReportPolicy::LastRoundOnly;
  if (v.t_range.size() == 2) {
    cfg.t_policy = UniformRandomT{v.t_range[0], v.t_range[1], seed};
  } else {
    cfg.t_policy = FixedT{v.t};
  }
  if (v.init == "box") {
    cfg.xi0_policy = UnitBoxInit{seed};
  } else {
    cfg.xi0_policy = StandardGaussianInit{seed};
  }
  if (v.stop_tol > 0.0) cfg.stop_tol = v.stop_tol;
  cfg.validate();
  return cfg;
}

DiscreteMeasure load_measure(const std::string& path) {
  if (path.size() > 4 && path.ends_with(".fwm")) return read_measure_fwm(path);
  return read_measure_csv(path);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

void register_core_commands(CLI::App& app, std::uint64_t& seed, std::string& out) {
  {
    auto* sub = app.add_subcommand("solve", "exact OT between two measures");
    struct Opts {
      std::string mu, nu, plan_path;
      int p = 2;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--mu", o->mu, "first measure (CSV or .fwm)")->required()->check(CLI::ExistingFile);
    sub->add_option("--nu", o->nu, "second measure (CSV or .fwm)")->required()->check(CLI::ExistingFile);
    sub->add_option("--p", o->p, "ground cost exponent")->check(CLI::IsMember({1, 2}));
    sub->add_option("--plan", o->plan_path, "write the plan as i,j,mass CSV");
    sub->add_option("--seed", seed, "unused; accepted for uniformity");
    sub->add_option("--out", out, "JSON output (default stdout)");
    sub->callback([o, &seed, &out] {
      const auto a = load_measure(o->mu);
      const auto b = load_measure(o->nu);
      const auto t0 = std::chrono::steady_clock::now();
      const auto plan = optimal_plan(a, b, o->p);
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      json j;
      j["distance"] = std::pow(std::max(plan.objective, 0.0), 1.0 / o->p);
      j["objective"] = plan.objective;
      j["plan_nnz"] = plan.nnz();
      j["runtime_ms"] = ms;
      if (!o->plan_path.empty()) {
        std::ostringstream csv;
        csv << "i,j,mass\n";
        csv.precision(17);
        for (const auto& e : plan.entries) csv << e.i << ',' << e.j << ',' << e.mass << '\n';
        emit(o->plan_path, csv.str());
      }
      emit(out, j.dump(2) + "\n");
    });
  }
  {
    auto* sub = app.add_subcommand("interp", "geodesic interpolant between two measures");
    struct Opts {
      std::string mu, nu, mode = "exact";
      double t = 0.5;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--mu", o->mu, "start measure")->required()->check(CLI::ExistingFile);
    sub->add_option("--nu", o->nu, "end measure")->required()->check(CLI::ExistingFile);
    sub->add_option("--t", o->t, "position along the geodesic")->required()->check(CLI::Range(0.0, 1.0));
    sub->add_option("--mode", o->mode)->check(CLI::IsMember({"exact", "approx"}));
    sub->add_option("--seed", seed, "unused; accepted for uniformity");
    sub->add_option("--out", out, "measure CSV output (default stdout)");
    sub->callback([o, &seed, &out] {
      emit(out, format_measure_csv(interpolate(load_measure(o->mu), load_measure(o->nu), o->t, kModes.at(o->mode))));
    });
  }
  {
    auto* sub = app.add_subcommand("fedwad", "federated distance with both clients in-process");
    struct Opts {
      std::string mu, nu, trajectory;
      FedFlags flags;
      bool with_central = false;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--mu", o->mu, "first client's measure")->required()->check(CLI::ExistingFile);
    sub->add_option("--nu", o->nu, "second client's measure")->required()->check(CLI::ExistingFile);
    add_fed_flags(*sub, o->flags);
    sub->add_flag("--centralized", o->with_central, "also report the centralized distance");
    sub->add_option("--trajectory", o->trajectory, "write the per-round CSV here");
    sub->add_option("--seed", seed, "seed for t draws and the initial broadcast");
    sub->add_option("--out", out, "JSON output (default stdout)");
    sub->callback([o, &seed, &out] {
      const auto a = load_measure(o->mu);
      const auto b = load_measure(o->nu);
      const auto cfg = build_fed_config(o->flags, seed);
      const auto res = run_fedwad(a, b, cfg);
      json j = fed_result_json(res, cfg);
      if (o->with_central) j["centralized"] = wasserstein(a, b, cfg.p);
      if (!o->trajectory.empty()) emit(o->trajectory, trajectory_csv(res));
      emit(out, j.dump(2) + "\n");
    });
  }
  {
    auto* sub = app.add_subcommand("fedwad-remote", "coordinator dialing two serve-client processes");
    struct Opts {
      std::string mu, nu, trajectory;
      FedFlags flags;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--mu", o->mu, "host:port of the first client")->required();
    sub->add_option("--nu", o->nu, "host:port of the second client")->required();
    add_fed_flags(*sub, o->flags);
    sub->add_option("--trajectory", o->trajectory, "write the per-round CSV here");
    sub->add_option("--seed", seed, "seed for t draws and the initial broadcast");
    sub->add_option("--out", out, "JSON output (default stdout)");
    sub->callback([o, &seed, &out] {
      const auto cfg = build_fed_config(o->flags, seed);
      const auto res = run_remote_fedwad(net::parse_endpoint(o->mu), net::parse_endpoint(o->nu), cfg);
      if (!o->trajectory.empty()) emit(o->trajectory, trajectory_csv(res));
      emit(out, fed_result_json(res, cfg).dump(2) + "\n");
    });
  }
  {
    auto* sub = app.add_subcommand("serve-client", "hold a measure and answer one coordinator session at a time");
    struct Opts {
      std::string bind, data;
      unsigned sessions = 1;
    };
    auto o = std::make_shared<Opts>();
    sub->add_option("--bind", o->bind, "host:port to listen on (port 0 picks one)")->required();
    sub->add_option("--data", o->data, "local measure")->required()->check(CLI::ExistingFile);
    sub->add_option("--sessions", o->sessions, "sessions to serve before exiting")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "unused; accepted for uniformity");
    sub->add_option("--out", out, "JSON lines, one per session (default stdout)");
    sub->callback([o, &seed, &out] {
      const auto local = load_measure(o->data);
      net::TcpListener listener(net::parse_endpoint(o->bind));
      // The port line goes to stderr unconditionally so scripts can bind port 0.
      std::fprintf(stderr, "listening on port %u\n", static_cast<unsigned>(listener.port()));
      std::fflush(stderr);
      std::string lines;
      for (unsigned s = 0; s < o->sessions; ++s) {
        auto ch = listener.accept();
        const auto d = serve_client(*ch, local);
        json j;
        j["session"] = s;
        j["distance"] = d ? json(*d) : json(nullptr);
        lines += j.dump() + "\n";
        spdlog::info("session {} finished", s);
      }
      emit(out, lines);
    });
  }
}

}  // namespace fedwad::cli
