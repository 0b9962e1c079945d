#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "reslab/harness.hpp"

using namespace reslab;

namespace {

harness::ScenarioConfig load(const std::string& path) {
  auto cfg = harness::ScenarioConfig::load(path);
  if (const char* s = std::getenv("RESILIENCE_LAB_SEED")) cfg.set("seed", s);
  return cfg;
}

std::string expectation(const adv::Expectation& e) {
  auto part = [](const std::optional<bool>& v, const char* yes, const char* no) {
    return v ? std::string(*v ? yes : no) : std::string("any");
  };
  return "safety=" + part(e.safe, "SAFE", "VIOLATION") + " liveness=" + part(e.live, "LIVE", "VIOLATION");
}

int report(const harness::RunResult& res, bool scripted) {
  std::cout << res.verdict.str() << "\n";
  std::cout << "u=" << res.latency << " beta=" << res.trace.beta() << " trace_hash=" << res.trace.hash() << "\n";
  const auto& meta = res.trace.meta();
  for (std::uint32_t c = 0; c < meta.clients; ++c) {
    std::cout << "c" << c << " final_log=" << res.trace.log_at(c, meta.horizon).str() << "\n";
  }
  if (res.forge_attempts > 0) {
    std::cout << "forgery_audit attempts=" << res.forge_attempts << " accepted=" << res.accepted_forgeries << "\n";
  }
  if (scripted) {
    std::cout << "expected " << expectation(res.expected) << "\n";
    return res.meets_expectation() ? 0 : 1;
  }
  return res.verdict.safe() && res.verdict.live() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resilience lab: simulate SMR protocols against scripted and randomized adversaries"};
  app.require_subcommand(1);

  std::string config, trace_out, trace_in, out_csv, f_range, attack_name;
  std::uint32_t seeds = 20;
  Round u = 0;
  bool list = false;

  auto* run = app.add_subcommand("run", "run one scenario and print its verdict");
  run->add_option("--config", config, "scenario file")->required();
  run->add_option("--trace-out", trace_out, "write the trace (gzip when the name ends in .gz)");

  auto* sweep = app.add_subcommand("sweep", "run a scenario over a range of f and seeds, emit CSV");
  sweep->add_option("--config", config, "scenario file")->required();
  sweep->add_option("--f", f_range, "range such as 0..6 or 1,3,5")->required();
  sweep->add_option("--seeds", seeds, "seeds per f, starting at the config seed");
  sweep->add_option("--out", out_csv, "CSV output file (stdout when omitted)");

  auto* attack = app.add_subcommand("attack", "run a scripted attack and compare with its pinned verdict");
  attack->add_option("--name", attack_name, "attack script");
  attack->add_option("--config", config, "scenario file");
  attack->add_flag("--list", list, "list the available attacks");

  auto* check = app.add_subcommand("check", "re-check a stored trace");
  check->add_option("--trace", trace_in, "trace file (.gz accepted)")->required();
  check->add_option("--u", u, "liveness latency in rounds")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto cfg = load(config);
      auto res = harness::run(cfg);
      if (!trace_out.empty()) harness::write_trace(trace_out, res.trace);
      return report(res, !cfg.attack.empty());
    }
    if (sweep->parsed()) {
      auto cfg = load(config);
      auto result = harness::sweep(cfg, harness::parse_f_range(f_range), seeds);
      if (out_csv.empty()) {
        std::cout << result.to_csv();
      } else {
        std::ofstream out(out_csv);
        if (!out) throw harness::ConfigError("out", "cannot open " + out_csv);
        out << result.to_csv();
      }
      return 0;
    }
    if (attack->parsed()) {
      if (list) {
        for (const auto& a : adv::attack_registry()) std::cout << a.name << "\t" << a.summary << "\n";
        return 0;
      }
      if (attack_name.empty() || config.empty()) throw harness::ConfigError("attack", "--name and --config are required");
      auto cfg = load(config);
      cfg.set("attack", attack_name);
      return report(harness::run(cfg), true);
    }
    if (check->parsed()) {
      auto trace = harness::read_trace(trace_in);
      auto verdict = reslab::check(trace, u);
      std::cout << verdict.str() << "\n";
      return verdict.safe() && verdict.live() ? 0 : 1;
    }
  } catch (const harness::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
