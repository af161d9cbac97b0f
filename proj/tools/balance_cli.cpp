// Command-line front end: closed-form analysis, batch attack simulation, and
// bound sweeps. Exit codes: 0 ok, 2 invalid input or configuration, 3 I/O
// failure. Data outputs are deterministic; wall-clock metadata goes only to
// the meta.json sidecar.

#include <atomic>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "balance/analysis.hpp"
#include "balance/attack.hpp"
#include "balance/scenario.hpp"

namespace {

using balance::AttackParams;
using balance::BoundInputs;
using balance::Scenario;
using nlohmann::ordered_json;

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr const char* kVersion = "balance 1.0.0";

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
  out << bytes;
  out.flush();
  if (!out.good()) throw IoFailure("failed writing " + path.string());
}

std::string iso8601_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct AnalyzeOpts {
  std::string preset;
  std::optional<double> rho, k, epsilon, pi, delta;
  std::string t_str, d_str, tau_str, variant;
};

struct SimulateOpts {
  std::string config, preset, out_dir, horizon_str;
  std::optional<long long> seeds;
  std::optional<unsigned long long> seed;
};

struct SweepOpts {
  std::string preset, axis, from_str, to_str, step_str, out_file;
  std::optional<double> rho;
  std::string t_str, d_str, tau_str;
};

// Parses an axis-typed quantity: durations for tau, hash counts for d,
// plain numbers for rho.
double axis_value(const std::string& axis, const std::string& text, const char* what) {
  if (axis == "tau") return balance::parse_duration(text);
  if (axis == "d") return balance::parse_hashes(text);
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw balance::InvalidConfig(std::string(what) + ": not a number: \"" + text + "\"");
  }
}

int run_analyze(const AnalyzeOpts& o) {
  double rho = 0.0, total = 0.0, difficulty = 0.0;
  int k = 2;
  std::optional<double> epsilon, tau, pi, delta;
  balance::ForkChoice variant = balance::ForkChoice::ghost;

  if (!o.preset.empty()) {
    Scenario sc = balance::preset(o.preset);
    rho = sc.attack.rho;
    total = sc.graph.total_power();
    difficulty = sc.mining.difficulty;
    k = sc.attack.k;
    epsilon = sc.attack.epsilon;
    tau = sc.attack.tau;
    variant = sc.attack.variant;
    pi = sc.attack.pi;
    delta = sc.attack.delta;
  }
  if (o.rho) rho = *o.rho;
  if (!o.t_str.empty()) total = balance::parse_power(o.t_str);
  if (!o.d_str.empty()) difficulty = balance::parse_hashes(o.d_str);
  if (o.k) k = static_cast<int>(*o.k);
  if (o.epsilon) epsilon = *o.epsilon;
  if (!o.tau_str.empty()) tau = balance::parse_duration(o.tau_str);
  if (o.pi) pi = *o.pi;
  if (o.delta) delta = *o.delta;
  if (!o.variant.empty()) {
    if (o.variant == "ghost")
      variant = balance::ForkChoice::ghost;
    else if (o.variant == "nakamoto")
      variant = balance::ForkChoice::nakamoto;
    else
      throw balance::InvalidConfig("--variant must be ghost or nakamoto");
  }
  if (!(total > 0.0)) throw balance::InvalidConfig("total power is required (--t or --preset)");
  if (!(difficulty > 0.0))
    throw balance::InvalidConfig("difficulty is required (--d or --preset)");
  if (!tau && !epsilon) throw balance::InvalidConfig("need --tau or --epsilon");

  std::optional<double> min_delay;
  if (epsilon) {
    AttackParams p;
    p.rho = rho;
    p.k = k;
    p.epsilon = *epsilon;
    p.delta = delta;
    min_delay = balance::min_attack_delay(p, total, difficulty);
  }
  double tau_used = tau ? *tau : *min_delay;

  BoundInputs in;
  in.rho = rho;
  in.total_power = total;
  in.difficulty = difficulty;
  in.tau = tau_used;
  in.k = k;
  in.delta = delta;
  in.pi = pi;

  balance::Means means = balance::expected_means(in);

  ordered_json j;
  j["schema"] = "balance-analysis v1";
  ordered_json inputs;
  inputs["rho"] = rho;
  inputs["total_power"] = total;
  inputs["difficulty"] = difficulty;
  inputs["k"] = k;
  inputs["tau"] = tau_used;
  if (epsilon) inputs["epsilon"] = *epsilon;
  if (delta) inputs["delta"] = *delta;
  if (pi) inputs["pi"] = *pi;
  inputs["variant"] = variant == balance::ForkChoice::ghost ? "ghost" : "nakamoto";
  j["inputs"] = inputs;
  j["mu_c"] = means.mu_c;
  j["mu_m"] = means.mu_m;
  if (k == 2) {
    double bound = balance::ghost_success_bound(in);
    j["ghost_bound"] = ordered_json{{"value", bound}, {"vacuous", bound <= 0.0}};
  }
  if (min_delay) j["min_delay"] = *min_delay;
  if (pi && variant == balance::ForkChoice::nakamoto)
    j["bitcoin_mean"] = balance::bitcoin_mean(in);
  try {
    j["general"] = balance::bound_report_json(balance::general_k_bounds(in));
  } catch (const balance::DegenerateAttacker& e) {
    j["general"] = nullptr;
    j["general_note"] = e.what();
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_simulate(const SimulateOpts& o) {
  if (o.config.empty() == o.preset.empty())
    throw balance::InvalidConfig("need exactly one of --config or --preset");
  Scenario sc = o.config.empty() ? balance::preset(o.preset) : balance::load_scenario(o.config);
  if (o.seeds) {
    if (*o.seeds < 1) throw balance::InvalidConfig("--seeds must be at least 1");
    sc.seed_count = static_cast<int>(*o.seeds);
  }
  if (const char* env = std::getenv("BAL_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw balance::InvalidConfig(std::string("BAL_SEED is not an integer: ") + env);
    sc.seed = v;
  }
  if (o.seed) sc.seed = *o.seed;
  if (!o.horizon_str.empty()) sc.horizon = balance::parse_duration(o.horizon_str);
  if (!o.out_dir.empty()) sc.out_dir = o.out_dir;

  int n = sc.seed_count;
  std::vector<balance::VerdictRow> rows(static_cast<std::size_t>(n));
  std::vector<std::string> json_lines(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> cursor{0};
  unsigned hw = std::thread::hardware_concurrency();
  int workers = std::min(n, static_cast<int>(hw ? hw : 4));
  auto work = [&] {
    for (;;) {
      int i = cursor.fetch_add(1);
      if (i >= n) return;
      std::uint64_t seed = sc.seed + static_cast<std::uint64_t>(i);
      try {
        balance::AttackVerdict v = balance::execute_attack(sc.graph, sc.mining, sc.consensus,
                                                           sc.attack, seed, sc.horizon);
        rows[static_cast<std::size_t>(i)] = balance::verdict_row(seed, v);
        json_lines[static_cast<std::size_t>(i)] = balance::verdict_json(v, seed).dump();
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::string csv = balance::verdicts_csv(rows);
  ordered_json summary = balance::summary_json(rows);

  if (sc.out_dir) {
    std::filesystem::path dir(*sc.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());
    write_file(dir / "verdicts.csv", csv);
    std::string jsonl;
    for (const std::string& line : json_lines) {
      jsonl += line;
      jsonl += "\n";
    }
    write_file(dir / "verdicts.jsonl", jsonl);
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    ordered_json meta;
    meta["schema"] = "balance-meta v1";
    meta["tool"] = kVersion;
    meta["command"] = "simulate";
    meta["seeds"] = n;
    meta["base_seed"] = sc.seed;
    meta["generated_at"] = iso8601_now();
    write_file(dir / "meta.json", meta.dump(2) + "\n");
  } else {
    std::cout << csv;
    if (!std::cout.good()) throw IoFailure("failed writing to stdout");
  }
  std::cerr << summary.dump(2) << "\n";
  return 0;
}

int run_sweep(const SweepOpts& o) {
  BoundInputs base;
  base.k = 2;
  bool have_rho = false, have_t = false, have_d = false, have_tau = false;
  if (!o.preset.empty()) {
    Scenario sc = balance::preset(o.preset);
    base.rho = sc.attack.rho;
    base.total_power = sc.graph.total_power();
    base.difficulty = sc.mining.difficulty;
    if (sc.attack.tau) {
      base.tau = *sc.attack.tau;
      have_tau = true;
    }
    have_rho = have_t = have_d = true;
  }
  if (o.rho) {
    base.rho = *o.rho;
    have_rho = true;
  }
  if (!o.t_str.empty()) {
    base.total_power = balance::parse_power(o.t_str);
    have_t = true;
  }
  if (!o.d_str.empty()) {
    base.difficulty = balance::parse_hashes(o.d_str);
    have_d = true;
  }
  if (!o.tau_str.empty()) {
    base.tau = balance::parse_duration(o.tau_str);
    have_tau = true;
  }

  if (o.axis != "tau" && o.axis != "rho" && o.axis != "d")
    throw balance::InvalidConfig("--axis must be tau, rho, or d");
  balance::SweepAxis axis = o.axis == "tau"   ? balance::SweepAxis::tau
                            : o.axis == "rho" ? balance::SweepAxis::rho
                                              : balance::SweepAxis::d;
  if (!have_t) throw balance::InvalidConfig("total power is required (--t or --preset)");
  if (o.axis != "d" && !have_d)
    throw balance::InvalidConfig("difficulty is required (--d or --preset)");
  if (o.axis != "rho" && !have_rho)
    throw balance::InvalidConfig("rho is required (--rho or --preset)");
  if (o.axis != "tau" && !have_tau)
    throw balance::InvalidConfig("tau is required (--tau or --preset)");

  double from = axis_value(o.axis, o.from_str, "--from");
  double to = axis_value(o.axis, o.to_str, "--to");
  double step = axis_value(o.axis, o.step_str, "--step");
  if (!(from < to)) throw balance::InvalidConfig("--from must be below --to");
  if (!(step > 0.0)) throw balance::InvalidConfig("--step must be positive");

  std::string csv = balance::sweep_csv(balance::curve_sweep(base, axis, from, to, step));
  if (!o.out_file.empty()) {
    write_file(o.out_file, csv);
  } else {
    std::cout << csv;
    if (!std::cout.good()) throw IoFailure("failed writing to stdout");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Balance attack simulator and analytic toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  AnalyzeOpts an;
  CLI::App* analyze = app.add_subcommand("analyze", "Evaluate the closed-form bounds");
  analyze->add_option("--preset", an.preset, "Preset supplying defaults (r3, emulab, ethereum-default)");
  analyze->add_option("--rho", an.rho, "Attacker fraction of total power");
  analyze->add_option("--t", an.t_str, "Total mining power, e.g. '20 MH/s'");
  analyze->add_option("--d", an.d_str, "Difficulty, e.g. '30 MH'");
  analyze->add_option("--k", an.k, "Number of subgraphs (default 2)");
  analyze->add_option("--tau", an.tau_str, "Delay, e.g. '1180 s' or '20 min'");
  analyze->add_option("--epsilon", an.epsilon, "Target failure probability; adds min_delay");
  analyze->add_option("--variant", an.variant, "ghost or nakamoto");
  analyze->add_option("--pi", an.pi, "Longest-branch extension probability (nakamoto)");
  analyze->add_option("--delta", an.delta, "Concentration margin for k > 2");

  SimulateOpts si;
  CLI::App* simulate = app.add_subcommand("simulate", "Run seeded attack simulations");
  simulate->add_option("--config", si.config, "Scenario JSON file");
  simulate->add_option("--preset", si.preset, "Built-in scenario (r3, emulab, ethereum-default)");
  simulate->add_option("--seeds", si.seeds, "Number of seeded runs");
  simulate->add_option("--seed", si.seed, "Base seed (run i uses seed+i)");
  simulate->add_option("--horizon", si.horizon_str, "Override run horizon, e.g. '120 s'");
  simulate->add_option("--out", si.out_dir, "Output directory for CSV/JSON reports");

  SweepOpts sw;
  CLI::App* sweep = app.add_subcommand("sweep", "Sweep the success bound along one axis");
  sweep->add_option("--preset", sw.preset, "Preset supplying base values");
  sweep->add_option("--axis", sw.axis, "tau, rho, or d")->required();
  sweep->add_option("--from", sw.from_str, "Axis start")->required();
  sweep->add_option("--to", sw.to_str, "Axis end")->required();
  sweep->add_option("--step", sw.step_str, "Axis step")->required();
  sweep->add_option("--rho", sw.rho, "Attacker fraction");
  sweep->add_option("--t", sw.t_str, "Total mining power");
  sweep->add_option("--d", sw.d_str, "Difficulty");
  sweep->add_option("--tau", sw.tau_str, "Delay");
  sweep->add_option("--out", sw.out_file, "Output CSV file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (analyze->parsed()) return run_analyze(an);
    if (simulate->parsed()) return run_simulate(si);
    if (sweep->parsed()) return run_sweep(sw);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const IoFailure& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 3;
  } catch (const balance::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
