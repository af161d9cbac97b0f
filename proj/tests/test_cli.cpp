#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

namespace {

struct CliResult {
  int status = -1;
  std::string out;
};

// Runs the tool under test with the given arguments; stderr is dropped so
// summaries and usage text do not leak into the captured stream.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  const char* bin = std::getenv("BALANCE_CLI");
  REQUIRE_MESSAGE(bin != nullptr, "BALANCE_CLI must point at the built tool");
  std::string cmd = env_prefix + "\"" + bin + "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult res;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) res.out.append(buf, n);
  int rc = pclose(pipe);
  res.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return res;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    out.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("the tool reports its version and exits cleanly") {
  CliResult r = run_cli("--version");
  CHECK(r.status == 0);
  CHECK(r.out.find("balance 1.0.0") != std::string::npos);
}

TEST_CASE("bound analysis emits one JSON document") {
  CliResult r = run_cli("analyze --rho 0.12 --t 20MH/s --d 30MH --tau 1180s --epsilon 0.1");
  REQUIRE(r.status == 0);
  nlohmann::json doc = nlohmann::json::parse(r.out);
  CHECK(doc["schema"] == "balance-analysis v1");
  CHECK(doc["mu_c"].get<double>() == doctest::Approx(346.1333333));
  CHECK(doc["mu_m"].get<double>() == doctest::Approx(94.4));
  CHECK(doc["min_delay"].get<double>() == doctest::Approx(507.2209249));
  CHECK(doc["ghost_bound"]["value"].get<double>() == doctest::Approx(0.9992500648));
  CHECK(doc["ghost_bound"]["vacuous"] == false);
  CHECK(doc["inputs"]["rho"].get<double>() == doctest::Approx(0.12));
}

TEST_CASE("a preset fills in the analysis inputs") {
  CliResult r = run_cli("analyze --preset r3 --tau 1180s");
  REQUIRE(r.status == 0);
  nlohmann::json doc = nlohmann::json::parse(r.out);
  CHECK(doc["mu_c"].get<double>() == doctest::Approx(346.1333333));
}

TEST_CASE("analysis without enough inputs is a usage error") {
  CHECK(run_cli("analyze").status == 2);
  CHECK(run_cli("analyze --rho 0.12 --t 20MH/s").status == 2);
  CHECK(run_cli("frobnicate").status != 0);
}

TEST_CASE("seeded simulations stream a versioned CSV") {
  CliResult r = run_cli("simulate --preset emulab --seeds 2");
  REQUIRE(r.status == 0);
  std::vector<std::string> rows = lines(r.out);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == "# balance-verdicts v1");
  CHECK(rows[1] ==
        "seed,success,committed_then_reverted,delta,attacker_blocks,"
        "adopted_origin,uncles_attacker");
  CHECK(rows[2].rfind("1,", 0) == 0);
  CHECK(rows[3].rfind("2,", 0) == 0);
}

TEST_CASE("the base seed comes from the flag or the environment") {
  CliResult flagged = run_cli("simulate --preset emulab --seeds 1 --seed 5");
  REQUIRE(flagged.status == 0);
  CHECK(lines(flagged.out)[2].rfind("5,", 0) == 0);

  CliResult env = run_cli("simulate --preset emulab --seeds 1", "BAL_SEED=9 ");
  REQUIRE(env.status == 0);
  CHECK(lines(env.out)[2].rfind("9,", 0) == 0);

  // The flag wins over the environment.
  CliResult both = run_cli("simulate --preset emulab --seeds 1 --seed 5", "BAL_SEED=9 ");
  REQUIRE(both.status == 0);
  CHECK(lines(both.out)[2].rfind("5,", 0) == 0);

  CliResult bad = run_cli("simulate --preset emulab --seeds 1", "BAL_SEED=apple ");
  CHECK(bad.status == 2);
}

TEST_CASE("identical seeds give byte-identical batches") {
  CliResult a = run_cli("simulate --preset emulab --seeds 3");
  CliResult b = run_cli("simulate --preset emulab --seeds 3");
  REQUIRE(a.status == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("simulation input errors use the config exit code") {
  CHECK(run_cli("simulate --preset classic").status == 2);
  CHECK(run_cli("simulate --config /no/such/file.json").status == 2);
  CHECK(run_cli("simulate --preset emulab --seeds 0").status == 2);
  CHECK(run_cli("simulate").status == 2);
  CHECK(run_cli("simulate --preset emulab --config x.json").status == 2);
}

TEST_CASE("an output directory collects the batch reports") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() /
                 ("balance_cli_test_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  CliResult r = run_cli("simulate --preset emulab --seeds 2 --out \"" + dir.string() + "\"");
  REQUIRE(r.status == 0);
  CHECK(fs::exists(dir / "verdicts.csv"));
  CHECK(fs::exists(dir / "verdicts.jsonl"));
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "meta.json"));

  std::ifstream summary(dir / "summary.json");
  nlohmann::json s = nlohmann::json::parse(summary);
  CHECK(s["schema"] == "balance-summary v1");
  CHECK(s["seeds"] == 2);

  std::ifstream jsonl(dir / "verdicts.jsonl");
  std::string line;
  int rows = 0;
  while (std::getline(jsonl, line)) {
    nlohmann::json v = nlohmann::json::parse(line);
    CHECK(v["schema"] == "balance-verdict v1");
    ++rows;
  }
  CHECK(rows == 2);
  fs::remove_all(dir);
}

TEST_CASE("sweeps print the bound along one axis") {
  CliResult r =
      run_cli("sweep --axis tau --from 100s --to 300s --step 100s --rho 0.12 --t 20MH/s --d 30MH");
  REQUIRE(r.status == 0);
  std::vector<std::string> rows = lines(r.out);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "# balance-sweep v1");
  CHECK(rows[1] == "x,bound,vacuous");
  CHECK(rows[2].rfind("100,", 0) == 0);
  CHECK(rows[4].rfind("300,", 0) == 0);

  CHECK(run_cli("sweep --axis tau --from 300s --to 100s --step 100s --rho 0.12 --t 20MH/s "
                "--d 30MH")
            .status == 2);
  CHECK(run_cli("sweep --axis banana --from 1 --to 2 --step 1 --rho 0.12 --t 20MH/s --d 30MH")
            .status == 2);
  CHECK(run_cli("sweep --axis tau --from 100s --to 300s --step 100s --rho 0.12 --t 20MH/s "
                "--d 30MH --out /no/such/dir/x.csv")
            .status == 3);
}
