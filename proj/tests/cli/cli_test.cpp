#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(PERE_CLI_WORKDIR);

// Runs the tool from the work directory; returns the exit status and captures stdout.
int run(const std::string& args, std::string* out = nullptr) {
  fs::create_directories(kWork);
  const std::string cmd = "cd '" + kWork.string() + "' && PERE_LOG=warn '" PERE_EXE "' " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string text;
  char buf[4096];
  while (const std::size_t n = fread(buf, 1, sizeof buf, pipe)) text.append(buf, n);
  const int status = pclose(pipe);
  if (out) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& name) {
  std::ifstream in(kWork / name, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& name, const std::string& text) {
  fs::create_directories(kWork);
  std::ofstream(kWork / name, std::ios::binary) << text;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

void ensure_catalog() {
  static bool done = false;
  if (done) return;
  REQUIRE(run("synth-catalog --items 300 --dim 6 --clusters 4 --seed 2 --out cat.csv") == 0);
  write("small.json", R"({"K": 10, "m": 5, "T": 2, "P": 100, "k_rec": 30, "k_rel": 20})");
  done = true;
}

}  // namespace

TEST_CASE("cli: simulate is byte-identical for equal seeds") {
  ensure_catalog();
  REQUIRE(run("simulate --config small.json --catalog cat.csv --users 6 --seed 9 --threads 2 --out a") == 0);
  REQUIRE(run("simulate --config small.json --catalog cat.csv --users 6 --seed 9 --threads 1 --out b") == 0);
  CHECK(slurp("a.csv") == slurp("b.csv"));
  CHECK(slurp("a.json") == slurp("b.json"));
  CHECK_FALSE(slurp("a.timing.json").empty());
  REQUIRE(run("simulate --config small.json --catalog cat.csv --users 6 --seed 10 --out c") == 0);
  CHECK(slurp("a.csv") != slurp("c.csv"));

  const auto rows = lines(slurp("a.csv"));
  REQUIRE(rows.size() == 1 + 6 * 6);
  CHECK(rows[0] == "strategy,user_seed,hr1,auc10,ndcg10,ndcg30,map,mrr,rounds,final_radius");
}

TEST_CASE("cli: strategy column holds exactly the requested strategies") {
  ensure_catalog();
  REQUIRE(run("simulate --config small.json --catalog cat.csv --users 3 --strategy pere,kmedoids --out s") == 0);
  std::set<std::string> seen;
  const auto rows = lines(slurp("s.csv"));
  for (std::size_t r = 1; r < rows.size(); ++r) seen.insert(rows[r].substr(0, rows[r].find(',')));
  CHECK(seen == std::set<std::string>{"pere", "kmedoids"});
  CHECK(rows.size() == 1 + 2 * 3);
}

TEST_CASE("cli: one user with no adaptive rounds gives a burn-in-only row") {
  ensure_catalog();
  write("burn.json", R"({"K": 10, "m": 5, "T": 0, "P": 100, "k_rel": 20})");
  REQUIRE(run("simulate --config burn.json --catalog cat.csv --users 1 --strategy pere --out burn") == 0);
  const auto rows = lines(slurp("burn.csv"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].rfind("pere,", 0) == 0);
  // rounds column is the second to last.
  const auto last = rows[1].rfind(',');
  const auto prev = rows[1].rfind(',', last - 1);
  CHECK(rows[1].substr(prev + 1, last - prev - 1) == "0");
}

TEST_CASE("cli: fit-kappa recovers kappa and its grid agrees") {
  REQUIRE(run("synth-catalog --items 100 --dim 4 --clusters 3 --seed 1 --out c100.csv") == 0);
  REQUIRE(run("synth-experience --catalog c100.csv --users 1000 --kappa 1.5 --seed 2 --out exp.json") == 0);
  std::string out;
  REQUIRE(run("fit-kappa exp.json", &out) == 0);
  const double kappa = std::stod(out);
  CHECK(kappa >= 1.35);
  CHECK(kappa <= 1.65);

  REQUIRE(run("fit-kappa exp.json --grid --kappa-max 5", &out) == 0);
  const auto rows = lines(out);
  REQUIRE(rows.size() == 1 + 50 + 1);
  CHECK(rows[0] == "kappa,nll");
  std::vector<double> ks, nll;
  for (std::size_t r = 1; r <= 50; ++r) {
    const auto comma = rows[r].find(',');
    ks.push_back(std::stod(rows[r].substr(0, comma)));
    nll.push_back(std::stod(rows[r].substr(comma + 1)));
  }
  const auto best = static_cast<std::size_t>(std::min_element(nll.begin(), nll.end()) - nll.begin());
  for (std::size_t g = 1; g <= best; ++g) CHECK(nll[g] < nll[g - 1]);
  for (std::size_t g = best + 1; g < nll.size(); ++g) CHECK(nll[g] > nll[g - 1]);
  REQUIRE(rows.back().rfind("kappa_hat,", 0) == 0);
  const double grid_hat = std::stod(rows.back().substr(10));
  CHECK(std::abs(grid_hat - ks[best]) <= ks[1] - ks[0]);
}

TEST_CASE("cli: exit codes") {
  ensure_catalog();
  write("bad.json", "{not json");
  CHECK(run("fit-kappa bad.json") == 2);
  write("schema.json", R"({"dim": 2})");
  CHECK(run("fit-kappa schema.json") == 2);
  CHECK(run("fit-kappa") == 2);
  CHECK(run("") == 2);
  CHECK(run("simulate --catalog cat.csv --users 0") == 2);
  CHECK(run("simulate --catalog cat.csv --strategy nope --out x") == 2);
  write("badcfg.json", R"({"K": "ten"})");
  CHECK(run("simulate --config badcfg.json --catalog cat.csv --out x") == 2);
  write("bad.csv", "id,weight,e0\na,1,zzz\n");
  CHECK(run("simulate --catalog bad.csv --out x") == 2);
  CHECK(run("--help") == 0);
}
