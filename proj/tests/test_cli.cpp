#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Sandbox {
  fs::path root;
  Sandbox() {
    root = fs::temp_directory_path() / ("edgereuse_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(root);
  }
  ~Sandbox() { fs::remove_all(root); }

  Result cli(const std::string& args) const {
    const auto o = root / "stdout.txt", e = root / "stderr.txt";
    const std::string cmd = "cd '" + root.string() + "' && '" EDGEREUSE_CLI "' " + args + " >'" + o.string() +
                            "' 2>'" + e.string() + "'";
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(o);
    r.err = slurp(e);
    fs::remove(o);
    fs::remove(e);
    return r;
  }

  void small_profile() const {
    std::ofstream(root / "small.json") << R"({"name": "small", "clusters": 6, "min_cosine": 0.9, "max_cosine": 0.98,
      "unique_fraction": 0.2, "devices": 2, "tasks_per_device": 150, "center_candidates": 4, "threshold": 0.9})";
  }
};

std::map<std::string, std::string> files_under(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("generate writes a complete experiment and is deterministic") {
  Sandbox s;
  s.small_profile();
  auto r = s.cli("generate --profile small.json --seed 4 --out a");
  REQUIRE(r.code == 0);
  for (const char* f : {"trace.csv", "vectors.csv", "experiment.json", "topology.json", "services.json", "profile.json"}) {
    CHECK(fs::exists(s.root / "a" / f));
  }
  CHECK(r.out.find("300 tasks") != std::string::npos);
  REQUIRE(s.cli("generate --profile small.json --seed 4 --out b").code == 0);
  CHECK(files_under(s.root / "a") == files_under(s.root / "b"));
  REQUIRE(s.cli("generate --profile small.json --seed 5 --out c").code == 0);
  CHECK(slurp(s.root / "a" / "vectors.csv") != slurp(s.root / "c" / "vectors.csv"));
}

TEST_CASE("usage errors exit 2 and say what is wrong") {
  Sandbox s;
  auto r = s.cli("generate --profile nosuch --out x");
  CHECK(r.code == 2);
  CHECK(r.err.find("nosuch") != std::string::npos);
  CHECK(r.err.find("cctv-like") != std::string::npos);

  CHECK(s.cli("").code == 2);
  CHECK(s.cli("frobnicate").code == 2);
  CHECK(s.cli("run --out x").code == 2);  // missing --config
  r = s.cli("run --config nothere.json --out x");
  CHECK(r.code == 2);
  CHECK(r.err.find("nothere.json") != std::string::npos);
  CHECK(s.cli("--help").code == 0);
  CHECK(s.cli("--version").code == 0);
}

TEST_CASE("run, event log, sweep and report") {
  Sandbox s;
  s.small_profile();
  REQUIRE(s.cli("generate --profile small.json --seed 9 --out exp").code == 0);

  auto r = s.cli("run --config exp/experiment.json --out out1 --event-log");
  REQUIRE(r.code == 0);
  const auto metrics = nlohmann::json::parse(slurp(s.root / "out1" / "metrics.json"));
  CHECK(metrics.at("tasks").get<int>() == 300);
  CHECK(metrics.contains("reuse_pct"));
  CHECK(metrics.contains("accuracy_pct"));
  CHECK(r.out.find("300 tasks") != std::string::npos);

  // per-task completion equals the sum of that task's event costs
  std::map<std::string, long long> sum;
  {
    std::ifstream ev(s.root / "out1" / "events.csv");
    std::string line;
    std::getline(ev, line);
    CHECK(line == "seq,time_us,kind,task_id,node,action,cost_us");
    while (std::getline(ev, line)) {
      std::vector<std::string> f;
      std::stringstream ls(line);
      for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
      REQUIRE(f.size() == 7);
      if (!f[3].empty()) sum[f[3]] += std::stoll(f[6]);
    }
  }
  {
    std::ifstream pt(s.root / "out1" / "per_task.csv");
    std::string line;
    std::getline(pt, line);
    int rows = 0;
    while (std::getline(pt, line)) {
      std::vector<std::string> f;
      std::stringstream ls(line);
      for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
      CHECK(sum[f[0]] == std::stoll(f[7]));
      ++rows;
    }
    CHECK(rows == 300);
  }

  // same inputs, same bytes
  REQUIRE(s.cli("run --config exp/experiment.json --out out2 --event-log").code == 0);
  CHECK(files_under(s.root / "out1") == files_under(s.root / "out2"));

  r = s.cli("sweep --config exp/experiment.json --out sw");
  REQUIRE(r.code == 0);
  std::ifstream sw(s.root / "sw" / "sweep.csv");
  std::string line;
  std::getline(sw, line);
  CHECK(line == "threshold,reuse_pct,accuracy_pct");
  int rows = 0;
  while (std::getline(sw, line)) ++rows;
  CHECK(rows == 4);
  CHECK(s.cli("sweep --config exp/experiment.json --thresholds 80,90 --out sw2").code == 0);
  CHECK(s.cli("sweep --config exp/experiment.json --thresholds 0.9,0.8 --out sw3").code == 2);

  r = s.cli("report --in out1");
  CHECK(r.code == 0);
  CHECK(r.out.find("reuse") != std::string::npos);
  CHECK(s.cli("report --in nowhere").code == 2);

  // nothing is written outside --out
  std::set<std::string> top;
  for (const auto& e : fs::directory_iterator(s.root)) top.insert(e.path().filename().string());
  CHECK(top == std::set<std::string>{"small.json", "exp", "out1", "out2", "sw", "sw2"});
}

TEST_CASE("bad trace references are usage errors naming the path") {
  Sandbox s;
  s.small_profile();
  REQUIRE(s.cli("generate --profile small.json --out exp").code == 0);
  fs::remove(s.root / "exp" / "trace.csv");
  auto r = s.cli("run --config exp/experiment.json --out o");
  CHECK(r.code == 2);
  CHECK(r.err.find("trace.csv") != std::string::npos);

  REQUIRE(s.cli("generate --profile small.json --out exp2").code == 0);
  std::ofstream(s.root / "exp2" / "trace.csv", std::ios::app) << "12,device-0,voice-command\n";
  r = s.cli("run --config exp2/experiment.json --out o");
  CHECK(r.code == 2);
  CHECK(r.err.find("row 302") != std::string::npos);
}

TEST_CASE("a damaged run directory is a runtime failure") {
  Sandbox s;
  fs::create_directories(s.root / "broken");
  std::ofstream(s.root / "broken" / "metrics.json") << "{}";
  CHECK(s.cli("report --in broken").code == 1);
}
