#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string cli = RSMF_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string stdout_text;
  std::string stderr_text;
};

RunResult run(const std::string& args) {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / "rsmf_cli_test";
  fs::create_directories(dir);
  fs::path out = dir / ("out" + std::to_string(counter) + ".txt");
  fs::path err = dir / ("err" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = cli + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  RunResult r;
  r.exit_code = WEXITSTATUS(status);
  r.stdout_text = slurp(out);
  r.stderr_text = slurp(err);
  return r;
}

nlohmann::json strip_timings(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  j.erase("timings");
  return j;
}

std::string drop_seconds_column(const std::string& csv) {
  std::istringstream is(csv);
  std::ostringstream os;
  std::string line;
  while (std::getline(is, line)) {
    const auto pos = line.rfind(',');
    os << line.substr(0, pos) << "\n";
  }
  return os.str();
}

}  // namespace

TEST_CASE("solve: direct exact run reports a tiny residual") {
  auto r = run("solve --matrix poisson2d:15 --compression none --mode direct");
  REQUIRE(r.exit_code == 0);
  auto j = nlohmann::json::parse(r.stdout_text);
  CHECK(j["solve"]["mode"] == "direct");
  CHECK(j["solve"]["residual"].get<double>() <= 1e-12);
  CHECK(j["n"] == 225);
  CHECK(j["factor"]["fill"].get<long>() > 0);
}

TEST_CASE("solve: blr-preconditioned gmres converges") {
  auto r = run(
      "solve --matrix poisson2d:31 --compression blr --tol 1e-6 --threshold 64 --tile 16 "
      "--mode gmres");
  REQUIRE(r.exit_code == 0);
  auto j = nlohmann::json::parse(r.stdout_text);
  CHECK(j["solve"]["converged"] == true);
  CHECK(j["solve"]["iterations"].get<int>() <= 50);
}

TEST_CASE("solve: missing file exits 2 naming the path") {
  auto r = run("solve --matrix /no/such/file.mtx");
  CHECK(r.exit_code == 2);
  CHECK(r.stderr_text.find("/no/such/file.mtx") != std::string::npos);
}

TEST_CASE("solve: singular matrix exits 3") {
  fs::path dir = fs::temp_directory_path() / "rsmf_cli_test";
  fs::create_directories(dir);
  fs::path mtx = dir / "singular.mtx";
  std::ofstream(mtx) << "%%MatrixMarket matrix coordinate real general\n"
                        "2 2 4\n1 1 1.0\n1 2 1.0\n2 1 1.0\n2 2 1.0\n";
  auto r = run("solve --matrix " + mtx.string());
  CHECK(r.exit_code == 3);
}

TEST_CASE("solve: unreachable gmres tolerance exits 4") {
  auto r = run("solve --matrix poisson2d:7 --mode gmres --gmres-tol 1e-30 --maxit 2");
  CHECK(r.exit_code == 4);
  auto j = nlohmann::json::parse(r.stdout_text);
  CHECK(j["solve"]["converged"] == false);
}

TEST_CASE("solve: reserved workers flag must be 1") {
  auto r = run("solve --matrix poisson2d:7 --workers 2");
  CHECK(r.exit_code == 2);
}

TEST_CASE("solve: dot dump emits the task DAG") {
  fs::path dir = fs::temp_directory_path() / "rsmf_cli_test";
  fs::create_directories(dir);
  fs::path dot = dir / "dag.dot";
  auto r = run("solve --matrix poisson2d:15 --dot " + dot.string());
  REQUIRE(r.exit_code == 0);
  std::ifstream in(dot);
  std::string first;
  std::getline(in, first);
  CHECK(first == "digraph sptrsv {");
  // dot dump with compression is a config error
  auto r2 = run("solve --matrix poisson2d:15 --compression blr --threshold 16 --dot " +
                dot.string());
  CHECK(r2.exit_code == 2);
}

TEST_CASE("sim: planar sweep has the fixed schema and interior minimum") {
  auto r = run("sim --sim planar --n 1e6 --P 1024 --pz 1..64");
  REQUIRE(r.exit_code == 0);
  std::istringstream is(r.stdout_text);
  std::string header;
  std::getline(is, header);
  CHECK(header == "pz,W3d_formula,W2d_formula,W3d_measured,M3d,latency3d");
  std::vector<double> w3d;
  std::string line;
  while (std::getline(is, line)) {
    long pz = 0;
    double v = 0;
    std::sscanf(line.c_str(), "%ld,%lf", &pz, &v);
    w3d.push_back(v);
  }
  REQUIRE(w3d.size() == 7);
  auto mn = std::min_element(w3d.begin(), w3d.end());
  CHECK(mn != w3d.begin());
  CHECK(mn != w3d.end() - 1);
}

TEST_CASE("sim: measured sweep fills the measured column") {
  auto r = run("sim --sim measured --matrix poisson2d:31 --P 16 --pz 1,2,4");
  REQUIRE(r.exit_code == 0);
  std::istringstream is(r.stdout_text);
  std::string line;
  std::getline(is, line);
  int rows = 0;
  while (std::getline(is, line)) {
    double w3, w2, meas;
    long pz;
    REQUIRE(std::sscanf(line.c_str(), "%ld,%lf,%lf,%lf", &pz, &w3, &w2, &meas) == 4);
    CHECK(meas > 0.0);
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("sim: measured sweep emits per-pz CommReport JSON") {
  fs::path dir = fs::temp_directory_path() / "rsmf_cli_test";
  fs::create_directories(dir);
  fs::path rep = dir / "comm.json";
  auto r = run("sim --sim measured --matrix poisson2d:15 --P 8 --pz 1,2 --report " +
               rep.string());
  REQUIRE(r.exit_code == 0);
  std::ifstream in(rep);
  auto j = nlohmann::json::parse(in);
  REQUIRE(j.size() == 2);
  CHECK(j[0]["pz"] == 1);
  CHECK(j[0]["splu"]["procs"].size() == 8);
  CHECK(j[1]["splu"]["aggregates"]["max_volume"].get<double>() > 0.0);
  CHECK(j[1]["sptrsv"]["critical_seconds"].get<double>() > 0.0);
  // per-process fields mirror the stats schema
  const auto& p0 = j[0]["splu"]["procs"][0];
  for (const char* key :
       {"volume_scalars", "received_scalars", "messages", "memory_scalars", "flops"})
    CHECK(p0.contains(key));
}

TEST_CASE("sim: invalid grid exits 2") {
  CHECK(run("sim --sim planar --pz 3").exit_code == 2);
  CHECK(run("sim --sim measured --P 16 --pz 1,2").exit_code == 2);  // no matrix
}

TEST_CASE("bench: two rows for two sizes, empty sizes exit 2") {
  auto r = run("bench --matrix poisson2d --sizes 15,31");
  REQUIRE(r.exit_code == 0);
  CHECK(std::count(r.stdout_text.begin(), r.stdout_text.end(), '\n') == 3);
  CHECK(r.stdout_text.rfind("n,factor_entries,factor_flops,solve_seconds\n", 0) == 0);
  auto r2 = run("bench --matrix poisson2d --sizes \"\"");
  CHECK(r2.exit_code == 2);
  // per-size failure is recorded on stderr and the run continues
  auto r3 = run("bench --matrix poisson2d --sizes 1,15");
  CHECK(r3.exit_code == 0);
  CHECK(r3.stderr_text.find("size 1 failed") != std::string::npos);
  CHECK(std::count(r3.stdout_text.begin(), r3.stdout_text.end(), '\n') == 2);
}

TEST_CASE("same config and seed give byte-identical reports modulo timings") {
  const std::string args =
      "solve --matrix poisson2d:15 --compression blr --threshold 32 --tile 8 --mode gmres "
      "--seed 7";
  auto a = run(args);
  auto b = run(args);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(strip_timings(a.stdout_text) == strip_timings(b.stdout_text));
  CHECK(strip_timings(a.stdout_text).dump() == strip_timings(b.stdout_text).dump());

  auto c = run("sim --sim planar --n 1e5 --P 256 --pz 1..16");
  auto d = run("sim --sim planar --n 1e5 --P 256 --pz 1..16");
  CHECK(c.stdout_text == d.stdout_text);

  auto e = run("bench --matrix poisson2d --sizes 7,15");
  auto f = run("bench --matrix poisson2d --sizes 7,15");
  CHECK(drop_seconds_column(e.stdout_text) == drop_seconds_column(f.stdout_text));
}
