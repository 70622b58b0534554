// rsmf command-line driver: solve sparse systems with the rank-structured
// multifrontal toolkit, run communication-model sweeps, and emit scaling
// benchmarks. Exit codes: 0 ok, 2 parse/config error, 3 numeric failure,
// 4 non-convergence.
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsmf/rsmf.hpp"
#include "rsmf/sptrsv.hpp"

using json = nlohmann::ordered_json;
using namespace rsmf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitNoConvergence = 4;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

struct MatrixSource {
  SparseMatrix A;
  std::vector<std::vector<double>> coords;
  bool has_coords = false;
  std::string description;
};

MatrixSource load_matrix(const std::string& source) {
  MatrixSource src;
  src.description = source;
  const auto colon = source.find(':');
  if (colon != std::string::npos) {
    const std::string kind = source.substr(0, colon);
    if (kind == "poisson2d" || kind == "poisson3d") {
      const index_t k = std::stoll(source.substr(colon + 1));
      auto mp = model_problem(kind, k);
      src.A = std::move(mp.A);
      src.coords = std::move(mp.coords);
      src.has_coords = true;
      return src;
    }
  }
  src.A = read_matrix_market_file(source);
  return src;
}

std::vector<index_t> parse_pz_list(const std::string& text) {
  std::vector<index_t> out;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const index_t lo = std::stoll(text.substr(0, dots));
    const index_t hi = std::stoll(text.substr(dots + 2));
    if (!ProcessGrid3D::power_of_two(lo))
      throw config_error("pz range must start at a power of two");
    for (index_t pz = lo; pz <= hi; pz *= 2) out.push_back(pz);
  } else {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
  }
  if (out.empty()) throw config_error("empty pz list");
  for (auto pz : out)
    if (!ProcessGrid3D::power_of_two(pz)) throw config_error("pz values must be powers of two");
  return out;
}

std::vector<index_t> parse_size_list(const std::string& text) {
  std::vector<index_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
  return out;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw config_error("cannot open output file: " + path);
  out << content;
}

Compression parse_compression(const std::string& s) {
  if (s == "none") return Compression::none;
  if (s == "blr") return Compression::blr;
  if (s == "hodlr") return Compression::hodlr;
  throw config_error("unknown compression: " + s);
}

struct SolveFlags {
  std::string matrix;
  std::string ordering = "nd";
  std::string compression = "none";
  double tol = 1e-6;
  index_t tile = 32;
  index_t leaf_size = 32;
  double eta = 0.7;
  std::string mode = "direct";
  double gmres_tol = 1e-8;
  index_t restart = 50;
  index_t maxit = 500;
  index_t threshold = 256;
  std::string out;
  std::string dot;
  std::uint64_t seed = 0;
  index_t workers = 1;
};

int cmd_solve(const SolveFlags& f) {
  if (f.ordering != "nd") throw config_error("unknown ordering: " + f.ordering);
  if (f.workers != 1) throw config_error("workers is reserved and must be 1");
  if (f.mode != "direct" && f.mode != "gmres") throw config_error("unknown mode: " + f.mode);
  auto src = load_matrix(f.matrix);

  PipelineOptions opts;
  opts.policy.compression = parse_compression(f.compression);
  opts.policy.tol = f.tol;
  opts.policy.tile = f.tile;
  opts.policy.leaf_size = f.leaf_size;
  opts.policy.threshold_dense = f.threshold;
  opts.policy.seed = f.seed;
  if (!f.dot.empty() && opts.policy.compression != Compression::none)
    throw config_error("--dot requires --compression none");

  Timer t_factor;
  auto p = factorize_system(src.A, src.has_coords ? &src.coords : nullptr, opts);
  const double factor_seconds = t_factor.seconds();

  // deterministic right-hand side: A * ones
  std::vector<double> ones(static_cast<std::size_t>(src.A.n_cols), 1.0);
  std::vector<double> b = src.A.apply(ones);

  json report;
  report["config"] = {{"matrix", f.matrix},     {"ordering", f.ordering},
                      {"compression", f.compression}, {"tol", f.tol},
                      {"tile", f.tile},         {"leaf_size", f.leaf_size},
                      {"eta", f.eta},           {"mode", f.mode},
                      {"gmres_tol", f.gmres_tol}, {"restart", f.restart},
                      {"maxit", f.maxit},       {"seed", f.seed}};
  report["n"] = p.fac.stats.n;
  report["nnz"] = p.fac.stats.nnz;
  json nodes = json::array();
  for (const auto& ns : p.fac.stats.nodes)
    nodes.push_back({{"id", ns.id},
                     {"s", ns.s},
                     {"u", ns.u},
                     {"rep", to_string(ns.rep)},
                     {"max_rank", ns.max_rank}});
  report["factor"] = {{"fill", p.fac.stats.fill},
                      {"peak_front", p.fac.stats.peak_front},
                      {"flops", p.fac.stats.flops},
                      {"nodes", std::move(nodes)}};

  Timer t_solve;
  int rc = kExitOk;
  if (f.mode == "direct") {
    auto x = mf_solve(p.fac, b);
    const double resid = relative_residual(src.A, x, b);
    report["solve"] = {{"mode", "direct"}, {"residual", resid}};
  } else {
    GmresOptions g;
    g.tol = f.gmres_tol;
    g.restart = f.restart;
    g.maxit = f.maxit;
    g.seed = f.seed;
    auto apply = [&](const std::vector<double>& v) { return src.A.apply(v); };
    auto prec = [&](const std::vector<double>& v) { return mf_solve(p.fac, v); };
    auto [x, trace] = gmres(apply, prec, b, g);
    const double resid = relative_residual(src.A, x, b);
    report["solve"] = {{"mode", "gmres"},
                       {"residual", resid},
                       {"converged", trace.converged},
                       {"iterations", trace.iterations},
                       {"restarts", trace.restarts},
                       {"history", trace.residual_history}};
    if (!trace.converged) rc = kExitNoConvergence;
  }
  const double solve_seconds = t_solve.seconds();
  report["timings"] = {{"factor_seconds", factor_seconds}, {"solve_seconds", solve_seconds}};
  write_output(f.out, report.dump(2) + "\n");

  if (!f.dot.empty()) {
    auto ex = mf_export_factors(p.fac);
    TaskDag dag = build_task_dag(ex);
    write_output(f.dot, dag.to_dot());
  }
  return rc;
}

struct SimFlags {
  std::string sim = "planar";
  double n = 1e6;
  double P = 1024;
  std::string pz = "1..64";
  std::string matrix;
  double alpha = 1.7e-6;
  double beta = 3.2e-10;
  double gamma = 1e-11;
  std::string out;
  std::string report;
};

json comm_report_json(const CommReport& rep, const ProcessGrid3D& grid) {
  json j;
  j["grid"] = {{"px", grid.px}, {"py", grid.py}, {"pz", grid.pz}};
  json procs = json::array();
  for (const auto& p : rep.procs)
    procs.push_back({{"volume_scalars", p.volume_scalars},
                     {"received_scalars", p.received_scalars},
                     {"messages", p.messages},
                     {"memory_scalars", p.memory_scalars},
                     {"flops", p.flops}});
  j["procs"] = std::move(procs);
  j["aggregates"] = {{"max_volume", rep.max_volume},
                     {"mean_volume", rep.mean_volume},
                     {"max_memory", rep.max_memory},
                     {"mean_memory", rep.mean_memory}};
  j["critical_seconds"] = rep.critical_seconds;
  return j;
}

int cmd_sim(const SimFlags& f) {
  auto pz_list = parse_pz_list(f.pz);
  if (f.P < 1) throw config_error("P must be >= 1");
  MachineModel model{f.alpha, f.beta, f.gamma};
  if (f.sim == "planar" || f.sim == "nonplanar") {
    const auto problem = f.sim == "planar" ? ProblemClass::planar : ProblemClass::nonplanar;
    write_output(f.out, sweep_pz(problem, f.n, f.P, pz_list, nullptr, model));
    return kExitOk;
  }
  if (f.sim != "measured") throw config_error("unknown sim kind: " + f.sim);
  if (f.matrix.empty()) throw config_error("measured sim requires --matrix");
  auto src = load_matrix(f.matrix);
  auto nd = nested_dissection(src.A, src.has_coords ? &src.coords : nullptr);
  auto es = symbolic_factorize(src.A, nd.p_col);
  auto tree = comm_tree_from_elimination(es);
  write_output(f.out, sweep_pz(ProblemClass::planar, static_cast<double>(src.A.n_cols), f.P,
                               pz_list, &tree, model));
  if (!f.report.empty()) {
    json reports = json::array();
    for (index_t pz : pz_list) {
      if (static_cast<index_t>(f.P) % pz != 0) continue;
      auto [px, py] = square_layer_grid(static_cast<index_t>(f.P) / pz);
      ProcessGrid3D grid{px, py, pz};
      auto mapping = build_3d_mapping(tree, grid);
      json entry;
      entry["pz"] = pz;
      entry["splu"] = comm_report_json(simulate_splu_comm(mapping, tree, grid, model), grid);
      entry["sptrsv"] = comm_report_json(simulate_sptrsv_comm(mapping, tree, grid, model), grid);
      reports.push_back(std::move(entry));
    }
    write_output(f.report, reports.dump(2) + "\n");
  }
  return kExitOk;
}

struct BenchFlags {
  std::string matrix = "poisson2d";
  std::string sizes;
  std::string compression = "none";
  double tol = 1e-6;
  index_t tile = 32;
  index_t leaf_size = 32;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_bench(const BenchFlags& f) {
  auto sizes = parse_size_list(f.sizes);
  if (sizes.empty()) throw config_error("empty size list");
  std::ostringstream os;
  os << "n,factor_entries,factor_flops,solve_seconds\n";
  for (index_t k : sizes) {
    try {
      auto mp = model_problem(f.matrix, k);
      PipelineOptions opts;
      opts.policy.compression = parse_compression(f.compression);
      opts.policy.tol = f.tol;
      opts.policy.tile = f.tile;
      opts.policy.leaf_size = f.leaf_size;
      opts.policy.seed = f.seed;
      auto p = factorize_system(mp.A, &mp.coords, opts);
      std::vector<double> b(static_cast<std::size_t>(mp.A.n_cols), 1.0);
      Timer t_solve;
      auto x = mf_solve(p.fac, b);
      (void)x;
      os << mp.A.n_cols << "," << p.fac.stats.fill << "," << p.fac.stats.flops << ","
         << t_solve.seconds() << "\n";
    } catch (const std::exception& e) {
      std::cerr << "bench: size " << k << " failed: " << e.what() << "\n";
    }
  }
  write_output(f.out, os.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank-structured multifrontal solver toolkit"};
  app.require_subcommand(1);

  SolveFlags sf;
  auto* solve = app.add_subcommand("solve", "factor a matrix and solve (direct or GMRES)");
  solve->add_option("--matrix", sf.matrix, "matrix file or generator like poisson2d:15")
      ->required();
  solve->add_option("--ordering", sf.ordering, "fill-reducing ordering {nd}");
  solve->add_option("--compression", sf.compression, "front compression {none,blr,hodlr}");
  solve->add_option("--tol", sf.tol, "compression tolerance");
  solve->add_option("--tile", sf.tile, "BLR tile size");
  solve->add_option("--leaf-size", sf.leaf_size, "HODLR leaf size");
  solve->add_option("--eta", sf.eta, "strong-admissibility parameter");
  solve->add_option("--mode", sf.mode, "solve mode {direct,gmres}");
  solve->add_option("--gmres-tol", sf.gmres_tol, "GMRES relative tolerance");
  solve->add_option("--restart", sf.restart, "GMRES restart length");
  solve->add_option("--maxit", sf.maxit, "GMRES iteration cap");
  solve->add_option("--threshold", sf.threshold, "dense-front size threshold");
  solve->add_option("--out", sf.out, "JSON report path (default stdout)");
  solve->add_option("--dot", sf.dot, "write the solve task DAG in DOT format");
  solve->add_option("--seed", sf.seed, "random seed");
  solve->add_option("--workers", sf.workers, "reserved, must be 1");

  SimFlags mf;
  auto* sim = app.add_subcommand("sim", "communication-cost model sweeps");
  sim->add_option("--sim", mf.sim, "sweep kind {planar,nonplanar,measured}");
  sim->add_option("--n", mf.n, "problem size for the formulas");
  sim->add_option("--P", mf.P, "total process count");
  sim->add_option("--pz", mf.pz, "pz list: 1..64 or 1,2,4");
  sim->add_option("--matrix", mf.matrix, "matrix for measured sweeps");
  sim->add_option("--alpha", mf.alpha, "seconds per message");
  sim->add_option("--beta", mf.beta, "seconds per scalar");
  sim->add_option("--gamma", mf.gamma, "seconds per flop");
  sim->add_option("--out", mf.out, "CSV path (default stdout)");
  sim->add_option("--report", mf.report, "per-pz CommReport JSON path (measured sims)");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "scaling series over model-problem sizes");
  bench->add_option("--matrix", bf.matrix, "model problem family {poisson2d,poisson3d}");
  bench->add_option("--sizes", bf.sizes, "comma-separated grid sizes")->required();
  bench->add_option("--compression", bf.compression, "front compression {none,blr,hodlr}");
  bench->add_option("--tol", bf.tol, "compression tolerance");
  bench->add_option("--tile", bf.tile, "BLR tile size");
  bench->add_option("--leaf-size", bf.leaf_size, "HODLR leaf size");
  bench->add_option("--out", bf.out, "CSV path (default stdout)");
  bench->add_option("--seed", bf.seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (solve->parsed()) return cmd_solve(sf);
    if (sim->parsed()) return cmd_sim(mf);
    if (bench->parsed()) return cmd_bench(bf);
    return kExitConfig;
  } catch (const singular_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const size_error& e) {
    std::cerr << "size error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const structural_error& e) {
    std::cerr << "numeric/structural failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
