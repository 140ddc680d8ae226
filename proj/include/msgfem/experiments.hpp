#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "io.hpp"
#include "precond.hpp"

namespace msgfem {

template <class F>
inline void parallel_for(int n, int jobs, F&& f) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mtx;
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mtx);
          if (!err) err = std::current_exception();
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

/// Run configuration; flat key = value file format ('#' comments). Command
/// line flags override file values, file values override defaults.
struct RunConfig {
  std::string experiment = "solve";
  int dim = 2;
  std::vector<Index> mesh_cells = {64, 64};
  std::vector<int> subdomains = {4, 4};
  Index overlap = 2;
  Index ell = 2;
  std::string variant = "both";  // full | ring | both
  std::string coefficient = "constant";  // constant | skyscraper | channel | file
  double contrast = 1e4;
  std::vector<double> contrasts = {1.0, 1e3, 1e6};
  Index block_size = 8;
  std::string coeff_file;
  int channel_column = 1;
  int channel_bar_row = 1;
  int n = 10;       // eigenfunctions per subdomain
  int n_min = 1;
  int n_max = 24;
  std::vector<Index> ells = {2};
  int nev = 10;     // computed eigenpairs for spectrum runs
  std::string solver = "richardson";  // richardson | gmres | both
  double tol = 1e-8;
  int maxit = 1000;
  std::uint64_t seed = 12345;
  int jobs = 1;
  std::string out = "out";
  double source = 1.0;
  std::string backend = "saddle";  // saddle | dense
  std::vector<int> bench_m = {17, 21, 25};
  std::vector<Index> bench_ell = {1, 2, 3};
  int repeats = 10;
  std::vector<int> subdomain_ids;  // spectrum: defaults chosen if empty

  void set(const std::string& key, const std::string& value);
  std::string serialize() const;
  static RunConfig from_file(const std::string& path);
};

namespace detail {

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::istringstream in(s);
  std::vector<T> out;
  double x;
  while (in >> x) out.push_back((T)x);
  if (!in.eof() && in.fail())
    throw std::invalid_argument("config: cannot parse list '" + s + "'");
  return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
  return out.str();
}

}  // namespace detail

inline void RunConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_list;
  if (key == "experiment") experiment = value;
  else if (key == "dim") dim = std::stoi(value);
  else if (key == "mesh") mesh_cells = parse_list<Index>(value);
  else if (key == "subdomains") subdomains = parse_list<int>(value);
  else if (key == "overlap") overlap = std::stoll(value);
  else if (key == "ell") ell = std::stoll(value);
  else if (key == "variant") variant = value;
  else if (key == "coefficient") coefficient = value;
  else if (key == "contrast") contrast = std::stod(value);
  else if (key == "contrasts") contrasts = parse_list<double>(value);
  else if (key == "block_size") block_size = std::stoll(value);
  else if (key == "coeff_file") coeff_file = value;
  else if (key == "channel_column") channel_column = std::stoi(value);
  else if (key == "channel_bar_row") channel_bar_row = std::stoi(value);
  else if (key == "n") n = std::stoi(value);
  else if (key == "n_min") n_min = std::stoi(value);
  else if (key == "n_max") n_max = std::stoi(value);
  else if (key == "ells") ells = parse_list<Index>(value);
  else if (key == "nev") nev = std::stoi(value);
  else if (key == "solver") solver = value;
  else if (key == "tol") tol = std::stod(value);
  else if (key == "maxit") maxit = std::stoi(value);
  else if (key == "seed") seed = std::stoull(value);
  else if (key == "jobs") jobs = std::stoi(value);
  else if (key == "out") out = value;
  else if (key == "source") source = std::stod(value);
  else if (key == "backend") backend = value;
  else if (key == "bench_m") bench_m = parse_list<int>(value);
  else if (key == "bench_ell") bench_ell = parse_list<Index>(value);
  else if (key == "repeats") repeats = std::stoi(value);
  else if (key == "subdomain_ids") subdomain_ids = parse_list<int>(value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline std::string RunConfig::serialize() const {
  std::ostringstream o;
  o << std::setprecision(17);
  o << "experiment = " << experiment << "\n";
  o << "dim = " << dim << "\n";
  o << "mesh = " << detail::join(mesh_cells) << "\n";
  o << "subdomains = " << detail::join(subdomains) << "\n";
  o << "overlap = " << overlap << "\n";
  o << "ell = " << ell << "\n";
  o << "variant = " << variant << "\n";
  o << "coefficient = " << coefficient << "\n";
  o << "contrast = " << contrast << "\n";
  o << "contrasts = " << detail::join(contrasts) << "\n";
  o << "block_size = " << block_size << "\n";
  if (!coeff_file.empty()) o << "coeff_file = " << coeff_file << "\n";
  o << "channel_column = " << channel_column << "\n";
  o << "channel_bar_row = " << channel_bar_row << "\n";
  o << "n = " << n << "\n";
  o << "n_min = " << n_min << "\n";
  o << "n_max = " << n_max << "\n";
  o << "ells = " << detail::join(ells) << "\n";
  o << "nev = " << nev << "\n";
  o << "solver = " << solver << "\n";
  o << "tol = " << tol << "\n";
  o << "maxit = " << maxit << "\n";
  o << "seed = " << seed << "\n";
  o << "jobs = " << jobs << "\n";
  o << "out = " << out << "\n";
  o << "source = " << source << "\n";
  o << "backend = " << backend << "\n";
  o << "bench_m = " << detail::join(bench_m) << "\n";
  o << "bench_ell = " << detail::join(bench_ell) << "\n";
  o << "repeats = " << repeats << "\n";
  if (!subdomain_ids.empty())
    o << "subdomain_ids = " << detail::join(subdomain_ids) << "\n";
  return o.str();
}

inline RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  RunConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto eq = line.find('=');
    auto trim = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    if (eq == std::string::npos) {
      if (!trim(line).empty())
        throw std::runtime_error("config: bad line " + std::to_string(lineno));
      continue;
    }
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

/// Everything assembled for one (mesh, coefficient, decomposition) setup.
struct Setup {
  Mesh mesh;
  FineProblem prob;
  Decomposition decomp;
  PartitionOfUnity pu;
};

inline CoefficientField make_coefficient(const RunConfig& c, const Mesh& mesh,
                                         double contrast) {
  if (c.coefficient == "constant") return constant_field(mesh, 1.0);
  if (c.coefficient == "skyscraper")
    return skyscraper_field(mesh, c.seed, c.block_size, contrast);
  if (c.coefficient == "channel") {
    ChannelGeometry g;
    g.subdomains_x = c.subdomains[0];
    g.subdomains_y = c.subdomains.size() > 1 ? c.subdomains[1] : 1;
    g.column = c.channel_column;
    g.bar_row = c.channel_bar_row;
    return channel_field(mesh, std::log10(contrast), g);
  }
  if (c.coefficient == "file") return load_field(mesh, c.coeff_file);
  throw std::invalid_argument("config: unknown coefficient '" + c.coefficient +
                              "'");
}

inline Setup make_setup(const RunConfig& c, double contrast, Index ell) {
  Setup s;
  s.mesh = build_mesh(c.dim, c.mesh_cells);
  CoefficientField coeff = make_coefficient(c, s.mesh, contrast);
  Eigen::VectorXd f =
      Eigen::VectorXd::Constant(s.mesh.cell_count(), c.source);
  s.prob = build_problem(s.mesh, std::move(coeff), f);
  s.decomp = build_decomposition(s.mesh, c.subdomains, c.overlap, ell);
  s.pu = build_partition_of_unity(s.mesh, s.decomp);
  return s;
}

inline EigOptions eig_options(const RunConfig& c, int nev) {
  EigOptions o;
  o.nev = nev;
  o.seed = c.seed;
  o.backend = c.backend == "dense" ? EigBackend::kDenseSchur
                                   : EigBackend::kSaddleShiftInvert;
  return o;
}

inline std::vector<LocalSpectrum> eigensolve_all(const Setup& s,
                                                 Variant variant,
                                                 const EigOptions& opt,
                                                 int jobs) {
  std::vector<LocalSpectrum> out(s.decomp.size());
  parallel_for(s.decomp.size(), jobs, [&](int i) {
    out[i] = eigensolve(s.mesh, s.prob.coeff, s.decomp, s.pu, i, variant, opt);
  });
  return out;
}

/// Count spectral-gap-separated leading modes: kernel modes are skipped, then
/// the number of inverse eigenvalues before the first consecutive drop by
/// more than `ratio`.
inline int count_large_modes(const Eigen::VectorXd& lambda,
                             double ratio = 100.0) {
  double lmax = lambda.maxCoeff();
  std::vector<double> inv;
  for (Index k = 0; k < lambda.size(); ++k)
    if (lambda[k] > 1e-12 * std::max(lmax, 1e-300))
      inv.push_back(1.0 / lambda[k]);
  std::sort(inv.rbegin(), inv.rend());
  for (size_t i = 0; i + 1 < inv.size(); ++i)
    if (inv[i] / inv[i + 1] > ratio) return (int)(i + 1);
  return 0;
}

inline std::vector<Variant> variants_of(const RunConfig& c) {
  if (c.variant == "full") return {Variant::kFull};
  if (c.variant == "ring") return {Variant::kRing};
  if (c.variant == "both") return {Variant::kFull, Variant::kRing};
  throw std::invalid_argument("config: unknown variant '" + c.variant + "'");
}

namespace detail {

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << content;
}

inline std::string fmt(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

}  // namespace detail

inline nlohmann::json decomposition_to_json(const Mesh& mesh,
                                            const Decomposition& d) {
  nlohmann::json j;
  j["grid"] = std::vector<int>(d.grid.begin(), d.grid.begin() + mesh.dim);
  j["overlap"] = d.overlap;
  j["ell"] = d.ell;
  j["kappa"] = d.kappa;
  j["kappa_star"] = d.kappa_star;
  auto boxj = [&](const Box& b) {
    nlohmann::json o;
    o["lo"] = std::vector<Index>(b.lo.begin(), b.lo.begin() + mesh.dim);
    o["hi"] = std::vector<Index>(b.hi.begin(), b.hi.begin() + mesh.dim);
    return o;
  };
  for (const auto& s : d.subdomains) {
    nlohmann::json o;
    o["brick"] = boxj(s.brick);
    o["omega"] = boxj(s.omega);
    o["omega_star"] = boxj(s.omega_star);
    o["omega_tilde"] = boxj(s.omega_tilde);
    o["boundary"] = s.boundary;
    o["ring_degenerate"] = s.ring_degenerate;
    o["ring_cells"] = s.ring_cells.size();
    o["ring_star_cells"] = s.ring_star_cells.size();
    o["delta"] = s.delta;
    o["h_star"] = s.h_star;
    j["subdomains"].push_back(o);
  }
  return j;
}

struct RunResult {
  nlohmann::json manifest;
  std::filesystem::path out_dir;
};

inline RunResult start_run(const RunConfig& c) {
  RunResult r;
  r.out_dir = c.out;
  std::filesystem::create_directories(r.out_dir);
  r.manifest["config"] = nlohmann::json::object();
  std::istringstream cfg(c.serialize());
  std::string line;
  while (std::getline(cfg, line)) {
    auto eq = line.find(" = ");
    r.manifest["config"][line.substr(0, eq)] = line.substr(eq + 3);
  }
  return r;
}

inline void finish_run(RunResult& r, double seconds) {
  r.manifest["wall_seconds"] = seconds;
  detail::write_file(r.out_dir / "run.json", r.manifest.dump(2) + "\n");
}

/// experiment = solve: one multiscale solve per variant, error against the
/// fine solution, solution vectors and decomposition dumped to disk.
inline RunResult run_solve(const RunConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  RunResult r = start_run(c);
  Setup s = make_setup(c, c.contrast, c.ell);
  r.manifest["decomposition"] = decomposition_to_json(s.mesh, s.decomp);
  Eigen::VectorXd u_ref = solve_fine(s.prob);
  ParticularSolution part = build_particular(s.prob, s.decomp, s.pu);
  save_vector_csv(part.u_p, (r.out_dir / "u_p.csv").string());
  for (Variant v : variants_of(c)) {
    auto spectra = eigensolve_all(s, v, eig_options(c, c.n), c.jobs);
    std::vector<int> nvec(s.decomp.size());
    for (int i = 0; i < s.decomp.size(); ++i)
      nvec[i] = (int)spectra[i].lambda.size();
    CoarseSpace cs = build_coarse_space(s.prob, s.decomp, s.pu, spectra, nvec);
    GfemSolution sol = coarse_solve(s.prob, cs, part.u_p);
    double err = relative_energy_error(s.prob, u_ref, sol.u_G);
    std::string name = variant_name(v);
    save_vector_csv(sol.u_G, (r.out_dir / ("u_G_" + name + ".csv")).string());
    r.manifest[name]["relative_energy_error"] = err;
    r.manifest[name]["coarse_dim"] = cs.dim();
    r.manifest[name]["dropped_columns"] = cs.dropped.size();
  }
  finish_run(r, std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count());
  return r;
}

/// experiment = decay: relative energy error against n (and oversampling ell),
/// one CSV row per (variant, n, ell).
inline RunResult run_decay(const RunConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  RunResult r = start_run(c);
  std::ostringstream csv;
  csv << "variant,n,ell,coarse_dim,relative_energy_error\n";
  for (Index ell : c.ells) {
    Setup s = make_setup(c, c.contrast, ell);
    Eigen::VectorXd u_ref = solve_fine(s.prob);
    ParticularSolution part = build_particular(s.prob, s.decomp, s.pu);
    for (Variant v : variants_of(c)) {
      auto spectra = eigensolve_all(s, v, eig_options(c, c.n_max), c.jobs);
      for (int n = c.n_min; n <= c.n_max; ++n) {
        std::vector<int> nvec(s.decomp.size());
        for (int i = 0; i < s.decomp.size(); ++i)
          nvec[i] = std::min<int>(n, (int)spectra[i].lambda.size());
        CoarseSpace cs =
            build_coarse_space(s.prob, s.decomp, s.pu, spectra, nvec);
        GfemSolution sol = coarse_solve(s.prob, cs, part.u_p);
        double err = relative_energy_error(s.prob, u_ref, sol.u_G);
        csv << variant_name(v) << "," << n << "," << ell << "," << cs.dim()
            << "," << detail::fmt(err) << "\n";
      }
    }
  }
  detail::write_file(r.out_dir / "decay.csv", csv.str());
  finish_run(r, std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count());
  return r;
}

/// experiment = iterate: iteration counts to reach the solver tolerance, one
/// CSV per (variant, solver); rows are contrasts, columns n = 1..c.n.
/// Non-converged runs are reported as "inf".
inline RunResult run_iterate(const RunConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  RunResult r = start_run(c);
  std::vector<std::string> solvers;
  if (c.solver == "both") solvers = {"richardson", "gmres"};
  else solvers = {c.solver};
  std::map<std::string, std::ostringstream> tables;
  for (Variant v : variants_of(c))
    for (const std::string& sv : solvers) {
      auto& t = tables[variant_name(v) + "_" + sv];
      t << "contrast";
      for (int n = 1; n <= c.n; ++n) t << ",n" << n;
      t << "\n";
    }
  for (double contrast : c.contrasts) {
    Setup s = make_setup(c, contrast, c.ell);
    for (Variant v : variants_of(c)) {
      auto spectra = eigensolve_all(s, v, eig_options(c, c.n), c.jobs);
      for (const std::string& sv : solvers)
        tables[variant_name(v) + "_" + sv] << detail::fmt(contrast);
      for (int n = 1; n <= c.n; ++n) {
        std::vector<int> nvec(s.decomp.size());
        for (int i = 0; i < s.decomp.size(); ++i)
          nvec[i] = std::min<int>(n, (int)spectra[i].lambda.size());
        CoarseSpace cs =
            build_coarse_space(s.prob, s.decomp, s.pu, spectra, nvec);
        TwoLevelPreconditioner B(s.prob, s.decomp, s.pu, cs);
        for (const std::string& sv : solvers) {
          SolveReport rep = sv == "richardson"
                                ? richardson(s.prob, B, c.tol, c.maxit)
                                : gmres(s.prob, B, c.tol, c.maxit);
          auto& t = tables[variant_name(v) + "_" + sv];
          if (rep.converged)
            t << "," << rep.iterations;
          else
            t << ",inf";
        }
      }
      for (const std::string& sv : solvers)
        tables[variant_name(v) + "_" + sv] << "\n";
    }
  }
  for (auto& [name, t] : tables)
    detail::write_file(r.out_dir / ("iterations_" + name + ".csv"), t.str());
  finish_run(r, std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count());
  return r;
}

/// experiment = spectrum: local eigenvalues for selected subdomains and both
/// variants, with the gap-detected number of leading ("large") modes.
inline RunResult run_spectrum(const RunConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  RunResult r = start_run(c);
  Setup s = make_setup(c, c.contrast, c.ell);
  std::vector<int> ids = c.subdomain_ids;
  if (ids.empty())
    for (int i = 0; i < s.decomp.size(); ++i) ids.push_back(i);
  std::ostringstream csv;
  csv << "subdomain,variant,k,lambda,inv_lambda\n";
  for (Variant v : variants_of(c)) {
    std::vector<LocalSpectrum> sp(ids.size());
    parallel_for((int)ids.size(), c.jobs, [&](int j) {
      sp[j] = eigensolve(s.mesh, s.prob.coeff, s.decomp, s.pu, ids[j], v,
                         eig_options(c, c.nev));
    });
    for (size_t j = 0; j < ids.size(); ++j) {
      for (Index k = 0; k < sp[j].lambda.size(); ++k) {
        double l = sp[j].lambda[k];
        csv << ids[j] << "," << variant_name(v) << "," << k + 1 << ","
            << detail::fmt(l) << ","
            << (l > 0 ? detail::fmt(1.0 / l) : "inf") << "\n";
      }
      r.manifest["large_modes"][variant_name(v)]
                [std::to_string(ids[j])] = count_large_modes(sp[j].lambda);
    }
  }
  detail::write_file(r.out_dir / "spectrum.csv", csv.str());
  finish_run(r, std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count());
  return r;
}

/// experiment = bench-fillin: 3D cost comparison of the full and ring local
/// eigensolves on a representative interior subdomain; saddle factorization
/// fill-in and wall time, averaged over repeats.
inline RunResult run_bench_fillin(const RunConfig& c) {
  auto t0 = std::chrono::steady_clock::now();
  RunResult r = start_run(c);
  std::ostringstream csv;
  csv << "m,ell,variant,saddle_n,nnz_total,avg_nnz_per_row,seconds_mean\n";
  for (int m : c.bench_m) {
    RunConfig cc = c;
    cc.dim = 3;
    cc.mesh_cells = {3 * m, 3 * m, 3 * m};
    cc.subdomains = {3, 3, 3};
    cc.overlap = 1;
    cc.coefficient = "skyscraper";
    cc.block_size = m;
    for (Index ell : c.bench_ell) {
      Setup s = make_setup(cc, cc.contrast, ell);
      int center = s.decomp.size() / 2;  // (1,1,1) of the 3x3x3 grid
      for (Variant v : variants_of(c)) {
        EigOptions opt = eig_options(cc, 5);
        double total = 0.0;
        LocalSpectrum sp;
        for (int rep = 0; rep < c.repeats; ++rep) {
          sp = eigensolve(s.mesh, s.prob.coeff, s.decomp, s.pu, center, v,
                          opt);
          total += sp.solve_seconds;
        }
        csv << m << "," << ell << "," << variant_name(v) << ","
            << sp.factor_stats.n << ","
            << sp.factor_stats.nnz_L + sp.factor_stats.nnz_U << ","
            << detail::fmt(sp.factor_stats.avg_per_row()) << ","
            << detail::fmt(total / c.repeats) << "\n";
      }
    }
  }
  detail::write_file(r.out_dir / "bench_fillin.csv", csv.str());
  finish_run(r, std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count());
  return r;
}

inline RunResult run_experiment(const RunConfig& c) {
  if (c.experiment == "solve") return run_solve(c);
  if (c.experiment == "decay") return run_decay(c);
  if (c.experiment == "iterate") return run_iterate(c);
  if (c.experiment == "spectrum") return run_spectrum(c);
  if (c.experiment == "bench-fillin") return run_bench_fillin(c);
  throw std::invalid_argument("unknown experiment '" + c.experiment + "'");
}

}  // namespace msgfem
