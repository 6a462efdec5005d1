// mflab: command-line front end.
// Exit status: 0 pass, 1 a check failed, 2 bad arguments or config.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mflab/effective_rw.hpp"
#include "mflab/green.hpp"
#include "mflab/parallel.hpp"
#include "mflab/verifier.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mflab;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitConfig = 2;

json ival(const Interval& v) { return {{"lo", v.lo}, {"hi", v.hi}, {"est", v.est}}; }

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream o;
  for (unsigned i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return o.str();
}

// Collects files of an artifact tree and writes them plus the MANIFEST.
class Artifacts {
 public:
  explicit Artifacts(fs::path root) : root_(std::move(root)) {}

  void add(const std::string& rel, const std::string& content, json provenance) {
    fs::path p = root_ / rel;
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + p.string());
    files_.push_back({rel, sha256_hex(content), content.size(), std::move(provenance)});
  }

  // One line per file: sha256, bytes, path, provenance (compact JSON).
  void write_manifest() {
    std::sort(files_.begin(), files_.end(), [](const File& a, const File& b) { return a.path < b.path; });
    std::ostringstream m;
    m << "# mflab artifact manifest v1\n# sha256\tbytes\tpath\tprovenance\n";
    for (const auto& f : files_) m << f.hash << "\t" << f.bytes << "\t" << f.path << "\t" << f.provenance.dump() << "\n";
    fs::create_directories(root_);
    std::ofstream out(root_ / "MANIFEST", std::ios::binary);
    out << m.str();
    if (!out) throw std::runtime_error("cannot write MANIFEST");
  }

  std::size_t size() const { return files_.size(); }

 private:
  struct File {
    std::string path, hash;
    std::size_t bytes;
    json provenance;
  };
  fs::path root_;
  std::vector<File> files_;
};

std::string slug(const std::string& s) {
  std::string o;
  for (char c : s) o += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return o;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) o += (c == '"' ? std::string("\"\"") : std::string(1, c));
  return o + "\"";
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_verify(RunConfig cfg, const std::string& suite, const std::string& out_dir) {
  if (cfg.workers > 0) set_default_workers(cfg.workers);
  SuiteResult res = run_suite(suite, cfg);

  Artifacts art(out_dir);
  if (suite != "none") {
    json conf = cfg.raw;
    conf["suite"] = suite;
    conf["seed"] = cfg.seed;
    art.add("config.json", conf.dump(2) + "\n", {{"module", "cli"}, {"operation", "run"}, {"parameters", {{"suite", suite}}}});

    std::ostringstream summary;
    summary << "file,suite,module,operation,name,pass,worst_residual,tolerance,vacuous,certified,checked,worst_location\n";
    std::map<std::string, int> counter;
    for (const auto& e : res.entries) {
      std::string s = e.params.value("suite", suite);
      int k = counter[s]++;
      char idx[16];
      std::snprintf(idx, sizeof idx, "%03d", k);
      std::string rel = "reports/" + s + "/" + idx + "_" + slug(e.report.name) + ".json";
      json prov = {{"module", e.module}, {"operation", e.operation}, {"parameters", e.params}};
      json doc = {{"report", e.report.to_json()}, {"provenance", prov}};
      art.add(rel, doc.dump(2) + "\n", prov);
      const auto& r = e.report;
      summary << rel << "," << s << "," << e.module << "," << e.operation << "," << csv_field(r.name) << ","
              << (r.pass ? 1 : 0) << "," << num(r.worst_residual) << "," << num(r.tolerance) << ","
              << (r.vacuous ? 1 : 0) << "," << (r.certified ? 1 : 0) << "," << r.checked << ","
              << csv_field(r.worst_location) << "\n";
    }
    art.add("summary.csv", summary.str(), {{"module", "verifier"}, {"operation", "run_suite"}, {"parameters", {{"suite", suite}}}});
    for (const auto& [name, content] : res.csv_tables) {
      json prov = res.table_provenance.contains(name) ? res.table_provenance.at(name) : json::object();
      art.add("tables/" + name, content, prov);
    }
    if (!res.failures.empty()) {
      json f = json::array();
      for (const auto& [s, msg] : res.failures) f.push_back({{"suite", s}, {"error", msg}});
      art.add("failures.json", f.dump(2) + "\n", {{"module", "cli"}, {"operation", "run"}, {"parameters", {{"suite", suite}}}});
    }
  }
  art.write_manifest();

  std::size_t failed = 0;
  for (const auto& e : res.entries) {
    if (!e.report.pass) {
      ++failed;
      std::cerr << "FAIL " << e.params.value("suite", suite) << " " << e.report.name << " worst="
                << e.report.worst_residual << " at " << e.report.worst_location << "\n";
    }
  }
  for (const auto& [s, msg] : res.failures) std::cerr << "ERROR " << s << ": " << msg << "\n";
  std::cout << "suite " << suite << ": " << res.entries.size() << " checks, " << failed << " failed, "
            << res.failures.size() << " errors; " << art.size() << " files in " << out_dir << " ("
            << std::fixed << std::setprecision(1) << res.seconds << " s)" << std::endl;
  return res.pass() ? kExitPass : kExitFail;
}

AdmissibleKernel kernel_from(const std::string& family, int d, int R) {
  return make_kernel(family, d, family == "nn" ? 1 : R);
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mflab: mean-field bounds laboratory"};
  app.require_subcommand(1);
  unsigned workers = 0;
  app.add_option("--workers", workers, "worker threads (default: MFLAB_WORKERS, else hardware)");

  // green
  auto* green = app.add_subcommand("green", "Green function of the J-walk");
  int g_d = 3, g_R = 1;
  std::string g_kernel = "nn";
  double g_beta = 0.5, g_eps = 1e-10;
  std::string g_field;
  green->add_option("--d", g_d)->check(CLI::Range(1, 8));
  green->add_option("--kernel", g_kernel)->check(CLI::IsMember({"nn", "spread_out"}));
  green->add_option("--R", g_R)->check(CLI::Range(1, 16));
  green->add_option("--beta", g_beta);
  green->add_option("--tail-eps", g_eps);
  green->add_option("--field-csv", g_field, "write the field as long-format CSV");

  // rw
  auto* rw = app.add_subcommand("rw", "regularity certificate and anti-concentration of the J-walk");
  int r_d = 3, r_R = 1;
  std::string r_kernel = "nn";
  std::vector<int> r_m = {4, 16, 64};
  std::uint64_t r_trials = 100000, r_seed = 20240101;
  rw->add_option("--d", r_d)->check(CLI::Range(1, 8));
  rw->add_option("--kernel", r_kernel)->check(CLI::IsMember({"nn", "spread_out"}));
  rw->add_option("--R", r_R)->check(CLI::Range(1, 16));
  rw->add_option("--m", r_m)->check(CLI::Range(1, 100000));
  rw->add_option("--trials", r_trials);
  rw->add_option("--seed", r_seed);

  // saw
  auto* saw = app.add_subcommand("saw", "weakly self-avoiding walk series");
  int s_d = 2, s_R = 1, s_N = 8;
  std::string s_kernel = "nn", s_lambda = "1/2";
  std::vector<std::string> s_betas = {"1/10", "1/4"};
  saw->add_option("--d", s_d)->check(CLI::Range(1, 8));
  saw->add_option("--kernel", s_kernel)->check(CLI::IsMember({"nn", "spread_out"}));
  saw->add_option("--R", s_R)->check(CLI::Range(1, 8));
  saw->add_option("--N", s_N)->check(CLI::Range(1, 20));
  saw->add_option("--lambda", s_lambda, "rational in [0, 1]");
  saw->add_option("--beta", s_betas, "rational betas for the I.2 check (pairs of neighbours for I.1)");

  // perc
  auto* perc = app.add_subcommand("perc", "bond percolation on a small graph: exact and Monte Carlo");
  std::string p_graph = "triangle", p_kernel = "nn";
  int p_d = 1, p_R = 1, p_L = 4;
  double p_beta = 0.5;
  std::uint64_t p_trials = 100000, p_seed = 20240101;
  perc->add_option("--graph", p_graph)->check(CLI::IsMember({"triangle", "edge", "torus", "patch"}));
  perc->add_option("--kernel", p_kernel)->check(CLI::IsMember({"nn", "spread_out"}));
  perc->add_option("--d", p_d)->check(CLI::Range(1, 4));
  perc->add_option("--R", p_R)->check(CLI::Range(1, 4));
  perc->add_option("--L", p_L, "torus side or patch side")->check(CLI::Range(1, 64));
  perc->add_option("--beta", p_beta);
  perc->add_option("--trials", p_trials);
  perc->add_option("--seed", p_seed);

  // ising
  auto* ising = app.add_subcommand("ising", "Ising two-point function by exact enumeration");
  int i_d = 1;
  std::string i_shape = "6";
  double i_beta = 0.5;
  ising->add_option("--d", i_d)->check(CLI::Range(1, 3));
  ising->add_option("--shape", i_shape, "e.g. 6, 2x2, 8p");
  ising->add_option("--beta", i_beta);

  // lt
  auto* lt = app.add_subcommand("lt", "lattice tree enumeration");
  int l_d = 1, l_B = 2;
  lt->add_option("--d", l_d)->check(CLI::Range(1, 4));
  lt->add_option("--B", l_B)->check(CLI::Range(1, 10));

  // observe
  auto* observe = app.add_subcommand("observe", "observables on a beta grid (long-format CSV)");
  std::string o_model = "green", o_config, o_out;
  int o_points = 16;
  double o_end = -1.0;
  observe->add_option("--model", o_model)->check(CLI::IsMember({"green", "saw", "perc", "ising", "lt"}));
  observe->add_option("--config", o_config, "JSON run config with model sections");
  observe->add_option("--points", o_points)->check(CLI::Range(2, 1024));
  observe->add_option("--beta-end", o_end, "grid end (default: the model section's)");
  observe->add_option("--out", o_out, "CSV file (default stdout)");

  // verify
  auto* verify = app.add_subcommand("verify", "run a check suite and write the artifact tree");
  std::string v_suite, v_config, v_out = "mflab-out";
  std::uint64_t v_seed = 0;
  bool v_seed_set = false;
  verify->add_option("--suite", v_suite, "none, all, or one of: " + [] {
    std::string s;
    for (const auto& n : suite_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }());
  verify->add_option("--config", v_config, "JSON run config");
  verify->add_option("--out", v_out, "output directory");
  verify->add_option("--seed", v_seed)->each([&](const std::string&) { v_seed_set = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (workers > 0) set_default_workers(workers);

    if (*green) {
      AdmissibleKernel J = kernel_from(g_kernel, g_d, g_R);
      if (!(g_beta >= 0.0 && g_beta < 1.0)) throw ConfigError("green.beta", "must lie in [0, 1)");
      int order = order_for_tail(g_beta, g_eps);
      int radius = green_radius_for(J, g_beta, g_eps);
      GreenField G = green_function(J, g_beta, order, radius);
      json out = {{"kernel", J.name()},  {"sigma_sq", J.sigma_sq},        {"beta", g_beta},
                  {"order", order},      {"radius", radius},            {"truncation_error", G.truncation_error},
                  {"chi", ival(G.chi)},  {"xi_sq", ival(G.xi_sq)},      {"G0", G.field.values[G.field.index_of(Point(g_d, 0))]}};
      if (g_d > 2) {
        OriginDiagrams od = green_origin_diagrams(J, g_beta);
        out["origin"] = {{"bubble", od.bubble}, {"bubble_err", od.bubble_err}, {"triangle", od.triangle},
                         {"triangle_err", od.triangle_err}, {"square", od.square}, {"square_err", od.square_err}};
      }
      print(out);
      if (!g_field.empty()) {
        std::ofstream f(g_field);
        f << "beta,x,value\n";
        G.field.for_each([&](std::size_t i, const int* x) {
          std::string xs;
          for (int k = 0; k < g_d; ++k) xs += (k ? " " : "") + std::to_string(x[k]);
          f << num(g_beta) << "," << xs << "," << num(G.field.values[i]) << "\n";
        });
      }
      return kExitPass;
    }

    if (*rw) {
      AdmissibleKernel J = kernel_from(r_kernel, r_d, r_R);
      StepDistribution step = step_from_kernel(J);
      json out = {{"kernel", J.name()}};
      InequalityReport reg = jwalk_regularity_check({J});
      out["regularity"] = reg.to_json();
      try {
        out["certificate"] = certify_regular(step).to_json();
      } catch (const CertificateNotFound& e) {
        out["certificate"] = e.what();
      }
      InequalityReport occ = occupancy_scaling_check(step, r_m, r_trials, r_seed, 2.5);
      out["occupancy"] = occ.to_json();
      print(out);
      return reg.pass && occ.pass ? kExitPass : kExitFail;
    }

    if (*saw) {
      AdmissibleKernel J = kernel_from(s_kernel, s_d, s_R);
      Rational lam;
      try {
        lam = parse_rational(s_lambda);
      } catch (const std::exception&) {
        throw ConfigError("saw.lambda", "not a rational number");
      }
      if (lam < 0 || lam > 1) throw ConfigError("saw.lambda", "must lie in [0, 1]");
      std::vector<Rational> betas;
      for (std::size_t i = 0; i < s_betas.size(); ++i) {
        try {
          betas.push_back(parse_rational(s_betas[i]));
        } catch (const std::exception&) {
          throw ConfigError("saw.beta[" + std::to_string(i) + "]", "not a rational number");
        }
        if (betas.back() < 0) throw ConfigError("saw.beta[" + std::to_string(i) + "]", "must be >= 0");
      }
      std::sort(betas.begin(), betas.end());
      SawSeries s = saw_enumerate(J, lam, s_N);
      json totals = json::array();
      for (int n = 0; n <= s.N; ++n) totals.push_back(to_string(s.total(n)));
      CriticalEstimate ce = saw_critical(s);
      std::vector<InequalityReport> checks;
      for (std::size_t i = 0; i < betas.size(); ++i) {
        checks.push_back(saw_check_I2(s, betas[i]));
        if (i + 1 < betas.size()) checks.push_back(saw_check_I1(s, betas[i], betas[i + 1]));
      }
      checks.push_back(saw_submultiplicativity(s));
      json reps = json::array();
      bool ok = true;
      for (const auto& r : checks) {
        reps.push_back(r.to_json());
        ok = ok && r.pass;
      }
      print({{"kernel", J.name()},
             {"lambda", to_string(lam)},
             {"N", s.N},
             {"nodes", s.nodes},
             {"totals", totals},
             {"beta_c_lower", ce.beta_c_lower},
             {"beta_c_ratio", ce.beta_c_ratio},
             {"checks", reps}});
      return ok ? kExitPass : kExitFail;
    }

    if (*perc) {
      PercGraph g;
      if (p_graph == "edge") {
        g = single_edge_graph();
      } else if (p_graph == "triangle") {
        g.name = "triangle";
        g.n = 3;
        g.edges = {{0, 1}, {1, 2}, {0, 2}};
        g.J = {Rational(1), Rational(1), Rational(1)};
      } else if (p_graph == "torus") {
        g = torus_graph(kernel_from(p_kernel, p_d, p_R), p_L);
      } else {
        g = patch_graph(kernel_from(p_kernel, p_d, p_R), p_L);
      }
      if (!(p_beta >= 0.0 && p_beta <= g.max_beta()))
        throw ConfigError("perc.beta", "must lie in [0, " + fmt(g.max_beta()) + "]");
      json out = {{"graph", g.name}, {"vertices", g.n}, {"edges", g.edges.size()}, {"beta", p_beta}};
      if (g.edges.size() <= 24) {
        ExactPerc ex = perc_exact(g, false);
        json G = json::array();
        for (int x = 0; x < g.n; ++x) G.push_back(ex.at(0, x).eval(p_beta));
        out["exact_G"] = G;
      }
      out["mc"] = perc_mc(g, p_beta, p_trials, p_seed).to_json(true);
      print(out);
      return kExitPass;
    }

    if (*ising) {
      IsingVolume v = ising_shape(nearest_neighbour(i_d), i_shape);
      if (static_cast<std::size_t>(v.size()) > ising_site_limit())
        throw ConfigError("ising.shape", "more than " + std::to_string(ising_site_limit()) + " sites");
      IsingExact ex = ising_exact(v, false);
      json rows = json::array();
      for (int x = 0; x < v.size(); ++x)
        rows.push_back({{"x", v.sites[x]}, {"G", ex.two_point(0, x, i_beta)}, {"dG", ex.derivative(0, x, i_beta)}});
      print({{"shape", v.name}, {"beta", i_beta}, {"sites", v.size()}, {"two_point", rows}});
      return kExitPass;
    }

    if (*lt) {
      TreeSeries s = lt_enumerate(nearest_neighbour(l_d), l_B);
      json g = json::array(), chi = json::array();
      for (const auto& q : s.g_poly().coeffs) g.push_back(to_string(q));
      for (const auto& q : s.chi_poly().coeffs) chi.push_back(to_string(q));
      InequalityReport dg = lt_check_dg(s);
      print({{"d", l_d}, {"B", l_B}, {"g_p", g}, {"chi_hat", chi}, {"dg_identity", dg.to_json()}});
      return dg.pass ? kExitPass : kExitFail;
    }

    if (*observe) {
      RunConfig cfg = o_config.empty() ? parse_run_config({{"schema", 1}}) : load_run_config(o_config);
      if (cfg.workers > 0 && workers == 0) set_default_workers(cfg.workers);
      ConfiguredModel m = configured_model(o_model, cfg);
      double end = o_end > 0 ? o_end : m.beta_end;
      if (!(end > 0.0 && end <= m.source.beta_max))
        throw ConfigError("beta_end", "must lie in (0, " + fmt(m.source.beta_max) + "]");
      auto rows = observe_grid(m.source, default_beta_grid(end, o_points));
      std::string csv = observables_csv(rows);
      if (o_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream f(o_out);
        f << csv;
      }
      return kExitPass;
    }

    if (*verify) {
      RunConfig cfg;
      if (!v_config.empty()) {
        cfg = load_run_config(v_config);
      } else {
        cfg = parse_run_config({{"schema", 1}});
      }
      if (v_seed_set) cfg.seed = v_seed;
      if (workers > 0) cfg.workers = workers;
      std::string suite = v_suite.empty() ? cfg.suite : v_suite;
      auto names = suite_names();
      if (suite != "all" && suite != "none" && std::find(names.begin(), names.end(), suite) == names.end())
        throw ConfigError("suite", "unknown suite '" + suite + "'");
      std::string out_dir = cfg.out.empty() || verify->count("--out") ? v_out : cfg.out;
      return run_verify(cfg, suite, out_dir);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error at '" << e.field_path << "': " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid argument: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFail;
  }
  return kExitPass;
}
