// Acceptance run: one PASS/FAIL line per criterion.
// Usage: mflab_acceptance --cli <path to mflab> [--only N]

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "mflab/verifier.hpp"

namespace fs = std::filesystem;
using namespace mflab;

namespace {

// Runtime limits in seconds, one per criterion.
constexpr double kLimitGreen = 60, kLimitSaw = 120, kLimitPerc = 180, kLimitIsing = 60, kLimitLt = 120,
                 kLimitRw = 300, kLimitScaling = 600, kLimitGammaNu = 60, kLimitAppendix = 120;

struct Outcome {
  bool pass = false;
  std::string note;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Suite passes, has at least `min_checks` entries, and finishes in time.
Outcome suite_outcome(const std::string& suite, const RunConfig& cfg, double limit, std::size_t min_checks,
                      const std::function<bool(const SuiteResult&, std::string&)>& extra = {}) {
  SuiteResult r = run_suite(suite, cfg);
  std::ostringstream note;
  std::size_t failed = 0;
  std::string first_fail;
  for (const auto& e : r.entries) {
    if (!e.report.pass) {
      if (failed++ == 0) first_fail = e.report.name + " worst=" + fmt(e.report.worst_residual) + " at " + e.report.worst_location;
    }
  }
  note << r.entries.size() << " checks, " << failed << " failed, " << fmt(r.seconds) << " s (limit " << limit << " s)";
  if (!first_fail.empty()) note << "; first failure: " << first_fail;
  for (const auto& [s, msg] : r.failures) note << "; error in " << s << ": " << msg;
  bool ok = r.pass() && r.entries.size() >= min_checks && r.seconds < limit;
  if (r.entries.size() < min_checks) note << "; expected at least " << min_checks << " checks";
  if (extra) {
    std::string more;
    ok = extra(r, more) && ok;
    if (!more.empty()) note << "; " << more;
  }
  return {ok, note.str()};
}

const InequalityReport* find(const SuiteResult& r, const std::string& op) {
  for (const auto& e : r.entries)
    if (e.operation == op) return &e.report;
  return nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) cli = argv[++i];
    else if (a == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
  }
  RunConfig cfg = parse_run_config({{"schema", 1}});

  int failures = 0;
  auto report = [&](int n, const std::string& title, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << title << "): " << o.note << std::endl;
    if (!o.pass) ++failures;
  };
  auto want = [&](int n) { return only == 0 || only == n; };

  if (want(1))
    report(1, "Green identities",
           suite_outcome("green-identities", cfg, kLimitGreen, 16, [](const SuiteResult& r, std::string& note) {
             std::size_t ids = 0, moments = 0;
             for (const auto& e : r.entries) {
               ids += e.operation == "green_identity_check";
               moments += e.operation == "green_observables";
             }
             note = std::to_string(ids) + " identity reports, " + std::to_string(moments) + " moment reports";
             return ids == 12 && moments == 4;
           }));
  if (want(2))
    report(2, "SAW inequalities, exact",
           suite_outcome("saw", cfg, kLimitSaw, 4 * 8, [](const SuiteResult& r, std::string& note) {
             bool exact = true;
             for (const auto& e : r.entries)
               if (e.operation.rfind("check_I", 0) == 0) exact = exact && e.report.tolerance == 0.0;
             note = exact ? "tolerance 0 throughout" : "nonzero tolerance found";
             return exact;
           }));
  if (want(3)) report(3, "percolation oracle", suite_outcome("percolation", cfg, kLimitPerc, 8));
  if (want(4)) report(4, "Ising oracle", suite_outcome("ising", cfg, kLimitIsing, 9));
  if (want(5)) report(5, "lattice trees", suite_outcome("lattice-trees", cfg, kLimitLt, 9));
  if (want(6))
    report(6, "effective-walk regularity and anti-concentration",
           suite_outcome("effective-rw", cfg, kLimitRw, 2, [](const SuiteResult& r, std::string& note) {
             const InequalityReport* occ = find(r, "occupancy_scaling_check");
             if (!occ) return false;
             note = "occupancy ratio " + fmt(occ->details.value("ratio", -1.0));
             return true;
           }));
  if (want(7))
    report(7, "sigma scaling of the bubble", suite_outcome("scaling", cfg, kLimitScaling, 1, [](const SuiteResult& r, std::string& note) {
             const InequalityReport* s = find(r, "sigma_scaling_scan");
             if (!s) return false;
             note = "slope " + fmt(s->details.value("slope", 0.0)) + " in [-6, -4]";
             return true;
           }));
  if (want(8)) report(8, "gamma/nu sandwich on the Green model", suite_outcome("gamma-nu", cfg, kLimitGammaNu, 4));
  if (want(9))
    report(9, "appendix convolution lemmas",
           suite_outcome("appendix-b", cfg, kLimitAppendix, 2, [&](const SuiteResult& r, std::string& note) {
             bool ok = true;
             for (const auto& e : r.entries) ok = ok && e.params.value("draws", 0) == 50;
             note = "50 draws per lemma";
             return ok;
           }));
  if (want(10)) {
    Outcome o;
    if (cli.empty()) {
      o.note = "no --cli given";
    } else {
      fs::path a = fs::current_path() / "acceptance_run_a", b = fs::current_path() / "acceptance_run_b";
      fs::remove_all(a);
      fs::remove_all(b);
      auto run = [&](const fs::path& out) {
        std::string cmd = "\"" + cli + "\" verify --suite all --seed 20240101 --out \"" + out.string() + "\" > \"" +
                          (out.string() + ".log") + "\" 2>&1";
        return std::system(cmd.c_str());
      };
      int ra = run(a), rb = run(b);
      std::string ma = read_file(a / "MANIFEST"), mb = read_file(b / "MANIFEST");
      std::size_t lines = 0;
      for (char c : ma) lines += c == '\n';
      o.pass = !ma.empty() && ma == mb && lines > 2;
      o.note = "exit " + std::to_string(ra) + "/" + std::to_string(rb) + ", " + std::to_string(lines - 2) +
               " files, MANIFESTs " + (ma == mb ? "identical" : "differ");
    }
    report(10, "reproducibility", o);
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << failures << " criteria failed" << std::endl;
  return failures ? 1 : 0;
}
