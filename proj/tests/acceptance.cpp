// Runs every acceptance criterion and prints one PASS/FAIL line per criterion,
// also written to <scratch dir>/report.txt.
//   acceptance <standard config> <determinism config> <scratch dir>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "halfline/cli.hpp"
#include "halfline/config.hpp"
#include "halfline/verify.hpp"

namespace fs = std::filesystem;
using namespace halfline;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string describe(const CriterionResult& r) {
  std::ostringstream os;
  os << std::setprecision(6);
  for (std::size_t k = 0; k < r.checks.size(); ++k) {
    const CheckResult& c = r.checks[k];
    if (k) os << "; ";
    os << c.name << " = " << c.measured << " " << c.relation << " " << c.bound;
  }
  os << std::setprecision(3) << " (" << r.seconds << " s)";
  return os.str();
}

// One `verify all` run under its own root; returns the manifest text.
std::string verify_manifest(const std::string& config, const fs::path& root) {
  fs::remove_all(root);
  const std::string root_str = root.string();
  const char* argv[] = {"halfline_cli", "verify", "all", "--config", config.c_str(), "--out", root_str.c_str()};
  std::ostringstream out, err;
  run_cli(7, argv, out, err);
  for (const auto& entry : fs::directory_iterator(root))
    if (fs::exists(entry.path() / "manifest.json")) return slurp(entry.path() / "manifest.json");
  throw std::runtime_error("no manifest under " + root_str + ": " + err.str());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: acceptance <standard config> <determinism config> <scratch dir>\n";
    return 2;
  }
  bool all = true;
  const fs::path scratch = argv[3];
  fs::create_directories(scratch);
  std::ofstream report(scratch / "report.txt");
  auto line = [&](const std::string& text) {
    std::cout << text << std::endl;
    report << text << "\n";
  };
  try {
    VerifyContext ctx(load_config(argv[1]));
    for (int id : suite_criteria(Suite::All)) {
      const CriterionResult r = run_criterion(id, ctx);
      all = all && r.pass();
      line(std::string(r.pass() ? "PASS" : "FAIL") + " C" + std::to_string(id) + " " + r.name + ": " + describe(r));
    }
    const std::string first = verify_manifest(argv[2], scratch / "first");
    const std::string second = verify_manifest(argv[2], scratch / "second");
    const bool same = first == second;
    all = all && same;
    line(std::string(same ? "PASS" : "FAIL") + " C12 " + criterion_name(12) + ": manifests of two `verify all` runs are " +
         (same ? "byte-identical" : "different") + " (" + std::to_string(first.size()) + " bytes)");
  } catch (const std::exception& e) {
    line(std::string("FAIL acceptance aborted: ") + e.what());
    return 3;
  }
  return all ? 0 : 1;
}
