#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>

#include "phidep/gaussian.hpp"
#include "phidep/grouped.hpp"

using json = nlohmann::json;
using namespace phidep;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  std::string cmd = std::string("\"") + PHIDEP_BIN + "\" " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult r;
  char buf[4096];
  std::size_t k;
  while ((k = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, k);
  int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path work_dir() {
  auto dir = std::filesystem::temp_directory_path() / "phidep_test_cli";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 300 rows, four columns in groups 2,2; rows 101..200 carry much stronger
// cross-group dependence than the flanks.
std::filesystem::path crisis_fixture() {
  auto path = work_dir() / "crisis.csv";
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> nd;
  std::ofstream out(path);
  out << std::setprecision(17);
  out << "date,a1,a2,b1,b2\n";
  for (int i = 0; i < 300; ++i) {
    double cross = (i >= 100 && i < 200) ? 0.9 : 0.1;
    double f = nd(gen);
    double a1 = 1.2 * f + nd(gen), a2 = 1.2 * f + nd(gen);
    double g = cross * f + std::sqrt(1.0 - cross * cross) * nd(gen);
    double b1 = 1.2 * g + nd(gen), b2 = 1.2 * g + nd(gen);
    out << 2020 + i / 324 << "-" << std::setw(2) << std::setfill('0') << 1 + (i / 27) % 12 << "-"
        << std::setw(2) << std::setfill('0') << 1 + i % 27 << std::setfill(' ') << "," << a1 << ","
        << a2 << "," << b1 << "," << b2 << "\n";
  }
  return path;
}

std::filesystem::path bivariate_fixture() {
  auto path = work_dir() / "pair.csv";
  std::mt19937_64 gen(515);
  std::normal_distribution<double> nd;
  std::ofstream out(path);
  out << std::setprecision(17);
  out << "x,y\n";
  for (int i = 0; i < 250; ++i) {
    double a = nd(gen);
    out << a << "," << 0.7 * a + std::sqrt(1.0 - 0.49) * nd(gen) << "\n";
  }
  return path;
}

}  // namespace

TEST_CASE("version and help") {
  CHECK(run("--version").code == 0);
  auto h = run("--help");
  CHECK(h.code == 0);
  CHECK(h.out.find("estimate") != std::string::npos);
  CHECK(run("").code == 2);         // a subcommand is required
  CHECK(run("--nope").code == 2);   // unknown flag
  CHECK(run("frobnicate").code == 2);
}

TEST_CASE("validate") {
  auto fixture = crisis_fixture();
  auto r = run("validate --input " + fixture.string() + " --groups 2,2");
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["ok"] == true);
  CHECK(doc["n"] == 300);
  CHECK(doc["q"] == 4);
  CHECK(doc["row_labels_present"] == true);
  CHECK(doc["tied_columns"].empty());
  CHECK(doc["provenance"]["seed"] == 42);
  CHECK(doc["provenance"]["version"] == "0.1.0");

  CHECK(run("validate --input " + fixture.string() + " --groups 2,3").code == 2);
  CHECK(run("validate --input /nonexistent.csv --groups 2,2").code == 2);
  CHECK(run("validate --input " + fixture.string()).code == 2);  // --groups required

  // Tied cells are reported by column.
  auto tied = work_dir() / "tied.csv";
  std::ofstream(tied) << "p,q\n1.0,2.0\n1.0,3.0\n4.0,5.0\n2.0,7.0\n";
  auto rt = run("validate --input " + tied.string() + " --groups 1,1");
  REQUIRE(rt.code == 0);
  json dt = json::parse(rt.out);
  REQUIRE(dt["tied_columns"].size() == 1);
  CHECK(dt["tied_columns"][0] == "p");
}

TEST_CASE("estimate under the gaussian model matches the library") {
  auto fixture = bivariate_fixture();
  auto r = run("estimate --input " + fixture.string() + " --groups 1,1 --phi mutual-information");
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["model"] == "gaussian");
  CHECK(doc["phi"] == "mutual-information");
  CHECK(doc["estimate"]["method"] == "gaussian-closed-form");

  auto s = load_csv(fixture.string(), GroupStructure::parse("1,1"));
  auto direct = estimate_gaussian(s, PhiFunction{PhiKind::MutualInformation});
  CHECK(doc["estimate"]["value"].get<double>() == doctest::Approx(direct.value).epsilon(1e-15));
  CHECK(doc["estimate"]["sd"].get<double>() == doctest::Approx(direct.sd).epsilon(1e-15));
  CHECK(doc["estimate"]["n"] == 250);
  CHECK(doc["correlation"]["matrix"].size() == 2);
  double r01 = doc["correlation"]["matrix"][0][1].get<double>();
  CHECK(r01 == doctest::Approx(0.7).epsilon(0.15));
}

TEST_CASE("estimate under a fitted copula model") {
  auto fixture = bivariate_fixture();
  auto r = run("estimate --input " + fixture.string() +
               " --groups 1,1 --copula gumbel --phi hellinger --mc-samples 20000");
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["model"] == "gumbel");
  CHECK(doc["estimate"]["estimator_form"] == "hellinger-reduced");
  CHECK(doc["estimate"]["m_used"] == 20000);
  CHECK(doc["fit"]["converged"] == true);
  CHECK(doc["fit"]["parameter_names"][0] == "theta");
  double theta = doc["fit"]["theta_hat"][0].get<double>();
  CHECK(theta > 1.2);
  CHECK(theta < 4.0);
  double value = doc["estimate"]["value"].get<double>();
  CHECK(value > 0.0);
  CHECK(value < 2.0);

  CHECK(run("estimate --input " + fixture.string() + " --groups 1,1 --copula frank").code == 2);
  CHECK(run("estimate --input " + fixture.string() +
            " --groups 1,1 --copula gumbel --phi mutual-information --estimator reduced")
            .code == 2);
}

TEST_CASE("fit reports parameters and optional bootstrap") {
  auto fixture = crisis_fixture();
  auto r = run("fit --input " + fixture.string() +
               " --groups 2,2 --family nested-gumbel --bootstrap 20 --threads 2");
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  CHECK(doc["parameter_names"].size() == 3);
  CHECK(doc["theta_hat"].size() == 3);
  CHECK(doc["converged"] == true);
  CHECK(doc["model_spec"].get<std::string>().find("nested-gumbel") != std::string::npos);
  REQUIRE(doc.contains("bootstrap_V"));
  CHECK(doc["bootstrap_V"].size() == 3);
  CHECK(doc["bootstrap_V"][0][0].get<double>() > 0.0);
}

TEST_CASE("simulate is deterministic and honors the seed chain") {
  auto out1 = work_dir() / "s1.csv";
  auto out2 = work_dir() / "s2.csv";
  std::string base = "simulate --copula \"gumbel(th=2,d=2)\" --m 64 --out ";
  REQUIRE(run(base + out1.string()).code == 0);
  REQUIRE(run(base + out2.string()).code == 0);
  auto text1 = read_file(out1);
  CHECK(text1 == read_file(out2));
  CHECK(text1.substr(0, 6) == "u1,u2\n");

  // Flag, environment variable, and default seeds.
  auto oflag = work_dir() / "s3.csv";
  auto oenv = work_dir() / "s4.csv";
  REQUIRE(run(base + oflag.string() + " --seed 99").code == 0);
  {
    std::string cmd = std::string("PHIDEP_SEED=99 \"") + PHIDEP_BIN + "\" " + base +
                      oenv.string() + " 2>/dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
  }
  CHECK(read_file(oflag) == read_file(oenv));
  CHECK(read_file(oflag) != text1);
  {
    std::string cmd = std::string("PHIDEP_SEED=31 \"") + PHIDEP_BIN + "\" " + base +
                      oenv.string() + " --seed 99 2>/dev/null";
    REQUIRE(std::system(cmd.c_str()) == 0);
  }
  CHECK(read_file(oenv) == read_file(oflag));  // explicit flag beats the environment

  auto norm = run("simulate --copula \"clayton(th=1,d=3)\" --m 8 --scale normal");
  REQUIRE(norm.code == 0);
  CHECK(norm.out.substr(0, 9) == "z1,z2,z3\n");

  CHECK(run("simulate --copula \"gumbel(th=0.2,d=2)\" --m 8").code == 2);
  CHECK(run("simulate --copula \"gumbel(th=2,d=2)\" --m 8 --scale weird").code == 2);
}

TEST_CASE("rolling emits aligned arrays or csv") {
  auto fixture = crisis_fixture();
  auto r = run("rolling --input " + fixture.string() +
               " --groups 2,2 --window 60 --step 30 --phi mutual-information");
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  auto n = doc["labels"].size();
  REQUIRE(n == 9);  // starts 1,31,...,241; the last window absorbs rows to 300
  for (const char* key : {"first_row", "last_row", "values", "normalized_values", "sd", "ci_lo",
                          "ci_hi", "short_window", "singular"}) {
    CHECK(doc[key].size() == n);
  }
  CHECK(doc["first_row"][0] == 1);
  CHECK(doc["last_row"][8] == 300);
  CHECK(doc["labels"][0] == "2020-01-01");
  // Dependence in the crisis windows dwarfs the calm flanks.
  double calm = doc["values"][0].get<double>();
  double crisis = doc["values"][4].get<double>();
  CHECK(crisis > calm);

  auto rcsv = run("rolling --input " + fixture.string() +
                  " --groups 2,2 --window 60 --step 30 --format csv");
  REQUIRE(rcsv.code == 0);
  CHECK(rcsv.out.substr(0, 5) == "label");
  int lines = 0;
  for (char ch : rcsv.out)
    if (ch == '\n') ++lines;
  CHECK(lines == 10);  // header + 9 windows

  CHECK(run("rolling --input " + fixture.string() + " --groups 2,2 --format yaml").code == 2);
}

TEST_CASE("contagion compares three periods") {
  auto fixture = crisis_fixture();
  auto r = run("contagion --input " + fixture.string() +
               " --groups 2,2 --phi hellinger --period1 1:100 --period2 101:200 --period3 201:300");
  REQUIRE(r.code == 0);
  json doc = json::parse(r.out);
  REQUIRE(doc["periods"].size() == 3);
  CHECK(doc["periods"][1]["first"] == 101);
  CHECK(doc["periods"][1]["last"] == 200);
  double crisis = doc["periods"][1]["value"].get<double>();
  double calm = doc["periods"][0]["value"].get<double>();
  CHECK(crisis > calm);
  double p_inc = doc["tests"]["increase_into_crisis"]["p_value"].get<double>();
  double p_dec = doc["tests"]["decrease_after_crisis"]["p_value"].get<double>();
  CHECK(p_inc < 0.05);
  CHECK(p_dec < 0.05);
  CHECK(doc["tests"]["increase_into_crisis"]["z"].get<double>() < 0.0);

  // Period bounds may be dates from the leading column.
  auto s = load_csv(fixture.string(), GroupStructure::parse("2,2"));
  std::string by_label = "contagion --input " + fixture.string() +
                         " --groups 2,2 --period1 " + s.row_labels[0] + ":" + s.row_labels[99] +
                         " --period2 101:200 --period3 201:300";
  auto rl = run(by_label);
  REQUIRE(rl.code == 0);
  json dl = json::parse(rl.out);
  CHECK(dl["periods"][0]["value"].get<double>() == doc["periods"][0]["value"].get<double>());

  CHECK(run("contagion --input " + fixture.string() +
            " --groups 2,2 --period1 1:100 --period2 240:200 --period3 201:300")
            .code == 2);
  CHECK(run("contagion --input " + fixture.string() +
            " --groups 2,2 --period1 1:100 --period2 101:200 --period3 201:999")
            .code == 2);
}

TEST_CASE("degenerate data walks out with the numeric exit code") {
  // A monotone copy across the group split saturates the estimate, so the
  // contagion z-statistic has no standard deviation to divide by.
  auto path = work_dir() / "degenerate.csv";
  {
    std::mt19937_64 gen(8);
    std::normal_distribution<double> nd;
    std::ofstream out(path);
    out << std::setprecision(17) << "x,y\n";
    for (int i = 0; i < 60; ++i) {
      double a = nd(gen);
      out << a << "," << a * 3.0 + 2.0 << "\n";
    }
  }
  auto r = run("contagion --input " + path.string() +
               " --groups 1,1 --period1 1:20 --period2 21:40 --period3 41:60");
  CHECK(r.code == 3);
}

TEST_CASE("config file supplies defaults that flags override") {
  auto cfg = work_dir() / "phidep.cfg";
  std::ofstream(cfg) << "[simulate]\nseed=13\nm=32\n";
  auto a = run("--config " + cfg.string() + " simulate --copula \"gumbel(th=2,d=2)\"");
  REQUIRE(a.code == 0);
  auto b = run("simulate --copula \"gumbel(th=2,d=2)\" --m 32 --seed 13");
  REQUIRE(b.code == 0);
  CHECK(a.out == b.out);

  auto c = run("--config " + cfg.string() + " simulate --copula \"gumbel(th=2,d=2)\" --seed 14");
  REQUIRE(c.code == 0);
  CHECK(c.out != a.out);
}
