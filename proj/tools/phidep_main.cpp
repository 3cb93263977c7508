#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phidep/copula.hpp"
#include "phidep/errors.hpp"
#include "phidep/gaussian.hpp"
#include "phidep/grouped.hpp"
#include "phidep/inference.hpp"
#include "phidep/mc.hpp"
#include "phidep/mle.hpp"
#include "phidep/phi.hpp"
#include "phidep/stats.hpp"

using nlohmann::json;
using namespace phidep;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Doubles in artifacts: IEEE specials become "inf"/"-inf" strings and null.
json num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

std::string iso_now() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

struct Shared {
  std::string command_line;
  std::string config_echo;
  std::uint64_t seed = 42;
  int threads = 0;
};

// wall_clock varies run to run; everything else in an artifact is a pure
// function of the config and seed.
json provenance(const Shared& shared) {
  return {{"tool", "phidep"},
          {"version", kVersion},
          {"command", shared.command_line},
          {"config", shared.config_echo},
          {"seed", shared.seed},
          {"wall_clock", iso_now()}};
}

void write_text(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open output file '" + path + "'");
  out << content;
}

void write_json(const std::string& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

TiePolicy parse_ties(const std::string& s) {
  if (s == "error") return TiePolicy::Error;
  if (s == "midrank") return TiePolicy::Midrank;
  throw ValidationError("--ties must be error or midrank");
}

MissingPolicy parse_missing(const std::string& s) {
  if (s == "drop-row") return MissingPolicy::DropRow;
  if (s == "error") return MissingPolicy::Error;
  throw ValidationError("--missing must be drop-row or error");
}

struct IoOptions {
  std::string input;
  std::string groups_csv;
  std::string ties = "error";
  std::string missing = "drop-row";
  bool log_returns_flag = false;
};

void add_io_options(CLI::App* cmd, IoOptions& io) {
  cmd->add_option("--input", io.input, "CSV with a header row (optional leading date column)")
      ->required();
  cmd->add_option("--groups", io.groups_csv, "comma-separated group sizes, e.g. 2,2")->required();
  cmd->add_option("--ties", io.ties, "tied values: error|midrank (default error)");
  cmd->add_option("--missing", io.missing, "missing cells: drop-row|error (default drop-row)");
  cmd->add_flag("--returns", io.log_returns_flag, "treat input as prices; analyze log returns");
}

GroupedSample load_input(const IoOptions& io) {
  GroupedSample sample =
      load_csv(io.input, GroupStructure::parse(io.groups_csv), parse_missing(io.missing));
  if (io.log_returns_flag) sample = log_returns(sample);
  return sample;
}

json sample_summary(const GroupedSample& sample, const IoOptions& io) {
  return {{"input", io.input},
          {"groups", sample.groups.to_string()},
          {"n", sample.n()},
          {"q", sample.q()},
          {"dropped_rows", sample.dropped_rows},
          {"log_returns", io.log_returns_flag}};
}

json gaussian_estimate_json(const GaussianEstimate& est) {
  return {{"value", num(est.value)},
          {"normalized_value", num(est.normalized)},
          {"sd", num(est.sd)},
          {"ci_lo", num(est.ci_lo)},
          {"ci_hi", num(est.ci_hi)},
          {"alpha", est.alpha},
          {"n", est.n},
          {"method", est.method},
          {"warnings", est.warnings}};
}

CopulaModel family_template(const std::string& family, const GroupStructure& groups) {
  if (family == "gumbel" || family == "clayton") {
    ArchimedeanCopula a;
    a.family = parse_family(family);
    a.theta = 2.0;
    a.dim = groups.dimension();
    a.groups = groups;
    return a;
  }
  if (family == "nested-gumbel" || family == "nested-clayton") {
    NestedArchimedeanCopula n;
    n.family = parse_family(family.substr(7));
    n.theta0 = n.family == ArchimedeanFamily::Clayton ? 0.1 : 1.5;
    n.child_thetas.assign(static_cast<std::size_t>(groups.group_count()), 2.0);
    n.groups = groups;
    return n;
  }
  throw ValidationError("--copula/--family must be gaussian, gumbel, clayton, nested-gumbel or "
                        "nested-clayton");
}

std::vector<std::string> parameter_names(const CopulaModel& shape) {
  if (std::holds_alternative<ArchimedeanCopula>(shape)) return {"theta"};
  std::vector<std::string> names{"theta0"};
  int k = std::get<NestedArchimedeanCopula>(shape).groups.group_count();
  for (int i = 1; i <= k; ++i) names.push_back("theta" + std::to_string(i));
  return names;
}

// ---- estimate ----

struct EstimateOptions {
  IoOptions io;
  std::string copula = "gaussian";
  std::string phi = "mutual-information";
  std::string estimator = "auto";
  double alpha = 0.05;
  std::uint64_t mc_samples = 10000;
  std::string out;
};

void run_estimate(const EstimateOptions& opt, const Shared& shared) {
  GroupedSample sample = load_input(opt.io);
  PhiFunction phi = PhiFunction::parse(opt.phi);
  TiePolicy ties = parse_ties(opt.io.ties);
  json doc = sample_summary(sample, opt.io);
  doc["command"] = "estimate";
  doc["phi"] = phi.name();

  if (opt.copula == "gaussian") {
    NumericOptions nopts;
    nopts.seed = shared.seed;
    nopts.threads = shared.threads;
    GaussianEstimate est = estimate_gaussian(sample, phi, opt.alpha, ties, nopts);
    doc["model"] = "gaussian";
    doc["estimate"] = gaussian_estimate_json(est);
    doc["correlation"] = {{"sizes", est.r.groups.sizes}, {"matrix", mat_json(est.r.r)}};
  } else {
    CopulaModel shape = family_template(opt.copula, sample.groups);
    McOptions mopts;
    mopts.draws = opt.mc_samples;
    mopts.seed = shared.seed;
    mopts.threads = shared.threads;
    mopts.ties = ties;
    if (opt.estimator == "general")
      mopts.form = FormChoice::General;
    else if (opt.estimator == "reduced")
      mopts.form = FormChoice::Reduced;
    else if (opt.estimator == "auto")
      mopts.form = FormChoice::Auto;
    else
      throw ValidationError("--estimator must be auto, general or reduced");
    McDependenceEstimate est = estimate_from_data(sample, shape, phi, mopts);
    doc["model"] = opt.copula;
    doc["estimate"] = {
        {"value", num(est.value)},
        {"normalized_value", num(normalize_dependence(phi, est.value))},
        {"mc_se", num(est.mc_standard_error)},
        {"m_used", est.m_used},
        {"redraws", est.redraws},
        {"estimator_form",
         est.estimator_form == EstimatorForm::General ? "general" : "hellinger-reduced"},
        {"summand_kurtosis", num(est.summand_kurtosis)},
        {"warnings", est.warnings}};
    json fit_block = {{"parameter_names", parameter_names(shape)},
                      {"theta_hat", vec_json(est.fit->theta_hat)},
                      {"start", vec_json(est.fit->start)},
                      {"loglik", num(est.fit->loglik)},
                      {"iterations", est.fit->iterations},
                      {"converged", est.fit->converged}};
    doc["fit"] = fit_block;
  }
  doc["provenance"] = provenance(shared);
  write_json(opt.out, doc);
}

// ---- fit ----

struct FitOptions {
  IoOptions io;
  std::string family = "gumbel";
  int bootstrap = 0;
  std::string out;
};

void run_fit(const FitOptions& opt, const Shared& shared) {
  GroupedSample sample = load_input(opt.io);
  TiePolicy ties = parse_ties(opt.io.ties);
  CopulaModel shape = family_template(opt.family, sample.groups);
  FitResult fit = fit_copula(sample, shape, ties);

  json doc = sample_summary(sample, opt.io);
  doc["command"] = "fit";
  doc["family"] = opt.family;
  doc["parameter_names"] = parameter_names(shape);
  doc["start"] = vec_json(fit.start);
  doc["theta_hat"] = vec_json(fit.theta_hat);
  doc["loglik"] = num(fit.loglik);
  doc["iterations"] = fit.iterations;
  doc["converged"] = fit.converged;
  doc["model_spec"] = model_spec_string(fit.model);
  if (opt.bootstrap > 0) {
    Eigen::MatrixXd v =
        bootstrap_parameter_variance(sample, shape, opt.bootstrap, shared.seed, shared.threads);
    doc["bootstrap_V"] = mat_json(v);
    doc["bootstrap_replicates"] = opt.bootstrap;
  }
  doc["provenance"] = provenance(shared);
  write_json(opt.out, doc);
}

// ---- simulate ----

struct SimulateOptions {
  std::string copula;
  std::uint64_t m = 1000;
  std::string scale = "uniform";
  std::string out;
};

void run_simulate(const SimulateOptions& opt, const Shared& shared) {
  CopulaModel model = parse_copula_spec(opt.copula);
  if (opt.scale != "uniform" && opt.scale != "normal")
    throw ValidationError("--scale must be uniform or normal");
  Eigen::MatrixXd u = sample(model, opt.m, shared.seed, shared.threads);
  bool normal = opt.scale == "normal";
  std::ostringstream csv;
  const char prefix = normal ? 'z' : 'u';
  for (Eigen::Index j = 0; j < u.cols(); ++j)
    csv << (j ? "," : "") << prefix << (j + 1);
  csv << "\n";
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
      double v = normal ? normal_quantile(u(i, j)) : u(i, j);
      csv << (j ? "," : "") << fmt17(v);
    }
    csv << "\n";
  }
  write_text(opt.out, csv.str());
}

// ---- rolling ----

struct RollingOptions {
  IoOptions io;
  std::string phi = "mutual-information";
  double alpha = 0.05;
  int window = 101;
  int step = 10;
  std::string format = "json";
  std::string out;
};

void run_rolling(const RollingOptions& opt, const Shared& shared) {
  GroupedSample sample = load_input(opt.io);
  PhiFunction phi = PhiFunction::parse(opt.phi);
  NumericOptions nopts;
  nopts.seed = shared.seed;
  nopts.threads = 1;  // windows already run in parallel
  RollingSeries series = rolling_dependence(sample, opt.window, opt.step, phi, opt.alpha,
                                            parse_ties(opt.io.ties), nopts, shared.threads);
  if (opt.format == "csv") {
    std::ostringstream csv;
    csv << "label,first,last,value,sd,ci_lo,ci_hi,short_window,singular\n";
    for (const auto& e : series.entries) {
      csv << e.label << "," << e.span.first << "," << e.span.last << ","
          << fmt17(e.estimate.value) << "," << fmt17(e.estimate.sd) << ","
          << fmt17(e.estimate.ci_lo) << "," << fmt17(e.estimate.ci_hi) << ","
          << (e.span.irregular ? 1 : 0) << "," << (e.singular ? 1 : 0) << "\n";
    }
    write_text(opt.out, csv.str());
    return;
  }
  if (opt.format != "json") throw ValidationError("--format must be json or csv");

  json labels = json::array(), firsts = json::array(), lasts = json::array();
  json values = json::array(), normalized = json::array(), sds = json::array();
  json ci_lo = json::array(), ci_hi = json::array();
  json short_window = json::array(), singular = json::array();
  for (const auto& e : series.entries) {
    labels.push_back(e.label);
    firsts.push_back(e.span.first);
    lasts.push_back(e.span.last);
    values.push_back(num(e.estimate.value));
    normalized.push_back(num(e.estimate.normalized));
    sds.push_back(num(e.estimate.sd));
    ci_lo.push_back(num(e.estimate.ci_lo));
    ci_hi.push_back(num(e.estimate.ci_hi));
    short_window.push_back(e.span.irregular);
    singular.push_back(e.singular);
  }
  json doc = sample_summary(sample, opt.io);
  doc["command"] = "rolling";
  doc["phi"] = phi.name();
  doc["alpha"] = opt.alpha;
  doc["window"] = opt.window;
  doc["step"] = opt.step;
  doc["labels"] = labels;
  doc["first_row"] = firsts;
  doc["last_row"] = lasts;
  doc["values"] = values;
  doc["normalized_values"] = normalized;
  doc["sd"] = sds;
  doc["ci_lo"] = ci_lo;
  doc["ci_hi"] = ci_hi;
  doc["short_window"] = short_window;
  doc["singular"] = singular;
  doc["provenance"] = provenance(shared);
  write_json(opt.out, doc);
}

// ---- contagion ----

struct ContagionOptions {
  IoOptions io;
  std::string phi = "hellinger";
  double alpha = 0.05;
  std::string period1, period2, period3;
  std::string out;
};

// "a:b" with 1-based inclusive bounds; bounds may also be row labels (dates).
std::pair<int, int> parse_period(const std::string& text, const GroupedSample& sample) {
  auto colon = text.find(':');
  if (colon == std::string::npos)
    throw ValidationError("period '" + text + "' must look like first:last");
  auto resolve = [&](const std::string& token) -> int {
    try {
      std::size_t pos = 0;
      int row = std::stoi(token, &pos);
      if (pos == token.size()) return row;
    } catch (const std::exception&) {
    }
    for (std::size_t i = 0; i < sample.row_labels.size(); ++i)
      if (sample.row_labels[i] == token) return static_cast<int>(i) + 1;
    throw ValidationError("period bound '" + token + "' is neither a row number nor a row label");
  };
  int first = resolve(text.substr(0, colon));
  int last = resolve(text.substr(colon + 1));
  if (first < 1 || last < first || last > static_cast<int>(sample.n()))
    throw ValidationError("period '" + text + "' is out of range for " +
                          std::to_string(sample.n()) + " rows");
  return {first, last};
}

void run_contagion(const ContagionOptions& opt, const Shared& shared) {
  GroupedSample sample = load_input(opt.io);
  PhiFunction phi = PhiFunction::parse(opt.phi);
  TiePolicy ties = parse_ties(opt.io.ties);
  NumericOptions nopts;
  nopts.seed = shared.seed;
  nopts.threads = shared.threads;

  std::vector<std::pair<int, int>> periods{parse_period(opt.period1, sample),
                                           parse_period(opt.period2, sample),
                                           parse_period(opt.period3, sample)};
  std::vector<GaussianEstimate> estimates;
  json period_json = json::array();
  for (const auto& [first, last] : periods) {
    GroupedSample slice;
    slice.data = sample.data.middleRows(first - 1, last - first + 1);
    slice.groups = sample.groups;
    GaussianEstimate est = estimate_gaussian(slice, phi, opt.alpha, ties, nopts);
    estimates.push_back(est);
    json p = gaussian_estimate_json(est);
    p["first"] = first;
    p["last"] = last;
    period_json.push_back(p);
  }
  ContagionTestResult increase =
      contagion_test(estimates[0], estimates[1], ContagionDirection::IncreaseIntoCrisis);
  ContagionTestResult decrease =
      contagion_test(estimates[1], estimates[2], ContagionDirection::DecreaseAfterCrisis);

  json doc = sample_summary(sample, opt.io);
  doc["command"] = "contagion";
  doc["phi"] = phi.name();
  doc["alpha"] = opt.alpha;
  doc["periods"] = period_json;
  doc["tests"] = {{"increase_into_crisis",
                   {{"period_pair", {1, 2}}, {"z", num(increase.z)}, {"p_value", num(increase.p_value)}}},
                  {"decrease_after_crisis",
                   {{"period_pair", {2, 3}}, {"z", num(decrease.z)}, {"p_value", num(decrease.p_value)}}}};
  doc["provenance"] = provenance(shared);
  write_json(opt.out, doc);
}

// ---- validate ----

struct ValidateOptions {
  IoOptions io;
  std::string out;
};

void run_validate(const ValidateOptions& opt, const Shared& shared) {
  GroupedSample sample = load_input(opt.io);
  json ties_columns = json::array();
  for (Eigen::Index j = 0; j < sample.q(); ++j) {
    bool has_ties = false;
    ranks(sample.data.col(j), TiePolicy::Midrank, &has_ties);
    if (has_ties)
      ties_columns.push_back(sample.column_labels.empty()
                                 ? "column " + std::to_string(j + 1)
                                 : sample.column_labels[static_cast<std::size_t>(j)]);
  }
  json doc = sample_summary(sample, opt.io);
  doc["command"] = "validate";
  doc["column_labels"] = sample.column_labels;
  doc["row_labels_present"] = !sample.row_labels.empty();
  doc["tied_columns"] = ties_columns;
  doc["ok"] = true;
  doc["provenance"] = provenance(shared);
  write_json(opt.out, doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Phi-divergence dependence between groups of variables under copula models"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "key=value config file; flags override it");
  app.require_subcommand(1);

  Shared shared;
  for (int i = 0; i < argc; ++i) {
    if (i) shared.command_line += ' ';
    shared.command_line += argv[i];
  }

  EstimateOptions est_opt;
  SimulateOptions sim_opt;
  FitOptions fit_opt;
  RollingOptions roll_opt;
  ContagionOptions cont_opt;
  ValidateOptions val_opt;

  auto add_shared = [&](CLI::App* cmd) {
    cmd->add_option("--seed", shared.seed, "RNG seed (default 42)")->envname("PHIDEP_SEED");
    cmd->add_option("--threads", shared.threads, "worker threads, 0 = logical cores");
  };

  CLI::App* est = app.add_subcommand("estimate", "estimate the dependence between groups");
  add_io_options(est, est_opt.io);
  add_shared(est);
  est->add_option("--copula", est_opt.copula,
                  "gaussian (default) | gumbel | clayton | nested-gumbel | nested-clayton");
  est->add_option("--phi", est_opt.phi,
                  "mutual-information | pearson | hellinger | total-variation | jensen-shannon | "
                  "power:<alpha>");
  est->add_option("--alpha", est_opt.alpha, "confidence level alpha (default 0.05)");
  est->add_option("--mc-samples", est_opt.mc_samples, "Monte Carlo draws for copula models");
  est->add_option("--estimator", est_opt.estimator, "auto | general | reduced (hellinger only)");
  est->add_option("--out", est_opt.out, "output JSON path (default stdout)");

  CLI::App* fit = app.add_subcommand("fit", "fit an Archimedean or nested copula");
  add_io_options(fit, fit_opt.io);
  add_shared(fit);
  fit->add_option("--family", fit_opt.family, "gumbel | clayton | nested-gumbel | nested-clayton")
      ->required();
  fit->add_option("--bootstrap", fit_opt.bootstrap,
                  "row-bootstrap replicates for the parameter variance (0 = off)");
  fit->add_option("--out", fit_opt.out, "output JSON path (default stdout)");

  CLI::App* sim = app.add_subcommand("simulate", "draw samples from a fully specified copula");
  add_shared(sim);
  sim->add_option("--copula", sim_opt.copula,
                  "gaussian:R.json | gumbel(th=3,d=2) | clayton(th=2,d=3) | "
                  "nested-gumbel(th0=3; th1=3,d1=2; th2=4,d2=2) | nested-clayton(...)")
      ->required();
  sim->add_option("--m", sim_opt.m, "number of rows");
  sim->add_option("--scale", sim_opt.scale, "uniform (default) | normal");
  sim->add_option("--out", sim_opt.out, "output CSV path (default stdout)");

  CLI::App* roll = app.add_subcommand("rolling", "rolling-window dependence series");
  add_io_options(roll, roll_opt.io);
  add_shared(roll);
  roll->add_option("--phi", roll_opt.phi, "dependence kind (default mutual-information)");
  roll->add_option("--alpha", roll_opt.alpha, "confidence level (default 0.05)");
  roll->add_option("--window", roll_opt.window, "window length in rows (default 101)");
  roll->add_option("--step", roll_opt.step, "window start increment (default 10)");
  roll->add_option("--format", roll_opt.format, "json (default) | csv");
  roll->add_option("--out", roll_opt.out, "output path (default stdout)");

  CLI::App* cont = app.add_subcommand("contagion", "two-sided period comparison z-tests");
  add_io_options(cont, cont_opt.io);
  add_shared(cont);
  cont->add_option("--phi", cont_opt.phi, "dependence kind (default hellinger)");
  cont->add_option("--alpha", cont_opt.alpha, "confidence level (default 0.05)");
  cont->add_option("--period1", cont_opt.period1, "pre-crisis rows first:last (1-based)")
      ->required();
  cont->add_option("--period2", cont_opt.period2, "crisis rows first:last")->required();
  cont->add_option("--period3", cont_opt.period3, "post-crisis rows first:last")->required();
  cont->add_option("--out", cont_opt.out, "output JSON path (default stdout)");

  CLI::App* val = app.add_subcommand("validate", "check a CSV against a group structure");
  add_io_options(val, val_opt.io);
  add_shared(val);
  val->add_option("--out", val_opt.out, "output JSON path (default stdout)");

  try {
    app.parse(argc, argv);
    shared.config_echo = app.config_to_str(true, false);
    if (est->parsed()) run_estimate(est_opt, shared);
    if (fit->parsed()) run_fit(fit_opt, shared);
    if (sim->parsed()) run_simulate(sim_opt, shared);
    if (roll->parsed()) run_rolling(roll_opt, shared);
    if (cont->parsed()) run_contagion(cont_opt, shared);
    if (val->parsed()) run_validate(val_opt, shared);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
