#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "confound_ui/cli.hpp"
#include "confound_ui/error.hpp"

using namespace confound_ui;
using namespace confound_ui::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "confound_ui_cli_tests";
  fs::create_directories(p);
  return p;
}

std::string write_file(const std::string& name, const std::string& body) {
  const fs::path p = scratch_dir() / name;
  std::ofstream(p, std::ios::binary) << body;
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Deterministic observational sample: y depends on x1, x2 and z.
std::string sample_csv(int n) {
  std::ostringstream os;
  os << "y,z,x1,x2,zero\n";
  os.precision(17);
  for (int i = 0; i < n; ++i) {
    const double x1 = std::sin(1.7 * i);
    const double x2 = std::cos(0.9 * i) > 0.2 ? 1.0 : 0.0;
    const int z = std::sin(3.1 * i) + 0.5 * x1 > 0.0 ? 1 : 0;
    const double y = 1.0 + x1 + 0.5 * x2 + 2.0 * z + std::sin(11.3 * i);
    os << y << ',' << z << ',' << x1 << ',' << x2 << ",0\n";
  }
  return os.str();
}

RunConfig data_config(Command c, const std::string& path) {
  RunConfig cfg;
  cfg.command = c;
  cfg.input = path;
  cfg.outcome = "y";
  cfg.treatment = "z";
  cfg.covariates = {"x1", "x2"};
  return cfg;
}

struct Output {
  int code;
  std::string out;
  std::string err;
};

Output run_capture(const RunConfig& cfg) {
  std::ostringstream out, err;
  const int code = run(cfg, out, err);
  return {code, out.str(), err.str()};
}

// Drops the leading "# {...}" provenance line.
CsvTable csv_body(const std::string& text) {
  REQUIRE(text.rfind("# {", 0) == 0);
  std::istringstream in(text.substr(text.find('\n') + 1));
  return parse_csv(in);
}

}  // namespace

TEST_CASE("CSV parsing follows RFC 4180") {
  std::istringstream in("a,\"b,c\",d\r\n1,\"say \"\"hi\"\"\",\"multi\nline\"\r\n\n2,3,4");
  const CsvTable t = parse_csv(in);
  REQUIRE(t.header.size() == 3);
  CHECK(t.header[1] == "b,c");
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "say \"hi\"");
  CHECK(t.rows[0][2] == "multi\nline");
  CHECK(t.rows[1][2] == "4");
  CHECK(t.column("d") == 2);
  CHECK_THROWS_WITH_AS(t.column("q"), doctest::Contains("'q'"), InputError);

  std::istringstream ragged("a,b\n1,2\n3\n");
  CHECK_THROWS_WITH_AS(parse_csv(ragged), doctest::Contains("row 2"), InputError);
  std::istringstream open_quote("a,b\n\"1,2\n");
  CHECK_THROWS_WITH_AS(parse_csv(open_quote), doctest::Contains("unterminated"), InputError);
  std::istringstream empty("");
  CHECK_THROWS_AS(parse_csv(empty), InputError);
}

TEST_CASE("ingestion") {
  const std::string tiny = write_file("tiny.csv", "y,z,x1\n1.5,0,2\n2.5,1,3\n0.5,1,1\n");
  RunConfig cfg = data_config(Command::Estimate, tiny);
  cfg.covariates = {"x1"};
  // Three rows with a valid header build a dataset only when both arms can be
  // fit; with one control row the arm check rejects it.
  CHECK_THROWS_AS(ingest_csv(tiny, cfg), DegenerateTreatmentError);
  const CsvTable t = read_csv(tiny);
  CHECK(t.rows.size() == 3);

  const std::string bad = write_file(
      "bad_treatment.csv", "y,z,x1\n1,0,1\n2,1,2\n3,0,3\n4,1,4\n5,0,5\n6,1,6\n7,2,7\n");
  CHECK_THROWS_WITH_AS(ingest_csv(bad, cfg), doctest::Contains("row 7"), InputError);

  const std::string missing = write_file("missing.csv", "y,z,x1\n1,0,1\n2,1,\n");
  CHECK_THROWS_WITH_AS(ingest_csv(missing, cfg), doctest::Contains("missing value at row 2"),
                       InputError);

  cfg.covariates = {"x9"};
  CHECK_THROWS_WITH_AS(ingest_csv(tiny, cfg), doctest::Contains("x9"), InputError);

  // A constant-zero covariate is accepted at ingest and rejected at fit time.
  const std::string path = write_file("sample.csv", sample_csv(200));
  RunConfig zc = data_config(Command::Estimate, path);
  zc.covariates = {"x1", "zero"};
  const IngestedData ing = ingest_csv(path, zc);
  CHECK(ing.data.n() == 200);
  CHECK(ing.data.x().values().cols() == 3);
  CHECK_THROWS_AS(fit_models(ing.data, ing.treatment_design), SingularityError);
  const Output o = run_capture(zc);
  CHECK(o.code == 1);
  CHECK(o.err.find("error:") != std::string::npos);
}

TEST_CASE("estimate: JSON and CSV carry identical numbers") {
  const std::string path = write_file("sample.csv", sample_csv(300));
  const std::string before = slurp(path);
  RunConfig cfg = data_config(Command::Estimate, path);
  cfg.format = Format::Json;
  const Output js = run_capture(cfg);
  REQUIRE(js.code == 0);
  cfg.format = Format::Csv;
  const Output cs = run_capture(cfg);
  REQUIRE(cs.code == 0);
  CHECK(slurp(path) == before);

  const auto j = nlohmann::json::parse(js.out);
  CHECK(j["schema"] == "confound_ui.estimate");
  CHECK(j["schema_version"] == kSchemaVersion);
  CHECK(j["config"]["covariates"].size() == 2);
  CHECK(j["data"]["n"] == 300);
  const CsvTable t = csv_body(cs.out);
  REQUIRE(t.rows.size() == 4);
  REQUIRE(j["results"].size() == 4);
  for (std::size_t r = 0; r < 4; ++r) {
    const auto& res = j["results"][r];
    CHECK_FALSE(res.contains("ui_lower"));
    for (const char* col : {"estimate", "std_error", "ci_lower", "ci_upper"}) {
      CHECK(std::stod(t.rows[r][t.column(col)]) == res[col].get<double>());
    }
  }
  // Same input, same bytes.
  CHECK(run_capture(cfg).out == cs.out);
}

TEST_CASE("ui: a point rho of zero reproduces the CI, infeasible rho is per estimator") {
  const std::string path = write_file("sample.csv", sample_csv(300));
  RunConfig cfg = data_config(Command::Ui, path);
  cfg.format = Format::Json;
  CHECK(run_capture(cfg).code == 1);  // rho required
  cfg.rho0 = RhoInterval::point(0.0);
  const Output o = run_capture(cfg);
  REQUIRE(o.code == 0);
  const auto j = nlohmann::json::parse(o.out);
  for (const auto& r : j["results"]) {
    CHECK(std::fabs(r["ui_lower"].get<double>() - r["ci_lower"].get<double>()) <= 1e-12);
    CHECK(std::fabs(r["ui_upper"].get<double>() - r["ci_upper"].get<double>()) <= 1e-12);
  }

  cfg.format = Format::Table;
  cfg.rho0 = RhoInterval(-0.02, 0.02);
  const Output table = run_capture(cfg);
  CHECK(table.code == 0);
  CHECK(table.out.find("UI") != std::string::npos);
  CHECK(table.out.find("DR ATE") != std::string::npos);

  // Two rows per arm after intercept-only fitting: rho near 1 is infeasible.
  const std::string tiny = write_file("tiny4.csv", "y,z\n1,0\n2,1\n0.5,0\n3,1\n");
  RunConfig tc = data_config(Command::Ui, tiny);
  tc.covariates = {};
  tc.rho0 = RhoInterval(0.0, 0.95);
  tc.format = Format::Json;
  const Output to = run_capture(tc);
  REQUIRE(to.code == 0);
  const auto tj = nlohmann::json::parse(to.out);
  bool any_infeasible = false, any_ok = false;
  for (const auto& r : tj["results"]) {
    if (r.contains("ui_error")) any_infeasible = true;
    if (r.contains("ci_lower")) any_ok = true;
  }
  CHECK(any_infeasible);
  CHECK(any_ok);
}

TEST_CASE("sensitivity verdicts") {
  const std::string path = write_file("sample.csv", sample_csv(300));
  RunConfig cfg = data_config(Command::Sensitivity, path);
  cfg.format = Format::Json;
  cfg.plausible_rho = 0.05;
  const Output o = run_capture(cfg);
  REQUIRE(o.code == 0);
  const auto j = nlohmann::json::parse(o.out);
  for (const auto& r : j["results"]) {
    const double th = r["threshold"].get<double>();
    CHECK(th > 0.0);
    CHECK(r["verdict"] == (th > 0.05 ? "PASS" : "SENSITIVE"));
    // The UI at rho = +-threshold touches zero.
    RunConfig ui = data_config(Command::Ui, path);
    ui.format = Format::Json;
    ui.rho0 = RhoInterval(-th, th);
    const std::string label = r["estimator"].get<std::string>() == "OR" ? "or_" : "dr_";
    ui.estimators = {parse_estimator(label + (r["estimand"] == "ATT" ? "att" : "ate"))};
    const auto u = nlohmann::json::parse(run_capture(ui).out)["results"][0];
    const double edge = r["estimate"].get<double>() > 0 ? u["ui_lower"].get<double>()
                                                        : u["ui_upper"].get<double>();
    CHECK(std::fabs(edge) <= 1e-4);
  }

  // No effect: the CI covers zero and the threshold is 0.
  std::string flat = "y,z,x1\n";
  for (int i = 0; i < 200; ++i) {
    flat += std::to_string(std::sin(5.3 * i)) + "," + std::to_string(i % 2) + "," +
            std::to_string(std::cos(0.3 * i)) + "\n";
  }
  RunConfig fc = data_config(Command::Sensitivity, write_file("flat.csv", flat));
  fc.covariates = {"x1"};
  fc.format = Format::Json;
  fc.estimators = {parse_estimator("or_ate")};
  const auto fj = nlohmann::json::parse(run_capture(fc).out)["results"][0];
  CHECK(fj["ci_covers_zero"] == true);
  CHECK(fj["threshold"] == 0.0);
  CHECK(fj["verdict"] == "SENSITIVE");
}

TEST_CASE("simulate: byte-identical reruns, decomposition columns, single replication") {
  RunConfig cfg;
  cfg.command = Command::Simulate;
  cfg.design = sim::Design::B;
  cfg.n = 250;
  cfg.reps = 20;
  cfg.seed = 99;
  cfg.true_rho0 = cfg.true_rho1 = 0.3;
  cfg.out_prefix = (scratch_dir() / "run_a").string();
  REQUIRE(run_capture(cfg).code == 0);
  cfg.threads = 2;
  cfg.out_prefix = (scratch_dir() / "run_b").string();
  REQUIRE(run_capture(cfg).code == 0);
  const std::string a = (scratch_dir() / "run_a").string(), b = (scratch_dir() / "run_b").string();
  CHECK(slurp(a + ".csv") == slurp(b + ".csv"));
  CHECK(slurp(a + ".json") == slurp(b + ".json"));

  const CsvTable t = csv_body(slurp(a + ".csv"));
  CHECK(t.rows.size() == 20);
  for (const char* col : {"or_att_bias_c", "or_att_bias_m", "or_att_bias_t", "dr_ate_bias_t",
                          "or_ate_ui_0_0.4_lower"}) {
    CHECK_NOTHROW(t.column(col));
  }
  const auto j = nlohmann::json::parse(slurp(a + ".json"));
  CHECK(j["replications"]["succeeded"] == 20);
  CHECK(j["config"]["reps"] == 20);
  CHECK_FALSE(j["config"].contains("threads"));

  cfg.out_prefix.clear();
  cfg.reps = 1;
  cfg.format = Format::Csv;
  const Output one = run_capture(cfg);
  REQUIRE(one.code == 0);
  CHECK(csv_body(one.out).rows.size() == 1);
  cfg.format = Format::Json;
  const auto oj = nlohmann::json::parse(run_capture(cfg).out);
  CHECK(oj["estimators"][0]["estimate"]["mc_se"].is_null());
  CHECK(oj["estimators"][0]["estimate"]["mean"].is_number());

  cfg.format = Format::Table;
  cfg.reps = 3;
  const Output table = run_capture(cfg);
  CHECK(table.out.find("bias_M") != std::string::npos);
  CHECK(table.out.find("coverage") != std::string::npos);
}

TEST_CASE("configuration validation") {
  RunConfig cfg;
  cfg.command = Command::Simulate;
  cfg.alpha = 1.5;
  CHECK(run_capture(cfg).code == 1);
  cfg.alpha = 0.05;
  cfg.reps = 0;
  CHECK(run_capture(cfg).code == 1);
  CHECK_THROWS_AS(parse_rho_interval("0.5,0.1"), InputError);
  CHECK_THROWS_AS(parse_rho_interval("-2,0"), InputError);
  CHECK_THROWS_AS(parse_rho_interval("abc"), InputError);
  const RhoInterval r = parse_rho_interval("-0.02,0.02");
  CHECK(r.low == -0.02);
  CHECK(parse_rho_interval("0.1").high == 0.1);
  CHECK_THROWS_AS(parse_estimator("ipw_att"), InputError);
  CHECK(parse_format("csv") == Format::Csv);
  RunConfig missing;
  missing.command = Command::Estimate;
  CHECK(run_capture(missing).code == 1);
}
