#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string kCli = TDSAFE_CLI_PATH;
const std::string kConfigs = TDSAFE_CONFIG_DIR;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tdsafe_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args, const std::string& env = "") {
    const fs::path err = dir_ / "stderr.txt";
    const std::string cmd = env + " " + kCli + " " + args + " 2>" + err.string();
    Outcome r;
    FILE* p = ::popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, got);
    int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(err);
    std::stringstream ss;
    ss << in.rdbuf();
    r.err = ss.str();
    return r;
  }

  fs::path write(const std::string& name, const json& j) {
    fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  // Contracting system with a hand-derived certificate that passes every check.
  std::pair<fs::path, fs::path> simple_files() {
    json sys = {{"name", "simple"},
                {"system",
                 {{"n", 2}, {"m", 1}, {"h", 1}, {"A", {{0.5, 0}, {0, 0.5}}}, {"A1", {{0, 0}, {0, 0}}},
                  {"G", {{0}, {1}}}, {"E", {{0.1, 0}, {0, 0.1}}}}},
                {"sets",
                 {{"X", {{"box", {{"lo", {-10, -10}}, {"hi", {10, 10}}}}}},
                  {"Xa", {{"box", {{"lo", {-0.5, -0.5}}, {"hi", {0.5, 0.5}}}}}},
                  {"Xb", json::array({{{"box", {{"lo", {6, -10}}, {"hi", {10, 10}}}}}})}}},
                {"input", {{"box", {{"lo", {-1}}, {"hi", {1}}}}}},
                {"spec", {{"T", 10}}}};
    json cert = {{"mode", "qcbc"},
                 {"T", 10},
                 {"certificate",
                  {{"type", "quadratic"},
                   {"P", {{1, 0}, {0, 1}}},
                   {"P1", {{0.1, 0}, {0, 0.1}}},
                   {"gamma_a", 0.55},
                   {"gamma_b", 36},
                   {"eta", 0.02}}},
                 {"controller", {{"kind", "explicit"}, {"laws", {"0"}}}}};
    return {write("simple.json", sys), write("simple_cert.json", cert)};
  }

  fs::path dir_;
};

TEST_F(CliTest, BoundPrintsTableValue) {
  auto r = run("bound --cert " + kConfigs + "/certs/spacecraft_qcbc.json --horizon 20");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "0.9178\n");
  // T is taken from the certificate when --horizon is absent.
  r = run("bound --cert " + kConfigs + "/certs/jet_engine_qcbc.json");
  EXPECT_EQ(r.out, "0.9327\n");
}

TEST_F(CliTest, UsageErrorsExitTwoWithJson) {
  auto r = run("frobnicate");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err).at("kind"), "usage");
  r = run("check --system " + kConfigs + "/academic.json --cert " + (dir_ / "missing.json").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(json::parse(r.err).at("error").get<std::string>().find("not found"), std::string::npos);
  r = run("synth-qcbc --system " + kConfigs + "/academic.json --alpha-grid 1:2");
  EXPECT_EQ(r.code, 2);
  auto bad = write("bad.json", json{{"name", "x"}, {"system", {{"n", 2}}}});
  r = run("check --system " + bad.string() + " --cert " + kConfigs + "/certs/academic_qcbc.json");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(json::parse(r.err).at("kind"), "config");
}

TEST_F(CliTest, CheckExitCodes) {
  auto [sys, cert] = simple_files();
  auto r = run("check --system " + sys.string() + " --cert " + cert.string() + " --samples 500");
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  auto j = json::parse(r.out);
  EXPECT_TRUE(j.at("pass").get<bool>());
  EXPECT_NE(j.at("note").get<std::string>().find("not a proof"), std::string::npos);

  r = run("check --system " + kConfigs + "/academic.json --cert " + kConfigs +
          "/certs/academic_qcbc.json --samples 500");
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(json::parse(r.out).at("pass").get<bool>());
}

TEST_F(CliTest, CheckWritesReportToOutDir) {
  auto [sys, cert] = simple_files();
  auto r = run("check --system " + sys.string() + " --cert " + cert.string() + " --samples 200", "TDSAFE_OUT_DIR=" +
                                                                                                    (dir_ / "env").string());
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "env" / "check_report.json"));
}

TEST_F(CliTest, SimulateIsReproducible) {
  const std::string args = "simulate --system " + kConfigs + "/academic.json --cert " + kConfigs +
                           "/certs/academic_qcbc.json --runs 100 --traces 2 --seed 42 --out ";
  auto a = run(args + (dir_ / "a").string());
  auto b = run(args + (dir_ / "b").string());
  ASSERT_EQ(a.code, 0) << a.err;
  auto ja = json::parse(a.out), jb = json::parse(b.out);
  ja.erase("trace_dir");
  jb.erase("trace_dir");
  EXPECT_EQ(ja, jb);
  EXPECT_EQ(ja.at("runs"), 100);
  EXPECT_NEAR(ja.at("mu_h").get<double>(), (0.01 + 0.001 * 40) / 0.64, 1e-12);
  for (const char* f : {"trace_0.csv", "trace_1.csv", "simulation_summary.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "a" / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir_ / "a" / "trace_2.csv"));
  std::ifstream t0a(dir_ / "a" / "trace_0.csv"), t0b(dir_ / "b" / "trace_0.csv");
  std::stringstream sa, sb;
  sa << t0a.rdbuf();
  sb << t0b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
}

// Unconstrained synthesis on the contracting system, then the checker on the
// written certificate.
TEST_F(CliTest, SynthesisFeedsChecker) {
  auto [sys, cert] = simple_files();
  auto r = run("synth-qcbc-free --system " + sys.string() + " --ctrl-degree 1 --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  auto summary = json::parse(r.out);
  const fs::path written = summary.at("certificate").get<std::string>();
  ASSERT_TRUE(fs::exists(written));
  auto c = json::parse(std::ifstream(written));
  EXPECT_EQ(c.at("mode"), "qcbc-free");
  EXPECT_EQ(c.at("options").at("cli").at("ctrl_degree"), 1);
  EXPECT_FALSE(c.at("system_fingerprint").get<std::string>().empty());
  for (const auto& e : fs::directory_iterator(dir_)) {
    EXPECT_EQ(e.path().string().find(".tmp"), std::string::npos) << e.path();
  }
  r = run("check --system " + sys.string() + " --cert " + written.string() + " --samples 500");
  EXPECT_EQ(r.code, 0) << r.out;
}

}  // namespace
