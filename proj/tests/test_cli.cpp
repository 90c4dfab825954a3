#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args) {
  CliRun r;
  const std::string cmd = std::string(COOPGAIT_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("coopgait_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Cli, ProductGraphCounts) {
  const CliRun r = run("--mode product-graph --cycle 8");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "64 vertices, 192 edges\n");
}

TEST(Cli, ErrorsAreMachineReadable) {
  for (const std::string args : {"--mode nonsense", "--model /nonexistent/model.json", "--mode coupled --d 1",
                                 "--mode single --perturb base/pitch", "--mode single --perturb nope:0.1",
                                 "--mode product-graph --cycle 0"}) {
    const CliRun r = run(args + " --out " + scratch("err").string());
    EXPECT_NE(r.code, 0) << args;
    const auto doc = nlohmann::json::parse(r.out, nullptr, false);
    ASSERT_FALSE(doc.is_discarded()) << r.out;
    EXPECT_TRUE(doc.contains("error"));
    EXPECT_TRUE(doc.contains("message"));
    EXPECT_EQ(doc.at("exit_code").get<int>(), r.code);
  }
}

TEST(Cli, SingleRunIsDeterministic) {
  const fs::path a = scratch("single_a"), b = scratch("single_b");
  const std::string args = "--mode single --strides 2 --perturb random:0.01 --seed 17";
  ASSERT_EQ(run(args + " --out " + a.string()).code, 0);
  ASSERT_EQ(run(args + " --out " + b.string()).code, 0);
  for (const char* f : {"trajectory.csv", "events.json", "audit.json"}) {
    EXPECT_FALSE(slurp(a / f).empty());
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto meta = nlohmann::json::parse(slurp(a / "events.json")).at("metadata");
  EXPECT_EQ(meta.at("seed").get<int>(), 17);
}

TEST(Cli, CoupledTunedRunIsStable) {
  const fs::path dir = scratch("coupled");
  const CliRun r = run("--mode coupled --strides 1 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto doc = nlohmann::json::parse(slurp(dir / "stability.json"));
  EXPECT_LT(doc.at("spectral_radius").get<double>(), 1.0);
  EXPECT_EQ(doc.at("quotient_removed").size(), 2u);
}
