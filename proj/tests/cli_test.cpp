#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gsem/gallery.hpp"
#include "gsem/gsem_io.hpp"
#include "gsem/matrix_market.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
   int code;
   std::string out;
};

Result run(const std::string& args)
{
   const std::string cmd = std::string(GSEM_CLI_PATH) + " " + args + " 2>/dev/null";
   FILE* p = popen(cmd.c_str(), "r");
   if (!p) return {-1, ""};
   std::string out;
   char buf[4096];
   while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
   const int status = pclose(p);
   return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p)
{
   std::ifstream in(p, std::ios::binary);
   return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
protected:
   void SetUp() override
   {
      dir = fs::temp_directory_path() / ("gsem_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
      fs::create_directories(dir);
   }
   void TearDown() override { fs::remove_all(dir); }

   std::string path(const std::string& name) const { return (dir / name).string(); }

   std::string write_matrix(const std::string& name, const gsem::CsrMatrixF64& m) const
   {
      gsem::write_matrix_market(path(name), m);
      return path(name);
   }

   fs::path dir;
};

} // namespace

TEST_F(Cli, UsageErrors)
{
   EXPECT_EQ(run("").code, 1);
   EXPECT_EQ(run("frobnicate").code, 1);
   EXPECT_EQ(run("spmv " + path("x.mtx") + " --format fp8").code, 1);
   EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, AnalyzeIdentity)
{
   const auto m = write_matrix("id.mtx", gsem::gallery::identity(5));
   const auto r = run("analyze " + m);
   ASSERT_EQ(r.code, 0);
   const auto j = json::parse(r.out);
   ASSERT_EQ(j["topk_coverage"].size(), 7u);
   for (const auto& row : j["topk_coverage"]) EXPECT_EQ(row["coverage"].get<double>(), 1.0);
   EXPECT_EQ(j["entropy"]["exponent"].get<double>(), 0.0);
   EXPECT_EQ(j["config"]["k_max"], 8);

   const auto csv = run("analyze " + m + " --report-format csv");
   ASSERT_EQ(csv.code, 0);
   EXPECT_NE(csv.out.find("metric,k,value\n"), std::string::npos);
   EXPECT_NE(csv.out.find("topk_coverage,64,1\n"), std::string::npos);
}

TEST_F(Cli, AnalyzeMissingAndMalformedFiles)
{
   EXPECT_EQ(run("analyze " + path("missing.mtx")).code, 1);
   std::ofstream(path("bad.mtx")) << "%%MatrixMarket matrix coordinate real general\n2 2 1\n9 9 1\n";
   EXPECT_EQ(run("analyze " + path("bad.mtx")).code, 1);
}

TEST_F(Cli, AnalyzeRandomMatrixMatchesOracles)
{
   std::mt19937_64 rng(51);
   std::normal_distribution<double> nd(0.0, 50.0);
   std::vector<gsem::Triplet> t;
   for (std::uint64_t k = 0; k < 1000; ++k) t.push_back({k / 50, k % 50, nd(rng)});
   const auto mat = gsem::csr_from_triplets(20, 50, std::move(t));
   const auto r = run("analyze " + write_matrix("rand.mtx", mat) + " --k-list 1,2,3");
   ASSERT_EQ(r.code, 0);
   const auto j = json::parse(r.out);
   EXPECT_NEAR(j["entropy"]["value"].get<double>(), oracle::entropy_sorted(mat.values), 1e-12);
   std::map<std::uint16_t, std::uint64_t> hist;
   std::vector<std::uint64_t> exps;
   for (double v : mat.values) {
      ++hist[gsem::biased_exponent(v)];
      exps.push_back(gsem::biased_exponent(v));
   }
   EXPECT_NEAR(j["entropy"]["exponent"].get<double>(), oracle::entropy_sorted(exps), 1e-12);
   for (const auto& row : j["topk_coverage"]) {
      EXPECT_NEAR(row["coverage"].get<double>(), oracle::topk_sorted(hist, row["k"].get<unsigned>()), 1e-12);
   }
}

TEST_F(Cli, ConvertIdentityAndIdempotence)
{
   const auto m = write_matrix("id.mtx", gsem::gallery::identity(4));
   const auto r = run("convert " + m + " -o " + path("a.gsem"));
   ASSERT_EQ(r.code, 0);
   const auto j = json::parse(r.out);
   EXPECT_EQ(j["table"]["entries"], json::array({1024}));
   EXPECT_EQ(j["bytes"]["head"], 8);
   EXPECT_EQ(j["bytes"]["tail2"], 16);
   ASSERT_EQ(run("convert " + m + " -o " + path("b.gsem")).code, 0);
   EXPECT_EQ(slurp(dir / "a.gsem"), slurp(dir / "b.gsem"));
   EXPECT_EQ(gsem::load_gsem(path("a.gsem")).to_csr(), gsem::gallery::identity(4));
   EXPECT_EQ(run("convert " + m).code, 1); // -o is required
}

TEST_F(Cli, ConvertRejectsNonFinite)
{
   std::ofstream(path("inf.mtx")) << "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 inf\n";
   EXPECT_EQ(run("convert " + path("inf.mtx") + " -o " + path("inf.gsem")).code, 1);
}

TEST_F(Cli, SpmvErrorColumn)
{
   const auto m = write_matrix("cd.mtx", gsem::gallery::convection_diffusion(16));
   const auto r = run("spmv " + m + " --format fp64,gse-full,gse-head --repeats 3");
   ASSERT_EQ(r.code, 0);
   std::istringstream lines(r.out);
   std::string line;
   std::vector<std::string> rows;
   while (std::getline(lines, line)) {
      if (!line.empty() && line[0] != '#') rows.push_back(line);
   }
   ASSERT_EQ(rows.size(), 4u);
   EXPECT_EQ(rows[0], "matrix,format,nnz,level,repeats,median-ns,gflops,max_abs_err,mean-ns");
   auto field = [](const std::string& row, int idx) {
      std::stringstream ss(row);
      std::string f;
      for (int i = 0; i <= idx; ++i) std::getline(ss, f, ',');
      return f;
   };
   EXPECT_EQ(field(rows[1], 1), "fp64");
   EXPECT_EQ(field(rows[1], 7), "0");
   EXPECT_EQ(field(rows[2], 1), "gse-full");
   EXPECT_EQ(field(rows[2], 3), "full");
   EXPECT_EQ(field(rows[2], 7), "0");

   std::ofstream(path("big.mtx")) << "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 70000\n2 2 1\n";
   const auto h = run("spmv " + path("big.mtx") + " --format fp16 --repeats 2");
   ASSERT_EQ(h.code, 0);
   EXPECT_NE(h.out.find(",inf,"), std::string::npos);
}

TEST_F(Cli, SolvePoissonCg)
{
   const auto m = write_matrix("p.mtx", gsem::gallery::poisson2d(64));
   const auto r = run("solve " + m + " --solver cg");
   ASSERT_EQ(r.code, 0);
   const auto j = json::parse(r.out);
   EXPECT_TRUE(j["converged"].get<bool>());
   EXPECT_LE(j["final_relative_residual"].get<double>(), 1e-6);
   EXPECT_LE(j["iterations"].get<int>(), 5000);
   EXPECT_FALSE(j.contains("wall_time_s"));
   EXPECT_EQ(j["config"]["monitor"]["l"], 3000);
   EXPECT_TRUE(json::parse(run("solve " + m + " --solver cg --timings").out).contains("wall_time_s"));
}

TEST_F(Cli, SolveSteppedStall)
{
   const auto m = write_matrix("s.mtx", gsem::gallery::head_stall(64));
   const auto r = run("solve " + m + " --stepped --l 30 --t 10 --m 10 --ndec-limit 5");
   ASSERT_EQ(r.code, 0);
   const auto j = json::parse(r.out);
   ASSERT_FALSE(j["switch_log"].empty());
   EXPECT_EQ(j["switch_log"][0]["iteration"], 30);
   EXPECT_EQ(j["switch_log"][0]["name"], "head+tail1");
   EXPECT_LE(j["final_relative_residual"].get<double>(), 1e-6);
}

TEST_F(Cli, SolveExitCodes)
{
   const auto p = write_matrix("p.mtx", gsem::gallery::poisson2d(16));
   EXPECT_EQ(run("solve " + p + " --tol 0").code, 1);
   EXPECT_EQ(run("solve " + p + " --max-iters 3").code, 2);
   EXPECT_EQ(run("solve " + p + " --stepped --format bf16").code, 1);
   std::ofstream(path("big.mtx")) << "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 70000\n2 2 1\n";
   EXPECT_EQ(run("solve " + path("big.mtx") + " --format fp16").code, 3);
   EXPECT_EQ(run("solve " + path("big.mtx") + " --format gse-head").code, 0);
}

TEST_F(Cli, ConfigFilePrecedence)
{
   const auto p = write_matrix("p.mtx", gsem::gallery::poisson2d(16));
   std::ofstream(path("run.cfg")) << "solve.solver=cg\nsolve.tol=1e-3\nsolve.t=20\n";
   const auto from_file = json::parse(run("solve " + p + " --config " + path("run.cfg")).out);
   EXPECT_EQ(from_file["config"]["solver"], "cg");
   EXPECT_EQ(from_file["config"]["tol"].get<double>(), 1e-3);
   EXPECT_EQ(from_file["config"]["monitor"]["t"], 20);
   EXPECT_EQ(from_file["config"]["monitor"]["m"], 500); // CG default

   const auto flag = json::parse(run("solve " + p + " --config " + path("run.cfg") + " --tol 1e-9").out);
   EXPECT_EQ(flag["config"]["tol"].get<double>(), 1e-9);
   EXPECT_EQ(flag["config"]["solver"], "cg");

   std::ofstream(path("bad.cfg")) << "solve.no_such_key=1\n";
   EXPECT_EQ(run("solve " + p + " --config " + path("bad.cfg")).code, 1);
   EXPECT_EQ(run("solve " + p + " --config " + path("absent.cfg")).code, 1);
}

TEST_F(Cli, ReportsAreByteIdenticalAcrossRunsAndThreadCounts)
{
   const auto m = write_matrix("cd.mtx", gsem::gallery::convection_diffusion(24));
   const std::string args = "solve " + m + " --stepped --l 30 --t 10 --m 10 --history --solution -o ";
   ASSERT_EQ(run(args + path("r1.json")).code, 0);
   ASSERT_EQ(run(args + path("r2.json")).code, 0);
   EXPECT_EQ(slurp(dir / "r1.json"), slurp(dir / "r2.json"));
   ASSERT_EQ(std::system(("GSE_THREADS=1 " + std::string(GSEM_CLI_PATH) + " " + args + path("r3.json") + " > /dev/null").c_str()), 0);
   EXPECT_EQ(slurp(dir / "r1.json"), slurp(dir / "r3.json"));

   ASSERT_EQ(run("analyze " + m + " -o " + path("a1.json")).code, 0);
   ASSERT_EQ(run("analyze " + m + " -o " + path("a2.json")).code, 0);
   EXPECT_EQ(slurp(dir / "a1.json"), slurp(dir / "a2.json"));
}

TEST_F(Cli, SolveFromGsemFile)
{
   const auto m = write_matrix("cd.mtx", gsem::gallery::convection_diffusion(16));
   ASSERT_EQ(run("convert " + m + " -o " + path("cd.gsem")).code, 0);
   const auto a = json::parse(run("solve " + m + " --format gse-full").out);
   const auto b = json::parse(run("solve " + path("cd.gsem") + " --format gse-full").out);
   EXPECT_EQ(a["iterations"], b["iterations"]);
   EXPECT_EQ(a["final_relative_residual"], b["final_relative_residual"]);
}

TEST_F(Cli, GenWritesMatrixMarket)
{
   ASSERT_EQ(run("gen poisson --n 4 -o " + path("p.mtx")).code, 0);
   EXPECT_EQ(gsem::read_matrix_market(path("p.mtx")), gsem::gallery::poisson2d(4));
   const auto r = run("gen stall --n 8");
   ASSERT_EQ(r.code, 0);
   std::istringstream in(r.out);
   EXPECT_EQ(gsem::read_matrix_market(in), gsem::gallery::head_stall(8));
}

TEST_F(Cli, RhsFile)
{
   const auto m = write_matrix("id.mtx", gsem::gallery::identity(3));
   std::ofstream(path("b.txt")) << "# rhs\n1.5\n-2\n4\n";
   const auto j = json::parse(run("solve " + m + " --rhs " + path("b.txt") + " --solution").out);
   EXPECT_EQ(j["x"], json::array({1.5, -2.0, 4.0}));
   std::ofstream(path("short.txt")) << "1\n";
   EXPECT_EQ(run("solve " + m + " --rhs " + path("short.txt")).code, 1);
}
