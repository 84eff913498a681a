#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "gsem/gsem.hpp"
#include "gsem/report_io.hpp"

using nlohmann::json;

namespace {

struct Input {
   std::string name;
   gsem::CsrMatrixF64 fp64;
   std::optional<gsem::GseCsrMatrix> gse;
};

bool has_extension(const std::string& path, const std::string& ext)
{
   return std::filesystem::path(path).extension() == ext;
}

Input load_input(const std::string& path)
{
   Input in;
   in.name = std::filesystem::path(path).stem().string();
   if (has_extension(path, ".gsem")) {
      in.gse = gsem::load_gsem(path);
      in.fp64 = in.gse->to_csr(gsem::PrecisionLevel::Full);
   } else {
      in.fp64 = gsem::read_matrix_market(path);
   }
   return in;
}

std::optional<gsem::Sampling> sampling_of(std::uint64_t block, std::uint64_t seed)
{
   if (block == 0) return std::nullopt;
   return gsem::Sampling{block, seed};
}

const gsem::GseCsrMatrix& gse_of(Input& in, unsigned k, std::optional<gsem::Sampling> sampling)
{
   if (!in.gse) in.gse = gsem::convert_to_gse(in.fp64, k, sampling);
   return *in.gse;
}

void write_output(const std::string& path, const std::string& text)
{
   if (path.empty() || path == "-") {
      std::cout << text;
      return;
   }
   std::ofstream out(path, std::ios::binary);
   if (!out) throw gsem::error("cannot open '" + path + "' for writing");
   out << text;
   if (!out) throw gsem::error("failed writing '" + path + "'");
}

std::string config_comment(const json& config)
{
   std::string s;
   for (const auto& [key, value] : config.items()) s += "# " + key + "=" + value.dump() + "\n";
   return s;
}

std::vector<double> read_vector(const std::string& path)
{
   std::ifstream in(path);
   if (!in) throw gsem::error("cannot open '" + path + "'");
   std::vector<double> v;
   std::string tok;
   while (in >> tok) {
      if (tok[0] == '%' || tok[0] == '#') {
         std::getline(in, tok);
         continue;
      }
      try {
         std::size_t used = 0;
         v.push_back(std::stod(tok, &used));
         if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
         throw gsem::format_error("'" + path + "': invalid number '" + tok + "'");
      }
   }
   return v;
}

enum class Format { FP64, FP16, BF16, GseHead, GseHT1, GseFull };

const std::map<std::string, Format> format_names{
   {"fp64", Format::FP64},         {"fp16", Format::FP16},       {"bf16", Format::BF16},
   {"gse-head", Format::GseHead}, {"gse-ht1", Format::GseHT1}, {"gse-full", Format::GseFull},
};

const char* name_of(Format f)
{
   for (const auto& [name, value] : format_names) {
      if (value == f) return name.c_str();
   }
   return "?";
}

bool is_gse(Format f) { return f == Format::GseHead || f == Format::GseHT1 || f == Format::GseFull; }

gsem::PrecisionLevel level_of(Format f)
{
   switch (f) {
   case Format::GseHead: return gsem::PrecisionLevel::HeadOnly;
   case Format::GseHT1: return gsem::PrecisionLevel::HeadTail1;
   default: return gsem::PrecisionLevel::Full;
   }
}

// ---------------------------------------------------------------- analyze

struct AnalyzeArgs {
   std::string path;
   std::string output;
   std::string report_format = "json";
   std::vector<unsigned> ks = gsem::default_coverage_ks();
   unsigned k_max = 8;
};

int run_analyze(const AnalyzeArgs& a)
{
   const auto in = load_input(a.path);
   const auto report = gsem::analyze_report(in.fp64, a.ks, a.k_max);
   const json config = {{"matrix", in.name}, {"k_list", a.ks}, {"k_max", a.k_max}};
   if (a.report_format == "csv") {
      write_output(a.output, config_comment(config) + gsem::to_csv(report));
   } else {
      auto j = gsem::to_json(report);
      j["config"] = config;
      write_output(a.output, j.dump(2) + "\n");
   }
   return 0;
}

// ---------------------------------------------------------------- convert

struct ConvertArgs {
   std::string path;
   std::string output;
   unsigned k = 8;
   std::uint64_t sample_block = 0;
   std::uint64_t seed = 42;
};

int run_convert(const ConvertArgs& a)
{
   auto in = load_input(a.path);
   in.gse.reset();
   const auto& g = gse_of(in, a.k, sampling_of(a.sample_block, a.seed));
   gsem::save_gsem(g, a.output);

   const auto census = gsem::exponent_histogram(in.fp64);
   const auto nnz = g.nnz();
   const json summary = {
      {"config", {{"matrix", in.name}, {"k", a.k}, {"sample_block", a.sample_block}, {"seed", a.seed}}},
      {"output", a.output},
      {"rows", g.rows},
      {"cols", g.cols},
      {"nnz", nnz},
      {"table", gsem::to_json(g.table)},
      {"table_coverage", gsem::table_coverage(census.counts, g.table)},
      {"ei_in_column", g.ei_in_column},
      {"bytes",
       {{"head", 2 * nnz},
        {"tail1", 2 * nnz},
        {"tail2", 4 * nnz},
        {"col_idx", 4 * nnz},
        {"exp_side", g.exp_side.size()},
        {"row_ptr", 8 * g.row_ptr.size()},
        {"file", std::filesystem::file_size(a.output)}}},
   };
   std::cout << summary.dump(2) << "\n";
   return 0;
}

// ---------------------------------------------------------------- spmv

struct SpmvArgs {
   std::string path;
   std::string output;
   std::vector<std::string> formats;
   std::uint64_t repeats = 100;
   unsigned k = 8;
};

template <class F>
std::vector<double> time_runs(std::uint64_t repeats, F&& run)
{
   std::vector<double> ns;
   ns.reserve(repeats);
   for (std::uint64_t i = 0; i < repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      run();
      const auto t1 = std::chrono::steady_clock::now();
      ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
   }
   return ns;
}

int run_spmv(const SpmvArgs& a)
{
   if (a.repeats < 1) throw gsem::config_error("repeats must be >= 1");
   std::vector<Format> formats;
   for (const auto& f : a.formats) formats.push_back(format_names.at(f));
   if (formats.empty()) {
      formats = {Format::FP64, Format::FP16, Format::BF16, Format::GseHead, Format::GseHT1, Format::GseFull};
   }

   auto in = load_input(a.path);
   const std::vector<double> x(in.fp64.cols, 1.0);
   const auto ref = gsem::spmv_fp64(in.fp64, x);
   std::vector<double> y(in.fp64.rows);

   std::string csv = config_comment({{"matrix", in.name}, {"repeats", a.repeats}, {"k", a.k}});
   csv += gsem::bench_csv_header();
   for (auto f : formats) {
      std::vector<double> ns;
      switch (f) {
      case Format::FP64: ns = time_runs(a.repeats, [&] { gsem::spmv_fp64(in.fp64, x, y); }); break;
      case Format::FP16:
      case Format::BF16: {
         const auto h = gsem::to_half(in.fp64, f == Format::FP16 ? gsem::HalfFormat::FP16 : gsem::HalfFormat::BF16);
         ns = time_runs(a.repeats, [&] { gsem::spmv_half(h, x, y); });
         break;
      }
      default: {
         const auto& g = gse_of(in, a.k, std::nullopt);
         ns = time_runs(a.repeats, [&] { gsem::spmv_gse(g, x, y, level_of(f)); });
         break;
      }
      }
      gsem::BenchRow row;
      row.matrix = in.name;
      row.format = name_of(f);
      row.nnz = in.fp64.nnz();
      row.level = is_gse(f) ? gsem::to_string(level_of(f)) : "";
      row.repeats = a.repeats;
      double sum = 0;
      for (double v : ns) sum += v;
      row.mean_ns = sum / static_cast<double>(ns.size());
      std::sort(ns.begin(), ns.end());
      const auto mid = ns.size() / 2;
      row.median_ns = ns.size() % 2 ? ns[mid] : (ns[mid - 1] + ns[mid]) / 2;
      row.gflops = gsem::spmv_gflops(row.nnz, row.median_ns * 1e-9);
      row.max_abs_err = gsem::max_abs_error(y, ref).value;
      csv += gsem::to_csv_line(row);
   }
   write_output(a.output, csv);
   return 0;
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
   std::string path;
   std::string output;
   std::string report_format = "json";
   std::string rhs;
   std::optional<std::string> solver;
   std::optional<std::string> format;
   bool stepped = false;
   std::optional<double> tol;
   std::optional<std::uint64_t> max_iters;
   std::optional<unsigned> restart;
   std::optional<std::uint64_t> l, t, m, n_dec_limit;
   std::optional<double> rsd_limit, rel_dec_limit;
   unsigned k = 8;
   std::uint64_t sample_block = 0;
   std::uint64_t seed = 42;
   bool timings = false;
   bool history = false;
   bool solution = false;
   std::optional<double> fp16_time;
   std::optional<std::uint64_t> fp16_iters;
};

gsem::SolverConfig resolve_config(const SolveArgs& a, Format& format)
{
   const auto kind = a.solver.value_or("gmres") == "cg" ? gsem::SolverKind::CG : gsem::SolverKind::GMRES;
   auto c = gsem::SolverConfig::defaults(kind);
   if (a.tol) c.tol = *a.tol;
   if (a.max_iters) c.max_iters = *a.max_iters;
   if (a.restart) c.restart = *a.restart;
   if (a.l) c.monitor.l = *a.l;
   if (a.t) c.monitor.t = *a.t;
   if (a.m) c.monitor.m = *a.m;
   if (a.rsd_limit) c.monitor.rsd_limit = *a.rsd_limit;
   if (a.n_dec_limit) c.monitor.n_dec_limit = *a.n_dec_limit;
   if (a.rel_dec_limit) c.monitor.rel_dec_limit = *a.rel_dec_limit;

   format = format_names.at(a.format.value_or(a.stepped ? "gse-head" : "fp64"));
   c.stepped = a.stepped;
   if (a.stepped && !is_gse(format)) throw gsem::config_error("--stepped needs a gse-* format");
   c.fixed_level = level_of(format);
   c.validate();
   return c;
}

int run_solve(const SolveArgs& a)
{
   Format format;
   const auto config = resolve_config(a, format);
   auto in = load_input(a.path);
   std::vector<double> b = a.rhs.empty() ? gsem::gallery::rhs_for_ones(in.fp64) : read_vector(a.rhs);

   gsem::SolveReport rep;
   switch (format) {
   case Format::FP64: rep = gsem::solve(gsem::Fp64Operator(in.fp64), b, config); break;
   case Format::FP16:
   case Format::BF16: {
      const auto h = gsem::to_half(in.fp64, format == Format::FP16 ? gsem::HalfFormat::FP16 : gsem::HalfFormat::BF16);
      rep = gsem::solve(gsem::HalfOperator(h), b, config);
      break;
   }
   default: {
      const auto& g = gse_of(in, a.k, sampling_of(a.sample_block, a.seed));
      rep = gsem::solve(gsem::GseOperator(g), b, config);
      break;
   }
   }
   if (a.fp16_time && a.fp16_iters) rep.projected_time_s = gsem::project_hw_time(*a.fp16_time, *a.fp16_iters, rep.iterations);

   json cfg = gsem::to_json(config);
   cfg["matrix"] = in.name;
   cfg["format"] = name_of(format);
   cfg["k"] = a.k;
   cfg["rhs"] = a.rhs.empty() ? "A*ones" : a.rhs;
   if (a.report_format == "csv") {
      write_output(a.output, config_comment(cfg) + gsem::solve_csv_header(a.timings) + gsem::to_csv_line(rep, a.timings));
   } else {
      auto j = gsem::to_json(rep, {a.timings, a.history, a.solution});
      j["config"] = cfg;
      write_output(a.output, j.dump(2) + "\n");
   }
   if (!a.output.empty() && a.output != "-") {
      std::cout << gsem::to_string(rep.status) << " after " << rep.iterations
                << " iterations, relative residual " << rep.final_relative_residual << "\n";
   }
   if (!rep.message.empty()) std::cerr << "gsem: " << rep.message << "\n";
   return gsem::exit_code(rep.status);
}

// ---------------------------------------------------------------- gen

struct GenArgs {
   std::string kind;
   std::uint64_t n = 32;
   double wx = 20.0, wy = 10.0;
   std::string output;
};

int run_gen(const GenArgs& a)
{
   gsem::CsrMatrixF64 m;
   if (a.kind == "poisson") {
      m = gsem::gallery::poisson2d(a.n);
   } else if (a.kind == "convdiff") {
      m = gsem::gallery::convection_diffusion(a.n, a.wx, a.wy);
   } else if (a.kind == "stall") {
      m = gsem::gallery::head_stall(a.n);
   } else {
      m = gsem::gallery::identity(a.n);
   }
   std::ostringstream out;
   gsem::write_matrix_market(out, m);
   write_output(a.output, out.str());
   return 0;
}

} // namespace

int main(int argc, char** argv)
{
   gsem::apply_thread_env();

   CLI::App app{"GSE-SEM sparse matrix toolkit"};
   app.require_subcommand(1);
   app.set_config("--config", "", "key=value settings, keys prefixed by subcommand (solve.tol=1e-8)");
   app.allow_config_extras(false);

   std::vector<std::string> format_list;
   for (const auto& [name, f] : format_names) format_list.push_back(name);

   AnalyzeArgs analyze;
   auto* an = app.add_subcommand("analyze", "entropy and top-k exponent coverage of a matrix");
   an->fallthrough();
   an->add_option("matrix", analyze.path, "Matrix Market or .gsem file")->required();
   an->add_option("-o,--output", analyze.output, "report file (default stdout)");
   an->add_option("--report-format", analyze.report_format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
   an->add_option("--k-list", analyze.ks, "k values for top-k coverage")->delimiter(',')->capture_default_str();
   an->add_option("--k-max", analyze.k_max, "table size for the recommended table")->capture_default_str();

   ConvertArgs convert;
   auto* cv = app.add_subcommand("convert", "convert a Matrix Market file to GSEM");
   cv->fallthrough();
   cv->add_option("matrix", convert.path)->required();
   cv->add_option("-o,--output", convert.output, "GSEM output file")->required();
   cv->add_option("--k", convert.k, "shared exponent table size")->capture_default_str();
   cv->add_option("--sample-block", convert.sample_block, "sample one row per block of this many rows (0 = full scan)")
      ->capture_default_str();
   cv->add_option("--seed", convert.seed)->capture_default_str();

   SpmvArgs spmv;
   auto* sp = app.add_subcommand("spmv", "benchmark SpMV with x = ones against FP64");
   sp->fallthrough();
   sp->add_option("matrix", spmv.path)->required();
   sp->add_option("-o,--output", spmv.output, "CSV file (default stdout)");
   sp->add_option("--format", spmv.formats, "one or more formats (default all)")
      ->delimiter(',')
      ->check(CLI::IsMember(format_list));
   sp->add_option("--repeats", spmv.repeats)->capture_default_str();
   sp->add_option("--k", spmv.k)->capture_default_str();

   SolveArgs solve;
   auto* so = app.add_subcommand("solve", "solve A x = b with CG or GMRES");
   so->fallthrough();
   so->add_option("matrix", solve.path)->required();
   so->add_option("-o,--output", solve.output, "report file (default stdout)");
   so->add_option("--report-format", solve.report_format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
   so->add_option("--rhs", solve.rhs, "right-hand side file, whitespace separated (default A * ones)");
   so->add_option("--solver", solve.solver)->check(CLI::IsMember({"cg", "gmres"}));
   so->add_option("--format", solve.format, "matrix storage (default fp64, gse-head when stepped)")
      ->check(CLI::IsMember(format_list));
   so->add_flag("--stepped", solve.stepped, "start head-only and escalate on stalls");
   so->add_option("--tol", solve.tol);
   so->add_option("--max-iters", solve.max_iters);
   so->add_option("--restart", solve.restart);
   so->add_option("--l", solve.l, "iterations before the first precision check");
   so->add_option("--t", solve.t, "residual history length");
   so->add_option("--m", solve.m, "check period");
   so->add_option("--rsd-limit", solve.rsd_limit);
   so->add_option("--ndec-limit", solve.n_dec_limit);
   so->add_option("--reldec-limit", solve.rel_dec_limit);
   so->add_option("--k", solve.k)->capture_default_str();
   so->add_option("--sample-block", solve.sample_block)->capture_default_str();
   so->add_option("--seed", solve.seed)->capture_default_str();
   so->add_flag("--timings", solve.timings, "include wall time in the report");
   so->add_flag("--history", solve.history, "include the per-iteration residual history");
   so->add_flag("--solution", solve.solution, "include x in the report");
   so->add_option("--fp16-time", solve.fp16_time, "measured FP16 run time in seconds, for the projected time");
   so->add_option("--fp16-iters", solve.fp16_iters, "iterations of that FP16 run");

   GenArgs gen;
   auto* ge = app.add_subcommand("gen", "write a test matrix in Matrix Market format");
   ge->fallthrough();
   ge->add_option("kind", gen.kind)->required()->check(CLI::IsMember({"poisson", "convdiff", "stall", "identity"}));
   ge->add_option("--n", gen.n, "grid size (matrix dimension for stall and identity)")->capture_default_str();
   ge->add_option("--wx", gen.wx)->capture_default_str();
   ge->add_option("--wy", gen.wy)->capture_default_str();
   ge->add_option("-o,--output", gen.output, "output file (default stdout)");

   try {
      app.parse(argc, argv);
   } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 1;
   }

   try {
      if (*an) return run_analyze(analyze);
      if (*cv) return run_convert(convert);
      if (*sp) return run_spmv(spmv);
      if (*so) return run_solve(solve);
      if (*ge) return run_gen(gen);
   } catch (const std::exception& e) {
      std::cerr << "gsem: " << e.what() << "\n";
      return 1;
   }
   return 1;
}
