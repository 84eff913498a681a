#pragma once

// JSON and CSV renderings of analysis, benchmark and solve results.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gsem/analysis.hpp"
#include "gsem/solvers.hpp"

namespace gsem {

namespace detail {

// Shortest round-trip text for a double; "inf"/"nan" for non-finite values.
inline std::string number_text(double v)
{
   if (std::isnan(v)) return "nan";
   if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
   std::ostringstream os;
   os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
   return os.str();
}

inline nlohmann::json number_json(double v)
{
   if (std::isfinite(v)) return v;
   return number_text(v);
}

} // namespace detail

inline nlohmann::json to_json(const SharedExponentTable& t)
{
   return {{"k_max", t.k_max()}, {"ei_bits", t.ei_bits()}, {"entries", t.entries()}};
}

inline nlohmann::json to_json(const AnalysisReport& r)
{
   nlohmann::json hist = nlohmann::json::array();
   for (const auto& [e, c] : r.census.counts) hist.push_back({{"exponent", e}, {"count", c}});
   nlohmann::json cov = nlohmann::json::array();
   for (const auto& [k, v] : r.coverage) cov.push_back({{"k", k}, {"coverage", v}});
   return {
      {"rows", r.rows},
      {"cols", r.cols},
      {"nnz", r.nnz},
      {"entropy", {{"value", r.entropy.value}, {"exponent", r.entropy.exponent}, {"mantissa", r.entropy.mantissa}}},
      {"zero_or_subnormal", r.census.zero_or_subnormal},
      {"non_finite", r.census.non_finite},
      {"exponent_histogram", hist},
      {"topk_coverage", cov},
      {"recommended_table", to_json(r.recommended_table)},
      {"recommended_table_coverage", r.recommended_table_coverage},
   };
}

// Columns: metric,k,value. k is empty for metrics that do not depend on it.
inline std::string to_csv(const AnalysisReport& r)
{
   std::ostringstream os;
   auto row = [&](const std::string& metric, const std::string& k, double v) {
      os << metric << ',' << k << ',' << detail::number_text(v) << '\n';
   };
   os << "metric,k,value\n";
   row("nnz", "", static_cast<double>(r.nnz));
   row("entropy_value", "", r.entropy.value);
   row("entropy_exponent", "", r.entropy.exponent);
   row("entropy_mantissa", "", r.entropy.mantissa);
   row("zero_or_subnormal", "", static_cast<double>(r.census.zero_or_subnormal));
   for (const auto& [k, v] : r.coverage) row("topk_coverage", std::to_string(k), v);
   row("recommended_table_coverage", std::to_string(r.k_max), r.recommended_table_coverage);
   return os.str();
}

inline nlohmann::json to_json(const MonitorParams& p)
{
   return {{"l", p.l}, {"t", p.t}, {"m", p.m}, {"rsd_limit", p.rsd_limit}, {"ndec_limit", p.n_dec_limit},
           {"reldec_limit", p.rel_dec_limit}};
}

inline nlohmann::json to_json(const SolverConfig& c)
{
   return {{"solver", to_string(c.kind)}, {"tol", c.tol},       {"max_iters", c.max_iters},
           {"restart", c.restart},        {"stepped", c.stepped}, {"fixed_level", to_string(c.fixed_level)},
           {"monitor", to_json(c.monitor)}};
}

struct ReportOptions {
   bool timings = false;
   bool history = false;
   bool solution = false;
};

inline nlohmann::json to_json(const SolveReport& r, const ReportOptions& opt = {})
{
   nlohmann::json log = nlohmann::json::array();
   for (const auto& e : r.switch_log) {
      log.push_back({{"iteration", e.iteration}, {"level", static_cast<int>(e.level)}, {"name", to_string(e.level)}});
   }
   nlohmann::json j = {
      {"solver", to_string(r.solver)},
      {"status", to_string(r.status)},
      {"converged", r.converged},
      {"iterations", r.iterations},
      {"final_relative_residual", detail::number_json(r.final_relative_residual)},
      {"estimated_relative_residual", detail::number_json(r.estimated_relative_residual)},
      {"switch_log", log},
      {"iterations_per_level",
       {{"head", r.iterations_per_level[0]}, {"head+tail1", r.iterations_per_level[1]}, {"full", r.iterations_per_level[2]}}},
      {"explicit_residual_checks", r.explicit_residual_checks},
      {"restarts", r.restarts},
      {"message", r.message},
   };
   if (opt.timings) j["wall_time_s"] = r.wall_time_s;
   if (r.projected_time_s) j["projected_time_s"] = *r.projected_time_s;
   if (opt.history) {
      nlohmann::json h = nlohmann::json::array();
      for (double v : r.residual_history) h.push_back(detail::number_json(v));
      j["residual_history"] = h;
   }
   if (opt.solution) j["x"] = r.x;
   return j;
}

inline std::string solve_csv_header(bool timings)
{
   return std::string("solver,status,converged,iterations,final_relative_residual,switches,head_iters,ht1_iters,full_iters") +
          (timings ? ",wall_time_s" : "") + "\n";
}

inline std::string to_csv_line(const SolveReport& r, bool timings)
{
   std::ostringstream os;
   std::string switches;
   for (const auto& e : r.switch_log) {
      if (!switches.empty()) switches += ';';
      switches += std::to_string(e.iteration) + ':' + std::to_string(static_cast<int>(e.level));
   }
   os << to_string(r.solver) << ',' << to_string(r.status) << ',' << (r.converged ? 1 : 0) << ',' << r.iterations << ','
      << detail::number_text(r.final_relative_residual) << ',' << switches << ',' << r.iterations_per_level[0] << ','
      << r.iterations_per_level[1] << ',' << r.iterations_per_level[2];
   if (timings) os << ',' << detail::number_text(r.wall_time_s);
   os << '\n';
   return os.str();
}

struct BenchRow {
   std::string matrix;
   std::string format;
   std::uint64_t nnz = 0;
   std::string level; // empty for non-GSE formats
   std::uint64_t repeats = 0;
   double median_ns = 0;
   double mean_ns = 0;
   double gflops = 0;
   double max_abs_err = 0;
};

inline std::string bench_csv_header() { return "matrix,format,nnz,level,repeats,median-ns,gflops,max_abs_err,mean-ns\n"; }

inline std::string to_csv_line(const BenchRow& b)
{
   std::ostringstream os;
   os << b.matrix << ',' << b.format << ',' << b.nnz << ',' << b.level << ',' << b.repeats << ','
      << detail::number_text(b.median_ns) << ',' << detail::number_text(b.gflops) << ','
      << detail::number_text(b.max_abs_err) << ',' << detail::number_text(b.mean_ns) << '\n';
   return os.str();
}

} // namespace gsem
