#pragma once

// Unpreconditioned CG and restarted GMRES whose matrix products go through a
// precision-selectable operator. With stepping enabled the run starts on the
// head-only matrix and a ResidualMonitor raises the level (head -> head+tail1
// -> full) when residual progress stalls. Every vector operation is FP64.
//
// Convergence is only declared on the explicit residual ||b - A x|| / ||b||
// computed with the operator's full-precision matrix. CG checks it whenever
// the recurrence residual reaches tol and restarts from the true residual
// otherwise; GMRES recomputes it at every restart.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsem/csr.hpp"
#include "gsem/error.hpp"
#include "gsem/gse_csr.hpp"
#include "gsem/monitor.hpp"
#include "gsem/spmv.hpp"

namespace gsem {

template <class Op>
concept LinearOperator = requires(const Op& op, std::span<const double> x, std::span<double> y, PrecisionLevel p) {
   { op.rows() } -> std::convertible_to<std::uint64_t>;
   { op.cols() } -> std::convertible_to<std::uint64_t>;
   op.apply(x, y, p);
};

// Ignores the requested level: the matrix exists in one precision only.
class Fp64Operator {
public:
   explicit Fp64Operator(const CsrMatrixF64& m) : m_(&m) {}
   std::uint64_t rows() const noexcept { return m_->rows; }
   std::uint64_t cols() const noexcept { return m_->cols; }
   void apply(std::span<const double> x, std::span<double> y, PrecisionLevel) const { spmv_fp64(*m_, x, y); }

private:
   const CsrMatrixF64* m_;
};

class GseOperator {
public:
   explicit GseOperator(const GseCsrMatrix& m) : m_(&m) {}
   std::uint64_t rows() const noexcept { return m_->rows; }
   std::uint64_t cols() const noexcept { return m_->cols; }
   void apply(std::span<const double> x, std::span<double> y, PrecisionLevel level) const
   {
      spmv_gse(*m_, x, y, level);
   }

private:
   const GseCsrMatrix* m_;
};

class HalfOperator {
public:
   explicit HalfOperator(const HalfCsrMatrix& m) : m_(&m) {}
   std::uint64_t rows() const noexcept { return m_->rows; }
   std::uint64_t cols() const noexcept { return m_->cols; }
   void apply(std::span<const double> x, std::span<double> y, PrecisionLevel) const { spmv_half(*m_, x, y); }

private:
   const HalfCsrMatrix* m_;
};

enum class SolverKind : std::uint8_t { CG, GMRES };

inline const char* to_string(SolverKind k) { return k == SolverKind::CG ? "cg" : "gmres"; }

struct SolverConfig {
   SolverKind kind = SolverKind::GMRES;
   double tol = 1e-6;
   std::uint64_t max_iters = 15000; // CG iterations, or GMRES inner iterations (restart x max outer)
   unsigned restart = 30;
   bool stepped = false;
   PrecisionLevel fixed_level = PrecisionLevel::Full; // used when not stepped
   MonitorParams monitor = MonitorParams::gmres_defaults();

   static SolverConfig defaults(SolverKind kind)
   {
      SolverConfig c;
      c.kind = kind;
      if (kind == SolverKind::CG) {
         c.max_iters = 5000;
         c.monitor = MonitorParams::cg_defaults();
      } else {
         c.max_iters = 30 * 500;
         c.monitor = MonitorParams::gmres_defaults();
      }
      return c;
   }

   void validate() const
   {
      if (!(tol > 0) || !std::isfinite(tol)) throw config_error("tol must be a positive finite number");
      if (max_iters < 1) throw config_error("max_iters must be >= 1");
      if (restart < 1) throw config_error("restart must be >= 1");
      monitor.validate();
   }
};

enum class SolveStatus : std::uint8_t { Converged, MaxIterations, Breakdown, NonFinite };

inline const char* to_string(SolveStatus s)
{
   switch (s) {
   case SolveStatus::Converged: return "converged";
   case SolveStatus::MaxIterations: return "max_iterations";
   case SolveStatus::Breakdown: return "breakdown";
   case SolveStatus::NonFinite: return "non_finite";
   }
   return "?";
}

// Process exit code for a solve outcome.
inline int exit_code(SolveStatus s)
{
   switch (s) {
   case SolveStatus::Converged: return 0;
   case SolveStatus::MaxIterations: return 2;
   default: return 3;
   }
}

struct SolveReport {
   SolverKind solver = SolverKind::GMRES;
   SolveStatus status = SolveStatus::MaxIterations;
   bool converged = false;
   std::uint64_t iterations = 0;
   double final_relative_residual = 0;     // explicit, full-precision operator
   double estimated_relative_residual = 0; // last value fed to the monitor
   std::vector<SwitchEvent> switch_log;
   std::uint64_t iterations_per_level[3] = {0, 0, 0};
   std::uint64_t explicit_residual_checks = 0;
   std::uint64_t restarts = 0;
   double wall_time_s = 0;
   std::optional<double> projected_time_s;
   std::string message;
   std::vector<double> residual_history; // one entry per iteration
   std::vector<double> x;
};

// Time estimate for a run of iters_gse iterations at the per-iteration cost
// of a measured FP16 run.
inline double project_hw_time(double time_fp16, std::uint64_t iters_fp16, std::uint64_t iters_gse)
{
   if (iters_fp16 == 0) throw error("projection needs a non-zero FP16 iteration count");
   return time_fp16 / static_cast<double>(iters_fp16) * static_cast<double>(iters_gse);
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b)
{
   double s = 0.0;
   for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
   return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a)
{
   return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

template <LinearOperator Op>
double explicit_residual(const Op& op, std::span<const double> b, std::span<const double> x, std::vector<double>& r)
{
   r.resize(b.size());
   op.apply(x, r, PrecisionLevel::Full);
   for (std::size_t i = 0; i < b.size(); ++i) r[i] = b[i] - r[i];
   return norm2(r);
}

class Stepper {
public:
   explicit Stepper(const SolverConfig& config)
      : enabled_(config.stepped), monitor_(config.monitor)
   {
      if (!enabled_) state_.tag = config.fixed_level;
   }

   PrecisionLevel level() const noexcept { return state_.tag; }

   // Records the residual of `iteration`; escalates at check points.
   void observe(std::uint64_t iteration, double residual)
   {
      if (!enabled_ || state_.at_top()) return;
      monitor_.push(residual);
      if (should_escalate(monitor_, iteration)) state_.escalate(iteration);
   }

   const std::vector<SwitchEvent>& log() const noexcept { return state_.switch_log; }

private:
   bool enabled_;
   ResidualMonitor monitor_;
   SteppedState state_;
};

inline void validate_system(std::uint64_t rows, std::uint64_t cols, std::span<const double> b)
{
   if (rows != cols) throw dimension_error("solver needs a square matrix");
   if (b.size() != rows) throw dimension_error("right-hand side length does not match the matrix");
   if (!all_finite(b)) throw error("right-hand side contains non-finite values");
}

inline void count_level(SolveReport& r, PrecisionLevel level) { ++r.iterations_per_level[static_cast<int>(level) - 1]; }

} // namespace detail

template <LinearOperator Op>
SolveReport cg_solve(const Op& op, std::span<const double> b, const SolverConfig& config)
{
   config.validate();
   detail::validate_system(op.rows(), op.cols(), b);
   const auto start = std::chrono::steady_clock::now();
   const auto n = b.size();

   SolveReport rep;
   rep.solver = SolverKind::CG;
   rep.x.assign(n, 0.0);
   auto& x = rep.x;
   std::vector<double> r(b.begin(), b.end()), p(r), ap(n), r_true;
   const double bnorm = detail::norm2(b);
   detail::Stepper stepper(config);

   auto finish = [&](SolveStatus status) {
      if (bnorm == 0.0) {
         rep.final_relative_residual = 0.0;
      } else if (status == SolveStatus::Converged) {
         // already the explicit value
      } else if (detail::all_finite(x)) {
         rep.final_relative_residual = detail::explicit_residual(op, b, x, r_true) / bnorm;
         ++rep.explicit_residual_checks;
      } else {
         rep.final_relative_residual = std::numeric_limits<double>::infinity();
      }
      rep.status = status;
      rep.converged = status == SolveStatus::Converged;
      rep.switch_log = stepper.log();
      rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return rep;
   };

   if (bnorm == 0.0) return finish(SolveStatus::Converged);

   double rr = detail::dot(r, r);
   for (std::uint64_t k = 1; k <= config.max_iters; ++k) {
      const auto level = stepper.level();
      op.apply(p, ap, level);
      detail::count_level(rep, level);
      rep.iterations = k;

      const double pap = detail::dot(p, ap);
      if (!std::isfinite(pap)) {
         rep.message = "non-finite value in iteration " + std::to_string(k);
         return finish(SolveStatus::NonFinite);
      }
      if (pap <= 0.0) {
         rep.message = "breakdown: p'Ap <= 0 in iteration " + std::to_string(k);
         return finish(SolveStatus::Breakdown);
      }
      const double alpha = rr / pap;
      for (std::size_t i = 0; i < n; ++i) {
         x[i] += alpha * p[i];
         r[i] -= alpha * ap[i];
      }
      double rr_new = detail::dot(r, r);
      const double rel = std::sqrt(rr_new) / bnorm;
      if (!std::isfinite(rel)) {
         rep.message = "non-finite residual in iteration " + std::to_string(k);
         return finish(SolveStatus::NonFinite);
      }
      rep.residual_history.push_back(rel);
      rep.estimated_relative_residual = rel;

      if (rel <= config.tol) {
         const double true_rel = detail::explicit_residual(op, b, x, r_true) / bnorm;
         ++rep.explicit_residual_checks;
         if (true_rel <= config.tol) {
            rep.final_relative_residual = true_rel;
            return finish(SolveStatus::Converged);
         }
         // Recurrence drifted from the full-precision residual: restart from it.
         r = r_true;
         p = r;
         rr = detail::dot(r, r);
         stepper.observe(k, rel);
         continue;
      }
      stepper.observe(k, rel);
      const double beta = rr_new / rr;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
      rr = rr_new;
   }
   return finish(SolveStatus::MaxIterations);
}

template <LinearOperator Op>
SolveReport gmres_solve(const Op& op, std::span<const double> b, const SolverConfig& config)
{
   config.validate();
   detail::validate_system(op.rows(), op.cols(), b);
   const auto start = std::chrono::steady_clock::now();
   const auto n = b.size();
   const unsigned restart = config.restart;

   SolveReport rep;
   rep.solver = SolverKind::GMRES;
   rep.x.assign(n, 0.0);
   auto& x = rep.x;
   const double bnorm = detail::norm2(b);
   detail::Stepper stepper(config);

   std::vector<std::vector<double>> v(restart + 1, std::vector<double>(n));
   std::vector<double> h((restart + 1) * restart, 0.0); // column-major, ld = restart + 1
   std::vector<double> cs(restart), sn(restart), g(restart + 1), y(restart), r(b.begin(), b.end()), w(n);
   auto H = [&](unsigned i, unsigned j) -> double& { return h[j * (restart + 1) + i]; };

   auto finish = [&](SolveStatus status, double rel) {
      rep.final_relative_residual = rel;
      rep.status = status;
      rep.converged = status == SolveStatus::Converged;
      rep.switch_log = stepper.log();
      rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return rep;
   };

   if (bnorm == 0.0) return finish(SolveStatus::Converged, 0.0);

   std::uint64_t total = 0;
   bool first_cycle = true;
   for (;;) {
      // x0 = 0 gives r = b exactly; later cycles recompute the true residual.
      double beta;
      if (first_cycle) {
         beta = bnorm;
      } else {
         beta = detail::explicit_residual(op, b, x, r);
         ++rep.explicit_residual_checks;
      }
      const double rel = beta / bnorm;
      if (!std::isfinite(rel)) {
         rep.message = "non-finite residual at restart";
         return finish(SolveStatus::NonFinite, std::numeric_limits<double>::infinity());
      }
      if (rel <= config.tol) return finish(SolveStatus::Converged, rel);
      if (total >= config.max_iters) return finish(SolveStatus::MaxIterations, rel);
      if (!first_cycle) ++rep.restarts;
      first_cycle = false;

      for (std::size_t i = 0; i < n; ++i) v[0][i] = r[i] / beta;
      std::fill(g.begin(), g.end(), 0.0);
      g[0] = beta;

      unsigned k = 0; // columns in this cycle
      while (k < restart && total < config.max_iters) {
         const unsigned j = k;
         const auto level = stepper.level();
         op.apply(v[j], w, level);
         detail::count_level(rep, level);
         ++total;
         rep.iterations = total;

         const double w_norm = detail::norm2(w);
         for (unsigned i = 0; i <= j; ++i) {
            H(i, j) = detail::dot(w, v[i]);
            for (std::size_t q = 0; q < n; ++q) w[q] -= H(i, j) * v[i][q];
         }
         H(j + 1, j) = detail::norm2(w);
         if (!std::isfinite(H(j + 1, j)) || !std::isfinite(w_norm)) {
            rep.message = "non-finite value in iteration " + std::to_string(total);
            return finish(SolveStatus::NonFinite, std::numeric_limits<double>::infinity());
         }
         const bool breakdown = H(j + 1, j) <= 1e-14 * w_norm;
         if (!breakdown) {
            for (std::size_t q = 0; q < n; ++q) v[j + 1][q] = w[q] / H(j + 1, j);
         }

         for (unsigned i = 0; i < j; ++i) {
            const double a = H(i, j);
            const double c = H(i + 1, j);
            H(i, j) = cs[i] * a + sn[i] * c;
            H(i + 1, j) = -sn[i] * a + cs[i] * c;
         }
         const double a = H(j, j);
         const double c = breakdown ? 0.0 : H(j + 1, j);
         const double den = std::hypot(a, c);
         // A vanished column leaves the residual untouched: rotate g[j] into g[j + 1].
         cs[j] = den == 0.0 ? 0.0 : a / den;
         sn[j] = den == 0.0 ? 1.0 : c / den;
         H(j, j) = cs[j] * a + sn[j] * c;
         H(j + 1, j) = 0.0;
         g[j + 1] = -sn[j] * g[j];
         g[j] = cs[j] * g[j];
         k = j + 1;

         const double est = std::fabs(g[j + 1]) / bnorm;
         rep.residual_history.push_back(est);
         rep.estimated_relative_residual = est;
         stepper.observe(total, est);
         if (est <= config.tol || breakdown) break;
      }

      // Back substitution; columns with a vanished pivot contribute nothing.
      for (int i = static_cast<int>(k) - 1; i >= 0; --i) {
         double s = g[i];
         for (unsigned q = i + 1; q < k; ++q) s -= H(i, q) * y[q];
         y[i] = H(i, i) != 0.0 ? s / H(i, i) : 0.0;
      }
      for (unsigned i = 0; i < k; ++i) {
         for (std::size_t q = 0; q < n; ++q) x[q] += y[i] * v[i][q];
      }
   }
}

template <LinearOperator Op>
SolveReport solve(const Op& op, std::span<const double> b, const SolverConfig& config)
{
   return config.kind == SolverKind::CG ? cg_solve(op, b, config) : gmres_solve(op, b, config);
}

// Runs the configured solver starting from the head-only matrix with
// monitor-driven escalation.
inline SolveReport stepped_solve(const GseCsrMatrix& a, std::span<const double> b, SolverConfig config)
{
   config.stepped = true;
   return solve(GseOperator(a), b, config);
}

} // namespace gsem
