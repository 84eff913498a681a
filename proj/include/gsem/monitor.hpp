#pragma once

// Residual-history metrics that decide when a stepped solver reads more
// mantissa segments.
//
// The monitor keeps the last t + 1 relative residuals resid[j - t .. j]. At a
// check point it evaluates
//   RSD    = stddev(resid[j - t .. j - 1]) / mean(...)    (population stddev)
//   nDec   = #{ i in [j - t, j - 1] : resid[i] > resid[i + 1] }
//   relDec = (resid[j - t] - resid[j - 1]) / resid[j - t]
// and asks for more precision when any of
//   (1) RSD > rsd_limit    && nDec <  n_dec_limit
//   (2) nDec >= n_dec_limit && relDec < rel_dec_limit
//   (3) nDec == 0
// holds.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsem/error.hpp"
#include "gsem/fpcodec.hpp"

namespace gsem {

struct MonitorParams {
   std::uint64_t l = 9000; // iterations before the first check
   std::uint64_t t = 300;  // history length
   std::uint64_t m = 1500; // check period
   double rsd_limit = 0.03;
   std::uint64_t n_dec_limit = 80;
   double rel_dec_limit = 0.08;

   static MonitorParams gmres_defaults() { return {9000, 300, 1500, 0.03, 80, 0.08}; }
   static MonitorParams cg_defaults() { return {3000, 250, 500, 0.50, 130, 0.45}; }

   void validate() const
   {
      if (t < 2) throw config_error("monitor history t must be >= 2");
      if (m < 1) throw config_error("monitor period m must be >= 1");
      if (!(rsd_limit >= 0) || !std::isfinite(rsd_limit)) throw config_error("rsd_limit must be finite and >= 0");
      if (!std::isfinite(rel_dec_limit)) throw config_error("rel_dec_limit must be finite");
   }

   friend bool operator==(const MonitorParams&, const MonitorParams&) = default;
};

inline double rsd(std::span<const double> window)
{
   if (window.size() < 2) throw error("rsd needs at least two residuals");
   const auto n = static_cast<double>(window.size());
   double mean = 0.0;
   for (double r : window) mean += r;
   mean /= n;
   if (mean < 1e-300) return 0.0;
   double var = 0.0;
   for (double r : window) var += (r - mean) * (r - mean);
   return std::sqrt(var / n) / mean;
}

// Strict decreases between consecutive residuals; ties do not count.
inline std::uint64_t n_dec(std::span<const double> window)
{
   if (window.size() < 2) throw error("n_dec needs at least two residuals");
   std::uint64_t count = 0;
   for (std::size_t i = 0; i + 1 < window.size(); ++i) {
      if (window[i] > window[i + 1]) ++count;
   }
   return count;
}

// Relative drop from the first to the last residual of the window; empty when
// the first residual is zero (nothing left to decrease).
inline std::optional<double> rel_dec(std::span<const double> window)
{
   if (window.empty()) throw error("rel_dec needs a residual window");
   if (!(window.front() > 0)) return std::nullopt;
   return (window.front() - window.back()) / window.front();
}

struct SwitchMetrics {
   double rsd = 0;
   std::uint64_t n_dec = 0;
   std::optional<double> rel_dec;
   bool condition1 = false;
   bool condition2 = false;
   bool condition3 = false;

   bool escalate() const noexcept { return condition1 || condition2 || condition3; }
};

// window = resid[j - t .. j] (t + 1 values, oldest first).
inline SwitchMetrics evaluate_switch(std::span<const double> window, const MonitorParams& p)
{
   if (window.size() != p.t + 1) throw error("switch window must hold t + 1 residuals");
   const auto history = window.first(p.t);
   SwitchMetrics s;
   s.rsd = rsd(history);
   s.n_dec = n_dec(window);
   s.rel_dec = rel_dec(history);
   if (!s.rel_dec) return s; // converged window, nothing to decide
   s.condition1 = s.rsd > p.rsd_limit && s.n_dec < p.n_dec_limit;
   s.condition2 = s.n_dec >= p.n_dec_limit && *s.rel_dec < p.rel_dec_limit;
   s.condition3 = s.n_dec == 0;
   return s;
}

class ResidualMonitor {
public:
   explicit ResidualMonitor(MonitorParams params) : params_(params), ring_(params.t + 1)
   {
      params_.validate();
   }

   const MonitorParams& params() const noexcept { return params_; }

   void push(double residual)
   {
      ring_[next_] = residual;
      next_ = (next_ + 1) % ring_.size();
      if (count_ < ring_.size()) ++count_;
   }

   bool full() const noexcept { return count_ == ring_.size(); }

   bool is_check_point(std::uint64_t iteration) const noexcept
   {
      return full() && iteration >= params_.l && (iteration - params_.l) % params_.m == 0;
   }

   // Oldest first.
   std::vector<double> window() const
   {
      std::vector<double> w;
      w.reserve(count_);
      const auto start = full() ? next_ : 0;
      for (std::size_t i = 0; i < count_; ++i) w.push_back(ring_[(start + i) % ring_.size()]);
      return w;
   }

   SwitchMetrics metrics() const
   {
      if (!full()) throw error("residual window not full");
      const auto w = window();
      return evaluate_switch(w, params_);
   }

private:
   MonitorParams params_;
   std::vector<double> ring_;
   std::size_t next_ = 0;
   std::size_t count_ = 0;
};

inline bool should_escalate(const ResidualMonitor& monitor, std::uint64_t iteration)
{
   if (!monitor.is_check_point(iteration)) return false;
   return monitor.metrics().escalate();
}

struct SwitchEvent {
   std::uint64_t iteration = 0;
   PrecisionLevel level = PrecisionLevel::HeadOnly;

   friend bool operator==(const SwitchEvent&, const SwitchEvent&) = default;
};

// Precision tag of a stepped run; only ever moves up, one level at a time.
struct SteppedState {
   PrecisionLevel tag = PrecisionLevel::HeadOnly;
   std::vector<SwitchEvent> switch_log;

   bool at_top() const noexcept { return tag == PrecisionLevel::Full; }

   void escalate(std::uint64_t iteration)
   {
      if (at_top()) return;
      tag = static_cast<PrecisionLevel>(static_cast<std::uint8_t>(tag) + 1);
      switch_log.push_back({iteration, tag});
   }
};

} // namespace gsem
