#pragma once

// Report emission. Structured output is line-delimited JSON (one object per
// line, "record" names the kind); metrics and loss traces are also written as
// flat CSV tables for plotting.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "owl/protocol.hpp"
#include "owl/weibull.hpp"

namespace owl::report {

/// {"record":"run", "command", "seed", "config":{key: value, ...}}
std::string meta_record(const protocol::RunConfig& cfg, const std::string& command);
/// {"record":"task", task_id, wi, a_ose, map_prev, map_curr, map_both, flags}
std::string task_record(const eval::MetricsReport& report);
/// {"record":"weibull_fit", shape, scale, location, log_likelihood, n_samples, ...}
std::string weibull_record(const energy::WeibullFit& fit, const std::string& side, int task_id);
std::string diagnostics_record(const protocol::TaskDiagnostics& diag);

/// Writes reports.jsonl, reports.csv and loss_trace.csv into `dir`.
void write_run(const std::filesystem::path& dir, const protocol::RunConfig& cfg,
               const protocol::RunResult& result, const std::string& command = "run");

void write_metrics_csv(std::ostream& out, const std::vector<eval::MetricsReport>& reports);
void write_loss_trace_csv(std::ostream& out, const protocol::RunResult& result);

struct SweepPoint {
  std::vector<std::pair<std::string, std::string>> axes;  // key, value
  std::optional<protocol::RunResult> result;
  std::string error;  // set when the run failed
};

/// {"record":"sweep_point", "index", "axes":{key: value}, "status", "error"?}
std::string sweep_point_record(std::size_t index, const SweepPoint& point);

/// Long format: one row per (grid point, task); failed points get one row
/// with the error message and empty metrics.
void write_sweep_table(std::ostream& out, const std::vector<std::string>& axis_keys,
                       const std::vector<SweepPoint>& points);

}  // namespace owl::report
