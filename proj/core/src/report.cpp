#include "owl/report.hpp"

#include <fstream>
#include <ostream>

#include <json.hpp>

#include "owl/config.hpp"

namespace owl::report {

using config::format_double;
using nlohmann::ordered_json;

namespace {

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string join_flags(const std::vector<std::string>& flags) {
  std::string s;
  for (const auto& f : flags) {
    if (!s.empty()) s += ';';
    s += f;
  }
  return s;
}

// Quotes a CSV field when it contains a separator or quote.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace

std::string meta_record(const protocol::RunConfig& cfg, const std::string& command) {
  ordered_json j;
  j["record"] = "run";
  j["command"] = command;
  j["seed"] = cfg.seed;
  ordered_json c = ordered_json::object();
  for (const auto& key : config::known_keys()) c[key] = config::get_value(cfg, key);
  j["config"] = std::move(c);
  return j.dump();
}

std::string task_record(const eval::MetricsReport& r) {
  ordered_json j;
  j["record"] = "task";
  j["task_id"] = r.task_id;
  j["wi"] = opt(r.wi);
  j["a_ose"] = r.a_ose;
  j["map_prev"] = opt(r.map_prev);
  j["map_curr"] = opt(r.map_curr);
  j["map_both"] = opt(r.map_both);
  j["flags"] = r.flags;
  return j.dump();
}

std::string weibull_record(const energy::WeibullFit& fit, const std::string& side, int task_id) {
  ordered_json j;
  j["record"] = "weibull_fit";
  if (task_id > 0) j["task_id"] = task_id;
  if (!side.empty()) j["side"] = side;
  j["shape"] = fit.model.shape;
  j["scale"] = fit.model.scale;
  j["location"] = fit.model.location;
  j["log_likelihood"] = fit.log_likelihood;
  j["n_samples"] = fit.n_samples;
  j["iterations"] = fit.iterations;
  return j.dump();
}

std::string diagnostics_record(const protocol::TaskDiagnostics& d) {
  ordered_json j;
  j["record"] = "diagnostics";
  j["task_id"] = d.task_id;
  j["median_known_energy"] = opt(d.median_known_energy);
  j["median_unknown_energy"] = opt(d.median_unknown_energy);
  j["validation_balanced_accuracy"] = opt(d.validation_balanced_accuracy);
  j["exemplars"] = d.exemplars;
  j["train_epochs"] = d.train.epochs.size();
  j["finetune_epochs"] = d.finetune.epochs.size();
  return j.dump();
}

void write_run(const std::filesystem::path& dir, const protocol::RunConfig& cfg,
               const protocol::RunResult& result, const std::string& command) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "reports.jsonl", std::ios::binary);
    out << meta_record(cfg, command) << '\n';
    for (const auto& r : result.reports) out << task_record(r) << '\n';
    for (const auto& d : result.tasks) {
      out << diagnostics_record(d) << '\n';
      if (d.classifier) {
        out << weibull_record(d.classifier->known_fit, "known", d.task_id) << '\n';
        out << weibull_record(d.classifier->unknown_fit, "unknown", d.task_id) << '\n';
      }
    }
    if (!out) throw Error("failed writing " + (dir / "reports.jsonl").string());
  }
  {
    std::ofstream out(dir / "reports.csv", std::ios::binary);
    write_metrics_csv(out, result.reports);
  }
  {
    std::ofstream out(dir / "loss_trace.csv", std::ios::binary);
    write_loss_trace_csv(out, result);
  }
}

void write_metrics_csv(std::ostream& out, const std::vector<eval::MetricsReport>& reports) {
  out << "task_id,wi,a_ose,map_prev,map_curr,map_both,flags\n";
  for (const auto& r : reports) {
    out << r.task_id << ',' << opt_csv(r.wi) << ',' << r.a_ose << ',' << opt_csv(r.map_prev) << ','
        << opt_csv(r.map_curr) << ',' << opt_csv(r.map_both) << ',' << csv_field(join_flags(r.flags)) << '\n';
  }
}

void write_loss_trace_csv(std::ostream& out, const protocol::RunResult& result) {
  out << "task_id,phase,epoch,cross_entropy,contrastive,labelled_steps,unknown_steps,contrastive_steps,prototypes_complete\n";
  for (const auto& d : result.tasks) {
    auto emit = [&](const char* phase, const protocol::TrainTrace& trace) {
      for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
        const auto& s = trace.epochs[e];
        out << d.task_id << ',' << phase << ',' << e + 1 << ',' << format_double(s.mean_cross_entropy) << ',';
        if (s.contrastive_steps > 0) out << format_double(s.mean_contrastive);
        out << ',' << s.labelled_steps << ',' << s.unknown_steps << ',' << s.contrastive_steps << ','
            << (s.prototypes_complete ? 1 : 0) << '\n';
      }
    };
    emit("train", d.train);
    emit("finetune", d.finetune);
  }
}

std::string sweep_point_record(std::size_t index, const SweepPoint& point) {
  ordered_json j;
  j["record"] = "sweep_point";
  j["index"] = index;
  ordered_json axes = ordered_json::object();
  for (const auto& [k, v] : point.axes) axes[k] = v;
  j["axes"] = std::move(axes);
  j["status"] = point.result ? "ok" : "failed";
  if (!point.result) j["error"] = point.error;
  return j.dump();
}

void write_sweep_table(std::ostream& out, const std::vector<std::string>& axis_keys,
                       const std::vector<SweepPoint>& points) {
  for (const auto& k : axis_keys) out << csv_field(k) << ',';
  out << "task_id,wi,a_ose,map_prev,map_curr,map_both,flags,error\n";
  for (const auto& p : points) {
    std::string prefix;
    for (const auto& [k, v] : p.axes) prefix += csv_field(v) + ',';
    if (!p.result) {
      out << prefix << ",,,,,,," << csv_field(p.error) << '\n';
      continue;
    }
    for (const auto& r : p.result->reports) {
      out << prefix << r.task_id << ',' << opt_csv(r.wi) << ',' << r.a_ose << ',' << opt_csv(r.map_prev) << ','
          << opt_csv(r.map_curr) << ',' << opt_csv(r.map_both) << ',' << csv_field(join_flags(r.flags)) << ",\n";
    }
  }
}

}  // namespace owl::report
