#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "owl/config.hpp"
#include "owl/dataset_io.hpp"
#include "owl/protocol.hpp"
#include "owl/report.hpp"
#include "owl/weibull.hpp"

namespace owl::cli {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "owl-out";
  std::vector<std::string> overrides;
};

protocol::RunConfig resolve_config(const GlobalOptions& g) {
  protocol::RunConfig cfg = g.config_path.empty() ? protocol::RunConfig{} : config::load_config(g.config_path);
  for (const auto& o : g.overrides) config::apply_override(cfg, o);
  if (g.seed) cfg.seed = *g.seed;
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw config::ConfigError("", e.what());
  }
  return cfg;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  return f;
}

int cmd_run(const GlobalOptions& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  const auto result = protocol::run_open_world(cfg);
  report::write_run(g.out_dir, cfg, result, "run");
  for (const auto& r : result.reports) out << report::task_record(r) << '\n';
  return kExitOk;
}

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

SweepAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw config::ConfigError(text, "sweep '" + text + "' is not key=v1,v2,...");
  SweepAxis axis;
  axis.key = text.substr(0, eq);
  std::stringstream ss(text.substr(eq + 1));
  std::string v;
  while (std::getline(ss, v, ',')) {
    if (!v.empty()) axis.values.push_back(v);
  }
  if (axis.values.empty()) throw config::ConfigError(axis.key, "sweep over '" + axis.key + "' has an empty value list");
  return axis;
}

int cmd_sweep(const GlobalOptions& g, const std::vector<std::string>& specs, std::size_t jobs, std::ostream& out) {
  const auto base = resolve_config(g);
  if (specs.empty() || specs.size() > 2) {
    throw config::ConfigError("", "sweep needs one or two --sweep axes");
  }
  std::vector<SweepAxis> axes;
  for (const auto& s : specs) {
    axes.push_back(parse_axis(s));
    protocol::RunConfig probe = base;
    for (const auto& v : axes.back().values) config::set_value(probe, axes.back().key, v);  // reject bad keys early
  }
  if (axes.size() == 2 && axes[0].key == axes[1].key) {
    throw config::ConfigError(axes[0].key, "sweep axes must differ");
  }

  std::vector<report::SweepPoint> points;
  for (const auto& v0 : axes[0].values) {
    if (axes.size() == 1) {
      points.push_back({{{axes[0].key, v0}}, std::nullopt, {}});
      continue;
    }
    for (const auto& v1 : axes[1].values) points.push_back({{{axes[0].key, v0}, {axes[1].key, v1}}, std::nullopt, {}});
  }

  // Each grid point is an independent run; results land in their own slot.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      auto& p = points[i];
      try {
        protocol::RunConfig cfg = base;
        for (const auto& [k, v] : p.axes) config::set_value(cfg, k, v);
        p.result = protocol::run_open_world(cfg);
      } catch (const std::exception& e) {
        p.error = e.what();
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, points.size());
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < jobs; ++i) pool.emplace_back(worker);
    worker();
  }

  fs::create_directories(g.out_dir);
  std::vector<std::string> keys;
  for (const auto& a : axes) keys.push_back(a.key);
  {
    auto csv = open_out(fs::path(g.out_dir) / "sweep.csv");
    report::write_sweep_table(csv, keys, points);
  }
  auto jsonl = open_out(fs::path(g.out_dir) / "sweep.jsonl");
  jsonl << report::meta_record(base, "sweep") << '\n';
  std::size_t failed = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    jsonl << report::sweep_point_record(i, points[i]) << '\n';
    if (!points[i].result) {
      ++failed;
      continue;
    }
    for (const auto& r : points[i].result->reports) jsonl << report::task_record(r) << '\n';
  }
  report::write_sweep_table(out, keys, points);
  return failed == 0 ? kExitOk : kExitRuntime;
}

int cmd_fit_weibull(const GlobalOptions& g, const std::string& file, std::ostream& out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw io::SchemaError("cannot read '" + file + "'");
  const auto samples = io::read_samples(in);
  const auto fit = energy::fit_shifted_weibull(samples);
  const std::string rec = report::weibull_record(fit, "", 0);
  out << rec << '\n';
  fs::create_directories(g.out_dir);
  open_out(fs::path(g.out_dir) / "weibull.jsonl") << rec << '\n';
  return kExitOk;
}

int cmd_eval(const GlobalOptions& g, const std::string& dets_file, const std::string& gts_file, std::ostream& out) {
  const auto cfg = resolve_config(g);
  const auto schedule = protocol::TaskSchedule::contiguous(cfg.world.num_tasks, cfg.world.classes_per_task);
  const auto dets = io::read_dataset_file(dets_file);
  const auto gts = io::read_dataset_file(gts_file);
  int task_id = 0;
  const eval::EvalSet set = io::to_eval_set(dets, gts, schedule, task_id);
  const auto t = static_cast<std::size_t>(task_id);
  const auto report = eval::evaluate_task(task_id, set, schedule.known_after(t - 1), schedule.task_classes(t), cfg.eval);
  const std::string rec = report::task_record(report);
  out << rec << '\n';
  fs::create_directories(g.out_dir);
  {
    auto f = open_out(fs::path(g.out_dir) / "metrics.jsonl");
    f << report::meta_record(cfg, "eval") << '\n' << rec << '\n';
  }
  auto csv = open_out(fs::path(g.out_dir) / "metrics.csv");
  report::write_metrics_csv(csv, {report});
  return kExitOk;
}

int cmd_gen_world(const GlobalOptions& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  const auto world = protocol::generate_world(cfg.resolved_world());
  io::export_world(world, g.out_dir);
  open_out(fs::path(g.out_dir) / "world.jsonl") << report::meta_record(cfg, "gen-world") << '\n';
  std::size_t train = 0;
  for (const auto& t : world.train) train += t.size();
  out << "world: " << train << " train, " << world.validation.size() << " validation, " << world.test.size()
      << " test images -> " << g.out_dir << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-world detection toolkit on a synthetic world"};
  app.name("owl");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Config file (section/key = value)");
  app.add_option("--seed", g.seed, "Seed; overrides the config");
  app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--set", g.overrides, "key=value override (repeatable)")->multi_option_policy(
      CLI::MultiOptionPolicy::TakeAll);

  auto* run_cmd = app.add_subcommand("run", "Run the open-world protocol over all tasks");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run a grid of configurations");
  std::vector<std::string> sweep_specs;
  std::size_t jobs = 0;
  sweep_cmd->add_option("--sweep", sweep_specs, "key=v1,v2,... (one or two axes)")->required();
  sweep_cmd->add_option("--jobs", jobs, "Parallel runs (0 = hardware threads)");

  auto* fit_cmd = app.add_subcommand("fit-weibull", "Fit a shifted Weibull to a sample file");
  std::string samples_file;
  fit_cmd->add_option("samples", samples_file, "Newline-delimited numbers")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate detections against ground truth");
  std::string dets_file;
  std::string gts_file;
  eval_cmd->add_option("detections", dets_file, "Detection CSV")->required();
  eval_cmd->add_option("ground_truth", gts_file, "Ground-truth CSV")->required();

  auto* gen_cmd = app.add_subcommand("gen-world", "Export a synthetic world as CSV files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(g, out);
    if (*sweep_cmd) return cmd_sweep(g, sweep_specs, jobs, out);
    if (*fit_cmd) return cmd_fit_weibull(g, samples_file, out);
    if (*eval_cmd) return cmd_eval(g, dets_file, gts_file, out);
    if (*gen_cmd) return cmd_gen_world(g, out);
  } catch (const config::ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const io::SchemaError& e) {
    err << "schema error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace owl::cli
