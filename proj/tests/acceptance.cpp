// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "owl/config.hpp"
#include "owl/dataset_io.hpp"
#include "owl/energy.hpp"
#include "owl/eval.hpp"
#include "owl/latent_cluster.hpp"
#include "owl/protocol.hpp"
#include "owl/weibull.hpp"

#ifdef OWL_HAVE_CLI
#include "cli.hpp"
#endif

using namespace owl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    v.pass = false;
    v.detail += " [over time budget " + config::format_double(budget_s) + " s]";
  }
  if (!v.pass) ++failures;
  std::ostringstream line;
  line.setf(std::ios::fixed);
  line.precision(2);
  line << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << name << "  (" << v.detail << "; "
       << secs << " s)";
  std::cout << line.str() << std::endl;
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// 1 -----------------------------------------------------------------------
Verdict gradient_oracle() {
  using namespace owl::cluster;
  std::mt19937_64 rng(101);
  std::normal_distribution<double> n01;
  const double margin = 10.0;
  const std::size_t dims[] = {2, 8, 32};
  int configs = 0, skipped = 0;
  double worst = 0.0;
  for (int attempt = 0; configs < 100; ++attempt) {
    const std::size_t d = dims[attempt % 3];
    const std::size_t classes = 2 + rng() % 9;
    PrototypeSet p(classes);
    const double spread = margin / std::sqrt(static_cast<double>(d));
    for (std::size_t c = 0; c < classes; ++c) {
      FeatureVector v(d);
      for (auto& x : v) x = spread * n01(rng);
      p.set(static_cast<ClassId>(c), v);
    }
    FeatureVector f(d);
    for (auto& x : f) x = spread * n01(rng);
    const auto c = static_cast<ClassId>(rng() % classes);
    bool near_kink = false;
    for (std::size_t i = 0; i < classes; ++i) {
      const double dist = euclidean_distance(f, p.at(static_cast<ClassId>(i)));
      near_kink |= std::abs(dist - margin) <= 1e-3 || dist <= 1e-3;
    }
    if (near_kink) {
      ++skipped;
      continue;
    }
    const auto g = contrastive_loss_grad(f, c, p, margin);
    const auto fd = oracle::finite_difference(
        [&](const std::vector<double>& x) { return contrastive_loss(FeatureVector(x), c, p, margin); }, f.values(),
        1e-5);
    double err = 0, scale = 0;
    for (std::size_t j = 0; j < d; ++j) {
      err += (g[j] - fd[j]) * (g[j] - fd[j]);
      scale += fd[j] * fd[j];
    }
    worst = std::max(worst, std::sqrt(err) / std::max(std::sqrt(scale), 1e-12));
    ++configs;
  }
  return {worst < 1e-4, "100 configs, " + std::to_string(skipped) + " near-kink draws skipped, max rel err " +
                            num(worst)};
}

// 2 -----------------------------------------------------------------------
Verdict energy_identities() {
  using namespace owl::energy;
  std::mt19937_64 rng(202);
  std::normal_distribution<double> n(0, 5);
  const EnergyConfig cfg;
  double shift_err = 0, gibbs_err = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> g(1 + rng() % 20);
    for (auto& v : g) v = n(rng);
    const double c = 10 * n(rng);
    auto shifted = g;
    for (auto& v : shifted) v += c;
    const double e = free_energy(LogitVector(g), cfg);
    shift_err = std::max(shift_err, std::abs(free_energy(LogitVector(shifted), cfg) - (e - c)));
    const auto p = softmax_probs(LogitVector(g), cfg);
    for (std::size_t i = 0; i < g.size(); ++i) {
      gibbs_err = std::max(gibbs_err, std::abs(p[i] - std::exp(g[i] + e)));
    }
  }
  return {shift_err <= 1e-9 && gibbs_err <= 1e-12,
          "1000 vectors, max shift err " + num(shift_err) + ", max Gibbs err " + num(gibbs_err)};
}

// 3 -----------------------------------------------------------------------
Verdict weibull_recovery() {
  struct Case {
    double k, lambda, gamma;
  };
  bool ok = true;
  std::string detail;
  for (const Case c : {Case{1, 1, 0}, Case{2, 3, 5}, Case{0.7, 2, -4}}) {
    const auto fit = energy::fit_shifted_weibull(oracle::weibull_samples(c.k, c.lambda, c.gamma, 10000, 303));
    const double ek = std::abs(fit.model.shape - c.k) / c.k;
    const double el = std::abs(fit.model.scale - c.lambda) / c.lambda;
    const double eg = std::abs(fit.model.location - c.gamma);
    ok = ok && ek < 0.05 && el < 0.05 && eg < 0.05;
    if (!detail.empty()) detail += "; ";
    detail += "(" + num(c.k) + "," + num(c.lambda) + "," + num(c.gamma) + ") -> (" + num(fit.model.shape) + "," +
              num(fit.model.scale) + "," + num(fit.model.location) + ")";
  }
  return {ok, detail};
}

// 4 -----------------------------------------------------------------------
Verdict metric_oracles() {
  using namespace owl::eval;
  std::mt19937_64 rng(404);
  std::size_t mismatches = 0, wi_points = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto set = oracle::random_scene(rng, 6, 4, 2);
    for (ClassId c : {1, 2}) {
      mismatches += average_precision(class_pr_curve(set, c, 0.5)) == oracle::brute_ap(set, c, 0.5) ? 0 : 1;
    }
    mismatches += absolute_open_set_error(set, 0.5, 0.05) == oracle::brute_aose(set, 0.5, 0.05) ? 0 : 1;
    const auto bw = oracle::brute_wi(set, 0.8, 0.5);
    if (!bw.defined) continue;
    const auto wi = wilderness_impact(known_only_view(set, 0.5), set, 0.8, 0.5);
    mismatches += wi.precision_known == bw.precision_known && wi.precision_mixed == bw.precision_mixed &&
                          wi.threshold == bw.threshold && wi.recall_reached == bw.recall_reached
                      ? 0
                      : 1;
    ++wi_points;
  }
  return {mismatches == 0, "1000 scenes, " + std::to_string(wi_points) + " with defined WI, " +
                               std::to_string(mismatches) + " mismatches"};
}

// 5 -----------------------------------------------------------------------
Verdict energy_direction(const protocol::RunResult& run) {
  const auto& t1 = run.tasks.at(0);
  if (!t1.median_known_energy || !t1.median_unknown_energy || !t1.validation_balanced_accuracy) {
    return {false, "task 1 produced no energy diagnostics"};
  }
  const bool ok = *t1.median_unknown_energy > *t1.median_known_energy && *t1.validation_balanced_accuracy > 0.7;
  return {ok, "task 1 median energy known " + num(*t1.median_known_energy) + ", unknown " +
                  num(*t1.median_unknown_energy) + ", balanced accuracy " + num(*t1.validation_balanced_accuracy)};
}

// 6 -----------------------------------------------------------------------
Verdict ablation_direction(const protocol::RunResult& on) {
  protocol::RunConfig cfg;
  cfg.flags = {false, false, false};
  const auto off = protocol::run_open_world(cfg);
  const auto& a = on.reports.at(0);
  const auto& b = off.reports.at(0);
  if (!a.wi || !b.wi || !a.map_curr || !b.map_curr) return {false, "task 1 metrics undefined"};
  const double drop = *b.map_curr - *a.map_curr;
  const bool ok = *a.wi <= *b.wi && a.a_ose <= b.a_ose && drop <= 0.05;
  return {ok, "task 1 WI on/off " + num(*a.wi) + "/" + num(*b.wi) + ", A-OSE " + std::to_string(a.a_ose) + "/" +
                  std::to_string(b.a_ose) + ", mAP " + num(*a.map_curr) + "/" + num(*b.map_curr) +
                  " (drop " + num(drop) + ")"};
}

// 7 -----------------------------------------------------------------------
Verdict forgetting_direction(const protocol::RunResult& with_replay) {
  protocol::RunConfig cfg;
  cfg.n_ex = 0;
  const auto without = protocol::run_open_world(cfg);
  const auto& a = with_replay.reports.at(1);
  const auto& b = without.reports.at(1);
  if (!a.map_prev || !b.map_prev) return {false, "task 2 previously-known mAP undefined"};
  const double gap = *a.map_prev - *b.map_prev;
  return {gap >= 0.2, "task 2 previously-known mAP n_ex=50 " + num(*a.map_prev) + ", n_ex=0 " + num(*b.map_prev) +
                          " (gap " + num(gap) + ")"};
}

// 8 -----------------------------------------------------------------------
Verdict contrastive_trend() {
  std::size_t phases = 0, bad = 0;
  std::string first_bad;
  for (std::uint64_t seed : {42, 1, 2, 3, 4, 5}) {
    protocol::RunConfig cfg;
    cfg.seed = seed;
    const auto run = protocol::run_open_world(cfg);
    for (const auto& task : run.tasks) {
      for (const auto* trace : {&task.train, &task.finetune}) {
        const auto& ep = trace->epochs;
        auto first = std::find_if(ep.begin(), ep.end(),
                                  [](const protocol::EpochStats& s) { return s.prototypes_complete && s.contrastive_steps > 0; });
        if (first == ep.end()) continue;
        ++phases;
        const bool ok = std::next(first) != ep.end() && ep.back().mean_contrastive < first->mean_contrastive;
        if (!ok) {
          ++bad;
          if (first_bad.empty()) {
            first_bad = ", first failure seed " + std::to_string(seed) + " task " + std::to_string(task.task_id) +
                        (trace == &task.train ? " train" : " finetune");
          }
        }
      }
    }
  }
  return {bad == 0 && phases > 0, std::to_string(phases) + " training phases over 6 seeds, " + std::to_string(bad) +
                                      " without a decrease" + first_bad};
}

// 9 -----------------------------------------------------------------------
#ifdef OWL_HAVE_CLI
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string snapshot(const fs::path& dir, const std::string& stdout_text) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all = stdout_text;
  for (const auto& f : files) all += "\n--" + f.filename().string() + "\n" + slurp(f);
  return all;
}

Verdict cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "owl_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);

  {
    std::ofstream f(root / "samples.txt");
    for (double x : oracle::weibull_samples(1.5, 2.0, -1.0, 2000, 9)) f << config::format_double(x) << '\n';
  }
  {
    std::mt19937_64 rng(9);
    eval::EvalSet scene;
    while (scene.detections.empty() || scene.ground_truths.empty()) scene = oracle::random_scene(rng, 6, 4, 3);
    std::vector<io::DatasetRecord> dets, gts;
    for (const auto& d : scene.detections) dets.push_back({d.image_id, d.box, d.label, d.confidence, "test", 1});
    for (const auto& [img, boxes] : scene.ground_truths) {
      for (const auto& g : boxes) gts.push_back({img, g.box, g.label, 1.0, "test", 1});
    }
    std::ofstream fd(root / "dets.csv"), fg(root / "gts.csv");
    io::write_dataset(fd, dets);
    io::write_dataset(fg, gts);
  }

  const std::vector<std::vector<std::string>> commands = {
      {"run"},
      {"--set", "world.num_tasks=1", "sweep", "--sweep", "cluster.eta=0.4,0.9", "--jobs", "2"},
      {"fit-weibull", (root / "samples.txt").string()},
      {"eval", (root / "dets.csv").string(), (root / "gts.csv").string()},
      {"gen-world"},
  };
  std::size_t identical = 0;
  std::string detail;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::string snaps[2];
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path out = root / (std::to_string(i) + "_" + std::to_string(rep));
      std::vector<std::string> args = {"owl", "--seed", "42", "--out", out.string()};
      args.insert(args.end(), commands[i].begin(), commands[i].end());
      std::vector<const char*> argv;
      for (const auto& a : args) argv.push_back(a.c_str());
      std::ostringstream so, se;
      const int code = cli::run(static_cast<int>(argv.size()), argv.data(), so, se);
      if (code != cli::kExitOk) return {false, commands[i][commands[i].size() > 2 ? 2 : 0] + " exited " +
                                                   std::to_string(code) + ": " + se.str()};
      // gen-world echoes the output directory, which differs by construction.
      std::string text = so.str();
      for (auto pos = text.find(out.string()); pos != std::string::npos; pos = text.find(out.string())) {
        text.replace(pos, out.string().size(), "<out>");
      }
      snaps[rep] = snapshot(out, text);
    }
    if (snaps[0] == snaps[1]) {
      ++identical;
    } else {
      detail += " differs:" + std::to_string(i);
    }
  }
  return {identical == commands.size(), std::to_string(identical) + "/" + std::to_string(commands.size()) +
                                            " commands byte-identical (run, sweep, fit-weibull, eval, gen-world)" +
                                            detail};
}
#endif

// 10 ----------------------------------------------------------------------
Verdict algorithm1_trace() {
  using namespace owl::cluster;
  ClusteringConfig cfg;
  cfg.margin = 6.0;
  cfg.burn_in = 2;
  cfg.update_period = 2;
  cfg.momentum = 0.5;
  cfg.queue_size = 2;
  ClusteringState s(3, cfg);
  int step = 0, mismatches = 0;
  for (const auto& expected : oracle::algorithm1_trace()) {
    ++step;
    const auto r = step_clustering(s, expected.feature, expected.label);
    bool ok = r.active == expected.active && r.loss == expected.loss;
    if (expected.p1.empty()) {
      ok = ok && !s.prototypes().initialized(1) && !s.prototypes().initialized(2);
    } else {
      ok = ok && s.prototypes().at(1) == expected.p1 && s.prototypes().at(2) == expected.p2;
    }
    mismatches += ok ? 0 : 1;
  }
  return {mismatches == 0 && step == 6, std::to_string(step) + " steps, " + std::to_string(mismatches) +
                                            " mismatches in loss or prototypes"};
}

}  // namespace

int main() {
  criterion(1, "contrastive gradient matches central differences", 5, gradient_oracle);
  criterion(2, "free-energy shift identity and Gibbs consistency", 2, energy_identities);
  criterion(3, "shifted Weibull recovery from inverse-CDF samples", 5, weibull_recovery);
  criterion(4, "AP, WI and A-OSE equal brute-force oracles", 30, metric_oracles);

  // The default run is shared by 5, 6 and 7.
  const auto t0 = std::chrono::steady_clock::now();
  const auto default_run = protocol::run_open_world(protocol::RunConfig{});
  const double run_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "      default run (seed 42) took " << run_secs << " s" << std::endl;

  criterion(5, "unknown energies exceed known, balanced accuracy > 0.7", 120,
            [&] { return energy_direction(default_run); });
  criterion(6, "ablation: flags on do not raise WI or A-OSE, mAP drop <= 0.05", 240,
            [&] { return ablation_direction(default_run); });
  criterion(7, "exemplar replay lifts previously-known mAP by >= 0.2", 240,
            [&] { return forgetting_direction(default_run); });
  criterion(8, "contrastive loss falls from first complete-prototype epoch to last", 0, contrastive_trend);
#ifdef OWL_HAVE_CLI
  criterion(9, "CLI outputs byte-identical across repeats", 0, cli_determinism);
#else
  criterion(9, "CLI outputs byte-identical across repeats", 0, [] { return Verdict{false, "built without tools"}; });
#endif
  criterion(10, "hand-computed clustering trace reproduced exactly", 0, algorithm1_trace);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
