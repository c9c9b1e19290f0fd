#include "owl/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace owl::protocol {

void RunConfig::validate() const {
  cluster.validate();
  energy.validate();
  if (!(softmax_threshold > 0.0 && softmax_threshold < 1.0)) {
    throw InvalidArgument("energy.softmax_threshold must lie in (0, 1)");
  }
  if (!(autolabel.overlap_thresh >= 0.0 && autolabel.overlap_thresh < 1.0)) {
    throw InvalidArgument("autolabel.overlap_thresh must lie in [0, 1)");
  }
  eval.validate();
  train.validate();
  resolved_world().validate();
}

SyntheticWorldConfig RunConfig::resolved_world() const {
  SyntheticWorldConfig w = world;
  w.seed = seed;
  return w;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty sample");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double balanced_accuracy(const energy::EnergyClassifier& clf, const EnergySamples& samples) {
  if (samples.known.empty() || samples.unknown.empty()) {
    throw InvalidArgument("balanced accuracy needs both known and unknown samples");
  }
  std::size_t known_hits = 0;
  for (double e : samples.known) {
    known_hits += energy::classify_energy(clf, e) == energy::Identity::kKnown ? 1 : 0;
  }
  std::size_t unknown_hits = 0;
  for (double e : samples.unknown) {
    unknown_hits += energy::classify_energy(clf, e) == energy::Identity::kUnknown ? 1 : 0;
  }
  return 0.5 * (static_cast<double>(known_hits) / static_cast<double>(samples.known.size()) +
                static_cast<double>(unknown_hits) / static_cast<double>(samples.unknown.size()));
}

RunResult run_open_world(const RunConfig& cfg) {
  cfg.validate();
  return run_open_world(cfg, generate_world(cfg.resolved_world()));
}

namespace {

// Per-task seed for the SGD shuffles, decorrelated from the world stream.
std::uint64_t task_seed(std::uint64_t seed, std::size_t task, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (task * 4 + salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

RunResult run_open_world(const RunConfig& cfg, const World& world) {
  cfg.validate();
  const TaskSchedule& schedule = world.schedule;
  const auto c_max = static_cast<std::size_t>(schedule.max_class());

  Detector detector(world.config.dim, c_max);
  cluster::ClusteringState state(c_max + 1, cfg.cluster);
  ExemplarStore exemplars;
  RunResult result;

  for (std::size_t t = 1; t <= schedule.num_tasks(); ++t) {
    const int task_id = static_cast<int>(t);
    try {
      const std::vector<ClassId> known = schedule.known_after(t);
      const std::vector<ClassId> previous = schedule.known_after(t - 1);
      const std::vector<ClassId>& current = schedule.task_classes(t);

      TaskDiagnostics diag;
      diag.task_id = task_id;

      TrainContext ctx;
      ctx.known = known;
      ctx.flags = cfg.flags;
      ctx.train = cfg.train;
      ctx.autolabel = cfg.autolabel;
      ctx.seed = task_seed(cfg.seed, t, 0);

      const std::vector<TrainingImage> images = training_set(world, t);
      diag.train = train_task(detector, state, images, ctx);

      exemplars.merge(select_exemplars(images, cfg.n_ex));
      diag.exemplars = exemplars.size();
      if (t > 1) {
        ctx.seed = task_seed(cfg.seed, t, 1);
        diag.finetune = balanced_finetune(detector, state, exemplars, cfg.n_ex, ctx);
      }

      std::vector<std::string> extra_flags;
      const EnergySamples energies = validation_energies(detector, world.validation, known, cfg.energy);
      if (!energies.known.empty()) diag.median_known_energy = median(energies.known);
      if (!energies.unknown.empty()) diag.median_unknown_energy = median(energies.unknown);

      UnknownIdentifier identifier;
      if (cfg.flags.ebui) {
        if (cfg.identifier == IdentifierKind::kSoftmax) {
          identifier = SoftmaxBaseline{cfg.softmax_threshold};
          extra_flags.push_back("identifier_softmax_baseline");
        } else if (energies.unknown.size() < energy::kMinWeibullSamples) {
          extra_flags.push_back("ebui_disabled_no_validation_unknowns");
        } else {
          const auto clf = energy::fit_energy_classifier(energies.known, energies.unknown);
          diag.validation_balanced_accuracy = balanced_accuracy(clf, energies);
          diag.classifier = clf;
          identifier = clf;
          extra_flags.push_back("energy_out_of_support_rule");
          if (t > 1 && cfg.n_ex > 0) extra_flags.push_back("weibull_refit_after_finetune");
        }
      }

      PredictContext pctx;
      pctx.known = known;
      pctx.ebui = cfg.flags.ebui;
      pctx.objectness_floor = cfg.train.objectness_floor;
      pctx.energy = cfg.energy;

      eval::EvalSet mixed;
      mixed.known_set = known;
      for (const auto& img : world.test) {
        mixed.ground_truths[img.id] = eval_annotations(img, known);
        auto dets = predict(detector, identifier, img, pctx);
        mixed.detections.insert(mixed.detections.end(), dets.begin(), dets.end());
      }
      eval::MetricsReport report = eval::evaluate_task(task_id, mixed, previous, current, cfg.eval);
      report.flags.insert(report.flags.end(), extra_flags.begin(), extra_flags.end());

      result.reports.push_back(std::move(report));
      result.tasks.push_back(std::move(diag));
    } catch (const TaskError&) {
      throw;
    } catch (const std::exception& e) {
      throw TaskError(task_id, e.what());
    }
  }
  return result;
}

}  // namespace owl::protocol
