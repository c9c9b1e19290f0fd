#pragma once

// The open-world loop: for each task, train on the task's labels, extend the
// exemplar memory, finetune on it, fit the unknown identifier on held-out
// validation energies, then evaluate on the cumulative test set with future
// classes labelled unknown.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "owl/energy.hpp"
#include "owl/eval.hpp"
#include "owl/latent_cluster.hpp"
#include "owl/model.hpp"
#include "owl/world.hpp"

namespace owl::protocol {

enum class IdentifierKind { kWeibull, kSoftmax };

struct RunConfig {
  std::uint64_t seed = 42;
  cluster::ClusteringConfig cluster;
  energy::EnergyConfig energy;
  IdentifierKind identifier = IdentifierKind::kWeibull;
  double softmax_threshold = 0.5;
  AutoLabelConfig autolabel;
  eval::EvalConfig eval;
  std::size_t n_ex = 50;
  TrainConfig train;
  SyntheticWorldConfig world;
  AblationFlags flags;

  void validate() const;
  /// World config with the run seed applied.
  SyntheticWorldConfig resolved_world() const;
};

struct TaskDiagnostics {
  int task_id = 0;
  TrainTrace train;
  TrainTrace finetune;
  std::optional<energy::EnergyClassifier> classifier;
  std::optional<double> median_known_energy;
  std::optional<double> median_unknown_energy;
  std::optional<double> validation_balanced_accuracy;
  std::size_t exemplars = 0;
};

struct RunResult {
  std::vector<eval::MetricsReport> reports;
  std::vector<TaskDiagnostics> tasks;
};

/// Error raised while processing a task; carries the 1-based task index.
class TaskError : public Error {
 public:
  TaskError(int task, const std::string& what)
      : Error("task " + std::to_string(task) + ": " + what), task_(task) {}
  int task() const { return task_; }

 private:
  int task_;
};

RunResult run_open_world(const RunConfig& cfg);
RunResult run_open_world(const RunConfig& cfg, const World& world);

/// Mean of the per-side hit rates of the energy classifier on the given
/// samples.
double balanced_accuracy(const energy::EnergyClassifier& clf, const EnergySamples& samples);

double median(std::vector<double> values);

}  // namespace owl::protocol
