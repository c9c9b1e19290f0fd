#pragma once

// Task schedule and the deterministic synthetic world that stands in for an
// image dataset: scenes of boxed objects with Gaussian latent features, plus
// class-agnostic proposals with objectness scores.

#include <cstdint>
#include <vector>

#include "owl/boxes.hpp"
#include "owl/common.hpp"

namespace owl::protocol {

/// Ordered, pairwise-disjoint class groups T_1..T_n. Task indices are 1-based.
class TaskSchedule {
 public:
  TaskSchedule() = default;
  explicit TaskSchedule(std::vector<std::vector<ClassId>> tasks);

  /// Tasks {1..m}, {m+1..2m}, ...
  static TaskSchedule contiguous(std::size_t num_tasks, std::size_t classes_per_task);

  std::size_t num_tasks() const { return tasks_.size(); }
  const std::vector<ClassId>& task_classes(std::size_t task) const;
  /// K^t: union of T_1..T_t. known_after(0) is empty.
  std::vector<ClassId> known_after(std::size_t task) const;
  /// Largest class id in the schedule (C_max).
  ClassId max_class() const;
  /// Task introducing `c`, or 0 if `c` never appears.
  std::size_t task_of(ClassId c) const;

 private:
  std::vector<std::vector<ClassId>> tasks_;
};

struct SyntheticWorldConfig {
  std::size_t dim = 8;
  std::size_t num_tasks = 2;
  std::size_t classes_per_task = 5;
  std::size_t distractor_classes = 0;  // never introduced; always unknown
  std::size_t train_instances_per_class = 400;
  std::size_t val_instances_per_class = 100;
  std::size_t test_instances_per_class = 100;
  double separation = 10.0;       // minimum pairwise distance of class means
  double feature_noise = 1.0;     // isotropic std-dev around each class mean
  double background_feature_scale = 1.0;
  double box_jitter = 0.05;       // relative std-dev of proposal jitter
  double background_rate = 2.0;   // Poisson mean of background proposals per image
  double objectness_noise = 0.02;
  double scene_extent = 100.0;
  std::size_t max_objects = 4;
  double unlabelled_prob = 0.3;   // chance a training-scene slot holds a non-task object
  std::uint64_t seed = 0;

  void validate() const;
};

/// One object in a scene. `object.label` is the true class; distractor
/// classes are numbered above the schedule's C_max.
struct InstanceRecord {
  ImageId image_id = 0;
  boxes::AnnotatedBox object;
  FeatureVector feature;
};

struct ProposalRecord {
  boxes::Proposal proposal;
  FeatureVector feature;
  int source_object = -1;  // index into SceneImage::objects, -1 for background
};

struct SceneImage {
  ImageId id = 0;
  std::vector<InstanceRecord> objects;
  std::vector<ProposalRecord> proposals;
};

struct World {
  SyntheticWorldConfig config;
  TaskSchedule schedule;
  std::vector<FeatureVector> class_means;  // index = true class id; slot 0 unused
  std::vector<std::vector<SceneImage>> train;  // train[t - 1] for task t
  std::vector<SceneImage> validation;
  std::vector<SceneImage> test;

  std::size_t num_true_classes() const { return class_means.size() - 1; }
};

/// Builds the whole world from cfg.seed. Class means sit on a sphere with
/// pairwise distance >= cfg.separation.
World generate_world(const SyntheticWorldConfig& cfg);

/// Labelled training instances for a task: only objects of that task's
/// classes are annotated.
struct TrainingImage {
  ImageId id = 0;
  std::vector<InstanceRecord> labelled;
  std::vector<ProposalRecord> proposals;
};

std::vector<TrainingImage> training_set(const World& world, std::size_t task);

/// Ground-truth view of an evaluation image at a task: classes outside
/// `known` become unknown (label 0).
std::vector<boxes::AnnotatedBox> eval_annotations(const SceneImage& image,
                                                  std::span<const ClassId> known);

}  // namespace owl::protocol
