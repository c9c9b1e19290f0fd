#pragma once

// Contrastive clustering in latent space: per-class feature queues, class
// prototypes, the margin-based contrastive loss and its gradient, and the
// burn-in / periodic-momentum prototype schedule.

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "owl/common.hpp"

namespace owl::cluster {

/// L2 distance. Throws DimensionError on mismatched dimensions.
double euclidean_distance(const FeatureVector& a, const FeatureVector& b);

/// Per-class bounded FIFO queues of features. Slot 0 holds unknowns.
class FeatureStore {
 public:
  FeatureStore(std::size_t num_classes, std::size_t capacity);

  /// Appends `f` to the queue of `label`, evicting the oldest entry when full.
  void push(ClassId label, FeatureVector f);

  const std::deque<FeatureVector>& queue(ClassId label) const;
  std::size_t num_classes() const { return queues_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t total_size() const;
  std::optional<std::size_t> dim() const { return dim_; }

 private:
  void check_label(ClassId label) const;

  std::vector<std::deque<FeatureVector>> queues_;
  std::size_t capacity_;
  std::optional<std::size_t> dim_;
};

/// Class prototypes indexed by class id; uninitialized entries are skipped
/// by the loss.
class PrototypeSet {
 public:
  explicit PrototypeSet(std::size_t num_classes);

  std::size_t num_classes() const { return prototypes_.size(); }
  bool initialized(ClassId c) const;
  const FeatureVector& at(ClassId c) const;
  void set(ClassId c, FeatureVector p);
  void reset(ClassId c);
  std::size_t num_initialized() const;

  friend bool operator==(const PrototypeSet&, const PrototypeSet&) = default;

 private:
  void check_class(ClassId c) const;

  std::vector<std::optional<FeatureVector>> prototypes_;
};

enum class Distance { kEuclidean };

struct ClusteringConfig {
  double margin = 10.0;
  std::int64_t burn_in = 1000;
  std::int64_t update_period = 3000;
  double momentum = 0.9;
  std::size_t queue_size = 20;
  Distance distance = Distance::kEuclidean;

  void validate() const;
};

/// Side conditions encountered while evaluating the loss or its gradient.
struct LossFlags {
  bool missing_own_prototype = false;  // p_c uninitialized, pull term dropped
  bool degenerate_gradient = false;    // f coincides with a dissimilar prototype
};

/// Sum over initialized prototypes of D(f, p_c) for the own class and
/// max(0, margin - D(f, p_i)) for every other class.
double contrastive_loss(const FeatureVector& f, ClassId c, const PrototypeSet& prototypes,
                        double margin, LossFlags* flags = nullptr);

/// Gradient of contrastive_loss with respect to f. Hinge kinks and the
/// own-prototype minimum take the zero subgradient.
FeatureVector contrastive_loss_grad(const FeatureVector& f, ClassId c,
                                    const PrototypeSet& prototypes, double margin,
                                    LossFlags* flags = nullptr);

/// Class-wise mean of the queue contents; empty queues stay uninitialized.
PrototypeSet class_means(const FeatureStore& store);

/// eta * current + (1 - eta) * fresh, per class. Classes missing from `fresh`
/// keep their current value; classes only present in `fresh` take it as is.
PrototypeSet momentum_update(const PrototypeSet& current, const PrototypeSet& fresh, double eta);

struct StepResult {
  double loss = 0.0;
  FeatureVector grad;
  bool active = false;  // false before burn-in
  LossFlags flags;
};

/// Single-writer state driving the prototype schedule.
class ClusteringState {
 public:
  ClusteringState(std::size_t num_classes, ClusteringConfig config);

  const FeatureStore& store() const { return store_; }
  const PrototypeSet& prototypes() const { return prototypes_; }
  const ClusteringConfig& config() const { return config_; }
  std::int64_t iteration() const { return iteration_; }

  /// Pushes f into the queue of c without advancing the schedule.
  void observe(ClassId c, const FeatureVector& f) { store_.push(c, f); }

  friend StepResult step_clustering(ClusteringState& state, const FeatureVector& f, ClassId c);

 private:
  ClusteringConfig config_;
  FeatureStore store_;
  PrototypeSet prototypes_;
  std::int64_t iteration_ = 0;
};

/// One training step: advances the iteration counter, pushes f into its
/// queue, applies the burn-in / periodic prototype update, then evaluates the
/// loss and gradient for (f, c).
StepResult step_clustering(ClusteringState& state, const FeatureVector& f, ClassId c);

}  // namespace owl::cluster
