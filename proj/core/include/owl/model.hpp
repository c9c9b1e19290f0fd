#pragma once

// Toy detector head: a learnable affine embedding of the latent features
// followed by a linear logit head bounded at C_max classes. Trained by SGD on
// masked cross-entropy plus the weighted contrastive clustering loss.

#include <cstdint>
#include <map>
#include <variant>
#include <vector>

#include "owl/energy.hpp"
#include "owl/eval.hpp"
#include "owl/latent_cluster.hpp"
#include "owl/world.hpp"

namespace owl::protocol {

struct AblationFlags {
  bool cc = true;    // contrastive clustering
  bool alu = true;   // auto-labelling unknowns
  bool ebui = true;  // energy-based unknown identifier

  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 8;
  double contrastive_weight = 0.1;
  std::size_t batch_size = 1;
  double finetune_fraction = 0.2;
  double objectness_floor = 0.2;  // proposals below this are not scored at inference

  void validate() const;
  std::size_t finetune_epochs() const;
};

struct AutoLabelConfig {
  std::size_t top_k = 1;
  double overlap_thresh = 0.3;
};

/// Row-major square matrix plus bias; starts as the identity map.
struct Embedding {
  std::size_t dim = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  explicit Embedding(std::size_t d = 0);
  FeatureVector apply(const FeatureVector& x) const;

  friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Logit head g(f) = W f + b with one row per class 1..C_max.
struct LinearHead {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<double> weight;  // num_classes x dim, row c-1 for class c
  std::vector<double> bias;

  LinearHead() = default;
  LinearHead(std::size_t d, std::size_t classes);

  std::span<const double> row(ClassId c) const;
  std::vector<double> raw_logits(const FeatureVector& f) const;

  friend bool operator==(const LinearHead&, const LinearHead&) = default;
};

struct Detector {
  Embedding backbone;
  LinearHead head;

  Detector(std::size_t dim, std::size_t max_classes);

  FeatureVector embed(const FeatureVector& x) const { return backbone.apply(x); }
  /// Masked logits for the given known set.
  energy::LogitVector logits(const FeatureVector& latent, std::span<const ClassId> known,
                             const energy::EnergyConfig& ecfg) const;
};

struct EpochStats {
  double mean_cross_entropy = 0.0;
  double mean_contrastive = 0.0;   // over steps where the clustering loss was active
  std::size_t labelled_steps = 0;
  std::size_t unknown_steps = 0;
  std::size_t contrastive_steps = 0;
  // Every class this phase trains on (plus 0 with alu) had a prototype when
  // the epoch started, so the clustering loss covered all of its terms.
  bool prototypes_complete = false;
};

struct TrainTrace {
  std::vector<EpochStats> epochs;
};

struct TrainContext {
  std::span<const ClassId> known;  // classes unmasked in the head
  AblationFlags flags;
  TrainConfig train;
  AutoLabelConfig autolabel;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;  // 0 means train.epochs
};

/// Shuffled SGD over the images. Labelled objects contribute masked
/// cross-entropy (+ weighted clustering loss with cc). With alu, the top-k
/// background proposals of each image feed the unknown queue and, with cc,
/// the clustering loss with class 0.
TrainTrace train_task(Detector& detector, cluster::ClusteringState& state,
                      std::span<const TrainingImage> images, const TrainContext& ctx);

/// Free energies of validation objects, split by whether their true class is
/// in `known`.
struct EnergySamples {
  std::vector<double> known;
  std::vector<double> unknown;
};

EnergySamples validation_energies(const Detector& detector, std::span<const SceneImage> validation,
                                  std::span<const ClassId> known, const energy::EnergyConfig& ecfg);

energy::EnergyClassifier fit_unknown_identifier(const Detector& detector,
                                                std::span<const SceneImage> validation,
                                                std::span<const ClassId> known,
                                                const energy::EnergyConfig& ecfg);

struct SoftmaxBaseline {
  double threshold = 0.5;
};

using UnknownIdentifier = std::variant<std::monostate, energy::EnergyClassifier, SoftmaxBaseline>;

struct PredictContext {
  std::span<const ClassId> known;
  bool ebui = true;
  double objectness_floor = 0.2;
  energy::EnergyConfig energy;
};

/// One detection per proposal at or above the objectness floor. Proposals
/// flagged unknown get label 0 with their objectness as confidence; others
/// get the argmax known class with its softmax probability.
std::vector<eval::DetectionRecord> predict(const Detector& detector, const UnknownIdentifier& identifier,
                                           const SceneImage& image, const PredictContext& ctx);

/// Per-class replay memory.
class ExemplarStore {
 public:
  void add(const InstanceRecord& rec) { per_class_[rec.object.label].push_back(rec); }
  void merge(const ExemplarStore& other);

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  const std::map<ClassId, std::vector<InstanceRecord>>& per_class() const { return per_class_; }
  std::size_t count(ClassId c) const;

  /// Each exemplar as its own single-object training image without proposals.
  std::vector<TrainingImage> as_training_set() const;

 private:
  std::map<ClassId, std::vector<InstanceRecord>> per_class_;
};

/// First-seen n_ex labelled instances per class in stream order.
ExemplarStore select_exemplars(std::span<const TrainingImage> images, std::size_t n_ex);

/// train_task over the exemplar set for TrainConfig::finetune_epochs().
/// Throws InvalidArgument when the store is empty but n_ex > 0.
TrainTrace balanced_finetune(Detector& detector, cluster::ClusteringState& state,
                             const ExemplarStore& store, std::size_t n_ex, const TrainContext& ctx);

}  // namespace owl::protocol
