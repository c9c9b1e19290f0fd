#include "owl/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace owl::protocol {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("train.learning_rate must be > 0");
  if (epochs == 0) throw InvalidArgument("train.epochs must be >= 1");
  if (!(contrastive_weight >= 0.0)) throw InvalidArgument("train.contrastive_weight must be >= 0");
  if (batch_size == 0) throw InvalidArgument("train.batch_size must be >= 1");
  if (!(finetune_fraction > 0.0 && finetune_fraction <= 1.0)) {
    throw InvalidArgument("replay.finetune_fraction must lie in (0, 1]");
  }
  if (!(objectness_floor >= 0.0 && objectness_floor <= 1.0)) {
    throw InvalidArgument("train.objectness_floor must lie in [0, 1]");
  }
}

std::size_t TrainConfig::finetune_epochs() const {
  const auto n = static_cast<std::size_t>(std::lround(finetune_fraction * static_cast<double>(epochs)));
  return std::max<std::size_t>(1, n);
}

// ---------------------------------------------------------------------------
// Parameters

Embedding::Embedding(std::size_t d) : dim(d), weight(d * d, 0.0), bias(d, 0.0) {
  for (std::size_t i = 0; i < d; ++i) weight[i * d + i] = 1.0;
}

FeatureVector Embedding::apply(const FeatureVector& x) const {
  if (x.size() != dim) {
    throw DimensionError("embedding expects dimension " + std::to_string(dim) + ", got " +
                         std::to_string(x.size()));
  }
  FeatureVector f(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    double acc = bias[i];
    const double* w = &weight[i * dim];
    for (std::size_t j = 0; j < dim; ++j) acc += w[j] * x[j];
    f[i] = acc;
  }
  return f;
}

LinearHead::LinearHead(std::size_t d, std::size_t classes)
    : dim(d), num_classes(classes), weight(d * classes, 0.0), bias(classes, 0.0) {}

std::span<const double> LinearHead::row(ClassId c) const {
  return std::span<const double>(weight).subspan(static_cast<std::size_t>(c - 1) * dim, dim);
}

std::vector<double> LinearHead::raw_logits(const FeatureVector& f) const {
  if (f.size() != dim) throw DimensionError("head expects dimension " + std::to_string(dim));
  std::vector<double> z(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    double acc = bias[k];
    const double* w = &weight[k * dim];
    for (std::size_t j = 0; j < dim; ++j) acc += w[j] * f[j];
    z[k] = acc;
  }
  return z;
}

Detector::Detector(std::size_t dim, std::size_t max_classes) : backbone(dim), head(dim, max_classes) {
  if (dim == 0 || max_classes == 0) throw InvalidArgument("detector needs dim >= 1 and classes >= 1");
}

energy::LogitVector Detector::logits(const FeatureVector& latent, std::span<const ClassId> known,
                                     const energy::EnergyConfig& ecfg) const {
  energy::LogitVector raw(head.raw_logits(embed(latent)));
  return energy::mask_unseen(raw, std::vector<ClassId>(known.begin(), known.end()), ecfg);
}

// ---------------------------------------------------------------------------
// Training

namespace {

class SgdTrainer {
 public:
  SgdTrainer(Detector& det, cluster::ClusteringState& state, const TrainContext& ctx)
      : det_(det),
        state_(state),
        ctx_(ctx),
        known_(ctx.known.begin(), ctx.known.end()),
        g_embed_w_(det.backbone.weight.size(), 0.0),
        g_embed_b_(det.backbone.bias.size(), 0.0),
        g_head_w_(det.head.weight.size(), 0.0),
        g_head_b_(det.head.bias.size(), 0.0) {
    std::sort(known_.begin(), known_.end());
    for (ClassId c : known_) {
      if (c < 1 || static_cast<std::size_t>(c) > det.head.num_classes) {
        throw InvalidArgument("known class " + std::to_string(c) + " exceeds the head bound");
      }
    }
  }

  void labelled_step(const FeatureVector& x, ClassId c, EpochStats& stats) {
    if (!std::binary_search(known_.begin(), known_.end(), c)) {
      throw InvalidArgument("training label " + std::to_string(c) + " is not an introduced class");
    }
    const std::size_t d = det_.head.dim;
    const FeatureVector f = det_.embed(x);
    const std::vector<double> z = det_.head.raw_logits(f);

    double m = -std::numeric_limits<double>::infinity();
    for (ClassId k : known_) m = std::max(m, z[static_cast<std::size_t>(k - 1)]);
    double s = 0.0;
    for (ClassId k : known_) s += std::exp(z[static_cast<std::size_t>(k - 1)] - m);
    const double lse = m + std::log(s);
    stats.mean_cross_entropy += lse - z[static_cast<std::size_t>(c - 1)];
    ++stats.labelled_steps;

    FeatureVector g_f(d);
    for (ClassId k : known_) {
      const auto row = static_cast<std::size_t>(k - 1);
      const double g = std::exp(z[row] - lse) - (k == c ? 1.0 : 0.0);
      const double* w = &det_.head.weight[row * d];
      double* gw = &g_head_w_[row * d];
      for (std::size_t j = 0; j < d; ++j) {
        g_f[j] += g * w[j];
        gw[j] += g * f[j];
      }
      g_head_b_[row] += g;
    }
    if (ctx_.flags.cc) add_clustering(f, c, g_f, stats);
    backprop_embedding(x, g_f);
    tick();
  }

  void unknown_step(const FeatureVector& x, EpochStats& stats) {
    ++stats.unknown_steps;
    const FeatureVector f = det_.embed(x);
    if (!ctx_.flags.cc) {
      state_.observe(kUnknownClass, f);
      return;
    }
    FeatureVector g_f(f.size());
    add_clustering(f, kUnknownClass, g_f, stats);
    backprop_embedding(x, g_f);
    tick();
  }

  void flush() {
    if (pending_ == 0) return;
    const double step = ctx_.train.learning_rate / static_cast<double>(pending_);
    auto apply = [step](std::vector<double>& p, std::vector<double>& g) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] -= step * g[i];
        g[i] = 0.0;
      }
    };
    apply(det_.backbone.weight, g_embed_w_);
    apply(det_.backbone.bias, g_embed_b_);
    // Rows of masked classes carry zero gradient; skip them so they stay
    // bitwise untouched.
    const std::size_t d = det_.head.dim;
    for (ClassId k : known_) {
      const auto row = static_cast<std::size_t>(k - 1);
      for (std::size_t j = 0; j < d; ++j) {
        det_.head.weight[row * d + j] -= step * g_head_w_[row * d + j];
        g_head_w_[row * d + j] = 0.0;
      }
      det_.head.bias[row] -= step * g_head_b_[row];
      g_head_b_[row] = 0.0;
    }
    pending_ = 0;
  }

 private:
  void add_clustering(const FeatureVector& f, ClassId c, FeatureVector& g_f, EpochStats& stats) {
    const cluster::StepResult r = cluster::step_clustering(state_, f, c);
    if (!r.active) return;
    stats.mean_contrastive += r.loss;
    ++stats.contrastive_steps;
    const double lambda = ctx_.train.contrastive_weight;
    for (std::size_t j = 0; j < g_f.size(); ++j) g_f[j] += lambda * r.grad[j];
  }

  void backprop_embedding(const FeatureVector& x, const FeatureVector& g_f) {
    const std::size_t d = det_.backbone.dim;
    for (std::size_t i = 0; i < d; ++i) {
      double* gw = &g_embed_w_[i * d];
      for (std::size_t j = 0; j < d; ++j) gw[j] += g_f[i] * x[j];
      g_embed_b_[i] += g_f[i];
    }
  }

  void tick() {
    if (++pending_ >= ctx_.train.batch_size) flush();
  }

  Detector& det_;
  cluster::ClusteringState& state_;
  const TrainContext& ctx_;
  std::vector<ClassId> known_;
  std::vector<double> g_embed_w_;
  std::vector<double> g_embed_b_;
  std::vector<double> g_head_w_;
  std::vector<double> g_head_b_;
  std::size_t pending_ = 0;
};

}  // namespace

TrainTrace train_task(Detector& detector, cluster::ClusteringState& state,
                      std::span<const TrainingImage> images, const TrainContext& ctx) {
  ctx.train.validate();
  const std::size_t epochs = ctx.epochs == 0 ? ctx.train.epochs : ctx.epochs;
  SgdTrainer trainer(detector, state, ctx);
  std::mt19937_64 rng(ctx.seed);
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainTrace trace;
  std::vector<boxes::Proposal> proposals;
  std::vector<boxes::AnnotatedBox> annotations;
  for (std::size_t e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochStats stats;
    stats.prototypes_complete =
        std::all_of(ctx.known.begin(), ctx.known.end(), [&](ClassId c) { return state.prototypes().initialized(c); }) &&
        (!ctx.flags.alu || state.prototypes().initialized(kUnknownClass));
    for (std::size_t idx : order) {
      const TrainingImage& img = images[idx];
      for (const auto& obj : img.labelled) trainer.labelled_step(obj.feature, obj.object.label, stats);
      if (!ctx.flags.alu || img.proposals.empty()) continue;
      proposals.clear();
      annotations.clear();
      for (const auto& p : img.proposals) proposals.push_back(p.proposal);
      for (const auto& obj : img.labelled) annotations.push_back(obj.object);
      for (std::size_t pi : boxes::select_unknown_proposals(proposals, annotations, ctx.autolabel.top_k,
                                                            ctx.autolabel.overlap_thresh)) {
        trainer.unknown_step(img.proposals[pi].feature, stats);
      }
    }
    trainer.flush();
    if (stats.labelled_steps > 0) stats.mean_cross_entropy /= static_cast<double>(stats.labelled_steps);
    if (stats.contrastive_steps > 0) stats.mean_contrastive /= static_cast<double>(stats.contrastive_steps);
    trace.epochs.push_back(stats);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Unknown identification and inference

EnergySamples validation_energies(const Detector& detector, std::span<const SceneImage> validation,
                                  std::span<const ClassId> known, const energy::EnergyConfig& ecfg) {
  EnergySamples out;
  for (const auto& img : validation) {
    for (const auto& o : img.objects) {
      const double e = energy::free_energy(detector.logits(o.feature, known, ecfg), ecfg);
      const bool is_known = std::find(known.begin(), known.end(), o.object.label) != known.end();
      (is_known ? out.known : out.unknown).push_back(e);
    }
  }
  return out;
}

energy::EnergyClassifier fit_unknown_identifier(const Detector& detector,
                                                std::span<const SceneImage> validation,
                                                std::span<const ClassId> known,
                                                const energy::EnergyConfig& ecfg) {
  const EnergySamples s = validation_energies(detector, validation, known, ecfg);
  return energy::fit_energy_classifier(s.known, s.unknown);
}

std::vector<eval::DetectionRecord> predict(const Detector& detector, const UnknownIdentifier& identifier,
                                           const SceneImage& image, const PredictContext& ctx) {
  std::vector<eval::DetectionRecord> out;
  for (const auto& p : image.proposals) {
    if (p.proposal.objectness < ctx.objectness_floor) continue;
    const energy::LogitVector logits = detector.logits(p.feature, ctx.known, ctx.energy);
    bool unknown = false;
    if (ctx.ebui) {
      if (const auto* clf = std::get_if<energy::EnergyClassifier>(&identifier)) {
        unknown = energy::classify_energy(*clf, energy::free_energy(logits, ctx.energy)) ==
                  energy::Identity::kUnknown;
      } else if (const auto* base = std::get_if<SoftmaxBaseline>(&identifier)) {
        unknown = energy::classify_softmax_baseline(logits, base->threshold, ctx.energy) ==
                  energy::Identity::kUnknown;
      }
    }
    eval::DetectionRecord det;
    det.image_id = image.id;
    det.box = p.proposal.box;
    if (unknown) {
      det.label = kUnknownClass;
      det.confidence = p.proposal.objectness;
    } else {
      const auto probs = energy::softmax_probs(logits, ctx.energy);
      const auto best = std::max_element(probs.begin(), probs.end());
      det.label = static_cast<ClassId>(best - probs.begin()) + 1;
      det.confidence = *best;
    }
    out.push_back(det);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Replay

void ExemplarStore::merge(const ExemplarStore& other) {
  for (const auto& [c, list] : other.per_class_) {
    auto& mine = per_class_[c];
    mine.insert(mine.end(), list.begin(), list.end());
  }
}

std::size_t ExemplarStore::size() const {
  std::size_t n = 0;
  for (const auto& [c, list] : per_class_) n += list.size();
  return n;
}

std::size_t ExemplarStore::count(ClassId c) const {
  auto it = per_class_.find(c);
  return it == per_class_.end() ? 0 : it->second.size();
}

std::vector<TrainingImage> ExemplarStore::as_training_set() const {
  std::vector<TrainingImage> out;
  out.reserve(size());
  for (const auto& [c, list] : per_class_) {
    for (const auto& rec : list) {
      TrainingImage ti;
      ti.id = rec.image_id;
      ti.labelled.push_back(rec);
      out.push_back(std::move(ti));
    }
  }
  return out;
}

ExemplarStore select_exemplars(std::span<const TrainingImage> images, std::size_t n_ex) {
  ExemplarStore store;
  if (n_ex == 0) return store;
  for (const auto& img : images) {
    for (const auto& rec : img.labelled) {
      if (store.count(rec.object.label) < n_ex) store.add(rec);
    }
  }
  return store;
}

TrainTrace balanced_finetune(Detector& detector, cluster::ClusteringState& state,
                             const ExemplarStore& store, std::size_t n_ex, const TrainContext& ctx) {
  if (n_ex == 0) return {};
  if (store.empty()) throw InvalidArgument("balanced finetune: exemplar store is empty");
  const auto images = store.as_training_set();
  TrainContext ft = ctx;
  ft.epochs = ctx.train.finetune_epochs();
  return train_task(detector, state, images, ft);
}

}  // namespace owl::protocol
