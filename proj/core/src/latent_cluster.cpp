#include "owl/latent_cluster.hpp"

#include <cmath>
#include <string>

namespace owl::cluster {

double euclidean_distance(const FeatureVector& a, const FeatureVector& b) {
  require_same_dim(a, b, "euclidean_distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------------------
// FeatureStore

FeatureStore::FeatureStore(std::size_t num_classes, std::size_t capacity)
    : queues_(num_classes), capacity_(capacity) {
  if (num_classes == 0) throw InvalidArgument("FeatureStore: need at least the unknown slot");
  if (capacity == 0) throw InvalidArgument("FeatureStore: queue capacity must be positive");
}

void FeatureStore::check_label(ClassId label) const {
  if (label < 0 || static_cast<std::size_t>(label) >= queues_.size()) {
    throw InvalidArgument("FeatureStore: class id " + std::to_string(label) + " out of range");
  }
}

void FeatureStore::push(ClassId label, FeatureVector f) {
  check_label(label);
  if (dim_ && f.size() != *dim_) {
    throw DimensionError("FeatureStore::push: expected dimension " + std::to_string(*dim_) +
                         ", got " + std::to_string(f.size()));
  }
  dim_ = f.size();
  auto& q = queues_[static_cast<std::size_t>(label)];
  if (q.size() == capacity_) q.pop_front();
  q.push_back(std::move(f));
}

const std::deque<FeatureVector>& FeatureStore::queue(ClassId label) const {
  check_label(label);
  return queues_[static_cast<std::size_t>(label)];
}

std::size_t FeatureStore::total_size() const {
  std::size_t n = 0;
  for (const auto& q : queues_) n += q.size();
  return n;
}

// ---------------------------------------------------------------------------
// PrototypeSet

PrototypeSet::PrototypeSet(std::size_t num_classes) : prototypes_(num_classes) {}

void PrototypeSet::check_class(ClassId c) const {
  if (c < 0 || static_cast<std::size_t>(c) >= prototypes_.size()) {
    throw InvalidArgument("PrototypeSet: class id " + std::to_string(c) + " out of range");
  }
}

bool PrototypeSet::initialized(ClassId c) const {
  check_class(c);
  return prototypes_[static_cast<std::size_t>(c)].has_value();
}

const FeatureVector& PrototypeSet::at(ClassId c) const {
  check_class(c);
  const auto& p = prototypes_[static_cast<std::size_t>(c)];
  if (!p) throw InvalidArgument("PrototypeSet: class " + std::to_string(c) + " is uninitialized");
  return *p;
}

void PrototypeSet::set(ClassId c, FeatureVector p) {
  check_class(c);
  for (const auto& other : prototypes_) {
    if (other && other->size() != p.size()) {
      throw DimensionError("PrototypeSet::set: prototype dimensions must agree");
    }
  }
  prototypes_[static_cast<std::size_t>(c)] = std::move(p);
}

void PrototypeSet::reset(ClassId c) {
  check_class(c);
  prototypes_[static_cast<std::size_t>(c)].reset();
}

std::size_t PrototypeSet::num_initialized() const {
  std::size_t n = 0;
  for (const auto& p : prototypes_) n += p.has_value() ? 1 : 0;
  return n;
}

// ---------------------------------------------------------------------------
// Loss

void ClusteringConfig::validate() const {
  if (!(margin > 0.0)) throw InvalidArgument("cluster.delta must be > 0");
  if (update_period < 1) throw InvalidArgument("cluster.update_period must be >= 1");
  if (burn_in < 0) throw InvalidArgument("cluster.burn_in must be >= 0");
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw InvalidArgument("cluster.eta must lie in [0, 1]");
  if (queue_size == 0) throw InvalidArgument("cluster.queue_size must be positive");
}

namespace {

void check_query(const FeatureVector& f, ClassId c, const PrototypeSet& prototypes) {
  if (c < 0 || static_cast<std::size_t>(c) >= prototypes.num_classes()) {
    throw InvalidArgument("contrastive loss: class id " + std::to_string(c) + " out of range");
  }
  for (std::size_t i = 0; i < prototypes.num_classes(); ++i) {
    const auto id = static_cast<ClassId>(i);
    if (prototypes.initialized(id)) require_same_dim(f, prototypes.at(id), "contrastive loss");
  }
}

}  // namespace

double contrastive_loss(const FeatureVector& f, ClassId c, const PrototypeSet& prototypes,
                        double margin, LossFlags* flags) {
  check_query(f, c, prototypes);
  if (flags && !prototypes.initialized(c)) flags->missing_own_prototype = true;
  double loss = 0.0;
  for (std::size_t i = 0; i < prototypes.num_classes(); ++i) {
    const auto id = static_cast<ClassId>(i);
    if (!prototypes.initialized(id)) continue;
    const double d = euclidean_distance(f, prototypes.at(id));
    loss += (id == c) ? d : std::max(0.0, margin - d);
  }
  return loss;
}

FeatureVector contrastive_loss_grad(const FeatureVector& f, ClassId c,
                                    const PrototypeSet& prototypes, double margin,
                                    LossFlags* flags) {
  check_query(f, c, prototypes);
  if (flags && !prototypes.initialized(c)) flags->missing_own_prototype = true;
  FeatureVector grad(f.size());
  for (std::size_t i = 0; i < prototypes.num_classes(); ++i) {
    const auto id = static_cast<ClassId>(i);
    if (!prototypes.initialized(id)) continue;
    const FeatureVector& p = prototypes.at(id);
    const double d = euclidean_distance(f, p);
    double coeff = 0.0;
    if (id == c) {
      if (d == 0.0) continue;
      coeff = 1.0 / d;
    } else {
      if (d >= margin) continue;
      if (d == 0.0) {
        if (flags) flags->degenerate_gradient = true;
        continue;
      }
      coeff = -1.0 / d;
    }
    for (std::size_t k = 0; k < f.size(); ++k) grad[k] += coeff * (f[k] - p[k]);
  }
  return grad;
}

PrototypeSet class_means(const FeatureStore& store) {
  PrototypeSet means(store.num_classes());
  for (std::size_t i = 0; i < store.num_classes(); ++i) {
    const auto id = static_cast<ClassId>(i);
    const auto& q = store.queue(id);
    if (q.empty()) continue;
    FeatureVector mean(q.front().size());
    for (const auto& f : q) mean += f;
    mean *= 1.0 / static_cast<double>(q.size());
    means.set(id, std::move(mean));
  }
  return means;
}

PrototypeSet momentum_update(const PrototypeSet& current, const PrototypeSet& fresh, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw InvalidArgument("momentum_update: eta must lie in [0, 1]");
  if (current.num_classes() != fresh.num_classes()) {
    throw InvalidArgument("momentum_update: prototype sets differ in class count");
  }
  PrototypeSet out = current;
  for (std::size_t i = 0; i < fresh.num_classes(); ++i) {
    const auto id = static_cast<ClassId>(i);
    if (!fresh.initialized(id)) continue;
    if (!current.initialized(id)) {
      out.set(id, fresh.at(id));
      continue;
    }
    const FeatureVector& old_p = current.at(id);
    const FeatureVector& new_p = fresh.at(id);
    require_same_dim(old_p, new_p, "momentum_update");
    FeatureVector blended(old_p.size());
    for (std::size_t k = 0; k < old_p.size(); ++k) {
      blended[k] = eta * old_p[k] + (1.0 - eta) * new_p[k];
    }
    out.set(id, std::move(blended));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Schedule

ClusteringState::ClusteringState(std::size_t num_classes, ClusteringConfig config)
    : config_(config), store_(num_classes, config.queue_size), prototypes_(num_classes) {
  config_.validate();
}

StepResult step_clustering(ClusteringState& state, const FeatureVector& f, ClassId c) {
  const auto& cfg = state.config_;
  const std::int64_t i = ++state.iteration_;
  state.store_.push(c, f);

  StepResult result;
  result.grad = FeatureVector(f.size());
  if (i < cfg.burn_in) return result;

  if (i == cfg.burn_in) {
    state.prototypes_ = class_means(state.store_);
  } else if (i % cfg.update_period == 0) {
    state.prototypes_ = momentum_update(state.prototypes_, class_means(state.store_), cfg.momentum);
  }
  result.active = true;
  result.loss = contrastive_loss(f, c, state.prototypes_, cfg.margin, &result.flags);
  result.grad = contrastive_loss_grad(f, c, state.prototypes_, cfg.margin, &result.flags);
  return result;
}

}  // namespace owl::cluster
