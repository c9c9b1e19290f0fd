#include "owl/world.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>

#include "owl/latent_cluster.hpp"

namespace owl::protocol {

// ---------------------------------------------------------------------------
// TaskSchedule

TaskSchedule::TaskSchedule(std::vector<std::vector<ClassId>> tasks) : tasks_(std::move(tasks)) {
  std::set<ClassId> seen;
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    if (tasks_[t].empty()) throw InvalidArgument("task " + std::to_string(t + 1) + " has no classes");
    for (ClassId c : tasks_[t]) {
      if (c < 1) throw InvalidArgument("class ids in a schedule must be >= 1");
      if (!seen.insert(c).second) {
        throw InvalidArgument("class " + std::to_string(c) + " appears in more than one task");
      }
    }
  }
}

TaskSchedule TaskSchedule::contiguous(std::size_t num_tasks, std::size_t classes_per_task) {
  std::vector<std::vector<ClassId>> tasks(num_tasks);
  ClassId next = 1;
  for (auto& t : tasks) {
    for (std::size_t i = 0; i < classes_per_task; ++i) t.push_back(next++);
  }
  return TaskSchedule(std::move(tasks));
}

const std::vector<ClassId>& TaskSchedule::task_classes(std::size_t task) const {
  if (task < 1 || task > tasks_.size()) {
    throw InvalidArgument("task index " + std::to_string(task) + " out of range");
  }
  return tasks_[task - 1];
}

std::vector<ClassId> TaskSchedule::known_after(std::size_t task) const {
  if (task > tasks_.size()) throw InvalidArgument("task index " + std::to_string(task) + " out of range");
  std::vector<ClassId> known;
  for (std::size_t t = 0; t < task; ++t) known.insert(known.end(), tasks_[t].begin(), tasks_[t].end());
  std::sort(known.begin(), known.end());
  return known;
}

ClassId TaskSchedule::max_class() const {
  ClassId m = 0;
  for (const auto& t : tasks_) {
    for (ClassId c : t) m = std::max(m, c);
  }
  return m;
}

std::size_t TaskSchedule::task_of(ClassId c) const {
  for (std::size_t t = 0; t < tasks_.size(); ++t) {
    if (std::find(tasks_[t].begin(), tasks_[t].end(), c) != tasks_[t].end()) return t + 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Generation

void SyntheticWorldConfig::validate() const {
  if (dim == 0) throw InvalidArgument("world.dim must be >= 1");
  if (num_tasks == 0) throw InvalidArgument("world.num_tasks must be >= 1");
  if (classes_per_task == 0) throw InvalidArgument("world.classes_per_task must be >= 1");
  if (train_instances_per_class == 0) throw InvalidArgument("world.train_instances_per_class must be >= 1");
  if (!(separation > 0.0)) throw InvalidArgument("world.separation must be > 0");
  if (!(feature_noise > 0.0)) throw InvalidArgument("world.feature_noise must be > 0");
  if (!(background_feature_scale > 0.0)) throw InvalidArgument("world.background_feature_scale must be > 0");
  if (!(box_jitter > 0.0)) throw InvalidArgument("world.box_jitter must be > 0");
  if (!(objectness_noise > 0.0)) throw InvalidArgument("world.objectness_noise must be > 0");
  if (!(background_rate >= 0.0)) throw InvalidArgument("world.background_rate must be >= 0");
  if (!(scene_extent >= 40.0)) throw InvalidArgument("world.scene_extent must be >= 40");
  if (max_objects == 0) throw InvalidArgument("world.max_objects must be >= 1");
  if (!(unlabelled_prob >= 0.0 && unlabelled_prob < 1.0)) {
    throw InvalidArgument("world.unlabelled_prob must lie in [0, 1)");
  }
}

namespace {

constexpr double kMinObjectSize = 10.0;
constexpr double kMaxObjectSize = 30.0;
constexpr double kMaxObjectOverlap = 0.1;

class Generator {
 public:
  explicit Generator(const SyntheticWorldConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  std::vector<FeatureVector> place_means(std::size_t count) {
    double radius = cfg_.separation;
    for (;;) {
      std::vector<FeatureVector> means;
      bool ok = true;
      while (means.size() < count && ok) {
        ok = false;
        for (int attempt = 0; attempt < 2000; ++attempt) {
          FeatureVector v = gaussian(cfg_.dim, 1.0);
          const double n = norm(v);
          if (n == 0.0) continue;
          v *= radius / n;
          bool far = true;
          for (const auto& m : means) {
            if (cluster::euclidean_distance(v, m) < cfg_.separation) {
              far = false;
              break;
            }
          }
          if (far) {
            means.push_back(std::move(v));
            ok = true;
            break;
          }
        }
      }
      if (ok) return means;
      radius *= 1.25;
    }
  }

  FeatureVector gaussian(std::size_t dim, double sigma) {
    std::normal_distribution<double> n(0.0, sigma);
    FeatureVector v(dim);
    for (auto& x : v) x = n(rng_);
    return v;
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  std::size_t uniform_count(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  bool bernoulli(double p) { return std::bernoulli_distribution(p)(rng_); }

  std::size_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    return static_cast<std::size_t>(std::poisson_distribution<int>(mean)(rng_));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), rng_);
  }

  boxes::Box random_box() {
    const double w = uniform(kMinObjectSize, kMaxObjectSize);
    const double h = uniform(kMinObjectSize, kMaxObjectSize);
    const double cx = uniform(0.5 * w, cfg_.scene_extent - 0.5 * w);
    const double cy = uniform(0.5 * h, cfg_.scene_extent - 0.5 * h);
    return boxes::Box{cx, cy, w, h};
  }

  // A box for a new object, preferring low overlap with the objects already
  // placed in the scene.
  boxes::Box object_box(const std::vector<InstanceRecord>& placed) {
    boxes::Box box = random_box();
    for (int attempt = 0; attempt < 50; ++attempt) {
      bool clear = true;
      for (const auto& o : placed) {
        if (boxes::iou(box, o.object.box) > kMaxObjectOverlap) {
          clear = false;
          break;
        }
      }
      if (clear) break;
      box = random_box();
    }
    return box;
  }

  boxes::Box jitter(const boxes::Box& b) {
    std::normal_distribution<double> n(0.0, cfg_.box_jitter);
    boxes::Box out = b;
    out.cx += n(rng_) * b.w;
    out.cy += n(rng_) * b.h;
    out.w *= std::exp(n(rng_));
    out.h *= std::exp(n(rng_));
    return out;
  }

  double objectness(const boxes::Box& b, const std::vector<InstanceRecord>& objects) {
    double best = 0.0;
    for (const auto& o : objects) best = std::max(best, boxes::iou(b, o.object.box));
    std::normal_distribution<double> n(0.0, cfg_.objectness_noise);
    return std::clamp(best + n(rng_), 0.0, 1.0);
  }

  void add_object(SceneImage& img, ClassId true_class, const std::vector<FeatureVector>& means) {
    InstanceRecord rec;
    rec.image_id = img.id;
    rec.object.box = object_box(img.objects);
    rec.object.label = true_class;
    rec.feature = means[static_cast<std::size_t>(true_class)] + gaussian(cfg_.dim, cfg_.feature_noise);
    img.objects.push_back(std::move(rec));
  }

  void add_proposals(SceneImage& img) {
    for (std::size_t i = 0; i < img.objects.size(); ++i) {
      ProposalRecord p;
      p.proposal.box = jitter(img.objects[i].object.box);
      p.feature = img.objects[i].feature;
      p.source_object = static_cast<int>(i);
      img.proposals.push_back(std::move(p));
    }
    const std::size_t n_bg = poisson(cfg_.background_rate);
    for (std::size_t i = 0; i < n_bg; ++i) {
      ProposalRecord p;
      p.proposal.box = random_box();
      p.feature = gaussian(cfg_.dim, cfg_.background_feature_scale);
      img.proposals.push_back(std::move(p));
    }
    for (auto& p : img.proposals) p.proposal.objectness = objectness(p.proposal.box, img.objects);
  }

  // Packs a label queue into scenes of 1..max_objects objects. With
  // `others` non-empty, each slot holds a non-queue object with probability
  // cfg.unlabelled_prob.
  std::vector<SceneImage> pack(std::vector<ClassId> queue, const std::vector<ClassId>& others,
                               const std::vector<FeatureVector>& means, ImageId& next_id) {
    shuffle(queue);
    std::vector<SceneImage> images;
    std::size_t pos = 0;
    while (pos < queue.size()) {
      SceneImage img;
      img.id = next_id++;
      const std::size_t n = uniform_count(1, cfg_.max_objects);
      for (std::size_t s = 0; s < n && pos < queue.size(); ++s) {
        if (!others.empty() && bernoulli(cfg_.unlabelled_prob)) {
          add_object(img, others[uniform_count(0, others.size() - 1)], means);
        } else {
          add_object(img, queue[pos++], means);
        }
      }
      add_proposals(img);
      images.push_back(std::move(img));
    }
    return images;
  }

 private:
  const SyntheticWorldConfig& cfg_;
  std::mt19937_64 rng_;
};

std::vector<ClassId> repeated(const std::vector<ClassId>& classes, std::size_t times) {
  std::vector<ClassId> out;
  out.reserve(classes.size() * times);
  for (ClassId c : classes) out.insert(out.end(), times, c);
  return out;
}

}  // namespace

World generate_world(const SyntheticWorldConfig& cfg) {
  cfg.validate();
  World world;
  world.config = cfg;
  world.schedule = TaskSchedule::contiguous(cfg.num_tasks, cfg.classes_per_task);

  const auto c_max = static_cast<std::size_t>(world.schedule.max_class());
  const std::size_t total = c_max + cfg.distractor_classes;
  Generator gen(cfg);
  world.class_means.push_back(FeatureVector(cfg.dim));
  for (auto& m : gen.place_means(total)) world.class_means.push_back(std::move(m));

  std::vector<ClassId> all_classes;
  for (std::size_t c = 1; c <= total; ++c) all_classes.push_back(static_cast<ClassId>(c));

  ImageId next_id = 1;
  for (std::size_t t = 1; t <= cfg.num_tasks; ++t) {
    const auto& task = world.schedule.task_classes(t);
    std::vector<ClassId> others;
    for (ClassId c : all_classes) {
      if (std::find(task.begin(), task.end(), c) == task.end()) others.push_back(c);
    }
    world.train.push_back(
        gen.pack(repeated(task, cfg.train_instances_per_class), others, world.class_means, next_id));
  }
  world.validation = gen.pack(repeated(all_classes, cfg.val_instances_per_class), {},
                              world.class_means, next_id);
  world.test = gen.pack(repeated(all_classes, cfg.test_instances_per_class), {},
                        world.class_means, next_id);
  return world;
}

std::vector<TrainingImage> training_set(const World& world, std::size_t task) {
  const auto& classes = world.schedule.task_classes(task);
  std::vector<TrainingImage> out;
  out.reserve(world.train[task - 1].size());
  for (const auto& img : world.train[task - 1]) {
    TrainingImage ti;
    ti.id = img.id;
    for (const auto& o : img.objects) {
      if (std::find(classes.begin(), classes.end(), o.object.label) != classes.end()) {
        ti.labelled.push_back(o);
      }
    }
    ti.proposals = img.proposals;
    out.push_back(std::move(ti));
  }
  return out;
}

std::vector<boxes::AnnotatedBox> eval_annotations(const SceneImage& image,
                                                  std::span<const ClassId> known) {
  std::vector<boxes::AnnotatedBox> out;
  out.reserve(image.objects.size());
  for (const auto& o : image.objects) {
    boxes::AnnotatedBox a = o.object;
    if (std::find(known.begin(), known.end(), a.label) == known.end()) a.label = kUnknownClass;
    out.push_back(a);
  }
  return out;
}

}  // namespace owl::protocol
