#include "owl/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace owl::energy {

void EnergyConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("energy.temperature must be > 0");
  }
  if (!std::isfinite(mask_value) || !(mask_value < 0.0)) {
    throw InvalidArgument("energy.mask_value must be a finite negative number");
  }
}

LogitVector::LogitVector(std::vector<double> logits) : logits_(std::move(logits)) {
  active_.reserve(logits_.size());
  for (std::size_t i = 0; i < logits_.size(); ++i) active_.push_back(static_cast<ClassId>(i + 1));
}

LogitVector::LogitVector(std::vector<double> logits, std::vector<ClassId> active)
    : logits_(std::move(logits)), active_(std::move(active)) {
  std::sort(active_.begin(), active_.end());
  active_.erase(std::unique(active_.begin(), active_.end()), active_.end());
  for (ClassId c : active_) check_class(c);
}

void LogitVector::check_class(ClassId c) const {
  if (c < 1 || static_cast<std::size_t>(c) > logits_.size()) {
    throw InvalidArgument("LogitVector: class id " + std::to_string(c) + " out of range 1.." +
                          std::to_string(logits_.size()));
  }
}

double LogitVector::logit(ClassId c) const {
  check_class(c);
  return logits_[static_cast<std::size_t>(c - 1)];
}

void LogitVector::set_logit(ClassId c, double value) {
  check_class(c);
  logits_[static_cast<std::size_t>(c - 1)] = value;
}

bool LogitVector::is_active(ClassId c) const {
  return std::binary_search(active_.begin(), active_.end(), c);
}

namespace {

// log sum_{active} exp(g_i / T), shifted by the max.
double log_sum_exp(const LogitVector& l, double temperature) {
  if (l.active().empty()) throw InvalidArgument("free energy needs a non-empty active class set");
  double m = -std::numeric_limits<double>::infinity();
  for (ClassId c : l.active()) m = std::max(m, l.logit(c) / temperature);
  double acc = 0.0;
  for (ClassId c : l.active()) acc += std::exp(l.logit(c) / temperature - m);
  return m + std::log(acc);
}

}  // namespace

double free_energy(const LogitVector& logits, const EnergyConfig& cfg) {
  return -cfg.temperature * log_sum_exp(logits, cfg.temperature);
}

LogitVector mask_unseen(const LogitVector& logits, const std::vector<ClassId>& known,
                        const EnergyConfig& cfg) {
  std::vector<double> masked = logits.logits();
  std::vector<ClassId> active = known;
  std::sort(active.begin(), active.end());
  for (std::size_t i = 0; i < masked.size(); ++i) {
    if (!std::binary_search(active.begin(), active.end(), static_cast<ClassId>(i + 1))) {
      masked[i] = cfg.mask_value;
    }
  }
  return LogitVector(std::move(masked), std::move(active));
}

std::vector<double> softmax_probs(const LogitVector& logits, const EnergyConfig& cfg) {
  if (logits.active().empty()) throw InvalidArgument("softmax over an empty active set");
  double top = -std::numeric_limits<double>::infinity();
  for (ClassId c : logits.active()) top = std::max(top, logits.logit(c) / cfg.temperature);
  std::vector<double> probs(logits.num_classes(), 0.0);
  double total = 0.0;
  for (ClassId c : logits.active()) {
    const double e = std::exp(logits.logit(c) / cfg.temperature - top);
    probs[static_cast<std::size_t>(c - 1)] = e;
    total += e;
  }
  for (ClassId c : logits.active()) probs[static_cast<std::size_t>(c - 1)] /= total;
  return probs;
}

const char* to_string(Identity id) { return id == Identity::kKnown ? "known" : "unknown"; }

EnergyClassifier fit_energy_classifier(std::span<const double> known_energies,
                                       std::span<const double> unknown_energies) {
  EnergyClassifier clf;
  try {
    clf.known_fit = fit_shifted_weibull(known_energies);
  } catch (const FitError& e) {
    throw ClassifierFitError("known", e.what());
  }
  try {
    clf.unknown_fit = fit_shifted_weibull(unknown_energies);
  } catch (const FitError& e) {
    throw ClassifierFitError("unknown", e.what());
  }
  clf.known = clf.known_fit.model;
  clf.unknown = clf.unknown_fit.model;
  return clf;
}

Identity classify_energy(const EnergyClassifier& clf, double energy) {
  const bool in_known = energy > clf.known.location;
  const bool in_unknown = energy > clf.unknown.location;
  if (!in_known && !in_unknown) return Identity::kKnown;
  const double pk = weibull_pdf(clf.known, energy);
  const double pu = weibull_pdf(clf.unknown, energy);
  if (in_known && in_unknown && pk == 0.0 && pu == 0.0) return Identity::kUnknown;
  return pk < pu ? Identity::kUnknown : Identity::kKnown;
}

Identity classify_softmax_baseline(const LogitVector& logits, double t, const EnergyConfig& cfg) {
  if (!(t > 0.0 && t < 1.0)) throw InvalidArgument("softmax threshold must lie in (0, 1)");
  const auto probs = softmax_probs(logits, cfg);
  const double best = *std::max_element(probs.begin(), probs.end());
  return best < t ? Identity::kUnknown : Identity::kKnown;
}

}  // namespace owl::energy
