#pragma once

// Free-energy scoring of classification logits, logit masking for classes
// that have not been introduced yet, and the two unknown identifiers: the
// shifted-Weibull density comparison and the max-softmax threshold baseline.

#include <string>
#include <vector>

#include "owl/common.hpp"
#include "owl/weibull.hpp"

namespace owl::energy {

struct EnergyConfig {
  double temperature = 1.0;
  double mask_value = -1e9;

  void validate() const;
};

/// Logits g_1..g_Cmax plus the set of classes currently taking part in the
/// softmax. Logit of class c lives at index c - 1.
class LogitVector {
 public:
  LogitVector() = default;
  /// All classes active.
  explicit LogitVector(std::vector<double> logits);
  LogitVector(std::vector<double> logits, std::vector<ClassId> active);

  std::size_t num_classes() const { return logits_.size(); }
  double logit(ClassId c) const;
  void set_logit(ClassId c, double value);
  const std::vector<double>& logits() const { return logits_; }
  const std::vector<ClassId>& active() const { return active_; }
  bool is_active(ClassId c) const;

 private:
  void check_class(ClassId c) const;

  std::vector<double> logits_;
  std::vector<ClassId> active_;  // sorted, unique
};

/// -T * log sum_{i active} exp(g_i / T), evaluated with a max shift.
double free_energy(const LogitVector& logits, const EnergyConfig& cfg);

/// Sets every logit outside `known` to cfg.mask_value and restricts the
/// active set to `known`.
LogitVector mask_unseen(const LogitVector& logits, const std::vector<ClassId>& known,
                        const EnergyConfig& cfg);

/// Softmax over the active classes, indexed like the logits (class c at
/// c - 1). Inactive classes receive probability 0.
std::vector<double> softmax_probs(const LogitVector& logits, const EnergyConfig& cfg);

enum class Identity { kKnown, kUnknown };

const char* to_string(Identity id);

/// Known/unknown pair of shifted-Weibull models over free-energy values.
struct EnergyClassifier {
  WeibullModel known;
  WeibullModel unknown;
  WeibullFit known_fit;
  WeibullFit unknown_fit;
};

/// Thrown when one side of the classifier cannot be fitted.
class ClassifierFitError : public FitError {
 public:
  ClassifierFitError(std::string side, const std::string& what)
      : FitError(side + " energies: " + what), side_(std::move(side)) {}
  const std::string& side() const { return side_; }

 private:
  std::string side_;
};

EnergyClassifier fit_energy_classifier(std::span<const double> known_energies,
                                       std::span<const double> unknown_energies);

/// Unknown iff pdf_known(e) < pdf_unknown(e). Ties and energies below both
/// supports are Known; energies above both supports where both densities
/// underflow to zero are Unknown.
Identity classify_energy(const EnergyClassifier& clf, double energy);

/// Unknown iff the largest active softmax probability is strictly below t.
Identity classify_softmax_baseline(const LogitVector& logits, double t, const EnergyConfig& cfg);

}  // namespace owl::energy
