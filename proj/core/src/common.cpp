#include "owl/common.hpp"

#include <cmath>
#include <string>

namespace owl {

FeatureVector& FeatureVector::operator+=(const FeatureVector& other) {
  require_same_dim(*this, other, "FeatureVector::operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

FeatureVector& FeatureVector::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

bool FeatureVector::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

FeatureVector operator+(FeatureVector a, const FeatureVector& b) {
  a += b;
  return a;
}

FeatureVector operator-(const FeatureVector& a, const FeatureVector& b) {
  require_same_dim(a, b, "FeatureVector::operator-");
  FeatureVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

FeatureVector operator*(double s, FeatureVector v) {
  v *= s;
  return v;
}

double dot(const FeatureVector& a, const FeatureVector& b) {
  require_same_dim(a, b, "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(const FeatureVector& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

void require_same_dim(const FeatureVector& a, const FeatureVector& b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace owl
