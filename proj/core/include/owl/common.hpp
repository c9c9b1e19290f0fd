#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace owl {

/// Class identifier. 0 is reserved for "unknown"; known classes are 1..C_max.
using ClassId = int;
inline constexpr ClassId kUnknownClass = 0;

using ImageId = std::int64_t;

/// Base error type for everything thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A dense latent feature vector. Dimension is fixed at construction.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::size_t dim, double fill = 0.0) : values_(dim, fill) {}
  FeatureVector(std::initializer_list<double> values) : values_(values) {}
  explicit FeatureVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> span() { return values_; }
  std::span<const double> span() const { return values_; }
  const std::vector<double>& values() const { return values_; }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  FeatureVector& operator+=(const FeatureVector& other);
  FeatureVector& operator*=(double s);

  bool all_finite() const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<double> values_;
};

FeatureVector operator+(FeatureVector a, const FeatureVector& b);
FeatureVector operator-(const FeatureVector& a, const FeatureVector& b);
FeatureVector operator*(double s, FeatureVector v);

double norm(const FeatureVector& v);
double dot(const FeatureVector& a, const FeatureVector& b);

void require_same_dim(const FeatureVector& a, const FeatureVector& b, const char* what);

}  // namespace owl
