#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace creditx {

// Error categories map onto CLI exit codes (2 config, 3 data, 4 compute).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ComputeError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Calendar date stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days) : days_(days) {}

  /// Parses `YYYY-MM-DD`; throws DataError on malformed or invalid dates.
  static Date parse(std::string_view iso);
  static Date from_ymd(int year, unsigned month, unsigned day);

  std::string iso() const;
  constexpr std::int32_t days() const { return days_; }

  constexpr Date operator+(std::int32_t d) const { return Date(days_ + d); }
  constexpr Date operator-(std::int32_t d) const { return Date(days_ - d); }
  constexpr std::int32_t operator-(Date other) const { return days_ - other.days_; }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::int32_t days_ = 0;
};

/// Currency amount in integer cents.
class Cents {
 public:
  constexpr Cents() = default;
  constexpr explicit Cents(std::int64_t v) : v_(v) {}

  /// Parses a decimal amount with at most two fraction digits.
  static Cents parse(std::string_view text);

  constexpr std::int64_t value() const { return v_; }
  constexpr double units() const { return static_cast<double>(v_) / 100.0; }
  std::string str() const;

  constexpr Cents operator+(Cents o) const { return Cents(v_ + o.v_); }
  constexpr Cents operator-(Cents o) const { return Cents(v_ - o.v_); }
  constexpr Cents operator-() const { return Cents(-v_); }
  constexpr Cents& operator+=(Cents o) {
    v_ += o.v_;
    return *this;
  }
  constexpr Cents& operator-=(Cents o) {
    v_ -= o.v_;
    return *this;
  }
  constexpr auto operator<=>(const Cents&) const = default;

 private:
  std::int64_t v_ = 0;
};

/// Dense row-major matrix of doubles; NaN encodes a missing value.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double> column(std::size_t c) const;
  void set_column(std::size_t c, std::span<const double> values);

  Matrix select_rows(std::span<const std::size_t> idx) const;
  Matrix select_cols(std::span<const std::size_t> idx) const;
  void append_row(std::span<const double> values);

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Splitmix-seeded xoshiro256** generator. Distribution helpers are written
/// out here so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();                       // [0, 1)
  std::size_t below(std::size_t n);       // [0, n)
  double normal();

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t s_[4];
};

/// Derives an independent seed from a parent seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);

inline constexpr double kProbEps = 1e-9;

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double clamp_prob(double p) {
  return p < kProbEps ? kProbEps : (p > 1.0 - kProbEps ? 1.0 - kProbEps : p);
}

inline double logit(double p) {
  p = clamp_prob(p);
  return std::log(p / (1.0 - p));
}

double median(std::vector<double> values);

/// Runs fn(0..n-1) over a small thread pool. Callers write results by index,
/// so output never depends on scheduling. workers = 0 picks the hardware count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, std::size_t workers = 0);

}  // namespace creditx
