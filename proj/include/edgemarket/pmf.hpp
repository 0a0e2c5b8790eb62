#pragma once

// Dense probability mass functions over consecutive integers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace edgemarket::stats {

class Pmf {
 public:
  Pmf() : offset_(0), mass_{1.0} {}
  Pmf(int offset, std::vector<double> mass) : offset_(offset), mass_(std::move(mass)) {
    if (mass_.empty()) throw std::invalid_argument("pmf needs at least one support point");
  }

  static Pmf point(int value) { return Pmf(value, {1.0}); }

  int min() const { return offset_; }
  int max() const { return offset_ + static_cast<int>(mass_.size()) - 1; }
  std::size_t width() const { return mass_.size(); }
  const std::vector<double>& mass() const { return mass_; }

  double at(int value) const {
    if (value < min() || value > max()) return 0.0;
    return mass_[static_cast<std::size_t>(value - offset_)];
  }

  double total() const {
    double s = 0.0;
    for (double p : mass_) s += p;
    return s;
  }

  double mean() const {
    double s = 0.0;
    for (std::size_t k = 0; k < mass_.size(); ++k) s += mass_[k] * (offset_ + static_cast<double>(k));
    return s;
  }

  /// E[max(0, X - threshold)].
  double expected_excess(int threshold) const {
    double s = 0.0;
    for (std::size_t k = 0; k < mass_.size(); ++k) {
      const int x = offset_ + static_cast<int>(k);
      if (x > threshold) s += mass_[k] * (x - threshold);
    }
    return s;
  }

  /// Pr(X >= value).
  double tail(int value) const {
    double s = 0.0;
    for (int x = std::max(value, min()); x <= max(); ++x) s += at(x);
    return s;
  }

  /// Drops leading and trailing mass below `eps`.
  Pmf& trim(double eps) {
    if (eps <= 0.0) return *this;
    std::size_t lo = 0, hi = mass_.size();
    while (lo + 1 < hi && mass_[lo] < eps) ++lo;
    while (hi - 1 > lo && mass_[hi - 1] < eps) --hi;
    if (lo > 0 || hi < mass_.size()) {
      mass_ = std::vector<double>(mass_.begin() + static_cast<std::ptrdiff_t>(lo),
                                  mass_.begin() + static_cast<std::ptrdiff_t>(hi));
      offset_ += static_cast<int>(lo);
    }
    return *this;
  }

 private:
  int offset_;
  std::vector<double> mass_;
};

/// Distribution of the sum of two independent variables.
inline Pmf convolve(const Pmf& a, const Pmf& b) {
  std::vector<double> out(a.width() + b.width() - 1, 0.0);
  const auto& ma = a.mass();
  const auto& mb = b.mass();
  for (std::size_t i = 0; i < ma.size(); ++i) {
    if (ma[i] == 0.0) continue;
    for (std::size_t j = 0; j < mb.size(); ++j) out[i + j] += ma[i] * mb[j];
  }
  return Pmf(a.min() + b.min(), std::move(out));
}

/// Pr(A + B >= threshold) for independent A, B without forming A + B.
inline double sum_tail(const Pmf& a, const Pmf& b, int threshold) {
  // suffix[k] = Pr(B >= b.min() + k)
  const auto& mb = b.mass();
  std::vector<double> suffix(mb.size() + 1, 0.0);
  for (std::size_t k = mb.size(); k-- > 0;) suffix[k] = suffix[k + 1] + mb[k];
  double s = 0.0;
  for (int x = a.min(); x <= a.max(); ++x) {
    const double pa = a.at(x);
    if (pa == 0.0) continue;
    const int need = threshold - x - b.min();
    if (need <= 0)
      s += pa;
    else if (static_cast<std::size_t>(need) < mb.size())
      s += pa * suffix[static_cast<std::size_t>(need)];
  }
  return s;
}

/// Table of log(n!) for n in [0, limit].
class LogFactorials {
 public:
  explicit LogFactorials(int limit) : table_(static_cast<std::size_t>(std::max(limit, 1)) + 1, 0.0) {
    for (std::size_t n = 2; n < table_.size(); ++n) table_[n] = table_[n - 1] + std::log(static_cast<double>(n));
  }
  double operator()(int n) const {
    if (n < 0 || static_cast<std::size_t>(n) >= table_.size()) throw std::out_of_range("log-factorial argument");
    return table_[static_cast<std::size_t>(n)];
  }
  double log_choose(int n, int k) const { return (*this)(n) - (*this)(k) - (*this)(n - k); }
  int limit() const { return static_cast<int>(table_.size()) - 1; }

 private:
  std::vector<double> table_;
};

}  // namespace edgemarket::stats
