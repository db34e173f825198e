#pragma once

#include <chrono>

namespace batchvr {

/// Busy-waits to emulate a fixed extra cost per random data access.
/// Requested delays are accumulated and paid in slices of at least a
/// microsecond so clock overhead does not dominate short delays; any
/// overshoot is credited against later requests.
class DelayInjector {
 public:
  explicit DelayInjector(double ns_per_access = 0.0) : ns_per_access_(ns_per_access) {}

  double ns_per_access() const { return ns_per_access_; }

  void charge(std::size_t accesses) {
    if (ns_per_access_ <= 0.0) return;
    debt_ns_ += ns_per_access_ * static_cast<double>(accesses);
    if (debt_ns_ >= kSliceNs) pay();
  }

  /// Pays whatever is still owed.
  void settle() {
    if (debt_ns_ > 0.0) pay();
  }

 private:
  static constexpr double kSliceNs = 1000.0;

  void pay() {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    double spent = 0.0;
    while (spent < debt_ns_)
      spent = std::chrono::duration<double, std::nano>(clock::now() - start).count();
    debt_ns_ -= spent;
  }

  double ns_per_access_;
  double debt_ns_ = 0.0;
};

}  // namespace batchvr
