#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fracperim {

/// Worker count used by every parallel loop in the library.
/// Initialized from FRACPERIM_THREADS when set, otherwise 1.
int thread_count();
void set_thread_count(int n);

/// Runs body(i) for i in [0, n). Each index is visited exactly once; callers
/// write into per-index slots so results never depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Neumaier compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if ((sum_ >= 0 ? sum_ : -sum_) >= (x >= 0 ? x : -x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Compensated sum in index order.
double ordered_sum(std::span<const double> values);

}  // namespace fracperim
