#pragma once

#include <cmath>

namespace macgeo::detail {

/// Neumaier compensated accumulator.
struct CompensatedSum {
    double sum = 0.0;
    double c = 0.0;
    void add(double v)
    {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v))
            c += (sum - t) + v;
        else
            c += (v - t) + sum;
        sum = t;
    }
    [[nodiscard]] double value() const { return sum + c; }
};

} // namespace macgeo::detail
