#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

#include <boost/random/mersenne_twister.hpp>

namespace macgeo::detail {

/// Same generator as std::mt19937_64; the Boost build is markedly faster at -O2.
using Engine = boost::random::mt19937_64;

/// Uniform on (0, 1]: never returns 0, so log(u) and u^(-k) are always finite.
inline double uniform01(Engine& eng)
{
    return (static_cast<double>(eng() >> 11) + 1.0) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi)
{
    return lo + (hi - lo) * uniform01(eng);
}

/// Exponential with mean one.
inline double exponential01(Engine& eng)
{
    return -std::log(uniform01(eng));
}

/// Independent child seed for stream `stream` of a root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(root), static_cast<std::uint32_t>(root >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline Engine make_engine(std::uint64_t root, std::uint64_t stream)
{
    return Engine(derive_seed(root, stream));
}

/// e^u with u ~ U[-f, f) from one 64-bit draw: the top 12 bits pick a
/// table entry, the low 52 bits a remainder whose exponential is a degree-6
/// polynomial (relative error below 1e-17 for f <= 20).
class LogUniformSampler {
public:
    explicit LogUniformSampler(double f) : f_(f), step_(2.0 * f / table_size)
    {
        for (std::size_t k = 0; k < table_size; ++k)
            table_[k] = std::exp(-f + step_ * static_cast<double>(k));
    }

    double operator()(Engine& eng) const
    {
        const std::uint64_t x = eng();
        if (f_ > 20.0)
            return std::exp(-f_ + 2.0 * f_ * static_cast<double>(x >> 11) * 0x1.0p-53);
        const double y = step_ * static_cast<double>(x & ((std::uint64_t{1} << 52) - 1)) * 0x1.0p-52;
        const double e = 1.0 + y * (1.0 + y * (1.0 / 2 + y * (1.0 / 6 + y * (1.0 / 24 + y * (1.0 / 120 + y / 720)))));
        return table_[x >> 52] * e;
    }

    /// The u the sampler maps x to.
    [[nodiscard]] double exponent_of(std::uint64_t x) const
    {
        return -f_ + step_ * (static_cast<double>(x >> 52) +
                              static_cast<double>(x & ((std::uint64_t{1} << 52) - 1)) * 0x1.0p-52);
    }

private:
    static constexpr std::size_t table_size = 4096;
    double f_;
    double step_;
    std::array<double, table_size> table_{};
};

} // namespace macgeo::detail
