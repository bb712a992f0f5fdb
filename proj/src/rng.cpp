#include "clair/rng.hpp"

#include <cmath>
#include <numeric>

namespace clair {

namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::initializer_list<std::uint64_t> coords) {
    std::uint64_t h = splitmix64(seed);
    for (unsigned char ch : stream) h = splitmix64(h ^ ch);
    for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x51ull));
    return h;
}

Rng make_rng(std::uint64_t seed, std::string_view stream, std::initializer_list<std::uint64_t> coords) {
    return Rng(derive_seed(seed, stream, coords));
}

// Box-Muller on the raw engine output keeps draws identical across standard
// library implementations, unlike std::normal_distribution.
double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

} // namespace clair
