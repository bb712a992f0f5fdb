#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace clair {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named sub-stream (shuffle, init,
/// augment, synth, split) plus optional integer coordinates such as the
/// epoch or sample index.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                          std::initializer_list<std::uint64_t> coords = {});

Rng make_rng(std::uint64_t seed, std::string_view stream, std::initializer_list<std::uint64_t> coords = {});

double standard_normal(Rng& rng);
double uniform01(Rng& rng);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

} // namespace clair
