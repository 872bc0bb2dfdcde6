#pragma once

#include <bit>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

namespace simgraph {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

using VertexId = std::uint32_t;
using EdgeId = std::uint32_t;
using Rng = std::mt19937_64;

/// Malformed file contents. `offset` is the byte position of the offending record.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : std::runtime_error(what), offset_(offset) {}
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}

    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_ = 0;
};

/// Inputs that violate a documented precondition (shape mismatch, bad ids, ...).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Training produced non-finite rewards or parameters.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer; used to derive independent per-session seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    return mix_seed(mix_seed(a) ^ (b + 0x632be59bd9b4e019ULL));
}

/// Squared Euclidean distance, accumulated in double.
inline double squared_l2(std::span<const float> a, std::span<const float> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

} // namespace simgraph
