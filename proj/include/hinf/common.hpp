#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace hinf {

// Error classes map to CLI exit codes: config=2, data=3, numeric=4, internal=5.
enum class errc { config = 2, data = 3, numeric = 4, internal = 5 };

// Single exception type carrying a class (for exit codes) and a short kind
// tag ("NotSPD", "DimMismatch", ...) that tests and callers can switch on.
class Error : public std::runtime_error {
public:
    Error(errc cls, std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), cls_(cls), kind_(std::move(kind)) {}

    errc cls() const noexcept { return cls_; }
    const std::string& kind() const noexcept { return kind_; }

private:
    errc cls_;
    std::string kind_;
};

[[noreturn]] inline void fail(errc cls, const std::string& kind, const std::string& msg) {
    throw Error(cls, kind, msg);
}

inline void require(bool ok, errc cls, const std::string& kind, const std::string& msg) {
    if (!ok) fail(cls, kind, msg);
}

using cspan = std::span<const double>;
using mspan = std::span<double>;

// SplitMix64 step; used to derive disjoint seed streams (folds, replications).
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable seed derivation: stream `tag` of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
    std::uint64_t s = master ^ (0xd1b54a32d192ed03ULL * (tag + 1));
    return splitmix64(s);
}

}  // namespace hinf
