#include "csi_inpaint/common.hpp"

#include <cmath>
#include <cstdio>

namespace csi_inpaint {

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace {
// splitmix64 finalizer; spreads FNV output so nearby counters decorrelate.
std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string_view as_bytes(const std::uint64_t& v) {
    return {reinterpret_cast<const char*>(&v), sizeof v};
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
    return mix(fnv1a(purpose, fnv1a(as_bytes(seed))));
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t counter) {
    return mix(fnv1a(as_bytes(counter), derive_seed(seed, purpose)));
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace csi_inpaint
