#pragma once

#include <cstdint>

#include "pleio/errors.hpp"

namespace pleio {

double norm_quantile(double p);  // stats.hpp

// Counter-based random stream keyed by (seed, stream_id). Each output is a
// pure function of (key, counter), so draws can be addressed by index and the
// sequence is identical on every platform and thread count. Distinct
// stream_ids give independent sequences (replicate index is the typical use).
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : key_(derive_key(seed, stream_id)), counter_(0) {}

    std::uint64_t bits_at(std::uint64_t index) const {
        return mix(key_ + (index + 1) * 0x9e3779b97f4a7c15ULL);
    }

    // Uniform on the open interval (0,1).
    double uniform_at(std::uint64_t index) const {
        return (static_cast<double>(bits_at(index) >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal by inverse CDF; deterministic and platform-stable.
    double normal_at(std::uint64_t index) const {
        return norm_quantile(uniform_at(index));
    }

    double next_uniform() { return uniform_at(counter_++); }
    double next_normal() { return normal_at(counter_++); }

    std::uint64_t counter() const { return counter_; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream_id) {
        std::uint64_t k = mix(seed + 0x9e3779b97f4a7c15ULL);
        k = mix(k ^ mix(stream_id + 0x3c6ef372fe94f82aULL));
        return k;
    }

    std::uint64_t key_;
    std::uint64_t counter_;
};

// Sequential normal draw; sd == 0 returns the mean exactly.
inline double draw_normal(RngStream& stream, double mean, double sd) {
    if (sd < 0.0) throw DomainError("draw_normal: negative sd");
    if (sd == 0.0) return mean;
    return mean + sd * stream.next_normal();
}

}  // namespace pleio
