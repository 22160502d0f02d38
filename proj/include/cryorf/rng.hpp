// Seeded random streams with platform-independent output.  The standard
// distributions are implementation-defined, so normals are generated with
// Box-Muller over the raw engine output; substreams are derived by mixing
// (seed, stream id, call index) so concurrent callers stay reproducible.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace cryorf {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(mix(seed, 0, 0)) {}

    static RandomStream substream(std::uint64_t seed, std::uint64_t stream_id,
                                  std::uint64_t call_index) {
        RandomStream s(0);
        s.gen_.seed(mix(seed, stream_id, call_index));
        s.has_spare_ = false;
        return s;
    }

    double uniform() { // [0, 1)
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    std::complex<double> complex_normal() {
        const double re = normal();
        const double im = normal();
        return {re, im};
    }

private:
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream, std::uint64_t call) {
        std::uint64_t s = seed;
        std::uint64_t a = detail::splitmix64(s);
        s ^= stream * 0x9e3779b97f4a7c15ULL;
        a ^= detail::splitmix64(s);
        s ^= call * 0xd1b54a32d192ed03ULL;
        a ^= detail::splitmix64(s);
        return a;
    }

    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace cryorf
