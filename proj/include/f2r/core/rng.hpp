#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>

namespace f2r {

// All randomness in the pipeline flows through this generator so that
// results are bit-identical across platforms and runs. std::* distributions
// are implementation-defined and deliberately avoided.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Order-sensitive seed derivation: hash_seed(base, epoch, k) gives each
// sample its own stream, so loader parallelism cannot change the draws.
inline uint64_t hash_seed(uint64_t a, uint64_t b) { return splitmix64(splitmix64(a) ^ (b + 0x72674c6f9a7b3d1fULL)); }
inline uint64_t hash_seed(uint64_t a, uint64_t b, uint64_t c) { return hash_seed(hash_seed(a, b), c); }

// Process-wide draw counter, used by the inference no-sampling guard.
inline std::atomic<uint64_t>& rng_draw_counter() {
    static std::atomic<uint64_t> n{0};
    return n;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x5851f42d4c957f2dULL)) {}

    uint64_t next_u64() {
        rng_draw_counter().fetch_add(1, std::memory_order_relaxed);
        state_ = splitmix64(state_);
        return state_;
    }

    // uniform in [0,1), 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int n) {  // [0, n)
        return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

    // Box-Muller; one cached value so consecutive draws stay cheap.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0x1.0p-60) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace f2r
