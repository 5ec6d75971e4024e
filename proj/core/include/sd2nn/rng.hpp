#pragma once

#include <cmath>
#include <cstdint>

namespace sd2nn::rng {

// splitmix64; used both as a seed mixer and as the generator state update.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic per-(seed, epoch, stream) sub-seed so independent runs and
// epochs never share a stream.
inline std::uint64_t sub_seed(std::uint64_t base, std::uint64_t epoch, std::uint64_t stream) {
    std::uint64_t s = base;
    std::uint64_t a = splitmix64(s);
    s = a ^ (epoch * 0xd1342543de82ef95ULL);
    std::uint64_t b = splitmix64(s);
    s = b ^ (stream * 0xa0761d6478bd642fULL);
    return splitmix64(s);
}

// Small self-contained engine. std::mt19937 would do, but the distributions on
// top of it are implementation-defined; here every emitted double is pinned.
class Engine {
  public:
    explicit Engine(std::uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // standard normal via Box-Muller; caches the second variate
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace sd2nn::rng
