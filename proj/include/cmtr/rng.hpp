#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cmtr {

// Seeded generator whose draws are identical across standard libraries.
// std::uniform_int_distribution / std::normal_distribution are
// implementation-defined, so bounded and gaussian draws are done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, bound). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t bound);

    // Uniform real in [0, 1) with 53 bits of mantissa.
    double uniform();

    double normal(double mean = 0.0, double stddev = 1.0);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a 64. Stable across platforms and runs, used for seeds and fingerprints.
std::uint64_t stable_hash(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t stable_hash_combine(std::uint64_t seed, std::string_view data);

std::string to_hex(std::uint64_t value);

}  // namespace cmtr
