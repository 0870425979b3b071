#pragma once

#include <cstdint>
#include <random>

namespace sparsepanel {

// splitmix64 finaliser; used to derive child seeds from (seed, tag) pairs.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag1, std::uint64_t tag2);

// A reproducible random stream keyed by (seed, stream_id). Each stream is owned
// by one task at a time; unit-level Gibbs updates each get their own stream.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    // Uniform on the open interval (0, 1).
    double uniform();
    double normal();
    // Gamma with unit scale.
    double gamma(double shape);
    std::uint64_t next_u64() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
    std::gamma_distribution<double> gamma_;
};

}  // namespace sparsepanel
