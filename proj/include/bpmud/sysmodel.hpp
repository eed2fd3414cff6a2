#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "bpmud/errors.hpp"

namespace bpmud {

enum class SignatureDistribution {
    Binary,          // +1/-1 equiprobable (default; the exactness and
                     // contraction guarantees assume this distribution)
    StandardGaussian // zero mean, unit variance
};

// N x K chip-by-user matrix of *unscaled* signature entries s_{ia}.
// entries(a, i) = s_{ia}. The model's 1/sqrt(N) column scaling is applied
// explicitly by every consumer, never baked into storage, so binary
// matrices stay exactly representable.
struct SignatureMatrix {
    Eigen::MatrixXd entries; // N rows (chips) x K cols (users)
    int N = 0;
    int K = 0;
    SignatureDistribution dist = SignatureDistribution::Binary;

    // Effective (scaled) matrix used in the model: column i is s_i/sqrt(N).
    Eigen::MatrixXd scaled() const { return entries / std::sqrt(double(N)); }

    bool is_binary() const { return dist == SignatureDistribution::Binary; }
};

struct SystemInstance {
    SignatureMatrix signatures;
    Eigen::VectorXd symbols;  // x, length K
    Eigen::VectorXd noise;    // w, length N
    Eigen::VectorXd received; // y, length N
    double noise_std = 0.0;   // sigma
    std::uint64_t seed = 0;

    int K() const { return signatures.K; }
    int N() const { return signatures.N; }
    double alpha() const { return double(signatures.K) / double(signatures.N); }
};

SignatureMatrix generate_signatures(int K, int N, SignatureDistribution dist,
                                    std::uint64_t seed);

SystemInstance generate_instance(int K, int N, SignatureDistribution dist,
                                 double sigma, std::uint64_t seed);

// Raw matched-filter statistic (1/sqrt(N)) S^T y, no normalization.
Eigen::VectorXd matched_filter(const SystemInstance& inst);

// JSON round trip: {K, N, sigma, seed, signatures (row-major), x, w, y}.
std::string dump_instance_json(const SystemInstance& inst);
SystemInstance load_instance_json(const std::string& text);

} // namespace bpmud
