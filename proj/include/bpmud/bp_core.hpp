#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "bpmud/sysmodel.hpp"

namespace bpmud {

// All four message families at one iteration index t. The hat families are
// the ones computed from lambda/gamma of the same index, so a state is
// self-consistent: advancing it uses only its own hats.
struct EdgeMessages {
    Eigen::MatrixXd lambda;     // K x N, lambda(i, a) = user i -> chip a
    Eigen::MatrixXd gamma;      // K x N
    Eigen::MatrixXd lambda_hat; // N x K, lambda_hat(a, i) = chip a -> user i
    Eigen::MatrixXd gamma_hat;  // N x K
    int iteration = 0;
};

struct MarginalEstimate {
    Eigen::VectorXd G; // numerator of the posterior-mean estimate
    Eigen::VectorXd L; // variance-style normaliser, entries >= 1
    int iteration = 0;
    Eigen::VectorXd x_hat() const { return G.cwiseQuotient(L); }
};

struct HistoryEntry {
    int iteration = 0;
    double mse = 0.0;          // (1/K) * ||x_hat - x||^2 against true symbols
    double dist_to_mmse = 0.0; // ||x_hat - reference||_2 / sqrt(K); NaN if no reference
};

struct BpRunReport {
    MarginalEstimate final_estimate;
    bool converged = false;
    int iterations_used = 0;
    std::vector<HistoryEntry> history;
};

// Loop-granularity arithmetic tallies, used to pin down complexity scaling.
struct OpCount {
    std::uint64_t mul = 0;
    std::uint64_t add = 0;
    std::uint64_t div = 0;
    std::uint64_t total() const { return mul + add + div; }
};

EdgeMessages init_messages(const SystemInstance& instance);

// One sweep of all four families; cost Theta(N*K) via full sums with the
// own term subtracted afterwards.
EdgeMessages bp_iterate(const EdgeMessages& messages,
                        const SystemInstance& instance,
                        OpCount* ops = nullptr);

// Literal per-edge sums with the excluded term skipped inside the loop,
// cost Theta(N^2 K + N K^2). Reference implementation for tests.
EdgeMessages bp_iterate_naive(const EdgeMessages& messages,
                              const SystemInstance& instance,
                              OpCount* ops = nullptr);

MarginalEstimate extract_marginals(const EdgeMessages& messages,
                                   const SystemInstance& instance);

// Default iteration budget: generous multiple of the predicted convergence
// time when the large-system rate is contractive, a flat cap otherwise.
int default_t_max(double alpha, double sigma);

BpRunReport run_bp(const SystemInstance& instance, double tol = 1e-10,
                   int t_max = -1,
                   const Eigen::VectorXd* reference = nullptr);

} // namespace bpmud
