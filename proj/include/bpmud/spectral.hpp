#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "bpmud/bp_core.hpp"
#include "bpmud/sysmodel.hpp"

namespace bpmud {

// Exact linear-MMSE posterior: mean solves (sigma^2 I + St^T St) x = St^T y
// and variance_diag holds sigma^2 diag((sigma^2 I + St^T St)^{-1}).
struct PosteriorOracle {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance_diag; // entries in (0, 1] for sigma > 0
    double residual = 0.0;         // ||A mean - b||_inf / (1 + ||b||_inf)
    double sigma = 0.0;
    int K = 0;
    int N = 0;
};

struct GrowthEstimate {
    double normalized = 0.0; // raw / (N * lambda_inf * lambda_hat_inf)
    double raw = 0.0;        // windowed geometric-mean growth per application
    bool stable = false;     // two window halves agree to 5% in log scale
};

struct TraceCheckResult {
    double ratio_mean = 0.0;      // Frobenius trace over N^{2t+2} alpha^{t+1}
    double ratio_std_error = 0.0; // sample std / sqrt(trials)
    int t = 0;
    int trials = 0;
};

struct DiscrepancyStat {
    Eigen::VectorXd delta; // per-user 1/L_i - v_i
    double D = 0.0;        // mean squared delta
};

PosteriorOracle mmse_solve(const SystemInstance& instance);

// The evolution operator of the linearized mean dynamics on edge space:
// Omega_{(i,a),(k,b)} = s_{ib} s_{kb} for i != k and a != b, else 0.
// Edge (i, a) maps to linear index i*N + a. Binary signatures only.
Eigen::VectorXd apply_omega(const SignatureMatrix& signatures,
                            const Eigen::VectorXd& v);

// Explicit (NK) x (NK) matrix for small spot checks.
Eigen::MatrixXd dense_omega(const SignatureMatrix& signatures);

// Power iteration with per-step renormalisation. The dominant eigenvalue is
// typically degenerate or complex, so single-step ratios oscillate forever;
// the geometric mean over the trailing half of the run is what converges.
GrowthEstimate spectral_growth_rate(const SignatureMatrix& signatures,
                                    double sigma, int iters,
                                    std::uint64_t seed);

// Monte-Carlo check of E Tr{(Omega^t)^T Omega^t} against its leading-order
// value N^{2t+2} alpha^{t+1}, using fresh binary signatures per trial.
TraceCheckResult trace_check(int K, int N, int t, int trials,
                             std::uint64_t seed);

// Per-user gap between the converged variance estimate 1/L_i and the exact
// posterior variance v_i, plus its mean square D.
DiscrepancyStat discrepancy_D(const SystemInstance& instance,
                              const BpRunReport& bp_report,
                              const PosteriorOracle& oracle);

} // namespace bpmud
