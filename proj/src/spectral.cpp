#include "bpmud/spectral.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "bpmud/fixedpoint.hpp"
#include "bpmud/rng.hpp"

namespace bpmud {

namespace {

constexpr int kDenseLimit = 2048;  // largest NK for explicit Omega
constexpr int kTraceLimit = 1024;  // largest NK for the trace estimator
constexpr int kTraceMaxPower = 4;

void require_binary(const SignatureMatrix& signatures, const char* where) {
    if (signatures.dist != SignatureDistribution::Binary)
        throw UnsupportedDistributionError(
            std::string(where) + ": defined for binary signatures only");
}

} // namespace

PosteriorOracle mmse_solve(const SystemInstance& instance) {
    const int K = instance.K();
    const int N = instance.N();
    const double s2 = instance.noise_std * instance.noise_std;
    const Eigen::MatrixXd St = instance.signatures.scaled();

    Eigen::MatrixXd A = St.transpose() * St;
    A.diagonal().array() += s2;
    const Eigen::VectorXd b = St.transpose() * instance.received;

    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success)
        throw SingularSystemError(
            "mmse_solve: sigma^2 I + St^T St is not positive definite");

    PosteriorOracle oracle;
    oracle.sigma = instance.noise_std;
    oracle.K = K;
    oracle.N = N;
    oracle.mean = llt.solve(b);
    const Eigen::MatrixXd Ainv = llt.solve(Eigen::MatrixXd::Identity(K, K));
    oracle.variance_diag = s2 * Ainv.diagonal();
    oracle.residual = (A * oracle.mean - b).cwiseAbs().maxCoeff() /
                      (1.0 + b.cwiseAbs().maxCoeff());
    // A factorization can slip through on a numerically singular matrix
    // (noiseless overloaded systems); catch that by the solve quality.
    if (!oracle.mean.allFinite() || !(oracle.residual <= 1e-6))
        throw SingularSystemError(
            "mmse_solve: normal equations are numerically singular");
    return oracle;
}

Eigen::VectorXd apply_omega(const SignatureMatrix& signatures,
                            const Eigen::VectorXd& v) {
    require_binary(signatures, "apply_omega");
    const int N = signatures.N;
    const int K = signatures.K;
    if (v.size() != Eigen::Index(N) * K)
        throw DimensionError("apply_omega: vector length must be N*K");
    const auto& S = signatures.entries;

    // Full double sum, then strip the i = k and a = b slices that the
    // operator zeroes out; the overlap term comes back once.
    Eigen::VectorXd C = Eigen::VectorXd::Zero(N); // C_b = sum_k s_kb v_kb
    for (int k = 0; k < K; ++k)
        for (int b = 0; b < N; ++b) C(b) += S(b, k) * v(Eigen::Index(k) * N + b);

    Eigen::VectorXd T(K), U(K);
    for (int i = 0; i < K; ++i) {
        double t = 0.0, u = 0.0;
        for (int b = 0; b < N; ++b) {
            t += S(b, i) * C(b);
            u += v(Eigen::Index(i) * N + b); // s_{ib}^2 = 1
        }
        T(i) = t;
        U(i) = u;
    }

    Eigen::VectorXd out(Eigen::Index(N) * K);
    for (int i = 0; i < K; ++i)
        for (int a = 0; a < N; ++a) {
            const Eigen::Index e = Eigen::Index(i) * N + a;
            out(e) = T(i) - U(i) - S(a, i) * C(a) + v(e);
        }
    return out;
}

Eigen::MatrixXd dense_omega(const SignatureMatrix& signatures) {
    require_binary(signatures, "dense_omega");
    const int N = signatures.N;
    const int K = signatures.K;
    const Eigen::Index M = Eigen::Index(N) * K;
    if (M > kDenseLimit)
        throw ResourceLimitError("dense_omega: N*K exceeds the dense-size limit");
    const auto& S = signatures.entries;

    Eigen::MatrixXd O = Eigen::MatrixXd::Zero(M, M);
    for (int i = 0; i < K; ++i)
        for (int a = 0; a < N; ++a)
            for (int k = 0; k < K; ++k) {
                if (k == i) continue;
                for (int b = 0; b < N; ++b) {
                    if (b == a) continue;
                    O(Eigen::Index(i) * N + a, Eigen::Index(k) * N + b) =
                        S(b, i) * S(b, k);
                }
            }
    return O;
}

GrowthEstimate spectral_growth_rate(const SignatureMatrix& signatures,
                                    double sigma, int iters,
                                    std::uint64_t seed) {
    if (iters < 10)
        throw ParameterError("spectral_growth_rate: need at least 10 iterations");
    if (sigma < 0.0)
        throw ParameterError("spectral_growth_rate: sigma must be >= 0");
    const Eigen::Index M = Eigen::Index(signatures.N) * signatures.K;

    SeededRng rng(seed, Stream::Probe);
    Eigen::VectorXd v(M);
    for (Eigen::Index e = 0; e < M; ++e) v(e) = rng.gaussian();
    v /= v.norm();

    std::vector<double> log_ratio;
    log_ratio.reserve(std::size_t(iters));
    for (int t = 0; t < iters; ++t) {
        Eigen::VectorXd w = apply_omega(signatures, v);
        const double r = w.norm();
        if (r == 0.0) {
            // Operator annihilated the probe (K = 1 gives Omega = 0).
            GrowthEstimate est;
            est.raw = 0.0;
            est.normalized = 0.0;
            est.stable = true;
            return est;
        }
        log_ratio.push_back(std::log(r));
        v = w / r;
    }

    // Geometric mean over the trailing half; the first half is burn-in.
    const std::size_t lo = log_ratio.size() / 2;
    const std::size_t mid = lo + (log_ratio.size() - lo) / 2;
    double sum1 = 0.0, sum2 = 0.0;
    for (std::size_t t = lo; t < mid; ++t) sum1 += log_ratio[t];
    for (std::size_t t = mid; t < log_ratio.size(); ++t) sum2 += log_ratio[t];
    const double g1 = sum1 / double(mid - lo);
    const double g2 = sum2 / double(log_ratio.size() - mid);
    const double g = (sum1 + sum2) / double(log_ratio.size() - lo);

    const auto [lam, lh] = scalar_fixed_point(signatures.K, signatures.N, sigma);
    GrowthEstimate est;
    est.raw = std::exp(g);
    est.normalized = est.raw / (double(signatures.N) * lam * lh);
    est.stable = std::abs(g1 - g2) <= 0.05;
    return est;
}

TraceCheckResult trace_check(int K, int N, int t, int trials,
                             std::uint64_t seed) {
    if (K < 1 || N < 1) throw DimensionError("trace_check: K and N must be >= 1");
    if (t < 1 || t > kTraceMaxPower)
        throw ParameterError("trace_check: power t must be in [1, 4]");
    if (trials < 1) throw ParameterError("trace_check: need at least one trial");
    const Eigen::Index M = Eigen::Index(N) * K;
    if (M > kTraceLimit)
        throw ResourceLimitError("trace_check: N*K exceeds the trace-size limit");

    const double alpha = double(K) / double(N);
    const double scale =
        std::pow(double(N), 2.0 * t + 2.0) * std::pow(alpha, t + 1.0);

    double sum = 0.0, sumsq = 0.0;
    for (int m = 0; m < trials; ++m) {
        const SignatureMatrix sig = generate_signatures(
            K, N, SignatureDistribution::Binary, seed + std::uint64_t(m));
        // Tr{(Omega^t)^T Omega^t} = sum_j ||Omega^t e_j||^2, column by column.
        double frob2 = 0.0;
        for (Eigen::Index j = 0; j < M; ++j) {
            Eigen::VectorXd col = Eigen::VectorXd::Zero(M);
            col(j) = 1.0;
            for (int p = 0; p < t; ++p) col = apply_omega(sig, col);
            frob2 += col.squaredNorm();
        }
        const double ratio = frob2 / scale;
        sum += ratio;
        sumsq += ratio * ratio;
    }

    TraceCheckResult res;
    res.t = t;
    res.trials = trials;
    res.ratio_mean = sum / trials;
    const double var =
        trials > 1 ? (sumsq - sum * sum / trials) / double(trials - 1) : 0.0;
    res.ratio_std_error = std::sqrt(std::max(var, 0.0) / double(trials));
    return res;
}

DiscrepancyStat discrepancy_D(const SystemInstance& instance,
                              const BpRunReport& bp_report,
                              const PosteriorOracle& oracle) {
    if (!bp_report.converged)
        throw ParameterError("discrepancy_D: detector run did not converge");
    const int K = instance.K();
    if (bp_report.final_estimate.L.size() != K ||
        oracle.variance_diag.size() != K)
        throw DimensionError("discrepancy_D: estimate shape does not match instance");

    DiscrepancyStat stat;
    stat.delta.resize(K);
    for (int i = 0; i < K; ++i)
        stat.delta(i) =
            1.0 / bp_report.final_estimate.L(i) - oracle.variance_diag(i);
    stat.D = stat.delta.squaredNorm() / double(K);
    return stat;
}

} // namespace bpmud
