#include "bpmud/bp_core.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "bpmud/fixedpoint.hpp"

namespace bpmud {

namespace {

// Throws if any entry of the four families is non-finite, identifying the
// first offending edge in (user, chip) coordinates.
void check_finite(const EdgeMessages& msg) {
    const int K = int(msg.lambda.rows());
    const int N = int(msg.lambda.cols());
    for (int a = 0; a < N; ++a)
        for (int i = 0; i < K; ++i)
            if (!std::isfinite(msg.lambda(i, a)) || !std::isfinite(msg.gamma(i, a)))
                throw NumericalDivergenceError(std::size_t(i), std::size_t(a));
    for (int i = 0; i < K; ++i)
        for (int a = 0; a < N; ++a)
            if (!std::isfinite(msg.lambda_hat(a, i)) ||
                !std::isfinite(msg.gamma_hat(a, i)))
                throw NumericalDivergenceError(std::size_t(i), std::size_t(a));
}

void record_history(std::vector<HistoryEntry>& history,
                    const MarginalEstimate& est, const SystemInstance& inst,
                    const Eigen::VectorXd* reference) {
    HistoryEntry entry;
    entry.iteration = est.iteration;
    const Eigen::VectorXd xh = est.x_hat();
    entry.mse = (xh - inst.symbols).squaredNorm() / double(inst.K());
    entry.dist_to_mmse =
        reference ? (xh - *reference).norm() / std::sqrt(double(inst.K()))
                  : std::numeric_limits<double>::quiet_NaN();
    history.push_back(entry);
}

} // namespace

EdgeMessages init_messages(const SystemInstance& instance) {
    const int K = instance.K();
    const int N = instance.N();
    const auto& S = instance.signatures.entries;
    const double s2n = instance.noise_std * instance.noise_std;

    EdgeMessages msg;
    msg.iteration = 0;
    msg.lambda = Eigen::MatrixXd::Ones(K, N);
    msg.gamma = Eigen::MatrixXd::Zero(K, N);
    msg.lambda_hat.resize(N, K);
    msg.gamma_hat.resize(N, K);

    // Half-update from the flat start: with lambda = 1 and gamma = 0 the
    // chip -> user sums reduce to the plain signal-power and received terms.
    Eigen::VectorXd power = Eigen::VectorXd::Zero(N);
    for (int k = 0; k < K; ++k)
        for (int a = 0; a < N; ++a) power(a) += S(a, k) * S(a, k);
    for (int i = 0; i < K; ++i) {
        for (int a = 0; a < N; ++a) {
            msg.lambda_hat(a, i) = s2n + (power(a) - S(a, i) * S(a, i)) / double(N);
            msg.gamma_hat(a, i) = instance.received(a);
        }
    }
    check_finite(msg);
    return msg;
}

EdgeMessages bp_iterate(const EdgeMessages& messages,
                        const SystemInstance& instance, OpCount* ops) {
    const int K = instance.K();
    const int N = instance.N();
    if (messages.lambda.rows() != K || messages.lambda.cols() != N)
        throw DimensionError("bp_iterate: message shape does not match instance");
    const auto& S = instance.signatures.entries;
    const double irN = 1.0 / std::sqrt(double(N));
    const double invN = 1.0 / double(N);
    const double s2n = instance.noise_std * instance.noise_std;

    EdgeMessages out;
    out.iteration = messages.iteration + 1;
    out.lambda.resize(K, N);
    out.gamma.resize(K, N);
    out.lambda_hat.resize(N, K);
    out.gamma_hat.resize(N, K);

    // Each excluded-term sum is a full sum minus the edge's own contribution;
    // the per-edge contributions are cached so every family costs O(N*K).
    Eigen::MatrixXd P(N, K), Q(N, K); // chip -> user contributions
    Eigen::VectorXd V(K), W(K);       // their full column sums
    for (int i = 0; i < K; ++i) {
        double v = 0.0, w = 0.0;
        for (int a = 0; a < N; ++a) {
            const double r = 1.0 / messages.lambda_hat(a, i);
            const double p = S(a, i) * S(a, i) * r;
            const double q = S(a, i) * irN * messages.gamma_hat(a, i) * r;
            P(a, i) = p;
            Q(a, i) = q;
            v += p;
            w += q;
        }
        V(i) = v;
        W(i) = w;
    }
    for (int a = 0; a < N; ++a) {
        for (int i = 0; i < K; ++i) {
            out.lambda(i, a) = 1.0 + (V(i) - P(a, i)) * invN;
            out.gamma(i, a) = W(i) - Q(a, i);
        }
    }

    Eigen::MatrixXd Pl(K, N), Ql(K, N); // user -> chip contributions
    Eigen::VectorXd U(N), T(N);
    for (int a = 0; a < N; ++a) {
        double u = 0.0, t = 0.0;
        for (int i = 0; i < K; ++i) {
            const double r = 1.0 / out.lambda(i, a);
            const double p = S(a, i) * S(a, i) * r;
            const double q = S(a, i) * irN * out.gamma(i, a) * r;
            Pl(i, a) = p;
            Ql(i, a) = q;
            u += p;
            t += q;
        }
        U(a) = u;
        T(a) = t;
    }
    for (int i = 0; i < K; ++i) {
        for (int a = 0; a < N; ++a) {
            out.lambda_hat(a, i) = s2n + (U(a) - Pl(i, a)) * invN;
            out.gamma_hat(a, i) = instance.received(a) - (T(a) - Ql(i, a));
        }
    }

    if (ops) {
        const std::uint64_t nk = std::uint64_t(N) * std::uint64_t(K);
        ops->div += 2 * nk;      // one reciprocal per cached contribution
        ops->mul += 9 * nk;      // contribution products + 1/N scalings
        ops->add += 8 * nk;      // running sums + own-term subtractions
    }
    check_finite(out);
    return out;
}

EdgeMessages bp_iterate_naive(const EdgeMessages& messages,
                              const SystemInstance& instance, OpCount* ops) {
    const int K = instance.K();
    const int N = instance.N();
    if (messages.lambda.rows() != K || messages.lambda.cols() != N)
        throw DimensionError("bp_iterate_naive: message shape does not match instance");
    const auto& S = instance.signatures.entries;
    const double irN = 1.0 / std::sqrt(double(N));
    const double invN = 1.0 / double(N);
    const double s2n = instance.noise_std * instance.noise_std;

    EdgeMessages out;
    out.iteration = messages.iteration + 1;
    out.lambda.resize(K, N);
    out.gamma.resize(K, N);
    out.lambda_hat.resize(N, K);
    out.gamma_hat.resize(N, K);

    for (int i = 0; i < K; ++i) {
        for (int a = 0; a < N; ++a) {
            double lam = 0.0, gam = 0.0;
            for (int b = 0; b < N; ++b) {
                if (b == a) continue;
                const double r = 1.0 / messages.lambda_hat(b, i);
                lam += S(b, i) * S(b, i) * r;
                gam += S(b, i) * irN * messages.gamma_hat(b, i) * r;
            }
            out.lambda(i, a) = 1.0 + lam * invN;
            out.gamma(i, a) = gam;
        }
    }
    for (int a = 0; a < N; ++a) {
        for (int i = 0; i < K; ++i) {
            double lam = 0.0, gam = 0.0;
            for (int k = 0; k < K; ++k) {
                if (k == i) continue;
                const double r = 1.0 / out.lambda(k, a);
                lam += S(a, k) * S(a, k) * r;
                gam += S(a, k) * irN * out.gamma(k, a) * r;
            }
            out.lambda_hat(a, i) = s2n + lam * invN;
            out.gamma_hat(a, i) = instance.received(a) - gam;
        }
    }

    if (ops) {
        const std::uint64_t edge_chip = std::uint64_t(K) * N * (N - 1);
        const std::uint64_t edge_user = std::uint64_t(N) * K * (K - 1);
        ops->div += edge_chip + edge_user;
        ops->mul += 4 * (edge_chip + edge_user);
        ops->add += 2 * (edge_chip + edge_user);
    }
    check_finite(out);
    return out;
}

MarginalEstimate extract_marginals(const EdgeMessages& messages,
                                   const SystemInstance& instance) {
    const int K = instance.K();
    const int N = instance.N();
    if (messages.lambda_hat.rows() != N || messages.lambda_hat.cols() != K)
        throw DimensionError("extract_marginals: message shape does not match instance");
    const auto& S = instance.signatures.entries;
    const double irN = 1.0 / std::sqrt(double(N));
    const double invN = 1.0 / double(N);

    MarginalEstimate est;
    est.iteration = messages.iteration + 1;
    est.G.resize(K);
    est.L.resize(K);
    // Marginals aggregate over *all* incoming chips -- no excluded term.
    for (int i = 0; i < K; ++i) {
        double g = 0.0, l = 0.0;
        for (int a = 0; a < N; ++a) {
            const double r = 1.0 / messages.lambda_hat(a, i);
            g += S(a, i) * irN * messages.gamma_hat(a, i) * r;
            l += S(a, i) * S(a, i) * r;
        }
        est.G(i) = g;
        est.L(i) = 1.0 + l * invN;
    }
    return est;
}

int default_t_max(double alpha, double sigma) {
    try {
        return 10 * int(std::ceil(t_star(alpha, sigma))) + 50;
    } catch (const BpmudError&) {
        return 500;
    }
}

BpRunReport run_bp(const SystemInstance& instance, double tol, int t_max,
                   const Eigen::VectorXd* reference) {
    if (tol <= 0.0) throw ParameterError("run_bp: tol must be > 0");
    if (t_max < 0) t_max = default_t_max(instance.alpha(), instance.noise_std);

    BpRunReport report;
    EdgeMessages cur = init_messages(instance);
    MarginalEstimate est = extract_marginals(cur, instance);
    record_history(report.history, est, instance, reference);

    for (int t = 0; t < t_max; ++t) {
        EdgeMessages next = bp_iterate(cur, instance);
        const double delta =
            std::max((next.lambda - cur.lambda).cwiseAbs().maxCoeff(),
                     (next.gamma - cur.gamma).cwiseAbs().maxCoeff());
        cur = std::move(next);
        report.iterations_used = t + 1;
        est = extract_marginals(cur, instance);
        record_history(report.history, est, instance, reference);
        if (delta <= tol) {
            report.converged = true;
            break;
        }
    }
    report.final_estimate = std::move(est);
    return report;
}

} // namespace bpmud
