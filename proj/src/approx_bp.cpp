#include "bpmud/approx_bp.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "bpmud/fixedpoint.hpp"

namespace bpmud {

namespace {

constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

void check_finite(const VertexState& state) {
    for (int i = 0; i < state.G.size(); ++i)
        if (!std::isfinite(state.G(i)))
            throw NumericalDivergenceError(
                "non-finite user accumulator (user " + std::to_string(i) + ")",
                std::size_t(i), kNoIndex);
    for (int a = 0; a < state.G_hat.size(); ++a)
        if (!std::isfinite(state.G_hat(a)))
            throw NumericalDivergenceError(
                "non-finite chip accumulator (chip " + std::to_string(a) + ")",
                kNoIndex, std::size_t(a));
}

} // namespace

VertexState abp_init(const SystemInstance& instance) {
    if (!instance.signatures.is_binary())
        throw UnsupportedDistributionError(
            "abp_init: the scalar variance collapse requires binary signatures");
    VertexState state;
    state.iteration = 0;
    state.G = Eigen::VectorXd::Zero(instance.K());
    state.G_hat = instance.received;
    state.lambda_t = 1.0;
    state.lambda_hat_t =
        scalar_lambda_hat(1.0, instance.K(), instance.N(), instance.noise_std);
    state.lambda_hat_prev = state.lambda_hat_t; // nothing consumed yet
    return state;
}

VertexState abp_iterate(const VertexState& state, const SystemInstance& instance,
                        OpCount* ops) {
    const int K = instance.K();
    const int N = instance.N();
    if (state.G.size() != K || state.G_hat.size() != N)
        throw DimensionError("abp_iterate: state shape does not match instance");
    const auto& S = instance.signatures.entries;
    const double irN = 1.0 / std::sqrt(double(N));
    const double alpha = instance.alpha();
    const double lt = state.lambda_t;
    const double lht = state.lambda_hat_t;

    VertexState next;
    next.iteration = state.iteration + 1;
    // The user update consumes the chip accumulators of the previous
    // iteration; the chip update then consumes the *fresh* user values and
    // the previous lambda_hat, matching the staggered scalar sequence.
    next.G = state.G / (lt * lht) + (S.transpose() * state.G_hat) * (irN / lht);
    next.lambda_t = scalar_lambda_next(lht, N);
    next.G_hat = instance.received +
                 (alpha / (next.lambda_t * lht)) * state.G_hat -
                 (S * next.G) * (irN / next.lambda_t);
    next.lambda_hat_t =
        scalar_lambda_hat(next.lambda_t, K, N, instance.noise_std);
    next.lambda_hat_prev = lht;

    if (ops) {
        const std::uint64_t nk = std::uint64_t(N) * std::uint64_t(K);
        ops->mul += 2 * nk + 2 * std::uint64_t(K) + 2 * std::uint64_t(N);
        ops->add += 2 * nk + std::uint64_t(K) + 2 * std::uint64_t(N);
        ops->div += 4;
    }
    check_finite(next);
    return next;
}

BpRunReport run_abp(const SystemInstance& instance, double tol, int t_max,
                    const Eigen::VectorXd* reference) {
    if (tol <= 0.0) throw ParameterError("run_abp: tol must be > 0");
    if (t_max < 0) t_max = default_t_max(instance.alpha(), instance.noise_std);
    const int K = instance.K();

    BpRunReport report;
    VertexState cur = abp_init(instance);
    for (int t = 0; t < t_max; ++t) {
        VertexState next = abp_iterate(cur, instance);
        const double delta =
            std::max((next.G - cur.G).cwiseAbs().maxCoeff(),
                     (next.G_hat - cur.G_hat).cwiseAbs().maxCoeff());
        cur = std::move(next);
        report.iterations_used = t + 1;

        HistoryEntry entry;
        entry.iteration = cur.iteration;
        const Eigen::VectorXd xh = cur.G / cur.lambda_t;
        entry.mse = (xh - instance.symbols).squaredNorm() / double(K);
        entry.dist_to_mmse =
            reference ? (xh - *reference).norm() / std::sqrt(double(K))
                      : std::numeric_limits<double>::quiet_NaN();
        report.history.push_back(entry);

        if (delta <= tol) {
            report.converged = true;
            break;
        }
    }

    // The converged estimate normalises by the stationary scalar, not the
    // last iterate, so the output is exactly G / lambda_inf.
    const double lambda_inf =
        scalar_fixed_point(K, instance.N(), instance.noise_std).first;
    report.final_estimate.G = cur.G;
    report.final_estimate.L = Eigen::VectorXd::Constant(K, lambda_inf);
    report.final_estimate.iteration = cur.iteration;
    return report;
}

double fixed_point_residual(const VertexState& state,
                            const SystemInstance& instance, double Lambda) {
    if (!(Lambda > 0.0))
        throw ParameterError("fixed_point_residual: Lambda must be > 0");
    const int K = instance.K();
    const int N = instance.N();
    if (state.G.size() != K || state.G_hat.size() != N)
        throw DimensionError("fixed_point_residual: state shape does not match instance");
    const auto& S = instance.signatures.entries;
    const double irN = 1.0 / std::sqrt(double(N));
    const double shrink = Lambda / (1.0 + Lambda);

    const Eigen::VectorXd r1 =
        state.G - shrink * state.G - Lambda * irN * (S.transpose() * state.G_hat);
    const Eigen::VectorXd r2 = state.G_hat - instance.alpha() * shrink * state.G_hat -
                               instance.received +
                               (irN / (1.0 + Lambda)) * (S * state.G);
    return std::max(r1.cwiseAbs().maxCoeff(), r2.cwiseAbs().maxCoeff());
}

} // namespace bpmud
