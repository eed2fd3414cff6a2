#include "bpmud/fixedpoint.hpp"

#include <cmath>
#include <utility>

namespace bpmud {

double scalar_lambda_hat(double lambda, int K, int N, double sigma) {
    const double c2 = double(K - 1) / double(N);
    // Empty sum when K == 1; avoids 0/0 if lambda overflowed to inf.
    if (c2 == 0.0) return sigma * sigma;
    return sigma * sigma + c2 / lambda;
}

double scalar_lambda_next(double lambda_hat, int N) {
    const double c1 = double(N - 1) / double(N);
    if (c1 == 0.0) return 1.0;
    return 1.0 + c1 / lambda_hat;
}

std::pair<double, double> scalar_fixed_point(int K, int N, double sigma) {
    if (K < 1 || N < 1)
        throw DimensionError("scalar_fixed_point: K and N must be >= 1");
    if (sigma < 0.0)
        throw ParameterError("scalar_fixed_point: sigma must be >= 0");
    const double c1 = double(N - 1) / double(N);
    const double c2 = double(K - 1) / double(N);
    const double s2 = sigma * sigma;
    // Eliminating lambda from the two-step recursion gives
    //   lambda_hat^2 + (c1 - s2 - c2) lambda_hat - s2 c1 = 0,
    // whose unique non-negative root is the stationary lambda_hat.
    const double b = c1 - s2 - c2;
    const double disc = std::sqrt(b * b + 4.0 * s2 * c1);
    // Pick the algebraic form that avoids cancellation for either sign of b.
    const double lh = b > 0.0 ? (2.0 * s2 * c1) / (b + disc) : 0.5 * (disc - b);
    const double lam = c1 == 0.0 ? 1.0 : 1.0 + c1 / lh;
    return {lam, lh};
}

double tse_hanly_lambda(double alpha, double sigma) {
    if (alpha < 0.0)
        throw ParameterError("tse_hanly_lambda: alpha must be >= 0");
    if (sigma <= 0.0)
        throw DivergedLambdaError(
            "tse_hanly_lambda: sigma = 0 gives an unbounded effective SIR");
    const double s2 = sigma * sigma;
    // 1/L = s2 + alpha/(1+L)  <=>  s2 L^2 + (s2 + alpha - 1) L - 1 = 0.
    const double b = s2 + alpha - 1.0;
    const double disc = std::sqrt(b * b + 4.0 * s2);
    double L = 2.0 / (b + disc); // positive root, cancellation-free
    // One Newton step on g(L) = 1/L - s2 - alpha/(1+L) tightens the root
    // to full double precision regardless of conditioning.
    const double g = 1.0 / L - s2 - alpha / (1.0 + L);
    const double gp = -1.0 / (L * L) + alpha / ((1.0 + L) * (1.0 + L));
    if (gp != 0.0) L -= g / gp;
    return L;
}

ScalarVarianceTrajectory scalar_variance_recursion(int K, int N, double sigma,
                                                   int t_max, double tol) {
    if (K < 1 || N < 1)
        throw DimensionError("scalar_variance_recursion: K and N must be >= 1");
    if (sigma < 0.0)
        throw ParameterError("scalar_variance_recursion: sigma must be >= 0");
    if (t_max < 0 || tol <= 0.0)
        throw ParameterError("scalar_variance_recursion: need t_max >= 0, tol > 0");

    ScalarVarianceTrajectory traj;
    traj.K = K;
    traj.N = N;
    traj.lambda.push_back(1.0);
    traj.lambda_hat.push_back(scalar_lambda_hat(1.0, K, N, sigma));
    for (int t = 0; t < t_max; ++t) {
        const double next = scalar_lambda_next(traj.lambda_hat.back(), N);
        const double prev = traj.lambda.back();
        traj.lambda.push_back(next);
        traj.lambda_hat.push_back(scalar_lambda_hat(next, K, N, sigma));
        if (std::abs(next - prev) <= tol) {
            traj.converged = true;
            break;
        }
    }
    return traj;
}

double t_star(double alpha, double sigma) {
    if (alpha <= 0.0)
        throw ParameterError("t_star: alpha must be > 0");
    const double L = tse_hanly_lambda(alpha, sigma);
    const double c = std::sqrt(alpha) * L / (1.0 + L);
    if (c >= 1.0)
        throw NonContractiveError("t_star: contraction factor >= 1");
    return -1.0 / std::log(c);
}

std::int64_t iterations_for_precision(double alpha, double sigma, double delta,
                                      double Delta) {
    if (!(delta > 0.0) || !(Delta > delta))
        throw ParameterError("iterations_for_precision: need 0 < delta < Delta");
    return static_cast<std::int64_t>(
        std::ceil(t_star(alpha, sigma) * std::log(Delta / delta)));
}

FixedPointReport make_fixed_point_report(double alpha, double sigma) {
    FixedPointReport rep;
    rep.alpha = alpha;
    rep.sigma = sigma;
    rep.Lambda = tse_hanly_lambda(alpha, sigma);
    rep.lambda_inf = 1.0 + rep.Lambda;
    rep.lambda_hat_inf = 1.0 / rep.Lambda;
    rep.t_star = t_star(alpha, sigma);
    rep.asymptotic_mse = 1.0 / (1.0 + rep.Lambda);
    return rep;
}

} // namespace bpmud
