#pragma once

#include <cstdint>
#include <vector>

#include "bpmud/errors.hpp"

namespace bpmud {

// Trajectory of the scalar variance recursion
//   lambda(0) = 1
//   lambda_hat(t) = sigma^2 + ((K-1)/N) / lambda(t)
//   lambda(t+1)   = 1 + ((N-1)/N) / lambda_hat(t)
// For binary signatures these scalars equal every edge-level variance
// message exactly, which is why a K x N recursion collapses to this.
struct ScalarVarianceTrajectory {
    std::vector<double> lambda;     // lambda(0..T)
    std::vector<double> lambda_hat; // lambda_hat(0..T) aligned with lambda
    int K = 0;
    int N = 0;
    bool converged = false;
};

struct FixedPointReport {
    double Lambda = 0.0;         // unique positive root of 1/L = sigma^2 + alpha/(1+L)
    double lambda_inf = 0.0;     // 1 + Lambda
    double lambda_hat_inf = 0.0; // 1 / Lambda
    double t_star = 0.0;
    double asymptotic_mse = 0.0; // 1 / (1 + Lambda)
    double alpha = 0.0;
    double sigma = 0.0;
};

// Single steps of the finite-size recursion, shared with the vertex-level
// detector so both advance the identical scalar sequence.
double scalar_lambda_hat(double lambda, int K, int N, double sigma);
double scalar_lambda_next(double lambda_hat, int N);

// Closed-form fixed point of the finite-size recursion (quadratic in
// lambda_hat), returned as (lambda_inf, lambda_hat_inf).
std::pair<double, double> scalar_fixed_point(int K, int N, double sigma);

double tse_hanly_lambda(double alpha, double sigma);

ScalarVarianceTrajectory scalar_variance_recursion(int K, int N, double sigma,
                                                   int t_max = 10000,
                                                   double tol = 1e-12);

double t_star(double alpha, double sigma);

std::int64_t iterations_for_precision(double alpha, double sigma, double delta,
                                      double Delta);

FixedPointReport make_fixed_point_report(double alpha, double sigma);

} // namespace bpmud
