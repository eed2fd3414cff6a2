#pragma once

#include <Eigen/Dense>

#include "bpmud/bp_core.hpp"
#include "bpmud/sysmodel.hpp"

namespace bpmud {

// State of the reduced detector: one value per user and per chip instead of
// one per edge, with the variance messages replaced by the shared scalar
// sequence (exact for binary signatures).
struct VertexState {
    Eigen::VectorXd G;     // per-user accumulator, length K
    Eigen::VectorXd G_hat; // per-chip accumulator, length N
    int iteration = 0;
    double lambda_t = 1.0;        // scalar lambda at this iteration
    double lambda_hat_t = 0.0;    // scalar lambda_hat at this iteration
    double lambda_hat_prev = 0.0; // lambda_hat used in the last G_hat update
};

VertexState abp_init(const SystemInstance& instance);

VertexState abp_iterate(const VertexState& state, const SystemInstance& instance,
                        OpCount* ops = nullptr);

BpRunReport run_abp(const SystemInstance& instance, double tol = 1e-10,
                    int t_max = -1,
                    const Eigen::VectorXd* reference = nullptr);

// Max-norm residual of the two stationarity conditions written in terms of a
// single SIR value Lambda:
//   G     = (Lambda/(1+Lambda)) G + Lambda * St^T G_hat
//   G_hat = (alpha Lambda/(1+Lambda)) G_hat + y - (1/(1+Lambda)) St G
// Zero only in the large-system limit; at finite size the floor is O(1/N).
double fixed_point_residual(const VertexState& state,
                            const SystemInstance& instance, double Lambda);

} // namespace bpmud
