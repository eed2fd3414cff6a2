#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bpmud/errors.hpp"

namespace bpmud {

inline constexpr const char* kVersion = "1.0.0";

enum class DetectorKind { Matched, Mmse, Bp, Abp };

const char* detector_name(DetectorKind kind);
DetectorKind detector_from_name(const std::string& name);

struct ExperimentConfig {
    int K = 0;
    int N = 0;
    std::vector<double> sigma_list;
    std::vector<DetectorKind> detectors;
    int trials = 1;
    std::uint64_t base_seed = 1; // per-trial seed is base_seed + trial index
    int max_iters = -1;          // -1 picks the detector default budget
    double tol = 1e-10;
    std::string output_path = "results.csv";
};

// Parse + validate a config from its JSON text. Accepts either "K" or
// "alpha" (with K = round(alpha * N)). Throws ConfigError on anything off.
ExperimentConfig parse_experiment_config(const std::string& json_text);
std::string experiment_config_json(const ExperimentConfig& config);

struct SweepRow {
    int trial = 0;
    DetectorKind detector = DetectorKind::Bp;
    double sigma = 0.0;
    int iter = 0; // estimate index for iterative detectors, 0 for direct, -1 on error
    double mse = 0.0;
    double dist_to_mmse = 0.0;
    bool converged = false;
    double wall_time = 0.0; // seconds for the whole detector run, repeated per row
};

struct SweepResult {
    std::vector<SweepRow> rows;
    int K = 0;
    int N = 0;
    int error_rows = 0; // detector failures recorded as iter = -1 rows
};

SweepResult run_experiment(const ExperimentConfig& config);

struct SummaryRow {
    DetectorKind detector = DetectorKind::Bp;
    double sigma = 0.0;
    double median_final_mse = 0.0;
    double median_iters = 0.0;        // over converged trials; NaN if none
    double fitted_contraction = 0.0;  // geometric rate of dist_to_mmse decay
    double t_star_empirical = 0.0;    // -1/log(fitted_contraction)
    double t_star_theory = 0.0;
};

std::vector<SummaryRow> summarize(const SweepResult& result);

// Least-squares slope of log dist over the clean geometric-decay window,
// returned as the per-iteration contraction factor (NaN if no window).
double fit_contraction(const std::vector<int>& iters,
                       const std::vector<double>& dists);

// Large-system per-user MMSE, the floor the iterative curves descend to.
double theoretical_mse(double alpha, double sigma);

// CSV with header trial,detector,sigma,iter,mse,dist_to_mmse,converged,wall_time;
// doubles printed shortest-round-trip so bytes are reproducible.
std::string sweep_csv(const SweepResult& result);
std::string summary_csv(const std::vector<SummaryRow>& rows);

// Writes the CSV plus a "<path>.meta.json" sidecar echoing config + version.
void write_sweep_outputs(const SweepResult& result,
                         const ExperimentConfig& config,
                         const std::string& path);

} // namespace bpmud
