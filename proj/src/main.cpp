#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bpmud/approx_bp.hpp"
#include "bpmud/bp_core.hpp"
#include "bpmud/fixedpoint.hpp"
#include "bpmud/harness.hpp"
#include "bpmud/spectral.hpp"
#include "bpmud/sysmodel.hpp"

namespace {

using namespace bpmud;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << text;
}

struct DetectArgs {
    std::string detector = "bp";
    int users = 50;
    int chips = 100;
    double sigma = 0.2;
    std::uint64_t seed = 1;
    double tol = 1e-10;
    int max_iters = -1;
    std::string history_path;
    std::string dump_path;
    std::string instance_path;
};

int cmd_detect(const DetectArgs& args) {
    SystemInstance instance;
    if (!args.instance_path.empty())
        instance = load_instance_json(read_file(args.instance_path));
    else
        instance = generate_instance(args.users, args.chips,
                                     SignatureDistribution::Binary, args.sigma,
                                     args.seed);
    if (!args.dump_path.empty())
        write_file(args.dump_path, dump_instance_json(instance));

    PosteriorOracle oracle = mmse_solve(instance);
    const int K = instance.K();
    const double rootK = std::sqrt(double(K));

    Eigen::VectorXd xh;
    bool converged = true;
    int iterations = 0;
    std::vector<HistoryEntry> history;

    const DetectorKind kind = detector_from_name(args.detector);
    switch (kind) {
    case DetectorKind::Matched: {
        const double scale = 1.0 + instance.noise_std * instance.noise_std +
                             double(K - 1) / double(instance.N());
        xh = matched_filter(instance) / scale;
        break;
    }
    case DetectorKind::Mmse:
        xh = oracle.mean;
        break;
    case DetectorKind::Bp:
    case DetectorKind::Abp: {
        const BpRunReport report =
            kind == DetectorKind::Bp
                ? run_bp(instance, args.tol, args.max_iters, &oracle.mean)
                : run_abp(instance, args.tol, args.max_iters, &oracle.mean);
        xh = report.final_estimate.x_hat();
        converged = report.converged;
        iterations = report.iterations_used;
        history = report.history;
        break;
    }
    }

    if (!args.history_path.empty()) {
        std::string csv = "iter,mse,dist_to_mmse\n";
        for (const HistoryEntry& h : history)
            csv += std::to_string(h.iteration) + "," + std::to_string(h.mse) +
                   "," + std::to_string(h.dist_to_mmse) + "\n";
        write_file(args.history_path, csv);
    }

    const double mse = (xh - instance.symbols).squaredNorm() / double(K);
    const double dist = (xh - oracle.mean).norm() / rootK;
    std::cout << "detector,converged,iterations,mse,dist_to_mmse\n"
              << args.detector << ',' << (converged ? 1 : 0) << ',' << iterations
              << ',' << mse << ',' << dist << '\n';
    return 0;
}

int cmd_sweep(const std::string& config_path, std::string out_path,
              const std::string& summary_path) {
    const ExperimentConfig config = parse_experiment_config(read_file(config_path));
    if (out_path.empty()) out_path = config.output_path;

    const SweepResult result = run_experiment(config);
    write_sweep_outputs(result, config, out_path);

    const std::string summary = summary_csv(summarize(result));
    if (!summary_path.empty()) write_file(summary_path, summary);
    std::cout << summary;
    if (result.error_rows > 0) {
        std::cerr << result.error_rows << " detector error row(s) recorded\n";
        return 2;
    }
    return 0;
}

int cmd_tstar(const std::vector<double>& alphas, const std::vector<double>& sigmas,
              const std::string& out_path) {
    std::string csv = "alpha,sigma,Lambda,lambda_inf,lambda_hat_inf,t_star,"
                      "asymptotic_mse\n";
    for (const double alpha : alphas)
        for (const double sigma : sigmas) {
            const FixedPointReport rep = make_fixed_point_report(alpha, sigma);
            std::ostringstream row;
            row << alpha << ',' << sigma << ',' << rep.Lambda << ','
                << rep.lambda_inf << ',' << rep.lambda_hat_inf << ','
                << rep.t_star << ',' << rep.asymptotic_mse << '\n';
            csv += row.str();
        }
    if (out_path.empty())
        std::cout << csv;
    else
        write_file(out_path, csv);
    return 0;
}

int cmd_spectral(int users, int chips, double sigma, int trials,
                 std::uint64_t seed, int iters, int trace_power,
                 const std::string& out_path) {
    std::string csv =
        "seed,growth_raw,growth_normalized,stable,D,trace_ratio\n";
    for (int m = 0; m < trials; ++m) {
        const std::uint64_t trial_seed = seed + std::uint64_t(m);
        const SystemInstance instance = generate_instance(
            users, chips, SignatureDistribution::Binary, sigma, trial_seed);
        const GrowthEstimate growth =
            spectral_growth_rate(instance.signatures, sigma, iters, trial_seed);

        double D = std::numeric_limits<double>::quiet_NaN();
        try {
            const PosteriorOracle oracle = mmse_solve(instance);
            const BpRunReport report = run_bp(instance, 1e-10, -1, &oracle.mean);
            if (report.converged)
                D = discrepancy_D(instance, report, oracle).D;
        } catch (const BpmudError&) {
            // divergent or singular trial: D stays NaN
        }

        double trace_ratio = std::numeric_limits<double>::quiet_NaN();
        if (trace_power >= 1)
            trace_ratio =
                trace_check(users, chips, trace_power, 1, trial_seed).ratio_mean;

        std::ostringstream row;
        row << trial_seed << ',' << growth.raw << ',' << growth.normalized << ','
            << (growth.stable ? 1 : 0) << ',' << D << ',' << trace_ratio << '\n';
        csv += row.str();
    }
    if (out_path.empty())
        std::cout << csv;
    else
        write_file(out_path, csv);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Belief-propagation multi-user detection experiments"};
    app.require_subcommand(1);

    DetectArgs det;
    CLI::App* detect = app.add_subcommand(
        "detect", "Run one detector on one generated or loaded instance");
    detect->add_option("--detector", det.detector,
                       "matched | mmse | bp | abp (default bp)");
    detect->add_option("-K,--users", det.users, "number of users");
    detect->add_option("-N,--chips", det.chips, "number of chips");
    detect->add_option("--sigma", det.sigma, "noise standard deviation");
    detect->add_option("--seed", det.seed, "instance seed");
    detect->add_option("--tol", det.tol, "convergence tolerance");
    detect->add_option("--max-iters", det.max_iters,
                       "iteration budget (-1 = auto)");
    detect->add_option("--history", det.history_path,
                       "write per-iteration CSV here");
    detect->add_option("--dump-instance", det.dump_path,
                       "write the instance as JSON here");
    detect->add_option("--instance", det.instance_path,
                       "load instance JSON instead of generating");

    std::string sweep_config, sweep_out, sweep_summary;
    CLI::App* sweep =
        app.add_subcommand("sweep", "Run a multi-trial detector comparison");
    sweep->add_option("--config", sweep_config, "experiment config JSON")
        ->required();
    sweep->add_option("--out", sweep_out, "results CSV path (overrides config)");
    sweep->add_option("--summary", sweep_summary, "summary CSV path");

    std::vector<double> ts_alpha{0.5, 1.0};
    std::vector<double> ts_sigma{0.1, 0.2, 0.4, 0.8};
    std::string ts_out;
    CLI::App* tstar_cmd = app.add_subcommand(
        "tstar", "Tabulate the large-system fixed point and convergence time");
    tstar_cmd->add_option("--alpha", ts_alpha, "load factors K/N");
    tstar_cmd->add_option("--sigma", ts_sigma, "noise standard deviations");
    tstar_cmd->add_option("--out", ts_out, "output CSV path (default stdout)");

    int sp_users = 50, sp_chips = 100, sp_trials = 20, sp_iters = 400;
    int sp_trace = 0;
    double sp_sigma = 0.2;
    std::uint64_t sp_seed = 1;
    std::string sp_out;
    CLI::App* spectral_cmd = app.add_subcommand(
        "spectral", "Per-seed growth rate, variance discrepancy, trace ratio");
    spectral_cmd->add_option("-K,--users", sp_users, "number of users");
    spectral_cmd->add_option("-N,--chips", sp_chips, "number of chips");
    spectral_cmd->add_option("--sigma", sp_sigma, "noise standard deviation");
    spectral_cmd->add_option("--trials", sp_trials, "number of seeds");
    spectral_cmd->add_option("--seed", sp_seed, "first seed");
    spectral_cmd->add_option("--iters", sp_iters, "power-iteration steps");
    spectral_cmd->add_option("--trace-power", sp_trace,
                             "trace-check power t in [1,4], 0 disables");
    spectral_cmd->add_option("--out", sp_out, "output CSV path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (detect->parsed()) return cmd_detect(det);
        if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_out, sweep_summary);
        if (tstar_cmd->parsed()) return cmd_tstar(ts_alpha, ts_sigma, ts_out);
        if (spectral_cmd->parsed())
            return cmd_spectral(sp_users, sp_chips, sp_sigma, sp_trials, sp_seed,
                                sp_iters, sp_trace, sp_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const BpmudError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
