#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "bpmud/fixedpoint.hpp"
#include "bpmud/harness.hpp"

using namespace bpmud;

namespace {

// Drop the wall_time column (always the last field) so byte comparisons
// ignore the one legitimately nondeterministic value.
std::string strip_wall(const std::string& csv) {
    std::string out;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t pos = line.rfind(',');
        out += line.substr(0, pos);
        out += '\n';
    }
    return out;
}

SweepRow make_row(int trial, DetectorKind det, double sigma, int iter,
                  double mse, double dist, bool converged) {
    SweepRow row;
    row.trial = trial;
    row.detector = det;
    row.sigma = sigma;
    row.iter = iter;
    row.mse = mse;
    row.dist_to_mmse = dist;
    row.converged = converged;
    row.wall_time = 0.0;
    return row;
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("detector names round trip") {
    for (const DetectorKind det :
         {DetectorKind::Matched, DetectorKind::Mmse, DetectorKind::Bp,
          DetectorKind::Abp})
        CHECK(detector_from_name(detector_name(det)) == det);
    CHECK_THROWS_AS(detector_from_name("zf"), ConfigError);
}

TEST_CASE("config parsing accepts K or alpha and applies defaults") {
    const ExperimentConfig full = parse_experiment_config(R"({
        "K": 30, "N": 60, "sigma_list": [0.2, 0.4],
        "detectors": ["bp", "mmse"], "trials": 4, "base_seed": 7,
        "max_iters": 25, "tol": 1e-8, "output_path": "x.csv"})");
    CHECK(full.K == 30);
    CHECK(full.N == 60);
    CHECK(full.sigma_list == std::vector<double>{0.2, 0.4});
    REQUIRE(full.detectors.size() == 2);
    CHECK(full.detectors[0] == DetectorKind::Bp);
    CHECK(full.detectors[1] == DetectorKind::Mmse);
    CHECK(full.trials == 4);
    CHECK(full.base_seed == 7);
    CHECK(full.max_iters == 25);
    CHECK(full.tol == 1e-8);
    CHECK(full.output_path == "x.csv");

    const ExperimentConfig by_alpha = parse_experiment_config(
        R"({"alpha": 0.5, "N": 60, "sigma_list": [0.2], "detectors": ["bp"]})");
    CHECK(by_alpha.K == 30);
    CHECK(by_alpha.trials == 1);
    CHECK(by_alpha.base_seed == 1);
    CHECK(by_alpha.max_iters == -1);
    CHECK(by_alpha.tol == 1e-10);
    CHECK(by_alpha.output_path == "results.csv");
}

TEST_CASE("config parsing rejects malformed input") {
    CHECK_THROWS_AS(parse_experiment_config("not json"), ConfigError);
    CHECK_THROWS_AS(parse_experiment_config("[1,2]"), ConfigError);
    // Missing N entirely.
    CHECK_THROWS_AS(parse_experiment_config(
                        R"({"K": 4, "sigma_list": [0.2], "detectors": ["bp"]})"),
                    ConfigError);
    // Neither K nor alpha.
    CHECK_THROWS_AS(parse_experiment_config(
                        R"({"N": 8, "sigma_list": [0.2], "detectors": ["bp"]})"),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_experiment_config(
            R"({"K": 4, "N": 8, "sigma_list": [0.2], "detectors": ["zf"]})"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_experiment_config(
            R"({"K": 4, "N": 8, "sigma_list": [], "detectors": ["bp"]})"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_experiment_config(
            R"({"K": 4, "N": 8, "sigma_list": [-0.2], "detectors": ["bp"]})"),
        ConfigError);
    CHECK_THROWS_AS(
        parse_experiment_config(
            R"({"K": 0, "N": 8, "sigma_list": [0.2], "detectors": ["bp"]})"),
        ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"K": 4, "N": 8,
        "sigma_list": [0.2], "detectors": ["bp"], "trials": 0})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"K": 4, "N": 8,
        "sigma_list": [0.2], "detectors": ["bp"], "tol": 0.0})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_experiment_config(R"({"K": 4, "N": 8,
        "sigma_list": [0.2], "detectors": ["bp"], "max_iters": -5})"),
                    ConfigError);
}

TEST_CASE("config serialization round trips") {
    ExperimentConfig config;
    config.K = 12;
    config.N = 24;
    config.sigma_list = {0.1, 0.8};
    config.detectors = {DetectorKind::Matched, DetectorKind::Abp};
    config.trials = 3;
    config.base_seed = 123456789012345ULL;
    config.max_iters = 40;
    config.tol = 2.5e-9;
    config.output_path = "out/run.csv";

    const ExperimentConfig back =
        parse_experiment_config(experiment_config_json(config));
    CHECK(back.K == config.K);
    CHECK(back.N == config.N);
    CHECK(back.sigma_list == config.sigma_list);
    CHECK(back.detectors == config.detectors);
    CHECK(back.trials == config.trials);
    CHECK(back.base_seed == config.base_seed);
    CHECK(back.max_iters == config.max_iters);
    CHECK(back.tol == config.tol);
    CHECK(back.output_path == config.output_path);
}

TEST_CASE("large-system mse floor has the right limits and ordering") {
    // With no load the floor is the scalar channel mse sigma^2/(1+sigma^2).
    for (const double sigma : {0.1, 0.5, 1.0})
        CHECK(theoretical_mse(0.0, sigma) ==
              doctest::Approx(sigma * sigma / (1.0 + sigma * sigma))
                  .epsilon(1e-14));
    CHECK(theoretical_mse(0.5, 0.1) ==
          doctest::Approx(0.01924474489596966).epsilon(1e-12));
    // More noise or more load can only raise the floor.
    CHECK(theoretical_mse(0.5, 0.2) > theoretical_mse(0.5, 0.1));
    CHECK(theoretical_mse(1.0, 0.2) > theoretical_mse(0.5, 0.2));
}

TEST_CASE("contraction fit recovers an exact geometric decay") {
    std::vector<int> iters;
    std::vector<double> dists;
    for (int t = 1; t <= 40; ++t) {
        iters.push_back(t);
        dists.push_back(std::pow(0.8, t));
    }
    CHECK(fit_contraction(iters, dists) == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("contraction fit ignores the convergence plateau") {
    std::vector<int> iters;
    std::vector<double> dists;
    for (int t = 1; t <= 60; ++t) {
        iters.push_back(t);
        dists.push_back(std::max(std::pow(0.5, t), 1e-9));
    }
    CHECK(fit_contraction(iters, dists) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("contraction fit returns nan when no window exists") {
    CHECK(std::isnan(fit_contraction({}, {})));
    CHECK(std::isnan(fit_contraction({1, 2}, {0.5, 0.25})));
    CHECK(std::isnan(fit_contraction({1, 2, 3}, {0.5, 0.25})));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(std::isnan(fit_contraction({1, 2, 3, 4}, {nan, nan, nan, nan})));
    // All samples at the same iteration: a slope is undefined.
    std::vector<int> flat_iters(10, 5);
    std::vector<double> flat_dists(10, 0.01);
    CHECK(std::isnan(fit_contraction(flat_iters, flat_dists)));
}

TEST_CASE("summaries aggregate synthetic rows as documented") {
    SweepResult result;
    result.K = 10;
    result.N = 20;

    // Direct detector: three trials, one row each.
    result.rows.push_back(make_row(0, DetectorKind::Mmse, 0.2, 0, 0.3, 0.0, true));
    result.rows.push_back(make_row(1, DetectorKind::Mmse, 0.2, 0, 0.1, 0.0, true));
    result.rows.push_back(make_row(2, DetectorKind::Mmse, 0.2, 0, 0.2, 0.0, true));

    // Iterative detector: two trials of clean geometric decay, one of them
    // deliberately pushed in reverse iteration order.
    for (int trial = 0; trial < 2; ++trial)
        for (int t = 1; t <= 40; ++t) {
            const int iter = trial == 0 ? t : 41 - t;
            result.rows.push_back(make_row(trial, DetectorKind::Bp, 0.2, iter,
                                           0.05 + std::pow(0.7, iter),
                                           std::pow(0.7, iter), true));
        }

    const std::vector<SummaryRow> summary = summarize(result);
    REQUIRE(summary.size() == 2);

    const SummaryRow& bp = summary[0];
    REQUIRE(bp.detector == DetectorKind::Bp);
    CHECK(bp.median_final_mse ==
          doctest::Approx(0.05 + std::pow(0.7, 40)).epsilon(1e-12));
    CHECK(bp.median_iters == 40.0);
    CHECK(bp.fitted_contraction == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(bp.t_star_empirical ==
          doctest::Approx(-1.0 / std::log(0.7)).epsilon(1e-9));
    CHECK(bp.t_star_theory == doctest::Approx(2.3883).epsilon(5e-4));

    const SummaryRow& mmse = summary[1];
    REQUIRE(mmse.detector == DetectorKind::Mmse);
    CHECK(mmse.median_final_mse == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(mmse.median_iters == 0.0);
    CHECK(std::isnan(mmse.fitted_contraction));
    CHECK(std::isnan(mmse.t_star_empirical));
    CHECK(std::isnan(mmse.t_star_theory));
}

TEST_CASE("summaries skip failed trials and reject empty input") {
    CHECK_THROWS_AS(summarize(SweepResult{}), ParameterError);

    SweepResult result;
    result.K = 10;
    result.N = 20;
    result.error_rows = 1;
    result.rows.push_back(
        make_row(0, DetectorKind::Mmse, 0.2, -1,
                 std::numeric_limits<double>::quiet_NaN(),
                 std::numeric_limits<double>::quiet_NaN(), false));
    result.rows.push_back(make_row(1, DetectorKind::Mmse, 0.2, 0, 0.125, 0.0, true));
    const std::vector<SummaryRow> summary = summarize(result);
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].median_final_mse == 0.125);
    CHECK(summary[0].median_iters == 0.0);
}

TEST_CASE("a one-cell sweep produces exactly the direct rows") {
    ExperimentConfig config;
    config.K = 4;
    config.N = 8;
    config.sigma_list = {0.3};
    config.detectors = {DetectorKind::Mmse};
    config.base_seed = 5;

    const SweepResult result = run_experiment(config);
    CHECK(result.K == 4);
    CHECK(result.N == 8);
    CHECK(result.error_rows == 0);
    REQUIRE(result.rows.size() == 1);
    const SweepRow& row = result.rows.front();
    CHECK(row.trial == 0);
    CHECK(row.detector == DetectorKind::Mmse);
    CHECK(row.iter == 0);
    CHECK(row.dist_to_mmse == 0.0);
    CHECK(row.converged);
    CHECK(row.mse >= 0.0);
    CHECK(row.wall_time >= 0.0);
}

TEST_CASE("detector failures become error rows instead of aborting") {
    // Noiseless and overloaded: the posterior solve is singular.
    ExperimentConfig config;
    config.K = 10;
    config.N = 5;
    config.sigma_list = {0.0};
    config.detectors = {DetectorKind::Mmse};

    const SweepResult result = run_experiment(config);
    CHECK(result.error_rows == 1);
    REQUIRE(result.rows.size() == 1);
    CHECK(result.rows.front().iter == -1);
    CHECK_FALSE(result.rows.front().converged);
    CHECK(std::isnan(result.rows.front().mse));
}

TEST_CASE("sweep output is deterministic and independent of thread count") {
    ExperimentConfig config;
    config.K = 10;
    config.N = 20;
    config.sigma_list = {0.2, 0.4};
    config.detectors = {DetectorKind::Matched, DetectorKind::Mmse,
                        DetectorKind::Bp, DetectorKind::Abp};
    config.trials = 3;
    config.base_seed = 2;

    ::setenv("BPMUD_THREADS", "1", 1);
    const std::string serial = strip_wall(sweep_csv(run_experiment(config)));
    const std::string again = strip_wall(sweep_csv(run_experiment(config)));
    ::setenv("BPMUD_THREADS", "3", 1);
    const std::string threaded = strip_wall(sweep_csv(run_experiment(config)));
    ::unsetenv("BPMUD_THREADS");

    CHECK(serial == again);
    CHECK(serial == threaded);
    CHECK(serial.rfind("trial,detector,sigma,iter,mse,dist_to_mmse,converged",
                       0) == 0);
}

TEST_CASE("sweep rows come back in canonical order") {
    ExperimentConfig config;
    config.K = 8;
    config.N = 16;
    config.sigma_list = {0.4, 0.2}; // deliberately unsorted
    config.detectors = {DetectorKind::Bp, DetectorKind::Matched};
    config.trials = 2;

    const SweepResult result = run_experiment(config);
    CHECK(std::is_sorted(
        result.rows.begin(), result.rows.end(),
        [](const SweepRow& a, const SweepRow& b) {
            if (a.trial != b.trial) return a.trial < b.trial;
            if (a.sigma != b.sigma) return a.sigma < b.sigma;
            const std::string an = detector_name(a.detector);
            const std::string bn = detector_name(b.detector);
            if (an != bn) return an < bn;
            return a.iter < b.iter;
        }));
}

TEST_CASE("iterative detectors beat the matched filter within five steps") {
    ExperimentConfig config;
    config.K = 50;
    config.N = 100;
    config.sigma_list = {0.4};
    config.detectors = {DetectorKind::Matched, DetectorKind::Mmse,
                        DetectorKind::Bp};
    config.trials = 9;
    config.base_seed = 1;

    const SweepResult result = run_experiment(config);
    REQUIRE(result.error_rows == 0);

    std::vector<double> matched, mmse, bp5, bp_final, bp_dist_final;
    std::map<int, const SweepRow*> bp_last;
    for (const SweepRow& row : result.rows) {
        if (row.detector == DetectorKind::Matched) matched.push_back(row.mse);
        if (row.detector == DetectorKind::Mmse) mmse.push_back(row.mse);
        if (row.detector == DetectorKind::Bp) {
            if (row.iter == 5) bp5.push_back(row.mse);
            auto& slot = bp_last[row.trial];
            if (!slot || row.iter > slot->iter) slot = &row;
        }
    }
    REQUIRE(matched.size() == 9);
    REQUIRE(bp5.size() == 9);
    for (const auto& [trial, row] : bp_last) {
        (void)trial;
        REQUIRE(row->converged);
        bp_final.push_back(row->mse);
        bp_dist_final.push_back(row->dist_to_mmse);
    }

    auto med = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    // Five iterations close at least half of the matched-to-posterior gap.
    const double gap = med(matched) - med(mmse);
    REQUIRE(gap > 0.0);
    CHECK(med(bp5) - med(mmse) <= 0.5 * gap);
    // At convergence the run sits essentially on the exact posterior mean.
    CHECK(med(bp_final) <= 1.05 * med(mmse));
    for (const double d : bp_dist_final) CHECK(d <= 1e-8);
}

TEST_CASE("fitted rates reproduce the asymptotic relaxation times") {
    auto t_emp = [](int K, int N, double sigma, std::uint64_t seed) {
        ExperimentConfig config;
        config.K = K;
        config.N = N;
        config.sigma_list = {sigma};
        config.detectors = {DetectorKind::Bp};
        config.trials = 5;
        config.base_seed = seed;
        const std::vector<SummaryRow> summary = summarize(run_experiment(config));
        REQUIRE(summary.size() == 1);
        return summary.front().t_star_empirical;
    };
    CHECK(std::abs(t_emp(100, 200, 0.1, 1) - 2.7) <= 0.2 * 2.7);
    CHECK(std::abs(t_emp(100, 100, 0.8, 1) - 1.3) <= 0.2 * 1.3);
}

TEST_CASE("sweep outputs land on disk with their metadata sidecar") {
    ExperimentConfig config;
    config.K = 4;
    config.N = 8;
    config.sigma_list = {0.3};
    config.detectors = {DetectorKind::Matched, DetectorKind::Mmse};
    config.trials = 2;
    config.output_path = "harness_test_tmp.csv";

    const SweepResult result = run_experiment(config);
    write_sweep_outputs(result, config, config.output_path);

    std::ifstream csv(config.output_path);
    REQUIRE(csv.good());
    std::stringstream buf;
    buf << csv.rdbuf();
    CHECK(buf.str() == sweep_csv(result));

    std::ifstream meta_in(config.output_path + ".meta.json");
    REQUIRE(meta_in.good());
    const nlohmann::json meta = nlohmann::json::parse(meta_in);
    CHECK(meta.at("config").at("K") == 4);
    CHECK(meta.at("rows") == result.rows.size());
    CHECK(meta.at("error_rows") == 0);
    CHECK(meta.at("code_version") == kVersion);

    std::remove(config.output_path.c_str());
    std::remove((config.output_path + ".meta.json").c_str());
}

} // TEST_SUITE
