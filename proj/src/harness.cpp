#include "bpmud/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <thread>
#include <utility>

#include <json.hpp>

#include "bpmud/approx_bp.hpp"
#include "bpmud/bp_core.hpp"
#include "bpmud/fixedpoint.hpp"
#include "bpmud/spectral.hpp"
#include "bpmud/sysmodel.hpp"

namespace bpmud {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double median(std::vector<double> v) {
    if (v.empty()) return kNaN;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int thread_count(std::size_t units) {
    unsigned n = 0;
    if (const char* env = std::getenv("BPMUD_THREADS")) {
        char* end = nullptr;
        const unsigned long parsed = std::strtoul(env, &end, 10);
        if (end && *end == '\0' && parsed >= 1) n = unsigned(parsed);
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return int(std::min<std::size_t>(n, std::max<std::size_t>(units, 1)));
}

double run_seconds(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

SweepRow error_row(int trial, DetectorKind det, double sigma, double wall) {
    SweepRow row;
    row.trial = trial;
    row.detector = det;
    row.sigma = sigma;
    row.iter = -1;
    row.mse = kNaN;
    row.dist_to_mmse = kNaN;
    row.converged = false;
    row.wall_time = wall;
    return row;
}

// All detector runs for one (trial, sigma) cell.
void run_unit(const ExperimentConfig& config, int trial, double sigma,
              std::vector<SweepRow>& rows, int& errors) {
    const SystemInstance instance =
        generate_instance(config.K, config.N, SignatureDistribution::Binary,
                          sigma, config.base_seed + std::uint64_t(trial));
    const double alpha_scale =
        1.0 + sigma * sigma + double(config.K - 1) / double(config.N);

    std::optional<PosteriorOracle> oracle;
    try {
        oracle = mmse_solve(instance);
    } catch (const BpmudError&) {
        // Leave the reference empty; the mmse detector row records the failure.
    }
    const Eigen::VectorXd* reference = oracle ? &oracle->mean : nullptr;
    const double rootK = std::sqrt(double(config.K));

    for (const DetectorKind det : config.detectors) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            switch (det) {
            case DetectorKind::Matched: {
                const Eigen::VectorXd xh = matched_filter(instance) / alpha_scale;
                SweepRow row;
                row.trial = trial;
                row.detector = det;
                row.sigma = sigma;
                row.iter = 0;
                row.mse = (xh - instance.symbols).squaredNorm() / double(config.K);
                row.dist_to_mmse =
                    reference ? (xh - *reference).norm() / rootK : kNaN;
                row.converged = true;
                row.wall_time = run_seconds(t0);
                rows.push_back(row);
                break;
            }
            case DetectorKind::Mmse: {
                if (!oracle) throw SingularSystemError("mmse oracle unavailable");
                SweepRow row;
                row.trial = trial;
                row.detector = det;
                row.sigma = sigma;
                row.iter = 0;
                row.mse = (oracle->mean - instance.symbols).squaredNorm() /
                          double(config.K);
                row.dist_to_mmse = 0.0; // by definition
                row.converged = true;
                row.wall_time = run_seconds(t0);
                rows.push_back(row);
                break;
            }
            case DetectorKind::Bp:
            case DetectorKind::Abp: {
                const BpRunReport report =
                    det == DetectorKind::Bp
                        ? run_bp(instance, config.tol, config.max_iters, reference)
                        : run_abp(instance, config.tol, config.max_iters,
                                  reference);
                const double wall = run_seconds(t0);
                for (const HistoryEntry& h : report.history) {
                    SweepRow row;
                    row.trial = trial;
                    row.detector = det;
                    row.sigma = sigma;
                    row.iter = h.iteration;
                    row.mse = h.mse;
                    row.dist_to_mmse = h.dist_to_mmse;
                    row.converged = report.converged;
                    row.wall_time = wall;
                    rows.push_back(row);
                }
                break;
            }
            }
        } catch (const BpmudError&) {
            rows.push_back(error_row(trial, det, sigma, run_seconds(t0)));
            ++errors;
        }
    }
}

void validate(const ExperimentConfig& config) {
    if (config.K < 1 || config.N < 1)
        throw ConfigError("config: K and N must be >= 1");
    if (config.trials < 1) throw ConfigError("config: trials must be >= 1");
    if (config.detectors.empty())
        throw ConfigError("config: detectors must be non-empty");
    if (config.sigma_list.empty())
        throw ConfigError("config: sigma_list must be non-empty");
    for (const double s : config.sigma_list)
        if (!(s >= 0.0)) throw ConfigError("config: sigma values must be >= 0");
    if (!(config.tol > 0.0)) throw ConfigError("config: tol must be > 0");
    if (config.max_iters < -1)
        throw ConfigError("config: max_iters must be >= 0, or -1 for the default");
}

} // namespace

const char* detector_name(DetectorKind kind) {
    switch (kind) {
    case DetectorKind::Matched: return "matched";
    case DetectorKind::Mmse: return "mmse";
    case DetectorKind::Bp: return "bp";
    case DetectorKind::Abp: return "abp";
    }
    return "unknown";
}

DetectorKind detector_from_name(const std::string& name) {
    if (name == "matched") return DetectorKind::Matched;
    if (name == "mmse") return DetectorKind::Mmse;
    if (name == "bp") return DetectorKind::Bp;
    if (name == "abp") return DetectorKind::Abp;
    throw ConfigError("config: unknown detector \"" + name + "\"");
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }

    ExperimentConfig config;
    try {
        if (!j.is_object()) throw ConfigError("config: top level must be an object");
        config.N = j.at("N").get<int>();
        if (j.contains("K"))
            config.K = j.at("K").get<int>();
        else if (j.contains("alpha"))
            config.K = int(std::llround(j.at("alpha").get<double>() * config.N));
        else
            throw ConfigError("config: need either K or alpha");
        config.sigma_list = j.at("sigma_list").get<std::vector<double>>();
        for (const auto& name : j.at("detectors").get<std::vector<std::string>>())
            config.detectors.push_back(detector_from_name(name));
        config.trials = j.value("trials", 1);
        config.base_seed = j.value("base_seed", std::uint64_t(1));
        config.max_iters = j.value("max_iters", -1);
        config.tol = j.value("tol", 1e-10);
        config.output_path = j.value("output_path", std::string("results.csv"));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    validate(config);
    return config;
}

std::string experiment_config_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["K"] = config.K;
    j["N"] = config.N;
    j["sigma_list"] = config.sigma_list;
    std::vector<std::string> names;
    for (const DetectorKind det : config.detectors)
        names.emplace_back(detector_name(det));
    j["detectors"] = names;
    j["trials"] = config.trials;
    j["base_seed"] = config.base_seed;
    j["max_iters"] = config.max_iters;
    j["tol"] = config.tol;
    j["output_path"] = config.output_path;
    return j.dump(2);
}

SweepResult run_experiment(const ExperimentConfig& config) {
    validate(config);

    struct Unit {
        int trial;
        double sigma;
    };
    std::vector<Unit> units;
    for (int trial = 0; trial < config.trials; ++trial)
        for (const double sigma : config.sigma_list) units.push_back({trial, sigma});

    std::vector<std::vector<SweepRow>> unit_rows(units.size());
    std::vector<int> unit_errors(units.size(), 0);
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        for (;;) {
            const std::size_t u = next.fetch_add(1);
            if (u >= units.size()) return;
            run_unit(config, units[u].trial, units[u].sigma, unit_rows[u],
                     unit_errors[u]);
        }
    };
    const int threads = thread_count(units.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(std::size_t(threads));
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SweepResult result;
    result.K = config.K;
    result.N = config.N;
    for (std::size_t u = 0; u < units.size(); ++u) {
        result.error_rows += unit_errors[u];
        result.rows.insert(result.rows.end(), unit_rows[u].begin(),
                           unit_rows[u].end());
    }
    std::sort(result.rows.begin(), result.rows.end(),
              [](const SweepRow& a, const SweepRow& b) {
                  if (a.trial != b.trial) return a.trial < b.trial;
                  if (a.sigma != b.sigma) return a.sigma < b.sigma;
                  const std::string an = detector_name(a.detector);
                  const std::string bn = detector_name(b.detector);
                  if (an != bn) return an < bn;
                  return a.iter < b.iter;
              });
    return result;
}

double fit_contraction(const std::vector<int>& iters,
                       const std::vector<double>& dists) {
    if (iters.size() != dists.size() || iters.size() < 3) return kNaN;
    double floor = std::numeric_limits<double>::infinity();
    for (const double d : dists)
        if (std::isfinite(d) && d > 0.0) floor = std::min(floor, d);
    if (!std::isfinite(floor)) return kNaN;
    const double hi = 0.1 * dists.front();
    const double lo = std::max(100.0 * floor, 1e-11);

    // Fit log d(t) = a + t log c over the window clear of both the initial
    // transient and the convergence plateau.
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (std::size_t m = 0; m < dists.size(); ++m) {
        const double d = dists[m];
        if (!std::isfinite(d) || d < lo || d > hi) continue;
        const double x = double(iters[m]);
        const double y = std::log(d);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 3) return kNaN;
    const double denom = double(n) * sxx - sx * sx;
    if (denom == 0.0) return kNaN;
    return std::exp((double(n) * sxy - sx * sy) / denom);
}

std::vector<SummaryRow> summarize(const SweepResult& result) {
    if (result.rows.empty())
        throw ParameterError("summarize: result has no rows");
    const double alpha = double(result.K) / double(result.N);

    // (detector, sigma) -> trial -> that run's rows, in iteration order.
    std::map<std::pair<std::string, double>,
             std::map<int, std::vector<const SweepRow*>>>
        groups;
    for (const SweepRow& row : result.rows)
        groups[{detector_name(row.detector), row.sigma}][row.trial].push_back(
            &row);

    std::vector<SummaryRow> summary;
    for (auto& [key, trials] : groups) {
        SummaryRow out;
        out.detector = detector_from_name(key.first);
        out.sigma = key.second;
        const bool iterative = out.detector == DetectorKind::Bp ||
                               out.detector == DetectorKind::Abp;

        std::vector<double> final_mse, iters_to_tol, fits;
        for (auto& [trial, rows] : trials) {
            (void)trial;
            std::sort(rows.begin(), rows.end(),
                      [](const SweepRow* a, const SweepRow* b) {
                          return a->iter < b->iter;
                      });
            const SweepRow* last = rows.back();
            if (last->iter < 0) continue; // error row: excluded from medians
            final_mse.push_back(last->mse);
            if (last->converged) iters_to_tol.push_back(double(last->iter));
            if (iterative) {
                std::vector<int> its;
                std::vector<double> ds;
                for (const SweepRow* r : rows) {
                    its.push_back(r->iter);
                    ds.push_back(r->dist_to_mmse);
                }
                const double c = fit_contraction(its, ds);
                if (std::isfinite(c)) fits.push_back(c);
            }
        }
        out.median_final_mse = median(std::move(final_mse));
        out.median_iters = median(std::move(iters_to_tol));
        out.fitted_contraction = iterative ? median(std::move(fits)) : kNaN;
        out.t_star_empirical =
            (std::isfinite(out.fitted_contraction) &&
             out.fitted_contraction > 0.0 && out.fitted_contraction < 1.0)
                ? -1.0 / std::log(out.fitted_contraction)
                : kNaN;
        if (iterative) {
            try {
                out.t_star_theory = t_star(alpha, out.sigma);
            } catch (const BpmudError&) {
                out.t_star_theory = kNaN;
            }
        } else {
            out.t_star_theory = kNaN;
        }
        summary.push_back(out);
    }
    return summary;
}

double theoretical_mse(double alpha, double sigma) {
    return 1.0 / (1.0 + tse_hanly_lambda(alpha, sigma));
}

std::string sweep_csv(const SweepResult& result) {
    std::string csv =
        "trial,detector,sigma,iter,mse,dist_to_mmse,converged,wall_time\n";
    for (const SweepRow& row : result.rows) {
        csv += std::to_string(row.trial);
        csv += ',';
        csv += detector_name(row.detector);
        csv += ',';
        csv += fmt(row.sigma);
        csv += ',';
        csv += std::to_string(row.iter);
        csv += ',';
        csv += fmt(row.mse);
        csv += ',';
        csv += fmt(row.dist_to_mmse);
        csv += ',';
        csv += row.converged ? '1' : '0';
        csv += ',';
        csv += fmt(row.wall_time);
        csv += '\n';
    }
    return csv;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::string csv =
        "detector,sigma,median_final_mse,median_iters,fitted_contraction,"
        "t_star_empirical,t_star_theory\n";
    for (const SummaryRow& row : rows) {
        csv += detector_name(row.detector);
        csv += ',';
        csv += fmt(row.sigma);
        csv += ',';
        csv += fmt(row.median_final_mse);
        csv += ',';
        csv += fmt(row.median_iters);
        csv += ',';
        csv += fmt(row.fitted_contraction);
        csv += ',';
        csv += fmt(row.t_star_empirical);
        csv += ',';
        csv += fmt(row.t_star_theory);
        csv += '\n';
    }
    return csv;
}

void write_sweep_outputs(const SweepResult& result,
                         const ExperimentConfig& config,
                         const std::string& path) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot open output file: " + path);
        out << sweep_csv(result);
    }
    nlohmann::json meta;
    meta["config"] = nlohmann::json::parse(experiment_config_json(config));
    meta["code_version"] = kVersion;
    meta["rows"] = result.rows.size();
    meta["error_rows"] = result.error_rows;
    const std::string meta_path = path + ".meta.json";
    std::ofstream out(meta_path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + meta_path);
    out << meta.dump(2) << '\n';
}

} // namespace bpmud
