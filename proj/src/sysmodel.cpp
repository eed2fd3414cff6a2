#include "bpmud/sysmodel.hpp"

#include <cmath>
#include <json.hpp>

#include "bpmud/rng.hpp"

namespace bpmud {

SignatureMatrix generate_signatures(int K, int N, SignatureDistribution dist,
                                    std::uint64_t seed) {
    if (K < 1 || N < 1)
        throw DimensionError("signature matrix needs K >= 1 and N >= 1, got K=" +
                             std::to_string(K) + " N=" + std::to_string(N));
    SignatureMatrix S;
    S.N = N;
    S.K = K;
    S.dist = dist;
    S.entries.resize(N, K);
    SeededRng rng(seed, Stream::Signatures);
    // Column-major fill: one user's chips are consecutive draws, so adding
    // users does not reshuffle existing columns for a fixed seed.
    for (int i = 0; i < K; ++i)
        for (int a = 0; a < N; ++a)
            S.entries(a, i) = (dist == SignatureDistribution::Binary)
                                  ? rng.sign()
                                  : rng.gaussian();
    return S;
}

SystemInstance generate_instance(int K, int N, SignatureDistribution dist,
                                 double sigma, std::uint64_t seed) {
    if (sigma < 0.0)
        throw ParameterError("sigma must be >= 0, got " + std::to_string(sigma));
    SystemInstance inst;
    inst.signatures = generate_signatures(K, N, dist, seed);
    inst.noise_std = sigma;
    inst.seed = seed;

    SeededRng sym_rng(seed, Stream::Symbols);
    inst.symbols.resize(K);
    for (int i = 0; i < K; ++i) inst.symbols[i] = sym_rng.gaussian();

    SeededRng noise_rng(seed, Stream::Noise);
    inst.noise.resize(N);
    for (int a = 0; a < N; ++a) inst.noise[a] = sigma * noise_rng.gaussian();

    inst.received = inst.signatures.scaled() * inst.symbols + inst.noise;
    return inst;
}

Eigen::VectorXd matched_filter(const SystemInstance& inst) {
    return inst.signatures.scaled().transpose() * inst.received;
}

std::string dump_instance_json(const SystemInstance& inst) {
    nlohmann::json j;
    j["K"] = inst.K();
    j["N"] = inst.N();
    j["sigma"] = inst.noise_std;
    j["seed"] = inst.seed;
    std::vector<double> sig;
    sig.reserve(std::size_t(inst.N()) * std::size_t(inst.K()));
    for (int a = 0; a < inst.N(); ++a)
        for (int i = 0; i < inst.K(); ++i) sig.push_back(inst.signatures.entries(a, i));
    j["signatures"] = sig;
    j["x"] = std::vector<double>(inst.symbols.begin(), inst.symbols.end());
    j["w"] = std::vector<double>(inst.noise.begin(), inst.noise.end());
    j["y"] = std::vector<double>(inst.received.begin(), inst.received.end());
    return j.dump();
}

SystemInstance load_instance_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SystemInstance inst;
    int K = j.at("K").get<int>();
    int N = j.at("N").get<int>();
    if (K < 1 || N < 1) throw DimensionError("instance JSON has non-positive dimensions");
    inst.noise_std = j.at("sigma").get<double>();
    inst.seed = j.at("seed").get<std::uint64_t>();

    auto sig = j.at("signatures").get<std::vector<double>>();
    if (sig.size() != std::size_t(N) * std::size_t(K))
        throw DimensionError("instance JSON signature length mismatch");
    SignatureMatrix S;
    S.N = N;
    S.K = K;
    S.entries.resize(N, K);
    bool binary = true;
    for (int a = 0; a < N; ++a)
        for (int i = 0; i < K; ++i) {
            double v = sig[std::size_t(a) * K + i];
            S.entries(a, i) = v;
            if (v != 1.0 && v != -1.0) binary = false;
        }
    S.dist = binary ? SignatureDistribution::Binary
                    : SignatureDistribution::StandardGaussian;
    inst.signatures = std::move(S);

    auto read_vec = [&](const char* key, int len) {
        auto v = j.at(key).get<std::vector<double>>();
        if (v.size() != std::size_t(len))
            throw DimensionError(std::string("instance JSON '") + key + "' length mismatch");
        return Eigen::Map<Eigen::VectorXd>(v.data(), len).eval();
    };
    inst.symbols = read_vec("x", K);
    inst.noise = read_vec("w", N);
    inst.received = read_vec("y", N);
    return inst;
}

} // namespace bpmud
