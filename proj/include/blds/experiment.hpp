#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <exception>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "estimate.hpp"
#include "features.hpp"
#include "io.hpp"
#include "model.hpp"
#include "moments.hpp"
#include "recover.hpp"
#include "rng.hpp"
#include "simulate.hpp"
#include "types.hpp"

namespace blds {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kCsvSchemaVersion = 1;

/// Grid and trial settings for a sweep. JSON keys are the field names;
/// command-line flags are their kebab-case mirrors.
struct ExperimentConfig {
    Dims dims{5, 2, 2};
    double rho0 = 0.4;
    double rhok = 0.2;
    double sigma = 0.01;
    std::vector<InputKind> input_kinds{InputKind::Gaussian};
    std::vector<int> L_list{5, 6, 7};
    std::vector<Index> T_list{1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000};
    int trials = 10;
    std::uint64_t base_seed = 0;
    bool fixed_system = false;
    double overflow_guard = 1e12;
    double pe_delta = 0.1;
    int threads = 0;  // 0: hardware concurrency
    bool with_timing = false;
    std::string output;

    void validate() const {
        dims.validate();
        detail::require_config(trials >= 1, "config: trials must be >= 1");
        detail::require_config(!input_kinds.empty(), "config: input_kinds is empty");
        detail::require_config(!L_list.empty() && !T_list.empty(), "config: L_list and T_list must be nonempty");
        detail::require_config(sigma >= 0.0, "config: sigma must be nonnegative");
        detail::require_config(rho0 >= 0.0 && rhok >= 0.0, "config: rho0, rhok must be nonnegative");
        detail::require_config(pe_delta > 0.0 && pe_delta < 1.0, "config: pe_delta must lie in (0, 1)");
        for (int L : L_list) {
            FeatureConfig{L, dims.p}.validate();
            for (Index T : T_list)
                detail::require_config(T >= L, "config: T=" + std::to_string(T) + " < L=" + std::to_string(L));
        }
    }

    [[nodiscard]] Index max_T() const { return *std::max_element(T_list.begin(), T_list.end()); }
};

inline io::json to_json(const ExperimentConfig& c) {
    io::json kinds = io::json::array();
    for (auto k : c.input_kinds) kinds.push_back(std::string(to_string(k)));
    return io::json{{"n", c.dims.n},
                    {"p", c.dims.p},
                    {"m", c.dims.m},
                    {"rho0", c.rho0},
                    {"rhok", c.rhok},
                    {"sigma", c.sigma},
                    {"input_kinds", kinds},
                    {"L_list", c.L_list},
                    {"T_list", c.T_list},
                    {"trials", c.trials},
                    {"base_seed", c.base_seed},
                    {"fixed_system", c.fixed_system},
                    {"overflow_guard", c.overflow_guard},
                    {"pe_delta", c.pe_delta},
                    {"threads", c.threads},
                    {"with_timing", c.with_timing},
                    {"output", c.output}};
}

/// Overlays keys present in `j` onto `c`. Unknown keys are an error.
inline void apply_json(ExperimentConfig& c, const io::json& j) {
    static const char* known[] = {"n",      "p",         "m",          "rho0",           "rhok",     "sigma",
                                  "input_kinds", "L_list", "T_list",   "trials",         "base_seed", "fixed_system",
                                  "overflow_guard", "pe_delta", "threads", "with_timing", "output"};
    try {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return it.key() == k; }) ==
                std::end(known))
                throw ConfigError("config: unknown key '" + it.key() + "'");
        if (j.contains("n")) c.dims.n = j["n"].get<int>();
        if (j.contains("p")) c.dims.p = j["p"].get<int>();
        if (j.contains("m")) c.dims.m = j["m"].get<int>();
        if (j.contains("rho0")) c.rho0 = j["rho0"].get<double>();
        if (j.contains("rhok")) c.rhok = j["rhok"].get<double>();
        if (j.contains("sigma")) c.sigma = j["sigma"].get<double>();
        if (j.contains("input_kinds")) {
            c.input_kinds.clear();
            for (const auto& k : j["input_kinds"]) c.input_kinds.push_back(parse_input_kind(k.get<std::string>()));
        }
        if (j.contains("L_list")) c.L_list = j["L_list"].get<std::vector<int>>();
        if (j.contains("T_list")) c.T_list = j["T_list"].get<std::vector<Index>>();
        if (j.contains("trials")) c.trials = j["trials"].get<int>();
        if (j.contains("base_seed")) c.base_seed = j["base_seed"].get<std::uint64_t>();
        if (j.contains("fixed_system")) c.fixed_system = j["fixed_system"].get<bool>();
        if (j.contains("overflow_guard")) c.overflow_guard = j["overflow_guard"].get<double>();
        if (j.contains("pe_delta")) c.pe_delta = j["pe_delta"].get<double>();
        if (j.contains("threads")) c.threads = j["threads"].get<int>();
        if (j.contains("with_timing")) c.with_timing = j["with_timing"].get<bool>();
        if (j.contains("output")) c.output = j["output"].get<std::string>();
    } catch (const io::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

/// Seed of the system used by `trial` (shared by all trials with fixed_system).
inline std::uint64_t system_seed(const ExperimentConfig& c, int trial) {
    return derive_seed(c.base_seed, Stream::System, c.fixed_system ? 0u : static_cast<std::uint64_t>(trial));
}

/// Seed of the inputs and noise of `trial`. It does not depend on the grid
/// point: the trajectories for smaller T are prefixes of the longest one,
/// and input kinds share the noise stream.
inline std::uint64_t data_seed(const ExperimentConfig& c, int trial) {
    return derive_seed(c.base_seed, Stream::Samples, static_cast<std::uint64_t>(trial));
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
inline void parallel_for(Index count, int threads, const std::function<void(Index)>& fn) {
    int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = static_cast<int>(std::min<Index>(workers, count));
    if (workers <= 1) {
        for (Index i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (Index i; (i = next.fetch_add(1)) < count;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct SweepRow {
    int L = 0;
    Index T = 0;
    InputKind kind = InputKind::Gaussian;
    int trial = 0;
    std::uint64_t seed = 0;
    bool ok = true;
    double error_sq = 0.0;  // ||G - G_hat||_op^2
    double lambda_min = 0.0;
    double wall_time = 0.0;
    std::string failure;
};

struct SweepAggregate {
    InputKind kind = InputKind::Gaussian;
    int L = 0;
    Index T = 0;
    int count = 0;
    int failed = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n - 1); 0 for one trial
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepAggregate> aggregates;
};

/// Mean and sample standard deviation of error_sq per (kind, L, T) over
/// successful rows, in grid order.
inline std::vector<SweepAggregate> aggregate(const ExperimentConfig& cfg, const std::vector<SweepRow>& rows) {
    std::vector<SweepAggregate> out;
    for (auto kind : cfg.input_kinds)
        for (int L : cfg.L_list)
            for (Index T : cfg.T_list) {
                SweepAggregate a{kind, L, T};
                std::vector<double> vals;
                for (const auto& r : rows)
                    if (r.kind == kind && r.L == L && r.T == T) {
                        if (r.ok)
                            vals.push_back(r.error_sq);
                        else
                            ++a.failed;
                    }
                a.count = static_cast<int>(vals.size());
                if (!vals.empty()) {
                    double sum = 0.0;
                    for (double v : vals) sum += v;
                    a.mean = sum / a.count;
                    double ss = 0.0;
                    for (double v : vals) ss += (v - a.mean) * (v - a.mean);
                    a.stddev = a.count > 1 ? std::sqrt(ss / (a.count - 1)) : 0.0;
                }
                out.push_back(a);
            }
    return out;
}

namespace detail {

inline Trajectory simulate_prefix_on_failure(const SystemParams& sys, const Matrix& inputs, const NoiseConfig& noise,
                                             std::uint64_t seed, const SimulationOptions& opts, Index& valid_until) {
    Engine noise_rng = make_engine(derive_seed(seed, Stream::Noise));
    try {
        valid_until = inputs.rows() - 1;
        return simulate(sys, inputs, noise, noise_rng, opts);
    } catch (const InstabilityError& e) {
        // Rows before the blow-up are still valid data; re-run on that prefix.
        valid_until = e.index() - 1;
        if (valid_until < 0) return Trajectory{};
        Engine again = make_engine(derive_seed(seed, Stream::Noise));
        return simulate(sys, inputs.topRows(valid_until + 1), noise, again, opts);
    }
}

}  // namespace detail

/// One (kind, trial) task: one system, one trajectory of length max T,
/// fitted at every (L, T) on its prefixes.
inline std::vector<SweepRow> run_trial(const ExperimentConfig& cfg, InputKind kind, int trial) {
    const SystemParams sys = random_system(cfg.dims, cfg.rho0, cfg.rhok, true, system_seed(cfg, trial));
    const std::uint64_t seed = data_seed(cfg, trial);
    Engine input_rng = make_engine(derive_seed(seed, Stream::Inputs));
    const Matrix inputs = sample_inputs(InputDistribution{kind}, cfg.dims.p, cfg.max_T() + 1, input_rng);
    Index valid_until = 0;
    const Trajectory traj = detail::simulate_prefix_on_failure(sys, inputs, NoiseConfig{cfg.sigma}, seed,
                                                               SimulationOptions{cfg.overflow_guard}, valid_until);

    std::vector<SweepRow> rows;
    for (int L : cfg.L_list) {
        const FeatureConfig fc{L, cfg.dims.p};
        const MarkovParams G = true_markov(sys, L);
        for (Index T : cfg.T_list) {
            SweepRow r;
            r.L = L;
            r.T = T;
            r.kind = kind;
            r.trial = trial;
            r.seed = seed;
            if (T > valid_until) {
                r.ok = false;
                r.failure = "unstable: state overflow at t=" + std::to_string(valid_until + 1);
                rows.push_back(r);
                continue;
            }
            const auto start = std::chrono::steady_clock::now();
            const Matrix U = feature_matrix(traj.u.topRows(T + 1), fc);
            const LseResult fit = lse(U, traj.y.middleRows(L, U.rows()), fc);
            const double err = estimation_error(fit.estimate.G, G.G);
            r.error_sq = err * err;
            r.lambda_min = gram_report_from_svd(fit.singular_values, U.rows(), U.cols()).lambda_min;
            r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            rows.push_back(r);
        }
    }
    return rows;
}

inline SweepResult run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const Index kinds = static_cast<Index>(cfg.input_kinds.size());
    std::vector<std::vector<SweepRow>> per_task(static_cast<std::size_t>(kinds * cfg.trials));
    parallel_for(static_cast<Index>(per_task.size()), cfg.threads, [&](Index task) {
        const InputKind kind = cfg.input_kinds[static_cast<std::size_t>(task / cfg.trials)];
        const int trial = static_cast<int>(task % cfg.trials);
        per_task[static_cast<std::size_t>(task)] = run_trial(cfg, kind, trial);
    });

    SweepResult res;
    for (auto& v : per_task) res.rows.insert(res.rows.end(), v.begin(), v.end());
    auto kind_pos = [&](InputKind k) {
        return std::find(cfg.input_kinds.begin(), cfg.input_kinds.end(), k) - cfg.input_kinds.begin();
    };
    std::stable_sort(res.rows.begin(), res.rows.end(), [&](const SweepRow& a, const SweepRow& b) {
        return std::tuple(kind_pos(a.kind), a.L, a.T, a.trial) < std::tuple(kind_pos(b.kind), b.L, b.T, b.trial);
    });
    res.aggregates = aggregate(cfg, res.rows);
    return res;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Raw sweep CSV. The first line is a comment carrying the schema version
/// and the generation time; everything after it is deterministic given the
/// config (wall_time is only written when with_timing is set).
///   input_kind,L,T,trial,seed,status,error_sq,lambda_min[,wall_time]
inline std::string sweep_raw_csv(const SweepResult& res, bool with_timing, const std::string& timestamp) {
    std::ostringstream out;
    out << "# blds sweep raw v" << kCsvSchemaVersion << " generated_at=" << timestamp << '\n';
    out << "input_kind,L,T,trial,seed,status,error_sq,lambda_min" << (with_timing ? ",wall_time" : "") << '\n';
    for (const auto& r : res.rows) {
        out << to_string(r.kind) << ',' << r.L << ',' << r.T << ',' << r.trial << ',' << r.seed << ','
            << (r.ok ? "ok" : "failed") << ',' << (r.ok ? io::format_double(r.error_sq) : "") << ','
            << (r.ok ? io::format_double(r.lambda_min) : "");
        if (with_timing) out << ',' << io::format_double(r.wall_time);
        out << '\n';
    }
    return out.str();
}

///   input_kind,L,T,count,failed,mean_error_sq,std_error_sq
inline std::string sweep_aggregate_csv(const SweepResult& res) {
    std::ostringstream out;
    out << "input_kind,L,T,count,failed,mean_error_sq,std_error_sq\n";
    for (const auto& a : res.aggregates)
        out << to_string(a.kind) << ',' << a.L << ',' << a.T << ',' << a.count << ',' << a.failed << ','
            << io::format_double(a.mean) << ',' << io::format_double(a.stddev) << '\n';
    return out.str();
}

/// FNV-1a over the canonical JSON dump of the config.
inline std::string config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline io::json run_manifest(const ExperimentConfig& c, const std::string& command, const std::string& timestamp) {
    io::json trials = io::json::array();
    for (int t = 0; t < c.trials; ++t)
        trials.push_back({{"trial", t}, {"system_seed", system_seed(c, t)}, {"data_seed", data_seed(c, t)}});
    return io::json{{"command", command},
                    {"version", kVersion},
                    {"csv_schema_version", kCsvSchemaVersion},
                    {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                          "." + std::to_string(EIGEN_MINOR_VERSION)},
                    {"generated_at", timestamp},
                    {"config", to_json(c)},
                    {"config_hash", config_hash(c)},
                    {"trials", trials}};
}

// ---------------------------------------------------------------------------
// Persistence of excitation
// ---------------------------------------------------------------------------

/// Sample-size condition for lambda_min(U^T U) >= (T-L+1)/4 with the
/// unspecified absolute constant set to 1:
///   L + L(L+1) (3 v gamma)^{L+1} (log((L+1)/delta) + (p+1)^{L+1} log((p+1)^{L+1}/delta)).
inline double pe_sample_threshold(int L, int p, double gamma, double delta) {
    detail::require_config(L >= 1 && p >= 1, "pe_sample_threshold: L, p must be >= 1");
    detail::require_config(delta > 0.0 && delta < 1.0, "pe_sample_threshold: delta must lie in (0, 1)");
    const double growth = std::pow(p + 1.0, L + 1);
    return L + L * (L + 1.0) * std::pow(std::max(3.0, gamma), L + 1) *
                   (std::log((L + 1.0) / delta) + growth * std::log(growth / delta));
}

struct PeRow {
    InputKind kind = InputKind::UniformSphere;
    int L = 0;
    Index T = 0;
    int trial = 0;
    std::uint64_t seed = 0;
    GramReport gram;
};

struct PeSummary {
    InputKind kind = InputKind::UniformSphere;
    int L = 0;
    Index T = 0;
    int satisfied = 0;
    int trials = 0;
    double threshold_T = 0.0;  // pe_sample_threshold for this (L, p, kind)
    [[nodiscard]] double rate() const { return trials ? static_cast<double>(satisfied) / trials : 0.0; }
};

struct PeResult {
    std::vector<PeRow> rows;
    std::vector<PeSummary> summary;
};

/// Only the inputs matter here: the design matrix does not depend on the system.
inline PeResult run_pe_check(const ExperimentConfig& cfg) {
    cfg.validate();
    const Index kinds = static_cast<Index>(cfg.input_kinds.size());
    std::vector<std::vector<PeRow>> per_task(static_cast<std::size_t>(kinds * cfg.trials));
    parallel_for(static_cast<Index>(per_task.size()), cfg.threads, [&](Index task) {
        const InputKind kind = cfg.input_kinds[static_cast<std::size_t>(task / cfg.trials)];
        const int trial = static_cast<int>(task % cfg.trials);
        const std::uint64_t seed = data_seed(cfg, trial);
        Engine rng = make_engine(derive_seed(seed, Stream::Inputs));
        const Matrix inputs = sample_inputs(InputDistribution{kind}, cfg.dims.p, cfg.max_T() + 1, rng);
        auto& out = per_task[static_cast<std::size_t>(task)];
        for (int L : cfg.L_list)
            for (Index T : cfg.T_list) {
                const Matrix U = feature_matrix(inputs.topRows(T + 1), FeatureConfig{L, cfg.dims.p});
                out.push_back(PeRow{kind, L, T, trial, seed, gram_min_eig(U)});
            }
    });
    PeResult res;
    for (auto& v : per_task) res.rows.insert(res.rows.end(), v.begin(), v.end());
    for (auto kind : cfg.input_kinds)
        for (int L : cfg.L_list)
            for (Index T : cfg.T_list) {
                PeSummary s{kind, L, T};
                s.threshold_T = pe_sample_threshold(L, cfg.dims.p, analytic_gamma(kind, cfg.dims.p), cfg.pe_delta);
                for (const auto& r : res.rows)
                    if (r.kind == kind && r.L == L && r.T == T) {
                        ++s.trials;
                        s.satisfied += r.gram.satisfied ? 1 : 0;
                    }
                res.summary.push_back(s);
            }
    return res;
}

///   input_kind,L,T,trial,seed,lambda_min,threshold,satisfied
inline std::string pe_raw_csv(const PeResult& res, const std::string& timestamp) {
    std::ostringstream out;
    out << "# blds pe-check raw v" << kCsvSchemaVersion << " generated_at=" << timestamp << '\n';
    out << "input_kind,L,T,trial,seed,lambda_min,threshold,satisfied\n";
    for (const auto& r : res.rows)
        out << to_string(r.kind) << ',' << r.L << ',' << r.T << ',' << r.trial << ',' << r.seed << ','
            << io::format_double(r.gram.lambda_min) << ',' << io::format_double(r.gram.threshold) << ','
            << (r.gram.satisfied ? 1 : 0) << '\n';
    return out.str();
}

///   input_kind,L,T,trials,satisfied,rate,threshold_T
inline std::string pe_summary_csv(const PeResult& res) {
    std::ostringstream out;
    out << "input_kind,L,T,trials,satisfied,rate,threshold_T\n";
    for (const auto& s : res.summary)
        out << to_string(s.kind) << ',' << s.L << ',' << s.T << ',' << s.trials << ',' << s.satisfied << ','
            << io::format_double(s.rate()) << ',' << io::format_double(s.threshold_T) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Recovery
// ---------------------------------------------------------------------------

struct RecoverOutcome {
    Realization realization;
    double reconstruction_error = 0.0;  // relative, against the input G
    double reference_error = -1.0;      // relative, against a reference system's G; < 0 when absent
};

inline RecoverOutcome run_recover(const MarkovParams& G, int n, const HoKalmanOptions& opts = {},
                                  const SystemParams* reference = nullptr) {
    RecoverOutcome out{ho_kalman(G, n, opts)};
    out.reconstruction_error = markov_reconstruction_error(out.realization.system, G);
    if (reference != nullptr)
        out.reference_error = markov_reconstruction_error(out.realization.system, true_markov(*reference, G.cfg.L));
    return out;
}

inline io::json to_json(const RecoverOutcome& r) {
    io::json j = io::system_to_json(r.realization.system);
    j["report"] = {{"reconstruction_error", r.reconstruction_error},
                   {"hankel_singular_values",
                    std::vector<double>(r.realization.hankel_singular_values.data(),
                                        r.realization.hankel_singular_values.data() +
                                            r.realization.hankel_singular_values.size())},
                   {"warnings", r.realization.warnings}};
    if (r.reference_error >= 0.0) j["report"]["reference_error"] = r.reference_error;
    return j;
}

}  // namespace blds
