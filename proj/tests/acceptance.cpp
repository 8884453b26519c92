// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
// Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "blds/blds.hpp"

using namespace blds;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string printf_string(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string printf_string(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]) / n;
        my += std::log(y[i]) / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
    }
    return sxy / sxx;
}

// 1. y_t = G u~_t + F w~_t + eps_t on seeded systems.
Outcome decomposition_identity() {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        Engine meta = make_engine(derive_seed(2024, Stream::System, s));
        std::uniform_int_distribution<int> dim(1, 4);
        const Dims dims{dim(meta), dim(meta), dim(meta)};
        const int L = dim(meta);
        const double sigma = s % 2 ? 0.01 : 0.0;
        const SystemParams sys = random_system(dims, 0.5, 0.25, true, s);
        Engine in = make_engine(derive_seed(s, Stream::Inputs)), nz = make_engine(derive_seed(s, Stream::Noise));
        const Matrix u = sample_inputs(InputDistribution{InputKind::UniformSphere}, dims.p, 65, in);
        const Trajectory tr = simulate(sys, u, NoiseConfig{sigma}, nz);
        const FeatureConfig cfg{L, dims.p};
        const Matrix U = feature_matrix(tr, cfg);
        const Matrix G = true_markov(sys, L).G;
        const OutputDecomposition parts = output_decomposition(sys, tr, cfg);
        const Matrix model = U * G.transpose() + parts.noise_part + parts.bias_part;
        for (Index r = 0; r < U.rows(); ++r) {
            const double y = tr.y.row(L + r).norm();
            worst = std::max(worst, (tr.y.row(L + r) - model.row(r)).norm() / (1.0 + y));
        }
    }
    return {worst <= 1e-9, printf_string("max relative residual %.3e (limit 1e-9)", worst)};
}

// Shared sweep for criteria 2 and 3: one fixed system, both input laws.
SweepResult rate_sweep() {
    ExperimentConfig c;
    c.dims = Dims{3, 2, 2};
    c.rho0 = 0.4;
    c.rhok = 0.2;
    c.sigma = 0.01;
    c.input_kinds = {InputKind::UniformSphere, InputKind::Gaussian};
    c.L_list = {4};
    c.T_list = {2000, 4000, 8000, 16000};
    c.trials = 10;
    c.base_seed = 2;
    c.fixed_system = true;
    c.threads = 0;
    return run_sweep(c);
}

// 2. Slope of the median error against T.
Outcome rate_check(const SweepResult& res) {
    std::map<Index, std::vector<double>> by_T;
    int failed = 0;
    for (const auto& r : res.rows)
        if (r.kind == InputKind::UniformSphere) {
            if (!r.ok) ++failed;
            by_T[r.T].push_back(std::sqrt(r.error_sq));
        }
    std::vector<double> Ts, med;
    for (const auto& [T, errs] : by_T) {
        Ts.push_back(static_cast<double>(T));
        med.push_back(median(errs));
    }
    const double slope = loglog_slope(Ts, med);
    return {failed == 0 && slope >= -0.65 && slope <= -0.35,
            printf_string("log-log slope %.3f (window [-0.65, -0.35]); medians %.3e %.3e %.3e %.3e", slope, med[0],
                          med[1], med[2], med[3])};
}

// 3. Sphere inputs beat Gaussian inputs at T = 8000 on paired seeds.
Outcome ordering_check(const SweepResult& res) {
    std::map<int, double> sphere, gauss;
    for (const auto& r : res.rows)
        if (r.T == 8000) (r.kind == InputKind::UniformSphere ? sphere : gauss)[r.trial] = r.error_sq;
    int wins = 0;
    for (const auto& [trial, e] : sphere) wins += e <= gauss.at(trial) ? 1 : 0;
    return {wins >= 8, printf_string("sphere <= gaussian in %d/10 paired seeds (need >= 8)", wins)};
}

// 4. Error peak near the interpolation threshold for p = 2, L = 7.
Outcome double_descent() {
    ExperimentConfig c;  // n = 5, p = 2, m = 2, rho0 = 0.4, rhok = 0.2, sigma = 0.01
    c.input_kinds = {InputKind::Gaussian};
    c.L_list = {7};
    c.T_list = {2100, 2150, 2195, 2250, 2400, 3000};
    c.trials = 10;
    c.base_seed = 4;
    const SweepResult res = run_sweep(c);
    std::map<Index, double> mean;
    std::string means;
    int failed = 0;
    for (const auto& a : res.aggregates) {
        mean[a.T] = a.mean;
        failed += a.failed;
        means += printf_string(" T=%lld:%.3g", static_cast<long long>(a.T), a.mean);
    }
    Index nearest = c.T_list.front();
    for (Index T : c.T_list)
        if (std::abs(T - 2195) < std::abs(nearest - 2195)) nearest = T;
    const bool pass = failed == 0 && mean[nearest] > mean[2100] && mean[nearest] > mean[3000];
    return {pass, printf_string("mean error_sq at T=%lld exceeds T=2100 and T=3000;", static_cast<long long>(nearest)) +
                      means};
}

// 5. lambda_min(U^T U) >= (T-L+1)/4 at four times the sample-size threshold.
Outcome persistence_of_excitation() {
    ExperimentConfig c;
    c.dims = Dims{1, 1, 1};
    c.input_kinds = {InputKind::UniformSphere};
    c.L_list = {2};
    const double threshold = pe_sample_threshold(2, 1, analytic_gamma(InputKind::UniformSphere, 1), 0.1);
    c.T_list = {static_cast<Index>(std::ceil(4.0 * threshold))};
    c.trials = 10;
    c.base_seed = 5;
    const PeResult r = run_pe_check(c);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& row : r.rows) worst = std::min(worst, row.gram.lambda_min / row.gram.threshold);
    const int ok = r.summary.front().satisfied;
    return {ok >= 9, printf_string("T=%lld: satisfied in %d/10 seeds (need >= 9); min lambda_min/threshold %.3f",
                                   static_cast<long long>(c.T_list.front()), ok, worst)};
}

// 6. Hypercontractivity constants and vanishing third moments at N = 1e6.
Outcome moment_constants() {
    const Index N = 1000000;
    const double tol3 = 5.0 / std::sqrt(static_cast<double>(N));
    const MomentReport g = empirical_moments(InputDistribution{InputKind::Gaussian}, 3, N, 64, 6);
    const MomentReport s = empirical_moments(InputDistribution{InputKind::UniformSphere}, 2, N, 64, 6);
    const bool pass = std::abs(g.gamma_hat - 3.0) <= 0.2 && std::abs(s.gamma_hat - 1.5) <= 0.1 &&
                      g.third_moment_max <= tol3 && s.third_moment_max <= tol3;
    return {pass, printf_string("gamma gaussian(p=3) %.4f (3 +- 0.2), sphere(p=2) %.4f (1.5 +- 0.1); "
                                "third-moment max %.2e / %.2e (limit %.2e)",
                                g.gamma_hat, s.gamma_hat, g.third_moment_max, s.third_moment_max, tol3)};
}

// 7. Ho-Kalman round trip, exact and perturbed.
Outcome ho_kalman_round_trip() {
    double worst_exact = 0.0, worst_perturbed = 0.0;
    int cases = 0;
    for (int n = 1; n <= 3; ++n)
        for (int p = 1; p <= 2; ++p)
            for (std::uint64_t s = 0; s < 5; ++s) {
                const SystemParams sys = random_system(Dims{n, p, 2}, 0.6, 0.3, true, derive_seed(7, Stream::System, s));
                const int L = 2 * n + 2;
                const MarkovParams G = true_markov(sys, L);
                worst_exact = std::max(worst_exact, markov_reconstruction_error(ho_kalman(G, n).system, G));

                Engine rng = make_engine(derive_seed(7, Stream::Perturbation, s));
                Matrix E = gaussian_matrix(G.G.rows(), G.G.cols(), 1.0, rng);
                MarkovParams noisy = G;
                noisy.G += 1e-7 * E / op_norm(E);
                worst_perturbed =
                    std::max(worst_perturbed, markov_reconstruction_error(ho_kalman(noisy, n).system, G));
                ++cases;
            }
    return {worst_exact <= 1e-6 && worst_perturbed <= 1e-4,
            printf_string("%d systems: exact mismatch %.2e (limit 1e-6), eta=1e-7 mismatch %.2e (limit 1e-4)", cases,
                          worst_exact, worst_perturbed)};
}

// 8. ||G_hat - G|| <= excitation * (multiplier + truncation) on seeded runs.
Outcome decomposition_inequality() {
    int runs = 0, held = 0, attempts = 0;
    double worst_ratio = 0.0;
    for (std::uint64_t s = 0; runs < 100; ++s, ++attempts) {
        Engine meta = make_engine(derive_seed(8, Stream::System, s));
        std::uniform_int_distribution<int> dim(1, 3);
        const Dims dims{dim(meta), dim(meta), dim(meta)};
        const int L = dim(meta);
        const SystemParams sys = random_system(dims, 0.5, 0.25, true, s);
        Engine in = make_engine(derive_seed(s, Stream::Inputs)), nz = make_engine(derive_seed(s, Stream::Noise));
        const FeatureConfig cfg{L, dims.p};
        const Index T = 4 * cfg.dim() + 100;
        const Trajectory tr =
            simulate(sys, sample_inputs(InputDistribution{InputKind::UniformSphere}, dims.p, T + 1, in),
                     NoiseConfig{0.05}, nz);
        const Matrix G = true_markov(sys, L).G;
        const ErrorDecomposition e = error_decomposition(sys, tr, cfg, G, lse(tr, cfg).estimate.G);
        if (e.singular_gram) continue;
        ++runs;
        held += e.actual <= e.bound + 1e-8 ? 1 : 0;
        worst_ratio = std::max(worst_ratio, e.actual / e.bound);
    }
    return {held == runs, printf_string("holds in %d/%d runs with nonsingular Gram (%d drawn); max actual/bound %.3f",
                                        held, runs, attempts, worst_ratio)};
}

// 9. Identical config and seed give byte-identical raw CSV after the timestamp line.
Outcome determinism() {
    ExperimentConfig c;
    c.dims = Dims{3, 2, 2};
    c.input_kinds = {InputKind::UniformSphere, InputKind::Gaussian};
    c.L_list = {2, 3};
    c.T_list = {300, 600};
    c.trials = 4;
    c.base_seed = 9;
    c.threads = 1;
    auto body = [](const std::string& s) { return s.substr(s.find('\n') + 1); };
    const std::string a = sweep_raw_csv(run_sweep(c), false, utc_timestamp());
    c.threads = 4;
    const std::string b = sweep_raw_csv(run_sweep(c), false, utc_timestamp());
    const bool same = body(a) == body(b);
    return {same && !body(a).empty(), printf_string("%zu bytes compared, %s", body(a).size(), same ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    int failures = 0;
    auto run = [&](int id, const char* name, double budget_s, const std::function<Outcome()>& fn) {
        const auto start = clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(clock::now() - start).count();
        const bool in_budget = budget_s <= 0 || secs <= budget_s;
        const bool pass = o.pass && in_budget;
        failures += pass ? 0 : 1;
        std::printf("[%s] criterion %d (%s): %s; %.1f s%s\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
                    in_budget ? "" : printf_string(" exceeds budget %.0f s", budget_s).c_str());
        std::fflush(stdout);
    };

    run(1, "decomposition identity", 10, decomposition_identity);

    SweepResult rates;  // shared by criteria 2 and 3
    run(2, "error rate in T", 300, [&] {
        rates = rate_sweep();
        return rate_check(rates);
    });
    run(3, "input distribution ordering", 0, [&] { return ordering_check(rates); });
    run(4, "double descent near T=2195", 900, double_descent);
    run(5, "persistence of excitation", 60, persistence_of_excitation);
    run(6, "moment constants", 60, moment_constants);
    run(7, "Ho-Kalman round trip", 0, ho_kalman_round_trip);
    run(8, "error decomposition inequality", 0, decomposition_inequality);
    run(9, "determinism", 0, determinism);

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
