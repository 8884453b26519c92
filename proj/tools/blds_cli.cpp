// blds: experiment harness and diagnostics for bilinear system identification.

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "blds/blds.hpp"

namespace fs = std::filesystem;
using blds::io::json;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kNumericalError = 3 };

// Command-line overrides are collected as JSON and layered over the config file.
struct ConfigOptions {
    std::string config_path;
    json overrides = json::object();
};

void add_config_options(CLI::App& app, ConfigOptions& opts) {
    app.add_option("--config", opts.config_path, "JSON config file");
    auto num = [&](const char* flag, const char* key, const char* help) {
        app.add_option_function<double>(flag, [&opts, key](double v) { opts.overrides[key] = v; }, help);
    };
    auto integer = [&](const char* flag, const char* key, const char* help) {
        app.add_option_function<long long>(flag, [&opts, key](long long v) { opts.overrides[key] = v; }, help);
    };
    integer("--n", "n", "state dimension");
    integer("--p", "p", "input dimension");
    integer("--m", "m", "output dimension");
    num("--rho0", "rho0", "spectral radius of A_0");
    num("--rhok", "rhok", "spectral radius of each A_k");
    num("--sigma", "sigma", "noise standard deviation");
    integer("--trials", "trials", "number of seeds");
    app.add_option_function<std::uint64_t>(
        "--base-seed", [&opts](std::uint64_t v) { opts.overrides["base_seed"] = v; }, "base seed");
    integer("--threads", "threads", "worker threads (0 = all cores)");
    num("--overflow-guard", "overflow_guard", "state norm treated as divergence");
    num("--pe-delta", "pe_delta", "failure probability in the excitation threshold");
    app.add_option_function<std::vector<std::string>>(
           "--input-kinds", [&opts](const std::vector<std::string>& v) { opts.overrides["input_kinds"] = v; },
           "sphere and/or gaussian")
        ->delimiter(',');
    app.add_option_function<std::vector<int>>(
           "--L-list", [&opts](const std::vector<int>& v) { opts.overrides["L_list"] = v; }, "window lengths")
        ->delimiter(',');
    app.add_option_function<std::vector<long long>>(
           "--T-list", [&opts](const std::vector<long long>& v) { opts.overrides["T_list"] = v; }, "horizons")
        ->delimiter(',');
    app.add_flag_function("--fixed-system", [&opts](std::int64_t) { opts.overrides["fixed_system"] = true; },
                          "share one system across seeds");
    app.add_flag_function("--with-timing", [&opts](std::int64_t) { opts.overrides["with_timing"] = true; },
                          "add a wall_time column to the raw CSV");
    app.add_option_function<std::string>(
        "--out", [&opts](const std::string& v) { opts.overrides["output"] = v; }, "output directory");
}

blds::ExperimentConfig load_config(const ConfigOptions& opts) {
    blds::ExperimentConfig cfg;
    if (!opts.config_path.empty()) blds::apply_json(cfg, blds::io::read_json_file(opts.config_path));
    blds::apply_json(cfg, opts.overrides);
    cfg.validate();
    return cfg;
}

fs::path output_dir(const blds::ExperimentConfig& cfg, const char* fallback) {
    fs::path dir = cfg.output.empty() ? fs::path(fallback) : fs::path(cfg.output);
    fs::create_directories(dir);
    return dir;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4e", v);
    return buf;
}

int run_sweep_cmd(const ConfigOptions& opts) {
    const auto cfg = load_config(opts);
    const auto res = blds::run_sweep(cfg);
    const auto dir = output_dir(cfg, "blds-sweep");
    const std::string stamp = blds::utc_timestamp();
    blds::io::write_text_file((dir / "raw.csv").string(), blds::sweep_raw_csv(res, cfg.with_timing, stamp));
    blds::io::write_text_file((dir / "aggregate.csv").string(), blds::sweep_aggregate_csv(res));
    blds::io::write_text_file((dir / "manifest.json").string(), blds::run_manifest(cfg, "sweep", stamp).dump(2) + "\n");

    std::cout << std::left << std::setw(10) << "kind" << std::setw(5) << "L" << std::setw(8) << "T" << std::setw(7)
              << "ok" << std::setw(7) << "failed" << std::setw(13) << "mean" << "std\n";
    for (const auto& a : res.aggregates)
        std::cout << std::setw(10) << blds::to_string(a.kind) << std::setw(5) << a.L << std::setw(8) << a.T
                  << std::setw(7) << a.count << std::setw(7) << a.failed << std::setw(13) << fmt(a.mean)
                  << fmt(a.stddev) << '\n';
    std::cout << "wrote " << dir.string() << "/{raw.csv,aggregate.csv,manifest.json}\n";
    return kOk;
}

int run_pe_cmd(const ConfigOptions& opts, std::optional<double> t_factor) {
    auto cfg = load_config(opts);
    if (t_factor) {
        // One horizon per L, at a multiple of the sample-size threshold. Only
        // meaningful for a single input kind since gamma depends on it.
        blds::detail::require_config(cfg.input_kinds.size() == 1, "--T-factor needs exactly one input kind");
        const double gamma = blds::analytic_gamma(cfg.input_kinds.front(), cfg.dims.p);
        cfg.T_list.clear();
        for (int L : cfg.L_list)
            cfg.T_list.push_back(static_cast<blds::Index>(
                std::ceil(*t_factor * blds::pe_sample_threshold(L, cfg.dims.p, gamma, cfg.pe_delta))));
        cfg.validate();
    }
    const auto res = blds::run_pe_check(cfg);
    const auto dir = output_dir(cfg, "blds-pe");
    const std::string stamp = blds::utc_timestamp();
    blds::io::write_text_file((dir / "pe_raw.csv").string(), blds::pe_raw_csv(res, stamp));
    blds::io::write_text_file((dir / "pe_summary.csv").string(), blds::pe_summary_csv(res));
    blds::io::write_text_file((dir / "manifest.json").string(),
                              blds::run_manifest(cfg, "pe-check", stamp).dump(2) + "\n");
    std::cout << std::left << std::setw(10) << "kind" << std::setw(5) << "L" << std::setw(10) << "T" << std::setw(10)
              << "rate" << "threshold_T\n";
    for (const auto& s : res.summary)
        std::cout << std::setw(10) << blds::to_string(s.kind) << std::setw(5) << s.L << std::setw(10) << s.T
                  << std::setw(10) << s.rate() << fmt(s.threshold_T) << '\n';
    return kOk;
}

struct SystemSource {
    std::string path;
    int n = 5, p = 2, m = 2;
    double rho0 = 0.4, rhok = 0.2;
    std::uint64_t seed = 0;
};

void add_system_options(CLI::App& app, SystemSource& s) {
    app.add_option("--system", s.path, "system JSON; a random system is drawn when absent");
    app.add_option("--n", s.n, "state dimension");
    app.add_option("--p", s.p, "input dimension");
    app.add_option("--m", s.m, "output dimension");
    app.add_option("--rho0", s.rho0, "spectral radius of A_0");
    app.add_option("--rhok", s.rhok, "spectral radius of each A_k");
    app.add_option("--seed", s.seed, "seed");
}

blds::SystemParams load_system(const SystemSource& s) {
    if (!s.path.empty()) return blds::io::system_from_json(blds::io::read_json_file(s.path));
    return blds::random_system(blds::Dims{s.n, s.p, s.m}, s.rho0, s.rhok, true,
                               blds::derive_seed(s.seed, blds::Stream::System, 0u));
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-")
        std::cout << text;
    else
        blds::io::write_text_file(out, text);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Identification of bilinear dynamical systems"};
    app.require_subcommand(1);
    app.set_version_flag("--version", blds::kVersion);

    ConfigOptions sweep_opts;
    auto* sweep = app.add_subcommand("sweep", "estimation error over a (kind, L, T) grid");
    add_config_options(*sweep, sweep_opts);

    ConfigOptions pe_opts;
    std::optional<double> t_factor;
    auto* pe = app.add_subcommand("pe-check", "smallest Gram eigenvalue against (T-L+1)/4");
    add_config_options(*pe, pe_opts);
    pe->add_option_function<double>("--T-factor", [&](double f) { t_factor = f; },
                                    "use T = factor * sample-size threshold instead of T_list");

    SystemSource stab_sys;
    std::string stab_kind = "sphere", stab_out;
    int depth = 64, samples = 200;
    std::optional<double> stab_rho, stab_kappa;
    auto* stab = app.add_subcommand("stability", "sampled joint spectral radius and uniform-stability evidence");
    add_system_options(*stab, stab_sys);
    stab->add_option("--input-kind", stab_kind, "sphere or gaussian");
    stab->add_option("--depth", depth, "maximum product length");
    stab->add_option("--samples", samples, "number of sampled input sequences");
    stab->add_option_function<double>("--rho", [&](double v) { stab_rho = v; }, "rho to certify");
    stab->add_option_function<double>("--kappa", [&](double v) { stab_kappa = v; }, "kappa to certify");
    stab->add_option("--out", stab_out, "JSON report path (default stdout)");

    std::string mom_kind = "sphere", mom_out;
    int mom_p = 2, mom_L = 0;
    long long mom_N = 100000, mom_M = 64;
    std::uint64_t mom_seed = 0;
    auto* mom = app.add_subcommand("moments", "empirical moment constants of an input distribution");
    mom->add_option("--input-kind", mom_kind, "sphere or gaussian");
    mom->add_option("--p", mom_p, "input dimension");
    mom->add_option("--N", mom_N, "samples");
    mom->add_option("--M", mom_M, "random directions");
    mom->add_option("--L", mom_L, "also check fourth moments of length-L features");
    mom->add_option("--seed", mom_seed, "seed");
    mom->add_option("--out", mom_out, "JSON report path");

    std::string rec_in, rec_ref, rec_out;
    int rec_n = 0, rec_rows = 0, rec_cols = 0;
    auto* rec = app.add_subcommand("recover", "Ho-Kalman realization from Markov-like parameters");
    rec->add_option("--markov", rec_in, "Markov parameter JSON (from `estimate`)")->required();
    rec->add_option("--n", rec_n, "state dimension")->required();
    rec->add_option("--block-rows", rec_rows, "Hankel block rows (0 = auto)");
    rec->add_option("--block-cols", rec_cols, "Hankel block columns (0 = auto)");
    rec->add_option("--reference", rec_ref, "system JSON to compare Markov parameters against");
    rec->add_option("--out", rec_out, "realization JSON path (default stdout)");

    SystemSource sim_sys;
    std::string sim_kind = "gaussian", sim_out, sim_save_system;
    long long sim_T = 1000;
    double sim_sigma = 0.01;
    bool sim_states = false;
    auto* sim = app.add_subcommand("simulate", "simulate one trajectory to CSV");
    add_system_options(*sim, sim_sys);
    sim->add_option("--T", sim_T, "horizon");
    sim->add_option("--sigma", sim_sigma, "noise standard deviation");
    sim->add_option("--input-kind", sim_kind, "sphere or gaussian");
    sim->add_flag("--states", sim_states, "include x, w and z columns");
    sim->add_option("--save-system", sim_save_system, "write the simulated system as JSON");
    sim->add_option("--out", sim_out, "CSV path (default stdout)");

    std::string est_in, est_out, est_index, est_system;
    int est_L = 3;
    auto* est = app.add_subcommand("estimate", "least-squares Markov-like parameters from a trajectory CSV");
    est->add_option("--trajectory", est_in, "trajectory CSV (from `simulate`)")->required();
    est->add_option("--L", est_L, "window length");
    est->add_option("--out", est_out, "Markov parameter JSON path (default stdout)");
    est->add_option("--index-map", est_index, "write the column index map CSV here");
    est->add_option("--system", est_system, "true system JSON; reports the error decomposition");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*sweep) return run_sweep_cmd(sweep_opts);
        if (*pe) return run_pe_cmd(pe_opts, t_factor);
        if (*stab) {
            const auto sys = load_system(stab_sys);
            const blds::InputDistribution dist{blds::parse_input_kind(stab_kind)};
            blds::StabilityReport r;
            if (stab_rho)
                r = blds::certify_uniform_stability(sys, dist, *stab_rho,
                                                    stab_kappa.value_or(std::numeric_limits<double>::infinity()),
                                                    depth, samples, stab_sys.seed);
            else {
                std::vector<double> grid;
                for (int i = 1; i < 100; ++i) grid.push_back(i / 100.0);
                r = blds::find_certificate(sys, dist, grid, depth, samples, stab_sys.seed);
            }
            json j = blds::io::to_json(r);
            if (!std::isfinite(r.kappa)) j["kappa"] = "inf";
            if (r.certified && r.rho < 1.0) j["f_norm_bound"] = blds::f_norm_bound(sys, r.kappa_hat, r.rho);
            emit(stab_out, j.dump(2) + "\n");
            return kOk;
        }
        if (*mom) {
            const blds::InputDistribution dist{blds::parse_input_kind(mom_kind)};
            const auto r = blds::empirical_moments(dist, mom_p, mom_N, mom_M, mom_seed);
            json j = blds::io::to_json(r);
            j["gamma_analytic"] = blds::analytic_gamma(dist.kind, mom_p);
            std::cout << std::left << std::setw(20) << "gamma_hat" << r.gamma_hat << '\n'
                      << std::setw(20) << "gamma_analytic" << blds::analytic_gamma(dist.kind, mom_p) << '\n'
                      << std::setw(20) << "isotropy_dev" << r.isotropy_dev << '\n'
                      << std::setw(20) << "third_moment_max" << r.third_moment_max << '\n'
                      << std::setw(20) << "5/sqrt(N)" << 5.0 / std::sqrt(static_cast<double>(mom_N)) << '\n';
            if (mom_L > 0) {
                const auto f = blds::fourth_moment_feature_check(dist, mom_p, mom_L, mom_N, mom_M, mom_seed);
                j["features"] = blds::io::to_json(f);
                std::cout << std::setw(20) << "feature_fourth_max" << f.max_fourth_moment << '\n'
                          << std::setw(20) << "feature_bound" << f.bound << '\n';
            }
            if (!mom_out.empty()) blds::io::write_text_file(mom_out, j.dump(2) + "\n");
            return kOk;
        }
        if (*rec) {
            const auto G = blds::io::markov_from_json(blds::io::read_json_file(rec_in));
            std::optional<blds::SystemParams> ref;
            if (!rec_ref.empty()) ref = blds::io::system_from_json(blds::io::read_json_file(rec_ref));
            const auto out = blds::run_recover(G, rec_n, blds::HoKalmanOptions{rec_rows, rec_cols},
                                               ref ? &*ref : nullptr);
            for (const auto& w : out.realization.warnings) std::cerr << "warning: " << w << '\n';
            emit(rec_out, blds::to_json(out).dump(2) + "\n");
            return kOk;
        }
        if (*sim) {
            const auto sys = load_system(sim_sys);
            blds::detail::require_config(sim_T >= 0, "--T must be nonnegative");
            auto in_rng = blds::make_engine(blds::derive_seed(sim_sys.seed, blds::Stream::Inputs));
            auto noise_rng = blds::make_engine(blds::derive_seed(sim_sys.seed, blds::Stream::Noise));
            const auto inputs = blds::sample_inputs(blds::InputDistribution{blds::parse_input_kind(sim_kind)},
                                                    sys.dims.p, sim_T + 1, in_rng);
            const auto traj = blds::simulate(sys, inputs, blds::NoiseConfig{sim_sigma}, noise_rng);
            if (!sim_save_system.empty())
                blds::io::write_text_file(sim_save_system, blds::io::system_to_json(sys).dump(2) + "\n");
            emit(sim_out, blds::io::trajectory_to_csv(traj, sim_states));
            return kOk;
        }
        if (*est) {
            const auto traj = blds::io::trajectory_from_csv(blds::io::read_text_file(est_in));
            const blds::FeatureConfig cfg{est_L, static_cast<int>(traj.u.cols())};
            const auto fit = blds::lse(traj, cfg);
            for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
            json j = blds::io::markov_to_json(fit.estimate);
            j["rank"] = fit.rank;
            if (!est_index.empty()) blds::io::write_text_file(est_index, blds::io::index_map_csv(cfg));
            if (!est_system.empty()) {
                const auto sys = blds::io::system_from_json(blds::io::read_json_file(est_system));
                const auto G = blds::true_markov(sys, est_L);
                j["error_op"] = blds::estimation_error(fit.estimate.G, G.G);
                if (traj.has_states())
                    j["decomposition"] =
                        blds::io::to_json(blds::error_decomposition(sys, traj, cfg, G.G, fit.estimate.G));
            }
            emit(est_out, j.dump(2) + "\n");
            return kOk;
        }
    } catch (const std::invalid_argument& e) {  // ConfigError, ShapeError
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const blds::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kNumericalError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericalError;
    }
    return kOk;
}
