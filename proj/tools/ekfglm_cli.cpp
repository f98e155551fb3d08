// Command-line harness: `run` executes a configured experiment, `verify`
// runs the named verification suites, `bounds` evaluates the closed-form
// bound calculators from a parameter file.
//
// Exit codes: 0 success, 1 usage/config error, 2 verification failure,
// 3 runtime error.
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ekfglm/config.hpp"
#include "ekfglm/evaluation.hpp"
#include "ekfglm/experiment.hpp"
#include "ekfglm/verify.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

double need(const std::map<std::string, double>& params, const std::string& key) {
    const auto it = params.find(key);
    if (it == params.end()) throw ekfglm::ConfigError("params file is missing key '" + key + "'");
    return it->second;
}

double need_or(const std::map<std::string, double>& params, const std::string& key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void print_report(const ekfglm::BoundReport& report) {
    std::cout << "name = " << report.name << "\n";
    for (const auto& [k, v] : report.inputs) std::cout << "input." << k << " = " << ekfglm::format_real(v) << "\n";
    for (const auto& [k, v] : report.components)
        std::cout << "component." << k << " = " << ekfglm::format_real(v) << "\n";
    std::cout << "value = " << ekfglm::format_real(report.value()) << "\n";

    std::cout << "csv,name";
    for (const auto& [k, v] : report.inputs) std::cout << ',' << k;
    for (const auto& [k, v] : report.components) std::cout << ',' << k;
    std::cout << ",value\ncsv," << report.name;
    for (const auto& [k, v] : report.inputs) std::cout << ',' << ekfglm::format_real(v);
    for (const auto& [k, v] : report.components) std::cout << ',' << ekfglm::format_real(v);
    std::cout << ',' << ekfglm::format_real(report.value()) << "\n";
}

void print_log_value(const std::string& name, const ekfglm::LogValue& lv,
                     const std::vector<std::pair<std::string, double>>& extras) {
    std::cout << "name = " << name << "\n";
    for (const auto& [k, v] : extras) std::cout << k << " = " << ekfglm::format_real(v) << "\n";
    std::cout << "log_value = " << ekfglm::format_real(lv.log_value) << "\n";
    std::cout << "log10_value = " << ekfglm::format_real(lv.log10_value()) << "\n";
    std::cout << "overflow = " << (lv.overflow ? "true" : "false") << "\n";
    std::cout << "value = " << ekfglm::format_real(lv.value()) << "\n";
    std::cout << "csv,name,log_value,log10_value,overflow,value\n";
    std::cout << "csv," << name << ',' << ekfglm::format_real(lv.log_value) << ','
              << ekfglm::format_real(lv.log10_value()) << ',' << (lv.overflow ? "true" : "false") << ','
              << ekfglm::format_real(lv.value()) << "\n";
}

int run_bounds(const std::string& which, const std::string& params_path) {
    using namespace ekfglm;
    const auto params = load_params_file(params_path);

    if (which == "theorem1") {
        const BoundedConstants consts{need(params, "kappa_eps"), need(params, "h_eps"), need(params, "rho_eps"),
                                      need(params, "epsilon")};
        const DataGeometry geom{need(params, "d_x"), need_or(params, "lambda_min", need(params, "d_x"))};
        print_report(bound_theorem1(consts, geom, need(params, "n"), need(params, "d"),
                                    need(params, "lambda_max_p1"), need(params, "lambda_max_ptau_inv"),
                                    need(params, "delta")));
    } else if (which == "theorem2") {
        const SubGaussianParams sg{need(params, "sigma2"), need(params, "d_app")};
        const DataGeometry geom{need(params, "d_x"), need_or(params, "lambda_min", need(params, "d_x"))};
        print_report(bound_theorem2(sg, geom, need(params, "n"), need(params, "d"), need(params, "lambda_max_p1"),
                                    need(params, "lambda_max_ptau_inv"), need(params, "epsilon"),
                                    need(params, "delta")));
    } else if (which == "theorem3") {
        print_report(bound_theorem3_ons(need(params, "grad_bound"), need(params, "radius"), need(params, "lambda"),
                                        need(params, "gamma"), need(params, "n"), need(params, "d"),
                                        need(params, "delta")));
    } else if (which == "theorem5") {
        const DataGeometry geom{need(params, "d_x"), need_or(params, "lambda_min", need(params, "d_x"))};
        print_report(bound_theorem5_logistic(geom, need(params, "theta_star_norm"), need(params, "theta1_dist"),
                                             need(params, "n"), need(params, "d"), need(params, "lambda_max_p1"),
                                             need(params, "lambda_max_p1_inv"), need(params, "tau"),
                                             need(params, "delta")));
    } else if (which == "prop4") {
        const DataGeometry geom{need(params, "d_x"), need(params, "lambda_min")};
        const ConcentrationBound cb =
            bound_prop4_concentration(geom, need(params, "d"), need(params, "beta"), need(params, "delta"));
        std::cout << "name = prop4_concentration\n";
        std::cout << "t_threshold = " << format_real(cb.t_threshold) << "\n";
        if (params.count("t"))
            std::cout << "envelope_at_t = " << format_real(cb.envelope(need(params, "t"))) << "\n";
        std::cout << "csv,name,t_threshold\ncsv,prop4_concentration," << format_real(cb.t_threshold) << "\n";
    } else if (which == "tau-logistic") {
        const DataGeometry geom{need(params, "d_x"), need(params, "lambda_min")};
        const TauLogisticTerms terms =
            tau_logistic_terms(geom, need(params, "d"), need(params, "theta_star_norm"), need(params, "epsilon"),
                               need(params, "beta"), need(params, "delta"), need(params, "lambda_max_p1"));
        const LogValue lv = tau_logistic(geom, need(params, "d"), need(params, "theta_star_norm"),
                                         need(params, "epsilon"), need(params, "beta"), need(params, "delta"),
                                         need(params, "lambda_max_p1"));
        print_log_value("tau_logistic", lv,
                        {{"log_term_power", terms.log_t1},
                         {"log_term_exponential", terms.log_t2},
                         {"log_term_confidence", terms.log_t3}});
    } else if (which == "tau-quadratic") {
        const SubGaussianParams sg{need(params, "sigma2"), need(params, "d_app")};
        const DataGeometry geom{need(params, "d_x"), need(params, "lambda_min")};
        const QuadraticInit init{need(params, "theta1_dist"), need(params, "p1")};
        const LogValue lv = tau_quadratic(sg, geom, init, need(params, "theta_star_norm"), need(params, "epsilon"),
                                          need(params, "delta"), need(params, "d"));
        print_log_value("tau_quadratic", lv, {});
    } else if (which == "lemma9") {
        const SubGaussianParams sg{need(params, "sigma2"), need(params, "d_app")};
        const DataGeometry geom{need(params, "d_x"), need_or(params, "lambda_min", need(params, "d_x"))};
        const double v = bound_lemma9_early(sg, geom, need(params, "lambda_max_p1"), need(params, "theta1_dist"),
                                            need(params, "t"), need(params, "delta"));
        std::cout << "name = lemma9_early\nvalue = " << format_real(v) << "\n";
        std::cout << "csv,name,value\ncsv,lemma9_early," << format_real(v) << "\n";
    } else {
        throw ekfglm::ConfigError("unknown bound '" + which + "'");
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Static extended Kalman filter online optimizer: experiments, verification and bound calculators"};
    app.require_subcommand(1);

    // run
    auto* run_cmd = app.add_subcommand("run", "Run a configured experiment and write CSV results");
    std::string config_path, out_dir_flag;
    std::size_t threads = 1;
    std::optional<std::uint64_t> seed_flag;
    run_cmd->add_option("--config", config_path, "Experiment config file")->required();
    run_cmd->add_option("--out", out_dir_flag, "Output directory (overrides config and EKFGLM_OUT_DIR)");
    run_cmd->add_option("--threads", threads, "Worker threads over replications")->default_val(1);
    std::uint64_t seed_value = 0;
    auto* seed_opt = run_cmd->add_option("--seed", seed_value, "Override the master seed");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "Run named verification suites");
    std::string suite = "all";
    std::uint64_t verify_seed = 20240601;
    std::size_t reps = 0;
    std::string results_path = "verify_results.csv";
    verify_cmd->add_option("--suite", suite, "linalg|pathwise|ridge|martingale|concentration|all")
        ->default_val("all");
    verify_cmd->add_option("--seed", verify_seed, "Verification seed")->default_val(20240601);
    verify_cmd->add_option("--reps", reps, "Override replication counts (0 = suite defaults)")->default_val(0);
    verify_cmd->add_option("--results", results_path, "Machine-readable results file")
        ->default_val("verify_results.csv");

    // bounds
    auto* bounds_cmd = app.add_subcommand("bounds", "Evaluate a closed-form bound from a params file");
    std::string which, params_path;
    bounds_cmd
        ->add_option("--which", which,
                     "theorem1|theorem2|theorem3|theorem5|prop4|tau-logistic|tau-quadratic|lemma9")
        ->required();
    bounds_cmd->add_option("--params", params_path, "key = value parameter file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (run_cmd->parsed()) {
            ekfglm::ExperimentConfig cfg = ekfglm::load_experiment_config(config_path);
            if (seed_opt->count() > 0) cfg.master_seed = seed_value;
            std::string out_dir = out_dir_flag;
            if (out_dir.empty() && cfg.output_dir) out_dir = *cfg.output_dir;
            if (out_dir.empty()) {
                if (const char* env = std::getenv("EKFGLM_OUT_DIR")) out_dir = env;
            }
            if (out_dir.empty())
                throw ekfglm::ConfigError("no output directory: pass --out, set output_dir or EKFGLM_OUT_DIR");

            std::signal(SIGINT, handle_sigint);
            ekfglm::RunOptions options{out_dir, threads, &g_interrupted};
            const ekfglm::RunSummary summary = ekfglm::run_experiment(cfg, options);
            std::cout << "rows = " << summary.rows.size() << "\n";
            std::cout << "replications_completed = " << summary.stream_checksums.size() << "\n";
            std::cout << "out_dir = " << out_dir << "\n";
            if (summary.truncated) std::cout << "truncated = true\n";
            return 0;
        }

        if (verify_cmd->parsed()) {
            ekfglm::VerifyParams params;
            params.seed = verify_seed;
            if (reps > 0) {
                params.pathwise_trajectories = reps;
                params.ridge_streams = reps;
                params.martingale_reps = reps;
                params.concentration_reps = reps;
            }
            const auto results = ekfglm::run_verify_suite(suite, params);
            bool all_pass = true;
            for (const auto& r : results) {
                std::cout << (r.pass ? "[PASS] " : "[FAIL] ") << r.name
                          << "  statistic=" << ekfglm::format_real(r.statistic)
                          << " threshold=" << ekfglm::format_real(r.threshold);
                if (!r.note.empty()) std::cout << "  (" << r.note << ")";
                std::cout << "\n";
                all_pass = all_pass && r.pass;
            }
            ekfglm::write_check_results_csv(results_path, results);
            std::cout << "results_file = " << results_path << "\n";
            return all_pass ? 0 : 2;
        }

        if (bounds_cmd->parsed()) return run_bounds(which, params_path);
    } catch (const ekfglm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
