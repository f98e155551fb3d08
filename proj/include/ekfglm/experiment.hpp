// Experiment harness: replication orchestration with paired data streams,
// MSE evaluation on a log-spaced grid, and CSV/manifest emission.
//
// Every algorithm inside one replication consumes the identical observation
// sequence: streams are regenerated from a substream keyed by (master_seed,
// "data", replication), and each full-horizon pass checksums what it read so
// the pairing is asserted, not assumed. Replications are the unit of
// parallelism; workers own all mutable state and the output order is fixed
// after the join, so results are independent of the thread count.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "ekfglm/baselines.hpp"
#include "ekfglm/config.hpp"
#include "ekfglm/datagen.hpp"
#include "ekfglm/evaluation.hpp"
#include "ekfglm/filters.hpp"
#include "ekfglm/models.hpp"
#include "ekfglm/rng.hpp"

namespace ekfglm {

inline constexpr const char* kVersion = "0.1.0";

struct ResultRow {
    std::string setting;
    std::string algorithm;
    std::size_t replication;
    std::size_t t;
    double mse;
    std::optional<double> lambda_max_p;
    std::int64_t wall_ns;
};

struct AggregateRow {
    std::string setting;
    std::string algorithm;
    std::size_t t;
    double mean_mse;
    double stderr_mse;
    std::size_t replications;
};

// Log-spaced step grid: points_per_decade per decade, deduplicated, always
// ending at the horizon.
inline std::vector<std::size_t> eval_grid(std::size_t horizon, std::size_t points_per_decade) {
    std::set<std::size_t> grid;
    const double decades = std::log10(static_cast<double>(horizon));
    const std::size_t total = static_cast<std::size_t>(std::ceil(decades * static_cast<double>(points_per_decade)));
    for (std::size_t k = 0; k <= total; ++k) {
        const double e = static_cast<double>(k) / static_cast<double>(points_per_decade);
        const auto t = static_cast<std::size_t>(std::llround(std::pow(10.0, e)));
        if (t >= 1 && t <= horizon) grid.insert(t);
    }
    grid.insert(1);
    grid.insert(horizon);
    return {grid.begin(), grid.end()};
}

inline std::vector<std::size_t> decade_grid(std::size_t horizon) {
    std::vector<std::size_t> out;
    for (std::size_t n = 10; n <= horizon; n *= 10) out.push_back(n);
    if (out.empty() || out.back() != horizon) out.push_back(horizon);
    return out;
}

// 17 significant digits survive a double round trip bit-exactly.
inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_vec(const Vec& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += format_real(v[i]);
    }
    return out;
}

struct ReferenceEstimate {
    Vec theta;
    double convergence_diag;  // ||theta(n) - theta(n/2)||
};

// Long static-filter run on the process itself; the final estimate serves as
// the MSE reference where the data are misspecified and no true parameter
// exists. The diagnostic reports the drift over the second half of the run.
inline ReferenceEstimate misspec_theta_star_reference(const DataProcess& proc, std::size_t n_iters,
                                                      std::uint64_t seed) {
    const EkfConfig cfg{proc.model(), 1.0, Vec(proc.d, 0.0), std::nullopt};
    FilterState state = make_initial_state(cfg);
    Rng rng = Rng::substream(seed, "reference");
    Vec halfway = state.theta;
    const std::size_t half = n_iters / 2;
    for (std::size_t i = 0; i < n_iters; ++i) {
        if (i == half) halfway = state.theta;
        const auto [x, y] = next_observation(proc, rng);
        state = ekf_step(std::move(state), x, y, cfg);
    }
    return {state.theta, norm2(state.theta - halfway)};
}

// Exp-concavity presets for the ONS: the analytic e^{-D D_X}, or the minimum
// over sampled sphere points of the pointwise constant e^{-sup_x |theta.x|}.
inline double exp_concavity_analytic(double radius, double d_x) { return std::exp(-radius * d_x); }

inline double exp_concavity_sampled(const DataProcess& proc, double radius, std::size_t n_points,
                                    std::uint64_t seed) {
    Rng rng = Rng::substream(seed, "exp-concavity");
    double min_alpha = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_points; ++i) {
        Vec theta(proc.d);
        double n2 = 0.0;
        do {
            n2 = 0.0;
            for (double& v : theta) {
                v = rng.normal();
                n2 += v * v;
            }
        } while (n2 == 0.0);
        const double scale = radius / std::sqrt(n2);
        for (double& v : theta) v *= scale;
        min_alpha = std::min(min_alpha, std::exp(-sup_abs_dot(proc, theta)));
    }
    return min_alpha;
}

struct ResolvedOns {
    OnsConfig config;
    double alpha_exp;
};

struct ResolvedSetup {
    Vec theta_ref;                       // MSE reference parameter
    std::optional<ReferenceEstimate> reference;  // present for the switch mixture
    std::map<std::string, ResolvedOns> ons;      // by algorithm name
};

inline ResolvedSetup resolve_setup(const ExperimentConfig& cfg) {
    ResolvedSetup setup;
    if (cfg.process.kind == ProcessKind::LogisticSwitchMix) {
        setup.reference = misspec_theta_star_reference(cfg.process, cfg.reference_iters, cfg.master_seed);
        setup.theta_ref = setup.reference->theta;
    } else {
        setup.theta_ref = cfg.process.theta_star;
    }
    const double d_x = analytic_d_x(cfg.process);
    for (const AlgorithmSpec& spec : cfg.algorithms) {
        if (!spec.is_ons()) continue;
        const double radius = spec.ball_radius > 0.0 ? spec.ball_radius : 1.1 * norm2(setup.theta_ref);
        const double grad_bound = spec.grad_bound > 0.0 ? spec.grad_bound : d_x;
        double alpha = 0.0;
        switch (spec.exp_concavity) {
            case ExpConcavityRule::Analytic: alpha = exp_concavity_analytic(radius, d_x); break;
            case ExpConcavityRule::Sampled:
                alpha = exp_concavity_sampled(cfg.process, radius, spec.exp_concavity_samples, cfg.master_seed);
                break;
            case ExpConcavityRule::Explicit: alpha = spec.exp_concavity_value; break;
        }
        const double gamma = spec.gamma > 0.0 ? spec.gamma : ons_stepsize(grad_bound, radius, alpha);
        setup.ons.emplace(spec.name, ResolvedOns{OnsConfig{cfg.process.model(), gamma, radius, spec.p1_scale}, alpha});
    }
    return setup;
}

namespace detail {

class WallClock {
public:
    void start() { t0_ = std::chrono::steady_clock::now(); }
    std::int64_t lap_ns() {
        const auto now = std::chrono::steady_clock::now();
        total_ += std::chrono::duration_cast<std::chrono::nanoseconds>(now - t0_).count();
        t0_ = now;
        return total_;
    }

private:
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
    std::int64_t total_ = 0;
};

} // namespace detail

struct ReplicationResult {
    std::vector<ResultRow> rows;
    std::uint64_t stream_checksum = 0;
};

// One replication: every algorithm replays the identical stream.
inline ReplicationResult run_replication(const ExperimentConfig& cfg, const ResolvedSetup& setup,
                                         std::size_t replication) {
    const std::uint64_t stream_seed = Rng::derive(cfg.master_seed, "data", replication);
    const std::vector<std::size_t> grid =
        cfg.eval_grid.empty() ? eval_grid(cfg.horizon, cfg.grid_points_per_decade) : cfg.eval_grid;
    const std::vector<std::size_t> decades = decade_grid(cfg.horizon);
    const GlmModel model = cfg.process.model();

    ReplicationResult result;
    std::optional<std::uint64_t> expected_checksum;

    const auto note_checksum = [&](const StreamChecksum& cs) {
        if (!expected_checksum) {
            expected_checksum = cs.value();
            result.stream_checksum = cs.value();
        } else if (*expected_checksum != cs.value()) {
            throw std::runtime_error("paired-stream violation: checksum mismatch inside replication " +
                                     std::to_string(replication));
        }
    };

    for (const AlgorithmSpec& spec : cfg.algorithms) {
        detail::WallClock clock;
        if (spec.is_ekf()) {
            EkfConfig ekf_cfg{model, spec.p1_scale, Vec(cfg.process.d, 0.0), std::nullopt};
            if (spec.kind == AlgorithmKind::EkfTruncated)
                ekf_cfg.truncation = Truncation{spec.beta, spec.threshold_scale};
            FilterState state = make_initial_state(ekf_cfg);
            Rng rng(stream_seed);
            StreamChecksum cs;
            std::size_t gi = 0;
            clock.start();
            for (std::size_t t = 1; t <= cfg.horizon; ++t) {
                const auto [x, y] = next_observation(cfg.process, rng);
                cs.add_range(x);
                cs.add(y);
                state = ekf_step(std::move(state), x, y, ekf_cfg);
                if (gi < grid.size() && grid[gi] == t) {
                    const Vec& est = spec.kind == AlgorithmKind::EkfAveraged ? state.avg_theta : state.theta;
                    result.rows.push_back({cfg.label, spec.name, replication, t, mse(est, setup.theta_ref),
                                           eigen_extremes(state.P).lambda_max, clock.lap_ns()});
                    ++gi;
                }
            }
            note_checksum(cs);
        } else if (spec.is_ons()) {
            const ResolvedOns& ons = setup.ons.at(spec.name);
            OnsState state = make_ons_state(ons.config, Vec(cfg.process.d, 0.0));
            Rng rng(stream_seed);
            StreamChecksum cs;
            std::size_t gi = 0;
            clock.start();
            for (std::size_t t = 1; t <= cfg.horizon; ++t) {
                const auto [x, y] = next_observation(cfg.process, rng);
                cs.add_range(x);
                cs.add(y);
                state = ons_step(std::move(state), x, y, ons.config);
                if (gi < grid.size() && grid[gi] == t) {
                    const Vec& est = spec.kind == AlgorithmKind::OnsAveraged ? state.avg_w : state.w;
                    result.rows.push_back({cfg.label, spec.name, replication, t, mse(est, setup.theta_ref),
                                           eigen_extremes(state.P).lambda_max, clock.lap_ns()});
                    ++gi;
                }
            }
            note_checksum(cs);
        } else {
            // Fixed-horizon SGD: re-run from scratch per decade point, with
            // the step size tied to that horizon; prefixes of the shared
            // stream by construction (same substream seed).
            for (std::size_t n : decades) {
                const double gamma = spec.kind == AlgorithmKind::AsgdOracle
                                         ? asgd_oracle_stepsize(norm2(setup.theta_ref), cfg.process.d, n)
                                         : asgd_stepsize(cfg.process.d, n);
                const AsgdConfig asgd_cfg{model, gamma, n};
                Rng rng(stream_seed);
                clock.start();
                Vec theta(cfg.process.d, 0.0);
                Vec sum(cfg.process.d, 0.0);
                for (std::size_t t = 1; t <= n; ++t) {
                    const auto [x, y] = next_observation(cfg.process, rng);
                    for (std::size_t i = 0; i < theta.size(); ++i) sum[i] += theta[i];
                    const double lp = evaluate(model, y, dot(theta, x)).grad_scalar;
                    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= asgd_cfg.gamma * lp * x[i];
                }
                Vec avg(cfg.process.d);
                for (std::size_t i = 0; i < avg.size(); ++i) avg[i] = sum[i] / static_cast<double>(n);
                result.rows.push_back(
                    {cfg.label, spec.name, replication, n, mse(avg, setup.theta_ref), std::nullopt, clock.lap_ns()});
            }
        }
    }
    return result;
}

// Fixed-horizon sweep for one SGD variant over an explicit horizon list.
inline std::vector<ResultRow> fixed_horizon_sweep(const ExperimentConfig& cfg, const AlgorithmSpec& spec,
                                                  const std::vector<std::size_t>& horizons, const Vec& theta_ref,
                                                  std::size_t replication) {
    if (!spec.is_asgd()) throw std::invalid_argument("fixed_horizon_sweep: spec must be an asgd kind");
    const std::uint64_t stream_seed = Rng::derive(cfg.master_seed, "data", replication);
    std::vector<ResultRow> rows;
    for (std::size_t n : horizons) {
        const double gamma = spec.kind == AlgorithmKind::AsgdOracle
                                 ? asgd_oracle_stepsize(norm2(theta_ref), cfg.process.d, n)
                                 : asgd_stepsize(cfg.process.d, n);
        Rng rng(stream_seed);
        std::vector<Observation> stream = draw_stream(cfg.process, n, rng);
        const Vec avg = asgd_run(AsgdConfig{cfg.process.model(), gamma, n}, stream, Vec(cfg.process.d, 0.0));
        rows.push_back({cfg.label, spec.name, replication, n, mse(avg, theta_ref), std::nullopt, 0});
    }
    return rows;
}

inline std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow>& rows) {
    struct Acc {
        double sum = 0.0, sum_sq = 0.0;
        std::size_t n = 0;
    };
    std::map<std::pair<std::string, std::size_t>, Acc> acc;
    std::string setting;
    std::vector<std::pair<std::string, std::size_t>> order;
    for (const ResultRow& r : rows) {
        setting = r.setting;
        const auto key = std::make_pair(r.algorithm, r.t);
        if (!acc.count(key)) order.push_back(key);
        Acc& a = acc[key];
        a.sum += r.mse;
        a.sum_sq += r.mse * r.mse;
        a.n += 1;
    }
    std::vector<AggregateRow> out;
    out.reserve(order.size());
    for (const auto& key : order) {
        const Acc& a = acc.at(key);
        const double mean = a.sum / static_cast<double>(a.n);
        double se = 0.0;
        if (a.n > 1) {
            const double var = std::max(0.0, (a.sum_sq - static_cast<double>(a.n) * mean * mean) /
                                                 static_cast<double>(a.n - 1));
            se = std::sqrt(var / static_cast<double>(a.n));
        }
        out.push_back({setting, key.first, key.second, mean, se, a.n});
    }
    return out;
}

struct RunOptions {
    std::string out_dir;
    std::size_t threads = 1;
    const std::atomic<bool>* interrupt = nullptr;  // optional cooperative stop
};

struct RunSummary {
    std::vector<ResultRow> rows;
    std::vector<AggregateRow> aggregate;
    std::vector<std::uint64_t> stream_checksums;  // one per completed replication
    ResolvedSetup setup;
    bool truncated = false;  // stopped early on interrupt
};

namespace detail {

// Deterministic payload: everything except wall time, which is machine- and
// scheduling-dependent and lands in timing.csv instead.
inline void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "setting,algorithm,replication,t,mse,lambda_max_p\n";
    for (const ResultRow& r : rows) {
        out << r.setting << ',' << r.algorithm << ',' << r.replication << ',' << r.t << ',' << format_real(r.mse)
            << ',' << (r.lambda_max_p ? format_real(*r.lambda_max_p) : std::string{}) << '\n';
    }
}

inline void write_timing_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "setting,algorithm,replication,t,wall_ns\n";
    for (const ResultRow& r : rows)
        out << r.setting << ',' << r.algorithm << ',' << r.replication << ',' << r.t << ',' << r.wall_ns << '\n';
}

inline void write_aggregate_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "setting,algorithm,t,mean_mse,stderr_mse,replications\n";
    for (const AggregateRow& r : rows) {
        out << r.setting << ',' << r.algorithm << ',' << r.t << ',' << format_real(r.mean_mse) << ','
            << format_real(r.stderr_mse) << ',' << r.replications << '\n';
    }
}

inline void write_density_csv(const std::string& path, const ExperimentConfig& cfg) {
    if (!cfg.process.is_logistic()) return;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    constexpr std::size_t n_bins = 100;
    std::vector<std::size_t> bins(n_bins, 0);
    Rng rng = Rng::substream(cfg.master_seed, "density");
    double mean1 = 0.0, mean2 = 0.0;
    for (std::size_t i = 0; i < cfg.density_samples; ++i) {
        const Vec x = draw_x(cfg.process, rng);
        double p = 0.0;
        if (cfg.process.kind == ProcessKind::LogisticSwitchMix) {
            const double p1 = sigmoid(dot(cfg.process.theta_star, x));
            const double p2 = sigmoid(dot(cfg.process.theta2, x));
            mean1 += p1;
            mean2 += p2;
            p = rng.bernoulli(0.5) ? p1 : p2;
        } else {
            p = sigmoid(dot(cfg.process.theta_star, x));
            mean1 += p;
        }
        const auto b = std::min(n_bins - 1, static_cast<std::size_t>(p * static_cast<double>(n_bins)));
        bins[b] += 1;
    }
    out << "bin_lo,bin_hi,count,fraction\n";
    for (std::size_t b = 0; b < n_bins; ++b) {
        out << format_real(static_cast<double>(b) / n_bins) << ',' << format_real(static_cast<double>(b + 1) / n_bins)
            << ',' << bins[b] << ',' << format_real(static_cast<double>(bins[b]) / cfg.density_samples) << '\n';
    }
    out << "# component_mean_1 = " << format_real(mean1 / cfg.density_samples) << '\n';
    if (cfg.process.kind == ProcessKind::LogisticSwitchMix)
        out << "# component_mean_2 = " << format_real(mean2 / cfg.density_samples) << '\n';
}

inline void write_manifest(const std::string& path, const ExperimentConfig& cfg, const RunSummary& summary,
                           std::size_t threads) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "version = " << kVersion << '\n';
    out << "label = " << cfg.label << '\n';
    out << "horizon = " << cfg.horizon << '\n';
    out << "replications = " << cfg.replications << '\n';
    out << "master_seed = " << cfg.master_seed << '\n';
    out << "grid_points_per_decade = " << cfg.grid_points_per_decade << '\n';
    out << "process.kind = " << process_kind_name(cfg.process.kind) << '\n';
    out << "process.d = " << cfg.process.d << '\n';
    out << "process.theta_star = " << format_vec(cfg.process.theta_star) << '\n';
    if (cfg.process.kind == ProcessKind::LogisticSwitchMix)
        out << "process.theta2 = " << format_vec(cfg.process.theta2) << '\n';
    if (cfg.process.kind == ProcessKind::LinearSubGaussian) {
        out << "process.sigma = " << format_real(cfg.process.sigma) << '\n';
        out << "process.d_app_bias = " << format_real(cfg.process.d_app_bias) << '\n';
    }
    for (const AlgorithmSpec& a : cfg.algorithms) {
        out << "algorithm." << a.name << ".kind = " << algorithm_kind_name(a.kind) << '\n';
        if (a.is_ekf() || a.is_ons()) out << "algorithm." << a.name << ".p1_scale = " << format_real(a.p1_scale) << '\n';
        if (a.kind == AlgorithmKind::EkfTruncated) {
            out << "algorithm." << a.name << ".beta = " << format_real(a.beta) << '\n';
            out << "algorithm." << a.name << ".threshold_scale = " << format_real(a.threshold_scale) << '\n';
        }
        if (a.is_ons()) {
            const ResolvedOns& ons = summary.setup.ons.at(a.name);
            out << "algorithm." << a.name << ".gamma = " << format_real(ons.config.gamma) << '\n';
            out << "algorithm." << a.name << ".ball_radius = " << format_real(ons.config.radius) << '\n';
            out << "algorithm." << a.name << ".exp_concavity = " << format_real(ons.alpha_exp) << '\n';
        }
    }
    if (summary.setup.reference) {
        out << "reference.theta = " << format_vec(summary.setup.reference->theta) << '\n';
        out << "reference.convergence_diag = " << format_real(summary.setup.reference->convergence_diag) << '\n';
        out << "reference.iters = " << cfg.reference_iters << '\n';
    }
    for (std::size_t r = 0; r < summary.stream_checksums.size(); ++r) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(summary.stream_checksums[r]));
        out << "stream_checksum." << r << " = " << buf << '\n';
    }
    out << "threads = " << threads << '\n';
    out << "truncated = " << (summary.truncated ? "true" : "false") << '\n';
}

} // namespace detail

// Full experiment: resolves the setup, runs all replications on a worker
// pool, and writes results.csv, aggregate.csv, density.csv (logistic data)
// and manifest.txt into the output directory. On interrupt, whatever
// replications completed are flushed and the manifest carries a truncated
// marker.
inline RunSummary run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    cfg.validate();
    std::filesystem::create_directories(options.out_dir);

    RunSummary summary;
    summary.setup = resolve_setup(cfg);

    std::vector<std::optional<ReplicationResult>> slots(cfg.replications);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.threads, cfg.replications));
    const auto worker = [&]() {
        while (true) {
            if (failed.load() || (options.interrupt && options.interrupt->load())) return;
            const std::size_t rep = next.fetch_add(1);
            if (rep >= cfg.replications) return;
            try {
                slots[rep] = run_replication(cfg, summary.setup, rep);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                failure = e.what();
                return;
            }
        }
    };

    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    if (failed.load()) throw std::runtime_error(failure);

    for (std::size_t rep = 0; rep < cfg.replications; ++rep) {
        if (!slots[rep]) {
            summary.truncated = true;
            break;
        }
        auto& rr = *slots[rep];
        summary.stream_checksums.push_back(rr.stream_checksum);
        for (ResultRow& row : rr.rows) summary.rows.push_back(std::move(row));
    }

    // Deterministic row order: algorithm (config order), replication, t.
    std::map<std::string, std::size_t> algo_order;
    for (std::size_t i = 0; i < cfg.algorithms.size(); ++i) algo_order[cfg.algorithms[i].name] = i;
    std::stable_sort(summary.rows.begin(), summary.rows.end(), [&](const ResultRow& a, const ResultRow& b) {
        const auto ka = std::tuple(algo_order.at(a.algorithm), a.replication, a.t);
        const auto kb = std::tuple(algo_order.at(b.algorithm), b.replication, b.t);
        return ka < kb;
    });
    summary.aggregate = aggregate_rows(summary.rows);

    const std::filesystem::path dir(options.out_dir);
    detail::write_results_csv((dir / "results.csv").string(), summary.rows);
    detail::write_timing_csv((dir / "timing.csv").string(), summary.rows);
    detail::write_aggregate_csv((dir / "aggregate.csv").string(), summary.aggregate);
    detail::write_density_csv((dir / "density.csv").string(), cfg);
    detail::write_manifest((dir / "manifest.txt").string(), cfg, summary, n_workers);
    return summary;
}

} // namespace ekfglm
