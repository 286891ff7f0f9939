#include "seqdet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include "seqdet/error.hpp"
#include "seqdet/lts.hpp"
#include "seqdet/stats.hpp"

namespace seqdet::harness {
namespace {

using models::Hypothesis;
using models::NetworkModel;

constexpr std::uint64_t kThetaTag = 0x7468657461ULL;
constexpr std::uint64_t kBitLlrTag = 0x6269746cULL;
constexpr std::uint64_t kRateTag = 0x72617465ULL;

// Free-running pass: advance every sensor, step every sampler, no stopping
// rule. Returns the number of ticks simulated.
std::int64_t free_run(const NetworkModel& network, double delta, Hypothesis h,
                      const RngRoot& root, std::int64_t max_ticks, std::size_t max_events,
                      const std::function<void(const lts::SampleEvent&)>& on_event) {
    const int num = network.num_sensors();
    const std::int64_t stride = network.stride();
    std::vector<std::unique_ptr<models::LlrSource>> sources;
    std::vector<SensorRng> rngs;
    std::vector<lts::Sampler> samplers;
    for (int k = 0; k < num; ++k) {
        sources.push_back(network.make_source(k, h, 0, root));
        rngs.emplace_back(root, 0, static_cast<std::uint64_t>(k));
        samplers.emplace_back(k, delta, stride);
    }
    std::size_t events = 0;
    std::vector<double> llr(static_cast<std::size_t>(num), 0.0);
    for (std::int64_t t = stride; t <= max_ticks; t += stride) {
        for (std::int64_t tick = t - stride + 1; tick <= t; ++tick)
            for (int k = 0; k < num; ++k)
                llr[static_cast<std::size_t>(k)] = sources[static_cast<std::size_t>(k)]->advance(tick, rngs[static_cast<std::size_t>(k)]);
        for (int k = 0; k < num; ++k) {
            if (auto event = samplers[static_cast<std::size_t>(k)].step(t, llr[static_cast<std::size_t>(k)])) {
                on_event(*event);
                ++events;
                if (max_events != 0 && events >= max_events) return t;
            }
        }
    }
    return max_ticks;
}

} // namespace

double solve_delta_for(const NetworkModel& network, Hypothesis calibration_h, double rate) {
    const double block = static_cast<double>(network.kl_block_ticks());
    return lts::solve_delta(network.block_kl_sum(calibration_h), rate * block);
}

double calibrate_theta(const NetworkModel& network, double delta, double percentile,
                       std::size_t n_events, std::uint64_t seed) {
    if (n_events < 2) throw invalid_parameter("calibrate_theta: need at least two events");
    if (!(percentile > 0.0) || percentile > 100.0)
        throw invalid_parameter("calibrate_theta: percentile outside (0, 100]");
    std::vector<double> overshoots;
    overshoots.reserve(n_events);
    const std::int64_t cap = 50'000'000;
    for (Hypothesis h : {Hypothesis::h0, Hypothesis::h1}) {
        const RngRoot root =
            derive_root(RngRoot(seed), kThetaTag + static_cast<std::uint64_t>(h));
        free_run(network, delta, h, root, cap, n_events / 2,
                 [&](const lts::SampleEvent& e) { overshoots.push_back(e.overshoot); });
    }
    if (overshoots.size() < std::max<std::size_t>(10, n_events / 100))
        throw invalid_parameter("calibrate_theta: sampler starved; delta too large for the model");
    return stats::quantile(std::move(overshoots), percentile / 100.0);
}

std::pair<double, double> calibrate_bit_llr(const NetworkModel& network, double delta,
                                            std::size_t n_events_per_hypothesis,
                                            std::uint64_t seed) {
    if (n_events_per_hypothesis < 1)
        throw invalid_parameter("calibrate_bit_llr: need at least one event");
    double p_plus[2] = {0.0, 0.0};
    for (Hypothesis h : {Hypothesis::h0, Hypothesis::h1}) {
        const RngRoot root =
            derive_root(RngRoot(seed), kBitLlrTag + static_cast<std::uint64_t>(h));
        std::size_t plus = 0;
        std::size_t total = 0;
        free_run(network, delta, h, root, 50'000'000, n_events_per_hypothesis,
                 [&](const lts::SampleEvent& e) {
                     ++total;
                     if (e.bit > 0) ++plus;
                 });
        if (total == 0) throw invalid_parameter("calibrate_bit_llr: sampler starved");
        // Half-count smoothing keeps the log finite when one sign never shows.
        p_plus[static_cast<int>(h)] =
            (static_cast<double>(plus) + 0.5) / (static_cast<double>(total) + 1.0);
    }
    const double lambda_plus = std::log(p_plus[1] / p_plus[0]);
    const double lambda_minus = std::log((1.0 - p_plus[1]) / (1.0 - p_plus[0]));
    return {lambda_plus, lambda_minus};
}

double measure_message_rate(const NetworkModel& network, double delta, Hypothesis h,
                            std::int64_t n_ticks, std::uint64_t seed) {
    if (n_ticks < 1) throw invalid_parameter("measure_message_rate: need at least one tick");
    const RngRoot root = derive_root(RngRoot(seed), kRateTag + static_cast<std::uint64_t>(h));
    std::size_t events = 0;
    const std::int64_t simulated =
        free_run(network, delta, h, root, n_ticks, 0, [&](const lts::SampleEvent&) { ++events; });
    return static_cast<double>(events) / static_cast<double>(simulated);
}

TrialResult run_trial(const Experiment& experiment, Hypothesis hypothesis,
                      const fusion::DetectorVariant& variant, std::uint64_t trial_index,
                      WeightMode mode) {
    if (mode == WeightMode::false_alarm && hypothesis != Hypothesis::h1)
        throw invalid_parameter("run_trial: false-alarm weighting simulates under H1");
    if (mode == WeightMode::miss && hypothesis != Hypothesis::h0)
        throw invalid_parameter("run_trial: miss weighting simulates under H0");

    const RngRoot root(experiment.seed);
    const fusion::TrialOutcome outcome =
        fusion::run_baseline(variant, *experiment.network, hypothesis, experiment.trial,
                             trial_index, root);

    TrialResult r;
    r.hypothesis_simulated = static_cast<int>(hypothesis);
    r.decision = outcome.decision;
    r.censored = outcome.censored;
    r.stop_ticks = outcome.stop_ticks;
    r.stop_time_raw = outcome.stop_time_raw;
    r.messages = outcome.messages;
    r.saturations = outcome.saturations;
    r.decode_integrity_events = outcome.integrity_events;
    r.exact_llr_at_stop = outcome.exact_llr_at_stop;
    if (mode == WeightMode::false_alarm)
        r.is_weight = std::exp(-outcome.exact_llr_at_stop);
    else if (mode == WeightMode::miss)
        r.is_weight = std::exp(outcome.exact_llr_at_stop);
    return r;
}

ErrorEstimate estimate_error_probability(const Experiment& experiment,
                                         const fusion::DetectorVariant& variant, ErrorKind kind,
                                         std::size_t n_trials, bool importance_sampling) {
    if (n_trials < 1) throw invalid_parameter("estimate_error_probability: n_trials must be >= 1");
    const int error_decision = kind == ErrorKind::false_alarm ? 1 : 0;
    Hypothesis simulate;
    WeightMode mode = WeightMode::none;
    if (importance_sampling) {
        simulate = kind == ErrorKind::false_alarm ? Hypothesis::h1 : Hypothesis::h0;
        mode = kind == ErrorKind::false_alarm ? WeightMode::false_alarm : WeightMode::miss;
    } else {
        simulate = kind == ErrorKind::false_alarm ? Hypothesis::h0 : Hypothesis::h1;
    }

    std::vector<double> contributions(n_trials, 0.0);
    std::vector<double> weights(n_trials, 1.0);
    std::vector<char> is_error(n_trials, 0);
    std::vector<char> censored(n_trials, 0);
    parallel_for(n_trials, experiment.threads, [&](std::size_t i) {
        const TrialResult r = run_trial(experiment, simulate, variant, i, mode);
        weights[i] = r.is_weight;
        censored[i] = r.censored ? 1 : 0;
        if (!r.censored && r.decision == error_decision) {
            is_error[i] = 1;
            contributions[i] = r.is_weight;
        }
    });

    ErrorEstimate out;
    out.importance_sampled = importance_sampling;
    out.n_trials = n_trials;
    stats::Summary summary;
    double max_weight = 0.0;
    for (std::size_t i = 0; i < n_trials; ++i) {
        summary.add(contributions[i]);
        out.error_events += is_error[i];
        out.censored += censored[i];
        max_weight = std::fmax(max_weight, weights[i]);
    }
    out.estimate = summary.mean();
    out.std_error = summary.std_error();
    if (out.error_events > 0) {
        out.upper95 = out.estimate + 1.6448536269514722 * out.std_error;
    } else {
        // Rule of three, scaled by the largest weight that an error event
        // could have carried.
        out.upper95 = 3.0 / static_cast<double>(n_trials) * (importance_sampling ? max_weight : 1.0);
    }
    return out;
}

namespace {

struct ThresholdBand {
    double low;
    double high;

    bool contains(double x) const { return x >= low && x <= high; }
};

} // namespace

CalibrationOutcome calibrate_thresholds(const Experiment& experiment,
                                        const fusion::DetectorVariant& variant, double alpha,
                                        double beta, std::size_t budget_per_step) {
    if (budget_per_step < 1000)
        throw invalid_parameter("calibrate_thresholds: budget must be >= 1000 trials per step");
    const auto [wald_a, wald_b] = fusion::wald_thresholds(alpha, beta);

    CalibrationOutcome out;
    out.threshold_a = wald_a;
    out.threshold_b = wald_b;

    std::size_t step_trials = budget_per_step;
    const auto evaluate = [&](double a, double b, ErrorKind kind) {
        Experiment probe = experiment;
        probe.trial.threshold_a = a;
        probe.trial.threshold_b = b;
        out.trials_used += step_trials;
        return estimate_error_probability(probe, variant, kind, step_trials).estimate;
    };

    // The error probability is pathwise monotone in its own threshold under
    // common random numbers, so plain bisection converges.
    const auto tune = [&](double start, double target, ErrorKind kind, double other,
                          bool a_side) -> double {
        const ThresholdBand band{0.5 * target, target};
        const auto eval_at = [&](double x) {
            return a_side ? evaluate(x, other, kind) : evaluate(other, x, kind);
        };
        double x = start;
        double fx = eval_at(x);
        if (band.contains(fx)) return x;
        const double step = std::log(2.0);
        double lo = x;
        double hi = x;
        if (fx > target) {
            // Error too large: raise the threshold until inside or below.
            for (int i = 0; i < 40; ++i) {
                lo = hi;
                hi += step;
                fx = eval_at(hi);
                if (fx <= target) break;
            }
            if (fx > target) return hi; // budget exhausted; best effort
            if (band.contains(fx)) return hi;
        } else {
            // Error needlessly small: lower the threshold.
            for (int i = 0; i < 40 && lo > 1e-3; ++i) {
                hi = lo;
                lo = std::fmax(lo - step, 1e-3);
                fx = eval_at(lo);
                if (fx >= band.low) break;
            }
            if (band.contains(fx)) return lo;
            // Discrete message sizes can leave the whole band unreachable
            // (the achievable-error set is a staircase); keep the Wald value.
            if (fx < band.low) return start;
        }
        double f_lo = eval_at(lo);
        for (int i = 0; i < 24; ++i) {
            const double f_hi = eval_at(hi);
            if (f_lo < f_hi) {
                // Noise broke monotonicity; widen the per-step trial count.
                step_trials *= 2;
                f_lo = eval_at(lo);
                continue;
            }
            const double mid = 0.5 * (lo + hi);
            const double f_mid = eval_at(mid);
            if (band.contains(f_mid)) return mid;
            if (f_mid > target) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };

    for (int round = 0; round < 3; ++round) {
        out.threshold_a = tune(out.threshold_a, alpha, ErrorKind::false_alarm, out.threshold_b, true);
        out.threshold_b = tune(out.threshold_b, beta, ErrorKind::miss, out.threshold_a, false);
        out.achieved_alpha = evaluate(out.threshold_a, out.threshold_b, ErrorKind::false_alarm);
        out.achieved_beta = evaluate(out.threshold_a, out.threshold_b, ErrorKind::miss);
        const bool alpha_ok = out.achieved_alpha >= 0.5 * alpha && out.achieved_alpha <= alpha;
        const bool beta_ok = out.achieved_beta >= 0.5 * beta && out.achieved_beta <= beta;
        if (alpha_ok && beta_ok) {
            out.converged = true;
            break;
        }
    }
    return out;
}

void SweepSpec::validate() const {
    if (grid.empty()) throw invalid_parameter("SweepSpec: empty grid");
    if (!std::is_sorted(grid.begin(), grid.end()))
        throw invalid_parameter("SweepSpec: grid must be sorted");
    if (trials_per_point < 1) throw invalid_parameter("SweepSpec: trials_per_point must be >= 1");
    if (detectors.empty()) throw invalid_parameter("SweepSpec: no detectors");
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec,
                                const std::function<SweepPoint(double)>& factory) {
    spec.validate();
    std::vector<SweepRow> rows;
    rows.reserve(spec.grid.size() * spec.detectors.size());
    for (double value : spec.grid) {
        const SweepPoint point = factory(value);
        const Experiment& experiment = point.experiment;
        if (point.detectors.size() != spec.detectors.size())
            throw invalid_parameter("run_sweep: factory detectors do not match the spec");
        for (const auto& detector : point.detectors) {
            std::vector<TrialResult> results(spec.trials_per_point);
            parallel_for(spec.trials_per_point, experiment.threads, [&](std::size_t i) {
                results[i] = run_trial(experiment, spec.hypothesis, detector, i);
            });
            stats::Summary delay;
            stats::Summary messages;
            std::size_t censored = 0;
            for (const auto& r : results) {
                if (r.censored) {
                    ++censored;
                    continue;
                }
                delay.add(static_cast<double>(r.stop_ticks));
                messages.add(static_cast<double>(r.messages));
            }
            SweepRow row;
            row.axis_value = value;
            row.detector = detector.name();
            row.trials = spec.trials_per_point;
            row.censored_rate =
                static_cast<double>(censored) / static_cast<double>(spec.trials_per_point);
            if (delay.count() > 0) {
                row.mean_delay = delay.mean();
                row.ci95_low = delay.mean() - delay.ci95_half_width();
                row.ci95_high = delay.mean() + delay.ci95_half_width();
                row.mean_messages = messages.mean();
            } else {
                // Fully censored grid point; flagged by NaNs plus rate 1.
                row.mean_delay = std::nan("");
                row.ci95_low = std::nan("");
                row.ci95_high = std::nan("");
                row.mean_messages = std::nan("");
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string format_double(double value) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.12g", value);
    return buffer;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "axis,detector,mean_delay_ticks,ci95_low,ci95_high,mean_messages,censored_rate\n";
    for (const auto& r : rows) {
        out += format_double(r.axis_value);
        out += ',';
        out += r.detector;
        out += ',';
        out += format_double(r.mean_delay);
        out += ',';
        out += format_double(r.ci95_low);
        out += ',';
        out += format_double(r.ci95_high);
        out += ',';
        out += format_double(r.mean_messages);
        out += ',';
        out += format_double(r.censored_rate);
        out += '\n';
    }
    return out;
}

std::string trials_csv(const std::vector<std::pair<std::string, TrialResult>>& rows) {
    std::string out = "detector,hypothesis,decision,censored,stop_ticks,stop_time_raw,messages,"
                      "is_weight,saturations,decode_integrity_events\n";
    for (const auto& [name, r] : rows) {
        out += name;
        out += ',';
        out += std::to_string(r.hypothesis_simulated);
        out += ',';
        out += std::to_string(r.decision);
        out += ',';
        out += std::to_string(r.censored ? 1 : 0);
        out += ',';
        out += std::to_string(r.stop_ticks);
        out += ',';
        out += format_double(r.stop_time_raw);
        out += ',';
        out += std::to_string(r.messages);
        out += ',';
        out += format_double(r.is_weight);
        out += ',';
        out += std::to_string(r.saturations);
        out += ',';
        out += std::to_string(r.decode_integrity_events);
        out += '\n';
    }
    return out;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path parent = path.parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream stream(tmp, std::ios::binary | std::ios::trunc);
        if (!stream) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        stream.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!stream) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    unsigned int worker_count = threads > 0 ? static_cast<unsigned int>(threads)
                                            : std::thread::hardware_concurrency();
    if (worker_count == 0) worker_count = 1;
    worker_count = std::min<unsigned int>(worker_count, static_cast<unsigned int>(std::min<std::size_t>(n, 64)));
    if (worker_count <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    workers.reserve(worker_count);
    for (unsigned int w = 0; w < worker_count; ++w) {
        workers.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (auto& worker : workers) worker.join();
    if (error) std::rethrow_exception(error);
}

} // namespace seqdet::harness
