#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "seqdet/fusion.hpp"
#include "seqdet/models.hpp"

namespace seqdet::harness {

/// One simulated trial, as emitted to CSV.
struct TrialResult {
    int hypothesis_simulated = 1;
    int decision = -1; // -1 when censored
    bool censored = false;
    std::int64_t stop_ticks = 0;
    double stop_time_raw = 0.0;
    std::int64_t messages = 0;
    double is_weight = 1.0; // importance-sampling weight; 1.0 when none
    std::int64_t saturations = 0;
    std::int64_t decode_integrity_events = 0;
    double exact_llr_at_stop = 0.0;
};

/// A fully prepared experiment: network plus every constant a trial needs.
struct Experiment {
    std::shared_ptr<const models::NetworkModel> network;
    double rate = 0.5; // messages per tick per network
    fusion::TrialConfig trial;
    double alpha = 1e-2;
    double beta = 1e-2;
    std::uint64_t seed = 1;
    int threads = 0; // 0 = hardware concurrency
};

// ---- preparation -----------------------------------------------------------

/// Delta from the rate equation: delta*tanh(delta/2) = block_kl_sum / (rate * block).
double solve_delta_for(const models::NetworkModel& network, models::Hypothesis calibration_h,
                       double rate);

/// Overshoot bound as a percentile of |lambda| - delta over a free-running
/// calibration pass (events pooled over both hypotheses).
double calibrate_theta(const models::NetworkModel& network, double delta, double percentile,
                       std::size_t n_events, std::uint64_t seed);

/// Calibrated per-sign message LLRs ln(P1(b)/P0(b)) from free-running event
/// counts under each hypothesis.
std::pair<double, double> calibrate_bit_llr(const models::NetworkModel& network, double delta,
                                            std::size_t n_events_per_hypothesis,
                                            std::uint64_t seed);

/// Long-run messages per tick per network from a free-running pass.
double measure_message_rate(const models::NetworkModel& network, double delta,
                            models::Hypothesis h, std::int64_t n_ticks, std::uint64_t seed);

// ---- trials ----------------------------------------------------------------

enum class WeightMode { none, false_alarm, miss };

TrialResult run_trial(const Experiment& experiment, models::Hypothesis hypothesis,
                      const fusion::DetectorVariant& variant, std::uint64_t trial_index,
                      WeightMode mode = WeightMode::none);

enum class ErrorKind { false_alarm, miss };

struct ErrorEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double upper95 = 0.0; // meaningful bound even with zero observed events
    std::size_t n_trials = 0;
    std::size_t error_events = 0;
    std::size_t censored = 0;
    bool importance_sampled = true;
};

/// P0(decide 1) or P1(decide 0). With importance sampling the opposite
/// hypothesis is simulated and each error event is weighted by exp(-+L_T),
/// the exact accumulated global LLR at the stopping tick.
ErrorEstimate estimate_error_probability(const Experiment& experiment,
                                         const fusion::DetectorVariant& variant, ErrorKind kind,
                                         std::size_t n_trials, bool importance_sampling = true);

struct CalibrationOutcome {
    double threshold_a = 0.0;
    double threshold_b = 0.0;
    double achieved_alpha = 0.0;
    double achieved_beta = 0.0;
    std::size_t trials_used = 0;
    bool converged = false;
};

/// Bisects (a, b) from the Wald values until both estimated errors fall in
/// [0.5, 1] x target, reusing common random numbers across evaluations.
CalibrationOutcome calibrate_thresholds(const Experiment& experiment,
                                        const fusion::DetectorVariant& variant, double alpha,
                                        double beta, std::size_t budget_per_step);

// ---- sweeps ----------------------------------------------------------------

enum class SweepAxis { alpha_beta, snr, num_rx, num_tx };

struct SweepSpec {
    SweepAxis axis = SweepAxis::alpha_beta;
    std::vector<double> grid; // non-empty, sorted
    std::size_t trials_per_point = 1000;
    std::vector<fusion::DetectorVariant> detectors;
    models::Hypothesis hypothesis = models::Hypothesis::h1;

    void validate() const;
};

struct SweepRow {
    double axis_value = 0.0;
    std::string detector;
    double mean_delay = 0.0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
    double mean_messages = 0.0;
    double censored_rate = 0.0;
    std::size_t trials = 0;
};

/// One materialized grid point: the experiment plus the detector variants to
/// run at it (variant constants such as calibrated bit LLRs can depend on the
/// grid value).
struct SweepPoint {
    Experiment experiment;
    std::vector<fusion::DetectorVariant> detectors;
};

/// Runs trials_per_point trials per (grid value, detector) with common random
/// numbers across detectors; the factory materializes each grid point.
std::vector<SweepRow> run_sweep(const SweepSpec& spec,
                                const std::function<SweepPoint(double)>& factory);

// ---- output ----------------------------------------------------------------

/// Deterministic short float formatting shared by all CSV writers.
std::string format_double(double value);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string trials_csv(const std::vector<std::pair<std::string, TrialResult>>& rows);

/// Writes through a temp file and renames, so failures never leave a
/// partially written file behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

/// Deterministic-order parallel map over [0, n).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

} // namespace seqdet::harness
