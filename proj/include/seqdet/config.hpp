#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqdet/harness.hpp"
#include "seqdet/radar.hpp"

namespace seqdet::config {

struct ModelConfig {
    enum class Type { gaussian, radar };
    Type type = Type::gaussian;

    // gaussian
    int num_sensors = 2;
    double mean_shift = 1.7782794100389228; // 10^(1/4)
    double sigma = 1.0;

    // radar (paper geometry; positions derive from num_tx/num_rx)
    int num_tx = 2;
    int num_rx = 2;
    double total_energy = 2.0;
    double noise_variance = 1.0;
    double waveform_duration = 2e-7;
    double sample_period = 1e-7;
    int swerling_case = 1;
    double rician_mean_re = 1.0 / 3.0;
    double rician_mean_im = 1.0 / 3.0;
    std::string detector = ""; // wsprt | gslrt | gslrt_orth | recursive; empty = default
};

struct EncoderConfig {
    std::optional<double> slope_r; // empty = auto from theta
    std::optional<double> theta;   // empty = auto percentile calibration
    double theta_percentile = 99.99;
    double saturation_epsilon = 1e-6;
};

struct ChannelConfig {
    std::string kind = "ideal"; // ideal | deterministic | random_uniform
    double delay = 0.0;
    double phi = 0.2;
};

struct ThresholdsConfig {
    std::string mode = "wald"; // wald | calibrate
    double alpha = 1e-2;
    double beta = 1e-2;
    std::size_t budget = 2000; // trials per calibration step
};

struct SweepConfig {
    std::string axis = "alpha_beta"; // alpha_beta | snr | num_rx | num_tx
    std::vector<double> grid;
    std::size_t trials_per_point = 1000;
};

struct CalibrationConfig {
    std::size_t kl_blocks = 20000;
    std::size_t theta_events = 100000;
    std::size_t bit_llr_events = 100000;
    std::string hypothesis = "1"; // "0" | "1" | "max"
};

/// Optional results written back by the calibrate subcommands; when present
/// they short-circuit the matching preparation step.
struct DerivedConfig {
    std::optional<double> delta;
    std::optional<double> theta;
    std::optional<double> slope_r;
    std::optional<double> slope_r_random;
    std::optional<double> threshold_a;
    std::optional<double> threshold_b;

    bool any() const {
        return delta || theta || slope_r || slope_r_random || threshold_a || threshold_b;
    }
};

struct ExperimentConfig {
    ModelConfig model;
    std::vector<std::string> detectors{"time_encoded", "centralized"};
    double rate = 0.5;                      // messages per tick per network
    std::optional<double> rate_per_sensor;  // when set, rate = this * num sensors
    EncoderConfig encoder;
    ChannelConfig channel;
    ThresholdsConfig thresholds;
    std::optional<SweepConfig> sweep;
    CalibrationConfig calibration;
    DerivedConfig derived;
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    std::int64_t max_ticks = 10'000'000;
    std::string hypothesis = "both"; // "0" | "1" | "both" (cmd_run)
    std::string output_dir = "out";
    int threads = 0;

    void validate() const;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig load(const std::filesystem::path& path);
    /// Canonical serialization; from_json_text(to_json_text()) is identity.
    std::string to_json_text() const;

    double effective_rate() const;
};

/// Detector name grammar: centralized | time_encoded | time_encoded_random |
/// ignore_overshoot | bit_llr | decision_fusion | quantized:<bits> |
/// uniform:<period>. bit_llr constants are filled during preparation.
fusion::DetectorVariant parse_detector(const std::string& name);

/// A config materialized into a runnable experiment: network built, delta
/// solved, theta and slopes fixed, thresholds set, bit LLRs calibrated.
struct PreparedExperiment {
    harness::Experiment experiment;
    std::vector<fusion::DetectorVariant> detectors;
    double delta = 0.0;
    double theta = 0.0;
    double phi_hat = 0.0;
    bool thresholds_calibrated = false;
    harness::CalibrationOutcome threshold_calibration;
    std::pair<double, double> bit_llr{0.0, 0.0};
    bool bit_llr_calibrated = false;
    bool geometry_warning = false;
};

PreparedExperiment prepare(const ExperimentConfig& config);

/// Radar scenario from the model block (paper geometry).
radar::RadarScenario make_scenario(const ModelConfig& model);

} // namespace seqdet::config
