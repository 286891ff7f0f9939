#include "seqdet/cli.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "seqdet/config.hpp"
#include "seqdet/error.hpp"
#include "seqdet/harness.hpp"
#include "seqdet/stats.hpp"

namespace seqdet::cli {
namespace {

using config::ExperimentConfig;
using config::PreparedExperiment;
using harness::TrialResult;
using models::Hypothesis;

ExperimentConfig load_with_overrides(const std::filesystem::path& path, const Overrides& ov) {
    ExperimentConfig cfg = ExperimentConfig::load(path);
    if (ov.out_dir) cfg.output_dir = *ov.out_dir;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.trials) cfg.trials = *ov.trials;
    if (ov.threads) cfg.threads = *ov.threads;
    return cfg;
}

void append_line(std::string& out, const std::string& key, const std::string& value) {
    out += key;
    out += ": ";
    out += value;
    out += '\n';
}

std::string describe_prepared(const ExperimentConfig& cfg, const PreparedExperiment& prep) {
    std::string out;
    append_line(out, "seed", std::to_string(cfg.seed));
    append_line(out, "model", cfg.model.type == config::ModelConfig::Type::gaussian
                                  ? "gaussian"
                                  : "radar swerling " + std::to_string(cfg.model.swerling_case));
    {
        std::string names;
        for (const auto& d : prep.detectors) {
            if (!names.empty()) names += ' ';
            names += d.name();
        }
        append_line(out, "detectors", names);
    }
    append_line(out, "rate_per_tick", harness::format_double(prep.experiment.rate));
    append_line(out, "delta", harness::format_double(prep.delta));
    append_line(out, "theta", harness::format_double(prep.theta));
    append_line(out, "slope_r", harness::format_double(prep.experiment.trial.encoder.slope_r));
    append_line(out, "slope_r_random",
                harness::format_double(prep.experiment.trial.random_encoder.slope_r));
    append_line(out, "phi_hat", harness::format_double(prep.phi_hat));
    append_line(out, "threshold_a", harness::format_double(prep.experiment.trial.threshold_a));
    append_line(out, "threshold_b", harness::format_double(prep.experiment.trial.threshold_b));
    append_line(out, "thresholds_mode", prep.thresholds_calibrated ? "calibrated" : "wald");
    if (prep.bit_llr_calibrated) {
        append_line(out, "bit_llr_plus", harness::format_double(prep.bit_llr.first));
        append_line(out, "bit_llr_minus", harness::format_double(prep.bit_llr.second));
    }
    if (prep.geometry_warning)
        append_line(out, "warning", "degenerate geometry: an antenna sits on the target");
    return out;
}

struct DetectorRunStats {
    std::size_t trials_h[2] = {0, 0};
    std::size_t decide1_h[2] = {0, 0};
    std::size_t censored = 0;
    double saturation_sum = 0.0;
    double message_sum = 0.0;
    double integrity_sum = 0.0;
    // importance-sampling accumulators
    stats::Summary fa_weighted;   // under H1: exp(-L) 1{decide 1}
    stats::Summary miss_weighted; // under H0: exp(+L) 1{decide 0}
};

int run_command_impl(const std::filesystem::path& config_path, const Overrides& ov) {
    const ExperimentConfig cfg = load_with_overrides(config_path, ov);
    const PreparedExperiment prep = config::prepare(cfg);
    const std::filesystem::path out_dir(cfg.output_dir);

    std::vector<Hypothesis> hypotheses;
    if (cfg.hypothesis == "0" || cfg.hypothesis == "both") hypotheses.push_back(Hypothesis::h0);
    if (cfg.hypothesis == "1" || cfg.hypothesis == "both") hypotheses.push_back(Hypothesis::h1);

    std::vector<std::pair<std::string, TrialResult>> rows;
    rows.reserve(prep.detectors.size() * hypotheses.size() * cfg.trials);
    std::string summary = "command: run\n" + describe_prepared(cfg, prep);

    for (const auto& detector : prep.detectors) {
        DetectorRunStats ds;
        for (Hypothesis h : hypotheses) {
            std::vector<TrialResult> results(cfg.trials);
            harness::parallel_for(cfg.trials, prep.experiment.threads, [&](std::size_t i) {
                results[i] = harness::run_trial(prep.experiment, h, detector, i);
            });
            const int hi = static_cast<int>(h);
            for (const auto& r : results) {
                rows.emplace_back(detector.name(), r);
                ds.trials_h[hi] += 1;
                if (r.censored) {
                    ++ds.censored;
                } else if (r.decision == 1) {
                    ds.decide1_h[hi] += 1;
                }
                ds.saturation_sum += static_cast<double>(r.saturations);
                ds.message_sum += static_cast<double>(r.messages);
                ds.integrity_sum += static_cast<double>(r.decode_integrity_events);
                if (h == Hypothesis::h1)
                    ds.fa_weighted.add(!r.censored && r.decision == 1
                                           ? std::exp(-r.exact_llr_at_stop)
                                           : 0.0);
                else
                    ds.miss_weighted.add(!r.censored && r.decision == 0
                                             ? std::exp(r.exact_llr_at_stop)
                                             : 0.0);
            }
        }
        const std::string prefix = "detector." + detector.name();
        const std::size_t total = ds.trials_h[0] + ds.trials_h[1];
        if (ds.trials_h[0] > 0)
            append_line(summary, prefix + ".false_alarm_direct",
                        harness::format_double(static_cast<double>(ds.decide1_h[0]) /
                                               static_cast<double>(ds.trials_h[0])));
        if (ds.trials_h[1] > 0) {
            const double miss = 1.0 - static_cast<double>(ds.decide1_h[1]) /
                                          static_cast<double>(ds.trials_h[1]);
            append_line(summary, prefix + ".miss_direct", harness::format_double(miss));
            append_line(summary, prefix + ".false_alarm_is",
                        harness::format_double(ds.fa_weighted.mean()) + " se " +
                            harness::format_double(ds.fa_weighted.std_error()));
        }
        if (ds.trials_h[0] > 0)
            append_line(summary, prefix + ".miss_is",
                        harness::format_double(ds.miss_weighted.mean()) + " se " +
                            harness::format_double(ds.miss_weighted.std_error()));
        append_line(summary, prefix + ".censored_rate",
                    harness::format_double(static_cast<double>(ds.censored) /
                                           static_cast<double>(total)));
        append_line(summary, prefix + ".mean_messages",
                    harness::format_double(ds.message_sum / static_cast<double>(total)));
        append_line(summary, prefix + ".mean_saturations",
                    harness::format_double(ds.saturation_sum / static_cast<double>(total)));
        append_line(summary, prefix + ".mean_integrity_events",
                    harness::format_double(ds.integrity_sum / static_cast<double>(total)));
    }

    harness::write_file_atomic(out_dir / "trials.csv", harness::trials_csv(rows));
    harness::write_file_atomic(out_dir / "summary.txt", summary);
    if (!ov.quiet) std::cout << summary;
    return 0;
}

harness::SweepAxis parse_axis(const std::string& axis) {
    if (axis == "alpha_beta") return harness::SweepAxis::alpha_beta;
    if (axis == "snr") return harness::SweepAxis::snr;
    if (axis == "num_rx") return harness::SweepAxis::num_rx;
    return harness::SweepAxis::num_tx;
}

int sweep_command_impl(const std::filesystem::path& config_path, const Overrides& ov) {
    const ExperimentConfig cfg = load_with_overrides(config_path, ov);
    if (!cfg.sweep) throw config_error("sweep", "missing sweep block");
    const std::filesystem::path out_dir(cfg.output_dir);

    harness::SweepSpec spec;
    spec.axis = parse_axis(cfg.sweep->axis);
    spec.grid = cfg.sweep->grid;
    spec.trials_per_point = cfg.sweep->trials_per_point;
    spec.hypothesis = cfg.hypothesis == "0" ? Hypothesis::h0 : Hypothesis::h1;
    for (const auto& name : cfg.detectors) spec.detectors.push_back(config::parse_detector(name));

    std::function<harness::SweepPoint(double)> factory;
    if (spec.axis == harness::SweepAxis::alpha_beta) {
        // The network, delta and theta are shared by every grid point.
        auto base = std::make_shared<PreparedExperiment>(config::prepare(cfg));
        const ExperimentConfig base_cfg = cfg;
        factory = [base, base_cfg](double value) {
            harness::SweepPoint point{base->experiment, base->detectors};
            point.experiment.alpha = value;
            point.experiment.beta = value;
            const auto [a, b] = fusion::wald_thresholds(value, value);
            point.experiment.trial.threshold_a = a;
            point.experiment.trial.threshold_b = b;
            if (base_cfg.thresholds.mode == "calibrate") {
                const auto calibrated = harness::calibrate_thresholds(
                    point.experiment, point.detectors.front(), value, value,
                    base_cfg.thresholds.budget);
                point.experiment.trial.threshold_a = calibrated.threshold_a;
                point.experiment.trial.threshold_b = calibrated.threshold_b;
            }
            return point;
        };
    } else {
        const ExperimentConfig base_cfg = cfg;
        const auto axis = spec.axis;
        factory = [base_cfg, axis](double value) {
            ExperimentConfig point_cfg = base_cfg;
            switch (axis) {
                case harness::SweepAxis::snr:
                    point_cfg.model.total_energy = value * point_cfg.model.noise_variance;
                    break;
                case harness::SweepAxis::num_rx:
                    point_cfg.model.num_rx = static_cast<int>(value);
                    break;
                case harness::SweepAxis::num_tx:
                    point_cfg.model.num_tx = static_cast<int>(value);
                    break;
                case harness::SweepAxis::alpha_beta: break;
            }
            PreparedExperiment prepared = config::prepare(point_cfg);
            return harness::SweepPoint{prepared.experiment, prepared.detectors};
        };
    }

    const std::vector<harness::SweepRow> rows = harness::run_sweep(spec, factory);
    std::string summary = "command: sweep\n";
    append_line(summary, "axis", cfg.sweep->axis);
    append_line(summary, "points", std::to_string(spec.grid.size()));
    append_line(summary, "trials_per_point", std::to_string(spec.trials_per_point));
    append_line(summary, "seed", std::to_string(cfg.seed));

    harness::write_file_atomic(out_dir / "sweep.csv", harness::sweep_csv(rows));
    harness::write_file_atomic(out_dir / "sweep_summary.txt", summary);
    if (!ov.quiet) {
        std::cout << summary;
        std::cout << harness::sweep_csv(rows);
    }
    return 0;
}

int calibrate_delta_command_impl(const std::filesystem::path& config_path, const Overrides& ov) {
    const ExperimentConfig cfg = load_with_overrides(config_path, ov);
    const PreparedExperiment prep = config::prepare(cfg);
    const std::filesystem::path out_dir(cfg.output_dir);

    ExperimentConfig derived = cfg;
    derived.derived.delta = prep.delta;
    derived.derived.theta = prep.theta;
    derived.derived.slope_r = prep.experiment.trial.encoder.slope_r;
    derived.derived.slope_r_random = prep.experiment.trial.random_encoder.slope_r;

    std::string summary = "command: calibrate-delta\n" + describe_prepared(cfg, prep);
    harness::write_file_atomic(out_dir / "calibrated.json", derived.to_json_text());
    harness::write_file_atomic(out_dir / "calibrate_summary.txt", summary);
    if (!ov.quiet) std::cout << summary;
    return 0;
}

int calibrate_thresholds_command_impl(const std::filesystem::path& config_path,
                                      const Overrides& ov) {
    ExperimentConfig cfg = load_with_overrides(config_path, ov);
    // The calibration itself decides the thresholds; run prepare without it.
    ExperimentConfig wald_cfg = cfg;
    wald_cfg.thresholds.mode = "wald";
    const PreparedExperiment prep = config::prepare(wald_cfg);
    const std::filesystem::path out_dir(cfg.output_dir);

    const harness::CalibrationOutcome outcome = harness::calibrate_thresholds(
        prep.experiment, prep.detectors.front(), cfg.thresholds.alpha, cfg.thresholds.beta,
        cfg.thresholds.budget);

    ExperimentConfig derived = cfg;
    derived.derived.threshold_a = outcome.threshold_a;
    derived.derived.threshold_b = outcome.threshold_b;

    std::string summary = "command: calibrate-thresholds\n" + describe_prepared(cfg, prep);
    append_line(summary, "calibrated_a", harness::format_double(outcome.threshold_a));
    append_line(summary, "calibrated_b", harness::format_double(outcome.threshold_b));
    append_line(summary, "achieved_alpha", harness::format_double(outcome.achieved_alpha));
    append_line(summary, "achieved_beta", harness::format_double(outcome.achieved_beta));
    append_line(summary, "trials_used", std::to_string(outcome.trials_used));
    append_line(summary, "converged", outcome.converged ? "yes" : "no");

    harness::write_file_atomic(out_dir / "calibrated.json", derived.to_json_text());
    harness::write_file_atomic(out_dir / "calibrate_summary.txt", summary);
    if (!ov.quiet) std::cout << summary;
    return 0;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace

int run_command(const std::filesystem::path& p, const Overrides& ov) {
    return guarded([&] { return run_command_impl(p, ov); });
}

int sweep_command(const std::filesystem::path& p, const Overrides& ov) {
    return guarded([&] { return sweep_command_impl(p, ov); });
}

int calibrate_delta_command(const std::filesystem::path& p, const Overrides& ov) {
    return guarded([&] { return calibrate_delta_command_impl(p, ov); });
}

int calibrate_thresholds_command(const std::filesystem::path& p, const Overrides& ov) {
    return guarded([&] { return calibrate_thresholds_command_impl(p, ov); });
}

int main_entry(int argc, const char* const* argv) {
    CLI::App app{"Decentralized sequential detection via level-triggered sampling"};
    app.require_subcommand(1);

    struct SubArgs {
        std::string config;
        std::string out_dir;
        std::uint64_t seed = 0;
        std::size_t trials = 0;
        int threads = -1;
        bool quiet = false;
        bool has_out = false, has_seed = false, has_trials = false, has_threads = false;
    };

    auto add_common = [](CLI::App* sub, SubArgs& args) {
        sub->add_option("--config", args.config, "configuration file")->required();
        sub->add_option("--out-dir", args.out_dir, "output directory override")
            ->each([&args](const std::string&) { args.has_out = true; });
        sub->add_option("--seed", args.seed, "seed override")
            ->each([&args](const std::string&) { args.has_seed = true; });
        sub->add_option("--trials", args.trials, "trial count override")
            ->each([&args](const std::string&) { args.has_trials = true; });
        sub->add_option("--threads", args.threads, "worker thread count (0 = auto)")
            ->each([&args](const std::string&) { args.has_threads = true; });
        sub->add_flag("--quiet", args.quiet, "suppress stdout summaries");
    };

    SubArgs run_args, sweep_args, cal_delta_args, cal_thresh_args;
    CLI::App* run = app.add_subcommand("run", "single-point experiment");
    add_common(run, run_args);
    CLI::App* sweep = app.add_subcommand("sweep", "grid sweep over an axis");
    add_common(sweep, sweep_args);
    CLI::App* cal_delta = app.add_subcommand("calibrate-delta", "solve the sampling threshold");
    add_common(cal_delta, cal_delta_args);
    CLI::App* cal_thresh =
        app.add_subcommand("calibrate-thresholds", "empirically tune the SPRT thresholds");
    add_common(cal_thresh, cal_thresh_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const auto to_overrides = [](const SubArgs& args) {
        Overrides ov;
        if (args.has_out) ov.out_dir = args.out_dir;
        if (args.has_seed) ov.seed = args.seed;
        if (args.has_trials) ov.trials = args.trials;
        if (args.has_threads) ov.threads = args.threads;
        ov.quiet = args.quiet;
        return ov;
    };

    if (run->parsed()) return run_command(run_args.config, to_overrides(run_args));
    if (sweep->parsed()) return sweep_command(sweep_args.config, to_overrides(sweep_args));
    if (cal_delta->parsed())
        return calibrate_delta_command(cal_delta_args.config, to_overrides(cal_delta_args));
    if (cal_thresh->parsed())
        return calibrate_thresholds_command(cal_thresh_args.config, to_overrides(cal_thresh_args));
    return 1;
}

} // namespace seqdet::cli
