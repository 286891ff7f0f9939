#include "seqdet/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "seqdet/error.hpp"
#include "seqdet/lts.hpp"

namespace seqdet::config {
namespace {

using nlohmann::json;

constexpr std::uint64_t kKlSeedTag = 0x6b6cULL;
constexpr std::uint64_t kThetaSeedTag = 0x7468ULL;
constexpr std::uint64_t kBitLlrSeedTag = 0x626cULL;

const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw config_error(key, "missing required key");
    return j.at(key);
}

template <typename T>
T read(const json& j, const char* key, const T& fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw config_error(key, e.what());
    }
}

template <typename T>
T read_required(const json& j, const char* key) {
    const json& value = require(j, key);
    try {
        return value.get<T>();
    } catch (const json::exception& e) {
        throw config_error(key, e.what());
    }
}

std::optional<double> read_auto(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return std::nullopt;
    const json& value = j.at(key);
    if (value.is_string()) {
        if (value.get<std::string>() == "auto") return std::nullopt;
        throw config_error(key, "expected a number or \"auto\"");
    }
    if (!value.is_number()) throw config_error(key, "expected a number or \"auto\"");
    return value.get<double>();
}

json auto_json(const std::optional<double>& value) {
    if (value) return *value;
    return "auto";
}

} // namespace

double ExperimentConfig::effective_rate() const {
    if (!rate_per_sensor) return rate;
    const int sensors = model.type == ModelConfig::Type::gaussian ? model.num_sensors : model.num_rx;
    return *rate_per_sensor * static_cast<double>(sensors);
}

radar::RadarScenario make_scenario(const ModelConfig& model) {
    radar::RadarScenario s;
    s.geometry = radar::paper_geometry(model.num_tx, model.num_rx);
    s.num_tx = model.num_tx;
    s.num_rx = model.num_rx;
    s.total_energy = model.total_energy;
    s.noise_variance = model.noise_variance;
    s.waveform_duration = model.waveform_duration;
    s.sample_period = model.sample_period;
    s.swerling = static_cast<radar::SwerlingCase>(model.swerling_case);
    s.rician_mean = {model.rician_mean_re, model.rician_mean_im};

    const bool slow = model.swerling_case == 1 || model.swerling_case == 3;
    if (model.detector.empty()) {
        s.detector = slow ? radar::RadarDetector::wsprt : radar::RadarDetector::recursive;
    } else if (model.detector == "wsprt") {
        s.detector = radar::RadarDetector::wsprt;
    } else if (model.detector == "gslrt") {
        s.detector = radar::RadarDetector::gslrt;
    } else if (model.detector == "gslrt_orth") {
        s.detector = radar::RadarDetector::gslrt_orth;
    } else if (model.detector == "recursive") {
        s.detector = radar::RadarDetector::recursive;
    } else {
        throw config_error("model.detector", "unknown detector '" + model.detector + "'");
    }
    return s;
}

fusion::DetectorVariant parse_detector(const std::string& name) {
    if (name == "centralized") return fusion::DetectorVariant::centralized();
    if (name == "time_encoded") return fusion::DetectorVariant::time_encoded();
    if (name == "time_encoded_random") return fusion::DetectorVariant::time_encoded_random();
    if (name == "ignore_overshoot") return fusion::DetectorVariant::ignore_overshoot();
    if (name == "bit_llr") return fusion::DetectorVariant::bit_llr_calibrated(0.0, 0.0);
    if (name == "decision_fusion") return fusion::DetectorVariant::decision_fusion_majority();
    const auto colon = name.find(':');
    if (colon != std::string::npos) {
        const std::string head = name.substr(0, colon);
        const std::string tail = name.substr(colon + 1);
        try {
            if (head == "quantized") return fusion::DetectorVariant::quantized(std::stoi(tail));
            if (head == "uniform") return fusion::DetectorVariant::uniform_sampling(std::stoll(tail));
        } catch (const std::logic_error&) {
            throw config_error("detectors", "bad parameter in '" + name + "'");
        }
    }
    throw config_error("detectors", "unknown detector '" + name + "'");
}

void ExperimentConfig::validate() const {
    if (trials < 1) throw config_error("trials", "must be >= 1");
    if (max_ticks < 1) throw config_error("max_ticks", "must be >= 1");
    if (!(rate > 0.0)) throw config_error("rate", "must be positive");
    if (rate_per_sensor && !(*rate_per_sensor > 0.0))
        throw config_error("rate_per_sensor", "must be positive");
    if (threads < 0) throw config_error("threads", "must be >= 0");

    if (!(thresholds.alpha > 0.0) || thresholds.alpha >= 0.5)
        throw config_error("thresholds.alpha", "must lie in (0, 1/2)");
    if (!(thresholds.beta > 0.0) || thresholds.beta >= 0.5)
        throw config_error("thresholds.beta", "must lie in (0, 1/2)");
    if (thresholds.mode != "wald" && thresholds.mode != "calibrate")
        throw config_error("thresholds.mode", "must be 'wald' or 'calibrate'");

    if (channel.kind != "ideal" && channel.kind != "deterministic" &&
        channel.kind != "random_uniform")
        throw config_error("channel.kind", "must be ideal, deterministic or random_uniform");
    if (channel.delay < 0.0) throw config_error("channel.delay", "must be >= 0");
    if (!(channel.phi > 0.0)) throw config_error("channel.phi", "must be positive");
    if (channel.phi >= 1.0)
        throw config_error("channel.phi", "phi/2 >= 1/2 leaves no encoding budget");

    if (!(encoder.theta_percentile > 0.0) || encoder.theta_percentile > 100.0)
        throw config_error("encoder.theta_percentile", "must lie in (0, 100]");
    if (!(encoder.saturation_epsilon > 0.0) || encoder.saturation_epsilon >= 1.0)
        throw config_error("encoder.saturation_epsilon", "must lie in (0, 1)");
    if (encoder.slope_r && !(*encoder.slope_r > 0.0))
        throw config_error("encoder.slope_r", "must be positive");
    if (encoder.theta && !(*encoder.theta > 0.0))
        throw config_error("encoder.theta", "must be positive");

    if (detectors.empty()) throw config_error("detectors", "need at least one detector");
    for (const auto& name : detectors) parse_detector(name);

    if (hypothesis != "0" && hypothesis != "1" && hypothesis != "both")
        throw config_error("hypothesis", "must be '0', '1' or 'both'");

    if (calibration.hypothesis != "0" && calibration.hypothesis != "1" &&
        calibration.hypothesis != "max")
        throw config_error("calibration.hypothesis", "must be '0', '1' or 'max'");
    if (calibration.kl_blocks < 1) throw config_error("calibration.kl_blocks", "must be >= 1");
    if (calibration.theta_events < 2)
        throw config_error("calibration.theta_events", "must be >= 2");
    if (calibration.bit_llr_events < 1)
        throw config_error("calibration.bit_llr_events", "must be >= 1");

    if (model.type == ModelConfig::Type::gaussian) {
        if (model.num_sensors < 1) throw config_error("model.num_sensors", "must be >= 1");
        if (!(model.sigma > 0.0)) throw config_error("model.sigma", "must be positive");
    } else {
        try {
            make_scenario(model).validate();
        } catch (const config_error&) {
            throw;
        } catch (const std::exception& e) {
            throw config_error("model", e.what());
        }
    }

    if (sweep) {
        if (sweep->axis != "alpha_beta" && sweep->axis != "snr" && sweep->axis != "num_rx" &&
            sweep->axis != "num_tx")
            throw config_error("sweep.axis", "must be alpha_beta, snr, num_rx or num_tx");
        if (sweep->grid.empty()) throw config_error("sweep.grid", "must be non-empty");
        if (!std::is_sorted(sweep->grid.begin(), sweep->grid.end()))
            throw config_error("sweep.grid", "must be sorted ascending");
        if (sweep->trials_per_point < 1)
            throw config_error("sweep.trials_per_point", "must be >= 1");
        if (sweep->axis != "alpha_beta" && model.type != ModelConfig::Type::radar)
            throw config_error("sweep.axis", "snr/num_rx/num_tx sweeps need the radar model");
        if (sweep->axis == "alpha_beta") {
            for (double v : sweep->grid)
                if (!(v > 0.0) || v >= 0.5)
                    throw config_error("sweep.grid", "alpha_beta values must lie in (0, 1/2)");
        }
        if (sweep->axis == "num_rx" || sweep->axis == "num_tx") {
            for (double v : sweep->grid)
                if (v < 1.0 || v != std::floor(v))
                    throw config_error("sweep.grid", "antenna counts must be positive integers");
        }
    }
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error("<json>", e.what());
    }

    ExperimentConfig c;
    const json& jm = require(j, "model");
    const auto type = read_required<std::string>(jm, "type");
    if (type == "gaussian") {
        c.model.type = ModelConfig::Type::gaussian;
        c.model.num_sensors = read(jm, "num_sensors", c.model.num_sensors);
        c.model.mean_shift = read(jm, "mean_shift", c.model.mean_shift);
        c.model.sigma = read(jm, "sigma", c.model.sigma);
    } else if (type == "radar") {
        c.model.type = ModelConfig::Type::radar;
        c.model.num_tx = read(jm, "num_tx", c.model.num_tx);
        c.model.num_rx = read(jm, "num_rx", c.model.num_rx);
        c.model.total_energy = read(jm, "total_energy", c.model.total_energy);
        c.model.noise_variance = read(jm, "noise_variance", c.model.noise_variance);
        c.model.waveform_duration = read(jm, "waveform_duration", c.model.waveform_duration);
        c.model.sample_period = read(jm, "sample_period", c.model.sample_period);
        c.model.swerling_case = read(jm, "swerling_case", c.model.swerling_case);
        if (jm.contains("rician_mean")) {
            const json& mu = jm.at("rician_mean");
            if (!mu.is_array() || mu.size() != 2)
                throw config_error("model.rician_mean", "expected [re, im]");
            c.model.rician_mean_re = mu.at(0).get<double>();
            c.model.rician_mean_im = mu.at(1).get<double>();
        }
        c.model.detector = read(jm, "detector", std::string());
    } else {
        throw config_error("model.type", "must be 'gaussian' or 'radar'");
    }

    c.detectors = read(j, "detectors", c.detectors);
    c.rate = read(j, "rate", c.rate);
    if (j.contains("rate_per_sensor") && !j.at("rate_per_sensor").is_null())
        c.rate_per_sensor = read_required<double>(j, "rate_per_sensor");

    if (j.contains("encoder")) {
        const json& je = j.at("encoder");
        c.encoder.slope_r = read_auto(je, "slope_r");
        c.encoder.theta = read_auto(je, "theta");
        c.encoder.theta_percentile = read(je, "theta_percentile", c.encoder.theta_percentile);
        c.encoder.saturation_epsilon = read(je, "saturation_epsilon", c.encoder.saturation_epsilon);
    }
    if (j.contains("channel")) {
        const json& jc = j.at("channel");
        c.channel.kind = read(jc, "kind", c.channel.kind);
        c.channel.delay = read(jc, "delay", c.channel.delay);
        c.channel.phi = read(jc, "phi", c.channel.phi);
    }
    {
        const json& jt = require(j, "thresholds");
        c.thresholds.mode = read(jt, "mode", c.thresholds.mode);
        c.thresholds.alpha = read_required<double>(jt, "alpha");
        c.thresholds.beta = read_required<double>(jt, "beta");
        c.thresholds.budget = read(jt, "budget", c.thresholds.budget);
    }
    if (j.contains("sweep") && !j.at("sweep").is_null()) {
        const json& js = j.at("sweep");
        SweepConfig s;
        s.axis = read(js, "axis", s.axis);
        s.grid = read_required<std::vector<double>>(js, "grid");
        s.trials_per_point = read(js, "trials_per_point", s.trials_per_point);
        c.sweep = s;
    }
    if (j.contains("calibration")) {
        const json& jc = j.at("calibration");
        c.calibration.kl_blocks = read(jc, "kl_blocks", c.calibration.kl_blocks);
        c.calibration.theta_events = read(jc, "theta_events", c.calibration.theta_events);
        c.calibration.bit_llr_events = read(jc, "bit_llr_events", c.calibration.bit_llr_events);
        c.calibration.hypothesis = read(jc, "hypothesis", c.calibration.hypothesis);
    }
    if (j.contains("derived") && !j.at("derived").is_null()) {
        const json& jd = j.at("derived");
        c.derived.delta = read_auto(jd, "delta");
        c.derived.theta = read_auto(jd, "theta");
        c.derived.slope_r = read_auto(jd, "slope_r");
        c.derived.slope_r_random = read_auto(jd, "slope_r_random");
        c.derived.threshold_a = read_auto(jd, "threshold_a");
        c.derived.threshold_b = read_auto(jd, "threshold_b");
    }

    c.trials = read_required<std::size_t>(j, "trials");
    c.seed = read(j, "seed", c.seed);
    c.max_ticks = read(j, "max_ticks", c.max_ticks);
    c.hypothesis = read(j, "hypothesis", c.hypothesis);
    c.output_dir = read(j, "output_dir", c.output_dir);
    c.threads = read(j, "threads", c.threads);

    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    std::ifstream stream(path);
    if (!stream) throw config_error("<file>", "cannot read " + path.string());
    std::ostringstream buffer;
    buffer << stream.rdbuf();
    return from_json_text(buffer.str());
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    json jm;
    if (model.type == ModelConfig::Type::gaussian) {
        jm["type"] = "gaussian";
        jm["num_sensors"] = model.num_sensors;
        jm["mean_shift"] = model.mean_shift;
        jm["sigma"] = model.sigma;
    } else {
        jm["type"] = "radar";
        jm["num_tx"] = model.num_tx;
        jm["num_rx"] = model.num_rx;
        jm["total_energy"] = model.total_energy;
        jm["noise_variance"] = model.noise_variance;
        jm["waveform_duration"] = model.waveform_duration;
        jm["sample_period"] = model.sample_period;
        jm["swerling_case"] = model.swerling_case;
        jm["rician_mean"] = {model.rician_mean_re, model.rician_mean_im};
        jm["detector"] = model.detector;
    }
    j["model"] = jm;
    j["detectors"] = detectors;
    j["rate"] = rate;
    j["rate_per_sensor"] = rate_per_sensor ? json(*rate_per_sensor) : json(nullptr);
    j["encoder"] = {{"slope_r", auto_json(encoder.slope_r)},
                    {"theta", auto_json(encoder.theta)},
                    {"theta_percentile", encoder.theta_percentile},
                    {"saturation_epsilon", encoder.saturation_epsilon}};
    j["channel"] = {{"kind", channel.kind}, {"delay", channel.delay}, {"phi", channel.phi}};
    j["thresholds"] = {{"mode", thresholds.mode},
                       {"alpha", thresholds.alpha},
                       {"beta", thresholds.beta},
                       {"budget", thresholds.budget}};
    if (sweep) {
        j["sweep"] = {{"axis", sweep->axis},
                      {"grid", sweep->grid},
                      {"trials_per_point", sweep->trials_per_point}};
    } else {
        j["sweep"] = nullptr;
    }
    j["calibration"] = {{"kl_blocks", calibration.kl_blocks},
                        {"theta_events", calibration.theta_events},
                        {"bit_llr_events", calibration.bit_llr_events},
                        {"hypothesis", calibration.hypothesis}};
    if (derived.any()) {
        j["derived"] = {{"delta", auto_json(derived.delta)},
                        {"theta", auto_json(derived.theta)},
                        {"slope_r", auto_json(derived.slope_r)},
                        {"slope_r_random", auto_json(derived.slope_r_random)},
                        {"threshold_a", auto_json(derived.threshold_a)},
                        {"threshold_b", auto_json(derived.threshold_b)}};
    } else {
        j["derived"] = nullptr;
    }
    j["trials"] = trials;
    j["seed"] = seed;
    j["max_ticks"] = max_ticks;
    j["hypothesis"] = hypothesis;
    j["output_dir"] = output_dir;
    j["threads"] = threads;
    return j.dump(2) + "\n";
}

PreparedExperiment prepare(const ExperimentConfig& config) {
    config.validate();
    PreparedExperiment out;

    std::shared_ptr<models::NetworkModel> network;
    if (config.model.type == ModelConfig::Type::gaussian) {
        network = std::make_shared<models::GaussianNetwork>(
            config.model.num_sensors, config.model.mean_shift, config.model.sigma);
    } else {
        auto radar_net = std::make_shared<radar::RadarNetwork>(make_scenario(config.model));
        radar_net->calibrate_kl(config.calibration.kl_blocks,
                                derive_root(RngRoot(config.seed), kKlSeedTag).seed());
        out.geometry_warning = radar_net->scenario().geometry.has_degenerate_path();
        network = radar_net;
    }

    const double rate = config.effective_rate();
    double delta;
    if (config.derived.delta) {
        delta = *config.derived.delta;
    } else if (config.calibration.hypothesis == "max") {
        const double kl = std::max(network->block_kl_sum(models::Hypothesis::h0),
                                   network->block_kl_sum(models::Hypothesis::h1));
        delta = lts::solve_delta(kl, rate * static_cast<double>(network->kl_block_ticks()));
    } else {
        const auto h = config.calibration.hypothesis == "0" ? models::Hypothesis::h0
                                                            : models::Hypothesis::h1;
        delta = harness::solve_delta_for(*network, h, rate);
    }
    if (!(delta > 0.0))
        throw config_error("rate", "calibrated delta is zero; hypotheses are indistinguishable");

    double theta;
    if (config.derived.theta) {
        theta = *config.derived.theta;
    } else if (config.encoder.theta) {
        theta = *config.encoder.theta;
    } else {
        theta = harness::calibrate_theta(*network, delta, config.encoder.theta_percentile,
                                         config.calibration.theta_events,
                                         derive_root(RngRoot(config.seed), kThetaSeedTag).seed());
        if (!(theta > 0.0)) theta = 1e-6; // all-zero overshoots; keep the encoder well formed
    }

    codec::ChannelModel main_channel = codec::ChannelModel::ideal();
    if (config.channel.kind == "deterministic")
        main_channel = codec::ChannelModel::deterministic(config.channel.delay);
    const codec::ChannelModel random_channel = codec::ChannelModel::random_uniform(config.channel.phi);
    out.phi_hat = random_channel.estimate_error_bound();

    codec::EncoderParams main_encoder;
    main_encoder.offset = 0.0;
    main_encoder.saturation_epsilon = config.encoder.saturation_epsilon;
    main_encoder.slope_r = config.derived.slope_r
                               ? *config.derived.slope_r
                               : config.encoder.slope_r.value_or(1.000001 * theta);

    codec::EncoderParams random_encoder;
    random_encoder.offset = out.phi_hat;
    random_encoder.saturation_epsilon = config.encoder.saturation_epsilon;
    random_encoder.slope_r =
        config.derived.slope_r_random
            ? *config.derived.slope_r_random
            : config.encoder.slope_r.value_or(1.000001 * codec::min_slope(theta, out.phi_hat));

    codec::validate_for_channel(main_encoder, main_channel);
    codec::validate_for_channel(random_encoder, random_channel);

    auto [wald_a, wald_b] = fusion::wald_thresholds(config.thresholds.alpha, config.thresholds.beta);
    harness::Experiment experiment;
    experiment.network = network;
    experiment.rate = rate;
    experiment.alpha = config.thresholds.alpha;
    experiment.beta = config.thresholds.beta;
    experiment.seed = config.seed;
    experiment.threads = config.threads;
    experiment.trial.delta = delta;
    experiment.trial.theta = theta;
    experiment.trial.threshold_a = config.derived.threshold_a.value_or(wald_a);
    experiment.trial.threshold_b = config.derived.threshold_b.value_or(wald_b);
    experiment.trial.encoder = main_encoder;
    experiment.trial.channel = main_channel;
    experiment.trial.random_encoder = random_encoder;
    experiment.trial.random_channel = random_channel;
    experiment.trial.max_ticks = config.max_ticks;

    out.delta = delta;
    out.theta = theta;

    bool needs_bit_llr = false;
    for (const auto& name : config.detectors)
        if (parse_detector(name).kind == fusion::DetectorVariant::Kind::bit_llr_calibrated)
            needs_bit_llr = true;
    if (needs_bit_llr) {
        out.bit_llr = harness::calibrate_bit_llr(
            *network, delta, config.calibration.bit_llr_events,
            derive_root(RngRoot(config.seed), kBitLlrSeedTag).seed());
        out.bit_llr_calibrated = true;
    }

    out.detectors.reserve(config.detectors.size());
    for (const auto& name : config.detectors) {
        fusion::DetectorVariant variant = parse_detector(name);
        if (variant.kind == fusion::DetectorVariant::Kind::bit_llr_calibrated) {
            variant.bit_llr_plus = out.bit_llr.first;
            variant.bit_llr_minus = out.bit_llr.second;
        }
        out.detectors.push_back(variant);
    }

    if (config.thresholds.mode == "calibrate" && !config.derived.threshold_a) {
        // Calibrated against the first configured detector.
        out.threshold_calibration = harness::calibrate_thresholds(
            experiment, out.detectors.front(), config.thresholds.alpha, config.thresholds.beta,
            config.thresholds.budget);
        experiment.trial.threshold_a = out.threshold_calibration.threshold_a;
        experiment.trial.threshold_b = out.threshold_calibration.threshold_b;
        out.thresholds_calibrated = true;
    }

    out.experiment = std::move(experiment);
    return out;
}

} // namespace seqdet::config
