#include "seqdet/radar.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "seqdet/error.hpp"

namespace seqdet::radar {
namespace {

constexpr double kSpeedOfLightKmPerS = 299792.458;

using models::Hypothesis;

Eigen::MatrixXcd build_g(const MatchedFilterBank& bank, const RadarScenario& scenario) {
    const int m_count = scenario.num_tx;
    Eigen::MatrixXcd g(m_count, m_count);
    for (int m = 0; m < m_count; ++m) {
        for (int n = 0; n < m_count; ++n)
            g(m, n) = m == n ? cdouble(bank.u(m) + 1.0, 0.0) : bank.z(m, n);
    }
    return g;
}

Eigen::VectorXcd build_a(const MatchedFilterBank& bank, const RadarScenario& scenario,
                         cdouble mean_shift) {
    Eigen::VectorXcd a(scenario.num_tx);
    for (int m = 0; m < scenario.num_tx; ++m) a(m) = bank.v(m) + mean_shift;
    return a;
}

// a^H G^{-1} a via an LL^H factorization.
double quadratic_form(const Eigen::MatrixXcd& g, const Eigen::VectorXcd& a) {
    Eigen::LLT<Eigen::MatrixXcd> llt(g);
    if (llt.info() != Eigen::Success)
        throw conditioning_error("GSLRT: Hermitian system is not positive definite");
    return a.dot(llt.solve(a)).real();
}

} // namespace

double distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double Geometry::path_distance(int m, int k) const {
    return distance(tx_positions.at(static_cast<std::size_t>(m)), target_position) +
           distance(rx_positions.at(static_cast<std::size_t>(k)), target_position);
}

double Geometry::path_delay(int m, int k) const {
    return path_distance(m, k) / kSpeedOfLightKmPerS;
}

bool Geometry::has_degenerate_path() const {
    for (const auto& p : tx_positions)
        if (distance(p, target_position) == 0.0) return true;
    for (const auto& p : rx_positions)
        if (distance(p, target_position) == 0.0) return true;
    return false;
}

Geometry paper_geometry(int num_tx, int num_rx) {
    if (num_tx < 1 || num_rx < 1)
        throw invalid_parameter("paper_geometry: need at least one tx and one rx");
    Geometry g;
    g.target_position = {20.0, 15.0, 0.0};
    g.path_loss_eta = 2.0;
    g.carrier_frequency_hz = 5e6;
    g.tx_positions.reserve(static_cast<std::size_t>(num_tx));
    g.rx_positions.reserve(static_cast<std::size_t>(num_rx));
    for (int m = 1; m <= num_tx; ++m) g.tx_positions.push_back({static_cast<double>(m), 0.0, 0.0});
    for (int k = 1; k <= num_rx; ++k) g.rx_positions.push_back({0.0, static_cast<double>(k), 0.0});
    return g;
}

std::int64_t RadarScenario::samples_per_waveform() const {
    return static_cast<std::int64_t>(std::llround(waveform_duration / sample_period));
}

void RadarScenario::validate() const {
    if (num_tx < 1 || num_rx < 1) throw invalid_parameter("RadarScenario: need tx and rx");
    if (static_cast<int>(geometry.tx_positions.size()) != num_tx ||
        static_cast<int>(geometry.rx_positions.size()) != num_rx)
        throw invalid_parameter("RadarScenario: geometry does not match num_tx/num_rx");
    if (total_energy < 0.0) throw invalid_parameter("RadarScenario: negative energy");
    if (!(noise_variance > 0.0)) throw invalid_parameter("RadarScenario: noise variance must be positive");
    if (!(waveform_duration > 0.0) || !(sample_period > 0.0))
        throw invalid_parameter("RadarScenario: durations must be positive");
    const double ratio = waveform_duration / sample_period;
    if (std::fabs(ratio - std::llround(ratio)) > 1e-9 || std::llround(ratio) < 1)
        throw invalid_parameter("RadarScenario: S / T_s must be a positive integer");
    const bool slow = swerling == SwerlingCase::one || swerling == SwerlingCase::three;
    if (slow && detector == RadarDetector::recursive)
        throw invalid_parameter("RadarScenario: Swerling 1/3 need wsprt, gslrt or gslrt_orth");
    if (!slow && detector != RadarDetector::recursive)
        throw invalid_parameter("RadarScenario: Swerling 2/4 use only their recursive LLR");
}

double RadarScenario::rho_squared(int k) const {
    double sum = 0.0;
    for (int m = 0; m < num_tx; ++m) {
        const double d = geometry.path_distance(m, k);
        sum += std::pow(d, -2.0 * geometry.path_loss_eta);
    }
    return total_energy / static_cast<double>(num_tx) * sum / waveform_duration;
}

cdouble RadarScenario::mu_tilde(int k, std::int64_t tick) const {
    cdouble sum = 0.0;
    for (int m = 0; m < num_tx; ++m) {
        const double d = geometry.path_distance(m, k);
        sum += std::pow(d, -geometry.path_loss_eta) * waveform_discrete(*this, m, k, tick);
    }
    return rician_mean * std::sqrt(total_energy / static_cast<double>(num_tx)) * sum;
}

std::int64_t RadarScenario::llr_stride() const {
    switch (detector) {
        case RadarDetector::wsprt:
        case RadarDetector::gslrt_orth: return samples_per_waveform();
        case RadarDetector::gslrt:
        case RadarDetector::recursive: return 1;
    }
    return 1;
}

cdouble waveform_sample(int m, double t, double duration) {
    if (t < 0.0 || t >= duration) return 0.0;
    const double phase = 2.0 * M_PI * static_cast<double>(m) * t / duration;
    return std::polar(1.0 / std::sqrt(duration), phase);
}

cdouble waveform_discrete(const RadarScenario& scenario, int m, int k, std::int64_t tick) {
    // m, k are 0-based indices; the waveform index in the exponent is 1-based.
    const double t = static_cast<double>(tick) * scenario.sample_period -
                     scenario.geometry.path_delay(m, k);
    const double cycles = static_cast<double>(m + 1) * t / scenario.waveform_duration;
    const double phase = 2.0 * M_PI * (cycles - std::floor(cycles));
    return std::polar(1.0 / std::sqrt(scenario.waveform_duration), phase);
}

std::vector<cdouble> draw_channels(const RadarScenario& scenario, RngStream& rng) {
    const bool rician =
        scenario.swerling == SwerlingCase::three || scenario.swerling == SwerlingCase::four;
    std::vector<cdouble> h(static_cast<std::size_t>(scenario.num_tx));
    for (auto& coef : h) {
        coef = rng.complex_normal();
        if (rician) coef += scenario.rician_mean;
    }
    return h;
}

cdouble synthesize_observation(const RadarScenario& scenario, const std::vector<cdouble>& h,
                               int k, std::int64_t tick, Hypothesis hypothesis, RngStream& rng) {
    cdouble y = std::sqrt(scenario.noise_variance) * rng.complex_normal();
    if (hypothesis == Hypothesis::h1) {
        const double scale = std::sqrt(scenario.total_energy / static_cast<double>(scenario.num_tx));
        for (int m = 0; m < scenario.num_tx; ++m) {
            const double d = scenario.geometry.path_distance(m, k);
            y += scale * h[static_cast<std::size_t>(m)] *
                 std::pow(d, -scenario.geometry.path_loss_eta) *
                 waveform_discrete(scenario, m, k, tick);
        }
    }
    return y;
}

MatchedFilterBank::MatchedFilterBank(const RadarScenario& scenario, int k, bool accumulate_cross)
    : scenario_(&scenario), k_(k), accumulate_cross_(accumulate_cross) {
    w_.assign(static_cast<std::size_t>(scenario.num_tx), cdouble(0.0, 0.0));
    if (accumulate_cross_)
        raw_cross_.assign(static_cast<std::size_t>(scenario.num_tx * scenario.num_tx),
                          cdouble(0.0, 0.0));
}

void MatchedFilterBank::update(cdouble observation, std::int64_t tick) {
    if (tick != t_ + 1) throw sequencing_error("MatchedFilterBank: ticks must advance by one");
    t_ = tick;
    const int m_count = scenario_->num_tx;
    std::vector<cdouble> s(static_cast<std::size_t>(m_count));
    for (int m = 0; m < m_count; ++m) s[static_cast<std::size_t>(m)] = waveform_discrete(*scenario_, m, k_, tick);
    for (int m = 0; m < m_count; ++m)
        w_[static_cast<std::size_t>(m)] += observation * std::conj(s[static_cast<std::size_t>(m)]);
    if (accumulate_cross_) {
        for (int m = 0; m < m_count; ++m)
            for (int n = 0; n < m_count; ++n)
                raw_cross_[static_cast<std::size_t>(m * m_count + n)] +=
                    s[static_cast<std::size_t>(m)] * std::conj(s[static_cast<std::size_t>(n)]);
    }
}

cdouble MatchedFilterBank::v(int m) const {
    const double d = scenario_->geometry.path_distance(m, k_);
    const double scale = std::sqrt(scenario_->total_energy / static_cast<double>(scenario_->num_tx)) *
                         std::pow(d, -scenario_->geometry.path_loss_eta) / scenario_->noise_variance;
    return scale * w_[static_cast<std::size_t>(m)];
}

double MatchedFilterBank::u(int m) const {
    const double d = scenario_->geometry.path_distance(m, k_);
    // sum_tau |s|^2 = t / S exactly for the unit-energy waveforms.
    return scenario_->total_energy / static_cast<double>(scenario_->num_tx) *
           std::pow(d, -2.0 * scenario_->geometry.path_loss_eta) / scenario_->noise_variance *
           static_cast<double>(t_) / scenario_->waveform_duration;
}

cdouble MatchedFilterBank::z(int m, int n) const {
    if (!accumulate_cross_)
        throw unsupported_method("MatchedFilterBank: cross terms were not accumulated");
    const double dm = scenario_->geometry.path_distance(m, k_);
    const double dn = scenario_->geometry.path_distance(n, k_);
    const double scale = scenario_->total_energy / static_cast<double>(scenario_->num_tx) *
                         std::pow(dm, -scenario_->geometry.path_loss_eta) *
                         std::pow(dn, -scenario_->geometry.path_loss_eta) /
                         scenario_->noise_variance;
    return scale * raw_cross_[static_cast<std::size_t>(m * scenario_->num_tx + n)];
}

namespace {

// Shared body of the marginal-likelihood block LLRs; mean_shift = 0 gives the
// zero-mean (Swerling 1) case.
double wsprt_block_llr(const MatchedFilterBank& bank, const RadarScenario& scenario,
                       std::int64_t p, cdouble mean_shift) {
    if (p <= 0) throw invalid_parameter("wsprt block LLR: p must be positive");
    const std::int64_t expected = p * scenario.samples_per_waveform();
    if (bank.ticks() != expected)
        throw sequencing_error("wsprt block LLR: bank is not at the requested block end");
    const double mu2 = std::norm(mean_shift);
    double llr = 0.0;
    for (int m = 0; m < scenario.num_tx; ++m) {
        const double u = bank.u(m);
        llr += std::norm(bank.v(m) + mean_shift) / (u + 1.0) - mu2 - std::log(u + 1.0);
    }
    return llr;
}

double gslrt_llr(const MatchedFilterBank& bank, const RadarScenario& scenario, std::int64_t t,
                 cdouble mean_shift) {
    if (t <= 0) throw invalid_parameter("GSLRT: t must be positive");
    if (bank.ticks() != t) throw sequencing_error("GSLRT: bank is not at the requested tick");
    const double mu2 = std::norm(mean_shift);
    const double quad = quadratic_form(build_g(bank, scenario), build_a(bank, scenario, mean_shift));
    return quad - static_cast<double>(scenario.num_tx) * (mu2 + std::log(M_PI));
}

double gslrt_orth_llr(const MatchedFilterBank& bank, const RadarScenario& scenario,
                      std::int64_t p, cdouble mean_shift) {
    if (p <= 0) throw invalid_parameter("GSLRT (diagonal): p must be positive");
    const std::int64_t expected = p * scenario.samples_per_waveform();
    if (bank.ticks() != expected)
        throw sequencing_error("GSLRT (diagonal): bank is not at the requested block end");
    const double mu2 = std::norm(mean_shift);
    double quad = 0.0;
    for (int m = 0; m < scenario.num_tx; ++m)
        quad += std::norm(bank.v(m) + mean_shift) / (bank.u(m) + 1.0);
    return quad - static_cast<double>(scenario.num_tx) * (mu2 + std::log(M_PI));
}

} // namespace

double llr_sw1_wsprt(const MatchedFilterBank& bank, const RadarScenario& scenario,
                     std::int64_t p) {
    return wsprt_block_llr(bank, scenario, p, cdouble(0.0, 0.0));
}

double llr_sw3_wsprt(const MatchedFilterBank& bank, const RadarScenario& scenario,
                     std::int64_t p) {
    return wsprt_block_llr(bank, scenario, p, scenario.rician_mean);
}

double llr_sw1_gslrt(const MatchedFilterBank& bank, const RadarScenario& scenario,
                     std::int64_t t) {
    return gslrt_llr(bank, scenario, t, cdouble(0.0, 0.0));
}

double llr_sw3_gslrt(const MatchedFilterBank& bank, const RadarScenario& scenario,
                     std::int64_t t) {
    return gslrt_llr(bank, scenario, t, scenario.rician_mean);
}

double llr_sw1_gslrt_orth(const MatchedFilterBank& bank, const RadarScenario& scenario,
                          std::int64_t p) {
    return gslrt_orth_llr(bank, scenario, p, cdouble(0.0, 0.0));
}

double llr_sw3_gslrt_orth(const MatchedFilterBank& bank, const RadarScenario& scenario,
                          std::int64_t p) {
    return gslrt_orth_llr(bank, scenario, p, scenario.rician_mean);
}

std::vector<cdouble> map_channel_estimate(const MatchedFilterBank& bank,
                                          const RadarScenario& scenario) {
    const cdouble shift = scenario.swerling == SwerlingCase::three ? scenario.rician_mean
                                                                   : cdouble(0.0, 0.0);
    const Eigen::MatrixXcd g = build_g(bank, scenario);
    Eigen::LLT<Eigen::MatrixXcd> llt(g);
    if (llt.info() != Eigen::Success)
        throw conditioning_error("MAP estimate: Hermitian system is not positive definite");
    const Eigen::VectorXcd x = llt.solve(build_a(bank, scenario, shift));
    return {x.data(), x.data() + x.size()};
}

double log_posterior_objective(const MatchedFilterBank& bank, const RadarScenario& scenario,
                               const std::vector<cdouble>& h) {
    // -h^H G h + h^H a~ + a~^H h, the h-dependent part of ln f1(y|h) f(h).
    const cdouble shift = scenario.swerling == SwerlingCase::three ? scenario.rician_mean
                                                                   : cdouble(0.0, 0.0);
    const Eigen::MatrixXcd g = build_g(bank, scenario);
    const Eigen::VectorXcd a = build_a(bank, scenario, shift);
    Eigen::VectorXcd hv(scenario.num_tx);
    for (int m = 0; m < scenario.num_tx; ++m) hv(m) = h[static_cast<std::size_t>(m)];
    return (-hv.dot(g * hv) + hv.dot(a) + a.dot(hv)).real();
}

double llr_sw2_increment(const RadarScenario& scenario, int k, cdouble observation) {
    const double rho2 = scenario.rho_squared(k);
    const double sigma2 = scenario.noise_variance;
    return rho2 / ((rho2 + sigma2) * sigma2) * std::norm(observation) +
           std::log(sigma2 / (rho2 + sigma2));
}

double llr_sw4_increment(const RadarScenario& scenario, int k, cdouble observation,
                         std::int64_t tick) {
    const double rho2 = scenario.rho_squared(k);
    const double sigma2 = scenario.noise_variance;
    const cdouble mt = scenario.mu_tilde(k, tick);
    const double numerator = rho2 / sigma2 * std::norm(observation) +
                             2.0 * (std::conj(observation) * mt).real() - std::norm(mt);
    return numerator / (rho2 + sigma2) + std::log(sigma2 / (rho2 + sigma2));
}

namespace {

class RadarLlrSource final : public models::LlrSource {
public:
    RadarLlrSource(const RadarScenario& scenario, int k, Hypothesis hypothesis)
        : scenario_(&scenario),
          k_(k),
          hypothesis_(hypothesis),
          bank_(scenario, k, scenario.detector == RadarDetector::gslrt) {}

    double advance(std::int64_t tick, const SensorRng& rng) override {
        const bool fast = scenario_->swerling == SwerlingCase::two ||
                          scenario_->swerling == SwerlingCase::four;
        if (hypothesis_ == Hypothesis::h1) {
            if (fast) {
                auto stream = rng.at(static_cast<std::uint64_t>(tick), RngPurpose::channel_coefficient);
                h_ = draw_channels(*scenario_, stream);
            } else if (h_.empty()) {
                // Slow fluctuation: one draw per scan (trial).
                auto stream = rng.at(0, RngPurpose::channel_coefficient);
                h_ = draw_channels(*scenario_, stream);
            }
        }
        auto obs_stream = rng.at(static_cast<std::uint64_t>(tick), RngPurpose::observation);
        const cdouble y = synthesize_observation(*scenario_, h_, k_, tick, hypothesis_, obs_stream);

        switch (scenario_->detector) {
            case RadarDetector::recursive:
                llr_ += scenario_->swerling == SwerlingCase::two
                            ? llr_sw2_increment(*scenario_, k_, y)
                            : llr_sw4_increment(*scenario_, k_, y, tick);
                break;
            case RadarDetector::gslrt:
                bank_.update(y, tick);
                llr_ = scenario_->swerling == SwerlingCase::one
                           ? llr_sw1_gslrt(bank_, *scenario_, tick)
                           : llr_sw3_gslrt(bank_, *scenario_, tick);
                break;
            case RadarDetector::wsprt:
            case RadarDetector::gslrt_orth: {
                bank_.update(y, tick);
                const std::int64_t block = scenario_->samples_per_waveform();
                if (tick % block == 0) {
                    const std::int64_t p = tick / block;
                    if (scenario_->detector == RadarDetector::wsprt)
                        llr_ = scenario_->swerling == SwerlingCase::one
                                   ? llr_sw1_wsprt(bank_, *scenario_, p)
                                   : llr_sw3_wsprt(bank_, *scenario_, p);
                    else
                        llr_ = scenario_->swerling == SwerlingCase::one
                                   ? llr_sw1_gslrt_orth(bank_, *scenario_, p)
                                   : llr_sw3_gslrt_orth(bank_, *scenario_, p);
                }
                break;
            }
        }
        return llr_;
    }

private:
    const RadarScenario* scenario_;
    int k_;
    Hypothesis hypothesis_;
    MatchedFilterBank bank_;
    std::vector<cdouble> h_;
    double llr_ = 0.0;
};

} // namespace

RadarNetwork::RadarNetwork(RadarScenario scenario) : scenario_(std::move(scenario)) {
    scenario_.validate();
}

void RadarNetwork::calibrate_kl(std::size_t n_blocks, std::uint64_t seed) {
    if (n_blocks < 1) throw invalid_parameter("calibrate_kl: need at least one block");
    const RngRoot root(seed);
    const std::int64_t block = scenario_.samples_per_waveform();
    for (Hypothesis h : {Hypothesis::h0, Hypothesis::h1}) {
        double sum_abs = 0.0;
        for (int k = 0; k < scenario_.num_rx; ++k) {
            double mean = 0.0;
            for (std::size_t trial = 0; trial < n_blocks; ++trial) {
                RadarLlrSource source(scenario_, k, h);
                SensorRng rng(root, trial, static_cast<std::uint64_t>(k));
                double llr = 0.0;
                for (std::int64_t tick = 1; tick <= block; ++tick) llr = source.advance(tick, rng);
                mean += llr;
            }
            sum_abs += std::fabs(mean / static_cast<double>(n_blocks));
        }
        kl_[static_cast<int>(h)] = sum_abs;
    }
}

std::unique_ptr<models::LlrSource> RadarNetwork::make_source(int sensor, Hypothesis h,
                                                             std::uint64_t /*trial*/,
                                                             const RngRoot& /*root*/) const {
    if (sensor < 0 || sensor >= scenario_.num_rx)
        throw invalid_parameter("RadarNetwork: receiver index out of range");
    return std::make_unique<RadarLlrSource>(scenario_, sensor, h);
}

double RadarNetwork::block_kl_sum(Hypothesis h) const {
    const double value = kl_[static_cast<int>(h)];
    if (value < 0.0)
        throw unsupported_method("RadarNetwork: block KL numbers not calibrated yet");
    return value;
}

} // namespace seqdet::radar
