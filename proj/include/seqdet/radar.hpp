#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "seqdet/models.hpp"
#include "seqdet/rng.hpp"

namespace seqdet::radar {

using cdouble = std::complex<double>;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

double distance(const Vec3& a, const Vec3& b);

/// Transmitter/receiver/target layout. Distances are in km throughout; the
/// per-path delay D_mk = d_mk / c uses the speed of light in km/s.
struct Geometry {
    std::vector<Vec3> tx_positions;
    std::vector<Vec3> rx_positions;
    Vec3 target_position;
    double path_loss_eta = 2.0;
    double carrier_frequency_hz = 5e6;

    /// d_mk = |X_m^t - X_0| + |X_k^r - X_0|, km.
    double path_distance(int m, int k) const;
    /// D_mk = d_mk / c, seconds.
    double path_delay(int m, int k) const;
    /// True when some antenna sits exactly on the target (zero leg).
    bool has_degenerate_path() const;
};

/// Tx at (m, 0, 0), rx at (0, k, 0), target at (20, 15, 0), eta = 2,
/// carrier 5 MHz.
Geometry paper_geometry(int num_tx, int num_rx);

enum class SwerlingCase : int { one = 1, two = 2, three = 3, four = 4 };

/// Local test statistic computed at each receiver. wsprt and gslrt_orth are
/// evaluated at block ends (stride S_d); gslrt solves the full Hermitian
/// system every tick; cases 2 and 4 always use their recursive per-tick LLR.
enum class RadarDetector { wsprt, gslrt, gslrt_orth, recursive };

struct RadarScenario {
    Geometry geometry;
    int num_tx = 2;
    int num_rx = 2;
    double total_energy = 2.0;
    double noise_variance = 1.0;     // sigma_k^2, common to all receivers
    double waveform_duration = 2e-7; // S, seconds
    double sample_period = 1e-7;     // T_s, seconds
    SwerlingCase swerling = SwerlingCase::one;
    cdouble rician_mean = {1.0 / 3.0, 1.0 / 3.0}; // mu, cases 3-4
    RadarDetector detector = RadarDetector::wsprt;

    std::int64_t samples_per_waveform() const; // S_d = S / T_s
    void validate() const;

    /// Per-receiver received-signal power under fast fluctuation:
    /// rho_k^2 = (E/M) sum_m d_mk^{-2 eta} |s|^2 with |s|^2 = 1/S.
    double rho_squared(int k) const;

    /// Deterministic mean of y_t^k under Swerling 4:
    /// mu_tilde = mu sqrt(E/M) sum_m d_mk^{-eta} s^m_{t,D_mk}.
    cdouble mu_tilde(int k, std::int64_t tick) const;

    std::int64_t llr_stride() const;
};

/// Continuous-time baseband waveform s_m(t) = (1/sqrt(S)) e^{j 2 pi m t / S}
/// on [0, S), zero outside.
cdouble waveform_sample(int m, double t, double duration);

/// Discrete-time sample s^m_{tick, D_mk} = s_m(tick*T_s - D_mk) with the
/// complex exponential extended periodically over the observation window, so
/// the waveform set stays orthogonal over every block of S_d samples.
cdouble waveform_discrete(const RadarScenario& scenario, int m, int k, std::int64_t tick);

/// One channel coefficient per transmitter. Cases 1-2 are CN(0,1), cases 3-4
/// CN(mu,1); the caller decides per-trial vs per-tick redraws.
std::vector<cdouble> draw_channels(const RadarScenario& scenario, RngStream& rng);

/// Receiver-k observation at a tick: pure noise under H0, superposed
/// attenuated waveforms plus noise under H1.
cdouble synthesize_observation(const RadarScenario& scenario, const std::vector<cdouble>& h,
                               int k, std::int64_t tick, models::Hypothesis hypothesis,
                               RngStream& rng);

/// Running matched-filter statistics for one receiver: V_mk (scaled
/// correlations), U_mk (deterministic energy term) and, when requested, the
/// cross terms Z_mnk needed by the full GSLRT solve.
class MatchedFilterBank {
public:
    MatchedFilterBank(const RadarScenario& scenario, int k, bool accumulate_cross = false);

    void update(cdouble observation, std::int64_t tick);

    std::int64_t ticks() const { return t_; }
    int receiver() const { return k_; }

    /// W_m = sum_tau y_tau (s^m_tau)^*.
    cdouble raw_correlation(int m) const { return w_[static_cast<std::size_t>(m)]; }
    cdouble v(int m) const;
    double u(int m) const;
    cdouble z(int m, int n) const;
    bool has_cross_terms() const { return accumulate_cross_; }

private:
    const RadarScenario* scenario_;
    int k_;
    bool accumulate_cross_;
    std::int64_t t_ = 0;
    std::vector<cdouble> w_;
    std::vector<cdouble> raw_cross_; // row-major M x M, sum s^m (s^n)^*
};

/// Block LLRs at t = p * S_d (Swerling 1 and 3, marginal-likelihood form).
double llr_sw1_wsprt(const MatchedFilterBank& bank, const RadarScenario& scenario,
                     std::int64_t p);
double llr_sw3_wsprt(const MatchedFilterBank& bank, const RadarScenario& scenario,
                     std::int64_t p);

/// GSLRT statistics: quadratic form through a Hermitian positive definite
/// solve (no explicit inverse); valid at every tick.
double llr_sw1_gslrt(const MatchedFilterBank& bank, const RadarScenario& scenario,
                     std::int64_t t);
double llr_sw3_gslrt(const MatchedFilterBank& bank, const RadarScenario& scenario,
                     std::int64_t t);

/// Diagonal forms of the GSLRT statistics, valid at block ends where the
/// cross terms vanish.
double llr_sw1_gslrt_orth(const MatchedFilterBank& bank, const RadarScenario& scenario,
                          std::int64_t p);
double llr_sw3_gslrt_orth(const MatchedFilterBank& bank, const RadarScenario& scenario,
                          std::int64_t p);

/// MAP channel estimate h = G^{-1} a (mean-shifted for Swerling 3).
std::vector<cdouble> map_channel_estimate(const MatchedFilterBank& bank,
                                          const RadarScenario& scenario);

/// Log posterior-likelihood product ln f1(y|h) f(h) up to the h-independent
/// terms; used to probe the MAP estimate.
double log_posterior_objective(const MatchedFilterBank& bank, const RadarScenario& scenario,
                               const std::vector<cdouble>& h);

/// Per-tick LLR increments (Swerling 2 and 4).
double llr_sw2_increment(const RadarScenario& scenario, int k, cdouble observation);
double llr_sw4_increment(const RadarScenario& scenario, int k, cdouble observation,
                         std::int64_t tick);

/// NetworkModel over a radar scenario: one LLR source per receiver.
/// block_kl_sum is estimated by Monte Carlo once via calibrate_kl.
class RadarNetwork final : public models::NetworkModel {
public:
    explicit RadarNetwork(RadarScenario scenario);

    void calibrate_kl(std::size_t n_blocks, std::uint64_t seed);
    bool kl_calibrated() const { return kl_[0] >= 0.0; }

    int num_sensors() const override { return scenario_.num_rx; }
    std::int64_t stride() const override { return scenario_.llr_stride(); }
    std::unique_ptr<models::LlrSource> make_source(int sensor, models::Hypothesis h,
                                                   std::uint64_t trial,
                                                   const RngRoot& root) const override;
    std::int64_t kl_block_ticks() const override { return scenario_.samples_per_waveform(); }
    double block_kl_sum(models::Hypothesis h) const override;

    const RadarScenario& scenario() const { return scenario_; }

private:
    RadarScenario scenario_;
    double kl_[2] = {-1.0, -1.0};
};

} // namespace seqdet::radar
