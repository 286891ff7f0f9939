#include "seqdet/models.hpp"

#include "seqdet/error.hpp"

namespace seqdet::models {

GaussianShiftModel::GaussianShiftModel(double mean_shift, double sigma, int id)
    : SensorModel(id), mean_shift_(mean_shift), sigma_(sigma) {
    if (!(sigma > 0.0)) throw invalid_parameter("GaussianShiftModel: sigma must be positive");
}

double GaussianShiftModel::draw(Hypothesis h, RngStream& rng) const {
    const double mean = h == Hypothesis::h1 ? mean_shift_ : 0.0;
    return mean + sigma_ * rng.normal();
}

double GaussianShiftModel::llr_increment(double observation) const {
    return (mean_shift_ * observation - 0.5 * mean_shift_ * mean_shift_) / (sigma_ * sigma_);
}

std::optional<KlNumbers> GaussianShiftModel::analytic_kl() const {
    const double kl = 0.5 * mean_shift_ * mean_shift_ / (sigma_ * sigma_);
    return KlNumbers{kl, kl};
}

std::shared_ptr<SensorModel> gaussian_shift_model(double mean_shift, double sigma, int id) {
    return std::make_shared<GaussianShiftModel>(mean_shift, sigma, id);
}

KlNumbers kl_numbers_analytic(const SensorModel& model) {
    if (auto kl = model.analytic_kl()) return *kl;
    throw unsupported_method("kl_numbers_analytic: model has no closed form");
}

KlNumbers kl_numbers_monte_carlo(const SensorModel& model, std::size_t n_draws,
                                 std::uint64_t seed) {
    if (n_draws < 1) throw invalid_parameter("kl_numbers_monte_carlo: n_draws must be >= 1");
    const RngRoot root(seed);
    auto s0 = root.stream(0, static_cast<std::uint64_t>(model.id()), 0, RngPurpose::calibration);
    auto s1 = root.stream(1, static_cast<std::uint64_t>(model.id()), 0, RngPurpose::calibration);
    double sum0 = 0.0;
    double sum1 = 0.0;
    for (std::size_t i = 0; i < n_draws; ++i) {
        sum0 -= model.llr_increment(model.draw(Hypothesis::h0, s0));
        sum1 += model.llr_increment(model.draw(Hypothesis::h1, s1));
    }
    const auto n = static_cast<double>(n_draws);
    return KlNumbers{sum0 / n, sum1 / n};
}

double IidLlrSource::advance(std::int64_t tick, const SensorRng& rng) {
    auto stream = rng.at(static_cast<std::uint64_t>(tick), RngPurpose::observation);
    llr_ += model_->llr_increment(model_->draw(hypothesis_, stream));
    return llr_;
}

GaussianNetwork::GaussianNetwork(int num_sensors, double mean_shift, double sigma)
    : num_sensors_(num_sensors) {
    if (num_sensors < 1) throw invalid_parameter("GaussianNetwork: need at least one sensor");
    model_ = gaussian_shift_model(mean_shift, sigma, 0);
}

std::unique_ptr<LlrSource> GaussianNetwork::make_source(int sensor, Hypothesis h,
                                                        std::uint64_t /*trial*/,
                                                        const RngRoot& /*root*/) const {
    if (sensor < 0 || sensor >= num_sensors_)
        throw invalid_parameter("GaussianNetwork: sensor index out of range");
    return std::make_unique<IidLlrSource>(model_, h);
}

double GaussianNetwork::block_kl_sum(Hypothesis h) const {
    const KlNumbers kl = kl_numbers_analytic(*model_);
    const double per_sensor = h == Hypothesis::h1 ? kl.i1 : kl.i0;
    return per_sensor * static_cast<double>(num_sensors_);
}

} // namespace seqdet::models
