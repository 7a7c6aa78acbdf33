#include "sde/enhance.hpp"

#include <algorithm>
#include <cmath>

#include "sde/errors.hpp"

namespace sde {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

}  // namespace

double batch_scaling_factor(std::size_t batch_size) {
    if (batch_size == 0) throw RangeError("batch_size must be at least 1");
    return std::log(static_cast<double>(batch_size) / 256.0 + 1.0) / std::log(8.0);
}

double alpha_schedule(std::size_t t, std::size_t total_steps, std::size_t batch_size) {
    if (total_steps == 0) throw RangeError("total_steps must be at least 1");
    if (t > total_steps) throw RangeError("schedule step t=" + std::to_string(t) +
                                          " exceeds total_steps=" + std::to_string(total_steps));
    const double beta = batch_scaling_factor(batch_size);
    const double p = static_cast<double>(t) / static_cast<double>(total_steps);
    if (p < 0.15) return (0.8 - 0.15 * beta) * (1.0 - std::cos(6.0 * kPi * p));
    if (p < 0.5) return (0.4 - 0.08 * beta) * (1.0 + std::cos(3.0 * kPi * (p - 0.15)));
    return (0.1 - 0.02 * beta) * (1.0 - std::cos(2.0 * kPi * (p - 0.5)));
}

double lambda_schedule(double progress) {
    if (!(progress >= 0.0) || progress > 1.0) {
        throw RangeError("lambda_schedule progress must lie in [0, 1]");
    }
    if (progress < 0.3) return 0.05 + 0.015 * (1.0 - std::cos(kPi * progress / 0.3));
    if (progress < 0.7) return 0.08;
    return 0.08 - 0.025 * (1.0 - std::cos(kPi * (progress - 0.7) / 0.3));
}

ScheduleState ScheduleState::at(std::size_t t, std::size_t total_steps, std::size_t batch_size) {
    ScheduleState s;
    s.step = t;
    s.total_steps = total_steps;
    s.batch_size = batch_size;
    s.beta = batch_scaling_factor(batch_size);
    s.alpha = alpha_schedule(t, total_steps, batch_size);
    s.progress = static_cast<double>(t) / static_cast<double>(total_steps);
    s.lambda = lambda_schedule(s.progress);
    return s;
}

DeltaSpec build_delta(const SpectralDecomposition& dec, const SubspacePartition& part,
                      double alpha, Rng& rng) {
    if (dec.rank == 0 || !(dec.sigma[0] > 0.0)) {
        throw DegenerateInputError("build_delta requires a nonzero leading singular value");
    }
    if (alpha < 0.0) throw RangeError("build_delta alpha must be >= 0");

    const double sigma1 = dec.sigma[0];

    double signal_energy = 0.0;
    for (std::size_t i : part.strong) signal_energy += dec.sigma[i] * dec.sigma[i];
    for (std::size_t i : part.weak) signal_energy += dec.sigma[i] * dec.sigma[i];
    double noise_energy = 0.0;
    for (std::size_t i : part.noise) noise_energy += dec.sigma[i] * dec.sigma[i];

    const double gamma_raw =
        (part.noise.empty() || !(noise_energy > 0.0)) ? 0.0 : signal_energy / noise_energy;

    DeltaSpec spec;
    spec.deltas.assign(dec.rank, 0.0);
    spec.gamma_noise = gamma_raw;
    spec.epsilon_draws.reserve(part.strong.size());

    for (std::size_t i : part.strong) {
        const double eps = rng.normal();
        spec.epsilon_draws.push_back(eps);
        spec.deltas[i] = alpha * (dec.sigma[i] / sigma1) * eps;
    }
    for (std::size_t i : part.weak) {
        const double ratio = dec.sigma[i] / sigma1;
        spec.deltas[i] = -std::min(alpha * ratio * ratio, 1.0) * dec.sigma[i];
    }
    const double noise_factor = std::min(alpha * gamma_raw, 1.0);
    for (std::size_t i : part.noise) {
        spec.deltas[i] = -noise_factor * dec.sigma[i];
    }
    return spec;
}

Matrix enhance(const Matrix& f, const DeltaSpec& delta, const SpectralDecomposition& dec) {
    if (delta.deltas.size() != dec.rank) {
        throw DimensionError("enhance: delta length " + std::to_string(delta.deltas.size()) +
                             " does not match rank " + std::to_string(dec.rank));
    }
    if (dec.rank == 0 || f.rows() != dec.u.rows() || f.cols() != dec.v.rows()) {
        throw DimensionError("enhance: matrix shape does not match the decomposition");
    }
    bool all_zero = true;
    for (double d : delta.deltas) {
        if (d != 0.0) {
            all_zero = false;
            break;
        }
    }
    if (all_zero) return f;

    std::vector<double> values(dec.rank);
    for (std::size_t i = 0; i < dec.rank; ++i) values[i] = dec.sigma[i] + delta.deltas[i];
    Matrix out = reconstruct_with(dec, values);
    if (!out.all_finite()) throw NumericError("enhance produced non-finite entries");
    return out;
}

double delta_energy_bound(const SpectralDecomposition& dec, const SubspacePartition& part,
                          double alpha) {
    const double sigma1 = dec.sigma.empty() ? 0.0 : dec.sigma[0];
    if (!(sigma1 > 0.0)) {
        throw DegenerateInputError("delta_energy_bound requires a nonzero spectrum");
    }
    double weak_term = 0.0;
    for (std::size_t i : part.weak) {
        const double ratio = dec.sigma[i] / sigma1;
        weak_term += ratio * ratio * ratio * ratio * dec.sigma[i] * dec.sigma[i];
    }
    double signal_energy = 0.0;
    for (std::size_t i : part.strong) signal_energy += dec.sigma[i] * dec.sigma[i];
    for (std::size_t i : part.weak) signal_energy += dec.sigma[i] * dec.sigma[i];
    double noise_energy = 0.0;
    for (std::size_t i : part.noise) noise_energy += dec.sigma[i] * dec.sigma[i];
    const double gamma_raw =
        (part.noise.empty() || !(noise_energy > 0.0)) ? 0.0 : signal_energy / noise_energy;

    const double strong_term = static_cast<double>(part.strong.size());
    return alpha * alpha * (strong_term + weak_term + gamma_raw * gamma_raw * noise_energy);
}

BoundCheck frobenius_bound(std::span<const DeltaSpec> samples, const SpectralDecomposition& dec,
                           const SubspacePartition& part, double alpha) {
    if (samples.empty()) throw RangeError("frobenius_bound needs at least one sample");

    double mean = 0.0;
    for (const DeltaSpec& s : samples) {
        double energy = 0.0;
        for (double d : s.deltas) energy += d * d;
        mean += energy;
    }
    mean /= static_cast<double>(samples.size());

    BoundCheck check;
    check.samples = samples.size();
    check.empirical_mean = mean;
    check.analytic_bound = delta_energy_bound(dec, part, alpha);
    const double slack = 1.0 + 3.0 / std::sqrt(static_cast<double>(samples.size()));
    check.pass = mean <= check.analytic_bound * slack;
    return check;
}

}  // namespace sde
