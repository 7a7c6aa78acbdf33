#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sde/matrix.hpp"
#include "sde/rng.hpp"
#include "sde/spectral.hpp"

namespace sde {

/// Batch scaling factor: log(batch_size/256 + 1) / log(8).
double batch_scaling_factor(std::size_t batch_size);

/// Curriculum factor alpha(t), a three-branch cosine in progress p = t/T:
///   p < 0.15         : (0.8 - 0.15*beta) * (1 - cos(6*pi*p))
///   0.15 <= p < 0.5  : (0.4 - 0.08*beta) * (1 + cos(3*pi*(p - 0.15)))
///   p >= 0.5         : (0.1 - 0.02*beta) * (1 - cos(2*pi*(p - 0.5)))
/// The branch boundaries are genuinely discontinuous; membership is
/// half-open exactly as written. t > T throws RangeError.
double alpha_schedule(std::size_t t, std::size_t total_steps, std::size_t batch_size);

/// Spectral-loss weight lambda(p), continuous piecewise cosine:
///   p < 0.3          : 0.05 + 0.015 * (1 - cos(pi*p/0.3))
///   0.3 <= p < 0.7   : 0.08
///   p >= 0.7         : 0.08 - 0.025 * (1 - cos(pi*(p - 0.7)/0.3))
/// p outside [0, 1] throws RangeError.
double lambda_schedule(double progress);

/// Snapshot of the training clock and both schedules at step t.
struct ScheduleState {
    std::size_t step = 0;
    std::size_t total_steps = 1;
    std::size_t batch_size = 1;
    double progress = 0.0;
    double beta = 0.0;
    double alpha = 0.0;
    double lambda = 0.0;

    static ScheduleState at(std::size_t t, std::size_t total_steps, std::size_t batch_size);
};

/// The diagonal perturbation for one enhancement call. epsilon_draws holds
/// the standard-normal draws for the strong indices (in index order) so the
/// perturbation is exactly replayable.
struct DeltaSpec {
    std::vector<double> deltas;
    double gamma_noise = 0.0;  // clipped energy ratio actually applied
    std::vector<double> epsilon_draws;
};

/// Subspace-specific perturbations:
///   strong: alpha * (sigma_i/sigma_1) * eps_i,   eps_i ~ N(0,1)
///   weak:  -min(alpha * (sigma_i/sigma_1)^2, 1) * sigma_i
///   noise: -min(alpha * gamma, 1) * sigma_i,  gamma = energy(S+W)/energy(N)
/// The min-clips keep every enhanced singular value nonnegative.
DeltaSpec build_delta(const SpectralDecomposition& dec, const SubspacePartition& part,
                      double alpha, Rng& rng);

/// F' = U diag(sigma + delta) V^T. A perturbation of exactly zero returns
/// the input unchanged (reconstructing would only add rounding noise).
Matrix enhance(const Matrix& f, const DeltaSpec& delta, const SpectralDecomposition& dec);

/// Unclipped analytic bound on E[||Delta||_F^2]:
///   alpha^2 * (|S| + sum_W (sigma_j/sigma_1)^4 sigma_j^2 + gamma^2 sum_N sigma_k^2)
double delta_energy_bound(const SpectralDecomposition& dec, const SubspacePartition& part,
                          double alpha);

struct BoundCheck {
    double empirical_mean = 0.0;
    double analytic_bound = 0.0;
    bool pass = false;
    std::size_t samples = 0;
};

/// Monte Carlo check of the perturbation-energy bound:
/// pass iff mean(||Delta||_F^2) <= bound * (1 + 3/sqrt(#samples)).
BoundCheck frobenius_bound(std::span<const DeltaSpec> samples, const SpectralDecomposition& dec,
                           const SubspacePartition& part, double alpha);

}  // namespace sde
