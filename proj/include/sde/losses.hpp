#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sde/enhance.hpp"
#include "sde/matrix.hpp"
#include "sde/spectral.hpp"

namespace sde {

/// Cosine similarity a.b / (|a||b|). Zero-norm input throws
/// DegenerateInputError.
double cosine(std::span<const double> a, std::span<const double> b);

/// InfoNCE over row-paired batches, batch SUM (not mean):
///   -sum_i log( exp(s(x_i,y_i)/tau) / sum_j exp(s(x_i,y_j)/tau) )
/// computed with a max-shifted log-sum-exp.
double infonce(const Matrix& x, const Matrix& y, double tau);

/// w_i = 1 - (i-1)/r for i = 1..r: w_1 = 1 down to w_r = 1/r.
std::vector<double> linear_decay_weights(std::size_t r);

/// Hellinger distance between L2-normalized weighted spectra. Inputs are
/// padded with zeros to the longer length; w must have that length.
double hellinger_loss(std::span<const double> sigma_x, std::span<const double> sigma_y,
                      std::span<const double> w);

/// (1/sqrt(2k)) * ||Vx^T Vy - I_k||_F over n x k orthonormal inputs.
/// Columns further than 1e-8 from orthonormal throw ContractViolationError.
double subspace_loss(const Matrix& vx, const Matrix& vy);

inline double spec_loss(double hellinger, double subspace) {
    return 0.5 * (hellinger + subspace);
}

/// One batch's loss values. The arithmetic identities
/// spec == (hellinger + subspace)/2 and total == feat + lambda*spec
/// hold exactly by construction.
struct LossReport {
    double feat = 0.0;
    double hellinger = 0.0;
    double subspace = 0.0;
    double spec = 0.0;
    double lambda = 0.0;
    double total = 0.0;
    double tau = 0.0;
    std::size_t k = 0;
};

/// First k columns as an n x k matrix.
Matrix left_columns(const Matrix& m, std::size_t k);

/// Default subspace dimension: min(|S_x|, |S_y|, 8) with floor 1,
/// additionally capped by the available ranks.
std::size_t default_subspace_k(const SubspacePartition& px, const SubspacePartition& py,
                               std::size_t rank_x, std::size_t rank_y);

/// Full dual-domain loss on the (enhanced) batches: fresh SVDs of both
/// sides, Hellinger over the padded spectra, Gram loss over the top-k
/// right singular vectors, total = feat + lambda * spec.
LossReport total_loss(const Matrix& xe, const Matrix& ye, const ScheduleState& schedule,
                      std::size_t k, double tau);

/// Same with caller-supplied decompositions (they must belong to xe/ye).
LossReport total_loss(const Matrix& xe, const Matrix& ye, const SpectralDecomposition& dec_x,
                      const SpectralDecomposition& dec_y, const ScheduleState& schedule,
                      std::size_t k, double tau);

}  // namespace sde
