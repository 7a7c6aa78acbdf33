#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sde/matrix.hpp"

namespace sde {

/// Thin SVD F = U diag(sigma) V^T truncated to numerical rank.
struct SpectralDecomposition {
    Matrix u;                   // m x rank, orthonormal columns
    std::vector<double> sigma;  // descending, all > rank_tolerance * sigma[0]
    Matrix v;                   // n x rank, orthonormal columns
    std::size_t rank = 0;
};

/// One-sided Jacobi SVD.
///
/// Works on the tall orientation (the input is transposed first when
/// rows < cols) and sweeps column pairs cyclically until every pair
/// satisfies |a_p . a_q| <= 1e-14 * |a_p| * |a_q|, capped at 60 sweeps.
/// Deterministic sign convention: the entry of largest magnitude in each
/// V column is made positive (ties broken by lowest index).
///
/// rank_tolerance must lie in (0, 1e-3]; singular values at or below
/// rank_tolerance * sigma[0] are truncated out of the returned rank.
SpectralDecomposition svd(const Matrix& f, double rank_tolerance = 1e-12);

/// U diag(values) V^T for any replacement diagonal of length rank.
Matrix reconstruct_with(const SpectralDecomposition& dec, std::span<const double> values);

inline Matrix reconstruct(const SpectralDecomposition& dec) {
    return reconstruct_with(dec, dec.sigma);
}

/// Marchenko-Pastur singular-value support for an m x n i.i.d. matrix
/// with entry scale vartheta: [vartheta*|sqrt(n)-sqrt(m)|, vartheta*(sqrt(n)+sqrt(m))].
struct MpBounds {
    double lower = 0.0;
    double upper = 0.0;
    double vartheta = 0.0;
    std::size_t m = 0;
    std::size_t n = 0;
};

MpBounds mp_bounds(std::size_t m, std::size_t n, double vartheta);

/// Noise-scale estimate: spectrum median divided by the center of the
/// unit-scale MP support. Throws DegenerateInputError when the median
/// is zero (all-zero or majority-zero spectrum).
double estimate_vartheta(std::span<const double> sigma, std::size_t m, std::size_t n);

/// Three-way split of the sorted spectrum into contiguous index blocks.
/// Indices are 0-based positions into sigma.
struct SubspacePartition {
    std::vector<std::size_t> strong;
    std::vector<std::size_t> weak;
    std::vector<std::size_t> noise;
    double noise_edge = 0.0;        // MP upper edge used for the noise cut
    double strong_threshold = 0.0;  // Tukey fence Q3 + 1.5*IQR
    double vartheta = 0.0;          // estimate behind noise_edge
};

/// Noise = values at or below the MP upper edge (vartheta estimated from
/// the spectrum); strong = remaining values above the Tukey fence over the
/// full spectrum; weak = the rest. If the fence leaves strong empty while
/// non-noise values exist, the top value is promoted to strong.
SubspacePartition partition(const SpectralDecomposition& dec, std::size_t m, std::size_t n);

/// Same split logic with caller-supplied thresholds (vartheta left 0).
SubspacePartition partition_with_thresholds(std::span<const double> sigma, double noise_edge,
                                            double strong_threshold);

/// Per-subspace composition summary plus the cumulative energy curve.
struct SpectralReport {
    std::size_t strong_count = 0, weak_count = 0, noise_count = 0;
    double strong_proportion = 0.0, weak_proportion = 0.0, noise_proportion = 0.0;
    double strong_energy = 0.0, weak_energy = 0.0, noise_energy = 0.0;  // fractions of total
    std::vector<double> cumulative_energy;  // partial sums of sigma_i^2 / total
    double noise_edge = 0.0, strong_threshold = 0.0, vartheta = 0.0;
};

SpectralReport spectral_report(const SpectralDecomposition& dec, const SubspacePartition& part);

/// Report math on a bare spectrum (test seam; spectral_report delegates here).
SpectralReport spectral_report_from(std::span<const double> sigma, const SubspacePartition& part);

/// Tukey fence Q3 + 1.5*IQR with type-7 (linear interpolation) quartiles.
double tukey_fence(std::span<const double> sigma_descending);

}  // namespace sde
