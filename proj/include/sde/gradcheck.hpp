#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "sde/matrix.hpp"
#include "sde/rng.hpp"
#include "sde/spectral.hpp"

namespace sde {

using ScalarFn = std::function<double(const Matrix&)>;

/// Central finite differences (f(F+hE) - f(F-hE)) / 2h over every
/// coordinate. h must lie in [1e-7, 1e-3]; non-finite evaluations throw
/// NumericError.
Matrix fd_gradient(const ScalarFn& f, const Matrix& at, double h);

struct GradReport {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t probe_count = 0;
    double step_size = 0.0;
};

/// Relative error metric |a - f| / max(|a|, |f|, 1e-8).
double grad_rel_error(double analytic, double fd);

/// Central differences on `probes` randomly chosen coordinates (all of
/// them when probes >= size), compared against the analytic gradient.
GradReport compare_fd(const ScalarFn& f, const Matrix& at, const Matrix& analytic, double h,
                      std::size_t probes, Rng& rng);

struct GradPair {
    Matrix dx;
    Matrix dy;
};

/// Exact gradients of the InfoNCE batch sum with respect to both batches.
GradPair grad_infonce(const Matrix& x, const Matrix& y, double tau);

enum class SvdGradMode { straight_through, full };

/// Gradients of L_spec = (hellinger + subspace)/2 with respect to the
/// enhanced batches, via first-order SVD perturbation identities.
/// straight_through keeps only the singular-value path (U, V constants),
/// which is the exact gradient of the Hellinger half.
/// Adjacent top-k singular gaps below 1e-6 * sigma_1 throw
/// DegenerateGapError.
GradPair grad_spectral(const Matrix& xe, const Matrix& ye, std::size_t k,
                       std::span<const double> w, SvdGradMode mode = SvdGradMode::full);

/// Same with caller-supplied decompositions; include flags select which
/// loss halves contribute (used by the harness ablation modes).
GradPair grad_spectral(const SpectralDecomposition& dec_x, const SpectralDecomposition& dec_y,
                       std::size_t k, std::span<const double> w, SvdGradMode mode,
                       bool include_hellinger, bool include_subspace);

/// VJP through the thin SVD: maps cotangents (sigma_bar, v_bar) back to the
/// input matrix. v_bar must be n x rank (zero columns where no gradient).
Matrix svd_vjp(const SpectralDecomposition& dec, std::span<const double> sigma_bar,
               const Matrix& v_bar);

struct GradcheckSummary {
    bool pass = false;
    double infonce_max_rel = 0.0;
    double spectral_max_rel = 0.0;
    double sigma_identity_max_err = 0.0;
    double equivariance_max_err = 0.0;
    std::size_t instances = 0;
};

/// The full verification suite used by the CLI `gradcheck` command:
/// 20 random 12x20 instances, InfoNCE and spectral-loss FD matches at
/// 1e-4, singular-value perturbation identity, Hellinger-gradient
/// equivariance under a right orthogonal transform.
GradcheckSummary run_gradcheck_suite(std::uint64_t seed);

}  // namespace sde
