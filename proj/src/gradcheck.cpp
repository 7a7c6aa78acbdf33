#include "sde/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sde/errors.hpp"
#include "sde/losses.hpp"

namespace sde {

namespace {

double eval_checked(const ScalarFn& f, const Matrix& at) {
    const double v = f(at);
    if (!std::isfinite(v)) throw NumericError("fd_gradient: non-finite function value");
    return v;
}

double central_diff(const ScalarFn& f, Matrix& work, std::size_t flat, double h) {
    const double saved = work.data()[flat];
    work.data()[flat] = saved + h;
    const double plus = eval_checked(f, work);
    work.data()[flat] = saved - h;
    const double minus = eval_checked(f, work);
    work.data()[flat] = saved;
    return (plus - minus) / (2.0 * h);
}

void require_h(double h) {
    if (!(h >= 1e-7) || h > 1e-3) throw RangeError("fd step h must lie in [1e-7, 1e-3]");
}

// Gradient of the Hellinger half of L_spec with respect to one side's
// singular values. p entries beyond this side's rank carry no gradient.
std::vector<double> hellinger_sigma_grad(std::span<const double> sigma_self,
                                         std::span<const double> sigma_other,
                                         std::span<const double> w, double half_weight) {
    const std::size_t r = w.size();
    auto weighted = [&](std::span<const double> sigma) {
        std::vector<double> z(r, 0.0);
        for (std::size_t i = 0; i < sigma.size(); ++i) z[i] = w[i] * sigma[i];
        return z;
    };
    std::vector<double> zx = weighted(sigma_self);
    std::vector<double> zy = weighted(sigma_other);
    const double nx = norm2(zx);
    const double ny = norm2(zy);
    if (!(nx > 0.0) || !(ny > 0.0)) {
        throw DegenerateInputError("hellinger gradient: all-zero spectrum");
    }
    std::vector<double> px(r), py(r);
    for (std::size_t i = 0; i < r; ++i) {
        px[i] = zx[i] / nx;
        py[i] = zy[i] / ny;
    }
    double dist_sq = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        const double d = std::sqrt(px[i]) - std::sqrt(py[i]);
        dist_sq += d * d;
    }
    const double loss = std::sqrt(dist_sq / 2.0);

    std::vector<double> grad(sigma_self.size(), 0.0);
    if (!(loss > 1e-14)) return grad;  // symmetric minimum, subgradient 0

    // dL/dp_i = (sqrt(p_i) - sqrt(q_i)) / (2*sqrt(2)*L*... ) with
    // L = sqrt(dist_sq/2): dL/d(dist_sq) = 1/(4L), d(dist_sq)/dp_i =
    // (1 - sqrt(q_i/p_i)).
    std::vector<double> pbar(r, 0.0);
    for (std::size_t i = 0; i < sigma_self.size(); ++i) {
        if (px[i] > 0.0) {
            pbar[i] = (1.0 - std::sqrt(py[i] / px[i])) / (4.0 * loss);
        }
    }
    // Through p = z/|z|: zbar = (pbar - (pbar.p) p)/|z|.
    double pp = 0.0;
    for (std::size_t i = 0; i < r; ++i) pp += pbar[i] * px[i];
    for (std::size_t i = 0; i < sigma_self.size(); ++i) {
        const double zbar = (pbar[i] - pp * px[i]) / nx;
        grad[i] = half_weight * w[i] * zbar;
    }
    return grad;
}

void check_gaps(const SpectralDecomposition& dec, std::size_t k) {
    const double sigma1 = dec.sigma[0];
    for (std::size_t i = 0; i < k && i + 1 < dec.rank; ++i) {
        if (dec.sigma[i] - dec.sigma[i + 1] < 1e-6 * sigma1) {
            throw DegenerateGapError(
                "spectral gradient: singular gap at position " + std::to_string(i + 1) +
                " is below 1e-6 * sigma_1; fall back to finite differences or skip this step");
        }
    }
}

}  // namespace

Matrix fd_gradient(const ScalarFn& f, const Matrix& at, double h) {
    require_h(h);
    Matrix work = at;
    Matrix grad(at.rows(), at.cols());
    for (std::size_t flat = 0; flat < at.size(); ++flat) {
        grad.data()[flat] = central_diff(f, work, flat, h);
    }
    return grad;
}

double grad_rel_error(double analytic, double fd) {
    const double scale = std::max({std::abs(analytic), std::abs(fd), 1e-8});
    return std::abs(analytic - fd) / scale;
}

GradReport compare_fd(const ScalarFn& f, const Matrix& at, const Matrix& analytic, double h,
                      std::size_t probes, Rng& rng) {
    require_h(h);
    if (analytic.rows() != at.rows() || analytic.cols() != at.cols()) {
        throw DimensionError("compare_fd: gradient shape mismatch");
    }
    std::vector<std::size_t> coords(at.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (probes < at.size()) {
        for (std::size_t i = 0; i < probes; ++i) {
            const std::size_t j = i + rng.next_below(coords.size() - i);
            std::swap(coords[i], coords[j]);
        }
        coords.resize(probes);
    }

    Matrix work = at;
    GradReport report;
    report.step_size = h;
    report.probe_count = coords.size();
    for (std::size_t flat : coords) {
        const double fd = central_diff(f, work, flat, h);
        const double an = analytic.data()[flat];
        report.max_rel_error = std::max(report.max_rel_error, grad_rel_error(an, fd));
        report.max_abs_error = std::max(report.max_abs_error, std::abs(an - fd));
    }
    return report;
}

GradPair grad_infonce(const Matrix& x, const Matrix& y, double tau) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
        throw DimensionError("grad_infonce: batches must share shape");
    }
    if (!(tau > 0.0)) throw RangeError("grad_infonce: tau must be positive");
    const std::size_t m = x.rows();
    const std::size_t n = x.cols();

    std::vector<double> nx(m), ny(m);
    Matrix xh(m, n), yh(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        nx[i] = norm2(x.row(i));
        ny[i] = norm2(y.row(i));
        if (!(nx[i] > 0.0) || !(ny[i] > 0.0)) {
            throw DegenerateInputError("grad_infonce: zero row at index " + std::to_string(i));
        }
        for (std::size_t j = 0; j < n; ++j) {
            xh(i, j) = x(i, j) / nx[i];
            yh(i, j) = y(i, j) / ny[i];
        }
    }

    Matrix sim = matmul(xh, transpose(yh));
    // G_ij = (softmax_j(sim_i/tau) - delta_ij) / tau
    Matrix g(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        double max_logit = -HUGE_VAL;
        for (std::size_t j = 0; j < m; ++j) max_logit = std::max(max_logit, sim(i, j) / tau);
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j) denom += std::exp(sim(i, j) / tau - max_logit);
        for (std::size_t j = 0; j < m; ++j) {
            const double p = std::exp(sim(i, j) / tau - max_logit) / denom;
            g(i, j) = (p - (i == j ? 1.0 : 0.0)) / tau;
        }
    }

    GradPair out{Matrix(m, n), Matrix(m, n)};
    // dX_i = sum_j G_ij (yh_j - sim_ij xh_i) / nx_i
    for (std::size_t i = 0; i < m; ++i) {
        double coeff = 0.0;
        std::vector<double> acc(n, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            const double gij = g(i, j);
            coeff += gij * sim(i, j);
            for (std::size_t t = 0; t < n; ++t) acc[t] += gij * yh(j, t);
        }
        for (std::size_t t = 0; t < n; ++t) out.dx(i, t) = (acc[t] - coeff * xh(i, t)) / nx[i];
    }
    // dY_j = sum_i G_ij (xh_i - sim_ij yh_j) / ny_j
    for (std::size_t j = 0; j < m; ++j) {
        double coeff = 0.0;
        std::vector<double> acc(n, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double gij = g(i, j);
            coeff += gij * sim(i, j);
            for (std::size_t t = 0; t < n; ++t) acc[t] += gij * xh(i, t);
        }
        for (std::size_t t = 0; t < n; ++t) out.dy(j, t) = (acc[t] - coeff * yh(j, t)) / ny[j];
    }
    return out;
}

Matrix svd_vjp(const SpectralDecomposition& dec, std::span<const double> sigma_bar,
               const Matrix& v_bar) {
    const std::size_t r = dec.rank;
    if (sigma_bar.size() != r || v_bar.rows() != dec.v.rows() || v_bar.cols() != r) {
        throw DimensionError("svd_vjp: cotangent shapes do not match the decomposition");
    }

    // P = V^T v_bar, r x r.
    Matrix p = matmul(transpose(dec.v), v_bar);

    // core = diag(sigma_bar) + M, with
    // M[j][i] = sigma_j * (P[j][i] - P[i][j]) / (sigma_i^2 - sigma_j^2).
    Matrix core(r, r);
    for (std::size_t j = 0; j < r; ++j) core(j, j) = sigma_bar[j];
    for (std::size_t j = 0; j < r; ++j) {
        for (std::size_t i = 0; i < r; ++i) {
            if (i == j) continue;
            const double anti = p(j, i) - p(i, j);
            if (anti == 0.0) continue;
            const double denom = dec.sigma[i] * dec.sigma[i] - dec.sigma[j] * dec.sigma[j];
            core(j, i) = dec.sigma[j] * anti / denom;
        }
    }

    // Nullspace transport: w = (v_bar - V P) scaled by 1/sigma.
    Matrix w_perp = sub(v_bar, matmul(dec.v, p));
    Matrix combined(r, dec.v.rows());
    Matrix core_vt = matmul(core, transpose(dec.v));
    for (std::size_t j = 0; j < r; ++j) {
        for (std::size_t i = 0; i < dec.v.rows(); ++i) {
            combined(j, i) = core_vt(j, i) + w_perp(i, j) / dec.sigma[j];
        }
    }
    return matmul(dec.u, combined);
}

GradPair grad_spectral(const SpectralDecomposition& dec_x, const SpectralDecomposition& dec_y,
                       std::size_t k, std::span<const double> w, SvdGradMode mode,
                       bool include_hellinger, bool include_subspace) {
    if (dec_x.rank == 0 || dec_y.rank == 0) {
        throw DegenerateInputError("grad_spectral: rank-0 decomposition");
    }
    if (k == 0 || k > std::min(dec_x.rank, dec_y.rank)) {
        throw RangeError("grad_spectral: k must lie in [1, min rank]");
    }
    const std::size_t r = std::max(dec_x.rank, dec_y.rank);
    if (w.size() != r) throw DimensionError("grad_spectral: weights length must be max rank");
    check_gaps(dec_x, k);
    check_gaps(dec_y, k);

    std::vector<double> sx_bar(dec_x.rank, 0.0), sy_bar(dec_y.rank, 0.0);
    if (include_hellinger) {
        sx_bar = hellinger_sigma_grad(dec_x.sigma, dec_y.sigma, w, 0.5);
        sy_bar = hellinger_sigma_grad(dec_y.sigma, dec_x.sigma, w, 0.5);
    }

    Matrix vx_bar(dec_x.v.rows(), dec_x.rank);
    Matrix vy_bar(dec_y.v.rows(), dec_y.rank);
    if (include_subspace && mode == SvdGradMode::full) {
        const Matrix vxk = left_columns(dec_x.v, k);
        const Matrix vyk = left_columns(dec_y.v, k);
        Matrix gram = matmul(transpose(vxk), vyk);
        for (std::size_t i = 0; i < k; ++i) gram(i, i) -= 1.0;
        const double gnorm = frobenius_norm(gram);
        if (gnorm > 1e-14) {
            const double c = 0.5 / (std::sqrt(2.0 * static_cast<double>(k)) * gnorm);
            Matrix gxk = scale(matmul(vyk, transpose(gram)), c);  // n x k
            Matrix gyk = scale(matmul(vxk, gram), c);
            for (std::size_t i = 0; i < vx_bar.rows(); ++i)
                for (std::size_t j = 0; j < k; ++j) vx_bar(i, j) = gxk(i, j);
            for (std::size_t i = 0; i < vy_bar.rows(); ++i)
                for (std::size_t j = 0; j < k; ++j) vy_bar(i, j) = gyk(i, j);
        }
    }

    GradPair out;
    if (mode == SvdGradMode::straight_through) {
        // Singular-value path only: dF = U diag(sigma_bar) V^T.
        Matrix zero_vx(dec_x.v.rows(), dec_x.rank);
        Matrix zero_vy(dec_y.v.rows(), dec_y.rank);
        out.dx = svd_vjp(dec_x, sx_bar, zero_vx);
        out.dy = svd_vjp(dec_y, sy_bar, zero_vy);
    } else {
        out.dx = svd_vjp(dec_x, sx_bar, vx_bar);
        out.dy = svd_vjp(dec_y, sy_bar, vy_bar);
    }
    return out;
}

GradPair grad_spectral(const Matrix& xe, const Matrix& ye, std::size_t k,
                       std::span<const double> w, SvdGradMode mode) {
    const SpectralDecomposition dec_x = svd(xe);
    const SpectralDecomposition dec_y = svd(ye);
    return grad_spectral(dec_x, dec_y, k, w, mode, true, true);
}

GradcheckSummary run_gradcheck_suite(std::uint64_t seed) {
    GradcheckSummary summary;
    summary.instances = 20;
    Rng rng(seed);

    // tau = 0.5 keeps the softmax away from saturation, where central
    // differences on near-flat coordinates drown in rounding noise; the
    // gradient code is tau-generic. h balances truncation (dominant here)
    // against cancellation.
    const double tau = 0.5;
    const double h = 2e-5;
    const std::size_t m = 12, n = 20;
    const std::size_t k = 3;

    for (std::size_t inst = 0; inst < summary.instances; ++inst) {
        const Matrix x = gaussian_matrix(rng, m, n, 1.0);
        const Matrix y = gaussian_matrix(rng, m, n, 1.0);

        // InfoNCE: both sides against central differences.
        const GradPair gn = grad_infonce(x, y, tau);
        const Matrix fdx = fd_gradient([&](const Matrix& xx) { return infonce(xx, y, tau); }, x, h);
        const Matrix fdy = fd_gradient([&](const Matrix& yy) { return infonce(x, yy, tau); }, y, h);
        for (std::size_t flat = 0; flat < x.size(); ++flat) {
            summary.infonce_max_rel = std::max(
                summary.infonce_max_rel, grad_rel_error(gn.dx.data()[flat], fdx.data()[flat]));
            summary.infonce_max_rel = std::max(
                summary.infonce_max_rel, grad_rel_error(gn.dy.data()[flat], fdy.data()[flat]));
        }

        // Spectral loss: full-mode gradient against central differences.
        const std::size_t r = std::min(m, n);
        const std::vector<double> w = linear_decay_weights(r);
        auto spec_at = [&](const Matrix& xx, const Matrix& yy) {
            const SpectralDecomposition dx = svd(xx);
            const SpectralDecomposition dy = svd(yy);
            const double hell = hellinger_loss(dx.sigma, dy.sigma, w);
            const double sub = subspace_loss(left_columns(dx.v, k), left_columns(dy.v, k));
            return 0.5 * (hell + sub);
        };
        const GradPair gs = grad_spectral(x, y, k, w, SvdGradMode::full);
        const Matrix fsx = fd_gradient([&](const Matrix& xx) { return spec_at(xx, y); }, x, h);
        const Matrix fsy = fd_gradient([&](const Matrix& yy) { return spec_at(x, yy); }, y, h);
        for (std::size_t flat = 0; flat < x.size(); ++flat) {
            summary.spectral_max_rel = std::max(
                summary.spectral_max_rel, grad_rel_error(gs.dx.data()[flat], fsx.data()[flat]));
            summary.spectral_max_rel = std::max(
                summary.spectral_max_rel, grad_rel_error(gs.dy.data()[flat], fsy.data()[flat]));
        }

        // dsigma_i = u_i^T dF v_i: perturbing along u_i v_i^T moves sigma_i by h.
        const SpectralDecomposition dec = svd(x);
        for (std::size_t idx : {std::size_t{0}, std::size_t{2}}) {
            Matrix perturbed = x;
            const double hh = 1e-5;
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    perturbed(a, b) += hh * dec.u(a, idx) * dec.v(b, idx);
            const SpectralDecomposition dec2 = svd(perturbed);
            const double moved = dec2.sigma[idx] - dec.sigma[idx];
            summary.sigma_identity_max_err =
                std::max(summary.sigma_identity_max_err, std::abs(moved - hh) / hh);
        }

        // Equivariance: grad of hellinger under Y -> Y Q^T equals (grad at Y) Q^T.
        if (inst == 0) {
            Rng qrng = rng.fork(0x517);
            const Matrix q = random_orthogonal(qrng, n);
            const Matrix yq = matmul(y, transpose(q));
            const GradPair g_orig = grad_spectral(x, y, k, w, SvdGradMode::straight_through);
            const GradPair g_rot = grad_spectral(x, yq, k, w, SvdGradMode::straight_through);
            const Matrix expected = matmul(g_orig.dy, transpose(q));
            double err = 0.0;
            for (std::size_t flat = 0; flat < expected.size(); ++flat) {
                err = std::max(err, std::abs(expected.data()[flat] - g_rot.dy.data()[flat]));
            }
            summary.equivariance_max_err = err;
        }
    }

    summary.pass = summary.infonce_max_rel <= 1e-4 && summary.spectral_max_rel <= 1e-4 &&
                   summary.sigma_identity_max_err <= 1e-4 && summary.equivariance_max_err <= 1e-6;
    return summary;
}

}  // namespace sde
