#include "sde/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sde/errors.hpp"

namespace sde {

namespace {

constexpr double kRotationTolerance = 1e-14;
constexpr int kMaxSweeps = 60;

// Orthogonalizes the columns of the tall matrix held column-major in
// `cols` (each row of `cols` is one column of length m), accumulating the
// right factor in `vrows` (each row is one column of V). Returns the
// number of sweeps used; throws ConvergenceError past the cap.
void jacobi_orthogonalize(Matrix& cols, Matrix& vrows) {
    const std::size_t n = cols.rows();  // number of columns being rotated
    const std::size_t m = cols.cols();  // column length
    std::vector<double> colsq(n);

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        for (std::size_t j = 0; j < n; ++j) colsq[j] = dot(cols.row(j), cols.row(j));

        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* ap = cols.row(p).data();
                double* aq = cols.row(q).data();
                const double alpha = colsq[p];
                const double beta = colsq[q];
                double gamma = 0.0;
                for (std::size_t t = 0; t < m; ++t) gamma += ap[t] * aq[t];

                if (std::abs(gamma) <= kRotationTolerance * std::sqrt(alpha * beta)) continue;

                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t_rot =
                    (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double cs = 1.0 / std::sqrt(1.0 + t_rot * t_rot);
                const double sn = cs * t_rot;

                for (std::size_t t = 0; t < m; ++t) {
                    const double x = ap[t];
                    const double y = aq[t];
                    ap[t] = cs * x - sn * y;
                    aq[t] = sn * x + cs * y;
                }
                double* vp = vrows.row(p).data();
                double* vq = vrows.row(q).data();
                for (std::size_t t = 0; t < n; ++t) {
                    const double x = vp[t];
                    const double y = vq[t];
                    vp[t] = cs * x - sn * y;
                    vq[t] = sn * x + cs * y;
                }
                colsq[p] = cs * cs * alpha - 2.0 * cs * sn * gamma + sn * sn * beta;
                colsq[q] = sn * sn * alpha + 2.0 * cs * sn * gamma + cs * cs * beta;
                rotated = true;
            }
        }
        if (!rotated) return;
    }

    // Residual for the error message: worst remaining pair ratio.
    double residual = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
        for (std::size_t q = p + 1; q < n; ++q) {
            const double denom = norm2(cols.row(p)) * norm2(cols.row(q));
            if (denom > 0.0) {
                residual = std::max(residual, std::abs(dot(cols.row(p), cols.row(q))) / denom);
            }
        }
    }
    throw ConvergenceError("svd failed to converge in " + std::to_string(kMaxSweeps) +
                           " sweeps; worst pair residual " + std::to_string(residual));
}

}  // namespace

SpectralDecomposition svd(const Matrix& f, double rank_tolerance) {
    if (!(rank_tolerance > 0.0) || rank_tolerance > 1e-3) {
        throw RangeError("svd rank_tolerance must lie in (0, 1e-3]");
    }
    if (!f.all_finite()) throw NumericError("svd input contains non-finite values");

    const bool transposed = f.rows() < f.cols();
    // `cols` holds the tall working matrix column-major: row j = column j.
    Matrix cols = transposed ? f : transpose(f);
    const std::size_t n_work = cols.rows();
    Matrix vrows = Matrix::identity(n_work);

    jacobi_orthogonalize(cols, vrows);

    std::vector<double> norms(n_work);
    for (std::size_t j = 0; j < n_work; ++j) norms[j] = norm2(cols.row(j));

    std::vector<std::size_t> order(n_work);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });

    const double top = norms[order[0]];
    std::size_t rank = 0;
    while (rank < n_work && norms[order[rank]] > rank_tolerance * top) ++rank;

    SpectralDecomposition dec;
    dec.rank = rank;
    if (rank == 0) {
        dec.sigma.clear();
        return dec;
    }

    const std::size_t m_work = cols.cols();
    Matrix u_work(m_work, rank);   // normalized surviving columns
    Matrix v_work(n_work, rank);
    dec.sigma.resize(rank);
    for (std::size_t j = 0; j < rank; ++j) {
        const std::size_t src = order[j];
        const double s = norms[src];
        dec.sigma[j] = s;
        auto col = cols.row(src);
        for (std::size_t i = 0; i < m_work; ++i) u_work(i, j) = col[i] / s;
        auto vcol = vrows.row(src);
        for (std::size_t i = 0; i < n_work; ++i) v_work(i, j) = vcol[i];
    }

    if (transposed) {
        // f = (tall)^T = V_work Sigma U_work^T.
        dec.u = std::move(v_work);
        dec.v = std::move(u_work);
    } else {
        dec.u = std::move(u_work);
        dec.v = std::move(v_work);
    }

    // Sign convention on the original-orientation V.
    for (std::size_t j = 0; j < rank; ++j) {
        std::size_t arg = 0;
        double best = std::abs(dec.v(0, j));
        for (std::size_t i = 1; i < dec.v.rows(); ++i) {
            const double a = std::abs(dec.v(i, j));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (dec.v(arg, j) < 0.0) {
            for (std::size_t i = 0; i < dec.v.rows(); ++i) dec.v(i, j) = -dec.v(i, j);
            for (std::size_t i = 0; i < dec.u.rows(); ++i) dec.u(i, j) = -dec.u(i, j);
        }
    }
    return dec;
}

Matrix reconstruct_with(const SpectralDecomposition& dec, std::span<const double> values) {
    if (values.size() != dec.rank) {
        throw DimensionError("diagonal length " + std::to_string(values.size()) +
                             " does not match rank " + std::to_string(dec.rank));
    }
    if (dec.rank == 0) throw DegenerateInputError("cannot reconstruct a rank-0 decomposition");
    // U * (diag(values) * V^T), scaling rows of V^T first.
    Matrix scaled_vt(dec.rank, dec.v.rows());
    for (std::size_t j = 0; j < dec.rank; ++j) {
        for (std::size_t i = 0; i < dec.v.rows(); ++i) scaled_vt(j, i) = values[j] * dec.v(i, j);
    }
    return matmul(dec.u, scaled_vt);
}

MpBounds mp_bounds(std::size_t m, std::size_t n, double vartheta) {
    if (m == 0 || n == 0) throw DimensionError("mp_bounds dimensions must be at least 1");
    if (!(vartheta > 0.0)) throw RangeError("mp_bounds vartheta must be positive");
    const double sm = std::sqrt(static_cast<double>(m));
    const double sn = std::sqrt(static_cast<double>(n));
    MpBounds b;
    b.lower = vartheta * std::abs(sn - sm);
    b.upper = vartheta * (sn + sm);
    b.vartheta = vartheta;
    b.m = m;
    b.n = n;
    return b;
}

double estimate_vartheta(std::span<const double> sigma, std::size_t m, std::size_t n) {
    if (sigma.empty()) throw DegenerateInputError("estimate_vartheta: empty spectrum");
    const std::size_t r = sigma.size();
    const double median =
        (r % 2 == 1) ? sigma[r / 2] : 0.5 * (sigma[r / 2 - 1] + sigma[r / 2]);
    if (!(median > 0.0)) {
        throw DegenerateInputError("estimate_vartheta: spectrum median is zero");
    }
    const double sm = std::sqrt(static_cast<double>(m));
    const double sn = std::sqrt(static_cast<double>(n));
    const double support_center = 0.5 * (std::abs(sn - sm) + (sn + sm));
    return median / support_center;
}

double tukey_fence(std::span<const double> sigma_descending) {
    std::vector<double> asc(sigma_descending.begin(), sigma_descending.end());
    std::sort(asc.begin(), asc.end());
    const std::size_t r = asc.size();
    auto quantile = [&](double q) {
        if (r == 1) return asc[0];
        const double pos = q * static_cast<double>(r - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, r - 1);
        const double frac = pos - static_cast<double>(lo);
        return asc[lo] + frac * (asc[hi] - asc[lo]);
    };
    const double q1 = quantile(0.25);
    const double q3 = quantile(0.75);
    return q3 + 1.5 * (q3 - q1);
}

SubspacePartition partition_with_thresholds(std::span<const double> sigma, double noise_edge,
                                            double strong_threshold) {
    if (sigma.empty()) throw DegenerateInputError("partition: empty spectrum");
    const std::size_t r = sigma.size();

    // sigma is descending, so the noise set is a suffix.
    std::size_t non_noise = r;
    while (non_noise > 0 && sigma[non_noise - 1] <= noise_edge) --non_noise;

    SubspacePartition part;
    part.noise_edge = noise_edge;
    part.strong_threshold = strong_threshold;

    std::size_t strong_end = 0;
    while (strong_end < non_noise && sigma[strong_end] > strong_threshold) ++strong_end;
    if (strong_end == 0 && non_noise > 0) strong_end = 1;  // promote the top value

    for (std::size_t i = 0; i < strong_end; ++i) part.strong.push_back(i);
    for (std::size_t i = strong_end; i < non_noise; ++i) part.weak.push_back(i);
    for (std::size_t i = non_noise; i < r; ++i) part.noise.push_back(i);
    return part;
}

SubspacePartition partition(const SpectralDecomposition& dec, std::size_t m, std::size_t n) {
    if (dec.rank == 0) throw DegenerateInputError("partition: rank-0 decomposition");
    const double vartheta = estimate_vartheta(dec.sigma, m, n);
    const double edge = mp_bounds(m, n, vartheta).upper;
    const double fence = tukey_fence(dec.sigma);
    SubspacePartition part = partition_with_thresholds(dec.sigma, edge, fence);
    part.vartheta = vartheta;
    return part;
}

SpectralReport spectral_report_from(std::span<const double> sigma, const SubspacePartition& part) {
    if (sigma.empty()) throw DegenerateInputError("spectral_report: empty spectrum");
    const std::size_t r = sigma.size();

    double total = 0.0;
    for (double s : sigma) total += s * s;
    if (!(total > 0.0)) throw DegenerateInputError("spectral_report: zero-energy spectrum");

    auto energy_of = [&](const std::vector<std::size_t>& idx) {
        double e = 0.0;
        for (std::size_t i : idx) e += sigma[i] * sigma[i];
        return e / total;
    };

    SpectralReport rep;
    rep.strong_count = part.strong.size();
    rep.weak_count = part.weak.size();
    rep.noise_count = part.noise.size();
    const double rd = static_cast<double>(r);
    rep.strong_proportion = static_cast<double>(rep.strong_count) / rd;
    rep.weak_proportion = static_cast<double>(rep.weak_count) / rd;
    rep.noise_proportion = static_cast<double>(rep.noise_count) / rd;
    rep.strong_energy = energy_of(part.strong);
    rep.weak_energy = energy_of(part.weak);
    rep.noise_energy = energy_of(part.noise);

    rep.cumulative_energy.resize(r);
    double running = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        running += sigma[i] * sigma[i];
        rep.cumulative_energy[i] = running / total;
    }

    rep.noise_edge = part.noise_edge;
    rep.strong_threshold = part.strong_threshold;
    rep.vartheta = part.vartheta;
    return rep;
}

SpectralReport spectral_report(const SpectralDecomposition& dec, const SubspacePartition& part) {
    return spectral_report_from(dec.sigma, part);
}

}  // namespace sde
