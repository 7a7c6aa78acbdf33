#include "sde/losses.hpp"

#include <algorithm>
#include <cmath>

#include "sde/errors.hpp"

namespace sde {

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("cosine: vector lengths differ");
    const double na = norm2(a);
    const double nb = norm2(b);
    if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateInputError("cosine: zero-norm vector");
    return dot(a, b) / (na * nb);
}

double infonce(const Matrix& x, const Matrix& y, double tau) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
        throw DimensionError("infonce: batches must share shape");
    }
    if (!(tau > 0.0)) throw RangeError("infonce: tau must be positive");

    const std::size_t m = x.rows();
    std::vector<double> nx(m), ny(m);
    for (std::size_t i = 0; i < m; ++i) {
        nx[i] = norm2(x.row(i));
        ny[i] = norm2(y.row(i));
        if (!(nx[i] > 0.0) || !(ny[i] > 0.0)) {
            throw DegenerateInputError("infonce: zero row at index " + std::to_string(i));
        }
    }

    double loss = 0.0;
    std::vector<double> logits(m);
    for (std::size_t i = 0; i < m; ++i) {
        double max_logit = -HUGE_VAL;
        for (std::size_t j = 0; j < m; ++j) {
            logits[j] = dot(x.row(i), y.row(j)) / (nx[i] * ny[j] * tau);
            max_logit = std::max(max_logit, logits[j]);
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j) denom += std::exp(logits[j] - max_logit);
        loss += -(logits[i] - max_logit) + std::log(denom);
    }
    return loss;
}

std::vector<double> linear_decay_weights(std::size_t r) {
    if (r == 0) throw RangeError("linear_decay_weights: r must be >= 1");
    std::vector<double> w(r);
    const double rd = static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i) w[i] = 1.0 - static_cast<double>(i) / rd;
    return w;
}

double hellinger_loss(std::span<const double> sigma_x, std::span<const double> sigma_y,
                      std::span<const double> w) {
    const std::size_t r = std::max(sigma_x.size(), sigma_y.size());
    if (r == 0) throw DegenerateInputError("hellinger_loss: empty spectra");
    if (w.size() != r) {
        throw DimensionError("hellinger_loss: weights length must match the padded spectra");
    }
    for (std::size_t i = 0; i < r; ++i) {
        if (!(w[i] > 0.0)) throw RangeError("hellinger_loss: weights must be positive");
        if (i > 0 && w[i] > w[i - 1]) throw RangeError("hellinger_loss: weights must be nonincreasing");
    }

    auto weighted_normalized = [&](std::span<const double> sigma) {
        std::vector<double> p(r, 0.0);
        for (std::size_t i = 0; i < sigma.size(); ++i) p[i] = w[i] * sigma[i];
        const double n = norm2(p);
        if (!(n > 0.0)) throw DegenerateInputError("hellinger_loss: all-zero spectrum");
        for (double& v : p) v /= n;
        return p;
    };
    const std::vector<double> px = weighted_normalized(sigma_x);
    const std::vector<double> py = weighted_normalized(sigma_y);

    double dist_sq = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        const double d = std::sqrt(px[i]) - std::sqrt(py[i]);
        dist_sq += d * d;
    }
    return std::sqrt(dist_sq / 2.0);
}

double subspace_loss(const Matrix& vx, const Matrix& vy) {
    if (vx.rows() != vy.rows() || vx.cols() != vy.cols()) {
        throw DimensionError("subspace_loss: factor shapes differ");
    }
    const std::size_t k = vx.cols();
    if (k == 0) throw DimensionError("subspace_loss: k must be >= 1");

    auto check_orthonormal = [&](const Matrix& v, const char* name) {
        Matrix gram = matmul(transpose(v), v);
        double dev = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                const double target = (i == j) ? 1.0 : 0.0;
                const double d = gram(i, j) - target;
                dev += d * d;
            }
        }
        if (std::sqrt(dev) > 1e-8) {
            throw ContractViolationError(std::string("subspace_loss: ") + name +
                                         " columns are not orthonormal");
        }
    };
    check_orthonormal(vx, "vx");
    check_orthonormal(vy, "vy");

    Matrix gram = matmul(transpose(vx), vy);
    for (std::size_t i = 0; i < k; ++i) gram(i, i) -= 1.0;
    return frobenius_norm(gram) / std::sqrt(2.0 * static_cast<double>(k));
}

Matrix left_columns(const Matrix& m, std::size_t k) {
    if (k == 0 || k > m.cols()) throw DimensionError("left_columns: bad column count");
    Matrix out(m.rows(), k);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < k; ++j) out(i, j) = m(i, j);
    return out;
}

std::size_t default_subspace_k(const SubspacePartition& px, const SubspacePartition& py,
                               std::size_t rank_x, std::size_t rank_y) {
    std::size_t k = std::min({px.strong.size(), py.strong.size(), std::size_t{8}});
    k = std::max<std::size_t>(k, 1);
    return std::min({k, rank_x, rank_y});
}

LossReport total_loss(const Matrix& xe, const Matrix& ye, const ScheduleState& schedule,
                      std::size_t k, double tau) {
    const SpectralDecomposition dec_x = svd(xe);
    const SpectralDecomposition dec_y = svd(ye);
    return total_loss(xe, ye, dec_x, dec_y, schedule, k, tau);
}

LossReport total_loss(const Matrix& xe, const Matrix& ye, const SpectralDecomposition& dec_x,
                      const SpectralDecomposition& dec_y, const ScheduleState& schedule,
                      std::size_t k, double tau) {
    if (k == 0 || k > std::min(dec_x.rank, dec_y.rank)) {
        throw RangeError("total_loss: k must lie in [1, min rank]");
    }
    LossReport report;
    report.tau = tau;
    report.k = k;
    report.lambda = schedule.lambda;
    report.feat = infonce(xe, ye, tau);

    const std::size_t r = std::max(dec_x.rank, dec_y.rank);
    const std::vector<double> w = linear_decay_weights(r);
    report.hellinger = hellinger_loss(dec_x.sigma, dec_y.sigma, w);
    report.subspace = subspace_loss(left_columns(dec_x.v, k), left_columns(dec_y.v, k));
    report.spec = spec_loss(report.hellinger, report.subspace);
    report.total = report.feat + report.lambda * report.spec;
    return report;
}

}  // namespace sde
