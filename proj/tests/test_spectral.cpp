#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "sde/errors.hpp"
#include "sde/matrix.hpp"
#include "sde/rng.hpp"
#include "sde/spectral.hpp"

using namespace sde;

namespace {

// Rank-`planted` signal with singular value `signal` plus unit Gaussian noise.
Matrix planted_matrix(Rng& rng, std::size_t m, std::size_t n, std::size_t planted,
                      double signal) {
    const Matrix qu = random_orthogonal(rng, m);
    const Matrix qv = random_orthogonal(rng, n);
    Matrix f = gaussian_matrix(rng, m, n, 1.0);
    for (std::size_t l = 0; l < planted; ++l) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) f(i, j) += signal * qu(i, l) * qv(j, l);
        }
    }
    return f;
}

double reconstruction_residual(const Matrix& f, const SpectralDecomposition& dec) {
    return frobenius_norm(sub(reconstruct(dec), f));
}

}  // namespace

TEST_CASE("svd of a diagonal matrix returns the diagonal") {
    const Matrix f = Matrix::from_rows({{3, 0, 0}, {0, 2, 0}, {0, 0, 1}});
    const SpectralDecomposition dec = svd(f);
    REQUIRE(dec.rank == 3);
    CHECK(dec.sigma[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(dec.sigma[1] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(dec.sigma[2] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("svd of a permutation matrix gives unit singular values") {
    const Matrix f = Matrix::from_rows({{0, 1}, {1, 0}});
    const SpectralDecomposition dec = svd(f);
    REQUIRE(dec.rank == 2);
    CHECK(dec.sigma[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(dec.sigma[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("svd reconstruction and orthonormality on random matrices") {
    Rng rng(21);
    for (int trial = 0; trial < 4; ++trial) {
        const std::size_t m = trial % 2 == 0 ? 50 : 128;
        const std::size_t n = trial % 2 == 0 ? 128 : 50;
        const Matrix f = gaussian_matrix(rng, m, n, 1.0);
        const SpectralDecomposition dec = svd(f);
        CHECK(dec.rank == std::min(m, n));
        CHECK(reconstruction_residual(f, dec) <= 1e-10 * frobenius_norm(f));
        CHECK(oracle::offdiag_identity_dev(matmul(transpose(dec.u), dec.u)) <= 1e-9);
        CHECK(oracle::offdiag_identity_dev(matmul(transpose(dec.v), dec.v)) <= 1e-9);
        CHECK(std::is_sorted(dec.sigma.rbegin(), dec.sigma.rend()));
    }
}

TEST_CASE("svd sign convention: largest V entry positive, bitwise repeatable") {
    Rng rng(22);
    const Matrix f = gaussian_matrix(rng, 12, 9, 1.0);
    const SpectralDecomposition a = svd(f);
    const SpectralDecomposition b = svd(f);
    CHECK(oracle::bitwise_equal(a.u, b.u));
    CHECK(oracle::bitwise_equal(a.v, b.v));
    for (std::size_t j = 0; j < a.rank; ++j) {
        double best = 0.0;
        for (std::size_t i = 0; i < a.v.rows(); ++i) {
            if (std::abs(a.v(i, j)) > std::abs(best)) best = a.v(i, j);
        }
        CHECK(best > 0.0);
    }
}

TEST_CASE("svd detects numerical rank of a low-rank matrix") {
    Rng rng(23);
    const Matrix left = gaussian_matrix(rng, 20, 2, 1.0);
    const Matrix right = gaussian_matrix(rng, 2, 15, 1.0);
    const SpectralDecomposition dec = svd(matmul(left, right));
    CHECK(dec.rank == 2);
}

TEST_CASE("svd rejects non-finite input and bad tolerance") {
    Matrix f = Matrix::identity(3);
    CHECK_THROWS_AS(svd(f, 0.0), RangeError);
    CHECK_THROWS_AS(svd(f, 1e-2), RangeError);
    f(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(svd(f), NumericError);
}

TEST_CASE("spectrum is invariant under left orthogonal transforms") {
    Rng rng(24);
    const Matrix f = gaussian_matrix(rng, 30, 48, 1.0);
    const Matrix q = random_orthogonal(rng, 30);
    const SpectralDecomposition base = svd(f);
    const SpectralDecomposition rotated = svd(matmul(q, f));
    REQUIRE(base.rank == rotated.rank);
    for (std::size_t i = 0; i < base.rank; ++i) {
        CHECK(std::abs(base.sigma[i] - rotated.sigma[i]) <= 1e-8);
    }
}

TEST_CASE("mp_bounds closed forms") {
    const MpBounds b = mp_bounds(100, 400, 1.0);
    CHECK(b.lower == doctest::Approx(10.0).epsilon(1e-14));
    CHECK(b.upper == doctest::Approx(30.0).epsilon(1e-14));
    CHECK(mp_bounds(64, 64, 1.0).lower == 0.0);
    CHECK(mp_bounds(400, 100, 2.0).lower == doctest::Approx(20.0).epsilon(1e-14));
    CHECK_THROWS_AS(mp_bounds(0, 4, 1.0), DimensionError);
    CHECK_THROWS_AS(mp_bounds(4, 4, 0.0), RangeError);
}

TEST_CASE("gaussian extreme singular values respect the MP support") {
    Rng rng(25);
    int inside = 0;
    const int trials = 40;
    for (int trial = 0; trial < trials; ++trial) {
        const Matrix f = gaussian_matrix(rng, 100, 400, 1.0);
        const SpectralDecomposition dec = svd(f);
        const double smax = dec.sigma.front();
        const double smin = dec.sigma.back();
        if (smax <= 30.0 * 1.05 && smin >= 10.0 * 0.95) ++inside;
    }
    CHECK(inside >= trials - 1);
}

TEST_CASE("estimate_vartheta closed form and homogeneity") {
    const std::vector<double> flat{5.0, 5.0, 5.0};
    const double est = estimate_vartheta(flat, 3, 3);
    CHECK(est == doctest::Approx(5.0 / std::sqrt(3.0)).epsilon(1e-14));

    const std::vector<double> spec{9.0, 7.5, 3.0, 1.0};
    const double base = estimate_vartheta(spec, 6, 9);
    std::vector<double> doubled = spec;
    for (double& v : doubled) v *= 2.0;
    CHECK(oracle::bitwise_equal(estimate_vartheta(doubled, 6, 9), 2.0 * base));
    std::vector<double> tripled = spec;
    for (double& v : tripled) v *= 3.0;
    CHECK(estimate_vartheta(tripled, 6, 9) == doctest::Approx(3.0 * base).epsilon(1e-14));

    CHECK_THROWS_AS(estimate_vartheta({}, 2, 2), DegenerateInputError);
    CHECK_THROWS_AS(estimate_vartheta(std::vector<double>{0.0, 0.0}, 2, 2),
                    DegenerateInputError);
}

TEST_CASE("estimate_vartheta recovers the scale of a pure Gaussian") {
    Rng rng(26);
    const Matrix f = gaussian_matrix(rng, 200, 800, 1.0);
    const SpectralDecomposition dec = svd(f);
    const double est = estimate_vartheta(dec.sigma, 200, 800);
    CHECK(est > 0.8);
    CHECK(est < 1.2);
}

TEST_CASE("partition_with_thresholds on a hand spectrum") {
    const std::vector<double> sigma{10.0, 0.1};
    const SubspacePartition part = partition_with_thresholds(sigma, 1.0, 5.0);
    CHECK(part.strong == std::vector<std::size_t>{0});
    CHECK(part.weak.empty());
    CHECK(part.noise == std::vector<std::size_t>{1});
}

TEST_CASE("partition promotes the top value when the fence empties strong") {
    const std::vector<double> sigma{4.0, 3.5, 0.5};
    const SubspacePartition part = partition_with_thresholds(sigma, 1.0, 100.0);
    CHECK(part.strong == std::vector<std::size_t>{0});
    CHECK(part.weak == std::vector<std::size_t>{1});
    CHECK(part.noise == std::vector<std::size_t>{2});
}

TEST_CASE("partition of a pure Gaussian marks nearly everything noise") {
    // Frozen from a 40-seed Monte Carlo of this pipeline: the median-based
    // scale estimate sits ~4-5% below the true edge at these dimensions, so
    // up to 3 bulk values land above it.
    std::size_t total_noise = 0, total_rank = 0;
    for (std::uint64_t seed : {31, 32, 33, 34, 35}) {
        Rng rng(seed);
        const Matrix f = gaussian_matrix(rng, 100, 400, 1.0);
        const SpectralDecomposition dec = svd(f);
        const SubspacePartition part = partition(dec, 100, 400);
        CHECK(part.strong.size() <= 1);
        CHECK(part.weak.size() <= 3);
        CHECK(part.noise.size() >= dec.rank - 4);
        total_noise += part.noise.size();
        total_rank += dec.rank;
    }
    CHECK(static_cast<double>(total_noise) >= 0.96 * static_cast<double>(total_rank));
}

TEST_CASE("partition keeps planted signal out of the noise set") {
    Rng rng(36);
    const Matrix f = planted_matrix(rng, 100, 400, 5, 100.0);
    const SpectralDecomposition dec = svd(f);
    const SubspacePartition part = partition(dec, 100, 400);
    for (std::size_t i = 0; i < 5; ++i) {
        const bool in_noise =
            std::find(part.noise.begin(), part.noise.end(), i) != part.noise.end();
        CHECK_FALSE(in_noise);
    }
}

TEST_CASE("partition blocks are disjoint, exhaustive and contiguous") {
    Rng rng(37);
    for (int trial = 0; trial < 6; ++trial) {
        const Matrix f = planted_matrix(rng, 40, 64, static_cast<std::size_t>(trial), 30.0);
        const SpectralDecomposition dec = svd(f);
        const SubspacePartition part = partition(dec, 40, 64);
        std::vector<std::size_t> all;
        all.insert(all.end(), part.strong.begin(), part.strong.end());
        all.insert(all.end(), part.weak.begin(), part.weak.end());
        all.insert(all.end(), part.noise.begin(), part.noise.end());
        REQUIRE(all.size() == dec.rank);
        for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);  // contiguous blocks
    }
}

TEST_CASE("partition is scale equivariant") {
    Rng rng(38);
    const Matrix f = planted_matrix(rng, 50, 80, 3, 40.0);
    const SpectralDecomposition dec = svd(f);
    const SubspacePartition base = partition(dec, 50, 80);
    for (double c : {2.0, 0.5, 3.0, 10.0}) {
        const SpectralDecomposition dec_c = svd(scale(f, c));
        const SubspacePartition scaled = partition(dec_c, 50, 80);
        CHECK(scaled.strong == base.strong);
        CHECK(scaled.weak == base.weak);
        CHECK(scaled.noise == base.noise);
    }
}

TEST_CASE("partition rejects a rank-0 decomposition") {
    const SpectralDecomposition dec = svd(Matrix(4, 4));
    CHECK(dec.rank == 0);
    CHECK_THROWS_AS(partition(dec, 4, 4), DegenerateInputError);
}

TEST_CASE("spectral_report energy fractions for equal singular values") {
    SubspacePartition part;
    part.strong = {0};
    part.weak = {1};
    part.noise = {2, 3};
    const std::vector<double> sigma{1.0, 1.0, 1.0, 1.0};
    const SpectralReport rep = spectral_report_from(sigma, part);
    CHECK(rep.strong_energy == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(rep.weak_energy == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(rep.noise_energy == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rep.strong_proportion == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("spectral_report cumulative curve with all energy in front") {
    SubspacePartition part;
    part.strong = {0};
    part.weak = {};
    part.noise = {1, 2};
    const std::vector<double> sigma{3.0, 0.0, 0.0};
    const SpectralReport rep = spectral_report_from(sigma, part);
    REQUIRE(rep.cumulative_energy.size() == 3);
    CHECK(rep.cumulative_energy[0] == 1.0);
    CHECK(rep.cumulative_energy[1] == 1.0);
    CHECK(rep.cumulative_energy[2] == 1.0);
}

TEST_CASE("planted task concentrates energy in the strong subspace") {
    Rng rng(39);
    const Matrix f = planted_matrix(rng, 100, 400, 5, 250.0);
    const SpectralDecomposition dec = svd(f);
    const SubspacePartition part = partition(dec, 100, 400);
    const SpectralReport rep = spectral_report(dec, part);
    CHECK(rep.strong_energy >= 0.85);
    CHECK(rep.strong_proportion <= 0.2);
}
