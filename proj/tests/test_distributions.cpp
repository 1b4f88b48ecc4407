#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mpsts/distributions.hpp"
#include "mpsts/errors.hpp"

using namespace mpsts;

namespace {

double trapezoid_moment(const QuadratureDensity& dens, int power) {
    const double lim = dens.q_limit();
    const double h = 0.01;
    const int steps = static_cast<int>(std::ceil(2.0 * lim / h));
    double s = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double q = -lim + i * (2.0 * lim / steps);
        const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
        s += w * std::pow(q, power) * dens(q);
    }
    return s * (2.0 * lim / steps);
}

}  // namespace

TEST_CASE("compound Poisson reference values") {
    CHECK(compound_poisson_pmf(0, 0.264, 1.0) == doctest::Approx(1.0 / 1.264).epsilon(1e-14));
    CHECK(compound_poisson_pmf(0, 0.264, 6.0) == doctest::Approx(std::pow(1.264, -6.0)).epsilon(1e-14));
    double mean = 0.0, total = 0.0;
    for (int n = 0; n <= 200; ++n) {
        const double p = compound_poisson_pmf(n, 0.264, 6.0);
        mean += n * p;
        total += p;
    }
    CHECK(std::abs(mean - 1.584) < 1e-8);
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("Polya distribution") {
    CHECK(polya_pmf(0, 2, 3, 0) == doctest::Approx(1.0));
    CHECK(polya_pmf(0, 1, 2, 1) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(polya_pmf(1, 1, 2, 1) == doctest::Approx(0.5).epsilon(1e-14));
    for (int k = 0; k <= 2; ++k) CHECK(polya_pmf(k, 1, 2, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(polya_pmf(3, 4, 4, 3) == 1.0);
    CHECK(polya_pmf(2, 4, 4, 3) == 0.0);
    for (int m = 1; m <= 4; ++m)
        for (int M = m; M <= 6; ++M)
            for (int K = 0; K <= 8; ++K) {
                double s = 0.0;
                for (int k = 0; k <= K; ++k) {
                    const double p = polya_pmf(k, m, M, K);
                    CHECK(p >= 0.0);
                    s += p;
                }
                CHECK(std::abs(s - 1.0) <= 1e-14);
            }
    CHECK_THROWS_AS(polya_pmf(4, 1, 2, 3), DomainError);
    CHECK_THROWS_AS(polya_pmf(-1, 1, 2, 3), DomainError);
}

TEST_CASE("mpsts_pmf reduces to compound Poisson at K=0") {
    for (double m : {1.0, 2.0, 2.5}) {
        const ModelParams p{0.752, m, 4.0, 0};
        const auto pmf = mpsts_pmf(p, 60);
        for (int n = 0; n <= 60; ++n)
            CHECK(std::abs(pmf[static_cast<std::size_t>(n)] - compound_poisson_pmf(n, 0.752, m)) <= 1e-12);
    }
}

TEST_CASE("mpsts_pmf matches the Polya convolution at the working point") {
    const ModelParams p{0.264, 2, 3, 3};
    const auto closed = mpsts_pmf(p, 200);
    const auto mixed = convolved_pmf(p, 200);
    for (int n = 0; n <= 200; ++n)
        CHECK(std::abs(closed[static_cast<std::size_t>(n)] - mixed[static_cast<std::size_t>(n)]) <= 1e-10);
    CHECK(std::abs(mpsts_pmf(p).mean() - 1.056) <= 1e-6);
}

TEST_CASE("convolved_pmf limiting cases") {
    const ModelParams k0{0.752, 2, 4, 0};
    const auto a = convolved_pmf(k0, 50);
    for (int n = 0; n <= 50; ++n) CHECK(a[static_cast<std::size_t>(n)] == doctest::Approx(compound_poisson_pmf(n, 0.752, 2)).epsilon(1e-13));
    const ModelParams full{0.752, 3, 3, 2};
    const auto b = convolved_pmf(full, 50);
    for (int n = 0; n <= 50; ++n) CHECK(b[static_cast<std::size_t>(n)] == doctest::Approx(compound_poisson_pmf(n, 0.752, 5)).epsilon(1e-13));
    const ModelParams q{0.752, 1, 5, 4};
    const auto c = convolved_pmf(q, 200);
    const auto d = mpsts_pmf(q, 200);
    for (int n = 0; n <= 200; ++n) CHECK(std::abs(c[static_cast<std::size_t>(n)] - d[static_cast<std::size_t>(n)]) <= 1e-10);
}

TEST_CASE("mpsts_pmf m == M snaps to the all-mode law") {
    const ModelParams p{0.5, 3.0, 3.0 + 5e-7, 2};
    const auto pmf = mpsts_pmf(p, 40);
    for (int n = 0; n <= 40; ++n) CHECK(pmf[static_cast<std::size_t>(n)] == doctest::Approx(compound_poisson_pmf(n, 0.5, 5.0 + 5e-7)).epsilon(1e-12));
    CHECK_THROWS_AS(mpsts_pmf(ModelParams{0.5, 3.0, 3.0005, 2}), PoleError);
    CHECK_NOTHROW(mpsts_pmf(ModelParams{0.5, 3.0, 3.002, 2}));
}

TEST_CASE("adaptive truncation keeps the tail below tolerance") {
    for (const ModelParams& p : {ModelParams{0.264, 2, 3, 3}, ModelParams{2.0, 3, 5, 5}, ModelParams{0.1, 1, 1, 0},
                                 ModelParams{0.752, 1.3, 4.7, 4}}) {
        const auto pmf = mpsts_pmf(p);
        CHECK(pmf.tail_bound <= 1e-10);
        CHECK(std::abs(pmf.total() + pmf.tail_bound - 1.0) <= 1e-9);
        double prefix = 0.0;
        for (int n = 0; n < pmf.n_max(); ++n) prefix += pmf[static_cast<std::size_t>(n)];
        CHECK(prefix <= 1.0 - 1e-10);  // smallest such N_max
        for (double v : pmf.probabilities) CHECK(v >= 0.0);
    }
}

TEST_CASE("generating function") {
    const ModelParams p{0.264, 2, 3, 3};
    const auto pmf = mpsts_pmf(p);
    CHECK(std::abs(generating_function(p, 1.0) - 1.0) <= 1e-12);
    CHECK(std::abs(generating_function(p, 0.0) - pmf[0]) <= 1e-10);
    double series = 0.0;
    for (int n = 0; n <= pmf.n_max(); ++n) series += pmf[static_cast<std::size_t>(n)] * std::pow(0.7, n);
    CHECK(std::abs(generating_function(p, 0.7) - series) <= 1e-8);
    CHECK_THROWS_AS(generating_function(p, 1.5), DomainError);
}

TEST_CASE("dark-count convolution") {
    const ModelParams p{0.264, 2, 3, 3};
    const auto pmf = mpsts_pmf(p);
    const auto same = dark_count_convolve(pmf, DarkCountConfig::none(), 2.0);
    CHECK(same.probabilities == pmf.probabilities);

    const auto noisy = dark_count_convolve(pmf, DarkCountConfig{0.0015}, 2.0);
    CHECK(std::abs(noisy.mean() - (pmf.mean() + 0.003)) <= 1e-9);
    CHECK(std::abs(noisy[0] - pmf[0] * std::exp(-0.003)) <= 1e-12);
    CHECK(std::abs(noisy.total() + noisy.tail_bound - 1.0) <= 1e-9);
}

TEST_CASE("mu0_from_mean") {
    CHECK(mu0_from_mean(1.2, 3.0, 5.0, 0) == doctest::Approx(0.4));
    CHECK(mu0_from_mean(1.8, 1, 5, 4) == doctest::Approx(1.0));
    CHECK(mu0_from_mean(1.3536, 1, 5, 4) == doctest::Approx(0.752).epsilon(1e-12));
}

TEST_CASE("quadrature density") {
    const ModelParams p{0.752, 1, 5, 4};
    const QuadratureDensity dens(p);
    CHECK(std::abs(trapezoid_moment(dens, 0) - 1.0) <= 1e-8);
    CHECK(std::abs(trapezoid_moment(dens, 2) - 1.8536) <= 1e-6);
    CHECK(dens.variance() == doctest::Approx(1.8536));
    for (double q : {0.1, 0.7, 1.9, 3.3, 6.0}) CHECK(dens(q) == dens(-q));

    const QuadratureDensity vacuum(ModelParams{1e-9, 1, 2, 1});
    const double phi0 = std::pow(std::numbers::pi, -0.5);
    for (double q : {0.0, 0.5, 2.0}) CHECK(vacuum(q) == doctest::Approx(phi0 * std::exp(-q * q)).epsilon(1e-8));
    CHECK(std::abs(trapezoid_moment(vacuum, 2) - 0.5) <= 1e-8);

    CHECK_THROWS_AS(quadrature_pdf(ModelParams{0.5, 2, 3, 1}, 0.0), PreconditionError);
}
