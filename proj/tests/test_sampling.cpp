#include <cmath>

#include "doctest.h"
#include "mpsts/errors.hpp"
#include "mpsts/sampling.hpp"
#include "stats_support.hpp"

using namespace mpsts;
using mpsts::testing::chi_square_gof;
using mpsts::testing::chi_square_two_sample;

TEST_CASE("Rng substreams are reproducible and distinct") {
    Rng a({7, 3}, 11), b({7, 3}, 11), c({7, 3}, 12), d({7, 4}, 11);
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
    for (int i = 0; i < 1000; ++i) {
        const double u = a.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("Rng Poisson and geometric moments") {
    Rng rng({1, 1});
    for (double mean : {0.3, 4.0, 45.0}) {
        double s = 0.0, s2 = 0.0;
        constexpr int n = 200000;
        for (int i = 0; i < n; ++i) {
            const double k = rng.poisson(mean);
            s += k;
            s2 += k * k;
        }
        const double mu = s / n, var = s2 / n - mu * mu;
        CHECK(std::abs(mu - mean) < 4.0 * std::sqrt(mean / n));
        CHECK(std::abs(var / mean - 1.0) < 0.03);
    }
    CountHistogram geo;
    for (int i = 0; i < 200000; ++i) geo.add(rng.geometric(0.752));
    std::vector<double> be;
    for (int k = 0; k < 80; ++k) be.push_back(compound_poisson_pmf(k, 0.752, 1.0));
    CHECK(chi_square_gof(geo, be).p_value > 1e-3);
}

TEST_CASE("sample_photocounts") {
    const ModelParams p{0.264, 2, 3, 3};
    const auto one = sample_photocounts(p, 1, {5, 0});
    CHECK(one.total() == 1);

    const auto big = sample_photocounts(p, 1000000, {2024, 1});
    CHECK(big.total() == 1000000);
    const auto pmf = mpsts_pmf(p);
    CHECK(std::abs(big.mean() - 1.056) < 3.0 * std::sqrt(pmf.variance() / 1e6));
    CHECK(chi_square_gof(big, pmf.probabilities).p_value > 1e-3);

    CHECK(sample_photocounts(p, 5000, {9, 9}) == sample_photocounts(p, 5000, {9, 9}));
    CHECK_FALSE(sample_photocounts(p, 5000, {9, 9}) == sample_photocounts(p, 5000, {9, 10}));
    CHECK_THROWS_AS(sample_photocounts(p, 0, {1, 1}), DomainError);
}

TEST_CASE("sample_photocounts with dark counts follows the convolved pmf") {
    const ModelParams p{0.264, 2, 3, 3};
    const auto h = sample_photocounts(p, 400000, {31, 0}, DarkCountConfig{});
    const auto pmf = dark_count_convolve(mpsts_pmf(p), DarkCountConfig{}, 2.0);
    CHECK(chi_square_gof(h, pmf.probabilities).p_value > 1e-3);
}

TEST_CASE("sample_quadratures") {
    const auto vac = sample_quadratures(ModelParams{1e-9, 1, 2, 1}, 100000, {3, 0});
    CHECK(std::abs(vac.variance() - 0.5) < 3.0 * 0.5 * std::sqrt(2.0 / 1e5));

    const ModelParams p{0.752, 1, 5, 4};
    const auto s = sample_quadratures(p, 138710, {4, 0});
    CHECK(s.size() == 138710);
    // Var of the sample variance needs the fourth moment: use the pmf's
    // Fock-state moments E[Q^4|N] = 3(2N^2 + 2N + 1)/4.
    const auto pmf = mpsts_pmf(p);
    double m4 = 0.0;
    for (int n = 0; n <= pmf.n_max(); ++n) m4 += pmf[static_cast<std::size_t>(n)] * 0.75 * (2.0 * n * n + 2.0 * n + 1.0);
    const double var = 1.8536;
    const double se = std::sqrt((m4 - var * var) / 138710.0);
    CHECK(std::abs(s.variance() - var) < 3.0 * se);
    CHECK(sample_quadratures(p, 1000, {8, 2}) == sample_quadratures(p, 1000, {8, 2}));
    CHECK_THROWS_AS(sample_quadratures(ModelParams{0.5, 2, 3, 1}, 10, {1, 1}), PreconditionError);
}

TEST_CASE("Fock quadrature sampler reproduces |phi_N|^2 moments") {
    for (int N : {0, 1, 5, 30}) {
        Rng rng({77, static_cast<std::uint64_t>(N)});
        double s2 = 0.0;
        constexpr int n = 100000;
        for (int i = 0; i < n; ++i) {
            const double q = sample_fock_quadrature(N, rng.uniform());
            s2 += q * q;
        }
        const double want = N + 0.5;
        const double m4 = 0.75 * (2.0 * N * N + 2.0 * N + 1.0);
        CHECK(std::abs(s2 / n - want) < 4.0 * std::sqrt((m4 - want * want) / n));
    }
}

TEST_CASE("physical subtraction oracle") {
    const auto thermal = physical_subtraction_oracle(0.264, 2, 3, 0, 1000000, {11, 0});
    std::vector<double> nb;
    for (int k = 0; k < 60; ++k) nb.push_back(compound_poisson_pmf(k, 0.264, 2.0));
    CHECK(thermal.acceptance_rate() == 1.0);
    CHECK(chi_square_gof(thermal.histogram, nb).p_value > 1e-3);

    const auto work = physical_subtraction_oracle(0.264, 2, 3, 3, 1000000, {12, 0});
    CHECK(work.histogram.total() == 1000000);
    CHECK(work.acceptance_rate() > 0.0);
    CHECK(chi_square_gof(work.histogram, mpsts_pmf(ModelParams{0.264, 2, 3, 3}).probabilities).p_value > 1e-3);

    const auto single = physical_subtraction_oracle(1.0, 1, 1, 1, 1000000, {13, 0});
    std::vector<double> a2;
    for (int k = 0; k < 80; ++k) a2.push_back(compound_poisson_pmf(k, 1.0, 2.0));
    CHECK(chi_square_gof(single.histogram, a2).p_value > 1e-3);

    const auto sampled = sample_photocounts(ModelParams{0.264, 2, 3, 3}, 1000000, {14, 0});
    CHECK(chi_square_two_sample(work.histogram, sampled).p_value > 1e-3);

    CHECK(physical_subtraction_oracle(0.5, 1, 3, 2, 2000, {1, 2}).histogram ==
          physical_subtraction_oracle(0.5, 1, 3, 2, 2000, {1, 2}).histogram);
}

TEST_CASE("synthesize_trace") {
    TraceSynthesisConfig cfg;
    cfg.duration = 0.0;
    CHECK_THROWS_AS(synthesize_trace(cfg, {1, 1}), DomainError);
    cfg.duration = 1.0;
    cfg.tap_ratio = 1.0;
    CHECK_THROWS_AS(synthesize_trace(cfg, {1, 1}), DomainError);

    cfg = TraceSynthesisConfig{};
    cfg.duration = cfg.bin_width;
    const auto one = synthesize_trace(cfg, {1, 1});
    CHECK(one.hd_samples.size() == 1);

    cfg.duration = 2.0;
    const auto trace = synthesize_trace(cfg, {5, 5});
    CHECK_NOTHROW(trace.validate());
    CHECK(trace == synthesize_trace(cfg, {5, 5}));
    // Thermal clicks are overdispersed: the standard error of the per-bin
    // mean uses var = mu + mu^2 with correlation over ~t_coh/bin slots.
    const double bins = cfg.duration / cfg.bin_width;
    const double mean = static_cast<double>(trace.dn_click_times.size()) / bins;
    const double corr_len = 2.0 * cfg.t_coh / cfg.bin_width;
    const double se = std::sqrt((cfg.mu0 + cfg.mu0 * cfg.mu0) * (1.0 + corr_len) / bins);
    CHECK(std::abs(mean - cfg.mu0) < 3.0 * se);
}
