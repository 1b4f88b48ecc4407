// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "mpsts/distributions.hpp"
#include "mpsts/estimation.hpp"
#include "mpsts/pipeline.hpp"
#include "mpsts/sample_size.hpp"
#include "mpsts/sampling.hpp"
#include "mpsts/specfun.hpp"
#include "stats_support.hpp"

using namespace mpsts;

namespace {

const ModelParams kWorking{0.264, 2.0, 3.0, 3};
const ModelParams kQuadrature{0.752, 1.0, 5.0, 4};
constexpr std::int64_t kWorkingN = 58623;
constexpr std::int64_t kQuadratureN = 138710;
constexpr int kSeeds = 10;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// mu0, integer m <= M <= 5, K <= 5
void for_each_grid_point(const std::function<void(const ModelParams&)>& body) {
    for (double mu0 : {0.1, 0.264, 0.752, 2.0})
        for (int m = 1; m <= 3; ++m)
            for (int M = m; M <= 5; ++M)
                for (int K = 0; K <= 5; ++K) body(ModelParams{mu0, double(m), double(M), K});
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

Outcome model_equivalence() {
    double worst = 0.0;
    for_each_grid_point([&](const ModelParams& p) {
        const auto closed = mpsts_pmf(p, 200);
        const auto conv = convolved_pmf(p, 200);
        for (int n = 0; n <= 200; ++n) worst = std::max(worst, std::abs(closed.at_or_zero(n) - conv.at_or_zero(n)));
    });
    return {worst <= 1e-10, fmt("max |convolution - closed form| = %.3g (tol 1e-10)", worst)};
}

Outcome generating_function_consistency() {
    double worst = 0.0;
    for_each_grid_point([&](const ModelParams& p) {
        const auto pmf = mpsts_pmf(p);
        for (double z : {0.0, 0.3, 0.7, 0.9, 1.0}) {
            double series = 0.0, zn = 1.0;
            for (std::size_t n = 0; n < pmf.size(); ++n, zn *= z) series += pmf[n] * zn;
            worst = std::max(worst, std::abs(generating_function(p, z) - series));
        }
    });
    return {worst <= 1e-8, fmt("max |G(z) - sum P(N) z^N| = %.3g (tol 1e-8)", worst)};
}

Outcome physical_oracle() {
    const std::vector<ModelParams> points = {
        kWorking, {0.1, 1, 3, 2}, {0.752, 1, 5, 4}, {2.0, 2, 2, 1}, {0.264, 3, 5, 5}, {1.0, 1, 4, 0}};
    double worst = 1.0;
    std::string per;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto& p = points[i];
        const auto run = physical_subtraction_oracle(p.mu0, int(p.m), int(p.M), p.K, 1000000, {31, i});
        const double pv = testing::chi_square_gof(run.histogram, mpsts_pmf(p).probabilities).p_value;
        worst = std::min(worst, pv);
        per += fmt(" %.3g", pv);
    }
    return {worst > 1e-3, fmt("6 points, n=1e6 each, p-values%s (need > 1e-3)", per.c_str())};
}

Outcome fisher_conditioning() {
    const DarkCountConfig dark;
    const auto info = fisher_information(kWorking, kWorkingN, dark);
    const double c_fisher = condition_number(info);
    const auto data = sample_photocounts(kWorking, kWorkingN, {1, 0}, dark);
    const auto prior = build_prior(data, kWorking, dark);
    const double c_post = condition_number(posterior_information(info, prior));
    const bool ok = c_fisher >= 2e6 && c_fisher <= 2e7 && c_post >= 300 && c_post <= 1500;
    return {ok, fmt("cond(I) = %.4g in [2e6, 2e7], cond(I_B) = %.4g in [300, 1500]", c_fisher, c_post)};
}

Outcome bayesian_column() {
    const BayesianDeltaOptions opts{kSeeds, 1, 61, DarkCountConfig{}};
    const double large = bayesian_median_delta(kWorking, 58000, opts);
    const double small = bayesian_median_delta(kWorking, 800, opts);
    return {large <= 0.015 && small <= 0.15,
            fmt("median delta %.4g%% at n=5.8e4 (<= 1.5%%), %.4g%% at n=800 (<= 15%%)", 100 * large, 100 * small)};
}

Outcome analytic_columns() {
    const DarkCountConfig dark;
    const KMixture fixed_m(kWorking, free_parameters(SampleSizeMethod::fixed_m), dark, 10);
    const KMixture no_prior(kWorking, free_parameters(SampleSizeMethod::no_prior), dark, 10);
    const double n_fixed = fixed_m.sample_size(0.10), n_none = no_prior.sample_size(0.10);
    const double r_fixed = n_fixed / 1.2e6, r_none = n_none / 18e6;
    const auto within = [](double r) { return r >= 1.0 / 3.0 && r <= 3.0; };
    return {within(r_fixed) && within(r_none),
            fmt("n(10%%): fixed m %.3g (x%.2f of 1.2e6), no prior %.3g (x%.2f of 1.8e7), factor 3 allowed", n_fixed,
                r_fixed, n_none, r_none)};
}

Outcome photocount_recovery() {
    const DarkCountConfig dark;
    int good = 0;
    std::array<double, 3> sums{};
    for (int s = 1; s <= kSeeds; ++s) {
        const auto data = sample_photocounts(kWorking, kWorkingN, {std::uint64_t(s), 0}, dark);
        const auto fit = bayesian_fit(data, kWorking, dark);
        bool ok = true;
        for (std::size_t i = 0; i < 3; ++i) {
            const Param p = kContinuousParams[i];
            ok = ok && std::abs(fit.summary[p].mean - get_param(kWorking, p)) <= 3.0 * fit.summary[p].sd;
            sums[i] += fit.summary[p].mean / kSeeds;
        }
        good += ok;
    }
    return {good >= 9, fmt("%d/10 seeds within 3 sigma (need 9); mean estimates m %.3f M %.3f mu0 %.4f", good,
                           sums[0], sums[1], sums[2])};
}

Outcome quadrature_recovery() {
    int good = 0;
    std::vector<double> s_mu0, s_M;
    for (int s = 1; s <= kSeeds; ++s) {
        const auto data = sample_quadratures(kQuadrature, kQuadratureN, {std::uint64_t(s), 0});
        const auto fit = quadrature_posterior(data, kQuadrature);
        good += std::abs(fit.summary.mu0.mean - kQuadrature.mu0) <= 3.0 * fit.summary.mu0.sd &&
                std::abs(fit.summary.M.mean - kQuadrature.M) <= 3.0 * fit.summary.M.sd;
        s_mu0.push_back(fit.prior.mu0.sigma);
        s_M.push_back(fit.prior.M.sigma);
    }
    const double r_mu0 = median(s_mu0) / 0.006, r_M = median(s_M) / 0.096;
    const auto within = [](double r) { return r >= 1.0 / 1.5 && r <= 1.5; };
    return {good == kSeeds && within(r_mu0) && within(r_M),
            fmt("%d/10 seeds within 3 sigma (need 10); median prior sigma mu0 %.3g (x%.2f of 0.006), "
                "M %.3g (x%.2f of 0.096), factor 1.5 allowed",
                good, median(s_mu0), r_mu0, median(s_M), r_M)};
}

double quadrature_variance(const QuadratureDensity& dens) {
    const double lim = dens.q_limit();
    const int steps = int(std::ceil(2.0 * lim / 0.01));
    const double h = 2.0 * lim / steps;
    double second = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double q = -lim + i * h;
        const double w = (i == 0 || i == steps) ? 0.5 * h : h;
        second += w * q * q * dens(q);
    }
    return second;
}

Outcome quadrature_basis() {
    constexpr int kN = 50;
    constexpr double h = 0.005;
    std::vector<double> gram((kN + 1) * (kN + 1), 0.0), phi(kN + 1);
    const int steps = int(80.0 / h);
    for (int i = 0; i <= steps; ++i) {
        specfun::hermite_phi_all(kN, -40.0 + i * h, phi);
        const double w = (i == 0 || i == steps) ? 0.5 * h : h;
        for (int a = 0; a <= kN; ++a)
            for (int b = a; b <= kN; ++b) gram[a * (kN + 1) + b] += w * phi[a] * phi[b];
    }
    double ortho = 0.0;
    for (int a = 0; a <= kN; ++a)
        for (int b = a; b <= kN; ++b) ortho = std::max(ortho, std::abs(gram[a * (kN + 1) + b] - (a == b)));

    double var = 0.0;
    for (double mu0 : {0.1, 0.264, 0.752, 2.0})
        for (int M = 1; M <= 5; ++M)
            for (int K = 0; K <= 5; ++K) {
                const ModelParams p{mu0, 1.0, double(M), K};
                const double expected = mu0 * (1.0 + double(K) / M) + 0.5;
                var = std::max(var, std::abs(quadrature_variance(QuadratureDensity(p)) - expected));
            }
    return {ortho <= 1e-8 && var <= 1e-6,
            fmt("orthonormality N<=50 err %.3g (tol 1e-8), variance identity err %.3g (tol 1e-6)", ortho, var)};
}

Outcome pipeline_exactness() {
    std::vector<BinRecord> bins;
    int i = 0;
    for (int k : {1, 0, 2, 0, 0, 0}) bins.push_back(BinRecord{k, i++, std::nullopt, false});
    const auto groups = group_and_select(bins, 3, 2);
    std::vector<int> keys;
    for (const auto& [K, g] : groups) keys.push_back(K);
    bool ok = keys == std::vector<int>{0, 3} && groups.at(3).groups == 1 && groups.at(0).groups == 1 &&
              groups.at(3).photocounts.count(0 + 1) == 1 && groups.at(0).photocounts.count(3 + 4) == 1;

    PipelineConfig cfg;
    cfg.tau = 10e-6;
    cfg.period = 480e-6;
    const std::size_t total = 48 * 2000;
    const std::size_t kept = thin_bins(std::vector<BinRecord>(total), cfg).size();
    ok = ok && kept * 48 == total;
    return {ok, fmt("6-bin fixture gives %zu groups keyed K = {3, 0} %s, thinning kept %zu of %zu bins", keys.size(),
                    ok ? "as expected" : "NOT matched", kept, total)};
}

Outcome property_suites() {
    double norm = 0.0, mean = 0.0;
    for_each_grid_point([&](const ModelParams& p) {
        const auto pmf = mpsts_pmf(p);
        norm = std::max(norm, std::abs(pmf.total() - 1.0) - pmf.tail_bound);
        mean = std::max(mean, std::abs(pmf.mean() - p.mean()));
    });

    double dark = 0.0;
    for (const ModelParams& p : {kWorking, kQuadrature, ModelParams{2.0, 3, 5, 5}}) {
        const auto pmf = mpsts_pmf(p);
        const auto noisy = dark_count_convolve(pmf, DarkCountConfig{}, p.m);
        dark = std::max(dark, std::abs(noisy.mean() - pmf.mean() - DarkCountConfig{}.mean_for(p.m)));
        dark = std::max(dark, std::abs(noisy.total() + noisy.tail_bound - 1.0));
    }

    const auto data = sample_photocounts(kWorking, 4000, {9, 0});
    const GridAxes axes{GridAxes::linspace(0.214, 0.314, 9), GridAxes::linspace(1.7, 2.3, 9),
                        GridAxes::linspace(2.2, 3.8, 9), {3}};
    const auto fid = fiducial_grid(data, axes, {});
    bool argmax = true;
    for (std::int64_t k : {2, 7, 100}) argmax = argmax && fiducial_grid(data.scaled(k), axes, {}).argmax() == fid.argmax();

    PriorSpec flat;
    flat.K_fixed = 3;
    const auto post = posterior_grid(data, flat, axes, {});
    const double peak = *std::max_element(fid.density().begin(), fid.density().end());
    double flat_err = 0.0;
    for (std::size_t j = 0; j < fid.density().size(); ++j)
        flat_err = std::max(flat_err, std::abs(post.density()[j] - fid.density()[j]) / peak);

    double richardson = 0.0;
    for (const ModelParams& p : {kWorking, kQuadrature, ModelParams{0.1, 1, 2, 0}, ModelParams{2.0, 2.5, 4.0, 5},
                                 ModelParams{0.264, 1.3, 3.7, 2}})
        for (const auto& dc : {DarkCountConfig{}, DarkCountConfig::none()}) {
            const int n_max = adaptive_n_max(p) + 4;
            const auto g1 = pmf_gradient(p, dc, n_max, 1.0);
            const auto g2 = pmf_gradient(p, dc, n_max, 0.5);
            for (int u = 0; u < 3; ++u) {
                double scale = 0.0, diff = 0.0;
                for (std::size_t n = 0; n < g1[u].size(); ++n) {
                    scale = std::max(scale, std::abs(g2[u][n]));
                    diff = std::max(diff, std::abs(g1[u][n] - g2[u][n]));
                }
                richardson = std::max(richardson, diff / scale);
            }
        }

    const bool ok =
        norm <= 1e-9 && mean <= 1e-6 && dark <= 1e-9 && argmax && flat_err <= 1e-9 && richardson <= 1e-4;
    return {ok, fmt("normalization %.2g, mean %.2g, dark shift %.2g, argmax %s, flat prior %.2g, Richardson %.2g",
                    norm, mean, dark, argmax ? "stable" : "moved", flat_err, richardson)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"model equivalence", model_equivalence},
        {"generating function", generating_function_consistency},
        {"physical oracle", physical_oracle},
        {"Fisher conditioning", fisher_conditioning},
        {"Bayesian sample-size column", bayesian_column},
        {"analytic sample-size columns", analytic_columns},
        {"photocount posterior recovery", photocount_recovery},
        {"quadrature posterior recovery", quadrature_recovery},
        {"quadrature basis", quadrature_basis},
        {"pipeline exactness", pipeline_exactness},
        {"property suites", property_suites},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %2zu %s  %s: %s [%.1f s]\n", i + 1, r.pass ? "PASS" : "FAIL", criteria[i].first,
                    r.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !r.pass;
    }
    std::printf("%d of %zu criteria failed\n", failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
