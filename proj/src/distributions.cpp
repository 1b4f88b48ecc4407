#include "mpsts/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mpsts/errors.hpp"
#include "mpsts/specfun.hpp"

namespace mpsts {

using specfun::ln_gamma;

void ModelParams::validate() const {
    if (!(mu0 > 0.0) || !std::isfinite(mu0)) throw DomainError("mu0 must be positive and finite");
    if (!(m > 0.0) || !std::isfinite(m)) throw DomainError("m must be positive");
    if (!(M >= m) || !std::isfinite(M)) throw DomainError("M must satisfy M >= m");
    if (K < 0) throw DomainError("K must be nonnegative");
}

void ModelParams::validate_integer() const {
    validate();
    if (m != std::floor(m) || M != std::floor(M)) throw DomainError("m and M must be integers here");
}

double Pmf::total() const {
    return std::accumulate(probabilities.begin(), probabilities.end(), 0.0);
}

double Pmf::mean() const {
    double s = 0.0;
    for (std::size_t n = 0; n < probabilities.size(); ++n) s += static_cast<double>(n) * probabilities[n];
    return s;
}

double Pmf::variance() const {
    const double mu = mean();
    double s = 0.0;
    for (std::size_t n = 0; n < probabilities.size(); ++n) {
        const double d = static_cast<double>(n) - mu;
        s += d * d * probabilities[n];
    }
    return s;
}

double ln_compound_poisson_pmf(int N, double mu0, double a) {
    if (N < 0) return -INFINITY;
    if (!(mu0 > 0.0) || !(a > 0.0)) throw DomainError("compound_poisson_pmf: mu0 and a must be positive");
    return ln_gamma(a + N) - ln_gamma(a) - ln_gamma(N + 1.0) + N * std::log(mu0) - (N + a) * std::log1p(mu0);
}

double compound_poisson_pmf(int N, double mu0, double a) {
    return std::exp(ln_compound_poisson_pmf(N, mu0, a));
}

double polya_pmf(int k, int m, int M, int K) {
    if (K < 0 || k < 0 || k > K) throw DomainError("polya_pmf: k must lie in 0..K");
    if (m < 1 || M < m) throw DomainError("polya_pmf: requires 1 <= m <= M");
    if (m == M) return k == K ? 1.0 : 0.0;
    using specfun::ln_binomial;
    const double ln_p = ln_binomial(m + k - 1.0, k) + ln_binomial(M - m + K - k - 1.0, K - k) -
                        ln_binomial(M + K - 1.0, K);
    return std::exp(ln_p);
}

namespace {

void check_pole_band(const ModelParams& p) {
    const double gap = p.M - p.m;
    if (gap >= kPoleSnap && gap < kPoleUnsafe)
        throw PoleError("M - m = " + std::to_string(gap) + " lies in the numerically unsafe band");
}

// Upper bound on the variance, used only to seed the truncation search.
double variance_guess(const ModelParams& p) {
    return p.mu0 * (p.m + p.K) * (1.0 + p.mu0) + p.mu0 * p.mu0 * p.K * p.K;
}

}  // namespace

void mpsts_pmf_into(const ModelParams& p, std::span<double> out) {
    p.validate();
    check_pole_band(p);
    const double ln_ratio = std::log(p.mu0) - std::log1p(p.mu0);

    if (p.M - p.m < kPoleSnap) {
        // m == M: no subtracted photon can fall outside the observed modes.
        const double a = p.M + p.K;
        double lp = -a * std::log1p(p.mu0);
        for (std::size_t n = 0; n < out.size(); ++n) {
            out[n] = std::exp(lp);
            lp += ln_ratio + std::log((a + n) / (n + 1.0));
        }
        return;
    }

    const double ln_const = -p.m * std::log1p(p.mu0) - ln_gamma(p.m) + ln_gamma(p.M) - ln_gamma(p.M - p.m) +
                            ln_gamma(p.M + p.K - p.m) - ln_gamma(p.M + p.K);
    const double c = -p.K - p.M + p.m + 1.0;
    const double x = 1.0 / (1.0 + p.mu0);
    // ln[Gamma(N+m) / Gamma(N+1)] advanced incrementally
    double ln_gamma_ratio = ln_gamma(p.m);
    for (std::size_t n = 0; n < out.size(); ++n) {
        const double nn = static_cast<double>(n);
        const double f = specfun::hyp2f1_terminating(p.K, nn + p.m, c, x);
        out[n] = std::exp(ln_const + nn * ln_ratio + ln_gamma_ratio) * f;
        ln_gamma_ratio += std::log1p((p.m - 1.0) / (nn + 1.0));
    }
}

int adaptive_n_max(const ModelParams& p, double tolerance) {
    p.validate();
    constexpr int kHardLimit = 1 << 22;
    int n0 = static_cast<int>(std::ceil(p.mean() + 20.0 * std::sqrt(variance_guess(p)))) + 1;
    for (int len = std::max(n0, 8); len <= kHardLimit; len *= 2) {
        std::vector<double> buf(static_cast<std::size_t>(len));
        mpsts_pmf_into(p, buf);
        double sum = 0.0;
        for (int n = 0; n < len; ++n) {
            sum += buf[static_cast<std::size_t>(n)];
            if (sum > 1.0 - tolerance) return n;
        }
    }
    throw ConvergenceError("adaptive_n_max: pmf mass did not converge");
}

Pmf mpsts_pmf(const ModelParams& params, std::optional<int> n_max) {
    const int last = n_max ? *n_max : adaptive_n_max(params);
    if (last < 0) throw DomainError("mpsts_pmf: n_max must be nonnegative");
    Pmf pmf;
    pmf.probabilities.resize(static_cast<std::size_t>(last) + 1);
    mpsts_pmf_into(params, pmf.probabilities);
    pmf.tail_bound = std::max(0.0, 1.0 - pmf.total());
    return pmf;
}

Pmf convolved_pmf(const ModelParams& params, int n_max) {
    params.validate_integer();
    if (n_max < 0) throw DomainError("convolved_pmf: n_max must be nonnegative");
    const int m = static_cast<int>(params.m);
    const int M = static_cast<int>(params.M);
    Pmf pmf;
    pmf.probabilities.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
    for (int k = 0; k <= params.K; ++k) {
        const double w = polya_pmf(k, m, M, params.K);
        if (w == 0.0) continue;
        for (int n = 0; n <= n_max; ++n)
            pmf.probabilities[static_cast<std::size_t>(n)] += w * compound_poisson_pmf(n, params.mu0, k + params.m);
    }
    pmf.tail_bound = std::max(0.0, 1.0 - pmf.total());
    return pmf;
}

double generating_function(const ModelParams& params, double z) {
    params.validate();
    if (!(z >= 0.0 && z <= 1.0)) throw DomainError("generating_function: z must lie in [0, 1]");
    const double g_be = 1.0 / (1.0 + params.mu0 * (1.0 - z));
    return std::pow(g_be, params.m) * specfun::hyp2f1_terminating(params.K, params.m, params.M, 1.0 - g_be);
}

void dark_count_convolve_into(std::span<double> probabilities, double mu_dc) {
    if (mu_dc < 0.0) throw DomainError("dark counts: mean must be nonnegative");
    if (mu_dc == 0.0 || probabilities.empty()) return;
    // Poisson weights until they stop contributing at double precision.
    std::vector<double> poisson;
    double w = std::exp(-mu_dc);
    for (std::size_t j = 0; j < probabilities.size(); ++j) {
        poisson.push_back(w);
        w *= mu_dc / static_cast<double>(j + 1);
        if (w < 1e-300) break;
    }
    for (std::size_t n = probabilities.size(); n-- > 0;) {
        double s = 0.0;
        const std::size_t jmax = std::min(n, poisson.size() - 1);
        for (std::size_t j = 0; j <= jmax; ++j) s += probabilities[n - j] * poisson[j];
        probabilities[n] = s;
    }
}

Pmf dark_count_convolve(const Pmf& pmf, const DarkCountConfig& config, double m) {
    if (config.mu_dc_per_mode < 0.0) throw DomainError("dark counts: mu_dc_per_mode must be nonnegative");
    const double mu_dc = config.mean_for(m);
    if (mu_dc == 0.0) return pmf;
    // Extend so the Poisson tail past the input support is not lost.
    std::size_t extra = 0;
    for (double tail = 1.0 - std::exp(-mu_dc), w = std::exp(-mu_dc); tail > 1e-16 && extra < 10000; ++extra) {
        w *= mu_dc / static_cast<double>(extra + 1);
        tail -= w;
    }
    Pmf out;
    out.probabilities = pmf.probabilities;
    out.probabilities.resize(pmf.probabilities.size() + extra, 0.0);
    dark_count_convolve_into(out.probabilities, mu_dc);
    out.tail_bound = std::max(pmf.tail_bound, 1.0 - out.total());
    return out;
}

double mu0_from_mean(double mu, double m, double M, int K) {
    if (!(m > 0.0) || !(M > 0.0)) throw DomainError("mu0_from_mean: m and M must be positive");
    return mu / (m * (1.0 + K / M));
}

QuadratureDensity::QuadratureDensity(const ModelParams& params) : params_(params) {
    params.validate();
    if (params.m != 1.0) throw PreconditionError("quadrature density requires m = 1");
    pmf_ = mpsts_pmf(params);
    if (pmf_.n_max() > specfun::kMaxHermiteIndex)
        throw DomainError("quadrature density: photocount support exceeds the Hermite basis limit");
}

double QuadratureDensity::operator()(double q) const {
    const int n_max = pmf_.n_max();
    thread_local std::vector<double> phi;
    phi.resize(static_cast<std::size_t>(n_max) + 1);
    specfun::hermite_phi_all(n_max, q, phi);
    double s = 0.0;
    for (int n = 0; n <= n_max; ++n) s += pmf_[static_cast<std::size_t>(n)] * phi[static_cast<std::size_t>(n)] * phi[static_cast<std::size_t>(n)];
    return s;
}

double QuadratureDensity::q_limit() const {
    return std::sqrt(2.0 * pmf_.n_max() + 1.0) + 6.0;
}

double QuadratureDensity::variance() const {
    return params_.mu0 * (1.0 + params_.K / params_.M) + 0.5;
}

double quadrature_pdf(const ModelParams& params, double q) {
    return QuadratureDensity(params)(q);
}

}  // namespace mpsts
