#include "mpsts/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>

#include "mpsts/errors.hpp"
#include "mpsts/parallel.hpp"
#include "mpsts/specfun.hpp"

namespace mpsts {

namespace {

constexpr std::size_t kChunk = 1 << 14;

std::vector<double> cumulative(const std::vector<double>& p) {
    std::vector<double> cdf(p.size());
    std::partial_sum(p.begin(), p.end(), cdf.begin());
    const double total = cdf.back();
    for (auto& c : cdf) c /= total;
    cdf.back() = 1.0;
    return cdf;
}

int invert(const std::vector<double>& cdf, double u) {
    return static_cast<int>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

// Per-thread-chunk histograms merged in index order.
template <class Draw>
CountHistogram histogram_of(std::int64_t n, Draw draw) {
    const auto count = static_cast<std::size_t>(n);
    const std::size_t chunks = (count + kChunk - 1) / kChunk;
    std::vector<CountHistogram> partial(chunks);
    parallel_for(count, kChunk, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) partial[i / kChunk].add(draw(i));
    });
    CountHistogram out;
    for (const auto& h : partial)
        for (std::size_t v = 0; v < h.counts().size(); ++v)
            if (h.counts()[v] != 0) out.add(static_cast<int>(v), h.counts()[v]);
    return out;
}

void require_positive_n(std::int64_t n) {
    if (n < 1) throw DomainError("sample size must be at least 1");
}

// Inverse CDF of |phi_N(Q)|^2 tabulated on 4096 points over
// +-(sqrt(2N+1) + 6), built once per N.
class FockQuadratureTable {
public:
    static constexpr int kPoints = 4096;

    explicit FockQuadratureTable(int N) {
        half_width_ = std::sqrt(2.0 * N + 1.0) + 6.0;
        step_ = 2.0 * half_width_ / (kPoints - 1);
        std::vector<double> density(kPoints);
        std::vector<double> phi(static_cast<std::size_t>(N) + 1);
        for (int i = 0; i < kPoints; ++i) {
            specfun::hermite_phi_all(N, -half_width_ + i * step_, phi);
            density[static_cast<std::size_t>(i)] = phi.back() * phi.back();
        }
        cdf_.assign(kPoints, 0.0);
        for (int i = 1; i < kPoints; ++i)
            cdf_[static_cast<std::size_t>(i)] =
                cdf_[static_cast<std::size_t>(i - 1)] + 0.5 * step_ * (density[static_cast<std::size_t>(i - 1)] + density[static_cast<std::size_t>(i)]);
        const double total = cdf_.back();
        for (auto& c : cdf_) c /= total;
    }

    double sample(double u) const {
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.begin()) return -half_width_;
        if (it == cdf_.end()) return half_width_;
        const auto i = static_cast<std::size_t>(it - cdf_.begin());
        const double lo = cdf_[i - 1], hi = cdf_[i];
        const double frac = hi > lo ? (u - lo) / (hi - lo) : 0.5;
        return -half_width_ + (static_cast<double>(i - 1) + frac) * step_;
    }

private:
    double half_width_ = 0.0;
    double step_ = 0.0;
    std::vector<double> cdf_;
};

const FockQuadratureTable& fock_table(int N) {
    static std::array<std::once_flag, specfun::kMaxHermiteIndex + 1> flags;
    static std::array<std::unique_ptr<FockQuadratureTable>, specfun::kMaxHermiteIndex + 1> tables;
    if (N < 0 || N > specfun::kMaxHermiteIndex) throw DomainError("Fock quadrature table: index out of range");
    const auto i = static_cast<std::size_t>(N);
    std::call_once(flags[i], [&] { tables[i] = std::make_unique<FockQuadratureTable>(N); });
    return *tables[i];
}

}  // namespace

CountHistogram sample_photocounts(const ModelParams& params, std::int64_t n, const SeededStream& stream,
                                  const DarkCountConfig& dark) {
    require_positive_n(n);
    auto pmf = mpsts_pmf(params);
    if (dark.enabled()) pmf = dark_count_convolve(pmf, dark, params.m);
    const auto cdf = cumulative(pmf.probabilities);
    return histogram_of(n, [&](std::size_t i) {
        Rng rng(stream, i);
        return invert(cdf, rng.uniform());
    });
}

double sample_fock_quadrature(int N, double u) {
    return fock_table(N).sample(u);
}

QuadratureSample sample_quadratures(const ModelParams& params, std::int64_t n, const SeededStream& stream) {
    require_positive_n(n);
    params.validate();
    if (params.m != 1.0) throw PreconditionError("quadrature sampling requires m = 1");
    const auto pmf = mpsts_pmf(params);
    if (pmf.n_max() > specfun::kMaxHermiteIndex) throw DomainError("quadrature sampling: photocount support too wide");
    const auto cdf = cumulative(pmf.probabilities);
    QuadratureSample out;
    out.values.resize(static_cast<std::size_t>(n));
    parallel_for(out.values.size(), kChunk, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(stream, i);
            const int N = invert(cdf, rng.uniform());
            out.values[i] = sample_fock_quadrature(N, rng.uniform());
        }
    });
    return out;
}

OracleResult physical_subtraction_oracle(double mu0, int m, int M, int K, std::int64_t n, const SeededStream& stream) {
    require_positive_n(n);
    if (!(mu0 > 0.0)) throw DomainError("oracle: mu0 must be positive");
    if (m < 1 || M < m || K < 0) throw DomainError("oracle: requires 1 <= m <= M and K >= 0");

    // Occupations are proposed from geometric modes with a raised mean mu1;
    // the photon-number weight S(S-1)...(S-K+1) of K annihilations combined
    // with the likelihood ratio rho^S, rho = q0/q1, is accepted against its
    // exact maximum over S.
    const double mu1 = std::max(mu0, (K + mu0 * (M + K)) / M);
    const double log_rho = (std::log(mu0) - std::log1p(mu0)) - (std::log(mu1) - std::log1p(mu1));
    auto log_weight = [&](int S) -> double {
        if (S < K) return -std::numeric_limits<double>::infinity();
        double w = S * log_rho;
        for (int i = 0; i < K; ++i) w += std::log(static_cast<double>(S - i));
        return w;
    };
    double log_wmax = log_weight(K);
    for (int S = K + 1;; ++S) {
        const double w = log_weight(S);
        if (w < log_wmax) break;
        log_wmax = w;
    }

    const auto count = static_cast<std::size_t>(n);
    std::vector<std::int64_t> attempts(count, 0);
    auto draw = [&](std::size_t i) {
        Rng rng(stream, i);
        std::vector<int> occ(static_cast<std::size_t>(M));
        for (;;) {
            ++attempts[i];
            int S = 0;
            for (auto& o : occ) {
                o = rng.geometric(mu1);
                S += o;
            }
            if (S < K) continue;
            if (rng.uniform() >= std::exp(log_weight(S) - log_wmax)) continue;
            // K sequential annihilations, mode i chosen with probability n_i / sum n.
            for (int s = 0; s < K; ++s, --S) {
                int r = static_cast<int>(rng.uniform() * S);
                std::size_t mode = 0;
                while (r >= occ[mode]) r -= occ[mode++];
                --occ[mode];
            }
            return std::accumulate(occ.begin(), occ.begin() + m, 0);
        }
    };
    OracleResult result;
    result.histogram = histogram_of(n, draw);
    result.attempts = std::accumulate(attempts.begin(), attempts.end(), std::int64_t{0});
    return result;
}

void TraceSynthesisConfig::validate() const {
    if (!(duration > 0.0)) throw DomainError("trace synthesis: duration must be positive");
    if (!(tap_ratio > 0.0 && tap_ratio < 1.0)) throw DomainError("trace synthesis: tap ratio must lie in (0, 1)");
    if (!(mu0 > 0.0)) throw DomainError("trace synthesis: mu0 must be positive");
    if (!(t_coh > 0.0) || !(bin_width > 0.0)) throw DomainError("trace synthesis: times must be positive");
}

TimeTrace synthesize_trace(const TraceSynthesisConfig& config, const SeededStream& stream) {
    config.validate();
    Rng rng(stream, 0);
    const auto slots = static_cast<std::int64_t>(std::ceil(config.duration / config.bin_width - 1e-9));
    const double intensity = config.source_mean();
    const double rho = std::exp(-config.bin_width / config.t_coh);
    const double innovation = std::sqrt(1.0 - rho * rho);
    const double arm = 0.5 * (1.0 - config.tap_ratio);
    const double component_sd = std::sqrt(0.5 * intensity);

    TimeTrace trace;
    trace.duration = config.duration;
    double re = component_sd * rng.normal();
    double im = component_sd * rng.normal();
    std::vector<double> offsets;
    auto emit_clicks = [&](std::vector<double>& channel, int clicks, double start) {
        offsets.clear();
        for (int c = 0; c < clicks; ++c) offsets.push_back(0.01 + 0.98 * rng.uniform());
        std::sort(offsets.begin(), offsets.end());
        for (double o : offsets) {
            double t = start + o * config.bin_width;
            if (!channel.empty() && t <= channel.back()) t = std::nextafter(channel.back(), INFINITY);
            channel.push_back(t);
        }
    };
    for (std::int64_t b = 0; b < slots; ++b) {
        if (b > 0) {
            re = rho * re + innovation * component_sd * rng.normal();
            im = rho * im + innovation * component_sd * rng.normal();
        }
        const double photons = re * re + im * im;
        const double start = static_cast<double>(b) * config.bin_width;
        emit_clicks(trace.dk_click_times, rng.poisson(config.tap_ratio * photons), start);
        emit_clicks(trace.dn_click_times, rng.poisson(arm * photons), start);
        const double hd_noise = std::sqrt(0.5) * rng.normal();
        if (config.homodyne) {
            const double q = std::sqrt(2.0 * arm) * re + hd_noise;
            trace.hd_samples.emplace_back(start + 0.5 * config.bin_width, q);
        }
    }
    return trace;
}

}  // namespace mpsts
