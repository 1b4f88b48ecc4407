#include "mpsts/sample_size.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpsts/errors.hpp"
#include "mpsts/sampling.hpp"

namespace mpsts {

std::string_view method_name(SampleSizeMethod method) {
    switch (method) {
        case SampleSizeMethod::no_prior: return "no_prior";
        case SampleSizeMethod::fixed_m: return "fixed_m";
        case SampleSizeMethod::bayesian: return "bayesian";
    }
    return "?";
}

std::vector<Param> free_parameters(SampleSizeMethod method) {
    if (method == SampleSizeMethod::fixed_m) return {Param::M, Param::mu0};
    return {Param::m, Param::M, Param::mu0};
}

double cramer_rao_sample_size(const ModelParams& theory, std::span<const Param> free, double delta_target,
                              const DarkCountConfig& dark) {
    if (!(delta_target > 0.0)) throw DomainError("sample size: delta target must be positive");
    const Eigen::MatrixXd info = fisher_information(theory, 1.0, dark).reduced(free);
    condition_number(info);  // rejects a singular matrix
    const Eigen::MatrixXd cov = info.inverse();
    double worst = 0.0;
    for (std::size_t i = 0; i < free.size(); ++i) {
        const auto d = static_cast<Eigen::Index>(i);
        worst = std::max(worst, std::sqrt(cov(d, d)) / get_param(theory, free[i]));
    }
    const double ratio = worst / delta_target;
    return ratio * ratio;
}

KMixture::KMixture(const ModelParams& theory, std::vector<Param> free, const DarkCountConfig& dark, int k_max)
    : theory_(theory), free_(std::move(free)) {
    theory.validate();
    if (k_max < theory.K) throw DomainError("K mixture: k_max is below the true K");
    const Pmf truth = [&] {
        Pmf p = mpsts_pmf(theory, adaptive_n_max(theory, 1e-12) + 12);
        return dark.enabled() ? dark_count_convolve(p, dark, theory.m) : p;
    }();
    double entropy = 0.0;
    for (double p : truth.probabilities)
        if (p > 0.0) entropy += p * std::log(p);

    for (int K = 0; K <= k_max; ++K) {
        SliceFit s;
        s.K = K;
        ModelParams start = theory;
        start.K = K;
        start.mu0 = mu0_from_mean(theory.mean(), theory.m, theory.M, K);
        try {
            const MleResult fit = fit_mle(truth.probabilities, start, free_, dark, 500);
            s.params = fit.params;
            s.kl = std::max(0.0, entropy - fit.log_likelihood);
            if (!fit.converged) s.note = "fit did not converge";
            else if (fit.at_bound) s.note = "best fit on the parameter bound";
            else {
                s.information = fisher_information(fit.params, 1.0, dark).reduced(free_);
                condition_number(s.information);
                s.log_det_information = std::log(s.information.determinant());
                s.used = true;
            }
        } catch (const std::exception& e) {
            s.note = e.what();
        }
        slices_.push_back(std::move(s));
    }
}

std::vector<double> KMixture::weights(double n) const {
    const double d = static_cast<double>(free_.size());
    std::vector<double> logw(slices_.size(), -std::numeric_limits<double>::infinity());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < slices_.size(); ++i) {
        if (!slices_[i].used) continue;
        logw[i] = -n * slices_[i].kl - 0.5 * (slices_[i].log_det_information + d * std::log(n));
        top = std::max(top, logw[i]);
    }
    std::vector<double> w(slices_.size(), 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(logw[i] - top);
        sum += w[i];
    }
    for (double& x : w) x /= sum;
    return w;
}

EstimateSummary KMixture::summary(double n) const {
    const auto w = weights(n);
    EstimateSummary s;
    double k1 = 0.0, k2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        k1 += w[i] * slices_[i].K;
        k2 += w[i] * slices_[i].K * slices_[i].K;
    }
    s.K = {k1, std::sqrt(std::max(0.0, k2 - k1 * k1)), true};
    for (std::size_t j = 0; j < free_.size(); ++j) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] == 0.0) continue;
            const auto d = static_cast<Eigen::Index>(j);
            const double u = get_param(slices_[i].params, free_[j]);
            const double var = slices_[i].information.inverse()(d, d) / n;
            m1 += w[i] * u;
            m2 += w[i] * (var + u * u);
        }
        s[free_[j]] = {m1, std::sqrt(std::max(0.0, m2 - m1 * m1)), true};
    }
    for (Param p : kContinuousParams)
        if (std::find(free_.begin(), free_.end(), p) == free_.end()) s[p] = {get_param(theory_, p), 0.0, false};
    for (Param p : {Param::m, Param::M, Param::mu0, Param::K}) {
        const double ref = get_param(theory_, p);
        if (s[p].varied && ref > 0.0) s.delta = std::max(s.delta, s[p].sd / ref);
    }
    return s;
}

double KMixture::sample_size(double delta_target) const {
    if (!(delta_target > 0.0)) throw DomainError("sample size: delta target must be positive");
    // Coarse scan upward, then bisection in log n on the first crossing.
    double lo = 1.0, hi = 1.0;
    for (double n = 1e1; n <= 1e14; n *= 1.5) {
        if (summary(n).delta <= delta_target) {
            hi = n;
            break;
        }
        lo = n;
    }
    if (hi == 1.0) throw ConvergenceError("sample size: target not reached below n = 1e14");
    while (std::log(hi / lo) > 1e-3) {
        const double mid = std::sqrt(lo * hi);
        (summary(mid).delta <= delta_target ? hi : lo) = mid;
    }
    return hi;
}

double bayesian_median_delta(const ModelParams& theory, std::int64_t n, const BayesianDeltaOptions& options) {
    if (options.seeds < 1) throw DomainError("bayesian delta: need at least one seed");
    std::vector<double> deltas;
    for (int s = 0; s < options.seeds; ++s) {
        const SeededStream stream{options.base_seed + static_cast<std::uint64_t>(s), 0};
        const CountHistogram data = sample_photocounts(theory, n, stream, options.dark);
        deltas.push_back(bayesian_fit(data, theory, options.dark, options.nodes).summary.delta);
    }
    std::sort(deltas.begin(), deltas.end());
    const std::size_t k = deltas.size();
    return k % 2 ? deltas[k / 2] : 0.5 * (deltas[k / 2 - 1] + deltas[k / 2]);
}

double bayesian_sample_size(const ModelParams& theory, double delta_target, const BayesianDeltaOptions& options,
                            double n_lo, double n_hi, int steps) {
    auto delta_at = [&](double n) { return bayesian_median_delta(theory, std::llround(n), options); };
    if (delta_at(n_hi) > delta_target || delta_at(n_lo) <= delta_target)
        throw ConvergenceError("bayesian sample size: interval does not bracket the target");
    for (int i = 0; i < steps; ++i) {
        const double mid = std::sqrt(n_lo * n_hi);
        (delta_at(mid) <= delta_target ? n_hi : n_lo) = mid;
    }
    return n_hi;
}

}  // namespace mpsts
