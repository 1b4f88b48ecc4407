#include "mpsts/pipeline.hpp"

#include <cmath>

#include "mpsts/errors.hpp"

namespace mpsts {

void PipelineConfig::validate() const {
    if (!(tau > 0.0)) throw DomainError("pipeline: tau must be positive");
    if (!(period >= tau)) throw DomainError("pipeline: period must be at least tau");
    if (max_counts_per_bin < 0) throw DomainError("pipeline: max_counts_per_bin must be nonnegative");
}

std::vector<std::string> PipelineConfig::warnings() const {
    std::vector<std::string> out;
    if (tau > t_coh) out.push_back("bin width exceeds the coherence time");
    if (tau < 10.0 * tau_d) out.push_back("bin width is below ten detector dead times");
    return out;
}

std::size_t PipelineConfig::stride() const {
    validate();
    return static_cast<std::size_t>(std::max(1.0, std::round(period / tau)));
}

namespace {

std::size_t bin_index(double t, double tau) {
    return static_cast<std::size_t>(std::floor(t / tau));
}

}  // namespace

BinningResult bin_trace(const TimeTrace& trace, const PipelineConfig& config) {
    config.validate();
    trace.validate();
    std::size_t count = 0;
    if (trace.duration > 0.0) {
        count = static_cast<std::size_t>(std::ceil(trace.duration / config.tau - 1e-9));
    } else {
        const double last = trace.end_time();
        const bool any = !trace.dk_click_times.empty() || !trace.dn_click_times.empty() || !trace.hd_samples.empty();
        count = any ? bin_index(last, config.tau) + 1 : 0;
    }

    BinningResult result;
    result.bins.resize(count);
    auto slot = [&](double t) -> BinRecord* {
        const std::size_t i = bin_index(t, config.tau);
        return i < count ? &result.bins[i] : nullptr;
    };
    for (double t : trace.dk_click_times)
        if (auto* b = slot(t)) ++b->k;
    for (double t : trace.dn_click_times)
        if (auto* b = slot(t)) ++b->n;
    for (const auto& [t, q] : trace.hd_samples)
        if (auto* b = slot(t); b && !b->q) b->q = q;
    for (auto& b : result.bins) {
        if (b.n > config.max_counts_per_bin) {
            b.saturated = true;
            ++result.saturated;
        }
    }
    return result;
}

std::vector<BinRecord> thin_bins(const std::vector<BinRecord>& bins, const PipelineConfig& config) {
    const std::size_t s = config.stride();
    std::vector<BinRecord> out;
    out.reserve(bins.size() / s + 1);
    for (std::size_t i = 0; i < bins.size(); i += s) out.push_back(bins[i]);
    return out;
}

std::map<int, GroupedDataset> group_and_select(const std::vector<BinRecord>& bins, int M, int m) {
    if (m < 1 || M < m) throw DomainError("group_and_select: requires 1 <= m <= M");
    std::map<int, GroupedDataset> out;
    const auto group_size = static_cast<std::size_t>(M);
    for (std::size_t start = 0; start + group_size <= bins.size(); start += group_size) {
        int K = 0, N = 0;
        for (std::size_t j = 0; j < group_size; ++j) {
            K += bins[start + j].k;
            if (j < static_cast<std::size_t>(m)) N += bins[start + j].n;
        }
        auto& ds = out[K];
        ds.key = {m, M, K};
        ds.photocounts.add(N);
        if (bins[start].q) ds.quadratures.values.push_back(*bins[start].q);
        ++ds.groups;
    }
    return out;
}

}  // namespace mpsts
