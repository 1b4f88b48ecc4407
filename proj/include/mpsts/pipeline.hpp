#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mpsts/data.hpp"

namespace mpsts {

struct PipelineConfig {
    double tau = 10e-6;          ///< bin width, seconds
    double period = 480e-6;      ///< thinning period T = 12 t_coh
    double t_coh = 40e-6;        ///< coherence time, seconds
    double tau_d = 220e-9;       ///< detector dead time (metadata only)
    int max_counts_per_bin = 45;

    /// Throws DomainError for tau <= 0 or period < tau.
    void validate() const;
    /// Soft checks on t_coh >> tau >> tau_d.
    std::vector<std::string> warnings() const;
    /// Thinning stride round(period / tau).
    std::size_t stride() const;
};

struct BinRecord {
    int k = 0;                ///< D_k clicks
    int n = 0;                ///< D_n clicks
    std::optional<double> q;  ///< first homodyne reading in the bin
    bool saturated = false;   ///< n above max_counts_per_bin

    bool operator==(const BinRecord&) const = default;
};

struct BinningResult {
    std::vector<BinRecord> bins;
    std::size_t saturated = 0;
};

struct DatasetKey {
    int m = 1;
    int M = 1;
    int K = 0;
    auto operator<=>(const DatasetKey&) const = default;
};

struct GroupedDataset {
    DatasetKey key;
    CountHistogram photocounts;
    QuadratureSample quadratures;
    std::int64_t groups = 0;

    bool operator==(const GroupedDataset&) const = default;
};

/// Bin i covers [i tau, (i+1) tau). The bin count is ceil(duration / tau)
/// when the trace states a duration, otherwise enough to hold the last record.
BinningResult bin_trace(const TimeTrace& trace, const PipelineConfig& config);

/// Keeps bins 0, s, 2s, ... with s = round(period / tau).
std::vector<BinRecord> thin_bins(const std::vector<BinRecord>& bins, const PipelineConfig& config);

/// Consecutive disjoint groups of M bins: K = sum of k over the group,
/// N = sum of n over the first m bins, Q = q of the first bin. A trailing
/// partial group is dropped. Keyed by K.
std::map<int, GroupedDataset> group_and_select(const std::vector<BinRecord>& bins, int M, int m);

}  // namespace mpsts
