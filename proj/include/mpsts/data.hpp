#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace mpsts {

/// Photocount histogram: counts[N] = D(N) events with N counts.
class CountHistogram {
public:
    CountHistogram() = default;
    explicit CountHistogram(std::vector<std::int64_t> counts);

    void add(int value, std::int64_t events = 1);

    const std::vector<std::int64_t>& counts() const { return counts_; }
    std::int64_t count(int value) const;
    /// Total number of events n.
    std::int64_t total() const { return total_; }
    bool empty() const { return total_ == 0; }
    /// Largest N with nonzero count, -1 when empty.
    int max_value() const;

    double mean() const;
    double variance() const;

    /// Dense real-valued copy, the form consumed by the likelihood.
    std::vector<double> weights() const;
    CountHistogram scaled(std::int64_t factor) const;

    bool operator==(const CountHistogram&) const = default;

private:
    std::vector<std::int64_t> counts_;
    std::int64_t total_ = 0;
};

/// Homodyne quadrature readings, vacuum variance 1/2.
struct QuadratureSample {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }
    double mean() const;
    double variance() const;  ///< unbiased sample variance

    bool operator==(const QuadratureSample&) const = default;
};

/// Detector record: click times of the subtraction (D_k) and counting
/// (D_n) detectors and homodyne readings, all in seconds from t = 0.
struct TimeTrace {
    std::vector<double> dk_click_times;
    std::vector<double> dn_click_times;
    std::vector<std::pair<double, double>> hd_samples;  ///< (time, q)
    /// Acquisition length; 0 means "up to the last record".
    double duration = 0.0;

    /// Throws DomainError on negative or unsorted times.
    void validate() const;
    double end_time() const;

    bool operator==(const TimeTrace&) const = default;
};

}  // namespace mpsts
