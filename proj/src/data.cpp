#include "mpsts/data.hpp"

#include <algorithm>
#include <numeric>

#include "mpsts/errors.hpp"

namespace mpsts {

CountHistogram::CountHistogram(std::vector<std::int64_t> counts) : counts_(std::move(counts)) {
    for (auto c : counts_)
        if (c < 0) throw DomainError("CountHistogram: negative count");
    total_ = std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

void CountHistogram::add(int value, std::int64_t events) {
    if (value < 0) throw DomainError("CountHistogram: negative photocount value");
    if (events < 0) throw DomainError("CountHistogram: negative count");
    if (static_cast<std::size_t>(value) >= counts_.size()) counts_.resize(static_cast<std::size_t>(value) + 1, 0);
    counts_[static_cast<std::size_t>(value)] += events;
    total_ += events;
}

std::int64_t CountHistogram::count(int value) const {
    if (value < 0 || static_cast<std::size_t>(value) >= counts_.size()) return 0;
    return counts_[static_cast<std::size_t>(value)];
}

int CountHistogram::max_value() const {
    for (std::size_t n = counts_.size(); n-- > 0;)
        if (counts_[n] != 0) return static_cast<int>(n);
    return -1;
}

double CountHistogram::mean() const {
    if (total_ == 0) return 0.0;
    double s = 0.0;
    for (std::size_t n = 0; n < counts_.size(); ++n) s += static_cast<double>(n) * static_cast<double>(counts_[n]);
    return s / static_cast<double>(total_);
}

double CountHistogram::variance() const {
    if (total_ < 2) return 0.0;
    const double mu = mean();
    double s = 0.0;
    for (std::size_t n = 0; n < counts_.size(); ++n) {
        const double d = static_cast<double>(n) - mu;
        s += d * d * static_cast<double>(counts_[n]);
    }
    return s / static_cast<double>(total_ - 1);
}

std::vector<double> CountHistogram::weights() const {
    std::vector<double> w(counts_.size());
    std::transform(counts_.begin(), counts_.end(), w.begin(), [](std::int64_t c) { return static_cast<double>(c); });
    if (const int last = max_value(); last >= 0) w.resize(static_cast<std::size_t>(last) + 1);
    else w.clear();
    return w;
}

CountHistogram CountHistogram::scaled(std::int64_t factor) const {
    if (factor < 0) throw DomainError("CountHistogram: negative scale factor");
    auto c = counts_;
    for (auto& v : c) v *= factor;
    return CountHistogram(std::move(c));
}

double QuadratureSample::mean() const {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double QuadratureSample::variance() const {
    if (values.size() < 2) return 0.0;
    const double mu = mean();
    double s = 0.0;
    for (double v : values) s += (v - mu) * (v - mu);
    return s / static_cast<double>(values.size() - 1);
}

namespace {

void check_channel(const std::vector<double>& times, const char* name) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0)) throw DomainError(std::string("trace: negative time in channel ") + name);
        if (i > 0 && !(times[i] > times[i - 1])) throw DomainError(std::string("trace: channel ") + name + " is not strictly sorted");
    }
}

}  // namespace

void TimeTrace::validate() const {
    check_channel(dk_click_times, "k");
    check_channel(dn_click_times, "n");
    std::vector<double> hd_times;
    hd_times.reserve(hd_samples.size());
    for (const auto& s : hd_samples) hd_times.push_back(s.first);
    check_channel(hd_times, "q");
    if (duration < 0.0) throw DomainError("trace: negative duration");
    if (duration > 0.0) {
        const bool late = (!dk_click_times.empty() && dk_click_times.back() >= duration) ||
                          (!dn_click_times.empty() && dn_click_times.back() >= duration) ||
                          (!hd_samples.empty() && hd_samples.back().first >= duration);
        if (late) throw DomainError("trace: record at or after the stated duration");
    }
}

double TimeTrace::end_time() const {
    if (duration > 0.0) return duration;
    double t = 0.0;
    if (!dk_click_times.empty()) t = std::max(t, dk_click_times.back());
    if (!dn_click_times.empty()) t = std::max(t, dn_click_times.back());
    if (!hd_samples.empty()) t = std::max(t, hd_samples.back().first);
    return t;
}

}  // namespace mpsts
