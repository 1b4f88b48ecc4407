#pragma once

// Goodness-of-fit helpers shared by the statistical tests.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mpsts/data.hpp"
#include "mpsts/distributions.hpp"

namespace mpsts::testing {

struct ChiSquare {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 1.0;
};

inline double chi2_sf(double stat, int dof) {
    if (dof <= 0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

/// Pearson test of a histogram against pmf; cells pooled left to right until
/// the expected count reaches min_expected, the remainder pooled into the
/// last cell.
inline ChiSquare chi_square_gof(const CountHistogram& hist, const std::vector<double>& pmf, double min_expected = 5.0) {
    const double n = static_cast<double>(hist.total());
    const int top = std::max(hist.max_value(), static_cast<int>(pmf.size()) - 1);
    std::vector<double> exp_cells, obs_cells;
    double e = 0.0, o = 0.0;
    double used = 0.0;
    for (int v = 0; v <= top; ++v) {
        const double p = v < static_cast<int>(pmf.size()) ? pmf[static_cast<std::size_t>(v)] : 0.0;
        e += n * p;
        used += p;
        o += static_cast<double>(hist.count(v));
        if (e >= min_expected && n * (1.0 - used) >= min_expected) {
            exp_cells.push_back(e);
            obs_cells.push_back(o);
            e = o = 0.0;
        }
    }
    e += n * std::max(0.0, 1.0 - used);
    exp_cells.push_back(e);
    obs_cells.push_back(o);
    ChiSquare r;
    for (std::size_t i = 0; i < exp_cells.size(); ++i) {
        const double d = obs_cells[i] - exp_cells[i];
        r.statistic += d * d / exp_cells[i];
    }
    r.dof = static_cast<int>(exp_cells.size()) - 1;
    r.p_value = chi2_sf(r.statistic, r.dof);
    return r;
}

/// Two-sample chi-square homogeneity test, cells pooled until both
/// expected counts reach min_expected.
inline ChiSquare chi_square_two_sample(const CountHistogram& a, const CountHistogram& b, double min_expected = 5.0) {
    const double na = static_cast<double>(a.total()), nb = static_cast<double>(b.total());
    const int top = std::max(a.max_value(), b.max_value());
    std::vector<std::pair<double, double>> cells;
    double ca = 0.0, cb = 0.0;
    for (int v = 0; v <= top; ++v) {
        ca += static_cast<double>(a.count(v));
        cb += static_cast<double>(b.count(v));
        const double pooled = ca + cb;
        if (pooled * std::min(na, nb) / (na + nb) >= min_expected) {
            cells.emplace_back(ca, cb);
            ca = cb = 0.0;
        }
    }
    if (ca + cb > 0.0) {
        if (cells.empty()) cells.emplace_back(ca, cb);
        else {
            cells.back().first += ca;
            cells.back().second += cb;
        }
    }
    ChiSquare r;
    for (const auto& [x, y] : cells) {
        const double tot = x + y;
        const double ea = tot * na / (na + nb), eb = tot * nb / (na + nb);
        r.statistic += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
    }
    r.dof = static_cast<int>(cells.size()) - 1;
    r.p_value = chi2_sf(r.statistic, r.dof);
    return r;
}

}  // namespace mpsts::testing
