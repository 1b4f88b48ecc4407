#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace mpsts::specfun {

/// Largest oscillator index supported by the Hermite-function routines.
inline constexpr int kMaxHermiteIndex = 512;

/// A real number stored as (ln|x|, sign). Products add magnitudes.
struct LogValue {
    double log_magnitude = -INFINITY;
    int sign = 0;

    static LogValue from(double x);
    static LogValue from_log(double log_magnitude, int sign = 1);

    double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_magnitude); }
    bool is_zero() const { return sign == 0; }

    LogValue operator*(const LogValue& rhs) const;
    LogValue operator/(const LogValue& rhs) const;
};

/// ln Gamma(x) for x > 0. Throws DomainError otherwise.
double ln_gamma(double x);

/// ln C(n, k) with real upper argument, via ln_gamma.
double ln_binomial(double n, int k);

/// Pochhammer-series 2F1(-K, b; c; x), which terminates after K + 1 terms.
/// Summed with Neumaier compensation. Throws DomainError when some (c)_j,
/// j <= K, vanishes.
double hyp2f1_terminating(int K, double b, double c, double x);

/// Normalized oscillator eigenfunction phi_n(q) (unit width, vacuum
/// variance 1/2), by the normalized three-term recurrence.
double hermite_phi(int n, double q);

/// Fills out[0..n_max] with phi_0(q) .. phi_n_max(q).
void hermite_phi_all(int n_max, double q, std::span<double> out);
std::vector<double> hermite_phi_all(int n_max, double q);

}  // namespace mpsts::specfun
