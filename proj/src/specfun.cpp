#include "mpsts/specfun.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <numbers>
#include <string>

#include "mpsts/errors.hpp"

namespace mpsts::specfun {

LogValue LogValue::from(double x) {
    if (x == 0.0) return {};
    return {std::log(std::abs(x)), x > 0 ? 1 : -1};
}

LogValue LogValue::from_log(double log_magnitude, int sign) {
    if (sign == 0 || log_magnitude == -INFINITY) return {};
    return {log_magnitude, sign > 0 ? 1 : -1};
}

LogValue LogValue::operator*(const LogValue& rhs) const {
    if (sign == 0 || rhs.sign == 0) return {};
    return {log_magnitude + rhs.log_magnitude, sign * rhs.sign};
}

LogValue LogValue::operator/(const LogValue& rhs) const {
    if (rhs.sign == 0) throw DomainError("LogValue: division by zero");
    if (sign == 0) return {};
    return {log_magnitude - rhs.log_magnitude, sign * rhs.sign};
}

double ln_gamma(double x) {
    if (!(x > 0.0)) throw DomainError("ln_gamma: argument must be positive, got " + std::to_string(x));
    return boost::math::lgamma(x);
}

double ln_binomial(double n, int k) {
    if (k < 0) throw DomainError("ln_binomial: negative k");
    return ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0);
}

double hyp2f1_terminating(int K, double b, double c, double x) {
    if (K < 0) throw DomainError("hyp2f1_terminating: K must be nonnegative");
    double sum = 1.0;
    double comp = 0.0;
    double term = 1.0;
    for (int j = 0; j < K; ++j) {
        const double cj = c + j;
        if (cj == 0.0) throw DomainError("hyp2f1_terminating: (c)_j vanishes at j=" + std::to_string(j + 1));
        term *= (-K + j) * (b + j) / (cj * (j + 1)) * x;
        // Neumaier compensated summation
        const double t = sum + term;
        if (std::abs(sum) >= std::abs(term))
            comp += (sum - t) + term;
        else
            comp += (term - t) + sum;
        sum = t;
    }
    return sum + comp;
}

namespace {

constexpr double kRescaleThreshold = 1e150;
const double kLogRescale = std::log(kRescaleThreshold);

double scaled(double v, double log_scale) {
    if (v == 0.0) return 0.0;
    const double s = std::exp(log_scale);
    if (s > 1e-290 && s < 1e290) return v * s;
    const double mag = std::exp(log_scale + std::log(std::abs(v)));
    return v < 0 ? -mag : mag;
}

}  // namespace

void hermite_phi_all(int n_max, double q, std::span<double> out) {
    if (n_max < 0) throw DomainError("hermite_phi_all: negative index");
    if (n_max > kMaxHermiteIndex) throw DomainError("hermite_phi_all: index above " + std::to_string(kMaxHermiteIndex));
    if (out.size() < static_cast<std::size_t>(n_max) + 1) throw DomainError("hermite_phi_all: output span too short");

    // Values carried as v * exp(log_scale) so neither the Gaussian envelope
    // nor the growth of the recurrence leaves double range.
    double log_scale = -0.25 * std::log(std::numbers::pi) - 0.5 * q * q;
    double prev = 0.0;
    double cur = 1.0;
    out[0] = scaled(cur, log_scale);
    for (int n = 0; n < n_max; ++n) {
        const double next = q * std::sqrt(2.0 / (n + 1)) * cur - std::sqrt(static_cast<double>(n) / (n + 1)) * prev;
        prev = cur;
        cur = next;
        if (std::abs(cur) > kRescaleThreshold) {
            cur /= kRescaleThreshold;
            prev /= kRescaleThreshold;
            log_scale += kLogRescale;
        }
        out[n + 1] = scaled(cur, log_scale);
    }
}

std::vector<double> hermite_phi_all(int n_max, double q) {
    std::vector<double> out(static_cast<std::size_t>(n_max) + 1);
    hermite_phi_all(n_max, q, out);
    return out;
}

double hermite_phi(int n, double q) {
    return hermite_phi_all(n, q).back();
}

}  // namespace mpsts::specfun
