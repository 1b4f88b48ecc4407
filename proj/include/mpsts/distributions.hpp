#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace mpsts {

/// State parameters of a K-photon-subtracted M-mode thermal state observed
/// through m of its modes. m and M may be continuous for estimation.
struct ModelParams {
    double mu0 = 0.0;  ///< initial mean photon number per mode
    double m = 1.0;    ///< observed modes
    double M = 1.0;    ///< total modes
    int K = 0;         ///< subtracted photons

    /// Throws DomainError unless mu0 > 0, 0 < m <= M, K >= 0.
    void validate() const;
    /// Additionally requires integer m and M.
    void validate_integer() const;

    /// Mean photocount mu0 * m * (1 + K/M).
    double mean() const { return mu0 * m * (1.0 + K / M); }
    /// Group parameter a = M + K of the all-mode compound Poisson law.
    double group_parameter() const { return M + K; }

    bool operator==(const ModelParams&) const = default;
};

/// Truncated photocount distribution. tail_bound bounds the probability
/// beyond the last stored entry.
struct Pmf {
    std::vector<double> probabilities;
    double tail_bound = 0.0;

    std::size_t size() const { return probabilities.size(); }
    int n_max() const { return static_cast<int>(probabilities.size()) - 1; }
    double operator[](std::size_t n) const { return probabilities[n]; }
    double at_or_zero(std::size_t n) const { return n < probabilities.size() ? probabilities[n] : 0.0; }

    double total() const;
    double mean() const;
    double variance() const;
};

struct DarkCountConfig {
    double mu_dc_per_mode = 0.0015;

    static DarkCountConfig none() { return {0.0}; }
    bool enabled() const { return mu_dc_per_mode > 0.0; }
    double mean_for(double m) const { return m * mu_dc_per_mode; }
};

/// Probability mass past which the adaptive truncation stops.
inline constexpr double kTruncationTolerance = 1e-10;
/// |M - m| below this is treated as m == M.
inline constexpr double kPoleSnap = 1e-6;
/// |M - m| in (kPoleSnap, kPoleUnsafe) is rejected.
inline constexpr double kPoleUnsafe = 1e-3;

/// Negative-binomial (compound Poisson) law with group parameter a.
double compound_poisson_pmf(int N, double mu0, double a);
double ln_compound_poisson_pmf(int N, double mu0, double a);

/// Probability that k of the K subtracted photons came from the m observed
/// modes out of M.
double polya_pmf(int k, int m, int M, int K);

/// Photocount pmf of the observed subsystem, closed form with a terminating
/// 2F1. With n_max unset the truncation is adaptive (tail <= 1e-10).
Pmf mpsts_pmf(const ModelParams& params, std::optional<int> n_max = std::nullopt);

/// Writes P(0..out.size()-1) into out without truncation bookkeeping.
/// Hot path of the likelihood evaluators.
void mpsts_pmf_into(const ModelParams& params, std::span<double> out);

/// Same law computed as the Polya mixture of compound Poisson terms with
/// a = k + m. Independent cross-check of mpsts_pmf. Requires integer m, M.
Pmf convolved_pmf(const ModelParams& params, int n_max);

/// Probability generating function E[z^N] in closed form.
double generating_function(const ModelParams& params, double z);

/// Convolves with Poisson dark counts of mean m * mu_dc_per_mode.
Pmf dark_count_convolve(const Pmf& pmf, const DarkCountConfig& config, double m);
/// In-place variant on a truncated prefix.
void dark_count_convolve_into(std::span<double> probabilities, double mu_dc);

/// Smallest n_max for which the pmf prefix sum exceeds 1 - tolerance.
int adaptive_n_max(const ModelParams& params, double tolerance = kTruncationTolerance);

/// mu0 = mu / (m (1 + K/M)).
double mu0_from_mean(double mu, double m, double M, int K);

/// Homodyne quadrature density for an m = 1 observation: sum_N P(N) phi_N(Q)^2.
/// Construct once per parameter set; evaluation is cheap.
class QuadratureDensity {
public:
    explicit QuadratureDensity(const ModelParams& params);

    double operator()(double q) const;
    const Pmf& photocounts() const { return pmf_; }
    /// Integration half-width sqrt(2 N_max + 1) + 6.
    double q_limit() const;
    /// mu0 (1 + K/M) + 1/2.
    double variance() const;

private:
    ModelParams params_;
    Pmf pmf_;
};

double quadrature_pdf(const ModelParams& params, double q);

}  // namespace mpsts
