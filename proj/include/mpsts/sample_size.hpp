#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "mpsts/distributions.hpp"
#include "mpsts/estimation.hpp"

namespace mpsts {

enum class SampleSizeMethod { no_prior, fixed_m, bayesian };

std::string_view method_name(SampleSizeMethod method);
/// Continuous parameters estimated by a method (no_prior: m, M, mu0).
std::vector<Param> free_parameters(SampleSizeMethod method);

/// n at which max_u sqrt((n I)^-1)_uu / u_t equals delta_target, K fixed.
double cramer_rao_sample_size(const ModelParams& theory, std::span<const Param> free, double delta_target,
                              const DarkCountConfig& dark);

/// Best fit of one K slice to the exact law at theory.
struct SliceFit {
    int K = 0;
    ModelParams params;
    double kl = 0.0;                ///< per-event KL divergence from the true law
    Eigen::MatrixXd information;    ///< per-event Fisher matrix over the free parameters
    double log_det_information = 0.0;
    bool used = false;
    std::string note;
};

/// Asymptotic fiducial over K = 0..k_max: each slice is a Gaussian around its
/// KL-closest point, weighted by exp(-n KL) / sqrt(det(n I)).
class KMixture {
public:
    KMixture(const ModelParams& theory, std::vector<Param> free, const DarkCountConfig& dark, int k_max = 10);

    const std::vector<SliceFit>& slices() const { return slices_; }
    const ModelParams& theory() const { return theory_; }

    /// Marginal moments at sample size n; K is always varied.
    EstimateSummary summary(double n) const;
    /// Marginal probability of each slice at sample size n.
    std::vector<double> weights(double n) const;
    /// Smallest n (to 0.1% in log) with summary(n).delta <= delta_target.
    double sample_size(double delta_target) const;

private:
    ModelParams theory_;
    std::vector<Param> free_;
    std::vector<SliceFit> slices_;
};

struct BayesianDeltaOptions {
    int seeds = 10;
    std::uint64_t base_seed = 1;
    int nodes = 61;
    DarkCountConfig dark;
};

/// Median posterior delta over simulated data sets of size n.
double bayesian_median_delta(const ModelParams& theory, std::int64_t n, const BayesianDeltaOptions& options);

/// Bisection in log n for the simulated Bayesian column. Throws
/// ConvergenceError when [n_lo, n_hi] does not bracket the target.
double bayesian_sample_size(const ModelParams& theory, double delta_target, const BayesianDeltaOptions& options,
                            double n_lo = 50.0, double n_hi = 5e5, int steps = 10);

}  // namespace mpsts
