#pragma once

#include <cstdint>

#include "mpsts/data.hpp"
#include "mpsts/distributions.hpp"
#include "mpsts/random.hpp"

namespace mpsts {

/// n i.i.d. photocounts by inverse-CDF lookup on the truncated model pmf,
/// optionally convolved with dark counts. Trial i draws from substream i.
CountHistogram sample_photocounts(const ModelParams& params, std::int64_t n, const SeededStream& stream,
                                  const DarkCountConfig& dark = DarkCountConfig::none());

/// Hierarchical homodyne samples for m = 1: N from the photocount pmf, then
/// Q from |phi_N|^2 through a cached per-N inverse CDF.
QuadratureSample sample_quadratures(const ModelParams& params, std::int64_t n, const SeededStream& stream);

/// Draws Q from |phi_N(Q)|^2 given a uniform variate u in [0, 1).
double sample_fock_quadrature(int N, double u);

struct OracleResult {
    CountHistogram histogram;
    std::int64_t attempts = 0;  ///< proposals drawn, accepted or not
    double acceptance_rate() const {
        return attempts > 0 ? static_cast<double>(histogram.total()) / static_cast<double>(attempts) : 0.0;
    }
};

/// Brute-force simulation of K annihilations applied to M thermal modes,
/// counting photons in the first m. Does not use the closed-form pmf.
OracleResult physical_subtraction_oracle(double mu0, int m, int M, int K, std::int64_t n, const SeededStream& stream);

struct TraceSynthesisConfig {
    double mu0 = 0.264;         ///< mean D_n counts per bin
    double t_coh = 40e-6;       ///< field coherence time, seconds
    double duration = 1.0;      ///< seconds
    double tap_ratio = 0.1;     ///< fraction routed to the subtraction detector
    double bin_width = 10e-6;   ///< slot over which the field is held constant
    bool homodyne = true;       ///< emit one HD reading per slot

    void validate() const;
    /// Mean source photons per slot before the splitters.
    double source_mean() const { return 2.0 * mu0 / (1.0 - tap_ratio); }
    /// Per-mode mean of D_n counts once groups are conditioned on D_k clicks.
    double effective_mu0() const { return mu0 / (1.0 + tap_ratio * source_mean()); }
};

/// Synthetic detector record from a thermal field: a complex Ornstein-
/// Uhlenbeck amplitude (field correlation exp(-t/t_coh)) held constant per
/// slot, Poisson clicks on both detectors and Gaussian homodyne readings
/// around the field quadrature.
TimeTrace synthesize_trace(const TraceSynthesisConfig& config, const SeededStream& stream);

}  // namespace mpsts
