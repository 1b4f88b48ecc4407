#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mpsts/data.hpp"
#include "mpsts/distributions.hpp"

namespace mpsts {

enum class Param { m, M, mu0, K };

inline constexpr std::array<Param, 3> kContinuousParams = {Param::m, Param::M, Param::mu0};

std::string_view param_name(Param p);
Param param_from_name(std::string_view name);
double get_param(const ModelParams& params, Param p);
void set_param(ModelParams& params, Param p, double value);

/// Per-cell floor on model probabilities (and densities) inside the likelihood.
inline constexpr double kProbabilityFloor = 1e-300;

struct LogLikelihood {
    double value = 0.0;
    std::size_t floored_cells = 0;  ///< observed cells that hit kProbabilityFloor
};

/// sum_N D(N) ln P(N); P is dark-count convolved when dark is enabled.
LogLikelihood log_likelihood_photocount(const ModelParams& params, const CountHistogram& data,
                                        const DarkCountConfig& dark);
/// Same with real-valued counts indexed by N (e.g. expected counts n P_t(N)).
LogLikelihood log_likelihood_photocount(const ModelParams& params, std::span<const double> counts,
                                        const DarkCountConfig& dark);

/// Photocount pmf P(0..n_max), dark-count convolved when enabled.
std::vector<double> observed_pmf(const ModelParams& params, const DarkCountConfig& dark, int n_max);
/// Adaptive-length variant.
Pmf observed_pmf(const ModelParams& params, const DarkCountConfig& dark);

// ---------------------------------------------------------------------------
// Parameter grids

/// Node coordinates of a grid. Continuous axes must be uniformly spaced.
struct GridAxes {
    std::vector<double> mu0;
    std::vector<double> m;
    std::vector<double> M;
    std::vector<int> K;

    /// Uniform axis of `nodes` points on [lo, hi]; a single node sits at lo.
    static std::vector<double> linspace(double lo, double hi, int nodes);
    /// center +- width * sigma, clipped below at `floor`.
    static std::vector<double> around(double center, double sigma, int nodes, double width = 6.0, double floor = 1e-6);

    void validate() const;
    std::size_t size() const { return mu0.size() * m.size() * M.size() * K.size(); }
};

/// Density over (K, m, M, mu0) nodes. density = normalization * exp(log_density)
/// and sum(density) * cell_volume() == 1.
class ParameterGrid {
public:
    struct Index {
        std::size_t K = 0, m = 0, M = 0, mu0 = 0;
    };

    ParameterGrid() = default;
    ParameterGrid(GridAxes axes, std::vector<double> log_target);

    const GridAxes& axes() const { return axes_; }
    /// Shifted log density: maximum exactly 0, -inf at excluded nodes.
    const std::vector<double>& log_density() const { return log_density_; }
    const std::vector<double>& density() const { return density_; }
    double normalization() const { return normalization_; }
    /// Unshifted maximum of the log target.
    double log_max() const { return log_max_; }
    double cell_volume() const;

    std::size_t flat(const Index& idx) const;
    Index unflat(std::size_t i) const;
    ModelParams params_at(std::size_t i) const;

    /// Node of maximum density; ties go to the lowest flat index.
    std::size_t argmax() const { return argmax_; }
    /// True when the maximum sits on the end of any axis with more than one node.
    bool max_on_boundary() const;
    std::vector<std::string> warnings() const;

    /// Probability mass per node of one axis.
    std::vector<double> marginal(Param p) const;
    /// Axis node values as doubles.
    std::vector<double> axis(Param p) const;
    std::size_t axis_size(Param p) const;

    /// Nodes at or above half of the maximum density with at least one
    /// neighbour (same K slice) below it or on an axis end.
    std::vector<std::size_t> half_max_boundary() const;

private:
    GridAxes axes_;
    std::vector<double> log_density_;
    std::vector<double> density_;
    double normalization_ = 0.0;
    double log_max_ = 0.0;
    std::size_t argmax_ = 0;
};

/// Builds a grid from an arbitrary log target evaluated at every node.
/// Nodes where the target throws DomainError are excluded (-inf).
ParameterGrid evaluate_grid(const GridAxes& axes, const std::function<double(const ModelParams&)>& log_target);

ParameterGrid fiducial_grid(const CountHistogram& data, const GridAxes& axes, const DarkCountConfig& dark);
ParameterGrid fiducial_grid(std::span<const double> counts, const GridAxes& axes, const DarkCountConfig& dark);

// ---------------------------------------------------------------------------
// Information matrices

/// Symmetric 3x3 information matrix in parameter order (m, M, mu0).
struct InfoMatrix {
    Eigen::Matrix3d entries = Eigen::Matrix3d::Zero();
    double n = 1.0;

    static constexpr int index_of(Param p) { return p == Param::m ? 0 : p == Param::M ? 1 : 2; }
    double operator()(Param u, Param v) const { return entries(index_of(u), index_of(v)); }
    /// Sub-matrix over the listed parameters.
    Eigen::MatrixXd reduced(std::span<const Param> params) const;
};

/// Relative central-difference step (with absolute floor) for model derivatives.
inline constexpr double kRelativeStep = 1e-4;
inline constexpr double kAbsoluteStepFloor = 1e-6;

/// dP(N)/du for u in (m, M, mu0), N = 0..n_max, central differences with
/// step step_scale * max(kRelativeStep |u|, kAbsoluteStepFloor). When m == M
/// the m column is zero and the M column follows m = M.
std::array<std::vector<double>, 3> pmf_gradient(const ModelParams& params, const DarkCountConfig& dark, int n_max,
                                                double step_scale = 1.0);

/// n * sum_N dP/du dP/dv / P at fixed K.
InfoMatrix fisher_information(const ModelParams& params, double n, const DarkCountConfig& dark);

/// lambda_max / lambda_min; throws DomainError unless positive definite.
double condition_number(const Eigen::MatrixXd& matrix);
double condition_number(const InfoMatrix& matrix);

struct MleResult {
    ModelParams params;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    bool at_bound = false;  ///< a box or ordering constraint was active at the end
};

/// Upper limit used for M by the multi-parameter fit.
inline constexpr double kMaxModes = 1000.0;

/// Multi-parameter MLE over `free` (subset of m, M, mu0) at fixed K by
/// Fisher scoring with backtracking. counts may be real-valued.
MleResult fit_mle(std::span<const double> counts, const ModelParams& start, std::span<const Param> free,
                  const DarkCountConfig& dark, int max_iterations = 200);

// ---------------------------------------------------------------------------
// Priors and posteriors

struct NormalPrior {
    double mean = 0.0;
    double sigma = std::numeric_limits<double>::infinity();  ///< inf: flat, 0: point mass

    bool flat() const { return std::isinf(sigma); }
    bool point() const { return sigma == 0.0; }
    double log_pdf(double x) const;
};

struct PriorSpec {
    NormalPrior mu0;
    NormalPrior m;
    NormalPrior M;
    int K_fixed = 0;

    const NormalPrior& operator[](Param p) const;
    NormalPrior& operator[](Param p);
    void validate() const;
};

struct ConditionalEstimate {
    double estimate = 0.0;
    double sigma = 0.0;
    int iterations = 0;
    bool at_bracket_edge = false;
};

/// Maximizes f over [lo, hi]: a coarse scan followed by Brent refinement.
/// Throws ConvergenceError when Brent exhausts max_iterations.
struct Maximum1d {
    double x = 0.0;
    double value = 0.0;
    int iterations = 0;
    bool at_edge = false;
};
Maximum1d maximize_1d(const std::function<double(double)>& f, double lo, double hi, int scan_points = 48,
                      int max_iterations = 200);

/// Default search interval for a conditional estimate of `target`.
std::pair<double, double> conditional_bracket(Param target, const ModelParams& fixed);

/// One-parameter MLE of `target` with the rest held at `fixed`; sigma from
/// the single-parameter Fisher information at the estimate.
ConditionalEstimate conditional_mle(Param target, const CountHistogram& data, const ModelParams& fixed,
                                    const DarkCountConfig& dark);

/// Conditional MLEs of m, M, mu0 around the theory values; K fixed at theory.
PriorSpec build_prior(const CountHistogram& data, const ModelParams& theory, const DarkCountConfig& dark);

/// prior.mean +- width sigma per axis (61 nodes by default), K = {K_fixed}.
/// Point-mass priors collapse their axis.
GridAxes prior_axes(const PriorSpec& prior, int nodes = 61, double width = 6.0);

double log_prior(const PriorSpec& prior, const ModelParams& params);

/// L * prior on the grid, K fixed at prior.K_fixed.
ParameterGrid posterior_grid(const CountHistogram& data, const PriorSpec& prior, const GridAxes& axes,
                             const DarkCountConfig& dark);

struct Moment {
    double mean = 0.0;
    double sd = 0.0;
    bool varied = false;
};

struct EstimateSummary {
    Moment m, M, mu0, K;
    double delta = 0.0;  ///< max sd / reference over varied parameters

    const Moment& operator[](Param p) const;
    Moment& operator[](Param p);
    ModelParams point_estimate(int K_fallback) const;
};

EstimateSummary posterior_moments(const ParameterGrid& grid, const ModelParams& reference);

/// I + diag(1 / sigma^2) over (m, M, mu0).
InfoMatrix posterior_information(const InfoMatrix& fisher, const PriorSpec& prior);

/// Fiducial mass along one axis with every other parameter at `fixed`.
std::vector<double> conditional_fiducial(std::span<const double> counts, Param target, const ModelParams& fixed,
                                         std::span<const double> axis, const DarkCountConfig& dark);

/// Overlap coefficient sum_i min(p_i, q_i) of two mass vectors on one axis.
double overlap_coefficient(std::span<const double> p, std::span<const double> q);

// ---------------------------------------------------------------------------
// Quadratures

/// Log-likelihood of a quadrature sample under the m = 1 model. Caches
/// |phi_N(Q_i)|^2 for the data so repeated evaluation is a dense mat-vec.
class QuadratureLikelihood {
public:
    explicit QuadratureLikelihood(QuadratureSample data);

    LogLikelihood operator()(const ModelParams& params) const;
    /// Several parameter sets at once; markedly faster per set than calling
    /// operator() in a loop. Sets outside the model domain give -inf.
    std::vector<LogLikelihood> evaluate(std::span<const ModelParams> params) const;
    const QuadratureSample& data() const { return data_; }
    /// Extends the cached basis to cover photocounts 0..n_max.
    void reserve(int n_max) const;

private:
    QuadratureSample data_;
    mutable std::shared_mutex mutex_;
    mutable Eigen::MatrixXd basis_;  // basis_(i, N) = phi_N(Q_i)^2
};

LogLikelihood log_likelihood_quadrature(const ModelParams& params, const QuadratureSample& data);

/// 2x2 information over (M, mu0) of n quadrature readings, m = 1, K fixed.
Eigen::Matrix2d quadrature_fisher_information(const ModelParams& params, double n);

ConditionalEstimate conditional_mle_quadrature(Param target, const QuadratureLikelihood& likelihood,
                                               const ModelParams& fixed);

/// mu0 from the sample variance via mu = var - 1/2.
double quadrature_moment_mu0(const QuadratureSample& data, double M, int K);

/// Quadrature likelihood (times the prior on mu0 and M, if given) on a grid
/// with m = 1. Evaluated in batches along mu0.
ParameterGrid quadrature_grid(const QuadratureLikelihood& likelihood, const GridAxes& axes,
                              const PriorSpec* prior = nullptr);

struct QuadratureFit {
    PriorSpec prior;
    ParameterGrid grid;
    EstimateSummary summary;
    double moment_mu0 = 0.0;
};

/// Conditional-MLE priors for mu0 and M, then the posterior on a (mu0, M)
/// grid at K = theory.K and m = 1. Axes default to prior_axes(prior, nodes).
QuadratureFit quadrature_posterior(const QuadratureSample& data, const ModelParams& theory,
                                   std::optional<GridAxes> axes = std::nullopt, int nodes = 61);

/// Same pipeline on photocounts: priors, posterior grid, moments.
struct PhotocountFit {
    PriorSpec prior;
    ParameterGrid grid;
    EstimateSummary summary;
};
PhotocountFit bayesian_fit(const CountHistogram& data, const ModelParams& theory, const DarkCountConfig& dark,
                           int nodes = 61);

}  // namespace mpsts
