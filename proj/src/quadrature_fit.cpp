#include <algorithm>
#include <mutex>

#include "mpsts/errors.hpp"
#include "mpsts/parallel.hpp"
#include "mpsts/estimation.hpp"
#include "mpsts/specfun.hpp"

namespace mpsts {

namespace {

void require_single_mode(const ModelParams& params) {
    if (params.m != 1.0) throw PreconditionError("quadrature likelihood requires m = 1");
}

}  // namespace

QuadratureLikelihood::QuadratureLikelihood(QuadratureSample data) : data_(std::move(data)) {
    if (data_.empty()) throw PreconditionError("quadrature likelihood: data are empty");
}

void QuadratureLikelihood::reserve(int n_max) const {
    {
        std::shared_lock lock(mutex_);
        if (basis_.cols() > n_max) return;
    }
    std::unique_lock lock(mutex_);
    if (basis_.cols() > n_max) return;
    if (n_max > specfun::kMaxHermiteIndex) throw DomainError("quadrature likelihood: photocount support too large");
    // Grow in steps so a slowly widening support does not rebuild every call.
    const int target = std::min(specfun::kMaxHermiteIndex, std::max(n_max, 2 * static_cast<int>(basis_.cols())));
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(data_.size()), target + 1);
    std::vector<double> phi(static_cast<std::size_t>(target) + 1);
    for (std::size_t i = 0; i < data_.size(); ++i) {
        specfun::hermite_phi_all(target, data_.values[i], phi);
        for (int n = 0; n <= target; ++n)
            basis(static_cast<Eigen::Index>(i), n) = phi[static_cast<std::size_t>(n)] * phi[static_cast<std::size_t>(n)];
    }
    basis_ = std::move(basis);
}

LogLikelihood QuadratureLikelihood::operator()(const ModelParams& params) const {
    require_single_mode(params);
    return evaluate(std::span(&params, 1)).front();
}

std::vector<LogLikelihood> QuadratureLikelihood::evaluate(std::span<const ModelParams> params) const {
    const auto count = static_cast<Eigen::Index>(params.size());
    std::vector<LogLikelihood> out(params.size());
    std::vector<Pmf> pmfs(params.size());
    std::vector<bool> valid(params.size(), false);
    int n_max = 0;
    for (std::size_t j = 0; j < params.size(); ++j) {
        require_single_mode(params[j]);
        try {
            pmfs[j] = mpsts_pmf(params[j]);
            valid[j] = true;
            n_max = std::max(n_max, pmfs[j].n_max());
        } catch (const DomainError&) {
            out[j].value = -std::numeric_limits<double>::infinity();
        }
    }
    reserve(n_max);
    Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(n_max + 1, count);
    for (std::size_t j = 0; j < params.size(); ++j)
        for (std::size_t n = 0; valid[j] && n < pmfs[j].size(); ++n)
            weights(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = pmfs[j][n];

    const double ln_floor = std::log(kProbabilityFloor);
    std::shared_lock lock(mutex_);
    constexpr Eigen::Index kBlock = 4096;
    const auto rows = basis_.rows();
    Eigen::MatrixXd density;
    for (Eigen::Index r0 = 0; r0 < rows; r0 += kBlock) {
        const Eigen::Index nr = std::min(kBlock, rows - r0);
        density.noalias() = basis_.block(r0, 0, nr, n_max + 1) * weights;
        for (Eigen::Index j = 0; j < count; ++j) {
            if (!valid[static_cast<std::size_t>(j)]) continue;
            LogLikelihood& ll = out[static_cast<std::size_t>(j)];
            for (Eigen::Index i = 0; i < nr; ++i) {
                const double d = density(i, j);
                if (d >= kProbabilityFloor) {
                    ll.value += std::log(d);
                } else {
                    ll.value += ln_floor;
                    ++ll.floored_cells;
                }
            }
        }
    }
    return out;
}

LogLikelihood log_likelihood_quadrature(const ModelParams& params, const QuadratureSample& data) {
    require_single_mode(params);
    if (data.empty()) throw PreconditionError("quadrature likelihood: data are empty");
    const QuadratureDensity density(params);
    LogLikelihood ll;
    const double ln_floor = std::log(kProbabilityFloor);
    for (double q : data.values) {
        const double d = density(q);
        if (d >= kProbabilityFloor) {
            ll.value += std::log(d);
        } else {
            ll.value += ln_floor;
            ++ll.floored_cells;
        }
    }
    return ll;
}

Eigen::Matrix2d quadrature_fisher_information(const ModelParams& params, double n) {
    require_single_mode(params);
    params.validate();
    const int n_max = adaptive_n_max(params, 1e-12) + 4;
    const auto p = observed_pmf(params, DarkCountConfig::none(), n_max);
    const auto g = pmf_gradient(params, DarkCountConfig::none(), n_max);
    const auto& gM = g[static_cast<std::size_t>(InfoMatrix::index_of(Param::M))];
    const auto& gmu = g[static_cast<std::size_t>(InfoMatrix::index_of(Param::mu0))];

    constexpr double h = 0.01;
    const double limit = std::sqrt(2.0 * n_max + 1.0) + 6.0;
    const int steps = static_cast<int>(std::ceil(2.0 * limit / h));
    std::vector<double> phi(static_cast<std::size_t>(n_max) + 1);
    Eigen::Matrix2d info = Eigen::Matrix2d::Zero();
    for (int s = 0; s <= steps; ++s) {
        const double q = -limit + s * h;
        specfun::hermite_phi_all(n_max, q, phi);
        double dens = 0.0, dM = 0.0, dmu = 0.0;
        for (int k = 0; k <= n_max; ++k) {
            const double b = phi[static_cast<std::size_t>(k)] * phi[static_cast<std::size_t>(k)];
            dens += p[static_cast<std::size_t>(k)] * b;
            dM += gM[static_cast<std::size_t>(k)] * b;
            dmu += gmu[static_cast<std::size_t>(k)] * b;
        }
        if (!(dens > 0.0)) continue;
        const double w = (s == 0 || s == steps ? 0.5 : 1.0) * h / dens;
        info(0, 0) += w * dM * dM;
        info(0, 1) += w * dM * dmu;
        info(1, 1) += w * dmu * dmu;
    }
    info(1, 0) = info(0, 1);
    return n * info;
}

ConditionalEstimate conditional_mle_quadrature(Param target, const QuadratureLikelihood& likelihood,
                                               const ModelParams& fixed) {
    require_single_mode(fixed);
    if (target != Param::M && target != Param::mu0)
        throw PreconditionError("quadrature conditional MLE: target must be M or mu0");
    auto f = [&](double x) {
        ModelParams p = fixed;
        set_param(p, target, x);
        try {
            return likelihood(p).value;
        } catch (const DomainError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    auto [lo, hi] = conditional_bracket(target, fixed);
    if (target == Param::mu0) hi = std::min(hi, fixed.mu0 * 5.0);
    const Maximum1d best = maximize_1d(f, lo, hi, 48);
    ModelParams at = fixed;
    set_param(at, target, best.x);
    const Eigen::Matrix2d info = quadrature_fisher_information(at, static_cast<double>(likelihood.data().size()));
    const int i = target == Param::M ? 0 : 1;
    ConditionalEstimate out;
    out.estimate = best.x;
    out.sigma = 1.0 / std::sqrt(info(i, i));
    out.iterations = best.iterations;
    out.at_bracket_edge = best.at_edge;
    return out;
}

double quadrature_moment_mu0(const QuadratureSample& data, double M, int K) {
    if (data.size() < 2) throw PreconditionError("quadrature moments: need at least two readings");
    return mu0_from_mean(data.variance() - 0.5, 1.0, M, K);
}

ParameterGrid quadrature_grid(const QuadratureLikelihood& likelihood, const GridAxes& axes, const PriorSpec* prior) {
    axes.validate();
    if (axes.m != std::vector<double>{1.0}) throw PreconditionError("quadrature grid requires m = 1");
    // One batch per (K, M) row; mu0 runs fastest in the grid layout.
    std::vector<double> values(axes.size());
    const std::size_t row = axes.mu0.size();
    const std::size_t rows = axes.K.size() * axes.M.size();
    parallel_for(rows, 1, [&](std::size_t begin, std::size_t end) {
        std::vector<ModelParams> batch(row);
        for (std::size_t r = begin; r < end; ++r) {
            const int K = axes.K[r / axes.M.size()];
            const double M = axes.M[r % axes.M.size()];
            for (std::size_t i = 0; i < row; ++i) batch[i] = {axes.mu0[i], 1.0, M, K};
            const auto ll = likelihood.evaluate(batch);
            for (std::size_t i = 0; i < row; ++i) {
                double v = ll[i].value;
                if (prior) v += prior->mu0.log_pdf(axes.mu0[i]) + prior->M.log_pdf(M);
                values[r * row + i] = v;
            }
        }
    });
    return ParameterGrid(axes, std::move(values));
}

QuadratureFit quadrature_posterior(const QuadratureSample& data, const ModelParams& theory,
                                   std::optional<GridAxes> axes, int nodes) {
    require_single_mode(theory);
    theory.validate();
    const QuadratureLikelihood likelihood(data);
    QuadratureFit fit;
    fit.moment_mu0 = quadrature_moment_mu0(data, theory.M, theory.K);

    for (Param p : {Param::mu0, Param::M}) {
        const ConditionalEstimate c = conditional_mle_quadrature(p, likelihood, theory);
        fit.prior[p] = {c.estimate, c.sigma};
    }
    fit.prior.m = {1.0, 0.0};
    fit.prior.K_fixed = theory.K;

    GridAxes a = axes ? *axes : prior_axes(fit.prior, nodes);
    a.m = {1.0};
    a.K = {theory.K};
    fit.grid = quadrature_grid(likelihood, a, &fit.prior);
    fit.summary = posterior_moments(fit.grid, theory);
    return fit;
}

}  // namespace mpsts
