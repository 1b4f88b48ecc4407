#include "mpsts/estimation.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <numbers>
#include <numeric>

#include "mpsts/errors.hpp"
#include "mpsts/parallel.hpp"

namespace mpsts {

std::string_view param_name(Param p) {
    switch (p) {
        case Param::m: return "m";
        case Param::M: return "M";
        case Param::mu0: return "mu0";
        case Param::K: return "K";
    }
    return "?";
}

Param param_from_name(std::string_view name) {
    if (name == "m") return Param::m;
    if (name == "M") return Param::M;
    if (name == "mu0") return Param::mu0;
    if (name == "K") return Param::K;
    throw DomainError("unknown parameter '" + std::string(name) + "'");
}

double get_param(const ModelParams& params, Param p) {
    switch (p) {
        case Param::m: return params.m;
        case Param::M: return params.M;
        case Param::mu0: return params.mu0;
        case Param::K: return params.K;
    }
    return 0.0;
}

void set_param(ModelParams& params, Param p, double value) {
    switch (p) {
        case Param::m: params.m = value; break;
        case Param::M: params.M = value; break;
        case Param::mu0: params.mu0 = value; break;
        case Param::K: params.K = static_cast<int>(std::lround(value)); break;
    }
}

// ---------------------------------------------------------------------------
// Likelihood

std::vector<double> observed_pmf(const ModelParams& params, const DarkCountConfig& dark, int n_max) {
    if (n_max < 0) throw DomainError("observed_pmf: n_max must be nonnegative");
    std::vector<double> p(static_cast<std::size_t>(n_max) + 1);
    mpsts_pmf_into(params, p);
    if (dark.enabled()) dark_count_convolve_into(p, dark.mean_for(params.m));
    return p;
}

Pmf observed_pmf(const ModelParams& params, const DarkCountConfig& dark) {
    Pmf pmf = mpsts_pmf(params);
    return dark.enabled() ? dark_count_convolve(pmf, dark, params.m) : pmf;
}

namespace {

std::size_t trimmed_size(std::span<const double> counts) {
    std::size_t n = counts.size();
    while (n > 0 && counts[n - 1] == 0.0) --n;
    return n;
}

LogLikelihood accumulate(std::span<const double> counts, std::span<const double> p) {
    LogLikelihood ll;
    const double ln_floor = std::log(kProbabilityFloor);
    for (std::size_t n = 0; n < counts.size(); ++n) {
        if (counts[n] == 0.0) continue;
        if (p[n] >= kProbabilityFloor && std::isfinite(p[n])) {
            ll.value += counts[n] * std::log(p[n]);
        } else {
            ll.value += counts[n] * ln_floor;
            ++ll.floored_cells;
        }
    }
    return ll;
}

LogLikelihood photocount_ll(const ModelParams& params, std::span<const double> counts, const DarkCountConfig& dark,
                            std::vector<double>& buffer) {
    const std::size_t len = trimmed_size(counts);
    if (len == 0) throw PreconditionError("log-likelihood: data are empty");
    buffer.resize(len);
    mpsts_pmf_into(params, buffer);
    if (dark.enabled()) dark_count_convolve_into(buffer, dark.mean_for(params.m));
    return accumulate(counts.first(len), buffer);
}

}  // namespace

LogLikelihood log_likelihood_photocount(const ModelParams& params, std::span<const double> counts,
                                        const DarkCountConfig& dark) {
    std::vector<double> buffer;
    return photocount_ll(params, counts, dark, buffer);
}

LogLikelihood log_likelihood_photocount(const ModelParams& params, const CountHistogram& data,
                                        const DarkCountConfig& dark) {
    const auto w = data.weights();
    return log_likelihood_photocount(params, w, dark);
}

// ---------------------------------------------------------------------------
// Grids

std::vector<double> GridAxes::linspace(double lo, double hi, int nodes) {
    if (nodes < 1) throw DomainError("linspace: need at least one node");
    if (nodes == 1) return {lo};
    if (!(hi > lo)) throw DomainError("linspace: empty interval");
    std::vector<double> out(static_cast<std::size_t>(nodes));
    for (int i = 0; i < nodes; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (nodes - 1);
    return out;
}

std::vector<double> GridAxes::around(double center, double sigma, int nodes, double width, double floor) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("grid axis: sigma must be positive and finite");
    const double lo = std::max(floor, center - width * sigma);
    const double hi = center + width * sigma;
    if (!(hi > lo)) throw DomainError("grid axis: interval lies below the floor");
    return linspace(lo, hi, nodes);
}

namespace {

void check_axis(const std::vector<double>& axis, std::string_view name) {
    if (axis.empty()) throw DomainError("grid: axis " + std::string(name) + " is empty");
    for (std::size_t i = 1; i < axis.size(); ++i)
        if (!(axis[i] > axis[i - 1]))
            throw DomainError("grid: axis " + std::string(name) + " must be strictly increasing");
}

double spacing(const std::vector<double>& axis) {
    return axis.size() > 1 ? (axis.back() - axis.front()) / static_cast<double>(axis.size() - 1) : 1.0;
}

}  // namespace

void GridAxes::validate() const {
    check_axis(mu0, "mu0");
    check_axis(m, "m");
    check_axis(M, "M");
    if (K.empty()) throw DomainError("grid: K axis is empty");
    for (std::size_t i = 0; i < K.size(); ++i) {
        if (K[i] < 0) throw DomainError("grid: K must be nonnegative");
        if (i > 0 && K[i] != K[i - 1] + 1) throw DomainError("grid: K values must be consecutive");
    }
}

ParameterGrid::ParameterGrid(GridAxes axes, std::vector<double> log_target) : axes_(std::move(axes)) {
    axes_.validate();
    if (log_target.size() != axes_.size()) throw DomainError("grid: log target size does not match the axes");
    log_density_ = std::move(log_target);
    log_max_ = -std::numeric_limits<double>::infinity();
    argmax_ = 0;
    for (std::size_t i = 0; i < log_density_.size(); ++i) {
        if (std::isnan(log_density_[i])) log_density_[i] = -std::numeric_limits<double>::infinity();
        if (log_density_[i] > log_max_) {
            log_max_ = log_density_[i];
            argmax_ = i;
        }
    }
    if (!std::isfinite(log_max_)) throw DomainError("grid: no node has a finite log density");
    density_.resize(log_density_.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < log_density_.size(); ++i) {
        log_density_[i] -= log_max_;
        density_[i] = std::exp(log_density_[i]);
        sum += density_[i];
    }
    normalization_ = 1.0 / (sum * cell_volume());
    for (double& d : density_) d *= normalization_;
}

double ParameterGrid::cell_volume() const {
    return spacing(axes_.mu0) * spacing(axes_.m) * spacing(axes_.M);
}

std::size_t ParameterGrid::flat(const Index& idx) const {
    return ((idx.K * axes_.m.size() + idx.m) * axes_.M.size() + idx.M) * axes_.mu0.size() + idx.mu0;
}

ParameterGrid::Index ParameterGrid::unflat(std::size_t i) const {
    Index idx;
    idx.mu0 = i % axes_.mu0.size();
    i /= axes_.mu0.size();
    idx.M = i % axes_.M.size();
    i /= axes_.M.size();
    idx.m = i % axes_.m.size();
    idx.K = i / axes_.m.size();
    return idx;
}

ModelParams ParameterGrid::params_at(std::size_t i) const {
    const Index idx = unflat(i);
    return {axes_.mu0[idx.mu0], axes_.m[idx.m], axes_.M[idx.M], axes_.K[idx.K]};
}

namespace {

bool on_end(std::size_t i, std::size_t size) { return size > 1 && (i == 0 || i + 1 == size); }

}  // namespace

bool ParameterGrid::max_on_boundary() const {
    const Index idx = unflat(argmax_);
    return on_end(idx.mu0, axes_.mu0.size()) || on_end(idx.m, axes_.m.size()) || on_end(idx.M, axes_.M.size()) ||
           on_end(idx.K, axes_.K.size());
}

std::vector<std::string> ParameterGrid::warnings() const {
    std::vector<std::string> out;
    if (!max_on_boundary()) return out;
    const Index idx = unflat(argmax_);
    std::string axes;
    auto note = [&](bool hit, std::string_view name) {
        if (!hit) return;
        if (!axes.empty()) axes += ",";
        axes += name;
    };
    note(on_end(idx.m, axes_.m.size()), "m");
    note(on_end(idx.M, axes_.M.size()), "M");
    note(on_end(idx.mu0, axes_.mu0.size()), "mu0");
    note(on_end(idx.K, axes_.K.size()), "K");
    out.push_back("grid maximum lies on the boundary of axis " + axes);
    return out;
}

std::size_t ParameterGrid::axis_size(Param p) const {
    switch (p) {
        case Param::m: return axes_.m.size();
        case Param::M: return axes_.M.size();
        case Param::mu0: return axes_.mu0.size();
        case Param::K: return axes_.K.size();
    }
    return 0;
}

std::vector<double> ParameterGrid::axis(Param p) const {
    switch (p) {
        case Param::m: return axes_.m;
        case Param::M: return axes_.M;
        case Param::mu0: return axes_.mu0;
        case Param::K: return {axes_.K.begin(), axes_.K.end()};
    }
    return {};
}

std::vector<double> ParameterGrid::marginal(Param p) const {
    std::vector<double> mass(axis_size(p), 0.0);
    const double dv = cell_volume();
    for (std::size_t i = 0; i < density_.size(); ++i) {
        const Index idx = unflat(i);
        const std::size_t a = p == Param::m ? idx.m : p == Param::M ? idx.M : p == Param::mu0 ? idx.mu0 : idx.K;
        mass[a] += density_[i] * dv;
    }
    return mass;
}

std::vector<std::size_t> ParameterGrid::half_max_boundary() const {
    std::vector<std::size_t> out;
    const double half = 0.5 * density_[argmax_];
    const std::array<std::size_t, 3> sizes = {axes_.mu0.size(), axes_.M.size(), axes_.m.size()};
    const std::array<std::size_t, 3> strides = {1, axes_.mu0.size(), axes_.mu0.size() * axes_.M.size()};
    for (std::size_t i = 0; i < density_.size(); ++i) {
        if (density_[i] < half) continue;
        const Index idx = unflat(i);
        const std::array<std::size_t, 3> pos = {idx.mu0, idx.M, idx.m};
        bool edge = false;
        for (std::size_t a = 0; a < 3 && !edge; ++a) {
            if (sizes[a] == 1) continue;
            if (pos[a] == 0 || pos[a] + 1 == sizes[a]) {
                edge = true;
                break;
            }
            if (density_[i - strides[a]] < half || density_[i + strides[a]] < half) edge = true;
        }
        if (edge) out.push_back(i);
    }
    return out;
}

ParameterGrid evaluate_grid(const GridAxes& axes, const std::function<double(const ModelParams&)>& log_target) {
    axes.validate();
    std::vector<double> values(axes.size());
    const ParameterGrid shape(axes, std::vector<double>(axes.size(), 0.0));
    parallel_for(values.size(), 256, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                values[i] = log_target(shape.params_at(i));
            } catch (const DomainError&) {
                values[i] = -std::numeric_limits<double>::infinity();
            }
        }
    });
    return ParameterGrid(axes, std::move(values));
}

namespace {

ParameterGrid likelihood_grid(std::span<const double> counts, const GridAxes& axes, const DarkCountConfig& dark,
                              const std::function<double(const ModelParams&)>& log_prior_fn) {
    if (trimmed_size(counts) == 0) throw PreconditionError("fiducial grid: data are empty");
    return evaluate_grid(axes, [&](const ModelParams& p) {
        thread_local std::vector<double> buffer;
        double v = photocount_ll(p, counts, dark, buffer).value;
        if (log_prior_fn) v += log_prior_fn(p);
        return v;
    });
}

}  // namespace

ParameterGrid fiducial_grid(std::span<const double> counts, const GridAxes& axes, const DarkCountConfig& dark) {
    return likelihood_grid(counts, axes, dark, nullptr);
}

ParameterGrid fiducial_grid(const CountHistogram& data, const GridAxes& axes, const DarkCountConfig& dark) {
    const auto w = data.weights();
    return fiducial_grid(w, axes, dark);
}

std::vector<double> conditional_fiducial(std::span<const double> counts, Param target, const ModelParams& fixed,
                                         std::span<const double> axis, const DarkCountConfig& dark) {
    GridAxes axes{{fixed.mu0}, {fixed.m}, {fixed.M}, {fixed.K}};
    if (target == Param::K) {
        axes.K.clear();
        for (double k : axis) axes.K.push_back(static_cast<int>(std::lround(k)));
    } else {
        std::vector<double> values(axis.begin(), axis.end());
        if (target == Param::m) axes.m = values;
        if (target == Param::M) axes.M = values;
        if (target == Param::mu0) axes.mu0 = values;
    }
    return fiducial_grid(counts, axes, dark).marginal(target);
}

// ---------------------------------------------------------------------------
// Information

Eigen::MatrixXd InfoMatrix::reduced(std::span<const Param> params) const {
    const auto d = static_cast<Eigen::Index>(params.size());
    Eigen::MatrixXd out(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            out(i, j) = entries(index_of(params[static_cast<std::size_t>(i)]),
                                index_of(params[static_cast<std::size_t>(j)]));
    return out;
}

namespace {

double fd_step(double value, double scale) { return scale * std::max(kRelativeStep * std::abs(value), kAbsoluteStepFloor); }

int fisher_support(const ModelParams& params, const DarkCountConfig& dark) {
    // Tail mass below 1e-12 is invisible in the information; a tighter
    // tolerance can fail against rounding in the prefix sum.
    int n_max = adaptive_n_max(params, 1e-12) + 4;
    if (dark.enabled()) n_max += 8;
    return n_max;
}

}  // namespace

std::array<std::vector<double>, 3> pmf_gradient(const ModelParams& params, const DarkCountConfig& dark, int n_max,
                                                double step_scale) {
    std::array<std::vector<double>, 3> grad;
    // On the m == M manifold the law depends on M + K only: dP/dm is left at
    // zero and dP/dM moves both together.
    const bool joined = params.M - params.m < kPoleUnsafe;
    for (Param p : kContinuousParams) {
        auto& g = grad[static_cast<std::size_t>(InfoMatrix::index_of(p))];
        if (joined && p == Param::m) {
            g.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
            continue;
        }
        const double u = get_param(params, p);
        const double h = fd_step(u, step_scale);
        ModelParams hi = params, lo = params;
        set_param(hi, p, u + h);
        set_param(lo, p, u - h);
        if (joined && p == Param::M) {
            hi.m = hi.M;
            lo.m = lo.M;
        }
        const auto ph = observed_pmf(hi, dark, n_max);
        const auto pl = observed_pmf(lo, dark, n_max);
        g.resize(ph.size());
        for (std::size_t n = 0; n < ph.size(); ++n) g[n] = (ph[n] - pl[n]) / (2.0 * h);
    }
    return grad;
}

InfoMatrix fisher_information(const ModelParams& params, double n, const DarkCountConfig& dark) {
    params.validate();
    const int n_max = fisher_support(params, dark);
    const auto p = observed_pmf(params, dark, n_max);
    const auto g = pmf_gradient(params, dark, n_max);
    InfoMatrix info;
    info.n = n;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (!(p[k] > 0.0)) continue;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j <= i; ++j) info.entries(i, j) += g[i][k] * g[j][k] / p[k];
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < i; ++j) info.entries(j, i) = info.entries(i, j);
    info.entries *= n;
    return info;
}

double condition_number(const Eigen::MatrixXd& matrix) {
    if (matrix.rows() != matrix.cols() || matrix.rows() == 0) throw DomainError("condition number: matrix must be square");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix);
    if (solver.info() != Eigen::Success) throw ConvergenceError("condition number: eigen decomposition failed");
    const auto& ev = solver.eigenvalues();
    const double lmin = ev.minCoeff();
    const double lmax = ev.maxCoeff();
    if (!(lmin > 1e-14 * std::abs(lmax))) throw DomainError("condition number: matrix is not positive definite");
    return lmax / lmin;
}

double condition_number(const InfoMatrix& matrix) { return condition_number(Eigen::MatrixXd(matrix.entries)); }

// ---------------------------------------------------------------------------
// Multi-parameter MLE

namespace {

struct Bounds {
    double lo, hi;
};

Bounds box(Param p, const ModelParams& at) {
    switch (p) {
        case Param::mu0: return {1e-9, 1e6};
        case Param::m: return {1e-6, at.M - 2.0 * kPoleUnsafe};
        case Param::M: return {at.m + 2.0 * kPoleUnsafe, kMaxModes};
        default: return {0.0, 0.0};
    }
}

}  // namespace

MleResult fit_mle(std::span<const double> counts, const ModelParams& start, std::span<const Param> free,
                  const DarkCountConfig& dark, int max_iterations) {
    const std::size_t len = trimmed_size(counts);
    if (len == 0) throw PreconditionError("fit: data are empty");
    if (free.empty()) throw PreconditionError("fit: no free parameters");
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const auto d = static_cast<Eigen::Index>(free.size());

    MleResult res;
    res.params = start;
    std::vector<double> buffer;
    auto ll = [&](const ModelParams& p) {
        try {
            return photocount_ll(p, counts, dark, buffer).value;
        } catch (const DomainError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    double current = ll(res.params);
    if (!std::isfinite(current)) throw DomainError("fit: start point is outside the model domain");

    for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
        const int n_max = std::max(static_cast<int>(len) - 1, fisher_support(res.params, dark));
        const auto p = observed_pmf(res.params, dark, n_max);
        const auto g = pmf_gradient(res.params, dark, n_max);
        Eigen::VectorXd score = Eigen::VectorXd::Zero(d);
        Eigen::MatrixXd info = Eigen::MatrixXd::Zero(d, d);
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (!(p[k] > 0.0)) continue;
            for (Eigen::Index i = 0; i < d; ++i) {
                const auto gi = g[static_cast<std::size_t>(InfoMatrix::index_of(free[static_cast<std::size_t>(i)]))][k];
                if (k < len) score(i) += counts[k] * gi / p[k];
                for (Eigen::Index j = 0; j <= i; ++j) {
                    const auto gj =
                        g[static_cast<std::size_t>(InfoMatrix::index_of(free[static_cast<std::size_t>(j)]))][k];
                    info(i, j) += total * gi * gj / p[k];
                }
            }
        }
        info = info.selfadjointView<Eigen::Lower>();
        Eigen::VectorXd step = info.ldlt().solve(score);
        if (!step.allFinite()) step = score / info.diagonal().maxCoeff();

        // Backtrack inside the feasible box.
        double t = 1.0;
        bool improved = false;
        bool clipped = false;
        ModelParams trial = res.params;
        double trial_ll = current;
        for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
            trial = res.params;
            clipped = false;
            for (Eigen::Index i = 0; i < d; ++i) {
                const Param prm = free[static_cast<std::size_t>(i)];
                const Bounds b = box(prm, trial);
                double v = get_param(res.params, prm) + t * step(i);
                if (v < b.lo || v > b.hi) clipped = true;
                set_param(trial, prm, std::clamp(v, b.lo, b.hi));
            }
            trial_ll = ll(trial);
            if (trial_ll >= current) {
                improved = true;
                break;
            }
        }
        if (!improved) {
            res.converged = true;
            break;
        }
        const double gain = trial_ll - current;
        double rel_step = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            const Param prm = free[static_cast<std::size_t>(i)];
            rel_step = std::max(rel_step, std::abs(get_param(trial, prm) - get_param(res.params, prm)) /
                                              std::max(1e-12, std::abs(get_param(res.params, prm))));
        }
        res.params = trial;
        current = trial_ll;
        res.at_bound = clipped;
        if (rel_step < 1e-10 || gain <= 1e-13 * std::max(1.0, std::abs(current))) {
            res.converged = true;
            break;
        }
    }
    res.log_likelihood = current;
    return res;
}

// ---------------------------------------------------------------------------
// One-dimensional maximization and conditional MLE

Maximum1d maximize_1d(const std::function<double(double)>& f, double lo, double hi, int scan_points,
                      int max_iterations) {
    if (!(hi > lo)) throw DomainError("maximize: empty interval");
    scan_points = std::max(scan_points, 3);
    auto safe = [&](double x) {
        const double v = f(x);
        return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
    };
    std::vector<double> xs(static_cast<std::size_t>(scan_points)), vs(xs.size());
    int best = 0;
    for (int i = 0; i < scan_points; ++i) {
        xs[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (scan_points - 1);
        vs[static_cast<std::size_t>(i)] = safe(xs[static_cast<std::size_t>(i)]);
        if (vs[static_cast<std::size_t>(i)] > vs[static_cast<std::size_t>(best)]) best = i;
    }
    if (!std::isfinite(vs[static_cast<std::size_t>(best)])) throw ConvergenceError("maximize: objective is nowhere finite");
    const double a = xs[static_cast<std::size_t>(std::max(best - 1, 0))];
    const double b = xs[static_cast<std::size_t>(std::min(best + 1, scan_points - 1))];
    std::uintmax_t iters = static_cast<std::uintmax_t>(max_iterations);
    const auto [x, neg] = boost::math::tools::brent_find_minima([&](double v) { return -safe(v); }, a, b, 50, iters);
    if (iters >= static_cast<std::uintmax_t>(max_iterations))
        throw ConvergenceError("maximize: Brent iteration limit reached");
    Maximum1d out;
    out.x = x;
    out.value = -neg;
    out.iterations = static_cast<int>(iters);
    const double tol = 1e-6 * (hi - lo);
    out.at_edge = (best == 0 && x - lo < tol) || (best == scan_points - 1 && hi - x < tol);
    return out;
}

std::pair<double, double> conditional_bracket(Param target, const ModelParams& fixed) {
    switch (target) {
        case Param::m: return {1e-3, fixed.M - kPoleUnsafe};
        case Param::M: return {fixed.m + kPoleUnsafe, std::max(4.0 * fixed.M, fixed.M + 20.0)};
        case Param::mu0: return {fixed.mu0 / 20.0, fixed.mu0 * 20.0};
        case Param::K: break;
    }
    throw PreconditionError("conditional MLE: K is not a continuous parameter");
}

ConditionalEstimate conditional_mle(Param target, const CountHistogram& data, const ModelParams& fixed,
                                    const DarkCountConfig& dark) {
    if (data.empty()) throw PreconditionError("conditional MLE: data are empty");
    const auto w = data.weights();
    std::vector<double> buffer;
    auto f = [&](double x) {
        ModelParams p = fixed;
        set_param(p, target, x);
        try {
            return photocount_ll(p, w, dark, buffer).value;
        } catch (const DomainError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    const auto [lo, hi] = conditional_bracket(target, fixed);
    const Maximum1d best = maximize_1d(f, lo, hi, 64);
    ModelParams at = fixed;
    set_param(at, target, best.x);
    const InfoMatrix info = fisher_information(at, static_cast<double>(data.total()), dark);
    ConditionalEstimate out;
    out.estimate = best.x;
    out.sigma = 1.0 / std::sqrt(info(target, target));
    out.iterations = best.iterations;
    out.at_bracket_edge = best.at_edge;
    return out;
}

// ---------------------------------------------------------------------------
// Priors and posteriors

double NormalPrior::log_pdf(double x) const {
    if (flat()) return 0.0;
    if (point()) return x == mean ? 0.0 : -std::numeric_limits<double>::infinity();
    const double z = (x - mean) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

const NormalPrior& PriorSpec::operator[](Param p) const {
    switch (p) {
        case Param::m: return m;
        case Param::M: return M;
        case Param::mu0: return mu0;
        case Param::K: break;
    }
    throw PreconditionError("prior: K has no normal prior");
}

NormalPrior& PriorSpec::operator[](Param p) { return const_cast<NormalPrior&>(std::as_const(*this)[p]); }

void PriorSpec::validate() const {
    for (Param p : kContinuousParams) {
        const NormalPrior& n = (*this)[p];
        if (std::isnan(n.sigma) || n.sigma < 0.0 || !std::isfinite(n.mean))
            throw DomainError("prior on " + std::string(param_name(p)) + " is invalid");
    }
    if (K_fixed < 0) throw DomainError("prior: K must be nonnegative");
}

PriorSpec build_prior(const CountHistogram& data, const ModelParams& theory, const DarkCountConfig& dark) {
    theory.validate();
    PriorSpec prior;
    for (Param p : kContinuousParams) {
        const ConditionalEstimate c = conditional_mle(p, data, theory, dark);
        prior[p] = {c.estimate, c.sigma};
    }
    prior.K_fixed = theory.K;
    return prior;
}

GridAxes prior_axes(const PriorSpec& prior, int nodes, double width) {
    prior.validate();
    GridAxes axes;
    auto make = [&](Param p) {
        const NormalPrior& n = prior[p];
        if (n.point()) return std::vector<double>{n.mean};
        if (n.flat()) throw PreconditionError("grid: a flat prior needs explicit axes for " + std::string(param_name(p)));
        return GridAxes::around(n.mean, n.sigma, nodes, width);
    };
    axes.mu0 = make(Param::mu0);
    axes.m = make(Param::m);
    axes.M = make(Param::M);
    axes.K = {prior.K_fixed};
    return axes;
}

double log_prior(const PriorSpec& prior, const ModelParams& params) {
    return prior.mu0.log_pdf(params.mu0) + prior.m.log_pdf(params.m) + prior.M.log_pdf(params.M);
}

ParameterGrid posterior_grid(const CountHistogram& data, const PriorSpec& prior, const GridAxes& axes,
                             const DarkCountConfig& dark) {
    prior.validate();
    GridAxes a = axes;
    a.K = {prior.K_fixed};
    if (prior.mu0.point()) a.mu0 = {prior.mu0.mean};
    if (prior.m.point()) a.m = {prior.m.mean};
    if (prior.M.point()) a.M = {prior.M.mean};
    const auto w = data.weights();
    return likelihood_grid(w, a, dark, [&](const ModelParams& p) { return log_prior(prior, p); });
}

const Moment& EstimateSummary::operator[](Param p) const {
    switch (p) {
        case Param::m: return m;
        case Param::M: return M;
        case Param::mu0: return mu0;
        case Param::K: return K;
    }
    return K;
}

Moment& EstimateSummary::operator[](Param p) { return const_cast<Moment&>(std::as_const(*this)[p]); }

ModelParams EstimateSummary::point_estimate(int K_fallback) const {
    return {mu0.mean, m.mean, M.mean, K.varied ? static_cast<int>(std::lround(K.mean)) : K_fallback};
}

EstimateSummary posterior_moments(const ParameterGrid& grid, const ModelParams& reference) {
    EstimateSummary s;
    for (Param p : {Param::m, Param::M, Param::mu0, Param::K}) {
        const auto mass = grid.marginal(p);
        const auto x = grid.axis(p);
        const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
        double mean = 0.0, sq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) mean += mass[i] * x[i];
        mean /= total;
        for (std::size_t i = 0; i < x.size(); ++i) sq += mass[i] * (x[i] - mean) * (x[i] - mean);
        Moment& mo = s[p];
        mo.mean = mean;
        mo.sd = std::sqrt(sq / total);
        mo.varied = x.size() > 1;
        const double ref = get_param(reference, p);
        if (mo.varied && ref > 0.0) s.delta = std::max(s.delta, mo.sd / ref);
    }
    return s;
}

InfoMatrix posterior_information(const InfoMatrix& fisher, const PriorSpec& prior) {
    InfoMatrix out = fisher;
    for (Param p : kContinuousParams) {
        const double sigma = prior[p].sigma;
        if (!(sigma > 0.0)) throw PreconditionError("posterior information: prior sigmas must be positive");
        const int i = InfoMatrix::index_of(p);
        out.entries(i, i) += 1.0 / (sigma * sigma);
    }
    return out;
}

double overlap_coefficient(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw DomainError("overlap: mass vectors differ in length");
    const double sp = std::accumulate(p.begin(), p.end(), 0.0);
    const double sq = std::accumulate(q.begin(), q.end(), 0.0);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::min(p[i] / sp, q[i] / sq);
    return s;
}

PhotocountFit bayesian_fit(const CountHistogram& data, const ModelParams& theory, const DarkCountConfig& dark,
                           int nodes) {
    PhotocountFit fit;
    fit.prior = build_prior(data, theory, dark);
    fit.grid = posterior_grid(data, fit.prior, prior_axes(fit.prior, nodes), dark);
    fit.summary = posterior_moments(fit.grid, theory);
    return fit;
}

}  // namespace mpsts
