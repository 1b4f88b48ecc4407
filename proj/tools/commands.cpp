#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include "mpsts/errors.hpp"
#include "mpsts/io.hpp"

namespace fs = std::filesystem;

namespace mpsts::cli {

namespace {

constexpr double kWidth = 6.0;
constexpr double kSliceWindow = 50.0;

double lower_limit(Param p) { return p == Param::mu0 ? 1e-6 : 1e-3; }
double upper_limit(Param p) { return p == Param::mu0 ? 1e3 : kMaxModes; }

std::vector<double>& axis_ref(GridAxes& axes, Param p) {
    switch (p) {
        case Param::m: return axes.m;
        case Param::M: return axes.M;
        default: return axes.mu0;
    }
}

std::pair<double, double> parse_range(const std::string& text, const std::string& name) {
    const auto colon = text.find(':');
    try {
        if (colon == std::string::npos) throw std::invalid_argument("");
        std::size_t used = 0;
        const double lo = std::stod(text.substr(0, colon), &used);
        const double hi = std::stod(text.substr(colon + 1));
        if (!(lo <= hi)) throw std::invalid_argument("");
        return {lo, hi};
    } catch (const std::invalid_argument&) {
        throw PreconditionError("--" + name + "-range expects lo:hi with lo <= hi, got '" + text + "'");
    }
}

void apply_ranges(GridAxes& axes, const std::map<std::string, std::string>& ranges, int nodes) {
    for (const auto& [name, text] : ranges) {
        if (text.empty()) continue;
        const auto [lo, hi] = parse_range(text, name);
        if (name == "K") {
            axes.K.clear();
            for (int k = static_cast<int>(std::ceil(lo)); k <= static_cast<int>(std::floor(hi)); ++k) axes.K.push_back(k);
            if (axes.K.empty() || axes.K.front() < 0) throw PreconditionError("--K-range must contain a K >= 0");
        } else {
            axis_ref(axes, param_from_name(name)) = lo == hi ? std::vector<double>{lo} : GridAxes::linspace(lo, hi, nodes);
        }
    }
}

double data_mean(std::span<const double> counts) {
    double n = 0.0, s = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        n += counts[i];
        s += counts[i] * static_cast<double>(i);
    }
    return n > 0.0 ? s / n : 0.0;
}

double total(std::span<const double> counts) {
    double n = 0.0;
    for (double c : counts) n += c;
    return n;
}

Json information_json(const Eigen::MatrixXd& m, std::span<const Param> order) {
    Json j = Json::object();
    std::vector<std::string> names;
    for (Param p : order) names.emplace_back(param_name(p));
    j["order"] = names;
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    j["matrix"] = rows;
    try {
        j["condition_number"] = condition_number(m);
    } catch (const DomainError&) {
        j["condition_number"] = nullptr;
    }
    return j;
}

void check_boundary(RunReport& report, const ParameterGrid& grid, bool allow) {
    for (const auto& w : grid.warnings()) report.warn(w, !allow);
}

Json input_json(const std::string& path) {
    return Json{{"path", path}, {"digest", file_digest(path)}};
}

ModelParams with_fixed(ModelParams p, const std::map<Param, double>& fixed) {
    for (const auto& [q, v] : fixed) set_param(p, q, v);
    return p;
}

std::vector<Param> free_of(const std::map<Param, double>& fixed, std::span<const Param> candidates) {
    std::vector<Param> out;
    for (Param p : candidates)
        if (!fixed.contains(p)) out.push_back(p);
    return out;
}

io::Metadata params_metadata(const ModelParams& p) {
    return {{"mu0", io::format_double(p.mu0)},
            {"m", io::format_double(p.m)},
            {"M", io::format_double(p.M)},
            {"K", std::to_string(p.K)}};
}

}  // namespace

ModelParams TheoryFlags::resolve(const ModelParams& defaults) const {
    ModelParams p = defaults;
    if (mu0) p.mu0 = *mu0;
    if (m) p.m = *m;
    if (M) p.M = *M;
    if (K) p.K = *K;
    p.validate();
    return p;
}

PriorMode parse_prior_mode(const std::string& text) {
    PriorMode mode;
    if (text == "bayes") return mode;
    if (text == "none") {
        mode.kind = PriorMode::Kind::none;
        return mode;
    }
    const std::string prefix = "fixed:";
    if (text.rfind(prefix, 0) != 0)
        throw PreconditionError("--prior expects none, bayes or fixed:<param=value,...>, got '" + text + "'");
    mode.kind = PriorMode::Kind::fixed;
    std::stringstream list(text.substr(prefix.size()));
    std::string item;
    while (std::getline(list, item, ',')) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw PreconditionError("--prior fixed: entry '" + item + "' lacks '='");
        const Param p = param_from_name(item.substr(0, eq));
        double v = 0.0;
        try {
            v = std::stod(item.substr(eq + 1));
        } catch (const std::exception&) {
            throw PreconditionError("--prior fixed: bad value in '" + item + "'");
        }
        if (p == Param::K ? (v < 0 || v != std::floor(v)) : !(v > 0.0))
            throw PreconditionError("--prior fixed: value out of range in '" + item + "'");
        mode.fixed[p] = v;
    }
    if (mode.fixed.empty()) throw PreconditionError("--prior fixed: needs at least one param=value");
    return mode;
}

GridAxes photocount_fiducial_axes(std::span<const double> counts, const ModelParams& theory,
                                  const std::map<Param, double>& fixed, const std::vector<int>& K_values, int nodes,
                                  const DarkCountConfig& dark, std::vector<std::string>* notes, double width) {
    if (K_values.empty()) throw PreconditionError("fiducial axes: no K values");
    const ModelParams base = with_fixed(theory, fixed);
    const std::vector<Param> free = free_of(fixed, kContinuousParams);
    const double n = total(counts);
    const double mean = std::max(1e-6, data_mean(counts) - (dark.enabled() ? dark.mean_for(base.m) : 0.0));

    GridAxes axes{{base.mu0}, {base.m}, {base.M}, K_values};
    if (free.empty()) return axes;

    struct Slice {
        MleResult fit;
        std::vector<double> sigma;
    };
    std::vector<Slice> slices;
    for (int K : K_values) {
        ModelParams start = base;
        start.K = K;
        if (!fixed.contains(Param::mu0)) start.mu0 = mu0_from_mean(mean, start.m, start.M, K);
        try {
            Slice s{fit_mle(counts, start, free, dark), {}};
            try {
                const Eigen::MatrixXd info = fisher_information(s.fit.params, n, dark).reduced(free);
                condition_number(info);
                const Eigen::MatrixXd cov = info.inverse();
                for (std::size_t j = 0; j < free.size(); ++j)
                    s.sigma.push_back(std::sqrt(cov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))));
            } catch (const DomainError&) {
                for (Param p : free) s.sigma.push_back(std::abs(get_param(s.fit.params, p)));
            }
            slices.push_back(std::move(s));
        } catch (const std::exception& e) {
            if (notes) notes->push_back("K=" + std::to_string(K) + " slice fit failed: " + e.what());
        }
    }
    if (slices.empty()) throw ConvergenceError("fiducial axes: no K slice could be fitted");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& s : slices) best = std::max(best, s.fit.log_likelihood);

    for (std::size_t j = 0; j < free.size(); ++j) {
        const Param p = free[j];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& s : slices) {
            if (s.fit.log_likelihood < best - kSliceWindow) continue;
            const double u = get_param(s.fit.params, p);
            lo = std::min(lo, u - width * s.sigma[j]);
            hi = std::max(hi, u + width * s.sigma[j]);
        }
        lo = std::max(lo, lower_limit(p));
        hi = std::min(hi, upper_limit(p));
        axis_ref(axes, p) = GridAxes::linspace(lo, std::max(hi, lo * (1 + 1e-9)), nodes);
    }
    return axes;
}

GridAxes quadrature_fiducial_axes(const QuadratureLikelihood& likelihood, const ModelParams& theory,
                                  const std::map<Param, double>& fixed, int nodes) {
    const std::array<Param, 2> candidates{Param::M, Param::mu0};
    const std::vector<Param> free = free_of(fixed, candidates);
    ModelParams center = with_fixed(theory, fixed);
    GridAxes axes{{center.mu0}, {1.0}, {center.M}, {center.K}};
    if (free.empty()) return axes;

    for (int round = 0; round < (free.size() > 1 ? 4 : 1); ++round)
        for (Param p : free) set_param(center, p, conditional_mle_quadrature(p, likelihood, center).estimate);

    const Eigen::Matrix2d info = quadrature_fisher_information(center, static_cast<double>(likelihood.data().size()));
    for (Param p : free) {
        const int i = p == Param::M ? 0 : 1;
        const double sigma = free.size() > 1 ? std::sqrt(info.inverse()(i, i)) : 1.0 / std::sqrt(info(i, i));
        const double u = get_param(center, p);
        axis_ref(axes, p) = GridAxes::around(u, sigma, nodes, kWidth, lower_limit(p));
    }
    return axes;
}

ParameterGrid k_slice(const ParameterGrid& grid, std::size_t k) {
    GridAxes axes = grid.axes();
    axes.K = {axes.K[k]};
    std::vector<double> log_density(axes.size());
    const ParameterGrid shape(axes, std::vector<double>(axes.size(), 0.0));
    for (std::size_t i = 0; i < log_density.size(); ++i) {
        auto idx = shape.unflat(i);
        idx.K = k;
        log_density[i] = grid.log_density()[grid.flat(idx)];
    }
    return ParameterGrid(std::move(axes), std::move(log_density));
}

void write_slice_half_max(TsvWriter& out, const std::string& label, const ParameterGrid& grid) {
    for (std::size_t k = 0; k < grid.axes().K.size(); ++k) write_half_max(out, label, k_slice(grid, k));
}

void write_projection_half_max(TsvWriter& out, const std::string& label, const ParameterGrid& grid) {
    const GridAxes& a = grid.axes();
    const std::size_t nm = a.m.size(), nM = a.M.size();
    for (std::size_t k = 0; k < a.K.size(); ++k) {
        std::vector<double> proj(nm * nM, 0.0);
        for (std::size_t im = 0; im < nm; ++im)
            for (std::size_t iM = 0; iM < nM; ++iM)
                for (std::size_t iu = 0; iu < a.mu0.size(); ++iu)
                    proj[im * nM + iM] = std::max(proj[im * nM + iM], grid.density()[grid.flat({k, im, iM, iu})]);
        const double half = 0.5 * *std::max_element(proj.begin(), proj.end());
        auto above = [&](std::size_t im, std::size_t iM) { return proj[im * nM + iM] >= half; };
        for (std::size_t im = 0; im < nm; ++im)
            for (std::size_t iM = 0; iM < nM; ++iM) {
                if (!above(im, iM)) continue;
                const bool edge = (nm > 1 && (im == 0 || im + 1 == nm || !above(im - 1, iM) || !above(im + 1, iM))) ||
                                  (nM > 1 && (iM == 0 || iM + 1 == nM || !above(im, iM - 1) || !above(im, iM + 1)));
                if (!edge) continue;
                out << label << static_cast<double>(a.K[k]) << a.m[im] << a.M[iM] << proj[im * nM + iM];
                out.end_row();
            }
    }
}

// ---------------------------------------------------------------------------

RunReport run_simulate(const SimulateOptions& opts, const std::vector<std::string>& args) {
    RunReport report("simulate " + opts.kind, args);
    const SeededStream stream{opts.seed, 0};
    Json result = Json::object();
    if (opts.kind == "photocount" || opts.kind == "oracle") {
        const ModelParams p = opts.theory.resolve(kPhotocountPoint);
        CountHistogram hist;
        io::Metadata meta = params_metadata(p);
        meta["seed"] = std::to_string(opts.seed);
        if (opts.kind == "photocount") {
            const DarkCountConfig dark = opts.dark ? DarkCountConfig{} : DarkCountConfig::none();
            hist = sample_photocounts(p, opts.n, stream, dark);
            meta["dark"] = io::format_double(dark.mu_dc_per_mode);
        } else {
            p.validate_integer();
            if (opts.dark) report.warn("the oracle simulates the ideal process; dark counts are not added");
            const OracleResult r = physical_subtraction_oracle(p.mu0, static_cast<int>(p.m), static_cast<int>(p.M), p.K,
                                                               opts.n, stream);
            hist = r.histogram;
            meta["dark"] = "0";
            result["acceptance_rate"] = r.acceptance_rate();
        }
        io::write_histogram(opts.out, hist, meta);
        report.doc["params"] = params_json(p);
        result["events"] = hist.total();
        result["mean"] = hist.mean();
        result["variance"] = hist.variance();
    } else if (opts.kind == "quadrature") {
        const ModelParams p = opts.theory.resolve(kQuadraturePoint);
        if (p.m != 1.0) throw PreconditionError("quadrature samples require m = 1");
        const QuadratureSample q = sample_quadratures(p, opts.n, stream);
        io::Metadata meta = params_metadata(p);
        meta["seed"] = std::to_string(opts.seed);
        io::write_quadratures(opts.out, q, meta);
        report.doc["params"] = params_json(p);
        result["events"] = q.size();
        result["mean"] = q.mean();
        result["variance"] = q.variance();
    } else {
        TraceSynthesisConfig cfg = opts.trace;
        if (opts.theory.mu0) cfg.mu0 = *opts.theory.mu0;
        cfg.validate();
        const TimeTrace trace = synthesize_trace(cfg, stream);
        io::write_trace(opts.out, trace);
        report.doc["trace"] = Json{{"mu0", cfg.mu0},
                                   {"t_coh", cfg.t_coh},
                                   {"duration", cfg.duration},
                                   {"tap_ratio", cfg.tap_ratio},
                                   {"bin_width", cfg.bin_width},
                                   {"homodyne", cfg.homodyne},
                                   {"effective_mu0", cfg.effective_mu0()}};
        result["dk_clicks"] = trace.dk_click_times.size();
        result["dn_clicks"] = trace.dn_click_times.size();
        result["hd_samples"] = trace.hd_samples.size();
    }
    report.doc["seed"] = opts.seed;
    report.doc["output"] = input_json(opts.out);
    report.doc["result"] = result;
    return report;
}

// ---------------------------------------------------------------------------

namespace {

void fit_photocounts(const FitOptions& opts, const PriorMode& mode, RunReport& report) {
    io::Metadata meta;
    const CountHistogram data = io::read_histogram(opts.data, &meta);
    if (data.empty()) throw PreconditionError("histogram has no events");
    const DarkCountConfig dark = opts.dark ? DarkCountConfig{} : DarkCountConfig::none();
    const ModelParams theory = opts.theory.resolve(kPhotocountPoint);
    const auto n = static_cast<double>(data.total());
    const std::vector<double> counts = data.weights();
    report.doc["events"] = data.total();
    report.doc["theory"] = params_json(theory);

    ParameterGrid grid;
    ModelParams reference = theory;
    Json info = Json::object();
    std::vector<Param> free(kContinuousParams.begin(), kContinuousParams.end());
    const InfoMatrix fisher_at_theory = fisher_information(theory, n, dark);

    if (mode.kind == PriorMode::Kind::bayes) {
        const PriorSpec prior = build_prior(data, theory, dark);
        GridAxes axes = prior_axes(prior, opts.nodes);
        apply_ranges(axes, opts.ranges, opts.nodes);
        grid = posterior_grid(data, prior, axes, dark);
        report.doc["prior"] = prior_json(prior);
        info["fisher"] = information_json(fisher_at_theory.entries, kContinuousParams);
        info["posterior"] = information_json(posterior_information(fisher_at_theory, prior).entries, kContinuousParams);
    } else {
        reference = with_fixed(theory, mode.fixed);
        std::vector<int> Ks;
        if (mode.fixed.contains(Param::K)) Ks.push_back(static_cast<int>(mode.fixed.at(Param::K)));
        else
            for (int k = 0; k <= opts.kmax; ++k) Ks.push_back(k);
        std::vector<std::string> notes;
        GridAxes axes = photocount_fiducial_axes(counts, theory, mode.fixed, Ks, opts.nodes, dark, &notes);
        for (const auto& note : notes) report.warn(note);
        apply_ranges(axes, opts.ranges, opts.nodes);
        grid = fiducial_grid(data, axes, dark);
        free = free_of(mode.fixed, kContinuousParams);
        if (!free.empty()) {
            const ModelParams at = with_fixed(theory, mode.fixed);
            info["fisher"] = information_json(fisher_information(at, n, dark).reduced(free), free);
        }
    }
    const EstimateSummary summary = posterior_moments(grid, reference);
    const ModelParams point = summary.point_estimate(reference.K);
    try {
        const LogLikelihood ll = log_likelihood_photocount(point, data, dark);
        report.doc["log_likelihood_at_estimate"] = ll.value;
        if (ll.floored_cells > 0)
            report.warn(std::to_string(ll.floored_cells) + " histogram cells have model probability below the floor");
    } catch (const DomainError& e) {
        report.warn(std::string("point estimate lies outside the model domain: ") + e.what());
    }
    report.doc["grid"] = grid_json(grid);
    report.doc["estimates"] = summary_json(summary);
    report.doc["information"] = info;
    check_boundary(report, grid, opts.allow_boundary);
    if (!opts.dump_grid.empty()) {
        write_grid(opts.dump_grid, grid);
        report.doc["grid_dump"] = input_json(opts.dump_grid);
    }
}

void fit_quadratures(const FitOptions& opts, const PriorMode& mode, RunReport& report) {
    io::Metadata meta;
    QuadratureSample data = io::read_quadratures(opts.data, &meta);
    if (data.empty()) throw PreconditionError("quadrature file has no readings");
    const ModelParams theory = opts.theory.resolve(kQuadraturePoint);
    if (theory.m != 1.0) throw PreconditionError("quadrature fits require m = 1");
    if (mode.fixed.contains(Param::m) && mode.fixed.at(Param::m) != 1.0)
        throw PreconditionError("quadrature fits require m = 1");
    if (opts.dark) report.doc["dark_note"] = "dark counts do not enter the quadrature model";
    const auto n = static_cast<double>(data.size());
    report.doc["events"] = data.size();
    report.doc["theory"] = params_json(theory);
    report.doc["moment_mu0"] = quadrature_moment_mu0(data, theory.M, theory.K);

    const std::array<Param, 2> order{Param::M, Param::mu0};
    Json info = Json::object();
    ParameterGrid grid;
    ModelParams reference = theory;
    const QuadratureLikelihood likelihood(std::move(data));

    if (mode.kind == PriorMode::Kind::bayes) {
        PriorSpec prior;
        prior.K_fixed = theory.K;
        prior.m = {1.0, 0.0};
        for (Param p : order) {
            const ConditionalEstimate c = conditional_mle_quadrature(p, likelihood, theory);
            prior[p] = {c.estimate, c.sigma};
        }
        GridAxes axes = prior_axes(prior, opts.nodes);
        apply_ranges(axes, opts.ranges, opts.nodes);
        grid = quadrature_grid(likelihood, axes, &prior);
        report.doc["prior"] = prior_json(prior);
        const Eigen::Matrix2d fisher = quadrature_fisher_information(theory, n);
        Eigen::Matrix2d post = fisher;
        post(0, 0) += 1.0 / (prior.M.sigma * prior.M.sigma);
        post(1, 1) += 1.0 / (prior.mu0.sigma * prior.mu0.sigma);
        info["fisher"] = information_json(fisher, order);
        info["posterior"] = information_json(post, order);
    } else {
        std::map<Param, double> fixed = mode.fixed;
        fixed.erase(Param::m);
        reference = with_fixed(theory, fixed);
        GridAxes axes = quadrature_fiducial_axes(likelihood, theory, fixed, opts.nodes);
        apply_ranges(axes, opts.ranges, opts.nodes);
        if (axes.m != std::vector<double>{1.0}) throw PreconditionError("quadrature fits require m = 1");
        grid = quadrature_grid(likelihood, axes);
        const std::vector<Param> free = free_of(fixed, order);
        if (!free.empty()) {
            const Eigen::Matrix2d fisher = quadrature_fisher_information(reference, n);
            Eigen::MatrixXd reduced(free.size(), free.size());
            for (std::size_t i = 0; i < free.size(); ++i)
                for (std::size_t j = 0; j < free.size(); ++j)
                    reduced(i, j) = fisher(free[i] == Param::M ? 0 : 1, free[j] == Param::M ? 0 : 1);
            info["fisher"] = information_json(reduced, free);
        }
    }
    const EstimateSummary summary = posterior_moments(grid, reference);
    report.doc["grid"] = grid_json(grid);
    report.doc["estimates"] = summary_json(summary);
    report.doc["information"] = info;
    check_boundary(report, grid, opts.allow_boundary);
    if (!opts.dump_grid.empty()) {
        write_grid(opts.dump_grid, grid);
        report.doc["grid_dump"] = input_json(opts.dump_grid);
    }
}

}  // namespace

RunReport run_fit(const FitOptions& opts, const std::vector<std::string>& args) {
    RunReport report("fit " + opts.kind, args);
    const PriorMode mode = parse_prior_mode(opts.prior);
    report.doc["input"] = input_json(opts.data);
    report.doc["prior_mode"] = opts.prior;
    report.doc["dark"] = opts.dark;
    if (opts.kind == "photocount") fit_photocounts(opts, mode, report);
    else fit_quadratures(opts, mode, report);
    return report;
}

// ---------------------------------------------------------------------------

RunReport run_pipeline(const PipelineOptions& opts, const std::vector<std::string>& args) {
    RunReport report("pipeline", args);
    if (opts.m > opts.M) throw PreconditionError("pipeline: m must not exceed M");
    opts.config.validate();
    for (const auto& w : opts.config.warnings()) report.warn(w);
    report.doc["input"] = input_json(opts.trace);

    const TimeTrace trace = io::read_trace(fs::path(opts.trace));
    const BinningResult binned = bin_trace(trace, opts.config);
    const std::vector<BinRecord> kept = thin_bins(binned.bins, opts.config);
    const auto groups = group_and_select(kept, opts.M, opts.m);

    fs::create_directories(opts.out);
    Json sets = Json::array();
    for (const auto& [K, ds] : groups) {
        io::Metadata meta{{"m", std::to_string(opts.m)},
                          {"M", std::to_string(opts.M)},
                          {"K", std::to_string(K)},
                          {"tau", io::format_double(opts.config.tau)},
                          {"period", io::format_double(opts.config.period)},
                          {"groups", std::to_string(ds.groups)}};
        const fs::path hist = fs::path(opts.out) / ("photocounts_K" + std::to_string(K) + ".tsv");
        const fs::path quad = fs::path(opts.out) / ("quadratures_K" + std::to_string(K) + ".tsv");
        io::write_histogram(hist, ds.photocounts, meta);
        io::write_quadratures(quad, ds.quadratures, meta);
        sets.push_back(Json{{"K", K},
                            {"groups", ds.groups},
                            {"quadratures", ds.quadratures.size()},
                            {"mean_N", ds.photocounts.empty() ? 0.0 : ds.photocounts.mean()},
                            {"photocounts_file", input_json(hist.string())},
                            {"quadratures_file", input_json(quad.string())}});
    }
    const double retained =
        binned.bins.empty() ? 0.0 : static_cast<double>(kept.size()) / static_cast<double>(binned.bins.size());
    report.doc["bins"] = binned.bins.size();
    report.doc["retained_bins"] = kept.size();
    report.doc["retained_fraction"] = retained;
    report.doc["stride"] = opts.config.stride();
    report.doc["saturated_bins"] = binned.saturated;
    report.doc["datasets"] = sets;
    if (binned.saturated > 0)
        report.warn(std::to_string(binned.saturated) + " bins exceed " +
                    std::to_string(opts.config.max_counts_per_bin) + " counts");
    return report;
}

}  // namespace mpsts::cli
