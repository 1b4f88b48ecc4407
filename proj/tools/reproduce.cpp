// reproduce: plot-ready data for the table and figures of the reference
// analysis, regenerated from simulation at the canonical working points.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <filesystem>
#include <limits>

#include "commands.hpp"
#include "mpsts/errors.hpp"
#include "mpsts/io.hpp"
#include "mpsts/sample_size.hpp"

namespace fs = std::filesystem;

namespace mpsts::cli {

namespace {

struct Context {
    const ReproduceOptions& opts;
    RunReport& report;
    DarkCountConfig dark;
    std::vector<fs::path> files;

    fs::path file(const std::string& name) {
        files.push_back(fs::path(opts.out) / name);
        return files.back();
    }
    SeededStream stream(std::uint64_t id) const { return {opts.seed, id}; }
};

std::vector<int> k_range(int lo, int hi) {
    std::vector<int> out;
    for (int k = lo; k <= hi; ++k) out.push_back(k);
    return out;
}

Json k_marginal_json(const ParameterGrid& grid) {
    Json j = Json::object();
    const auto mass = grid.marginal(Param::K);
    for (std::size_t i = 0; i < mass.size(); ++i) j[std::to_string(grid.axes().K[i])] = mass[i];
    return j;
}

Json grid_summary(const ParameterGrid& grid, const ModelParams& reference) {
    return Json{{"grid", grid_json(grid)},
                {"estimates", summary_json(posterior_moments(grid, reference))},
                {"K_marginal", k_marginal_json(grid)}};
}

void fig4a(Context& c) {
    const ModelParams theory = kPhotocountPoint;
    const CountHistogram data = sample_photocounts(theory, kPhotocountEvents, c.stream(0), c.dark);
    const PhotocountFit fit = bayesian_fit(data, theory, c.dark, c.opts.nodes);
    const ModelParams est = fit.summary.point_estimate(theory.K);
    const int n_max = std::max(data.max_value(), adaptive_n_max(theory));
    const auto exact = observed_pmf(theory, c.dark, n_max);
    const auto recon = observed_pmf(est, c.dark, n_max);
    TsvWriter out(c.file("fig4a.tsv"), {"N", "frequency", "theory", "reconstructed"},
                  {"photocount histogram at mu0=0.264 m=2 M=3 K=3, n=58623"});
    const auto n = static_cast<double>(data.total());
    for (int N = 0; N <= n_max; ++N) {
        out << static_cast<double>(N) << static_cast<double>(data.count(N)) / n << exact[N] << recon[N];
        out.end_row();
    }
    c.report.doc["estimates"] = summary_json(fit.summary);
    c.report.doc["prior"] = prior_json(fit.prior);
    c.report.doc["reference_estimates"] = Json{{"m", 1.943}, {"M", 3.084}, {"mu0", 0.274}};
}

void fig4b(Context& c) {
    const ModelParams theory = kQuadraturePoint;
    const QuadratureSample data = sample_quadratures(theory, kQuadratureEvents, c.stream(0));
    const QuadratureFit fit = quadrature_posterior(data, theory, std::nullopt, c.opts.nodes);
    const ModelParams est = fit.summary.point_estimate(theory.K);
    const QuadratureDensity exact(theory), recon(est);
    double limit = 0.0;
    for (double q : data.values) limit = std::max(limit, std::abs(q));
    limit = std::ceil(limit);
    constexpr double width = 0.1;
    const auto bins = static_cast<std::size_t>(std::llround(2 * limit / width));
    std::vector<double> hist(bins, 0.0);
    for (double q : data.values)
        hist[std::min(bins - 1, static_cast<std::size_t>((q + limit) / width))] += 1.0;
    TsvWriter out(c.file("fig4b.tsv"), {"Q", "density", "theory", "reconstructed"},
                  {"quadrature histogram at mu0=0.752 m=1 M=5 K=4, n=138710, bin width 0.1"});
    for (std::size_t i = 0; i < bins; ++i) {
        const double q = -limit + (static_cast<double>(i) + 0.5) * width;
        out << q << hist[i] / (static_cast<double>(data.size()) * width) << exact(q) << recon(q);
        out.end_row();
    }
    c.report.doc["estimates"] = summary_json(fit.summary);
    c.report.doc["prior"] = prior_json(fit.prior);
    c.report.doc["moment_mu0"] = fit.moment_mu0;
    c.report.doc["reference_estimates"] = Json{{"M", 5.036}, {"mu0", 0.758}};
}

// Half-maximum level sets only reach about 1.2 sigma, so the boxes around
// well-determined fits are narrower than in `fit`.
constexpr double kFigureWidth = 2.5;

ParameterGrid narrow_fiducial(Context& c, const CountHistogram& data, const std::map<Param, double>& fixed,
                              const std::vector<int>& Ks, int nodes) {
    std::vector<std::string> notes;
    const auto counts = data.weights();
    const GridAxes axes =
        photocount_fiducial_axes(counts, kPhotocountPoint, fixed, Ks, nodes, c.dark, &notes, kFigureWidth);
    for (const auto& note : notes) c.report.warn(note);
    return fiducial_grid(counts, axes, c.dark);
}

// At n = 58623 the slices are long ridges that open toward large M; a fixed
// box shows their shape where the reference plots do.
GridAxes wide_box(int nodes, const std::vector<int>& Ks, std::optional<double> m) {
    return GridAxes{GridAxes::linspace(0.05, 0.6, nodes),
                    m ? std::vector<double>{*m} : GridAxes::linspace(0.25, 6.0, nodes),
                    GridAxes::linspace(0.5, 40.0, nodes), Ks};
}

Json edge_fraction(const ParameterGrid& grid) {
    // Per K, the share of half-maximum nodes on the box edge; near zero
    // means the box holds the whole level set.
    Json j = Json::object();
    const auto& a = grid.axes();
    auto on_edge = [](std::size_t i, std::size_t n) { return n > 1 && (i == 0 || i + 1 == n); };
    for (std::size_t k = 0; k < a.K.size(); ++k) {
        const ParameterGrid s = k_slice(grid, k);
        const auto nodes = s.half_max_boundary();
        std::size_t edge = 0;
        for (std::size_t i : nodes) {
            const auto idx = s.unflat(i);
            if (on_edge(idx.m, a.m.size()) || on_edge(idx.M, a.M.size()) || on_edge(idx.mu0, a.mu0.size())) ++edge;
        }
        j[std::to_string(a.K[k])] = nodes.empty() ? 0.0 : static_cast<double>(edge) / static_cast<double>(nodes.size());
    }
    return j;
}

// Cross-sections at fixed m of the per-K half-maximum surfaces. The ridges
// are far thinner than any affordable grid spacing in mu0, so the level set
// is traced instead: for every M the mu0 interval above the slice level is
// found by root bracketing. The level of slice K is its unconstrained
// maximum (m free) minus ln 2.
struct Section {
    int K;
    double M, mu0_low, mu0_high;
};

struct SectionResult {
    std::vector<Section> rows;
    std::map<int, double> log_max;
    std::map<int, bool> open_at_edge;
};

SectionResult trace_section(std::span<const double> counts, double m, const std::vector<int>& Ks,
                            const std::vector<double>& M_axis, const DarkCountConfig& dark) {
    const double mean = std::max(1e-6, [&] {
        double n = 0.0, s = 0.0;
        for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i], s += counts[i] * static_cast<double>(i);
        return s / n - (dark.enabled() ? dark.mean_for(m) : 0.0);
    }());
    auto ll = [&](int K, double M, double mu0) {
        try {
            return log_likelihood_photocount({mu0, m, M, K}, counts, dark).value;
        } catch (const DomainError&) {
            return -std::numeric_limits<double>::infinity();
        }
    };
    struct Profile {
        int K;
        double M, mu0, value, lo, hi;
    };
    SectionResult out;
    std::vector<Profile> profiles;
    for (int K : Ks) {
        const ModelParams start{mu0_from_mean(mean, m, m + 1.0, K), m, m + 1.0, K};
        out.log_max[K] = fit_mle(counts, start, kContinuousParams, dark).log_likelihood;
        for (double M : M_axis) {
            const double guess = mu0_from_mean(mean, m, M, K);
            const double lo = 0.5 * guess, hi = 1.5 * guess;
            const Maximum1d best = maximize_1d([&](double u) { return ll(K, M, u); }, lo, hi, 48);
            profiles.push_back({K, M, best.x, best.value, lo, hi});
        }
    }
    auto root = [&](const Profile& p, double level, double inside, double outside) {
        for (int i = 0; i < 80; ++i) {
            const double mid = 0.5 * (inside + outside);
            (ll(p.K, p.M, mid) >= level ? inside : outside) = mid;
        }
        return 0.5 * (inside + outside);
    };
    for (const Profile& p : profiles) {
        const double level = out.log_max[p.K] - std::log(2.0);
        if (p.value < level) continue;
        out.rows.push_back({p.K, p.M, root(p, level, p.mu0, p.lo), root(p, level, p.mu0, p.hi)});
        if (p.M == M_axis.front() || p.M == M_axis.back()) out.open_at_edge[p.K] = true;
    }
    return out;
}

void write_sections(TsvWriter& out, const std::string& label, const SectionResult& s) {
    for (const auto& r : s.rows) {
        out << label << static_cast<double>(r.K) << r.M << r.mu0_low << r.mu0_high;
        out.end_row();
    }
}

Json section_json(const SectionResult& s) {
    std::map<int, int> count;
    for (const auto& r : s.rows) ++count[r.K];
    Json k = Json::array(), open = Json::array();
    for (const auto& [K, c] : count) k.push_back(K);
    for (const auto& [K, o] : s.open_at_edge) open.push_back(K);
    Json top = Json::object();
    for (const auto& [K, v] : s.log_max) top[std::to_string(K)] = v;
    return Json{{"K_with_level_set", k}, {"open_at_M_edge", open}, {"slice_log_max", top}};
}

void fig5(Context& c) {
    const CountHistogram small = sample_photocounts(kPhotocountPoint, kPhotocountEvents, c.stream(0), c.dark);
    const ParameterGrid a = fiducial_grid(small, wide_box(c.opts.nodes, k_range(1, 10), std::nullopt), c.dark);
    const CountHistogram large = sample_photocounts(kPhotocountPoint, 420'000'000, c.stream(1), c.dark);
    const ParameterGrid b = narrow_fiducial(c, large, {}, {kPhotocountPoint.K}, 2 * c.opts.nodes);
    {
        TsvWriter out(c.file("fig5.tsv"), {"panel", "K", "m", "M", "mu0", "density"},
                      {"half-maximum boundary nodes of the fiducial distribution, each K slice at half its own maximum",
                       "panel a: K=1..10, n=58623; panel b: K=3, n=4.2e8"});
        write_slice_half_max(out, "a", a);
        write_slice_half_max(out, "b", b);
    }
    c.report.doc["panel_a"] = grid_summary(a, kPhotocountPoint);
    c.report.doc["panel_a"]["edge_fraction"] = edge_fraction(a);
    c.report.doc["panel_b"] = grid_summary(b, kPhotocountPoint);
}

void fig6(Context& c) {
    const ModelParams t = kPhotocountPoint;
    const CountHistogram small = sample_photocounts(t, kPhotocountEvents, c.stream(0), c.dark);
    const CountHistogram large = sample_photocounts(t, 4'000'000, c.stream(2), c.dark);
    const ParameterGrid a = fiducial_grid(small, wide_box(c.opts.nodes, k_range(1, 10), std::nullopt), c.dark);
    {
        TsvWriter out(c.file("fig6a.tsv"), {"panel", "K", "m", "M", "max_density"},
                      {"half-maximum boundary of the (m, M) projection, n=58623; reference line m=2"});
        write_projection_half_max(out, "a", a);
    }
    const int fine = 4 * c.opts.nodes;
    const SectionResult b = trace_section(small.weights(), t.m, k_range(1, 10),
                                          GridAxes::linspace(t.m + 0.01, 40.0, fine), c.dark);
    const GridAxes near = photocount_fiducial_axes(large.weights(), t, {{Param::m, t.m}}, {t.K}, c.opts.nodes,
                                                   c.dark, nullptr, kFigureWidth);
    const SectionResult cc = trace_section(large.weights(), t.m, k_range(1, 10),
                                           GridAxes::linspace(near.M.front(), near.M.back(), fine), c.dark);
    {
        TsvWriter out(c.file("fig6bc.tsv"), {"panel", "K", "M", "mu0_low", "mu0_high"},
                      {"cross-sections at m=2 of the per-K half-maximum surfaces, traced along M",
                       "panel b: n=58623; panel c: n=4e6"});
        write_sections(out, "b", b);
        write_sections(out, "c", cc);
    }
    c.report.doc["panel_a"] = Json{{"grid", grid_json(a)}, {"edge_fraction", edge_fraction(a)}};
    c.report.doc["panel_b"] = section_json(b);
    c.report.doc["panel_c"] = section_json(cc);
    const ParameterGrid cgrid = narrow_fiducial(c, large, {{Param::m, t.m}}, k_range(1, 10), c.opts.nodes);
    c.report.doc["panel_c"]["grid"] = grid_summary(cgrid, t);
}

void fig7(Context& c) {
    const ModelParams theory = kPhotocountPoint;
    const CountHistogram data = sample_photocounts(theory, kPhotocountEvents, c.stream(0), c.dark);
    const auto sample = data.weights();
    const auto n = static_cast<double>(data.total());
    const int n_max = std::max(data.max_value(), adaptive_n_max(theory, 1e-12));
    std::vector<double> exact = observed_pmf(theory, c.dark, n_max);
    for (double& p : exact) p *= n;

    TsvWriter out(c.file("fig7.tsv"), {"param", "value", "sample", "exact"},
                  {"conditional fiducial distributions, other parameters at mu0=0.264 m=2 M=3 K=3, n=58623"});
    Json overlaps = Json::object();
    for (Param p : {Param::m, Param::M, Param::mu0, Param::K}) {
        std::vector<double> axis;
        if (p == Param::K) {
            for (int k = 0; k <= c.opts.kmax; ++k) axis.push_back(k);
        } else {
            const ConditionalEstimate e = conditional_mle(p, data, theory, c.dark);
            axis = GridAxes::around(get_param(theory, p), e.sigma, c.opts.nodes, 8.0);
        }
        const auto fs_ = conditional_fiducial(sample, p, theory, axis, c.dark);
        const auto fe = conditional_fiducial(exact, p, theory, axis, c.dark);
        for (std::size_t i = 0; i < axis.size(); ++i) {
            out << std::string(param_name(p)) << axis[i] << fs_[i] << fe[i];
            out.end_row();
        }
        overlaps[std::string(param_name(p))] = overlap_coefficient(fs_, fe);
        if (p == Param::K) {
            const auto at = static_cast<std::size_t>(theory.K);
            const double s = std::accumulate(fs_.begin(), fs_.end(), 0.0);
            c.report.doc["K_mass_at_truth"] = at < fs_.size() ? fs_[at] / s : 0.0;
        }
    }
    c.report.doc["overlaps"] = overlaps;
}

void prior_posterior(Context& c, const std::string& name, const PriorSpec& prior, const ParameterGrid& posterior) {
    const ParameterGrid prior_grid = evaluate_grid(posterior.axes(), [&](const ModelParams& p) { return log_prior(prior, p); });
    TsvWriter out(c.file(name), {"distribution", "K", "m", "M", "mu0", "density"},
                  {"half-maximum boundary nodes of the prior and the posterior"});
    write_half_max(out, "prior", prior_grid);
    write_half_max(out, "posterior", posterior);
}

void fig8(Context& c) {
    const ModelParams theory = kPhotocountPoint;
    const CountHistogram data = sample_photocounts(theory, kPhotocountEvents, c.stream(0), c.dark);
    const PhotocountFit fit = bayesian_fit(data, theory, c.dark, c.opts.nodes);
    prior_posterior(c, "fig8.tsv", fit.prior, fit.grid);
    c.report.doc["prior"] = prior_json(fit.prior);
    c.report.doc["estimates"] = summary_json(fit.summary);
    const InfoMatrix fisher = fisher_information(theory, static_cast<double>(data.total()), c.dark);
    c.report.doc["condition_numbers"] = Json{{"fisher", condition_number(fisher)},
                                             {"posterior", condition_number(posterior_information(fisher, fit.prior))}};
}

void fig9(Context& c) {
    const ModelParams theory = kQuadraturePoint;
    const QuadratureSample data = sample_quadratures(theory, kQuadratureEvents, c.stream(0));
    const QuadratureFit fit = quadrature_posterior(data, theory, std::nullopt, c.opts.nodes);
    prior_posterior(c, "fig9.tsv", fit.prior, fit.grid);
    c.report.doc["prior"] = prior_json(fit.prior);
    c.report.doc["estimates"] = summary_json(fit.summary);
    c.report.doc["reference_prior"] = Json{{"mu0", {{"mean", 0.749}, {"sigma", 0.006}}},
                                           {"M", {{"mean", 5.064}, {"sigma", 0.096}}}};
}

void table1(Context& c) {
    const ModelParams theory = kPhotocountPoint;
    struct Row {
        std::string method, label;
        double delta, computed, reference;
    };
    std::vector<Row> rows;
    const std::map<SampleSizeMethod, std::pair<double, double>> published{
        {SampleSizeMethod::no_prior, {18e6, 42e7}},
        {SampleSizeMethod::fixed_m, {1.2e6, 4e6}},
        {SampleSizeMethod::bayesian, {8e2, 5.8e4}}};

    Json reference = Json::object();
    for (const auto& [m, v] : published) reference[std::string(method_name(m))] = Json{{"delta_10", v.first}, {"delta_1", v.second}};
    c.report.doc["reference_n"] = reference;

    for (SampleSizeMethod m : {SampleSizeMethod::no_prior, SampleSizeMethod::fixed_m}) {
        const auto free = free_parameters(m);
        const KMixture mix(theory, free, c.dark, c.opts.kmax);
        const auto [p10, p1] = published.at(m);
        const std::string name(method_name(m));
        rows.push_back({name, "analytic, Laplace mixture over K", 0.10, mix.sample_size(0.10), p10});
        rows.push_back({name, "analytic, Laplace mixture over K", 0.01, mix.sample_size(0.01), p1});
        rows.push_back({name, "analytic, Cramer-Rao at fixed K", 0.10, cramer_rao_sample_size(theory, free, 0.10, c.dark), p10});
        rows.push_back({name, "analytic, Cramer-Rao at fixed K", 0.01, cramer_rao_sample_size(theory, free, 0.01, c.dark), p1});
    }

    BayesianDeltaOptions bo;
    bo.seeds = c.opts.seeds;
    bo.base_seed = c.opts.seed;
    bo.nodes = c.opts.nodes;
    bo.dark = c.dark;
    Json medians = Json::object();
    for (std::int64_t n : {std::int64_t{800}, kPhotocountEvents})
        medians[std::to_string(n)] = bayesian_median_delta(theory, n, bo);
    c.report.doc["bayesian_median_delta"] = medians;
    if (!c.opts.quick) {
        const std::string label = "simulated, median over " + std::to_string(bo.seeds) + " seeds, bisection";
        rows.push_back({"bayesian", label, 0.10, bayesian_sample_size(theory, 0.10, bo, 50, 5e3, 6), 8e2});
        rows.push_back({"bayesian", label, 0.01, bayesian_sample_size(theory, 0.01, bo, 5e3, 2e5, 6), 5.8e4});
    }

    TsvWriter out(c.file("table1.tsv"), {"method", "delta", "computed_n", "reference_n", "ratio", "label"},
                  {"sample size for a given maximum relative error at mu0=0.264 m=2 M=3 K=3"});
    Json table = Json::array();
    for (const Row& r : rows) {
        out << r.method << r.delta << r.computed << r.reference << r.computed / r.reference << r.label;
        out.end_row();
        table.push_back(Json{{"method", r.method},
                             {"label", r.label},
                             {"delta", r.delta},
                             {"computed_n", r.computed},
                             {"reference_n", r.reference},
                             {"ratio", r.computed / r.reference}});
    }
    c.report.doc["table"] = table;
}

}  // namespace

RunReport run_reproduce(const ReproduceOptions& opts, const std::vector<std::string>& args) {
    RunReport report("reproduce " + opts.target, args);
    fs::create_directories(opts.out);
    Context c{opts, report, opts.dark ? DarkCountConfig{} : DarkCountConfig::none(), {}};
    report.doc["seed"] = opts.seed;
    report.doc["dark"] = opts.dark;

    if (opts.target == "table1") table1(c);
    else if (opts.target == "fig4a") fig4a(c);
    else if (opts.target == "fig4b") fig4b(c);
    else if (opts.target == "fig5") fig5(c);
    else if (opts.target == "fig6") fig6(c);
    else if (opts.target == "fig7") fig7(c);
    else if (opts.target == "fig8") fig8(c);
    else if (opts.target == "fig9") fig9(c);
    else throw PreconditionError("unknown target " + opts.target);

    Json files = Json::array();
    for (const auto& f : c.files) files.push_back(Json{{"path", f.string()}, {"digest", file_digest(f)}});
    report.doc["files"] = files;
    return report;
}

}  // namespace mpsts::cli
