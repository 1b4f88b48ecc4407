#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpsts/distributions.hpp"
#include "mpsts/estimation.hpp"
#include "mpsts/pipeline.hpp"
#include "mpsts/sampling.hpp"
#include "report.hpp"

namespace mpsts::cli {

struct TheoryFlags {
    std::optional<double> mu0, m, M;
    std::optional<int> K;

    ModelParams resolve(const ModelParams& defaults) const;
};

inline constexpr ModelParams kPhotocountPoint{0.264, 2.0, 3.0, 3};
inline constexpr ModelParams kQuadraturePoint{0.752, 1.0, 5.0, 4};
inline constexpr std::int64_t kPhotocountEvents = 58623;
inline constexpr std::int64_t kQuadratureEvents = 138710;

struct SimulateOptions {
    std::string kind;
    TheoryFlags theory;
    std::int64_t n = 0;
    std::uint64_t seed = 1;
    std::string out;
    bool dark = true;
    TraceSynthesisConfig trace;
};

struct FitOptions {
    std::string kind;
    std::string data;
    std::string prior = "bayes";
    TheoryFlags theory;
    bool dark = true;
    int nodes = 61;
    int kmax = 10;
    std::map<std::string, std::string> ranges;
    std::string dump_grid;
    bool allow_boundary = false;
};

struct PipelineOptions {
    std::string trace;
    PipelineConfig config;
    int M = 3;
    int m = 2;
    std::string out;
};

struct ReproduceOptions {
    std::string target;
    std::uint64_t seed = 1;
    std::string out;
    int nodes = 61;
    int seeds = 10;
    int kmax = 10;
    bool quick = false;
    bool dark = true;
};

RunReport run_simulate(const SimulateOptions& opts, const std::vector<std::string>& args);
RunReport run_fit(const FitOptions& opts, const std::vector<std::string>& args);
RunReport run_pipeline(const PipelineOptions& opts, const std::vector<std::string>& args);
RunReport run_reproduce(const ReproduceOptions& opts, const std::vector<std::string>& args);

// Shared by fit and reproduce.

/// "none", "bayes" or "fixed:<param=value,...>" parsed into the fixed set.
struct PriorMode {
    enum class Kind { none, fixed, bayes } kind = Kind::bayes;
    std::map<Param, double> fixed;
};
PriorMode parse_prior_mode(const std::string& text);

/// Axes enclosing every K slice whose maximum-likelihood fit lies within
/// 50 log units of the best, +- width Cramer-Rao sigmas around each fit.
/// Fixed parameters collapse to one node.
GridAxes photocount_fiducial_axes(std::span<const double> counts, const ModelParams& theory,
                                  const std::map<Param, double>& fixed, const std::vector<int>& K_values,
                                  int nodes, const DarkCountConfig& dark, std::vector<std::string>* notes = nullptr,
                                  double width = 6.0);

/// Alternating conditional MLEs of the free quadrature parameters, then
/// +- 6 marginal sigmas from the 2x2 information. K and m stay fixed.
GridAxes quadrature_fiducial_axes(const QuadratureLikelihood& likelihood, const ModelParams& theory,
                                  const std::map<Param, double>& fixed, int nodes);

/// One K slice of a grid as a grid of its own.
ParameterGrid k_slice(const ParameterGrid& grid, std::size_t k);

/// Half-maximum boundary nodes of each K slice, each at half its own maximum.
void write_slice_half_max(TsvWriter& out, const std::string& label, const ParameterGrid& grid);

/// Half-maximum boundary of the (m, M) projection of each K slice: cells
/// whose maximum over mu0 reaches half the slice maximum and that touch a
/// cell below it. Columns K m M.
void write_projection_half_max(TsvWriter& out, const std::string& label, const ParameterGrid& grid);

}  // namespace mpsts::cli
