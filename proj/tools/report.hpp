#pragma once

// Run reports and plot-data helpers shared by the mpsts commands.

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mpsts/estimation.hpp"

namespace mpsts::cli {

using Json = nlohmann::ordered_json;

/// Exit code for a warning escalated to failure (grid maximum on an edge).
inline constexpr int kExitWarning = 3;

struct RunReport {
    Json doc = Json::object();
    std::vector<std::string> warnings;
    bool escalate = false;

    RunReport(std::string command, const std::vector<std::string>& args);
    void warn(const std::string& message, bool escalated = false);
    /// Finalizes warnings and serializes with two-space indentation.
    std::string dump();
};

/// FNV-1a 64-bit digest of a file, "fnv1a64:<hex>".
std::string file_digest(const std::filesystem::path& path);

Json params_json(const ModelParams& p);
Json summary_json(const EstimateSummary& s);
Json prior_json(const PriorSpec& p);
Json grid_json(const ParameterGrid& g);

/// Writes "# <header>" then tab-separated rows.
class TsvWriter {
public:
    TsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns,
              const std::vector<std::string>& comments = {});
    TsvWriter& operator<<(double v);
    TsvWriter& operator<<(const std::string& v);
    void end_row();

private:
    std::ofstream out_;
    bool first_ = true;
};

/// Every node: K m M mu0 log_density density.
void write_grid(const std::filesystem::path& path, const ParameterGrid& grid);
/// Half-maximum boundary nodes with a leading label column.
void write_half_max(TsvWriter& out, const std::string& label, const ParameterGrid& grid);

}  // namespace mpsts::cli
