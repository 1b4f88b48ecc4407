#include "report.hpp"

#include <cstdio>
#include <stdexcept>

#include "mpsts/io.hpp"

namespace mpsts::cli {

RunReport::RunReport(std::string command, const std::vector<std::string>& args) {
    doc["command"] = std::move(command);
    doc["args"] = args;
}

void RunReport::warn(const std::string& message, bool escalated) {
    warnings.push_back(message);
    escalate = escalate || escalated;
}

std::string RunReport::dump() {
    doc["warnings"] = warnings;
    doc["status"] = escalate ? "warning" : "ok";
    return doc.dump(2);
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + hex;
}

Json params_json(const ModelParams& p) {
    return Json{{"mu0", p.mu0}, {"m", p.m}, {"M", p.M}, {"K", p.K}};
}

Json summary_json(const EstimateSummary& s) {
    Json j = Json::object();
    for (Param p : {Param::m, Param::M, Param::mu0, Param::K}) {
        const Moment& mo = s[p];
        j[std::string(param_name(p))] = Json{{"mean", mo.mean}, {"sd", mo.sd}, {"varied", mo.varied}};
    }
    j["delta"] = s.delta;
    return j;
}

Json prior_json(const PriorSpec& p) {
    Json j = Json::object();
    for (Param q : kContinuousParams) j[std::string(param_name(q))] = Json{{"mean", p[q].mean}, {"sigma", p[q].sigma}};
    j["K_fixed"] = p.K_fixed;
    return j;
}

Json grid_json(const ParameterGrid& g) {
    const auto& a = g.axes();
    auto axis = [](const std::vector<double>& v) { return Json{{"from", v.front()}, {"to", v.back()}, {"nodes", v.size()}}; };
    return Json{{"mu0", axis(a.mu0)},
                {"m", axis(a.m)},
                {"M", axis(a.M)},
                {"K", Json{{"from", a.K.front()}, {"to", a.K.back()}}},
                {"argmax", params_json(g.params_at(g.argmax()))},
                {"max_on_boundary", g.max_on_boundary()},
                {"normalization", g.normalization()}};
}

TsvWriter::TsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns,
                     const std::vector<std::string>& comments)
    : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    for (const auto& c : comments) out_ << "# " << c << '\n';
    out_ << '#';
    for (const auto& c : columns) out_ << (&c == &columns.front() ? " " : "\t") << c;
    out_ << '\n';
}

TsvWriter& TsvWriter::operator<<(double v) { return *this << io::format_double(v); }

TsvWriter& TsvWriter::operator<<(const std::string& v) {
    if (!first_) out_ << '\t';
    out_ << v;
    first_ = false;
    return *this;
}

void TsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
}

void write_grid(const std::filesystem::path& path, const ParameterGrid& grid) {
    TsvWriter out(path, {"K", "m", "M", "mu0", "log_density", "density"});
    for (std::size_t i = 0; i < grid.density().size(); ++i) {
        const ModelParams p = grid.params_at(i);
        out << static_cast<double>(p.K) << p.m << p.M << p.mu0 << grid.log_density()[i] << grid.density()[i];
        out.end_row();
    }
}

void write_half_max(TsvWriter& out, const std::string& label, const ParameterGrid& grid) {
    for (std::size_t i : grid.half_max_boundary()) {
        const ModelParams p = grid.params_at(i);
        out << label << static_cast<double>(p.K) << p.m << p.M << p.mu0 << grid.density()[i];
        out.end_row();
    }
}

}  // namespace mpsts::cli
