#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "mpsts/data.hpp"

namespace mpsts::io {

inline constexpr const char* kTraceHeader = "# mpsts-trace v1";
inline constexpr const char* kHistogramHeader = "# mpsts-histogram v1";
inline constexpr const char* kQuadratureHeader = "# mpsts-quadrature v1";

/// key=value pairs from "# k=v k=v" comment lines.
using Metadata = std::map<std::string, std::string>;

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

void write_trace(std::ostream& out, const TimeTrace& trace);
/// Records: t<TAB>channel<TAB>value with channel in {k, n, q}. An optional
/// "# duration=<seconds>" line sets TimeTrace::duration. Throws ParseError.
TimeTrace read_trace(std::istream& in);

void write_histogram(std::ostream& out, const CountHistogram& hist, const Metadata& meta);
CountHistogram read_histogram(std::istream& in, Metadata* meta = nullptr);

void write_quadratures(std::ostream& out, const QuadratureSample& sample, const Metadata& meta);
QuadratureSample read_quadratures(std::istream& in, Metadata* meta = nullptr);

// Path conveniences; throw std::runtime_error when the file cannot be opened.
void write_trace(const std::filesystem::path& path, const TimeTrace& trace);
TimeTrace read_trace(const std::filesystem::path& path);
void write_histogram(const std::filesystem::path& path, const CountHistogram& hist, const Metadata& meta);
CountHistogram read_histogram(const std::filesystem::path& path, Metadata* meta = nullptr);
void write_quadratures(const std::filesystem::path& path, const QuadratureSample& sample, const Metadata& meta);
QuadratureSample read_quadratures(const std::filesystem::path& path, Metadata* meta = nullptr);

}  // namespace mpsts::io
