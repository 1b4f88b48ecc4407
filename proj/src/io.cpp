#include "mpsts/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mpsts/errors.hpp"

namespace mpsts::io {

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf.data(), ptr);
}

namespace {

std::string trim(std::string s) {
    const auto notspace = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
    s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
    return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& s, std::size_t line) {
    double v = 0.0;
    const auto t = trim(s);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ParseError("not a number: '" + s + "'", line);
    return v;
}

long long parse_int(const std::string& s, std::size_t line) {
    long long v = 0;
    const auto t = trim(s);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ParseError("not an integer: '" + s + "'", line);
    return v;
}

void parse_metadata(const std::string& line, Metadata* meta) {
    if (!meta) return;
    std::istringstream ss(line.substr(1));
    std::string token;
    while (ss >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos || eq == 0) continue;
        (*meta)[token.substr(0, eq)] = token.substr(eq + 1);
    }
}

void write_metadata(std::ostream& out, const Metadata& meta) {
    if (meta.empty()) return;
    out << '#';
    for (const auto& [k, v] : meta) out << ' ' << k << '=' << v;
    out << '\n';
}

// Reads the header line; throws unless it matches.
void expect_header(std::istream& in, const char* header) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != header)
        throw ParseError(std::string("expected header '") + header + "'", 1);
}

template <class T>
T open_and(const std::filesystem::path& path, auto&& fn) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return fn(in);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

void write_trace(std::ostream& out, const TimeTrace& trace) {
    trace.validate();
    out << kTraceHeader << '\n';
    if (trace.duration > 0.0) out << "# duration=" << format_double(trace.duration) << '\n';
    // Merge the three channels by time; ties keep k, n, q order.
    std::size_t ik = 0, in_ = 0, iq = 0;
    const auto& k = trace.dk_click_times;
    const auto& n = trace.dn_click_times;
    const auto& q = trace.hd_samples;
    constexpr double inf = std::numeric_limits<double>::infinity();
    while (ik < k.size() || in_ < n.size() || iq < q.size()) {
        const double tk = ik < k.size() ? k[ik] : inf;
        const double tn = in_ < n.size() ? n[in_] : inf;
        const double tq = iq < q.size() ? q[iq].first : inf;
        if (tk <= tn && tk <= tq) {
            out << format_double(tk) << "\tk\t1\n";
            ++ik;
        } else if (tn <= tq) {
            out << format_double(tn) << "\tn\t1\n";
            ++in_;
        } else {
            out << format_double(tq) << "\tq\t" << format_double(q[iq].second) << '\n';
            ++iq;
        }
    }
}

TimeTrace read_trace(std::istream& in) {
    expect_header(in, kTraceHeader);
    TimeTrace trace;
    std::string line;
    std::size_t lineno = 1;
    double last_time = -1.0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (line[0] == '#') {
            Metadata meta;
            parse_metadata(line, &meta);
            if (auto it = meta.find("duration"); it != meta.end()) trace.duration = parse_double(it->second, lineno);
            continue;
        }
        const auto fields = split_tabs(line);
        if (fields.size() != 3) throw ParseError("expected 3 tab-separated fields", lineno);
        const double t = parse_double(fields[0], lineno);
        if (!(t >= 0.0)) throw ParseError("negative time", lineno);
        if (t < last_time) throw ParseError("records not sorted by time", lineno);
        last_time = t;
        const auto channel = trim(fields[1]);
        const double value = parse_double(fields[2], lineno);
        std::vector<double>* clicks = nullptr;
        if (channel == "k") clicks = &trace.dk_click_times;
        else if (channel == "n") clicks = &trace.dn_click_times;
        else if (channel == "q") {
            if (!trace.hd_samples.empty() && !(t > trace.hd_samples.back().first))
                throw ParseError("duplicate time in channel q", lineno);
            trace.hd_samples.emplace_back(t, value);
            continue;
        } else {
            throw ParseError("unknown channel '" + channel + "'", lineno);
        }
        if (value != 1.0) throw ParseError("click records must carry value 1", lineno);
        if (!clicks->empty() && !(t > clicks->back())) throw ParseError("duplicate time in channel " + channel, lineno);
        clicks->push_back(t);
    }
    if (trace.duration > 0.0 && last_time >= trace.duration)
        throw ParseError("record beyond the stated duration", lineno);
    return trace;
}

void write_histogram(std::ostream& out, const CountHistogram& hist, const Metadata& meta) {
    out << kHistogramHeader << '\n';
    write_metadata(out, meta);
    const int last = hist.max_value();
    for (int v = 0; v <= last; ++v) out << v << '\t' << hist.count(v) << '\n';
}

CountHistogram read_histogram(std::istream& in, Metadata* meta) {
    expect_header(in, kHistogramHeader);
    CountHistogram hist;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (line[0] == '#') {
            parse_metadata(line, meta);
            continue;
        }
        const auto fields = split_tabs(line);
        if (fields.size() != 2) throw ParseError("expected N<TAB>count", lineno);
        const auto value = parse_int(fields[0], lineno);
        const auto count = parse_int(fields[1], lineno);
        if (value < 0 || count < 0) throw ParseError("negative histogram entry", lineno);
        hist.add(static_cast<int>(value), count);
    }
    return hist;
}

void write_quadratures(std::ostream& out, const QuadratureSample& sample, const Metadata& meta) {
    out << kQuadratureHeader << '\n';
    write_metadata(out, meta);
    for (double v : sample.values) out << format_double(v) << '\n';
}

QuadratureSample read_quadratures(std::istream& in, Metadata* meta) {
    expect_header(in, kQuadratureHeader);
    QuadratureSample sample;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (line[0] == '#') {
            parse_metadata(line, meta);
            continue;
        }
        sample.values.push_back(parse_double(line, lineno));
    }
    return sample;
}

void write_trace(const std::filesystem::path& path, const TimeTrace& trace) {
    auto out = open_out(path);
    write_trace(out, trace);
}

TimeTrace read_trace(const std::filesystem::path& path) {
    return open_and<TimeTrace>(path, [](std::istream& in) { return read_trace(in); });
}

void write_histogram(const std::filesystem::path& path, const CountHistogram& hist, const Metadata& meta) {
    auto out = open_out(path);
    write_histogram(out, hist, meta);
}

CountHistogram read_histogram(const std::filesystem::path& path, Metadata* meta) {
    return open_and<CountHistogram>(path, [meta](std::istream& in) { return read_histogram(in, meta); });
}

void write_quadratures(const std::filesystem::path& path, const QuadratureSample& sample, const Metadata& meta) {
    auto out = open_out(path);
    write_quadratures(out, sample, meta);
}

QuadratureSample read_quadratures(const std::filesystem::path& path, Metadata* meta) {
    return open_and<QuadratureSample>(path, [meta](std::istream& in) { return read_quadratures(in, meta); });
}

}  // namespace mpsts::io
