#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "covar/error.hpp"
#include "covar/harness.hpp"

namespace covar {

namespace {

constexpr const char* kCsvHeader = "n,alloc,bias,sd,rmse,cp,width,seconds";
constexpr const char* kRepHeader = "rep,point,ci_low,ci_high,has_ci,seconds";

std::string sci(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5e", v);
    return buf;
}

std::string exact(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double to_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("report: bad number '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("report: bad number '" + s + "'");
    return v;
}

std::size_t to_size(const std::string& s) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("report: bad integer '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("report: bad integer '" + s + "'");
    return static_cast<std::size_t>(v);
}

std::vector<std::string> data_lines(const std::string& text, const char* header) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != header) throw ConfigError(std::string("report: expected header '") + header + "'");
    std::vector<std::string> out;
    while (std::getline(is, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

}  // namespace

ReportFormat parse_report_format(const std::string& s) {
    if (s == "csv") return ReportFormat::Csv;
    if (s == "markdown" || s == "md") return ReportFormat::Markdown;
    throw ConfigError("unknown format '" + s + "' (csv, markdown)");
}

std::string emit_report(std::span<const MetricsRow> rows, ReportFormat format) {
    std::ostringstream os;
    if (format == ReportFormat::Csv) {
        os << kCsvHeader << '\n';
        for (const auto& r : rows)
            os << r.n << ',' << r.alloc << ',' << sci(r.bias) << ',' << sci(r.sd) << ',' << sci(r.rmse) << ','
               << sci(r.cp) << ',' << sci(r.width) << ',' << sci(r.seconds) << '\n';
        return os.str();
    }
    os << "| n | alloc | bias | sd | rmse | cp | width | seconds |\n";
    os << "|---:|:---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& r : rows)
        os << "| " << r.n << " | " << r.alloc << " | " << sci(r.bias) << " | " << sci(r.sd) << " | " << sci(r.rmse)
           << " | " << sci(r.cp) << " | " << sci(r.width) << " | " << sci(r.seconds) << " |\n";
    return os.str();
}

std::vector<MetricsRow> parse_csv_report(const std::string& text) {
    std::vector<MetricsRow> rows;
    for (const auto& line : data_lines(text, kCsvHeader)) {
        const auto f = split(line, ',');
        if (f.size() != 8) throw ConfigError("report: expected 8 fields in '" + line + "'");
        MetricsRow r;
        r.n = to_size(f[0]);
        r.alloc = f[1];
        r.bias = to_double(f[2]);
        r.sd = to_double(f[3]);
        r.rmse = to_double(f[4]);
        r.cp = to_double(f[5]);
        r.width = to_double(f[6]);
        r.seconds = to_double(f[7]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string emit_replications(std::span<const ReplicationResult> results, std::size_t first) {
    std::ostringstream os;
    os << kRepHeader << '\n';
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        os << first + i << ',' << exact(r.point) << ',' << exact(r.ci_low) << ',' << exact(r.ci_high) << ','
           << (r.has_ci ? 1 : 0) << ',' << exact(r.seconds) << '\n';
    }
    return os.str();
}

std::vector<ReplicationResult> parse_replications(const std::string& text) {
    std::vector<ReplicationResult> out;
    for (const auto& line : data_lines(text, kRepHeader)) {
        const auto f = split(line, ',');
        if (f.size() != 6) throw ConfigError("replications: expected 6 fields in '" + line + "'");
        ReplicationResult r;
        r.point = to_double(f[1]);
        r.ci_low = to_double(f[2]);
        r.ci_high = to_double(f[3]);
        r.has_ci = f[4] == "1";
        r.seconds = to_double(f[5]);
        out.push_back(r);
    }
    return out;
}

std::string reference_key(const SimplifiedDeltaGamma& model, const TailSpec& tail, double alpha, double beta,
                          std::size_t n_ref, std::uint64_t seed) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(model.hash()));
    std::ostringstream os;
    os << hash << '|' << tail.label() << '|' << exact(alpha) << '|' << exact(beta) << '|' << n_ref << '|' << seed;
    return os.str();
}

double reference_run(const SimplifiedDeltaGamma& model, const TailSpec& tail, double alpha, double beta,
                     std::size_t n_ref, std::uint64_t seed, const std::string& cache_path, bool* computed) {
    using json = nlohmann::json;
    const std::string key = reference_key(model, tail, alpha, beta, n_ref, seed);
    json cache = json::object();
    if (!cache_path.empty() && std::filesystem::exists(cache_path)) {
        std::ifstream in(cache_path);
        try {
            cache = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("reference cache '" + cache_path + "' is unreadable: " + e.what());
        }
        if (cache.contains(key)) {
            if (computed) *computed = false;
            return cache.at(key).get<double>();
        }
    }
    RngStream stream(seed, 0);
    const EstimateReport rep = is_estimate(model, tail, IsConfig::for_sample_size(n_ref), alpha, beta, stream);
    if (computed) *computed = true;
    if (!cache_path.empty()) {
        cache[key] = rep.point;
        std::ofstream out(cache_path);
        if (!out) throw ConfigError("cannot write reference cache '" + cache_path + "'");
        out << cache.dump(2) << '\n';
    }
    return rep.point;
}

}  // namespace covar
