#include "dilo/util.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dilo/errors.hpp"

namespace dilo {

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double chi_square_critical_99(int dof) {
    if (dof < 1) throw std::invalid_argument("chi_square_critical_99: dof must be >= 1");
    // z-score for the 0.99 quantile of the standard normal.
    const double z = 2.3263478740408408;
    double k = static_cast<double>(dof);
    double a = 2.0 / (9.0 * k);
    double c = 1.0 - a + z * std::sqrt(a);
    return k * c * c * c;
}

double chi_square_statistic(const std::vector<long long>& counts,
                            const std::vector<double>& probs) {
    if (counts.size() != probs.size())
        throw std::invalid_argument("chi_square_statistic: size mismatch");
    long long total = 0;
    for (long long c : counts) total += c;
    double stat = 0.0;
    for (size_t i = 0; i < counts.size(); ++i) {
        double expected = probs[i] * static_cast<double>(total);
        if (expected <= 0.0) {
            if (counts[i] != 0)
                throw std::invalid_argument("chi_square_statistic: count in zero-probability cell");
            continue;
        }
        double diff = static_cast<double>(counts[i]) - expected;
        stat += diff * diff / expected;
    }
    return stat;
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) throw IoError("cannot create directory '" + path + "': " + ec.message());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("short write to '" + path + "'");
}

}  // namespace dilo
