#pragma once

#include <string>
#include <vector>

namespace dilo {

// Shortest round-trip decimal representation of a double (to_chars based).
// Used for every number we persist so that identical runs produce identical
// bytes on disk.
std::string format_double(double x);

// Upper critical value of the chi-square distribution with k degrees of
// freedom at right-tail probability 0.01 (Wilson-Hilferty approximation).
// Good to ~1e-3 relative error for k >= 3, plenty for goodness-of-fit gates.
double chi_square_critical_99(int dof);

// Pearson chi-square goodness-of-fit statistic for observed counts against
// expected probabilities (cells with expected probability 0 must have count 0).
double chi_square_statistic(const std::vector<long long>& counts,
                            const std::vector<double>& probs);

// Create directories recursively; throws IoError on failure.
void ensure_dir(const std::string& path);

// Whole-file read/write helpers; throw IoError on failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace dilo
