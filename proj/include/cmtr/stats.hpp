#pragma once

#include <span>
#include <string>
#include <vector>

namespace cmtr::eval {

inline constexpr double kAlpha = 0.05;

struct StatReport {
    std::string test;
    double statistic = 0.0;
    double p_value = 1.0;
    bool significant = false;  // p_value < alpha
    std::vector<std::string> labels;
    std::vector<std::vector<double>> pairwise;  // post-hoc p-values
    std::string detail;
};

enum class Alternative { two_sided, greater, less };

// wilcox drops zero differences before ranking; pratt ranks them and then
// drops their ranks.
enum class ZeroMethod { wilcox, pratt };

// automatic: exact null distribution when there are at most 50 differences,
// none zero and no tied magnitudes, or at most 13 pairs in total (ties are
// then handled by enumerating sign flips of the observed ranks); the
// tie-corrected normal approximation otherwise.
enum class PValueMethod { automatic, exact, normal };

struct WilcoxonOptions {
    Alternative alternative = Alternative::two_sided;
    ZeroMethod zero_method = ZeroMethod::wilcox;
    PValueMethod method = PValueMethod::automatic;
    double alpha = kAlpha;
};

// Paired signed-rank test on a - b. The reported statistic is always the sum
// of ranks of positive differences (T+). Throws when no difference is
// non-zero.
StatReport wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                const WilcoxonOptions& options = {});

// Exact number of sign assignments of ranks 1..n reaching each T+ value
// (index = T+).
std::vector<double> signed_rank_counts(std::size_t n);

// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(std::span<const double> values);

// Friedman chi-square over k >= 3 paired columns of equal length, with the
// tie correction; chi-square p-value with k-1 degrees of freedom. Rows tied
// across every column contribute nothing; all-tied input gives 0 and p = 1.
StatReport friedman(const std::vector<std::vector<double>>& columns, double alpha = kAlpha);

// Pairwise p-values from mean-rank differences, referred to the studentized
// range distribution with infinite degrees of freedom. Symmetric with a unit
// diagonal.
std::vector<std::vector<double>> nemenyi_posthoc(const std::vector<std::vector<double>>& columns);

// Upper tail of the studentized range distribution for k groups and
// infinite degrees of freedom.
double studentized_range_sf(double q, int k);

double chi_square_sf(double x, double dof);
double normal_sf(double z);

}  // namespace cmtr::eval
