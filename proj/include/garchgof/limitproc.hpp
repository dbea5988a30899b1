#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "garchgof/errordist.hpp"
#include "garchgof/errors.hpp"
#include "garchgof/parallel.hpp"

namespace garchgof::limitproc {

/// Significance levels of the critical-value tables.
inline constexpr std::array<double, 6> kLevels = {0.01, 0.03, 0.05, 0.10, 0.15, 0.20};
inline constexpr std::size_t kDefaultGridPoints = 2000;
inline constexpr std::size_t kDefaultReps = 10000;
inline constexpr std::uint64_t kDefaultSeed = 20060401;

/// Covariance of each coordinate of the limit process:
///   rho(x, y) = F0(min(x, y)) - F0(x) F0(y) - x y f0(x) f0(y) / (4 b2)
template <NullDistribution D>
double rho(double x, double y, const D& f0) {
    const double fx = f0.cdf(x);
    const double fy = f0.cdf(y);
    const double fmin = x <= y ? fx : fy;
    return fmin - fx * fy - x * y * f0.pdf(x) * f0.pdf(y) / (4.0 * f0.fisher_constants().b2);
}

/// `points` equally spaced values from range.lo to range.hi inclusive.
inline std::vector<double> make_grid(Interval range, std::size_t points) {
    if (points < 2) throw InputError("grid needs at least 2 points");
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i)
        g[i] = range.lo + range.width() * static_cast<double>(i) / static_cast<double>(points - 1);
    return g;
}

template <NullDistribution D>
Eigen::MatrixXd grid_covariance(const D& f0, std::span<const double> grid) {
    const auto m = static_cast<Eigen::Index>(grid.size());
    Eigen::MatrixXd c(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j <= i; ++j) c(i, j) = c(j, i) = rho(grid[i], grid[j], f0);
    return c;
}

struct Factorization {
    Eigen::MatrixXd lower;  ///< C + jitter I = L L'
    double jitter = 0.0;
};

/// Cholesky factor of a PSD covariance, escalating the diagonal jitter from
/// 1e-12 to 1e-8 while the factorization fails.
inline Factorization factor_covariance(const Eigen::MatrixXd& c) {
    const auto m = c.rows();
    for (double jitter : {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8}) {
        Eigen::LLT<Eigen::MatrixXd> llt(c + jitter * Eigen::MatrixXd::Identity(m, m));
        if (llt.info() == Eigen::Success) return {llt.matrixL(), jitter};
    }
    throw NumericError("grid covariance factorization failed after maximal jitter 1e-8");
}

/// Simulates K_r = sup_x ||Z(x)||^2 on a grid, Z having r independent coordinates
/// with covariance rho. The factorization is computed once and shared.
class LimitProcessSampler {
public:
    template <NullDistribution D>
    LimitProcessSampler(const D& f0, std::size_t grid_points, std::optional<Interval> range = std::nullopt)
        : range_(range.value_or(f0.grid_range())), grid_(make_grid(range_, grid_points)) {
        factor_ = factor_covariance(grid_covariance(f0, grid_));
    }

    [[nodiscard]] const std::vector<double>& grid() const noexcept { return grid_; }
    [[nodiscard]] Interval range() const noexcept { return range_; }
    [[nodiscard]] double jitter() const noexcept { return factor_.jitter; }

    /// out[r - 1] holds the sorted sample of K_r for r = 1..r_max. Replication k
    /// uses r_max grid paths from replication_rng(seed, k); the first r of them
    /// give K_r. Replications are processed in fixed batches, so the output
    /// does not depend on `workers`.
    [[nodiscard]] std::vector<std::vector<double>> sample(std::size_t r_max, std::size_t reps, std::uint64_t seed,
                                                          unsigned workers = 1) const {
        if (r_max < 1) throw InputError("dimension r must be at least 1");
        if (reps < 1) throw InputError("reps must be at least 1");
        constexpr std::size_t kBatch = 32;
        const auto m = static_cast<Eigen::Index>(grid_.size());
        std::vector<std::vector<double>> out(r_max, std::vector<double>(reps));
        const std::size_t batches = (reps + kBatch - 1) / kBatch;
        parallel_for(batches, workers, [&](std::size_t b) {
            const std::size_t first = b * kBatch;
            const std::size_t count = std::min(kBatch, reps - first);
            Eigen::MatrixXd z(m, static_cast<Eigen::Index>(count * r_max));
            for (std::size_t k = 0; k < count; ++k) {
                Rng rng = replication_rng(seed, first + k);
                std::normal_distribution<double> normal;
                for (std::size_t c = 0; c < r_max; ++c) {
                    auto col = z.col(static_cast<Eigen::Index>(k * r_max + c));
                    for (Eigen::Index i = 0; i < m; ++i) col[i] = normal(rng);
                }
            }
            const Eigen::MatrixXd paths = factor_.lower.triangularView<Eigen::Lower>() * z;
            Eigen::ArrayXd norm2(m);
            for (std::size_t k = 0; k < count; ++k) {
                norm2.setZero();
                for (std::size_t c = 0; c < r_max; ++c) {
                    norm2 += paths.col(static_cast<Eigen::Index>(k * r_max + c)).array().square();
                    out[c][first + k] = norm2.maxCoeff();
                }
            }
        });
        for (auto& v : out) std::sort(v.begin(), v.end());
        return out;
    }

private:
    Interval range_;
    std::vector<double> grid_;
    Factorization factor_;
};

/// Sorted sample of K for dimension r.
template <NullDistribution D>
std::vector<double> simulate_K_distribution(const D& f0, std::size_t r, std::size_t grid_points, std::size_t reps,
                                            std::uint64_t seed, unsigned workers = 1,
                                            std::optional<Interval> range = std::nullopt) {
    if (r < 1) throw InputError("dimension r must be at least 1");
    LimitProcessSampler sampler(f0, grid_points, range);
    auto all = sampler.sample(r, reps, seed, workers);
    return std::move(all.back());
}

/// Upper-alpha point of a sorted sample: the element at index
/// ceil((1 - alpha) * len) - 1.
inline double percentile(std::span<const double> sorted, double alpha) {
    if (sorted.empty()) throw InputError("percentile of an empty sample");
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    // The small offset keeps exact products such as 0.95 * 100 from rounding up.
    const double pos = (1.0 - alpha) * static_cast<double>(sorted.size());
    auto idx = static_cast<std::size_t>(std::ceil(pos - 1e-9));
    idx = std::clamp<std::size_t>(idx, 1, sorted.size());
    return sorted[idx - 1];
}

/// Fraction of the sample at or above t.
inline double upper_tail_fraction(std::span<const double> sorted, double t) {
    if (sorted.empty()) throw InputError("p-value from an empty sample");
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
    return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
}

// ---------------------------------------------------------------------------
// Reference upper percentage points (grid of 2000 points, 10^4 replications),
// rows alpha in kLevels, columns r = 1..10.

inline constexpr std::array<std::array<double, 10>, 6> kReferenceNormal = {{
    {2.465, 3.150, 3.737, 4.361, 4.769, 5.173, 5.642, 6.065, 6.508, 6.938},
    {1.890, 2.595, 3.100, 3.640, 4.094, 4.468, 4.946, 5.336, 5.677, 6.083},
    {1.650, 2.289, 2.804, 3.267, 3.751, 4.118, 4.553, 4.922, 5.298, 5.679},
    {1.317, 1.891, 2.382, 2.822, 3.262, 3.628, 4.033, 4.384, 4.716, 5.106},
    {1.113, 1.666, 2.126, 2.552, 2.980, 3.325, 3.685, 4.022, 4.367, 4.720},
    {0.988, 1.498, 1.931, 2.339, 2.750, 3.089, 3.436, 3.768, 4.101, 4.445},
}};

inline constexpr std::array<std::array<double, 10>, 6> kReferenceDoubleExponential = {{
    {2.402, 3.149, 3.702, 4.298, 4.809, 5.173, 5.683, 5.937, 6.360, 6.845},
    {1.876, 2.523, 3.073, 3.569, 4.015, 4.399, 4.872, 5.260, 5.611, 6.015},
    {1.630, 2.250, 2.781, 3.218, 3.680, 4.067, 4.500, 4.865, 5.247, 5.607},
    {1.299, 1.873, 2.344, 2.788, 3.222, 3.605, 3.969, 4.335, 4.680, 5.051},
    {1.098, 1.640, 2.092, 2.533, 2.933, 3.279, 3.639, 3.991, 4.317, 4.691},
    {0.961, 1.464, 1.902, 2.314, 2.703, 3.046, 3.399, 3.729, 4.065, 4.046},
}};

inline std::optional<std::size_t> level_index(double alpha) {
    for (std::size_t i = 0; i < kLevels.size(); ++i)
        if (std::abs(kLevels[i] - alpha) < 1e-12) return i;
    return std::nullopt;
}

/// The double exponential (r = 10, alpha = 0.20) entry breaks monotonicity in r.
inline bool is_suspect_reference(NullKind kind, std::size_t r, double alpha) {
    return kind == NullKind::DoubleExponential && r == 10 && std::abs(alpha - 0.20) < 1e-12;
}

inline std::optional<double> reference_critical_value(NullKind kind, std::size_t r, double alpha) {
    const auto li = level_index(alpha);
    if (!li || r < 1 || r > 10) return std::nullopt;
    const auto& table = kind == NullKind::StandardNormal ? kReferenceNormal : kReferenceDoubleExponential;
    return table[*li][r - 1];
}

// ---------------------------------------------------------------------------
// Critical-value tables: CSV columns family,r,alpha,value,grid_points,range_lo,range_hi,reps,seed

struct CritRow {
    std::string family;
    std::size_t r = 0;
    double alpha = 0.0;
    double value = 0.0;
    std::size_t grid_points = 0;
    double range_lo = 0.0;
    double range_hi = 0.0;
    std::size_t reps = 0;
    std::uint64_t seed = 0;
};

struct CritTable {
    std::vector<CritRow> rows;

    [[nodiscard]] std::optional<double> value(std::string_view family, std::size_t r, double alpha) const {
        for (const auto& row : rows)
            if (row.family == family && row.r == r && std::abs(row.alpha - alpha) < 1e-12) return row.value;
        return std::nullopt;
    }

    void write_csv(std::ostream& os) const {
        os << "family,r,alpha,value,grid_points,range_lo,range_hi,reps,seed\n";
        for (const auto& row : rows) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.6f", row.value);
            os << row.family << ',' << row.r << ',' << row.alpha << ',' << buf << ',' << row.grid_points << ','
               << row.range_lo << ',' << row.range_hi << ',' << row.reps << ',' << row.seed << '\n';
        }
    }

    static CritTable read_csv(std::istream& is) {
        CritTable t;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line.rfind("family", 0) == 0) continue;
            std::stringstream ss(line);
            std::vector<std::string> cells;
            for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
            if (cells.size() != 9) throw InputError("critical-value CSV line " + std::to_string(line_no) + ": expected 9 columns");
            try {
                t.rows.push_back({cells[0], std::stoul(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                                  std::stoul(cells[4]), std::stod(cells[5]), std::stod(cells[6]), std::stoul(cells[7]),
                                  std::stoull(cells[8])});
            } catch (const std::logic_error&) {
                throw InputError("critical-value CSV line " + std::to_string(line_no) + ": malformed number");
            }
        }
        return t;
    }
};

/// Percentiles of a fresh simulation for all r = 1..r_max and all kLevels.
template <NullDistribution D>
CritTable tabulate(const D& f0, std::string_view family_key, std::size_t r_max, std::size_t reps,
                   std::size_t grid_points, std::uint64_t seed, unsigned workers = 1) {
    LimitProcessSampler sampler(f0, grid_points);
    const auto samples = sampler.sample(r_max, reps, seed, workers);
    CritTable t;
    for (std::size_t r = 1; r <= r_max; ++r)
        for (double alpha : kLevels)
            t.rows.push_back({std::string(family_key), r, alpha, percentile(samples[r - 1], alpha), grid_points,
                              sampler.range().lo, sampler.range().hi, reps, seed});
    return t;
}

enum class CritMode { LookupOnly, LookupThenSimulate };

/// Reference table value when (r, alpha) is tabulated (suspect entries
/// excluded); otherwise, unless lookup-only, a fresh simulation with the
/// default grid and replication count.
inline double critical_value(const NullFamily& f0, std::size_t r, double alpha,
                             CritMode mode = CritMode::LookupThenSimulate, unsigned workers = 1) {
    if (!is_suspect_reference(f0.kind(), r, alpha))
        if (auto v = reference_critical_value(f0.kind(), r, alpha)) return *v;
    if (mode == CritMode::LookupOnly)
        throw InputError("no tabulated critical value for r = " + std::to_string(r) + ", alpha = " + std::to_string(alpha));
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    const auto sample = simulate_K_distribution(f0, r, kDefaultGridPoints, kDefaultReps, kDefaultSeed, workers);
    return percentile(sample, alpha);
}

}  // namespace garchgof::limitproc
