#pragma once

#include "eaf/pid.hpp"
#include "eaf/stage_estimator.hpp"

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace eaf {

/// Strict triangular partition over ascending peaks, with shoulder sets at
/// both ends. Memberships of neighbouring sets always sum to one.
template <std::size_t N>
class TriangularPartition {
    static_assert(N >= 2);

public:
    constexpr TriangularPartition() = default;
    constexpr explicit TriangularPartition(const std::array<double, N>& peaks) : peaks_(peaks)
    {
        for (std::size_t k = 1; k < N; ++k)
            if (!(peaks_[k] > peaks_[k - 1]))
                throw std::invalid_argument("partition peaks must be strictly ascending");
    }

    constexpr const std::array<double, N>& peaks() const noexcept { return peaks_; }

    std::array<double, N> memberships(double x) const noexcept
    {
        std::array<double, N> mu{};
        if (x <= peaks_.front()) {
            mu.front() = 1.0;
            return mu;
        }
        if (x >= peaks_.back()) {
            mu.back() = 1.0;
            return mu;
        }
        for (std::size_t k = 0; k + 1 < N; ++k) {
            if (x < peaks_[k + 1]) {
                const double right = (x - peaks_[k]) / (peaks_[k + 1] - peaks_[k]);
                mu[k] = 1.0 - right;
                mu[k + 1] = right;
                break;
            }
        }
        return mu;
    }

private:
    std::array<double, N> peaks_{};
};

inline constexpr std::size_t kProcessSets = 5;
inline constexpr std::size_t kErrorSets = 3;

using GainTable = std::array<std::array<double, kErrorSets>, kProcessSets>;

/// Rule base of the gain scheduler: 5 sets over the process variable p,
/// 3 sets over the error magnitude (one partition per stage) and one
/// (kp, ki, kd) singleton per rule.
struct FuzzyRuleBank {
    std::array<double, kProcessSets> p_peaks{0.2, 0.5, 0.8, 1.2, 1.8};
    // Per stage: meltdown, oxidation, reduction.
    std::array<std::array<double, kErrorSets>, kStageCount> y_peaks{{
        {3.0, 6.0, 9.0},
        {2.4, 4.8, 7.2},
        {2.0, 4.0, 6.0},
    }};
    // Carried with the tables; not used by the inference.
    std::array<double, kProcessSets> beta{12.0, 9.0, 6.0, 3.7, 1.2};

    GainTable kp{{
        {0.3668, 0.6655, 1.140},
        {0.4879, 0.8867, 1.514},
        {0.7197, 1.321, 2.272},
        {1.517, 3.016, 7.025},
        {3.536, 6.570, 12.19},
    }};
    GainTable ki{{
        {0.1067, 0.0017, 0.0036},
        {0.0081, 0.0049, 0.0043},
        {0.0020, 0.0018, 0.0044},
        {0.1030, 0.0034, 0.0115},
        {0.0186, 0.0173, 0.0070},
    }};
    GainTable kd{{
        {0.0053, 0.0010, 0.0014},
        {0.0019, 0.0010, 0.0013},
        {0.0088, 0.0030, 0.0009},
        {0.0015, 0.0017, 0.0007},
        {0.0030, 0.0029, 0.0031},
    }};

    PidGains rule(std::size_t i, std::size_t j) const { return {kp.at(i).at(j), ki.at(i).at(j), kd.at(i).at(j)}; }

    TriangularPartition<kProcessSets> p_partition() const { return TriangularPartition<kProcessSets>(p_peaks); }
    TriangularPartition<kErrorSets> y_partition(Stage s) const
    {
        return TriangularPartition<kErrorSets>(y_peaks[static_cast<std::size_t>(s)]);
    }

    /// Throws std::invalid_argument when peaks are not ascending or a gain is negative/non-finite.
    void validate() const
    {
        (void)p_partition();
        for (int s = 0; s < kStageCount; ++s) {
            (void)y_partition(static_cast<Stage>(s));
            if (!(y_peaks[s][0] > 0.0))
                throw std::invalid_argument("error-magnitude peaks must be positive");
        }
        for (const GainTable* t : {&kp, &ki, &kd})
            for (const auto& row : *t)
                for (double g : row)
                    if (!(g >= 0.0) || !std::isfinite(g))
                        throw std::invalid_argument("rule singletons must be finite and non-negative");
    }

    friend bool operator==(const FuzzyRuleBank&, const FuzzyRuleBank&) = default;
};

/// Sugeno inference with product firing strengths w = P_i(p) * Y_j(|e|).
/// The result is a convex combination of the singletons.
inline PidGains infer_gains(const FuzzyRuleBank& bank, double p, double y_mag, Stage stage)
{
    if (!(p >= 0.0) || !(y_mag >= 0.0) || !std::isfinite(p) || !std::isfinite(y_mag))
        throw std::domain_error("infer_gains: premises must be finite and non-negative");

    const auto mu_p = bank.p_partition().memberships(p);
    const auto mu_y = bank.y_partition(stage).memberships(y_mag);

    double w_sum = 0.0;
    PidGains g;
    for (std::size_t i = 0; i < kProcessSets; ++i) {
        if (mu_p[i] == 0.0)
            continue;
        for (std::size_t j = 0; j < kErrorSets; ++j) {
            const double w = mu_p[i] * mu_y[j];
            if (w == 0.0)
                continue;
            w_sum += w;
            g.kp += w * bank.kp[i][j];
            g.ki += w * bank.ki[i][j];
            g.kd += w * bank.kd[i][j];
        }
    }
    assert(w_sum > 0.0);
    g.kp /= w_sum;
    g.ki /= w_sum;
    g.kd /= w_sum;
    return g;
}

} // namespace eaf
