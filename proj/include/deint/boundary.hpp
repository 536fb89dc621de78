#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "deint/error.hpp"

namespace deint {

/// Probability threshold b(l) = 1 - scale * max(0, (l - m) / (m_max - m))^shape
/// for l enrolled patients, with the rule inactive (b = 1) below the
/// activation count m.
struct BoundarySpec {
    double scale = 0.0;
    double shape = 0.0;
    int activation = 0;
    int max_enrollment = 1;

    /// The enrollment-dependent factor multiplying the scale; 0 when the rule
    /// is inactive.
    double weight(int enrolled) const {
        if (enrolled < activation) return 0.0;
        const double span = static_cast<double>(max_enrollment - activation);
        const double ratio = span > 0.0 ? std::max(0.0, (enrolled - activation) / span) : 1.0;
        return std::pow(ratio, shape);
    }

    /// True when the boundary can be below 1 for some scale > 0.
    bool can_fire(int enrolled) const { return weight(enrolled) > 0.0; }

    void validate(const std::string& name) const {
        if (!(scale >= 0.0 && scale <= 1.0)) throw InvalidArgument(name + ": scale must lie in [0, 1]");
        if (!(shape >= 0.0) || !std::isfinite(shape)) throw InvalidArgument(name + ": shape must be >= 0");
        if (activation < 0 || activation > max_enrollment)
            throw InvalidArgument(name + ": activation must lie in [0, m_max]");
    }
};

/// Boundary value at `enrolled` patients; requires 1 <= enrolled <= m_max.
inline double boundary_value(const BoundarySpec& b, int enrolled) {
    if (enrolled < 1 || enrolled > b.max_enrollment)
        throw InvalidArgument("enrollment count " + std::to_string(enrolled) + " outside [1, " +
                              std::to_string(b.max_enrollment) + "]");
    return 1.0 - b.scale * b.weight(enrolled);
}

/// Smallest scale at which a strict rule `probability > b(enrolled)` fires:
/// (1 - probability) / weight, or +infinity when the rule is inactive.
inline double critical_scale(const BoundarySpec& b, int enrolled, double probability) {
    const double w = b.weight(enrolled);
    if (w <= 0.0) return std::numeric_limits<double>::infinity();
    return (1.0 - probability) / w;
}

}  // namespace deint
