#include "discopt/disc_analytics.hpp"

#include "discopt/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace discopt::disc {

namespace {

constexpr double kSqrt3 = std::numbers::sqrt3;

void check(const DiscGeometry& g)
{
    if (!(g.pitch_circle_diameter_mm > 0.0) || !std::isfinite(g.pitch_circle_diameter_mm)) {
        throw InvalidArgument(fmt::format("pitch circle diameter must be positive, got {}", g.pitch_circle_diameter_mm));
    }
    if (g.n_buckling_links < 1) {
        throw InvalidArgument("a disc needs at least one buckling link");
    }
}

} // namespace

double resultant_force(const LinkForces& f)
{
    if (!(f.tensile_n >= 0.0) || !(f.compressive_n >= 0.0)) {
        throw InvalidArgument("link forces must be non-negative");
    }
    if (!(f.included_angle_rad > 0.0 && f.included_angle_rad < std::numbers::pi)) {
        throw InvalidArgument(fmt::format("included angle {} rad outside (0, pi)", f.included_angle_rad));
    }
    double sq = f.tensile_n * f.tensile_n + f.compressive_n * f.compressive_n +
                2.0 * f.tensile_n * f.compressive_n * std::cos(f.included_angle_rad);
    return std::sqrt(std::max(sq, 0.0));
}

double torque_capacity(double f2_n, const DiscGeometry& geom)
{
    check(geom);
    if (!(f2_n >= 0.0)) {
        throw InvalidArgument("compressive link force must be non-negative");
    }
    double const radius_m = 0.5 * geom.pitch_circle_diameter_mm * 1e-3;
    return geom.n_buckling_links * kSqrt3 * f2_n * radius_m;
}

double min_buckling_for_torque(double torque_nm, const DiscGeometry& geom)
{
    check(geom);
    if (!(torque_nm >= 0.0)) {
        throw InvalidArgument("torque must be non-negative");
    }
    double const radius_m = 0.5 * geom.pitch_circle_diameter_mm * 1e-3;
    return torque_nm / (geom.n_buckling_links * kSqrt3 * radius_m);
}

double pitch_circle_diameter_mm(double link_length_mm)
{
    return 2.0 * link_length_mm;
}

DiscGeometry six_link_geometry(const DesignPoint& x)
{
    return {pitch_circle_diameter_mm(x.length_mm), kSixLinkBucklingLinks};
}

} // namespace discopt::disc
