#pragma once

#include "discopt/dataset.hpp"

#include <numbers>

namespace discopt::disc {

/// Angle between adjacent links of a six-link disc at a joint.
inline constexpr double kSixLinkIncludedAngleRad = std::numbers::pi / 3.0;

/// Links of a six-link disc that carry compression (and so buckle) under torque.
inline constexpr int kSixLinkBucklingLinks = 3;

// Reactions at a joint: F1 from the stretched link, F2 from the compressed one.
struct LinkForces {
    double tensile_n{};
    double compressive_n{};
    double included_angle_rad{kSixLinkIncludedAngleRad};
};

struct DiscGeometry {
    double pitch_circle_diameter_mm{};
    int n_buckling_links{kSixLinkBucklingLinks};
};

/// Magnitude of the joint resultant, sqrt(F1^2 + F2^2 + 2 F1 F2 cos(theta)).
double resultant_force(const LinkForces& forces);

/// Torque in N*m transmitted when each compressed link carries f2_n newtons,
/// with both link forces equal: n_links * sqrt(3) * F2 * d / 2.
double torque_capacity(double f2_n, const DiscGeometry& geom);

/// Compressive link force needed to transmit torque_nm; inverse of torque_capacity.
double min_buckling_for_torque(double torque_nm, const DiscGeometry& geom);

/// Pitch circle diameter of a six-link disc with the given link length.
///
/// Six joints on a circle are 60 degrees apart, so each link is a chord equal
/// to the radius and d = 2 * l. Kept in one place so another convention can be
/// substituted.
double pitch_circle_diameter_mm(double link_length_mm);

DiscGeometry six_link_geometry(const DesignPoint& x);

} // namespace discopt::disc
