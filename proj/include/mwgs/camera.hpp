#pragma once

#include "mwgs/common.hpp"

namespace mwgs {

inline constexpr double kNearPlane = 0.01;

// Pinhole camera. `orientation` rotates world into camera coordinates
// (x right, y down, z forward); `position` is the camera center in world
// units.
struct Camera {
    int width = 0;
    int height = 0;
    double fx = 0.0, fy = 0.0, cx = 0.0, cy = 0.0;
    Vec4 orientation = Vec4(1, 0, 0, 0);  // (w, x, y, z)
    Vec3 position = Vec3::Zero();

    void validate() const;
    Mat3 rotation() const;
    Vec3 world_to_camera(const Vec3& x) const { return rotation() * (x - position); }
};

struct ProjectedPoint {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

// Throws BehindCamera when depth <= kNearPlane; rendering paths use the
// non-throwing variant and cull instead.
ProjectedPoint project_point(const Camera& cam, const Vec3& x);
bool try_project_point(const Camera& cam, const Vec3& x, ProjectedPoint* out);

// Jacobian of (u, v) w.r.t. the camera-space point, evaluated at t.
Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& t);

// Rotation matrix of a raw (unnormalized) quaternion in (w, x, y, z) order;
// normalization happens inside and is differentiated by the backward form.
Mat3 quat_to_rotation(const Vec4& q);

// Accumulates d<grad_R, R(q)>/dq for raw q, chaining through normalization.
Vec4 quat_rotation_backward(const Vec4& q, const Mat3& grad_R);

}  // namespace mwgs
