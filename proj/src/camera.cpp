#include "mwgs/camera.hpp"

namespace mwgs {

void Camera::validate() const {
    if (width <= 0 || height <= 0) throw InvalidParameter("camera: non-positive image size");
    if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidParameter("camera: focal lengths must be positive");
    if (!orientation.allFinite() || !position.allFinite() || !std::isfinite(cx) || !std::isfinite(cy))
        throw InvalidParameter("camera: non-finite fields");
    if (std::abs(orientation.norm() - 1.0) > 1e-9)
        throw InvalidParameter("camera: orientation quaternion must be unit length");
}

Mat3 Camera::rotation() const { return quat_to_rotation(orientation); }

bool try_project_point(const Camera& cam, const Vec3& x, ProjectedPoint* out) {
    const Vec3 t = cam.world_to_camera(x);
    if (!(t.z() > kNearPlane)) return false;
    out->u = cam.fx * t.x() / t.z() + cam.cx;
    out->v = cam.fy * t.y() / t.z() + cam.cy;
    out->depth = t.z();
    return true;
}

ProjectedPoint project_point(const Camera& cam, const Vec3& x) {
    ProjectedPoint p;
    if (!try_project_point(cam, x, &p)) throw BehindCamera("point at or behind the near plane");
    return p;
}

Eigen::Matrix<double, 2, 3> projection_jacobian(const Camera& cam, const Vec3& t) {
    const double z = t.z();
    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx / z, 0.0, -cam.fx * t.x() / (z * z),
         0.0, cam.fy / z, -cam.fy * t.y() / (z * z);
    return J;
}

Mat3 quat_to_rotation(const Vec4& q) {
    if (!q.allFinite()) throw InvalidParameter("quaternion has non-finite entries");
    const double n = q.norm();
    if (!(n > 0.0)) throw InvalidParameter("zero quaternion");
    const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Vec4 quat_rotation_backward(const Vec4& q, const Mat3& grad_R) {
    const double n = q.norm();
    const Vec4 u = q / n;
    const double w = u[0], x = u[1], y = u[2], z = u[3];

    Mat3 dRdw, dRdx, dRdy, dRdz;
    dRdw << 0, -z, y,
            z, 0, -x,
            -y, x, 0;
    dRdx << 0, y, z,
            y, -2 * x, -w,
            z, w, -2 * x;
    dRdy << -2 * y, x, w,
            x, 0, z,
            -w, z, -2 * y;
    dRdz << -2 * z, -w, x,
            w, -2 * z, y,
            x, y, 0;

    Vec4 g_unit;
    g_unit[0] = 2.0 * (grad_R.cwiseProduct(dRdw)).sum();
    g_unit[1] = 2.0 * (grad_R.cwiseProduct(dRdx)).sum();
    g_unit[2] = 2.0 * (grad_R.cwiseProduct(dRdy)).sum();
    g_unit[3] = 2.0 * (grad_R.cwiseProduct(dRdz)).sum();

    // Chain through u = q / |q|.
    return (g_unit - u * u.dot(g_unit)) / n;
}

}  // namespace mwgs
