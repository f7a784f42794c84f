#include "splatcap/camera.hpp"

#include <stdexcept>

namespace splatcap {

Eigen::Matrix<double, 3, 4> CameraModel::projection_matrix() const {
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    K(0, 0) = fx;
    K(1, 1) = fy;
    K(0, 2) = cx;
    K(1, 2) = cy;
    return K * world_to_cam.topRows<3>();
}

void CameraModel::validate() const {
    if (fx <= 0 || fy <= 0) throw std::runtime_error("camera: focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::runtime_error("camera: bad dimensions");
    Eigen::Matrix3d R = rotation();
    if (((R * R.transpose()) - Eigen::Matrix3d::Identity()).norm() > 1e-6)
        throw std::runtime_error("camera: rotation block not orthonormal");
    Eigen::Vector4d bottom = world_to_cam.row(3);
    if ((bottom - Eigen::Vector4d(0, 0, 0, 1)).norm() > 1e-12)
        throw std::runtime_error("camera: bottom row must be (0,0,0,1)");
}

CameraModel CameraModel::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                                 double fx, double fy, int width, int height) {
    // camera convention: +z forward, +x right, +y down (image coordinates)
    Eigen::Vector3d fwd = (target - eye).normalized();
    Eigen::Vector3d world_up(0, 1, 0);
    Eigen::Vector3d right = fwd.cross(world_up);
    if (right.norm() < 1e-9) right = Eigen::Vector3d(1, 0, 0);
    right.normalize();
    Eigen::Vector3d down = fwd.cross(right).normalized();

    Eigen::Matrix3d R;
    R.row(0) = right.transpose();
    R.row(1) = down.transpose();
    R.row(2) = fwd.transpose();

    CameraModel cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = width * 0.5;
    cam.cy = height * 0.5;
    cam.width = width;
    cam.height = height;
    cam.world_to_cam.topLeftCorner<3, 3>() = R;
    cam.world_to_cam.topRightCorner<3, 1>() = -R * eye;
    return cam;
}

}  // namespace splatcap
