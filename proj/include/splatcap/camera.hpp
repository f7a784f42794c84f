#pragma once

#include <Eigen/Dense>
#include <string>

namespace splatcap {

// Pinhole camera with a rigid world-to-camera transform. Cameras are fixed
// inputs: nothing differentiates through them.
struct CameraModel {
    std::string id;
    double fx = 0, fy = 0, cx = 0, cy = 0;  // pixels
    Eigen::Matrix4d world_to_cam = Eigen::Matrix4d::Identity();
    int width = 0, height = 0;
    double near_plane = 0.01;  // meters

    Eigen::Matrix3d rotation() const { return world_to_cam.topLeftCorner<3, 3>(); }
    Eigen::Vector3d translation() const { return world_to_cam.topRightCorner<3, 1>(); }
    Eigen::Vector3d center() const { return -rotation().transpose() * translation(); }

    Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
        return rotation() * p_world + translation();
    }

    // (u, v, depth); depth <= near plane means invalid
    Eigen::Vector3d project(const Eigen::Vector3d& p_world) const {
        Eigen::Vector3d pc = to_camera(p_world);
        return {fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy, pc.z()};
    }

    // 3x4 projection matrix K [R|t]
    Eigen::Matrix<double, 3, 4> projection_matrix() const;

    void validate() const;

    // camera on a ring looking at a target (y-up world)
    static CameraModel look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                               double fx, double fy, int width, int height);
};

}  // namespace splatcap
