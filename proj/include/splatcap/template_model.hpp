#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "splatcap/tensor.hpp"

namespace splatcap {

enum class Region : std::uint8_t { Body = 0, Hand = 1, Face = 2 };

// Skinned template asset: canonical T-pose mesh, kinematic tree, skinning
// weights, shape blendshapes and joint regressor. Units are meters; the tree
// is topologically sorted (parent index < joint index, root parent -1).
struct SkinnedTemplate {
    Tensor vertices;          // V x 3
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<int> parents;          // J, root = -1
    std::vector<std::string> joint_names;
    Tensor joint_regressor;   // J x V, rows sum to 1
    Tensor blendshapes;       // (V*3) x B displacement basis (row-major over vertex xyz)
    Tensor skinning_weights;  // V x J, rows sum to 1
    std::vector<Region> labels;  // V
    std::vector<std::array<std::uint32_t, 2>> edge_adjacency;  // pairs of face indices

    // named structure
    int pelvis = 0;
    int jaw = -1;
    int left_wrist = -1;
    int right_wrist = -1;
    int body_joint_count = 0;                 // body joints occupy [0, body_joint_count)
    std::vector<int> left_hand_joints;        // 15, finger-major (3 per finger)
    std::vector<int> right_hand_joints;       // 15
    // per hand-joint local rotation axes at rest, rows: bend, spread, twist
    Tensor left_hand_axes;   // 15 x 9
    Tensor right_hand_axes;  // 15 x 9

    std::size_t vertex_count() const { return vertices.rows(); }
    std::size_t face_count() const { return faces.size(); }
    std::size_t joint_count() const { return parents.size(); }
    std::size_t shape_dim() const { return blendshapes.cols(); }

    std::vector<int> body_joints() const;
    std::vector<int> all_hand_joints() const;

    // throws on violated invariants (weight/regressor row sums, tree order,
    // label count, B >= 1)
    void validate() const;
};

// Per-frame pose: global transform plus per-joint axis-angle rotations.
// theta row j-1 belongs to joint j (the root is driven by root_orient).
struct PoseState {
    int t = 0;
    std::array<double, 3> translation{0, 0, 0};
    std::array<double, 3> root_orient{0, 0, 0};
    Tensor theta;  // (J-1) x 3 radians

    static PoseState rest(std::size_t joint_count, int t = 0) {
        PoseState p;
        p.t = t;
        p.theta = Tensor({joint_count - 1, 3});
        return p;
    }
};

void save_template(const SkinnedTemplate& tmpl, const std::string& path);
SkinnedTemplate load_template(const std::string& path);

// pose sequence export (structured text, one record per frame)
void save_poses(const std::vector<PoseState>& poses, const std::string& path);
std::vector<PoseState> load_poses(const std::string& path);

}  // namespace splatcap
