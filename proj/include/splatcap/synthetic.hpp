#pragma once

#include <string>
#include <vector>

#include "splatcap/dataset.hpp"
#include "splatcap/rng.hpp"
#include "splatcap/template_model.hpp"

namespace splatcap {

// Procedural humanoid: ~1.5k vertices, 24 body joints + jaw + 2x15 hand
// joints, 4 shape blendshapes, region labels, hand axis tables.
SkinnedTemplate make_procedural_humanoid();

// Smooth random joint trajectories within limits; hands driven through the
// anatomy-consistent parametrization so ground truth is always plausible.
std::vector<PoseState> scripted_pose_sequence(const SkinnedTemplate& tmpl, int frames, Rng rng);

// Smooth per-vertex color field used for the oracle avatar's appearance.
Tensor procedural_vertex_colors(const SkinnedTemplate& tmpl, Rng rng);

struct SyntheticConfig {
    int frames = 30;
    int cameras = 4;
    int width = 256;
    int height = 256;
    double keypoint_noise = 0.0;   // meters, isotropic
    double keypoint2d_noise = 0.0; // pixels
    double ring_radius = 2.6;      // camera ring radius, meters
    int primitives_per_face = 2;   // oracle avatar
    bool write_masks = true;
    std::uint64_t seed = 1;
};

// Generates the full on-disk dataset (scene.json, frames, masks, keypoints,
// gt_poses, template) by rendering a held-out oracle avatar with this
// artifact's own renderer. Returns the in-memory dataset as well.
SceneDataset generate_synthetic_scene(const SyntheticConfig& cfg, const std::string& out_dir);

}  // namespace splatcap
