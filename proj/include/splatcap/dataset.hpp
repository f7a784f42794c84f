#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "splatcap/camera.hpp"
#include "splatcap/image.hpp"
#include "splatcap/template_model.hpp"

namespace splatcap {

// One 3D keypoint observation: position + confidence.
struct Keypoint3d {
    double x = 0, y = 0, z = 0, confidence = 0;
};

struct Keypoint2d {
    double u = 0, v = 0, confidence = 0;
};

// On-disk layout:
//   scene.json                  cameras, background color, T, template path
//   frames/cam{c:02}/f{t:04}.png
//   masks/cam{c:02}/f{t:04}.png   (optional, 8-bit grayscale)
//   keypoints3d.json            T x K x (xyz meters + confidence)
//   keypoints2d/cam{c:02}.json  (optional)
//   gt_poses.json               (optional)
//   template.json
struct SceneDataset {
    std::string root;
    std::vector<CameraModel> cameras;
    int frame_count = 0;
    std::array<double, 3> background{0, 0, 0};
    std::string template_file = "template.json";

    // frames[c][t]; images are pre-composited over `background` using masks
    std::vector<std::vector<Image8>> frames;
    std::vector<std::vector<Image8>> masks;                    // optional (empty if absent)
    std::vector<std::vector<Keypoint3d>> keypoints3d;          // [T][K], optional
    std::vector<std::vector<std::vector<Keypoint2d>>> keypoints2d;  // [C][T][K], optional
    std::vector<PoseState> gt_poses;                           // optional
    Tensor gt_beta;                                            // optional [B,1]

    bool has_masks() const { return !masks.empty(); }
    bool has_keypoints3d() const { return !keypoints3d.empty(); }
    bool has_gt() const { return !gt_poses.empty(); }

    void validate() const;
};

void save_dataset(const SceneDataset& ds, const std::string& dir);
SceneDataset load_dataset(const std::string& dir);

// keypoints3d.json round-trip helpers (also used by `triangulate`)
void save_keypoints3d(const std::vector<std::vector<Keypoint3d>>& kp, const std::string& path);
std::vector<std::vector<Keypoint3d>> load_keypoints3d(const std::string& path);

}  // namespace splatcap
