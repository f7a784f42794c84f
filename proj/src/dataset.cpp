#include "splatcap/dataset.hpp"

#include <sys/stat.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace splatcap {

using nlohmann::json;

namespace {

void make_dir(const std::string& path) {
    ::mkdir(path.c_str(), 0755);  // EEXIST is fine
}

std::string cam_dir_name(std::size_t c) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "cam%02zu", c);
    return buf;
}

std::string frame_file_name(int t) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "f%04d.png", t);
    return buf;
}

}  // namespace

void SceneDataset::validate() const {
    if (frames.size() != cameras.size()) throw std::runtime_error("dataset: frames/cameras mismatch");
    for (std::size_t c = 0; c < cameras.size(); ++c) {
        if (static_cast<int>(frames[c].size()) != frame_count)
            throw std::runtime_error("dataset: camera " + cameras[c].id + " frame count mismatch");
        for (const auto& img : frames[c])
            if (img.width != cameras[c].width || img.height != cameras[c].height)
                throw std::runtime_error("dataset: image size does not match camera " + cameras[c].id);
        cameras[c].validate();
    }
    if (has_keypoints3d() && static_cast<int>(keypoints3d.size()) != frame_count)
        throw std::runtime_error("dataset: keypoints3d frame count mismatch");
    if (has_gt() && static_cast<int>(gt_poses.size()) != frame_count)
        throw std::runtime_error("dataset: gt pose count mismatch");
}

void save_keypoints3d(const std::vector<std::vector<Keypoint3d>>& kp, const std::string& path) {
    json arr = json::array();
    for (const auto& frame : kp) {
        json f = json::array();
        for (const auto& k : frame) f.push_back({k.x, k.y, k.z, k.confidence});
        arr.push_back(std::move(f));
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write keypoints: " + path);
    os << arr.dump();
}

std::vector<std::vector<Keypoint3d>> load_keypoints3d(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read keypoints: " + path);
    json arr;
    is >> arr;
    std::vector<std::vector<Keypoint3d>> kp;
    for (const auto& f : arr) {
        std::vector<Keypoint3d> frame;
        for (const auto& k : f) frame.push_back({k[0], k[1], k[2], k[3]});
        kp.push_back(std::move(frame));
    }
    return kp;
}

void save_dataset(const SceneDataset& ds, const std::string& dir) {
    make_dir(dir);
    json j;
    j["format"] = "splatcap-scene";
    j["version"] = 1;
    j["background"] = ds.background;
    j["frame_count"] = ds.frame_count;
    j["template"] = ds.template_file;
    json cams = json::array();
    for (const auto& c : ds.cameras) {
        json jc;
        jc["id"] = c.id;
        jc["fx"] = c.fx;
        jc["fy"] = c.fy;
        jc["cx"] = c.cx;
        jc["cy"] = c.cy;
        jc["width"] = c.width;
        jc["height"] = c.height;
        jc["near_plane"] = c.near_plane;
        std::vector<double> w2c(16);
        for (int r = 0; r < 4; ++r)
            for (int cc = 0; cc < 4; ++cc) w2c[static_cast<std::size_t>(r * 4 + cc)] = c.world_to_cam(r, cc);
        jc["world_to_cam"] = w2c;  // row-major
        cams.push_back(std::move(jc));
    }
    j["cameras"] = std::move(cams);
    {
        std::ofstream os(dir + "/scene.json");
        if (!os) throw std::runtime_error("cannot write scene.json");
        os << j.dump(2);
    }

    make_dir(dir + "/frames");
    for (std::size_t c = 0; c < ds.frames.size(); ++c) {
        std::string cdir = dir + "/frames/" + cam_dir_name(c);
        make_dir(cdir);
        for (int t = 0; t < ds.frame_count; ++t)
            write_png(ds.frames[c][static_cast<std::size_t>(t)], cdir + "/" + frame_file_name(t));
    }
    if (ds.has_masks()) {
        make_dir(dir + "/masks");
        for (std::size_t c = 0; c < ds.masks.size(); ++c) {
            std::string cdir = dir + "/masks/" + cam_dir_name(c);
            make_dir(cdir);
            for (int t = 0; t < ds.frame_count; ++t)
                write_png(ds.masks[c][static_cast<std::size_t>(t)], cdir + "/" + frame_file_name(t));
        }
    }
    if (ds.has_keypoints3d()) save_keypoints3d(ds.keypoints3d, dir + "/keypoints3d.json");
    if (!ds.keypoints2d.empty()) {
        make_dir(dir + "/keypoints2d");
        for (std::size_t c = 0; c < ds.keypoints2d.size(); ++c) {
            json arr = json::array();
            for (const auto& frame : ds.keypoints2d[c]) {
                json f = json::array();
                for (const auto& k : frame) f.push_back({k.u, k.v, k.confidence});
                arr.push_back(std::move(f));
            }
            std::ofstream os(dir + "/keypoints2d/" + cam_dir_name(c) + ".json");
            os << arr.dump();
        }
    }
    if (ds.has_gt()) {
        save_poses(ds.gt_poses, dir + "/gt_poses.json");
        if (!ds.gt_beta.empty()) {
            json jb;
            jb["beta"] = ds.gt_beta.v;
            std::ofstream os(dir + "/gt_shape.json");
            os << jb.dump();
        }
    }
}

SceneDataset load_dataset(const std::string& dir) {
    SceneDataset ds;
    ds.root = dir;
    std::ifstream is(dir + "/scene.json");
    if (!is) throw std::runtime_error("cannot read " + dir + "/scene.json");
    json j;
    is >> j;
    if (j.value("format", "") != "splatcap-scene") throw std::runtime_error("not a scene dir: " + dir);
    auto bg = j.at("background").get<std::vector<double>>();
    std::copy(bg.begin(), bg.end(), ds.background.begin());
    ds.frame_count = j.at("frame_count").get<int>();
    ds.template_file = j.value("template", "template.json");
    for (const auto& jc : j.at("cameras")) {
        CameraModel c;
        c.id = jc.at("id").get<std::string>();
        c.fx = jc.at("fx").get<double>();
        c.fy = jc.at("fy").get<double>();
        c.cx = jc.at("cx").get<double>();
        c.cy = jc.at("cy").get<double>();
        c.width = jc.at("width").get<int>();
        c.height = jc.at("height").get<int>();
        c.near_plane = jc.value("near_plane", 0.01);
        auto w2c = jc.at("world_to_cam").get<std::vector<double>>();
        for (int r = 0; r < 4; ++r)
            for (int cc = 0; cc < 4; ++cc) c.world_to_cam(r, cc) = w2c[static_cast<std::size_t>(r * 4 + cc)];
        ds.cameras.push_back(std::move(c));
    }

    ds.frames.resize(ds.cameras.size());
    for (std::size_t c = 0; c < ds.cameras.size(); ++c)
        for (int t = 0; t < ds.frame_count; ++t)
            ds.frames[c].push_back(read_png(dir + "/frames/" + cam_dir_name(c) + "/" + frame_file_name(t)));

    struct ::stat st {};
    if (::stat((dir + "/masks").c_str(), &st) == 0) {
        ds.masks.resize(ds.cameras.size());
        for (std::size_t c = 0; c < ds.cameras.size(); ++c)
            for (int t = 0; t < ds.frame_count; ++t)
                ds.masks[c].push_back(read_png(dir + "/masks/" + cam_dir_name(c) + "/" + frame_file_name(t)));
    }
    if (::stat((dir + "/keypoints3d.json").c_str(), &st) == 0)
        ds.keypoints3d = load_keypoints3d(dir + "/keypoints3d.json");
    if (::stat((dir + "/keypoints2d").c_str(), &st) == 0) {
        ds.keypoints2d.resize(ds.cameras.size());
        for (std::size_t c = 0; c < ds.cameras.size(); ++c) {
            std::ifstream ks(dir + "/keypoints2d/" + cam_dir_name(c) + ".json");
            if (!ks) continue;
            json arr;
            ks >> arr;
            for (const auto& f : arr) {
                std::vector<Keypoint2d> frame;
                for (const auto& k : f) frame.push_back({k[0], k[1], k[2]});
                ds.keypoints2d[c].push_back(std::move(frame));
            }
        }
    }
    if (::stat((dir + "/gt_poses.json").c_str(), &st) == 0) ds.gt_poses = load_poses(dir + "/gt_poses.json");
    if (::stat((dir + "/gt_shape.json").c_str(), &st) == 0) {
        std::ifstream bs(dir + "/gt_shape.json");
        json jb;
        bs >> jb;
        auto b = jb.at("beta").get<std::vector<double>>();
        ds.gt_beta = Tensor({b.size(), 1});
        ds.gt_beta.v = b;
    }
    ds.validate();
    return ds;
}

}  // namespace splatcap
