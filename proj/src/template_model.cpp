#include "splatcap/template_model.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace splatcap {

using nlohmann::json;

std::vector<int> SkinnedTemplate::body_joints() const {
    std::vector<int> out;
    for (int j = 0; j < body_joint_count; ++j) out.push_back(j);
    return out;
}

std::vector<int> SkinnedTemplate::all_hand_joints() const {
    std::vector<int> out = left_hand_joints;
    out.insert(out.end(), right_hand_joints.begin(), right_hand_joints.end());
    return out;
}

void SkinnedTemplate::validate() const {
    const std::size_t V = vertex_count();
    const std::size_t J = joint_count();
    if (V == 0 || J == 0) throw std::runtime_error("template: empty");
    if (blendshapes.cols() < 1) throw std::runtime_error("template: B must be >= 1");
    if (blendshapes.rows() != V * 3) throw std::runtime_error("template: blendshape rows != V*3");
    if (skinning_weights.rows() != V || skinning_weights.cols() != J)
        throw std::runtime_error("template: skinning weight shape");
    if (joint_regressor.rows() != J || joint_regressor.cols() != V)
        throw std::runtime_error("template: regressor shape");
    if (labels.size() != V) throw std::runtime_error("template: label count");
    if (parents[0] != -1) throw std::runtime_error("template: root parent must be -1");
    for (std::size_t j = 1; j < J; ++j)
        if (parents[j] < 0 || parents[j] >= static_cast<int>(j))
            throw std::runtime_error("template: tree not topologically sorted");
    for (std::size_t v = 0; v < V; ++v) {
        double s = 0;
        for (std::size_t j = 0; j < J; ++j) {
            double w = skinning_weights.at(v, j);
            if (w < -1e-12) throw std::runtime_error("template: negative skinning weight");
            s += w;
        }
        if (std::fabs(s - 1.0) > 1e-9)
            throw std::runtime_error("template: skinning weights row does not sum to 1");
    }
    for (std::size_t j = 0; j < J; ++j) {
        double s = 0;
        for (std::size_t v = 0; v < V; ++v) s += joint_regressor.at(j, v);
        if (std::fabs(s - 1.0) > 1e-9)
            throw std::runtime_error("template: regressor row does not sum to 1");
    }
    for (const auto& f : faces)
        for (auto vi : f)
            if (vi >= V) throw std::runtime_error("template: face index out of range");
    for (const auto& e : edge_adjacency)
        if (e[0] >= faces.size() || e[1] >= faces.size())
            throw std::runtime_error("template: adjacency face index out of range");
}

namespace {

json tensor_to_json(const Tensor& t) {
    json j;
    j["dims"] = t.dims();
    j["data"] = t.v;
    return j;
}

Tensor tensor_from_json(const json& j) {
    std::vector<std::size_t> dims = j.at("dims").get<std::vector<std::size_t>>();
    Tensor t(dims);
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    if (data.size() != t.numel()) throw std::runtime_error("tensor payload size mismatch");
    t.v = std::move(data);
    return t;
}

}  // namespace

void save_template(const SkinnedTemplate& tmpl, const std::string& path) {
    json j;
    j["format"] = "splatcap-template";
    j["version"] = 1;
    j["units"] = "meters";
    j["vertices"] = tensor_to_json(tmpl.vertices);
    json faces = json::array();
    for (const auto& f : tmpl.faces) faces.push_back({f[0], f[1], f[2]});
    j["faces"] = faces;
    j["parents"] = tmpl.parents;
    j["joint_names"] = tmpl.joint_names;
    j["joint_regressor"] = tensor_to_json(tmpl.joint_regressor);
    j["blendshapes"] = tensor_to_json(tmpl.blendshapes);
    j["skinning_weights"] = tensor_to_json(tmpl.skinning_weights);
    std::vector<int> labels;
    for (auto l : tmpl.labels) labels.push_back(static_cast<int>(l));
    j["labels"] = labels;
    json edges = json::array();
    for (const auto& e : tmpl.edge_adjacency) edges.push_back({e[0], e[1]});
    j["edge_adjacency"] = edges;
    j["pelvis"] = tmpl.pelvis;
    j["jaw"] = tmpl.jaw;
    j["left_wrist"] = tmpl.left_wrist;
    j["right_wrist"] = tmpl.right_wrist;
    j["body_joint_count"] = tmpl.body_joint_count;
    j["left_hand_joints"] = tmpl.left_hand_joints;
    j["right_hand_joints"] = tmpl.right_hand_joints;
    j["left_hand_axes"] = tensor_to_json(tmpl.left_hand_axes);
    j["right_hand_axes"] = tensor_to_json(tmpl.right_hand_axes);

    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write template: " + path);
    os << j.dump();
}

SkinnedTemplate load_template(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read template: " + path);
    json j;
    is >> j;
    if (j.value("format", "") != "splatcap-template")
        throw std::runtime_error("not a template file: " + path);

    SkinnedTemplate t;
    t.vertices = tensor_from_json(j.at("vertices"));
    for (const auto& f : j.at("faces"))
        t.faces.push_back({f[0].get<std::uint32_t>(), f[1].get<std::uint32_t>(), f[2].get<std::uint32_t>()});
    t.parents = j.at("parents").get<std::vector<int>>();
    t.joint_names = j.at("joint_names").get<std::vector<std::string>>();
    t.joint_regressor = tensor_from_json(j.at("joint_regressor"));
    t.blendshapes = tensor_from_json(j.at("blendshapes"));
    t.skinning_weights = tensor_from_json(j.at("skinning_weights"));
    for (int l : j.at("labels").get<std::vector<int>>()) t.labels.push_back(static_cast<Region>(l));
    for (const auto& e : j.at("edge_adjacency"))
        t.edge_adjacency.push_back({e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>()});
    t.pelvis = j.at("pelvis").get<int>();
    t.jaw = j.at("jaw").get<int>();
    t.left_wrist = j.at("left_wrist").get<int>();
    t.right_wrist = j.at("right_wrist").get<int>();
    t.body_joint_count = j.at("body_joint_count").get<int>();
    t.left_hand_joints = j.at("left_hand_joints").get<std::vector<int>>();
    t.right_hand_joints = j.at("right_hand_joints").get<std::vector<int>>();
    t.left_hand_axes = tensor_from_json(j.at("left_hand_axes"));
    t.right_hand_axes = tensor_from_json(j.at("right_hand_axes"));
    t.validate();
    return t;
}

void save_poses(const std::vector<PoseState>& poses, const std::string& path) {
    json j;
    j["format"] = "splatcap-poses";
    j["version"] = 1;
    j["units"] = {{"translation", "meters"}, {"rotations", "radians, axis-angle"}};
    json frames = json::array();
    for (const auto& p : poses) {
        json f;
        f["t"] = p.t;
        f["translation"] = p.translation;
        f["root_orient"] = p.root_orient;
        f["theta"] = p.theta.v;
        frames.push_back(std::move(f));
    }
    j["frames"] = std::move(frames);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write poses: " + path);
    os << j.dump();
}

std::vector<PoseState> load_poses(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read poses: " + path);
    json j;
    is >> j;
    if (j.value("format", "") != "splatcap-poses") throw std::runtime_error("not a pose file");
    std::vector<PoseState> poses;
    for (const auto& f : j.at("frames")) {
        PoseState p;
        p.t = f.at("t").get<int>();
        auto tr = f.at("translation").get<std::vector<double>>();
        auto ro = f.at("root_orient").get<std::vector<double>>();
        std::copy(tr.begin(), tr.end(), p.translation.begin());
        std::copy(ro.begin(), ro.end(), p.root_orient.begin());
        std::vector<double> th = f.at("theta").get<std::vector<double>>();
        p.theta = Tensor({th.size() / 3, 3});
        p.theta.v = std::move(th);
        poses.push_back(std::move(p));
    }
    return poses;
}

}  // namespace splatcap
