#include "splatcap/synthetic.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "splatcap/hand_pose.hpp"

namespace splatcap {

namespace {

using Eigen::Vector3d;
using RingMap = std::vector<std::pair<int, double>>;

constexpr double kPi = 3.14159265358979323846;

// body joint ids
enum BodyJoint : int {
    PELVIS = 0, SPINE1, SPINE2, SPINE3, CHEST, NECK, HEAD,
    L_HIP, L_KNEE, L_ANKLE, L_FOOT,
    R_HIP, R_KNEE, R_ANKLE, R_FOOT,
    L_CLAV, L_SHOULDER, L_ELBOW, L_WRIST,
    R_CLAV, R_SHOULDER, R_ELBOW, R_WRIST,
    HEAD_TOP,  // = 23
    JAW = 24,  // first non-body joint
};
constexpr int kBodyJoints = 24;
constexpr int kLeftHandBase = 25;   // 15 joints
constexpr int kRightHandBase = 40;  // 15 joints
constexpr int kJointCount = 55;

struct MeshBuilder {
    std::vector<Vector3d> verts;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<RingMap> weights;
    std::vector<Region> labels;

    std::uint32_t add_vertex(const Vector3d& p, const RingMap& w, Region label) {
        verts.push_back(p);
        weights.push_back(w);
        labels.push_back(label);
        return static_cast<std::uint32_t>(verts.size() - 1);
    }

    // orthonormal frame perpendicular to d
    static void frame(const Vector3d& d, Vector3d& u, Vector3d& v) {
        Vector3d a = std::fabs(d.y()) < 0.9 ? Vector3d(0, 1, 0) : Vector3d(1, 0, 0);
        u = d.cross(a).normalized();
        v = d.cross(u).normalized();
    }

    std::vector<std::uint32_t> add_ring(const Vector3d& center, const Vector3d& dir, double radius,
                                        int nsides, const RingMap& w, Region label) {
        Vector3d u, v;
        frame(dir.normalized(), u, v);
        std::vector<std::uint32_t> ring;
        for (int k = 0; k < nsides; ++k) {
            double a = 2.0 * kPi * k / nsides;
            ring.push_back(add_vertex(center + radius * (std::cos(a) * u + std::sin(a) * v), w, label));
        }
        return ring;
    }

    void connect(const std::vector<std::uint32_t>& r0, const std::vector<std::uint32_t>& r1) {
        const std::size_t n = r0.size();
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t k1 = (k + 1) % n;
            faces.push_back({r0[k], r1[k], r0[k1]});
            faces.push_back({r0[k1], r1[k], r1[k1]});
        }
    }

    void cap(const std::vector<std::uint32_t>& ring, const Vector3d& center, const RingMap& w,
             Region label) {
        std::uint32_t c = add_vertex(center, w, label);
        const std::size_t n = ring.size();
        for (std::size_t k = 0; k < n; ++k) faces.push_back({c, ring[k], ring[(k + 1) % n]});
    }

    // ensure outward orientation for faces [begin, end) of a tube around the
    // polyline; the construction is orientation-consistent per tube, so one
    // majority vote decides a flip of the whole range
    void orient_outward(std::size_t face_begin, const std::vector<Vector3d>& axis_pts) {
        double score = 0;
        for (std::size_t f = face_begin; f < faces.size(); ++f) {
            auto& fc = faces[f];
            Vector3d a = verts[fc[0]], b = verts[fc[1]], c = verts[fc[2]];
            Vector3d n = (b - a).cross(c - a);
            Vector3d centroid = (a + b + c) / 3.0;
            // nearest axis polyline point
            double best = 1e30;
            Vector3d nearest = axis_pts[0];
            for (std::size_t s = 0; s + 1 < axis_pts.size(); ++s) {
                Vector3d d = axis_pts[s + 1] - axis_pts[s];
                double len2 = d.squaredNorm();
                double t = len2 > 0 ? (centroid - axis_pts[s]).dot(d) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                Vector3d p = axis_pts[s] + t * d;
                double dist = (centroid - p).squaredNorm();
                if (dist < best) {
                    best = dist;
                    nearest = p;
                }
            }
            score += n.dot(centroid - nearest);
        }
        if (score < 0)
            for (std::size_t f = face_begin; f < faces.size(); ++f) std::swap(faces[f][1], faces[f][2]);
    }

    // tube through pts with per-segment driving joints; boundary rings blend
    // the two adjacent drivers, interior rings follow their segment rigidly
    void add_polytube(const std::vector<Vector3d>& pts, const std::vector<double>& radii,
                      const std::vector<int>& drivers, RingMap start_map, RingMap end_map,
                      int nsides, int subdiv, Region label, bool cap_start, bool cap_end) {
        std::size_t face_begin = faces.size();
        const std::size_t m = pts.size() - 1;  // segments
        std::vector<std::uint32_t> prev;
        std::vector<std::uint32_t> first_ring;
        for (std::size_t k = 0; k <= m; ++k) {
            RingMap map;
            if (k == 0)
                map = start_map;
            else if (k == m)
                map = end_map;
            else
                map = {{drivers[k - 1], 0.5}, {drivers[k], 0.5}};
            Vector3d dir;
            if (k == 0)
                dir = pts[1] - pts[0];
            else if (k == m)
                dir = pts[m] - pts[m - 1];
            else
                dir = (pts[k + 1] - pts[k]).normalized() + (pts[k] - pts[k - 1]).normalized();
            auto ring = add_ring(pts[k], dir, radii[k], nsides, map, label);
            if (k == 0) first_ring = ring;
            if (!prev.empty()) connect(prev, ring);
            prev = ring;
            if (k < m && subdiv > 0) {
                for (int s = 1; s <= subdiv; ++s) {
                    double t = static_cast<double>(s) / (subdiv + 1);
                    Vector3d p = (1 - t) * pts[k] + t * pts[k + 1];
                    double r = (1 - t) * radii[k] + t * radii[k + 1];
                    auto iring = add_ring(p, pts[k + 1] - pts[k], r, nsides, {{drivers[k], 1.0}}, label);
                    connect(prev, iring);
                    prev = iring;
                }
            }
        }
        if (cap_start)
            cap(first_ring, pts[0] - 0.4 * radii[0] * (pts[1] - pts[0]).normalized(), start_map, label);
        if (cap_end)
            cap(prev, pts[m] + 0.4 * radii[m] * (pts[m] - pts[m - 1]).normalized(), end_map, label);
        orient_outward(face_begin, pts);
    }
};

double gauss(double x, double mu, double sigma) {
    double d = (x - mu) / sigma;
    return std::exp(-0.5 * d * d);
}

// left-hand DoF rotation axes; the right hand mirrors x
Tensor hand_axes_table(int side /* +1 left, -1 right */) {
    Tensor axes({15, 9});
    double s = static_cast<double>(side);
    for (int f = 0; f < 5; ++f)
        for (int seg = 0; seg < 3; ++seg) {
            int j = f * 3 + seg;
            double bend[3], spread[3], twist[3];
            if (f == 0) {
                // thumb points diagonally (+x,+z in the left hand)
                double inv = 1.0 / std::sqrt(2.0);
                bend[0] = s * inv;
                bend[1] = 0;
                bend[2] = -inv;
                spread[0] = 0;
                spread[1] = -s;
                spread[2] = 0;
                twist[0] = s * inv;
                twist[1] = 0;
                twist[2] = inv;
            } else {
                // fingers along +-x, palms facing down (-y)
                bend[0] = 0;
                bend[1] = 0;
                bend[2] = -s;
                spread[0] = 0;
                spread[1] = -s;
                spread[2] = 0;
                twist[0] = s;
                twist[1] = 0;
                twist[2] = 0;
            }
            for (int k = 0; k < 3; ++k) {
                axes.at(j, k) = bend[k];
                axes.at(j, 3 + k) = spread[k];
                axes.at(j, 6 + k) = twist[k];
            }
        }
    return axes;
}

}  // namespace

SkinnedTemplate make_procedural_humanoid() {
    // joint rest positions (y-up, meters, ~1.7 m tall)
    std::vector<Vector3d> joints(kJointCount);
    std::vector<int> parents(kJointCount, -1);
    std::vector<std::string> names(kJointCount);

    auto J = [&](int id, const char* name, int parent, double x, double y, double z) {
        joints[id] = Vector3d(x, y, z);
        parents[id] = parent;
        names[id] = name;
    };
    J(PELVIS, "pelvis", -1, 0, 0.95, 0);
    J(SPINE1, "spine1", PELVIS, 0, 1.05, 0);
    J(SPINE2, "spine2", SPINE1, 0, 1.15, 0);
    J(SPINE3, "spine3", SPINE2, 0, 1.25, 0);
    J(CHEST, "chest", SPINE3, 0, 1.35, 0);
    J(NECK, "neck", CHEST, 0, 1.43, 0);
    J(HEAD, "head", NECK, 0, 1.52, 0);
    J(L_HIP, "l_hip", PELVIS, 0.09, 0.90, 0);
    J(L_KNEE, "l_knee", L_HIP, 0.10, 0.50, 0);
    J(L_ANKLE, "l_ankle", L_KNEE, 0.10, 0.10, 0);
    J(L_FOOT, "l_foot", L_ANKLE, 0.10, 0.03, 0.12);
    J(R_HIP, "r_hip", PELVIS, -0.09, 0.90, 0);
    J(R_KNEE, "r_knee", R_HIP, -0.10, 0.50, 0);
    J(R_ANKLE, "r_ankle", R_KNEE, -0.10, 0.10, 0);
    J(R_FOOT, "r_foot", R_ANKLE, -0.10, 0.03, 0.12);
    J(L_CLAV, "l_clavicle", CHEST, 0.06, 1.40, 0);
    J(L_SHOULDER, "l_shoulder", L_CLAV, 0.18, 1.40, 0);
    J(L_ELBOW, "l_elbow", L_SHOULDER, 0.45, 1.40, 0);
    J(L_WRIST, "l_wrist", L_ELBOW, 0.70, 1.40, 0);
    J(R_CLAV, "r_clavicle", CHEST, -0.06, 1.40, 0);
    J(R_SHOULDER, "r_shoulder", R_CLAV, -0.18, 1.40, 0);
    J(R_ELBOW, "r_elbow", R_SHOULDER, -0.45, 1.40, 0);
    J(R_WRIST, "r_wrist", R_ELBOW, -0.70, 1.40, 0);
    J(HEAD_TOP, "head_top", HEAD, 0, 1.68, 0);
    J(JAW, "jaw", HEAD, 0, 1.50, 0.05);

    // hands: 5 fingers x 3 segments, finger-major (thumb first)
    const char* finger_names[5] = {"thumb", "index", "middle", "ring", "pinky"};
    struct FingerGeom {
        Vector3d base;
        Vector3d dir;
        double l1, l2, l3;
    };
    auto finger_geom = [&](int side, int f) -> FingerGeom {
        double s = static_cast<double>(side);
        double wx = side > 0 ? 0.70 : -0.70;
        if (f == 0) {
            double inv = 1.0 / std::sqrt(2.0);
            return {Vector3d(wx + s * 0.045, 1.40, 0.035), Vector3d(s * inv, 0, inv), 0.032, 0.028, 0.022};
        }
        double zoff[5] = {0, 0.024, 0.008, -0.008, -0.024};
        double len[5][3] = {{0, 0, 0},
                            {0.034, 0.024, 0.019},
                            {0.036, 0.026, 0.020},
                            {0.033, 0.024, 0.018},
                            {0.026, 0.018, 0.014}};
        return {Vector3d(wx + s * 0.065, 1.40, zoff[f]), Vector3d(s, 0, 0), len[f][0], len[f][1],
                len[f][2]};
    };
    for (int side = 0; side < 2; ++side) {
        int base = side == 0 ? kLeftHandBase : kRightHandBase;
        int wrist = side == 0 ? L_WRIST : R_WRIST;
        int sgn = side == 0 ? 1 : -1;
        const char* prefix = side == 0 ? "l_" : "r_";
        for (int f = 0; f < 5; ++f) {
            FingerGeom g = finger_geom(sgn, f);
            Vector3d p1 = g.base;
            Vector3d p2 = p1 + g.l1 * g.dir;
            Vector3d p3 = p2 + g.l2 * g.dir;
            int j0 = base + f * 3, j1 = j0 + 1, j2 = j0 + 2;
            joints[j0] = p1;
            joints[j1] = p2;
            joints[j2] = p3;
            parents[j0] = wrist;
            parents[j1] = j0;
            parents[j2] = j1;
            names[j0] = std::string(prefix) + finger_names[f] + "1";
            names[j1] = std::string(prefix) + finger_names[f] + "2";
            names[j2] = std::string(prefix) + finger_names[f] + "3";
        }
    }

    MeshBuilder mb;

    // torso
    mb.add_polytube(
        {Vector3d(0, 0.80, 0), joints[PELVIS], joints[SPINE1], joints[SPINE2], joints[SPINE3],
         joints[CHEST], Vector3d(0, 1.42, 0)},
        {0.105, 0.130, 0.125, 0.120, 0.120, 0.128, 0.075},
        {PELVIS, PELVIS, SPINE1, SPINE2, SPINE3, CHEST},
        {{PELVIS, 1.0}}, {{CHEST, 0.5}, {NECK, 0.5}}, 18, 2, Region::Body, true, true);

    // neck
    mb.add_polytube({joints[NECK], Vector3d(0, 1.50, 0)}, {0.048, 0.050}, {NECK},
                    {{CHEST, 0.5}, {NECK, 0.5}}, {{NECK, 0.5}, {HEAD, 0.5}}, 8, 1, Region::Body,
                    false, false);

    // head as a stack of latitude rings (face label: personalization is pinned)
    mb.add_polytube(
        {Vector3d(0, 1.475, 0.01), Vector3d(0, 1.52, 0.01), Vector3d(0, 1.58, 0.01),
         Vector3d(0, 1.63, 0.01), Vector3d(0, 1.67, 0.01)},
        {0.055, 0.090, 0.095, 0.080, 0.040},
        {HEAD, HEAD, HEAD, HEAD},
        {{NECK, 0.3}, {HEAD, 0.7}}, {{HEAD, 1.0}}, 12, 1, Region::Face, true, true);

    // jaw wedge
    mb.add_polytube({Vector3d(0, 1.49, 0.05), Vector3d(0, 1.455, 0.10)}, {0.030, 0.016}, {JAW},
                    {{HEAD, 0.5}, {JAW, 0.5}}, {{JAW, 1.0}}, 6, 1, Region::Face, false, true);

    // legs
    for (int side = 0; side < 2; ++side) {
        int hip = side == 0 ? L_HIP : R_HIP;
        int knee = hip + 1, ankle = hip + 2, foot = hip + 3;
        mb.add_polytube({joints[hip], joints[knee], joints[ankle], joints[foot]},
                        {0.085, 0.058, 0.040, 0.030}, {hip, knee, ankle},
                        {{PELVIS, 0.4}, {hip, 0.6}}, {{ankle, 0.3}, {foot, 0.7}}, 12, 3,
                        Region::Body, false, true);
    }

    // arms
    for (int side = 0; side < 2; ++side) {
        int clav = side == 0 ? L_CLAV : R_CLAV;
        int sh = clav + 1, el = clav + 2, wr = clav + 3;
        double s = side == 0 ? 1.0 : -1.0;
        mb.add_polytube({Vector3d(s * 0.10, 1.40, 0), joints[sh], joints[el], joints[wr]},
                        {0.062, 0.055, 0.043, 0.031}, {clav, sh, el},
                        {{CHEST, 0.5}, {clav, 0.5}}, {{el, 0.4}, {wr, 0.6}}, 12, 3, Region::Body,
                        false, false);
    }

    // palms and fingers
    for (int side = 0; side < 2; ++side) {
        int wrist = side == 0 ? L_WRIST : R_WRIST;
        int base = side == 0 ? kLeftHandBase : kRightHandBase;
        int sgn = side == 0 ? 1 : -1;
        double s = static_cast<double>(sgn);
        Vector3d wristp = joints[wrist];
        mb.add_polytube({wristp, wristp + Vector3d(s * 0.058, 0, 0.004)}, {0.032, 0.036}, {wrist},
                        {{wrist - 1, 0.4}, {wrist, 0.6}}, {{wrist, 1.0}}, 10, 1, Region::Hand,
                        false, true);
        for (int f = 0; f < 5; ++f) {
            FingerGeom g = finger_geom(sgn, f);
            int j0 = base + f * 3, j1 = j0 + 1, j2 = j0 + 2;
            Vector3d p1 = joints[j0], p2 = joints[j1], p3 = joints[j2];
            Vector3d tip = p3 + g.l3 * g.dir;
            mb.add_polytube({p1, p2, p3, tip}, {0.0105, 0.0090, 0.0075, 0.0060}, {j0, j1, j2},
                            {{wrist, 0.5}, {j0, 0.5}}, {{j2, 1.0}}, 4, 0, Region::Hand, false,
                            true);
        }
    }

    const std::size_t V = mb.verts.size();
    const std::size_t F = mb.faces.size();

    SkinnedTemplate t;
    t.vertices = Tensor({V, 3});
    for (std::size_t v = 0; v < V; ++v)
        for (int k = 0; k < 3; ++k) t.vertices.at(v, static_cast<std::size_t>(k)) = mb.verts[v][k];
    t.faces = mb.faces;
    t.parents = parents;
    t.joint_names = names;
    t.labels = mb.labels;

    // skinning weights (rows normalized)
    t.skinning_weights = Tensor({V, static_cast<std::size_t>(kJointCount)});
    for (std::size_t v = 0; v < V; ++v) {
        double sum = 0;
        for (auto& [j, w] : mb.weights[v]) sum += w;
        for (auto& [j, w] : mb.weights[v])
            t.skinning_weights.at(v, static_cast<std::size_t>(j)) += w / sum;
    }

    // joint regressor: uniform weights over the vertices nearest each joint
    t.joint_regressor = Tensor({static_cast<std::size_t>(kJointCount), V});
    for (int j = 0; j < kJointCount; ++j) {
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t v = 0; v < V; ++v)
            dist.emplace_back((mb.verts[v] - joints[static_cast<std::size_t>(j)]).norm(), v);
        std::sort(dist.begin(), dist.end());
        // whole-ring capture: everything within 110% of the 8th nearest
        double r = dist[std::min<std::size_t>(7, dist.size() - 1)].first * 1.10 + 1e-9;
        std::size_t n = 0;
        while (n < dist.size() && dist[n].first <= r) ++n;
        for (std::size_t k = 0; k < n; ++k)
            t.joint_regressor.at(static_cast<std::size_t>(j), dist[k].second) = 1.0 / static_cast<double>(n);
    }

    // blendshapes: height, width, belly, shoulders
    const std::size_t B = 4;
    t.blendshapes = Tensor({V * 3, B});
    for (std::size_t v = 0; v < V; ++v) {
        const Vector3d& p = mb.verts[v];
        auto set = [&](std::size_t b, double dx, double dy, double dz) {
            t.blendshapes.at(v * 3 + 0, b) = dx;
            t.blendshapes.at(v * 3 + 1, b) = dy;
            t.blendshapes.at(v * 3 + 2, b) = dz;
        };
        set(0, 0, p.y() * 0.06, 0);
        set(1, p.x() * 0.06, 0, p.z() * 0.06);
        double belly = gauss(p.y(), 1.05, 0.18) * 0.5;
        set(2, p.x() * belly, 0, p.z() * belly);
        double sh = std::tanh(p.x() / 0.05) * 0.035 * gauss(p.y(), 1.40, 0.12);
        set(3, sh, 0, 0);
    }

    // adjacency (pairs of faces sharing an edge)
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> edge_faces;
    for (std::uint32_t f = 0; f < F; ++f)
        for (int e = 0; e < 3; ++e) {
            std::uint32_t a = t.faces[f][static_cast<std::size_t>(e)];
            std::uint32_t b = t.faces[f][static_cast<std::size_t>((e + 1) % 3)];
            edge_faces[{std::min(a, b), std::max(a, b)}].push_back(f);
        }
    for (auto& [e, fs] : edge_faces)
        if (fs.size() == 2) t.edge_adjacency.push_back({fs[0], fs[1]});

    t.pelvis = PELVIS;
    t.jaw = JAW;
    t.left_wrist = L_WRIST;
    t.right_wrist = R_WRIST;
    t.body_joint_count = kBodyJoints;
    for (int k = 0; k < 15; ++k) {
        t.left_hand_joints.push_back(kLeftHandBase + k);
        t.right_hand_joints.push_back(kRightHandBase + k);
    }
    t.left_hand_axes = hand_axes_table(+1);
    t.right_hand_axes = hand_axes_table(-1);

    t.validate();
    return t;
}

std::vector<PoseState> scripted_pose_sequence(const SkinnedTemplate& tmpl, int frames, Rng rng) {
    const std::size_t J = tmpl.joint_count();
    // per-joint amplitude limits (radians)
    std::vector<double> limit(J, 0.18);
    auto set_limit = [&](const std::string& key, double v) {
        for (std::size_t j = 0; j < J; ++j)
            if (tmpl.joint_names[j].find(key) != std::string::npos) limit[j] = v;
    };
    set_limit("spine", 0.10);
    set_limit("chest", 0.08);
    set_limit("neck", 0.12);
    set_limit("head", 0.10);
    set_limit("hip", 0.45);
    set_limit("knee", 0.70);
    set_limit("ankle", 0.25);
    set_limit("foot", 0.15);
    set_limit("clavicle", 0.08);
    set_limit("shoulder", 0.50);
    set_limit("elbow", 0.70);
    set_limit("wrist", 0.30);
    set_limit("head_top", 0.0);

    struct Osc {
        double amp, freq, phase;
    };
    auto osc = [&](double a) { return Osc{a * rng.uniform(0.3, 1.0), rng.uniform(0.5, 1.5), rng.uniform(0.0, 2.0 * kPi)}; };
    auto eval = [](const Osc& o, double u) { return o.amp * std::sin(2.0 * kPi * o.freq * u + o.phase); };

    // body joints (hand joints handled through the 22-DoF layer)
    std::vector<bool> is_hand(J, false);
    for (int j : tmpl.all_hand_joints()) is_hand[static_cast<std::size_t>(j)] = true;

    std::vector<std::array<Osc, 3>> body_osc(J);
    for (std::size_t j = 1; j < J; ++j)
        if (!is_hand[j]) body_osc[j] = {osc(limit[j]), osc(limit[j] * 0.6), osc(limit[j] * 0.6)};

    std::array<Osc, 3> trans_osc = {osc(0.10), osc(0.05), osc(0.10)};
    std::array<Osc, 3> orient_osc = {osc(0.10), osc(0.30), osc(0.10)};

    HandDofSpec left_spec(tmpl.left_hand_axes);
    HandDofSpec right_spec(tmpl.right_hand_axes);
    std::vector<Osc> left_osc, right_osc;
    for (int d = 0; d < HandDofSpec::kDofCount; ++d) {
        left_osc.push_back(osc(0.9));
        right_osc.push_back(osc(0.9));
    }
    Tensor neutral_l = left_spec.neutral_raw();
    Tensor neutral_r = right_spec.neutral_raw();

    std::vector<PoseState> poses;
    for (int t = 0; t < frames; ++t) {
        double u = frames > 1 ? static_cast<double>(t) / (frames - 1) : 0.0;
        PoseState p = PoseState::rest(J, t);
        for (int k = 0; k < 3; ++k) {
            p.translation[static_cast<std::size_t>(k)] = eval(trans_osc[static_cast<std::size_t>(k)], u);
            p.root_orient[static_cast<std::size_t>(k)] = eval(orient_osc[static_cast<std::size_t>(k)], u);
        }
        for (std::size_t j = 1; j < J; ++j) {
            if (is_hand[j]) continue;
            for (int k = 0; k < 3; ++k)
                p.theta.at(j - 1, static_cast<std::size_t>(k)) = eval(body_osc[j][static_cast<std::size_t>(k)], u);
        }
        // hands through the anatomy layer so ground truth stays plausible
        for (int side = 0; side < 2; ++side) {
            const auto& spec = side == 0 ? left_spec : right_spec;
            const auto& oscs = side == 0 ? left_osc : right_osc;
            const Tensor& neutral = side == 0 ? neutral_l : neutral_r;
            const auto& hj = side == 0 ? tmpl.left_hand_joints : tmpl.right_hand_joints;
            Tensor raw({1, HandDofSpec::kDofCount});
            for (int d = 0; d < HandDofSpec::kDofCount; ++d)
                raw[static_cast<std::size_t>(d)] = neutral[static_cast<std::size_t>(d)] + eval(oscs[static_cast<std::size_t>(d)], u);
            Tensor aa = spec.decode_plain(raw);
            for (int k = 0; k < 15; ++k)
                for (int c = 0; c < 3; ++c)
                    p.theta.at(static_cast<std::size_t>(hj[static_cast<std::size_t>(k)] - 1), static_cast<std::size_t>(c)) =
                        aa.at(static_cast<std::size_t>(k), static_cast<std::size_t>(c));
        }
        poses.push_back(std::move(p));
    }
    return poses;
}

Tensor procedural_vertex_colors(const SkinnedTemplate& tmpl, Rng rng) {
    const std::size_t V = tmpl.vertex_count();
    Tensor colors({V, 3});
    // smooth random color field: few random plane waves per channel
    for (int c = 0; c < 3; ++c) {
        Vector3d k1(rng.uniform(3, 9), rng.uniform(3, 9), rng.uniform(3, 9));
        Vector3d k2(rng.uniform(6, 16), rng.uniform(6, 16), rng.uniform(6, 16));
        double p1 = rng.uniform(0, 2 * kPi), p2 = rng.uniform(0, 2 * kPi);
        for (std::size_t v = 0; v < V; ++v) {
            Vector3d p(tmpl.vertices.at(v, 0), tmpl.vertices.at(v, 1), tmpl.vertices.at(v, 2));
            double val = 0.5 + 0.28 * std::sin(k1.dot(p) + p1) + 0.18 * std::sin(k2.dot(p) + p2);
            colors.at(v, static_cast<std::size_t>(c)) = std::clamp(val, 0.05, 0.95);
        }
    }
    return colors;
}

}  // namespace splatcap
