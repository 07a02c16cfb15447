#pragma once

// JSON formats (scene, result, config, body template, scene spec) and
// OBJ/PLY geometry export.
//
// Readers are strict: every object is checked against its known keys and an
// unknown key is rejected with its full path. Writers emit keys in a fixed
// order and doubles in shortest round-trip form, so Save is deterministic and
// Load(Save(x)) == x.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdfit/body_model.hpp"
#include "crowdfit/camera.hpp"
#include "crowdfit/errors.hpp"
#include "crowdfit/losses.hpp"
#include "crowdfit/metrics.hpp"
#include "crowdfit/pipeline.hpp"
#include "crowdfit/scene.hpp"
#include "crowdfit/synth.hpp"

namespace crowdfit {

inline constexpr int kSceneSchemaVersion = 1;
inline constexpr int kResultSchemaVersion = 1;

using Json = nlohmann::ordered_json;

namespace io_detail {

inline std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

inline std::string index(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
}

inline void expect_object(const Json& j, const std::string& path) {
    if (!j.is_object()) {
        throw ParseError((path.empty() ? std::string("document") : path) + ": expected an object");
    }
}

inline void check_keys(const Json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    expect_object(j, path);
    for (const auto& item : j.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return item.key() == k; });
        if (!known) {
            throw ParseError(join(path, item.key()) + ": unknown field '" + item.key() + "'");
        }
    }
}

inline const Json& required(const Json& j, const std::string& path, const char* key) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw ParseError(join(path, key) + ": missing required field");
    }
    return *it;
}

inline const Json* optional_field(const Json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

inline double number(const Json& j, const std::string& path) {
    if (!j.is_number()) {
        throw ParseError(path + ": expected a number");
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
        throw ParseError(path + ": number must be finite");
    }
    return v;
}

inline long long integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) {
        throw ParseError(path + ": expected an integer");
    }
    return j.get<long long>();
}

inline std::uint64_t unsigned_integer(const Json& j, const std::string& path) {
    if (j.is_number_unsigned()) {
        return j.get<std::uint64_t>();
    }
    if (j.is_number_integer() && j.get<long long>() >= 0) {
        return static_cast<std::uint64_t>(j.get<long long>());
    }
    throw ParseError(path + ": expected a non-negative integer");
}

inline bool boolean(const Json& j, const std::string& path) {
    if (!j.is_boolean()) {
        throw ParseError(path + ": expected true or false");
    }
    return j.get<bool>();
}

inline std::string string(const Json& j, const std::string& path) {
    if (!j.is_string()) {
        throw ParseError(path + ": expected a string");
    }
    return j.get<std::string>();
}

inline std::vector<double> numbers(const Json& j, const std::string& path, std::optional<std::size_t> length = {}) {
    if (!j.is_array()) {
        throw ParseError(path + ": expected an array of numbers");
    }
    if (length && j.size() != *length) {
        throw ParseError(path + ": expected " + std::to_string(*length) + " values, got " +
                         std::to_string(j.size()));
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(number(j[i], index(path, i)));
    }
    return out;
}

inline Vec3d vec3(const Json& j, const std::string& path) {
    const auto v = numbers(j, path, 3);
    return {v[0], v[1], v[2]};
}

inline std::vector<Vec3d> vec3_list(const Json& j, const std::string& path) {
    if (!j.is_array()) {
        throw ParseError(path + ": expected an array of 3-vectors");
    }
    std::vector<Vec3d> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(vec3(j[i], index(path, i)));
    }
    return out;
}

inline double finite(double v, const std::string& what) {
    if (!std::isfinite(v)) {
        throw ConfigError("cannot serialize non-finite value in " + what);
    }
    return v;
}

inline Json to_json(const Vec3d& v, const std::string& what) {
    return Json::array({finite(v.x, what), finite(v.y, what), finite(v.z, what)});
}

inline Json to_json(const std::vector<Vec3d>& list, const std::string& what) {
    Json out = Json::array();
    for (const auto& v : list) {
        out.push_back(to_json(v, what));
    }
    return out;
}

inline Json pose_json(const Pose& pose, const std::string& what) {
    Json out = Json::array();
    for (const auto& r : pose.rotations) {
        for (int c = 0; c < 3; ++c) {
            out.push_back(finite(r[c], what));
        }
    }
    return out;
}

inline Pose read_pose(const Json& j, const std::string& path) {
    const auto v = numbers(j, path, kPoseDim);
    Pose p;
    for (int i = 0; i < kJointCount; ++i) {
        p.rotations[static_cast<std::size_t>(i)] = {v[3 * i], v[3 * i + 1], v[3 * i + 2]};
    }
    return p;
}

inline Json shape_json(const Shape& shape, const std::string& what) {
    Json out = Json::array();
    for (double b : shape.coefficients) {
        out.push_back(finite(b, what));
    }
    return out;
}

inline Shape read_shape(const Json& j, const std::string& path) {
    const auto v = numbers(j, path, kShapeCount);
    Shape s;
    std::copy(v.begin(), v.end(), s.coefficients.begin());
    return s;
}

inline Json keypoints_json(const std::vector<KeypointObs>& kps, const std::string& what) {
    Json out = Json::array();
    for (const auto& k : kps) {
        out.push_back(Json::array({finite(k.u, what), finite(k.v, what), finite(k.confidence, what)}));
    }
    return out;
}

inline std::vector<KeypointObs> read_keypoints(const Json& j, const std::string& path) {
    if (!j.is_array()) {
        throw ParseError(path + ": expected an array of [u, v, confidence]");
    }
    std::vector<KeypointObs> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto v = numbers(j[i], index(path, i), 3);
        if (v[2] < 0.0 || v[2] > 1.0) {
            throw ParseError(index(path, i) + ": confidence must lie in [0, 1]");
        }
        out.push_back({v[0], v[1], v[2]});
    }
    return out;
}

inline Json parse_text(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        // nlohmann reports "... at line L, column C: ..."
        throw ParseError(source + ": " + e.what());
    }
}

}  // namespace io_detail

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "' for reading");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out) {
        throw std::runtime_error("failed writing '" + path.string() + "'");
    }
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- scenes

inline Json intrinsics_json(const Intrinsics& in) {
    Json img;
    img["width"] = in.width;
    img["height"] = in.height;
    if (!in.focal_from_diagonal) {
        img["focal"] = io_detail::finite(in.focal, "image.focal");
        if (in.cx != in.image_center_x() || in.cy != in.image_center_y()) {
            img["principal_point"] = Json::array({in.cx, in.cy});
        }
    }
    return img;
}

inline Intrinsics read_intrinsics(const Json& j, const std::string& path) {
    using namespace io_detail;
    check_keys(j, path, {"width", "height", "focal", "principal_point"});
    const long long w = integer(required(j, path, "width"), join(path, "width"));
    const long long h = integer(required(j, path, "height"), join(path, "height"));
    if (w <= 0 || h <= 0) {
        throw ParseError(path + ": width and height must be positive");
    }
    const Json* f = optional_field(j, "focal");
    const Json* pp = optional_field(j, "principal_point");
    if (f == nullptr) {
        if (pp != nullptr) {
            throw ParseError(join(path, "principal_point") + ": requires 'focal'");
        }
        return Intrinsics::uncalibrated(static_cast<int>(w), static_cast<int>(h));
    }
    const double focal = number(*f, join(path, "focal"));
    if (!(focal > 0.0)) {
        throw ParseError(join(path, "focal") + ": must be positive");
    }
    std::optional<Vec2<double>> principal;
    if (pp != nullptr) {
        const auto v = numbers(*pp, join(path, "principal_point"), 2);
        principal = Vec2<double>{v[0], v[1]};
    }
    return Intrinsics::calibrated(static_cast<int>(w), static_cast<int>(h), focal, principal);
}

inline Json plane_json(const Plane& p) {
    Json out;
    out["normal"] = io_detail::to_json(p.normal, "plane.normal");
    out["offset"] = io_detail::finite(p.offset, "plane.offset");
    return out;
}

inline Plane read_plane(const Json& j, const std::string& path) {
    using namespace io_detail;
    check_keys(j, path, {"normal", "offset"});
    Plane p;
    p.normal = vec3(required(j, path, "normal"), join(path, "normal"));
    p.offset = number(required(j, path, "offset"), join(path, "offset"));
    if (std::abs(norm(p.normal) - 1.0) > 1e-6) {
        throw ParseError(join(path, "normal") + ": must be unit length");
    }
    return p;
}

inline Json scene_to_json(const SceneObservation& scene) {
    using namespace io_detail;
    Json doc;
    doc["schema_version"] = kSceneSchemaVersion;
    doc["image"] = intrinsics_json(scene.intrinsics);
    Json persons = Json::array();
    bool any_gt = false;
    for (const auto& p : scene.persons) {
        Json jp;
        jp["id"] = p.id;
        jp["bbox"] = Json{{"cx_abs", finite(p.box.center_x, "bbox")},
                          {"cy_abs", finite(p.box.center_y, "bbox")},
                          {"w", finite(p.box.width, "bbox")},
                          {"h", finite(p.box.height, "bbox")}};
        jp["score"] = finite(p.score, "score");
        jp["layout"] = p.layout;
        jp["keypoints"] = keypoints_json(p.keypoints, "keypoints");
        persons.push_back(std::move(jp));
        any_gt = any_gt || p.ground_truth.has_value();
    }
    doc["persons"] = std::move(persons);
    if (any_gt || scene.plane) {
        Json gt;
        if (scene.plane) {
            gt["plane"] = plane_json(*scene.plane);
        }
        Json gps = Json::array();
        for (const auto& p : scene.persons) {
            if (!p.ground_truth) {
                continue;
            }
            const auto& g = *p.ground_truth;
            Json jg;
            jg["id"] = p.id;
            jg["pose"] = pose_json(g.pose, "ground_truth.pose");
            jg["shape"] = shape_json(g.shape, "ground_truth.shape");
            jg["translation"] = to_json(g.translation, "ground_truth.translation");
            jg["joints"] = to_json(g.joints, "ground_truth.joints");
            jg["vertices"] = to_json(g.vertices, "ground_truth.vertices");
            jg["keypoints2d"] = keypoints_json(g.keypoints2d, "ground_truth.keypoints2d");
            gps.push_back(std::move(jg));
        }
        gt["persons"] = std::move(gps);
        doc["ground_truth"] = std::move(gt);
    }
    return doc;
}

inline SceneObservation scene_from_json(const Json& doc) {
    using namespace io_detail;
    check_keys(doc, "", {"schema_version", "image", "persons", "ground_truth"});
    const long long version = integer(required(doc, "", "schema_version"), "schema_version");
    if (version != kSceneSchemaVersion) {
        throw ParseError("schema_version: unsupported version " + std::to_string(version));
    }
    SceneObservation scene;
    scene.intrinsics = read_intrinsics(required(doc, "", "image"), "image");
    const Json& persons = required(doc, "", "persons");
    if (!persons.is_array()) {
        throw ParseError("persons: expected an array");
    }
    for (std::size_t i = 0; i < persons.size(); ++i) {
        const std::string path = index("persons", i);
        const Json& jp = persons[i];
        check_keys(jp, path, {"id", "bbox", "score", "layout", "keypoints"});
        PersonObservation p;
        p.id = string(required(jp, path, "id"), join(path, "id"));
        const std::string bpath = join(path, "bbox");
        const Json& jb = required(jp, path, "bbox");
        check_keys(jb, bpath, {"cx_abs", "cy_abs", "w", "h"});
        p.box.center_x = number(required(jb, bpath, "cx_abs"), join(bpath, "cx_abs"));
        p.box.center_y = number(required(jb, bpath, "cy_abs"), join(bpath, "cy_abs"));
        p.box.width = number(required(jb, bpath, "w"), join(bpath, "w"));
        p.box.height = number(required(jb, bpath, "h"), join(bpath, "h"));
        if (!(p.box.width > 0.0) || !(p.box.height > 0.0)) {
            throw ParseError(bpath + ": w and h must be positive");
        }
        p.score = number(required(jp, path, "score"), join(path, "score"));
        if (p.score < 0.0 || p.score > 1.0) {
            throw ParseError(join(path, "score") + ": must lie in [0, 1]");
        }
        if (const Json* l = optional_field(jp, "layout")) {
            p.layout = string(*l, join(path, "layout"));
        }
        p.keypoints = read_keypoints(required(jp, path, "keypoints"), join(path, "keypoints"));
        for (const auto& other : scene.persons) {
            if (other.id == p.id) {
                throw ParseError(join(path, "id") + ": duplicate person id '" + p.id + "'");
            }
        }
        scene.persons.push_back(std::move(p));
    }
    if (const Json* gt = optional_field(doc, "ground_truth")) {
        check_keys(*gt, "ground_truth", {"plane", "persons"});
        if (const Json* pl = optional_field(*gt, "plane")) {
            scene.plane = read_plane(*pl, "ground_truth.plane");
        }
        if (const Json* gps = optional_field(*gt, "persons")) {
            if (!gps->is_array()) {
                throw ParseError("ground_truth.persons: expected an array");
            }
            for (std::size_t i = 0; i < gps->size(); ++i) {
                const std::string path = index("ground_truth.persons", i);
                const Json& jg = (*gps)[i];
                check_keys(jg, path, {"id", "pose", "shape", "translation", "joints", "vertices", "keypoints2d"});
                const std::string id = string(required(jg, path, "id"), join(path, "id"));
                const auto it = std::find_if(scene.persons.begin(), scene.persons.end(),
                                             [&](const PersonObservation& p) { return p.id == id; });
                if (it == scene.persons.end()) {
                    throw ParseError(join(path, "id") + ": no person with id '" + id + "'");
                }
                GroundTruthBundle g;
                g.pose = read_pose(required(jg, path, "pose"), join(path, "pose"));
                g.shape = read_shape(required(jg, path, "shape"), join(path, "shape"));
                g.translation = vec3(required(jg, path, "translation"), join(path, "translation"));
                if (const Json* v = optional_field(jg, "joints")) {
                    g.joints = vec3_list(*v, join(path, "joints"));
                }
                if (const Json* v = optional_field(jg, "vertices")) {
                    g.vertices = vec3_list(*v, join(path, "vertices"));
                }
                if (const Json* v = optional_field(jg, "keypoints2d")) {
                    g.keypoints2d = read_keypoints(*v, join(path, "keypoints2d"));
                }
                it->ground_truth = std::move(g);
            }
        }
    }
    return scene;
}

inline std::string save_scene(const SceneObservation& scene) { return dump(scene_to_json(scene)); }

inline SceneObservation load_scene(const std::string& text, const std::string& source = "scene") {
    const Json doc = io_detail::parse_text(text, source);
    try {
        return scene_from_json(doc);
    } catch (const ParseError& e) {
        throw ParseError(source + ": " + e.what());
    }
}

// ---------------------------------------------------------------- config

inline const char* keyp_normalization_name(KeypNormalization k) {
    return k == KeypNormalization::box_size ? "box_size" : "raw_pixels";
}

inline Json config_to_json(const PipelineConfig& c) {
    Json j;
    j["iters"] = c.crowd.total_steps;
    j["lr"] = c.crowd.lr_max;
    j["lr_min"] = c.crowd.lr_min;
    j["weight_decay"] = c.crowd.weight_decay;
    j["betas"] = Json::array({c.crowd.beta1, c.crowd.beta2});
    j["epsilon"] = c.crowd.epsilon;
    j["batch_size"] = c.batch_size;
    j["threshold"] = c.threshold;
    j["crowd_enabled"] = c.crowd_enabled;
    j["keyp_normalization"] = keyp_normalization_name(c.keyp_norm);
    j["detach_normal"] = c.detach_normal;
    j["per_batch_normal"] = c.per_batch_normal;
    j["freeze_normal_every"] = c.freeze_normal_every;
    j["literal_init_crowd"] = c.literal_init_crowd;
    j["seed"] = c.seed;
    const LossWeights& w = c.weights;
    j["weights"] = Json{{"reproj", w.reproj}, {"smpl", w.smpl},   {"joint", w.joint},
                        {"verts", w.verts},   {"crowd", w.crowd}, {"keyp", w.keyp},
                        {"init_shape", w.init_shape}, {"init_pose", w.init_pose}};
    j["init_fit"] = Json{{"iters", c.init.iters},
                         {"lr", c.init.lr},
                         {"rho_pose", c.init.rho_pose},
                         {"rho_shape", c.init.rho_shape},
                         {"person_height", c.init.person_height},
                         {"min_keypoints", c.init.min_keypoints}};
    j["supervised_fit"] = Json{{"iters", c.supervised.iters}, {"lr", c.supervised.lr}};
    return j;
}

// Applies the keys present in `j` on top of `base`.
inline PipelineConfig config_from_json(const Json& j, PipelineConfig base = {}) {
    using namespace io_detail;
    const std::string root = "config";
    check_keys(j, root,
               {"iters", "lr", "lr_min", "weight_decay", "betas", "epsilon", "batch_size", "threshold",
                "crowd_enabled", "keyp_normalization", "detach_normal", "per_batch_normal", "freeze_normal_every",
                "literal_init_crowd", "seed", "weights", "init_fit", "supervised_fit"});
    PipelineConfig c = base;
    const auto num = [&](const char* key, double& dst) {
        if (const Json* v = optional_field(j, key)) {
            dst = number(*v, join(root, key));
        }
    };
    const auto integral = [&](const char* key, int& dst) {
        if (const Json* v = optional_field(j, key)) {
            dst = static_cast<int>(integer(*v, join(root, key)));
        }
    };
    const auto flag = [&](const char* key, bool& dst) {
        if (const Json* v = optional_field(j, key)) {
            dst = boolean(*v, join(root, key));
        }
    };
    integral("iters", c.crowd.total_steps);
    num("lr", c.crowd.lr_max);
    num("lr_min", c.crowd.lr_min);
    num("weight_decay", c.crowd.weight_decay);
    if (const Json* v = optional_field(j, "betas")) {
        const auto b = numbers(*v, join(root, "betas"), 2);
        c.crowd.beta1 = b[0];
        c.crowd.beta2 = b[1];
    }
    num("epsilon", c.crowd.epsilon);
    integral("batch_size", c.batch_size);
    num("threshold", c.threshold);
    flag("crowd_enabled", c.crowd_enabled);
    if (const Json* v = optional_field(j, "keyp_normalization")) {
        const std::string s = string(*v, join(root, "keyp_normalization"));
        if (s == "box_size") {
            c.keyp_norm = KeypNormalization::box_size;
        } else if (s == "raw_pixels") {
            c.keyp_norm = KeypNormalization::raw_pixels;
        } else {
            throw ParseError(join(root, "keyp_normalization") + ": expected 'box_size' or 'raw_pixels'");
        }
    }
    flag("detach_normal", c.detach_normal);
    flag("per_batch_normal", c.per_batch_normal);
    integral("freeze_normal_every", c.freeze_normal_every);
    flag("literal_init_crowd", c.literal_init_crowd);
    if (const Json* v = optional_field(j, "seed")) {
        c.seed = unsigned_integer(*v, join(root, "seed"));
    }
    if (const Json* w = optional_field(j, "weights")) {
        const std::string path = join(root, "weights");
        check_keys(*w, path, {"reproj", "smpl", "joint", "verts", "crowd", "keyp", "init_shape", "init_pose"});
        const auto weight = [&](const char* key, double& dst) {
            if (const Json* v = optional_field(*w, key)) {
                dst = number(*v, join(path, key));
            }
        };
        weight("reproj", c.weights.reproj);
        weight("smpl", c.weights.smpl);
        weight("joint", c.weights.joint);
        weight("verts", c.weights.verts);
        weight("crowd", c.weights.crowd);
        weight("keyp", c.weights.keyp);
        weight("init_shape", c.weights.init_shape);
        weight("init_pose", c.weights.init_pose);
    }
    if (const Json* s = optional_field(j, "init_fit")) {
        const std::string path = join(root, "init_fit");
        check_keys(*s, path, {"iters", "lr", "rho_pose", "rho_shape", "person_height", "min_keypoints"});
        if (const Json* v = optional_field(*s, "iters")) c.init.iters = static_cast<int>(integer(*v, join(path, "iters")));
        if (const Json* v = optional_field(*s, "lr")) c.init.lr = number(*v, join(path, "lr"));
        if (const Json* v = optional_field(*s, "rho_pose")) c.init.rho_pose = number(*v, join(path, "rho_pose"));
        if (const Json* v = optional_field(*s, "rho_shape")) c.init.rho_shape = number(*v, join(path, "rho_shape"));
        if (const Json* v = optional_field(*s, "person_height")) {
            c.init.person_height = number(*v, join(path, "person_height"));
        }
        if (const Json* v = optional_field(*s, "min_keypoints")) {
            c.init.min_keypoints = static_cast<int>(integer(*v, join(path, "min_keypoints")));
        }
    }
    if (const Json* s = optional_field(j, "supervised_fit")) {
        const std::string path = join(root, "supervised_fit");
        check_keys(*s, path, {"iters", "lr"});
        if (const Json* v = optional_field(*s, "iters")) {
            c.supervised.iters = static_cast<int>(integer(*v, join(path, "iters")));
        }
        if (const Json* v = optional_field(*s, "lr")) c.supervised.lr = number(*v, join(path, "lr"));
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ParseError(root + ": " + e.what());
    }
    return c;
}

inline PipelineConfig load_config(const std::string& text, PipelineConfig base = {},
                                  const std::string& source = "config") {
    const Json doc = io_detail::parse_text(text, source);
    try {
        return config_from_json(doc, base);
    } catch (const ParseError& e) {
        throw ParseError(source + ": " + e.what());
    }
}

// ---------------------------------------------------------------- results

struct ResultFile {
    PipelineConfig config;
    SceneEstimate estimate;
    std::string focal_source = "diagonal";  // or "calibrated"
    std::vector<std::string> notes;

    friend bool operator==(const ResultFile&, const ResultFile&) = default;
};

inline std::vector<std::string> default_result_notes() {
    return {"per-person body parameters are optimized directly; there is no network backbone",
            "stage 1 fits 2D keypoints with a weak pose/shape prior and a 1.7 m height depth seed",
            "the ground-plane normal is estimated over the whole scene unless per_batch_normal is set",
            "crowd spread uses a smoothed population std: var / sqrt(var + 1e-12)"};
}

namespace io_detail {

inline Json estimate_json(const PersonEstimate& e) {
    Json j;
    j["pose"] = pose_json(e.params.pose, "pose");
    j["shape"] = shape_json(e.params.shape, "shape");
    j["cam"] = Json::array({finite(e.params.cam.scale, "cam"), finite(e.params.cam.tx, "cam"),
                            finite(e.params.cam.ty, "cam")});
    j["translation"] = to_json(e.translation, "translation");
    j["flags"] = Json{{"low_confidence", e.flags.low_confidence},
                      {"degenerate", e.flags.degenerate},
                      {"depth_masked", e.flags.depth_masked},
                      {"depth_clamped", e.flags.depth_clamped}};
    return j;
}

inline PersonEstimate read_estimate(const Json& j, const std::string& path, const std::string& id) {
    check_keys(j, path, {"pose", "shape", "cam", "translation", "flags"});
    PersonEstimate e;
    e.id = id;
    e.params.pose = read_pose(required(j, path, "pose"), join(path, "pose"));
    e.params.shape = read_shape(required(j, path, "shape"), join(path, "shape"));
    const auto cam = numbers(required(j, path, "cam"), join(path, "cam"), 3);
    e.params.cam = {cam[0], cam[1], cam[2]};
    e.translation = vec3(required(j, path, "translation"), join(path, "translation"));
    const std::string fpath = join(path, "flags");
    const Json& f = required(j, path, "flags");
    check_keys(f, fpath, {"low_confidence", "degenerate", "depth_masked", "depth_clamped"});
    const auto flag = [&](const char* key) {
        const Json* v = optional_field(f, key);
        return v != nullptr && boolean(*v, join(fpath, key));
    };
    e.flags.low_confidence = flag("low_confidence");
    e.flags.degenerate = flag("degenerate");
    e.flags.depth_masked = flag("depth_masked");
    e.flags.depth_clamped = flag("depth_clamped");
    return e;
}

}  // namespace io_detail

inline Json result_to_json(const ResultFile& r) {
    using namespace io_detail;
    const SceneEstimate& s = r.estimate;
    if (s.initial.size() != s.persons.size()) {
        throw ConfigError("result: initial and final estimate counts differ");
    }
    Json doc;
    doc["schema_version"] = kResultSchemaVersion;
    doc["config"] = config_to_json(r.config);
    Json persons = Json::array();
    for (std::size_t i = 0; i < s.persons.size(); ++i) {
        Json jp;
        jp["id"] = s.persons[i].id;
        jp["init"] = estimate_json(s.initial[i]);
        jp["final"] = estimate_json(s.persons[i]);
        persons.push_back(std::move(jp));
    }
    doc["persons"] = std::move(persons);

    Json scene;
    scene["crowd_stage_run"] = s.crowd_stage_run;
    scene["normal"] = s.normal ? to_json(*s.normal, "normal") : Json(nullptr);
    scene["loss"] = Json{{"crowd", finite(s.loss.crowd, "loss")},
                         {"keyp", finite(s.loss.keyp, "loss")},
                         {"init", finite(s.loss.init, "loss")},
                         {"total", finite(s.loss.total, "loss")}};
    Json batches = Json::array();
    for (const auto& b : s.log) {
        Json jb;
        jb["person_ids"] = b.person_ids;
        jb["error"] = b.error;
        Json steps = Json::array();
        for (const auto& it : b.iterations) {
            steps.push_back(Json::array({it.step, finite(it.lr, "iteration lr"), finite(it.objective, "objective")}));
        }
        jb["steps"] = std::move(steps);
        batches.push_back(std::move(jb));
    }
    scene["iterations"] = std::move(batches);
    scene["warnings"] = s.warnings;
    doc["scene"] = std::move(scene);
    doc["metadata"] = Json{{"focal_source", r.focal_source}, {"notes", r.notes}};
    return doc;
}

inline ResultFile result_from_json(const Json& doc) {
    using namespace io_detail;
    check_keys(doc, "", {"schema_version", "config", "persons", "scene", "metadata"});
    const long long version = integer(required(doc, "", "schema_version"), "schema_version");
    if (version != kResultSchemaVersion) {
        throw ParseError("schema_version: unsupported version " + std::to_string(version));
    }
    ResultFile r;
    r.config = config_from_json(required(doc, "", "config"));
    const Json& persons = required(doc, "", "persons");
    if (!persons.is_array()) {
        throw ParseError("persons: expected an array");
    }
    for (std::size_t i = 0; i < persons.size(); ++i) {
        const std::string path = index("persons", i);
        check_keys(persons[i], path, {"id", "init", "final"});
        const std::string id = string(required(persons[i], path, "id"), join(path, "id"));
        r.estimate.initial.push_back(read_estimate(required(persons[i], path, "init"), join(path, "init"), id));
        r.estimate.persons.push_back(read_estimate(required(persons[i], path, "final"), join(path, "final"), id));
    }
    const Json& scene = required(doc, "", "scene");
    check_keys(scene, "scene", {"crowd_stage_run", "normal", "loss", "iterations", "warnings"});
    r.estimate.crowd_stage_run = boolean(required(scene, "scene", "crowd_stage_run"), "scene.crowd_stage_run");
    const Json& normal = required(scene, "scene", "normal");
    if (!normal.is_null()) {
        r.estimate.normal = vec3(normal, "scene.normal");
    }
    const Json& loss = required(scene, "scene", "loss");
    check_keys(loss, "scene.loss", {"crowd", "keyp", "init", "total"});
    r.estimate.loss.crowd = number(required(loss, "scene.loss", "crowd"), "scene.loss.crowd");
    r.estimate.loss.keyp = number(required(loss, "scene.loss", "keyp"), "scene.loss.keyp");
    r.estimate.loss.init = number(required(loss, "scene.loss", "init"), "scene.loss.init");
    r.estimate.loss.total = number(required(loss, "scene.loss", "total"), "scene.loss.total");
    const Json& batches = required(scene, "scene", "iterations");
    if (!batches.is_array()) {
        throw ParseError("scene.iterations: expected an array");
    }
    for (std::size_t b = 0; b < batches.size(); ++b) {
        const std::string path = index("scene.iterations", b);
        check_keys(batches[b], path, {"person_ids", "error", "steps"});
        BatchLog log;
        const Json& ids = required(batches[b], path, "person_ids");
        if (!ids.is_array()) {
            throw ParseError(join(path, "person_ids") + ": expected an array");
        }
        for (std::size_t k = 0; k < ids.size(); ++k) {
            log.person_ids.push_back(string(ids[k], index(join(path, "person_ids"), k)));
        }
        log.error = string(required(batches[b], path, "error"), join(path, "error"));
        const Json& steps = required(batches[b], path, "steps");
        if (!steps.is_array()) {
            throw ParseError(join(path, "steps") + ": expected an array");
        }
        for (std::size_t k = 0; k < steps.size(); ++k) {
            const std::string spath = index(join(path, "steps"), k);
            if (!steps[k].is_array() || steps[k].size() != 3) {
                throw ParseError(spath + ": expected [step, lr, objective]");
            }
            log.iterations.push_back({static_cast<int>(integer(steps[k][0], spath)), number(steps[k][1], spath),
                                      number(steps[k][2], spath)});
        }
        r.estimate.log.push_back(std::move(log));
    }
    const Json& warnings = required(scene, "scene", "warnings");
    if (!warnings.is_array()) {
        throw ParseError("scene.warnings: expected an array");
    }
    for (std::size_t k = 0; k < warnings.size(); ++k) {
        r.estimate.warnings.push_back(string(warnings[k], index("scene.warnings", k)));
    }
    const Json& meta = required(doc, "", "metadata");
    check_keys(meta, "metadata", {"focal_source", "notes"});
    r.focal_source = string(required(meta, "metadata", "focal_source"), "metadata.focal_source");
    const Json& notes = required(meta, "metadata", "notes");
    if (!notes.is_array()) {
        throw ParseError("metadata.notes: expected an array");
    }
    for (std::size_t k = 0; k < notes.size(); ++k) {
        r.notes.push_back(string(notes[k], index("metadata.notes", k)));
    }
    return r;
}

inline std::string save_result(const ResultFile& r) { return dump(result_to_json(r)); }

inline ResultFile load_result(const std::string& text, const std::string& source = "result") {
    const Json doc = io_detail::parse_text(text, source);
    try {
        return result_from_json(doc);
    } catch (const ParseError& e) {
        throw ParseError(source + ": " + e.what());
    }
}

// ---------------------------------------------------------------- template

inline Json template_to_json(const SkeletonTemplate& t) {
    using namespace io_detail;
    Json j;
    j["version"] = t.version;
    j["joint_names"] = t.joint_names;
    j["parents"] = t.parents;
    j["rest_joints"] = to_json(t.rest_joints, "rest_joints");
    Json basis = Json::array();
    for (int row = 0; row < 3 * t.joint_count(); ++row) {
        Json r = Json::array();
        for (int s = 0; s < kShapeCount; ++s) {
            r.push_back(t.basis(row, s));
        }
        basis.push_back(std::move(r));
    }
    j["shape_basis"] = std::move(basis);
    Json points = Json::array();
    for (const auto& p : t.template_points) {
        points.push_back(Json{{"name", p.name}, {"position", to_json(p.position, "point")}, {"joint", p.joint}});
    }
    j["template_points"] = std::move(points);
    Json kps = Json::array();
    for (std::size_t i = 0; i < t.roles.keypoints.size(); ++i) {
        const auto& src = t.roles.keypoints[i];
        Json k;
        k["name"] = i < t.roles.keypoint_names.size() ? t.roles.keypoint_names[i] : std::string();
        k["kind"] = src.kind == KeypointSource::Kind::joint ? "joint" : "point";
        k["index"] = src.index;
        kps.push_back(std::move(k));
    }
    j["roles"] = Json{{"root", t.roles.root},
                      {"head_top", t.roles.head_top},
                      {"left_ankle", t.roles.left_ankle},
                      {"right_ankle", t.roles.right_ankle},
                      {"layout", t.roles.layout},
                      {"keypoints", std::move(kps)}};
    return j;
}

inline SkeletonTemplate template_from_json(const Json& j) {
    using namespace io_detail;
    check_keys(j, "", {"version", "joint_names", "parents", "rest_joints", "shape_basis", "template_points", "roles"});
    SkeletonTemplate t;
    t.version = string(required(j, "", "version"), "version");
    t.joint_names.clear();
    if (const Json* names = optional_field(j, "joint_names")) {
        if (!names->is_array()) {
            throw ParseError("joint_names: expected an array");
        }
        for (std::size_t i = 0; i < names->size(); ++i) {
            t.joint_names.push_back(string((*names)[i], index("joint_names", i)));
        }
    }
    const Json& parents = required(j, "", "parents");
    if (!parents.is_array()) {
        throw ParseError("parents: expected an array");
    }
    for (std::size_t i = 0; i < parents.size(); ++i) {
        t.parents.push_back(static_cast<int>(integer(parents[i], index("parents", i))));
    }
    t.rest_joints = vec3_list(required(j, "", "rest_joints"), "rest_joints");
    const Json& basis = required(j, "", "shape_basis");
    if (!basis.is_array()) {
        throw ParseError("shape_basis: expected an array of rows");
    }
    for (std::size_t r = 0; r < basis.size(); ++r) {
        const auto row = numbers(basis[r], index("shape_basis", r), kShapeCount);
        t.shape_basis.insert(t.shape_basis.end(), row.begin(), row.end());
    }
    const Json& points = required(j, "", "template_points");
    if (!points.is_array()) {
        throw ParseError("template_points: expected an array");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::string path = index("template_points", i);
        check_keys(points[i], path, {"name", "position", "joint"});
        TemplatePoint p;
        p.name = string(required(points[i], path, "name"), join(path, "name"));
        p.position = vec3(required(points[i], path, "position"), join(path, "position"));
        p.joint = static_cast<int>(integer(required(points[i], path, "joint"), join(path, "joint")));
        t.template_points.push_back(std::move(p));
    }
    const Json& roles = required(j, "", "roles");
    check_keys(roles, "roles", {"root", "head_top", "left_ankle", "right_ankle", "layout", "keypoints"});
    t.roles.root = static_cast<int>(integer(required(roles, "roles", "root"), "roles.root"));
    t.roles.head_top = static_cast<int>(integer(required(roles, "roles", "head_top"), "roles.head_top"));
    t.roles.left_ankle = static_cast<int>(integer(required(roles, "roles", "left_ankle"), "roles.left_ankle"));
    t.roles.right_ankle = static_cast<int>(integer(required(roles, "roles", "right_ankle"), "roles.right_ankle"));
    t.roles.layout = string(required(roles, "roles", "layout"), "roles.layout");
    t.roles.keypoints.clear();
    t.roles.keypoint_names.clear();
    const Json& kps = required(roles, "roles", "keypoints");
    if (!kps.is_array()) {
        throw ParseError("roles.keypoints: expected an array");
    }
    for (std::size_t i = 0; i < kps.size(); ++i) {
        const std::string path = index("roles.keypoints", i);
        check_keys(kps[i], path, {"name", "kind", "index"});
        const std::string kind = string(required(kps[i], path, "kind"), join(path, "kind"));
        KeypointSource src;
        if (kind == "joint") {
            src.kind = KeypointSource::Kind::joint;
        } else if (kind == "point") {
            src.kind = KeypointSource::Kind::point;
        } else {
            throw ParseError(join(path, "kind") + ": expected 'joint' or 'point'");
        }
        src.index = static_cast<int>(integer(required(kps[i], path, "index"), join(path, "index")));
        t.roles.keypoints.push_back(src);
        const Json* name = optional_field(kps[i], "name");
        t.roles.keypoint_names.push_back(name != nullptr ? string(*name, join(path, "name")) : std::string());
    }
    try {
        validate(t);
    } catch (const ConfigError& e) {
        throw ParseError(e.what());
    }
    return t;
}

inline std::string save_template(const SkeletonTemplate& t) { return dump(template_to_json(t)); }

inline SkeletonTemplate load_template(const std::string& text, const std::string& source = "template") {
    const Json doc = io_detail::parse_text(text, source);
    try {
        return template_from_json(doc);
    } catch (const ParseError& e) {
        throw ParseError(source + ": " + e.what());
    }
}

// The built-in template, or the file named by CROWDFIT_TEMPLATE when set.
inline SkeletonTemplate active_template() {
    const char* path = std::getenv("CROWDFIT_TEMPLATE");
    if (path == nullptr || *path == '\0') {
        return reference_template();
    }
    return load_template(read_text_file(path), path);
}

// ---------------------------------------------------------------- scene spec

// Plane either explicit ("plane") or from a pitched camera ("camera":
// {"pitch_deg", "height"}).
inline SceneSpec scene_spec_from_json(const Json& j) {
    using namespace io_detail;
    check_keys(j, "", {"plane", "camera", "image", "count", "sigma_pose", "sigma_shape", "sigma_kp", "extent", "seed"});
    SceneSpec s;
    const Json* plane = optional_field(j, "plane");
    const Json* camera = optional_field(j, "camera");
    if ((plane == nullptr) == (camera == nullptr)) {
        throw ParseError("spec: exactly one of 'plane' or 'camera' is required");
    }
    if (plane != nullptr) {
        s.plane = read_plane(*plane, "plane");
    } else {
        check_keys(*camera, "camera", {"pitch_deg", "height"});
        const double pitch = number(required(*camera, "camera", "pitch_deg"), "camera.pitch_deg");
        const double height = number(required(*camera, "camera", "height"), "camera.height");
        s.plane = camera_ground_plane(pitch * std::numbers::pi / 180.0, height);
    }
    s.intrinsics = read_intrinsics(required(j, "", "image"), "image");
    s.count = static_cast<int>(integer(required(j, "", "count"), "count"));
    if (const Json* v = optional_field(j, "sigma_pose")) s.sigma_pose = number(*v, "sigma_pose");
    if (const Json* v = optional_field(j, "sigma_shape")) s.sigma_shape = number(*v, "sigma_shape");
    if (const Json* v = optional_field(j, "sigma_kp")) s.sigma_kp = number(*v, "sigma_kp");
    if (const Json* v = optional_field(j, "extent")) s.extent = number(*v, "extent");
    if (const Json* v = optional_field(j, "seed")) s.seed = unsigned_integer(*v, "seed");
    try {
        s.validate();
    } catch (const ConfigError& e) {
        throw ParseError(e.what());
    }
    return s;
}

inline SceneSpec load_scene_spec(const std::string& text, const std::string& source = "spec") {
    const Json doc = io_detail::parse_text(text, source);
    try {
        return scene_spec_from_json(doc);
    } catch (const ParseError& e) {
        throw ParseError(source + ": " + e.what());
    }
}

// ---------------------------------------------------------------- eval

inline Json eval_report_json(const EvalReport& r) {
    const auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json j;
    Json per = Json::array();
    for (std::size_t i = 0; i < r.ids.size(); ++i) {
        per.push_back(Json{{"id", r.ids[i]}, {"oks", opt(r.oks[i])}});
    }
    j["persons"] = std::move(per);
    j["mean_oks"] = opt(r.mean_oks);
    j["mpjpe_mm"] = opt(r.mpjpe_mm);
    j["pa_mpjpe_mm"] = opt(r.pa_mpjpe_mm);
    j["plane_residual_std_m"] = opt(r.plane_residual_std);
    j["normal_angle_error_deg"] = opt(r.normal_angle_deg);
    if (r.depth_error) {
        j["depth_error_m"] = Json{{"mean_abs", r.depth_error->mean_abs},
                                  {"rms", r.depth_error->rms},
                                  {"max_abs", r.depth_error->max_abs}};
    } else {
        j["depth_error_m"] = nullptr;
    }
    return j;
}

// ---------------------------------------------------------------- geometry export

struct PersonMesh {
    std::string id;
    std::vector<Vec3d> vertices;                  // world frame, one per template point
    std::vector<std::pair<int, int>> edges;       // skeleton bones, 0-based vertex indices
};

// Template point standing in for each joint: attached to it and sitting at
// its rest position. -1 when the template has none.
inline std::vector<int> joint_point_indices(const SkeletonTemplate& tmpl) {
    std::vector<int> out(static_cast<std::size_t>(tmpl.joint_count()), -1);
    for (int i = 0; i < tmpl.point_count(); ++i) {
        const auto& p = tmpl.template_points[static_cast<std::size_t>(i)];
        auto& slot = out[static_cast<std::size_t>(p.joint)];
        if (slot < 0 && norm(p.position - tmpl.rest_joints[static_cast<std::size_t>(p.joint)]) < 1e-12) {
            slot = i;
        }
    }
    return out;
}

inline PersonMesh person_mesh(const SkeletonTemplate& tmpl, const PersonEstimate& e) {
    PersonMesh m;
    m.id = e.id;
    const auto fk = forward_kinematics(tmpl, e.params.pose, e.params.shape);
    for (const auto& v : skin_points(tmpl, fk)) {
        m.vertices.push_back(v + e.translation);
    }
    const auto jp = joint_point_indices(tmpl);
    for (int j = 1; j < tmpl.joint_count(); ++j) {
        const int a = jp[static_cast<std::size_t>(tmpl.parents[static_cast<std::size_t>(j)])];
        const int b = jp[static_cast<std::size_t>(j)];
        if (a >= 0 && b >= 0) {
            m.edges.emplace_back(a, b);
        }
    }
    return m;
}

// Square patch of the plane with unit normal n through the mean ankle
// midpoint, sized to cover every person's ankles.
inline std::array<Vec3d, 4> plane_quad(const SkeletonTemplate& tmpl, std::span<const PersonEstimate> estimates,
                                       const Vec3d& normal) {
    const double len = norm(normal);
    if (!(len > 0.0) || estimates.empty()) {
        throw DomainError("plane_quad: need a non-zero normal and at least one person");
    }
    const Vec3d n = normal / len;
    std::vector<Vec3d> ankles;
    Vec3d center{};
    for (const auto& e : estimates) {
        const auto fk = forward_kinematics(tmpl, e.params.pose, e.params.shape);
        ankles.push_back(ankle_midpoint(tmpl, fk.joints) + e.translation);
        center = center + ankles.back();
    }
    center = center / static_cast<double>(ankles.size());
    const Vec3d helper = std::abs(n.x) < 0.9 ? Vec3d{1.0, 0.0, 0.0} : Vec3d{0.0, 1.0, 0.0};
    Vec3d u = cross(n, helper);
    u = u / norm(u);
    const Vec3d v = cross(n, u);
    double half = 0.5;
    for (const auto& a : ankles) {
        const Vec3d d = a - center;
        half = std::max({half, std::abs(dot(d, u)) + 0.5, std::abs(dot(d, v)) + 0.5});
    }
    const Vec3d& c = center;
    return {c - u * half - v * half, c + u * half - v * half, c + u * half + v * half, c - u * half + v * half};
}

enum class MeshFormat { obj, ply };

// Person ids become file names; anything outside [A-Za-z0-9_.-] maps to '_'.
inline std::string file_stem(const std::string& id) {
    std::string out = id.empty() ? std::string("person") : id;
    for (char& ch : out) {
        const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                        ch == '_' || ch == '-' || ch == '.';
        if (!ok) {
            ch = '_';
        }
    }
    if (out == "." || out == ".." || out == "scene") {
        out = "person_" + out;
    }
    return out;
}

namespace io_detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline std::string write_obj(const std::vector<PersonMesh>& meshes, const std::optional<std::array<Vec3d, 4>>& quad) {
    std::ostringstream out;
    std::size_t base = 1;
    for (const auto& m : meshes) {
        out << "o " << m.id << "\n";
        for (const auto& v : m.vertices) {
            out << "v " << fmt(v.x) << " " << fmt(v.y) << " " << fmt(v.z) << "\n";
        }
        for (const auto& [a, b] : m.edges) {
            out << "l " << base + static_cast<std::size_t>(a) << " " << base + static_cast<std::size_t>(b) << "\n";
        }
        base += m.vertices.size();
    }
    if (quad) {
        out << "o ground_plane\n";
        for (const auto& v : *quad) {
            out << "v " << fmt(v.x) << " " << fmt(v.y) << " " << fmt(v.z) << "\n";
        }
        out << "f " << base << " " << base + 1 << " " << base + 2 << " " << base + 3 << "\n";
    }
    return out.str();
}

inline std::string write_ply(const std::vector<PersonMesh>& meshes, const std::optional<std::array<Vec3d, 4>>& quad) {
    std::size_t nv = quad ? 4 : 0;
    std::size_t ne = 0;
    for (const auto& m : meshes) {
        nv += m.vertices.size();
        ne += m.edges.size();
    }
    std::ostringstream out;
    out << "ply\nformat ascii 1.0\n";
    out << "element vertex " << nv << "\nproperty float x\nproperty float y\nproperty float z\n";
    out << "element edge " << ne << "\nproperty int vertex1\nproperty int vertex2\n";
    out << "element face " << (quad ? 1 : 0) << "\nproperty list uchar int vertex_indices\n";
    out << "end_header\n";
    for (const auto& m : meshes) {
        for (const auto& v : m.vertices) {
            out << fmt(v.x) << " " << fmt(v.y) << " " << fmt(v.z) << "\n";
        }
    }
    if (quad) {
        for (const auto& v : *quad) {
            out << fmt(v.x) << " " << fmt(v.y) << " " << fmt(v.z) << "\n";
        }
    }
    std::size_t base = 0;
    for (const auto& m : meshes) {
        for (const auto& [a, b] : m.edges) {
            out << base + static_cast<std::size_t>(a) << " " << base + static_cast<std::size_t>(b) << "\n";
        }
        base += m.vertices.size();
    }
    if (quad) {
        out << "4 " << base << " " << base + 1 << " " << base + 2 << " " << base + 3 << "\n";
    }
    return out.str();
}

}  // namespace io_detail

inline std::string mesh_text(const std::vector<PersonMesh>& meshes, const std::optional<std::array<Vec3d, 4>>& quad,
                             MeshFormat format) {
    return format == MeshFormat::obj ? io_detail::write_obj(meshes, quad) : io_detail::write_ply(meshes, quad);
}

// One file per person plus scene.<ext> holding everyone and, when the
// result carries a normal, the ground-plane quad. Returns the written paths.
inline std::vector<std::filesystem::path> export_geometry(const SkeletonTemplate& tmpl, const SceneEstimate& est,
                                                          MeshFormat format, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create directory '" + dir.string() + "': " + ec.message());
    }
    const std::string ext = format == MeshFormat::obj ? ".obj" : ".ply";
    std::vector<std::filesystem::path> written;
    std::vector<PersonMesh> meshes;
    for (const auto& e : est.persons) {
        meshes.push_back(person_mesh(tmpl, e));
        const auto path = dir / (file_stem(e.id) + ext);
        write_text_file(path, mesh_text({meshes.back()}, std::nullopt, format));
        written.push_back(path);
    }
    std::optional<std::array<Vec3d, 4>> quad;
    if (est.normal && !est.persons.empty() && norm(*est.normal) > 0.0) {
        quad = plane_quad(tmpl, est.persons, *est.normal);
    }
    const auto path = dir / ("scene" + ext);
    write_text_file(path, mesh_text(meshes, quad, format));
    written.push_back(path);
    return written;
}

}  // namespace crowdfit
