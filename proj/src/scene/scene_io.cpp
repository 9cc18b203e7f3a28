#include "portalvr/scene_io.hpp"

#include "portalvr/geometry.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace portalvr {

using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& msg) { throw SceneError(SceneError::Kind::parse, msg); }

const json& require(const json& obj, const char* key, const char* where) {
    if (!obj.is_object() || !obj.contains(key)) {
        parse_fail(std::string(where) + ": missing key '" + key + "'");
    }
    return obj.at(key);
}

Vec3 read_vec3(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 3) parse_fail(std::string(what) + ": expected [x, y, z]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Rgba8 read_color(const json& j) {
    if (!j.is_array() || (j.size() != 3 && j.size() != 4)) parse_fail("color: expected [r, g, b] or [r, g, b, a]");
    auto channel = [&](std::size_t i) {
        const int v = j[i].get<int>();
        if (v < 0 || v > 255) parse_fail("color channel out of range");
        return static_cast<std::uint8_t>(v);
    };
    return Rgba8{channel(0), channel(1), channel(2), j.size() == 4 ? channel(3) : std::uint8_t{255}};
}

FloorRect read_rect(const json& j, const char* what) {
    const json& lo = require(j, "min", what);
    const json& hi = require(j, "max", what);
    if (!lo.is_array() || lo.size() != 2 || !hi.is_array() || hi.size() != 2) parse_fail(std::string(what) + ": expected [x, z] pairs");
    return FloorRect{lo[0].get<double>(), lo[1].get<double>(), hi[0].get<double>(), hi[1].get<double>()};
}

Mat3 read_rotation(const json& obj, const char* what) {
    if (obj.contains("rotation")) {
        const json& r = obj.at("rotation");
        if (!r.is_array() || r.size() != 9) parse_fail(std::string(what) + ": rotation must have 9 entries");
        Mat3 m;
        for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = r[static_cast<std::size_t>(i)].get<double>();
        return m;
    }
    Vec3 ypr = Vec3::Zero();
    if (obj.contains("ypr_deg")) ypr = read_vec3(obj.at("ypr_deg"), what);
    return quat_from_ypr_degrees(ypr.x(), ypr.y(), ypr.z()).toRotationMatrix();
}

Mesh read_mesh(const json& j, std::size_t index) {
    const std::string name = j.value("name", "mesh" + std::to_string(index));
    const SpaceId space{require(j, "space", "mesh").get<std::uint32_t>()};
    const Rgba8 color = j.contains("color") ? read_color(j.at("color")) : Rgba8{180, 180, 180, 255};

    Mesh m;
    if (j.contains("primitive")) {
        const std::string prim = j.at("primitive").get<std::string>();
        if (prim == "box") {
            m = make_box_mesh(name, space, read_vec3(require(j, "center", "box"), "center"),
                              read_vec3(require(j, "size", "box"), "size"), color, j.value("inward", false));
        } else if (prim == "quad") {
            const json& size = require(j, "size", "quad");
            if (!size.is_array() || size.size() != 2) parse_fail("quad size must be [w, h]");
            Vec3 ypr = j.contains("ypr_deg") ? read_vec3(j.at("ypr_deg"), "ypr_deg") : Vec3::Zero();
            const RigidTransform pose = RigidTransform::from_rotation(quat_from_ypr_degrees(ypr.x(), ypr.y(), ypr.z()),
                                                                      read_vec3(require(j, "center", "quad"), "center"));
            m = make_quad_mesh(name, space, pose, size[0].get<double>(), size[1].get<double>(), color);
        } else if (prim == "prism") {
            m = make_prism_mesh(name, space, read_vec3(require(j, "center", "prism"), "center"),
                                require(j, "radius", "prism").get<double>(), require(j, "height", "prism").get<double>(),
                                j.value("sides", 8), color);
        } else {
            parse_fail("unknown primitive '" + prim + "'");
        }
    } else {
        m.name = name;
        m.space = space;
        const json& tris = require(j, "triangles", "mesh");
        if (!tris.is_array()) parse_fail("triangles must be an array");
        const json* face_colors = j.contains("face_colors") ? &j.at("face_colors") : nullptr;
        if (face_colors != nullptr && (!face_colors->is_array() || face_colors->size() != tris.size())) {
            parse_fail("face_colors must match the triangle count");
        }
        for (std::size_t i = 0; i < tris.size(); ++i) {
            const json& t = tris[i];
            if (!t.is_array() || t.size() != 9) parse_fail("each triangle needs 9 coordinates");
            Triangle tri;
            for (int k = 0; k < 3; ++k) {
                const auto base = static_cast<std::size_t>(3 * k);
                tri.v[static_cast<std::size_t>(k)] = Vec3(t[base].get<double>(), t[base + 1].get<double>(), t[base + 2].get<double>());
            }
            tri.color = face_colors != nullptr ? read_color((*face_colors)[i]) : color;
            m.triangles.push_back(tri);
        }
    }
    m.cull_backfaces = j.value("cull_backfaces", true);
    return m;
}

Scene parse(const json& doc) {
    if (!doc.is_object()) parse_fail("scene document must be an object");
    Scene scene;

    for (const json& s : require(doc, "spaces", "scene")) {
        Space space;
        space.id = SpaceId{require(s, "id", "space").get<std::uint32_t>()};
        space.name = s.value("name", "");
        if (s.contains("walkable")) space.walkable = read_rect(s.at("walkable"), "walkable");
        scene.spaces.push_back(space);
    }

    if (doc.contains("meshes")) {
        std::size_t i = 0;
        for (const json& m : doc.at("meshes")) scene.meshes.push_back(read_mesh(m, i++));
    }

    if (doc.contains("portals")) {
        for (const json& p : doc.at("portals")) {
            Portal portal;
            portal.id = PortalId{require(p, "id", "portal").get<std::uint32_t>()};
            portal.partner = PortalId{require(p, "partner", "portal").get<std::uint32_t>()};
            portal.space = SpaceId{require(p, "space", "portal").get<std::uint32_t>()};
            try {
                portal.pose = RigidTransform(read_rotation(p, "portal"), read_vec3(require(p, "position", "portal"), "position"));
            } catch (const std::invalid_argument& e) {
                parse_fail(std::string("portal pose: ") + e.what());
            }
            portal.width = require(p, "width", "portal").get<double>();
            portal.height = require(p, "height", "portal").get<double>();
            portal.box_depth = p.value("box_depth", 0.5);
            portal.enabled = p.value("enabled", true);
            if (p.contains("color")) portal.frame_color = read_color(p.at("color"));
            scene.portals.push_back(portal);
        }
    }

    scene.tracked_bounds = read_rect(require(doc, "tracked_bounds", "scene"), "tracked_bounds");

    const json& rig = require(doc, "rig", "scene");
    scene.rig.space = SpaceId{require(rig, "space", "rig").get<std::uint32_t>()};
    scene.rig.head.position = read_vec3(require(rig, "position", "rig"), "rig position");
    if (rig.contains("quat")) {
        const json& q = rig.at("quat");
        if (!q.is_array() || q.size() != 4) parse_fail("rig quat must be [w, x, y, z]");
        scene.rig.head.orientation = Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
        try {
            check_normalized(scene.rig.head);
        } catch (const std::invalid_argument& e) {
            parse_fail(e.what());
        }
    } else {
        const Vec3 ypr = rig.contains("ypr_deg") ? read_vec3(rig.at("ypr_deg"), "rig ypr_deg") : Vec3::Zero();
        scene.rig.head.orientation = quat_from_ypr_degrees(ypr.x(), ypr.y(), ypr.z());
    }
    scene.rig.ipd = rig.value("ipd", 0.064);
    scene.rig.projection.fov_y = rig.contains("fov_rad") ? rig.at("fov_rad").get<double>() : deg_to_rad(rig.value("fov_deg", 90.0));
    scene.rig.projection.aspect = rig.value("aspect", 1.0);
    scene.rig.projection.near = rig.value("near", 0.05);
    scene.rig.projection.far = rig.value("far", 100.0);
    return scene;
}

json write_color(Rgba8 c) { return json::array({c.r, c.g, c.b, c.a}); }
json write_vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json write_rect(const FloorRect& r) {
    return json{{"min", json::array({r.min_x, r.min_z})}, {"max", json::array({r.max_x, r.max_z})}};
}

}  // namespace

Scene load_scene(std::string_view document) {
    json doc;
    try {
        doc = json::parse(document.begin(), document.end());
    } catch (const json::exception& e) {
        parse_fail(std::string("malformed scene document: ") + e.what());
    }
    Scene scene;
    try {
        scene = parse(doc);
    } catch (const json::exception& e) {
        parse_fail(std::string("scene document has wrong field types: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw SceneError(SceneError::Kind::invalid_dimension, e.what());
    }
    validate_scene(scene);
    return scene;
}

Scene load_scene_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) parse_fail("cannot open scene file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scene(ss.str());
}

std::string save_scene(const Scene& scene) {
    json doc;
    doc["spaces"] = json::array();
    for (const Space& s : scene.spaces) {
        json js{{"id", s.id.value}, {"name", s.name}};
        if (s.walkable) js["walkable"] = write_rect(*s.walkable);
        doc["spaces"].push_back(js);
    }
    doc["meshes"] = json::array();
    for (const Mesh& m : scene.meshes) {
        if (m.material != Material::opaque) continue;  // generated geometry is not serialized
        json jm{{"name", m.name}, {"space", m.space.value}, {"cull_backfaces", m.cull_backfaces}};
        json tris = json::array();
        json colors = json::array();
        for (const Triangle& t : m.triangles) {
            json coords = json::array();
            for (const Vec3& v : t.v) {
                coords.push_back(v.x());
                coords.push_back(v.y());
                coords.push_back(v.z());
            }
            tris.push_back(coords);
            colors.push_back(write_color(t.color));
        }
        jm["triangles"] = tris;
        jm["face_colors"] = colors;
        doc["meshes"].push_back(jm);
    }
    doc["portals"] = json::array();
    for (const Portal& p : scene.portals) {
        const Mat3 r = p.pose.rotation();
        json rot = json::array();
        for (int i = 0; i < 9; ++i) rot.push_back(r(i / 3, i % 3));
        const Vec3 ypr = ypr_degrees_from_quat(Quat(r));
        doc["portals"].push_back(json{{"id", p.id.value},
                                      {"partner", p.partner.value},
                                      {"space", p.space.value},
                                      {"position", write_vec3(p.pose.translation())},
                                      {"ypr_deg", write_vec3(ypr)},
                                      {"rotation", rot},
                                      {"width", p.width},
                                      {"height", p.height},
                                      {"box_depth", p.box_depth},
                                      {"enabled", p.enabled},
                                      {"color", write_color(p.frame_color)}});
    }
    doc["tracked_bounds"] = write_rect(scene.tracked_bounds);
    const Quat& q = scene.rig.head.orientation;
    doc["rig"] = json{{"space", scene.rig.space.value},
                      {"position", write_vec3(scene.rig.head.position)},
                      {"ypr_deg", write_vec3(ypr_degrees_from_quat(q))},
                      {"quat", json::array({q.w(), q.x(), q.y(), q.z()})},
                      {"ipd", scene.rig.ipd},
                      {"fov_deg", rad_to_deg(scene.rig.projection.fov_y)},
                      {"fov_rad", scene.rig.projection.fov_y},
                      {"aspect", scene.rig.projection.aspect},
                      {"near", scene.rig.projection.near},
                      {"far", scene.rig.projection.far}};
    return doc.dump(1);
}

void save_scene_file(const Scene& scene, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scene file " + path.string());
    out << save_scene(scene) << '\n';
}

}  // namespace portalvr
