#include "portalvr/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace portalvr {

void add_quad(Mesh& mesh, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, Rgba8 color) {
    mesh.triangles.push_back(Triangle{{a, b, c}, color});
    mesh.triangles.push_back(Triangle{{a, c, d}, color});
}

namespace {

// Face with normal u x v, centered at c, half extents folded into u and v.
void add_face(Mesh& mesh, const Vec3& c, const Vec3& u, const Vec3& v, Rgba8 color) {
    add_quad(mesh, c - u - v, c + u - v, c + u + v, c - u + v, color);
}

}  // namespace

Mesh make_box_mesh(std::string name, SpaceId space, const Vec3& center, const Vec3& size, Rgba8 color, bool inward) {
    if ((size.array() <= 0.0).any()) {
        throw std::invalid_argument("box size must be positive");
    }
    Mesh m;
    m.name = std::move(name);
    m.space = space;
    const Vec3 h = 0.5 * size;
    const Vec3 x(h.x(), 0, 0), y(0, h.y(), 0), z(0, 0, h.z());
    add_face(m, center + x, y, z, color);
    add_face(m, center - x, z, y, color);
    add_face(m, center + y, z, x, color);
    add_face(m, center - y, x, z, color);
    add_face(m, center + z, x, y, color);
    add_face(m, center - z, y, x, color);
    if (inward) {
        for (Triangle& t : m.triangles) std::swap(t.v[1], t.v[2]);
    }
    return m;
}

Mesh make_quad_mesh(std::string name, SpaceId space, const RigidTransform& pose, double width, double height, Rgba8 color) {
    Mesh m;
    m.name = std::move(name);
    m.space = space;
    const double hw = 0.5 * width, hh = 0.5 * height;
    add_quad(m, pose.apply_point({-hw, -hh, 0}), pose.apply_point({hw, -hh, 0}), pose.apply_point({hw, hh, 0}),
             pose.apply_point({-hw, hh, 0}), color);
    return m;
}

Mesh make_prism_mesh(std::string name, SpaceId space, const Vec3& base_center, double radius, double height, int sides, Rgba8 color) {
    if (sides < 3 || !(radius > 0) || !(height > 0)) {
        throw std::invalid_argument("prism needs >= 3 sides and positive radius/height");
    }
    Mesh m;
    m.name = std::move(name);
    m.space = space;
    const Vec3 top = base_center + Vec3(0, height, 0);
    for (int i = 0; i < sides; ++i) {
        // Counter-clockwise around +Y seen from above.
        const double a0 = 2.0 * kPi * i / sides;
        const double a1 = 2.0 * kPi * (i + 1) / sides;
        const Vec3 d0(radius * std::cos(a0), 0, -radius * std::sin(a0));
        const Vec3 d1(radius * std::cos(a1), 0, -radius * std::sin(a1));
        add_quad(m, base_center + d0, base_center + d1, top + d1, top + d0, color);
        m.triangles.push_back(Triangle{{top, top + d0, top + d1}, color});
        m.triangles.push_back(Triangle{{base_center, base_center + d1, base_center + d0}, color});
    }
    return m;
}

void append_triangles(Mesh& dst, const Mesh& src) {
    dst.triangles.insert(dst.triangles.end(), src.triangles.begin(), src.triangles.end());
}

}  // namespace portalvr
