#include "portalvr/image_io.hpp"
#include "portalvr/raster.hpp"

#include "raster_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace portalvr;
using namespace portalvr::raster;

namespace {

constexpr Rgba8 kBlack{0, 0, 0, 255};
constexpr Rgba8 kRed{255, 0, 0, 255};
constexpr Rgba8 kGreen{0, 255, 0, 255};

Projection square_projection(double fov_deg = 90.0) {
    Projection p;
    p.fov_y = deg_to_rad(fov_deg);
    p.aspect = 1.0;
    return p;
}

Mesh single(const Vec3& a, const Vec3& b, const Vec3& c, Rgba8 color, std::uint32_t space = 1, bool cull = true) {
    Mesh m;
    m.space = SpaceId{space};
    m.cull_backfaces = cull;
    m.triangles.push_back({{a, b, c}, color});
    return m;
}

// Screen-filling quad at depth d (fov 90: half extent = d), split into a fan.
Mesh full_screen(double d, Rgba8 color, int slices = 1, std::uint32_t space = 1) {
    Mesh m;
    m.space = SpaceId{space};
    const double e = d * 1.5;
    const Vec3 corners[4] = {Vec3(-e, -e, -d), Vec3(e, -e, -d), Vec3(e, e, -d), Vec3(-e, e, -d)};
    const Vec3 c(0.13 * d, -0.07 * d, -d);
    for (int k = 0; k < 4; ++k) {
        for (int s = 0; s < slices; ++s) {
            const Vec3 a = corners[k] + (corners[(k + 1) % 4] - corners[k]) * (static_cast<double>(s) / slices);
            const Vec3 b = corners[k] + (corners[(k + 1) % 4] - corners[k]) * (static_cast<double>(s + 1) / slices);
            m.triangles.push_back({{c, a, b}, color});
        }
    }
    return m;
}

std::size_t count_color(const FrameTarget& t, Rgba8 c) {
    std::size_t n = 0;
    for (const Rgba8& p : t.color()) n += (p == c) ? 1 : 0;
    return n;
}

}  // namespace

TEST_CASE("clear resets every buffer and the counters") {
    FrameTarget t(8, 4);
    t.clear(kRed);
    draw_mesh(t, full_screen(2.0, kGreen), RigidTransform{}, square_projection(), StencilPolicy::mark_only(7), t.full_viewport());
    CHECK(t.counters().fragments_depth_stencil_only > 0);
    t.clear(kRed);
    CHECK(t.counters() == RasterCounters{});
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 8; ++x) {
            const PixelSample s = t.read_pixel(x, y);
            CHECK(s.color == kRed);
            CHECK(std::isinf(s.depth));
            CHECK(s.stencil == 0);
            CHECK(s.space_id == 0);
        }
    }
    CHECK_THROWS_AS((void)t.read_pixel(8, 0), std::out_of_range);
    CHECK_THROWS_AS((void)t.read_pixel(0, -1), std::out_of_range);
}

TEST_CASE("clear of a stereo target resets both viewports") {
    StereoTarget st(16, 16);
    st.frame().clear(kBlack);
    const Mesh m = full_screen(2.0, kGreen);
    draw_mesh(st.frame(), m, RigidTransform{}, square_projection(), StencilPolicy::permissive(), st.viewport(Eye::left));
    draw_mesh(st.frame(), m, RigidTransform{}, square_projection(), StencilPolicy::permissive(), st.viewport(Eye::right));
    CHECK(count_color(st.frame(), kGreen) == 2u * 16 * 16);
    st.frame().clear(kBlack);
    CHECK(count_color(st.frame(), kBlack) == 2u * 16 * 16);
}

TEST_CASE("single triangle shades exactly its covered pixels") {
    oracle::Case cs;
    cs.width = cs.height = 64;
    cs.stencil.assign(64 * 64, 0);
    oracle::Tri t;
    t.v[0] = Vec3(-1.1, -0.9, -2.0);
    t.v[1] = Vec3(1.3, -0.4, -2.5);
    t.v[2] = Vec3(0.2, 1.2, -1.5);
    t.color = kRed;
    cs.tris.push_back(t);
    const oracle::Result expect = oracle::run(cs);
    const oracle::Result got = oracle::run_raster(cs);
    CHECK(got.counters.fragments_shaded == expect.counters.fragments_shaded);
    CHECK(got.counters.fragments_shaded > 500);
    CHECK(oracle::compare(got, expect).empty());

    // Reversed winding is culled.
    std::swap(cs.tris[0].v[1], cs.tris[0].v[2]);
    const oracle::Result culled = oracle::run_raster(cs);
    CHECK(culled.counters.fragments_shaded == 0);
    CHECK(culled.counters.triangles_culled == 1);
    // Unless the mesh disables culling.
    cs.tris[0].cull = false;
    CHECK(oracle::run_raster(cs).counters.fragments_shaded == expect.counters.fragments_shaded);
}

TEST_CASE("mark-only policy leaves color and space ids alone") {
    FrameTarget t(32, 32);
    t.clear(kBlack);
    const Mesh m = single(Vec3(-1, -1, -2), Vec3(1, -1, -2), Vec3(0, 1, -2), kRed, 4);
    draw_mesh(t, m, RigidTransform{}, square_projection(), StencilPolicy::mark_only(9), t.full_viewport());
    CHECK(count_color(t, kBlack) == 32u * 32);
    std::size_t marked = 0;
    for (std::size_t k = 0; k < t.stencil().size(); ++k) {
        CHECK(t.space_ids()[k] == 0);
        if (t.stencil()[k] == 9) {
            ++marked;
            CHECK(std::isfinite(t.depth()[k]));
        }
    }
    CHECK(marked == t.counters().fragments_depth_stencil_only);
    CHECK(t.counters().fragments_shaded == 0);
}

TEST_CASE("nearer triangle wins regardless of order") {
    for (bool near_first : {false, true}) {
        FrameTarget t(16, 16);
        t.clear(kBlack);
        const Mesh near_m = full_screen(1.0, kRed, 1, 2);
        const Mesh far_m = full_screen(3.0, kGreen, 1, 3);
        draw_mesh(t, near_first ? near_m : far_m, RigidTransform{}, square_projection(), StencilPolicy::permissive(), t.full_viewport());
        draw_mesh(t, near_first ? far_m : near_m, RigidTransform{}, square_projection(), StencilPolicy::permissive(), t.full_viewport());
        const PixelSample s = t.read_pixel(5, 9);
        CHECK(s.color == kRed);
        CHECK(s.space_id == 2);
        CHECK(s.depth == doctest::Approx(1.0));
        CHECK(t.counters().fragments_depth_rejected == (near_first ? 256u : 0u));
    }
}

TEST_CASE("oracle equivalence on random configurations") {
    std::mt19937_64 rng(20240601);
    int exercised_edges = 0;
    for (int n = 0; n < 60; ++n) {
        const oracle::Case cs = oracle::random_case(rng);
        const std::string diff = oracle::compare(oracle::run_raster(cs), oracle::run(cs));
        CHECK_MESSAGE(diff.empty(), "case " << n << ": " << diff);
        exercised_edges += cs.tris.size() > 1 ? 1 : 0;
    }
    CHECK(exercised_edges > 10);
}

TEST_CASE("shared edges shade every pixel exactly once") {
    for (int slices : {1, 3, 7}) {
        FrameTarget t(64, 48);
        t.clear(kBlack);
        Projection p = square_projection();
        p.aspect = 64.0 / 48.0;
        draw_mesh(t, full_screen(2.0, kRed, slices), RigidTransform{}, p, StencilPolicy::permissive(), t.full_viewport());
        CHECK(t.counters().fragments_shaded == 64u * 48);
        CHECK(t.counters().fragments_depth_rejected == 0);
        CHECK(count_color(t, kRed) == 64u * 48);
    }
}

TEST_CASE("closed outward box seen from inside shades nothing") {
    FrameTarget t(32, 32);
    t.clear(kBlack);
    Mesh box;
    box.space = SpaceId{1};
    const Vec3 lo(-1, -1, -1), hi(1, 1, 1);
    auto quad = [&](Vec3 a, Vec3 b, Vec3 c, Vec3 d) {
        box.triangles.push_back({{a, b, c}, kRed});
        box.triangles.push_back({{a, c, d}, kRed});
    };
    quad(Vec3(lo.x(), lo.y(), hi.z()), Vec3(hi.x(), lo.y(), hi.z()), Vec3(hi.x(), hi.y(), hi.z()), Vec3(lo.x(), hi.y(), hi.z()));
    quad(Vec3(hi.x(), lo.y(), lo.z()), Vec3(lo.x(), lo.y(), lo.z()), Vec3(lo.x(), hi.y(), lo.z()), Vec3(hi.x(), hi.y(), lo.z()));
    quad(Vec3(hi.x(), lo.y(), hi.z()), Vec3(hi.x(), lo.y(), lo.z()), Vec3(hi.x(), hi.y(), lo.z()), Vec3(hi.x(), hi.y(), hi.z()));
    quad(Vec3(lo.x(), lo.y(), lo.z()), Vec3(lo.x(), lo.y(), hi.z()), Vec3(lo.x(), hi.y(), hi.z()), Vec3(lo.x(), hi.y(), lo.z()));
    quad(Vec3(lo.x(), hi.y(), hi.z()), Vec3(hi.x(), hi.y(), hi.z()), Vec3(hi.x(), hi.y(), lo.z()), Vec3(lo.x(), hi.y(), lo.z()));
    quad(Vec3(lo.x(), lo.y(), lo.z()), Vec3(hi.x(), lo.y(), lo.z()), Vec3(hi.x(), lo.y(), hi.z()), Vec3(lo.x(), lo.y(), hi.z()));
    const RigidTransform view = RigidTransform::from_rotation(quat_from_ypr_degrees(30, 10, 0), Vec3(0.1, 0.2, 0.0));
    draw_mesh(t, box, view, square_projection(), StencilPolicy::permissive(), t.full_viewport());
    CHECK(t.counters().fragments_shaded == 0);
    CHECK(t.counters().triangles_culled == 12);

    // Flipped inward, the same box fills the screen.
    for (Triangle& tri : box.triangles) std::swap(tri.v[1], tri.v[2]);
    t.clear(kBlack);
    draw_mesh(t, box, view, square_projection(), StencilPolicy::permissive(), t.full_viewport());
    CHECK(t.counters().fragments_shaded == 32u * 32);
}

TEST_CASE("near plane clipping keeps the visible part") {
    FrameTarget t(32, 32);
    t.clear(kBlack);
    // Floor below the eye, extending behind the camera.
    Mesh floor;
    floor.space = SpaceId{1};
    const Vec3 a(-10, -1, 10), b(10, -1, 10), c(10, -1, -10), d(-10, -1, -10);
    floor.triangles.push_back({{a, b, c}, kRed});
    floor.triangles.push_back({{a, c, d}, kRed});
    draw_mesh(t, floor, RigidTransform{}, square_projection(), StencilPolicy::permissive(), t.full_viewport());
    // The lower half (below the horizon) is covered, the upper half is not.
    CHECK(t.read_pixel(16, 31).color == kRed);
    CHECK(t.read_pixel(16, 0).color == kBlack);
    for (std::size_t k = 0; k < t.depth().size(); ++k) {
        if (std::isfinite(t.depth()[k])) CHECK(t.depth()[k] >= 0.05f);
    }
}

TEST_CASE("oblique plane clips geometry on its negative side") {
    FrameTarget t(32, 32);
    t.clear(kBlack);
    Projection p = square_projection();
    p.oblique_plane = Plane::through_point(Vec3(1, 0, 0), Vec3(0, 0, 0));
    draw_mesh(t, full_screen(2.0, kRed), RigidTransform{}, p, StencilPolicy::permissive(), t.full_viewport());
    CHECK(t.counters().fragments_shaded == 16u * 32);
    for (int y = 0; y < 32; ++y) {
        CHECK(t.read_pixel(15, y).color == kBlack);
        CHECK(t.read_pixel(16, y).color == kRed);
    }
}

TEST_CASE("masked stencil shades exactly the covered pixels carrying the reference") {
    std::mt19937_64 rng(17);
    for (int n = 0; n < 10; ++n) {
        oracle::Case cs = oracle::random_case(rng, 48);
        for (oracle::Tri& t : cs.tris) {
            t.policy = StencilPolicy::masked(1);
            t.cull = false;
        }
        cs.tris.resize(1);
        // Coverage alone: same triangle, permissive, on a clean stencil.
        oracle::Case cover = cs;
        cover.tris[0].policy = StencilPolicy::permissive();
        const oracle::Result covered = oracle::run(cover);
        std::uint64_t expect = 0;
        for (std::size_t k = 0; k < cs.stencil.size(); ++k) {
            if (covered.space[k] != 0 && cs.stencil[k] == 1) ++expect;
        }
        CHECK(oracle::run_raster(cs).counters.fragments_shaded == expect);
    }
}

TEST_CASE("output is identical across worker counts") {
    std::mt19937_64 rng(3);
    Mesh m;
    m.space = SpaceId{2};
    std::uniform_real_distribution<double> u(-3, 3);
    for (int i = 0; i < 200; ++i) {
        const Vec3 c(u(rng), u(rng), -4 - std::abs(u(rng)));
        m.triangles.push_back({{c, c + Vec3(1.5, 0.2, 0.3), c + Vec3(0.4, 1.7, -0.2)},
                               Rgba8{static_cast<std::uint8_t>(i), 80, static_cast<std::uint8_t>(255 - i), 255}});
    }
    std::vector<Rgba8> reference;
    RasterCounters reference_counters;
    for (int workers : {1, 2, 3, 8}) {
        FrameTarget t(256, 256);
        t.set_workers(workers);
        t.clear(kBlack);
        draw_mesh(t, m, RigidTransform{}, square_projection(), StencilPolicy::permissive(), t.full_viewport());
        draw_mesh(t, full_screen(7.0, kGreen, 5), RigidTransform{}, square_projection(), StencilPolicy::permissive(), t.full_viewport());
        if (workers == 1) {
            reference.assign(t.color().begin(), t.color().end());
            reference_counters = t.counters();
        } else {
            CHECK(std::equal(reference.begin(), reference.end(), t.color().begin()));
            CHECK(t.counters() == reference_counters);
        }
    }
}

TEST_CASE("instanced stereo draw equals two single-eye draws") {
    const Mesh m = full_screen(3.0, kRed, 4, 5);
    const Mesh scene = single(Vec3(-0.5, -0.5, -1.5), Vec3(0.7, -0.3, -1.6), Vec3(0.1, 0.6, -1.4), kGreen, 6);
    const RigidTransform lv = RigidTransform::translation_only(Vec3(0.032, 0, 0));
    const RigidTransform rv = RigidTransform::translation_only(Vec3(-0.032, 0, 0));
    Projection pl = square_projection(), pr = square_projection();
    pl.oblique_plane = Plane::through_point(Vec3(0, 0, -1), Vec3(0, 0, -1.55));
    pr.oblique_plane = Plane::through_point(Vec3(0.1, 0, -1).normalized(), Vec3(0, 0, -1.5));

    StereoTarget a(40, 30), b(40, 30);
    a.frame().clear(kBlack);
    b.frame().clear(kBlack);
    for (const Mesh* mesh : {&m, &scene}) {
        draw_mesh(a.frame(), *mesh, lv, pl, StencilPolicy::permissive(), a.viewport(Eye::left));
        draw_mesh(a.frame(), *mesh, rv, pr, StencilPolicy::permissive(), a.viewport(Eye::right));
        draw_mesh_instanced_stereo(b, *mesh, lv, rv, {pl, pr}, StencilPolicy::permissive());
    }
    CHECK(std::equal(a.frame().color().begin(), a.frame().color().end(), b.frame().color().begin()));
    CHECK(std::equal(a.frame().depth().begin(), a.frame().depth().end(), b.frame().depth().begin()));
    CHECK(std::equal(a.frame().space_ids().begin(), a.frame().space_ids().end(), b.frame().space_ids().begin()));
    CHECK(a.frame().counters().fragments_shaded == b.frame().counters().fragments_shaded);
    CHECK(b.frame().counters().triangles_submitted == m.triangles.size() + 1);
    CHECK(a.frame().counters().triangles_submitted == 2 * (m.triangles.size() + 1));

    // Identical views give identical halves.
    StereoTarget c(20, 20);
    c.frame().clear(kBlack);
    draw_mesh_instanced_stereo(c, scene, lv, lv, {pl, pl}, StencilPolicy::permissive());
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) CHECK(c.frame().read_pixel(x, y).color == c.frame().read_pixel(x + 20, y).color);
    }
}

TEST_CASE("single-eye draw never touches the other viewport") {
    StereoTarget st(24, 24);
    st.frame().clear(kBlack);
    draw_mesh(st.frame(), full_screen(1.0, kRed), RigidTransform{}, square_projection(), StencilPolicy::permissive(),
              st.viewport(Eye::left));
    for (int y = 0; y < 24; ++y) {
        for (int x = 24; x < 48; ++x) CHECK(st.frame().read_pixel(x, y).color == kBlack);
    }
}

TEST_CASE("hidden-area mask") {
    FrameTarget t(64, 64);
    const Mesh quad = full_screen(2.0, kRed);

    t.clear(kBlack);
    CHECK(apply_hidden_area_mask(t, t.full_viewport(), {}) == 0);
    draw_mesh(t, quad, RigidTransform{}, square_projection(), {Compare::not_equal, kStencilReject}, t.full_viewport());
    CHECK(t.counters().fragments_shaded == 64u * 64);

    t.clear(kBlack);
    const MaskTriangle whole[2] = {{{Vec2(0, 0), Vec2(1, 0), Vec2(1, 1)}}, {{Vec2(0, 0), Vec2(1, 1), Vec2(0, 1)}}};
    CHECK(apply_hidden_area_mask(t, t.full_viewport(), whole) == 64u * 64);
    draw_mesh(t, quad, RigidTransform{}, square_projection(), {Compare::not_equal, kStencilReject}, t.full_viewport());
    CHECK(t.counters().fragments_shaded == 0);

    // Corner wedge x + y < 0.3 (in viewport units); no pixel center lies on its edges.
    t.clear(kBlack);
    const MaskTriangle wedge[1] = {{{Vec2(0, 0), Vec2(0.3, 0), Vec2(0, 0.3)}}};
    std::uint64_t k = 0;
    for (int j = 0; j < 64; ++j) {
        for (int i = 0; i < 64; ++i) k += ((i + 0.5) + (j + 0.5) < 0.3 * 64) ? 1 : 0;
    }
    CHECK(apply_hidden_area_mask(t, t.full_viewport(), wedge) == k);
    draw_mesh(t, quad, RigidTransform{}, square_projection(), {Compare::not_equal, kStencilReject}, t.full_viewport());
    CHECK(t.counters().fragments_shaded == 64u * 64 - k);
    // Re-applying counts only newly masked pixels.
    CHECK(apply_hidden_area_mask(t, t.full_viewport(), wedge) == 0);
}

TEST_CASE("lens mask covers the corners and spares the center") {
    FrameTarget t(64, 64);
    t.clear(kBlack);
    const auto mask = make_lens_mask();
    const std::uint64_t n = apply_hidden_area_mask(t, t.full_viewport(), mask);
    CHECK(n > 0);
    CHECK(n < 64u * 64 / 4);
    CHECK(t.read_pixel(0, 0).stencil == kStencilReject);
    CHECK(t.read_pixel(63, 63).stencil == kStencilReject);
    CHECK(t.read_pixel(32, 32).stencil == 0);
    CHECK(t.read_pixel(32, 0).stencil == 0);
    CHECK_THROWS_AS((void)make_lens_mask(0), std::invalid_argument);
    CHECK_THROWS_AS((void)make_lens_mask(8, 1.0), std::invalid_argument);
}

TEST_CASE("portal surfaces copy color and space id from the source target") {
    FrameTarget src(16, 16), dst(16, 16);
    src.clear(kBlack);
    draw_mesh(src, full_screen(2.0, kGreen, 1, 7), RigidTransform{}, square_projection(), StencilPolicy::permissive(), src.full_viewport());
    dst.clear(kBlack);
    Mesh portal = full_screen(1.0, kRed, 1, 3);
    portal.material = Material::portal_surface;
    portal.portal = PortalId{1};
    draw_mesh(dst, portal, RigidTransform{}, square_projection(), StencilPolicy::permissive(), dst.full_viewport(), &src);
    const PixelSample s = dst.read_pixel(4, 4);
    CHECK(s.color == kGreen);
    CHECK(s.space_id == 7);
    CHECK(s.depth == doctest::Approx(1.0));
}

TEST_CASE("image dumps") {
    FrameTarget t(8, 6);
    t.clear(kRed);
    const std::string ppm = encode_image(t, t.full_viewport());
    CHECK(ppm.rfind("P6\n8 6\n255\n", 0) == 0);
    CHECK(ppm.size() == 11 + 8 * 6 * 3);
    CHECK(static_cast<unsigned char>(ppm[11]) == 255);
    CHECK(ppm[12] == 0);
    const std::string pgm = encode_image(t, {0, 0, 4, 6}, Channel::depth);
    CHECK(pgm.rfind("P5\n4 6\n255\n", 0) == 0);
    CHECK(pgm.size() == 11 + 4 * 6);
    CHECK(pgm[11] == 0);
}
