#include "portalvr/bench.hpp"
#include "portalvr/scene_io.hpp"
#include "portalvr/test_scenes.hpp"

#ifdef PORTALVR_HAVE_STREAM
#include "portalvr/stream/server.hpp"
#endif

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <thread>

using namespace portalvr;

namespace {

bool parse_resolution(const std::string& text, int& w, int& h) {
    const auto x = text.find('x');
    if (x == std::string::npos) return false;
    try {
        std::size_t used = 0;
        w = std::stoi(text.substr(0, x), &used);
        if (used != x) return false;
        h = std::stoi(text.substr(x + 1), &used);
        return used == text.size() - x - 1;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Portal rendering benchmark"};
    std::string scene_arg = "test:3";
    std::string mode_arg = "naive";
    std::string res_arg = "256x256";
    std::string trajectory_arg = "fixed";
    std::string csv_path;
    std::string dump_dir;
    std::string plan_dump;
    std::string web_root;
    std::string export_path;
    int frames = 60;
    int every = 1;
    int threads = 1;
    std::uint64_t seed = 1;
    int serve_port = -1;
    bool frustum_cull = false;
    bool hidden_area = false;
    bool no_portal_box = false;
    bool no_oblique = false;

    app.add_option("--scene", scene_arg, "test:N (N = 0..3), test:all, or a scene file");
    app.add_option("--mode", mode_arg, "naive | stencil | instanced | stencil-instanced");
    app.add_option("--frames", frames, "frames per configuration");
    app.add_option("--res", res_arg, "per-eye resolution WxH");
    app.add_option("--trajectory", trajectory_arg, "fixed | orbit | walk");
    app.add_option("--csv", csv_path, "per-frame CSV path (summary goes to <stem>_summary.csv)");
    app.add_option("--dump-frames", dump_dir, "directory for stereo frame images");
    app.add_option("--every", every, "dump every k-th frame");
    app.add_option("--seed", seed, "trajectory seed");
    app.add_option("--threads", threads, "raster worker threads");
    app.add_option("--plan-dump", plan_dump, "write the first frame's pass list to this file ('-' = stdout)");
    app.add_flag("--frustum-cull", frustum_cull, "plan only portals inside an eye frustum");
    app.add_flag("--hidden-area", hidden_area, "apply the lens hidden-area mask");
    app.add_flag("--no-portal-box", no_portal_box, "draw portals as plain quads");
    app.add_flag("--no-oblique", no_oblique, "disable oblique clipping in portal views");
    app.add_option("--serve", serve_port, "serve frames over WebSocket on this port");
    app.add_option("--web-root", web_root, "static files served next to the stream");
    app.add_option("--export-scene", export_path,
                   "write the --scene selection (test:N, four-rooms, walkthrough) as a scene file and exit");
    CLI11_PARSE(app, argc, argv);

    try {
        if (!export_path.empty()) {
            Scene scene;
            if (scene_arg == "four-rooms") {
                scene = build_four_room_scene();
            } else if (scene_arg == "walkthrough") {
                scene = build_walkthrough_scene().scene;
            } else if (scene_arg.rfind("test:", 0) == 0 && scene_arg.size() == 6 && scene_arg[5] >= '0' && scene_arg[5] <= '3') {
                scene = build_test_scene(scene_arg[5] - '0');
            } else {
                throw bench::BenchError("cannot export '" + scene_arg + "'");
            }
            save_scene_file(scene, export_path);
            return 0;
        }
        bench::BenchConfig base;
        const auto mode = parse_render_mode(mode_arg);
        if (!mode) throw bench::BenchError("unknown mode '" + mode_arg + "'");
        const auto trajectory = bench::parse_trajectory(trajectory_arg);
        if (!trajectory) throw bench::BenchError("unknown trajectory '" + trajectory_arg + "'");
        if (!parse_resolution(res_arg, base.width, base.height)) throw bench::BenchError("bad resolution '" + res_arg + "'");
        if (every < 1) throw bench::BenchError("--every must be >= 1");
        base.mode = *mode;
        base.trajectory = *trajectory;
        base.frames = frames;
        base.seed = seed;
        base.workers = threads;
        base.options.frustum_cull = frustum_cull;
        base.options.hidden_area_mask = hidden_area;
        base.options.portal_box = !no_portal_box;
        base.options.oblique_clip = !no_oblique;
        base.capture_every = dump_dir.empty() ? 0 : every;

        std::vector<bench::BenchConfig> configs;
        if (scene_arg == "test:all") {
            for (int p = 0; p <= 3; ++p) {
                configs.push_back(base);
                configs.back().test_pairs = p;
            }
        } else if (scene_arg.rfind("test:", 0) == 0) {
            configs.push_back(base);
            try {
                configs.back().test_pairs = std::stoi(scene_arg.substr(5));
            } catch (const std::exception&) {
                throw bench::BenchError("bad test scene '" + scene_arg + "'");
            }
        } else {
            configs.push_back(base);
            configs.back().scene_file = scene_arg;
        }
        for (const auto& c : configs) c.validate();

        if (serve_port >= 0) {
#ifdef PORTALVR_HAVE_STREAM
            if (serve_port > 65535) throw bench::BenchError("bad port");
            stream::SimulationConfig sim;
            sim.width = base.width;
            sim.height = base.height;
            sim.workers = threads;
            sim.frustum_cull = frustum_cull;
            sim.toggles.portal_box = !no_portal_box;
            sim.toggles.stencil = uses_stencil(*mode);
            sim.toggles.instanced = is_instanced(*mode);
            sim.toggles.hidden_area = hidden_area;
            stream::ServerConfig server_config;
            server_config.port = static_cast<std::uint16_t>(serve_port);
            if (!web_root.empty()) server_config.web_root = web_root;
            stream::StreamServer server(stream::Simulation(bench::load_bench_scene(configs.front()), sim), server_config);
            server.start();
            std::cout << "serving on http://127.0.0.1:" << server.port() << "/ (websocket on the same port)" << std::endl;
            server.wait();
            return 0;
#else
            throw bench::BenchError("built without the stream server");
#endif
        }

        std::vector<bench::BenchSeries> series;
        std::vector<bench::BenchSummary> summaries;
        for (const auto& c : configs) {
            const Scene scene = bench::load_bench_scene(c);
            if (!plan_dump.empty() && series.empty()) {
                StereoRig rig = scene.rig;
                rig.projection.aspect = static_cast<double>(c.width) / c.height;
                const std::string text = dump_plan(plan_passes(scene, rig, c.mode, c.options));
                if (plan_dump == "-") {
                    std::cout << text;
                } else {
                    std::FILE* f = std::fopen(plan_dump.c_str(), "wb");
                    if (f == nullptr) throw bench::BenchError("cannot write " + plan_dump);
                    std::fwrite(text.data(), 1, text.size(), f);
                    std::fclose(f);
                }
            }
            series.push_back(bench::run_bench(c, scene));
            summaries.push_back(bench::summarize(series.back()));
            if (!dump_dir.empty()) {
                std::filesystem::path dir = dump_dir;
                if (configs.size() > 1) dir /= "portals_" + std::to_string(series.back().portals);
                bench::emit_frames(series.back(), dir, every);
            }
        }
        if (!csv_path.empty()) bench::emit_csv(series, summaries, csv_path);
        std::cout << bench::format_summary_matrix(summaries);
    } catch (const std::exception& e) {
        std::cerr << "portalbench: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
