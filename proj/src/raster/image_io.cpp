#include "portalvr/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace portalvr::raster {

std::string encode_image(const FrameTarget& target, const Viewport& vp, Channel channel) {
    if (vp.x < 0 || vp.y < 0 || vp.width <= 0 || vp.height <= 0 || vp.x + vp.width > target.width() ||
        vp.y + vp.height > target.height()) {
        throw std::invalid_argument("viewport lies outside the frame target");
    }
    const bool rgb = channel == Channel::color;
    std::string out = (rgb ? "P6\n" : "P5\n") + std::to_string(vp.width) + " " + std::to_string(vp.height) + "\n255\n";
    const std::size_t header = out.size();
    out.resize(header + static_cast<std::size_t>(vp.width) * static_cast<std::size_t>(vp.height) * (rgb ? 3u : 1u));
    auto* dst = reinterpret_cast<unsigned char*>(out.data() + header);
    const auto stride = static_cast<std::size_t>(target.width());

    float lo = FrameTarget::kFarDepth, hi = 0.0f;
    if (channel == Channel::depth) {
        for (int y = vp.y; y < vp.y + vp.height; ++y) {
            for (int x = vp.x; x < vp.x + vp.width; ++x) {
                const float d = target.depth()[static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x)];
                if (std::isfinite(d)) {
                    lo = std::min(lo, d);
                    hi = std::max(hi, d);
                }
            }
        }
    }

    for (int y = vp.y; y < vp.y + vp.height; ++y) {
        for (int x = vp.x; x < vp.x + vp.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * stride + static_cast<std::size_t>(x);
            switch (channel) {
                case Channel::color: {
                    const Rgba8 c = target.color()[i];
                    *dst++ = c.r;
                    *dst++ = c.g;
                    *dst++ = c.b;
                    break;
                }
                case Channel::depth: {
                    const float d = target.depth()[i];
                    if (!std::isfinite(d)) {
                        *dst++ = 0;
                    } else {
                        const float span = hi > lo ? hi - lo : 1.0f;
                        *dst++ = static_cast<unsigned char>(std::lround(255.0f - 223.0f * (d - lo) / span));
                    }
                    break;
                }
                case Channel::stencil: *dst++ = target.stencil()[i]; break;
                case Channel::space_id: {
                    const std::uint32_t id = target.space_ids()[i];
                    *dst++ = id == 0 ? 0 : static_cast<unsigned char>(40 + (id * 53u) % 216u);
                    break;
                }
            }
        }
    }
    return out;
}

void write_image(const std::filesystem::path& path, const FrameTarget& target, const Viewport& viewport, Channel channel) {
    const std::string bytes = encode_image(target, viewport, channel);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace portalvr::raster
