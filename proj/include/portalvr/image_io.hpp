#pragma once

#include "portalvr/raster.hpp"

#include <filesystem>
#include <string>

namespace portalvr::raster {

enum class Channel { color, depth, stencil, space_id };

/// Binary PPM (color) or PGM (depth, stencil, space id) of one viewport.
/// Depth is normalized to the viewport's nearest/farthest finite values
/// (near = white, empty = black); space ids are spread over the gray range.
std::string encode_image(const FrameTarget& target, const Viewport& viewport, Channel channel = Channel::color);

/// Writes encode_image() to `path`; throws std::runtime_error when unwritable.
void write_image(const std::filesystem::path& path, const FrameTarget& target, const Viewport& viewport,
                 Channel channel = Channel::color);

}  // namespace portalvr::raster
