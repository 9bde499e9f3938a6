#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vut/tensor.hpp"
#include "vut/view.hpp"

namespace vut {

// Deterministic rasterization: every widget type has a fixed fill color and
// glyph pattern; clickable leaves get a one-pixel dark border.
Raster render_screen(const ViewNode& root, int h, int w);

// Box outline overlay (for ground-truth / prediction visualization).
void draw_box_outline(Raster& r, const Box& box, uint8_t red, uint8_t green, uint8_t blue,
                      int thickness = 2);

void write_ppm(const std::string& path, const Raster& r);
Raster read_ppm(const std::string& path);
void write_png(const std::string& path, const Raster& r);

// Scales u8 RGB to [0,1] real32, shape [H,W,3].
Tensor raster_to_tensor(const Raster& r);

}  // namespace vut
