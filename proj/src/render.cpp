#include "vut/render.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "vut/errors.hpp"

namespace vut {

namespace {

struct Rgb {
  uint8_t r, g, b;
};

constexpr Rgb kBackground{240, 240, 240};
constexpr Rgb kBorder{32, 32, 32};

Rgb type_fill(int type_id) {
  switch (type_id) {
    case 0: return {248, 248, 252};   // column
    case 1: return {252, 248, 244};   // row
    case 2: return {242, 250, 244};   // list
    case 3: return {66, 133, 244};    // button
    case 4: return {52, 168, 83};     // image
    case 5: return {224, 224, 224};   // label
    case 6: return {232, 232, 232};   // slider
    case 7: return {171, 71, 188};    // toggle
    case 8: return {255, 167, 38};    // icon
    case 9: return {234, 67, 53};     // badge
    case 10: return {255, 255, 255};  // field
    case 11: return {250, 240, 230};  // card
    case 12: return {69, 90, 120};    // bar
    default: throw DataError("unknown widget type id in renderer");
  }
}

struct Rect {
  int y0, x0, y1, x1;  // half-open
  int h() const { return y1 - y0; }
  int w() const { return x1 - x0; }
};

Rect to_pixels(const Box& b, int h, int w) {
  auto clampi = [](int v, int lo, int hi) { return std::max(lo, std::min(hi, v)); };
  Rect r;
  r.y0 = clampi(int(std::lround(b.top * h)), 0, h - 1);
  r.x0 = clampi(int(std::lround(b.left * w)), 0, w - 1);
  r.y1 = clampi(int(std::lround(b.bottom * h)), r.y0 + 1, h);
  r.x1 = clampi(int(std::lround(b.right * w)), r.x0 + 1, w);
  return r;
}

void fill(Raster& img, const Rect& r, Rgb c) {
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) {
      uint8_t* p = img.px(y, x);
      p[0] = c.r;
      p[1] = c.g;
      p[2] = c.b;
    }
}

void hline(Raster& img, int y, int x0, int x1, Rgb c) {
  if (y < 0 || y >= img.h) return;
  for (int x = std::max(0, x0); x < std::min(img.w, x1); ++x) {
    uint8_t* p = img.px(y, x);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
}

void vline(Raster& img, int x, int y0, int y1, Rgb c) {
  if (x < 0 || x >= img.w) return;
  for (int y = std::max(0, y0); y < std::min(img.h, y1); ++y) {
    uint8_t* p = img.px(y, x);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }
}

void disc(Raster& img, int cy, int cx, int radius, Rgb c) {
  for (int y = cy - radius; y <= cy + radius; ++y)
    for (int x = cx - radius; x <= cx + radius; ++x) {
      if (y < 0 || y >= img.h || x < 0 || x >= img.w) continue;
      int dy = y - cy, dx = x - cx;
      if (dy * dy + dx * dx <= radius * radius) {
        uint8_t* p = img.px(y, x);
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
      }
    }
}

void glyph(Raster& img, const Rect& r, int type_id) {
  const Rgb dark{60, 60, 64};
  const Rgb light{250, 250, 250};
  int cy = (r.y0 + r.y1) / 2, cx = (r.x0 + r.x1) / 2;
  int inset_x = std::max(1, r.w() / 5), inset_y = std::max(1, r.h() / 5);
  switch (type_id) {
    case 3:  // button: light text bar
      hline(img, cy, r.x0 + inset_x, r.x1 - inset_x, light);
      hline(img, cy - 1, r.x0 + inset_x, r.x1 - inset_x, light);
      break;
    case 4:  // image: diagonal cross
      for (int i = 0; i < std::min(r.h(), r.w()); ++i) {
        int y = r.y0 + i;
        vline(img, r.x0 + i * r.w() / std::max(1, r.h()), y, y + 1, dark);
        vline(img, r.x1 - 1 - i * r.w() / std::max(1, r.h()), y, y + 1, dark);
      }
      break;
    case 5:  // label: two text lines
      hline(img, r.y0 + r.h() / 3, r.x0 + inset_x, r.x1 - inset_x, dark);
      hline(img, r.y0 + 2 * r.h() / 3, r.x0 + inset_x, r.x1 - 2 * inset_x, dark);
      break;
    case 6:  // slider: track + knob
      hline(img, cy, r.x0 + inset_x, r.x1 - inset_x, dark);
      disc(img, cy, r.x0 + r.w() / 3, std::max(1, std::min(r.h() / 4, 4)), dark);
      break;
    case 7:  // toggle: dark left half
      fill(img, {r.y0 + inset_y, r.x0 + inset_x, r.y1 - inset_y, cx}, dark);
      break;
    case 8:  // icon: centered disc
      disc(img, cy, cx, std::max(1, std::min(r.h(), r.w()) / 4), dark);
      break;
    case 9:  // badge: small light dot
      disc(img, cy, cx, std::max(1, std::min(r.h(), r.w()) / 6), light);
      break;
    case 10:  // field: underline + caret
      hline(img, r.y1 - 1 - inset_y / 2, r.x0 + 1, r.x1 - 1, dark);
      vline(img, r.x0 + inset_x, r.y0 + inset_y, r.y1 - inset_y, dark);
      break;
    case 11:  // card: top band
      fill(img, {r.y0, r.x0, std::min(r.y1, r.y0 + std::max(1, r.h() / 5)), r.x1}, {210, 190, 170});
      break;
    case 12:  // bar: center stripe
      hline(img, cy, r.x0 + 1, r.x1 - 1, light);
      break;
    default: break;  // containers: fill only
  }
}

void draw_node(Raster& img, const ViewNode& n) {
  Rect r = to_pixels(n.bbox, img.h, img.w);
  fill(img, r, type_fill(n.type_id));
  glyph(img, r, n.type_id);
  if (n.clickable) {
    hline(img, r.y0, r.x0, r.x1, kBorder);
    hline(img, r.y1 - 1, r.x0, r.x1, kBorder);
    vline(img, r.x0, r.y0, r.y1, kBorder);
    vline(img, r.x1 - 1, r.y0, r.y1, kBorder);
  }
  for (const auto& c : n.children) draw_node(img, c);
}

void put_u32_be(std::string& s, uint32_t v) {
  s.push_back(char((v >> 24) & 0xff));
  s.push_back(char((v >> 16) & 0xff));
  s.push_back(char((v >> 8) & 0xff));
  s.push_back(char(v & 0xff));
}

void write_png_chunk(std::ofstream& os, const char* tag, const std::string& payload) {
  std::string out;
  put_u32_be(out, uint32_t(payload.size()));
  out.append(tag, 4);
  out += payload;
  uint32_t crc = uint32_t(
      crc32(crc32(0L, reinterpret_cast<const Bytef*>(tag), 4),
            reinterpret_cast<const Bytef*>(payload.data()), uInt(payload.size())));
  put_u32_be(out, crc);
  os.write(out.data(), std::streamsize(out.size()));
}

}  // namespace

Raster render_screen(const ViewNode& root, int h, int w) {
  if (h < 8 || w < 8) throw DataError("raster size too small to render");
  Raster img;
  img.h = h;
  img.w = w;
  img.rgb.assign(size_t(h) * w * 3, 0);
  fill(img, {0, 0, h, w}, kBackground);
  draw_node(img, root);
  return img;
}

void draw_box_outline(Raster& r, const Box& box, uint8_t red, uint8_t green, uint8_t blue,
                      int thickness) {
  Rect rc = to_pixels(box, r.h, r.w);
  Rgb c{red, green, blue};
  for (int t = 0; t < thickness; ++t) {
    hline(r, rc.y0 + t, rc.x0, rc.x1, c);
    hline(r, rc.y1 - 1 - t, rc.x0, rc.x1, c);
    vline(r, rc.x0 + t, rc.y0, rc.y1, c);
    vline(r, rc.x1 - 1 - t, rc.y0, rc.y1, c);
  }
}

void write_ppm(const std::string& path, const Raster& r) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write raster: " + path);
  os << "P6\n" << r.w << ' ' << r.h << "\n255\n";
  os.write(reinterpret_cast<const char*>(r.rgb.data()), std::streamsize(r.rgb.size()));
  if (!os) throw DataError("short write for raster: " + path);
}

Raster read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open raster: " + path);
  std::string magic;
  is >> magic;
  if (magic != "P6") throw DataError("not a P6 raster: " + path);
  int w = 0, h = 0, maxval = 0;
  is >> w >> h >> maxval;
  if (!is || w <= 0 || h <= 0 || maxval != 255) throw DataError("bad raster header: " + path);
  is.get();  // single whitespace after header
  Raster r;
  r.h = h;
  r.w = w;
  r.rgb.resize(size_t(h) * w * 3);
  if (!is.read(reinterpret_cast<char*>(r.rgb.data()), std::streamsize(r.rgb.size())))
    throw DataError("truncated raster: " + path);
  return r;
}

void write_png(const std::string& path, const Raster& r) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write image: " + path);
  static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  os.write(reinterpret_cast<const char*>(sig), 8);

  std::string ihdr;
  put_u32_be(ihdr, uint32_t(r.w));
  put_u32_be(ihdr, uint32_t(r.h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // interlace
  write_png_chunk(os, "IHDR", ihdr);

  std::string raw;
  raw.reserve(size_t(r.h) * (size_t(r.w) * 3 + 1));
  for (int y = 0; y < r.h; ++y) {
    raw.push_back(0);  // filter type none
    raw.append(reinterpret_cast<const char*>(r.px(y, 0)), size_t(r.w) * 3);
  }
  uLongf bound = compressBound(uLong(raw.size()));
  std::string compressed(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &bound,
                reinterpret_cast<const Bytef*>(raw.data()), uLong(raw.size()), 6) != Z_OK)
    throw DataError("deflate failed while writing " + path);
  compressed.resize(bound);
  write_png_chunk(os, "IDAT", compressed);
  write_png_chunk(os, "IEND", "");
  if (!os) throw DataError("short write for image: " + path);
}

Tensor raster_to_tensor(const Raster& r) {
  Tensor t = Tensor::zeros({r.h, r.w, 3}, DType::F32);
  auto d = t.mutable_data<float>();
  for (size_t i = 0; i < r.rgb.size(); ++i) d[i] = float(r.rgb[i]) / 255.0f;
  return t;
}

}  // namespace vut
