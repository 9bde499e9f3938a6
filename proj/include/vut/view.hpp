#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace vut {

// Normalized box, [top, left, right, bottom] in [0,1].
struct Box {
  double top = 0, left = 0, right = 0, bottom = 0;

  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
  double center_x() const { return 0.5 * (left + right); }
  double center_y() const { return 0.5 * (top + bottom); }
  bool contains(const Box& b) const {
    return top <= b.top && left <= b.left && right >= b.right && bottom >= b.bottom;
  }
  std::array<double, 4> coords() const { return {top, left, right, bottom}; }
};

double iou(const Box& a, const Box& b);
double giou(const Box& a, const Box& b);

struct Raster {
  int h = 0, w = 0;
  std::vector<uint8_t> rgb;  // row-major H*W*3

  uint8_t* px(int y, int x) { return rgb.data() + (size_t(y) * w + x) * 3; }
  const uint8_t* px(int y, int x) const { return rgb.data() + (size_t(y) * w + x) * 3; }
};

// Widget type inventory: 3 containers followed by 10 leaf types.
inline constexpr int kNumContainerTypes = 3;
inline constexpr int kNumTypes = 13;
const std::string& type_name(int type_id);
int type_id_by_name(const std::string& name);
bool is_container_type(int type_id);

struct ViewNode {
  int type_id = 0;
  Box bbox;
  bool clickable = false;
  std::vector<std::string> text;  // content words, possibly empty
  std::vector<ViewNode> children;
  // DOM positions, assigned by flatten_hierarchy.
  int pre_idx = -1;
  int post_idx = -1;
  int depth = -1;

  bool is_leaf() const { return children.empty(); }
};

// Validates the tree, assigns pre/post/depth indices in place, and returns
// pointers to every node in pre-order. Counts above max_nodes are an error.
std::vector<ViewNode*> flatten_hierarchy(ViewNode& root, int max_nodes);

struct Command {
  std::string phrase;
  int target_idx = -1;  // index into the flattened node list
};

struct Screen {
  std::string screen_id;
  std::string split;  // train / val / test
  Raster raster;
  ViewNode root;
  std::vector<ViewNode*> flattened;  // rebuilt by refresh_flattened()
  std::map<int, std::vector<std::string>> captions;  // leaf flattened idx -> references
  std::vector<std::string> summaries;
  std::vector<Command> commands;
  std::vector<bool> tappable;  // per flattened node

  void refresh_flattened(int max_nodes);
};

}  // namespace vut
