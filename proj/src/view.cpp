#include "vut/view.hpp"

#include <algorithm>

#include "vut/errors.hpp"

namespace vut {

double iou(const Box& a, const Box& b) {
  double it = std::max(a.top, b.top), il = std::max(a.left, b.left);
  double ib = std::min(a.bottom, b.bottom), ir = std::min(a.right, b.right);
  double inter = std::max(0.0, ib - it) * std::max(0.0, ir - il);
  double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double giou(const Box& a, const Box& b) {
  double it = std::max(a.top, b.top), il = std::max(a.left, b.left);
  double ib = std::min(a.bottom, b.bottom), ir = std::min(a.right, b.right);
  double inter = std::max(0.0, ib - it) * std::max(0.0, ir - il);
  double uni = a.area() + b.area() - inter;
  double et = std::min(a.top, b.top), el = std::min(a.left, b.left);
  double eb = std::max(a.bottom, b.bottom), er = std::max(a.right, b.right);
  double enclose = (eb - et) * (er - el);
  double iou_v = uni > 0 ? inter / uni : 0.0;
  return enclose > 0 ? iou_v - (enclose - uni) / enclose : iou_v;
}

namespace {
const char* kTypeNames[kNumTypes] = {"column", "row",  "list",   "button", "image",
                                     "label",  "slider", "toggle", "icon",   "badge",
                                     "field",  "card",   "bar"};
}

const std::string& type_name(int type_id) {
  static const std::vector<std::string> names(kTypeNames, kTypeNames + kNumTypes);
  if (type_id < 0 || type_id >= kNumTypes) throw DataError("unknown widget type id");
  return names[size_t(type_id)];
}

int type_id_by_name(const std::string& name) {
  for (int i = 0; i < kNumTypes; ++i)
    if (name == kTypeNames[i]) return i;
  throw DataError("unknown widget type name: " + name);
}

bool is_container_type(int type_id) { return type_id >= 0 && type_id < kNumContainerTypes; }

namespace {

void validate(const ViewNode& n) {
  if (n.type_id < 0 || n.type_id >= kNumTypes) throw DataError("view node with unknown type id");
  if (!(n.bbox.top < n.bbox.bottom) || !(n.bbox.left < n.bbox.right))
    throw DataError("view node with degenerate box");
  for (const auto& c : n.children) {
    if (!n.bbox.contains(c.bbox)) throw DataError("child box escapes parent box");
    validate(c);
  }
}

void walk(ViewNode& n, int depth, int& pre, int& post, std::vector<ViewNode*>& out) {
  n.depth = depth;
  n.pre_idx = pre++;
  out.push_back(&n);
  for (auto& c : n.children) walk(c, depth + 1, pre, post, out);
  n.post_idx = post++;
}

}  // namespace

std::vector<ViewNode*> flatten_hierarchy(ViewNode& root, int max_nodes) {
  validate(root);
  std::vector<ViewNode*> out;
  int pre = 0, post = 0;
  walk(root, 0, pre, post, out);
  if (int(out.size()) > max_nodes)
    throw DataError("hierarchy exceeds node budget: " + std::to_string(out.size()) + " > " +
                    std::to_string(max_nodes));
  return out;
}

void Screen::refresh_flattened(int max_nodes) { flattened = flatten_hierarchy(root, max_nodes); }

}  // namespace vut
