#include "vut/detection_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "vut/errors.hpp"

namespace vut {

namespace {

constexpr double kIouThresholds[] = {0.50, 0.55, 0.60, 0.65, 0.70,
                                     0.75, 0.80, 0.85, 0.90, 0.95};
constexpr double kSmallMax = 0.001;   // fraction of image area
constexpr double kMediumMax = 0.01;

enum class Bucket { All, Small, Medium, Large };
constexpr Bucket kBuckets[] = {Bucket::All, Bucket::Small, Bucket::Medium, Bucket::Large};

bool in_bucket(double area, Bucket b) {
  switch (b) {
    case Bucket::All: return true;
    case Bucket::Small: return area < kSmallMax;
    case Bucket::Medium: return area >= kSmallMax && area < kMediumMax;
    case Bucket::Large: return area >= kMediumMax;
  }
  return true;
}

// One class, predictions flattened in global score order.
struct ClassEval {
  std::vector<size_t> pred_image;
  std::vector<double> pred_area;
  std::vector<std::vector<double>> pred_ious;     // vs same-image GT boxes
  std::vector<std::vector<double>> gt_areas;      // [image][gt]
};

// AP for one (class, bucket, threshold); -1 when the bucket holds no GT.
double ap_pass(const ClassEval& ce, Bucket bucket, double thr) {
  size_t n_images = ce.gt_areas.size();
  std::vector<std::vector<char>> gt_ig(n_images), gt_matched(n_images);
  std::vector<std::vector<size_t>> gt_order(n_images);
  int64_t n_gt = 0;
  for (size_t im = 0; im < n_images; ++im) {
    const auto& areas = ce.gt_areas[im];
    gt_ig[im].assign(areas.size(), 0);
    gt_matched[im].assign(areas.size(), 0);
    for (size_t g = 0; g < areas.size(); ++g) {
      gt_ig[im][g] = in_bucket(areas[g], bucket) ? 0 : 1;
      if (!gt_ig[im][g]) ++n_gt;
    }
    auto& ord = gt_order[im];
    ord.resize(areas.size());
    std::iota(ord.begin(), ord.end(), size_t(0));
    std::stable_sort(ord.begin(), ord.end(),
                     [&](size_t a, size_t b) { return gt_ig[im][a] < gt_ig[im][b]; });
  }
  if (n_gt == 0) return -1.0;

  // Greedy matching in score order; predictions matched to out-of-bucket GT
  // (or unmatched and themselves out of bucket) are ignored.
  std::vector<char> tp;
  for (size_t p = 0; p < ce.pred_image.size(); ++p) {
    size_t im = ce.pred_image[p];
    double best = thr;
    int m = -1;
    for (size_t g : gt_order[im]) {
      if (gt_matched[im][g]) continue;
      if (m > -1 && !gt_ig[im][size_t(m)] && gt_ig[im][g]) break;
      double v = ce.pred_ious[p][g];
      if (v < best) continue;
      best = v;
      m = int(g);
    }
    if (m >= 0) {
      gt_matched[im][size_t(m)] = 1;
      if (!gt_ig[im][size_t(m)]) tp.push_back(1);
    } else if (bucket == Bucket::All || in_bucket(ce.pred_area[p], bucket)) {
      tp.push_back(0);
    }
  }

  // 101-point interpolated AP.
  std::vector<double> rc(tp.size()), pr(tp.size());
  double cum_tp = 0;
  for (size_t i = 0; i < tp.size(); ++i) {
    cum_tp += tp[i];
    rc[i] = cum_tp / double(n_gt);
    pr[i] = cum_tp / double(i + 1);
  }
  for (size_t i = pr.size(); i-- > 1;) pr[i - 1] = std::max(pr[i - 1], pr[i]);
  double ap = 0.0;
  size_t ri = 0;
  for (int r = 0; r <= 100; ++r) {
    double rt = double(r) / 100.0;
    while (ri < rc.size() && rc[ri] < rt) ++ri;
    if (ri < rc.size()) ap += pr[ri];
  }
  return ap / 101.0;
}

}  // namespace

DetectionSummary ap_metrics(const std::vector<std::vector<ScoredBox>>& preds,
                            const std::vector<std::vector<LabeledBox>>& gts) {
  if (preds.size() != gts.size())
    throw UsageError("prediction and ground-truth lists must be per-image parallel");

  std::set<int> classes;
  for (const auto& image : gts)
    for (const auto& g : image) classes.insert(g.class_id);

  // ap[bucket][threshold] accumulated over classes with GT in that bucket.
  constexpr size_t kNb = std::size(kBuckets), kNt = std::size(kIouThresholds);
  double sum[kNb][kNt] = {};
  int64_t cnt[kNb][kNt] = {};

  for (int cls : classes) {
    ClassEval ce;
    ce.gt_areas.resize(gts.size());
    std::vector<std::vector<const Box*>> gt_boxes(gts.size());
    for (size_t im = 0; im < gts.size(); ++im)
      for (const auto& g : gts[im])
        if (g.class_id == cls) {
          ce.gt_areas[im].push_back(g.box.area());
          gt_boxes[im].push_back(&g.box);
        }

    struct Rec {
      double score;
      size_t image, idx;
      const ScoredBox* p;
    };
    std::vector<Rec> recs;
    for (size_t im = 0; im < preds.size(); ++im)
      for (size_t i = 0; i < preds[im].size(); ++i)
        if (preds[im][i].class_id == cls) recs.push_back({preds[im][i].score, im, i, &preds[im][i]});
    std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.image != b.image) return a.image < b.image;
      return a.idx < b.idx;
    });
    for (const auto& r : recs) {
      ce.pred_image.push_back(r.image);
      ce.pred_area.push_back(r.p->box.area());
      std::vector<double> ious;
      for (const Box* g : gt_boxes[r.image]) ious.push_back(iou(r.p->box, *g));
      ce.pred_ious.push_back(std::move(ious));
    }

    for (size_t b = 0; b < kNb; ++b)
      for (size_t t = 0; t < kNt; ++t) {
        double ap = ap_pass(ce, kBuckets[b], kIouThresholds[t]);
        if (ap >= 0.0) {
          sum[b][t] += ap;
          ++cnt[b][t];
        }
      }
  }

  auto mean_over = [&](size_t bucket, int threshold /* -1 = all */) {
    double s = 0.0;
    int64_t c = 0;
    for (size_t t = 0; t < kNt; ++t) {
      if (threshold >= 0 && int(t) != threshold) continue;
      s += sum[bucket][t];
      c += cnt[bucket][t];
    }
    return c > 0 ? 100.0 * s / double(c) : 0.0;
  };

  DetectionSummary out;
  out.ap = mean_over(0, -1);
  out.ap50 = mean_over(0, 0);
  out.ap75 = mean_over(0, 5);
  out.ap_small = mean_over(1, -1);
  out.ap_medium = mean_over(2, -1);
  out.ap_large = mean_over(3, -1);
  return out;
}

}  // namespace vut
