#!/usr/bin/env python3
"""Reference COCO-protocol AP evaluator, used to freeze detection test values.

Implements the standard COCO evaluation exactly as published (score-ranked
greedy matching per image and class with >= tie handling toward the later
ground truth, area-ignore semantics, 101-point interpolated precision with a
monotone envelope), with the repository's fractional area buckets:
small < 0.1% of image area, medium < 1%, large otherwise.

Prints frozen DetectionSummary values for the scenes embedded in the unit
tests. Boxes are [top, left, right, bottom] in [0, 1].
"""

import math

IOU_THRESHOLDS = [0.50 + 0.05 * i for i in range(10)]
SMALL_MAX = 0.001
MEDIUM_MAX = 0.01


def iou(a, b):
    top = max(a[0], b[0])
    left = max(a[1], b[1])
    right = min(a[2], b[2])
    bottom = min(a[3], b[3])
    iw = max(0.0, right - left)
    ih = max(0.0, bottom - top)
    inter = iw * ih
    area = lambda r: max(0.0, r[2] - r[1]) * max(0.0, r[3] - r[0])
    union = area(a) + area(b) - inter
    return inter / union if union > 0 else 0.0


def box_area(b):
    return max(0.0, b[2] - b[1]) * max(0.0, b[3] - b[0])


def in_bucket(area, bucket):
    if bucket == "all":
        return True
    if bucket == "small":
        return area < SMALL_MAX
    if bucket == "medium":
        return SMALL_MAX <= area < MEDIUM_MAX
    return area >= MEDIUM_MAX


def ap_one_class(preds, gts, bucket, thr):
    """preds: list of (image, box, score) sorted by (-score, image, insertion);
    gts: list of (image, box). Returns AP in [0,1] or None if no gt in bucket."""
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][2], preds[i][0], i))
    by_img_gt = {}
    for gi, (img, box) in enumerate(gts):
        by_img_gt.setdefault(img, []).append((gi, box))
    # non-ignored first, stable, mirroring the protocol's ignore-sorted gts
    gt_sorted = {}
    gt_ignored = {}
    for img, lst in by_img_gt.items():
        ig = [(gi, box, not in_bucket(box_area(box), bucket)) for gi, box in lst]
        gt_sorted[img] = sorted(ig, key=lambda t: t[2])
    matched_gt = set()
    tp, fp = [], []
    n_gt = sum(1 for _, box in gts if in_bucket(box_area(box), bucket))
    if n_gt == 0:
        return None
    for i in order:
        img, box, _ = preds[i]
        best_iou = thr
        best = None
        best_ign = False
        for gi, gbox, gign in gt_sorted.get(img, []):
            if gi in matched_gt:
                continue
            if best is not None and not best_ign and gign:
                break
            v = iou(box, gbox)
            if v < best_iou:
                continue
            best_iou = v
            best = gi
            best_ign = gign
        if best is not None:
            matched_gt.add(best)
            if best_ign:
                continue  # matched an ignored gt -> prediction ignored
            tp.append(1)
            fp.append(0)
        else:
            if not in_bucket(box_area(box), bucket):
                continue  # unmatched prediction outside the bucket -> ignored
            tp.append(0)
            fp.append(1)
    # 101-point interpolation
    ctp = cfp = 0
    rc, pr = [], []
    for t, f in zip(tp, fp):
        ctp += t
        cfp += f
        rc.append(ctp / n_gt)
        pr.append(ctp / (ctp + cfp))
    for i in range(len(pr) - 1, 0, -1):
        pr[i - 1] = max(pr[i - 1], pr[i])
    total = 0.0
    for k in range(101):
        rt = k / 100.0
        idx = next((j for j, r in enumerate(rc) if r >= rt), None)
        if idx is not None:
            total += pr[idx]
    return total / 101.0


def summary(pred_scenes, gt_scenes):
    """pred_scenes[i] = [(class, box, score), ...]; gt_scenes[i] = [(class, box), ...]."""
    classes = sorted({c for s in gt_scenes for c, _ in s} | {c for s in pred_scenes for c, _, _ in s})
    out = {}
    for name, bucket, thr_sel in [
        ("ap", "all", None), ("ap50", "all", 0.50), ("ap75", "all", 0.75),
        ("ap_small", "small", None), ("ap_medium", "medium", None), ("ap_large", "large", None),
    ]:
        vals = []
        for cls in classes:
            preds = [(i, box, score) for i, s in enumerate(pred_scenes)
                     for c, box, score in s if c == cls]
            gts = [(i, box) for i, s in enumerate(gt_scenes) for c, box in s if c == cls]
            thrs = [thr_sel] if thr_sel is not None else IOU_THRESHOLDS
            per_thr = [ap_one_class(preds, gts, bucket, t) for t in thrs]
            per_thr = [v for v in per_thr if v is not None]
            if per_thr:
                vals.append(sum(per_thr) / len(per_thr))
        out[name] = 100.0 * sum(vals) / len(vals) if vals else 0.0
    return out


def show(tag, pred_scenes, gt_scenes):
    s = summary(pred_scenes, gt_scenes)
    print(tag)
    for k in ["ap", "ap50", "ap75", "ap_small", "ap_medium", "ap_large"]:
        print(f"  {k} = {s[k]!r}")


def main():
    # perfect single detection, large box
    show("case perfect",
         [[(0, (0.1, 0.1, 0.5, 0.5), 0.9)]],
         [[(0, (0.1, 0.1, 0.5, 0.5))]])

    # one gt, two predictions of the same class: the higher-scored one misses
    # (iou ~ 0.32), the lower-scored one is exact.
    show("case shadowed",
         [[(0, (0.1, 0.1, 0.5, 0.5), 0.9), (0, (0.25, 0.25, 0.65, 0.65), 0.4)]],
         [[(0, (0.25, 0.25, 0.65, 0.65))]])
    # note: first pred iou vs gt:
    a = (0.1, 0.1, 0.5, 0.5)
    b = (0.25, 0.25, 0.65, 0.65)
    print("  (iou of the miss =", repr(iou(a, b)), ")")

    # two classes, two images, mixed hits/misses, one small gt
    show("case mixed",
         [
             [(0, (0.10, 0.10, 0.30, 0.30), 0.80),   # exact hit
              (1, (0.50, 0.50, 0.52, 0.52), 0.70),   # exact hit, small area
              (0, (0.60, 0.60, 0.90, 0.90), 0.60)],  # false positive
             [(0, (0.20, 0.20, 0.45, 0.40), 0.90),   # iou 0.5-ish hit
              (1, (0.70, 0.10, 0.95, 0.40), 0.30)],  # miss
         ],
         [
             [(0, (0.10, 0.10, 0.30, 0.30)), (1, (0.50, 0.50, 0.52, 0.52))],
             [(0, (0.20, 0.20, 0.40, 0.40)), (1, (0.05, 0.05, 0.25, 0.30))],
         ])
    print("  (iou of the 0.9-scored pred =",
          repr(iou((0.20, 0.20, 0.45, 0.40), (0.20, 0.20, 0.40, 0.40))), ")")

    # duplicate detections on one gt: second best is a false positive
    show("case duplicates",
         [[(2, (0.2, 0.2, 0.6, 0.7), 0.9), (2, (0.2, 0.2, 0.6, 0.7), 0.8)]],
         [[(2, (0.2, 0.2, 0.6, 0.7))]])


if __name__ == "__main__":
    main()
