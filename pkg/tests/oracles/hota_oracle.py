"""Brute-force higher-order tracking accuracy evaluator.

Per frame, every injective matching between ground-truth and predicted
boxes is enumerated and the one maximizing total overlap (over pairs at or
above the threshold) is taken.  The association terms are then recounted
directly from their definitions with plain loops.  Only feasible for tiny
instances; used to validate the production implementation.
"""

from __future__ import annotations

import math
from itertools import permutations


def _iou(a, b):
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def _best_frame_matching(gts, preds, alpha):
    """Exhaustively pick the matching with maximal total valid overlap."""
    best_pairs = []
    best_score = 0.0
    n_g, n_p = len(gts), len(preds)
    if n_g == 0 or n_p == 0:
        return best_pairs
    k = min(n_g, n_p)
    indices_g = range(n_g)
    for chosen_g in permutations(indices_g, k):
        for chosen_p in permutations(range(n_p), k):
            pairs = []
            score = 0.0
            for gi, pi in zip(chosen_g, chosen_p):
                o = _iou(gts[gi][1], preds[pi][1])
                if o >= alpha:
                    pairs.append((gts[gi][0], preds[pi][0], o))
                    score += o
            if score > best_score:
                best_score = score
                best_pairs = pairs
    return best_pairs


def brute_force_hota(gt_boxes, pred_boxes, alpha_values):
    """Returns dict with hota/det_a/ass_a/loc_a averaged over alpha_values."""
    if not gt_boxes and not pred_boxes:
        return {"hota": 1.0, "det_a": 1.0, "ass_a": 1.0, "loc_a": 1.0}

    frames = sorted({f for f, _, _ in gt_boxes} | {f for f, _, _ in pred_boxes})
    gt_by_frame = {f: [(tid, b) for ff, tid, b in gt_boxes if ff == f] for f in frames}
    pred_by_frame = {f: [(tid, b) for ff, tid, b in pred_boxes if ff == f] for f in frames}
    gt_count = {}
    for _, tid, _ in gt_boxes:
        gt_count[tid] = gt_count.get(tid, 0) + 1
    pred_count = {}
    for _, tid, _ in pred_boxes:
        pred_count[tid] = pred_count.get(tid, 0) + 1

    det_as, ass_as, loc_as, hotas = [], [], [], []
    for alpha in alpha_values:
        tps = []
        for f in frames:
            tps.extend(_best_frame_matching(gt_by_frame[f], pred_by_frame[f], alpha))
        tp = len(tps)
        fn = len(gt_boxes) - tp
        fp = len(pred_boxes) - tp
        det_a = tp / (tp + fn + fp) if (tp + fn + fp) else 0.0
        if tp:
            ass_total = 0.0
            for g, p, _ in tps:
                tpa = sum(1 for g2, p2, _ in tps if g2 == g and p2 == p)
                fna = gt_count[g] - tpa
                fpa = pred_count[p] - tpa
                ass_total += tpa / (tpa + fna + fpa)
            ass_a = ass_total / tp
            loc_a = sum(o for _, _, o in tps) / tp
        else:
            ass_a = 0.0
            loc_a = 1.0
        det_as.append(det_a)
        ass_as.append(ass_a)
        loc_as.append(loc_a)
        hotas.append(math.sqrt(det_a * ass_a))

    n = len(alpha_values)
    return {
        "hota": sum(hotas) / n,
        "det_a": sum(det_as) / n,
        "ass_a": sum(ass_as) / n,
        "loc_a": sum(loc_as) / n,
    }
