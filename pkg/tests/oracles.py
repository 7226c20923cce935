"""Independent brute-force references used by the tests.

These are written without the package's numeric helpers so they can catch
errors in them.
"""

from __future__ import annotations

import itertools
from typing import Optional

TIE_TOL = 1e-9


def box_iou(a, b) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union if union > 0 else 0.0


def brute_assignment(cost, allowed=None):
    """Maximum-cardinality, then minimum-cost matching, then lexicographically smallest pairs.

    Enumerates every permutation of the padded square problem; a permutation
    contributes only its allowed real pairs.
    """
    n = len(cost)
    m = len(cost[0]) if n else 0
    if n == 0 or m == 0:
        return [], 0.0
    size = max(n, m)
    best: Optional[tuple] = None
    for perm in itertools.permutations(range(size)):
        pairs = []
        total = 0.0
        for r in range(n):
            c = perm[r]
            if c < m and (allowed is None or allowed[r][c]):
                pairs.append((r, c))
                total += cost[r][c]
        key = (len(pairs), total, pairs)
        if best is None:
            best = key
            continue
        if key[0] > best[0]:
            best = key
        elif key[0] == best[0]:
            if key[1] < best[1] - TIE_TOL * max(1.0, abs(best[1])):
                best = key
            elif abs(key[1] - best[1]) <= TIE_TOL * max(1.0, abs(best[1])) and key[2] < best[2]:
                best = key
    return best[2], best[1]


def _ids_boxes(frames, f):
    items = sorted(frames.get(f, ()), key=lambda p: p[0])
    return [i for i, _ in items], [b.as_tuple() for _, b in items]


def reference_mota(gt, hyp, thr=0.5):
    """CLEAR-MOT counts by exhaustive per-frame matching."""
    frames = set(gt) | set(hyp)
    fp = fn = sw = total = 0
    prev: dict = {}
    last: dict = {}
    for f in range(min(frames), max(frames) + 1) if frames else ():
        g_ids, g_boxes = _ids_boxes(gt, f)
        h_ids, h_boxes = _ids_boxes(hyp, f)
        total += len(g_ids)
        matched = {}
        for gi, g in enumerate(g_ids):
            h = prev.get(g)
            if h in h_ids:
                hj = h_ids.index(h)
                if hj not in matched.values() and box_iou(g_boxes[gi], h_boxes[hj]) >= thr:
                    matched[gi] = hj
        g_rest = [i for i in range(len(g_ids)) if i not in matched]
        h_rest = [j for j in range(len(h_ids)) if j not in matched.values()]
        if g_rest and h_rest:
            ious = [[box_iou(g_boxes[i], h_boxes[j]) for j in h_rest] for i in g_rest]
            cost = [[1.0 - v for v in row] for row in ious]
            ok = [[v >= thr for v in row] for row in ious]
            pairs, _ = brute_assignment(cost, ok)
            for a, b in pairs:
                gi, hj = g_rest[a], h_rest[b]
                if g_ids[gi] in last and last[g_ids[gi]] != h_ids[hj]:
                    sw += 1
                matched[gi] = hj
        fn += len(g_ids) - len(matched)
        fp += len(h_ids) - len(matched)
        prev = {g_ids[gi]: h_ids[hj] for gi, hj in matched.items()}
        last.update(prev)
    mota = 1.0 - (fn + fp + sw) / total if total else float("nan")
    return mota, fp, fn, sw


def reference_idf1(gt, hyp, thr=0.5):
    """IDF1 by enumerating every injective gt-to-hypothesis identity map."""
    g_ids = sorted({i for v in gt.values() for i, _ in v})
    h_ids = sorted({i for v in hyp.values() for i, _ in v})
    n_gt = sum(len(v) for v in gt.values())
    n_hyp = sum(len(v) for v in hyp.values())
    best = 0
    for k in range(0, min(len(g_ids), len(h_ids)) + 1):
        for gs in itertools.combinations(g_ids, k):
            for hs in itertools.permutations(h_ids, k):
                mapping = dict(zip(gs, hs))
                tp = 0
                for f in set(gt) & set(hyp):
                    hmap = {i: b for i, b in hyp[f]}
                    for g, gb in gt[f]:
                        h = mapping.get(g)
                        if h in hmap and box_iou(gb.as_tuple(), hmap[h].as_tuple()) >= thr:
                            tp += 1
                best = max(best, tp)
    idfp, idfn = n_hyp - best, n_gt - best
    denom = 2 * best + idfp + idfn
    return (2 * best / denom if denom else float("nan")), best, idfp, idfn
