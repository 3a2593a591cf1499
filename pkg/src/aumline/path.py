"""Exact AUM/AUC line search along a descent direction.

Every breakpoint becomes a threshold line ``T_b(s) = intercept + slope * s``
in the space of constants added to predictions. Sorting the lines gives
the error rates on each interval between consecutive thresholds; as the
step size ``s`` grows, adjacent lines cross and the sorted order changes
one swap at a time. Sweeping those crossings in order of step size yields
AUM(s) as a piecewise linear function and AUC(s) as a piecewise constant
function, each crossing being handled in O(log B) time.

Positions in the sorted order are 0-based. Interval ``j`` lies between
the lines at positions ``j - 1`` and ``j``; interval 0 is below every
threshold and interval ``B`` above every threshold, where min(FPR, FNR)
is always zero.
"""
from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .error_model import ErrorModel

STEP_TOL = 1e-12
THRESHOLD_TOL = 1e-12
TIE_TOL = 1e-12
RATE_SLACK = 1e-9
CHOICE_TOL = 1e-12

VARIANTS = ("first_min", "linear", "quadratic", "max_auc")
OBJECTIVES = ("min_aum", "max_auc")


class DegenerateInstanceError(ValueError):
    pass


class PathConsistencyError(RuntimeError):
    """An internal invariant of the sweep failed (corrupt queue or rates)."""


class OutsideExploredRange(ValueError):
    pass


class ThresholdLine(NamedTuple):
    intercept: float
    slope: float
    breakpoint: int

    def at(self, s: float) -> float:
        return self.intercept + self.slope * s


@dataclass(frozen=True)
class ThresholdLines:
    """Threshold lines of all breakpoints, stored as arrays."""

    intercept: np.ndarray
    slope: np.ndarray

    def __len__(self):
        return len(self.intercept)

    def __getitem__(self, b) -> ThresholdLine:
        return ThresholdLine(float(self.intercept[b]), float(self.slope[b]), int(b))

    def __iter__(self) -> Iterator[ThresholdLine]:
        return (self[b] for b in range(len(self)))

    def at(self, s: float) -> np.ndarray:
        return self.intercept + self.slope * s


class IntersectionEvent(NamedTuple):
    step: float
    threshold: float
    members: tuple  # contiguous sorted positions


class Segment(NamedTuple):
    step_lo: float
    step_hi: float
    aum_at_lo: float
    aum_slope: float
    auc_at_lo_event: float
    auc_on_interval: float


def build_lines(w, d, X, model: ErrorModel) -> ThresholdLines:
    """Lines ``T_b(s) = v_b - (w + s d)' x_i`` for every breakpoint ``b``."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if X.ndim != 2:
        raise ValueError("X must be a 2-d array")
    if X.shape[0] != model.n_examples:
        raise ValueError(
            f"X has {X.shape[0]} rows but the error model has "
            f"{model.n_examples} examples")
    if w.shape != (X.shape[1],) or d.shape != (X.shape[1],):
        raise ValueError(
            f"weights and direction must have length {X.shape[1]}")
    for name, arr in (("X", X), ("w", w), ("d", d)):
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} has non-finite entries")
    return lines_from_predictions(X @ w, X @ d, model)


def lines_from_predictions(pred, pred_direction, model: ErrorModel) -> ThresholdLines:
    """Lines for predictions moving as ``pred + s * pred_direction``."""
    pred = np.asarray(pred, dtype=float)
    move = np.asarray(pred_direction, dtype=float)
    intercept = model.value - pred[model.example]
    slope = -move[model.example]
    # -0.0 and 0.0 must compare equal in sort keys
    return ThresholdLines(intercept + 0.0, slope + 0.0)


def _segment_area(fp, fn, lo, hi):
    """Trapezoid under the ROC chord from point ``lo`` to point ``hi``."""
    return (fp[hi] - fp[lo]) * (2.0 - fn[hi] - fn[lo]) / 2.0


class PathState:
    """Mutable state of one sweep; see :func:`init`."""

    def __init__(self, lines: ThresholdLines, model: ErrorModel):
        B = len(lines)
        if B < 2:
            raise DegenerateInstanceError(
                f"need at least 2 breakpoints, got {B}")
        if B != model.n_breakpoints:
            raise ValueError("lines and error model differ in length")
        # intercepts equal up to rounding count as tied and are ordered by
        # slope, so the order is valid just after s = 0
        first = np.lexsort((np.arange(B), lines.slope, lines.intercept))
        eps0 = lines.intercept[first]
        tied = np.diff(eps0) <= TIE_TOL * np.maximum(1.0, np.abs(eps0[1:]))
        cluster = np.empty(B, dtype=np.intp)
        cluster[first] = np.cumsum(np.r_[0, ~tied])

        # identical lines stay tied for every step: merge each set into one
        # line carrying the summed deltas, so they form a single ROC point
        keys = np.lexsort((np.arange(B), lines.slope, cluster))
        new_line = np.r_[True, (np.diff(cluster[keys]) != 0)
                         | (np.diff(lines.slope[keys]) != 0)]
        starts = np.flatnonzero(new_line)
        rep = keys[starts]
        intercept = lines.intercept[rep]
        slope = lines.slope[rep]
        dfp = np.add.reduceat(model.delta_fp[keys], starts)
        dfn = np.add.reduceat(model.delta_fn[keys], starts)
        cluster = cluster[rep]
        B = len(rep)
        #: breakpoint indices merged into each line
        self.members = np.split(keys, starts[1:])
        self.B = B
        self.intercept = intercept.tolist()
        self.slopes = slope.tolist()
        self.dfp = dfp.tolist()
        self.dfn = dfn.tolist()
        order = np.arange(B)  # rep is already sorted by (cluster, slope, index)
        self.perm = order.tolist()
        self.pos = order.tolist()

        fp = np.empty(B + 1)
        fn = np.empty(B + 1)
        fp[0] = 0.0
        fp[1:] = np.cumsum(dfp[order])
        fn[0] = model.fn_start
        fn[1:] = model.fn_start + np.cumsum(dfn[order])
        m = np.minimum(fp, fn)
        m[0] = m[B] = 0.0
        self.fp, self.fn, self.min = fp.tolist(), fn.tolist(), m.tolist()

        eps = intercept[order]
        dlt = slope[order]
        self.aum = float(np.sum(np.diff(eps) * m[1:B]))
        self.slope = float(np.sum(np.diff(dlt) * m[1:B]))
        self.auc_after = float(np.sum(np.diff(fp) * (2.0 - fn[1:] - fn[:-1])) / 2)
        # at s = 0 lines with equal intercepts share one ROC point
        keep = np.r_[True, cluster[order][1:] != cluster[order][:-1], True]
        self.auc_at = float(np.sum(np.diff(fp[keep]) * (2.0 - fn[keep][1:] - fn[keep][:-1])) / 2)

        self.current_step = 0.0
        self.n_events = 0
        self.queue: list = []
        for j in range(B - 1):
            self._push_pair(self.perm[j], self.perm[j + 1])
        self._seg = [[0.0, self.aum, self.slope, self.auc_at, self.auc_after]]

    # queue ----------------------------------------------------------------
    def _push_pair(self, left, right):
        d_left, d_right = self.slopes[left], self.slopes[right]
        if d_left <= d_right:
            return
        step = (self.intercept[right] - self.intercept[left]) / (d_left - d_right)
        if not math.isfinite(step):
            return
        # a crossing computed in the past is rounding: the lines meet now
        step = max(step, self.current_step)
        thr = self.intercept[left] + d_left * step
        heapq.heappush(self.queue, (step, thr, left, right))

    def _is_live(self, entry):
        return self.pos[entry[2]] + 1 == self.pos[entry[3]]

    def peek_step(self) -> float:
        """Step of the next live event, discarding stale entries; inf if none."""
        q = self.queue
        while q and not self._is_live(q[0]):
            heapq.heappop(q)
        return q[0][0] if q else math.inf

    def pop_column(self) -> list[IntersectionEvent]:
        """Remove every live event at the smallest step, grouped by threshold."""
        first = self.peek_step()
        if first == math.inf:
            return []
        limit = first + STEP_TOL * max(1.0, first)
        q = self.queue
        entries = {}
        while q and q[0][0] <= limit:
            entry = heapq.heappop(q)
            if self._is_live(entry):
                entries[(entry[2], entry[3])] = entry
        clusters: list[list] = []
        for entry in sorted(entries.values(), key=lambda e: (e[1], self.pos[e[2]])):
            thr = entry[1]
            if clusters and abs(thr - clusters[-1][0]) <= THRESHOLD_TOL * max(1.0, abs(thr)):
                c = clusters[-1]
                c[1] = min(c[1], self.pos[entry[2]])
                c[2] = max(c[2], self.pos[entry[3]])
            else:
                clusters.append([thr, self.pos[entry[2]], self.pos[entry[3]]])
        events = []
        for thr, lo, hi in clusters:
            lo, hi = self._extend(first, thr, lo, hi)
            events.append(IntersectionEvent(first, thr, tuple(range(lo, hi + 1))))
        for a, b in zip(events, events[1:]):
            if a.members[-1] >= b.members[0]:
                raise PathConsistencyError(
                    f"overlapping intersection groups at step {first!r}")
        return events

    def _extend(self, step, thr, lo, hi):
        """Grow ``[lo, hi]`` over neighbours passing through ``(step, thr)``."""
        tol = THRESHOLD_TOL * max(1.0, abs(thr))
        perm, eps, dlt = self.perm, self.intercept, self.slopes
        while lo > 0 and abs(eps[perm[lo - 1]] + dlt[perm[lo - 1]] * step - thr) <= tol:
            lo -= 1
        while hi < self.B - 1 and abs(eps[perm[hi + 1]] + dlt[perm[hi + 1]] * step - thr) <= tol:
            hi += 1
        return lo, hi

    # bookkeeping ----------------------------------------------------------
    def _advance(self, step):
        if step < self.current_step:
            raise PathConsistencyError(
                f"event step {step!r} precedes current step {self.current_step!r}")
        if step > self.current_step:
            self.aum += self.slope * (step - self.current_step)
            self.current_step = step

    def _check_rates(self, j):
        # per-example rates are non-negative, so sums of them must be too
        fp, fn = self.fp[j], self.fn[j]
        if fp < -RATE_SLACK or fn < -RATE_SLACK:
            raise PathConsistencyError(
                f"negative error rate at interval {j}: FP={fp!r} FN={fn!r}")

    def segments(self) -> list[list]:
        return self._seg


def init(lines: ThresholdLines, model: ErrorModel) -> PathState:
    """Sort the lines at ``s = 0+`` and compute AUM, its slope and AUC.

    Ties in intercept are broken by slope (then breakpoint index), so the
    order is valid on the first open interval of step sizes. Candidate
    crossings of every adjacent pair are queued.
    """
    return PathState(lines, model)


def apply_event(state: PathState, event: IntersectionEvent) -> PathState:
    """Reorder the lines meeting at ``event`` and update rates, slope, AUC.

    A two-line crossing is a swap with O(1) updates of the single
    affected interval, the AUM slope and the three AUC values (without
    the vanishing ROC point, at the crossing, and after it). Larger groups
    are re-sorted by slope and their interior recomputed locally.
    Afterwards ``state.auc_at`` holds the AUC exactly at the event and
    ``state.auc_after`` the AUC just past it.
    """
    members = event.members
    lo, hi = members[0], members[-1]
    if len(members) < 2 or list(members) != list(range(lo, hi + 1)):
        raise PathConsistencyError(f"event members not contiguous: {members}")
    B = state.B
    if lo < 0 or hi >= B:
        raise PathConsistencyError(f"event members out of range: {members}")
    state._advance(event.step)
    perm, pos = state.perm, state.pos
    fp, fn, mins = state.fp, state.fn, state.min
    dlt = state.slopes

    if hi - lo == 1:
        u = hi
        low, up = perm[u - 1], perm[u]
        if dlt[low] <= dlt[up]:
            raise PathConsistencyError(
                f"lines at positions {lo},{hi} do not cross")
        old_area = _segment_area(fp, fn, u - 1, u) + _segment_area(fp, fn, u, u + 1)
        without = state.auc_after - old_area
        state.auc_at = without + _segment_area(fp, fn, u - 1, u + 1)
        old_min = mins[u]
        perm[u - 1], perm[u] = up, low
        pos[up], pos[low] = u - 1, u
        fp[u] += state.dfp[up] - state.dfp[low]
        fn[u] += state.dfn[up] - state.dfn[low]
        mins[u] = min(fp[u], fn[u])
        state._check_rates(u)
        state.slope += (dlt[up] - dlt[low]) * (
            mins[u + 1] + mins[u - 1] - old_min - mins[u])
        state.auc_after = without + _segment_area(fp, fn, u - 1, u) + _segment_area(fp, fn, u, u + 1)
    else:
        def slope_terms():
            return sum((dlt[perm[j]] - dlt[perm[j - 1]]) * mins[j]
                       for j in range(max(lo, 1), min(hi + 1, B - 1) + 1))

        old_area = sum(_segment_area(fp, fn, j, j + 1) for j in range(lo, hi + 1))
        without = state.auc_after - old_area
        state.auc_at = without + _segment_area(fp, fn, lo, hi + 1)
        old_terms = slope_terms()
        block = sorted(perm[lo:hi + 1], key=lambda b: (dlt[b], b))
        perm[lo:hi + 1] = block
        for k, b in enumerate(block, start=lo):
            pos[b] = k
        for j in range(lo + 1, hi + 1):
            fp[j] = fp[j - 1] + state.dfp[perm[j - 1]]
            fn[j] = fn[j - 1] + state.dfn[perm[j - 1]]
            mins[j] = min(fp[j], fn[j])
            state._check_rates(j)
        state.slope += slope_terms() - old_terms
        state.auc_after = without + sum(
            _segment_area(fp, fn, j, j + 1) for j in range(lo, hi + 1))

    if lo > 0:
        state._push_pair(perm[lo - 1], perm[lo])
    if hi < B - 1:
        state._push_pair(perm[hi], perm[hi + 1])
    state.n_events += 1
    return state


@dataclass(frozen=True)
class StepPath:
    """AUM (piecewise linear) and AUC (piecewise constant) over step size.

    Segment ``k`` covers ``[step_lo[k], step_hi[k])``. ``auc_at_lo_event``
    is the AUC exactly at ``step_lo[k]`` and ``auc_on_interval`` the AUC
    strictly inside the segment. When ``final_open`` is false the last
    ``step_hi`` is the next unexplored event and queries stop before it.
    """

    step_lo: np.ndarray
    step_hi: np.ndarray
    aum_at_lo: np.ndarray
    aum_slope: np.ndarray
    auc_at_lo_event: np.ndarray
    auc_on_interval: np.ndarray
    final_open: bool
    truncated: bool
    n_events: int

    def __len__(self):
        return len(self.step_lo)

    def __iter__(self) -> Iterator[Segment]:
        for row in zip(self.step_lo, self.step_hi, self.aum_at_lo, self.aum_slope,
                       self.auc_at_lo_event, self.auc_on_interval):
            yield Segment(*map(float, row))

    @property
    def max_step(self) -> float:
        return float(self.step_hi[-1])

    def aum_at(self, s) -> np.ndarray:
        """Vectorised AUM for an array of step sizes inside the range."""
        s = np.asarray(s, dtype=float)
        k = np.searchsorted(self.step_lo, s, side="right") - 1
        return self.aum_at_lo[k] + self.aum_slope[k] * (s - self.step_lo[k])


def _finish(state: PathState, truncated: bool) -> StepPath:
    seg = state.segments()
    next_step = state.peek_step()
    final_open = next_step == math.inf
    if final_open:
        # past every crossing the lines are sorted by slope, so each term of
        # the slope sum is non-negative; recompute rather than trust drift
        dlt = state.slopes
        perm, mins = state.perm, state.min
        slope = sum((dlt[perm[j]] - dlt[perm[j - 1]]) * mins[j] for j in range(1, state.B))
        seg[-1][2] = max(slope, 0.0)
    arr = np.array(seg, dtype=float)
    step_lo = arr[:, 0]
    step_hi = np.r_[step_lo[1:], next_step]
    return StepPath(step_lo, step_hi, arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4],
                    final_open, truncated, state.n_events)


def run(state: PathState, variant: str = "first_min", max_events: int | None = None) -> StepPath:
    """Sweep events in order of step size until ``variant``'s stop rule.

    ``first_min`` stops once the AUM slope becomes non-negative,
    ``linear`` after ``B`` events, ``quadratic`` and ``max_auc`` when no
    crossings remain. ``max_events`` caps the sweep; hitting the cap
    before the stop rule marks the path as truncated.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    B = state.B
    if max_events is None:
        max_events = B * (B - 1) // 2 + B
    budget = min(max_events, B) if variant == "linear" else max_events
    truncated = False
    if variant == "first_min" and state.slope >= 0:
        return _finish(state, False)
    while True:
        if state.n_events >= budget:
            truncated = variant != "linear" and state.peek_step() != math.inf
            break
        column = state.pop_column()
        if not column:
            break
        prev_slope = state.slope
        prev_after = at = state.auc_after
        for event in column:
            before = state.auc_after
            apply_event(state, event)
            at += state.auc_at - before
        last = state._seg[-1]
        if state.current_step == last[0]:
            # a second column at the same step only fixes rounding; fold it in
            if len(state._seg) > 1:
                last[3] += at - prev_after
            last[2], last[4] = state.slope, state.auc_after
        else:
            state._seg.append([state.current_step, state.aum, state.slope, at, state.auc_after])
        if variant == "first_min" and prev_slope < 0 <= state.slope:
            break
    return _finish(state, truncated)


def line_search(lines: ThresholdLines, model: ErrorModel, variant: str = "first_min",
                max_events: int | None = None) -> StepPath:
    return run(init(lines, model), variant, max_events)


def query(path: StepPath, s: float) -> tuple[float, float]:
    """``(aum, auc)`` at step size ``s``.

    At an event step the AUC is the value exactly at the crossing, where
    the vanishing ROC point is replaced by a chord of its neighbours.
    """
    s = float(s)
    if not s >= 0:
        raise ValueError(f"step size must be >= 0, got {s}")
    if not path.final_open and s >= path.max_step:
        raise OutsideExploredRange(
            f"step {s!r} is outside explored range [0, {path.max_step!r})")
    k = int(np.searchsorted(path.step_lo, s, side="right")) - 1
    aum = float(path.aum_at_lo[k] + path.aum_slope[k] * (s - path.step_lo[k]))
    auc = path.auc_at_lo_event[k] if s == path.step_lo[k] else path.auc_on_interval[k]
    return aum, float(auc)


def choose_step(path: StepPath, objective: str = "min_aum") -> float:
    """Step size selected from an explored path.

    ``min_aum``: the smallest explored event step attaining the lowest
    AUM. ``max_auc``: the step with the highest AUC, where an event step
    represents its exact-crossing value, a bounded interval its midpoint
    and the unbounded last interval ``step_lo + 1``.
    """
    if len(path) == 0:
        raise ValueError("empty path")
    if objective == "min_aum":
        values = path.aum_at_lo
        best = float(np.min(values))
        tol = CHOICE_TOL * max(1.0, abs(best))
        return float(path.step_lo[np.flatnonzero(values <= best + tol)[0]])
    if objective != "max_auc":
        raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    best_step, best_auc = None, -math.inf
    for k, seg in enumerate(path):
        candidates = []
        if k > 0:
            candidates.append((seg.step_lo, seg.auc_at_lo_event))
        if math.isinf(seg.step_hi):
            candidates.append((seg.step_lo + 1.0, seg.auc_on_interval))
        else:
            candidates.append(((seg.step_lo + seg.step_hi) / 2, seg.auc_on_interval))
        for step, value in candidates:
            if best_step is None or value > best_auc + CHOICE_TOL * max(1.0, abs(best_auc)):
                best_step, best_auc = step, value
    return float(best_step)


PATH_COLUMNS = ("k", "step_lo", "step_hi", "aum_at_lo", "aum_slope",
                "auc_at_lo_event", "auc_on_interval")


def write_path(path: StepPath, fh) -> None:
    """Write segments as CSV; the step_hi of an open last segment is empty."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(PATH_COLUMNS)
    for k, seg in enumerate(path):
        hi = "" if math.isinf(seg.step_hi) else repr(seg.step_hi)
        writer.writerow([k, repr(seg.step_lo), hi, repr(seg.aum_at_lo),
                         repr(seg.aum_slope), repr(seg.auc_at_lo_event),
                         repr(seg.auc_on_interval)])


def read_path(fh) -> StepPath:
    rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError("empty path file")
    col = {c: np.array([float(r[c]) if r[c] != "" else math.inf for r in rows])
           for c in PATH_COLUMNS[1:]}
    open_ = math.isinf(col["step_hi"][-1])
    return StepPath(col["step_lo"], col["step_hi"], col["aum_at_lo"], col["aum_slope"],
                    col["auc_at_lo_event"], col["auc_on_interval"], open_, False,
                    len(rows) - 1)
