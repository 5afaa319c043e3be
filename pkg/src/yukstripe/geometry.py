"""Periodic rectangle-union sets, binary grids, and the stripe distance.

Sets are unions of axis-aligned half-open boxes inside [0, L)^d,
interpreted L-periodically.  The half-open convention makes slicing and
disjointness unambiguous on facet planes.  All boundary normals are axis
directions, so the anisotropic 1-perimeter is a sum of facet areas (with
touching facets of neighbouring boxes cancelling).
"""

import base64
import json
import math
from dataclasses import dataclass

import numpy as np


def _merge_intervals(ivs):
    """Merge a list of (lo, hi) with touching endpoints coalesced."""
    ivs = sorted((float(a), float(b)) for a, b in ivs if b > a)
    out = []
    for a, b in ivs:
        if out and a <= out[-1][1] + 1e-15 * max(1.0, abs(out[-1][1])):
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


@dataclass(frozen=True)
class RectUnionSet:
    """Union of pairwise-disjoint axis boxes in [0, L)^d, L-periodic.

    boxes is a tuple of (lo, hi) pairs of d-tuples with lo < hi
    componentwise and everything inside [0, L].
    """

    d: int
    L: float
    boxes: tuple

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("exact sets support d in {2, 3}")
        if self.L <= 0:
            raise ValueError("period must be positive")
        norm = []
        for lo, hi in self.boxes:
            lo = tuple(float(v) for v in lo)
            hi = tuple(float(v) for v in hi)
            if len(lo) != self.d or len(hi) != self.d:
                raise ValueError("box corner dimension mismatch")
            if any(h <= l for l, h in zip(lo, hi)):
                raise ValueError("boxes need lo < hi componentwise")
            if any(l < 0 or h > self.L for l, h in zip(lo, hi)):
                raise ValueError("box corners must lie in [0, L]")
            norm.append((lo, hi))
        object.__setattr__(self, "boxes", tuple(norm))
        tol = 1e-12 * max(1.0, self.L) ** self.d
        for i in range(len(norm)):
            for j in range(i + 1, len(norm)):
                if _box_overlap_volume(norm[i], norm[j]) > tol:
                    raise ValueError(f"boxes {i} and {j} overlap")

    def volume(self):
        return sum(math.prod(h - l for l, h in zip(lo, hi)) for lo, hi in self.boxes)

    def volume_fraction(self):
        return self.volume() / self.L ** self.d

    def contains(self, point):
        p = [float(v) % self.L for v in point]
        for lo, hi in self.boxes:
            if all(l <= x < h for x, l, h in zip(p, lo, hi)):
                return True
        return False

    def scaled(self, factor):
        """The set factor*E with period factor*L (exact)."""
        f = float(factor)
        boxes = tuple((tuple(f * v for v in lo), tuple(f * v for v in hi))
                      for lo, hi in self.boxes)
        return RectUnionSet(self.d, f * self.L, boxes)

    def translated(self, vec):
        """Periodic translation, splitting boxes at the wrap."""
        pieces = [(tuple(l + v for l, v in zip(lo, vec)),
                   tuple(h + v for h, v in zip(hi, vec)))
                  for lo, hi in self.boxes]
        for ax in range(self.d):
            nxt = []
            for lo, hi in pieces:
                nxt.extend(_wrap_axis(lo, hi, ax, self.L))
            pieces = nxt
        return RectUnionSet(self.d, self.L, tuple(pieces))


def _wrap_axis(lo, hi, ax, L):
    a, b = lo[ax] % L, lo[ax] % L + (hi[ax] - lo[ax])
    if b <= L + 1e-12:
        yield (_with(lo, ax, a), _with(hi, ax, min(b, L)))
    else:
        yield (_with(lo, ax, a), _with(hi, ax, L))
        # the wrapped piece ends at b - L <= a mathematically; clamp the
        # float rounding so the pieces stay disjoint
        yield (_with(lo, ax, 0.0), _with(hi, ax, min(b - L, a)))


def _with(tup, i, v):
    t = list(tup)
    t[i] = v
    return tuple(t)


def _box_overlap_volume(b1, b2):
    v = 1.0
    for (l1, h1), (l2, h2) in zip(zip(*b1), zip(*b2)):
        v *= max(0.0, min(h1, h2) - max(l1, l2))
        if v == 0.0:
            return 0.0
    return v


# ---------------------------------------------------------------------------
# Slicing and perimeter
# ---------------------------------------------------------------------------

def slice_set(rset, axis, t_perp):
    """Exact 1D slice through transverse point t_perp, as merged intervals.

    t_perp lists the coordinates of the slicing line in the axes other
    than ``axis`` (increasing axis order).  Points on facet planes follow
    the half-open convention.
    """
    t_perp = [float(v) % rset.L for v in np.atleast_1d(t_perp)]
    if len(t_perp) != rset.d - 1:
        raise ValueError("t_perp must have d-1 coordinates")
    other = [a for a in range(rset.d) if a != axis]
    ivs = []
    for lo, hi in rset.boxes:
        if all(lo[a] <= t < hi[a] for a, t in zip(other, t_perp)):
            ivs.append((lo[axis], hi[axis]))
    return _merge_intervals(ivs)


def perp_breaks(rset, axis):
    """Transverse arrangement breakpoints: one sorted array per other axis.

    Between consecutive breakpoints of the product arrangement, the slice
    along ``axis`` has constant structure.
    """
    out = []
    for a in range(rset.d):
        if a == axis:
            continue
        vals = {0.0, rset.L}
        for lo, hi in rset.boxes:
            vals.add(lo[a] % rset.L)
            if hi[a] < rset.L:
                vals.add(hi[a])
        out.append(np.array(sorted(vals)))
    return out


def per1(rset, axis=None):
    """Anisotropic 1-perimeter within one period, or one directional part.

    Facet areas with normal along ``axis`` (all axes when None); shared
    facets of touching boxes cancel, and facets on the period boundary
    cancel against the wrapped copy.
    """
    if axis is None:
        return sum(per1(rset, a) for a in range(rset.d))
    # cluster plane coordinates: wrap splitting introduces last-bit jitter
    tol = 1e-9 * max(1.0, rset.L)
    faces = []
    for lo, hi in rset.boxes:
        perp = tuple((l, h) for a, (l, h) in enumerate(zip(lo, hi)) if a != axis)
        for c, sign in ((lo[axis] % rset.L, -1), (hi[axis] % rset.L, +1)):
            if c > rset.L - tol:
                c = 0.0
            faces.append((c, sign, perp))
    faces.sort(key=lambda f: f[0])
    area = 0.0
    i = 0
    while i < len(faces):
        j = i
        while j + 1 < len(faces) and faces[j + 1][0] - faces[i][0] <= tol:
            j += 1
        p = [f[2] for f in faces[i:j + 1] if f[1] > 0]
        m = [f[2] for f in faces[i:j + 1] if f[1] < 0]
        a = sum(_rect_area(r) for r in p) + sum(_rect_area(r) for r in m)
        cancel = sum(_rect_overlap_area(rp, rm) for rp in p for rm in m)
        area += a - 2.0 * cancel
        i = j + 1
    return area


def _rect_area(perp):
    return math.prod(h - l for l, h in perp)


def _rect_overlap_area(r1, r2):
    v = 1.0
    for (l1, h1), (l2, h2) in zip(r1, r2):
        v *= max(0.0, min(h1, h2) - max(l1, l2))
    return v


def per1_by_slicing(rset, axis):
    """Directional perimeter via Fubini: integral of the slice boundary count."""
    breaks = perp_breaks(rset, axis)
    total = 0.0
    if rset.d == 2:
        bs = breaks[0]
        for a, b in zip(bs[:-1], bs[1:]):
            ivs = slice_set(rset, axis, [(a + b) / 2])
            total += _slice_boundary_count(ivs, rset.L) * (b - a)
    else:
        b1, b2 = breaks
        for a1, a2 in zip(b1[:-1], b1[1:]):
            for c1, c2 in zip(b2[:-1], b2[1:]):
                ivs = slice_set(rset, axis, [(a1 + a2) / 2, (c1 + c2) / 2])
                total += _slice_boundary_count(ivs, rset.L) * (a2 - a1) * (c2 - c1)
    return total


def _slice_boundary_count(ivs, L):
    """Boundary points of the periodic extension of an interval union."""
    if not ivs:
        return 0
    eps = 1e-12 * max(1.0, L)
    starts_at_zero = ivs[0][0] <= eps
    ends_at_period = ivs[-1][1] >= L - eps
    interior = sum(1 for a, b in ivs for e in (a, b) if eps < e < L - eps)
    wrap = 1 if starts_at_zero != ends_at_period else 0
    return interior + wrap


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def _check_commensurate(h, L):
    n = L / (2 * h)
    if abs(n - round(n)) > 1e-9 * max(1.0, abs(n)) or round(n) < 1:
        raise ValueError(f"period {L} must be a positive even multiple of width {h}")
    return int(round(n))


def make_stripes(axis, h, L, d=2, phase=0.0):
    """Periodic stripes of width and gap h, profile along ``axis``.

    The set is {x : (x_axis - phase) mod 2h in [0, h)}, extended through
    every transverse direction.
    """
    m = _check_commensurate(h, L)
    boxes = []
    full = [(0.0, L)] * d
    for j in range(m):
        a = (2 * j * h + phase) % L
        b = a + h
        segs = [(a, min(b, L))] + ([(0.0, b - L)] if b > L + 1e-12 else [])
        for s in segs:
            if s[1] - s[0] <= 1e-15:
                continue
            lo = [f[0] for f in full]
            hi = [f[1] for f in full]
            lo[axis], hi[axis] = s
            boxes.append((tuple(lo), tuple(hi)))
    return RectUnionSet(d, L, tuple(boxes))


def make_checkerboard(h, L):
    """d = 2 checkerboard of cell size h (cells with even index sum filled)."""
    m = _check_commensurate(h, L)
    n = 2 * m
    boxes = []
    for i in range(n):
        for j in range(n):
            if (i + j) % 2 == 0:
                boxes.append(((i * h, j * h), ((i + 1) * h, (j + 1) * h)))
    return RectUnionSet(2, L, tuple(boxes))


@dataclass(frozen=True)
class GridSet:
    """Binary occupancy on an n-by-n torus grid, d = 2, cell size L/n.

    cells[i, j] is the cell [i*L/n, (i+1)*L/n) x [j*L/n, (j+1)*L/n).
    """

    L: float
    cells: np.ndarray

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.cells, dtype=bool))
        object.__setattr__(self, "cells", c)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("cells must be a square array")
        if c.shape[0] < 8:
            raise ValueError("grid resolution must be at least 8")
        if self.L <= 0:
            raise ValueError("period must be positive")

    @property
    def d(self):
        return 2

    @property
    def n(self):
        return self.cells.shape[0]

    @property
    def delta(self):
        return self.L / self.n

    def volume(self):
        return float(self.cells.sum()) * self.delta ** 2

    def volume_fraction(self):
        return float(self.cells.mean())

    def per1(self):
        c = self.cells
        nb = (c != np.roll(c, 1, axis=0)).sum() + (c != np.roll(c, 1, axis=1)).sum()
        return float(nb) * self.delta

    def to_rect_union(self):
        """Exact conversion: one box per occupied run along axis 1."""
        d = self.delta
        boxes = []
        for i in range(self.n):
            row = self.cells[i]
            j = 0
            while j < self.n:
                if row[j]:
                    j0 = j
                    while j < self.n and row[j]:
                        j += 1
                    boxes.append(((i * d, j0 * d), ((i + 1) * d, j * d)))
                else:
                    j += 1
        return RectUnionSet(2, self.L, tuple(boxes))

    @staticmethod
    def from_rect(rset, n):
        """Rasterize by cell-center membership (exact when commensurate)."""
        if rset.d != 2:
            raise ValueError("grids are two-dimensional")
        d = rset.L / n
        cells = np.zeros((n, n), dtype=bool)
        centers = (np.arange(n) + 0.5) * d
        for i, x in enumerate(centers):
            for j, y in enumerate(centers):
                cells[i, j] = rset.contains((x, y))
        return GridSet(rset.L, cells)


def make_perturbed_stripes(axis, h, amplitude, mode, L, n=64, phase=0.0):
    """Stripes with interfaces displaced by amplitude*sin(2 pi mode t/L).

    Returns the rasterized GridSet; amplitude = 0 reproduces the
    rasterization of make_stripes exactly.
    """
    _check_commensurate(h, L)
    d = L / n
    centers = (np.arange(n) + 0.5) * d
    cells = np.zeros((n, n), dtype=bool)
    for ip, t_perp in enumerate(centers):
        shift = amplitude * math.sin(2.0 * math.pi * mode * t_perp / L)
        inside = ((centers - phase - shift) % (2 * h)) < h
        if axis == 0:
            cells[:, ip] = inside
        else:
            cells[ip, :] = inside
    return GridSet(L, cells)


# ---------------------------------------------------------------------------
# Stripe distance
# ---------------------------------------------------------------------------

@dataclass
class StripeDistanceResult:
    value: float
    axis: int
    eta: float
    n_bins: int
    bin_width: float
    bin_error_bound: float
    cyclic: bool


def _column_masses(set_like, axis, cube, n_bins):
    """Normalized occupancy fraction of each column of the window."""
    if isinstance(set_like, GridSet):
        rset = set_like.to_rect_union()
    else:
        rset = set_like
    z, l = cube
    z = [float(v) for v in np.atleast_1d(z)]
    lo_w = [c - l / 2 for c in z]
    L = rset.L
    other = [a for a in range(rset.d) if a != axis]
    dc = l / n_bins
    masses = np.zeros(n_bins)
    for lo, hi in rset.boxes:
        for img in np.ndindex(*(3,) * rset.d):
            s = [(img[k] - 1) * L for k in range(rset.d)]
            blo = [lo[k] + s[k] for k in range(rset.d)]
            bhi = [hi[k] + s[k] for k in range(rset.d)]
            perp = 1.0
            for a in other:
                perp *= max(0.0, min(bhi[a], lo_w[a] + l) - max(blo[a], lo_w[a]))
            if perp <= 0:
                continue
            a0, a1 = blo[axis], bhi[axis]
            j0 = max(0, int(math.floor((a0 - lo_w[axis]) / dc)))
            j1 = min(n_bins - 1, int(math.ceil((a1 - lo_w[axis]) / dc)))
            for j in range(j0, j1 + 1):
                c0 = lo_w[axis] + j * dc
                ov = max(0.0, min(a1, c0 + dc) - max(a0, c0))
                masses[j] += ov * perp
    col_vol = dc * l ** (rset.d - 1)
    return np.clip(masses / col_vol, 0.0, 1.0)


def _dp_free(cost0, cost1, R):
    """Min-cost binary labelling, interior runs >= R, free edge runs."""
    n = len(cost0)
    INF = np.inf
    dp = np.full((2, R), INF)
    dp[0, R - 1] = cost0[0]
    dp[1, R - 1] = cost1[0]
    for j in range(1, n):
        new = np.full((2, R), INF)
        for s, cost in ((0, cost0[j]), (1, cost1[j])):
            # extend current run
            new[s, 1:R - 1] = dp[s, 0:R - 2]
            new[s, R - 1] = min(dp[s, R - 2] if R >= 2 else INF, dp[s, R - 1])
            if R == 1:
                new[s, 0] = min(new[s, 0], dp[s, 0])
            # switch from the other phase (only from a complete run)
            new[s, 0] = min(new[s, 0], dp[1 - s, R - 1])
            new[s] += cost
        dp = new
    return float(dp.min())


def _dp_cyclic(cost0, cost1, R):
    """Min-cost cyclic binary labelling with every run >= R."""
    n = len(cost0)
    best = min(float(np.sum(cost0)), float(np.sum(cost1)))  # no boundary
    if 2 * R > n:
        return best
    costs = (cost0, cost1)
    INF = np.inf
    for b in range(n):
        idx = (np.arange(n) + b) % n
        c0, c1 = cost0[idx], cost1[idx]
        for s_first in (0, 1):
            dp = np.full((2, R), INF)
            dp[s_first, 0] = (c0 if s_first == 0 else c1)[0]
            for j in range(1, n):
                new = np.full((2, R), INF)
                for s, cost in ((0, c0[j]), (1, c1[j])):
                    new[s, 1:R - 1] = dp[s, 0:R - 2]
                    new[s, R - 1] = min(dp[s, R - 2] if R >= 2 else INF,
                                        dp[s, R - 1])
                    if R == 1:
                        new[s, 0] = min(new[s, 0], dp[s, 0])
                    new[s, 0] = min(new[s, 0], dp[1 - s, R - 1])
                    new[s] += cost
                dp = new
            # wrap boundary at the rotation point: last run complete and of
            # the opposite phase to the first run
            best = min(best, float(dp[1 - s_first, R - 1]))
    return best


def stripe_distance(set_like, axis, eta, cube=None, n_bins=256):
    """Normalized L1 distance to eta-separated stripes with profile on ``axis``.

    The infimum over admissible stripe unions is solved exactly on the
    column discretization by dynamic programming over (column, phase,
    run length); the quantization error bound of the column width is
    reported alongside.  When the window spans the full period the run
    constraint is enforced across the periodic wrap (cyclic programme),
    otherwise edge runs are unconstrained.
    """
    L = set_like.L
    if cube is None:
        d = set_like.d if isinstance(set_like, RectUnionSet) else 2
        cube = ([L / 2] * d, L)
    z, l = cube
    if l > L:
        raise ValueError("window side must not exceed the period")
    if eta >= l:
        raise ValueError("separation scale must be smaller than the window")
    if isinstance(set_like, GridSet) and abs(l - L) < 1e-12 * L:
        # align columns with grid cells so the masses are exactly 0/1
        npix = set_like.n
        n_bins = npix * max(1, round(n_bins / npix))
    m = _column_masses(set_like, axis, (z, l), n_bins)
    dc = l / n_bins
    R = max(1, int(math.ceil(eta / dc - 1e-9)))
    w = dc / l
    cost_out = m * w
    cost_in = (1.0 - m) * w
    cyclic = abs(l - L) < 1e-12 * L
    if cyclic:
        val = _dp_cyclic(cost_out, cost_in, R)
    else:
        val = _dp_free(cost_out, cost_in, R)
    max_interfaces = int(l / max(eta, dc)) + 2
    err = max_interfaces * dc / l
    return StripeDistanceResult(value=val, axis=axis, eta=eta, n_bins=n_bins,
                                bin_width=dc, bin_error_bound=err, cyclic=cyclic)


def stripe_distance_min(set_like, eta, cube=None, n_bins=256):
    """Minimum of the stripe distance over profile axes."""
    d = set_like.d if isinstance(set_like, RectUnionSet) else 2
    results = [stripe_distance(set_like, a, eta, cube=cube, n_bins=n_bins)
               for a in range(d)]
    return min(results, key=lambda r: r.value)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def set_to_json(set_like):
    """JSON text for either set type.

    Rect unions serialize their box corners; grids serialize a
    run-length-encoded occupancy block: row-major (axis-0 major) cell
    order, alternating run lengths starting with an empty-cell run, each
    run a little-endian uint16, runs longer than 65535 split by zero-length
    separators.  The block is base64-encoded into the JSON document.
    """
    if isinstance(set_like, RectUnionSet):
        return json.dumps({
            "type": "rect_union",
            "d": set_like.d,
            "L": set_like.L,
            "boxes": [[list(lo), list(hi)] for lo, hi in set_like.boxes],
        })
    if isinstance(set_like, GridSet):
        flat = set_like.cells.reshape(-1)
        runs = []
        cur_val = False
        cur_len = 0
        for v in flat:
            if v == cur_val:
                cur_len += 1
            else:
                runs.append(cur_len)
                cur_val = bool(v)
                cur_len = 1
        runs.append(cur_len)
        enc = []
        for r in runs:
            while r > 65535:
                enc += [65535, 0]
                r -= 65535
            enc.append(r)
        blob = np.array(enc, dtype="<u2").tobytes()
        return json.dumps({
            "type": "grid",
            "d": 2,
            "L": set_like.L,
            "n": set_like.n,
            "encoding": "rle-u2le-rowmajor",
            "data": base64.b64encode(blob).decode("ascii"),
        })
    raise TypeError(f"cannot serialize {type(set_like)!r}")


def set_from_json(text):
    doc = json.loads(text)
    if doc["type"] == "rect_union":
        boxes = tuple((tuple(lo), tuple(hi)) for lo, hi in doc["boxes"])
        return RectUnionSet(doc["d"], doc["L"], boxes)
    if doc["type"] == "grid":
        blob = base64.b64decode(doc["data"])
        runs = np.frombuffer(blob, dtype="<u2")
        flat = np.zeros(doc["n"] ** 2, dtype=bool)
        pos = 0
        val = False
        for r in runs:
            flat[pos:pos + r] = val
            pos += int(r)
            val = not val
        return GridSet(doc["L"], flat.reshape(doc["n"], doc["n"]))
    raise ValueError(f"unknown set type {doc['type']!r}")
