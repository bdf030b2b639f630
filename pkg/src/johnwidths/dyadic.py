"""Dyadic cubes, rings and rasterized domains on the unit box.

Cubes are addressed by ``(level, index)`` with integer indices, so every
containment and adjacency test is exact.  A domain is a membership predicate
on ``[0, 1]^d``; :func:`rasterize` turns it into a :class:`GridMask` at a fixed
dyadic level ``L``.
"""

from __future__ import annotations

import ast
import enum
import itertools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


class SpecError(ValueError):
    """Invalid domain specification or degenerate rasterization."""


@dataclass(frozen=True, order=True)
class DyadicCube:
    """Closed cube ``2^-level * prod [k_i, k_i + 1]`` inside ``[0, 1]^d``."""

    level: int
    index: tuple

    def __post_init__(self):
        idx = tuple(int(k) for k in self.index)
        object.__setattr__(self, "index", idx)
        if self.level < 0:
            raise ValueError("level must be nonnegative")
        if not idx:
            raise ValueError("index must have at least one coordinate")
        n = 1 << self.level
        if any(k < 0 or k >= n for k in idx):
            raise ValueError(f"index {idx} outside the level-{self.level} lattice")

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    @property
    def diam(self) -> float:
        return math.sqrt(self.dim) * self.side

    @property
    def volume(self) -> float:
        return self.side ** self.dim

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.index, dtype=float) * self.side

    @property
    def upper(self) -> np.ndarray:
        return (np.array(self.index, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.array(self.index, dtype=float) + 0.5) * self.side

    def grid_range(self, L: int) -> list[tuple[int, int]]:
        """Half-open cell index range per axis at grid level ``L``."""
        if L < self.level:
            raise ValueError(f"cube at level {self.level} is below grid level {L}")
        s = 1 << (L - self.level)
        return [(k * s, (k + 1) * s) for k in self.index]

    def grid_slices(self, L: int) -> tuple:
        return tuple(slice(a, b) for a, b in self.grid_range(L))

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise ValueError("the unit cube has no parent")
        return DyadicCube(self.level - 1, tuple(k >> 1 for k in self.index))

    def ancestor(self, level: int) -> "DyadicCube":
        if level > self.level:
            raise ValueError("ancestor level exceeds cube level")
        s = self.level - level
        return DyadicCube(level, tuple(k >> s for k in self.index))

    def children(self) -> list["DyadicCube"]:
        return subdivide(self, 1)

    def contains(self, other: "DyadicCube") -> bool:
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return other.level >= self.level and other.ancestor(self.level) == self

    def to_json(self) -> dict:
        return {"level": self.level, "index": list(self.index)}


def unit_cube(d: int) -> DyadicCube:
    return DyadicCube(0, (0,) * d)


def subdivide(K: DyadicCube, s: int) -> list[DyadicCube]:
    """The ``2^(s d)`` cubes of level ``K.level + s`` inside ``K``, lexicographic."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    n = 1 << s
    base = [k << s for k in K.index]
    return [DyadicCube(K.level + s, tuple(b + o for b, o in zip(base, offs)))
            for offs in itertools.product(range(n), repeat=K.dim)]


class Nesting(enum.Enum):
    DISJOINT = "disjoint-interiors"
    FIRST_IN_SECOND = "first-in-second"
    SECOND_IN_FIRST = "second-in-first"
    EQUAL = "equal"


def nesting_relation(a: DyadicCube, b: DyadicCube) -> Nesting:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a == b:
        return Nesting.EQUAL
    if a.level > b.level and a.ancestor(b.level) == b:
        return Nesting.FIRST_IN_SECOND
    if b.level > a.level and b.ancestor(a.level) == a:
        return Nesting.SECOND_IN_FIRST
    return Nesting.DISJOINT


@dataclass(frozen=True)
class RingRegion:
    """The set ``outer \\ inner`` with ``inner`` a proper dyadic descendant."""

    outer: DyadicCube
    inner: DyadicCube

    def __post_init__(self):
        if nesting_relation(self.inner, self.outer) is not Nesting.FIRST_IN_SECOND:
            raise ValueError("inner cube must be strictly nested in the outer cube")

    @property
    def dim(self) -> int:
        return self.outer.dim

    @property
    def volume(self) -> float:
        return self.outer.volume - self.inner.volume

    def to_json(self) -> dict:
        return {"outer": self.outer.to_json(), "inner": self.inner.to_json()}


# --- domain specifications -------------------------------------------------

_FAMILIES = ("cube", "l-shape", "square-minus-square", "cusp", "bitmap", "implicit")

_SAFE_FUNCS = {
    "sqrt": np.sqrt, "abs": np.abs, "exp": np.exp, "log": np.log,
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "arctan2": np.arctan2,
    "minimum": np.minimum, "maximum": np.maximum, "pi": math.pi, "e": math.e,
}
_SAFE_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Compare, ast.BoolOp,
               ast.Call, ast.Name, ast.Load, ast.Constant, ast.operator,
               ast.unaryop, ast.cmpop, ast.boolop)


def _compile_inequality(text: str, d: int):
    tree = ast.parse(text, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _SAFE_NODES):
            raise SpecError(f"disallowed syntax in inequality {text!r}")
        if isinstance(node, ast.Name):
            m = re.fullmatch(r"x(\d+)", node.id)
            if m is None and node.id not in _SAFE_FUNCS:
                raise SpecError(f"unknown name {node.id!r} in inequality {text!r}")
            if m is not None and int(m.group(1)) >= d:
                raise SpecError(f"variable {node.id} exceeds dimension {d}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise SpecError(f"non-numeric constant in inequality {text!r}")
    if not isinstance(tree.body, ast.Compare):
        raise SpecError(f"inequality {text!r} must be a comparison")
    return compile(tree, "<inequality>", "eval")


def read_pgm(path) -> np.ndarray:
    """Read an ASCII (P2) or binary (P5) PGM image as a 2-D integer array."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval, with '#' comments
    while len(tokens) < 4:
        while pos < len(data) and chr(data[pos]).isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not chr(data[pos]).isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == "P2":
        vals = np.array(data[pos:].split(), dtype=np.int64)
    elif magic == "P5":
        pos += 1
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        vals = np.frombuffer(data[pos:], dtype=dtype).astype(np.int64)
    else:
        raise SpecError(f"unsupported PGM magic {magic!r}")
    if vals.size < w * h:
        raise SpecError("truncated PGM data")
    return vals[: w * h].reshape(h, w)


@dataclass(frozen=True)
class DomainSpec:
    """A domain family plus parameters, with a closed membership predicate.

    The predicate describes the closure of the domain; rasterization only keeps
    cells whose corners and center all pass, so inside cells have interiors in
    the open domain.
    """

    family: str
    params: dict = field(default_factory=dict)
    dim: int = 2

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise SpecError(f"unknown domain family {self.family!r}")
        if self.dim < 1:
            raise SpecError("dimension must be positive")
        p = self.params
        if self.family == "cusp":
            sig = float(p.get("sigma", 2.0))
            if not sig > 1:
                raise SpecError("cusp requires sigma > 1")
            if self.dim < 2:
                raise SpecError("cusp requires dimension >= 2")
        if self.family == "bitmap":
            if self.dim != 2:
                raise SpecError("bitmap domains are two-dimensional")
            if "path" not in p and "pixels" not in p:
                raise SpecError("bitmap requires 'path' or 'pixels'")
        if self.family == "implicit":
            ineqs = p.get("inequalities")
            if not ineqs:
                raise SpecError("implicit family requires a nonempty 'inequalities' list")
            for text in ineqs:
                _compile_inequality(text, self.dim)
        if self.family == "square-minus-square":
            hw = float(p.get("half_width", 0.2))
            if not 0 < hw < 0.5:
                raise SpecError("half_width must lie in (0, 1/2)")

    @classmethod
    def from_json(cls, obj) -> "DomainSpec":
        if isinstance(obj, (str, Path)):
            obj = json.loads(Path(obj).read_text())
        if not isinstance(obj, dict) or "family" not in obj:
            raise SpecError("domain spec must be an object with a 'family' key")
        params = dict(obj.get("params", {}))
        dim = int(params.pop("dim", obj.get("dim", 2)))
        return cls(obj["family"], params, dim)

    def to_json(self) -> dict:
        params = dict(self.params)
        if "pixels" in params:
            params["pixels"] = np.asarray(params["pixels"]).tolist()
        params["dim"] = self.dim
        return {"family": self.family, "params": params}

    def _box(self):
        box = self.params.get("box")
        if box is None:
            return None
        lo, hi = (np.asarray(b, dtype=float) for b in box)
        return lo, hi

    def contains(self, pts) -> np.ndarray:
        """Closed membership predicate for points of shape ``(..., d)``."""
        pts = np.asarray(pts, dtype=float)
        if pts.shape[-1] != self.dim:
            raise SpecError("point dimension does not match the domain")
        x = [pts[..., i] for i in range(self.dim)]
        inbox = np.all((pts >= 0) & (pts <= 1), axis=-1)
        fam, p = self.family, self.params
        if fam == "cube":
            return inbox
        if fam == "l-shape":
            c = float(p.get("corner", 0.5))
            return inbox & ~np.all(pts > c, axis=-1)
        if fam == "square-minus-square":
            c = float(p.get("center", 0.5))
            hw = float(p.get("half_width", 0.2))
            return inbox & ~np.all(np.abs(pts - c) < hw, axis=-1)
        if fam == "cusp":
            sig = float(p.get("sigma", 2.0))
            # the cusp tip sits at the middle of the face x_d = 0
            y = 2.0 * pts[..., :-1] - 1.0
            r = np.sqrt(np.sum(y * y, axis=-1))
            return inbox & (r ** (1.0 / sig) <= x[-1]) & (x[-1] <= 1.0)
        if fam == "bitmap":
            return inbox & self._bitmap_contains(pts)
        if fam == "implicit":
            box = self._box()
            if box is not None:
                lo, hi = box
                xs = lo + pts * (hi - lo)
                x = [xs[..., i] for i in range(self.dim)]
            ns = dict(_SAFE_FUNCS)
            ns.update({f"x{i}": x[i] for i in range(self.dim)})
            out = inbox.copy()
            for text in p["inequalities"]:
                code = _compile_inequality(text, self.dim)
                out &= np.asarray(eval(code, {"__builtins__": {}}, ns), dtype=bool)
            return out
        raise SpecError(fam)

    def _pixels(self) -> np.ndarray:
        if "pixels" in self.params:
            return np.asarray(self.params["pixels"]) != 0
        return read_pgm(self.params["path"]) != 0

    def _bitmap_contains(self, pts) -> np.ndarray:
        img = self._pixels()
        h, w = img.shape
        # image row 0 is the top edge (x_1 = 1)
        u = pts[..., 0] * w
        v = (1.0 - pts[..., 1]) * h
        out = np.zeros(pts.shape[:-1], dtype=bool)
        for ua in (np.ceil(u) - 1, np.floor(u)):
            for va in (np.ceil(v) - 1, np.floor(v)):
                ci = np.clip(ua, 0, w - 1).astype(int)
                ri = np.clip(va, 0, h - 1).astype(int)
                out |= img[ri, ci]
        return out


@dataclass(frozen=True, eq=False)
class GridMask:
    """Inside flags for the ``2^L`` per axis grid cells of level ``L``.

    Array axis ``i`` is coordinate ``x_i``; ``inside[k]`` is the cell with
    lower corner ``k * 2^-L``.
    """

    level: int
    inside: np.ndarray
    spec: DomainSpec | None = None

    @property
    def dim(self) -> int:
        return self.inside.ndim

    @property
    def n(self) -> int:
        return 1 << self.level

    @property
    def h(self) -> float:
        return 2.0 ** -self.level

    @property
    def count(self) -> int:
        return int(self.inside.sum())

    def cell_centers(self) -> np.ndarray:
        """Centers of all grid cells, shape ``(n, ..., n, d)``."""
        ax = (np.arange(self.n) + 0.5) * self.h
        return np.stack(np.meshgrid(*([ax] * self.dim), indexing="ij"), axis=-1)


def rasterize(spec: DomainSpec, L: int) -> GridMask:
    """Mark a level-``L`` cell inside iff all corners and its center pass."""
    if L < 1:
        raise SpecError("resolution level must be >= 1")
    d, n = spec.dim, 1 << L
    ax_v = np.arange(n + 1) / n
    verts = np.stack(np.meshgrid(*([ax_v] * d), indexing="ij"), axis=-1)
    vok = spec.contains(verts)
    ok = np.ones((n,) * d, dtype=bool)
    for offs in itertools.product((0, 1), repeat=d):
        ok &= vok[tuple(slice(o, o + n) for o in offs)]
    ax_c = (np.arange(n) + 0.5) / n
    cents = np.stack(np.meshgrid(*([ax_c] * d), indexing="ij"), axis=-1)
    ok &= spec.contains(cents)
    if not ok.any():
        raise SpecError("degenerate domain at this resolution")
    return GridMask(L, ok, spec)


def mask_from_cells(L: int, cells: Sequence[Sequence[int]], d: int = 2) -> GridMask:
    """Build a mask from an explicit list of inside cell indices."""
    inside = np.zeros((1 << L,) * d, dtype=bool)
    for c in cells:
        inside[tuple(c)] = True
    if not inside.any():
        raise SpecError("degenerate domain at this resolution")
    return GridMask(L, inside, None)
