"""Texture pool: image files plus procedural fallbacks.

A pool entry is a :class:`TextureRef`. Procedural entries (checkerboard,
value noise) may be *pinned* (parameters fixed when the pool is built, so
every draw of that entry looks the same) or *unpinned* (parameters drawn
per video from its stream). Either way the parameters recorded in a sample
are complete: realizing them twice gives identical pixels.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .rng import RngStream

_DEFAULT_SIZE = 64


@dataclass(frozen=True)
class TextureRef:
    """Pool entry. ``pool_id`` is the stable identity splits group by."""

    kind: str  # "checker" | "noise" | "image"
    pool_id: str
    params: dict | None = None  # None = draw parameters per sample

    def pinned(self) -> bool:
        return self.params is not None


def default_pool() -> list[TextureRef]:
    return [TextureRef("checker", "checker#0"), TextureRef("noise", "noise#1")]


def parse_pool_tokens(tokens: list[str]) -> list[TextureRef]:
    """Pool from config tokens: 'checker', 'noise', 'image:<path>', 'dir:<path>'."""
    refs: list[TextureRef] = []
    for tok in tokens:
        i = len(refs)
        if tok == "checker":
            refs.append(TextureRef("checker", f"checker#{i}"))
        elif tok == "noise":
            refs.append(TextureRef("noise", f"noise#{i}"))
        elif tok.startswith("image:"):
            path = tok[len("image:"):]
            refs.append(TextureRef("image", os.path.basename(path), {"path": path}))
        elif tok.startswith("dir:"):
            root = tok[len("dir:"):]
            names = sorted(
                n for n in os.listdir(root) if n.lower().endswith((".png", ".ppm"))
            )
            if not names:
                raise ValueError(f"texture directory {root!r} has no .png/.ppm files")
            for n in names:
                refs.append(TextureRef("image", n, {"path": os.path.join(root, n)}))
        else:
            raise ValueError(f"unknown texture pool token {tok!r}")
    if not refs:
        raise ValueError("texture pool cannot be empty")
    return refs


def _draw_color(stream: RngStream) -> list[float]:
    return [round(stream.uniform(0.1, 0.95), 6) for _ in range(3)]


def instantiate(ref: TextureRef, stream: RngStream) -> dict:
    """Fully-pinned parameters for one draw of a pool entry.

    Pinned entries return their stored parameters without consuming any
    draws; unpinned procedural entries consume a fixed number of draws.
    """
    if ref.params is not None:
        return dict(ref.params)
    if ref.kind == "checker":
        return {
            "colors": [_draw_color(stream), _draw_color(stream)],
            "cells": 2 * stream.randint(5) + 4,  # 4..12 even
        }
    if ref.kind == "noise":
        return {
            "seed": stream.randint(2**31),
            "scale": stream.randint(6) + 3,  # lattice 3..8
            "palette": [_draw_color(stream), _draw_color(stream)],
        }
    raise ValueError(f"cannot instantiate texture kind {ref.kind!r}")


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _value_noise(size: int, scale: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    lattice = rng.random((scale + 1, scale + 1))
    lattice[-1, :] = lattice[0, :]
    lattice[:, -1] = lattice[:, 0]  # tileable
    coords = np.linspace(0.0, scale, size, endpoint=False)
    x0 = np.floor(coords).astype(int)
    tx = _fade(coords - x0)
    y0 = x0
    v00 = lattice[np.ix_(y0, x0)]
    v01 = lattice[np.ix_(y0, x0 + 1)]
    v10 = lattice[np.ix_(y0 + 1, x0)]
    v11 = lattice[np.ix_(y0 + 1, x0 + 1)]
    top = v00 + (v01 - v00) * tx[None, :]
    bot = v10 + (v11 - v10) * tx[None, :]
    return top + (bot - top) * _fade(coords - x0)[:, None]


def realize(kind: str, params: dict, size: int = _DEFAULT_SIZE) -> np.ndarray:
    """(size, size, 3) float64 pixels in [0, 1]; pure in its arguments."""
    if kind == "flat":
        return np.broadcast_to(
            np.asarray(params["color"], dtype=np.float64), (size, size, 3)
        ).copy()
    if kind == "checker":
        c = np.asarray(params["colors"], dtype=np.float64)
        cells = int(params["cells"])
        idx = np.add.outer(np.arange(size) * cells // size, np.arange(size) * cells // size) % 2
        return c[idx]
    if kind == "noise":
        field = _value_noise(size, int(params["scale"]), int(params["seed"]))
        pal = np.asarray(params["palette"], dtype=np.float64)
        return pal[0] + (pal[1] - pal[0]) * field[..., None]
    if kind == "image":
        with Image.open(params["path"]) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
        return arr
    raise ValueError(f"unknown texture kind {kind!r}")


def sample_texture(tex: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Nearest-texel lookup with wraparound; u/v in texture tile units."""
    h, w = tex.shape[:2]
    iu = np.floor(u * w).astype(np.int64) % w
    iv = np.floor(v * h).astype(np.int64) % h
    return tex[iv, iu]
