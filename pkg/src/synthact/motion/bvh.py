"""Hierarchical motion file (BVH) parser and writer.

The parser honors whatever rotation channel order each file declares, per
joint. The writer always emits ``Zrotation Xrotation Yrotation`` and folds
the root's file offset into the per-frame translation columns, so a
write/parse/write cycle is byte-stable.

Malformed input raises :class:`BvhParseError` with a line number; nothing
else escapes ``parse_bvh``.
"""

from __future__ import annotations

import math

import numpy as np

from . import quat
from .skeleton import MotionClip, SkeletonTopology

_ROT_CHANNELS = {"Xrotation": "X", "Yrotation": "Y", "Zrotation": "Z"}
_POS_CHANNELS = {"Xposition": 0, "Yposition": 1, "Zposition": 2}

WRITE_ROTATION_ORDER = "ZXY"


class BvhParseError(Exception):
    """Structural or numeric problem in a motion file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class _Tokens:
    def __init__(self, lines: list[str]):
        self.items: list[tuple[str, int]] = []
        for no, line in enumerate(lines, start=1):
            for tok in line.split():
                self.items.append((tok, no))
        self.pos = 0

    def peek(self) -> str | None:
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def line(self) -> int | None:
        if self.pos < len(self.items):
            return self.items[self.pos][1]
        return self.items[-1][1] if self.items else None

    def next(self, what: str) -> tuple[str, int]:
        if self.pos >= len(self.items):
            raise BvhParseError(f"unexpected end of file, expected {what}", self.line())
        tok, no = self.items[self.pos]
        self.pos += 1
        return tok, no

    def expect(self, literal: str):
        tok, no = self.next(repr(literal))
        if tok != literal:
            raise BvhParseError(f"expected {literal!r}, found {tok!r}", no)

    def number(self, what: str) -> float:
        tok, no = self.next(what)
        try:
            value = float(tok)
        except ValueError:
            raise BvhParseError(f"non-numeric {what} {tok!r}", no) from None
        if not math.isfinite(value):
            raise BvhParseError(f"non-finite {what} {tok!r}", no)
        return value


class _JointRec:
    __slots__ = ("name", "parent", "offset", "pos_axes", "rot_order", "end_site", "saw_offset", "saw_channels")

    def __init__(self, name, parent, end_site=False):
        self.name = name
        self.parent = parent
        self.offset = (0.0, 0.0, 0.0)
        self.pos_axes: list[int] = []
        self.rot_order = ""
        self.end_site = end_site
        self.saw_offset = False
        self.saw_channels = False


def _parse_offset(t: _Tokens) -> tuple[float, float, float]:
    return (t.number("offset"), t.number("offset"), t.number("offset"))


def _parse_channels(t: _Tokens, joint: _JointRec, is_root: bool):
    count_tok, no = t.next("channel count")
    try:
        count = int(count_tok)
    except ValueError:
        raise BvhParseError(f"bad channel count {count_tok!r}", no) from None
    if count < 0 or count > 6:
        raise BvhParseError(f"channel count {count} out of range", no)
    order: list[str] = []
    for _ in range(count):
        name, cno = t.next("channel name")
        if name in _ROT_CHANNELS:
            axis = _ROT_CHANNELS[name]
            if axis in order:
                raise BvhParseError(f"duplicate rotation channel {name}", cno)
            order.append(axis)
        elif name in _POS_CHANNELS:
            if not is_root:
                raise BvhParseError(
                    f"position channel {name} on non-root joint {joint.name!r} is unsupported", cno
                )
            joint.pos_axes.append(_POS_CHANNELS[name])
        else:
            raise BvhParseError(f"unknown channel name {name!r}", cno)
    if len(order) != 3:
        raise BvhParseError(f"joint {joint.name!r} must declare 3 rotation channels", no)
    joint.rot_order = "".join(order)


def _close_joint(t: _Tokens, rec: _JointRec):
    if not rec.saw_offset:
        raise BvhParseError(f"joint {rec.name!r} missing OFFSET", t.line())
    if not rec.end_site and not rec.saw_channels:
        raise BvhParseError(f"joint {rec.name!r} missing CHANNELS", t.line())


def _parse_hierarchy(t: _Tokens, joints: list[_JointRec], names: set[str]):
    """Parse nested joint blocks iteratively (fuzz input can nest deeply)."""
    t.expect("{")
    stack = [0]
    while stack:
        tok = t.peek()
        if tok is None:
            raise BvhParseError("unexpected end of file inside joint block", t.line())
        rec = joints[stack[-1]]
        if tok == "OFFSET":
            t.next("OFFSET")
            if rec.saw_offset:
                raise BvhParseError(f"duplicate OFFSET in joint {rec.name!r}", t.line())
            rec.offset = _parse_offset(t)
            rec.saw_offset = True
        elif tok == "CHANNELS":
            _, no = t.next("CHANNELS")
            if rec.end_site:
                raise BvhParseError("end sites cannot declare channels", no)
            if rec.saw_channels:
                raise BvhParseError(f"duplicate CHANNELS in joint {rec.name!r}", no)
            _parse_channels(t, rec, is_root=stack[-1] == 0)
            rec.saw_channels = True
        elif tok == "JOINT":
            _, no = t.next("JOINT")
            if rec.end_site:
                raise BvhParseError("end sites cannot have children", no)
            name, nno = t.next("joint name")
            if name in names:
                raise BvhParseError(f"duplicate joint name {name!r}", nno)
            names.add(name)
            joints.append(_JointRec(name, stack[-1]))
            stack.append(len(joints) - 1)
            t.expect("{")
        elif tok == "End":
            _, no = t.next("End")
            t.expect("Site")
            if rec.end_site:
                raise BvhParseError("end sites cannot have children", no)
            base = f"{rec.name}_end"
            name = base
            k = 2
            while name in names:
                name = f"{base}{k}"
                k += 1
            names.add(name)
            joints.append(_JointRec(name, stack[-1], end_site=True))
            stack.append(len(joints) - 1)
            t.expect("{")
        elif tok == "}":
            t.next("}")
            _close_joint(t, rec)
            stack.pop()
        else:
            raise BvhParseError(f"unexpected token {tok!r} in joint block", t.line())


def parse_bvh(text: str) -> MotionClip:
    """Parse motion file text into a MotionClip.

    The root's declared OFFSET is folded into the per-frame translation, so
    the returned topology always has a zero root offset.
    """
    lines = text.splitlines()
    split = None
    for i, line in enumerate(lines):
        if line.split()[:1] == ["MOTION"]:
            split = i
            break
    if split is None:
        raise BvhParseError("missing MOTION section")

    t = _Tokens(lines[:split])
    t.expect("HIERARCHY")
    t.expect("ROOT")
    root_name, _ = t.next("root name")
    joints = [_JointRec(root_name, -1)]
    _parse_hierarchy(t, joints, {root_name})
    if t.peek() is not None:
        raise BvhParseError(f"unexpected token {t.peek()!r} after hierarchy", t.line())

    motion_lines = [(split + 1 + i, ln) for i, ln in enumerate(lines[split:])][1:]
    header = [(no, ln.split()) for no, ln in motion_lines if ln.strip()]
    if len(header) < 2:
        raise BvhParseError("motion section missing Frames/Frame Time headers")
    (fno, ftoks), (tno, ttoks) = header[0], header[1]
    if ftoks[:1] != ["Frames:"] or len(ftoks) != 2:
        raise BvhParseError("expected 'Frames: <count>'", fno)
    try:
        frame_count = int(ftoks[1])
    except ValueError:
        raise BvhParseError(f"bad frame count {ftoks[1]!r}", fno) from None
    if frame_count < 0:
        raise BvhParseError(f"negative frame count {frame_count}", fno)
    if ttoks[:2] != ["Frame", "Time:"] or len(ttoks) != 3:
        raise BvhParseError("expected 'Frame Time: <seconds>'", tno)
    try:
        frame_time = float(ttoks[2])
    except ValueError:
        raise BvhParseError(f"bad frame time {ttoks[2]!r}", tno) from None
    if not math.isfinite(frame_time) or frame_time <= 0:
        raise BvhParseError(f"frame time must be positive, got {ttoks[2]}", tno)

    data_rows = header[2:]
    if len(data_rows) != frame_count:
        raise BvhParseError(
            f"declared {frame_count} frames but found {len(data_rows)} data rows",
            data_rows[0][0] if data_rows else tno,
        )

    channeled = [j for j in joints if not j.end_site]
    n_cols = sum(len(j.pos_axes) + 3 for j in channeled)
    j_count = len(joints)
    rotations = np.zeros((frame_count, j_count, 4))
    rotations[..., 0] = 1.0
    root_positions = np.tile(np.asarray(joints[0].offset), (frame_count, 1))
    index_of = {id(j): i for i, j in enumerate(joints)}

    for f, (no, toks) in enumerate(data_rows):
        if len(toks) != n_cols:
            raise BvhParseError(f"expected {n_cols} values per frame, found {len(toks)}", no)
        try:
            values = [float(x) for x in toks]
        except ValueError:
            bad = next(x for x in toks if not _is_float(x))
            raise BvhParseError(f"non-numeric motion value {bad!r}", no) from None
        if not all(math.isfinite(v) for v in values):
            raise BvhParseError("non-finite motion value", no)
        col = 0
        for j in channeled:
            for axis in j.pos_axes:
                root_positions[f, axis] += values[col]
                col += 1
            angles = values[col : col + 3]
            col += 3
            rotations[f, index_of[id(j)]] = quat.from_euler_deg(j.rot_order, np.asarray(angles))

    offsets = np.array([j.offset for j in joints])
    offsets[0] = 0.0
    try:
        topology = SkeletonTopology(
            names=[j.name for j in joints],
            parents=np.array([j.parent for j in joints]),
            offsets=offsets,
            end_site=np.array([j.end_site for j in joints]),
        )
        return MotionClip(topology, rotations, root_positions, frame_time)
    except ValueError as e:
        raise BvhParseError(f"file violates skeleton constraints: {e}") from None


def _is_float(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _fmt(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _check_name(name: str):
    if not name or any(c.isspace() for c in name) or "{" in name or "}" in name:
        raise ValueError(f"joint name {name!r} cannot be written to a motion file")


def write_bvh(clip: MotionClip) -> str:
    """Serialize a clip; raises ValueError on non-finite values."""
    topo = clip.topology
    bad = ~np.isfinite(clip.rotations).all(axis=2)
    if bad.any():
        f, j = np.argwhere(bad)[0]
        raise ValueError(f"non-finite rotation at frame {f}, joint {topo.names[j]!r}")
    bad_t = ~np.isfinite(clip.root_positions).all(axis=1)
    if bad_t.any():
        f = int(np.argwhere(bad_t)[0][0])
        raise ValueError(f"non-finite root translation at frame {f}, joint {topo.names[0]!r}")

    for name, is_end in zip(topo.names, topo.end_site):
        if not is_end:
            _check_name(name)

    lines = ["HIERARCHY"]
    order: list[int] = []  # channeled joints in written order
    rot = "Zrotation Xrotation Yrotation"
    stack: list[tuple[int, int, bool]] = [(0, 0, False)]  # (joint, depth, closing)
    while stack:
        idx, depth, closing = stack.pop()
        pad = "\t" * depth
        if closing:
            lines.append(pad + "}")
            continue
        ox, oy, oz = topo.offsets[idx]
        if topo.end_site[idx]:
            lines.append(f"{pad}End Site")
            lines.append(pad + "{")
            lines.append(f"{pad}\tOFFSET {_fmt(ox)} {_fmt(oy)} {_fmt(oz)}")
            lines.append(pad + "}")
            continue
        lines.append(f"{pad}{'ROOT' if idx == 0 else 'JOINT'} {topo.names[idx]}")
        lines.append(pad + "{")
        lines.append(f"{pad}\tOFFSET {_fmt(ox)} {_fmt(oy)} {_fmt(oz)}")
        if idx == 0:
            lines.append(f"{pad}\tCHANNELS 6 Xposition Yposition Zposition {rot}")
        else:
            lines.append(f"{pad}\tCHANNELS 3 {rot}")
        order.append(idx)
        stack.append((idx, depth, True))
        for child in reversed(topo.children(idx)):
            stack.append((child, depth + 1, False))
    lines.append("MOTION")
    lines.append(f"Frames: {clip.frame_count}")
    lines.append(f"Frame Time: {_fmt(clip.frame_time)}")
    for f in range(clip.frame_count):
        cols: list[str] = []
        for idx in order:
            if idx == 0:
                cols.extend(_fmt(v) for v in clip.root_positions[f])
            angles = quat.to_euler_deg(WRITE_ROTATION_ORDER, clip.rotations[f, idx])
            cols.extend(_fmt(a) for a in angles)
        lines.append(" ".join(cols))
    return "\n".join(lines) + "\n"
