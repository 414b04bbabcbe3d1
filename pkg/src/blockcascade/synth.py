"""Synthetic image sequences with exact ground truth.

A :class:`SceneScript` describes a background (constant, flickering or
textured), moving rectangles, global gain ramps and instantaneous
background swaps ("light switches"). :func:`render` produces frames,
ground-truth masks and ground-truth centroid tracks.

Script files are INI-style::

    [scene]
    width = 160
    height = 120
    length = 300
    noise_sigma = 2
    seed = 7
    background = textured          # constant | flicker | textured
    background_color = 90,110,130
    texture_amplitude = 40         # textured only
    flicker_amplitude = 10         # flicker only
    flicker_period = 12            # flicker only, in frames

    [object walker]                # section name after "object" is the track id
    x = 20
    y = 50
    w = 20
    h = 20
    color = 220,40,40
    velocity = 1,0                 # pixels per frame, (dx, dy)
    enter = 220
    exit = 300                     # exclusive; omit for "until the end"

    [gain dusk]
    start = 200                    # gain ramps linearly 1 -> factor over
    end = 250                      # [start, end] and then holds
    factor = 1.3

    [lightswitch on]
    frame = 230                    # first frame showing the new background
    background = textured          # same background keys as [scene]
    background_color = 170,160,120
    background_seed = 99
"""
from configparser import ConfigParser
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import ndimage

__all__ = [
    "Background",
    "MovingObject",
    "GainRamp",
    "LightSwitch",
    "SceneScript",
    "ScriptError",
    "render",
    "parse_script",
    "load_script",
]


class ScriptError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scene script: " + "; ".join(self.problems))


@dataclass(frozen=True)
class Background:
    kind: str = "constant"
    color: tuple = (100, 100, 100)
    texture_amplitude: float = 40.0
    flicker_amplitude: float = 10.0
    flicker_period: float = 12.0
    seed: int = 0


@dataclass(frozen=True)
class MovingObject:
    name: str
    x: int
    y: int
    w: int
    h: int
    color: tuple = (220, 40, 40)
    velocity: tuple = (0.0, 0.0)
    enter: int = 0
    exit: int = None

    def position(self, t):
        dt = t - self.enter
        return (int(math.floor(self.x + self.velocity[0] * dt + 0.5)),
                int(math.floor(self.y + self.velocity[1] * dt + 0.5)))

    def active(self, t, length):
        end = length if self.exit is None else self.exit
        return self.enter <= t < end


@dataclass(frozen=True)
class GainRamp:
    start: int
    end: int
    factor: float

    def gain(self, t):
        if t < self.start:
            return 1.0
        if t >= self.end:
            return self.factor
        return 1.0 + (self.factor - 1.0) * (t - self.start) / (self.end - self.start)


@dataclass(frozen=True)
class LightSwitch:
    frame: int
    background: Background


@dataclass
class SceneScript:
    width: int
    height: int
    length: int
    background: Background = field(default_factory=Background)
    objects: list = field(default_factory=list)
    gains: list = field(default_factory=list)
    switches: list = field(default_factory=list)
    noise_sigma: float = 0.0
    seed: int = 0

    def problems(self):
        out = []
        if self.width < 1 or self.height < 1:
            out.append(f"frame size {self.width}x{self.height} must be positive")
        if self.length < 1:
            out.append(f"length {self.length} must be positive")
        if self.noise_sigma < 0:
            out.append("noise_sigma must be >= 0")
        for bg in [self.background] + [s.background for s in self.switches]:
            if bg.kind not in ("constant", "flicker", "textured"):
                out.append(f"unknown background kind {bg.kind!r}")
            if len(bg.color) != 3 or not all(0 <= c <= 255 for c in bg.color):
                out.append(f"background colour {bg.color} outside 0..255")
            if bg.kind == "flicker" and bg.flicker_period <= 0:
                out.append("flicker_period must be positive")
        names = set()
        for ob in self.objects:
            if ob.name in names:
                out.append(f"duplicate object name {ob.name!r}")
            names.add(ob.name)
            if ob.w < 1 or ob.h < 1:
                out.append(f"object {ob.name}: size {ob.w}x{ob.h} must be positive")
            if len(ob.color) != 3 or not all(0 <= c <= 255 for c in ob.color):
                out.append(f"object {ob.name}: colour {ob.color} outside 0..255")
            end = self.length if ob.exit is None else ob.exit
            if not 0 <= ob.enter < end <= self.length:
                out.append(f"object {ob.name}: frames [{ob.enter}, {end}) outside [0, {self.length})")
                continue
            # motion is linear, so the extremes are at the first and last frame
            for t in (ob.enter, end - 1):
                x, y = ob.position(t)
                if x < 0 or y < 0 or x + ob.w > self.width or y + ob.h > self.height:
                    out.append(f"object {ob.name}: leaves the frame at t={t} (x={x}, y={y})")
                    break
        for g in self.gains:
            if not g.start < g.end:
                out.append(f"gain ramp start {g.start} must precede end {g.end}")
            if g.factor <= 0:
                out.append(f"gain factor {g.factor} must be positive")
        for s in self.switches:
            if not 0 <= s.frame < self.length:
                out.append(f"light switch at {s.frame} outside [0, {self.length})")
        return out

    def validate(self):
        problems = self.problems()
        if problems:
            raise ScriptError(problems)
        return self


# ----------------------------------------------------------------- render

def _background_layers(bg, width, height):
    """Static base image plus (for flicker) per-pixel amplitude and phase."""
    rng = np.random.default_rng([bg.seed, 0xB6])
    base = np.empty((height, width, 3))
    base[:] = np.asarray(bg.color, dtype=np.float64)
    if bg.kind == "textured":
        noise = rng.standard_normal((height, width, 3))
        smooth = ndimage.gaussian_filter(noise, sigma=(2.0, 2.0, 0.0))
        smooth /= max(np.abs(smooth).max(), 1e-12)
        base += bg.texture_amplitude * smooth
    amp = phase = None
    if bg.kind == "flicker":
        amp = bg.flicker_amplitude * rng.uniform(0.5, 1.0, size=(height, width, 1))
        phase = rng.uniform(0.0, 2.0 * math.pi, size=(height, width, 1))
    return base, amp, phase


def _background_at(layers, bg, t):
    base, amp, phase = layers
    if amp is None:
        return base.copy()
    return base + amp * np.sin(2.0 * math.pi * t / bg.flicker_period + phase)


def render(script):
    """Return ``(frames, masks, tracks)`` for a validated script.

    Frames are uint8 ``(H, W, 3)``, masks uint8 ``(H, W)`` in {0, 255}, and
    tracks map frame index to ``[(object_name, (cx, cy)), ...]``.
    """
    script.validate()
    w, h = script.width, script.height
    switches = sorted(script.switches, key=lambda s: s.frame)
    scenes = [(0, script.background)] + [(s.frame, s.background) for s in switches]
    layers = {id(bg): _background_layers(bg, w, h) for _, bg in scenes}

    frames, masks, tracks = [], [], {}
    for t in range(script.length):
        bg = [b for start, b in scenes if start <= t][-1]
        img = _background_at(layers[id(bg)], bg, t)
        mask = np.zeros((h, w), dtype=np.uint8)
        objs = []
        for ob in script.objects:
            if not ob.active(t, script.length):
                continue
            x, y = ob.position(t)
            img[y:y + ob.h, x:x + ob.w] = np.asarray(ob.color, dtype=np.float64)
            mask[y:y + ob.h, x:x + ob.w] = 255
            objs.append((ob.name, (x + (ob.w - 1) / 2.0, y + (ob.h - 1) / 2.0)))
        gain = 1.0
        for g in script.gains:
            gain *= g.gain(t)
        img *= gain
        if script.noise_sigma > 0:
            rng = np.random.default_rng([script.seed, t])
            img += rng.normal(0.0, script.noise_sigma, size=img.shape)
        frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
        masks.append(mask)
        tracks[t] = objs
    return frames, masks, tracks


# ----------------------------------------------------------------- parsing

def _triple(raw, key):
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 3:
        raise ScriptError([f"{key}: expected three comma-separated values, got {raw!r}"])
    return tuple(int(p) for p in parts)


def _pair(raw, key):
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise ScriptError([f"{key}: expected two comma-separated values, got {raw!r}"])
    return tuple(float(p) for p in parts)


def _parse_background(sec):
    return Background(
        kind=sec.get("background", "constant").strip(),
        color=_triple(sec.get("background_color", "100,100,100"), "background_color"),
        texture_amplitude=sec.getfloat("texture_amplitude", 40.0),
        flicker_amplitude=sec.getfloat("flicker_amplitude", 10.0),
        flicker_period=sec.getfloat("flicker_period", 12.0),
        seed=sec.getint("background_seed", sec.getint("seed", 0)),
    )


_REQUIRED = {
    "object": ("x", "y", "w", "h"),
    "gain": ("start", "end", "factor"),
    "lightswitch": ("frame",),
}


def parse_script(text):
    cp = ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except Exception as exc:
        raise ScriptError([f"unparsable script: {exc}"]) from None
    if not cp.has_section("scene"):
        raise ScriptError(["missing [scene] section"])
    missing = [k for k in ("width", "height", "length") if k not in cp["scene"]]
    if missing:
        raise ScriptError([f"[scene] lacks {k}" for k in missing])
    try:
        sc = cp["scene"]
        script = SceneScript(
            width=sc.getint("width"), height=sc.getint("height"),
            length=sc.getint("length"),
            background=_parse_background(sc),
            noise_sigma=sc.getfloat("noise_sigma", 0.0),
            seed=sc.getint("seed", 0),
        )
        for name in cp.sections():
            if name == "scene":
                continue
            kind, _, label = name.partition(" ")
            sec = cp[name]
            lacking = [k for k in _REQUIRED.get(kind, ()) if k not in sec]
            if lacking:
                raise ScriptError([f"[{name}] lacks {k}" for k in lacking])
            if kind == "object":
                exit_raw = sec.get("exit", "").strip()
                script.objects.append(MovingObject(
                    name=label.strip() or str(len(script.objects)),
                    x=sec.getint("x"), y=sec.getint("y"),
                    w=sec.getint("w"), h=sec.getint("h"),
                    color=_triple(sec.get("color", "220,40,40"), "color"),
                    velocity=_pair(sec.get("velocity", "0,0"), "velocity"),
                    enter=sec.getint("enter", 0),
                    exit=int(exit_raw) if exit_raw else None,
                ))
            elif kind == "gain":
                script.gains.append(GainRamp(start=sec.getint("start"), end=sec.getint("end"),
                                             factor=sec.getfloat("factor")))
            elif kind == "lightswitch":
                script.switches.append(LightSwitch(frame=sec.getint("frame"),
                                                   background=_parse_background(sec)))
            else:
                raise ScriptError([f"unknown section [{name}]"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScriptError):
            raise
        raise ScriptError([f"bad value: {exc}"]) from None
    return script.validate()


def load_script(path):
    with open(path) as fh:
        return parse_script(fh.read())
