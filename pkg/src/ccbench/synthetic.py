"""Discretized spectral image formation and synthetic benchmark datasets.

Pixels are rendered as

    f_c(x) = gain * sum_lambda I(lambda) R(x, lambda) rho_c(lambda) dlambda

on a 400-700 nm grid with 10 nm steps, and the sensor-side illuminant is
the same sum with R = 1. Every rendered value is snapped to a dyadic grid
fine enough that adding and removing an integer black level is exact in
float64, which makes pedestal round trips bit-exact.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import constants

from .errors import DataError
from .estimators import Illuminant
from .groundtruth import GroundTruthTable, PatchAnnotation, write_annotations
from .imaging import LinearImage, write_json, write_ppm16

WAVELENGTHS = np.arange(400.0, 701.0, 10.0)
STEP_NM = 10.0

# neutral row of a classic 24-patch chart, white to black
ACHROMATIC_LEVELS = (0.9, 0.6, 0.35, 0.2, 0.09, 0.03)
CHART_FRAME_REFLECTANCE = 0.005

DEFAULT_PEAKS = (600.0, 550.0, 450.0)
DEFAULT_WIDTH_NM = 30.0
DEFAULT_BLACK = 129.0
DEFAULT_SATURATION = 3692.0

_C2 = constants.h * constants.c / constants.k  # second radiation constant, m K


def planckian_spd(cct: float, wavelengths=WAVELENGTHS) -> np.ndarray:
    """Black-body spectral radiance at ``cct`` kelvin, scaled to unit max."""
    if not 1000.0 <= cct <= 20000.0:
        raise DataError(f"CCT must be within 1000-20000 K, got {cct}")
    lam = np.asarray(wavelengths, dtype=np.float64) * 1e-9
    radiance = lam**-5 / np.expm1(_C2 / (lam * cct))
    return radiance / radiance.max()


def gaussian_sensitivities(peaks=DEFAULT_PEAKS, width: float = DEFAULT_WIDTH_NM,
                           shift: float = 0.0, channel_gains=(1.0, 1.0, 1.0),
                           wavelengths=WAVELENGTHS) -> np.ndarray:
    """3 x N Gaussian channel sensitivities (R, G, B rows), peaks moved by ``shift``."""
    lam = np.asarray(wavelengths, dtype=np.float64)
    centers = np.asarray(peaks, dtype=np.float64) + shift
    curves = np.exp(-0.5 * ((lam[None, :] - centers[:, None]) / width) ** 2)
    return curves * np.asarray(channel_gains, dtype=np.float64)[:, None]


@dataclass(frozen=True, eq=False)
class CameraModel:
    sensitivities: np.ndarray
    black_level: np.ndarray = DEFAULT_BLACK
    saturation_level: np.ndarray = DEFAULT_SATURATION
    gain: float = 1.0
    camera_id: str = "camera"

    def __post_init__(self):
        sens = np.array(self.sensitivities, dtype=np.float64)
        if sens.shape != (3, WAVELENGTHS.size):
            raise DataError(f"sensitivities must be 3x{WAVELENGTHS.size}, got {sens.shape}")
        if np.any(sens < 0) or np.any(sens.sum(axis=1) == 0):
            raise DataError("sensitivities must be nonnegative and not identically zero")
        black = np.broadcast_to(np.asarray(self.black_level, np.float64), (3,)).copy()
        sat = np.broadcast_to(np.asarray(self.saturation_level, np.float64), (3,)).copy()
        if np.any(black < 0) or np.any(black >= sat):
            raise DataError("camera needs 0 <= black_level < saturation_level")
        if not self.gain > 0:
            raise DataError("gain must be positive")
        for a in (sens, black, sat):
            a.setflags(write=False)
        object.__setattr__(self, "sensitivities", sens)
        object.__setattr__(self, "black_level", black)
        object.__setattr__(self, "saturation_level", sat)

    @classmethod
    def gaussian(cls, camera_id: str = "camera", shift: float = 0.0, **kwargs) -> CameraModel:
        width = kwargs.pop("width", DEFAULT_WIDTH_NM)
        peaks = kwargs.pop("peaks", DEFAULT_PEAKS)
        gains = kwargs.pop("channel_gains", (1.0, 1.0, 1.0))
        return cls(gaussian_sensitivities(peaks, width, shift, gains), camera_id=camera_id,
                   **kwargs)

    def response(self, spd) -> np.ndarray:
        """Sensor RGB of a unit-reflectance surface, before gain."""
        return np.asarray(spd, dtype=np.float64) @ self.sensitivities.T * STEP_NM

    def to_dict(self) -> dict:
        return {"camera_id": self.camera_id, "gain": self.gain,
                "black_level": self.black_level.tolist(),
                "saturation_level": self.saturation_level.tolist(),
                "sensitivities": self.sensitivities.tolist()}


@dataclass(frozen=True, eq=False)
class SpectralScene:
    """Reflectance layout lit by one or more illuminant spectra.

    ``labels[y, x]`` picks the reflectance of each pixel. With several
    spectra in ``illuminant_spd`` (shape K x 31), ``illumination`` picks the
    one lighting each pixel; spectrum 0 is the scene illuminant.
    """

    illuminant_spd: np.ndarray
    reflectances: np.ndarray
    labels: np.ndarray
    illumination: np.ndarray | None = None
    wavelengths: np.ndarray = field(default_factory=lambda: WAVELENGTHS.copy())

    def __post_init__(self):
        spd = np.atleast_2d(np.asarray(self.illuminant_spd, dtype=np.float64))
        refl = np.atleast_2d(np.asarray(self.reflectances, dtype=np.float64))
        labels = np.asarray(self.labels)
        n = WAVELENGTHS.size
        if not np.array_equal(self.wavelengths, WAVELENGTHS):
            raise DataError("scenes are sampled on 400-700 nm at 10 nm")
        if spd.shape[1] != n or refl.shape[1] != n:
            raise DataError(f"spectra must have {n} samples")
        if np.any(spd < 0):
            raise DataError("illuminant SPD must be nonnegative")
        if np.any(refl < 0) or np.any(refl > 1):
            raise DataError("reflectances must lie in [0, 1]")
        if labels.ndim != 2 or labels.min() < 0 or labels.max() >= refl.shape[0]:
            raise DataError("labels must be a 2-D map into the reflectance list")
        illum = np.zeros(labels.shape, np.intp) if self.illumination is None \
            else np.asarray(self.illumination, dtype=np.intp)
        if illum.shape != labels.shape or illum.min() < 0 or illum.max() >= spd.shape[0]:
            raise DataError("illumination map must match labels and index the SPD list")
        object.__setattr__(self, "illuminant_spd", spd)
        object.__setattr__(self, "reflectances", refl)
        object.__setattr__(self, "labels", labels.astype(np.intp))
        object.__setattr__(self, "illumination", illum)

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


def flat_scene(spd, reflectance: float, width: int = 8, height: int = 8) -> SpectralScene:
    return SpectralScene(spd, np.full((1, WAVELENGTHS.size), reflectance),
                         np.zeros((height, width), np.intp))


def _snap_quantum(limit: float) -> float:
    # smallest power of two q such that multiples of q up to `limit` are exact
    return 2.0 ** (math.ceil(math.log2(limit)) + 1 - 53) if limit > 0 else 2.0 ** -1074


def render(scene: SpectralScene, cam: CameraModel, inject_black: bool = False,
           noise_sigma: float = 0.0, rng: np.random.Generator | None = None
           ) -> tuple[LinearImage, Illuminant]:
    """Render a scene through a camera.

    Signals clip at ``saturation_level - black_level``. Without
    ``inject_black`` the image is returned as already black-subtracted
    (black level 0); with it the pedestal is added after clipping and the
    image is tagged as raw. Gaussian noise, if any, is added before the
    pedestal.
    """
    resp = np.einsum("kl,el,cl->kec", scene.illuminant_spd, scene.reflectances,
                     cam.sensitivities) * (STEP_NM * cam.gain)
    signal = resp[scene.illumination, scene.labels]
    if noise_sigma > 0:
        rng = np.random.default_rng() if rng is None else rng
        signal = signal + rng.normal(0.0, noise_sigma, signal.shape)

    limit = cam.saturation_level - cam.black_level
    if np.all(signal >= limit):
        raise DataError("gain saturates every pixel; lower the exposure")
    # the same grid with or without the pedestal, so subtraction is exact
    peak = np.minimum(signal.reshape(-1, 3).max(axis=0), limit) + cam.black_level
    q = _snap_quantum(float(peak.max()))
    signal = np.round(signal / q) * q
    truth = Illuminant(cam.response(scene.illuminant_spd[0]))

    if inject_black:
        data = np.clip(signal + cam.black_level, 0.0, cam.saturation_level)
        img = LinearImage(data, cam.black_level, cam.saturation_level,
                          cam.camera_id, black_subtracted=False)
    else:
        data = np.clip(signal, 0.0, limit)
        img = LinearImage(data, 0.0, limit, cam.camera_id, black_subtracted=True)
    return img, truth


def random_reflectance(rng: np.random.Generator) -> np.ndarray:
    """Smooth spectrum: a clamped sum of three random cosine harmonics."""
    t = (WAVELENGTHS - WAVELENGTHS[0]) / (WAVELENGTHS[-1] - WAVELENGTHS[0])
    base = rng.uniform(0.1, 0.7)
    amps = rng.uniform(-0.25, 0.25, 3)
    phases = rng.uniform(0.0, 2 * np.pi, 3)
    k = np.arange(1, 4)[:, None]
    r = base + np.sum(amps[:, None] * np.cos(np.pi * k * t[None, :] + phases[:, None]), axis=0)
    return np.clip(r, 0.0, 1.0)


def chart_geometry(width: int, height: int) -> tuple[int, list[np.ndarray]]:
    """Top row of the chart band and the six achromatic patch quads."""
    band = height // 4
    side = band - 4
    gap = max(side // 4, 1)
    if 6 * side + 5 * gap > width - 4:
        side = (width - 4 - 5 * gap) // 6
    if side < 4:
        raise DataError(f"{width}x{height} is too small for a 6-patch chart")
    top = height - band
    x0 = (width - (6 * side + 5 * gap)) // 2
    y0 = top + (band - side) // 2
    quads = []
    for i in range(6):
        x = x0 + i * (side + gap)
        quads.append(np.array([[x, y0], [x + side, y0], [x + side, y0 + side], [x, y0 + side]],
                              dtype=np.float64))
    return top, quads


def make_scene(rng: np.random.Generator, spd, width: int = 96, height: int = 64,
               tiles: tuple[int, int] = (4, 3)) -> tuple[SpectralScene, list[np.ndarray]]:
    """Random tiled surfaces above a chart band holding the neutral patch row."""
    top, quads = chart_geometry(width, height)
    nx, ny = tiles
    n = WAVELENGTHS.size
    refl = [random_reflectance(rng) for _ in range(nx * ny)]
    labels = np.empty((height, width), np.intp)
    rows = np.minimum(np.arange(top) * ny // top, ny - 1)
    cols = np.minimum(np.arange(width) * nx // width, nx - 1)
    labels[:top] = rows[:, None] * nx + cols[None, :]
    frame = len(refl)
    refl.append(np.full(n, CHART_FRAME_REFLECTANCE))
    labels[top:] = frame
    for level, quad in zip(ACHROMATIC_LEVELS, quads):
        (x0, y0), (x1, y1) = quad[0].astype(int), quad[2].astype(int)
        labels[y0:y1, x0:x1] = len(refl)
        refl.append(np.full(n, level))
    return SpectralScene(spd, np.array(refl), labels), quads


@dataclass(frozen=True, eq=False)
class SyntheticItem:
    image_id: str
    camera_id: str
    cct: float
    exposure: float
    gain: float
    scene: SpectralScene
    annotation: PatchAnnotation
    noise_seed: int


@dataclass(eq=False)
class SyntheticDataset:
    """In-memory synthetic benchmark: scenes, cameras and exact ground truth."""

    items: list[SyntheticItem]
    cameras: dict[str, CameraModel]
    seed: int
    config: dict
    noise_sigma: float = 0.0

    def __len__(self):
        return len(self.items)

    def camera_for(self, item: SyntheticItem, black_level=None) -> CameraModel:
        cam = self.cameras[item.camera_id]
        changes = {"gain": cam.gain * item.gain}
        if black_level is not None:
            changes["black_level"] = black_level
        return dataclasses.replace(cam, **changes)

    def render_item(self, item: SyntheticItem, inject_black: bool = True,
                    black_level=None, noise_sigma: float | None = None):
        sigma = self.noise_sigma if noise_sigma is None else noise_sigma
        rng = np.random.default_rng(item.noise_seed)
        return render(item.scene, self.camera_for(item, black_level), inject_black, sigma, rng)

    def true_illuminants(self) -> dict[str, Illuminant]:
        return {it.image_id: Illuminant(self.cameras[it.camera_id].response(it.scene.illuminant_spd[0]))
                for it in self.items}

    def ground_truth(self) -> GroundTruthTable:
        truth = self.true_illuminants()
        return GroundTruthTable.from_items(
            (it.image_id, truth[it.image_id], it.camera_id) for it in self.items)

    def annotations(self) -> dict[str, PatchAnnotation]:
        return {it.image_id: it.annotation for it in self.items}

    def write(self, out_dir, inject_black: bool = True) -> dict:
        """Write images, sidecars, annotations, ground truth and a manifest."""
        out = Path(out_dir)
        (out / "images").mkdir(parents=True, exist_ok=True)
        entries = []
        for item in self.items:
            img, _ = self.render_item(item, inject_black=inject_black)
            rel = f"images/{item.image_id}.ppm"
            write_ppm16(img, out / rel)
            entries.append({"image_id": item.image_id, "image": rel,
                            "sidecar": f"images/{item.image_id}.meta.json",
                            "camera_id": item.camera_id, "cct": item.cct,
                            "exposure": item.exposure})
        write_annotations([it.annotation for it in self.items], out / "annotations.json")
        self.ground_truth().to_csv(out / "ground_truth.csv")
        manifest = {
            "images": entries,
            "annotations": "annotations.json",
            "ground_truth": "ground_truth.csv",
            "cameras": {k: c.to_dict() for k, c in self.cameras.items()},
            "camera_assignment": {it.image_id: it.camera_id for it in self.items},
            "config": self.config,
        }
        write_json(out / "manifest.json", manifest)
        return manifest


def make_benchmark(n_images: int, cameras=None, cct_range=(2500.0, 7500.0), seed: int = 0,
                   split=None, width: int = 96, height: int = 64,
                   exposure_range=(0.35, 1.1), noise_sigma: float = 0.0,
                   inset: float = 0.15) -> SyntheticDataset:
    """Seeded synthetic stand-in for a real benchmark.

    Each image gets a Planckian illuminant drawn from ``cct_range``, random
    smooth surfaces and a neutral patch row. Auto exposure maps a white
    surface to ``exposure`` times the usable signal range, so exposures
    above about 1.09 clip the brightest patch. With several cameras, images
    are assigned in contiguous blocks of sizes ``split`` (even by default).
    Randomness for image i comes from ``(seed, i)`` only.
    """
    if n_images < 1:
        raise DataError("need at least one image")
    if cameras is None:
        cameras = [CameraModel.gaussian("camera_a")]
    elif isinstance(cameras, CameraModel):
        cameras = [cameras]
    cameras = list(cameras)
    ids = [c.camera_id for c in cameras]
    if len(set(ids)) != len(ids):
        raise DataError("camera ids must be unique")
    if split is None:
        base, extra = divmod(n_images, len(cameras))
        split = [base + (i < extra) for i in range(len(cameras))]
    if len(split) != len(cameras) or sum(split) != n_images or min(split) < 0:
        raise DataError("split must give one nonnegative count per camera summing to n_images")
    assignment = [cam for cam, count in zip(cameras, split) for _ in range(count)]

    lo, hi = cct_range
    items = []
    for i, cam in enumerate(assignment):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        cct = float(rng.uniform(lo, hi))
        spd = planckian_spd(cct)
        scene, quads = make_scene(rng, spd, width, height)
        exposure = float(rng.uniform(*exposure_range))
        white = cam.gain * cam.response(spd).max()
        usable = float((cam.saturation_level - cam.black_level).min())
        image_id = f"img{i:04d}"
        items.append(SyntheticItem(
            image_id=image_id, camera_id=cam.camera_id, cct=cct, exposure=exposure,
            gain=exposure * usable / white, scene=scene,
            annotation=PatchAnnotation(image_id, tuple(quads), inset),
            noise_seed=int(rng.integers(2**63)),
        ))
    config = {"n_images": n_images, "cameras": ids, "cct_range": [float(lo), float(hi)],
              "seed": seed, "split": list(split), "width": width, "height": height,
              "exposure_range": [float(v) for v in exposure_range],
              "noise_sigma": noise_sigma, "inset": inset}
    return SyntheticDataset(items, {c.camera_id: c for c in cameras}, seed, config, noise_sigma)


def manifest_json(manifest: dict) -> str:
    return json.dumps(manifest, indent=2, sort_keys=True) + "\n"
