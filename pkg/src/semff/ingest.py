"""Loading frames, detections, feature matrices and flow caches from disk."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

NUM_CLASSES = 80
IMAGE_SUFFIXES = (".png", ".ppm")

FEATURE_MAGIC = b"SFFM"
FLOW_MAGIC = b"SFFL"
FORMAT_VERSION = 1


class InputError(ValueError):
    """Raised for unreadable or inconsistent input files."""


@dataclass
class FrameSequence:
    frames: list
    fps: float = 30.0
    paths: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.frames) < 2:
            raise InputError("need at least 2 frames")
        shape = self.frames[0].shape
        for k, f in enumerate(self.frames):
            if f.shape != shape:
                name = self.paths[k] if self.paths else f"frame {k}"
                raise InputError(f"frame dimensions differ: {name} is {f.shape[1]}x{f.shape[0]}, "
                                 f"expected {shape[1]}x{shape[0]}")

    @property
    def n(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].shape[0]

    @property
    def width(self) -> int:
        return self.frames[0].shape[1]

    def __len__(self):
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]


@dataclass(frozen=True)
class Detection:
    class_id: int
    confidence: float
    bbox: tuple  # (x, y, w, h) in pixels


@dataclass
class DetectionSet:
    per_frame: list

    @property
    def n(self) -> int:
        return len(self.per_frame)

    def __len__(self):
        return len(self.per_frame)

    def __getitem__(self, i):
        return self.per_frame[i]

    @classmethod
    def empty(cls, n: int) -> "DetectionSet":
        return cls([[] for _ in range(n)])


def _numeric_stem(path: Path) -> int:
    try:
        return int(path.stem)
    except ValueError:
        raise InputError(f"frame file name is not an integer stem: {path.name}") from None


def read_image(path: str | Path) -> np.ndarray:
    """Read a PNG or binary PPM as an ``(H, W, 3)`` uint8 RGB array."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise InputError(f"unreadable image {path.name}: {exc}") from exc


def write_image(path: str | Path, frame: np.ndarray) -> None:
    Image.fromarray(np.asarray(frame, dtype=np.uint8)).save(path)


def load_frame_sequence(dir_path: str | Path, fps: float = 30.0) -> FrameSequence:
    """Load all ``<integer>.png|.ppm`` files of a directory, ordered by numeric stem."""
    dir_path = Path(dir_path)
    if not dir_path.is_dir():
        raise InputError(f"frame directory not found: {dir_path}")
    paths = [p for p in dir_path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES]
    paths.sort(key=_numeric_stem)
    if len(paths) < 2:
        raise InputError("need at least 2 frames")
    frames = [read_image(p) for p in paths]
    return FrameSequence(frames, fps=fps, paths=[p.name for p in paths])


def parse_detection(record: dict, n: int) -> tuple:
    try:
        frame = int(record["frame"])
        class_id = int(record.get("class_id", record.get("class")))
        conf = float(record.get("confidence", record.get("conf")))
        bbox = tuple(float(b) for b in record["bbox"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed detection record {record!r}") from exc
    if len(bbox) != 4:
        raise InputError(f"bbox must have 4 entries: {record!r}")
    if not 0 <= class_id < NUM_CLASSES:
        raise InputError(f"class out of range: {class_id}")
    if not 0.0 <= conf <= 1.0:
        raise InputError(f"confidence out of range: {conf}")
    if not 0 <= frame < n:
        raise InputError(f"frame index out of range: {frame} (n={n})")
    return frame, Detection(class_id, conf, bbox)


def clamp_bbox(bbox, width: int, height: int) -> tuple:
    x, y, w, h = bbox
    x0, y0 = min(max(x, 0.0), width), min(max(y, 0.0), height)
    x1, y1 = min(max(x + w, 0.0), width), min(max(y + h, 0.0), height)
    return (x0, y0, x1 - x0, y1 - y0)


def load_detections(path: str | Path, n: int, frame_size: tuple | None = None) -> DetectionSet:
    """Read JSON Lines detections and bucket them per frame.

    ``frame_size`` is ``(width, height)``; when given, boxes are clamped to
    the frame.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"detections file not found: {path}")
    out = DetectionSet.empty(n)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path.name}:{lineno}: invalid JSON") from exc
            frame, det = parse_detection(record, n)
            if frame_size is not None:
                det = Detection(det.class_id, det.confidence, clamp_bbox(det.bbox, *frame_size))
            out.per_frame[frame].append(det)
    return out


def save_detections(path: str | Path, detections: DetectionSet) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, dets in enumerate(detections.per_frame):
            for d in dets:
                fh.write(json.dumps({"frame": i, "class_id": d.class_id,
                                     "confidence": d.confidence, "bbox": list(d.bbox)}) + "\n")


def save_feature_matrix(path: str | Path, D: np.ndarray) -> None:
    """Write ``D`` (f x n) as header + column-major little-endian float32."""
    D = np.asarray(D)
    if D.ndim != 2:
        raise InputError("feature matrix must be 2-D")
    f, n = D.shape
    header = FEATURE_MAGIC + struct.pack("<III", FORMAT_VERSION, f, n)
    payload = np.asarray(D, dtype="<f4").ravel(order="F").tobytes()
    Path(path).write_bytes(header + payload)


def _load_feature_csv(path: Path) -> np.ndarray:
    lines = path.read_text(encoding="utf-8").split("\n")
    head = lines[0].strip().split(",")
    try:
        vals = dict(kv.split("=") for kv in head)
        f, n = int(vals["f"]), int(vals["n"])
    except (ValueError, KeyError):
        raise InputError(f"{path.name}: CSV header must read 'f=<rows>,n=<cols>'") from None
    body = [x for ln in lines[1:] for x in ln.replace(",", " ").split()]
    if len(body) != f * n:
        raise InputError(f"payload size mismatch: header says {f}x{n}={f * n}, found {len(body)} values")
    # CSV rows are feature rows
    return np.array(body, dtype=np.float64).reshape(f, n)


def load_feature_matrix(path: str | Path, mmap: bool = False) -> np.ndarray:
    """Load an f x n feature matrix (binary format or CSV with ``f=..,n=..`` header).

    The binary payload is float32; it is returned as float32 (memory-mapped
    when ``mmap`` is true), callers upcast as needed.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"feature file not found: {path}")
    if path.suffix.lower() == ".csv":
        return _load_feature_csv(path)
    with path.open("rb") as fh:
        header = fh.read(16)
    if len(header) < 16 or header[:4] != FEATURE_MAGIC:
        raise InputError(f"{path.name}: not a feature matrix file")
    version, f, n = struct.unpack("<III", header[4:])
    if version != FORMAT_VERSION:
        raise InputError(f"{path.name}: unsupported version {version}")
    size = path.stat().st_size - 16
    if size != 4 * f * n:
        raise InputError(f"payload size mismatch: header says {f}x{n}, payload has {size // 4} values")
    if mmap:
        flat = np.memmap(path, dtype="<f4", mode="r", offset=16, shape=(f * n,))
    else:
        flat = np.fromfile(path, dtype="<f4", offset=16)
    return flat.reshape((f, n), order="F")


def save_flow_grid(path: str | Path, dx: np.ndarray, dy: np.ndarray) -> None:
    """Write stacked flows, each array shaped ``(n, cells_y, cells_x)``."""
    dx, dy = np.asarray(dx), np.asarray(dy)
    if dx.shape != dy.shape or dx.ndim != 3:
        raise InputError("dx/dy must share shape (n, cells_y, cells_x)")
    n, cy, cx = dx.shape
    header = FLOW_MAGIC + struct.pack("<III", cx, cy, n)
    payload = np.stack([dx, dy], axis=-1).astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_flow_grid(path: str | Path) -> tuple:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != FLOW_MAGIC:
        raise InputError(f"{path.name}: not a flow grid file")
    cx, cy, n = struct.unpack("<III", raw[4:16])
    data = np.frombuffer(raw, dtype="<f4", offset=16)
    if data.size != n * cy * cx * 2:
        raise InputError("payload size mismatch")
    data = data.reshape(n, cy, cx, 2)
    return data[..., 0].astype(np.float64), data[..., 1].astype(np.float64)


def load_vector(path: str | Path) -> np.ndarray:
    """Per-frame real values, one per line (``.txt``) or a ``.npy`` array."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"file not found: {path}")
    if path.suffix == ".npy":
        return np.load(path)
    try:
        return np.loadtxt(path, dtype=np.float64, ndmin=1)
    except ValueError as exc:
        raise InputError(f"{path.name}: {exc}") from exc
