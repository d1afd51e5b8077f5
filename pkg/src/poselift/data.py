"""Synthetic action-conditioned pose sequences and their on-disk format.

Each action is a procedural motion motif: joints oscillate in the image
plane with an action-specific frequency and amplitude pattern, while the
depth coordinate follows an action-specific program (a static posture
offset plus an excursion phase-locked to the visible motion). Depth is
therefore invisible in the 2D input but predictable once the action is
known, which is exactly the ambiguity structure the model targets.

Units: 3D coordinates are in "dataset units" (millimeter-like); 2D inputs
are dimensionless in [-1, 1].
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError

SUPPORTED_FRAMES = (9, 27, 81, 243)
FORMAT_VERSION = 1
TENSOR_MAGIC = b"PLTENSOR"

# Fixed entropy for motif-identity randomness (joint direction patterns);
# independent of the dataset seed so action definitions are stable.
_MOTIF_ENTROPY = 1618033988

_BASE_NAMES = ("sway", "stride", "reach", "crouch")
_BASE_FREQ = (0.8, 1.15, 1.55, 2.0)          # cycles per window
_BASE_EXCURSION = (0.0, 30.0, 60.0, 100.0)   # dynamic depth amplitude
_BASE_DEPTH_OFFSET = (0.0, 45.0, 75.0, 105.0)  # static per-action depth posture

_TEMPLATE_XY = 140.0      # template skeleton span
_TEMPLATE_Z = 60.0
_POSTURE_SCALE = 22.0     # per-action posture delta
_AMP_BASE = 10.0          # baseline oscillation for all joints
_AMP_SIGNATURE = 22.0     # extra oscillation on the action's signature group
_DRIFT_XY = 15.0          # per-sample global drift
_DRIFT_Z = 5.0
_OBS_NOISE = 3.0          # 2D observation noise, in units before scaling
_SCALE_2D = 320.0         # units-per-1.0 of normalized image coordinates


@dataclass(frozen=True)
class ActionMotif:
    """Procedural parameters of one action."""
    index: int
    name: str
    frequency: float          # oscillation cycles per window
    signature_group: int      # which third of the skeleton moves most (0/1/2)
    depth_excursion: float    # amplitude of the phase-locked depth oscillation
    depth_offset: float       # magnitude of the static depth posture
    noise_scale: float        # 3D trajectory noise sigma

    def joint_fields(self, joints: int) -> dict[str, np.ndarray]:
        """Per-joint direction patterns, deterministic in (action, joints)."""
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=_MOTIF_ENTROPY, spawn_key=(self.index, joints)))
        posture = rng.normal(scale=_POSTURE_SCALE, size=(joints, 3))
        amp = np.full(joints, _AMP_BASE)
        group = np.array_split(np.arange(1, joints), 3)[self.signature_group]
        amp[group] += _AMP_SIGNATURE
        amp *= rng.uniform(0.85, 1.15, size=joints)
        phase_x = rng.uniform(0, 2 * np.pi, size=joints)
        phase_y = rng.uniform(0, 2 * np.pi, size=joints)
        depth_dir = rng.uniform(-1.0, 1.0, size=joints)
        depth_offset_dir = rng.uniform(-1.0, 1.0, size=joints)
        depth_lag = rng.uniform(0, 2 * np.pi)
        return {"posture": posture, "amp": amp, "phase_x": phase_x,
                "phase_y": phase_y, "depth_dir": depth_dir,
                "depth_offset_dir": depth_offset_dir,
                "depth_lag": np.array(depth_lag)}


def default_motifs(num_actions: int) -> list[ActionMotif]:
    """Motif table; the first four are named, further actions extend the pattern."""
    motifs = []
    for k in range(num_actions):
        base = k % 4
        tier = k // 4
        motifs.append(ActionMotif(
            index=k,
            name=_BASE_NAMES[k] if k < 4 else f"action{k}",
            frequency=_BASE_FREQ[base] + 0.45 * tier + 0.07 * k,
            signature_group=k % 3,
            depth_excursion=_BASE_EXCURSION[base] + 6.0 * tier,
            depth_offset=_BASE_DEPTH_OFFSET[base] + 5.0 * tier,
            noise_scale=1.5,
        ))
    return motifs


def hard_action_names(motifs: list[ActionMotif]) -> list[str]:
    """The designated hard action: the motif with the largest depth excursion."""
    worst = max(motifs, key=lambda m: m.depth_excursion + m.depth_offset)
    return [worst.name]


def _skeleton_template(joints: int) -> np.ndarray:
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=_MOTIF_ENTROPY, spawn_key=(9999, joints)))
    template = np.empty((joints, 3))
    template[:, 0] = rng.uniform(-_TEMPLATE_XY, _TEMPLATE_XY, size=joints)
    template[:, 1] = rng.uniform(-_TEMPLATE_XY, _TEMPLATE_XY, size=joints)
    template[:, 2] = rng.uniform(-_TEMPLATE_Z, _TEMPLATE_Z, size=joints)
    template[0] = 0.0
    return template


@dataclass
class DatasetManifest:
    version: int
    num_actions: int
    frames: int
    joints: int
    seed: int
    action_names: list[str]
    hard_actions: list[str]
    train_count: int
    eval_count: int


@dataclass
class Split:
    input2d: np.ndarray   # (N, F, J, 2) float32 in [-1, 1]
    target3d: np.ndarray  # (N, J, 3) float32, root-relative
    labels: np.ndarray    # (N,) int64 in [0, K)

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class PoseDataset:
    manifest: DatasetManifest
    train: Split
    eval: Split
    motifs: list[ActionMotif] = field(default_factory=list)


def _generate_sample(motif: ActionMotif, fields: dict[str, np.ndarray],
                     template: np.ndarray, frames: int,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    joints = template.shape[0]
    t = np.arange(frames)[:, None]                        # (F, 1)
    omega = 2 * np.pi * motif.frequency / frames
    phase = rng.uniform(0, 2 * np.pi)
    drift = np.array([rng.normal(scale=_DRIFT_XY), rng.normal(scale=_DRIFT_XY),
                      rng.normal(scale=_DRIFT_Z)])
    amp = fields["amp"] * rng.uniform(0.9, 1.1)

    pose = np.empty((frames, joints, 3))
    base = template + fields["posture"]
    pose[:, :, 0] = base[:, 0] + drift[0] + amp * np.sin(omega * t + phase + fields["phase_x"])
    pose[:, :, 1] = base[:, 1] + drift[1] + amp * np.cos(omega * t + phase + fields["phase_y"])
    pose[:, :, 2] = (base[:, 2] + drift[2]
                     + motif.depth_offset * fields["depth_offset_dir"]
                     + motif.depth_excursion * fields["depth_dir"]
                     * np.sin(omega * t + phase + fields["depth_lag"]))
    pose += rng.normal(scale=motif.noise_scale, size=pose.shape)

    observed = pose[:, :, :2] + rng.normal(scale=_OBS_NOISE, size=(frames, joints, 2))
    input2d = np.clip(observed / _SCALE_2D, -1.0, 1.0).astype(np.float32)
    center = pose[frames // 2]
    target3d = (center - center[0]).astype(np.float32)    # root-relative, root exactly 0
    return input2d, target3d


def _generate_split(motifs: list[ActionMotif], frames: int, joints: int,
                    n_per_action: int, seed: int, split_id: int) -> Split:
    template = _skeleton_template(joints)
    inputs, targets, labels = [], [], []
    for motif in motifs:
        fields = motif.joint_fields(joints)
        for i in range(n_per_action):
            rng = np.random.default_rng(np.random.SeedSequence(
                entropy=seed, spawn_key=(split_id, motif.index, i)))
            x2d, y3d = _generate_sample(motif, fields, template, frames, rng)
            inputs.append(x2d)
            targets.append(y3d)
            labels.append(motif.index)
    return Split(input2d=np.stack(inputs), target3d=np.stack(targets),
                 labels=np.array(labels, dtype=np.int64))


def gen_synthetic(num_actions: int, frames: int, joints: int,
                  train_per_action: int, eval_per_action: int,
                  seed: int) -> PoseDataset:
    """Generate disjoint train/eval splits, deterministic in every argument."""
    if num_actions < 2:
        raise ConfigError(f"need at least 2 actions, got {num_actions}")
    if joints < 4:
        raise ConfigError(f"need at least 4 joints, got {joints}")
    if frames not in SUPPORTED_FRAMES:
        raise ConfigError(
            f"unsupported sequence length {frames}; supported: {list(SUPPORTED_FRAMES)}")
    motifs = default_motifs(num_actions)
    train = _generate_split(motifs, frames, joints, train_per_action, seed, split_id=0)
    evals = _generate_split(motifs, frames, joints, eval_per_action, seed, split_id=1)
    manifest = DatasetManifest(
        version=FORMAT_VERSION, num_actions=num_actions, frames=frames,
        joints=joints, seed=seed,
        action_names=[m.name for m in motifs],
        hard_actions=hard_action_names(motifs),
        train_count=len(train), eval_count=len(evals))
    return PoseDataset(manifest=manifest, train=train, eval=evals, motifs=motifs)


# -- pixel-space normalization ------------------------------------------------

def normalize_2d(points: np.ndarray, width: float, height: float) -> np.ndarray:
    """Pixel coords (..., 2) to normalized coords; width scales both axes so
    the aspect ratio is preserved."""
    if width <= 0 or height <= 0:
        raise ConfigError(f"image dims must be positive, got {width}x{height}")
    points = np.asarray(points, dtype=np.float64)
    out = np.empty_like(points)
    out[..., 0] = (2.0 * points[..., 0] - width) / width
    out[..., 1] = (2.0 * points[..., 1] - height) / width
    return out


def denormalize_2d(points: np.ndarray, width: float, height: float) -> np.ndarray:
    if width <= 0 or height <= 0:
        raise ConfigError(f"image dims must be positive, got {width}x{height}")
    points = np.asarray(points, dtype=np.float64)
    out = np.empty_like(points)
    out[..., 0] = (points[..., 0] * width + width) / 2.0
    out[..., 1] = (points[..., 1] * width + height) / 2.0
    return out


# -- binary tensor blobs -------------------------------------------------------

def write_tensor_blob(buf: io.BufferedIOBase, array: np.ndarray) -> None:
    """magic(8) | u32 version | u32 ndim | u32 shape[ndim] | f32 data, all LE."""
    arr = np.asarray(array, dtype="<f4")   # asarray keeps 0-d shapes intact
    buf.write(TENSOR_MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
    buf.write(arr.tobytes())


def read_tensor_blob(buf: io.BufferedIOBase, offset: int = 0) -> tuple[np.ndarray, int]:
    """Read one blob; returns (array, bytes consumed). Raises FormatError with
    the absolute byte offset of the problem."""
    head = buf.read(8)
    if len(head) < 8:
        raise FormatError(f"truncated tensor blob: magic missing at byte {offset}")
    if head != TENSOR_MAGIC:
        raise FormatError(f"bad magic {head!r} at byte {offset}")
    meta = buf.read(8)
    if len(meta) < 8:
        raise FormatError(f"truncated tensor header at byte {offset + 8}")
    version, ndim = struct.unpack("<II", meta)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported tensor format version {version} at byte {offset + 8}")
    if ndim > 8:
        raise FormatError(f"implausible ndim {ndim} at byte {offset + 12}")
    shape_bytes = buf.read(4 * ndim)
    if len(shape_bytes) < 4 * ndim:
        raise FormatError(f"truncated shape header at byte {offset + 16}")
    shape = struct.unpack(f"<{ndim}I", shape_bytes)
    count = int(np.prod(shape)) if ndim else 1
    payload = buf.read(4 * count)
    if len(payload) < 4 * count:
        raise FormatError(
            f"truncated tensor data at byte {offset + 16 + 4 * ndim + len(payload)}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return arr, 16 + 4 * ndim + 4 * count


# -- dataset directory io --------------------------------------------------------

def _manifest_lines(manifest: DatasetManifest) -> str:
    return "".join(f"{k} = {v}\n" for k, v in [
        ("version", manifest.version),
        ("k", manifest.num_actions),
        ("frames", manifest.frames),
        ("joints", manifest.joints),
        ("seed", manifest.seed),
        ("action_names", ",".join(manifest.action_names)),
        ("hard_actions", ",".join(manifest.hard_actions)),
        ("train_count", manifest.train_count),
        ("eval_count", manifest.eval_count),
    ])


def parse_manifest(text: str) -> DatasetManifest:
    values: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"manifest line without '=': {line!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    try:
        manifest = DatasetManifest(
            version=int(values["version"]),
            num_actions=int(values["k"]),
            frames=int(values["frames"]),
            joints=int(values["joints"]),
            seed=int(values["seed"]),
            action_names=values["action_names"].split(","),
            hard_actions=[a for a in values.get("hard_actions", "").split(",") if a],
            train_count=int(values["train_count"]),
            eval_count=int(values["eval_count"]))
    except KeyError as exc:
        raise FormatError(f"manifest missing key {exc.args[0]!r}") from None
    if manifest.version != FORMAT_VERSION:
        raise FormatError(f"unsupported manifest version {manifest.version}")
    if len(manifest.action_names) != manifest.num_actions:
        raise FormatError(
            f"manifest k = {manifest.num_actions} but {len(manifest.action_names)} action names")
    if len(set(manifest.action_names)) != len(manifest.action_names):
        raise FormatError("manifest action names are not distinct")
    return manifest


def _write_split(path: Path, split: Split) -> None:
    with open(path, "wb") as fh:
        for i in range(len(split)):
            write_tensor_blob(fh, split.input2d[i])
            write_tensor_blob(fh, split.target3d[i])
            fh.write(struct.pack("<I", int(split.labels[i])))


def _read_split(path: Path, manifest: DatasetManifest, expected: int) -> Split:
    inputs, targets, labels = [], [], []
    offset = 0
    with open(path, "rb") as fh:
        for _ in range(expected):
            x2d, used = read_tensor_blob(fh, offset)
            offset += used
            if x2d.shape != (manifest.frames, manifest.joints, 2):
                raise FormatError(
                    f"record input2d shape {x2d.shape} does not match manifest "
                    f"({manifest.frames}, {manifest.joints}, 2)")
            y3d, used = read_tensor_blob(fh, offset)
            offset += used
            if y3d.shape != (manifest.joints, 3):
                raise FormatError(
                    f"record target3d shape {y3d.shape} does not match manifest")
            raw = fh.read(4)
            if len(raw) < 4:
                raise FormatError(f"truncated label at byte {offset}")
            label = struct.unpack("<I", raw)[0]
            offset += 4
            if label >= manifest.num_actions:
                raise FormatError(
                    f"label {label} out of range for manifest k = {manifest.num_actions}")
            inputs.append(x2d)
            targets.append(y3d)
            labels.append(label)
        if fh.read(1):
            raise FormatError(f"trailing bytes after {expected} records at byte {offset}")
    return Split(input2d=np.stack(inputs), target3d=np.stack(targets),
                 labels=np.array(labels, dtype=np.int64))


def save_dataset(dataset: PoseDataset, path: str | Path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    (path / "manifest.txt").write_text(_manifest_lines(dataset.manifest), encoding="utf-8")
    _write_split(path / "train.bin", dataset.train)
    _write_split(path / "eval.bin", dataset.eval)


def load_dataset(path: str | Path) -> PoseDataset:
    path = Path(path)
    manifest_path = path / "manifest.txt"
    if not manifest_path.exists():
        raise FormatError(f"no manifest.txt under {path}")
    manifest = parse_manifest(manifest_path.read_text(encoding="utf-8"))
    train = _read_split(path / "train.bin", manifest, manifest.train_count)
    evals = _read_split(path / "eval.bin", manifest, manifest.eval_count)
    return PoseDataset(manifest=manifest, train=train, eval=evals,
                       motifs=default_motifs(manifest.num_actions))


# -- precomputed per-action embedding files ----------------------------------------

def save_embedding_file(path: str | Path, embeddings: np.ndarray,
                        action_names: list[str]) -> None:
    """Directory with embeddings.bin (one K x C tensor blob) and a manifest
    naming the actions in row order."""
    embeddings = np.asarray(embeddings)
    if embeddings.ndim != 2 or embeddings.shape[0] != len(action_names):
        raise ConfigError(
            f"embeddings must be (K, C) with K == len(action_names); got "
            f"{embeddings.shape} for {len(action_names)} names")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "embeddings.bin", "wb") as fh:
        write_tensor_blob(fh, embeddings)
    (path / "manifest.txt").write_text(
        f"version = {FORMAT_VERSION}\naction_names = {','.join(action_names)}\n",
        encoding="utf-8")


def load_embedding_file(path: str | Path) -> tuple[np.ndarray, list[str]]:
    root = Path(path)
    blob = root / "embeddings.bin"
    manifest = root / "manifest.txt"
    if not blob.exists() or not manifest.exists():
        raise FormatError(
            f"embedding directory {path} needs embeddings.bin and manifest.txt")
    values = {}
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if "=" in line:
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    names = [n for n in values.get("action_names", "").split(",") if n]
    with open(blob, "rb") as fh:
        arr, _ = read_tensor_blob(fh)
    if arr.ndim != 2:
        raise FormatError(f"embedding blob must be 2D, got shape {arr.shape}")
    return arr, names


# -- calibration helpers ------------------------------------------------------------

def nearest_centroid_accuracy(train: Split, evals: Split) -> float:
    """Accuracy of a nearest-centroid classifier on flattened 3D target poses.

    Calibrates how separable the generated actions are before any learning.
    """
    feats_train = train.target3d.reshape(len(train), -1).astype(np.float64)
    feats_eval = evals.target3d.reshape(len(evals), -1).astype(np.float64)
    classes = np.unique(train.labels)
    centroids = np.stack([feats_train[train.labels == c].mean(axis=0) for c in classes])
    dists = np.linalg.norm(feats_eval[:, None, :] - centroids[None, :, :], axis=-1)
    predicted = classes[np.argmin(dists, axis=1)]
    return float((predicted == evals.labels).mean())
