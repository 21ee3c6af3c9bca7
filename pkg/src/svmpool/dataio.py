"""Bag datasets: synthesis, sampling and on-disk formats.

Two dataset formats are supported:

* manifest + blob: a JSON manifest (magic ``SVMPOOL-DATASET``, format
  version, dimension, counts, labels, row offsets, SHA-256 of the blob) next
  to a flat file of little-endian float32 values, frames row-major;
* a plain-text table for importing features computed elsewhere: a magic
  first line ``# SVMPOOL-TABLE 1`` followed by comma-separated rows
  ``sequence_id,label,f_0,...,f_{p-1}``. Negative-bag rows use the label
  ``neg``.

Binary containers (``write_container``/``read_container``) hold descriptor
and model files: an 8-byte magic, a uint32 format version, a uint32 header
length, a JSON header describing the arrays, then the raw array bytes.
"""

import hashlib
import json
import math
import os
import struct
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    CorruptFile,
    DimensionMismatch,
    EmptySource,
    FormatVersionMismatch,
    InvalidSpec,
    IoFailure,
)
from .mil_pool import FeatureBag, NegativeBag

DATASET_MAGIC = "SVMPOOL-DATASET"
DATASET_VERSION = 1
TABLE_MAGIC = "# SVMPOOL-TABLE"
TABLE_VERSION = 1
BLOB_DTYPE = np.dtype("<f4")


@dataclass(frozen=True, eq=False)
class BagDataset:
    p: int
    class_count: int
    sequences: list
    negative: NegativeBag
    provenance: str = ""
    split_assignments: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sequences", list(self.sequences))
        for b in self.sequences:
            if b.dim != self.p:
                raise DimensionMismatch(f"bag {b.sequence_id!r} has dimension {b.dim}, expected {self.p}")
            if not 0 <= b.label < self.class_count:
                raise InvalidSpec(f"label {b.label} outside [0, {self.class_count})")
        if self.negative.dim != self.p:
            raise DimensionMismatch(f"negative bag dimension {self.negative.dim} != {self.p}")
        if self.split_assignments is not None:
            s = np.asarray(self.split_assignments, dtype=np.int64)
            if s.shape != (len(self.sequences),):
                raise InvalidSpec("split_assignments needs one entry per sequence")
            object.__setattr__(self, "split_assignments", s)

    @property
    def labels(self):
        return np.array([b.label for b in self.sequences], dtype=np.int64)

    def __len__(self):
        return len(self.sequences)

    def subset(self, indices):
        idx = [int(i) for i in indices]
        split = None if self.split_assignments is None else self.split_assignments[idx]
        return replace(self, sequences=[self.sequences[i] for i in idx], split_assignments=split)

    def __eq__(self, other):
        if not isinstance(other, BagDataset):
            return NotImplemented
        def same_opt(a, b):
            return (a is None and b is None) or (
                a is not None and b is not None and np.array_equal(a, b))
        return (self.p == other.p and self.class_count == other.class_count
                and self.provenance == other.provenance
                and self.sequences == other.sequences
                and self.negative == other.negative
                and same_opt(self.split_assignments, other.split_assignments)
                and same_opt(self.center, other.center))


@dataclass(frozen=True)
class SyntheticSpec:
    """Planted-signal generator settings.

    Each sequence holds ``ceil(informative_fraction * n)`` frames near its
    class prototype. The remaining frames come from a class-independent
    background mixture of ``background_prototypes`` components placed at
    radius ``background_strength``. The negative bag is drawn from a further
    ``negative_prototypes`` held-out components at radius
    ``negative_strength``. All three prototype groups occupy disjoint rows
    of one prototype table.
    """

    class_count: int = 10
    sequences_per_class: int = 30
    frames_per_sequence: int = 25
    dimension: int = 128
    informative_fraction: float = 0.2
    signal_strength: float = 3.0
    noise_sigma: float = 0.5
    negative_frame_count: int = 50
    seed: int = 0
    background_prototypes: int = 64
    background_strength: float = 15.0
    negative_prototypes: int = 8
    negative_strength: float = 3.0

    def __post_init__(self):
        for name in ("class_count", "sequences_per_class", "frames_per_sequence",
                     "dimension", "negative_frame_count", "background_prototypes",
                     "negative_prototypes"):
            if int(getattr(self, name)) < 1:
                raise InvalidSpec(f"{name} must be >= 1")
        if not 0.0 < self.informative_fraction <= 1.0:
            raise InvalidSpec("informative_fraction must lie in (0, 1]")
        if self.informative_fraction * self.frames_per_sequence < 1.0 - 1e-12:
            raise InvalidSpec("informative_fraction * frames_per_sequence must be >= 1")
        if not self.noise_sigma > 0:
            raise InvalidSpec("noise_sigma must be positive")
        if not all(np.isfinite([self.signal_strength, self.background_strength,
                                self.negative_strength, self.noise_sigma])):
            raise InvalidSpec("strengths must be finite")

    @property
    def informative_count(self):
        # guard against 0.2 * 25 = 5.000000000000001
        return int(math.ceil(round(self.informative_fraction * self.frames_per_sequence, 9)))


def prototype_table(spec, rng):
    """Unit-norm prototypes split by row range.

    Rows ``[0, d)`` are class prototypes, the next ``background_prototypes``
    rows the positive-bag background mixture, the last
    ``negative_prototypes`` rows the held-out negative components.
    """
    d, B = spec.class_count, spec.background_prototypes
    T = rng.standard_normal((d + B + spec.negative_prototypes, spec.dimension))
    T /= np.linalg.norm(T, axis=1, keepdims=True)
    return T[:d], T[d:d + B], T[d + B:]


def _mixture(rng, protos, strength, count, spec):
    which = rng.integers(0, protos.shape[0], size=count)
    return strength * protos[which] + spec.noise_sigma * rng.standard_normal((count, spec.dimension))


def synthesize(spec):
    """Draw a planted dataset; fully determined by ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    protos, bg, held_out = prototype_table(spec, rng)
    n = spec.frames_per_sequence
    k = spec.informative_count
    sequences = []
    for c in range(spec.class_count):
        for s in range(spec.sequences_per_class):
            informative = (spec.signal_strength * protos[c]
                           + spec.noise_sigma * rng.standard_normal((k, spec.dimension)))
            background = _mixture(rng, bg, spec.background_strength, n - k, spec)
            frames = np.vstack([informative, background])
            mask = np.zeros(n, dtype=bool)
            mask[:k] = True
            order = rng.permutation(n)
            sequences.append(FeatureBag(
                sequence_id=f"c{c:03d}_s{s:04d}",
                label=c,
                frames=frames[order].astype(BLOB_DTYPE),
                informative=mask[order],
            ))
    negative = NegativeBag(
        _mixture(rng, held_out, spec.negative_strength, spec.negative_frame_count,
                 spec).astype(BLOB_DTYPE),
        source_tag="synthetic-background",
    )
    provenance = "synthetic:" + json.dumps(spec.__dict__, sort_keys=True)
    return BagDataset(p=spec.dimension, class_count=spec.class_count,
                      sequences=sequences, negative=negative, provenance=provenance)


def sample_bag(frames, n=25, seed=0, sequence_id="", label=0):
    """Sample ``n`` frames uniformly without replacement.

    Falls back to sampling with replacement when the source is shorter than
    ``n``. Returns a :class:`FeatureBag`.
    """
    F = np.asarray(frames)
    if F.ndim != 2 or F.shape[0] == 0:
        raise EmptySource("cannot sample from an empty frame source")
    rng = np.random.default_rng(seed)
    replace_ = F.shape[0] < n
    idx = rng.choice(F.shape[0], size=n, replace=replace_)
    return FeatureBag(sequence_id=sequence_id, label=label, frames=F[idx])


def sample_negative_bag(sources, total=50, seed=0, source_tag="sampled"):
    """Pool ``total`` frames drawn evenly across unrelated source sequences."""
    sources = [np.asarray(s) for s in sources if np.asarray(s).size]
    if not sources:
        raise EmptySource("no negative sources")
    rng = np.random.default_rng(seed)
    per = np.full(len(sources), total // len(sources))
    per[: total % len(sources)] += 1
    parts = [sample_bag(src, int(m), int(rng.integers(2**63 - 1))).frames
             for src, m in zip(sources, per) if m > 0]
    return NegativeBag(np.vstack(parts), source_tag=source_tag)


# ---------------------------------------------------------------- file io

def atomic_write_bytes(path, data):
    """Write via a temp file in the same directory, then rename into place."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_bytes(path):
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def blob_path_for(manifest_path):
    p = Path(manifest_path)
    return p.with_name(p.name[: -len(".json")] + ".f32" if p.name.endswith(".json") else p.name + ".f32")


def save_dataset(ds, path):
    """Write the manifest to ``path`` and the float32 blob next to it."""
    path = Path(path)
    blob_path = blob_path_for(path)
    blocks, entries, offset = [], [], 0
    for b in ds.sequences:
        F = np.ascontiguousarray(b.frames, dtype=BLOB_DTYPE)
        blocks.append(F)
        entry = {"id": b.sequence_id, "label": b.label, "offset": offset, "rows": F.shape[0]}
        if b.informative is not None:
            entry["informative"] = [int(i) for i in np.flatnonzero(b.informative)]
        entries.append(entry)
        offset += F.shape[0]
    NF = np.ascontiguousarray(ds.negative.frames, dtype=BLOB_DTYPE)
    blocks.append(NF)
    negative = {"source_tag": ds.negative.source_tag, "offset": offset, "rows": NF.shape[0]}
    offset += NF.shape[0]
    blob = b"".join(B.tobytes() for B in blocks)
    manifest = {
        "magic": DATASET_MAGIC,
        "format_version": DATASET_VERSION,
        "dimension": ds.p,
        "class_count": ds.class_count,
        "total_rows": offset,
        "dtype": "float32-le",
        "blob": blob_path.name,
        "blob_bytes": len(blob),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
        "provenance": ds.provenance,
        "sequences": entries,
        "negative": negative,
        "split_assignments": None if ds.split_assignments is None
        else [int(s) for s in ds.split_assignments],
        "center": None if ds.center is None else [float(v) for v in ds.center],
    }
    atomic_write_bytes(blob_path, blob)
    atomic_write_bytes(path, (json.dumps(manifest, indent=1, sort_keys=True) + "\n").encode())
    return path


def load_dataset(path):
    path = Path(path)
    raw = _read_bytes(path)
    try:
        manifest = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"{path}: manifest is not valid JSON ({exc})") from exc
    if not isinstance(manifest, dict) or manifest.get("magic") != DATASET_MAGIC:
        raise FormatVersionMismatch(f"{path}: not a dataset manifest")
    if manifest.get("format_version") != DATASET_VERSION:
        raise FormatVersionMismatch(
            f"{path}: format version {manifest.get('format_version')} unsupported")
    try:
        p = int(manifest["dimension"])
        rows = int(manifest["total_rows"])
        declared = int(manifest["blob_bytes"])
        entries = manifest["sequences"]
        neg = manifest["negative"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: manifest missing field ({exc})") from exc
    if p < 1 or rows * p * BLOB_DTYPE.itemsize != declared:
        raise FormatVersionMismatch(
            f"{path}: dimension {p} x {rows} rows disagrees with blob size {declared}")
    blob = _read_bytes(path.with_name(manifest["blob"]))
    if len(blob) != declared:
        raise CorruptFile(f"{path}: blob has {len(blob)} bytes, expected {declared}")
    if hashlib.sha256(blob).hexdigest() != manifest.get("blob_sha256"):
        raise CorruptFile(f"{path}: blob checksum mismatch")
    data = np.frombuffer(blob, dtype=BLOB_DTYPE).reshape(rows, p)

    def rows_of(e):
        lo, n = int(e["offset"]), int(e["rows"])
        if lo < 0 or n < 1 or lo + n > rows:
            raise CorruptFile(f"{path}: row range {lo}+{n} outside blob")
        return data[lo: lo + n].copy()

    sequences = []
    for e in entries:
        mask = None
        F = rows_of(e)
        if "informative" in e:
            mask = np.zeros(F.shape[0], dtype=bool)
            mask[np.asarray(e["informative"], dtype=np.int64)] = True
        sequences.append(FeatureBag(e["id"], int(e["label"]), F, mask))
    negative = NegativeBag(rows_of(neg), source_tag=neg.get("source_tag", ""))
    split = manifest.get("split_assignments")
    center = manifest.get("center")
    return BagDataset(
        p=p,
        class_count=int(manifest["class_count"]),
        sequences=sequences,
        negative=negative,
        provenance=manifest.get("provenance", ""),
        split_assignments=None if split is None else np.asarray(split, dtype=np.int64),
        center=None if center is None else np.asarray(center, dtype=np.float64),
    )


def export_table(ds, path):
    lines = [f"{TABLE_MAGIC} {TABLE_VERSION}"]
    for b in ds.sequences:
        for row in np.asarray(b.frames, dtype=np.float64):
            lines.append(",".join([b.sequence_id, str(b.label)] + [repr(float(v)) for v in row]))
    for row in np.asarray(ds.negative.frames, dtype=np.float64):
        lines.append(",".join([ds.negative.source_tag or "negative", "neg"]
                              + [repr(float(v)) for v in row]))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def import_table(path, class_count=None, negative_tag=None, provenance=None):
    """Read a feature table; rows sharing a sequence id form one bag."""
    text = _read_bytes(path).decode("utf-8", errors="replace").splitlines()
    if not text or not text[0].startswith(TABLE_MAGIC):
        raise FormatVersionMismatch(f"{path}: missing table magic line")
    try:
        version = int(text[0][len(TABLE_MAGIC):].strip())
    except ValueError as exc:
        raise FormatVersionMismatch(f"{path}: bad table version") from exc
    if version != TABLE_VERSION:
        raise FormatVersionMismatch(f"{path}: table version {version} unsupported")
    seqs, labels, order, neg_rows, neg_tag = {}, {}, [], [], None
    p = None
    for lineno, line in enumerate(text[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) < 3:
            raise CorruptFile(f"{path}:{lineno}: too few columns")
        try:
            values = np.array([float(v) for v in parts[2:]], dtype=np.float64)
        except ValueError as exc:
            raise CorruptFile(f"{path}:{lineno}: non-numeric feature") from exc
        if p is None:
            p = values.shape[0]
        elif values.shape[0] != p:
            raise DimensionMismatch(f"{path}:{lineno}: {values.shape[0]} features, expected {p}")
        sid, lab = parts[0], parts[1].strip()
        if lab == "neg":
            neg_rows.append(values)
            neg_tag = neg_tag or sid
            continue
        if sid not in seqs:
            seqs[sid] = []
            labels[sid] = int(lab)
            order.append(sid)
        elif labels[sid] != int(lab):
            raise CorruptFile(f"{path}:{lineno}: sequence {sid!r} has two labels")
        seqs[sid].append(values)
    if not order or not neg_rows:
        raise CorruptFile(f"{path}: table needs positive sequences and negative rows")
    d = class_count if class_count is not None else max(labels.values()) + 1
    bags = [FeatureBag(s, labels[s], np.vstack(seqs[s])) for s in order]
    negative = NegativeBag(np.vstack(neg_rows), source_tag=negative_tag or neg_tag)
    return BagDataset(p=p, class_count=d, sequences=bags, negative=negative,
                      provenance=provenance or f"table:{Path(path).name}")


def write_container(path, magic, version, header, arrays):
    """Serialise named arrays with a JSON header; bytes depend only on content."""
    magic_b = magic.encode("ascii")
    if len(magic_b) != 8:
        raise ValueError("container magic must be 8 ASCII bytes")
    index, chunks, offset = {}, [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        if a.dtype.kind == "f":
            a = a.astype("<f8")
        elif a.dtype.kind in "iub":
            a = a.astype("<i8")
        else:
            raise TypeError(f"array {name!r} has unsupported dtype {a.dtype}")
        b = a.tobytes()
        index[name] = {"dtype": a.dtype.str, "shape": list(a.shape), "offset": offset, "bytes": len(b)}
        chunks.append(b)
        offset += len(b)
    payload = b"".join(chunks)
    head = dict(header)
    head["arrays"] = index
    head["payload_sha256"] = hashlib.sha256(payload).hexdigest()
    hb = json.dumps(head, sort_keys=True, separators=(",", ":")).encode()
    atomic_write_bytes(path, magic_b + struct.pack("<II", version, len(hb)) + hb + payload)


def read_container(path, magic, version):
    raw = _read_bytes(path)
    if len(raw) < 16 or raw[:8] != magic.encode("ascii"):
        raise FormatVersionMismatch(f"{path}: wrong magic, expected {magic}")
    ver, hlen = struct.unpack("<II", raw[8:16])
    if ver != version:
        raise FormatVersionMismatch(f"{path}: version {ver}, expected {version}")
    if 16 + hlen > len(raw):
        raise CorruptFile(f"{path}: truncated header")
    try:
        head = json.loads(raw[16: 16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptFile(f"{path}: unreadable header") from exc
    payload = raw[16 + hlen:]
    if hashlib.sha256(payload).hexdigest() != head.get("payload_sha256"):
        raise CorruptFile(f"{path}: payload checksum mismatch")
    arrays = {}
    for name, meta in head.pop("arrays").items():
        chunk = payload[meta["offset"]: meta["offset"] + meta["bytes"]]
        arrays[name] = np.frombuffer(chunk, dtype=np.dtype(meta["dtype"])).reshape(meta["shape"]).copy()
    head.pop("payload_sha256")
    return head, arrays
