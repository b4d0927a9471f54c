"""On-disk formats.

Embedding file (``.hseb``), all little-endian, 24-byte header::

    magic    4s   b"HSEB"
    version  u16  1
    count    u64  number of rows
    dim      u32  row length
    dtype    u16  1 = float32, 2 = float64
    reserved 4x   zero

followed by ``count * dim`` values, row-major. An optional sidecar
``<path>.labels`` holds one UTF-8 label per line.

Checkpoints are directories holding ``params.npz`` (written with fixed zip
timestamps so identical weights give identical bytes) and ``meta.json``.
"""
from __future__ import annotations

import csv
import io
import json
import struct
import warnings
import zipfile
from dataclasses import asdict
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .data import SyntheticDataset, SyntheticSpec
from .encoder import EncoderParams, ModalityParams, TENSOR_NAMES, MODALITIES
from .errors import BadMagic, IoFailure, TruncatedPayload, UnsupportedVersion
from .losses import Temperature
from .sphere import EmbeddingSet, as_rows, normalize_rows

MAGIC = b"HSEB"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHQIH4x")
DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
DTYPE_TAGS = {"f32": 1, "f64": 2}
CHECKPOINT_VERSION = 1
NORM_WARN_TOL = 1e-3


def labels_path(path) -> Path:
    return Path(str(path) + ".labels")


def write_embeddings(emb, path, dtype: str = "f64", labels: Optional[Sequence[str]] = None):
    """Write rows (EmbeddingSet or array) to ``path``; labels go to the sidecar."""
    if dtype not in DTYPE_TAGS:
        raise ValueError(f"dtype must be one of {sorted(DTYPE_TAGS)}")
    if isinstance(emb, EmbeddingSet):
        rows = emb.rows
    else:
        rows = np.asarray(emb, dtype=np.float64)
        if rows.size == 0 and rows.ndim < 2:
            rows = rows.reshape(0, 0)
        rows = as_rows(rows)
    if labels is None and isinstance(emb, EmbeddingSet):
        labels = emb.labels
    tag = DTYPE_TAGS[dtype]
    header = HEADER.pack(MAGIC, FORMAT_VERSION, rows.shape[0], rows.shape[1], tag)
    try:
        with open(path, "wb") as f:
            f.write(header)
            f.write(np.ascontiguousarray(rows, dtype=DTYPES[tag]).tobytes())
        if labels is not None:
            with open(labels_path(path), "w", encoding="utf-8", newline="\n") as f:
                for label in labels:
                    f.write(f"{label}\n")
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def read_embeddings(path, normalize: bool = False) -> EmbeddingSet:
    """Read an ``.hseb`` file, widening to float64.

    Rows are left as stored unless ``normalize`` is set; rows whose norm is
    more than 1e-3 away from 1 trigger a warning.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if len(data) < HEADER.size:
        if not data.startswith(MAGIC[:len(data)]):
            raise BadMagic(f"{path}: not an HSEB file")
        raise TruncatedPayload(f"{path}: header is {len(data)} bytes, expected {HEADER.size}")
    magic, version, count, dim, tag = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"{path}: format version {version}")
    if tag not in DTYPES:
        raise UnsupportedVersion(f"{path}: unknown dtype tag {tag}")
    expected = count * dim * DTYPES[tag].itemsize
    payload = data[HEADER.size:]
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: payload is {len(payload)} bytes, header promises {expected}")
    rows = np.frombuffer(payload, dtype=DTYPES[tag]).astype(np.float64).reshape(count, dim)

    labels = None
    lp = labels_path(path)
    if lp.exists():
        labels = lp.read_text(encoding="utf-8").split("\n")
        if labels and labels[-1] == "":
            labels.pop()
    if normalize and count:
        rows = normalize_rows(rows)
    elif count:
        off = np.flatnonzero(np.abs(np.linalg.norm(rows, axis=1) - 1) > NORM_WARN_TOL)
        if off.size:
            warnings.warn(f"{path}: {off.size} rows are not unit length "
                          f"(first: {off[:10].tolist()})", stacklevel=2)
    return EmbeddingSet(rows, labels)


def _npz_bytes(arrays: Dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            arr_buf = io.BytesIO()
            np.lib.format.write_array(arr_buf, np.asarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, arr_buf.getvalue())
    return buf.getvalue()


def save_checkpoint(params: EncoderParams, directory, config: dict = None, seed=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "params.npz").write_bytes(_npz_bytes(params.tensors()))
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "learnable_temperature": params.temperature.learnable,
        "max_inverse_scale": params.temperature.max_inverse_scale,
        "seed": seed,
        "config": config or {},
    }
    write_json(meta, directory / "meta.json")


def load_checkpoint(directory) -> EncoderParams:
    directory = Path(directory)
    try:
        meta = json.loads((directory / "meta.json").read_text())
        arrays = dict(np.load(directory / "params.npz", allow_pickle=False))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise UnsupportedVersion(f"checkpoint version {meta.get('format_version')}")
    mods = {m: ModalityParams(*(arrays[f"{m}.{t}"] for t in TENSOR_NAMES)) for m in MODALITIES}
    temp = Temperature(float(arrays["log_inverse_scale"]), meta["learnable_temperature"],
                       meta["max_inverse_scale"])
    return EncoderParams(mods["image"], mods["text"], temp)


def write_json(obj, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                        for x in row])


def read_scores(path) -> np.ndarray:
    """Read a score CSV: the ``score`` column if present, else the last column."""
    with open(path, encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        return np.zeros(0)
    header, body = rows[0], rows[1:]
    try:
        float(header[-1])
        body, col = rows, len(header) - 1
    except ValueError:
        col = header.index("score") if "score" in header else len(header) - 1
    return np.array([float(r[col]) for r in body if r], dtype=np.float64)


# Dataset directory layout written by ``gen-data``.
SPLITS = {
    "id_train": ("id_train", "id_train_labels", "id_names"),
    "id_train_captions": ("id_train_captions", "id_train_labels", "id_names"),
    "id_val": ("id_val", "id_val_labels", "id_names"),
    "id_test": ("id_test", "id_test_labels", "id_names"),
    "ood_test": ("ood_test", "ood_test_labels", "ood_names"),
}


def save_dataset(ds: SyntheticDataset, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for fname, (attr, lab_attr, names_attr) in SPLITS.items():
        names = getattr(ds, names_attr)
        labels = [names[k] for k in getattr(ds, lab_attr)]
        write_embeddings(getattr(ds, attr), directory / f"{fname}.hseb", labels=labels)
        written.append(f"{fname}.hseb")
    all_names = ds.id_names + ds.ood_names + ds.candidate_names
    write_embeddings(ds.pretrain_images, directory / "pretrain_images.hseb",
                     labels=[all_names[k] for k in ds.pretrain_labels])
    write_embeddings(ds.pretrain_captions, directory / "pretrain_captions.hseb",
                     labels=[all_names[k] for k in ds.pretrain_labels])
    for fname, attr, names in (("id_prototypes", "id_prototypes", ds.id_names),
                               ("ood_prototypes", "ood_prototypes", ds.ood_names),
                               ("candidate_prototypes", "candidate_prototypes",
                                ds.candidate_names)):
        write_embeddings(getattr(ds, attr), directory / f"{fname}.hseb", labels=names)
    np.save(directory / "maps.npy", np.stack([ds.image_map, ds.text_map]))
    np.save(directory / "latent.npy", ds.latent)
    write_json(asdict(ds.spec), directory / "spec.json")


def load_dataset(directory) -> SyntheticDataset:
    directory = Path(directory)
    spec = SyntheticSpec(**json.loads((directory / "spec.json").read_text()))

    def rows(name):
        with warnings.catch_warnings():
            # raw features are not unit length by design
            warnings.simplefilter("ignore")
            return read_embeddings(directory / f"{name}.hseb")

    protos = {k: rows(f"{k}_prototypes") for k in ("id", "ood", "candidate")}
    index = {k: {n: i for i, n in enumerate(protos[k].labels)} for k in protos}
    all_names = list(protos["id"].labels + protos["ood"].labels + protos["candidate"].labels)
    global_index = {n: i for i, n in enumerate(all_names)}

    def split(name, group):
        e = rows(name)
        return e.rows, np.array([index[group][x] for x in e.labels], dtype=np.int64)

    id_train, train_labels = split("id_train", "id")
    captions, _ = split("id_train_captions", "id")
    id_val, val_labels = split("id_val", "id")
    id_test, test_labels = split("id_test", "id")
    ood_test, ood_labels = split("ood_test", "ood")
    pre_img = rows("pretrain_images")
    pre_cap = rows("pretrain_captions")
    maps = np.load(directory / "maps.npy")
    return SyntheticDataset(
        spec=spec, image_map=maps[0], text_map=maps[1],
        latent=np.load(directory / "latent.npy"),
        id_train=id_train, id_train_labels=train_labels, id_train_captions=captions,
        id_val=id_val, id_val_labels=val_labels, id_test=id_test, id_test_labels=test_labels,
        ood_test=ood_test, ood_test_labels=ood_labels,
        pretrain_images=pre_img.rows, pretrain_captions=pre_cap.rows,
        pretrain_labels=np.array([global_index[x] for x in pre_img.labels], dtype=np.int64),
        id_prototypes=protos["id"].rows, ood_prototypes=protos["ood"].rows,
        candidate_prototypes=protos["candidate"].rows,
        id_names=list(protos["id"].labels), ood_names=list(protos["ood"].labels),
        candidate_names=list(protos["candidate"].labels),
    )
