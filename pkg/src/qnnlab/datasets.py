"""Task data: synthetic generators, UCI CSV ingestion, MNIST IDX ingestion,
and cluster-chain ground states for the phase-recognition task.

Every generator is seed-deterministic and returns a Dataset whose card records
enough provenance (source, transform, norm bounds, seed) to reconstruct it.
Datasets persist to a header-bearing CSV (features then label, one sample per
line) plus a JSON card.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .qsim import Statevector


@dataclass
class Dataset:
    X: np.ndarray  # (B, d) features, or (B, 2**N) complex state amplitudes
    y: np.ndarray
    task: str  # "regression" | "binary" | "multiclass"
    split: str = "train"
    card: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("feature/label count mismatch")

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_classes(self) -> int:
        if self.task == "regression":
            raise ValueError("regression datasets have no classes")
        return int(np.max(self.y)) + 1


# ---------------------------------------------------------------------------
# Synthetic tasks
# ---------------------------------------------------------------------------

def regression_target(x1, x2):
    """(0.7156 - 1.0125 x1^2 + x1^4)(0.7156 - 1.0125 x2^2 + x2^4)."""
    g1 = 0.7156 - 1.0125 * np.asarray(x1) ** 2 + np.asarray(x1) ** 4
    g2 = 0.7156 - 1.0125 * np.asarray(x2) ** 2 + np.asarray(x2) ** 4
    return g1 * g2


def gen_regression(m: int = 400, seed: int = 0, split: str = "train") -> Dataset:
    """m points uniform on [-0.8, 0.8]^2 labeled by the quartic product target."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-0.8, 0.8, size=(m, 2))
    y = regression_target(X[:, 0], X[:, 1])
    card = {
        "source": "synthetic-regression",
        "target": "(0.7156 - 1.0125 x^2 + x^4) product",
        "domain": "[-0.8, 0.8]^2",
        "seed": seed,
        "m": m,
        "offset_feature": True,
        "kappa1": 1.0,
        "kappa2": float(np.sqrt(1.0 + 2 * 0.64)),
    }
    return Dataset(X, y, "regression", split, card)


def ring_label(x1, x2) -> np.ndarray:
    """0 inside the annulus 0.16 <= r^2 <= 0.81, 1 outside (inner disk included)."""
    r2 = np.asarray(x1) ** 2 + np.asarray(x2) ** 2
    return np.where((r2 >= 0.16) & (r2 <= 0.81), 0, 1)


def gen_ring(m: int = 400, seed: int = 0, split: str = "train") -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(m, 2))
    y = ring_label(X[:, 0], X[:, 1]).astype(int)
    card = {
        "source": "synthetic-ring",
        "boundaries": "r^2 in {0.16, 0.81}",
        "label0": "annulus between the two circles",
        "seed": seed,
        "m": m,
        "offset_feature": True,
        "kappa1": 1.0,
        "kappa2": float(np.sqrt(3.0)),
    }
    return Dataset(X, y, "binary", split, card)


# ---------------------------------------------------------------------------
# CSV ingestion (UCI-style numeric tables)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    n_features: int
    label_column: int  # index of the label column in each row
    n_train: int
    n_test: int
    class_names: Optional[Tuple[str, ...]] = None  # map labels to 0..k-1; None = numeric
    name: str = "csv"
    shuffle_seed: int = 0


def load_csv(path: Union[str, Path], schema: CsvSchema) -> Tuple[Dataset, Dataset]:
    """Numeric CSV with header -> min-max scaled train/test datasets.

    Scaling bounds come from the training split only; constant columns scale
    to zero.  Malformed rows are reported with their line number.
    """
    path = Path(path)
    rows: List[List[float]] = []
    labels: List[int] = []
    with path.open() as fh:
        header = fh.readline()
        if not header.strip():
            raise ValueError(f"{path}: empty file")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != schema.n_features + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {schema.n_features + 1} columns, got {len(parts)}"
                )
            raw_label = parts[schema.label_column]
            feats = [p for i, p in enumerate(parts) if i != schema.label_column]
            try:
                rows.append([float(v) for v in feats])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if schema.class_names is not None:
                labels.append(schema.class_names.index(raw_label.strip()))
            else:
                labels.append(int(float(raw_label)))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    X = np.asarray(rows)
    y = np.asarray(labels, dtype=int)
    if schema.n_train + schema.n_test > X.shape[0]:
        raise ValueError(
            f"{path}: {X.shape[0]} rows cannot satisfy split "
            f"{schema.n_train}/{schema.n_test}"
        )
    rng = np.random.default_rng(schema.shuffle_seed)
    order = rng.permutation(X.shape[0])
    tr = order[: schema.n_train]
    te = order[schema.n_train : schema.n_train + schema.n_test]
    lo = X[tr].min(axis=0)
    hi = X[tr].max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    scale = lambda block: np.where(hi > lo, (block - lo) / span, 0.0)
    card = {
        "source": str(path),
        "schema": schema.name,
        "scaling": "min-max per feature, fitted on the training split",
        "shuffle_seed": schema.shuffle_seed,
        "offset_feature": True,
    }
    task = "binary" if int(y.max()) <= 1 else "multiclass"
    train = Dataset(scale(X[tr]), y[tr], task, "train", card)
    test = Dataset(scale(X[te]), y[te], task, "test", card)
    return train, test


# ---------------------------------------------------------------------------
# MNIST IDX ingestion
# ---------------------------------------------------------------------------

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801


def read_idx(path: Union[str, Path]) -> np.ndarray:
    """Big-endian IDX file to a uint8 ndarray (2051 = images, 2049 = labels)."""
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise ValueError(f"{path}: truncated IDX header")
    magic = struct.unpack(">I", data[:4])[0]
    if magic == IDX_MAGIC_IMAGES:
        ndim = 3
    elif magic == IDX_MAGIC_LABELS:
        ndim = 1
    else:
        raise ValueError(f"{path}: bad IDX magic 0x{magic:08x}")
    head = 4 + 4 * ndim
    if len(data) < head:
        raise ValueError(f"{path}: truncated IDX dimensions")
    dims = struct.unpack(f">{ndim}I", data[4:head])
    count = int(np.prod(dims))
    if len(data) != head + count:
        raise ValueError(f"{path}: payload size {len(data) - head} != {count}")
    return np.frombuffer(data[head:], dtype=np.uint8).reshape(dims)


def write_idx(path: Union[str, Path], array: np.ndarray) -> None:
    """Inverse of read_idx; rewrites the original bytes for a loaded payload."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = IDX_MAGIC_IMAGES if array.ndim == 3 else IDX_MAGIC_LABELS
    with Path(path).open("wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Plain bilinear resampling with half-pixel-centered coordinates."""
    in_h, in_w = img.shape
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    ys = np.clip(ys, 0, in_h - 1)
    xs = np.clip(xs, 0, in_w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    img = img.astype(float)
    top = img[np.ix_(y0, x0)] * (1 - wx) + img[np.ix_(y0, x1)] * wx
    bot = img[np.ix_(y1, x0)] * (1 - wx) + img[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def load_mnist_idx(
    images_path: Union[str, Path],
    labels_path: Union[str, Path],
    classes: Sequence[int],
    split: str = "train",
) -> Dataset:
    """Filter to the requested digits and downsample 28x28 -> 16x16 bilinearly.

    Features are flattened to 256 values in [0, 1]; labels are remapped to
    0..len(classes)-1 in the given order.
    """
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3:
        raise ValueError(f"{images_path}: not an image file")
    if labels.ndim != 1:
        raise ValueError(f"{labels_path}: not a label file")
    if images.shape[0] != labels.shape[0]:
        raise ValueError("image/label count mismatch")
    classes = list(classes)
    mask = np.isin(labels, classes)
    images, labels = images[mask], labels[mask]
    feats = np.stack([bilinear_resize(im, 16, 16).reshape(-1) for im in images]) / 255.0
    remap = {c: i for i, c in enumerate(classes)}
    y = np.array([remap[int(v)] for v in labels], dtype=int)
    card = {
        "source": f"{images_path};{labels_path}",
        "classes": classes,
        "downsample": "bilinear 28x28 -> 16x16, half-pixel centers",
        "range": "[0, 1] after /255",
        "offset_feature": False,
        "pad": False,
    }
    task = "binary" if len(classes) == 2 else "multiclass"
    return Dataset(feats, y, task, split, card)


# ---------------------------------------------------------------------------
# Cluster-chain ground states (phase-recognition task)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinChainSpec:
    N: int
    J: float = 1.0
    h1: float = 0.0
    h2: float = 0.0

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("the three-site ZXZ term needs N >= 3")


@dataclass
class GroundStateResult:
    state: Statevector
    energy: float
    degenerate: bool


_SX = sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex))
_SZ = sp.csr_matrix(np.array([[1, 0], [0, -1]], dtype=complex))


def _embed_sparse(ops: dict, n: int) -> sp.csr_matrix:
    out = None
    eye = sp.identity(2, format="csr", dtype=complex)
    for k in range(n):
        piece = ops.get(k, eye)
        out = piece if out is None else sp.kron(out, piece, format="csr")
    return out


def haldane_hamiltonian(spec: SpinChainSpec) -> sp.csr_matrix:
    """H = -J sum Z X Z - h1 sum X - h2 sum X X with open boundaries."""
    n = spec.N
    dim = 2 ** n
    H = sp.csr_matrix((dim, dim), dtype=complex)
    for i in range(n - 2):
        H = H - spec.J * _embed_sparse({i: _SZ, i + 1: _SX, i + 2: _SZ}, n)
    for i in range(n):
        H = H - spec.h1 * _embed_sparse({i: _SX}, n)
    for i in range(n - 1):
        H = H - spec.h2 * _embed_sparse({i: _SX, i + 1: _SX}, n)
    return H


def haldane_ground(spec: SpinChainSpec, tol: float = 1e-10) -> GroundStateResult:
    """Lowest eigenpair by iterative (Lanczos) solve; dense fallback for tiny chains.

    The global phase is fixed by making the largest-magnitude amplitude real
    positive.  Near-degenerate ground spaces (gap < 1e-8) are flagged.
    """
    if spec.N > 15:
        raise ValueError("statevector limit is 15 sites")
    H = haldane_hamiltonian(spec)
    if spec.N <= 4:
        dense = H.toarray()
        vals, vecs = np.linalg.eigh(dense)
    else:
        vals, vecs = eigsh(H, k=2, which="SA", tol=tol, maxiter=5000)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    energy = float(vals[0].real)
    vec = vecs[:, 0].astype(complex)
    pivot = int(np.argmax(np.abs(vec)))
    phase = vec[pivot] / abs(vec[pivot])
    vec = vec / phase
    vec /= np.linalg.norm(vec)
    residual = np.linalg.norm(H @ vec - energy * vec)
    if residual > 1e-8:
        raise RuntimeError(f"eigensolve residual {residual:.2e} above 1e-8")
    degenerate = bool(abs(float(vals[1].real) - energy) < 1e-8)
    return GroundStateResult(Statevector(spec.N, vec), energy, degenerate)


def haldane_ground_state(spec: SpinChainSpec) -> Statevector:
    return haldane_ground(spec).state


def boundary_poly(coeffs: Sequence[float], h1) -> np.ndarray:
    """h2 = c0 + c1 h1 + c2 h1^2 + ... evaluated at h1."""
    return np.polyval(list(reversed(list(coeffs))), np.asarray(h1, dtype=float))


def gen_phase_dataset(
    grid: Tuple[int, int],
    h1_range: Tuple[float, float],
    h2_range: Tuple[float, float],
    N: int,
    boundary: Sequence[float],
    split: str = "train",
) -> Dataset:
    """Ground states on an equally spaced (h1, h2) grid, labeled by the boundary.

    Label 0 (the symmetry-protected phase, one-hot [1,0]) where h2 lies below
    the boundary polynomial, label 1 otherwise; points exactly on the curve
    take label 0 and are counted in the card.
    """
    n1, n2 = grid
    h1s = np.linspace(h1_range[0], h1_range[1], n1)
    h2s = np.linspace(h2_range[0], h2_range[1], n2)
    states = []
    labels = []
    on_boundary = 0
    for h1 in h1s:
        cut = float(boundary_poly(boundary, h1))
        for h2 in h2s:
            res = haldane_ground(SpinChainSpec(N=N, J=1.0, h1=float(h1), h2=float(h2)))
            states.append(res.state.amplitudes)
            if h2 == cut:
                on_boundary += 1
            labels.append(0 if h2 <= cut else 1)
    card = {
        "source": "cluster-chain ground states",
        "N": N,
        "grid": [n1, n2],
        "h1_range": list(h1_range),
        "h2_range": list(h2_range),
        "boundary": list(boundary),
        "boundary_rule": "label 0 (SPT) iff h2 <= poly(h1)",
        "on_boundary_points": on_boundary,
    }
    return Dataset(np.stack(states), np.asarray(labels, dtype=int), "binary", split, card)


# ---------------------------------------------------------------------------
# Persistence: CSV with header + JSON card
# ---------------------------------------------------------------------------

def save_dataset(ds: Dataset, stem: Union[str, Path]) -> Tuple[Path, Path]:
    """Write <stem>.csv (features then label) and <stem>.card.json."""
    stem = Path(stem)
    data_path = stem.with_suffix(".csv")
    card_path = stem.parent / (stem.name + ".card.json")
    if np.iscomplexobj(ds.X):
        raise ValueError("state datasets do not persist to CSV")
    d = ds.X.shape[1]
    header = ",".join([f"x{i+1}" for i in range(d)] + ["label"])
    with data_path.open("w") as fh:
        fh.write(header + "\n")
        for row, label in zip(ds.X, ds.y):
            feats = ",".join(f"{v:.17g}" for v in row)
            fh.write(f"{feats},{label:.17g}\n" if ds.task == "regression" else f"{feats},{int(label)}\n")
    card = dict(ds.card)
    card.update({"task": ds.task, "split": ds.split, "n_samples": len(ds)})
    card_path.write_text(json.dumps(card, indent=2, sort_keys=True) + "\n")
    return data_path, card_path


def load_dataset(stem: Union[str, Path]) -> Dataset:
    stem = Path(stem)
    card = json.loads((stem.parent / (stem.name + ".card.json")).read_text())
    rows = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    X, y = rows[:, :-1], rows[:, -1]
    if card["task"] != "regression":
        y = y.astype(int)
    return Dataset(X, y, card["task"], card["split"], card)


# ---------------------------------------------------------------------------
# Bundled UCI exports (no network needed)
# ---------------------------------------------------------------------------

def export_wine_csv(path: Union[str, Path]) -> Path:
    """Write the bundled Wine table (178 rows, 13 features, 3 classes) as CSV."""
    from sklearn.datasets import load_wine

    data = load_wine()
    return _export_sklearn(path, data, "wine")


def export_breast_cancer_csv(path: Union[str, Path]) -> Path:
    """Write the bundled breast-cancer table (569 rows, 30 features) as CSV."""
    from sklearn.datasets import load_breast_cancer

    data = load_breast_cancer()
    return _export_sklearn(path, data, "breast_cancer")


def _export_sklearn(path, data, name) -> Path:
    path = Path(path)
    d = data.data.shape[1]
    header = ",".join([f"f{i+1}" for i in range(d)] + ["label"])
    with path.open("w") as fh:
        fh.write(header + "\n")
        for row, label in zip(data.data, data.target):
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{int(label)}\n")
    return path
