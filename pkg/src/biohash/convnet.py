"""Convolutional sparse hashing pipeline.

Filters are learned on normalized image patches with the same plasticity
rule as the flat hasher. Encoding runs patch-normalized convolution,
cross-channel inhibition that keeps the top responses per spatial
location, spatial max pooling, and a final winner-take-all hash layer on
the concatenated branch features. Patch normalization makes the whole
pipeline invariant to global intensity scaling of the input image.
"""

import dataclasses
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import hashers, plasticity
from .errors import (BadMagic, DimensionMismatch, KOutOfRange, LayoutMismatch,
                     ParseError, TooSmall, TruncatedFile)
from .plasticity import LearningConfig, SynapseMatrix
from .seeds import subseed, substream

ZERO_NORM = 1e-12


# ------------------------------------------------------------------ types

@dataclass(frozen=True)
class ConvBranch:
    """One kernel-size branch of the filter bank."""

    kernel: int
    filters: int
    delta: float
    eps0: float
    patch_subsample: Optional[int] = None  # None -> ConvConfig default

    def __post_init__(self):
        if self.kernel < 1:
            raise ValueError(f"kernel must be >= 1, got {self.kernel}")
        if self.filters < 1:
            raise ValueError(f"filters must be >= 1, got {self.filters}")


@dataclass(frozen=True)
class ConvConfig:
    """Architecture and schedules for the convolutional hasher.

    `stride` is the convolution stride and stays 1 in all presets. `hash`
    pins the top hash layer's full learning schedule; when None the layer
    is derived from (k, activity) at fit time.
    """

    branches: tuple
    k_ci: int
    layout: tuple
    pool_kernel: int = 7
    pool_stride: int = 2
    stride: int = 1
    patch_subsample: Optional[int] = 2_000_000
    filter_batch: int = 100
    filter_t_max: int = 100
    hash: Optional[LearningConfig] = None

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "layout", tuple(int(v) for v in self.layout))
        if len(self.layout) != 3 or any(v < 1 for v in self.layout):
            raise ValueError(f"layout must be (H, W, C) >= 1, got {self.layout}")
        if not self.branches:
            raise ValueError("need at least one branch")
        fmin = min(b.filters for b in self.branches)
        if not 1 <= self.k_ci <= fmin:
            raise KOutOfRange(f"k_ci={self.k_ci} not in [1, {fmin}]")
        h, w, _ = self.layout
        kmax = max(b.kernel for b in self.branches)
        if kmax > min(h, w):
            raise LayoutMismatch(f"kernel {kmax} exceeds image side {min(h, w)}")
        if self.pool_kernel < 1 or self.pool_stride < 1 or self.stride < 1:
            raise ValueError("pool_kernel, pool_stride and stride must be >= 1")


@dataclass
class FilterBank:
    """Per-branch synapse matrices over the flattened patch dimension."""

    branches: tuple
    matrices: tuple

    def __post_init__(self):
        if len(self.branches) != len(self.matrices):
            raise DimensionMismatch("branch metadata and matrices differ in length")
        for br, sm in zip(self.branches, self.matrices):
            if sm.m != br.filters:
                raise DimensionMismatch(
                    f"branch K={br.kernel} expects {br.filters} filters, matrix has {sm.m}")


@dataclass
class ConvModel:
    """Fitted pipeline: filter bank, hash layer and the feature mean
    subtracted before hashing."""

    config: ConvConfig
    bank: FilterBank
    hash_sm: SynapseMatrix
    feature_mean: np.ndarray
    feature_dim: int


@dataclass
class FeatureStore:
    """Feature matrix handle; `path` is set when backed by a temp memmap."""

    data: np.ndarray
    path: Optional[str] = None


# ------------------------------------------------------- size arithmetic

def conv_side(side: int, kernel: int, stride: int = 1) -> int:
    return (side - kernel) // stride + 1


def _branch_grid(config: ConvConfig, branch: ConvBranch):
    h, w, c = config.layout
    hc = conv_side(h, branch.kernel, config.stride)
    wc = conv_side(w, branch.kernel, config.stride)
    if hc < config.pool_kernel or wc < config.pool_kernel:
        raise TooSmall(
            f"conv output {hc}x{wc} smaller than pool kernel {config.pool_kernel}")
    hp = conv_side(hc, config.pool_kernel, config.pool_stride)
    wp = conv_side(wc, config.pool_kernel, config.pool_stride)
    return hc, wc, hp, wp


def conv_feature_dim(config: ConvConfig) -> int:
    """Length of the concatenated pooled feature vector per image."""
    total = 0
    for br in config.branches:
        _, _, hp, wp = _branch_grid(config, br)
        total += hp * wp * br.filters
    return total


# ------------------------------------------------------------ patch ops

def _as_images(images) -> np.ndarray:
    arr = getattr(images, "data", images)
    arr = np.asarray(arr)
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def _patch_grid(arr: np.ndarray, layout, kernel: int, stride: int = 1) -> np.ndarray:
    """(n, d) flat images -> (n, Hc, Wc, K*K*C) patch grid (fresh array)."""
    h, w, c = (int(v) for v in layout)
    if arr.shape[1] != h * w * c:
        raise LayoutMismatch(f"layout {layout} implies d={h * w * c}, data has {arr.shape[1]}")
    if kernel > min(h, w):
        raise LayoutMismatch(f"kernel {kernel} exceeds image side {min(h, w)}")
    imgs = arr.reshape(arr.shape[0], h, w, c)
    win = np.lib.stride_tricks.sliding_window_view(imgs, (kernel, kernel), axis=(1, 2))
    win = win[:, ::stride, ::stride]  # (n, Hc, Wc, C, K, K)
    win = win.transpose(0, 1, 2, 4, 5, 3)  # row-major patch, channel last
    n, hc, wc = win.shape[:3]
    return np.ascontiguousarray(win).reshape(n, hc, wc, kernel * kernel * c)


def extract_patches(images, layout, kernel: int, stride: int = 1) -> np.ndarray:
    """All K x K x C patches of every image, one flattened patch per row.

    Rows are ordered image-major, then spatial row-major within an image;
    each patch is flattened row-major with the channel index fastest.
    """
    arr = _as_images(images)
    grid = _patch_grid(arr, layout, kernel, stride)
    return grid.reshape(-1, grid.shape[-1])


def normalize_patch(patch) -> np.ndarray:
    """Unit-length copy of one patch; near-zero patches map to zero."""
    v = np.asarray(patch, dtype=np.float64)
    nrm = float(np.sqrt((v * v).sum()))
    if nrm <= ZERO_NORM:
        return np.zeros_like(v)
    return v / nrm


def normalize_patches(patches: np.ndarray):
    """Row-normalize a patch array of any leading shape.

    Returns (normalized copy, active mask); rows with norm <= 1e-12 are
    zeroed and flagged inactive so they produce exactly zero responses.
    """
    p = np.array(patches, copy=True)
    nrm = np.sqrt(np.einsum("...i,...i->...", p, p))
    active = nrm > ZERO_NORM
    np.divide(p, nrm[..., None], out=p, where=active[..., None])
    p[~active] = 0
    return p, active


# --------------------------------------------------------- forward pass

def conv_forward(bank: FilterBank, images, config: ConvConfig):
    """Normalized-patch convolution; one response volume per branch.

    A single flat image gives (Hc, Wc, F) volumes, a batch gives
    (n, Hc, Wc, F). Responses are inner products between each branch's
    filters and the unit-normalized patch at every location.
    """
    arr = getattr(images, "data", images)
    arr = np.asarray(arr)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    volumes = []
    for br, sm in zip(bank.branches, bank.matrices):
        grid = _patch_grid(arr, config.layout, br.kernel, config.stride)
        gridn, _ = normalize_patches(grid)
        eff = plasticity.effective_weights(sm.weights, sm.config.p)
        n, hc, wc, d = gridn.shape
        if d != sm.d:
            raise DimensionMismatch(f"patch dim {d} != filter dim {sm.d}")
        vol = gridn.reshape(-1, d) @ eff.T
        vol = vol.reshape(n, hc, wc, sm.m)
        volumes.append(vol[0] if single else vol)
    return volumes


def channel_inhibit(volume: np.ndarray, k_ci: int, row_chunk: int = 16384) -> np.ndarray:
    """Keep the k_ci largest channel values per spatial location, zero the
    rest. Ties at the threshold keep lower channel indices first, so the
    survivor set is exact and deterministic."""
    vol = np.asarray(volume)
    f = vol.shape[-1]
    if not 1 <= k_ci <= f:
        raise KOutOfRange(f"k_ci={k_ci} not in [1, {f}]")
    if k_ci == f:
        return vol.copy()
    flat = vol.reshape(-1, f)
    out = np.zeros_like(flat)
    for start in range(0, flat.shape[0], row_chunk):
        block = flat[start:start + row_chunk]
        thr = np.partition(block, f - k_ci, axis=1)[:, f - k_ci]
        gt = block > thr[:, None]
        need = k_ci - gt.sum(axis=1)
        eq = block == thr[:, None]
        rank = np.cumsum(eq, axis=1, dtype=np.int32)
        keep = gt | (eq & (rank <= need[:, None]))
        np.copyto(out[start:start + row_chunk], block, where=keep)
    return out.reshape(vol.shape)


def max_pool(volume: np.ndarray, kernel: int = 7, stride: int = 2) -> np.ndarray:
    """Channel-wise spatial max over kernel x kernel windows, no padding."""
    vol = np.asarray(volume)
    single = vol.ndim == 3
    v4 = vol[None] if single else vol
    n, h, w, f = v4.shape
    if h < kernel or w < kernel:
        raise TooSmall(f"spatial dims {h}x{w} smaller than pool kernel {kernel}")
    hp = conv_side(h, kernel, stride)
    wp = conv_side(w, kernel, stride)
    out = np.full((n, hp, wp, f), -np.inf, dtype=v4.dtype)
    for dy in range(kernel):
        ys = slice(dy, dy + (hp - 1) * stride + 1, stride)
        for dx in range(kernel):
            xs = slice(dx, dx + (wp - 1) * stride + 1, stride)
            np.maximum(out, v4[:, ys, xs, :], out=out)
    return out[0] if single else out


# ----------------------------------------------------- feature pipeline

def _block_images(config: ConvConfig, budget_bytes: float = 2.5e8) -> int:
    worst = 1
    for br in config.branches:
        hc, wc, _, _ = _branch_grid(config, br)
        per_image = hc * wc * 4 * max(br.filters, br.kernel * br.kernel * config.layout[2])
        worst = max(worst, per_image)
    return int(min(2048, max(8, budget_bytes // worst)))


def _features_block(bank: FilterBank, config: ConvConfig, arr: np.ndarray) -> np.ndarray:
    """Raw image rows -> (n, feature_dim) float32 block, all branches."""
    parts = []
    for br, sm in zip(bank.branches, bank.matrices):
        grid = _patch_grid(arr.astype(np.float32, copy=False), config.layout,
                           br.kernel, config.stride)
        gridn, _ = normalize_patches(grid)
        del grid
        eff32 = plasticity.effective_weights(sm.weights, sm.config.p).astype(np.float32)
        n, hc, wc, d = gridn.shape
        vol = (gridn.reshape(-1, d) @ eff32.T).reshape(n, hc, wc, sm.m)
        del gridn
        vol = channel_inhibit(vol, config.k_ci)
        pooled = max_pool(vol, config.pool_kernel, config.pool_stride)
        parts.append(pooled.reshape(n, -1))
    return np.concatenate(parts, axis=1)


def conv_features(bank: FilterBank, config: ConvConfig, images, workdir=None,
                  ram_limit: int = 1_500_000_000) -> FeatureStore:
    """Forward every image through conv -> inhibit -> pool and stack the
    flattened branch outputs. Large outputs go to a temp float32 memmap."""
    arr = _as_images(images)
    n = arr.shape[0]
    dim = conv_feature_dim(config)
    nbytes = n * dim * 4
    path = None
    if nbytes > ram_limit:
        fd, path = tempfile.mkstemp(suffix=".feats.f32", dir=workdir)
        os.close(fd)
        out = np.memmap(path, dtype=np.float32, mode="w+", shape=(n, dim))
    else:
        out = np.empty((n, dim), dtype=np.float32)
    step = _block_images(config)
    for start in range(0, n, step):
        out[start:start + step] = _features_block(bank, config, arr[start:start + step])
    if path is not None:
        out.flush()
    return FeatureStore(out, path)


def release_features(store) -> None:
    """Drop a FeatureStore; unlinks the backing temp file if there is one."""
    if isinstance(store, FeatureStore):
        path, store.data = store.path, None
        if path is not None:
            try:
                os.unlink(path)
            except OSError:
                pass


# -------------------------------------------------------------- fitting

def _sample_patches(arr: np.ndarray, config: ConvConfig, branch: ConvBranch,
                    seed: int) -> np.ndarray:
    h, w, c = config.layout
    hc = conv_side(h, branch.kernel, config.stride)
    wc = conv_side(w, branch.kernel, config.stride)
    per_image = hc * wc
    total = arr.shape[0] * per_image
    limit = branch.patch_subsample
    if limit is None:
        limit = config.patch_subsample
    dim = branch.kernel * branch.kernel * c
    if limit is None or total <= limit:
        ids = np.arange(total)
    else:
        rng = substream(seed, f"patches{branch.kernel}")
        ids = np.sort(rng.choice(total, size=limit, replace=False))
    out = np.empty((ids.size, dim), dtype=np.float32)
    pos = 0
    step = max(1, _block_images(config))
    for start in range(0, arr.shape[0], step):
        stop = min(start + step, arr.shape[0])
        lo = np.searchsorted(ids, start * per_image)
        hi = np.searchsorted(ids, stop * per_image)
        if lo == hi:
            continue
        grid = _patch_grid(arr[start:stop].astype(np.float32, copy=False),
                           config.layout, branch.kernel, config.stride)
        flat = grid.reshape(-1, dim)
        out[pos:pos + (hi - lo)] = flat[ids[lo:hi] - start * per_image]
        pos += hi - lo
    return out


def train_filter_bank(images, config: ConvConfig, seed: int = 0) -> FilterBank:
    """Fit every branch's filters on unit-normalized sampled patches."""
    arr = _as_images(images)
    mats = []
    for br in config.branches:
        patches = _sample_patches(arr, config, br, seed)
        patches, active = normalize_patches(patches)
        patches = patches[active]
        if patches.shape[0] == 0:
            raise ValueError(f"branch K={br.kernel}: every sampled patch was zero")
        lc = LearningConfig(m=br.filters, p=2.0, delta=br.delta, rank_r=2,
                            eps0=br.eps0, t_max=config.filter_t_max,
                            batch=config.filter_batch,
                            seed=subseed(seed, f"filters{br.kernel}"))
        sm, _ = plasticity.train(patches, lc, log_energy=False)
        mats.append(sm)
    return FilterBank(tuple(config.branches), tuple(mats))


def _hash_config(config: ConvConfig, k, activity, seed, overrides) -> LearningConfig:
    if config.hash is not None:
        return config.hash
    if k is None:
        raise ValueError("need either config.hash or a hash length k")
    base = {"m": int(round(k / activity)), "p": 2.0, "delta": 0.0, "rank_r": 2,
            "eps0": 2e-2, "t_max": 100, "batch": 100,
            "seed": subseed(seed, "hash")}
    base.update(overrides or {})
    base["rank_r"] = min(base["rank_r"], base["m"])
    return LearningConfig(**base)


def conv_fit(train, config: ConvConfig, k: Optional[int] = None, *,
             activity: float = 0.05, seed: int = 0, hash_overrides=None,
             bank: Optional[FilterBank] = None, workdir=None,
             log_energy: bool = False):
    """Fit the full pipeline; returns (ConvModel, train FeatureStore).

    Filters train per branch on sampled normalized patches, then the
    training set is pushed through the conv stack and the hash layer
    trains on the mean-centered features (centering happens on the fly,
    so memmapped feature matrices are never copied). The feature store is
    returned so callers hashing the training set itself can reuse it;
    pass it to release_features when done.
    """
    arr = _as_images(train)
    if arr.shape[0] == 0:
        raise ValueError("training set is empty")
    if bank is None:
        bank = train_filter_bank(arr, config, seed)
    feats = conv_features(bank, config, arr, workdir=workdir)
    x = feats.data
    total = np.zeros(x.shape[1], dtype=np.float64)
    for start in range(0, x.shape[0], 4096):
        total += x[start:start + 4096].astype(np.float64).sum(axis=0)
    mean = total / x.shape[0]
    hc = _hash_config(config, k, activity, seed, hash_overrides)
    hash_sm, _ = plasticity.train(x, hc, log_energy=log_energy, shift=mean)
    model = ConvModel(config, bank, hash_sm, mean, x.shape[1])
    return model, feats


# -------------------------------------------------------------- encoding

def encode_features(model: ConvModel, features, k: int, chunk: int = 2048) -> np.ndarray:
    """Hash precomputed feature rows; centering folds into an offset so
    the rows are read once, unmodified."""
    x = features.data if isinstance(features, FeatureStore) else np.asarray(features)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != model.feature_dim:
        raise DimensionMismatch(f"features d={x.shape[1]}, model d={model.feature_dim}")
    sm = model.hash_sm
    if not 1 <= k <= sm.m:
        raise KOutOfRange(f"k={k} not in [1, {sm.m}]")
    eff = plasticity.effective_weights(sm.weights, sm.config.p)
    eff32 = eff.astype(np.float32)
    offset = (eff @ model.feature_mean).astype(np.float32)
    codes = np.empty((x.shape[0], k), dtype=np.uint32)
    for start in range(0, x.shape[0], chunk):
        r = np.asarray(x[start:start + chunk], dtype=np.float32) @ eff32.T
        r -= offset
        codes[start:start + chunk] = hashers.topk_rows(r, k)
    return codes


def conv_encode_many(model: ConvModel, images, k: int) -> np.ndarray:
    """Raw images -> (n, k) sorted active-index rows, streamed in blocks."""
    arr = _as_images(images)
    sm = model.hash_sm
    if not 1 <= k <= sm.m:
        raise KOutOfRange(f"k={k} not in [1, {sm.m}]")
    eff = plasticity.effective_weights(sm.weights, sm.config.p)
    eff32 = eff.astype(np.float32)
    offset = (eff @ model.feature_mean).astype(np.float32)
    codes = np.empty((arr.shape[0], k), dtype=np.uint32)
    step = _block_images(model.config)
    for start in range(0, arr.shape[0], step):
        block = _features_block(model.bank, model.config, arr[start:start + step])
        r = block @ eff32.T
        r -= offset
        codes[start:start + block.shape[0]] = hashers.topk_rows(r, k)
    return codes


def conv_encode(model: ConvModel, image, k: int) -> hashers.SparseHashCode:
    """Hash one raw image through the fitted pipeline."""
    active = conv_encode_many(model, np.asarray(image)[None, :], k)[0]
    return hashers.SparseHashCode(model.hash_sm.m, k, active)


# ------------------------------------------------------------------ BHCV

_BHCV_BRANCH = "<IId"  # kernel, filters, delta


def save_conv(path, bank: FilterBank) -> None:
    """Filter bank container: branch metadata then one weight block each."""
    blob = [b"BHCV", struct.pack("<I", len(bank.branches))]
    for br in bank.branches:
        blob.append(struct.pack(_BHCV_BRANCH, br.kernel, br.filters, br.delta))
    for sm in bank.matrices:
        blob.append(plasticity.weights_to_bytes(sm))
    Path(path).write_bytes(b"".join(blob))


def load_conv(path) -> FilterBank:
    raw = Path(path).read_bytes()
    if raw[:4] != b"BHCV":
        raise BadMagic(f"{path}: expected magic BHCV, got {raw[:4]!r}")
    if len(raw) < 8:
        raise TruncatedFile(f"{path}: missing branch count")
    count = struct.unpack("<I", raw[4:8])[0]
    rec = struct.calcsize(_BHCV_BRANCH)
    offset = 8 + count * rec
    if len(raw) < offset:
        raise TruncatedFile(f"{path}: branch table needs {offset} bytes")
    metas = [struct.unpack(_BHCV_BRANCH, raw[8 + i * rec:8 + (i + 1) * rec])
             for i in range(count)]
    branches, mats = [], []
    for i, (kernel, filters, delta) in enumerate(metas):
        sm, offset = plasticity.weights_from_bytes(raw, offset, where=f"{path}[branch {i}]")
        if sm.m != filters:
            raise ParseError(f"{path}: branch {i} header says {filters} filters, "
                             f"block has {sm.m}")
        branches.append(ConvBranch(kernel=kernel, filters=filters, delta=delta,
                                   eps0=sm.config.eps0))
        mats.append(sm)
    return FilterBank(tuple(branches), tuple(mats))


def save_conv_model(prefix, model: ConvModel) -> None:
    """Three files under a common prefix: .bhcv bank, .hash.bhw1 layer,
    .json config echo (layout, inhibition, pooling, exact feature mean)."""
    prefix = str(prefix)
    save_conv(prefix + ".bhcv", model.bank)
    plasticity.save_weights(prefix + ".hash.bhw1", model.hash_sm)
    cfg = model.config
    doc = {
        "layout": list(cfg.layout),
        "k_ci": cfg.k_ci,
        "pool_kernel": cfg.pool_kernel,
        "pool_stride": cfg.pool_stride,
        "stride": cfg.stride,
        "patch_subsample": cfg.patch_subsample,
        "filter_batch": cfg.filter_batch,
        "filter_t_max": cfg.filter_t_max,
        "branches": [dataclasses.asdict(br) for br in cfg.branches],
        "hash": dataclasses.asdict(model.hash_sm.config),
        "feature_dim": model.feature_dim,
        "feature_mean": [float(v) for v in model.feature_mean],
    }
    Path(prefix + ".json").write_text(json.dumps(doc))


def load_conv_model(prefix) -> ConvModel:
    prefix = str(prefix)
    doc = json.loads(Path(prefix + ".json").read_text())
    bank = load_conv(prefix + ".bhcv")
    hash_sm = plasticity.load_weights(prefix + ".hash.bhw1")
    branches = tuple(ConvBranch(**br) for br in doc["branches"])
    config = ConvConfig(branches=branches, k_ci=doc["k_ci"],
                        layout=tuple(doc["layout"]),
                        pool_kernel=doc["pool_kernel"],
                        pool_stride=doc["pool_stride"], stride=doc["stride"],
                        patch_subsample=doc["patch_subsample"],
                        filter_batch=doc["filter_batch"],
                        filter_t_max=doc["filter_t_max"],
                        hash=LearningConfig(**doc["hash"]))
    mean = np.asarray(doc["feature_mean"], dtype=np.float64)
    if mean.shape[0] != doc["feature_dim"]:
        raise ParseError(f"{prefix}.json: feature mean length {mean.shape[0]} "
                         f"!= feature_dim {doc['feature_dim']}")
    return ConvModel(config, bank, hash_sm, mean, int(doc["feature_dim"]))


# --------------------------------------------------------------- presets

def mnist_conv_config(filters: int = 500, k_ci: int = 10,
                      patch_subsample: Optional[int] = 2_000_000) -> ConvConfig:
    """Two branches, K=3 and K=4, on 28x28 grayscale images."""
    branches = (ConvBranch(3, filters, 0.1, 1e-3),
                ConvBranch(4, filters, 0.1, 1e-3))
    return ConvConfig(branches=branches, k_ci=k_ci, layout=(28, 28, 1),
                      patch_subsample=patch_subsample)


def cifar_conv_config(filters: int = 400, k_ci: int = 1,
                      patch_subsample: Optional[int] = 2_000_000) -> ConvConfig:
    """Three branches, K=3/4/10, on 32x32 RGB images. The K=10 branch
    caps its own patch sample so the 300-dim patch matrix stays small."""
    branches = (ConvBranch(3, filters, 0.1, 1e-4),
                ConvBranch(4, filters, 0.2, 1e-4),
                ConvBranch(10, filters, 0.2, 1e-4, patch_subsample=1_000_000))
    return ConvConfig(branches=branches, k_ci=k_ci, layout=(32, 32, 3),
                      patch_subsample=patch_subsample)
