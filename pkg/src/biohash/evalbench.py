"""Ground truth, average precision, smoothness, sweeps, and protocol runs.

The protocol runner reproduces the benchmark pipeline end to end: split,
center with the training mean, fit the requested hasher, encode database
and queries, rank by Hamming distance, and report mAP at the protocol's
depth (times 100, as a percent).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import convnet, hashers, plasticity
from .codebank import CodeBank, scan_distances
from .datasets import DataSet, ProtocolSplit, center, protocol_split, shadow_transform
from .errors import DegenerateVariance, DimensionMismatch, EmptyQuerySet
from .hashers import DenseHashCode, SparseHashCode
from .plasticity import LearningConfig
from .seeds import subseed, substream

PROTOCOL_ACTIVITY = {
    "mnist_label": 0.05,
    "mnist_euclid100": 0.05,
    "cifar_label": 0.005,
    "glove_partition": 0.01,
}
PROTOCOL_LAYOUT = {
    "mnist_label": (28, 28, 1),
    "mnist_euclid100": (28, 28, 1),
    "cifar_label": (32, 32, 3),
}
METHODS = ("biohash", "bioconvhash", "flyhash", "simhash", "pcahash", "naive")


@dataclass
class GroundTruth:
    """Per-query relevance oracle: shared class labels or explicit id sets."""

    mode: str  # "labels" | "knn"
    query_labels: Optional[np.ndarray] = None
    db_labels: Optional[np.ndarray] = None
    relevant: Optional[list] = None  # per query: array of relevant db ids

    def relevance(self, query_pos: int, ids: np.ndarray) -> np.ndarray:
        if self.mode == "labels":
            return self.db_labels[ids] == self.query_labels[query_pos]
        return np.isin(ids, self.relevant[query_pos])


@dataclass
class EvalReport:
    protocol: str
    method: str
    k: int
    map_percent: float
    smooth_top: Optional[float] = None
    smooth_bottom: Optional[float] = None
    train_seconds: float = 0.0
    scan_seconds: float = 0.0
    config: dict = field(default_factory=dict)


# ------------------------------------------------------------ ground truth

def ground_truth_knn(database, queries, N: int, metric: str = "euclidean",
                     query_db_ids=None, chunk: int = 512) -> GroundTruth:
    """N nearest database rows per query, ties by ascending id.

    query_db_ids marks each query's own database row (or -1) so it can be
    excluded when the query set is drawn from the database itself.
    """
    X = np.asarray(getattr(database, "data", database), dtype=np.float64)
    Q = np.asarray(getattr(queries, "data", queries), dtype=np.float64)
    if X.shape[1] != Q.shape[1]:
        raise DimensionMismatch(f"database d={X.shape[1]}, queries d={Q.shape[1]}")
    if metric == "euclidean":
        xs = (X * X).sum(axis=1)
    elif metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        Xn = X / np.maximum(norms, 1e-300)[:, None]
    else:
        raise ValueError(f"unknown metric {metric!r}")
    relevant = []
    for start in range(0, Q.shape[0], chunk):
        qb = Q[start:start + chunk]
        if metric == "euclidean":
            dist = xs[None, :] - 2.0 * (qb @ X.T)  # + |q|^2 omitted: constant per query
        else:
            qn = qb / np.maximum(np.linalg.norm(qb, axis=1), 1e-300)[:, None]
            dist = -(qn @ Xn.T)
        for row in range(qb.shape[0]):
            drow = dist[row]
            if query_db_ids is not None:
                own = query_db_ids[start + row]
                if own >= 0:
                    drow = drow.copy()
                    drow[own] = np.inf
            order = np.argsort(drow, kind="stable")[:N]
            relevant.append(order.astype(np.int64))
    return GroundTruth("knn", relevant=relevant)


# --------------------------------------------------------------- AP / mAP

def ap_from_relevance(pattern, R: Optional[int] = None) -> float:
    """Average precision of a 1/0 relevance pattern in rank order.

    Precision at each relevant rank, averaged over the relevant ranks
    within the top R. No relevant item in the top R gives 0.
    """
    rel = np.asarray(pattern, dtype=bool)
    if R is not None:
        rel = rel[:R]
    hits = np.flatnonzero(rel)
    if hits.size == 0:
        return 0.0
    precis = np.arange(1, hits.size + 1, dtype=np.float64) / (hits + 1)
    return float(precis.mean())


def average_precision(ranked, gt: GroundTruth, query_pos: int,
                      R: Optional[int] = None) -> float:
    """AP of one RankedRetrieval under the given ground truth."""
    rel = gt.relevance(query_pos, np.asarray(ranked.ids))
    return ap_from_relevance(rel, R)


def mean_ap(aps) -> float:
    """Arithmetic mean of per-query APs, reported as a percent."""
    aps = np.asarray(list(aps), dtype=np.float64)
    if aps.size == 0:
        raise EmptyQuerySet("mean over zero queries")
    return float(aps.mean() * 100.0)


def evaluate_queries(bank: CodeBank, query_codes: np.ndarray, gt: GroundTruth,
                     R: Optional[int], exclude_ids=None) -> np.ndarray:
    """AP per query code against the bank (full exact scan each)."""
    n_q = query_codes.shape[0]
    aps = np.empty(n_q)
    for pos in range(n_q):
        if bank.kind == "sparse":
            code = SparseHashCode(bank.m, bank.k, query_codes[pos])
        else:
            code = DenseHashCode(bank.k, query_codes[pos])
        dist = scan_distances(bank, code)
        order = np.argsort(dist, kind="stable")
        if exclude_ids is not None and exclude_ids[pos] >= 0:
            order = order[order != exclude_ids[pos]]
        if R is not None:
            order = order[:R]
        aps[pos] = ap_from_relevance(gt.relevance(pos, order))
    return aps


# -------------------------------------------------------------- smoothness

def _pair_cosines(A: np.ndarray, i: np.ndarray, j: np.ndarray,
                  chunk: int = 8192) -> np.ndarray:
    norms = np.maximum(np.linalg.norm(A, axis=1), 1e-300)
    out = np.empty(i.size)
    for start in range(0, i.size, chunk):
        ii, jj = i[start:start + chunk], j[start:start + chunk]
        dots = np.einsum("ij,ij->i", A[ii], A[jj])
        out[start:start + chunk] = dots / (norms[ii] * norms[jj])
    return out


def _band_pearson(sim_in: np.ndarray, sim_hash: np.ndarray, band: str) -> float:
    if band == "top10":
        mask = sim_in >= np.quantile(sim_in, 0.9)
    elif band == "bottom10":
        mask = sim_in <= np.quantile(sim_in, 0.1)
    else:
        raise ValueError(f"unknown band {band!r}")
    a, b = sim_in[mask], sim_hash[mask]
    if a.std() == 0.0 or b.std() == 0.0:
        raise DegenerateVariance(f"constant similarities in band {band}")
    return float(np.corrcoef(a, b)[0, 1] * 100.0)


def _sample_pairs(n: int, sample_pairs: int, seed: int):
    if sample_pairs < 1000:
        raise ValueError("sample_pairs must be >= 1000")
    rng = substream(seed, "pairs")
    i = rng.integers(0, n, size=sample_pairs)
    j = rng.integers(0, n, size=sample_pairs)
    keep = i != j
    return i[keep], j[keep]


def functional_smoothness(input_data, codes, band: str = "top10",
                          sample_pairs: int = 100_000, seed: int = 0) -> float:
    """Pearson r (percent) between input and code cosine similarities,
    restricted to pairs whose input similarity falls in the given decile
    of the sampled distribution.

    codes is any row matrix comparable by cosine (expanded sign codes or
    arbitrary real vectors).
    """
    X = np.asarray(getattr(input_data, "data", input_data), dtype=np.float64)
    Y = np.asarray(codes, dtype=np.float64)
    if X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} inputs vs {Y.shape[0]} codes")
    i, j = _sample_pairs(X.shape[0], sample_pairs, seed)
    return _band_pearson(_pair_cosines(X, i, j), _pair_cosines(Y, i, j), band)


def smoothness_from_bank(input_data, bank: CodeBank, band: str,
                         sample_pairs: int = 100_000, seed: int = 0) -> float:
    """functional_smoothness against a CodeBank, without expanding sparse
    codes to dense form (cosine is 1 - 2 * hamming / m at fixed k)."""
    X = np.asarray(getattr(input_data, "data", input_data), dtype=np.float64)
    if X.shape[0] != bank.size:
        raise DimensionMismatch(f"{X.shape[0]} inputs vs {bank.size} codes")
    i, j = _sample_pairs(X.shape[0], sample_pairs, seed)
    sim_in = _pair_cosines(X, i, j)
    if bank.kind == "sparse":
        a, b = bank.codes[i], bank.codes[j]
        inter = (a[:, :, None] == b[:, None, :]).sum(axis=(1, 2))
        hamming = 2 * (bank.k - inter)
        sim_hash = 1.0 - 2.0 * hamming / bank.m
    else:
        dots = np.einsum("ij,ij->i", bank.codes[i].astype(np.float64),
                         bank.codes[j].astype(np.float64))
        sim_hash = dots / bank.k
    return _band_pearson(sim_in, sim_hash, band)


# ------------------------------------------------------------------ sweeps

def activity_sweep(ds: DataSet, split: ProtocolSplit, k: int, activities,
                   seed: int = 0, learn: Optional[dict] = None,
                   per_class: int = 100):
    """Train one hasher per activity and score it on a validation carve.

    The validation queries (per_class rows per class) come out of the train
    split; the remaining train rows serve as both training set and database.
    Returns a list of (activity, m, mAP percent) rows.
    """
    if ds.labels is None:
        raise DimensionMismatch("activity sweep needs labels for validation")
    train_ids = np.asarray(split.train_ids)
    rng = substream(seed, "val")
    labels = ds.labels[train_ids]
    picks = []
    for cls in np.unique(labels):
        ids = np.flatnonzero(labels == cls)
        picks.append(rng.choice(ids, size=per_class, replace=False))
    val_pos = np.sort(np.concatenate(picks))
    val_ids = train_ids[val_pos]
    fit_ids = np.setdiff1d(train_ids, val_ids)
    fit_ds, qds = ds.take(fit_ids), ds.take(val_ids)
    cfit, mean = center(fit_ds)
    cq, _ = center(qds, mean)
    gt = GroundTruth("labels", query_labels=qds.labels, db_labels=fit_ds.labels)
    rows = []
    for a in activities:
        m = round(k / a)
        if m < k:
            raise ValueError(f"activity {a} gives m={m} < k={k}")
        config = _learning_config(m, subseed(seed, f"sweep{a}"), learn)
        sm, _ = plasticity.train(cfit.data, config)
        bank = CodeBank("sparse", m, k, hashers.biohash_encode_many(sm, cfit.data, k))
        qcodes = hashers.biohash_encode_many(sm, cq.data, k)
        aps = evaluate_queries(bank, qcodes, gt, split.map_depth)
        rows.append((float(a), m, mean_ap(aps)))
    return rows


# ---------------------------------------------------------- protocol runs

def _learning_config(m: int, seed: int, overrides: Optional[dict]) -> LearningConfig:
    kwargs = dict(m=m, p=2.0, delta=0.0, rank_r=min(2, m), eps0=2e-2,
                  t_max=100, batch=100, seed=seed, converge_norm=1.06)
    if overrides:
        kwargs.update(overrides)
    return LearningConfig(**kwargs)


def _build_ground_truth(ds, split, raw_db, raw_queries):
    if split.ground_truth_mode == "labels":
        return GroundTruth("labels",
                           query_labels=ds.labels[split.query_ids],
                           db_labels=ds.labels[split.database_ids])
    metric = split.ground_truth_mode.split("_", 1)[1]
    self_ids = None
    if np.array_equal(split.query_ids, split.database_ids):
        self_ids = np.arange(len(split.database_ids))
    return ground_truth_knn(raw_db, raw_queries, split.gt_neighbors, metric,
                            query_db_ids=self_ids)


def _eval_one_split(ds, split, method, k, seed, activity, learn, conv_config,
                    shadow, layout, flyhash_m):
    raw_train = ds.take(split.train_ids)
    same_rows = np.array_equal(split.train_ids, split.database_ids)
    raw_db = raw_train if same_rows else ds.take(split.database_ids)
    raw_q = ds.take(split.query_ids)
    if shadow:
        raw_q = shadow_transform(raw_q, 0.8, 0.3, layout)
    gt = _build_ground_truth(ds, split, raw_db, raw_q)
    exclude = None
    if np.array_equal(split.query_ids, split.database_ids):
        exclude = np.arange(len(split.database_ids))

    t0 = time.perf_counter()
    if method == "bioconvhash":
        model, train_feats = convnet.conv_fit(raw_train, conv_config, k,
                                              activity=activity, seed=seed,
                                              hash_overrides=learn)
        train_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        if same_rows:
            db_codes = convnet.encode_features(model, train_feats, k)
        else:
            db_codes = convnet.conv_encode_many(model, raw_db.data, k)
        q_codes = convnet.conv_encode_many(model, raw_q.data, k)
        convnet.release_features(train_feats)
        bank = CodeBank("sparse", model.hash_sm.m, k, db_codes)
        aps = evaluate_queries(bank, q_codes, gt, split.map_depth, exclude)
        return mean_ap(aps), train_s, time.perf_counter() - t0, bank, None

    ctrain, mean = center(raw_train)
    cdb = ctrain if same_rows else center(raw_db, mean)[0]
    cq, _ = center(raw_q, mean)

    if method == "biohash":
        m = round(k / activity)
        config = _learning_config(m, subseed(seed, "train"), learn)
        sm, _ = plasticity.train(ctrain.data, config)
        train_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        bank = CodeBank("sparse", m, k, hashers.biohash_encode_many(sm, cdb.data, k))
        q_codes = hashers.biohash_encode_many(sm, cq.data, k)
    elif method == "naive":
        config = _learning_config(k, subseed(seed, "train"), learn)
        sm, _ = plasticity.train(ctrain.data, config)
        train_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        bank = CodeBank("dense", k, k, hashers.naive_encode_many(sm, cdb.data))
        q_codes = hashers.naive_encode_many(sm, cq.data)
    elif method == "flyhash":
        proj = hashers.build_projection("flyhash", ds.d, flyhash_m,
                                        seed=subseed(seed, "projection"))
        train_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        bank = CodeBank("sparse", proj.m, k, hashers.flyhash_encode_many(proj, cdb.data, k))
        q_codes = hashers.flyhash_encode_many(proj, cq.data, k)
    elif method == "simhash":
        proj = hashers.build_projection("simhash", ds.d, k,
                                        seed=subseed(seed, "projection"))
        train_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        bank = CodeBank("dense", k, k, hashers.simhash_encode_many(proj, cdb.data))
        q_codes = hashers.simhash_encode_many(proj, cq.data)
    elif method == "pcahash":
        rows = hashers.pcahash_fit(ctrain.data, k, seed=subseed(seed, "projection"))
        train_s = time.perf_counter() - t0
        t0 = time.perf_counter()
        bank = CodeBank("dense", k, k, hashers.pcahash_encode_many(rows, cdb.data))
        q_codes = hashers.pcahash_encode_many(rows, cq.data)
    else:
        raise ValueError(f"unknown method {method!r}")

    aps = evaluate_queries(bank, q_codes, gt, split.map_depth, exclude)
    return mean_ap(aps), train_s, time.perf_counter() - t0, bank, cdb


def run_protocol(ds: DataSet, protocol: str, method: str, k: int, *,
                 seed: int = 0, activity: Optional[float] = None,
                 learn: Optional[dict] = None, conv_config=None,
                 gt_metric: str = "cosine", shadow_queries: bool = False,
                 layout=None, flyhash_m: Optional[int] = None,
                 smoothness_pairs: int = 0, partitions: int = 10) -> EvalReport:
    """End-to-end benchmark cell: returns the mAP percent for one
    (protocol, method, k) combination.

    smoothness_pairs > 0 additionally reports top/bottom-decile functional
    smoothness over the database codes. The word-embedding protocol
    averages over `partitions` independent database draws.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if activity is None:
        activity = PROTOCOL_ACTIVITY.get(protocol, 0.05)
    if layout is None:
        layout = PROTOCOL_LAYOUT.get(protocol)
    if method == "bioconvhash" and conv_config is None:
        raise ValueError("bioconvhash needs a conv_config")

    echo = {"protocol": protocol, "method": method, "k": k, "seed": seed,
            "activity": activity, "learn": learn or {},
            "gt_metric": gt_metric, "shadow_queries": shadow_queries,
            "smoothness_pairs": smoothness_pairs}

    if protocol == "glove_partition":
        maps, train_s, scan_s = [], 0.0, 0.0
        for part in range(partitions):
            split = protocol_split(ds, protocol, subseed(seed, f"partition{part}"),
                                   gt_metric=gt_metric)
            mp, ts, ss, _, _ = _eval_one_split(ds, split, method, k, subseed(seed, f"fit{part}"),
                                               activity, learn, conv_config,
                                               False, layout, flyhash_m)
            maps.append(mp)
            train_s += ts
            scan_s += ss
        echo["partition_maps"] = maps
        return EvalReport(protocol, method, k, float(np.mean(maps)),
                          train_seconds=train_s, scan_seconds=scan_s, config=echo)

    split = protocol_split(ds, protocol, subseed(seed, "split"))
    mp, train_s, scan_s, bank, cdb = _eval_one_split(
        ds, split, method, k, seed, activity, learn, conv_config,
        shadow_queries, layout, flyhash_m)
    top = bottom = None
    if smoothness_pairs and cdb is not None:
        top = smoothness_from_bank(cdb.data, bank, "top10", smoothness_pairs,
                                   subseed(seed, "smooth"))
        bottom = smoothness_from_bank(cdb.data, bank, "bottom10", smoothness_pairs,
                                      subseed(seed, "smooth"))
    return EvalReport(protocol, method, k, mp, top, bottom, train_s, scan_s, echo)


# ----------------------------------------------------------------- reports

def write_reports_jsonl(path, reports):
    with open(path, "w") as f:
        for rep in reports:
            f.write(json.dumps(asdict(rep)) + "\n")


def format_table(reports) -> str:
    """Plain-text grid: one row per method, one column per hash length."""
    ks = sorted({r.k for r in reports})
    methods = []
    for rep in reports:
        if rep.method not in methods:
            methods.append(rep.method)
    cells = {(r.method, r.k): r.map_percent for r in reports}
    width = max(10, *(len(m) for m in methods)) + 2
    header = "method".ljust(width) + "".join(f"k={k}".rjust(9) for k in ks)
    lines = [header, "-" * len(header)]
    for method in methods:
        row = method.ljust(width)
        for k in ks:
            val = cells.get((method, k))
            row += (f"{val:9.2f}" if val is not None else "        -")
        lines.append(row)
    return "\n".join(lines) + "\n"
