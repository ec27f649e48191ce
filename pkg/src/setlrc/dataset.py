"""Dataset ingestion, split protocols, synthetic data, and evaluation.

Disk datasets are described by a JSON manifest (or discovered from a
``root/<class>/<set>/<images>`` directory layout) and materialized into
in-memory feature vectors via the preprocessing pipeline. A seeded split
protocol assigns whole image sets to gallery or test roles per fold, the
engine classifies every test set, and the result is summarized as
percentage accuracy per strategy with confusion counts and timings.

A synthetic generator provides ground-truth data at desk scale: each
class occupies a random low-dimensional subspace, images are non-negative
combinations of its basis rescaled into pixel range, and Gaussian pixel
noise controls the difficulty.

Manifest schema (JSON object)::

    {
      "resolution": [rows, cols],
      "histeq": true,              // optional, default true
      "root": "frames",            // optional, relative to the manifest file
      "entries": [
        {"class": "ana", "set": "s1", "images": ["ana/s1/a.png", ...]},
        ...
      ]
    }

Image paths resolve against the manifest directory joined with ``root``.
Entries are ordered lexicographically by class then set id, and "first k"
image caps refer to that order.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classify import (
    DEFAULT_BETA,
    ProbeSet,
    decide,
    residual_matrix,
)
from .errors import (
    ConfigurationError,
    InvalidInputError,
    ManifestError,
    ProtocolError,
)
from .gallery import GalleryConfig, build_gallery
from .preprocess import preprocess_image, read_image
from .seeding import derive_seed

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".pgm", ".tif", ".tiff"}

#: named gallery-assignment rules from the common evaluation protocols
NAMED_RULES = {
    "one-video": 1,
    "two-sets": 2,
    "three-videos": 3,
    "five-sets": 5,
}


@dataclass(frozen=True)
class ManifestEntry:
    class_id: str
    set_id: str
    paths: tuple[Path, ...]


@dataclass(frozen=True)
class DatasetManifest:
    """A validated description of an on-disk image-set dataset."""

    root: Path
    entries: tuple[ManifestEntry, ...]
    resolution: tuple[int, int]
    histeq: bool = True

    def sets_by_class(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out.setdefault(e.class_id, []).append(e.set_id)
        return out


@dataclass(frozen=True)
class SetRecord:
    class_id: str
    set_id: str
    vectors: tuple


@dataclass(frozen=True)
class VectorDataset:
    """Image sets already reduced to feature vectors (disk or synthetic)."""

    resolution: tuple[int, int]
    sets: tuple[SetRecord, ...]

    def sets_by_class(self) -> dict:
        out: dict = {}
        for rec in self.sets:
            out.setdefault(rec.class_id, []).append(rec.set_id)
        return out

    def get(self, class_id: str, set_id: str) -> SetRecord:
        for rec in self.sets:
            if rec.class_id == class_id and rec.set_id == set_id:
                return rec
        raise InvalidInputError(f"no set {set_id!r} for class {class_id!r}")


@dataclass(frozen=True)
class SplitProtocol:
    """How sets are assigned to gallery/test roles across seeded folds.

    ``gallery_sets_per_class`` is a count or one of the named rules in
    ``NAMED_RULES``; ``image_cap`` keeps only the first k images of every
    set; ``gallery_cap`` bounds the per-class gallery columns after sets
    are merged (None delegates to the builder default).
    """

    gallery_sets_per_class: int | str = 1
    image_cap: int | None = None
    gallery_cap: int | None = None
    folds: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if self.folds < 1:
            raise InvalidInputError("folds must be at least 1")
        for cap in (self.image_cap, self.gallery_cap):
            if cap is not None and cap < 1:
                raise InvalidInputError("caps must be at least 1 (or None)")
        self.gallery_count  # validates the rule

    @property
    def gallery_count(self) -> int:
        rule = self.gallery_sets_per_class
        if isinstance(rule, str):
            if rule not in NAMED_RULES:
                raise ProtocolError(
                    f"unknown gallery rule {rule!r}; choose from "
                    f"{sorted(NAMED_RULES)} or give a count"
                )
            return NAMED_RULES[rule]
        if rule < 1:
            raise ProtocolError("gallery_sets_per_class must be at least 1")
        return int(rule)


@dataclass(frozen=True)
class Fold:
    index: int
    gallery_sets: dict
    test_sets: tuple


@dataclass(frozen=True)
class EngineConfig:
    """Classifier-side knobs for an evaluation run."""

    resolution: tuple[int, int] | None = None
    histeq: bool | None = None
    mode: str | None = None
    beta: float = DEFAULT_BETA
    normalize: bool = True


@dataclass(frozen=True)
class EvaluationReport:
    """Accuracies, confusion counts, and timings for one evaluation run."""

    resolution: tuple[int, int]
    strategies: tuple[str, ...]
    class_order: tuple[str, ...]
    folds: int
    fold_accuracy: dict
    mean_accuracy: dict
    confusion: dict
    build_seconds: tuple[float, ...]
    classify_seconds: tuple[float, ...]
    test_sets_total: int


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse and validate a JSON dataset manifest."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"manifest {path} must be a JSON object")

    try:
        c, d = doc["resolution"]
    except (KeyError, TypeError, ValueError):
        raise ManifestError(
            f"manifest {path} needs a two-element 'resolution' entry"
        ) from None
    histeq = bool(doc.get("histeq", True))
    root = path.parent / doc.get("root", ".")

    raw_entries = doc.get("entries")
    if not raw_entries:
        raise ManifestError(f"manifest {path} lists no entries")
    entries = []
    seen = set()
    for item in raw_entries:
        try:
            class_id = str(item["class"])
            set_id = str(item["set"])
            images = list(item["images"])
        except (KeyError, TypeError) as exc:
            raise ManifestError(
                f"manifest {path}: each entry needs 'class', 'set', 'images' "
                f"({exc})"
            ) from exc
        if (class_id, set_id) in seen:
            raise ManifestError(
                f"manifest {path}: duplicate entry {class_id!r}/{set_id!r}"
            )
        seen.add((class_id, set_id))
        if not images:
            raise ManifestError(
                f"manifest {path}: entry {class_id!r}/{set_id!r} has no images"
            )
        paths = []
        for rel in images:
            p = root / rel
            if not p.is_file():
                raise ManifestError(f"manifest {path}: missing image file {p}")
            paths.append(p)
        entries.append(ManifestEntry(class_id, set_id, tuple(paths)))

    entries.sort(key=lambda e: (e.class_id, e.set_id))
    return DatasetManifest(
        root=root,
        entries=tuple(entries),
        resolution=(int(c), int(d)),
        histeq=histeq,
    )


def discover_manifest(
    root: str | Path, resolution: tuple[int, int], histeq: bool = True
) -> DatasetManifest:
    """Build a manifest from a ``root/<class>/<set>/<images>`` layout."""
    root = Path(root)
    if not root.is_dir():
        raise ManifestError(f"dataset root {root} is not a directory")
    entries = []
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for set_dir in sorted(p for p in class_dir.iterdir() if p.is_dir()):
            images = tuple(
                sorted(
                    p
                    for p in set_dir.iterdir()
                    if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
                )
            )
            if not images:
                raise ManifestError(f"set directory {set_dir} holds no images")
            entries.append(ManifestEntry(class_dir.name, set_dir.name, images))
    if not entries:
        raise ManifestError(f"no class/set directories found under {root}")
    return DatasetManifest(
        root=root,
        entries=tuple(entries),
        resolution=resolution,
        histeq=histeq,
    )


def materialize(
    manifest: DatasetManifest,
    resolution: tuple[int, int] | None = None,
    histeq: bool | None = None,
) -> VectorDataset:
    """Read, preprocess, and vectorize every image in the manifest."""
    res = resolution if resolution is not None else manifest.resolution
    eq = manifest.histeq if histeq is None else histeq
    records = []
    for entry in manifest.entries:
        vectors = tuple(
            preprocess_image(read_image(p), res, histeq=eq) for p in entry.paths
        )
        records.append(SetRecord(entry.class_id, entry.set_id, vectors))
    return VectorDataset(resolution=res, sets=tuple(records))


def make_splits(data, protocol: SplitProtocol) -> list:
    """Assign sets to gallery/test roles for every fold.

    Per fold and class the gallery sets are a uniform seeded choice; every
    remaining set of that class becomes an independent test set. Fold f
    draws from a seed derived off (master_seed, f), so folds are
    reproducible individually and in parallel.
    """
    by_class = data.sets_by_class()
    count = protocol.gallery_count
    for class_id, set_ids in by_class.items():
        if len(set_ids) <= count:
            raise ProtocolError(
                f"class {class_id!r} has {len(set_ids)} sets; need more than "
                f"{count} to hold out gallery sets"
            )
    folds = []
    for f in range(protocol.folds):
        rng = np.random.default_rng(derive_seed(protocol.master_seed, f))
        gallery_sets = {}
        test_sets = []
        for class_id in sorted(by_class):
            set_ids = by_class[class_id]
            chosen = np.sort(rng.choice(len(set_ids), size=count, replace=False))
            chosen_ids = tuple(set_ids[i] for i in chosen)
            gallery_sets[class_id] = chosen_ids
            test_sets.extend(
                (class_id, sid) for sid in set_ids if sid not in chosen_ids
            )
        folds.append(
            Fold(index=f, gallery_sets=gallery_sets, test_sets=tuple(test_sets))
        )
    return folds


def _capped(vectors, cap):
    return list(vectors if cap is None else vectors[:cap])


def fold_data(dataset: VectorDataset, fold: Fold, protocol: SplitProtocol):
    """Materialize one fold: per-class gallery vectors and probe sets."""
    gallery_vectors = {}
    for class_id, set_ids in fold.gallery_sets.items():
        merged = []
        for sid in set_ids:
            merged.extend(_capped(dataset.get(class_id, sid).vectors, protocol.image_cap))
        gallery_vectors[class_id] = merged
    probes = []
    for class_id, set_id in fold.test_sets:
        rec = dataset.get(class_id, set_id)
        probes.append(
            ProbeSet.from_vectors(
                _capped(rec.vectors, protocol.image_cap),
                set_id=f"{class_id}/{set_id}",
                true_class=class_id,
            )
        )
    return gallery_vectors, probes


def generate_synthetic(
    classes: int,
    subspace_dim: int,
    tau: int,
    sets_per_class: int,
    images_per_set: int,
    noise_sigma: float,
    seed: int,
) -> VectorDataset:
    """Draw a dataset of noisy low-dimensional class subspaces.

    Every class gets a random basis of ``subspace_dim`` directions in
    tau-space; each image is a non-negative combination of that basis,
    affinely rescaled per class into [0, 255] and rounded to whole pixel
    values, then perturbed by clipped Gaussian noise of the requested
    sigma. The rounding step alone leaves a small reconstruction floor,
    so even sigma 0 is not exactly on-subspace.
    """
    if not 1 <= subspace_dim < tau:
        raise InvalidInputError(
            f"subspace dimension must be at least 1 and below the vector "
            f"length {tau}, got {subspace_dim}"
        )
    if classes < 1 or sets_per_class < 1 or images_per_set < 1:
        raise InvalidInputError("counts must all be at least 1")
    if noise_sigma < 0:
        raise InvalidInputError("noise sigma cannot be negative")

    rng = np.random.default_rng(seed)
    c, d = _factor_resolution(tau)
    records = []
    for y in range(classes):
        basis = rng.uniform(0.0, 1.0, size=(tau, subspace_dim))
        coeffs = rng.uniform(
            0.0, 1.0, size=(sets_per_class * images_per_set, subspace_dim)
        )
        raw = coeffs @ basis.T
        lo, hi = raw.min(), raw.max()
        scale = 255.0 / (hi - lo) if hi > lo else 0.0
        pixels = np.rint((raw - lo) * scale)
        noise = rng.normal(0.0, noise_sigma, size=pixels.shape)
        if noise_sigma > 0:
            pixels = np.clip(pixels + noise, 0.0, 255.0)
        class_id = f"class{y:02d}"
        for s in range(sets_per_class):
            block = pixels[s * images_per_set : (s + 1) * images_per_set]
            records.append(
                SetRecord(
                    class_id=class_id,
                    set_id=f"set{s:02d}",
                    vectors=tuple(np.array(row) for row in block),
                )
            )
    return VectorDataset(resolution=(c, d), sets=tuple(records))


def _factor_resolution(tau: int) -> tuple[int, int]:
    """Split tau into the most square (rows, cols) pair available."""
    best = (1, tau)
    for c in range(1, int(np.sqrt(tau)) + 1):
        if tau % c == 0:
            best = (c, tau // c)
    return best


def evaluate(
    data,
    protocol: SplitProtocol,
    strategies=("MV", "NN", "EWV"),
    config: EngineConfig = EngineConfig(),
) -> EvaluationReport:
    """Run the full fold protocol and score each strategy.

    Accuracy is 100 times the fraction of correctly classified test sets,
    averaged over folds. The residual matrix of each test set is computed
    once and shared by all strategies. Timings are wall-clock seconds and
    naturally vary run to run; everything else is deterministic given the
    inputs.
    """
    if isinstance(data, DatasetManifest):
        dataset = materialize(data, config.resolution, config.histeq)
    else:
        dataset = data
        if config.resolution is not None and tuple(config.resolution) != tuple(
            dataset.resolution
        ):
            raise ConfigurationError(
                f"vector data at resolution {dataset.resolution} cannot be "
                f"rescored at {config.resolution}"
            )
    resolution = dataset.resolution
    strategies = tuple(s.upper() for s in strategies)
    if config.mode not in (None, "online", "fast"):
        raise ConfigurationError(f"unknown mode {config.mode!r}")
    mode = config.mode or "fast"
    precompute = mode == "fast"

    folds = make_splits(dataset, protocol)
    class_order = tuple(sorted(dataset.sets_by_class()))
    index_of = {cid: i for i, cid in enumerate(class_order)}
    n_classes = len(class_order)

    fold_accuracy = {s: [] for s in strategies}
    confusion = {s: np.zeros((n_classes, n_classes), dtype=np.int64) for s in strategies}
    build_seconds = []
    classify_seconds = []
    total_tests = 0

    for fold in folds:
        gallery_vectors, probes = fold_data(dataset, fold, protocol)
        build_cfg = GalleryConfig(
            resolution=resolution,
            cap=protocol.gallery_cap,
            seed=derive_seed(protocol.master_seed, "build", fold.index),
            precompute=precompute,
        )
        t0 = time.perf_counter()
        gallery = build_gallery(gallery_vectors, build_cfg)
        build_seconds.append(time.perf_counter() - t0)

        correct = {s: 0 for s in strategies}
        t0 = time.perf_counter()
        for probe_set in probes:
            R = residual_matrix(gallery, probe_set, mode)
            for s in strategies:
                decision = decide(
                    R, s, beta=config.beta, normalize=config.normalize
                )
                if decision.predicted == probe_set.true_class:
                    correct[s] += 1
                confusion[s][
                    index_of[probe_set.true_class], index_of[decision.predicted]
                ] += 1
        classify_seconds.append(time.perf_counter() - t0)

        total_tests += len(probes)
        for s in strategies:
            fold_accuracy[s].append(100.0 * correct[s] / len(probes))

    return EvaluationReport(
        resolution=resolution,
        strategies=strategies,
        class_order=class_order,
        folds=protocol.folds,
        fold_accuracy={s: tuple(v) for s, v in fold_accuracy.items()},
        mean_accuracy={s: float(np.mean(fold_accuracy[s])) for s in strategies},
        confusion=confusion,
        build_seconds=tuple(build_seconds),
        classify_seconds=tuple(classify_seconds),
        test_sets_total=total_tests,
    )
