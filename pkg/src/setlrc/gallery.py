"""Per-class regressor subspaces: construction, conditioning, persistence.

Each enrolled class is represented by a regressor matrix whose columns are
the gallery feature vectors of that class (tau rows, N_zeta columns, with
tau >= N_zeta so least squares is solvable). A regressor that turns out
rank deficient is repaired by adding a small uniform perturbation drawn
from [-0.5, +0.5] per entry; the draw is seeded so repaired galleries are
reproducible. Optionally the Moore-Penrose pseudoinverse is precomputed
and stored alongside the matrix to support the fast classification path.

Galleries persist to a little-endian binary container (magic ``ISRG``)
with a trailing CRC32; matrices are stored column-major as 64-bit floats
so a round trip is bit-exact.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConditioningError, ConstraintError, InvalidInputError
from .preprocess import PreprocessConfig
from .seeding import derive_seed

_MAGIC = b"ISRG"
_FORMAT_VERSION = 1

#: relative smallest-singular-value cutoff used by detect_singularity
SINGULARITY_RTOL = 1e-10

#: default gallery cap as a fraction of the vector length
DEFAULT_CAP_FRACTION = 0.8

#: total seeded perturbation attempts before giving up
_MAX_PERTURB_ATTEMPTS = 3


@dataclass(frozen=True)
class Regressor:
    """One class subspace: a tau x N_zeta matrix of gallery columns."""

    class_id: str
    matrix: np.ndarray
    perturbed: bool = False
    perturbation_seed: int | None = None
    pinv: np.ndarray | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise InvalidInputError(
                f"regressor matrix must be 2-d, got shape {m.shape}"
            )
        tau, n = m.shape
        if n < 1:
            raise InvalidInputError("regressor needs at least one column")
        if n > tau:
            raise ConstraintError(
                f"class {self.class_id!r}: {n} gallery columns but only {tau} "
                "pixels per vector; the vector length must be greater than or "
                "equal to the number of gallery images. Reduce the set with "
                "subsample_gallery or raise the resolution."
            )
        object.__setattr__(self, "matrix", m)
        if self.pinv is not None:
            p = np.asarray(self.pinv, dtype=np.float64)
            if p.shape != (n, tau):
                raise InvalidInputError(
                    f"pseudoinverse shape {p.shape} does not match "
                    f"matrix shape {m.shape}"
                )
            object.__setattr__(self, "pinv", p)

    @property
    def tau(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class Gallery:
    """An ordered collection of class regressors at one shared resolution."""

    resolution: tuple[int, int]
    classes: tuple[Regressor, ...]
    preprocessing_config: PreprocessConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        c, d = self.resolution
        tau = int(c) * int(d)
        seen = set()
        for reg in self.classes:
            if reg.class_id in seen:
                raise InvalidInputError(f"duplicate class id {reg.class_id!r}")
            seen.add(reg.class_id)
            if reg.tau != tau:
                raise InvalidInputError(
                    f"class {reg.class_id!r} has vectors of length {reg.tau} "
                    f"but the gallery resolution {c}x{d} implies {tau}"
                )

    @property
    def class_ids(self) -> list[str]:
        return [reg.class_id for reg in self.classes]

    def __len__(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class GalleryConfig:
    """Knobs for build_gallery.

    ``cap`` bounds the number of gallery images kept per class; ``None``
    means floor(0.8 * tau), keeping the column count well below the pixel
    count. ``precompute`` controls whether pseudoinverses are stored for
    the fast path. ``histeq`` is recorded so the gallery remembers how its
    vectors were preprocessed.
    """

    resolution: tuple[int, int]
    cap: int | None = None
    seed: int = 0
    precompute: bool = True
    histeq: bool = True

    def effective_cap(self, tau: int) -> int:
        if self.cap is not None:
            if self.cap < 1:
                raise InvalidInputError("gallery cap must be at least 1")
            return int(self.cap)
        return max(1, math.floor(DEFAULT_CAP_FRACTION * tau))


def build_regressor(vectors, class_id: str) -> Regressor:
    """Stack feature vectors as the columns of a class regressor.

    Column order follows input order. Raises a constraint error when the
    set is larger than the vector length (more columns than rows).
    """
    if len(vectors) == 0:
        raise InvalidInputError(f"class {class_id!r}: no vectors given")
    lengths = {np.asarray(v).shape for v in vectors}
    if len(lengths) > 1 or any(len(s) != 1 for s in lengths):
        raise InvalidInputError(
            f"class {class_id!r}: vectors must all be 1-d and equally long, "
            f"got shapes {sorted(lengths)}"
        )
    matrix = np.column_stack([np.asarray(v, dtype=np.float64) for v in vectors])
    return Regressor(class_id=class_id, matrix=matrix)


def subsample_gallery(vectors, cap: int, seed: int) -> list:
    """Keep at most ``cap`` vectors, chosen uniformly without replacement.

    Deterministic for a given seed; the survivors keep their original
    relative order. A set already within the cap is returned as is.
    """
    if cap < 1:
        raise InvalidInputError("gallery cap must be at least 1")
    vectors = list(vectors)
    if len(vectors) <= cap:
        return vectors
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(vectors), size=cap, replace=False))
    return [vectors[i] for i in keep]


def detect_singularity(reg: Regressor) -> bool:
    """True when the regressor does not have full column rank.

    Operationalized as the smallest singular value falling at or below
    1e-10 times the largest.
    """
    svals = np.linalg.svd(reg.matrix, compute_uv=False)
    return bool(svals[-1] <= SINGULARITY_RTOL * svals[0])


def perturb(reg: Regressor, seed: int) -> Regressor:
    """Add seeded uniform noise in [-0.5, +0.5] to break rank deficiency.

    Each attempt draws a fresh entry-wise perturbation from a seed derived
    off the given one and keeps the first candidate with full column rank;
    after three failed attempts a conditioning error is raised, which in
    practice signals pathological input rather than bad luck. Any stored
    pseudoinverse is dropped since it no longer matches the matrix.
    """
    for attempt in range(_MAX_PERTURB_ATTEMPTS):
        attempt_seed = seed if attempt == 0 else derive_seed(seed, "retry", attempt)
        rng = np.random.default_rng(attempt_seed)
        noise = rng.uniform(-0.5, 0.5, size=reg.matrix.shape)
        candidate = Regressor(
            class_id=reg.class_id,
            matrix=reg.matrix + noise,
            perturbed=True,
            perturbation_seed=attempt_seed,
        )
        if not detect_singularity(candidate):
            return candidate
    raise ConditioningError(
        f"class {reg.class_id!r}: still rank deficient after "
        f"{_MAX_PERTURB_ATTEMPTS} perturbation attempts"
    )


def precompute_pseudoinverse(reg: Regressor) -> Regressor:
    """Attach the Moore-Penrose pseudoinverse for the fast path."""
    if detect_singularity(reg):
        raise ConditioningError(
            f"class {reg.class_id!r}: cannot precompute the pseudoinverse of "
            "a rank-deficient regressor; perturb it first"
        )
    return replace(reg, pinv=np.linalg.pinv(reg.matrix))


def build_gallery(sets: dict, config: GalleryConfig) -> Gallery:
    """Build every class regressor from a class_id -> vectors mapping.

    Per class: subsample to the configured cap, stack the columns, perturb
    only if the result is rank deficient, and precompute the pseudoinverse
    when the config asks for it. Per-class seeds derive from the master
    seed and the class id, so serial and parallel builds agree.
    """
    if not sets:
        raise InvalidInputError("gallery needs at least one class")
    c, d = config.resolution
    tau = int(c) * int(d)
    cap = config.effective_cap(tau)

    regressors = []
    for class_id, vectors in sets.items():
        class_seed = derive_seed(config.seed, class_id)
        kept = subsample_gallery(vectors, cap, class_seed)
        for v in kept:
            if np.asarray(v).shape != (tau,):
                raise InvalidInputError(
                    f"class {class_id!r}: vector of shape "
                    f"{np.asarray(v).shape} does not match resolution "
                    f"{c}x{d} (expected length {tau})"
                )
        reg = build_regressor(kept, class_id)
        if detect_singularity(reg):
            reg = perturb(reg, derive_seed(class_seed, "perturb"))
        if config.precompute:
            reg = precompute_pseudoinverse(reg)
        regressors.append(reg)

    return Gallery(
        resolution=(int(c), int(d)),
        classes=tuple(regressors),
        preprocessing_config=PreprocessConfig(
            resolution=(int(c), int(d)), histeq=config.histeq
        ),
    )


def save_gallery(gallery: Gallery, path: str | Path) -> None:
    """Write the gallery to its binary container format."""
    c, d = gallery.resolution
    blob = bytearray()
    blob += _MAGIC
    blob += struct.pack("<IHHI", _FORMAT_VERSION, c, d, len(gallery.classes))
    for reg in gallery.classes:
        ident = reg.class_id.encode("utf-8")
        blob += struct.pack("<H", len(ident))
        blob += ident
        seed_field = reg.perturbation_seed if reg.perturbation_seed is not None else 0
        blob += struct.pack("<IBQ", reg.n_columns, int(reg.perturbed), seed_field)
        blob += np.ascontiguousarray(reg.matrix.T).astype("<f8").tobytes()
        if reg.pinv is None:
            blob += struct.pack("<B", 0)
        else:
            blob += struct.pack("<B", 1)
            blob += np.ascontiguousarray(reg.pinv).astype("<f8").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def load_gallery(path: str | Path) -> Gallery:
    """Read a gallery back; verifies the checksum, magic, and version."""
    data = Path(path).read_bytes()
    if len(data) < 20:
        raise InvalidInputError(f"{path}: too short to be a gallery file")
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise InvalidInputError(f"{path}: checksum mismatch, file is corrupt")
    if data[:4] != _MAGIC:
        raise InvalidInputError(f"{path}: not a gallery file (bad magic)")
    version, c, d, count = struct.unpack_from("<IHHI", data, 4)
    if version != _FORMAT_VERSION:
        raise InvalidInputError(
            f"{path}: unsupported format version {version}"
        )
    tau = c * d
    offset = 16
    regressors = []
    try:
        for _ in range(count):
            (id_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            class_id = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            n, perturbed, seed_field = struct.unpack_from("<IBQ", data, offset)
            offset += 13
            matrix = (
                np.frombuffer(data, dtype="<f8", count=tau * n, offset=offset)
                .reshape((tau, n), order="F")
                .copy()
            )
            offset += tau * n * 8
            (has_pinv,) = struct.unpack_from("<B", data, offset)
            offset += 1
            pinv = None
            if has_pinv:
                pinv = (
                    np.frombuffer(data, dtype="<f8", count=n * tau, offset=offset)
                    .reshape((n, tau))
                    .copy()
                )
                offset += n * tau * 8
            regressors.append(
                Regressor(
                    class_id=class_id,
                    matrix=matrix,
                    perturbed=bool(perturbed),
                    perturbation_seed=seed_field if perturbed else None,
                    pinv=pinv,
                )
            )
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"{path}: malformed gallery file ({exc})") from exc
    if offset != len(data) - 4:
        raise InvalidInputError(f"{path}: trailing bytes after class data")
    return Gallery(resolution=(c, d), classes=tuple(regressors))
