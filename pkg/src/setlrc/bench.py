"""Timing harness comparing the online and fast classification paths.

Each scenario fixes the shape of the problem (classes, gallery images per
class, probe images, vector length), draws synthetic data for it, builds
the gallery once (timed separately, since the only build work beyond
stacking is pseudoinverse caching), and then times both residual paths on
identical probes. A correctness gate runs first: if the two modes do not
produce the same residuals to within 1e-6 relative, the benchmark aborts
rather than timing wrong answers. Every timed figure is the median over
``repeats`` runs after one discarded warm-up.

Timings are machine-specific; only orderings and ratios are meaningful.
Benchmarks run in a single worker so the numbers are stable.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

import numpy as np

from .classify import ProbeSet, residual_matrix
from .dataset import generate_synthetic
from .errors import ConditioningError, InvalidInputError
from .gallery import GalleryConfig, build_gallery
from .seeding import derive_seed

#: refuse scenarios whose working set would pass this many bytes
DEFAULT_MEMORY_BUDGET = 1 << 30


@dataclass(frozen=True)
class BenchScenario:
    """Problem size: Y classes, N gallery images each, one N_P-image probe set."""

    classes: int
    gallery_images: int
    probe_images: int
    tau: int

    def __post_init__(self):
        for name in ("classes", "gallery_images", "probe_images", "tau"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be at least 1")
        if self.gallery_images > self.tau:
            raise InvalidInputError(
                f"{self.gallery_images} gallery images per class will not fit "
                f"a vector length of {self.tau}"
            )

    @property
    def label(self) -> str:
        return (
            f"Y{self.classes}-N{self.gallery_images}"
            f"-P{self.probe_images}-t{self.tau}"
        )


@dataclass(frozen=True)
class BenchResult:
    """Median build/online/fast seconds and their ratio for one scenario."""

    scenario: BenchScenario
    repeats: int
    build_seconds: float | None = None
    online_seconds: float | None = None
    fast_seconds: float | None = None
    speedup: float | None = None
    note: str = ""
    skipped: bool = False

    def __post_init__(self):
        if not self.skipped:
            for name in ("build_seconds", "online_seconds", "fast_seconds"):
                value = getattr(self, name)
                if value is None or value <= 0:
                    raise InvalidInputError(f"{name} must be positive, got {value}")


def default_scenarios() -> list:
    """The grid the CLI runs when no sizes are given."""
    return [
        BenchScenario(classes=10, gallery_images=20, probe_images=10, tau=100),
        BenchScenario(classes=20, gallery_images=40, probe_images=20, tau=225),
        BenchScenario(classes=47, gallery_images=60, probe_images=20, tau=100),
    ]


def _estimated_bytes(sc: BenchScenario) -> int:
    per_set = max(sc.gallery_images, sc.probe_images)
    dataset = sc.classes * 2 * per_set * sc.tau
    gallery = 2 * sc.classes * sc.tau * sc.gallery_images
    work = 3 * sc.tau * sc.probe_images * sc.classes
    return 8 * (dataset + gallery + work)


def _median_seconds(fn, repeats: int) -> float:
    fn()  # warm-up, excluded
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def run_bench(
    scenarios,
    repeats: int = 5,
    seed: int = 0,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> list:
    """Time every scenario in both modes; see the module docstring."""
    if repeats < 3:
        raise InvalidInputError(
            f"repeats must be at least 3 for a stable median, got {repeats}"
        )
    results = []
    for i, sc in enumerate(scenarios):
        need = _estimated_bytes(sc)
        if need > memory_budget:
            results.append(
                BenchResult(
                    scenario=sc,
                    repeats=repeats,
                    note=(
                        f"skipped: estimated working set {need} bytes exceeds "
                        f"the {memory_budget}-byte budget"
                    ),
                    skipped=True,
                )
            )
            continue

        per_set = max(sc.gallery_images, sc.probe_images)
        data = generate_synthetic(
            classes=sc.classes,
            subspace_dim=min(5, sc.tau - 1),
            tau=sc.tau,
            sets_per_class=2,
            images_per_set=per_set,
            noise_sigma=8.0,
            seed=derive_seed(seed, "data", i),
        )
        gallery_vectors = {
            cid: list(data.get(cid, "set00").vectors[: sc.gallery_images])
            for cid in sorted(data.sets_by_class())
        }
        probes = ProbeSet.from_vectors(
            list(data.get("class00", "set01").vectors[: sc.probe_images]),
            set_id=sc.label,
        )
        build_cfg = GalleryConfig(
            resolution=data.resolution,
            cap=sc.gallery_images,
            seed=derive_seed(seed, "build", i),
            precompute=True,
        )

        def build():
            return build_gallery(gallery_vectors, build_cfg)

        gallery = build()

        online = residual_matrix(gallery, probes, "online")
        fast = residual_matrix(gallery, probes, "fast")
        rel = np.abs(online.values - fast.values) / np.maximum(
            np.abs(online.values), 1e-300
        )
        if rel.max() > 1e-6:
            raise ConditioningError(
                f"scenario {sc.label}: online and fast residuals disagree "
                f"(max relative difference {rel.max():.3e}); not timing "
                "inconsistent modes"
            )

        build_s = _median_seconds(build, repeats)
        online_s = _median_seconds(
            lambda: residual_matrix(gallery, probes, "online"), repeats
        )
        fast_s = _median_seconds(
            lambda: residual_matrix(gallery, probes, "fast"), repeats
        )
        note = ""
        if sc.probe_images == 1:
            note = "single-image probe: batch advantage not expected"
        results.append(
            BenchResult(
                scenario=sc,
                repeats=repeats,
                build_seconds=build_s,
                online_seconds=online_s,
                fast_seconds=fast_s,
                speedup=online_s / fast_s,
                note=note,
            )
        )
    return results


def bench_record(result: BenchResult) -> str:
    """One tab-separated line per scenario with both modes' medians."""
    sc = result.scenario
    fields = [
        sc.label,
        str(sc.classes),
        str(sc.gallery_images),
        str(sc.probe_images),
        str(sc.tau),
        str(result.repeats),
    ]
    if result.skipped:
        fields.extend(["-", "-", "-", "-"])
    else:
        fields.extend(
            [
                f"{result.build_seconds:.6f}",
                f"{result.online_seconds:.6f}",
                f"{result.fast_seconds:.6f}",
                f"{result.speedup:.3f}",
            ]
        )
    fields.append(result.note)
    return "\t".join(fields)
