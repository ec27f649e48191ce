"""Command-line interface: build, classify, eval, and bench.

Every option can also come from an environment variable named after it
with the ``SETLRC_`` prefix (for example ``SETLRC_RESOLUTION`` backs
``--resolution``); explicit flags beat the environment, which beats the
built-in defaults. Data goes to standard output (or ``--out``),
human-readable summaries and progress go to standard error, and the exit
code is zero exactly when no error occurred.

Commands that consume randomness (build, eval, bench) derive every draw
from their ``--seed``; classification itself is deterministic and takes
no seed. Eval and bench render PNG figures when the records go to a file
(written alongside it) or when ``--figures DIR`` names a directory;
``--no-figures`` turns them off.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import click

from .bench import BenchScenario, default_scenarios, run_bench
from .classify import ProbeSet, decide, decision_record, residual_matrix
from .dataset import (
    DatasetManifest,
    EngineConfig,
    SplitProtocol,
    discover_manifest,
    evaluate,
    generate_synthetic,
    load_manifest,
    materialize,
)
from .errors import ConfigurationError, SetLrcError
from .gallery import GalleryConfig, build_gallery, load_gallery, save_gallery
from .report import (
    bench_figures,
    bench_records,
    bench_table,
    eval_figures,
    eval_records,
    eval_table,
)

DEFAULT_RESOLUTION = (20, 20)

_ALL_STRATEGIES = ("MV", "NN", "EWV")


@dataclass(frozen=True)
class RunConfig:
    """Everything a command invocation resolved from flags/env/defaults."""

    command: str
    resolution: tuple[int, int] | None = None
    strategy: str = "ewv"
    beta: float = 2.0
    normalize: bool = True
    mode: str | None = None
    gallery_cap: int | None = None
    seed: int = 0
    folds: int = 10
    manifest: Path | None = None
    gallery: Path | None = None
    out: Path | None = None
    histeq: bool | None = None
    gallery_sets: int | str = 1
    image_cap: int | None = None
    synthetic: tuple | None = None
    scenarios: tuple = ()
    repeats: int = 5
    figures: Path | None = None
    no_figures: bool = False

    def __post_init__(self):
        if self.beta <= 0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.resolution is not None:
            c, d = self.resolution
            if c < 1 or d < 1:
                raise ConfigurationError(
                    f"resolution must be a positive pair, got {c}x{d}"
                )

    def strategy_list(self) -> tuple:
        if self.strategy == "all":
            return _ALL_STRATEGIES
        return (self.strategy.upper(),)


def _load_dataset_description(cfg: RunConfig) -> DatasetManifest:
    """Manifest path or dataset directory -> validated manifest."""
    path = cfg.manifest
    if path.is_dir():
        return discover_manifest(
            path,
            resolution=cfg.resolution or DEFAULT_RESOLUTION,
            histeq=cfg.histeq if cfg.histeq is not None else True,
        )
    return load_manifest(path)


def cmd_build(cfg: RunConfig) -> None:
    """Build a gallery file from every image of every class in a manifest."""
    manifest = _load_dataset_description(cfg)
    dataset = materialize(manifest, cfg.resolution, cfg.histeq)
    merged: dict = {}
    for rec in dataset.sets:
        merged.setdefault(rec.class_id, []).extend(rec.vectors)
    gallery = build_gallery(
        merged,
        GalleryConfig(
            resolution=dataset.resolution,
            cap=cfg.gallery_cap,
            seed=cfg.seed,
            precompute=True,
            histeq=manifest.histeq if cfg.histeq is None else cfg.histeq,
        ),
    )
    save_gallery(gallery, cfg.out)
    c, d = gallery.resolution
    click.echo(
        f"wrote {cfg.out}: {len(gallery)} classes at {c}x{d}", err=True
    )
    for reg in gallery.classes:
        flag = " (perturbed)" if reg.perturbed else ""
        click.echo(
            f"  {reg.class_id}: {reg.n_columns} gallery images{flag}", err=True
        )


def cmd_classify(cfg: RunConfig) -> None:
    """Classify every probe set in a manifest against a stored gallery."""
    gallery = load_gallery(cfg.gallery)
    if cfg.resolution is not None and tuple(cfg.resolution) != gallery.resolution:
        c, d = gallery.resolution
        raise ConfigurationError(
            f"gallery was built at {c}x{d}; configured resolution "
            f"{cfg.resolution[0]}x{cfg.resolution[1]} does not match"
        )
    manifest = _load_dataset_description(
        cfg if cfg.resolution is not None
        else _with_resolution(cfg, gallery.resolution)
    )
    dataset = materialize(manifest, gallery.resolution, cfg.histeq)
    mode = cfg.mode
    if mode is None:
        mode = (
            "fast"
            if all(r.pinv is not None for r in gallery.classes)
            else "online"
        )
    lines = []
    for rec in dataset.sets:
        probes = ProbeSet.from_vectors(
            list(rec.vectors), set_id=f"{rec.class_id}/{rec.set_id}"
        )
        R = residual_matrix(gallery, probes, mode)
        for s in cfg.strategy_list():
            decision = decide(R, s, beta=cfg.beta, normalize=cfg.normalize)
            lines.append(decision_record(probes.set_id, decision))
    _emit(lines, cfg.out)


def _with_resolution(cfg: RunConfig, resolution) -> RunConfig:
    return replace(cfg, resolution=tuple(resolution))


def cmd_eval(cfg: RunConfig) -> None:
    """Run the fold protocol on a manifest or a synthetic dataset."""
    if (cfg.synthetic is None) == (cfg.manifest is None):
        raise ConfigurationError(
            "eval needs exactly one data source: --manifest or --synthetic"
        )
    if cfg.synthetic is not None:
        classes, k, tau, sets_per_class, images, sigma = cfg.synthetic
        data = generate_synthetic(
            classes, k, tau, sets_per_class, images, sigma,
            seed=cfg.seed,
        )
    else:
        data = _load_dataset_description(cfg)
    protocol = SplitProtocol(
        gallery_sets_per_class=cfg.gallery_sets,
        image_cap=cfg.image_cap,
        gallery_cap=cfg.gallery_cap,
        folds=cfg.folds,
        master_seed=cfg.seed,
    )
    engine = EngineConfig(
        resolution=cfg.resolution,
        histeq=cfg.histeq,
        mode=cfg.mode,
        beta=cfg.beta,
        normalize=cfg.normalize,
    )
    report = evaluate(data, protocol, cfg.strategy_list(), engine)
    _emit(eval_records(report), cfg.out)
    click.echo(eval_table(report), err=True)
    fig_dir, stem = _figure_target(cfg, "eval")
    if fig_dir is not None:
        for p in eval_figures(report, fig_dir, stem=stem):
            click.echo(f"figure: {p}", err=True)


def cmd_bench(cfg: RunConfig) -> None:
    """Time the online and fast paths over a scenario grid."""
    scenarios = [BenchScenario(*sc) for sc in cfg.scenarios] or default_scenarios()
    results = run_bench(scenarios, repeats=cfg.repeats, seed=cfg.seed)
    _emit(bench_records(results), cfg.out)
    click.echo(bench_table(results), err=True)
    fig_dir, stem = _figure_target(cfg, "bench")
    if fig_dir is not None:
        for p in bench_figures(results, fig_dir, stem=stem):
            click.echo(f"figure: {p}", err=True)


def _emit(lines, out: Path | None) -> None:
    text = "\n".join(lines) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


def _figure_target(cfg: RunConfig, default_stem: str):
    if cfg.no_figures:
        return None, default_stem
    if cfg.figures is not None:
        return Path(cfg.figures), default_stem
    if cfg.out is not None:
        out = Path(cfg.out)
        return out.parent, out.stem
    return None, default_stem


def _parse_resolution(ctx, param, value):
    if value is None:
        return None
    try:
        c, d = str(value).lower().split("x")
        return (int(c), int(d))
    except ValueError:
        raise click.BadParameter("expected CxD, for example 20x20") from None


def _parse_histeq(ctx, param, value):
    if value is None:
        return None
    return value == "on"


def _parse_gallery_sets(ctx, param, value):
    try:
        return int(value)
    except ValueError:
        return value


def _parse_synthetic(ctx, param, value):
    if value is None:
        return None
    parts = str(value).split(",")
    if len(parts) != 6:
        raise click.BadParameter(
            "expected Y,k,tau,sets,images,sigma (six comma-separated values)"
        )
    try:
        return (*(int(p) for p in parts[:5]), float(parts[5]))
    except ValueError:
        raise click.BadParameter("could not parse the synthetic spec") from None


def _parse_scenarios(ctx, param, value):
    out = []
    for item in value:
        parts = str(item).split(",")
        if len(parts) != 4:
            raise click.BadParameter(
                "expected Y,N_gallery,N_probe,tau (four comma-separated values)"
            )
        try:
            out.append(tuple(int(p) for p in parts))
        except ValueError:
            raise click.BadParameter("scenario sizes must be integers") from None
    return tuple(out)


def _wrap_errors(fn, **kwargs):
    try:
        fn(RunConfig(**kwargs))
    except SetLrcError as exc:
        raise click.ClickException(str(exc)) from exc


_resolution_option = click.option(
    "--resolution",
    callback=_parse_resolution,
    envvar="SETLRC_RESOLUTION",
    default=None,
    help="Working resolution CxD (rows x columns), e.g. 20x20.",
)
_histeq_option = click.option(
    "--histeq",
    type=click.Choice(["on", "off"]),
    callback=_parse_histeq,
    envvar="SETLRC_HISTEQ",
    default=None,
    help="Histogram equalization during preprocessing (default: manifest "
    "setting, else on).",
)
_seed_option = click.option(
    "--seed",
    type=int,
    envvar="SETLRC_SEED",
    default=0,
    show_default=True,
    help="Master seed; all randomness in this command derives from it.",
)
_out_option = click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    envvar="SETLRC_OUT",
    default=None,
    help="Write records here instead of standard output.",
)
_strategy_option = click.option(
    "--strategy",
    type=click.Choice(["mv", "nn", "ewv", "all"]),
    envvar="SETLRC_STRATEGY",
    default="ewv",
    show_default=True,
    help="Decision rule(s) to apply.",
)
_beta_option = click.option(
    "--beta",
    type=float,
    envvar="SETLRC_BETA",
    default=2.0,
    show_default=True,
    help="Exponent scale for the soft-vote rule.",
)
_normalize_option = click.option(
    "--no-normalize",
    "no_normalize",
    is_flag=True,
    envvar="SETLRC_NO_NORMALIZE",
    default=False,
    help="Feed raw residuals to the soft-vote rule instead of "
    "mean-normalized ones.",
)
_mode_option = click.option(
    "--mode",
    type=click.Choice(["online", "fast"]),
    envvar="SETLRC_MODE",
    default=None,
    help="Residual computation path (default: fast when the gallery has "
    "cached pseudoinverses).",
)
_gallery_cap_option = click.option(
    "--gallery-cap",
    type=int,
    envvar="SETLRC_GALLERY_CAP",
    default=None,
    help="Cap on gallery images kept per class (default: 80% of the "
    "pixel count).",
)
def _figure_options(fn):
    fn = click.option(
        "--no-figures",
        is_flag=True,
        default=False,
        help="Skip figure rendering.",
    )(fn)
    return click.option(
        "--figures",
        type=click.Path(file_okay=False, path_type=Path),
        envvar="SETLRC_FIGURES",
        default=None,
        help="Directory for PNG figures (default: alongside --out).",
    )(fn)


@click.group()
def cli():
    """Image-set classification by subspace regression residuals."""


@cli.command("build")
@click.option(
    "--manifest",
    type=click.Path(exists=True, path_type=Path),
    envvar="SETLRC_MANIFEST",
    required=True,
    help="Dataset manifest file, or a root directory laid out as "
    "root/<class>/<set>/<images>.",
)
@_resolution_option
@_histeq_option
@_gallery_cap_option
@_seed_option
@click.option(
    "--out",
    type=click.Path(dir_okay=False, path_type=Path),
    envvar="SETLRC_OUT",
    required=True,
    help="Gallery file to write.",
)
def build_command(manifest, resolution, histeq, gallery_cap, seed, out):
    """Build and save a gallery from a dataset manifest."""
    _wrap_errors(
        cmd_build,
        command="build",
        manifest=manifest,
        resolution=resolution,
        histeq=histeq,
        gallery_cap=gallery_cap,
        seed=seed,
        out=out,
    )


@cli.command("classify")
@click.option(
    "--gallery",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    envvar="SETLRC_GALLERY",
    required=True,
    help="Gallery file written by the build command.",
)
@click.option(
    "--manifest",
    type=click.Path(exists=True, path_type=Path),
    envvar="SETLRC_MANIFEST",
    required=True,
    help="Manifest of probe sets (each entry is classified as one set).",
)
@_resolution_option
@_histeq_option
@_strategy_option
@_beta_option
@_normalize_option
@_mode_option
@_out_option
def classify_command(
    gallery, manifest, resolution, histeq, strategy, beta, no_normalize, mode, out
):
    """Emit one decision record per probe set per strategy."""
    _wrap_errors(
        cmd_classify,
        command="classify",
        gallery=gallery,
        manifest=manifest,
        resolution=resolution,
        histeq=histeq,
        strategy=strategy,
        beta=beta,
        normalize=not no_normalize,
        mode=mode,
        out=out,
    )


@cli.command("eval")
@click.option(
    "--manifest",
    type=click.Path(exists=True, path_type=Path),
    envvar="SETLRC_MANIFEST",
    default=None,
    help="Dataset manifest file or root directory.",
)
@click.option(
    "--synthetic",
    callback=_parse_synthetic,
    envvar="SETLRC_SYNTHETIC",
    default=None,
    help="Self-contained synthetic dataset spec Y,k,tau,sets,images,sigma "
    "(e.g. 5,3,100,10,20,8).",
)
@_resolution_option
@_histeq_option
@_strategy_option
@_beta_option
@_normalize_option
@_mode_option
@_gallery_cap_option
@click.option(
    "--gallery-sets",
    callback=_parse_gallery_sets,
    envvar="SETLRC_GALLERY_SETS",
    default="1",
    show_default=True,
    help="Gallery sets held out per class: a count or a named rule "
    "(one-video, two-sets, three-videos, five-sets).",
)
@click.option(
    "--image-cap",
    type=int,
    envvar="SETLRC_IMAGE_CAP",
    default=None,
    help="Keep only the first k images of every set.",
)
@click.option(
    "--folds",
    type=int,
    envvar="SETLRC_FOLDS",
    default=10,
    show_default=True,
    help="Number of seeded protocol repetitions.",
)
@_seed_option
@_out_option
@_figure_options
def eval_command(
    manifest,
    synthetic,
    resolution,
    histeq,
    strategy,
    beta,
    no_normalize,
    mode,
    gallery_cap,
    gallery_sets,
    image_cap,
    folds,
    seed,
    out,
    figures,
    no_figures,
):
    """Evaluate accuracy over seeded gallery/test folds."""
    _wrap_errors(
        cmd_eval,
        command="eval",
        manifest=manifest,
        synthetic=synthetic,
        resolution=resolution,
        histeq=histeq,
        strategy=strategy,
        beta=beta,
        normalize=not no_normalize,
        mode=mode,
        gallery_cap=gallery_cap,
        gallery_sets=gallery_sets,
        image_cap=image_cap,
        folds=folds,
        seed=seed,
        out=out,
        figures=figures,
        no_figures=no_figures,
    )


@cli.command("bench")
@click.option(
    "--scenario",
    "scenarios",
    multiple=True,
    callback=_parse_scenarios,
    envvar="SETLRC_SCENARIO",
    help="Scenario sizes Y,N_gallery,N_probe,tau; repeatable. Without it "
    "a default grid runs.",
)
@click.option(
    "--repeats",
    type=int,
    envvar="SETLRC_REPEATS",
    default=5,
    show_default=True,
    help="Timed repetitions per measurement (after one warm-up).",
)
@_seed_option
@_out_option
@_figure_options
def bench_command(scenarios, repeats, seed, out, figures, no_figures):
    """Compare online and fast classification times."""
    _wrap_errors(
        cmd_bench,
        command="bench",
        scenarios=scenarios,
        repeats=repeats,
        seed=seed,
        out=out,
        figures=figures,
        no_figures=no_figures,
    )


main = cli
