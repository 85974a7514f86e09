"""Instance generation, multi-run experiments and plain-file outputs.

Randomness comes from :class:`numpy.random.Generator` (PCG64). A directive
with seed ``s`` and ``R`` repetitions draws repetition ``r`` from
``SeedSequence(s).spawn(R)[r]``.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .cost import ComplexGeneral, CostSpec, RealSymmetric, TraceForm, evaluate, load_manifest, save_manifest
from .driver import RunTrace, SolverConfig, read_trace_csv, run, write_trace_csv
from .tensor import _hermitian_swap, multi_transform, read_ten, symmetrize, write_ten

__all__ = [
    "haar_orthogonal",
    "haar_unitary",
    "GeneratorDirective",
    "Instance",
    "generate",
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "SUMMARY_HEADER",
    "compare_and_plot",
    "read_svg_series",
    "match_score",
]

GeneratorKind = Literal[
    "random-symmetric", "planted-orthogonal", "random-jade", "planted-jade",
    "random-complex3", "random-hermitian-form",
]
KINDS = ("random-symmetric", "planted-orthogonal", "random-jade", "planted-jade",
         "random-complex3", "random-hermitian-form")

SUMMARY_HEADER = ["instance", "rule", "final_f", "iters", "converged", "time_s"]


# ---------------------------------------------------------------------------
# random factors
# ---------------------------------------------------------------------------


def haar_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix: QR of a Gaussian matrix, signs fixed by diag(R)."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary matrix; phases fixed by diag(R)."""
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def _complex_normal(rng, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def _hermitian(rng, n) -> np.ndarray:
    G = _complex_normal(rng, (n, n))
    return (G + G.conj().T) / 2


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorDirective:
    """What to generate.

    Parameters by kind (defaults in brackets):

    - ``random-symmetric``: ``d``, ``n``, ``L`` [1]
    - ``planted-orthogonal``: ``d``, ``n``, ``values`` [1..n]
    - ``random-jade``: ``n``, ``L``
    - ``planted-jade``: ``n``, ``L``, ``commuting`` [True], ``noise`` [0.01]
    - ``random-complex3``: ``n``
    - ``random-hermitian-form``: ``d``, ``n``
    """

    kind: GeneratorKind
    params: Mapping = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        object.__setattr__(self, "params", dict(self.params))
        n = self.params.get("n")
        if not isinstance(n, (int, np.integer)) or n < 2:
            raise ValueError(f"{self.kind}: need an integer n >= 2, got {n!r}")
        if self.kind in ("random-symmetric", "planted-orthogonal", "random-hermitian-form"):
            d = self.params.get("d")
            if not isinstance(d, (int, np.integer)) or d < 2:
                raise ValueError(f"{self.kind}: need an integer order d >= 2, got {d!r}")
        if self.kind in ("random-jade", "planted-jade"):
            L = self.params.get("L")
            if not isinstance(L, (int, np.integer)) or L < 1:
                raise ValueError(f"{self.kind}: need an integer L >= 1, got {L!r}")
        if self.kind == "planted-orthogonal" and "values" in self.params:
            if len(self.params["values"]) != n:
                raise ValueError("planted-orthogonal needs exactly n diagonal values")


@dataclass
class Instance:
    """A generated cost together with its ground truth, when planted."""

    spec: CostSpec
    directive: GeneratorDirective
    X_bar: np.ndarray | None = None
    f_star: float | None = None

    @property
    def planted(self) -> bool:
        return self.X_bar is not None

    def save(self, directory: str | os.PathLike, name: str = "instance") -> Path:
        """Write the manifest, tensors and (if planted) a ``<name>_truth.json`` sidecar."""
        directory = Path(directory)
        path = save_manifest(self.spec, directory, name)
        if self.planted:
            write_ten(self.X_bar, directory / f"{name}_truth.ten")
            sidecar = {"f_star": self.f_star, "transform": f"{name}_truth.ten",
                       "kind": self.directive.kind, "seed": self.directive.seed}
            (directory / f"{name}_truth.json").write_text(json.dumps(sidecar, indent=2) + "\n")
        return path


def load_truth(manifest: str | os.PathLike) -> tuple[np.ndarray, float | None] | None:
    """Ground truth stored next to a manifest by :meth:`Instance.save`, if any."""
    manifest = Path(manifest)
    side = manifest.with_name(manifest.stem + "_truth.json")
    if not side.exists():
        return None
    doc = json.loads(side.read_text())
    return read_ten(side.parent / doc["transform"]).data, doc.get("f_star")


def generate(directive: GeneratorDirective, rng: np.random.Generator | None = None) -> Instance:
    """Draw one instance; ``rng`` defaults to ``default_rng(directive.seed)``."""
    rng = np.random.default_rng(directive.seed) if rng is None else rng
    p = directive.params
    n = int(p["n"])
    kind = directive.kind
    if kind == "random-symmetric":
        d, L = int(p["d"]), int(p.get("L", 1))
        tensors = tuple(symmetrize(rng.standard_normal((n,) * d)) for _ in range(L))
        return Instance(RealSymmetric(tensors), directive)
    if kind == "planted-orthogonal":
        d = int(p["d"])
        values = np.asarray(p.get("values", np.arange(1, n + 1)), dtype=float)
        D = np.zeros((n,) * d)
        D[(np.arange(n),) * d] = values
        Q = haar_orthogonal(n, rng)
        # W = A x_m Q^T on every mode recovers D at Q
        A = symmetrize(multi_transform(D, Q.T, (), range(d)))
        return Instance(RealSymmetric((A,)), directive, Q, float(values @ values))
    if kind == "random-jade":
        L = int(p["L"])
        return Instance(ComplexGeneral(tuple((_hermitian(rng, n), 1, 1.0) for _ in range(L))), directive)
    if kind == "planted-jade":
        L = int(p["L"])
        U = haar_unitary(n, rng)
        terms, f_star = [], 0.0
        for _ in range(L):
            values = rng.permutation(np.arange(1.0, n + 1)) + 0.1 * rng.standard_normal(n)
            A = (U * values) @ U.conj().T
            f_star += float(values @ values)
            terms.append(A)
        commuting = bool(p.get("commuting", True))
        if not commuting:
            noise = float(p.get("noise", 0.01))
            terms = [A + noise * _hermitian(rng, n) for A in terms]
        spec = ComplexGeneral(tuple(((A + A.conj().T) / 2, 1, 1.0) for A in terms))
        return Instance(spec, directive, U, f_star if commuting else None)
    if kind == "random-complex3":
        return Instance(ComplexGeneral(((_complex_normal(rng, (n, n, n)), 1, 1.0),)), directive)
    if kind == "random-hermitian-form":
        d = int(p["d"])
        G = _complex_normal(rng, (n,) * (2 * d))
        return Instance(TraceForm((G + _hermitian_swap(G)) / 2), directive)
    raise ValueError(f"unknown generator kind {kind!r}")


def generate_repetitions(directive: GeneratorDirective, repetitions: int) -> list[Instance]:
    children = np.random.SeedSequence(directive.seed).spawn(repetitions)
    return [generate(directive, np.random.default_rng(child)) for child in children]


# ---------------------------------------------------------------------------
# matching against ground truth
# ---------------------------------------------------------------------------


def match_score(X, X_bar) -> float:
    """Mean column correlation after the best signed (phased) permutation.

    ``|X_bar^H X|`` is assigned with the Hungarian method; 1 means ``X``
    equals ``X_bar`` up to column permutation and unit-modulus scaling.
    """
    C = np.abs(np.asarray(X_bar).conj().T @ np.asarray(X))
    rows, cols = linear_sum_assignment(C, maximize=True)
    return float(C[rows, cols].mean())


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a cost (manifest or generator), solver settings and outputs.

    ``rules`` lists the pair rules to compare; every instance is run once per
    rule from ``start`` (``"identity"`` or ``"haar"``, drawn from the
    instance's own stream).
    """

    out: str
    manifest: str | None = None
    generator: GeneratorDirective | None = None
    repetitions: int = 1
    rules: tuple[str, ...] = ("cyclic", "gradient-max")
    solver: SolverConfig = SolverConfig()
    start: Literal["identity", "haar"] = "identity"
    plot: bool = True
    timing: bool = False

    def __post_init__(self):
        if (self.manifest is None) == (self.generator is None):
            raise ValueError("give exactly one of manifest and generator")
        if self.manifest is not None and not Path(self.manifest).exists():
            raise FileNotFoundError(self.manifest)
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.rules:
            raise ValueError("need at least one pair rule")
        if self.start not in ("identity", "haar"):
            raise ValueError(f"unknown start {self.start!r}")


_SOLVER_FIELDS = {f.name for f in dataclasses.fields(SolverConfig)}


def load_config(path: str | os.PathLike | None = None, **overrides) -> ExperimentConfig:
    """Read a JSON experiment config and apply overrides.

    Recognized top-level keys: ``out``, ``manifest``, ``generator``
    (``{"kind", "seed", ...params}``), ``repetitions``, ``rules``, ``start``,
    ``plot``, ``timing`` and ``solver`` (:class:`SolverConfig` fields).
    Overrides named like solver fields (``seed``, ``delta``, ``grad_tol``,
    ``max_iters``, ...) go to the solver; ``rule`` replaces ``rules``;
    ``seed`` also reseeds the generator. ``None`` overrides are ignored.
    """
    doc = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        doc = json.loads(path.read_text())
        base = path.parent
    overrides = {k: v for k, v in overrides.items() if v is not None}
    solver = dict(doc.get("solver", {}))
    gen = dict(doc["generator"]) if doc.get("generator") else None
    for key in list(overrides):
        if key in _SOLVER_FIELDS:
            solver[key] = overrides.pop(key)
    if "rule" in overrides:
        overrides["rules"] = [overrides.pop("rule")]
    if gen is not None and "seed" in solver:
        gen["seed"] = solver["seed"]
    merged = {**doc, **overrides}
    manifest = merged.get("manifest")
    if manifest is not None and not Path(manifest).is_absolute():
        manifest = str(base / manifest)
    directive = None
    if gen is not None:
        kind = gen.pop("kind")
        seed = int(gen.pop("seed", 0))
        directive = GeneratorDirective(kind, gen, seed)
    if "out" not in merged:
        raise ValueError("config needs an output directory ('out')")
    return ExperimentConfig(
        out=str(merged["out"]),
        manifest=manifest,
        generator=directive,
        repetitions=int(merged.get("repetitions", 1)),
        rules=tuple(merged.get("rules", ("cyclic", "gradient-max"))),
        solver=SolverConfig(**solver),
        start=merged.get("start", "identity"),
        plot=bool(merged.get("plot", True)),
        timing=bool(merged.get("timing", False)),
    )


@dataclass
class ExperimentResult:
    summary_path: Path
    rows: list
    traces: dict  # (instance, rule) -> RunTrace
    instances: dict  # instance name -> Instance


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every (instance, rule) combination and write the artifacts.

    Layout under ``cfg.out``: ``<instance>/`` holds the manifest and tensors,
    ``start.ten`` (the common starting point), ``<rule>_trace.csv`` and
    ``<rule>_final.ten``;
    ``summary.csv`` has one row per run. With ``cfg.plot`` each instance also
    gets ``compare.csv`` and ``compare.svg``. Wall times are written only
    when ``cfg.timing`` is set, so that repeated runs give identical files.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.generator is not None:
        children = np.random.SeedSequence(cfg.generator.seed).spawn(cfg.repetitions)
        rngs = [np.random.default_rng(child) for child in children]
        instances = {f"inst{r:03d}": generate(cfg.generator, rng) for r, rng in enumerate(rngs)}
    else:
        spec = load_manifest(cfg.manifest)
        rngs = [np.random.default_rng(cfg.solver.seed)]
        instances = {Path(cfg.manifest).stem: Instance(spec, None)}
        truth = load_truth(cfg.manifest)
        if truth is not None:
            instances[Path(cfg.manifest).stem].X_bar, instances[Path(cfg.manifest).stem].f_star = truth

    rows, traces = [], {}
    for (name, inst), rng in zip(instances.items(), rngs):
        folder = out / name
        folder.mkdir(exist_ok=True)
        if cfg.generator is not None:
            inst.save(folder, "cost")
        spec = inst.spec
        n = spec.dim
        if cfg.start == "identity":
            X0 = np.eye(n)
        else:
            X0 = haar_orthogonal(n, rng) if spec.group == "orthogonal" else haar_unitary(n, rng)
        # trace CSVs replay from this point
        write_ten(X0, folder / "start.ten")
        per_instance = {}
        for rule in cfg.rules:
            scfg = dataclasses.replace(cfg.solver, group=spec.group, pair_rule=rule)
            t0 = time.perf_counter()
            try:
                trace = run(spec, X0, scfg)
            except Exception as exc:
                raise RuntimeError(f"run failed for instance {name!r}, rule {rule!r}: {exc}") from exc
            elapsed = time.perf_counter() - t0
            write_trace_csv(trace, folder / f"{rule}_trace.csv", include_timing=cfg.timing)
            write_ten(trace.X_final, folder / f"{rule}_final.ten")
            traces[(name, rule)] = trace
            per_instance[rule] = trace
            rows.append([name, rule, repr(trace.final_f), str(trace.iterations),
                         "1" if trace.converged else "0", repr(elapsed) if cfg.timing else ""])
        if cfg.plot:
            compare_and_plot(per_instance, folder / "compare")

    summary = out / "summary.csv"
    with open(summary, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(rows)
    return ExperimentResult(summary, rows, traces, instances)


# ---------------------------------------------------------------------------
# comparison table and chart
# ---------------------------------------------------------------------------


def _padded(values: Sequence[float], length: int) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    return np.concatenate([v, np.full(length - v.size, v[-1])]) if v.size < length else v


def compare_and_plot(traces, stem: str | os.PathLike, log_grad: bool = True,
                     width: int = 720, height: int = 300) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.svg`` comparing several runs.

    ``traces`` maps labels to :class:`RunTrace` objects or trace CSV paths
    (a plain sequence is labelled by position). Shorter runs are padded with
    their last value up to the longest run. The CSV has a column ``k`` and
    then ``f:<label>`` and ``grad_norm:<label>`` per series; the SVG is drawn
    from exactly those numbers, one panel for ``f`` and one for the gradient
    norm (log scale unless ``log_grad`` is false).
    """
    if isinstance(traces, Mapping):
        items = list(traces.items())
    else:
        items = [(f"run{k}", t) for k, t in enumerate(traces)]
    if not items:
        raise ValueError("need at least one trace to compare")
    items = [(str(label), read_trace_csv(t) if isinstance(t, (str, os.PathLike)) else t) for label, t in items]
    length = max(len(t.f) for _, t in items)
    columns = {"k": np.arange(length)}
    for label, t in items:
        columns[f"f:{label}"] = _padded(t.f, length)
        columns[f"grad_norm:{label}"] = _padded(t.grad_norm, length)

    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    with open(csv_path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(columns))
        for r in range(length):
            writer.writerow([str(r)] + [repr(float(columns[c][r])) for c in list(columns)[1:]])
    svg_path = stem.with_suffix(".svg")
    _write_svg(csv_path, svg_path, log_grad, width, height)
    return csv_path, svg_path


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _read_combined(csv_path: Path) -> tuple[list[str], dict[str, np.ndarray]]:
    with open(csv_path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:]])
    return header, {h: data[:, c] for c, h in enumerate(header)}


def _write_svg(csv_path: Path, svg_path: Path, log_grad: bool, width: int, height: int) -> None:
    header, cols = _read_combined(csv_path)
    k = cols["k"]
    labels = [h[2:] for h in header if h.startswith("f:")]
    margin_l, margin_r, margin_t, margin_b = 70, 150, 30, 40
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(width),
                     height=str(2 * height), viewBox=f"0 0 {width} {2 * height}")
    for panel, (quantity, log) in enumerate((("f", False), ("grad_norm", log_grad))):
        top = panel * height
        x0, x1 = margin_l, width - margin_r
        y0, y1 = top + height - margin_b, top + margin_t
        series = {lab: cols[f"{quantity}:{lab}"] for lab in labels}
        allv = np.concatenate(list(series.values()))
        if log:
            allv = allv[allv > 0]
        tr = (lambda v: np.log10(v)) if log else (lambda v: v)
        lo, hi = (float(tr(allv).min()), float(tr(allv).max())) if allv.size else (0.0, 1.0)
        if hi == lo:
            lo, hi = lo - 0.5, hi + 0.5
        kmax = max(float(k[-1]), 1.0)
        g = ET.SubElement(svg, "g", {"class": "panel", "data-quantity": quantity,
                                     "data-scale": "log10" if log else "linear",
                                     "data-x0": repr(float(x0)), "data-x1": repr(float(x1)),
                                     "data-y0": repr(float(y0)), "data-y1": repr(float(y1)),
                                     "data-kmax": repr(kmax), "data-lo": repr(lo), "data-hi": repr(hi)})
        ET.SubElement(g, "rect", x=str(x0), y=str(y1), width=str(x1 - x0), height=str(y0 - y1),
                      fill="none", stroke="#444")
        axis_label = f"log10 {quantity}" if log else quantity
        ET.SubElement(g, "text", {"font-size": "12"}, x=str(x0), y=str(y0 + 30)).text = "iteration"
        ET.SubElement(g, "text", {"font-size": "12"}, x="10", y=str((y0 + y1) / 2)).text = axis_label
        for tick in (lo, hi):
            ty = y0 + (tick - lo) / (hi - lo) * (y1 - y0)
            ET.SubElement(g, "text", {"font-size": "10", "text-anchor": "end"}, x=str(x0 - 5), y=f"{ty:.2f}").text = f"{tick:.4g}"
        ET.SubElement(g, "text", {"font-size": "10", "text-anchor": "end"}, x=str(x1), y=str(y0 + 15)).text = str(int(kmax))
        for s, (lab, v) in enumerate(series.items()):
            with np.errstate(divide="ignore"):
                tv = tr(v) if not log else np.log10(np.where(v > 0, v, np.nan))
            px = x0 + k / kmax * (x1 - x0)
            py = y0 + (tv - lo) / (hi - lo) * (y1 - y0)
            pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(px, py) if math.isfinite(b))
            color = _COLORS[s % len(_COLORS)]
            ET.SubElement(g, "polyline", {"points": pts, "fill": "none", "stroke": color,
                                          "stroke-width": "1.5", "data-label": lab,
                                          "data-values": " ".join(repr(float(x)) for x in v)})
            ET.SubElement(g, "text", {"font-size": "11"}, x=str(x1 + 10), y=str(y1 + 15 * (s + 1)),
                          fill=color).text = lab
    ET.ElementTree(svg).write(svg_path, encoding="utf-8", xml_declaration=True)


def read_svg_series(svg_path: str | os.PathLike) -> dict[tuple[str, str], dict[str, np.ndarray]]:
    """Parse a chart written by :func:`compare_and_plot`.

    Returns ``{(quantity, label): {"values": ..., "k": ..., "decoded": ...}}``
    where ``decoded`` maps the drawn polyline coordinates back to data units.
    """
    ns = {"s": "http://www.w3.org/2000/svg"}
    root = ET.parse(svg_path).getroot()
    out = {}
    for g in root.findall("s:g", ns):
        q = g.get("data-quantity")
        x0, x1, y0, y1 = (float(g.get(a)) for a in ("data-x0", "data-x1", "data-y0", "data-y1"))
        kmax, lo, hi = (float(g.get(a)) for a in ("data-kmax", "data-lo", "data-hi"))
        log = g.get("data-scale") == "log10"
        for line in g.findall("s:polyline", ns):
            pts = np.array([[float(c) for c in p.split(",")] for p in line.get("points").split()])
            k = (pts[:, 0] - x0) / (x1 - x0) * kmax
            t = lo + (pts[:, 1] - y0) / (y1 - y0) * (hi - lo)
            out[(q, line.get("data-label"))] = {
                "values": np.array([float(v) for v in line.get("data-values").split()]),
                "k": k,
                "decoded": 10.0**t if log else t,
            }
    return out
