"""Config ingestion and results persistence.

Configs are JSON documents with five sections (system, schedule, adaptation,
integrator, experiment); missing keys fall back to the bundled ten-sigmoid
defaults, so an empty document reproduces that study at desk scale.  The
resolved (defaults-applied) document defines the run digest: canonical JSON,
sorted keys, SHA-256 — reordering keys in the source file does not change it.

Results go to one directory per run: trials.csv with the per-trial metric
rows, optional trial_<k>_trace.csv instrumentation, and manifest.json with
the digest, version and timestamps.  Numbers are written with repr(), the
shortest decimal that round-trips in float64, so equal configs produce
byte-identical CSV output.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import AdaptationConfig, ResetSchedule
from .harness import EXAMPLE2_ALPHA_TRUE, EXAMPLE2_C, EXAMPLE2_X0, ExperimentConfig, TrialRecord
from .integrator import IntegratorConfig
from .models import LogisticEnsemble


class ConfigError(ValueError):
    """A config document failed validation; `where` names the offending field."""

    def __init__(self, where: str, message: str):
        self.where = where
        super().__init__(f"{where}: {message}")


def default_config_doc() -> dict:
    """Resolved defaults: the ten-sigmoid study at desk scale."""
    return {
        "system": {
            "alpha": [float(v) for v in EXAMPLE2_ALPHA_TRUE],
            "beta": [1.0] * 10,
            "c_out": [float(v) for v in EXAMPLE2_C],
            "x0": [float(v) for v in EXAMPLE2_X0],
        },
        "schedule": {"T": 2.0, "dT2": 1.0, "D": 10.0, "l0": 10.0},
        "adaptation": {
            "gamma": 0.001,
            "delta": 0.0001,
            "delta1": 0.001,
            "adapt_quad": False,
            "c_weighted_alpha": False,
            "adapt_gain": True,
            "gain_init": 0.0,
        },
        "integrator": {"dt": 0.0001, "method": "euler"},
        "experiment": {
            "epochs": 2000,
            "trials": 20,
            "seed": 2024,
            "init_box": [[0.0, 12.0]],
            "record_stride": 0,
        },
    }


def _merge(base: dict, extra: dict, where: str) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if key not in base:
            raise ConfigError(f"{where}.{key}" if where else key, "unknown field")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}.{key}" if where else key, "expected an object")
            out[key] = _merge(base[key], value, f"{where}.{key}" if where else key)
        else:
            out[key] = value
    return out


def _num(doc: dict, section: str, key: str, allow_inf: bool = False) -> float:
    raw = doc[section][key]
    if allow_inf and raw in ("inf", "Infinity", None):
        return math.inf
    if not isinstance(raw, (int, float)) or isinstance(raw, bool):
        raise ConfigError(f"{section}.{key}", f"expected a number, got {raw!r}")
    return float(raw)


def resolve_config_doc(doc: dict) -> dict:
    """Apply defaults to a raw document; rejects unknown fields."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return _merge(default_config_doc(), doc, "")


def config_digest(resolved_doc: dict) -> str:
    """SHA-256 of the canonical (sorted keys, compact) resolved document."""
    canon = json.dumps(resolved_doc, sort_keys=True, separators=(",", ":"), allow_nan=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def config_from_doc(doc: dict) -> tuple[ExperimentConfig, str]:
    """Validate a raw document into an ExperimentConfig plus its digest."""
    resolved = resolve_config_doc(doc)

    def build(section: str, ctor, **kwargs):
        try:
            return ctor(**kwargs)
        except ValueError as exc:
            raise ConfigError(section, str(exc)) from exc

    sysd = resolved["system"]
    sys = build(
        "system", LogisticEnsemble,
        alpha=sysd["alpha"], beta=sysd["beta"], c_out=sysd["c_out"], x0=sysd["x0"],
    )
    sched = build(
        "schedule", ResetSchedule,
        T=_num(resolved, "schedule", "T"),
        dT2=_num(resolved, "schedule", "dT2"),
        D=_num(resolved, "schedule", "D", allow_inf=True),
        l0=_num(resolved, "schedule", "l0"),
    )
    ad = resolved["adaptation"]
    acfg = build(
        "adaptation", AdaptationConfig,
        gamma=_num(resolved, "adaptation", "gamma"),
        delta=_num(resolved, "adaptation", "delta"),
        delta1=_num(resolved, "adaptation", "delta1"),
    )
    icfg = build(
        "integrator", IntegratorConfig,
        dt=_num(resolved, "integrator", "dt"),
        method=resolved["integrator"]["method"],
    )
    ex = resolved["experiment"]
    if not isinstance(ex["epochs"], int) or ex["epochs"] < 1:
        raise ConfigError("experiment.epochs", f"need an integer >= 1, got {ex['epochs']!r}")
    if not isinstance(ex["trials"], int) or ex["trials"] < 1:
        raise ConfigError("experiment.trials", f"need an integer >= 1, got {ex['trials']!r}")
    try:
        cfg = ExperimentConfig(
            sys=sys, sched=sched, acfg=acfg, icfg=icfg,
            epochs=ex["epochs"], trials=ex["trials"], seed=int(ex["seed"]),
            init_box=np.asarray(ex["init_box"], dtype=float),
            record_stride=int(ex["record_stride"]),
            adapt_quad=bool(ad["adapt_quad"]),
            c_weighted_alpha=bool(ad["c_weighted_alpha"]),
            adapt_gain=bool(ad["adapt_gain"]),
            gain_init=float(ad["gain_init"]),
        )
    except ValueError as exc:
        raise ConfigError("experiment", str(exc)) from exc
    return cfg, config_digest(resolved)


def load_config(path) -> ExperimentConfig:
    """Read, default-fill and validate a config file."""
    cfg, _ = load_config_with_digest(path)
    return cfg


def load_config_with_digest(path) -> tuple[ExperimentConfig, str]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(str(path), "config file does not exist")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    return config_from_doc(doc)


@dataclass
class RunManifest:
    config_digest: str
    artifact_version: str
    started: str
    finished: str
    outputs: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_digest": self.config_digest,
                "artifact_version": self.artifact_version,
                "started": self.started,
                "finished": self.finished,
                "outputs": self.outputs,
            },
            indent=2,
        )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_results(
    records: list[TrialRecord],
    out_dir,
    config_digest: str = "",
    started: str | None = None,
) -> RunManifest:
    """Write trials.csv, any per-trial traces, and manifest.json to out_dir.

    CSV contents depend only on the records, never on wall-clock time, so
    re-running an identical config reproduces the same bytes; timestamps live
    in the manifest only.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = started or _now()
    outputs = []

    trials_path = out / "trials.csv"
    with trials_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "seed", "d0", "d_final", "R0", "R_final", "status"])
        for r in records:
            w.writerow([r.trial, r.seed, _fmt(r.d0), _fmt(r.d_final),
                        _fmt(r.R0), _fmt(r.R_final), r.status])
    outputs.append(trials_path.name)

    for r in records:
        if r.e_trace is None or r.param_trace is None:
            continue
        n = r.param_trace.shape[1] // 2
        path = out / f"trial_{r.trial}_trace.csv"
        header = (
            ["t", "e", "lambda", "d", "R"]
            + [f"alpha_hat_{i + 1}" for i in range(n)]
            + [f"K_{i + 1}" for i in range(n)]
        )
        d_col = r.trace_d if getattr(r, "trace_d", None) is not None else np.zeros(len(r.e_trace))
        R_col = r.trace_R if getattr(r, "trace_R", None) is not None else np.zeros(len(r.e_trace))
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row_i in range(r.e_trace.shape[0]):
                t, e, lam = r.e_trace[row_i]
                row = [_fmt(float(t)), _fmt(float(e)), str(int(lam)),
                       _fmt(float(d_col[row_i])), _fmt(float(R_col[row_i]))]
                row += [_fmt(float(v)) for v in r.param_trace[row_i]]
                w.writerow(row)
        outputs.append(path.name)

    manifest = RunManifest(
        config_digest=config_digest,
        artifact_version=__version__,
        started=started,
        finished=_now(),
        outputs=outputs,
    )
    (out / "manifest.json").write_text(manifest.to_json() + "\n")
    return manifest


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_histogram_csv(values_start, values_end, path, bins: int = 20) -> None:
    """Two-snapshot histogram (shared bin edges) as CSV."""
    start = np.asarray(values_start, float)
    end = np.asarray(values_end, float)
    lo = min(start.min(), end.min(), 0.0)
    hi = max(start.max(), end.max())
    edges = np.linspace(lo, hi if hi > lo else lo + 1.0, bins + 1)
    h0, _ = np.histogram(start, bins=edges)
    h1, _ = np.histogram(end, bins=edges)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_low", "bin_high", "count_start", "count_end"])
        for i in range(bins):
            w.writerow([_fmt(float(edges[i])), _fmt(float(edges[i + 1])),
                        int(h0[i]), int(h1[i])])
