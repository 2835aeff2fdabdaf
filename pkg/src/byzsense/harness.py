"""Scenario execution and CSV emission.

A run writes ``thresholds.csv``, ``flag_counts.csv``, ``table1.csv``,
``roc.csv`` and ``manifest.json`` into its output directory. Given the
same resolved configuration every byte is reproducible, with or without
parallel workers.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from byzsense import __version__
from byzsense.detection import ALL_METHODS, DetectorParams, Method, detect
from byzsense.errors import (
    ConfigError,
    InvalidInputError,
    InvariantError,
    MissingInputError,
    OutputError,
)
from byzsense.fusion import evaluate, method_label
from byzsense.sensing import AttackModel, ScenarioConfig, simulate_instant

log = logging.getLogger(__name__)

__all__ = [
    "RunManifest",
    "config_digest",
    "config_to_dict",
    "derive_seed",
    "load_config",
    "parse_config",
    "run_scenario",
    "sweep",
]

THRESHOLDS_HEADER = ("instant", "method", "threshold", "iterations")
FLAG_COUNTS_HEADER = ("method", "flagged_count", "occurrences")
TABLE1_HEADER = ("n_malicious", "method", "correct_setmatch", "correct_countmatch", "n_instants")
ROC_HEADER = ("method", "threshold", "pd", "pfa")

_INT_FIELDS = ("n_su", "n_malicious", "samples_per_sensing", "n_instants", "max_iterations", "master_seed")
_REAL_FIELDS = ("snr_db", "pu_present_prob", "method_multiplier_k", "threshold_tolerance")
_BOOL_FIELDS = ("two_sided",)
_TOP_LEVEL = frozenset(_INT_FIELDS + _REAL_FIELDS + _BOOL_FIELDS + ("attack", "threshold_grid"))


# ---------------------------------------------------------------- config


def _reject_duplicates(pairs):
    out = {}
    for key, value in pairs:
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = value
    return out


def _int(field, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(field, f"expected an integer, got {value!r}")
    return value


def _real(field, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(field, f"expected a number, got {value!r}")
    return float(value)


def _table(field, value, allowed):
    if not isinstance(value, dict):
        raise ConfigError(field, f"expected a table, got {value!r}")
    for key in value:
        if key not in allowed:
            raise ConfigError(f"{field}.{key}", "unknown key")
    return value


def parse_config(raw):
    """Build a :class:`ScenarioConfig` from an already-decoded mapping.

    Unknown keys are rejected and every field is type checked; anything
    absent takes its default. ``n_malicious`` is required.
    """
    raw = _table("config", raw, _TOP_LEVEL)
    if "n_malicious" not in raw:
        raise ConfigError("n_malicious", "required field is missing")
    kwargs = {}
    for name in _INT_FIELDS:
        if name in raw:
            kwargs[name] = _int(name, raw[name])
    for name in _REAL_FIELDS:
        if name in raw:
            kwargs[name] = _real(name, raw[name])
    for name in _BOOL_FIELDS:
        if name in raw:
            if not isinstance(raw[name], bool):
                raise ConfigError(name, f"expected true or false, got {raw[name]!r}")
            kwargs[name] = raw[name]
    if "attack" in raw:
        attack = _table("attack", raw["attack"], {"kind", "severity"})
        kind = attack.get("kind", "always_no")
        severity = attack.get("severity")
        if severity is not None:
            severity = _real("attack.severity", severity)
        try:
            kwargs["attack"] = AttackModel(kind, severity)
        except ValueError as exc:
            field = "attack.severity" if "severity" in str(exc) else "attack.kind"
            raise ConfigError(field, str(exc)) from None
    if "threshold_grid" in raw:
        grid = _table("threshold_grid", raw["threshold_grid"], {"start", "stop", "steps"})
        start, stop, steps = ScenarioConfig.__dataclass_fields__["threshold_grid"].default
        kwargs["threshold_grid"] = (
            _real("threshold_grid.start", grid.get("start", start)),
            _real("threshold_grid.stop", grid.get("stop", stop)),
            _int("threshold_grid.steps", grid.get("steps", steps)),
        )
    try:
        return ScenarioConfig(**kwargs)
    except InvalidInputError as exc:
        field = str(exc).split(":", 1)[0]
        raise ConfigError(field, str(exc).split(":", 1)[-1].strip()) from None


def load_config(path):
    """Read a JSON configuration file.

    Raises :class:`MissingInputError` (exit 2) when the file is absent and
    :class:`ConfigError` (exit 3) for malformed text, duplicate keys,
    unknown keys or invalid values.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingInputError(f"config file not found: {path}") from None
    except OSError as exc:
        raise MissingInputError(f"cannot read config file {path}: {exc}") from None
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"malformed JSON: {exc}") from None
    return parse_config(raw)


def config_to_dict(config: ScenarioConfig):
    d = asdict(config)
    d["attack"] = {"kind": config.attack.kind.value, "severity": config.attack.severity}
    start, stop, steps = config.threshold_grid
    d["threshold_grid"] = {"start": start, "stop": stop, "steps": steps}
    return d


def config_digest(config: ScenarioConfig, **extra):
    body = config_to_dict(config)
    body.update(extra)
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def derive_seed(master_seed, n_malicious):
    """Sub-seed for one malicious-count block of a sweep."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(0x5EE9, n_malicious))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


# ---------------------------------------------------------------- output


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _csv_bytes(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue().encode("utf-8")


def _write(path: Path, data: bytes, written: dict):
    try:
        path.write_bytes(data)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None
    written[path] = hashlib.sha256(data).hexdigest()


def _prepare_dir(out_dir):
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {out_dir}: {exc}") from None
    return out_dir


@dataclass(frozen=True)
class RunManifest:
    config_digest: str
    master_seed: int
    artifact_paths: tuple[str, ...]
    artifact_digests: dict[str, str]
    tool_version: str
    path: Path | None = None

    def to_json(self):
        body = {
            "config_digest": self.config_digest,
            "master_seed": self.master_seed,
            "artifact_paths": list(self.artifact_paths),
            "artifact_digests": self.artifact_digests,
            "tool_version": self.tool_version,
        }
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _finish(out_dir, digest, seed, written):
    rel = {p.relative_to(out_dir).as_posix(): h for p, h in written.items()}
    manifest = RunManifest(digest, seed, tuple(rel), rel, __version__, out_dir / "manifest.json")
    try:
        manifest.path.write_text(manifest.to_json(), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {manifest.path}: {exc}") from None
    return manifest


# ---------------------------------------------------------------- running


def _process_instant(config, index, methods, params):
    instant = simulate_instant(config, index)
    return instant, [detect(instant, m, params) for m in methods]


def _execute(config, methods, workers):
    params = DetectorParams.from_config(config)
    n = config.n_instants
    args = ([config] * n, range(n), [methods] * n, [params] * n)
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_process_instant, *args, chunksize=max(1, n // (4 * workers))))
    return list(map(_process_instant, *args))


def _check_invariants(config, instants, results, metrics):
    for inst, per_method in zip(instants, results):
        levels = inst.levels
        for res in per_method:
            if res.iterations_used != len(res.threshold_trace):
                raise InvariantError(f"instant {inst.instant_index}: trace length mismatch for {res.method.value}")
            if any(levels[i] >= res.lower_threshold for i in res.excluded_ids) and not config.two_sided:
                raise InvariantError(
                    f"instant {inst.instant_index}: {res.method.value} excluded a report at or above its threshold"
                )
    for m in metrics:
        if sum(m.per_instant_flag_counts.values()) != config.n_instants:
            raise InvariantError(f"{m.label}: flag-count histogram does not sum to n_instants")
        pd = [p for _, p in m.pd_curve]
        if not any(map(math.isnan, pd)) and any(b > a for a, b in zip(pd, pd[1:])):
            raise InvariantError(f"{m.label}: detection probability increases along the threshold grid")


def _scenario_rows(config, methods, workers):
    methods = tuple(Method(m) for m in methods)
    log.info("running n_malicious=%d seed=%d methods=%s", config.n_malicious, config.master_seed,
             ",".join(m.value for m in methods))
    executed = _execute(config, methods, workers)
    instants = [inst for inst, _ in executed]
    results = [res for _, res in executed]
    params = DetectorParams.from_config(config)
    grid = config.grid()
    metrics = [
        evaluate(instants, m, grid, params, exclusions=[res[j].excluded_ids for res in results])
        for j, m in enumerate(methods)
    ]
    metrics.append(evaluate(instants, None, grid, params))
    _check_invariants(config, instants, results, metrics)

    thresholds = [
        (inst.instant_index, res.method.value, res.lower_threshold, res.iterations_used)
        for inst, per_method in zip(instants, results)
        for res in per_method
    ]
    flag_counts = [
        (m.label, count, occ)
        for m in metrics[:-1]
        for count, occ in m.per_instant_flag_counts.items()
    ]
    table1 = [
        (config.n_malicious, m.label, m.correct_count, m.correct_countmatch, m.n_instants)
        for m in metrics[:-1]
    ]
    roc = [
        (m.label, th, pd, pfa)
        for m in metrics
        for (th, pd), (_, pfa) in zip(m.pd_curve, m.pfa_curve)
    ]
    return thresholds, flag_counts, table1, roc


def run_scenario(config: ScenarioConfig, methods=ALL_METHODS, out_dir=".", workers=None) -> RunManifest:
    """Simulate one scenario, evaluate every method and write the CSV set."""
    out_dir = _prepare_dir(out_dir)
    thresholds, flag_counts, table1, roc = _scenario_rows(config, methods, workers)
    written = {}
    _write(out_dir / "thresholds.csv", _csv_bytes(THRESHOLDS_HEADER, thresholds), written)
    _write(out_dir / "flag_counts.csv", _csv_bytes(FLAG_COUNTS_HEADER, flag_counts), written)
    _write(out_dir / "table1.csv", _csv_bytes(TABLE1_HEADER, table1), written)
    _write(out_dir / "roc.csv", _csv_bytes(ROC_HEADER, roc), written)
    digest = config_digest(config, methods=[Method(m).value for m in methods])
    return _finish(out_dir, digest, config.master_seed, written)


def sweep(config_base: ScenarioConfig, malicious_counts, methods=ALL_METHODS, out_dir=".", workers=None) -> RunManifest:
    """One scenario per malicious count, each in its own ``m<count>/`` directory.

    Each block runs under a sub-seed derived from the base seed and the
    count; the top-level ``table1.csv`` stacks every block.
    """
    counts = list(malicious_counts)
    if not counts:
        raise ConfigError("malicious", "at least one malicious count is required")
    for c in counts:
        if isinstance(c, bool) or not isinstance(c, int) or not 0 <= c < config_base.n_su:
            raise ConfigError("malicious", f"count {c!r} must be an integer in [0, {config_base.n_su})")
    out_dir = _prepare_dir(out_dir)
    written = {}
    table1_all = []
    for c in counts:
        sub = replace(config_base, n_malicious=c, master_seed=derive_seed(config_base.master_seed, c))
        manifest = run_scenario(sub, methods, out_dir / f"m{c}", workers)
        for rel, digest in manifest.artifact_digests.items():
            written[out_dir / f"m{c}" / rel] = digest
        written[manifest.path] = hashlib.sha256(manifest.path.read_bytes()).hexdigest()
        table1_all.extend(_read_rows(out_dir / f"m{c}" / "table1.csv"))
    _write(out_dir / "table1.csv", _csv_bytes(TABLE1_HEADER, table1_all), written)
    digest = config_digest(config_base, malicious_counts=counts, methods=[Method(m).value for m in methods])
    return _finish(out_dir, digest, config_base.master_seed, written)


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[1:]
