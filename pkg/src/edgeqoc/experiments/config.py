"""Experiment configuration: YAML file, named profile and command-line overrides."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from ..allocator.model import scheme_name
from ..consensus import SimConfig, grid_positions, random_positions
from ..errors import InvalidConfigError
from ..network import DelayModel, LinkBudget, TddFrame

PROFILES = ("desk", "paper")

# Mapping-valued keys that are replaced wholesale rather than merged.
_OPAQUE = ("profiles", "delays_ms", "reliabilities")


def default_document() -> Dict[str, Any]:
    text = resources.files(__package__).joinpath("default.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base: Dict, extra: Dict, where: str = "") -> Dict:
    """Recursive update that rejects keys the base document does not know."""
    out = copy.deepcopy(base)
    for key, value in extra.items():
        path = f"{where}{key}"
        if key not in out:
            raise InvalidConfigError(f"unknown config key {path!r}")
        if isinstance(out[key], dict) and key not in _OPAQUE:
            if not isinstance(value, dict):
                raise InvalidConfigError(f"config key {path!r} must be a mapping")
            out[key] = _merge(out[key], value, path + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _axis(spec, what: str) -> List[float]:
    if isinstance(spec, list):
        return [float(v) for v in spec]
    if not isinstance(spec, dict) or set(spec) != {"start", "stop", "step"}:
        raise InvalidConfigError(f"{what} must be a list or a {{start, stop, step}} mapping")
    start, stop, step = (float(spec[k]) for k in ("start", "stop", "step"))
    if not step > 0 or stop < start:
        raise InvalidConfigError(f"{what}: need step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 1e-9))
    # Rounding keeps grid points such as 0.1 + 0.05 k free of drift.
    return [round(start + k * step, 12) for k in range(n + 1)]


@dataclass(frozen=True)
class LinkSettings:
    uplink: LinkBudget
    downlink: LinkBudget
    ul_prbs: Optional[int]
    dl_prbs: Optional[int]


@dataclass(frozen=True)
class ExperimentConfig:
    sim: SimConfig
    delay_model: DelayModel
    frame: TddFrame
    link: LinkSettings
    schemes: Tuple[str, ...]
    n_runs: int
    seed: int
    output_dir: Path
    table_mode: str
    time_limit: Optional[float]
    delays: Tuple[float, ...]
    reliabilities: Tuple[float, ...]
    stochastic_mode: str
    compare_stds: Tuple[float, ...]
    patterns: Tuple[str, ...]
    profile: str
    document: Dict[str, Any]

    @property
    def digest(self) -> str:
        """SHA-256 of the resolved settings, excluding the output location."""
        doc = {k: v for k, v in self.document.items() if k not in ("output_dir", "profiles")}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InvalidConfigError(f"{what} must be an integer, got {value!r}")
    return value


def _positions(spec, n_robots: int, seed: int):
    if spec == "grid":
        return grid_positions(n_robots)
    if spec == "random":
        return random_positions(n_robots, seed)
    if isinstance(spec, list):
        if len(spec) != n_robots:
            raise InvalidConfigError(f"initial_positions has {len(spec)} entries for {n_robots} robots")
        return tuple(float(v) for v in spec)
    raise InvalidConfigError("initial_positions must be 'grid', 'random' or a list")


def resolve(doc: Dict[str, Any], profile: str = "desk") -> ExperimentConfig:
    try:
        return _resolve(doc, profile)
    except InvalidConfigError:
        raise
    except (TypeError, KeyError, ValueError) as exc:
        raise InvalidConfigError(f"malformed config: {exc}") from exc


def _resolve(doc: Dict[str, Any], profile: str) -> ExperimentConfig:
    seed = _int(doc["seed"], "seed")
    if seed < 0 or seed >= 2**64:
        raise InvalidConfigError("seed must be an unsigned 64-bit integer")
    n_runs = _int(doc["n_runs"], "n_runs")
    if n_runs < 1:
        raise InvalidConfigError("n_runs must be >= 1")

    s = doc["sim"]
    n_robots = _int(s["n_robots"], "sim.n_robots")
    kwargs = dict(
        period=float(s["period_ms"]),
        horizon=float(s["horizon_ms"]),
        step=float(s["step_ms"]),
        initial_positions=_positions(s["initial_positions"], n_robots, seed),
        seed=seed,
    )
    if s["gain"] is None:
        sim = SimConfig.with_default_gain(n_robots, **kwargs)
    else:
        sim = SimConfig(n_robots=n_robots, gain=float(s["gain"]), **kwargs)
    sim.check()

    d = doc["delay_model"]
    model = DelayModel(
        mean=float(d["mean_ms"]),
        std=float(d["std_ms"]),
        lower=float(d["lower_ms"]),
        upper=float(d["upper_ms"]),
        p_ul=float(d["p_ul"]),
        p_dl=float(d["p_dl"]),
    )

    f = doc["frame"]
    frame = TddFrame(
        pattern=str(f["pattern"]),
        repetitions=_int(f["repetitions"], "frame.repetitions"),
        numerology=_int(f["numerology"], "frame.numerology"),
        capacity=_int(f["capacity"], "frame.capacity"),
    ).validate()

    lk = doc["link"]
    common = dict(
        n_layers=_int(lk["n_layers"], "link.n_layers"),
        scaling=float(lk["scaling"]),
        n_carriers=_int(lk["n_carriers"], "link.n_carriers"),
        max_prbs=frame.capacity,
        periodicity=sim.period,
    )
    bits = float(lk["packet_bytes"]) * 8
    mcs = _int(lk["mcs_index"], "link.mcs_index")
    link = LinkSettings(
        uplink=LinkBudget.from_mcs(bits, mcs, float(lk["uplink_overhead"]), **common),
        downlink=LinkBudget.from_mcs(bits, mcs, float(lk["downlink_overhead"]), **common),
        ul_prbs=None if lk["ul_prbs"] is None else _int(lk["ul_prbs"], "link.ul_prbs"),
        dl_prbs=None if lk["dl_prbs"] is None else _int(lk["dl_prbs"], "link.dl_prbs"),
    )
    if (link.ul_prbs is None) != (link.dl_prbs is None):
        raise InvalidConfigError("set both link.ul_prbs and link.dl_prbs, or neither")

    schemes = tuple(scheme_name(x) for x in doc["schemes"])
    if not schemes:
        raise InvalidConfigError("schemes must not be empty")
    mode = doc["table"]["mode"]
    if mode not in ("pair", "single"):
        raise InvalidConfigError(f"table.mode must be 'pair' or 'single', got {mode!r}")
    limit = doc["solver"]["time_limit_s"]
    sw = doc["sweeps"]
    if sw["stochastic_mode"] not in ("fixed", "per-iteration"):
        raise InvalidConfigError("sweeps.stochastic_mode must be 'fixed' or 'per-iteration'")
    stds = tuple(float(v) for v in doc["compare"]["stds_ms"])
    if not stds or any(not v > 0 for v in stds):
        raise InvalidConfigError("compare.stds_ms must be a non-empty list of positive values")
    patterns = tuple(str(p) for p in doc["tdd_sweep"]["patterns"])
    for p in patterns:
        TddFrame(pattern=p, repetitions=frame.repetitions, numerology=frame.numerology).validate()

    return ExperimentConfig(
        sim=sim,
        delay_model=model,
        frame=frame,
        link=link,
        schemes=schemes,
        n_runs=n_runs,
        seed=seed,
        output_dir=Path(doc["output_dir"]),
        table_mode=mode,
        time_limit=None if limit is None else float(limit),
        delays=tuple(_axis(sw["delays_ms"], "sweeps.delays_ms")),
        reliabilities=tuple(_axis(sw["reliabilities"], "sweeps.reliabilities")),
        stochastic_mode=sw["stochastic_mode"],
        compare_stds=stds,
        patterns=patterns,
        profile=profile,
        document=doc,
    )


def load_config(
    path=None,
    profile: str = "desk",
    seed: Optional[int] = None,
    n_runs: Optional[int] = None,
    output_dir=None,
) -> ExperimentConfig:
    """Defaults, then the file, then the profile, then explicit overrides."""
    if profile not in PROFILES:
        raise InvalidConfigError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    doc = default_document()
    if path is not None:
        try:
            user = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as exc:
            raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise InvalidConfigError(f"config {path} is not valid YAML: {exc}") from exc
        if not isinstance(user, dict):
            raise InvalidConfigError(f"config {path} must be a mapping")
        doc = _merge(doc, user)
    profiles = doc.get("profiles") or {}
    if profile not in profiles:
        raise InvalidConfigError(f"profile {profile!r} is not defined in the config")
    doc = _merge(doc, profiles[profile] or {})
    if seed is not None:
        doc["seed"] = seed
    if n_runs is not None:
        doc["n_runs"] = n_runs
    if output_dir is not None:
        doc["output_dir"] = str(output_dir)
    return resolve(doc, profile)
