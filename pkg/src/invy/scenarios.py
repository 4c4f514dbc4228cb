"""Scenario definitions, INI-style config parsing and the bundled figure presets."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .model import ModelParams

MODES = ("inversion", "phase_distribution", "phase_variance", "all")

_PARAM_KEYS = {
    "n_bar": float,
    "k": int,
    "mu": float,
    "chi": float,
    "delta_cap_1": float,
    "delta_cap_3": float,
    "delta_cap_4": float,
    "lambda_1": float,
    "lambda_2": float,
    "lambda_3": float,
    "lambda_4": float,
    "cutoff": int,
}
_ALIASES = {
    "nbar": "n_bar",
    "delta1": "delta_cap_1",
    "delta3": "delta_cap_3",
    "delta4": "delta_cap_4",
    "lambda": "lambda_all",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    params: ModelParams
    mode: str = "all"
    tau_max: float = 50.0
    tau_step: float = 0.02
    theta_grid: int = 512
    oracle_compare: bool = False
    description: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise ConfigError(f"invalid scenario name {self.name!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.tau_step > 0 or not self.tau_max > 0:
            raise ConfigError("tau_step and tau_max must be positive")
        if self.theta_grid < 64:
            raise ConfigError("theta_grid must be >= 64")

    @property
    def time_independent(self) -> bool:
        return self.params.time_independent

    @property
    def literal_paper_normalization(self) -> bool:
        return not self.params.renormalize

    def with_overrides(self, **overrides) -> "Scenario":
        """Copy with model-parameter or scenario-field overrides (None values skipped)."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        p_over = {k: v for k, v in overrides.items() if k in _PARAM_KEYS or k in ("time_independent", "renormalize")}
        s_over = {k: v for k, v in overrides.items() if k not in p_over}
        if p_over and "cutoff" not in p_over and _auto_cutoff(self.params):
            # an automatically chosen cutoff follows the new parameters
            p_over["cutoff"] = None
        try:
            params = dataclasses.replace(self.params, **p_over) if p_over else self.params
            return dataclasses.replace(self, params=params, **s_over)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _auto_cutoff(params: ModelParams) -> bool:
    from .model import choose_cutoff

    return params.cutoff == choose_cutoff(params.n_bar, k=params.k)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def scenario_from_mapping(name: str, entries: dict[str, str]) -> Scenario:
    params: dict = {}
    scen: dict = {}
    for raw_key, raw in entries.items():
        key = _ALIASES.get(raw_key.strip().lower(), raw_key.strip().lower())
        try:
            if key == "lambda_all":
                lam = float(raw)
                params.update(lambda_1=lam, lambda_2=lam, lambda_3=lam, lambda_4=lam)
            elif key in _PARAM_KEYS:
                params[key] = _PARAM_KEYS[key](raw)
            elif key == "time_independent":
                params["time_independent"] = _bool(raw)
            elif key == "literal_paper_normalization":
                params["renormalize"] = not _bool(raw)
            elif key == "mode":
                scen["mode"] = raw.strip()
            elif key in ("tau_max", "tau_step"):
                scen[key] = float(raw)
            elif key == "theta_grid":
                scen[key] = int(raw)
            elif key == "oracle_compare":
                scen[key] = _bool(raw)
            elif key == "description":
                scen[key] = raw.strip()
            else:
                raise ConfigError(f"[{name}] unknown key {raw_key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"[{name}] bad value for {raw_key!r}: {raw!r}") from exc
    try:
        model = ModelParams(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from exc
    return Scenario(name=name, params=model, **scen)


def load_config(path: str | Path) -> list[Scenario]:
    """One scenario per section; a ``[DEFAULT]`` section supplies shared keys."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    sections = parser.sections()
    if not sections:
        raise ConfigError(f"{path}: no scenario sections")
    return [scenario_from_mapping(s, dict(parser[s])) for s in sections]


def dump_config(scenarios, path: str | Path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    for s in scenarios:
        p = s.params
        parser[s.name] = {
            "n_bar": repr(p.n_bar),
            "k": str(p.k),
            "mu": repr(p.mu),
            "chi": repr(p.chi),
            "delta_cap_1": repr(p.delta_cap_1),
            "delta_cap_3": repr(p.delta_cap_3),
            "delta_cap_4": repr(p.delta_cap_4),
            "lambda_1": repr(p.lambda_1),
            "lambda_2": repr(p.lambda_2),
            "lambda_3": repr(p.lambda_3),
            "lambda_4": repr(p.lambda_4),
            "cutoff": str(p.cutoff),
            "time_independent": str(p.time_independent).lower(),
            "literal_paper_normalization": str(not p.renormalize).lower(),
            "mode": s.mode,
            "tau_max": repr(s.tau_max),
            "tau_step": repr(s.tau_step),
            "theta_grid": str(s.theta_grid),
            "oracle_compare": str(s.oracle_compare).lower(),
        }
        if s.description:
            parser[s.name]["description"] = s.description
    with Path(path).open("w") as fh:
        parser.write(fh)


# ---------------------------------------------------------------------------
# figure presets
#
# Inversion figures use n_bar = 20 with k = 1 in the left panels (a, c, e) and
# k = 2 in the right ones.  Phase figures use n_bar = 5.  Where a caption
# leaves Delta_3 unstated it is taken as zero.

_PHASE_TAU_STEP = 0.1
_PHASE_THETA_GRID = 256


def _inversion_family(fig: int, variants, n_bar=20.0) -> dict[str, Scenario]:
    out = {}
    letters = "abcdef"
    for i, (label, kw) in enumerate(variants):
        for j, k in enumerate((1, 2)):
            name = f"fig{fig}{letters[2 * i + j]}"
            out[name] = Scenario(
                name=name,
                params=ModelParams(n_bar=n_bar, k=k, **kw),
                mode="inversion",
                description=f"W(tau), k={k}, {label}",
            )
    return out


def _phase_family(fig: int, k: int, mode: str, variants, what: str) -> dict[str, Scenario]:
    out = {}
    for letter, (label, kw) in zip("abcd", variants):
        name = f"fig{fig}{letter}"
        extra = (
            dict(tau_step=_PHASE_TAU_STEP, theta_grid=_PHASE_THETA_GRID)
            if mode == "phase_distribution"
            else {}
        )
        out[name] = Scenario(
            name=name,
            params=ModelParams(n_bar=5.0, k=k, **kw),
            mode=mode,
            description=f"{what}, k={k}, {label}",
            **extra,
        )
    return out


_FIG2 = [
    ("time independent", dict(chi=1e-4, time_independent=True)),
    ("mu=0.1", dict(chi=1e-4, mu=0.1)),
    ("mu=2", dict(chi=1e-4, mu=2.0)),
]
_FIG3 = [
    ("Delta1=15", dict(chi=1e-4, mu=0.1, delta_cap_1=15.0)),
    ("Delta3=20", dict(chi=1e-4, mu=0.1, delta_cap_3=20.0)),
    ("Delta=(15,20,30)", dict(chi=1e-4, mu=0.1, delta_cap_1=15.0, delta_cap_3=20.0, delta_cap_4=30.0)),
]
_FIG4 = [
    ("chi=0.01", dict(chi=0.01, mu=0.1)),
    ("chi=0.1", dict(chi=0.1, mu=0.1)),
    ("chi=1", dict(chi=1.0, mu=0.1)),
]
_FIG5 = [
    ("time independent", dict(chi=1e-4, time_independent=True)),
    ("mu=0.1", dict(chi=1e-4, mu=0.1)),
    ("mu=0.5", dict(chi=1e-4, mu=0.5)),
    ("mu=2", dict(chi=1e-4, mu=2.0)),
]
_FIG6 = [
    ("Delta1=15", dict(chi=1e-4, mu=0.1, delta_cap_1=15.0)),
    ("Delta=(15,20,30)", dict(chi=1e-4, mu=0.1, delta_cap_1=15.0, delta_cap_3=20.0, delta_cap_4=30.0)),
    ("chi=0.1", dict(chi=0.1, mu=0.1)),
    ("chi=1", dict(chi=1.0, mu=0.1)),
]


def _build_presets() -> dict[str, Scenario]:
    presets: dict[str, Scenario] = {}
    presets.update(_inversion_family(2, _FIG2))
    presets.update(_inversion_family(3, _FIG3))
    presets.update(_inversion_family(4, _FIG4))
    presets.update(_phase_family(5, 1, "phase_distribution", _FIG5, "P(theta, tau)"))
    presets.update(_phase_family(6, 1, "phase_distribution", _FIG6, "P(theta, tau)"))
    presets.update(_phase_family(7, 1, "phase_variance", _FIG5, "phase variance"))
    presets.update(_phase_family(8, 1, "phase_variance", _FIG6, "phase variance"))
    presets.update(_phase_family(9, 2, "phase_distribution", _FIG5, "P(theta, tau)"))
    presets.update(_phase_family(10, 2, "phase_distribution", _FIG6, "P(theta, tau)"))
    presets.update(_phase_family(11, 2, "phase_variance", _FIG5, "phase variance"))
    presets.update(_phase_family(12, 2, "phase_variance", _FIG6, "phase variance"))
    return presets


PRESETS: dict[str, Scenario] = _build_presets()


def get_preset(name: str) -> Scenario:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}") from None
