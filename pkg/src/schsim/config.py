"""Run configuration: strict JSON schema, presets and dotted overrides.

Configs are JSON objects with a versioned schema.  Validation is strict:
unknown sections or keys are errors (reported with their dotted path), not
warnings, because silent misconfiguration is the dominant failure mode in
simulation studies.  Values may be overridden from the command line with
``section.key=value`` pairs whose right-hand side is parsed as JSON when
possible and kept as a string otherwise.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import NOISE_FORMS, ModelParams, SigmaProfile
from .spectral import FourierField, SpectralGrid, random_field
from .stepping import SCHEMES, StepperConfig

SCHEMA_VERSION = 1

INITIAL_PRESETS = ("zero", "single_mode", "modes", "gaussian_bump", "random")
SIGMA_PRESETS = ("constant", "sin")


class ConfigError(ValueError):
    """Configuration file or override rejected, with a dotted-path hint."""


class StabilityWarning(UserWarning):
    """Explicit time step close to or beyond the viscous stability limit."""


def _expect(value, types, path):
    if types is float:
        # accept ints where floats are expected, but never booleans
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite, got {value!r}")
        return float(value)
    if types is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if types is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if types is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise AssertionError(f"unhandled schema type {types}")


def _check_keys(section: dict, allowed, required, path):
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected an object")
    for key in section:
        if key not in allowed:
            raise ConfigError(
                f"{path}.{key}: unknown key (allowed: {', '.join(sorted(allowed))})"
            )
    for key in required:
        if key not in section:
            raise ConfigError(f"{path}.{key}: required key missing")


def _validate_sigma(spec, path) -> dict:
    if not isinstance(spec, dict):
        raise ConfigError(f"{path}: expected an object")
    if "coeffs" in spec:
        _check_keys(spec, {"coeffs"}, {"coeffs"}, path)
        coeffs = spec["coeffs"]
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError(f"{path}.coeffs: expected a nonempty list")
        vals = [_expect(c, float, f"{path}.coeffs[{i}]") for i, c in enumerate(coeffs)]
        return {"coeffs": vals}
    preset = _expect(spec.get("preset"), str, f"{path}.preset") \
        if "preset" in spec else None
    if preset is None:
        raise ConfigError(f"{path}: needs either 'preset' or 'coeffs'")
    if preset == "constant":
        _check_keys(spec, {"preset", "value"}, {"preset", "value"}, path)
        return {"preset": "constant", "value": _expect(spec["value"], float, f"{path}.value")}
    if preset == "sin":
        _check_keys(spec, {"preset", "mean", "amp"}, {"preset", "mean", "amp"}, path)
        return {"preset": "sin",
                "mean": _expect(spec["mean"], float, f"{path}.mean"),
                "amp": _expect(spec["amp"], float, f"{path}.amp")}
    raise ConfigError(
        f"{path}.preset: unknown sigma preset {preset!r} "
        f"(known: {', '.join(SIGMA_PRESETS)}, or give 'coeffs')"
    )


def _mode_table(value, path) -> dict:
    """Validate {"j": amplitude} maps with positive integer keys."""
    if not isinstance(value, dict) or not value:
        raise ConfigError(f"{path}: expected a nonempty object of mode: amplitude")
    out = {}
    for key, amp in value.items():
        try:
            j = int(key)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.{key}: mode index must be an integer") from None
        if j < 1:
            raise ConfigError(f"{path}.{key}: mode index must be >= 1")
        out[j] = _expect(amp, float, f"{path}.{key}")
    return out


def _validate_initial(section, path) -> dict:
    shapes = {
        "zero": set(),
        "single_mode": {"j", "amp"},
        "modes": {"c0", "cos", "sin"},
        "gaussian_bump": {"width", "amp"},
        "random": {"decay_exponent", "seed"},
    }
    _check_keys(section, {"preset"} | set().union(*shapes.values()), {"preset"}, path)
    preset = _expect(section["preset"], str, f"{path}.preset")
    if preset not in shapes:
        raise ConfigError(
            f"{path}.preset: unknown initial preset {preset!r} "
            f"(known: {', '.join(INITIAL_PRESETS)})"
        )
    required = {"preset"} | shapes[preset]
    if preset == "modes":
        required = {"preset"}  # any subset of c0/cos/sin
        _check_keys(section, {"preset"} | shapes[preset], required, path)
    else:
        _check_keys(section, {"preset"} | shapes[preset], required, path)
    out = {"preset": preset}
    if preset == "single_mode":
        out["j"] = _expect(section["j"], int, f"{path}.j")
        out["amp"] = _expect(section["amp"], float, f"{path}.amp")
        if out["j"] < 1:
            raise ConfigError(f"{path}.j: mode index must be >= 1")
    elif preset == "modes":
        if "c0" in section:
            out["c0"] = _expect(section["c0"], float, f"{path}.c0")
        for table in ("cos", "sin"):
            if table in section:
                out[table] = {
                    str(j): a
                    for j, a in _mode_table(section[table], f"{path}.{table}").items()
                }
        if "c0" not in out and "cos" not in out and "sin" not in out:
            raise ConfigError(f"{path}: modes preset needs c0, cos or sin")
    elif preset == "gaussian_bump":
        out["width"] = _expect(section["width"], float, f"{path}.width")
        out["amp"] = _expect(section["amp"], float, f"{path}.amp")
        if not 0.01 <= out["width"] <= 0.5:
            raise ConfigError(f"{path}.width: must lie in [0.01, 0.5]")
    elif preset == "random":
        out["decay_exponent"] = _expect(section["decay_exponent"], float,
                                        f"{path}.decay_exponent")
        out["seed"] = _expect(section["seed"], int, f"{path}.seed")
        if out["decay_exponent"] <= 0.5:
            raise ConfigError(f"{path}.decay_exponent: must exceed 0.5")
    return out


_TOP_SECTIONS = ("model", "stepper", "initial", "ensemble", "outputs",
                 "converge", "uniqueness", "commutators", "gronwall")


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration; builders construct model objects on demand."""

    raw: dict

    def require(self, *sections: str) -> None:
        missing = [s for s in sections if s not in self.raw]
        if missing:
            raise ConfigError(
                f"this command needs config section(s): {', '.join(missing)}"
            )

    # -- builders ------------------------------------------------------------

    def sigma_profile(self) -> SigmaProfile:
        spec = self.raw["model"]["sigma"]
        if "coeffs" in spec:
            c = np.asarray(spec["coeffs"], dtype=np.float64)
            band = len(c) // 2  # highest mode index the slot list can fill
            grid = SpectralGrid(max(2, 2 * band))
            full = np.zeros(grid.n_coeffs)
            full[: len(c)] = c
            return SigmaProfile.from_field(FourierField(grid, full))
        grid = SpectralGrid(2)
        if spec["preset"] == "constant":
            return SigmaProfile.constant(grid, spec["value"])
        c = np.zeros(grid.n_coeffs)
        c[0] = spec["mean"]
        c[2] = spec["amp"]
        return SigmaProfile.from_field(FourierField(grid, c))

    def model_params(self) -> ModelParams:
        m = self.raw["model"]
        return ModelParams(
            epsilon=m["epsilon"],
            sigma=self.sigma_profile(),
            n=m["n"],
            noise_form=m.get("noise_form", "basic"),
            nonlinear_terms=m.get("nonlinear_terms", True),
        )

    def stepper_config(self) -> StepperConfig:
        s = self.raw["stepper"]
        return StepperConfig(
            scheme=s["scheme"],
            dt=s["dt"],
            t_end=s["t_end"],
            record_every=self.raw.get("outputs", {}).get("record_every", 1),
            exponential_linear=s.get("exponential_linear", False),
        )

    def initial_field(self, grid: SpectralGrid) -> FourierField:
        spec = self.raw["initial"]
        preset = spec["preset"]
        if preset == "zero":
            return FourierField.zero(grid)
        if preset == "single_mode":
            return FourierField.from_modes(grid, cos={spec["j"]: spec["amp"]})
        if preset == "modes":
            return FourierField.from_modes(
                grid,
                c0=spec.get("c0", 0.0),
                cos={int(j): a for j, a in spec.get("cos", {}).items()},
                sin={int(j): a for j, a in spec.get("sin", {}).items()},
            )
        if preset == "gaussian_bump":
            width, amp = spec["width"], spec["amp"]
            return FourierField.from_function(
                grid, lambda x: amp * np.exp(-0.5 * ((x - 0.5) / width) ** 2)
            )
        rng = np.random.default_rng(spec["seed"])
        return random_field(grid, spec["decay_exponent"], rng)

    # -- plain accessors -----------------------------------------------------

    @property
    def n_paths(self) -> int:
        return self.raw.get("ensemble", {}).get("n_paths", 1)

    @property
    def master_seed(self) -> int:
        return self.raw.get("ensemble", {}).get("master_seed", 0)

    @property
    def out_dir(self) -> str:
        return self.raw["outputs"]["directory"]

    def section(self, name: str) -> dict:
        return self.raw.get(name, {})


def validate_config(data) -> RunConfig:
    """Validate a parsed JSON object and return a RunConfig."""
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    for key in data:
        if key != "schema_version" and key not in _TOP_SECTIONS:
            raise ConfigError(f"{key}: unknown section")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )
    out = {"schema_version": SCHEMA_VERSION}

    if "model" in data:
        m = data["model"]
        _check_keys(m, {"epsilon", "sigma", "n", "noise_form", "nonlinear_terms"},
                    {"epsilon", "sigma", "n"}, "model")
        parsed = {
            "epsilon": _expect(m["epsilon"], float, "model.epsilon"),
            "sigma": _validate_sigma(m["sigma"], "model.sigma"),
            "n": _expect(m["n"], int, "model.n"),
        }
        if parsed["epsilon"] < 0.0:
            raise ConfigError("model.epsilon: must be nonnegative")
        if parsed["n"] < 1:
            raise ConfigError("model.n: must be >= 1")
        if "noise_form" in m:
            parsed["noise_form"] = _expect(m["noise_form"], str, "model.noise_form")
            if parsed["noise_form"] not in NOISE_FORMS:
                raise ConfigError(
                    f"model.noise_form: unknown form {parsed['noise_form']!r}"
                )
        if "nonlinear_terms" in m:
            parsed["nonlinear_terms"] = _expect(m["nonlinear_terms"], bool,
                                                "model.nonlinear_terms")
        out["model"] = parsed

    if "stepper" in data:
        s = data["stepper"]
        _check_keys(s, {"scheme", "dt", "t_end", "exponential_linear"},
                    {"scheme", "dt", "t_end"}, "stepper")
        parsed = {
            "scheme": _expect(s["scheme"], str, "stepper.scheme"),
            "dt": _expect(s["dt"], float, "stepper.dt"),
            "t_end": _expect(s["t_end"], float, "stepper.t_end"),
        }
        if parsed["scheme"] not in SCHEMES:
            raise ConfigError(f"stepper.scheme: unknown scheme {parsed['scheme']!r}")
        if parsed["dt"] <= 0.0 or parsed["t_end"] <= 0.0:
            raise ConfigError("stepper.dt and stepper.t_end must be positive")
        if "exponential_linear" in s:
            parsed["exponential_linear"] = _expect(
                s["exponential_linear"], bool, "stepper.exponential_linear"
            )
        out["stepper"] = parsed

    if "initial" in data:
        out["initial"] = _validate_initial(data["initial"], "initial")

    if "ensemble" in data:
        e = data["ensemble"]
        _check_keys(e, {"n_paths", "master_seed"}, set(), "ensemble")
        parsed = {}
        if "n_paths" in e:
            parsed["n_paths"] = _expect(e["n_paths"], int, "ensemble.n_paths")
            if parsed["n_paths"] < 1:
                raise ConfigError("ensemble.n_paths: must be >= 1")
        if "master_seed" in e:
            parsed["master_seed"] = _expect(e["master_seed"], int, "ensemble.master_seed")
            if parsed["master_seed"] < 0:
                raise ConfigError("ensemble.master_seed: must be nonnegative")
        out["ensemble"] = parsed

    if "outputs" in data:
        o = data["outputs"]
        _check_keys(o, {"directory", "record_every"}, {"directory"}, "outputs")
        parsed = {"directory": _expect(o["directory"], str, "outputs.directory")}
        if "record_every" in o:
            parsed["record_every"] = _expect(o["record_every"], int,
                                             "outputs.record_every")
            if parsed["record_every"] < 1:
                raise ConfigError("outputs.record_every: must be >= 1")
        out["outputs"] = parsed

    if "converge" in data:
        c = data["converge"]
        _check_keys(c, {"levels", "schemes"}, set(), "converge")
        parsed = {}
        if "levels" in c:
            if not isinstance(c["levels"], list) or len(c["levels"]) < 3:
                raise ConfigError("converge.levels: expected a list of >= 3 levels")
            parsed["levels"] = [_expect(x, float, f"converge.levels[{i}]")
                                for i, x in enumerate(c["levels"])]
        if "schemes" in c:
            if not isinstance(c["schemes"], list) or not c["schemes"]:
                raise ConfigError("converge.schemes: expected a nonempty list")
            schemes = [_expect(s, str, f"converge.schemes[{i}]")
                       for i, s in enumerate(c["schemes"])]
            for s in schemes:
                if s not in SCHEMES:
                    raise ConfigError(f"converge.schemes: unknown scheme {s!r}")
            parsed["schemes"] = schemes
        out["converge"] = parsed

    if "uniqueness" in data:
        u = data["uniqueness"]
        _check_keys(u, {"amplitudes", "refine_n"}, set(), "uniqueness")
        parsed = {}
        if "amplitudes" in u:
            if not isinstance(u["amplitudes"], list) or not u["amplitudes"]:
                raise ConfigError("uniqueness.amplitudes: expected a nonempty list")
            amps = [_expect(x, float, f"uniqueness.amplitudes[{i}]")
                    for i, x in enumerate(u["amplitudes"])]
            if any(a <= 0.0 for a in amps):
                raise ConfigError("uniqueness.amplitudes: must be positive")
            parsed["amplitudes"] = amps
        if "refine_n" in u:
            parsed["refine_n"] = _expect(u["refine_n"], bool, "uniqueness.refine_n")
        out["uniqueness"] = parsed

    if "commutators" in data:
        c = data["commutators"]
        _check_keys(c, {"test_class", "deltas", "profile", "seed", "j_max"},
                    set(), "commutators")
        parsed = {}
        if "test_class" in c:
            parsed["test_class"] = _expect(c["test_class"], str, "commutators.test_class")
        if "deltas" in c:
            if not isinstance(c["deltas"], list) or len(c["deltas"]) < 2:
                raise ConfigError("commutators.deltas: expected a list of >= 2 widths")
            parsed["deltas"] = [_expect(x, float, f"commutators.deltas[{i}]")
                                for i, x in enumerate(c["deltas"])]
        if "profile" in c:
            parsed["profile"] = _expect(c["profile"], str, "commutators.profile")
        if "seed" in c:
            parsed["seed"] = _expect(c["seed"], int, "commutators.seed")
        if "j_max" in c:
            parsed["j_max"] = _expect(c["j_max"], int, "commutators.j_max")
            if parsed["j_max"] < 4:
                raise ConfigError("commutators.j_max: must be >= 4")
        out["commutators"] = parsed

    if "gronwall" in data:
        g = data["gronwall"]
        _check_keys(g, {"preset", "n_samples", "nu", "r", "n_steps", "t_end",
                        "noise_scale", "seed"}, {"preset"}, "gronwall")
        preset = _expect(g["preset"], str, "gronwall.preset")
        if preset not in ("deterministic", "simulated", "corrupted"):
            raise ConfigError(f"gronwall.preset: unknown preset {preset!r}")
        parsed = {"preset": preset}
        for key, typ, lo in (("n_samples", int, 2), ("n_steps", int, 2),
                             ("seed", int, 0)):
            if key in g:
                parsed[key] = _expect(g[key], typ, f"gronwall.{key}")
                if parsed[key] < lo:
                    raise ConfigError(f"gronwall.{key}: must be >= {lo}")
        for key in ("nu", "r", "t_end", "noise_scale"):
            if key in g:
                parsed[key] = _expect(g[key], float, f"gronwall.{key}")
                if parsed[key] <= 0.0:
                    raise ConfigError(f"gronwall.{key}: must be positive")
        out["gronwall"] = parsed

    cfg = RunConfig(out)
    _stability_check(out)
    return cfg


def _stability_check(data: dict) -> None:
    """Warn when an explicit step exceeds the viscous stability scale.

    The stiffest retained mode carries the eigenvalue -eps (2 pi n)^2; the
    classical explicit stability regions end near |lambda| dt ~ 2.5.  The
    exact-linear-flow variant integrates that term exactly and is exempt.
    """
    if "model" not in data or "stepper" not in data:
        return
    if data["stepper"].get("exponential_linear", False):
        return
    eps, n = data["model"]["epsilon"], data["model"]["n"]
    dt = data["stepper"]["dt"]
    margin = eps * (2.0 * np.pi * n) ** 2 * dt
    if margin > 2.5:
        warnings.warn(
            StabilityWarning(
                f"explicit step dt={dt} puts the stiffest viscous mode at "
                f"|lambda| dt = {margin:.2f} > 2.5; expect instability "
                f"(reduce dt below ~{2.5 / (eps * (2.0 * np.pi * n) ** 2):.2e} "
                f"or use the exact-linear-flow stepper)"
            ),
            stacklevel=3,
        )


def load_config(path: str, overrides=()) -> RunConfig:
    """Load, override and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config {path} is not valid JSON: line {exc.lineno}, "
            f"column {exc.colno}: {exc.msg}"
        ) from exc
    if overrides:
        data = apply_overrides(data, overrides)
    return validate_config(data)


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``section.key=value`` pairs; values parse as JSON when possible."""
    import copy

    out = copy.deepcopy(data)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key.path=value")
        dotted, _, text = item.partition("=")
        keys = dotted.split(".")
        if not all(keys):
            raise ConfigError(f"override {item!r}: empty key component")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(
                    f"override {item!r}: {key} is not an object"
                )
        node[keys[-1]] = value
    return out
