"""Experiment configuration: ``[section]`` headers with ``key = value`` lines.

Comments start with ``#`` or ``;``.  Parsing collects every problem (with its
line number) before failing, so one run reports all mistakes at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import levy
from .payoffs import Payoff


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


FAMILY_PARAMS = {
    "bs": {"a": None},
    "merton": {"a": 0.0, "lam": None, "mean": None, "std": None},
    "kou": {"a": 0.0, "lam": None, "p": None, "eta_up": None, "eta_down": None},
    "cgmy": {"a": 0.0, "C": None, "G": None, "M": None, "Y": None},
    "vg": {"a": 0.0, "C": None, "G": None, "M": None},
    "nig": {"a": 0.0, "alpha": None, "beta": None, "delta": None},
}
VG_ALT = ("theta", "sigma", "kappa")

SECTIONS = {
    "model": None,  # keys depend on the family
    "measure": {"mode": "drift-adjust"},
    "payoff": {"kind": None, "K": None, "T": None, "R": "", "S0": 1.0},
    "experiment": {
        "strategy": "delta",
        "n_list": "4, 8, 16, 32, 64",
        "n_paths": 100_000,
        "seed": 0,
        "m": 32,
        "eps": 1e-3,
        "gaussian_refinement": True,
    },
    "output": {"directory": "out", "formats": "csv"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    model: dict
    measure: dict
    payoff: dict
    experiment: dict
    output: dict
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    # -- builders ------------------------------------------------------------

    def historical_model(self):
        return build_model(self.model["family"], self.model, self.model.get("gamma"))

    def market_pair(self):
        p = self.historical_model()
        if self.measure["mode"] == "drift-adjust":
            return levy.MarketPair(p, levy.martingale_adjust(p))
        q_params = dict(self.model)
        q_params.update({k[2:]: v for k, v in self.measure.items() if k.startswith("q_")})
        q = build_model(self.model["family"], q_params, None)
        return levy.MarketPair(p, q)

    def payoff_obj(self):
        R = self.payoff["R"]
        return Payoff(self.payoff["kind"], self.payoff["K"], None if R == "" else R)

    @property
    def T(self):
        return self.payoff["T"]

    @property
    def S0(self):
        return self.payoff["S0"]

    @property
    def strategies(self):
        s = self.experiment["strategy"]
        return ["delta", "quadratic"] if s == "both" else [s]

    def sim_config(self, seed=None):
        from .montecarlo import SimConfig

        e = self.experiment
        return SimConfig(
            n_paths=e["n_paths"], seed=e["seed"] if seed is None else seed, m=e["m"],
            eps=e["eps"], gaussian_refinement=e["gaussian_refinement"],
        )


def build_model(family, params, gamma):
    a = params.get("a", 0.0)
    if family == "bs":
        return levy.black_scholes(a, gamma)
    if family == "merton":
        return levy.merton(a, params["lam"], params["mean"], params["std"], gamma)
    if family == "kou":
        return levy.kou(a, params["lam"], params["p"], params["eta_up"], params["eta_down"], gamma)
    if family == "cgmy":
        return levy.cgmy(params["C"], params["G"], params["M"], params["Y"], a, gamma)
    if family == "vg":
        return levy.variance_gamma(params["C"], params["G"], params["M"], a, gamma)
    if family == "nig":
        return levy.nig(params["alpha"], params["beta"], params["delta"], a, gamma)
    raise ValueError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# parsing


def _tokenize(text, errors):
    """-> {section: {key: (value, line)}}"""
    out = {}
    section = None
    seen = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append(f"line {no}: malformed section header {raw.strip()!r}")
                continue
            section = line[1:-1].strip().lower()
            if section not in SECTIONS:
                errors.append(f"line {no}: unknown section [{section}]")
                section = "?"
            if section in seen and section != "?":
                errors.append(f"line {no}: section [{section}] repeated (first at line {seen[section]})")
            seen.setdefault(section, no)
            out.setdefault(section, {})
            continue
        if "=" not in line:
            errors.append(f"line {no}: expected 'key = value', got {raw.strip()!r}")
            continue
        if section is None:
            errors.append(f"line {no}: key outside of any section")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            errors.append(f"line {no}: empty key")
            continue
        sec = out.setdefault(section, {})
        if key in sec:
            errors.append(f"line {no}: duplicate key '{key}' in [{section}] (lines {sec[key][1]} and {no})")
            continue
        sec[key] = (value, no)
    return out


def _number(value, key, line, errors, kind=float):
    try:
        if kind is int:
            try:
                return int(value)
            except ValueError:
                # allow 1e5-style counts, but only when exactly integral
                f = float(value)
                if not math.isfinite(f) or f != int(f) or abs(f) > 2**53:
                    raise
                return int(f)
        v = float(value)
        if not math.isfinite(v):
            raise ValueError
        return v
    except ValueError:
        errors.append(f"line {line}: {key} must be {'an integer' if kind is int else 'a number'}, got {value!r}")
        return None


def _bool(value, key, line, errors):
    v = value.lower()
    if v in ("true", "yes", "1", "on"):
        return True
    if v in ("false", "no", "0", "off"):
        return False
    errors.append(f"line {line}: {key} must be true or false, got {value!r}")
    return None


def _check_range(cond, msg, line, errors):
    if not cond:
        errors.append(f"line {line}: {msg}")


def _model_section(tok, errors):
    sec = tok.get("model")
    if sec is None:
        errors.append("missing section [model]")
        return None
    fam = sec.get("family")
    if fam is None:
        errors.append("[model]: missing required key 'family'")
        return None
    family, fline = fam[0].lower(), fam[1]
    if family not in FAMILY_PARAMS:
        errors.append(f"line {fline}: unknown family {fam[0]!r} (expected one of {', '.join(FAMILY_PARAMS)})")
        return None
    spec = dict(FAMILY_PARAMS[family])
    allowed = set(spec) | {"family", "gamma"}
    if family == "vg":
        allowed |= set(VG_ALT)
    out = {"family": family}
    lines = {}
    for key, (value, line) in sec.items():
        if key == "family":
            continue
        if key not in allowed:
            errors.append(f"line {line}: unknown key '{key}' for family {family}")
            continue
        v = _number(value, key, line, errors)
        if v is not None:
            out[key] = v
            lines[key] = line
    if family == "vg" and any(k in out for k in VG_ALT):
        if any(k in out for k in ("C", "G", "M")):
            errors.append(f"line {fline}: give either C, G, M or theta, sigma, kappa for vg, not both")
            return None
        missing = [k for k in VG_ALT if k not in out]
        if missing:
            errors.append(f"[model]: missing required key '{missing[0]}'")
            return None
        th, sg, kp = (out.pop(k) for k in VG_ALT)
        _check_range(sg > 0 and kp > 0, "sigma and kappa must be > 0", lines["sigma"], errors)
        if sg > 0 and kp > 0:
            j = levy.VGJumps.from_theta_sigma_kappa(th, sg, kp)
            out.update(C=j.C, G=j.G, M=j.M)
            for k in "CGM":
                lines[k] = lines["theta"]
    for key, default in spec.items():
        if key not in out:
            if default is None:
                errors.append(f"[model]: missing required key '{key}'")
            else:
                out[key] = default
    _validate_family(family, out, lines, fline, errors, prefix="")
    return out, lines


def _validate_family(family, v, lines, fline, errors, prefix):
    def L(k):
        return lines.get(k, fline)

    def chk(key, cond, msg):
        if key in v and not cond(v[key]):
            _check_range(False, f"{prefix}{msg}", L(key), errors)

    chk("a", lambda x: x >= 0, "a must be >= 0")
    if family == "bs":
        chk("a", lambda x: x > 0, "a must be > 0 for the bs family")
    if family in ("merton", "kou"):
        chk("lam", lambda x: x >= 0, "lam must be >= 0")
    if family == "merton":
        chk("std", lambda x: x > 0, "std must be > 0")
    if family == "kou":
        chk("p", lambda x: 0 <= x <= 1, "p must lie in [0,1]")
        chk("eta_up", lambda x: x > 1, "eta_up must be > 1 (e^x must be integrable)")
        chk("eta_down", lambda x: x > 0, "eta_down must be > 0")
    if family in ("cgmy", "vg"):
        chk("C", lambda x: x > 0, "C must be > 0")
        chk("G", lambda x: x > 0, "G must be > 0")
        chk("M", lambda x: x > 1, "M must be > 1 (e^x must be integrable)")
    if family == "cgmy":
        chk("Y", lambda x: 0 <= x < 2, "Y must lie in [0,2)")
    if family == "nig":
        chk("alpha", lambda x: x > 0, "alpha must be > 0")
        chk("delta", lambda x: x > 0, "delta must be > 0")
        if "alpha" in v and "beta" in v and not abs(v["beta"]) < v["alpha"]:
            _check_range(False, f"{prefix}|beta| must be < alpha", L("beta"), errors)
        elif "alpha" in v and "beta" in v and not v["alpha"] - v["beta"] > 1:
            _check_range(False, f"{prefix}alpha - beta must be > 1 (e^x must be integrable)", L("beta"), errors)


def _measure_section(tok, family, model, errors):
    sec = tok.get("measure", {})
    out = {"mode": "drift-adjust"}
    lines = {}
    if "mode" in sec:
        mode, line = sec["mode"]
        if mode not in ("drift-adjust", "explicit"):
            errors.append(f"line {line}: mode must be drift-adjust or explicit, got {mode!r}")
        out["mode"] = mode
    params = set(FAMILY_PARAMS.get(family, {}))
    for key, (value, line) in sec.items():
        if key == "mode":
            continue
        if not (key.startswith("q_") and key[2:] in params):
            errors.append(f"line {line}: unknown key '{key}' in [measure]")
            continue
        if out["mode"] != "explicit":
            errors.append(f"line {line}: '{key}' requires mode = explicit")
            continue
        v = _number(value, key, line, errors)
        if v is not None:
            out[key] = v
            lines[key[2:]] = line
    if out["mode"] == "explicit" and model is not None:
        merged = dict(model)
        merged.update({k[2:]: v for k, v in out.items() if k.startswith("q_")})
        _validate_family(family, merged, lines, sec.get("mode", ("", 0))[1], errors, prefix="Q: ")
    return out


def _simple_section(name, tok, errors):
    spec = SECTIONS[name]
    sec = tok.get(name)
    if sec is None:
        sec = {}
        if any(v is None for v in spec.values()):
            errors.append(f"missing section [{name}]")
            return None
    out = {}
    for key, (value, line) in sec.items():
        if key not in spec:
            errors.append(f"line {line}: unknown key '{key}' in [{name}]")
            continue
        default = spec[key]
        if isinstance(default, bool):
            v = _bool(value, key, line, errors)
        elif isinstance(default, int) and not isinstance(default, bool):
            v = _number(value, key, line, errors, int)
        elif isinstance(default, float) or (default is None and key in ("K", "T")):
            v = _number(value, key, line, errors)
        elif key == "R":
            v = "" if value == "" else _number(value, key, line, errors)
        else:
            v = value
        if v is not None:
            out[key] = (v, line)
    for key, default in spec.items():
        if key not in out:
            if default is None:
                errors.append(f"[{name}]: missing required key '{key}'")
            else:
                out[key] = (default, None)
    return out


def parse_config(text):
    """Validated ExperimentConfig; raises ConfigError listing every problem."""
    errors = []
    tok = _tokenize(text, errors)
    tok.pop("?", None)
    m = _model_section(tok, errors)
    model, mlines = (m if m else (None, {}))
    family = model["family"] if model else None
    measure = _measure_section(tok, family, model, errors)
    sections = {}
    for name in ("payoff", "experiment", "output"):
        sections[name] = _simple_section(name, tok, errors)
    pay = sections["payoff"]
    if pay is not None:
        kind, line = pay.get("kind", ("", None))
        if kind not in ("call", "digital"):
            errors.append(f"line {line}: payoff kind must be call or digital, got {kind!r}")
        for key, msg in (("K", "K must be > 0"), ("T", "T must be > 0"), ("S0", "S0 must be > 0")):
            if key in pay and isinstance(pay[key][0], float) and not pay[key][0] > 0:
                errors.append(f"line {pay[key][1]}: {msg}")
        R, rline = pay.get("R", ("", None))
        if R != "" and R is not None and kind in ("call", "digital"):
            lo = 1.0 if kind == "call" else 0.0
            if not R > lo:
                errors.append(f"line {rline}: R must be > {lo:g} for a {kind}")
    exp = sections["experiment"]
    if exp is not None:
        s, line = exp["strategy"]
        if s not in ("delta", "quadratic", "both"):
            errors.append(f"line {line}: strategy must be delta, quadratic or both, got {s!r}")
        nl, line = exp["n_list"]
        try:
            ns = [int(x) for x in str(nl).replace(",", " ").split()]
            if not ns or any(n <= 0 for n in ns) or ns != sorted(set(ns)):
                raise ValueError
            exp["n_list"] = (tuple(ns), line)
        except ValueError:
            errors.append(f"line {line}: n_list must be increasing positive integers, got {nl!r}")
        for key, cond, msg in (
            ("n_paths", lambda v: v >= 1000, "n_paths must be >= 1000"),
            ("m", lambda v: v >= 8, "m must be >= 8"),
            ("eps", lambda v: v > 0, "eps must be > 0"),
            ("seed", lambda v: 0 <= v < 2**64, "seed must lie in [0, 2^64)"),
        ):
            v, line = exp[key]
            if not cond(v):
                errors.append(f"line {line}: {msg}")
    out = sections["output"]
    if out is not None and out["formats"][0] != "csv":
        errors.append(f"line {out['formats'][1]}: only the csv output format is supported")
    if errors:
        raise ConfigError(errors)
    strip = lambda d: {k: v[0] for k, v in d.items()}
    cfg = ExperimentConfig(
        model=model, measure=measure, payoff=strip(pay), experiment=strip(exp),
        output=strip(out), lines=mlines,
    )
    # models must be constructible (e.g. martingale adjustment feasible)
    try:
        cfg.market_pair()
        cfg.payoff_obj()
    except ValueError as exc:
        raise ConfigError([f"[model]: {exc}"]) from None
    return cfg


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(str(x) for x in v)
    return str(v)


def render(cfg):
    """Text form accepted by parse_config (round trip)."""
    parts = ["[model]", f"family = {cfg.model['family']}"]
    parts += [f"{k} = {_fmt(v)}" for k, v in cfg.model.items() if k != "family"]
    parts += ["", "[measure]"] + [f"{k} = {_fmt(v)}" for k, v in cfg.measure.items()]
    for name in ("payoff", "experiment", "output"):
        parts += ["", f"[{name}]"] + [f"{k} = {_fmt(v)}" for k, v in getattr(cfg, name).items()]
    return "\n".join(parts) + "\n"
