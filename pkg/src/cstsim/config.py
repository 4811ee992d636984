"""INI-style run configuration.

Sections and keys are fixed; unknown ones are rejected with the line they
appear on. User-facing frequencies and rates are ordinary frequencies in
MHz and are converted to rad/us here; fields are in mT, temperatures in K.
"""

import configparser
import hashlib
import os
from dataclasses import dataclass

import numpy as np

from .levels import HamiltonianParams, ZfsTemperatureModel, d_e_of_temperature
from .spectra import FIT_TABLE, SpectrumConfig, fit_table_rates
from .threestate import ThreeStateRates
from .twostate import DrivePair, TwoStateRates

TWO_PI = 2.0 * np.pi


class ConfigError(ValueError):
    """Invalid configuration; the message names the file, line and key."""


# section -> key -> (kind, default); default None means required when the section is used
SCHEMA = {
    "zfs": {
        "two_d_g": ("float", 70.0),
        "two_d_e_ref": ("float", 430.0),
        "slope": ("float", 2.1),
        "t_ref": ("float", 300.0),
    },
    "levels": {
        "temperature": ("float", 125.0),
        "state": ("str", "both"),
        "two_d": ("float", ""),
        "g_factor": ("float", 2.0),
        "b_axis": ("vec3", "0, 1, 0"),
        "b_min": ("float", 0.0),
        "b_max": ("float", 25.0),
        "b_step": ("float", 0.1),
        "f_drive": ("float", 921.0),
        "delta_m": ("int", 2),
    },
    "spectrum": {
        "temperature": ("float", None),
        "f_drive": ("float", 921.0),
        "b_min": ("float", 0.0),
        "b_max": ("float", 25.0),
        "b_step": ("float", 0.02),
        "b_axis": ("vec3", "0, 1, 0"),
        "g_factor": ("float", 2.0),
        "rabi_g": ("float", 0.1),
        "rabi_ratio": ("float", ""),
        "transitions": ("pairs", "-1.5:0.5, 1.5:-0.5"),
        "broadening_mode": ("str", "additive"),
        "model": ("str", "analytic"),
    },
    "rates": {
        "table_row": ("int", ""),
        "pump_p": ("float", ""),
        "decay_gamma": ("float", ""),
        "gamma_m1": ("float", ""),
        "gamma_m2": ("float", ""),
        "eta": ("float", 0.05),
        "gamma_g": ("float", ""),
        "gamma_e": ("float", ""),
        "gamma_m": ("float", 0.0),
        "w_g": ("float", ""),
    },
    "drive": {
        "omega_z_g": ("float", None),
        "omega_z_e": ("float", None),
        "rabi_g": ("float", None),
        "rabi_e": ("float", None),
        "omega": ("float", ""),
    },
    "twostate": {
        "pump_p": ("float", None),
        "decay_gamma": ("float", None),
        "spin_gamma": ("float", None),
        "pump_sigma": ("float", 1.0),
        "scan_span": ("float", 0.05),
        "scan_points": ("int", 4001),
    },
    "fit": {
        "data": ("str", ""),
        "n_lines": ("int", ""),
        "seeds": ("seeds", ""),
        "fit_baseline": ("bool", "true"),
        "free_q": ("bools", ""),
        "max_iter": ("int", 200),
    },
}

COMMAND_SECTIONS = {
    "levels": ("levels", "zfs"),
    "spectrum": ("spectrum", "rates", "zfs"),
    "fit": ("fit",),
    "cst": ("drive", "twostate"),
}

_RATE_KEYS = ("pump_p", "decay_gamma", "gamma_m1", "gamma_m2", "gamma_g", "gamma_e", "gamma_m", "w_g")


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: typed values per section plus the source path."""

    sections: dict
    source: str = ""

    def get(self, section, key):
        return self.sections[section][key]

    def has(self, section):
        return section in self.sections

    def canonical_text(self):
        """Stable INI text of the parsed values; reparses to the same config."""
        lines = []
        for sec in sorted(self.sections):
            lines.append(f"[{sec}]")
            for key in sorted(self.sections[sec]):
                val = self.sections[sec][key]
                if val is None:
                    continue
                lines.append(f"{key} = {_format(SCHEMA[sec][key][0], val)}")
            lines.append("")
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    def resolve_path(self, path):
        if os.path.isabs(path) or not self.source:
            return path
        return os.path.join(os.path.dirname(os.path.abspath(self.source)), path)


def _format(kind, val):
    if kind == "float":
        return repr(float(val))
    if kind == "int":
        return str(int(val))
    if kind == "bool":
        return "true" if val else "false"
    if kind == "vec3":
        return ", ".join(repr(float(v)) for v in val)
    if kind == "pairs":
        return ", ".join(f"{a!r}:{b!r}" for a, b in val)
    if kind == "seeds":
        return ", ".join(f"{b0!r}:{w!r}" for b0, w in val)
    if kind == "bools":
        return ", ".join("true" if v else "false" for v in val)
    return str(val)


def _parse_value(kind, raw):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "float":
        v = float(raw)
        if not np.isfinite(v):
            raise ValueError("must be finite")
        return v
    if kind == "int":
        return int(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if kind == "vec3":
        parts = [float(p) for p in raw.split(",")]
        if len(parts) != 3:
            raise ValueError("expected three comma-separated numbers")
        return tuple(parts)
    if kind in ("pairs", "seeds"):
        out = []
        for item in raw.split(","):
            a, b = item.split(":")
            out.append((float(a), float(b)))
        return tuple(out)
    if kind == "bools":
        return tuple(_parse_value("bool", p) for p in raw.split(","))
    raise ValueError(f"unknown kind {kind}")


def _key_lines(text):
    """Map (section, key) to the 1-based line where it is defined."""
    where = {}
    sec = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("[") and s.endswith("]"):
            sec = s[1:-1].strip()
            where[(sec, None)] = no
        elif sec is not None:
            key = s.split("=", 1)[0].split(":", 1)[0].strip().lower()
            where[(sec, key)] = no
    return where


def parse_text(text, source="<string>"):
    """Parse and validate configuration text into a :class:`RunConfig`."""
    cp = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), delimiters=("=",)
    )
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    where = _key_lines(text)
    sections = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}:{where.get((sec, None), '?')}: unknown section [{sec}]")
        schema = SCHEMA[sec]
        vals = {}
        for key, raw in cp.items(sec):
            line = where.get((sec, key), "?")
            if key not in schema:
                raise ConfigError(f"{source}:{line}: unknown key '{key}' in [{sec}]")
            kind = schema[key][0]
            try:
                vals[key] = _parse_value(kind, raw)
            except ValueError as exc:
                raise ConfigError(f"{source}:{line}: bad value for '{key}' in [{sec}]: {exc}") from None
        for key, (kind, default) in schema.items():
            if key in vals:
                continue
            if default is None:
                raise ConfigError(f"{source}:{where.get((sec, None), '?')}: missing key '{key}' in [{sec}]")
            vals[key] = None if default == "" else _parse_value(kind, str(default))
        sections[sec] = vals
    return RunConfig(sections, source if source != "<string>" else "")


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_text(text, source=str(path))


def require(cfg, command):
    """Check that the sections a command needs are present."""
    for sec in COMMAND_SECTIONS[command]:
        if sec == "zfs":
            continue
        if not cfg.has(sec):
            raise ConfigError(f"{cfg.source or '<config>'}: command '{command}' needs a [{sec}] section")


def _wrap(fn, what, *args):
    try:
        return fn(*args)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"invalid {what}: {exc}") from None


def zfs_model(cfg):
    z = cfg.sections.get("zfs") or {k: _parse_value(kind, str(d)) for k, (kind, d) in SCHEMA["zfs"].items()}
    return _wrap(lambda: ZfsTemperatureModel(z["two_d_g"], z["two_d_e_ref"], z["slope"], z["t_ref"]), "[zfs]")


def level_params(cfg):
    """List of (state name, HamiltonianParams) for the levels command."""
    lv = cfg.sections["levels"]
    state = lv["state"].lower()
    if state not in ("gs", "es", "both"):
        raise ConfigError("[levels] state must be gs, es or both")
    if lv["b_step"] <= 0 or lv["b_max"] < lv["b_min"] or lv["b_min"] < 0:
        raise ConfigError("[levels] needs 0 <= b_min <= b_max and b_step > 0")

    def build():
        if lv["two_d"] is not None:
            return [("custom", HamiltonianParams(0.5 * lv["two_d"], lv["g_factor"]))]
        zfs = zfs_model(cfg)
        out = []
        if state in ("gs", "both"):
            out.append(("gs", HamiltonianParams(zfs.d_g, lv["g_factor"])))
        if state in ("es", "both"):
            out.append(("es", HamiltonianParams(d_e_of_temperature(zfs, lv["temperature"]), lv["g_factor"])))
        return out

    return _wrap(build, "[levels]")


def field_grid(b_min, b_max, b_step):
    n = int(np.floor((b_max - b_min) / b_step + 1e-9)) + 1
    return np.round(b_min + b_step * np.arange(n), 12)


def three_state_rates(cfg):
    """Rates from [rates] in rad/us; ``table_row`` fills unset keys from the fit table."""
    rt = cfg.sections["rates"]

    def build():
        if rt["table_row"] is not None:
            if rt["table_row"] not in FIT_TABLE:
                raise ValueError(f"table_row must be one of {sorted(FIT_TABLE)}")
            base = fit_table_rates(rt["table_row"], eta=rt["eta"])
            kw = {k: TWO_PI * rt[k] for k in _RATE_KEYS if rt[k] is not None}
            return base.replace(eta=rt["eta"], **kw)
        missing = [k for k in ("pump_p", "decay_gamma", "gamma_g", "gamma_e") if rt[k] is None]
        if missing:
            raise ValueError(f"missing {', '.join(missing)} (or set table_row)")
        gam = TWO_PI * rt["decay_gamma"]
        return ThreeStateRates(
            pump_p=TWO_PI * rt["pump_p"],
            decay_gamma=gam,
            gamma_m1=1e-3 * gam if rt["gamma_m1"] is None else TWO_PI * rt["gamma_m1"],
            gamma_m2=1e-3 * gam if rt["gamma_m2"] is None else TWO_PI * rt["gamma_m2"],
            eta=rt["eta"],
            gamma_g=TWO_PI * rt["gamma_g"],
            gamma_e=TWO_PI * rt["gamma_e"],
            gamma_m=TWO_PI * (rt["gamma_m"] or 0.0),
            w_g=TWO_PI * (rt["w_g"] or 0.0),
        )

    return _wrap(build, "[rates]")


def spectrum_config(cfg):
    sp = cfg.sections["spectrum"]
    rates = three_state_rates(cfg)
    ratio = sp["rabi_ratio"]
    if ratio is None:
        row = cfg.sections["rates"]["table_row"]
        ratio = FIT_TABLE[row]["rabi_ratio"] if row is not None else SpectrumConfig.__dataclass_fields__["rabi_ratio"].default
    if sp["b_step"] <= 0 or sp["b_max"] <= sp["b_min"]:
        raise ConfigError("[spectrum] needs b_max > b_min and b_step > 0")
    grid = field_grid(sp["b_min"], sp["b_max"], sp["b_step"])
    return _wrap(
        lambda: SpectrumConfig(
            temperature=sp["temperature"],
            f_drive=sp["f_drive"],
            b_grid=tuple(grid),
            rates=rates,
            rabi_g=TWO_PI * sp["rabi_g"],
            rabi_ratio=ratio,
            b_axis=sp["b_axis"],
            transitions=sp["transitions"],
            zfs=zfs_model(cfg),
            g_factor=sp["g_factor"],
            broadening_mode=sp["broadening_mode"],
            model=sp["model"],
        ),
        "[spectrum]",
    )


def drive_pair(cfg):
    dr = cfg.sections["drive"]
    return _wrap(
        lambda: DrivePair(
            TWO_PI * dr["omega_z_g"],
            TWO_PI * dr["omega_z_e"],
            TWO_PI * dr["rabi_g"],
            TWO_PI * dr["rabi_e"],
            TWO_PI * (dr["omega"] or 0.0),
        ),
        "[drive]",
    )


def two_state_rates(cfg):
    ts = cfg.sections["twostate"]
    if not (ts["scan_span"] > 0 and ts["scan_points"] >= 3):
        raise ConfigError("[twostate] needs scan_span > 0 and scan_points >= 3")
    return _wrap(
        lambda: TwoStateRates(
            TWO_PI * ts["pump_p"], TWO_PI * ts["decay_gamma"], TWO_PI * ts["spin_gamma"], TWO_PI * ts["pump_sigma"]
        ),
        "[twostate]",
    )
