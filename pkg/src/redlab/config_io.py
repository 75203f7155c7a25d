"""Flat key=value experiment files, canonical emission, hashing, CSV output.

A config file is a sequence of key=value tokens separated by whitespace or
newlines, with # starting a comment. Emission is canonical (fixed key order,
one token per line, 9 significant digits), so emit-then-parse is identity
and equal configs hash equally.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

from .errors import ParseError
from .model import (
    CopyMode,
    DegenerateHyperExp,
    Deterministic,
    Exponential,
    ServiceDist,
    SystemConfig,
)
from .policies import PolicyId

# Canonical key order for emission; also the complete set of accepted keys.
CONFIG_KEYS = (
    "K",
    "d",
    "lambda",
    "mu",
    "speeds",
    "copy_mode",
    "policy",
    "service",
    "seed",
    "replications",
)

HASH_DIGITS = 12
# seed and replications identify a run, not a system; they stay out of the hash
_UNHASHED_KEYS = ("seed", "replications")


def format_number(x: float) -> str:
    """Serialize a number with 9 significant digits."""
    return f"{float(x):.9g}"


def format_service(dist: ServiceDist, mu: float) -> str:
    """Canonical token for a service law; the rate is implied when it equals mu."""
    if isinstance(dist, Exponential):
        if dist.rate == mu:
            return "exp"
        return f"exp:{format_number(dist.rate)}"
    if isinstance(dist, Deterministic):
        return f"det:{format_number(dist.value)}"
    if isinstance(dist, DegenerateHyperExp):
        if dist.rate == mu:
            return f"dhe:{format_number(dist.p)}"
        return f"dhe:{format_number(dist.p)}:{format_number(dist.rate)}"
    raise ParseError(f"no serialization for service law {type(dist).__name__}")


def parse_service(token: str, mu: float) -> ServiceDist:
    """Parse a service token: exp[:rate], det:value, dhe:p[:rate]."""
    parts = token.split(":")
    name, args = parts[0], parts[1:]
    try:
        if name == "exp":
            if len(args) == 0:
                return Exponential(mu)
            if len(args) == 1:
                return Exponential(float(args[0]))
        elif name == "det":
            if len(args) == 0:
                return Deterministic(1.0 / mu)
            if len(args) == 1:
                return Deterministic(float(args[0]))
        elif name == "dhe":
            if len(args) == 1:
                return DegenerateHyperExp(rate=mu, p=float(args[0]))
            if len(args) == 2:
                return DegenerateHyperExp(rate=float(args[1]), p=float(args[0]))
    except ValueError as exc:
        raise ParseError(f"bad number in service token {token!r}: {exc}") from None
    raise ParseError(
        f"unknown service token {token!r}; expected exp[:rate], det[:value], or dhe:p[:rate]"
    )


def _parse_speeds(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise ParseError(f"bad speeds list {text!r}: {exc}") from None


def parse_config_text(text: str) -> SystemConfig:
    """Parse key=value tokens into a validated SystemConfig.

    ParseError carries the 1-based line number of the offending token;
    violated model invariants surface as ValidationError from the config
    constructor itself.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        for token in body.split():
            if "=" not in token:
                raise ParseError(f"expected key=value, got {token!r}", line=lineno)
            key, value = token.split("=", 1)
            if key not in CONFIG_KEYS:
                raise ParseError(f"unknown key {key!r}", line=lineno)
            if key in raw:
                raise ParseError(f"duplicate key {key!r}", line=lineno)
            if not value:
                raise ParseError(f"empty value for {key!r}", line=lineno)
            raw[key] = value
    for required in ("K", "d", "lambda"):
        if required not in raw:
            raise ParseError(f"missing required key {required!r}")

    def number(key: str, conv, default=None):
        if key not in raw:
            return default
        try:
            return conv(raw[key])
        except ValueError:
            raise ParseError(f"bad value for {key!r}: {raw[key]!r}") from None

    mu = number("mu", float, 1.0)
    if "copy_mode" in raw:
        try:
            copy_mode = CopyMode(raw["copy_mode"])
        except ValueError:
            raise ParseError(
                f"unknown copy_mode {raw['copy_mode']!r}; expected iid or identical"
            ) from None
    else:
        copy_mode = CopyMode.IID
    if "policy" in raw:
        try:
            policy = PolicyId(raw["policy"])
        except ValueError:
            names = ", ".join(p.value for p in PolicyId)
            raise ParseError(
                f"unknown policy {raw['policy']!r}; expected one of {names}"
            ) from None
    else:
        policy = PolicyId.FCFS
    service = parse_service(raw["service"], mu) if "service" in raw else None
    return SystemConfig(
        K=number("K", int),
        d=number("d", int),
        lam=number("lambda", float),
        mu=mu,
        speeds=_parse_speeds(raw["speeds"]) if "speeds" in raw else None,
        copy_mode=copy_mode,
        policy=policy,
        service=service,
        seed=number("seed", int, 12345),
        replications=number("replications", int, 1),
    )


def parse_config(path) -> SystemConfig:
    """Parse the config file at path."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def emit_config(config: SystemConfig) -> str:
    """Canonical text for a config; parse(emit(c)) == c."""
    lines = [
        f"K={config.K}",
        f"d={config.d}",
        f"lambda={format_number(config.lam)}",
        f"mu={format_number(config.mu)}",
        "speeds=" + ",".join(format_number(v) for v in config.speeds),
        f"copy_mode={CopyMode(config.copy_mode).value}",
        f"policy={PolicyId(config.policy).value}",
        f"service={format_service(config.service, config.mu)}",
        f"seed={config.seed}",
        f"replications={config.replications}",
    ]
    return "\n".join(lines) + "\n"


def config_hash(config: SystemConfig) -> str:
    """Short digest of the system, excluding run identity (seed, replications)."""
    lines = [
        line
        for line in emit_config(config).splitlines()
        if line.split("=", 1)[0] not in _UNHASHED_KEYS
    ]
    digest = hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()
    return digest[:HASH_DIGITS]


def format_cell(value) -> str:
    """One CSV cell: floats at 9 significant digits, everything else as str."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def csv_text(header: list[str], rows: list[tuple], provenance: str | None = None) -> str:
    """Render rows to CSV text: comma separator, LF endings, header row first.

    provenance, when given, is emitted as a leading # comment line; writers
    whose schema already carries config_hash and seed columns omit it.
    """
    lines = []
    if provenance is not None:
        lines.append(f"# {provenance}")
    lines.append(",".join(header))
    for row in rows:
        if len(row) != len(header):
            raise ParseError(
                f"row width {len(row)} does not match header width {len(header)}"
            )
        lines.append(",".join(format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header: list[str], rows: list[tuple], provenance: str | None = None):
    """Write CSV to path with LF endings regardless of platform."""
    text = csv_text(header, rows, provenance)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def provenance_line(config: SystemConfig) -> str:
    """The config_hash,seed pair carried by every CSV output."""
    return f"config_hash={config_hash(config)},seed={config.seed}"
