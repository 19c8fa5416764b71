"""Compact rule/kernel spec strings: NAME[:key=value[,key=value]*].

Nested kernel specs such as "tw:base=energy:beta=1.0,t=0.5" parse as
base="energy:beta=1.0" and t="0.5" because values keep their embedded
colons; the nested spec must therefore be single-parameter, with further
top-level keys (and t) following it.  A bare token with no '=' is a
positional flag (e.g. "crps:fair", "energy:beta=1.0,empirical").
"""

from __future__ import annotations

from .model import ValidationError


def parse_spec(spec: str) -> tuple[str, dict]:
    if not isinstance(spec, str) or not spec.strip():
        raise ValidationError("empty rule spec")
    spec = spec.strip()
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    params: dict[str, object] = {}
    if rest:
        for token in rest.split(","):
            token = token.strip()
            if not token:
                raise ValidationError(f"malformed spec {spec!r}")
            if "=" in token:
                key, _, value = token.partition("=")
                key = key.strip().lower()
                if not key:
                    raise ValidationError(f"malformed spec {spec!r}")
                params[key] = value.strip()
            else:
                params.setdefault("_flags", []).append(token.lower())
    return name, params


def spec_float(params: dict, key: str, default=None) -> float:
    if key not in params:
        if default is None:
            raise ValidationError(f"spec needs parameter {key!r}")
        return float(default)
    try:
        return float(params[key])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"parameter {key!r} must be a number") from exc
