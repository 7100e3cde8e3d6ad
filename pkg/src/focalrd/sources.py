"""Source specification strings and F_X selection.

Grammar::

    uniform:K
    bernoulli:P
    binomial:N:P          (alphabet 0..N)
    pmf:V1,V2,...         (decimals or fractions such as 2/3)
    pmf-file:PATH

Any of them may end in ``:q=V1,V2,...`` or ``:q=file:PATH`` to attach a weight
distribution Q; the coded source is then R_X = P Q / sum(P Q).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError
from .prob import (
    Pmf,
    Source,
    bernoulli_pmf,
    binomial_pmf,
    parse_pmf_text,
    pmf_from_values,
    read_pmf_file,
    uniform_pmf,
)

FX_MODES = ("source", "uniform", "file", "optimize")
_Q_MARKER = ":q="


def _number(text: str, what: str, kind: type = float):
    try:
        return kind(text)
    except ValueError:
        raise ValidationError(f"{what} must be a {kind.__name__}, got {text!r}") from None


def _parse_values(text: str, renormalize: bool = False) -> Pmf:
    if text.startswith("file:"):
        return read_pmf_file(text[len("file:"):], renormalize=renormalize)
    return pmf_from_values(parse_pmf_text(text))


def _parse_base(spec: str, renormalize: bool = False) -> Pmf:
    kind, _, rest = spec.partition(":")
    if kind == "uniform":
        return uniform_pmf(_number(rest, "uniform alphabet size", int))
    if kind == "bernoulli":
        return bernoulli_pmf(_number(rest, "bernoulli probability"))
    if kind == "binomial":
        trials, sep, p = rest.partition(":")
        if not sep:
            raise ValidationError(f"binomial source needs 'binomial:N:P', got {spec!r}")
        return binomial_pmf(_number(trials, "binomial trials", int), _number(p, "binomial probability"))
    if kind == "pmf":
        return pmf_from_values(parse_pmf_text(rest))
    if kind == "pmf-file":
        return read_pmf_file(rest, renormalize=renormalize)
    raise ValidationError(f"unknown source kind {kind!r} in {spec!r}")


def parse_source_spec(spec: str, renormalize: bool = False) -> Source:
    """Build a Source from its text form; ``renormalize`` rescales values read from files."""
    spec = spec.strip()
    if not spec:
        raise ValidationError("empty source specification")
    base, marker, q_text = spec.partition(_Q_MARKER)
    p = _parse_base(base, renormalize)
    q = _parse_values(q_text, renormalize) if marker else None
    if q is not None and len(q) != len(p):
        raise ValidationError(f"weight distribution has {len(q)} entries, source has {len(p)}")
    return Source(p=p, q=q, name=spec)


@dataclass(frozen=True)
class FxChoice:
    mode: str
    path: str = ""

    @property
    def optimize(self) -> bool:
        return self.mode == "optimize"


def parse_fx_mode(text: str) -> FxChoice:
    mode, _, path = text.strip().partition(":")
    if mode not in FX_MODES:
        raise ValidationError(f"--fx must be one of source, uniform, file:PATH, optimize; got {text!r}")
    if mode == "file" and not path:
        raise ValidationError("--fx file needs a path: file:PATH")
    return FxChoice(mode=mode, path=path)


def resolve_fx(choice: FxChoice, source: Source, renormalize: bool = False) -> Pmf:
    """F used for the closed-form bounds; ``optimize`` starts from F = R_X."""
    if choice.mode == "uniform":
        return uniform_pmf(len(source))
    if choice.mode == "file":
        f = read_pmf_file(choice.path, renormalize=renormalize)
        if len(f) != len(source):
            raise ValidationError(f"F file has {len(f)} entries, source has {len(source)}")
        return f
    return source.r
