"""Hyperparameter record shared by model fitting, ensembles and tuning."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from .errors import ConfigError

#: Reservoir weight scale held fixed rather than tuned.
A_RES = 0.1


@dataclass(frozen=True)
class HyperParams:
    """Settings for one AESN / ESN / ESN-with-EOF fit.

    ``k_embed`` is the number of random embedding copies (AESN only) and
    ``n_eof`` the retained EOF count (EOF baseline only; ``None`` picks the
    count reaching 90% explained variance).
    """

    a_u: float = 0.1
    a_in: float = 0.1
    nu: float = 0.9
    tau: float = 1e-2
    alpha: float = 0.9
    n_h: int = 200
    k_embed: int = 10
    lags: int = 3
    n_eof: int | None = None
    pi_res: float = 0.1
    a_res: float = A_RES
    washout: int = 3

    def __post_init__(self):
        for name in ("a_u", "a_in", "nu", "a_res"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.tau >= 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 < self.pi_res <= 1:
            raise ConfigError(f"pi_res must lie in (0, 1], got {self.pi_res}")
        if self.n_h < 1 or self.k_embed < 1 or self.lags < 1 or self.washout < 0:
            raise ConfigError("n_h, k_embed and lags must be >= 1 and washout >= 0")
        if self.n_eof is not None and self.n_eof < 1:
            raise ConfigError("n_eof must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        known = {f.name: f for f in fields(cls)}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown hyperparameter(s): {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            if v is None:
                kw[k] = None
            elif k in ("n_h", "k_embed", "lags", "n_eof", "washout"):
                kw[k] = int(v)
            else:
                kw[k] = float(v)
        return cls(**kw)

    def update(self, **kw) -> "HyperParams":
        return replace(self, **kw)
