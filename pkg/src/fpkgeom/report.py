from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one sampled identity check.

    ``passed`` is exactly ``max_residual <= tol``; ``witness`` is the sampled
    point where the residual was largest (``None`` for vacuous checks).
    """

    identity: str
    passed: bool
    max_residual: float
    witness: dict[str, float] | None
    samples: int
    tol: float
    note: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed != (self.max_residual <= self.tol):
            raise ValueError(f"inconsistent report for {self.identity}")

    @classmethod
    def vacuous(cls, identity: str, tol: float, reason: str) -> "CheckReport":
        return cls(identity, True, 0.0, None, 0, tol, note=f"vacuous: {reason}")

    def to_dict(self) -> dict:
        out = {
            "identity": self.identity,
            "pass": self.passed,
            "residual": self.max_residual,
            "witness": self.witness,
            "samples": self.samples,
            "tol": self.tol,
            "note": self.note,
        }
        if self.extra:
            out["extra"] = self.extra
        return out

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        text = f"{flag}  {self.identity:<40s} residual={self.max_residual:.3e} tol={self.tol:.0e} samples={self.samples}"
        if self.note:
            text += f"  [{self.note}]"
        if not self.passed and self.witness:
            pt = ", ".join(f"{k}={v:.6g}" for k, v in self.witness.items())
            text += f"\n      witness: {pt}"
        return text


def all_passed(reports) -> bool:
    return all(r.passed for r in reports)
