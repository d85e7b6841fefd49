"""Exception hierarchy shared by all hetnet modules.

Every numerical failure carries a short machine-readable ``code`` so the CLI
can map it onto an exit status and reports can name it.
"""

from __future__ import annotations


class HetnetError(Exception):
    """Base class for all errors raised by hetnet."""

    code = "HETNET_ERROR"


class HypothesisError(HetnetError, ValueError):
    """A network does not satisfy one of the structural hypotheses."""

    code = "HYPOTHESIS"

    def __init__(self, tag: str, detail: str):
        super().__init__(f"{tag}: {detail}")
        self.tag = tag
        self.detail = detail


class SectionError(HetnetError, ValueError):
    """A point cannot be carried through a local or global map.

    ``leg`` is filled in by :func:`hetnet.local.return_map` with the 1-based
    index of the transition that failed.
    """

    code = "SECTION_ERROR"

    def __init__(self, message: str, *, leg: int | None = None):
        super().__init__(message)
        self.leg = leg

    def __str__(self) -> str:
        base = super().__str__()
        if self.leg is None:
            return base
        return f"{base} (leg {self.leg})"


class OnStableManifoldError(SectionError):
    """x = 0: the point never leaves the linear chart (infinite flight time)."""

    code = "ON_STABLE_MANIFOLD"


class OutsideChartError(SectionError):
    """The expanding coordinates already lie on or beyond the exit sphere."""

    code = "OUTSIDE_CHART"


class DegenerateGlobalMapError(SectionError):
    """The global map fails the non-degeneracy condition or is singular."""

    code = "DEGENERATE_GLOBAL_MAP"


class EscapedError(SectionError):
    """An orbit of the return map left the linear chart."""

    code = "ESCAPED"


class StiffAbort(HetnetError, RuntimeError):
    """Adaptive step size underflowed during integration."""

    code = "STIFF_ABORT"

    def __init__(self, t_reached: float, step: float):
        super().__init__(f"step size {step:.3e} underflowed at t={t_reached:.6g}")
        self.t_reached = t_reached
        self.step = step


class EpsTooLargeError(HetnetError, ValueError):
    """Detection balls around distinct equilibria would overlap."""

    code = "EPS_TOO_LARGE"


class ConnectionInferenceError(HetnetError, ValueError):
    """Connections could not be inferred; an explicit list is required."""

    code = "CONNECTION_INFERENCE"
