"""Expected Shortfall from integrated VaR via the four-point discretization.

For models without a closed-form ES, the tail average of VaR is approximated
by the mean of the VaR at four nodes spread between the requested level and
the extreme end of its tail.
"""
from __future__ import annotations


class EsBridgeError(ValueError):
    pass


class NodeEvaluationError(EsBridgeError):
    """A VaR evaluation failed at one of the four nodes."""

    def __init__(self, node, original):
        super().__init__(f"VaR evaluation failed at node {node}: {original}")
        self.node = node
        self.original = original


def tail_side(alpha: float) -> str:
    if not 0.0 < alpha < 1.0:
        raise EsBridgeError(f"alpha must be in (0,1), got {alpha}")
    return "right" if alpha >= 0.5 else "left"


def es_nodes(alpha: float) -> tuple:
    """The four evaluation levels: alpha plus three points deeper in its tail."""
    ind = 1.0 if alpha >= 0.5 else 0.0
    return (alpha,
            0.75 * alpha + 0.25 * ind,
            0.50 * alpha + 0.50 * ind,
            0.25 * alpha + 0.75 * ind)


def es_discretized(var_at, alpha: float, side: str | None = None) -> float:
    """Average the VaR over the four tail nodes.

    ``var_at`` maps a level in (0,1) to a VaR.  For a monotone var function
    the result is at least as extreme as var_at(alpha) itself.
    """
    inferred = tail_side(alpha)
    if side is not None and side != inferred:
        raise EsBridgeError(f"side '{side}' inconsistent with alpha={alpha}")
    total = 0.0
    for node in es_nodes(alpha):
        try:
            total += var_at(node)
        except Exception as exc:                    # noqa: BLE001
            raise NodeEvaluationError(node, exc) from exc
    return total / 4.0
