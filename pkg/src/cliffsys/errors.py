"""Error types.

Two broad families matter to callers (and to the CLI exit-code contract):
domain errors (the input is outside an operation's domain, exit code 2) and
convergence errors (the input may be fine but an iteration or summation did
not settle, exit code 3).
"""


class CliffsysError(Exception):
    pass


class DomainError(CliffsysError):
    pass


class ConvergenceError(CliffsysError):
    pass


# formal backend

class SingularLeadingTerm(DomainError):
    """Degree-0 part is not invertible in the finite-dimensional base algebra."""


class NonNilpotentArgument(DomainError):
    """exp requires a filtration-degree >= 1 argument."""


class BadLeadingTerm(DomainError):
    """Inverse square root requires degree-0 part equal to 1."""


class BadDecomposition(DomainError):
    """Polarization requires a skew-involution degree-0 part (and the stated base)."""


class RelationViolation(DomainError):
    """Matrix assignment does not satisfy the relations the normal form assumed."""

    def __init__(self, relation: str, residual: float):
        self.relation = relation
        self.residual = residual
        super().__init__(f"relation {relation!r} violated, residual {residual:.3e}")


# matrix backend

class Singular(DomainError):
    pass


class NoConvergence(ConvergenceError):
    pass


class SpectralConditionViolated(DomainError):
    pass


class NodeSingular(DomainError):
    def __init__(self, t: float):
        self.t = t
        super().__init__(f"quadrature integrand singular at node t={t!r}")


# geometry

class NotInvolution(DomainError):
    """Symmetrization base must square to +1 or -1."""


class NonPositiveWeight(DomainError):
    pass


class EtaNotSPD(DomainError):
    pass


class NotTangent(DomainError):
    pass


# orthogonalization

class PolarizationDomain(DomainError):
    def __init__(self, stage: int, reason: str = ""):
        self.stage = stage
        msg = f"polarization undefined at stage {stage}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class SystemViolation(DomainError):
    def __init__(self, t, residual=None):
        self.t = t
        self.residual = residual
        extra = f" (residual {residual:.3e})" if residual is not None else ""
        super().__init__(f"path value at t={t!r} is not a system{extra}")


class CostGuard(DomainError):
    pass


class InadmissibleIndex(DomainError):
    pass


class ConformBaseNotFound(DomainError):
    """No rational right-translator with square -1 anticommuting with the ratios."""


class NoContraction(ConvergenceError):
    pass


class DivergenceDetected(ConvergenceError):
    pass


class MethodUndefined(DomainError):
    def __init__(self, u):
        self.u = u
        super().__init__("method undefined at sample U")
