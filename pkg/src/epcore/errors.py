"""Exception hierarchy.

Every domain failure derives from :class:`EpcoreError` and carries a short
machine-readable ``code`` that the CLI reports next to exit status 1.
Configuration problems use :class:`ConfigError` (exit status 2).
"""


class EpcoreError(Exception):
    code = "domain_error"


class ConfigError(EpcoreError):
    code = "config_error"


class EigenError(EpcoreError):
    """The dense eigen-solver did not converge."""

    code = "eig_failed"

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class NearDefective(EpcoreError):
    """A left/right overlap is too small to normalize; an EP is close by."""

    code = "near_defective"

    def __init__(self, message, index, overlap):
        super().__init__(message)
        self.index = index
        self.overlap = overlap


class NotDefective(EpcoreError):
    code = "not_defective"


class CrossingNotEP(EpcoreError):
    """Couplings vanish: the levels cross instead of coalescing."""

    code = "crossing_not_ep"


class NonDiagonalizableCrossing(CrossingNotEP):
    """Exactly one coupling vanishes: a Jordan block without branching."""

    code = "nondiagonalizable_crossing"


class DegenerateFamily(EpcoreError):
    code = "degenerate_family"


class PoleHit(EpcoreError):
    code = "pole_hit"


class NotResonant(EpcoreError):
    code = "not_resonant"


class InvalidRegion(EpcoreError):
    code = "invalid_region"


class NoConvergence(EpcoreError):
    code = "no_convergence"


class ClusterAmbiguous(EpcoreError):
    code = "cluster_ambiguous"


class OrderMismatch(EpcoreError):
    code = "order_mismatch"


class InsufficientParameters(EpcoreError):
    code = "insufficient_parameters"


class RefineSampling(EpcoreError):
    code = "refine_sampling"


class TrackingFailed(EpcoreError):
    code = "tracking_failed"


class BadFit(EpcoreError):
    code = "bad_fit"

    def __init__(self, message, r_squared=None):
        super().__init__(message)
        self.r_squared = r_squared


class NotIsolated(EpcoreError):
    code = "not_isolated"


class FitFailed(EpcoreError):
    code = "fit_failed"


class BrokenPhase(EpcoreError):
    code = "broken_phase"


class MetricBlowup(EpcoreError):
    code = "metric_blowup"

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition
