"""Exception hierarchy shared by every mbss module."""


class MbssError(Exception):
    """Base class for numerical and modelling failures."""


class SingularMatrix(MbssError):
    pass


class NoConvergence(MbssError):
    pass


class DomainError(MbssError):
    """Dynamics evaluated outside their domain (ball touching the magnet)."""


class DegenerateEquilibrium(DomainError):
    """Equilibrium with zero ball position; cannot be linearized."""


class NotControllable(MbssError):
    pass


class NotObservable(MbssError):
    pass


class NoStabilizingSeed(MbssError):
    pass


class ComplexCoefficients(MbssError):
    """Pole set is not closed under conjugation."""


class ConfigError(Exception):
    """Invalid run configuration. Carries every problem found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
