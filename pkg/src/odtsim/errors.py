"""Exception types shared across the package."""


class OdtsimError(Exception):
    """Base class for all package errors."""


class UnknownStop(OdtsimError):
    """A stop id does not resolve against the loaded stop set."""


class MissingReportedStop(OdtsimError):
    """Vehicle has no reported stop, so the location check cannot run."""


class UnknownStopPair(OdtsimError):
    """The travel provider has no entry for the requested stop pair."""


class UnknownRequest(OdtsimError):
    """Request id not known to the engine."""


class AlreadyTerminal(OdtsimError):
    """The request already reached a terminal state."""


class NoIdleStopInZone(OdtsimError):
    """A zone has no stop flagged as an idle location."""


class VehicleOffline(OdtsimError):
    """Operation requires a signed-in vehicle."""


class EmptyEmpiricalFile(OdtsimError):
    """Empirical reaction-time model has no samples to draw from."""


class ScenarioInvalid(OdtsimError):
    """Scenario failed validation; the message names the first failing reference."""


class UnpairedSignIn(OdtsimError):
    """Sign-in/sign-out events do not pair up for some vehicle."""


class UnknownMode(OdtsimError):
    """Survey mode string is not in the hierarchy mapping."""


class ZeroRiders(OdtsimError):
    """Cost per rider is undefined for zero riders served."""


class FeedError(OdtsimError):
    """Fixed-route feed is structurally invalid."""
