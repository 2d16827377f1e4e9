"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised for invalid mode tables, config files, or experiment specs."""


class SlowFadingViolation(ValueError):
    """Raised when FSMC transition probabilities leave [0, 1].

    The slot duration is too long (or the Doppler too high) for the
    one-step birth-death approximation to hold; the offending states are
    listed in the message instead of being silently clamped.
    """

    def __init__(self, states, detail=""):
        self.states = tuple(states)
        msg = f"slow-fading approximation violated in states {list(self.states)}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
