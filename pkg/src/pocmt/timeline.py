"""Two-timescale clock: consensus epochs grouped into human windows."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Timeline:
    """Maps epoch indices onto human windows.

    ``epochs_per_window`` is E = Delta_h / Delta_e. The horizon is given in
    epochs; a trailing partial window is allowed and closes at the last epoch.
    """

    epochs_per_window: int = 1
    horizon_epochs: int = 3000

    def __post_init__(self) -> None:
        if self.epochs_per_window < 1:
            raise ValueError("epochs_per_window must be >= 1")
        if self.horizon_epochs < 1:
            raise ValueError("horizon_epochs must be >= 1")

    def _check(self, t: int) -> None:
        if not 0 <= t < self.horizon_epochs:
            raise IndexError(f"epoch {t} outside horizon [0, {self.horizon_epochs})")

    def window_of(self, t: int) -> int:
        self._check(t)
        return t // self.epochs_per_window

    def is_window_boundary(self, t: int) -> bool:
        """True when the window-boundary H update fires after epoch ``t``."""
        self._check(t)
        return (t + 1) % self.epochs_per_window == 0 or t == self.horizon_epochs - 1

    @property
    def window_count(self) -> int:
        return -(-self.horizon_epochs // self.epochs_per_window)

    def epochs_in(self, d: int) -> range:
        if not 0 <= d < self.window_count:
            raise IndexError(f"window {d} outside [0, {self.window_count})")
        start = d * self.epochs_per_window
        return range(start, min(start + self.epochs_per_window, self.horizon_epochs))
