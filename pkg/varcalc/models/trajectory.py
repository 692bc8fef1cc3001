from dataclasses import dataclass
from typing import Tuple

import numpy as np

from varcalc.exceptions import DimensionError, InvalidArgumentError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    """
    Time grid plus state samples.

    `time_label` is "t" for continuous flows and "k" for index-stamped discrete sequences.
    """

    times: np.ndarray
    states: np.ndarray
    labels: Tuple[str, ...]
    time_label: str = "t"

    def __post_init__(self):
        times = _frozen(np.atleast_1d(self.times))
        states = np.asarray(self.states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(times.size, -1)
        states = _frozen(states)
        if states.shape[0] != times.size:
            raise DimensionError(f"{times.size} times but {states.shape[0]} state rows")
        if len(self.labels) != states.shape[1]:
            raise DimensionError(f"{len(self.labels)} labels for states of width {states.shape[1]}")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self) -> int:
        return self.times.size

    def column(self, label: str) -> np.ndarray:
        try:
            return self.states[:, self.labels.index(label)]
        except ValueError:
            raise KeyError(f"no state component named {label!r}; have {list(self.labels)}")

    def block(self, prefix: str) -> np.ndarray:
        """All columns whose label is `prefix` followed by an index, in order."""
        idx = [i for i, lab in enumerate(self.labels) if lab.startswith(prefix) and lab[len(prefix):].isdigit()]
        return self.states[:, idx]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]
