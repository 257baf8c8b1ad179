from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..energy import pairwise


@dataclass(frozen=True)
class LabelSpace:
    """Ordered candidate displacements ``(mh, mv)``.

    Ordering is ascending ``|mh| + |mv|`` with lexicographic tie-breaking,
    which is also the expansion sweep order.
    """

    labels: tuple

    def __post_init__(self):
        labels = tuple((int(h), int(v)) for h, v in self.labels)
        if not labels:
            raise ConfigError("label space is empty")
        if len(set(labels)) != len(labels):
            raise ConfigError("duplicate labels")
        if (0, 0) not in labels:
            raise ConfigError("label space must contain the zero displacement")
        object.__setattr__(self, "labels", tuple(sorted(labels, key=lambda hv: (abs(hv[0]) + abs(hv[1]), hv))))

    @classmethod
    def stereo(cls, wx, signed=False):
        lo = -wx if signed else 0
        return cls(tuple((d, 0) for d in range(lo, wx + 1)))

    @classmethod
    def flow(cls, wx, wy):
        return cls(tuple(itertools.product(range(-wx, wx + 1), range(-wy, wy + 1))))

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    @property
    def window(self):
        return (max(abs(h) for h, _ in self.labels), max(abs(v) for _, v in self.labels))

    @property
    def arrays(self):
        arr = np.asarray(self.labels, dtype=np.int64)
        return arr[:, 0], arr[:, 1]

    def verify_metric(self, tau) -> bool:
        """Check that the truncated pairwise penalty is a metric on these labels."""
        h, v = self.arrays
        d = pairwise(h[:, None] - h[None, :], v[:, None] - v[None, :], tau)
        if np.any(np.diag(d) != 0) or np.any(d != d.T):
            return False
        off = ~np.eye(len(h), dtype=bool)
        if np.any(d[off] <= 0):
            return False
        # d[a, c] <= d[a, b] + d[b, c] for every triple
        return bool(np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-12))
