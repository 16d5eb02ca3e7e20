"""Sparse coefficient matrix mapping library terms to state derivatives."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class CoefficientMatrix:
    """p x d matrix xi with an activity mask.

    Masked-out entries are held at exactly zero; a term/equation pair that
    has been pruned never contributes to the model again.
    """

    xi: np.ndarray
    active_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.xi = np.array(self.xi, dtype=float)
        if self.xi.ndim != 2:
            raise ValueError(f"xi must be 2-D, got shape {self.xi.shape}")
        if self.active_mask is None:
            self.active_mask = np.ones(self.xi.shape, dtype=bool)
        else:
            self.active_mask = np.array(self.active_mask, dtype=bool)
            if self.active_mask.shape != self.xi.shape:
                raise ValueError("active_mask shape must match xi")
        self.xi = np.where(self.active_mask, self.xi, 0.0)

    @property
    def p(self) -> int:
        return self.xi.shape[0]

    @property
    def d(self) -> int:
        return self.xi.shape[1]

    def copy(self) -> "CoefficientMatrix":
        return CoefficientMatrix(self.xi.copy(), self.active_mask.copy())

    def support(self):
        """Set of (term_index, equation_index) pairs with nonzero entries."""
        rows, cols = np.nonzero(self.xi)
        return {(int(r), int(c)) for r, c in zip(rows, cols)}
