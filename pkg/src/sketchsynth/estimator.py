"""Scikit-learn style facade over the synthesizer.

``fit`` takes a sketch (source text, a path to a ``.pmls`` file or a parsed
model) and learns which hole completions satisfy the property; ``predict``
classifies completions given as rows of hole values in feature order.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .arp import MODES, SynthesisReport, brute_force, synthesize
from .lang import parse
from .lang.ast import Model

SketchInput = Union[str, os.PathLike, Model]


def load_sketch(src: SketchInput) -> Model:
    if isinstance(src, Model):
        return src
    if isinstance(src, os.PathLike) or (isinstance(src, str) and src.endswith(".pmls")):
        return parse(Path(src).read_text(encoding="utf-8"))
    if isinstance(src, str):
        return parse(src)
    raise TypeError(f"expected sketch text, a .pmls path or a Model, got {type(src).__name__}")


class SketchSynthesizer(BaseEstimator):
    """Find the hole completions of a sketch that satisfy a property.

    Parameters
    ----------
    bits : int
        Width of holes declared without an explicit ``??[lo,hi]`` domain.
    mode : {"all", "first-found"}
        ``all`` classifies every completion; ``first-found`` stops at the
        first verified sub-family.
    prop : str or None
        Name of an ``ltl`` property, ``"assert"``, or None for the first ltl
        property (falling back to assertions).
    state_cap : int or None
        Budget of explored states per checker call.
    method : {"arp", "brute"}
        Abstraction refinement or one-by-one enumeration.
    """

    def __init__(self, bits: int = 3, mode: str = "all", prop: Optional[str] = None,
                 state_cap: Optional[int] = None, method: str = "arp"):
        self.bits = bits
        self.mode = mode
        self.prop = prop
        self.state_cap = state_cap
        self.method = method

    def _validate_params(self) -> None:
        if not isinstance(self.bits, (int, np.integer)) or not 1 <= self.bits <= 16:
            raise ValueError(f"bits must be an integer within 1..16, got {self.bits!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.method not in ("arp", "brute"):
            raise ValueError(f"method must be 'arp' or 'brute', got {self.method!r}")
        if self.state_cap is not None and self.state_cap < 1:
            raise ValueError("state_cap must be positive")

    def fit(self, X: SketchInput, y=None) -> "SketchSynthesizer":
        self._validate_params()
        sketch = load_sketch(X)
        if self.method == "brute":
            report = brute_force(sketch, self.prop, int(self.bits), self.state_cap)
        else:
            report = synthesize(sketch, self.prop, int(self.bits), self.mode, self.state_cap)
        self.report_: SynthesisReport = report
        self.space_ = report.space
        self.feature_names_in_ = np.array(report.space.names, dtype=object)
        self.n_features_in_ = len(report.space.names)
        self.correct_boxes_ = report.correct
        return self

    def predict(self, X) -> np.ndarray:
        """Return a boolean per row: is that completion known to be correct?

        In ``first-found`` mode only the reported sub-family counts as
        correct, so ``False`` then means "not verified" rather than "wrong".
        """
        check_is_fitted(self, "report_")
        if self.n_features_in_ == 0:
            n = len(X)
            return np.full(n, bool(self.correct_boxes_), dtype=bool)
        X = check_array(X, dtype=np.int64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        out = np.zeros(X.shape[0], dtype=bool)
        for box in self.correct_boxes_:
            lo = np.array([b[0] for b in box])
            hi = np.array([b[1] for b in box])
            out |= np.all((X >= lo) & (X <= hi), axis=1)
        return out

    def solutions(self) -> np.ndarray:
        """All correct completions as rows of hole values."""
        check_is_fitted(self, "report_")
        rows = [tuple(v for _, v in k.items) for k in self.space_.members()
                if self.report_.is_correct(k)]
        return np.array(rows, dtype=np.int64).reshape(len(rows), self.n_features_in_)
