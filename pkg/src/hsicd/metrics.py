"""Binary change-detection accuracy measures from confusion counts."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    TP: int
    FP: int
    TN: int
    FN: int

    def __post_init__(self):
        if min(self.TP, self.FP, self.TN, self.FN) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self):
        return self.TP + self.FP + self.TN + self.FN

    @classmethod
    def from_maps(cls, pred, gt, mask=None):
        """Count over ``mask`` (all pixels when None); 1/True = changed."""
        pred = np.asarray(pred).astype(bool)
        gt = np.asarray(gt).astype(bool)
        if pred.shape != gt.shape:
            raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            pred, gt = pred[mask], gt[mask]
        return cls(
            TP=int(np.sum(pred & gt)),
            FP=int(np.sum(pred & ~gt)),
            TN=int(np.sum(~pred & ~gt)),
            FN=int(np.sum(~pred & gt)),
        )


def chance_agreement(c):
    n = c.total
    return ((c.TP + c.FP) * (c.TP + c.FN) + (c.FN + c.TN) * (c.FP + c.TN)) / n ** 2


def metrics(counts):
    """OA, kappa, F1, precision and recall.

    Undefined ratios (zero denominator, or chance agreement of 1 for kappa)
    are reported as 0 and their names listed under ``"undefined"``.
    """
    c = counts
    n = c.total
    if n <= 0:
        raise ValueError("metrics need at least one evaluated pixel")
    undefined = []
    oa = (c.TP + c.TN) / n
    pe = chance_agreement(c)
    if pe == 1:
        kappa = 0.0
        undefined.append("kappa")
    else:
        kappa = (oa - pe) / (1 - pe)
    if c.TP + c.FP:
        pr = c.TP / (c.TP + c.FP)
    else:
        pr = 0.0
        undefined.append("Pr")
    if c.TP + c.FN:
        re = c.TP / (c.TP + c.FN)
    else:
        re = 0.0
        undefined.append("Re")
    if pr + re:
        f1 = 2 * pr * re / (pr + re)
    else:
        f1 = 0.0
        undefined.append("F1")
    return {"OA": oa, "kappa": kappa, "F1": f1, "Pr": pr, "Re": re, "Pe": pe, "undefined": tuple(undefined)}
