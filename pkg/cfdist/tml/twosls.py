import numpy as np

from ..config.constants import TWOSLS, WEAK_INSTRUMENT_TOL, WeakInstrument
from ..data.dataset import Dataset
from .types import Target, TmlEstimate


def twosls_baseline(data: Dataset, a: float = 1.0, a_ref: float = 0.0) -> TmlEstimate:
    """Just-identified IV slope, reported as the contrast β·(a - a_ref) with a sandwich se."""
    s = data.require_instrument()
    sc, ac, yc = s - s.mean(), data.a - data.a.mean(), data.y - data.y.mean()
    denom = float(np.sum(sc * ac))
    scale = data.n * float(np.std(s)) * float(np.std(data.a))
    if scale == 0.0 or abs(denom) < WEAK_INSTRUMENT_TOL * scale:
        raise WeakInstrument(f"Instrument-treatment covariance {denom:.3g} is too small for 2SLS")

    beta = float(np.sum(sc * yc)) / denom
    resid = yc - beta * ac
    se = float(np.sqrt(np.sum(sc**2 * resid**2))) / abs(denom)
    contrast = a - a_ref
    return TmlEstimate(target=Target.ate(a, a_ref), estimator=TWOSLS, values=[beta * contrast], ses=[se * abs(contrast)])
