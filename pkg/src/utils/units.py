from __future__ import annotations

import numpy as np


def dbm_to_watts(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(p_w):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(p_w, dtype=float)) + 30.0


def db_to_ratio(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def ratio_to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(x, dtype=float))
