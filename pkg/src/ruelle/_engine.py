"""Kernel engine facade.

Re-exports the (possibly jit-compiled) kernels from :mod:`ruelle._kernels`.
The engine choice is fixed at import time by ``RUELLE_NUMBA``; results are
deterministic per engine since trajectories are independent and reductions
happen outside the parallel region in proposal order.
"""

from ._kernels import (
    ENGINE,
    FIELD_ELLIPSOID,
    FIELD_PFAMILY,
    STATUS_ENERGY_DRIFT,
    STATUS_OK,
    STATUS_UNDERSAMPLED,
    batch_lift,
    cdet_phase,
    field_eval,
    field_eval_rot,
    resymplectify,
    traj_lift,
    traj_record,
)

__all__ = [
    "ENGINE",
    "FIELD_ELLIPSOID",
    "FIELD_PFAMILY",
    "STATUS_ENERGY_DRIFT",
    "STATUS_OK",
    "STATUS_UNDERSAMPLED",
    "batch_lift",
    "cdet_phase",
    "field_eval",
    "field_eval_rot",
    "resymplectify",
    "traj_lift",
    "traj_record",
]
