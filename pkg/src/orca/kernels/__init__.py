"""Hot numeric kernels.

Each kernel exists twice: a loop implementation compiled with numba and a
vectorised numpy implementation. The public name in each module dispatches
on :data:`orca._accel.USE_NUMBA`.
"""
