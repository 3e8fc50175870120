from ._accel import USE_NUMBA

__all__ = ["USE_NUMBA"]
