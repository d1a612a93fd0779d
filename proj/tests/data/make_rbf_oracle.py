#!/usr/bin/env python3
"""Regenerates the thin-plate-spline oracle fixtures (rbf_*.fmat).

Reference values come from scipy.interpolate.RBFInterpolator with
kernel='thin_plate_spline', degree=1 and a fixed neighbor count — the same
local-fit scheme the library implements.
"""
import numpy as np
from scipy.interpolate import RBFInterpolator

MAGIC = b"FMAT1\x00\x00\x00"


def write_fmat(path, m):
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.uint64(m.shape[0]).tobytes())
        f.write(np.uint64(m.shape[1]).tobytes())
        f.write(np.asfortranarray(m).tobytes(order="F"))


def main():
    rng = np.random.default_rng(987123)
    centers = rng.uniform(0.0, 1.0, size=(40, 3))
    values = np.sin(centers[:, 0]) * np.cos(2.0 * centers[:, 1]) + centers[:, 2] ** 2
    queries = rng.uniform(0.1, 0.9, size=(8, 3))
    interp = RBFInterpolator(centers, values, neighbors=12,
                             kernel="thin_plate_spline", degree=1)
    expected = interp(queries)

    write_fmat("rbf_centers.fmat", centers)
    write_fmat("rbf_values.fmat", values)
    write_fmat("rbf_queries.fmat", queries)
    write_fmat("rbf_expected.fmat", expected)
    print("wrote rbf_{centers,values,queries,expected}.fmat")


if __name__ == "__main__":
    main()
