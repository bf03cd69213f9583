# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled geo kernels: the hot loop of fleet proximity queries.

Must stay operation-for-operation identical to _geokernels_py so both
backends agree bit-for-bit on IEEE doubles.
"""

from libc.math cimport asin, cos, sin, sqrt

EARTH_RADIUS_M = 6371000.0

cdef double _EARTH_RADIUS_M = 6371000.0
cdef double _DEG2RAD = 0.017453292519943295  # pi / 180


cdef inline double _haversine(double lat1, double lon1,
                              double lat2, double lon2) nogil:
    cdef double rlat1 = lat1 * _DEG2RAD
    cdef double rlat2 = lat2 * _DEG2RAD
    cdef double dlat = (lat2 - lat1) * _DEG2RAD
    cdef double dlon = (lon2 - lon1) * _DEG2RAD
    cdef double sa = sin(dlat * 0.5)
    cdef double sb = sin(dlon * 0.5)
    cdef double h = sa * sa + cos(rlat1) * cos(rlat2) * (sb * sb)
    if h > 1.0:
        h = 1.0
    return 2.0 * _EARTH_RADIUS_M * asin(sqrt(h))


def haversine_m(double lat1, double lon1, double lat2, double lon2):
    """Great-circle distance in metres between two lat/lon points."""
    return _haversine(lat1, lon1, lat2, lon2)


def radius_query(double origin_lat, double origin_lon,
                 double[:] lats, double[:] lons, double radius_m):
    """Indices and distances of all points within radius_m of the origin.

    Returned in input order; boundary is inclusive (d == radius_m counts).
    """
    cdef Py_ssize_t i, n = lats.shape[0]
    cdef double d
    out = []
    for i in range(n):
        d = _haversine(origin_lat, origin_lon, lats[i], lons[i])
        if d <= radius_m:
            out.append((i, d))
    return out
