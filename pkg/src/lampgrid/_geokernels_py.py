"""Pure Python geo kernels; fallback when the compiled module is absent.

Kept operation-for-operation identical to the compiled implementation so the
two backends agree bit-for-bit on IEEE doubles.
"""

from math import asin, cos, sin, sqrt

EARTH_RADIUS_M = 6371000.0
_DEG2RAD = 0.017453292519943295  # pi / 180


def haversine_m(lat1, lon1, lat2, lon2):
    """Great-circle distance in metres between two lat/lon points."""
    rlat1 = lat1 * _DEG2RAD
    rlat2 = lat2 * _DEG2RAD
    dlat = (lat2 - lat1) * _DEG2RAD
    dlon = (lon2 - lon1) * _DEG2RAD
    sa = sin(dlat * 0.5)
    sb = sin(dlon * 0.5)
    h = sa * sa + cos(rlat1) * cos(rlat2) * (sb * sb)
    if h > 1.0:
        h = 1.0
    return 2.0 * EARTH_RADIUS_M * asin(sqrt(h))


def radius_query(origin_lat, origin_lon, lats, lons, radius_m):
    """Indices and distances of all points within radius_m of the origin.

    Returned in input order; boundary is inclusive (d == radius_m counts).
    """
    out = []
    for i in range(len(lats)):
        d = haversine_m(origin_lat, origin_lon, lats[i], lons[i])
        if d <= radius_m:
            out.append((i, d))
    return out
