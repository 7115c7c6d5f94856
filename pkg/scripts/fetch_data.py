"""Fetch or rebuild the datasets used by the experiments.

Mauna Loa CO2, monthly means
    Historic vintage (1958-03 .. 2004-12, 557 non-missing months):
        http://cdiac.esd.ornl.gov/ftp/trends/co2/maunaloa.co2
        Rows are ``year m1 .. m12 annual`` with -99.99 marking a missing month.
    Current record from NOAA GML:
        https://gml.noaa.gov/webdata/ccgg/trends/co2/co2_mm_mlo.csv
        Comment lines start with '#'; columns year, month, decimal date, average, ...
    Filter: keep 1958-03 .. 2004-12, drop missing months (negative averages).
    Input is the decimal year ``year + (month - 0.5) / 12``; target is ppmv.

    Neither host is reachable from every environment.  ``--source statsmodels``
    rebuilds a monthly series from the weekly Mauna Loa record bundled with
    statsmodels (1958-03 .. 2001-12): weekly values are averaged per calendar
    month and months without any observation are dropped.

US annual precipitation (optional, not needed by the test suite)
    USHCN/GHCN station monthly totals for 1995 with station coordinates.
    Filter: keep stations with all twelve 1995 months present and sum them;
    the expected result is 5776 stations.  Inputs are (longitude, latitude),
    the target the annual total.  See :func:`annual_precipitation`.

Usage::

    python scripts/fetch_data.py --out data/maunaloa.csv [--source auto|noaa|cdiac|statsmodels]
"""

import argparse
import csv
import sys
import urllib.request
from pathlib import Path

import numpy as np

NOAA_URL = "https://gml.noaa.gov/webdata/ccgg/trends/co2/co2_mm_mlo.csv"
CDIAC_URL = "http://cdiac.esd.ornl.gov/ftp/trends/co2/maunaloa.co2"
FIRST, LAST = (1958, 3), (2004, 12)


def _in_window(year, month, last=LAST):
    return FIRST <= (year, month) <= last


def decimal_year(year, month):
    return year + (month - 0.5) / 12.0


def parse_noaa(text, last=LAST):
    out = []
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith(("#", "year")):
            continue
        f = line.split(",")
        year, month, value = int(f[0]), int(f[1]), float(f[3])
        if value > 0 and _in_window(year, month, last):
            out.append((decimal_year(year, month), value))
    return np.array(out)


def parse_cdiac(text, last=LAST):
    out = []
    for line in text.splitlines():
        f = line.split()
        if len(f) < 13 or not f[0].isdigit():
            continue
        year = int(f[0])
        for month, v in enumerate(f[1:13], start=1):
            value = float(v)
            if value > 0 and _in_window(year, month, last):
                out.append((decimal_year(year, month), value))
    return np.array(out)


def from_statsmodels():
    """Monthly means of the weekly record shipped with statsmodels."""
    from statsmodels.datasets import co2

    s = co2.load_pandas().data["co2"].dropna()
    monthly = s.groupby([s.index.year, s.index.month]).mean()
    rows = [(decimal_year(y, m), v) for (y, m), v in monthly.items() if _in_window(y, m)]
    return np.array(rows)


def _download(url, timeout=20):
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return resp.read().decode("utf-8", "replace")


def maunaloa(source="auto"):
    """Return ``(table, source_used)`` with columns decimal year and CO2 ppmv."""
    attempts = {"cdiac": (CDIAC_URL, parse_cdiac), "noaa": (NOAA_URL, parse_noaa)}
    order = ["cdiac", "noaa", "statsmodels"] if source == "auto" else [source]
    errors = []
    for name in order:
        if name == "statsmodels":
            return from_statsmodels(), name
        url, parse = attempts[name]
        try:
            return parse(_download(url)), name
        except Exception as err:  # any network or format failure falls through
            errors.append(f"{name}: {err}")
    raise RuntimeError("; ".join(errors))


def annual_precipitation(rows):
    """Annual totals for stations with a complete 1995 record.

    ``rows`` yields ``(station, lon, lat, year, month, value)`` with missing
    values as ``None`` or negative numbers.
    """
    months, where = {}, {}
    for station, lon, lat, year, month, value in rows:
        if year != 1995 or value is None or value < 0:
            continue
        months.setdefault(station, {})[month] = value
        where[station] = (lon, lat)
    keep = sorted(s for s, mm in months.items() if len(mm) == 12)
    return np.array([(*where[s], sum(months[s].values())) for s in keep]).reshape(-1, 3)


def write_table(path, header, table):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows([repr(float(v)) for v in row] for row in table)
    return path


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--out", default="data/maunaloa.csv")
    p.add_argument("--source", choices=["auto", "cdiac", "noaa", "statsmodels"], default="auto")
    args = p.parse_args(argv)
    table, used = maunaloa(args.source)
    write_table(args.out, ["year", "co2"], table)
    print(f"{len(table)} monthly values from {used} -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
