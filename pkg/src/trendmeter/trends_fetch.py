"""Optional live fetcher for daily topic volumes, with a CSV cache.

Off by default: CSV ingestion is the supported path, and the public
trends endpoint is unofficial and aggressively rate-limited. The fetcher
exists so a warm cache behaves exactly like checked-in CSV exports:
results persist in the load_trend_csv schema, one file per
(topic, geo, range), and cache hits never touch the network.
"""

from __future__ import annotations

import csv
import json
import re
import threading
import time
from pathlib import Path

from .errors import FetchError, ThrottledError
from .trends import TrendSeries, load_trend_csv

_EXPLORE_URL = "https://trends.google.com/trends/api/explore"
_WIDGET_URL = "https://trends.google.com/trends/api/widgetdata/multiline"


def _http_transport(topic_id: str, geo: str, start: str, end: str):
    """Fetch daily volumes from the public trends JSON API.

    Returns a list of (iso_date, volume) pairs. Raises ThrottledError on
    quota responses and FetchError on anything else.
    """
    import requests

    session = requests.Session()
    session.headers["User-Agent"] = "Mozilla/5.0 (X11; Linux x86_64)"
    payload = {
        "comparisonItem": [
            {"keyword": topic_id, "geo": geo, "time": f"{start} {end}"}
        ],
        "category": 0,
        "property": "",
    }
    try:
        resp = session.get(
            _EXPLORE_URL,
            params={"hl": "en-US", "tz": "0", "req": json.dumps(payload)},
            timeout=30,
        )
        if resp.status_code == 429:
            raise ThrottledError("trends endpoint quota exceeded (HTTP 429)")
        resp.raise_for_status()
        # responses carry an anti-JSON prefix like ")]}'," before the body
        body = json.loads(re.sub(r"^[^{]*", "", resp.text, count=1))
        widget = next(
            w for w in body["widgets"] if w.get("id") == "TIMESERIES"
        )
        resp = session.get(
            _WIDGET_URL,
            params={
                "hl": "en-US",
                "tz": "0",
                "req": json.dumps(widget["request"]),
                "token": widget["token"],
            },
            timeout=30,
        )
        if resp.status_code == 429:
            raise ThrottledError("trends endpoint quota exceeded (HTTP 429)")
        resp.raise_for_status()
        data = json.loads(re.sub(r"^[^{]*", "", resp.text, count=1))
        points = data["default"]["timelineData"]
    except ThrottledError:
        raise
    except requests.RequestException as exc:
        raise FetchError(f"network failure: {exc}") from exc
    except (KeyError, StopIteration, ValueError) as exc:
        raise FetchError(f"response not parseable: {exc}") from exc

    out = []
    for point in points:
        stamp = time.strftime("%Y-%m-%d", time.gmtime(int(point["time"])))
        out.append((stamp, int(point["value"][0])))
    return out


class TrendFetcher:
    """Cached, rate-limited access to daily volumes per (topic, geo, range).

    ``transport(topic_id, geo, start, end) -> [(iso_date, volume), ...]``
    is injectable for testing. All real requests pass through one gate
    that enforces ``min_interval`` seconds of spacing; failures retry up
    to ``max_retries`` times with exponential backoff, except quota
    responses, which surface immediately as ThrottledError.
    """

    def __init__(
        self,
        cache_dir,
        transport=None,
        min_interval: float = 1.0,
        max_retries: int = 3,
        backoff: float = 2.0,
        sleep=time.sleep,
    ):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.transport = transport or _http_transport
        self.min_interval = min_interval
        self.max_retries = max_retries
        self.backoff = backoff
        self._sleep = sleep
        self._gate = threading.Lock()
        self._last_request = 0.0

    def cache_path(self, topic_id: str, geo: str, date_range) -> Path:
        start, end = date_range
        slug = re.sub(r"[^A-Za-z0-9_-]+", "-", topic_id)
        return self.cache_dir / f"{slug}_{geo}_{start}_{end}.csv"

    def fetch(self, topic_id: str, geo: str, date_range) -> TrendSeries:
        """Return the raw series, from cache when possible.

        ``date_range`` is a pair of ISO dates ("2016-01-01", "2017-12-31").
        A second identical call is a cache hit and issues no requests.
        """
        path = self.cache_path(topic_id, geo, date_range)
        if not path.exists():
            rows = self._request_with_retries(topic_id, geo, *date_range)
            self._write_cache(path, topic_id, geo, rows)
        series = load_trend_csv(path)
        if len(series) != 1:
            raise FetchError(f"cache file {path} holds {len(series)} series")
        return series[0]

    def _request_with_retries(self, topic_id, geo, start, end):
        last_error = None
        for attempt in range(self.max_retries):
            self._rate_limit()
            try:
                return self.transport(topic_id, geo, start, end)
            except ThrottledError:
                raise
            except FetchError as exc:
                last_error = exc
                if attempt + 1 < self.max_retries:
                    self._sleep(self.backoff**attempt)
        raise FetchError(
            f"fetch {topic_id}/{geo} failed after {self.max_retries} "
            f"attempts: {last_error}"
        )

    def _rate_limit(self):
        with self._gate:
            wait = self.min_interval - (time.monotonic() - self._last_request)
            if wait > 0:
                self._sleep(wait)
            self._last_request = time.monotonic()

    @staticmethod
    def _write_cache(path: Path, topic_id, geo, rows):
        tmp = path.with_suffix(".tmp")
        with tmp.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["topic_id", "geo", "date", "volume"])
            for date, volume in rows:
                writer.writerow([topic_id, geo, date, int(volume)])
        tmp.replace(path)
