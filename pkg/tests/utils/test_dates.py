from datetime import date, datetime, timedelta, timezone

import pytest

from sentidrop.utils.dates import (
    ensure_utc,
    format_iso_datetime,
    month_key,
    months_between,
    parse_iso_datetime,
)


def test_naive_is_taken_as_utc():
    assert ensure_utc(datetime(2024, 9, 1, 12)) == datetime(
        2024, 9, 1, 12, tzinfo=timezone.utc
    )


def test_aware_is_converted():
    value = datetime(2024, 9, 1, 12, tzinfo=timezone(timedelta(hours=2)))
    assert ensure_utc(value).hour == 10
    assert ensure_utc(value).tzinfo is timezone.utc


def test_parse_and_format():
    parsed = parse_iso_datetime(" 2024-10-05T08:30:00+02:00 ")
    assert format_iso_datetime(parsed) == "2024-10-05T06:30:00Z"
    assert parse_iso_datetime("2024-10-05") == datetime(2024, 10, 5, tzinfo=timezone.utc)


def test_month_key():
    assert month_key(date(2024, 3, 31)) == "2024-03"


@pytest.mark.parametrize(
    "value,expected",
    [(date(2024, 9, 30), 0), (date(2024, 10, 1), 1), (date(2025, 1, 15), 4), (date(2024, 8, 31), -1)],
)
def test_months_between(value, expected):
    assert months_between(date(2024, 9, 1), value) == expected
