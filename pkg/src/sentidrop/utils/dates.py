from datetime import date, datetime, timezone

from sentidrop.types import MonthKey

#: First day of the default academic term.
DEFAULT_TERM_START = date(2024, 9, 1)


def ensure_utc(value: datetime) -> datetime:
    """Ensure a date is timezone aware and expressed in UTC.

    Naive dates are taken to be in UTC already.
    """
    if value.tzinfo is None:
        return value.replace(tzinfo=timezone.utc)
    return value.astimezone(timezone.utc)


def parse_iso_datetime(value: str) -> datetime:
    """Parse an ISO 8601 date or date-time string into an aware UTC date."""
    return ensure_utc(datetime.fromisoformat(value.strip()))


def format_iso_datetime(value: datetime) -> str:
    return ensure_utc(value).isoformat().replace("+00:00", "Z")


def month_key(value: datetime | date) -> MonthKey:
    return f"{value.year:04d}-{value.month:02d}"


def months_between(start: date, value: datetime | date) -> int:
    """Number of calendar months from ``start``'s month to ``value``'s month."""
    return (value.year - start.year) * 12 + (value.month - start.month)
