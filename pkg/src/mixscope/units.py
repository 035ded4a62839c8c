"""Satoshi/BTC conversion at I/O boundaries.

Everything inside the library is integer satoshis.  Decimal BTC only shows
up in CLI flags and human-facing output.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation

SAT_PER_BTC = 100_000_000


def btc_to_sat(text: str | int | Decimal) -> int:
    """Convert a decimal BTC amount to satoshis exactly.

    Rejects negative amounts and anything with more than 8 decimals.
    """
    try:
        amount = Decimal(str(text).strip())
    except InvalidOperation:
        raise ValueError(f"not a decimal BTC amount: {text!r}") from None
    if not amount.is_finite():
        raise ValueError(f"not a finite BTC amount: {text!r}")
    if amount < 0:
        raise ValueError(f"negative BTC amount: {text!r}")
    exponent = amount.normalize().as_tuple().exponent
    if isinstance(exponent, int) and exponent < -8:
        raise ValueError(f"more than 8 decimals: {text!r}")
    return int(amount * SAT_PER_BTC)


def sat_to_btc(sat: int) -> str:
    """Render satoshis as an 8-decimal fixed-point BTC string."""
    sign = "-" if sat < 0 else ""
    whole, frac = divmod(abs(int(sat)), SAT_PER_BTC)
    return f"{sign}{whole}.{frac:08d}"
