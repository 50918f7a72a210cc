"""Solar-term calendar anomalies in daily returns.

Submodules: :mod:`~solarterm.calendar` (term instants and trading-day
alignment), :mod:`~solarterm.returns`, :mod:`~solarterm.descstats`,
:mod:`~solarterm.dummyreg`, :mod:`~solarterm.igarch`, :mod:`~solarterm.synth`,
:mod:`~solarterm.report`, :mod:`~solarterm.pipeline` and the command line in
:mod:`~solarterm.cli`.
"""

__version__ = "0.1.0"
