"""Hybrid jammer mitigation for quantized massive MU-MIMO uplink receivers.

The receive chain is analog rank-one transform -> low-resolution ADCs ->
Bussgang-aware LMMSE equalizer. Modules:

- :mod:`hermit.channel`    synthetic LoS / non-LoS ULA channels and power calibration
- :mod:`hermit.transform`  adaptive analog transform (unconstrained, PQ, QQ, clustered)
- :mod:`hermit.converter`  midrise quantizer, optimal step size, Bussgang gain, gain control
- :mod:`hermit.equalizer`  LMMSE equalizer and 16-QAM hard detection
- :mod:`hermit.montecarlo` paired Monte Carlo BER sweeps
- :mod:`hermit.cli`        command-line front end
"""

from hermit.errors import ConfigurationError, NumericalError

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "NumericalError", "__version__"]
