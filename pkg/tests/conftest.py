import numpy as np
import pytest

from hermit.channel import ChannelRealization, calibrate_powers


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_channel(rng, B=4, U=2, snr_db=10.0, rho_db=20.0) -> ChannelRealization:
    H = crandn(rng, B, U)
    h_J = crandn(rng, B)
    Es, N0, Ej = calibrate_powers(H, h_J, snr_db, rho_db)
    return ChannelRealization(H=H, h_J=h_J, Es=Es, Ej=Ej, N0=N0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
