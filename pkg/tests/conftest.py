import numpy as np
import pytest

from photon_router import FIG1_PARAMS, calibrate_drive, trajectory

FIG2_SEED = 424242


@pytest.fixture(scope="session")
def fig2_params():
    return FIG1_PARAMS.with_(drive_ep=calibrate_drive(FIG1_PARAMS, 0.093))


@pytest.fixture(scope="session")
def fig2_record(fig2_params):
    """The big end-to-end record: ~2000 transits at the Fig. 2 operating
    point.  Shared across the pipeline acceptance tests; takes minutes."""
    rec = trajectory.simulate_record(
        fig2_params, trajectory.TransitModel(), trajectory.DetectorModel(),
        duration_s=0.24, seed=FIG2_SEED,
    )
    assert len(rec.transits) >= 2000
    return rec


@pytest.fixture(scope="session")
def fig2_record_no_atom(fig2_params):
    return trajectory.simulate_record(
        fig2_params, trajectory.TransitModel(arrival_rate_per_s=0.0),
        trajectory.DetectorModel(), duration_s=0.48, seed=FIG2_SEED + 1,
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
