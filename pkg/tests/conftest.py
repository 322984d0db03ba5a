import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from models import Ensemble, SchemeKind  # noqa: E402


def build_ensemble(states, h=0.25, n_steps=4, coupled=False, seed=1, lane=0, diverged_step=None,
                   scheme=SchemeKind.PLMC):
    states = np.asarray(states, dtype=np.float64)
    if diverged_step is None:
        diverged_step = np.full(states.shape[0], -1, dtype=np.int64)
    return Ensemble(scheme=scheme, model_name="test", h=h, n_steps=n_steps, master_seed=seed, lane=lane,
                    coupled=coupled, config_hash="test", states=states,
                    diverged_step=np.asarray(diverged_step, dtype=np.int64))


@pytest.fixture
def ensemble_factory():
    return build_ensemble
