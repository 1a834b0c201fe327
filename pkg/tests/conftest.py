"""Shared fixtures: one small synthetic scene and a reference model.

Both are session-scoped because dense descriptor extraction plus the
tensor factorisation take a couple of seconds per frame stack.
"""

import pytest

import emdtrack as et


@pytest.fixture(scope="session")
def short_scene():
    params = et.SynthParams(n_frames=6)
    return et.generate_sequence(params)


@pytest.fixture(scope="session")
def ref_model(short_scene):
    frames, masks = short_scene
    return et.build_reference(frames[0], masks[0], et.TrackerConfig())
