import importlib.metadata

import slepiankit as m


def test_version():
    assert importlib.metadata.version("slepiankit") == m.__version__
