"""Shared fixtures. Expensive trees are session-scoped."""

import pytest

from stepspace import bench, build_tree
from stepspace.scene import demo_two_surface_instance


@pytest.fixture(scope="session")
def demo_instance():
    return demo_two_surface_instance()


@pytest.fixture(scope="session")
def demo_tree(demo_instance):
    return build_tree(demo_instance)


@pytest.fixture(scope="session")
def stones10_instance():
    return bench.stones_instance(10, 12)


@pytest.fixture(scope="session")
def stones10_tree(stones10_instance):
    return build_tree(stones10_instance)


@pytest.fixture(scope="session")
def staircase_instance():
    return bench.staircase_instance(steps=6, n=8)


@pytest.fixture(scope="session")
def staircase_tree(staircase_instance):
    return build_tree(staircase_instance)
