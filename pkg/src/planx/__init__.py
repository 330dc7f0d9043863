"""Plan transformation over persistent task trees, with fast projection."""

from importlib import resources


def data_path(name: str) -> str:
    """Filesystem path of a bundled plan, scenario or rules file."""
    return str(resources.files("planx") / "data" / name)


__version__ = "0.1.0"
