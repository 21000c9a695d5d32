from __future__ import annotations

import importlib
import logging
from importlib.metadata import entry_points

logger = logging.getLogger(__name__)

ENTRY_POINT_GROUP = "clockprobe.scenarios"


def autodiscover() -> None:
    """
    Import the built-in scenarios and every module advertised under the
    ``clockprobe.scenarios`` entry-point group.

    Importing triggers the @register decorators which populate the scenario
    registry. A plugin that fails to import is logged and skipped.
    """
    importlib.import_module("clockprobe.scenarios")
    for entry_point in entry_points(group=ENTRY_POINT_GROUP):
        try:
            entry_point.load()
        except Exception:
            logger.exception(f"could not load scenario plugin '{entry_point.name}'")
        else:
            logger.debug(f"loaded scenario plugin '{entry_point.name}'")
