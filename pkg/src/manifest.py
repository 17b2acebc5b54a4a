"""
Run manifests: every parameter, seed and library version of a command, as JSON.
"""
from __future__ import annotations

import datetime
import json
import platform

import numpy
import pandas
import scipy
import statsmodels


def versions():
    return {"python": platform.python_version(), "numpy": numpy.__version__, "scipy": scipy.__version__,
            "pandas": pandas.__version__, "statsmodels": statsmodels.__version__}


def write_manifest(path, command, parameters, **extra):
    """
    writes {command, parameters, versions, created, ...} to path

    :param str path: target JSON file
    :param str command: subcommand name
    :param dict parameters: resolved parameters including seeds
    """
    content = {"command": command, "parameters": parameters, "versions": versions(),
               "created": datetime.datetime.now(datetime.timezone.utc).isoformat()}
    content.update(extra)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(content, handle, indent=2, sort_keys=True, default=str)
        handle.write("\n")
    return content
