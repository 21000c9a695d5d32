# Sphinx configuration for the cesium-clockprobe documentation.
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import sys
import tomllib
from pathlib import Path

DOCS = Path(__file__).resolve().parent

# autodoc imports the package from the source tree, no install needed
sys.path.insert(0, str(DOCS.parent / "src"))

with (DOCS.parent / "pyproject.toml").open("rb") as f:
    pyproject = tomllib.load(f)["project"]

# -- Project information -----------------------------------------------------

project = pyproject["name"]
copyright = "2025, Philipp Bosch"
author = "Philipp Bosch"
release = pyproject["version"]
version = ".".join(release.split(".")[:2])

# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "myst_parser",
]

exclude_patterns = ["_build"]
source_suffix = {
    ".rst": "restructuredtext",
    ".md": "markdown",
}

# -- HTML output -------------------------------------------------------------

html_theme = "furo"
html_title = f"{project} {release}"

# -- autodoc / napoleon ------------------------------------------------------

autodoc_member_order = "bysource"
autodoc_typehints = "description"
autodoc_default_options = {"show-inheritance": True}
napoleon_google_docstring = True
napoleon_numpy_docstring = False

# -- intersphinx -------------------------------------------------------------

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
}

# -- MyST / math -------------------------------------------------------------

myst_enable_extensions = ["dollarmath", "deflist"]
