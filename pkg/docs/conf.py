# Sphinx configuration for the ncvnwsim documentation
import os
import sys

sys.path.insert(0, os.path.abspath(".."))

import ncvnwsim  # noqa: E402

# -- Project -----------------------------------------------------------------
project = "ncvnwsim"
author = ncvnwsim.__AUTHOR__
copyright = "2026, " + author
release = ncvnwsim.__VERSION__
version = ".".join(release.split(".")[:2])

# -- Build -------------------------------------------------------------------
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx_rtd_theme",
]

# Docstrings carry their own :type: fields
autodoc_typehints = "none"
autodoc_member_order = "bysource"
autodoc_default_options = {"undoc-members": False, "show-inheritance": True}

exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

# -- HTML --------------------------------------------------------------------
html_theme = "sphinx_rtd_theme"
