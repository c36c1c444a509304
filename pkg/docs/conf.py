# Configuration file for the Sphinx documentation builder.
#
# For the full list of options see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath("../"))


# -- Project information -----------------------------------------------------

project = 'concord'
copyright = "2026, the concord developers"
author = "the concord developers"


# -- General configuration ---------------------------------------------------

extensions = ['myst_parser', 'sphinx.ext.autodoc', 'sphinx.ext.napoleon']

# numpy-style docstrings only
napoleon_google_docstring = False

templates_path = ['_templates']

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']


# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
