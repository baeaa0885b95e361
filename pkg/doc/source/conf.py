# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys

sys.path.insert(0, os.path.abspath("../source"))

from create_docs_for_wllpypeline_config import main as create_docs


sys.path.insert(0, os.path.abspath("../.."))  # to find the package


# -- Project information -----------------------------------------------------

project = 'WLLpypeline'
copyright = '2024, the wllpypeline developers'
author = 'the wllpypeline developers'


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.mathjax',
    'sphinx_rtd_theme',
]

templates_path = ['_templates']

exclude_patterns = []


# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'

html_static_path = []

# autodoc
autodoc_typehints = "description"
autoclass_content = "class"


# napoleon options
napoleon_google_docstring = False
napoleon_include_init_with_doc = True

# one page per bundled experiment config
create_docs()
