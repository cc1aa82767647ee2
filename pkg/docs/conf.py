# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

from pyEvade import __version__

master_doc = 'index'

extensions = [
    'sphinx.ext.intersphinx',
    'sphinx.ext.autodoc',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx_rtd_theme',
    'sphinx.ext.todo',
    'sphinx.ext.autosectionlabel',
]

html_theme = "sphinx_rtd_theme"

version = __version__
pygments_style = 'default'
source_suffix = ".rst"
project = u"pyEvade"
author = u"pyEvade developers"
