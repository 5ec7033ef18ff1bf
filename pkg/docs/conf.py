# -*- coding: utf-8 -*-
#
# ringlaw documentation build configuration file.

import sys, os

sys.path.insert(0, os.path.abspath('..'))

from ringlaw import VERSION

extensions = ['sphinx.ext.autodoc']

source_suffix = '.rst'
master_doc = 'index'

project = u'ringlaw'
copyright = u'2026, the ringlaw developers'

version = '.'.join(VERSION.split('.')[:2])
release = VERSION

exclude_patterns = ['_build']
pygments_style = 'sphinx'

html_theme = 'default'
htmlhelp_basename = 'ringlawdoc'
