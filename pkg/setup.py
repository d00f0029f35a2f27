#!/usr/bin/env python
from setuptools import setup

setup(name = "agtrack",
      version = '0.1',
      description = "Multi-object tracking with flow-predicted tracklets and "
                    "graph-refined association",
      packages = ["agtrack", "agtrack.interface"],
      python_requires = ">=3.8",
      install_requires = ["numpy", "scipy"],
      extras_require = {"test": ["pytest"]},
      entry_points = {"console_scripts": ["agtrack = agtrack.cli:main"]})
